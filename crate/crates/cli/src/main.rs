use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use honeycomb_hofstadter::edge::{default_sites, edge_counts, DEFAULT_K_POINTS};
use honeycomb_hofstadter::flux::natural_window_sigma;
use honeycomb_hofstadter::pipeline::{enumerate_fluxes, process_flux};
use honeycomb_hofstadter::render::{render_bands, render_gaps};
use honeycomb_hofstadter::{run_pipeline, ChernStatus, ColorMode, Flux, RunConfig};

#[derive(Parser)]
#[command(name = "butterfly", version, about = "Colored Hofstadter butterfly of the honeycomb lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute Chern numbers for all fluxes up to --qmax and update the cache.
    Compute(RunArgs),
    /// Render the colored butterfly from the cache, computing missing fluxes.
    Render(RunArgs),
    /// Print the gaps and Chern numbers of one flux.
    Table(TableArgs),
    /// Cross-check every gap against the edge-state count (q <= 7).
    Verify(VerifyArgs),
    /// Render the black-and-white spectrum.
    Bw(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Chern,
    Natural,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 30)]
    qmax: u32,
    #[arg(long, default_value_t = 1920)]
    width: usize,
    #[arg(long, default_value_t = 1440)]
    height: usize,
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    emin: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    emax: f64,
    /// Base k samples per unit of q.
    #[arg(long, default_value_t = 200)]
    ppq: usize,
    #[arg(long, default_value_t = 0.1)]
    snap: f64,
    /// Narrowest processed gap; defaults to one pixel in energy.
    #[arg(long)]
    min_gap: Option<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Chern)]
    mode: Mode,
    #[arg(long, default_value = "butterfly-cache.txt")]
    cache: PathBuf,
    #[arg(long, default_value = "butterfly.ppm")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            q_max: self.qmax,
            width: self.width,
            height: self.height,
            e_min: self.emin,
            e_max: self.emax,
            points_per_q: self.ppq,
            snap_threshold: self.snap,
            min_gap_width: self.min_gap,
            color_mode: match self.mode {
                Mode::Chern => ColorMode::ChernDiverging,
                Mode::Natural => ColorMode::NaturalWindow,
            },
            cache_path: Some(self.cache.clone()),
            out_path: self.out.clone(),
            workers: self.workers,
        }
    }
}

#[derive(Args)]
struct TableArgs {
    /// Flux as P/Q.
    flux: Flux,
    #[arg(long, default_value_t = 200)]
    ppq: usize,
    #[arg(long, default_value_t = 0.1)]
    snap: f64,
    #[arg(long, default_value_t = 1e-4)]
    min_gap: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    qmax: u32,
    #[arg(long, default_value_t = DEFAULT_K_POINTS)]
    k_points: usize,
    #[arg(long, default_value_t = 1e-4)]
    min_gap: f64,
    #[arg(long, default_value_t = 200)]
    ppq: usize,
}

fn records_path(out: &std::path::Path) -> PathBuf {
    out.with_extension("records.txt")
}

fn compute(args: &RunArgs) -> Result<ExitCode> {
    let (_, summary) = run_pipeline(&args.config())?;
    println!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn render(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.config();
    let (records, summary) = run_pipeline(&cfg)?;
    let report = render_gaps(records.records(), &cfg);
    report.image.write_ppm(&cfg.out_path).with_context(|| format!("writing {}", cfg.out_path.display()))?;
    let rec_path = records_path(&cfg.out_path);
    records.save(&rec_path)?;
    println!("{summary}");
    println!("painted {} gaps, skipped {} outside the energy window", report.painted, report.skipped);
    println!("wrote {} and {}", cfg.out_path.display(), rec_path.display());
    Ok(ExitCode::SUCCESS)
}

fn bw(args: &RunArgs) -> Result<ExitCode> {
    let cfg = args.config();
    cfg.validate()?;
    render_bands(&cfg)?.write_ppm(&cfg.out_path)?;
    println!("wrote {}", cfg.out_path.display());
    Ok(ExitCode::SUCCESS)
}

fn table(args: &TableArgs) -> Result<ExitCode> {
    let flux = args.flux;
    if flux.q() < 2 {
        bail!("flux {flux} has no gaps");
    }
    let cfg = RunConfig {
        points_per_q: args.ppq,
        snap_threshold: args.snap,
        min_gap_width: Some(args.min_gap),
        ..RunConfig::default()
    };
    cfg.validate()?;
    let outcome = process_flux(flux, &cfg)?;
    println!("flux {flux}: {} gaps", outcome.records.len());
    println!("{:>4} {:>12} {:>12} {:>6} {:>6} {:>3} {:>12} {:>7}", "r", "e1", "e2", "sigma", "s", "st", "raw", "window");
    let mut sigmas = Vec::new();
    for rec in &outcome.records {
        let chern = rec.chern.expect("computed records carry a Chern number");
        let window = match natural_window_sigma(rec.r, flux) {
            Ok(w) if w == chern.sigma => format!("{w}"),
            Ok(w) => format!("{w} x"),
            Err(_) => "tie".to_string(),
        };
        println!(
            "{:>4} {:>12.6} {:>12.6} {:>6} {:>6} {:>3} {:>12.6} {:>7}",
            rec.r,
            rec.e1,
            rec.e2,
            chern.sigma,
            chern.s,
            chern.status.code(),
            chern.winding_raw,
            window
        );
        sigmas.push(chern.sigma.to_string());
    }
    println!("sigma: [{}]", sigmas.join(", "));
    let all_exact = outcome.records.iter().all(|r| r.chern.is_some_and(|c| c.status == ChernStatus::Exact));
    Ok(if all_exact { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn verify(args: &VerifyArgs) -> Result<ExitCode> {
    if args.qmax > 7 {
        bail!("verify is limited to q <= 7");
    }
    let cfg = RunConfig { points_per_q: args.ppq, min_gap_width: Some(args.min_gap), ..RunConfig::default() };
    let (mut checked, mut failed) = (0, 0);
    for flux in enumerate_fluxes(args.qmax) {
        let outcome = process_flux(flux, &cfg)?;
        let counts = edge_counts(flux, &outcome.records, args.k_points, default_sites(flux))?;
        for (rec, count) in outcome.records.iter().zip(&counts) {
            let sigma = rec.chern.expect("computed").sigma;
            checked += 1;
            let ok = sigma == count.left && count.right == -count.left;
            if !ok {
                failed += 1;
            }
            println!(
                "{flux} r={:<3} winding {sigma:>3}  left edge {:>3}  right edge {:>3}  {}",
                rec.r,
                count.left,
                count.right,
                if ok { "ok" } else { "MISMATCH" }
            );
        }
    }
    println!("{checked} gaps checked, {failed} mismatches");
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Compute(a) => compute(&a),
        Command::Render(a) => render(&a),
        Command::Table(a) => table(&a),
        Command::Verify(a) => verify(&a),
        Command::Bw(a) => bw(&a),
    }
}
