//! Flux enumeration and the gap/Chern pipeline with a persistent cache.

use std::fmt;
use std::path::PathBuf;

use num_integer::Integer;
use rayon::prelude::*;

use crate::bulk::{band_extrema, default_grid_n, detect_gaps, GapRecord};
use crate::cache::RecordSet;
use crate::error::{Error, Result};
use crate::flux::{reduce_flux, ChernStatus, Flux};
use crate::transfer::TransferContext;
use crate::winding::{chern_of_gap, TraceConfig, WindingConfig, DEFAULT_MAX_DEPTH};

/// How gaps are colored in a render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    /// By the computed Chern number.
    ChernDiverging,
    /// By the square-lattice window rule, for comparison.
    NaturalWindow,
}

/// Parameters of a pipeline run and its render.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub q_max: u32,
    pub width: usize,
    pub height: usize,
    pub e_min: f64,
    pub e_max: f64,
    pub points_per_q: usize,
    pub snap_threshold: f64,
    /// `None` means one pixel: `(e_max - e_min) / width`.
    pub min_gap_width: Option<f64>,
    pub color_mode: ColorMode,
    pub cache_path: Option<PathBuf>,
    pub out_path: PathBuf,
    /// Worker threads; `0` uses all cores.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            q_max: 30,
            width: 1920,
            height: 1440,
            e_min: -3.0,
            e_max: 3.0,
            points_per_q: crate::winding::DEFAULT_POINTS_PER_Q,
            snap_threshold: crate::flux::DEFAULT_SNAP_THRESHOLD,
            min_gap_width: None,
            color_mode: ColorMode::ChernDiverging,
            cache_path: None,
            out_path: PathBuf::from("butterfly.ppm"),
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.q_max < 1 {
            return fail("q_max must be at least 1");
        }
        if self.width < 16 || self.height < 16 {
            return fail("width and height must be at least 16 pixels");
        }
        if !(self.e_min < self.e_max) {
            return fail("e_min must be below e_max");
        }
        if self.points_per_q == 0 {
            return fail("points per q must be positive");
        }
        if !(self.snap_threshold >= 0.0) {
            return fail("snap threshold must be non-negative");
        }
        if let Some(w) = self.min_gap_width {
            if !(w > 0.0) {
                return fail("minimum gap width must be positive");
            }
        }
        Ok(())
    }

    /// Narrowest gap that is processed.
    pub fn min_gap(&self) -> f64 {
        self.min_gap_width.unwrap_or((self.e_max - self.e_min) / self.width as f64)
    }

    pub fn winding(&self) -> WindingConfig {
        WindingConfig {
            trace: TraceConfig { points_per_q: self.points_per_q, max_depth: DEFAULT_MAX_DEPTH },
            snap_threshold: self.snap_threshold,
        }
    }
}

/// Reduced fractions `p/q` with `0 < p < q <= q_max`, ordered by `q`, then `p`.
pub fn enumerate_fluxes(q_max: u32) -> Vec<Flux> {
    let mut out = Vec::new();
    for q in 2..=q_max {
        for p in 1..q {
            if p.gcd(&q) == 1 {
                out.push(reduce_flux(p as i64, q as i64).expect("valid coprime flux"));
            }
        }
    }
    out
}

/// Rows of a spectral render: [`enumerate_fluxes`] plus the gapless
/// endpoints `0/1` and `1/1`.
pub fn spectral_rows(q_max: u32) -> Vec<Flux> {
    let mut rows = vec![reduce_flux(0, 1).expect("0/1"), reduce_flux(1, 1).expect("1/1")];
    rows.extend(enumerate_fluxes(q_max));
    rows
}

/// Outcome of computing one flux.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxOutcome {
    pub flux: Flux,
    pub records: Vec<GapRecord<f64>>,
    /// Sampled gaps whose evaluation energies all lie in the spectrum of some
    /// fiber; they are grid artifacts and are dropped.
    pub closed: usize,
    pub transfer_evaluations: usize,
}

/// Detect the gaps of `flux` and compute their Chern numbers.
pub fn process_flux(flux: Flux, cfg: &RunConfig) -> Result<FluxOutcome> {
    let extrema = band_extrema::<f64>(flux, default_grid_n(flux.q()))?;
    let gaps = detect_gaps(flux, &extrema, cfg.min_gap());
    let ctx = TransferContext::new(flux);
    let winding = cfg.winding();
    let mut records = Vec::with_capacity(gaps.len());
    let mut closed = 0;
    let mut transfer_evaluations = 0;
    for gap in gaps {
        match chern_of_gap(&ctx, &gap, winding) {
            Ok(w) => {
                transfer_evaluations += w.evaluations;
                records.push(GapRecord { chern: Some(w.chern), ..gap });
            }
            Err(Error::DegenerateTransfer { .. }) => closed += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(FluxOutcome { flux, records, closed, transfer_evaluations })
}

/// Aggregate statistics of a record set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub fluxes: usize,
    /// Fluxes computed in this run (the rest came from the cache).
    pub computed_fluxes: usize,
    pub gaps: usize,
    pub exact: usize,
    pub snapped: usize,
    pub undecided: usize,
    /// Dropped grid-artifact gaps, counted for computed fluxes only.
    pub closed: usize,
    pub sigma_min: Option<i64>,
    pub sigma_max: Option<i64>,
    /// Decided results with `|sigma| >= q`.
    pub window_violations: usize,
    /// Decided results that fail `r = sigma p + s q`.
    pub diophantine_violations: usize,
    pub transfer_evaluations: usize,
}

impl Summary {
    pub fn from_records(set: &RecordSet) -> Self {
        let mut s = Summary { fluxes: set.fluxes.len(), ..Summary::default() };
        for rec in set.records() {
            s.gaps += 1;
            let Some(chern) = rec.chern else {
                s.undecided += 1;
                continue;
            };
            match chern.status {
                ChernStatus::Exact => s.exact += 1,
                ChernStatus::Snapped => s.snapped += 1,
                ChernStatus::Undecided => {
                    s.undecided += 1;
                    continue;
                }
            }
            s.sigma_min = Some(s.sigma_min.map_or(chern.sigma, |m| m.min(chern.sigma)));
            s.sigma_max = Some(s.sigma_max.map_or(chern.sigma, |m| m.max(chern.sigma)));
            if !chern.in_conjecture_window(rec.flux) {
                s.window_violations += 1;
            }
            if !chern.satisfies_diophantine(rec.r, rec.flux) {
                s.diophantine_violations += 1;
            }
        }
        s
    }

    fn percent(&self, n: usize) -> f64 {
        if self.gaps == 0 {
            0.0
        } else {
            100.0 * n as f64 / self.gaps as f64
        }
    }

    pub fn exact_percent(&self) -> f64 {
        self.percent(self.exact)
    }

    pub fn snapped_percent(&self) -> f64 {
        self.percent(self.snapped)
    }

    pub fn undecided_percent(&self) -> f64 {
        self.percent(self.undecided)
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fluxes: {} ({} computed, {} cached)", self.fluxes, self.computed_fluxes, self.fluxes - self.computed_fluxes)?;
        writeln!(f, "gaps: {} (closed grid artifacts dropped: {})", self.gaps, self.closed)?;
        writeln!(f, "exact: {} ({:.2}%)", self.exact, self.exact_percent())?;
        writeln!(f, "snapped: {} ({:.2}%)", self.snapped, self.snapped_percent())?;
        writeln!(f, "undecided: {} ({:.2}%)", self.undecided, self.undecided_percent())?;
        match (self.sigma_min, self.sigma_max) {
            (Some(lo), Some(hi)) => writeln!(f, "sigma range: [{lo}, {hi}]")?,
            _ => writeln!(f, "sigma range: none")?,
        }
        writeln!(f, "outside (-q, q): {}", self.window_violations)?;
        writeln!(f, "diophantine violations: {}", self.diophantine_violations)?;
        write!(f, "transfer evaluations: {}", self.transfer_evaluations)
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Compute every flux up to `cfg.q_max` not already in the cache.
///
/// The cache is loaded (and every decided record re-validated) first; it is
/// rewritten after each denominator so an interrupted run loses little work.
pub fn run_pipeline(cfg: &RunConfig) -> Result<(RecordSet, Summary)> {
    cfg.validate()?;
    let mut set = match &cfg.cache_path {
        Some(path) => RecordSet::load(path)?,
        None => RecordSet::default(),
    };
    let pool = thread_pool(cfg.workers)?;
    let fluxes = enumerate_fluxes(cfg.q_max);
    let mut computed_fluxes = 0;
    let mut closed = 0;
    let mut transfer_evaluations = 0;
    for q in 2..=cfg.q_max {
        let todo: Vec<Flux> = fluxes.iter().copied().filter(|f| f.q() == q && !set.contains(*f)).collect();
        if todo.is_empty() {
            continue;
        }
        let outcomes: Vec<FluxOutcome> =
            pool.install(|| todo.par_iter().map(|&f| process_flux(f, cfg)).collect::<Result<_>>())?;
        for outcome in outcomes {
            computed_fluxes += 1;
            closed += outcome.closed;
            transfer_evaluations += outcome.transfer_evaluations;
            set.insert_flux(outcome.flux, outcome.records);
        }
        if let Some(path) = &cfg.cache_path {
            set.save(path)?;
        }
    }
    // Only the requested range is reported, even if the cache holds more.
    let mut requested = RecordSet::default();
    for f in &fluxes {
        if let Some(records) = set.fluxes.get(f) {
            requested.insert_flux(*f, records.clone());
        }
    }
    let mut summary = Summary::from_records(&requested);
    summary.computed_fluxes = computed_fluxes;
    summary.closed = closed;
    summary.transfer_evaluations = transfer_evaluations;
    Ok((requested, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn farey_counts() {
        assert_eq!(enumerate_fluxes(5).len(), 9);
        assert!(enumerate_fluxes(1).is_empty());
        assert_eq!(spectral_rows(1).len(), 2);
        assert!(enumerate_fluxes(19).contains(&reduce_flux(8, 19).unwrap()));
        let f = enumerate_fluxes(7);
        assert!(f.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { width: 8, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { e_min: 1.0, e_max: 1.0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { q_max: 0, ..RunConfig::default() }.validate().is_err());
        assert!((RunConfig::default().min_gap() - 6.0 / 1920.0).abs() < 1e-15);
    }

    #[test]
    fn warm_cache_does_no_work() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            q_max: 4,
            cache_path: Some(dir.path().join("cache.txt")),
            workers: 1,
            ..RunConfig::default()
        };
        let (cold, s1) = run_pipeline(&cfg).unwrap();
        assert!(s1.transfer_evaluations > 0);
        let (warm, s2) = run_pipeline(&cfg).unwrap();
        assert_eq!(s2.transfer_evaluations, 0);
        assert_eq!(s2.computed_fluxes, 0);
        assert_eq!(cold.to_text(), warm.to_text());
    }
}
