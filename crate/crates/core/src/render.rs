//! Raster output: the colored butterfly and its black-and-white spectrum.
//!
//! Images are binary portable pixmaps (`P6`). Row 0 is flux `1`, the bottom
//! row flux `0`; columns span `[e_min, e_max]`.

use std::io::Write;
use std::path::Path;

use crate::bulk::{band_extrema, default_grid_n, GapRecord};
use crate::error::Result;
use crate::flux::{natural_window_sigma, ChernStatus, Flux};
use crate::pipeline::{spectral_rows, ColorMode, RunConfig};

pub type Rgb = [u8; 3];

pub const BACKGROUND: Rgb = [0, 0, 0];
pub const WHITE: Rgb = [255, 255, 255];
/// Undecided gaps, and gaps without an interior window solution.
pub const NEUTRAL_GREY: Rgb = [128, 128, 128];

/// `|sigma|` at which the red and blue ramps saturate.
pub const SATURATION: i64 = 12;

/// Hues for `|sigma| > SATURATION`, cycled; positive and negative alternate
/// between the two rows.
pub const OVERFLOW_HUES: [[Rgb; 3]; 2] = [
    [[255, 140, 0], [255, 215, 0], [199, 21, 133]],
    [[0, 206, 209], [50, 205, 50], [138, 43, 226]],
];

/// Diverging palette: `0` white, positive towards red, negative towards blue.
pub fn sigma_color(sigma: i64) -> Rgb {
    if sigma == 0 {
        return WHITE;
    }
    let magnitude = sigma.abs();
    if magnitude > SATURATION {
        let row = usize::from(sigma < 0);
        return OVERFLOW_HUES[row][((magnitude - SATURATION - 1) % 3) as usize];
    }
    // Light tint at |sigma| = 1 down to the pure hue at saturation.
    let t = (magnitude - 1) as f64 / (SATURATION - 1) as f64;
    let fade = (200.0 * (1.0 - t)).round() as u8;
    if sigma > 0 {
        [255, fade, fade]
    } else {
        [fade, fade, 255]
    }
}

/// An RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let pixels = color.iter().copied().cycle().take(3 * width * height).collect();
        Image { width, height, pixels }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        let i = 3 * (y * self.width + x);
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_ppm())?;
        f.flush()?;
        Ok(())
    }
}

/// Pixel geometry shared by both renders.
#[derive(Debug, Clone, Copy)]
struct Frame {
    width: usize,
    height: usize,
    e_min: f64,
    e_max: f64,
}

impl Frame {
    fn new(cfg: &RunConfig) -> Self {
        Frame { width: cfg.width, height: cfg.height, e_min: cfg.e_min, e_max: cfg.e_max }
    }

    fn row(&self, flux: Flux) -> usize {
        let phi = flux.value::<f64>();
        ((1.0 - phi) * (self.height - 1) as f64).round() as usize
    }

    /// Columns whose centers lie in `[lo, hi]`, clipped to the frame.
    fn columns(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let dx = (self.e_max - self.e_min) / self.width as f64;
        let first = ((lo - self.e_min) / dx - 0.5).ceil().max(0.0);
        let last = ((hi - self.e_min) / dx - 0.5).floor().min(self.width as f64 - 1.0);
        (first <= last).then_some((first as usize, last as usize))
    }
}

/// Outcome of a colored render.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderReport {
    pub image: Image,
    pub painted: usize,
    /// Records with no pixel column inside the energy window.
    pub skipped: usize,
}

/// Color of one gap record under `mode`.
pub fn record_color(rec: &GapRecord<f64>, mode: ColorMode) -> Rgb {
    match mode {
        ColorMode::ChernDiverging => match rec.chern {
            Some(c) if c.status != ChernStatus::Undecided => sigma_color(c.sigma),
            _ => NEUTRAL_GREY,
        },
        ColorMode::NaturalWindow => match natural_window_sigma(rec.r, rec.flux) {
            Ok(sigma) => sigma_color(sigma),
            Err(_) => NEUTRAL_GREY,
        },
    }
}

/// Paint each gap span with its color on a black background. Larger `q` are
/// painted first so that the prominent low-`q` gaps stay on top.
pub fn render_gaps<'a, I>(records: I, cfg: &RunConfig) -> RenderReport
where
    I: IntoIterator<Item = &'a GapRecord<f64>>,
{
    let frame = Frame::new(cfg);
    let mut image = Image::filled(frame.width, frame.height, BACKGROUND);
    let mut ordered: Vec<&GapRecord<f64>> = records.into_iter().collect();
    // Stable: ties keep (q, p, r) order from the record set.
    ordered.sort_by(|a, b| b.flux.q().cmp(&a.flux.q()).then(a.flux.p().cmp(&b.flux.p())).then(a.r.cmp(&b.r)));
    let (mut painted, mut skipped) = (0, 0);
    for rec in ordered {
        let Some((x0, x1)) = frame.columns(rec.e1, rec.e2) else {
            skipped += 1;
            continue;
        };
        let y = frame.row(rec.flux);
        let color = record_color(rec, cfg.color_mode);
        for x in x0..=x1 {
            image.set(x, y, color);
        }
        painted += 1;
    }
    RenderReport { image, painted, skipped }
}

/// Black-and-white spectrum: bands black on white, one row per flux.
pub fn render_bands(cfg: &RunConfig) -> Result<Image> {
    let frame = Frame::new(cfg);
    let mut image = Image::filled(frame.width, frame.height, WHITE);
    let mut rows = spectral_rows(cfg.q_max);
    rows.sort_by(|a, b| b.q().cmp(&a.q()).then(a.p().cmp(&b.p())));
    for flux in rows {
        let y = frame.row(flux);
        for (lo, hi) in band_extrema::<f64>(flux, default_grid_n(flux.q()))? {
            // Narrow bands still get one pixel.
            let span = frame.columns(lo, hi).or_else(|| {
                let mid = 0.5 * (lo + hi);
                frame.columns(mid, mid + (frame.e_max - frame.e_min) / frame.width as f64)
            });
            if let Some((x0, x1)) = span {
                for x in x0..=x1 {
                    image.set(x, y, BACKGROUND);
                }
            }
        }
    }
    Ok(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{reduce_flux, ChernResult};

    fn small() -> RunConfig {
        RunConfig { width: 192, height: 144, ..RunConfig::default() }
    }

    #[test]
    fn palette_shape() {
        assert_eq!(sigma_color(0), WHITE);
        assert_eq!(sigma_color(12), [255, 0, 0]);
        assert_eq!(sigma_color(-12), [0, 0, 255]);
        assert_eq!(sigma_color(1), [255, 200, 200]);
        assert_ne!(sigma_color(13), sigma_color(14));
        assert_ne!(sigma_color(13), sigma_color(-13));
        assert_eq!(sigma_color(13), sigma_color(16));
    }

    #[test]
    fn empty_records_give_black_frame() {
        let report = render_gaps(std::iter::empty(), &small());
        let ppm = report.image.to_ppm();
        assert!(ppm.starts_with(b"P6\n192 144\n255\n"));
        assert_eq!(ppm.len(), b"P6\n192 144\n255\n".len() + 192 * 144 * 3);
        assert!(report.image.pixels.iter().all(|&b| b == 0));
    }

    #[test]
    fn low_q_overdraws_high_q() {
        let cfg = small();
        let gap = |p, q, sigma| GapRecord {
            flux: reduce_flux(p, q).unwrap(),
            r: 1,
            e1: -1.0,
            e2: 1.0,
            chern: Some(ChernResult { sigma, s: 0, status: ChernStatus::Exact, winding_raw: sigma as f64 }),
        };
        // 1/2 and 71/143 share a row at this height.
        let recs = [gap(1, 2, 5), gap(71, 143, -5)];
        let report = render_gaps(recs.iter(), &cfg);
        assert_eq!(Frame::new(&cfg).row(recs[0].flux), Frame::new(&cfg).row(recs[1].flux));
        assert_eq!(report.image.get(96, Frame::new(&cfg).row(recs[0].flux)), sigma_color(5));
    }

    #[test]
    fn out_of_window_gaps_are_skipped() {
        let rec = GapRecord { flux: reduce_flux(1, 3).unwrap(), r: 1, e1: 3.5, e2: 4.0, chern: None };
        let report = render_gaps([rec].iter(), &small());
        assert_eq!((report.painted, report.skipped), (0, 1));
    }
}
