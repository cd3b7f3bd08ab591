#![allow(dead_code)]

use std::f64::consts::TAU;
use std::sync::OnceLock;

use honeycomb_hofstadter::bulk::{band_extrema, default_grid_n, detect_gaps, GapRecord};
use honeycomb_hofstadter::flux::{reduce_flux, Flux};
use honeycomb_hofstadter::pipeline::{enumerate_fluxes, process_flux};
use honeycomb_hofstadter::transfer::{contracting_vector, period_transfer, step_matrix};
use honeycomb_hofstadter::RunConfig;
use honeycomb_hofstadter::winding::{trace_phase, TraceConfig};
use num_complex::Complex64;

pub type C2 = [[Complex64; 2]; 2];

pub fn flux(p: i64, q: i64) -> Flux {
    reduce_flux(p, q).unwrap()
}

pub fn gaps(flux: Flux, min_width: f64) -> Vec<GapRecord<f64>> {
    let extrema = band_extrema::<f64>(flux, default_grid_n(flux.q())).unwrap();
    detect_gaps(flux, &extrema, min_width)
}

/// Every gap wider than `0.02` that the pipeline keeps, for coprime fluxes
/// with `2 <= q <= 9`. Grid slivers at band touchings are already dropped.
pub fn catalogue() -> &'static [GapRecord<f64>] {
    static CAT: OnceLock<Vec<GapRecord<f64>>> = OnceLock::new();
    CAT.get_or_init(|| {
        let cfg = RunConfig { min_gap_width: Some(0.02), ..RunConfig::default() };
        enumerate_fluxes(9)
            .into_iter()
            .flat_map(|f| process_flux(f, &cfg).unwrap().records)
            .collect()
    })
}

/// Smallest `|a_m|` over one period; the complex transfer is undefined at zero.
pub fn min_hopping(flux: Flux, k: f64) -> f64 {
    (1..=flux.q()).map(|m| step_matrix(flux, m, 0.0, k).a_m.norm()).fold(f64::INFINITY, f64::min)
}

/// Energy at relative position `t` of the catalogue gap chosen by `pick`.
pub fn in_gap(pick: usize, t: f64) -> (GapRecord<f64>, f64) {
    let cat = catalogue();
    let g = cat[pick % cat.len()];
    (g, g.e1 + t * (g.e2 - g.e1))
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn j_form() -> C2 {
    [[c(0.0), c(-1.0)], [c(1.0), c(0.0)]]
}

pub fn mul(a: &C2, b: &C2) -> C2 {
    let mut out = [[c(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn adjoint(a: &C2) -> C2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

pub fn sub(a: &C2, b: &C2) -> C2 {
    [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
}

pub fn scale(a: &C2, f: f64) -> C2 {
    [[a[0][0] * f, a[0][1] * f], [a[1][0] * f, a[1][1] * f]]
}

pub fn max_abs(a: &C2) -> f64 {
    a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max|𝒯*𝒥𝒯 - 𝒥|` relative to `max(1, max|𝒯|²)`, the size of the rounding
/// error of the product itself.
pub fn symplectic_residual(tm: &C2) -> f64 {
    let raw = max_abs(&sub(&mul(&mul(&adjoint(tm), &j_form()), tm), &j_form()));
    raw / max_abs(tm).powi(2).max(1.0)
}

/// `b / a` for the contracting vector normalized to `a = 1`.
pub fn slope_b(flux: Flux, energy: f64, k: f64) -> f64 {
    let cv = contracting_vector(&period_transfer(flux, energy, k)).unwrap();
    cv.omega[1] / cv.omega[0]
}

/// Points `k` where the contracting vector passes through `(1, 0)` at the
/// center of `gap`, located by bisection on the sign of `b`.
pub fn crossings(gap: &GapRecord<f64>) -> Vec<(f64, f64)> {
    let energy = gap.center();
    let ctx = honeycomb_hofstadter::TransferContext64::new(gap.flux);
    let trace = trace_phase(&ctx, energy, TraceConfig::default()).unwrap();
    let pi = std::f64::consts::PI;
    let mut out = Vec::new();
    for w in trace.samples.windows(2) {
        let ((k0, p0), (k1, p1)) = (w[0], w[1]);
        if (p0 / pi).floor() == (p1 / pi).floor() {
            continue;
        }
        // The bracket straddles a multiple of π; bisect on the sign of b/a.
        let (mut lo, mut hi) = (k0, k1);
        let f_lo = slope_b(gap.flux, energy, lo);
        if f_lo.signum() == slope_b(gap.flux, energy, hi).signum() {
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if slope_b(gap.flux, energy, mid).signum() == f_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push((energy, 0.5 * (lo + hi)));
    }
    out.retain(|&(_, k)| k > 0.0 && k < TAU);
    out
}
