//! Magnetic Bloch Hamiltonian of the honeycomb lattice and its gaps.
//!
//! At flux `p/q` the Hamiltonian is `q`-periodic in the `m` direction. After
//! Bloch decomposition in both directions each fiber is a `2q × 2q` Hermitian
//! matrix with sites ordered `(1, A), (1, B), (2, A), ...`:
//!
//! ```text
//! (Hψ)^A_m = a_m ψ^B_m + ψ^B_{m+1},     (Hψ)^B_m = ā_m ψ^A_m + ψ^A_{m-1},
//! ψ_{m+q} = exp(i k2) ψ_m,   a_m = 1 + exp(i (k1 - 2π m p/q)).
//! ```
//!
//! Since the lattice is bipartite, `H = [[0, D], [D†, 0]]` in the sublattice
//! basis and the spectrum is `±` the singular values of the `q × q` matrix
//! `D`; band sweeps diagonalize `D D†` instead of the full fiber.

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::flux::{ChernResult, Flux};
use crate::scalar::{Real, SpectralReal};
use crate::transfer::hopping_phase;

/// Norm bound of the hopping Hamiltonian (three unit hoppings).
pub const SPECTRAL_BOUND: f64 = 3.0;

/// One fiber `H(k1, k2)` of the bulk Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochHamiltonian<T: SpectralReal> {
    pub flux: Flux,
    pub k1: T,
    pub k2: T,
    pub matrix: DMatrix<Complex<T>>,
}

impl<T: SpectralReal> BlochHamiltonian<T> {
    /// Largest componentwise deviation from Hermiticity.
    pub fn hermiticity_residual(&self) -> T {
        hermiticity_residual(&self.matrix)
    }

    /// Sorted eigenvalues from a full dense diagonalization.
    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        sorted_eigenvalues(self.matrix.clone()).ok_or(Error::Eigensolver {
            p: self.flux.p(),
            q: self.flux.q(),
            k1: self.k1.to_f64_lossy(),
            k2: self.k2.to_f64_lossy(),
        })
    }
}

pub(crate) fn hermiticity_residual<T: SpectralReal>(m: &DMatrix<Complex<T>>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = Float::max(worst, (m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn sorted_eigenvalues<T: SpectralReal>(m: DMatrix<Complex<T>>) -> Option<Vec<T>> {
    if m.iter().any(|z| !Float::is_finite(z.re) || !Float::is_finite(z.im)) {
        return None;
    }
    let mut values: Vec<T> = m.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Some(values)
}

fn cis<T: SpectralReal>(x: T) -> Complex<T> {
    Complex::new(Float::cos(x), Float::sin(x))
}

/// Build the `2q × 2q` fiber `H(k1, k2)`.
pub fn build_bloch<T: SpectralReal>(flux: Flux, k1: T, k2: T) -> BlochHamiltonian<T> {
    let q = flux.q() as usize;
    let n = 2 * q;
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let mut matrix = DMatrix::from_element(n, n, zero);
    let a = |m: usize| 2 * (m - 1);
    let b = |m: usize| 2 * (m - 1) + 1;
    for m in 1..=q {
        let am = hopping_phase(flux, m as i64, k1);
        matrix[(a(m), b(m))] += am;
        matrix[(b(m), a(m))] += am.conj();
        // Hop from (m, A) to (m + 1, B); the last one wraps with the Bloch phase.
        let (next, phase) = if m < q { (m + 1, one) } else { (1, cis(k2)) };
        matrix[(a(m), b(next))] += phase;
        matrix[(b(next), a(m))] += phase.conj();
    }
    BlochHamiltonian { flux, k1, k2, matrix }
}

/// Sublattice coupling block `D` (rows A, columns B) of `H(k1, k2)`.
pub fn sublattice_block<T: SpectralReal>(flux: Flux, k1: T, k2: T) -> DMatrix<Complex<T>> {
    let q = flux.q() as usize;
    let mut d = DMatrix::from_element(q, q, Complex::new(T::zero(), T::zero()));
    for m in 1..=q {
        d[(m - 1, m - 1)] += hopping_phase(flux, m as i64, k1);
        if m < q {
            d[(m - 1, m)] += Complex::new(T::one(), T::zero());
        } else {
            d[(q - 1, 0)] += cis(k2);
        }
    }
    d
}

/// Sorted spectrum of `H(k1, k2)` through the chiral reduction.
pub fn fiber_energies<T: SpectralReal>(flux: Flux, k1: T, k2: T) -> Result<Vec<T>> {
    let d = sublattice_block(flux, k1, k2);
    let gram = &d * d.adjoint();
    let fail = || Error::Eigensolver {
        p: flux.p(),
        q: flux.q(),
        k1: k1.to_f64_lossy(),
        k2: k2.to_f64_lossy(),
    };
    let squares = sorted_eigenvalues(gram).ok_or_else(fail)?;
    let singular: Vec<T> = squares.iter().map(|&s| Float::sqrt(Float::max(s, T::zero()))).collect();
    let mut out: Vec<T> = singular.iter().rev().map(|&s| -s).collect();
    out.extend(singular);
    Ok(out)
}

/// Bloch phase `k2 = Σ_m arg a_m(k1)` at which the period transfer matrix,
/// divided by `∏ |a_m|`, has eigenvalue `+1`.
///
/// Each band of the fiber family `k2 ↦ H(k1, k2)` runs monotonically between
/// its values at this phase and at this phase plus `π`, so the two fibers
/// give the exact band edges at fixed `k1`.
pub fn band_edge_phase<T: SpectralReal>(flux: Flux, k1: T) -> T {
    (1..=flux.q() as i64)
        .map(|m| {
            let a = hopping_phase(flux, m, k1);
            Float::atan2(a.im, a.re)
        })
        .fold(T::zero(), |acc, x| acc + x)
}

/// Default number of `k1` samples for the band sweep.
pub fn default_grid_n(q: u32) -> usize {
    if q <= 64 {
        64
    } else {
        (4096usize.div_ceil(q as usize)).max(32)
    }
}

/// Minimum and maximum of each of the `2q` bands.
///
/// The spectrum is invariant under `k1 → k1 + 2π/q` (the shift relabels the
/// sites of a magnetic cell), so `k1` is sampled on `grid_n` midpoints of
/// `[0, 2π/q)`. For each sample the exact extremes in `k2` come from the two
/// fibers at [`band_edge_phase`] and that phase plus `π`.
///
/// The two central bands touch at `E = 0` at symmetric momenta, which the
/// midpoints avoid; the central index then shows up as a narrow gap whose
/// Chern number is pinned to zero by particle-hole symmetry.
pub fn band_extrema<T: SpectralReal>(flux: Flux, grid_n: usize) -> Result<Vec<(T, T)>> {
    use rayon::prelude::*;

    let q = flux.q() as usize;
    let zone = T::TAU() / T::from_index(q);
    let per_k1: Vec<Vec<T>> = (0..grid_n)
        .into_par_iter()
        .map(|i| -> Result<Vec<T>> {
            let k1 = zone * (T::from_index(i) + T::lit(0.5)) / T::from_index(grid_n);
            let phase = band_edge_phase(flux, k1);
            let mut both = fiber_energies(flux, k1, phase)?;
            both.extend(fiber_energies(flux, k1, phase + T::PI())?);
            Ok(both)
        })
        .collect::<Result<_>>()?;

    let mut extrema = vec![(T::infinity(), T::neg_infinity()); 2 * q];
    for both in &per_k1 {
        let (at_zero, at_pi) = both.split_at(2 * q);
        for (j, band) in extrema.iter_mut().enumerate() {
            let (lo, hi) = if at_zero[j] <= at_pi[j] { (at_zero[j], at_pi[j]) } else { (at_pi[j], at_zero[j]) };
            band.0 = Float::min(band.0, lo);
            band.1 = Float::max(band.1, hi);
        }
    }
    Ok(extrema)
}

/// Band extrema over a plain uniform `grid_n × grid_n` grid of `(k1, k2)`.
///
/// Brute-force reference for [`band_extrema`].
pub fn band_extrema_grid<T: SpectralReal>(flux: Flux, grid_n: usize) -> Result<Vec<(T, T)>> {
    let q = flux.q() as usize;
    let mut extrema = vec![(T::infinity(), T::neg_infinity()); 2 * q];
    for i in 0..grid_n {
        for j in 0..grid_n {
            let k1 = T::TAU() * T::from_index(i) / T::from_index(grid_n);
            let k2 = T::TAU() * T::from_index(j) / T::from_index(grid_n);
            let energies = fiber_energies(flux, k1, k2)?;
            for (band, &e) in extrema.iter_mut().zip(&energies) {
                band.0 = Float::min(band.0, e);
                band.1 = Float::max(band.1, e);
            }
        }
    }
    Ok(extrema)
}

/// One open gap of the bulk spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRecord<T> {
    pub flux: Flux,
    /// Number of bands strictly below the gap.
    pub r: u32,
    pub e1: T,
    pub e2: T,
    pub chern: Option<ChernResult<T>>,
}

impl<T: Real> GapRecord<T> {
    pub fn center(&self) -> T {
        (self.e1 + self.e2) * T::lit(0.5)
    }

    pub fn width(&self) -> T {
        self.e2 - self.e1
    }
}

/// Gaps between consecutive bands wider than `min_width`, labeled by `r`.
pub fn detect_gaps<T: Real>(flux: Flux, extrema: &[(T, T)], min_width: T) -> Vec<GapRecord<T>> {
    extrema
        .windows(2)
        .enumerate()
        .filter_map(|(j, pair)| {
            let (e1, e2) = (pair[0].1, pair[1].0);
            (e2 - e1 > min_width).then_some(GapRecord {
                flux,
                r: j as u32 + 1,
                e1,
                e2,
                chern: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::reduce_flux;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn flux(p: i64, q: i64) -> Flux {
        reduce_flux(p, q).unwrap()
    }

    #[test]
    fn zero_flux_gamma_point() {
        let h = build_bloch(flux(0, 1), 0.0_f64, 0.0);
        assert_eq!(h.matrix.nrows(), 2);
        assert!((h.matrix[(0, 1)] - Complex::new(3.0, 0.0)).norm() < 1e-12);
        assert!((h.matrix[(1, 0)] - Complex::new(3.0, 0.0)).norm() < 1e-12);
        let ev = h.eigenvalues().unwrap();
        assert!((ev[0] + 3.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_8_19() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..5 {
            let h = build_bloch(flux(8, 19), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
            assert_eq!(h.matrix.nrows(), 38);
            assert!(h.hermiticity_residual() < 1e-12);
        }
    }

    #[test]
    fn chiral_reduction_matches_full_diagonalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (p, q) in [(0, 1), (1, 2), (1, 3), (2, 5), (3, 7), (5, 12)] {
            let f = flux(p, q);
            for _ in 0..4 {
                let (k1, k2) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
                let full = build_bloch(f, k1, k2).eigenvalues().unwrap();
                let reduced = fiber_energies(f, k1, k2).unwrap();
                for (a, b) in full.iter().zip(&reduced) {
                    assert!((a - b).abs() < 1e-10, "{f}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn half_flux_spectrum_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let h = build_bloch(flux(1, 2), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
            let ev = h.eigenvalues().unwrap();
            assert_eq!(ev.len(), 4);
            for (a, b) in ev.iter().zip(ev.iter().rev()) {
                assert!((a + b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_flux_dirac_touching() {
        let ext = band_extrema::<f64>(flux(0, 1), 64).unwrap();
        assert_eq!(ext.len(), 2);
        // k1 = 0 is not a sample point; the edge is missed quadratically.
        assert!((ext[0].0 + 3.0).abs() < 1e-3 && (ext[1].1 - 3.0).abs() < 1e-3);
        assert!(ext[0].1.abs() < 0.1 && ext[1].0.abs() < 0.1);
        // The Dirac point sits between samples, so the grid leaves a sliver
        // that closes as the grid refines.
        let sliver = |n: usize| {
            let ext = band_extrema::<f64>(flux(0, 1), n).unwrap();
            ext[1].0 - ext[0].1
        };
        let (w64, w1024) = (sliver(64), sliver(1024));
        assert!(w1024 < w64 / 8.0, "{w64} {w1024}");
        assert!(detect_gaps(flux(0, 1), &ext, 0.05).is_empty());
    }

    #[test]
    fn one_fifth_has_nine_gaps() {
        let f = flux(1, 5);
        let ext = band_extrema::<f64>(f, 64).unwrap();
        assert_eq!(ext.len(), 10);
        for w in ext.windows(2) {
            assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
        }
        let gaps = detect_gaps(f, &ext, 1e-6);
        assert_eq!(gaps.iter().map(|g| g.r).collect::<Vec<_>>(), (1..=9).collect::<Vec<_>>());
        assert!(detect_gaps(f, &ext, 10.0).is_empty());
    }

    #[test]
    fn spectrum_within_norm_bound() {
        for (p, q) in [(1, 3), (2, 7), (5, 11)] {
            let ext = band_extrema::<f64>(flux(p, q), 16).unwrap();
            assert!(ext.first().unwrap().0 >= -SPECTRAL_BOUND - 1e-9);
            assert!(ext.last().unwrap().1 <= SPECTRAL_BOUND + 1e-9);
        }
    }

    #[test]
    fn default_grid_sizes() {
        assert_eq!(default_grid_n(1), 64);
        assert_eq!(default_grid_n(64), 64);
        assert_eq!(default_grid_n(100), 41);
        assert_eq!(default_grid_n(720), 32);
    }
}
