//! One-step and one-period transfer matrices of the zigzag-edge recursion.
//!
//! The Schrödinger equation of the half-plane fiber at quasi-momentum `k`,
//!
//! ```text
//! a_m ψ^B_m + ψ^B_{m+1} = E ψ^A_m,      ā_m ψ^A_m + ψ^A_{m-1} = E ψ^B_m,
//! a_m = 1 + exp(i (k - 2π m p/q)),
//! ```
//!
//! is solved for `(ψ^B_{m+1}, ψ^A_m)` in terms of `(ψ^B_m, ψ^A_{m-1})` by a
//! matrix `𝒯_m = S_m / ā_m` with the real matrix
//!
//! ```text
//! S_m = [[E² - |a_m|², -E], [E, -1]],     det S_m = |a_m|².
//! ```
//!
//! Everything here works with `S_m` and the real product
//! `R = S_q ··· S_1 = (∏ ā_m) 𝒯`, which stays finite where some `a_m`
//! vanishes and has a genuinely real contracting eigenvector.

use std::ops::Mul;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::flux::Flux;
use crate::scalar::Real;

/// Relative separation below which the two eigenvalue moduli are treated as equal.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

/// Partial products are renormalized once an entry exceeds this magnitude.
pub const RESCALE_THRESHOLD: f64 = 1e100;

/// Real 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2<T>(pub [[T; 2]; 2]);

impl<T: Real> Mat2<T> {
    pub fn identity() -> Self {
        Mat2([[T::one(), T::zero()], [T::zero(), T::one()]])
    }

    #[inline]
    pub fn det(&self) -> T {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    #[inline]
    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1]
    }

    #[inline]
    pub fn max_abs(&self) -> T {
        let [[a, b], [c, d]] = self.0;
        a.abs().max(b.abs()).max(c.abs().max(d.abs()))
    }

    #[inline]
    pub fn scaled(&self, f: T) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2([[a * f, b * f], [c * f, d * f]])
    }

    #[inline]
    pub fn apply(&self, v: [T; 2]) -> [T; 2] {
        let [[a, b], [c, d]] = self.0;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }

    pub fn transpose(&self) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2([[a, c], [b, d]])
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Mat2<T>;

    #[inline]
    fn mul(self, rhs: Mat2<T>) -> Mat2<T> {
        let [[a, b], [c, d]] = self.0;
        let [[e, f], [g, h]] = rhs.0;
        Mat2([[a * e + b * g, a * f + b * h], [c * e + d * g, c * f + d * h]])
    }
}

/// The Peierls-modulated hopping `a_m(k) = 1 + exp(i (k - 2π m p/q))`.
pub fn hopping_phase<T: Real>(flux: Flux, m: i64, k: T) -> Complex<T> {
    let theta = k - flux.phase_step::<T>() * T::lit(m as f64);
    Complex::new(T::one() + theta.cos(), theta.sin())
}

/// `ā_m 𝒯_m` at one site, together with the hopping it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMatrix<T> {
    pub m: u32,
    pub a_m: Complex<T>,
    pub real_part: Mat2<T>,
}

#[inline]
fn step_real<T: Real>(energy: T, abs_a_sq: T) -> Mat2<T> {
    Mat2([[energy * energy - abs_a_sq, -energy], [energy, -T::one()]])
}

/// Step matrix at site `m` (`1 <= m <= q`).
pub fn step_matrix<T: Real>(flux: Flux, m: u32, energy: T, k: T) -> StepMatrix<T> {
    debug_assert!((1..=flux.q()).contains(&m));
    let a_m = hopping_phase(flux, m as i64, k);
    StepMatrix { m, a_m, real_part: step_real(energy, a_m.norm_sqr()) }
}

/// Real one-period transfer matrix `R = S_q ··· S_1`.
///
/// The product is stored as `exp(log_factor) * matrix`; `log_scale` is
/// `ln ∏ |a_m|` (negative infinity when some `a_m` vanishes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealTransfer<T> {
    pub matrix: Mat2<T>,
    pub log_factor: T,
    pub log_scale: T,
    pub energy: T,
    pub k: T,
}

impl<T: Real> RealTransfer<T> {
    /// `∏ |a_m|` in the normalization of [`RealTransfer::matrix`].
    pub fn relative_scale(&self) -> T {
        (self.log_scale - self.log_factor).exp()
    }

    /// `∏ |a_m|` itself (may overflow for very large `q`).
    pub fn scale(&self) -> T {
        self.log_scale.exp()
    }

    /// The unnormalized product `∏ ā_m 𝒯_m`.
    pub fn full_matrix(&self) -> Mat2<T> {
        self.matrix.scaled(self.log_factor.exp())
    }
}

/// Per-flux table of `cos(2π m p/q)`, `sin(2π m p/q)` for `m = 1..q`.
///
/// Evaluating `|a_m(k)|² = 2 + 2 cos(k - 2π m p/q)` through the table costs
/// two multiplications per site, which dominates the inner winding loop.
#[derive(Debug, Clone)]
pub struct TransferContext<T> {
    flux: Flux,
    cos_m: Vec<T>,
    sin_m: Vec<T>,
}

impl<T: Real> TransferContext<T> {
    pub fn new(flux: Flux) -> Self {
        let step = flux.phase_step::<T>();
        let (cos_m, sin_m) = (1..=flux.q())
            .map(|m| {
                let phase = step * T::from_index(m as usize);
                (phase.cos(), phase.sin())
            })
            .unzip();
        TransferContext { flux, cos_m, sin_m }
    }

    pub fn flux(&self) -> Flux {
        self.flux
    }

    /// `|a_m(k)|²` for `m = 1..q`, in order.
    pub fn abs_hoppings_sq(&self, k: T) -> impl Iterator<Item = T> + '_ {
        let (ck, sk) = (k.cos(), k.sin());
        let two = T::lit(2.0);
        self.cos_m
            .iter()
            .zip(&self.sin_m)
            .map(move |(&c, &s)| (two + two * (ck * c + sk * s)).max(T::zero()))
    }

    /// One-period real transfer matrix at energy `E` and momentum `k`.
    pub fn period(&self, energy: T, k: T) -> RealTransfer<T> {
        let threshold = T::lit(RESCALE_THRESHOLD);
        let mut product = Mat2::identity();
        let mut log_factor = T::zero();
        let mut log_scale_sq = T::zero();
        for abs_sq in self.abs_hoppings_sq(k) {
            product = step_real(energy, abs_sq) * product;
            log_scale_sq = log_scale_sq + abs_sq.ln();
            let peak = product.max_abs();
            if peak > threshold {
                product = product.scaled(peak.recip());
                log_factor = log_factor + peak.ln();
            }
        }
        RealTransfer {
            matrix: product,
            log_factor,
            log_scale: log_scale_sq * T::lit(0.5),
            energy,
            k,
        }
    }
}

/// `R(E, k)` and its `k`-derivative, sharing one normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferWithSlope<T> {
    pub transfer: RealTransfer<T>,
    pub slope: Mat2<T>,
}

impl<T: Real> TransferContext<T> {
    /// One-period transfer together with `dR/dk`.
    ///
    /// Only the diagonal entry `E² - |a_m|²` of each step depends on `k`, with
    /// `d|a_m|²/dk = -2 sin(k - 2π m p/q)`; the derivative is accumulated by
    /// the product rule alongside the product itself.
    pub fn period_with_slope(&self, energy: T, k: T) -> TransferWithSlope<T> {
        let threshold = T::lit(RESCALE_THRESHOLD);
        let (ck, sk) = (k.cos(), k.sin());
        let two = T::lit(2.0);
        let mut product = Mat2::identity();
        let mut slope = Mat2([[T::zero(); 2]; 2]);
        let mut log_factor = T::zero();
        let mut log_scale_sq = T::zero();
        for (&c, &s) in self.cos_m.iter().zip(&self.sin_m) {
            let abs_sq = (two + two * (ck * c + sk * s)).max(T::zero());
            let d_abs_sq = -two * (sk * c - ck * s);
            let step = step_real(energy, abs_sq);
            let [[p11, p12], _] = product.0;
            // dS/dk = diag(-d|a|²/dk, 0), so (dS/dk) P only touches the first row.
            let ds_p = Mat2([[-d_abs_sq * p11, -d_abs_sq * p12], [T::zero(), T::zero()]]);
            slope = step * slope;
            slope = Mat2([
                [slope.0[0][0] + ds_p.0[0][0], slope.0[0][1] + ds_p.0[0][1]],
                slope.0[1],
            ]);
            product = step * product;
            log_scale_sq = log_scale_sq + abs_sq.ln();
            let peak = product.max_abs();
            if peak > threshold {
                let inv = peak.recip();
                product = product.scaled(inv);
                slope = slope.scaled(inv);
                log_factor = log_factor + peak.ln();
            }
        }
        TransferWithSlope {
            transfer: RealTransfer {
                matrix: product,
                log_factor,
                log_scale: log_scale_sq * T::lit(0.5),
                energy,
                k,
            },
            slope,
        }
    }
}

/// One-period transfer `R(E, k) = S_q ··· S_1` for `flux`.
pub fn period_transfer<T: Real>(flux: Flux, energy: T, k: T) -> RealTransfer<T> {
    TransferContext::new(flux).period(energy, k)
}

/// Complex one-period transfer `𝒯 = 𝒯_q ··· 𝒯_1` with `𝒯_m = S_m / ā_m`.
///
/// Undefined where some `a_m` vanishes. Used to check the real route.
pub fn complex_period_transfer<T: Real>(flux: Flux, energy: T, k: T) -> [[Complex<T>; 2]; 2] {
    let zero = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let mut acc = [[one, zero], [zero, one]];
    for m in 1..=flux.q() {
        let st = step_matrix(flux, m, energy, k);
        let inv = st.a_m.conj().inv();
        let s = st.real_part.0;
        let t = [
            [inv * s[0][0], inv * s[0][1]],
            [inv * s[1][0], inv * s[1][1]],
        ];
        let mut next = [[zero; 2]; 2];
        for (i, row) in next.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = t[i][0] * acc[0][j] + t[i][1] * acc[1][j];
            }
        }
        acc = next;
    }
    acc
}

/// Real eigenvector of `R` belonging to its smaller-modulus eigenvalue.
///
/// `omega` is unit length with its first nonzero component positive, so it is
/// a canonical representative of the projective direction. Moduli and scale
/// share the normalization of [`RealTransfer::matrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractingVector<T> {
    pub omega: [T; 2],
    pub mu_small: T,
    pub mu_large: T,
    /// Signed eigenvalues; `mu_* = |lambda_*|`.
    pub lambda_small: T,
    pub lambda_large: T,
    pub scale: T,
}

impl<T: Real> ContractingVector<T> {
    /// Projective angle `atan2(b, a)` in `(-π/2, π/2]`.
    pub fn angle(&self) -> T {
        self.omega[1].atan2(self.omega[0])
    }

    /// `mu_small < scale < mu_large`.
    pub fn is_hyperbolic(&self) -> bool {
        self.mu_small < self.scale && self.scale < self.mu_large
    }
}

fn canonical<T: Real>(v: [T; 2]) -> Option<[T; 2]> {
    let norm = v[0].hypot(v[1]);
    if !(norm > T::zero()) || !norm.is_finite() {
        return None;
    }
    let mut out = [v[0] / norm, v[1] / norm];
    let lead = if out[0] != T::zero() { out[0] } else { out[1] };
    if lead < T::zero() {
        out = [-out[0], -out[1]];
    }
    Some(out)
}

/// Contracting eigenvector of a one-period transfer matrix.
///
/// The determinant is taken from `∏ |a_m|²` rather than from the entries of
/// the product, which suffer cancellation once the eigenvalues split widely.
/// Fails with [`Error::DegenerateTransfer`] when the eigenvalue moduli agree
/// to [`DEGENERACY_TOLERANCE`], i.e. when the energy lies in the spectrum.
pub fn contracting_vector<T: Real>(rt: &RealTransfer<T>) -> Result<ContractingVector<T>> {
    let degenerate = || Error::DegenerateTransfer {
        energy: rt.energy.to_f64_lossy(),
        k: rt.k.to_f64_lossy(),
    };

    let m = rt.matrix;
    let scale = rt.relative_scale();
    let det = scale * scale;
    let trace = m.trace();
    let disc = trace * trace - T::lit(4.0) * det;
    if !(disc > T::zero()) {
        return Err(degenerate());
    }
    let root = disc.sqrt();
    let lambda_large = (trace + trace.signum() * root) * T::lit(0.5);
    let lambda_small = if lambda_large == T::zero() { T::zero() } else { det / lambda_large };
    let (mu_small, mu_large) = (lambda_small.abs(), lambda_large.abs());
    if mu_large - mu_small < T::lit(DEGENERACY_TOLERANCE) * mu_large {
        return Err(degenerate());
    }

    let [[r11, r12], [r21, r22]] = m.0;
    let row1 = [r11 - lambda_small, r12];
    let row2 = [r21, r22 - lambda_small];
    let n1 = row1[0].hypot(row1[1]);
    let n2 = row2[0].hypot(row2[1]);
    // The kernel of the rank-one matrix R - λ_small is orthogonal to its larger row.
    let raw = if n1 >= n2 { [row1[1], -row1[0]] } else { [row2[1], -row2[0]] };
    let omega = canonical(raw).ok_or_else(degenerate)?;

    Ok(ContractingVector { omega, mu_small, mu_large, lambda_small, lambda_large, scale })
}

/// Rate of change `dφ/dk` of the projective angle of the contracting vector.
///
/// First-order perturbation of the eigenvector: with `n` the unit normal of
/// `ω`, `dφ/dk = n·(R' ω) / (λ_small - λ_large)`.
pub fn angle_slope<T: Real>(cv: &ContractingVector<T>, slope: &Mat2<T>) -> T {
    let [a, b] = cv.omega;
    let normal = [-b, a];
    let image = slope.apply(cv.omega);
    (normal[0] * image[0] + normal[1] * image[1]) / (cv.lambda_small - cv.lambda_large)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::reduce_flux;

    fn rt(matrix: [[f64; 2]; 2], scale: f64) -> RealTransfer<f64> {
        RealTransfer { matrix: Mat2(matrix), log_factor: 0.0, log_scale: scale.ln(), energy: 0.0, k: 0.0 }
    }

    #[test]
    fn step_at_zero_energy_is_diagonal() {
        let flux = reduce_flux(2, 7).unwrap();
        for m in 1..=7 {
            let st = step_matrix(flux, m, 0.0, 0.37);
            let abs_sq = st.a_m.norm_sqr();
            assert_eq!(st.real_part, Mat2([[-abs_sq, 0.0], [0.0, -1.0]]));
        }
    }

    #[test]
    fn step_rank_one_where_hopping_vanishes() {
        let flux = reduce_flux(1, 5).unwrap();
        let m = 2;
        let k = std::f64::consts::TAU * m as f64 / 5.0 + std::f64::consts::PI;
        let e = 0.8;
        let st = step_matrix(flux, m, e, k);
        assert!(st.a_m.norm() < 1e-12);
        let [[a, b], [c, d]] = st.real_part.0;
        assert!((a - e * e).abs() < 1e-12 && b == -e && c == e && d == -1.0);
        assert!(st.real_part.det().abs() < 1e-12);
    }

    #[test]
    fn single_site_product() {
        let flux = reduce_flux(0, 1).unwrap();
        let (e, k) = (0.6, 1.1);
        let t = period_transfer(flux, e, k);
        let abs_sq = 2.0 + 2.0 * f64::cos(k);
        let expect = Mat2([[e * e - abs_sq, -e], [e, -1.0]]);
        let got = t.full_matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert!((got.0[i][j] - expect.0[i][j]).abs() < 1e-12);
            }
        }
        assert!((t.scale() - abs_sq.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diagonal_contracting_vector() {
        let cv = contracting_vector(&rt([[2.0, 0.0], [0.0, 0.5]], 1.0)).unwrap();
        assert_eq!(cv.omega, [0.0, 1.0]);
        assert!((cv.mu_small - 0.5).abs() < 1e-15);
        assert!((cv.mu_large - 2.0).abs() < 1e-15);
        assert!(cv.is_hyperbolic());
    }

    #[test]
    fn elliptic_matrix_is_degenerate() {
        // Rotation: complex eigenvalues of equal modulus.
        let err = contracting_vector(&rt([[0.0, -1.0], [1.0, 0.0]], 1.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateTransfer { .. }));
    }

    #[test]
    fn rank_one_matrix_has_kernel_vector() {
        let e = 0.4;
        let m = Mat2([[e * e, -e], [e, -1.0]]) * Mat2([[1.3, 0.2], [-0.7, 0.9]]);
        let cv = contracting_vector(&RealTransfer {
            matrix: m,
            log_factor: 0.0,
            log_scale: f64::NEG_INFINITY,
            energy: e,
            k: 0.0,
        })
        .unwrap();
        assert_eq!(cv.mu_small, 0.0);
        let image = m.apply(cv.omega);
        assert!(image[0].hypot(image[1]) < 1e-12);
    }

    #[test]
    fn rescaled_product_keeps_contracting_direction() {
        let flux = reduce_flux(1, 400).unwrap();
        let t = period_transfer(flux, 2.95_f64, 0.3);
        assert!(t.log_factor > 0.0, "large q must trigger renormalization");
        assert!(t.matrix.max_abs() <= RESCALE_THRESHOLD);
        let cv = contracting_vector(&t).unwrap();
        let image = t.matrix.apply(cv.omega);
        let lambda = cv.lambda_small;
        let res = (image[0] - lambda * cv.omega[0]).hypot(image[1] - lambda * cv.omega[1]);
        assert!(res < 1e-8 * t.matrix.max_abs(), "{res}");
    }
}
