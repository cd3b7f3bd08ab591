//! Rational flux arithmetic and Diophantine gap labeling.
//!
//! At flux `p/q` the `r`-th gap (counting bands below it) carries a Hall
//! conductance `sigma` that solves `r = sigma * p + s * q` for some integer
//! `s`. The equation fixes `sigma` modulo `q`; the functions here enumerate
//! its solutions, evaluate the square-lattice window rule that fails for the
//! honeycomb lattice, and snap numerically obtained windings onto solutions.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A raw winding must be this close to an integer to count as exact.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-3;

/// Default closeness threshold `|sigma - sigma*| / q` for snapping.
pub const DEFAULT_SNAP_THRESHOLD: f64 = 0.1;

/// Half-width, in units of `q`, of the window searched for snap targets.
pub const SNAP_SEARCH_HALFWIDTH: f64 = 2.0;

/// Reduced magnetic flux `p/q` per unit cell, `0 <= p <= q`, `gcd(p, q) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Flux {
    p: u32,
    q: u32,
}

impl Flux {
    #[inline]
    pub fn p(self) -> u32 {
        self.p
    }

    #[inline]
    pub fn q(self) -> u32 {
        self.q
    }

    /// Flux value `p/q` as a real number.
    pub fn value<T: Real>(self) -> T {
        T::from_index(self.p as usize) / T::from_index(self.q as usize)
    }

    /// Number of spectral gaps between the `2q` bands.
    #[inline]
    pub fn gap_count(self) -> u32 {
        2 * self.q - 1
    }

    /// Whether `r` is a valid gap index for this flux.
    #[inline]
    pub fn is_gap_index(self, r: u32) -> bool {
        (1..=self.gap_count()).contains(&r)
    }

    /// Phase `2π p/q`, the per-site shift of the Peierls factor.
    pub fn phase_step<T: Real>(self) -> T {
        T::TAU() * self.value::<T>()
    }
}

impl PartialOrd for Flux {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Fluxes order by denominator first, then numerator (the cache/record order).
impl Ord for Flux {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.q, self.p).cmp(&(other.q, other.p))
    }
}

impl fmt::Display for Flux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

impl FromStr for Flux {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse flux {s:?}, expected P/Q"));
        let (p, q) = s.trim().split_once('/').ok_or_else(bad)?;
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        reduce_flux(p, q)
    }
}

/// Reduce `p/q` to lowest terms with the numerator folded into `[0, q]`.
pub fn reduce_flux(p: i64, q: i64) -> Result<Flux> {
    if q <= 0 || q > u32::MAX as i64 / 2 {
        return Err(Error::InvalidFlux { p, q });
    }
    let g = p.gcd(&q);
    let (mut p, q) = (p / g, q / g);
    if !(0..=q).contains(&p) {
        p = p.rem_euclid(q);
    }
    // p = 0 after folding means the reduced denominator must be 1.
    let q = if p == 0 { 1 } else { q };
    Ok(Flux { p: p as u32, q: q as u32 })
}

/// All `(sigma, s)` with `r = sigma p + s q` and `|sigma| < halfwidth * q`.
///
/// Non-negative `sigma` come first, then negative ones; each group is in
/// ascending `|sigma|`.
pub fn diophantine_candidates(r: u32, flux: Flux, window_halfwidth: f64) -> Vec<(i64, i64)> {
    let (p, q, r) = (flux.p as i64, flux.q as i64, r as i64);
    let bound = window_halfwidth * q as f64;
    // p * x + q * y = 1, hence sigma0 = r x solves the congruence.
    let inverse = p.extended_gcd(&q).x;
    let sigma0 = (r * inverse).rem_euclid(q);

    let mut out = Vec::new();
    let span = bound.ceil() as i64 / q + 1;
    for j in -span..=span {
        let sigma = sigma0 + j * q;
        if (sigma.abs() as f64) < bound {
            let rest = r - sigma * p;
            debug_assert_eq!(rest % q, 0);
            out.push((sigma, rest / q));
        }
    }
    out.sort_by_key(|&(sigma, _)| (sigma < 0, sigma.abs()));
    out
}

/// Both boundary candidates `sigma = ±q/2` solve the gap equation, so the
/// open window `(-q/2, q/2)` has no interior solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("natural window has no interior solution; boundary candidates {lower} and {upper}")]
pub struct WindowFailure {
    pub lower: i64,
    pub upper: i64,
}

/// The unique solution of the gap equation with `sigma` in `(-q/2, q/2)`.
///
/// This is the square-lattice labeling rule. On the honeycomb lattice it is
/// wrong for some gaps and is kept only for comparison renders.
pub fn natural_window_sigma(r: u32, flux: Flux) -> Result<i64, WindowFailure> {
    let q = flux.q as i64;
    let inside: Vec<i64> = diophantine_candidates(r, flux, 1.0)
        .into_iter()
        .map(|(sigma, _)| sigma)
        .filter(|sigma| 2 * sigma.abs() < q)
        .collect();
    match inside.as_slice() {
        [sigma] => Ok(*sigma),
        _ => Err(WindowFailure { lower: -q / 2, upper: q / 2 }),
    }
}

/// Validation status of a computed Chern number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChernStatus {
    /// The rounded winding is integral and solves the gap equation.
    Exact,
    /// The winding was close to a solution and has been moved onto it.
    Snapped,
    /// No solution within the snap threshold.
    Undecided,
}

impl ChernStatus {
    pub fn code(self) -> char {
        match self {
            ChernStatus::Exact => 'E',
            ChernStatus::Snapped => 'S',
            ChernStatus::Undecided => 'U',
        }
    }

    pub fn from_code(c: &str) -> Option<Self> {
        match c {
            "E" => Some(ChernStatus::Exact),
            "S" => Some(ChernStatus::Snapped),
            "U" => Some(ChernStatus::Undecided),
            _ => None,
        }
    }

    pub fn is_decided(self) -> bool {
        !matches!(self, ChernStatus::Undecided)
    }
}

/// Hall conductance of one gap, in units of `e²/h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernResult<T> {
    pub sigma: i64,
    pub s: i64,
    pub status: ChernStatus,
    /// Winding number before rounding.
    pub winding_raw: T,
}

impl<T: Real> ChernResult<T> {
    /// `r = sigma p + s q` in exact integer arithmetic.
    pub fn satisfies_diophantine(&self, r: u32, flux: Flux) -> bool {
        self.sigma
            .checked_mul(flux.p as i64)
            .zip(self.s.checked_mul(flux.q as i64))
            .and_then(|(a, b)| a.checked_add(b))
            == Some(r as i64)
    }

    /// `sigma` lies in the open interval `(-q, q)`.
    pub fn in_conjecture_window(&self, flux: Flux) -> bool {
        self.sigma.abs() < flux.q as i64
    }
}

/// Turn a raw winding into a validated Chern number for gap `r` of `flux`.
pub fn snap_sigma<T: Real>(
    winding_raw: T,
    r: u32,
    flux: Flux,
    snap_threshold: f64,
) -> ChernResult<T> {
    let raw = winding_raw.to_f64_lossy();
    let q = flux.q as f64;
    let rounded = if raw.is_finite() { raw.round() as i64 } else { 0 };
    let candidates = diophantine_candidates(r, flux, SNAP_SEARCH_HALFWIDTH);

    if raw.is_finite() && (raw - rounded as f64).abs() <= INTEGRALITY_TOLERANCE {
        if let Some(&(sigma, s)) = candidates.iter().find(|&&(sigma, _)| sigma == rounded) {
            return ChernResult { sigma, s, status: ChernStatus::Exact, winding_raw };
        }
    }

    if raw.is_finite() {
        let nearest = candidates.iter().min_by(|a, b| {
            let da = (raw - a.0 as f64).abs();
            let db = (raw - b.0 as f64).abs();
            da.total_cmp(&db)
        });
        if let Some(&(sigma, s)) = nearest {
            if (raw - sigma as f64).abs() / q < snap_threshold {
                return ChernResult { sigma, s, status: ChernStatus::Snapped, winding_raw };
            }
        }
    }

    // Best-effort partner: the s minimizing |r - sigma p - s q|.
    let residual = r as f64 - rounded as f64 * flux.p as f64;
    let s = (residual / q).round() as i64;
    ChernResult { sigma: rounded, s, status: ChernStatus::Undecided, winding_raw }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flux(p: i64, q: i64) -> Flux {
        reduce_flux(p, q).unwrap()
    }

    #[test]
    fn reduction() {
        assert_eq!(flux(2, 4), Flux { p: 1, q: 2 });
        assert_eq!(flux(0, 7), Flux { p: 0, q: 1 });
        assert_eq!(flux(8, 19), Flux { p: 8, q: 19 });
        assert_eq!(flux(5, 5), Flux { p: 1, q: 1 });
        assert_eq!(flux(7, 5), Flux { p: 2, q: 5 });
        assert_eq!(flux(-1, 5), Flux { p: 4, q: 5 });
        assert!(matches!(reduce_flux(1, 0), Err(Error::InvalidFlux { .. })));
        assert!(reduce_flux(1, -3).is_err());
    }

    #[test]
    fn parse_flux() {
        assert_eq!("8/19".parse::<Flux>().unwrap(), flux(8, 19));
        assert_eq!(" 2 / 4 ".parse::<Flux>().unwrap(), flux(1, 2));
        assert!("3".parse::<Flux>().is_err());
        assert!("1/0".parse::<Flux>().is_err());
    }

    #[test]
    fn candidates_table_examples() {
        assert_eq!(diophantine_candidates(3, flux(1, 5), 1.0), vec![(3, 0), (-2, 1)]);
        assert_eq!(diophantine_candidates(1, flux(2, 5), 1.0), vec![(3, -1), (-2, 1)]);
        for q in 1..12 {
            assert_eq!(diophantine_candidates(q, flux(1, q as i64), 1.0), vec![(0, 1)]);
        }
    }

    #[test]
    fn wide_window_ordering() {
        let c = diophantine_candidates(3, flux(1, 5), 2.0);
        assert_eq!(c, vec![(3, 0), (8, -1), (-2, 1), (-7, 2)]);
    }

    #[test]
    fn natural_window_table_examples() {
        let f = flux(1, 5);
        assert_eq!(natural_window_sigma(3, f), Ok(-2));
        assert_eq!(natural_window_sigma(1, f), Ok(1));
        assert_eq!(natural_window_sigma(5, f), Ok(0));
    }

    #[test]
    fn natural_window_tie_for_even_q() {
        let f = flux(1, 6);
        assert_eq!(natural_window_sigma(3, f), Err(WindowFailure { lower: -3, upper: 3 }));
        assert_eq!(natural_window_sigma(4, f), Ok(-2));
    }

    #[test]
    fn snap_examples() {
        let f = flux(1, 5);
        let exact = snap_sigma(3.000_000_2_f64, 3, f, 0.1);
        assert_eq!((exact.sigma, exact.s, exact.status), (3, 0, ChernStatus::Exact));

        let snapped = snap_sigma(2.7_f64, 3, f, 0.1);
        assert_eq!((snapped.sigma, snapped.s, snapped.status), (3, 0, ChernStatus::Snapped));

        // Nearest solutions 3 and -2 sit at distances 1.6 and 3.4, both above 0.1 * 5.
        let undecided = snap_sigma(1.4_f64, 3, f, 0.1);
        assert_eq!(undecided.status, ChernStatus::Undecided);
        assert_eq!(undecided.sigma, 1);
        assert_eq!(undecided.s, 0);
    }

    #[test]
    fn snap_handles_non_finite() {
        let r = snap_sigma(f64::NAN, 1, flux(1, 5), 0.1);
        assert_eq!(r.status, ChernStatus::Undecided);
    }

    #[test]
    fn status_codes_round_trip() {
        for st in [ChernStatus::Exact, ChernStatus::Snapped, ChernStatus::Undecided] {
            assert_eq!(ChernStatus::from_code(&st.code().to_string()), Some(st));
        }
        assert_eq!(ChernStatus::from_code("X"), None);
    }
}
