//! Edge-state oracle: signed Fermi-level crossings in a finite zigzag strip.
//!
//! The half-plane Hamiltonian at momentum `k` along the edge is truncated to
//! sites `m = 1..M` with `ψ^A_0 = 0` on the physical (left) boundary and
//! `ψ^B_{M+1} = 0` on an artificial right boundary:
//!
//! ```text
//! (Hψ)^A_m = a_m ψ^B_m + ψ^B_{m+1},     (Hψ)^B_m = ā_m ψ^A_m + ψ^A_{m-1}.
//! ```
//!
//! Inside a bulk gap the eigenstates of the strip are edge states living at
//! one of the two boundaries. Following the left-edge branches across one
//! period in `k` and counting the Fermi-level crossings, `+1` for each
//! decreasing branch and `-1` for each increasing one, gives the Chern number
//! of the gap independently of any transfer matrix.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::bulk::{hermiticity_residual, GapRecord};
use crate::error::{Error, Result};
use crate::flux::Flux;
use crate::transfer::hopping_phase;

/// Default number of `k` samples over one period.
pub const DEFAULT_K_POINTS: usize = 400;

/// Default strip length in units of `q`.
pub const DEFAULT_SITES_PER_Q: u32 = 8;

/// Minimum weight in an outer third for a state to count as edge-localized.
pub const LOCALIZATION_THRESHOLD: f64 = 0.9;

/// Fractional offset of the `k` grid. Left and right branches can cross at
/// symmetric momenta, where the eigenbasis of the degenerate pair is
/// arbitrary; an offset keeps such points off the grid.
pub const K_GRID_OFFSET: f64 = 0.371;

/// Minimum squared overlap accepted when matching states across `k`.
pub const MATCH_OVERLAP: f64 = 0.5;

/// Finite zigzag strip at fixed `k`, sites ordered `(1, A), (1, B), (2, A), ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct StripHamiltonian {
    pub flux: Flux,
    pub k: f64,
    pub sites: usize,
    pub matrix: DMatrix<Complex<f64>>,
}

impl StripHamiltonian {
    pub fn hermiticity_residual(&self) -> f64 {
        hermiticity_residual(&self.matrix)
    }
}

/// Boundary that an edge state is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// An in-gap eigenvalue branch followed across the `k` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBranch {
    pub points: Vec<(f64, f64)>,
    pub side: Option<Side>,
}

/// Signed crossing counts of one gap.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCount {
    pub r: u32,
    pub fermi_energy: f64,
    /// Count over left-edge branches; equals the Chern number.
    pub left: i64,
    /// Count over right-edge branches; the opposite edge carries `-left`.
    pub right: i64,
    pub branches: Vec<EdgeBranch>,
}

fn check_sites(flux: Flux, sites: usize) -> Result<()> {
    let q = flux.q() as usize;
    if sites == 0 || !sites.is_multiple_of(q) {
        return Err(Error::Config(format!("strip length {sites} is not a positive multiple of q = {q}")));
    }
    Ok(())
}

/// Build the `2M × 2M` strip Hamiltonian at momentum `k`.
pub fn build_strip(flux: Flux, k: f64, sites: usize) -> Result<StripHamiltonian> {
    check_sites(flux, sites)?;
    let d = strip_block(flux, k, sites);
    let n = 2 * sites;
    let mut matrix = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
    for i in 0..sites {
        for j in 0..sites {
            matrix[(2 * i, 2 * j + 1)] = d[(i, j)];
            matrix[(2 * j + 1, 2 * i)] = d[(i, j)].conj();
        }
    }
    Ok(StripHamiltonian { flux, k, sites, matrix })
}

/// Sublattice block of the strip: `D_mm = a_m`, `D_{m,m+1} = 1`.
fn strip_block(flux: Flux, k: f64, sites: usize) -> DMatrix<Complex<f64>> {
    let mut d = DMatrix::from_element(sites, sites, Complex::new(0.0, 0.0));
    for m in 1..=sites {
        d[(m - 1, m - 1)] = hopping_phase(flux, m as i64, k);
        if m < sites {
            d[(m - 1, m)] = Complex::new(1.0, 0.0);
        }
    }
    d
}

/// Eigenpairs of the strip at one `k`.
///
/// With `D = U Σ V†` the strip has eigenvalues `±σ_i` with eigenvectors
/// `(u_i, ±v_i)/√2` in the sublattice basis; states are stored through
/// `(energy, i, ±1)` and resolved lazily.
#[derive(Clone)]
struct Snapshot {
    k: f64,
    energies: Vec<f64>,
    index: Vec<(usize, bool)>,
    u: DMatrix<Complex<f64>>,
    v: DMatrix<Complex<f64>>,
}

impl Snapshot {
    fn new(flux: Flux, k: f64, sites: usize) -> Result<Self> {
        // Gauge the bidiagonal block real: with row phases `P` and column
        // phases `Q`, `P D Q` has entries `|a_m|` and `1`, and `D = P† D_r Q†`
        // gives `U = P† U_r`, `V = Q V_r`.
        let mut real = DMatrix::<f64>::zeros(sites, sites);
        let mut row_phase = Vec::with_capacity(sites);
        let mut col_phase = Vec::with_capacity(sites);
        let mut q_m = Complex::new(1.0, 0.0);
        for m in 1..=sites {
            let a = hopping_phase(flux, m as i64, k);
            let modulus = a.norm();
            let unit = if modulus > 0.0 { a / modulus } else { Complex::new(1.0, 0.0) };
            // p_m a_m q_m = |a_m|, and p_m q_{m+1} = 1.
            let p_m = (unit * q_m).conj();
            real[(m - 1, m - 1)] = modulus;
            if m < sites {
                real[(m - 1, m)] = 1.0;
            }
            row_phase.push(p_m);
            col_phase.push(q_m);
            q_m = p_m.conj();
        }
        let svd = faer::Mat::<f64>::from_fn(sites, sites, |i, j| real[(i, j)]).svd().map_err(|_| {
            Error::Eigensolver { p: flux.p(), q: flux.q(), k1: k, k2: f64::NAN }
        })?;
        let (u_r, v_r, sigma) = (svd.U(), svd.V(), svd.S());
        let singular: Vec<f64> = (0..sites).map(|i| sigma[i].max(0.0)).collect();
        let u = DMatrix::from_fn(sites, sites, |i, j| row_phase[i].conj() * u_r[(i, j)]);
        let v = DMatrix::from_fn(sites, sites, |i, j| col_phase[i] * v_r[(i, j)]);
        let mut states: Vec<(f64, usize, bool)> = Vec::with_capacity(2 * sites);
        for (i, &s) in singular.iter().enumerate() {
            states.push((s, i, true));
            states.push((-s, i, false));
        }
        states.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite singular values"));
        Ok(Snapshot {
            k,
            energies: states.iter().map(|s| s.0).collect(),
            index: states.iter().map(|s| (s.1, s.2)).collect(),
            u,
            v,
        })
    }

    /// Squared overlap `|⟨ψ_a | ψ'_b⟩|²` with a state of another snapshot.
    fn overlap(&self, a: usize, other: &Snapshot, b: usize) -> f64 {
        let (i, pi) = self.index[a];
        let (j, pj) = other.index[b];
        let uu = self.u.column(i).dotc(&other.u.column(j));
        let vv = self.v.column(i).dotc(&other.v.column(j));
        let z = if pi == pj { uu + vv } else { uu - vv };
        z.norm_sqr() * 0.25
    }

    /// Fractions of the weight in the left and right outer thirds.
    fn third_weights(&self, a: usize) -> (f64, f64) {
        let (i, _) = self.index[a];
        let sites = self.u.nrows();
        let third = sites / 3;
        let weight = |m: usize| (self.u[(m, i)].norm_sqr() + self.v[(m, i)].norm_sqr()) * 0.5;
        let left = (0..third).map(weight).fold(0.0, |x, y| x + y);
        let right = (sites - third..sites).map(weight).fold(0.0, |x, y| x + y);
        (left, right)
    }

    fn side(&self, a: usize) -> Option<Side> {
        let (left, right) = self.third_weights(a);
        let threshold = LOCALIZATION_THRESHOLD;
        if left >= threshold {
            Some(Side::Left)
        } else if right >= threshold {
            Some(Side::Right)
        } else {
            None
        }
    }

    /// Indices of states with `|E - center| < radius`.
    fn window(&self, center: f64, radius: f64) -> impl Iterator<Item = usize> + '_ {
        self.energies
            .iter()
            .enumerate()
            .filter(move |(_, &e)| (e - center).abs() < radius)
            .map(|(i, _)| i)
    }
}

/// Fermi energy used for a gap: its center, or exactly zero for a gap that
/// contains the chiral point.
pub fn fermi_energy(gap: &GapRecord<f64>) -> f64 {
    if gap.e1 < 0.0 && gap.e2 > 0.0 {
        0.0
    } else {
        gap.center()
    }
}

#[derive(Debug)]
enum Ambiguity {
    /// Matching failed or jumped; a finer `k` grid helps.
    Matching(String),
    /// A crossing state is not edge-localized; a longer strip helps.
    Localization(String),
}

struct GapTracker {
    r: u32,
    fermi: f64,
    width: f64,
    left: i64,
    right: i64,
    /// Open branches: index of their last state in the previous snapshot.
    open: Vec<(usize, EdgeBranch)>,
    closed: Vec<EdgeBranch>,
}

impl GapTracker {
    fn new(gap: &GapRecord<f64>) -> Self {
        GapTracker {
            r: gap.r,
            fermi: fermi_energy(gap),
            width: gap.width(),
            left: 0,
            right: 0,
            open: Vec::new(),
            closed: Vec::new(),
        }
    }

    fn in_gap(&self, e: f64) -> bool {
        e > self.fermi - self.width * 0.5 && e < self.fermi + self.width * 0.5
    }

    fn start(&mut self, snap: &Snapshot) {
        let half = self.width * 0.5;
        for a in snap.window(self.fermi, half).collect::<Vec<_>>() {
            let branch = EdgeBranch { points: vec![(snap.k, snap.energies[a])], side: snap.side(a) };
            self.open.push((a, branch));
        }
    }

    /// Advance all branches from `prev` to `cur` and record crossings.
    fn step(&mut self, prev: &Snapshot, cur: &Snapshot) -> std::result::Result<(), Ambiguity> {
        let quarter = self.width * 0.25;
        let candidates: Vec<usize> = cur.window(self.fermi, self.width).collect();
        let mut taken = vec![false; cur.energies.len()];
        let mut still_open = Vec::with_capacity(self.open.len());
        for (a, mut branch) in std::mem::take(&mut self.open) {
            let e_prev = prev.energies[a];
            let best = candidates
                .iter()
                .map(|&b| (b, prev.overlap(a, cur, b)))
                .max_by(|x, y| x.1.partial_cmp(&y.1).expect("finite overlaps"));
            let near_fermi = (e_prev - self.fermi).abs() < quarter;
            let Some((b, ov)) = best.filter(|&(_, ov)| ov >= MATCH_OVERLAP) else {
                if near_fermi {
                    return Err(Ambiguity::Matching(format!("no continuation at k = {:e}", cur.k)));
                }
                self.closed.push(branch);
                continue;
            };
            let e_cur = cur.energies[b];
            let crosses = (e_prev - self.fermi) * (e_cur - self.fermi) < 0.0;
            if crosses || near_fermi {
                if (e_cur - e_prev).abs() >= quarter {
                    return Err(Ambiguity::Matching(format!("jump of {:e} at k = {:e}", e_cur - e_prev, cur.k)));
                }
                if taken[b] {
                    return Err(Ambiguity::Matching(format!("two branches merge at k = {:e} (overlap {:e})", cur.k, ov)));
                }
            }
            if crosses {
                let side = match (prev.side(a), cur.side(b)) {
                    (Some(s), Some(t)) if s == t => s,
                    (Some(s), None) | (None, Some(s)) => s,
                    _ => {
                        return Err(Ambiguity::Localization(format!(
                            "crossing state at k = {:e} not localized at one edge",
                            cur.k
                        )))
                    }
                };
                let sign = if e_cur < e_prev { 1 } else { -1 };
                match side {
                    Side::Left => self.left += sign,
                    Side::Right => self.right += sign,
                }
                branch.side = Some(side);
            }
            if branch.side.is_none() {
                branch.side = cur.side(b);
            }
            branch.points.push((cur.k, e_cur));
            if self.in_gap(e_cur) {
                taken[b] = true;
                still_open.push((b, branch));
            } else {
                self.closed.push(branch);
            }
        }
        let half = self.width * 0.5;
        for b in cur.window(self.fermi, half).collect::<Vec<_>>() {
            if !taken[b] {
                let branch = EdgeBranch { points: vec![(cur.k, cur.energies[b])], side: cur.side(b) };
                still_open.push((b, branch));
            }
        }
        self.open = still_open;
        Ok(())
    }

    fn finish(mut self) -> EdgeCount {
        self.closed.extend(self.open.into_iter().map(|(_, b)| b));
        EdgeCount { r: self.r, fermi_energy: self.fermi, left: self.left, right: self.right, branches: self.closed }
    }
}

fn sweep(
    flux: Flux,
    gaps: &[GapRecord<f64>],
    k_points: usize,
    sites: usize,
) -> Result<Vec<std::result::Result<EdgeCount, Ambiguity>>> {
    let mut trackers: Vec<Option<GapTracker>> = gaps.iter().map(|g| Some(GapTracker::new(g))).collect();
    let mut failures: Vec<Option<Ambiguity>> = gaps.iter().map(|_| None).collect();
    let k_at = |j: usize| TAU * ((j as f64) + K_GRID_OFFSET) / (k_points as f64);
    let first = Snapshot::new(flux, k_at(0), sites)?;
    for t in trackers.iter_mut().flatten() {
        t.start(&first);
    }
    let mut prev = first.clone();
    let mut first = Some(first);
    for j in 1..=k_points {
        let cur = if j == k_points {
            // H(k + 2π) = H(k): close the loop on the first decomposition.
            Snapshot { k: k_at(j), ..first.take().expect("used once") }
        } else {
            Snapshot::new(flux, k_at(j), sites)?
        };
        for (slot, failure) in trackers.iter_mut().zip(failures.iter_mut()) {
            if let Some(tracker) = slot {
                if let Err(why) = tracker.step(&prev, &cur) {
                    *failure = Some(why);
                    *slot = None;
                }
            }
        }
        prev = cur;
    }
    Ok(trackers
        .into_iter()
        .zip(failures)
        .map(|(t, f)| match (t, f) {
            (Some(t), _) => Ok(t.finish()),
            (None, Some(why)) => Err(why),
            (None, None) => unreachable!("tracker dropped without a recorded failure"),
        })
        .collect())
}

/// Retry rounds after the first sweep for gaps left ambiguous.
pub const MAX_RETRIES: u32 = 3;

/// Signed crossing counts for several gaps of one flux, sharing the strip
/// diagonalizations.
///
/// A gap whose branches cannot be matched is swept again on a doubled `k`
/// grid; one whose crossing states are not localized on a doubled strip.
/// Refinements accumulate over up to [`MAX_RETRIES`] rounds; anything still
/// ambiguous is an oracle-inconclusive error.
pub fn edge_counts(
    flux: Flux,
    gaps: &[GapRecord<f64>],
    k_points: usize,
    sites: usize,
) -> Result<Vec<EdgeCount>> {
    check_sites(flux, sites)?;
    let first = sweep(flux, gaps, k_points, sites)?;
    let mut out = Vec::with_capacity(gaps.len());
    for (gap, result) in gaps.iter().zip(first) {
        let (mut kp, mut m) = (k_points, sites);
        let mut result = result;
        let mut round = 0;
        let count = loop {
            match result {
                Ok(count) => break count,
                Err(why) if round == MAX_RETRIES => {
                    return Err(Error::OracleInconclusive {
                        p: flux.p(),
                        q: flux.q(),
                        r: gap.r,
                        reason: match why {
                            Ambiguity::Matching(s) | Ambiguity::Localization(s) => s,
                        },
                    })
                }
                Err(why) => {
                    match why {
                        Ambiguity::Matching(_) => kp *= 2,
                        Ambiguity::Localization(_) => m *= 2,
                    }
                    round += 1;
                    result = sweep(flux, std::slice::from_ref(gap), kp, m)?.pop().expect("one gap");
                }
            }
        };
        out.push(count);
    }
    Ok(out)
}

/// Signed count of left-edge Fermi-level crossings in one gap.
pub fn count_signed_crossings(
    flux: Flux,
    gap: &GapRecord<f64>,
    k_points: usize,
    sites: usize,
) -> Result<i64> {
    Ok(edge_counts(flux, std::slice::from_ref(gap), k_points, sites)?[0].left)
}

/// Default strip length `8 q`.
pub fn default_sites(flux: Flux) -> usize {
    (DEFAULT_SITES_PER_Q * flux.q()) as usize
}

/// Eigenvalues of the strip at `k`, ascending.
pub fn strip_energies(flux: Flux, k: f64, sites: usize) -> Result<Vec<f64>> {
    check_sites(flux, sites)?;
    Ok(Snapshot::new(flux, k, sites)?.energies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bulk::{band_extrema, detect_gaps};
    use crate::flux::reduce_flux;

    fn flux(p: i64, q: i64) -> Flux {
        reduce_flux(p, q).unwrap()
    }

    fn gaps(f: Flux) -> Vec<GapRecord<f64>> {
        let ext = band_extrema::<f64>(f, 64).unwrap();
        detect_gaps(f, &ext, 1e-4)
    }

    #[test]
    fn strip_is_hermitian_and_chiral() {
        let f = flux(2, 7);
        let strip = build_strip(f, 0.83, 56).unwrap();
        assert!(strip.hermiticity_residual() < 1e-12);
        let mut full: Vec<f64> = strip.matrix.symmetric_eigenvalues().iter().copied().collect();
        full.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let chiral = strip_energies(f, 0.83, 56).unwrap();
        for (a, b) in full.iter().zip(&chiral) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn singular_vectors_reconstruct_the_block() {
        let f = flux(3, 7);
        let (k, sites) = (2.1, 21);
        let snap = Snapshot::new(f, k, sites).unwrap();
        let d = strip_block(f, k, sites);
        for (a, &e) in snap.energies.iter().enumerate().filter(|(_, &e)| e > 0.0) {
            let (i, _) = snap.index[a];
            let residual = (&d * snap.v.column(i) - snap.u.column(i) * Complex::new(e, 0.0)).norm();
            assert!(residual < 1e-10, "{residual}");
        }
    }

    #[test]
    fn strip_length_must_be_multiple_of_q() {
        assert!(matches!(build_strip(flux(1, 5), 0.0, 12), Err(Error::Config(_))));
    }

    #[test]
    fn first_gaps_of_one_and_two_fifths() {
        let f = flux(1, 5);
        let g = gaps(f).into_iter().find(|g| g.r == 1).unwrap();
        assert_eq!(count_signed_crossings(f, &g, DEFAULT_K_POINTS, default_sites(f)).unwrap(), 1);
        let f = flux(2, 5);
        let g = gaps(f).into_iter().find(|g| g.r == 1).unwrap();
        assert_eq!(count_signed_crossings(f, &g, DEFAULT_K_POINTS, default_sites(f)).unwrap(), 3);
    }

    #[test]
    fn nothing_crosses_above_the_spectrum() {
        let f = flux(3, 7);
        let synthetic = GapRecord { flux: f, r: 14, e1: 3.5, e2: 4.5, chern: None };
        assert_eq!(count_signed_crossings(f, &synthetic, DEFAULT_K_POINTS, default_sites(f)).unwrap(), 0);
    }

    #[test]
    fn right_edge_carries_opposite_count() {
        let f = flux(1, 5);
        for count in edge_counts(f, &gaps(f), DEFAULT_K_POINTS, default_sites(f)).unwrap() {
            assert_eq!(count.right, -count.left, "gap {}", count.r);
        }
    }

    #[test]
    fn mid_gap_states_are_edge_localized() {
        let f = flux(1, 5);
        let sites = default_sites(f);
        let gs = gaps(f);
        for j in 0..40 {
            let k = std::f64::consts::TAU * (j as f64 + 0.3) / 40.0;
            let snap = Snapshot::new(f, k, sites).unwrap();
            for g in gs.iter().filter(|g| g.r != 5) {
                for a in snap.window(g.center(), g.width() * 0.25) {
                    assert!(snap.side(a).is_some(), "gap {} k {k} E {}", g.r, snap.energies[a]);
                }
            }
        }
    }
}
