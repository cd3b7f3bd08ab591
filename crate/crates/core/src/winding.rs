//! Chern numbers as winding numbers of the contracting eigenvector.
//!
//! For an energy inside a bulk gap the contracting eigenvector `Ω(k) = (a, b)`
//! of the period transfer matrix is real, so its direction is a point of the
//! projective line. As `k` runs once around `[0, 2π)` that direction turns an
//! integer number of half-turns; the signed count is the Chern number of the
//! gap. The edge boundary condition `Ω ∝ (1, 0)` is met once per half-turn,
//! which is why counting in units of `π` gives the Hall conductance directly.

use crate::bulk::GapRecord;
use crate::error::{Error, Result};
use crate::flux::{snap_sigma, ChernResult, ChernStatus, Flux, DEFAULT_SNAP_THRESHOLD};
use crate::scalar::Real;
use crate::transfer::{angle_slope, contracting_vector, TransferContext};

/// Base samples per unit of `q` (grid spacing `2π / (200 q)`).
pub const DEFAULT_POINTS_PER_Q: usize = 200;

/// Maximum bisection depth per base interval.
pub const DEFAULT_MAX_DEPTH: u32 = 24;

/// Increments larger than this (in radians) trigger bisection.
pub const REFINE_THRESHOLD: f64 = std::f64::consts::FRAC_PI_3;

/// `total_turn / π` must be this close to an integer for a closed loop.
pub const LOOP_CLOSURE_TOLERANCE: f64 = 1e-3;

/// Global orientation of the winding count against the edge-crossing count.
///
/// Calibrated once so that gap 1 of flux 1/5 yields +1; with the angle
/// `atan2(b, a)` of `Ω = (ψ^B_0, ψ^A_{-1})` no flip is required.
pub const ORIENTATION: f64 = 1.0;

/// Sampling parameters of a phase trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    pub points_per_q: usize,
    pub max_depth: u32,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { points_per_q: DEFAULT_POINTS_PER_Q, max_depth: DEFAULT_MAX_DEPTH }
    }
}

/// A base interval that needed bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement<T> {
    pub k_lo: T,
    pub k_hi: T,
    /// Deepest bisection level reached inside the interval.
    pub depth: u32,
}

/// Unwrapped projective angle of `Ω(k)` on `[0, 2π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrace<T> {
    pub energy: T,
    /// `(k, phi)` with `phi` continuous; ends at `k = 2π`.
    pub samples: Vec<(T, T)>,
    pub refinements: Vec<Refinement<T>>,
    pub refinement_depth: u32,
    /// `phi(2π) - phi(0)`.
    pub total_turn: T,
    /// Number of transfer-matrix evaluations spent on this trace.
    pub evaluations: usize,
}

impl<T: Real> PhaseTrace<T> {
    /// Signed half-turn count, `total_turn / π`, with [`ORIENTATION`] applied.
    pub fn winding_raw(&self) -> T {
        T::lit(ORIENTATION) * self.total_turn / T::PI()
    }

    /// Whether `total_turn / π` is integral to [`LOOP_CLOSURE_TOLERANCE`].
    pub fn is_closed(&self) -> bool {
        let w = self.winding_raw();
        (w - w.round()).abs() < T::lit(LOOP_CLOSURE_TOLERANCE)
    }
}

/// Reduce an angle difference modulo `π` into `(-π/2, π/2]`.
#[inline]
pub fn wrap_half_turn<T: Real>(delta: T) -> T {
    let pi = T::PI();
    let half = T::FRAC_PI_2();
    let mut d = delta - pi * (delta / pi).round();
    if d <= -half {
        d = d + pi;
    } else if d > half {
        d = d - pi;
    }
    d
}

struct Tracer<'a, T> {
    ctx: &'a TransferContext<T>,
    energy: T,
    max_depth: u32,
    threshold: T,
    evaluations: usize,
    /// Angle at `k = 0`; only used to break ties at the chiral point.
    phi0: T,
}

/// One evaluation: `k`, the angle (wrapped or unwrapped) and `dφ/dk`.
#[derive(Clone, Copy)]
struct Point<T> {
    k: T,
    phi: T,
    slope: T,
}

impl<T: Real> Tracer<'_, T> {
    fn eval(&mut self, k: T) -> Result<Point<T>> {
        self.evaluations += 1;
        let ts = self.ctx.period_with_slope(self.energy, k);
        let cv = contracting_vector(&ts.transfer)?;
        Ok(Point { k, phi: cv.angle(), slope: angle_slope(&cv, &ts.slope) })
    }

    /// An interval is resolved when both the observed increment and the
    /// increments predicted from the endpoint slopes stay below threshold.
    fn resolved(&self, lo: &Point<T>, hi: &Point<T>, delta: T) -> bool {
        let width = hi.k - lo.k;
        delta.abs() <= self.threshold
            && lo.slope.abs() * width <= self.threshold
            && hi.slope.abs() * width <= self.threshold
    }

    /// Increment at `E = 0`, where `R` is diagonal and `Ω` jumps between the
    /// two axes. A swap is an exact quarter-turn with no preferred sense, so
    /// it is taken back toward the starting angle and the swaps cancel.
    fn chiral_step(&self, phi_lo: T, angle_hi: T) -> T {
        let delta = wrap_half_turn(angle_hi - phi_lo);
        let quarter = T::FRAC_PI_2();
        if (delta.abs() - quarter).abs() > T::lit(1e-9) {
            return delta;
        }
        if phi_lo > self.phi0 {
            -quarter
        } else {
            quarter
        }
    }

    /// Append the refined samples in `(lo.k, hi.k]`, returning the deepest level used.
    ///
    /// `lo.phi` is unwrapped, `hi.phi` is the raw angle.
    fn refine(
        &mut self,
        lo: Point<T>,
        hi: Point<T>,
        depth: u32,
        out: &mut Vec<Point<T>>,
    ) -> Result<u32> {
        if self.energy == T::zero() {
            out.push(Point { phi: lo.phi + self.chiral_step(lo.phi, hi.phi), ..hi });
            return Ok(depth);
        }
        let delta = wrap_half_turn(hi.phi - lo.phi);
        if self.resolved(&lo, &hi, delta) {
            out.push(Point { phi: lo.phi + delta, ..hi });
            return Ok(depth);
        }
        if depth >= self.max_depth {
            return Err(Error::RefinementExhausted {
                energy: self.energy.to_f64_lossy(),
                k_lo: lo.k.to_f64_lossy(),
                k_hi: hi.k.to_f64_lossy(),
            });
        }
        let mid = self.eval((lo.k + hi.k) * T::lit(0.5))?;
        let d1 = self.refine(lo, mid, depth + 1, out)?;
        let mid = *out.last().expect("refine pushes at least one sample");
        let d2 = self.refine(mid, hi, depth + 1, out)?;
        Ok(d1.max(d2))
    }
}

/// Sample and unwrap the projective angle of `Ω(k)` at a fixed energy.
///
/// The base grid has `points_per_q * q` intervals. An interval is bisected
/// recursively, up to `max_depth` levels, while its increment or the
/// increment predicted by `|dφ/dk|` at either endpoint exceeds `π/3`. The
/// slope test catches turns that complete inside a single interval and so
/// leave a small wrapped increment behind.
///
/// At exactly `E = 0` every fiber is chiral: `Ω` is always one of the two
/// coordinate axes and the trace is piecewise constant. Axis swaps are then
/// paired off so that a closed chiral trace has zero turn.
pub fn trace_phase<T: Real>(
    ctx: &TransferContext<T>,
    energy: T,
    config: TraceConfig,
) -> Result<PhaseTrace<T>> {
    let n = (config.points_per_q * ctx.flux().q() as usize).max(8);
    let mut tracer = Tracer {
        ctx,
        energy,
        max_depth: config.max_depth,
        threshold: T::lit(REFINE_THRESHOLD),
        evaluations: 0,
        phi0: T::zero(),
    };
    let two_pi = T::TAU();
    let k_at = |i: usize| two_pi * T::from_index(i) / T::from_index(n);

    let first = tracer.eval(T::zero())?;
    let phi0 = first.phi;
    tracer.phi0 = phi0;
    let mut points = Vec::with_capacity(n + 1);
    points.push(first);
    let mut refinements = Vec::new();
    let mut refinement_depth = 0;

    for i in 1..=n {
        let hi = tracer.eval(k_at(i))?;
        let lo = *points.last().expect("nonempty");
        let before = points.len();
        let depth = tracer.refine(lo, hi, 0, &mut points)?;
        if points.len() > before + 1 || depth > 0 {
            refinements.push(Refinement { k_lo: lo.k, k_hi: hi.k, depth });
            refinement_depth = refinement_depth.max(depth);
        }
    }
    let samples: Vec<(T, T)> = points.iter().map(|p| (p.k, p.phi)).collect();

    let total_turn = samples.last().expect("nonempty").1 - phi0;
    Ok(PhaseTrace {
        energy,
        samples,
        refinements,
        refinement_depth,
        total_turn,
        evaluations: tracer.evaluations,
    })
}

/// Winding parameters for one gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingConfig {
    pub trace: TraceConfig,
    pub snap_threshold: f64,
}

impl Default for WindingConfig {
    fn default() -> Self {
        WindingConfig { trace: TraceConfig::default(), snap_threshold: DEFAULT_SNAP_THRESHOLD }
    }
}

/// Relative positions inside a gap tried in order: the center, then ±5%.
pub const EVALUATION_POINTS: [f64; 3] = [0.5, 0.45, 0.55];

/// Chern number of one gap together with the work it took.
#[derive(Debug, Clone, PartialEq)]
pub struct GapWinding<T> {
    pub chern: ChernResult<T>,
    pub evaluations: usize,
}

/// Chern number of `gap`, evaluated at its center.
///
/// If the trace fails at the center (refinement exhausted, or a
/// near-degenerate transfer matrix at an isolated `k`), the energies at 45%
/// and 55% of the gap are tried. Exhausted refinement at all three yields an
/// `Undecided` result; a degenerate transfer at all three is an error, since
/// the gap then is not actually open.
pub fn chern_of_gap<T: Real>(
    ctx: &TransferContext<T>,
    gap: &GapRecord<T>,
    config: WindingConfig,
) -> Result<GapWinding<T>> {
    let flux = ctx.flux();
    let mut evaluations = 0;
    let mut last_err = None;
    // A gap that straddles E = 0 is evaluated exactly there.
    let straddles_zero = gap.e1 < T::zero() && gap.e2 > T::zero();
    for &t in &EVALUATION_POINTS {
        let energy = if straddles_zero && t == EVALUATION_POINTS[0] {
            T::zero()
        } else {
            gap.e1 + (gap.e2 - gap.e1) * T::lit(t)
        };
        match trace_phase(ctx, energy, config.trace) {
            Ok(trace) => {
                evaluations += trace.evaluations;
                let chern = snap_sigma(trace.winding_raw(), gap.r, flux, config.snap_threshold);
                return Ok(GapWinding { chern, evaluations });
            }
            Err(err) => last_err = Some(err),
        }
    }
    match last_err {
        Some(Error::RefinementExhausted { .. }) => Ok(GapWinding {
            chern: undecided(gap.r, flux),
            evaluations,
        }),
        Some(err) => Err(err),
        None => unreachable!("at least one evaluation point"),
    }
}

fn undecided<T: Real>(r: u32, flux: Flux) -> ChernResult<T> {
    let mut out = snap_sigma(T::nan(), r, flux, 0.0);
    out.status = ChernStatus::Undecided;
    out
}
