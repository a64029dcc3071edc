//! Per-step supremum over zero-mean laws in dimension one.
//!
//! Extreme points of the admissible laws are two-point laws `{a, b}` with
//! `a <= 0 <= b`, weights `b/(b-a)` and `-a/(b-a)`. For a value function that
//! is piecewise linear in the increment, the objective is a ratio of affine
//! functions on every linear piece of either coordinate, hence monotone there,
//! so the supremum over the feasible box is attained on breakpoints and box
//! endpoints. Enumerating those pairs is exact for grid-interpolated values.
//!
//! When the lower bound on `|y|^2` is dropped, the second-moment constraint
//! `E[Y^2] >= r'` can bind; it is handled by a one-dimensional Lagrangian dual
//! whose optimum mixes two two-point laws.

use super::{BoundMode, StepMeasure};
use crate::error::{Error, Result};
use crate::uncertainty_set::UncertaintySet;
use crate::value_grid::ValueGrid;

/// Points per side of the dense search used when no breakpoints are known.
pub const DENSE_POINTS: usize = 200;
/// Final bracket width of the local refinement.
pub const REFINE_TOL: f64 = 1e-6;

/// A function of the post-step position that the step optimizer maximizes.
pub trait StepValue1d {
    fn value(&self, z: f64) -> f64;
    /// Kinks of the function inside `[lo, hi]`, when it is piecewise linear.
    fn breakpoints(&self, _lo: f64, _hi: f64) -> Option<Vec<f64>> {
        None
    }
}

impl StepValue1d for ValueGrid {
    fn value(&self, z: f64) -> f64 {
        self.eval(&[z])
    }

    fn breakpoints(&self, lo: f64, hi: f64) -> Option<Vec<f64>> {
        let axis = self.axes()[0];
        let i0 = ((lo - axis.start) / axis.step).ceil().max(0.0) as usize;
        let i1 = (((hi - axis.start) / axis.step).floor().max(-1.0) + 1.0) as usize;
        Some((i0..i1.min(axis.len)).map(|i| axis.node(i)).collect())
    }
}

/// Wraps a closure without known kinks; the optimizer falls back to a dense
/// search plus golden-section refinement.
pub struct SmoothFn<F>(pub F);

impl<F: Fn(f64) -> f64> StepValue1d for SmoothFn<F> {
    fn value(&self, z: f64) -> f64 {
        (self.0)(z)
    }
}

/// Pointwise and moment constraints of one step in dimension one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Bounds1d {
    /// `|y| >= sqrt_lo`.
    pub sqrt_lo: f64,
    /// `|y| <= sqrt_hi`.
    pub sqrt_hi: f64,
    /// `E[Y^2] >= moment_lo`; only binds when `sqrt_lo^2 < moment_lo`.
    pub moment_lo: f64,
}

impl Bounds1d {
    pub fn new(step_set: &UncertaintySet, mode: BoundMode) -> Self {
        let (r, big_r) = step_set.spectrum_bounds();
        let (lo, hi) = mode.pointwise_bounds(1, r, big_r);
        Self {
            sqrt_lo: lo.sqrt(),
            sqrt_hi: hi.sqrt(),
            moment_lo: r,
        }
    }

    fn moment_binds(&self) -> bool {
        self.sqrt_lo * self.sqrt_lo < self.moment_lo * (1.0 - 1e-12)
    }
}

/// Positive-side candidates: the endpoints plus every multiple of `h` in
/// between (for `h > 0`) plus the `extra` points. Sorted ascending.
pub(crate) fn side_candidates(bounds: &Bounds1d, h: f64, extra: &[f64]) -> Vec<f64> {
    let (lo, hi) = (bounds.sqrt_lo, bounds.sqrt_hi);
    let mut out = vec![lo];
    if h > 0.0 {
        let j0 = (lo / h - 1e-9).ceil().max(0.0) as i64;
        let j1 = (hi / h + 1e-9).floor() as i64;
        for j in j0..=j1 {
            let y = j as f64 * h;
            out.push(y.clamp(lo, hi));
        }
    }
    out.extend(extra.iter().copied().filter(|&y| y > lo && y < hi));
    out.push(hi);
    out.sort_by(f64::total_cmp);
    let tol = 1e-12 * hi.max(f64::MIN_POSITIVE);
    out.dedup_by(|a, b| (*a - *b).abs() <= tol);
    out
}

/// Best two-point law for the objective `E[W(Y) + lambda Y^2]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TwoPoint {
    pub a: f64,
    pub b: f64,
    pub wa: f64,
    pub wb: f64,
    /// `E[W(Y)]`.
    pub value: f64,
    /// `E[Y^2]`.
    pub moment: f64,
}

impl TwoPoint {
    fn weights(&self) -> (f64, f64) {
        if self.b - self.a == 0.0 {
            (1.0, 0.0)
        } else {
            (self.b / (self.b - self.a), -self.a / (self.b - self.a))
        }
    }

    fn measure_parts(&self, scale: f64, out: &mut Vec<(f64, f64)>) {
        let (pa, pb) = self.weights();
        if pa * scale > 0.0 {
            out.push((self.a, pa * scale));
        }
        if pb * scale > 0.0 {
            out.push((self.b, pb * scale));
        }
    }
}

/// Maximizes over all pairs `(neg[i], pos[j])`; ties within a relative `1e-12`
/// go to the pair with the smallest `|a| + |b|`.
pub(crate) fn best_pair(neg: &[(f64, f64)], pos: &[(f64, f64)], lambda: f64) -> TwoPoint {
    let eval = |(a, wa): (f64, f64), (b, wb): (f64, f64)| -> (f64, f64, f64) {
        if b - a == 0.0 {
            (wa, wa, 0.0)
        } else {
            let pa = b / (b - a);
            let pb = -a / (b - a);
            let value = pa * wa + pb * wb;
            let moment = -a * b;
            (value + lambda * moment, value, moment)
        }
    };
    let mut best = f64::NEG_INFINITY;
    for &p in neg {
        for &q in pos {
            best = best.max(eval(p, q).0);
        }
    }
    let slack = 1e-12 * (1.0 + best.abs());
    let mut chosen: Option<(f64, TwoPoint)> = None;
    for &(a, wa) in neg {
        for &(b, wb) in pos {
            let (obj, value, moment) = eval((a, wa), (b, wb));
            if obj >= best - slack {
                let size = a.abs() + b.abs();
                if chosen.as_ref().is_none_or(|(s, _)| size < *s) {
                    chosen = Some((size, TwoPoint { a, b, wa, wb, value, moment }));
                }
            }
        }
    }
    // Only non-finite objectives leave nothing chosen; the sweep rejects the
    // resulting NaN value.
    chosen.map_or(
        TwoPoint {
            a: neg[0].0,
            b: pos[0].0,
            wa: f64::NAN,
            wb: f64::NAN,
            value: f64::NAN,
            moment: f64::NAN,
        },
        |c| c.1,
    )
}

/// Solves the step on explicit candidate abscissae.
pub(crate) fn solve_candidates<W: Fn(f64) -> f64>(w: &W, pos: &[f64], bounds: &Bounds1d) -> (f64, StepMeasure) {
    let neg: Vec<(f64, f64)> = pos.iter().map(|&y| (-y, w(-y))).collect();
    let posv: Vec<(f64, f64)> = pos.iter().map(|&y| (y, w(y))).collect();
    solve_tabulated(&neg, &posv, bounds)
}

pub(crate) fn solve_tabulated(neg: &[(f64, f64)], pos: &[(f64, f64)], bounds: &Bounds1d) -> (f64, StepMeasure) {
    let plain = best_pair(neg, pos, 0.0);
    if !bounds.moment_binds() || plain.moment >= bounds.moment_lo {
        return (plain.value, two_point_measure(&[(plain, 1.0)]));
    }
    // Dual in lambda: at the optimum one maximizer sits below and one above
    // the moment floor; the mixture hitting the floor is optimal.
    let target = bounds.moment_lo;
    let mut lo = 0.0;
    let mut lo_pair = plain;
    let mut hi = 1.0;
    let mut hi_pair = best_pair(neg, pos, hi);
    let mut guard = 0;
    while hi_pair.moment < target && guard < 200 {
        lo = hi;
        lo_pair = hi_pair;
        hi *= 2.0;
        hi_pair = best_pair(neg, pos, hi);
        guard += 1;
    }
    if hi_pair.moment < target {
        // Largest achievable second moment is below the floor: only possible
        // through float noise at the boundary, use the widest pair.
        return (hi_pair.value, two_point_measure(&[(hi_pair, 1.0)]));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p = best_pair(neg, pos, mid);
        if p.moment < target {
            lo = mid;
            lo_pair = p;
        } else {
            hi = mid;
            hi_pair = p;
        }
    }
    let theta = (hi_pair.moment - target) / (hi_pair.moment - lo_pair.moment);
    let value = theta * lo_pair.value + (1.0 - theta) * hi_pair.value;
    (value, two_point_measure(&[(lo_pair, theta), (hi_pair, 1.0 - theta)]))
}

fn two_point_measure(parts: &[(TwoPoint, f64)]) -> StepMeasure {
    let mut atoms = Vec::with_capacity(4);
    for (p, scale) in parts {
        p.measure_parts(*scale, &mut atoms);
    }
    StepMeasure::from_scalar_atoms(&atoms)
}

/// Per-step supremum `sup E[V(x + Y)]` over admissible zero-mean laws for a
/// one-dimensional step set `[r', R']` (already scaled to one step).
pub fn optimize_step_1d<V: StepValue1d + ?Sized>(
    step_set: &UncertaintySet,
    v: &V,
    x: f64,
    mode: BoundMode,
) -> Result<(f64, StepMeasure)> {
    if step_set.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: step_set.dim(),
        });
    }
    let bounds = Bounds1d::new(step_set, mode);
    if bounds.sqrt_hi == 0.0 {
        return Ok((v.value(x), StepMeasure::point_mass(1)));
    }
    let w = |y: f64| v.value(x + y);
    match v.breakpoints(x - bounds.sqrt_hi, x + bounds.sqrt_hi) {
        Some(bps) => {
            let mut extra: Vec<f64> = bps.iter().map(|&z| (z - x).abs()).collect();
            extra.sort_by(f64::total_cmp);
            let pos = side_candidates(&bounds, 0.0, &extra);
            Ok(solve_candidates(&w, &pos, &bounds))
        }
        None => Ok(dense_then_refine(&w, &bounds)),
    }
}

fn dense_then_refine<W: Fn(f64) -> f64>(w: &W, bounds: &Bounds1d) -> (f64, StepMeasure) {
    let (lo, hi) = (bounds.sqrt_lo, bounds.sqrt_hi);
    let spacing = (hi - lo) / (DENSE_POINTS - 1) as f64;
    let pos: Vec<f64> = (0..DENSE_POINTS).map(|i| lo + i as f64 * spacing).collect();
    let (value, measure) = solve_candidates(w, &pos, bounds);
    if bounds.moment_binds() || spacing == 0.0 || measure.atoms().len() != 2 {
        return (value, measure);
    }
    // Alternate golden-section searches on each atom inside its grid cell.
    let mut a = measure.atoms()[0].point[0];
    let mut b = measure.atoms()[1].point[0];
    let objective = |a: f64, b: f64| {
        let t = TwoPoint {
            a,
            b,
            wa: w(a),
            wb: w(b),
            value: 0.0,
            moment: 0.0,
        };
        let (pa, pb) = t.weights();
        pa * t.wa + pb * t.wb
    };
    let mut best = objective(a, b);
    for _ in 0..50 {
        let na = golden_max(|s| objective(s, b), (a - spacing).max(-hi), (a + spacing).min(-lo));
        let nb = golden_max(|s| objective(a, s), (b - spacing).max(lo), (b + spacing).min(hi));
        let cand_a = objective(na, b);
        if cand_a > best {
            a = na;
            best = cand_a;
        }
        let cand_b = objective(a, nb);
        if cand_b > best {
            b = nb;
            best = cand_b;
        }
        if (cand_a - best).abs() < 1e-14 && (cand_b - best).abs() < 1e-14 {
            break;
        }
    }
    if best > value {
        let t = TwoPoint {
            a,
            b,
            wa: w(a),
            wb: w(b),
            value: best,
            moment: -a * b,
        };
        (best, two_point_measure(&[(t, 1.0)]))
    } else {
        (value, measure)
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if hi <= lo {
        return lo;
    }
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > REFINE_TOL {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
