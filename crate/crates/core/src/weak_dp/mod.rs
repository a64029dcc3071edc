//! Discrete-time sublinear expectation: the supremum of `E^P[psi]` over
//! martingale laws whose conditional increment covariance lies in the
//! (scaled) uncertainty set, computed by backward dynamic programming.

mod brute_force;
mod law;
mod step1d;
mod step_nd;

pub use brute_force::brute_force_step;
pub use law::{extract_optimal_law, WeakLaw};
pub use step1d::{optimize_step_1d, SmoothFn, StepValue1d, DENSE_POINTS, REFINE_TOL};
pub use step_nd::{candidate_family, frames, optimize_step_nd, optimize_step_nd_with, FamilyConfig};

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dp::{backward_sweep, DpGrid, GridConfig};
use crate::error::{Error, Result};
use crate::payoffs::{MarkovStateSpec, PathPayoff, PayoffKind};
use crate::uncertainty_set::{SymMatrix, UncertaintySet};
use crate::value_grid::{Axis, ValueGrid};

use step1d::{side_candidates, solve_tabulated, Bounds1d};

/// Which pointwise increment bounds `lo <= |y|^2 <= hi` apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    /// `d^2 r <= |y|^2 <= d^2 R`.
    Paper,
    /// `d r <= |y|^2 <= d^2 R`.
    #[default]
    Relaxed,
    /// `|y|^2 <= d^2 R`; the second-moment constraint alone bounds from below.
    None,
}

impl BoundMode {
    /// `(lo, hi)` for step-set spectrum bounds `(r, R)`.
    pub fn pointwise_bounds(self, d: usize, r: f64, big_r: f64) -> (f64, f64) {
        let d = d as f64;
        let hi = d * d * big_r;
        match self {
            BoundMode::Paper => (d * d * r, hi),
            BoundMode::Relaxed => (d * r, hi),
            BoundMode::None => (0.0, hi),
        }
    }
}

impl FromStr for BoundMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(BoundMode::Paper),
            "relaxed" => Ok(BoundMode::Relaxed),
            "none" => Ok(BoundMode::None),
            other => Err(Error::Config(format!("unknown bound mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// A finitely supported increment law.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMeasure {
    atoms: Vec<Atom>,
}

impl StepMeasure {
    pub fn new(atoms: Vec<(Vec<f64>, f64)>) -> Self {
        Self {
            atoms: atoms
                .into_iter()
                .map(|(point, weight)| Atom { point, weight })
                .collect(),
        }
    }

    pub(crate) fn from_scalar_atoms(atoms: &[(f64, f64)]) -> Self {
        Self::new(atoms.iter().map(|&(y, w)| (vec![y], w)).collect())
    }

    pub fn point_mass(dim: usize) -> Self {
        Self::new(vec![(vec![0.0; dim], 1.0)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].point.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for a in &self.atoms {
            for (mi, yi) in m.iter_mut().zip(&a.point) {
                *mi += a.weight * yi;
            }
        }
        m
    }

    /// `sum_i w_i y_i y_i'`.
    pub fn second_moment(&self) -> SymMatrix {
        let d = self.dim();
        let mut acc = SymMatrix::zeros(d);
        for a in &self.atoms {
            acc = acc.add(&SymMatrix::outer(&a.point).scaled(a.weight));
        }
        acc
    }

    /// Checks weights, zero mean, the moment constraint and the pointwise
    /// bounds against a step set.
    pub fn check(&self, step_set: &UncertaintySet, mode: BoundMode) -> Result<()> {
        let total = self.total_weight();
        if (total - 1.0).abs() > 1e-12 || self.atoms.iter().any(|a| !(a.weight > 0.0)) {
            return Err(Error::InfeasibleStep(format!("weights must be positive and sum to 1, got {total}")));
        }
        if let Some(m) = self.mean().iter().find(|m| m.abs() > 1e-10) {
            return Err(Error::InfeasibleStep(format!("mean {m:e} is not zero")));
        }
        if !step_set.contains(&self.second_moment(), 1e-8)? {
            return Err(Error::InfeasibleStep("second moment outside the step set".into()));
        }
        let (r, big_r) = step_set.spectrum_bounds();
        let (lo, hi) = mode.pointwise_bounds(self.dim(), r, big_r);
        let tol = 1e-12 * hi.max(f64::MIN_POSITIVE);
        for a in &self.atoms {
            let sq: f64 = a.point.iter().map(|v| v * v).sum();
            if sq < lo - tol || sq > hi + tol {
                return Err(Error::InfeasibleStep(format!(
                    "atom with |y|^2 = {sq:e} outside [{lo:e}, {hi:e}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakDpConfig {
    pub bound_mode: BoundMode,
    pub grid: GridConfig,
    /// Candidate family for d >= 2.
    pub family: FamilyConfig,
    /// Keep the optimal step law at every (step, node).
    pub store_policy: bool,
}

/// Per-run record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub n: usize,
    pub value: f64,
    pub grid_h: f64,
    pub radius: f64,
    /// Spacing of the increment candidates (d = 1) or candidate-family size.
    pub step_opt_resolution: f64,
    pub runtime_ms: f64,
}

/// Decision stored at one (step, node).
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Decision {
    Measure(StepMeasure),
    Candidate(u32),
}

/// Stored optimal laws of a weak run.
#[derive(Debug, Clone)]
pub struct WeakPolicy {
    pub(crate) axes: Vec<Axis>,
    pub(crate) spec: MarkovStateSpec,
    pub(crate) family: Vec<StepMeasure>,
    pub(crate) decisions: Vec<Vec<Option<Decision>>>,
    pub(crate) n: usize,
    pub(crate) horizon: f64,
    pub(crate) step_set: UncertaintySet,
    pub(crate) bound_mode: BoundMode,
}

#[derive(Debug, Clone)]
pub struct WeakResult {
    pub value: f64,
    pub record: RunRecord,
    pub grid: DpGrid,
    pub policy: Option<WeakPolicy>,
}

/// `sup E^P[xi(x_hat)]` over `n`-step martingale laws whose conditional
/// increment covariance lies in `(T/n) D`.
pub fn evaluate(payoff: &PathPayoff, set: &UncertaintySet, n: usize, horizon: f64, cfg: &WeakDpConfig) -> Result<WeakResult> {
    let start = Instant::now();
    let spec = payoff.markov_spec();
    let grid = DpGrid::build(&spec, set, n, horizon, &cfg.grid)?;
    let step_set = set.scale(horizon / n as f64)?;
    let dt = horizon / n as f64;
    let d = payoff.dim();

    let (value, decisions, family, resolution) = if d == 1 {
        let bounds = Bounds1d::new(&step_set, cfg.bound_mode);
        let h = grid.h;
        let avg_axis = (spec.kind() == PayoffKind::Average).then(|| grid.axes[1]);
        let sweep = backward_sweep(&grid, &spec, n, horizon, cfg.store_policy, |state, next| {
            Ok(step_1d_state(&spec, state, next, &bounds, h, dt, avg_axis))
        })?;
        let decisions = sweep
            .policy
            .map(|p| p.into_iter().map(|row| row.into_iter().map(|m| m.map(Decision::Measure)).collect()).collect());
        (sweep.value, decisions, Vec::new(), h)
    } else {
        let family = candidate_family(&step_set, &cfg.family, cfg.bound_mode)?;
        let sweep = backward_sweep(&grid, &spec, n, horizon, cfg.store_policy, |state, next| {
            let mut buf = vec![0.0; state.len()];
            let (i, v) = step_nd::best_candidate(&family, |y| {
                spec.advance(state, y, dt, &mut buf);
                next.eval(&buf)
            });
            Ok((v, i as u32))
        })?;
        let decisions = sweep.policy.map(|p| {
            p.into_iter()
                .map(|row| row.into_iter().map(|c| c.map(Decision::Candidate)).collect())
                .collect()
        });
        let size = family.len() as f64;
        (sweep.value, decisions, family, size)
    };

    let record = RunRecord {
        n,
        value,
        grid_h: grid.h,
        radius: grid.radius,
        step_opt_resolution: resolution,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    let policy = decisions.map(|decisions| WeakPolicy {
        axes: grid.axes.clone(),
        spec: spec.clone(),
        family,
        decisions,
        n,
        horizon,
        step_set: step_set.clone(),
        bound_mode: cfg.bound_mode,
    });
    Ok(WeakResult {
        value,
        record,
        grid,
        policy,
    })
}

/// One-dimensional step at a Markov state. Increment candidates are the
/// multiples of `h` (knots of the path and running-max axes) plus the
/// increments at which the running integral crosses a knot of its axis.
fn step_1d_state(
    spec: &MarkovStateSpec,
    state: &[f64],
    next: &ValueGrid,
    bounds: &Bounds1d,
    h: f64,
    dt: f64,
    avg_axis: Option<Axis>,
) -> (f64, StepMeasure) {
    if bounds.sqrt_hi == 0.0 {
        let mut buf = state.to_vec();
        spec.advance(state, &[0.0], dt, &mut buf);
        return (next.eval(&buf), StepMeasure::point_mass(1));
    }
    let mut extra = Vec::new();
    if let Some(axis) = avg_axis {
        // s' = s + (2x + y) dt / 2 is affine in y.
        let (x, s) = (state[0], state[1]);
        let s_at = |y: f64| s + 0.5 * (2.0 * x + y) * dt;
        let (lo, hi) = (s_at(-bounds.sqrt_hi), s_at(bounds.sqrt_hi));
        let j0 = ((lo - axis.start) / axis.step).ceil() as i64;
        let j1 = ((hi - axis.start) / axis.step).floor() as i64;
        for j in j0..=j1 {
            let sj = axis.start + j as f64 * axis.step;
            let y = 2.0 * (sj - s) / dt - 2.0 * x;
            extra.push(y.abs());
        }
    }
    let pos = side_candidates(bounds, h, &extra);
    let mut buf = state.to_vec();
    let mut w = |y: f64| {
        spec.advance(state, &[y], dt, &mut buf);
        next.eval(&buf)
    };
    let negv: Vec<(f64, f64)> = pos.iter().map(|&y| (-y, w(-y))).collect();
    let posv: Vec<(f64, f64)> = pos.iter().map(|&y| (y, w(y))).collect();
    solve_tabulated(&negv, &posv, bounds)
}
