//! Backward recursion on the payoff's Markov state, shared by the weak and
//! strong discrete-time engines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::payoffs::{MarkovStateSpec, PayoffKind};
use crate::uncertainty_set::UncertaintySet;
use crate::value_grid::{Axis, ValueGrid};

/// Spatial discretization of the dynamic programming state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Target node spacing; `None` picks `sqrt(R T) / 50` for d = 1 and
    /// `sqrt(R T) / 8` otherwise. The actual spacing divides the largest
    /// per-step atom radius.
    pub h: Option<f64>,
    /// Grid radius in multiples of `sqrt(R T)`.
    pub radius: f64,
    /// Lower bound on knots per largest atom radius.
    pub min_knots_per_atom: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            h: None,
            radius: 8.0,
            min_knots_per_atom: 2,
        }
    }
}

/// Smallest admissible radius multiple.
pub const MIN_RADIUS_MULT: f64 = 4.0;

/// Resolved grid geometry for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct DpGrid {
    pub axes: Vec<Axis>,
    /// Spacing of the path coordinates.
    pub h: f64,
    /// Radius of the path coordinates.
    pub radius: f64,
    /// Largest atom norm of one step.
    pub atom_radius: f64,
}

impl DpGrid {
    pub fn build(
        spec: &MarkovStateSpec,
        set: &UncertaintySet,
        n: usize,
        horizon: f64,
        cfg: &GridConfig,
    ) -> Result<Self> {
        let d = spec.path_dim();
        if set.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: set.dim(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if !(cfg.radius >= MIN_RADIUS_MULT) {
            let (_, big_r) = set.spectrum_bounds();
            let scale = (big_r * horizon).sqrt();
            return Err(Error::GridTooSmall {
                radius: cfg.radius * scale,
                required: MIN_RADIUS_MULT * scale,
            });
        }
        let (_, big_r) = set.spectrum_bounds();
        let scale = (big_r * horizon).sqrt();
        // Weak atoms have |y|^2 <= d * lambda_max in every admissible family.
        let atom_radius = (d as f64 * big_r * horizon / n as f64).sqrt();
        let h_target = cfg.h.unwrap_or_else(|| {
            let s = if scale > 0.0 { scale } else { 1.0 };
            if d == 1 {
                s / 50.0
            } else {
                s / 8.0
            }
        });
        if !(h_target > 0.0) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        let h = if atom_radius > 0.0 {
            let mut m = ((atom_radius / h_target).ceil() as usize).max(cfg.min_knots_per_atom.max(1));
            if d == 1 && m % 2 == 1 {
                m += 1;
            }
            atom_radius / m as f64
        } else {
            h_target
        };
        let radius = (cfg.radius * scale).max(h);
        let half = (radius / h).ceil() as usize;
        let x_axis = Axis::symmetric(h, half);
        let mut axes = vec![x_axis; d];
        match spec.kind() {
            PayoffKind::Terminal => {}
            PayoffKind::Lookback => axes.push(Axis {
                start: 0.0,
                step: h,
                len: half + 1,
            }),
            PayoffKind::Average => axes.push(Axis::symmetric(h * horizon, half)),
        }
        Ok(Self {
            axes,
            h,
            radius: half as f64 * h,
            atom_radius,
        })
    }

    /// Whether `state` can be visited at step `k` (with a two-cell margin).
    /// The running-integral bound is off-lattice, so its margin grows by one
    /// cell per step; that keeps every interpolation corner of a successor
    /// inside the reachable set.
    fn reachable(&self, spec: &MarkovStateSpec, k: usize, dt: f64, state: &[f64]) -> bool {
        let d = spec.path_dim();
        // Half a cell of slack absorbs rounding of lattice nodes at the edge.
        let reach = k as f64 * self.atom_radius + 2.5 * self.h;
        if state[..d].iter().any(|x| x.abs() > reach) {
            return false;
        }
        match spec.kind() {
            PayoffKind::Terminal => true,
            PayoffKind::Lookback => state[d] <= reach,
            PayoffKind::Average => state[d].abs() <= reach * k as f64 * dt + (k + 2) as f64 * self.axes[d].step,
        }
    }
}

/// Output of a backward sweep.
pub(crate) struct Sweep<P> {
    pub value: f64,
    /// `policy[k][node]` for steps `k = 0..n`, when requested.
    pub policy: Option<Vec<Vec<Option<P>>>>,
}

/// Runs `n` backward steps. `step(state, next)` returns the value at `state`
/// and the decision taken there.
pub(crate) fn backward_sweep<P, F>(
    grid: &DpGrid,
    spec: &MarkovStateSpec,
    n: usize,
    horizon: f64,
    keep_policy: bool,
    step: F,
) -> Result<Sweep<P>>
where
    P: Send,
    F: Fn(&[f64], &ValueGrid) -> Result<(f64, P)> + Sync,
{
    let dt = horizon / n as f64;
    let mut next = ValueGrid::from_fn(grid.axes.clone(), |s| spec.terminal_value(s, horizon));
    let state_dim = grid.axes.len();
    let geometry = next.clone_geometry();
    let mut policy: Vec<Vec<Option<P>>> = Vec::new();

    for k in (0..n).rev() {
        let results: Vec<Result<Option<(f64, P)>>> = (0..next.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; state_dim],
                |buf, idx| {
                    geometry.node_state(idx, buf);
                    if !grid.reachable(spec, k, dt, buf) {
                        return Ok(None);
                    }
                    step(buf, &next).map(Some)
                },
            )
            .collect();
        let mut current = ValueGrid::new(grid.axes.clone());
        let mut decisions = Vec::with_capacity(if keep_policy { results.len() } else { 0 });
        for (slot, r) in current.values_mut().iter_mut().zip(results) {
            match r? {
                Some((v, p)) => {
                    if v.is_nan() {
                        return Err(Error::InvalidArgument(format!(
                            "step {k} produced NaN at a reachable node; the grid is too small for this payoff"
                        )));
                    }
                    *slot = v;
                    if keep_policy {
                        decisions.push(Some(p));
                    }
                }
                None => {
                    *slot = f64::NAN;
                    if keep_policy {
                        decisions.push(None);
                    }
                }
            }
        }
        if keep_policy {
            policy.push(decisions);
        }
        next = current;
    }
    policy.reverse();
    let value = next.eval(&spec.initial_state());
    if !value.is_finite() {
        return Err(Error::InvalidArgument(
            "backward recursion produced a non-finite value at the origin".into(),
        ));
    }
    Ok(Sweep {
        value,
        policy: keep_policy.then_some(policy),
    })
}
