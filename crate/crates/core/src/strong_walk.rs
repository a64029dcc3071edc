//! Controlled random-walk integrals.
//!
//! A walk `Z` with i.i.d. increments `xi_k` uniform on the `d + 1` points
//! `sqrt(d+1) v_l` has `E[xi] = 0` and `E[xi xi'] = I`. The discrete integral
//! `M_k = sum_l f(l-1, Z) sqrt(T/n) xi_l` with `f` valued in `sqrt(D)` then
//! has conditional increment covariance `(T/n) f^2` in `(T/n) D`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dp::{backward_sweep, DpGrid, GridConfig};
use crate::error::{Error, Result};
use crate::payoffs::{DiscretePath, MarkovStateSpec, PathPayoff};
use crate::sampling::{run_blocks, McStats, PathSampler};
use crate::uncertainty_set::{matrix_sqrt, SymMatrix, UncertaintySet};
use crate::value_grid::{Axis, ValueGrid};
use crate::weak_dp::{RunRecord, StepMeasure};

/// Columns `v_1, ..., v_{d+1}` of an orthogonal `(d+1) x (d+1)` matrix with
/// constant last row, after deleting that row.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkBasis {
    vectors: Vec<Vec<f64>>,
}

impl WalkBasis {
    /// Gram-Schmidt on `(1, ..., 1), e_1, e_2, ...`; the normalized all-ones
    /// vector becomes the last row. Deterministic.
    pub fn new(d: usize) -> Self {
        let m = d + 1;
        let ones = vec![1.0 / (m as f64).sqrt(); m];
        let mut rows: Vec<Vec<f64>> = vec![ones.clone()];
        for i in 0..m {
            if rows.len() == m {
                break;
            }
            let mut v = vec![0.0; m];
            v[i] = 1.0;
            for q in &rows {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vj, qj) in v.iter_mut().zip(q) {
                    *vj -= dot * qj;
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-8 {
                rows.push(v.into_iter().map(|a| a / norm).collect());
            }
        }
        // Move the all-ones row last and drop it.
        rows.remove(0);
        let vectors = (0..m).map(|l| rows.iter().map(|row| row[l]).collect()).collect();
        Self { vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len() - 1
    }

    /// The `d + 1` vectors `v_l`.
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// `sqrt(d + 1)`.
    pub fn scale(&self) -> f64 {
        (self.vectors.len() as f64).sqrt()
    }

    /// Walk increment `xi = sqrt(d+1) v_l`.
    pub fn xi(&self, l: usize) -> Vec<f64> {
        let s = self.scale();
        self.vectors[l].iter().map(|v| v * s).collect()
    }
}

pub fn build_basis(d: usize) -> Result<WalkBasis> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(WalkBasis::new(d))
}

/// Finite control set in `sqrt(D)`: square roots of the vertices and of
/// dyadic combinations of vertex pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaGrid {
    candidates: Vec<SymMatrix>,
    refinement: u32,
}

impl SigmaGrid {
    pub fn new(set: &UncertaintySet, refinement: u32) -> Result<Self> {
        let candidates = set
            .gamma_candidates(refinement)
            .iter()
            .map(matrix_sqrt)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { candidates, refinement })
    }

    pub fn candidates(&self) -> &[SymMatrix] {
        &self.candidates
    }

    pub fn refinement(&self) -> u32 {
        self.refinement
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Step law of `sqrt(dt) S xi`: mass `1/(d+1)` on each `sqrt(dt) S xi_l`.
pub fn step_law(basis: &WalkBasis, s: &SymMatrix, dt: f64) -> StepMeasure {
    let w = 1.0 / (basis.dim() + 1) as f64;
    let c = dt.sqrt();
    let atoms = (0..=basis.dim())
        .map(|l| (s.apply(&basis.xi(l)).iter().map(|v| v * c).collect(), w))
        .collect();
    StepMeasure::new(atoms)
}

/// Integrand selection rule.
#[derive(Debug, Clone)]
pub enum Policy {
    /// The same `S` at every step.
    Constant(SymMatrix),
    /// Candidate index per (step, node) of a dynamic programming grid.
    Tabulated(TabulatedPolicy),
}

#[derive(Debug, Clone)]
pub struct TabulatedPolicy {
    axes: Vec<Axis>,
    spec: MarkovStateSpec,
    sigma: SigmaGrid,
    /// `choice[k][node]`; unreachable nodes carry candidate 0, so the map is
    /// total.
    choice: Vec<Vec<u32>>,
}

impl TabulatedPolicy {
    pub fn sigma_grid(&self) -> &SigmaGrid {
        &self.sigma
    }

    /// Chosen candidate index at step `k`, nearest node to `state`.
    pub fn choice_at(&self, k: usize, state: &[f64], locator: &ValueGrid) -> usize {
        self.choice[k][locator.nearest_index(state)] as usize
    }
}

#[derive(Debug, Clone)]
pub struct StrongConfig {
    pub grid: GridConfig,
    pub refinement: u32,
    pub store_policy: bool,
}

impl Default for StrongConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            refinement: 1,
            store_policy: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrongResult {
    pub value: f64,
    pub record: RunRecord,
    pub grid: DpGrid,
    pub policy: Option<Policy>,
}

/// `max_S (d+1)^{-1} sum_l V(update(s, sqrt(T/n) S xi_l))`, iterated `n` times
/// from the terminal payoff.
pub fn strong_dp_value(
    payoff: &PathPayoff,
    set: &UncertaintySet,
    n: usize,
    horizon: f64,
    cfg: &StrongConfig,
) -> Result<StrongResult> {
    let start = Instant::now();
    let d = payoff.dim();
    if d + 1 > 4 {
        return Err(Error::Unsupported(format!("strong dynamic programming needs d <= 3, got {d}")));
    }
    let spec = payoff.markov_spec();
    let grid = DpGrid::build(&spec, set, n, horizon, &cfg.grid)?;
    let dt = horizon / n as f64;
    let basis = WalkBasis::new(d);
    let sigma = SigmaGrid::new(set, cfg.refinement)?;
    let laws: Vec<StepMeasure> = sigma.candidates().iter().map(|s| step_law(&basis, s, dt)).collect();

    let sweep = backward_sweep(&grid, &spec, n, horizon, cfg.store_policy, |state, next| {
        let mut buf = vec![0.0; state.len()];
        let mut best = (0u32, f64::NEG_INFINITY);
        for (i, law) in laws.iter().enumerate() {
            let v: f64 = law
                .atoms()
                .iter()
                .map(|a| {
                    spec.advance(state, &a.point, dt, &mut buf);
                    a.weight * next.eval(&buf)
                })
                .sum();
            if v > best.1 {
                best = (i as u32, v);
            }
        }
        Ok((best.1, best.0))
    })?;
    let policy = sweep.policy.map(|p| {
        Policy::Tabulated(TabulatedPolicy {
            axes: grid.axes.clone(),
            spec: spec.clone(),
            sigma: sigma.clone(),
            choice: p
                .into_iter()
                .map(|row| row.into_iter().map(|c| c.unwrap_or(0)).collect())
                .collect(),
        })
    });
    let record = RunRecord {
        n,
        value: sweep.value,
        grid_h: grid.h,
        radius: grid.radius,
        step_opt_resolution: sigma.len() as f64,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(StrongResult {
        value: sweep.value,
        record,
        grid,
        policy,
    })
}

/// The law of `M^f` under a policy, as a path sampler.
#[derive(Debug, Clone)]
pub struct StrongLaw {
    basis: WalkBasis,
    policy: Policy,
    n: usize,
    horizon: f64,
    locator: Option<ValueGrid>,
}

impl StrongLaw {
    pub fn new(policy: Policy, n: usize, horizon: f64) -> Result<Self> {
        let d = match &policy {
            Policy::Constant(s) => s.dim(),
            Policy::Tabulated(t) => {
                if t.choice.len() != n {
                    return Err(Error::InvalidArgument(format!(
                        "policy has {} steps, expected {n}",
                        t.choice.len()
                    )));
                }
                t.spec.path_dim()
            }
        };
        if n == 0 || !(horizon > 0.0) {
            return Err(Error::InvalidArgument("need n > 0 and a positive horizon".into()));
        }
        let locator = match &policy {
            Policy::Tabulated(t) => Some(ValueGrid::new(t.axes.clone())),
            Policy::Constant(_) => None,
        };
        Ok(Self {
            basis: WalkBasis::new(d),
            policy,
            n,
            horizon,
            locator,
        })
    }

    pub fn basis(&self) -> &WalkBasis {
        &self.basis
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }
}

impl PathSampler for StrongLaw {
    fn n(&self) -> usize {
        self.n
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn sample_path(&self, rng: &mut ChaCha8Rng) -> DiscretePath {
        let d = self.basis.dim();
        let dt = self.horizon / self.n as f64;
        let c = dt.sqrt();
        let xis: Vec<Vec<f64>> = (0..=d).map(|l| self.basis.xi(l)).collect();
        let mut points = Vec::with_capacity(self.n + 1);
        points.push(vec![0.0; d]);
        match &self.policy {
            Policy::Constant(s) => {
                let steps: Vec<Vec<f64>> = xis.iter().map(|xi| s.apply(xi).iter().map(|v| v * c).collect()).collect();
                for k in 0..self.n {
                    let y = &steps[rng.random_range(0..=d)];
                    let x = points[k].iter().zip(y).map(|(a, b)| a + b).collect();
                    points.push(x);
                }
            }
            Policy::Tabulated(t) => {
                let locator = self.locator.as_ref().expect("tabulated policies carry a locator");
                let laws: Vec<StepMeasure> = t
                    .sigma
                    .candidates()
                    .iter()
                    .map(|s| step_law(&self.basis, s, dt))
                    .collect();
                let mut state = t.spec.initial_state();
                let mut next = state.clone();
                for k in 0..self.n {
                    let law = &laws[t.choice_at(k, &state, locator)];
                    let y = &law.atoms()[rng.random_range(0..=d)].point;
                    let x = points[k].iter().zip(y).map(|(a, b)| a + b).collect();
                    t.spec.advance(&state, y, dt, &mut next);
                    std::mem::swap(&mut state, &mut next);
                    points.push(x);
                }
            }
        }
        DiscretePath::new(self.horizon, points).expect("paths start at the origin")
    }
}

/// Monte Carlo output of [`simulate_policy`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationStats {
    pub payoff: McStats,
    /// Average increment per coordinate over all steps and paths.
    pub increment_mean: Vec<f64>,
    /// Average of `y y' / dt` over all steps and paths; lies in `D` for any
    /// policy valued in `sqrt(D)`.
    pub increment_moment: SymMatrix,
}

#[derive(Clone)]
struct SimAcc {
    payoff: McStats,
    sum: Vec<f64>,
    outer: DMatrix<f64>,
    steps: u64,
}

fn sim_acc_init() -> SimAcc {
    SimAcc {
        payoff: McStats::default(),
        sum: Vec::new(),
        outer: DMatrix::zeros(0, 0),
        steps: 0,
    }
}

/// Simulates `paths` paths of the controlled integral and evaluates the payoff
/// on their interpolations. Bit-identical for a fixed seed.
pub fn simulate_policy(law: &StrongLaw, payoff: &PathPayoff, paths: usize, seed: u64) -> Result<SimulationStats> {
    let d = law.dim();
    if payoff.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: payoff.dim(),
        });
    }
    let acc = run_blocks(
        law,
        paths,
        seed,
        sim_acc_init,
        |acc, path| {
            if acc.sum.is_empty() {
                acc.sum = vec![0.0; d];
                acc.outer = DMatrix::zeros(d, d);
            }
            acc.payoff.push(payoff.evaluate_on_discrete(path).unwrap_or(f64::NAN));
            for w in path.points().windows(2) {
                let y = DVector::from_iterator(d, w[1].iter().zip(&w[0]).map(|(a, b)| a - b));
                for (s, yi) in acc.sum.iter_mut().zip(y.iter()) {
                    *s += yi;
                }
                acc.outer += &y * y.transpose();
                acc.steps += 1;
            }
        },
        |a, b| {
            if a.sum.is_empty() {
                return b;
            }
            if b.sum.is_empty() {
                return a;
            }
            SimAcc {
                payoff: a.payoff.merge(&b.payoff),
                sum: a.sum.iter().zip(&b.sum).map(|(x, y)| x + y).collect(),
                outer: a.outer + b.outer,
                steps: a.steps + b.steps,
            }
        },
    )?;
    let dt = law.horizon() / law.n() as f64;
    let steps = acc.steps as f64;
    Ok(SimulationStats {
        payoff: acc.payoff,
        increment_mean: acc.sum.iter().map(|s| s / steps).collect(),
        increment_moment: SymMatrix::from_matrix(acc.outer / (steps * dt)),
    })
}

/// Statistics of a payoff evaluated on the piecewise-linear interpolation of
/// the controlled walk. Lookback and average payoffs are exact functionals of
/// the interpolated path.
pub fn interpolated_law_pushforward(law: &StrongLaw, payoff: &PathPayoff, paths: usize, seed: u64) -> Result<McStats> {
    Ok(simulate_policy(law, payoff, paths, seed)?.payoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::{PayoffFn, PayoffKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn basis_d1() {
        let b = build_basis(1).unwrap();
        assert_abs_diff_eq!(b.vectors()[0][0], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(b.vectors()[1][0], -1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(b.xi(0)[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.xi(1)[0], -1.0, epsilon = 1e-15);
        assert!(build_basis(0).is_err());
    }

    #[test]
    fn basis_invariants() {
        for d in 1..=3 {
            let b = WalkBasis::new(d);
            let mut outer = DMatrix::<f64>::zeros(d, d);
            let mut sum = vec![0.0; d];
            for v in b.vectors() {
                for i in 0..d {
                    sum[i] += v[i];
                    for j in 0..d {
                        outer[(i, j)] += v[i] * v[j];
                    }
                }
            }
            assert!((outer - DMatrix::identity(d, d)).norm() < 1e-12);
            assert!(sum.iter().all(|s| s.abs() < 1e-12));
            for l in 0..=d {
                let sq: f64 = b.xi(l).iter().map(|x| x * x).sum();
                assert_abs_diff_eq!(sq, d as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn step_law_moment_identity() {
        let s = matrix_sqrt(&SymMatrix::from_row_major(2, &[2.0, 0.5, 0.5, 1.0]).unwrap()).unwrap();
        let law = step_law(&WalkBasis::new(2), &s, 1.0);
        assert!(law.second_moment().sub(&s.square()).frobenius_norm() < 1e-12);
        assert!(law.mean().iter().all(|m| m.abs() < 1e-15));
    }

    #[test]
    fn sigma_grid_in_root_set() {
        let set = UncertaintySet::hull(vec![SymMatrix::diag(&[1.0, 2.0]), SymMatrix::diag(&[3.0, 1.0])]).unwrap();
        let g = SigmaGrid::new(&set, 2).unwrap();
        for s in g.candidates() {
            assert!(set.contains(&s.square(), 1e-8).unwrap());
        }
    }

    #[test]
    fn square_is_exact() {
        let set = UncertaintySet::interval(1.0, 4.0).unwrap();
        let p = PathPayoff::terminal(1, PayoffFn::Square);
        for n in [1, 8, 32] {
            let v = strong_dp_value(&p, &set, n, 1.0, &StrongConfig::default()).unwrap().value;
            assert_abs_diff_eq!(v, 4.0, epsilon = 1e-9);
        }
        let p = PathPayoff::terminal(1, PayoffFn::Identity);
        let v = strong_dp_value(&p, &set, 8, 1.0, &StrongConfig::default()).unwrap().value;
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn constant_policy_square() {
        let sigma = 1.5;
        let law = StrongLaw::new(Policy::Constant(SymMatrix::scalar(sigma)), 16, 1.0).unwrap();
        let p = PathPayoff::terminal(1, PayoffFn::Square);
        let stats = simulate_policy(&law, &p, 20_000, 11).unwrap();
        // +-1 increments make X_T^2 = sigma^2 T exactly in mean.
        assert!((stats.payoff.mean - sigma * sigma).abs() <= 3.0 * stats.payoff.std_error());
        assert_abs_diff_eq!(stats.increment_moment.get(0, 0), sigma * sigma, epsilon = 1e-9);
        let again = simulate_policy(&law, &p, 20_000, 11).unwrap();
        assert_eq!(stats, again);
        assert!(simulate_policy(&law, &p, 0, 11).is_err());
    }

    #[test]
    fn one_step_lookback() {
        let law = StrongLaw::new(Policy::Constant(SymMatrix::scalar(1.0)), 1, 1.0).unwrap();
        let p = PathPayoff::new(1, PayoffKind::Lookback, PayoffFn::Identity);
        let stats = interpolated_law_pushforward(&law, &p, 4000, 3).unwrap();
        // max(0, xi) with xi = +-1 equally likely.
        assert!((stats.mean - 0.5).abs() < 3.0 * stats.std_error() + 1e-12);
    }

    #[test]
    fn optimal_policy_reproduces_value() {
        let set = UncertaintySet::interval(1.0, 4.0).unwrap();
        let p = PathPayoff::terminal(1, PayoffFn::Call { strike: 0.0 });
        let cfg = StrongConfig {
            store_policy: true,
            ..Default::default()
        };
        let res = strong_dp_value(&p, &set, 8, 1.0, &cfg).unwrap();
        let law = StrongLaw::new(res.policy.unwrap(), 8, 1.0).unwrap();
        let stats = simulate_policy(&law, &p, 40_000, 5).unwrap();
        assert!((stats.payoff.mean - res.value).abs() <= 3.0 * stats.payoff.std_error());
    }
}
