//! Pathwise and moment checks on an explicit discrete martingale law.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::payoffs::DiscretePath;
use crate::sampling::{block_rng, run_blocks, PathSampler};
use crate::uncertainty_set::{SymMatrix, UncertaintySet};
use crate::weak_dp::BoundMode;

/// Relative slack on pointwise and quadratic-variation bounds, covering the
/// rounding in recovering increments from cumulative path points.
const PATHWISE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    pub paths: usize,
    /// Number of random `(k, l)` pairs for the moment check.
    pub pairs: usize,
    pub seed: u64,
    /// Pointwise bounds the law is checked against.
    pub bound_mode: BoundMode,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            pairs: 10,
            seed: 0,
            bound_mode: BoundMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub pointwise_bounds: CheckOutcome,
    pub quadratic_variation: CheckOutcome,
    pub moment_membership: CheckOutcome,
    pub fourth_moment_scaling: CheckOutcome,
    pub fitted_exponent: Option<f64>,
    /// `max_L m4(L) / L^2` over the fitted lags.
    pub fitted_constant: Option<f64>,
    pub warnings: Vec<String>,
    /// First path that broke a pathwise check.
    pub offending_path: Option<Vec<Vec<f64>>>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    pub fn checks(&self) -> [&CheckOutcome; 4] {
        [
            &self.pointwise_bounds,
            &self.quadratic_variation,
            &self.moment_membership,
            &self.fourth_moment_scaling,
        ]
    }
}

#[derive(Clone)]
struct Acc {
    pointwise_bad: u64,
    qv_bad: u64,
    worst_qv: f64,
    offending: Option<Vec<Vec<f64>>>,
    /// Per pair: sums of the entries of `D D'` and of their squares.
    pair_sum: Vec<DMatrix<f64>>,
    pair_sq: Vec<DMatrix<f64>>,
    /// Per lag: sum of `|X_{k+L} - X_k|^4` and window count.
    lag_sum: Vec<f64>,
    lag_count: Vec<u64>,
    paths: u64,
}

fn empty_acc() -> Acc {
    Acc {
        pointwise_bad: 0,
        qv_bad: 0,
        worst_qv: 0.0,
        offending: None,
        pair_sum: Vec::new(),
        pair_sq: Vec::new(),
        lag_sum: Vec::new(),
        lag_count: Vec::new(),
        paths: 0,
    }
}

fn merge(a: Acc, b: Acc) -> Acc {
    if a.paths == 0 {
        return b;
    }
    if b.paths == 0 {
        return a;
    }
    Acc {
        pointwise_bad: a.pointwise_bad + b.pointwise_bad,
        qv_bad: a.qv_bad + b.qv_bad,
        worst_qv: a.worst_qv.max(b.worst_qv),
        offending: a.offending.or(b.offending),
        pair_sum: a.pair_sum.iter().zip(&b.pair_sum).map(|(x, y)| x + y).collect(),
        pair_sq: a.pair_sq.iter().zip(&b.pair_sq).map(|(x, y)| x + y).collect(),
        lag_sum: a.lag_sum.iter().zip(&b.lag_sum).map(|(x, y)| x + y).collect(),
        lag_count: a.lag_count.iter().zip(&b.lag_count).map(|(x, y)| x + y).collect(),
        paths: a.paths + b.paths,
    }
}

/// Dyadic lags `4, 8, ..., <= n/2`.
pub fn dyadic_lags(n: usize) -> Vec<usize> {
    let mut lags = Vec::new();
    let mut l = 4;
    while l <= n / 2 {
        lags.push(l);
        l *= 2;
    }
    lags
}

/// Least-squares slope and intercept of `y` on `x`.
fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Checks, on `cfg.paths` sampled paths of an `n`-step law for `D`:
/// pointwise increment bounds of the step set `(T/n) D`; the quadratic
/// variation bound `|[X]_n| <= n d^2 R_{TD/n}`; membership of the empirical
/// `E[(X_l - X_k)(X_l - X_k)']` in `(l - k)(T/n) D` within three standard
/// errors; and a fitted growth exponent in `[1.8, 2.2]` for fourth moments
/// over dyadic lags.
pub fn validate_law<S: PathSampler + ?Sized>(sampler: &S, set: &UncertaintySet, cfg: &ValidationConfig) -> Result<ValidationReport> {
    let n = sampler.n();
    let d = sampler.dim();
    let horizon = sampler.horizon();
    let step_set = set.scale(horizon / n as f64)?;
    let (r, big_r) = step_set.spectrum_bounds();
    let (lo, hi) = cfg.bound_mode.pointwise_bounds(d, r, big_r);
    let qv_bound = n as f64 * (d * d) as f64 * big_r;
    let mut warnings = Vec::new();

    let mut pair_rng = block_rng(cfg.seed, u64::MAX);
    let pairs: Vec<(usize, usize)> = (0..cfg.pairs)
        .map(|_| {
            let k = pair_rng.random_range(0..n);
            let l = pair_rng.random_range(k + 1..=n);
            (k, l)
        })
        .collect();
    if pairs.is_empty() {
        warnings.push("no (k, l) pairs requested: moment membership passes vacuously".into());
    }
    let lags = dyadic_lags(n);

    let body = |acc: &mut Acc, path: &DiscretePath| {
        if acc.paths == 0 {
            acc.pair_sum = vec![DMatrix::zeros(d, d); pairs.len()];
            acc.pair_sq = vec![DMatrix::zeros(d, d); pairs.len()];
            acc.lag_sum = vec![0.0; lags.len()];
            acc.lag_count = vec![0; lags.len()];
        }
        acc.paths += 1;
        let pts = path.points();
        let mut qv = DMatrix::<f64>::zeros(d, d);
        let mut bad = false;
        for w in pts.windows(2) {
            let y: Vec<f64> = (0..d).map(|i| w[1][i] - w[0][i]).collect();
            let sq: f64 = y.iter().map(|v| v * v).sum();
            if sq < lo * (1.0 - PATHWISE_RTOL) || sq > hi * (1.0 + PATHWISE_RTOL) {
                acc.pointwise_bad += 1;
                bad = true;
            }
            for i in 0..d {
                for j in 0..d {
                    qv[(i, j)] += y[i] * y[j];
                }
            }
        }
        let qv_norm = SymMatrix::from_matrix(qv).operator_norm();
        acc.worst_qv = acc.worst_qv.max(qv_norm);
        if qv_norm > qv_bound * (1.0 + PATHWISE_RTOL) {
            acc.qv_bad += 1;
            bad = true;
        }
        if bad && acc.offending.is_none() {
            acc.offending = Some(pts.to_vec());
        }
        for (p, &(k, l)) in pairs.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    let z = (pts[l][i] - pts[k][i]) * (pts[l][j] - pts[k][j]);
                    acc.pair_sum[p][(i, j)] += z;
                    acc.pair_sq[p][(i, j)] += z * z;
                }
            }
        }
        for (li, &lag) in lags.iter().enumerate() {
            for start in (0..=n - lag).step_by(lag) {
                let sq: f64 = (0..d).map(|i| (pts[start + lag][i] - pts[start][i]).powi(2)).sum();
                acc.lag_sum[li] += sq * sq;
                acc.lag_count[li] += 1;
            }
        }
    };
    let acc = run_blocks(sampler, cfg.paths, cfg.seed, empty_acc, body, merge)?;
    let count = acc.paths as f64;

    let pointwise_bounds = CheckOutcome {
        name: "pointwise_bounds",
        passed: acc.pointwise_bad == 0,
        detail: format!(
            "{} increments outside {lo:e} <= |y|^2 <= {hi:e} ({:?} bounds)",
            acc.pointwise_bad, cfg.bound_mode
        ),
    };
    let quadratic_variation = CheckOutcome {
        name: "quadratic_variation",
        passed: acc.qv_bad == 0,
        detail: format!(
            "{} paths above {qv_bound:e}; largest operator norm {:e}",
            acc.qv_bad, acc.worst_qv
        ),
    };

    let mut worst_ratio: f64 = 0.0;
    let mut membership_ok = true;
    for (p, &(k, l)) in pairs.iter().enumerate() {
        let mean = &acc.pair_sum[p] / count;
        let var = (&acc.pair_sq[p] / count - mean.component_mul(&mean)).map(|v| v.max(0.0));
        let stderr = (var.sum() / count).sqrt();
        let target = set.scale((l - k) as f64 * horizon / n as f64)?;
        let dist = target.distance(&SymMatrix::from_matrix(mean.clone()))?;
        let tol = 3.0 * stderr + 1e-12 * (1.0 + mean.norm());
        if dist > tol {
            membership_ok = false;
        }
        if tol > 0.0 {
            worst_ratio = worst_ratio.max(dist / tol);
        }
    }
    let moment_membership = CheckOutcome {
        name: "moment_membership",
        passed: membership_ok,
        detail: format!(
            "{} pairs; largest distance / (3 stderr) = {worst_ratio:.3}",
            pairs.len()
        ),
    };

    let (fitted_exponent, fitted_constant, fourth_moment_scaling) = if lags.len() < 2 {
        warnings.push(format!("n = {n} gives fewer than two dyadic lags: fourth-moment fit skipped"));
        (
            None,
            None,
            CheckOutcome {
                name: "fourth_moment_scaling",
                passed: true,
                detail: "skipped".into(),
            },
        )
    } else {
        let m4: Vec<f64> = acc
            .lag_sum
            .iter()
            .zip(&acc.lag_count)
            .map(|(s, c)| s / *c as f64)
            .collect();
        let x: Vec<f64> = lags.iter().map(|&l| (l as f64).ln()).collect();
        let y: Vec<f64> = m4.iter().map(|v| v.ln()).collect();
        let (slope, _) = fit_line(&x, &y);
        let c = lags
            .iter()
            .zip(&m4)
            .map(|(&l, m)| m / (l * l) as f64)
            .fold(0.0_f64, f64::max);
        (
            Some(slope),
            Some(c),
            CheckOutcome {
                name: "fourth_moment_scaling",
                passed: (1.8..=2.2).contains(&slope),
                detail: format!("exponent {slope:.4} over lags {lags:?}; C = {c:e}"),
            },
        )
    };

    Ok(ValidationReport {
        pointwise_bounds,
        quadratic_variation,
        moment_membership,
        fourth_moment_scaling,
        fitted_exponent,
        fitted_constant,
        warnings,
        offending_path: acc.offending,
    })
}
