//! Path payoffs, the linear interpolation of discrete paths, and the finite
//! Markov state each supported payoff needs for dynamic programming.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A discrete path `x_0 = 0, x_1, ..., x_n` in `R^d` on the horizon `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    horizon: f64,
    points: Vec<Vec<f64>>,
}

impl DiscretePath {
    pub fn new(horizon: f64, points: Vec<Vec<f64>>) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if points.len() < 2 {
            return Err(Error::InvalidArgument("a path needs at least one step".into()));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidArgument("path dimension must be positive".into()));
        }
        if points[0].iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument("paths must start at the origin".into()));
        }
        if let Some(bad) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        Ok(Self { horizon, points })
    }

    /// Scalar path from the values `x_1, ..., x_n` (the origin is prepended).
    pub fn from_scalar_increments_sum(horizon: f64, values: &[f64]) -> Result<Self> {
        let mut pts = Vec::with_capacity(values.len() + 1);
        pts.push(vec![0.0]);
        pts.extend(values.iter().map(|&v| vec![v]));
        Self::new(horizon, pts)
    }

    pub fn n(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k]
    }

    /// `sup_t |x_t|` of the interpolated path; attained at a knot.
    pub fn sup_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Value of the piecewise-linear interpolation at time `t`.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let n = self.n();
        if t == self.horizon {
            return Ok(self.points[n].clone());
        }
        let mut s = n as f64 * t / self.horizon;
        let nearest = s.round();
        if (s - nearest).abs() <= 4.0 * f64::EPSILON * (n as f64).max(1.0) {
            s = nearest;
        }
        let k = (s.floor() as usize).min(n);
        if k == n {
            return Ok(self.points[n].clone());
        }
        let frac = s - k as f64;
        if frac == 0.0 {
            return Ok(self.points[k].clone());
        }
        let (a, b) = (&self.points[k], &self.points[k + 1]);
        Ok(a.iter()
            .zip(b)
            .map(|(&xa, &xb)| (1.0 - frac) * xa + frac * xb)
            .collect())
    }
}

/// Built-in payoff functions.
///
/// On vectors: `Square = |x|^2`, `Abs = |x|`, and the remaining functions act
/// on the first coordinate. Lookback and average payoffs apply the function to
/// their scalar statistic.
#[derive(Debug, Clone, PartialEq)]
pub enum PayoffFn {
    Square,
    NegSquare,
    Abs,
    Identity,
    Call { strike: f64 },
    Put { strike: f64 },
    Constant(f64),
    /// `sum w_i f_i`.
    Combination(Vec<(f64, PayoffFn)>),
}

impl PayoffFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PayoffFn::Square => x.iter().map(|v| v * v).sum(),
            PayoffFn::NegSquare => -x.iter().map(|v| v * v).sum::<f64>(),
            PayoffFn::Abs => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            PayoffFn::Identity => x[0],
            PayoffFn::Call { strike } => (x[0] - strike).max(0.0),
            PayoffFn::Put { strike } => (strike - x[0]).max(0.0),
            PayoffFn::Constant(c) => *c,
            PayoffFn::Combination(parts) => parts.iter().map(|(w, f)| w * f.eval(x)).sum(),
        }
    }

    pub fn eval_scalar(&self, x: f64) -> f64 {
        self.eval(std::slice::from_ref(&x))
    }

    /// A growth bound `|f(x)| <= c (1 + |x|)^p` valid for this function.
    pub fn default_growth(&self) -> GrowthBound {
        match self {
            PayoffFn::Square | PayoffFn::NegSquare => GrowthBound { c: 1.0, p: 2.0 },
            PayoffFn::Abs | PayoffFn::Identity => GrowthBound { c: 1.0, p: 1.0 },
            PayoffFn::Call { strike } | PayoffFn::Put { strike } => GrowthBound {
                c: strike.abs().max(1.0),
                p: 1.0,
            },
            PayoffFn::Constant(v) => GrowthBound {
                c: v.abs().max(f64::MIN_POSITIVE),
                p: 1.0,
            },
            PayoffFn::Combination(parts) => {
                let mut c = 0.0;
                let mut p = f64::MIN_POSITIVE;
                for (w, f) in parts {
                    let g = f.default_growth();
                    c += w.abs() * g.c;
                    p = f64::max(p, g.p);
                }
                GrowthBound {
                    c: c.max(f64::MIN_POSITIVE),
                    p,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    /// `f(x_T)`.
    Terminal,
    /// `f(max_t x_t^1)`.
    Lookback,
    /// `f(T^{-1} int_0^T x_t^1 dt)`.
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBound {
    pub c: f64,
    pub p: f64,
}

impl GrowthBound {
    pub fn bound(&self, sup_norm: f64) -> f64 {
        self.c * (1.0 + sup_norm).powf(self.p)
    }
}

/// A recorded breach of the declared growth bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthViolation {
    pub value: f64,
    pub bound: f64,
    pub sup_norm: f64,
}

/// A payoff on continuous paths with a declared growth bound.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPayoff {
    dim: usize,
    kind: PayoffKind,
    function: PayoffFn,
    growth: GrowthBound,
}

impl PathPayoff {
    pub fn new(dim: usize, kind: PayoffKind, function: PayoffFn) -> Self {
        let growth = function.default_growth();
        Self {
            dim,
            kind,
            function,
            growth,
        }
    }

    pub fn with_growth(mut self, growth: GrowthBound) -> Result<Self> {
        if !(growth.c > 0.0 && growth.p > 0.0) {
            return Err(Error::InvalidArgument("growth constants must be positive".into()));
        }
        self.growth = growth;
        Ok(self)
    }

    pub fn terminal(dim: usize, function: PayoffFn) -> Self {
        Self::new(dim, PayoffKind::Terminal, function)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> PayoffKind {
        self.kind
    }

    pub fn function(&self) -> &PayoffFn {
        &self.function
    }

    pub fn growth(&self) -> GrowthBound {
        self.growth
    }

    /// `xi(x_hat)` together with a growth-bound check.
    pub fn evaluate_checked(&self, path: &DiscretePath) -> Result<(f64, Option<GrowthViolation>)> {
        if path.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: path.dim(),
            });
        }
        let pts = path.points();
        let value = match self.kind {
            PayoffKind::Terminal => self.function.eval(&pts[path.n()]),
            PayoffKind::Lookback => {
                // Linear segments attain their extremes at knots.
                let m = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
                self.function.eval_scalar(m)
            }
            PayoffKind::Average => {
                let dt = path.horizon() / path.n() as f64;
                let mut integral = 0.0;
                for w in pts.windows(2) {
                    integral += 0.5 * (w[0][0] + w[1][0]) * dt;
                }
                self.function.eval_scalar(integral / path.horizon())
            }
        };
        let sup = path.sup_norm();
        let bound = self.growth.bound(sup);
        let violation = (value.abs() > bound).then_some(GrowthViolation {
            value,
            bound,
            sup_norm: sup,
        });
        Ok((value, violation))
    }

    /// `xi(x_hat)` for the interpolated path. Growth violations are logged,
    /// not raised.
    pub fn evaluate_on_discrete(&self, path: &DiscretePath) -> Result<f64> {
        let (value, violation) = self.evaluate_checked(path)?;
        if let Some(v) = violation {
            log::warn!(
                "payoff value {} exceeds growth bound {} (sup norm {})",
                v.value,
                v.bound,
                v.sup_norm
            );
        }
        Ok(value)
    }

    pub fn markov_spec(&self) -> MarkovStateSpec {
        MarkovStateSpec {
            kind: self.kind,
            dim: self.dim,
            function: self.function.clone(),
        }
    }

    pub fn from_config(cfg: &PayoffConfig, dim: usize) -> Result<Self> {
        let strike = || {
            cfg.strike
                .ok_or_else(|| Error::Config(format!("function `{:?}` needs `strike`", cfg.function)))
        };
        let function = match cfg.function {
            FunctionName::Square => PayoffFn::Square,
            FunctionName::NegSquare => PayoffFn::NegSquare,
            FunctionName::Abs => PayoffFn::Abs,
            FunctionName::Identity => PayoffFn::Identity,
            FunctionName::Call => PayoffFn::Call { strike: strike()? },
            FunctionName::Put => PayoffFn::Put { strike: strike()? },
            FunctionName::Constant => PayoffFn::Constant(
                cfg.value
                    .ok_or_else(|| Error::Config("function `constant` needs `value`".into()))?,
            ),
        };
        let payoff = Self::new(dim, cfg.kind, function);
        match cfg.growth {
            Some(g) => payoff.with_growth(g).map_err(|e| Error::Config(e.to_string())),
            None => Ok(payoff),
        }
    }
}

/// Finite-dimensional state that makes a payoff computable by backward
/// recursion.
///
/// Terminal: the current point. Lookback: the current point and the running
/// maximum of the first coordinate. Average: the current point and the running
/// trapezoid integral of the first coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovStateSpec {
    kind: PayoffKind,
    dim: usize,
    function: PayoffFn,
}

impl MarkovStateSpec {
    pub fn kind(&self) -> PayoffKind {
        self.kind
    }

    pub fn path_dim(&self) -> usize {
        self.dim
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            PayoffKind::Terminal => self.dim,
            PayoffKind::Lookback | PayoffKind::Average => self.dim + 1,
        }
    }

    pub fn update_rule(&self) -> &'static str {
        match self.kind {
            PayoffKind::Terminal => "x' = x + y",
            PayoffKind::Lookback => "x' = x + y, m' = max(m, x'_1)",
            PayoffKind::Average => "x' = x + y, s' = s + (x_1 + x'_1) dt / 2",
        }
    }

    pub fn terminal_rule(&self) -> &'static str {
        match self.kind {
            PayoffKind::Terminal => "f(x)",
            PayoffKind::Lookback => "f(m)",
            PayoffKind::Average => "f(s / T)",
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.state_dim()]
    }

    /// Writes the successor of `state` under increment `y` into `out`.
    #[inline]
    pub fn advance(&self, state: &[f64], y: &[f64], dt: f64, out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            out[i] = state[i] + y[i];
        }
        match self.kind {
            PayoffKind::Terminal => {}
            PayoffKind::Lookback => out[d] = state[d].max(out[0]),
            PayoffKind::Average => out[d] = state[d] + 0.5 * (state[0] + out[0]) * dt,
        }
    }

    #[inline]
    pub fn terminal_value(&self, state: &[f64], horizon: f64) -> f64 {
        match self.kind {
            PayoffKind::Terminal => self.function.eval(&state[..self.dim]),
            PayoffKind::Lookback => self.function.eval_scalar(state[self.dim]),
            PayoffKind::Average => self.function.eval_scalar(state[self.dim] / horizon),
        }
    }

    /// Runs the state recursion along a path and applies the terminal rule.
    pub fn run(&self, path: &DiscretePath) -> f64 {
        let dt = path.horizon() / path.n() as f64;
        let mut state = self.initial_state();
        let mut next = state.clone();
        for w in path.points().windows(2) {
            let y: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
            // Keep the point coordinates bit-identical to the path.
            self.advance(&state, &y, dt, &mut next);
            next[..self.dim].copy_from_slice(&w[1]);
            if self.kind == PayoffKind::Lookback {
                next[self.dim] = state[self.dim].max(w[1][0]);
            } else if self.kind == PayoffKind::Average {
                next[self.dim] = state[self.dim] + 0.5 * (w[0][0] + w[1][0]) * dt;
            }
            std::mem::swap(&mut state, &mut next);
        }
        self.terminal_value(&state, path.horizon())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionName {
    Square,
    Call,
    Put,
    Identity,
    NegSquare,
    Abs,
    Constant,
}

/// Structured-text payoff description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffConfig {
    pub kind: PayoffKind,
    pub function: FunctionName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthBound>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(values: &[f64]) -> DiscretePath {
        DiscretePath::from_scalar_increments_sum(1.0, values).unwrap()
    }

    #[test]
    fn interpolate_examples() {
        let p = path(&[1.0, 3.0]);
        assert_eq!(p.interpolate(0.25).unwrap(), vec![0.5]);
        assert_eq!(p.interpolate(0.0).unwrap(), vec![0.0]);
        assert_eq!(p.interpolate(1.0).unwrap(), vec![3.0]);
        assert_eq!(p.interpolate(0.75).unwrap(), vec![2.0]);
        assert!(matches!(p.interpolate(1.5), Err(Error::TimeOutOfRange { .. })));
        assert!(p.interpolate(-0.1).is_err());
    }

    #[test]
    fn rejects_paths_off_origin() {
        assert!(DiscretePath::new(1.0, vec![vec![1.0], vec![2.0]]).is_err());
        assert!(DiscretePath::new(1.0, vec![vec![0.0]]).is_err());
        assert!(DiscretePath::new(0.0, vec![vec![0.0], vec![1.0]]).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let sq = PathPayoff::terminal(1, PayoffFn::Square);
        assert_eq!(sq.evaluate_on_discrete(&path(&[1.0, 3.0])).unwrap(), 9.0);
        let lb = PathPayoff::new(1, PayoffKind::Lookback, PayoffFn::Identity);
        assert_eq!(lb.evaluate_on_discrete(&path(&[2.0, 1.0])).unwrap(), 2.0);
        let avg = PathPayoff::new(1, PayoffKind::Average, PayoffFn::Identity);
        assert_eq!(avg.evaluate_on_discrete(&path(&[1.0, 3.0])).unwrap(), 1.25);
        let wrong_dim = PathPayoff::terminal(2, PayoffFn::Square);
        assert!(wrong_dim.evaluate_on_discrete(&path(&[1.0])).is_err());
    }

    #[test]
    fn growth_violation_is_reported_not_raised() {
        let p = PathPayoff::terminal(1, PayoffFn::Square)
            .with_growth(GrowthBound { c: 0.1, p: 1.0 })
            .unwrap();
        let (v, viol) = p.evaluate_checked(&path(&[10.0])).unwrap();
        assert_eq!(v, 100.0);
        assert!(viol.is_some());
        assert_eq!(p.evaluate_on_discrete(&path(&[10.0])).unwrap(), 100.0);
    }

    #[test]
    fn markov_state_dims() {
        assert_eq!(PathPayoff::terminal(1, PayoffFn::Square).markov_spec().state_dim(), 1);
        assert_eq!(PathPayoff::terminal(3, PayoffFn::Square).markov_spec().state_dim(), 3);
        assert_eq!(
            PathPayoff::new(1, PayoffKind::Lookback, PayoffFn::Identity).markov_spec().state_dim(),
            2
        );
        assert_eq!(
            PathPayoff::new(1, PayoffKind::Average, PayoffFn::Identity).markov_spec().state_dim(),
            2
        );
    }

    #[test]
    fn config_parsing() {
        let cfg: PayoffConfig =
            toml::from_str("kind = \"terminal\"\nfunction = \"call\"\nstrike = 0.5\ngrowth = { c = 2.0, p = 1.0 }\n")
                .unwrap();
        let p = PathPayoff::from_config(&cfg, 1).unwrap();
        assert_eq!(p.function(), &PayoffFn::Call { strike: 0.5 });
        assert_eq!(p.growth(), GrowthBound { c: 2.0, p: 1.0 });
        let missing: PayoffConfig = toml::from_str("kind = \"terminal\"\nfunction = \"put\"\n").unwrap();
        assert!(matches!(PathPayoff::from_config(&missing, 1), Err(Error::Config(_))));
        assert!(toml::from_str::<PayoffConfig>("kind = \"terminal\"\nfunction = \"exp\"\n").is_err());
    }

    fn all_payoffs(d: usize) -> Vec<PathPayoff> {
        let fns = [
            PayoffFn::Square,
            PayoffFn::NegSquare,
            PayoffFn::Abs,
            PayoffFn::Identity,
            PayoffFn::Call { strike: 0.3 },
            PayoffFn::Put { strike: -0.2 },
        ];
        let mut out = Vec::new();
        for f in fns {
            for kind in [PayoffKind::Terminal, PayoffKind::Lookback, PayoffKind::Average] {
                out.push(PathPayoff::new(d, kind, f.clone()));
            }
        }
        out
    }

    proptest! {
        #[test]
        fn interpolation_exact_at_knots(vals in prop::collection::vec(-10.0f64..10.0, 1..40), horizon in 0.1f64..5.0) {
            let p = DiscretePath::from_scalar_increments_sum(horizon, &vals).unwrap();
            let n = p.n();
            for k in 0..=n {
                let t = k as f64 * horizon / n as f64;
                prop_assert_eq!(p.interpolate(t.min(horizon)).unwrap(), p.point(k).to_vec());
            }
        }

        #[test]
        fn interpolation_linear_between_knots(vals in prop::collection::vec(-10.0f64..10.0, 2..20), k_frac in 0.0f64..1.0) {
            let p = DiscretePath::from_scalar_increments_sum(1.0, &vals).unwrap();
            let n = p.n();
            let k = ((k_frac * n as f64) as usize).min(n - 1);
            let dt = 1.0 / n as f64;
            let t0 = (k as f64 + 0.2) * dt;
            let (a, b, c) = (
                p.interpolate(t0).unwrap()[0],
                p.interpolate(t0 + 0.3 * dt).unwrap()[0],
                p.interpolate(t0 + 0.6 * dt).unwrap()[0],
            );
            prop_assert!((a - 2.0 * b + c).abs() <= 1e-12 * (1.0 + a.abs() + c.abs()));
        }

        #[test]
        fn markov_run_matches_direct_evaluation(
            d in 1usize..3,
            n in 1usize..30,
            seed_vals in prop::collection::vec(-3.0f64..3.0, 90),
            horizon in 0.2f64..3.0,
        ) {
            let mut pts = vec![vec![0.0; d]];
            for k in 0..n {
                let prev = pts[k].clone();
                pts.push((0..d).map(|i| prev[i] + seed_vals[(k * d + i) % seed_vals.len()]).collect());
            }
            let path = DiscretePath::new(horizon, pts).unwrap();
            for payoff in all_payoffs(d) {
                let direct = payoff.evaluate_on_discrete(&path).unwrap();
                let via_state = payoff.markov_spec().run(&path);
                prop_assert!((direct - via_state).abs() <= 1e-12 * (1.0 + direct.abs()));
            }
        }

        #[test]
        fn builtin_growth_bounds_hold(vals in prop::collection::vec(-100.0f64..100.0, 1..20)) {
            let path = DiscretePath::from_scalar_increments_sum(1.0, &vals).unwrap();
            for payoff in all_payoffs(1) {
                let (_, viol) = payoff.evaluate_checked(&path).unwrap();
                prop_assert!(viol.is_none(), "{:?} violated its growth bound", payoff);
            }
        }
    }
}
