//! Continuous-time reference values from the nonlinear heat equation
//! `-u_t - G(D^2 u) = 0`, `u(T, .) = f`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::payoffs::PayoffFn;
use crate::uncertainty_set::UncertaintySet;

/// Default domain half-width in multiples of `sqrt(R T)`.
pub const DEFAULT_RADIUS: f64 = 5.0;

/// Uniform space-time grid for the explicit scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeGrid1D {
    pub h: f64,
    /// Half-width `L`; nodes are `-L, -L + h, ..., L`.
    pub radius: f64,
    pub steps: usize,
    pub horizon: f64,
}

impl PdeGrid1D {
    /// Grid with spacing `h`, radius `L` (rounded up to a multiple of `h`) and
    /// `steps` time steps.
    pub fn new(h: f64, radius: f64, steps: usize, horizon: f64) -> Result<Self> {
        if !(h > 0.0) || !(radius > 0.0) || steps == 0 || !(horizon > 0.0) {
            return Err(Error::InvalidArgument(
                "grid needs positive spacing, radius, horizon and at least one step".into(),
            ));
        }
        let half = (radius / h - 1e-9).ceil();
        Ok(Self {
            h,
            radius: half * h,
            steps,
            horizon,
        })
    }

    /// Spacing `sqrt(R T) / points_per_sd`, radius `5 sqrt(R T)` and the
    /// fewest time steps allowed by the CFL bound.
    pub fn auto(set: &UncertaintySet, horizon: f64, points_per_sd: f64) -> Result<Self> {
        let (_, big_r) = set.spectrum_bounds();
        let scale = (big_r * horizon).sqrt();
        let scale = if scale > 0.0 { scale } else { horizon.sqrt() };
        let h = scale / points_per_sd;
        let steps = ((horizon * big_r / (h * h)) * (1.0 + 1e-12)).ceil().max(1.0) as usize;
        Self::new(h, DEFAULT_RADIUS * scale, steps, horizon)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn half(&self) -> usize {
        (self.radius / self.h).round() as usize
    }

    pub fn nodes(&self) -> Vec<f64> {
        let half = self.half() as i64;
        (-half..=half).map(|i| i as f64 * self.h).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    pub grid: PdeGrid1D,
    /// `u(0, x_i)` on the grid nodes.
    pub initial_slice: Vec<f64>,
    pub value_at_origin: f64,
}

/// Explicit monotone scheme `u_j = u_{j+1} + dt G(D_h^2 u_{j+1})` with linear
/// extrapolation at both ends.
pub fn solve_terminal(f: &PayoffFn, set: &UncertaintySet, grid: &PdeGrid1D) -> Result<PdeSolution> {
    if set.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: set.dim(),
        });
    }
    let (_, big_r) = set.spectrum_bounds();
    let dt = grid.dt();
    let h2 = grid.h * grid.h;
    if big_r > 0.0 {
        let max_dt = h2 / big_r;
        if dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, max_dt });
        }
    }
    let nodes = grid.nodes();
    let len = nodes.len();
    if len < 3 {
        return Err(Error::InvalidArgument("grid needs at least three nodes".into()));
    }
    let mut u: Vec<f64> = nodes.iter().map(|&x| f.eval_scalar(x)).collect();
    let mut next = vec![0.0; len];
    for _ in 0..grid.steps {
        next[1..len - 1].par_iter_mut().enumerate().for_each(|(j, out)| {
            let i = j + 1;
            let gamma = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
            *out = u[i] + dt * set.g_scalar(gamma);
        });
        next[0] = 2.0 * next[1] - next[2];
        next[len - 1] = 2.0 * next[len - 2] - next[len - 3];
        std::mem::swap(&mut u, &mut next);
    }
    let value_at_origin = u[grid.half()];
    if !u.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("scheme produced non-finite values".into()));
    }
    Ok(PdeSolution {
        grid: *grid,
        initial_slice: u,
        value_at_origin,
    })
}

/// 64-point Gauss-Hermite rule for the standard normal, by Golub-Welsch.
fn gauss_hermite_normal() -> Vec<(f64, f64)> {
    const N: usize = 64;
    let mut jacobi = DMatrix::<f64>::zeros(N, N);
    for i in 1..N {
        let b = (i as f64).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut rule: Vec<(f64, f64)> = (0..N)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// `E[f(sigma W_T)]` for a scalar payoff, in closed form where available and
/// by quadrature otherwise.
pub fn gaussian_oracle(f: &PayoffFn, sigma: f64, horizon: f64) -> Result<f64> {
    if !(sigma >= 0.0) || !(horizon >= 0.0) {
        return Err(Error::InvalidArgument("sigma and horizon must be nonnegative".into()));
    }
    let s = sigma * horizon.sqrt();
    if s == 0.0 {
        return Ok(f.eval_scalar(0.0));
    }
    let normal = Normal::standard();
    let call = |k: f64| s * normal.pdf(k / s) - k * normal.cdf(-k / s);
    Ok(match f {
        PayoffFn::Square => s * s,
        PayoffFn::NegSquare => -s * s,
        PayoffFn::Abs => s * (2.0 / std::f64::consts::PI).sqrt(),
        PayoffFn::Identity => 0.0,
        PayoffFn::Constant(c) => *c,
        PayoffFn::Call { strike } => call(*strike),
        PayoffFn::Put { strike } => call(*strike) + strike,
        PayoffFn::Combination(parts) => {
            let mut acc = 0.0;
            for (w, g) in parts {
                acc += w * gaussian_oracle(g, sigma, horizon)?;
            }
            acc
        }
    })
}

/// Quadrature estimate of `E[f(sigma W_T)]` for any function.
pub fn gaussian_quadrature<F: Fn(f64) -> f64>(f: F, sigma: f64, horizon: f64) -> f64 {
    let s = sigma * horizon.sqrt();
    gauss_hermite_normal().iter().map(|&(x, w)| w * f(s * x)).sum()
}

/// Two-dimensional explicit scheme for a hull of diagonal matrices, with the
/// support function applied to the diagonal of the discrete Hessian.
///
/// With `points_per_sd = None` the spacing is `sqrt(R T) / 20`.
pub fn solve_diag_2d(f: &PayoffFn, set: &UncertaintySet, horizon: f64, points_per_sd: Option<f64>) -> Result<f64> {
    if set.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: set.dim(),
        });
    }
    if !set.is_diagonal() {
        return Err(Error::Unsupported("the 2d scheme needs diagonal hull vertices".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let verts: Vec<(f64, f64)> = set.vertices().iter().map(|v| (v.get(0, 0), v.get(1, 1))).collect();
    let (_, big_r) = set.spectrum_bounds();
    let scale = (big_r * horizon).sqrt();
    if scale == 0.0 {
        return Ok(f.eval(&[0.0, 0.0]));
    }
    let h = scale / points_per_sd.unwrap_or(20.0);
    let half = (DEFAULT_RADIUS * scale / h).ceil() as usize;
    let side = 2 * half + 1;
    let max_dt = h * h / (2.0 * big_r);
    let steps = (horizon / max_dt * (1.0 + 1e-12)).ceil() as usize;
    let dt = horizon / steps as f64;
    let h2 = h * h;
    let coord = |i: usize| (i as f64 - half as f64) * h;
    let mut u: Vec<f64> = (0..side * side).map(|k| f.eval(&[coord(k / side), coord(k % side)])).collect();
    let mut next = vec![0.0; side * side];
    for _ in 0..steps {
        next.par_chunks_mut(side).enumerate().for_each(|(i, row)| {
            if i == 0 || i == side - 1 {
                return;
            }
            for (j, cell) in row.iter_mut().enumerate().take(side - 1).skip(1) {
                let k = i * side + j;
                let gxx = (u[k + side] - 2.0 * u[k] + u[k - side]) / h2;
                let gyy = (u[k + 1] - 2.0 * u[k] + u[k - 1]) / h2;
                let g = verts
                    .iter()
                    .map(|&(a, b)| 0.5 * (a * gxx + b * gyy))
                    .fold(f64::NEG_INFINITY, f64::max);
                *cell = u[k] + dt * g;
            }
        });
        for i in 1..side - 1 {
            next[i * side] = 2.0 * next[i * side + 1] - next[i * side + 2];
            next[i * side + side - 1] = 2.0 * next[i * side + side - 2] - next[i * side + side - 3];
        }
        for j in 0..side {
            next[j] = 2.0 * next[side + j] - next[2 * side + j];
            let last = (side - 1) * side + j;
            next[last] = 2.0 * next[last - side] - next[last - 2 * side];
        }
        std::mem::swap(&mut u, &mut next);
    }
    Ok(u[half * side + half])
}
