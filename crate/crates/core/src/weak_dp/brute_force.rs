//! Linear-programming oracle for one step: weights on a fixed atom grid,
//! subject to unit mass, zero mean and a second moment in the step set.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use super::BoundMode;
use crate::error::{Error, Result};
use crate::uncertainty_set::{Representation, UncertaintySet};

/// Atom grid on the shell `lo <= |y|^2 <= hi`. In d = 1 it has `resolution`
/// evenly spaced points per side; in d = 2 it is a polar grid with
/// `resolution` radii and `8 * resolution` angles. The origin is included
/// when the lower bound is zero.
fn atom_grid(d: usize, lo: f64, hi: f64, resolution: usize) -> Vec<Vec<f64>> {
    let (a, b) = (lo.sqrt(), hi.sqrt());
    let radii: Vec<f64> = if resolution <= 1 || b == a {
        vec![b]
    } else {
        (0..resolution)
            .map(|i| a + (b - a) * i as f64 / (resolution - 1) as f64)
            .filter(|&r| r > 0.0)
            .collect()
    };
    let mut out = Vec::new();
    if lo == 0.0 {
        out.push(vec![0.0; d]);
    }
    if d == 1 {
        for &r in &radii {
            out.push(vec![-r]);
            out.push(vec![r]);
        }
    } else {
        let angles = 8 * resolution.max(1);
        for &r in &radii {
            for j in 0..angles {
                let t = 2.0 * std::f64::consts::PI * j as f64 / angles as f64;
                out.push(vec![r * t.cos(), r * t.sin()]);
            }
        }
    }
    out
}

/// Optimal value of the per-step LP for `E[f(x + Y)]`. Only for d <= 2.
pub fn brute_force_step<F: Fn(&[f64]) -> f64>(
    step_set: &UncertaintySet,
    f: F,
    x: &[f64],
    mode: BoundMode,
    resolution: usize,
) -> Result<f64> {
    let d = step_set.dim();
    if d > 2 {
        return Err(Error::Unsupported("the LP oracle supports d <= 2".into()));
    }
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let (r, big_r) = step_set.spectrum_bounds();
    let (lo, hi) = mode.pointwise_bounds(d, r, big_r);
    if hi == 0.0 {
        return Ok(f(x));
    }
    let atoms = atom_grid(d, lo, hi, resolution);

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let mut buf = vec![0.0; d];
    let weights: Vec<Variable> = atoms
        .iter()
        .map(|y| {
            for k in 0..d {
                buf[k] = x[k] + y[k];
            }
            lp.add_var(f(&buf), (0.0, f64::INFINITY))
        })
        .collect();
    let row = |g: &dyn Fn(&[f64]) -> f64| -> Vec<(Variable, f64)> {
        weights.iter().zip(&atoms).map(|(&w, y)| (w, g(y))).collect()
    };
    lp.add_constraint(row(&|_| 1.0), ComparisonOp::Eq, 1.0);
    for k in 0..d {
        lp.add_constraint(row(&|y| y[k]), ComparisonOp::Eq, 0.0);
    }
    match step_set.representation() {
        Representation::Interval { r, big_r } => {
            lp.add_constraint(row(&|y| y[0] * y[0]), ComparisonOp::Ge, *r);
            lp.add_constraint(row(&|y| y[0] * y[0]), ComparisonOp::Le, *big_r);
        }
        Representation::Hull { vertices } => {
            let lambdas: Vec<Variable> = vertices.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
            let ones: Vec<(Variable, f64)> = lambdas.iter().map(|&l| (l, 1.0)).collect();
            lp.add_constraint(&ones, ComparisonOp::Eq, 1.0);
            for i in 0..d {
                for j in i..d {
                    let mut terms = row(&|y| y[i] * y[j]);
                    terms.extend(lambdas.iter().zip(vertices).map(|(&l, v)| (l, -v.get(i, j))));
                    lp.add_constraint(&terms, ComparisonOp::Eq, 0.0);
                }
            }
        }
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::Lp(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::Lp("solver stopped before reaching an optimum".into()))?;
    Ok(solution.objective())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty_set::SymMatrix;
    use approx::assert_abs_diff_eq;

    #[test]
    fn square_on_interval() {
        let set = UncertaintySet::interval(1.0, 4.0).unwrap();
        let v = brute_force_step(&set, |y| y[0] * y[0], &[0.0], BoundMode::Paper, 101).unwrap();
        assert_abs_diff_eq!(v, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn constant_value() {
        let set = UncertaintySet::interval(1.0, 4.0).unwrap();
        let v = brute_force_step(&set, |_| 2.5, &[0.3], BoundMode::Paper, 11).unwrap();
        assert_abs_diff_eq!(v, 2.5, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_interval_forces_support() {
        let set = UncertaintySet::interval(2.0, 2.0).unwrap();
        let v = brute_force_step(&set, |y| y[0] * y[0], &[0.0], BoundMode::Paper, 7).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn two_dimensional_hull() {
        let set = UncertaintySet::hull(vec![SymMatrix::diag(&[1.0, 4.0])]).unwrap();
        let v = brute_force_step(&set, |y| y[1] * y[1], &[0.0, 0.0], BoundMode::Relaxed, 6).unwrap();
        assert_abs_diff_eq!(v, 4.0, epsilon = 1e-8);
        let iso = UncertaintySet::hull(vec![SymMatrix::identity(2).scaled(0.7)]).unwrap();
        let v = brute_force_step(&iso, |y| y[0] * y[0] + y[1] * y[1], &[0.0, 0.0], BoundMode::Relaxed, 6).unwrap();
        assert_abs_diff_eq!(v, 1.4, epsilon = 1e-8);
    }
}
