//! Per-step optimization for d >= 2 over a finite family of admissible laws.
//!
//! Every candidate has mean zero and second moment exactly equal to some
//! `Gamma` in the step set: for an orthogonal frame `O` with columns `o_i`,
//! the cross law puts mass `1/(2d)` on `+-sqrt(d) Gamma^{1/2} o_i`, and the
//! simplex law puts mass `1/(d+1)` on `sqrt(d+1) Gamma^{1/2} O v_l` for the
//! walk basis `v_l`. The maximum over this family is a lower bound for the
//! true per-step supremum.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{BoundMode, StepMeasure};
use crate::error::{Error, Result};
use crate::strong_walk::WalkBasis;
use crate::uncertainty_set::{matrix_sqrt, UncertaintySet};
use crate::value_grid::ValueGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    /// Dyadic refinement of vertex pairs, see
    /// [`UncertaintySet::gamma_candidates`].
    pub refinement: u32,
    /// Givens angles per coordinate plane, `theta_j = j pi / rotations`.
    pub rotations: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            refinement: 1,
            rotations: 4,
        }
    }
}

/// Orthogonal frames: the identity, the eigenframe, and Givens rotations of
/// both in every coordinate plane.
pub fn frames(eigenvectors: &DMatrix<f64>, rotations: usize) -> Vec<DMatrix<f64>> {
    let d = eigenvectors.nrows();
    let bases = [DMatrix::identity(d, d), eigenvectors.clone()];
    let mut out = Vec::new();
    for base in &bases {
        out.push(base.clone());
        for p in 0..d {
            for q in (p + 1)..d {
                for j in 1..rotations.max(1) {
                    let theta = j as f64 * std::f64::consts::PI / rotations as f64;
                    let mut g = DMatrix::identity(d, d);
                    g[(p, p)] = theta.cos();
                    g[(q, q)] = theta.cos();
                    g[(p, q)] = -theta.sin();
                    g[(q, p)] = theta.sin();
                    out.push(base * g);
                }
            }
        }
    }
    out
}

/// All admissible candidates for one step, filtered by the pointwise bounds.
pub fn candidate_family(step_set: &UncertaintySet, cfg: &FamilyConfig, mode: BoundMode) -> Result<Vec<StepMeasure>> {
    let d = step_set.dim();
    let (r, big_r) = step_set.spectrum_bounds();
    let (lo, hi) = mode.pointwise_bounds(d, r, big_r);
    let basis = WalkBasis::new(d);
    let mut out = Vec::new();
    for gamma in step_set.gamma_candidates(cfg.refinement) {
        let root = matrix_sqrt(&gamma)?;
        let (_, eigvecs) = gamma.eigen();
        for frame in frames(&eigvecs, cfg.rotations) {
            let cols: Vec<Vec<f64>> = (0..d).map(|i| frame.column(i).iter().copied().collect()).collect();
            // Cross law.
            let mut atoms = Vec::with_capacity(2 * d);
            let w = 1.0 / (2 * d) as f64;
            let s = (d as f64).sqrt();
            for c in &cols {
                let y: Vec<f64> = root.apply(c).iter().map(|v| v * s).collect();
                atoms.push((y.iter().map(|v| -v).collect::<Vec<_>>(), w));
                atoms.push((y, w));
            }
            out.push(StepMeasure::new(atoms));
            // Simplex law.
            let s = ((d + 1) as f64).sqrt();
            let w = 1.0 / (d + 1) as f64;
            let atoms = basis
                .vectors()
                .iter()
                .map(|v| {
                    let ov: Vec<f64> = (0..d).map(|i| (0..d).map(|j| frame[(i, j)] * v[j]).sum()).collect();
                    (root.apply(&ov).iter().map(|x| x * s).collect(), w)
                })
                .collect();
            out.push(StepMeasure::new(atoms));
        }
    }
    let tol = 1e-12 * hi.max(f64::MIN_POSITIVE);
    out.retain(|m| {
        m.atoms().iter().all(|a| {
            let sq: f64 = a.point.iter().map(|v| v * v).sum();
            sq >= lo - tol && sq <= hi + tol
        })
    });
    if out.is_empty() {
        return Err(Error::InfeasibleStep(format!(
            "no candidate law satisfies {lo:e} <= |y|^2 <= {hi:e} (bound mode {mode:?})"
        )));
    }
    Ok(out)
}

/// Index and value of the best candidate for `E[f(Y)]`; ties go to the
/// earliest candidate.
pub(crate) fn best_candidate<F: FnMut(&[f64]) -> f64>(family: &[StepMeasure], mut f: F) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, m) in family.iter().enumerate() {
        let v: f64 = m.atoms().iter().map(|a| a.weight * f(&a.point)).sum();
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Best candidate for `E[f(x + Y)]`.
pub fn optimize_step_nd_with<F: Fn(&[f64]) -> f64>(
    step_set: &UncertaintySet,
    f: F,
    x: &[f64],
    mode: BoundMode,
    cfg: &FamilyConfig,
) -> Result<(f64, StepMeasure)> {
    if x.len() != step_set.dim() {
        return Err(Error::DimensionMismatch {
            expected: step_set.dim(),
            got: x.len(),
        });
    }
    let family = candidate_family(step_set, cfg, mode)?;
    let mut buf = vec![0.0; x.len()];
    let (i, v) = best_candidate(&family, |y| {
        for k in 0..x.len() {
            buf[k] = x[k] + y[k];
        }
        f(&buf)
    });
    Ok((v, family[i].clone()))
}

/// Grid-valued version of [`optimize_step_nd_with`].
pub fn optimize_step_nd(
    step_set: &UncertaintySet,
    v: &ValueGrid,
    x: &[f64],
    mode: BoundMode,
    cfg: &FamilyConfig,
) -> Result<(f64, StepMeasure)> {
    if v.dim() != step_set.dim() {
        return Err(Error::DimensionMismatch {
            expected: step_set.dim(),
            got: v.dim(),
        });
    }
    optimize_step_nd_with(step_set, |z| v.eval(z), x, mode, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty_set::SymMatrix;
    use approx::assert_abs_diff_eq;

    #[test]
    fn every_candidate_has_exact_moments() {
        let set = UncertaintySet::hull(vec![
            SymMatrix::diag(&[1.0, 2.0]),
            SymMatrix::from_row_major(2, &[3.0, 0.5, 0.5, 1.0]).unwrap(),
        ])
        .unwrap();
        let fam = candidate_family(&set, &FamilyConfig::default(), BoundMode::Relaxed).unwrap();
        assert!(!fam.is_empty());
        for m in &fam {
            assert!(m.mean().iter().all(|v| v.abs() < 1e-12));
            assert!(set.contains(&m.second_moment(), 1e-10).unwrap());
        }
    }

    #[test]
    fn isotropic_square() {
        let sigma2 = 0.7;
        let set = UncertaintySet::hull(vec![SymMatrix::identity(2).scaled(sigma2)]).unwrap();
        let (v, _) = optimize_step_nd_with(
            &set,
            |y| y.iter().map(|a| a * a).sum(),
            &[0.0, 0.0],
            BoundMode::Relaxed,
            &FamilyConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(v, 2.0 * sigma2, epsilon = 1e-12);
    }

    #[test]
    fn constant_and_second_coordinate() {
        let set = UncertaintySet::hull(vec![SymMatrix::diag(&[1.0, 4.0])]).unwrap();
        let cfg = FamilyConfig::default();
        let (c, _) = optimize_step_nd_with(&set, |_| 3.5, &[0.2, -0.1], BoundMode::Relaxed, &cfg).unwrap();
        assert_abs_diff_eq!(c, 3.5, epsilon = 1e-12);
        let (v, _) = optimize_step_nd_with(&set, |y| y[1] * y[1], &[0.0, 0.0], BoundMode::Relaxed, &cfg).unwrap();
        assert_abs_diff_eq!(v, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn paper_bounds_can_be_infeasible() {
        // d = 2, r > 0: the lower bound d^2 r exceeds d * lambda_min.
        let set = UncertaintySet::hull(vec![SymMatrix::identity(2)]).unwrap();
        let err = candidate_family(&set, &FamilyConfig::default(), BoundMode::Paper);
        assert!(matches!(err, Err(Error::InfeasibleStep(_))));
        assert!(candidate_family(&set, &FamilyConfig::default(), BoundMode::Relaxed).is_ok());
    }
}
