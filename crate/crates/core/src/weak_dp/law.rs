//! Sampling from the martingale law that follows the stored optimal steps.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{BoundMode, Decision, StepMeasure, WeakPolicy, WeakResult};
use crate::error::{Error, Result};
use crate::payoffs::DiscretePath;
use crate::sampling::PathSampler;
use crate::uncertainty_set::UncertaintySet;
use crate::value_grid::ValueGrid;

/// Path sampler for the law that, at step `k`, draws the increment from the
/// optimal step measure stored at the grid node nearest to the current
/// Markov state.
#[derive(Debug, Clone)]
pub struct WeakLaw {
    policy: WeakPolicy,
    locator: ValueGrid,
}

/// Builds the sampler; the evaluation must have been run with
/// `store_policy = true`.
pub fn extract_optimal_law(result: &WeakResult) -> Result<WeakLaw> {
    let policy = result
        .policy
        .clone()
        .ok_or_else(|| Error::InvalidArgument("evaluation was run without store_policy".into()))?;
    let locator = ValueGrid::new(policy.axes.clone());
    Ok(WeakLaw { policy, locator })
}

impl WeakLaw {
    /// Step set `(T/n) D`.
    pub fn step_set(&self) -> &UncertaintySet {
        &self.policy.step_set
    }

    pub fn bound_mode(&self) -> BoundMode {
        self.policy.bound_mode
    }

    /// Measure used at step `k` from the Markov state `state`.
    pub fn measure_at(&self, k: usize, state: &[f64]) -> &StepMeasure {
        let idx = self.locator.nearest_index(state);
        match &self.policy.decisions[k][idx] {
            Some(Decision::Measure(m)) => m,
            Some(Decision::Candidate(i)) => &self.policy.family[*i as usize],
            None => panic!("state {state:?} at step {k} lies outside the reachable grid"),
        }
    }
}

fn draw<'a>(m: &'a StepMeasure, rng: &mut ChaCha8Rng) -> &'a [f64] {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for a in m.atoms() {
        acc += a.weight;
        if u < acc {
            return &a.point;
        }
    }
    &m.atoms().last().expect("measures are nonempty").point
}

impl PathSampler for WeakLaw {
    fn n(&self) -> usize {
        self.policy.n
    }

    fn horizon(&self) -> f64 {
        self.policy.horizon
    }

    fn dim(&self) -> usize {
        self.policy.spec.path_dim()
    }

    fn sample_path(&self, rng: &mut ChaCha8Rng) -> DiscretePath {
        let spec = &self.policy.spec;
        let d = spec.path_dim();
        let n = self.policy.n;
        let dt = self.policy.horizon / n as f64;
        let mut state = spec.initial_state();
        let mut next = state.clone();
        let mut points = Vec::with_capacity(n + 1);
        points.push(vec![0.0; d]);
        for k in 0..n {
            let y = draw(self.measure_at(k, &state), rng);
            let x: Vec<f64> = points[k].iter().zip(y).map(|(a, b)| a + b).collect();
            spec.advance(&state, y, dt, &mut next);
            std::mem::swap(&mut state, &mut next);
            points.push(x);
        }
        DiscretePath::new(self.policy.horizon, points).expect("paths start at the origin")
    }
}
