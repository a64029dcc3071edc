//! Path samplers and deterministic parallel Monte Carlo.
//!
//! Paths are generated in fixed-size blocks. Block `b` draws from the ChaCha8
//! stream `b` of the seed, so results do not depend on the worker count, and
//! block statistics are merged in block order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::payoffs::DiscretePath;

/// Paths per independent sub-stream.
pub const BLOCK: usize = 1024;

/// A law on discrete paths that can be sampled.
pub trait PathSampler: Sync {
    fn n(&self) -> usize;
    fn horizon(&self) -> f64;
    fn dim(&self) -> usize;
    fn sample_path(&self, rng: &mut ChaCha8Rng) -> DiscretePath;
}

/// Generator for block `block` of `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Mean and variance accumulator with an associative merge.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McStats {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl McStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        Self { count, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Runs `body` on `paths` sampled paths in parallel blocks and merges the
/// per-block accumulators in block order.
pub fn run_blocks<S, A, F, M>(sampler: &S, paths: usize, seed: u64, init: fn() -> A, body: F, merge: M) -> Result<A>
where
    S: PathSampler + ?Sized,
    A: Send,
    F: Fn(&mut A, &DiscretePath) + Sync,
    M: Fn(A, A) -> A,
{
    if paths == 0 {
        return Err(Error::NoPaths);
    }
    let blocks = paths.div_ceil(BLOCK);
    let parts: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b as u64);
            let count = BLOCK.min(paths - b * BLOCK);
            let mut acc = init();
            for _ in 0..count {
                let path = sampler.sample_path(&mut rng);
                body(&mut acc, &path);
            }
            acc
        })
        .collect();
    let mut iter = parts.into_iter();
    let first = iter.next().unwrap();
    Ok(iter.fold(first, merge))
}

/// Monte Carlo estimate of `E[f(path)]`.
pub fn monte_carlo<S, F>(sampler: &S, paths: usize, seed: u64, f: F) -> Result<McStats>
where
    S: PathSampler + ?Sized,
    F: Fn(&DiscretePath) -> f64 + Sync,
{
    run_blocks(
        sampler,
        paths,
        seed,
        McStats::default,
        |acc, p| acc.push(f(p)),
        |a, b| a.merge(&b),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut all = McStats::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = McStats::default();
        let mut b = McStats::default();
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert_eq!(m.count, all.count);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.variance() - all.variance()).abs() < 1e-10);
    }
}
