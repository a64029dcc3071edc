//! Value functions sampled on uniform tensor grids with multilinear
//! interpolation (linear extrapolation outside the grid).

use rayon::prelude::*;

/// Uniform axis with nodes `start + i * step`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

/// Relative distance under which a coordinate snaps to its nearest knot.
const SNAP: f64 = 1e-9;

impl Axis {
    /// Symmetric axis `-half * step, ..., half * step`.
    pub fn symmetric(step: f64, half: usize) -> Self {
        Axis {
            start: -(half as f64) * step,
            step,
            len: 2 * half + 1,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.node(self.len - 1)
    }

    /// Cell index and fractional offset; the offset leaves `[0, 1]` when the
    /// coordinate is outside the axis.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let mut u = (x - self.start) / self.step;
        let r = u.round();
        if (u - r).abs() <= SNAP {
            u = r;
        }
        if self.len == 1 {
            return (0, 0.0);
        }
        let i = (u.floor().max(0.0) as usize).min(self.len - 2);
        (i, u - i as f64)
    }

    /// Index of the nearest node, clamped to the axis.
    pub fn nearest(&self, x: f64) -> usize {
        let u = ((x - self.start) / self.step).round();
        (u.max(0.0) as usize).min(self.len - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    values: Vec<f64>,
}

impl ValueGrid {
    pub fn new(axes: Vec<Axis>) -> Self {
        assert!(!axes.is_empty() && axes.iter().all(|a| a.len > 0 && a.step > 0.0));
        let mut strides = vec![1; axes.len()];
        for i in (0..axes.len() - 1).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].len;
        }
        let total = strides[0] * axes[0].len;
        Self {
            axes,
            strides,
            values: vec![0.0; total],
        }
    }

    pub fn from_fn<F>(axes: Vec<Axis>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let mut g = Self::new(axes);
        let dim = g.dim();
        let geometry = g.clone_geometry();
        g.values.par_iter_mut().enumerate().for_each_init(
            || vec![0.0; dim],
            |buf, (idx, v)| {
                geometry.node_state(idx, buf);
                *v = f(buf);
            },
        );
        g
    }

    /// One-dimensional grid through the given samples.
    pub fn from_samples_1d(axis: Axis, values: Vec<f64>) -> Self {
        assert_eq!(axis.len, values.len());
        let mut g = Self::new(vec![axis]);
        g.values = values;
        g
    }

    pub(crate) fn clone_geometry(&self) -> Geometry {
        Geometry {
            axes: self.axes.clone(),
            strides: self.strides.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn node_state(&self, idx: usize, out: &mut [f64]) {
        for (k, axis) in self.axes.iter().enumerate() {
            out[k] = axis.node((idx / self.strides[k]) % axis.len);
        }
    }

    /// Flat index of the node nearest to `point`.
    pub fn nearest_index(&self, point: &[f64]) -> usize {
        self.axes
            .iter()
            .zip(&self.strides)
            .zip(point)
            .map(|((a, s), &x)| a.nearest(x) * s)
            .sum()
    }

    /// Multilinear interpolation; corners with zero weight are skipped.
    #[inline]
    pub fn eval(&self, point: &[f64]) -> f64 {
        let dim = self.axes.len();
        debug_assert_eq!(point.len(), dim);
        let mut base = 0usize;
        let mut fr = [0.0f64; 8];
        let mut has_two = [false; 8];
        for k in 0..dim {
            let (i, f) = self.axes[k].locate(point[k]);
            base += i * self.strides[k];
            fr[k] = f;
            has_two[k] = self.axes[k].len > 1;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = base;
            for k in 0..dim {
                if corner >> k & 1 == 1 {
                    if !has_two[k] {
                        w = 0.0;
                        break;
                    }
                    w *= fr[k];
                    idx += self.strides[k];
                } else {
                    w *= 1.0 - fr[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }
}

/// Grid shape without values, cheap to share across workers.
#[derive(Debug, Clone)]
pub(crate) struct Geometry {
    pub axes: Vec<Axis>,
    pub strides: Vec<usize>,
}

impl Geometry {
    pub fn node_state(&self, idx: usize, out: &mut [f64]) {
        for (k, axis) in self.axes.iter().enumerate() {
            out[k] = axis.node((idx / self.strides[k]) % axis.len);
        }
    }
}
