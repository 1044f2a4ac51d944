use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Regular grid in R^d with periodic (torus) neighbourhood structure.
///
/// Points are enumerated row-major with the last axis varying fastest, so the
/// index of coordinate tuple `(c_0, .., c_{d-1})` is `sum_i c_i * stride_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    len: usize,
}

impl StateSpace {
    /// Builds the product grid of the given per-axis value lists.
    pub fn grid(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(CoreError::Invalid("state space needs at least one axis".into()));
        }
        for (i, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(CoreError::Invalid(format!("axis {i} is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::Invalid(format!("axis {i} has a non-finite value")));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CoreError::Invalid(format!("axis {i} is not strictly increasing")));
            }
        }
        let mut strides = vec![1; axes.len()];
        for i in (0..axes.len() - 1).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].len();
        }
        let len = axes.iter().map(Vec::len).product();
        Ok(Self { axes, strides, len })
    }

    /// Evenly spaced grid with `shape[i]` points on `[lo[i], hi[i]]`.
    pub fn uniform(shape: &[usize], lo: &[f64], hi: &[f64]) -> Result<Self> {
        if shape.len() != lo.len() || shape.len() != hi.len() {
            return Err(CoreError::Invalid("shape, lo and hi must have equal length".into()));
        }
        let axes = shape
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&n, (&a, &b))| {
                if n == 1 {
                    vec![a]
                } else {
                    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
                }
            })
            .collect();
        Self::grid(axes)
    }

    /// One-dimensional grid over the given values.
    pub fn line(values: Vec<f64>) -> Result<Self> {
        Self::grid(vec![values])
    }

    /// Integer lattice `{0, .., n-1}` used by tests and synthetic models.
    pub fn ring(n: usize) -> Result<Self> {
        Self::line((0..n).map(|k| k as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Sorted values along axis `i`.
    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }

    pub fn coords(&self, idx: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.axes)
            .map(|(&s, axis)| (idx / s) % axis.len())
            .collect()
    }

    pub fn index_of(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.coords(idx).iter().zip(&self.axes).map(|(&c, axis)| axis[c]).collect()
    }

    /// Value of axis `axis` at point `idx`.
    pub fn value(&self, idx: usize, axis: usize) -> f64 {
        self.axes[axis][(idx / self.strides[axis]) % self.axes[axis].len()]
    }

    pub fn index_of_point(&self, p: &[f64]) -> Option<usize> {
        if p.len() != self.dimension() {
            return None;
        }
        let mut coords = Vec::with_capacity(p.len());
        for (v, axis) in p.iter().zip(&self.axes) {
            coords.push(axis.iter().position(|a| a == v)?);
        }
        Some(self.index_of(&coords))
    }

    /// Torus addition of an integer move.
    pub fn shift(&self, idx: usize, delta: &[i64]) -> usize {
        let mut out = 0;
        for (i, (&d, axis)) in delta.iter().zip(&self.axes).enumerate() {
            let n = axis.len() as i64;
            let c = ((idx / self.strides[i]) % axis.len()) as i64;
            out += ((c + d).rem_euclid(n)) as usize * self.strides[i];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let s = StateSpace::uniform(&[3, 4], &[0.0, -1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(s.len(), 12);
        for idx in 0..s.len() {
            assert_eq!(s.index_of(&s.coords(idx)), idx);
            assert_eq!(s.index_of_point(&s.point(idx)), Some(idx));
        }
    }

    #[test]
    fn torus_shift_wraps() {
        let s = StateSpace::ring(5).unwrap();
        assert_eq!(s.shift(4, &[1]), 0);
        assert_eq!(s.shift(0, &[-1]), 4);
        assert_eq!(s.shift(2, &[7]), 4);
    }

    #[test]
    fn rejects_unsorted_axis() {
        assert!(StateSpace::line(vec![0.0, 2.0, 1.0]).is_err());
        assert!(StateSpace::line(vec![]).is_err());
    }
}
