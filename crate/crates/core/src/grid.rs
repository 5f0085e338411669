//! Uniform one-dimensional sampling grids.

use serde::{Deserialize, Serialize};

/// Uniform grid over `[-half_extent, +half_extent]`, both endpoints included.
///
/// Positions are computed as `(j - (N-1)/2) * step`, so the grid is exactly
/// mirror-symmetric: `position(j) == -position(N-1-j)` bit for bit. Odd
/// sample counts place a node on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub half_extent_m: f64,
    pub sample_count: usize,
}

impl Grid1D {
    pub fn new(half_extent_m: f64, sample_count: usize) -> Self {
        Self {
            half_extent_m,
            sample_count,
        }
    }

    /// Smallest symmetric grid over `half_extent_m` whose step does not exceed
    /// `max_step_m`. The interval count is rounded up to an even number so the
    /// origin is a node.
    pub fn with_max_step(half_extent_m: f64, max_step_m: f64) -> Self {
        let mut intervals = (2.0 * half_extent_m / max_step_m).ceil() as usize;
        intervals = intervals.max(2);
        if intervals % 2 == 1 {
            intervals += 1;
        }
        Self::new(half_extent_m, intervals + 1)
    }

    pub fn is_well_formed(&self) -> bool {
        self.sample_count >= 2 && self.half_extent_m.is_finite() && self.half_extent_m > 0.0
    }

    pub fn len(&self) -> usize {
        self.sample_count
    }

    pub fn is_empty(&self) -> bool {
        self.sample_count == 0
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_extent_m / (self.sample_count - 1) as f64
    }

    fn center_index(&self) -> f64 {
        (self.sample_count - 1) as f64 / 2.0
    }

    #[inline]
    pub fn position(&self, j: usize) -> f64 {
        (j as f64 - self.center_index()) * self.step()
    }

    pub fn positions(&self) -> Vec<f64> {
        let step = self.step();
        let c = self.center_index();
        (0..self.sample_count)
            .map(|j| (j as f64 - c) * step)
            .collect()
    }

    /// Composite trapezoid weights: `step` in the interior, `step / 2` at the ends.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let step = self.step();
        let mut w = vec![step; self.sample_count];
        w[0] = 0.5 * step;
        w[self.sample_count - 1] = 0.5 * step;
        w
    }

    /// Same extent with `factor` times as many intervals. Every node of
    /// `self` is also a node of the refined grid.
    pub fn refined(&self, factor: usize) -> Self {
        Self::new(
            self.half_extent_m,
            (self.sample_count - 1) * factor + 1,
        )
    }

    /// Same extent with roughly `target` samples, rounded to an odd count.
    pub fn resampled(&self, target: usize) -> Self {
        let intervals = target.saturating_sub(1).max(2);
        let intervals = intervals + intervals % 2;
        Self::new(self.half_extent_m, intervals + 1)
    }

    /// Index of the node whose mirror image is `j`.
    pub fn mirror_index(&self, j: usize) -> usize {
        self.sample_count - 1 - j
    }
}
