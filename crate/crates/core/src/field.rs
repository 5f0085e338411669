use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// Values sampled on the nodes of a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField<T = Complex64> {
    pub grid: Grid1D,
    pub values: Vec<T>,
}

impl<T> SampledField<T> {
    pub fn new(grid: Grid1D, values: Vec<T>) -> Self {
        debug_assert_eq!(grid.sample_count, values.len());
        Self { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn expect_len(&self, expected: usize, context: &'static str) -> Result<()> {
        if self.values.len() != expected {
            return Err(Error::Dimension {
                context,
                expected,
                actual: self.values.len(),
            });
        }
        Ok(())
    }
}

impl SampledField<Complex64> {
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}
