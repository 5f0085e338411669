//! Mean intensities, the intensity-fluctuation correlation ΔG² and the
//! coincidence rate G² for a delta-correlated Gaussian source.
//!
//! With `<E(x1) E*(x2)> = S(x1) δ(x1 - x2)` every double integral over the
//! source collapses to a single weighted sum over the source grid:
//!
//! ```text
//! <I(u)>       = Σ_j w_j S_j |h(x_j, u)|²
//! ΔG²(u1, u2)  = |Σ_j w_j S_j h1(x_j, u1) h2*(x_j, u2)|²
//! G²(u1, u2)   = <I(u1)> <I(u2)> + ΔG²(u1, u2)
//! ```
//!
//! `w_j` are trapezoid weights on the source grid.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::propagation::{self, FreeSpaceKernel, Kernel};
use crate::scene::{validate_scene, Scene, SourceModel};

/// `g0 exp(-x² / 2a²)`.
pub fn source_diagonal_weight(source: &SourceModel, x: f64) -> f64 {
    source.diagonal(x)
}

/// Quadrature weight times source intensity at each source grid node.
pub fn source_weights(scene: &Scene) -> Vec<f64> {
    scene
        .source_grid
        .positions()
        .into_iter()
        .zip(scene.source_grid.trapezoid_weights())
        .map(|(x, w)| w * source_diagonal_weight(&scene.source, x))
        .collect()
}

fn expect_same_len(weights: &[f64], len: usize, context: &'static str) -> Result<()> {
    if weights.len() != len {
        return Err(Error::Dimension {
            context,
            expected: weights.len(),
            actual: len,
        });
    }
    Ok(())
}

/// `Σ_j weights_j |h_j|²`.
pub fn mean_intensity(weights: &[f64], kernel_column: &[Complex64]) -> Result<f64> {
    expect_same_len(weights, kernel_column.len(), "mean intensity")?;
    Ok(weights
        .iter()
        .zip(kernel_column)
        .map(|(w, h)| w * h.norm_sqr())
        .sum())
}

/// `<I(u_m)>` for every column of a reference-arm kernel.
pub fn mean_intensity_per_column(weights: &[f64], kernel: &impl Kernel) -> Result<Vec<f64>> {
    expect_same_len(weights, kernel.rows(), "reference intensity")?;
    Ok((0..kernel.cols())
        .into_par_iter()
        .map(|m| kernel.weighted_norm_column(m, weights))
        .collect())
}

/// `|Σ_j weights_j h1_j conj(h2(x_j, u_m))|²` for every column `m`.
pub fn delta_g2(weights: &[f64], h1_column: &SampledField, h2: &impl Kernel) -> Result<Vec<f64>> {
    expect_same_len(weights, h1_column.len(), "test-arm column")?;
    h1_column.expect_len(h2.rows(), "reference kernel rows")?;
    let weighted: Vec<Complex64> = weights
        .iter()
        .zip(&h1_column.values)
        .map(|(w, h)| h * *w)
        .collect();
    Ok((0..h2.cols())
        .into_par_iter()
        .map(|m| h2.conj_dot_column(m, &weighted).norm_sqr())
        .collect())
}

/// Which divisor has been applied to a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    None,
    /// Divided by the maximum of G².
    Peak,
    /// Divided pointwise by the background `<I(u1)><I(u2)>`.
    Background,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    pub u2_positions: Vec<f64>,
    pub mean_intensity_test: f64,
    pub mean_intensity_ref: Vec<f64>,
    pub delta_g2: Vec<f64>,
    pub g2: Vec<f64>,
    pub normalization: Normalization,
}

impl CorrelationProfile {
    pub fn len(&self) -> usize {
        self.u2_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u2_positions.is_empty()
    }

    /// `<I(u1)><I(u2)>` per detector point.
    pub fn background(&self) -> Vec<f64> {
        self.mean_intensity_ref
            .iter()
            .map(|i2| self.mean_intensity_test * i2)
            .collect()
    }

    pub fn g2_peak_normalized(&self) -> Vec<f64> {
        let peak = self.g2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.g2.iter().map(|g| g / peak).collect()
    }

    pub fn delta_g2_background_normalized(&self) -> Vec<f64> {
        self.delta_g2
            .iter()
            .zip(self.background())
            .map(|(dg, b)| dg / b)
            .collect()
    }

    /// Rescaled copy. The decomposition `g2 = I1 · I2 + ΔG²` still holds on
    /// the result: the peak form rescales `mean_intensity_ref`, the
    /// background form sets `I1 · I2 = 1`.
    pub fn normalized(&self, kind: Normalization) -> Result<Self> {
        if self.normalization != Normalization::None {
            return Err(Error::parameter(
                "normalization",
                format!("{:?}", self.normalization),
                "profile is already normalized",
            ));
        }
        let mut out = self.clone();
        out.normalization = kind;
        match kind {
            Normalization::None => {}
            Normalization::Peak => {
                let peak = self.g2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                out.g2 = self.g2_peak_normalized();
                out.delta_g2.iter_mut().for_each(|v| *v /= peak);
                out.mean_intensity_ref.iter_mut().for_each(|v| *v /= peak);
            }
            Normalization::Background => {
                let background = self.background();
                out.delta_g2 = self.delta_g2_background_normalized();
                out.g2 = self.g2.iter().zip(&background).map(|(g, b)| g / b).collect();
                out.mean_intensity_ref = self
                    .mean_intensity_ref
                    .iter()
                    .map(|_| 1.0 / self.mean_intensity_test)
                    .collect();
            }
        }
        Ok(out)
    }
}

/// Profile from an explicit test-arm column and reference kernel.
pub fn profile_from_kernels(
    scene: &Scene,
    h1_column: &SampledField,
    h2: &impl Kernel,
) -> Result<CorrelationProfile> {
    let weights = source_weights(scene);
    let i1 = mean_intensity(&weights, &h1_column.values)?;
    if !(i1 > 0.0) {
        return Err(Error::DegenerateObject);
    }
    if h2.cols() != scene.detector_grid.len() {
        return Err(Error::Dimension {
            context: "reference kernel columns",
            expected: scene.detector_grid.len(),
            actual: h2.cols(),
        });
    }
    expect_same_len(&weights, h1_column.len(), "test-arm column")?;
    h1_column.expect_len(h2.rows(), "reference kernel rows")?;
    let weighted: Vec<Complex64> = weights
        .iter()
        .zip(&h1_column.values)
        .map(|(w, h)| h * *w)
        .collect();
    let (dg, i2): (Vec<f64>, Vec<f64>) = (0..h2.cols())
        .into_par_iter()
        .map(|m| {
            let (cross, norm) = h2.column_moments(m, &weighted, &weights);
            (cross.norm_sqr(), norm)
        })
        .unzip();
    let g2 = i2.iter().zip(&dg).map(|(i2, dg)| i1 * i2 + dg).collect();
    Ok(CorrelationProfile {
        u2_positions: scene.detector_grid.positions(),
        mean_intensity_test: i1,
        mean_intensity_ref: i2,
        delta_g2: dg,
        g2,
        normalization: Normalization::None,
    })
}

/// Mean intensities, ΔG² and G² over the detector grid at the scene's `u1`.
pub fn full_profile(scene: &Scene) -> Result<CorrelationProfile> {
    let violations = validate_scene(scene);
    if !violations.is_empty() {
        return Err(Error::InvalidScene(violations));
    }
    propagation::check_sampling(scene)?;
    let h1 = propagation::test_arm_column(scene)?;
    let h2 = FreeSpaceKernel::reference_arm(scene)?;
    profile_from_kernels(scene, &h1, &h2)
}
