//! Monte Carlo speckle ensemble: independent check of the deterministic
//! correlation sums.
//!
//! Each realization draws an independent circular complex Gaussian at every
//! source node with variance `S_j / w_j`, where `w_j` is the trapezoid
//! weight. Propagating with the same weights gives
//! `<E1 E2*> = Σ_j w_j S_j h1_j h2_j*`, the sum the correlation module
//! evaluates directly.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::source_diagonal_weight;
use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::grid::Grid1D;
use crate::propagation::{build_kernels_with, Kernel, KernelMatrix, SourceSampling};
use crate::scene::{validate_scene, Invariant, Scene, SourceModel};

/// Upper bound on the number of batches used for standard errors.
pub const BATCH_COUNT: usize = 50;
/// Smallest ensemble that still yields two batches of two realizations.
pub const MIN_REALIZATIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleEnsembleSpec {
    pub realization_count: usize,
    pub seed: u64,
    pub grid: Grid1D,
    pub source: SourceModel,
}

impl SpeckleEnsembleSpec {
    pub fn for_scene(scene: &Scene, realization_count: usize, seed: u64) -> Self {
        Self {
            realization_count,
            seed,
            grid: scene.source_grid,
            source: scene.source,
        }
    }

    /// Per-node standard deviations `sqrt(S_j / w_j)`.
    pub fn node_sigmas(&self) -> Vec<f64> {
        self.grid
            .positions()
            .into_iter()
            .zip(self.grid.trapezoid_weights())
            .map(|(x, w)| (source_diagonal_weight(&self.source, x) / w).sqrt())
            .collect()
    }
}

/// Generator for one realization. The stream is selected by the
/// realization index and every node consumes exactly two 64-bit words, so
/// node `j` always reads words `4j..4j+4` of that stream.
fn realization_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[inline]
fn unit_open(bits: u64) -> f64 {
    // (0, 1]
    ((bits >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn unit_closed_open(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn fill_field(rng: &mut ChaCha8Rng, sigmas: &[f64], out: &mut [Complex64]) {
    for (e, &sigma) in out.iter_mut().zip(sigmas) {
        let radius = (-unit_open(rng.next_u64()).ln()).sqrt();
        let angle = std::f64::consts::TAU * unit_closed_open(rng.next_u64());
        *e = Complex64::from_polar(sigma * radius, angle);
    }
}

/// Source field of realization `index`.
pub fn draw_field(spec: &SpeckleEnsembleSpec, index: usize) -> Result<SampledField> {
    if index >= spec.realization_count {
        return Err(Error::parameter(
            "realization_index",
            index,
            format!("must be below the realization count {}", spec.realization_count),
        ));
    }
    let sigmas = spec.node_sigmas();
    let mut values = vec![Complex64::new(0.0, 0.0); sigmas.len()];
    fill_field(&mut realization_rng(spec.seed, index), &sigmas, &mut values);
    Ok(SampledField::new(spec.grid, values))
}

/// Detector fields of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorFields {
    pub e1: Complex64,
    pub e2: Vec<Complex64>,
}

impl DetectorFields {
    pub fn i1(&self) -> f64 {
        self.e1.norm_sqr()
    }

    pub fn i2(&self) -> Vec<f64> {
        self.e2.iter().map(|e| e.norm_sqr()).collect()
    }
}

fn weighted(field: &[Complex64], weights: &[f64]) -> Vec<Complex64> {
    field.iter().zip(weights).map(|(e, w)| e * *w).collect()
}

fn propagate_weighted(a: &[Complex64], h1: &[Complex64], h2: &impl Kernel) -> DetectorFields {
    let mut e1 = Complex64::new(0.0, 0.0);
    for (aj, hj) in a.iter().zip(h1) {
        e1 += aj * hj;
    }
    DetectorFields {
        e1,
        e2: (0..h2.cols()).map(|m| h2.dot_column(m, a)).collect(),
    }
}

/// `E1 = Σ_j w_j E_j h1_j`, `E2(u_m) = Σ_j w_j E_j h2(x_j, u_m)`.
pub fn propagate_fields(
    field: &SampledField,
    h1_column: &SampledField,
    h2: &impl Kernel,
    weights: &[f64],
) -> Result<DetectorFields> {
    let n = field.len();
    h1_column.expect_len(n, "test-arm column")?;
    if h2.rows() != n || weights.len() != n {
        return Err(Error::Dimension {
            context: "realization propagation",
            expected: n,
            actual: if h2.rows() != n { h2.rows() } else { weights.len() },
        });
    }
    Ok(propagate_weighted(
        &weighted(&field.values, weights),
        &h1_column.values,
        h2,
    ))
}

/// Test-arm intensity and reference-arm intensities of one realization.
pub fn propagate_realization(
    field: &SampledField,
    h1_column: &SampledField,
    h2: &impl Kernel,
    weights: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let f = propagate_fields(field, h1_column, h2, weights)?;
    Ok((f.i1(), f.i2()))
}

/// Running means and co-moments over a set of realizations.
#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean_i1: f64,
    mean_i2: Vec<f64>,
    /// `Σ (I1 - mean) (I2 - mean)`.
    comoment: Vec<f64>,
    mean_cross: Vec<Complex64>,
}

impl Moments {
    fn new(cols: usize) -> Self {
        Self {
            count: 0.0,
            mean_i1: 0.0,
            mean_i2: vec![0.0; cols],
            comoment: vec![0.0; cols],
            mean_cross: vec![Complex64::new(0.0, 0.0); cols],
        }
    }

    fn push(&mut self, f: &DetectorFields) {
        self.count += 1.0;
        let n = self.count;
        let i1 = f.i1();
        let d1 = i1 - self.mean_i1;
        self.mean_i1 += d1 / n;
        for (m, e2) in f.e2.iter().enumerate() {
            let i2 = e2.norm_sqr();
            let d2 = i2 - self.mean_i2[m];
            self.mean_i2[m] += d2 / n;
            self.comoment[m] += d1 * (i2 - self.mean_i2[m]);
            let step = (f.e1 * e2.conj() - self.mean_cross[m]) / n;
            self.mean_cross[m] += step;
        }
    }

    fn merge(&mut self, other: &Moments) {
        let (na, nb) = (self.count, other.count);
        let n = na + nb;
        let d1 = other.mean_i1 - self.mean_i1;
        self.mean_i1 += d1 * nb / n;
        for m in 0..self.mean_i2.len() {
            let d2 = other.mean_i2[m] - self.mean_i2[m];
            self.mean_i2[m] += d2 * nb / n;
            self.comoment[m] += other.comoment[m] + d1 * d2 * na * nb / n;
            self.mean_cross[m] = (self.mean_cross[m] * na + other.mean_cross[m] * nb) / n;
        }
        self.count = n;
    }

    fn covariance(&self, m: usize) -> f64 {
        self.comoment[m] / (self.count - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub realization_count: usize,
    pub batch_count: usize,
    pub mean_i1: Estimate,
    pub mean_i2: Vec<Estimate>,
    /// `cov(I1, I2)` per detector point.
    pub delta_g2: Vec<Estimate>,
    /// `<E1 E2*>` per detector point, with standard errors of the real and
    /// imaginary parts.
    pub field_cross: Vec<(Complex64, Estimate, Estimate)>,
}

/// Batch-means standard error.
fn batch_stderr(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0.0, 0.0), |(n, s), v| (n + 1.0, s + v));
    let mean = sum / n;
    let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
    (ss / (n * (n - 1.0))).sqrt()
}

/// Runs the ensemble through the scene's kernels.
///
/// The source grid is not required to meet the chirp sampling criterion:
/// both this estimate and the deterministic sum it is compared with use the
/// same grid, so discretization error is common to both.
pub fn estimate_correlations(spec: &SpeckleEnsembleSpec, scene: &Scene) -> Result<CorrelationEstimate> {
    let violations: Vec<_> = validate_scene(scene)
        .into_iter()
        .filter(|v| v.invariant != Invariant::Sampling)
        .collect();
    if !violations.is_empty() {
        return Err(Error::InvalidScene(violations));
    }
    if spec.grid != scene.source_grid {
        return Err(Error::Dimension {
            context: "ensemble grid vs scene source grid",
            expected: scene.source_grid.len(),
            actual: spec.grid.len(),
        });
    }
    let kernels = build_kernels_with(scene, SourceSampling::Shared)?;
    estimate_with_kernels(spec, &kernels.h1_column, &kernels.h2_matrix)
}

pub fn estimate_with_kernels(
    spec: &SpeckleEnsembleSpec,
    h1_column: &SampledField,
    h2: &KernelMatrix,
) -> Result<CorrelationEstimate> {
    let total = spec.realization_count;
    if total < MIN_REALIZATIONS {
        return Err(Error::parameter(
            "realization_count",
            total,
            format!("at least {MIN_REALIZATIONS} realizations are required"),
        ));
    }
    let rows = spec.grid.len();
    h1_column.expect_len(rows, "test-arm column")?;
    if h2.rows() != rows {
        return Err(Error::Dimension {
            context: "reference kernel rows",
            expected: rows,
            actual: h2.rows(),
        });
    }
    let cols = h2.cols();
    let batches = BATCH_COUNT.min(total / 2);
    let sigmas = spec.node_sigmas();
    let weights = spec.grid.trapezoid_weights();
    // Field scale and quadrature weight folded into one factor per node.
    let scale: Vec<f64> = sigmas.iter().zip(&weights).map(|(s, w)| s * w).collect();
    let ones = vec![1.0; rows];

    let batch_moments: Vec<Moments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * total / batches;
            let end = (b + 1) * total / batches;
            let mut acc = Moments::new(cols);
            let mut field = vec![Complex64::new(0.0, 0.0); rows];
            for index in start..end {
                fill_field(&mut realization_rng(spec.seed, index), &ones, &mut field);
                for (e, s) in field.iter_mut().zip(&scale) {
                    *e *= *s;
                }
                acc.push(&propagate_weighted(&field, &h1_column.values, h2));
            }
            acc
        })
        .collect();

    let mut all = batch_moments[0].clone();
    for b in &batch_moments[1..] {
        all.merge(b);
    }
    let stderr_of = |f: &dyn Fn(&Moments) -> f64| batch_stderr(batch_moments.iter().map(f));

    let mean_i1 = Estimate {
        value: all.mean_i1,
        stderr: stderr_of(&|m| m.mean_i1),
    };
    let mean_i2 = (0..cols)
        .map(|c| Estimate {
            value: all.mean_i2[c],
            stderr: stderr_of(&|m| m.mean_i2[c]),
        })
        .collect();
    let delta_g2 = (0..cols)
        .map(|c| Estimate {
            value: all.covariance(c),
            stderr: stderr_of(&|m| m.covariance(c)),
        })
        .collect();
    let field_cross = (0..cols)
        .map(|c| {
            let v = all.mean_cross[c];
            (
                v,
                Estimate {
                    value: v.re,
                    stderr: stderr_of(&|m| m.mean_cross[c].re),
                },
                Estimate {
                    value: v.im,
                    stderr: stderr_of(&|m| m.mean_cross[c].im),
                },
            )
        })
        .collect();
    Ok(CorrelationEstimate {
        realization_count: total,
        batch_count: batches,
        mean_i1,
        mean_i2,
        delta_g2,
        field_cross,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::profile_from_kernels;
    use crate::scene::default_scene;

    fn coarse() -> Scene {
        default_scene().coarsened(201, 21)
    }

    #[test]
    fn node_statistics() {
        let s = coarse();
        let n = 10_000;
        let spec = SpeckleEnsembleSpec::for_scene(&s, n, 11);
        let sigmas = spec.node_sigmas();
        let nodes = [100usize, 130, 60];
        let fields: Vec<SampledField> = (0..n).map(|i| draw_field(&spec, i).unwrap()).collect();
        for &j in &nodes {
            let var = sigmas[j] * sigmas[j];
            let mean: Complex64 = fields.iter().map(|f| f.values[j]).sum::<Complex64>() / n as f64;
            assert!(mean.norm() < 4.0 * (var / n as f64).sqrt(), "mean at {j}");
            let sample_var: f64 = fields.iter().map(|f| f.values[j].norm_sqr()).sum::<f64>() / n as f64;
            assert!((sample_var / var - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt(), "var at {j}");
        }
        let (a, b) = (nodes[0], nodes[1]);
        let cross: Complex64 = fields
            .iter()
            .map(|f| f.values[a] * f.values[b].conj())
            .sum::<Complex64>()
            / n as f64;
        let scale = sigmas[a] * sigmas[b] / (n as f64).sqrt();
        assert!(cross.norm() < 4.0 * scale);
    }

    #[test]
    fn draws_are_keyed_by_seed_and_index() {
        let s = coarse();
        let spec = SpeckleEnsembleSpec::for_scene(&s, 10, 5);
        let a = draw_field(&spec, 3).unwrap();
        assert_eq!(a, draw_field(&spec, 3).unwrap());
        assert_ne!(a, draw_field(&spec, 4).unwrap());
        let other = SpeckleEnsembleSpec { seed: 6, ..spec };
        assert_ne!(a, draw_field(&other, 3).unwrap());
        assert!(draw_field(&spec, 10).is_err());
    }

    #[test]
    fn propagation_of_simple_fields() {
        let s = coarse();
        let k = build_kernels_with(&s, SourceSampling::Shared).unwrap();
        let w = s.source_grid.trapezoid_weights();
        let n = s.source_grid.len();
        let zero = SampledField::new(s.source_grid, vec![Complex64::new(0.0, 0.0); n]);
        let (i1, i2) = propagate_realization(&zero, &k.h1_column, &k.h2_matrix, &w).unwrap();
        assert_eq!(i1, 0.0);
        assert!(i2.iter().all(|v| *v == 0.0));

        let spec = SpeckleEnsembleSpec::for_scene(&s, 1, 3);
        let f = draw_field(&spec, 0).unwrap();
        let c = Complex64::new(0.3, -1.2);
        let scaled = SampledField::new(f.grid, f.values.iter().map(|v| v * c).collect());
        let (a1, a2) = propagate_realization(&f, &k.h1_column, &k.h2_matrix, &w).unwrap();
        let (b1, b2) = propagate_realization(&scaled, &k.h1_column, &k.h2_matrix, &w).unwrap();
        assert!((b1 - c.norm_sqr() * a1).abs() < 1e-12 * b1);
        for (x, y) in a2.iter().zip(&b2) {
            assert!((y - c.norm_sqr() * x).abs() < 1e-12 * y);
        }

        let mut point = zero.clone();
        let j0 = 70;
        point.values[j0] = Complex64::new(1.0, 0.0);
        let (_, i2) = propagate_realization(&point, &k.h1_column, &k.h2_matrix, &w).unwrap();
        let dx = s.source_grid.step();
        let expect = (dx / (s.layout.wavelength_m * s.layout.z_m)).powi(2);
        for v in i2 {
            assert!((v - expect).abs() < 1e-12 * expect);
        }
        assert!(propagate_realization(&point, &k.h1_column, &k.h2_matrix, &w[1..]).is_err());
    }

    #[test]
    fn estimate_agrees_with_deterministic_sums() {
        let s = coarse();
        let spec = SpeckleEnsembleSpec::for_scene(&s, 4000, 2024);
        let est = estimate_correlations(&spec, &s).unwrap();
        let k = build_kernels_with(&s, SourceSampling::Shared).unwrap();
        let p = profile_from_kernels(&s, &k.h1_column, &k.h2_matrix).unwrap();
        let within = |e: &Estimate, target: f64| (e.value - target).abs() <= 4.0 * e.stderr;
        assert!(within(&est.mean_i1, p.mean_intensity_test));
        let hits = (0..p.len())
            .filter(|&m| within(&est.delta_g2[m], p.delta_g2[m]))
            .count();
        assert!(hits as f64 >= 0.9 * p.len() as f64, "{hits}/{}", p.len());
        let flat = (0..p.len())
            .filter(|&m| within(&est.mean_i2[m], p.mean_intensity_ref[m]))
            .count();
        assert!(flat as f64 >= 0.9 * p.len() as f64);
        assert!(est.delta_g2.iter().all(|e| e.stderr > 0.0));
    }

    #[test]
    fn fourth_moment_factorizes() {
        let s = coarse();
        let spec = SpeckleEnsembleSpec::for_scene(&s, 4000, 77);
        let est = estimate_correlations(&spec, &s).unwrap();
        let mut hits = 0;
        for (cov, (cross, re, im)) in est.delta_g2.iter().zip(&est.field_cross) {
            let gap = cov.value - cross.norm_sqr();
            let cross_err = 2.0 * (re.value.abs() * re.stderr + im.value.abs() * im.stderr);
            if gap.abs() <= 4.0 * (cov.stderr + cross_err) {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.9 * est.delta_g2.len() as f64, "{hits}");
    }

    #[test]
    fn stderr_shrinks_with_ensemble_size() {
        let s = coarse();
        let median = |n: usize| {
            let est = estimate_correlations(&SpeckleEnsembleSpec::for_scene(&s, n, 9), &s).unwrap();
            let mut e: Vec<f64> = est.delta_g2.iter().map(|e| e.stderr).collect();
            e.sort_by(f64::total_cmp);
            e[e.len() / 2]
        };
        let ratio = median(8000) / median(4000);
        assert!((ratio - 0.5f64.sqrt()).abs() <= 0.15 * 0.5f64.sqrt(), "{ratio}");
    }

    #[test]
    fn estimates_are_reproducible() {
        let s = coarse();
        let spec = SpeckleEnsembleSpec::for_scene(&s, 500, 1);
        let a = estimate_correlations(&spec, &s).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| estimate_correlations(&spec, &s).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_ensembles_are_refused() {
        let s = coarse();
        let spec = SpeckleEnsembleSpec::for_scene(&s, 3, 1);
        assert!(estimate_correlations(&spec, &s).is_err());
        let wrong_grid = SpeckleEnsembleSpec::for_scene(&default_scene(), 100, 1);
        assert!(estimate_correlations(&wrong_grid, &s).is_err());
    }
}
