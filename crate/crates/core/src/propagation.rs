//! Fresnel impulse responses of the two arms.
//!
//! Reference arm: free space over `z`,
//! `h2(x, u) = e^{-ikz}/(iλz) · exp[-iπ(u - x)²/(λz)]`.
//!
//! Test arm: free space over `z1`, the mask `t(x')`, free space over `z2`,
//! integrated over the object plane. Expanding both chirps,
//!
//! ```text
//! h1(x, u1) = P1 P2 e^{iΦ0} Σ_slits ∫ e^{-iαx'²} e^{iκx'} t dx'
//! α  = π (1/z1 + 1/z2) / λ
//! κ  = 2π (x/z1 + u1/z2) / λ
//! Φ0 = -π (x²/z1 + u1²/z2) / λ
//! ```
//!
//! The linear phase `κx'` carries almost all of the oscillation, so the
//! object integral uses the Filon-type rule of [`crate::quadrature`] with
//! slit edges inserted as nodes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::grid::Grid1D;
use crate::quadrature;
use crate::scene::{OpticalLayout, Scene};

/// Maximum admissible phase change per grid step: π with a safety factor of 4.
pub const NYQUIST_LIMIT: f64 = PI / 4.0;

/// `e^{-ikd} / (iλd)`.
pub fn fresnel_prefactor(layout: &OpticalLayout, distance: f64) -> Complex64 {
    let k = layout.wavenumber_rad_per_m();
    Complex64::cis(-k * distance) / Complex64::new(0.0, layout.wavelength_m * distance)
}

#[inline]
fn free_space_with(prefactor: Complex64, chirp_rate: f64, x: f64, u: f64) -> Complex64 {
    let s = u - x;
    prefactor * Complex64::cis(-chirp_rate * s * s)
}

/// Paraxial free-space impulse response over `distance`.
pub fn free_space_response(layout: &OpticalLayout, x: f64, u: f64, distance: f64) -> Result<Complex64> {
    if !(distance > 0.0) {
        return Err(Error::parameter("distance", distance, "must be positive"));
    }
    let rate = PI / (layout.wavelength_m * distance);
    Ok(free_space_with(fresnel_prefactor(layout, distance), rate, x, u))
}

/// Relative error budget of the object-plane quadrature.
pub const OBJECT_QUADRATURE_TOLERANCE: f64 = 1e-6;

/// Largest object-plane step for which linear interpolation of the
/// per-slit chirp `e^{-iα(x' - c)²}` stays within
/// [`OBJECT_QUADRATURE_TOLERANCE`]: `|g''| h² / 12 <= tol`, with
/// `|g''| <= 2α + (αω)²` across a slit of width `ω`.
pub fn object_accuracy_step(layout: &OpticalLayout, slit_width_m: f64) -> f64 {
    let alpha = PI * (1.0 / layout.z1_m + 1.0 / layout.z2_m) / layout.wavelength_m;
    let curvature = 2.0 * alpha + (alpha * slit_width_m).powi(2);
    (12.0 * OBJECT_QUADRATURE_TOLERANCE / curvature).sqrt()
}

/// Local chirp frequencies (rad/m) bounding the integrands on each
/// integration grid, given the half-extents of the source, object and
/// detector domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGradients {
    pub source_rad_per_m: f64,
    pub object_rad_per_m: f64,
}

impl PhaseGradients {
    pub fn new(
        layout: &OpticalLayout,
        source_half: f64,
        object_half: f64,
        detector_half: f64,
        u1: f64,
    ) -> Self {
        let OpticalLayout {
            wavelength_m: lambda,
            z_m: z,
            z1_m: z1,
            z2_m: z2,
            ..
        } = *layout;
        let scale = 2.0 * PI / lambda;
        // Source plane: phase of h1(x)·h2*(x, u) is (x'-x)²/z1 - (u-x)²/z.
        let source = scale
            * (source_half * (1.0 / z1 - 1.0 / z).abs() + object_half / z1 + detector_half / z);
        // Object plane: phase (x'-x)²/z1 + (u1-x')²/z2.
        let object = scale * (object_half * (1.0 / z1 + 1.0 / z2) + source_half / z1 + u1.abs() / z2);
        Self {
            source_rad_per_m: source,
            object_rad_per_m: object,
        }
    }

    pub fn for_scene(scene: &Scene) -> Self {
        Self::new(
            &scene.layout,
            scene.source_grid.half_extent_m,
            scene.object_grid.half_extent_m,
            scene.detector_grid.half_extent_m,
            scene.u1_m,
        )
    }
}

/// Worst phase change per step on the two integration grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseStepBound {
    pub source: f64,
    pub object: f64,
}

impl PhaseStepBound {
    pub fn max(&self) -> f64 {
        self.source.max(self.object)
    }

    fn check(&self, scene: &Scene, include_source: bool) -> Result<()> {
        if !(self.object <= NYQUIST_LIMIT) {
            return Err(Error::Nyquist {
                grid: "object",
                step_m: scene.object_grid.step(),
                phase_per_step: self.object,
                limit: NYQUIST_LIMIT,
            });
        }
        if include_source && !(self.source <= NYQUIST_LIMIT) {
            return Err(Error::Nyquist {
                grid: "source",
                step_m: scene.source_grid.step(),
                phase_per_step: self.source,
                limit: NYQUIST_LIMIT,
            });
        }
        Ok(())
    }
}

/// `|dφ/dx|·Δx` maximized over the grid edges for every quadratic phase the
/// quadratures integrate. The detector grid is an output grid and is not
/// integrated over.
pub fn chirp_phase_gradient_bound(scene: &Scene) -> PhaseStepBound {
    let g = PhaseGradients::for_scene(scene);
    PhaseStepBound {
        source: g.source_rad_per_m * scene.source_grid.step(),
        object: g.object_rad_per_m * scene.object_grid.step(),
    }
}

struct SlitNodes {
    /// `e^{iαc²}` for slit center `c`.
    center_phase: Complex64,
    /// `2αc`, removed from the linear rate.
    rate_shift: f64,
    left: f64,
    right: f64,
    slow_left: Complex64,
    slow_right: Complex64,
    interior: Vec<f64>,
    slow_interior: Vec<Complex64>,
}

/// Precomputed object-plane nodes for evaluating `h1(x, u1)` at many `x`.
pub struct TestArmIntegrator {
    layout: OpticalLayout,
    prefactor: Complex64,
    object_grid: Grid1D,
    alpha: f64,
    slits: Vec<SlitNodes>,
}

impl TestArmIntegrator {
    pub fn new(scene: &Scene) -> Self {
        let layout = scene.layout;
        let OpticalLayout {
            wavelength_m: lambda,
            z1_m: z1,
            z2_m: z2,
            ..
        } = layout;
        let alpha = PI * (1.0 / z1 + 1.0 / z2) / lambda;
        let prefactor = fresnel_prefactor(&layout, z1)
            * fresnel_prefactor(&layout, z2)
            * scene.mask.amplitude;

        let grid = scene.object_grid;
        let positions = grid.positions();
        let slits = scene
            .mask
            .open_intervals()
            .into_iter()
            .map(|(left, right)| {
                // -αx'² = αc² - 2αc x' - α(x' - c)²
                let c = 0.5 * (left + right);
                let slow = |x: f64| Complex64::cis(-alpha * (x - c) * (x - c));
                let interior: Vec<f64> = positions
                    .iter()
                    .copied()
                    .filter(|&x| x > left && x < right)
                    .collect();
                SlitNodes {
                    center_phase: Complex64::cis(alpha * c * c),
                    rate_shift: 2.0 * alpha * c,
                    left,
                    right,
                    slow_left: slow(left),
                    slow_right: slow(right),
                    slow_interior: interior.iter().map(|&x| slow(x)).collect(),
                    interior,
                }
            })
            .collect();
        Self {
            layout,
            prefactor,
            object_grid: grid,
            alpha,
            slits,
        }
    }

    fn linear_rate(&self, x: f64, u1: f64) -> f64 {
        2.0 * PI * (x / self.layout.z1_m + u1 / self.layout.z2_m) / self.layout.wavelength_m
    }

    /// Worst phase step on the object grid for this `(x, u1)` pair.
    pub fn phase_step(&self, x: f64, u1: f64) -> f64 {
        let h = self.object_grid.half_extent_m;
        (2.0 * self.alpha * h + self.linear_rate(x, u1).abs()) * self.object_grid.step()
    }

    /// `h1(x, u1)` without the sampling check.
    pub fn evaluate(&self, x: f64, u1: f64) -> Complex64 {
        let kappa = self.linear_rate(x, u1);
        let step = self.object_grid.step();
        let mut sum = Complex64::new(0.0, 0.0);
        for s in &self.slits {
            let kappa = kappa - s.rate_shift;
            sum += s.center_phase * match (s.interior.first(), s.interior.last()) {
                (Some(&first), Some(&last)) => {
                    let g_first = s.slow_interior[0];
                    let g_last = s.slow_interior[s.slow_interior.len() - 1];
                    quadrature::cell(s.left, first, s.slow_left, g_first, kappa)
                        + quadrature::integrate_uniform(&s.interior, &s.slow_interior, step, kappa)
                        + quadrature::cell(last, s.right, g_last, s.slow_right, kappa)
                }
                _ => quadrature::cell(s.left, s.right, s.slow_left, s.slow_right, kappa),
            };
        }
        let l = &self.layout;
        let phase0 = -PI * (x * x / l.z1_m + u1 * u1 / l.z2_m) / l.wavelength_m;
        self.prefactor * Complex64::cis(phase0) * sum
    }

    pub fn response(&self, x: f64, u1: f64) -> Result<Complex64> {
        let phase = self.phase_step(x, u1);
        if !(phase <= NYQUIST_LIMIT) {
            return Err(Error::Nyquist {
                grid: "object",
                step_m: self.object_grid.step(),
                phase_per_step: phase,
                limit: NYQUIST_LIMIT,
            });
        }
        Ok(self.evaluate(x, u1))
    }
}

/// Test-arm impulse response `h1(x, u1)` through the scene's mask.
pub fn test_arm_response(scene: &Scene, x: f64, u1: f64) -> Result<Complex64> {
    TestArmIntegrator::new(scene).response(x, u1)
}

/// `h1(x_j, u1)` over the source grid.
pub fn test_arm_column(scene: &Scene) -> Result<SampledField> {
    let integrator = TestArmIntegrator::new(scene);
    let edge = scene.source_grid.half_extent_m;
    let worst = integrator
        .phase_step(edge, scene.u1_m)
        .max(integrator.phase_step(-edge, scene.u1_m));
    if !(worst <= NYQUIST_LIMIT) {
        return Err(Error::Nyquist {
            grid: "object",
            step_m: scene.object_grid.step(),
            phase_per_step: worst,
            limit: NYQUIST_LIMIT,
        });
    }
    let grid = scene.source_grid;
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|j| integrator.evaluate(grid.position(j), scene.u1_m))
        .collect();
    Ok(SampledField::new(grid, values))
}

/// A kernel `h(x_j, u_m)` over a source grid (rows) and detector grid (columns).
///
/// Column reductions visit rows in index order, so any two kernels with
/// equal columns give bitwise equal sums.
pub trait Kernel: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn entry(&self, row: usize, col: usize) -> Complex64;

    /// Calls `f(j, h(x_j, u_col))` for every row in order.
    fn for_each_in_column<F: FnMut(usize, Complex64)>(&self, col: usize, mut f: F) {
        for j in 0..self.rows() {
            f(j, self.entry(j, col));
        }
    }

    /// `Σ_j a_j · h(x_j, u_col)`.
    fn dot_column(&self, col: usize, a: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        self.for_each_in_column(col, |j, h| acc += a[j] * h);
        acc
    }

    /// `Σ_j a_j · conj(h(x_j, u_col))`.
    fn conj_dot_column(&self, col: usize, a: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        self.for_each_in_column(col, |j, h| acc += a[j] * h.conj());
        acc
    }

    /// `Σ_j w_j |h(x_j, u_col)|²`.
    fn weighted_norm_column(&self, col: usize, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each_in_column(col, |j, h| acc += w[j] * h.norm_sqr());
        acc
    }

    /// [`Kernel::conj_dot_column`] and [`Kernel::weighted_norm_column`] in one pass.
    fn column_moments(&self, col: usize, a: &[Complex64], w: &[f64]) -> (Complex64, f64) {
        let mut cross = Complex64::new(0.0, 0.0);
        let mut norm = 0.0;
        self.for_each_in_column(col, |j, h| {
            cross += a[j] * h.conj();
            norm += w[j] * h.norm_sqr();
        });
        (cross, norm)
    }
}

/// Rows between exact re-evaluations of the phase recurrence.
const KERNEL_ANCHOR: usize = 64;

/// Free-space kernel evaluated on demand.
///
/// Along a column the phase `-r (u - x_j)²` has a constant second
/// difference on the uniform row grid, so consecutive entries follow from
/// two complex multiplications. Every [`KERNEL_ANCHOR`] rows the entry is
/// recomputed exactly, which bounds the accumulated rounding.
#[derive(Debug, Clone)]
pub struct FreeSpaceKernel {
    pub row_grid: Grid1D,
    pub col_grid: Grid1D,
    prefactor: Complex64,
    chirp_rate: f64,
}

impl FreeSpaceKernel {
    pub fn new(layout: &OpticalLayout, row_grid: Grid1D, col_grid: Grid1D, distance: f64) -> Result<Self> {
        if !(distance > 0.0) {
            return Err(Error::parameter("distance", distance, "must be positive"));
        }
        Ok(Self {
            row_grid,
            col_grid,
            prefactor: fresnel_prefactor(layout, distance),
            chirp_rate: PI / (layout.wavelength_m * distance),
        })
    }

    pub fn reference_arm(scene: &Scene) -> Result<Self> {
        Self::new(&scene.layout, scene.source_grid, scene.detector_grid, scene.layout.z_m)
    }

    pub fn modulus(&self) -> f64 {
        self.prefactor.norm()
    }
}

impl Kernel for FreeSpaceKernel {
    fn rows(&self) -> usize {
        self.row_grid.len()
    }

    fn cols(&self) -> usize {
        self.col_grid.len()
    }

    #[inline]
    fn entry(&self, row: usize, col: usize) -> Complex64 {
        free_space_with(
            self.prefactor,
            self.chirp_rate,
            self.row_grid.position(row),
            self.col_grid.position(col),
        )
    }

    fn for_each_in_column<F: FnMut(usize, Complex64)>(&self, col: usize, mut f: F) {
        let rows = self.rows();
        let u = self.col_grid.position(col);
        let dx = self.row_grid.step();
        let r = self.chirp_rate;
        // φ_{k+1} - φ_k = r (2 s_k dx - dx²) with s_k = u - x_k.
        let curvature = Complex64::cis(-2.0 * r * dx * dx);
        let mut start = 0;
        while start < rows {
            let end = (start + KERNEL_ANCHOR).min(rows);
            let s0 = u - self.row_grid.position(start);
            let mut value = self.entry(start, col);
            let mut advance = Complex64::cis(r * (2.0 * s0 * dx - dx * dx));
            for j in start..end {
                f(j, value);
                value *= advance;
                advance *= curvature;
            }
            start = end;
        }
    }
}

/// Dense kernel, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub row_grid: Grid1D,
    pub col_grid: Grid1D,
    entries: Vec<Complex64>,
}

impl KernelMatrix {
    pub fn from_kernel(kernel: &(impl Kernel + HasGrids)) -> Self {
        let (rows, cols) = (kernel.rows(), kernel.cols());
        let columns: Vec<Vec<Complex64>> = (0..cols)
            .into_par_iter()
            .map(|m| {
                let mut column = Vec::with_capacity(rows);
                kernel.for_each_in_column(m, |_, h| column.push(h));
                column
            })
            .collect();
        Self {
            row_grid: kernel.row_grid(),
            col_grid: kernel.col_grid(),
            entries: columns.concat(),
        }
    }

    pub fn column(&self, col: usize) -> &[Complex64] {
        let rows = self.row_grid.len();
        &self.entries[col * rows..(col + 1) * rows]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }
}

pub trait HasGrids {
    fn row_grid(&self) -> Grid1D;
    fn col_grid(&self) -> Grid1D;
}

impl HasGrids for FreeSpaceKernel {
    fn row_grid(&self) -> Grid1D {
        self.row_grid
    }
    fn col_grid(&self) -> Grid1D {
        self.col_grid
    }
}

impl Kernel for KernelMatrix {
    fn rows(&self) -> usize {
        self.row_grid.len()
    }

    fn cols(&self) -> usize {
        self.col_grid.len()
    }

    #[inline]
    fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[col * self.row_grid.len() + row]
    }

    fn for_each_in_column<F: FnMut(usize, Complex64)>(&self, col: usize, mut f: F) {
        for (j, &h) in self.column(col).iter().enumerate() {
            f(j, h);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSampling {
    /// Reject source grids that fail the chirp sampling criterion.
    Checked,
    /// Accept any source grid. Only for comparisons that share the grid.
    Shared,
}

#[derive(Debug, Clone)]
pub struct Kernels {
    pub h1_column: SampledField,
    pub h2_matrix: KernelMatrix,
}

/// `h1` over the source grid at `u1`, and the dense `h2` matrix over
/// source × detector grids.
pub fn build_kernels(scene: &Scene) -> Result<Kernels> {
    build_kernels_with(scene, SourceSampling::Checked)
}

pub fn build_kernels_with(scene: &Scene, sampling: SourceSampling) -> Result<Kernels> {
    chirp_phase_gradient_bound(scene).check(scene, sampling == SourceSampling::Checked)?;
    let h1_column = test_arm_column(scene)?;
    let h2_matrix = KernelMatrix::from_kernel(&FreeSpaceKernel::reference_arm(scene)?);
    Ok(Kernels {
        h1_column,
        h2_matrix,
    })
}

/// Fails when either integration grid undersamples its chirp.
pub fn check_sampling(scene: &Scene) -> Result<()> {
    chirp_phase_gradient_bound(scene).check(scene, true)
}
