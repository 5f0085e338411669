//! Optical bench: source, geometry, multi-slit object, detector positions and
//! the discretization grids used by the quadratures.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::grid::Grid1D;
use crate::propagation::{self, PhaseGradients, NYQUIST_LIMIT};

/// Source grid half-extent in units of the source size `a`.
pub const SOURCE_COVERAGE: f64 = 4.0;
/// Object grid half-extent relative to the mask support half-width.
pub const OBJECT_MARGIN: f64 = 1.2;
pub const DEFAULT_DETECTOR_HALFSPAN_M: f64 = 1.5e-3;
pub const DEFAULT_DETECTOR_POINTS: usize = 601;

/// Wavelength and propagation distances. `z_m` is the source to reference
/// detector distance, `z1_m` source to object, `z2_m` object to test detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalLayout {
    pub wavelength_m: f64,
    pub z_m: f64,
    pub z1_m: f64,
    pub z2_m: f64,
    /// Set when `z2_m` was derived as `z_m - z1_m`; validation then checks the identity.
    pub equal_arm_lengths: bool,
}

impl OpticalLayout {
    /// Test detector in the reference detector plane: `z2 = z - z1`.
    pub fn equal_arms(wavelength_m: f64, z_m: f64, z1_m: f64) -> Self {
        Self {
            wavelength_m,
            z_m,
            z1_m,
            z2_m: z_m - z1_m,
            equal_arm_lengths: true,
        }
    }

    pub fn independent(wavelength_m: f64, z_m: f64, z1_m: f64, z2_m: f64) -> Self {
        Self {
            wavelength_m,
            z_m,
            z1_m,
            z2_m,
            equal_arm_lengths: false,
        }
    }

    pub fn wavenumber_rad_per_m(&self) -> f64 {
        2.0 * PI / self.wavelength_m
    }
}

/// Delta-correlated source with a Gaussian intensity envelope:
/// `<E(x1) E*(x2)> = g0 exp(-(x1² + x2²) / 4a²) δ(x1 - x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub g0: f64,
    pub a_m: f64,
}

impl SourceModel {
    /// Diagonal of the source correlation, `g0 exp(-x² / 2a²)`.
    #[inline]
    pub fn diagonal(&self, x: f64) -> f64 {
        self.g0 * (-x * x / (2.0 * self.a_m * self.a_m)).exp()
    }
}

/// `n` identical slits of width `ω`, centers spaced by `d`, placed
/// symmetrically about the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionMask {
    pub slit_count: usize,
    pub slit_width_m: f64,
    pub slit_pitch_m: f64,
    pub amplitude: f64,
}

impl TransmissionMask {
    pub fn new(slit_count: usize, slit_width_m: f64, slit_pitch_m: f64) -> Self {
        Self {
            slit_count,
            slit_width_m,
            slit_pitch_m,
            amplitude: 1.0,
        }
    }

    /// Slit centers `(k - (n-1)/2) d`; mirror pairs are exact negatives.
    pub fn centers(&self) -> Vec<f64> {
        let mid = (self.slit_count as f64 - 1.0) / 2.0;
        (0..self.slit_count)
            .map(|k| (k as f64 - mid) * self.slit_pitch_m)
            .collect()
    }

    /// Open intervals `[c - ω/2, c + ω/2]`, left to right.
    pub fn open_intervals(&self) -> Vec<(f64, f64)> {
        let half = 0.5 * self.slit_width_m;
        self.centers()
            .into_iter()
            .map(|c| (c - half, c + half))
            .collect()
    }

    pub fn support_half_width(&self) -> f64 {
        (self.slit_count as f64 - 1.0) * self.slit_pitch_m / 2.0 + self.slit_width_m / 2.0
    }

    pub fn open_length(&self) -> f64 {
        self.slit_count as f64 * self.slit_width_m
    }

    /// `t(x')`; slit edges count as open.
    pub fn transmission(&self, x: f64) -> f64 {
        let half = 0.5 * self.slit_width_m;
        let mid = (self.slit_count as f64 - 1.0) / 2.0;
        let open = (0..self.slit_count).any(|k| {
            let c = (k as f64 - mid) * self.slit_pitch_m;
            (x - c).abs() <= half
        });
        if open {
            self.amplitude
        } else {
            0.0
        }
    }

    pub fn width_ratio(&self) -> f64 {
        self.slit_width_m / self.slit_pitch_m
    }
}

/// User-facing scene parameters in SI units. Grids are derived from these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub wavelength_m: f64,
    pub z_m: f64,
    pub z1_m: f64,
    /// `None` places the test detector at `z - z1` behind the object.
    pub z2_m: Option<f64>,
    pub a_m: f64,
    pub g0: f64,
    pub slit_count: usize,
    pub slit_width_m: f64,
    pub slit_pitch_m: f64,
    pub amplitude: f64,
    pub u1_m: f64,
    pub detector_halfspan_m: f64,
    pub detector_points: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            wavelength_m: 532e-9,
            z_m: 175e-3,
            z1_m: 75e-3,
            z2_m: None,
            a_m: 1e-3,
            g0: 1.0,
            slit_count: 2,
            slit_width_m: 0.075e-3,
            slit_pitch_m: 0.15e-3,
            amplitude: 1.0,
            u1_m: 0.0,
            detector_halfspan_m: DEFAULT_DETECTOR_HALFSPAN_M,
            detector_points: DEFAULT_DETECTOR_POINTS,
        }
    }
}

impl SceneParams {
    pub fn layout(&self) -> OpticalLayout {
        match self.z2_m {
            None => OpticalLayout::equal_arms(self.wavelength_m, self.z_m, self.z1_m),
            Some(z2) => OpticalLayout::independent(self.wavelength_m, self.z_m, self.z1_m, z2),
        }
    }

    pub fn mask(&self) -> TransmissionMask {
        TransmissionMask {
            slit_count: self.slit_count,
            slit_width_m: self.slit_width_m,
            slit_pitch_m: self.slit_pitch_m,
            amplitude: self.amplitude,
        }
    }

    pub fn source(&self) -> SourceModel {
        SourceModel {
            g0: self.g0,
            a_m: self.a_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub layout: OpticalLayout,
    pub source: SourceModel,
    pub mask: TransmissionMask,
    pub source_grid: Grid1D,
    pub object_grid: Grid1D,
    pub detector_grid: Grid1D,
    pub u1_m: f64,
}

/// λ = 532 nm, z = 175 mm, z1 = 75 mm, z2 = 100 mm, a = 1 mm, double slit
/// with ω = 0.075 mm and d = 0.15 mm, test detector on axis.
pub fn default_scene() -> Scene {
    Scene::from_params(&SceneParams::default()).expect("default parameters are valid")
}

impl Scene {
    /// Builds the scene with grids sized from the chirp sampling criterion
    /// and rejects it if any invariant fails.
    pub fn from_params(params: &SceneParams) -> Result<Self> {
        let scene = Self::assemble(params);
        let violations = validate_scene(&scene);
        if violations.is_empty() {
            Ok(scene)
        } else {
            Err(Error::InvalidScene(violations))
        }
    }

    /// Builds the scene without validation. Grids fall back to a minimal
    /// shape when the parameters are too broken to size them.
    pub fn assemble(params: &SceneParams) -> Self {
        let layout = params.layout();
        let source = params.source();
        let mask = params.mask();
        let detector_grid = Grid1D::new(params.detector_halfspan_m, params.detector_points);
        let source_half = SOURCE_COVERAGE * source.a_m;
        let object_half = OBJECT_MARGIN * mask.support_half_width();
        let gradients = PhaseGradients::new(
            &layout,
            source_half,
            object_half,
            detector_grid.half_extent_m,
            params.u1_m,
        );
        let grid_for = |half: f64, gradient: f64| {
            let step = NYQUIST_LIMIT / gradient;
            if half.is_finite() && half > 0.0 && step.is_finite() && step > 0.0 && 2.0 * half / step < 1e9 {
                Grid1D::with_max_step(half, step)
            } else {
                Grid1D::new(half, 3)
            }
        };
        Scene {
            layout,
            source,
            mask,
            source_grid: grid_for(source_half, gradients.source_rad_per_m),
            object_grid: grid_for(
                object_half,
                gradients
                    .object_rad_per_m
                    .max(NYQUIST_LIMIT / propagation::object_accuracy_step(&layout, mask.slit_width_m)),
            ),
            detector_grid,
            u1_m: params.u1_m,
        }
    }

    pub fn params(&self) -> SceneParams {
        SceneParams {
            wavelength_m: self.layout.wavelength_m,
            z_m: self.layout.z_m,
            z1_m: self.layout.z1_m,
            z2_m: if self.layout.equal_arm_lengths {
                None
            } else {
                Some(self.layout.z2_m)
            },
            a_m: self.source.a_m,
            g0: self.source.g0,
            slit_count: self.mask.slit_count,
            slit_width_m: self.mask.slit_width_m,
            slit_pitch_m: self.mask.slit_pitch_m,
            amplitude: self.mask.amplitude,
            u1_m: self.u1_m,
            detector_halfspan_m: self.detector_grid.half_extent_m,
            detector_points: self.detector_grid.sample_count,
        }
    }

    /// All three grids with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            source_grid: self.source_grid.refined(factor),
            object_grid: self.object_grid.refined(factor),
            detector_grid: self.detector_grid.refined(factor),
            ..self.clone()
        }
    }

    /// Same physics on a coarser source grid and detector grid. The source
    /// grid then generally fails the sampling criterion; only comparisons
    /// that share this discretization are meaningful.
    pub fn coarsened(&self, source_points: usize, detector_points: usize) -> Self {
        Self {
            source_grid: self.source_grid.resampled(source_points),
            detector_grid: self.detector_grid.resampled(detector_points),
            ..self.clone()
        }
    }
}

/// Samples `t(x')` on `grid`.
pub fn sample_mask(mask: &TransmissionMask, grid: &Grid1D) -> Result<SampledField<f64>> {
    let support = mask.support_half_width();
    if support > grid.half_extent_m {
        return Err(Error::GridTooSmall {
            half_extent_m: grid.half_extent_m,
            support_m: support,
        });
    }
    let values = grid
        .positions()
        .into_iter()
        .map(|x| mask.transmission(x))
        .collect();
    Ok(SampledField::new(*grid, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    Wavelength,
    Distance,
    ObjectBeforeReferencePlane,
    EqualArmLengths,
    SourceNormalization,
    SourceSize,
    SlitCount,
    SlitGeometry,
    SlitOverlap,
    Amplitude,
    GridShape,
    ObjectCoverage,
    SourceCoverage,
    Sampling,
    DetectorPosition,
}

impl Invariant {
    pub fn name(self) -> &'static str {
        match self {
            Invariant::Wavelength => "wavelength > 0",
            Invariant::Distance => "propagation distances > 0",
            Invariant::ObjectBeforeReferencePlane => "z1 < z",
            Invariant::EqualArmLengths => "z2 = z - z1",
            Invariant::SourceNormalization => "g0 > 0",
            Invariant::SourceSize => "a > 0",
            Invariant::SlitCount => "slit count >= 1",
            Invariant::SlitGeometry => "slit width and pitch > 0",
            Invariant::SlitOverlap => "slit width < pitch",
            Invariant::Amplitude => "amplitude in [0, 1]",
            Invariant::GridShape => "grid has >= 2 samples and positive extent",
            Invariant::ObjectCoverage => "object grid covers mask support",
            Invariant::SourceCoverage => "source grid covers 4a",
            Invariant::Sampling => "chirp phase step <= pi/4",
            Invariant::DetectorPosition => "detector positions finite",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub invariant: Invariant,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant.name(), self.detail)
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// Checks every scene invariant and returns all violations found.
pub fn validate_scene(scene: &Scene) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |invariant, detail: String| out.push(Violation { invariant, detail });

    let l = &scene.layout;
    if !positive(l.wavelength_m) {
        push(Invariant::Wavelength, format!("wavelength = {} m", l.wavelength_m));
    }
    for (name, v) in [("z", l.z_m), ("z1", l.z1_m), ("z2", l.z2_m)] {
        if !positive(v) {
            push(Invariant::Distance, format!("{name} = {v} m"));
        }
    }
    if !(l.z1_m < l.z_m) {
        push(
            Invariant::ObjectBeforeReferencePlane,
            format!("z1 = {} m, z = {} m", l.z1_m, l.z_m),
        );
    }
    if l.equal_arm_lengths && l.z2_m != l.z_m - l.z1_m {
        push(
            Invariant::EqualArmLengths,
            format!("z2 = {} m but z - z1 = {} m", l.z2_m, l.z_m - l.z1_m),
        );
    }

    let s = &scene.source;
    if !positive(s.g0) {
        push(Invariant::SourceNormalization, format!("g0 = {}", s.g0));
    }
    if !positive(s.a_m) {
        push(Invariant::SourceSize, format!("a = {} m", s.a_m));
    }

    let m = &scene.mask;
    if m.slit_count < 1 {
        push(Invariant::SlitCount, format!("n = {}", m.slit_count));
    }
    if !positive(m.slit_width_m) || !positive(m.slit_pitch_m) {
        push(
            Invariant::SlitGeometry,
            format!("width = {} m, pitch = {} m", m.slit_width_m, m.slit_pitch_m),
        );
    }
    if m.slit_count >= 2 && !(m.slit_width_m < m.slit_pitch_m) {
        push(
            Invariant::SlitOverlap,
            format!(
                "width = {} m >= pitch = {} m with n = {}",
                m.slit_width_m, m.slit_pitch_m, m.slit_count
            ),
        );
    }
    if !(0.0..=1.0).contains(&m.amplitude) {
        push(Invariant::Amplitude, format!("amplitude = {}", m.amplitude));
    }

    let grids = [
        ("source", &scene.source_grid),
        ("object", &scene.object_grid),
        ("detector", &scene.detector_grid),
    ];
    let mut grids_ok = true;
    for (name, g) in grids {
        if !g.is_well_formed() {
            grids_ok = false;
            push(
                Invariant::GridShape,
                format!(
                    "{name} grid: {} samples over +/-{} m",
                    g.sample_count, g.half_extent_m
                ),
            );
        }
    }
    let support = m.support_half_width();
    if support > scene.object_grid.half_extent_m {
        push(
            Invariant::ObjectCoverage,
            format!(
                "half-extent {} m < support {} m",
                scene.object_grid.half_extent_m, support
            ),
        );
    }
    let needed = SOURCE_COVERAGE * s.a_m;
    if scene.source_grid.half_extent_m < needed {
        push(
            Invariant::SourceCoverage,
            format!(
                "half-extent {} m < 4a = {} m",
                scene.source_grid.half_extent_m, needed
            ),
        );
    }
    if !scene.u1_m.is_finite() {
        push(Invariant::DetectorPosition, format!("u1 = {}", scene.u1_m));
    }

    let physical_ok = positive(l.wavelength_m) && positive(l.z_m) && positive(l.z1_m) && positive(l.z2_m);
    if grids_ok && physical_ok {
        let bound = propagation::chirp_phase_gradient_bound(scene);
        for (name, phase) in [("source", bound.source), ("object", bound.object)] {
            if !(phase <= NYQUIST_LIMIT) {
                push(
                    Invariant::Sampling,
                    format!("{name} grid phase step {phase:.4} rad > {NYQUIST_LIMIT:.4} rad"),
                );
            }
        }
    }
    out
}
