//! Visibility, parameter sweeps over slit count and slit width, and the
//! analytic far-field transform of the multi-slit mask.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{full_profile, CorrelationProfile};
use crate::error::{Error, Result};
use crate::scene::{Scene, SceneParams, TransmissionMask};

/// Relative tolerance for the runtime check that ΔG² and G² peak at the same point.
const MAXIMA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub visibility: f64,
    pub peak_index: usize,
    pub peak_position_m: f64,
    pub peak_delta_g2: f64,
    pub background_at_peak: f64,
}

/// Index of the largest value; ties go to the smallest `|position|`, then
/// to the lower index.
pub fn argmax_nearest_origin(values: &[f64], positions: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (m, &v) in values.iter().enumerate() {
        best = match best {
            None => Some(m),
            Some(b) if v > values[b] => Some(m),
            Some(b) if v == values[b] && positions[m].abs() < positions[b].abs() => Some(m),
            keep => keep,
        };
    }
    best
}

/// `V = max ΔG² / max G²`, each maximum found by exhaustive scan.
pub fn visibility(profile: &CorrelationProfile) -> Result<VisibilityResult> {
    let peak = argmax_nearest_origin(&profile.delta_g2, &profile.u2_positions)
        .ok_or(Error::ZeroCorrelation)?;
    let peak_delta_g2 = profile.delta_g2[peak];
    if !(peak_delta_g2 > 0.0) {
        return Err(Error::ZeroCorrelation);
    }
    let max_g2 = profile.g2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g2_at_peak = profile.g2[peak];
    if (max_g2 - g2_at_peak).abs() > MAXIMA_TOLERANCE * max_g2 {
        return Err(Error::MaximaMismatch { max_g2, g2_at_peak });
    }
    Ok(VisibilityResult {
        visibility: peak_delta_g2 / max_g2,
        peak_index: peak,
        peak_position_m: profile.u2_positions[peak],
        peak_delta_g2,
        background_at_peak: profile.mean_intensity_test * profile.mean_intensity_ref[peak],
    })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `sin(nθ) / sin(θ)` with `θ = πdf`, continuous through `θ = mπ`.
fn array_factor(n: usize, d_times_f: f64) -> f64 {
    let nf = n as f64;
    let m = d_times_f.round();
    let delta = d_times_f - m;
    // Limit at θ = mπ is n·(±1)^{m(n-1)}.
    let sign = if (n - 1) % 2 == 1 && (m as i64).rem_euclid(2) == 1 {
        -1.0
    } else {
        1.0
    };
    if delta.abs() < 1e-6 {
        let e = PI * delta;
        sign * nf * (1.0 - (nf * nf - 1.0) * e * e / 6.0)
    } else {
        (nf * PI * d_times_f).sin() / (PI * d_times_f).sin()
    }
}

/// `|T(f)|²` for the symmetric n-slit mask, with `f` in cycles per meter.
pub fn analytic_multislit_transform(mask: &TransmissionMask, spatial_frequency: f64) -> f64 {
    let w = mask.slit_width_m;
    let t = mask.amplitude
        * w
        * sinc(PI * w * spatial_frequency)
        * array_factor(mask.slit_count, mask.slit_pitch_m * spatial_frequency);
    t * t
}

/// `|T(u / (λ z2))|²` over detector positions.
pub fn analytic_image(scene: &Scene, positions: &[f64]) -> Vec<f64> {
    let scale = scene.layout.wavelength_m * scene.layout.z2_m;
    positions
        .iter()
        .map(|u| analytic_multislit_transform(&scene.mask, u / scale))
        .collect()
}

/// Interior local maxima above `fraction` of the global maximum.
pub fn local_maxima(values: &[f64], fraction: f64) -> Vec<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (1..values.len().saturating_sub(1))
        .filter(|&m| {
            values[m] > values[m - 1] && values[m] >= values[m + 1] && values[m] > fraction * max
        })
        .collect()
}

/// Peak-count thresholds of the distortion check, relative to the maximum.
pub const EXCLUSION_THRESHOLD: f64 = 2e-2;
pub const EXCLUSION_ANALYTIC_LOW: f64 = 4e-2;
pub const EXCLUSION_ANALYTIC_HIGH: f64 = 1e-2;

/// Flags a profile whose peak structure no longer matches the analytic
/// transform: the number of ΔG² maxima above 2% of its peak must lie
/// between the number of `|T|²` maxima above 4% and above 1%.
pub fn is_distorted(scene: &Scene, profile: &CorrelationProfile) -> bool {
    let observed = local_maxima(&profile.delta_g2, EXCLUSION_THRESHOLD).len();
    let reference = analytic_image(scene, &profile.u2_positions);
    let low = local_maxima(&reference, EXCLUSION_ANALYTIC_LOW).len();
    let high = local_maxima(&reference, EXCLUSION_ANALYTIC_HIGH).len();
    !(low <= observed && observed <= high)
}

/// Mean distance from the central principal maximum of ΔG² to its nearest
/// principal neighbours.
///
/// ΔG² is first divided by the single-slit envelope `sinc²(πωu/λz2)`
/// inside its main lobe, which removes the envelope's pull on the peak
/// positions. Principal maxima are local maxima at least half as high as
/// the central one.
pub fn principal_fringe_spacing(scene: &Scene, profile: &CorrelationProfile) -> Option<f64> {
    let scale = scene.layout.wavelength_m * scene.layout.z2_m;
    let w = scene.mask.slit_width_m;
    let lobe = 0.9 * scale / w;
    let quotient: Vec<f64> = profile
        .u2_positions
        .iter()
        .zip(&profile.delta_g2)
        .map(|(&u, &dg)| {
            if u.abs() < lobe {
                dg / sinc(PI * w * u / scale).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let peaks = local_maxima(&quotient, 1e-6);
    let positions = &profile.u2_positions;
    let center = *peaks
        .iter()
        .min_by(|&&a, &&b| positions[a].abs().total_cmp(&positions[b].abs()))?;
    let principal: Vec<usize> = peaks
        .into_iter()
        .filter(|&m| quotient[m] >= 0.5 * quotient[center])
        .collect();
    let left = principal
        .iter()
        .filter(|&&m| m < center)
        .max()
        .map(|&m| positions[center] - positions[m]);
    let right = principal
        .iter()
        .filter(|&&m| m > center)
        .min()
        .map(|&m| positions[m] - positions[center]);
    match (left, right) {
        (Some(l), Some(r)) => Some(0.5 * (l + r)),
        (Some(s), None) | (None, Some(s)) => Some(s),
        (None, None) => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter_values: Vec<f64>,
    pub visibilities: Vec<f64>,
    pub profiles: Option<Vec<CorrelationProfile>>,
    pub excluded_points: Vec<f64>,
}

impl SweepResult {
    pub fn is_excluded(&self, value: f64) -> bool {
        self.excluded_points.contains(&value)
    }
}

struct SweepPoint {
    visibility: f64,
    profile: CorrelationProfile,
    distorted: bool,
}

fn evaluate(params: SceneParams) -> Result<SweepPoint> {
    let scene = Scene::from_params(&params)?;
    let profile = full_profile(&scene)?;
    let v = visibility(&profile)?;
    Ok(SweepPoint {
        visibility: v.visibility,
        distorted: is_distorted(&scene, &profile),
        profile,
    })
}

fn run_sweep(values: Vec<f64>, scenes: Vec<SceneParams>) -> Result<SweepResult> {
    let points: Vec<SweepPoint> = scenes
        .into_par_iter()
        .map(evaluate)
        .collect::<Result<_>>()?;
    let excluded_points = values
        .iter()
        .zip(&points)
        .filter(|(_, p)| p.distorted)
        .map(|(v, _)| *v)
        .collect();
    Ok(SweepResult {
        visibilities: points.iter().map(|p| p.visibility).collect(),
        profiles: Some(points.into_iter().map(|p| p.profile).collect()),
        parameter_values: values,
        excluded_points,
    })
}

fn require_nonempty<T>(values: &[T], name: &'static str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::parameter(name, "[]", "at least one value is required"));
    }
    Ok(())
}

/// Visibility versus slit count at fixed width and pitch. Grids are
/// rebuilt for every point.
pub fn sweep_slit_number(base: &Scene, n_values: &[usize]) -> Result<SweepResult> {
    require_nonempty(n_values, "slit_count")?;
    if let Some(&bad) = n_values.iter().find(|&&n| n < 1) {
        return Err(Error::parameter("slit_count", bad, "must be at least 1"));
    }
    let params = base.params();
    let scenes = n_values
        .iter()
        .map(|&n| SceneParams {
            slit_count: n,
            ..params
        })
        .collect();
    run_sweep(n_values.iter().map(|&n| n as f64).collect(), scenes)
}

/// Visibility versus `ω/d` at the base pitch.
pub fn sweep_width_ratio(base: &Scene, ratios: &[f64]) -> Result<SweepResult> {
    require_nonempty(ratios, "width_ratio")?;
    if let Some(&bad) = ratios.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::parameter("width_ratio", bad, "must lie in (0, 1)"));
    }
    let params = base.params();
    let scenes = ratios
        .iter()
        .map(|&r| SceneParams {
            slit_width_m: r * params.slit_pitch_m,
            ..params
        })
        .collect();
    run_sweep(ratios.to_vec(), scenes)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveVariant {
    SlitCounts(Vec<usize>),
    WidthRatios(Vec<f64>),
}

/// ΔG²(u1, u2) / (<I(u1)><I(u2)>) for one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationCurve {
    pub parameter_value: f64,
    pub u2_positions: Vec<f64>,
    pub normalized_delta_g2: Vec<f64>,
    pub visibility: f64,
}

pub fn fluctuation_curves(base: &Scene, variant: &CurveVariant) -> Result<Vec<FluctuationCurve>> {
    let sweep = match variant {
        CurveVariant::SlitCounts(n) => sweep_slit_number(base, n)?,
        CurveVariant::WidthRatios(r) => sweep_width_ratio(base, r)?,
    };
    let profiles = sweep.profiles.expect("sweeps keep their profiles");
    Ok(profiles
        .into_iter()
        .zip(sweep.parameter_values)
        .zip(sweep.visibilities)
        .map(|((p, value), v)| FluctuationCurve {
            parameter_value: value,
            normalized_delta_g2: p.delta_g2_background_normalized(),
            u2_positions: p.u2_positions,
            visibility: v,
        })
        .collect())
}
