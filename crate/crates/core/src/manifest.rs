//! JSON record written next to every CSV output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::scene::{Scene, SceneParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSizes {
    pub source: Grid1D,
    pub object: Grid1D,
    pub detector: Grid1D,
}

impl GridSizes {
    pub fn of(scene: &Scene) -> Self {
        Self {
            source: scene.source_grid,
            object: scene.object_grid,
            detector: scene.detector_grid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSummary {
    pub visibility: f64,
    pub peak_position_m: f64,
    pub peak_delta_g2: f64,
    pub background_at_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub kind: String,
    pub parameter_values: Vec<f64>,
    pub visibilities: Vec<f64>,
    pub excluded_points: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub seed: u64,
    pub realizations: usize,
    pub batch_count: usize,
    /// Fraction of detector points with `|z| <= 4`.
    pub fraction_within_4_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    /// Resolved scene parameters in SI units.
    pub scene: SceneParams,
    /// Grids the computation actually ran on.
    pub grids: GridSizes,
    pub version: String,
    pub wall_clock_s: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub render: Option<RenderSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sweep: Option<SweepSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<OracleSummary>,
}

impl RunManifest {
    pub fn new(command: &str, flags: BTreeMap<String, String>, scene: &Scene) -> Self {
        Self {
            command: command.to_string(),
            flags,
            scene: scene.params(),
            grids: GridSizes::of(scene),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_s: 0.0,
            render: None,
            sweep: None,
            oracle: None,
        }
    }

    /// Rebuilds the scene the run used, including its grids.
    pub fn scene(&self) -> Result<Scene> {
        let mut scene = Scene::from_params(&self.scene)?;
        scene.source_grid = self.grids.source;
        scene.object_grid = self.grids.object;
        scene.detector_grid = self.grids.detector;
        Ok(scene)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// `results.csv` → `results.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}
