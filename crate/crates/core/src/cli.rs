//! `render`, `sweep` and `oracle` commands: configuration in, CSV and a
//! JSON manifest out.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{sweep_slit_number, sweep_width_ratio, visibility, SweepResult};
use crate::config::load_config;
use crate::correlation::{full_profile, profile_from_kernels, CorrelationProfile};
use crate::error::{Error, Result};
use crate::manifest::{manifest_path, OracleSummary, RenderSummary, RunManifest, SweepSummary};
use crate::propagation::{build_kernels_with, SourceSampling};
use crate::scene::Scene;
use crate::speckle::{estimate_with_kernels, SpeckleEnsembleSpec};

pub const MIN_CLI_REALIZATIONS: usize = 100;
pub const DEFAULT_REALIZATIONS: usize = 20_000;
pub const DEFAULT_SEED: u64 = 1;
/// Source and detector sample counts of the Monte Carlo comparison.
pub const ORACLE_SOURCE_POINTS: usize = 801;
pub const ORACLE_DETECTOR_POINTS: usize = 101;
const DEFAULT_SLIT_COUNTS: &str = "2,3,4,5";
const DEFAULT_WIDTH_RATIOS: &str = "0.2,0.3,0.4,0.5,0.6,0.7,0.8";

#[derive(Debug, Parser)]
#[command(name = "ghostcorr", version, about = "Lensless thermal-light correlated imaging of multi-slit objects")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coincidence rate and fluctuation correlation over the detector grid.
    Render(RenderArgs),
    /// Visibility across slit counts or width ratios.
    Sweep(SweepArgs),
    /// Monte Carlo speckle ensemble against the deterministic correlation.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scene file (`key = value`); omitted keys take defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output CSV; the manifest is written next to it.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Slits,
    Width,
}

impl SweepKind {
    fn name(self) -> &'static str {
        match self {
            SweepKind::Slits => "slits",
            SweepKind::Width => "width",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub sweep: SweepKind,
    /// Comma-separated slit counts or width ratios ω/d.
    #[arg(long, value_name = "LIST")]
    pub values: Option<String>,
    /// Also write one profile CSV per sweep point.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = DEFAULT_REALIZATIONS)]
    pub realizations: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

/// Runs a parsed command and returns a one-line summary.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Render(a) => {
            let m = cmd_render(a.common.config.as_deref(), &a.common.out)?;
            let r = m.render.expect("render manifest has a summary");
            Ok(format!(
                "wrote {} (visibility {}, peak at {} m)",
                a.common.out.display(),
                r.visibility,
                r.peak_position_m
            ))
        }
        Command::Sweep(a) => {
            let m = cmd_sweep(
                a.common.config.as_deref(),
                a.sweep,
                a.values.as_deref(),
                &a.common.out,
                a.verbose,
            )?;
            let s = m.sweep.expect("sweep manifest has a summary");
            Ok(format!(
                "wrote {} ({} points, {} flagged)",
                a.common.out.display(),
                s.parameter_values.len(),
                s.excluded_points.len()
            ))
        }
        Command::Oracle(a) => {
            let m = cmd_oracle(a.common.config.as_deref(), a.realizations, a.seed, &a.common.out)?;
            let o = m.oracle.expect("oracle manifest has a summary");
            Ok(format!(
                "wrote {} (fraction with |z| <= 4: {})",
                a.common.out.display(),
                o.fraction_within_4_stderr
            ))
        }
    }
}

/// Replaces `path` with `bytes` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Manifest(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::Manifest(format!("csv: {e}")))
}

fn write_outputs(out: &Path, csv: Vec<u8>, manifest: &mut RunManifest, started: Instant) -> Result<()> {
    write_atomic(out, &csv)?;
    manifest.wall_clock_s = started.elapsed().as_secs_f64();
    write_atomic(&manifest_path(out), manifest.to_json()?.as_bytes())
}

fn flags(config: Option<&Path>, out: &Path) -> BTreeMap<String, String> {
    let mut f = BTreeMap::new();
    if let Some(c) = config {
        f.insert("config".to_string(), c.display().to_string());
    }
    f.insert("out".to_string(), out.display().to_string());
    f
}

fn load_scene(config: Option<&Path>) -> Result<Scene> {
    Scene::from_params(&load_config(config)?)
}

#[derive(Serialize)]
struct ProfileRow {
    u2_m: f64,
    g2_raw: f64,
    g2_peak_norm: f64,
    delta_g2_raw: f64,
    delta_g2_background_norm: f64,
}

fn profile_csv(p: &CorrelationProfile) -> Result<Vec<u8>> {
    let peak = p.g2_peak_normalized();
    let background = p.delta_g2_background_normalized();
    csv_bytes((0..p.len()).map(|m| ProfileRow {
        u2_m: p.u2_positions[m],
        g2_raw: p.g2[m],
        g2_peak_norm: peak[m],
        delta_g2_raw: p.delta_g2[m],
        delta_g2_background_norm: background[m],
    }))
}

pub fn cmd_render(config: Option<&Path>, out: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    let scene = load_scene(config)?;
    let profile = full_profile(&scene)?;
    let v = visibility(&profile)?;
    let mut manifest = RunManifest::new("render", flags(config, out), &scene);
    manifest.render = Some(RenderSummary {
        visibility: v.visibility,
        peak_position_m: v.peak_position_m,
        peak_delta_g2: v.peak_delta_g2,
        background_at_peak: v.background_at_peak,
    });
    write_outputs(out, profile_csv(&profile)?, &mut manifest, started)?;
    Ok(manifest)
}

fn parse_list<T: std::str::FromStr>(text: &str, name: &'static str) -> Result<Vec<T>> {
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::parameter(name, text, "empty list"));
    }
    items
        .into_iter()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::parameter(name, s, "not a valid value"))
        })
        .collect()
}

#[derive(Serialize)]
struct SweepRow {
    parameter_value: f64,
    visibility: f64,
    excluded_flag: u8,
}

pub fn cmd_sweep(
    config: Option<&Path>,
    kind: SweepKind,
    values: Option<&str>,
    out: &Path,
    verbose: bool,
) -> Result<RunManifest> {
    let started = Instant::now();
    let scene = load_scene(config)?;
    let result: SweepResult = match kind {
        SweepKind::Slits => {
            let n: Vec<usize> = parse_list(values.unwrap_or(DEFAULT_SLIT_COUNTS), "slit_count")?;
            sweep_slit_number(&scene, &n)?
        }
        SweepKind::Width => {
            let r: Vec<f64> = parse_list(values.unwrap_or(DEFAULT_WIDTH_RATIOS), "width_ratio")?;
            sweep_width_ratio(&scene, &r)?
        }
    };
    let rows = result
        .parameter_values
        .iter()
        .zip(&result.visibilities)
        .map(|(&value, &v)| SweepRow {
            parameter_value: value,
            visibility: v,
            excluded_flag: u8::from(result.is_excluded(value)),
        });
    let csv = csv_bytes(rows)?;

    if verbose {
        for (value, p) in result
            .parameter_values
            .iter()
            .zip(result.profiles.as_deref().unwrap_or_default())
        {
            let path = out.with_extension(format!("{}-{value}.csv", kind.name()));
            write_atomic(&path, &profile_csv(p)?)?;
        }
    }

    let mut f = flags(config, out);
    f.insert("sweep".to_string(), kind.name().to_string());
    if let Some(v) = values {
        f.insert("values".to_string(), v.to_string());
    }
    if verbose {
        f.insert("verbose".to_string(), "true".to_string());
    }
    let mut manifest = RunManifest::new("sweep", f, &scene);
    manifest.sweep = Some(SweepSummary {
        kind: kind.name().to_string(),
        parameter_values: result.parameter_values.clone(),
        visibilities: result.visibilities.clone(),
        excluded_points: result.excluded_points.clone(),
    });
    write_outputs(out, csv, &mut manifest, started)?;
    Ok(manifest)
}

#[derive(Serialize)]
struct OracleRow {
    u2_m: f64,
    delta_g2_deterministic: f64,
    delta_g2_mc: f64,
    mc_stderr: f64,
    z_score: f64,
}

pub fn cmd_oracle(config: Option<&Path>, realizations: usize, seed: u64, out: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    if realizations < MIN_CLI_REALIZATIONS {
        return Err(Error::parameter(
            "realizations",
            realizations,
            format!("at least {MIN_CLI_REALIZATIONS} are required"),
        ));
    }
    let scene = load_scene(config)?.coarsened(ORACLE_SOURCE_POINTS, ORACLE_DETECTOR_POINTS);
    let kernels = build_kernels_with(&scene, SourceSampling::Shared)?;
    let deterministic = profile_from_kernels(&scene, &kernels.h1_column, &kernels.h2_matrix)?;
    let spec = SpeckleEnsembleSpec::for_scene(&scene, realizations, seed);
    let estimate = estimate_with_kernels(&spec, &kernels.h1_column, &kernels.h2_matrix)?;

    let rows: Vec<OracleRow> = (0..deterministic.len())
        .map(|m| {
            let e = estimate.delta_g2[m];
            let det = deterministic.delta_g2[m];
            OracleRow {
                u2_m: deterministic.u2_positions[m],
                delta_g2_deterministic: det,
                delta_g2_mc: e.value,
                mc_stderr: e.stderr,
                z_score: (e.value - det) / e.stderr,
            }
        })
        .collect();
    let within = rows.iter().filter(|r| r.z_score.abs() <= 4.0).count();
    let fraction = within as f64 / rows.len() as f64;
    let csv = csv_bytes(rows)?;

    let mut f = flags(config, out);
    f.insert("realizations".to_string(), realizations.to_string());
    f.insert("seed".to_string(), seed.to_string());
    let mut manifest = RunManifest::new("oracle", f, &scene);
    manifest.oracle = Some(OracleSummary {
        seed,
        realizations,
        batch_count: estimate.batch_count,
        fraction_within_4_stderr: fraction,
    });
    write_outputs(out, csv, &mut manifest, started)?;
    Ok(manifest)
}
