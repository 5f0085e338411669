use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ghostcorr::manifest::{manifest_path, RunManifest};
use tempfile::TempDir;

fn ghostcorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghostcorr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

fn render(dir: &TempDir, name: &str, config: Option<&Path>) -> PathBuf {
    let out = dir.path().join(name);
    let mut args = vec!["render", "--out", path_arg(&out)];
    if let Some(c) = config {
        args.extend(["--config", path_arg(c)]);
    }
    let o = ghostcorr(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn render_writes_normalized_profile_and_manifest() {
    let dir = TempDir::new().unwrap();
    let out = render(&dir, "profile.csv", None);
    let (header, rows) = read_table(&out);
    assert_eq!(
        header,
        ["u2_m", "g2_raw", "g2_peak_norm", "delta_g2_raw", "delta_g2_background_norm"]
    );
    assert_eq!(rows.len(), 601);

    let peak = column(&header, &rows, "g2_peak_norm");
    let top = peak.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(top, 1.0);

    let manifest = RunManifest::load(&manifest_path(&out)).unwrap();
    assert_eq!(manifest.command, "render");
    let v = manifest.render.unwrap().visibility;
    let bg = column(&header, &rows, "delta_g2_background_norm");
    let bg_max = bg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!((bg_max - v / (1.0 - v)).abs() < 1e-9, "{bg_max} vs {}", v / (1.0 - v));

    let scene = manifest.scene().unwrap();
    assert_eq!(scene, ghostcorr::default_scene());
}

#[test]
fn empty_config_matches_explicit_defaults() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.cfg");
    fs::write(&empty, "# defaults\n").unwrap();
    let explicit = dir.path().join("explicit.cfg");
    fs::write(
        &explicit,
        ghostcorr::config::render_config(&ghostcorr::SceneParams::default()),
    )
    .unwrap();
    let a = render(&dir, "a.csv", Some(&empty));
    let b = render(&dir, "b.csv", Some(&explicit));
    let c = render(&dir, "c.csv", None);
    let a = fs::read(a).unwrap();
    assert_eq!(a, fs::read(b).unwrap());
    assert_eq!(a, fs::read(c).unwrap());
}

#[test]
fn sweep_lists_one_row_per_value() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("slits.csv");
    let o = ghostcorr(&["sweep", "--sweep", "slits", "--values", "1,2,3", "--out", path_arg(&out), "--verbose"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_table(&out);
    assert_eq!(header, ["parameter_value", "visibility", "excluded_flag"]);
    assert_eq!(column(&header, &rows, "parameter_value"), [1.0, 2.0, 3.0]);
    for r in &rows {
        assert!(r[1] > 0.0 && r[1] <= 0.5, "{r:?}");
        assert_eq!(r[2], 0.0);
    }
    for n in 1..=3 {
        assert!(out.with_extension(format!("slits-{n}.csv")).exists());
    }
    let m = RunManifest::load(&manifest_path(&out)).unwrap();
    assert_eq!(m.sweep.unwrap().visibilities, column(&header, &rows, "visibility"));
}

#[test]
fn width_sweep_matches_render_at_half_pitch() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("width.csv");
    let o = ghostcorr(&["sweep", "--sweep", "width", "--values", "0.5", "--out", path_arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_table(&out);
    let rendered = render(&dir, "r.csv", None);
    let v = RunManifest::load(&manifest_path(&rendered)).unwrap().render.unwrap().visibility;
    assert_eq!(column(&header, &rows, "visibility"), [v]);
}

#[test]
fn oracle_is_reproducible_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = ghostcorr(&["oracle", "--realizations", "400", "--seed", seed, "--out", path_arg(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out).unwrap()
    };
    let a = run("a.csv", "7");
    assert_eq!(a, run("b.csv", "7"));
    assert_ne!(a, run("c.csv", "8"));
    let m = RunManifest::load(&manifest_path(&dir.path().join("a.csv"))).unwrap();
    let o = m.oracle.unwrap();
    assert_eq!((o.seed, o.realizations), (7, 400));
}

#[test]
fn small_ensembles_are_refused() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o.csv");
    let o = ghostcorr(&["oracle", "--realizations", "10", "--out", path_arg(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("realizations"));
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_names_the_line() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "a_mm = 1\nlens_mm = 40\n").unwrap();
    let out = dir.path().join("x.csv");
    let o = ghostcorr(&["render", "--config", path_arg(&cfg), "--out", path_arg(&out)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.cfg:2:") && err.contains("lens_mm"), "{err}");
    assert!(!out.exists());
}

#[test]
fn every_violation_is_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("broken.cfg");
    fs::write(&cfg, "wavelength_nm = -1\nslit_width_mm = 0.2\ng0 = 0\n").unwrap();
    let o = ghostcorr(&["render", "--config", path_arg(&cfg), "--out", path_arg(&dir.path().join("x.csv"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["wavelength > 0", "slit width < pitch", "g0 > 0"] {
        assert!(err.contains(name), "missing `{name}` in {err}");
    }
}

#[test]
fn bad_sweep_value_is_named() {
    let dir = TempDir::new().unwrap();
    let o = ghostcorr(&["sweep", "--sweep", "slits", "--values", "2,0", "--out", path_arg(&dir.path().join("s.csv"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("slit_count = 0"));
}
