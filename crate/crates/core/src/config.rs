//! `key = value` scene files. Lengths use the unit named in the key.
//!
//! ```text
//! # double slit, wider source
//! a_mm = 2
//! slit_count = 2
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::SceneParams;

pub const KEYS: [&str; 12] = [
    "wavelength_nm",
    "z_mm",
    "z1_mm",
    "z2_mm",
    "a_mm",
    "g0",
    "slit_count",
    "slit_width_mm",
    "slit_pitch_mm",
    "u1_mm",
    "detector_halfspan_mm",
    "detector_points",
];

/// Decimal exponents of the key units relative to meters.
const NM: i32 = -9;
const MM: i32 = -3;

/// Splits a decimal literal into mantissa text and power of ten.
fn split_exponent(text: &str) -> Option<(&str, i32)> {
    match text.find(['e', 'E']) {
        Some(i) => Some((&text[..i], text[i + 1..].parse().ok()?)),
        None => Some((text, 0)),
    }
}

/// `text × 10^shift`, rounded once from the decimal value so that `0.075`
/// in millimeters gives the same double as `0.075e-3` in meters.
fn scaled(text: &str, shift: i32) -> Option<f64> {
    text.parse::<f64>().ok().filter(|v| v.is_finite())?;
    let (mantissa, exp) = split_exponent(text)?;
    format!("{mantissa}e{}", exp + shift)
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
}

/// Shortest round-trip text of `value × 10^-shift`.
fn unscaled(value: f64, shift: i32) -> String {
    let sci = format!("{value:e}");
    let (mantissa, exp) = split_exponent(&sci).expect("formatted float");
    let exp = exp - shift;
    if exp == 0 {
        mantissa.to_string()
    } else {
        format!("{mantissa}e{exp}")
    }
}

/// Parses scene parameters. Omitted keys keep their defaults; `origin`
/// labels error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<SceneParams> {
    let mut params = SceneParams::default();
    let mut seen = HashSet::new();
    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let err = |message: String| Error::Config {
            path: origin.to_string(),
            line: line_no,
            message,
        };
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key `{key}`")));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        let length = |shift: i32| {
            scaled(value, shift).ok_or_else(|| err(format!("`{key}` expects a number, found `{value}`")))
        };
        let real = || length(0);
        let count = || {
            value
                .parse::<usize>()
                .map_err(|_| err(format!("`{key}` expects a non-negative integer, found `{value}`")))
        };
        match key {
            "wavelength_nm" => params.wavelength_m = length(NM)?,
            "z_mm" => params.z_m = length(MM)?,
            "z1_mm" => params.z1_m = length(MM)?,
            "z2_mm" => params.z2_m = Some(length(MM)?),
            "a_mm" => params.a_m = length(MM)?,
            "g0" => params.g0 = real()?,
            "slit_count" => params.slit_count = count()?,
            "slit_width_mm" => params.slit_width_m = length(MM)?,
            "slit_pitch_mm" => params.slit_pitch_m = length(MM)?,
            "u1_mm" => params.u1_m = length(MM)?,
            "detector_halfspan_mm" => params.detector_halfspan_m = length(MM)?,
            "detector_points" => params.detector_points = count()?,
            _ => unreachable!("key list checked above"),
        }
    }
    Ok(params)
}

/// Reads a scene file; `None` gives the defaults.
pub fn load_config(path: Option<&Path>) -> Result<SceneParams> {
    match path {
        None => Ok(SceneParams::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_config(&text, &p.display().to_string())
        }
    }
}

/// Writes every key explicitly. `z2_mm` is omitted when it follows from
/// `z - z1`.
pub fn render_config(params: &SceneParams) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("writing to a String");
    put("wavelength_nm", unscaled(params.wavelength_m, NM));
    put("z_mm", unscaled(params.z_m, MM));
    put("z1_mm", unscaled(params.z1_m, MM));
    if let Some(z2) = params.z2_m {
        put("z2_mm", unscaled(z2, MM));
    }
    put("a_mm", unscaled(params.a_m, MM));
    put("g0", unscaled(params.g0, 0));
    put("slit_count", params.slit_count.to_string());
    put("slit_width_mm", unscaled(params.slit_width_m, MM));
    put("slit_pitch_mm", unscaled(params.slit_pitch_m, MM));
    put("u1_mm", unscaled(params.u1_m, MM));
    put("detector_halfspan_mm", unscaled(params.detector_halfspan_m, MM));
    put("detector_points", params.detector_points.to_string());
    out
}
