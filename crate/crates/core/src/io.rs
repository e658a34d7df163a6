//! File formats: matrix, path and system JSON, trajectory CSV and a static
//! SVG of eigenvalue trails.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::paths::{PositivePath, Segment, Trajectory};
use crate::spectral::EigenStructure;
use crate::stability::PeriodicSystem;
use crate::strata::StratumLabel;
use crate::symplectic::{Generator, SympMatrix};

fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

fn rows_of(m: &DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|k| json!(m[(i, k)])).collect())).collect())
}

fn rows_from(v: &Value, what: &str) -> Result<DMatrix<f64>> {
    let rows = v.as_array().ok_or_else(|| invalid(format!("{what}: rows must be an array")))?;
    let d = rows.len();
    if d == 0 {
        return Err(invalid(format!("{what}: no rows")));
    }
    let mut data = Vec::with_capacity(d * d);
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_array().ok_or_else(|| invalid(format!("{what}: row {i} is not an array")))?;
        if r.len() != d {
            return Err(invalid(format!("{what}: row {i} has {} entries, expected {d}", r.len())));
        }
        for x in r {
            let x = x.as_f64().ok_or_else(|| invalid(format!("{what}: non-numeric entry in row {i}")))?;
            if !x.is_finite() {
                return Err(Error::NonFinite(what.into()));
            }
            data.push(x);
        }
    }
    Ok(DMatrix::from_row_slice(d, d, &data))
}

pub fn matrix_to_json(m: &DMatrix<f64>) -> Value {
    json!({ "dim": m.nrows(), "rows": rows_of(m) })
}

/// Reads {"dim": d, "rows": [[…], …]}; `dim` is optional but must agree.
pub fn matrix_from_json(v: &Value) -> Result<DMatrix<f64>> {
    let obj = v.as_object().ok_or_else(|| invalid("matrix must be a JSON object"))?;
    let m = rows_from(obj.get("rows").ok_or_else(|| invalid("matrix needs \"rows\""))?, "matrix")?;
    check_dim(obj, m.nrows())?;
    Ok(m)
}

fn check_dim(obj: &Map<String, Value>, d: usize) -> Result<()> {
    match obj.get("dim") {
        None => Ok(()),
        Some(x) if x.as_u64() == Some(d as u64) => Ok(()),
        Some(x) => Err(invalid(format!("\"dim\" is {x} but the data is {d}×{d}"))),
    }
}

pub fn symp_from_json(v: &Value, tol: f64) -> Result<SympMatrix> {
    SympMatrix::with_tol(matrix_from_json(v)?, tol)
}

// Generators are written as bare row arrays; the {"dim","rows"} object form
// is accepted too.
fn generator_from(v: &Value) -> Result<Generator> {
    let m = if v.is_object() { matrix_from_json(v)? } else { rows_from(v, "generator_P")? };
    Generator::new(m)
}

fn segments_to_json(segs: &[Segment]) -> Value {
    Value::Array(
        segs.iter().map(|s| json!({ "duration": s.duration, "generator_P": rows_of(s.generator.matrix()) })).collect(),
    )
}

fn segments_from(obj: &Map<String, Value>) -> Result<Vec<Segment>> {
    let segs = obj.get("segments").and_then(Value::as_array).ok_or_else(|| invalid("need a \"segments\" array"))?;
    segs.iter()
        .enumerate()
        .map(|(k, s)| {
            let duration = s
                .get("duration")
                .and_then(Value::as_f64)
                .ok_or_else(|| invalid(format!("segment {k}: missing \"duration\"")))?;
            let g = generator_from(s.get("generator_P").ok_or_else(|| invalid(format!("segment {k}: missing \"generator_P\"")))?)?;
            Ok(Segment::new(duration, g))
        })
        .collect()
}

pub fn path_to_json(p: &PositivePath) -> Value {
    json!({
        "dim": p.dim(),
        "origin": matrix_to_json(p.origin().matrix()),
        "segments": segments_to_json(p.segments()),
    })
}

/// Reads a path; a missing origin means the identity.
pub fn path_from_json(v: &Value, tol: f64) -> Result<PositivePath> {
    let obj = v.as_object().ok_or_else(|| invalid("path must be a JSON object"))?;
    let segs = segments_from(obj)?;
    let d = match (obj.get("dim").and_then(Value::as_u64), segs.first()) {
        (Some(d), _) => d as usize,
        (None, Some(s)) => s.generator.dim(),
        (None, None) => return Err(invalid("empty path without \"dim\"")),
    };
    if d == 0 || d % 2 != 0 {
        return Err(Error::Dimension(format!("path dimension {d}")));
    }
    let origin = match obj.get("origin") {
        Some(o) => symp_from_json(o, tol)?,
        None => SympMatrix::identity(d / 2),
    };
    if origin.dim() != d {
        return Err(Error::Dimension(format!("origin is {}×{0}, path is {d}", origin.dim())));
    }
    PositivePath::new(origin, segs)
}

pub fn system_to_json(s: &PeriodicSystem) -> Value {
    json!({ "dim": s.dim(), "periodic": true, "segments": segments_to_json(s.schedule()) })
}

pub fn system_from_json(v: &Value) -> Result<PeriodicSystem> {
    let obj = v.as_object().ok_or_else(|| invalid("system must be a JSON object"))?;
    if obj.get("periodic") != Some(&Value::Bool(true)) {
        return Err(invalid("system needs \"periodic\": true"));
    }
    let sys = PeriodicSystem::new(segments_from(obj)?)?;
    check_dim(obj, sys.dim())?;
    Ok(sys)
}

pub fn stratum_to_json(l: &StratumLabel) -> Value {
    json!({
        "region": l.region.as_str(),
        "nilpotent_sign": l.nilpotent_sign.map(|s| s.as_str()),
        "labels": l.labels.iter().map(|z| json!([z.re, z.im])).collect::<Vec<_>>(),
    })
}

pub fn eigen_structure_to_json(s: &EigenStructure) -> Value {
    json!({
        "groups": s.groups.iter().map(|g| json!({
            "lambda_re": g.label.re,
            "lambda_im": g.label.im,
            "kind": g.kind.as_str(),
            "mult": g.multiplicity,
            "diagonalizable": g.diagonalizable,
            "splitting": g.splitting,
        })).collect::<Vec<_>>(),
        "residual": s.residual,
    })
}

pub const TRAJECTORY_HEADER: &str = "t,group,lambda_re,lambda_im,kind,splitting,stratum";

/// One row per tracked group per sample.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &tr.samples {
        let stratum = s.stratum.as_ref().map(|l| l.to_string()).unwrap_or_default();
        for g in &s.groups {
            let split = g.group.splitting.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.t,
                g.track,
                g.group.label.re,
                g.group.label.im,
                g.group.kind.as_str(),
                split,
                stratum
            );
        }
    }
    out
}

const SVG_SIZE: f64 = 600.0;
const PALETTE: [(u8, u8, u8); 6] = [(31, 119, 180), (214, 39, 40), (44, 160, 44), (148, 103, 189), (255, 127, 14), (23, 190, 207)];

/// Static SVG 1.1: unit circle, real axis and every orbit member of each
/// tracked group, fading from light (t = 0) to full colour (t = T).
pub fn trajectory_svg(tr: &Trajectory) -> String {
    let total = tr.samples.last().map(|s| s.t).unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let reach = tr
        .samples
        .iter()
        .flat_map(|s| s.groups.iter().map(|g| g.group.label.norm()))
        .fold(1.0f64, f64::max)
        .clamp(1.5, 6.0)
        * 1.1;
    let scale = SVG_SIZE / (2.0 * reach);
    let x = |re: f64| SVG_SIZE / 2.0 + re.clamp(-reach, reach) * scale;
    let y = |im: f64| SVG_SIZE / 2.0 - im.clamp(-reach, reach) * scale;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        SVG_SIZE
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r##"<line x1="0" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="#888" stroke-width="1"/>"##, SVG_SIZE / 2.0, SVG_SIZE);
    let _ = writeln!(
        out,
        r##"<circle cx="{0:.2}" cy="{0:.2}" r="{1:.2}" fill="none" stroke="#444" stroke-width="1.2"/>"##,
        SVG_SIZE / 2.0,
        scale
    );
    for s in &tr.samples {
        let frac = s.t / total;
        for g in &s.groups {
            let (r, gg, b) = PALETTE[g.track % PALETTE.len()];
            let mix = |c: u8| (255.0 - (255.0 - c as f64) * (0.25 + 0.75 * frac)).round() as u8;
            for z in g.group.eigenvalues() {
                let _ = writeln!(
                    out,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="#{:02x}{:02x}{:02x}"/>"##,
                    x(z.re),
                    y(z.im),
                    mix(r),
                    mix(gg),
                    mix(b)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
