//! CSV and report files. All numbers are written as `{:.8e}` (nine
//! significant digits) with LF line endings so output bytes never depend
//! on platform or locale.

use std::fs;
use std::path::Path;

use crate::fieldspace::{FieldState, Frame, Vec3, Waveform};
use crate::gaits::Trajectory;
use crate::safety::SafetyReport;
use crate::{Error, Result};

pub const WAVEFORM_HEADER: [&str; 11] = [
    "t_s", "Bx_T", "By_T", "Bz_T", "dBzdx_Tpm", "dBzdy_Tpm", "dBzdz_Tpm", "dBydy_Tpm", "dBxdy_Tpm", "frame", "tag",
];

pub const TRAJECTORY_HEADER: [&str; 10] =
    ["t_s", "x_m", "y_m", "z_m", "roll_rad", "pitch_rad", "yaw_rad", "tip_angle_rad", "flags", "step"];

pub fn num(v: f64) -> String {
    // -0 and 0 print the same
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.8e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::invalid(format!("csv: {e}")),
    }
}

fn write_rows(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

pub fn waveform_csv(w: &Waveform) -> Result<Vec<u8>> {
    write_rows(
        &WAVEFORM_HEADER,
        w.samples.iter().map(|s| {
            let mut r = vec![num(s.t)];
            r.extend(s.field.b.iter().map(|v| num(*v)));
            r.extend(s.field.grad.iter().map(|v| num(*v)));
            r.push(s.field.frame.as_str().to_string());
            r.push(s.tag.clone());
            r
        }),
    )
}

pub fn emit_waveform_csv(w: &Waveform, path: &Path) -> Result<()> {
    fs::write(path, waveform_csv(w)?)?;
    Ok(())
}

fn field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<f64> {
    let s = rec.get(i).ok_or_else(|| Error::invalid(format!("line {line}: missing column {i}")))?;
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("line {line}: '{s}' is not a number")))
}

pub fn parse_waveform_csv(data: &[u8]) -> Result<Waveform> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(data);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != WAVEFORM_HEADER {
        return Err(Error::invalid("waveform csv header does not match the expected columns"));
    }
    let mut w = Waveform::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = k + 2;
        let mut v = [0.0; 9];
        for (i, x) in v.iter_mut().enumerate() {
            *x = field(&rec, i, line)?;
        }
        let frame = Frame::parse(rec.get(9).unwrap_or(""))
            .ok_or_else(|| Error::invalid(format!("line {line}: unknown frame")))?;
        let fs = FieldState::new(Vec3::new(v[1], v[2], v[3]), [v[4], v[5], v[6], v[7], v[8]], frame);
        w.push(v[0], fs, rec.get(10).unwrap_or(""));
    }
    Ok(w)
}

pub fn read_waveform_csv(path: &Path) -> Result<Waveform> {
    parse_waveform_csv(&fs::read(path)?)
}

/// Trajectory rows; `step` is the scenario step index each point belongs to.
pub fn trajectory_csv(points: &[(usize, &crate::gaits::TrajectoryPoint)]) -> Result<Vec<u8>> {
    write_rows(
        &TRAJECTORY_HEADER,
        points.iter().map(|(step, p)| {
            let (r, pi, y) = p.orientation.to_rpy();
            vec![
                num(p.t),
                num(p.pos.x),
                num(p.pos.y),
                num(p.pos.z),
                num(r),
                num(pi),
                num(y),
                num(p.tip_angle),
                p.flags.as_str(),
                step.to_string(),
            ]
        }),
    )
}

pub fn emit_trajectory_csv(t: &Trajectory, path: &Path) -> Result<()> {
    let pts: Vec<_> = t.points.iter().map(|p| (0usize, p)).collect();
    fs::write(path, trajectory_csv(&pts)?)?;
    Ok(())
}

/// Measurement file with columns `b_mT,gamma_deg`; returns (gamma rad, B T).
pub fn parse_measurements_csv(data: &[u8]) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(data);
    let header = r.headers().map_err(csv_err)?.clone();
    let bi = header.iter().position(|h| h == "b_mT");
    let gi = header.iter().position(|h| h == "gamma_deg");
    let (bi, gi) = match (bi, gi) {
        (Some(b), Some(g)) => (b, g),
        _ => return Err(Error::invalid("measurement csv needs b_mT and gamma_deg columns")),
    };
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let b = field(&rec, bi, k + 2)?;
        let g = field(&rec, gi, k + 2)?;
        out.push((g.to_radians(), b * 1e-3));
    }
    Ok(out)
}

/// Flat key=value rendering of a report set, one entry per line.
pub fn reports_kv(reports: &[SafetyReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let c = &r.category;
        s.push_str(&format!("{c}.eta_ms={}\n", num(r.eta_ms)));
        s.push_str(&format!("{c}.max_allowed_dbdt={}\n", num(r.max_allowed_dbdt)));
        s.push_str(&format!("{c}.reported_dbdt={}\n", num(r.reported_dbdt)));
        if let Some(i) = r.instantaneous_dbdt {
            s.push_str(&format!("{c}.instantaneous_dbdt={}\n", num(i)));
        }
        s.push_str(&format!("{c}.hf_product={}\n", num(r.hf_product)));
        s.push_str(&format!("{c}.dbdt_pass={}\n", r.dbdt_pass));
        s.push_str(&format!("{c}.hf_pass={}\n", r.hf_pass));
    }
    s
}

pub fn reports_json(reports: &[SafetyReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::invalid(e.to_string()))
}
