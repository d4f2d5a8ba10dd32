//! Browser bindings for the demo page in `www/`.
//!
//! Each exported function wraps a plain Rust function of the same name
//! with a `_impl` suffix so the logic can be tested natively.

use magsoft::beam_mech::{solve_tentacle, TentacleParams};
use magsoft::safety::{self, WaveformSpec};
use magsoft::scaling::{self, ScalePlan};
use wasm_bindgen::prelude::*;

/// Right tentacle half from body to tip as flat [y0, z0, y1, z1, ...] in mm,
/// followed by the tip angle in degrees.
pub fn tentacle_shape_impl(b_mt: f64) -> Result<Vec<f64>, String> {
    let d = solve_tentacle(b_mt * 1e-3, &TentacleParams::default()).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(2 * d.y.len() + 1);
    for (y, z) in d.y.iter().zip(&d.z) {
        out.push(y * 1e3);
        out.push(z * 1e3);
    }
    out.push(d.tip_angle().to_degrees());
    Ok(out)
}

/// Log-spaced [eta_ms, limit_T_per_s, ...] pairs.
pub fn dbdt_limit_curve_impl(eta_min_ms: f64, eta_max_ms: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(eta_min_ms > 0.0 && eta_max_ms > eta_min_ms && n >= 2) {
        return Err("need 0 < eta_min < eta_max and n >= 2".into());
    }
    let (a, b) = (eta_min_ms.ln(), eta_max_ms.ln());
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let eta = (a + (b - a) * i as f64 / (n - 1) as f64).exp();
        out.push(eta);
        out.push(safety::dbdt_limit(eta).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// Audit of a sinusoidal field as JSON.
pub fn audit_harmonic_impl(b_mt: f64, f_hz: f64) -> Result<String, String> {
    let r = safety::audit("custom", &WaveformSpec::Harmonic { b0: b_mt * 1e-3, f: f_hz }).map_err(|e| e.to_string())?;
    serde_json::to_string(&r).map_err(|e| e.to_string())
}

/// Feasibility table for a shrink plan.
pub fn scale_report_impl(lambda_body: f64, lambda_tent: f64) -> Result<String, String> {
    let plan = ScalePlan { lambda_body, lambda_tent, ..Default::default() };
    scaling::report(&plan).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn tentacle_shape(b_mt: f64) -> Result<Vec<f64>, JsError> {
    tentacle_shape_impl(b_mt).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn dbdt_limit_curve(eta_min_ms: f64, eta_max_ms: f64, n: usize) -> Result<Vec<f64>, JsError> {
    dbdt_limit_curve_impl(eta_min_ms, eta_max_ms, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn audit_harmonic(b_mt: f64, f_hz: f64) -> Result<String, JsError> {
    audit_harmonic_impl(b_mt, f_hz).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn scale_report(lambda_body: f64, lambda_tent: f64) -> Result<String, JsError> {
    scale_report_impl(lambda_body, lambda_tent).map_err(|e| JsError::new(&e))
}
