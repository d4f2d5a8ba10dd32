//! Nerve-stimulation (dB/dt) and tissue-heating (|H| f) audits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fieldspace::Waveform;
use crate::{Error, Result, MU0};

/// |H| f ceiling, A/(m s).
pub const HF_LIMIT: f64 = 9.46e9;

/// Default dimensionless factor on (|H| / eta) for step inputs. Fitted so
/// both step cells of the reference table come out (1.7e6 and 31.2e6).
pub const STEP_HF_FACTOR: f64 = 0.2;

/// Actuation coil inductance (H) and resistance (ohm), used for
/// function-field steps.
pub const ACTUATION_COIL_L: f64 = 6.3e-4;
pub const ACTUATION_COIL_R: f64 = 0.79;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WaveformSpec {
    /// Amplitude (T), frequency (Hz).
    Harmonic { b0: f64, f: f64 },
    /// Final value (T), inductance (H), resistance (ohm).
    StepRL { b0: f64, l: f64, r: f64 },
    /// Rate (T/s), ramp duration (s).
    Ramp { k: f64, t_end: f64 },
    /// Initial amplitude (T), decrement per period (T), frequency (Hz).
    DecayingHarmonic { b0: f64, k_d: f64, f: f64 },
    Sampled(Waveform),
}

impl WaveformSpec {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            WaveformSpec::Harmonic { b0, f } => *b0 >= 0.0 && *f > 0.0,
            WaveformSpec::StepRL { b0, l, r } => *b0 >= 0.0 && *l > 0.0 && *r > 0.0,
            WaveformSpec::Ramp { k, t_end } => *k >= 0.0 && *t_end > 0.0,
            WaveformSpec::DecayingHarmonic { b0, k_d, f } => *b0 >= 0.0 && *k_d >= 0.0 && *f > 0.0,
            WaveformSpec::Sampled(w) => {
                if w.len() < 2 {
                    return Err(Error::invalid("a sampled waveform needs at least two samples"));
                }
                w.samples.windows(2).all(|p| p[1].t > p[0].t)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("waveform parameters must be positive (sample times increasing)"))
        }
    }
}

/// Allowed dB/dt for a monotonic segment of `eta_ms` milliseconds, T/s.
pub fn dbdt_limit(eta_ms: f64) -> Result<f64> {
    if !(eta_ms > 0.0) {
        return Err(Error::invalid("eta must be positive"));
    }
    Ok(54.0 * (1.0 + 0.138 / eta_ms))
}

/// Longest monotonic stretch of |B| in a sampled waveform, s.
fn longest_monotonic_run(w: &Waveform) -> f64 {
    let mags: Vec<f64> = w.samples.iter().map(|s| s.field.b.norm()).collect();
    let ts: Vec<f64> = w.samples.iter().map(|s| s.t).collect();
    let mut best = 0.0f64;
    let mut start = 0usize;
    let mut dir = 0i8;
    for i in 1..mags.len() {
        let d = mags[i] - mags[i - 1];
        let s = if d > 0.0 { 1 } else if d < 0.0 { -1 } else { 0 };
        if s != 0 && dir != 0 && s != dir {
            best = best.max(ts[i - 1] - ts[start]);
            start = i - 1;
        }
        if s != 0 {
            dir = s;
        }
    }
    best.max(ts[ts.len() - 1] - ts[start])
}

/// Monotonic segment duration, ms.
pub fn eta_of(spec: &WaveformSpec) -> Result<f64> {
    spec.validate()?;
    Ok(match spec {
        WaveformSpec::Harmonic { f, .. } | WaveformSpec::DecayingHarmonic { f, .. } => 1e3 / (4.0 * f),
        WaveformSpec::StepRL { l, r, .. } => 1e3 * 4.0 * l / r,
        WaveformSpec::Ramp { t_end, .. } => 1e3 * t_end,
        WaveformSpec::Sampled(w) => 1e3 * longest_monotonic_run(w),
    })
}

/// Headline dB/dt, T/s. Steps use the mean rate over the settling time.
pub fn reported_dbdt(spec: &WaveformSpec) -> Result<f64> {
    spec.validate()?;
    Ok(match spec {
        WaveformSpec::Harmonic { b0, f } | WaveformSpec::DecayingHarmonic { b0, f, .. } => 2.0 * PI * f * b0,
        WaveformSpec::StepRL { b0, .. } => b0 / (eta_of(spec)? * 1e-3),
        WaveformSpec::Ramp { k, .. } => *k,
        WaveformSpec::Sampled(w) => w
            .samples
            .windows(2)
            .map(|p| (p[1].field.b - p[0].field.b).norm() / (p[1].t - p[0].t))
            .fold(0.0, f64::max),
    })
}

/// Initial slope B0 R / L of a step input, T/s.
pub fn instantaneous_step_dbdt(spec: &WaveformSpec) -> Option<f64> {
    match spec {
        WaveformSpec::StepRL { b0, l, r } => Some(b0 * r / l),
        _ => None,
    }
}

/// |H| f, A/(m s). Steps use (|H| / eta) scaled by `step_factor`.
pub fn hf_product(spec: &WaveformSpec, step_factor: f64) -> Result<f64> {
    spec.validate()?;
    let eta_s = eta_of(spec)? * 1e-3;
    Ok(match spec {
        WaveformSpec::Harmonic { b0, f } | WaveformSpec::DecayingHarmonic { b0, f, .. } => b0 / MU0 * f,
        WaveformSpec::StepRL { b0, .. } => b0 / MU0 / eta_s * step_factor,
        WaveformSpec::Ramp { k, t_end } => k * t_end / MU0 / eta_s,
        WaveformSpec::Sampled(w) => {
            let bmax = w.samples.iter().map(|s| s.field.b.norm()).fold(0.0, f64::max);
            if eta_s > 0.0 {
                bmax / MU0 / (4.0 * eta_s)
            } else {
                0.0
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub category: String,
    pub eta_ms: f64,
    pub max_allowed_dbdt: f64,
    pub reported_dbdt: f64,
    /// Step inputs only: B0 R / L.
    pub instantaneous_dbdt: Option<f64>,
    pub hf_product: f64,
    pub hf_limit: f64,
    pub dbdt_pass: bool,
    pub hf_pass: bool,
    /// Notes such as convention-fitted cells.
    pub notes: Vec<String>,
}

impl SafetyReport {
    pub fn pass(&self) -> bool {
        self.dbdt_pass && self.hf_pass
    }

    /// One criterion per line.
    pub fn to_text(&self) -> String {
        let v = |b: bool| if b { "PASS" } else { "FAIL" };
        let mut s = format!(
            "category {}: eta = {:.6e} ms\n\
             dbdt {}: reported {:.6e} T/s, limit {:.6e} T/s\n\
             hf {}: {:.6e} A/(m s), limit {:.6e} A/(m s)\n",
            self.category,
            self.eta_ms,
            v(self.dbdt_pass),
            self.reported_dbdt,
            self.max_allowed_dbdt,
            v(self.hf_pass),
            self.hf_product,
            self.hf_limit
        );
        if let Some(i) = self.instantaneous_dbdt {
            s.push_str(&format!("info: instantaneous step dbdt {i:.6e} T/s\n"));
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }
}

pub fn audit(category: &str, spec: &WaveformSpec) -> Result<SafetyReport> {
    audit_with(category, spec, STEP_HF_FACTOR)
}

pub fn audit_with(category: &str, spec: &WaveformSpec, step_factor: f64) -> Result<SafetyReport> {
    let eta = eta_of(spec)?;
    let reported = reported_dbdt(spec)?;
    let hf = hf_product(spec, step_factor)?;
    // A constant sampled field has no monotonic segment at all.
    let limit = if eta > 0.0 { dbdt_limit(eta)? } else { f64::INFINITY };
    let mut notes = Vec::new();
    if matches!(spec, WaveformSpec::StepRL { .. }) {
        notes.push(format!("step |H|f uses the fitted convention factor {step_factor}"));
    }
    Ok(SafetyReport {
        category: category.to_string(),
        eta_ms: eta,
        max_allowed_dbdt: limit,
        reported_dbdt: reported,
        instantaneous_dbdt: instantaneous_step_dbdt(spec),
        hf_product: hf,
        hf_limit: HF_LIMIT,
        dbdt_pass: reported <= limit,
        hf_pass: hf < HF_LIMIT,
        notes,
    })
}

pub fn audit_waveform(w: &Waveform) -> Result<SafetyReport> {
    let label = w.category.clone().unwrap_or_else(|| "custom".to_string());
    audit(&label, &WaveformSpec::Sampled(w.clone()))
}

/// The reference field categories, labelled as in the field-definition
/// text (I locomotion rotation, II function step).
pub fn reference_categories() -> Vec<(&'static str, WaveformSpec)> {
    vec![
        ("I", WaveformSpec::Harmonic { b0: 0.015, f: 3.0 }),
        ("II", WaveformSpec::StepRL { b0: 0.034, l: ACTUATION_COIL_L, r: ACTUATION_COIL_R }),
        ("IIIa-step", WaveformSpec::StepRL { b0: 0.060, l: 1.9e-4, r: 2.5 }),
        ("IIIa-ramp", WaveformSpec::Ramp { k: 12.0, t_end: 5e-3 }),
        ("IIIb", WaveformSpec::DecayingHarmonic { b0: 0.065, k_d: 0.002, f: 45.0 }),
        ("IV", WaveformSpec::Harmonic { b0: 9.34e-3, f: 75.4e3 }),
    ]
}

/// Audits all reference categories, tagging the cells whose published
/// values are not reproducible by formula.
pub fn reference_table() -> Result<Vec<SafetyReport>> {
    reference_categories()
        .into_iter()
        .map(|(label, spec)| {
            let mut r = audit(label, &spec)?;
            if label == "IV" {
                r.notes.push("reference dbdt 2.7e-13 T/s is inconsistent with 2 pi f B0; computed value reported".into());
            }
            Ok(r)
        })
        .collect()
}
