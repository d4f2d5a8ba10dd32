//! Magnetize/demagnetize field programs, the coercivity-gated
//! magnetization state machine, and the lumped heating model.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fieldspace::{FieldState, Frame, Vec3, Waveform};
use crate::robot_model::{MagnetizationState, Materials, Mode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReprogramKind {
    StepMagnetize,
    RampMagnetize,
    Demagnetize,
}

/// Reprogramming pulse constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReprogramParams {
    /// T.
    pub b_mag: f64,
    /// Ramp rate, T/s.
    pub k_ramp: f64,
    /// Pulse hold time, s.
    pub t_mag: f64,
    /// T.
    pub b_demag: f64,
    /// Envelope decrement per period, T.
    pub k_demag: f64,
    /// Hz.
    pub f_demag: f64,
    /// Coil inductance (H) and resistance (ohm) for the step pulse.
    pub l_coil: f64,
    pub r_coil: f64,
}

impl Default for ReprogramParams {
    fn default() -> Self {
        ReprogramParams {
            b_mag: 0.060,
            k_ramp: 12.0,
            t_mag: 5e-3,
            b_demag: 0.065,
            k_demag: 0.002,
            f_demag: 45.0,
            l_coil: 1.9e-4,
            r_coil: 2.5,
        }
    }
}

impl ReprogramParams {
    /// Time at which the demagnetizing envelope reaches zero, s.
    pub fn demag_end(&self) -> f64 {
        self.b_demag / (self.k_demag * self.f_demag)
    }

    /// 2% settling time of the step pulse, s.
    pub fn step_settling(&self) -> f64 {
        4.0 * self.l_coil / self.r_coil
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReprogramWaveform {
    pub kind: ReprogramKind,
    /// Unit vector in the material XY plane.
    pub direction: Vec3,
    pub params: ReprogramParams,
}

impl ReprogramWaveform {
    pub fn magnetize(kind: ReprogramKind, phi_deg: f64, params: ReprogramParams) -> Self {
        let p = phi_deg.to_radians();
        ReprogramWaveform { kind, direction: Vec3::new(p.cos(), p.sin(), 0.0), params }
    }

    pub fn demagnetize(params: ReprogramParams) -> Self {
        ReprogramWaveform { kind: ReprogramKind::Demagnetize, direction: Vec3::x(), params }
    }

    pub fn duration(&self) -> f64 {
        match self.kind {
            ReprogramKind::Demagnetize => self.params.demag_end(),
            ReprogramKind::RampMagnetize => self.params.t_mag.max(self.params.b_mag / self.params.k_ramp),
            ReprogramKind::StepMagnetize => self.params.t_mag,
        }
    }

    /// Signed field along `direction` at time t.
    pub fn value(&self, t: f64) -> Result<f64> {
        match self.kind {
            ReprogramKind::Demagnetize => demag_waveform(t, &self.params),
            ReprogramKind::StepMagnetize => magnetize_waveform(MagnetizeKind::Step, t, &self.params),
            ReprogramKind::RampMagnetize => magnetize_waveform(MagnetizeKind::Ramp, t, &self.params),
        }
    }

    /// Largest |B| the pulse is allowed to reach, T.
    pub fn peak(&self) -> f64 {
        match self.kind {
            ReprogramKind::Demagnetize => self.params.b_demag,
            _ => self.params.b_mag,
        }
    }

    /// Uniform-field samples (global frame), `n` per pulse plus endpoint.
    pub fn sample(&self, n: usize) -> Result<Waveform> {
        let mut w = Waveform::new();
        w.category = Some(
            match self.kind {
                ReprogramKind::StepMagnetize | ReprogramKind::RampMagnetize => "IIIa",
                ReprogramKind::Demagnetize => "IIIb",
            }
            .to_string(),
        );
        let tag = match self.kind {
            ReprogramKind::StepMagnetize => "magnetize_step",
            ReprogramKind::RampMagnetize => "magnetize_ramp",
            ReprogramKind::Demagnetize => "demagnetize",
        };
        let d = self.duration();
        for i in 0..=n {
            let t = d * i as f64 / n as f64;
            let v = self.value(t.min(d))?;
            w.push(t, FieldState::new(self.direction * v, [0.0; 5], Frame::Global), tag);
        }
        Ok(w)
    }
}

/// Decaying alternating field: (B - K f t) cos(2 pi f t).
pub fn demag_waveform(t: f64, p: &ReprogramParams) -> Result<f64> {
    let end = p.demag_end();
    if !(0.0..=end).contains(&t) {
        return Err(Error::invalid(format!("t = {t} s outside [0, {end}] s")));
    }
    let env = (p.b_demag - p.k_demag * p.f_demag * t).max(0.0);
    Ok(env * (2.0 * PI * p.f_demag * t).cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MagnetizeKind {
    Step,
    Ramp,
}

pub fn magnetize_waveform(kind: MagnetizeKind, t: f64, p: &ReprogramParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t must be nonnegative"));
    }
    Ok(match kind {
        MagnetizeKind::Step => p.b_mag * (1.0 - (-t * p.r_coil / p.l_coil).exp()),
        MagnetizeKind::Ramp => (p.k_ramp * t).min(p.b_mag),
    })
}

/// State after a completed pulse. Hard components keep their values as
/// long as the pulse peak stays below every hard coercivity.
pub fn apply_reprogram(
    state: &MagnetizationState,
    waveform: &ReprogramWaveform,
    materials: &Materials,
) -> Result<MagnetizationState> {
    let peak = waveform.peak();
    let hci = materials.min_hard_coercivity();
    if peak >= hci {
        return Err(Error::Refused(format!(
            "peak {:.1} mT reaches the {:.1} mT coercivity of a hard component; it would be remagnetized",
            peak * 1e3,
            hci * 1e3
        )));
    }
    let mut next = state.clone();
    match waveform.kind {
        ReprogramKind::Demagnetize => {
            next.mode = Mode::Locomotion;
            next.programmable_magnetized = false;
            next.phi = 0.0;
            next.m_rprog = materials.rprog.m_demagnetized.unwrap_or(0.0);
            next.m_heat = materials.heating.m_demagnetized.unwrap_or(0.0);
        }
        _ => {
            let d = waveform.direction;
            if d.z.abs() > 1e-12 {
                return Err(Error::invalid("magnetizing direction must lie in the material XY plane"));
            }
            let phi_deg = d.y.atan2(d.x).to_degrees();
            let mode = Mode::from_phi_deg(phi_deg)
                .ok_or_else(|| Error::invalid(format!("phi = {phi_deg:.3} deg selects no function mode")))?;
            next.mode = mode;
            next.programmable_magnetized = true;
            next.phi = mode.phi().unwrap();
            next.m_rprog = materials.rprog.m_magnetized;
            next.m_heat = materials.heating.m_magnetized;
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalState {
    /// deg C.
    pub temperature: f64,
    /// kg.
    pub mass: f64,
    /// J/(kg K).
    pub specific_heat: f64,
    /// W.
    pub heat_power: f64,
    /// deg C.
    pub ambient: f64,
    /// Cooling time constant, s.
    pub tau_cool: f64,
}

impl Default for ThermalState {
    fn default() -> Self {
        ThermalState {
            temperature: 26.3,
            mass: 5.26e-6,
            specific_heat: 661.0,
            heat_power: 1.36e-3,
            ambient: 26.3,
            tau_cool: 30.0,
        }
    }
}

/// Remote heating field amplitude, T.
pub const HEAT_FIELD: f64 = 9.34e-3;
/// Remote heating field frequency, Hz.
pub const HEAT_FREQUENCY: f64 = 75.4e3;

/// Lossless heating while the field is on; exponential relaxation to
/// ambient while it is off.
pub fn heat_step(ts: &ThermalState, dt: f64, field_on: bool) -> Result<ThermalState> {
    if !(dt >= 0.0) {
        return Err(Error::invalid("dt must be nonnegative"));
    }
    let mut next = *ts;
    if dt == 0.0 {
        return Ok(next);
    }
    if field_on {
        next.temperature += ts.heat_power * dt / (ts.mass * ts.specific_heat);
    } else {
        next.temperature = ts.ambient + (ts.temperature - ts.ambient) * (-dt / ts.tau_cool).exp();
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeatSource {
    Heat,
    Rprog,
}

/// Heating power of `a` relative to `b`, from the observed rise times
/// (15 s for the heating component, 60 s for the reprogrammable module).
pub fn heating_power_ratio(a: HeatSource, b: HeatSource) -> f64 {
    let rise = |s: HeatSource| match s {
        HeatSource::Heat => 15.0,
        HeatSource::Rprog => 60.0,
    };
    rise(b) / rise(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn demag_examples() {
        let p = ReprogramParams::default();
        assert_relative_eq!(demag_waveform(0.0, &p).unwrap(), 0.065);
        assert!(demag_waveform(1.0 / 180.0, &p).unwrap().abs() < 1e-15);
        assert_relative_eq!(p.demag_end(), 0.065 / 0.09, epsilon = 1e-15);
        assert!(demag_waveform(-0.1, &p).is_err());
        assert!(demag_waveform(0.8, &p).is_err());
    }

    #[test]
    fn magnetize_examples() {
        let p = ReprogramParams::default();
        assert_relative_eq!(magnetize_waveform(MagnetizeKind::Ramp, 5e-3, &p).unwrap(), 0.06, epsilon = 1e-15);
        assert_eq!(magnetize_waveform(MagnetizeKind::Step, 0.0, &p).unwrap(), 0.0);
        let ts = p.step_settling();
        assert_relative_eq!(ts, 0.304e-3, epsilon = 1e-12);
        assert!((ts - 0.307e-3).abs() / 0.307e-3 < 0.02);
        let frac = magnetize_waveform(MagnetizeKind::Step, ts, &p).unwrap() / p.b_mag;
        assert!(frac > 0.98);
    }

    #[test]
    fn heat_examples() {
        let ts = ThermalState::default();
        let a = heat_step(&ts, 35.0, true).unwrap();
        assert!((a.temperature - 40.0).abs() < 0.2);
        assert_eq!(heat_step(&ts, 0.0, true).unwrap(), ts);
        let h = heat_step(&ts, 17.5, true).unwrap();
        assert_relative_eq!(h.temperature - ts.temperature, 6.845, epsilon = 0.01);
        let cool = heat_step(&a, 30.0, false).unwrap();
        assert_relative_eq!(cool.temperature - 26.3, (a.temperature - 26.3) / std::f64::consts::E, epsilon = 1e-12);
    }

    #[test]
    fn power_ratio() {
        assert_eq!(heating_power_ratio(HeatSource::Heat, HeatSource::Rprog), 4.0);
        assert_eq!(heating_power_ratio(HeatSource::Heat, HeatSource::Heat), 1.0);
        assert_eq!(1.0 / heating_power_ratio(HeatSource::Heat, HeatSource::Rprog), 0.25);
    }

    #[test]
    fn refuses_hard_remagnetization() {
        let m = Materials::default();
        let st = MagnetizationState::locomotion(&m);
        let p = ReprogramParams { b_mag: 0.1, ..Default::default() };
        let w = ReprogramWaveform::magnetize(ReprogramKind::RampMagnetize, 90.0, p);
        assert!(matches!(apply_reprogram(&st, &w, &m), Err(Error::Refused(_))));
    }
}
