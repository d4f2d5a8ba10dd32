//! Scenario files (TOML). See `docs/config.md` for the schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beam_mech::activation_threshold;
use crate::gaits::GaitConfig;
use crate::reprogram_thermal::{ReprogramParams, ThermalState};
use crate::robot_model::{Mode, Robot};
use crate::scaling::ScalePlan;
use crate::{Error, Result, COIL_MAX_B};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitName {
    RollLength,
    RollWidth,
    Crawl,
    SpinWalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    #[default]
    Ramp,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    /// Magnetize the programmable parts along `phi_deg`, or demagnetize.
    SetMode {
        #[serde(default)]
        phi_deg: Option<f64>,
        #[serde(default)]
        demagnetize: bool,
        #[serde(default)]
        pulse: PulseShape,
    },
    Gait {
        gait: GaitName,
        /// mT; defaults to the gait's own field.
        #[serde(default)]
        b_mt: Option<f64>,
        frequency: f64,
        /// Rolling duration, s.
        #[serde(default)]
        duration: Option<f64>,
        /// Crawl cycles or spin-walk steps.
        #[serde(default)]
        cycles: Option<usize>,
        #[serde(default)]
        heading_deg: f64,
        #[serde(default)]
        steer_deg_per_s: f64,
    },
    Function {
        mode: String,
        b_mt: f64,
        duration: f64,
    },
    Heat {
        duration: f64,
    },
    Wait {
        duration: f64,
    },
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::SetMode { .. } => "set_mode",
            Step::Gait { .. } => "gait",
            Step::Function { .. } => "function",
            Step::Heat { .. } => "heat",
            Step::Wait { .. } => "wait",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// "air", "oil" or "ideal".
    pub env: String,
    pub robot: Robot,
    pub gait: GaitConfig,
    pub reprogram: ReprogramParams,
    pub thermal: ThermalState,
    pub scale: ScalePlan,
    pub steps: Vec<Step>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "scenario".into(),
            env: "oil".into(),
            robot: Robot::default(),
            gait: GaitConfig::default(),
            reprogram: ReprogramParams::default(),
            thermal: ThermalState::default(),
            scale: ScalePlan::default(),
            steps: Vec::new(),
        }
    }
}

fn cfg_err(step: usize, msg: impl Into<String>) -> Error {
    Error::Config { step: Some(step), msg: msg.into() }
}

fn positive(step: usize, what: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(cfg_err(step, format!("{what} must be positive")));
    }
    Ok(())
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config { step: None, msg: e.to_string() })?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml(&text)
    }

    /// Checks every step against the mode it will run in. Returns the mode
    /// sequence, one entry per step (the mode in force after the step).
    pub fn validate(&self) -> Result<Vec<Mode>> {
        if crate::gaits::Env::preset(&self.env).is_none() {
            return Err(Error::Config { step: None, msg: format!("unknown env '{}'", self.env) });
        }
        self.robot.geometry.validate().map_err(|e| Error::Config { step: None, msg: e.to_string() })?;
        let mut mode = Mode::Locomotion;
        let mut modes = Vec::with_capacity(self.steps.len());
        for (i, st) in self.steps.iter().enumerate() {
            match st {
                Step::SetMode { phi_deg, demagnetize, .. } => match (phi_deg, demagnetize) {
                    (None, true) => mode = Mode::Locomotion,
                    (Some(p), false) => {
                        mode = Mode::from_phi_deg(*p)
                            .ok_or_else(|| cfg_err(i, format!("phi = {p} deg selects no function mode")))?;
                    }
                    _ => return Err(cfg_err(i, "set_mode needs exactly one of phi_deg or demagnetize = true")),
                },
                Step::Gait { gait, b_mt, frequency, duration, cycles, .. } => {
                    if let Some(b) = b_mt {
                        if !(*b >= 0.0 && b * 1e-3 <= COIL_MAX_B) {
                            return Err(cfg_err(i, format!("b_mt = {b} outside the coil range")));
                        }
                    }
                    match gait {
                        GaitName::RollLength | GaitName::RollWidth => {
                            if duration.is_none() {
                                return Err(cfg_err(i, "rolling needs a duration"));
                            }
                        }
                        GaitName::Crawl => {
                            if mode != Mode::Locomotion {
                                return Err(cfg_err(i, "two-anchor crawling requires the locomotion mode"));
                            }
                            if cycles.is_none() {
                                return Err(cfg_err(i, "crawling needs cycles"));
                            }
                            positive(i, "frequency", *frequency)?;
                        }
                        GaitName::SpinWalk => {
                            if cycles.is_none() {
                                return Err(cfg_err(i, "spin-walking needs cycles"));
                            }
                            positive(i, "frequency", *frequency)?;
                            if let (Some(b), Some(thr)) = (b_mt, activation_threshold(mode)) {
                                if b * 1e-3 >= thr {
                                    return Err(cfg_err(i, format!("spin-walk field would activate {}", mode.name())));
                                }
                            }
                        }
                    }
                }
                Step::Function { mode: m, b_mt, duration } => {
                    let want: Mode = m.parse().map_err(|e: Error| cfg_err(i, e.to_string()))?;
                    if !want.is_function() {
                        return Err(cfg_err(i, "function steps need a function mode"));
                    }
                    if want != mode {
                        return Err(cfg_err(i, format!("{} step while in {} mode", want.name(), mode.name())));
                    }
                    if !(*b_mt >= 0.0 && b_mt * 1e-3 <= COIL_MAX_B) {
                        return Err(cfg_err(i, format!("b_mt = {b_mt} outside the coil range")));
                    }
                    positive(i, "duration", *duration)?;
                }
                Step::Heat { duration } | Step::Wait { duration } => positive(i, "duration", *duration)?,
            }
            modes.push(mode);
        }
        Ok(modes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal() {
        let s = Scenario::from_toml("").unwrap();
        assert!(s.steps.is_empty());
        assert!(s.validate().unwrap().is_empty());
    }

    #[test]
    fn crawl_outside_locomotion_is_rejected() {
        let s = Scenario::from_toml(
            r#"
            [[steps]]
            kind = "set_mode"
            phi_deg = 90
            [[steps]]
            kind = "gait"
            gait = "crawl"
            frequency = 1
            cycles = 2
            "#,
        )
        .unwrap();
        assert!(matches!(s.validate(), Err(Error::Config { step: Some(1), .. })));
    }

    #[test]
    fn function_needs_matching_mode() {
        let s = Scenario::from_toml(
            r#"
            [[steps]]
            kind = "function"
            mode = "cutting"
            b_mt = 10
            duration = 1
            "#,
        )
        .unwrap();
        assert!(matches!(s.validate(), Err(Error::Config { step: Some(0), .. })));
    }

    #[test]
    fn robot_override() {
        let s = Scenario::from_toml("[robot.geometry]\nl_inner = 0.0007\n").unwrap();
        assert_eq!(s.robot.geometry.l_inner, 0.0007);
        assert_eq!(s.robot.geometry.l_tent, Robot::default().geometry.l_tent);
    }
}
