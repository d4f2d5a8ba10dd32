//! Miniaturization: how wrench, beam thickness and payload capacity follow
//! a shrink of the body and tentacles.

use serde::{Deserialize, Serialize};

use crate::beam_mech::{InnerBeamParams, TentacleParams};
use crate::robot_model::{Robot, MM3};
use crate::{Error, Result};

/// Baseline capacities and the clinical requirements they are judged by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Capacity {
    /// Drug chamber, m^3.
    pub drug_volume: f64,
    /// Storage chamber, m^3.
    pub sample_volume: f64,
    /// Cutter tip area, m^2.
    pub cutter_area: f64,
    /// Drug volume for targeted delivery, m^3.
    pub drug_required: f64,
    /// Tissue volume for DNA extraction and PCR, m^3.
    pub sample_required: f64,
    /// Tip area of an off-the-shelf micromilling tool, m^2.
    pub tool_area: f64,
}

impl Default for Capacity {
    fn default() -> Self {
        Capacity {
            drug_volume: 0.230 * MM3,
            sample_volume: 0.064 * MM3,
            cutter_area: 1.47e-4 * 1e-6,
            drug_required: 0.115 * MM3,
            sample_required: 0.0359 * MM3,
            tool_area: 7.85e-5 * 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalePlan {
    pub lambda_body: f64,
    pub lambda_tent: f64,
    /// b_n / b_o for the inner beams. None means lambda_body.
    pub width_factor: Option<f64>,
    pub capacity: Capacity,
}

impl Default for ScalePlan {
    fn default() -> Self {
        ScalePlan {
            lambda_body: 2.07 / 2.50,
            lambda_tent: 2.5 / 4.4,
            width_factor: None,
            capacity: Capacity::default(),
        }
    }
}

impl ScalePlan {
    pub fn uniform(lambda: f64) -> Self {
        ScalePlan { lambda_body: lambda, lambda_tent: lambda, ..Default::default() }
    }

    pub fn identity() -> Self {
        ScalePlan::uniform(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.lambda_body) || !ok(self.lambda_tent) || !self.width_factor.map_or(true, ok) {
            return Err(Error::invalid("scale factors must be positive"));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.width_factor.unwrap_or(self.lambda_body)
    }

    /// Plan equivalent to applying `self` and then `other`.
    pub fn then(&self, other: &ScalePlan) -> ScalePlan {
        ScalePlan {
            lambda_body: self.lambda_body * other.lambda_body,
            lambda_tent: self.lambda_tent * other.lambda_tent,
            width_factor: match (self.width_factor, other.width_factor) {
                (None, None) => None,
                _ => Some(self.width() * other.width()),
            },
            capacity: self.capacity,
        }
    }
}

pub fn wrench_scale(plan: &ScalePlan) -> f64 {
    plan.lambda_body.powi(3)
}

/// Inner beam thickness that keeps the tip rotation unchanged. The torque
/// goes as lambda^3 and the length as lambda, so h^3 b must go as lambda^4.
pub fn inner_thickness(plan: &ScalePlan, h_old: f64) -> Result<f64> {
    if !(h_old > 0.0) {
        return Err(Error::invalid("thickness must be positive"));
    }
    let lb = plan.lambda_body;
    let w = plan.width();
    if w == lb {
        return Ok(lb * h_old);
    }
    Ok(h_old * (lb.powi(4) / w).cbrt())
}

/// Tentacle thickness that keeps h / l, and with it the load parameter.
pub fn tentacle_thickness(plan: &ScalePlan, h_old: f64) -> Result<f64> {
    if !(h_old > 0.0) {
        return Err(Error::invalid("thickness must be positive"));
    }
    Ok(plan.lambda_tent * h_old)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacities {
    pub drug_volume: f64,
    pub sample_volume: f64,
    /// Cutter area that keeps the incision pressure, m^2.
    pub cutter_area: f64,
    /// Generated over transferred heat, relative to baseline.
    pub heating_ratio: f64,
    pub drug_ok: bool,
    pub sample_ok: bool,
    pub cutter_ok: bool,
}

pub fn capacities(plan: &ScalePlan) -> Capacities {
    let v = plan.lambda_body.powi(3);
    let c = &plan.capacity;
    let drug = c.drug_volume * v;
    let sample = c.sample_volume * v;
    let area = c.cutter_area * wrench_scale(plan);
    Capacities {
        drug_volume: drug,
        sample_volume: sample,
        cutter_area: area,
        heating_ratio: plan.lambda_body,
        drug_ok: drug >= c.drug_required,
        sample_ok: sample >= c.sample_required,
        cutter_ok: c.tool_area <= area,
    }
}

/// Robot rescaled by `plan`. Body positions and lengths take lambda_body,
/// tentacle length and thickness take lambda_tent.
pub fn scale_robot(robot: &Robot, plan: &ScalePlan) -> Result<Robot> {
    plan.validate()?;
    let lb = plan.lambda_body;
    let lt = plan.lambda_tent;
    let v = lb * lb * lb;
    let mut r = robot.clone();
    let g = &mut r.geometry;
    g.z_tent *= lb;
    g.t_tent *= lt;
    g.b_tent *= lb;
    g.l_tent *= lt;
    g.z_six *= lb;
    g.y_six = [g.y_six[0] * lb, g.y_six[1] * lb];
    g.v_six *= v;
    g.z_main *= lb;
    g.x_inner = g.x_inner.map(|x| x * lb);
    g.y_inner = g.y_inner.map(|y| y * lb);
    g.v_inner *= v;
    g.z_rprog *= lb;
    g.v_rprog *= v;
    g.z_heat *= lb;
    g.v_heat *= v;
    let h = inner_thickness(plan, 1.0)?;
    g.i_inner *= plan.width() * h * h * h;
    g.l_inner *= lb;
    if let Some(m) = r.mass.as_mut() {
        *m *= v;
    }
    if let Some(c) = r.com.as_mut() {
        *c = c.map(|x| x * lb);
    }
    Ok(r)
}

/// Beam parameters of the scaled robot, for parity checks.
pub fn scaled_beams(robot: &Robot, plan: &ScalePlan) -> Result<(TentacleParams, InnerBeamParams)> {
    let r = scale_robot(robot, plan)?;
    Ok((TentacleParams::from_robot(&r), InnerBeamParams::from_robot(&r)))
}

/// Plain-text feasibility table.
pub fn report(plan: &ScalePlan) -> Result<String> {
    plan.validate()?;
    let c = capacities(plan);
    let ok = |b: bool| if b { "ok" } else { "short" };
    let mut s = String::new();
    s.push_str(&format!("lambda_body {:.6}\nlambda_tent {:.6}\n", plan.lambda_body, plan.lambda_tent));
    s.push_str(&format!("wrench_factor {:.6}\n", wrench_scale(plan)));
    s.push_str(&format!(
        "inner_thickness_um {:.3} {:.3}\n",
        inner_thickness(plan, 20e-6)? * 1e6,
        inner_thickness(plan, 60e-6)? * 1e6
    ));
    s.push_str(&format!("tentacle_thickness_um {:.3}\n", tentacle_thickness(plan, 150e-6)? * 1e6));
    s.push_str(&format!(
        "drug_volume_mm3 {:.6} need {:.6} {}\n",
        c.drug_volume / MM3,
        plan.capacity.drug_required / MM3,
        ok(c.drug_ok)
    ));
    s.push_str(&format!(
        "sample_volume_mm3 {:.6} need {:.6} {}\n",
        c.sample_volume / MM3,
        plan.capacity.sample_required / MM3,
        ok(c.sample_ok)
    ));
    s.push_str(&format!(
        "cutter_area_mm2 {:.4e} tool {:.4e} {}\n",
        c.cutter_area * 1e6,
        plan.capacity.tool_area * 1e6,
        ok(c.cutter_ok)
    ));
    s.push_str(&format!("heating_ratio {:.6}\n", c.heating_ratio));
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrench_examples() {
        assert_relative_eq!(wrench_scale(&ScalePlan::default()), 0.568, max_relative = 1e-3);
        assert_eq!(wrench_scale(&ScalePlan::identity()), 1.0);
        assert_eq!(wrench_scale(&ScalePlan::uniform(0.5)), 0.125);
    }

    #[test]
    fn thickness_examples() {
        let p = ScalePlan::default();
        assert_relative_eq!(inner_thickness(&p, 60e-6).unwrap(), 49.7e-6, max_relative = 1e-3);
        assert_relative_eq!(inner_thickness(&p, 20e-6).unwrap(), 16.6e-6, max_relative = 3e-3);
        assert_relative_eq!(tentacle_thickness(&p, 150e-6).unwrap(), 85.2e-6, max_relative = 1e-3);
        assert!(inner_thickness(&p, 0.0).is_err());
        let q = ScalePlan { width_factor: Some(p.lambda_body), ..p };
        assert_eq!(inner_thickness(&q, 60e-6).unwrap(), inner_thickness(&p, 60e-6).unwrap());
    }

    #[test]
    fn identity_is_bitwise() {
        let r = Robot::default();
        let s = scale_robot(&r, &ScalePlan::identity()).unwrap();
        assert_eq!(format!("{:?}", r), format!("{:?}", s));
    }

    #[test]
    fn default_capacities() {
        let c = capacities(&ScalePlan::default());
        assert_relative_eq!(c.drug_volume / MM3, 0.131, max_relative = 5e-3);
        assert_relative_eq!(c.sample_volume / MM3, 0.0363, max_relative = 5e-3);
        assert_relative_eq!(c.cutter_area * 1e6, 8.34e-5, max_relative = 5e-3);
        assert!(c.drug_ok && c.sample_ok && c.cutter_ok);
    }
}
