//! Gait field programs (rolling, two-anchor crawling, spin-walking) and a
//! quasi-static kinematic stepper.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::actuation::{solve_fields, DesignMatrix};
use crate::beam_mech::{activation_threshold, solve_tentacle, TentacleParams};
use crate::fieldspace::{map_to_global, rx, ry, rz, Rotation, Vec3, Waveform};
use crate::robot_model::Mode;
use crate::{Error, Result, COIL_MAX_B};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RollAxis {
    Length,
    Width,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaitKind {
    RollLength,
    RollWidth,
    TwoAnchorCrawl,
    SpinWalk,
}

/// Heading about the moment axis over time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Steer {
    Constant(f64),
    /// theta0 + rate * t, rad and rad/s.
    Linear { theta0: f64, rate: f64 },
}

impl Steer {
    pub fn theta(&self, t: f64) -> f64 {
        match *self {
            Steer::Constant(th) => th,
            Steer::Linear { theta0, rate } => theta0 + rate * t,
        }
    }

    pub fn rate(&self) -> f64 {
        match *self {
            Steer::Constant(_) => 0.0,
            Steer::Linear { rate, .. } => rate,
        }
    }
}

impl Default for Steer {
    fn default() -> Self {
        Steer::Constant(0.0)
    }
}

/// Calibration and timing constants for the gait generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitConfig {
    /// Effective rolling circumference per axis, m.
    pub circumference_length: f64,
    pub circumference_width: f64,
    pub roll_b: f64,
    pub roll_max_f: f64,
    /// Crawl stride per cycle, m.
    pub stride: f64,
    pub crawl_tilt_deg: f64,
    pub crawl_b_high: f64,
    pub crawl_b_low: f64,
    pub crawl_max_f: f64,
    /// Fractions of one crawl cycle spent in each of the five phases.
    pub phase_fractions: [f64; 5],
    /// Null-space multiplier for the heading-hold term, T/m.
    pub k2: f64,
    pub samples_per_period: usize,
    /// Step-out angular rates about body X, Y, Z, rad/s.
    pub step_out: [f64; 3],
    /// Net advance per spin-walk step, m.
    pub spin_step_advance: f64,
}

impl Default for GaitConfig {
    fn default() -> Self {
        GaitConfig {
            circumference_length: 6.75e-3,
            circumference_width: 6.21e-3,
            roll_b: 0.015,
            roll_max_f: 1.0,
            stride: 0.742e-3,
            crawl_tilt_deg: 32.0,
            crawl_b_high: 0.022,
            crawl_b_low: 0.008,
            crawl_max_f: 2.5,
            phase_fractions: [0.2; 5],
            k2: 0.4,
            samples_per_period: 200,
            step_out: [16.5, 16.1, 1.56],
            spin_step_advance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitPlan {
    pub kind: GaitKind,
    /// Nominal field magnitude, T.
    pub b: f64,
    pub frequency: f64,
    /// Whole or fractional periods.
    pub cycles: f64,
    pub duration: f64,
    pub steer: Steer,
    pub mode: Mode,
    pub config: GaitConfig,
}

/// Kinematic set-point of a plan at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub b: f64,
    /// Ideal contact displacement since t = 0, m (before slip).
    pub travel: f64,
}

impl GaitPlan {
    /// Commanded pose at time t (clamped to the plan duration).
    pub fn pose_at(&self, t: f64) -> Pose {
        let t = t.clamp(0.0, self.duration);
        let f = self.frequency;
        let theta = self.steer.theta(t);
        let c = &self.config;
        match self.kind {
            GaitKind::RollLength | GaitKind::RollWidth => {
                let ang = 2.0 * PI * f * t;
                let circ = if self.kind == GaitKind::RollLength { c.circumference_length } else { c.circumference_width };
                let travel = circ * f * t;
                if self.kind == GaitKind::RollLength {
                    Pose { alpha: ang, beta: 0.0, theta, b: self.b, travel }
                } else {
                    Pose { alpha: 0.0, beta: ang, theta, b: self.b, travel }
                }
            }
            GaitKind::TwoAnchorCrawl => {
                let u = f * t;
                let k = u.floor().min((self.cycles - 1.0).max(0.0));
                let (ph, x) = crawl_phase(&c.phase_fractions, u - k);
                let tilt = c.crawl_tilt_deg.to_radians();
                let (hi, lo) = (c.crawl_b_high, c.crawl_b_low);
                let (alpha, b, within) = match ph {
                    0 => (0.0, hi, 0.0),
                    1 => (tilt * x, hi, 0.0),
                    2 => (tilt, hi + (lo - hi) * x, 0.5 * x),
                    3 => (tilt * (1.0 - x), lo, 0.5),
                    _ => (0.0, lo + (hi - lo) * x, 0.5 + 0.5 * x),
                };
                Pose { alpha, beta: 0.0, theta, b, travel: c.stride * (k + within) }
            }
            GaitKind::SpinWalk => {
                let u = 4.0 * f * t;
                let k = u.floor().min((self.cycles - 1.0).max(0.0));
                let x = (u - k).clamp(0.0, 1.0);
                let tilt = FRAC_PI_2 * (PI * x).sin();
                let (alpha, beta) = if (k as i64) % 2 == 0 { (tilt, 0.0) } else { (0.0, tilt) };
                Pose { alpha, beta, theta, b: self.b, travel: c.spin_step_advance * (k + x) }
            }
        }
    }

    /// Ideal speed along the heading, m/s.
    pub fn ideal_speed(&self) -> f64 {
        let c = &self.config;
        match self.kind {
            GaitKind::RollLength => c.circumference_length * self.frequency,
            GaitKind::RollWidth => c.circumference_width * self.frequency,
            GaitKind::TwoAnchorCrawl => c.stride * self.frequency,
            GaitKind::SpinWalk => c.spin_step_advance * 4.0 * self.frequency,
        }
    }

    /// Commanded angular rate about body X, Y, Z, rad/s.
    fn commanded_rates(&self) -> [f64; 3] {
        let w = 2.0 * PI * self.frequency;
        let steer = self.steer.rate().abs();
        match self.kind {
            GaitKind::RollLength => [w, 0.0, steer],
            GaitKind::RollWidth => [0.0, w, steer],
            GaitKind::TwoAnchorCrawl => {
                let f = self.config.phase_fractions[1].max(1e-12);
                let tilt_rate = self.config.crawl_tilt_deg.to_radians() * self.frequency / f;
                [tilt_rate, 0.0, steer]
            }
            GaitKind::SpinWalk => {
                let peak = FRAC_PI_2 * PI * 4.0 * self.frequency;
                [peak, peak, steer]
            }
        }
    }
}

fn crawl_phase(fr: &[f64; 5], u: f64) -> (usize, f64) {
    let total: f64 = fr.iter().sum();
    let mut acc = 0.0;
    for (i, f) in fr.iter().enumerate() {
        let w = f / total;
        if u < acc + w || i == 4 {
            return (i, ((u - acc) / w).clamp(0.0, 1.0));
        }
        acc += w;
    }
    (4, 1.0)
}

fn check_b(b: f64) -> Result<()> {
    if !(b.is_finite() && (0.0..=COIL_MAX_B).contains(&b)) {
        return Err(Error::invalid(format!("field magnitude {b} T outside [0, {COIL_MAX_B}] T")));
    }
    Ok(())
}

fn sample_plan(plan: &GaitPlan, design: &DesignMatrix, tag: &str) -> Result<Waveform> {
    let mut w = Waveform::new();
    if plan.duration <= 0.0 {
        return Ok(w);
    }
    let spp = plan.config.samples_per_period.max(1);
    let period_rate = match plan.kind {
        GaitKind::SpinWalk => 4.0 * plan.frequency,
        _ => plan.frequency,
    };
    let n = if period_rate > 0.0 {
        (plan.duration * period_rate * spp as f64).round().max(1.0) as usize
    } else {
        spp
    };
    let dt = plan.duration / n as f64;
    for i in 0..n {
        let t = i as f64 * dt;
        let p = plan.pose_at(t);
        let inter = solve_fields(design, p.theta, &Vec3::zeros(), p.b, plan.config.k2)?;
        w.push(t, map_to_global(p.alpha, p.beta, &inter)?, tag);
    }
    Ok(w)
}

pub fn plan_roll(
    axis: RollAxis,
    b: f64,
    f_roll: f64,
    duration: f64,
    steer: Steer,
    cfg: &GaitConfig,
    design: &DesignMatrix,
) -> Result<(GaitPlan, Waveform)> {
    check_b(b)?;
    if !(f_roll >= 0.0 && f_roll <= cfg.roll_max_f) || !(duration >= 0.0) {
        return Err(Error::invalid(format!("roll frequency must lie in [0, {}] Hz", cfg.roll_max_f)));
    }
    let plan = GaitPlan {
        kind: if axis == RollAxis::Length { GaitKind::RollLength } else { GaitKind::RollWidth },
        b,
        frequency: f_roll,
        cycles: f_roll * duration,
        duration,
        steer,
        mode: design.mode,
        config: cfg.clone(),
    };
    let w = sample_plan(&plan, design, "roll")?;
    Ok((plan, w))
}

pub fn plan_crawl(cycles: usize, f_crawl: f64, steer: Steer, cfg: &GaitConfig, design: &DesignMatrix) -> Result<(GaitPlan, Waveform)> {
    if !(f_crawl > 0.0 && f_crawl <= cfg.crawl_max_f) {
        return Err(Error::invalid(format!("crawl frequency must lie in (0, {}] Hz", cfg.crawl_max_f)));
    }
    if design.mode != Mode::Locomotion {
        return Err(Error::Interlock("two-anchor crawling requires the locomotion mode".into()));
    }
    check_b(cfg.crawl_b_high)?;
    check_b(cfg.crawl_b_low)?;
    let plan = GaitPlan {
        kind: GaitKind::TwoAnchorCrawl,
        b: cfg.crawl_b_high,
        frequency: f_crawl,
        cycles: cycles as f64,
        duration: cycles as f64 / f_crawl,
        steer,
        mode: Mode::Locomotion,
        config: cfg.clone(),
    };
    let w = sample_plan(&plan, design, "crawl")?;
    Ok((plan, w))
}

/// Alternating quarter-turn tilts about body X then Y, each out and back
/// within one step (four steps per `f_step` period).
pub fn plan_spin_walk(
    steps: usize,
    b: f64,
    f_step: f64,
    steer: Steer,
    cfg: &GaitConfig,
    design: &DesignMatrix,
) -> Result<(GaitPlan, Waveform)> {
    check_b(b)?;
    let mode = design.mode;
    if let Some(thr) = activation_threshold(mode) {
        if b >= thr {
            return Err(Error::Interlock(format!(
                "{} T would activate {} (threshold {} T)",
                b,
                mode.name(),
                thr
            )));
        }
    }
    if !(f_step > 0.0) {
        return Err(Error::invalid("spin-walk frequency must be positive"));
    }
    let plan = GaitPlan {
        kind: GaitKind::SpinWalk,
        b,
        frequency: f_step,
        cycles: steps as f64,
        duration: steps as f64 / (4.0 * f_step),
        steer,
        mode,
        config: cfg.clone(),
    };
    let w = sample_plan(&plan, design, "spin_walk")?;
    Ok((plan, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Env {
    /// Fraction of contact displacement lost to slipping.
    pub slip_factor: f64,
    pub gravity: bool,
    /// Height of the substrate plane, m.
    pub substrate_z: f64,
}

impl Env {
    pub fn ideal() -> Self {
        Env { slip_factor: 0.0, gravity: true, substrate_z: 0.0 }
    }

    /// Fitted to the top crawl speed in oil (1.06 mm/s vs 1.855 mm/s ideal).
    pub fn oil() -> Self {
        Env { slip_factor: 1.0 - 1.06 / 1.855, ..Self::ideal() }
    }

    /// Fitted to the top crawl speed on a dry substrate (0.78 mm/s).
    pub fn air() -> Self {
        Env { slip_factor: 1.0 - 0.78 / 1.855, ..Self::ideal() }
    }

    pub fn preset(name: &str) -> Option<Env> {
        match name {
            "air" => Some(Env::air()),
            "oil" => Some(Env::oil()),
            "ideal" => Some(Env::ideal()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub contact: bool,
    pub step_out: bool,
}

impl Flags {
    pub fn as_str(&self) -> String {
        let mut parts = Vec::new();
        if self.contact {
            parts.push("contact");
        }
        if self.step_out {
            parts.push("step_out");
        }
        parts.join("|")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub pos: Vec3,
    pub orientation: Rotation,
    /// Tentacle tip angle at the current |B|, rad.
    pub tip_angle: f64,
    pub flags: Flags,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn displacement(&self) -> Vec3 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => b.pos - a.pos,
            _ => Vec3::zeros(),
        }
    }

    pub fn stepped_out(&self) -> bool {
        self.points.iter().any(|p| p.flags.step_out)
    }
}

fn heading_dir(kind: GaitKind, theta: f64) -> Vec3 {
    let base = match kind {
        // rolling about +X carries the body toward -Y; about +Y toward +X
        GaitKind::RollLength => -Vec3::y(),
        GaitKind::RollWidth => Vec3::x(),
        GaitKind::TwoAnchorCrawl | GaitKind::SpinWalk => Vec3::y(),
    };
    rz(theta) * base
}

/// Quasi-static stepper: orientation follows the field set-point while the
/// commanded rates stay below step-out; contact travel is reduced by slip.
/// With gravity off there is no contact and no travel.
pub fn simulate(plan: &GaitPlan, waveform: &Waveform, params: &TentacleParams, env: &Env) -> Result<Trajectory> {
    if !(0.0..=1.0).contains(&env.slip_factor) {
        return Err(Error::invalid("slip factor must lie in [0, 1]"));
    }
    let rates = plan.commanded_rates();
    let lost = rates.iter().zip(plan.config.step_out.iter()).any(|(w, lim)| w > lim);
    let mut tips: BTreeMap<u64, f64> = BTreeMap::new();
    let mut pts = Vec::with_capacity(waveform.len() + 1);
    let origin = Vec3::new(0.0, 0.0, env.substrate_z);
    let mut times: Vec<f64> = waveform.samples.iter().map(|s| s.t).collect();
    if !times.is_empty() || plan.duration > 0.0 {
        times.push(plan.duration);
    }
    let mut last_t = f64::NEG_INFINITY;
    for &t in &times {
        if t <= last_t {
            continue;
        }
        last_t = t;
        let p = if lost { plan.pose_at(0.0) } else { plan.pose_at(t) };
        let bmag = p.b;
        let tip = match tips.get(&bmag.to_bits()) {
            Some(v) => *v,
            None => {
                let v = solve_tentacle(bmag, params)?.tip_angle();
                tips.insert(bmag.to_bits(), v);
                v
            }
        };
        let travel = if env.gravity { p.travel * (1.0 - env.slip_factor) } else { 0.0 };
        let pos = if plan.steer.rate() == 0.0 {
            origin + heading_dir(plan.kind, p.theta) * travel
        } else {
            // steered: integrate along the changing heading
            origin + integrate_heading(plan, t, env)
        };
        let orient = Rotation::from_matrix(rx(p.alpha) * ry(p.beta) * rz(p.theta));
        pts.push(TrajectoryPoint {
            t,
            pos,
            orientation: orient,
            tip_angle: tip,
            flags: Flags { contact: env.gravity, step_out: lost },
        });
    }
    Ok(Trajectory { points: pts })
}

fn integrate_heading(plan: &GaitPlan, t: f64, env: &Env) -> Vec3 {
    let n = 1000usize;
    let mut acc = Vec3::zeros();
    let mut prev = plan.pose_at(0.0);
    for k in 1..=n {
        let tk = t * k as f64 / n as f64;
        let tm = t * (k as f64 - 0.5) / n as f64;
        let cur = plan.pose_at(tk);
        let d = (cur.travel - prev.travel) * (1.0 - env.slip_factor);
        acc += heading_dir(plan.kind, plan.steer.theta(tm)) * d;
        prev = cur;
    }
    acc
}

/// Stride implied by the tentacle geometry alone: the change in tip-to-tip
/// span between the 8 mT and 22 mT shapes.
pub fn geometric_stride(cfg: &GaitConfig, params: &TentacleParams) -> Result<f64> {
    let hi = solve_tentacle(cfg.crawl_b_high, params)?;
    let lo = solve_tentacle(cfg.crawl_b_low, params)?;
    Ok(2.0 * (lo.tip_y() - hi.tip_y()))
}
