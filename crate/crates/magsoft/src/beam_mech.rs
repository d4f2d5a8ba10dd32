//! Beam solvers: the magnetic tentacle boundary value problem, the inner
//! beam equilibrium, fixed-free characterization fits, deviation-angle
//! transforms and the empirical opening curves.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::fieldspace::{rx, rz, Vec3};
use crate::robot_model::{Mode, Robot, TentacleProfile};
pub use crate::robot_model::Shape;
use crate::{Error, Result};

/// Default RK4 steps for the tentacle shooting solver.
pub const DEFAULT_STEPS: usize = 256;

/// Inner-beam tip angle at which the dispensing beams touch, rad.
/// Calibrated once so contact happens at 1.63 mT with the default inner
/// beam, then frozen.
pub const GAMMA_CONTACT: f64 = 0.147_530_510_343_337_06;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TentacleParams {
    /// Young's modulus, Pa.
    pub e: f64,
    /// Second moment of area, m^4.
    pub i: f64,
    /// Magnetization, A/m.
    pub m: f64,
    /// Full tentacle length; each half is l_tent / 2.
    pub l_tent: f64,
    /// Cross-section area, m^2.
    pub area: f64,
}

impl TentacleParams {
    pub fn from_robot(r: &Robot) -> Self {
        let g = &r.geometry;
        TentacleParams {
            e: r.materials.tentacle.youngs_modulus.unwrap_or(3.96e5),
            i: g.tentacle_second_moment(),
            m: r.materials.tentacle.m_magnetized,
            l_tent: g.l_tent,
            area: g.tentacle_area(),
        }
    }

    /// Load parameter k in gamma'' = k cos(gamma), 1/m^2.
    pub fn load(&self, b_z: f64) -> f64 {
        self.m * self.area * b_z / (self.e * self.i)
    }
}

impl Default for TentacleParams {
    fn default() -> Self {
        TentacleParams::from_robot(&Robot::default())
    }
}

/// Solved half-tentacle, from the body (s = 0) to the tip.
#[derive(Debug, Clone, PartialEq)]
pub struct TentacleDeflection {
    pub s: Vec<f64>,
    pub gamma: Vec<f64>,
    /// d(gamma)/ds, 1/m.
    pub dgamma: Vec<f64>,
    /// Span-wise coordinate from the root, m.
    pub y: Vec<f64>,
    /// Vertical offset from the root, m.
    pub z: Vec<f64>,
    pub applied_b: f64,
    pub shape: Shape,
    /// |gamma'(L)| * L at the accepted shot.
    pub residual: f64,
}

impl TentacleDeflection {
    pub fn tip_angle(&self) -> f64 {
        *self.gamma.last().unwrap()
    }

    pub fn tip_y(&self) -> f64 {
        *self.y.last().unwrap()
    }

    pub fn tip_z(&self) -> f64 {
        *self.z.last().unwrap()
    }

    /// Bend angle at arc length `s` (cubic Hermite on the solver grid).
    pub fn gamma_at(&self, s: f64) -> f64 {
        let n = self.s.len() - 1;
        let l = self.s[n];
        let s = s.clamp(0.0, l);
        let h = l / n as f64;
        let j = ((s / h) as usize).min(n - 1);
        let t = (s - self.s[j]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.gamma[j] + h10 * h * self.dgamma[j] + h01 * self.gamma[j + 1] + h11 * h * self.dgamma[j + 1]
    }

    /// Angles at the midpoints of `n` equal segments.
    pub fn sample_midpoints(&self, n: usize) -> Vec<f64> {
        let l = *self.s.last().unwrap();
        (0..n).map(|k| self.gamma_at((k as f64 + 0.5) * l / n as f64)).collect()
    }

    pub fn profile(&self, n: usize) -> TentacleProfile {
        TentacleProfile::symmetric(self.sample_midpoints(n))
    }
}

struct Shot {
    dg: f64,
    vdg: f64,
}

// Dimensionless: sigma in [0, 1], gamma'' = kappa cos(gamma), with the
// linearized sensitivity carried along for Newton steps.
fn shoot(kappa: f64, p: f64, steps: usize, mut record: Option<&mut Vec<[f64; 4]>>) -> Shot {
    let h = 1.0 / steps as f64;
    let f = |x: &[f64; 6]| -> [f64; 6] {
        let (s, c) = x[0].sin_cos();
        [x[1], kappa * c, c, s, x[5], -kappa * s * x[4]]
    };
    let mut x = [0.0, p, 0.0, 0.0, 0.0, 1.0];
    if let Some(r) = record.as_deref_mut() {
        r.push([x[0], x[1], x[2], x[3]]);
    }
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&std::array::from_fn(|i| x[i] + 0.5 * h * k1[i]));
        let k3 = f(&std::array::from_fn(|i| x[i] + 0.5 * h * k2[i]));
        let k4 = f(&std::array::from_fn(|i| x[i] + h * k3[i]));
        for i in 0..6 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let Some(r) = record.as_deref_mut() {
            r.push([x[0], x[1], x[2], x[3]]);
        }
    }
    Shot { dg: x[1], vdg: x[5] }
}

pub fn solve_tentacle(b_z: f64, params: &TentacleParams) -> Result<TentacleDeflection> {
    solve_tentacle_steps(b_z, params, DEFAULT_STEPS)
}

/// Shooting on the root slope: bisection to a tight bracket, then Newton.
pub fn solve_tentacle_steps(b_z: f64, params: &TentacleParams, steps: usize) -> Result<TentacleDeflection> {
    if !b_z.is_finite() || b_z.abs() > 0.1 {
        return Err(Error::invalid("|b_z| must be at most 0.1 T"));
    }
    let p_ok = [params.e, params.i, params.m, params.l_tent, params.area];
    if p_ok.iter().any(|v| !(v.is_finite() && *v > 0.0)) || steps < 2 {
        return Err(Error::invalid("tentacle parameters must be positive"));
    }
    let l = 0.5 * params.l_tent;
    let kappa = params.load(b_z) * l * l;
    let shape = if b_z < 0.0 { Shape::UprightU } else { Shape::InvertedU };

    let p = if kappa == 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = if kappa > 0.0 { (-kappa, 0.0) } else { (0.0, -kappa) };
        let f_lo = shoot(kappa, lo, steps, None).dg;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let fm = shoot(kappa, mid, steps, None).dg;
            if (fm < 0.0) == (f_lo < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut p = 0.5 * (lo + hi);
        let mut res = f64::INFINITY;
        for _ in 0..20 {
            let s = shoot(kappa, p, steps, None);
            res = s.dg.abs();
            if res < 1e-14 {
                break;
            }
            if s.vdg == 0.0 {
                break;
            }
            p -= s.dg / s.vdg;
        }
        if !(res < 1e-10) {
            return Err(Error::solver("tentacle shooting did not converge", res));
        }
        p
    };

    let mut rec = Vec::with_capacity(steps + 1);
    let last = shoot(kappa, p, steps, Some(&mut rec));
    let h = l / steps as f64;
    Ok(TentacleDeflection {
        s: (0..=steps).map(|k| k as f64 * h).collect(),
        gamma: rec.iter().map(|r| r[0]).collect(),
        dgamma: rec.iter().map(|r| r[1] / l).collect(),
        y: rec.iter().map(|r| r[2] * l).collect(),
        z: rec.iter().map(|r| r[3] * l).collect(),
        applied_b: b_z,
        shape,
        residual: last.dg.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerBeamParams {
    pub e: f64,
    pub i: f64,
    /// Lumped tip moment M*V, A m^2.
    pub moment: f64,
    pub length: f64,
}

impl InnerBeamParams {
    pub fn from_robot(r: &Robot) -> Self {
        InnerBeamParams {
            e: r.materials.body.youngs_modulus.unwrap_or(5.7e5),
            i: r.geometry.i_inner,
            moment: r.materials.inner.m_magnetized * r.geometry.v_inner,
            length: r.geometry.l_inner,
        }
    }

    fn stiffness(&self) -> f64 {
        self.e * self.i / self.length
    }
}

impl Default for InnerBeamParams {
    fn default() -> Self {
        InnerBeamParams::from_robot(&Robot::default())
    }
}

fn inner_residual(g: f64, b: f64, p: &InnerBeamParams) -> f64 {
    0.5 * p.moment * b * (3f64.sqrt() * g.cos() + g.sin()) - p.stiffness() * g
}

/// Tip rotation of one inner beam under the function field.
pub fn solve_inner_beam(b_func: f64, params: &InnerBeamParams) -> Result<f64> {
    if !(b_func.is_finite() && b_func >= 0.0) {
        return Err(Error::invalid("b_func must be a nonnegative finite field"));
    }
    if b_func == 0.0 {
        return Ok(0.0);
    }
    let k = params.stiffness();
    let scaled = |g: f64| inner_residual(g, b_func, params) / k;
    // the magnetic torque vanishes once the magnet lines up with the field at 2pi/3
    let (mut lo, mut hi) = (0.0, 2.0 * PI / 3.0);
    if scaled(hi) > 0.0 {
        return Err(Error::solver("no root bracket on [0, 2pi/3]", scaled(hi)));
    }
    let mut g = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = scaled(g);
        if f.abs() < 1e-15 {
            break;
        }
        if f > 0.0 {
            lo = g;
        } else {
            hi = g;
        }
        let df = (0.5 * params.moment * b_func * (g.cos() - 3f64.sqrt() * g.sin()) - k) / k;
        let next = g - f / df;
        g = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-16 {
            break;
        }
    }
    let res = scaled(g).abs();
    if res >= 1e-12 {
        return Err(Error::solver("inner beam root not resolved", res));
    }
    Ok(g)
}

/// Field at which an inner beam reaches `gamma_contact`.
pub fn inner_contact_field(gamma_contact: f64, params: &InnerBeamParams) -> f64 {
    let g = gamma_contact;
    2.0 * params.stiffness() * g / (params.moment * (3f64.sqrt() * g.cos() + g.sin()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Known {
    /// Flexural rigidity, N m^2.
    Ei(f64),
    /// Sample magnetization, A/m.
    M(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationFit {
    /// gamma sec(gamma) per tesla.
    pub slope: f64,
    /// The unknown: M (A/m) when EI was known, EI (N m^2) when M was known.
    pub derived: f64,
    /// Relative RMS misfit of the line.
    pub residual: f64,
}

/// Least-squares line through the origin of gamma sec(gamma) against |B|.
/// `measurements` holds (gamma rad, |B| T) pairs.
pub fn characterize(measurements: &[(f64, f64)], v_sample: f64, l_beam: f64, known: Known) -> Result<CharacterizationFit> {
    if measurements.len() < 2 {
        return Err(Error::invalid("need at least two measurements"));
    }
    if measurements.iter().any(|(g, b)| !(g.abs() < FRAC_PI_2) || !b.is_finite()) {
        return Err(Error::invalid("tip angles must lie within (-pi/2, pi/2)"));
    }
    let sxx: f64 = measurements.iter().map(|(_, b)| b * b).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all test fields are zero"));
    }
    let ys: Vec<f64> = measurements.iter().map(|(g, _)| g / g.cos()).collect();
    let sxy: f64 = measurements.iter().zip(&ys).map(|((_, b), y)| b * y).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = measurements.iter().zip(&ys).map(|((_, b), y)| (y - slope * b).powi(2)).sum();
    let ss_y: f64 = ys.iter().map(|y| y * y).sum();
    let residual = if ss_y > 0.0 { (ss_res / ss_y).sqrt() } else { 0.0 };
    let vl = v_sample * l_beam;
    let derived = match known {
        Known::Ei(ei) => slope * ei / vl,
        Known::M(m) => m * vl / slope,
    };
    Ok(CharacterizationFit { slope, derived, residual })
}

/// Solves gamma sec(gamma) = y for gamma in (-pi/2, pi/2).
pub fn gamma_from_gsec(y: f64) -> f64 {
    let mut g = y.atan().clamp(-1.5, 1.5) * 0.5;
    for _ in 0..100 {
        let f = g / g.cos() - y;
        let df = (g.cos() + g * g.sin()) / (g.cos() * g.cos());
        let step = f / df;
        g -= step;
        g = g.clamp(-FRAC_PI_2 + 1e-9, FRAC_PI_2 - 1e-9);
        if step.abs() < 1e-16 {
            break;
        }
    }
    g
}

/// Direction of the function-mode moment relative to the locomotion
/// moment, given the deviation angle xi.
pub fn deviation_direction(mode: Mode, shape: Shape, xi: f64) -> Result<Vec3> {
    let phi = mode.phi().ok_or_else(|| Error::invalid("deviation is only defined for function modes"))?;
    let r = match shape {
        Shape::InvertedU => rz(phi - FRAC_PI_2) * rx(-xi),
        Shape::UprightU => rz(-phi + 1.5 * PI) * rx(xi),
    };
    Ok(r * Vec3::z())
}

/// Tabulated xi(|B|) for one (mode, shape), linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationTable {
    pub mode: Mode,
    pub shape: Shape,
    /// (|B| T, xi rad), ascending in |B|.
    pub samples: Vec<(f64, f64)>,
}

impl DeviationTable {
    pub fn zero(mode: Mode, shape: Shape) -> Self {
        DeviationTable { mode, shape, samples: vec![(0.0, 0.0)] }
    }

    pub fn xi(&self, b: f64) -> f64 {
        interp(&self.samples, b)
    }
}

fn interp(samples: &[(f64, f64)], x: f64) -> f64 {
    match samples {
        [] => 0.0,
        [only] => only.1,
        _ => {
            if x <= samples[0].0 {
                return samples[0].1;
            }
            for w in samples.windows(2) {
                let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                if x <= x1 {
                    return if x1 == x0 { y1 } else { y0 + (y1 - y0) * (x - x0) / (x1 - x0) };
                }
            }
            samples.last().unwrap().1
        }
    }
}

/// Function opening against |B_func|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeningCurve {
    pub mode: Mode,
    /// Activation threshold, T.
    pub threshold_b: f64,
    /// (|B| T, opening m), ascending in |B|.
    pub samples: Vec<(f64, f64)>,
    pub max_opening: f64,
}

impl OpeningCurve {
    /// Two-point curve from the published threshold and 34 mT maximum.
    pub fn default_for(mode: Mode) -> Result<Self> {
        let (thr, max) = match mode {
            Mode::DrugDispensing => (4e-3, 1.2e-3),
            Mode::Cutting => (5e-3, 464e-6),
            Mode::GrippingStorage => (7e-3, 709e-6),
            Mode::Locomotion => return Err(Error::invalid("locomotion has no opening curve")),
        };
        Ok(OpeningCurve { mode, threshold_b: thr, samples: vec![(thr, 0.0), (0.034, max)], max_opening: max })
    }

    pub fn validate(&self) -> Result<()> {
        let asc = self.samples.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        if !asc || self.samples.is_empty() {
            return Err(Error::invalid("opening samples must be nondecreasing in both columns"));
        }
        Ok(())
    }
}

pub fn opening(mode: Mode, b_func: f64, curve: &OpeningCurve) -> Result<f64> {
    if curve.mode != mode {
        return Err(Error::invalid("opening curve is for another mode"));
    }
    if b_func.abs() < curve.threshold_b {
        return Ok(0.0);
    }
    Ok(interp(&curve.samples, b_func.abs()).clamp(0.0, curve.max_opening))
}

/// Activation threshold for a function mode, T.
pub fn activation_threshold(mode: Mode) -> Option<f64> {
    OpeningCurve::default_for(mode).ok().map(|c| c.threshold_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_field_flat() {
        let d = solve_tentacle(0.0, &TentacleParams::default()).unwrap();
        assert!(d.gamma.iter().all(|g| *g == 0.0));
        assert_eq!(d.s.len(), DEFAULT_STEPS + 1);
    }

    #[test]
    fn sign_selects_shape() {
        let p = TentacleParams::default();
        let up = solve_tentacle(-0.01, &p).unwrap();
        let down = solve_tentacle(0.01, &p).unwrap();
        assert_eq!(up.shape, Shape::UprightU);
        assert_eq!(down.shape, Shape::InvertedU);
        assert_relative_eq!(up.tip_angle(), -down.tip_angle(), epsilon = 1e-12);
    }

    #[test]
    fn out_of_range_field() {
        assert!(solve_tentacle(0.2, &TentacleParams::default()).is_err());
    }

    #[test]
    fn hermite_matches_grid() {
        let d = solve_tentacle(0.015, &TentacleParams::default()).unwrap();
        for k in [0, 17, 100, 256] {
            assert_relative_eq!(d.gamma_at(d.s[k]), d.gamma[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn inner_beam_zero() {
        assert_eq!(solve_inner_beam(0.0, &InnerBeamParams::default()).unwrap(), 0.0);
        assert!(solve_inner_beam(-1.0, &InnerBeamParams::default()).is_err());
    }

    #[test]
    fn contact_field_roundtrip() {
        let p = InnerBeamParams::default();
        let b = inner_contact_field(GAMMA_CONTACT, &p);
        assert_relative_eq!(solve_inner_beam(b, &p).unwrap(), GAMMA_CONTACT, epsilon = 1e-12);
    }

    #[test]
    fn characterize_errors() {
        assert!(characterize(&[(0.1, 0.0)], 1.0, 1.0, Known::M(1.0)).is_err());
        assert!(characterize(&[(0.1, 0.0), (0.2, 0.0)], 1.0, 1.0, Known::M(1.0)).is_err());
        assert!(characterize(&[(1.6, 0.01), (0.2, 0.02)], 1.0, 1.0, Known::M(1.0)).is_err());
    }

    #[test]
    fn gsec_inverse() {
        for y in [-3.0, -0.1, 0.0, 0.4, 2.0, 10.0] {
            let g = gamma_from_gsec(y);
            assert_relative_eq!(g / g.cos(), y, epsilon = 1e-12);
        }
    }

    #[test]
    fn deviation_rejects_locomotion() {
        assert!(deviation_direction(Mode::Locomotion, Shape::InvertedU, 0.0).is_err());
    }

    #[test]
    fn opening_examples() {
        let d = OpeningCurve::default_for(Mode::DrugDispensing).unwrap();
        assert_eq!(opening(Mode::DrugDispensing, 3e-3, &d).unwrap(), 0.0);
        let c = OpeningCurve::default_for(Mode::Cutting).unwrap();
        assert_relative_eq!(opening(Mode::Cutting, 0.034, &c).unwrap(), 464e-6);
        assert!(opening(Mode::Locomotion, 0.01, &c).is_err());
        let g = OpeningCurve::default_for(Mode::GrippingStorage).unwrap();
        assert_relative_eq!(opening(Mode::GrippingStorage, 0.034, &g).unwrap(), 709e-6);
        assert_eq!(opening(Mode::GrippingStorage, 6e-3, &g).unwrap(), 0.0);
        assert_relative_eq!(opening(Mode::GrippingStorage, 0.05, &g).unwrap(), 709e-6);
    }
}
