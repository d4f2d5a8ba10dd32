//! Geometry, materials and magnetization of the robot, and the dipole
//! list built from them.
//!
//! Material frame: X across the tentacle width, Y along the tentacle span,
//! Z up through the body. Tentacle halves are magnetized toward the body
//! center; deformation rotates each tentacle segment about X.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fieldspace::{ry, rz, Mat3, Vec3};
use crate::{Error, Result};

pub const MM: f64 = 1e-3;
pub const MM3: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub name: String,
    /// Pa; `None` for the rigid magnetic fillers.
    pub youngs_modulus: Option<f64>,
    /// Intrinsic coercivity, T.
    pub coercivity_hci: Option<f64>,
    /// A/m.
    pub m_magnetized: f64,
    /// A/m.
    pub m_demagnetized: Option<f64>,
}

impl MaterialSpec {
    fn new(name: &str, e_kpa: Option<f64>, hci_mt: Option<f64>, m_ka: f64, demag_ka: Option<f64>) -> Self {
        MaterialSpec {
            name: name.to_string(),
            youngs_modulus: e_kpa.map(|e| e * 1e3),
            coercivity_hci: hci_mt.map(|h| h * 1e-3),
            m_magnetized: m_ka * 1e3,
            m_demagnetized: demag_ka.map(|d| d * 1e3),
        }
    }

    pub fn is_valid(&self) -> bool {
        let m_ok = self.m_magnetized >= 0.0;
        let d_ok = self.m_demagnetized.map_or(true, |d| d < self.m_magnetized);
        m_ok && d_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Materials {
    pub heating: MaterialSpec,
    pub body: MaterialSpec,
    pub inner: MaterialSpec,
    pub rprog: MaterialSpec,
    pub sixth: MaterialSpec,
    pub tentacle: MaterialSpec,
}

impl Default for Materials {
    fn default() -> Self {
        Materials {
            heating: MaterialSpec::new("remote heating component", None, None, 6.52, Some(0.766)),
            body: MaterialSpec::new("main body (non-magnetic)", Some(570.0), None, 0.0, None),
            inner: MaterialSpec::new("main body (magnetic)", None, Some(598.0), 108.0, None),
            rprog: MaterialSpec::new("reprogrammable module", None, None, 7.18, Some(1.19)),
            sixth: MaterialSpec::new("sixth-DOF enhancement module", None, Some(614.0), 88.7, None),
            tentacle: MaterialSpec::new("soft tentacles", Some(396.0), Some(93.3), 37.5, None),
        }
    }
}

impl Materials {
    /// Smallest coercivity among the hard components, T.
    pub fn min_hard_coercivity(&self) -> f64 {
        [&self.inner, &self.sixth, &self.tentacle]
            .iter()
            .filter_map(|m| m.coercivity_hci)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Placement and size constants, SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geometry {
    pub z_tent: f64,
    pub t_tent: f64,
    pub b_tent: f64,
    pub l_tent: f64,
    pub z_six: f64,
    pub y_six: [f64; 2],
    pub v_six: f64,
    pub z_main: f64,
    pub x_inner: [f64; 3],
    pub y_inner: [f64; 3],
    pub v_inner: f64,
    pub z_rprog: f64,
    pub v_rprog: f64,
    pub z_heat: f64,
    pub v_heat: f64,
    /// Inner beam second moment of area, m^4.
    pub i_inner: f64,
    /// Inner beam length, m. Not published; see the README.
    pub l_inner: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            z_tent: -1.055 * MM,
            t_tent: 0.15 * MM,
            b_tent: 1.5 * MM,
            l_tent: 4.4 * MM,
            z_six: -0.905 * MM,
            y_six: [-0.531 * MM, 0.531 * MM],
            v_six: 0.491 * MM3,
            z_main: 0.175 * MM,
            x_inner: [-0.52 * MM, 0.52 * MM, 0.0],
            y_inner: [0.3 * MM, 0.3 * MM, -0.6 * MM],
            v_inner: 0.0208 * MM3,
            z_rprog: -0.59 * MM,
            v_rprog: 2.6 * MM3,
            z_heat: 0.94 * MM,
            v_heat: 2.6 * MM3,
            i_inner: 2.43e-17,
            l_inner: 0.6 * MM,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let vols = [self.v_six, self.v_inner, self.v_rprog, self.v_heat];
        let dims = [self.t_tent, self.b_tent, self.l_tent, self.i_inner, self.l_inner];
        if vols.iter().chain(dims.iter()).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("geometry volumes and dimensions must be positive"));
        }
        if (self.y_six[0] + self.y_six[1]).abs() > 1e-15 {
            return Err(Error::invalid("sixth-DOF centroids must mirror about Y = 0"));
        }
        Ok(())
    }

    pub fn tentacle_area(&self) -> f64 {
        self.b_tent * self.t_tent
    }

    pub fn tentacle_second_moment(&self) -> f64 {
        self.b_tent * self.t_tent.powi(3) / 12.0
    }

    /// Z of the tentacle slab mid-plane.
    pub fn z_tent_mid(&self) -> f64 {
        self.z_tent + 0.5 * self.t_tent
    }

    /// Inner magnet centroid paired with moment index `i` (0-based).
    ///
    /// The tabulated centroids 2 and 3 are swapped here so that every inner
    /// magnet points radially toward the body axis, which is what makes the
    /// set rotary-symmetric.
    pub fn inner_position(&self, i: usize) -> Vec3 {
        let k = [0usize, 2, 1][i];
        Vec3::new(self.x_inner[k], self.y_inner[k], self.z_main)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Locomotion,
    DrugDispensing,
    Cutting,
    GrippingStorage,
}

impl Mode {
    pub const FUNCTION_MODES: [Mode; 3] = [Mode::DrugDispensing, Mode::Cutting, Mode::GrippingStorage];

    /// Magnetizing direction in the material XY plane, degrees.
    pub fn phi_deg(&self) -> Option<f64> {
        match self {
            Mode::Locomotion => None,
            Mode::DrugDispensing => Some(90.0),
            Mode::Cutting => Some(330.0),
            Mode::GrippingStorage => Some(210.0),
        }
    }

    pub fn phi(&self) -> Option<f64> {
        self.phi_deg().map(f64::to_radians)
    }

    pub fn from_phi_deg(phi: f64) -> Option<Mode> {
        let p = phi.rem_euclid(360.0);
        Mode::FUNCTION_MODES
            .into_iter()
            .find(|m| (m.phi_deg().unwrap() - p).abs() < 1e-9)
    }

    pub fn is_function(&self) -> bool {
        *self != Mode::Locomotion
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Locomotion => "locomotion",
            Mode::DrugDispensing => "drug_dispensing",
            Mode::Cutting => "cutting",
            Mode::GrippingStorage => "gripping_storage",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "locomotion" => Ok(Mode::Locomotion),
            "drug_dispensing" | "dispensing" => Ok(Mode::DrugDispensing),
            "cutting" => Ok(Mode::Cutting),
            "gripping_storage" | "gripping" => Ok(Mode::GrippingStorage),
            _ => Err(Error::invalid(format!("unknown mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    UprightU,
    InvertedU,
}

/// Magnetization magnitudes (A/m) and the programmable direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationState {
    pub mode: Mode,
    pub programmable_magnetized: bool,
    /// Direction of the last magnetizing pulse, rad.
    pub phi: f64,
    pub m_tent: f64,
    pub m_sixth: f64,
    pub m_inner: f64,
    pub m_rprog: f64,
    pub m_heat: f64,
    /// Count the residual demagnetized moments instead of zeroing them.
    pub include_residual: bool,
}

impl MagnetizationState {
    pub fn locomotion(mat: &Materials) -> Self {
        MagnetizationState {
            mode: Mode::Locomotion,
            programmable_magnetized: false,
            phi: 0.0,
            m_tent: mat.tentacle.m_magnetized,
            m_sixth: mat.sixth.m_magnetized,
            m_inner: mat.inner.m_magnetized,
            m_rprog: mat.rprog.m_demagnetized.unwrap_or(0.0),
            m_heat: mat.heating.m_demagnetized.unwrap_or(0.0),
            include_residual: false,
        }
    }

    pub fn function(mat: &Materials, mode: Mode) -> Result<Self> {
        let phi = mode.phi().ok_or_else(|| Error::invalid("not a function mode"))?;
        Ok(MagnetizationState {
            mode,
            programmable_magnetized: true,
            phi,
            m_rprog: mat.rprog.m_magnetized,
            m_heat: mat.heating.m_magnetized,
            ..Self::locomotion(mat)
        })
    }

    /// Magnitudes that enter moment sums for the programmable parts.
    pub fn effective_programmable(&self) -> (f64, f64) {
        if self.programmable_magnetized || self.include_residual {
            (self.m_rprog, self.m_heat)
        } else {
            (0.0, 0.0)
        }
    }

    pub fn phi_dir(&self) -> Vec3 {
        Vec3::new(self.phi.cos(), self.phi.sin(), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    TentacleLeft,
    TentacleRight,
    Sixth,
    Inner,
    Rprog,
    Heat,
}

/// Point dipole: position (m), moment (A m^2) and the volume it stands for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dipole {
    pub pos: Vec3,
    pub moment: Vec3,
    pub volume: f64,
    pub component: Component,
}

/// Tentacle bend angles at segment midpoints, one list per half. The
/// angle is the rotation about material X of the right half; the left
/// half mirrors it.
#[derive(Debug, Clone, PartialEq)]
pub struct TentacleProfile {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl TentacleProfile {
    pub fn flat(n: usize) -> Self {
        TentacleProfile { left: vec![0.0; n], right: vec![0.0; n] }
    }

    pub fn symmetric(gamma: Vec<f64>) -> Self {
        TentacleProfile { left: gamma.clone(), right: gamma }
    }

    pub fn uniform(n: usize, gamma: f64) -> Self {
        Self::symmetric(vec![gamma; n])
    }
}

/// Everything needed to build dipole lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Robot {
    pub geometry: Geometry,
    pub materials: Materials,
    /// Segments per tentacle half.
    pub segments: usize,
    /// Total mass, kg. Not published; only needed for levitation checks.
    pub mass: Option<f64>,
    /// Overrides the volume-centroid center of mass (material frame, m).
    pub com: Option<[f64; 3]>,
}

impl Default for Robot {
    fn default() -> Self {
        Robot {
            geometry: Geometry::default(),
            materials: Materials::default(),
            segments: 64,
            mass: None,
            com: None,
        }
    }
}

/// The default robot and its as-built (locomotion) magnetization.
pub fn default_robot() -> (Geometry, Materials, MagnetizationState) {
    let mat = Materials::default();
    let st = MagnetizationState::locomotion(&mat);
    (Geometry::default(), mat, st)
}

/// Undeformed dipole list in the material frame.
pub fn profile_moments(state: &MagnetizationState, geom: &Geometry, n: usize) -> Vec<Dipole> {
    deformed_profile(state, geom, &TentacleProfile::flat(n), [0.0; 3])
        .expect("flat profile matches its own discretization")
}

/// Dipole list with tentacle and inner-beam deflections applied.
pub fn deformed_profile(
    state: &MagnetizationState,
    geom: &Geometry,
    tent: &TentacleProfile,
    inner_gamma: [f64; 3],
) -> Result<Vec<Dipole>> {
    let n = tent.right.len();
    if n == 0 || tent.left.len() != n {
        return Err(Error::invalid("tentacle profile halves must have the same nonzero length"));
    }
    let half = 0.5 * geom.l_tent;
    let ds = half / n as f64;
    let dv = geom.tentacle_area() * ds;
    let dm = state.m_tent * dv;
    let z0 = geom.z_tent_mid();
    let mut out = Vec::with_capacity(2 * n + 7);

    for (gammas, side) in [(&tent.right, 1.0), (&tent.left, -1.0)] {
        let (mut y, mut z) = (0.0, z0);
        for &g in gammas.iter() {
            let (s, c) = g.sin_cos();
            out.push(Dipole {
                pos: Vec3::new(0.0, side * (y + 0.5 * c * ds), z + 0.5 * s * ds),
                moment: Vec3::new(0.0, -side * c, -s) * dm,
                volume: dv,
                component: if side > 0.0 { Component::TentacleRight } else { Component::TentacleLeft },
            });
            y += c * ds;
            z += s * ds;
        }
    }

    let m_six = state.m_sixth * geom.v_six / 2.0;
    for (i, &y) in geom.y_six.iter().enumerate() {
        let sign = if i == 0 { 1.0 } else { -1.0 };
        out.push(Dipole {
            pos: Vec3::new(0.0, y, geom.z_six),
            moment: Vec3::new(0.0, sign * m_six, 0.0),
            volume: geom.v_six / 2.0,
            component: Component::Sixth,
        });
    }

    let m_in = state.m_inner * geom.v_inner;
    for i in 0..3 {
        let a = 2.0 * PI / 3.0 * (i + 1) as f64 - PI / 3.0;
        let dir = rz(inner_gamma[i]) * Vec3::new(a.sin(), -a.cos(), 0.0);
        out.push(Dipole {
            pos: geom.inner_position(i),
            moment: dir * m_in,
            volume: geom.v_inner,
            component: Component::Inner,
        });
    }

    let (mr, mh) = state.effective_programmable();
    let d = state.phi_dir();
    out.push(Dipole {
        pos: Vec3::new(0.0, 0.0, geom.z_rprog),
        moment: d * (mr * geom.v_rprog),
        volume: geom.v_rprog,
        component: Component::Rprog,
    });
    out.push(Dipole {
        pos: Vec3::new(0.0, 0.0, geom.z_heat),
        moment: d * (mh * geom.v_heat),
        volume: geom.v_heat,
        component: Component::Heat,
    });
    Ok(out)
}

/// Net moment of a deformed robot, material frame.
pub fn net_moment(
    state: &MagnetizationState,
    geom: &Geometry,
    tent: &TentacleProfile,
    inner_gamma: [f64; 3],
) -> Result<Vec3> {
    Ok(sum_moments(&deformed_profile(state, geom, tent, inner_gamma)?))
}

pub fn sum_moments(d: &[Dipole]) -> Vec3 {
    d.iter().fold(Vec3::zeros(), |acc, p| acc + p.moment)
}

/// Volume centroid of all listed components.
pub fn volume_centroid(d: &[Dipole]) -> Vec3 {
    let v: f64 = d.iter().map(|p| p.volume).sum();
    d.iter().fold(Vec3::zeros(), |acc, p| acc + p.pos * p.volume) / v
}

/// Rotation from the material frame into the local frame, whose Z axis is
/// the net moment direction.
pub fn local_rotation(mode: Mode, shape: Shape) -> Mat3 {
    match mode.phi() {
        None => match shape {
            Shape::InvertedU => Mat3::identity(),
            Shape::UprightU => ry(PI),
        },
        Some(phi) => ry(-PI / 2.0) * rz(-phi),
    }
}

/// Re-expresses dipoles in the local frame about the given center of mass.
pub fn to_local(d: &[Dipole], rot: &Mat3, com: &Vec3) -> Vec<Dipole> {
    d.iter()
        .map(|p| Dipole { pos: rot * (p.pos - com), moment: rot * p.moment, ..*p })
        .collect()
}

/// Rotates the inner magnet set by 120 degrees about material Z.
pub fn rotate_inner_set(d: &[Dipole]) -> Vec<Dipole> {
    let r = rz(2.0 * PI / 3.0);
    d.iter()
        .filter(|p| p.component == Component::Inner)
        .map(|p| Dipole { pos: r * p.pos, moment: r * p.moment, ..*p })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_values_present() {
        let (g, m, st) = default_robot();
        assert_relative_eq!(g.l_tent, 4.4e-3);
        assert_relative_eq!(m.tentacle.m_magnetized, 37.5e3);
        assert_relative_eq!(g.v_rprog, 2.6e-9);
        assert_relative_eq!(g.v_heat, 2.6e-9);
        assert_eq!(st.mode, Mode::Locomotion);
        assert!(g.validate().is_ok());
        for mat in [&m.heating, &m.inner, &m.rprog, &m.sixth, &m.tentacle] {
            assert!(mat.is_valid(), "{}", mat.name);
        }
        assert_relative_eq!(m.min_hard_coercivity(), 0.0933, epsilon = 1e-12);
    }

    #[test]
    fn phi_lookup() {
        assert_eq!(Mode::from_phi_deg(90.0), Some(Mode::DrugDispensing));
        assert_eq!(Mode::from_phi_deg(330.0), Some(Mode::Cutting));
        assert_eq!(Mode::from_phi_deg(-150.0), Some(Mode::GrippingStorage));
        assert_eq!(Mode::from_phi_deg(45.0), None);
    }

    #[test]
    fn locomotion_undeformed_sums_to_zero() {
        let (g, _, st) = default_robot();
        let d = profile_moments(&st, &g, 64);
        assert!(sum_moments(&d).norm() < 1e-20);
    }

    #[test]
    fn inner_magnet_moment() {
        let (g, _, st) = default_robot();
        let d = profile_moments(&st, &g, 8);
        let inner: Vec<_> = d.iter().filter(|p| p.component == Component::Inner).collect();
        assert_eq!(inner.len(), 3);
        for p in inner {
            assert_relative_eq!(p.moment.norm(), 108e3 * 0.0208e-9, max_relative = 1e-12);
            // each points toward the body axis
            let radial = Vec3::new(p.pos.x, p.pos.y, 0.0);
            assert_relative_eq!(p.moment.normalize().dot(&radial.normalize()), -1.0, epsilon = 0.01);
        }
    }

    #[test]
    fn fully_upright_tentacles_bound() {
        let (g, _, st) = default_robot();
        let m = net_moment(&st, &g, &TentacleProfile::uniform(64, -PI / 2.0), [0.0; 3]).unwrap();
        let bound = 37.5e3 * (1.5e-3 * 0.15e-3 * 4.4e-3);
        assert_relative_eq!(m.z, bound, max_relative = 1e-12);
        assert!(m.x.abs() + m.y.abs() < 1e-18);
    }

    #[test]
    fn mismatched_profile_rejected() {
        let (g, _, st) = default_robot();
        let bad = TentacleProfile { left: vec![0.0; 3], right: vec![0.0; 4] };
        assert!(net_moment(&st, &g, &bad, [0.0; 3]).is_err());
    }

    #[test]
    fn local_rotation_aligns_function_moment() {
        for mode in Mode::FUNCTION_MODES {
            let r = local_rotation(mode, Shape::InvertedU);
            let v = r * Vec3::new(mode.phi().unwrap().cos(), mode.phi().unwrap().sin(), 0.0);
            assert_relative_eq!(v, Vec3::z(), epsilon = 1e-15);
        }
    }
}
