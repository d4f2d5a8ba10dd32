//! Wrench evaluation, design and control matrices, and the least-norm plus
//! null-space field solver.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::beam_mech::TentacleDeflection;
use crate::fieldspace::{a_theta, gradient_matrix, rz, FieldState, Frame, Mat3, Vec3, Vec8};
use crate::robot_model::{
    deformed_profile, local_rotation, sum_moments, to_local, volume_centroid, Dipole, MagnetizationState, Mode,
    Robot, Shape,
};
use crate::{Error, Result};

pub type Mat68 = SMatrix<f64, 6, 8>;
pub type Mat86 = SMatrix<f64, 8, 6>;
pub type Vec6 = SVector<f64, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    /// N m.
    pub torque: Vec3,
    /// N.
    pub force: Vec3,
    pub frame: Frame,
}

impl Wrench {
    pub fn to_vec6(&self) -> Vec6 {
        Vec6::from_column_slice(&[
            self.torque.x, self.torque.y, self.torque.z, self.force.x, self.force.y, self.force.z,
        ])
    }

    pub fn rotated(&self, r: &Mat3, frame: Frame) -> Wrench {
        Wrench { torque: r * self.torque, force: r * self.force, frame }
    }
}

/// Dipole-sum wrench in the local frame. Positions must be measured from
/// the center of mass.
pub fn wrench(dipoles: &[Dipole], fs: &FieldState) -> Result<Wrench> {
    if fs.frame != Frame::Local {
        return Err(Error::invalid("wrench expects a local-frame field"));
    }
    wrench_in_frame(dipoles, fs)
}

/// Same sum, no frame check; dipoles and field must share a frame.
pub fn wrench_in_frame(dipoles: &[Dipole], fs: &FieldState) -> Result<Wrench> {
    let g = gradient_matrix(&fs.grad)?;
    let mut torque = Vec3::zeros();
    let mut force = Vec3::zeros();
    for d in dipoles {
        let f = g * d.moment;
        torque += d.moment.cross(&fs.b) + d.pos.cross(&f);
        force += f;
    }
    Ok(Wrench { torque, force, frame: fs.frame })
}

/// First moments of the magnetization, A m^3.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DCoefficients {
    pub d2: f64,
    pub d5: f64,
    pub d6: f64,
    pub d8: f64,
    pub d9: f64,
    pub d12: f64,
    pub d15: f64,
}

pub fn d_coefficients(dipoles: &[Dipole]) -> DCoefficients {
    let mut d = DCoefficients::default();
    for p in dipoles {
        let (r, m) = (p.pos, p.moment);
        d.d2 += r.y * m.y - r.z * m.z;
        d.d5 += -r.z * m.x;
        d.d6 += r.z * m.z - r.x * m.x;
        d.d8 += -r.z * m.x - r.x * m.z;
        d.d9 += -r.z * m.x;
        d.d12 += r.x * m.z;
        d.d15 += r.x * m.x - r.y * m.y;
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub m: Mat68,
    pub mode: Mode,
    pub moment_magnitude: f64,
    pub d: DCoefficients,
}

impl DesignMatrix {
    pub fn apply(&self, fs: &FieldState) -> Wrench {
        let w = self.m * fs.to_vec8();
        Wrench {
            torque: Vec3::new(w[0], w[1], w[2]),
            force: Vec3::new(w[3], w[4], w[5]),
            frame: fs.frame,
        }
    }
}

pub fn design_matrix(mode: Mode, moment_magnitude: f64, d: &DCoefficients) -> Result<DesignMatrix> {
    if !(moment_magnitude >= 0.0) {
        return Err(Error::invalid("moment magnitude must be nonnegative"));
    }
    let mut m = Mat68::zeros();
    let mm = moment_magnitude;
    // 1-based (row, col) in the comments, matching the usual printed layout.
    m[(0, 1)] = -mm; // (1,2)
    m[(0, 4)] = d.d2; // (1,5)
    m[(1, 0)] = mm; // (2,1)
    m[(1, 3)] = d.d6; // (2,4)
    m[(2, 7)] = d.d15; // (3,8)
    m[(3, 3)] = mm;
    m[(4, 4)] = mm;
    m[(5, 5)] = mm;
    if matches!(mode, Mode::Cutting | Mode::GrippingStorage) {
        m[(0, 7)] = d.d5; // (1,8)
        m[(1, 5)] = d.d8; // (2,6)
        m[(1, 6)] = d.d9; // (2,7)
        m[(2, 4)] = d.d12; // (3,5)
    }
    Ok(DesignMatrix { m, mode, moment_magnitude, d: *d })
}

/// Full linear map [B; grad] -> wrench computed straight from the dipoles,
/// with no sparsity assumed.
pub fn dense_design_matrix(dipoles: &[Dipole]) -> Mat68 {
    let mut m = Mat68::zeros();
    for j in 0..8 {
        let mut e = Vec8::zeros();
        e[j] = 1.0;
        let w = wrench_in_frame(dipoles, &FieldState::from_vec8(&e, Frame::Local)).unwrap();
        m.set_column(j, &w.to_vec6());
    }
    m
}

fn block_rz(theta: f64) -> SMatrix<f64, 6, 6> {
    let r = rz(theta);
    let mut b = SMatrix::<f64, 6, 6>::zeros();
    b.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    b.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    b
}

pub fn control_matrix(d: &DesignMatrix, theta: f64) -> Mat68 {
    block_rz(theta) * d.m * a_theta(theta)
}

fn svd_rank(c: &Mat68) -> (usize, Vec<f64>) {
    let sv = c.svd(false, false).singular_values;
    let max = sv.max();
    let sv: Vec<f64> = sv.iter().copied().collect();
    (sv.iter().filter(|s| **s > 1e-12 * max).count(), sv)
}

pub fn rank(c: &Mat68) -> usize {
    if c.amax() == 0.0 {
        return 0;
    }
    svd_rank(c).0
}

fn pinv(c: &Mat68) -> Result<Mat86> {
    let svd = c.svd(true, true);
    let max = svd.singular_values.max();
    let r = svd.singular_values.iter().filter(|s| **s > 1e-12 * max).count();
    if max == 0.0 || r < 6 {
        return Err(Error::solver("control matrix is rank deficient", r as f64));
    }
    svd.pseudo_inverse(1e-12 * max).map_err(|e| Error::solver(e.to_string(), 0.0))
}

/// The two homogeneous solutions of C(theta) x = 0 in the intermediate frame.
///
/// The second one is scaled so its gradient part is (cos 2t, -sin 2t) and
/// its sign is chosen so that a positive k2 gives a restoring torque about
/// the moment axis.
pub fn null_vectors(d: &DesignMatrix, theta: f64) -> (Vec8, Vec8) {
    let mut n1 = Vec8::zeros();
    n1[2] = 1.0;
    let s = if d.d.d15 > 0.0 { -1.0 } else { 1.0 };
    let bx = if d.moment_magnitude > 0.0 && matches!(d.mode, Mode::Cutting | Mode::GrippingStorage) {
        -d.d.d9 / d.moment_magnitude
    } else {
        0.0
    };
    let (st, ct) = theta.sin_cos();
    let (s2, c2) = (2.0 * theta).sin_cos();
    let mut n2 = Vec8::zeros();
    n2[0] = s * bx * ct;
    n2[1] = s * bx * st;
    n2[6] = s * c2;
    n2[7] = -s * s2;
    (n1, n2)
}

/// Least-norm field producing zero torque and force `f`, plus the
/// null-space terms k1 n1 + k2 n2. Output is in the intermediate frame.
pub fn solve_fields(d: &DesignMatrix, theta: f64, f: &Vec3, k1: f64, k2: f64) -> Result<FieldState> {
    let c = control_matrix(d, theta);
    let p = pinv(&c)?;
    let rhs = Vec6::from_column_slice(&[0.0, 0.0, 0.0, f.x, f.y, f.z]);
    let (n1, n2) = null_vectors(d, theta);
    let x = p * rhs + n1 * k1 + n2 * k2;
    let res = (c * x - rhs).amax();
    let scale = d.m.amax().max(1.0) * 1e-9;
    if !(res <= scale) {
        return Err(Error::solver("field solution residual too large", res));
    }
    Ok(FieldState::from_vec8(&x, Frame::Intermediate))
}

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.81;

/// Vertical gradient dBz/dz (T/m) of the least-norm field that holds a
/// robot of `mass` kg against gravity.
pub fn levitation_gradient(d: &DesignMatrix, mass: f64) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(Error::invalid("mass must be positive"));
    }
    let fs = solve_fields(d, 0.0, &Vec3::new(0.0, 0.0, mass * GRAVITY), 0.0, 0.0)?;
    Ok(fs.grad[2])
}

/// Wrench (intermediate frame) on a robot sitting at `theta_actual` under
/// an intermediate-frame field.
pub fn restoring_torque(d: &DesignMatrix, theta_actual: f64, fs: &FieldState) -> Wrench {
    let local = a_theta(theta_actual) * fs.to_vec8();
    let w = block_rz(theta_actual) * d.m * local;
    Wrench {
        torque: Vec3::new(w[0], w[1], w[2]),
        force: Vec3::new(w[3], w[4], w[5]),
        frame: Frame::Intermediate,
    }
}

/// Local-frame dipoles and design matrix for one deformed configuration.
#[derive(Debug, Clone)]
pub struct ActuationModel {
    pub dipoles: Vec<Dipole>,
    pub com: Vec3,
    pub rotation: Mat3,
    pub design: DesignMatrix,
}

impl ActuationModel {
    pub fn build(
        robot: &Robot,
        state: &MagnetizationState,
        tentacle: Option<&TentacleDeflection>,
        inner_gamma: [f64; 3],
    ) -> Result<Self> {
        let n = robot.segments;
        let profile = match tentacle {
            Some(t) => t.profile(n),
            None => crate::robot_model::TentacleProfile::flat(n),
        };
        let shape = tentacle.map_or(Shape::InvertedU, |t| t.shape);
        let material = deformed_profile(state, &robot.geometry, &profile, inner_gamma)?;
        let com = robot.com.map(Vec3::from).unwrap_or_else(|| volume_centroid(&material));
        let rotation = local_rotation(state.mode, shape);
        let dipoles = to_local(&material, &rotation, &com);
        let mag = sum_moments(&dipoles).norm();
        let design = design_matrix(state.mode, mag, &d_coefficients(&dipoles))?;
        Ok(ActuationModel { dipoles, com, rotation, design })
    }
}
