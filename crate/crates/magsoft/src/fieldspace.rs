//! Field and gradient algebra.
//!
//! Gradients travel as a 5-vector in the fixed wire order
//! `[dBz/dx, dBz/dy, dBz/dz, dBy/dy, dBx/dy]`. The full tensor is symmetric
//! and traceless, so these five entries determine it.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec8 = SVector<f64, 8>;
pub type Mat8 = SMatrix<f64, 8, 8>;
pub type Mat5 = SMatrix<f64, 5, 5>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Frame {
    #[default]
    Global,
    Intermediate,
    Local,
}

impl Frame {
    pub fn as_str(&self) -> &'static str {
        match self {
            Frame::Global => "global",
            Frame::Intermediate => "intermediate",
            Frame::Local => "local",
        }
    }

    pub fn parse(s: &str) -> Option<Frame> {
        match s {
            "global" => Some(Frame::Global),
            "intermediate" => Some(Frame::Intermediate),
            "local" => Some(Frame::Local),
            _ => None,
        }
    }
}

/// Flux density (T) plus the five independent gradients (T/m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub b: Vec3,
    pub grad: [f64; 5],
    pub frame: Frame,
}

impl FieldState {
    pub fn zero(frame: Frame) -> Self {
        FieldState { b: Vec3::zeros(), grad: [0.0; 5], frame }
    }

    pub fn new(b: Vec3, grad: [f64; 5], frame: Frame) -> Self {
        FieldState { b, grad, frame }
    }

    /// Stacked `[B; grad]` as used by the design and control matrices.
    pub fn to_vec8(&self) -> Vec8 {
        let g = &self.grad;
        Vec8::from_column_slice(&[self.b.x, self.b.y, self.b.z, g[0], g[1], g[2], g[3], g[4]])
    }

    pub fn from_vec8(v: &Vec8, frame: Frame) -> Self {
        FieldState {
            b: Vec3::new(v[0], v[1], v[2]),
            grad: [v[3], v[4], v[5], v[6], v[7]],
            frame,
        }
    }

    /// Largest absolute gradient entry of the full tensor.
    pub fn max_grad_entry(&self) -> f64 {
        gradient_matrix_unchecked(&self.grad).amax()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut g = self.grad;
        g.iter_mut().for_each(|x| *x *= c);
        FieldState { b: self.b * c, grad: g, frame: self.frame }
    }
}

fn gradient_matrix_unchecked(g: &[f64; 5]) -> Mat3 {
    Mat3::new(
        -g[3] - g[2], g[4], g[0],
        g[4], g[3], g[1],
        g[0], g[1], g[2],
    )
}

/// Full symmetric, traceless gradient tensor from the 5-vector.
pub fn gradient_matrix(grad: &[f64; 5]) -> Result<Mat3> {
    if grad.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("gradient entries must be finite"));
    }
    Ok(gradient_matrix_unchecked(grad))
}

/// Inverse of [`gradient_matrix`]. Reads the wire entries, ignoring any
/// asymmetric or trace part of `g`.
pub fn extract_grad(g: &Mat3) -> [f64; 5] {
    [g[(2, 0)], g[(2, 1)], g[(2, 2)], g[(1, 1)], g[(0, 1)]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Re-orthonormalize after this many compositions.
pub const REORTHO_EVERY: u32 = 64;

/// Orthonormal 3x3 matrix that tracks how many products built it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    m: Mat3,
    compositions: u32,
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation { m: Mat3::identity(), compositions: 0 }
    }

    /// Wraps a matrix, orthonormalizing it first.
    pub fn from_matrix(m: Mat3) -> Self {
        Rotation { m: gram_schmidt(&m), compositions: 0 }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    pub fn transpose(&self) -> Self {
        Rotation { m: self.m.transpose(), compositions: self.compositions }
    }

    /// `self * other`, re-orthonormalized once the chain grows long.
    pub fn compose(&self, other: &Rotation) -> Self {
        let mut r = Rotation {
            m: self.m * other.m,
            compositions: self.compositions + other.compositions + 1,
        };
        if r.compositions > REORTHO_EVERY {
            r.m = gram_schmidt(&r.m);
            r.compositions = 0;
        }
        r
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.m * v
    }

    /// Roll, pitch, yaw (x-y-z extrinsic, i.e. R = Rz(yaw) Ry(pitch) Rx(roll)).
    pub fn to_rpy(&self) -> (f64, f64, f64) {
        let m = &self.m;
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        (roll, pitch, yaw)
    }
}

fn gram_schmidt(m: &Mat3) -> Mat3 {
    let c0 = m.column(0).normalize();
    let c1 = (m.column(1) - c0 * c0.dot(&m.column(1))).normalize();
    let c2 = c0.cross(&c1);
    Mat3::from_columns(&[c0, c1, c2])
}

pub fn rot_axis(axis: Axis, angle: f64) -> Rotation {
    let (s, c) = angle.sin_cos();
    let m = match axis {
        Axis::X => Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        Axis::Y => Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        Axis::Z => Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    };
    Rotation { m, compositions: 0 }
}

pub fn rx(a: f64) -> Mat3 {
    *rot_axis(Axis::X, a).matrix()
}
pub fn ry(a: f64) -> Mat3 {
    *rot_axis(Axis::Y, a).matrix()
}
pub fn rz(a: f64) -> Mat3 {
    *rot_axis(Axis::Z, a).matrix()
}

/// Closed-form 5x5 map taking intermediate-frame gradients to global ones
/// under R = Rx(alpha) Ry(beta).
pub fn gradient_rotation(alpha: f64, beta: f64) -> Mat5 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (s2a, c2a) = (2.0 * alpha).sin_cos();
    let (s2b, c2b) = (2.0 * beta).sin_cos();
    #[rustfmt::skip]
    let m = Mat5::from_row_slice(&[
        ca * c2b,          sa * sb,   ca * s2b,          0.5 * ca * s2b,                 sa * cb,
        0.5 * s2a * s2b,   c2a * cb,  -0.5 * s2a * c2b,  0.5 * s2a * (1.0 + sb * sb),    -c2a * sb,
        -ca * ca * s2b,    s2a * cb,  ca * ca * c2b,     sa * sa - ca * ca * sb * sb,    -s2a * sb,
        -sa * sa * s2b,    -s2a * cb, sa * sa * c2b,     ca * ca - sa * sa * sb * sb,    s2a * sb,
        -sa * c2b,         ca * sb,   -sa * s2b,         -0.5 * sa * s2b,                ca * cb,
    ]);
    m
}

/// Intermediate frame to global frame.
pub fn map_to_global(alpha: f64, beta: f64, fs: &FieldState) -> Result<FieldState> {
    if fs.frame != Frame::Intermediate {
        return Err(Error::invalid("map_to_global expects an intermediate-frame field"));
    }
    let r = rx(alpha) * ry(beta);
    let g = gradient_rotation(alpha, beta) * SVector::<f64, 5>::from_column_slice(&fs.grad);
    Ok(FieldState {
        b: r * fs.b,
        grad: [g[0], g[1], g[2], g[3], g[4]],
        frame: Frame::Global,
    })
}

/// Rotates a field by R: B -> R B, G -> R G R^T. Frame tag is set by the caller.
pub fn rotate_field(r: &Mat3, fs: &FieldState, frame: Frame) -> FieldState {
    let g = gradient_matrix_unchecked(&fs.grad);
    FieldState { b: r * fs.b, grad: extract_grad(&(r * g * r.transpose())), frame }
}

/// The 8x8 matrix taking intermediate-frame `[B; grad]` to local-frame
/// `[B; grad]` for a robot turned by theta about its moment axis.
pub fn a_theta(theta: f64) -> Mat8 {
    let (s, c) = theta.sin_cos();
    let (s2, c2) = (2.0 * theta).sin_cos();
    let mut a = Mat8::zeros();
    a[(0, 0)] = c;
    a[(0, 1)] = s;
    a[(1, 0)] = -s;
    a[(1, 1)] = c;
    a[(2, 2)] = 1.0;
    a[(3, 3)] = c;
    a[(3, 4)] = s;
    a[(4, 3)] = -s;
    a[(4, 4)] = c;
    a[(5, 5)] = 1.0;
    a[(6, 5)] = -s * s;
    a[(6, 6)] = c2;
    a[(6, 7)] = -s2;
    a[(7, 5)] = 0.5 * s2;
    a[(7, 6)] = s2;
    a[(7, 7)] = c2;
    a
}

/// One time sample of a field program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub field: FieldState,
    pub tag: String,
}

/// Time-sampled field program with an optional safety category label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Waveform {
    pub samples: Vec<Sample>,
    pub category: Option<String>,
}

impl Waveform {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, t: f64, field: FieldState, tag: &str) {
        self.samples.push(Sample { t, field, tag: tag.to_string() });
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Appends `other` shifted to start at `t0`.
    pub fn append_shifted(&mut self, other: &Waveform, t0: f64) {
        for s in &other.samples {
            self.samples.push(Sample { t: s.t + t0, ..s.clone() });
        }
    }

    /// First sample breaking the coil limits, if any.
    pub fn coil_violation(&self) -> Option<&Sample> {
        let tol = 1e-12;
        self.samples.iter().find(|s| {
            s.field.b.norm() > crate::COIL_MAX_B + tol || s.field.max_grad_entry() > crate::COIL_MAX_GRAD + tol
        })
    }

    pub fn scaled(&self, c: f64) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|s| Sample { field: s.field.scaled(c), ..s.clone() }).collect(),
            category: self.category.clone(),
        }
    }
}
