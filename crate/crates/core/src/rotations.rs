//! Quaternion, SO(3) and SE(3) kernels.
//!
//! Quaternions are stored scalar first, `(p0, p1, p2, p3)`, and are not
//! required to have unit length: the rotation map divides by `|P|^2`, so any
//! nonzero multiple of a quaternion describes the same orientation.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4x3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Quaternions with a norm at or below this value are rejected.
pub const QUATERNION_EPS: f64 = 1e-12;

/// Rotation angles below this use Taylor expansions in exp/log.
const SMALL_ANGLE: f64 = 1e-6;

/// Margin to pi below which the logarithm is still considered well defined.
const LOG_PI_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub p0: f64,
    pub p: Vec3,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        p0: 1.0,
        p: Vector3::new(0.0, 0.0, 0.0),
    };

    pub fn new(p0: f64, p1: f64, p2: f64, p3: f64) -> Self {
        Self {
            p0,
            p: Vec3::new(p1, p2, p3),
        }
    }

    /// Reads four scalar-first coordinates. Panics if `s.len() < 4`.
    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.p0, self.p.x, self.p.y, self.p.z]
    }

    /// Unit quaternion of the rotation by `|phi|` about `phi / |phi|`.
    pub fn from_rotation_vector(phi: &Vec3) -> Self {
        let angle = phi.norm();
        let half = 0.5 * angle;
        // sin(a/2)/a
        let s = if angle < SMALL_ANGLE {
            0.5 - angle * angle / 48.0
        } else {
            half.sin() / angle
        };
        Self {
            p0: half.cos(),
            p: phi * s,
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.p0 * self.p0 + self.p.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.p0 * other.p0 + self.p.dot(&other.p)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            p0: alpha * self.p0,
            p: alpha * self.p,
        }
    }

    pub fn conjugate(&self) -> Self {
        Self {
            p0: self.p0,
            p: -self.p,
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.checked_norm()?;
        Ok(self.scale(1.0 / n))
    }

    fn checked_norm(&self) -> Result<f64> {
        let n = self.norm();
        if n > QUATERNION_EPS && n.is_finite() {
            Ok(n)
        } else {
            Err(Error::DegenerateQuaternion { norm: n })
        }
    }

    /// `A(P) = I + 2 (p~^2 + p0 p~) / |P|^2`, orthogonal for any nonzero `P`.
    pub fn rotation(&self) -> Result<Mat3> {
        let n2 = self.checked_norm()?.powi(2);
        let pt = skew(&self.p);
        Ok(Mat3::identity() + (pt * pt + pt * self.p0) * (2.0 / n2))
    }

    /// `Q(P) = 1/2 [-p^T; p0 I + p~]`, mapping the body angular velocity to
    /// the quaternion rate.
    pub fn rate_matrix(&self) -> Matrix4x3<f64> {
        let mut q = Matrix4x3::zeros();
        let lower = Mat3::identity() * self.p0 + skew(&self.p);
        for j in 0..3 {
            q[(0, j)] = -0.5 * self.p[j];
            for i in 0..3 {
                q[(i + 1, j)] = 0.5 * lower[(i, j)];
            }
        }
        q
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product; `A(P * R) = A(P) A(R)`.
    fn mul(self, r: Quaternion) -> Quaternion {
        Quaternion {
            p0: self.p0 * r.p0 - self.p.dot(&r.p),
            p: r.p * self.p0 + self.p * r.p0 + self.p.cross(&r.p),
        }
    }
}

/// Free-function form of [`Quaternion::rotation`].
pub fn rotation_from_quaternion(p: &Quaternion) -> Result<Mat3> {
    p.rotation()
}

pub fn quaternion_rate_matrix(p: &Quaternion) -> Matrix4x3<f64> {
    p.rate_matrix()
}

pub fn quaternion_multiply(p: &Quaternion, r: &Quaternion) -> Quaternion {
    *p * *r
}

/// Unit quaternion of a rotation matrix (Shepperd's method: the branch with
/// the largest of the four squared-component candidates is used).
pub fn quaternion_from_rotation(a: &Mat3) -> Result<Quaternion> {
    let defect = (a.transpose() * a - Mat3::identity()).abs().max();
    let det = a.determinant();
    if !(defect <= 1e-8) || det <= 0.0 {
        return Err(Error::NotARotation { defect, det });
    }
    let tr = a.trace();
    let cand = [tr, a[(0, 0)], a[(1, 1)], a[(2, 2)]];
    let k = (0..4)
        .max_by(|&i, &j| cand[i].total_cmp(&cand[j]))
        .unwrap_or(0);
    let q = if k == 0 {
        let p0 = 0.5 * (1.0 + tr).sqrt();
        let s = 0.25 / p0;
        Quaternion::new(
            p0,
            (a[(2, 1)] - a[(1, 2)]) * s,
            (a[(0, 2)] - a[(2, 0)]) * s,
            (a[(1, 0)] - a[(0, 1)]) * s,
        )
    } else {
        let i = k - 1;
        let j = (i + 1) % 3;
        let l = (i + 2) % 3;
        let pi = 0.5 * (1.0 + 2.0 * a[(i, i)] - tr).sqrt();
        let s = 0.25 / pi;
        let mut p = Vec3::zeros();
        p[i] = pi;
        p[j] = (a[(j, i)] + a[(i, j)]) * s;
        p[l] = (a[(l, i)] + a[(i, l)]) * s;
        Quaternion {
            p0: (a[(l, j)] - a[(j, l)]) * s,
            p,
        }
    };
    q.normalized()
}

/// `skew(v) r = v x r`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Axial vector of the skew-symmetric part of `m`:
/// `1/2 (m32 - m23, m13 - m31, m21 - m12)`.
pub fn inv_skew_symmetric_part(m: &Mat3) -> Vec3 {
    0.5 * Vec3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    )
}

/// Rodrigues' formula.
pub fn so3_exp(phi: &Vec3) -> Mat3 {
    let angle = phi.norm();
    let (a, b) = if angle < SMALL_ANGLE {
        let a2 = angle * angle;
        (1.0 - a2 / 6.0, 0.5 - a2 / 24.0)
    } else {
        let half = (0.5 * angle).sin();
        (angle.sin() / angle, 2.0 * half * half / (angle * angle))
    };
    let pt = skew(phi);
    Mat3::identity() + pt * a + pt * pt * b
}

/// Rotation vector of `a`, extracted from the trace and the axial vector of
/// its skew part. Also accepts matrices that are only close to orthogonal,
/// as produced by entrywise interpolation.
pub fn so3_log(a: &Mat3) -> Result<Vec3> {
    let v = inv_skew_symmetric_part(a);
    let s = v.norm();
    let c = 0.5 * (a.trace() - 1.0);
    let angle = s.atan2(c);
    if angle >= std::f64::consts::PI - LOG_PI_MARGIN {
        return Err(Error::AngleNearPi { angle });
    }
    let factor = if angle < SMALL_ANGLE {
        1.0 + angle * angle / 6.0
    } else {
        angle / s
    };
    Ok(v * factor)
}

/// Below this angle the Jacobian coefficients use truncated series; the
/// closed forms cancel badly there.
const JACOBIAN_SERIES_ANGLE: f64 = 1e-2;

/// Left Jacobian of SO(3), the translational block of the SE(3) exponential.
pub fn so3_left_jacobian(phi: &Vec3) -> Mat3 {
    let angle = phi.norm();
    let a2 = angle * angle;
    let (b, c) = if angle < JACOBIAN_SERIES_ANGLE {
        (
            0.5 - a2 / 24.0 + a2 * a2 / 720.0,
            1.0 / 6.0 - a2 / 120.0 + a2 * a2 / 5040.0,
        )
    } else {
        let half = (0.5 * angle).sin();
        (2.0 * half * half / a2, (angle - angle.sin()) / (a2 * angle))
    };
    let pt = skew(phi);
    Mat3::identity() + pt * b + pt * pt * c
}

pub fn so3_left_jacobian_inverse(phi: &Vec3) -> Mat3 {
    let angle = phi.norm();
    let a2 = angle * angle;
    let d = if angle < JACOBIAN_SERIES_ANGLE {
        1.0 / 12.0 + a2 / 720.0 + a2 * a2 / 30240.0
    } else {
        (1.0 - 0.5 * angle / (0.5 * angle).tan()) / a2
    };
    let pt = skew(phi);
    Mat3::identity() - pt * 0.5 + pt * pt * d
}

/// Element of se(3): translational part (m) and rotational part (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub translational: Vec3,
    pub rotational: Vec3,
}

impl Twist {
    pub fn new(translational: Vec3, rotational: Vec3) -> Self {
        Self {
            translational,
            rotational,
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        let (r, p) = (self.translational, self.rotational);
        [r.x, r.y, r.z, p.x, p.y, p.z]
    }

    pub fn norm_squared(&self) -> f64 {
        self.translational.norm_squared() + self.rotational.norm_squared()
    }
}

/// Rigid transformation `x -> A x + r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EuclideanTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl EuclideanTransform {
    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Mat3::identity(), Vec3::zeros())
    }

    /// Inverse assuming an orthogonal rotation block.
    pub fn inverse(&self) -> Self {
        let at = self.rotation.transpose();
        Self::new(at, -(at * self.translation))
    }

    pub fn compose(&self, other: &EuclideanTransform) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }
}

/// `H = exp([phi~ rho; 0 0])`, i.e. `A = exp(phi~)`, `r = V(phi) rho`.
pub fn se3_exp(theta: &Twist) -> EuclideanTransform {
    EuclideanTransform::new(
        so3_exp(&theta.rotational),
        so3_left_jacobian(&theta.rotational) * theta.translational,
    )
}

/// Inverse of [`se3_exp`] for rotation angles below pi.
pub fn se3_log(h: &EuclideanTransform) -> Result<Twist> {
    let phi = so3_log(&h.rotation)?;
    Ok(Twist::new(so3_left_jacobian_inverse(&phi) * h.translation, phi))
}
