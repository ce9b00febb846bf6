use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Order in which an external source reports the four quaternion components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuatOrder {
    /// `[w, x, y, z]`
    #[default]
    ScalarFirst,
    /// `[x, y, z, w]`, the layout most HMD SDKs use.
    ScalarLast,
}

/// Head orientation quaternion `w + xi + yj + zk`.
///
/// The value is stored as given; conversions normalize internally so an IMU
/// sample with a slightly drifted norm is still usable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_array(v: [f64; 4], order: QuatOrder) -> Self {
        match order {
            QuatOrder::ScalarFirst => Self::new(v[0], v[1], v[2], v[3]),
            QuatOrder::ScalarLast => Self::new(v[3], v[0], v[1], v[2]),
        }
    }

    pub fn to_array(self, order: QuatOrder) -> [f64; 4] {
        match order {
            QuatOrder::ScalarFirst => [self.w, self.x, self.y, self.z],
            QuatOrder::ScalarLast => [self.x, self.y, self.z, self.w],
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    /// IMU-convention quaternion for a head that has turned `yaw` to the
    /// right, then tilted `pitch` upward, then rolled `roll` clockwise
    /// (all radians).
    ///
    /// Screen axes are x right, y down, z forward. The IMU matrix maps the
    /// absolute frame into the screen frame, so the returned quaternion is the
    /// inverse of the head's body-to-world rotation.
    pub fn from_yaw_pitch_roll(yaw: f64, pitch: f64, roll: f64) -> Self {
        let qy = Self::from_axis_angle([0.0, 1.0, 0.0], yaw);
        let qx = Self::from_axis_angle([1.0, 0.0, 0.0], pitch);
        let qz = Self::from_axis_angle([0.0, 0.0, 1.0], roll);
        qy.mul(qx).mul(qz).conjugate()
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn normalized(self) -> Result<Self, GeometryError> {
        if !self.is_finite() {
            return Err(GeometryError::InvalidOrientation("non-finite component"));
        }
        let n = self.norm();
        if n == 0.0 {
            return Err(GeometryError::InvalidOrientation("zero quaternion"));
        }
        Ok(Self::new(self.w / n, self.x / n, self.y / n, self.z / n))
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * rhs`.
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, rhs: Self) -> Self {
        let (a1, b1, c1, d1) = (self.w, self.x, self.y, self.z);
        let (a2, b2, c2, d2) = (rhs.w, rhs.x, rhs.y, rhs.z);
        Self::new(
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        )
    }
}

/// Proper 3×3 rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix after checking orthonormality and handedness to `tol`.
    pub fn try_from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self, GeometryError> {
        let r = Self(m);
        if r.orthonormality_error() > tol || (m.determinant() - 1.0).abs() > tol {
            return Err(GeometryError::NotARotation);
        }
        Ok(r)
    }

    /// Change of basis from screen axes (x right, y down, z forward) to the
    /// equirectangular panorama frame (x forward, y right, z down), so that
    /// the optical axis lands on the horizon at the panorama centre and
    /// screen-right/screen-down follow increasing panorama columns/rows.
    pub fn screen_to_panorama() -> Self {
        // R_panᵀ maps screen → panorama, so R_pan is its transpose.
        Self(Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0).transpose())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, rhs: &RotationMatrix) -> Self {
        Self(self.0 * rhs.0)
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Frobenius norm of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

/// Rotation matrix of a head-orientation quaternion.
///
/// Uses the standard unit-quaternion form; the input is normalized first.
pub fn quat_to_rotation(q: Quaternion) -> Result<RotationMatrix, GeometryError> {
    let Quaternion { w, x, y, z } = q.normalized()?;
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    Ok(RotationMatrix(Matrix3::new(
        1.0 - 2.0 * (yy + zz),
        2.0 * (xy - wz),
        2.0 * (xz + wy),
        2.0 * (xy + wz),
        1.0 - 2.0 * (xx + zz),
        2.0 * (yz - wx),
        2.0 * (xz - wy),
        2.0 * (yz + wx),
        1.0 - 2.0 * (xx + yy),
    )))
}
