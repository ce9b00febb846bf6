use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{GeometryError, RotationMatrix};

/// Unit direction vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray(Vector3<f64>);

impl Ray {
    pub fn new(v: Vector3<f64>) -> Result<Self, GeometryError> {
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(GeometryError::InvalidRay);
        }
        Ok(Self(v / n))
    }

    /// Callers guarantee `v` is finite and non-zero.
    pub(crate) fn from_nonzero(v: Vector3<f64>) -> Self {
        Self(v / v.norm())
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

impl RotationMatrix {
    pub fn rotate(&self, ray: &Ray) -> Ray {
        Ray::from_nonzero(self.apply(&ray.0))
    }
}

/// Azimuth `phi ∈ [−π, π]` and elevation `theta ∈ [−π/2, π/2]`, radians.
///
/// The panorama frame is x forward, y right, z down, so positive elevation
/// points below the horizon and maps to rows below the image centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalCoord {
    pub phi: f64,
    pub theta: f64,
}

/// Linear equirectangular mapping between angles and panorama pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanoramaMapping {
    pub width: f64,
    pub height: f64,
    pub x0: f64,
    pub y0: f64,
}

impl PanoramaMapping {
    /// Full sphere mapping centred on the image.
    pub fn centered(width: u32, height: u32) -> Self {
        let (w, h) = (width as f64, height as f64);
        Self {
            width: w,
            height: h,
            x0: 0.5 * w,
            y0: 0.5 * h,
        }
    }
}

/// Spherical coordinates of a ray. At the poles azimuth is reported as 0.
pub fn ray_to_spherical(v: &Vector3<f64>) -> Result<SphericalCoord, GeometryError> {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(GeometryError::InvalidRay);
    }
    Ok(spherical_of_nonzero(v, n))
}

#[inline]
pub(crate) fn spherical_of_nonzero(v: &Vector3<f64>, norm: f64) -> SphericalCoord {
    let phi = if v.x == 0.0 && v.y == 0.0 {
        0.0
    } else {
        v.y.atan2(v.x)
    };
    let theta = (v.z / norm).clamp(-1.0, 1.0).asin();
    SphericalCoord { phi, theta }
}

pub fn spherical_to_ray(s: SphericalCoord) -> Ray {
    let (st, ct) = s.theta.sin_cos();
    let (sp, cp) = s.phi.sin_cos();
    Ray::from_nonzero(Vector3::new(ct * cp, ct * sp, st))
}

/// Panorama pixel of a direction: columns wrap into `[0, W)`, rows clamp to
/// `[0, H − 1]`.
#[inline]
pub fn spherical_to_pixel(s: SphericalCoord, m: &PanoramaMapping) -> (f64, f64) {
    let x = m.x0 + s.phi / TAU * m.width;
    let mut x = x.rem_euclid(m.width);
    if x >= m.width {
        // rem_euclid can round up to exactly W for tiny negative inputs
        x = 0.0;
    }
    let y = (m.y0 + s.theta / PI * m.height).clamp(0.0, m.height - 1.0);
    (x, y)
}

/// Inverse of [`spherical_to_pixel`] for in-range pixels.
pub fn pixel_to_spherical(x: f64, y: f64, m: &PanoramaMapping) -> SphericalCoord {
    SphericalCoord {
        phi: (x - m.x0) / m.width * TAU,
        theta: (y - m.y0) / m.height * PI,
    }
}
