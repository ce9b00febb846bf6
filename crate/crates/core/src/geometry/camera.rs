use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Ray, RotationMatrix};

/// Pinhole model of one HMD display.
///
/// Pixel `(j, i)` is column `j`, row `i`; pixel centres sit on integer
/// coordinates. Screen axes: x right, y down, z forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraModel {
    /// 960×1080 per eye with the full width spanning 60°.
    fn default() -> Self {
        Self::with_horizontal_fov(960, 1080, 60.0).expect("default camera is valid")
    }
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Square-pixel camera centred on the display whose width spans
    /// `hfov_deg` degrees.
    pub fn with_horizontal_fov(width: u32, height: u32, hfov_deg: f64) -> Result<Self, GeometryError> {
        if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "horizontal FOV {hfov_deg}° outside (0, 180)"
            )));
        }
        let f = 0.5 * width as f64 / (0.5 * hfov_deg.to_radians()).tan();
        Self::new(f, f, 0.5 * width as f64, 0.5 * height as f64, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(GeometryError::InvalidCamera(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidCamera("empty display".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(GeometryError::InvalidCamera(format!(
                "principal point ({}, {}) outside {}x{} display",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// `K⁻¹ · (j, i, 1)ᵀ`, not normalized.
    pub fn back_project(&self, j: f64, i: f64) -> Vector3<f64> {
        Vector3::new((j - self.cx) / self.fx, (i - self.cy) / self.fy, 1.0)
    }

    /// `K · v` for a ray in front of the screen; `None` behind it.
    pub fn project(&self, v: &Vector3<f64>) -> Option<(f64, f64)> {
        if v.z <= 0.0 {
            return None;
        }
        Some((self.fx * v.x / v.z + self.cx, self.fy * v.y / v.z + self.cy))
    }

    /// Horizontal radius in pixels of a circular aperture spanning `fov_deg`.
    pub fn aperture_radius_px(&self, fov_deg: f64) -> f64 {
        self.fx * (0.5 * fov_deg.to_radians()).tan()
    }

    /// Largest circle (in pixels) centred on the principal point that fits on
    /// the display.
    pub fn max_aperture_radius_px(&self) -> f64 {
        let (w, h) = (self.width as f64, self.height as f64);
        self.cx.min(w - self.cx).min(self.cy).min(h - self.cy)
    }
}

/// `R_panᵀ · R_imuᵀ`, the screen-to-panorama rotation applied to every ray of
/// a frame.
pub fn view_rotation(r_imu: &RotationMatrix, r_pan: &RotationMatrix) -> RotationMatrix {
    r_pan.transpose().compose(&r_imu.transpose())
}

/// Direction in the panorama frame of screen pixel `u = (j, i)`.
pub fn compute_ray(
    u: (f64, f64),
    cam: &CameraModel,
    r_imu: &RotationMatrix,
    r_pan: &RotationMatrix,
) -> Ray {
    let head = Ray::from_nonzero(cam.back_project(u.0, u.1));
    view_rotation(r_imu, r_pan).rotate(&head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{quat_to_rotation, Quaternion};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn default_camera_spans_sixty_degrees() {
        let cam = CameraModel::default();
        assert_eq!((cam.width, cam.height), (960, 1080));
        assert_abs_diff_eq!(cam.aperture_radius_px(60.0), 480.0, epsilon = 1e-9);
        assert_eq!(cam.max_aperture_radius_px(), 480.0);
    }

    #[test]
    fn invalid_cameras_are_rejected() {
        assert!(CameraModel::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraModel::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraModel::new(1.0, 1.0, 1.0, -0.5, 4, 4).is_err());
        assert!(CameraModel::with_horizontal_fov(10, 10, 180.0).is_err());
    }

    #[test]
    fn principal_point_maps_to_optical_axis() {
        let cam = CameraModel::default();
        let id = RotationMatrix::identity();
        let ray = compute_ray((cam.cx, cam.cy), &cam, &id, &id);
        assert_eq!(*ray.vector(), Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn yawed_head_rotates_forward_ray() {
        let cam = CameraModel::default();
        let q = Quaternion::from_axis_angle([0.0, 1.0, 0.0], FRAC_PI_2);
        let r_imu = quat_to_rotation(q).unwrap();
        let ray = compute_ray((cam.cx, cam.cy), &cam, &r_imu, &RotationMatrix::identity());
        // oracle: explicit Rᵀ·(0,0,1)
        let m = r_imu.matrix();
        let expected = Vector3::new(m[(2, 0)], m[(2, 1)], m[(2, 2)]);
        assert_abs_diff_eq!(*ray.vector(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(ray.vector().x.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn adjacent_pixels_are_one_focal_step_apart() {
        let cam = CameraModel::default();
        let id = RotationMatrix::identity();
        let a = compute_ray((cam.cx, cam.cy), &cam, &id, &id);
        let b = compute_ray((cam.cx + 1.0, cam.cy), &cam, &id, &id);
        let angle = a.vector().dot(b.vector()).clamp(-1.0, 1.0).acos();
        assert_abs_diff_eq!(angle, (1.0 / cam.fx).atan(), epsilon = 1e-9);
    }

    #[test]
    fn project_inverts_back_project() {
        let cam = CameraModel::default();
        let v = cam.back_project(123.25, 900.5);
        let (j, i) = cam.project(&(v * 3.0)).unwrap();
        assert_abs_diff_eq!(j, 123.25, epsilon = 1e-9);
        assert_abs_diff_eq!(i, 900.5, epsilon = 1e-9);
        assert!(cam.project(&Vector3::new(0.0, 0.0, -1.0)).is_none());
    }
}
