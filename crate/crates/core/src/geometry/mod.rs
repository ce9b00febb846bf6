//! Orientation and projection math.
//!
//! A screen pixel is back-projected through the display's pinhole model,
//! rotated by the head orientation into the panorama frame and mapped onto
//! equirectangular panorama coordinates:
//!
//! ```text
//! v = R_panᵀ · R_imuᵀ · K⁻¹ · (j, i, 1)ᵀ
//! phi = atan2(v_y, v_x),  theta = asin(v_z / |v|)
//! x = x0 + phi / 2π · W,  y = y0 + theta / π · H
//! ```

mod camera;
mod panorama;
mod quaternion;
mod sphere;

pub use camera::{compute_ray, view_rotation, CameraModel};
pub use panorama::{sample_panorama, Panorama};
pub use quaternion::{quat_to_rotation, QuatOrder, Quaternion, RotationMatrix};
pub use sphere::{
    pixel_to_spherical, ray_to_spherical, spherical_to_pixel, spherical_to_ray, PanoramaMapping,
    Ray, SphericalCoord,
};

pub(crate) use sphere::spherical_of_nonzero;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid orientation: {0}")]
    InvalidOrientation(&'static str),
    #[error("matrix is not a proper rotation")]
    NotARotation,
    #[error("invalid ray: zero or non-finite direction")]
    InvalidRay,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid panorama: {0}")]
    InvalidPanorama(String),
}
