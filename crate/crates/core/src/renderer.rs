//! Per-frame pipeline: head orientation in, phosphene frame out.
//!
//! Rays for every phosphene's sampling stencil are computed once in the head
//! frame ([`precompute_ray_table`]). A frame then only rotates the cached rays,
//! looks them up in the panorama, averages, quantizes and splats.

use std::path::Path;

use image::{GrayImage, RgbImage};

use crate::condition::Condition;
use crate::geometry::{
    compute_ray, quat_to_rotation, sample_panorama, spherical_of_nonzero, spherical_to_pixel,
    view_rotation, CameraModel, GeometryError, Panorama, PanoramaMapping, Quaternion, Ray,
    RotationMatrix,
};
use crate::phosphene::{
    build_layout, luminance, quantize, render_phosphene, sample_intensity, stencil_offsets,
    Channel, PhospheneConfig, PhospheneError, PhospheneLayout, QuantizedIntensity,
};

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error(transparent)]
    Phosphene(#[from] PhospheneError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("ray table does not match render config: {0}")]
    TableMismatch(String),
    #[error("eye_count must be 1 or 2, got {0}")]
    EyeCount(u8),
    #[error("image export failed: {0}")]
    Export(String),
}

/// Single-channel stimulus image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusFrame {
    width: u32,
    height: u32,
    data: Vec<f32>,
    pub timestamp_s: f64,
    pub condition: Option<Condition>,
}

impl StimulusFrame {
    pub fn blank(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
            timestamp_s: 0.0,
            condition: None,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: f32) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    /// 8-bit quantization used for every export path.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_raw(self.width, self.height, self.to_bytes()).expect("buffer matches dimensions")
    }

    /// Colour image with the stimulus in one display channel.
    pub fn to_rgb_image(&self, channel: Channel) -> RgbImage {
        let mut img = RgbImage::new(self.width, self.height);
        for (px, v) in img.pixels_mut().zip(self.to_bytes()) {
            px.0 = match channel {
                Channel::Red => [v, 0, 0],
                Channel::Green => [0, v, 0],
                Channel::Blue => [0, 0, v],
                Channel::Gray => [v, v, v],
            };
        }
        img
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RenderError> {
        self.to_gray_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| RenderError::Export(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub fov_deg: f64,
    pub phosphenes: PhospheneConfig,
    pub camera: CameraModel,
    /// 1 or 2; both eyes receive the same image.
    pub eye_count: u8,
    /// Basis of the panorama frame with respect to the IMU frame.
    pub r_pan: RotationMatrix,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            fov_deg: 20.0,
            phosphenes: PhospheneConfig::default(),
            camera: CameraModel::default(),
            eye_count: 2,
            r_pan: RotationMatrix::screen_to_panorama(),
        }
    }
}

impl RenderConfig {
    pub fn for_condition(condition: Condition, base: &RenderConfig) -> Self {
        Self {
            fov_deg: condition.fov_deg,
            phosphenes: PhospheneConfig {
                count: condition.phosphenes,
                ..base.phosphenes.clone()
            },
            ..base.clone()
        }
    }

    pub fn condition(&self) -> Condition {
        Condition::new(self.fov_deg, self.phosphenes.count)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(1..=2).contains(&self.eye_count) {
            return Err(RenderError::EyeCount(self.eye_count));
        }
        self.camera.validate()?;
        self.phosphenes.validate()?;
        Ok(())
    }
}

/// Head-frame stencil rays for every phosphene of a layout.
#[derive(Debug, Clone)]
pub struct RayTable {
    layout: PhospheneLayout,
    stencil: usize,
    rays: Vec<Ray>,
    camera: CameraModel,
}

impl RayTable {
    pub fn layout(&self) -> &PhospheneLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.layout.effective_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rays sampled per phosphene (k²).
    pub fn stencil_len(&self) -> usize {
        self.stencil
    }

    pub fn phosphene_rays(&self, index: usize) -> &[Ray] {
        &self.rays[index * self.stencil..(index + 1) * self.stencil]
    }

    fn check(&self, cfg: &RenderConfig) -> Result<(), RenderError> {
        let k = cfg.phosphenes.stencil as usize;
        if self.camera != cfg.camera {
            return Err(RenderError::TableMismatch("camera differs".into()));
        }
        if self.layout.fov_deg != cfg.fov_deg {
            return Err(RenderError::TableMismatch(format!(
                "table built for {}°, config asks for {}°",
                self.layout.fov_deg, cfg.fov_deg
            )));
        }
        if self.layout.nominal_count != cfg.phosphenes.count {
            return Err(RenderError::TableMismatch(format!(
                "table built for {} phosphenes, config asks for {}",
                self.layout.nominal_count, cfg.phosphenes.count
            )));
        }
        if self.stencil != k * k {
            return Err(RenderError::TableMismatch("stencil size differs".into()));
        }
        if self.layout.sigma != cfg.phosphenes.sigma_ratio * self.layout.radius {
            return Err(RenderError::TableMismatch("sigma_ratio differs".into()));
        }
        Ok(())
    }
}

pub fn precompute_ray_table(cfg: &RenderConfig) -> Result<RayTable, RenderError> {
    cfg.validate()?;
    let layout = build_layout(&cfg.phosphenes, cfg.fov_deg, &cfg.camera)?;
    let offsets = stencil_offsets(cfg.phosphenes.stencil, layout.pitch);
    let rays = layout
        .centers
        .iter()
        .flat_map(|&(mx, my)| {
            offsets
                .iter()
                .map(move |&(ox, oy)| Ray::from_nonzero(cfg.camera.back_project(mx + ox, my + oy)))
        })
        .collect();
    Ok(RayTable {
        stencil: offsets.len(),
        rays,
        camera: cfg.camera,
        layout,
    })
}

#[inline]
fn sample_ray(p: &Panorama, m: &PanoramaMapping, ray: &Ray) -> f64 {
    let v = ray.vector();
    let s = spherical_of_nonzero(v, v.norm());
    let (x, y) = spherical_to_pixel(s, m);
    sample_panorama(p, x, y)
}

/// Quantized level of every phosphene in table order.
pub fn phosphene_levels(
    p: &Panorama,
    head: Quaternion,
    cfg: &RenderConfig,
    table: &RayTable,
) -> Result<Vec<QuantizedIntensity>, RenderError> {
    table.check(cfg)?;
    let r_imu = quat_to_rotation(head)?;
    let view = view_rotation(&r_imu, &cfg.r_pan);
    let m = p.mapping();
    let mut samples = Vec::with_capacity(table.stencil);
    Ok((0..table.len())
        .map(|i| {
            samples.clear();
            samples.extend(
                table
                    .phosphene_rays(i)
                    .iter()
                    .map(|r| sample_ray(p, &m, &view.rotate(r))),
            );
            quantize(sample_intensity(&samples), cfg.phosphenes.levels)
        })
        .collect())
}

/// Reference path: casts every stencil ray from scratch through
/// [`compute_ray`] without any cached state.
pub fn phosphene_levels_naive(
    p: &Panorama,
    head: Quaternion,
    cfg: &RenderConfig,
) -> Result<(PhospheneLayout, Vec<QuantizedIntensity>), RenderError> {
    cfg.validate()?;
    let layout = build_layout(&cfg.phosphenes, cfg.fov_deg, &cfg.camera)?;
    let r_imu = quat_to_rotation(head)?;
    let offsets = stencil_offsets(cfg.phosphenes.stencil, layout.pitch);
    let m = p.mapping();
    let levels = layout
        .centers
        .iter()
        .map(|&(mx, my)| {
            let samples: Vec<f64> = offsets
                .iter()
                .map(|&(ox, oy)| {
                    let ray = compute_ray((mx + ox, my + oy), &cfg.camera, &r_imu, &cfg.r_pan);
                    sample_ray(p, &m, &ray)
                })
                .collect();
            quantize(sample_intensity(&samples), cfg.phosphenes.levels)
        })
        .collect();
    Ok((layout, levels))
}

fn splat_all(
    layout: &PhospheneLayout,
    levels: &[QuantizedIntensity],
    cfg: &RenderConfig,
) -> Result<StimulusFrame, RenderError> {
    let mut frame = StimulusFrame::blank(cfg.camera.width, cfg.camera.height);
    for (&center, &level) in layout.centers.iter().zip(levels) {
        let lum = luminance(level, cfg.phosphenes.levels)?;
        render_phosphene(center, lum, layout.sigma, cfg.phosphenes.blend, &mut frame);
    }
    apply_fov_mask(&mut frame, layout.fov_deg, &cfg.camera, layout.splat_margin());
    frame.condition = Some(cfg.condition());
    Ok(frame)
}

fn per_eye(frame: StimulusFrame, eye_count: u8) -> Vec<StimulusFrame> {
    if eye_count == 2 {
        vec![frame.clone(), frame]
    } else {
        vec![frame]
    }
}

/// Renders one frame per eye from the cached ray table.
pub fn render_view(
    p: &Panorama,
    head: Quaternion,
    cfg: &RenderConfig,
    table: &RayTable,
) -> Result<Vec<StimulusFrame>, RenderError> {
    Ok(per_eye(render_frame(p, head, cfg, table)?, cfg.eye_count))
}

/// Monocular frame from the cached ray table.
pub fn render_frame(
    p: &Panorama,
    head: Quaternion,
    cfg: &RenderConfig,
    table: &RayTable,
) -> Result<StimulusFrame, RenderError> {
    let levels = phosphene_levels(p, head, cfg, table)?;
    splat_all(&table.layout, &levels, cfg)
}

/// Same output as [`render_view`] with every ray cast per frame.
pub fn render_view_naive(
    p: &Panorama,
    head: Quaternion,
    cfg: &RenderConfig,
) -> Result<Vec<StimulusFrame>, RenderError> {
    let (layout, levels) = phosphene_levels_naive(p, head, cfg)?;
    Ok(per_eye(splat_all(&layout, &levels, cfg)?, cfg.eye_count))
}

/// Zeroes every pixel farther than the aperture radius plus `margin_px` from
/// the principal point.
pub fn apply_fov_mask(frame: &mut StimulusFrame, fov_deg: f64, cam: &CameraModel, margin_px: f64) {
    let r = cam.aperture_radius_px(fov_deg) + margin_px.max(0.0);
    let r2 = r * r;
    let w = frame.width as usize;
    for (y, row) in frame.data.chunks_mut(w).enumerate() {
        let dy = y as f64 - cam.cy;
        let dy2 = dy * dy;
        if dy2 > r2 {
            row.fill(0.0);
            continue;
        }
        let half = (r2 - dy2).sqrt();
        let lo = (cam.cx - half).ceil().max(0.0) as usize;
        let hi = ((cam.cx + half).floor() + 1.0).clamp(0.0, w as f64) as usize;
        if lo >= hi {
            row.fill(0.0);
            continue;
        }
        row[..lo].fill(0.0);
        row[hi..].fill(0.0);
        // chord endpoints from sqrt can be off by an ulp; settle them exactly
        for x in [lo, hi - 1] {
            let dx = x as f64 - cam.cx;
            if dx * dx + dy2 > r2 {
                row[x] = 0.0;
            }
        }
    }
}
