//! Phosphene layout, intensity quantization and Gaussian splatting.
//!
//! Phosphenes sit on a square grid masked to a circular aperture. Each one
//! samples a small window of the scene, quantizes the mean into `l` levels and
//! is drawn as an isotropic Gaussian whose peak brightness and width both
//! scale with the normalized level `L = level / (l − 1)`:
//!
//! ```text
//! P(x, y) = L · exp(−½ · ((x − μx)² + (y − μy)²) / (σ · L)²)
//! ```

use serde::{Deserialize, Serialize};

use crate::geometry::CameraModel;
use crate::renderer::StimulusFrame;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PhospheneError {
    #[error("invalid phosphene configuration: {0}")]
    Config(String),
    #[error("{fov_deg}° aperture needs a {needed:.1}px radius but the display fits {available:.1}px")]
    FovTooLarge {
        fov_deg: f64,
        needed: f64,
        available: f64,
    },
}

/// Display channel that carries the (single-channel) stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Red,
    #[default]
    Green,
    Blue,
    Gray,
}

/// How overlapping splats combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendMode {
    /// Sum, saturating at 1.
    #[default]
    Additive,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhospheneConfig {
    /// Nominal phosphene count before the circular mask.
    pub count: u32,
    /// Number of intensity levels.
    pub levels: u32,
    /// Base Gaussian σ as a fraction of the phosphene radius.
    pub sigma_ratio: f64,
    /// Side of the k×k sub-ray stencil averaged per phosphene.
    pub stencil: u32,
    pub channel: Channel,
    pub blend: BlendMode,
}

impl Default for PhospheneConfig {
    fn default() -> Self {
        Self {
            count: 500,
            levels: 8,
            sigma_ratio: 0.5,
            stencil: 3,
            channel: Channel::Green,
            blend: BlendMode::Additive,
        }
    }
}

impl PhospheneConfig {
    pub fn with_count(count: u32) -> Self {
        Self {
            count,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PhospheneError> {
        if self.count == 0 {
            return Err(PhospheneError::Config("phosphene count must be positive".into()));
        }
        if self.levels < 2 {
            return Err(PhospheneError::Config(format!(
                "need at least 2 intensity levels, got {}",
                self.levels
            )));
        }
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio <= 1.0) {
            return Err(PhospheneError::Config(format!(
                "sigma_ratio {} outside (0, 1]",
                self.sigma_ratio
            )));
        }
        if self.stencil == 0 {
            return Err(PhospheneError::Config("stencil must be at least 1".into()));
        }
        Ok(())
    }
}

/// Head-locked phosphene positions on the display.
#[derive(Debug, Clone, PartialEq)]
pub struct PhospheneLayout {
    pub grid_side: u32,
    /// Distance between neighbouring centres, pixels.
    pub pitch: f64,
    /// Footprint radius, pixels (half the pitch).
    pub radius: f64,
    /// Base Gaussian σ at full luminance, pixels.
    pub sigma: f64,
    pub centers: Vec<(f64, f64)>,
    pub nominal_count: u32,
    pub effective_count: usize,
    pub fov_deg: f64,
    /// Aperture radius, pixels.
    pub aperture_radius: f64,
    /// Aperture centre (the principal point).
    pub aperture_center: (f64, f64),
}

impl PhospheneLayout {
    /// Outer reach of any splat beyond the aperture.
    pub fn splat_margin(&self) -> f64 {
        3.0 * self.sigma
    }
}

/// Square grid of `round(√N)²` candidates over the aperture's bounding
/// square, keeping those whose centre lies inside the aperture.
pub fn build_layout(
    cfg: &PhospheneConfig,
    fov_deg: f64,
    cam: &CameraModel,
) -> Result<PhospheneLayout, PhospheneError> {
    cfg.validate()?;
    if !(fov_deg > 0.0 && fov_deg < 180.0) {
        return Err(PhospheneError::Config(format!("FOV {fov_deg}° outside (0, 180)")));
    }
    let r = cam.aperture_radius_px(fov_deg);
    let available = cam.max_aperture_radius_px();
    if r > available * (1.0 + 1e-9) {
        return Err(PhospheneError::FovTooLarge {
            fov_deg,
            needed: r,
            available,
        });
    }

    let side = ((cfg.count as f64).sqrt().round() as u32).max(1);
    let pitch = 2.0 * r / side as f64;
    let (cx, cy) = (cam.cx, cam.cy);
    let mut centers = Vec::with_capacity((side * side) as usize);
    for row in 0..side {
        let dy = pitch * (row as f64 + 0.5) - r;
        for col in 0..side {
            let dx = pitch * (col as f64 + 0.5) - r;
            if dx * dx + dy * dy <= r * r {
                centers.push((cx + dx, cy + dy));
            }
        }
    }
    let radius = 0.5 * pitch;
    Ok(PhospheneLayout {
        grid_side: side,
        pitch,
        radius,
        sigma: cfg.sigma_ratio * radius,
        effective_count: centers.len(),
        centers,
        nominal_count: cfg.count,
        fov_deg,
        aperture_radius: r,
        aperture_center: (cx, cy),
    })
}

/// Offsets of a k×k stencil covering a square window of side `pitch`.
pub fn stencil_offsets(k: u32, pitch: f64) -> Vec<(f64, f64)> {
    let step = pitch / k as f64;
    let off = |n: u32| step * (n as f64 + 0.5) - 0.5 * pitch;
    (0..k)
        .flat_map(|row| (0..k).map(move |col| (off(col), off(row))))
        .collect()
}

/// Raw phosphene intensity: the mean of the window samples.
pub fn sample_intensity(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Quantized level in `0..levels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuantizedIntensity(pub u32);

/// Normalized luminance in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NormalizedLuminance(pub f64);

/// `min(floor(raw · l), l − 1)`; out-of-range input is clamped.
pub fn quantize(raw: f64, levels: u32) -> QuantizedIntensity {
    let raw = if (0.0..=1.0).contains(&raw) {
        raw
    } else {
        log::warn!("phosphene intensity {raw} outside [0, 1], clamping");
        if raw.is_nan() {
            0.0
        } else {
            raw.clamp(0.0, 1.0)
        }
    };
    let top = levels.saturating_sub(1);
    QuantizedIntensity(((raw * levels as f64).floor() as u32).min(top))
}

/// `level / (l − 1)`, so the top level is full scale.
pub fn luminance(q: QuantizedIntensity, levels: u32) -> Result<NormalizedLuminance, PhospheneError> {
    if levels < 2 {
        return Err(PhospheneError::Config(format!(
            "need at least 2 intensity levels, got {levels}"
        )));
    }
    let top = levels - 1;
    Ok(NormalizedLuminance(q.0.min(top) as f64 / top as f64))
}

/// Splats one phosphene into `target`.
///
/// The splat is truncated at `3·σ·L`; `L = 0` draws nothing.
pub fn render_phosphene(
    center: (f64, f64),
    lum: NormalizedLuminance,
    sigma: f64,
    blend: BlendMode,
    target: &mut StimulusFrame,
) {
    let l = lum.0;
    let s = sigma * l;
    if s.is_nan() || s <= 0.0 {
        return;
    }
    let support = 3.0 * s;
    let support2 = support * support;
    let (w, h) = (target.width() as i64, target.height() as i64);
    let (mx, my) = center;
    let x0 = ((mx - support).ceil() as i64).max(0);
    let x1 = ((mx + support).floor() as i64).min(w - 1);
    let y0 = ((my - support).ceil() as i64).max(0);
    let y1 = ((my + support).floor() as i64).min(h - 1);
    if x0 > x1 || y0 > y1 {
        return;
    }

    // separable profile: exp(a + b) = exp(a) · exp(b)
    let inv = -0.5 / (s * s);
    let gx: Vec<(f64, f64)> = (x0..=x1)
        .map(|x| {
            let d = x as f64 - mx;
            (d * d, (inv * d * d).exp())
        })
        .collect();

    let width = w as usize;
    let data = target.data_mut();
    for y in y0..=y1 {
        let dy = y as f64 - my;
        let dy2 = dy * dy;
        let gy = l * (inv * dy2).exp();
        let row = &mut data[y as usize * width + x0 as usize..=y as usize * width + x1 as usize];
        for (px, &(dx2, g)) in row.iter_mut().zip(&gx) {
            if dx2 + dy2 > support2 {
                continue;
            }
            let v = (gy * g) as f32;
            *px = match blend {
                BlendMode::Additive => (*px + v).min(1.0),
                BlendMode::Max => px.max(v),
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn frame(w: u32, h: u32) -> StimulusFrame {
        StimulusFrame::blank(w, h)
    }

    #[test]
    fn config_validation() {
        assert!(PhospheneConfig::default().validate().is_ok());
        assert!(PhospheneConfig::with_count(0).validate().is_err());
        let bad = PhospheneConfig {
            levels: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PhospheneConfig {
            sigma_ratio: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn two_hundred_phosphenes_use_fourteen_wide_grid() {
        let l = build_layout(&PhospheneConfig::with_count(200), 20.0, &CameraModel::default()).unwrap();
        assert_eq!(l.grid_side, 14);
        assert!(l.effective_count <= 196);
        for &(x, y) in &l.centers {
            let d = ((x - 480.0).powi(2) + (y - 540.0).powi(2)).sqrt();
            assert!(d <= l.aperture_radius);
        }
    }

    #[test]
    fn single_phosphene_sits_at_centre() {
        let cam = CameraModel::default();
        let l = build_layout(&PhospheneConfig::with_count(1), 40.0, &cam).unwrap();
        assert_eq!(l.centers, vec![(cam.cx, cam.cy)]);
        assert_eq!(l.effective_count, 1);
    }

    #[test]
    fn masked_count_matches_enumeration() {
        let cam = CameraModel::default();
        let l = build_layout(&PhospheneConfig::with_count(500), 60.0, &cam).unwrap();
        assert_eq!(l.grid_side, 22);
        // independent count: integer lattice test on doubled coordinates
        let side = 22i64;
        let mut count = 0;
        for row in 0..side {
            for col in 0..side {
                let (u, v) = (2 * col + 1 - side, 2 * row + 1 - side);
                if u * u + v * v <= side * side {
                    count += 1;
                }
            }
        }
        assert_eq!(l.effective_count, count);
        let area = std::f64::consts::FRAC_PI_4 * (side * side) as f64;
        assert!((l.effective_count as f64 - area).abs() < 2.0 * side as f64);
    }

    #[test]
    fn oversized_fov_is_rejected() {
        let cam = CameraModel::default();
        let err = build_layout(&PhospheneConfig::default(), 70.0, &cam).unwrap_err();
        assert!(matches!(err, PhospheneError::FovTooLarge { .. }));
        assert!(build_layout(&PhospheneConfig::default(), 60.0, &cam).is_ok());
    }

    #[test]
    fn window_means() {
        assert_eq!(sample_intensity(&[0.5; 9]), 0.5);
        assert_eq!(sample_intensity(&[0.0, 1.0, 0.0, 1.0]), 0.5);
        assert_eq!(sample_intensity(&[]), 0.0);
    }

    #[test]
    fn stencil_over_gradient() {
        let offs = stencil_offsets(3, 9.0);
        assert_eq!(offs.len(), 9);
        assert_eq!(offs[0], (-3.0, -3.0));
        assert_eq!(offs[4], (0.0, 0.0));
        // f(x, y) = 0.1 + 0.02·(x + 10) + 0.01·(y + 10) around the origin
        let f = |x: f64, y: f64| 0.1 + 0.02 * (x + 10.0) + 0.01 * (y + 10.0);
        let samples: Vec<f64> = offs.iter().map(|&(x, y)| f(x, y)).collect();
        let direct = (f(-3.0, -3.0) + f(0.0, -3.0) + f(3.0, -3.0)
            + f(-3.0, 0.0) + f(0.0, 0.0) + f(3.0, 0.0)
            + f(-3.0, 3.0) + f(0.0, 3.0) + f(3.0, 3.0))
            / 9.0;
        assert_abs_diff_eq!(sample_intensity(&samples), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(direct, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn quantize_cases() {
        assert_eq!(quantize(1.0, 8), QuantizedIntensity(7));
        assert_eq!(quantize(0.0, 8), QuantizedIntensity(0));
        assert_eq!(quantize(0.49, 8), QuantizedIntensity(3));
        assert_eq!(quantize(0.125, 8), QuantizedIntensity(1));
        assert_eq!(quantize(-0.3, 8), QuantizedIntensity(0));
        assert_eq!(quantize(7.0, 8), QuantizedIntensity(7));
        assert_eq!(quantize(f64::NAN, 8), QuantizedIntensity(0));
    }

    #[test]
    fn luminance_cases() {
        assert_eq!(luminance(QuantizedIntensity(7), 8).unwrap().0, 1.0);
        assert_eq!(luminance(QuantizedIntensity(0), 8).unwrap().0, 0.0);
        assert_abs_diff_eq!(luminance(QuantizedIntensity(4), 8).unwrap().0, 4.0 / 7.0);
        assert!(luminance(QuantizedIntensity(0), 1).is_err());
    }

    #[test]
    fn quantize_luminance_round_trip_is_idempotent() {
        for l in 2..=16 {
            for level in 0..l {
                let lum = luminance(QuantizedIntensity(level), l).unwrap();
                assert_eq!(quantize(lum.0, l), QuantizedIntensity(level), "l={l} level={level}");
            }
        }
    }

    #[test]
    fn zero_luminance_draws_nothing() {
        let mut f = frame(32, 32);
        render_phosphene((16.0, 16.0), NormalizedLuminance(0.0), 4.0, BlendMode::Additive, &mut f);
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn peak_and_one_sigma_values() {
        let mut f = frame(64, 64);
        render_phosphene((32.0, 32.0), NormalizedLuminance(1.0), 5.0, BlendMode::Additive, &mut f);
        assert_eq!(f.get(32, 32), 1.0);
        assert_abs_diff_eq!(f.get(37, 32) as f64, (-0.5f64).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(f.get(32, 27) as f64, 0.6065, epsilon = 1e-4);
        // truncated beyond 3σ
        assert_eq!(f.get(48, 32), 0.0);
        assert!(f.get(47, 32) > 0.0);
    }

    #[test]
    fn partial_luminance_scales_peak_and_width() {
        let mut f = frame(64, 64);
        let l = 4.0 / 7.0;
        render_phosphene((32.0, 32.0), NormalizedLuminance(l), 7.0, BlendMode::Additive, &mut f);
        assert_abs_diff_eq!(f.get(32, 32) as f64, l, epsilon = 1e-6);
        assert_abs_diff_eq!(f.get(36, 32) as f64, l * (-0.5f64).exp(), epsilon = 1e-6);
    }

    #[test]
    fn overlapping_splats_saturate_or_take_max() {
        let mut add = frame(16, 16);
        let mut max = frame(16, 16);
        for c in [(7.0, 8.0), (9.0, 8.0)] {
            render_phosphene(c, NormalizedLuminance(1.0), 3.0, BlendMode::Additive, &mut add);
            render_phosphene(c, NormalizedLuminance(1.0), 3.0, BlendMode::Max, &mut max);
        }
        assert_eq!(add.get(8, 8), 1.0);
        assert_abs_diff_eq!(max.get(8, 8) as f64, (-0.5f64 / 9.0).exp(), epsilon = 1e-6);
        assert!(add.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn splat_clips_at_frame_edges() {
        let mut f = frame(8, 8);
        render_phosphene((0.0, 0.0), NormalizedLuminance(1.0), 2.0, BlendMode::Additive, &mut f);
        assert_eq!(f.get(0, 0), 1.0);
        render_phosphene((-50.0, 3.0), NormalizedLuminance(1.0), 2.0, BlendMode::Additive, &mut f);
    }

    #[test]
    fn footprint_grows_with_level() {
        let mut last = 0;
        for level in 0..8 {
            let mut f = frame(64, 64);
            let lum = luminance(QuantizedIntensity(level), 8).unwrap();
            render_phosphene((32.3, 31.6), lum, 6.0, BlendMode::Additive, &mut f);
            let area = f.data().iter().filter(|&&v| v > 0.0).count();
            assert!(area >= last, "level {level}: {area} < {last}");
            last = area;
        }
        assert!(last > 0);
    }

    proptest! {
        #[test]
        fn brighter_level_never_darkens_a_pixel(
            level in 0u32..7, mx in 10.0..22.0f64, my in 10.0..22.0f64, sigma in 0.5..4.0f64
        ) {
            let mut lo = frame(32, 32);
            let mut hi = frame(32, 32);
            let l_lo = luminance(QuantizedIntensity(level), 8).unwrap();
            let l_hi = luminance(QuantizedIntensity(level + 1), 8).unwrap();
            render_phosphene((mx, my), l_lo, sigma, BlendMode::Additive, &mut lo);
            render_phosphene((mx, my), l_hi, sigma, BlendMode::Additive, &mut hi);
            for (a, b) in lo.data().iter().zip(hi.data()) {
                prop_assert!(b >= a);
            }
        }
    }
}
