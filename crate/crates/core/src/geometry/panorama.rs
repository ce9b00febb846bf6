use std::path::Path;

use image::DynamicImage;

use super::{GeometryError, PanoramaMapping};

/// Single-channel equirectangular image with intensities in `[0, 1]`,
/// row-major, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Panorama {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl Panorama {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidPanorama("empty image".into()));
        }
        if data.len() != width as usize * height as usize {
            return Err(GeometryError::InvalidPanorama(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(GeometryError::InvalidPanorama("intensity outside [0, 1]".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn constant(width: u32, height: u32, value: f32) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    /// Builds a panorama from `f(column, row)`; values are clamped to `[0, 1]`.
    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> f32) -> Self {
        assert!(width > 0 && height > 0, "empty panorama");
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y).clamp(0.0, 1.0))
            .collect();
        Self { width, height, data }
    }

    /// Luma of any decodable image, scaled to `[0, 1]`.
    pub fn from_image(img: &DynamicImage) -> Result<Self, GeometryError> {
        let luma = img.to_luma8();
        let (w, h) = luma.dimensions();
        let data = luma.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
        Self::new(w, h, data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| GeometryError::InvalidPanorama(format!("{}: {e}", path.display())))?;
        Self::from_image(&img)
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

    pub fn mapping(&self) -> PanoramaMapping {
        PanoramaMapping::centered(self.width, self.height)
    }

    pub fn pixel(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Copy whose column `x` holds this panorama's column `x + shift`
    /// (wrapping).
    pub fn shifted_columns(&self, shift: i64) -> Self {
        let w = self.width as i64;
        Self::from_fn(self.width, self.height, |x, y| {
            self.pixel((x as i64 + shift).rem_euclid(w) as u32, y)
        })
    }
}

/// Bilinear sample at real pixel coordinates; wraps horizontally and clamps
/// vertically.
#[inline]
pub fn sample_panorama(p: &Panorama, x: f64, y: f64) -> f64 {
    let w = p.width as usize;
    let (wf, hf) = (p.width as f64, p.height as f64);

    let xw = x.rem_euclid(wf);
    let xf = xw.floor();
    let tx = xw - xf;
    let x0 = (xf as usize).min(w - 1);
    let x1 = if x0 + 1 == w { 0 } else { x0 + 1 };

    let yc = y.clamp(0.0, hf - 1.0);
    let yf = yc.floor();
    let ty = yc - yf;
    let y0 = yf as usize;
    let y1 = (y0 + 1).min(p.height as usize - 1);

    let at = |xi: usize, yi: usize| p.data[yi * w + xi] as f64;
    let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
    let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
    top * (1.0 - ty) + bottom * ty
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn gradient() -> Panorama {
        Panorama::from_fn(16, 8, |x, y| ((x * 7 + y * 13) % 17) as f32 / 16.0)
    }

    #[test]
    fn constant_panorama_samples_constant() {
        let p = Panorama::constant(32, 16, 0.25);
        for &(x, y) in &[(0.0, 0.0), (3.3, 7.9), (-100.2, 400.0), (31.9, 15.0)] {
            assert_abs_diff_eq!(sample_panorama(&p, x, y), 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn pixel_centres_are_exact() {
        let p = gradient();
        for y in 0..8 {
            for x in 0..16 {
                assert_eq!(sample_panorama(&p, x as f64, y as f64), p.pixel(x, y) as f64);
            }
        }
    }

    #[test]
    fn seam_blends_first_and_last_column() {
        let p = Panorama::from_fn(8, 4, |x, _| match x {
            0 => 1.0,
            7 => 0.2,
            _ => 0.5,
        });
        // hand-computed: weights 0.5/0.5 between column 7 and wrapped column 0
        let expected = 0.5 * 0.2f32 as f64 + 0.5 * 1.0;
        assert_abs_diff_eq!(sample_panorama(&p, 7.5, 1.0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(sample_panorama(&p, -0.5, 1.0), expected, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(Panorama::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Panorama::new(0, 2, vec![]).is_err());
        assert!(Panorama::new(1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn shifted_columns_wraps() {
        let p = gradient();
        let s = p.shifted_columns(3);
        assert_eq!(s.pixel(0, 2), p.pixel(3, 2));
        assert_eq!(s.pixel(15, 2), p.pixel(2, 2));
    }

    proptest! {
        #[test]
        fn horizontal_wrap_is_exact(xi in -4096i32..4096, yi in -64i32..600) {
            // dyadic coordinates so that x + W is exact in floating point
            let p = gradient();
            let x = xi as f64 / 256.0;
            let y = yi as f64 / 64.0;
            prop_assert_eq!(sample_panorama(&p, x, y), sample_panorama(&p, x + 16.0, y));
        }

        #[test]
        fn samples_stay_in_range(x in -100.0..100.0f64, y in -10.0..20.0f64) {
            let v = sample_panorama(&gradient(), x, y);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
