//! Optional TOML configuration mirroring the command-line flags.
//!
//! ```toml
//! [display]
//! width = 960
//! height = 1080
//! levels = 8
//!
//! [session]
//! corpus = "corpus/manifest.json"
//! seed = 7
//! agent = "sweep"
//! conditions = ["20x200", "40x500"]
//! ```
//!
//! A flag given on the command line always wins over the file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use spv_core::geometry::{CameraModel, QuatOrder};
use spv_core::phosphene::PhospheneConfig;
use spv_core::renderer::RenderConfig;
use spv_core::Condition;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplaySettings {
    pub width: Option<u32>,
    pub height: Option<u32>,
    /// Horizontal field of view of one eye's display.
    pub hfov_deg: Option<f64>,
    pub levels: Option<u32>,
    pub sigma_ratio: Option<f64>,
    pub stencil: Option<u32>,
}

impl DisplaySettings {
    pub const DEFAULT_HFOV_DEG: f64 = 60.0;

    /// Fields set in `self` win over `fallback`.
    pub fn or(&self, fallback: &DisplaySettings) -> DisplaySettings {
        DisplaySettings {
            width: self.width.or(fallback.width),
            height: self.height.or(fallback.height),
            hfov_deg: self.hfov_deg.or(fallback.hfov_deg),
            levels: self.levels.or(fallback.levels),
            sigma_ratio: self.sigma_ratio.or(fallback.sigma_ratio),
            stencil: self.stencil.or(fallback.stencil),
        }
    }

    pub fn render_config(&self, condition: Condition) -> anyhow::Result<RenderConfig> {
        let base = RenderConfig::default();
        let camera = match (self.width, self.height, self.hfov_deg) {
            (None, None, None) => base.camera,
            (w, h, f) => CameraModel::with_horizontal_fov(
                w.unwrap_or(base.camera.width),
                h.unwrap_or(base.camera.height),
                f.unwrap_or(Self::DEFAULT_HFOV_DEG),
            )?,
        };
        let defaults = PhospheneConfig::default();
        let cfg = RenderConfig {
            fov_deg: condition.fov_deg,
            phosphenes: PhospheneConfig {
                count: condition.phosphenes,
                levels: self.levels.unwrap_or(defaults.levels),
                sigma_ratio: self.sigma_ratio.unwrap_or(defaults.sigma_ratio),
                stencil: self.stencil.unwrap_or(defaults.stencil),
                ..defaults
            },
            camera,
            eye_count: 1,
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSettings {
    pub panorama: Option<PathBuf>,
    pub fov: Option<f64>,
    pub phosphenes: Option<u32>,
    pub quat_order: Option<QuatOrder>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSettings {
    pub corpus: Option<PathBuf>,
    pub seed: Option<u64>,
    pub agent: Option<String>,
    pub conditions: Option<Vec<String>>,
    pub tick_hz: Option<f64>,
    pub participant: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSettings {
    pub logs: Option<Vec<PathBuf>>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSettings {
    pub port: Option<u16>,
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub display: DisplaySettings,
    pub render: RenderSettings,
    pub session: SessionSettings,
    pub analyze: AnalyzeSettings,
    pub serve: ServeSettings,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Parses a comma-separated list such as `20x200,40x500`.
pub fn parse_conditions<S: AsRef<str>>(items: &[S]) -> anyhow::Result<Vec<Condition>> {
    let mut out = Vec::new();
    for item in items {
        for part in item.as_ref().split(',').map(str::trim).filter(|s| !s.is_empty()) {
            out.push(part.parse::<Condition>().map_err(|e| anyhow::anyhow!("condition {part:?}: {e}"))?);
        }
    }
    anyhow::ensure!(!out.is_empty(), "no conditions given");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_fill_unset_flags() {
        let file: FileConfig = toml::from_str(
            r#"
            [display]
            width = 64
            levels = 4
            [session]
            seed = 9
            conditions = ["20x200", "40x500"]
            "#,
        )
        .unwrap();
        let flags = DisplaySettings {
            levels: Some(2),
            ..Default::default()
        };
        let merged = flags.or(&file.display);
        assert_eq!(merged.width, Some(64));
        assert_eq!(merged.levels, Some(2));
        assert_eq!(parse_conditions(&file.session.conditions.unwrap()).unwrap().len(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[display]\nwidht = 3\n").is_err());
    }

    #[test]
    fn default_display_is_the_headset_camera() {
        let cfg = DisplaySettings::default().render_config(Condition::new(20.0, 500)).unwrap();
        assert_eq!(cfg.camera, CameraModel::default());
        assert!(DisplaySettings {
            levels: Some(1),
            ..Default::default()
        }
        .render_config(Condition::new(20.0, 500))
        .is_err());
    }
}
