//! Statistics over session logs: angular resolution, per-condition summaries,
//! log-linear regression and a two-way ANOVA.

mod anova;
mod regression;
mod summary;

use serde::Serialize;
use thiserror::Error;

pub use anova::{two_way_anova, AnovaRow, AnovaTable, FactorialObservation};
pub use regression::{f_sf, f_statistic, fit_log_regression, p_band, RegressionFit};
pub use summary::{
    analyze, anova_by_condition, condition_summary, mean_std, normalize_recognition, observations,
    summarize, AnalysisReport, ConditionSummary, Observation,
};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("regressor has no variance")]
    SingularFit,
    #[error("R² = 1 gives an infinite F statistic")]
    InfiniteF,
    #[error("cell (a = {a}, b = {b}) has no observations")]
    EmptyCell { a: usize, b: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Phosphenes per radian along one axis of the aperture.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct AngularResolution(pub f64);

impl AngularResolution {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `√N / fov` with the aperture in radians.
///
/// # Panics
/// If `phosphenes` is zero or `fov_deg` is not positive and finite.
pub fn angular_resolution(phosphenes: u32, fov_deg: f64) -> AngularResolution {
    assert!(phosphenes > 0, "phosphene count must be positive");
    assert!(fov_deg > 0.0 && fov_deg.is_finite(), "aperture must be positive, got {fov_deg}");
    AngularResolution((phosphenes as f64).sqrt() / fov_deg.to_radians())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_grows_with_count_and_shrinks_with_aperture() {
        assert!(angular_resolution(500, 20.0) > angular_resolution(200, 20.0));
        assert!(angular_resolution(200, 20.0) > angular_resolution(200, 40.0));
        let r = angular_resolution(400, 180.0 / std::f64::consts::PI);
        assert!((r.value() - 20.0).abs() < 1e-12);
    }

    #[test]
    #[should_panic]
    fn zero_count_panics() {
        angular_resolution(0, 20.0);
    }
}
