use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::AnalysisError;

/// Ordinary least squares of `y` on `ln(AR)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    /// Regression F with (1, n − 2) degrees of freedom; infinite for a
    /// perfect fit.
    pub f_value: f64,
    pub p_value: f64,
    pub n: usize,
}

impl RegressionFit {
    pub fn predict(&self, angular_resolution: f64) -> f64 {
        self.intercept + self.slope * angular_resolution.ln()
    }

    pub fn significance(&self) -> &'static str {
        p_band(self.p_value)
    }
}

/// `(n − 2) · R² / (1 − R²)`, the F statistic of a simple regression.
pub fn f_statistic(r_squared: f64, n: usize) -> Result<f64, AnalysisError> {
    if n <= 2 {
        return Err(AnalysisError::InsufficientData(format!("F needs n > 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&r_squared) {
        return Err(AnalysisError::InvalidInput(format!("R² = {r_squared} outside [0, 1]")));
    }
    if r_squared == 1.0 {
        return Err(AnalysisError::InfiniteF);
    }
    Ok((n - 2) as f64 * r_squared / (1.0 - r_squared))
}

/// Upper-tail probability of an F(d1, d2) variate.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_infinite() {
        return 0.0;
    }
    if f.is_nan() || f <= 0.0 {
        return 1.0;
    }
    FisherSnedecor::new(d1, d2).map_or(f64::NAN, |d| d.sf(f))
}

/// Conventional significance stars.
pub fn p_band(p: f64) -> &'static str {
    match p {
        p if p < 0.001 => "***",
        p if p < 0.01 => "**",
        p if p < 0.05 => "*",
        _ => "ns",
    }
}

pub fn fit_log_regression(pairs: &[(f64, f64)]) -> Result<RegressionFit, AnalysisError> {
    let n = pairs.len();
    if n < 3 {
        return Err(AnalysisError::InsufficientData(format!(
            "regression needs at least 3 pairs, got {n}"
        )));
    }
    if let Some(&(ar, y)) = pairs.iter().find(|&&(ar, y)| !(ar > 0.0 && ar.is_finite() && y.is_finite())) {
        return Err(AnalysisError::InvalidInput(format!("bad pair ({ar}, {y})")));
    }
    let xs: Vec<f64> = pairs.iter().map(|&(ar, _)| ar.ln()).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = pairs.iter().map(|&(_, y)| y).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, &(_, y)) in xs.iter().zip(pairs) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 1e-12 * nf * (1.0 + mx * mx) {
        return Err(AnalysisError::SingularFit);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(pairs)
        .map(|(x, &(_, y))| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ssr = slope * slope * sxx;
    let r_squared = if syy > 0.0 { (ssr / syy).clamp(0.0, 1.0) } else { 0.0 };
    let df_resid = nf - 2.0;
    let f_value = if ssr == 0.0 {
        0.0
    } else if sse <= syy * 1e-15 {
        f64::INFINITY
    } else {
        ssr / (sse / df_resid)
    };
    Ok(RegressionFit {
        intercept,
        slope,
        r_squared,
        f_value,
        p_value: f_sf(f_value, 1.0, df_resid),
        n,
    })
}
