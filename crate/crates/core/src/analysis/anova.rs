use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::regression::f_sf;
use super::AnalysisError;

/// One observation for a two-factor design, with zero-based level indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorialObservation {
    pub a: usize,
    pub b: usize,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnovaRow {
    pub ss: f64,
    pub df: f64,
    pub ms: f64,
    /// `None` for the residual row and when the residual has no degrees of
    /// freedom.
    pub f: Option<f64>,
    pub p: Option<f64>,
}

/// Sequential (type I) sums of squares: A, then B given A, then A × B.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaTable {
    pub factor_a: AnovaRow,
    pub factor_b: AnovaRow,
    pub interaction: AnovaRow,
    pub residual: AnovaRow,
    pub total_ss: f64,
    pub a_levels: usize,
    pub b_levels: usize,
    pub balanced: bool,
}

fn rss_of_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64, AnalysisError> {
    let beta = x
        .clone()
        .svd(true, true)
        .solve(y, 1e-12)
        .map_err(|e| AnalysisError::InvalidInput(e.to_string()))?;
    Ok((y - x * beta).norm_squared())
}

pub fn two_way_anova(obs: &[FactorialObservation]) -> Result<AnovaTable, AnalysisError> {
    let a_levels = obs.iter().map(|o| o.a + 1).max().unwrap_or(0);
    let b_levels = obs.iter().map(|o| o.b + 1).max().unwrap_or(0);
    if a_levels < 2 || b_levels < 2 {
        return Err(AnalysisError::InsufficientData(format!(
            "two-way ANOVA needs at least 2 levels per factor, got {a_levels} × {b_levels}"
        )));
    }
    if let Some(o) = obs.iter().find(|o| !o.y.is_finite()) {
        return Err(AnalysisError::InvalidInput(format!("non-finite response {}", o.y)));
    }
    let cells = a_levels * b_levels;
    let mut cell_n = vec![0usize; cells];
    let mut cell_sum = vec![0.0; cells];
    let mut a_n = vec![0usize; a_levels];
    let mut a_sum = vec![0.0; a_levels];
    for o in obs {
        cell_n[o.a * b_levels + o.b] += 1;
        cell_sum[o.a * b_levels + o.b] += o.y;
        a_n[o.a] += 1;
        a_sum[o.a] += o.y;
    }
    if let Some(k) = cell_n.iter().position(|&n| n == 0) {
        return Err(AnalysisError::EmptyCell {
            a: k / b_levels,
            b: k % b_levels,
        });
    }

    let n = obs.len();
    let grand = obs.iter().map(|o| o.y).sum::<f64>() / n as f64;
    let total_ss: f64 = obs.iter().map(|o| (o.y - grand).powi(2)).sum();
    let ss_a: f64 = (0..a_levels)
        .map(|i| a_n[i] as f64 * (a_sum[i] / a_n[i] as f64 - grand).powi(2))
        .sum();
    let rss_full: f64 = obs
        .iter()
        .map(|o| {
            let k = o.a * b_levels + o.b;
            (o.y - cell_sum[k] / cell_n[k] as f64).powi(2)
        })
        .sum();

    // additive model: intercept plus treatment-coded dummies
    let p = 1 + (a_levels - 1) + (b_levels - 1);
    let mut x = DMatrix::<f64>::zeros(n, p);
    for (r, o) in obs.iter().enumerate() {
        x[(r, 0)] = 1.0;
        if o.a > 0 {
            x[(r, o.a)] = 1.0;
        }
        if o.b > 0 {
            x[(r, a_levels - 1 + o.b)] = 1.0;
        }
    }
    let y = DVector::from_iterator(n, obs.iter().map(|o| o.y));
    let rss_additive = rss_of_fit(&x, &y)?;
    let rss_a = total_ss - ss_a;
    let ss_b = (rss_a - rss_additive).max(0.0);
    let ss_ab = (rss_additive - rss_full).max(0.0);

    let df_a = (a_levels - 1) as f64;
    let df_b = (b_levels - 1) as f64;
    let df_ab = df_a * df_b;
    let df_e = (n - cells) as f64;
    let ms_e = if df_e > 0.0 { rss_full / df_e } else { f64::NAN };

    // least-squares round-off scales with the raw magnitude of y
    let tol = 1e-12 * total_ss + 1e-13 * y.norm_squared();
    let row = |ss: f64, df: f64| {
        let ms = ss / df;
        let (f, p) = if df_e == 0.0 {
            (None, None)
        } else {
            // exact zeros on either side are reported without dividing
            let f = if ss <= tol {
                0.0
            } else if rss_full <= tol {
                f64::INFINITY
            } else {
                ms / ms_e
            };
            (Some(f), Some(f_sf(f, df, df_e)))
        };
        AnovaRow { ss, df, ms, f, p }
    };
    let first = cell_n[0];
    Ok(AnovaTable {
        factor_a: row(ss_a, df_a),
        factor_b: row(ss_b, df_b),
        interaction: row(ss_ab, df_ab),
        residual: AnovaRow {
            ss: rss_full,
            df: df_e,
            ms: ms_e,
            f: None,
            p: None,
        },
        total_ss,
        a_levels,
        b_levels,
        balanced: cell_n.iter().all(|&c| c == first),
    })
}
