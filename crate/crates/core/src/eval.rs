//! Out-of-sample and residual-Gaussianity metrics: rolling one-step RMSE,
//! percentage-of-best with tie splitting, one-tailed paired t-tests, Q-Q
//! R², skewness, the Pearson matrix of RMSE improvements, and the rescaled
//! transform-curve export. Plus the CSV writers for the report artifacts.

use std::path::Path;

use crate::error::{Error, Result};
use crate::special::{inv_norm_cdf, student_t_upper_tail};
use crate::transforms::Transform;

/// Root mean squared prediction error.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::Input(format!(
            "rmse length mismatch: {} vs {}",
            pred.len(),
            actual.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Input("rmse needs at least one pair".into()));
    }
    let ss: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// Percentage of stocks on which each method attains the lowest RMSE.
/// Exact ties split credit equally, so the percentages always sum to 100.
pub fn percent_best(per_method_rmse: &[Vec<f64>]) -> Result<Vec<f64>> {
    if per_method_rmse.is_empty() {
        return Err(Error::Input("percent_best needs at least one method".into()));
    }
    let n_stocks = per_method_rmse[0].len();
    if n_stocks == 0 {
        return Err(Error::Input("percent_best needs at least one stock".into()));
    }
    if per_method_rmse.iter().any(|m| m.len() != n_stocks) {
        return Err(Error::Input(
            "all methods must cover the same stock set".into(),
        ));
    }
    let mut credit = vec![0.0f64; per_method_rmse.len()];
    for s in 0..n_stocks {
        let best = per_method_rmse
            .iter()
            .map(|m| m[s])
            .fold(f64::INFINITY, f64::min);
        let tied: Vec<usize> = per_method_rmse
            .iter()
            .enumerate()
            .filter(|(_, m)| m[s] == best)
            .map(|(i, _)| i)
            .collect();
        for &i in &tied {
            credit[i] += 1.0 / tied.len() as f64;
        }
    }
    Ok(credit.iter().map(|c| 100.0 * c / n_stocks as f64).collect())
}

/// Upper-tail p-value for H0: mean(diffs) = 0 against mean > 0, using the
/// sample standard deviation (n−1).
pub fn paired_t_test_one_tailed(diffs: &[f64]) -> Result<f64> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::Input("t-test needs at least 2 differences".into()));
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::Degenerate(
            "t-test undefined for zero-variance differences".into(),
        ));
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(student_t_upper_tail(t, (n - 1) as f64))
}

/// R² of the ordinary linear fit of sorted residuals on standard-normal
/// quantiles at plotting positions (i − 0.5)/n.
pub fn qq_r2(residuals: &[f64]) -> Result<f64> {
    let n = residuals.len();
    if n < 3 {
        return Err(Error::Input("qq_r2 needs at least 3 residuals".into()));
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let theo: Vec<f64> = (0..n)
        .map(|i| inv_norm_cdf((i as f64 + 0.5) / n as f64))
        .collect();
    match pearson(&sorted, &theo) {
        Some(r) => Ok(r * r),
        None => Err(Error::Degenerate(
            "qq_r2 undefined for constant residuals".into(),
        )),
    }
}

/// Population-moment skewness m₃ / m₂^{3/2}.
pub fn skewness(residuals: &[f64]) -> Result<f64> {
    let n = residuals.len();
    if n < 3 {
        return Err(Error::Input("skewness needs at least 3 residuals".into()));
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let m2 = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
    let m3 = residuals.iter().map(|r| (r - mean).powi(3)).sum::<f64>() / n as f64;
    if m2 <= 0.0 {
        return Err(Error::Degenerate(
            "skewness undefined for zero-variance residuals".into(),
        ));
    }
    Ok(m3 / m2.powf(1.5))
}

/// Pearson correlation; None when either vector has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let da = x - ma;
        let db = y - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Pearson matrix of per-stock RMSE improvements over the method at
/// `identity_idx`. Zero-variance improvement vectors (the identity method
/// itself) yield missing entries.
pub fn improvement_correlation(
    per_method_rmse: &[Vec<f64>],
    identity_idx: usize,
) -> Result<Vec<Vec<Option<f64>>>> {
    let m = per_method_rmse.len();
    if identity_idx >= m {
        return Err(Error::Input("identity index out of range".into()));
    }
    let n_stocks = per_method_rmse[0].len();
    if n_stocks < 3 {
        return Err(Error::Input(
            "improvement correlation needs at least 3 stocks".into(),
        ));
    }
    if per_method_rmse.iter().any(|r| r.len() != n_stocks) {
        return Err(Error::Input(
            "all methods must cover the same stock set".into(),
        ));
    }
    let improvements: Vec<Vec<f64>> = per_method_rmse
        .iter()
        .map(|r| {
            r.iter()
                .zip(&per_method_rmse[identity_idx])
                .map(|(m, i)| i - m)
                .collect()
        })
        .collect();
    let mut matrix = vec![vec![None; m]; m];
    for i in 0..m {
        for j in i..m {
            let c = pearson(&improvements[i], &improvements[j]);
            matrix[i][j] = c;
            matrix[j][i] = c;
        }
    }
    Ok(matrix)
}

/// Sampled transform curve over [lo, hi], affinely rescaled so the
/// endpoints map to themselves (the standard display normalization).
pub fn export_transform_curve(
    transform: &Transform,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    if points < 2 || !(hi > lo) {
        return Err(Error::Input("curve export needs points >= 2 and hi > lo".into()));
    }
    let xs: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let ys = transform.forward_series(&xs)?;
    let span = ys[points - 1] - ys[0];
    if span == 0.0 {
        return Err(Error::Degenerate(
            "transform is flat across the grid; cannot rescale the curve".into(),
        ));
    }
    let y0 = ys[0];
    Ok(xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (x, lo + (hi - lo) * (y - y0) / span))
        .collect())
}

// ---------------------------------------------------------------------------
// CSV artifacts
// ---------------------------------------------------------------------------

/// One row of the method-level report.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub label: String,
    pub mean_rmse: f64,
    pub pct_best: f64,
    pub mean_qq_r2: f64,
    pub mean_skewness: f64,
    /// None for the reference method itself (zero-variance differences).
    pub p_value_vs_reference: Option<f64>,
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut out = String::from("method,mean_rmse,pct_best,mean_qq_r2,mean_skewness,p_value_vs_reference\n");
    for r in rows {
        let p = r
            .p_value_vs_reference
            .map(|p| format!("{p:.4}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4},{}\n",
            r.label, r.mean_rmse, r.pct_best, r.mean_qq_r2, r.mean_skewness, p
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_per_stock_csv(
    path: &Path,
    symbols: &[String],
    labels: &[String],
    per_method_rmse: &[Vec<f64>],
) -> Result<()> {
    let mut out = String::from("symbol");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (s, symbol) in symbols.iter().enumerate() {
        out.push_str(symbol);
        for method in per_method_rmse {
            out.push_str(&format!(",{}", method[s]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_curve_csv(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("x,fx\n");
    for (x, y) in curve {
        out.push_str(&format!("{x},{y}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_correlation_csv(
    path: &Path,
    labels: &[String],
    matrix: &[Vec<Option<f64>>],
) -> Result<()> {
    let mut out = String::from("method");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (i, row) in matrix.iter().enumerate() {
        out.push_str(&labels[i]);
        for entry in row {
            match entry {
                Some(c) => out.push_str(&format!(",{c:.6}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
