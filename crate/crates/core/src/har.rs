//! Heterogeneous autoregression over the latent series: the one-step
//! predictor is linear in the previous day's value and the 5-day and 22-day
//! sums. Estimation is ordinary least squares via Householder QR.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lags needed by the monthly component.
pub const HAR_LAGS: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarParams {
    pub beta0: f64,
    pub beta_d: f64,
    pub beta_w: f64,
    pub beta_m: f64,
}

impl HarParams {
    pub fn new(beta0: f64, beta_d: f64, beta_w: f64, beta_m: f64) -> Self {
        HarParams { beta0, beta_d, beta_w, beta_m }
    }

    pub fn predict_features(&self, f: &[f64; 3]) -> f64 {
        self.beta0 + self.beta_d * f[0] + self.beta_w * f[1] + self.beta_m * f[2]
    }
}

/// Pooled regression rows: features (day value, weekly sum, monthly sum),
/// targets, and the (series, timestep) each row came from.
#[derive(Debug, Clone, Default)]
pub struct HarDataset {
    pub features: Vec<[f64; 3]>,
    pub targets: Vec<f64>,
    pub origin: Vec<(usize, usize)>,
}

impl HarDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Components from the last 22 values of `history`:
/// (z_t, z_{t-4}+..+z_t, z_{t-21}+..+z_t). Sums, not means.
pub fn har_features(history: &[f64]) -> Result<[f64; 3]> {
    let n = history.len();
    if n < HAR_LAGS {
        return Err(Error::Degenerate(format!(
            "HAR features need {HAR_LAGS} past values, got {n}"
        )));
    }
    let z_d = history[n - 1];
    let z_w: f64 = history[n - 5..].iter().sum();
    let z_m: f64 = history[n - HAR_LAGS..].iter().sum();
    Ok([z_d, z_w, z_m])
}

/// One-step forecast from the tail of a latent history.
pub fn har_predict(latent_history: &[f64], p: &HarParams) -> Result<f64> {
    Ok(p.predict_features(&har_features(latent_history)?))
}

/// Pool rows across series for every target index in `target_range`.
/// Lags come from within the same series only, so series boundaries never
/// leak into each other.
pub fn build_har_dataset(
    latents: &[Vec<f64>],
    target_range: std::ops::Range<usize>,
) -> Result<HarDataset> {
    if target_range.start < HAR_LAGS {
        return Err(Error::Degenerate(format!(
            "first target index {} leaves fewer than {HAR_LAGS} lags",
            target_range.start
        )));
    }
    let mut data = HarDataset::default();
    for (series_idx, series) in latents.iter().enumerate() {
        if series.len() < target_range.end {
            return Err(Error::Degenerate(format!(
                "series {series_idx} has {} values; targets need {}",
                series.len(),
                target_range.end
            )));
        }
        for t in target_range.clone() {
            data.features.push(har_features(&series[..t])?);
            data.targets.push(series[t]);
            data.origin.push((series_idx, t));
        }
    }
    Ok(data)
}

/// OLS through Householder QR of the n×4 design [1, z_d, z_w, z_m].
pub fn ols_fit(data: &HarDataset) -> Result<HarParams> {
    let n = data.len();
    const P: usize = 4;
    if n < P {
        return Err(Error::Degenerate(format!(
            "OLS needs at least {P} rows, got {n}"
        )));
    }
    // column-major design
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n], Vec::new(), Vec::new(), Vec::new()];
    for c in 0..3 {
        cols[c + 1] = data.features.iter().map(|f| f[c]).collect();
    }
    let mut rhs = data.targets.clone();

    let mut r = [[0.0f64; P]; P];
    for j in 0..P {
        // Householder vector for column j below the diagonal
        let alpha = {
            let norm: f64 = cols[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if cols[j][j] >= 0.0 {
                -norm
            } else {
                norm
            }
        };
        let mut v: Vec<f64> = cols[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in cols.iter_mut().skip(j) {
                let dot: f64 = v.iter().zip(&col[j..]).map(|(a, b)| a * b).sum();
                let scale = 2.0 * dot / vnorm2;
                for (vi, ci) in v.iter().zip(col[j..].iter_mut()) {
                    *ci -= scale * vi;
                }
            }
            let dot: f64 = v.iter().zip(&rhs[j..]).map(|(a, b)| a * b).sum();
            let scale = 2.0 * dot / vnorm2;
            for (vi, yi) in v.iter().zip(rhs[j..].iter_mut()) {
                *yi -= scale * vi;
            }
        }
    }
    for (i, row) in r.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate().skip(i) {
            *entry = cols[j][i];
        }
    }

    // rank check on the R diagonal
    let max_diag = (0..P).map(|i| r[i][i].abs()).fold(0.0f64, f64::max);
    for i in 0..P {
        if r[i][i].abs() <= 1e-10 * max_diag.max(1e-300) {
            return Err(Error::Degenerate(
                "singular design matrix: HAR components are collinear \
                 (constant latent series produce this)"
                    .into(),
            ));
        }
    }

    // back substitution
    let mut beta = [0.0f64; P];
    for i in (0..P).rev() {
        let mut acc = rhs[i];
        for j in i + 1..P {
            acc -= r[i][j] * beta[j];
        }
        beta[i] = acc / r[i][i];
    }
    Ok(HarParams::new(beta[0], beta[1], beta[2], beta[3]))
}

/// target − prediction per row, in row order.
pub fn residuals(data: &HarDataset, p: &HarParams) -> Vec<f64> {
    data.features
        .iter()
        .zip(&data.targets)
        .map(|(f, y)| y - p.predict_features(f))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Normal-equations solve, the independent oracle for the QR path.
    fn normal_equations(data: &HarDataset) -> [f64; 4] {
        let mut xtx = [[0.0f64; 4]; 4];
        let mut xty = [0.0f64; 4];
        for (f, y) in data.features.iter().zip(&data.targets) {
            let row = [1.0, f[0], f[1], f[2]];
            for i in 0..4 {
                for j in 0..4 {
                    xtx[i][j] += row[i] * row[j];
                }
                xty[i] += row[i] * y;
            }
        }
        // Gaussian elimination with partial pivoting
        let mut a = xtx;
        let mut b = xty;
        for col in 0..4 {
            let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..4 {
                let m = a[row][col] / a[col][col];
                for k in col..4 {
                    a[row][k] -= m * a[col][k];
                }
                b[row] -= m * b[col];
            }
        }
        let mut x = [0.0f64; 4];
        for i in (0..4).rev() {
            let mut acc = b[i];
            for j in i + 1..4 {
                acc -= a[i][j] * x[j];
            }
            x[i] = acc / a[i][i];
        }
        x
    }

    fn random_dataset(rng: &mut Rng, rows: usize) -> HarDataset {
        let mut data = HarDataset::default();
        for t in 0..rows {
            let f = [rng.normal(), rng.normal() * 2.0, rng.normal() * 5.0];
            data.features.push(f);
            data.targets.push(rng.normal());
            data.origin.push((0, t));
        }
        data
    }

    #[test]
    fn features_on_constant_and_ramp() {
        let constant = vec![3.0; 30];
        let f = har_features(&constant).unwrap();
        assert_eq!(f, [3.0, 15.0, 66.0]);

        // ramp 1..=23, target at value 24: z_d = 23, z_w = 105, z_m = 275
        let ramp: Vec<f64> = (1..=30).map(|v| v as f64).collect();
        let data = build_har_dataset(&[ramp], 23..24).unwrap();
        assert_eq!(data.features[0], [23.0, 105.0, 275.0]);
        assert_eq!(data.targets[0], 24.0);
    }

    #[test]
    fn dataset_pools_without_cross_series_leakage() {
        // sentinel series: second series has huge values; rows from the
        // first series must not see them in any lag sum
        let a: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let b: Vec<f64> = (0..40).map(|i| 1e6 + i as f64).collect();
        let data = build_har_dataset(&[a.clone(), b], 22..40).unwrap();
        assert_eq!(data.len(), 2 * 18);
        for (row, (series_idx, t)) in data.origin.iter().enumerate() {
            if *series_idx == 0 {
                let f = data.features[row];
                assert!(f[2] < 1e5, "row {row} at t={t} leaked sentinel values");
            }
        }
    }

    #[test]
    fn predict_known_values() {
        let history: Vec<f64> = (1..=22).map(|v| v as f64).collect();
        let p = HarParams::new(0.1, 0.4, 0.03, 0.01);
        let pred = har_predict(&history, &p).unwrap();
        assert!((pred - 14.43).abs() < 1e-12);

        // pure random-walk and pure constant forecasts
        let rw = HarParams::new(0.0, 1.0, 0.0, 0.0);
        assert_eq!(har_predict(&history, &rw).unwrap(), 22.0);
        let c = HarParams::new(5.5, 0.0, 0.0, 0.0);
        assert_eq!(har_predict(&history, &c).unwrap(), 5.5);

        assert!(har_predict(&history[..21], &p).is_err());
    }

    #[test]
    fn ols_matches_normal_equations_on_random_data() {
        let mut rng = Rng::new(17);
        for _ in 0..20 {
            let data = random_dataset(&mut rng, 200);
            let qr = ols_fit(&data).unwrap();
            let ne = normal_equations(&data);
            assert!((qr.beta0 - ne[0]).abs() < 1e-8);
            assert!((qr.beta_d - ne[1]).abs() < 1e-8);
            assert!((qr.beta_w - ne[2]).abs() < 1e-8);
            assert!((qr.beta_m - ne[3]).abs() < 1e-8);
        }
    }

    #[test]
    fn ols_recovers_noiseless_generator() {
        let truth = HarParams::new(0.1, 0.4, 0.03, 0.01);
        let mut rng = Rng::new(29);
        let mut data = random_dataset(&mut rng, 100);
        for (f, y) in data.features.iter().zip(data.targets.iter_mut()) {
            *y = truth.predict_features(f);
        }
        let fit = ols_fit(&data).unwrap();
        assert!((fit.beta0 - truth.beta0).abs() < 1e-10);
        assert!((fit.beta_d - truth.beta_d).abs() < 1e-10);
        assert!((fit.beta_w - truth.beta_w).abs() < 1e-10);
        assert!((fit.beta_m - truth.beta_m).abs() < 1e-10);
    }

    #[test]
    fn ols_zero_targets_and_singular_design() {
        let mut rng = Rng::new(31);
        let mut data = random_dataset(&mut rng, 60);
        for y in data.targets.iter_mut() {
            *y = 0.0;
        }
        let fit = ols_fit(&data).unwrap();
        for b in [fit.beta0, fit.beta_d, fit.beta_w, fit.beta_m] {
            assert!(b.abs() < 1e-10);
        }

        // constant latent series: z_d, z_w, z_m perfectly collinear
        let constant = vec![2.5; 60];
        let data = build_har_dataset(&[constant], 22..60).unwrap();
        assert!(matches!(ols_fit(&data), Err(Error::Degenerate(_))));
    }

    #[test]
    fn residual_identities() {
        let mut rng = Rng::new(37);
        let data = random_dataset(&mut rng, 300);
        let fit = ols_fit(&data).unwrap();
        let res = residuals(&data, &fit);
        // zero-sum (intercept present) and orthogonal to each feature column
        let sum: f64 = res.iter().sum();
        assert!(sum.abs() < 1e-8, "sum={sum}");
        for c in 0..3 {
            let dot: f64 = res
                .iter()
                .zip(&data.features)
                .map(|(r, f)| r * f[c])
                .sum();
            assert!(dot.abs() < 1e-7, "column {c}: {dot}");
        }
        // beta = 0 makes residuals the targets
        let zero = HarParams::new(0.0, 0.0, 0.0, 0.0);
        let res0 = residuals(&data, &zero);
        assert_eq!(res0, data.targets);
    }

    #[test]
    fn ols_optimality_under_perturbation() {
        let mut rng = Rng::new(41);
        let data = random_dataset(&mut rng, 150);
        let fit = ols_fit(&data).unwrap();
        let sse = |p: &HarParams| -> f64 {
            residuals(&data, p).iter().map(|r| r * r).sum()
        };
        let base = sse(&fit);
        for i in 0..4 {
            for &delta in &[1e-3, -1e-3] {
                let mut v = [fit.beta0, fit.beta_d, fit.beta_w, fit.beta_m];
                v[i] += delta;
                let perturbed = HarParams::new(v[0], v[1], v[2], v[3]);
                assert!(sse(&perturbed) >= base, "perturbing coefficient {i} reduced SSE");
            }
        }
    }

    #[test]
    fn affine_equivariance() {
        let mut rng = Rng::new(43);
        let series: Vec<f64> = (0..120)
            .map(|i| (i as f64 * 0.21).sin() + 0.3 * rng.normal())
            .collect();
        let scaled: Vec<f64> = series.iter().map(|z| 2.0 * z + 1.0).collect();
        let d0 = build_har_dataset(&[series.clone()], 22..120).unwrap();
        let d1 = build_har_dataset(&[scaled], 22..120).unwrap();
        let f0 = ols_fit(&d0).unwrap();
        let f1 = ols_fit(&d1).unwrap();
        for t in 40..120 {
            let p0 = har_predict(&series[..t], &f0).unwrap();
            let hist: Vec<f64> = series[..t].iter().map(|z| 2.0 * z + 1.0).collect();
            let p1 = har_predict(&hist, &f1).unwrap();
            assert!((p1 - (2.0 * p0 + 1.0)).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn pooled_fit_is_order_independent() {
        let mut rng = Rng::new(47);
        let a: Vec<f64> = (0..80).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..80).map(|_| rng.normal() + 0.5).collect();
        let ab = ols_fit(&build_har_dataset(&[a.clone(), b.clone()], 22..80).unwrap()).unwrap();
        let ba = ols_fit(&build_har_dataset(&[b, a], 22..80).unwrap()).unwrap();
        assert!((ab.beta0 - ba.beta0).abs() < 1e-9);
        assert!((ab.beta_d - ba.beta_d).abs() < 1e-9);
        assert!((ab.beta_w - ba.beta_w).abs() < 1e-9);
        assert!((ab.beta_m - ba.beta_m).abs() < 1e-9);
    }
}
