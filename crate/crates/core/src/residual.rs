//! Residual densities for the one-step prediction errors: zero-mean
//! Gaussian by default, generalized Student-t (parameterized by variance
//! and degrees of freedom) as the fat-tailed alternative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Residual variance never drops below this; perfect fits on degenerate
/// synthetic data would otherwise produce infinite log-likelihoods.
pub const VARIANCE_FLOOR: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    Gaussian,
    StudentT,
}

impl std::fmt::Display for ResidualKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResidualKind::Gaussian => write!(f, "gaussian"),
            ResidualKind::StudentT => write!(f, "student_t"),
        }
    }
}

/// Fitted residual density; the mean is fixed at zero and one (variance,
/// df) pair covers the whole fit window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualModel {
    pub kind: ResidualKind,
    pub variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
}

impl ResidualModel {
    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::Domain("gaussian variance must be positive".into()));
        }
        Ok(ResidualModel { kind: ResidualKind::Gaussian, variance, df: None })
    }

    pub fn student_t(variance: f64, df: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::Domain("student-t variance must be positive".into()));
        }
        if !(df > 2.0) {
            return Err(Error::Domain(format!(
                "student-t needs df > 2 for a finite variance, got {df}"
            )));
        }
        Ok(ResidualModel { kind: ResidualKind::StudentT, variance, df: Some(df) })
    }

    /// Fit the density of `eps` under this family: empirical variance with
    /// zero mean, plus a df search for the Student-t case.
    pub fn fit(kind: ResidualKind, eps: &[f64]) -> Result<Self> {
        let variance = estimate_residual_variance(eps)?.max(VARIANCE_FLOOR);
        match kind {
            ResidualKind::Gaussian => ResidualModel::gaussian(variance),
            ResidualKind::StudentT => {
                let df = fit_student_df(eps, variance)?;
                ResidualModel::student_t(variance, df)
            }
        }
    }

    pub fn logpdf(&self, eps: f64) -> f64 {
        match self.kind {
            ResidualKind::Gaussian => {
                -0.5 * (LN_2PI + self.variance.ln()) - eps * eps / (2.0 * self.variance)
            }
            ResidualKind::StudentT => {
                let d = self.df.expect("student-t model carries df");
                student_t_logpdf_unchecked(eps, self.variance, d)
            }
        }
    }

    /// ∂ logpdf/∂eps, used by the frozen-(β, v) gradient step.
    pub fn dlogpdf_deps(&self, eps: f64) -> f64 {
        match self.kind {
            ResidualKind::Gaussian => -eps / self.variance,
            ResidualKind::StudentT => {
                let d = self.df.expect("student-t model carries df");
                -(d + 1.0) * eps / ((d - 2.0) * self.variance + eps * eps)
            }
        }
    }
}

/// Zero-mean Gaussian log-density.
pub fn gaussian_logpdf(eps: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::Domain(format!(
            "gaussian variance must be positive, got {variance}"
        )));
    }
    Ok(-0.5 * (LN_2PI + variance.ln()) - eps * eps / (2.0 * variance))
}

/// Zero-mean generalized Student-t log-density with variance `variance`
/// and `df` degrees of freedom (df > 2).
pub fn student_t_logpdf(eps: f64, variance: f64, df: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::Domain(format!(
            "student-t variance must be positive, got {variance}"
        )));
    }
    if !(df > 2.0) {
        return Err(Error::Domain(format!("student-t df must exceed 2, got {df}")));
    }
    Ok(student_t_logpdf_unchecked(eps, variance, df))
}

fn student_t_logpdf_unchecked(eps: f64, v: f64, d: f64) -> f64 {
    ln_gamma(0.5 * (d + 1.0))
        - 0.5 * (std::f64::consts::PI * (d - 2.0) * v).ln()
        - ln_gamma(0.5 * d)
        - 0.5 * (d + 1.0) * (eps * eps / ((d - 2.0) * v)).ln_1p()
}

/// Empirical variance with the mean pinned at zero: Σε² / (n − 1).
pub fn estimate_residual_variance(eps: &[f64]) -> Result<f64> {
    if eps.len() < 2 {
        return Err(Error::Degenerate(
            "residual variance needs at least 2 residuals".into(),
        ));
    }
    let ss: f64 = eps.iter().map(|e| e * e).sum();
    Ok(ss / (eps.len() - 1) as f64)
}

/// Maximize the summed Student-t log-density over df by golden-section
/// search on log-df in [ln 2.1, ln 1e6]. The bracket endpoints are valid
/// answers for boundary-optimal data (Gaussian-like residuals push the
/// optimum to the upper end).
pub fn fit_student_df(eps: &[f64], variance: f64) -> Result<f64> {
    if eps.len() < 3 {
        return Err(Error::Degenerate("df fit needs at least 3 residuals".into()));
    }
    if !(variance > 0.0) {
        return Err(Error::Domain("df fit needs positive variance".into()));
    }
    let objective = |log_df: f64| -> f64 {
        let d = log_df.exp();
        eps.iter().map(|&e| student_t_logpdf_unchecked(e, variance, d)).sum()
    };
    let (mut lo, mut hi) = (2.1f64.ln(), 1e6f64.ln());
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1);
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn gaussian_logpdf_known_values() {
        let tau = 2.0 * std::f64::consts::PI;
        let expect0 = -0.5 * tau.ln();
        assert!((gaussian_logpdf(0.0, 1.0).unwrap() - expect0).abs() < 1e-12);
        assert!((expect0 + 0.918_938_533_2).abs() < 1e-9);
        assert!((gaussian_logpdf(1.0, 1.0).unwrap() - (expect0 - 0.5)).abs() < 1e-12);
        let expect = -0.5 * (8.0 * std::f64::consts::PI).ln() - 0.5;
        assert!((gaussian_logpdf(2.0, 4.0).unwrap() - expect).abs() < 1e-12);
        assert!(gaussian_logpdf(0.0, 0.0).is_err());
        assert!(gaussian_logpdf(0.0, -1.0).is_err());
    }

    #[test]
    fn student_t_logpdf_exact_gamma_values() {
        // eps=0, v=1, d=3: log(Γ(2) / (sqrt(π)·Γ(1.5))) = log(2/π)
        let got = student_t_logpdf(0.0, 1.0, 3.0).unwrap();
        let expect = (2.0 / std::f64::consts::PI).ln();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
        assert!((expect + 0.451_582_705_3).abs() < 1e-9);
        assert!(student_t_logpdf(0.0, 1.0, 2.0).is_err());
        assert!(student_t_logpdf(0.0, 0.0, 5.0).is_err());
    }

    #[test]
    fn student_t_approaches_gaussian_at_huge_df() {
        for &eps in &[0.0, 1.0, 2.0] {
            let t = student_t_logpdf(eps, 1.0, 1e6).unwrap();
            let g = gaussian_logpdf(eps, 1.0).unwrap();
            assert!((t - g).abs() < 1e-3, "eps={eps}: {t} vs {g}");
        }
    }

    #[test]
    fn student_t_density_integrates_to_one() {
        // Simpson over [-100, 100]; the d=5 tail beyond is ~1e-10.
        let (v, d) = (1.0, 5.0);
        let f = |x: f64| student_t_logpdf_unchecked(x, v, d).exp();
        let (a, b, n) = (-100.0, 100.0, 200_000);
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        let integral = s * h / 3.0;
        assert!((integral - 1.0).abs() < 1e-6, "integral={integral}");
    }

    #[test]
    fn variance_estimator_known_values() {
        assert_eq!(estimate_residual_variance(&[1.0, -1.0]).unwrap(), 2.0);
        let c = 0.7;
        let got = estimate_residual_variance(&[c, c, c, c]).unwrap();
        assert!((got - 4.0 * c * c / 3.0).abs() < 1e-15);
        // all zeros: estimator returns 0, the model fit floors it
        assert_eq!(estimate_residual_variance(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let m = ResidualModel::fit(ResidualKind::Gaussian, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.variance, VARIANCE_FLOOR);
        assert!(estimate_residual_variance(&[1.0]).is_err());
    }

    #[test]
    fn df_fit_pushes_to_bracket_top_on_gaussian_data() {
        let mut rng = Rng::new(51);
        let eps: Vec<f64> = (0..10_000).map(|_| rng.normal()).collect();
        let v = estimate_residual_variance(&eps).unwrap();
        let df = fit_student_df(&eps, v).unwrap();
        assert!(df >= 100.0, "df={df}");
    }

    #[test]
    fn df_fit_recovers_t5_data() {
        // standard t_5 = Z / sqrt(chi2_5 / 5)
        let mut rng = Rng::new(53);
        let eps: Vec<f64> = (0..10_000)
            .map(|_| {
                let z = rng.normal();
                let chi2: f64 = (0..5).map(|_| rng.normal()).map(|g| g * g).sum();
                z / (chi2 / 5.0).sqrt()
            })
            .collect();
        let v = estimate_residual_variance(&eps).unwrap();
        let df = fit_student_df(&eps, v).unwrap();
        assert!((3.5..=7.0).contains(&df), "df={df}");
    }

    #[test]
    fn df_fit_handles_two_valued_degenerate_input() {
        let eps = [0.5, -0.5, 0.5, -0.5];
        let v = estimate_residual_variance(&eps).unwrap();
        let df = fit_student_df(&eps, v).unwrap();
        assert!(df.is_finite() && df > 2.0);
    }

    #[test]
    fn dlogpdf_matches_finite_differences() {
        let g = ResidualModel::gaussian(0.8).unwrap();
        let t = ResidualModel::student_t(0.8, 4.5).unwrap();
        for m in [g, t] {
            for &eps in &[-2.0, -0.3, 0.0, 1.1, 3.0] {
                let h = 1e-6;
                let fd = (m.logpdf(eps + h) - m.logpdf(eps - h)) / (2.0 * h);
                let got = m.dlogpdf_deps(eps);
                assert!((got - fd).abs() < 1e-6, "{m:?} eps={eps}: {got} vs {fd}");
            }
        }
    }
}
