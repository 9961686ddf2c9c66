//! Single-hidden-layer tanh mixture f(x) = Σ uᵢ·tanh(vᵢx + bᵢ) with the
//! weights uᵢ, vᵢ kept positive through softplus, which guarantees strict
//! monotonicity and hence invertibility on the open range (−Σuᵢ, Σuᵢ).

use serde::{Deserialize, Serialize};

use super::PointGrad;
use crate::error::{Error, Result};
use crate::special::{sigmoid, softplus, softplus_inv};

/// Root refinement targets |f(x) − z| below this.
const INVERSE_TOL: f64 = 1e-10;
/// Bracket-doubling cap; saturated inputs beyond this are range errors.
const BRACKET_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanhMixParams {
    pub k: usize,
    pub raw_u: Vec<f64>,
    pub raw_v: Vec<f64>,
    pub b: Vec<f64>,
}

impl TanhMixParams {
    pub fn new(raw_u: Vec<f64>, raw_v: Vec<f64>, b: Vec<f64>) -> Self {
        assert_eq!(raw_u.len(), raw_v.len());
        assert_eq!(raw_u.len(), b.len());
        TanhMixParams { k: raw_u.len(), raw_u, raw_v, b }
    }

    /// Build from effective (positive) weights, inverting the softplus.
    pub fn from_effective(u: &[f64], v: &[f64], b: &[f64]) -> Self {
        Self::new(
            u.iter().map(|&x| softplus_inv(x)).collect(),
            v.iter().map(|&x| softplus_inv(x)).collect(),
            b.to_vec(),
        )
    }

    /// Near-linear start for co-training: slope ≈ 1 over the working range
    /// with evenly spread unit centers.
    pub fn near_linear_init(k: usize) -> Self {
        assert!(k >= 1);
        let u = vec![2.0 / k as f64; k];
        let v = vec![0.5; k];
        let b: Vec<f64> = if k == 1 {
            vec![0.0]
        } else {
            (0..k).map(|i| -1.5 + 3.0 * i as f64 / (k - 1) as f64).collect()
        };
        Self::from_effective(&u, &v, &b)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Input("tanh_mix needs at least one unit".into()));
        }
        if self.raw_u.len() != self.k || self.raw_v.len() != self.k || self.b.len() != self.k {
            return Err(Error::Input(format!(
                "tanh_mix parameter arrays must all have length k = {}",
                self.k
            )));
        }
        if self
            .raw_u
            .iter()
            .chain(&self.raw_v)
            .chain(&self.b)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Input("tanh_mix parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn effective_u(&self) -> Vec<f64> {
        self.raw_u.iter().map(|&r| softplus(r)).collect()
    }

    pub fn effective_v(&self) -> Vec<f64> {
        self.raw_v.iter().map(|&r| softplus(r)).collect()
    }

    /// Open saturation bound Σ uᵢ.
    pub fn weight_sum(&self) -> f64 {
        self.raw_u.iter().map(|&r| softplus(r)).sum()
    }

    pub fn forward(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.k {
            let u = softplus(self.raw_u[i]);
            let v = softplus(self.raw_v[i]);
            acc += u * (v * x + self.b[i]).tanh();
        }
        acc
    }

    /// Derivative Σ uᵢvᵢ·sech²(vᵢx + bᵢ) > 0.
    pub fn deriv(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.k {
            let u = softplus(self.raw_u[i]);
            let v = softplus(self.raw_v[i]);
            let t = (v * x + self.b[i]).tanh();
            acc += u * v * (1.0 - t * t);
        }
        acc
    }

    pub fn log_abs_deriv(&self, x: f64) -> f64 {
        self.deriv(x).ln()
    }

    /// Bracketing bisection refined with Newton steps.
    pub fn inverse(&self, z: f64) -> Result<f64> {
        let bound = self.weight_sum();
        if !(z > -bound && z < bound) {
            return Err(Error::Domain(format!(
                "z = {z} outside the attainable open interval ({}, {})",
                -bound, bound
            )));
        }
        // expand [-B, B] until the root is enclosed
        let mut b = 1.0;
        while !(self.forward(-b) < z && z < self.forward(b)) {
            b *= 2.0;
            if b > BRACKET_CAP {
                return Err(Error::Domain(format!(
                    "z = {z} too close to the saturation bounds ({}, {}): \
                     no root within |x| <= {BRACKET_CAP:e}",
                    -bound, bound
                )));
            }
        }
        let (mut lo, mut hi) = (-b, b);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.forward(mid) < z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..8 {
            let err = self.forward(x) - z;
            if err.abs() < INVERSE_TOL {
                break;
            }
            let step = err / self.deriv(x);
            let next = x - step;
            // keep Newton inside the bracket
            x = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        }
        Ok(x)
    }

    /// Raw parameter vector [raw_u | raw_v | b].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.k);
        out.extend_from_slice(&self.raw_u);
        out.extend_from_slice(&self.raw_v);
        out.extend_from_slice(&self.b);
        out
    }

    pub fn from_vec(k: usize, p: &[f64]) -> Self {
        assert_eq!(p.len(), 3 * k);
        TanhMixParams {
            k,
            raw_u: p[..k].to_vec(),
            raw_v: p[k..2 * k].to_vec(),
            b: p[2 * k..].to_vec(),
        }
    }

    pub fn point_grad(&self, x: f64) -> PointGrad {
        let k = self.k;
        let mut d_z = vec![0.0; 3 * k];
        let mut d_big_d = vec![0.0; 3 * k];
        let mut z = 0.0;
        let mut big_d = 0.0; // f'(x)
        for i in 0..k {
            let u = softplus(self.raw_u[i]);
            let v = softplus(self.raw_v[i]);
            let su = sigmoid(self.raw_u[i]);
            let sv = sigmoid(self.raw_v[i]);
            let a = v * x + self.b[i];
            let t = a.tanh();
            let sech2 = 1.0 - t * t;
            z += u * t;
            big_d += u * v * sech2;

            d_z[i] = t * su;
            d_z[k + i] = u * x * sech2 * sv;
            d_z[2 * k + i] = u * sech2;

            d_big_d[i] = v * sech2 * su;
            d_big_d[k + i] = u * sech2 * (1.0 - 2.0 * v * x * t) * sv;
            d_big_d[2 * k + i] = -2.0 * u * v * t * sech2;
        }
        let d_log_deriv = d_big_d.iter().map(|g| g / big_d).collect();
        PointGrad { z, log_deriv: big_d.ln(), d_z, d_log_deriv }
    }
}
