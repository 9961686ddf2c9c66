//! Yeo-Johnson power transformation. Both half-line branches are computed
//! through expm1/ln1p so the λ → 0 and λ → 2 log limits are reached
//! smoothly; within 1e-7 of those parameters the exact log branches are
//! used outright.

use serde::{Deserialize, Serialize};

use super::PointGrad;
use crate::error::{Error, Result};

const LOG_BRANCH_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YeoJohnsonParams {
    pub lambda: f64,
}

/// (e^{p·u} − 1)/p, the power-transform kernel; exact limit u at p = 0.
fn power_kernel(u: f64, p: f64) -> f64 {
    if p.abs() < LOG_BRANCH_EPS {
        u
    } else {
        (p * u).exp_m1() / p
    }
}

/// ∂/∂p of `power_kernel`, with the p → 0 series.
fn power_kernel_dp(u: f64, p: f64) -> f64 {
    if p.abs() < 1e-5 {
        let u2 = u * u;
        u2 * (0.5 + p * u / 3.0 + p * p * u2 / 8.0)
    } else {
        let e = (p * u).exp();
        (p * u * e - (p * u).exp_m1()) / (p * p)
    }
}

impl YeoJohnsonParams {
    pub fn forward(&self, x: f64) -> f64 {
        let l = self.lambda;
        if x >= 0.0 {
            power_kernel(x.ln_1p(), l)
        } else {
            -power_kernel((-x).ln_1p(), 2.0 - l)
        }
    }

    /// Branch-by-branch analytical inversion. `z` must lie in the image of
    /// the forward map for this λ.
    pub fn inverse(&self, z: f64) -> Result<f64> {
        let l = self.lambda;
        if z >= 0.0 {
            if l.abs() < LOG_BRANCH_EPS {
                return Ok(z.exp_m1());
            }
            let arg = l * z;
            if arg <= -1.0 {
                return Err(Error::Domain(format!(
                    "z = {z} outside the positive-branch range: requires lambda*z + 1 > 0 \
                     (lambda = {l}, bound z < {})",
                    -1.0 / l
                )));
            }
            Ok((arg.ln_1p() / l).exp_m1())
        } else {
            let m = 2.0 - l;
            if m.abs() < LOG_BRANCH_EPS {
                return Ok(-(-z).exp_m1());
            }
            let arg = -m * z;
            if arg <= -1.0 {
                return Err(Error::Domain(format!(
                    "z = {z} outside the negative-branch range: requires 1 - (2-lambda)*z > 0 \
                     (lambda = {l}, bound z > {})",
                    1.0 / m
                )));
            }
            Ok(-(arg.ln_1p() / m).exp_m1())
        }
    }

    /// log f'(x) = (λ−1)·ln(1+x) for x ≥ 0, (1−λ)·ln(1−x) for x < 0.
    pub fn log_abs_deriv(&self, x: f64) -> f64 {
        if x >= 0.0 {
            (self.lambda - 1.0) * x.ln_1p()
        } else {
            (1.0 - self.lambda) * (-x).ln_1p()
        }
    }

    pub fn point_grad(&self, x: f64) -> PointGrad {
        let l = self.lambda;
        let (z, d_z, d_ld) = if x >= 0.0 {
            let u = x.ln_1p();
            (power_kernel(u, l), power_kernel_dp(u, l), u)
        } else {
            let w = (-x).ln_1p();
            // f = −K(w, 2−λ); ∂f/∂λ = +∂K/∂p (w, 2−λ)
            (-power_kernel(w, 2.0 - l), power_kernel_dp(w, 2.0 - l), -w)
        };
        PointGrad {
            z,
            log_deriv: self.log_abs_deriv(x),
            d_z: vec![d_z],
            d_log_deriv: vec![d_ld],
        }
    }
}
