//! Wallace's normal/Student-t transformation, extended to an odd monotone
//! bijection of the real line. The sign ambiguity in the classical formula
//! is resolved as sign(x), which is the only choice giving a monotone map
//! with f(0) = 0. The shape parameter is kept positive through a softplus
//! reparameterization.

use serde::{Deserialize, Serialize};

use super::PointGrad;
use crate::special::{sigmoid, softplus, softplus_inv};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallaceParams {
    /// Unconstrained parameter; the effective degrees of freedom are
    /// d = softplus(raw_d) > 0.
    pub raw_d: f64,
}

impl WallaceParams {
    pub fn from_d(d: f64) -> Self {
        assert!(d > 0.0, "wallace d must be positive");
        WallaceParams { raw_d: softplus_inv(d) }
    }

    pub fn d(&self) -> f64 {
        softplus(self.raw_d)
    }

    fn scale(d: f64) -> f64 {
        (8.0 * d + 1.0) / (8.0 * d + 3.0)
    }

    /// sign(x) · (8d+1)/(8d+3) · sqrt(d · ln(1 + x²/d))
    pub fn forward(&self, x: f64) -> f64 {
        let d = self.d();
        if x == 0.0 {
            return 0.0;
        }
        x.signum() * Self::scale(d) * (d * (x * x / d).ln_1p()).sqrt()
    }

    /// Exact inversion: x = sign(z) · sqrt(d · (e^{(z/c)²/d} − 1)).
    pub fn inverse(&self, z: f64) -> f64 {
        let d = self.d();
        if z == 0.0 {
            return 0.0;
        }
        let w = z / Self::scale(d);
        z.signum() * (d * (w * w / d).exp_m1()).sqrt()
    }

    /// log f'(x) = ln c − ln(1+y) − ½·ln(ln(1+y)/y) with y = x²/d.
    /// The ratio ln(1+y)/y is evaluated by series for tiny y.
    pub fn log_abs_deriv(&self, x: f64) -> f64 {
        let d = self.d();
        let y = x * x / d;
        Self::scale(d).ln() - y.ln_1p() - 0.5 * ln1p_over(y).ln()
    }

    pub fn point_grad(&self, x: f64) -> PointGrad {
        let d = self.d();
        let chain = sigmoid(self.raw_d); // d(softplus)/d(raw_d)
        let c = Self::scale(d);
        // c' = 16 / (8d+3)²
        let dc = 16.0 / ((8.0 * d + 3.0) * (8.0 * d + 3.0));

        let z = self.forward(x);
        let log_deriv = self.log_abs_deriv(x);

        let y = x * x / d;
        let df_dd = if x == 0.0 {
            0.0
        } else {
            let l = y.ln_1p();
            let s = (d * l).sqrt();
            // ∂f/∂d = sign(x)·[ c'·s + c·(L − y/(1+y)) / (2s) ]
            let num = if y < 1e-7 {
                // L − y/(1+y) = y²/2 − 2y³/3 + ...
                y * y * (0.5 - 2.0 * y / 3.0)
            } else {
                l - y / (1.0 + y)
            };
            x.signum() * (dc * s + c * num / (2.0 * s))
        };

        // ∂ log f'/∂d = c'/c − y_d/(1+y) − ½·(R'/R)·y_d, with y_d = −y/d
        // and R(y) = ln(1+y)/y.
        let y_d = -y / d;
        let r = ln1p_over(y);
        let r_prime = if y < 1e-4 {
            -0.5 + 2.0 * y / 3.0 - 0.75 * y * y
        } else {
            (y / (1.0 + y) - y.ln_1p()) / (y * y)
        };
        let dld_dd = dc / c - y_d / (1.0 + y) - 0.5 * (r_prime / r) * y_d;

        PointGrad {
            z,
            log_deriv,
            d_z: vec![df_dd * chain],
            d_log_deriv: vec![dld_dd * chain],
        }
    }
}

/// ln(1+y)/y with the y → 0 limit handled by series.
fn ln1p_over(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        1.0 - y / 2.0 + y * y / 3.0 - y * y * y / 4.0
    } else {
        y.ln_1p() / y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values_and_oddness() {
        let p = WallaceParams::from_d(1.0);
        assert_eq!(p.forward(0.0), 0.0);
        // direct evaluation: (9/11)·sqrt(ln 2)
        let expected = (9.0 / 11.0) * 2.0f64.ln().sqrt();
        assert!((p.forward(1.0) - expected).abs() < 1e-12);
        assert!((expected - 0.681_181_045_5).abs() < 1e-9);
        assert_eq!(p.forward(-1.0), -p.forward(1.0));

        let mut rng = crate::rng::Rng::new(4);
        for _ in 0..200 {
            let x = rng.normal() * 3.0;
            assert_eq!(p.forward(-x), -p.forward(x));
        }
    }

    #[test]
    fn inverse_is_exact() {
        for &d in &[0.5, 1.0, 5.0] {
            let p = WallaceParams::from_d(d);
            for i in 0..101 {
                let x = -5.0 + 0.1 * i as f64;
                let z = p.forward(x);
                assert!((p.inverse(z) - x).abs() < 1e-10, "d={d}, x={x}");
            }
        }
    }

    #[test]
    fn log_deriv_matches_finite_difference() {
        for &d in &[0.5, 1.0, 5.0] {
            let p = WallaceParams::from_d(d);
            for i in 0..41 {
                let x = -4.0 + 0.2 * i as f64;
                let h = 1e-5;
                let fd = ((p.forward(x + h) - p.forward(x - h)) / (2.0 * h)).ln();
                let got = p.log_abs_deriv(x);
                assert!(
                    (got - fd).abs() < 1e-4 * fd.abs().max(1.0),
                    "d={d}, x={x}: {got} vs {fd}"
                );
            }
        }
        // the x = 0 limit is ln c, finite
        let p = WallaceParams::from_d(1.0);
        assert!((p.log_abs_deriv(0.0) - (9.0f64 / 11.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn param_grad_matches_finite_difference() {
        for &raw_d in &[-0.5, 0.3, 1.7] {
            let p = WallaceParams { raw_d };
            for &x in &[-2.5, -0.9, 0.0, 0.4, 1.0, 3.3] {
                let g = p.point_grad(x);
                let h = 1e-6;
                let up = WallaceParams { raw_d: raw_d + h };
                let dn = WallaceParams { raw_d: raw_d - h };
                let fd_z = (up.forward(x) - dn.forward(x)) / (2.0 * h);
                let fd_ld = (up.log_abs_deriv(x) - dn.log_abs_deriv(x)) / (2.0 * h);
                assert!(
                    (g.d_z[0] - fd_z).abs() < 1e-6 * fd_z.abs().max(1.0),
                    "raw_d={raw_d}, x={x}: {} vs {fd_z}",
                    g.d_z[0]
                );
                assert!(
                    (g.d_log_deriv[0] - fd_ld).abs() < 1e-6 * fd_ld.abs().max(1.0),
                    "raw_d={raw_d}, x={x}: {} vs {fd_ld}",
                    g.d_log_deriv[0]
                );
            }
        }
    }

    #[test]
    fn large_d_approaches_identity() {
        let p = WallaceParams::from_d(1e6);
        for &x in &[-3.0, -1.0, 0.5, 2.0] {
            assert!((p.forward(x) - x).abs() < 1e-3, "x={x}: {}", p.forward(x));
        }
    }
}
