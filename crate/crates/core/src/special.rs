//! Scalar special functions: log-gamma, the standard normal quantile,
//! the regularized incomplete beta function, and the Student-t tail that
//! the t-tests need. All hand-rolled so results are identical across
//! platforms and builds.

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable log(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of `softplus`; requires y > 0. Stable for large y.
pub fn softplus_inv(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    // ln(e^y - 1) = y + ln(1 - e^{-y})
    y + (-(-y).exp_m1()).ln()
}

// Lanczos approximation, g = 7, 9 coefficients. Relative error < 1e-13
// over the positive reals.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0 (reflection for x < 0.5).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta function I_x(a, b), a, b > 0, x in [0, 1].
/// Continued-fraction evaluation (modified Lentz).
pub fn betainc_reg(x: f64, a: f64, b: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "betainc_reg requires a, b > 0");
    assert!((0.0..=1.0).contains(&x), "betainc_reg requires x in [0, 1]");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    // Use the symmetry relation so the continued fraction converges fast.
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - betainc_reg(1.0 - x, b, a);
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp() / a;
    front * beta_cf(x, a, b)
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Upper-tail probability P(T > t) for a Student-t variable with `df`
/// degrees of freedom.
pub fn student_t_upper_tail(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "student_t_upper_tail requires df > 0");
    let x = df / (df + t * t);
    let half = 0.5 * betainc_reg(x, 0.5 * df, 0.5);
    if t >= 0.0 {
        half
    } else {
        1.0 - half
    }
}

// Acklam's rational approximation to the standard normal quantile.
// Relative error < 1.15e-9 over (0, 1).
const INQ_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const INQ_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const INQ_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const INQ_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

/// Standard normal quantile Φ⁻¹(p) for p in (0, 1).
pub fn inv_norm_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "inv_norm_cdf requires p in (0, 1)");
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((INQ_C[0] * q + INQ_C[1]) * q + INQ_C[2]) * q + INQ_C[3]) * q + INQ_C[4]) * q
            + INQ_C[5])
            / ((((INQ_D[0] * q + INQ_D[1]) * q + INQ_D[2]) * q + INQ_D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((INQ_A[0] * r + INQ_A[1]) * r + INQ_A[2]) * r + INQ_A[3]) * r + INQ_A[4]) * r
            + INQ_A[5])
            * q
            / (((((INQ_B[0] * r + INQ_B[1]) * r + INQ_B[2]) * r + INQ_B[3]) * r + INQ_B[4]) * r
                + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((INQ_C[0] * q + INQ_C[1]) * q + INQ_C[2]) * q + INQ_C[3]) * q + INQ_C[4]) * q
            + INQ_C[5])
            / ((((INQ_D[0] * q + INQ_D[1]) * q + INQ_D[2]) * q + INQ_D[3]) * q + 1.0)
    }
}
