//! Corrected resampled t-test and the Student-t tail it needs.

use serde::{Deserialize, Serialize};

use super::EvalError;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
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
    for m in 1..10_000 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
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

/// Regularized incomplete beta `I_x(a, b)`, given `x` and `y = 1 - x`
/// separately so callers can pass an accurately computed complement.
fn beta_inc_xy(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, y) / b
    }
}

pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    beta_inc_xy(a, b, x, 1.0 - x)
}

/// `P(T > t)` for Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    let t2 = t * t;
    let x = df / (df + t2);
    let y = t2 / (df + t2);
    let tail = 0.5 * beta_inc_xy(df / 2.0, 0.5, x, y);
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_stat: f64,
    pub df: u32,
    pub p_one_tailed: f64,
    pub significant_at_05: bool,
    pub rho: f64,
    pub mean_diff: f64,
    /// All differences identical, so the variance is zero.
    pub degenerate: bool,
}

/// One-tailed test that the mean per-fold difference is positive, with the
/// variance inflated by `1/k + rho` for overlapping training sets.
pub fn nb_ttest(diffs: &[f64], rho: f64) -> Result<TTestResult, EvalError> {
    let k = diffs.len();
    if k < 2 {
        return Err(EvalError::InvalidInput(format!("need at least 2 folds, got {k}")));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(EvalError::InvalidInput(format!("rho {rho} must be finite and >= 0")));
    }
    if let Some(d) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(EvalError::InvalidInput(format!("non-finite difference {d}")));
    }
    let kf = k as f64;
    let mean = diffs.iter().sum::<f64>() / kf;
    let df = (k - 1) as u32;
    let result = |t_stat: f64, p: f64, degenerate: bool| TTestResult {
        t_stat,
        df,
        p_one_tailed: p,
        significant_at_05: p < 0.05,
        rho,
        mean_diff: mean,
        degenerate,
    };
    if diffs.iter().all(|d| *d == diffs[0]) {
        return Ok(if mean > 0.0 {
            result(f64::INFINITY, 0.0, true)
        } else if mean < 0.0 {
            result(f64::NEG_INFINITY, 1.0, true)
        } else {
            result(0.0, 1.0, true)
        });
    }
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (kf - 1.0);
    let t = mean / ((1.0 / kf + rho) * var).sqrt();
    Ok(result(t, student_t_sf(t, f64::from(df)), false))
}
