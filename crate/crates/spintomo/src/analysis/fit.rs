//! Gaussian decay fitting of SNR curves.

use super::{AnalysisError, SnrCurve};

/// Result of fitting `A exp(-t^2 / (2 T2^2))` to a decay curve.
///
/// The fitted T2 carries the timescale of whatever curve is passed in;
/// for an SNR curve (a power quantity decaying as the squared envelope)
/// it is the squared-envelope timescale, which is how the reference
/// experiment reports it.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DecayFit {
    pub t2_s: f64,
    pub t2_err_s: f64,
    pub amplitude: f64,
    pub residual_norm: f64,
}

fn model(a: f64, t2: f64, t: f64) -> f64 {
    a * (-0.5 * (t / t2).powi(2)).exp()
}

/// Least-squares Gaussian decay fit.
///
/// The initial guess comes from a weighted linear regression of
/// `ln y` on `t^2` (weights `y^2`, positive points only); refinement is
/// Levenberg-Marquardt with an analytic Jacobian. Parameter errors come
/// from the Jacobian covariance at the optimum.
pub fn fit_gaussian_decay(curve: &SnrCurve) -> Result<DecayFit, AnalysisError> {
    let n = curve.snr.len();
    if n < 5 {
        return Err(AnalysisError::TooFewPoints { need: 5, got: n });
    }
    if !curve.snr.iter().any(|v| *v > 0.0) {
        return Err(AnalysisError::NoPositiveData);
    }

    // Weighted log-linear initialization.
    let mut s_w = 0.0;
    let mut s_x = 0.0;
    let mut s_y = 0.0;
    let mut s_xx = 0.0;
    let mut s_xy = 0.0;
    for (t, y) in curve.times.iter().zip(&curve.snr) {
        if *y <= 0.0 {
            continue;
        }
        let w = y * y;
        let x = t * t;
        let ly = y.ln();
        s_w += w;
        s_x += w * x;
        s_y += w * ly;
        s_xx += w * x * x;
        s_xy += w * x * ly;
    }
    let denom = s_w * s_xx - s_x * s_x;
    let t_span = curve.times.last().unwrap() - curve.times[0];
    let (mut a, mut t2) = if denom.abs() > 0.0 {
        let slope = (s_w * s_xy - s_x * s_y) / denom;
        let intercept = (s_y - slope * s_x) / s_w;
        let t2 = if slope < 0.0 {
            (-0.5 / slope).sqrt()
        } else {
            0.5 * t_span.max(curve.times[n - 1].abs())
        };
        (intercept.exp(), t2)
    } else {
        (
            curve.snr.iter().cloned().fold(f64::MIN, f64::max),
            0.5 * t_span,
        )
    };
    if !t2.is_finite() || t2 <= 0.0 {
        t2 = 0.5 * t_span.max(1e-12);
    }

    let sse = |a: f64, t2: f64| -> f64 {
        curve
            .times
            .iter()
            .zip(&curve.snr)
            .map(|(t, y)| (y - model(a, t2, *t)).powi(2))
            .sum()
    };

    // Levenberg-Marquardt on (A, T2).
    let mut lambda = 1e-3;
    let mut current = sse(a, t2);
    let mut converged = false;
    for _ in 0..200 {
        // Normal equations J^T J + lambda diag, J^T r.
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for (t, y) in curve.times.iter().zip(&curve.snr) {
            let e = (-0.5 * (t / t2).powi(2)).exp();
            let f = a * e;
            let r = y - f;
            let ja = e;
            let jt2 = a * e * t * t / (t2 * t2 * t2);
            jtj[0][0] += ja * ja;
            jtj[0][1] += ja * jt2;
            jtj[1][1] += jt2 * jt2;
            jtr[0] += ja * r;
            jtr[1] += jt2 * r;
        }
        jtj[1][0] = jtj[0][1];

        let mut improved = false;
        for _ in 0..20 {
            let m00 = jtj[0][0] * (1.0 + lambda);
            let m11 = jtj[1][1] * (1.0 + lambda);
            let det = m00 * m11 - jtj[0][1] * jtj[1][0];
            if det.abs() < 1e-300 {
                break;
            }
            let da = (jtr[0] * m11 - jtj[0][1] * jtr[1]) / det;
            let dt2 = (m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
            let a_new = a + da;
            let t2_new = t2 + dt2;
            if t2_new > 0.0 {
                let next = sse(a_new, t2_new);
                if next < current {
                    let rel = (current - next) / current.max(f64::MIN_POSITIVE);
                    a = a_new;
                    t2 = t2_new;
                    current = next;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    if rel < 1e-14 {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if converged || !improved {
            break;
        }
    }
    if !t2.is_finite() || !a.is_finite() {
        return Err(AnalysisError::FitDiverged);
    }

    // Covariance-based parameter errors at the optimum.
    let mut jtj = [[0.0; 2]; 2];
    for t in &curve.times {
        let e = (-0.5 * (t / t2).powi(2)).exp();
        let ja = e;
        let jt2 = a * e * t * t / (t2 * t2 * t2);
        jtj[0][0] += ja * ja;
        jtj[0][1] += ja * jt2;
        jtj[1][1] += jt2 * jt2;
    }
    jtj[1][0] = jtj[0][1];
    let dof = (n as f64 - 2.0).max(1.0);
    let s2 = current / dof;
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let t2_err = if det > 0.0 {
        (s2 * jtj[0][0] / det).sqrt()
    } else {
        f64::INFINITY
    };

    Ok(DecayFit {
        t2_s: t2,
        t2_err_s: t2_err,
        amplitude: a,
        residual_norm: current.sqrt(),
    })
}
