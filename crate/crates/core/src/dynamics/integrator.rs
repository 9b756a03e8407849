//! Dormand–Prince 5(4) with a standard step-size controller.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{KpoError, Result};
use crate::linalg::ZERO;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step the controller may take before giving up (µs).
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, min_step: 1e-9, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

/// One accepted step with both endpoint derivatives, enough for Hermite
/// interpolation inside `[t0, t1]`.
pub struct Step<'a> {
    pub t0: f64,
    pub t1: f64,
    pub y0: &'a [C64],
    pub f0: &'a [C64],
    pub y1: &'a [C64],
    pub f1: &'a [C64],
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn scaled_norm(v: &[C64], y: &[C64], tol: &Tolerances) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(e, y)| {
            let sc = tol.atol + tol.rtol * y.norm();
            (e.norm() / sc).powi(2)
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

/// Integrate `y' = f(t, y)` from `t0` to `t_end`. Steps are shortened so that
/// every time in `stops` (sorted, inside the interval) is hit exactly.
pub fn dopri5<F, O>(
    mut f: F,
    t0: f64,
    y0: &[C64],
    t_end: f64,
    tol: &Tolerances,
    stops: &[f64],
    mut observer: O,
) -> Result<(Vec<C64>, IntegrationStats)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(&Step<'_>),
{
    let n = y0.len();
    let mut stats = IntegrationStats::default();
    let mut y = y0.to_vec();
    if t_end <= t0 || n == 0 {
        return Ok((y, stats));
    }
    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut k3 = vec![ZERO; n];
    let mut k4 = vec![ZERO; n];
    let mut k5 = vec![ZERO; n];
    let mut k6 = vec![ZERO; n];
    let mut k7 = vec![ZERO; n];
    let mut tmp = vec![ZERO; n];
    let mut ynew = vec![ZERO; n];
    let mut err = vec![ZERO; n];

    f(t0, &y, &mut k1);
    stats.rhs_evaluations += 1;

    // initial step guess
    let d0 = scaled_norm(&y, &y, tol);
    let d1 = scaled_norm(&k1, &y, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(t_end - t0);
    for i in 0..n {
        tmp[i] = y[i] + k1[i] * h0;
    }
    f(t0 + h0, &tmp, &mut k2);
    stats.rhs_evaluations += 1;
    for i in 0..n {
        err[i] = (k2[i] - k1[i]) / h0;
    }
    let d2 = scaled_norm(&err, &y, tol);
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    let mut h = (100.0 * h0).min(h1).min(t_end - t0);

    let mut t = t0;
    let mut stop_idx = stops.iter().position(|&s| s > t0).unwrap_or(stops.len());
    let span = t_end - t0;
    while t < t_end {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(KpoError::StepSizeUnderflow { t, dt: h });
        }
        let mut target = t_end;
        while stop_idx < stops.len() && stops[stop_idx] <= t {
            stop_idx += 1;
        }
        if stop_idx < stops.len() && stops[stop_idx] < t_end {
            target = stops[stop_idx];
        }
        let mut hit = false;
        if t + h >= target - 1e-12 * span {
            h = target - t;
            hit = true;
        }
        if h < tol.min_step && !hit {
            return Err(KpoError::StepSizeUnderflow { t, dt: h });
        }

        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A21) * h;
        }
        f(t + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        f(t + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        f(t + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        f(t + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        f(t + h, &tmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        let tnew = if hit { target } else { t + h };
        f(tnew, &ynew, &mut k7);
        stats.rhs_evaluations += 6;

        for i in 0..n {
            err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        let e = err
            .iter()
            .zip(y.iter().zip(&ynew))
            .map(|(e, (a, b))| {
                let sc = tol.atol + tol.rtol * a.norm().max(b.norm());
                (e.norm() / sc).powi(2)
            })
            .sum::<f64>();
        let e = (e / n as f64).sqrt();

        if e <= 1.0 {
            observer(&Step { t0: t, t1: tnew, y0: &y, f0: &k1, y1: &ynew, f1: &k7 });
            stats.accepted += 1;
            t = tnew;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
            if h < tol.min_step {
                return Err(KpoError::StepSizeUnderflow { t, dt: h });
            }
        }
    }
    Ok((y, stats))
}

/// Cubic Hermite interpolation of a scalar on `[t0, t1]`.
pub fn hermite(t0: f64, t1: f64, y0: f64, f0: f64, y1: f64, f1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return y1;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
}
