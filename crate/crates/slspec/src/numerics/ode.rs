//! Dormand-Prince 5(4) with PI step control. Works in either direction.

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let ch = c * h;
        for i in 0..N {
            out[i] += ch * k[i];
        }
    }
    out
}

/// Integrates `y' = f(x, y)` from `x0` to `x1`. Returns the state at `x1`.
pub fn integrate<const N: usize, F>(
    f: F,
    x0: f64,
    x1: f64,
    y0: [f64; N],
    tol: Tolerance,
    max_steps: usize,
) -> Result<([f64; N], OdeStats), String>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let span = x1 - x0;
    let mut stats = OdeStats {
        accepted: 0,
        rejected: 0,
    };
    if span == 0.0 {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, &y);
    let scale0: f64 = (0..N)
        .map(|i| {
            let sc = tol.atol + tol.rtol * y[i].abs();
            (k1[i] / sc).powi(2)
        })
        .sum::<f64>()
        / N as f64;
    let mut h = if scale0 > 0.0 {
        (0.01 / scale0.sqrt()).min(span.abs())
    } else {
        span.abs() * 1e-3
    };
    h = h.max(span.abs() * 1e-12);
    let mut err_prev: f64 = 1e-4;
    let min_step = span.abs() * 1e-15;

    while (x1 - x) * dir > 0.0 {
        if stats.accepted + stats.rejected > max_steps {
            return Err(format!(
                "step budget {} exhausted at x = {} (target {})",
                max_steps, x, x1
            ));
        }
        let remaining = (x1 - x).abs();
        let last = h >= remaining;
        let hs = if last { remaining * dir } else { h * dir };

        let k2 = f(x + C2 * hs, &axpy(&y, &[(A21, &k1)], hs));
        let k3 = f(x + C3 * hs, &axpy(&y, &[(A31, &k1), (A32, &k2)], hs));
        let k4 = f(
            x + C4 * hs,
            &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs),
        );
        let k5 = f(
            x + C5 * hs,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs),
        );
        let k6 = f(
            x + hs,
            &axpy(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                hs,
            ),
        );
        let ynew = axpy(
            &y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            hs,
        );
        let k7 = f(x + hs, &ynew);
        let mut err = 0.0;
        for i in 0..N {
            let e = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc).powi(2);
        }
        err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            stats.rejected += 1;
            if h < min_step {
                return Err(format!("non-finite state near x = {}", x));
            }
            continue;
        }
        if err <= 1.0 {
            x = if last { x1 } else { x + hs };
            y = ynew;
            k1 = k7;
            stats.accepted += 1;
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h *= fac.clamp(0.2, 5.0);
            err_prev = err.max(1e-4);
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < min_step {
                return Err(format!("step size underflow near x = {}", x));
            }
        }
    }
    Ok((y, stats))
}

/// Integrates across a list of interior breakpoints so that no step straddles them.
pub fn integrate_piecewise<const N: usize, F>(
    f: F,
    x0: f64,
    x1: f64,
    y0: [f64; N],
    breaks: &[f64],
    tol: Tolerance,
    max_steps: usize,
) -> Result<[f64; N], String>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let (lo, hi) = if x0 < x1 { (x0, x1) } else { (x1, x0) };
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi)
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if x0 > x1 {
        pts.reverse();
    }
    let mut y = y0;
    let mut x = x0;
    for b in pts.into_iter().chain(std::iter::once(x1)) {
        y = integrate(&f, x, b, y, tol, max_steps)?.0;
        x = b;
    }
    Ok(y)
}
