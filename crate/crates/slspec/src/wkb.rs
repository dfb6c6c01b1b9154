//! Semiclassical estimates for the even extension of Q: turning points, the action
//! Phi(eta) = int_{x-}^{x+} sqrt(Q - eta^2), quantisation and norming exponents.

use crate::err;
use crate::error::Result;
use crate::numerics::quad;
use crate::numerics::roots::brent;
use crate::potentials::Potential;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};

const MODULE: &str = "wkb";
const TOL: f64 = 1e-13;

#[derive(Debug, Clone, Serialize)]
pub struct WkbProfile {
    pub epsilon: f64,
    /// eta_j, j = 1..N, decreasing.
    pub eta: Vec<f64>,
    pub x_plus: Vec<f64>,
    pub action_values: Vec<f64>,
    pub theta_plus: Vec<f64>,
    /// ln s_j = theta_+(eta_j) / epsilon
    pub log_s: Vec<f64>,
    pub predicted_count: usize,
}

impl WkbProfile {
    pub fn omega(&self) -> f64 {
        1.0 / self.epsilon
    }

    pub fn xi(&self) -> Vec<f64> {
        self.eta.iter().map(|e| e / self.epsilon).collect()
    }

    /// Whole-line levels odd under x -> -x (even j); these satisfy the Dirichlet condition.
    /// Returned ascending in xi, so entry n pairs with the half-line level with n zeros
    /// counted from the top.
    pub fn dirichlet_xi(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .eta
            .iter()
            .enumerate()
            .filter(|(i, _)| (i + 1) % 2 == 0)
            .map(|(_, e)| e / self.epsilon)
            .collect();
        v.reverse();
        v
    }
}

/// Unique x >= 0 with Q(x) = eta^2.
pub fn turning_point(p: &Potential, eta: f64) -> Result<f64> {
    const OP: &str = "turning_point";
    if !(eta > 0.0) {
        return Err(err!(MODULE, OP, OutOfDomain, "eta must be positive, got {}", eta));
    }
    let level = eta * eta;
    if level > p.q0 * (1.0 + 1e-14) {
        return Err(err!(MODULE, OP, OutOfDomain, "eta^2 = {} exceeds Q(0) = {}", level, p.q0));
    }
    if level >= p.q0 {
        return Ok(0.0);
    }
    Ok(p.level_crossing(level))
}

fn breaks_in(p: &Potential, lo: f64, hi: f64) -> Vec<f64> {
    p.breakpoints.iter().copied().filter(|b| *b > lo && *b < hi).collect()
}

/// Phi(eta), the whole-line action, as twice the half-line integral.
pub fn action(p: &Potential, eta: f64) -> Result<f64> {
    Ok(action_parts(p, eta)?.0)
}

/// (action, analytic tail bound used at eta = 0 or 0 otherwise)
pub fn action_parts(p: &Potential, eta: f64) -> Result<(f64, f64)> {
    const OP: &str = "action";
    if !(eta >= 0.0) {
        return Err(err!(MODULE, OP, OutOfDomain, "eta must be >= 0, got {}", eta));
    }
    let e2 = eta * eta;
    if e2 >= p.q0 {
        if e2 > p.q0 * (1.0 + 1e-14) {
            return Err(err!(MODULE, OP, OutOfDomain, "eta^2 = {} exceeds Q(0)", e2));
        }
        return Ok((0.0, 0.0));
    }
    if eta == 0.0 {
        let split = match p.support {
            Some(s) => s,
            None => p.decay.x_tail.max(1.0) * 4.0,
        };
        let head = quad::adaptive(
            |x| p.value(x).sqrt(),
            0.0,
            split,
            &breaks_in(p, 0.0, split),
            TOL,
            TOL,
            20_000,
        );
        let (tail, bound) = if p.support.is_some() {
            (0.0, 0.0)
        } else {
            let t = quad::adaptive(
                |u: f64| {
                    if u <= 0.0 {
                        return 0.0;
                    }
                    let x = split / u;
                    p.value(x).sqrt() * split / (u * u)
                },
                0.0,
                1.0,
                &[],
                TOL,
                TOL,
                20_000,
            );
            let d = p.decay;
            let h = d.k2 as f64 / 2.0;
            (t.value, d.a.sqrt() * split.powf(1.0 - h) / (h - 1.0))
        };
        if head.error > 1e-9 {
            return Err(err!(MODULE, OP, NotConverged, "quadrature error {:e}", head.error));
        }
        return Ok((2.0 * (head.value + tail), bound));
    }
    let xp = turning_point(p, eta)?;
    // y = x+ sin(theta) removes the square-root endpoint behaviour at x+.
    let tb: Vec<f64> = breaks_in(p, 0.0, xp).iter().map(|b| (b / xp).asin()).collect();
    let r = quad::adaptive(
        |th: f64| {
            let (s, c) = th.sin_cos();
            (p.value(xp * s) - e2).max(0.0).sqrt() * xp * c
        },
        0.0,
        FRAC_PI_2,
        &tb,
        TOL,
        TOL,
        20_000,
    );
    if r.error > 1e-9 {
        return Err(err!(MODULE, OP, NotConverged, "quadrature error {:e}", r.error));
    }
    Ok((2.0 * r.value, 0.0))
}

/// theta_+(eta) = eta x+ + int_{x+}^inf (eta - sqrt(eta^2 - Q)).
pub fn theta_plus(p: &Potential, eta: f64) -> Result<f64> {
    const OP: &str = "theta_plus";
    let xp = turning_point(p, eta)?;
    let e2 = eta * eta;
    let f = |x: f64| {
        let q = p.value(x).min(e2);
        // eta - sqrt(eta^2 - q) without cancellation
        q / (eta + (e2 - q).sqrt())
    };
    // x = x+ + v^2 near the turning point, then a mapped tail x = x1 / u.
    let x1 = 2.0 * xp + 1.0;
    let v1 = (x1 - xp).sqrt();
    let vb: Vec<f64> = breaks_in(p, xp, x1).iter().map(|b| (b - xp).sqrt()).collect();
    let near = quad::adaptive(|v: f64| f(xp + v * v) * 2.0 * v, 0.0, v1, &vb, TOL, TOL, 20_000);
    let far = if p.support.map(|s| s <= x1).unwrap_or(false) {
        0.0
    } else {
        let ub: Vec<f64> = p.breakpoints.iter().filter(|b| **b > x1).map(|b| x1 / b).collect();
        quad::adaptive(
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let x = x1 / u;
                f(x) * x1 / (u * u)
            },
            0.0,
            1.0,
            &ub,
            TOL,
            TOL,
            20_000,
        )
        .value
    };
    if near.error > 1e-9 {
        return Err(err!(MODULE, OP, NotConverged, "quadrature error {:e}", near.error));
    }
    Ok(eta * xp + near.value + far)
}

/// Solves Phi(eta_j) = (j - 1/2) pi / omega for j = 1..floor(Phi(0) omega / pi).
pub fn wkb_spectrum(p: &Potential, omega: f64) -> Result<WkbProfile> {
    const OP: &str = "wkb_spectrum";
    if !(omega >= 1.0) {
        return Err(err!(MODULE, OP, InvalidInput, "omega must be >= 1, got {}", omega));
    }
    let phi0 = action(p, 0.0)?;
    let n = (phi0 * omega / PI).floor() as usize;
    let top = p.q0.sqrt();
    let mut eta = Vec::with_capacity(n);
    for j in 1..=n {
        let target = (j as f64 - 0.5) * PI / omega;
        let mut failure = None;
        let g = |e: f64| match action(p, e) {
            Ok(a) => a - target,
            Err(er) => {
                failure = Some(er);
                f64::NAN
            }
        };
        let r = brent(g, 0.0, top, phi0 - target, -target, 1e-15, 200);
        if let Some(e) = failure {
            return Err(e);
        }
        let e = r.map_err(|m| err!(MODULE, OP, NotConverged, "level j = {}: {}", j, m))?;
        eta.push(e);
    }
    let mut x_plus = Vec::with_capacity(n);
    let mut action_values = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    for &e in &eta {
        if e <= 0.0 {
            return Err(err!(MODULE, OP, NotConverged, "level collapsed to eta = 0"));
        }
        x_plus.push(turning_point(p, e)?);
        action_values.push(action(p, e)?);
        theta.push(theta_plus(p, e)?);
    }
    let log_s = theta.iter().map(|t| t * omega).collect();
    Ok(WkbProfile {
        epsilon: 1.0 / omega,
        eta,
        x_plus,
        action_values,
        theta_plus: theta,
        log_s,
        predicted_count: n,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpacingReport {
    pub status: String,
    pub levels: usize,
    pub min_eta_gap: f64,
    pub min_xi_gap: f64,
    /// 1/(5 omega)
    pub xi_gap_floor: f64,
    pub xi_gap_ok: bool,
    /// max |Phi(eta_{l+1}) - Phi(eta_l) - pi/omega|
    pub action_gap_deviation: f64,
    /// -ln(min eta gap) / ln(omega): the empirical exponent b' in a / omega^{b'}.
    pub empirical_b_prime: f64,
}

pub fn spacing_check(profile: &WkbProfile, omega: f64) -> SpacingReport {
    let n = profile.eta.len();
    if n < 2 {
        return SpacingReport {
            status: "insufficient levels".into(),
            levels: n,
            min_eta_gap: f64::NAN,
            min_xi_gap: f64::NAN,
            xi_gap_floor: 1.0 / (5.0 * omega),
            xi_gap_ok: false,
            action_gap_deviation: f64::NAN,
            empirical_b_prime: f64::NAN,
        };
    }
    let mut min_gap = f64::INFINITY;
    let mut dev: f64 = 0.0;
    for l in 0..n - 1 {
        min_gap = min_gap.min(profile.eta[l] - profile.eta[l + 1]);
        let da = profile.action_values[l + 1] - profile.action_values[l];
        dev = dev.max((da - PI / omega).abs());
    }
    let floor = 1.0 / (5.0 * omega);
    SpacingReport {
        status: "ok".into(),
        levels: n,
        min_eta_gap: min_gap,
        min_xi_gap: min_gap * omega,
        xi_gap_floor: floor,
        xi_gap_ok: min_gap * omega >= floor,
        action_gap_deviation: dev,
        empirical_b_prime: -min_gap.ln() / omega.ln(),
    }
}
