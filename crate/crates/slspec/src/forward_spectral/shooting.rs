//! Two-sided modified Prüfer shooting for -y'' - w^2 Q y = -xi^2 y, y(0) = 0, y decaying.
//!
//! With a fixed scale S, y = r sin(theta) and y' = S r cos(theta). The left solution starts
//! at the origin, the right one at the truncation radius X with the decaying logarithmic
//! derivative, and the two phases are compared at a matching point near the turning point.

use crate::numerics::ode::{integrate_piecewise, Tolerance};
use crate::potentials::Potential;

const MAX_STEPS: usize = 2_000_000;

/// One evaluation of the shooting problem at a trial xi.
#[derive(Debug, Clone, Copy)]
pub struct Shot {
    pub xi: f64,
    pub x_match: f64,
    pub x_inf: f64,
    /// theta_L(x_m) - theta_R(x_m); equals n*pi at the eigenvalue with n interior zeros.
    pub mismatch: f64,
    pub rho_left: f64,
    pub rho_right: f64,
    pub j_left: f64,
    pub j_right: f64,
    pub theta_inf: f64,
    pub kappa_inf: f64,
}

impl Shot {
    /// Number of eigenvalues strictly above xi.
    pub fn count_above(&self) -> usize {
        if self.mismatch > 0.0 {
            (self.mismatch / std::f64::consts::PI).ceil() as usize
        } else {
            0
        }
    }

    /// (phi'(0))^2 of the normalised solution, assuming xi is an eigenvalue.
    pub fn characteristic_value(&self) -> f64 {
        (-2.0 * self.rho_left).exp() / (self.j_left + self.j_right)
    }

    /// ln of s with phi(x) ~ s e^{-xi x}, before the far-tail phase correction.
    pub fn log_norming_base(&self) -> f64 {
        self.xi * self.x_inf - self.rho_right + self.theta_inf.sin().abs().ln()
            - 0.5 * (self.j_left + self.j_right).ln()
    }
}

#[derive(Debug, Clone)]
pub struct Shooter<'a> {
    pub potential: &'a Potential,
    pub omega: f64,
    pub scale: f64,
    pub tol: Tolerance,
    breaks: Vec<f64>,
}

impl<'a> Shooter<'a> {
    pub fn new(potential: &'a Potential, omega: f64, rtol: f64) -> Self {
        let scale = (omega * potential.q0.sqrt()).max(1e-3);
        Self {
            potential,
            omega,
            scale,
            tol: Tolerance {
                rtol,
                atol: rtol * 1e-2,
            },
            breaks: potential.breakpoints.clone(),
        }
    }

    /// Classical turning point omega^2 Q(x) = xi^2, clamped to [0, x_inf].
    pub fn match_point(&self, xi: f64, x_inf: f64) -> f64 {
        let level = (xi / self.omega).powi(2);
        let x = if level >= self.potential.q0 {
            0.0
        } else {
            self.potential.level_crossing(level)
        };
        x.min(x_inf)
    }

    /// Truncation radius where omega^2 Q(X) <= ratio * xi_lo^2.
    pub fn truncation(&self, xi_lo: f64, ratio: f64) -> f64 {
        if let Some(s) = self.potential.support {
            return s;
        }
        let level = ratio * (xi_lo / self.omega).powi(2);
        self.potential.level_crossing(level).max(1.0)
    }

    pub fn shoot(&self, xi: f64, x_match: f64, x_inf: f64) -> Result<Shot, String> {
        let s = self.scale;
        let w2 = self.omega * self.omega;
        let q = self.potential;
        let xi2 = xi * xi;
        let rhs = move |x: f64, y: &[f64; 3], sign: f64| {
            let p = w2 * q.value(x) - xi2;
            let (sn, cs) = y[0].sin_cos();
            let dth = s * cs * cs + p / s * sn * sn;
            let drho = (s - p / s) * sn * cs;
            let dj = sign * sn * sn - 2.0 * drho * y[2];
            [dth, drho, dj]
        };
        let left = integrate_piecewise(
            |x, y| rhs(x, y, 1.0),
            0.0,
            x_match,
            [0.0, -s.ln(), 0.0],
            &self.breaks,
            self.tol,
            MAX_STEPS,
        )?;
        let q_inf = if q.support.map(|s| x_inf >= s).unwrap_or(false) {
            0.0
        } else {
            q.value(x_inf)
        };
        let kappa = (xi2 - w2 * q_inf).max(0.25 * xi2).sqrt();
        let theta_inf = std::f64::consts::FRAC_PI_2 + (kappa / s).atan();
        let j_inf = theta_inf.sin().powi(2) / (2.0 * kappa);
        let right = integrate_piecewise(
            |x, y| rhs(x, y, -1.0),
            x_inf,
            x_match,
            [theta_inf, 0.0, j_inf],
            &self.breaks,
            self.tol,
            MAX_STEPS,
        )?;
        Ok(Shot {
            xi,
            x_match,
            x_inf,
            mismatch: left[0] - right[0],
            rho_left: left[1],
            rho_right: right[1],
            j_left: left[2],
            j_right: right[2],
            theta_inf,
            kappa_inf: kappa,
        })
    }
}
