//! Closed-form square-well spectrum and the Calogero count bracket.

use super::SpectralData;
use crate::err;
use crate::error::Result;
use crate::numerics::roots::brent;
use crate::potentials::Potential;
use serde::Serialize;

const MODULE: &str = "forward_spectral";

/// xi sin(mu) + mu cos(mu), mu = sqrt(omega^2 - xi^2), as a function of mu.
pub fn squarewell_condition(omega: f64, mu: f64) -> f64 {
    let xi = (omega * omega - mu * mu).max(0.0).sqrt();
    xi * mu.sin() + mu * mu.cos()
}

pub fn squarewell_c(omega: f64, xi: f64) -> f64 {
    2.0 * xi / (1.0 + xi) * (omega * omega - xi * xi)
}

/// Exact square-well data from the transcendental condition, scanned uniformly in mu.
pub fn squarewell_oracle(omega: f64) -> Result<SpectralData> {
    const OP: &str = "squarewell_oracle";
    if !(omega >= 1.0) {
        return Err(err!(MODULE, OP, InvalidInput, "omega must be >= 1, got {}", omega));
    }
    let n_scan = ((omega / std::f64::consts::PI).ceil() as usize + 1) * 256;
    let mu_max = omega * (1.0 - 1e-15);
    let f = |mu: f64| squarewell_condition(omega, mu);
    let mut xi = Vec::new();
    let mut prev_mu = 0.0;
    let mut prev_f = f(0.0);
    for i in 1..=n_scan {
        let mu = mu_max * i as f64 / n_scan as f64;
        let fm = f(mu);
        if prev_f != 0.0 && fm != 0.0 && prev_f.signum() != fm.signum() {
            let root = brent(f, prev_mu, mu, prev_f, fm, 1e-15, 200)
                .map_err(|e| err!(MODULE, OP, NotConverged, "bracket [{}, {}]: {}", prev_mu, mu, e))?;
            let x = (omega * omega - root * root).sqrt();
            if x > 0.0 {
                xi.push(x);
            }
        }
        prev_mu = mu;
        prev_f = fm;
    }
    xi.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let c = xi.iter().map(|&x| squarewell_c(omega, x)).collect();
    Ok(SpectralData::new(omega, "square_well", xi, c, 1.0, vec![]))
}

/// |omega - pi/2 - k pi| over integers k.
pub fn phase_distance(omega: f64) -> f64 {
    let t = (omega - std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI);
    t.min(std::f64::consts::PI - t)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalogeroBounds {
    pub lower: f64,
    pub upper: f64,
}

impl CalogeroBounds {
    /// Bracket check with the lower end rounded down and the upper end rounded up.
    pub fn contains(&self, count: usize) -> bool {
        let n = count as f64;
        n >= self.lower.floor() && n <= self.upper.ceil()
    }
}

pub fn calogero_bounds(p: &Potential, omega: f64) -> Result<CalogeroBounds> {
    const OP: &str = "calogero_bounds";
    let int_q = p.integrate_half_line(|_, q| q, 1e-12);
    let int_sqrt = p.integrate_half_line(|_, q| q.max(0.0).sqrt(), 1e-12);
    if !int_q.is_finite() || !int_sqrt.is_finite() {
        return Err(err!(MODULE, OP, NotConverged, "divergent integrals for {}", p.id));
    }
    let pi = std::f64::consts::PI;
    Ok(CalogeroBounds {
        lower: omega / (pi * p.q0.sqrt()) * int_q - 0.5,
        upper: 2.0 * omega / pi * int_sqrt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calogero_square_well() {
        let b = calogero_bounds(&Potential::square_well(), 10.0).unwrap();
        assert!((b.lower - (10.0 / std::f64::consts::PI - 0.5)).abs() < 1e-12);
        assert!((b.upper - 20.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn calogero_q1_upper_is_omega() {
        let q = Potential::q1();
        for &w in &[3.0, 10.0, 17.5] {
            let b = calogero_bounds(&q, w).unwrap();
            assert!((b.upper - w).abs() < 1e-9);
            let b2 = calogero_bounds(&q, 2.0 * w).unwrap();
            assert!((b2.upper - 2.0 * b.upper).abs() < 1e-9);
            assert!((b2.lower + 0.5 - 2.0 * (b.lower + 0.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_roots_satisfy_condition() {
        for &w in &[5.0, 10.0, 20.0] {
            let sd = squarewell_oracle(w).unwrap();
            for &x in &sd.xi {
                assert!(x < w);
                let mu = (w * w - x * x).sqrt();
                assert!((x * mu.sin() + mu * mu.cos()).abs() < 1e-11 * w);
            }
        }
        // root intervals of tan mu = -mu/xi: one per (k pi - pi/2, k pi) below omega
        assert_eq!(squarewell_oracle(10.0).unwrap().count(), 3);
        assert_eq!(squarewell_oracle(20.0).unwrap().count(), 6);
    }

    #[test]
    fn oracle_top_level_below_residual_bound() {
        let sd = squarewell_oracle(10.0).unwrap();
        assert!(*sd.xi.last().unwrap() <= (0.99f64).sqrt() * 10.0);
    }

    #[test]
    fn phase_guard_values() {
        assert!(phase_distance(5.0) >= 0.2);
        assert!(phase_distance(10.0) >= 0.2);
        assert!(phase_distance(20.0) >= 0.2);
        assert!(phase_distance(std::f64::consts::FRAC_PI_2 + 3.0 * std::f64::consts::PI) < 1e-12);
    }
}
