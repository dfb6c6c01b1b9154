//! Explicit approximation constants, the lower-bound envelopes and empirical rate fits.

use crate::err;
use crate::error::Result;
use crate::forward_spectral::SpectralData;
use serde::Serialize;
use std::f64::consts::{E, LN_2};

const MODULE: &str = "bounds_rates";

/// [l] = ceil(l) - 1, so that [l] + 1 = m + 1 for l = m + alpha, 0 < alpha <= 1.
pub fn floor_index(l: f64) -> u32 {
    (l.ceil() - 1.0).max(0.0) as u32
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn check_ls(op: &'static str, l: f64, s: u32) -> Result<()> {
    if !(l > 0.0) || !l.is_finite() || s == 0 {
        return Err(err!(MODULE, op, InvalidInput, "need l > 0 and s >= 1"));
    }
    Ok(())
}

pub fn ln_vitushkin_c_inf(l: f64, s: u32) -> Result<f64> {
    check_ls("vitushkin_c_inf", l, s)?;
    let m1 = floor_index(l) as f64 + 1.0;
    let s = s as f64;
    Ok(-(0.5 * s.ln()
        + (l + 1.0) * LN_2
        + l / s * 8f64.ln()
        + m1 * m1.ln()
        + s * m1 * (4.0 * (1.0 + E)).ln()))
}

pub fn vitushkin_c_inf(l: f64, s: u32) -> Result<f64> {
    Ok(ln_vitushkin_c_inf(l, s)?.exp())
}

pub fn ln_vitushkin_c_l1(l: f64, s: u32) -> Result<f64> {
    check_ls("vitushkin_c_l1", l, s)?;
    let m = floor_index(l);
    let m1 = m as f64 + 1.0;
    let sf = s as f64;
    Ok(2.0 * sf * ln_factorial(m + 1)
        - (5f64.ln()
            + 0.5 * sf.ln()
            + (l + 2.0) * LN_2
            + l / sf * 18f64.ln()
            + m1 * m1.ln()
            + sf * ln_factorial(2 * m + 3)
            + sf * m1 * (1.0 + E).ln()))
}

pub fn vitushkin_c_l1(l: f64, s: u32) -> Result<f64> {
    Ok(ln_vitushkin_c_l1(l, s)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeCase {
    M1,
    Mp1,
}

/// (omega ln omega)^{-3} for M1, (omega ln omega)^{-(m+1)} for Mp1.
pub fn lower_envelope(omega: f64, m: u32, case: EnvelopeCase) -> Result<f64> {
    if !(omega > E) {
        return Err(err!(MODULE, "lower_envelope", OutOfDomain, "need omega > e, got {omega}"));
    }
    let p = match case {
        EnvelopeCase::M1 => 3.0,
        EnvelopeCase::Mp1 => m as f64 + 1.0,
    };
    Ok((omega * omega.ln()).powf(-p))
}

/// Known explicit bracket for ln(4 xi^2 / C) as a function of omega.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormingBracket {
    /// [1/(45 w^9 e^{26 w^2}), 22 w^2 e^{15 w^2}]
    Q1,
    /// (0, 220 w^2]
    SquareWell,
}

impl NormingBracket {
    pub fn ln_bounds(&self, omega: f64) -> (f64, f64) {
        let w2 = omega * omega;
        match self {
            Self::Q1 => (
                -(45f64.ln() + 9.0 * omega.ln() + 26.0 * w2),
                22f64.ln() + 2.0 * omega.ln() + 15.0 * w2,
            ),
            Self::SquareWell => (f64::NEG_INFINITY, (220.0 * w2).ln()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactClass {
    pub a: f64,
    pub k1: u32,
    pub k2: u32,
    pub q_mass: f64,
    pub bracket: Option<NormingBracket>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelMargin {
    pub j: usize,
    pub xi: f64,
    /// xi - lower bound and upper bound - xi.
    pub xi_margin_low: f64,
    pub xi_margin_high: f64,
    pub ln_norming: f64,
    pub bracket_margin_low: Option<f64>,
    pub bracket_margin_high: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub omega: f64,
    pub xi_lower: f64,
    pub xi_upper: f64,
    pub levels: Vec<LevelMargin>,
    /// Smallest beta with |ln(4 xi^2/C)| <= beta omega^2 (alpha = 1).
    pub beta: f64,
    pub pass: bool,
}

pub fn spectral_estimate_check(sd: &SpectralData, class: &CompactClass) -> EstimateReport {
    let omega = sd.omega;
    let b = if class.k2 > 2 {
        class.k1 as f64 / (class.k2 as f64 - 2.0)
    } else {
        f64::INFINITY
    };
    let xi_lower = class.a / omega.powf(b);
    let xi_upper = omega * sd.q0.sqrt();
    let bracket = class.bracket.map(|br| br.ln_bounds(omega));
    let levels: Vec<LevelMargin> = sd
        .xi
        .iter()
        .zip(sd.norming())
        .enumerate()
        .map(|(j, (&xi, d))| {
            let ln_d = d.ln();
            let (lo, hi) = match bracket {
                Some((l, h)) => (Some(ln_d - l), Some(h - ln_d)),
                None => (None, None),
            };
            let ok = xi >= xi_lower
                && xi <= xi_upper
                && lo.map(|v| v >= 0.0).unwrap_or(true)
                && hi.map(|v| v >= 0.0).unwrap_or(true);
            LevelMargin {
                j,
                xi,
                xi_margin_low: xi - xi_lower,
                xi_margin_high: xi_upper - xi,
                ln_norming: ln_d,
                bracket_margin_low: lo,
                bracket_margin_high: hi,
                ok,
            }
        })
        .collect();
    let beta = levels
        .iter()
        .map(|l| l.ln_norming.abs() / (omega * omega))
        .fold(0.0, f64::max);
    let pass = levels.iter().all(|l| l.ok);
    EstimateReport {
        omega,
        xi_lower,
        xi_upper,
        levels,
        beta,
        pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeKind {
    /// (omega ln omega)^{-(m+1)}, informational only.
    NegLowerBound { m: u32 },
    /// ln omega / sqrt(omega)
    Gl0Rate,
    /// omega^{-m}
    GlmRate { m: u32 },
}

impl EnvelopeKind {
    pub fn envelope(&self, omega: f64) -> f64 {
        match self {
            Self::NegLowerBound { m } => (omega * omega.ln()).powf(-(*m as f64 + 1.0)),
            Self::Gl0Rate => omega.ln() / omega.sqrt(),
            Self::GlmRate { m } => omega.powf(-(*m as f64)),
        }
    }

    /// Decay exponent the errors must reach, after the envelope's log factor is removed.
    pub fn required_exponent(&self) -> f64 {
        match self {
            Self::NegLowerBound { m } => *m as f64 + 1.0,
            Self::Gl0Rate => 0.5,
            Self::GlmRate { m } => *m as f64,
        }
    }

    /// Power of ln omega carried by the envelope.
    fn log_power(&self) -> f64 {
        match self {
            Self::NegLowerBound { m } => -(*m as f64 + 1.0),
            Self::Gl0Rate => 1.0,
            Self::GlmRate { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub samples: Vec<(f64, f64)>,
    /// p in error ~ omega^{-p} (total least squares in log-log).
    pub fitted_exponent: f64,
    /// nu in error ~ omega^{-p'} (ln omega)^{nu}, ordinary least squares with three parameters.
    pub fitted_log_factor: f64,
    /// Exponent after dividing the errors by the envelope's log factor.
    pub exponent_without_log: f64,
    pub fit_residual: f64,
    /// Envelope scaled to the first sample.
    pub prefactor: f64,
    pub envelope_kind: EnvelopeKind,
    /// For the lower-bound envelope: whether the errors fall below it at the largest omega.
    pub below_lower_envelope: Option<bool>,
    pub pass: bool,
}

/// Total-least-squares line y = c + k x; returns (k, c, rms orthogonal residual).
pub fn tls_line(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in pts {
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
        sxy += (x - mx) * (y - my);
    }
    // direction of the principal axis of the 2x2 scatter matrix
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let k = theta.tan();
    let c = my - k * mx;
    let (sn, cs) = theta.sin_cos();
    let res = pts
        .iter()
        .map(|(x, y)| (-(x - mx) * sn + (y - my) * cs).powi(2))
        .sum::<f64>();
    (k, c, (res / n).sqrt())
}

/// Ordinary least squares for y = b0 + b1 x1 + b2 x2 via the normal equations.
fn ols2(rows: &[(f64, f64, f64)]) -> Option<[f64; 3]> {
    let mut a = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for &(x1, x2, y) in rows {
        let v = [1.0, x1, x2];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += v[i] * v[j];
            }
            r[i] += v[i] * y;
        }
    }
    let m = nalgebra::Matrix3::from_fn(|i, j| a[i][j]);
    let sol = m.lu().solve(&nalgebra::Vector3::from(r))?;
    Some([sol[0], sol[1], sol[2]])
}

pub fn convergence_report(samples: &[(f64, f64)], kind: EnvelopeKind) -> Result<RateReport> {
    const OP: &str = "convergence_report";
    if samples.len() < 3 {
        return Err(err!(MODULE, OP, InvalidInput, "insufficient samples: need at least 3, got {}", samples.len()));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(err!(MODULE, OP, InvalidInput, "omega values must be strictly increasing"));
    }
    if samples.iter().any(|s| !(s.1 > 0.0) || !(s.0 > 1.0)) {
        return Err(err!(MODULE, OP, InvalidInput, "errors must be positive and omega > 1"));
    }
    let logs: Vec<(f64, f64)> = samples.iter().map(|(w, e)| (w.ln(), e.ln())).collect();
    let (k, _, residual) = tls_line(&logs);
    let lp = kind.log_power();
    let stripped: Vec<(f64, f64)> = samples
        .iter()
        .map(|(w, e)| {
            let x = if matches!(kind, EnvelopeKind::NegLowerBound { .. }) {
                (w * w.ln()).ln()
            } else {
                w.ln()
            };
            let y = if matches!(kind, EnvelopeKind::NegLowerBound { .. }) {
                e.ln()
            } else {
                e.ln() - lp * w.ln().ln()
            };
            (x, y)
        })
        .collect();
    let (ks, _, _) = tls_line(&stripped);
    let log_factor = ols2(
        &samples
            .iter()
            .map(|(w, e)| (w.ln(), w.ln().ln(), e.ln()))
            .collect::<Vec<_>>(),
    )
    .map(|b| b[2])
    .unwrap_or(f64::NAN);
    let (w0, e0) = samples[0];
    let prefactor = e0 / kind.envelope(w0);
    let below_all = samples
        .iter()
        .all(|(w, e)| *e <= prefactor * kind.envelope(*w) * (1.0 + 1e-12));
    let exponent_without_log = -ks;
    let (pass, below_lower) = match kind {
        EnvelopeKind::NegLowerBound { .. } => {
            let (wl, el) = samples[samples.len() - 1];
            (true, Some(el < kind.envelope(wl)))
        }
        _ => (below_all && exponent_without_log >= kind.required_exponent(), None),
    };
    Ok(RateReport {
        samples: samples.to_vec(),
        fitted_exponent: -k,
        fitted_log_factor: log_factor,
        exponent_without_log,
        fit_residual: residual,
        prefactor,
        envelope_kind: kind,
        below_lower_envelope: below_lower,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::{mp, Mp};
    use dashu_float::FBig;

    #[test]
    fn bracket_index() {
        assert_eq!(floor_index(2.0), 1);
        assert_eq!(floor_index(1.5), 1);
        assert_eq!(floor_index(1.0), 0);
        assert_eq!(floor_index(2.01), 2);
    }

    #[test]
    fn c_inf_closed_value() {
        // l = 2, s = 1: 1 / (2^3 8^2 2^2 (4(1+e))^2)
        let direct = 1.0 / (8.0 * 64.0 * 4.0 * (4.0 * (1.0 + E)).powi(2));
        let v = vitushkin_c_inf(2.0, 1).unwrap();
        assert!((v / direct - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constants_positive_decreasing_and_quarter_bound() {
        for i in 10..=60 {
            let l = i as f64 / 10.0;
            let c = vitushkin_c_inf(l, 1).unwrap();
            assert!(c > 0.0 && 2f64.powf(l) * c <= 0.25);
            for s in 1..4 {
                assert!(vitushkin_c_inf(l, s + 1).unwrap() < vitushkin_c_inf(l, s).unwrap());
                assert!(vitushkin_c_l1(l, s + 1).unwrap() < vitushkin_c_l1(l, s).unwrap());
                assert!(vitushkin_c_l1(l, s).unwrap() > 0.0);
            }
        }
        let c: Vec<f64> = [1.5, 2.0, 3.0].iter().map(|&l| vitushkin_c_inf(l, 1).unwrap()).collect();
        assert!(c[0] > c[1] && c[1] > c[2]);
    }

    #[test]
    fn envelope_identities() {
        let w: f64 = 10.0;
        let v = lower_envelope(w, 0, EnvelopeCase::M1).unwrap();
        assert!((v - (w * w.ln()).powi(-3)).abs() < 1e-18);
        assert_eq!(lower_envelope(w, 2, EnvelopeCase::Mp1).unwrap(), v);
        assert!(lower_envelope(20.0, 1, EnvelopeCase::Mp1).unwrap() < lower_envelope(10.0, 1, EnvelopeCase::Mp1).unwrap());
        for m in 0..5 {
            let x = lower_envelope(7.0, m, EnvelopeCase::Mp1).unwrap() * (7.0 * 7f64.ln()).powi(m as i32 + 1);
            assert!((x - 1.0).abs() < 1e-14);
        }
        assert!(lower_envelope(2.5, 1, EnvelopeCase::M1).is_err());
    }

    #[test]
    fn synthetic_power_laws() {
        let s: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0].iter().map(|&w: &f64| (w, w.powi(-2))).collect();
        let r = convergence_report(&s, EnvelopeKind::GlmRate { m: 2 }).unwrap();
        assert!((r.fitted_exponent - 2.0).abs() < 1e-2);
        assert!(r.fit_residual < 1e-12);
        assert!(r.pass);
        let s: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&w: &f64| (w, 3.0 * w.ln() / w.sqrt())).collect();
        let r = convergence_report(&s, EnvelopeKind::Gl0Rate).unwrap();
        assert!((r.exponent_without_log - 0.5).abs() < 1e-2);
        assert!((r.fitted_log_factor - 1.0).abs() < 1e-6);
        assert!(convergence_report(&s[..2], EnvelopeKind::Gl0Rate).is_err());
    }

    #[test]
    fn lower_envelope_is_informational() {
        let s: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&w: &f64| (w, w.powi(-9))).collect();
        let r = convergence_report(&s, EnvelopeKind::NegLowerBound { m: 1 }).unwrap();
        assert!(r.pass);
        assert_eq!(r.below_lower_envelope, Some(true));
    }

    #[test]
    fn empty_data_estimate_passes() {
        let sd = SpectralData::new(10.0, "none", vec![], vec![], 1.0, vec![]);
        let class = CompactClass {
            a: 1.0,
            k1: 4,
            k2: 4,
            q_mass: 1.0,
            bracket: Some(NormingBracket::Q1),
        };
        assert!(spectral_estimate_check(&sd, &class).pass);
    }

    fn big(x: f64) -> Mp {
        mp(x, 200)
    }

    fn ln_fact(n: u32) -> Mp {
        (2..=n).fold(big(0.0), |a, k| a + big(k as f64).ln())
    }

    /// 200-bit re-evaluation of ln C_inf and ln C_L1 straight from the products.
    fn oracle(l: f64, s: u32) -> (f64, f64) {
        let m1 = floor_index(l) as f64 + 1.0;
        let (lb, sb, m1b) = (big(l), big(s as f64), big(m1));
        let e = big(1.0).exp();
        let ln2 = big(2.0).ln();
        let c_inf = -(sb.clone().ln() / big(2.0)
            + (lb.clone() + big(1.0)) * ln2.clone()
            + lb.clone() / sb.clone() * big(8.0).ln()
            + m1b.clone() * m1b.clone().ln()
            + sb.clone() * m1b.clone() * (big(4.0) * (big(1.0) + e.clone())).ln());
        let m = floor_index(l);
        let c_l1 = big(2.0) * sb.clone() * ln_fact(m + 1)
            - (big(5.0).ln()
                + sb.clone().ln() / big(2.0)
                + (lb.clone() + big(2.0)) * ln2
                + lb / sb.clone() * big(18.0).ln()
                + m1b.clone() * m1b.clone().ln()
                + sb.clone() * ln_fact(2 * m + 3)
                + sb * m1b * (big(1.0) + e).ln());
        let to = |v: Mp| FBig::to_f64(&v.exp()).value();
        (to(c_inf), to(c_l1))
    }

    #[test]
    fn constants_match_extended_precision() {
        for &(l, s) in &[(2.0, 1), (2.0, 2), (1.5, 1), (3.7, 3)] {
            let (ci, cl) = oracle(l, s);
            assert!((vitushkin_c_inf(l, s).unwrap() / ci - 1.0).abs() < 1e-12);
            assert!((vitushkin_c_l1(l, s).unwrap() / cl - 1.0).abs() < 1e-12);
        }
        assert!(vitushkin_c_l1(2.0, 2).unwrap() < vitushkin_c_l1(2.0, 1).unwrap());
    }
}
