//! Sine integral and small complex helpers.

use super::quad::GaussRule;
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

fn rule16() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(16))
}

/// Si(x) = int_0^x sin t / t dt.
pub fn si(x: f64) -> f64 {
    if x < 0.0 {
        return -si(-x);
    }
    if x == 0.0 {
        return 0.0;
    }
    if x <= 64.0 {
        let panels = x.ceil() as usize;
        return rule16().composite(0.0, x, panels, |t: f64| {
            if t == 0.0 {
                1.0
            } else {
                t.sin() / t
            }
        });
    }
    // Asymptotic auxiliary functions f, g.
    let mut f = 0.0;
    let mut g = 0.0;
    let inv2 = 1.0 / (x * x);
    let mut tf = 1.0 / x;
    let mut tg = 1.0 / (x * x);
    for k in 0..20 {
        f += tf;
        g += tg;
        let kf = (2 * k + 1) as f64 * (2 * k + 2) as f64;
        let kg = (2 * k + 2) as f64 * (2 * k + 3) as f64;
        let nf = -tf * kf * inv2;
        let ng = -tg * kg * inv2;
        if nf.abs() > tf.abs() {
            break;
        }
        tf = nf;
        tg = ng;
    }
    FRAC_PI_2 - f * x.cos() - g * x.sin()
}

/// exp(z) - 1 without cancellation for small |z|.
pub fn cexpm1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-5 {
        return z * (1.0 + z * (0.5 + z / 6.0));
    }
    let em1 = z.re.exp_m1();
    let half = 0.5 * z.im;
    let s = half.sin();
    Complex64::new(
        em1 * z.im.cos() - 2.0 * s * s,
        z.re.exp() * z.im.sin(),
    )
}

/// (exp(z) - 1)/z, finite at 0.
pub fn cexprel(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        return 1.0 + z / 2.0 + z2 / 6.0 + z2 * z / 24.0 + z2 * z2 / 120.0;
    }
    cexpm1(z) / z
}
