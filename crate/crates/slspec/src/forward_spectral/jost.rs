//! Jost solution f(k, x) ~ e^{ikx} and Jost function F(k) = f(k, 0).
//!
//! Works with g = e^{-ikx} f and d = e^{-ikx} f'. Beyond a radius X_J the first Born
//! approximation is used; inward of it the Volterra equation
//!   g(x) = g_free(x) + int_x^b (e^{2ik(t-x)} - 1)/(2ik) V(t) g(t) dt,   V = -omega^2 Q
//! is solved segment by segment with successive approximations on Chebyshev-Lobatto nodes.

use super::{Forward, MODULE};
use crate::err;
use crate::error::Result;
use crate::numerics::quad::{self, gauss_legendre};
use crate::numerics::special::{cexpm1, cexprel};
use crate::potentials::Potential;
use num_complex::Complex64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

const NODES: usize = 16;
const GL: usize = 32;

#[derive(Debug, Clone, Copy)]
pub struct JostOptions {
    /// Maximum number of successive approximations per segment.
    pub n_max: usize,
    /// Relative tolerance of the successive approximations.
    pub tol: f64,
    /// Allowed value of omega^2 int_{X_J}^inf t Q(t) dt for the Born tail.
    pub tail_tol: f64,
}

impl Default for JostOptions {
    fn default() -> Self {
        Self {
            n_max: 60,
            tol: 1e-14,
            tail_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct JostSample {
    pub k: Complex64,
    #[serde(rename = "F")]
    pub f: Complex64,
    /// f'(k, 0)
    pub df: Complex64,
    pub iterations_used: usize,
    /// Largest per-segment factorial bound (h int|V|)^n / n! at the final iterate.
    pub series_bound: f64,
    /// Size of the neglected second Born term beyond X_J.
    pub tail_truncation: f64,
    pub x_tail: f64,
}

struct Basis {
    /// Normalised Lobatto nodes on [0, 1].
    u: [f64; NODES],
    /// Barycentric weights for the nodes.
    bw: [f64; NODES],
    gx: Vec<f64>,
    gw: Vec<f64>,
}

fn basis() -> &'static Basis {
    static B: OnceLock<Basis> = OnceLock::new();
    B.get_or_init(|| {
        let mut u = [0.0; NODES];
        for (j, uj) in u.iter_mut().enumerate() {
            *uj = 0.5 * (1.0 - (PI * j as f64 / (NODES - 1) as f64).cos());
        }
        let mut bw = [0.0; NODES];
        for (j, w) in bw.iter_mut().enumerate() {
            let mut p = 1.0;
            for m in 0..NODES {
                if m != j {
                    p *= u[j] - u[m];
                }
            }
            *w = 1.0 / p;
        }
        let (gx, gw) = gauss_legendre(GL);
        Basis { u, bw, gx, gw }
    })
}

impl Basis {
    fn lagrange(&self, v: f64) -> [f64; NODES] {
        let mut l = [0.0; NODES];
        let mut s = 0.0;
        for j in 0..NODES {
            let dv = v - self.u[j];
            if dv == 0.0 {
                l = [0.0; NODES];
                l[j] = 1.0;
                return l;
            }
            l[j] = self.bw[j] / dv;
            s += l[j];
        }
        for lj in l.iter_mut() {
            *lj /= s;
        }
        l
    }
}

/// Collocation matrices for the g and d integrals on a segment of length h.
struct SegmentOps {
    wg: Vec<[Complex64; NODES]>,
    wd: Vec<[Complex64; NODES]>,
}

/// Panels in s = t - x covering [0, len]: narrow near s = 0 where e^{2iks} has its
/// boundary layer, doubling outwards, capped to keep oscillations resolved.
fn panels(k: Complex64, len: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let cap = if k.re != 0.0 { 8.0 / k.re.abs() } else { f64::INFINITY };
    let mut width = (4.0 / k.norm()).min(cap);
    let mut a = 0.0;
    while a < len {
        let b = (a + width).min(len);
        out.push((a, b));
        a = b;
        width = (2.0 * width).min(cap);
    }
    out
}

fn segment_ops(k: Complex64, h: f64) -> SegmentOps {
    let b = basis();
    let mut wg = vec![[Complex64::new(0.0, 0.0); NODES]; NODES];
    let mut wd = vec![[Complex64::new(0.0, 0.0); NODES]; NODES];
    let two_ik = Complex64::new(0.0, 2.0) * k;
    for i in 0..NODES - 1 {
        let len = h * (1.0 - b.u[i]);
        for (p0, p1) in panels(k, len) {
            let c = 0.5 * (p0 + p1);
            let r = 0.5 * (p1 - p0);
            for (x, w) in b.gx.iter().zip(&b.gw) {
                let s = c + r * x;
                let z = two_ik * s;
                let kg = cexprel(z) * s;
                let kd = -(cexpm1(z) + 2.0) * 0.5;
                let l = b.lagrange(b.u[i] + s / h);
                for j in 0..NODES {
                    let lw = l[j] * w * r;
                    wg[i][j] += kg * lw;
                    wd[i][j] += kd * lw;
                }
            }
        }
    }
    SegmentOps { wg, wd }
}

/// omega^2 int_x^inf t Q(t) dt
fn moment_tail(p: &Potential, omega: f64, x: f64) -> f64 {
    if let Some(s) = p.support {
        if x >= s {
            return 0.0;
        }
    }
    let w2 = omega * omega;
    w2 * quad::adaptive(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let t = x / u;
            t * p.value(t) * x / (u * u)
        },
        0.0,
        1.0,
        &[],
        1e-300,
        1e-10,
        2000,
    )
    .value
}

pub fn tail_radius(p: &Potential, omega: f64, tail_tol: f64) -> f64 {
    if let Some(s) = p.support {
        return s;
    }
    let mut x = p.decay.x_tail.max(1.0);
    while moment_tail(p, omega, x) > tail_tol {
        x *= 2.0;
        if x > 1e9 {
            break;
        }
    }
    x
}

/// First Born approximation to (g, d) at X.
fn born_tail(p: &Potential, omega: f64, k: Complex64, x: f64) -> (Complex64, Complex64) {
    if p.support.map(|s| x >= s).unwrap_or(false) {
        return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0) * k);
    }
    let w2 = omega * omega;
    let two_ik = Complex64::new(0.0, 2.0) * k;
    let ig = quad::adaptive(
        |u: f64| {
            if u <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let t = x / u;
            let s = t - x;
            cexprel(two_ik * s) * s * (-w2 * p.value(t)) * (x / (u * u))
        },
        0.0,
        1.0,
        &[],
        1e-300,
        1e-12,
        4000,
    )
    .value;
    let id = quad::adaptive(
        |u: f64| {
            if u <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let t = x / u;
            let s = t - x;
            (cexpm1(two_ik * s) + 2.0) * 0.5 * (-w2 * p.value(t)) * (x / (u * u))
        },
        0.0,
        1.0,
        &[],
        1e-300,
        1e-12,
        4000,
    )
    .value;
    (1.0 + ig, Complex64::new(0.0, 1.0) * k - id)
}

/// Next segment [a, b] ending at b, respecting breakpoints. Lengths are rounded down to
/// powers of two so the collocation matrices can be reused.
fn next_left(p: &Potential, omega: f64, k: Complex64, b: f64) -> f64 {
    let mut h = (0.5 * b).max(0.25);
    if k.re != 0.0 {
        h = h.min(8.0 / k.re.abs());
    }
    for _ in 0..2 {
        let v = omega * omega * p.value((b - h).max(0.0));
        if v > 0.0 {
            h = h.min(0.25 / v.sqrt());
        }
    }
    h = 2f64.powi(h.log2().floor() as i32);
    let mut a = (b - h).max(0.0);
    for &bp in &p.breakpoints {
        if bp > a && bp < b {
            a = bp;
        }
    }
    if a < 1e-12 * b.max(1.0) {
        a = 0.0;
    }
    a
}

pub fn jost(p: &Potential, omega: f64, k: Complex64, opts: &JostOptions) -> Result<JostSample> {
    const OP: &str = "jost";
    if k.im < 0.0 {
        return Err(err!(MODULE, OP, OutOfDomain, "Im k must be >= 0, got {}", k));
    }
    if k.norm() == 0.0 {
        return Err(err!(MODULE, OP, OutOfDomain, "k = 0 is excluded"));
    }
    let x_tail = tail_radius(p, omega, opts.tail_tol);
    let tail_truncation = moment_tail(p, omega, x_tail).powi(2);
    let (mut g_b, mut d_b) = born_tail(p, omega, k, x_tail);
    let w2 = omega * omega;
    let b0 = basis();
    let two_ik = Complex64::new(0.0, 2.0) * k;
    let mut cache: HashMap<u64, SegmentOps> = HashMap::new();
    let mut iterations_used = 0;
    let mut series_bound: f64 = 0.0;
    let mut b = x_tail;
    while b > 0.0 {
        let a = next_left(p, omega, k, b);
        let h = b - a;
        let ops = cache.entry(h.to_bits()).or_insert_with(|| segment_ops(k, h));
        let xs: Vec<f64> = b0.u.iter().map(|u| a + h * u).collect();
        // Left-closed nodes take the one-sided limit from inside the segment.
        let v: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let xe = if i == 0 {
                    x + 1e-12 * h
                } else if i == NODES - 1 {
                    x - 1e-12 * h
                } else {
                    x
                };
                -w2 * p.value(xe)
            })
            .collect();
        let mut g_free = [Complex64::new(0.0, 0.0); NODES];
        let mut d_free = [Complex64::new(0.0, 0.0); NODES];
        for i in 0..NODES {
            let s = b - xs[i];
            let z = two_ik * s;
            let e = cexpm1(z);
            g_free[i] = g_b * (e + 2.0) * 0.5 - d_b * cexprel(z) * s;
            d_free[i] = g_b * k * e / Complex64::new(0.0, 2.0) + d_b * (e + 2.0) * 0.5;
        }
        let mut g = g_free;
        let mut n = 0;
        let scale = g.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        loop {
            n += 1;
            let mut next = g_free;
            for i in 0..NODES {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..NODES {
                    s += ops.wg[i][j] * (v[j] * g[j]);
                }
                next[i] += s;
            }
            let change = next
                .iter()
                .zip(&g)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            g = next;
            if change <= opts.tol * scale {
                break;
            }
            if n >= opts.n_max {
                return Err(err!(
                    MODULE,
                    OP,
                    NotConverged,
                    "successive approximations not converged on [{}, {}] after {} terms (last change {:e})",
                    a,
                    b,
                    n,
                    change / scale
                ));
            }
        }
        let mass: f64 = h * v.iter().map(|x| x.abs()).fold(0.0, f64::max) * h.min(1.0 / k.norm());
        let mut bound = 1.0;
        for m in 1..=n {
            bound *= mass / m as f64;
        }
        series_bound = series_bound.max(bound);
        iterations_used = iterations_used.max(n);
        let mut d0 = d_free[0];
        for j in 0..NODES {
            d0 += ops.wd[0][j] * (v[j] * g[j]);
        }
        g_b = g[0];
        d_b = d0;
        b = a;
        if cache.len() > 4096 {
            cache.clear();
        }
    }
    Ok(JostSample {
        k,
        f: g_b,
        df: d_b,
        iterations_used,
        series_bound,
        tail_truncation,
        x_tail,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityCheck {
    pub j: usize,
    pub xi: f64,
    /// 4 xi^2 / C
    pub lhs: f64,
    /// s^2 (dF/dtau)^2 = -s^2 Fdot^2
    pub rhs: f64,
    pub d_f_dtau: f64,
    pub f_at_zero: f64,
    pub step: f64,
    pub residual: f64,
}

/// d/dtau F(i tau) by three-level Richardson extrapolation of central differences.
pub fn jost_tau_derivative(
    p: &Potential,
    omega: f64,
    tau: f64,
    h: f64,
    opts: &JostOptions,
) -> Result<f64> {
    let f = |t: f64| -> Result<f64> { Ok(jost(p, omega, Complex64::new(0.0, t), opts)?.f.re) };
    let central = |hh: f64| -> Result<f64> { Ok((f(tau + hh)? - f(tau - hh)?) / (2.0 * hh)) };
    let d1 = central(h)?;
    let d2 = central(0.5 * h)?;
    let d3 = central(0.25 * h)?;
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}

/// Relative residual of 4 xi_j^2 / C_j = -s_j^2 Fdot(i xi_j)^2 for level `j` (0-based,
/// ascending xi) of a forward solution.
pub fn jost_identity_check(
    p: &Potential,
    omega: f64,
    fwd: &Forward,
    j: usize,
    step: Option<f64>,
) -> Result<IdentityCheck> {
    const OP: &str = "jost_identity_check";
    let lv = fwd
        .levels
        .get(j)
        .ok_or_else(|| err!(MODULE, OP, InvalidInput, "level {} out of range", j))?;
    let xi = lv.xi;
    let mut gap = f64::INFINITY;
    if j > 0 {
        gap = gap.min(xi - fwd.levels[j - 1].xi);
    }
    if j + 1 < fwd.levels.len() {
        gap = gap.min(fwd.levels[j + 1].xi - xi);
    }
    gap = gap.min(xi);
    let h = step.unwrap_or((gap / 8.0).min(xi / 100.0));
    if h > gap / 4.0 {
        return Err(err!(
            MODULE,
            OP,
            InvalidInput,
            "step {} exceeds a quarter of the spectral gap {}",
            h,
            gap
        ));
    }
    let opts = JostOptions::default();
    let d = jost_tau_derivative(p, omega, xi, h, &opts)?;
    let f0 = jost(p, omega, Complex64::new(0.0, xi), &opts)?.f.re;
    let lhs = 4.0 * xi * xi / lv.c;
    let rhs = (2.0 * lv.log_s + 2.0 * d.abs().ln()).exp();
    Ok(IdentityCheck {
        j,
        xi,
        lhs,
        rhs,
        d_f_dtau: d,
        f_at_zero: f0,
        step: h,
        residual: (lhs - rhs).abs() / lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ode::{integrate_piecewise, Tolerance};
    use crate::potentials::Decay;
    use std::sync::Arc;

    /// Direct ODE route: g'' + 2ik g' = V g integrated inward from the same Born data.
    fn jost_ode(p: &Potential, omega: f64, k: Complex64) -> Complex64 {
        let x_tail = tail_radius(p, omega, 1e-6);
        let (g, d) = born_tail(p, omega, k, x_tail);
        let gp = d - Complex64::new(0.0, 1.0) * k * g;
        let w2 = omega * omega;
        let rhs = |x: f64, y: &[f64; 4]| {
            let g = Complex64::new(y[0], y[1]);
            let gp = Complex64::new(y[2], y[3]);
            let gpp = -w2 * p.value(x) * g - Complex64::new(0.0, 2.0) * k * gp;
            [gp.re, gp.im, gpp.re, gpp.im]
        };
        let tol = Tolerance {
            rtol: 1e-12,
            atol: 1e-14 * g.norm(),
        };
        let y = integrate_piecewise(rhs, x_tail, 0.0, [g.re, g.im, gp.re, gp.im], &p.breakpoints, tol, 10_000_000)
            .unwrap();
        Complex64::new(y[0], y[1])
    }

    fn zero_potential() -> Potential {
        Potential::from_closure(
            "zero",
            Decay {
                a: 1.0,
                k1: 4,
                k2: 4,
                x_tail: 1.0,
            },
            0,
            Arc::new(|_, _| 0.0),
        )
    }

    #[test]
    fn zero_potential_gives_one() {
        let p = zero_potential();
        for k in [Complex64::new(0.0, 2.0), Complex64::new(3.0, 0.5), Complex64::new(-1.0, 0.0)] {
            let s = jost(&p, 1.0, k, &JostOptions::default()).unwrap();
            assert!((s.f - 1.0).norm() < 1e-13, "{}", s.f);
        }
    }

    #[test]
    fn square_well_closed_form() {
        // F(k) = cos(mu) - i k sin(mu)/mu times e^{ik}, mu = sqrt(k^2 + omega^2)
        let p = Potential::square_well();
        let w = 3.0;
        for k in [Complex64::new(0.0, 1.3), Complex64::new(2.0, 0.7), Complex64::new(1.5, 0.0)] {
            let mu = (k * k + w * w).sqrt();
            let exact = ((mu).cos() - Complex64::new(0.0, 1.0) * k * mu.sin() / mu) * (Complex64::new(0.0, 1.0) * k).exp();
            let s = jost(&p, w, k, &JostOptions::default()).unwrap();
            assert!((s.f - exact).norm() < 1e-11 * exact.norm().max(1.0), "{} vs {}", s.f, exact);
        }
    }

    #[test]
    fn q1_agrees_with_ode_route() {
        let p = Potential::q1();
        for k in [Complex64::new(0.0, 2.5), Complex64::new(0.0, 100.0), Complex64::new(1.7, 0.3)] {
            let a = jost(&p, 4.0, k, &JostOptions::default()).unwrap().f;
            let b = jost_ode(&p, 4.0, k);
            assert!((a - b).norm() < 1e-8 * a.norm().max(1e-300), "{} vs {}", a, b);
        }
    }

    #[test]
    fn reflection_symmetry_on_real_axis() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let p = Potential::q1();
        for _ in 0..20 {
            let k: f64 = rng.gen_range(0.2..12.0);
            let a = jost(&p, 3.0, Complex64::new(k, 0.0), &JostOptions::default()).unwrap().f;
            let b = jost(&p, 3.0, Complex64::new(-k, 0.0), &JostOptions::default()).unwrap().f;
            assert!((a - b.conj()).norm() < 1e-9 * a.norm(), "k = {}", k);
        }
    }

    #[test]
    fn identity_holds_for_q1_levels() {
        let p = Potential::q1();
        let fwd = super::super::forward(&p, 10.0, &Default::default()).unwrap();
        for j in 0..fwd.levels.len() {
            let r = jost_identity_check(&p, 10.0, &fwd, j, None).unwrap();
            assert!(r.d_f_dtau != 0.0);
        }
        let mid = fwd.levels.len() / 2;
        let r = jost_identity_check(&p, 10.0, &fwd, mid, None).unwrap();
        assert!(r.residual <= 1e-3, "{:?}", r);
    }

    #[test]
    fn identity_holds_for_smoothed_well() {
        let p = Potential::smoothed_well(0.1);
        let fwd = super::super::forward(&p, 10.0, &Default::default()).unwrap();
        for j in 0..fwd.levels.len() {
            let r = jost_identity_check(&p, 10.0, &fwd, j, None).unwrap();
            assert!(r.residual <= 1e-2, "{:?}", r);
        }
    }

    #[test]
    fn zeros_of_f_count_dirichlet_levels() {
        let p = Potential::q1();
        let w = 10.0;
        let fwd = super::super::forward(&p, w, &Default::default()).unwrap();
        let opts = JostOptions::default();
        let mut changes = 0;
        let n = 400;
        let taus: Vec<f64> = (0..=n).map(|i| 1e-3 * (w / 1e-3).powf(i as f64 / n as f64)).collect();
        let mut prev = jost(&p, w, Complex64::new(0.0, taus[0]), &opts).unwrap().f.re;
        for &t in &taus[1..] {
            let f = jost(&p, w, Complex64::new(0.0, t), &opts).unwrap().f.re;
            if f.signum() != prev.signum() {
                changes += 1;
            }
            prev = f;
        }
        assert_eq!(changes, fwd.levels.len());
        // F(i tau) - 1 ~ -omega^2 int Q / (2 tau): about -0.39 at tau = 100, so the
        // approach to 1 is checked at tau = 1e4.
        let born = -w * w * std::f64::consts::FRAC_PI_4 / 200.0;
        let at100 = jost(&p, w, Complex64::new(0.0, 100.0), &opts).unwrap().f;
        assert!(((at100.re - 1.0) / born - 1.0).abs() < 0.2, "{}", at100);
        let far = jost(&p, w, Complex64::new(0.0, 1e4), &opts).unwrap().f;
        assert!((far - 1.0).norm() < 1e-2, "{}", far);
    }
}
