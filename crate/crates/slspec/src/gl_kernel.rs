//! The Gelfand-Levitan kernel Phi(x, y, w) of the continuous spectral part and the
//! solution A(x, y, w) of A + int_0^x A(x, s) Phi(s, y) ds + Phi = 0 on 0 <= y <= x.
//!
//! Phi(x, y) = Psi(x + y) - Psi(|x - y|) with
//! Psi(c) = (w/pi) int_0^inf (1 - cos kc) g(k) dk,  g(k) = 1 / (k (k + sqrt(k^2 + w))).
//! On [1, inf) g = 1/(2k^2) + r(k) with r = -w / (2k^2 (k + sqrt(k^2 + w))^2); the 1/(2k^2)
//! part integrates in closed form through Si, and r decays like k^-4.

use crate::err;
use crate::error::Result;
use crate::numerics::quad::{simpson_weights, GaussRule};
use crate::numerics::special::si;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

const MODULE: &str = "gl_kernel";
type C = Complex64;

pub const PHI_TOL: f64 = 1e-8;
pub const SOLVE_TOL: f64 = 1e-6;
const MAX_CUTOFF: f64 = 1e8;
/// Geometric panels on (0, 1] down to this width.
const INNER_DEPTH: i32 = 40;

fn rule() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(16))
}

fn check_w(op: &'static str, w: C) -> Result<()> {
    if !(w.re > 0.0) || !w.im.is_finite() {
        return Err(err!(MODULE, op, OutOfDomain, "need Re w > 0, got {w}"));
    }
    Ok(())
}

fn root(k: f64, w: C) -> C {
    (C::new(k * k, 0.0) + w).sqrt()
}

fn remainder(k: f64, w: C) -> C {
    let d = k + root(k, w);
    -w / (2.0 * k * k * d * d)
}

/// Sum of a smooth integrand over (0, 1] on geometric panels, each at most `4/c` wide.
fn inner<F: FnMut(f64) -> C>(c: f64, mut f: F) -> C {
    let mut s = C::new(0.0, 0.0);
    let mut hi = 1.0;
    for _ in 0..INNER_DEPTH {
        let lo = 0.5 * hi;
        s += panels(lo, hi, c, &mut f);
        hi = lo;
    }
    s
}

/// Gauss-Legendre sum over [a, b] split so no piece is wider than 4/c.
fn panels<F: FnMut(f64) -> C>(a: f64, b: f64, c: f64, f: &mut F) -> C {
    let m = if c > 0.0 {
        ((b - a) * c / 4.0).ceil().max(1.0) as usize
    } else {
        1
    };
    rule().composite(a, b, m, f)
}

/// int_1^K of the integrand on doubling panels [2^j, 2^{j+1}].
fn outer<F: FnMut(f64) -> C>(c: f64, cutoff: f64, mut f: F) -> C {
    let mut s = C::new(0.0, 0.0);
    let mut a = 1.0;
    while a < cutoff {
        let b = (2.0 * a).min(cutoff);
        s += panels(a, b, c, &mut f);
        a = b;
    }
    s
}

fn cutoff(op: &'static str, k: f64) -> Result<f64> {
    if !k.is_finite() || k > MAX_CUTOFF {
        return Err(err!(MODULE, op, NotConverged, "tail cutoff {k:.3e} exceeds {MAX_CUTOFF:e}"));
    }
    Ok(2f64.powi(k.max(2.0).log2().ceil() as i32))
}

/// Psi(c) for c >= 0.
pub fn psi(c: f64, w: C, tol: f64) -> Result<C> {
    check_w("psi", w)?;
    if c == 0.0 {
        return Ok(C::new(0.0, 0.0));
    }
    let head = inner(c, |k| {
        let s = (0.5 * k * c).sin();
        2.0 * s * s / (k * (k + root(k, w)))
    });
    let closed = 0.5 * (1.0 - c.cos() + c * (FRAC_PI_2 - si(c)));
    let wn = w.norm();
    let k = (wn / (12.0 * tol)).cbrt().min(c * c * wn / (16.0 * tol));
    let k = cutoff("psi", k)?;
    let tail = outer(c, k, |k| {
        let s = (0.5 * k * c).sin();
        2.0 * s * s * remainder(k, w)
    });
    Ok(w / PI * (head + closed + tail))
}

/// Psi'(c) for c > 0; at c = 0 the right limit w/4 is returned.
pub fn psi_prime(c: f64, w: C, tol: f64) -> Result<C> {
    check_w("psi_prime", w)?;
    if c == 0.0 {
        return Ok(w / 4.0);
    }
    let head = inner(c, |k| (k * c).sin() / (k + root(k, w)));
    let closed = 0.5 * (FRAC_PI_2 - si(c));
    let wn = w.norm();
    let k = (wn / (4.0 * c * tol)).cbrt().min(c * wn / (8.0 * tol));
    let k = cutoff("psi_prime", k)?;
    let tail = outer(c, k, |k| (k * c).sin() * k * remainder(k, w));
    Ok(w / PI * (head + closed + tail))
}

pub fn phi_kernel(x: f64, y: f64, w: C, tol: f64) -> Result<C> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(err!(MODULE, "phi_kernel", InvalidInput, "need x, y >= 0"));
    }
    if !(tol > 0.0) {
        return Err(err!(MODULE, "phi_kernel", InvalidInput, "tol must be positive"));
    }
    check_w("phi_kernel", w)?;
    if x == 0.0 || y == 0.0 {
        return Ok(C::new(0.0, 0.0));
    }
    Ok(psi(x + y, w, tol)? - psi((x - y).abs(), w, tol)?)
}

/// d/dx Phi(x, x, w) = (2w/pi) [I1(a) - a I2(a)], a = w x^2, with
/// I1 = int sin^2 u / (u (u + sqrt(u^2 + a))) and I2 = int sin^2 u / (u (u + sqrt)^2 sqrt).
pub fn phi_diag_derivative(x: f64, w: C, tol: f64) -> Result<C> {
    if !(x >= 0.0) {
        return Err(err!(MODULE, "phi_diag_derivative", InvalidInput, "need x >= 0"));
    }
    check_w("phi_diag_derivative", w)?;
    let a = w * x * x;
    let an = a.norm();
    let s2 = |u: f64| {
        let s = u.sin();
        s * s
    };
    let i1_head = inner(2.0, |u| {
        if an == 0.0 {
            C::new(s2(u) / (2.0 * u * u), 0.0)
        } else {
            s2(u) / (u * (u + root(u, a)))
        }
    });
    let i1_closed = 0.25 * (1.0 - 2f64.cos() + 2.0 * (FRAC_PI_2 - si(2.0)));
    let (i1_tail, i2) = if an == 0.0 {
        (C::new(0.0, 0.0), C::new(0.0, 0.0))
    } else {
        let k = cutoff("phi_diag_derivative", (an / (24.0 * tol)).cbrt())?;
        let i1_tail = outer(2.0, k, |u| s2(u) * remainder(u, a));
        let f2 = |u: f64| {
            let r = root(u, a);
            let d = u + r;
            a * s2(u) / (u * d * d * r)
        };
        let k = cutoff("phi_diag_derivative", (an / (12.0 * tol)).cbrt())?;
        (i1_tail, inner(2.0, f2) + outer(2.0, k, f2))
    };
    Ok(2.0 * w / PI * (i1_head + i1_closed + i1_tail - i2))
}

/// Psi and Psi' on the multiples m*h, m = 0..=m_max.
#[derive(Debug, Clone)]
struct PsiTable {
    psi: Vec<C>,
    dpsi: Vec<C>,
}

impl PsiTable {
    fn new(h: f64, m_max: usize, w: C, tol: f64) -> Result<Self> {
        let vals: Vec<(C, C)> = (0..=m_max)
            .into_par_iter()
            .map(|m| {
                let c = m as f64 * h;
                Ok((psi(c, w, tol)?, psi_prime(c, w, tol)?))
            })
            .collect::<Result<_>>()?;
        let (psi, dpsi) = vals.into_iter().unzip();
        Ok(Self { psi, dpsi })
    }

    fn phi(&self, i: usize, j: usize) -> C {
        self.psi[i + j] - self.psi[i.abs_diff(j)]
    }

    /// d/dx Phi(x_i, y_j) for j <= i, the diagonal taken from the side y < x.
    fn phi_x(&self, i: usize, j: usize) -> C {
        self.dpsi[i + j] - self.dpsi[i - j]
    }
}

#[derive(Debug, Clone)]
pub struct KernelField {
    pub w: C,
    pub grid: Vec<f64>,
    /// a[i][j] = A(x_i, x_j), j <= i.
    pub a: Vec<Vec<C>>,
    /// a_x[i][j] = dA/dx (x_i, x_j).
    pub a_x: Vec<Vec<C>>,
    pub diag: Vec<C>,
    pub diag_deriv: Vec<C>,
    pub residual: f64,
    /// sup |Phi| over the grid triangle.
    pub phi_sup: f64,
}

impl KernelField {
    pub fn sup_abs(&self) -> f64 {
        self.a
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// Simpson-weighted L2 norm of the slice A(x_i, .).
    pub fn slice_norm(&self, i: usize) -> f64 {
        let w = simpson_weights(i, self.step());
        self.a[i]
            .iter()
            .zip(&w)
            .map(|(z, wl)| wl * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

fn nodes(op: &'static str, x_max: f64, n: usize) -> Result<(Vec<f64>, f64)> {
    if !(x_max > 0.0) || !x_max.is_finite() {
        return Err(err!(MODULE, op, InvalidInput, "X must be positive"));
    }
    if n < 16 {
        return Err(err!(MODULE, op, InvalidInput, "need at least 16 nodes, got {n}"));
    }
    let h = x_max / (n - 1) as f64;
    Ok(((0..n).map(|i| i as f64 * h).collect(), h))
}

/// I + K_x restricted to the first i+1 nodes: (M a)_j = a_j + sum_l Phi(x_j, x_l) w_l a_l.
fn slice_operator(t: &PsiTable, i: usize, wts: &[f64]) -> DMatrix<C> {
    DMatrix::from_fn(i + 1, i + 1, |j, l| {
        let d = if j == l { 1.0 } else { 0.0 };
        C::new(d, 0.0) + t.phi(j, l) * wts[l]
    })
}

/// Nystrom solution of the kernel equation on n uniform nodes of [0, X].
pub fn solve_kernel(x_max: f64, w: C, n: usize, tol: f64) -> Result<KernelField> {
    let (grid, h) = nodes("solve_kernel", x_max, n)?;
    check_w("solve_kernel", w)?;
    let phi_tol = (tol * 1e-3).min(1e-10);
    let table = PsiTable::new(h, 2 * (n - 1), w, phi_tol)?;
    let mut a = Vec::with_capacity(n);
    let mut a_x = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    let mut diag_deriv = Vec::with_capacity(n);
    let mut residual: f64 = 0.0;
    let mut phi_sup: f64 = 0.0;
    for i in 0..n {
        let wts = simpson_weights(i, h);
        let m = slice_operator(&table, i, &wts);
        let rhs = nalgebra::DVector::from_fn(i + 1, |j, _| -table.phi(i, j));
        phi_sup = rhs.iter().map(|z| z.norm()).fold(phi_sup, f64::max);
        let lu = m.clone().lu();
        let sol = lu.solve(&rhs).ok_or_else(|| {
            err!(MODULE, "solve_kernel", Singular, "slice {i} operator is singular")
        })?;
        residual = residual.max((&m * &sol - &rhs).camax());
        let ai = sol[i];
        let rhs_x = nalgebra::DVector::from_fn(i + 1, |j, _| -(ai * table.phi(i, j) + table.phi_x(i, j)));
        let sol_x = lu.solve(&rhs_x).ok_or_else(|| {
            err!(MODULE, "solve_kernel", Singular, "slice {i} operator is singular")
        })?;
        residual = residual.max((&m * &sol_x - &rhs_x).camax());
        let mut integral = C::new(0.0, 0.0);
        for l in 0..=i {
            integral += wts[l] * (sol_x[l] * table.phi(l, i) + sol[l] * table.phi_x(i, l));
        }
        let dphi = phi_diag_derivative(grid[i], w, phi_tol)?;
        diag.push(ai);
        diag_deriv.push(-(dphi + ai * table.phi(i, i) + integral));
        a.push(sol.iter().copied().collect::<Vec<_>>());
        a_x.push(sol_x.iter().copied().collect::<Vec<_>>());
    }
    if !(residual <= tol) {
        return Err(err!(
            MODULE,
            "solve_kernel",
            NotConverged,
            "discrete residual {residual:.3e} above {tol:.1e}"
        ));
    }
    Ok(KernelField {
        w,
        grid,
        a,
        a_x,
        diag,
        diag_deriv,
        residual,
        phi_sup,
    })
}

/// Min over random trial vectors of ||(I+K)h|| / ||h|| in the Simpson-weighted norm at x = X.
pub fn coercivity_check(x_max: f64, w: C, trials: usize) -> Result<f64> {
    coercivity_check_with(x_max, w, trials, 64, 0x5eed)
}

pub fn coercivity_check_with(x_max: f64, w: C, trials: usize, n: usize, seed: u64) -> Result<f64> {
    let (_, h) = nodes("coercivity_check", x_max, n)?;
    check_w("coercivity_check", w)?;
    let table = PsiTable::new(h, 2 * (n - 1), w, 1e-10)?;
    let wts = simpson_weights(n - 1, h);
    let m = slice_operator(&table, n - 1, &wts);
    let norm = |v: &nalgebra::DVector<C>| {
        v.iter()
            .zip(&wts)
            .map(|(z, wl)| wl * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 1.0;
    for t in 0..trials {
        let v = nalgebra::DVector::from_fn(n, |_, _| {
            C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let nv = norm(&v);
        let ratio = if nv == 0.0 { 1.0 } else { norm(&(&m * &v)) / nv };
        best = if t == 0 { ratio } else { best.min(ratio) };
    }
    Ok(best)
}

/// Ratio ||(I+K)h|| / ||h|| for one given trial vector (1 for h = 0).
pub fn coercivity_ratio(x_max: f64, w: C, h_vec: &[C]) -> Result<f64> {
    let n = h_vec.len();
    let (_, h) = nodes("coercivity_ratio", x_max, n)?;
    check_w("coercivity_ratio", w)?;
    let table = PsiTable::new(h, 2 * (n - 1), w, 1e-10)?;
    let wts = simpson_weights(n - 1, h);
    let m = slice_operator(&table, n - 1, &wts);
    let v = nalgebra::DVector::from_column_slice(h_vec);
    let norm = |v: &nalgebra::DVector<C>| {
        v.iter()
            .zip(&wts)
            .map(|(z, wl)| wl * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let nv = norm(&v);
    Ok(if nv == 0.0 { 1.0 } else { norm(&(&m * &v)) / nv })
}

/// Smallest singular value of I + K_X in the Simpson-weighted norm.
pub fn min_singular_value(x_max: f64, w: C, n: usize) -> Result<f64> {
    let (_, h) = nodes("min_singular_value", x_max, n)?;
    check_w("min_singular_value", w)?;
    let table = PsiTable::new(h, 2 * (n - 1), w, 1e-10)?;
    let wts = simpson_weights(n - 1, h);
    let m = slice_operator(&table, n - 1, &wts);
    let s: Vec<f64> = wts.iter().map(|v| v.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |j, l| m[(j, l)] * (s[j] / s[l]));
    let sv = scaled.singular_values();
    Ok(sv.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Max over the grid of |dA/dv - i dA/du| for w = u + iv, by centred differences.
pub fn cauchy_riemann_defect(x_max: f64, w: C, n: usize, delta: f64) -> Result<f64> {
    let solve = |dw: C| solve_kernel(x_max, w + dw, n, SOLVE_TOL);
    let (up, um) = (solve(C::new(delta, 0.0))?, solve(C::new(-delta, 0.0))?);
    let (vp, vm) = (solve(C::new(0.0, delta))?, solve(C::new(0.0, -delta))?);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let du = (up.a[i][j] - um.a[i][j]) / (2.0 * delta);
            let dv = (vp.a[i][j] - vm.a[i][j]) / (2.0 * delta);
            worst = worst.max((dv - C::i() * du).norm());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct GrowthFit {
    pub c: f64,
    pub alpha: f64,
    /// (|w|, sup |A|) per sweep point.
    pub samples: Vec<(f64, f64)>,
    pub monotone: bool,
}

/// Least-squares fit of ln sup|A| = ln C + alpha ln(1 + |w|) over a sweep of real w.
pub fn growth_fit(x_max: f64, ws: &[f64], n: usize) -> Result<GrowthFit> {
    if ws.len() < 2 {
        return Err(err!(MODULE, "growth_fit", InvalidInput, "need at least two w values"));
    }
    let samples: Vec<(f64, f64)> = ws
        .iter()
        .map(|&w| Ok((w, solve_kernel(x_max, C::new(w, 0.0), n, SOLVE_TOL)?.sup_abs())))
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|(w, s)| ((1.0 + w).ln(), s.ln()))
        .collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let alpha = sxy / sxx;
    let mut sorted = samples.clone();
    sorted.sort_by(|p, q| p.0.total_cmp(&q.0));
    let monotone = sorted.windows(2).all(|p| p[1].1 >= p[0].1);
    Ok(GrowthFit {
        c: (my - alpha * mx).exp(),
        alpha,
        samples,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn phi_vanishes_on_axes_and_is_symmetric() {
        let w = c(2.0, 1.0);
        assert_eq!(phi_kernel(0.0, 0.7, w, 1e-10).unwrap(), c(0.0, 0.0));
        let p = phi_kernel(0.3, 1.1, w, 1e-10).unwrap();
        let q = phi_kernel(1.1, 0.3, w, 1e-10).unwrap();
        assert!((p - q).norm() < 1e-14);
    }

    #[test]
    fn rejects_left_half_plane() {
        assert!(phi_kernel(1.0, 1.0, c(0.0, 1.0), 1e-8).is_err());
        assert!(solve_kernel(1.0, c(-1.0, 0.0), 32, 1e-6).is_err());
    }

    /// Direct quadrature of the defining integral up to k = 10^6 plus the averaged tail.
    fn brute_phi(x: f64, y: f64, w: f64) -> f64 {
        let r = GaussRule::new(20);
        let kmax = 1e6;
        let f = |k: f64| {
            (k * x).sin() * (k * y).sin() * w / (k * (k + (k * k + w).sqrt())) * 2.0 / PI
        };
        let mut s = 0.0;
        let mut a = 0.0;
        while a < kmax {
            let b = a + 1.0;
            s += r.integrate(a, b, f);
            a = b;
        }
        // sin kx sin ky averages to cos(k(x-y))/2; for x = y the tail is w/(2 pi K)
        s + if x == y { w / (2.0 * PI * kmax) } else { 0.0 }
    }

    #[test]
    fn phi_matches_high_cutoff_quadrature() {
        let oracle = brute_phi(1.0, 1.0, 1.0);
        let v = phi_kernel(1.0, 1.0, c(1.0, 0.0), 1e-10).unwrap();
        assert!((v.re - oracle).abs() < 1e-8, "{} vs {}", v.re, oracle);
        assert!(v.im.abs() < 1e-14);
    }

    #[test]
    fn psi_prime_matches_differences() {
        let w = c(1.0, 2.0);
        for &cc in &[0.05, 0.7, 3.0] {
            let h = 1e-4;
            let fd = (psi(cc + h, w, 1e-13).unwrap() - psi(cc - h, w, 1e-13).unwrap()) / (2.0 * h);
            let d = psi_prime(cc, w, 1e-12).unwrap();
            assert!((fd - d).norm() < 1e-7, "c = {cc}: {fd} vs {d}");
        }
    }

    #[test]
    fn diag_derivative_at_origin() {
        for w in [c(1.0, 0.0), c(4.0, 0.0), c(1.0, 5.0)] {
            let d = phi_diag_derivative(0.0, w, 1e-10).unwrap();
            assert!((d - w / 2.0).norm() < 1e-8, "{d}");
        }
    }

    #[test]
    fn diag_derivative_matches_differences_and_psi() {
        let w = c(1.0, 0.0);
        let x = 1.0;
        let h = 1e-4;
        let fd = (phi_kernel(x + h, x + h, w, 1e-13).unwrap()
            - phi_kernel(x - h, x - h, w, 1e-13).unwrap())
            / (2.0 * h);
        let d = phi_diag_derivative(x, w, 1e-10).unwrap();
        assert!((fd - d).norm() < 1e-5);
        let via_psi = 2.0 * psi_prime(2.0 * x, w, 1e-12).unwrap();
        assert!((via_psi - d).norm() < 1e-8);
    }

    #[test]
    fn diagonal_self_similarity() {
        let (x, w) = (1.0, c(1.0, 0.0));
        let base = phi_kernel(x, x, w, 1e-11).unwrap();
        for lam in [0.5, 2.0] {
            let scaled = lam * phi_kernel(lam * x, lam * x, w / (lam * lam), 1e-11).unwrap();
            assert!((scaled - base).norm() < 1e-9);
            // differentiated form: d/dx Phi(x,x,w) = lam^2 (d/dx Phi)(lam x, w / lam^2)
            let d = phi_diag_derivative(x, w, 1e-11).unwrap();
            let ds = lam * lam * phi_diag_derivative(lam * x, w / (lam * lam), 1e-11).unwrap();
            assert!((d - ds).norm() < 1e-9);
        }
    }

    #[test]
    fn kernel_vanishes_with_w() {
        let k = solve_kernel(2.0, c(1e-8, 0.0), 32, 1e-6).unwrap();
        assert!(k.sup_abs() <= 1e-6);
        assert_eq!(k.a[0][0], c(0.0, 0.0));
    }

    #[test]
    fn kernel_residual_norm_bound_and_origin_slope() {
        for w in [c(1.0, 0.0), c(4.0, 0.0), c(1.0, 5.0)] {
            let k = solve_kernel(2.0, w, 128, 1e-6).unwrap();
            assert!(k.residual <= 1e-6);
            assert_eq!(k.diag[0], c(0.0, 0.0));
            assert!((k.diag_deriv[0] + w / 2.0).norm() < 1e-8);
            for i in 1..k.grid.len() {
                assert!(k.slice_norm(i) <= k.grid[i].sqrt() * k.phi_sup * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn diag_derivative_matches_differences_of_diagonal() {
        let k = solve_kernel(2.0, c(2.0, 1.0), 129, 1e-6).unwrap();
        let h = k.step();
        for i in [16, 64, 100] {
            let fd = (k.diag[i + 1] - k.diag[i - 1]) / (2.0 * h);
            assert!((fd - k.diag_deriv[i]).norm() < 2e-3, "{i}: {fd} vs {}", k.diag_deriv[i]);
        }
    }

    #[test]
    fn neumann_oracle() {
        let n = 64;
        let w = c(1.0, 0.0);
        let k = solve_kernel(2.0, w, n, 1e-6).unwrap();
        let g = &k.grid;
        let h = k.step();
        let phi = |x: f64, y: f64| phi_kernel(x, y, w, 1e-10).unwrap();
        let mut worst: f64 = 0.0;
        let mut sup_phi: f64 = 0.0;
        for i in (4..n).step_by(9) {
            let wts = simpson_weights(i, h);
            for j in (0..=i).step_by(5) {
                let conv: C = (0..=i).map(|l| wts[l] * phi(g[i], g[l]) * phi(g[l], g[j])).sum();
                let approx = -phi(g[i], g[j]) + conv;
                worst = worst.max((k.a[i][j] - approx).norm());
                sup_phi = sup_phi.max(phi(g[i], g[j]).norm());
            }
        }
        let x = 2.0;
        assert!(worst <= x * x * sup_phi.powi(3), "{worst} vs {}", sup_phi.powi(3));
    }

    #[test]
    fn coercivity_real_and_complex_w() {
        assert!(coercivity_check(2.0, c(1.0, 0.0), 100).unwrap() >= 0.999);
        assert!(coercivity_check(2.0, c(1.0, 5.0), 100).unwrap() >= 0.999);
        let zero = vec![c(0.0, 0.0); 32];
        assert_eq!(coercivity_ratio(2.0, c(1.0, 0.0), &zero).unwrap(), 1.0);
        assert!(min_singular_value(2.0, c(1.0, 5.0), 48).unwrap() >= 1.0 - 1e-6);
    }

    #[test]
    fn holomorphic_in_w() {
        let d = cauchy_riemann_defect(2.0, c(1.0, 1.0), 32, 1e-3).unwrap();
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn growth_is_polynomial_and_monotone() {
        let fit = growth_fit(2.0, &[0.5, 1.0, 2.0, 4.0, 8.0], 32).unwrap();
        assert!(fit.monotone);
        assert!(fit.alpha > 0.0 && fit.alpha < 2.0, "{}", fit.alpha);
        let at4 = fit.samples.iter().find(|s| s.0 == 4.0).unwrap().1;
        assert_relative_eq!(at4, fit.c * 5f64.powf(fit.alpha), max_relative = 0.5);
    }
}
