//! Inverse maps from discrete spectral data back to a potential.
//!
//! All three formulas are second derivatives of ln det M(x) where M' is a rank-one update
//! sigma * v v^T. With u = M^{-1} v:
//!   (ln det M)'  = sigma v.u
//!   (ln det M)'' = 2 sigma v'.u - sigma^2 (v.u)^2
//! W and T grow like e^{(xi_s + xi_r) x}; they are scaled symmetrically by e^{-xi x} per
//! row and column and solved in binary multiprecision.

use crate::err;
use crate::error::Result;
use crate::forward_spectral::SpectralData;
use crate::gl_kernel::{solve_kernel, KernelField, SOLVE_TOL};
use crate::numerics::linalg::{mp, Lu, Mp, Real};
use crate::numerics::quad::{adaptive, GaussRule};
use crate::potentials::Potential;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::ops::{Add, Div, Mul, Neg, Sub};

const MODULE: &str = "reconstruct";
/// Working precision of the determinant solves.
pub const MP_BITS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMatrix {
    pub n: usize,
    /// Row-major entries of E^{-1} M E^{-1}.
    pub entries: Vec<f64>,
    pub log_scale: f64,
}

impl ScaledMatrix {
    pub fn get(&self, s: usize, r: usize) -> f64 {
        self.entries[s * self.n + r]
    }

    /// (ln|det M|, sign det M)
    pub fn log_abs_det(&self) -> Result<(f64, f64)> {
        if self.n == 0 {
            return Ok((self.log_scale, 1.0));
        }
        let lu = Lu::factor(self.n, self.entries.iter().map(|v| mp(*v, MP_BITS)).collect())
            .map_err(|e| err!(MODULE, "log_abs_det", Singular, "{e}"))?;
        let (l, s) = lu.log_abs_det();
        Ok((l + self.log_scale, s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gl0,
    Glm,
    LaxLevermore,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gl0" => Some(Self::Gl0),
            "glm" => Some(Self::Glm),
            "ll" | "lax_levermore" => Some(Self::LaxLevermore),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionResult {
    pub grid: Vec<f64>,
    pub q_rec: Vec<f64>,
    pub q_int: Vec<f64>,
    pub method: Method,
    /// Nodes where det changed sign or the solve failed.
    pub singular: Vec<bool>,
    pub q_ref: Option<Vec<f64>>,
    pub q_int_ref: Option<Vec<f64>>,
    /// sup |int Q_ref - int Q_rec| over the non-singular nodes.
    pub sup_error: Option<f64>,
    /// Trapezoid L1 norm of Q_ref - Q_rec over the non-singular nodes.
    pub l1_error: Option<f64>,
}

impl ReconstructionResult {
    fn new(grid: Vec<f64>, method: Method, rows: Vec<Option<(f64, f64)>>) -> Self {
        let singular: Vec<bool> = rows.iter().map(|r| r.is_none()).collect();
        let (q_rec, q_int) = rows
            .into_iter()
            .map(|r| r.unwrap_or((f64::NAN, f64::NAN)))
            .unzip();
        Self {
            grid,
            q_rec,
            q_int,
            method,
            singular,
            q_ref: None,
            q_int_ref: None,
            sup_error: None,
            l1_error: None,
        }
    }

    /// Fills the reference columns and error metrics against `p`.
    pub fn compare(&mut self, p: &Potential) {
        let q_ref: Vec<f64> = self.grid.iter().map(|&x| p.value(x)).collect();
        let q_int_ref = primitive(p, &self.grid);
        let mut sup: f64 = 0.0;
        let mut l1 = 0.0;
        for i in 0..self.grid.len() {
            if !self.singular[i] {
                sup = sup.max((q_int_ref[i] - self.q_int[i]).abs());
            }
            if i > 0 && !self.singular[i] && !self.singular[i - 1] {
                let e0 = (q_ref[i - 1] - self.q_rec[i - 1]).abs();
                let e1 = (q_ref[i] - self.q_rec[i]).abs();
                l1 += 0.5 * (e0 + e1) * (self.grid[i] - self.grid[i - 1]);
            }
        }
        self.q_ref = Some(q_ref);
        self.q_int_ref = Some(q_int_ref);
        self.sup_error = Some(sup);
        self.l1_error = Some(l1);
    }
}

/// int_0^x Q at each grid node.
pub fn primitive(p: &Potential, grid: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut prev = 0.0;
    grid.iter()
        .map(|&x| {
            if x > prev {
                acc += adaptive(|t| p.value(t), prev, x, &p.breakpoints, 1e-13, 1e-12, 2000).value;
            }
            prev = x;
            acc
        })
        .collect()
}

fn check_grid(op: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(err!(MODULE, op, InvalidInput, "empty grid"));
    }
    if grid[0] < 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(err!(MODULE, op, InvalidInput, "grid must be nonnegative and strictly increasing"));
    }
    Ok(())
}

fn check_distinct(op: &'static str, xi: &[f64]) -> Result<()> {
    let mut s = xi.to_vec();
    s.sort_by(f64::total_cmp);
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(err!(MODULE, op, InvalidInput, "repeated xi values"));
    }
    Ok(())
}

/// Scaled W, v_hat = e^{-xi x} sh(xi x) and v_hat' = e^{-xi x} xi ch(xi x), in multiprecision.
fn w_scaled_mp(x: f64, xi: &[f64], d: &[f64], bits: usize) -> (Vec<Mp>, Vec<Mp>, Vec<Mp>) {
    let n = xi.len();
    let one = mp(1.0, bits);
    let half = mp(0.5, bits);
    let two = mp(2.0, bits);
    let xm = mp(x, bits);
    let xs: Vec<Mp> = xi.iter().map(|v| mp(*v, bits)).collect();
    let e: Vec<Mp> = xs.iter().map(|v| Real::exp(&-(&(&two * v) * &xm))).collect();
    let mut m = Vec::with_capacity(n * n);
    for s in 0..n {
        for r in 0..n {
            let v = if s == r {
                let a = &(&one - &(&e[s] * &e[s])) / &(&two * &xs[s]);
                let b = &(&(&two * &xm) - &mp(d[s], bits)) * &e[s];
                &a - &b
            } else {
                let a = &(&one - &(&e[s] * &e[r])) / &(&xs[s] + &xs[r]);
                let b = &(&e[s] - &e[r]) / &(&xs[r] - &xs[s]);
                &a - &b
            };
            m.push(v);
        }
    }
    let v = e.iter().map(|ei| &(&one - ei) * &half).collect();
    let vp = e
        .iter()
        .zip(&xs)
        .map(|(ei, x)| &(&(&one + ei) * x) * &half)
        .collect();
    (m, v, vp)
}

pub fn build_w(x: f64, sd: &SpectralData) -> Result<ScaledMatrix> {
    if !(x >= 0.0) {
        return Err(err!(MODULE, "build_W", InvalidInput, "need x >= 0"));
    }
    check_distinct("build_W", &sd.xi)?;
    let (m, _, _) = w_scaled_mp(x, &sd.xi, &sd.norming(), MP_BITS);
    Ok(ScaledMatrix {
        n: sd.count(),
        entries: m.iter().map(Real::to_f64).collect(),
        log_scale: 2.0 * x * sd.xi.iter().sum::<f64>(),
    })
}

/// ((ln det M)', (ln det M)'', sign det M) for M' = sigma v v^T, M'' = sigma (v' v^T + v v'^T).
pub fn rank_one_logdet<T: Real>(n: usize, m: Vec<T>, v: &[T], vp: &[T], sigma: f64) -> std::result::Result<(f64, f64, f64), String>
where
    for<'a> &'a T: Add<&'a T, Output = T>
        + Sub<&'a T, Output = T>
        + Mul<&'a T, Output = T>
        + Div<&'a T, Output = T>
        + Neg<Output = T>,
{
    if n == 0 {
        return Ok((0.0, 0.0, 1.0));
    }
    let bits = 2 * MP_BITS;
    let lu = Lu::factor(n, m)?;
    let (_, sign) = lu.log_abs_det();
    let u = lu.solve(v);
    let dot = |a: &[T], b: &[T]| {
        let mut s = T::from_f64(0.0, bits);
        for (p, q) in a.iter().zip(b) {
            s = &s + &(p * q);
        }
        s
    };
    let vu = dot(v, &u);
    let vpu = dot(vp, &u);
    let sg = T::from_f64(sigma, bits);
    let d1 = &sg * &vu;
    let d2 = &(&T::from_f64(2.0, bits) * &(&sg * &vpu)) - &(&d1 * &d1);
    Ok((d1.to_f64(), d2.to_f64(), sign))
}

/// tr(M^{-1} M'') - tr((M^{-1} M')^2) for a general family; returns (first, second).
pub fn logdet_d2<T: Real>(n: usize, m: Vec<T>, m1: &[T], m2: &[T]) -> Result<(f64, f64)>
where
    for<'a> &'a T: Add<&'a T, Output = T>
        + Sub<&'a T, Output = T>
        + Mul<&'a T, Output = T>
        + Div<&'a T, Output = T>
        + Neg<Output = T>,
{
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let lu = Lu::factor(n, m).map_err(|e| err!(MODULE, "logdet_d2", Singular, "{e}"))?;
    let solve_cols = |b: &[T]| {
        // columns of M^{-1} B, stored column-major
        let mut out = Vec::with_capacity(n * n);
        for c in 0..n {
            let col: Vec<T> = (0..n).map(|r| b[r * n + c].clone()).collect();
            out.extend(lu.solve(&col));
        }
        out
    };
    let p1 = solve_cols(m1);
    let p2 = solve_cols(m2);
    let zero = T::from_f64(0.0, MP_BITS);
    let mut tr1 = zero.clone();
    let mut tr2 = zero.clone();
    let mut trsq = zero;
    for i in 0..n {
        tr1 = &tr1 + &p1[i * n + i];
        tr2 = &tr2 + &p2[i * n + i];
        for k in 0..n {
            // (P1)_{ik} (P1)_{ki}; column-major index (row r, col c) = c*n + r
            trsq = &trsq + &(&p1[k * n + i] * &p1[i * n + k]);
        }
    }
    Ok((tr1.to_f64(), (&tr2 - &trsq).to_f64()))
}

/// Q0(x) = (2/omega^2) (ln det W)'' with primitive (2/omega^2) (ln det W)'.
pub fn reconstruct_gl0(sd: &SpectralData, grid: &[f64]) -> Result<ReconstructionResult> {
    check_grid("reconstruct_gl0", grid)?;
    check_distinct("reconstruct_gl0", &sd.xi)?;
    let d = sd.norming();
    let scale = 2.0 / (sd.omega * sd.omega);
    let rows: Vec<Option<(f64, f64)>> = grid
        .par_iter()
        .map(|&x| {
            let (m, v, vp) = w_scaled_mp(x, &sd.xi, &d, MP_BITS);
            match rank_one_logdet(sd.count(), m, &v, &vp, 4.0) {
                Ok((d1, d2, s)) if s > 0.0 => Some((scale * d2, scale * d1)),
                Ok(_) => None,
                Err(e) => {
                    log::warn!("gl0 singular at x = {x}: {e}");
                    None
                }
            }
        })
        .collect();
    Ok(ReconstructionResult::new(grid.to_vec(), Method::Gl0, rows))
}

/// Quadrature of int_{x_l}^{x_l + h} e^{sigma (s - x_l - h)} f(s) ds with f interpolated on
/// the nodes at the given offsets (in units of h) from x_l.
fn exp_weights(sigma: f64, h: f64, offsets: &[f64]) -> Vec<f64> {
    let rule = GaussRule::new(16);
    offsets
        .iter()
        .enumerate()
        .map(|(k, ok)| {
            rule.integrate(0.0, 1.0, |t| {
                let mut l = 1.0;
                for (j, oj) in offsets.iter().enumerate() {
                    if j != k {
                        l *= (t - oj) / (ok - oj);
                    }
                }
                (sigma * h * (t - 1.0)).exp() * l
            }) * h
        })
        .collect()
}

/// Exponentially weighted interval rules for one sigma, built on up to four interpolation
/// nodes around each interval.
struct ExpRule {
    /// sets[size - 2][shift]: weights for `size` nodes starting `shift` nodes left of x_l.
    sets: Vec<Vec<Vec<f64>>>,
    decay: f64,
}

impl ExpRule {
    fn new(sigma: f64, h: f64) -> Self {
        let sets = (2..=4usize)
            .map(|size| {
                (0..size - 1)
                    .map(|shift| {
                        let offs: Vec<f64> = (0..size).map(|k| k as f64 - shift as f64).collect();
                        exp_weights(sigma, h, &offs)
                    })
                    .collect()
            })
            .collect();
        Self {
            sets,
            decay: (-sigma * h).exp(),
        }
    }

    /// int over [x_l, x_{l+1}] of e^{sigma (s - x_{l+1})} f(s) with f known on nodes 0..=last.
    fn interval(&self, f: &dyn Fn(usize) -> f64, l: usize, last: usize) -> f64 {
        let size = (last + 1).min(4);
        let start = l.saturating_sub(1).min(last + 1 - size);
        let w = &self.sets[size - 2][l - start];
        w.iter().enumerate().map(|(k, wk)| wk * f(start + k)).sum()
    }
}

/// Scaled T(x_i), F_hat and F_hat' on every kernel node.
#[derive(Debug, Clone)]
pub struct TField {
    pub grid: Vec<f64>,
    pub xi: Vec<f64>,
    /// t_hat[i] is the row-major N x N scaled T at node i.
    pub t_hat: Vec<Vec<f64>>,
    pub f_hat: Vec<Vec<f64>>,
    pub f_hat_prime: Vec<Vec<f64>>,
}

impl TField {
    /// `a` and `a_x` are the kernel slices A(x_i, x_j), dA/dx(x_i, x_j), j <= i.
    pub fn new(sd: &SpectralData, grid: &[f64], a: &[Vec<Complex64>], a_x: &[Vec<Complex64>]) -> Result<Self> {
        check_distinct("build_T", &sd.xi)?;
        let n = grid.len();
        if n < 2 || a.len() != n || a_x.len() != n {
            return Err(err!(MODULE, "build_T", InvalidInput, "kernel field does not match the grid"));
        }
        let h = grid[1] - grid[0];
        let nl = sd.count();
        let xi = &sd.xi;
        let d = sd.norming();
        // G_hat(t_i) = e^{-xi t_i} int_0^{t_i} K(t_i, s) sh(xi s) ds for K = A and A_x
        let inner = |rows: &[Vec<Complex64>], j: usize| -> Vec<f64> {
            let plus = ExpRule::new(xi[j], h);
            let minus = ExpRule::new(-xi[j], h);
            (0..n)
                .map(|i| {
                    let f = |l: usize| rows[i][l].re;
                    let mut s = 0.0;
                    for l in 0..i {
                        let right = grid[l + 1];
                        let ep = (-xi[j] * (grid[i] - right)).exp();
                        let em = (-xi[j] * (grid[i] + right)).exp();
                        s += ep * plus.interval(&f, l, i) - em * minus.interval(&f, l, i);
                    }
                    0.5 * s
                })
                .collect()
        };
        let mut g_hat = vec![vec![0.0; nl]; n];
        let mut f_hat = vec![vec![0.0; nl]; n];
        let mut f_hat_prime = vec![vec![0.0; nl]; n];
        for j in 0..nl {
            let g = inner(a, j);
            let gx = inner(a_x, j);
            for i in 0..n {
                let e = (-2.0 * xi[j] * grid[i]).exp();
                g_hat[i][j] = g[i];
                f_hat[i][j] = 0.5 * (1.0 - e) + g[i];
                f_hat_prime[i][j] = 0.5 * xi[j] * (1.0 + e) + a[i][i].re * 0.5 * (1.0 - e) + gx[i];
            }
        }
        // T = W + 4 int (sh_j G_k + G_j sh_k + G_j G_k); the W part is taken in closed form
        let mut t_hat: Vec<Vec<f64>> = grid
            .iter()
            .map(|&x| {
                let (m, _, _) = w_scaled_mp(x, xi, &d, 128);
                m.iter().map(Real::to_f64).collect()
            })
            .collect();
        for j in 0..nl {
            for k in j..nl {
                let rule = ExpRule::new(xi[j] + xi[k], h);
                let p = |l: usize| {
                    let (vj, vk) = (f_hat[l][j] - g_hat[l][j], f_hat[l][k] - g_hat[l][k]);
                    vj * g_hat[l][k] + vk * g_hat[l][j] + g_hat[l][j] * g_hat[l][k]
                };
                let mut s = 0.0;
                for i in 1..n {
                    s = rule.decay * s + rule.interval(&p, i - 1, n - 1);
                    t_hat[i][j * nl + k] += 4.0 * s;
                    if j != k {
                        t_hat[i][k * nl + j] += 4.0 * s;
                    }
                }
            }
        }
        Ok(Self {
            grid: grid.to_vec(),
            xi: xi.clone(),
            t_hat,
            f_hat,
            f_hat_prime,
        })
    }

    /// ((ln det T)', (ln det T)'', sign) at node i.
    fn logdet(&self, i: usize) -> std::result::Result<(f64, f64, f64), String> {
        let nl = self.xi.len();
        let conv = |v: &[f64]| v.iter().map(|x| mp(*x, MP_BITS)).collect::<Vec<Mp>>();
        rank_one_logdet(
            nl,
            conv(&self.t_hat[i]),
            &conv(&self.f_hat[i]),
            &conv(&self.f_hat_prime[i]),
            4.0,
        )
    }
}

/// Scaled T at a kernel node x (T = E^{-1} T E^{-1}, log_scale = 2 x sum xi).
pub fn build_t(x: f64, sd: &SpectralData, kf: &KernelField) -> Result<ScaledMatrix> {
    let h = kf.step();
    let i = (x / h).round() as usize;
    if i >= kf.grid.len() || (kf.grid[i] - x).abs() > 1e-9 * h.max(x) {
        return Err(err!(MODULE, "build_T", OutOfDomain, "x = {x} is not a node of the kernel grid"));
    }
    let tf = TField::new(sd, &kf.grid[..=i], &kf.a[..=i], &kf.a_x[..=i])?;
    Ok(ScaledMatrix {
        n: sd.count(),
        entries: tf.t_hat[i].clone(),
        log_scale: 2.0 * x * sd.xi.iter().sum::<f64>(),
    })
}

/// Four-point Lagrange interpolation of node values on the uniform grid `h * k`.
fn interpolate(h: f64, vals: &[f64], x: f64) -> f64 {
    let n = vals.len();
    let k = ((x / h).floor() as isize).clamp(1, n as isize - 3) as usize;
    let idx = [k - 1, k, k + 1, k + 2];
    let t = x / h;
    let mut s = 0.0;
    for &a in &idx {
        let mut l = 1.0;
        for &b in &idx {
            if a != b {
                l *= (t - b as f64) / (a as f64 - b as f64);
            }
        }
        s += l * vals[a];
    }
    s
}

/// Q = (2/omega^2) (-d/dx A(x,x) + (ln det T)'') with the kernel solved at w = omega^2 q0 on
/// `n_kernel` nodes of [0, max grid].
pub fn reconstruct_glm(sd: &SpectralData, grid: &[f64], n_kernel: usize) -> Result<ReconstructionResult> {
    check_grid("reconstruct_glm", grid)?;
    let w = Complex64::new(sd.omega * sd.omega * sd.q0, 0.0);
    let x_max = grid[grid.len() - 1].max(1e-3);
    let kf = solve_kernel(x_max, w, n_kernel, SOLVE_TOL)?;
    glm_from_kernel(sd, grid, &kf)
}

pub fn glm_from_kernel(sd: &SpectralData, grid: &[f64], kf: &KernelField) -> Result<ReconstructionResult> {
    check_grid("reconstruct_glm", grid)?;
    let w = Complex64::new(sd.omega * sd.omega * sd.q0, 0.0);
    if (kf.w - w).norm() > 1e-12 * w.norm() {
        return Err(err!(MODULE, "reconstruct_glm", InvalidInput, "kernel solved for w = {}, need {w}", kf.w));
    }
    if grid[grid.len() - 1] > kf.grid[kf.grid.len() - 1] * (1.0 + 1e-12) {
        return Err(err!(MODULE, "reconstruct_glm", OutOfDomain, "grid extends beyond the kernel grid"));
    }
    let tf = TField::new(sd, &kf.grid, &kf.a, &kf.a_x)?;
    let scale = 2.0 / (sd.omega * sd.omega);
    let nodes: Vec<Option<(f64, f64)>> = (0..kf.grid.len())
        .into_par_iter()
        .map(|i| match tf.logdet(i) {
            Ok((d1, d2, s)) if s > 0.0 => Some((
                scale * (-kf.diag_deriv[i].re + d2),
                scale * (-kf.diag[i].re + d1),
            )),
            _ => None,
        })
        .collect();
    let h = kf.step();
    let bad: Vec<bool> = nodes.iter().map(|r| r.is_none()).collect();
    let q: Vec<f64> = nodes.iter().map(|r| r.map(|v| v.0).unwrap_or(f64::NAN)).collect();
    let qi: Vec<f64> = nodes.iter().map(|r| r.map(|v| v.1).unwrap_or(f64::NAN)).collect();
    let rows = grid
        .iter()
        .map(|&x| {
            let k = (x / h).floor() as usize;
            let lo = k.saturating_sub(1);
            let hi = (k + 2).min(bad.len() - 1);
            if bad[lo..=hi].iter().any(|b| *b) {
                None
            } else {
                Some((interpolate(h, &q, x), interpolate(h, &qi, x)))
            }
        })
        .collect();
    Ok(ReconstructionResult::new(grid.to_vec(), Method::Glm, rows))
}

/// u(x, eps) = -2 eps^2 (ln det(I + G))'' with G_jk = eps c_j c_k e^{-(eta_j + eta_k) x / eps} / (eta_j + eta_k).
pub fn lax_levermore(eta: &[f64], c: &[f64], epsilon: f64, grid: &[f64]) -> Result<ReconstructionResult> {
    check_grid("lax_levermore", grid)?;
    if eta.len() != c.len() {
        return Err(err!(MODULE, "lax_levermore", InvalidInput, "eta and c lengths differ"));
    }
    if !(epsilon > 0.0) || eta.iter().any(|e| !(*e > 0.0)) || c.iter().any(|v| !(*v > 0.0)) {
        return Err(err!(MODULE, "lax_levermore", InvalidInput, "need eta, c, epsilon > 0"));
    }
    if check_distinct("lax_levermore", eta).is_err() {
        log::warn!("lax_levermore: repeated eta values give degenerate norming");
    }
    let n = eta.len();
    let eval = |x: f64| -> Option<(f64, f64)> {
        let a: Vec<Mp> = (0..n)
            .map(|j| mp(c[j], MP_BITS) * Real::exp(&mp(-eta[j] * x / epsilon, MP_BITS)))
            .collect();
        let ap: Vec<Mp> = (0..n).map(|j| &a[j] * &mp(-eta[j] / epsilon, MP_BITS)).collect();
        let eps = mp(epsilon, MP_BITS);
        let mut m = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                let g = &(&(&eps * &a[j]) * &a[k]) / &mp(eta[j] + eta[k], MP_BITS);
                m.push(if j == k { &g + &mp(1.0, MP_BITS) } else { g });
            }
        }
        rank_one_logdet(n, m, &a, &ap, -1.0).ok().map(|(d1, d2, _)| (d1, d2))
    };
    let base = eval(0.0).map(|v| v.0).unwrap_or(0.0);
    let s = -2.0 * epsilon * epsilon;
    let rows = grid
        .iter()
        .map(|&x| eval(x).map(|(d1, d2)| (s * d2, s * (d1 - base))))
        .collect();
    Ok(ReconstructionResult::new(grid.to_vec(), Method::LaxLevermore, rows))
}
