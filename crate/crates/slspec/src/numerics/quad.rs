//! Gauss-Legendre rules and a globally adaptive Gauss-Kronrod (7,15) integrator.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed Gauss-Legendre rule mapped to an interval.
#[derive(Debug, Clone)]
pub struct GaussRule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Self { x, w }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Mapped nodes and weights on [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.x.iter().zip(&self.w).map(move |(x, w)| (c + r * x, r * w))
    }

    pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(&self, a: f64, b: f64, mut f: F) -> T {
        let mut s = T::zero();
        for (x, w) in self.on(a, b) {
            s = s + f(x) * w;
        }
        s
    }

    /// Composite rule over `panels` equal sub-intervals.
    pub fn composite<T: QuadValue, F: FnMut(f64) -> T>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> T {
        let h = (b - a) / panels as f64;
        let mut s = T::zero();
        for p in 0..panels {
            let lo = a + p as f64 * h;
            s = s + self.integrate(lo, lo + h, &mut f);
        }
        s
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = r * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        let s = f1 + f2;
        resk = resk + s * WGK[j];
        if j % 2 == 1 {
            resg = resg + s * WG[j / 2];
        }
    }
    let val = resk * r;
    let err = ((resk - resg) * r).magnitude();
    (val, err)
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub intervals: usize,
}

/// Globally adaptive GK15 on [a, b] with the given interior breakpoints.
pub fn adaptive<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> QuadResult<T> {
    let mut pts = vec![a];
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| *x > lo && *x < hi)
        .collect();
    inner.sort_by(|p, q| p.partial_cmp(q).unwrap());
    if a > b {
        inner.reverse();
    }
    pts.extend(inner);
    pts.push(b);
    let mut segs: Vec<(f64, f64, T, f64)> = pts
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&mut f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let total = segs.iter().fold(T::zero(), |s, g| s + g.2);
        let err: f64 = segs.iter().map(|g| g.3).sum();
        if err <= abs_tol.max(rel_tol * total.magnitude()) || segs.len() >= max_intervals {
            return QuadResult {
                value: total,
                error: err,
                intervals: segs.len(),
            };
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .3.partial_cmp(&q.1 .3).unwrap())
            .unwrap();
        let (s0, s1, _, _) = segs.swap_remove(idx);
        let m = 0.5 * (s0 + s1);
        if m == s0 || m == s1 {
            return QuadResult {
                value: total,
                error: err,
                intervals: segs.len() + 1,
            };
        }
        let (v1, e1) = gk15(&mut f, s0, m);
        let (v2, e2) = gk15(&mut f, m, s1);
        segs.push((s0, m, v1, e1));
        segs.push((m, s1, v2, e2));
    }
}

/// Convenience wrapper for a real integrand with default limits.
pub fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adaptive(f, a, b, &[], tol, tol, 4000).value
}

/// Composite Simpson weights on n+1 uniform nodes with spacing h. Uses the 3/8 rule on
/// the last three intervals when n is odd and the trapezoid rule when n = 1.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    match n {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let (m, tail) = if n % 2 == 0 { (n, 0) } else { (n - 3, 3) };
            let mut k = 0;
            while k < m {
                w[k] += h / 3.0;
                w[k + 1] += 4.0 * h / 3.0;
                w[k + 2] += h / 3.0;
                k += 2;
            }
            if tail == 3 {
                let c = 3.0 * h / 8.0;
                w[m] += c;
                w[m + 1] += 3.0 * c;
                w[m + 2] += 3.0 * c;
                w[m + 3] += c;
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let g = GaussRule::new(10);
        let v = g.integrate(0.0, 2.0, |x: f64| x.powi(19));
        assert!((v - 2f64.powi(20) / 20.0).abs() < 1e-9);
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let v = integrate(|x| x.sqrt(), 0.0, 1.0, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn simpson_weights_integrate_cubics() {
        for n in 1..9 {
            let h = 0.3;
            let w = simpson_weights(n, h);
            let s: f64 = w.iter().enumerate().map(|(i, w)| w * (i as f64 * h)).sum();
            let exact = 0.5 * (n as f64 * h).powi(2);
            assert!((s - exact).abs() < 1e-12, "n = {}", n);
            if n >= 2 {
                let c: f64 = w
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w * (i as f64 * h).powi(3))
                    .sum();
                assert!((c - (n as f64 * h).powi(4) / 4.0).abs() < 1e-12, "n = {}", n);
            }
        }
    }
}
