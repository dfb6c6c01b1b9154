//! Potentials Q on the half-line: built-in closed forms, tabulated profiles and user closures.

use crate::err;
use crate::error::Result;
use crate::numerics::quad;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

const MODULE: &str = "potentials";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Q1Rational,
    SquareWell,
    Tabulated,
    UserClosedForm,
}

/// Decay sandwich (1/a) x^{-k1} <= Q(x) <= a x^{-k2}, claimed for x >= x_tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub a: f64,
    pub k1: u32,
    pub k2: u32,
    #[serde(default = "default_x_tail")]
    pub x_tail: f64,
}

fn default_x_tail() -> f64 {
    10.0
}

pub type ClosedForm = Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    /// (1 + (x/c)^p)^(-r)
    InversePower { c: f64, p: u32, r: f64 },
    SquareWell,
    Table { table: Pchip, extrapolate: bool },
    Closure(ClosedForm),
}

#[derive(Clone)]
pub struct Potential {
    pub kind: PotentialKind,
    pub id: String,
    pub q0: f64,
    /// Q^(s)(0) for s = 1..=m_smoothness (as far as available).
    pub q0_derivatives: Vec<f64>,
    pub decay: Decay,
    pub m_smoothness: usize,
    /// Q vanishes identically beyond this point, when set.
    pub support: Option<f64>,
    /// Points where Q or one of its low derivatives jumps.
    pub breakpoints: Vec<f64>,
    repr: Repr,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("kind", &self.kind)
            .field("id", &self.id)
            .field("q0", &self.q0)
            .field("decay", &self.decay)
            .field("m_smoothness", &self.m_smoothness)
            .field("support", &self.support)
            .finish()
    }
}

/// Taylor coefficients of (1 + (x/c)^p)^(-r) about x0, up to order d.
fn inverse_power_taylor(x0: f64, c: f64, p: u32, r: f64, d: usize) -> Vec<f64> {
    let p = p as usize;
    let mut u = vec![0.0; d + 1];
    // ((x0 + t)/c)^p = c^-p sum_k binom(p,k) x0^(p-k) t^k
    let cp = c.powi(-(p as i32));
    let mut binom = 1.0;
    for k in 0..=p.min(d) {
        u[k] = cp * binom * x0.powi((p - k) as i32);
        binom = binom * (p - k) as f64 / (k + 1) as f64;
    }
    u[0] += 1.0;
    let alpha = -r;
    let mut w = vec![0.0; d + 1];
    w[0] = u[0].powf(alpha);
    for n in 1..=d {
        let mut s = 0.0;
        for k in 1..=n {
            s += (alpha * k as f64 - (n - k) as f64) * u[k] * w[n - k];
        }
        w[n] = s / (n as f64 * u[0]);
    }
    w
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

impl Potential {
    /// Q1(x) = 1/(1+x^2)^2.
    pub fn q1() -> Self {
        let mut p = Self::inverse_power(1.0, 2, 2.0);
        p.kind = PotentialKind::Q1Rational;
        p.id = "q1".into();
        p.decay = Decay {
            a: 2.0,
            k1: 4,
            k2: 4,
            x_tail: 2.0,
        };
        p
    }

    /// Q(x) = (1 + (x/c)^p)^(-r), a smooth class member for even p with p*r >= 4.
    pub fn inverse_power(c: f64, p: u32, r: f64) -> Self {
        let k = (p as f64 * r).round() as u32;
        let m = 4;
        let mut pot = Self {
            kind: PotentialKind::UserClosedForm,
            id: format!("inverse_power(c={},p={},r={})", c, p, r),
            q0: 1.0,
            q0_derivatives: Vec::new(),
            decay: Decay {
                a: 2f64.powf(r) * c.powf(p as f64 * r).max(1.0 / c.powf(p as f64 * r)),
                k1: k,
                k2: k,
                x_tail: c * 2.0,
            },
            m_smoothness: m,
            support: None,
            breakpoints: Vec::new(),
            repr: Repr::InversePower { c, p, r },
        };
        pot.fill_q0_derivatives();
        pot
    }

    /// Q = 1 on [0,1] and 0 beyond.
    pub fn square_well() -> Self {
        Self {
            kind: PotentialKind::SquareWell,
            id: "square_well".into(),
            q0: 1.0,
            q0_derivatives: Vec::new(),
            decay: Decay {
                a: 1.0,
                k1: 4,
                k2: 4,
                x_tail: 1.0,
            },
            m_smoothness: 0,
            support: Some(1.0),
            breakpoints: vec![1.0],
            repr: Repr::SquareWell,
        }
    }

    /// C^2 mollified square well: 1 on [0, 1-delta], quintic step down to 0 at 1+delta.
    pub fn smoothed_well(delta: f64) -> Self {
        let lo = 1.0 - delta;
        let hi = 1.0 + delta;
        let f: ClosedForm = Arc::new(move |x: f64, d: usize| {
            if x <= lo {
                return if d == 0 { 1.0 } else { 0.0 };
            }
            if x >= hi {
                return 0.0;
            }
            let s = (x - lo) / (hi - lo);
            let j = 1.0 / (hi - lo);
            // 1 - (6s^5 - 15s^4 + 10s^3)
            match d {
                0 => 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s),
                1 => -30.0 * s * s * (1.0 - s) * (1.0 - s) * j,
                2 => -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) * j * j,
                _ => f64::NAN,
            }
        });
        let mut p = Self::from_closure(
            format!("smoothed_well(delta={})", delta),
            Decay {
                a: 1.0,
                k1: 4,
                k2: 4,
                x_tail: hi,
            },
            2,
            f,
        );
        p.support = Some(hi);
        p.breakpoints = vec![lo, hi];
        p
    }

    /// A user closure `f(x, d)` returning Q^(d)(x) for d <= m_smoothness.
    pub fn from_closure(id: impl Into<String>, decay: Decay, m_smoothness: usize, f: ClosedForm) -> Self {
        let q0 = f(0.0, 0);
        let mut p = Self {
            kind: PotentialKind::UserClosedForm,
            id: id.into(),
            q0,
            q0_derivatives: Vec::new(),
            decay,
            m_smoothness,
            support: None,
            breakpoints: Vec::new(),
            repr: Repr::Closure(f),
        };
        p.fill_q0_derivatives();
        p
    }

    /// Monotone cubic interpolant of strictly increasing, strictly positive samples.
    pub fn tabulated(
        id: impl Into<String>,
        xs: Vec<f64>,
        qs: Vec<f64>,
        decay: Decay,
        extrapolate: bool,
    ) -> Result<Self> {
        const OP: &str = "make_potential";
        if xs.len() < 3 || xs.len() != qs.len() {
            return Err(err!(MODULE, OP, InvalidInput, "table needs >= 3 (x, Q) rows of equal length"));
        }
        if xs[0] != 0.0 {
            return Err(err!(MODULE, OP, InvalidInput, "table must start at x = 0, got {}", xs[0]));
        }
        for i in 1..xs.len() {
            if !(xs[i] > xs[i - 1]) {
                return Err(err!(MODULE, OP, InvalidInput, "table x not strictly increasing at row {}", i));
            }
        }
        if let Some(i) = qs.iter().position(|q| !(*q > 0.0) || !q.is_finite()) {
            return Err(err!(MODULE, OP, InvalidInput, "table Q not strictly positive at row {}", i));
        }
        for i in 1..qs.len() {
            if !(qs[i] < qs[i - 1]) {
                return Err(err!(MODULE, OP, InvalidInput, "table Q not strictly decreasing at row {}", i));
            }
        }
        let table = Pchip::new(xs, qs);
        let q0 = table.ys[0];
        let mut p = Self {
            kind: PotentialKind::Tabulated,
            id: id.into(),
            q0,
            q0_derivatives: Vec::new(),
            decay,
            m_smoothness: 1,
            support: None,
            breakpoints: Vec::new(),
            repr: Repr::Table { table, extrapolate },
        };
        p.fill_q0_derivatives();
        Ok(p)
    }

    /// Adds a constant offset (used to build deliberately non-decaying test inputs).
    pub fn shifted(&self, offset: f64) -> Self {
        let base = self.clone();
        let f: ClosedForm = Arc::new(move |x, d| {
            let v = base.eval(x, d).unwrap_or(f64::NAN);
            if d == 0 {
                v + offset
            } else {
                v
            }
        });
        let mut p = Self::from_closure(
            format!("{}+{}", self.id, offset),
            self.decay,
            self.m_smoothness,
            f,
        );
        p.breakpoints = self.breakpoints.clone();
        p
    }

    fn fill_q0_derivatives(&mut self) {
        self.q0_derivatives = (1..=self.m_smoothness)
            .map(|d| self.eval(0.0, d).unwrap_or(f64::NAN))
            .collect();
    }

    pub fn table_range(&self) -> Option<(f64, f64)> {
        match &self.repr {
            Repr::Table { table, .. } => Some((table.xs[0], *table.xs.last().unwrap())),
            _ => None,
        }
    }

    /// Q^(d)(x) with the contract checks on smoothness and table range.
    pub fn eval(&self, x: f64, d: usize) -> Result<f64> {
        const OP: &str = "eval";
        if !(x >= 0.0) {
            return Err(err!(MODULE, OP, OutOfDomain, "x = {} is negative", x));
        }
        if d > self.m_smoothness {
            return Err(err!(
                MODULE,
                OP,
                InvalidInput,
                "derivative order {} exceeds smoothness {} of {}",
                d,
                self.m_smoothness,
                self.id
            ));
        }
        if let Repr::Table { table, extrapolate } = &self.repr {
            let xmax = *table.xs.last().unwrap();
            if x > xmax && !extrapolate {
                return Err(err!(
                    MODULE,
                    OP,
                    OutOfDomain,
                    "x = {} beyond table end {} and extrapolation disabled",
                    x,
                    xmax
                ));
            }
        }
        Ok(self.raw(x, d))
    }

    fn raw(&self, x: f64, d: usize) -> f64 {
        match &self.repr {
            Repr::InversePower { c, p, r } => {
                if d == 0 {
                    return (1.0 + (x / c).powi(*p as i32)).powf(-r);
                }
                inverse_power_taylor(x, *c, *p, *r, d)[d] * factorial(d)
            }
            Repr::SquareWell => {
                if d == 0 && x <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Repr::Table { table, .. } => {
                let xmax = *table.xs.last().unwrap();
                if x <= xmax {
                    table.eval(x, d)
                } else {
                    // Power-law continuation matching the last sample with exponent k2.
                    let qe = *table.ys.last().unwrap();
                    let k = self.decay.k2 as f64;
                    let v = qe * (xmax / x).powf(k);
                    match d {
                        0 => v,
                        1 => -k * v / x,
                        _ => k * (k + 1.0) * v / (x * x),
                    }
                }
            }
            Repr::Closure(f) => f(x, d),
        }
    }

    /// Q(x) without contract checks; tables continue with the decay tail. Hot-path evaluator.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::InversePower { c, p, r } => {
                if *p == 2 && *r == 2.0 && *c == 1.0 {
                    let u = 1.0 + x * x;
                    1.0 / (u * u)
                } else {
                    (1.0 + (x / c).powi(*p as i32)).powf(-r)
                }
            }
            _ => self.raw(x, 0),
        }
    }

    /// Q^(d)(x) without contract checks.
    pub fn derivative(&self, x: f64, d: usize) -> f64 {
        self.raw(x, d)
    }

    /// Smallest X with Q(X) <= level, by doubling then bisection. Returns the support end
    /// for compactly supported potentials if that is smaller.
    pub fn level_crossing(&self, level: f64) -> f64 {
        if let Some(s) = self.support {
            if level <= 0.0 {
                return s;
            }
        }
        if self.value(0.0) <= level {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.value(hi) > level {
            hi *= 2.0;
            if hi > 1e12 {
                return hi;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if self.value(m) > level {
                lo = m;
            } else {
                hi = m;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        match self.support {
            Some(s) => hi.min(s),
            None => hi,
        }
    }

    /// Half-line integral of g(Q(x)) over [0, inf) with a mapped tail x = X/u.
    pub fn integrate_half_line(&self, g: impl Fn(f64, f64) -> f64, tol: f64) -> f64 {
        let mut breaks = self.breakpoints.clone();
        let split = match self.support {
            Some(s) => s,
            None => self.decay.x_tail.max(1.0) * 4.0,
        };
        breaks.retain(|b| *b < split);
        let head = quad::adaptive(|x| g(x, self.value(x)), 0.0, split, &breaks, tol, tol, 20_000).value;
        if self.support.is_some() {
            return head;
        }
        let tail = quad::adaptive(
            |u| {
                if u <= 0.0 {
                    return 0.0;
                }
                let x = split / u;
                g(x, self.value(x)) * split / (u * u)
            },
            0.0,
            1.0,
            &[],
            tol,
            tol,
            20_000,
        )
        .value;
        head + tail
    }
}

/// Fritsch-Carlson monotone piecewise cubic Hermite interpolant.
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut ds = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                ds[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                ds[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
            let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if d * d0 <= 0.0 {
                0.0
            } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
                3.0 * d0
            } else {
                d
            }
        };
        ds[0] = end(h[0], h[1], delta[0], delta[1]);
        ds[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Self { xs, ys, ds }
    }

    pub fn eval(&self, x: f64, d: usize) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.ds[i] * h, self.ds[i + 1] * h);
        match d {
            0 => {
                let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
                let h10 = t * (1.0 - t) * (1.0 - t);
                let h01 = t * t * (3.0 - 2.0 * t);
                let h11 = t * t * (t - 1.0);
                h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
            }
            1 => {
                let h00 = 6.0 * t * t - 6.0 * t;
                let h10 = 3.0 * t * t - 4.0 * t + 1.0;
                let h01 = -6.0 * t * t + 6.0 * t;
                let h11 = 3.0 * t * t - 2.0 * t;
                (h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1) / h
            }
            _ => {
                let h00 = 12.0 * t - 6.0;
                let h10 = 6.0 * t - 4.0;
                let h01 = -12.0 * t + 6.0;
                let h11 = 6.0 * t - 2.0;
                (h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1) / (h * h)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub m: usize,
    pub positivity: bool,
    pub min_value: f64,
    pub strictly_decreasing: bool,
    pub first_non_decrease: Option<f64>,
    /// Locations where Q jumps (detected by interval refinement).
    pub discontinuities: Vec<f64>,
    pub derivatives_vanish: bool,
    /// |Q^(s)(0)| for s = 1..m; NaN when the order exceeds the declared smoothness.
    pub derivative_values: Vec<f64>,
    pub decay_ok: bool,
    pub decay_violation_at: Option<f64>,
    pub integrable: bool,
    /// int_0^{x_trunc} (1+t) sqrt(Q) dt
    pub integral_truncated: f64,
    pub x_trunc: f64,
    /// a * int_{x_trunc}^inf x^{-k2/2} (1+x) dx; infinite when k2 <= 4.
    pub tail_bound: f64,
    pub pass: bool,
}

pub const DERIV_TOL: f64 = 1e-8;
pub const X_TRUNC: f64 = 1e3;

/// Class membership probe. Report-only: violations are findings.
pub fn validate_class(p: &Potential, m: usize) -> ClassReport {
    let x_probe = (10.0 * p.decay.x_tail).max(20.0);
    let n = 4000;
    let grid: Vec<f64> = (0..=n).map(|i| x_probe * i as f64 / n as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| p.value(x)).collect();
    let min_value = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let positivity = min_value > 0.0 && vals.iter().all(|v| v.is_finite());

    let mut first_non_decrease = None;
    for i in 1..vals.len() {
        if !(vals[i] < vals[i - 1]) {
            first_non_decrease = Some(grid[i - 1]);
            break;
        }
    }

    let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let mut discontinuities = Vec::new();
    for i in 1..vals.len() {
        let jump0 = (vals[i] - vals[i - 1]).abs();
        if jump0 < 1e-6 * scale {
            continue;
        }
        let (mut a, mut b) = (grid[i - 1], grid[i]);
        let (mut qa, mut qb) = (vals[i - 1], vals[i]);
        for _ in 0..45 {
            let c = 0.5 * (a + b);
            let qc = p.value(c);
            if (qc - qa).abs() >= (qb - qc).abs() {
                b = c;
                qb = qc;
            } else {
                a = c;
                qa = qc;
            }
        }
        if (qb - qa).abs() > 0.25 * jump0 {
            discontinuities.push(0.5 * (a + b));
        }
    }

    let derivative_values: Vec<f64> = (1..=m)
        .map(|s| p.eval(0.0, s).map(|v| v.abs()).unwrap_or(f64::NAN))
        .collect();
    let derivatives_vanish = derivative_values.iter().all(|v| *v <= DERIV_TOL);

    let d = p.decay;
    let mut decay_violation_at = None;
    let mut x = d.x_tail.max(1e-3);
    while x <= 1e6 {
        let q = p.value(x);
        let lower = x.powi(-(d.k1 as i32)) / d.a;
        let upper = d.a * x.powi(-(d.k2 as i32));
        if !(q >= lower && q <= upper) {
            decay_violation_at = Some(x);
            break;
        }
        x *= 1.1;
    }
    let decay_ok = decay_violation_at.is_none() && d.k1 >= d.k2 && d.k2 >= 4 && d.a >= 1.0;

    let x_trunc = X_TRUNC;
    let mut breaks = p.breakpoints.clone();
    breaks.extend([1.0, 10.0, 100.0]);
    let integral_truncated = quad::adaptive(
        |t| (1.0 + t) * p.value(t).max(0.0).sqrt(),
        0.0,
        x_trunc,
        &breaks,
        1e-10,
        1e-10,
        20_000,
    )
    .value;
    let h = d.k2 as f64 / 2.0;
    let tail_bound = if h > 2.0 {
        d.a * (x_trunc.powf(1.0 - h) / (h - 1.0) + x_trunc.powf(2.0 - h) / (h - 2.0))
    } else {
        f64::INFINITY
    };
    let integrable = integral_truncated.is_finite();

    let strictly_decreasing = first_non_decrease.is_none() && discontinuities.is_empty();
    let pass = positivity && strictly_decreasing && derivatives_vanish && decay_ok && integrable;
    ClassReport {
        m,
        positivity,
        min_value,
        strictly_decreasing,
        first_non_decrease,
        discontinuities,
        derivatives_vanish,
        derivative_values,
        decay_ok,
        decay_violation_at,
        integrable,
        integral_truncated,
        x_trunc,
        tail_bound,
        pass,
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct DecayConfig {
    pub a: f64,
    pub k1: u32,
    pub k2: u32,
    pub x_tail: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct PotentialConfig {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub decay: Option<DecayConfig>,
    pub table_path: Option<PathBuf>,
    #[serde(default)]
    pub extrapolate: bool,
}

#[derive(Debug, Clone, Deserialize)]
struct ConfigFile {
    potential: PotentialConfig,
}

impl PotentialConfig {
    pub fn named(kind: &str) -> Self {
        Self {
            kind: kind.into(),
            params: BTreeMap::new(),
            decay: None,
            table_path: None,
            extrapolate: false,
        }
    }

    /// Reads `[potential]` from a TOML (.toml) or JSON file.
    pub fn from_file(path: &Path) -> Result<Self> {
        const OP: &str = "make_potential";
        let text = std::fs::read_to_string(path)
            .map_err(|e| err!(MODULE, OP, Io, "{}: {}", path.display(), e))?;
        let is_json = path.extension().map(|e| e == "json").unwrap_or(false);
        let cfg: ConfigFile = if is_json {
            serde_json::from_str(&text).map_err(|e| err!(MODULE, OP, Format, "{}", e))?
        } else {
            toml::from_str(&text).map_err(|e| err!(MODULE, OP, Format, "{}", e))?
        };
        let mut p = cfg.potential;
        if let (Some(tp), Some(dir)) = (&p.table_path, path.parent()) {
            if tp.is_relative() {
                p.table_path = Some(dir.join(tp));
            }
        }
        Ok(p)
    }
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    const OP: &str = "make_potential";
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err!(MODULE, OP, Io, "{}: {}", path.display(), e))?;
    let mut xs = Vec::new();
    let mut qs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| err!(MODULE, OP, Format, "{}", e))?;
        if rec.len() < 2 {
            return Err(err!(MODULE, OP, Format, "row {} needs two columns x,Q", i));
        }
        let (x, q) = match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(x), Ok(q)) => (x, q),
            _ if i == 0 => continue,
            _ => return Err(err!(MODULE, OP, Format, "row {} is not numeric", i)),
        };
        xs.push(x);
        qs.push(q);
    }
    Ok((xs, qs))
}

pub fn make_potential(spec: &PotentialConfig) -> Result<Potential> {
    const OP: &str = "make_potential";
    let param = |k: &str, default: f64| spec.params.get(k).copied().unwrap_or(default);
    let mut p = match spec.kind.as_str() {
        "q1" | "q1_rational" => Potential::q1(),
        "square_well" => Potential::square_well(),
        "smoothed_well" => Potential::smoothed_well(param("delta", 0.1)),
        "user_closed_form" | "inverse_power" => {
            let pw = param("p", 4.0);
            if pw < 1.0 || pw.fract() != 0.0 {
                return Err(err!(MODULE, OP, InvalidInput, "params.p must be a positive integer"));
            }
            Potential::inverse_power(param("c", 1.0), pw as u32, param("r", 1.0))
        }
        "tabulated" => {
            let path = spec
                .table_path
                .as_ref()
                .ok_or_else(|| err!(MODULE, OP, InvalidInput, "tabulated kind needs table_path"))?;
            let d = spec
                .decay
                .as_ref()
                .ok_or_else(|| err!(MODULE, OP, InvalidInput, "tabulated kind needs decay metadata"))?;
            let (xs, qs) = read_table(path)?;
            let x_tail = d.x_tail.unwrap_or(*xs.last().unwrap_or(&1.0) * 0.5);
            return Potential::tabulated(
                path.display().to_string(),
                xs,
                qs,
                Decay {
                    a: d.a,
                    k1: d.k1,
                    k2: d.k2,
                    x_tail,
                },
                spec.extrapolate,
            );
        }
        other => return Err(err!(MODULE, OP, InvalidInput, "unknown potential kind '{}'", other)),
    };
    if let Some(d) = &spec.decay {
        p.decay = Decay {
            a: d.a,
            k1: d.k1,
            k2: d.k2,
            x_tail: d.x_tail.unwrap_or(p.decay.x_tail),
        };
    }
    Ok(p)
}

/// Convenience for the command line: a built-in name or a config file path.
pub fn potential_from_arg(arg: &str) -> Result<Potential> {
    let path = Path::new(arg);
    if path.exists() {
        let cfg = PotentialConfig::from_file(path)?;
        make_potential(&cfg)
    } else {
        make_potential(&PotentialConfig::named(arg))
    }
}
