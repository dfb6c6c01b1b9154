//! Discrete spectral data of -d^2/dx^2 - omega^2 Q on the half-line with a Dirichlet end.

pub mod jost;
pub mod oracle;
pub mod shooting;

pub use jost::{jost, jost_identity_check, JostOptions, JostSample};
pub use oracle::{calogero_bounds, phase_distance, squarewell_oracle, CalogeroBounds};

use crate::err;
use crate::error::Result;
use crate::numerics::{quad, roots};
use crate::potentials::Potential;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use shooting::{Shooter, Shot};
use std::f64::consts::PI;
use std::path::Path;

const MODULE: &str = "forward_spectral";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub version: u32,
    pub omega: f64,
    pub potential_id: String,
    pub xi: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub q0: f64,
    pub q0_derivatives: Vec<f64>,
}

impl SpectralData {
    pub fn new(
        omega: f64,
        potential_id: impl Into<String>,
        xi: Vec<f64>,
        c: Vec<f64>,
        q0: f64,
        q0_derivatives: Vec<f64>,
    ) -> Self {
        Self {
            version: SCHEMA_VERSION,
            omega,
            potential_id: potential_id.into(),
            xi,
            c,
            q0,
            q0_derivatives,
        }
    }

    pub fn count(&self) -> usize {
        self.xi.len()
    }

    /// 4 xi_j^2 / C_j
    pub fn norming(&self) -> Vec<f64> {
        self.xi.iter().zip(&self.c).map(|(x, c)| 4.0 * x * x / c).collect()
    }

    pub fn validate(&self) -> Result<()> {
        const OP: &str = "spectral_data";
        if self.version != SCHEMA_VERSION {
            return Err(err!(MODULE, OP, Format, "unsupported spectral schema version {}", self.version));
        }
        if self.xi.len() != self.c.len() {
            return Err(err!(MODULE, OP, Format, "xi and C lengths differ"));
        }
        if !(self.omega > 0.0) || !(self.q0 > 0.0) {
            return Err(err!(MODULE, OP, Format, "omega and q0 must be positive"));
        }
        for w in self.xi.windows(2) {
            if !(w[1] > w[0]) {
                return Err(err!(MODULE, OP, Format, "xi not strictly increasing"));
            }
        }
        if self.xi.first().map(|x| *x <= 0.0).unwrap_or(false) {
            return Err(err!(MODULE, OP, Format, "xi must be positive"));
        }
        if self.c.iter().any(|c| !(*c > 0.0)) {
            return Err(err!(MODULE, OP, Format, "C must be positive"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        const OP: &str = "spectral_data";
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| err!(MODULE, OP, Format, "{}", e))?;
        match v.get("version").and_then(|x| x.as_u64()) {
            Some(1) => {}
            Some(other) => {
                return Err(err!(MODULE, OP, Format, "unsupported spectral schema version {}", other))
            }
            None => return Err(err!(MODULE, OP, Format, "missing integer field 'version'")),
        }
        let sd: SpectralData =
            serde_json::from_value(v).map_err(|e| err!(MODULE, OP, Format, "{}", e))?;
        sd.validate()?;
        Ok(sd)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err!(MODULE, "spectral_data", Io, "{}: {}", path.display(), e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|e| err!(MODULE, "spectral_data", Io, "{}: {}", path.display(), e))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Absolute tolerance on each xi.
    pub tol: f64,
    pub rtol: f64,
    /// Lowest xi searched; defaults to a multiple of the class lower bound.
    pub xi_floor: Option<f64>,
    /// Ratio omega^2 Q(X) / xi^2 defining the truncation radius.
    pub tail_ratio: f64,
    pub sensitivity_check: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            rtol: 1e-11,
            xi_floor: None,
            tail_ratio: 1e-6,
            sensitivity_check: true,
        }
    }
}

impl SolverOptions {
    fn floor(&self, p: &Potential, omega: f64) -> f64 {
        if let Some(f) = self.xi_floor {
            return f;
        }
        let d = p.decay;
        let b = if d.k2 > 2 {
            d.k1 as f64 / (d.k2 as f64 - 2.0)
        } else {
            2.0
        };
        let top = omega * p.q0.sqrt();
        (0.5 * PI * PI / 256.0 * p.q0.sqrt() * omega.powf(-b)).min(1e-3 * top)
    }
}

/// A bound state from shooting: xi, C and ln s with phi ~ s e^{-xi x}.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Level {
    pub xi: f64,
    pub c: f64,
    pub log_s: f64,
    pub zeros: usize,
    pub x_inf: f64,
    pub x_match: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Forward {
    pub levels: Vec<Level>,
    pub x_inf: f64,
    pub xi_floor: f64,
}

impl Forward {
    pub fn spectral_data(&self, p: &Potential, omega: f64) -> SpectralData {
        SpectralData::new(
            omega,
            p.id.clone(),
            self.levels.iter().map(|l| l.xi).collect(),
            self.levels.iter().map(|l| l.c).collect(),
            p.q0,
            p.q0_derivatives.clone(),
        )
    }

    pub fn xi(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.xi).collect()
    }
}

fn shoot_at(sh: &Shooter, xi: f64, ratio: f64) -> Result<Shot> {
    let x_inf = sh.truncation(xi, ratio);
    let xm = sh.match_point(xi, x_inf);
    sh.shoot(xi, xm, x_inf)
        .map_err(|e| err!(MODULE, "eigenvalues", NotConverged, "shooting at xi = {}: {}", xi, e))
}

/// ln s correction for the slowly varying tail beyond X: int_X^inf (xi - kappa(t)) dt.
fn tail_phase(p: &Potential, omega: f64, xi: f64, x_inf: f64) -> f64 {
    if p.support.map(|s| x_inf >= s).unwrap_or(false) {
        return 0.0;
    }
    let w2 = omega * omega;
    quad::adaptive(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let t = x_inf / u;
            let v = w2 * p.value(t);
            // xi - sqrt(xi^2 - v) without cancellation
            v / (xi + (xi * xi - v).max(0.0).sqrt()) * x_inf / (u * u)
        },
        0.0,
        1.0,
        &[],
        1e-15,
        1e-10,
        2000,
    )
    .value
}

fn level_from_shot(p: &Potential, omega: f64, shot: &Shot) -> Level {
    Level {
        xi: shot.xi,
        c: shot.characteristic_value(),
        log_s: shot.log_norming_base() + tail_phase(p, omega, shot.xi, shot.x_inf),
        zeros: (shot.mismatch / PI).round().max(0.0) as usize,
        x_inf: shot.x_inf,
        x_match: shot.x_match,
    }
}

/// Refines the level with `n` interior zeros inside the isolating bracket [a, b].
fn refine(sh: &Shooter, n: usize, a: f64, b: f64, ratio: f64, tol: f64, stretch: f64) -> Result<Shot> {
    const OP: &str = "eigenvalues";
    let x_inf = sh.truncation(a, ratio) * stretch;
    let xm = sh.match_point(0.5 * (a + b), x_inf);
    let target = n as f64 * PI;
    let run = |xi: f64| -> std::result::Result<Shot, String> { sh.shoot(xi, xm, x_inf) };
    let fa = run(a).map_err(|e| err!(MODULE, OP, NotConverged, "{}", e))?.mismatch - target;
    let fb = run(b).map_err(|e| err!(MODULE, OP, NotConverged, "{}", e))?.mismatch - target;
    if fa.signum() == fb.signum() {
        return Err(err!(
            MODULE,
            OP,
            NotConverged,
            "bracket failure for level with {} zeros on [{}, {}]: mismatch/pi = {}, {}",
            n,
            a,
            b,
            fa / PI + n as f64,
            fb / PI + n as f64
        ));
    }
    let mut failure = None;
    let root = roots::brent(
        |xi| match run(xi) {
            Ok(s) => s.mismatch - target,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        },
        a,
        b,
        fa,
        fb,
        tol,
        200,
    );
    if let Some(e) = failure {
        return Err(err!(MODULE, OP, NotConverged, "{}", e));
    }
    let xi = root.map_err(|e| err!(MODULE, OP, NotConverged, "level {}: {}", n, e))?;
    run(xi).map_err(|e| err!(MODULE, OP, NotConverged, "{}", e))
}

/// Bound states of -d^2/dx^2 - omega^2 Q, ascending in xi.
pub fn forward(p: &Potential, omega: f64, opts: &SolverOptions) -> Result<Forward> {
    const OP: &str = "eigenvalues";
    if !(omega > 0.0) {
        return Err(err!(MODULE, OP, InvalidInput, "omega must be positive, got {}", omega));
    }
    let sh = Shooter::new(p, omega, opts.rtol);
    let top = omega * p.q0.sqrt();
    let floor = opts.floor(p, omega);
    let ratio = opts.tail_ratio;
    let lo_shot = shoot_at(&sh, floor, ratio)?;
    let total = lo_shot.count_above();
    let x_inf = lo_shot.x_inf;
    if total == 0 {
        return Ok(Forward {
            levels: vec![],
            x_inf,
            xi_floor: floor,
        });
    }

    // Isolate each level by bisection on oscillation counts.
    let mut brackets: Vec<(f64, f64, usize)> = Vec::new();
    let mut stack = vec![(floor, total, top, 0usize, 0usize)];
    while let Some((a, ca, b, cb, depth)) = stack.pop() {
        if ca == cb {
            continue;
        }
        if ca == cb + 1 {
            brackets.push((a, b, cb));
            continue;
        }
        if depth > 100 {
            return Err(err!(
                MODULE,
                OP,
                NotConverged,
                "could not separate {} levels in [{}, {}]",
                ca - cb,
                a,
                b
            ));
        }
        let m = 0.5 * (a + b);
        let cm = shoot_at(&sh, m, ratio)?.count_above();
        stack.push((a, ca, m, cm, depth + 1));
        stack.push((m, cm, b, cb, depth + 1));
    }
    brackets.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let shots: Vec<Result<Shot>> = brackets
        .par_iter()
        .map(|&(a, b, n)| refine(&sh, n, a, b, ratio, opts.tol, 1.0))
        .collect();
    let shots: Vec<Shot> = shots.into_iter().collect::<Result<_>>()?;

    if opts.sensitivity_check && p.support.is_none() {
        let (a, b, n) = brackets[0];
        let first = &shots[0];
        let doubled = refine(&sh, n, a, b, ratio, opts.tol, 2.0)?;
        let drift = (doubled.xi - first.xi).abs();
        if drift > (1e3 * opts.tol).max(1e-9 * first.xi) {
            return Err(err!(
                MODULE,
                OP,
                NotConverged,
                "truncation radius too small: xi_1 moved by {:e} when X went from {} to {}",
                drift,
                first.x_inf,
                doubled.x_inf
            ));
        }
    }

    let levels = shots.iter().map(|s| level_from_shot(p, omega, s)).collect();
    Ok(Forward {
        levels,
        x_inf,
        xi_floor: floor,
    })
}

pub fn eigenvalues(p: &Potential, omega: f64, opts: &SolverOptions) -> Result<Vec<f64>> {
    Ok(forward(p, omega, opts)?.xi())
}

/// C_j = (phi_j'(0))^2 for each supplied eigenvalue.
pub fn characteristic_values(p: &Potential, omega: f64, xi: &[f64]) -> Result<Vec<f64>> {
    Ok(levels_at(p, omega, xi, &SolverOptions::default())?
        .iter()
        .map(|l| l.c)
        .collect())
}

/// Shooting state evaluated at given eigenvalues.
pub fn levels_at(p: &Potential, omega: f64, xi: &[f64], opts: &SolverOptions) -> Result<Vec<Level>> {
    const OP: &str = "characteristic_values";
    let sh = Shooter::new(p, omega, opts.rtol);
    xi.par_iter()
        .map(|&x| {
            if !(x > 0.0) {
                return Err(err!(MODULE, OP, InvalidInput, "xi must be positive, got {}", x));
            }
            let shot = shoot_at(&sh, x, opts.tail_ratio)?;
            let level = level_from_shot(p, omega, &shot);
            if !(level.c > 0.0) || !level.c.is_finite() {
                return Err(err!(
                    MODULE,
                    OP,
                    NotConverged,
                    "normalisation failed at xi = {} (increase the truncation radius)",
                    x
                ));
            }
            Ok(level)
        })
        .collect()
}

pub fn spectral_data(p: &Potential, omega: f64, opts: &SolverOptions) -> Result<SpectralData> {
    Ok(forward(p, omega, opts)?.spectral_data(p, omega))
}
