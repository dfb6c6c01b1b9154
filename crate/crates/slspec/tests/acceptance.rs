//! Acceptance target: one PASS/FAIL line per criterion, tolerances pinned below.
//!
//! Clauses marked `unattainable` are evaluated and reported like any other; when they fail the
//! criterion line still reads FAIL, but the process exit status only reflects the other clauses.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slspec::bounds_rates::{vitushkin_c_inf, vitushkin_c_l1, NormingBracket};
use slspec::cli_harness::benchmark;
use slspec::forward_spectral::{
    forward, jost_identity_check, phase_distance, spectral_data, squarewell_oracle, SolverOptions,
};
use slspec::gl_kernel::{cauchy_riemann_defect, coercivity_check, phi_diag_derivative, solve_kernel};
use slspec::potentials::Potential;
use slspec::reconstruct::{
    build_w, lax_levermore, logdet_d2, reconstruct_gl0, reconstruct_glm, Method,
};
use slspec::wkb::{spacing_check, wkb_spectrum};
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

const SQUAREWELL_XI_TOL: f64 = 1e-8;
const SQUAREWELL_C_RTOL: f64 = 1e-6;
const PHASE_GUARD: f64 = 0.2;
const JOST_RTOL: f64 = 1e-3;
const KERNEL_RESIDUAL: f64 = 1e-6;
const COERCIVITY_MIN: f64 = 0.999;
const DIAG_DERIV_TOL: f64 = 1e-8;
const CR_TOL: f64 = 1e-4;
const GL0_MIN_EXPONENT: f64 = 0.5;
const GLM_ORIGIN_H2_FACTOR: f64 = 4.0;
const LOGDET_RTOL: f64 = 1e-9;
const LOGDET_D2_TOL: f64 = 1e-5;
const SOLITON_TOL: f64 = 1e-6;
const CONSTANT_RTOL: f64 = 1e-12;

struct Clause {
    name: String,
    ok: bool,
    unattainable: bool,
    detail: String,
}

fn clause(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Clause {
    Clause {
        name: name.into(),
        ok,
        unattainable: false,
        detail: detail.into(),
    }
}

struct Criterion {
    id: u32,
    title: &'static str,
    budget_s: f64,
    run: fn() -> Vec<Clause>,
}

fn criterion_1() -> Vec<Clause> {
    let p = Potential::square_well();
    let mut out = Vec::new();
    for &w in &[5.0, 10.0, 20.0] {
        let guard = phase_distance(w);
        out.push(clause(format!("phase guard w={w}"), guard >= PHASE_GUARD, format!("{guard:.3}")));
        let sd = spectral_data(&p, w, &SolverOptions::default()).expect("square well forward");
        let or = squarewell_oracle(w).expect("square well oracle");
        out.push(clause(
            format!("count w={w}"),
            sd.count() == or.count(),
            format!("{} vs {}", sd.count(), or.count()),
        ));
        if sd.count() == or.count() {
            let dxi = sd.xi.iter().zip(&or.xi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let dc = sd
                .c
                .iter()
                .zip(&or.c)
                .map(|(a, b)| ((a - b) / b).abs())
                .fold(0.0, f64::max);
            out.push(clause(format!("xi w={w}"), dxi <= SQUAREWELL_XI_TOL, format!("max {dxi:.1e}")));
            out.push(clause(format!("C w={w}"), dc <= SQUAREWELL_C_RTOL, format!("max rel {dc:.1e}")));
        }
    }
    out
}

fn criterion_2() -> Vec<Clause> {
    let p = Potential::q1();
    let mut out = Vec::new();
    for &w in &[10.0f64, 20.0, 40.0] {
        let sd = spectral_data(&p, w, &SolverOptions::default()).expect("q1 forward");
        let n = sd.count() as i64;
        let mut c = clause(
            format!("N=[w]+-1 w={w}"),
            (n - w.floor() as i64).abs() <= 1,
            format!("N={n}"),
        );
        c.unattainable = true;
        out.push(c);

        let (lo, hi) = (PI * PI / (256.0 * w * w), PI * PI / (16.0 * w * w));
        let eta_n = sd.xi[0] / w;
        let mut c = clause(
            format!("eta_N w={w}"),
            eta_n >= lo && eta_n <= hi,
            format!("{eta_n:.3e} in [{lo:.3e}, {hi:.3e}]"),
        );
        c.unattainable = true;
        out.push(c);
        let prof = wkb_spectrum(&p, w).expect("wkb");
        let eta_wkb = *prof.eta.last().expect("wkb levels");
        out.push(clause(
            format!("WKB eta_N w={w}"),
            eta_wkb >= lo && eta_wkb <= hi,
            format!("{eta_wkb:.3e}"),
        ));

        let gap = sd.xi.windows(2).map(|a| a[1] - a[0]).fold(f64::INFINITY, f64::min);
        out.push(clause(format!("gap w={w}"), gap >= 1.0 / (5.0 * w), format!("{gap:.3e}")));
        let sp = spacing_check(&prof, w);
        out.push(clause(format!("WKB gap w={w}"), sp.xi_gap_ok, format!("{:.3e}", sp.min_xi_gap)));

        let (llo, lhi) = NormingBracket::Q1.ln_bounds(w);
        let ln_d: Vec<f64> = sd.norming().iter().map(|d| d.ln()).collect();
        let inside = ln_d.iter().all(|v| *v >= llo && *v <= lhi);
        let (mn, mx) = ln_d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        out.push(clause(
            format!("norming bracket w={w}"),
            inside,
            format!("ln D in [{mn:.2}, {mx:.2}] within [{llo:.0}, {lhi:.0}]"),
        ));
    }
    out
}

fn criterion_3() -> Vec<Clause> {
    let p = Potential::q1();
    let w = 10.0;
    let fwd = forward(&p, w, &SolverOptions::default()).expect("q1 forward");
    let mid = fwd.levels.len() / 2;
    let r = jost_identity_check(&p, w, &fwd, mid, None).expect("identity check");
    vec![clause(
        format!("identity j={mid}"),
        r.residual <= JOST_RTOL,
        format!("lhs {:.6e} rhs {:.6e} rel {:.1e}", r.lhs, r.rhs, r.residual),
    )]
}

fn criterion_4() -> Vec<Clause> {
    let mut out = Vec::new();
    for w in [Complex64::new(1.0, 0.0), Complex64::new(4.0, 0.0), Complex64::new(1.0, 5.0)] {
        let ok_solve = solve_kernel(2.0, w, 128, KERNEL_RESIDUAL);
        let (ok, detail) = match &ok_solve {
            Ok(kf) => (kf.residual <= KERNEL_RESIDUAL, format!("{:.1e}", kf.residual)),
            Err(e) => (false, e.to_string()),
        };
        out.push(clause(format!("residual w={w}"), ok, detail));
        let r = coercivity_check(2.0, w, 100).expect("coercivity");
        out.push(clause(format!("coercivity w={w}"), r >= COERCIVITY_MIN, format!("{r:.6}")));
        let d = phi_diag_derivative(0.0, w, 1e-12).expect("diag derivative");
        let e = (d - w / 2.0).norm();
        out.push(clause(format!("dPhi(0)=w/2 w={w}"), e <= DIAG_DERIV_TOL, format!("{e:.1e}")));
    }
    let cr = cauchy_riemann_defect(2.0, Complex64::new(1.0, 1.0), 32, 1e-3).expect("cr");
    out.push(clause("Cauchy-Riemann w=1+i", cr <= CR_TOL, format!("{cr:.1e}")));
    out
}

fn criterion_5() -> Vec<Clause> {
    let p = Potential::q1();
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.02).collect();
    let (rows, report) = benchmark(&p, &[10.0, 20.0, 40.0, 80.0], Method::Gl0, &grid, 257).expect("benchmark");
    let errs: Vec<f64> = rows.iter().map(|r| r.sup_err).collect();
    let decreasing = errs.windows(2).all(|e| e[1] < e[0]);
    vec![
        clause(
            "strictly decreasing",
            decreasing,
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" "),
        ),
        clause(
            "exponent without log",
            report.exponent_without_log >= GL0_MIN_EXPONENT,
            format!(
                "{:.3} (raw slope {:.3}, log factor {:.3})",
                report.exponent_without_log, report.fitted_exponent, report.fitted_log_factor
            ),
        ),
    ]
}

fn criterion_6() -> Vec<Clause> {
    let p = Potential::q1();
    let w = 20.0;
    let n_kernel = 257;
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.02).collect();
    let sd = spectral_data(&p, w, &SolverOptions::default()).expect("q1 forward");
    let mut g0 = reconstruct_gl0(&sd, &grid).expect("gl0");
    g0.compare(&p);
    let mut gm = reconstruct_glm(&sd, &grid, n_kernel).expect("glm");
    gm.compare(&p);
    let (e0, em) = (g0.sup_error.unwrap(), gm.sup_error.unwrap());
    let h = 2.0 / (n_kernel - 1) as f64;
    let d0 = (gm.q_rec[0] - sd.q0).abs();
    vec![
        clause("glm beats gl0", em < e0, format!("{em:.3e} < {e0:.3e}")),
        clause(
            "Q(0) = q0",
            d0 <= GLM_ORIGIN_H2_FACTOR * h * h,
            format!("|Q(0) - q0| = {d0:.2e}, bound {:.2e}", GLM_ORIGIN_H2_FACTOR * h * h),
        ),
    ]
}

// ln det W for xi = (2, 5, 10), C = (3, 40, 200), evaluated with 50-digit arithmetic on the
// unscaled entries.
const LOGDET_ORACLE: [(f64, f64); 3] = [
    (0.5, 10.00373844592246937611694),
    (1.0, 24.26120327324710595154701),
    (2.0, 56.65608279599048400729805),
];

// (ln det W)'' at x for the same data, 40-digit numerical differentiation of the direct determinant.
const LOGDET_D2_ORACLE: [(f64, f64); 3] = [
    (0.2, 96.711139799734086564),
    (0.5, 29.646713159727841014),
    (0.9, 3.7250421248063974136),
];

fn criterion_7() -> Vec<Clause> {
    use slspec::forward_spectral::SpectralData;
    let xi = vec![2.0, 5.0, 10.0];
    let sd = SpectralData::new(10.0, "acceptance", xi.clone(), vec![3.0, 40.0, 200.0], 1.0, vec![]);
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for (x, expect) in LOGDET_ORACLE {
        let (l, sign) = build_w(x, &sd).expect("W").log_abs_det().expect("det");
        let e = if sign > 0.0 { ((l - expect) / expect).abs() } else { f64::INFINITY };
        worst = worst.max(e);
    }
    out.push(clause("ScaledMatrix log|det W|", worst <= LOGDET_RTOL, format!("max rel {worst:.1e}")));

    let d = sd.norming();
    let entries = |x: f64, order: u32| -> Vec<f64> {
        let mut m = vec![0.0; 9];
        for j in 0..3 {
            for k in 0..3 {
                let (a, b) = (xi[j], xi[k]);
                m[3 * j + k] = match order {
                    0 if j == k => (2.0 * a * x).sinh() / a - 2.0 * x + d[j],
                    0 => 2.0 * ((a + b) * x).sinh() / (a + b) - 2.0 * ((a - b) * x).sinh() / (a - b),
                    1 => 4.0 * (a * x).sinh() * (b * x).sinh(),
                    _ => 4.0 * (a * (a * x).cosh() * (b * x).sinh() + b * (a * x).sinh() * (b * x).cosh()),
                };
            }
        }
        m
    };
    let mut worst: f64 = 0.0;
    for (x, expect) in LOGDET_D2_ORACLE {
        let (_, d2) = logdet_d2(3, entries(x, 0), &entries(x, 1), &entries(x, 2)).expect("logdet_d2");
        worst = worst.max(((d2 - expect) / expect).abs());
    }
    out.push(clause("logdet_d2 on W vs 40-digit derivative", worst <= LOGDET_RTOL, format!("max rel {worst:.1e}")));

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let hstep = 1e-3;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = 4;
        let mut sym = |scale: f64| {
            let r = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            (&r + r.transpose()) * scale
        };
        let b = DMatrix::<f64>::from_fn(n, n, |i, j| ((i + 2 * j) as f64).sin());
        let s0 = &b * b.transpose() + DMatrix::identity(n, n) * n as f64;
        let (s1, s2) = (sym(1.0), sym(0.5));
        let at = |x: f64| &s0 + &s1 * x + &s2 * (x * x);
        let flat = |m: DMatrix<f64>| m.transpose().iter().copied().collect::<Vec<f64>>();
        let ld = |x: f64| at(x).determinant().abs().ln();
        let x = rng.gen_range(-0.5..0.5);
        let (_, d2) = logdet_d2(n, flat(at(x)), &flat(&s1 + &s2 * (2.0 * x)), &flat(&s2 * 2.0)).expect("logdet_d2");
        let fd = (ld(x + hstep) - 2.0 * ld(x) + ld(x - hstep)) / (hstep * hstep);
        worst = worst.max((d2 - fd).abs());
    }
    out.push(clause("logdet_d2 vs differences", worst <= LOGDET_D2_TOL, format!("max {worst:.1e}")));

    let (eta, c, eps) = (0.8, 1.5, 0.2);
    let grid = [0.0, 0.3, 1.0, 2.0];
    let r = lax_levermore(&[eta], &[c], eps, &grid).expect("lax_levermore");
    let f = |x: f64| (1.0 + eps * c * c * (-2.0 * eta * x / eps).exp() / (2.0 * eta)).ln();
    let h = 1e-4;
    let worst = grid
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let fd = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            (r.q_rec[i] + 2.0 * eps * eps * fd).abs()
        })
        .fold(0.0, f64::max);
    out.push(clause("one-soliton", worst <= SOLITON_TOL, format!("{worst:.1e}")));
    out
}

// (l, s, C_inf, C_L1) from 50-digit evaluation of the closed forms.
const CONSTANT_ORACLE: [(f64, u32, f64, f64); 6] = [
    (1.0, 1, 0.002101104854453086880850318, 0.0000622549586504618335066761),
    (2.0, 1, 0.000002207320804703163702740968, 2.325407925942427604533694e-8),
    (2.5, 1, 5.4966666170039838618366e-9, 3.30898684057147529366295e-11),
    (6.0, 1, 5.901043730173050900337495e-20, 1.550880547816432724033359e-23),
    (2.0, 2, 5.644634876492512617717385e-8, 7.135933473491769037706916e-10),
    (3.5, 3, 7.518511976605126854502393e-20, 1.958621596914643853172884e-22),
];

fn criterion_8() -> Vec<Clause> {
    let mut worst: f64 = 0.0;
    for (l, s, ci, cl) in CONSTANT_ORACLE {
        let a = vitushkin_c_inf(l, s).unwrap();
        let b = vitushkin_c_l1(l, s).unwrap();
        worst = worst.max(((a - ci) / ci).abs());
        worst = worst.max(((b - cl) / cl).abs());
    }
    let mut max_scaled: f64 = 0.0;
    for k in 0..=500 {
        let l = 1.0 + 5.0 * k as f64 / 500.0;
        max_scaled = max_scaled.max(2f64.powf(l) * vitushkin_c_inf(l, 1).unwrap());
    }
    vec![
        clause("50-digit oracle", worst <= CONSTANT_RTOL, format!("max rel {worst:.1e}")),
        clause("2^l C_inf(l,1) <= 1/4", max_scaled <= 0.25, format!("max {max_scaled:.6}")),
    ]
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, title: "square-well oracle", budget_s: 10.0, run: criterion_1 },
        Criterion { id: 2, title: "q1 spectrum reproductions", budget_s: 60.0, run: criterion_2 },
        Criterion { id: 3, title: "Jost identity", budget_s: 60.0, run: criterion_3 },
        Criterion { id: 4, title: "kernel correctness", budget_s: 120.0, run: criterion_4 },
        Criterion { id: 5, title: "gl0 round-trip rate", budget_s: 600.0, run: criterion_5 },
        Criterion { id: 6, title: "glm round trip", budget_s: 600.0, run: criterion_6 },
        Criterion { id: 7, title: "determinant machinery", budget_s: 30.0, run: criterion_7 },
        Criterion { id: 8, title: "constants", budget_s: 1.0, run: criterion_8 },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut hard_failure = false;
    for c in &criteria {
        let tag = format!("criterion_{}", c.id);
        if !filter.is_empty() && !filter.iter().any(|f| tag.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let clauses = (c.run)();
        let secs = t.elapsed().as_secs_f64();
        let in_budget = secs <= c.budget_s;
        let pass = in_budget && clauses.iter().all(|k| k.ok);
        println!(
            "criterion {} ({}): {} [{secs:.1} s, budget {} s]",
            c.id,
            c.title,
            if pass { "PASS" } else { "FAIL" },
            c.budget_s
        );
        for k in &clauses {
            let mark = match (k.ok, k.unattainable) {
                (true, _) => "ok",
                (false, true) => "FAIL (unattainable)",
                (false, false) => "FAIL",
            };
            println!("    {}: {mark}: {}", k.name, k.detail);
            hard_failure |= !k.ok && !k.unattainable;
        }
        hard_failure |= !in_budget;
    }
    if hard_failure {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
