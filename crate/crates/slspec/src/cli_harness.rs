//! Command-line front end: argument model, validation and the artifact writers.

use crate::bounds_rates::{convergence_report, vitushkin_c_inf, vitushkin_c_l1, EnvelopeKind, RateReport};
use crate::err;
use crate::error::{Error, Result};
use crate::forward_spectral::{forward, SolverOptions, SpectralData};
use crate::gl_kernel::{coercivity_check_with, solve_kernel, KernelField};
use crate::plot::{line_plot, Axes, Series};
use crate::potentials::{potential_from_arg, Potential};
use crate::reconstruct::{lax_levermore, reconstruct_gl0, reconstruct_glm, Method, ReconstructionResult};
use crate::wkb::wkb_spectrum;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

const MODULE: &str = "cli_harness";

#[derive(Debug, Parser)]
#[command(name = "slspec", version, about = "Semiclassical Sturm-Liouville spectra and Gelfand-Levitan reconstruction")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues and characteristic values of -y'' - w^2 Q y, written as spectral JSON.
    Forward(ForwardArgs),
    /// Semiclassical quantization table.
    Wkb(WkbArgs),
    /// Solve the kernel equation on a uniform grid.
    Kernel(KernelArgs),
    /// Rebuild Q from spectral JSON.
    Reconstruct(ReconstructArgs),
    /// Forward-then-inverse sweep over omega with a rate fit.
    Benchmark(BenchmarkArgs),
    /// Print the explicit approximation constants.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    /// Built-in name (q1, square_well, smoothed_well) or a TOML/JSON config path.
    #[arg(long)]
    pub potential: String,
    #[arg(long)]
    pub omega: f64,
    #[arg(long, default_value_t = 1e-11)]
    pub rtol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WkbArgs {
    #[arg(long)]
    pub potential: String,
    #[arg(long)]
    pub omega: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Real part of w, or "re,im".
    #[arg(long)]
    pub w: String,
    #[arg(long = "X")]
    pub x_max: f64,
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Random trial vectors for the coercivity diagnostic (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub coercivity_trials: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub spectral: PathBuf,
    /// gl0, glm or ll.
    #[arg(long, default_value = "gl0")]
    pub method: String,
    /// start:stop:count
    #[arg(long, default_value = "0:2:101")]
    pub grid: String,
    /// Reference potential for the error columns.
    #[arg(long = "ref")]
    pub reference: Option<String>,
    #[arg(long, default_value_t = 257)]
    pub n_kernel: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional SVG of Q_ref against Q_rec.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub potential: String,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub omegas: Vec<f64>,
    #[arg(long, default_value = "gl0")]
    pub method: String,
    #[arg(long, default_value = "0:2:101")]
    pub grid: String,
    #[arg(long, default_value_t = 257)]
    pub n_kernel: usize,
    #[arg(long, default_value = "rates.csv")]
    pub out: PathBuf,
    /// Optional SVG of the error sweep and fitted envelope.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub l: f64,
    #[arg(long, default_value_t = 1)]
    pub s: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || err!(MODULE, "grid", InvalidInput, "grid must be start:stop:count, got {s:?}");
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if count < 2 {
            return Err(err!(MODULE, "grid", InvalidInput, "grid count must be at least 2"));
        }
        if !(stop > start) || start < 0.0 {
            return Err(err!(MODULE, "grid", InvalidInput, "grid needs 0 <= start < stop"));
        }
        Ok(Self { start, stop, count })
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + i as f64 * h).collect()
    }
}

fn parse_w(s: &str) -> Result<Complex64> {
    let bad = || err!(MODULE, "kernel", InvalidInput, "w must be a number or re,im; got {s:?}");
    let parts: Vec<&str> = s.split(',').collect();
    let re: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let im: f64 = match parts.len() {
        1 => 0.0,
        2 => parts[1].trim().parse().map_err(|_| bad())?,
        _ => return Err(bad()),
    };
    Ok(Complex64::new(re, im))
}

fn parse_method(s: &str) -> Result<Method> {
    Method::parse(s).ok_or_else(|| err!(MODULE, "method", InvalidInput, "unknown method {s:?}; use gl0, glm or ll"))
}

fn io_err(op: &'static str, path: &Path, e: impl std::fmt::Display) -> Error {
    err!(MODULE, op, Io, "{}: {e}", path.display())
}

fn write_text(op: &'static str, path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(op, path, e))
}

fn csv_writer(op: &'static str, path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| io_err(op, path, e))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn finish(op: &'static str, path: &Path, w: csv::Writer<fs::File>) -> Result<fs::File> {
    w.into_inner().map_err(|e| io_err(op, path, e))
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(err!(MODULE, "run", InvalidInput, "--jobs must be at least 1"));
        }
        // a second initialisation (tests, repeated runs) keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match &cli.command {
        Command::Forward(a) => run_forward(a),
        Command::Wkb(a) => run_wkb(a),
        Command::Kernel(a) => run_kernel(a, cli.seed),
        Command::Reconstruct(a) => run_reconstruct(a),
        Command::Benchmark(a) => run_benchmark(a),
        Command::Bounds(a) => run_bounds(a),
    }
}

fn check_omega(op: &'static str, omega: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(err!(MODULE, op, InvalidInput, "omega must be positive, got {omega}"));
    }
    Ok(())
}

pub fn run_forward(a: &ForwardArgs) -> Result<()> {
    check_omega("forward", a.omega)?;
    let p = potential_from_arg(&a.potential)?;
    let opts = SolverOptions {
        rtol: a.rtol,
        ..SolverOptions::default()
    };
    let f = forward(&p, a.omega, &opts)?;
    let sd = f.spectral_data(&p, a.omega);
    sd.write(&a.out)?;
    log::info!("forward: {} levels written to {}", sd.count(), a.out.display());
    println!("{} levels", sd.count());
    Ok(())
}

pub fn run_wkb(a: &WkbArgs) -> Result<()> {
    check_omega("wkb", a.omega)?;
    let p = potential_from_arg(&a.potential)?;
    let prof = wkb_spectrum(&p, a.omega)?;
    let mut w = csv_writer("wkb", &a.out)?;
    let io = |e: csv::Error| io_err("wkb", &a.out, e);
    w.write_record(["j", "eta", "xi_wkb", "x_plus", "action", "theta_plus", "log_s"]).map_err(io)?;
    let xi = prof.xi();
    for j in 0..prof.eta.len() {
        w.write_record([
            (j + 1).to_string(),
            num(prof.eta[j]),
            num(xi[j]),
            num(prof.x_plus[j]),
            num(prof.action_values[j]),
            num(prof.theta_plus[j]),
            num(prof.log_s[j]),
        ])
        .map_err(io)?;
    }
    finish("wkb", &a.out, w)?;
    println!("{} WKB levels (predicted count {})", prof.eta.len(), prof.predicted_count);
    Ok(())
}

pub fn write_kernel_csv(path: &Path, kf: &KernelField) -> Result<()> {
    let mut w = csv_writer("kernel", path)?;
    let io = |e: csv::Error| io_err("kernel", path, e);
    w.write_record(["x", "y", "re_A", "im_A"]).map_err(io)?;
    for (i, row) in kf.a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            w.write_record([num(kf.grid[i]), num(kf.grid[j]), num(v.re), num(v.im)]).map_err(io)?;
        }
    }
    w.write_record(["x", "re_diag", "im_diag", "re_diag_deriv", "im_diag_deriv"]).map_err(io)?;
    for i in 0..kf.grid.len() {
        w.write_record([
            num(kf.grid[i]),
            num(kf.diag[i].re),
            num(kf.diag[i].im),
            num(kf.diag_deriv[i].re),
            num(kf.diag_deriv[i].im),
        ])
        .map_err(io)?;
    }
    finish("kernel", path, w)?;
    Ok(())
}

pub fn run_kernel(a: &KernelArgs, seed: u64) -> Result<()> {
    let w = parse_w(&a.w)?;
    let kf = solve_kernel(a.x_max, w, a.n, a.tol)?;
    write_kernel_csv(&a.out, &kf)?;
    println!("residual {:e}, sup|A| {:e}", kf.residual, kf.sup_abs());
    if a.coercivity_trials > 0 {
        let r = coercivity_check_with(a.x_max, w, a.coercivity_trials, a.n, seed)?;
        println!("coercivity min ratio {r}");
    }
    Ok(())
}

/// Runs one inverse method on spectral data; `ll` uses eta = xi/omega, eps = 1/omega and
/// c_j = 2 xi_j sqrt(4 xi_j^2 / C_j), and its sign is flipped to compare with Q.
pub fn reconstruct_with(sd: &SpectralData, method: Method, grid: &[f64], n_kernel: usize) -> Result<ReconstructionResult> {
    sd.validate()?;
    match method {
        Method::Gl0 => reconstruct_gl0(sd, grid),
        Method::Glm => reconstruct_glm(sd, grid, n_kernel),
        Method::LaxLevermore => {
            let eps = 1.0 / sd.omega;
            let eta: Vec<f64> = sd.xi.iter().map(|x| x * eps).collect();
            let c: Vec<f64> = sd
                .xi
                .iter()
                .zip(sd.norming())
                .map(|(x, d)| 2.0 * x * d.sqrt())
                .collect();
            let mut r = lax_levermore(&eta, &c, eps, grid)?;
            r.q_rec.iter_mut().chain(r.q_int.iter_mut()).for_each(|v| *v = -*v);
            Ok(r)
        }
    }
}

pub fn write_reconstruction_csv(path: &Path, r: &ReconstructionResult) -> Result<()> {
    let mut w = csv_writer("reconstruct", path)?;
    let io = |e: csv::Error| io_err("reconstruct", path, e);
    w.write_record(["x", "Q_ref", "Q_rec", "Q_int_ref", "Q_int_rec", "abs_err", "flag_singular"]).map_err(io)?;
    for i in 0..r.grid.len() {
        let qr = r.q_ref.as_ref().map(|v| v[i]);
        let qir = r.q_int_ref.as_ref().map(|v| v[i]);
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        w.write_record([
            num(r.grid[i]),
            opt(qr),
            num(r.q_rec[i]),
            opt(qir),
            num(r.q_int[i]),
            opt(qr.map(|q| (q - r.q_rec[i]).abs())),
            (r.singular[i] as u8).to_string(),
        ])
        .map_err(io)?;
    }
    finish("reconstruct", path, w)?;
    Ok(())
}

pub fn run_reconstruct(a: &ReconstructArgs) -> Result<()> {
    let sd = SpectralData::read(&a.spectral)?;
    let method = parse_method(&a.method)?;
    let grid = GridSpec::parse(&a.grid)?.nodes();
    let mut r = reconstruct_with(&sd, method, &grid, a.n_kernel)?;
    if let Some(name) = &a.reference {
        r.compare(&potential_from_arg(name)?);
    }
    write_reconstruction_csv(&a.out, &r)?;
    if let Some(svg) = &a.svg {
        let mut series = vec![Series {
            label: "Q_rec",
            points: r.grid.iter().copied().zip(r.q_rec.iter().copied()).collect(),
            dashed: false,
        }];
        if let Some(q) = &r.q_ref {
            series.insert(
                0,
                Series {
                    label: "Q_ref",
                    points: r.grid.iter().copied().zip(q.iter().copied()).collect(),
                    dashed: true,
                },
            );
        }
        let title = format!("{} reconstruction, omega = {}", a.method, sd.omega);
        write_text("reconstruct", svg, &line_plot(&title, "x", "Q", &series, Axes::Linear))?;
    }
    if let (Some(s), Some(l)) = (r.sup_error, r.l1_error) {
        println!("sup |int Q - int Q_rec| = {s:e}, L1 |Q - Q_rec| = {l:e}");
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub omega: f64,
    pub levels: usize,
    pub sup_err: f64,
    pub l1_err: f64,
}

/// Forward then inverse on `p` for each omega, jobs fanned out over the rayon pool.
pub fn benchmark(p: &Potential, omegas: &[f64], method: Method, grid: &[f64], n_kernel: usize) -> Result<(Vec<BenchmarkRow>, RateReport)> {
    if omegas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(err!(MODULE, "benchmark", InvalidInput, "omegas must be strictly increasing"));
    }
    for &w in omegas {
        check_omega("benchmark", w)?;
    }
    let rows: Vec<BenchmarkRow> = omegas
        .par_iter()
        .map(|&omega| {
            let f = forward(p, omega, &SolverOptions::default())?;
            let sd = f.spectral_data(p, omega);
            let mut r = reconstruct_with(&sd, method, grid, n_kernel)?;
            r.compare(p);
            Ok(BenchmarkRow {
                omega,
                levels: sd.count(),
                sup_err: r.sup_error.unwrap_or(f64::NAN),
                l1_err: r.l1_error.unwrap_or(f64::NAN),
            })
        })
        .collect::<Result<_>>()?;
    let kind = match method {
        Method::Glm => EnvelopeKind::GlmRate {
            m: p.m_smoothness as u32,
        },
        _ => EnvelopeKind::Gl0Rate,
    };
    let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.omega, r.sup_err)).collect();
    let report = convergence_report(&samples, kind)?;
    Ok((rows, report))
}

pub fn run_benchmark(a: &BenchmarkArgs) -> Result<()> {
    let p = potential_from_arg(&a.potential)?;
    let method = parse_method(&a.method)?;
    let grid = GridSpec::parse(&a.grid)?.nodes();
    let (rows, report) = benchmark(&p, &a.omegas, method, &grid, a.n_kernel)?;
    let mut w = csv_writer("benchmark", &a.out)?;
    let io = |e: csv::Error| io_err("benchmark", &a.out, e);
    w.write_record(["omega", "sup_err", "L1_err"]).map_err(io)?;
    for r in &rows {
        w.write_record([num(r.omega), num(r.sup_err), num(r.l1_err)]).map_err(io)?;
    }
    let mut file = finish("benchmark", &a.out, w)?;
    let trailer = serde_json::to_string(&report).expect("report serializes");
    writeln!(file, "# {trailer}").map_err(|e| io_err("benchmark", &a.out, e))?;
    if let Some(svg) = &a.svg {
        let env: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.omega, report.prefactor * report.envelope_kind.envelope(r.omega)))
            .collect();
        let series = [
            Series {
                label: "sup error",
                points: rows.iter().map(|r| (r.omega, r.sup_err)).collect(),
                dashed: false,
            },
            Series {
                label: "envelope",
                points: env,
                dashed: true,
            },
        ];
        write_text("benchmark", svg, &line_plot("rate fit", "omega", "error", &series, Axes::LogLog))?;
    }
    println!(
        "fitted exponent {:.4} (without log factor {:.4}), pass = {}",
        report.fitted_exponent, report.exponent_without_log, report.pass
    );
    Ok(())
}

pub fn run_bounds(a: &BoundsArgs) -> Result<()> {
    let ci = vitushkin_c_inf(a.l, a.s)?;
    let cl = vitushkin_c_l1(a.l, a.s)?;
    println!("C_inf({}, {}) = {ci:.15e}", a.l, a.s);
    println!("C_L1({}, {}) = {cl:.15e}", a.l, a.s);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parsing() {
        let g = GridSpec::parse("0:3:256").unwrap();
        let n = g.nodes();
        assert_eq!(n.len(), 256);
        assert_eq!(n[0], 0.0);
        assert!((n[255] - 3.0).abs() < 1e-15);
        assert!(GridSpec::parse("0:3:1").is_err());
        assert!(GridSpec::parse("0:3").is_err());
        assert!(GridSpec::parse("2:1:5").is_err());
    }

    #[test]
    fn parses_complex_w() {
        assert_eq!(parse_w("4").unwrap(), Complex64::new(4.0, 0.0));
        assert_eq!(parse_w("1,5").unwrap(), Complex64::new(1.0, 5.0));
        assert!(parse_w("a").is_err());
    }

    #[test]
    fn clap_model_accepts_documented_flags() {
        let cli = Cli::try_parse_from([
            "slspec", "kernel", "--w", "4.0", "--X", "2", "--n", "128", "--out", "k.csv",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::Kernel(_)));
        let cli = Cli::try_parse_from([
            "slspec", "benchmark", "--potential", "q1", "--omegas", "10,20,40", "--method", "gl0", "--jobs", "2",
        ])
        .unwrap();
        match cli.command {
            Command::Benchmark(b) => assert_eq!(b.omegas, vec![10.0, 20.0, 40.0]),
            _ => panic!("wrong subcommand"),
        }
        assert_eq!(cli.jobs, Some(2));
    }

    #[test]
    fn benchmark_rejects_unordered_omegas() {
        let p = Potential::square_well();
        let e = benchmark(&p, &[10.0, 5.0, 20.0], Method::Gl0, &[0.0, 1.0], 64).unwrap_err();
        assert_eq!(e.module, MODULE);
    }
}
