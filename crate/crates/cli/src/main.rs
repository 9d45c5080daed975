//! `sgi`: sweeps, trajectories, QRDM reports, design windows, potential
//! expansions and the verification suite.

mod config;
mod output;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sgi_core::design::{g_bounds, mass_bounds, mass_bounds_noisy, nv_detection, NvDetection};
use sgi_core::dynamics::{sample_trajectories, TimeConvention};
use sgi_core::entanglement::{NegativityResult, Qrdm};
use sgi_core::oracle::finite_difference::{check_expansion, ExpansionCheck};
use sgi_core::oracle::suite::{run_suite, SuiteOptions, VerificationReport, VerifyLevel};
use sgi_core::potentials::{
    expand_potential, expansion_parameter, nv_map, table_coupling, to_unitless, ExpansionCoefficients,
    InteractionKind, Orientation, PhysicalParams, PotentialSpec, UnitlessParams,
};

use crate::config::{BoundsConfig, UnitlessConfig};
use crate::output::{num, write_csv, write_json, Meta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// `max(0, -2 lambda_min)` of the partial transpose.
    Exact,
    /// Closed form with the single-flip contrast.
    Closed,
    /// Trace against the small-coupling witness.
    Witness,
}

impl Estimator {
    pub fn pick(self, r: &NegativityResult) -> f64 {
        match self {
            Estimator::Exact => r.exact,
            Estimator::Closed => r.closed_form,
            Estimator::Witness => r.witness_trace,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Estimator::Exact => "exact",
            Estimator::Closed => "closed",
            Estimator::Witness => "witness",
        }
    }
}

#[derive(Parser)]
#[command(name = "sgi", version, about = "Two coupled Stern-Gerlach interferometers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (flat TOML keys)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Readout time: final (2 pi / omega_g), 2pi, or a number
    #[arg(long, global = true)]
    tau: Option<TimeConvention>,
    /// Negativity estimator
    #[arg(long, global = true, value_enum)]
    negativity: Option<Estimator>,
    /// Worker threads for sweeps
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Accepted for scripts; nothing here draws random numbers
    #[arg(long, global = true)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Grid of phases, contrasts and negativities
    Sweep,
    /// Diagonal branch trajectories
    Trajectories {
        #[arg(long = "f-q")]
        f_q: f64,
        #[arg(long)]
        g: f64,
        /// Last time; defaults to --tau
        #[arg(long)]
        tau_max: Option<f64>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
    },
    /// Full QRDM report at one point
    Qrdm(PointArgs),
    /// Negativity estimates at one point
    Negativity(PointArgs),
    /// Coupling and mass windows for a physical configuration
    Bounds,
    /// Expansion coefficients of a pair potential
    Expand {
        #[arg(long)]
        kind: InteractionKind,
        /// Angle between the separation and the displacement axis
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
    },
    /// Closed forms against the numerical oracles
    Verify {
        #[arg(value_enum, default_value = "fast")]
        level: Level,
        /// Perturb the closed forms; the suite must then fail
        #[arg(long)]
        negative_control: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Level {
    Fast,
    Full,
}

#[derive(clap::Args)]
struct PointArgs {
    #[arg(long = "f-q")]
    f_q: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long = "n-p")]
    n_p: Option<f64>,
    #[arg(long = "gamma-x")]
    gamma_x: Option<f64>,
    #[arg(long = "gamma-z")]
    gamma_z: Option<f64>,
    /// Use the force that meets the detection threshold
    #[arg(long)]
    constraint: bool,
}

impl PointArgs {
    fn resolve(&self, config: Option<&Path>) -> Result<UnitlessParams> {
        let from_file = config.map(config::load_point).transpose()?;
        let mut c = match from_file {
            Some(p) => UnitlessConfig {
                f_q: Some(p.f_q),
                g: p.g,
                s: p.s,
                n_p: p.n_p,
                gamma_x: p.gamma_x,
                gamma_z: p.gamma_z,
                constraint: false,
            },
            None => UnitlessConfig {
                f_q: None,
                g: self.g.context("missing --g (or --config)")?,
                s: 1.0,
                n_p: 0.0,
                gamma_x: 0.0,
                gamma_z: 0.0,
                constraint: false,
            },
        };
        if let Some(g) = self.g {
            c.g = g;
        }
        if self.f_q.is_some() {
            c.f_q = self.f_q;
        }
        if self.constraint {
            c.f_q = None;
            c.constraint = true;
        }
        c.s = self.s.unwrap_or(c.s);
        c.n_p = self.n_p.unwrap_or(c.n_p);
        c.gamma_x = self.gamma_x.unwrap_or(c.gamma_x);
        c.gamma_z = self.gamma_z.unwrap_or(c.gamma_z);
        c.resolve()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when the command ran but its checks failed.
fn run(cli: &Cli) -> Result<bool> {
    let tau = cli.tau.unwrap_or(TimeConvention::Final);
    let out = cli.out.as_deref();
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Sweep => cmd_sweep(cli),
        Command::Trajectories { f_q, g, tau_max, steps } => {
            let t = match tau_max {
                Some(t) => *t,
                None => tau.resolve(*g)?,
            };
            let rows: Vec<Vec<String>> = sample_trajectories(*f_q, *g, t, *steps)?
                .iter()
                .flat_map(|(t, b)| {
                    b.iter().map(move |(label, r)| {
                        let mut row = vec![num(*t), label.name()];
                        row.extend(r.iter().map(|&x| num(x)));
                        row
                    })
                })
                .collect();
            let meta = Meta::new("trajectories", num(t))
                .with("f_q", num(*f_q))
                .with("g", num(*g))
                .with("steps", steps.to_string());
            write_csv(out, &meta, &["tau", "branch", "x1", "p1", "x2", "p2"], &rows)?;
            Ok(true)
        }
        Command::Qrdm(args) => point_report(args, config, tau, cli.negativity, out, true),
        Command::Negativity(args) => point_report(args, config, tau, cli.negativity, out, false),
        Command::Bounds => cmd_bounds(config.context("bounds needs --config")?, out),
        Command::Expand { kind, theta } => cmd_expand(*kind, *theta, config.context("expand needs --config")?, out),
        Command::Verify { level, negative_control } => cmd_verify(*level, *negative_control, out),
    }
}

fn cmd_sweep(cli: &Cli) -> Result<bool> {
    let path = cli.config.as_deref().context("sweep needs --config")?;
    let spec: sweep::SweepSpec = config::load(path)?;
    let tau = match (cli.tau, &spec.tau) {
        (Some(t), _) => t,
        (None, Some(s)) => s.parse().map_err(anyhow::Error::msg)?,
        (None, None) => TimeConvention::Final,
    };
    let est = cli.negativity.or(spec.negativity).unwrap_or(Estimator::Witness);
    let grid = spec.grid()?;
    let rows = sweep::run(&grid, tau, est, cli.workers)?;
    let meta = Meta::new("sweep", tau.name())
        .with("axes", sweep::axis_names(&grid))
        .with("negativity", est.name())
        .with("constraint", grid.constraint.to_string())
        .with("points", grid.points.len().to_string());
    write_csv(cli.out.as_deref(), &meta, &sweep::HEADER, &rows)?;
    Ok(true)
}

#[derive(Serialize)]
struct MatrixParts {
    re: [[f64; 4]; 4],
    im: [[f64; 4]; 4],
}

impl MatrixParts {
    fn of(rho: &Qrdm) -> Self {
        let m = rho.matrix();
        Self {
            re: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)].re)),
            im: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)].im)),
        }
    }
}

#[derive(Serialize)]
struct PointReport {
    params: UnitlessParams,
    tau: f64,
    phase: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    qrdm: Option<MatrixParts>,
    negativity: NegativityResult,
    estimator: Estimator,
    value: f64,
    verdict: &'static str,
}

fn point_report(
    args: &PointArgs,
    config: Option<&Path>,
    tau: TimeConvention,
    est: Option<Estimator>,
    out: Option<&Path>,
    full: bool,
) -> Result<bool> {
    let p = args.resolve(config)?;
    let est = est.unwrap_or(Estimator::Witness);
    let (p, t, r) = sweep::evaluate(&p, false, tau)?;
    let e = sgi_core::dynamics::open_qrdm(&p, t)?;
    let value = est.pick(&r);
    let report = PointReport {
        params: p,
        tau: t,
        phase: r.phase,
        qrdm: full.then(|| MatrixParts::of(&e.qrdm)),
        negativity: r,
        estimator: est,
        value,
        verdict: if value > 0.0 { "entangled" } else { "no entanglement" },
    };
    let meta = Meta::new(if full { "qrdm" } else { "negativity" }, tau.name());
    write_json(out, &meta, &report)?;
    Ok(true)
}

#[derive(Serialize)]
struct Window {
    m_min: f64,
    m_max: f64,
    contains_m: bool,
}

impl Window {
    fn new((m_min, m_max): (f64, f64), m: f64) -> Self {
        Self {
            m_min,
            m_max,
            contains_m: m_min <= m && m <= m_max,
        }
    }
}

#[derive(Serialize)]
struct NvReport {
    detection: NvDetection,
    /// Trap frequency and force at the configured gradient.
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_q: Option<f64>,
}

#[derive(Serialize)]
struct BoundsOutput {
    physical: PhysicalParams,
    unitless: UnitlessParams,
    unitary_window: Window,
    noisy_window: Window,
    coupling: sgi_core::design::BoundsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    nv: Option<NvReport>,
}

fn cmd_bounds(path: &Path, out: Option<&Path>) -> Result<bool> {
    let c: BoundsConfig = config::load(path)?;
    let nv = c
        .nv()
        .map(|nv| -> Result<NvReport> {
            let detection = nv_detection(&nv, c.d)?;
            let mapped = c.grad_b.map(|_| nv_map(&nv)).transpose()?;
            Ok(NvReport {
                detection,
                omega: mapped.map(|m| m.0),
                f_q: mapped.map(|m| m.1),
            })
        })
        .transpose()?;
    let omega = match (&nv, c.omega) {
        (_, Some(w)) => w,
        (Some(r), None) => r.omega.unwrap_or(r.detection.omega),
        (None, None) => bail!("missing omega"),
    };
    let f_q = match (&nv, c.f_q) {
        (_, Some(f)) => f,
        (Some(r), None) => r.f_q.unwrap_or(r.detection.f_q),
        (None, None) => 0.0,
    };
    let phys = c.physical(omega, f_q);
    let u = to_unitless(&phys)?;
    let report = BoundsOutput {
        physical: phys,
        unitless: u,
        unitary_window: Window::new(mass_bounds(phys.d, omega)?, phys.m),
        noisy_window: Window::new(mass_bounds_noisy(phys.d, omega, phys.s_ff, u.s, u.n_p)?, phys.m),
        coupling: g_bounds(&phys, &u, c.target())?,
        nv,
    };
    write_json(out, &Meta::new("bounds", "final".into()), &report)?;
    Ok(true)
}

#[derive(Serialize)]
struct TableEntry {
    orientation: Orientation,
    f: f64,
    g: f64,
}

#[derive(Serialize)]
struct ExpandOutput {
    kind: InteractionKind,
    theta: f64,
    coefficients: ExpansionCoefficients,
    expansion_parameter: f64,
    finite_difference: ExpansionCheck,
    table: Vec<TableEntry>,
}

fn cmd_expand(kind: InteractionKind, theta: f64, path: &Path, out: Option<&Path>) -> Result<bool> {
    let p: PhysicalParams = config::load(path)?;
    let spec = match kind {
        InteractionKind::Newton => PotentialSpec::newton(p.m, theta, p.d)?,
        InteractionKind::Coulomb => PotentialSpec::coulomb(p.q.context("coulomb needs q")?, theta, p.d)?,
        InteractionKind::Casimir => PotentialSpec::casimir(
            p.m,
            p.epsilon.context("casimir needs epsilon")?,
            p.rho_m.context("casimir needs rho_m")?,
            theta,
            p.d,
        )?,
    };
    let table = [Orientation::Linear, Orientation::Parallel]
        .into_iter()
        .map(|o| table_coupling(kind, o, &p).map(|(f, g)| TableEntry { orientation: o, f, g }))
        .collect::<sgi_core::Result<Vec<_>>>()?;
    let report = ExpandOutput {
        kind,
        theta,
        coefficients: expand_potential(&spec, p.m, p.omega)?,
        expansion_parameter: expansion_parameter(&spec, p.m, p.omega)?,
        finite_difference: check_expansion(&spec, p.m, p.omega)?,
        table,
    };
    write_json(out, &Meta::new("expand", "none".into()), &report)?;
    Ok(true)
}

fn print_summary(r: &VerificationReport) {
    for rep in &r.reports {
        for q in &rep.quantities {
            println!(
                "{} {} / {}: max_abs {:.3e} tol {:.1e}",
                if q.pass { "PASS" } else { "FAIL" },
                rep.suite,
                q.name,
                q.max_abs,
                q.tolerance
            );
        }
        for n in &rep.notes {
            println!("note {}: {n}", rep.suite);
        }
    }
    for a in &r.arbitration {
        println!("arbitration {}: adopted {} ({})", a.quantity, a.adopted, a.verdict);
        for c in &a.candidates {
            println!("  candidate {}: max deviation {:.3e}", c.label, c.max_abs_deviation);
        }
    }
    println!("{}", if r.pass { "verify: pass" } else { "verify: FAIL" });
}

fn cmd_verify(level: Level, negative_control: bool, out: Option<&Path>) -> Result<bool> {
    let level = match level {
        Level::Fast => VerifyLevel::Fast,
        Level::Full => VerifyLevel::Full,
    };
    let report = run_suite(&SuiteOptions { level, negative_control })?;
    print_summary(&report);
    if let Some(path) = out {
        let meta = Meta::new("verify", "grid".into()).with("negative_control", negative_control.to_string());
        write_json(Some(path), &meta, &report)?;
    }
    if !report.pass {
        for f in report.failures() {
            eprintln!("failed: {f}");
        }
    }
    Ok(report.pass)
}
