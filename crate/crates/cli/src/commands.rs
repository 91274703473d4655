//! Subcommand implementations. Each writes its CSV/JSON artifacts through
//! [`Outputs`] and returns a few summary lines for stdout.

use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use orbitflow_core::contour::{self, PerronResult};
use orbitflow_core::counting::{self, fit_rate, Mode, OrbitTable, RateFit, BOUNDARY_SLACK};
use orbitflow_core::interval::{dolgopyat_probe, telescoping_sequence, DolgopyatProbeResult, GridFunction, IntervalModel};
use orbitflow_core::suspension::SuspensionSystem;
use orbitflow_core::symbolic::{admissible_words, word_key, CylinderFunction, EnumerationOptions};
use orbitflow_core::{interval, par, thermo, zeta, Error};
use serde::Serialize;

use crate::config::{Command, ExperimentConfig, GibbsPotential, Grid, ScanKind};
use crate::error::CliError;
use crate::model::Model;
use crate::output::{config_hash, f, Outputs, RunManifest};
use crate::validate::validate;

type Lines = Vec<String>;

fn grid(g: &Grid) -> Result<Vec<f64>, CliError> {
    g.points().map_err(CliError::Schema)
}

fn symbolic(model: &Model, cmd: Command) -> Result<(&SuspensionSystem, &CylinderFunction), CliError> {
    match model {
        Model::Symbolic { sys, k } => Ok((sys, k)),
        Model::Interval { .. } => Err(Error::invalid(format!("{} needs a symbolic model", cmd.name())).into()),
    }
}

fn interval(model: &Model, cmd: Command) -> Result<(&IntervalModel, &GridFunction), CliError> {
    match model {
        Model::Interval { model, k } => Ok((model, k)),
        Model::Symbolic { .. } => Err(Error::invalid(format!("{} needs an interval model", cmd.name())).into()),
    }
}

/// Validates, builds the model and runs `command` on a pool of
/// `cfg.run.workers` threads. The manifest is written last.
pub fn run(cfg: &ExperimentConfig, command: Command, out: &Path, quiet: bool) -> Result<RunManifest, CliError> {
    let report = validate(cfg, Some(command));
    if !report.passed() {
        return Err(CliError::Invalid(report.violations));
    }
    let start = Instant::now();
    let mut outputs = Outputs::new(out)?;
    let lines = par::with_workers(cfg.run.workers, || -> Result<Lines, CliError> {
        let model = Model::build(&cfg.model)?;
        dispatch(cfg, command, &model, &mut outputs)
    })?;
    let manifest = RunManifest {
        command: command.name().into(),
        config_hash: config_hash(cfg),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.run.seed,
        workers: cfg.run.workers,
        wall_time_s: start.elapsed().as_secs_f64(),
        tolerances: Default::default(),
        outputs: Vec::new(),
    };
    let manifest = outputs.finish(manifest)?;
    if !quiet {
        for l in lines {
            println!("{l}");
        }
    }
    Ok(manifest)
}

fn dispatch(cfg: &ExperimentConfig, cmd: Command, model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    match cmd {
        Command::Pressure => pressure(model, out),
        Command::Gibbs => gibbs(cfg, model, out),
        Command::Normalize => normalize(model, out),
        Command::Orbits => orbits(cfg, model, out),
        Command::ZetaScan => zeta_scan(cfg, model, out),
        Command::Residue => residue(model, out),
        Command::Equidist => equidist(cfg, model, out),
        Command::Window => window(cfg, model, out),
        Command::Perron => perron(cfg, model, out),
        Command::PsiEll => psi_ell(cfg, model, out),
        Command::DolgopyatProbe => dolgopyat(cfg, model, out),
        Command::Telescope => telescope(cfg, model, out),
    }
}

#[derive(Serialize)]
struct PressureOut {
    potential: &'static str,
    pressure: f64,
    /// Root of `P(ψ − c r) = 0`.
    c: f64,
}

fn pressure(model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (p, c) = match model {
        Model::Symbolic { sys, .. } => (thermo::pressure(sys.base(), sys.psi())?, sys.c()),
        Model::Interval { model, .. } => (model.pressure(0.0)?, model.c()),
    };
    out.json("pressure.json", &PressureOut { potential: "psi", pressure: p, c })?;
    Ok(vec![format!("pressure = {}", f(p)), format!("c = {}", f(c))])
}

fn gibbs(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (sys, _) = symbolic(model, Command::Gibbs)?;
    let params = &cfg.run.gibbs;
    let phi = match params.potential {
        GibbsPotential::Psi => sys.psi().clone(),
        GibbsPotential::Normalized => thermo::shifted_potential(sys.psi(), sys.roof().function(), sys.c())?,
    };
    let g = thermo::rpf(sys.base(), &phi)?;
    let mut body = String::from("word,measure\n");
    for w in admissible_words(sys.base(), params.depth.max(1))? {
        body.push_str(&format!("{},{}\n", w.key(), f(g.cylinder_measure(w.symbols())?)));
    }
    out.csv("gibbs.csv", body)?;
    out.json("gibbs.json", &g)?;
    out.tolerance("gibbs.residual_stationary", g.residual_stationary);
    Ok(vec![format!("pressure = {}", f(g.pressure)), format!("stationary residual = {:e}", g.residual_stationary)])
}

#[derive(Serialize)]
struct NormalizeOut<'a> {
    #[serde(flatten)]
    result: &'a thermo::NormalizationResult,
    flow_average: f64,
    lattice: &'a orbitflow_core::suspension::LatticeReport,
}

fn normalize(model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (sys, k) = symbolic(model, Command::Normalize)?;
    let r = sys.normalization();
    out.json("normalize.json", &NormalizeOut { result: r, flow_average: sys.flow_average(k)?, lattice: sys.lattice() })?;
    out.tolerance("normalize.residual", r.residual);
    Ok(vec![format!("c = {}", f(r.c)), format!("dP/dc = {}", f(r.dp_dc))])
}

#[derive(Serialize)]
struct OrbitsOut {
    budget: f64,
    orbits: usize,
    instances: usize,
    z_t: counting::ZT,
}

fn orbits(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (sys, k) = symbolic(model, Command::Orbits)?;
    let p = &cfg.run.orbits;
    let table = OrbitTable::build(sys, k, p.budget, &EnumerationOptions { max_items: p.max_instances })?;
    let mut body = String::from("word,period,length,psi,k\n");
    for o in table.orbits() {
        body.push_str(&format!("{},{},{},{},{}\n", word_key(&o.word), o.period(), f(o.length), f(o.psi), f(o.k)));
    }
    out.csv("orbits.csv", body)?;
    let z_t = table.z_t(p.budget)?;
    out.json("orbits.json", &OrbitsOut { budget: p.budget, orbits: table.orbits().len(), instances: table.instances().len(), z_t })?;
    out.tolerance("counting.boundary_slack", BOUNDARY_SLACK);
    Ok(vec![format!("{} prime orbits, {} instances with length <= {}", table.orbits().len(), table.instances().len(), p.budget)])
}

fn zeta_scan(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (sys, k) = symbolic(model, Command::ZetaScan)?;
    let p = &cfg.run.zeta_scan;
    let report = match p.scan {
        ScanKind::Zero => zeta::zero_scan(sys, p.sigma, p.t, p.grid_steps)?,
        ScanKind::Growth => zeta::growth_scan(sys, k, p.growth_sigma, &grid(&p.t_list)?)?,
    };
    out.csv("scan.csv", report.to_csv())?;
    let mut body = String::from("sigma_lo,sigma_hi,t_lo,t_hi\n");
    for c in &report.crossings {
        body.push_str(&format!("{},{},{},{}\n", f(c.sigma.0), f(c.sigma.1), f(c.t.0), f(c.t.1)));
    }
    out.csv("crossings.csv", body)?;
    #[derive(Serialize)]
    struct ScanSummary<'a> {
        crossings: usize,
        coarse_grid: bool,
        zero_count: &'a Option<zeta::ZeroCount>,
        growth: &'a Option<zeta::GrowthFit>,
        fit_skipped: bool,
    }
    out.json(
        "scan.json",
        &ScanSummary {
            crossings: report.crossings.len(),
            coarse_grid: report.coarse_grid,
            zero_count: &report.zero_count,
            growth: &report.growth,
            fit_skipped: report.fit_skipped,
        },
    )?;
    out.tolerance("zeta.pole_condition", zeta::POLE_CONDITION);
    let mut lines = vec![format!("{} points, {} crossing cells", report.points.len(), report.crossings.len())];
    if let Some(z) = &report.zero_count {
        lines.push(format!("zeros in rectangle: {}", z.count));
    }
    if let Some(g) = &report.growth {
        lines.push(format!("growth exponent = {} (residual {:e})", f(g.alpha_hat), g.residual));
    }
    Ok(lines)
}

#[derive(Serialize)]
struct ResidueOut {
    residue: zeta::Residue,
    c: f64,
    flow_average: f64,
    /// `flow_average / c`.
    expected: f64,
    abs_difference: f64,
}

fn residue(model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (sys, k) = symbolic(model, Command::Residue)?;
    let r = zeta::residue_at_one(sys, k)?;
    let avg = sys.flow_average(k)?;
    let expected = avg / sys.c();
    out.json(
        "residue.json",
        &ResidueOut { residue: r, c: sys.c(), flow_average: avg, expected, abs_difference: (r.value - expected).abs() },
    )?;
    out.tolerance("zeta.residue_step_min", zeta::RESIDUE_STEPS[2]);
    Ok(vec![format!("residue = {}", f(r.value)), format!("flow_average / c = {}", f(expected))])
}

#[derive(Serialize)]
struct Halving {
    t_max: f64,
    err_t_max: f64,
    err_half: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct CurveOut {
    instances: usize,
    orbits: usize,
    reference: f64,
    lattice: bool,
    halving: Halving,
    /// Absent when fewer than four samples have a non-zero error.
    fit: Option<RateFit>,
    fit_error: Option<String>,
}

fn table_for(sys: &SuspensionSystem, k: &CylinderFunction, t_max: f64, max_instances: u64) -> Result<OrbitTable, CliError> {
    Ok(OrbitTable::build(sys, k, t_max, &EnumerationOptions { max_items: max_instances })?)
}

fn halving(table: &OrbitTable, t_max: f64, mode: Mode, reference: f64, window: Option<f64>) -> Result<Halving, CliError> {
    let err = |t: f64| -> Result<f64, CliError> {
        let v = match window {
            None => table.mu_t(t, mode)?,
            Some(eps) => table.window(t, eps, mode)?,
        };
        Ok((v - reference).abs())
    };
    let (a, b) = (err(t_max)?, err(0.5 * t_max)?);
    Ok(Halving { t_max, err_t_max: a, err_half: b, ratio: a / b })
}

fn equidist(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (sys, k) = symbolic(model, Command::Equidist)?;
    let p = &cfg.run.equidist;
    let ts = grid(&p.t_grid)?;
    let t_max = *ts.last().expect("validated grid");
    let table = table_for(sys, k, t_max, p.max_instances)?;
    let reference = sys.flow_average(k)?;
    let curve = table.error_curve(&ts, p.mode, reference, sys.is_lattice())?;
    out.csv("equidist.csv", curve.to_csv())?;
    let fit = fit_rate(&curve, p.fit);
    let summary = CurveOut {
        instances: table.instances().len(),
        orbits: table.orbits().len(),
        reference,
        lattice: sys.is_lattice(),
        halving: halving(&table, t_max, p.mode, reference, None)?,
        fit: fit.as_ref().ok().copied(),
        fit_error: fit.as_ref().err().map(|e| e.to_string()),
    };
    out.json("rate_fit.json", &summary)?;
    out.tolerance("counting.boundary_slack", BOUNDARY_SLACK);
    let mut lines = vec![
        format!("{} instances up to T = {t_max}", summary.instances),
        format!("err(T_max) / err(T_max/2) = {:.6}", summary.halving.ratio),
    ];
    match fit {
        Ok(r) => lines.push(format!("delta_hat = {:.6}, residual = {:.6}", r.delta_hat, r.residual)),
        Err(e) => return Err(e.into()),
    }
    Ok(lines)
}

fn window(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (sys, k) = symbolic(model, Command::Window)?;
    let p = &cfg.run.window;
    let ts = grid(&p.t_grid)?;
    let t_max = *ts.last().expect("validated grid");
    let table = table_for(sys, k, t_max, p.max_instances)?;
    let reference = sys.flow_average(k)?;
    let curve = table.window_curve(&ts, p.eps, p.mode, reference, sys.is_lattice())?;
    out.csv("window.csv", curve.to_csv())?;
    let fit = fit_rate(&curve, p.fit);
    let summary = CurveOut {
        instances: table.instances().len(),
        orbits: table.orbits().len(),
        reference,
        lattice: sys.is_lattice(),
        halving: halving(&table, t_max, p.mode, reference, Some(p.eps))?,
        fit: fit.as_ref().ok().copied(),
        fit_error: fit.as_ref().err().map(|e| e.to_string()),
    };
    out.json("window.json", &summary)?;
    out.tolerance("counting.boundary_slack", BOUNDARY_SLACK);
    let fit = fit?;
    Ok(vec![format!("window eps = {}: delta_hat = {:.6}, residual = {:.6}", p.eps, fit.delta_hat, fit.residual)])
}

#[derive(Serialize)]
struct ContourOut {
    #[serde(flatten)]
    result: PerronResult,
    direct: f64,
    agrees: bool,
}

fn contour_csv(rows: &[ContourOut]) -> String {
    let mut body = String::from("T,ell,value,direct,quadrature_error,truncation_error\n");
    for r in rows {
        let p = &r.result;
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f(p.t),
            p.ell,
            f(p.value),
            f(r.direct),
            f(p.quadrature_error),
            f(p.truncation_error)
        ));
    }
    body
}

fn perron(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (sys, k) = symbolic(model, Command::Perron)?;
    let p = &cfg.run.perron;
    let mut rows = Vec::new();
    for &t in &p.t {
        let result = contour::perron_phi1(sys, k, t, &p.contour)?;
        let direct = counting::phi(sys, k, t, 1, Mode::WithRepetitions)?;
        rows.push(ContourOut { result, direct, agrees: result.agrees_with(direct) });
    }
    out.csv("perron.csv", contour_csv(&rows))?;
    out.json("perron.json", &rows)?;
    out.tolerance("contour.rel_tol", p.contour.rel_tol);
    Ok(rows
        .iter()
        .map(|r| format!("Phi_1({}) = {} (direct {}, estimate {:e})", r.result.t, f(r.result.value), f(r.direct), r.result.error_estimate()))
        .collect())
}

fn psi_ell(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (sys, k) = symbolic(model, Command::PsiEll)?;
    let p = &cfg.run.psi_ell;
    let fact: f64 = (1..=p.ell).map(f64::from).product();
    let mut rows = Vec::new();
    for &t in &p.t {
        let result = contour::psi_ell_contour(sys, k, t, p.ell, &p.contour)?;
        let direct = counting::phi(sys, k, t, p.ell, Mode::WithRepetitions)? / fact;
        rows.push(ContourOut { result, direct, agrees: result.agrees_with(direct) });
    }
    out.csv("psi_ell.csv", contour_csv(&rows))?;
    out.json("psi_ell.json", &rows)?;
    out.tolerance("contour.rel_tol", p.contour.rel_tol);
    Ok(rows
        .iter()
        .map(|r| format!("psi_{}({}) = {} (direct {})", p.ell, r.result.t, f(r.result.value), f(r.direct)))
        .collect())
}

fn dolgopyat(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (m, _) = interval(model, Command::DolgopyatProbe)?;
    let p = &cfg.run.dolgopyat;
    let seed = cfg.run.seed.ok_or_else(|| CliError::Schema("run.seed is required for dolgopyat-probe".into()))?;
    let r: DolgopyatProbeResult = dolgopyat_probe(m, p.sigma, p.t, p.n_max, p.trials, seed)?;
    let mut body = String::from("n,norm\n");
    for (i, v) in r.norms.iter().enumerate() {
        body.push_str(&format!("{},{}\n", i + 1, f(*v)));
    }
    out.csv("dolgopyat.csv", body)?;
    out.json("dolgopyat.json", &r)?;
    out.tolerance("interval.interpolation_tol", interval::operator::INTERPOLATION_TOL);
    let mut lines = vec![format!("rho_hat = {:.6} per step (residual {:.4}, block {})", r.rho_hat, r.residual, r.block)];
    if r.lattice_warning {
        lines.push("warning: lattice roof, no decay expected".into());
    }
    Ok(lines)
}

fn telescope(cfg: &ExperimentConfig, model: &Model, out: &mut Outputs) -> Result<Lines, CliError> {
    let (m, k) = interval(model, Command::Telescope)?;
    let p = &cfg.run.telescope;
    let s = Complex64::new(p.s.0, p.s.1);
    let (results, fit) = telescoping_sequence(m, &p.n, s, k, p.rule)?;
    let mut body = String::from("n,periodic_re,periodic_im,operator_re,operator_im,residual,words\n");
    for r in &results {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            f(r.periodic_sum.re),
            f(r.periodic_sum.im),
            f(r.operator_sum.re),
            f(r.operator_sum.im),
            f(r.residual),
            r.words
        ));
    }
    out.csv("telescope.csv", body)?;
    #[derive(Serialize)]
    struct TelescopeOut<'a> {
        s: (f64, f64),
        rule: interval::PointRule,
        fit: &'a orbitflow_core::fit::LinearFit,
    }
    out.json("telescope.json", &TelescopeOut { s: p.s, rule: p.rule, fit: &fit })?;
    out.tolerance("interval.interpolation_tol", interval::operator::INTERPOLATION_TOL);
    Ok(vec![format!("log-residual slope = {:.6} (residual {:.4})", fit.slope, fit.residual)])
}
