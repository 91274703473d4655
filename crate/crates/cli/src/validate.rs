//! Config validation with itemized violations and an enumeration cost
//! estimate.

use std::fmt;

use num_bigint::BigUint;
use orbitflow_core::counting::BOUNDARY_SLACK;
use orbitflow_core::interval::{build_map, IntervalModel, PiecewisePoly, SmoothRoof};
use orbitflow_core::symbolic::{count_periodic_points, verify_mixing, Roof, Subshift, TransitionMatrix};
use orbitflow_core::thermo;
use serde::Serialize;

use crate::config::{Command, ExperimentConfig, Grid, IntervalModelConfig, ModelConfig, SymbolicModel};
use crate::model;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Dotted path of the offending config entry.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Dry-run size of an enumeration: `Σ_{n ≤ max_period} tr(Aⁿ)` periodic
/// points, an upper bound on the orbit instances it visits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostEstimate {
    pub command: String,
    pub budget: f64,
    pub max_period: usize,
    pub periodic_points: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// `P(ψ)` when it could be computed.
    pub pressure: Option<f64>,
    pub costs: Vec<CostEstimate>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl fmt::Display) {
        self.violations.push(Violation { path: path.into(), message: message.to_string() });
    }
}

/// Largest period cap for the cost estimate; beyond it the count is
/// astronomically large anyway.
const MAX_ESTIMATE_PERIOD: usize = 4096;

fn periodic_sum(shift: &Subshift, ns: impl Iterator<Item = usize>) -> orbitflow_core::Result<BigUint> {
    let mut total = BigUint::from(0u32);
    for n in ns {
        total += count_periodic_points(shift, n)?;
    }
    Ok(total)
}

fn check_grid(rep: &mut ValidationReport, path: &str, g: &Grid) -> Option<f64> {
    match g.points() {
        Err(e) => {
            rep.push(path, e);
            None
        }
        Ok(p) if p.is_empty() => {
            rep.push(path, "grid is empty");
            None
        }
        Ok(p) if p.windows(2).any(|w| !(w[0] < w[1])) || p.iter().any(|t| !(t.is_finite() && *t > 0.0)) => {
            rep.push(path, "grid must be positive, finite and strictly increasing");
            None
        }
        Ok(p) => p.last().copied(),
    }
}

fn validate_symbolic(rep: &mut ValidationReport, m: &SymbolicModel, cfg: &ExperimentConfig) {
    if m.transition.len() != m.alphabet {
        rep.push("model.alphabet", format!("alphabet is {} but model.transition has {} rows", m.alphabet, m.transition.len()));
        return;
    }
    let shift = match TransitionMatrix::new(m.transition.clone()) {
        Err(e) => {
            rep.push("model.transition", e);
            return;
        }
        Ok(t) => match verify_mixing(&t) {
            Err(e) => {
                rep.push("model.transition", e);
                return;
            }
            Ok(r) if !r.is_mixing() => {
                let why = r.diagnostic.unwrap_or_else(|| "not mixing".into());
                rep.push("model.transition", format!("matrix is not mixing: {why}"));
                return;
            }
            Ok(_) => Subshift::new(t).expect("mixing matrix"),
        },
    };
    let psi = match &m.psi {
        None => Some(orbitflow_core::symbolic::CylinderFunction::zero(&shift)),
        Some(t) => model::table(&shift, t).map_err(|e| rep.push("model.psi", e)).ok(),
    };
    let roof = match model::table(&shift, &m.roof) {
        Err(e) => {
            rep.push("model.roof", e);
            None
        }
        Ok(f) => Roof::new(f).map_err(|e| rep.push("model.roof", e)).ok(),
    };
    for (i, term) in m.observable.iter().enumerate() {
        if let Err(e) = orbitflow_core::symbolic::CylinderFunction::from_table(&shift, term.depth, &term.values) {
            rep.push(format!("model.observable[{i}]"), e);
        }
    }
    let mut degrees: Vec<usize> = m.observable.iter().map(|t| t.degree).collect();
    degrees.sort_unstable();
    if degrees.windows(2).any(|w| w[0] == w[1]) {
        rep.push("model.observable", "a degree is given twice");
    }
    if let Some(psi) = &psi {
        match thermo::pressure(&shift, psi) {
            Ok(p) => {
                rep.pressure = Some(p);
                if !(p > 0.0) {
                    rep.push("model.psi", format!("P(psi) = {p} must be positive"));
                }
            }
            Err(e) => rep.push("model.psi", e),
        }
    }
    let run = &cfg.run;
    let mut budgets = vec![(Command::Orbits, Some(run.orbits.budget))];
    budgets.push((Command::Equidist, check_grid(rep, "run.equidist.t_grid", &run.equidist.t_grid)));
    budgets.push((Command::Window, check_grid(rep, "run.window.t_grid", &run.window.t_grid)));
    if !(run.window.eps > 0.0) {
        rep.push("run.window.eps", "window width must be positive");
    }
    if !(run.orbits.budget > 0.0 && run.orbits.budget.is_finite()) {
        rep.push("run.orbits.budget", "budget must be positive and finite");
    }
    for (i, &t) in run.perron.t.iter().enumerate() {
        if !(t >= 2.0) {
            rep.push(format!("run.perron.t[{i}]"), "contour inversion needs T >= 2");
        }
    }
    if run.psi_ell.ell == 0 {
        rep.push("run.psi-ell.ell", "ell must be at least 1");
    }
    let (lo, hi) = run.zeta_scan.sigma;
    if !(lo > 0.0 && lo < hi) {
        rep.push("run.zeta-scan.sigma", "sigma range must satisfy 0 < lo < hi");
    }
    if !(run.zeta_scan.t.0 < run.zeta_scan.t.1) {
        rep.push("run.zeta-scan.t", "t range must be increasing");
    }
    let Some(roof) = roof else { return };
    for (cmd, budget) in budgets {
        let Some(budget) = budget else { continue };
        if !(budget > 0.0 && budget.is_finite()) {
            continue;
        }
        let max_period = ((budget * (1.0 + BOUNDARY_SLACK) / roof.r_min()).floor() as usize).min(MAX_ESTIMATE_PERIOD);
        if let Ok(total) = periodic_sum(&shift, 1..=max_period) {
            rep.costs.push(CostEstimate {
                command: cmd.name().into(),
                budget,
                max_period,
                periodic_points: total.to_string(),
            });
        }
    }
}

fn validate_interval(rep: &mut ValidationReport, m: &IntervalModelConfig, cfg: &ExperimentConfig) {
    let map = match build_map(&m.map) {
        Ok(map) => map,
        Err(e) => {
            rep.push("model.map", e);
            return;
        }
    };
    let psi = match &m.psi {
        None => Some(PiecewisePoly::constant(&map, 0.0)),
        Some(c) => PiecewisePoly::new(&map, c.clone()).map_err(|e| rep.push("model.psi", e)).ok(),
    };
    let roof = match PiecewisePoly::new(&map, m.roof.clone()) {
        Err(e) => {
            rep.push("model.roof", e);
            None
        }
        Ok(p) => SmoothRoof::new(&map, p).map_err(|e| rep.push("model.roof", e)).ok(),
    };
    if let Some(c) = &m.observable {
        if let Err(e) = PiecewisePoly::new(&map, c.clone()) {
            rep.push("model.observable", e);
        }
    }
    if let (Some(psi), Some(roof)) = (psi, roof) {
        match IntervalModel::with_c(map.clone(), psi, roof, 0.0).and_then(|im| im.pressure(0.0)) {
            Ok(p) => {
                rep.pressure = Some(p);
                if !(p > 0.0) {
                    rep.push("model.psi", format!("P(psi) = {p} must be positive"));
                }
            }
            Err(e) => rep.push("model.psi", e),
        }
    }
    let run = &cfg.run;
    if run.telescope.n.is_empty() || run.telescope.n.contains(&0) {
        rep.push("run.telescope.n", "word lengths must be a non-empty list of positive integers");
    } else if let Ok(total) = periodic_sum(map.shift(), run.telescope.n.iter().copied()) {
        rep.costs.push(CostEstimate {
            command: Command::Telescope.name().into(),
            budget: *run.telescope.n.iter().max().unwrap() as f64,
            max_period: *run.telescope.n.iter().max().unwrap(),
            periodic_points: total.to_string(),
        });
    }
    if !(run.dolgopyat.t.abs() >= std::f64::consts::E) {
        rep.push("run.dolgopyat-probe.t", "probe needs |t| >= e");
    }
}

/// Checks the config without running anything. `command` is the command
/// about to run, if any.
pub fn validate(cfg: &ExperimentConfig, command: Option<Command>) -> ValidationReport {
    let mut rep = ValidationReport::default();
    match &cfg.model {
        ModelConfig::Symbolic(m) => validate_symbolic(&mut rep, m, cfg),
        ModelConfig::Interval(m) => validate_interval(&mut rep, m, cfg),
    }
    if let Some(cmd) = command.or(cfg.run.command) {
        let symbolic = matches!(cfg.model, ModelConfig::Symbolic(_));
        if cmd.needs_interval() && symbolic {
            rep.push("run.command", format!("{} needs an interval model", cmd.name()));
        }
        if cmd.needs_symbolic() && !symbolic {
            rep.push("run.command", format!("{} needs a symbolic model", cmd.name()));
        }
        if cmd.is_randomized() && cfg.run.seed.is_none() {
            rep.push("run.seed", format!("{} is randomized and needs a seed", cmd.name()));
        }
    }
    rep
}
