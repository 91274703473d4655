//! Experiment config schema.
//!
//! One TOML document with three sections: `model` (what to compute on), `run`
//! (which command, its parameters, seed and worker count) and `output`.
//! Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use orbitflow_core::contour::ContourConfig;
use orbitflow_core::counting::{Mode, RateModel};
use orbitflow_core::interval::{MapSpec, PointRule};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Symbolic(SymbolicModel),
    Interval(IntervalModelConfig),
}

/// A locally constant function given by its value on every admissible word
/// of length `depth`, keyed by digit strings such as `"01"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub depth: usize,
    pub values: BTreeMap<String, f64>,
}

/// One coefficient `c_j` of `K(x, u) = Σ c_j(x) u^j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableTerm {
    pub degree: usize,
    pub depth: usize,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolicModel {
    pub alphabet: usize,
    pub transition: Vec<Vec<u8>>,
    /// Defaults to `ψ = 0`.
    #[serde(default)]
    pub psi: Option<Table>,
    pub roof: Table,
    /// Defaults to `K ≡ 1`.
    #[serde(default)]
    pub observable: Vec<ObservableTerm>,
}

/// Piecewise polynomials are given per interval as coefficients in
/// increasing degree of the global coordinate `x`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalModelConfig {
    pub map: MapSpec,
    /// Defaults to `ψ = 0`.
    #[serde(default)]
    pub psi: Option<Vec<Vec<f64>>>,
    pub roof: Vec<Vec<f64>>,
    /// Observable `k`; defaults to `k ≡ 1`.
    #[serde(default)]
    pub observable: Option<Vec<Vec<f64>>>,
}

/// Either an explicit list or an arithmetic progression that includes
/// `stop` when it lands on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range(RangeGrid),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>, String> {
        match self {
            Grid::List(v) => Ok(v.clone()),
            Grid::Range(r) => {
                if !(r.step > 0.0 && r.start.is_finite() && r.stop.is_finite() && r.start <= r.stop) {
                    return Err(format!("range needs start <= stop and step > 0, got {:?}", r));
                }
                let n = ((r.stop - r.start) / r.step + 1e-9).floor() as usize;
                if n > 1_000_000 {
                    return Err("range has more than 10^6 points".into());
                }
                // Multiply rather than accumulate so points are exact multiples.
                Ok((0..=n).map(|i| r.start + r.step * i as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Pressure,
    Gibbs,
    Normalize,
    Orbits,
    ZetaScan,
    Residue,
    Equidist,
    Window,
    Perron,
    PsiEll,
    DolgopyatProbe,
    Telescope,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pressure => "pressure",
            Command::Gibbs => "gibbs",
            Command::Normalize => "normalize",
            Command::Orbits => "orbits",
            Command::ZetaScan => "zeta-scan",
            Command::Residue => "residue",
            Command::Equidist => "equidist",
            Command::Window => "window",
            Command::Perron => "perron",
            Command::PsiEll => "psi-ell",
            Command::DolgopyatProbe => "dolgopyat-probe",
            Command::Telescope => "telescope",
        }
    }

    pub fn needs_interval(&self) -> bool {
        matches!(self, Command::DolgopyatProbe | Command::Telescope)
    }

    pub fn needs_symbolic(&self) -> bool {
        !matches!(self, Command::Pressure | Command::DolgopyatProbe | Command::Telescope)
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, Command::DolgopyatProbe)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Command run when none is given on the command line.
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// 0 uses every available core. Not part of the config hash.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub gibbs: GibbsParams,
    #[serde(default)]
    pub orbits: OrbitsParams,
    #[serde(default, rename = "zeta-scan")]
    pub zeta_scan: ZetaScanParams,
    #[serde(default)]
    pub equidist: EquidistParams,
    #[serde(default)]
    pub window: WindowParams,
    #[serde(default)]
    pub perron: PerronParams,
    #[serde(default, rename = "psi-ell")]
    pub psi_ell: PsiEllParams,
    #[serde(default, rename = "dolgopyat-probe")]
    pub dolgopyat: DolgopyatParams,
    #[serde(default)]
    pub telescope: TelescopeParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GibbsPotential {
    /// The equilibrium state of `ψ`.
    Psi,
    /// The equilibrium state of `ψ − c r`, which projects the flow measure.
    Normalized,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsParams {
    pub depth: usize,
    pub potential: GibbsPotential,
}

impl Default for GibbsParams {
    fn default() -> Self {
        Self { depth: 2, potential: GibbsPotential::Normalized }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitsParams {
    /// Roof-length budget `L`.
    pub budget: f64,
    pub max_instances: u64,
}

impl Default for OrbitsParams {
    fn default() -> Self {
        Self { budget: 10.0, max_instances: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Zero,
    Growth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZetaScanParams {
    pub scan: ScanKind,
    pub sigma: (f64, f64),
    pub t: (f64, f64),
    /// Grid points per unit length.
    pub grid_steps: usize,
    /// Abscissa of a growth scan.
    pub growth_sigma: f64,
    pub t_list: Grid,
}

impl Default for ZetaScanParams {
    fn default() -> Self {
        Self {
            scan: ScanKind::Zero,
            sigma: (0.9, 1.1),
            t: (-1.0, 12.0),
            grid_steps: 20,
            growth_sigma: 0.98,
            t_list: Grid::Range(RangeGrid { start: 5.0, stop: 200.0, step: 5.0 }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquidistParams {
    /// Lengths `T` at which `μ_T` is evaluated.
    pub t_grid: Grid,
    pub mode: Mode,
    pub fit: RateModel,
    pub max_instances: u64,
}

impl Default for EquidistParams {
    fn default() -> Self {
        Self {
            t_grid: Grid::Range(RangeGrid { start: 2.0, stop: 20.0, step: 1.0 }),
            mode: Mode::PrimeOnly,
            fit: RateModel::Exponential,
            max_instances: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowParams {
    pub t_grid: Grid,
    pub eps: f64,
    pub mode: Mode,
    pub fit: RateModel,
    pub max_instances: u64,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            t_grid: Grid::Range(RangeGrid { start: 4.0, stop: 20.0, step: 1.0 }),
            eps: 2.0,
            mode: Mode::PrimeOnly,
            fit: RateModel::Exponential,
            max_instances: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerronParams {
    /// Values of `T` (in `e^{c·length}` units) for `Φ_1(T)`.
    pub t: Vec<f64>,
    pub contour: ContourConfig,
}

impl Default for PerronParams {
    fn default() -> Self {
        Self { t: vec![8.0], contour: ContourConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsiEllParams {
    pub t: Vec<f64>,
    pub ell: u32,
    pub contour: ContourConfig,
}

impl Default for PsiEllParams {
    fn default() -> Self {
        Self { t: vec![20.0], ell: 2, contour: ContourConfig { height: Some(300.0), ..ContourConfig::default() } }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DolgopyatParams {
    pub sigma: f64,
    pub t: f64,
    pub n_max: usize,
    pub trials: usize,
}

impl Default for DolgopyatParams {
    fn default() -> Self {
        Self { sigma: 1.0, t: 50.0, n_max: 30, trials: 32 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TelescopeParams {
    pub s: (f64, f64),
    pub n: Vec<usize>,
    pub rule: PointRule,
}

impl Default for TelescopeParams {
    fn default() -> Self {
        Self { s: (1.0, 10.0), n: (2..=10).collect(), rule: PointRule::Midpoint }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
