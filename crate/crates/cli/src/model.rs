//! Turning a checked config into computational objects.

use num_complex::Complex64;
use orbitflow_core::interval::{build_map, ExpandingMarkovMap, GridFunction, IntervalModel, PiecewisePoly, SmoothRoof};
use orbitflow_core::suspension::{lift, FlowObservable, SuspensionSystem};
use orbitflow_core::symbolic::{CylinderFunction, Roof, Subshift};
use orbitflow_core::{Error, Result};

use crate::config::{IntervalModelConfig, ModelConfig, ObservableTerm, SymbolicModel, Table};

pub struct SymbolicParts {
    pub shift: Subshift,
    pub psi: CylinderFunction,
    pub roof: Roof,
    pub observable: FlowObservable,
}

pub fn shift_of(m: &SymbolicModel) -> Result<Subshift> {
    if m.transition.len() != m.alphabet {
        return Err(Error::invalid(format!("alphabet is {} but the matrix has {} rows", m.alphabet, m.transition.len())));
    }
    Subshift::from_rows(m.transition.clone())
}

pub fn table(shift: &Subshift, t: &Table) -> Result<CylinderFunction> {
    CylinderFunction::from_table(shift, t.depth, &t.values)
}

pub fn observable(shift: &Subshift, terms: &[ObservableTerm]) -> Result<FlowObservable> {
    if terms.is_empty() {
        return Ok(FlowObservable::constant(shift, 1.0));
    }
    let degree = terms.iter().map(|t| t.degree).max().unwrap_or(0);
    let mut coeffs: Vec<Option<CylinderFunction>> = vec![None; degree + 1];
    for t in terms {
        if coeffs[t.degree].is_some() {
            return Err(Error::invalid(format!("degree {} given twice", t.degree)));
        }
        coeffs[t.degree] = Some(CylinderFunction::from_table(shift, t.depth, &t.values)?);
    }
    FlowObservable::new(coeffs.into_iter().map(|c| c.unwrap_or_else(|| CylinderFunction::zero(shift))).collect())
}

pub fn symbolic_parts(m: &SymbolicModel) -> Result<SymbolicParts> {
    let shift = shift_of(m)?;
    let psi = match &m.psi {
        Some(t) => table(&shift, t)?,
        None => CylinderFunction::zero(&shift),
    };
    let roof = Roof::new(table(&shift, &m.roof)?)?;
    let observable = observable(&shift, &m.observable)?;
    Ok(SymbolicParts { shift, psi, roof, observable })
}

pub struct IntervalParts {
    pub map: ExpandingMarkovMap,
    pub psi: PiecewisePoly,
    pub roof: SmoothRoof,
    pub observable: PiecewisePoly,
}

pub fn interval_parts(m: &IntervalModelConfig) -> Result<IntervalParts> {
    let map = build_map(&m.map)?;
    let psi = match &m.psi {
        Some(c) => PiecewisePoly::new(&map, c.clone())?,
        None => PiecewisePoly::constant(&map, 0.0),
    };
    let roof = SmoothRoof::new(&map, PiecewisePoly::new(&map, m.roof.clone())?)?;
    let observable = match &m.observable {
        Some(c) => PiecewisePoly::new(&map, c.clone())?,
        None => PiecewisePoly::constant(&map, 1.0),
    };
    Ok(IntervalParts { map, psi, roof, observable })
}

pub enum Model {
    Symbolic {
        sys: SuspensionSystem,
        /// Lift of the configured flow observable.
        k: CylinderFunction,
    },
    Interval {
        model: IntervalModel,
        k: GridFunction,
    },
}

impl Model {
    pub fn build(cfg: &ModelConfig) -> Result<Self> {
        match cfg {
            ModelConfig::Symbolic(m) => {
                let p = symbolic_parts(m)?;
                let k = lift(&p.observable, &p.roof)?.k;
                let sys = SuspensionSystem::new(p.shift, p.psi, p.roof)?;
                Ok(Model::Symbolic { sys, k })
            }
            ModelConfig::Interval(m) => {
                let p = interval_parts(m)?;
                let obs = p.observable;
                let model = IntervalModel::new(p.map, p.psi, p.roof)?;
                let k = model.grid_function(|i, x| Complex64::new(obs.eval(i, x), 0.0))?;
                Ok(Model::Interval { model, k })
            }
        }
    }
}
