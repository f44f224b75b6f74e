//! Isospectral measures under the Riccati mass flow `r′ = −λr²`, and the
//! integrability functional `S_{k,ℓ}(t) = Σ_j r²_j(t)/λ_j^k`.
//!
//! This flow is distinct from the Toda mass flow `r′ = −λr` used elsewhere
//! in the crate. It is integrated in closed form: `r(t) = r₀/(1 + λr₀t)`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::csv::CsvTable;
use crate::error::{Error, Result};
use crate::kdq::PseudoPositiveMeasure;
use crate::moment::DiscreteMeasure;
use crate::sphere::{check_dim, HarmonicIndex};

/// Fixed eigenvalues `λ ≥ 0` and current masses `r² ≥ 0` of one component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoComponent {
    lambdas: Vec<f64>,
    masses: Vec<f64>,
}

impl IsoComponent {
    pub fn new(lambdas: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if lambdas.len() != masses.len() {
            return Err(Error::ShapeMismatch(format!("{} eigenvalues, {} masses", lambdas.len(), masses.len())));
        }
        if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidState(format!("eigenvalue {l} must be non-negative")));
        }
        if let Some(m) = masses.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidState(format!("mass {m} must be non-negative")));
        }
        Ok(Self { lambdas, masses })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoFlowState {
    n: usize,
    components: BTreeMap<HarmonicIndex, IsoComponent>,
    time: f64,
}

impl IsoFlowState {
    pub fn new(n: usize, components: impl IntoIterator<Item = (HarmonicIndex, IsoComponent)>, time: f64) -> Result<Self> {
        check_dim(n)?;
        let mut map = BTreeMap::new();
        for (idx, c) in components {
            idx.validate(n)?;
            if idx.k > 0 {
                if let Some(j) = c.lambdas.iter().position(|l| *l == 0.0) {
                    return Err(Error::DivisionByZero(format!(
                        "({}, {}) atom {j}: λ = 0 with k = {}",
                        idx.k, idx.ell, idx.k
                    )));
                }
            }
            if map.insert(idx, c).is_some() {
                return Err(Error::InvalidState(format!("duplicate component ({}, {})", idx.k, idx.ell)));
            }
        }
        Ok(Self { n, components: map, time })
    }

    /// Atoms of the measure are the `λ`, weights the `r²`.
    pub fn from_measure(mu: &PseudoPositiveMeasure) -> Result<Self> {
        let comps = mu
            .components()
            .iter()
            .map(|(idx, m)| Ok((*idx, IsoComponent::new(m.atoms().to_vec(), m.weights().to_vec())?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mu.n(), comps, 0.0)
    }

    /// Inverse of [`IsoFlowState::from_measure`]; atoms whose mass has
    /// vanished are dropped.
    pub fn to_measure(&self) -> Result<PseudoPositiveMeasure> {
        let k_max = self.components.keys().map(|i| i.k).max().unwrap_or(0);
        let comps = self
            .components
            .iter()
            .map(|(idx, c)| {
                let (a, w): (Vec<f64>, Vec<f64>) =
                    c.lambdas.iter().zip(&c.masses).filter(|(_, m)| **m > 0.0).map(|(l, m)| (*l, *m)).unzip();
                Ok((*idx, DiscreteMeasure::new(a, w, true)?))
            })
            .collect::<Result<Vec<_>>>()?;
        PseudoPositiveMeasure::new(self.n, k_max, comps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn components(&self) -> &BTreeMap<HarmonicIndex, IsoComponent> {
        &self.components
    }

    /// Latest backward time at which some `r = r₀/(1 + λr₀t)` blows up,
    /// measured from the current state; `None` when no atom can blow up.
    pub fn blow_up_time(&self) -> Option<f64> {
        self.components
            .values()
            .flat_map(|c| c.lambdas.iter().zip(&c.masses))
            .filter(|(l, m)| **l > 0.0 && **m > 0.0)
            .map(|(l, m)| -1.0 / (l * m.sqrt()))
            .reduce(f64::max)
    }
}

/// Advance every atom by the closed-form solution over the duration `t`.
/// Backward durations are allowed up to the blow-up time.
pub fn riccati_evolve(state: &IsoFlowState, t: f64) -> Result<IsoFlowState> {
    if !t.is_finite() {
        return Err(Error::NonFinite(t));
    }
    if let Some(tb) = state.blow_up_time() {
        if t <= tb {
            return Err(Error::BlowUp { blow_up: tb, requested: t });
        }
    }
    let components = state
        .components
        .iter()
        .map(|(idx, c)| {
            let masses = c
                .lambdas
                .iter()
                .zip(&c.masses)
                .map(|(l, m)| {
                    let q = 1.0 + l * m.sqrt() * t;
                    m / (q * q)
                })
                .collect();
            (*idx, IsoComponent { lambdas: c.lambdas.clone(), masses })
        })
        .collect();
    Ok(IsoFlowState { n: state.n, components, time: state.time + t })
}

fn component(state: &IsoFlowState, idx: HarmonicIndex) -> Result<&IsoComponent> {
    state
        .components
        .get(&idx)
        .ok_or_else(|| Error::InvalidArgument(format!("no component ({}, {})", idx.k, idx.ell)))
}

/// `S_{k,ℓ} = Σ_j r²_j/λ_j^k`.
pub fn integrability_functional(state: &IsoFlowState, idx: HarmonicIndex) -> Result<f64> {
    let c = component(state, idx)?;
    Ok(c.lambdas.iter().zip(&c.masses).map(|(l, m)| m / l.powi(idx.k as i32)).sum())
}

/// `dS_{k,ℓ}/dt = −2Σ_j r³_j/λ_j^{k−1}`.
pub fn functional_derivative(state: &IsoFlowState, idx: HarmonicIndex) -> Result<f64> {
    let c = component(state, idx)?;
    Ok(-2.0
        * c.lambdas
            .iter()
            .zip(&c.masses)
            .map(|(l, m)| m * m.sqrt() * l.powi(1 - idx.k as i32))
            .sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityReport {
    pub total: f64,
    /// `Σ_ℓ S_{k,ℓ}` for each degree present, ascending.
    pub per_k: Vec<(usize, f64)>,
    /// Geometric mean of consecutive per-degree ratios over the last half of
    /// the degrees; `None` with fewer than two positive terms.
    pub rate: Option<f64>,
    /// `rate ≥ trend_threshold`.
    pub divergence_trend: bool,
    /// The truncated sum is finite.
    pub pass: bool,
}

pub fn integrability_check(state: &IsoFlowState, trend_threshold: f64) -> Result<IntegrabilityReport> {
    let mut per_k: Vec<(usize, f64)> = Vec::new();
    for &idx in state.components.keys() {
        let s = integrability_functional(state, idx)?;
        match per_k.last_mut() {
            Some((k, v)) if *k == idx.k => *v += s,
            _ => per_k.push((idx.k, s)),
        }
    }
    let total: f64 = per_k.iter().map(|p| p.1).sum();
    let logs: Vec<f64> = per_k
        .windows(2)
        .filter(|w| w[0].1 > 0.0 && w[1].1 > 0.0)
        .map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 - w[0].0) as f64)
        .collect();
    let rate = if logs.is_empty() {
        None
    } else {
        let tail = &logs[logs.len() / 2..];
        Some((tail.iter().sum::<f64>() / tail.len() as f64).exp())
    };
    Ok(IntegrabilityReport {
        total,
        per_k,
        rate,
        divergence_trend: rate.is_some_and(|r| r >= trend_threshold),
        pass: total.is_finite(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityRow {
    pub idx: HarmonicIndex,
    pub values: Vec<f64>,
    pub monotone: bool,
    /// Max over the grid of `|central difference − dS/dt|`.
    pub derivative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub times: Vec<f64>,
    pub rows: Vec<MonotonicityRow>,
    pub monotone: bool,
    pub max_derivative_error: f64,
}

/// Step of the central difference used by [`monotonicity_check`].
pub const DERIVATIVE_STEP: f64 = 1e-5;

/// Evaluate `S_{k,ℓ}` on a non-decreasing grid of non-negative durations and
/// compare `dS/dt` with central differences at each grid point.
pub fn monotonicity_check(state0: &IsoFlowState, t_grid: &[f64]) -> Result<MonotonicityReport> {
    if t_grid.iter().any(|t| !(*t >= 0.0)) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("time grid must be non-negative and non-decreasing".into()));
    }
    for (idx, c) in &state0.components {
        if let Some(l) = c.lambdas.iter().find(|l| **l <= 0.0) {
            return Err(Error::InvalidState(format!("({}, {}) has eigenvalue {l}; λ > 0 required", idx.k, idx.ell)));
        }
    }
    let h = DERIVATIVE_STEP;
    let mut rows: Vec<MonotonicityRow> = state0
        .components
        .keys()
        .map(|&idx| MonotonicityRow { idx, values: vec![], monotone: true, derivative_error: 0.0 })
        .collect();
    for &t in t_grid {
        let s = riccati_evolve(state0, t)?;
        let sp = riccati_evolve(state0, t + h)?;
        let sm = riccati_evolve(state0, t - h)?;
        for row in &mut rows {
            let v = integrability_functional(&s, row.idx)?;
            if row.values.last().is_some_and(|prev| v > *prev) {
                row.monotone = false;
            }
            row.values.push(v);
            let fd = (integrability_functional(&sp, row.idx)? - integrability_functional(&sm, row.idx)?) / (2.0 * h);
            row.derivative_error = row.derivative_error.max((fd - functional_derivative(&s, row.idx)?).abs());
        }
    }
    Ok(MonotonicityReport {
        times: t_grid.to_vec(),
        monotone: rows.iter().all(|r| r.monotone),
        max_derivative_error: rows.iter().map(|r| r.derivative_error).fold(0.0, f64::max),
        rows,
    })
}

/// Columns `t, S_k_ell..` in ascending `(k, ℓ)`.
pub fn functional_csv(report: &MonotonicityReport) -> CsvTable {
    let mut header = vec!["t".to_string()];
    header.extend(report.rows.iter().map(|r| format!("S_{}_{}", r.idx.k, r.idx.ell)));
    let mut table = CsvTable::new(header);
    for (i, t) in report.times.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(report.rows.iter().map(|r| r.values[i]));
        table.push_floats(&row);
    }
    table
}
