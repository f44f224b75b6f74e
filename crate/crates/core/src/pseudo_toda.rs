//! Pseudo-positive Toda lattices: one finite Toda lattice per harmonic
//! component `(k, ℓ)`, driven through the tilde variables
//! `r̃² = r²λ^k`, `λ̃ = λ²`.
//!
//! The state stores `λ` and `r̃²`; masses evolve by
//! `r̃²_j(t) ∝ r̃²_j(0) e^{−2λ̃_j t}` with unit sum in every component.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::csv::CsvTable;
use crate::error::{Error, Result};
use crate::kdq::PseudoPositiveMeasure;
use crate::moment::{jacobi_from_measure, moser_masses, DiscreteMeasure, JacobiMatrix};
use crate::sphere::{check_dim, harmonics_upto, HarmonicIndex, SphereDirection};

/// Tolerance on `Σ_j r̃²_j = 1` per component.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Output of [`tilde_transform`].
#[derive(Debug, Clone, PartialEq)]
pub struct TildeData {
    pub lambdas: Vec<f64>,
    pub lambda_tilde: Vec<f64>,
    pub masses_tilde: Vec<f64>,
    /// One message per atom dropped because `λ = 0` and `k > 0`.
    pub warnings: Vec<String>,
}

/// `r̃² = r²λ^k`, `λ̃ = λ²`. Atoms with `λ = 0` and `k > 0` lose all their
/// mass; they are dropped with a warning.
pub fn tilde_transform(k: usize, lambdas: &[f64], masses: &[f64]) -> Result<TildeData> {
    if lambdas.len() != masses.len() {
        return Err(Error::ShapeMismatch(format!("{} eigenvalues, {} masses", lambdas.len(), masses.len())));
    }
    let mut out = TildeData { lambdas: vec![], lambda_tilde: vec![], masses_tilde: vec![], warnings: vec![] };
    for (j, (&l, &m)) in lambdas.iter().zip(masses).enumerate() {
        if !(l >= 0.0) || !l.is_finite() {
            return Err(Error::InvalidState(format!("eigenvalue {l} must be non-negative")));
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidState(format!("mass {m} must be positive")));
        }
        if l == 0.0 && k > 0 {
            out.warnings.push(format!("atom {j}: λ = 0 with k = {k} annihilates mass {m}"));
            continue;
        }
        out.lambdas.push(l);
        out.lambda_tilde.push(l * l);
        out.masses_tilde.push(m * l.powi(k as i32));
    }
    Ok(out)
}

/// Inverse of the tilde map on masses: `r² = r̃²/λ^k` (`λ > 0` when `k > 0`).
pub fn untilde_masses(k: usize, lambdas: &[f64], masses_tilde: &[f64]) -> Result<Vec<f64>> {
    lambdas
        .iter()
        .zip(masses_tilde)
        .map(|(&l, &m)| {
            if k > 0 && l == 0.0 {
                Err(Error::DivisionByZero(format!("λ = 0 with k = {k}")))
            } else {
                Ok(m / l.powi(k as i32))
            }
        })
        .collect()
}

/// One component: eigenvalues `λ_j ≥ 0` and tilde masses summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoComponent {
    lambdas: Vec<f64>,
    masses_tilde: Vec<f64>,
}

impl PseudoComponent {
    pub fn new(lambdas: Vec<f64>, masses_tilde: Vec<f64>) -> Result<Self> {
        if lambdas.len() != masses_tilde.len() || lambdas.is_empty() {
            return Err(Error::ShapeMismatch("eigenvalues and masses need equal nonzero length".into()));
        }
        if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidState(format!("eigenvalue {l} must be non-negative")));
        }
        if let Some(m) = masses_tilde.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidState(format!("mass {m} must be positive")));
        }
        let total: f64 = masses_tilde.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization(total - 1.0));
        }
        Ok(Self { lambdas, masses_tilde })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda_tilde(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| l * l).collect()
    }

    pub fn masses_tilde(&self) -> &[f64] {
        &self.masses_tilde
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawState", into = "RawState")]
pub struct PseudoTodaState {
    n: usize,
    components: BTreeMap<HarmonicIndex, PseudoComponent>,
    time: f64,
}

#[derive(Serialize, Deserialize)]
struct RawComponent {
    k: usize,
    ell: usize,
    lambdas: Vec<f64>,
    masses_tilde: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawState {
    n: usize,
    #[serde(rename = "N", default)]
    size: Option<usize>,
    components: Vec<RawComponent>,
    t: f64,
}

impl TryFrom<RawState> for PseudoTodaState {
    type Error = Error;
    fn try_from(raw: RawState) -> Result<Self> {
        let comps = raw
            .components
            .into_iter()
            .map(|c| Ok((HarmonicIndex { k: c.k, ell: c.ell }, PseudoComponent::new(c.lambdas, c.masses_tilde)?)))
            .collect::<Result<Vec<_>>>()?;
        let state = PseudoTodaState::new(raw.n, comps, raw.t)?;
        if let Some(size) = raw.size {
            if state.common_size() != Some(size) {
                return Err(Error::ShapeMismatch(format!("declared N = {size} does not match the components")));
            }
        }
        Ok(state)
    }
}

impl From<PseudoTodaState> for RawState {
    fn from(s: PseudoTodaState) -> Self {
        RawState {
            n: s.n,
            size: s.common_size(),
            components: s
                .components
                .into_iter()
                .map(|(idx, c)| RawComponent { k: idx.k, ell: idx.ell, lambdas: c.lambdas, masses_tilde: c.masses_tilde })
                .collect(),
            t: s.time,
        }
    }
}

impl PseudoTodaState {
    pub fn new(
        n: usize,
        components: impl IntoIterator<Item = (HarmonicIndex, PseudoComponent)>,
        time: f64,
    ) -> Result<Self> {
        check_dim(n)?;
        if !time.is_finite() {
            return Err(Error::NonFinite(time));
        }
        let mut map = BTreeMap::new();
        for (idx, c) in components {
            idx.validate(n)?;
            if map.insert(idx, c).is_some() {
                return Err(Error::InvalidState(format!("duplicate component ({}, {})", idx.k, idx.ell)));
            }
        }
        Ok(Self { n, components: map, time })
    }

    /// Build from untilded data `(λ, r²)` per component. Atoms dropped by the
    /// tilde map are reported in the returned warnings.
    pub fn from_untilded(
        n: usize,
        components: impl IntoIterator<Item = (HarmonicIndex, Vec<f64>, Vec<f64>)>,
    ) -> Result<(Self, Vec<String>)> {
        let mut comps = Vec::new();
        let mut warnings = Vec::new();
        for (idx, lambdas, masses) in components {
            let td = tilde_transform(idx.k, &lambdas, &masses)?;
            warnings.extend(td.warnings.into_iter().map(|w| format!("({}, {}) {w}", idx.k, idx.ell)));
            comps.push((idx, PseudoComponent::new(td.lambdas, td.masses_tilde)?));
        }
        Ok((Self::new(n, comps, 0.0)?, warnings))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn components(&self) -> &BTreeMap<HarmonicIndex, PseudoComponent> {
        &self.components
    }

    fn component(&self, idx: HarmonicIndex) -> Result<&PseudoComponent> {
        self.components
            .get(&idx)
            .ok_or_else(|| Error::InvalidArgument(format!("no component ({}, {})", idx.k, idx.ell)))
    }

    /// `N` shared by every component, if there is one.
    pub fn common_size(&self) -> Option<usize> {
        let mut sizes = self.components.values().map(PseudoComponent::len);
        let first = sizes.next()?;
        sizes.all(|s| s == first).then_some(first)
    }

    /// The radial measure `dμ_{k,ℓ}(r) = Σ r²_j δ(r − λ_j)`, for which
    /// `∫ r^k dμ_{k,ℓ} = Σ r̃² = 1`.
    pub fn associated_measure(&self) -> Result<PseudoPositiveMeasure> {
        let k_max = self.components.keys().map(|i| i.k).max().unwrap_or(0);
        let comps = self
            .components
            .iter()
            .map(|(idx, c)| {
                let masses = untilde_masses(idx.k, &c.lambdas, &c.masses_tilde)?;
                Ok((*idx, DiscreteMeasure::new(c.lambdas.clone(), masses, true)?))
            })
            .collect::<Result<Vec<_>>>()?;
        PseudoPositiveMeasure::new(self.n, k_max, comps)
    }
}

/// Advance every component by the duration `t`.
pub fn evolve(state: &PseudoTodaState, t: f64) -> PseudoTodaState {
    let components = state
        .components
        .iter()
        .map(|(idx, c)| {
            let masses = moser_masses(&c.lambda_tilde(), &c.masses_tilde, t);
            // Keep masses representable so that the component stays unreduced.
            let masses: Vec<f64> = masses.into_iter().map(|m| m.max(f64::MIN_POSITIVE)).collect();
            let total: f64 = masses.iter().sum();
            let masses_tilde = masses.into_iter().map(|m| m / total).collect();
            (*idx, PseudoComponent { lambdas: c.lambdas.clone(), masses_tilde })
        })
        .collect();
    PseudoTodaState { n: state.n, components, time: state.time + t }
}

/// `L_{k,ℓ}` from `dμ̃_{k,ℓ} = Σ r̃² δ(ρ − λ̃)`; coincident `λ̃` are merged.
pub fn component_jacobi(state: &PseudoTodaState, idx: HarmonicIndex) -> Result<JacobiMatrix> {
    let c = state.component(idx)?;
    let mu = DiscreteMeasure::new(c.lambda_tilde(), c.masses_tilde.clone(), true)?;
    jacobi_from_measure(&mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentHamiltonian {
    /// `2Σ_j λ̃_j² = 2Σ_j λ_j⁴`.
    pub value: f64,
    /// `4{Σ ã² + ½Σ b̃²}` from the component Jacobi matrix. Equal to `value`
    /// unless coincident `λ̃` were merged.
    pub jacobi_value: f64,
}

pub fn component_hamiltonian(state: &PseudoTodaState, idx: HarmonicIndex) -> Result<ComponentHamiltonian> {
    let c = state.component(idx)?;
    let value = 2.0 * c.lambdas.iter().map(|l| l.powi(4)).sum::<f64>();
    let l = component_jacobi(state, idx)?;
    Ok(ComponentHamiltonian { value, jacobi_value: 2.0 * l.trace_of_square() })
}

/// `H = Σ_{k,ℓ} H_{k,ℓ}`, summed in ascending `(k, ℓ)`.
pub fn total_hamiltonian(state: &PseudoTodaState) -> f64 {
    state.components.values().map(|c| 2.0 * c.lambdas.iter().map(|l| l.powi(4)).sum::<f64>()).sum()
}

/// `max_{k,ℓ} |Σ_j r̃²_{k,ℓ;j} − 1|`.
pub fn normalization_invariant(state: &PseudoTodaState) -> f64 {
    state.components.values().map(|c| (c.masses_tilde.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
}

/// Central-difference check of the Toda equations for `(ã, b̃)` of one
/// component at `state.time + t`; returns the max residual over sites.
pub fn component_ode_residual(state: &PseudoTodaState, idx: HarmonicIndex, t: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    let at = |s: f64| component_jacobi(&evolve(state, s), idx);
    let (l0, lp, lm) = (at(t)?, at(t + dt)?, at(t - dt)?);
    if lp.size() != l0.size() || lm.size() != l0.size() {
        return Err(Error::InvalidState("component size changed along the flow".into()));
    }
    let (a, b) = (l0.offdiag(), l0.diag());
    let n = b.len();
    let mut res: f64 = 0.0;
    for j in 0..n.saturating_sub(1) {
        let fd = (lp.offdiag()[j] - lm.offdiag()[j]) / (2.0 * dt);
        res = res.max((fd - a[j] * (b[j + 1] - b[j])).abs());
    }
    for j in 0..n {
        let fd = (lp.diag()[j] - lm.diag()[j]) / (2.0 * dt);
        let right = if j + 1 < n { a[j] * a[j] } else { 0.0 };
        let left = if j > 0 { a[j - 1] * a[j - 1] } else { 0.0 };
        res = res.max((fd - 2.0 * (right - left)).abs());
    }
    Ok(res)
}

fn shared_jacobis(state: &PseudoTodaState) -> Result<(usize, Vec<(HarmonicIndex, JacobiMatrix)>)> {
    let mats = state
        .components
        .keys()
        .map(|&idx| Ok((idx, component_jacobi(state, idx)?)))
        .collect::<Result<Vec<_>>>()?;
    let size = mats.first().map_or(0, |(_, l)| l.size());
    if mats.iter().any(|(_, l)| l.size() != size) {
        return Err(Error::ShapeMismatch("surfaces need every component to have the same N".into()));
    }
    Ok((size, mats))
}

fn check_site(j: usize, size: usize) -> Result<()> {
    if j == 0 || j > size {
        return Err(Error::InvalidArgument(format!("site {j} outside 1..={size}")));
    }
    Ok(())
}

/// `A_j(θ) = Σ ã_{k,ℓ;j} Y_{k,ℓ}(θ)` and `B_j(θ) = Σ b̃_{k,ℓ;j} Y_{k,ℓ}(θ)`
/// for the site `j` (1-based; `A_N = 0`).
pub fn flaschka_surfaces(state: &PseudoTodaState, j: usize, theta: &SphereDirection) -> Result<(f64, f64)> {
    let (size, mats) = shared_jacobis(state)?;
    if mats.is_empty() {
        return Ok((0.0, 0.0));
    }
    check_site(j, size)?;
    let max_k = mats.iter().map(|(i, _)| i.k).max().unwrap_or(0);
    let y = harmonics_upto(theta, max_k);
    let mut a_sum = 0.0;
    let mut b_sum = 0.0;
    for (idx, l) in &mats {
        let yv = y.get(*idx).unwrap_or(0.0);
        if j < size {
            a_sum += l.offdiag()[j - 1] * yv;
        }
        b_sum += l.diag()[j - 1] * yv;
    }
    Ok((a_sum, b_sum))
}

/// Gauge for `e^{−x_{k,ℓ;1}}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// `max(k, 1)^{−(n−2)}`.
    Degree,
    /// `1` for every component.
    Unit,
}

impl Gauge {
    fn factor(self, n: usize, k: usize) -> f64 {
        match self {
            Gauge::Degree => (k.max(1) as f64).powi(-(n as i32 - 2)),
            Gauge::Unit => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalSurfaces {
    pub x: f64,
    pub y: f64,
    /// Partial sums of `X_j` and `Y_j` after each degree present, ascending.
    pub partial_x: Vec<(usize, f64)>,
    pub partial_y: Vec<(usize, f64)>,
}

/// `X_j(θ) = Σ 2^{2(j−1)} (Π_{m<j} ã²_{k,ℓ;m}) e^{−x_{k,ℓ;1}} Y_{k,ℓ}(θ)` and
/// `Y_j(θ) = Σ (−2b̃_{k,ℓ;j}) Y_{k,ℓ}(θ)`.
pub fn physical_surfaces(
    state: &PseudoTodaState,
    j: usize,
    theta: &SphereDirection,
    gauge: Gauge,
) -> Result<PhysicalSurfaces> {
    let (size, mats) = shared_jacobis(state)?;
    let mut out = PhysicalSurfaces { x: 0.0, y: 0.0, partial_x: vec![], partial_y: vec![] };
    if mats.is_empty() {
        return Ok(out);
    }
    check_site(j, size)?;
    let max_k = mats.iter().map(|(i, _)| i.k).max().unwrap_or(0);
    let y = harmonics_upto(theta, max_k);
    let pow4 = 4f64.powi(j as i32 - 1);
    for (idx, l) in &mats {
        let yv = y.get(*idx).unwrap_or(0.0);
        let prod: f64 = l.offdiag()[..j - 1].iter().map(|a| a * a).product();
        out.x += pow4 * prod * gauge.factor(state.n, idx.k) * yv;
        out.y += -2.0 * l.diag()[j - 1] * yv;
        match out.partial_x.last_mut() {
            Some((k, v)) if *k == idx.k => {
                *v = out.x;
                out.partial_y.last_mut().expect("kept in step").1 = out.y;
            }
            _ => {
                out.partial_x.push((idx.k, out.x));
                out.partial_y.push((idx.k, out.y));
            }
        }
    }
    Ok(out)
}

/// Columns `t, lt_1.., m_1.., a_1.., b_1.., H` for one component at each time
/// (durations measured from `state0`).
pub fn component_trajectory_csv(state0: &PseudoTodaState, idx: HarmonicIndex, times: &[f64]) -> Result<CsvTable> {
    let c = state0.component(idx)?;
    let size = component_jacobi(state0, idx)?.size();
    let mut header = vec!["t".to_string()];
    header.extend((1..=c.len()).map(|j| format!("lambda_tilde_{j}")));
    header.extend((1..=c.len()).map(|j| format!("mass_tilde_{j}")));
    header.extend((1..size).map(|j| format!("a_{j}")));
    header.extend((1..=size).map(|j| format!("b_{j}")));
    header.push("H".into());
    let mut table = CsvTable::new(header);
    for &t in times {
        let s = evolve(state0, t);
        let ct = s.component(idx)?;
        let l = component_jacobi(&s, idx)?;
        let mut row = vec![s.time];
        row.extend(ct.lambda_tilde());
        row.extend_from_slice(ct.masses_tilde());
        row.extend_from_slice(l.offdiag());
        row.extend_from_slice(l.diag());
        row.push(component_hamiltonian(&s, idx)?.value);
        table.push_floats(&row);
    }
    Ok(table)
}

/// Columns `t, H_total, normalization_deviation`.
pub fn total_hamiltonian_csv(state0: &PseudoTodaState, times: &[f64]) -> CsvTable {
    let mut table = CsvTable::new(["t", "H_total", "normalization_deviation"]);
    for &t in times {
        let s = evolve(state0, t);
        table.push_floats(&[s.time, total_hamiltonian(&s), normalization_invariant(&s)]);
    }
    table
}
