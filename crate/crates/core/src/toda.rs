//! The finite non-periodic Toda lattice.
//!
//! Physical coordinates `(x, y)` with `H = ½Σy_j² + Σe^{x_j − x_{j+1}}`, the
//! Flaschka variables `a_j = ½e^{(x_j − x_{j+1})/2}`, `b_j = −½y_j`, the Lax
//! pair, and Moser's explicit solution through the spectral measure of `L`.

use serde::{Deserialize, Serialize};

use crate::csv::CsvTable;
use crate::error::{Error, Result};
use crate::moment::{jacobi_from_measure, moser_masses, DiscreteMeasure, JacobiMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TodaStatePhysical {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TodaStatePhysical {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::ShapeMismatch(format!("x has {} entries, y has {}", x.len(), y.len())));
        }
        if let Some(v) = x.iter().chain(&y).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*v));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Flaschka state: `a_1..a_{N−1} > 0`, `b_1..b_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFlaschka")]
pub struct TodaStateFlaschka {
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Deserialize)]
struct RawFlaschka {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TryFrom<RawFlaschka> for TodaStateFlaschka {
    type Error = Error;
    fn try_from(r: RawFlaschka) -> Result<Self> {
        Self::new(r.a, r.b)
    }
}

impl TodaStateFlaschka {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if b.is_empty() || a.len() + 1 != b.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} couplings for {} sites (need N−1 couplings)",
                a.len(),
                b.len()
            )));
        }
        if let Some(v) = a.iter().chain(&b).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*v));
        }
        if let Some(v) = a.iter().find(|v| **v <= 0.0) {
            return Err(Error::InvalidState(format!("coupling a = {v} is not positive")));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Number of sites `N`.
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }
}

/// Time derivative `(a′, b′)` of a Flaschka state.
#[derive(Debug, Clone, PartialEq)]
pub struct FlaschkaDerivative {
    pub da: Vec<f64>,
    pub db: Vec<f64>,
}

pub fn hamiltonian_xy(s: &TodaStatePhysical) -> Result<f64> {
    let kinetic: f64 = 0.5 * s.y.iter().map(|y| y * y).sum::<f64>();
    let potential: f64 = s.x.windows(2).map(|w| (w[0] - w[1]).exp()).sum();
    let h = kinetic + potential;
    if !h.is_finite() {
        return Err(Error::Overflow("Toda potential e^{x_j − x_{j+1}}".into()));
    }
    Ok(h)
}

pub fn flaschka_map(s: &TodaStatePhysical) -> Result<TodaStateFlaschka> {
    let a = s.x.windows(2).map(|w| 0.5 * (0.5 * (w[0] - w[1])).exp()).collect::<Vec<_>>();
    let b = s.y.iter().map(|y| -0.5 * y).collect();
    if let Some(v) = a.iter().find(|v| !v.is_finite() || **v == 0.0) {
        return Err(Error::Overflow(format!("coupling evaluates to {v}")));
    }
    TodaStateFlaschka::new(a, b)
}

/// Representative of the configuration class with `x_1 = gauge`.
pub fn flaschka_inverse(s: &TodaStateFlaschka, gauge: f64) -> TodaStatePhysical {
    let mut x = Vec::with_capacity(s.len());
    x.push(gauge);
    let ln2 = std::f64::consts::LN_2;
    let mut log_sum = 0.0;
    for (j, a) in s.a.iter().enumerate() {
        log_sum += a.ln();
        x.push(gauge - 2.0 * (j + 1) as f64 * ln2 - 2.0 * log_sum);
    }
    TodaStatePhysical { x, y: s.b.iter().map(|b| -2.0 * b).collect() }
}

/// `H = 4{Σa_j² + ½Σb_j²}`.
pub fn hamiltonian_ab(s: &TodaStateFlaschka) -> f64 {
    4.0 * (s.a.iter().map(|a| a * a).sum::<f64>() + 0.5 * s.b.iter().map(|b| b * b).sum::<f64>())
}

pub fn toda_rhs(s: &TodaStateFlaschka) -> FlaschkaDerivative {
    let n = s.len();
    let da = (0..n - 1).map(|j| s.a[j] * (s.b[j + 1] - s.b[j])).collect();
    let a2 = |j: usize| if j < n - 1 { s.a[j] * s.a[j] } else { 0.0 };
    let db = (0..n)
        .map(|j| {
            let left = if j == 0 { 0.0 } else { a2(j - 1) };
            2.0 * (a2(j) - left)
        })
        .collect();
    FlaschkaDerivative { da, db }
}

/// Samples of a trajectory at the listed times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<TodaStateFlaschka>,
}

fn axpy(s: &TodaStateFlaschka, h: f64, d: &FlaschkaDerivative) -> TodaStateFlaschka {
    TodaStateFlaschka {
        a: s.a.iter().zip(&d.da).map(|(a, da)| a + h * da).collect(),
        b: s.b.iter().zip(&d.db).map(|(b, db)| b + h * db).collect(),
    }
}

fn rk4_step(s: &TodaStateFlaschka, h: f64) -> TodaStateFlaschka {
    let k1 = toda_rhs(s);
    let k2 = toda_rhs(&axpy(s, 0.5 * h, &k1));
    let k3 = toda_rhs(&axpy(s, 0.5 * h, &k2));
    let k4 = toda_rhs(&axpy(s, h, &k3));
    let comb = |x: f64, d1: f64, d2: f64, d3: f64, d4: f64| x + h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
    TodaStateFlaschka {
        a: (0..s.a.len()).map(|j| comb(s.a[j], k1.da[j], k2.da[j], k3.da[j], k4.da[j])).collect(),
        b: (0..s.b.len()).map(|j| comb(s.b[j], k1.db[j], k2.db[j], k3.db[j], k4.db[j])).collect(),
    }
}

/// Fixed-step classical RK4 on `[0, t_final]`, sampled every `dt`; the last
/// step is shortened when `t_final` is not a multiple of `dt`.
pub fn integrate_toda(s0: &TodaStateFlaschka, t_final: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!("t_final = {t_final} must be non-negative")));
    }
    let steps = (t_final / dt - 1e-9).ceil().max(0.0) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(s0.clone());
    let mut s = s0.clone();
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * dt;
        let t = if k == steps { t_final } else { k as f64 * dt };
        s = rk4_step(&s, t - t_prev);
        if let Some(v) = s.a.iter().chain(&s.b).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*v));
        }
        if let Some((site, &value)) = s.a.iter().enumerate().find(|(_, a)| **a <= 0.0) {
            return Err(Error::PositivityLoss { site, value, time: t });
        }
        times.push(t);
        states.push(s.clone());
    }
    Ok(Trajectory { times, states })
}

/// Antisymmetric tridiagonal `B` with `+a_j` above and `−a_j` below the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxB {
    upper: Vec<f64>,
}

impl LaxB {
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.upper.len() + 1;
        let mut m = vec![vec![0.0; n]; n];
        for (j, a) in self.upper.iter().enumerate() {
            m[j][j + 1] = *a;
            m[j + 1][j] = -*a;
        }
        m
    }

    /// Dense `BL − LB`.
    pub fn commutator(&self, l: &JacobiMatrix) -> Vec<Vec<f64>> {
        let b = self.to_dense();
        let l = l.to_dense();
        let bl = matmul(&b, &l);
        let lb = matmul(&l, &b);
        bl.iter().zip(&lb).map(|(r1, r2)| r1.iter().zip(r2).map(|(x, y)| x - y).collect()).collect()
    }
}

fn matmul(p: &[Vec<f64>], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = p.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| p[i][k] * q[k][j]).sum()).collect()).collect()
}

pub fn lax_matrices(s: &TodaStateFlaschka) -> Result<(JacobiMatrix, LaxB)> {
    let l = JacobiMatrix::new(s.b.clone(), s.a.clone())?;
    Ok((l, LaxB { upper: s.a.clone() }))
}

/// Moser's solution: spectral data of `L(0)`, masses evolved explicitly,
/// `L(t)` rebuilt from the evolved measure. Works for negative `t` too.
pub fn spectral_solve(s0: &TodaStateFlaschka, t: f64) -> Result<TodaStateFlaschka> {
    if t == 0.0 {
        return Ok(s0.clone());
    }
    let (l, _) = lax_matrices(s0)?;
    let sd = l.spectral_data()?;
    // Masses below the smallest normal float would vanish; keeping them at
    // MIN_POSITIVE leaves the reconstruction unreduced.
    let masses: Vec<f64> =
        moser_masses(sd.eigenvalues(), sd.masses(), t).into_iter().map(|m| m.max(f64::MIN_POSITIVE)).collect();
    let total: f64 = masses.iter().sum();
    let mu = DiscreteMeasure::new(sd.eigenvalues().to_vec(), masses.iter().map(|m| m / total).collect(), false)?;
    let lt = jacobi_from_measure(&mu)?;
    TodaStateFlaschka::new(lt.offdiag().to_vec(), lt.diag().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub t_large: f64,
    pub eigenvalues: Vec<f64>,
    /// `max_j a_j(t_large)` and `max_j a_j(−t_large)`.
    pub max_a_forward: f64,
    pub max_a_backward: f64,
    /// Max distance between sorted `b(±t_large)` and sorted eigenvalues.
    pub b_error_forward: f64,
    pub b_error_backward: f64,
    /// Trace drift `|Σb(±t) − tr L|`.
    pub trace_drift: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Scattering limits: couplings decay and `b(±∞)` is the spectrum as a
/// multiset. The tolerance is `(1 + ρ)·max(1, 1/min r_j²)·e^{−g·t_large}`
/// where `g` is the smallest spectral gap and `ρ` the spectral radius.
pub fn asymptotics_check(s0: &TodaStateFlaschka, t_large: f64) -> Result<AsymptoticsReport> {
    let (l, _) = lax_matrices(s0)?;
    let sd = l.spectral_data()?;
    let eig = sd.eigenvalues().to_vec();
    let gap = eig.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let rho = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min_mass = sd.masses().iter().copied().fold(f64::INFINITY, f64::min);
    let tolerance = if gap.is_finite() {
        (1.0 + rho) * (1.0 / min_mass).max(1.0) * (-gap * t_large.abs()).exp()
    } else {
        0.0
    };
    let fwd = spectral_solve(s0, t_large)?;
    let bwd = spectral_solve(s0, -t_large)?;
    let max_a = |s: &TodaStateFlaschka| s.a.iter().copied().fold(0.0, f64::max);
    let b_err = |s: &TodaStateFlaschka| {
        let mut b = s.b.clone();
        b.sort_by(f64::total_cmp);
        b.iter().zip(&eig).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let trace: f64 = s0.b.iter().sum();
    let trace_drift =
        (fwd.b.iter().sum::<f64>() - trace).abs().max((bwd.b.iter().sum::<f64>() - trace).abs());
    let (ma_f, ma_b, be_f, be_b) = (max_a(&fwd), max_a(&bwd), b_err(&fwd), b_err(&bwd));
    let slack = 1e-12 * (1.0 + rho);
    let pass = [ma_f, ma_b, be_f, be_b].iter().all(|v| *v <= tolerance + slack) && trace_drift <= slack * 10.0;
    Ok(AsymptoticsReport {
        t_large,
        eigenvalues: eig,
        max_a_forward: ma_f,
        max_a_backward: ma_b,
        b_error_forward: be_f,
        b_error_backward: be_b,
        trace_drift,
        tolerance,
        pass,
    })
}

/// Columns `t, a_1..a_{N−1}, b_1..b_N, H, λ_1..λ_N`.
pub fn trajectory_csv(traj: &Trajectory) -> Result<CsvTable> {
    let n = traj.states.first().map_or(0, TodaStateFlaschka::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..n).map(|j| format!("a_{j}")));
    header.extend((1..=n).map(|j| format!("b_{j}")));
    header.push("H".into());
    header.extend((1..=n).map(|j| format!("lambda_{j}")));
    let mut table = CsvTable::new(header);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let (l, _) = lax_matrices(s)?;
        let (eig, _) = l.eigen()?;
        let mut row = vec![*t];
        row.extend_from_slice(&s.a);
        row.extend_from_slice(&s.b);
        row.push(hamiltonian_ab(s));
        row.extend(eig);
        table.push_floats(&row);
    }
    Ok(table)
}
