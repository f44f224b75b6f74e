//! Points of the Klein–Dirac quadric, the Hua–Aronszajn kernel and the
//! multidimensional Stieltjes–Markov transform of pseudo-positive measures.
//!
//! A point `ζθ` is the class of `(ζ, θ) ∈ ℂ × S^{n−1}` under
//! `(ζ, θ) ~ (−ζ, −θ)`. The kernel
//! `K(ζθ; x) = ζ^{n−1}/r(ζθ − x)^n = ζ/(ζ² − |x|²) Σ_k ζ^{−k} Σ_ℓ Y_{k,ℓ}(θ) Y_{k,ℓ}(x)`
//! and the transform `μ̂(ζ, θ) = Σ ζ^{1−k} Y_{k,ℓ}(θ) ∫ r^k dμ_{k,ℓ}(r)/(ζ² − r²)`
//! are both odd under the antipodal map on raw pairs, so every public entry
//! point evaluates at the canonical representative.
//!
//! Branch of `r`: `r = ζ·√(w/ζ²)` with the principal root and
//! `w = ζ² − 2ζ⟨θ, x⟩ + |x|²`. Since `w/ζ² = (1 − ζ₁/ζ)(1 − ζ₂/ζ)` with both
//! factors in the right half-plane when `|ζ| > |x|`, this is the branch that
//! is analytic there and behaves like `ζ` at infinity.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment::DiscreteMeasure;
use crate::sphere::{
    check_dim, harmonics_upto, solid_harmonics_upto, HarmonicIndex, HarmonicTable, SphereDirection,
    SphereQuadrature,
};

/// Default series truncation degree.
pub const DEFAULT_K_MAX: usize = 24;

const SINGULAR_REL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdqPoint {
    zeta: Complex64,
    theta: SphereDirection,
}

impl KdqPoint {
    /// Canonical representative of `(ζ, θ)`: `Re ζ > 0`, or `Re ζ = 0` and
    /// `Im ζ > 0`; at `ζ = 0` the first nonzero coordinate of `θ` is positive.
    pub fn new(zeta: Complex64, theta: SphereDirection) -> Result<Self> {
        if !zeta.re.is_finite() || !zeta.im.is_finite() {
            return Err(Error::NonFinite(if zeta.re.is_finite() { zeta.im } else { zeta.re }));
        }
        let flip = if zeta.re != 0.0 {
            zeta.re < 0.0
        } else if zeta.im != 0.0 {
            zeta.im < 0.0
        } else {
            theta.coords().iter().find(|c| **c != 0.0).is_some_and(|c| *c < 0.0)
        };
        Ok(if flip { Self { zeta: Complex64::new(0.0 - zeta.re, 0.0 - zeta.im), theta: theta.neg() } } else { Self { zeta, theta } })
    }

    pub fn zeta(&self) -> Complex64 {
        self.zeta
    }

    pub fn theta(&self) -> &SphereDirection {
        &self.theta
    }

    pub fn n(&self) -> usize {
        self.theta.n()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn check_point(n: usize, x: &[f64]) -> Result<()> {
    if x.len() != n {
        return Err(Error::ShapeMismatch(format!("point has {} coordinates, n = {n}", x.len())));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(*v));
    }
    Ok(())
}

/// Roots `ζ_{1,2} = ⟨θ, x⟩ ± i√(|x|² − ⟨θ, x⟩²)` of `w(ζ) = 0`.
pub fn singular_roots(theta: &SphereDirection, x: &[f64]) -> Result<(Complex64, Complex64)> {
    check_point(theta.n(), x)?;
    let p = theta.dot(x);
    let disc = (x.iter().map(|c| c * c).sum::<f64>() - p * p).max(0.0).sqrt();
    Ok((Complex64::new(p, disc), Complex64::new(p, -disc)))
}

fn r_pow_n_raw(zeta: Complex64, theta: &SphereDirection, x: &[f64]) -> Result<Complex64> {
    let x2: f64 = x.iter().map(|c| c * c).sum();
    let w = zeta * zeta - 2.0 * zeta * theta.dot(x) + x2;
    if w.norm() <= SINGULAR_REL_TOL * (zeta.norm_sqr() + x2) || w.norm() == 0.0 {
        return Err(Error::KernelSingularity);
    }
    Ok(match theta.n() {
        2 => w,
        _ => {
            let r = if zeta.norm() == 0.0 { w.sqrt() } else { zeta * (w / (zeta * zeta)).sqrt() };
            r * r * r
        }
    })
}

/// `r(ζθ − x)^n` with the branch described in the module docs.
pub fn aronszajn_r_pow_n(p: &KdqPoint, x: &[f64]) -> Result<Complex64> {
    check_point(p.n(), x)?;
    r_pow_n_raw(p.zeta, &p.theta, x)
}

fn kernel_closed_raw(zeta: Complex64, theta: &SphereDirection, x: &[f64]) -> Result<Complex64> {
    let rn = r_pow_n_raw(zeta, theta, x)?;
    Ok(zeta.powu(theta.n() as u32 - 1) / rn)
}

/// `ζ^{n−1}/r(ζθ − x)^n`.
pub fn hua_kernel_closed(p: &KdqPoint, x: &[f64]) -> Result<Complex64> {
    check_point(p.n(), x)?;
    kernel_closed_raw(p.zeta, &p.theta, x)
}

/// `Σ_{k > k_max} d_k q^k` in closed form (infinite for `q ≥ 1`).
pub fn degree_tail(n: usize, k_max: usize, q: f64) -> f64 {
    if q >= 1.0 {
        return f64::INFINITY;
    }
    let qk = q.powi(k_max as i32 + 1);
    match n {
        2 => 2.0 * qk / (1.0 - q),
        _ => qk * ((2 * k_max + 3) as f64 / (1.0 - q) + 2.0 * q / ((1.0 - q) * (1.0 - q))),
    }
}

/// A truncated series value with a bound on the omitted terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: Complex64,
    pub tail_bound: f64,
}

/// Hua–Aronszajn series through degree `k_max`.
pub fn hua_kernel(p: &KdqPoint, x: &[f64], k_max: usize) -> Result<SeriesValue> {
    let n = p.n();
    check_point(n, x)?;
    let zeta = p.zeta;
    let rx = norm(x);
    if zeta.norm() <= rx {
        return Err(Error::DivergenceRegion { zeta_abs: zeta.norm(), radius: rx });
    }
    let y_theta = harmonics_upto(&p.theta, k_max);
    let y_x = solid_harmonics_upto(n, x, k_max)?;
    let inv = 1.0 / zeta;
    let mut zk = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..=k_max {
        let zonal: f64 = y_theta.degree(k).iter().zip(y_x.degree(k)).map(|(a, b)| a * b).sum();
        sum += zk * zonal;
        zk *= inv;
    }
    let pre = zeta / (zeta * zeta - rx * rx);
    let tail_bound = pre.norm() * degree_tail(n, k_max, rx / zeta.norm());
    Ok(SeriesValue { value: pre * sum, tail_bound })
}

/// One Almansi term `c·|x|^{2j} Y_{k,ℓ}(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlmansiTerm {
    pub j: usize,
    pub idx: HarmonicIndex,
    pub coeff: f64,
}

/// Polynomial in the Almansi basis `{|x|^{2j} Y_{k,ℓ}(x)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmansiPolynomial {
    n: usize,
    terms: Vec<AlmansiTerm>,
}

impl AlmansiPolynomial {
    pub fn new(n: usize, terms: Vec<AlmansiTerm>) -> Result<Self> {
        check_dim(n)?;
        for t in &terms {
            t.idx.validate(n)?;
        }
        Ok(Self { n, terms })
    }

    pub fn monomial(n: usize, j: usize, idx: HarmonicIndex) -> Result<Self> {
        Self::new(n, vec![AlmansiTerm { j, idx, coeff: 1.0 }])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[AlmansiTerm] {
        &self.terms
    }

    fn max_degree(&self) -> usize {
        self.terms.iter().map(|t| t.idx.k).max().unwrap_or(0)
    }

    /// Direct evaluation at a real point.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let table = solid_harmonics_upto(self.n, x, self.max_degree())?;
        let r2: f64 = x.iter().map(|c| c * c).sum();
        Ok(self.terms.iter().map(|t| t.coeff * r2.powi(t.j as i32) * table.get(t.idx).unwrap_or(0.0)).sum())
    }

    /// Holomorphic extension `P(ζθ) = Σ c ζ^{2j+k} Y_{k,ℓ}(θ)`.
    fn eval_on_quadric(&self, zeta: Complex64, y_theta: &HarmonicTable) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.coeff * y_theta.get(t.idx).unwrap_or(0.0) * zeta.powu((2 * t.j + t.idx.k) as u32))
            .sum()
    }
}

/// Node counts for the Cauchy-type integral: `zeta_points` on the unit circle
/// and an exactness degree for the sphere rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CauchyQuadrature {
    pub zeta_points: usize,
    pub sphere_degree: usize,
}

impl CauchyQuadrature {
    pub fn for_kmax(k_max: usize) -> Self {
        Self { zeta_points: 4 * (k_max + 1), sphere_degree: 2 * k_max + 2 }
    }
}

impl Default for CauchyQuadrature {
    fn default() -> Self {
        Self::for_kmax(DEFAULT_K_MAX)
    }
}

/// Tensor-product rule on `{|ζ| = 1} × S^{n−1}` for the reproduction formula
/// `P(x) = (2πi)^{−1} ∮∫ ζ^{n−1}/r(ζθ − x)^n P(ζθ) dθ dζ`.
#[derive(Debug, Clone)]
pub struct CauchyIntegrator {
    n: usize,
    zetas: Vec<Complex64>,
    sphere: SphereQuadrature,
    theta_tables: Vec<HarmonicTable>,
    table_degree: usize,
}

/// Kernel samples `K(ζ_m θ_q; x)·ζ_m·w_q/M` for one evaluation point.
#[derive(Debug, Clone)]
pub struct PreparedKernel {
    x: Vec<f64>,
    weights: Vec<Complex64>,
}

impl PreparedKernel {
    pub fn x(&self) -> &[f64] {
        &self.x
    }
}

impl CauchyIntegrator {
    pub fn new(n: usize, quad: CauchyQuadrature) -> Result<Self> {
        if quad.zeta_points == 0 {
            return Err(Error::InvalidArgument("need at least one contour point".into()));
        }
        let m = quad.zeta_points;
        let zetas = (0..m)
            .map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / m as f64))
            .collect();
        Ok(Self {
            n,
            zetas,
            sphere: SphereQuadrature::new(n, quad.sphere_degree)?,
            theta_tables: Vec::new(),
            table_degree: 0,
        })
    }

    /// Sample the kernel for `x` (`|x| < 1`).
    pub fn prepare(&self, x: &[f64]) -> Result<PreparedKernel> {
        check_point(self.n, x)?;
        let rx = norm(x);
        if rx >= 1.0 {
            return Err(Error::DivergenceRegion { zeta_abs: 1.0, radius: rx });
        }
        let m = self.zetas.len() as f64;
        let mut weights = Vec::with_capacity(self.zetas.len() * self.sphere.nodes().len());
        for &z in &self.zetas {
            for (theta, w) in self.sphere.nodes().iter().zip(self.sphere.weights()) {
                weights.push(kernel_closed_raw(z, theta, x)? * z * (w / m));
            }
        }
        Ok(PreparedKernel { x: x.to_vec(), weights })
    }

    fn ensure_tables(&mut self, degree: usize) {
        if self.theta_tables.is_empty() || degree > self.table_degree {
            self.theta_tables = self.sphere.nodes().iter().map(|t| harmonics_upto(t, degree)).collect();
            self.table_degree = degree;
        }
    }

    /// Value of the double integral; the imaginary part is a quadrature
    /// diagnostic and vanishes for exact integration.
    pub fn reproduce(&mut self, prepared: &PreparedKernel, p: &AlmansiPolynomial) -> Result<Complex64> {
        if p.n() != self.n {
            return Err(Error::ShapeMismatch(format!("polynomial in n = {}, integrator in n = {}", p.n(), self.n)));
        }
        self.ensure_tables(p.max_degree());
        let nq = self.sphere.nodes().len();
        let mut total = Complex64::new(0.0, 0.0);
        for (mi, &z) in self.zetas.iter().enumerate() {
            for (qi, table) in self.theta_tables.iter().enumerate() {
                total += prepared.weights[mi * nq + qi] * p.eval_on_quadric(z, table);
            }
        }
        Ok(total)
    }
}

/// One-shot reproduction of `P(x)`.
pub fn cauchy_reproduce(p: &AlmansiPolynomial, x: &[f64], quad: CauchyQuadrature) -> Result<Complex64> {
    let mut integrator = CauchyIntegrator::new(p.n(), quad)?;
    let prepared = integrator.prepare(x)?;
    integrator.reproduce(&prepared, p)
}

/// Measure given by one-dimensional components `dμ_{k,ℓ}(r) ≥ 0` on `[0, ∞)`.
/// Absent indices are zero components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPseudoPositive", into = "RawPseudoPositive")]
pub struct PseudoPositiveMeasure {
    n: usize,
    k_max: usize,
    components: BTreeMap<HarmonicIndex, DiscreteMeasure>,
}

#[derive(Serialize, Deserialize)]
struct RawComponent {
    k: usize,
    ell: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPseudoPositive {
    n: usize,
    k_max: usize,
    components: Vec<RawComponent>,
}

impl TryFrom<RawPseudoPositive> for PseudoPositiveMeasure {
    type Error = Error;
    fn try_from(raw: RawPseudoPositive) -> Result<Self> {
        let mut comps = Vec::with_capacity(raw.components.len());
        for c in raw.components {
            comps.push((HarmonicIndex { k: c.k, ell: c.ell }, DiscreteMeasure::new(c.atoms, c.weights, true)?));
        }
        PseudoPositiveMeasure::new(raw.n, raw.k_max, comps)
    }
}

impl From<PseudoPositiveMeasure> for RawPseudoPositive {
    fn from(m: PseudoPositiveMeasure) -> Self {
        RawPseudoPositive {
            n: m.n,
            k_max: m.k_max,
            components: m
                .components
                .into_iter()
                .map(|(idx, mu)| RawComponent {
                    k: idx.k,
                    ell: idx.ell,
                    atoms: mu.atoms().to_vec(),
                    weights: mu.weights().to_vec(),
                })
                .collect(),
        }
    }
}

impl PseudoPositiveMeasure {
    pub fn new(
        n: usize,
        k_max: usize,
        components: impl IntoIterator<Item = (HarmonicIndex, DiscreteMeasure)>,
    ) -> Result<Self> {
        check_dim(n)?;
        let mut map = BTreeMap::new();
        for (idx, mu) in components {
            idx.validate(n)?;
            if idx.k > k_max {
                return Err(Error::InvalidMeasure(format!("component degree {} exceeds k_max = {k_max}", idx.k)));
            }
            if let Some(a) = mu.atoms().iter().find(|a| **a < 0.0) {
                return Err(Error::InvalidMeasure(format!("radius {a} is negative")));
            }
            let mu = DiscreteMeasure::new(mu.atoms().to_vec(), mu.weights().to_vec(), true)?;
            if map.insert(idx, mu).is_some() {
                return Err(Error::InvalidMeasure(format!("duplicate component ({}, {})", idx.k, idx.ell)));
            }
        }
        Ok(Self { n, k_max, components: map })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn components(&self) -> &BTreeMap<HarmonicIndex, DiscreteMeasure> {
        &self.components
    }

    pub fn component(&self, idx: HarmonicIndex) -> Option<&DiscreteMeasure> {
        self.components.get(&idx)
    }

    /// Largest atom over all components (0 for the zero measure).
    pub fn support_radius(&self) -> f64 {
        self.components.values().flat_map(|m| m.atoms().iter().copied()).fold(0.0, f64::max)
    }

    /// `s_{k,ℓ;j} = ∫ r^{k+2j} dμ_{k,ℓ}(r)` for `j = 0..=jmax`.
    pub fn component_moments(&self, idx: HarmonicIndex, jmax: usize) -> Vec<f64> {
        let Some(mu) = self.components.get(&idx) else {
            return vec![0.0; jmax + 1];
        };
        (0..=jmax)
            .map(|j| mu.atoms().iter().zip(mu.weights()).map(|(r, w)| w * r.powi((idx.k + 2 * j) as i32)).sum())
            .collect()
    }

    /// The measure `r^k dμ_{k,ℓ}(r)` pushed to `ρ = r²`; its Stieltjes
    /// transform at `ζ²` is `∫ r^k dμ_{k,ℓ}/(ζ² − r²)`.
    pub fn pushforward(&self, idx: HarmonicIndex) -> Result<DiscreteMeasure> {
        let Some(mu) = self.components.get(&idx) else {
            return Ok(DiscreteMeasure::empty(true));
        };
        let (atoms, weights): (Vec<f64>, Vec<f64>) = mu
            .atoms()
            .iter()
            .zip(mu.weights())
            .map(|(r, w)| (r * r, w * r.powi(idx.k as i32)))
            .filter(|(_, w)| *w > 0.0)
            .unzip();
        DiscreteMeasure::new(atoms, weights, true)
    }
}

fn markov_raw(mu: &PseudoPositiveMeasure, zeta: Complex64, theta: &SphereDirection) -> Result<Complex64> {
    let max_k = mu.components.keys().map(|i| i.k).max().unwrap_or(0);
    let y = harmonics_upto(theta, max_k);
    let z2 = zeta * zeta;
    let mut total = Complex64::new(0.0, 0.0);
    for &idx in mu.components.keys() {
        let t = mu.pushforward(idx)?.stieltjes_transform(z2)?;
        total += zeta.powi(1 - idx.k as i32) * y.get(idx).unwrap_or(0.0) * t;
    }
    Ok(total)
}

/// `μ̂(ζ, θ)` through the stored components, with a growth-extrapolated bound
/// for degrees above `k_max` (zero when the measure is exactly the stored one).
///
/// Requires `|ζ|` beyond the support radius, or, when `Im ζ² ≠ 0`, beyond the
/// growth constant `D` (the region of the growth-condition theorem).
pub fn markov_stieltjes(mu: &PseudoPositiveMeasure, p: &KdqPoint) -> Result<SeriesValue> {
    if p.n() != mu.n {
        return Err(Error::ShapeMismatch(format!("point in n = {}, measure in n = {}", p.n(), mu.n)));
    }
    let za = p.zeta.norm();
    let z2 = p.zeta * p.zeta;
    let growth = growth_condition_check(mu);
    // Off the real ζ²-axis the growth constant D decides convergence;
    // on it the support radius does.
    let radius = if z2.im != 0.0 && growth.ok { growth.d.min(mu.support_radius()) } else { mu.support_radius() };
    if za <= radius {
        return Err(Error::DivergenceRegion { zeta_abs: za, radius });
    }
    let value = markov_raw(mu, p.zeta, &p.theta)?;
    let tail_bound = if !growth.ok {
        f64::INFINITY
    } else if growth.c == 0.0 {
        0.0
    } else {
        // Distance from ζ² to [0, ∞), valid for any radial support.
        let dist = if z2.re < 0.0 { z2.norm() } else { z2.im.abs() };
        if dist == 0.0 {
            f64::INFINITY
        } else {
            za * growth.c / dist * degree_tail(mu.n, mu.k_max, growth.d / za)
        }
    };
    Ok(SeriesValue { value, tail_bound })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub c: f64,
    pub d: f64,
    /// `m_k = max_ℓ ∫ r^k dμ_{k,ℓ}` for `k = 0..=k_max`.
    pub moments: Vec<f64>,
    pub ok: bool,
}

/// Fit `m_k ≤ C·D^k` to a moment sequence. `C = m_0(1 + ε)` and
/// `D = max_k (m_k/m_0)^{1/k}`; when `m_0 = 0` the largest moment stands in
/// for `m_0` and `D ≥ 1`. Super-geometric growth is flagged when the log
/// increments `ln m_{k+1} − ln m_k` increase strictly over the last half of
/// the range and rise there by at least `ln 1.5` (a geometric tail keeps them
/// constant; factorial growth makes them grow like `ln k`).
pub fn growth_from_moments(moments: &[f64]) -> GrowthReport {
    let finite = moments.iter().all(|m| m.is_finite() && *m >= 0.0);
    let peak = moments.iter().copied().fold(0.0, f64::max);
    if !finite || peak == 0.0 {
        return GrowthReport { c: 0.0, d: 0.0, moments: moments.to_vec(), ok: finite };
    }
    let m0 = moments[0];
    let base = if m0 > 0.0 { m0 } else { peak };
    let roots: Vec<(usize, f64)> = moments
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, m)| **m > 0.0)
        .map(|(k, m)| (k, (m / base).powf(1.0 / k as f64)))
        .collect();
    let mut d = roots.iter().map(|r| r.1).fold(0.0, f64::max);
    if m0 == 0.0 {
        d = d.max(1.0);
    }
    let incr: Vec<f64> = moments.windows(2).filter(|w| w[0] > 0.0 && w[1] > 0.0).map(|w| (w[1] / w[0]).ln()).collect();
    let tail = &incr[incr.len() / 2..];
    let super_geometric = tail.len() >= 3
        && tail.windows(2).all(|w| w[1] > w[0])
        && tail[tail.len() - 1] - tail[0] >= 1.5f64.ln();
    GrowthReport { c: base * (1.0 + 1e-12), d, moments: moments.to_vec(), ok: !super_geometric }
}

/// Growth constants of a pseudo-positive measure. A finite atomic measure
/// always satisfies `m_k ≤ (max mass)·R^k` with `R` its support radius, so
/// the heuristic flag is overridden whenever that certificate applies.
pub fn growth_condition_check(mu: &PseudoPositiveMeasure) -> GrowthReport {
    let mut moments = vec![0.0f64; mu.k_max + 1];
    for (idx, m) in &mu.components {
        let v: f64 = m.atoms().iter().zip(m.weights()).map(|(r, w)| w * r.powi(idx.k as i32)).sum();
        moments[idx.k] = moments[idx.k].max(v);
    }
    let mut rep = growth_from_moments(&moments);
    if !rep.ok && rep.moments.iter().all(|m| m.is_finite()) {
        let max_mass = mu.components.values().map(DiscreteMeasure::total_mass).fold(0.0, f64::max);
        let r = mu.support_radius();
        let certified = moments.iter().enumerate().all(|(k, m)| *m <= max_mass * r.powi(k as i32) * (1.0 + 1e-12));
        rep.ok = certified;
    }
    rep
}

/// The ray `ζ = ρ e^{iπ/4}`, on which `arg ζ² = π/2`.
pub fn nevanlinna_ray(moduli: &[f64]) -> Vec<Complex64> {
    moduli.iter().map(|&r| Complex64::from_polar(r, std::f64::consts::FRAC_PI_4)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiNevanlinnaRow {
    pub zeta: Complex64,
    pub residual: f64,
    /// `|ζ^{k−1}∫μ̂ Y_{k,ℓ} dθ − ∫ r^k dμ_{k,ℓ}/(ζ² − r²)|`.
    pub projection_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiNevanlinnaReport {
    pub idx: HarmonicIndex,
    pub n_order: usize,
    pub s_2n: f64,
    pub rows: Vec<MultiNevanlinnaRow>,
    /// Residuals are non-increasing along the given order.
    pub decreasing: bool,
}

/// Residuals `|ζ^{4N+1}{ζ^k ∫μ̂ Y_{k,ℓ} dθ − Σ_{j<2N} s_{k,ℓ;j} ζ^{−2j−1}} − s_{k,ℓ;2N}|`.
///
/// The projection is computed with a sphere rule of exactness degree
/// `quad_degree`, which must reach `k_max + k`.
pub fn multi_nevanlinna_check(
    mu: &PseudoPositiveMeasure,
    idx: HarmonicIndex,
    n_order: usize,
    zetas: &[Complex64],
    quad_degree: usize,
) -> Result<MultiNevanlinnaReport> {
    idx.validate(mu.n)?;
    let required = mu.k_max + idx.k;
    if quad_degree < required {
        return Err(Error::InsufficientQuadrature { given: quad_degree, required });
    }
    let quad = SphereQuadrature::new(mu.n, quad_degree)?;
    let tables: Vec<f64> =
        quad.nodes().iter().map(|t| harmonics_upto(t, idx.k).get(idx).unwrap_or(0.0)).collect();
    let s = mu.component_moments(idx, 2 * n_order);
    let s_2n = s[2 * n_order];
    let push = mu.pushforward(idx)?;
    let radius = mu.support_radius();
    let mut rows = Vec::with_capacity(zetas.len());
    for &zeta in zetas {
        if zeta.norm() <= radius {
            return Err(Error::DivergenceRegion { zeta_abs: zeta.norm(), radius });
        }
        let mut proj = Complex64::new(0.0, 0.0);
        for ((theta, w), y) in quad.nodes().iter().zip(quad.weights()).zip(&tables) {
            proj += markov_raw(mu, zeta, theta)? * (w * y);
        }
        let direct = push.stieltjes_transform(zeta * zeta)?;
        let projection_error = (zeta.powi(idx.k as i32 - 1) * proj - direct).norm();
        let mut bracket = zeta.powu(idx.k as u32) * proj;
        for (j, sj) in s.iter().take(2 * n_order).enumerate() {
            bracket -= sj * zeta.powi(-(2 * j as i32) - 1);
        }
        let residual = (zeta.powu(4 * n_order as u32 + 1) * bracket - s_2n).norm();
        rows.push(MultiNevanlinnaRow { zeta, residual, projection_error });
    }
    let decreasing = rows.windows(2).all(|w| w[1].residual <= w[0].residual);
    Ok(MultiNevanlinnaReport { idx, n_order, s_2n, rows, decreasing })
}

/// Truncated sums `f_N(ζθ) = ζ^{−1} Σ_{k,ℓ} Σ_{j<2N} s_{k,ℓ;j} ζ^{−k−2j} Y_{k,ℓ}(θ)`
/// and `g_N(ζθ) = Σ_{k,ℓ} s_{k,ℓ;2N} ζ^{−k} Y_{k,ℓ}(θ)`.
pub fn divergent_partial_sums(
    mu: &PseudoPositiveMeasure,
    n_order: usize,
    p: &KdqPoint,
) -> Result<(Complex64, Complex64)> {
    if p.n() != mu.n {
        return Err(Error::ShapeMismatch(format!("point in n = {}, measure in n = {}", p.n(), mu.n)));
    }
    if p.zeta.norm() == 0.0 {
        return Err(Error::DivisionByZero("ζ = 0 in the asymptotic sums".into()));
    }
    let max_k = mu.components.keys().map(|i| i.k).max().unwrap_or(0);
    let y = harmonics_upto(&p.theta, max_k);
    let zeta = p.zeta;
    let mut f = Complex64::new(0.0, 0.0);
    let mut g = Complex64::new(0.0, 0.0);
    for &idx in mu.components.keys() {
        let yv = y.get(idx).unwrap_or(0.0);
        let s = mu.component_moments(idx, 2 * n_order);
        for (j, sj) in s.iter().take(2 * n_order).enumerate() {
            f += sj * yv * zeta.powi(-((idx.k + 2 * j) as i32) - 1);
        }
        g += s[2 * n_order] * yv * zeta.powi(-(idx.k as i32));
    }
    Ok((f, g))
}

/// `|ζ^{4N+1}(μ̂ − f_N) − g_N|` at `p`.
pub fn summation_residual(mu: &PseudoPositiveMeasure, n_order: usize, p: &KdqPoint) -> Result<f64> {
    let (f, g) = divergent_partial_sums(mu, n_order, p)?;
    let m = markov_stieltjes(mu, p)?.value;
    Ok((p.zeta.powu(4 * n_order as u32 + 1) * (m - f) - g).norm())
}
