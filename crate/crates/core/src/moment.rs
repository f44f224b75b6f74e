//! One-dimensional atomic measures and the Jacobi-matrix machinery around them.
//!
//! The canonical Stieltjes transform is `f(λ) = ∫ dμ(τ)/(λ − τ)`. A Jacobi
//! matrix `L` is stored in natural order `b_1..b_N`, `a_1..a_{N−1}`, and the
//! measure ↔ matrix maps put the recurrence coefficients in the bottom-right
//! corner: `b_N = α_0`, `a_{N−1} = √β_1`, `b_{N−1} = α_1`, and so on. With that
//! ordering the spectral measure of `L` is taken at `e_N = (0, …, 0, 1)` and
//! `⟨(λI − L)^{−1} e_N, e_N⟩` equals the transform of the measure.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// Atoms closer than this (relative to `max(1, |atom|)`) are merged.
pub const COLLISION_TOL: f64 = 1e-12;

/// Tolerance on `Σ r_j² = 1` for spectral data.
pub const MASS_TOL: f64 = 1e-12;

/// Finite atomic measure `Σ w_m δ(λ − λ_m)` with strictly positive weights.
///
/// Atoms are kept sorted ascending; coincident atoms are merged on
/// construction by summing their weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    half_line: bool,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    #[serde(default)]
    half_line: bool,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.atoms, raw.weights, raw.half_line)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure { atoms: m.atoms, weights: m.weights, half_line: m.half_line }
    }
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>, half_line: bool) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite atom or weight".into()));
        }
        if let Some(w) = weights.iter().find(|w| **w <= 0.0) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not positive")));
        }
        if half_line {
            if let Some(a) = atoms.iter().find(|a| **a < 0.0) {
                return Err(Error::InvalidMeasure(format!("atom {a} lies off the half-line")));
            }
        }

        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match merged.last_mut() {
                Some((la, lw)) if (a - *la).abs() <= COLLISION_TOL * la.abs().max(1.0) => {
                    *la = (*la * *lw + a * w) / (*lw + w);
                    *lw += w;
                }
                _ => merged.push((a, w)),
            }
        }
        let (atoms, weights) = merged.into_iter().unzip();
        Ok(Self { atoms, weights, half_line })
    }

    /// The zero measure.
    pub fn empty(half_line: bool) -> Self {
        Self { atoms: Vec::new(), weights: Vec::new(), half_line }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn half_line(&self) -> bool {
        self.half_line
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Power moments `s_0..=s_jmax`, `s_j = Σ w_m λ_m^j`.
    pub fn moments(&self, jmax: usize) -> Vec<f64> {
        let mut s = vec![0.0; jmax + 1];
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            let mut p = w;
            for sj in s.iter_mut() {
                *sj += p;
                p *= a;
            }
        }
        s
    }

    /// `f(λ) = Σ w_m/(λ − λ_m)`.
    pub fn stieltjes_transform(&self, lambda: Complex64) -> Result<Complex64> {
        let mut f = Complex64::new(0.0, 0.0);
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            let d = lambda - a;
            if d.norm() == 0.0 {
                return Err(Error::Pole(lambda));
            }
            f += w / d;
        }
        Ok(f)
    }

    /// Three-term recurrence coefficients of the orthonormal polynomials:
    /// `α_0..α_{N−1}` and `β_1..β_{N−1}` (so `beta[i] = β_{i+1}`).
    ///
    /// Computed by the Rutishauser–Gragg–Harrod update, which inserts one
    /// atom at a time through plane rotations. Weights enter only through
    /// ratios, so masses spanning hundreds of orders of magnitude keep their
    /// relative accuracy (Lanczos on `diag(atoms)` does not).
    pub fn recurrence_coefficients(&self, n: usize) -> Result<Recurrence> {
        if n > self.len() || n == 0 {
            return Err(Error::RankDeficient { requested: n, available: self.len() });
        }
        let mut rec = rkpw(&self.atoms, &self.weights);
        rec.alpha.truncate(n);
        rec.beta.truncate(n - 1);
        Ok(rec)
    }

    /// Orthonormal polynomial `P_N(τ)` and its derivative.
    ///
    /// For `N` below the atom count `P_N` is the orthonormal polynomial; for
    /// `N` equal to the atom count the orthonormal limit does not exist and
    /// the monic node polynomial `Π(τ − λ_m)` is returned instead. Ratios such
    /// as `Q_N/P_N` do not depend on that normalization.
    pub fn orthonormal_poly(&self, n: usize, tau: f64) -> Result<(f64, f64)> {
        let m = self.len();
        if n > m {
            return Err(Error::RankDeficient { requested: n, available: m });
        }
        if n == 0 {
            return Ok((1.0 / self.total_mass().sqrt(), 0.0));
        }
        if n == m {
            let mut p = 1.0;
            let mut dp = 0.0;
            for &a in &self.atoms {
                dp = dp * (tau - a) + p;
                p *= tau - a;
            }
            return Ok((p, dp));
        }
        let rec = self.recurrence_coefficients(n + 1)?;
        let mut p_prev = 0.0;
        let mut dp_prev = 0.0;
        let mut p = 1.0 / self.total_mass().sqrt();
        let mut dp = 0.0;
        for i in 0..n {
            let sb = rec.beta[i].sqrt();
            let sb_prev = if i == 0 { 0.0 } else { rec.beta[i - 1].sqrt() };
            let p_next = ((tau - rec.alpha[i]) * p - sb_prev * p_prev) / sb;
            let dp_next = (p + (tau - rec.alpha[i]) * dp - sb_prev * dp_prev) / sb;
            p_prev = p;
            dp_prev = dp;
            p = p_next;
            dp = dp_next;
        }
        Ok((p, dp))
    }

    /// Second-kind polynomial `Q_N(τ) = ∫ (P_N(τ) − P_N(λ))/(τ − λ) dμ(λ)`,
    /// using `P_N'(λ_m)` when `τ` sits on an atom.
    pub fn second_kind_poly(&self, n: usize, tau: f64) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        let (p_tau, _) = self.orthonormal_poly(n, tau)?;
        let mut q = 0.0;
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            let d = tau - a;
            if d.abs() <= COLLISION_TOL * a.abs().max(1.0) {
                q += w * self.orthonormal_poly(n, a)?.1;
            } else {
                q += w * (p_tau - self.orthonormal_poly(n, a)?.0) / d;
            }
        }
        Ok(q)
    }

    /// Residuals of the Hamburger–Nevanlinna limit along `z = iy`.
    ///
    /// Uses the convention `F(z) = ∫ dμ(u)/(u − z) = −f(z)` and reports
    /// `|z^{2N+1}(F(z) + Σ_{j<2N} s_j z^{−j−1}) + s_{2N}|` for every `y`.
    /// The bracket cancels to `O(z^{−2N−1})`, so it is evaluated in
    /// double-double arithmetic.
    pub fn nevanlinna_limit_check(&self, n: usize, y_list: &[f64]) -> Result<NevanlinnaReport> {
        if let Some(y) = y_list.iter().find(|y| !(**y > 0.0) || !y.is_finite()) {
            return Err(Error::InvalidArgument(format!("y = {y} must be positive and finite")));
        }
        let two_n = 2 * n;
        let moments = self.moments_dd(two_n);
        let s_2n = moments[two_n];
        let mut rows = Vec::with_capacity(y_list.len());
        for &y in y_list {
            let yd = TwoFloat::from(y);
            // F(iy) = Σ w/(u − iy) = Σ w (u + iy)/(u² + y²)
            let mut bracket = DdComplex::zero();
            for (&u, &w) in self.atoms.iter().zip(&self.weights) {
                let ud = TwoFloat::from(u);
                let inv_den = dd_recip(ud * ud + yd * yd) * w;
                bracket = bracket + DdComplex { re: ud * inv_den, im: yd * inv_den };
            }
            // z^{−j−1} = (iy)^{−j−1}
            let inv_y = dd_recip(yd);
            let mut inv_pow = inv_y;
            for (j, &sj) in moments.iter().take(two_n).enumerate() {
                bracket = bracket + DdComplex::i_pow(-(j as i64) - 1).scale(sj * inv_pow);
                inv_pow = inv_pow * inv_y;
            }
            let mut y_pow = TwoFloat::from(1.0);
            for _ in 0..=two_n {
                y_pow = y_pow * yd;
            }
            let scaled = bracket * DdComplex::i_pow(two_n as i64 + 1).scale(y_pow);
            let residual = (scaled + DdComplex { re: s_2n, im: TwoFloat::from(0.0) }).norm();
            rows.push(NevanlinnaRow { y, residual, scaled_bracket: scaled.norm() });
        }
        let monotone = rows.windows(2).all(|w| w[1].residual <= w[0].residual);
        Ok(NevanlinnaReport { n, s_2n: f64::from(s_2n), rows, monotone })
    }

    fn moments_dd(&self, jmax: usize) -> Vec<TwoFloat> {
        let mut s = vec![TwoFloat::from(0.0); jmax + 1];
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            let mut p = TwoFloat::from(w);
            for sj in s.iter_mut() {
                *sj += p;
                p *= a;
            }
        }
        s
    }
}

// `TwoFloat` division is only accurate to f64 precision, so reciprocals are
// refined with two Newton steps.
fn dd_recip(x: TwoFloat) -> TwoFloat {
    let one = TwoFloat::from(1.0);
    let mut r = TwoFloat::from(1.0 / x.hi());
    for _ in 0..2 {
        r = r + r * (one - x * r);
    }
    r
}

#[derive(Debug, Clone, Copy)]
struct DdComplex {
    re: TwoFloat,
    im: TwoFloat,
}

impl DdComplex {
    fn zero() -> Self {
        Self { re: TwoFloat::from(0.0), im: TwoFloat::from(0.0) }
    }

    fn i_pow(p: i64) -> Self {
        let (re, im) = match p.rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        Self { re: TwoFloat::from(re), im: TwoFloat::from(im) }
    }

    fn scale(self, s: TwoFloat) -> Self {
        Self { re: self.re * s, im: self.im * s }
    }

    fn norm(self) -> f64 {
        f64::from(self.re).hypot(f64::from(self.im))
    }
}

impl std::ops::Add for DdComplex {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { re: self.re + o.re, im: self.im + o.im }
    }
}

impl std::ops::Mul for DdComplex {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NevanlinnaRow {
    pub y: f64,
    pub residual: f64,
    /// `|z^{2N+1}(F(z) + Σ_{j<2N} s_j z^{−j−1})|`, which tends to `s_{2N}`.
    pub scaled_bracket: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NevanlinnaReport {
    pub n: usize,
    pub s_2n: f64,
    pub rows: Vec<NevanlinnaRow>,
    /// Residuals are non-increasing along the given `y` order.
    pub monotone: bool,
}

/// Recurrence coefficients: `alpha[i] = α_i`, `beta[i] = β_{i+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrence {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Full recurrence of the normalized measure, built by adding atoms in turn.
/// `p0[k]` holds `α_k` and `p1[k]` holds `β_k` (with `β_0` the mass so far).
fn rkpw(atoms: &[f64], weights: &[f64]) -> Recurrence {
    let m = atoms.len();
    let mass: f64 = weights.iter().sum();
    let mut p0 = atoms.to_vec();
    let mut p1 = vec![0.0; m];
    p1[0] = weights[0] / mass;
    for n in 1..m {
        let xlam = atoms[n];
        let mut pn = weights[n] / mass;
        let (mut gam, mut sig, mut t) = (1.0, 0.0, 0.0);
        for k in 0..=n {
            let rho = p1[k] + pn;
            let tmp = gam * rho;
            let tsig = sig;
            if rho <= 0.0 {
                gam = 1.0;
                sig = 0.0;
            } else {
                gam = p1[k] / rho;
                sig = pn / rho;
            }
            let tk = sig * (p0[k] - xlam) - gam * t;
            p0[k] -= tk - t;
            t = tk;
            // t·(t/σ) rather than t²/σ: t² underflows for tiny weights.
            pn = if sig <= 0.0 { tsig * p1[k] } else { t * (t / sig) };
            p1[k] = tmp;
        }
    }
    p1.remove(0);
    Recurrence { alpha: p0, beta: p1 }
}

/// Lanczos with full reorthogonalization on `diag(atoms)`; kept as an
/// independent route for the recurrence tests.
#[cfg(test)]
fn lanczos(atoms: &[f64], weights: &[f64], steps: usize) -> Result<Recurrence> {
    let m = atoms.len();
    let mass: f64 = weights.iter().sum();
    let q0: Vec<f64> = weights.iter().map(|w| (w / mass).sqrt()).collect();
    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps.saturating_sub(1));

    for i in 0..steps {
        let q = &basis[i];
        let mut v: Vec<f64> = atoms.iter().zip(q).map(|(a, qi)| a * qi).collect();
        let a_i = dot(q, &v);
        alpha.push(a_i);
        if i + 1 == steps {
            break;
        }
        for (vj, qj) in v.iter_mut().zip(q) {
            *vj -= a_i * qj;
        }
        if i > 0 {
            let sb = beta[i - 1].sqrt();
            for (vj, pj) in v.iter_mut().zip(&basis[i - 1]) {
                *vj -= sb * pj;
            }
        }
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &v);
                for (vj, bj) in v.iter_mut().zip(b) {
                    *vj -= c * bj;
                }
            }
        }
        let norm = scaled_norm(&v);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::RankDeficient { requested: steps, available: i + 1 });
        }
        beta.push(norm * norm);
        basis.push(v.into_iter().map(|x| x / norm).collect());
        debug_assert!(basis.len() <= m);
    }
    Ok(Recurrence { alpha, beta })
}

// Two-pass norm that does not underflow for vectors of tiny entries.
#[cfg(test)]
fn scaled_norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale) * (x / scale)).sum::<f64>().sqrt()
}

#[cfg(test)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetric tridiagonal matrix with strictly positive off-diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiMatrix {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl JacobiMatrix {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::ShapeMismatch(format!(
                "diagonal of length {} needs an off-diagonal of length {}",
                diag.len(),
                diag.len().saturating_sub(1)
            )));
        }
        if diag.iter().chain(&offdiag).any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite Jacobi entry".into()));
        }
        if let Some(a) = offdiag.iter().find(|a| **a <= 0.0) {
            return Err(Error::InvalidState(format!("off-diagonal entry {a} is not positive")));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// `b_1..b_N`.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `a_1..a_{N−1}`.
    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            if i + 1 < n {
                m[i][i + 1] = self.offdiag[i];
                m[i + 1][i] = self.offdiag[i];
            }
        }
        m
    }

    /// `tr(L²) = Σ b_j² + 2 Σ a_j²`.
    pub fn trace_of_square(&self) -> f64 {
        self.diag.iter().map(|b| b * b).sum::<f64>() + 2.0 * self.offdiag.iter().map(|a| a * a).sum::<f64>()
    }

    /// Eigenvalues (ascending) and orthonormal eigenvectors (`vectors[j]` is
    /// the eigenvector of `values[j]`), by implicit QL with Wilkinson shifts.
    pub fn eigen(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.size();
        let mut d = self.diag.clone();
        let mut e = self.offdiag.clone();
        e.push(0.0);
        let mut z: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        tql_implicit(&mut d, &mut e, &mut z)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
        let values = order.iter().map(|&j| d[j]).collect();
        let vectors = order.iter().map(|&j| (0..n).map(|i| z[i][j]).collect()).collect();
        Ok((values, vectors))
    }

    /// `⟨(λI − L)^{−1} e_N, e_N⟩` by Gaussian elimination with partial pivoting.
    pub fn resolvent_nn(&self, lambda: Complex64) -> Result<Complex64> {
        let n = self.size();
        let mut d: Vec<Complex64> = self.diag.iter().map(|b| lambda - b).collect();
        let mut du: Vec<Complex64> = self.offdiag.iter().map(|a| Complex64::new(-a, 0.0)).collect();
        let mut dl = du.clone();
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        rhs[n - 1] = Complex64::new(1.0, 0.0);
        let singular = || Error::SingularSystem(lambda);

        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i].norm() == 0.0 {
                    return Err(singular());
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                rhs[i + 1] = rhs[i + 1] - fact * rhs[i];
                dl[i] = Complex64::new(0.0, 0.0);
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    // dl[i] now holds the second superdiagonal fill-in.
                    dl[i] = du[i + 1];
                    du[i + 1] = -fact * dl[i];
                } else {
                    dl[i] = Complex64::new(0.0, 0.0);
                }
                du[i] = temp;
                let t = rhs[i];
                rhs[i] = rhs[i + 1];
                rhs[i + 1] = t - fact * rhs[i + 1];
            }
        }
        if d[n - 1].norm() == 0.0 {
            return Err(singular());
        }
        rhs[n - 1] /= d[n - 1];
        if n > 1 {
            rhs[n - 2] = (rhs[n - 2] - du[n - 2] * rhs[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            rhs[i] = (rhs[i] - du[i] * rhs[i + 1] - dl[i] * rhs[i + 2]) / d[i];
        }
        let v = rhs[n - 1];
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(singular());
        }
        Ok(v)
    }

    /// `1/(λ − b_N − a_{N−1}²/(λ − b_{N−1} − ⋯))`, evaluated from the
    /// innermost level `b_1` outward.
    pub fn continued_fraction_eval(&self, lambda: Complex64) -> Result<Complex64> {
        let n = self.size();
        let mut t = lambda - self.diag[0];
        for j in 1..n {
            if t.norm() == 0.0 {
                return Err(Error::PoleOfConvergent { level: j, at: lambda });
            }
            t = lambda - self.diag[j] - self.offdiag[j - 1] * self.offdiag[j - 1] / t;
        }
        if t.norm() == 0.0 {
            return Err(Error::PoleOfConvergent { level: n, at: lambda });
        }
        Ok(1.0 / t)
    }

    /// Spectral data at `e_N`.
    pub fn spectral_data(&self) -> Result<SpectralData> {
        spectral_data_from_jacobi(self)
    }
}

fn tql_implicit(d: &mut [f64], e: &mut [f64], z: &mut [Vec<f64>]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NotConverged("implicit QL exceeded 60 sweeps"));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues `λ_j` (strictly increasing) and masses `r_j²` summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    eigenvalues: Vec<f64>,
    masses: Vec<f64>,
}

impl SpectralData {
    pub fn new(eigenvalues: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if eigenvalues.len() != masses.len() || eigenvalues.is_empty() {
            return Err(Error::ShapeMismatch("eigenvalues and masses must have equal nonzero length".into()));
        }
        if eigenvalues.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidState("eigenvalues must be strictly increasing".into()));
        }
        if masses.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidState("spectral masses must be positive".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Normalization(total - 1.0));
        }
        Ok(Self { eigenvalues, masses })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(self.eigenvalues.clone(), self.masses.clone(), false)
    }
}

/// Jacobi matrix whose spectral measure at `e_N` is `mu` (mass must be 1).
pub fn jacobi_from_measure(mu: &DiscreteMeasure) -> Result<JacobiMatrix> {
    let n = mu.len();
    if n == 0 {
        return Err(Error::RankDeficient { requested: 1, available: 0 });
    }
    let mass = mu.total_mass();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidMeasure(format!("total mass {mass} is not 1")));
    }
    let rec = mu.recurrence_coefficients(n)?;
    let diag: Vec<f64> = rec.alpha.iter().rev().copied().collect();
    let offdiag: Vec<f64> = rec.beta.iter().rev().map(|b| b.sqrt()).collect();
    JacobiMatrix::new(diag, offdiag)
}

/// Eigenvalues of `L` with masses `r_j²` = squared last eigenvector components.
pub fn spectral_data_from_jacobi(l: &JacobiMatrix) -> Result<SpectralData> {
    let (values, vectors) = l.eigen()?;
    let n = l.size();
    let mut masses: Vec<f64> = vectors.iter().map(|v| v[n - 1] * v[n - 1]).collect();
    if masses.iter().any(|m| *m == 0.0) {
        return Err(Error::InvalidState("vanishing spectral mass; matrix is numerically reduced".into()));
    }
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    SpectralData::new(values, masses)
}

/// Moser's explicit mass evolution `r_j²(t) ∝ r_j²(0) e^{−2λ_j t}`, normalized
/// to unit sum. Exponents are shifted by their maximum before exponentiating.
pub fn moser_masses(lambdas: &[f64], masses: &[f64], t: f64) -> Vec<f64> {
    let logs: Vec<f64> = lambdas.iter().zip(masses).map(|(l, m)| m.ln() - 2.0 * l * t).collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let un: Vec<f64> = logs.iter().map(|v| (v - shift).exp()).collect();
    let total: f64 = un.iter().sum();
    un.into_iter().map(|v| v / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sym() -> DiscreteMeasure {
        DiscreteMeasure::new(vec![-0.5, 0.5], vec![0.5, 0.5], false).unwrap()
    }

    #[test]
    fn construction_rules() {
        assert!(DiscreteMeasure::new(vec![1.0], vec![0.0], false).is_err());
        assert!(DiscreteMeasure::new(vec![1.0, 2.0], vec![1.0], false).is_err());
        assert!(DiscreteMeasure::new(vec![-1.0], vec![1.0], true).is_err());
        let m = DiscreteMeasure::new(vec![2.0, 1.0, 1.0 + 1e-14], vec![1.0, 0.25, 0.25], false).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.atoms()[1], 2.0);
        assert_abs_diff_eq!(m.weights()[0], 0.5);
    }

    #[test]
    fn moment_examples() {
        let m = DiscreteMeasure::new(vec![2.0], vec![1.0], false).unwrap();
        assert_eq!(m.moments(3), vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(sym().moments(2), vec![1.0, 0.0, 0.25]);
        let odd = DiscreteMeasure::new(vec![0.1, 0.7], vec![0.3, 0.9], false).unwrap();
        assert_abs_diff_eq!(odd.moments(0)[0], odd.total_mass(), epsilon = 1e-15);
    }

    #[test]
    fn transform_examples() {
        let m = DiscreteMeasure::new(vec![1.0], vec![1.0], false).unwrap();
        assert_abs_diff_eq!(m.stieltjes_transform(c(3.0, 0.0)).unwrap().re, 0.5);
        let lam = c(0.3, 1.2);
        let expect = lam / (lam * lam - 0.25);
        assert!((sym().stieltjes_transform(lam).unwrap() - expect).norm() < 1e-15);
        let big = c(1e6, 0.0);
        let f = sym().stieltjes_transform(big).unwrap();
        assert!((f.re * 1e6 - 1.0).abs() < 1e-5);
        assert_eq!(m.stieltjes_transform(c(1.0, 0.0)), Err(Error::Pole(c(1.0, 0.0))));
    }

    #[test]
    fn rkpw_matches_lanczos() {
        let mu = DiscreteMeasure::new(vec![-1.2, -0.3, 0.4, 0.9, 2.5], vec![0.1, 0.3, 0.2, 0.15, 0.25], false).unwrap();
        let a = mu.recurrence_coefficients(5).unwrap();
        let b = lanczos(mu.atoms(), mu.weights(), 5).unwrap();
        for (u, v) in a.alpha.iter().zip(&b.alpha).chain(a.beta.iter().zip(&b.beta)) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-13);
        }
    }

    #[test]
    fn tiny_weights_keep_their_atoms() {
        // Lanczos loses the last atom here; the rotation update keeps it.
        let mu = DiscreteMeasure::new(
            vec![0.016, 0.074, 0.185, 1.85],
            vec![0.99997, 2.3e-5, 3.0e-15, 5.3e-160],
            true,
        )
        .unwrap();
        let total = mu.total_mass();
        let mu = DiscreteMeasure::new(mu.atoms().to_vec(), mu.weights().iter().map(|w| w / total).collect(), true).unwrap();
        let l = jacobi_from_measure(&mu).unwrap();
        let (eig, _) = l.eigen().unwrap();
        for (u, v) in eig.iter().zip(mu.atoms()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-14);
        }
        assert!(l.offdiag()[0] < 1e-40);
    }

    #[test]
    fn recurrence_examples() {
        let r = sym().recurrence_coefficients(2).unwrap();
        assert_abs_diff_eq!(r.alpha[0], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(r.alpha[1], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(r.beta[0], 0.25, epsilon = 1e-15);
        let one = DiscreteMeasure::new(vec![1.7], vec![0.4], false).unwrap();
        assert_eq!(one.recurrence_coefficients(1).unwrap().alpha, vec![1.7]);
        assert_eq!(
            sym().recurrence_coefficients(3),
            Err(Error::RankDeficient { requested: 3, available: 2 })
        );
    }

    #[test]
    fn jacobi_from_measure_examples() {
        let l = jacobi_from_measure(&sym()).unwrap();
        assert_abs_diff_eq!(l.diag()[0], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(l.diag()[1], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(l.offdiag()[0], 0.5, epsilon = 1e-15);
        let one = DiscreteMeasure::new(vec![0.3], vec![1.0], false).unwrap();
        let l1 = jacobi_from_measure(&one).unwrap();
        assert_eq!(l1.diag(), &[0.3]);
        let heavy = DiscreteMeasure::new(vec![0.3], vec![2.0], false).unwrap();
        assert!(jacobi_from_measure(&heavy).is_err());
    }

    #[test]
    fn bottom_corner_ordering() {
        // b_N is the mean of the measure.
        let m = DiscreteMeasure::new(vec![0.0, 1.0, 3.0], vec![0.2, 0.3, 0.5], false).unwrap();
        let l = jacobi_from_measure(&m).unwrap();
        assert_abs_diff_eq!(l.diag()[2], 1.8, epsilon = 1e-14);
        let lam = c(0.4, 0.9);
        let f = m.stieltjes_transform(lam).unwrap();
        assert!((l.resolvent_nn(lam).unwrap() - f).norm() < 1e-13);
    }

    #[test]
    fn spectral_data_examples() {
        let l = JacobiMatrix::new(vec![0.0, 0.0], vec![0.5]).unwrap();
        let sd = l.spectral_data().unwrap();
        assert_abs_diff_eq!(sd.eigenvalues()[0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sd.eigenvalues()[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sd.masses()[0], 0.5, epsilon = 1e-15);
        let one = JacobiMatrix::new(vec![2.5], vec![]).unwrap();
        let sd1 = one.spectral_data().unwrap();
        assert_eq!(sd1.eigenvalues(), &[2.5]);
        assert_eq!(sd1.masses(), &[1.0]);
    }

    #[test]
    fn jacobi_validation() {
        assert!(JacobiMatrix::new(vec![0.0, 0.0], vec![0.0]).is_err());
        assert!(JacobiMatrix::new(vec![0.0, 0.0], vec![]).is_err());
        assert!(JacobiMatrix::new(vec![], vec![]).is_err());
        assert!(SpectralData::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(SpectralData::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn resolvent_and_fraction_examples() {
        let one = JacobiMatrix::new(vec![0.7], vec![]).unwrap();
        assert!((one.resolvent_nn(c(1.7, 0.0)).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        let lam = c(2.0, 1.0);
        assert!((one.continued_fraction_eval(lam).unwrap() - 1.0 / (lam - 0.7)).norm() < 1e-15);

        let l = JacobiMatrix::new(vec![0.0, 0.0], vec![0.5]).unwrap();
        assert!((l.resolvent_nn(c(1.0, 0.0)).unwrap() - c(4.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((l.continued_fraction_eval(lam).unwrap() - lam / (lam * lam - 0.25)).norm() < 1e-15);

        assert!(matches!(l.resolvent_nn(c(0.5, 0.0)), Err(Error::SingularSystem(_))));
        assert!(matches!(
            l.continued_fraction_eval(c(0.0, 0.0)),
            Err(Error::PoleOfConvergent { level: 1, .. })
        ));
    }

    #[test]
    fn second_kind_examples() {
        assert_eq!(sym().second_kind_poly(0, 0.3).unwrap(), 0.0);
        let (p1, _) = sym().orthonormal_poly(1, 0.3).unwrap();
        assert_abs_diff_eq!(p1, 0.6, epsilon = 1e-14);
        for tau in [-2.0, -0.5, 0.1, 0.5, 3.0] {
            assert_abs_diff_eq!(sym().second_kind_poly(1, tau).unwrap(), 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn moser_masses_are_normalized_and_overflow_safe() {
        let m = moser_masses(&[-0.5, 0.5], &[0.5, 0.5], 1e3);
        assert_abs_diff_eq!(m.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(m[0] > 0.999);
        let t = 0.8;
        let m = moser_masses(&[-0.5, 0.5], &[0.5, 0.5], t);
        assert_abs_diff_eq!(m[0], 1.0 / (1.0 + (-2.0 * t).exp()), epsilon = 1e-15);
    }

    #[test]
    fn nevanlinna_single_atom_closed_form() {
        let m = DiscreteMeasure::new(vec![1.0], vec![1.0], false).unwrap();
        let ys = [10.0, 100.0, 1000.0];
        let rep = m.nevanlinna_limit_check(1, &ys).unwrap();
        for row in &rep.rows {
            let z = c(0.0, row.y);
            let expect = (1.0 / (c(1.0, 0.0) - z)).norm();
            assert_abs_diff_eq!(row.residual, expect, epsilon = 1e-14);
        }
        assert!(rep.monotone);
        let zero = DiscreteMeasure::empty(false);
        let rep0 = zero.nevanlinna_limit_check(2, &ys).unwrap();
        assert!(rep0.rows.iter().all(|r| r.residual == 0.0));
    }

    #[test]
    fn serde_round_trip_and_validation() {
        let m = sym();
        let js = serde_json::to_string(&m).unwrap();
        assert_eq!(js, r#"{"atoms":[-0.5,0.5],"weights":[0.5,0.5],"half_line":false}"#);
        let back: DiscreteMeasure = serde_json::from_str(&js).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<DiscreteMeasure>(r#"{"atoms":[1],"weights":[-1]}"#).is_err());
    }
}
