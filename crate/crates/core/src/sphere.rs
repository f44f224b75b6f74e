//! Real spherical harmonics on S¹ and S² and quadrature on the sphere.
//!
//! Every basis is orthonormal with respect to the *probability* surface
//! measure, so `Y_{0,1} ≡ 1` and the addition theorem at coincident points
//! reads `Σ_ℓ Y_{k,ℓ}(θ)² = d_k`. This is the normalization under which the
//! Hua–Aronszajn kernel expands as `ζ/(ζ²−|x|²) Σ ζ^{−k} Y_{k,ℓ}(θ) Y_{k,ℓ}(x)`.
//!
//! Index conventions:
//!
//! - S¹: `Y_{0,1} = 1`, `Y_{k,1} = √2 cos kφ`, `Y_{k,2} = √2 sin kφ`.
//! - S²: `ℓ = 1..2k+1` maps to the order `m = ℓ − k − 1`; `m = 0` is the zonal
//!   harmonic `√(2k+1) P_k(cos γ)`, `m > 0` carries `√2 cos mφ` and `m < 0`
//!   carries `√2 sin |m|φ`. No Condon–Shortley phase.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-12;

pub(crate) fn check_dim(n: usize) -> Result<()> {
    match n {
        2 | 3 => Ok(()),
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

/// Dimension `d_k` of the space of degree-`k` spherical harmonics on `S^{n−1}`.
///
/// `d_k = (2k+n−2)(n+k−3)!/((n−2)! k!)`, with `d_0 = 1` in every dimension.
pub fn dim_harmonics(n: usize, k: usize) -> Result<usize> {
    check_dim(n)?;
    if k == 0 {
        return Ok(1);
    }
    // (n+k−3)!/((n−2)! k!) = C(k+n−2, k)/(k+n−2), which avoids factorial overflow.
    let top = k + n - 2;
    let binom = (1..=k).fold(1u128, |acc, i| acc * (top - k + i) as u128 / i as u128);
    Ok(((2 * k + n - 2) as u128 * binom / top as u128) as usize)
}

/// Number of basis functions with degree `≤ k_max`.
pub fn count_upto(n: usize, k_max: usize) -> Result<usize> {
    check_dim(n)?;
    Ok(match n {
        2 => 1 + 2 * k_max,
        _ => (k_max + 1) * (k_max + 1),
    })
}

/// Degree `k` and intra-degree index `ell ∈ 1..=d_k` of a basis harmonic.
///
/// The derived ordering (ascending `k`, then `ell`) is the fixed summation
/// order used by every series in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub k: usize,
    pub ell: usize,
}

impl HarmonicIndex {
    pub fn new(n: usize, k: usize, ell: usize) -> Result<Self> {
        let idx = Self { k, ell };
        idx.validate(n)?;
        Ok(idx)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let d = dim_harmonics(n, self.k)?;
        if self.ell == 0 || self.ell > d {
            return Err(Error::InvalidHarmonicIndex { n, k: self.k, ell: self.ell });
        }
        Ok(())
    }

    /// Position of this index in the flat ascending ordering.
    pub fn flat(&self, n: usize) -> usize {
        match n {
            2 if self.k == 0 => 0,
            2 => 1 + 2 * (self.k - 1) + (self.ell - 1),
            _ => self.k * self.k + self.ell - 1,
        }
    }

    /// All indices with degree `≤ k_max`, in ascending order.
    pub fn all_upto(n: usize, k_max: usize) -> Result<Vec<Self>> {
        check_dim(n)?;
        let mut out = Vec::with_capacity(count_upto(n, k_max)?);
        for k in 0..=k_max {
            for ell in 1..=dim_harmonics(n, k)? {
                out.push(Self { k, ell });
            }
        }
        Ok(out)
    }
}

/// Unit vector on `S^{n−1}` for `n ∈ {2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereDirection {
    n: usize,
    coords: [f64; 3],
}

impl SphereDirection {
    /// Wrap an already-normalized vector; the norm must be 1 within `1e−12`.
    pub fn new(coords: &[f64]) -> Result<Self> {
        let n = coords.len();
        check_dim(n)?;
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDirection("non-finite coordinate".into()));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDirection(format!("norm {norm} differs from 1")));
        }
        let mut c = [0.0; 3];
        c[..n].copy_from_slice(coords);
        Ok(Self { n, coords: c })
    }

    /// Normalize an arbitrary nonzero vector.
    pub fn normalized(v: &[f64]) -> Result<Self> {
        check_dim(v.len())?;
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidDirection("cannot normalize a zero vector".into()));
        }
        let scaled: Vec<f64> = v.iter().map(|c| c / norm).collect();
        let mut c = [0.0; 3];
        c[..v.len()].copy_from_slice(&scaled);
        Ok(Self { n: v.len(), coords: c })
    }

    /// Point `(cos φ, sin φ)` on S¹.
    pub fn from_angle(phi: f64) -> Self {
        Self { n: 2, coords: [phi.cos(), phi.sin(), 0.0] }
    }

    /// Point on S² with polar angle `gamma` (from the third axis) and azimuth `phi`.
    pub fn from_polar(gamma: f64, phi: f64) -> Self {
        let s = gamma.sin();
        Self { n: 3, coords: [s * phi.cos(), s * phi.sin(), gamma.cos()] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.n]
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coords().iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn neg(&self) -> Self {
        let mut c = self.coords;
        // `0 − v` rather than `−v` so that no negative zeros appear.
        c.iter_mut().for_each(|v| *v = 0.0 - *v);
        Self { n: self.n, coords: c }
    }
}

/// Values of every basis harmonic of degree `≤ k_max` at one point, stored
/// in the flat ascending ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicTable {
    n: usize,
    k_max: usize,
    values: Vec<f64>,
}

impl HarmonicTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value for `idx`; `None` if the degree exceeds the table.
    pub fn get(&self, idx: HarmonicIndex) -> Option<f64> {
        (idx.k <= self.k_max).then(|| self.values[idx.flat(self.n)])
    }

    /// Slice of the `d_k` values of degree `k`.
    pub fn degree(&self, k: usize) -> &[f64] {
        let start = HarmonicIndex { k, ell: 1 }.flat(self.n);
        let len = dim_harmonics(self.n, k).expect("dimension checked at construction");
        &self.values[start..start + len]
    }
}

/// Evaluate every basis harmonic of degree `≤ k_max` at `theta`.
pub fn harmonics_upto(theta: &SphereDirection, k_max: usize) -> HarmonicTable {
    let values = match theta.n {
        2 => circle_harmonics(theta.coords[0], theta.coords[1], k_max),
        _ => sphere_harmonics(theta.coords(), k_max),
    };
    HarmonicTable { n: theta.n, k_max, values }
}

fn circle_harmonics(c: f64, s: f64, k_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(1 + 2 * k_max);
    out.push(1.0);
    // cos kφ, sin kφ by repeated complex multiplication keeps the table exact
    // in the polynomial sense.
    let (mut ck, mut sk) = (1.0_f64, 0.0_f64);
    for _ in 1..=k_max {
        let next_c = ck * c - sk * s;
        let next_s = sk * c + ck * s;
        ck = next_c;
        sk = next_s;
        out.push(std::f64::consts::SQRT_2 * ck);
        out.push(std::f64::consts::SQRT_2 * sk);
    }
    out
}

/// Associated Legendre values `p̄_k^m = √((2k+1)(k−m)!/(k+m)!) P_k^m(z)`
/// without phase, stored as `p[k][m]`. The zonal column is `√(2k+1) P_k`.
fn normalized_legendre(z: f64, s: f64, k_max: usize) -> Vec<Vec<f64>> {
    let mut p: Vec<Vec<f64>> = (0..=k_max).map(|k| vec![0.0; k + 1]).collect();
    p[0][0] = 1.0;
    for m in 1..=k_max {
        let mf = m as f64;
        p[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..k_max {
        p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * z * p[m][m];
    }
    for m in 0..=k_max {
        for k in (m + 2)..=k_max {
            let (kf, mf) = (k as f64, m as f64);
            let a = ((2.0 * kf - 1.0) * (2.0 * kf + 1.0) / ((kf - mf) * (kf + mf))).sqrt();
            let b = ((2.0 * kf + 1.0) * (kf + mf - 1.0) * (kf - mf - 1.0)
                / ((kf - mf) * (kf + mf) * (2.0 * kf - 3.0)))
                .sqrt();
            p[k][m] = a * z * p[k - 1][m] - b * p[k - 2][m];
        }
    }
    p
}

fn sphere_harmonics(theta: &[f64], k_max: usize) -> Vec<f64> {
    let z = theta[2];
    let s = theta[0].hypot(theta[1]);
    let (cphi, sphi) = if s > 0.0 { (theta[0] / s, theta[1] / s) } else { (1.0, 0.0) };
    let p = normalized_legendre(z, s, k_max);

    let mut cos_m = vec![1.0; k_max + 1];
    let mut sin_m = vec![0.0; k_max + 1];
    for m in 1..=k_max {
        cos_m[m] = cos_m[m - 1] * cphi - sin_m[m - 1] * sphi;
        sin_m[m] = sin_m[m - 1] * cphi + cos_m[m - 1] * sphi;
    }

    let sqrt2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity((k_max + 1) * (k_max + 1));
    for k in 0..=k_max {
        for ell in 1..=(2 * k + 1) {
            let m = ell as i64 - k as i64 - 1;
            let am = m.unsigned_abs() as usize;
            let v = match m.signum() {
                0 => p[k][0],
                1 => sqrt2 * p[k][am] * cos_m[am],
                _ => sqrt2 * p[k][am] * sin_m[am],
            };
            out.push(v);
        }
    }
    out
}

/// Value of the orthonormal basis harmonic `Y_{k,ℓ}` at `theta`.
pub fn eval_harmonic(n: usize, idx: HarmonicIndex, theta: &SphereDirection) -> Result<f64> {
    idx.validate(n)?;
    if theta.n != n {
        return Err(Error::InvalidDirection(format!(
            "direction lives on S^{} but n = {n}",
            theta.n - 1
        )));
    }
    Ok(harmonics_upto(theta, idx.k).values[idx.flat(n)])
}

/// Solid harmonics `Y_{k,ℓ}(x) = |x|^k Y_{k,ℓ}(x/|x|)` for all degrees `≤ k_max`.
pub fn solid_harmonics_upto(n: usize, x: &[f64], k_max: usize) -> Result<HarmonicTable> {
    check_dim(n)?;
    if x.len() != n {
        return Err(Error::ShapeMismatch(format!("point has {} coordinates, n = {n}", x.len())));
    }
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r == 0.0 {
        let mut values = vec![0.0; count_upto(n, k_max)?];
        values[0] = 1.0;
        return Ok(HarmonicTable { n, k_max, values });
    }
    let mut table = harmonics_upto(&SphereDirection::normalized(x)?, k_max);
    let mut rk = 1.0;
    for k in 0..=k_max {
        let start = HarmonicIndex { k, ell: 1 }.flat(n);
        let len = dim_harmonics(n, k)?;
        table.values[start..start + len].iter_mut().for_each(|v| *v *= rk);
        rk *= r;
    }
    Ok(table)
}

pub fn solid_harmonic(n: usize, idx: HarmonicIndex, x: &[f64]) -> Result<f64> {
    idx.validate(n)?;
    Ok(solid_harmonics_upto(n, x, idx.k)?.values[idx.flat(n)])
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` (weights sum to 2).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[m - 1 - i] = -x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on `S^{n−1}` for the probability measure, exact for
/// spherical polynomials up to `degree`.
///
/// S¹ uses the `degree+1`-point trapezoid rule; S² uses Gauss–Legendre in
/// `cos γ` (`⌊degree/2⌋+1` nodes) times a `degree+1`-point azimuthal trapezoid.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    n: usize,
    degree: usize,
    nodes: Vec<SphereDirection>,
    weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(n: usize, degree: usize) -> Result<Self> {
        check_dim(n)?;
        let azimuth = degree + 1;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let two_pi = 2.0 * std::f64::consts::PI;
        match n {
            2 => {
                for i in 0..azimuth {
                    nodes.push(SphereDirection::from_angle(two_pi * i as f64 / azimuth as f64));
                    weights.push(1.0 / azimuth as f64);
                }
            }
            _ => {
                let (zs, ws) = gauss_legendre(degree / 2 + 1);
                for (z, w) in zs.iter().zip(&ws) {
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    for i in 0..azimuth {
                        let phi = two_pi * i as f64 / azimuth as f64;
                        nodes.push(SphereDirection { n: 3, coords: [s * phi.cos(), s * phi.sin(), *z] });
                        weights.push(0.5 * w / azimuth as f64);
                    }
                }
            }
        }
        Ok(Self { n, degree, nodes, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[SphereDirection] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(&SphereDirection) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(t, w)| w * f(t)).sum()
    }
}

/// `∫_{S^{n−1}} f dθ` under the probability measure, exact up to `degree`.
pub fn quadrature_sphere<F: FnMut(&SphereDirection) -> f64>(n: usize, f: F, degree: usize) -> Result<f64> {
    Ok(SphereQuadrature::new(n, degree)?.integrate(f))
}
