//! The `verify-all` invariant suite over the bundled fixtures.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use toda_kdq::iso_flow::{monotonicity_check, IsoFlowState};
use toda_kdq::kdq::{
    hua_kernel, hua_kernel_closed, multi_nevanlinna_check, nevanlinna_ray, AlmansiPolynomial, CauchyIntegrator,
    CauchyQuadrature, KdqPoint, PseudoPositiveMeasure,
};
use toda_kdq::moment::{jacobi_from_measure, spectral_data_from_jacobi};
use toda_kdq::pseudo_toda::{
    component_ode_residual, evolve, normalization_invariant, total_hamiltonian, PseudoTodaState,
};
use toda_kdq::sphere::{dim_harmonics, HarmonicIndex, SphereDirection};
use toda_kdq::toda::{asymptotics_check, hamiltonian_ab, integrate_toda, lax_matrices, spectral_solve};

use crate::commands::ISO_DERIVATIVE_TOL;
use crate::formats::{check_schema, parse, write_output, NevanlinnaFile, StateFile};
use crate::{NumericFailure, Options};

const TODA_N2: &str = include_str!("../fixtures/toda_n2_symmetric.json");
const TODA_N5: &str = include_str!("../fixtures/toda_n5.json");
const PSEUDO_N3: &str = include_str!("../fixtures/pseudo_n3.json");
const NEVANLINNA_1D: &str = include_str!("../fixtures/nevanlinna_1d.json");
const NEVANLINNA_KDQ: &str = include_str!("../fixtures/nevanlinna_kdq.json");
const ISO_FLOW: &str = include_str!("../fixtures/iso_flow.json");

struct Row {
    name: &'static str,
    observed: f64,
    bound: f64,
    pass: bool,
    note: String,
}

impl Row {
    /// `observed ≤ bound`.
    fn le(name: &'static str, observed: f64, bound: f64) -> Self {
        Row { name, observed, bound, pass: observed <= bound, note: String::new() }
    }
}

#[derive(Clone, Copy)]
struct Params {
    scale: f64,
    t_final: f64,
    dt: f64,
    k_max: usize,
    quad_degree: Option<usize>,
}

type Check = fn(&Params) -> anyhow::Result<Vec<Row>>;

fn state(text: &str) -> anyhow::Result<toda_kdq::toda::TodaStateFlaschka> {
    let f: StateFile = parse(text, "bundled 1D state")?;
    check_schema(f.schema)?;
    Ok(f.state)
}

fn eigenvalues(s: &toda_kdq::toda::TodaStateFlaschka) -> anyhow::Result<Vec<f64>> {
    Ok(lax_matrices(s)?.0.eigen()?.0)
}

fn toda_rk4(p: &Params) -> anyhow::Result<Vec<Row>> {
    let s0 = state(TODA_N5)?;
    let traj = integrate_toda(&s0, p.t_final, p.dt)?;
    let eig0 = eigenvalues(&s0)?;
    let h0 = hamiltonian_ab(&s0);
    let (mut eig_drift, mut trace_gap, mut energy, mut method): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for (i, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        let (l, _) = lax_matrices(s)?;
        let eig = l.eigen()?.0;
        eig_drift = eig.iter().zip(&eig0).map(|(u, v)| (u - v).abs()).fold(eig_drift, f64::max);
        let h = hamiltonian_ab(s);
        trace_gap = trace_gap.max((l.trace_of_square() - 0.5 * h).abs());
        energy = energy.max((h - h0).abs());
        if i % 100 == 0 || i + 1 == traj.times.len() {
            let exact = spectral_solve(&s0, *t)?;
            method = exact.a().iter().zip(s.a()).chain(exact.b().iter().zip(s.b())).map(|(u, v)| (u - v).abs()).fold(method, f64::max);
        }
    }
    Ok(vec![
        Row::le("isospectrality", eig_drift, 1e-8 * p.scale),
        Row::le("spectral_vs_rk4", method, 1e-6 * p.scale),
        Row::le("trace_identity", trace_gap, 1e-12 * p.scale),
        Row::le("energy_conservation", energy, 1e-8 * p.scale),
    ])
}

fn toda_closed_form(p: &Params) -> anyhow::Result<Vec<Row>> {
    let s0 = state(TODA_N2)?;
    let traj = integrate_toda(&s0, p.t_final, p.dt)?;
    let err = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| {
            let th = 0.5 * t.tanh();
            (s.a()[0] - 0.5 / t.cosh()).abs().max((s.b()[0] - th).abs()).max((s.b()[1] + th).abs())
        })
        .fold(0.0, f64::max);
    Ok(vec![Row::le("closed_form_n2", err, 1e-6 * p.scale)])
}

fn toda_scattering(_: &Params) -> anyhow::Result<Vec<Row>> {
    let rep = asymptotics_check(&state(TODA_N5)?, 40.0)?;
    let observed = [rep.max_a_forward, rep.max_a_backward, rep.b_error_forward, rep.b_error_backward]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(vec![Row { name: "scattering_limits", observed, bound: rep.tolerance, pass: rep.pass, note: String::new() }])
}

fn triple_agreement(p: &Params) -> anyhow::Result<Vec<Row>> {
    let (l, _) = lax_matrices(&state(TODA_N5)?)?;
    let mu = l.spectral_data()?.to_measure()?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let z = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.05..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let cf = l.continued_fraction_eval(z)?;
        let res = l.resolvent_nn(z)?;
        let eig = mu.stieltjes_transform(z)?;
        let scale = cf.norm().max(res.norm()).max(eig.norm());
        worst = worst.max((cf - res).norm() / scale).max((cf - eig).norm() / scale).max((res - eig).norm() / scale);
    }
    Ok(vec![Row::le("cf_resolvent_eigen", worst, 1e-11 * p.scale)])
}

fn inverse_round_trip(p: &Params) -> anyhow::Result<Vec<Row>> {
    let NevanlinnaFile::OneDim { measure, .. } = parse(NEVANLINNA_1D, "bundled 1D measure")? else {
        anyhow::bail!("bundled 1D measure has the wrong shape");
    };
    let total = measure.total_mass();
    let mu = toda_kdq::moment::DiscreteMeasure::new(
        measure.atoms().to_vec(),
        measure.weights().iter().map(|w| w / total).collect(),
        false,
    )?;
    let back = spectral_data_from_jacobi(&jacobi_from_measure(&mu)?)?;
    let err = back
        .eigenvalues()
        .iter()
        .zip(mu.atoms())
        .chain(back.masses().iter().zip(mu.weights()))
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    Ok(vec![Row::le("inverse_spectral_round_trip", err, 1e-10 * p.scale)])
}

fn nevanlinna_1d(_: &Params) -> anyhow::Result<Vec<Row>> {
    let NevanlinnaFile::OneDim { schema, measure, y, .. } = parse(NEVANLINNA_1D, "bundled 1D measure")? else {
        anyhow::bail!("bundled 1D measure has the wrong shape");
    };
    check_schema(schema)?;
    let mut rows = Vec::new();
    for (name, order) in [("nevanlinna_1d_order1", 1), ("nevanlinna_1d_order2", 2)] {
        let rep = measure.nevanlinna_limit_check(order, &y)?;
        let first = rep.rows.first().map_or(0.0, |r| r.residual);
        let last = rep.rows.last().map_or(0.0, |r| r.residual);
        let ratio = if first > 0.0 { last / first } else { 0.0 };
        rows.push(Row { name, observed: ratio, bound: 1.0, pass: rep.monotone, note: "monotone decrease; last/first".into() });
    }
    Ok(rows)
}

fn kernel_series(p: &Params) -> anyhow::Result<Vec<Row>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for i in 0..40 {
        let n = 2 + i % 2;
        let theta = random_direction(&mut rng, n);
        let dir = random_direction(&mut rng, n);
        let s = rng.gen_range(0.0..1.0);
        let x: Vec<f64> = dir.coords().iter().map(|c| c * s).collect();
        let zeta = Complex64::from_polar(2.0 * s.max(0.05) * rng.gen_range(1.0..3.0), rng.gen_range(-3.1..3.1));
        let pt = KdqPoint::new(zeta, theta)?;
        let closed = hua_kernel_closed(&pt, &x)?;
        let series = hua_kernel(&pt, &x, p.k_max)?;
        worst = worst.max((series.value - closed).norm() / (1.0 + closed.norm()));
    }
    // Aligned case in n = 2: x = sθ gives ζ/(ζ − s)².
    let theta = SphereDirection::from_angle(0.7);
    let s = 0.4;
    let x: Vec<f64> = theta.coords().iter().map(|c| c * s).collect();
    let pt = KdqPoint::new(Complex64::new(1.3, 0.8), theta)?;
    let z = pt.zeta();
    let aligned = (hua_kernel_closed(&pt, &x)? - z / ((z - s) * (z - s))).norm();
    Ok(vec![Row::le("kernel_series_vs_closed", worst, 1e-10 * p.scale), Row::le("kernel_aligned_n2", aligned, 1e-14 * p.scale)])
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> SphereDirection {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok(d) = SphereDirection::normalized(&v) {
            return d;
        }
    }
}

fn cauchy(p: &Params) -> anyhow::Result<Vec<Row>> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for n in [2, 3] {
        let mut integ = CauchyIntegrator::new(n, CauchyQuadrature::default())?;
        for _ in 0..2 {
            let dir = random_direction(&mut rng, n);
            let r = rng.gen_range(0.0..0.5);
            let x: Vec<f64> = dir.coords().iter().map(|c| c * r).collect();
            let prepared = integ.prepare(&x)?;
            for k in 0..=4 {
                for ell in 1..=dim_harmonics(n, k)? {
                    for j in 0..=3 {
                        let poly = AlmansiPolynomial::monomial(n, j, HarmonicIndex { k, ell })?;
                        worst = worst.max((integ.reproduce(&prepared, &poly)? - poly.eval(&x)?).norm());
                    }
                }
            }
        }
    }
    Ok(vec![Row::le("cauchy_reproduction", worst, 1e-8 * p.scale)])
}

fn pseudo_toda(p: &Params) -> anyhow::Result<Vec<Row>> {
    let s0: PseudoTodaState = parse(PSEUDO_N3, "bundled pseudo-Toda state")?;
    let exact: f64 = s0.components().values().map(|c| 2.0 * c.lambdas().iter().map(|l| l.powi(4)).sum::<f64>()).sum();
    let (mut norm, mut h_gap, mut ode): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for t in [0.0, 1.0, 10.0, 100.0] {
        let s = evolve(&s0, t);
        norm = norm.max(normalization_invariant(&s));
        h_gap = h_gap.max((total_hamiltonian(&s) - exact).abs());
        for &idx in s0.components().keys() {
            ode = ode.max(component_ode_residual(&s0, idx, t, 1e-4)?);
        }
    }
    Ok(vec![
        Row::le("pseudo_normalization", norm, 1e-12 * p.scale),
        Row::le("pseudo_total_hamiltonian", h_gap, 0.0),
        Row::le("pseudo_ode_residual", ode, 1e-6 * p.scale),
    ])
}

fn multi_nevanlinna(p: &Params) -> anyhow::Result<Vec<Row>> {
    let NevanlinnaFile::Kdq { schema, kdq_measure, k, ell, order, moduli } = parse(NEVANLINNA_KDQ, "bundled KDQ measure")?
    else {
        anyhow::bail!("bundled KDQ measure has the wrong shape");
    };
    check_schema(schema)?;
    let mu: PseudoPositiveMeasure = kdq_measure;
    let degree = p.quad_degree.unwrap_or(mu.k_max() + k);
    let rep = multi_nevanlinna_check(&mu, HarmonicIndex { k, ell }, order, &nevanlinna_ray(&moduli), degree)?;
    let rate = rep.rows.windows(2).map(|w| (w[0].residual / w[1].residual - 4.0).abs()).fold(0.0, f64::max);
    let last = rep.rows.last().map_or(0.0, |r| r.residual);
    Ok(vec![
        Row::le("multi_nevanlinna_rate", rate, 0.5),
        Row::le("multi_nevanlinna_final", last, 1e-4 * p.scale),
    ])
}

fn iso_flow(p: &Params) -> anyhow::Result<Vec<Row>> {
    let mu: PseudoPositiveMeasure = parse(ISO_FLOW, "bundled iso-flow measure")?;
    let state = IsoFlowState::from_measure(&mu)?;
    let grid: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
    let rep = monotonicity_check(&state, &grid)?;
    Ok(vec![
        Row { name: "iso_flow_monotone", observed: 0.0, bound: 0.0, pass: rep.monotone, note: "S non-increasing".into() },
        Row::le("iso_flow_derivative", rep.max_derivative_error, ISO_DERIVATIVE_TOL * p.scale),
    ])
}

const CHECKS: &[(&str, Check)] = &[
    ("toda_rk4", toda_rk4),
    ("closed_form_n2", toda_closed_form),
    ("scattering_limits", toda_scattering),
    ("cf_resolvent_eigen", triple_agreement),
    ("inverse_spectral_round_trip", inverse_round_trip),
    ("nevanlinna_1d", nevanlinna_1d),
    ("kernel", kernel_series),
    ("cauchy_reproduction", cauchy),
    ("pseudo_toda", pseudo_toda),
    ("multi_nevanlinna", multi_nevanlinna),
    ("iso_flow", iso_flow),
];

fn render(rows: &[Row]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<30} {:>12} {:>12}  {:<6} note", "check", "observed", "bound", "status");
    for r in rows {
        let status = if r.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{:<30} {:>12.3e} {:>12.3e}  {:<6} {}", r.name, r.observed, r.bound, status, r.note);
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    let _ = writeln!(out, "{passed}/{} checks passed", rows.len());
    out
}

pub fn verify_all(opts: &Options) -> anyhow::Result<()> {
    let params = Params {
        scale: opts.tol.unwrap_or(1.0),
        t_final: opts.t_final.unwrap_or(5.0),
        dt: opts.dt.unwrap_or(1e-3),
        k_max: opts.kmax.map_or(40, |k| k as usize),
        quad_degree: opts.quad_degree.map(|d| d as usize),
    };
    // Checks run in parallel; results are collected in the fixed order above.
    let rows: Vec<Row> = CHECKS
        .par_iter()
        .map(|(name, check)| {
            check(&params).unwrap_or_else(|e| {
                vec![Row { name, observed: f64::NAN, bound: f64::NAN, pass: false, note: format!("error: {e:#}") }]
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    write_output(opts.output.as_deref(), &render(&rows))?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(NumericFailure(format!("{failed} check(s) failed")).into());
    }
    Ok(())
}
