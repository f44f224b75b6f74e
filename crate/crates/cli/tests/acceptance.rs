//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toda_kdq::iso_flow::{functional_derivative, monotonicity_check, IsoComponent, IsoFlowState};
use toda_kdq::kdq::{
    hua_kernel, hua_kernel_closed, multi_nevanlinna_check, nevanlinna_ray, AlmansiPolynomial, CauchyIntegrator,
    CauchyQuadrature, KdqPoint, PseudoPositiveMeasure,
};
use toda_kdq::moment::{jacobi_from_measure, spectral_data_from_jacobi, DiscreteMeasure, JacobiMatrix};
use toda_kdq::pseudo_toda::{
    component_ode_residual, evolve, normalization_invariant, total_hamiltonian, PseudoComponent, PseudoTodaState,
};
use toda_kdq::sphere::{dim_harmonics, eval_harmonic, HarmonicIndex, SphereDirection};
use toda_kdq::toda::{hamiltonian_ab, integrate_toda, lax_matrices, spectral_solve, TodaStateFlaschka, Trajectory};

type Outcome = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_flaschka(rng: &mut ChaCha8Rng, n: usize) -> TodaStateFlaschka {
    let a = (0..n - 1).map(|_| rng.gen_range(0.1..1.0)).collect();
    let b = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    TodaStateFlaschka::new(a, b).unwrap()
}

/// The shared ensemble of criteria 1 to 3: 20 states, N ∈ {2, …, 8}.
fn ensemble() -> Vec<(TodaStateFlaschka, Trajectory)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..20)
        .map(|i| {
            let s0 = random_flaschka(&mut rng, 2 + i % 7);
            let traj = integrate_toda(&s0, 5.0, 1e-3).unwrap();
            (s0, traj)
        })
        .collect()
}

fn eigenvalues(s: &TodaStateFlaschka) -> Vec<f64> {
    lax_matrices(s).unwrap().0.eigen().unwrap().0
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut drift: f64 = 0.0;
    for (s0, traj) in ensemble() {
        let eig0 = eigenvalues(&s0);
        for s in &traj.states {
            drift = eigenvalues(s).iter().zip(&eig0).map(|(u, v)| (u - v).abs()).fold(drift, f64::max);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(drift <= 1e-8 && secs < 10.0, format!("max eigenvalue drift {drift:.3e} (≤ 1e-8), {secs:.2} s (< 10 s)"))
}

fn criterion_2() -> Outcome {
    let mut gap: f64 = 0.0;
    for (s0, traj) in ensemble() {
        for (t, s) in traj.times.iter().zip(&traj.states).step_by(10) {
            let exact = spectral_solve(&s0, *t).unwrap();
            gap = exact.a().iter().zip(s.a()).chain(exact.b().iter().zip(s.b())).map(|(u, v)| (u - v).abs()).fold(gap, f64::max);
        }
    }
    let sym = TodaStateFlaschka::new(vec![0.5], vec![0.0, 0.0]).unwrap();
    let traj = integrate_toda(&sym, 5.0, 1e-3).unwrap();
    let mut closed: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let (a1, b1) = (0.5 / t.cosh(), 0.5 * t.tanh());
        closed = closed.max((s.a()[0] - a1).abs()).max((s.b()[0] - b1).abs()).max((s.b()[1] + b1).abs());
        let ex = spectral_solve(&sym, *t).unwrap();
        closed = closed.max((ex.a()[0] - a1).abs()).max((ex.b()[0] - b1).abs()).max((ex.b()[1] + b1).abs());
    }
    verdict(
        gap <= 1e-6 && closed <= 1e-6,
        format!("spectral vs RK4 {gap:.3e} (≤ 1e-6), N=2 closed form {closed:.3e} (≤ 1e-6)"),
    )
}

fn criterion_3() -> Outcome {
    let (mut trace, mut energy): (f64, f64) = (0.0, 0.0);
    for (s0, traj) in ensemble() {
        let h0 = hamiltonian_ab(&s0);
        for s in &traj.states {
            let h = hamiltonian_ab(s);
            // tr L² summed directly from the dense matrix.
            let dense = lax_matrices(s).unwrap().0.to_dense();
            let tr2: f64 = dense.iter().flat_map(|row| row.iter().map(|v| v * v)).sum();
            trace = trace.max((tr2 - 0.5 * h).abs());
            energy = energy.max((h - h0).abs());
        }
    }
    verdict(
        trace <= 1e-12 && energy <= 1e-8,
        format!("|tr L² − H/2| {trace:.3e} (≤ 1e-12), energy drift {energy:.3e} (≤ 1e-8)"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let off: Vec<f64> = (1..n).map(|_| rng.gen_range(0.1..1.5)).collect();
        let l = JacobiMatrix::new(diag, off).unwrap();
        let z = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.01..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let cf = l.continued_fraction_eval(z).unwrap();
        let res = l.resolvent_nn(z).unwrap();
        let (vals, vecs) = l.eigen().unwrap();
        let eig: Complex64 = vals.iter().zip(&vecs).map(|(e, v)| v[n - 1] * v[n - 1] / (z - e)).sum();
        let scale = cf.norm().max(res.norm()).max(eig.norm());
        worst = worst.max(((cf - res).norm()).max((cf - eig).norm()).max((res - eig).norm()) / scale);
    }
    verdict(worst <= 1e-11, format!("max relative disagreement {worst:.3e} (≤ 1e-11)"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for n in 1..=10 {
        for _ in 0..5 {
            let mut atoms: Vec<f64> = Vec::new();
            while atoms.len() < n {
                let a = rng.gen_range(-3.0..3.0);
                if atoms.iter().all(|b: &f64| (a - b).abs() > 0.05) {
                    atoms.push(a);
                }
            }
            atoms.sort_by(f64::total_cmp);
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let mu = DiscreteMeasure::new(atoms.clone(), weights.clone(), false).unwrap();
            let back = spectral_data_from_jacobi(&jacobi_from_measure(&mu).unwrap()).unwrap();
            worst = back
                .eigenvalues()
                .iter()
                .zip(&atoms)
                .chain(back.masses().iter().zip(&weights))
                .map(|(u, v)| (u - v).abs())
                .fold(worst, f64::max);
        }
    }
    verdict(worst <= 1e-10, format!("max round-trip error {worst:.3e} (≤ 1e-10)"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let y = [10.0, 100.0, 1000.0];
    let (mut monotone, mut worst_ratio, mut oracle_gap) = (true, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let atoms: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let weights: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..1.0)).collect();
        let mu = DiscreteMeasure::new(atoms, weights, false).unwrap();
        for order in [1, 2] {
            let rep = mu.nevanlinna_limit_check(order, &y).unwrap();
            monotone &= rep.rows.windows(2).all(|w| w[1].residual < w[0].residual);
            worst_ratio = worst_ratio.max(rep.rows[2].residual / rep.rows[0].residual);
            // The geometric tail sums exactly to |Σ w u^{2N+1}/(u − z)|.
            for row in &rep.rows {
                let z = Complex64::new(0.0, row.y);
                let exact: Complex64 = mu
                    .atoms()
                    .iter()
                    .zip(mu.weights())
                    .map(|(u, w)| w * u.powi(2 * order as i32 + 1) / (u - z))
                    .sum();
                oracle_gap = oracle_gap.max((row.residual - exact.norm()).abs() / exact.norm());
            }
        }
    }
    verdict(
        monotone && worst_ratio <= 1e-3,
        format!(
            "monotone {monotone}, worst residual(1000)/residual(10) {worst_ratio:.3e} (≤ 1e-3); \
             residuals match the exact tail within {oracle_gap:.1e} relative"
        ),
    )
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> SphereDirection {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok(d) = SphereDirection::normalized(&v) {
            return d;
        }
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = 2 + i % 2;
        let dir = random_direction(&mut rng, n);
        let s = rng.gen_range(0.0..1.5);
        let x: Vec<f64> = dir.coords().iter().map(|c| c * s).collect();
        let zeta = Complex64::from_polar(2.0 * s.max(0.01) * rng.gen_range(1.0..4.0), rng.gen_range(-3.1..3.1));
        let p = KdqPoint::new(zeta, random_direction(&mut rng, n)).unwrap();
        let closed = hua_kernel_closed(&p, &x).unwrap();
        let series = hua_kernel(&p, &x, 40).unwrap();
        worst = worst.max((series.value - closed).norm() / closed.norm().max(1.0));
    }
    // Aligned: x = sθ gives ζ^{n−1}/(ζ − s)^n.
    let mut aligned: f64 = 0.0;
    for n in [2, 3] {
        for _ in 0..20 {
            let theta = random_direction(&mut rng, n);
            let s = rng.gen_range(0.0..1.0);
            let p = KdqPoint::new(Complex64::from_polar(rng.gen_range(1.1..4.0), rng.gen_range(-3.1..3.1)), theta).unwrap();
            // Aligned with the canonical representative's θ.
            let x: Vec<f64> = p.theta().coords().iter().map(|c| c * s).collect();
            let z = p.zeta();
            let want = z.powi(n as i32 - 1) / (z - s).powi(n as i32);
            aligned = aligned.max((hua_kernel_closed(&p, &x).unwrap() - want).norm() / want.norm());
        }
    }
    verdict(
        worst <= 1e-10 && aligned <= 1e-14,
        format!("series vs closed {worst:.3e} (≤ 1e-10), aligned closed form {aligned:.3e} (≤ 1e-14 relative)"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in [2, 3] {
        let mut integ = CauchyIntegrator::new(n, CauchyQuadrature::default()).unwrap();
        for trial in 0..4 {
            let dir = random_direction(&mut rng, n);
            let r = if trial == 0 { 0.5 } else { rng.gen_range(0.0..0.5) };
            let x: Vec<f64> = dir.coords().iter().map(|c| c * r).collect();
            let prepared = integ.prepare(&x).unwrap();
            for k in 0..=4 {
                for ell in 1..=dim_harmonics(n, k).unwrap() {
                    let idx = HarmonicIndex { k, ell };
                    let y = eval_harmonic(n, idx, &dir).unwrap();
                    for j in 0..=3 {
                        let poly = AlmansiPolynomial::monomial(n, j, idx).unwrap();
                        let want = r.powi((2 * j + k) as i32) * y;
                        worst = worst.max((integ.reproduce(&prepared, &poly).unwrap() - want).norm());
                        count += 1;
                    }
                }
            }
        }
    }
    verdict(worst <= 1e-8, format!("{count} reproductions, max error {worst:.3e} (≤ 1e-8)"))
}

fn pseudo_component(rng: &mut ChaCha8Rng) -> PseudoComponent {
    let mut lambdas: Vec<f64> = Vec::new();
    while lambdas.len() < 4 {
        let l = rng.gen_range(0.05..1.5);
        if lambdas.iter().all(|m| (m - l).abs() > 0.05) {
            lambdas.push(l);
        }
    }
    let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
    masses[0] += 1.0 - masses.iter().sum::<f64>();
    PseudoComponent::new(lambdas, masses).unwrap()
}

fn criterion_9() -> Outcome {
    // n = 3 has only 1 + 3 + 5 = 9 harmonics of degree ≤ 2; the remaining
    // three components of the 12 use degree 3.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut comps = Vec::new();
    for k in 0..=3 {
        for ell in 1..=dim_harmonics(3, k).unwrap().min(if k == 3 { 3 } else { usize::MAX }) {
            comps.push((HarmonicIndex { k, ell }, pseudo_component(&mut rng)));
        }
    }
    let s0 = PseudoTodaState::new(3, comps, 0.0).unwrap();
    let exact: f64 = s0.components().values().map(|c| 2.0 * c.lambdas().iter().map(|l| l.powi(4)).sum::<f64>()).sum();
    let (mut norm, mut h_ok, mut ode): (f64, bool, f64) = (0.0, true, 0.0);
    for t in [0.0, 1.0, 10.0, 100.0] {
        let s = evolve(&s0, t);
        norm = norm.max(normalization_invariant(&s));
        h_ok &= total_hamiltonian(&s) == exact;
        for &idx in s0.components().keys() {
            ode = ode.max(component_ode_residual(&s0, idx, t, 1e-4).unwrap());
        }
    }
    verdict(
        s0.components().len() == 12 && norm <= 1e-12 && h_ok && ode <= 1e-6,
        format!(
            "{} components, Σr̃² deviation {norm:.3e} (≤ 1e-12), H exact {h_ok}, ODE residual {ode:.3e} (≤ 1e-6)",
            s0.components().len()
        ),
    )
}

fn criterion_10() -> Outcome {
    let fixtures = [(2, 0, 1), (2, 1, 1), (2, 2, 2), (3, 0, 1), (3, 1, 2), (3, 2, 3)];
    let (mut worst_dev, mut worst_final): (f64, f64) = (0.0, 0.0);
    for (n, k, ell) in fixtures {
        let idx = HarmonicIndex { k, ell };
        let mu = PseudoPositiveMeasure::new(n, k, [(idx, DiscreteMeasure::new(vec![0.5], vec![1.0], true).unwrap())]).unwrap();
        let rep = multi_nevanlinna_check(&mu, idx, 1, &nevanlinna_ray(&[4.0, 8.0, 16.0]), 2 * k).unwrap();
        for w in rep.rows.windows(2) {
            worst_dev = worst_dev.max((w[0].residual / w[1].residual - 4.0).abs());
        }
        worst_final = worst_final.max(rep.rows[2].residual);
    }
    verdict(
        worst_dev <= 0.5 && worst_final <= 1e-4,
        format!("worst |ratio − 4| {worst_dev:.3e} (≤ 0.5), worst final residual {worst_final:.3e} (≤ 1e-4)"),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
    let (mut monotone, mut deriv): (bool, f64) = (true, 0.0);
    for i in 0..20 {
        let n = 2 + i % 2;
        let mut comps = Vec::new();
        for k in 0..=3 {
            for ell in 1..=dim_harmonics(n, k).unwrap() {
                let m = rng.gen_range(1..5);
                let lambdas = (0..m).map(|_| rng.gen_range(0.2..2.0)).collect();
                let masses = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
                comps.push((HarmonicIndex { k, ell }, IsoComponent::new(lambdas, masses).unwrap()));
            }
        }
        let state = IsoFlowState::new(n, comps, 0.0).unwrap();
        let rep = monotonicity_check(&state, &grid).unwrap();
        monotone &= rep.rows.iter().all(|r| r.values.windows(2).all(|w| w[1] <= w[0]));
        deriv = deriv.max(rep.max_derivative_error);
        // Spot-check the closed-form derivative at t = 0 by an independent difference.
        let h = 1e-5;
        for &idx in state.components().keys() {
            let f = |t: f64| -> f64 {
                let c = &state.components()[&idx];
                c.lambdas()
                    .iter()
                    .zip(c.masses())
                    .map(|(l, m)| {
                        let r = m.sqrt() / (1.0 + l * m.sqrt() * t);
                        r * r / l.powi(idx.k as i32)
                    })
                    .sum()
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            deriv = deriv.max((fd - functional_derivative(&state, idx).unwrap()).abs());
        }
    }
    verdict(monotone && deriv <= 1e-8, format!("monotone {monotone}, derivative error {deriv:.3e} (≤ 1e-8)"))
}

fn criterion_12() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_toda-kdq");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("verify_{run}.txt"));
        let out = Command::new(bin).arg("verify-all").arg("--output").arg(&path).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("run {run} exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
        }
        outputs.push((std::fs::read(&path).map_err(|e| e.to_string())?, out.stdout));
    }
    let secs = start.elapsed().as_secs_f64();
    let identical = outputs[0] == outputs[1];
    verdict(identical && secs < 60.0, format!("byte-identical {identical}, both exit 0, {secs:.2} s (< 60 s)"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "isospectrality", criterion_1),
        (2, "method equivalence", criterion_2),
        (3, "energy/trace identity", criterion_3),
        (4, "CF/resolvent/eigen agreement", criterion_4),
        (5, "inverse spectral round trip", criterion_5),
        (6, "Hamburger-Nevanlinna limit", criterion_6),
        (7, "Hua-Aronszajn kernel", criterion_7),
        (8, "Cauchy reproduction", criterion_8),
        (9, "pseudo-positive Toda", criterion_9),
        (10, "multidimensional Nevanlinna", criterion_10),
        (11, "integrability monotonicity", criterion_11),
        (12, "CLI determinism", criterion_12),
    ];
    let mut failed = Vec::new();
    for (num, name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {num:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                println!("criterion {num:>2} FAIL  {name}: {detail}");
                failed.push(num);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
