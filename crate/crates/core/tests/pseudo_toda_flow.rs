use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toda_kdq::kdq::{markov_stieltjes, KdqPoint};
use toda_kdq::pseudo_toda::*;
use toda_kdq::sphere::{dim_harmonics, eval_harmonic, HarmonicIndex, SphereDirection, SphereQuadrature};

fn random_component(rng: &mut ChaCha8Rng, size: usize) -> PseudoComponent {
    let mut lambdas: Vec<f64> = Vec::new();
    while lambdas.len() < size {
        let l = rng.gen_range(0.05..0.95);
        if lambdas.iter().all(|m| (m - l).abs() > 0.05) {
            lambdas.push(l);
        }
    }
    let raw: Vec<f64> = (0..size).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
    let drift: f64 = 1.0 - masses.iter().sum::<f64>();
    masses[0] += drift;
    PseudoComponent::new(lambdas, masses).unwrap()
}

/// Nine components with k ≤ 2 and three with k = 3, all of size four.
fn twelve_component_state(seed: u64) -> PseudoTodaState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comps = Vec::new();
    for k in 0..=2 {
        for ell in 1..=dim_harmonics(3, k).unwrap() {
            comps.push((HarmonicIndex { k, ell }, random_component(&mut rng, 4)));
        }
    }
    for ell in 1..=3 {
        comps.push((HarmonicIndex { k: 3, ell }, random_component(&mut rng, 4)));
    }
    PseudoTodaState::new(3, comps, 0.0).unwrap()
}

#[test]
fn twelve_component_lattice() {
    let s0 = twelve_component_state(9);
    assert_eq!(s0.components().len(), 12);
    let h_exact: f64 = s0
        .components()
        .values()
        .map(|c| 2.0 * c.lambdas().iter().map(|l| l.powi(4)).sum::<f64>())
        .sum();
    for t in [0.0, 1.0, 10.0, 100.0] {
        let s = evolve(&s0, t);
        assert!(normalization_invariant(&s) <= 1e-12);
        assert_eq!(total_hamiltonian(&s), h_exact);
        for &idx in s.components().keys() {
            let r = component_ode_residual(&s0, idx, t, 1e-4).unwrap();
            assert!(r <= 1e-6, "{idx:?} at t = {t}: {r}");
        }
    }
}

#[test]
fn components_are_isospectral() {
    let s0 = twelve_component_state(10);
    for (&idx, c) in s0.components() {
        let mut want = c.lambda_tilde();
        want.sort_by(f64::total_cmp);
        for t in [0.0, 0.5, 3.0, 20.0] {
            let l = component_jacobi(&evolve(&s0, t), idx).unwrap();
            let (eig, _) = l.eigen().unwrap();
            for (u, v) in eig.iter().zip(&want) {
                assert!((u - v).abs() < 1e-10, "{idx:?} t = {t}: {u} vs {v}");
            }
            let h = component_hamiltonian(&evolve(&s0, t), idx).unwrap();
            assert!((h.value - h.jacobi_value).abs() < 1e-10);
        }
    }
}

#[test]
fn flaschka_surface_projection() {
    let s = evolve(&twelve_component_state(11), 0.7);
    let quad = SphereQuadrature::new(3, 8).unwrap();
    for j in 1..=4 {
        for (&idx, _) in s.components() {
            let l = component_jacobi(&s, idx).unwrap();
            let a_proj = quad.integrate(|th| flaschka_surfaces(&s, j, th).unwrap().0 * eval_harmonic(3, idx, th).unwrap());
            let b_proj = quad.integrate(|th| flaschka_surfaces(&s, j, th).unwrap().1 * eval_harmonic(3, idx, th).unwrap());
            let a_want = if j < 4 { l.offdiag()[j - 1] } else { 0.0 };
            assert!((a_proj - a_want).abs() < 1e-10, "A_{j} {idx:?}");
            assert!((b_proj - l.diag()[j - 1]).abs() < 1e-10, "B_{j} {idx:?}");
        }
    }
}

#[test]
fn mismatched_sizes_are_rejected_by_surfaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = PseudoTodaState::new(
        2,
        [
            (HarmonicIndex { k: 0, ell: 1 }, random_component(&mut rng, 2)),
            (HarmonicIndex { k: 1, ell: 1 }, random_component(&mut rng, 3)),
        ],
        0.0,
    )
    .unwrap();
    assert!(flaschka_surfaces(&s, 1, &SphereDirection::from_angle(0.2)).is_err());
    assert_eq!(s.common_size(), None);
    let js = serde_json::to_value(&s).unwrap();
    assert!(js["N"].is_null());
}

#[test]
fn physical_surfaces_converge_for_geometric_data() {
    // n = 2, one component per (k, 1) with λ = (2^{-k-1}, 2^{-k}); Πã² shrinks geometrically.
    let k_max = 12;
    let comps: Vec<_> = (0..=k_max)
        .map(|k| {
            let l = 0.5f64.powi(k as i32);
            (HarmonicIndex { k, ell: 1 }, PseudoComponent::new(vec![0.5 * l, l], vec![0.5, 0.5]).unwrap())
        })
        .collect();
    let s = PseudoTodaState::new(2, comps, 0.0).unwrap();
    let p = physical_surfaces(&s, 2, &SphereDirection::from_angle(0.4), Gauge::Degree).unwrap();
    let steps: Vec<f64> = p.partial_x.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    assert!(steps[steps.len() - 1] < 1e-12 * p.x.abs().max(1.0), "{steps:?}");
    assert_eq!(p.partial_x.last().unwrap().1, p.x);
}

#[test]
fn associated_measure_transform_converges() {
    let s0 = twelve_component_state(13);
    let theta = SphereDirection::from_polar(0.8, 2.1);
    for t in [0.0, 1.0, 10.0] {
        let mu = evolve(&s0, t).associated_measure().unwrap();
        for c in mu.components().iter().map(|(idx, m)| {
            m.atoms().iter().zip(m.weights()).map(|(r, w)| w * r.powi(idx.k as i32)).sum::<f64>()
        }) {
            assert!((c - 1.0).abs() < 1e-12);
        }
        for modulus in [1.1, 2.0, 5.0] {
            let zeta = Complex64::from_polar(modulus, 0.3);
            let v = markov_stieltjes(&mu, &KdqPoint::new(zeta, theta).unwrap()).unwrap();
            assert!(v.value.is_finite() && v.tail_bound.is_finite());
        }
    }
}

proptest! {
    #[test]
    fn evolve_is_a_semigroup(seed in 0u64..200, t1 in 0.0f64..20.0, t2 in 0.0f64..20.0) {
        let s = twelve_component_state(seed);
        let a = evolve(&evolve(&s, t1), t2);
        let b = evolve(&s, t1 + t2);
        for (ca, cb) in a.components().values().zip(b.components().values()) {
            for (u, v) in ca.masses_tilde().iter().zip(cb.masses_tilde()) {
                prop_assert!((u - v).abs() <= 1e-12);
            }
        }
        prop_assert!(normalization_invariant(&a) <= 1e-12);
    }

    #[test]
    fn tilde_round_trip(k in 0usize..5, seed in 0u64..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambdas: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..3.0)).collect();
        let masses: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..1.0)).collect();
        let td = tilde_transform(k, &lambdas, &masses).unwrap();
        let back = untilde_masses(k, &td.lambdas, &td.masses_tilde).unwrap();
        for (u, v) in back.iter().zip(&masses) {
            prop_assert!((u - v).abs() <= 1e-13 * v);
        }
    }
}
