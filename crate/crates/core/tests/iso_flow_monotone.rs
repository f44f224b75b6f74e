use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toda_kdq::iso_flow::*;
use toda_kdq::kdq::PseudoPositiveMeasure;
use toda_kdq::sphere::{dim_harmonics, HarmonicIndex};

fn random_state(seed: u64) -> IsoFlowState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 + (seed % 2) as usize;
    let mut comps = Vec::new();
    for k in 0..=3 {
        for ell in 1..=dim_harmonics(n, k).unwrap() {
            let m = rng.gen_range(1..5);
            let lambdas = (0..m).map(|_| rng.gen_range(0.2..2.0)).collect();
            let masses = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
            comps.push((HarmonicIndex { k, ell }, IsoComponent::new(lambdas, masses).unwrap()));
        }
    }
    IsoFlowState::new(n, comps, 0.0).unwrap()
}

#[test]
fn functional_decreases_on_random_states() {
    let grid: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
    for seed in 0..20 {
        let rep = monotonicity_check(&random_state(seed), &grid).unwrap();
        assert!(rep.monotone, "seed {seed}");
        assert!(rep.max_derivative_error <= 1e-8, "seed {seed}: {}", rep.max_derivative_error);
    }
}

#[test]
fn measure_json_round_trip() {
    let s = random_state(3);
    let js = serde_json::to_string(&s.to_measure().unwrap()).unwrap();
    let mu: PseudoPositiveMeasure = serde_json::from_str(&js).unwrap();
    let back = IsoFlowState::from_measure(&mu).unwrap();
    for (idx, c) in s.components() {
        let want = integrability_functional(&s, *idx).unwrap();
        let got = integrability_functional(&back, *idx).unwrap();
        assert!((got - want).abs() <= 1e-14 * want, "{idx:?} {:?}", c);
    }
}

proptest! {
    #[test]
    fn functional_never_increases(seed in 0u64..1000, t1 in 0.0f64..50.0, dt in 0.0f64..50.0) {
        let s = random_state(seed);
        let a = riccati_evolve(&s, t1).unwrap();
        let b = riccati_evolve(&s, t1 + dt).unwrap();
        for &idx in s.components().keys() {
            prop_assert!(integrability_functional(&b, idx).unwrap() <= integrability_functional(&a, idx).unwrap());
        }
    }

    #[test]
    fn riccati_flow_property(seed in 0u64..1000, t1 in 0.0f64..20.0, t2 in 0.0f64..20.0) {
        let s = random_state(seed);
        let two = riccati_evolve(&riccati_evolve(&s, t1).unwrap(), t2).unwrap();
        let one = riccati_evolve(&s, t1 + t2).unwrap();
        for (ca, cb) in two.components().values().zip(one.components().values()) {
            prop_assert_eq!(ca.lambdas(), cb.lambdas());
            for (u, v) in ca.masses().iter().zip(cb.masses()) {
                prop_assert!((u - v).abs() <= 1e-14);
            }
        }
    }
}
