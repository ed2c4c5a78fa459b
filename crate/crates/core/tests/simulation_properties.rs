use proptest::prelude::*;
use scatter_core::analytic::wandering_stationary;
use scatter_core::model::ModelKind;
use scatter_core::model::{InverseTempProfile, TransitionMatrix};
use scatter_core::simulate::{run_confined, run_general, run_replicas, run_wandering, InitialCondition, RunConfig};
use scatter_core::stats::mean_and_se;

fn profile() -> impl Strategy<Value = InverseTempProfile> {
    prop::collection::vec(0.3f64..4.0, 2..6).prop_map(|b| InverseTempProfile::new(b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ledger_closes_energy_and_entropy(p in profile(), seed in any::<u64>(), m in 1usize..4) {
        let mut cfg = RunConfig::new(2000.0, seed);
        cfg.n_batches = 4;
        for out in [run_wandering(&p, m, &cfg).unwrap(), run_confined(&p, &cfg).unwrap()] {
            let l = &out.ledger;
            let e = l.energy_exchanged();
            let total: f64 = e.iter().sum();
            let scale = 1.0 + e.iter().map(|x| x.abs()).sum::<f64>();
            prop_assert!((total - (l.kinetic_end() - l.kinetic_start())).abs() <= 1e-9 * scale);
            let s: f64 = -e.iter().enumerate().map(|(n, x)| p.beta(n) * x).sum::<f64>();
            prop_assert!((s - l.entropy_flow()).abs() <= 1e-9 * scale);
            let batch_sum: f64 = out.batches.iter().map(|b| b.link_current()[0]).sum();
            prop_assert!((batch_sum - l.link_current()[0]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn phase_start_bookkeeping(p in profile(), seed in any::<u64>(), q in 0.0f64..1.0, v in 0.1f64..3.0, left in any::<bool>()) {
        let n = p.n_links() as f64;
        let mut cfg = RunConfig::new(500.0, seed);
        cfg.t_burn = Some(0.0);
        cfg.initial = InitialCondition::Phase { q: q * n, p: if left { -v } else { v } };
        let q_mat = TransitionMatrix::transmit_reflect(p.n_links(), 0.5).unwrap();
        let run = run_general(&p, &q_mat, &cfg, None).unwrap();
        let l = &run.output.ledger;
        prop_assert!((l.kinetic_start() - 0.5 * v * v).abs() < 1e-12);
        let total: f64 = l.energy_exchanged().iter().sum();
        prop_assert!((total - (l.kinetic_end() - l.kinetic_start())).abs() < 1e-9 * (1.0 + total.abs()));
    }
}

#[test]
fn equilibrium_currents_vanish() {
    let p = InverseTempProfile::uniform(1.0, 3).unwrap();
    let model = ModelKind::Wandering {
        profile: p,
        n_tracers: 1,
    };
    let runs = run_replicas(&model, &RunConfig::new(2e4, 11), 64).unwrap();
    for link in 0..3 {
        let rates: Vec<f64> = runs.iter().map(|r| r.ledger.current_rates()[link]).collect();
        let (m, se) = mean_and_se(&rates);
        assert!(m.abs() < 4.0 * se, "link {link}: {m} ± {se}");
    }
}

#[test]
fn wandering_rates_match_closed_forms() {
    let p = InverseTempProfile::from_temperatures(&[1.0, 1.5, 2.0]).unwrap();
    let model = ModelKind::Wandering {
        profile: p.clone(),
        n_tracers: 1,
    };
    let runs = run_replicas(&model, &RunConfig::new(5e4, 5), 64).unwrap();
    let exact = wandering_stationary(&p, 1).unwrap();
    for link in 0..2 {
        let rates: Vec<f64> = runs.iter().map(|r| r.ledger.current_rates()[link]).collect();
        let (m, se) = mean_and_se(&rates);
        assert!(
            (m - exact.currents[link]).abs() < 4.0 * se,
            "current {link}: {m} vs {}",
            exact.currents[link]
        );
    }
    for n in 0..3 {
        let rates: Vec<f64> = runs.iter().map(|r| r.ledger.collision_rates()[n]).collect();
        let (m, se) = mean_and_se(&rates);
        assert!(
            (m - exact.frequencies[n]).abs() < 4.0 * se,
            "frequency {n}: {m} vs {}",
            exact.frequencies[n]
        );
    }
}

#[test]
fn same_seed_same_ledger() {
    let p = InverseTempProfile::new(vec![1.0, 0.5, 0.25]).unwrap();
    let cfg = RunConfig::new(1e4, 77);
    assert_eq!(run_wandering(&p, 3, &cfg).unwrap(), run_wandering(&p, 3, &cfg).unwrap());
    let other = RunConfig::new(1e4, 78);
    assert_ne!(
        run_wandering(&p, 3, &cfg).unwrap(),
        run_wandering(&p, 3, &other).unwrap()
    );
}
