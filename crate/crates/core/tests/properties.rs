use proptest::prelude::*;

use islsync::experiments::{run_monte_carlo, MonteCarloConfig, Scenario};
use islsync::filter::{huber_weight, FilterVariant};
use islsync::measurement::OutlierModel;
use islsync::pcrb::scenario_pcrb;
use islsync::sim::{generate_measurements, simulate_truth, SeedSpec};
use islsync::{h_doppler, Params, ScaledState};

fn state() -> impl Strategy<Value = ScaledState<f64>> {
    prop::array::uniform5(-1e3..1e3f64).prop_map(|a| ScaledState::new(a[0], a[1], a[2], a[3], a[4]))
}

proptest! {
    #[test]
    fn huber_is_continuous_at_threshold(delta in 0.1..10.0f64) {
        let below = huber_weight(delta * (1.0 - 1e-12), delta);
        let above = huber_weight(delta * (1.0 + 1e-12), delta);
        prop_assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn huber_weight_non_increasing_and_influence_non_decreasing(
        delta in 0.1..10.0f64, a in 0.0..100.0f64, b in 0.0..100.0f64
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (wl, wh) = (huber_weight(lo, delta), huber_weight(hi, delta));
        prop_assert!(wh <= wl);
        prop_assert!(wh * hi >= wl * lo - 1e-12);
        prop_assert!(wl > 0.0 && wl <= 1.0);
    }

    #[test]
    fn doppler_is_linear(x in state(), y in state(), alpha in -10.0..10.0f64, kappa in 0.0..0.1f64) {
        let scaled = h_doppler(&ScaledState(x.0 * alpha), &ScaledState(y.0 * alpha), kappa);
        let tol = 1e-9 * (1.0 + x.0.amax().max(y.0.amax()) * alpha.abs());
        prop_assert!((scaled - alpha * h_doppler(&x, &y, kappa)).abs() <= tol);
    }

    #[test]
    fn pcrb_stays_symmetric_pd(sigma_d in 0.005..0.3f64, beta in 10.0..500.0f64) {
        let p = Params { sigma_d, beta, ..Params::default() };
        let traj = scenario_pcrb(&p, 60, false).unwrap();
        for m in traj.info.iter().chain(&traj.cov) {
            prop_assert!(islsync::scalar::relative_asymmetry(m) < 1e-9);
            prop_assert!(m.symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn paired_streams_are_bitwise_reproducible(master in any::<u64>(), trial in 0..1000u64) {
        let p = Params::default();
        let seed = SeedSpec::new(master, trial);
        let a = simulate_truth(&p, 20, seed).unwrap();
        let b = simulate_truth(&p, 20, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let ma = generate_measurements(&a, &OutlierModel::HEAVY_TAIL, seed).unwrap();
        let mb = generate_measurements(&b, &OutlierModel::HEAVY_TAIL, seed).unwrap();
        prop_assert_eq!(ma, mb);
    }
}

#[test]
fn report_does_not_depend_on_worker_count() {
    let base = MonteCarloConfig {
        n_trials: 40,
        n_epochs: 60,
        master_seed: 5,
        ..Default::default()
    };
    let one = run_monte_carlo(&MonteCarloConfig {
        workers: 1,
        ..base.clone()
    })
    .unwrap();
    for workers in [2, 3, 8] {
        let many = run_monte_carlo(&MonteCarloConfig {
            workers,
            ..base.clone()
        })
        .unwrap();
        assert_eq!(one, many, "workers={workers}");
    }
}

/// Adding a variant must not perturb the others: they all consume the same
/// stored stream.
#[test]
fn variants_share_the_measurement_stream() {
    let base = MonteCarloConfig {
        n_trials: 20,
        n_epochs: 60,
        scenarios: vec![Scenario::Impulsive],
        variants: vec![FilterVariant::STANDARD],
        ..Default::default()
    };
    let alone = run_monte_carlo(&base).unwrap();
    let together = run_monte_carlo(&MonteCarloConfig {
        variants: FilterVariant::baseline_set(),
        ..base
    })
    .unwrap();
    assert_eq!(
        alone.scenarios[0].variants[0],
        *together.scenarios[0].variant("standard").unwrap()
    );
}
