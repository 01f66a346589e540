use std::sync::OnceLock;

use fracbin::arbitrage::*;
use fracbin::kernel::*;
use fracbin::ledger::{gains, run_ledger};
use fracbin::market::{simulate_path, SeedSpec};
use proptest::prelude::*;

/// A smaller kernel constant keeps prices positive down to N = 8.
fn table() -> &'static KernelTable {
    static TABLE: OnceLock<KernelTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let p = ModelParams::new(0.75, 1.0, 0.25, 1.0).unwrap();
        build_kernel_table(256, &p, &QuadratureConfig::default()).unwrap()
    })
}

fn theta() -> f64 {
    theta_limit(table().params(), 1e-10).unwrap().theta
}

fn setup(n: usize, seed: u64, index: u64) -> (KernelTable, Schedules, PathRun) {
    let t = table().prefix(n).unwrap();
    let s = make_schedules(&t, theta(), 1.0, 1.0).unwrap();
    let path = simulate_path(&t, SeedSpec { master_seed: seed, path_index: index }).unwrap();
    let run = run_path(&path, &t, &s).unwrap();
    (t, s, run)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn decomposition_identity(n in 8usize..=256, seed in any::<u64>(), index in 0u64..1000) {
        let (_, _, run) = setup(n, seed, index);
        prop_assert!(run.decomposition_error() <= 1e-9);
        prop_assert_eq!(run.v_phi[1], 0.0);
        prop_assert_eq!(run.phi.at(0), 0.0);
    }

    #[test]
    fn stopping_is_first_passage(n in 8usize..=256, seed in any::<u64>(), index in 0u64..1000) {
        let (_, s, run) = setup(n, seed, index);
        prop_assert!(verify_first_passage(&run.decomposition, s.eps, &run.stopping));
        for i in 0..4 {
            let first = (1..=n).find(|&k| run.decomposition.sums[i][k] / (n as f64) < -s.eps);
            prop_assert_eq!(first, run.stopping.t[i]);
        }
        prop_assert!(run.stopping_error() <= 1e-12);
        if run.stopping.t_n == Some(0) {
            prop_assert!(run.v_phi_hat.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn deterministic_admissibility(n in 8usize..=256, seed in any::<u64>(), index in 0u64..1000) {
        let (_, s, run) = setup(n, seed, index);
        prop_assert!(run.min_v_psi() >= -s.c, "{} < -{}", run.min_v_psi(), s.c);
        prop_assert!(run.min_v_phi_hat() >= -s.c_hat);
    }

    #[test]
    fn scaling_recovers_stopped_value(n in 8usize..=256, seed in any::<u64>(), index in 0u64..1000) {
        let (_, s, run) = setup(n, seed, index);
        for (a, b) in run.v_psi.iter().zip(&run.v_phi_hat) {
            prop_assert!((a * s.c - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn friction_monotone_in_lambda(
        n in 8usize..=256,
        seed in any::<u64>(),
        mut lambdas in proptest::collection::vec(0.0f64..0.9, 2..6),
    ) {
        let (t, s, run) = setup(n, seed, 0);
        let path = simulate_path(&t, SeedSpec { master_seed: seed, path_index: 0 }).unwrap();
        lambdas.sort_by(f64::total_cmp);
        let values: Vec<f64> = lambdas
            .iter()
            .map(|&l| *run_ledger(&run.psi, &path.s, l).unwrap().value.last().unwrap())
            .collect();
        for w in values.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{values:?}");
        }
        let frictionless = run_ledger(&run.psi, &path.s, 0.0).unwrap();
        prop_assert_eq!(&frictionless.friction.value, &gains(&run.psi, &path.s).unwrap());
        prop_assert!(s.lambda > 0.0 && s.lambda < 1.0);
    }

    #[test]
    fn theta_terms_sum_to_products(n in 8usize..=256, seed in any::<u64>()) {
        let t = table().prefix(n).unwrap();
        let path = simulate_path(&t, SeedSpec { master_seed: seed, path_index: 0 }).unwrap();
        let d = theta_decomposition(&path, &t).unwrap();
        let b12 = make_schedules(&t, 1.0, 1.0, 1.0).unwrap().b12;
        for k in 2..=n {
            let product = path.x_at(k - 1) * path.x_at(k);
            let sum: f64 = (0..4).map(|i| d.theta[i][k]).sum();
            prop_assert!((sum - product).abs() <= 1e-12 * product.abs().max(1.0));
            prop_assert!((d.theta[0][k] + d.theta[1][k]).abs() <= b12 * (1.0 + 1e-12));
        }
    }
}
