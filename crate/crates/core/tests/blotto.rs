mod common;

use proptest::prelude::*;

use common::{symmetric_blotto, upper_level};
use tullock_core::blotto::*;
use tullock_core::{optimality_test, solve_ne, GameError, SolverConfig};

fn assert_closed_form_invariants(spec: &BlottoSpec, sol: &BlottoSolution) {
    let cfg = &sol.configuration;
    for i in 0..spec.n_players() {
        let row = sol.strategy.row(i);
        assert!((row.sum() - spec.budgets[i]).abs() <= 1e-8 * spec.budgets[i].max(1.0));
        assert!(row.iter().all(|&v| v >= 0.0));
        for k in 0..spec.n_battlefields() {
            if cfg.is_zero(i, k) {
                assert_eq!(sol.strategy[(i, k)], 0.0);
            }
        }
    }
    for k in 0..spec.n_battlefields() {
        let n_k = cfg.participants(k);
        let (w, eps, t) = (spec.prizes[k], spec.fictitious[k], sol.t_bar[k]);
        let phi: f64 = sol.strategy.column(k).sum();
        assert!((t - phi - eps).abs() <= 1e-8 * t.max(1.0), "t̄ must equal Φ + ε on battlefield {k}");
        if n_k == 0 {
            continue;
        }
        let delta = sol.t_nu_root + n_k as f64 * spec.unit_costs[k];
        let quadratic = delta * t * t - w * (n_k as f64 - 1.0) * t - w * eps;
        assert!(quadratic.abs() <= 1e-8 * w, "battlefield {k}: quadratic residual {quadratic}");
        for i in (0..spec.n_players()).filter(|&i| !cfg.is_zero(i, k)) {
            // marginal profit on the support equals the budget multiplier
            let marginal = w * (t - sol.strategy[(i, k)]) / (t * t) - spec.unit_costs[k];
            assert!((marginal - sol.nu[i]).abs() <= 1e-8 * sol.nu[i].abs().max(1.0), "({i},{k})");
        }
    }
}

#[test]
fn upper_level_methods_agree_and_certify() {
    let spec = upper_level(1.0);
    let game = spec.to_game_spec().unwrap();
    let semi = solve_semi_analytical(&spec).unwrap();
    assert!(semi.verified && semi.max_residual < 1e-6);
    assert_closed_form_invariants(&spec, &semi);

    let iterative = solve_ne(&game, &SolverConfig::default(), None).unwrap();
    assert!(iterative.converged);
    let cert = optimality_test(&game, &iterative.strategy, 1e-7).unwrap();
    assert!(cert.max_residual < 1e-6, "iterative certificate {}", cert.max_residual);
    let closed = semi.to_joint_strategy().unwrap();
    assert!(iterative.strategy.max_abs_diff(&closed) < 1e-3);

    // larger fleets claim more of the most valuable region
    let region_one: Vec<f64> = (0..3).map(|i| closed.get(i, 0, 0)).collect();
    assert!(region_one[0] < region_one[1] && region_one[1] < region_one[2], "{region_one:?}");
}

#[test]
fn symmetric_games_split_evenly_with_both_methods() {
    for (n, k) in [(2, 2), (3, 3), (4, 2), (2, 5)] {
        let spec = symmetric_blotto(n, k);
        let semi = solve_semi_analytical(&spec).unwrap();
        assert_eq!(semi.configuration.size(), 0);
        assert_eq!(semi.configurations_tried, 1);
        let iterative = solve_ne(&spec.to_game_spec().unwrap(), &SolverConfig::default(), None).unwrap();
        let even = 10.0 / k as f64;
        for i in 0..n {
            for b in 0..k {
                assert!((semi.strategy[(i, b)] - even).abs() < 1e-6);
                assert!((iterative.strategy.get(i, b, 0) - even).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn lone_player_is_budget_forced() {
    let spec = BlottoSpec::new(vec![7.0], vec![40.0], vec![0.3], vec![2.0]).unwrap();
    let cfg = Configuration::interior(1, 1);
    let root = find_root(&cfg, &spec).unwrap();
    // closed form: t* = Wε/(R + ε)² − β
    let expected = 40.0 * 2.0 / 81.0 - 0.3;
    assert!((root - expected).abs() < 1e-10);
    assert!(f_tilde(root, &cfg, &spec).unwrap().abs() < 1e-12 * 9.0);
    let sol = solve_configuration(&cfg, &spec).unwrap().unwrap();
    assert_eq!(sol.strategy[(0, 0)], 7.0);

    let two = BlottoSpec::new(vec![6.0], vec![40.0; 2], vec![0.3; 2], vec![2.0; 2]).unwrap();
    let sol = solve_semi_analytical(&two).unwrap();
    assert!((sol.strategy[(0, 0)] - 3.0).abs() < 1e-12 && (sol.strategy[(0, 1)] - 3.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f_tilde_decreases_towards_its_limit(
        budgets in prop::collection::vec(1.0f64..100.0, 1..4),
        prizes in prop::collection::vec(10.0f64..1e4, 1..4),
        beta in 0.0f64..5.0,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let k = prizes.len();
        let spec = BlottoSpec::new(budgets.clone(), prizes, vec![beta; k], vec![1.0; k]).unwrap();
        let cfg = Configuration::interior(budgets.len(), k);
        let floor = -(budgets.len() as f64) * beta;
        let (lo, hi) = (a.min(b), a.max(b));
        let t1 = floor + 1e-6 + lo * 100.0;
        let t2 = floor + 1e-6 + hi * 100.0 + 1e-3;
        prop_assert!(f_tilde(t1, &cfg, &spec).unwrap() > f_tilde(t2, &cfg, &spec).unwrap());
        let limit = -budgets.iter().sum::<f64>() - k as f64;
        // t̄ decays like √(Wε/t), so the far point scales with the prizes
        let scale = spec.prizes.iter().sum::<f64>() * limit.abs();
        let far = f_tilde(1e12 * scale, &cfg, &spec).unwrap();
        prop_assert!((far - limit).abs() < 1e-6 * limit.abs().max(1.0));
        prop_assert!(f_tilde(floor - 1.0, &cfg, &spec).is_err());
    }
}

#[test]
fn random_interior_games_match_the_iterative_solver() {
    use rand::Rng;
    let mut r = common::rng(21);
    let mut checked = 0;
    for _ in 0..30 {
        let n = r.gen_range(2..=3);
        let k = r.gen_range(2..=4);
        let spec = BlottoSpec::new(
            (0..n).map(|_| r.gen_range(5.0..50.0)).collect(),
            (0..k).map(|_| r.gen_range(500.0..5000.0)).collect(),
            (0..k).map(|_| r.gen_range(0.0..3.0)).collect(),
            (0..k).map(|_| r.gen_range(0.5..2.0)).collect(),
        )
        .unwrap();
        let Ok(semi) = solve_semi_analytical(&spec) else { continue };
        assert_closed_form_invariants(&spec, &semi);
        let iterative = solve_ne(&spec.to_game_spec().unwrap(), &SolverConfig::default(), None).unwrap();
        assert!(iterative.strategy.max_abs_diff(&semi.to_joint_strategy().unwrap()) < 1e-3);
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} games had a verified configuration");
}

#[test]
fn unused_battlefield_gives_a_verified_boundary_configuration() {
    let spec = BlottoSpec::new(vec![0.5, 5.0], vec![100.0, 2.0], vec![0.1; 2], vec![1.0; 2]).unwrap();
    let semi = solve_semi_analytical(&spec).unwrap();
    assert_eq!(semi.configuration.zero_set(), vec![(0, 1), (1, 1)]);
    assert_closed_form_invariants(&spec, &semi);
    let iterative = solve_ne(&spec.to_game_spec().unwrap(), &SolverConfig::default(), None).unwrap();
    assert!(iterative.strategy.max_abs_diff(&semi.to_joint_strategy().unwrap()) < 1e-3);
}

#[test]
fn configuration_starving_a_large_player_is_rejected() {
    let spec = BlottoSpec::new(vec![1.0, 500.0], vec![100.0, 100.0], vec![0.1; 2], vec![1.0; 2]).unwrap();
    let cfg = Configuration::from_zero_set(2, 2, &[(1, 0)]).unwrap();
    assert!(solve_configuration(&cfg, &spec).unwrap().is_none());
}

#[test]
fn unmatched_boundary_equilibria_report_the_fallback() {
    // the small player abandons the cheap battlefield while the large one keeps both
    let spec = BlottoSpec::new(vec![0.1, 50.0], vec![100.0, 1.0], vec![0.1; 2], vec![1.0; 2]).unwrap();
    match solve_semi_analytical(&spec) {
        Err(GameError::NoVerifiedConfiguration { tried, .. }) => assert_eq!(tried as u128, configuration_count(2, 2)),
        other => panic!("expected the fallback error, got {other:?}"),
    }
    let iterative = solve_ne(&spec.to_game_spec().unwrap(), &SolverConfig::default(), None).unwrap();
    assert!(iterative.converged);
    assert!(iterative.strategy.get(0, 1, 0) < 1e-9);
}

#[test]
fn benchmark_reports_fewer_evaluations_for_the_closed_form() {
    let report = benchmark_methods(&upper_level(1.0), &SolverConfig::default()).unwrap();
    assert!(report.agreement < 1e-3);
    assert!(report.semi_analytical_seconds > 0.0 && report.iterative_seconds > 0.0);
    assert!(report.semi_analytical_evaluations < report.iterative_inner_steps);
}
