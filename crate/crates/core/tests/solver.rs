mod common;

use nalgebra::DVector;
use rand::Rng;

use common::{deviation, dynamic_game, linear_game, rng, symmetric_blotto, upper_level};
use tullock_core::projection::project;
use tullock_core::{optimality_test, solve_ne, GameError, GameSpec, JointStrategy, SolverConfig};

/// Largest profit gain any player gets from 200 random unilateral deviations.
fn best_deviation_gain(spec: &GameSpec, x: &JointStrategy, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..spec.n_players() {
        let base = spec.total_profit(x, i).unwrap();
        for d in 0..200u64 {
            // half far-away draws, half small moves around the equilibrium
            let block = if d % 2 == 0 {
                deviation(spec, i, seed ^ (d << 8) ^ i as u64)
            } else {
                let scale = 10f64.powf(r.gen_range(-4.0..0.0)) * x.player(i).amax().max(1.0);
                let noise = DVector::from_fn(spec.block_dim(), |_, _| r.gen_range(-scale..scale));
                project(&(x.player(i) + noise), spec.constraints(i)).unwrap()
            };
            let moved = x.with_player(i, block).unwrap();
            worst = worst.max(spec.total_profit(&moved, i).unwrap() - base);
        }
    }
    worst
}

#[test]
fn random_games_converge_without_regret() {
    let config = SolverConfig::default();
    for seed in 0..12u64 {
        let spec = dynamic_game(seed);
        let report = solve_ne(&spec, &config, None).unwrap();
        assert!(report.converged, "seed {seed}: residual {}", report.certificate.max_residual);
        spec.check_feasible(&report.strategy, 1e-9).unwrap();
        let again = optimality_test(&spec, &report.strategy, config.active_tol).unwrap();
        assert!(again.max_residual < config.tol);
        let gain = best_deviation_gain(&spec, &report.strategy, seed);
        assert!(gain <= 1e-4, "seed {seed}: deviation gains {gain}");
    }
}

#[test]
fn upper_level_equilibrium_has_no_profitable_deviation() {
    let spec = upper_level(1.0).to_game_spec().unwrap();
    let report = solve_ne(&spec, &SolverConfig::default(), None).unwrap();
    assert!(report.converged);
    let gain = best_deviation_gain(&spec, &report.strategy, 99);
    assert!(gain <= 1e-4, "deviation gains {gain}");
}

#[test]
fn symmetric_blotto_splits_every_budget_evenly() {
    for (n, k) in [(2, 2), (3, 4), (4, 3)] {
        let spec = symmetric_blotto(n, k).to_game_spec().unwrap();
        let report = solve_ne(&spec, &SolverConfig::default(), None).unwrap();
        assert!(report.converged);
        for i in 0..n {
            for b in 0..k {
                assert!((report.strategy.get(i, b, 0) - 10.0 / k as f64).abs() < 1e-6);
            }
        }
        let cert = optimality_test(&spec, &report.strategy, 1e-7).unwrap();
        assert!(cert.max_residual < 1e-10);
    }
}

#[test]
fn step_schedule_shrinks_by_eta_and_x0_is_honoured() {
    let spec = dynamic_game(4);
    let config = SolverConfig { t_out: 3, max_outer: 4, eta: 0.25, ..SolverConfig::default() };
    let start = common::random_point(&spec, 1);
    let report = solve_ne(&spec, &config, Some(&start)).unwrap();
    for w in report.step_history.windows(2) {
        assert_eq!(w[1], w[0] * 0.25);
    }
    assert_eq!(report.step_history[0], config.gamma_bar);
    spec.check_feasible(&report.strategy, 1e-9).unwrap();
    assert_eq!(report.converged, report.certificate.max_residual < config.tol);
}

#[test]
fn games_outside_the_class_need_best_effort() {
    let spec = (0..50u64).map(linear_game).find(|g| g.n_categories() > 1).unwrap();
    assert!(matches!(
        solve_ne(&spec, &SolverConfig::default(), None),
        Err(GameError::NotUniqueClass)
    ));
    let config = SolverConfig { best_effort: true, ..SolverConfig::default() };
    let report = solve_ne(&spec, &config, None).unwrap();
    spec.check_feasible(&report.strategy, 1e-9).unwrap();
}

#[test]
fn infeasible_start_is_rejected() {
    let spec = symmetric_blotto(2, 2).to_game_spec().unwrap();
    let bad = JointStrategy::new(vec![DVector::from_element(2, 1.0); 2], 2, 1).unwrap();
    assert!(solve_ne(&spec, &SolverConfig::default(), Some(&bad)).is_err());
}
