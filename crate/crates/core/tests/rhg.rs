mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::rng;
use tullock_core::projection::project;
use tullock_core::rhg::*;
use tullock_core::SolverConfig;

/// Small nonnegative system with input caps `u ≤ cap` and couplings `H u − G' y ≤ d`.
fn random_player(seed: u64, steps: usize) -> RhgPlayerSpec {
    let mut r = rng(seed);
    let m_y = r.gen_range(1..=3);
    let m_u = r.gen_range(1..=2);
    let a = DMatrix::from_fn(m_y, m_y, |_, _| r.gen_range(0.0..0.7));
    let b = DMatrix::from_fn(m_y, m_u, |_, _| r.gen_range(0.0..1.0));
    let coupling = r.gen_range(0..=2);
    let m_d = m_u + coupling;
    let mut g = DMatrix::zeros(m_d, m_y);
    let mut h = DMatrix::zeros(m_d, m_u);
    h.view_mut((0, 0), (m_u, m_u)).fill_with_identity();
    for row in m_u..m_d {
        for c in 0..m_y {
            g[(row, c)] = -r.gen_range(0.0..0.5);
        }
        for c in 0..m_u {
            h[(row, c)] = r.gen_range(0.0..1.0);
        }
    }
    let d = (0..steps).map(|_| DVector::from_fn(m_d, |_, _| r.gen_range(0.5..4.0))).collect();
    let y0 = DVector::from_fn(m_y, |_, _| r.gen_range(0.0..5.0));
    let p_y = DVector::from_fn(m_y, |_, _| r.gen_range(0.0..1.0));
    let p_u = DVector::from_fn(m_u, |_, _| r.gen_range(0.0..1.0));
    RhgPlayerSpec::new(a, b, g, h, d, y0, p_y, p_u).unwrap()
}

/// Red, yellow, green battery categories; idle vehicles lose one level, charged ones return green.
fn battery_player(fleet: f64, steps: usize) -> RhgPlayerSpec {
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let b = DMatrix::from_fn(3, 3, |r, _| if r == 2 { 1.0 } else { 0.0 }) - &a;
    RhgPlayerSpec::new(
        a,
        b,
        -DMatrix::identity(3, 3),
        DMatrix::identity(3, 3),
        vec![DVector::zeros(3); steps],
        DVector::from_column_slice(&[0.05 * fleet, 0.10 * fleet, 0.85 * fleet]),
        DVector::from_column_slice(&[0.0, 1.0, 1.0]),
        DVector::from_column_slice(&[0.0, -1.0, -1.0]),
    )
    .unwrap()
}

fn market(steps: usize, m_u: usize, prize: f64, alpha: f64) -> MarketProfile {
    MarketProfile {
        prizes: vec![prize; steps],
        fictitious: vec![2.0; steps],
        alpha: vec![alpha; steps],
        offsets: vec![DVector::zeros(m_u); steps],
    }
}

#[test]
fn lifted_points_decode_to_dynamics_feasible_inputs() {
    for s in 0..100u64 {
        let horizon = 1 + (s as usize % 4);
        let p = random_player(s % 25, horizon);
        let c = lift_constraints(&p, horizon).unwrap();
        let mut r = rng(1000 + s);
        let target = DVector::from_fn(c.dim(), |_, _| r.gen_range(-2.0..6.0));
        let x = project(&target, &c).unwrap();
        let inputs = decode_inputs(&x, p.m_u(), horizon);
        let phis = decode_participations(&x, p.m_u(), horizon);
        let states = p.simulate(&inputs);
        for k in 0..horizon {
            let lhs = &p.g * &states[k] + &p.h * &inputs[k];
            let excess = (lhs - &p.d[k]).max();
            assert!(excess <= 1e-9, "sample {s} step {k}: row excess {excess}");
            assert!(inputs[k].min() >= -1e-9);
            let phi = p.participation(&states[k], &inputs[k]);
            assert!((phi - phis[k]).abs() <= 1e-9 * phi.abs().max(1.0), "sample {s} step {k}: {phi} vs {}", phis[k]);
        }
    }
}

#[test]
fn dynamics_feasible_inputs_encode_to_lifted_points() {
    for s in 0..50u64 {
        let horizon = 1 + (s as usize % 4);
        let p = random_player(s, horizon);
        let mut r = rng(s);
        // shrink random inputs until the step constraints hold
        let mut inputs = Vec::new();
        let mut y = p.y0.clone();
        for k in 0..horizon {
            let mut u = DVector::from_fn(p.m_u(), |_, _| r.gen_range(0.0..3.0));
            while (&p.g * &y + &p.h * &u - &p.d[k]).max() > 0.0 {
                u *= 0.5;
            }
            y = p.step(&y, &u);
            inputs.push(u);
        }
        let x = encode_inputs(&p, &inputs);
        lift_constraints(&p, horizon).unwrap().check_feasible(&x, 1e-9, 0).unwrap();
    }
}

#[test]
fn single_player_plan_matches_grid_search() {
    // scalar fleet that decays unless recharged; φ = y − u
    let p = RhgPlayerSpec::new(
        DMatrix::from_element(1, 1, 0.8),
        DMatrix::from_element(1, 1, 1.2),
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::identity(1, 1),
        vec![DVector::zeros(1); 2],
        DVector::from_element(1, 10.0),
        DVector::from_element(1, 1.0),
        DVector::from_element(1, -1.0),
    )
    .unwrap();
    let m = MarketProfile {
        prizes: vec![40.0, 60.0],
        fictitious: vec![3.0, 3.0],
        alpha: vec![0.05, 0.05],
        offsets: vec![DVector::from_element(1, 0.2); 2],
    };
    let config = SolverConfig { tol: 1e-9, ..SolverConfig::default() };
    let plan = solve_open_loop(std::slice::from_ref(&p), &m, 2, &config).unwrap();
    assert!(plan.report.converged);
    let value = |u0: f64, u1: f64| {
        let y1 = 0.8 * 10.0 + 1.2 * u0;
        let stage = |w: f64, phi: f64, u: f64| w * phi / (phi + 3.0) - 0.05 * u * u - 0.2 * u;
        stage(40.0, 10.0 - u0, u0) + stage(60.0, y1 - u1, u1)
    };
    let mut best = f64::NEG_INFINITY;
    let n = 800;
    for a in 0..=n {
        let u0 = 10.0 * a as f64 / n as f64;
        let y1 = 8.0 + 1.2 * u0;
        for b in 0..=n {
            best = best.max(value(u0, y1 * b as f64 / n as f64));
        }
    }
    let planned = plan.game.total_profit(&plan.report.strategy, 0).unwrap();
    let (u0, u1) = (plan.inputs[0][0][0], plan.inputs[0][1][0]);
    assert!((planned - value(u0, u1)).abs() < 1e-9);
    assert!(planned >= best - 1e-9 && planned - best < 1e-4, "planned {planned}, grid {best}");
}

#[test]
fn identical_players_get_identical_plans() {
    let players = vec![battery_player(100.0, 4); 2];
    let plan = solve_open_loop(&players, &market(4, 3, 5e3, 0.05), 4, &SolverConfig::default()).unwrap();
    assert!(plan.report.converged);
    assert!((plan.report.strategy.player(0) - plan.report.strategy.player(1)).amax() < 1e-6);
    // re-simulated inputs reproduce the participation slots
    for (i, p) in players.iter().enumerate() {
        let phis = decode_participations(plan.report.strategy.player(i), 3, 4);
        for (k, slot) in phis.iter().enumerate() {
            let phi = p.participation(&plan.states[i][k], &plan.inputs[i][k]);
            assert!((phi - slot).abs() <= 1e-8 * phi.abs().max(1.0));
        }
    }
}

#[test]
fn full_horizon_rollout_equals_the_open_loop_plan() {
    let players = vec![battery_player(80.0, 5), battery_player(150.0, 5)];
    let m = market(5, 3, 8e3, 0.04);
    let config = SolverConfig::default();
    let plan = solve_open_loop(&players, &m, 5, &config).unwrap();
    let trace = run_receding_horizon(&players, &m, 5, &config).unwrap();
    assert_eq!(trace.status, TraceStatus::Complete);
    assert_eq!(trace.solves.len(), 1);
    for (k, step) in trace.steps.iter().enumerate() {
        for i in 0..2 {
            assert_eq!(step.inputs[i], plan.inputs[i][k]);
        }
    }
}

#[test]
fn receding_trace_follows_the_dynamics_and_conserves_fleets() {
    let players = vec![battery_player(60.0, 6), battery_player(90.0, 6)];
    let m = market(6, 3, 6e3, 0.05);
    for horizon in [1, 2, 4] {
        let trace = run_receding_horizon(&players, &m, horizon, &SolverConfig::default()).unwrap();
        assert_eq!(trace.status, TraceStatus::Complete);
        assert_eq!(trace.steps.len(), 6);
        assert_eq!(trace.solves.len(), 6 - horizon + 1);
        for (i, p) in players.iter().enumerate() {
            let fleet = p.y0.sum();
            for w in trace.steps.windows(2) {
                let next = p.step(&w[0].states[i], &w[0].inputs[i]);
                assert!((next - &w[1].states[i]).amax() <= 1e-10);
                assert!((w[1].states[i].sum() - fleet).abs() <= 1e-10 * fleet);
            }
            let last = trace.steps.last().unwrap();
            assert!((p.step(&last.states[i], &last.inputs[i]) - &trace.final_states[i]).amax() <= 1e-10);
        }
    }
}

#[test]
fn longer_planning_never_hurts_a_lone_operator() {
    let players = vec![battery_player(120.0, 6)];
    let m = market(6, 3, 4e3, 0.03);
    let config = SolverConfig { tol: 1e-8, ..SolverConfig::default() };
    let greedy = run_receding_horizon(&players, &m, 1, &config).unwrap();
    let full = run_receding_horizon(&players, &m, 6, &config).unwrap();
    assert_eq!(greedy.status, TraceStatus::Complete);
    assert_eq!(full.status, TraceStatus::Complete);
    assert!(full.total_profits()[0] >= greedy.total_profits()[0] - 1e-8);
}

#[test]
fn horizon_longer_than_the_profile_is_rejected() {
    let players = vec![battery_player(10.0, 3)];
    assert!(run_receding_horizon(&players, &market(3, 3, 100.0, 0.1), 4, &SolverConfig::default()).is_err());
}
