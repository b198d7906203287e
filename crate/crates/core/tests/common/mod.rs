#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tullock_core::blotto::BlottoSpec;
use tullock_core::solver::random_start;
use tullock_core::{CostModel, GameSpec, JointStrategy, PlayerConstraints};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-stage budgets `1ᵀx_k = R_k` plus caps `x ≤ cap`, a set the simplex shortcut does not match.
pub fn staged_constraints(budgets: &[f64], m: usize, cap_factor: f64) -> PlayerConstraints {
    let k = budgets.len();
    let dim = k * m;
    let eq = DMatrix::from_fn(k, dim, |r, c| if c / m == r { 1.0 } else { 0.0 });
    let caps = DVector::from_fn(dim, |c, _| budgets[c / m] * cap_factor);
    PlayerConstraints::new(DMatrix::identity(dim, dim), caps, eq, DVector::from_column_slice(budgets)).unwrap()
}

pub struct Shape {
    pub players: usize,
    pub stages: usize,
    pub categories: usize,
}

pub fn random_shape(r: &mut ChaCha8Rng) -> Shape {
    Shape {
        players: r.gen_range(1..=3),
        stages: r.gen_range(1..=3),
        categories: r.gen_range(1..=3),
    }
}

/// Random game with shared weights and dynamic prices, so it lies in the unique-equilibrium class.
pub fn dynamic_game(seed: u64) -> GameSpec {
    let mut r = rng(seed);
    let s = random_shape(&mut r);
    dynamic_game_with(&mut r, &s)
}

pub fn dynamic_game_with(r: &mut ChaCha8Rng, s: &Shape) -> GameSpec {
    let prizes: Vec<f64> = (0..s.stages).map(|_| r.gen_range(5.0..200.0)).collect();
    let eps: Vec<f64> = (0..s.stages).map(|_| r.gen_range(0.5..3.0)).collect();
    let w = DVector::from_fn(s.categories, |_, _| r.gen_range(0.2..1.5));
    let alpha: Vec<f64> = (0..s.stages).map(|_| r.gen_range(0.01..0.5)).collect();
    let offsets = (0..s.stages)
        .map(|_| DVector::from_fn(s.categories, |_, _| r.gen_range(0.0..1.0)))
        .collect();
    let constraints = (0..s.players).map(|_| player_set(r, s)).collect();
    GameSpec::new(prizes, eps, w, CostModel::dynamic(alpha, offsets), constraints).unwrap()
}

/// Random game with linear costs; with more than one category it lies outside the class.
pub fn linear_game(seed: u64) -> GameSpec {
    let mut r = rng(seed);
    let s = random_shape(&mut r);
    let prizes: Vec<f64> = (0..s.stages).map(|_| r.gen_range(5.0..200.0)).collect();
    let eps: Vec<f64> = (0..s.stages).map(|_| r.gen_range(0.5..3.0)).collect();
    let w = DVector::from_fn(s.categories, |_, _| r.gen_range(0.2..1.5));
    let beta: Vec<f64> = (0..s.stages).map(|_| r.gen_range(0.0..2.0)).collect();
    let constraints = (0..s.players).map(|_| player_set(&mut r, &s)).collect();
    GameSpec::new(prizes, eps, w, CostModel::linear(beta), constraints).unwrap()
}

fn player_set(r: &mut ChaCha8Rng, s: &Shape) -> PlayerConstraints {
    let dim = s.stages * s.categories;
    if r.gen_bool(0.5) {
        PlayerConstraints::budget(dim, r.gen_range(1.0..20.0))
    } else {
        let budgets: Vec<f64> = (0..s.stages).map(|_| r.gen_range(1.0..10.0)).collect();
        staged_constraints(&budgets, s.categories, 0.5 + 1.0 / s.categories as f64)
    }
}

pub fn random_point(spec: &GameSpec, seed: u64) -> JointStrategy {
    random_start(spec, seed).unwrap()
}

/// Symmetric Blotto game: every player has the same budget, every battlefield the same data.
pub fn symmetric_blotto(players: usize, battlefields: usize) -> BlottoSpec {
    BlottoSpec::new(
        vec![10.0; players],
        vec![100.0; battlefields],
        vec![0.5; battlefields],
        vec![1.0; battlefields],
    )
    .unwrap()
}

/// Region-level fleet game at cost scale `theta` with `ε_k = 1`.
pub fn upper_level(theta: f64) -> BlottoSpec {
    BlottoSpec::new(
        vec![200.0, 500.0, 1000.0],
        vec![220e3, 100e3, 50e3, 35e3],
        [12.0, 9.0, 6.0, 3.0].iter().map(|b| b * theta).collect(),
        vec![1.0; 4],
    )
    .unwrap()
}

/// Random feasible block for player `i`, drawn independently of `x`.
pub fn deviation(spec: &GameSpec, i: usize, seed: u64) -> DVector<f64> {
    random_start(spec, seed).unwrap().player(i).clone()
}
