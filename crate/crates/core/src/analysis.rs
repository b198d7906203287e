//! Structural checks: concavity, cross-derivative symmetry and the
//! negative-definiteness test that implies a unique equilibrium.
//!
//! Variables are ordered player-major, then stage, then category, i.e. entry
//! `(i, k, j)` of the joint vector sits at `i·K·m + k·m + j`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GameError, Result};
use crate::feasibility::bounding_box;
use crate::game::{CostModel, GameSpec, JointStrategy};
use crate::projection::project;

/// Below this the largest eigenvalue counts as strictly negative.
pub const DEFINITENESS_TOL: f64 = 1e-10;

/// True when the game belongs to the class with a guaranteed unique equilibrium.
///
/// This holds for a single weight vector `w ≥ 0`, `w ≠ 0`, shared by all
/// players and stages, combined with either
/// * dynamic prices with `α_k > 0`, where the price mask may exempt at most one
///   category and only one that carries positive weight, or
/// * linear costs with a scalar allocation and `w = 1`.
pub fn check_unique_class(spec: &GameSpec) -> bool {
    if !spec.has_uniform_weights() {
        return false;
    }
    let w = spec.weight(0, 0);
    if w.iter().any(|&v| !(v >= 0.0)) || w.norm() == 0.0 {
        return false;
    }
    if spec.fictitious().iter().any(|&e| !(e > 0.0)) || spec.stage_prizes().iter().any(|&p| !(p >= 0.0)) {
        return false;
    }
    match spec.cost() {
        CostModel::DynamicPrice { alpha, mask, .. } => {
            if alpha.iter().any(|&a| !(a > 0.0)) {
                return false;
            }
            let exempt: Vec<usize> = (0..mask.len()).filter(|&j| mask[j] == 0.0).collect();
            match exempt.as_slice() {
                [] => true,
                [j] => w[*j] > 0.0,
                _ => false,
            }
        }
        CostModel::Linear { .. } => spec.n_categories() == 1 && w[0] == 1.0,
    }
}

fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    (eig.min(), eig.max())
}

/// Own-block Hessian of `u_{i,k}` and whether it is negative semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityReport {
    pub matrix: DMatrix<f64>,
    pub max_eigenvalue: f64,
    pub negative_semidefinite: bool,
}

/// `f₂ wwᵀ − ∂²c` for player `i` at stage `k`.
pub fn concavity_condition(spec: &GameSpec, x: &JointStrategy, i: usize, k: usize) -> Result<ConcavityReport> {
    spec.check_dims(x)?;
    let w = spec.weight(i, k);
    let matrix = w * w.transpose() * spec.f2(x, i, k) - spec.cost().own_hessian(k, spec.n_categories());
    let (_, max_eigenvalue) = eigen_extremes(&matrix);
    Ok(ConcavityReport {
        negative_semidefinite: max_eigenvalue <= DEFINITENESS_TOL,
        max_eigenvalue,
        matrix,
    })
}

/// `D_{x_{q,k}} ∇_{x_{p,k}} u_p = f₃ w_p w_qᵀ − ∂²c_p/∂x_p∂x_q`.
pub fn cross_block(spec: &GameSpec, x: &JointStrategy, p: usize, q: usize, k: usize) -> DMatrix<f64> {
    spec.weight(p, k) * spec.weight(q, k).transpose() * spec.f3(x, p, k)
        - spec.cost().cross_hessian(k, spec.n_categories())
}

/// Checks that the mixed partials of `u_p` in `x_{p,k}` and `x_{q,k}` agree in either order.
///
/// The two orders give `f₃ w_q w_pᵀ − α D` and `f₃ w_p w_qᵀ − α D`; they are
/// compared entrywise with tolerance `1e-12`.
pub fn commutativity_check(spec: &GameSpec, x: &JointStrategy, p: usize, q: usize, k: usize) -> Result<bool> {
    spec.check_dims(x)?;
    if p == q {
        return Err(GameError::Domain("commutativity is defined for distinct players".into()));
    }
    let f3 = spec.f3(x, p, k);
    let cost = spec.cost().cross_hessian(k, spec.n_categories());
    let (wp, wq) = (spec.weight(p, k), spec.weight(q, k));
    let lhs = wq * wp.transpose() * f3 - &cost;
    let rhs = wp * wq.transpose() * f3 - &cost;
    Ok((lhs - rhs).amax() <= 1e-12)
}

fn offset(spec: &GameSpec, i: usize, k: usize) -> usize {
    i * spec.block_dim() + k * spec.n_categories()
}

fn add_block(target: &mut DMatrix<f64>, row: usize, col: usize, block: &DMatrix<f64>) {
    let mut view = target.view_mut((row, col), block.shape());
    view += block;
}

/// Jacobian of the stacked profit gradients, `G_{pq} = D_{x_q} ∇_{x_p} u_p`.
pub fn pseudo_jacobian(spec: &GameSpec, x: &JointStrategy) -> Result<DMatrix<f64>> {
    spec.check_dims(x)?;
    let n = spec.n_players() * spec.block_dim();
    let m = spec.n_categories();
    let mut g = DMatrix::zeros(n, n);
    for k in 0..spec.n_stages() {
        for p in 0..spec.n_players() {
            for q in 0..spec.n_players() {
                let block = if p == q {
                    let w = spec.weight(p, k);
                    w * w.transpose() * spec.f2(x, p, k) - spec.cost().own_hessian(k, m)
                } else {
                    cross_block(spec, x, p, q, k)
                };
                add_block(&mut g, offset(spec, p, k), offset(spec, q, k), &block);
            }
        }
    }
    Ok(g)
}

/// `G + Gᵀ` assembled blockwise from [`pseudo_jacobian`].
pub fn symmetric_jacobian_blockwise(spec: &GameSpec, x: &JointStrategy) -> Result<DMatrix<f64>> {
    let g = pseudo_jacobian(spec, x)?;
    Ok(&g + g.transpose())
}

/// `blkdiag(∂²u_i/∂x_i²)`.
pub fn own_hessian_matrix(spec: &GameSpec, x: &JointStrategy) -> Result<DMatrix<f64>> {
    spec.check_dims(x)?;
    let n = spec.n_players() * spec.block_dim();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..spec.n_players() {
        for k in 0..spec.n_stages() {
            let report = concavity_condition(spec, x, i, k)?;
            add_block(&mut out, offset(spec, i, k), offset(spec, i, k), &report.matrix);
        }
    }
    Ok(out)
}

/// `Hess_{x_{−i}} u_i` in the reduced coordinates that skip player `i`.
pub fn other_player_hessian(spec: &GameSpec, x: &JointStrategy, i: usize) -> Result<DMatrix<f64>> {
    spec.check_dims(x)?;
    let dim = spec.block_dim();
    let m = spec.n_categories();
    let others: Vec<usize> = (0..spec.n_players()).filter(|&j| j != i).collect();
    let mut out = DMatrix::zeros(others.len() * dim, others.len() * dim);
    for k in 0..spec.n_stages() {
        let (phi_i, total) = stage_participation(spec, x, i, k);
        let s = total + spec.fictitious()[k];
        let coef = 2.0 * spec.stage_prizes()[k] * phi_i / s.powi(3);
        // the cost of player i is linear in every other block
        for (a, &j) in others.iter().enumerate() {
            for (b, &l) in others.iter().enumerate() {
                let block = spec.weight(j, k) * spec.weight(l, k).transpose() * coef;
                add_block(&mut out, a * dim + k * m, b * dim + k * m, &block);
            }
        }
    }
    Ok(out)
}

/// Embeds [`other_player_hessian`] into the full space with zero rows and columns for player `i`.
pub fn extended_hessian(spec: &GameSpec, x: &JointStrategy, i: usize) -> Result<DMatrix<f64>> {
    let reduced = other_player_hessian(spec, x, i)?;
    let dim = spec.block_dim();
    let n = spec.n_players() * dim;
    let left = i * dim;
    let mut out = DMatrix::zeros(n, n);
    let map = |r: usize| if r < left { r } else { r + dim };
    for r in 0..reduced.nrows() {
        for c in 0..reduced.ncols() {
            out[(map(r), map(c))] = reduced[(r, c)];
        }
    }
    Ok(out)
}

/// Hessian of the aggregate cost `Σ_i Σ_k c_{i,k}`.
pub fn aggregate_cost_hessian(spec: &GameSpec) -> DMatrix<f64> {
    let n = spec.n_players() * spec.block_dim();
    let m = spec.n_categories();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..spec.n_stages() {
        // Σ_i c_{i,k} = x̄_kᵀ α_k D x̄_k + r_kᵀ x̄_k, so every (p, q) pair shares 2α_k D
        let block = spec.cost().own_hessian(k, m);
        for p in 0..spec.n_players() {
            for q in 0..spec.n_players() {
                add_block(&mut out, offset(spec, p, k), offset(spec, q, k), &block);
            }
        }
    }
    out
}

/// Hessian of the total loss `Σ_k Ψ_k`.
pub fn loss_hessian(spec: &GameSpec, x: &JointStrategy) -> Result<DMatrix<f64>> {
    spec.check_dims(x)?;
    let n = spec.n_players() * spec.block_dim();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..spec.n_stages() {
        let (_, total) = stage_participation(spec, x, 0, k);
        let s = total + spec.fictitious()[k];
        let coef = 2.0 * spec.stage_prizes()[k] * spec.fictitious()[k] / s.powi(3);
        let mut v = DVector::zeros(n);
        for p in 0..spec.n_players() {
            v.rows_mut(offset(spec, p, k), spec.n_categories()).copy_from(spec.weight(p, k));
        }
        out += &v * v.transpose() * coef;
    }
    Ok(out)
}

/// `M − Σ_i H^i − Hess(C + ΣΨ)`.
pub fn uniqueness_matrix(spec: &GameSpec, x: &JointStrategy) -> Result<DMatrix<f64>> {
    let mut out = own_hessian_matrix(spec, x)?;
    for i in 0..spec.n_players() {
        out -= extended_hessian(spec, x, i)?;
    }
    out -= aggregate_cost_hessian(spec);
    out -= loss_hessian(spec, x)?;
    Ok(out)
}

fn stage_participation(spec: &GameSpec, x: &JointStrategy, i: usize, k: usize) -> (f64, f64) {
    let total = (0..spec.n_players()).map(|j| spec.participation(x, j, k)).sum();
    (spec.participation(x, i, k), total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UniquenessVerdict {
    /// Structural class with a proven unique equilibrium; nothing was sampled.
    AnalyticallyUnique,
    /// Every sampled point passed. Evidence only: sampling cannot prove a statement for all points.
    SampledPass,
    /// Some sampled point violated negative definiteness.
    Falsified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub verdict: UniquenessVerdict,
    pub witness: Option<JointStrategy>,
    /// Smallest eigenvalue over all samples.
    pub min_eigenvalue_seen: Option<f64>,
    /// Largest eigenvalue over all samples; must stay below `-1e-10` for a pass.
    pub max_eigenvalue_seen: Option<f64>,
    pub samples_checked: usize,
}

/// Uniqueness verdict, short-circuiting on the structural class.
pub fn uniqueness_test(spec: &GameSpec, sample_count: usize, seed: u64) -> Result<UniquenessReport> {
    if check_unique_class(spec) {
        return Ok(UniquenessReport {
            verdict: UniquenessVerdict::AnalyticallyUnique,
            witness: None,
            min_eigenvalue_seen: None,
            max_eigenvalue_seen: None,
            samples_checked: 0,
        });
    }
    sampled_uniqueness_test(spec, sample_count, seed)
}

/// Samples feasible points and checks `M − ΣH − Hess(C + ΣΨ) ≺ 0` at each.
pub fn sampled_uniqueness_test(spec: &GameSpec, sample_count: usize, seed: u64) -> Result<UniquenessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_seen = f64::INFINITY;
    let mut max_seen = f64::NEG_INFINITY;
    for s in 0..sample_count {
        let x = sample_feasible(spec, &mut rng)?;
        let (lo, hi) = eigen_extremes(&uniqueness_matrix(spec, &x)?);
        min_seen = min_seen.min(lo);
        max_seen = max_seen.max(hi);
        if hi >= -DEFINITENESS_TOL {
            return Ok(UniquenessReport {
                verdict: UniquenessVerdict::Falsified,
                witness: Some(x),
                min_eigenvalue_seen: Some(min_seen),
                max_eigenvalue_seen: Some(max_seen),
                samples_checked: s + 1,
            });
        }
    }
    Ok(UniquenessReport {
        verdict: UniquenessVerdict::SampledPass,
        witness: None,
        min_eigenvalue_seen: (sample_count > 0).then_some(min_seen),
        max_eigenvalue_seen: (sample_count > 0).then_some(max_seen),
        samples_checked: sample_count,
    })
}

/// Uniform draw in each player's bounding box, projected onto the player's set.
pub fn sample_feasible<R: Rng>(spec: &GameSpec, rng: &mut R) -> Result<JointStrategy> {
    const RETRIES: usize = 10;
    let mut blocks = Vec::with_capacity(spec.n_players());
    for (i, c) in spec.all_constraints().iter().enumerate() {
        let bbox = bounding_box(c, i)?;
        let mut block = None;
        for _ in 0..RETRIES {
            let draw = DVector::from_fn(c.dim(), |j, _| {
                let (lo, hi) = (bbox.lower[j], bbox.upper[j]);
                if hi > lo {
                    rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            });
            if let Ok(y) = project(&draw, c) {
                block = Some(y);
                break;
            }
        }
        blocks.push(block.ok_or_else(|| {
            GameError::Sampling(format!("no feasible sample for player {i} after {RETRIES} attempts"))
        })?);
    }
    Ok(JointStrategy::from_blocks_unchecked(blocks, spec.n_stages(), spec.n_categories()))
}
