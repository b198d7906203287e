//! Game data model for multi-stage lossy Tullock markets.
//!
//! Each of `N` players splits a decision vector `x_i` of length `K·m` over `K`
//! stages with `m` allocation categories per stage. Stage `k` pays out a prize
//! `W_k` proportionally to the players' affine participations `φ_{i,k} = wᵀx_{i,k}`,
//! with a fictitious participation `ε_k > 0` absorbing the forfeited share:
//!
//! ```text
//! p_{i,k} = W_k φ_{i,k} / (Φ_k + ε_k),     Ψ_k = W_k ε_k / (Φ_k + ε_k)
//! ```
//!
//! so that `Ψ_k + Σ_i p_{i,k} = W_k` for every joint strategy.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{GameError, Result, RowKind};
use crate::feasibility;

/// Per-stage participation cost parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum CostModel {
    /// `c_{i,k} = β_k · 1ᵀx_{i,k}`.
    Linear { beta: Vec<f64> },
    /// `c_{i,k} = x_{i,k}ᵀ D (α_k Σ_j x_{j,k}) + r_kᵀ x_{i,k}`, where `D = diag(mask)`.
    ///
    /// A mask of all ones is the plain dynamic-price model. Zeros exempt a
    /// category from the congestion price (used for the participation slot of
    /// lifted receding-horizon games).
    DynamicPrice {
        alpha: Vec<f64>,
        offsets: Vec<DVector<f64>>,
        mask: DVector<f64>,
    },
}

impl CostModel {
    pub fn linear(beta: Vec<f64>) -> Self {
        CostModel::Linear { beta }
    }

    /// Dynamic prices on every category.
    pub fn dynamic(alpha: Vec<f64>, offsets: Vec<DVector<f64>>) -> Self {
        let m = offsets.first().map_or(0, |r| r.len());
        CostModel::DynamicPrice {
            alpha,
            offsets,
            mask: DVector::from_element(m, 1.0),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, CostModel::Linear { .. })
    }

    /// Hessian of `c_{i,k}` with respect to the player's own stage block.
    pub fn own_hessian(&self, k: usize, m: usize) -> DMatrix<f64> {
        match self {
            CostModel::Linear { .. } => DMatrix::zeros(m, m),
            CostModel::DynamicPrice { alpha, mask, .. } => {
                DMatrix::from_diagonal(&(mask * (2.0 * alpha[k])))
            }
        }
    }

    /// Mixed second derivative of `c_{p,k}` with respect to `x_{p,k}` and `x_{q,k}`, `p ≠ q`.
    pub fn cross_hessian(&self, k: usize, m: usize) -> DMatrix<f64> {
        match self {
            CostModel::Linear { .. } => DMatrix::zeros(m, m),
            CostModel::DynamicPrice { alpha, mask, .. } => {
                DMatrix::from_diagonal(&(mask * alpha[k]))
            }
        }
    }
}

/// Polytopic feasible set of one player: `A_iq x ≤ b_iq`, `A_eq x = b_eq`, `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerConstraints {
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

impl PlayerConstraints {
    pub fn new(
        ineq_matrix: DMatrix<f64>,
        ineq_rhs: DVector<f64>,
        eq_matrix: DMatrix<f64>,
        eq_rhs: DVector<f64>,
    ) -> Result<Self> {
        if ineq_matrix.nrows() != ineq_rhs.len() {
            return Err(GameError::Dimension(format!(
                "inequality matrix has {} rows but rhs has {} entries",
                ineq_matrix.nrows(),
                ineq_rhs.len()
            )));
        }
        if eq_matrix.nrows() != eq_rhs.len() {
            return Err(GameError::Dimension(format!(
                "equality matrix has {} rows but rhs has {} entries",
                eq_matrix.nrows(),
                eq_rhs.len()
            )));
        }
        if ineq_matrix.ncols() != eq_matrix.ncols() {
            return Err(GameError::Dimension(format!(
                "inequality matrix has {} columns, equality matrix has {}",
                ineq_matrix.ncols(),
                eq_matrix.ncols()
            )));
        }
        let finite = ineq_matrix.iter().chain(ineq_rhs.iter()).chain(eq_matrix.iter()).chain(eq_rhs.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(GameError::InvalidSpec("constraint data must be finite".into()));
        }
        Ok(Self {
            ineq_matrix,
            ineq_rhs,
            eq_matrix,
            eq_rhs,
        })
    }

    /// `{x ≥ 0 : 1ᵀx = budget}` in dimension `dim`.
    pub fn budget(dim: usize, budget: f64) -> Self {
        Self {
            ineq_matrix: DMatrix::zeros(0, dim),
            ineq_rhs: DVector::zeros(0),
            eq_matrix: DMatrix::from_element(1, dim, 1.0),
            eq_rhs: DVector::from_element(1, budget),
        }
    }

    pub fn dim(&self) -> usize {
        self.eq_matrix.ncols()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_matrix.nrows()
    }

    pub fn n_eq(&self) -> usize {
        self.eq_matrix.nrows()
    }

    /// Budget of the scaled simplex when the set is exactly `{x ≥ 0 : 1ᵀx = R}`.
    pub fn simplex_budget(&self) -> Option<f64> {
        if self.n_ineq() == 0
            && self.n_eq() == 1
            && self.eq_matrix.iter().all(|&a| a == 1.0)
            && self.eq_rhs[0] > 0.0
        {
            Some(self.eq_rhs[0])
        } else {
            None
        }
    }

    /// Largest violation over every row, including the implied `x ≥ 0`.
    pub fn max_violation(&self, x: &DVector<f64>) -> Option<(RowKind, usize, f64)> {
        let mut worst: Option<(RowKind, usize, f64)> = None;
        let mut consider = |kind, row, v: f64| {
            if v > worst.map_or(0.0, |w| w.2) {
                worst = Some((kind, row, v));
            }
        };
        let ax = &self.ineq_matrix * x;
        for r in 0..self.n_ineq() {
            consider(RowKind::Inequality, r, ax[r] - self.ineq_rhs[r]);
        }
        let ex = &self.eq_matrix * x;
        for r in 0..self.n_eq() {
            consider(RowKind::Equality, r, (ex[r] - self.eq_rhs[r]).abs());
        }
        for (j, &v) in x.iter().enumerate() {
            consider(RowKind::Nonnegativity, j, -v);
        }
        worst
    }

    pub fn check_feasible(&self, x: &DVector<f64>, tol: f64, player: usize) -> Result<()> {
        if x.len() != self.dim() {
            return Err(GameError::Dimension(format!(
                "player {player} strategy has length {}, constraints expect {}",
                x.len(),
                self.dim()
            )));
        }
        match self.max_violation(x) {
            Some((kind, row, violation)) if violation > tol => Err(GameError::InfeasibleStrategy {
                player,
                kind,
                row,
                violation,
            }),
            _ => Ok(()),
        }
    }

    /// Indices of inequality rows with slack at most `tol`.
    pub fn active_inequalities(&self, x: &DVector<f64>, tol: f64) -> Vec<usize> {
        let ax = &self.ineq_matrix * x;
        (0..self.n_ineq())
            .filter(|&r| self.ineq_rhs[r] - ax[r] <= tol)
            .collect()
    }
}

/// Concatenated per-player allocation vectors `x = col(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStrategy {
    blocks: Vec<DVector<f64>>,
    n_stages: usize,
    n_categories: usize,
}

impl JointStrategy {
    pub fn new(blocks: Vec<DVector<f64>>, n_stages: usize, n_categories: usize) -> Result<Self> {
        let dim = n_stages * n_categories;
        for (i, b) in blocks.iter().enumerate() {
            if b.len() != dim {
                return Err(GameError::Dimension(format!(
                    "player {i} block has length {}, expected {dim}",
                    b.len()
                )));
            }
            if let Some(j) = b.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(GameError::Domain(format!(
                    "player {i} entry {j} is {} (allocations must be finite and nonnegative)",
                    b[j]
                )));
            }
        }
        Ok(Self {
            blocks,
            n_stages,
            n_categories,
        })
    }

    pub(crate) fn from_blocks_unchecked(
        blocks: Vec<DVector<f64>>,
        n_stages: usize,
        n_categories: usize,
    ) -> Self {
        Self {
            blocks,
            n_stages,
            n_categories,
        }
    }

    pub fn zeros(n_players: usize, n_stages: usize, n_categories: usize) -> Self {
        Self {
            blocks: vec![DVector::zeros(n_stages * n_categories); n_players],
            n_stages,
            n_categories,
        }
    }

    pub fn from_flat(flat: &DVector<f64>, n_players: usize, n_stages: usize, n_categories: usize) -> Result<Self> {
        let dim = n_stages * n_categories;
        if flat.len() != n_players * dim {
            return Err(GameError::Dimension(format!(
                "flat strategy has length {}, expected {}",
                flat.len(),
                n_players * dim
            )));
        }
        let blocks = (0..n_players)
            .map(|i| flat.rows(i * dim, dim).into_owned())
            .collect();
        Self::new(blocks, n_stages, n_categories)
    }

    pub fn n_players(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_stages(&self) -> usize {
        self.n_stages
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    pub fn player(&self, i: usize) -> &DVector<f64> {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[DVector<f64>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<DVector<f64>> {
        self.blocks
    }

    pub fn stage(&self, i: usize, k: usize) -> DVectorView<'_, f64> {
        self.blocks[i].rows(k * self.n_categories, self.n_categories)
    }

    pub fn get(&self, i: usize, k: usize, j: usize) -> f64 {
        self.blocks[i][k * self.n_categories + j]
    }

    pub fn flatten(&self) -> DVector<f64> {
        let dim = self.n_stages * self.n_categories;
        let mut out = DVector::zeros(self.blocks.len() * dim);
        for (i, b) in self.blocks.iter().enumerate() {
            out.rows_mut(i * dim, dim).copy_from(b);
        }
        out
    }

    /// Copy of this strategy with player `i`'s block replaced.
    pub fn with_player(&self, i: usize, block: DVector<f64>) -> Result<Self> {
        let mut blocks = self.blocks.clone();
        blocks[i] = block;
        Self::new(blocks, self.n_stages, self.n_categories)
    }

    pub fn max_abs_diff(&self, other: &JointStrategy) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }
}

/// Everything that happens at one stage for a given joint strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StageEvaluation {
    pub participations: Vec<f64>,
    pub total_participation: f64,
    pub payoffs: Vec<f64>,
    pub loss: f64,
    pub costs: Vec<f64>,
}

/// Full description of a `K`-stage, `N`-player lossy Tullock game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    n_players: usize,
    n_stages: usize,
    n_categories: usize,
    stage_prizes: Vec<f64>,
    fictitious: Vec<f64>,
    /// `weights[i][k]`: participation weights of player `i` at stage `k`.
    weights: Vec<Vec<DVector<f64>>>,
    cost: CostModel,
    constraints: Vec<PlayerConstraints>,
}

impl GameSpec {
    /// Builds and fully validates a game whose players share the participation weights `w`.
    ///
    /// Validation covers the value invariants and, per player, that the
    /// feasible polytope is nonempty, bounded and strictly feasible in its
    /// inequality rows.
    pub fn new(
        stage_prizes: Vec<f64>,
        fictitious: Vec<f64>,
        weights: DVector<f64>,
        cost: CostModel,
        constraints: Vec<PlayerConstraints>,
    ) -> Result<Self> {
        let k = stage_prizes.len();
        let table = vec![vec![weights; k]; constraints.len()];
        let spec = Self::from_parts_unchecked(stage_prizes, fictitious, table, cost, constraints)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Same as [`GameSpec::new`] with stage-dependent weights shared by all players.
    pub fn with_stage_weights(
        stage_prizes: Vec<f64>,
        fictitious: Vec<f64>,
        stage_weights: Vec<DVector<f64>>,
        cost: CostModel,
        constraints: Vec<PlayerConstraints>,
    ) -> Result<Self> {
        let table = vec![stage_weights; constraints.len()];
        let spec = Self::from_parts_unchecked(stage_prizes, fictitious, table, cost, constraints)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Assembles a game checking only that dimensions line up.
    ///
    /// Value invariants (positive `ε_k`, nonnegative prizes and weights, positive
    /// price scalings, shared weights, polytope regularity) are not enforced, so
    /// analysis routines can be exercised on deliberately broken instances.
    pub fn from_parts_unchecked(
        stage_prizes: Vec<f64>,
        fictitious: Vec<f64>,
        weights: Vec<Vec<DVector<f64>>>,
        cost: CostModel,
        constraints: Vec<PlayerConstraints>,
    ) -> Result<Self> {
        let n_players = constraints.len();
        let n_stages = stage_prizes.len();
        if n_players == 0 {
            return Err(GameError::InvalidSpec("at least one player is required".into()));
        }
        if n_stages == 0 {
            return Err(GameError::InvalidSpec("at least one stage is required".into()));
        }
        if fictitious.len() != n_stages {
            return Err(GameError::Dimension(format!(
                "{} fictitious participations for {n_stages} stages",
                fictitious.len()
            )));
        }
        if weights.len() != n_players || weights.iter().any(|row| row.len() != n_stages) {
            return Err(GameError::Dimension("weight table must be players × stages".into()));
        }
        let n_categories = weights[0][0].len();
        if n_categories == 0 {
            return Err(GameError::InvalidSpec("at least one allocation category is required".into()));
        }
        if weights.iter().flatten().any(|w| w.len() != n_categories) {
            return Err(GameError::Dimension("all weight vectors must have the same length".into()));
        }
        match &cost {
            CostModel::Linear { beta } => {
                if beta.len() != n_stages {
                    return Err(GameError::Dimension(format!(
                        "{} linear cost coefficients for {n_stages} stages",
                        beta.len()
                    )));
                }
            }
            CostModel::DynamicPrice { alpha, offsets, mask } => {
                if alpha.len() != n_stages || offsets.len() != n_stages {
                    return Err(GameError::Dimension(format!(
                        "dynamic price needs {n_stages} scalings and offsets, got {} and {}",
                        alpha.len(),
                        offsets.len()
                    )));
                }
                if offsets.iter().any(|r| r.len() != n_categories) || mask.len() != n_categories {
                    return Err(GameError::Dimension(format!(
                        "price offsets and mask must have length {n_categories}"
                    )));
                }
            }
        }
        let dim = n_stages * n_categories;
        for (i, c) in constraints.iter().enumerate() {
            if c.dim() != dim {
                return Err(GameError::Dimension(format!(
                    "player {i} constraints act on {} variables, expected {dim}",
                    c.dim()
                )));
            }
        }
        Ok(Self {
            n_players,
            n_stages,
            n_categories,
            stage_prizes,
            fictitious,
            weights,
            cost,
            constraints,
        })
    }

    /// Checks every value invariant and the regularity of each feasible set.
    pub fn validate(&self) -> Result<()> {
        self.validate_inner(true)
    }

    /// Like [`GameSpec::validate`] but accepts polytopes whose inequality rows
    /// have no strictly feasible point, e.g. `u ≤ y` once a state component is
    /// zero. Nonemptiness and boundedness are still enforced.
    pub fn validate_allowing_degenerate(&self) -> Result<()> {
        self.validate_inner(false)
    }

    fn validate_inner(&self, strict: bool) -> Result<()> {
        for (k, &e) in self.fictitious.iter().enumerate() {
            if !(e > 0.0) || !e.is_finite() {
                return Err(GameError::InvalidSpec(format!(
                    "fictitious participation of stage {k} must be positive, got {e}"
                )));
            }
        }
        for (k, &w) in self.stage_prizes.iter().enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(GameError::InvalidSpec(format!(
                    "prize of stage {k} must be nonnegative, got {w}"
                )));
            }
        }
        for k in 0..self.n_stages {
            let w0 = &self.weights[0][k];
            if self.weights.iter().any(|row| &row[k] != w0) {
                return Err(GameError::InvalidSpec(format!(
                    "participation weights differ between players at stage {k}; only shared weights are supported"
                )));
            }
            if w0.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || w0.norm() == 0.0 {
                return Err(GameError::InvalidSpec(format!(
                    "participation weights of stage {k} must be nonnegative with positive norm"
                )));
            }
        }
        match &self.cost {
            CostModel::Linear { beta } => {
                if beta.iter().any(|b| !b.is_finite()) {
                    return Err(GameError::InvalidSpec("linear cost coefficients must be finite".into()));
                }
            }
            CostModel::DynamicPrice { alpha, offsets, mask } => {
                if let Some(k) = alpha.iter().position(|a| !(*a > 0.0) || !a.is_finite()) {
                    return Err(GameError::InvalidSpec(format!(
                        "price scaling of stage {k} must be positive, got {}",
                        alpha[k]
                    )));
                }
                if offsets.iter().flatten().any(|r| !r.is_finite()) {
                    return Err(GameError::InvalidSpec("price offsets must be finite".into()));
                }
                if mask.iter().any(|&d| d != 0.0 && d != 1.0) {
                    return Err(GameError::InvalidSpec("price mask entries must be 0 or 1".into()));
                }
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if strict {
                feasibility::verify_polytope(c, i)?;
            } else {
                feasibility::bounding_box(c, i)?;
            }
        }
        Ok(())
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_stages(&self) -> usize {
        self.n_stages
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    /// Length `K·m` of one player's decision vector.
    pub fn block_dim(&self) -> usize {
        self.n_stages * self.n_categories
    }

    pub fn stage_prizes(&self) -> &[f64] {
        &self.stage_prizes
    }

    pub fn fictitious(&self) -> &[f64] {
        &self.fictitious
    }

    pub fn weight(&self, i: usize, k: usize) -> &DVector<f64> {
        &self.weights[i][k]
    }

    pub fn weight_table(&self) -> &[Vec<DVector<f64>>] {
        &self.weights
    }

    /// True when every player uses the same weights at a given stage.
    pub fn has_shared_weights(&self) -> bool {
        (0..self.n_stages).all(|k| self.weights.iter().all(|row| row[k] == self.weights[0][k]))
    }

    /// True when one weight vector is used by every player at every stage.
    pub fn has_uniform_weights(&self) -> bool {
        let w0 = &self.weights[0][0];
        self.weights.iter().flatten().all(|w| w == w0)
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn constraints(&self, i: usize) -> &PlayerConstraints {
        &self.constraints[i]
    }

    pub fn all_constraints(&self) -> &[PlayerConstraints] {
        &self.constraints
    }

    pub fn check_dims(&self, x: &JointStrategy) -> Result<()> {
        if x.n_players() != self.n_players
            || x.n_stages() != self.n_stages
            || x.n_categories() != self.n_categories
        {
            return Err(GameError::Dimension(format!(
                "strategy is {}×{}×{}, game is {}×{}×{}",
                x.n_players(),
                x.n_stages(),
                x.n_categories(),
                self.n_players,
                self.n_stages,
                self.n_categories
            )));
        }
        Ok(())
    }

    fn check_positive_epsilon(&self, k: usize) -> Result<()> {
        let e = self.fictitious[k];
        if !(e > 0.0) {
            return Err(GameError::InvalidSpec(format!(
                "fictitious participation of stage {k} must be positive, got {e}"
            )));
        }
        Ok(())
    }

    pub fn participation(&self, x: &JointStrategy, i: usize, k: usize) -> f64 {
        self.weights[i][k].dot(&x.stage(i, k))
    }

    /// `Σ_j x_{j,k}`.
    pub(crate) fn stage_total(&self, x: &JointStrategy, k: usize) -> DVector<f64> {
        let mut total = DVector::zeros(self.n_categories);
        for i in 0..self.n_players {
            total += x.stage(i, k);
        }
        total
    }

    fn stage_cost(&self, k: usize, own: DVectorView<'_, f64>, total: &DVector<f64>) -> f64 {
        match &self.cost {
            CostModel::Linear { beta } => beta[k] * own.sum(),
            CostModel::DynamicPrice { alpha, offsets, mask } => {
                let mut c = offsets[k].dot(&own);
                for j in 0..self.n_categories {
                    c += own[j] * mask[j] * alpha[k] * total[j];
                }
                c
            }
        }
    }

    fn add_cost_gradient(
        &self,
        k: usize,
        own: DVectorView<'_, f64>,
        total: &DVector<f64>,
        out: &mut [f64],
    ) {
        match &self.cost {
            CostModel::Linear { beta } => {
                for o in out.iter_mut() {
                    *o += beta[k];
                }
            }
            CostModel::DynamicPrice { alpha, offsets, mask } => {
                for j in 0..self.n_categories {
                    out[j] += alpha[k] * mask[j] * (total[j] + own[j]) + offsets[k][j];
                }
            }
        }
    }

    /// Participations, payoffs, loss and costs of stage `k`.
    pub fn evaluate_stage(&self, x: &JointStrategy, k: usize) -> Result<StageEvaluation> {
        self.check_dims(x)?;
        if k >= self.n_stages {
            return Err(GameError::Dimension(format!("stage {k} out of range 0..{}", self.n_stages)));
        }
        self.check_positive_epsilon(k)?;
        Ok(self.evaluate_stage_unchecked(x, k))
    }

    fn evaluate_stage_unchecked(&self, x: &JointStrategy, k: usize) -> StageEvaluation {
        let prize = self.stage_prizes[k];
        let eps = self.fictitious[k];
        let participations: Vec<f64> = (0..self.n_players).map(|i| self.participation(x, i, k)).collect();
        let total_participation: f64 = participations.iter().sum();
        let denom = total_participation + eps;
        // shares first, so rounding cannot push a payoff or the loss above the prize
        let payoffs = participations.iter().map(|&p| prize * (p / denom)).collect();
        let loss = prize * (eps / denom);
        let total = self.stage_total(x, k);
        let costs = (0..self.n_players)
            .map(|i| self.stage_cost(k, x.stage(i, k), &total))
            .collect();
        StageEvaluation {
            participations,
            total_participation,
            payoffs,
            loss,
            costs,
        }
    }

    /// Total profit `u_i = Σ_k (p_{i,k} − c_{i,k})` of player `i`.
    pub fn total_profit(&self, x: &JointStrategy, i: usize) -> Result<f64> {
        if i >= self.n_players {
            return Err(GameError::Dimension(format!("player {i} out of range 0..{}", self.n_players)));
        }
        Ok(self.profits(x)?[i])
    }

    /// Total profits of every player.
    pub fn profits(&self, x: &JointStrategy) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        let mut out = vec![0.0; self.n_players];
        for k in 0..self.n_stages {
            self.check_positive_epsilon(k)?;
            let ev = self.evaluate_stage_unchecked(x, k);
            for (i, o) in out.iter_mut().enumerate() {
                *o += ev.payoffs[i] - ev.costs[i];
            }
        }
        Ok(out)
    }

    /// Total stage loss `Σ_k Ψ_k`.
    pub fn total_loss(&self, x: &JointStrategy) -> Result<f64> {
        self.check_dims(x)?;
        let mut loss = 0.0;
        for k in 0..self.n_stages {
            self.check_positive_epsilon(k)?;
            loss += self.evaluate_stage_unchecked(x, k).loss;
        }
        Ok(loss)
    }

    /// Total participation cost `Σ_k Σ_i c_{i,k}`.
    pub fn total_cost(&self, x: &JointStrategy) -> Result<f64> {
        self.check_dims(x)?;
        let mut cost = 0.0;
        for k in 0..self.n_stages {
            let total = self.stage_total(x, k);
            for i in 0..self.n_players {
                cost += self.stage_cost(k, x.stage(i, k), &total);
            }
        }
        Ok(cost)
    }

    /// `∇_{x_i} u_i`, stage block `f₁ w − ∇c`.
    pub fn profit_gradient(&self, x: &JointStrategy, i: usize) -> Result<DVector<f64>> {
        if i >= self.n_players {
            return Err(GameError::Dimension(format!("player {i} out of range 0..{}", self.n_players)));
        }
        Ok(self.all_profit_gradients(x)?.swap_remove(i))
    }

    /// `∇_{x_i} u_i` for every player, sharing the per-stage aggregates.
    pub fn all_profit_gradients(&self, x: &JointStrategy) -> Result<Vec<DVector<f64>>> {
        self.check_dims(x)?;
        let m = self.n_categories;
        let mut grads = vec![DVector::zeros(self.block_dim()); self.n_players];
        let mut phi = vec![0.0; self.n_players];
        for k in 0..self.n_stages {
            self.check_positive_epsilon(k)?;
            let prize = self.stage_prizes[k];
            let eps = self.fictitious[k];
            for (i, p) in phi.iter_mut().enumerate() {
                *p = self.participation(x, i, k);
            }
            let total_phi: f64 = phi.iter().sum();
            let denom = total_phi + eps;
            let denom_sq = denom * denom;
            let total = self.stage_total(x, k);
            for (i, g) in grads.iter_mut().enumerate() {
                let others: f64 = phi.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, p)| p).sum();
                let f1 = prize * (others + eps) / denom_sq;
                let block = &mut g.as_mut_slice()[k * m..(k + 1) * m];
                let mut cost_grad = vec![0.0; m];
                self.add_cost_gradient(k, x.stage(i, k), &total, &mut cost_grad);
                let w = &self.weights[i][k];
                for j in 0..m {
                    block[j] = f1 * w[j] - cost_grad[j];
                }
            }
        }
        Ok(grads)
    }

    /// Pseudo-gradient `F(x) = col(−∇_{x_i} u_i)`.
    pub fn pseudo_gradient(&self, x: &JointStrategy) -> Result<DVector<f64>> {
        let grads = self.all_profit_gradients(x)?;
        let dim = self.block_dim();
        let mut out = DVector::zeros(self.n_players * dim);
        for (i, g) in grads.iter().enumerate() {
            out.rows_mut(i * dim, dim).copy_from(&(-g));
        }
        Ok(out)
    }

    /// `f₁ = W_k (Σ_{j≠i} φ_j + ε_k) / (Φ_k + ε_k)²`.
    pub fn f1(&self, x: &JointStrategy, i: usize, k: usize) -> f64 {
        let (phi_i, total) = self.phi_and_total(x, i, k);
        let denom = total + self.fictitious[k];
        self.stage_prizes[k] * (total - phi_i + self.fictitious[k]) / (denom * denom)
    }

    /// `f₂ = −2 f₁ / (Φ_k + ε_k)`.
    pub fn f2(&self, x: &JointStrategy, i: usize, k: usize) -> f64 {
        let (_, total) = self.phi_and_total(x, i, k);
        -2.0 * self.f1(x, i, k) / (total + self.fictitious[k])
    }

    /// `f₃ = −W_k (Φ_k + ε_k − 2φ_{i,k}) / (Φ_k + ε_k)³`.
    pub fn f3(&self, x: &JointStrategy, i: usize, k: usize) -> f64 {
        let (phi_i, total) = self.phi_and_total(x, i, k);
        let denom = total + self.fictitious[k];
        -self.stage_prizes[k] * (denom - 2.0 * phi_i) / denom.powi(3)
    }

    fn phi_and_total(&self, x: &JointStrategy, i: usize, k: usize) -> (f64, f64) {
        let total = (0..self.n_players).map(|j| self.participation(x, j, k)).sum();
        (self.participation(x, i, k), total)
    }

    /// Projection of the zero vector onto each player's set.
    pub fn default_start(&self) -> Result<JointStrategy> {
        let zero = DVector::zeros(self.block_dim());
        let blocks = self
            .constraints
            .iter()
            .map(|c| crate::projection::project(&zero, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(JointStrategy::from_blocks_unchecked(blocks, self.n_stages, self.n_categories))
    }

    /// Checks every player's block against its constraints.
    pub fn check_feasible(&self, x: &JointStrategy, tol: f64) -> Result<()> {
        self.check_dims(x)?;
        for (i, c) in self.constraints.iter().enumerate() {
            c.check_feasible(x.player(i), tol, i)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single_stage(prize: f64, eps: f64, beta: f64, budgets: &[f64]) -> GameSpec {
        GameSpec::new(
            vec![prize],
            vec![eps],
            DVector::from_element(1, 1.0),
            CostModel::linear(vec![beta]),
            budgets.iter().map(|&r| PlayerConstraints::budget(1, r)).collect(),
        )
        .unwrap()
    }

    fn strategy(values: &[f64]) -> JointStrategy {
        JointStrategy::new(values.iter().map(|&v| DVector::from_element(1, v)).collect(), 1, 1).unwrap()
    }

    #[test]
    fn symmetric_split_with_loss() {
        let spec = single_stage(10.0, 1.0, 0.0, &[1.0, 1.0]);
        let ev = spec.evaluate_stage(&strategy(&[1.0, 1.0]), 0).unwrap();
        assert_relative_eq!(ev.payoffs[0], 10.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(ev.payoffs[1], 10.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(ev.loss, 10.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(spec.total_profit(&strategy(&[1.0, 1.0]), 0).unwrap(), 10.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_participation_forfeits_everything() {
        let spec = GameSpec::from_parts_unchecked(
            vec![10.0],
            vec![1.0],
            vec![vec![DVector::from_element(1, 1.0)]; 2],
            CostModel::linear(vec![3.0]),
            vec![PlayerConstraints::budget(1, 1.0); 2],
        )
        .unwrap();
        let x = strategy(&[0.0, 0.0]);
        let ev = spec.evaluate_stage(&x, 0).unwrap();
        assert_eq!(ev.payoffs, vec![0.0, 0.0]);
        assert_eq!(ev.loss, 10.0);
        assert_eq!(ev.costs, vec![0.0, 0.0]);
        assert_eq!(spec.profits(&x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn fleet_sizes_from_case_study() {
        let spec = single_stage(220_000.0, 1.0, 12.0, &[121.0, 275.0, 532.0]);
        let x = strategy(&[121.0, 275.0, 532.0]);
        let ev = spec.evaluate_stage(&x, 0).unwrap();
        for (p, v) in ev.payoffs.iter().zip([121.0, 275.0, 532.0]) {
            assert_relative_eq!(*p, 220_000.0 * v / 929.0, max_relative = 1e-14);
        }
        let mut sum = ev.loss;
        for p in &ev.payoffs {
            sum += p;
        }
        assert!((sum - 220_000.0).abs() <= 1e-10 * 220_000.0);
        assert_relative_eq!(ev.costs[1], 12.0 * 275.0);
    }

    #[test]
    fn gradient_at_origin_single_player() {
        let spec = single_stage(10.0, 1.0, 0.0, &[1.0]);
        let g = spec.profit_gradient(&strategy(&[0.0]), 0).unwrap();
        assert_relative_eq!(g[0], 10.0, epsilon = 1e-14);
    }

    #[test]
    fn symmetric_players_have_equal_gradients() {
        let spec = single_stage(7.0, 0.5, 0.3, &[2.0, 2.0]);
        let x = strategy(&[1.3, 1.3]);
        let g0 = spec.profit_gradient(&x, 0).unwrap();
        let g1 = spec.profit_gradient(&x, 1).unwrap();
        assert_eq!(g0, g1);
        let f = spec.pseudo_gradient(&x).unwrap();
        assert_eq!(f[0], -g0[0]);
        assert_eq!(f[1], -g1[0]);
    }

    #[test]
    fn linear_cost_sums_categories() {
        let spec = GameSpec::new(
            vec![5.0],
            vec![1.0],
            DVector::from_vec(vec![1.0, 0.5]),
            CostModel::linear(vec![2.0]),
            vec![PlayerConstraints::budget(2, 3.0)],
        )
        .unwrap();
        let x = JointStrategy::new(vec![DVector::from_vec(vec![1.0, 2.0])], 1, 2).unwrap();
        let ev = spec.evaluate_stage(&x, 0).unwrap();
        assert_relative_eq!(ev.costs[0], 6.0);
        assert_relative_eq!(ev.participations[0], 2.0);
    }

    #[test]
    fn rejects_bad_specs() {
        let budget = || vec![PlayerConstraints::budget(1, 1.0)];
        let w = || DVector::from_element(1, 1.0);
        assert!(matches!(
            GameSpec::new(vec![1.0], vec![0.0], w(), CostModel::linear(vec![0.0]), budget()),
            Err(GameError::InvalidSpec(_))
        ));
        assert!(matches!(
            GameSpec::new(vec![-1.0], vec![1.0], w(), CostModel::linear(vec![0.0]), budget()),
            Err(GameError::InvalidSpec(_))
        ));
        assert!(matches!(
            GameSpec::new(vec![1.0], vec![1.0], DVector::zeros(1), CostModel::linear(vec![0.0]), budget()),
            Err(GameError::InvalidSpec(_))
        ));
        assert!(matches!(
            GameSpec::new(
                vec![1.0],
                vec![1.0],
                w(),
                CostModel::dynamic(vec![0.0], vec![DVector::zeros(1)]),
                budget()
            ),
            Err(GameError::InvalidSpec(_))
        ));
        assert!(matches!(
            GameSpec::new(vec![1.0, 2.0], vec![1.0], w(), CostModel::linear(vec![0.0]), budget()),
            Err(GameError::Dimension(_))
        ));
        let per_player = vec![
            vec![DVector::from_element(1, 1.0)],
            vec![DVector::from_element(1, 2.0)],
        ];
        let spec = GameSpec::from_parts_unchecked(
            vec![1.0],
            vec![1.0],
            per_player,
            CostModel::linear(vec![0.0]),
            vec![PlayerConstraints::budget(1, 1.0); 2],
        )
        .unwrap();
        assert!(matches!(spec.validate(), Err(GameError::InvalidSpec(_))));
    }

    #[test]
    fn evaluate_rejects_dimension_mismatch() {
        let spec = single_stage(1.0, 1.0, 0.0, &[1.0, 1.0]);
        assert!(matches!(spec.evaluate_stage(&strategy(&[1.0]), 0), Err(GameError::Dimension(_))));
        assert!(matches!(spec.evaluate_stage(&strategy(&[1.0, 1.0]), 1), Err(GameError::Dimension(_))));
    }

    #[test]
    fn evaluate_rejects_nonpositive_epsilon() {
        let spec = GameSpec::from_parts_unchecked(
            vec![1.0],
            vec![-1.0],
            vec![vec![DVector::from_element(1, 1.0)]],
            CostModel::linear(vec![0.0]),
            vec![PlayerConstraints::budget(1, 1.0)],
        )
        .unwrap();
        assert!(matches!(spec.evaluate_stage(&strategy(&[1.0]), 0), Err(GameError::InvalidSpec(_))));
    }

    #[test]
    fn unbounded_or_empty_sets_are_rejected() {
        let w = DVector::from_element(2, 1.0);
        let open = PlayerConstraints::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_element(1, 1.0),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        assert!(matches!(
            GameSpec::new(vec![1.0], vec![1.0], w.clone(), CostModel::linear(vec![0.0]), vec![open]),
            Err(GameError::Unbounded(_))
        ));
        let empty = PlayerConstraints::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, -1.0),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        assert!(matches!(
            GameSpec::new(vec![1.0], vec![1.0], w, CostModel::linear(vec![0.0]), vec![empty]),
            Err(GameError::Infeasible(_))
        ));
    }
}
