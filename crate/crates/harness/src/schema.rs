//! JSON input format. Matrices are nested arrays, row-major.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use tullock_core::blotto::BlottoSpec;
use tullock_core::rhg::{MarketProfile, RhgPlayerSpec};
use tullock_core::{CostModel, GameSpec, PlayerConstraints};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub version: u32,
    /// Free-text units per field name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub units: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<ConstraintSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhg: Option<RhgSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blotto: Option<BlottoSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub n_players: usize,
    pub n_stages: usize,
    pub n_categories: usize,
    pub prizes: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// One vector shared by every stage, or one per stage.
    pub weights: Weights,
    pub cost: CostSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Weights {
    Shared(Vec<f64>),
    PerStage(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSection {
    Linear {
        beta: Vec<f64>,
    },
    Dynamic {
        alpha: Vec<f64>,
        offsets: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixRhs {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ineq: Option<MatrixRhs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq: Option<MatrixRhs>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BlottoSection {
    pub budgets: Vec<f64>,
    /// Unit costs at θ = 1.
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RhgPlayerSection {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub y0: Vec<f64>,
    pub p_y: Vec<f64>,
    pub p_u: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub prizes: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub alpha: Vec<f64>,
    pub offsets: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RhgSection {
    pub players: Vec<RhgPlayerSection>,
    pub market: MarketSection,
    pub horizon: usize,
}

fn matrix(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != ncols) {
        bail!("{what}: row {r} has {} entries, expected {ncols}", row.len());
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

fn matrix_auto(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    matrix(rows, ncols, what)
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read spec file {}", path.display()))?;
        let spec: SpecFile =
            serde_json::from_str(&text).with_context(|| format!("cannot parse spec file {}", path.display()))?;
        ensure!(
            spec.version == SCHEMA_VERSION,
            "spec file {} has schema version {}, this build reads version {SCHEMA_VERSION}",
            path.display(),
            spec.version
        );
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    fn game_section(&self) -> Result<&GameSection> {
        self.game.as_ref().context("spec file has no `game` section")
    }

    /// The fully validated game described by `game` and `constraints`.
    pub fn game_spec(&self) -> Result<GameSpec> {
        let g = self.game_section()?;
        let (n, k, m) = (g.n_players, g.n_stages, g.n_categories);
        ensure!(self.constraints.len() == n, "{} constraint blocks for {n} players", self.constraints.len());
        ensure!(g.prizes.len() == k && g.epsilons.len() == k, "prizes and epsilons need {k} entries");
        let dim = k * m;
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| -> Result<PlayerConstraints> {
                let (ai, bi) = match &c.ineq {
                    Some(s) => (matrix(&s.a, dim, &format!("player {i} ineq.A"))?, vector(&s.b)),
                    None => (DMatrix::zeros(0, dim), DVector::zeros(0)),
                };
                let (ae, be) = match &c.eq {
                    Some(s) => (matrix(&s.a, dim, &format!("player {i} eq.A"))?, vector(&s.b)),
                    None => (DMatrix::zeros(0, dim), DVector::zeros(0)),
                };
                Ok(PlayerConstraints::new(ai, bi, ae, be)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let cost = match &g.cost {
            CostSection::Linear { beta } => CostModel::linear(beta.clone()),
            CostSection::Dynamic { alpha, offsets, mask } => {
                let offsets = offsets.iter().map(|r| vector(r)).collect();
                match mask {
                    None => CostModel::dynamic(alpha.clone(), offsets),
                    Some(mask) => CostModel::DynamicPrice {
                        alpha: alpha.clone(),
                        offsets,
                        mask: vector(mask),
                    },
                }
            }
        };
        let spec = match &g.weights {
            Weights::Shared(w) => {
                ensure!(w.len() == m, "weights need {m} entries");
                GameSpec::new(g.prizes.clone(), g.epsilons.clone(), vector(w), cost, constraints)?
            }
            Weights::PerStage(ws) => {
                ensure!(ws.len() == k, "per-stage weights need {k} vectors");
                GameSpec::with_stage_weights(
                    g.prizes.clone(),
                    g.epsilons.clone(),
                    ws.iter().map(|w| vector(w)).collect(),
                    cost,
                    constraints,
                )?
            }
        };
        Ok(spec)
    }

    /// The Blotto game with unit costs `θ·β`; `epsilon` overrides every `ε_k`.
    pub fn blotto_spec(&self, theta: f64, epsilon: Option<f64>) -> Result<BlottoSpec> {
        let b = self.blotto.as_ref().context("spec file has no `blotto` section")?;
        let g = self.game_section()?;
        let fictitious = match epsilon {
            Some(e) => vec![e; g.prizes.len()],
            None => g.epsilons.clone(),
        };
        Ok(BlottoSpec::new(
            b.budgets.clone(),
            g.prizes.clone(),
            b.betas.iter().map(|x| x * theta).collect(),
            fictitious,
        )?)
    }

    pub fn rhg_parts(&self) -> Result<(Vec<RhgPlayerSpec>, MarketProfile, usize)> {
        let r = self.rhg.as_ref().context("spec file has no `rhg` section")?;
        let players = r
            .players
            .iter()
            .enumerate()
            .map(|(i, p)| -> Result<RhgPlayerSpec> {
                let a = matrix_auto(&p.a, &format!("rhg player {i} A"))?;
                let b = matrix_auto(&p.b, &format!("rhg player {i} B"))?;
                let g = matrix(&p.g, a.nrows(), &format!("rhg player {i} G"))?;
                let h = matrix(&p.h, b.ncols(), &format!("rhg player {i} H"))?;
                Ok(RhgPlayerSpec::new(
                    a,
                    b,
                    g,
                    h,
                    p.d.iter().map(|d| vector(d)).collect(),
                    vector(&p.y0),
                    vector(&p.p_y),
                    vector(&p.p_u),
                )?)
            })
            .collect::<Result<Vec<_>>>()?;
        let market = MarketProfile {
            prizes: r.market.prizes.clone(),
            fictitious: r.market.epsilons.clone(),
            alpha: r.market.alpha.clone(),
            offsets: r.market.offsets.iter().map(|o| vector(o)).collect(),
        };
        Ok((players, market, r.horizon))
    }

    /// Spec file for a Blotto game at θ = 1.
    pub fn from_blotto(spec: &BlottoSpec) -> Self {
        let k = spec.n_battlefields();
        let mut units = BTreeMap::new();
        units.insert("prizes".into(), "currency per battlefield".into());
        units.insert("budgets".into(), "vehicles".into());
        units.insert("betas".into(), "currency per vehicle at theta = 1".into());
        units.insert("epsilons".into(), "vehicles (fictitious)".into());
        Self {
            version: SCHEMA_VERSION,
            units,
            game: Some(GameSection {
                n_players: spec.n_players(),
                n_stages: k,
                n_categories: 1,
                prizes: spec.prizes.clone(),
                epsilons: spec.fictitious.clone(),
                weights: Weights::Shared(vec![1.0]),
                cost: CostSection::Linear {
                    beta: spec.unit_costs.clone(),
                },
            }),
            constraints: spec
                .budgets
                .iter()
                .map(|&r| ConstraintSection {
                    ineq: None,
                    eq: Some(MatrixRhs {
                        a: vec![vec![1.0; k]],
                        b: vec![r],
                    }),
                })
                .collect(),
            rhg: None,
            blotto: Some(BlottoSection {
                budgets: spec.budgets.clone(),
                betas: spec.unit_costs.clone(),
            }),
        }
    }

    /// Spec file for a receding-horizon game.
    pub fn from_rhg(players: &[RhgPlayerSpec], market: &MarketProfile, horizon: usize, units: BTreeMap<String, String>) -> Self {
        Self {
            version: SCHEMA_VERSION,
            units,
            game: None,
            constraints: Vec::new(),
            rhg: Some(RhgSection {
                players: players
                    .iter()
                    .map(|p| RhgPlayerSection {
                        a: rows_of(&p.a),
                        b: rows_of(&p.b),
                        g: rows_of(&p.g),
                        h: rows_of(&p.h),
                        d: p.d.iter().map(|d| d.iter().copied().collect()).collect(),
                        y0: p.y0.iter().copied().collect(),
                        p_y: p.p_y.iter().copied().collect(),
                        p_u: p.p_u.iter().copied().collect(),
                    })
                    .collect(),
                market: MarketSection {
                    prizes: market.prizes.clone(),
                    epsilons: market.fictitious.clone(),
                    alpha: market.alpha.clone(),
                    offsets: market.offsets.iter().map(|o| o.iter().copied().collect()).collect(),
                },
                horizon,
            }),
            blotto: None,
        }
    }
}
