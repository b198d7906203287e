//! Result files: CSV tables, JSON solution files and the run manifest.
//!
//! Every file is rendered to bytes first so it can be hashed into the
//! manifest. Floats use Rust's shortest round-trip formatting, which keeps
//! repeated runs byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nalgebra::DVector;
use tullock_core::{GameSpec, JointStrategy};

/// Feasibility slack accepted when a strategy file is read back.
pub const LOAD_TOL: f64 = 1e-8;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines.next().context("empty CSV")?.split(',').map(str::to_string).collect();
        let mut table = Self {
            header,
            rows: Vec::new(),
        };
        for (n, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            ensure!(row.len() == table.header.len(), "CSV row {} has {} fields", n + 1, row.len());
            table.rows.push(row);
        }
        Ok(table)
    }

    /// Values of a named column parsed as floats.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("no column `{name}`"))?;
        self.rows
            .iter()
            .map(|r| r[j].parse::<f64>().with_context(|| format!("bad number `{}` in `{name}`", r[j])))
            .collect()
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

/// A joint strategy as written to disk, with enough context to re-verify it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StrategyFile {
    pub kind: String,
    pub n_players: usize,
    pub n_stages: usize,
    pub n_categories: usize,
    /// One row-major block per player.
    pub blocks: Vec<Vec<f64>>,
    pub profits: Vec<f64>,
    pub welfare: f64,
    pub total_loss: f64,
    /// Largest optimality residual reported by the solver.
    pub residual: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl StrategyFile {
    pub fn from_strategy(kind: &str, spec: &GameSpec, x: &JointStrategy, residual: f64, converged: bool) -> Result<Self> {
        let profits = spec.profits(x)?;
        Ok(Self {
            kind: kind.to_string(),
            n_players: x.n_players(),
            n_stages: x.n_stages(),
            n_categories: x.n_categories(),
            blocks: x.blocks().iter().map(|b| b.iter().copied().collect()).collect(),
            welfare: profits.iter().sum(),
            profits,
            total_loss: spec.total_loss(x)?,
            residual,
            converged,
            extra: BTreeMap::new(),
        })
    }

    pub fn strategy(&self) -> Result<JointStrategy> {
        let blocks = self.blocks.iter().map(|b| DVector::from_column_slice(b)).collect();
        Ok(JointStrategy::new(blocks, self.n_stages, self.n_categories)?)
    }

    /// Re-checks feasibility and the stored profits against `spec`.
    pub fn verify(&self, spec: &GameSpec) -> Result<JointStrategy> {
        let x = self.strategy()?;
        spec.check_feasible(&x, LOAD_TOL)?;
        let profits = spec.profits(&x)?;
        for (i, (a, b)) in profits.iter().zip(&self.profits).enumerate() {
            ensure!(
                (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                "stored profit of player {i} is {b}, recomputed {a}"
            );
        }
        Ok(x)
    }

    pub fn load(path: &Path, spec: &GameSpec) -> Result<(Self, JointStrategy)> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let file: Self = serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
        let x = file.verify(spec).with_context(|| format!("{} fails verification", path.display()))?;
        Ok((file, x))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub files: Vec<FileRecord>,
    /// Seconds per phase. Excluded from determinism comparisons.
    pub wall_times: BTreeMap<String, f64>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Collects files for one run and writes the manifest last.
pub struct RunWriter {
    out_dir: PathBuf,
    files: Vec<FileRecord>,
    wall_times: BTreeMap<String, f64>,
}

impl RunWriter {
    pub fn new(out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir).with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            files: Vec::new(),
            wall_times: BTreeMap::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(FileRecord {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_csv(&mut self, name: &str, table: &CsvTable) -> Result<PathBuf> {
        self.write_bytes(name, table.render().as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write_bytes(name, text.as_bytes())
    }

    pub fn record_time(&mut self, phase: &str, seconds: f64) {
        self.wall_times.insert(phase.to_string(), seconds);
    }

    pub fn finish(self, command: &str, config_sha256: String, seed: u64) -> Result<Manifest> {
        let mut versions = BTreeMap::new();
        versions.insert("tullock-harness".to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert("tullock-core".to_string(), tullock_core::VERSION.to_string());
        let manifest = Manifest {
            command: command.to_string(),
            config_sha256,
            seed,
            versions,
            files: self.files,
            wall_times: self.wall_times,
        };
        let path = self.out_dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(manifest)
    }
}
