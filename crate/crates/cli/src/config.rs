//! Experiment configuration files.
//!
//! A run file is TOML:
//!
//! ```toml
//! run_id = "circle"
//! field = "phi1"
//! method = "resdf"          # resdf | pinn | fmm1 | fmm2
//! out = "runs"
//!
//! [points]
//! kind = "uniform"          # uniform | random
//! n_per_side = 128
//!
//! [net]
//! width = 64
//! depth = 4
//!
//! [train]
//! epoch_cap = 20000
//! clip_m = 0.1
//! ```
//!
//! Every key is optional. A sweep file holds the same keys as a base plus a
//! `[matrix]` table of arrays (`field`, `method`, `n_per_side`, `width`,
//! `depth`, `seed`) expanded as a cartesian product, and/or `[[runs]]` tables
//! merged over the base.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use redist::train::{DecayLimit, TrainingConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Resdf,
    Pinn,
    Fmm1,
    Fmm2,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Resdf => "resdf",
            Method::Pinn => "pinn",
            Method::Fmm1 => "fmm1",
            Method::Fmm2 => "fmm2",
        }
    }

    pub fn is_network(self) -> bool {
        matches!(self, Method::Resdf | Method::Pinn)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Uniform,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointsConfig {
    pub kind: PointKind,
    /// Nodes per side of a uniform grid.
    pub n_per_side: usize,
    /// Number of random points.
    pub count: Option<usize>,
    pub seed: u64,
}

impl Default for PointsConfig {
    fn default() -> Self {
        PointsConfig {
            kind: PointKind::Uniform,
            n_per_side: 128,
            count: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub width: usize,
    /// Hidden layers minus one.
    pub depth: usize,
    /// Radius of the sphere the scalar baseline starts from.
    pub pinn_init_radius: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            width: 64,
            depth: 4,
            pinn_init_radius: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay_factor: f64,
    pub patience_evals: u32,
    pub eval_every: usize,
    pub max_decays: Option<u32>,
    /// Alternative stop rule: total lr reduction factor.
    pub max_reduction: Option<f64>,
    /// Weight bound; a non-positive value disables clipping. Unset means 0.1
    /// for `resdf` and no clipping for `pinn`.
    pub clip_m: Option<f64>,
    pub clip_output: bool,
    pub eta: f64,
    pub lambda: f64,
    pub seed: u64,
    pub epoch_cap: usize,
    pub checkpoints: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let d = TrainingConfig::default();
        TrainConfig {
            lr0: d.lr0,
            decay_factor: d.decay_factor,
            patience_evals: d.patience_evals,
            eval_every: d.eval_every,
            max_decays: None,
            max_reduction: None,
            clip_m: None,
            clip_output: d.clip_output,
            eta: d.eta,
            lambda: redist::loss::DEFAULT_LAMBDA,
            seed: d.seed,
            epoch_cap: d.epoch_cap,
            checkpoints: true,
        }
    }
}

impl TrainConfig {
    pub fn to_training(&self, method: Method) -> Result<TrainingConfig> {
        let decay_limit = match (self.max_decays, self.max_reduction) {
            (Some(_), Some(_)) => bail!("set only one of train.max_decays and train.max_reduction"),
            (None, Some(r)) => DecayLimit::Reduction(r),
            (Some(n), None) => DecayLimit::Events(n),
            (None, None) => TrainingConfig::default().decay_limit,
        };
        let cfg = TrainingConfig {
            lr0: self.lr0,
            decay_factor: self.decay_factor,
            patience_evals: self.patience_evals,
            eval_every: self.eval_every,
            decay_limit,
            clip_m: match self.clip_m {
                Some(m) => (m > 0.0).then_some(m),
                None if method == Method::Resdf => TrainingConfig::default().clip_m,
                None => None,
            },
            clip_output: self.clip_output,
            eta: self.eta,
            seed: self.seed,
            epoch_cap: self.epoch_cap,
            ..TrainingConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Evaluation and dump grid; 256 in 2D and 64 in 3D when unset.
    pub n_per_side: Option<usize>,
    /// Interface samples for the `V` error on `Γ`.
    pub interface_points: Option<usize>,
    /// Point-cloud size for fields without a closed-form distance.
    pub cloud_points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Defaults to a name derived from the other settings.
    pub run_id: Option<String>,
    pub field: String,
    pub method: Method,
    /// Parent directory; the run writes into `out/<run_id>`.
    pub out: PathBuf,
    pub points: PointsConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            run_id: None,
            field: "phi1".into(),
            method: Method::Resdf,
            out: PathBuf::from("runs"),
            points: PointsConfig::default(),
            net: NetConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn run_id(&self) -> String {
        if let Some(id) = &self.run_id {
            return id.clone();
        }
        let pts = match self.points.kind {
            PointKind::Uniform => format!("n{}", self.points.n_per_side),
            PointKind::Random => format!("r{}", self.points.count.unwrap_or(0)),
        };
        let mut id = format!("{}_{}_{}", sanitize(&self.field), self.method.name(), pts);
        if self.method.is_network() {
            id += &format!(
                "_w{}_d{}_s{}",
                self.net.width, self.net.depth, self.train.seed
            );
        }
        id
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out.join(self.run_id())
    }

    /// Checks everything that does not need the field.
    pub fn validate(&self) -> Result<()> {
        let id = self.run_id();
        if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
            bail!("run_id `{id}` is not a valid directory name");
        }
        if self.points.kind == PointKind::Random {
            if self.points.count.unwrap_or(0) == 0 {
                bail!("random points need points.count >= 1");
            }
            if !self.method.is_network() {
                bail!("fast marching needs a uniform grid");
            }
        }
        if self.points.n_per_side < 2 {
            bail!("points.n_per_side must be at least 2");
        }
        if self.method.is_network() {
            if self.net.width == 0 {
                bail!("net.width must be positive");
            }
            self.train.to_training(self.method)?;
        }
        Ok(())
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

const MATRIX_KEYS: [&str; 6] = ["field", "method", "n_per_side", "width", "depth", "seed"];

fn set_key(table: &mut toml::Table, key: &str, value: toml::Value) {
    let (section, name) = match key {
        "n_per_side" => (Some("points"), key),
        "width" | "depth" => (Some("net"), key),
        "seed" => (Some("train"), key),
        _ => (None, key),
    };
    match section {
        None => {
            table.insert(name.into(), value);
        }
        Some(s) => {
            let sub = table
                .entry(s)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            if let Some(t) = sub.as_table_mut() {
                t.insert(name.into(), value);
            }
        }
    }
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Expands a sweep file into its list of runs.
pub fn parse_sweep(text: &str) -> Result<Vec<ExperimentConfig>> {
    let mut root: toml::Table = toml::from_str(text)?;
    let matrix = root.remove("matrix");
    let runs = root.remove("runs");
    let base = root;

    let mut tables = Vec::new();
    match runs {
        Some(toml::Value::Array(items)) => {
            for item in items {
                let toml::Value::Table(t) = item else {
                    bail!("every [[runs]] entry must be a table");
                };
                let mut merged = base.clone();
                merge(&mut merged, &t);
                tables.push(merged);
            }
        }
        Some(_) => bail!("`runs` must be an array of tables"),
        None => tables.push(base.clone()),
    }
    if tables.is_empty() {
        bail!("sweep has no runs");
    }

    if let Some(m) = matrix {
        let toml::Value::Table(m) = m else {
            bail!("`matrix` must be a table");
        };
        for key in m.keys() {
            if !MATRIX_KEYS.contains(&key.as_str()) {
                bail!(
                    "unknown matrix key `{key}`; valid keys: {}",
                    MATRIX_KEYS.join(", ")
                );
            }
        }
        for key in MATRIX_KEYS {
            let Some(values) = m.get(key) else { continue };
            let toml::Value::Array(values) = values else {
                bail!("matrix.{key} must be an array");
            };
            if values.is_empty() {
                bail!("matrix.{key} is empty");
            }
            let mut next = Vec::with_capacity(tables.len() * values.len());
            for t in &tables {
                for v in values {
                    let mut t = t.clone();
                    set_key(&mut t, key, v.clone());
                    next.push(t);
                }
            }
            tables = next;
        }
    }

    let mut configs = Vec::with_capacity(tables.len());
    for t in tables {
        let fixed_id = t.contains_key("run_id");
        let mut cfg: ExperimentConfig = toml::Value::Table(t).try_into()?;
        if fixed_id && !configs.is_empty() {
            // a shared run_id would make every run write into one directory
            cfg.run_id = cfg.run_id.map(|id| format!("{id}_{}", configs.len()));
        }
        configs.push(cfg);
    }
    let mut seen = std::collections::HashSet::new();
    for c in &configs {
        if !seen.insert(c.run_id()) {
            bail!("duplicate run_id `{}` in sweep", c.run_id());
        }
    }
    Ok(configs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.run_id(), "phi1_resdf_n128_w64_d4_s0");
        c.validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::default();
        c.method = Method::Fmm2;
        c.points.n_per_side = 64;
        c.train.max_decays = Some(3);
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse("feild = \"phi1\"").is_err());
        assert!(ExperimentConfig::parse("[net]\nwidht = 3").is_err());
        assert!(ExperimentConfig::parse("method = \"fmm3\"").is_err());
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::default();
        c.points.kind = PointKind::Random;
        assert!(c.validate().is_err());
        c.points.count = Some(100);
        c.validate().unwrap();
        c.method = Method::Fmm1;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.train.max_decays = Some(4);
        c.train.max_reduction = Some(2.0);
        assert!(c.validate().is_err());
        c.train.max_reduction = None;
        c.train.lr0 = -1.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.run_id = Some("../x".into());
        assert!(c.validate().is_err());
    }

    #[test]
    fn matrix_is_a_cartesian_product() {
        let runs = parse_sweep(
            "field = \"phi1\"\n[matrix]\nwidth = [32, 64, 128]\nn_per_side = [64, 128]\n",
        )
        .unwrap();
        assert_eq!(runs.len(), 6);
        let ids: std::collections::HashSet<_> = runs.iter().map(|r| r.run_id()).collect();
        assert_eq!(ids.len(), 6);
        assert!(runs
            .iter()
            .any(|r| r.net.width == 128 && r.points.n_per_side == 64));
    }

    #[test]
    fn runs_merge_over_base() {
        let text = "method = \"fmm2\"\n[points]\nn_per_side = 64\n[[runs]]\nfield = \"phi4\"\n[[runs]]\nfield = \"cone\"\n[runs.points]\nn_per_side = 65\n";
        let runs = parse_sweep(text).unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].points.n_per_side, 64);
        assert_eq!(runs[1].points.n_per_side, 65);
        assert!(runs.iter().all(|r| r.method == Method::Fmm2));
    }

    #[test]
    fn bad_matrices() {
        assert!(parse_sweep("runs = []").is_err());
        assert!(parse_sweep("[matrix]\ncolour = [1]").is_err());
        assert!(parse_sweep("[matrix]\nwidth = []").is_err());
        assert!(parse_sweep("[matrix]\nwidth = 3").is_err());
        assert!(parse_sweep("[[runs]]\nfield = \"a\"\n[[runs]]\nfield = \"a\"").is_err());
    }
}
