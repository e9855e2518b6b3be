//! Experiment configs, training runs and the run directory layout.
//!
//! ```text
//! <out>/manifest.json         config, catalog hash, seeds, evaluation plan
//! <out>/metrics.csv           one row per (train set, seed, checkpoint, eval set)
//! <out>/runs/<set>/seed-<s>/  rows.csv once the seed is complete, checkpoints/step-<n>.json
//! ```

use super::controller::ControllerFactory;
use super::eval::{evaluate, EvalPlan};
use super::metrics::Metrics;
use super::{thread_cap, BenchError};
use crate::envgen::{load_catalog, Catalog, EnvironmentSpec};
use crate::rl::{Technique, TrainConfig, Trainer};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const RUN_MANIFEST_FORMAT: &str = "barnbench-run";
pub const EXPERIMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    /// Catalog directory; the command line may override it.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    /// One training run per set and seed.
    pub train_sets: Vec<String>,
    pub eval_sets: Vec<String>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub eval: EvalPlan,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn new(train_sets: &[&str], eval_sets: &[&str], seeds: &[u64], train: TrainConfig) -> Self {
        Self {
            version: EXPERIMENT_VERSION,
            name: String::new(),
            catalog: None,
            train_sets: train_sets.iter().map(|s| s.to_string()).collect(),
            eval_sets: eval_sets.iter().map(|s| s.to_string()).collect(),
            seeds: seeds.to_vec(),
            eval: EvalPlan::default(),
            train,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, BenchError> {
        let c: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.version != EXPERIMENT_VERSION {
            return Err(BenchError::Config(format!("unsupported config version {}", self.version)));
        }
        if self.train_sets.is_empty() || self.eval_sets.is_empty() || self.seeds.is_empty() {
            return Err(BenchError::Config("train_sets, eval_sets and seeds must be non-empty".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(BenchError::Config("seeds must be distinct".into()));
        }
        if !(self.eval.gamma > 0.0 && self.eval.gamma <= 1.0) {
            return Err(BenchError::Config("eval.gamma must lie in (0, 1]".into()));
        }
        self.train.validate()?;
        Ok(())
    }

    /// Checks that every referenced set exists.
    pub fn validate_catalog(&self, catalog: &Catalog) -> Result<(), BenchError> {
        for s in self.train_sets.iter().chain(&self.eval_sets) {
            catalog.set(s)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub config: ExperimentConfig,
    pub catalog_hash: String,
    pub catalog_master_seed: u64,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| BenchError::io(&path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| BenchError::io(&path, e))?;
        if m.format != RUN_MANIFEST_FORMAT || m.version != EXPERIMENT_VERSION {
            return Err(BenchError::io(&path, "not a run manifest of a supported version"));
        }
        Ok(m)
    }
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub technique: Technique,
    pub history: usize,
    pub train_set: String,
    pub train_envs: usize,
    pub seed: u64,
    pub steps: u64,
    pub eval_set: String,
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub success_rate: f64,
    pub mean_survival_time: Option<f64>,
    pub mean_traversal_time: Option<f64>,
    pub mean_cost_return: f64,
}

impl MetricsRow {
    fn new(cfg: &TrainConfig, train_set: &str, train_envs: usize, seed: u64, steps: u64, eval_set: &str, m: &Metrics) -> Self {
        Self {
            technique: cfg.technique,
            history: cfg.history,
            train_set: train_set.into(),
            train_envs,
            seed,
            steps,
            eval_set: eval_set.into(),
            episodes: m.episodes,
            successes: m.successes,
            collisions: m.collisions,
            timeouts: m.timeouts,
            success_rate: m.success_rate,
            mean_survival_time: m.mean_survival_time,
            mean_traversal_time: m.mean_traversal_time,
            mean_cost_return: m.mean_cost_return,
        }
    }
}

pub(crate) fn write_rows(path: &Path, rows: &[MetricsRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| BenchError::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::io(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub(crate) fn read_rows(path: &Path) -> Result<Vec<MetricsRow>, BenchError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::io(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| BenchError::io(path, e))).collect()
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub catalog: Option<PathBuf>,
    /// Reuse seeds already completed in the output directory.
    pub resume: bool,
}

fn write_atomic(path: &Path, text: &str) -> Result<(), BenchError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| BenchError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| BenchError::io(path, e))
}

/// Trains every (train set, seed) pair, evaluating at each checkpoint.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, options: &RunOptions) -> Result<PathBuf, BenchError> {
    config.validate()?;
    let catalog_dir = options
        .catalog
        .clone()
        .or_else(|| config.catalog.clone())
        .ok_or_else(|| BenchError::Config("no catalog directory given".into()))?;
    let catalog = load_catalog(&catalog_dir)?;
    config.validate_catalog(&catalog)?;
    let manifest = RunManifest {
        format: RUN_MANIFEST_FORMAT.into(),
        version: EXPERIMENT_VERSION,
        config: config.clone(),
        catalog_hash: catalog.manifest().catalog_hash,
        catalog_master_seed: catalog.master_seed,
    };
    if out.join("manifest.json").exists() {
        if !options.resume {
            return Err(BenchError::Config(format!("{} already holds a run; pass resume to continue it", out.display())));
        }
        let old = RunManifest::load(out)?;
        if old != manifest {
            return Err(BenchError::Incompatible(format!("{} was started with a different config or catalog", out.display())));
        }
    }
    fs::create_dir_all(out).map_err(|e| BenchError::io(out, e))?;
    write_atomic(
        &out.join("manifest.json"),
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )?;

    let mut train = config.train.clone();
    if let Some(cap) = thread_cap() {
        train.workers = train.workers.min(cap);
    }
    let eval_sets: Vec<(String, Vec<&EnvironmentSpec>)> = config
        .eval_sets
        .iter()
        .map(|s| Ok((s.clone(), catalog.resolve(s)?)))
        .collect::<Result<_, BenchError>>()?;

    let mut all = Vec::new();
    for set in &config.train_sets {
        let envs: Vec<Arc<EnvironmentSpec>> = catalog.resolve(set)?.into_iter().map(|e| Arc::new(e.clone())).collect();
        for &seed in &config.seeds {
            let dir = out.join("runs").join(set).join(format!("seed-{seed}"));
            let rows_path = dir.join("rows.csv");
            if rows_path.exists() {
                log::info!("{set} seed {seed}: already complete");
                all.extend(read_rows(&rows_path)?);
                continue;
            }
            let ck_dir = dir.join("checkpoints");
            fs::create_dir_all(&ck_dir).map_err(|e| BenchError::io(&ck_dir, e))?;
            log::info!("{set} seed {seed}: training {} for {} steps", train.technique, train.total_steps);
            let mut trainer = Trainer::new(train.clone(), envs.clone(), seed)?;
            let mut rows = Vec::new();
            let mut failure = None;
            trainer.train(|tr, steps| {
                let policy = tr.policy();
                let path = ck_dir.join(format!("step-{steps}.json"));
                if let Err(e) = policy.to_checkpoint().save(&path) {
                    failure = Some(BenchError::from(e));
                    return Ok(());
                }
                for (name, members) in &eval_sets {
                    match evaluate(members, &policy as &dyn ControllerFactory, &config.eval, &train.sim) {
                        Ok((m, _)) => {
                            log::info!("{set} seed {seed} @ {steps}: {name} success {:.3}", m.success_rate);
                            rows.push(MetricsRow::new(&train, set, envs.len(), seed, steps, name, &m));
                        }
                        Err(e) => {
                            failure = Some(e);
                            return Ok(());
                        }
                    }
                }
                Ok(())
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            let tmp = rows_path.with_extension("tmp");
            write_rows(&tmp, &rows)?;
            fs::rename(&tmp, &rows_path).map_err(|e| BenchError::io(&rows_path, e))?;
            all.extend(rows);
        }
    }
    write_rows(&out.join("metrics.csv"), &all)?;
    Ok(out.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_validation() {
        let c = ExperimentConfig::new(&["static-train-5"], &["static-test"], &[0, 1, 2], TrainConfig::default());
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        let minimal = "version = 1\ntrain_sets = [\"a\"]\neval_sets = [\"b\"]\nseeds = [1]\n[train]\ntechnique = \"dyna\"\nhistory = 4\n";
        let m = ExperimentConfig::from_toml_str(minimal).unwrap();
        assert_eq!(m.train.technique, Technique::Dyna);
        assert_eq!(m.train.dyna_k, 1);
        for bad in [
            minimal.replace("version = 1", "version = 2"),
            minimal.replace("seeds = [1]", "seeds = []"),
            minimal.replace("seeds = [1]", "seeds = [1, 1]"),
            minimal.replace("history = 4", "history = 5"),
            minimal.replace("technique = \"dyna\"", "technique = \"sac\""),
            minimal.replace("[train]", "bogus = 1\n[train]"),
        ] {
            assert!(ExperimentConfig::from_toml_str(&bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn missing_catalog_fails_before_training() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::new(&["static-train-5"], &["static-test"], &[0], TrainConfig::default());
        let opts = RunOptions {
            catalog: Some(dir.path().join("nope")),
            resume: false,
        };
        assert!(matches!(run_experiment(&c, &dir.path().join("out"), &opts), Err(BenchError::Catalog(_))));
        assert!(!dir.path().join("out").exists());
    }
}
