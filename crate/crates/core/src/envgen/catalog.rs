//! The benchmark catalog: 300 static, 100 dynamic-box and 100 dynamic-wall
//! environments, their train/test splits, and the on-disk manifest.

use super::dynamic::{generate_dynamic_box, generate_dynamic_wall};
use super::grid::{CAParams, StaticGenOptions, INITIAL_FILLS, SMOOTHING_ITERATIONS};
use super::io::{load_env, save_env};
use super::layout::EnvKind;
use super::{static_environment_with, EnvGenError, EnvironmentSpec};
use crate::seed::{derive_seed, rng_from_seed};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Component, Path};

pub const STATIC_PER_PARAM_SET: usize = 25;
pub const STATIC_COUNT: usize = INITIAL_FILLS.len() * SMOOTHING_ITERATIONS.len() * STATIC_PER_PARAM_SET;
pub const DYNAMIC_COUNT: usize = 100;
pub const TEST_PER_KIND: usize = 50;
pub const STATIC_TRAIN_SIZES: [usize; 5] = [5, 10, 50, 100, 250];

pub const MANIFEST_FORMAT: &str = "barnbench-catalog";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSet {
    pub name: String,
    pub kind: EnvKind,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub master_seed: u64,
    environments: BTreeMap<String, EnvironmentSpec>,
    sets: Vec<EnvSet>,
}

pub fn env_id(kind: EnvKind, index: usize) -> String {
    format!("{}-{index:03}", kind.as_str())
}

impl Catalog {
    pub fn new(master_seed: u64, envs: Vec<EnvironmentSpec>, sets: Vec<EnvSet>) -> Result<Self, EnvGenError> {
        let environments: BTreeMap<_, _> = envs.into_iter().map(|e| (e.id.clone(), e)).collect();
        for set in &sets {
            for m in &set.members {
                match environments.get(m) {
                    None => return Err(EnvGenError::UnknownEnvironment(m.clone())),
                    Some(e) if e.kind() != set.kind => {
                        return Err(EnvGenError::Invalid {
                            field: format!("sets.{}", set.name),
                            message: format!("member {m} is not of kind {}", set.kind),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(Self {
            master_seed,
            environments,
            sets,
        })
    }

    pub fn environments(&self) -> impl Iterator<Item = &EnvironmentSpec> {
        self.environments.values()
    }

    pub fn environment(&self, id: &str) -> Option<&EnvironmentSpec> {
        self.environments.get(id)
    }

    pub fn sets(&self) -> &[EnvSet] {
        &self.sets
    }

    pub fn set(&self, name: &str) -> Result<&EnvSet, EnvGenError> {
        self.sets
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| EnvGenError::UnknownSet(name.to_string()))
    }

    /// Environments of a named set, in set order.
    pub fn resolve(&self, name: &str) -> Result<Vec<&EnvironmentSpec>, EnvGenError> {
        self.set(name)?
            .members
            .iter()
            .map(|m| {
                self.environments
                    .get(m)
                    .ok_or_else(|| EnvGenError::UnknownEnvironment(m.clone()))
            })
            .collect()
    }

    pub fn count(&self, kind: EnvKind) -> usize {
        self.environments.values().filter(|e| e.kind() == kind).count()
    }

    pub fn manifest(&self) -> CatalogManifest {
        let environments = self
            .environments
            .values()
            .map(|e| ManifestEntry {
                id: e.id.clone(),
                kind: e.kind(),
                path: format!("{}/{}.json", e.kind().as_str(), e.id),
                sha256: content_hash(&e.to_json_string()),
            })
            .collect();
        CatalogManifest::new(self.master_seed, environments, self.sets.clone())
    }
}

pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Shuffles the ids and splits off the test set; the rest keeps shuffled order.
fn split_test_train(ids: Vec<String>, rng: &mut rand_chacha::ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    let mut shuffled = ids;
    shuffled.shuffle(rng);
    let train = shuffled.split_off(TEST_PER_KIND.min(shuffled.len()));
    (shuffled, train)
}

/// Generates the full catalog. Each environment's seed depends only on
/// `(master_seed, kind, index)`, so generation runs in parallel.
pub fn generate_benchmark_set(master_seed: u64) -> Result<Catalog, EnvGenError> {
    generate_benchmark_set_with(master_seed, &StaticGenOptions::default())
}

pub fn generate_benchmark_set_with(master_seed: u64, options: &StaticGenOptions) -> Result<Catalog, EnvGenError> {
    let statics: Vec<EnvironmentSpec> = (0..STATIC_COUNT)
        .into_par_iter()
        .map(|i| {
            let params = CAParams::benchmark_set(i / STATIC_PER_PARAM_SET, derive_seed(master_seed, "static", i as u64));
            static_environment_with(&env_id(EnvKind::Static, i), &params, options)
        })
        .collect::<Result<_, _>>()?;
    let boxes: Vec<EnvironmentSpec> = (0..DYNAMIC_COUNT)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, "dynamic-box", i as u64);
            EnvironmentSpec::dynamic_box(&env_id(EnvKind::DynamicBox, i), generate_dynamic_box(seed))
        })
        .collect();
    let walls: Vec<EnvironmentSpec> = (0..DYNAMIC_COUNT)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, "dynamic-wall", i as u64);
            EnvironmentSpec::dynamic_wall(&env_id(EnvKind::DynamicWall, i), generate_dynamic_wall(seed))
        })
        .collect();

    let mut sets = Vec::new();
    for (kind, envs) in [
        (EnvKind::Static, &statics),
        (EnvKind::DynamicBox, &boxes),
        (EnvKind::DynamicWall, &walls),
    ] {
        let mut rng = rng_from_seed(derive_seed(master_seed, &format!("split-{}", kind.as_str()), 0));
        let (test, train) = split_test_train(envs.iter().map(|e| e.id.clone()).collect(), &mut rng);
        sets.push(EnvSet {
            name: format!("{}-test", kind.as_str()),
            kind,
            members: test,
        });
        if kind == EnvKind::Static {
            // Prefixes of one shuffled order, so the subsets nest.
            for size in STATIC_TRAIN_SIZES {
                sets.push(EnvSet {
                    name: format!("static-train-{size}"),
                    kind,
                    members: train[..size.min(train.len())].to_vec(),
                });
            }
        }
        sets.push(EnvSet {
            name: format!("{}-train", kind.as_str()),
            kind,
            members: train,
        });
    }

    let all = statics.into_iter().chain(boxes).chain(walls).collect();
    Catalog::new(master_seed, all, sets)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub kind: EnvKind,
    /// Relative to the catalog directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogManifest {
    pub format: String,
    pub version: u32,
    pub master_seed: u64,
    pub environments: Vec<ManifestEntry>,
    pub sets: Vec<EnvSet>,
    pub catalog_hash: String,
}

impl CatalogManifest {
    pub fn new(master_seed: u64, environments: Vec<ManifestEntry>, sets: Vec<EnvSet>) -> Self {
        let mut m = Self {
            format: MANIFEST_FORMAT.to_string(),
            version: MANIFEST_VERSION,
            master_seed,
            environments,
            sets,
            catalog_hash: String::new(),
        };
        m.catalog_hash = m.compute_hash();
        m
    }

    /// Hash over the environment hashes and set definitions.
    pub fn compute_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{}\n{}\n{}\n", self.format, self.version, self.master_seed));
        for e in &self.environments {
            h.update(format!("env\t{}\t{}\t{}\t{}\n", e.id, e.kind, e.path, e.sha256));
        }
        for s in &self.sets {
            h.update(format!("set\t{}\t{}\t{}\n", s.name, s.kind, s.members.join(",")));
        }
        hex::encode(h.finalize())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self, EnvGenError> {
        let m: CatalogManifest = serde_json::from_str(text).map_err(|e| EnvGenError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), EnvGenError> {
        if self.format != MANIFEST_FORMAT {
            return Err(EnvGenError::Invalid {
                field: "format".into(),
                message: format!("expected {MANIFEST_FORMAT:?}, found {:?}", self.format),
            });
        }
        if self.version != MANIFEST_VERSION {
            return Err(EnvGenError::Invalid {
                field: "version".into(),
                message: format!("unsupported version {}", self.version),
            });
        }
        let mut ids = HashSet::new();
        for (i, e) in self.environments.iter().enumerate() {
            if !ids.insert(e.id.as_str()) {
                return Err(EnvGenError::Invalid {
                    field: format!("environments[{i}].id"),
                    message: format!("duplicate id {}", e.id),
                });
            }
            let rel = Path::new(&e.path);
            let safe = !e.path.is_empty() && rel.components().all(|c| matches!(c, Component::Normal(_)));
            if !safe {
                return Err(EnvGenError::Invalid {
                    field: format!("environments[{i}].path"),
                    message: format!("path {:?} must be relative and stay inside the catalog", e.path),
                });
            }
        }
        for s in &self.sets {
            if let Some(m) = s.members.iter().find(|m| !ids.contains(m.as_str())) {
                return Err(EnvGenError::UnknownEnvironment(m.clone()));
            }
        }
        let expected = self.compute_hash();
        if expected != self.catalog_hash {
            return Err(EnvGenError::HashMismatch {
                what: "catalog".into(),
                expected,
                found: self.catalog_hash.clone(),
            });
        }
        Ok(())
    }
}

/// Writes every environment file plus `manifest.json`; returns the manifest.
pub fn save_catalog(dir: &Path, catalog: &Catalog) -> Result<CatalogManifest, EnvGenError> {
    let manifest = catalog.manifest();
    for entry in &manifest.environments {
        let env = catalog
            .environment(&entry.id)
            .ok_or_else(|| EnvGenError::UnknownEnvironment(entry.id.clone()))?;
        save_env(&dir.join(&entry.path), env)?;
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_json_string()).map_err(|e| EnvGenError::io(&path, e))?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<CatalogManifest, EnvGenError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| EnvGenError::io(&path, e))?;
    CatalogManifest::from_json_str(&text)
}

/// Loads and hash-verifies every environment listed in the manifest.
pub fn load_catalog(dir: &Path) -> Result<Catalog, EnvGenError> {
    let manifest = load_manifest(dir)?;
    let envs = manifest
        .environments
        .par_iter()
        .map(|entry| {
            let path = dir.join(&entry.path);
            let text = fs::read_to_string(&path).map_err(|e| EnvGenError::io(&path, e))?;
            let found = content_hash(&text);
            if found != entry.sha256 {
                return Err(EnvGenError::HashMismatch {
                    what: entry.path.clone(),
                    expected: entry.sha256.clone(),
                    found,
                });
            }
            let env = load_env(&path)?;
            if env.id != entry.id || env.kind() != entry.kind {
                return Err(EnvGenError::Invalid {
                    field: entry.path.clone(),
                    message: format!("file holds {} ({}), manifest lists {} ({})", env.id, env.kind(), entry.id, entry.kind),
                });
            }
            Ok(env)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Catalog::new(manifest.master_seed, envs, manifest.sets)
}
