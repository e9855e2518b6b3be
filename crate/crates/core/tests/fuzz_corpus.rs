//! The checked-in fuzz seeds must stay valid inputs for their targets.

use barnbench::bench::ExperimentConfig;
use barnbench::envgen::{CatalogManifest, EnvironmentSpec};
use barnbench::nn::Checkpoint;
use barnbench::rl::TrainedPolicy;
use barnbench::sim::trace::{replay, EpisodeTrace};
use std::fs;
use std::path::{Path, PathBuf};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed-"))
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn env_seeds_round_trip() {
    for (p, text) in seeds("env_json") {
        let env = EnvironmentSpec::from_json_str(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(EnvironmentSpec::from_json_str(&env.to_json_string()).unwrap(), env);
    }
}

#[test]
fn manifest_seeds_validate() {
    for (p, text) in seeds("catalog_manifest") {
        let m = CatalogManifest::from_json_str(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        m.validate().unwrap();
        assert_eq!(CatalogManifest::from_json_str(&m.to_json_string()).unwrap(), m);
    }
}

#[test]
fn checkpoint_seeds_load_as_policies() {
    for (p, text) in seeds("checkpoint") {
        let ck = Checkpoint::from_json_str(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        TrainedPolicy::from_checkpoint(&ck).unwrap();
        assert_eq!(Checkpoint::from_json_str(&ck.to_json_string()).unwrap(), ck);
    }
}

#[test]
fn trace_seeds_replay() {
    for (p, text) in seeds("trace_jsonl") {
        let tr = EpisodeTrace::from_jsonl_str(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(replay(&tr).unwrap(), tr.steps.len());
    }
}

#[test]
fn config_seeds_parse() {
    for (p, text) in seeds("experiment_config") {
        let c = ExperimentConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }
}
