use super::experiment::{read_rows, MetricsRow, RunManifest};
use super::plot::line_chart;
use super::BenchError;
use crate::rl::Technique;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub cells: usize,
    pub files: Vec<PathBuf>,
}

/// Mean and population standard deviation; values are sorted first so the
/// result does not depend on seed order.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Success fractions as a percentage cell, `"mean ± std"` rounded half away
/// from zero to whole percent; a single seed has no spread (`"70 ± –"`).
pub fn format_cell(rates: &[f64]) -> String {
    if rates.is_empty() {
        return "–".into();
    }
    let (m, s) = mean_std(rates);
    let m = (100.0 * m).round() as i64;
    if rates.len() == 1 {
        format!("{m} ± –")
    } else {
        format!("{m} ± {}", (100.0 * s).round() as i64)
    }
}

fn format_seconds(values: &[Option<f64>]) -> String {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    match v.len() {
        0 => "–".into(),
        1 => format!("{:.1} ± –", v[0]),
        _ => {
            let (m, s) = mean_std(&v);
            format!("{m:.1} ± {s:.1}")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    eval_set: String,
    technique: Technique,
    history: usize,
    train_envs: usize,
    train_set: String,
    steps: u64,
}

#[derive(Debug, Serialize)]
struct ReportRow<'a> {
    technique: Technique,
    history: usize,
    train_set: &'a str,
    train_envs: usize,
    steps: u64,
    eval_set: &'a str,
    seeds: usize,
    success_mean: f64,
    success_std: f64,
    success: String,
    survival_time: String,
    traversal_time: String,
    cost_return_mean: f64,
}

/// Aggregates completed runs into `report.csv`, `tables.md` and `plots/*.svg`.
pub fn report(run_dirs: &[PathBuf], out: &Path) -> Result<ReportSummary, BenchError> {
    if run_dirs.is_empty() {
        return Err(BenchError::EmptyRunSet);
    }
    let mut reference: Option<(PathBuf, RunManifest)> = None;
    let mut groups: BTreeMap<Key, Vec<MetricsRow>> = BTreeMap::new();
    for dir in run_dirs {
        let m = RunManifest::load(dir)?;
        if let Some((first, r)) = &reference {
            if r.catalog_hash != m.catalog_hash || r.config.eval != m.config.eval || r.config.train.sim != m.config.train.sim {
                return Err(BenchError::Incompatible(format!(
                    "{} and {} differ in catalog, evaluation plan or simulator settings",
                    first.display(),
                    dir.display()
                )));
            }
        } else {
            reference = Some((dir.clone(), m));
        }
        let path = dir.join("metrics.csv");
        if !path.exists() {
            return Err(BenchError::Incompatible(format!("{} has no metrics.csv; is the run complete?", dir.display())));
        }
        for row in read_rows(&path)? {
            let key = Key {
                eval_set: row.eval_set.clone(),
                technique: row.technique,
                history: row.history,
                train_envs: row.train_envs,
                train_set: row.train_set.clone(),
                steps: row.steps,
            };
            let g = groups.entry(key).or_default();
            if g.iter().any(|r| r.seed == row.seed) {
                return Err(BenchError::Incompatible(format!("seed {} of {} appears twice", row.seed, row.train_set)));
            }
            g.push(row);
        }
    }
    if groups.is_empty() {
        return Err(BenchError::EmptyRunSet);
    }

    fs::create_dir_all(out.join("plots")).map_err(|e| BenchError::io(out, e))?;
    let mut files = Vec::new();

    let csv_path = out.join("report.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| BenchError::io(&csv_path, e))?;
    let mut md = String::from("# Results\n");
    let mut current_set = None;
    for (k, rows) in &groups {
        let rates: Vec<f64> = rows.iter().map(|r| r.success_rate).collect();
        let (sm, ss) = mean_std(&rates);
        let costs: Vec<f64> = rows.iter().map(|r| r.mean_cost_return).collect();
        let row = ReportRow {
            technique: k.technique,
            history: k.history,
            train_set: &k.train_set,
            train_envs: k.train_envs,
            steps: k.steps,
            eval_set: &k.eval_set,
            seeds: rows.len(),
            success_mean: sm,
            success_std: ss,
            success: format_cell(&rates),
            survival_time: format_seconds(&rows.iter().map(|r| r.mean_survival_time).collect::<Vec<_>>()),
            traversal_time: format_seconds(&rows.iter().map(|r| r.mean_traversal_time).collect::<Vec<_>>()),
            cost_return_mean: mean_std(&costs).0,
        };
        if current_set != Some(&k.eval_set) {
            current_set = Some(&k.eval_set);
            let _ = write!(
                md,
                "\n## {}\n\n| Technique | H | Train set | Steps | Seeds | Success (%) | Survival (s) | Traversal (s) | Cost return |\n|---|---|---|---|---|---|---|---|---|\n",
                k.eval_set
            );
        }
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {:.3} |",
            row.technique, row.history, row.train_set, row.steps, row.seeds, row.success, row.survival_time, row.traversal_time, row.cost_return_mean
        );
        w.serialize(&row).map_err(|e| BenchError::io(&csv_path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(&csv_path, e))?;
    files.push(csv_path);
    let md_path = out.join("tables.md");
    fs::write(&md_path, md).map_err(|e| BenchError::io(&md_path, e))?;
    files.push(md_path);

    let eval_sets: Vec<&String> = {
        let mut v: Vec<&String> = groups.keys().map(|k| &k.eval_set).collect();
        v.dedup();
        v
    };
    for set in eval_sets {
        let in_set = groups.iter().filter(|(k, _)| &k.eval_set == set);
        let mut by_run: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
        let mut by_envs: BTreeMap<String, BTreeMap<u64, Vec<(f64, f64, f64)>>> = BTreeMap::new();
        for (k, rows) in in_set {
            let (m, s) = mean_std(&rows.iter().map(|r| r.success_rate).collect::<Vec<_>>());
            let p = (k.steps as f64, 100.0 * m, 100.0 * s);
            by_run
                .entry(format!("{} H={} {}", k.technique, k.history, k.train_set))
                .or_default()
                .push(p);
            by_envs
                .entry(format!("{} H={}", k.technique, k.history))
                .or_default()
                .entry(k.steps)
                .or_default()
                .push((k.train_envs as f64, 100.0 * m, 100.0 * s));
        }
        let series: Vec<(String, Vec<(f64, f64, f64)>)> = by_run.into_iter().collect();
        let path = out.join("plots").join(format!("{set}-success-vs-steps.svg"));
        let svg = line_chart(&format!("Success on {set}"), "environment steps", "success (%)", (0.0, 100.0), &series);
        fs::write(&path, svg).map_err(|e| BenchError::io(&path, e))?;
        files.push(path);

        // Final checkpoint of each technique against the number of training environments.
        let series: Vec<(String, Vec<(f64, f64, f64)>)> = by_envs
            .into_iter()
            .filter_map(|(name, by_steps)| {
                let (_, mut pts) = by_steps.into_iter().next_back()?;
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                Some((name, pts))
            })
            .collect();
        let path = out.join("plots").join(format!("{set}-success-vs-train-envs.svg"));
        let svg = line_chart(&format!("Success on {set}"), "training environments", "success (%)", (0.0, 100.0), &series);
        fs::write(&path, svg).map_err(|e| BenchError::io(&path, e))?;
        files.push(path);
    }
    Ok(ReportSummary {
        cells: groups.len(),
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cell_examples() {
        assert_eq!(format_cell(&[0.6, 0.7, 0.8]), "70 ± 8");
        assert_eq!(format_cell(&[0.7]), "70 ± –");
        assert_eq!(format_cell(&[1.0, 1.0]), "100 ± 0");
        assert_eq!(format_seconds(&[None, Some(4.0)]), "4.0 ± –");
        assert_eq!(format_seconds(&[None]), "–");
    }

    #[test]
    fn empty_run_set_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report");
        assert!(matches!(report(&[], &out), Err(BenchError::EmptyRunSet)));
        assert!(!out.exists());
    }

    proptest! {
        #[test]
        fn cells_ignore_seed_order(mut v in proptest::collection::vec(0.0f64..=1.0, 1..8), seed in any::<u64>()) {
            let a = format_cell(&v);
            let n = v.len();
            v.rotate_left((seed as usize) % n);
            if seed % 2 == 0 { v.reverse(); }
            prop_assert_eq!(a, format_cell(&v));
        }
    }
}
