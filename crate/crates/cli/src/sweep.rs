//! Grid sweeps: a base config plus per-parameter value lists and a seed
//! list. Every cell of the Cartesian product runs as an independent
//! deterministic experiment; cells execute concurrently but the outputs are
//! identical to a sequential pass.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use distillab_core::{Error, Result};

use crate::config::ExperimentConfig;
use crate::runner::{run_distillation, RunOutcome};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    /// Dotted parameter keys to value lists, e.g. `"loss.gamma": [0.25, 0.5]`.
    #[serde(default)]
    pub sweep: BTreeMap<String, Vec<f64>>,
    pub seeds: Vec<u64>,
    pub aggregate_path: PathBuf,
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = distillab_core::error::read_file(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

const SWEEPABLE: &[&str] = &[
    "loss.gamma",
    "loss.beta",
    "loss.lambda",
    "loss.eta",
    "loss.epsilon",
    "train.lr",
    "train.momentum",
    "train.weight_decay",
];

fn apply_override(config: &mut ExperimentConfig, key: &str, value: f64) -> Result<()> {
    match key {
        "loss.gamma" => config.loss.gamma = Some(value),
        "loss.beta" => config.loss.beta = Some(value),
        "loss.lambda" => config.loss.lambda = Some(value),
        "loss.eta" => config.loss.eta = Some(value),
        "loss.epsilon" => config.loss.epsilon = Some(value),
        "train.lr" => config.train.lr = value,
        "train.momentum" => config.train.momentum = value,
        "train.weight_decay" => config.train.weight_decay = value,
        other => {
            return Err(Error::invalid_argument(format!(
                "unknown sweep key `{other}`; supported: {}",
                SWEEPABLE.join(", ")
            )));
        }
    }
    Ok(())
}

fn with_suffix(path: &Path, cell_id: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}__{cell_id}{ext}"))
}

#[derive(Debug, Clone)]
struct Cell {
    id: String,
    assignments: Vec<(String, f64)>,
    seed: u64,
}

fn build_cells(cfg: &SweepConfig) -> Result<Vec<Cell>> {
    if cfg.seeds.is_empty() {
        return Err(Error::invalid_argument("sweep needs at least one seed"));
    }
    for key in cfg.sweep.keys() {
        if !SWEEPABLE.contains(&key.as_str()) {
            return Err(Error::invalid_argument(format!(
                "unknown sweep key `{key}`; supported: {}",
                SWEEPABLE.join(", ")
            )));
        }
        if cfg.sweep[key].is_empty() {
            return Err(Error::invalid_argument(format!(
                "sweep key `{key}` has an empty value list"
            )));
        }
    }

    // Cartesian product in the map's (sorted) key order.
    let mut combos: Vec<Vec<(String, f64)>> = vec![vec![]];
    for (key, values) in &cfg.sweep {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for v in values {
                let mut extended = combo.clone();
                extended.push((key.clone(), *v));
                next.push(extended);
            }
        }
        combos = next;
    }

    let mut cells = Vec::with_capacity(combos.len() * cfg.seeds.len());
    for combo in &combos {
        for &seed in &cfg.seeds {
            let mut id = String::new();
            for (key, value) in combo {
                let short = key.rsplit('.').next().unwrap();
                write!(id, "{short}={value}__").unwrap();
            }
            write!(id, "seed={seed}").unwrap();
            cells.push(Cell {
                id,
                assignments: combo.clone(),
                seed,
            });
        }
    }
    Ok(cells)
}

fn cell_config(base: &ExperimentConfig, cell: &Cell) -> Result<ExperimentConfig> {
    let mut config = base.clone();
    for (key, value) in &cell.assignments {
        apply_override(&mut config, key, *value)?;
    }
    config.train.seed = cell.seed;
    config.outputs.model_path = with_suffix(&base.outputs.model_path, &cell.id);
    config.outputs.metrics_path = with_suffix(&base.outputs.metrics_path, &cell.id);
    config.outputs.summary_path = Some(with_suffix(
        &base.outputs.summary_path(),
        &cell.id,
    ));
    Ok(config)
}

/// Runs every cell and writes the aggregate CSV. Returns the number of cells.
pub fn run_sweep(cfg: &SweepConfig) -> Result<usize> {
    let cells = build_cells(cfg)?;
    let param_keys: Vec<String> = cfg.sweep.keys().cloned().collect();

    let outcomes: Vec<(usize, RunOutcome)> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, cell)| -> Result<(usize, RunOutcome)> {
            let config = cell_config(&cfg.base, cell)?;
            Ok((idx, run_distillation(&config)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut ordered = outcomes;
    ordered.sort_by_key(|(idx, _)| *idx);

    let mut out = String::from("cell,seed");
    for key in &param_keys {
        write!(out, ",{key}").unwrap();
    }
    out.push_str(",final_test_accuracy,final_test_mean_H_q,final_test_mean_KL_pT_q\n");
    for (idx, outcome) in &ordered {
        let cell = &cells[*idx];
        write!(out, "{},{}", cell.id, cell.seed).unwrap();
        for key in &param_keys {
            let value = cell
                .assignments
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .expect("all sweep keys assigned in every cell");
            write!(out, ",{value}").unwrap();
        }
        write!(
            out,
            ",{},{}",
            outcome.final_test.accuracy, outcome.final_test.mean_h_q
        )
        .unwrap();
        match outcome.final_test.mean_kl_pt_q {
            Some(v) => writeln!(out, ",{v}").unwrap(),
            None => out.push_str(",\n"),
        }
    }
    if let Some(parent) = cfg.aggregate_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    distillab_core::error::write_file(&cfg.aggregate_path, out)?;
    Ok(cells.len())
}
