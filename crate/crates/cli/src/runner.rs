//! Training drivers. Every run is a pure function of its config and input
//! files: data, batching, initialization, and updates all draw from seeded
//! streams, and outputs are written with round-trip-exact number formatting.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use distillab_core::datagen::{
    batch_iter, gen_mixture_split, load_table, save_teacher_logits, Dataset,
};
use distillab_core::losses::{loss_eval, LossKind, LossSpec};
use distillab_core::netkit::{
    evaluate_model, init_mlp, load_model, save_model, sgd_step, MlpModel, OptimState, ParamGrads,
};
use distillab_core::prob::{kl_with_log_probs, log_softmax, power_sum, power_transform, softmax, LogitVec};
use distillab_core::rng::derive_seed;
use distillab_core::{Error, Result};

use crate::config::{DataConfig, ExperimentConfig};
use crate::metrics::{write_metrics, MetricsRow, Split};

/// Which network of the config a training run builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Teacher,
    Student,
}

/// What a finished run reports back (the files carry the full history).
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_train: MetricsRow,
    pub final_test: MetricsRow,
    pub resolved_beta: f64,
    pub mean_u: Option<f64>,
    pub wall_seconds: f64,
}

pub fn load_data(cfg: &DataConfig) -> Result<(Dataset, Dataset)> {
    if let Some(mixture) = &cfg.mixture {
        return gen_mixture_split(&mixture.to_spec(), mixture.test_n_per_class);
    }
    let train = load_table(cfg.train_path.as_ref().expect("validated"))?;
    let test = load_table(cfg.test_path.as_ref().expect("validated"))?;
    if train.feature_dim() != test.feature_dim() {
        return Err(Error::invalid_argument(format!(
            "train has {} features but test has {}",
            train.feature_dim(),
            test.feature_dim()
        )));
    }
    if test.num_classes() > train.num_classes() {
        return Err(Error::invalid_argument(
            "test split contains labels unseen in the training split",
        ));
    }
    Ok((train, test))
}

pub fn compute_logits(model: &MlpModel, data: &Dataset) -> Result<Vec<LogitVec>> {
    (0..data.n()).map(|i| model.logits(data.row(i))).collect()
}

/// Trains the teacher network with plain cross entropy.
pub fn train_teacher(config: &ExperimentConfig) -> Result<RunOutcome> {
    run_training(config, Role::Teacher)
}

/// Trains the student network under the configured objective.
pub fn run_distillation(config: &ExperimentConfig) -> Result<RunOutcome> {
    run_training(config, Role::Student)
}

pub fn run_training(config: &ExperimentConfig, role: Role) -> Result<RunOutcome> {
    let start = Instant::now();
    config.validate()?;
    let (train, test) = load_data(&config.data)?;
    let k = train.num_classes();
    if k < 2 {
        return Err(Error::invalid_argument(
            "training needs at least 2 classes in the data",
        ));
    }
    let d = train.feature_dim();

    let spec = match role {
        Role::Teacher => {
            if let Some(kind) = config.loss.kind {
                if kind != LossKind::Ce {
                    eprintln!(
                        "warning: teacher training forces the loss to ce (config says {})",
                        kind.name()
                    );
                }
            }
            LossSpec::new(LossKind::Ce).with_gamma(config.loss.gamma.unwrap_or(1.0))
        }
        Role::Student => config.loss.resolve()?,
    };

    // Teacher network: required by the distillation kinds; when present for
    // other kinds it is kept for the teacher-gap diagnostics only.
    let teacher = match (role, &config.teacher_path, spec.kind.needs_teacher()) {
        (Role::Teacher, _, _) => None,
        (_, Some(path), needs) => {
            if !needs {
                eprintln!(
                    "warning: loss kind {} does not use the teacher; keeping it for diagnostics",
                    spec.kind.name()
                );
            }
            let model = load_model(path)?;
            if model.input_dim() != d {
                return Err(Error::invalid_argument(format!(
                    "teacher expects {} features, data has {d}",
                    model.input_dim()
                )));
            }
            if model.output_dim() != k {
                return Err(Error::invalid_argument(format!(
                    "teacher predicts {} classes, data has {k}",
                    model.output_dim()
                )));
            }
            Some(model)
        }
        (_, None, true) => {
            return Err(Error::invalid_argument(format!(
                "loss kind {} requires teacher_path",
                spec.kind.name()
            )));
        }
        (_, None, false) => None,
    };

    let teacher_train = teacher
        .as_ref()
        .map(|m| compute_logits(m, &train))
        .transpose()?;
    let teacher_test = teacher
        .as_ref()
        .map(|m| compute_logits(m, &test))
        .transpose()?;

    // WTTM: the per-sample weight mean over the training set, used both as a
    // metric and to resolve beta when normalization is requested.
    let mut mean_u = None;
    let mut eff_spec = spec.clone();
    if spec.kind == LossKind::Wttm {
        let rows = teacher_train.as_ref().expect("teacher checked above");
        let mut sum = 0.0;
        for row in rows {
            sum += power_sum(&softmax(row, 1.0)?, spec.gamma)?;
        }
        let mu = sum / rows.len() as f64;
        mean_u = Some(mu);
        if spec.beta_normalize_by_mean_u {
            eff_spec.beta = spec.beta / mu;
            eff_spec.beta_normalize_by_mean_u = false;
        }
    }
    let resolved_beta = eff_spec.beta;

    let hidden = match role {
        Role::Teacher => &config.model.teacher_hidden,
        Role::Student => &config.model.student_hidden,
    };
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(d);
    dims.extend_from_slice(hidden);
    dims.push(k);

    let mut model = init_mlp(&dims, config.train.seed)?;
    model.set_tag(match role {
        Role::Teacher => "teacher".to_string(),
        Role::Student => format!("student:{}", eff_spec.kind.name()),
    });
    let mut opt = OptimState::new(
        config.train.lr,
        config.train.momentum,
        config.train.weight_decay,
        config.train.schedule.clone(),
        &model,
    )?;

    let mut rows = Vec::with_capacity(2 * config.train.epochs);
    for epoch in 1..=config.train.epochs {
        let batches = batch_iter(
            &train,
            config.train.batch_size,
            derive_seed(config.train.seed, epoch as u64),
        )?;
        for (batch_idx, batch) in batches.iter().enumerate() {
            let mut grads = ParamGrads::zeros_like(&model);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (logits, cache) = model.forward_logits(train.row(i))?;
                let teacher_row = teacher_train.as_ref().map(|r| &r[i]);
                batch_loss += loss_eval(&eff_spec, train.label(i), &logits, teacher_row)?.total;
                let g =
                    distillab_core::losses::loss_grad(&eff_spec, train.label(i), &logits, teacher_row)?;
                grads.accumulate(&model.backward_from_logit_grad(&cache, &g)?)?;
            }
            let scale = 1.0 / batch.len() as f64;
            if !(batch_loss * scale).is_finite() {
                return Err(Error::invalid_state(format!(
                    "non-finite training loss at epoch {epoch}, batch {batch_idx}; aborting"
                )));
            }
            grads.scale(scale);
            sgd_step(&mut model, &grads, &mut opt, epoch)?;
        }
        rows.push(epoch_metrics(
            &model,
            &train,
            teacher_train.as_deref(),
            &eff_spec,
            epoch,
            Split::Train,
        )?);
        rows.push(epoch_metrics(
            &model,
            &test,
            teacher_test.as_deref(),
            &eff_spec,
            epoch,
            Split::Test,
        )?);
    }

    ensure_parent_dir(&config.outputs.model_path)?;
    ensure_parent_dir(&config.outputs.metrics_path)?;
    save_model(&model, &config.outputs.model_path)?;
    write_metrics(&config.outputs.metrics_path, &rows)?;

    let final_test = rows.last().expect("epochs >= 1").clone();
    let final_train = rows[rows.len() - 2].clone();
    let wall_seconds = start.elapsed().as_secs_f64();

    let summary_path = config.outputs.summary_path();
    ensure_parent_dir(&summary_path)?;
    let summary = Summary {
        final_test_accuracy: final_test.accuracy,
        resolved_beta,
        mean_u,
        config,
        wall_seconds,
    };
    distillab_core::error::write_file(
        &summary_path,
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;

    Ok(RunOutcome {
        final_train,
        final_test,
        resolved_beta,
        mean_u,
        wall_seconds,
    })
}

#[derive(Serialize)]
struct Summary<'a> {
    final_test_accuracy: f64,
    resolved_beta: f64,
    #[serde(rename = "mean_U")]
    mean_u: Option<f64>,
    config: &'a ExperimentConfig,
    wall_seconds: f64,
}

fn ensure_parent_dir(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

/// Full evaluation pass producing one metrics row. Loss columns come from
/// the same `loss_eval` the update step uses, so the recorded totals
/// recombine exactly from the parts.
fn epoch_metrics(
    model: &MlpModel,
    data: &Dataset,
    teacher_rows: Option<&[LogitVec]>,
    spec: &LossSpec,
    epoch: usize,
    split: Split,
) -> Result<MetricsRow> {
    let n = data.n() as f64;
    let mut total_sum = 0.0;
    let mut ce_sum = 0.0;
    let mut second_sum = 0.0;
    let mut weight_sum = 0.0;
    let mut entropy_sum = 0.0;
    let mut kl_sum = 0.0;
    let mut correct = 0usize;

    for i in 0..data.n() {
        let logits = model.logits(data.row(i))?;
        let teacher_row = teacher_rows.map(|r| &r[i]);
        let out = loss_eval(spec, data.label(i), &logits, teacher_row)?;
        total_sum += out.total;
        ce_sum += out.ce_term;
        weight_sum += out.per_sample_weight;
        second_sum += match spec.kind {
            LossKind::Kd | LossKind::Ttm => out.distill_term,
            LossKind::Wttm => out.per_sample_weight * out.distill_term,
            LossKind::Cp | LossKind::Ls => out.regularizer_term,
            LossKind::Ce => 0.0,
        };
        if logits.argmax() == data.label(i) {
            correct += 1;
        }
        let log_q = log_softmax(&logits, 1.0)?;
        entropy_sum += log_q.iter().map(|lq| -lq.exp() * lq).sum::<f64>();
        if let Some(t) = teacher_row {
            let p_hat = power_transform(&softmax(t, 1.0)?, spec.gamma)?;
            kl_sum += kl_with_log_probs(&p_hat, &log_q);
        }
    }

    let loss_distill = match spec.kind {
        LossKind::Ce => teacher_rows.map(|_| kl_sum / n),
        _ => Some(second_sum / n),
    };
    Ok(MetricsRow {
        epoch,
        split,
        loss_total: total_sum / n,
        loss_ce: ce_sum / n,
        loss_distill,
        accuracy: correct as f64 / n,
        mean_h_q: entropy_sum / n,
        mean_kl_pt_q: teacher_rows.map(|_| kl_sum / n),
        mean_u: (spec.kind == LossKind::Wttm).then_some(weight_sum / n),
    })
}

/// Writes the teacher-logits CSV for a dataset, one row per sample in
/// dataset order.
pub fn dump_logits(model_path: &Path, data_path: &Path, out_path: &Path) -> Result<()> {
    let model = load_model(model_path)?;
    let data = load_table(data_path)?;
    if model.input_dim() != data.feature_dim() {
        return Err(Error::invalid_argument(format!(
            "model expects {} features, data has {}",
            model.input_dim(),
            data.feature_dim()
        )));
    }
    let rows = compute_logits(&model, &data)?;
    ensure_parent_dir(out_path)?;
    save_teacher_logits(out_path, &data, &rows)
}

/// Report printed by the `eval` subcommand.
#[derive(Serialize)]
pub struct EvalOutput {
    pub accuracy: f64,
    pub mean_h_q: f64,
    #[serde(rename = "mean_KL_pT_q")]
    pub mean_kl_pt_q: Option<f64>,
    pub n_samples: usize,
}

/// Evaluates a saved model on a dataset file; optionally against a teacher
/// model (requires `gamma`), and optionally dumping per-sample entropies
/// (`id,label,H_q`) for histogram work.
pub fn eval_model_files(
    model_path: &Path,
    data_path: &Path,
    teacher_path: Option<&Path>,
    gamma: Option<f64>,
    per_sample_out: Option<&Path>,
) -> Result<EvalOutput> {
    let model = load_model(model_path)?;
    let data = load_table(data_path)?;
    let teacher_rows = match teacher_path {
        Some(path) => Some(compute_logits(&load_model(path)?, &data)?),
        None => None,
    };
    let report = evaluate_model(&model, &data, teacher_rows.as_deref(), gamma)?;

    if let Some(out) = per_sample_out {
        use std::fmt::Write as _;
        let mut text = String::from("id,label,H_q\n");
        for i in 0..data.n() {
            let log_q = log_softmax(&model.logits(data.row(i))?, 1.0)?;
            let h: f64 = log_q.iter().map(|lq| -lq.exp() * lq).sum();
            writeln!(text, "{i},{},{h}", data.label(i)).unwrap();
        }
        ensure_parent_dir(out)?;
        distillab_core::error::write_file(out, text)?;
    }

    Ok(EvalOutput {
        accuracy: report.accuracy,
        mean_h_q: report.mean_shannon_entropy_q,
        mean_kl_pt_q: report.mean_kl_teacher_transform_to_q,
        n_samples: report.n_samples,
    })
}
