//! Model evaluation: accuracy plus the entropy/teacher-gap diagnostics
//! tracked during training.

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::prob::{kl_with_log_probs, log_softmax, power_transform, softmax, LogitVec};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Fraction of samples whose argmax logit matches the label; ties
    /// resolve to the lowest class index.
    pub accuracy: f64,
    /// Mean Shannon entropy of the student distribution, in nats.
    pub mean_shannon_entropy_q: f64,
    /// Mean `D(power_transform(p^t, gamma) || q)`, present when teacher
    /// logits were supplied.
    pub mean_kl_teacher_transform_to_q: Option<f64>,
    pub n_samples: usize,
}

/// Evaluates a model over a dataset. When `teacher_logits` is given, `gamma`
/// is required and the mean KL between the transformed teacher and the
/// student is reported as well.
pub fn evaluate_model(
    model: &crate::netkit::MlpModel,
    dataset: &Dataset,
    teacher_logits: Option<&[LogitVec]>,
    gamma: Option<f64>,
) -> Result<EvalReport> {
    if dataset.n() == 0 {
        return Err(Error::invalid_argument("cannot evaluate on an empty dataset"));
    }
    if let Some(rows) = teacher_logits {
        if rows.len() != dataset.n() {
            return Err(Error::invalid_argument(format!(
                "{} teacher rows for {} samples",
                rows.len(),
                dataset.n()
            )));
        }
        if gamma.is_none() {
            return Err(Error::invalid_argument(
                "gamma is required when teacher logits are provided",
            ));
        }
    }

    let mut correct = 0usize;
    let mut entropy_sum = 0.0;
    let mut kl_sum = 0.0;
    for i in 0..dataset.n() {
        let logits = model.logits(dataset.row(i))?;
        if logits.argmax() == dataset.label(i) {
            correct += 1;
        }
        let log_q = log_softmax(&logits, 1.0)?;
        entropy_sum += log_q.iter().map(|lq| -lq.exp() * lq).sum::<f64>();
        if let Some(rows) = teacher_logits {
            let p_t = softmax(&rows[i], 1.0)?;
            let p_hat = power_transform(&p_t, gamma.unwrap())?;
            kl_sum += kl_with_log_probs(&p_hat, &log_q);
        }
    }

    let n = dataset.n() as f64;
    Ok(EvalReport {
        accuracy: correct as f64 / n,
        mean_shannon_entropy_q: entropy_sum / n,
        mean_kl_teacher_transform_to_q: teacher_logits.map(|_| kl_sum / n),
        n_samples: dataset.n(),
    })
}
