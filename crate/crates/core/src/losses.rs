//! Distillation objectives with analytic gradients over student logits, plus
//! executable checks of the identities tying them together.
//!
//! Six loss kinds are supported. Writing `q` for the student distribution,
//! `y` for the label, `p^t` for the teacher distribution, `T = 1/gamma` for
//! the distillation temperature and `p^t_T` for the power-transformed teacher:
//!
//! * `CE`    — `H(y, q)`
//! * `KD`    — `(1-lambda) H(y, q) + lambda T^2 D(p^t_T || q_T)`
//! * `TTM`   — `[ce] H(y, q) + beta D(p^t_T || q)`
//! * `WTTM`  — `[ce] H(y, q) + beta U_gamma(p^t) D(p^t_T || q)`
//! * `CP`    — `H(y, q) - eta H(q)`
//! * `LS`    — `(1-epsilon) H(y, q) + epsilon H(u, q)`
//!
//! The transform exponent `gamma` is the canonical temperature parameter
//! everywhere; `T` only appears in derived formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{
    self, kl_with_log_probs, log_softmax, power_sum, power_transform, renyi_entropy,
    shannon_entropy, softmax, LogitVec, ProbVec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ce,
    Kd,
    Ttm,
    Wttm,
    Cp,
    Ls,
}

impl LossKind {
    /// Distillation kinds require teacher logits at evaluation time.
    pub fn needs_teacher(&self) -> bool {
        matches!(self, LossKind::Kd | LossKind::Ttm | LossKind::Wttm)
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Ce => "ce",
            LossKind::Kd => "kd",
            LossKind::Ttm => "ttm",
            LossKind::Wttm => "wttm",
            LossKind::Cp => "cp",
            LossKind::Ls => "ls",
        }
    }
}

/// Full hyperparameter set for one objective. Fields irrelevant to `kind`
/// are ignored by evaluation but still range-checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Transform exponent; the distillation temperature is `1/gamma`.
    pub gamma: f64,
    /// KD balancing weight in `[0, 1)`.
    pub lambda: f64,
    /// TTM/WTTM distillation weight. Evaluation applies it as given; when
    /// `beta_normalize_by_mean_u` is set, the training driver is expected to
    /// divide by the dataset mean of `U` before building the effective spec.
    pub beta: f64,
    /// Confidence-penalty strength.
    pub eta: f64,
    /// Label-smoothing strength in `[0, 1]`.
    pub epsilon: f64,
    /// Whether TTM/WTTM keep the `H(y, q)` term.
    pub include_ce: bool,
    /// Marks `beta` as "divide by the mean power sum over the dataset".
    pub beta_normalize_by_mean_u: bool,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        LossSpec {
            kind,
            gamma: 1.0,
            lambda: 0.0,
            beta: 0.0,
            eta: 0.0,
            epsilon: 0.0,
            include_ce: true,
            beta_normalize_by_mean_u: false,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_include_ce(mut self, include_ce: bool) -> Self {
        self.include_ce = include_ce;
        self
    }

    pub fn with_beta_normalize_by_mean_u(mut self, flag: bool) -> Self {
        self.beta_normalize_by_mean_u = flag;
        self
    }

    /// Distillation temperature `T = 1/gamma`.
    pub fn temperature(&self) -> f64 {
        1.0 / self.gamma
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return Err(Error::invalid_argument(format!(
                "gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        if !self.lambda.is_finite() || !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::invalid_argument(format!(
                "lambda must lie in [0, 1), got {}",
                self.lambda
            )));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::invalid_argument(format!(
                "beta must be non-negative and finite, got {}",
                self.beta
            )));
        }
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(Error::invalid_argument(format!(
                "eta must be non-negative and finite, got {}",
                self.eta
            )));
        }
        if !self.epsilon.is_finite() || !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid_argument(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if !self.include_ce && !matches!(self.kind, LossKind::Ttm | LossKind::Wttm) {
            return Err(Error::invalid_argument(format!(
                "include_ce = false is only supported for ttm/wttm, not {}",
                self.kind.name()
            )));
        }
        // the wttm weight U_gamma is only defined for gamma in (0, 1)
        if self.kind == LossKind::Wttm && self.gamma >= 1.0 {
            return Err(Error::invalid_argument(format!(
                "wttm needs gamma in (0, 1) so the power-sum weight is defined, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Per-sample loss value decomposed into its terms.
///
/// `total` always equals the kind-specific recombination of the parts:
/// the cross-entropy term and the distillation term scaled by the spec's
/// weights (and by `per_sample_weight` for WTTM), or the regularizer term
/// for CP/LS.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    /// `H(y, q)`, always computed even when excluded from `total`.
    pub ce_term: f64,
    /// Unweighted divergence term: `D(p^t_T || q_T)` for KD,
    /// `D(p^t_T || q)` for TTM/WTTM, 0 otherwise.
    pub distill_term: f64,
    /// `H(q)` for CP, `H(u, q)` for LS, 0 otherwise.
    pub regularizer_term: f64,
    /// `U_gamma(p^t)` for WTTM, 1 otherwise.
    pub per_sample_weight: f64,
}

struct EvalContext {
    log_q: Vec<f64>,
    ce: f64,
}

fn eval_context(
    spec: &LossSpec,
    label: usize,
    student_logits: &LogitVec,
    teacher_logits: Option<&LogitVec>,
) -> Result<EvalContext> {
    spec.validate()?;
    let k = student_logits.len();
    if label >= k {
        return Err(Error::invalid_argument(format!(
            "label {label} out of range for {k} classes"
        )));
    }
    match teacher_logits {
        Some(t) if t.len() != k => {
            return Err(Error::invalid_argument(format!(
                "teacher has {} classes but student has {k}",
                t.len()
            )));
        }
        None if spec.kind.needs_teacher() => {
            return Err(Error::invalid_argument(format!(
                "loss kind {} requires teacher logits",
                spec.kind.name()
            )));
        }
        _ => {}
    }
    let log_q = log_softmax(student_logits, 1.0)?;
    let ce = -log_q[label];
    Ok(EvalContext { log_q, ce })
}

fn transformed_teacher(teacher_logits: &LogitVec, gamma: f64) -> Result<(ProbVec, ProbVec)> {
    let p_t = softmax(teacher_logits, 1.0)?;
    let p_hat = power_transform(&p_t, gamma)?;
    Ok((p_t, p_hat))
}

/// Evaluates the objective for one sample, returning the decomposed terms.
///
/// Teacher logits are required for KD/TTM/WTTM; for the other kinds a
/// provided teacher is ignored apart from a dimension sanity check.
pub fn loss_eval(
    spec: &LossSpec,
    label: usize,
    student_logits: &LogitVec,
    teacher_logits: Option<&LogitVec>,
) -> Result<LossBreakdown> {
    let ctx = eval_context(spec, label, student_logits, teacher_logits)?;
    let ce = ctx.ce;
    let ice = if spec.include_ce { 1.0 } else { 0.0 };

    let breakdown = match spec.kind {
        LossKind::Ce => LossBreakdown {
            total: ce,
            ce_term: ce,
            distill_term: 0.0,
            regularizer_term: 0.0,
            per_sample_weight: 1.0,
        },
        LossKind::Kd => {
            let t = spec.temperature();
            let (_, p_hat) = transformed_teacher(teacher_logits.unwrap(), spec.gamma)?;
            let log_q_t = log_softmax(student_logits, t)?;
            let distill = kl_with_log_probs(&p_hat, &log_q_t);
            LossBreakdown {
                total: (1.0 - spec.lambda) * ce + spec.lambda * t * t * distill,
                ce_term: ce,
                distill_term: distill,
                regularizer_term: 0.0,
                per_sample_weight: 1.0,
            }
        }
        LossKind::Ttm => {
            let (_, p_hat) = transformed_teacher(teacher_logits.unwrap(), spec.gamma)?;
            let distill = kl_with_log_probs(&p_hat, &ctx.log_q);
            LossBreakdown {
                total: ice * ce + spec.beta * distill,
                ce_term: ce,
                distill_term: distill,
                regularizer_term: 0.0,
                per_sample_weight: 1.0,
            }
        }
        LossKind::Wttm => {
            let (p_t, p_hat) = transformed_teacher(teacher_logits.unwrap(), spec.gamma)?;
            let weight = power_sum(&p_t, spec.gamma)?;
            let distill = kl_with_log_probs(&p_hat, &ctx.log_q);
            LossBreakdown {
                total: ice * ce + spec.beta * weight * distill,
                ce_term: ce,
                distill_term: distill,
                regularizer_term: 0.0,
                per_sample_weight: weight,
            }
        }
        LossKind::Cp => {
            let h_q: f64 = ctx.log_q.iter().map(|lq| -lq.exp() * lq).sum();
            LossBreakdown {
                total: ce - spec.eta * h_q,
                ce_term: ce,
                distill_term: 0.0,
                regularizer_term: h_q,
                per_sample_weight: 1.0,
            }
        }
        LossKind::Ls => {
            let k = student_logits.len() as f64;
            let h_uq: f64 = ctx.log_q.iter().map(|lq| -lq / k).sum();
            LossBreakdown {
                total: (1.0 - spec.epsilon) * ce + spec.epsilon * h_uq,
                ce_term: ce,
                distill_term: 0.0,
                regularizer_term: h_uq,
                per_sample_weight: 1.0,
            }
        }
    };
    Ok(breakdown)
}

/// Analytic gradient of the objective with respect to the student logits.
///
/// The distillation component contributes `q - p^t_T` for TTM (scaled by
/// `beta` and the per-sample weight for WTTM) and `(1/T)(q_T - p^t_T)` for
/// KD; the cross-entropy component contributes `q - onehot(y)`. Every
/// component sums to zero over classes.
pub fn loss_grad(
    spec: &LossSpec,
    label: usize,
    student_logits: &LogitVec,
    teacher_logits: Option<&LogitVec>,
) -> Result<Vec<f64>> {
    let ctx = eval_context(spec, label, student_logits, teacher_logits)?;
    let k = student_logits.len();
    let q: Vec<f64> = ctx.log_q.iter().map(|lq| lq.exp()).collect();
    let ce_grad = |i: usize| q[i] - if i == label { 1.0 } else { 0.0 };

    let grad = match spec.kind {
        LossKind::Ce => (0..k).map(ce_grad).collect(),
        LossKind::Kd => {
            let t = spec.temperature();
            let (_, p_hat) = transformed_teacher(teacher_logits.unwrap(), spec.gamma)?;
            let q_t = softmax(student_logits, t)?;
            (0..k)
                .map(|i| {
                    (1.0 - spec.lambda) * ce_grad(i)
                        + spec.lambda * t * (q_t.values()[i] - p_hat.values()[i])
                })
                .collect()
        }
        LossKind::Ttm => {
            let ice = if spec.include_ce { 1.0 } else { 0.0 };
            let (_, p_hat) = transformed_teacher(teacher_logits.unwrap(), spec.gamma)?;
            (0..k)
                .map(|i| ice * ce_grad(i) + spec.beta * (q[i] - p_hat.values()[i]))
                .collect()
        }
        LossKind::Wttm => {
            let ice = if spec.include_ce { 1.0 } else { 0.0 };
            let (p_t, p_hat) = transformed_teacher(teacher_logits.unwrap(), spec.gamma)?;
            let weight = power_sum(&p_t, spec.gamma)?;
            (0..k)
                .map(|i| ice * ce_grad(i) + spec.beta * weight * (q[i] - p_hat.values()[i]))
                .collect()
        }
        LossKind::Cp => {
            let h_q: f64 = ctx.log_q.iter().map(|lq| -lq.exp() * lq).sum();
            // d(-H(q))/dz_i = q_i (ln q_i + H(q))
            (0..k)
                .map(|i| ce_grad(i) + spec.eta * q[i] * (ctx.log_q[i] + h_q))
                .collect()
        }
        LossKind::Ls => {
            let u = spec.epsilon / k as f64;
            (0..k)
                .map(|i| {
                    let target = (1.0 - spec.epsilon) * if i == label { 1.0 } else { 0.0 } + u;
                    q[i] - target
                })
                .collect()
        }
    };
    Ok(grad)
}

/// Splits a finite float into its shortest-decimal mantissa and power of ten,
/// so `x = mantissa * 10^exp10` read as a decimal. Returns `None` when the
/// mantissa does not fit in an `i128`.
fn decimal_parts(x: f64) -> Option<(i128, i32)> {
    if !x.is_finite() {
        return None;
    }
    let text = format!("{x}");
    let (head, frac) = match text.split_once('.') {
        Some((h, f)) => (h, f),
        None => (text.as_str(), ""),
    };
    let negative = head.starts_with('-');
    let mut mantissa: i128 = 0;
    for c in head.trim_start_matches('-').chars().chain(frac.chars()) {
        let digit = c.to_digit(10)? as i128;
        mantissa = mantissa.checked_mul(10)?.checked_add(digit)?;
    }
    Some((
        if negative { -mantissa } else { mantissa },
        -(frac.len() as i32),
    ))
}

fn pow10_i128(exp: u32) -> Option<i128> {
    10i128.checked_pow(exp)
}

/// The TTM weight matching a KD configuration: `beta = lambda T / (1 - lambda)`.
///
/// The inputs are hyperparameters that arrive as short decimal literals, so
/// the ratio is evaluated exactly over their decimal values; clean inputs
/// give clean weights (`0.9, 4 -> 36` rather than `36.000000000000007`).
/// Values whose decimal form overflows the exact path fall back to plain
/// float arithmetic.
pub fn beta_from_lambda(lambda: f64, temperature: f64) -> Result<f64> {
    if !lambda.is_finite() || !(0.0..1.0).contains(&lambda) {
        return Err(Error::invalid_argument(format!(
            "lambda must lie in [0, 1), got {lambda}"
        )));
    }
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::invalid_argument(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }

    let exact = || -> Option<f64> {
        let (m_l, e_l) = decimal_parts(lambda)?;
        let (m_t, e_t) = decimal_parts(temperature)?;
        // lambda in (0, 1) always prints as "0.…", so e_l < 0.
        let scale = pow10_i128(u32::try_from(-e_l).ok()?)?;
        let one_minus = scale.checked_sub(m_l)?;
        let mut num = m_l.checked_mul(m_t)?;
        let mut den = one_minus;
        if e_t >= 0 {
            num = num.checked_mul(pow10_i128(e_t as u32)?)?;
        } else {
            den = den.checked_mul(pow10_i128((-e_t) as u32)?)?;
        }
        Some(num as f64 / den as f64)
    };

    Ok(exact().unwrap_or(lambda * temperature / (1.0 - lambda)))
}

/// Absolute residual of the KL decomposition identity
/// `D(p^t_T || q) = T D(p^t_T || q_T) - (T-1) H_{1/T}(q) + (T-1) H(p^t_T)`
/// evaluated at the given temperature.
pub fn decomposition_residual(p_t: &ProbVec, q: &ProbVec, temperature: f64) -> Result<f64> {
    if p_t.len() != q.len() {
        return Err(Error::invalid_argument(format!(
            "dimension mismatch: {} vs {} classes",
            p_t.len(),
            q.len()
        )));
    }
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::invalid_argument(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    let gamma = 1.0 / temperature;
    let p_hat = power_transform(p_t, gamma)?;
    let q_hat = power_transform(q, gamma)?;
    let lhs = prob::kl_divergence_probs(&p_hat, q)?;
    let rhs = temperature * prob::kl_divergence_probs(&p_hat, &q_hat)?
        - (temperature - 1.0) * renyi_entropy(q, gamma)?
        + (temperature - 1.0) * shannon_entropy(&p_hat);
    Ok((lhs - rhs).abs())
}

/// Absolute residual of the TTM/KD relation: with `beta = lambda T / (1-lambda)`,
/// `(1-lambda) L_TTM = L_KD - lambda T (T-1) H_{1/T}(q) + lambda T (T-1) H(p^t_T)`.
/// The constant teacher-entropy term is retained so the identity is exact.
pub fn ttm_kd_relation_residual(
    label: usize,
    student_logits: &LogitVec,
    teacher_logits: &LogitVec,
    lambda: f64,
    temperature: f64,
) -> Result<f64> {
    let beta = beta_from_lambda(lambda, temperature)?;
    let gamma = 1.0 / temperature;

    let ttm_spec = LossSpec::new(LossKind::Ttm).with_gamma(gamma).with_beta(beta);
    let kd_spec = LossSpec::new(LossKind::Kd).with_gamma(gamma).with_lambda(lambda);
    let l_ttm = loss_eval(&ttm_spec, label, student_logits, Some(teacher_logits))?.total;
    let l_kd = loss_eval(&kd_spec, label, student_logits, Some(teacher_logits))?.total;

    let q = softmax(student_logits, 1.0)?;
    let (_, p_hat) = transformed_teacher(teacher_logits, gamma)?;
    let correction = lambda * temperature * (temperature - 1.0);
    let rhs = l_kd - correction * renyi_entropy(&q, gamma)? + correction * shannon_entropy(&p_hat);
    Ok(((1.0 - lambda) * l_ttm - rhs).abs())
}

/// Max-norm gap between the two routes of the transform/temperature
/// equivalence: `power_transform(softmax(l), 1/T)` versus `softmax(l, T)`.
pub fn equivalence_residual(logits: &LogitVec, temperature: f64) -> Result<f64> {
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::invalid_argument(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    let via_transform = power_transform(&softmax(logits, 1.0)?, 1.0 / temperature)?;
    let via_scaling = softmax(logits, temperature)?;
    Ok(via_transform
        .values()
        .iter()
        .zip(via_scaling.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Compares [`loss_grad`] against central finite differences of [`loss_eval`]
/// component-wise and returns the worst relative error. The denominator is
/// floored at `1e-8` so near-zero gradients do not blow the ratio up.
pub fn fd_gradcheck(
    spec: &LossSpec,
    label: usize,
    student_logits: &LogitVec,
    teacher_logits: Option<&LogitVec>,
    step: f64,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&step) {
        return Err(Error::invalid_argument(format!(
            "finite-difference step must lie in [1e-7, 1e-3], got {step}"
        )));
    }
    let analytic = loss_grad(spec, label, student_logits, teacher_logits)?;
    let mut max_rel = 0.0f64;
    let base = student_logits.values().to_vec();
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += step;
        let mut minus = base.clone();
        minus[i] -= step;
        let l_plus = loss_eval(spec, label, &LogitVec::new(plus)?, teacher_logits)?.total;
        let l_minus = loss_eval(spec, label, &LogitVec::new(minus)?, teacher_logits)?.total;
        let numeric = (l_plus - l_minus) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(max_rel)
}
