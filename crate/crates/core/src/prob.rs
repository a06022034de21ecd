//! Probability-simplex transforms and information measures.
//!
//! Everything is computed in 64-bit floats and natural log (nats). Entropies
//! and divergences follow the `0·ln 0 = 0` convention, and cross entropy is
//! evaluated against log-softmax so that confident logits never materialize a
//! zero probability and blow up to infinity.

use crate::error::{Error, Result};

/// How far a candidate vector's sum may drift from 1 and still be accepted
/// (and renormalized) by [`ProbVec::new`].
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// A probability distribution over `K >= 2` classes.
///
/// Entries are non-negative and sum to one. Inputs whose sum is within
/// [`PROB_SUM_TOLERANCE`] of 1 are renormalized by exact division; anything
/// further out is rejected as a real bug rather than float drift.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVec {
    values: Vec<f64>,
}

impl ProbVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid_argument(format!(
                "a probability vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::invalid_argument(format!(
                    "probability entry {i} is {v}, expected a finite non-negative value"
                )));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::invalid_argument(format!(
                "probabilities sum to {sum}, more than {PROB_SUM_TOLERANCE} away from 1"
            )));
        }
        let values = if sum == 1.0 {
            values
        } else {
            values.iter().map(|v| v / sum).collect()
        };
        Ok(ProbVec { values })
    }

    /// Wraps values that are already the output of an exact normalization.
    pub(crate) fn from_normalized(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2);
        debug_assert!({
            let s: f64 = values.iter().sum();
            (s - 1.0).abs() < 1e-12
        });
        ProbVec { values }
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid_argument(format!(
                "uniform distribution needs K >= 2, got {k}"
            )));
        }
        ProbVec::new(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, class: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid_argument(format!(
                "one-hot distribution needs K >= 2, got {k}"
            )));
        }
        if class >= k {
            return Err(Error::invalid_argument(format!(
                "one-hot class {class} out of range for K = {k}"
            )));
        }
        let mut values = vec![0.0; k];
        values[class] = 1.0;
        Ok(ProbVec { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the largest entry; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate().skip(1) {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// Raw pre-softmax scores over `K >= 2` classes; all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVec {
    values: Vec<f64>,
}

impl LogitVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid_argument(format!(
                "a logit vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid_argument(format!(
                    "logit entry {i} is {v}, expected a finite value"
                )));
            }
        }
        Ok(LogitVec { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the largest logit; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate().skip(1) {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// A point-wise mapping `f: [0,1] -> [0,1]` driving the generalized transform.
#[derive(Debug, Clone, PartialEq)]
pub enum MappingSpec {
    /// `f(x) = x^gamma` with `gamma > 0`; realizes the power transform.
    Power { exponent: f64 },
    /// `f(x) = x`; leaves any distribution unchanged.
    Identity,
    /// A sampled mapping given as `(x, f(x))` pairs with strictly increasing
    /// `x` in `[0,1]`. Evaluated by linear interpolation between the points;
    /// outside the covered range the nearest endpoint value is used.
    TablePoints { points: Vec<(f64, f64)> },
}

impl MappingSpec {
    pub fn power(exponent: f64) -> Self {
        MappingSpec::Power { exponent }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MappingSpec::Power { exponent } => {
                if !exponent.is_finite() || *exponent <= 0.0 {
                    return Err(Error::invalid_argument(format!(
                        "power mapping exponent must be positive and finite, got {exponent}"
                    )));
                }
            }
            MappingSpec::Identity => {}
            MappingSpec::TablePoints { points } => {
                if points.is_empty() {
                    return Err(Error::invalid_argument(
                        "table mapping needs at least one point",
                    ));
                }
                let mut prev = f64::NEG_INFINITY;
                for (i, (x, y)) in points.iter().enumerate() {
                    if !x.is_finite() || !(0.0..=1.0).contains(x) {
                        return Err(Error::invalid_argument(format!(
                            "table x[{i}] = {x} outside [0, 1]"
                        )));
                    }
                    if !y.is_finite() || !(0.0..=1.0).contains(y) {
                        return Err(Error::invalid_argument(format!(
                            "table f(x)[{i}] = {y} outside [0, 1]"
                        )));
                    }
                    if *x <= prev {
                        return Err(Error::invalid_argument(format!(
                            "table x values must be strictly increasing, violated at index {i}"
                        )));
                    }
                    prev = *x;
                }
            }
        }
        Ok(())
    }

    /// Evaluates the mapping at `x in [0,1]`. Callers are expected to have
    /// validated the spec.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MappingSpec::Power { exponent } => x.powf(*exponent),
            MappingSpec::Identity => x,
            MappingSpec::TablePoints { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if x <= first.0 {
                    return first.1;
                }
                if x >= last.0 {
                    return last.1;
                }
                // x is strictly inside; find the bracketing segment.
                let idx = points.partition_point(|(px, _)| *px < x);
                let (x0, y0) = points[idx - 1];
                let (x1, y1) = points[idx];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

/// Validity report for a mapping against the three smoothing-transform
/// properties: endpoints fixed, monotone non-decreasing, strictly above the
/// identity on the open interval. Each failed property records the first grid
/// abscissa where it broke.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingReport {
    pub endpoints_fixed: bool,
    pub non_decreasing: bool,
    pub strictly_above_identity: bool,
    pub endpoint_violation: Option<f64>,
    pub monotonicity_violation: Option<f64>,
    pub above_identity_violation: Option<f64>,
}

impl MappingReport {
    pub fn all_hold(&self) -> bool {
        self.endpoints_fixed && self.non_decreasing && self.strictly_above_identity
    }
}

const ENDPOINT_TOLERANCE: f64 = 1e-12;

/// Checks a mapping on a uniform grid over `[0, 1]` against the three
/// properties a smoothing transform should satisfy. Report-only: a failing
/// property is information, not an error.
pub fn validate_mapping(f: &MappingSpec, grid_size: usize) -> Result<MappingReport> {
    f.validate()?;
    if grid_size < 2 {
        return Err(Error::invalid_argument(format!(
            "grid size must be at least 2, got {grid_size}"
        )));
    }

    let step = 1.0 / (grid_size - 1) as f64;
    let grid_x = |i: usize| {
        if i == grid_size - 1 {
            1.0
        } else {
            i as f64 * step
        }
    };

    let mut report = MappingReport {
        endpoints_fixed: true,
        non_decreasing: true,
        strictly_above_identity: true,
        endpoint_violation: None,
        monotonicity_violation: None,
        above_identity_violation: None,
    };

    if f.eval(0.0).abs() > ENDPOINT_TOLERANCE {
        report.endpoints_fixed = false;
        report.endpoint_violation = Some(0.0);
    } else if (f.eval(1.0) - 1.0).abs() > ENDPOINT_TOLERANCE {
        report.endpoints_fixed = false;
        report.endpoint_violation = Some(1.0);
    }

    let mut prev = f.eval(0.0);
    for i in 1..grid_size {
        let x = grid_x(i);
        let y = f.eval(x);
        if report.non_decreasing && y < prev {
            report.non_decreasing = false;
            report.monotonicity_violation = Some(x);
        }
        if report.strictly_above_identity && i < grid_size - 1 && y <= x {
            report.strictly_above_identity = false;
            report.above_identity_violation = Some(x);
        }
        prev = y;
    }

    Ok(report)
}

fn check_temperature(temperature: f64) -> Result<()> {
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::invalid_argument(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    Ok(())
}

/// Log-probabilities of the temperature-scaled softmax, computed with a
/// max-shift so no entry overflows. The log of the normalizer goes through
/// `ln_1p` over the non-max terms, which keeps the dominant class's
/// log-probability accurate even when it is within an ulp of 0.
pub fn log_softmax(logits: &LogitVec, temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    let scaled: Vec<f64> = logits.values().iter().map(|v| v / temperature).collect();
    let mut max_idx = 0;
    for (i, s) in scaled.iter().enumerate().skip(1) {
        if *s > scaled[max_idx] {
            max_idx = i;
        }
    }
    let max = scaled[max_idx];
    let rest: f64 = scaled
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != max_idx)
        .map(|(_, s)| (s - max).exp())
        .sum();
    let log_sum = rest.ln_1p();
    Ok(scaled.iter().map(|s| s - max - log_sum).collect())
}

/// Temperature-scaled softmax `sigma(logits / temperature)`.
pub fn softmax(logits: &LogitVec, temperature: f64) -> Result<ProbVec> {
    check_temperature(temperature)?;
    let scaled: Vec<f64> = logits.values().iter().map(|v| v / temperature).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    Ok(ProbVec::from_normalized(
        exp.iter().map(|e| e / sum).collect(),
    ))
}

/// Power transform `p_i^gamma / sum_j p_j^gamma`.
///
/// Internally evaluated as a softmax of `gamma * ln(p)` restricted to the
/// support of `p`, which avoids underflow for peaked distributions; entries
/// with `p_i = 0` stay exactly 0. The argmax set is preserved for any
/// `gamma > 0`, and `gamma = 1` returns the input unchanged.
pub fn power_transform(p: &ProbVec, gamma: f64) -> Result<ProbVec> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::invalid_argument(format!(
            "power transform exponent must be positive and finite, got {gamma}"
        )));
    }
    if gamma == 1.0 {
        return Ok(p.clone());
    }
    let scaled_log: Vec<f64> = p
        .values()
        .iter()
        .map(|v| if *v > 0.0 { gamma * v.ln() } else { f64::NEG_INFINITY })
        .collect();
    let max = scaled_log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scaled_log
        .iter()
        .map(|s| {
            if s.is_finite() {
                (s - max).exp()
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = exp.iter().sum();
    Ok(ProbVec::from_normalized(
        exp.iter().map(|e| e / sum).collect(),
    ))
}

/// Generalized transform: apply `f` entrywise, then normalize back to the
/// simplex. With `f = Power(gamma)` this is bit-identical to
/// [`power_transform`].
pub fn generalized_transform(p: &ProbVec, f: &MappingSpec) -> Result<ProbVec> {
    f.validate()?;
    if let MappingSpec::Power { exponent } = f {
        return power_transform(p, *exponent);
    }
    let mapped: Vec<f64> = p.values().iter().map(|v| f.eval(*v)).collect();
    for (i, v) in mapped.iter().enumerate() {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::invalid_argument(format!(
                "mapping produced {v} at entry {i}, expected a finite non-negative value"
            )));
        }
    }
    let sum: f64 = mapped.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateTransform(
            "mapped values sum to zero; nothing to normalize".into(),
        ));
    }
    Ok(ProbVec::from_normalized(
        mapped.iter().map(|v| v / sum).collect(),
    ))
}

/// Shannon entropy `-sum p_i ln p_i` in nats; lies in `[0, ln K]`.
pub fn shannon_entropy(p: &ProbVec) -> f64 {
    p.values()
        .iter()
        .map(|v| if *v > 0.0 { -v * v.ln() } else { 0.0 })
        .sum()
}

/// Threshold under which the Rényi order is treated as exactly 1; the
/// `1/(1-alpha)` prefactor is numerically useless closer than this.
pub const RENYI_SHANNON_THRESHOLD: f64 = 1e-12;

/// Rényi entropy of order `alpha > 0`: `ln(sum p_i^alpha) / (1 - alpha)`,
/// with orders within [`RENYI_SHANNON_THRESHOLD`] of 1 dispatched to
/// [`shannon_entropy`]. The power sum is evaluated in the log domain with a
/// max-shift so large orders cannot underflow it to zero.
pub fn renyi_entropy(p: &ProbVec, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::invalid_argument(format!(
            "Rényi order must be positive and finite, got {alpha}"
        )));
    }
    if (alpha - 1.0).abs() <= RENYI_SHANNON_THRESHOLD {
        return Ok(shannon_entropy(p));
    }
    let log_max = p
        .values()
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| v.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = p
        .values()
        .iter()
        .map(|v| {
            if *v > 0.0 {
                (alpha * (v.ln() - log_max)).exp()
            } else {
                0.0
            }
        })
        .sum();
    let log_power_sum = alpha * log_max + total.ln();
    // The true value is never negative on the simplex, but the power sum can
    // land on the wrong side of 1 by an ulp.
    Ok((log_power_sum / (1.0 - alpha)).max(0.0))
}

/// Power sum `U_gamma(p) = sum_j p_j^gamma` for `gamma in (0, 1)`; ranges
/// from 1 (one-hot) to `K^(1-gamma)` (uniform) and quantifies smoothness.
pub fn power_sum(p: &ProbVec, gamma: f64) -> Result<f64> {
    if !gamma.is_finite() || gamma <= 0.0 || gamma >= 1.0 {
        return Err(Error::invalid_argument(format!(
            "power sum exponent must lie strictly inside (0, 1), got {gamma}"
        )));
    }
    Ok(p.values()
        .iter()
        .map(|v| if *v > 0.0 { v.powf(gamma) } else { 0.0 })
        .sum())
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid_argument(format!(
            "dimension mismatch: {a} vs {b} classes"
        )));
    }
    Ok(())
}

/// Cross entropy `H(target, softmax(logits))` in nats, evaluated entirely in
/// the log domain.
pub fn cross_entropy(target: &ProbVec, logits: &LogitVec) -> Result<f64> {
    check_same_len(target.len(), logits.len())?;
    let log_q = log_softmax(logits, 1.0)?;
    Ok(cross_entropy_with_log_probs(target, &log_q))
}

/// Cross entropy against a one-hot target given as a class label.
pub fn cross_entropy_label(label: usize, logits: &LogitVec) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::invalid_argument(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let log_q = log_softmax(logits, 1.0)?;
    Ok(-log_q[label])
}

pub(crate) fn cross_entropy_with_log_probs(target: &ProbVec, log_q: &[f64]) -> f64 {
    target
        .values()
        .iter()
        .zip(log_q)
        .map(|(t, lq)| if *t > 0.0 { -t * lq } else { 0.0 })
        .sum()
}

/// KL divergence `D(p || softmax(logits_q))` in nats.
pub fn kl_divergence(p: &ProbVec, logits_q: &LogitVec) -> Result<f64> {
    Ok(cross_entropy(p, logits_q)? - shannon_entropy(p))
}

/// KL divergence of `p` against log-probabilities that came out of
/// [`log_softmax`]. This is the log-domain building block the loss
/// evaluations use; it is public so drivers computing diagnostics match
/// the training objective bit for bit.
pub fn kl_with_log_probs(p: &ProbVec, log_q: &[f64]) -> f64 {
    cross_entropy_with_log_probs(p, log_q) - shannon_entropy(p)
}

/// KL divergence between two distributions, `0·ln(0/·) = 0` convention.
/// Returns infinity where `q` has a zero that `p` does not.
pub fn kl_divergence_probs(p: &ProbVec, q: &ProbVec) -> Result<f64> {
    check_same_len(p.len(), q.len())?;
    let mut total = 0.0;
    for (pi, qi) in p.values().iter().zip(q.values()) {
        if *pi > 0.0 {
            if *qi > 0.0 {
                total += pi * (pi.ln() - qi.ln());
            } else {
                return Ok(f64::INFINITY);
            }
        }
    }
    Ok(total)
}
