//! Seeded Monte-Carlo verification suites over the crate's mathematical
//! claims. Each suite draws its instances from a fixed seed, reports the
//! worst residual observed, and fails when that exceeds the suite threshold.

use distillab_core::losses::{
    decomposition_residual, equivalence_residual, loss_eval, loss_grad,
    ttm_kd_relation_residual, LossKind, LossSpec,
};
use distillab_core::prob::{
    power_sum, softmax, validate_mapping, LogitVec, MappingSpec, ProbVec,
};
use distillab_core::rng::SplitMix64;
use distillab_core::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Equivalence,
    Decomposition,
    Relation,
    Gradients,
    Bounds,
    Mappings,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Equivalence => "equivalence",
            Suite::Decomposition => "decomposition",
            Suite::Relation => "relation",
            Suite::Gradients => "gradients",
            Suite::Bounds => "bounds",
            Suite::Mappings => "mappings",
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            Suite::Equivalence => 1e-12,
            Suite::Decomposition | Suite::Relation => 1e-9,
            Suite::Gradients => 1e-6,
            Suite::Bounds => 1e-12,
            // structured pass/fail checks; any mismatch counts as 1
            Suite::Mappings => 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub trials: usize,
    pub max_residual: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

fn random_logits(rng: &mut SplitMix64, k: usize, scale: f64) -> LogitVec {
    LogitVec::new((0..k).map(|_| rng.next_range(-scale, scale)).collect()).unwrap()
}

fn random_prob(rng: &mut SplitMix64, k: usize, scale: f64) -> ProbVec {
    softmax(&random_logits(rng, k, scale), 1.0).unwrap()
}

/// Runs one suite with `trials` seeded instances (per loss kind, for the
/// gradient suite).
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(distillab_core::Error::invalid_argument("trials must be >= 1"));
    }
    let mut rng = SplitMix64::new(seed);
    let mut max_residual = 0.0f64;
    let mut detail = String::new();

    match suite {
        Suite::Equivalence => {
            for _ in 0..trials {
                let k = 2 + rng.next_index(49);
                let scale = rng.next_range(1.0, 8.0);
                let logits = random_logits(&mut rng, k, scale);
                let temperature = rng.next_range(0.25, 10.0);
                max_residual = max_residual.max(equivalence_residual(&logits, temperature)?);
            }
        }
        Suite::Decomposition => {
            for _ in 0..trials {
                let k = 2 + rng.next_index(49);
                let p_t = random_prob(&mut rng, k, 6.0);
                let q = random_prob(&mut rng, k, 6.0);
                let temperature = rng.next_range(1.0, 10.0);
                max_residual = max_residual.max(decomposition_residual(&p_t, &q, temperature)?);
            }
        }
        Suite::Relation => {
            for _ in 0..trials {
                let k = 2 + rng.next_index(49);
                let student = random_logits(&mut rng, k, 6.0);
                let teacher = random_logits(&mut rng, k, 6.0);
                let lambda = rng.next_range(0.1, 0.95);
                let temperature = rng.next_range(1.0, 10.0);
                let label = rng.next_index(k);
                max_residual = max_residual
                    .max(ttm_kd_relation_residual(label, &student, &teacher, lambda, temperature)?);
            }
        }
        Suite::Gradients => {
            // A central difference at step h carries about eps * |loss| / (2h)
            // of noise, so components on which the analytic and numeric
            // routes both sit below an |loss|-scaled floor cannot be
            // adjudicated at this step size; both routes agreeing on ~0 is
            // already the strongest statement the comparison can make there.
            // A disagreement above the floor on either side always counts.
            let step = 1e-5;
            let kinds = [
                LossKind::Ce,
                LossKind::Kd,
                LossKind::Ttm,
                LossKind::Wttm,
                LossKind::Cp,
                LossKind::Ls,
            ];
            for kind in kinds {
                let mut worst = 0.0f64;
                for _ in 0..trials {
                    let k = 2 + rng.next_index(9);
                    let student = random_logits(&mut rng, k, 3.0);
                    let teacher = random_logits(&mut rng, k, 3.0);
                    let spec = LossSpec::new(kind)
                        .with_gamma(rng.next_range(0.25, 0.9))
                        .with_lambda(rng.next_range(0.05, 0.9))
                        .with_beta(rng.next_range(0.25, 3.0))
                        .with_eta(rng.next_range(0.0, 1.5))
                        .with_epsilon(rng.next_range(0.05, 0.5))
                        .with_include_ce(
                            !matches!(kind, LossKind::Ttm | LossKind::Wttm)
                                || rng.next_f64() < 0.5,
                        );
                    let label = rng.next_index(k);

                    let analytic = loss_grad(&spec, label, &student, Some(&teacher))?;
                    let base = student.values().to_vec();
                    let loss_total = loss_eval(&spec, label, &student, Some(&teacher))?.total;
                    let floor = 2e-4 * (1.0 + loss_total.abs());
                    for i in 0..base.len() {
                        let mut plus = base.clone();
                        plus[i] += step;
                        let mut minus = base.clone();
                        minus[i] -= step;
                        let l_plus =
                            loss_eval(&spec, label, &LogitVec::new(plus)?, Some(&teacher))?.total;
                        let l_minus =
                            loss_eval(&spec, label, &LogitVec::new(minus)?, Some(&teacher))?.total;
                        let numeric = (l_plus - l_minus) / (2.0 * step);
                        if analytic[i].abs().max(numeric.abs()) < floor {
                            continue;
                        }
                        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
                        worst = worst.max((analytic[i] - numeric).abs() / denom);
                    }
                }
                detail.push_str(&format!("  {}: max rel err {worst:.3e}\n", kind.name()));
                max_residual = max_residual.max(worst);
            }
        }
        Suite::Bounds => {
            // pinned corners: one-hot at 1, uniform at K^(1-gamma)
            for gamma in [0.1, 0.25, 0.5, 0.8] {
                for k in [2usize, 4, 10, 100] {
                    let hot = power_sum(&ProbVec::one_hot(k, 0).unwrap(), gamma)?;
                    let uni = power_sum(&ProbVec::uniform(k).unwrap(), gamma)?;
                    let target = (k as f64).powf(1.0 - gamma);
                    max_residual = max_residual.max((hot - 1.0).abs());
                    max_residual = max_residual.max((uni - target).abs());
                }
            }
            // random distributions must stay inside [1, K^(1-gamma)]
            for _ in 0..trials {
                let k = 2 + rng.next_index(49);
                let gamma = rng.next_range(0.05, 0.95);
                let scale = rng.next_range(1.0, 8.0);
                let p = random_prob(&mut rng, k, scale);
                let u = power_sum(&p, gamma)?;
                let hi = (k as f64).powf(1.0 - gamma);
                max_residual = max_residual.max((1.0 - u).max(0.0));
                max_residual = max_residual.max((u - hi).max(0.0));
            }
        }
        Suite::Mappings => {
            let grid = 10_001;
            let mut mismatches = 0usize;
            for _ in 0..trials {
                let gamma = rng.next_range(0.05, 0.95);
                let report = validate_mapping(&MappingSpec::power(gamma), grid)?;
                if !report.all_hold() {
                    mismatches += 1;
                    detail.push_str(&format!("  power({gamma}) unexpectedly failed: {report:?}\n"));
                }
            }
            let square = validate_mapping(&MappingSpec::power(2.0), grid)?;
            if !(square.endpoints_fixed && square.non_decreasing && !square.strictly_above_identity)
            {
                mismatches += 1;
                detail.push_str(&format!("  power(2) misreported: {square:?}\n"));
            }
            let identity = validate_mapping(&MappingSpec::Identity, grid)?;
            if !(identity.endpoints_fixed
                && identity.non_decreasing
                && !identity.strictly_above_identity)
            {
                mismatches += 1;
                detail.push_str(&format!("  identity misreported: {identity:?}\n"));
            }
            max_residual = mismatches as f64;
        }
    }

    let threshold = suite.threshold();
    Ok(SuiteReport {
        suite,
        trials,
        max_residual,
        threshold,
        passed: max_residual < threshold,
        detail,
    })
}

impl SuiteReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "suite={} trials={} max_residual={:.3e} threshold={:.0e} {}",
            self.suite.name(),
            self.trials,
            self.max_residual,
            self.threshold,
            if self.passed { "PASS" } else { "FAIL" }
        );
        if !self.detail.is_empty() {
            out.push('\n');
            out.push_str(self.detail.trim_end());
        }
        out
    }
}
