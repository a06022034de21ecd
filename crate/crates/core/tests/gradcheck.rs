//! Finite-difference oracles: every analytic gradient in the crate is checked
//! against central differences, both at the loss level (gradient over student
//! logits) and through a full network (gradient over all parameters).

use distillab_core::losses::{fd_gradcheck, loss_eval, loss_grad, LossKind, LossSpec};
use distillab_core::netkit::{init_mlp, MlpModel};
use distillab_core::prob::LogitVec;
use distillab_core::rng::SplitMix64;

const FD_STEP: f64 = 1e-5;

fn random_logits(rng: &mut SplitMix64, k: usize, scale: f64) -> LogitVec {
    LogitVec::new((0..k).map(|_| rng.next_range(-scale, scale)).collect()).unwrap()
}

// Moderate hyperparameter ranges: the comparison noise floor of a central
// difference is eps * |loss| / (2 step). Keeping |loss| at a few nats keeps
// that floor well below the 1e-6 relative-error budget even for small
// gradient components.
fn random_spec(rng: &mut SplitMix64, kind: LossKind) -> LossSpec {
    let gamma = rng.next_range(0.25, 0.9);
    LossSpec::new(kind)
        .with_gamma(gamma)
        .with_lambda(rng.next_range(0.05, 0.9))
        .with_beta(rng.next_range(0.25, 3.0))
        .with_eta(rng.next_range(0.0, 1.5))
        .with_epsilon(rng.next_range(0.05, 0.5))
        .with_include_ce(!matches!(kind, LossKind::Ttm | LossKind::Wttm) || rng.next_f64() < 0.5)
}

#[test]
fn loss_gradients_match_finite_differences() {
    let kinds = [
        LossKind::Ce,
        LossKind::Kd,
        LossKind::Ttm,
        LossKind::Wttm,
        LossKind::Cp,
        LossKind::Ls,
    ];
    let mut rng = SplitMix64::new(0xFD_C0DE);
    for kind in kinds {
        let mut worst = 0.0f64;
        for _ in 0..120 {
            let k = 2 + rng.next_index(9);
            let student = random_logits(&mut rng, k, 3.0);
            let teacher = random_logits(&mut rng, k, 3.0);
            let spec = random_spec(&mut rng, kind);
            let label = rng.next_index(k);
            let rel = fd_gradcheck(&spec, label, &student, Some(&teacher), FD_STEP).unwrap();
            worst = worst.max(rel);
        }
        assert!(worst < 1e-6, "{kind:?}: worst relative error {worst}");
        println!("{kind:?}: worst relative error {worst:.3e}");
    }
}

/// Loss over the network as a function of its flat parameter vector.
fn network_loss(
    model: &MlpModel,
    spec: &LossSpec,
    x: &[f64],
    label: usize,
    teacher: &LogitVec,
) -> f64 {
    let logits = model.logits(x).unwrap();
    loss_eval(spec, label, &logits, Some(teacher)).unwrap().total
}

#[test]
fn network_parameter_gradients_match_finite_differences() {
    let kinds = [
        LossKind::Ce,
        LossKind::Kd,
        LossKind::Ttm,
        LossKind::Wttm,
        LossKind::Cp,
        LossKind::Ls,
    ];
    let mut rng = SplitMix64::new(0xBACC_FD);
    for kind in kinds {
        let model = init_mlp(&[3, 5, 4], 17).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.next_range(-1.5, 1.5)).collect();
        let teacher = random_logits(&mut rng, 4, 3.0);
        let spec = random_spec(&mut rng, kind);
        let label = rng.next_index(4);

        let (logits, cache) = model.forward_logits(&x).unwrap();
        let grad_logits = loss_grad(&spec, label, &logits, Some(&teacher)).unwrap();
        let analytic = model
            .backward_from_logit_grad(&cache, &grad_logits)
            .unwrap()
            .flat();

        let base = model.params_flat();
        let mut worst = 0.0f64;
        for i in 0..base.len() {
            let mut probe = model.clone();
            let mut params = base.clone();
            params[i] = base[i] + FD_STEP;
            probe.set_params_flat(&params).unwrap();
            let plus = network_loss(&probe, &spec, &x, label, &teacher);
            params[i] = base[i] - FD_STEP;
            probe.set_params_flat(&params).unwrap();
            let minus = network_loss(&probe, &spec, &x, label, &teacher);
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic[i] - numeric).abs() / denom);
        }
        assert!(worst < 1e-5, "{kind:?}: worst relative error {worst}");
    }
}

#[test]
fn fd_step_contract_is_enforced() {
    let spec = LossSpec::new(LossKind::Ce);
    let z = LogitVec::new(vec![0.1, -0.4]).unwrap();
    assert!(fd_gradcheck(&spec, 0, &z, None, 5e-3).is_err());
    assert!(fd_gradcheck(&spec, 0, &z, None, 1e-5).is_ok());
}
