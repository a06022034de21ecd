//! A small fully-connected softmax classifier with hand-written forward and
//! backward passes, SGD with momentum and weight decay, evaluation metrics,
//! and JSON persistence.

mod eval;
mod io;
mod model;
mod optim;

pub use eval::{evaluate_model, EvalReport};
pub use io::{load_model, model_from_json, model_to_json, save_model};
pub use model::{init_mlp, Activation, DenseLayer, ForwardCache, MlpModel, ModelMeta, ParamGrads};
pub use optim::{sgd_step, OptimState};
