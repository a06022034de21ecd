//! Model persistence.
//!
//! The document is UTF-8 JSON:
//!
//! ```json
//! {
//!   "layer_dims": [4, 8, 3],
//!   "activation": "relu",
//!   "layers": [{"w": [[...]], "b": [...]}, ...],
//!   "meta": {"seed": 7, "tag": "teacher"}
//! }
//! ```
//!
//! Weight matrices are row-major (`fan_out x fan_in`). Parameters are written
//! with 18 significant digits, so a save/load round trip is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{read_file, write_file, Error, Result};

use super::model::{Activation, DenseLayer, MlpModel, ModelMeta};

fn fmt_param(x: f64) -> String {
    format!("{x:.17e}")
}

/// Renders a model to its JSON document.
pub fn model_to_json(model: &MlpModel) -> String {
    let mut out = String::new();
    out.push_str("{\n  \"layer_dims\": [");
    for (i, d) in model.layer_dims().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write!(out, "{d}").unwrap();
    }
    out.push_str("],\n");
    writeln!(out, "  \"activation\": \"{}\",", model.activation().name()).unwrap();
    out.push_str("  \"layers\": [\n");
    for (li, layer) in model.layers().iter().enumerate() {
        out.push_str("    {\n      \"w\": [\n");
        for (ri, row) in layer.w.iter().enumerate() {
            out.push_str("        [");
            for (ci, v) in row.iter().enumerate() {
                if ci > 0 {
                    out.push_str(", ");
                }
                out.push_str(&fmt_param(*v));
            }
            out.push(']');
            if ri + 1 < layer.w.len() {
                out.push(',');
            }
            out.push('\n');
        }
        out.push_str("      ],\n      \"b\": [");
        for (ci, v) in layer.b.iter().enumerate() {
            if ci > 0 {
                out.push_str(", ");
            }
            out.push_str(&fmt_param(*v));
        }
        out.push_str("]\n    }");
        if li + 1 < model.layers().len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("  ],\n");
    writeln!(
        out,
        "  \"meta\": {{\"seed\": {}, \"tag\": {}}}",
        model.meta().seed,
        serde_json::to_string(&model.meta().tag).unwrap()
    )
    .unwrap();
    out.push_str("}\n");
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    layer_dims: Vec<usize>,
    activation: String,
    layers: Vec<LayerDoc>,
    meta: MetaDoc,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaDoc {
    seed: u64,
    tag: String,
}

/// Parses and validates a model document.
pub fn model_from_json(text: &str) -> Result<MlpModel> {
    let doc: ModelDoc = serde_json::from_str(text)?;

    if doc.activation != "relu" {
        return Err(Error::parse_field(
            "activation",
            format!("unsupported activation `{}`", doc.activation),
        ));
    }
    if doc.layer_dims.len() < 2 {
        return Err(Error::parse_field(
            "layer_dims",
            format!("need at least 2 dims, got {}", doc.layer_dims.len()),
        ));
    }
    if doc.layer_dims.iter().any(|d| *d == 0) {
        return Err(Error::parse_field("layer_dims", "dims must all be >= 1"));
    }
    if doc.layers.len() != doc.layer_dims.len() - 1 {
        return Err(Error::parse_field(
            "layers",
            format!(
                "{} layers for {} dims, expected {}",
                doc.layers.len(),
                doc.layer_dims.len(),
                doc.layer_dims.len() - 1
            ),
        ));
    }

    let mut layers = Vec::with_capacity(doc.layers.len());
    for (i, layer) in doc.layers.into_iter().enumerate() {
        let (fan_in, fan_out) = (doc.layer_dims[i], doc.layer_dims[i + 1]);
        if layer.w.len() != fan_out {
            return Err(Error::parse_field(
                format!("layers[{i}].w"),
                format!("{} rows, expected fan_out {fan_out}", layer.w.len()),
            ));
        }
        for (r, row) in layer.w.iter().enumerate() {
            if row.len() != fan_in {
                return Err(Error::parse_field(
                    format!("layers[{i}].w[{r}]"),
                    format!("{} columns, expected fan_in {fan_in}", row.len()),
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse_field(
                    format!("layers[{i}].w[{r}]"),
                    "non-finite weight",
                ));
            }
        }
        if layer.b.len() != fan_out {
            return Err(Error::parse_field(
                format!("layers[{i}].b"),
                format!("{} entries, expected fan_out {fan_out}", layer.b.len()),
            ));
        }
        if layer.b.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse_field(format!("layers[{i}].b"), "non-finite bias"));
        }
        layers.push(DenseLayer {
            w: layer.w,
            b: layer.b,
        });
    }

    Ok(MlpModel::from_parts(
        doc.layer_dims,
        Activation::Relu,
        layers,
        ModelMeta {
            seed: doc.meta.seed,
            tag: doc.meta.tag,
        },
    ))
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    write_file(path, model_to_json(model))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    model_from_json(&read_file(path)?)
}
