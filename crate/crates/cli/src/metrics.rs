//! Per-epoch metrics rows and their CSV rendering.
//!
//! Columns, in order: `epoch,split,loss_total,loss_ce,loss_distill,accuracy,
//! mean_H_q,mean_KL_pT_q,mean_U`. Optional columns render as empty fields:
//! `loss_distill` and `mean_KL_pT_q` are blank when no teacher is involved,
//! `mean_U` is blank unless the objective is WTTM.

use std::fmt::Write as _;
use std::path::Path;

use distillab_core::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub split: Split,
    pub loss_total: f64,
    pub loss_ce: f64,
    /// The objective's second term, averaged per sample: the KL term for
    /// KD/TTM, the weighted KL for WTTM, the regularizer for CP/LS, and the
    /// teacher-gap diagnostic for CE runs that have a teacher available.
    pub loss_distill: Option<f64>,
    pub accuracy: f64,
    pub mean_h_q: f64,
    pub mean_kl_pt_q: Option<f64>,
    pub mean_u: Option<f64>,
}

pub const METRICS_HEADER: &str =
    "epoch,split,loss_total,loss_ce,loss_distill,accuracy,mean_H_q,mean_KL_pT_q,mean_U";

fn push_opt(out: &mut String, v: Option<f64>) {
    match v {
        Some(x) => write!(out, ",{x}").unwrap(),
        None => out.push(','),
    }
}

pub fn render_metrics(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        write!(
            out,
            "{},{},{},{}",
            row.epoch,
            row.split.name(),
            row.loss_total,
            row.loss_ce
        )
        .unwrap();
        push_opt(&mut out, row.loss_distill);
        write!(out, ",{},{}", row.accuracy, row.mean_h_q).unwrap();
        push_opt(&mut out, row.mean_kl_pt_q);
        push_opt(&mut out, row.mean_u);
        out.push('\n');
    }
    out
}

pub fn write_metrics(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    distillab_core::error::write_file(path, render_metrics(rows))
}
