//! Deterministic synthetic classification data (Gaussian mixtures), CSV
//! ingestion, standardization, and seeded batching.
//!
//! Dataset files are plain UTF-8 CSV with header `label,f0,...,f{d-1}`;
//! teacher logit dumps use `id,label,logit_0,...,logit_{K-1}` with one row
//! per sample in dataset order. All generation flows through the crate's
//! seeded [`SplitMix64`] generator, so identical specs produce bit-identical
//! datasets.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{read_file, write_file, Error, Result};
use crate::prob::LogitVec;
use crate::rng::{derive_seed, SplitMix64};

/// An immutable classification dataset: `n` rows of `d` features plus a
/// label in `[0, K)` each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>, // row-major, n * d
    labels: Vec<usize>,
    n: usize,
    d: usize,
    k: usize,
    provenance: String,
}

impl Dataset {
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        k: usize,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid_argument("dataset needs at least one row"));
        }
        if rows.len() != labels.len() {
            return Err(Error::invalid_argument(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::invalid_argument("feature rows must be non-empty"));
        }
        let mut features = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::invalid_argument(format!(
                    "row {i} has {} features, expected {d}",
                    row.len()
                )));
            }
            for v in row {
                if !v.is_finite() {
                    return Err(Error::invalid_argument(format!(
                        "row {i} contains non-finite feature {v}"
                    )));
                }
            }
            features.extend_from_slice(row);
        }
        for (i, label) in labels.iter().enumerate() {
            if *label >= k {
                return Err(Error::invalid_argument(format!(
                    "label {label} at row {i} out of range for K = {k}"
                )));
            }
        }
        Ok(Dataset {
            n: labels.len(),
            features,
            labels,
            d,
            k,
            provenance: provenance.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn feature_dim(&self) -> usize {
        self.d
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }
}

/// Parameters of a seeded spherical Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub k: usize,
    pub d: usize,
    pub n_per_class: usize,
    /// Radius of the sphere the class means are drawn on.
    pub separation: f64,
    pub within_std: f64,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid_argument(format!(
                "mixture needs K >= 2 classes, got {}",
                self.k
            )));
        }
        if self.d < 1 {
            return Err(Error::invalid_argument("mixture needs d >= 1"));
        }
        if self.n_per_class < 1 {
            return Err(Error::invalid_argument("mixture needs n_per_class >= 1"));
        }
        if !self.separation.is_finite() || self.separation < 0.0 {
            return Err(Error::invalid_argument(format!(
                "separation must be non-negative and finite, got {}",
                self.separation
            )));
        }
        if !self.within_std.is_finite() || self.within_std <= 0.0 {
            return Err(Error::invalid_argument(format!(
                "within_std must be positive and finite, got {}",
                self.within_std
            )));
        }
        Ok(())
    }
}

// Stream tags for splitting one user seed into independent sub-streams.
const STREAM_MEANS: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_TEST: u64 = 2;

fn class_means(spec: &MixtureSpec) -> Vec<Vec<f64>> {
    let mut rng = SplitMix64::new(derive_seed(spec.seed, STREAM_MEANS));
    (0..spec.k)
        .map(|_| loop {
            let v: Vec<f64> = (0..spec.d).map(|_| rng.next_normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                return v.iter().map(|x| spec.separation * x / norm).collect();
            }
        })
        .collect()
}

fn sample_block(
    spec: &MixtureSpec,
    means: &[Vec<f64>],
    n_per_class: usize,
    stream: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = SplitMix64::new(derive_seed(spec.seed, stream));
    let mut rows = Vec::with_capacity(spec.k * n_per_class);
    let mut labels = Vec::with_capacity(spec.k * n_per_class);
    for (class, mean) in means.iter().enumerate() {
        for _ in 0..n_per_class {
            let row: Vec<f64> = mean
                .iter()
                .map(|m| m + spec.within_std * rng.next_normal())
                .collect();
            rows.push(row);
            labels.push(class);
        }
    }
    (rows, labels)
}

fn mixture_provenance(spec: &MixtureSpec, split: &str) -> String {
    format!(
        "mixture(k={},d={},n_per_class={},separation={},within_std={},seed={},split={split})",
        spec.k, spec.d, spec.n_per_class, spec.separation, spec.within_std, spec.seed
    )
}

/// Generates the mixture dataset for a spec: class means on a sphere of
/// radius `separation`, exactly `n_per_class` Gaussian samples per class.
pub fn gen_mixture(spec: &MixtureSpec) -> Result<Dataset> {
    spec.validate()?;
    let means = class_means(spec);
    let (rows, labels) = sample_block(spec, &means, spec.n_per_class, STREAM_TRAIN);
    Dataset::from_rows(rows, labels, spec.k, mixture_provenance(spec, "train"))
}

/// Generates disjoint train and test sets from one spec. Both splits share
/// the class means; the sample noise comes from independent sub-streams of
/// the seed, so there is no leakage and `gen_mixture` equals the train half.
pub fn gen_mixture_split(spec: &MixtureSpec, test_n_per_class: usize) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    if test_n_per_class < 1 {
        return Err(Error::invalid_argument("test_n_per_class must be >= 1"));
    }
    let means = class_means(spec);
    let (train_rows, train_labels) = sample_block(spec, &means, spec.n_per_class, STREAM_TRAIN);
    let (test_rows, test_labels) = sample_block(spec, &means, test_n_per_class, STREAM_TEST);
    let train = Dataset::from_rows(
        train_rows,
        train_labels,
        spec.k,
        mixture_provenance(spec, "train"),
    )?;
    let test = Dataset::from_rows(
        test_rows,
        test_labels,
        spec.k,
        mixture_provenance(spec, "test"),
    )?;
    Ok((train, test))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Writes a dataset as `label,f0,...,f{d-1}` CSV. Features are printed with
/// the shortest representation that round-trips, so a written file reloads
/// bit-exactly.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("label");
    for j in 0..dataset.feature_dim() {
        write!(out, ",f{j}").unwrap();
    }
    out.push('\n');
    for i in 0..dataset.n() {
        write!(out, "{}", dataset.label(i)).unwrap();
        for v in dataset.row(i) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    write_file(path, out)
}

/// Loads a dataset CSV, inferring `K = max label + 1` and recording the file
/// path plus a content hash in the provenance.
pub fn load_table(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let hash = fnv1a64(text.as_bytes());

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse_line(1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "label" {
        return Err(Error::parse_line(
            1,
            format!("header must start with `label,f0,...`, got `{header}`"),
        ));
    }
    let d = cols.len() - 1;
    for (j, col) in cols[1..].iter().enumerate() {
        if *col != format!("f{j}") {
            return Err(Error::parse_line(
                1,
                format!("feature column {} must be named `f{j}`, got `{col}`", j + 1),
            ));
        }
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_label = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::parse_line(
                line_no,
                format!("expected {} fields, got {}", d + 1, fields.len()),
            ));
        }
        let label: usize = fields[0].parse().map_err(|_| {
            Error::parse_line(
                line_no,
                format!("label `{}` is not a non-negative integer", fields[0]),
            )
        })?;
        max_label = max_label.max(label);
        let mut row = Vec::with_capacity(d);
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse_line(line_no, format!("bad feature value `{f}`")))?;
            if !v.is_finite() {
                return Err(Error::parse_line(
                    line_no,
                    format!("non-finite feature value `{f}`"),
                ));
            }
            row.push(v);
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::parse_line(1, "file has a header but no data rows"));
    }
    Dataset::from_rows(
        rows,
        labels,
        max_label + 1,
        format!("{}#fnv1a64:{hash:016x}", path.display()),
    )
}

/// Writes teacher logits for every sample of a dataset, in dataset order.
pub fn save_teacher_logits(
    path: impl AsRef<Path>,
    dataset: &Dataset,
    logits: &[LogitVec],
) -> Result<()> {
    if logits.len() != dataset.n() {
        return Err(Error::invalid_argument(format!(
            "{} logit rows for {} samples",
            logits.len(),
            dataset.n()
        )));
    }
    let k = logits[0].len();
    let mut out = String::from("id,label");
    for j in 0..k {
        write!(out, ",logit_{j}").unwrap();
    }
    out.push('\n');
    for (i, row) in logits.iter().enumerate() {
        if row.len() != k {
            return Err(Error::invalid_argument(format!(
                "logit row {i} has {} classes, expected {k}",
                row.len()
            )));
        }
        write!(out, "{i},{}", dataset.label(i)).unwrap();
        for v in row.values() {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    write_file(path, out)
}

/// Reads a teacher-logits CSV back as `(labels, logit rows)`; ids must be
/// the contiguous sample indices the writer produced.
pub fn load_teacher_logits(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<LogitVec>)> {
    let text = read_file(path.as_ref())?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse_line(1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 4 || cols[0] != "id" || cols[1] != "label" {
        return Err(Error::parse_line(
            1,
            format!("header must start with `id,label,logit_0,...`, got `{header}`"),
        ));
    }
    let k = cols.len() - 2;
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != k + 2 {
            return Err(Error::parse_line(
                line_no,
                format!("expected {} fields, got {}", k + 2, fields.len()),
            ));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse_line(line_no, format!("bad id `{}`", fields[0])))?;
        if id != rows.len() {
            return Err(Error::parse_line(
                line_no,
                format!("id {id} out of order, expected {}", rows.len()),
            ));
        }
        let label: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse_line(line_no, format!("bad label `{}`", fields[1])))?;
        let values: Vec<f64> = fields[2..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse_line(line_no, format!("bad logit value `{f}`")))
            })
            .collect::<Result<_>>()?;
        labels.push(label);
        rows.push(LogitVec::new(values)?);
    }
    if rows.is_empty() {
        return Err(Error::parse_line(1, "file has a header but no data rows"));
    }
    Ok((labels, rows))
}

/// Per-feature affine transform fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-8;

impl Standardization {
    pub fn fit(train: &Dataset) -> Self {
        let d = train.feature_dim();
        let n = train.n() as f64;
        let mut mean = vec![0.0; d];
        for i in 0..train.n() {
            for (m, v) in mean.iter_mut().zip(train.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for i in 0..train.n() {
            for ((s, m), v) in var.iter_mut().zip(&mean).zip(train.row(i)) {
                let c = v - m;
                *s += c * c;
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Standardization { mean, std }
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.feature_dim() != self.mean.len() {
            return Err(Error::invalid_argument(format!(
                "dataset has {} features, transform was fitted on {}",
                dataset.feature_dim(),
                self.mean.len()
            )));
        }
        let rows: Vec<Vec<f64>> = (0..dataset.n())
            .map(|i| {
                dataset
                    .row(i)
                    .iter()
                    .zip(&self.mean)
                    .zip(&self.std)
                    .map(|((v, m), s)| (v - m) / s)
                    .collect()
            })
            .collect();
        Dataset::from_rows(
            rows,
            dataset.labels().to_vec(),
            dataset.num_classes(),
            format!("{}+standardized", dataset.provenance()),
        )
    }
}

/// Z-scores every dataset using statistics of the training split only.
pub fn standardize(
    train: &Dataset,
    others: &[&Dataset],
) -> Result<(Dataset, Vec<Dataset>, Standardization)> {
    let transform = Standardization::fit(train);
    let train_out = transform.apply(train)?;
    let others_out = others
        .iter()
        .map(|ds| transform.apply(ds))
        .collect::<Result<Vec<_>>>()?;
    Ok((train_out, others_out, transform))
}

/// A seeded permutation of `[0, n)` split into consecutive `batch_size`
/// chunks; the final short chunk is kept.
pub fn batch_iter(dataset: &Dataset, batch_size: usize, epoch_seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::invalid_argument("batch_size must be >= 1"));
    }
    let mut order: Vec<usize> = (0..dataset.n()).collect();
    SplitMix64::new(epoch_seed).shuffle(&mut order);
    Ok(order.chunks(batch_size).map(|c| c.to_vec()).collect())
}
