//! Task environments: the synthetic regression and classification generators,
//! ingestion of long-form ratings data, task-level splits and oracle
//! statistics of the task distribution.
//!
//! Every task draws from its own ChaCha stream seeded by [`mix_seed`] of the
//! environment seed and the task index, so generation is reproducible and
//! independent of how tasks are scheduled across threads.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::task_data::{BiasVector, TaskDataset, TaskSplit};

/// Rejection-sampling attempts allowed per classification point.
pub const MAX_REJECTION_ATTEMPTS: usize = 1_000_000;

/// Learning problem of an environment; fixes the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskMode {
    RegressionAbsolute,
    ClassificationHinge,
}

impl TaskMode {
    pub fn loss(self) -> LossKind {
        match self {
            TaskMode::RegressionAbsolute => LossKind::Absolute,
            TaskMode::ClassificationHinge => LossKind::Hinge,
        }
    }
}

/// Parameters of a synthetic task distribution.
///
/// Task weights are `w = task_mean + task_std * g` with `g` standard normal;
/// inputs are uniform on the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub task_mean: Vec<f64>,
    pub task_std: f64,
    pub mode: TaskMode,
    /// Regression only: noise std is `|w| / (sqrt(d) * snr)`.
    pub snr: f64,
    /// Classification only: points with `|<x, w>|` below this are rejected.
    pub margin_threshold: f64,
    /// Classification only: `P(y = 1) = 1 / (1 + logistic_scale * exp(-<x, w>))`.
    pub logistic_scale: f64,
    pub seed: u64,
}

impl EnvironmentSpec {
    /// d = 30, n = 10 training points, mean `4 * 1`, unit task std, SNR 10.
    pub fn regression_default(seed: u64) -> Self {
        Self {
            d: 30,
            n_train: 10,
            n_test: 100,
            task_mean: vec![4.0; 30],
            task_std: 1.0,
            mode: TaskMode::RegressionAbsolute,
            snr: 10.0,
            margin_threshold: 0.5,
            logistic_scale: 10.0,
            seed,
        }
    }

    pub fn classification_default(seed: u64) -> Self {
        Self {
            mode: TaskMode::ClassificationHinge,
            ..Self::regression_default(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, value: f64| Err(Error::InvalidParameter { name, value });
        if self.d == 0 {
            return bad("d", 0.0);
        }
        if self.n_train == 0 {
            return bad("n_train", 0.0);
        }
        if self.n_test == 0 {
            return bad("n_test", 0.0);
        }
        if self.task_mean.len() != self.d {
            return Err(Error::DimensionMismatch {
                context: "task_mean",
                expected: self.d,
                found: self.task_mean.len(),
            });
        }
        if self.task_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("task_mean"));
        }
        if !(self.task_std >= 0.0 && self.task_std.is_finite()) {
            return bad("task_std", self.task_std);
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return bad("snr", self.snr);
        }
        if !(self.margin_threshold >= 0.0 && self.margin_threshold.is_finite()) {
            return bad("margin_threshold", self.margin_threshold);
        }
        if !(self.logistic_scale > 0.0 && self.logistic_scale.is_finite()) {
            return bad("logistic_scale", self.logistic_scale);
        }
        Ok(())
    }

    pub fn task_mean(&self) -> Array1<f64> {
        Array1::from(self.task_mean.clone())
    }
}

/// A stream of tasks sharing dimension and loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskCollection {
    splits: Vec<TaskSplit>,
    true_weights: Option<Vec<Array1<f64>>>,
}

impl TaskCollection {
    pub fn new(splits: Vec<TaskSplit>, true_weights: Option<Vec<Array1<f64>>>) -> Result<Self> {
        if let Some(first) = splits.first() {
            let (d, loss) = (first.train.dim(), first.train.loss());
            for (i, s) in splits.iter().enumerate() {
                if s.train.dim() != d || s.train.loss() != loss {
                    return Err(Error::InconsistentTasks(format!(
                        "task {i} differs in dimension or loss from task 0"
                    )));
                }
            }
        }
        if let Some(ws) = &true_weights {
            if ws.len() != splits.len() {
                return Err(Error::DimensionMismatch {
                    context: "true weights",
                    expected: splits.len(),
                    found: ws.len(),
                });
            }
            if let Some(s) = splits.first() {
                if let Some(w) = ws.iter().find(|w| w.len() != s.train.dim()) {
                    return Err(Error::DimensionMismatch {
                        context: "true weight vector",
                        expected: s.train.dim(),
                        found: w.len(),
                    });
                }
            }
        }
        Ok(Self {
            splits,
            true_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    /// `None` for an empty collection.
    pub fn dim(&self) -> Option<usize> {
        self.splits.first().map(|s| s.train.dim())
    }

    pub fn loss(&self) -> Option<LossKind> {
        self.splits.first().map(|s| s.train.loss())
    }

    pub fn splits(&self) -> &[TaskSplit] {
        &self.splits
    }

    pub fn true_weights(&self) -> Option<&[Array1<f64>]> {
        self.true_weights.as_deref()
    }

    pub fn train_sets(&self) -> impl Iterator<Item = &TaskDataset> {
        self.splits.iter().map(|s| &s.train)
    }

    /// Tasks at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InsufficientTasks {
                requested: bad + 1,
                available: self.len(),
            });
        }
        Ok(Self {
            splits: indices.iter().map(|&i| self.splits[i].clone()).collect(),
            true_weights: self
                .true_weights
                .as_ref()
                .map(|ws| indices.iter().map(|&i| ws[i].clone()).collect()),
        })
    }

    /// Empirical mean of the true task weights.
    pub fn mean_true_weight(&self) -> Result<Array1<f64>> {
        let ws = self
            .true_weights
            .as_ref()
            .ok_or(Error::MissingTrueWeights)?;
        let d = self.dim().ok_or(Error::EmptyDataset)?;
        let mut m = Array1::zeros(d);
        for w in ws {
            m += w;
        }
        Ok(m / ws.len() as f64)
    }
}

/// SplitMix64 finalizer applied to `seed + (index + 1) * 0x9E3779B97F4A7C15`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn task_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, index))
}

/// Uniform draw from the unit sphere in `R^d` (normalized Gaussian).
pub fn sample_sphere<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Array1<f64> {
    loop {
        let g: Array1<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.dot(&g).sqrt();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// `P(y = +1)` under the logistic label model.
pub fn positive_probability(z: f64, logistic_scale: f64) -> f64 {
    1.0 / (1.0 + logistic_scale * (-z).exp())
}

pub fn draw_label<R: Rng + ?Sized>(rng: &mut R, z: f64, logistic_scale: f64) -> f64 {
    if rng.random::<f64>() < positive_probability(z, logistic_scale) {
        1.0
    } else {
        -1.0
    }
}

fn task_weight<R: Rng + ?Sized>(rng: &mut R, spec: &EnvironmentSpec) -> Array1<f64> {
    spec.task_mean
        .iter()
        .map(|&m| m + spec.task_std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn rows_to_dataset(rows: &[Array1<f64>], labels: Vec<f64>, loss: LossKind) -> Result<TaskDataset> {
    let d = rows[0].len();
    let mut x = Array2::zeros((rows.len(), d));
    for (mut dst, src) in x.axis_iter_mut(Axis(0)).zip(rows) {
        dst.assign(src);
    }
    TaskDataset::new(x, Array1::from(labels), loss)
}

fn regression_task(spec: &EnvironmentSpec, index: usize) -> Result<(TaskSplit, Array1<f64>)> {
    let mut rng = task_rng(spec.seed, index as u64);
    let w = task_weight(&mut rng, spec);
    let sigma = w.dot(&w).sqrt() / ((spec.d as f64).sqrt() * spec.snr);
    let total = spec.n_train + spec.n_test;
    let mut rows = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for _ in 0..total {
        let x = sample_sphere(&mut rng, spec.d);
        let noise: f64 = rng.sample(StandardNormal);
        labels.push(x.dot(&w) + sigma * noise);
        rows.push(x);
    }
    let test_labels = labels.split_off(spec.n_train);
    let train = rows_to_dataset(&rows[..spec.n_train], labels, LossKind::Absolute)?;
    let test = rows_to_dataset(&rows[spec.n_train..], test_labels, LossKind::Absolute)?;
    Ok((TaskSplit::new(train, test)?, w))
}

fn classification_task(spec: &EnvironmentSpec, index: usize) -> Result<(TaskSplit, Array1<f64>)> {
    let mut rng = task_rng(spec.seed, index as u64);
    let w = task_weight(&mut rng, spec);
    let total = spec.n_train + spec.n_test;
    let mut rows = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for _ in 0..total {
        let mut accepted = None;
        for _ in 0..MAX_REJECTION_ATTEMPTS {
            let x = sample_sphere(&mut rng, spec.d);
            let z = x.dot(&w);
            if z.abs() >= spec.margin_threshold {
                accepted = Some((x, z));
                break;
            }
        }
        let (x, z) = accepted.ok_or_else(|| {
            Error::Generation(format!(
                "task {index}: no point with margin >= {} after {MAX_REJECTION_ATTEMPTS} attempts",
                spec.margin_threshold
            ))
        })?;
        labels.push(draw_label(&mut rng, z, spec.logistic_scale));
        rows.push(x);
    }
    let test_labels = labels.split_off(spec.n_train);
    let train = rows_to_dataset(&rows[..spec.n_train], labels, LossKind::Hinge)?;
    let test = rows_to_dataset(&rows[spec.n_train..], test_labels, LossKind::Hinge)?;
    Ok((TaskSplit::new(train, test)?, w))
}

fn generate(
    spec: &EnvironmentSpec,
    count: usize,
    expected: TaskMode,
    task: fn(&EnvironmentSpec, usize) -> Result<(TaskSplit, Array1<f64>)>,
) -> Result<TaskCollection> {
    spec.validate()?;
    if spec.mode != expected {
        return Err(Error::Generation(format!(
            "environment mode is {:?}, expected {expected:?}",
            spec.mode
        )));
    }
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            value: 0.0,
        });
    }
    let tasks: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| task(spec, i))
        .collect::<Result<_>>()?;
    let (splits, weights) = tasks.into_iter().unzip();
    TaskCollection::new(splits, Some(weights))
}

/// Regression tasks with absolute loss. Task `i` depends only on
/// `(spec, i)`, so a longer stream extends a shorter one.
pub fn gen_regression_tasks(spec: &EnvironmentSpec, count: usize) -> Result<TaskCollection> {
    generate(spec, count, TaskMode::RegressionAbsolute, regression_task)
}

/// Binary classification tasks with hinge loss and margin-based rejection.
pub fn gen_classification_tasks(spec: &EnvironmentSpec, count: usize) -> Result<TaskCollection> {
    generate(
        spec,
        count,
        TaskMode::ClassificationHinge,
        classification_task,
    )
}

/// Dispatches on `spec.mode`.
pub fn gen_tasks(spec: &EnvironmentSpec, count: usize) -> Result<TaskCollection> {
    match spec.mode {
        TaskMode::RegressionAbsolute => gen_regression_tasks(spec, count),
        TaskMode::ClassificationHinge => gen_classification_tasks(spec, count),
    }
}

/// Options for [`load_rating_tasks`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingOptions {
    pub mode: TaskMode,
    /// Classification label is `+1` iff rating > threshold.
    pub threshold: f64,
    pub n_train: usize,
    /// Seeds the within-task shuffle that picks training rows.
    pub seed: u64,
}

impl RatingOptions {
    pub fn new(mode: TaskMode, seed: u64) -> Self {
        Self {
            mode,
            threshold: 5.0,
            n_train: 8,
            seed,
        }
    }
}

fn ingestion(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Ingestion {
        location: location.into(),
        message: message.into(),
    }
}

/// Loads a long-form ratings CSV with header `task_id,x1,...,xd,rating`.
///
/// Tasks keep their order of first appearance. Within a task the rows are
/// shuffled with a seed derived from `opts.seed` and the task's position; the
/// first `n_train` become the training split. All inputs are divided by the
/// largest row norm in the file.
pub fn load_rating_tasks(path: &Path, opts: RatingOptions) -> Result<TaskCollection> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let header = reader.headers()?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let d = cols.len().saturating_sub(2);
    let well_formed = cols.len() >= 3
        && cols[0] == "task_id"
        && cols[cols.len() - 1] == "rating"
        && (1..=d).all(|j| cols[j] == format!("x{j}"));
    if !well_formed {
        return Err(ingestion(
            format!("{file}:1"),
            "header must be `task_id,x1,...,xd,rating`",
        ));
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (Vec<Array1<f64>>, Vec<f64>)> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != d + 2 {
            return Err(ingestion(
                format!("{file}:{line}"),
                format!("expected {} fields, found {}", d + 2, record.len()),
            ));
        }
        let parse = |j: usize| -> Result<f64> {
            let raw = record[j].trim();
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(ingestion(
                    format!("{file}:{line}"),
                    format!("field `{}` is not a finite number: `{raw}`", cols[j]),
                )),
            }
        };
        let x: Array1<f64> = (1..=d).map(parse).collect::<Result<_>>()?;
        let rating = parse(d + 1)?;
        if rating.fract() != 0.0 || !(0.0..=10.0).contains(&rating) {
            return Err(ingestion(
                format!("{file}:{line}"),
                format!("rating {rating} is not an integer in 0..=10"),
            ));
        }
        let id = record[0].trim().to_string();
        let entry = groups.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            (Vec::new(), Vec::new())
        });
        entry.0.push(x);
        entry.1.push(rating);
    }
    if order.is_empty() {
        return Err(ingestion(file, "no data rows"));
    }

    let short: Vec<&str> = order
        .iter()
        .filter(|id| groups[*id].1.len() <= opts.n_train)
        .map(String::as_str)
        .collect();
    if !short.is_empty() {
        return Err(ingestion(
            file,
            format!(
                "tasks with fewer than {} rows: {}",
                opts.n_train + 1,
                short.join(", ")
            ),
        ));
    }

    let scale = groups
        .values()
        .flat_map(|(xs, _)| xs.iter().map(|x| x.dot(x).sqrt()))
        .fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let loss = opts.mode.loss();

    let mut splits = Vec::with_capacity(order.len());
    for (t, id) in order.iter().enumerate() {
        let (xs, ratings) = &groups[id];
        let mut idx: Vec<usize> = (0..ratings.len()).collect();
        idx.shuffle(&mut task_rng(opts.seed, t as u64));
        let rows: Vec<Array1<f64>> = idx.iter().map(|&k| &xs[k] / scale).collect();
        let labels: Vec<f64> = idx
            .iter()
            .map(|&k| match opts.mode {
                TaskMode::RegressionAbsolute => ratings[k],
                TaskMode::ClassificationHinge if ratings[k] > opts.threshold => 1.0,
                TaskMode::ClassificationHinge => -1.0,
            })
            .collect();
        let (train_y, test_y) = labels.split_at(opts.n_train);
        let train = rows_to_dataset(&rows[..opts.n_train], train_y.to_vec(), loss)?;
        let test = rows_to_dataset(&rows[opts.n_train..], test_y.to_vec(), loss)?;
        splits.push(TaskSplit::new(train, test)?);
    }
    TaskCollection::new(splits, None)
}

/// Index sets of a seeded permutation cut into `t_train`, `t_val`, `t_test`
/// contiguous blocks.
pub fn split_indices(
    count: usize,
    t_train: usize,
    t_val: usize,
    t_test: usize,
    seed: u64,
) -> Result<[Vec<usize>; 3]> {
    let requested = t_train + t_val + t_test;
    if requested > count {
        return Err(Error::InsufficientTasks {
            requested,
            available: count,
        });
    }
    let mut perm: Vec<usize> = (0..count).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val_end = t_train + t_val;
    Ok([
        perm[..t_train].to_vec(),
        perm[t_train..val_end].to_vec(),
        perm[val_end..requested].to_vec(),
    ])
}

/// Disjoint train/validation/test task collections.
pub fn split_collection(
    tasks: &TaskCollection,
    t_train: usize,
    t_val: usize,
    t_test: usize,
    seed: u64,
) -> Result<[TaskCollection; 3]> {
    let [a, b, c] = split_indices(tasks.len(), t_train, t_val, t_test, seed)?;
    Ok([tasks.select(&a)?, tasks.select(&b)?, tasks.select(&c)?])
}

/// `sqrt((1/2) mean_t |w_t - h|^2)` over the true task weights.
pub fn environment_variance(tasks: &TaskCollection, h: &BiasVector) -> Result<f64> {
    let ws = tasks.true_weights().ok_or(Error::MissingTrueWeights)?;
    if ws.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for w in ws {
        if w.len() != h.dim() {
            return Err(Error::DimensionMismatch {
                context: "environment variance bias",
                expected: w.len(),
                found: h.dim(),
            });
        }
        let diff = w - &h.view();
        total += diff.dot(&diff);
    }
    Ok((0.5 * total / ws.len() as f64).sqrt())
}

#[derive(Debug, Serialize, Deserialize)]
struct CollectionManifest {
    loss: LossKind,
    dim: usize,
    tasks: Vec<TaskEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TaskEntry {
    file: String,
    n_train: usize,
    n_test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    true_weight: Option<Vec<f64>>,
}

const MANIFEST_FILE: &str = "collection.toml";

fn write_rows(w: &mut csv::Writer<fs::File>, tag: &str, data: &TaskDataset) -> Result<()> {
    for k in 0..data.n() {
        let mut rec = vec![tag.to_string(), data.label(k).to_string()];
        rec.extend(data.row(k).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    Ok(())
}

/// Writes `collection.toml` plus one `task_NNNNN.csv` (`split,y,x1..xd`) per
/// task into `dir`. Floats are written in shortest round-trip form.
pub fn dump_collection(tasks: &TaskCollection, dir: &Path) -> Result<()> {
    let (d, loss) = match (tasks.dim(), tasks.loss()) {
        (Some(d), Some(l)) => (d, l),
        _ => return Err(Error::EmptyDataset),
    };
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(tasks.len());
    for (i, s) in tasks.splits().iter().enumerate() {
        let file = format!("task_{i:05}.csv");
        let mut w = csv::Writer::from_path(dir.join(&file))?;
        let mut header = vec!["split".to_string(), "y".to_string()];
        header.extend((1..=d).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        write_rows(&mut w, "train", &s.train)?;
        write_rows(&mut w, "test", &s.test)?;
        w.flush()?;
        entries.push(TaskEntry {
            file,
            n_train: s.train.n(),
            n_test: s.test.n(),
            true_weight: tasks.true_weights().map(|ws| ws[i].to_vec()),
        });
    }
    let manifest = CollectionManifest {
        loss,
        dim: d,
        tasks: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

/// Inverse of [`dump_collection`].
pub fn load_collection(dir: &Path) -> Result<TaskCollection> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: CollectionManifest =
        toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut splits = Vec::with_capacity(manifest.tasks.len());
    let mut weights = Vec::new();
    for entry in &manifest.tasks {
        let path = dir.join(&entry.file);
        let mut reader = csv::Reader::from_path(&path)?;
        let mut parts: [(Vec<Array1<f64>>, Vec<f64>); 2] = Default::default();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let at = || format!("{}:{}", path.display(), i + 2);
            if rec.len() != manifest.dim + 2 {
                return Err(ingestion(at(), "wrong number of fields"));
            }
            let slot = match &rec[0] {
                "train" => 0,
                "test" => 1,
                other => return Err(ingestion(at(), format!("unknown split `{other}`"))),
            };
            let vals: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|v| v.parse::<f64>().map_err(|e| ingestion(at(), e.to_string())))
                .collect::<Result<_>>()?;
            parts[slot].1.push(vals[0]);
            parts[slot].0.push(Array1::from(vals[1..].to_vec()));
        }
        let [(xtr, ytr), (xte, yte)] = parts;
        if ytr.len() != entry.n_train
            || yte.len() != entry.n_test
            || ytr.is_empty()
            || yte.is_empty()
        {
            return Err(ingestion(
                path.display().to_string(),
                "row counts disagree with the manifest",
            ));
        }
        let train = rows_to_dataset(&xtr, ytr, manifest.loss)?;
        let test = rows_to_dataset(&xte, yte, manifest.loss)?;
        splits.push(TaskSplit::new(train, test)?);
        if let Some(w) = &entry.true_weight {
            weights.push(Array1::from(w.clone()));
        }
    }
    let true_weights = match weights.len() {
        0 => None,
        k if k == splits.len() => Some(weights),
        _ => {
            return Err(Error::InconsistentTasks(
                "true weights recorded for only some tasks".into(),
            ))
        }
    };
    TaskCollection::new(splits, true_weights)
}

/// Bias vector equal to `w` (convenience for oracle baselines).
pub fn bias_from(w: ArrayView1<f64>) -> Result<BiasVector> {
    BiasVector::new(w.to_owned())
}
