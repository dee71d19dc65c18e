//! Elastic-net linear probes trained with mini-batch SGD.
//!
//! Features are standardized with train-split statistics. The objective is
//! mean cross-entropy (squared error in regression mode) plus
//! `l1 * ||W||_1 + l2 * ||W||_2^2`; the L1 term enters the step as a
//! subgradient `sign(w)`. Bias is not penalized.

use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::{ActivationSet, FeatureView, NeuronId, RowSource};
use crate::error::{Error, Result};
use crate::labels::{LabeledDataset, TRAIN};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    #[default]
    Classification,
    Regression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l1_lambda: f64,
    pub l2_lambda: f64,
    pub seed: u64,
    pub task_mode: TaskMode,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 128,
            l1_lambda: 1e-5,
            l2_lambda: 1e-5,
            seed: 42,
            task_mode: TaskMode::Classification,
        }
    }
}

impl ProbeConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        ProbeConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn unregularized(&self) -> Self {
        ProbeConfig {
            l1_lambda: 0.0,
            l2_lambda: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs > 0
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.l1_lambda >= 0.0
            && self.l2_lambda >= 0.0;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "invalid probe config {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-feature affine map onto zero mean, unit variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// `1 / std`, or 0 for zero-variance features.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit<S: RowSource + ?Sized>(source: &S, rows: &[usize]) -> Self {
        let f = source.num_features();
        let mut buf = vec![0.0; f];
        let mut mean = vec![0.0; f];
        for &r in rows {
            source.fill_row(r, &mut buf);
            for (m, v) in mean.iter_mut().zip(&buf) {
                *m += v;
            }
        }
        let n = rows.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut ss = vec![0.0; f];
        for &r in rows {
            source.fill_row(r, &mut buf);
            for ((s, v), m) in ss.iter_mut().zip(&buf).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = ss
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) * s;
        }
    }
}

mod matrix_rows {
    use ndarray::Array2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(serde::de::Error::custom("ragged weight matrix"));
        }
        Array2::from_shape_vec((r, c), rows.into_iter().flatten().collect())
            .map_err(serde::de::Error::custom)
    }
}

/// A trained linear probe over standardized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    /// `C x F`; one row per class (a single row in regression mode).
    #[serde(with = "matrix_rows")]
    pub weights: Array2<f64>,
    pub bias: Vec<f64>,
    pub label_names: Vec<String>,
    pub feature_ids: Vec<NeuronId>,
    pub standardizer: Standardizer,
    pub task_mode: TaskMode,
}

impl ProbeModel {
    pub fn num_features(&self) -> usize {
        self.feature_ids.len()
    }

    /// Raw scores for one unstandardized feature row.
    fn scores(&self, row: &mut [f64], out: &mut [f64]) {
        self.standardizer.apply(row);
        for (c, o) in out.iter_mut().enumerate() {
            let w = self.weights.row(c);
            *o = self.bias[c] + w.iter().zip(row.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug)]
pub enum Targets<'a> {
    Classes { labels: &'a [usize], classes: usize },
    Values(&'a [f64]),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial_loss: f64,
    pub final_loss: f64,
}

struct Optimizer<'a> {
    weights: Array2<f64>,
    bias: Vec<f64>,
    targets: Targets<'a>,
    cfg: &'a ProbeConfig,
}

impl Optimizer<'_> {
    fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    /// Turns raw scores into d(loss)/d(score), in place, for one row.
    /// Returns the unpenalized loss of the row.
    fn score_gradient(&self, row: usize, scores: &mut [f64]) -> f64 {
        match self.targets {
            Targets::Classes { labels, .. } => {
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for s in scores.iter_mut() {
                    *s = (*s - max).exp();
                    z += *s;
                }
                let y = labels[row];
                let loss = -(scores[y] / z).ln();
                for s in scores.iter_mut() {
                    *s /= z;
                }
                scores[y] -= 1.0;
                loss
            }
            Targets::Values(values) => {
                let err = scores[0] - values[row];
                scores[0] = 2.0 * err;
                err * err
            }
        }
    }

    fn penalty(&self) -> f64 {
        let l1: f64 = self.weights.iter().map(|w| w.abs()).sum();
        let l2: f64 = self.weights.iter().map(|w| w * w).sum();
        self.cfg.l1_lambda * l1 + self.cfg.l2_lambda * l2
    }

    fn loss<S: RowSource + ?Sized>(&self, source: &S, std: &Standardizer, rows: &[usize]) -> f64 {
        let mut buf = vec![0.0; source.num_features()];
        let mut scores = vec![0.0; self.outputs()];
        let mut total = 0.0;
        for &r in rows {
            source.fill_row(r, &mut buf);
            std.apply(&mut buf);
            for (c, s) in scores.iter_mut().enumerate() {
                *s = self.bias[c]
                    + self
                        .weights
                        .row(c)
                        .iter()
                        .zip(&buf)
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
            }
            total += self.score_gradient(r, &mut scores);
        }
        total / rows.len() as f64 + self.penalty()
    }
}

fn check_targets(targets: &Targets<'_>, rows: &[usize]) -> Result<usize> {
    if rows.is_empty() {
        return Err(Error::EmptySplit(TRAIN.into()));
    }
    match *targets {
        Targets::Classes { labels, classes } => {
            let first = labels[rows[0]];
            if classes < 2 || rows.iter().all(|&r| labels[r] == first) {
                return Err(Error::SingleClassTrain);
            }
            Ok(classes)
        }
        Targets::Values(_) => Ok(1),
    }
}

/// Weights, bias, the fitted standardizer and the optional loss history.
pub type Fitted = (Array2<f64>, Vec<f64>, Standardizer, Option<TrainHistory>);

/// Fits a probe on `train_rows` of any row source. Deterministic in
/// `cfg.seed`: it fixes the weight initialization and every epoch's shuffle.
pub fn train_source<S: RowSource + ?Sized>(
    source: &S,
    targets: Targets<'_>,
    train_rows: &[usize],
    cfg: &ProbeConfig,
    track_loss: bool,
) -> Result<Fitted> {
    cfg.validate()?;
    let outputs = check_targets(&targets, train_rows)?;
    let f = source.num_features();
    let std = Standardizer::fit(source, train_rows);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weights = Array2::from_shape_fn((outputs, f), |_| rng.random_range(-0.01..0.01));
    let mut opt = Optimizer {
        weights,
        bias: vec![0.0; outputs],
        targets,
        cfg,
    };
    let initial_loss = track_loss.then(|| opt.loss(source, &std, train_rows));

    let bs = cfg.batch_size.min(train_rows.len());
    let mut batch = Array2::<f64>::zeros((bs, f));
    let mut grad_scores = Array2::<f64>::zeros((bs, outputs));
    let mut order = train_rows.to_vec();
    let lr = cfg.learning_rate;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(bs) {
            let b = chunk.len();
            for (k, &r) in chunk.iter().enumerate() {
                let mut row = batch.row_mut(k);
                let row = row.as_slice_mut().expect("standard layout");
                source.fill_row(r, row);
                std.apply(row);
            }
            let xb = batch.slice(s![..b, ..]);
            let mut g = grad_scores.slice_mut(s![..b, ..]);
            g.assign(&xb.dot(&opt.weights.t()));
            for (k, &r) in chunk.iter().enumerate() {
                let mut gr = g.row_mut(k);
                let gr = gr.as_slice_mut().expect("standard layout");
                for (v, bias) in gr.iter_mut().zip(&opt.bias) {
                    *v += bias;
                }
                opt.score_gradient(r, gr);
            }
            g.mapv_inplace(|v| v / b as f64);
            let grad_w = g.t().dot(&xb);
            let grad_b = g.sum_axis(Axis(0));
            let (l1, l2) = (cfg.l1_lambda, cfg.l2_lambda);
            ndarray::Zip::from(&mut opt.weights)
                .and(&grad_w)
                .for_each(|w, &gw| {
                    let sign = if *w > 0.0 {
                        1.0
                    } else if *w < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    *w -= lr * (gw + l1 * sign + 2.0 * l2 * *w);
                });
            for (bias, gb) in opt.bias.iter_mut().zip(grad_b.iter()) {
                *bias -= lr * gb;
            }
        }
    }
    let history = initial_loss.map(|initial_loss| TrainHistory {
        initial_loss,
        final_loss: opt.loss(source, &std, train_rows),
    });
    Ok((opt.weights, opt.bias, std, history))
}

fn train_inner(
    view: &FeatureView<'_>,
    data: &LabeledDataset,
    cfg: &ProbeConfig,
    track_loss: bool,
) -> Result<(ProbeModel, Option<TrainHistory>)> {
    data.check_rows(view.num_rows())?;
    let train_rows = data.split(TRAIN)?;
    let values;
    let targets = match cfg.task_mode {
        TaskMode::Classification => Targets::Classes {
            labels: data.labels(),
            classes: data.num_classes(),
        },
        TaskMode::Regression => {
            values = data.targets()?;
            Targets::Values(&values)
        }
    };
    let (weights, bias, standardizer, history) =
        train_source(view, targets, train_rows, cfg, track_loss)?;
    let model = ProbeModel {
        weights,
        bias,
        label_names: data.label_names().to_vec(),
        feature_ids: view.neurons().to_vec(),
        standardizer,
        task_mode: cfg.task_mode,
    };
    Ok((model, history))
}

/// Trains on the dataset's train split.
pub fn train(
    view: &FeatureView<'_>,
    data: &LabeledDataset,
    cfg: &ProbeConfig,
) -> Result<ProbeModel> {
    train_inner(view, data, cfg, false).map(|(m, _)| m)
}

/// Like [`train`], also reporting the regularized training loss at
/// initialization and after the last epoch.
pub fn train_with_history(
    view: &FeatureView<'_>,
    data: &LabeledDataset,
    cfg: &ProbeConfig,
) -> Result<(ProbeModel, TrainHistory)> {
    train_inner(view, data, cfg, true).map(|(m, h)| (m, h.expect("tracked")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    PearsonR,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub label: String,
    pub correct: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub split: String,
    pub metric: Metric,
    /// `correct / total` for classification, Pearson r for regression.
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub per_class: Vec<ClassAccuracy>,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Scores `model` on `split`, reading its features from `view`'s source.
pub fn evaluate(
    model: &ProbeModel,
    view: &FeatureView<'_>,
    data: &LabeledDataset,
    split: &str,
) -> Result<EvalResult> {
    let source = view.source();
    data.check_rows(source.num_tokens())?;
    let rows = data.split(split)?;
    if rows.is_empty() {
        return Err(Error::EmptySplit(split.to_string()));
    }
    let features = source.view(model.feature_ids.clone())?;
    let mut buf = vec![0.0; features.num_features()];
    let mut scores = vec![0.0; model.weights.nrows()];
    match model.task_mode {
        TaskMode::Classification => {
            let mut per_class: Vec<ClassAccuracy> = model
                .label_names
                .iter()
                .map(|l| ClassAccuracy {
                    label: l.clone(),
                    correct: 0,
                    total: 0,
                })
                .collect();
            let mut correct = 0;
            for &r in rows {
                features.fill_row(r, &mut buf);
                model.scores(&mut buf, &mut scores);
                let y = data.labels()[r];
                let hit = argmax(&scores) == y;
                correct += hit as usize;
                per_class[y].total += 1;
                per_class[y].correct += hit as usize;
            }
            Ok(EvalResult {
                split: split.to_string(),
                metric: Metric::Accuracy,
                accuracy: correct as f64 / rows.len() as f64,
                correct,
                total: rows.len(),
                per_class,
            })
        }
        TaskMode::Regression => {
            let targets = data.targets()?;
            let mut pred = Vec::with_capacity(rows.len());
            let mut truth = Vec::with_capacity(rows.len());
            for &r in rows {
                features.fill_row(r, &mut buf);
                model.scores(&mut buf, &mut scores);
                pred.push(scores[0]);
                truth.push(targets[r]);
            }
            Ok(EvalResult {
                split: split.to_string(),
                metric: Metric::PearsonR,
                accuracy: pearson(&pred, &truth),
                correct: 0,
                total: rows.len(),
                per_class: Vec::new(),
            })
        }
    }
}

/// Probe over the concatenation of all layers, evaluated on `split`.
pub fn train_oracle(
    a: &ActivationSet,
    data: &LabeledDataset,
    cfg: &ProbeConfig,
    split: &str,
) -> Result<(ProbeModel, EvalResult)> {
    let view = a.all_neurons();
    let model = train(&view, data, cfg)?;
    let eval = evaluate(&model, &view, data, split)?;
    Ok((model, eval))
}
