//! Neuron ranking from probe weights and the minimal-prefix search.

use serde::{Deserialize, Serialize};

use crate::activation::{FeatureView, NeuronId};
use crate::error::{Error, Result};
use crate::labels::LabeledDataset;
use crate::probe::{evaluate, train, EvalResult, ProbeConfig, ProbeModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Importance {
    /// `sum_c |W[c][n]|`.
    #[default]
    Aggregate,
    /// `max_c |W[c][n]| / sum_m |W[c][m]|`: a neuron ranks high if it carries
    /// a large share of any single class's weight mass.
    PerClassShare,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedNeuron {
    pub neuron: NeuronId,
    pub importance: f64,
}

/// Neurons in descending importance, ties by ascending id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronRanking {
    pub importance: Importance,
    pub entries: Vec<RankedNeuron>,
}

impl NeuronRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self, k: usize) -> Vec<NeuronId> {
        self.entries.iter().take(k).map(|e| e.neuron).collect()
    }

    pub fn position(&self, neuron: NeuronId) -> Option<usize> {
        self.entries.iter().position(|e| e.neuron == neuron)
    }
}

pub fn rank(model: &ProbeModel) -> NeuronRanking {
    rank_with(model, Importance::Aggregate)
}

pub fn rank_with(model: &ProbeModel, importance: Importance) -> NeuronRanking {
    let w = &model.weights;
    let scores: Vec<f64> = match importance {
        Importance::Aggregate => w
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum())
            .collect(),
        Importance::PerClassShare => {
            let mass: Vec<f64> = w
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum())
                .collect();
            w.columns()
                .into_iter()
                .map(|c| {
                    c.iter()
                        .zip(&mass)
                        .map(|(v, m)| if *m > 0.0 { v.abs() / m } else { 0.0 })
                        .fold(0.0, f64::max)
                })
                .collect()
        }
    };
    let mut entries: Vec<RankedNeuron> = model
        .feature_ids
        .iter()
        .zip(scores)
        .map(|(&neuron, importance)| RankedNeuron { neuron, importance })
        .collect();
    entries.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then(a.neuron.cmp(&b.neuron))
    });
    NeuronRanking {
        importance,
        entries,
    }
}

/// Candidate prefix sizes: 10..=100 by 10, 150..=1000 by 50, then by 250,
/// clipped to `features` and ending at `features`.
pub fn default_schedule(features: usize) -> Vec<usize> {
    let grid = (10..=100)
        .step_by(10)
        .chain((150..=1000).step_by(50))
        .chain((1250..).step_by(250));
    let mut out: Vec<usize> = grid.take_while(|&s| s < features).collect();
    out.push(features);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub size: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalSetResult {
    pub selected: Vec<NeuronId>,
    pub accuracy: EvalResult,
    pub oracle_accuracy: f64,
    pub retention: f64,
    pub search_trace: Vec<TracePoint>,
}

/// Outcome of a search that found no satisfying prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchFailure {
    pub required: f64,
    pub best_retention: f64,
    pub search_trace: Vec<TracePoint>,
}

impl From<SearchFailure> for Error {
    fn from(f: SearchFailure) -> Self {
        Error::NoSatisfyingSet {
            required: f.required,
            best: f.best_retention,
        }
    }
}

pub struct MinimalSetSearch<'s> {
    pub oracle_accuracy: f64,
    pub retention: f64,
    pub schedule: &'s [usize],
    pub split: &'s str,
}

impl MinimalSetSearch<'_> {
    /// Retrains a fresh probe (same seed) on each ranking prefix in schedule
    /// order and returns the first that reaches `retention * oracle`.
    ///
    /// The outer error covers data problems; the inner one a search that
    /// exhausted the schedule.
    pub fn run(
        &self,
        view: &FeatureView<'_>,
        data: &LabeledDataset,
        ranking: &NeuronRanking,
        cfg: &ProbeConfig,
    ) -> Result<std::result::Result<MinimalSetResult, SearchFailure>> {
        if !(self.retention > 0.0 && self.retention <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "retention {} outside (0,1]",
                self.retention
            )));
        }
        if self.oracle_accuracy <= 0.0 {
            return Err(Error::InvalidArgument(
                "oracle accuracy must be positive".into(),
            ));
        }
        if self.schedule.windows(2).any(|w| w[1] <= w[0]) || self.schedule.first() == Some(&0) {
            return Err(Error::InvalidArgument(
                "schedule must be strictly ascending and positive".into(),
            ));
        }
        let source = view.source();
        let required = self.retention * self.oracle_accuracy;
        let mut trace = Vec::new();
        let mut best = 0.0f64;
        for &size in self.schedule.iter().take_while(|&&s| s <= ranking.len()) {
            let selected = ranking.top(size);
            let sub = source.view(selected.clone())?;
            let model = train(&sub, data, cfg)?;
            let eval = evaluate(&model, &sub, data, self.split)?;
            trace.push(TracePoint {
                size,
                accuracy: eval.accuracy,
            });
            best = best.max(eval.accuracy);
            if eval.accuracy >= required {
                return Ok(Ok(MinimalSetResult {
                    selected,
                    retention: eval.accuracy / self.oracle_accuracy,
                    accuracy: eval,
                    oracle_accuracy: self.oracle_accuracy,
                    search_trace: trace,
                }));
            }
        }
        Ok(Err(SearchFailure {
            required,
            best_retention: best / self.oracle_accuracy,
            search_trace: trace,
        }))
    }
}

/// [`MinimalSetSearch::run`] flattened: an exhausted schedule becomes
/// [`Error::NoSatisfyingSet`].
#[allow(clippy::too_many_arguments)]
pub fn minimal_set(
    view: &FeatureView<'_>,
    data: &LabeledDataset,
    ranking: &NeuronRanking,
    oracle_accuracy: f64,
    retention: f64,
    cfg: &ProbeConfig,
    schedule: &[usize],
    split: &str,
) -> Result<MinimalSetResult> {
    let search = MinimalSetSearch {
        oracle_accuracy,
        retention,
        schedule,
        split,
    };
    Ok(search.run(view, data, ranking, cfg)??)
}
