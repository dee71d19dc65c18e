//! Layer selection and the three-stage reduction: cumulative layer
//! selection (LS), correlation clustering (CC), then feature selection (FS)
//! on the clustered representatives.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::{ActivationSet, NeuronId};
use crate::clustering::{cluster, pick_representatives, ReduceStrategy};
use crate::correlation::pearson_matrix;
use crate::error::{Error, Result};
use crate::labels::{LabeledDataset, DEV};
use crate::probe::{evaluate, train, train_oracle, ProbeConfig};
use crate::ranking::{default_schedule, rank, MinimalSetResult, MinimalSetSearch};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LsMode {
    /// One probe per layer.
    Individual,
    /// One probe per prefix `0..=i` of layers.
    #[default]
    CumulativeConcat,
}

impl std::str::FromStr for LsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "individual" => Ok(LsMode::Individual),
            "cumulative" | "cumulative_concat" => Ok(LsMode::CumulativeConcat),
            other => Err(Error::InvalidArgument(format!(
                "unknown layer-selection mode '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSelection {
    pub selected_layer: usize,
    pub mode: LsMode,
    /// Accuracy of layer `i` alone (individual) or of layers `0..=i`
    /// (cumulative).
    pub per_layer_acc: Vec<f64>,
    pub oracle_acc: f64,
    pub threshold: f64,
    /// Layers meeting `threshold * oracle_acc`.
    pub passing_layers: Vec<usize>,
    /// Set when no layer passed and the full concatenation was substituted.
    pub fallback: bool,
}

impl LayerSelection {
    pub fn require(self) -> Result<Self> {
        if self.fallback {
            return Err(Error::NoLayerSatisfies {
                required: self.threshold,
            });
        }
        Ok(self)
    }

    /// Number of layers the selection feeds forward in cumulative use.
    pub fn layers_used(&self) -> usize {
        self.selected_layer + 1
    }
}

/// Trains the oracle and one probe per layer (or layer prefix) and picks
/// the lowest layer within `threshold` of the oracle on `split`.
pub fn layer_selector(
    a: &ActivationSet,
    data: &LabeledDataset,
    cfg: &ProbeConfig,
    threshold: f64,
    mode: LsMode,
    split: &str,
) -> Result<LayerSelection> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} outside (0,1]"
        )));
    }
    let (_, oracle) = train_oracle(a, data, cfg, split)?;
    let last = a.num_layers() - 1;
    let per_layer_acc: Vec<f64> = (0..a.num_layers())
        .into_par_iter()
        .map(|i| {
            if mode == LsMode::CumulativeConcat && i == last {
                // identical view and seed as the oracle
                return Ok(oracle.accuracy);
            }
            let view = match mode {
                LsMode::Individual => a.layer_view(i)?,
                LsMode::CumulativeConcat => a.concat_layers(i)?,
            };
            let model = train(&view, data, cfg)?;
            Ok(evaluate(&model, &view, data, split)?.accuracy)
        })
        .collect::<Result<_>>()?;
    let required = threshold * oracle.accuracy;
    let passing_layers: Vec<usize> = (0..per_layer_acc.len())
        .filter(|&i| per_layer_acc[i] >= required)
        .collect();
    let (selected_layer, fallback) = match passing_layers.first() {
        Some(&l) => (l, false),
        None => (last, true),
    };
    Ok(LayerSelection {
        selected_layer,
        mode,
        per_layer_acc,
        oracle_acc: oracle.accuracy,
        threshold,
        passing_layers,
        fallback,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub task: String,
    pub probe: ProbeConfig,
    pub ls_threshold: f64,
    pub cc_threshold: f64,
    pub fs_retention: f64,
    pub reduce: ReduceStrategy,
    /// Prefix sizes for FS; `None` uses [`default_schedule`].
    pub schedule: Option<Vec<usize>>,
    /// Split on which every accuracy comparison is made.
    pub split: String,
    /// Stage seeds are `seed + 1` (LS), `+ 2` (CC reduce), `+ 3` (FS).
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            task: "task".into(),
            probe: ProbeConfig::default(),
            ls_threshold: 0.99,
            cc_threshold: 0.7,
            fs_retention: 0.99,
            reduce: ReduceStrategy::FirstIndex,
            schedule: None,
            split: DEV.into(),
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStage {
    pub threshold: f64,
    pub input_neurons: usize,
    pub retained: usize,
    pub representatives: Vec<NeuronId>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub ls_seconds: f64,
    pub cc_seconds: f64,
    pub fs_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub task: String,
    pub total_neurons: usize,
    pub oracle_acc: f64,
    pub ls: LayerSelection,
    pub cc: ClusterStage,
    pub fs: MinimalSetResult,
    /// FS exhausted its schedule; `fs.selected` is every CC representative.
    pub fs_fallback: bool,
    pub final_neurons: usize,
    pub percent_reduction: f64,
    pub timing: StageTiming,
}

impl PipelineReport {
    /// FS selection inside the CC representatives, and those inside the
    /// selected layer prefix.
    pub fn stages_contained(&self, layer_size: usize) -> bool {
        let reps: std::collections::HashSet<_> = self.cc.representatives.iter().collect();
        self.fs.selected.iter().all(|n| reps.contains(n))
            && self
                .cc
                .representatives
                .iter()
                .all(|n| n.layer(layer_size) <= self.ls.selected_layer)
    }
}

pub fn run_pipeline(
    a: &ActivationSet,
    data: &LabeledDataset,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    let split = cfg.split.as_str();

    let started = Instant::now();
    let ls_cfg = cfg.probe.with_seed(cfg.seed.wrapping_add(1));
    let ls = layer_selector(
        a,
        data,
        &ls_cfg,
        cfg.ls_threshold,
        LsMode::CumulativeConcat,
        split,
    )
    .map_err(Error::at_stage("layer-selection"))?;
    let ls_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let cc = (|| {
        let v1 = a.concat_layers(ls.selected_layer)?;
        let corr = pearson_matrix(&v1)?;
        let clustering = cluster(&corr, cfg.cc_threshold)?;
        let mut representatives =
            pick_representatives(&clustering, cfg.reduce, cfg.seed.wrapping_add(2));
        representatives.sort_unstable();
        Ok(ClusterStage {
            threshold: cfg.cc_threshold,
            input_neurons: v1.num_features(),
            retained: representatives.len(),
            representatives,
        })
    })()
    .map_err(Error::at_stage("correlation-clustering"))?;
    let cc_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let (fs, fs_fallback) = (|| {
        let fs_cfg = cfg.probe.with_seed(cfg.seed.wrapping_add(3));
        let v2 = a.view(cc.representatives.clone())?;
        let model = train(&v2, data, &fs_cfg)?;
        let ranking = rank(&model);
        let schedule = cfg
            .schedule
            .clone()
            .unwrap_or_else(|| default_schedule(v2.num_features()));
        let search = MinimalSetSearch {
            oracle_accuracy: ls.oracle_acc,
            retention: cfg.fs_retention,
            schedule: &schedule,
            split,
        };
        match search.run(&v2, data, &ranking, &fs_cfg)? {
            Ok(found) => Ok((found, false)),
            Err(failure) => {
                let eval = evaluate(&model, &v2, data, split)?;
                let fallback = MinimalSetResult {
                    selected: ranking.top(ranking.len()),
                    retention: eval.accuracy / ls.oracle_acc,
                    accuracy: eval,
                    oracle_accuracy: ls.oracle_acc,
                    search_trace: failure.search_trace,
                };
                Ok::<_, Error>((fallback, true))
            }
        }
    })()
    .map_err(Error::at_stage("feature-selection"))?;
    let fs_seconds = started.elapsed().as_secs_f64();

    let total = a.total_neurons();
    let final_neurons = fs.selected.len();
    Ok(PipelineReport {
        task: cfg.task.clone(),
        total_neurons: total,
        oracle_acc: ls.oracle_acc,
        percent_reduction: 1.0 - final_neurons as f64 / total as f64,
        final_neurons,
        ls,
        cc,
        fs,
        fs_fallback,
        timing: StageTiming {
            ls_seconds,
            cc_seconds,
            fs_seconds,
        },
    })
}
