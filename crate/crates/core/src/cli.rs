//! `redunkit` command-line front end.
//!
//! Every flag can also come from a JSON `--config` file using the flag's
//! long name as key; flags win over the file. The master seed falls back to
//! `REDUNKIT_SEED`, then the file, then 42.
//!
//! Exit codes: 0 success, 1 usage, 2 data, 3 analytic failure (no subset or
//! layer met the threshold).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::activation::{ActivationSet, FeatureView, NeuronId};
use crate::bench::benchmark_classifier;
use crate::cka::layer_similarity;
use crate::clustering::{
    pick_representatives, reduce, span_histogram, threshold_sweep, Dendrogram, ReduceStrategy,
    SPAN_LABELS,
};
use crate::correlation::pearson_matrix;
use crate::error::Error;
use crate::labels::{load_labels, LabeledDataset, TaskKind, DEV};
use crate::nact::load_activations;
use crate::pipeline::{run_pipeline, PipelineConfig};
use crate::probe::{evaluate, train, EvalResult, ProbeConfig, ProbeModel, TaskMode};
use crate::ranking::{default_schedule, rank_with, Importance, MinimalSetSearch, NeuronRanking};
use crate::report::{
    render_bench_csv, render_heatmap_pgm, render_json, render_pipeline_csv, render_sweep_csv,
    RunConfig,
};

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "REDUNKIT_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "redunkit",
    version,
    about = "Layer and neuron redundancy analysis of activation dumps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pairwise linear CKA between all layers.
    Cka(CkaArgs),
    /// Correlation clustering of all neurons at one threshold.
    Cluster(ClusterArgs),
    /// Probe accuracy of the reduced set across clustering thresholds.
    Sweep(SweepArgs),
    /// Train linear probes on layers or layer prefixes.
    Probe(ProbeArgs),
    /// Rank neurons by the weights of a trained probe.
    Rank(RankArgs),
    /// Smallest ranking prefix that keeps a fraction of oracle accuracy.
    Minset(MinsetArgs),
    /// Layer selection, clustering and feature selection end to end.
    Pipeline(PipelineArgs),
    /// Probe training time against feature count.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with default values for any flag, keyed by long flag name.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed [default: $REDUNKIT_SEED, else 42].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// NACT activation dump.
    #[arg(long)]
    activations: Option<PathBuf>,
    /// Label file paired row-for-row with the activations.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Label file format: token or sequence [default: token].
    #[arg(long)]
    task: Option<String>,
    /// Contiguous train,dev,test fractions [default: 0.8,0.1,0.1].
    #[arg(long)]
    split: Option<String>,
    /// Split used for every accuracy comparison [default: dev].
    #[arg(long)]
    eval_split: Option<String>,
}

#[derive(Debug, Args)]
struct ProbeFlags {
    /// Training epochs [default: 10].
    #[arg(long)]
    epochs: Option<usize>,
    /// SGD step size [default: 0.001].
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Mini-batch size [default: 128].
    #[arg(long)]
    batch_size: Option<usize>,
    /// L1 penalty weight [default: 1e-5].
    #[arg(long)]
    l1: Option<f64>,
    /// L2 penalty weight [default: 1e-5].
    #[arg(long)]
    l2: Option<f64>,
    /// Squared-error probes scored by Pearson r.
    #[arg(long)]
    regression: bool,
}

#[derive(Debug, Args)]
struct CkaArgs {
    #[command(flatten)]
    common: Common,
    /// NACT activation dump.
    #[arg(long)]
    activations: Option<PathBuf>,
    /// Output file, or `-` for standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rows to sample (all rows when absent).
    #[arg(long)]
    sample: Option<usize>,
    /// Also write a P5 PGM heatmap.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[command(flatten)]
    common: Common,
    /// NACT activation dump.
    #[arg(long)]
    activations: Option<PathBuf>,
    /// Distance threshold on 1 - |corr| [default: 0.3].
    #[arg(long)]
    ct: Option<f64>,
    /// first or random.
    #[arg(long)]
    strategy: Option<String>,
    /// Output file, or `-` for standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    probe: ProbeFlags,
    /// Comma-separated ascending thresholds [default: 0.0,0.1,...,1.0].
    #[arg(long)]
    thresholds: Option<String>,
    /// Cluster representative choice: first or random.
    #[arg(long)]
    strategy: Option<String>,
    /// Output file, or `-` for standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    probe: ProbeFlags,
    /// `all`, `A..B` (one probe per layer, inclusive), `K` or `concat:K`.
    #[arg(long)]
    layers: Option<String>,
    /// Output file, or `-` for standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit model weights from the output file.
    #[arg(long)]
    no_weights: bool,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    common: Common,
    /// Probe file written by `probe`.
    #[arg(long)]
    probe: Option<PathBuf>,
    /// Which probe of the file to rank.
    #[arg(long)]
    index: Option<usize>,
    /// Rank by per-class weight share instead of summed magnitude.
    #[arg(long)]
    per_class: bool,
    /// Output file, or `-` for standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MinsetArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    probe: ProbeFlags,
    /// Ranking file written by `rank`.
    #[arg(long)]
    ranking: Option<PathBuf>,
    /// Fraction of oracle accuracy to keep [default: 0.97].
    #[arg(long)]
    retention: Option<f64>,
    /// Comma-separated ascending prefix sizes.
    #[arg(long)]
    schedule: Option<String>,
    /// Reference accuracy; an all-layer oracle is trained when absent.
    #[arg(long)]
    oracle_acc: Option<f64>,
    /// Output file, or `-` for standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    probe: ProbeFlags,
    /// Fraction of oracle accuracy layer selection must keep [default: 0.99].
    #[arg(long)]
    ls_threshold: Option<f64>,
    /// Clustering threshold [default: 0.7].
    #[arg(long)]
    ct: Option<f64>,
    /// Fraction of oracle accuracy feature selection must keep [default: 0.99].
    #[arg(long)]
    fs_retention: Option<f64>,
    /// Cluster representative choice: first or random.
    #[arg(long)]
    strategy: Option<String>,
    /// Comma-separated ascending prefix sizes for feature selection.
    #[arg(long)]
    schedule: Option<String>,
    /// Task name recorded in the report.
    #[arg(long)]
    name: Option<String>,
    /// Output file, or `-` for standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a one-row CSV summary.
    #[arg(long)]
    emit_csv: Option<PathBuf>,
    /// Include per-stage wall-clock seconds (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    probe: ProbeFlags,
    /// Comma-separated ascending feature counts [default: 10,100,1000,9984].
    #[arg(long)]
    features: Option<String>,
    /// Synthetic rows [default: 100000].
    #[arg(long)]
    tokens: Option<usize>,
    /// Timed runs per feature count [default: 3].
    #[arg(long)]
    runs: Option<usize>,
    /// Output file, or `-` for standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(msg) => CliError::Usage(msg),
            other => CliError::Data(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Flag values merged with the config file, recorded into the run config.
struct Resolver {
    file: BTreeMap<String, Value>,
    run: RunConfig,
}

impl Resolver {
    fn new(command: &str, config: Option<&Path>) -> CliResult<Self> {
        let file = match config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Data(e.into()))?;
                let value: Value =
                    serde_json::from_str(&text).map_err(|e| CliError::Data(e.into()))?;
                match value {
                    Value::Object(m) => m.into_iter().collect(),
                    _ => return Err(usage("config file must contain a JSON object")),
                }
            }
            None => BTreeMap::new(),
        };
        Ok(Resolver {
            file,
            run: RunConfig::new(command),
        })
    }

    fn file_value<T: DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        let v = self
            .file
            .get(key)
            .or_else(|| self.file.get(&key.replace('-', "_")));
        v.map(|v| {
            serde_json::from_value(v.clone()).map_err(|e| usage(format!("config key '{key}': {e}")))
        })
        .transpose()
    }

    fn opt<T: DeserializeOwned + Serialize>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> CliResult<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &v {
            self.run.set(key, v);
        }
        Ok(v)
    }

    fn or<T: DeserializeOwned + Serialize>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> CliResult<T> {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.run.set(key, &v);
        Ok(v)
    }

    fn req<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>) -> CliResult<T> {
        self.opt(key, flag)?
            .ok_or_else(|| usage(format!("missing required --{key}")))
    }

    fn flag(&mut self, key: &str, set: bool) -> CliResult<bool> {
        let v = set || self.file_value::<bool>(key)?.unwrap_or(false);
        self.run.set(key, v);
        Ok(v)
    }

    /// Comma-separated list from a flag, or a string or array in the file.
    fn list<T>(&mut self, key: &str, flag: Option<String>) -> CliResult<Option<Vec<T>>>
    where
        T: std::str::FromStr + DeserializeOwned + Serialize,
    {
        let parsed: Option<Vec<T>> = match flag {
            Some(s) => Some(parse_list(key, &s)?),
            None => match self.file.get(key) {
                Some(Value::String(s)) => Some(parse_list(key, s)?),
                Some(v @ Value::Array(_)) => Some(
                    serde_json::from_value(v.clone())
                        .map_err(|e| usage(format!("config key '{key}': {e}")))?,
                ),
                Some(_) => return Err(usage(format!("config key '{key}' must be a list"))),
                None => None,
            },
        };
        if let Some(v) = &parsed {
            self.run.set(key, v);
        }
        Ok(parsed)
    }

    fn seed(&mut self, flag: Option<u64>) -> CliResult<u64> {
        let seed = match flag {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer")))?,
                Err(_) => self.file_value("seed")?.unwrap_or(DEFAULT_SEED),
            },
        };
        self.run.set("seed", seed);
        Ok(seed)
    }

    fn probe_config(&mut self, flags: &ProbeFlags, seed: u64) -> CliResult<ProbeConfig> {
        let d = ProbeConfig::default();
        let cfg = ProbeConfig {
            epochs: self.or("epochs", flags.epochs, d.epochs)?,
            learning_rate: self.or("learning-rate", flags.learning_rate, d.learning_rate)?,
            batch_size: self.or("batch-size", flags.batch_size, d.batch_size)?,
            l1_lambda: self.or("l1", flags.l1, d.l1_lambda)?,
            l2_lambda: self.or("l2", flags.l2, d.l2_lambda)?,
            seed,
            task_mode: if self.flag("regression", flags.regression)? {
                TaskMode::Regression
            } else {
                TaskMode::Classification
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| usage(format!("--{key}: cannot parse '{p}'")))
        })
        .collect()
}

fn parse_fractions(s: &str) -> CliResult<(f64, f64, f64)> {
    let v: Vec<f64> = parse_list("split", s)?;
    match v.as_slice() {
        [a, b, c] => Ok((*a, *b, *c)),
        _ => Err(usage("--split takes three fractions: train,dev,test")),
    }
}

struct Loaded {
    activations: ActivationSet,
    labels: LabeledDataset,
    eval_split: String,
}

fn load_data(r: &mut Resolver, d: &DataArgs) -> CliResult<Loaded> {
    let act_path: PathBuf = r.req("activations", d.activations.clone())?;
    let label_path: PathBuf = r.req("labels", d.labels.clone())?;
    let kind: String = r.or("task", d.task.clone(), "token".into())?;
    let kind: TaskKind = kind.parse()?;
    let split: String = r.or("split", d.split.clone(), "0.8,0.1,0.1".into())?;
    let (tr, dv, te) = parse_fractions(&split)?;
    let eval_split: String = r.or("eval-split", d.eval_split.clone(), DEV.into())?;
    let activations = load_activations(&act_path)?;
    let labels = load_labels(&label_path, kind)?.with_fraction_split(tr, dv, te)?;
    labels.check_rows(activations.num_tokens())?;
    Ok(Loaded {
        activations,
        labels,
        eval_split,
    })
}

fn strategy(r: &mut Resolver, flag: Option<String>) -> CliResult<ReduceStrategy> {
    let s: String = r.or("strategy", flag, "first".into())?;
    Ok(s.parse()?)
}

fn cmd_cka(a: CkaArgs) -> CliResult<()> {
    let mut r = Resolver::new("cka", a.common.config.as_deref())?;
    let path: PathBuf = r.req("activations", a.activations)?;
    let out: PathBuf = r.req("out", a.out)?;
    let sample: Option<usize> = r.opt("sample", a.sample)?;
    let heatmap: Option<PathBuf> = r.opt("heatmap", a.heatmap)?;
    let seed = r.seed(a.common.seed)?;
    let set = load_activations(&path)?;
    let sim = layer_similarity(&set, sample, seed)?;
    let payload =
        json!({ "layers": sim.layers(), "matrix": sim.rows(), "model": set.model_name() });
    emit(&out, render_json(&payload, &r.run)?.as_bytes())?;
    if let Some(p) = heatmap {
        emit(&p, &render_heatmap_pgm(&sim, &r.run))?;
    }
    Ok(())
}

fn cmd_cluster(a: ClusterArgs) -> CliResult<()> {
    let mut r = Resolver::new("cluster", a.common.config.as_deref())?;
    let path: PathBuf = r.req("activations", a.activations)?;
    let out: PathBuf = r.req("out", a.out)?;
    let ct: f64 = r.or("ct", a.ct, 0.3)?;
    let strat = strategy(&mut r, a.strategy)?;
    let seed = r.seed(a.common.seed)?;
    let set = load_activations(&path)?;
    let corr = pearson_matrix(&set.all_neurons())?;
    let clustering = Dendrogram::average_linkage(&corr).cut(ct)?;
    let reps = pick_representatives(&clustering, strat, seed);
    let span = span_histogram(&clustering, set.layer_size());
    let payload = json!({
        "ct": ct,
        "clusters": clustering.clusters,
        "representatives": reps,
        "retained": clustering.len(),
        "total_neurons": set.total_neurons(),
        "span_histogram": {
            "windows": SPAN_LABELS,
            "counts": span.counts,
            "fractions": span.fractions,
        },
    });
    emit(&out, render_json(&payload, &r.run)?.as_bytes())?;
    Ok(())
}

fn eval_on(
    view: &FeatureView<'_>,
    data: &LabeledDataset,
    cfg: &ProbeConfig,
    split: &str,
) -> crate::Result<(ProbeModel, EvalResult)> {
    let model = train(view, data, cfg)?;
    let eval = evaluate(&model, view, data, split)?;
    Ok((model, eval))
}

fn cmd_sweep(a: SweepArgs) -> CliResult<()> {
    let mut r = Resolver::new("sweep", a.common.config.as_deref())?;
    let loaded = load_data(&mut r, &a.data)?;
    let out: PathBuf = r.req("out", a.out)?;
    let thresholds: Vec<f64> = r
        .list("thresholds", a.thresholds)?
        .unwrap_or_else(|| (0..=10).map(|i| i as f64 / 10.0).collect());
    let strat = strategy(&mut r, a.strategy)?;
    let seed = r.seed(a.common.seed)?;
    let cfg = r.probe_config(&a.probe, seed)?;
    let set = &loaded.activations;
    let corr = pearson_matrix(&set.all_neurons())?;
    let rows = threshold_sweep(&corr, &thresholds, |clustering| {
        let view = reduce(set, clustering, strat, seed)?;
        Ok(eval_on(&view, &loaded.labels, &cfg, &loaded.eval_split)?
            .1
            .accuracy)
    })?;
    emit(&out, render_sweep_csv(&rows, &r.run).as_bytes())?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
enum LayerSpec {
    All,
    Range(usize, usize),
    Concat(usize),
}

fn parse_layers(s: &str, layers: usize) -> CliResult<LayerSpec> {
    let bad = || usage(format!("--layers: cannot parse '{s}'"));
    let spec = if s == "all" {
        LayerSpec::All
    } else if let Some(k) = s.strip_prefix("concat:") {
        LayerSpec::Concat(k.parse().map_err(|_| bad())?)
    } else if let Some((lo, hi)) = s.split_once("..") {
        LayerSpec::Range(
            lo.parse().map_err(|_| bad())?,
            hi.parse().map_err(|_| bad())?,
        )
    } else {
        let k = s.parse().map_err(|_| bad())?;
        LayerSpec::Range(k, k)
    };
    let max = match spec {
        LayerSpec::All => 0,
        LayerSpec::Range(lo, hi) if lo > hi => return Err(bad()),
        LayerSpec::Range(_, hi) => hi,
        LayerSpec::Concat(k) => k,
    };
    if max >= layers {
        return Err(CliError::Data(Error::LayerOutOfRange {
            layer: max,
            layers,
        }));
    }
    Ok(spec)
}

#[derive(Serialize, Deserialize)]
struct ProbeEntry {
    features: String,
    accuracy: BTreeMap<String, f64>,
    evaluation: Vec<EvalResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<ProbeModel>,
}

fn cmd_probe(a: ProbeArgs) -> CliResult<()> {
    let mut r = Resolver::new("probe", a.common.config.as_deref())?;
    let loaded = load_data(&mut r, &a.data)?;
    let out: PathBuf = r.req("out", a.out)?;
    let layers: String = r.or("layers", a.layers, "all".into())?;
    let no_weights = r.flag("no-weights", a.no_weights)?;
    let seed = r.seed(a.common.seed)?;
    let cfg = r.probe_config(&a.probe, seed)?;
    let set = &loaded.activations;
    let views: Vec<(String, FeatureView<'_>)> = match parse_layers(&layers, set.num_layers())? {
        LayerSpec::All => vec![("all".into(), set.all_neurons())],
        LayerSpec::Concat(k) => vec![(format!("concat:{k}"), set.concat_layers(k)?)],
        LayerSpec::Range(lo, hi) => (lo..=hi)
            .map(|l| Ok((format!("layer:{l}"), set.layer_view(l)?)))
            .collect::<crate::Result<_>>()?,
    };
    let mut probes = Vec::with_capacity(views.len());
    for (name, view) in views {
        let model = train(&view, &loaded.labels, &cfg)?;
        let mut accuracy = BTreeMap::new();
        let mut evaluation = Vec::new();
        for (split, rows) in loaded.labels.splits() {
            if rows.is_empty() {
                continue;
            }
            let e = evaluate(&model, &view, &loaded.labels, split)?;
            accuracy.insert(split.clone(), e.accuracy);
            evaluation.push(e);
        }
        probes.push(ProbeEntry {
            features: name,
            accuracy,
            evaluation,
            model: (!no_weights).then_some(model),
        });
    }
    let payload = json!({ "probes": probes, "config": cfg, "eval_split": loaded.eval_split });
    emit(&out, render_json(&payload, &r.run)?.as_bytes())?;
    Ok(())
}

/// Writes an artifact to `path`, or to standard output when `path` is `-`.
fn emit(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let result = if path == Path::new("-") {
        std::io::stdout().write_all(bytes)
    } else {
        fs::write(path, bytes)
    };
    result.map_err(|e| CliError::Data(e.into()))
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(e.into()))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(e.into()))
}

fn cmd_rank(a: RankArgs) -> CliResult<()> {
    let mut r = Resolver::new("rank", a.common.config.as_deref())?;
    let probe_path: PathBuf = r.req("probe", a.probe)?;
    let out: PathBuf = r.req("out", a.out)?;
    let index: usize = r.or("index", a.index, 0)?;
    let per_class = r.flag("per-class", a.per_class)?;
    let file = read_json(&probe_path)?;
    let entry = file["probes"].get(index).ok_or_else(|| {
        CliError::Data(Error::InvalidArgument(format!(
            "probe file has no probe {index}"
        )))
    })?;
    let model_value = entry
        .get("model")
        .ok_or_else(|| usage("probe file was written with --no-weights; ranking needs weights"))?;
    let model: ProbeModel =
        serde_json::from_value(model_value.clone()).map_err(|e| CliError::Data(e.into()))?;
    let importance = if per_class {
        Importance::PerClassShare
    } else {
        Importance::Aggregate
    };
    let ranking = rank_with(&model, importance);
    let payload = json!({
        "ranking": ranking,
        "source_probe": {
            "features": entry["features"],
            "config": file["config"],
            "run_config": file["run_config"],
        },
    });
    emit(&out, render_json(&payload, &r.run)?.as_bytes())?;
    Ok(())
}

fn cmd_minset(a: MinsetArgs) -> CliResult<bool> {
    let mut r = Resolver::new("minset", a.common.config.as_deref())?;
    let loaded = load_data(&mut r, &a.data)?;
    let ranking_path: PathBuf = r.req("ranking", a.ranking)?;
    let out: PathBuf = r.req("out", a.out)?;
    let retention: f64 = r.or("retention", a.retention, 0.97)?;
    let schedule: Option<Vec<usize>> = r.list("schedule", a.schedule)?;
    let oracle_flag: Option<f64> = r.opt("oracle-acc", a.oracle_acc)?;
    let seed = r.seed(a.common.seed)?;
    let cfg = r.probe_config(&a.probe, seed)?;
    let file = read_json(&ranking_path)?;
    let ranking: NeuronRanking =
        serde_json::from_value(file["ranking"].clone()).map_err(|e| CliError::Data(e.into()))?;
    let set = &loaded.activations;
    let split = loaded.eval_split.as_str();
    let oracle_acc = match oracle_flag {
        Some(v) => v,
        None => {
            eval_on(&set.all_neurons(), &loaded.labels, &cfg, split)?
                .1
                .accuracy
        }
    };
    let ids: Vec<NeuronId> = ranking.entries.iter().map(|e| e.neuron).collect();
    let view = set.view(ids)?;
    let schedule = schedule.unwrap_or_else(|| default_schedule(ranking.len()));
    let search = MinimalSetSearch {
        oracle_accuracy: oracle_acc,
        retention,
        schedule: &schedule,
        split,
    };
    let (payload, found) = match search.run(&view, &loaded.labels, &ranking, &cfg)? {
        Ok(m) => (
            json!({
                "status": "ok",
                "selected": m.selected,
                "trace": m.search_trace,
                "retention": m.retention,
                "required_retention": retention,
                "oracle_accuracy": m.oracle_accuracy,
                "accuracy": m.accuracy,
            }),
            true,
        ),
        Err(f) => (
            json!({
                "status": "no_satisfying_set",
                "selected": [],
                "trace": f.search_trace,
                "retention": f.best_retention,
                "required_retention": retention,
                "oracle_accuracy": oracle_acc,
            }),
            false,
        ),
    };
    emit(&out, render_json(&payload, &r.run)?.as_bytes())?;
    Ok(found)
}

fn cmd_pipeline(a: PipelineArgs) -> CliResult<()> {
    let mut r = Resolver::new("pipeline", a.common.config.as_deref())?;
    let loaded = load_data(&mut r, &a.data)?;
    let out: PathBuf = r.req("out", a.out)?;
    let d = PipelineConfig::default();
    let ls_threshold = r.or("ls-threshold", a.ls_threshold, d.ls_threshold)?;
    let cc_threshold = r.or("ct", a.ct, d.cc_threshold)?;
    let fs_retention = r.or("fs-retention", a.fs_retention, d.fs_retention)?;
    let reduce = strategy(&mut r, a.strategy)?;
    let schedule: Option<Vec<usize>> = r.list("schedule", a.schedule)?;
    let task: String = r.or("name", a.name, d.task.clone())?;
    let emit_csv: Option<PathBuf> = r.opt("emit-csv", a.emit_csv)?;
    let timing = r.flag("timing", a.timing)?;
    let seed = r.seed(a.common.seed)?;
    let probe = r.probe_config(&a.probe, seed)?;
    let cfg = PipelineConfig {
        task,
        probe,
        ls_threshold,
        cc_threshold,
        fs_retention,
        reduce,
        schedule,
        split: loaded.eval_split.clone(),
        seed,
    };
    let report = run_pipeline(&loaded.activations, &loaded.labels, &cfg)?;
    let mut value = serde_json::to_value(&report).map_err(|e| CliError::Data(e.into()))?;
    if !timing {
        value.as_object_mut().expect("object").remove("timing");
    }
    emit(&out, render_json(&value, &r.run)?.as_bytes())?;
    if let Some(p) = emit_csv {
        emit(&p, render_pipeline_csv(&report, &r.run).as_bytes())?;
    }
    if report.fs_fallback {
        eprintln!(
            "warning: feature selection found no satisfying prefix; kept all {} clustered neurons",
            report.final_neurons
        );
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult<()> {
    let mut r = Resolver::new("bench", a.common.config.as_deref())?;
    let out: PathBuf = r.req("out", a.out)?;
    let features: Vec<usize> = r
        .list("features", a.features)?
        .unwrap_or_else(|| vec![10, 100, 1000, 9984]);
    let tokens: usize = r.or("tokens", a.tokens, 100_000)?;
    let runs: usize = r.or("runs", a.runs, 3)?;
    let seed = r.seed(a.common.seed)?;
    let cfg = r.probe_config(&a.probe, seed)?;
    let rows = benchmark_classifier(&features, tokens, &cfg, runs)?;
    emit(&out, render_bench_csv(&rows, &r.run).as_bytes())?;
    Ok(())
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    return 0;
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 1,
                _ => 1,
            };
            eprint!("{e}");
            return code;
        }
    };
    let result = match cli.command {
        Command::Cka(a) => cmd_cka(a).map(|_| true),
        Command::Cluster(a) => cmd_cluster(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Probe(a) => cmd_probe(a).map(|_| true),
        Command::Rank(a) => cmd_rank(a).map(|_| true),
        Command::Minset(a) => cmd_minset(a),
        Command::Pipeline(a) => cmd_pipeline(a).map(|_| true),
        Command::Bench(a) => cmd_bench(a).map(|_| true),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("error: no schedule size reached the required retention");
            3
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun `redunkit --help` for usage.");
            1
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            if e.is_analytic() {
                3
            } else {
                2
            }
        }
    }
}
