//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs with `harness = false` so the lines are
//! always shown and the timed criteria do not share the CPU.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use common::*;
use redunkit::activation::{ActivationSet, NeuronId};
use redunkit::bench::benchmark_classifier;
use redunkit::cka::linear_cka;
use redunkit::clustering::{cluster, Dendrogram};
use redunkit::correlation::pearson_matrix;
use redunkit::labels::{LabeledDataset, DEV, TRAIN};
use redunkit::nact::{decode, encode};
use redunkit::pipeline::{run_pipeline, PipelineConfig};
use redunkit::probe::{evaluate, train, train_with_history, ProbeConfig};
use redunkit::ranking::{default_schedule, minimal_set, rank};
use redunkit::synth::{planted_groups, PlantedTask};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cka_invariance() -> Outcome {
    let start = Instant::now();
    let mut r = rng(565);
    let (mut self_err, mut rot_err, mut max_val, mut asym) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    let mut oracle_err = 0.0f64;
    for _ in 0..50 {
        let t = r.random_range(4..=64);
        let h = r.random_range(2..=32);
        let x = random_matrix(&mut r, t, h);
        let q = random_orthogonal(&mut r, h);
        let s: f64 = 10.0 - r.random_range(0.0..10.0);
        let y = x.dot(&q) * s;
        let hz = r.random_range(2..=32);
        let z = random_matrix(&mut r, t, hz);
        let xx = linear_cka(x.view(), x.view()).unwrap();
        let xy = linear_cka(x.view(), y.view()).unwrap();
        let xz = linear_cka(x.view(), z.view()).unwrap();
        let zx = linear_cka(z.view(), x.view()).unwrap();
        self_err = self_err.max((xx - 1.0).abs());
        rot_err = rot_err.max((xy - xx).abs());
        oracle_err = oracle_err.max((xz - loop_cka(&x, &z)).abs());
        asym += (xz != zx) as usize;
        for v in [xx, xy, xz] {
            max_val = max_val.max(v);
            if v < 0.0 {
                max_val = f64::INFINITY;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = self_err < 1e-9
        && rot_err < 1e-8
        && asym == 0
        && max_val <= 1.0 + 1e-12
        && oracle_err < 1e-9
        && secs < 5.0;
    outcome(
        pass,
        format!(
            "max|cka(X,X)-1|={self_err:.2e} max|cka(X,sXQ)-cka(X,X)|={rot_err:.2e} asymmetric={asym} max={max_val:.15} loop-oracle err={oracle_err:.2e} {secs:.2}s"
        ),
    )
}

fn clustering_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(566);
    let mut mismatches = 0;
    let mut nontrivial = 0;
    for _ in 0..200 {
        let n = r.random_range(2..=12);
        let t = r.random_range(3..=20);
        let factors = r.random_range(1..=4);
        let set = mixed_activations(&mut r, n, t, factors);
        let model = pearson_matrix(&set.all_neurons()).unwrap();
        let dendrogram = Dendrogram::average_linkage(&model);
        for _ in 0..20 {
            let c: f64 = r.random_range(0.0..=1.0);
            let ours = dendrogram.cut(c).unwrap();
            let oracle = naive_average_linkage(&model, c);
            if !same_partition(&ours.clusters, &oracle) {
                mismatches += 1;
            }
            nontrivial += (ours.len() > 1 && ours.len() < n) as usize;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 30.0,
        format!(
            "4000 cuts, {mismatches} mismatches, {nontrivial} non-trivial partitions, {secs:.2}s"
        ),
    )
}

fn dendrogram_refinement() -> Outcome {
    let mut r = rng(567);
    let mut violations = 0;
    let mut checked = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=40);
        let t = r.random_range(3..=50);
        let factors = r.random_range(1..=6);
        let set = mixed_activations(&mut r, n, t, factors);
        let dendrogram = Dendrogram::average_linkage(&pearson_matrix(&set.all_neurons()).unwrap());
        let mut cuts: Vec<f64> = (0..15).map(|_| r.random_range(0.0..=1.0)).collect();
        cuts.sort_by(f64::total_cmp);
        let parts: Vec<_> = cuts.iter().map(|&c| dendrogram.cut(c).unwrap()).collect();
        for i in 0..parts.len() {
            for j in i..parts.len() {
                checked += 1;
                if !parts[i].refines(&parts[j]) || parts[i].len() < parts[j].len() {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!("{checked} ordered threshold pairs, {violations} violations"),
    )
}

fn planted_recovery() -> Outcome {
    let mut exact = 0;
    for trial in 0..100 {
        let (set, groups) = planted_groups(20, 5, 200, 0.01, trial).unwrap();
        let c = cluster(&pearson_matrix(&set.all_neurons()).unwrap(), 0.3).unwrap();
        if c.len() == 20 && same_partition(&c.clusters, &groups) {
            exact += 1;
        }
    }
    outcome(
        exact >= 95,
        format!("{exact}/100 trials recover the 20 planted groups exactly (need >= 95)"),
    )
}

fn probe_correctness() -> Outcome {
    let (set, data, pts) = separable_blobs(200, 569);
    let separable = perceptron_separates(&pts, data.labels());
    let view = set.all_neurons();
    let cfg = ProbeConfig::default().unregularized();
    let model = train(&view, &data, &cfg).unwrap();
    let acc = evaluate(&model, &view, &data, TRAIN).unwrap().accuracy;
    let again = train(&view, &data, &cfg).unwrap();
    let bitwise = model
        .weights
        .iter()
        .zip(again.weights.iter())
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && model
            .bias
            .iter()
            .zip(&again.bias)
            .all(|(a, b)| a.to_bits() == b.to_bits());

    let fixtures: Vec<(ActivationSet, LabeledDataset)> = vec![
        (set.clone(), data.clone()),
        PlantedTask {
            informative: vec![17],
            seed: 1,
            ..Default::default()
        }
        .generate()
        .unwrap(),
        PlantedTask {
            tokens: 3000,
            layers: 3,
            layer_size: 8,
            informative: vec![0, 3],
            repeat_layer0: true,
            seed: 2,
            ..Default::default()
        }
        .generate()
        .unwrap(),
    ];
    let mut decreased = 0;
    for (a, d) in &fixtures {
        for cfg in [
            ProbeConfig::default(),
            ProbeConfig::default().unregularized(),
        ] {
            let (_, h) = train_with_history(&a.all_neurons(), d, &cfg).unwrap();
            decreased += (h.final_loss < h.initial_loss) as usize;
        }
    }
    let runs = fixtures.len() * 2;
    outcome(
        separable && acc == 1.0 && bitwise && decreased == runs,
        format!("perceptron-certified separable={separable} train acc={acc} bitwise repeat={bitwise} loss decreased {decreased}/{runs}"),
    )
}

fn ranking_recovery() -> Outcome {
    let mut first = 0;
    for seed in 0..5 {
        let (a, d) = PlantedTask {
            informative: vec![17],
            seed,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let model = train(
            &a.all_neurons(),
            &d,
            &ProbeConfig::default().with_seed(seed),
        )
        .unwrap();
        first += (rank(&model).top(1) == vec![NeuronId(17)]) as usize;
    }
    let mut exact_ten = 0;
    let mut sizes = Vec::new();
    for seed in 0..5 {
        let task = PlantedTask {
            tokens: 8000,
            layer_size: 64,
            informative: (0..10).map(|i| i * 6 + 1).collect(),
            seed,
            ..Default::default()
        };
        let (a, d) = task.generate().unwrap();
        let cfg = ProbeConfig::default().with_seed(seed);
        let view = a.all_neurons();
        let model = train(&view, &d, &cfg).unwrap();
        let oracle = evaluate(&model, &view, &d, DEV).unwrap().accuracy;
        let schedule = default_schedule(view.num_features());
        match minimal_set(&view, &d, &rank(&model), oracle, 0.99, &cfg, &schedule, DEV) {
            Ok(m) => {
                sizes.push(m.selected.len());
                exact_ten += (m.selected.len() == 10 && m.retention >= 0.99) as usize;
            }
            Err(_) => sizes.push(0),
        }
    }
    outcome(
        first >= 4 && exact_ten >= 4,
        format!("neuron 17 first in {first}/5 seeds; minimal set of exactly 10 in {exact_ten}/5 (sizes {sizes:?})"),
    )
}

fn pipeline_end_to_end() -> Outcome {
    let start = Instant::now();
    let planted = 5;
    let task = PlantedTask {
        tokens: 20_000,
        layers: 4,
        layer_size: 32,
        informative: (0..planted).collect(),
        copies_in_layer: 3,
        repeat_layer0: true,
        seed: 571,
        ..Default::default()
    };
    let (a, d) = task.generate().unwrap();
    let report = run_pipeline(&a, &d, &PipelineConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = report.ls.selected_layer == 0
        && report.final_neurons <= 2 * planted
        && report.fs.retention >= 0.99
        && !report.fs_fallback
        && report.stages_contained(a.layer_size())
        && secs < 60.0;
    outcome(
        pass,
        format!(
            "selected_layer={} cc retained {}/{} final_neurons={} (limit {}) retention={:.4} contained={} {secs:.1}s",
            report.ls.selected_layer,
            report.cc.retained,
            report.cc.input_neurons,
            report.final_neurons,
            2 * planted,
            report.fs.retention,
            report.stages_contained(a.layer_size()),
        ),
    )
}

fn benchmark_shape() -> Outcome {
    let rows =
        benchmark_classifier(&[10, 100, 1000, 9984], 100_000, &ProbeConfig::default(), 3).unwrap();
    let t10 = rows[0].seconds;
    let t9984 = rows[3].seconds;
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("{}:{:.2}s", r.features, r.seconds))
        .collect();
    outcome(
        t10 <= t9984 / 3.0,
        format!(
            "{} (speedup {:.1}x, need >= 3x)",
            table.join(" "),
            t9984 / t10
        ),
    )
}

fn write_token_labels(path: &Path, data: &LabeledDataset) {
    let mut s = String::new();
    for (i, &y) in data.labels().iter().enumerate() {
        s.push_str(&format!("tok{i}\t{}\n", data.label_names()[y]));
        if i % 20 == 19 {
            s.push('\n');
        }
    }
    fs::write(path, s).unwrap();
}

fn run_cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_redunkit"))
        .args(args)
        .env_remove("REDUNKIT_SEED")
        .output()
        .unwrap()
        .status
        .code()
        .unwrap_or(-1)
}

fn format_roundtrip() -> Outcome {
    let mut r = rng(573);
    let mut identical = 0;
    for i in 0..100 {
        let (l, t, h) = (
            r.random_range(1..=4),
            r.random_range(1..=30),
            r.random_range(1..=16),
        );
        let data: Vec<f32> = (0..l * t * h)
            .map(|_| (normal(&mut r) * 10f64.powi(r.random_range(-3..4))) as f32)
            .collect();
        let set = ActivationSet::new(format!("model-{i}"), t, l, h, data).unwrap();
        let back = decode(&encode(&set)).unwrap();
        let bits = back
            .data()
            .iter()
            .zip(set.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        identical += (back == set && bits) as usize;
    }

    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (a, d) = PlantedTask {
        tokens: 600,
        layers: 3,
        layer_size: 8,
        informative: vec![0, 1],
        repeat_layer0: true,
        seed: 5,
        ..Default::default()
    }
    .generate()
    .unwrap();
    redunkit::nact::save_activations(&a, p("a.nact")).unwrap();
    write_token_labels(Path::new(&p("y.tsv")), &d);
    let data = ["--activations", &p("a.nact"), "--labels", &p("y.tsv")].map(String::from);
    let with_data = |args: &[&str]| -> Vec<String> {
        let mut v: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        v.splice(1..1, data.iter().cloned());
        v
    };
    let commands: Vec<(Vec<String>, Vec<String>)> = vec![
        (
            [
                "cka",
                "--activations",
                &p("a.nact"),
                "--out",
                &p("cka.json"),
                "--heatmap",
                &p("cka.pgm"),
            ]
            .map(String::from)
            .to_vec(),
            vec![p("cka.json"), p("cka.pgm")],
        ),
        (
            [
                "cluster",
                "--activations",
                &p("a.nact"),
                "--ct",
                "0.3",
                "--out",
                &p("clusters.json"),
            ]
            .map(String::from)
            .to_vec(),
            vec![p("clusters.json")],
        ),
        (
            with_data(&[
                "sweep",
                "--thresholds",
                "0.0,0.3,0.7",
                "--out",
                &p("sweep.csv"),
            ]),
            vec![p("sweep.csv")],
        ),
        (
            with_data(&["probe", "--layers", "all", "--out", &p("probe.json")]),
            vec![p("probe.json")],
        ),
        (
            [
                "rank",
                "--probe",
                &p("probe.json"),
                "--out",
                &p("ranking.json"),
            ]
            .map(String::from)
            .to_vec(),
            vec![p("ranking.json")],
        ),
        (
            with_data(&[
                "minset",
                "--ranking",
                &p("ranking.json"),
                "--schedule",
                "2,4,8,24",
                "--out",
                &p("minset.json"),
            ]),
            vec![p("minset.json")],
        ),
        (
            with_data(&[
                "pipeline",
                "--schedule",
                "2,4,8",
                "--out",
                &p("report.json"),
                "--emit-csv",
                &p("report.csv"),
            ]),
            vec![p("report.json"), p("report.csv")],
        ),
    ];
    let mut deterministic = 0;
    let mut failed: Vec<String> = Vec::new();
    for (args, outputs) in &commands {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let first_code = run_cli(&args);
        let first: Vec<Vec<u8>> = outputs
            .iter()
            .map(|o| fs::read(o).unwrap_or_default())
            .collect();
        let second_code = run_cli(&args);
        let second: Vec<Vec<u8>> = outputs
            .iter()
            .map(|o| fs::read(o).unwrap_or_default())
            .collect();
        if first_code == 0
            && second_code == 0
            && first == second
            && first.iter().all(|b| !b.is_empty())
        {
            deterministic += 1;
        } else {
            failed.push(format!("{} (exit {first_code}/{second_code})", args[0]));
        }
    }
    outcome(
        identical == 100 && failed.is_empty(),
        format!(
            "NACT identity {identical}/100; byte-identical reruns {deterministic}/{} commands{}",
            commands.len(),
            if failed.is_empty() {
                String::new()
            } else {
                format!(", failed: {}", failed.join(", "))
            }
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("cka-invariance", cka_invariance),
        ("clustering-oracle-equivalence", clustering_oracle),
        ("dendrogram-refinement", dendrogram_refinement),
        ("planted-redundancy-recovery", planted_recovery),
        ("probe-correctness", probe_correctness),
        ("ranking-recovery", ranking_recovery),
        ("pipeline-end-to-end", pipeline_end_to_end),
        ("benchmark-shape", benchmark_shape),
        ("format-roundtrip", format_roundtrip),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failures = 0;
    let mut ran = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let o = check();
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failures += (!o.pass) as usize;
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
