mod common;

use proptest::prelude::*;

use common::*;
use redunkit::activation::ActivationSet;
use redunkit::clustering::{span_histogram, Dendrogram};
use redunkit::correlation::pearson_matrix;
use redunkit::labels::{LabeledDataset, TaskKind, DEV, TEST, TRAIN};
use redunkit::nact::{decode, encode};
use redunkit::pipeline::{layer_selector, run_pipeline, LsMode, PipelineConfig};
use redunkit::probe::{evaluate, train, ProbeConfig};
use redunkit::ranking::{rank, MinimalSetSearch};
use redunkit::synth::PlantedTask;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cuts_refine_and_count_decreases(seed in any::<u64>(), n in 2usize..24, t in 3usize..30, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let set = mixed_activations(&mut r, n, t, 3);
        let d = Dendrogram::average_linkage(&pearson_matrix(&set.all_neurons()).unwrap());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let fine = d.cut(lo).unwrap();
        let coarse = d.cut(hi).unwrap();
        prop_assert!(fine.refines(&coarse));
        prop_assert!(fine.len() >= coarse.len());
        let hist = span_histogram(&coarse, n);
        prop_assert!((hist.fractions.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn nact_roundtrip(
        l in 1usize..4,
        t in 1usize..12,
        h in 1usize..9,
        name in "[a-z0-9/_-]{0,24}",
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let data: Vec<f32> = (0..l * t * h).map(|_| (normal(&mut r) * 1e3) as f32).collect();
        let set = ActivationSet::new(name, t, l, h, data).unwrap();
        prop_assert_eq!(decode(&encode(&set)).unwrap(), set);
    }

    #[test]
    fn affine_neuron_keeps_correlations(seed in any::<u64>(), scale in 1i32..=64, shift in -4096i32..=4096) {
        // quantized values keep a*x + b exact in f32
        let mut r = rng(seed);
        let (t, n) = (25, 5);
        let q: Vec<i32> = (0..t * n).map(|_| (normal(&mut r) * 300.0) as i32).collect();
        let a = scale as f64 / 4.0;
        let b = shift as f64 / 1024.0;
        let base: Vec<f32> = q.iter().map(|&k| k as f32 / 1024.0).collect();
        let mut moved = base.clone();
        for tok in 0..t {
            moved[tok * n] = (a * (q[tok * n] as f64 / 1024.0) + b) as f32;
        }
        let x = ActivationSet::new("x", t, 1, n, base).unwrap();
        let y = ActivationSet::new("y", t, 1, n, moved).unwrap();
        let cx = pearson_matrix(&x.all_neurons()).unwrap();
        let cy = pearson_matrix(&y.all_neurons()).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((cx.corr(i, j) - cy.corr(i, j)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn power_of_two_weight_scaling_keeps_ranking(seed in any::<u64>(), k in -8i32..8) {
        let (a, d) = PlantedTask { tokens: 300, layer_size: 12, informative: vec![3, 7], seed, ..Default::default() }
            .generate()
            .unwrap();
        let mut model = train(&a.all_neurons(), &d, &ProbeConfig::default().with_seed(seed)).unwrap();
        let before = rank(&model).top(12);
        model.weights.mapv_inplace(|w| w * 2f64.powi(k));
        prop_assert_eq!(rank(&model).top(12), before);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn standardization_absorbs_column_scale(seed in any::<u64>(), col in 0usize..6) {
        let task = PlantedTask { tokens: 600, layer_size: 6, informative: vec![1, 4], seed, ..Default::default() };
        let (a, d) = task.generate().unwrap();
        let (t, h) = (a.num_tokens(), a.layer_size());
        let mut scaled = a.data().to_vec();
        for tok in 0..t {
            scaled[tok * h + col] *= 10.0;
        }
        let b = ActivationSet::new("scaled", t, 1, h, scaled).unwrap();
        let cfg = ProbeConfig::default().with_seed(seed);
        let ma = train(&a.all_neurons(), &d, &cfg).unwrap();
        let mb = train(&b.all_neurons(), &d, &cfg).unwrap();
        for split in [TRAIN, DEV, TEST] {
            let ea = evaluate(&ma, &a.all_neurons(), &d, split).unwrap();
            let eb = evaluate(&mb, &b.all_neurons(), &d, split).unwrap();
            prop_assert_eq!(ea.per_class, eb.per_class);
        }
    }
}

#[test]
fn lowering_ls_threshold_never_raises_selected_layer() {
    let (a, d) = PlantedTask {
        tokens: 3000,
        layers: 4,
        layer_size: 8,
        informative: vec![0, 2, 5],
        repeat_layer0: true,
        layer_noise: 0.8,
        seed: 11,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let cfg = ProbeConfig::default();
    let thresholds = [1.0, 0.999, 0.99, 0.97, 0.9, 0.5, 1e-6];
    let selected: Vec<usize> = thresholds
        .iter()
        .map(|&th| {
            layer_selector(&a, &d, &cfg, th, LsMode::CumulativeConcat, DEV)
                .unwrap()
                .selected_layer
        })
        .collect();
    assert!(selected.windows(2).all(|w| w[1] <= w[0]), "{selected:?}");
    assert_eq!(*selected.last().unwrap(), 0);
}

#[test]
fn individual_mode_passing_set_matches_definition() {
    let (a, d) = PlantedTask {
        tokens: 3000,
        layers: 3,
        layer_size: 6,
        informative: vec![1],
        repeat_layer0: true,
        layer_noise: 0.3,
        seed: 3,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let s = layer_selector(
        &a,
        &d,
        &ProbeConfig::default(),
        0.97,
        LsMode::Individual,
        DEV,
    )
    .unwrap();
    let expected: Vec<usize> = (0..3)
        .filter(|&i| s.per_layer_acc[i] >= 0.97 * s.oracle_acc)
        .collect();
    assert_eq!(s.passing_layers, expected);
}

#[test]
fn oracle_matches_layer_zero_on_average() {
    // paired runs: layers 1 and 2 are near copies of layer 0, so the oracle
    // sees more features carrying the same signal
    let (mut oracle, mut layer0) = (0.0, 0.0);
    for seed in 0..5 {
        let (a, d) = PlantedTask {
            tokens: 4000,
            layers: 3,
            layer_size: 16,
            informative: vec![0, 5, 9],
            repeat_layer0: true,
            layer_noise: 0.05,
            seed,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let cfg = ProbeConfig::default().with_seed(seed);
        let s = layer_selector(&a, &d, &cfg, 1.0, LsMode::Individual, DEV).unwrap();
        oracle += s.oracle_acc / 5.0;
        layer0 += s.per_layer_acc[0] / 5.0;
    }
    assert!(oracle >= layer0 - 1e-9, "oracle {oracle} layer0 {layer0}");
}

#[test]
fn one_layer_oracle_is_plain_training() {
    let (a, d) = PlantedTask::default().generate().unwrap();
    let cfg = ProbeConfig::default();
    let (oracle_model, oracle_eval) = redunkit::probe::train_oracle(&a, &d, &cfg, DEV).unwrap();
    let view = a.layer_view(0).unwrap();
    let model = train(&view, &d, &cfg).unwrap();
    assert_eq!(oracle_model, model);
    assert_eq!(oracle_eval, evaluate(&model, &view, &d, DEV).unwrap());
}

#[test]
fn minimal_set_is_smallest_passing_schedule_entry() {
    let task = PlantedTask {
        tokens: 6000,
        layer_size: 40,
        informative: (0..6).map(|i| i * 5 + 2).collect(),
        seed: 9,
        ..Default::default()
    };
    let (a, d) = task.generate().unwrap();
    let cfg = ProbeConfig::default();
    let view = a.all_neurons();
    let model = train(&view, &d, &cfg).unwrap();
    let ranking = rank(&model);
    let oracle = evaluate(&model, &view, &d, DEV).unwrap().accuracy;
    let schedule = [2, 4, 6, 8, 16, 40];
    let search = MinimalSetSearch {
        oracle_accuracy: oracle,
        retention: 0.99,
        schedule: &schedule,
        split: DEV,
    };
    let found = search.run(&view, &d, &ranking, &cfg).unwrap().unwrap();
    let k = found.selected.len();
    assert_eq!(found.selected, ranking.top(k));
    assert!(found.retention >= 0.99);
    assert!(found.search_trace.windows(2).all(|w| w[0].size < w[1].size));
    // selected size <= ceil(m / g) * g for granularity 2 and m = 6
    assert!(k <= 6, "selected {k}");
    let pos = schedule.iter().position(|&s| s == k).unwrap();
    if pos > 0 {
        let smaller = MinimalSetSearch {
            schedule: &schedule[pos - 1..pos],
            ..search
        };
        assert!(smaller.run(&view, &d, &ranking, &cfg).unwrap().is_err());
    }
    for w in 1..ranking.len() {
        let (p, q) = (ranking.top(w), ranking.top(w + 1));
        assert_eq!(&q[..w], &p[..]);
    }
}

#[test]
fn retention_one_fails_when_only_full_set_reaches_oracle() {
    // every neuron carries an equal share of the signal
    let task = PlantedTask {
        tokens: 4000,
        layer_size: 8,
        informative: (0..8).collect(),
        seed: 1,
        ..Default::default()
    };
    let (a, d) = task.generate().unwrap();
    let cfg = ProbeConfig::default();
    let view = a.all_neurons();
    let model = train(&view, &d, &cfg).unwrap();
    let oracle = evaluate(&model, &view, &d, DEV).unwrap().accuracy;
    let search = MinimalSetSearch {
        oracle_accuracy: oracle,
        retention: 1.0,
        schedule: &[1, 2, 4],
        split: DEV,
    };
    let failure = search
        .run(&view, &d, &rank(&model), &cfg)
        .unwrap()
        .unwrap_err();
    assert_eq!(failure.search_trace.len(), 3);
    assert!(failure.best_retention < 1.0);
}

#[test]
fn pipeline_is_reproducible_and_arithmetic_exact() {
    let task = PlantedTask {
        tokens: 3000,
        layers: 3,
        layer_size: 12,
        informative: vec![0, 1],
        copies_in_layer: 2,
        repeat_layer0: true,
        ..Default::default()
    };
    let (a, d) = task.generate().unwrap();
    let cfg = PipelineConfig {
        schedule: Some(vec![2, 4, 8]),
        ..Default::default()
    };
    let mut r1 = run_pipeline(&a, &d, &cfg).unwrap();
    let mut r2 = run_pipeline(&a, &d, &cfg).unwrap();
    r1.timing = Default::default();
    r2.timing = Default::default();
    assert_eq!(r1, r2);
    assert_eq!(r1.final_neurons, r1.fs.selected.len());
    assert_eq!(
        r1.percent_reduction,
        1.0 - r1.final_neurons as f64 / (3 * 12) as f64
    );
    assert!((0.0..1.0).contains(&r1.percent_reduction));
    assert!(r1.stages_contained(12));
}

#[test]
fn planted_sweep_keeps_accuracy_with_few_neurons() {
    let (a, groups) = redunkit::synth::planted_groups(20, 5, 20_000, 0.01, 4).unwrap();
    // label on base signals 0..3
    let labels: Vec<&str> = (0..a.num_tokens())
        .map(|t| {
            if (0..3).map(|b| a.value(0, t, b) as f64).sum::<f64>() > 0.0 {
                "pos"
            } else {
                "neg"
            }
        })
        .collect();
    let d = LabeledDataset::from_labels(&labels, TaskKind::TokenLabeling)
        .unwrap()
        .with_fraction_split(0.7, 0.15, 0.15)
        .unwrap();
    let model = pearson_matrix(&a.all_neurons()).unwrap();
    let cfg = ProbeConfig::default();
    let rows = redunkit::clustering::threshold_sweep(&model, &[0.0, 0.3], |c| {
        let view = redunkit::clustering::reduce(&a, c, Default::default(), 0)?;
        let m = train(&view, &d, &cfg)?;
        Ok(evaluate(&m, &view, &d, DEV)?.accuracy)
    })
    .unwrap();
    assert_eq!(rows[0].retained, 100);
    assert!(rows[1].retained <= 30);
    assert!(rows[1].accuracy >= rows[0].accuracy - 0.01, "{rows:?}");
    assert_eq!(groups.len(), 20);
}
