#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use redunkit::activation::{ActivationSet, NeuronId};
use redunkit::correlation::CorrelationModel;
use redunkit::labels::{LabeledDataset, TaskKind};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| normal(rng))
}

/// Orthogonal `n x n` matrix from modified Gram-Schmidt on Gaussian columns.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let mut q = random_matrix(rng, n, n);
    for j in 0..n {
        for k in 0..j {
            let dot: f64 = (0..n).map(|i| q[[i, j]] * q[[i, k]]).sum();
            for i in 0..n {
                q[[i, j]] -= dot * q[[i, k]];
            }
        }
        let norm: f64 = (0..n).map(|i| q[[i, j]] * q[[i, j]]).sum::<f64>().sqrt();
        for i in 0..n {
            q[[i, j]] /= norm;
        }
    }
    q
}

/// Plain-loop linear CKA.
pub fn loop_cka(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let center = |m: &Array2<f64>| {
        let mut c = m.clone();
        for j in 0..m.ncols() {
            let mean = (0..m.nrows()).map(|i| m[[i, j]]).sum::<f64>() / m.nrows() as f64;
            for i in 0..m.nrows() {
                c[[i, j]] -= mean;
            }
        }
        c
    };
    let gram_sq = |a: &Array2<f64>, b: &Array2<f64>| {
        let mut s = 0.0;
        for p in 0..a.ncols() {
            for q in 0..b.ncols() {
                let d: f64 = (0..a.nrows()).map(|i| a[[i, p]] * b[[i, q]]).sum();
                s += d * d;
            }
        }
        s
    };
    let (cx, cy) = (center(x), center(y));
    gram_sq(&cx, &cy) / (gram_sq(&cx, &cx).sqrt() * gram_sq(&cy, &cy).sqrt())
}

/// Activations with `factors` latent sources mixed into `neurons` columns
/// plus noise, so random instances contain real correlation structure.
pub fn mixed_activations(
    rng: &mut ChaCha8Rng,
    neurons: usize,
    tokens: usize,
    factors: usize,
) -> ActivationSet {
    let load = random_matrix(rng, factors, neurons);
    let noise: f64 = rng.random_range(0.05..1.0);
    let mut data = Vec::with_capacity(tokens * neurons);
    for _ in 0..tokens {
        let z: Vec<f64> = (0..factors).map(|_| normal(rng)).collect();
        for n in 0..neurons {
            let v: f64 =
                (0..factors).map(|f| z[f] * load[[f, n]]).sum::<f64>() + noise * normal(rng);
            data.push(v as f32);
        }
    }
    ActivationSet::new("mixed", tokens, 1, neurons, data).unwrap()
}

/// Average linkage recomputed from scratch at every merge: the linkage of
/// two clusters is the mean `cdist` over all member pairs. Merges the
/// closest pair (ties by smallest member ids) while its linkage is at most
/// `threshold`.
pub fn naive_average_linkage(model: &CorrelationModel, threshold: f64) -> Vec<Vec<NeuronId>> {
    let mut clusters: Vec<Vec<usize>> = (0..model.num_neurons()).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut sum = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        sum += model.cdist(i, j);
                    }
                }
                let d = sum / (clusters[a].len() * clusters[b].len()) as f64;
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => {
                        d < bd
                            || (d == bd
                                && (clusters[a][0], clusters[b][0])
                                    < (clusters[ba][0], clusters[bb][0]))
                    }
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        match best {
            Some((d, a, b)) if d <= threshold => {
                let moved = clusters.remove(b);
                clusters[a].extend(moved);
                clusters[a].sort_unstable();
            }
            _ => break,
        }
    }
    let ids = model.neurons();
    let mut out: Vec<Vec<NeuronId>> = clusters
        .into_iter()
        .map(|c| {
            let mut v: Vec<NeuronId> = c.into_iter().map(|i| ids[i]).collect();
            v.sort_unstable();
            v
        })
        .collect();
    out.sort();
    out
}

/// Two square blobs in 2-D centred at `(-3, -3)` and `(3, 3)` with
/// half-width 1. Rows alternate classes; all rows train.
pub fn separable_blobs(points: usize, seed: u64) -> (ActivationSet, LabeledDataset, Vec<[f64; 2]>) {
    let mut r = rng(seed);
    let mut pts = Vec::with_capacity(points);
    let mut labels = Vec::with_capacity(points);
    for i in 0..points {
        let class = i % 2;
        let sign = if class == 0 { -1.0 } else { 1.0 };
        let x0 = sign * 3.0 + r.random_range(-1.0..1.0);
        let x1 = sign * 3.0 + r.random_range(-1.0..1.0);
        pts.push([x0, x1]);
        labels.push(if class == 0 { "a" } else { "b" });
    }
    let data: Vec<f32> = pts
        .iter()
        .flat_map(|p| [p[0] as f32, p[1] as f32])
        .collect();
    let set = ActivationSet::new("blobs", points, 1, 2, data).unwrap();
    let ds = LabeledDataset::from_labels(&labels, TaskKind::TokenLabeling).unwrap();
    (set, ds, pts)
}

/// Perceptron with bias on `points`; converging within the epoch budget
/// certifies linear separability.
pub fn perceptron_separates(points: &[[f64; 2]], labels: &[usize]) -> bool {
    let mut w = [0.0f64; 3];
    for _ in 0..10_000 {
        let mut errors = 0;
        for (p, &y) in points.iter().zip(labels) {
            let s = if y == 1 { 1.0 } else { -1.0 };
            if s * (w[0] * p[0] + w[1] * p[1] + w[2]) <= 0.0 {
                w[0] += s * p[0];
                w[1] += s * p[1];
                w[2] += s;
                errors += 1;
            }
        }
        if errors == 0 {
            return true;
        }
    }
    false
}

/// Partition equality up to ordering.
pub fn same_partition(a: &[Vec<NeuronId>], b: &[Vec<NeuronId>]) -> bool {
    let norm = |p: &[Vec<NeuronId>]| {
        let mut v: Vec<Vec<NeuronId>> = p
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort_unstable();
                c
            })
            .collect();
        v.sort();
        v
    };
    norm(a) == norm(b)
}
