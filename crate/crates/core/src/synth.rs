//! Seeded synthetic activation sets with planted structure, for examples,
//! tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::activation::{ActivationSet, NeuronId};
use crate::error::Result;
use crate::labels::{LabeledDataset, TaskKind};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `bases` independent signals, each copied `copies` times with Gaussian
/// noise of `noise` times the signal's standard deviation, in one layer.
///
/// Copy `c` of base `b` sits at offset `c * bases + b`, so group members are
/// spread across the layer. Returns the set and the planted groups.
pub fn planted_groups(
    bases: usize,
    copies: usize,
    tokens: usize,
    noise: f64,
    seed: u64,
) -> Result<(ActivationSet, Vec<Vec<NeuronId>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = bases * copies;
    let mut data = vec![0f32; tokens * h];
    for t in 0..tokens {
        for b in 0..bases {
            let signal = normal(&mut rng);
            for c in 0..copies {
                data[t * h + c * bases + b] = (signal + noise * normal(&mut rng)) as f32;
            }
        }
    }
    let groups = (0..bases)
        .map(|b| (0..copies).map(|c| NeuronId(c * bases + b)).collect())
        .collect();
    Ok((
        ActivationSet::new("planted-groups", tokens, 1, h, data)?,
        groups,
    ))
}

/// A binary probing task whose label is `sum(informative) > 0`.
#[derive(Clone, Debug)]
pub struct PlantedTask {
    pub tokens: usize,
    pub layers: usize,
    pub layer_size: usize,
    /// Offsets in layer 0 that carry the label signal.
    pub informative: Vec<usize>,
    /// Extra noisy copies of each informative neuron placed in layer 0
    /// after the informative block; they must fit in `layer_size`.
    pub copies_in_layer: usize,
    /// When true, layers `1..` repeat layer 0 plus `layer_noise` noise;
    /// otherwise they are independent noise.
    pub repeat_layer0: bool,
    pub layer_noise: f64,
    /// Noise on within-layer copies.
    pub copy_noise: f64,
    /// Train/dev/test fractions, contiguous.
    pub split: (f64, f64, f64),
    pub seed: u64,
}

impl Default for PlantedTask {
    fn default() -> Self {
        PlantedTask {
            tokens: 4000,
            layers: 1,
            layer_size: 32,
            informative: vec![0],
            copies_in_layer: 0,
            repeat_layer0: false,
            layer_noise: 0.05,
            copy_noise: 0.05,
            split: (0.7, 0.15, 0.15),
            seed: 0,
        }
    }
}

impl PlantedTask {
    /// Offsets of the within-layer copies of informative neuron `k`.
    pub fn copy_offsets(&self, k: usize) -> Vec<usize> {
        let n = self.informative.len();
        let start = self.informative.iter().max().map_or(0, |m| m + 1);
        (0..self.copies_in_layer)
            .map(|c| start + c * n + k)
            .collect()
    }

    pub fn generate(&self) -> Result<(ActivationSet, LabeledDataset)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (t, h, l) = (self.tokens, self.layer_size, self.layers);
        let copies: Vec<Vec<usize>> = (0..self.informative.len())
            .map(|k| self.copy_offsets(k))
            .collect();
        let mut data = vec![0f32; l * t * h];
        let mut labels = Vec::with_capacity(t);
        let mut row = vec![0f64; h];
        for tok in 0..t {
            row.iter_mut().for_each(|v| *v = normal(&mut rng));
            for (k, &inf) in self.informative.iter().enumerate() {
                for &c in &copies[k] {
                    row[c] = row[inf] + self.copy_noise * normal(&mut rng);
                }
            }
            let score: f64 = self.informative.iter().map(|&i| row[i]).sum();
            labels.push(if score > 0.0 { "pos" } else { "neg" });
            for o in 0..h {
                data[tok * h + o] = row[o] as f32;
            }
            for layer in 1..l {
                for o in 0..h {
                    let v = if self.repeat_layer0 {
                        row[o] + self.layer_noise * normal(&mut rng)
                    } else {
                        normal(&mut rng)
                    };
                    data[(layer * t + tok) * h + o] = v as f32;
                }
            }
        }
        let set = ActivationSet::new("planted-task", t, l, h, data)?;
        let (tr, dv, te) = self.split;
        let ds = LabeledDataset::from_labels(&labels, TaskKind::TokenLabeling)?
            .with_fraction_split(tr, dv, te)?;
        Ok((set, ds))
    }
}
