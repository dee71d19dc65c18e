//! Average-linkage agglomerative clustering over `cdist`, threshold cuts,
//! cluster reduction and layer-span statistics.
//!
//! The dendrogram is built once per [`CorrelationModel`]; every threshold is
//! a prefix of its merge sequence, so a lower threshold always refines a
//! higher one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::{ActivationSet, FeatureView, NeuronId};
use crate::correlation::CorrelationModel;
use crate::error::{Error, Result};

/// One agglomeration step. Clusters are named by their smallest member
/// position, so `a < b` and the merged cluster keeps the name `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    neurons: Vec<NeuronId>,
    merges: Vec<Merge>,
}

/// Strict upper triangle of a symmetric matrix.
struct Triangle {
    n: usize,
    values: Vec<f64>,
}

impl Triangle {
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.values[k] = v;
    }
}

fn nearest_above(d: &Triangle, active: &[bool], i: usize) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for j in (i + 1..d.n).filter(|&j| active[j]) {
        let v = d.get(i, j);
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

impl Dendrogram {
    /// Average linkage with Lance-Williams updates and a cached nearest
    /// neighbour per cluster (searching only higher-named clusters).
    ///
    /// Among equal linkage distances the pair with the smallest
    /// `(first name, second name)` merges first.
    pub fn average_linkage(model: &CorrelationModel) -> Self {
        let n = model.num_neurons();
        let mut d = Triangle {
            n,
            values: Vec::with_capacity(n * n.saturating_sub(1) / 2),
        };
        for i in 0..n {
            d.values
                .extend(model.upper_row(i)[1..].iter().map(|c| 1.0 - c.abs()));
        }
        let mut active = vec![true; n];
        let mut size = vec![1usize; n];
        let mut nn: Vec<(usize, f64)> = (0..n).map(|i| nearest_above(&d, &active, i)).collect();
        let mut merges = Vec::with_capacity(n.saturating_sub(1));

        for _ in 1..n {
            let mut i = usize::MAX;
            let mut best = f64::INFINITY;
            for k in 0..n {
                if active[k] && nn[k].1 < best {
                    best = nn[k].1;
                    i = k;
                }
            }
            if i == usize::MAX {
                break;
            }
            let j = nn[i].0;
            let (si, sj) = (size[i] as f64, size[j] as f64);
            for k in (0..n).filter(|&k| active[k] && k != i && k != j) {
                let v = (si * d.get(i, k) + sj * d.get(j, k)) / (si + sj);
                d.set(i, k, v);
            }
            active[j] = false;
            size[i] += size[j];
            merges.push(Merge {
                a: i,
                b: j,
                distance: best,
                size: size[i],
            });

            for k in 0..i {
                if !active[k] {
                    continue;
                }
                if nn[k].0 == i || nn[k].0 == j {
                    nn[k] = nearest_above(&d, &active, k);
                } else {
                    let v = d.get(k, i);
                    if v < nn[k].1 || (v == nn[k].1 && i < nn[k].0) {
                        nn[k] = (i, v);
                    }
                }
            }
            nn[i] = nearest_above(&d, &active, i);
            for k in i + 1..j {
                if active[k] && nn[k].0 == j {
                    nn[k] = nearest_above(&d, &active, k);
                }
            }
        }
        Dendrogram {
            neurons: model.neurons().to_vec(),
            merges,
        }
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn num_leaves(&self) -> usize {
        self.neurons.len()
    }

    /// Applies merges in order while the linkage distance is `<= threshold`.
    pub fn cut(&self, threshold: f64) -> Result<Clustering> {
        check_threshold(threshold)?;
        let n = self.neurons.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in self.merges.iter().take_while(|m| m.distance <= threshold) {
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for x in 0..n {
            let r = find(&mut parent, x);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(x);
        }
        let mut clusters: Vec<Vec<NeuronId>> = groups
            .into_iter()
            .map(|g| g.into_iter().map(|p| self.neurons[p]).collect())
            .collect();
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.sort_unstable_by_key(|c| c[0]);
        Ok(Clustering {
            threshold,
            clusters,
        })
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} outside [0,1]"
        )));
    }
    Ok(())
}

/// Partition of a model's neurons at threshold `c_t`. Each cluster is
/// sorted ascending and clusters are ordered by their smallest id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub threshold: f64,
    pub clusters: Vec<Vec<NeuronId>>,
}

impl Clustering {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Smallest id of each cluster.
    pub fn representatives(&self) -> Vec<NeuronId> {
        self.clusters.iter().map(|c| c[0]).collect()
    }

    /// True when every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &Clustering) -> bool {
        let mut owner = std::collections::HashMap::new();
        for (k, c) in coarser.clusters.iter().enumerate() {
            for &n in c {
                owner.insert(n, k);
            }
        }
        self.clusters.iter().all(|c| {
            let first = owner.get(&c[0]);
            first.is_some() && c.iter().all(|n| owner.get(n) == first)
        })
    }
}

pub fn cluster(model: &CorrelationModel, threshold: f64) -> Result<Clustering> {
    check_threshold(threshold)?;
    Dendrogram::average_linkage(model).cut(threshold)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReduceStrategy {
    /// Keep each cluster's smallest id.
    #[default]
    FirstIndex,
    /// Keep a uniformly drawn member, seeded.
    SeededRandom,
}

impl std::str::FromStr for ReduceStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" | "first_index" => Ok(ReduceStrategy::FirstIndex),
            "random" | "seeded_random" => Ok(ReduceStrategy::SeededRandom),
            other => Err(Error::InvalidArgument(format!(
                "unknown reduce strategy '{other}'"
            ))),
        }
    }
}

/// One representative per cluster, aligned with `clustering.clusters`.
pub fn pick_representatives(
    clustering: &Clustering,
    strategy: ReduceStrategy,
    seed: u64,
) -> Vec<NeuronId> {
    match strategy {
        ReduceStrategy::FirstIndex => clustering.representatives(),
        ReduceStrategy::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            clustering
                .clusters
                .iter()
                .map(|c| c[rng.random_range(0..c.len())])
                .collect()
        }
    }
}

/// The reduced feature set: one neuron per cluster, ascending by id.
pub fn reduce<'a>(
    source: &'a ActivationSet,
    clustering: &Clustering,
    strategy: ReduceStrategy,
    seed: u64,
) -> Result<FeatureView<'a>> {
    let mut picked = pick_representatives(clustering, strategy, seed);
    picked.sort_unstable();
    source.view(picked)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub retained: usize,
    pub accuracy: f64,
}

/// Cuts one dendrogram at each threshold and scores the clustering with
/// `eval`.
pub fn threshold_sweep<F>(
    model: &CorrelationModel,
    thresholds: &[f64],
    mut eval: F,
) -> Result<Vec<SweepRow>>
where
    F: FnMut(&Clustering) -> Result<f64>,
{
    for w in thresholds.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidArgument(
                "thresholds must be ascending".into(),
            ));
        }
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    let dendrogram = Dendrogram::average_linkage(model);
    thresholds
        .iter()
        .map(|&threshold| {
            let clustering = dendrogram.cut(threshold)?;
            let accuracy = eval(&clustering).map_err(|e| Error::AtThreshold {
                threshold,
                source: Box::new(e),
            })?;
            Ok(SweepRow {
                threshold,
                retained: clustering.len(),
                accuracy,
            })
        })
        .collect()
}

/// Cluster counts by layer window: same layer, adjacent, within three
/// neighbouring layers, and further apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpanHistogram {
    pub counts: [usize; 4],
    pub fractions: [f64; 4],
}

pub const SPAN_LABELS: [&str; 4] = ["1", "2", "3", ">3"];

pub fn span_histogram(clustering: &Clustering, layer_size: usize) -> ClusterSpanHistogram {
    let mut counts = [0usize; 4];
    for c in &clustering.clusters {
        let (lo, hi) = c.iter().fold((usize::MAX, 0), |(lo, hi), n| {
            let l = n.layer(layer_size);
            (lo.min(l), hi.max(l))
        });
        let window = hi - lo + 1;
        counts[window.min(4) - 1] += 1;
    }
    let total: usize = counts.iter().sum();
    let mut fractions = [0.0; 4];
    if total > 0 {
        for (f, &c) in fractions.iter_mut().zip(&counts) {
            *f = c as f64 / total as f64;
        }
    }
    ClusterSpanHistogram { counts, fractions }
}
