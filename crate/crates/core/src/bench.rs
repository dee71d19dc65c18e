//! Probe training time as a function of feature count.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::activation::RowSource;
use crate::error::{Error, Result};
use crate::probe::{train_source, ProbeConfig, Targets};

/// A `rows x features` Gaussian design matrix backed by a small pool of
/// distinct rows, so that shapes like 100,000 x 9984 cost a few tens of
/// megabytes. Row `r` reads pool row `r mod pool`.
pub struct PooledRows {
    rows: usize,
    features: usize,
    pool_rows: usize,
    pool: Vec<f32>,
}

impl PooledRows {
    pub fn new(rows: usize, features: usize, pool_rows: usize, seed: u64) -> Self {
        let pool_rows = pool_rows.clamp(1, rows.max(1));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool = (0..pool_rows * features)
            .map(|_| rng.sample::<f32, _>(StandardNormal))
            .collect();
        PooledRows {
            rows,
            features,
            pool_rows,
            pool,
        }
    }

    /// Binary labels `sum of the first min(F, 10) features > 0`.
    pub fn labels(&self) -> Vec<usize> {
        let k = self.features.min(10);
        (0..self.rows)
            .map(|r| {
                let p = (r % self.pool_rows) * self.features;
                (self.pool[p..p + k].iter().sum::<f32>() > 0.0) as usize
            })
            .collect()
    }
}

impl RowSource for PooledRows {
    fn num_rows(&self) -> usize {
        self.rows
    }

    fn num_features(&self) -> usize {
        self.features
    }

    fn fill_row(&self, row: usize, out: &mut [f64]) {
        let p = (row % self.pool_rows) * self.features;
        for (o, &v) in out.iter_mut().zip(&self.pool[p..p + self.features]) {
            *o = v as f64;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub features: usize,
    pub tokens: usize,
    /// Mean wall-clock seconds of one full training run.
    pub seconds: f64,
    pub runs: Vec<f64>,
}

pub const POOL_ROWS: usize = 1024;

/// Times `runs` full probe trainings (all `cfg.epochs` epochs) for every
/// feature count on `tokens` synthetic rows.
pub fn benchmark_classifier(
    feature_counts: &[usize],
    tokens: usize,
    cfg: &ProbeConfig,
    runs: usize,
) -> Result<Vec<BenchRow>> {
    if feature_counts.windows(2).any(|w| w[1] < w[0]) || feature_counts.contains(&0) {
        return Err(Error::InvalidArgument(
            "feature counts must be positive and ascending".into(),
        ));
    }
    if runs == 0 || tokens < 2 {
        return Err(Error::InvalidArgument(
            "need at least one run and two tokens".into(),
        ));
    }
    let rows: Vec<usize> = (0..tokens).collect();
    feature_counts
        .iter()
        .map(|&features| {
            let source = PooledRows::new(tokens, features, POOL_ROWS, cfg.seed);
            let labels = source.labels();
            let targets = Targets::Classes {
                labels: &labels,
                classes: 2,
            };
            let times = (0..runs)
                .map(|_| {
                    let start = Instant::now();
                    train_source(&source, targets, &rows, cfg, false)?;
                    Ok(start.elapsed().as_secs_f64())
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(BenchRow {
                features,
                tokens,
                seconds: times.iter().sum::<f64>() / runs as f64,
                runs: times,
            })
        })
        .collect()
}
