//! Pearson correlation between every pair of neurons of a view, stored as a
//! packed upper triangle, and the sign-insensitive distance
//! `cdist(x, y) = 1 - |corr(x, y)|`.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::activation::{FeatureView, NeuronId};
use crate::error::{Error, Result};

const BLOCK: usize = 256;

/// Offset of row `i` in a packed upper triangle (diagonal included) of order `n`.
fn row_offset(i: usize, n: usize) -> usize {
    i * (2 * n - i + 1) / 2
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationModel {
    neurons: Vec<NeuronId>,
    packed: Vec<f64>,
}

impl CorrelationModel {
    /// Builds a model from a dense symmetric correlation matrix. Only the
    /// upper triangle is read; the diagonal is forced to 1.
    pub fn from_dense(neurons: Vec<NeuronId>, corr: ArrayView2<'_, f64>) -> Result<Self> {
        let n = neurons.len();
        if corr.dim() != (n, n) {
            return Err(Error::GeometryMismatch(format!(
                "{:?} matrix for {n} neurons",
                corr.dim()
            )));
        }
        let mut packed = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            packed.push(1.0);
            for j in i + 1..n {
                let v = corr[[i, j]];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!(
                        "correlation {v} at ({i},{j}) outside [-1,1]"
                    )));
                }
                packed.push(v);
            }
        }
        Ok(CorrelationModel { neurons, packed })
    }

    pub fn num_neurons(&self) -> usize {
        self.neurons.len()
    }

    pub fn neurons(&self) -> &[NeuronId] {
        &self.neurons
    }

    /// Correlation between positions `i` and `j` of the model.
    pub fn corr(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.packed[row_offset(a, self.neurons.len()) + (b - a)]
    }

    pub fn cdist(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        1.0 - self.corr(i, j).abs()
    }

    /// Row `i` of the packed triangle: `corr(i, j)` for `j >= i`.
    pub fn upper_row(&self, i: usize) -> &[f64] {
        let n = self.neurons.len();
        &self.packed[row_offset(i, n)..row_offset(i + 1, n)]
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.neurons.len();
        Array2::from_shape_fn((n, n), |(i, j)| self.corr(i, j))
    }
}

/// Standardized column block: `(x - mean) / ||x - mean||`, zero for constant
/// columns.
fn standardized_block(
    view: &FeatureView<'_>,
    cols: std::ops::Range<usize>,
    stats: &[(f64, f64)],
) -> Array2<f64> {
    let t = view.num_rows();
    let mut block = Array2::zeros((t, cols.len()));
    let mut buf = vec![0.0; t];
    for (k, c) in cols.enumerate() {
        let (mean, norm) = stats[c];
        if norm == 0.0 {
            continue;
        }
        view.column_into(c, &mut buf);
        for (dst, &v) in block.column_mut(k).iter_mut().zip(&buf) {
            *dst = (v - mean) / norm;
        }
    }
    block
}

/// Pearson correlation over the `T` tokens for every pair of columns.
///
/// Constant columns get correlation 0 against every other column and 1 on
/// the diagonal. Work is tiled in column blocks; row-blocks of the packed
/// output are filled in parallel.
pub fn pearson_matrix(view: &FeatureView<'_>) -> Result<CorrelationModel> {
    let t = view.num_rows();
    if t < 2 {
        return Err(Error::TooFewRows { rows: t });
    }
    let n = view.num_features();

    // (mean, centered norm); norm 0 marks a constant column
    let stats: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|c| {
            let mut col = vec![0.0; t];
            view.column_into(c, &mut col);
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                return (first, 0.0);
            }
            let mean = col.iter().sum::<f64>() / t as f64;
            let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
            (mean, ss.sqrt())
        })
        .collect();

    let mut packed = vec![0.0; n * (n + 1) / 2];
    let starts: Vec<usize> = (0..n).step_by(BLOCK).collect();
    // Split the packed buffer into disjoint row-block segments.
    let mut segments: Vec<(usize, &mut [f64])> = Vec::with_capacity(starts.len());
    let mut rest = packed.as_mut_slice();
    for &s in &starts {
        let e = (s + BLOCK).min(n);
        let len = row_offset(e, n) - row_offset(s, n);
        let (seg, tail) = rest.split_at_mut(len);
        segments.push((s, seg));
        rest = tail;
    }

    segments.into_par_iter().for_each(|(s, seg)| {
        let e = (s + BLOCK).min(n);
        let left = standardized_block(view, s..e, &stats);
        let base = row_offset(s, n);
        for js in (s..n).step_by(BLOCK) {
            let je = (js + BLOCK).min(n);
            let right = if js == s {
                left.clone()
            } else {
                standardized_block(view, js..je, &stats)
            };
            let prod = left.t().dot(&right);
            for r in s..e {
                let row_start = row_offset(r, n) - base;
                for c in js.max(r)..je {
                    let v = if r == c {
                        1.0
                    } else {
                        prod[[r - s, c - js]].clamp(-1.0, 1.0)
                    };
                    seg[row_start + (c - r)] = v;
                }
            }
        }
    });

    Ok(CorrelationModel {
        neurons: view.neurons().to_vec(),
        packed,
    })
}
