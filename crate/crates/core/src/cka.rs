//! Linear centered kernel alignment between layer representations.
//!
//! For column-centered `X (T x Hx)` and `Y (T x Hy)`:
//!
//! ```text
//! cka(X, Y) = ||X^T Y||_F^2 / (||X^T X||_F * ||Y^T Y||_F)
//! ```
//!
//! Everything is computed in feature space (`Hx x Hy` cross-Gram), never
//! through `T x T` kernels.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationSet;
use crate::error::{Error, Result};

/// Subtracts each column's mean.
pub fn center_columns(m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let rows = m.nrows();
    if rows < 2 {
        return Err(Error::TooFewRows { rows });
    }
    let mean = m.mean_axis(Axis(0)).expect("non-empty");
    Ok(&m - &mean)
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A column-centered representation with its Gram norm `||X^T X||_F`.
struct Centered {
    matrix: Array2<f64>,
    gram_norm: f64,
}

fn prepare(m: ArrayView2<'_, f64>, what: &str) -> Result<Centered> {
    let matrix = center_columns(m)?;
    let (t, h) = matrix.dim();
    let threshold = 1e-12 * ((t * h) as f64).sqrt();
    if frobenius(&matrix) < threshold {
        return Err(Error::DegenerateInput(what.to_string()));
    }
    let gram_norm = frobenius(&matrix.t().dot(&matrix));
    Ok(Centered { matrix, gram_norm })
}

fn cka_centered(x: &Centered, y: &Centered) -> f64 {
    let cross = x.matrix.t().dot(&y.matrix);
    let num: f64 = cross.iter().map(|v| v * v).sum();
    num / (x.gram_norm * y.gram_norm)
}

fn canonical_order(a: &Array2<f64>, b: &Array2<f64>) -> bool {
    let by_shape = a.ncols().cmp(&b.ncols());
    let by_values = || {
        a.iter()
            .zip(b.iter())
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    by_shape.then_with(by_values).is_le()
}

pub fn linear_cka(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(Error::RowMismatch {
            left: x.nrows(),
            right: y.nrows(),
        });
    }
    let cx = prepare(x, "x")?;
    let cy = prepare(y, "y")?;
    // a fixed operand order makes the result bitwise symmetric
    if canonical_order(&cx.matrix, &cy.matrix) {
        Ok(cka_centered(&cx, &cy))
    } else {
        Ok(cka_centered(&cy, &cx))
    }
}

/// Symmetric `L x L` matrix of pairwise layer CKA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSimilarityMatrix {
    layers: usize,
    matrix: Vec<Vec<f64>>,
}

impl LayerSimilarityMatrix {
    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.matrix
    }
}

fn layer_rows(a: &ActivationSet, layer: usize, rows: Option<&[usize]>) -> Result<Array2<f64>> {
    let full = a.layer_matrix(layer)?;
    Ok(match rows {
        Some(r) => full.select(Axis(0), r),
        None => full,
    })
}

/// Pairwise CKA over all layers of `a`.
///
/// With `sample_rows`, one seeded row subset (sorted) is drawn and used for
/// every pair. Pairs are evaluated in parallel; each task holds two
/// centered `T x H` f64 layers.
pub fn layer_similarity(
    a: &ActivationSet,
    sample_rows: Option<usize>,
    seed: u64,
) -> Result<LayerSimilarityMatrix> {
    let t = a.num_tokens();
    let rows = match sample_rows {
        Some(n) if n > t => {
            return Err(Error::InvalidArgument(format!(
                "sample of {n} rows exceeds {t} tokens"
            )));
        }
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, t, n).into_vec();
            idx.sort_unstable();
            Some(idx)
        }
        None => None,
    };
    let rows = rows.as_deref();
    let l = a.num_layers();

    let prep = |layer: usize| -> Result<Centered> {
        let m = layer_rows(a, layer, rows)?;
        prepare(m.view(), &format!("layer {layer}"))
    };
    // Gram norms first, so degenerate layers are reported before any pair work.
    let norms: Vec<f64> = (0..l)
        .into_par_iter()
        .map(|i| prep(i).map(|c| c.gram_norm))
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..l)
        .flat_map(|i| (i + 1..l).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let x = Centered {
                matrix: center_columns(layer_rows(a, i, rows)?.view())?,
                gram_norm: norms[i],
            };
            let y = Centered {
                matrix: center_columns(layer_rows(a, j, rows)?.view())?,
                gram_norm: norms[j],
            };
            Ok(cka_centered(&x, &y))
        })
        .collect::<Result<_>>()?;

    let mut matrix = vec![vec![0.0; l]; l];
    for (i, row) in matrix.iter_mut().enumerate() {
        // ||G||^2 / (||G|| ||G||) of a non-degenerate layer
        row[i] = 1.0;
    }
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        matrix[i][j] = v;
        matrix[j][i] = v;
    }
    Ok(LayerSimilarityMatrix { layers: l, matrix })
}
