//! Activation data model: the per-layer token embeddings of one model over a
//! corpus, addressed by flat neuron ids, and column views over subsets of
//! neurons.

use std::collections::HashSet;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat neuron index in `[0, layers * layer_size)`.
///
/// Layer `l`, offset `o` maps to `l * layer_size + o`, so ids sort layer 0
/// first and by offset within a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NeuronId(pub usize);

impl NeuronId {
    pub fn from_parts(layer: usize, offset: usize, layer_size: usize) -> Self {
        debug_assert!(offset < layer_size);
        NeuronId(layer * layer_size + offset)
    }

    pub fn layer(self, layer_size: usize) -> usize {
        self.0 / layer_size
    }

    pub fn offset(self, layer_size: usize) -> usize {
        self.0 % layer_size
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Activations of `num_layers` layers of width `layer_size` over
/// `num_tokens` rows.
///
/// Storage is layer-major, then token-major, then neuron offset: the value
/// of neuron `o` of layer `l` for token `t` lives at `(l * T + t) * H + o`.
/// Layer 0 is the embedding layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationSet {
    num_tokens: usize,
    num_layers: usize,
    layer_size: usize,
    data: Vec<f32>,
    model_name: String,
}

impl ActivationSet {
    pub fn new(
        model_name: impl Into<String>,
        num_tokens: usize,
        num_layers: usize,
        layer_size: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        let expected = num_tokens
            .checked_mul(num_layers)
            .and_then(|v| v.checked_mul(layer_size))
            .ok_or_else(|| Error::GeometryMismatch("geometry overflows usize".into()))?;
        if data.len() != expected {
            return Err(Error::GeometryMismatch(format!(
                "{num_layers} layers x {num_tokens} tokens x {layer_size} neurons needs {expected} values, got {}",
                data.len()
            )));
        }
        if num_layers == 0 || layer_size == 0 {
            return Err(Error::GeometryMismatch(
                "layers and layer size must be positive".into(),
            ));
        }
        if let Some(offset) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { offset });
        }
        Ok(ActivationSet {
            num_tokens,
            num_layers,
            layer_size,
            data,
            model_name: model_name.into(),
        })
    }

    /// Builds a set from one `T x H` matrix per layer.
    pub fn from_layers(model_name: impl Into<String>, layers: &[Array2<f32>]) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::GeometryMismatch("at least one layer required".into()))?;
        let (t, h) = first.dim();
        let mut data = Vec::with_capacity(layers.len() * t * h);
        for (i, layer) in layers.iter().enumerate() {
            if layer.dim() != (t, h) {
                return Err(Error::GeometryMismatch(format!(
                    "layer {i} has shape {:?}, expected {:?}",
                    layer.dim(),
                    (t, h)
                )));
            }
            data.extend(layer.iter().copied());
        }
        Self::new(model_name, t, layers.len(), h, data)
    }

    pub fn num_tokens(&self) -> usize {
        self.num_tokens
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn layer_size(&self) -> usize {
        self.layer_size
    }

    pub fn total_neurons(&self) -> usize {
        self.num_layers * self.layer_size
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Value of `z_token^layer` at neuron `offset`.
    pub fn value(&self, layer: usize, token: usize, offset: usize) -> f32 {
        self.data[(layer * self.num_tokens + token) * self.layer_size + offset]
    }

    /// Contiguous `T * H` slab of one layer, row-major by token.
    pub fn layer_slice(&self, layer: usize) -> Result<&[f32]> {
        self.check_layer(layer)?;
        let n = self.num_tokens * self.layer_size;
        Ok(&self.data[layer * n..(layer + 1) * n])
    }

    /// Layer `layer` as a `T x H` f64 matrix.
    pub fn layer_matrix(&self, layer: usize) -> Result<Array2<f64>> {
        let slab = self.layer_slice(layer)?;
        let values = slab.iter().map(|&v| v as f64).collect();
        Ok(
            Array2::from_shape_vec((self.num_tokens, self.layer_size), values)
                .expect("slab length matches geometry"),
        )
    }

    fn check_layer(&self, layer: usize) -> Result<()> {
        if layer >= self.num_layers {
            return Err(Error::LayerOutOfRange {
                layer,
                layers: self.num_layers,
            });
        }
        Ok(())
    }

    pub fn neurons_of_layer(&self, layer: usize) -> Result<Vec<NeuronId>> {
        self.check_layer(layer)?;
        Ok((0..self.layer_size)
            .map(|o| NeuronId::from_parts(layer, o, self.layer_size))
            .collect())
    }

    /// All neurons of layers `0..=upto_layer`, layer 0 first.
    pub fn concat_layers(&self, upto_layer: usize) -> Result<FeatureView<'_>> {
        self.check_layer(upto_layer)?;
        let neurons = (0..(upto_layer + 1) * self.layer_size)
            .map(NeuronId)
            .collect();
        FeatureView::new(self, neurons)
    }

    /// The neurons of a single layer.
    pub fn layer_view(&self, layer: usize) -> Result<FeatureView<'_>> {
        FeatureView::new(self, self.neurons_of_layer(layer)?)
    }

    pub fn all_neurons(&self) -> FeatureView<'_> {
        self.concat_layers(self.num_layers - 1)
            .expect("at least one layer")
    }

    pub fn view(&self, neurons: Vec<NeuronId>) -> Result<FeatureView<'_>> {
        FeatureView::new(self, neurons)
    }
}

/// Row-wise access to a `rows x features` design matrix.
///
/// Probes train against this so that a view over stored activations and a
/// generated matrix that never exists in memory share one training path.
pub trait RowSource: Sync {
    fn num_rows(&self) -> usize;
    fn num_features(&self) -> usize;
    /// Writes row `row` into `out`, which has length `num_features()`.
    fn fill_row(&self, row: usize, out: &mut [f64]);
}

/// An ordered selection of neurons over an [`ActivationSet`]; column `k`
/// is neuron `neurons()[k]` across all tokens.
#[derive(Clone, Debug)]
pub struct FeatureView<'a> {
    source: &'a ActivationSet,
    neurons: Vec<NeuronId>,
    // element offset of token 0 for each selected neuron
    bases: Vec<usize>,
}

impl<'a> FeatureView<'a> {
    pub fn new(source: &'a ActivationSet, neurons: Vec<NeuronId>) -> Result<Self> {
        let total = source.total_neurons();
        let mut seen = HashSet::with_capacity(neurons.len());
        let h = source.layer_size;
        let t = source.num_tokens;
        let mut bases = Vec::with_capacity(neurons.len());
        for &n in &neurons {
            if n.0 >= total {
                return Err(Error::NeuronOutOfRange {
                    neuron: n.0,
                    neurons: total,
                });
            }
            if !seen.insert(n) {
                return Err(Error::DuplicateNeuron(n.0));
            }
            bases.push(n.layer(h) * t * h + n.offset(h));
        }
        Ok(FeatureView {
            source,
            neurons,
            bases,
        })
    }

    pub fn source(&self) -> &'a ActivationSet {
        self.source
    }

    pub fn neurons(&self) -> &[NeuronId] {
        &self.neurons
    }

    pub fn num_features(&self) -> usize {
        self.neurons.len()
    }

    pub fn num_rows(&self) -> usize {
        self.source.num_tokens
    }

    /// Value at (`token`, column `k`).
    pub fn get(&self, token: usize, k: usize) -> f32 {
        self.source.data[self.bases[k] + token * self.source.layer_size]
    }

    /// Column `k` over all tokens, widened to f64.
    pub fn column_into(&self, k: usize, out: &mut [f64]) {
        let h = self.source.layer_size;
        let base = self.bases[k];
        for (t, o) in out.iter_mut().enumerate() {
            *o = self.source.data[base + t * h] as f64;
        }
    }

    /// A sub-view taking columns `cols` in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<FeatureView<'a>> {
        let neurons = cols.iter().map(|&c| self.neurons[c]).collect();
        FeatureView::new(self.source, neurons)
    }

    /// Dense `T x F` copy.
    pub fn materialize(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.num_rows(), self.num_features()));
        for (t, mut row) in m.rows_mut().into_iter().enumerate() {
            self.fill_row(t, row.as_slice_mut().expect("standard layout"));
        }
        m
    }
}

impl RowSource for FeatureView<'_> {
    fn num_rows(&self) -> usize {
        self.source.num_tokens
    }

    fn num_features(&self) -> usize {
        self.neurons.len()
    }

    fn fill_row(&self, row: usize, out: &mut [f64]) {
        let offset = row * self.source.layer_size;
        for (o, &b) in out.iter_mut().zip(&self.bases) {
            *o = self.source.data[b + offset] as f64;
        }
    }
}
