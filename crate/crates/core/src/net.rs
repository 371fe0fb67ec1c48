//! Feedforward ReLU networks, forward evaluation and activation patterns.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// One affine layer `y = W a + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Array2<f64>,
    bias: Array1<f64>,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        let (rows, cols) = weights.dim();
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "weight matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if bias.len() != rows {
            return Err(Error::Shape(format!(
                "bias has length {}, expected {rows}",
                bias.len()
            )));
        }
        if let Some(((i, j), v)) = weights.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "weight ({}, {}) is not finite: {v}",
                i + 1,
                j + 1
            )));
        }
        if let Some((i, v)) = bias.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "bias entry {} is not finite: {v}",
                i + 1
            )));
        }
        Ok(Layer { weights, bias })
    }

    /// Build a layer from row-major weights.
    pub fn from_rows(rows: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
            return Err(Error::Shape(format!(
                "weight row {} has {} entries, expected {n_cols}",
                i + 1,
                r.len()
            )));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let weights = Array2::from_shape_vec((n_rows, n_cols), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Layer::new(weights, Array1::from(bias))
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn apply(&self, a: &ArrayView1<f64>) -> Array1<f64> {
        self.weights.dot(a) + &self.bias
    }
}

/// An `L`-layer ReLU representation `M_L ∘ ρ ∘ ... ∘ ρ ∘ M_1`.
///
/// Layers are stored in evaluation order, so `layers()[0]` holds `W_1, b_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    layers: Vec<Layer>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::Validation(format!(
                "a network needs at least 2 layers, got {}",
                layers.len()
            )));
        }
        for (idx, pair) in layers.windows(2).enumerate() {
            if pair[1].inputs() != pair[0].outputs() {
                return Err(Error::Shape(format!(
                    "layer {} expects {} inputs but layer {} produces {}",
                    idx + 2,
                    pair[1].inputs(),
                    idx + 1,
                    pair[0].outputs()
                )));
            }
        }
        Ok(NetworkSpec { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `[N_0, N_1, ..., N_L]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect()
    }

    /// `[N_1, ..., N_{L-1}]`.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.depth() - 1]
            .iter()
            .map(Layer::outputs)
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.depth() - 1].outputs()
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has length {}, expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "input entry {} is not finite: {v}",
                i + 1
            )));
        }
        Ok(())
    }

    /// Evaluate the network and record every hidden pre-activation.
    pub fn forward_pass(&self, x: &[f64]) -> Result<ActivationTrace> {
        self.check_input(x)?;
        let last = self.depth() - 1;
        let mut pre_activations = Vec::with_capacity(last);
        let mut a = Array1::from(x.to_vec());
        for layer in &self.layers[..last] {
            let y = layer.apply(&a.view());
            a = y.mapv(relu);
            pre_activations.push(y);
        }
        let output = self.layers[last].apply(&a.view());
        Ok(ActivationTrace {
            pre_activations,
            output,
        })
    }

    /// Activation pattern of `x`: bit `i` of block `k` is set iff `y_{k,i} > 0`.
    pub fn config_of(&self, x: &[f64]) -> Result<Configuration> {
        Ok(self.forward_pass(x)?.configuration())
    }

    /// Shorthand for `forward_pass(x)?.output`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Array1<f64>> {
        Ok(self.forward_pass(x)?.output)
    }
}

fn relu(t: f64) -> f64 {
    if t > 0.0 {
        t
    } else {
        0.0
    }
}

/// Pre-activations `y_1, ..., y_{L-1}` and the output `y_L` of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub pre_activations: Vec<Array1<f64>>,
    pub output: Array1<f64>,
}

impl ActivationTrace {
    pub fn configuration(&self) -> Configuration {
        Configuration {
            blocks: self
                .pre_activations
                .iter()
                .map(|y| y.iter().map(|&v| v > 0.0).collect())
                .collect(),
        }
    }
}

/// A diagonal configuration `θ = [θ_1, ..., θ_{L-1}]`, or a prefix of one.
///
/// Ordering is lexicographic by block with `0 < 1`, which is also the order
/// region enumeration produces leaves in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Configuration {
    blocks: Vec<Vec<bool>>,
}

impl Configuration {
    pub fn new(blocks: Vec<Vec<bool>>) -> Self {
        Configuration { blocks }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        Configuration::new(widths.iter().map(|&n| vec![false; n]).collect())
    }

    pub fn ones(widths: &[usize]) -> Self {
        Configuration::new(widths.iter().map(|&n| vec![true; n]).collect())
    }

    pub fn blocks(&self) -> &[Vec<bool>] {
        &self.blocks
    }

    /// Block `k` (0-based, so `block(0)` is `θ_1`).
    pub fn block(&self, k: usize) -> &[bool] {
        &self.blocks[k]
    }

    /// Number of blocks present.
    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    /// Active neuron indices of block `k` (0-based).
    pub fn support(&self, k: usize) -> Vec<usize> {
        self.blocks[k]
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// `|spt θ_k|` for every block.
    pub fn support_sizes(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .map(|b| b.iter().filter(|&&v| v).count())
            .collect()
    }

    pub fn prefix(&self, depth: usize) -> Configuration {
        Configuration::new(self.blocks[..depth].to_vec())
    }

    pub fn is_prefix_of(&self, other: &Configuration) -> bool {
        self.depth() <= other.depth() && self.blocks[..] == other.blocks[..self.depth()]
    }

    pub fn extended(&self, block: Vec<bool>) -> Configuration {
        let mut blocks = self.blocks.clone();
        blocks.push(block);
        Configuration::new(blocks)
    }

    /// Bitwise `self ≤ other` with matching block shapes.
    pub fn is_subset_of(&self, other: &Configuration) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(&x, &y)| !x || y))
    }

    /// Check that this is a full configuration for `net`.
    pub fn check_for(&self, net: &NetworkSpec) -> Result<()> {
        if self.depth() != net.depth() - 1 {
            return Err(Error::Shape(format!(
                "configuration has {} blocks, network has {} hidden layers",
                self.depth(),
                net.depth() - 1
            )));
        }
        self.check_prefix_for(net)
    }

    /// Check that this is a (possibly partial) prefix configuration for `net`.
    pub fn check_prefix_for(&self, net: &NetworkSpec) -> Result<()> {
        let hidden = net.hidden_widths();
        if self.depth() > hidden.len() {
            return Err(Error::Shape(format!(
                "configuration has {} blocks, network has {} hidden layers",
                self.depth(),
                hidden.len()
            )));
        }
        for (k, (block, &n)) in self.blocks.iter().zip(&hidden).enumerate() {
            if block.len() != n {
                return Err(Error::Shape(format!(
                    "block {} has {} bits, hidden layer {} has width {n}",
                    k + 1,
                    block.len(),
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Configuration {
    /// Blocks of `0`/`1` joined by `|`; the first character of a block is neuron 1.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, block) in self.blocks.iter().enumerate() {
            if k > 0 {
                f.write_str("|")?;
            }
            for &b in block {
                f.write_str(if b { "1" } else { "0" })?;
            }
        }
        Ok(())
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Configuration::default());
        }
        s.split('|')
            .enumerate()
            .map(|(k, block)| {
                if block.is_empty() {
                    return Err(Error::Parse(format!("configuration block {} is empty", k + 1)));
                }
                block
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(Error::Parse(format!(
                            "configuration block {} contains {other:?}; only '0' and '1' are allowed",
                            k + 1
                        ))),
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
            .map(Configuration::new)
    }
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}
