//! Affine pieces of a ReLU network and their rank-one atomic decomposition.
//!
//! For a configuration `θ` the network coincides on its region with
//! `x ↦ W_L D_{L-1} ⋯ D_1 W_1 x + b`, where `D_k = diag(θ_k)` and `b`
//! collects every bias pushed through the masked tail. The linear part is a
//! combination of atoms `w_{L,:i} ⊗ w_{1,j:}` whose coefficients are path
//! sums through the middle layers.

use ndarray::{Array1, Array2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::net::{Configuration, NetworkSpec};

/// Zero the rows of `m` whose bit in `mask` is clear (left multiplication by `diag(mask)`).
pub(crate) fn mask_rows(m: &mut Array2<f64>, mask: &[bool]) {
    for (mut row, &keep) in m.axis_iter_mut(Axis(0)).zip(mask) {
        if !keep {
            row.fill(0.0);
        }
    }
}

pub(crate) fn mask_entries(v: &mut Array1<f64>, mask: &[bool]) {
    for (x, &keep) in v.iter_mut().zip(mask) {
        if !keep {
            *x = 0.0;
        }
    }
}

/// Affine maps `x ↦ A_k x + c_k` giving the pre-activation `y_k` on the region
/// of `θ`, for `k = 1, ..., count`. Only the first `count - 1` blocks of `θ` are read.
pub(crate) fn layer_maps(
    net: &NetworkSpec,
    theta: &Configuration,
    count: usize,
) -> Vec<(Array2<f64>, Array1<f64>)> {
    let mut maps = Vec::with_capacity(count);
    let first = &net.layers()[0];
    let mut linear = first.weights().clone();
    let mut bias = first.bias().clone();
    for k in 1..count {
        let mut masked_linear = linear.clone();
        let mut masked_bias = bias.clone();
        mask_rows(&mut masked_linear, theta.block(k - 1));
        mask_entries(&mut masked_bias, theta.block(k - 1));
        maps.push((linear, bias));
        let layer = &net.layers()[k];
        linear = layer.weights().dot(&masked_linear);
        bias = layer.weights().dot(&masked_bias) + layer.bias();
    }
    maps.push((linear, bias));
    maps
}

/// The affine map a network applies on the region of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinePiece {
    #[serde(serialize_with = "crate::io::serialize_matrix")]
    pub linear: Array2<f64>,
    #[serde(serialize_with = "crate::io::serialize_vector")]
    pub bias: Array1<f64>,
    #[serde(skip)]
    pub source: Configuration,
}

impl AffinePiece {
    pub fn evaluate(&self, x: &[f64]) -> Result<Array1<f64>> {
        if x.len() != self.linear.ncols() {
            return Err(Error::Shape(format!(
                "input has length {}, affine piece expects {}",
                x.len(),
                self.linear.ncols()
            )));
        }
        Ok(self.linear.dot(&Array1::from(x.to_vec())) + &self.bias)
    }
}

/// Assemble `M_L^θ` by pushing `W_1, b_1` through the masked layers.
pub fn affine_piece(net: &NetworkSpec, theta: &Configuration) -> Result<AffinePiece> {
    theta.check_for(net)?;
    let (linear, bias) = layer_maps(net, theta, net.depth())
        .pop()
        .expect("at least one layer map");
    Ok(AffinePiece {
        linear,
        bias,
        source: theta.clone(),
    })
}

/// One weighted rank-one term `c · w_{L,:out} ⊗ w_{1,in:}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    /// Index `i_{L-1}` into the last hidden layer (0-based).
    pub out_index: usize,
    /// Index `i_1` into the first hidden layer (0-based).
    pub in_index: usize,
    pub coefficient: f64,
}

impl Atom {
    /// Atoms with an exactly vanishing path sum are kept but can be skipped in reports.
    pub fn is_zero(&self) -> bool {
        self.coefficient == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicDecomposition {
    atoms: Vec<Atom>,
    source: Configuration,
    path_count_per_atom: usize,
    last_weights: Array2<f64>,
    first_weights: Array2<f64>,
}

impl AtomicDecomposition {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn source(&self) -> &Configuration {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn nonzero_count(&self) -> usize {
        self.atoms.iter().filter(|a| !a.is_zero()).count()
    }

    /// Monomials summed into each coefficient: `∏_{j=2}^{L-2} |spt θ_j|`.
    pub fn path_count_per_atom(&self) -> usize {
        self.path_count_per_atom
    }

    /// The unweighted rank-one matrix of `atom`.
    pub fn atom_matrix(&self, atom: &Atom) -> Array2<f64> {
        let col = self.last_weights.column(atom.out_index);
        let row = self.first_weights.row(atom.in_index);
        let mut m = Array2::zeros((col.len(), row.len()));
        for (i, &c) in col.iter().enumerate() {
            for (j, &r) in row.iter().enumerate() {
                m[[i, j]] = c * r;
            }
        }
        m
    }

    /// `Σ c · atom`, which reproduces the linear part of the affine piece.
    pub fn linear_sum(&self) -> Array2<f64> {
        let mut sum = Array2::zeros((self.last_weights.nrows(), self.first_weights.ncols()));
        for atom in &self.atoms {
            sum.scaled_add(atom.coefficient, &self.atom_matrix(atom));
        }
        sum
    }
}

/// Coefficient matrix `P` with `P[i_{L-1}, i_1] = c_{i_{L-1}, i_1}`, accumulated
/// layer by layer as `W_{L-1} D_{L-2} ⋯ D_2 W_2` (identity when `L = 2`).
fn path_coefficients(net: &NetworkSpec, theta: &Configuration) -> Array2<f64> {
    let l = net.depth();
    if l == 2 {
        return Array2::eye(net.hidden_widths()[0]);
    }
    let mut acc = net.layers()[1].weights().clone();
    for k in 2..l - 1 {
        mask_rows(&mut acc, theta.block(k - 1));
        acc = net.layers()[k].weights().dot(&acc);
    }
    acc
}

/// Decompose the linear part of `M_L^θ` into atoms indexed by
/// `spt θ_{L-1} × spt θ_1` (the diagonal of `spt θ_1` when `L = 2`).
pub fn atomic_decomposition(
    net: &NetworkSpec,
    theta: &Configuration,
) -> Result<AtomicDecomposition> {
    theta.check_for(net)?;
    let l = net.depth();
    let first_support = theta.support(0);
    let last_support = theta.support(l - 2);
    let atoms = if l == 2 {
        first_support
            .iter()
            .map(|&i| Atom {
                out_index: i,
                in_index: i,
                coefficient: 1.0,
            })
            .collect()
    } else {
        let coeffs = path_coefficients(net, theta);
        last_support
            .iter()
            .flat_map(|&o| {
                let coeffs = &coeffs;
                first_support.iter().map(move |&i| Atom {
                    out_index: o,
                    in_index: i,
                    coefficient: coeffs[[o, i]],
                })
            })
            .collect()
    };
    let sizes = theta.support_sizes();
    let path_count_per_atom = if l <= 3 {
        1
    } else {
        sizes[1..l - 2].iter().product()
    };
    Ok(AtomicDecomposition {
        atoms,
        source: theta.clone(),
        path_count_per_atom,
        last_weights: net.layers()[l - 1].weights().clone(),
        first_weights: net.layers()[0].weights().clone(),
    })
}

/// Synthesis coefficients `α_{L,i}(x)` for `i ∈ spt θ_{L-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisCoefficients {
    /// `(i_{L-1}, α)` pairs in ascending index order.
    pub entries: Vec<(usize, f64)>,
}

impl SynthesisCoefficients {
    /// `Σ α_i w_{L,:i} + bias`.
    pub fn synthesize(&self, net: &NetworkSpec, bias: &Array1<f64>) -> Array1<f64> {
        let last = net.layers()[net.depth() - 1].weights();
        let mut out = bias.clone();
        for &(i, alpha) in &self.entries {
            out.scaled_add(alpha, &last.column(i));
        }
        out
    }
}

/// `α_{L,i}(x) = w_{L-1,i:} D_{L-2} W_{L-2} ⋯ D_1 W_1 x` (bias-free), so that
/// the network output on the region equals `Σ α_i w_{L,:i} + b`.
pub fn synthesis_coefficients(
    net: &NetworkSpec,
    theta: &Configuration,
    x: &[f64],
) -> Result<SynthesisCoefficients> {
    theta.check_for(net)?;
    if x.len() != net.input_dim() {
        return Err(Error::Shape(format!(
            "input has length {}, expected {}",
            x.len(),
            net.input_dim()
        )));
    }
    let l = net.depth();
    let mut z = net.layers()[0].weights().dot(&Array1::from(x.to_vec()));
    for k in 1..l - 1 {
        mask_entries(&mut z, theta.block(k - 1));
        z = net.layers()[k].weights().dot(&z);
    }
    Ok(SynthesisCoefficients {
        entries: theta
            .support(l - 2)
            .into_iter()
            .map(|i| (i, z[i]))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Layer;
    use ndarray::array;

    fn two_layer() -> NetworkSpec {
        NetworkSpec::new(vec![
            Layer::new(array![[1.0, 2.0], [-1.0, 0.5]], array![0.5, -0.25]).unwrap(),
            Layer::new(
                array![[3.0, -1.0], [0.0, 2.0], [1.0, 1.0]],
                array![1.0, 0.0, -1.0],
            )
            .unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn full_support_two_layer_piece_is_plain_product() {
        let net = two_layer();
        let piece = affine_piece(&net, &Configuration::ones(&[2])).unwrap();
        let w1 = net.layers()[0].weights();
        let w2 = net.layers()[1].weights();
        assert_eq!(piece.linear, w2.dot(w1));
        assert_eq!(
            piece.bias,
            w2.dot(net.layers()[0].bias()) + net.layers()[1].bias()
        );
    }

    #[test]
    fn zero_configuration_leaves_last_bias() {
        let net = two_layer();
        let piece = affine_piece(&net, &Configuration::zeros(&[2])).unwrap();
        assert_eq!(piece.linear, Array2::<f64>::zeros((3, 2)));
        assert_eq!(piece.bias, *net.layers()[1].bias());
        assert_eq!(piece.evaluate(&[7.0, -3.0]).unwrap(), piece.bias);
        assert!(atomic_decomposition(&net, &Configuration::zeros(&[2]))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn evaluate_identity_and_shape_error() {
        let piece = AffinePiece {
            linear: Array2::eye(2),
            bias: Array1::zeros(2),
            source: Configuration::default(),
        };
        assert_eq!(piece.evaluate(&[3.0, 4.0]).unwrap(), array![3.0, 4.0]);
        assert!(matches!(piece.evaluate(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn two_layer_single_atom() {
        let net = two_layer();
        let theta: Configuration = "10".parse().unwrap();
        let dec = atomic_decomposition(&net, &theta).unwrap();
        assert_eq!(
            dec.atoms(),
            &[Atom {
                out_index: 0,
                in_index: 0,
                coefficient: 1.0
            }]
        );
        // u_1 ⊗ r_1
        let expected = array![[3.0, 6.0], [0.0, 0.0], [1.0, 2.0]];
        assert_eq!(dec.atom_matrix(&dec.atoms()[0]), expected);
        assert_eq!(dec.linear_sum(), affine_piece(&net, &theta).unwrap().linear);
    }

    #[test]
    fn three_layer_coefficients_are_middle_weights() {
        let net = NetworkSpec::new(vec![
            Layer::new(
                array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
                array![0.0, 0.0, 0.0],
            )
            .unwrap(),
            Layer::new(
                array![[0.5, -2.0, 1.5], [4.0, 0.25, -1.0]],
                array![0.0, 0.0],
            )
            .unwrap(),
            Layer::new(array![[1.0, 2.0]], array![0.0]).unwrap(),
        ])
        .unwrap();
        let theta: Configuration = "101|11".parse().unwrap();
        let dec = atomic_decomposition(&net, &theta).unwrap();
        assert_eq!(dec.len(), 4);
        for atom in dec.atoms() {
            assert_eq!(
                atom.coefficient,
                net.layers()[1].weights()[[atom.out_index, atom.in_index]]
            );
        }
        assert_eq!(dec.path_count_per_atom(), 1);
    }

    #[test]
    fn synthesis_two_layer_is_row_dot_input() {
        let net = two_layer();
        let theta: Configuration = "11".parse().unwrap();
        let alpha = synthesis_coefficients(&net, &theta, &[1.0, 1.0]).unwrap();
        assert_eq!(alpha.entries, vec![(0, 3.0), (1, -0.5)]);
        let zero = synthesis_coefficients(&net, &theta, &[0.0, 0.0]).unwrap();
        assert!(zero.entries.iter().all(|&(_, a)| a == 0.0));
    }

    #[test]
    fn block_mismatch_is_shape_error() {
        let net = two_layer();
        let bad: Configuration = "101".parse().unwrap();
        assert!(matches!(affine_piece(&net, &bad), Err(Error::Shape(_))));
        assert!(matches!(
            atomic_decomposition(&net, &bad),
            Err(Error::Shape(_))
        ));
    }
}
