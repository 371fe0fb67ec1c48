//! Lipschitz and gradient-stability estimates for ReLU networks.
//!
//! The weight-magnitude bounds assume that the columns of `W_L` and the rows
//! of `W_1` have unit norm. That precondition is checked, not enforced: when it
//! fails the reported value is multiplied by the largest column norm of `W_L`
//! and the largest row norm of `W_1`, and `normalization_ok` is cleared.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::net::{Configuration, NetworkSpec};

const NORMALIZATION_TOL: f64 = 1e-8;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    /// `C^{L-2} ∏_k |spt θ_k|` on one region.
    WeightMagnitude,
    /// `(C N)^{L-2} N` over the whole input space.
    Global,
    /// `σ^L` with `σ` the largest spectral norm among the weight matrices.
    Spectral,
    /// `(N C)^{L-k} ‖∇_{y_L} L‖` for the loss gradient at hidden layer `k`.
    GradientLayer,
    /// `β (N C)^{2L}`, the smoothness estimate of the input gradient.
    GradientInput,
}

/// Named scalars a bound is computed from.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Ingredients {
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supports: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    /// Rescaling applied for unnormalized outer layers (1 when normalized).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_grad_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<Configuration>,
    pub kind: BoundKind,
    pub value: f64,
    pub ingredients: Ingredients,
    /// Whether the normalization hypothesis holds; always true for kinds that do not need it.
    pub normalization_ok: bool,
    /// The measured quantity the bound is meant to dominate, when one is computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<f64>,
    /// Same estimate with the actual spectral norms in place of `N C`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_product: Option<f64>,
}

impl BoundReport {
    /// Recompute `value` from `ingredients` alone.
    pub fn recompute(&self) -> Option<f64> {
        let ing = &self.ingredients;
        let l = ing.layers as i32;
        Some(match self.kind {
            BoundKind::WeightMagnitude => {
                let prod: f64 = ing.supports.as_ref()?.iter().map(|&s| s as f64).product();
                ing.scale? * ing.c?.powi(l - 2) * prod
            }
            BoundKind::Global => {
                let n = ing.n? as f64;
                ing.scale? * (ing.c? * n).powi(l - 2) * n
            }
            BoundKind::Spectral => ing.sigma?.powi(l),
            BoundKind::GradientLayer => {
                let k = ing.layer? as i32;
                (ing.n? as f64 * ing.c?).powi(l - k) * ing.loss_grad_norm?
            }
            BoundKind::GradientInput => ing.beta? * (ing.n? as f64 * ing.c?).powi(2 * l),
        })
    }

    /// `observed ≤ value`, or `None` when nothing was observed.
    pub fn holds(&self) -> Option<bool> {
        self.observed.map(|o| o <= self.value)
    }
}

fn max_abs(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `C`: the largest absolute weight in `W_2, ..., W_{L-1}`.
pub fn middle_weight_bound(net: &NetworkSpec) -> f64 {
    let l = net.depth();
    net.layers()[1..l - 1]
        .iter()
        .map(|layer| max_abs(layer.weights()))
        .fold(0.0, f64::max)
}

/// Checks unit rows of `W_1` and unit columns of `W_L`; returns the flag and
/// the rescaling factor to apply to weight-magnitude bounds.
pub fn normalization(net: &NetworkSpec) -> (bool, f64) {
    let first = net.layers()[0].weights();
    let last = net.layers()[net.depth() - 1].weights();
    let row_norms: Vec<f64> = first.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let col_norms: Vec<f64> = last
        .columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt())
        .collect();
    let ok = row_norms
        .iter()
        .chain(&col_norms)
        .all(|n| (n - 1.0).abs() <= NORMALIZATION_TOL);
    if ok {
        (true, 1.0)
    } else {
        let max_row = row_norms.iter().copied().fold(0.0, f64::max);
        let max_col = col_norms.iter().copied().fold(0.0, f64::max);
        (false, max_row * max_col)
    }
}

fn require_deep(net: &NetworkSpec) -> Result<()> {
    if net.depth() <= 3 {
        return Err(Error::Unsupported(format!(
            "weight-magnitude Lipschitz bounds need more than 3 layers, network has {}",
            net.depth()
        )));
    }
    Ok(())
}

/// Per-region bound `C^{L-2} ∏_{k=1}^{L-1} |spt θ_k|`.
pub fn lipschitz_config_bound(net: &NetworkSpec, theta: &Configuration) -> Result<BoundReport> {
    require_deep(net)?;
    theta.check_for(net)?;
    let (normalization_ok, scale) = normalization(net);
    let c = middle_weight_bound(net);
    let supports = theta.support_sizes();
    let l = net.depth();
    let prod: f64 = supports.iter().map(|&s| s as f64).product();
    Ok(BoundReport {
        config: Some(theta.clone()),
        kind: BoundKind::WeightMagnitude,
        value: scale * c.powi(l as i32 - 2) * prod,
        ingredients: Ingredients {
            layers: l,
            c: Some(c),
            supports: Some(supports),
            scale: Some(scale),
            ..Default::default()
        },
        normalization_ok,
        observed: None,
        spectral_product: None,
    })
}

/// Global bound `(C N)^{L-2} N` with `N` the widest hidden layer.
pub fn lipschitz_global_bound(net: &NetworkSpec) -> Result<BoundReport> {
    require_deep(net)?;
    let (normalization_ok, scale) = normalization(net);
    let c = middle_weight_bound(net);
    let n = net.hidden_widths().into_iter().max().unwrap_or(0);
    let l = net.depth();
    Ok(BoundReport {
        config: None,
        kind: BoundKind::Global,
        value: scale * (c * n as f64).powi(l as i32 - 2) * n as f64,
        ingredients: Ingredients {
            layers: l,
            c: Some(c),
            n: Some(n),
            scale: Some(scale),
            ..Default::default()
        },
        normalization_ok,
        observed: None,
        spectral_product: None,
    })
}

/// Power iteration on `WᵀW` (`WWᵀ` when `W` is wide) for the largest
/// singular value.
///
/// Starts from the all-ones vector. If that start collapses into the null
/// space, fails to converge, or settles below the largest diagonal entry
/// (so it cannot be the top eigenvalue), the iteration restarts from the
/// basis vector of the heaviest column.
pub fn spectral_norm(w: &Array2<f64>) -> f64 {
    let gram = if w.nrows() >= w.ncols() {
        w.t().dot(w)
    } else {
        w.dot(&w.t())
    };
    let n = gram.nrows();
    let diag_max = (0..n).map(|i| gram[[i, i]]).fold(0.0, f64::max);
    if diag_max == 0.0 {
        return 0.0;
    }
    let ones = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let start_ok = |mu: f64| mu >= diag_max * (1.0 - 1e-12);
    match rayleigh_iteration(&gram, ones) {
        Some(mu) if start_ok(mu) => mu.sqrt(),
        first => {
            let heaviest = (0..n)
                .max_by(|&a, &b| gram[[a, a]].total_cmp(&gram[[b, b]]))
                .unwrap_or(0);
            let mut e = Array1::zeros(n);
            e[heaviest] = 1.0;
            let second = rayleigh_iteration(&gram, e);
            first
                .into_iter()
                .chain(second)
                .fold(diag_max, f64::max)
                .sqrt()
        }
    }
}

/// Iterate `v ← B v / ‖B v‖` until the Rayleigh residual is below the
/// tolerance. `None` on collapse or non-convergence.
fn rayleigh_iteration(gram: &Array2<f64>, mut v: Array1<f64>) -> Option<f64> {
    for _ in 0..POWER_MAX_ITERS {
        let u = gram.dot(&v);
        let mu = v.dot(&u);
        let norm = u.dot(&u).sqrt();
        if norm == 0.0 || mu <= 0.0 {
            return None;
        }
        let residual = &u - &(&v * mu);
        if residual.dot(&residual).sqrt() <= POWER_TOL * mu {
            return Some(mu);
        }
        v = u / norm;
    }
    None
}

/// `σ^L` with `σ = max_ℓ ‖W_ℓ‖₂`.
pub fn spectral_lipschitz_bound(net: &NetworkSpec) -> BoundReport {
    let norms: Vec<f64> = net
        .layers()
        .iter()
        .map(|l| spectral_norm(l.weights()))
        .collect();
    let sigma = norms.iter().copied().fold(0.0, f64::max);
    let l = net.depth();
    BoundReport {
        config: None,
        kind: BoundKind::Spectral,
        value: sigma.powi(l as i32),
        ingredients: Ingredients {
            layers: l,
            sigma: Some(sigma),
            ..Default::default()
        },
        normalization_ok: true,
        observed: None,
        spectral_product: Some(norms.iter().product()),
    }
}

/// Back-propagate `loss_grad` (the gradient with respect to the output `y_L`)
/// to the pre-activation `y_k`, `1 ≤ k ≤ L-1`:
/// `Σ_k W_{k+1}ᵀ Σ_{k+1} ⋯ W_Lᵀ loss_grad`, where `Σ_l` keeps the entries
/// with `y_{l,i} ≥ 0`. A zero pre-activation passes the gradient, unlike the
/// forward activation pattern where it counts as inactive.
pub fn gradient_backward_product(
    net: &NetworkSpec,
    x: &[f64],
    k: usize,
    loss_grad: &[f64],
) -> Result<Array1<f64>> {
    let l = net.depth();
    if k == 0 || k >= l {
        return Err(Error::Validation(format!(
            "layer index must lie in 1..={}, got {k}",
            l - 1
        )));
    }
    if loss_grad.len() != net.output_dim() {
        return Err(Error::Shape(format!(
            "loss gradient has length {}, output has {}",
            loss_grad.len(),
            net.output_dim()
        )));
    }
    let trace = net.forward_pass(x)?;
    let mut g = Array1::from(loss_grad.to_vec());
    for layer in (k..l).rev() {
        g = net.layers()[layer].weights().t().dot(&g);
        for (gi, &y) in g.iter_mut().zip(&trace.pre_activations[layer - 1]) {
            if y < 0.0 {
                *gi = 0.0;
            }
        }
    }
    Ok(g)
}

/// Layerwise gradient-magnitude bounds and the input-gradient smoothness
/// estimate at `x`.
///
/// `C` and `N` here range over all weight matrices and all widths `N_0..N_L`,
/// so that `‖W_j‖₂ ≤ √(N_j N_{j-1}) max|W_j| ≤ N C` holds for every factor
/// of the backward product.
pub fn gradient_stability_report(
    net: &NetworkSpec,
    x: &[f64],
    loss_grad: &[f64],
    beta: f64,
) -> Result<Vec<BoundReport>> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Validation(format!(
            "smoothness constant must be finite and non-negative, got {beta}"
        )));
    }
    let l = net.depth();
    let config = net.config_of(x)?;
    let c = net
        .layers()
        .iter()
        .map(|layer| max_abs(layer.weights()))
        .fold(0.0, f64::max);
    let n = net.widths().into_iter().max().unwrap_or(0);
    let nc = n as f64 * c;
    let spectral: Vec<f64> = net
        .layers()
        .iter()
        .map(|w| spectral_norm(w.weights()))
        .collect();
    let grad_norm = loss_grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut reports = Vec::with_capacity(l);
    for k in 1..l {
        let g = gradient_backward_product(net, x, k, loss_grad)?;
        reports.push(BoundReport {
            config: Some(config.clone()),
            kind: BoundKind::GradientLayer,
            value: nc.powi((l - k) as i32) * grad_norm,
            ingredients: Ingredients {
                layers: l,
                c: Some(c),
                n: Some(n),
                layer: Some(k),
                loss_grad_norm: Some(grad_norm),
                ..Default::default()
            },
            normalization_ok: true,
            observed: Some(g.dot(&g).sqrt()),
            spectral_product: Some(spectral[k..].iter().product::<f64>() * grad_norm),
        });
    }
    let all: f64 = spectral.iter().product();
    reports.push(BoundReport {
        config: Some(config),
        kind: BoundKind::GradientInput,
        value: beta * nc.powi(2 * l as i32),
        ingredients: Ingredients {
            layers: l,
            c: Some(c),
            n: Some(n),
            beta: Some(beta),
            ..Default::default()
        },
        normalization_ok: true,
        observed: None,
        spectral_product: Some(beta * all * all),
    });
    Ok(reports)
}
