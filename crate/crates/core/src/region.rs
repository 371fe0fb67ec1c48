//! Polytope regions of a ReLU network and their exact enumeration.
//!
//! The region of a (prefix) configuration is cut out by one halfspace per
//! covered hidden neuron. Regions are enumerated inside a bounding box by
//! refining layer after layer, splitting one neuron at a time and keeping
//! only sign choices whose region still has interior, as certified by a
//! max-slack linear program.

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::Array1;
use rayon::prelude::*;
use serde::Serialize;

use crate::affine::layer_maps;
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome};
use crate::net::{Configuration, NetworkSpec};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_BUDGET: usize = 1_000_000;

/// `normal·x + offset > 0` when `strict`, `normal·x + offset ≤ 0` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub strict: bool,
    /// Hidden layer (1-based) of the neuron this constraint comes from.
    pub layer: usize,
    /// Neuron index within that layer (0-based).
    pub neuron: usize,
}

impl Halfspace {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.offset
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let v = self.value(x);
        if self.strict {
            v > 0.0
        } else {
            v <= 0.0
        }
    }

    /// For a zero normal, whether the constant constraint holds; `None` otherwise.
    pub fn constant_verdict(&self) -> Option<bool> {
        self.normal
            .iter()
            .all(|&v| v == 0.0)
            .then_some(if self.strict {
                self.offset > 0.0
            } else {
                self.offset <= 0.0
            })
    }
}

/// An axis-aligned box `lo ≤ x ≤ hi` with `lo < hi` in every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Shape(format!(
                "box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::Validation(format!(
                    "box axis {} is unbounded: [{a}, {b}]",
                    i + 1
                )));
            }
            if a >= b {
                return Err(Error::Validation(format!(
                    "box axis {} is degenerate: [{a}, {b}]",
                    i + 1
                )));
            }
        }
        Ok(BoundingBox { lo, hi })
    }

    /// `[-radius, radius]^dim`.
    pub fn symmetric(dim: usize, radius: f64) -> Result<Self> {
        BoundingBox::new(vec![-radius; dim], vec![radius; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSystem {
    pub halfspaces: Vec<Halfspace>,
    pub domain: BoundingBox,
    pub source: Configuration,
}

impl ConstraintSystem {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.domain.contains(x) && self.halfspaces.iter().all(|h| h.contains(x))
    }
}

fn halfspaces_for_layer<'a>(
    linear: &'a ndarray::Array2<f64>,
    bias: &'a Array1<f64>,
    block: &'a [bool],
    layer: usize,
) -> impl Iterator<Item = Halfspace> + 'a {
    block.iter().enumerate().map(move |(i, &bit)| Halfspace {
        normal: linear.row(i).to_vec(),
        offset: bias[i],
        strict: bit,
        layer,
        neuron: i,
    })
}

/// Halfspace description of the region of a configuration prefix: for every
/// covered neuron, its pre-activation as an affine form of the input, required
/// `> 0` where the bit is set and `≤ 0` where it is clear.
pub fn region_constraints(
    net: &NetworkSpec,
    theta: &Configuration,
    domain: &BoundingBox,
) -> Result<ConstraintSystem> {
    theta.check_prefix_for(net)?;
    if domain.dim() != net.input_dim() {
        return Err(Error::Shape(format!(
            "box has dimension {}, network input has {}",
            domain.dim(),
            net.input_dim()
        )));
    }
    let mut halfspaces = Vec::new();
    if theta.depth() > 0 {
        for (k, (linear, bias)) in layer_maps(net, theta, theta.depth()).iter().enumerate() {
            halfspaces.extend(halfspaces_for_layer(linear, bias, theta.block(k), k + 1));
        }
    }
    Ok(ConstraintSystem {
        halfspaces,
        domain: domain.clone(),
        source: theta.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    FeasibleInterior,
    Empty,
    BoundaryOnly,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::FeasibleInterior => "FeasibleInterior",
            Verdict::Empty => "Empty",
            Verdict::BoundaryOnly => "BoundaryOnly",
        })
    }
}

/// Outcome of the max-slack program.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub verdict: Verdict,
    /// Radius `t*` of the largest ball inside region ∩ box (capped at 1); zero
    /// unless the verdict is `FeasibleInterior`.
    pub slack: f64,
    /// The ball's centre, or a point of the region for `BoundaryOnly`.
    pub witness: Option<Vec<f64>>,
}

/// Max-slack program over `x ∈ box`, `t ∈ [0, 1]`: every strict constraint
/// must hold with Euclidean margin `t`. With `full_margin` the non-strict
/// constraints and the box faces need margin `t` as well, which makes the
/// optimum the inscribed radius of region ∩ box.
fn slack_program(cs: &ConstraintSystem, full_margin: bool) -> Result<LpOutcome> {
    let d = cs.domain.dim();
    let lo = &cs.domain.lo;
    let margin = if full_margin { 1.0 } else { 0.0 };
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    for i in 0..d {
        let width = cs.domain.hi[i] - lo[i];
        let mut upper = vec![0.0; d + 1];
        upper[i] = 1.0;
        upper[d] = margin;
        lp.less_equal(upper, width);
        if full_margin {
            let mut lower = vec![0.0; d + 1];
            lower[i] = -1.0;
            lower[d] = 1.0;
            lp.less_equal(lower, 0.0);
        }
    }
    let mut cap = vec![0.0; d + 1];
    cap[d] = 1.0;
    lp.less_equal(cap, 1.0);
    for h in cs
        .halfspaces
        .iter()
        .filter(|h| h.constant_verdict().is_none())
    {
        let norm = h.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        // shift to u = x - lo
        let shifted = h.offset + h.normal.iter().zip(lo).map(|(a, b)| a * b).sum::<f64>();
        let sign = if h.strict { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = h.normal.iter().map(|v| sign * v / norm).collect();
        row.push(if h.strict { 1.0 } else { margin });
        lp.less_equal(row, -sign * shifted / norm);
    }
    lp.solve()
}

/// Decide whether a region meets the interior of its box.
///
/// `FeasibleInterior` when region ∩ box contains a ball of radius above `tol`.
/// Otherwise the region is `BoundaryOnly` if its strict constraints can still
/// be met with margin above `tol` somewhere in the closed box, and `Empty` if
/// not. Constant (zero-normal) constraints are decided directly.
pub fn feasibility(cs: &ConstraintSystem, tol: f64) -> Result<Feasibility> {
    let empty = Feasibility {
        verdict: Verdict::Empty,
        slack: 0.0,
        witness: None,
    };
    let d = cs.domain.dim();
    if cs.halfspaces.iter().any(|h| h.normal.len() != d) {
        return Err(Error::Shape(
            "halfspace normal does not match box dimension".into(),
        ));
    }
    if cs
        .halfspaces
        .iter()
        .any(|h| h.constant_verdict() == Some(false))
    {
        return Ok(empty);
    }
    let to_x = |point: &[f64]| -> Vec<f64> {
        point[..d]
            .iter()
            .zip(&cs.domain.lo)
            .map(|(u, l)| u + l)
            .collect()
    };
    match slack_program(cs, true)? {
        LpOutcome::Optimal { value, point } if value > tol => {
            return Ok(Feasibility {
                verdict: Verdict::FeasibleInterior,
                slack: value,
                witness: Some(to_x(&point)),
            })
        }
        LpOutcome::Unbounded => return Err(Error::Lp("slack program reported unbounded".into())),
        _ => {}
    }
    match slack_program(cs, false)? {
        LpOutcome::Optimal { value, point } if value > tol => Ok(Feasibility {
            verdict: Verdict::BoundaryOnly,
            slack: 0.0,
            witness: Some(to_x(&point)),
        }),
        LpOutcome::Unbounded => Err(Error::Lp("slack program reported unbounded".into())),
        _ => Ok(empty),
    }
}

pub fn is_feasible(cs: &ConstraintSystem, tol: f64) -> Result<Verdict> {
    Ok(feasibility(cs, tol)?.verdict)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationOptions {
    pub tol: f64,
    /// Maximum number of candidate nodes examined before giving up.
    pub budget: usize,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            tol: DEFAULT_TOLERANCE,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionNode {
    pub prefix: Configuration,
    pub constraints: ConstraintSystem,
    pub feasibility: Feasibility,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl RegionNode {
    pub fn verdict(&self) -> Verdict {
        self.feasibility.verdict
    }

    pub fn depth(&self) -> usize {
        self.prefix.depth()
    }
}

/// Layered refinement of a bounding box by a network's configurations.
///
/// Node 0 is the root (empty prefix, the whole box). Children of a node are
/// the sign extensions of its prefix by one full hidden layer whose region
/// still has interior; extensions that only touch the parent on a boundary are
/// kept as childless `BoundaryOnly` nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionTree {
    nodes: Vec<RegionNode>,
    hidden_layers: usize,
    candidates_examined: usize,
}

impl RegionTree {
    pub fn nodes(&self) -> &[RegionNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &RegionNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> &RegionNode {
        &self.nodes[0]
    }

    pub fn candidates_examined(&self) -> usize {
        self.candidates_examined
    }

    /// Full-depth configurations whose region meets the box interior.
    pub fn leaves(&self) -> Vec<&RegionNode> {
        self.full_depth()
            .filter(|n| n.verdict() == Verdict::FeasibleInterior)
            .collect()
    }

    /// Every full-depth node, including `BoundaryOnly` ones.
    pub fn full_depth(&self) -> impl Iterator<Item = &RegionNode> {
        let depth = self.hidden_layers;
        self.nodes.iter().filter(move |n| n.depth() == depth)
    }

    /// Configurations with interior at prefix depth `k`, i.e. `Θ_k`.
    pub fn level(&self, k: usize) -> Vec<&Configuration> {
        self.nodes
            .iter()
            .filter(|n| n.depth() == k && n.verdict() == Verdict::FeasibleInterior)
            .map(|n| &n.prefix)
            .collect()
    }
}

struct Candidate {
    block: Vec<bool>,
    extra: Vec<Halfspace>,
    feasibility: Feasibility,
}

fn expand(
    net: &NetworkSpec,
    parent: &RegionNode,
    options: &EnumerationOptions,
    examined: &AtomicUsize,
) -> Result<Vec<Candidate>> {
    let k = parent.depth() + 1;
    let maps = layer_maps(net, &parent.prefix, k);
    let (linear, bias) = maps.last().expect("layer map");
    let width = linear.nrows();
    let mut partial = vec![Candidate {
        block: Vec::with_capacity(width),
        extra: Vec::with_capacity(width),
        feasibility: parent.feasibility.clone(),
    }];
    let mut finished = Vec::new();
    for neuron in 0..width {
        let last = neuron + 1 == width;
        let mut next = Vec::with_capacity(partial.len() * 2);
        for cand in &partial {
            for bit in [false, true] {
                if examined.fetch_add(1, Ordering::Relaxed) >= options.budget {
                    return Err(Error::BudgetExceeded {
                        budget: options.budget,
                    });
                }
                let h = Halfspace {
                    normal: linear.row(neuron).to_vec(),
                    offset: bias[neuron],
                    strict: bit,
                    layer: k,
                    neuron,
                };
                let feas = match h.constant_verdict() {
                    Some(false) => continue,
                    Some(true) => cand.feasibility.clone(),
                    None => {
                        let mut halfspaces = parent.constraints.halfspaces.clone();
                        halfspaces.extend(cand.extra.iter().cloned());
                        halfspaces.push(h.clone());
                        let cs = ConstraintSystem {
                            halfspaces,
                            domain: parent.constraints.domain.clone(),
                            source: parent.prefix.clone(),
                        };
                        feasibility(&cs, options.tol)?
                    }
                };
                let keep = match feas.verdict {
                    Verdict::FeasibleInterior => true,
                    Verdict::BoundaryOnly => last,
                    Verdict::Empty => false,
                };
                if !keep {
                    continue;
                }
                let mut block = cand.block.clone();
                block.push(bit);
                let mut extra = cand.extra.clone();
                extra.push(h);
                let c = Candidate {
                    block,
                    extra,
                    feasibility: feas,
                };
                if last {
                    finished.push(c);
                } else {
                    next.push(c);
                }
            }
        }
        partial = next;
    }
    Ok(finished)
}

/// Enumerate every configuration whose region meets the interior of `domain`.
///
/// Frontier nodes of one layer are expanded in parallel; node ids and child
/// order depend only on the input (bit 0 before bit 1, ascending neurons).
pub fn enumerate_regions(
    net: &NetworkSpec,
    domain: &BoundingBox,
    options: &EnumerationOptions,
) -> Result<RegionTree> {
    let root_cs = region_constraints(net, &Configuration::default(), domain)?;
    let root_feas = feasibility(&root_cs, options.tol)?;
    let mut nodes = vec![RegionNode {
        prefix: Configuration::default(),
        constraints: root_cs,
        feasibility: root_feas,
        parent: None,
        children: Vec::new(),
    }];
    let hidden_layers = net.depth() - 1;
    let examined = AtomicUsize::new(0);
    let mut frontier = vec![0usize];
    for _layer in 0..hidden_layers {
        let expansions: Vec<Vec<Candidate>> = frontier
            .par_iter()
            .map(|&id| expand(net, &nodes[id], options, &examined))
            .collect::<Result<_>>()?;
        let mut next = Vec::new();
        for (&parent_id, children) in frontier.iter().zip(expansions) {
            for cand in children {
                let parent = &nodes[parent_id];
                let mut halfspaces = parent.constraints.halfspaces.clone();
                halfspaces.extend(cand.extra);
                let prefix = parent.prefix.extended(cand.block);
                let id = nodes.len();
                let interior = cand.feasibility.verdict == Verdict::FeasibleInterior;
                nodes.push(RegionNode {
                    constraints: ConstraintSystem {
                        halfspaces,
                        domain: domain.clone(),
                        source: prefix.clone(),
                    },
                    prefix,
                    feasibility: cand.feasibility,
                    parent: Some(parent_id),
                    children: Vec::new(),
                });
                nodes[parent_id].children.push(id);
                if interior {
                    next.push(id);
                }
            }
        }
        frontier = next;
    }
    Ok(RegionTree {
        nodes,
        hidden_layers,
        candidates_examined: examined.into_inner(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Layer;
    use ndarray::{array, Array2};

    fn halfspace(normal: Vec<f64>, offset: f64, strict: bool) -> Halfspace {
        Halfspace {
            normal,
            offset,
            strict,
            layer: 1,
            neuron: 0,
        }
    }

    fn system(halfspaces: Vec<Halfspace>) -> ConstraintSystem {
        ConstraintSystem {
            halfspaces,
            domain: BoundingBox::symmetric(2, 1.0).unwrap(),
            source: Configuration::default(),
        }
    }

    #[test]
    fn contradictory_pair_is_empty() {
        let cs = system(vec![
            halfspace(vec![1.0, 0.0], 0.0, true),
            halfspace(vec![1.0, 0.0], 0.0, false),
        ]);
        assert_eq!(is_feasible(&cs, 1e-9).unwrap(), Verdict::Empty);
        let cs = system(vec![
            halfspace(vec![1.0, 0.0], 0.0, true),
            halfspace(vec![1.0, 0.0], 0.5, false),
        ]);
        assert_eq!(is_feasible(&cs, 1e-9).unwrap(), Verdict::Empty);
    }

    #[test]
    fn positive_orthant_has_interior() {
        let cs = system(vec![
            halfspace(vec![1.0, 0.0], 0.0, true),
            halfspace(vec![0.0, 1.0], 0.0, true),
        ]);
        let f = feasibility(&cs, 1e-9).unwrap();
        assert_eq!(f.verdict, Verdict::FeasibleInterior);
        assert!((f.slack - 0.5).abs() < 1e-12);
        let w = f.witness.unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flat_region_is_boundary_only() {
        // x_1 ≤ 0 and -x_1 ≤ 0 pin the region to a line
        let cs = system(vec![
            halfspace(vec![1.0, 0.0], 0.0, false),
            halfspace(vec![-1.0, 0.0], 0.0, false),
        ]);
        assert_eq!(is_feasible(&cs, 1e-9).unwrap(), Verdict::BoundaryOnly);
    }

    #[test]
    fn constant_constraints() {
        assert_eq!(
            is_feasible(&system(vec![halfspace(vec![0.0, 0.0], 0.0, true)]), 1e-9).unwrap(),
            Verdict::Empty
        );
        assert_eq!(
            is_feasible(&system(vec![halfspace(vec![0.0, 0.0], 0.0, false)]), 1e-9).unwrap(),
            Verdict::FeasibleInterior
        );
    }

    #[test]
    fn unbounded_box_rejected() {
        assert!(matches!(
            BoundingBox::new(vec![-1.0], vec![f64::INFINITY]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            BoundingBox::new(vec![1.0], vec![1.0]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn identity_layer_gives_open_orthant() {
        let net = NetworkSpec::new(vec![
            Layer::new(Array2::eye(2), array![0.0, 0.0]).unwrap(),
            Layer::new(array![[1.0, 1.0]], array![0.0]).unwrap(),
        ])
        .unwrap();
        let domain = BoundingBox::symmetric(2, 1.0).unwrap();
        let cs = region_constraints(&net, &"11".parse().unwrap(), &domain).unwrap();
        assert_eq!(cs.halfspaces.len(), 2);
        for (i, h) in cs.halfspaces.iter().enumerate() {
            assert!(h.strict);
            assert_eq!(h.offset, 0.0);
            assert_eq!(h.normal[i], 1.0);
            assert_eq!(h.normal[1 - i], 0.0);
        }
        let tree = enumerate_regions(&net, &domain, &EnumerationOptions::default()).unwrap();
        assert_eq!(tree.leaves().len(), 4);
    }

    #[test]
    fn zero_first_layer_has_single_region() {
        let net = NetworkSpec::new(vec![
            Layer::new(Array2::zeros((3, 2)), Array1::zeros(3)).unwrap(),
            Layer::new(Array2::from_elem((2, 3), 0.7), array![0.25, -0.5]).unwrap(),
            Layer::new(array![[1.0, -1.0]], array![0.0]).unwrap(),
        ])
        .unwrap();
        let domain = BoundingBox::symmetric(2, 5.0).unwrap();
        let tree = enumerate_regions(&net, &domain, &EnumerationOptions::default()).unwrap();
        let leaves = tree.leaves();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].prefix.to_string(), "000|10");
        assert_eq!(tree.full_depth().count(), 1);
    }

    #[test]
    fn budget_is_enforced() {
        let net = NetworkSpec::new(vec![
            Layer::new(array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], Array1::zeros(3)).unwrap(),
            Layer::new(array![[1.0, 1.0, 1.0]], array![0.0]).unwrap(),
        ])
        .unwrap();
        let domain = BoundingBox::symmetric(2, 1.0).unwrap();
        let options = EnumerationOptions {
            budget: 3,
            ..Default::default()
        };
        assert_eq!(
            enumerate_regions(&net, &domain, &options),
            Err(Error::BudgetExceeded { budget: 3 })
        );
    }
}
