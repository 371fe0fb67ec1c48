//! Piecewise-affine analysis of fully connected ReLU networks: activation
//! configurations, affine pieces and their atomic decompositions, exact
//! enumeration of linear regions, and Lipschitz and gradient bounds.

pub mod affine;
pub mod bounds;
pub mod error;
pub mod io;
pub mod lp;
pub mod net;
pub mod polygon;
pub mod region;
pub mod tiling;

pub use affine::{
    affine_piece, atomic_decomposition, synthesis_coefficients, AffinePiece, Atom,
    AtomicDecomposition, SynthesisCoefficients,
};
pub use bounds::{
    gradient_backward_product, gradient_stability_report, lipschitz_config_bound,
    lipschitz_global_bound, spectral_lipschitz_bound, spectral_norm, BoundKind, BoundReport,
    Ingredients,
};
pub use error::{Error, Result};
pub use io::{load_network, parse_network, save_network, to_canonical_json};
pub use net::{ActivationTrace, Configuration, Layer, NetworkSpec};
pub use polygon::{polygon_of_region_2d, Point, Polygon};
pub use region::{
    enumerate_regions, feasibility, is_feasible, region_constraints, BoundingBox, ConstraintSystem,
    EnumerationOptions, Feasibility, Halfspace, RegionNode, RegionTree, Verdict,
};
pub use tiling::{build_tiling, render_svg, Boundary, TilingDocument, TilingRegion};
