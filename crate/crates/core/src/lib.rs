//! Lower bounds for Gromov–Wasserstein and fused Gromov–Wasserstein
//! distances between finite metric measure spaces, with sliced
//! approximations built on quantile embeddings.
//!
//! With the default `parallel` feature, row, pair and projection loops run on
//! rayon; without it everything is sequential. Reductions use a fixed tree
//! order either way, so results do not depend on the thread count.

pub mod barycenter;
pub mod bounds;
pub mod error;
pub mod graphs;
pub mod ot;
pub mod par;
pub mod quantile;
pub mod rng;
pub mod shapes;
pub mod sliced;
pub mod spaces;

pub use bounds::{Bound, BoundConfig, DistanceResult, QuadratureSpec};
pub use error::{Error, Result};
pub use ot::{OuterSolver, SinkhornParams, TransportPlan};
pub use spaces::{MmSpace, PointCloud, StructuredSpace};
