pub mod analysis;
pub mod convex;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod par;
pub mod protocols;
pub mod scenario;
pub mod tolerance;

pub use convex::{ConvexSet, ProjectionResult};
pub use error::{Error, Result};
pub use tolerance::Tolerances;
