//! Parabolic metrics, regions, the generalized reflection and quadrature rules.

pub mod grid;
pub mod point;
pub mod reflection;
pub mod region;
pub mod sphere;

pub use grid::{build_grid, QuadratureGrid};
pub use point::{rho, varrho, SpaceTimePoint, METRIC_EQUIVALENCE};
pub use reflection::{generalized_reflection, reflection_row};
pub use region::Region;
pub use sphere::{sphere_rule, SphereRule};
