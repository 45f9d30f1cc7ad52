//! Cauchy–Dirichlet problem on box cylinders, manufactured solutions, the representation
//! identities and the a priori ratio.

pub mod apriori;
pub mod cdp;
pub mod linalg;
pub mod problem;
pub mod representation;

pub use apriori::{apriori_ratio, apriori_report, structure_check, AprioriReport, StructureReport};
pub use cdp::{solve_cdp, solve_cdp_with, solver_lattice, DiscreteFields, SolveResult, SolverOptions};
pub use linalg::{bicgstab, BandedLu, CsrMatrix, IterativeOutcome};
pub use problem::{
    make_manufactured, make_manufactured_in, rhs_battery, rhs_battery_sources, sine_rhs, sine_solution,
    vmo_centre, GridSpec, ProblemInstance, MANUFACTURED,
};
pub use representation::{
    apply_heat_operator, boundary_correction, boundary_representation_audit, bump_test_function,
    representation_audit, BoundaryCorrection, RepresentationRow, RepresentationTable,
};
