//! Calderón–Zygmund kernels built from the Gaussian fundamental solution, principal-value
//! integrals, commutators, reflected operators and empirical operator norms.

pub mod audit;
pub mod battery;
pub mod empirical;
pub mod kernel;
pub mod lattice_op;
pub mod reflected;
pub mod singular;

pub use empirical::{
    empirical_norm, relative_drift, spearman, vmo_smallness_experiment, FunctionRatio, NormKind, NormSpec,
    OperatorNormReport, OperatorSpec, RefinementLevel, VmoRow, VmoSettings, VmoTable,
};
pub use battery::{battery_labels, standard_battery};
pub use audit::{boundary_constants, czk_audit, dilation_samples, KernelAudit};
pub use lattice_op::{LatticeMode, LatticeOperator, LatticeOptions};
pub use reflected::{
    comparability_audit, reflected_apply, reflected_commutator, reflected_majorant, Comparability, ReflectedOperator,
};
pub use kernel::{gaussian_jet, Component, FrozenGaussian, FrozenKernel, Kernel, KernelJet};
pub use singular::{
    commutator_apply, cutoff, dominating_potential, majorant_kernel, singular_apply, weighted_potential, PvConfig,
    PvIntegrator, PvValue,
};
