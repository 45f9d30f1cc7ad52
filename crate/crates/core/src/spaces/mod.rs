//! Function spaces over parabolic regions: fields, lattices and sampled norms.

pub mod field;
pub mod lattice;
pub mod norms;
pub mod sampler;

pub use field::{DerivativeBundle, ScalarField};
pub use lattice::{Centering, GridField, Lattice, PowerIntegrator};
pub use norms::{
    bmo_norm, lp_norm, mean_growth_constant, mean_integral, mean_oscillation, morrey_norm,
    power_integral, sobolev_morrey_norm, vmo_modulus, weak_l1_norm, weak_morrey_norm, Ball,
    MorreyDomain, NormReport, Quadrature, SobolevMorreyReport, Witness,
};
pub use sampler::{dyadic_radii, SupSampler};
