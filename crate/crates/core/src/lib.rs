//! Numerical laboratory for parabolic Morrey spaces, Calderón–Zygmund operators
//! with VMO coefficients, and the Cauchy–Dirichlet problem.

pub mod coefficients;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod harness;
pub mod operators;
pub mod solver;
pub mod spaces;
pub mod weights;

pub use error::{Error, Result};

/// Name of the environment variable overriding [`DEFAULT_NODE_BUDGET`].
pub const NODE_BUDGET_ENV: &str = "MORREY_NODE_BUDGET";

/// Largest number of quadrature or lattice nodes a single object may allocate.
pub const DEFAULT_NODE_BUDGET: usize = 20_000_000;

/// Current node budget: the environment override when it parses, the default otherwise.
pub fn node_budget() -> usize {
    std::env::var(NODE_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_NODE_BUDGET)
}

pub(crate) fn check_budget(requested: usize) -> Result<()> {
    let budget = node_budget();
    if requested > budget {
        Err(Error::BudgetExceeded { requested, budget })
    } else {
        Ok(())
    }
}
