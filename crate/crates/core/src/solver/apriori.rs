use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{morrey_norm, sobolev_morrey_norm, MorreyDomain, Quadrature, ScalarField, SupSampler};
use crate::weights::{check_condition_b, CheckSettings, WeightFunction};

use super::cdp::SolveResult;
use super::problem::ProblemInstance;

/// `‖u‖_{W^{2,1}_{p,φ}(Q)} / ‖f‖_{p,φ;Q}` with its parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub ratio: f64,
    pub solution_norm: f64,
    pub rhs_norm: f64,
    pub terms: Vec<(String, f64)>,
    /// Condition B verdict for `φ` at the sampled centres and radii.
    pub condition_b: bool,
    pub warnings: Vec<String>,
}

/// The Morrey norms over `Q` (cylinders `I_r(x) ∩ Q`) of the solve's nodal fields.
pub fn apriori_report(
    result: &SolveResult,
    inst: &ProblemInstance,
    p: f64,
    phi: &WeightFunction,
    sampler: &SupSampler,
) -> Result<AprioriReport> {
    let domain = MorreyDomain::within(inst.region());
    let q = Quadrature::default();
    let mut warnings = Vec::new();
    let b = check_condition_b(
        phi,
        sampler.centers(),
        sampler.radii(),
        &CheckSettings::for_radii(sampler.radii()),
    )?;
    let condition_b = b.passes();
    if !condition_b {
        warnings.push(format!("weight {} does not pass condition B; ratio reported anyway", phi.label()));
    }
    let f = ScalarField::from_grid(result.fields.f.clone(), "f");
    let rhs_norm = morrey_norm(&f, p, phi, &domain, sampler, &q)?.value;
    let sm = sobolev_morrey_norm(&result.bundle, p, phi, &domain, sampler, &q)?;
    let ratio = if rhs_norm > 0.0 {
        sm.total / rhs_norm
    } else if sm.total == 0.0 {
        0.0
    } else {
        return Err(Error::Inconsistent(format!(
            "zero right-hand side with a nonzero solution (norm {:e})",
            sm.total
        )));
    };
    Ok(AprioriReport {
        ratio,
        solution_norm: sm.total,
        rhs_norm,
        terms: sm.terms,
        condition_b,
        warnings,
    })
}

pub fn apriori_ratio(
    result: &SolveResult,
    inst: &ProblemInstance,
    p: f64,
    phi: &WeightFunction,
    sampler: &SupSampler,
) -> Result<f64> {
    Ok(apriori_report(result, inst, p, phi, sampler)?.ratio)
}

/// Both sides of `‖u_t‖ <= Σ_ij sup|a^{ij}| ‖D_ij u‖ + ‖f‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// Largest nodal `|u_t| - Σ |a^{ij}(x)| |D_ij u| - |f|`, relative to `max |u_t|`.
    pub pointwise_defect: f64,
    pub ut_norm: f64,
    pub bound: f64,
}

impl StructureReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.pointwise_defect <= tol && self.ut_norm <= self.bound * (1.0 + tol)
    }
}

/// The equation-structure estimate, at every node and in the `M_{p,φ}(Q)` norm.
pub fn structure_check(
    result: &SolveResult,
    inst: &ProblemInstance,
    p: f64,
    phi: &WeightFunction,
    sampler: &SupSampler,
) -> Result<StructureReport> {
    let fl = &result.fields;
    let lat = fl.u.lattice();
    let n = lat.dim();
    let ut = fl.ut.values();
    let f = fl.f.values();
    let (defect, sup_a) = (0..lat.len())
        .into_par_iter()
        .map(|k| {
            let a = inst.coeffs.at(&lat.point_of(k));
            let mut bound = f[k].abs();
            let mut sup = vec![0.0f64; n * n];
            for i in 0..n {
                for j in 0..n {
                    bound += a.get(i, j).abs() * fl.d2(i, j).values()[k].abs();
                    sup[i * n + j] = a.get(i, j).abs();
                }
            }
            (ut[k].abs() - bound, sup)
        })
        .reduce(
            || (f64::NEG_INFINITY, vec![0.0; n * n]),
            |(d1, s1), (d2, s2)| (d1.max(d2), s1.iter().zip(&s2).map(|(a, b)| a.max(*b)).collect()),
        );
    let scale = fl.ut.max_abs().max(f64::MIN_POSITIVE);
    let domain = MorreyDomain::within(inst.region());
    let q = Quadrature::default();
    let norm = |g: &crate::spaces::GridField| -> Result<f64> {
        let s = ScalarField::from_grid(g.clone(), "");
        Ok(morrey_norm(&s, p, phi, &domain, sampler, &q)?.value)
    };
    let ut_norm = norm(&fl.ut)?;
    let mut bound = norm(&fl.f)?;
    for i in 0..n {
        for j in 0..n {
            if sup_a[i * n + j] > 0.0 {
                bound += sup_a[i * n + j] * norm(fl.d2(i, j))?;
            }
        }
    }
    Ok(StructureReport {
        pointwise_defect: (defect / scale).max(0.0),
        ut_norm,
        bound,
    })
}
