use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::grid::build_grid;
use crate::geometry::point::SpaceTimePoint;
use crate::geometry::region::Region;
use crate::weights::WeightFunction;

use super::field::{DerivativeBundle, ScalarField};
use super::lattice::{powp, PowerIntegrator};
use super::sampler::SupSampler;

/// Resolution for closed-form fields; lattice-backed fields use their own nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    /// Largest space spacing.
    pub h: f64,
    /// Lower bound on the number of space cells per radius of a small region.
    pub cells_per_radius: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            h: 0.05,
            cells_per_radius: 8.0,
        }
    }
}

impl Quadrature {
    pub fn with_h(h: f64) -> Self {
        Self {
            h,
            ..Self::default()
        }
    }

    fn spacing_for(&self, region: &Region) -> f64 {
        match region.radius() {
            Some(r) => self.h.min(r / self.cells_per_radius),
            None => self.h,
        }
    }
}

/// `(value, weight)` pairs discretising `f` on `region`.
pub fn region_samples(f: &ScalarField, region: &Region, q: &Quadrature) -> Result<Vec<(f64, f64)>> {
    if let Some(g) = f.as_grid() {
        return Ok(g
            .lattice()
            .region_weights(region)
            .into_iter()
            .map(|(i, w)| (g.values()[i], w))
            .collect());
    }
    let h = q.spacing_for(region);
    let target = match f.support() {
        Some(s) => region.clone().intersect(s.clone())?,
        None => region.clone(),
    };
    let grid = build_grid(&target, h)?;
    Ok(grid
        .iter()
        .map(|(p, w)| (f.eval_unchecked(p), w))
        .collect())
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("p must be >= 1, got {p}")))
    }
}

/// `∫_region |f|^p`.
pub fn power_integral(f: &ScalarField, region: &Region, p: f64, q: &Quadrature) -> Result<f64> {
    check_p(p)?;
    if let Some(g) = f.as_grid() {
        return Ok(PowerIntegrator::new(g, p).integral(region));
    }
    Ok(region_samples(f, region, q)?
        .iter()
        .map(|(v, w)| w * powp(*v, p))
        .sum())
}

/// `‖f‖_{p, region}`.
pub fn lp_norm(f: &ScalarField, region: &Region, p: f64, q: &Quadrature) -> Result<f64> {
    Ok(power_integral(f, region, p, q)?.powf(1.0 / p))
}

/// `sup_λ λ |{x ∈ region : |f(x)| > λ}|` from a sorted discrete distribution.
pub fn weak_l1_of_samples(samples: &[(f64, f64)]) -> f64 {
    let mut s: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(v, w)| *v != 0.0 && *w > 0.0)
        .map(|(v, w)| (v.abs(), *w))
        .collect();
    s.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = 0.0f64;
    let mut mass = 0.0;
    let mut i = 0;
    while i < s.len() {
        let level = s[i].0;
        while i < s.len() && s[i].0 == level {
            mass += s[i].1;
            i += 1;
        }
        best = best.max(level * mass);
    }
    best
}

pub fn weak_l1_norm(f: &ScalarField, region: &Region, q: &Quadrature) -> Result<f64> {
    Ok(weak_l1_of_samples(&region_samples(f, region, q)?))
}

/// Quadrature-consistent measure of the region as seen by `f`'s discretisation.
fn mean_and_measure(samples: &[(f64, f64)]) -> (f64, f64) {
    let (s, m) = samples
        .iter()
        .fold((0.0, 0.0), |(s, m), (v, w)| (s + v * w, m + w));
    if m > 0.0 {
        (s / m, m)
    } else {
        (0.0, 0.0)
    }
}

/// `|region|^{-1} ∫_region a`.
pub fn mean_integral(a: &ScalarField, region: &Region, q: &Quadrature) -> Result<f64> {
    let samples = full_samples(a, region, q)?;
    Ok(mean_and_measure(&samples).0)
}

/// Samples of `a` over the whole region (the support is not used to trim the
/// region, since means and oscillations need the full measure).
fn full_samples(a: &ScalarField, region: &Region, q: &Quadrature) -> Result<Vec<(f64, f64)>> {
    if a.as_grid().is_some() {
        return region_samples(a, region, q);
    }
    let grid = build_grid(region, q.spacing_for(region))?;
    Ok(grid.iter().map(|(p, w)| (a.eval(p), w)).collect())
}

/// `(|region|^{-1} ∫ |a - a_region|^p)^{1/p}`.
pub fn mean_oscillation(a: &ScalarField, region: &Region, p: f64, q: &Quadrature) -> Result<f64> {
    check_p(p)?;
    let samples = full_samples(a, region, q)?;
    Ok(oscillation_of_samples(&samples, p))
}

pub(crate) fn oscillation_of_samples(samples: &[(f64, f64)], p: f64) -> f64 {
    let (mean, m) = mean_and_measure(samples);
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = samples.iter().map(|(v, w)| w * powp(v - mean, p)).sum();
    (s / m).powf(1.0 / p)
}

/// Shape of the balls in a Morrey supremum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ball {
    Ellipsoid,
    Cylinder,
}

impl Ball {
    pub fn at(self, x: SpaceTimePoint, r: f64) -> Result<Region> {
        match self {
            Ball::Ellipsoid => Region::ellipsoid(x, r),
            Ball::Cylinder => Region::cylinder(x, r),
        }
    }
}

/// Where the Morrey supremum lives: all of `R^{n+1}` with ellipsoids, or a
/// region `Q` with the balls intersected with it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreyDomain {
    pub region: Option<Region>,
    pub ball: Ball,
}

impl MorreyDomain {
    pub fn whole_space() -> Self {
        Self {
            region: None,
            ball: Ball::Ellipsoid,
        }
    }

    /// `M_{p,φ}(Q)`: cylinders `Q ∩ I_r(x)` for box cylinders, ellipsoids otherwise.
    pub fn within(region: Region) -> Self {
        let ball = if matches!(region, Region::BoxCylinder { .. }) {
            Ball::Cylinder
        } else {
            Ball::Ellipsoid
        };
        Self {
            region: Some(region),
            ball,
        }
    }

    pub fn with_ball(mut self, ball: Ball) -> Self {
        self.ball = ball;
        self
    }

    pub fn ball_at(&self, x: SpaceTimePoint, r: f64) -> Result<Region> {
        let b = self.ball.at(x, r)?;
        match &self.region {
            Some(q) => b.intersect(q.clone()),
            None => Ok(b),
        }
    }
}

/// Sampled point attaining a supremum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub center: SpaceTimePoint,
    pub radius: f64,
}

/// A sampled supremum with its witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    pub witness: Option<Witness>,
    pub sampling: String,
    pub seed: Option<u64>,
    pub samples: usize,
}

/// Deterministic max over sampler order; the first maximal sample is the witness.
pub(crate) fn sampled_sup(
    sampler: &SupSampler,
    eval: impl Fn(SpaceTimePoint, f64) -> Result<f64> + Sync,
) -> Result<NormReport> {
    let samples = sampler.samples();
    let values: Vec<Result<f64>> = samples.par_iter().map(|(x, r)| eval(*x, *r)).collect();
    let mut best = 0.0f64;
    let mut witness = None;
    for ((x, r), v) in samples.iter().zip(values) {
        let v = v?;
        if v > best || witness.is_none() {
            best = best.max(v);
            witness = Some(Witness {
                center: *x,
                radius: *r,
            });
        }
    }
    Ok(NormReport {
        value: best,
        witness,
        sampling: sampler.description().to_string(),
        seed: sampler.seed(),
        samples: samples.len(),
    })
}

fn check_weight(phi: &WeightFunction, n: usize) -> Result<()> {
    if phi.dim() != n {
        return Err(Error::Weight(format!(
            "weight is for n = {}, field has n = {n}",
            phi.dim()
        )));
    }
    Ok(())
}

/// `sup φ(x,r)^{-1} (r^{-(n+2)} ∫_{B_r(x)} |f|^p)^{1/p}` over the sampled `(x, r)`.
pub fn morrey_norm(
    f: &ScalarField,
    p: f64,
    phi: &WeightFunction,
    domain: &MorreyDomain,
    sampler: &SupSampler,
    q: &Quadrature,
) -> Result<NormReport> {
    check_p(p)?;
    let n = f.dim();
    check_weight(phi, n)?;
    let fast = f.as_grid().map(|g| PowerIntegrator::new(g, p));
    sampled_sup(sampler, |x, r| {
        let w = phi.checked(&x, r)?;
        let region = domain.ball_at(x, r)?;
        let integral = match &fast {
            Some(fi) => fi.integral(&region),
            None => power_integral(f, &region, p, q)?,
        };
        Ok((integral / r.powi(n as i32 + 2)).powf(1.0 / p) / w)
    })
}

/// Weak Morrey quantity: `sup φ(x,r)^{-1} r^{-(n+2)} ‖f‖_{WL_1(B_r(x))}`.
pub fn weak_morrey_norm(
    f: &ScalarField,
    phi: &WeightFunction,
    domain: &MorreyDomain,
    sampler: &SupSampler,
    q: &Quadrature,
) -> Result<NormReport> {
    let n = f.dim();
    check_weight(phi, n)?;
    sampled_sup(sampler, |x, r| {
        let w = phi.checked(&x, r)?;
        let region = domain.ball_at(x, r)?;
        Ok(weak_l1_norm(f, &region, q)? / r.powi(n as i32 + 2) / w)
    })
}

/// `η_a(R)`: largest sampled mean oscillation over ellipsoids of radius `<= R`
/// (intersected with `domain` when given).
pub fn vmo_modulus(
    a: &ScalarField,
    big_r: f64,
    sampler: &SupSampler,
    domain: &MorreyDomain,
    q: &Quadrature,
) -> Result<NormReport> {
    let Some(s) = sampler.up_to_radius(big_r) else {
        return Err(invalid(format!("no sampled radius is <= {big_r}")));
    };
    sampled_sup(&s, |x, r| mean_oscillation(a, &domain.ball_at(x, r)?, 1.0, q))
}

/// `‖a‖_*` over the sampler's whole radius range.
pub fn bmo_norm(
    a: &ScalarField,
    sampler: &SupSampler,
    domain: &MorreyDomain,
    q: &Quadrature,
) -> Result<NormReport> {
    sampled_sup(sampler, |x, r| mean_oscillation(a, &domain.ball_at(x, r)?, 1.0, q))
}

/// Largest `|a_{E_r} - a_{E_s}| / ((1 + ln(s/r)) ‖a‖_*)` over pairs `r < s` of the radii,
/// all ellipsoids centred at `center`.
pub fn mean_growth_constant(
    a: &ScalarField,
    center: SpaceTimePoint,
    radii: &[f64],
    bmo: f64,
    q: &Quadrature,
) -> Result<f64> {
    if !(bmo > 0.0) {
        return Ok(0.0);
    }
    let means: Vec<f64> = radii
        .iter()
        .map(|r| mean_integral(a, &Region::ellipsoid(center, *r)?, q))
        .collect::<Result<_>>()?;
    let mut c = 0.0f64;
    for i in 0..radii.len() {
        for j in 0..radii.len() {
            if radii[i] < radii[j] {
                let growth = 1.0 + (radii[j] / radii[i]).ln();
                c = c.max((means[i] - means[j]).abs() / (growth * bmo));
            }
        }
    }
    Ok(c)
}

/// Breakdown of `‖u_t‖ + Σ_{|s|<=2} ‖D^s u‖` in `M_{p,φ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevMorreyReport {
    pub total: f64,
    pub terms: Vec<(String, f64)>,
}

impl SobolevMorreyReport {
    pub fn term(&self, label: &str) -> Option<f64> {
        self.terms.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }
}

pub fn sobolev_morrey_norm(
    b: &DerivativeBundle,
    p: f64,
    phi: &WeightFunction,
    domain: &MorreyDomain,
    sampler: &SupSampler,
    q: &Quadrature,
) -> Result<SobolevMorreyReport> {
    let mut terms = vec![("ut".to_string(), morrey_norm(&b.ut, p, phi, domain, sampler, q)?.value)];
    for (label, f) in b.multi_index_terms() {
        terms.push((label, morrey_norm(f, p, phi, domain, sampler, q)?.value));
    }
    let total = terms.iter().map(|(_, v)| v).sum();
    Ok(SobolevMorreyReport { total, terms })
}
