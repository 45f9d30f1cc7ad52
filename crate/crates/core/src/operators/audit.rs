use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::SymMatrix;
use crate::error::Result;
use crate::geometry::point::SpaceTimePoint;
use crate::geometry::sphere::SphereRule;

use super::kernel::{FrozenGaussian, Kernel};

/// Numerical check of the kernel axioms at one point `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelAudit {
    pub kernel: String,
    pub degree: i32,
    pub rule_order: usize,
    pub rule_nodes: usize,
    /// `max |K(x, μ∘ξ) μ^{-degree} / K(x, ξ) - 1|` over the dilation samples (parabolic dilation).
    pub homogeneity_defect: f64,
    /// The same defect under Euclidean dilation `μξ`, which kernels are not expected to pass.
    pub euclidean_homogeneity_defect: f64,
    /// `∫_{S^n} K (1 + σ_t²) dσ`: the mean that enters principal values over `ρ`-balls.
    pub sphere_mean: f64,
    /// `∫_{S^n} K dσ` with plain surface measure.
    pub plain_sphere_mean: f64,
    /// `∫_{S^n} |K| dσ`.
    pub l1_mass: f64,
    pub max_abs: f64,
    /// Largest central-difference gradient magnitude on the sphere (derivative order one).
    pub max_gradient: f64,
    /// Set when the audit itself could not evaluate the kernel.
    pub error: Option<String>,
}

impl KernelAudit {
    /// Homogeneity to `tol`, sphere mean below `mean_tol`, finite masses.
    pub fn passes(&self, tol: f64, mean_tol: f64) -> bool {
        self.error.is_none()
            && self.homogeneity_defect <= tol
            && self.sphere_mean.abs() <= mean_tol
            && self.l1_mass.is_finite()
            && self.max_abs.is_finite()
            && self.max_gradient.is_finite()
    }
}

/// Seeded `(ξ, μ)` pairs: `ξ` on the unit sphere off the zero set `τ = 0`, `μ` log-uniform.
pub fn dilation_samples(n: usize, count: usize, seed: u64) -> Vec<(SpaceTimePoint, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut c = [0.0; 4];
        for v in c.iter_mut().take(n + 1) {
            *v = rng.gen_range(-1.0..1.0);
        }
        let norm = c[..=n].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(0.1..=1.0).contains(&norm) {
            continue;
        }
        for v in c.iter_mut().take(n + 1) {
            *v /= norm;
        }
        // Keep τ away from 0 where the Gaussian components vanish to all orders.
        if c[n] < 0.05 {
            c[n] = c[n].abs().max(0.05);
        }
        let xi = SpaceTimePoint::from_coords(&c[..=n]).expect("dimension checked");
        let mu = 10f64.powf(rng.gen_range(-2.0..2.0));
        out.push((xi, mu));
    }
    out
}

/// Audits `K(x, ·)`; never fails, the error (if any) is part of the report.
pub fn czk_audit(k: &Kernel, rule: &SphereRule, x: &SpaceTimePoint, samples: &[(SpaceTimePoint, f64)]) -> KernelAudit {
    let mut report = KernelAudit {
        kernel: k.label().to_string(),
        degree: k.degree(),
        rule_order: rule.order(),
        rule_nodes: rule.len(),
        homogeneity_defect: f64::NAN,
        euclidean_homogeneity_defect: f64::NAN,
        sphere_mean: f64::NAN,
        plain_sphere_mean: f64::NAN,
        l1_mass: f64::NAN,
        max_abs: f64::NAN,
        max_gradient: f64::NAN,
        error: None,
    };
    let fk = match k.frozen(x) {
        Ok(f) => f,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    let d = k.degree() as f64;
    let mut defect = 0.0f64;
    let mut euclid = 0.0f64;
    for (xi, mu) in samples {
        let base = fk.eval(xi);
        if base == 0.0 || !base.is_finite() {
            continue;
        }
        let par = fk.eval(&xi.dilate(*mu)) * mu.powf(-d);
        defect = defect.max((par / base - 1.0).abs());
        let mut e = *xi;
        for v in e.space_mut() {
            *v *= mu;
        }
        e.set_time(xi.time() * mu);
        let eu = fk.eval(&e) * mu.powf(-d);
        euclid = euclid.max((eu / base - 1.0).abs());
    }
    report.homogeneity_defect = defect;
    report.euclidean_homogeneity_defect = euclid;
    report.sphere_mean = rule.integrate_parabolic(|s| fk.eval(s));
    report.plain_sphere_mean = rule.integrate(|s| fk.eval(s));
    report.l1_mass = rule.integrate(|s| fk.eval(s).abs());
    let h = 1e-5;
    let mut max_abs = 0.0f64;
    let mut max_grad = 0.0f64;
    for s in rule.nodes() {
        max_abs = max_abs.max(fk.eval(s).abs());
        let mut g2 = 0.0;
        for c in 0..=s.dim() {
            let (mut p, mut m) = (*s, *s);
            p.set_coord(c, s.coord(c) + h);
            m.set_coord(c, s.coord(c) - h);
            let g = (fk.eval(&p) - fk.eval(&m)) / (2.0 * h);
            g2 += g * g;
        }
        max_grad = max_grad.max(g2.sqrt());
    }
    report.max_abs = max_abs;
    report.max_gradient = max_grad;
    report
}

/// `c_ij = ∫_{S^n} Γ_j ν_i dσ` for a frozen matrix (plain surface measure: the flux through
/// `∂E_1` is scale invariant). Row `n` holds the time flux `∫ Γ ν_t dσ`.
pub fn boundary_constants(a: &SymMatrix, rule: &SphereRule) -> Result<Vec<Vec<f64>>> {
    let g = FrozenGaussian::new(*a)?;
    let n = a.dim();
    let mut c = vec![vec![0.0; n]; n + 1];
    for (s, w) in rule.iter() {
        let jet = g.jet(s);
        for (i, row) in c.iter_mut().enumerate().take(n) {
            for (j, v) in row.iter_mut().enumerate() {
                *v += w * jet.first[j] * s.space()[i];
            }
        }
        c[n][0] += w * jet.gamma * s.time();
    }
    Ok(c)
}
