use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::grid::{build_grid, QuadratureGrid};
use crate::geometry::point::{rho, SpaceTimePoint};
use crate::geometry::region::Region;
use crate::geometry::sphere::{gauss_legendre, parabolic_jacobian, sphere_rule, SphereRule};
use crate::spaces::ScalarField;

use super::kernel::{FrozenKernel, Kernel};

/// Smooth cutoff: 1 on `[0, 1]`, 0 on `[2, ∞)`, `C^∞` in between.
pub fn cutoff(u: f64) -> f64 {
    fn psi(s: f64) -> f64 {
        if s > 0.0 {
            (-1.0 / s).exp()
        } else {
            0.0
        }
    }
    if u <= 1.0 {
        1.0
    } else if u >= 2.0 {
        0.0
    } else {
        let (a, b) = (psi(2.0 - u), psi(u - 1.0));
        a / (a + b)
    }
}

/// Discretisation of a principal value over `{ρ(x - y) > ε}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvConfig {
    /// Exclusion radius in `ρ`.
    pub eps: f64,
    /// Spacing of the far-field midpoint grid.
    pub h: f64,
    /// Radius `R` of the near field, handled in polar coordinates (cut off smoothly on `[R, 2R]`).
    pub near_radius: f64,
    /// Far-field integration ball `E_{r_out}(x)` for integrands without a declared support.
    pub r_out: Option<f64>,
    /// Gauss points per radial panel.
    pub radial_order: usize,
    /// Gauss points per angular panel of the sphere rule.
    pub sphere_order: usize,
}

impl PvConfig {
    /// `ε = 4h`, `R = 2ε`.
    pub fn for_spacing(h: f64) -> Self {
        Self {
            eps: 4.0 * h,
            h,
            near_radius: 8.0 * h,
            r_out: None,
            radial_order: 8,
            sphere_order: 12,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self.near_radius = self.near_radius.max(2.0 * eps);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.eps > 0.0) {
            return Err(invalid("PV spacing and exclusion must be positive"));
        }
        if self.eps < 2.0 * self.h * (1.0 - 1e-12) {
            return Err(invalid(format!(
                "exclusion radius {} is below twice the grid spacing {}",
                self.eps, self.h
            )));
        }
        if self.near_radius < self.eps {
            return Err(invalid("near-field radius must be at least the exclusion radius"));
        }
        if self.radial_order == 0 || self.sphere_order == 0 {
            return Err(invalid("quadrature orders must be positive"));
        }
        Ok(())
    }
}

/// A truncated integral at `ε` and at `ε/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvValue {
    pub value: f64,
    pub half_eps: f64,
}

impl PvValue {
    pub fn gap(&self) -> f64 {
        (self.value - self.half_eps).abs()
    }
}

/// Sphere rule and far-field grid for one integrand support, reusable across evaluation points.
pub struct PvIntegrator {
    n: usize,
    cfg: PvConfig,
    rule: SphereRule,
    grid: Option<QuadratureGrid>,
}

impl PvIntegrator {
    pub fn new(n: usize, cfg: PvConfig, support: Option<&Region>) -> Result<Self> {
        cfg.validate()?;
        let rule = sphere_rule(n + 1, cfg.sphere_order)?;
        let grid = support.map(|r| build_grid(r, cfg.h)).transpose()?;
        Ok(Self { n, cfg, rule, grid })
    }

    /// `(ρ, weight, inner)`: `inner` marks nodes below `ε`.
    fn radial_nodes(&self, integrable: bool) -> Vec<(f64, f64, bool)> {
        let eps = self.cfg.eps;
        let top = 2.0 * self.cfg.near_radius;
        let mut panels = vec![(0.5 * eps, eps, true)];
        if integrable {
            panels.push((0.0, 0.5 * eps, true));
        }
        let mut a = eps;
        while a < top {
            let b = (2.0 * a).min(top);
            panels.push((a, b, false));
            a = b;
        }
        panels
            .into_iter()
            .flat_map(|(a, b, inner)| {
                gauss_legendre(self.cfg.radial_order, a, b)
                    .into_iter()
                    .map(move |(r, w)| (r, w, inner))
            })
            .collect()
    }

    fn far_grid(&self, x: &SpaceTimePoint) -> Result<std::borrow::Cow<'_, QuadratureGrid>> {
        match (&self.grid, self.cfg.r_out) {
            (Some(g), _) => Ok(std::borrow::Cow::Borrowed(g)),
            (None, Some(r)) => Ok(std::borrow::Cow::Owned(build_grid(&Region::ellipsoid(*x, r)?, self.cfg.h)?)),
            (None, None) => Err(invalid("integrand has no support and no r_out was given")),
        }
    }

    /// `∫_{ρ(ξ) > ε} K(ξ) g(x - ξ) dξ` at `ε` and `ε/2`, for a `K` homogeneous of `degree`.
    ///
    /// With `subtract`, the near field integrates `g(x - ξ) - g(x)` and adds `g(x)` times
    /// the sphere mean back; otherwise the integrand is used as is (for positive kernels).
    pub fn integrate(
        &self,
        k: &FrozenKernel,
        degree: i32,
        g: &(dyn Fn(&SpaceTimePoint) -> f64 + Sync),
        x: &SpaceTimePoint,
        subtract: bool,
    ) -> Result<PvValue> {
        let n = self.n;
        let integrable = degree > -(n as i32 + 2);
        let big_r = self.cfg.near_radius;
        let power = degree + n as i32 + 1;
        let kj: Vec<f64> = self
            .rule
            .iter()
            .map(|(s, w)| w * parabolic_jacobian(s) * k.eval(s))
            .collect();
        let mean: f64 = kj.iter().sum();
        let gx = if subtract { g(x) } else { 0.0 };
        let (mut outer, mut inner) = (0.0, 0.0);
        for (r, w, is_inner) in self.radial_nodes(integrable) {
            let radial_w = w * r.powi(power) * cutoff(r / big_r);
            if radial_w == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for ((sigma, _), c) in self.rule.iter().zip(&kj) {
                if *c != 0.0 {
                    s += c * (g(&(*x - sigma.dilate(r))) - gx);
                }
            }
            let contribution = radial_w * (s + gx * mean);
            if is_inner {
                inner += contribution;
            } else {
                outer += contribution;
            }
        }
        let grid = self.far_grid(x)?;
        let mut far = 0.0;
        for (y, w) in grid.iter() {
            let xi = *x - *y;
            let chi = cutoff(rho(&xi) / big_r);
            if chi < 1.0 {
                let gy = g(y);
                if gy != 0.0 {
                    far += w * (1.0 - chi) * k.eval(&xi) * gy;
                }
            }
        }
        Ok(PvValue {
            value: outer + far,
            half_eps: outer + inner + far,
        })
    }
}

/// `P.V. ∫ K(x, x - y) f(y) dy`, truncated at `ε` and `ε/2`.
pub fn singular_apply(k: &Kernel, f: &ScalarField, x: &SpaceTimePoint, cfg: &PvConfig) -> Result<PvValue> {
    let frozen = k.frozen(x)?;
    let integ = PvIntegrator::new(k.dim(), *cfg, f.support())?;
    integ.integrate(&frozen, k.degree(), &|y| f.eval(y), x, true)
}

/// `P.V. ∫ K(x, x - y) [a(y) - a(x)] f(y) dy`.
pub fn commutator_apply(
    k: &Kernel,
    a: &ScalarField,
    f: &ScalarField,
    x: &SpaceTimePoint,
    cfg: &PvConfig,
) -> Result<PvValue> {
    let frozen = k.frozen(x)?;
    let ax = a.eval(x);
    let integ = PvIntegrator::new(k.dim(), *cfg, f.support())?;
    integ.integrate(&frozen, k.degree(), &|y| (a.eval(y) - ax) * f.eval(y), x, true)
}

/// `ρ(ξ)^{-(n+2)}` as a kernel.
pub fn majorant_kernel(n: usize) -> Kernel {
    let d = n as i32 + 2;
    Kernel::custom(n, "rho^-(n+2)", -d, true, move |_, xi| {
        let r = rho(xi);
        if r > 0.0 {
            r.powi(-d)
        } else {
            0.0
        }
    })
}

/// `∫_{ρ(x-y) > ε} |f(y)| ρ(x - y)^{-(n+2)} dy`.
pub fn dominating_potential(f: &ScalarField, x: &SpaceTimePoint, cfg: &PvConfig) -> Result<f64> {
    Ok(weighted_potential(f, None, x, cfg)?.value)
}

/// `∫_{ρ(x-y) > ε} |a(x) - a(y)| |f(y)| ρ(x - y)^{-(n+2)} dy`; without `a` this is the plain majorant.
pub fn weighted_potential(
    f: &ScalarField,
    a: Option<&ScalarField>,
    x: &SpaceTimePoint,
    cfg: &PvConfig,
) -> Result<PvValue> {
    let n = f.dim();
    let k = majorant_kernel(n);
    let frozen = k.frozen(x)?;
    let integ = PvIntegrator::new(n, *cfg, f.support())?;
    match a {
        None => integ.integrate(&frozen, k.degree(), &|y| f.eval(y).abs(), x, false),
        Some(a) => {
            let ax = a.eval(x);
            integ.integrate(&frozen, k.degree(), &|y| ((a.eval(y) - ax) * f.eval(y)).abs(), x, false)
        }
    }
}
