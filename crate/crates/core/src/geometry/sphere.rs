use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use super::point::{check_dim, SpaceTimePoint};
use crate::error::{invalid, Result};

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(m: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let m = NonZeroUsize::new(m.max(1)).expect("m >= 1");
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GaussLegendre::new(m)
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Number of dyadic panels refining the top-level polar angle towards the equator.
const EQUATOR_LEVELS: i32 = 6;

/// Product Gauss rule on the unit sphere `S^n` of `R^{n+1}`.
///
/// Nodes are unit vectors stored as space-time points; the last coordinate
/// (time) is the polar axis. Kernels of heat type concentrate near the
/// equator `sigma_t = 0^+`, so the top-level polar angle uses panels graded
/// dyadically in `cos psi` towards it.
#[derive(Clone, Debug)]
pub struct SphereRule {
    n: usize,
    order: usize,
    nodes: Vec<SpaceTimePoint>,
    weights: Vec<f64>,
}

impl SphereRule {
    /// Space dimension `n`; the sphere is `S^n`.
    pub fn space_dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[SpaceTimePoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SpaceTimePoint, f64)> {
        self.nodes.iter().zip(self.weights.iter().copied())
    }

    /// `∫_{S^n} f dσ` with the surface measure.
    pub fn integrate(&self, f: impl Fn(&SpaceTimePoint) -> f64) -> f64 {
        self.iter().map(|(s, w)| w * f(s)).sum()
    }

    /// `∫_{S^n} f J dσ` with the parabolic polar Jacobian `J`.
    pub fn integrate_parabolic(&self, f: impl Fn(&SpaceTimePoint) -> f64) -> f64 {
        self.iter()
            .map(|(s, w)| w * parabolic_jacobian(s) * f(s))
            .sum()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Jacobian of parabolic polar coordinates: `dξ = ρ^{n+1} J(σ) dρ dσ`, `J = 1 + σ_t^2`.
pub fn parabolic_jacobian(sigma: &SpaceTimePoint) -> f64 {
    1.0 + sigma.time() * sigma.time()
}

/// The point `ρ∘σ = (ρσ', ρ^2σ_t)`; `rho(ρ∘σ) = ρ` for unit `σ`.
pub fn polar_point(rho: f64, sigma: &SpaceTimePoint) -> SpaceTimePoint {
    sigma.dilate(rho)
}

/// Surface area of `S^n`.
pub fn sphere_area(n: usize) -> f64 {
    (n as f64 + 1.0) * super::region::unit_ball_volume(n + 1)
}

/// Product rule on `S^{ambient_dim - 1}` with `order` Gauss points per angular panel.
pub fn sphere_rule(ambient_dim: usize, order: usize) -> Result<SphereRule> {
    if ambient_dim < 2 {
        return Err(crate::error::Error::UnsupportedDimension(0));
    }
    let n = ambient_dim - 1;
    check_dim(n)?;
    if order == 0 {
        return Err(invalid("sphere rule order must be at least 1"));
    }
    let (coords, weights) = level(n, order, true);
    let nodes = coords
        .iter()
        .map(|c| SpaceTimePoint::from_parts(&c[..n], c[n]))
        .collect();
    Ok(SphereRule {
        n,
        order,
        nodes,
        weights,
    })
}

fn polar_panels(top: bool) -> Vec<(f64, f64)> {
    if !top {
        return vec![(0.0, 0.5 * PI), (0.5 * PI, PI)];
    }
    let mut cuts: Vec<f64> = std::iter::once(0.5 * PI)
        .chain((0..=EQUATOR_LEVELS).rev().map(|k| 2f64.powi(-k).acos()))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let upper: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let lower = upper.iter().map(|&(a, b)| (PI - b, PI - a));
    upper.iter().copied().chain(lower).collect()
}

/// Rule on `S^k`, coordinates with the polar axis last.
fn level(k: usize, order: usize, top: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
    if k == 0 {
        return (vec![vec![-1.0], vec![1.0]], vec![1.0, 1.0]);
    }
    let (inner, inner_w) = level(k - 1, order, false);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (a, b) in polar_panels(top) {
        for (psi, w) in gauss_legendre(order, a, b) {
            let (s, c) = psi.sin_cos();
            let jac = s.powi(k as i32 - 1);
            for (v, vw) in inner.iter().zip(&inner_w) {
                let mut x: Vec<f64> = v.iter().map(|u| s * u).collect();
                x.push(c);
                nodes.push(x);
                weights.push(w * vw * jac);
            }
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn areas_are_exact() {
        for (d, area) in [(2, 2.0 * PI), (3, 4.0 * PI), (4, 2.0 * PI * PI)] {
            let rule = sphere_rule(d, 6).unwrap();
            assert!((rule.area() - area).abs() < 1e-10, "d={d}");
            assert!((sphere_area(d - 1) - area).abs() < 1e-12);
        }
    }

    #[test]
    fn nodes_are_unit_vectors() {
        let rule = sphere_rule(3, 4).unwrap();
        for s in rule.nodes() {
            assert!((s.euclidean_norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn odd_moments_vanish_and_second_moments_split_evenly() {
        for d in 2..=4 {
            let rule = sphere_rule(d, 10).unwrap();
            let area = rule.area();
            for k in 0..d {
                let m1 = rule.integrate(|s| s.coord(k));
                let m2 = rule.integrate(|s| s.coord(k).powi(2));
                assert!(m1.abs() < 1e-12);
                assert!((m2 - area / d as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn high_moment_converges() {
        // ∫_{S^2} x^10 dσ = 4π/11
        let rule = sphere_rule(3, 10).unwrap();
        let v = rule.integrate(|s| s.coord(0).powi(10));
        assert!((v - 4.0 * PI / 11.0).abs() < 1e-6);
    }

    #[test]
    fn parabolic_measure_recovers_ellipsoid_volume() {
        // |E_1| = (n+2)^{-1} ∫ J dσ
        let rule = sphere_rule(3, 8).unwrap();
        let vol = rule.integrate_parabolic(|_| 1.0) / 4.0;
        assert!((vol - 4.0 * PI / 3.0).abs() < 1e-10, "{vol}");
    }

    #[test]
    fn rejects_unsupported() {
        assert!(sphere_rule(1, 4).is_err());
        assert!(sphere_rule(5, 4).is_err());
        assert!(sphere_rule(3, 0).is_err());
    }
}
