use serde::{Deserialize, Serialize};

use super::point::{check_dim, SpaceTimePoint, MAX_SPACE_DIM};
use crate::error::{invalid, Result};

/// Regions of `R^{n+1}` used by norms, operators and the solver.
///
/// All kinds are convex. Membership is strict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// `E_r(x) = { y : |x'-y'|^2/r^2 + |t-tau|^2/r^4 < 1 }`.
    Ellipsoid { center: SpaceTimePoint, radius: f64 },
    /// `I_r(x) = { y : |x'-y'| < r, |t-tau| < r^2 }`.
    Cylinder { center: SpaceTimePoint, radius: f64 },
    /// `E_r^+(x0) = E_r(x0) ∩ { y_n > 0, tau > 0 }`.
    SemiEllipsoid { center: SpaceTimePoint, radius: f64 },
    /// `C_r^+(x0) = { |x0' - y'| < r, y_n > 0, 0 < tau - t0 < r^2 }`.
    SemiCylinder { center: SpaceTimePoint, radius: f64 },
    /// `Q = Omega x (t_start, t_end)` with `Omega` an axis-aligned box.
    BoxCylinder {
        lo: Vec<f64>,
        hi: Vec<f64>,
        t_start: f64,
        t_end: f64,
    },
    /// Intersection of two regions of the same dimension.
    Intersection { first: Box<Region>, second: Box<Region> },
}

/// Interval `(lo, hi)` along one axis.
pub type Interval = (f64, f64);

fn meet(a: Option<Interval>, b: Option<Interval>) -> Option<Interval> {
    match (a, b) {
        (Some((a0, a1)), Some((b0, b1))) => {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            (lo < hi).then_some((lo, hi))
        }
        _ => None,
    }
}

fn positive(x: Option<Interval>, from: f64) -> Option<Interval> {
    meet(x, Some((from, f64::INFINITY)))
}

impl Region {
    pub fn ellipsoid(center: SpaceTimePoint, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Region::Ellipsoid { center, radius })
    }

    pub fn cylinder(center: SpaceTimePoint, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Region::Cylinder { center, radius })
    }

    pub fn semi_ellipsoid(center: SpaceTimePoint, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Region::SemiEllipsoid { center, radius })
    }

    pub fn semi_cylinder(center: SpaceTimePoint, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Region::SemiCylinder { center, radius })
    }

    pub fn box_cylinder(lo: &[f64], hi: &[f64], t_start: f64, t_end: f64) -> Result<Self> {
        check_dim(lo.len())?;
        if lo.len() != hi.len() {
            return Err(invalid("box lower and upper corners differ in dimension"));
        }
        if lo.iter().zip(hi).any(|(a, b)| !(a < b)) || !(t_start < t_end) {
            return Err(invalid("box extents must be non-empty"));
        }
        Ok(Region::BoxCylinder {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            t_start,
            t_end,
        })
    }

    /// Parabolic window `[-l, l]^n x [t0, t1]`.
    pub fn window(n: usize, half_width: f64, t0: f64, t1: f64) -> Result<Self> {
        Region::box_cylinder(&vec![-half_width; n], &vec![half_width; n], t0, t1)
    }

    pub fn intersect(self, other: Region) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(invalid("cannot intersect regions of different dimension"));
        }
        Ok(Region::Intersection {
            first: Box::new(self),
            second: Box::new(other),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ellipsoid { center, .. }
            | Region::Cylinder { center, .. }
            | Region::SemiEllipsoid { center, .. }
            | Region::SemiCylinder { center, .. } => center.dim(),
            Region::BoxCylinder { lo, .. } => lo.len(),
            Region::Intersection { first, .. } => first.dim(),
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match self {
            Region::Ellipsoid { radius, .. }
            | Region::Cylinder { radius, .. }
            | Region::SemiEllipsoid { radius, .. }
            | Region::SemiCylinder { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        match self {
            Region::Ellipsoid { center, radius } => in_ellipsoid(center, *radius, p),
            Region::Cylinder { center, radius } => in_cylinder(center, *radius, p),
            Region::SemiEllipsoid { center, radius } => {
                in_ellipsoid(center, *radius, p) && upper(p) && p.time() > 0.0
            }
            Region::SemiCylinder { center, radius } => {
                let d = *p - *center;
                d.space_norm_sq() < radius * radius
                    && upper(p)
                    && d.time() > 0.0
                    && d.time() < radius * radius
            }
            Region::BoxCylinder {
                lo,
                hi,
                t_start,
                t_end,
            } => {
                p.space()
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(v, (a, b))| a < v && v < b)
                    && *t_start < p.time()
                    && p.time() < *t_end
            }
            Region::Intersection { first, second } => first.contains(p) && second.contains(p),
        }
    }

    /// Range of coordinate `k` (time is `k = n`) over which the region can be
    /// entered, given the earlier coordinates `prefix = (y_0, .., y_{k-1})`.
    ///
    /// For the primitive kinds this is exactly the fibre of the projection;
    /// for intersections it is a (possibly loose) superset.
    pub fn axis_interval(&self, k: usize, prefix: &[f64]) -> Option<Interval> {
        let n = self.dim();
        match self {
            Region::Ellipsoid { center, radius } => {
                ellipsoid_interval(center, *radius, k, prefix)
            }
            Region::Cylinder { center, radius } => cylinder_interval(center, *radius, k, prefix),
            Region::SemiEllipsoid { center, radius } => {
                let base = ellipsoid_interval(center, *radius, k, prefix);
                if k == n - 1 || k == n {
                    positive(base, 0.0)
                } else {
                    base
                }
            }
            Region::SemiCylinder { center, radius } => {
                let base = cylinder_interval(center, *radius, k, prefix);
                if k == n {
                    meet(
                        base,
                        Some((center.time(), center.time() + radius * radius)),
                    )
                } else if k == n - 1 {
                    positive(base, 0.0)
                } else {
                    base
                }
            }
            Region::BoxCylinder {
                lo,
                hi,
                t_start,
                t_end,
            } => {
                if k == n {
                    Some((*t_start, *t_end))
                } else {
                    Some((lo[k], hi[k]))
                }
            }
            Region::Intersection { first, second } => {
                meet(first.axis_interval(k, prefix), second.axis_interval(k, prefix))
            },
        }
    }

    /// Axis-aligned bounding box `(lo, hi)` of the region, coordinates `0..=n`.
    pub fn bounding_box(&self) -> ([f64; MAX_SPACE_DIM + 1], [f64; MAX_SPACE_DIM + 1]) {
        let n = self.dim();
        let mut lo = [0.0; MAX_SPACE_DIM + 1];
        let mut hi = [0.0; MAX_SPACE_DIM + 1];
        match self {
            Region::Ellipsoid { center, radius }
            | Region::Cylinder { center, radius }
            | Region::SemiEllipsoid { center, radius }
            | Region::SemiCylinder { center, radius } => {
                for k in 0..n {
                    lo[k] = center.coord(k) - radius;
                    hi[k] = center.coord(k) + radius;
                }
                lo[n] = center.time() - radius * radius;
                hi[n] = center.time() + radius * radius;
                if matches!(
                    self,
                    Region::SemiEllipsoid { .. } | Region::SemiCylinder { .. }
                ) {
                    lo[n - 1] = lo[n - 1].max(0.0);
                    lo[n] = lo[n].max(if matches!(self, Region::SemiCylinder { .. }) {
                        center.time()
                    } else {
                        0.0
                    });
                }
            }
            Region::BoxCylinder {
                lo: l,
                hi: h,
                t_start,
                t_end,
            } => {
                lo[..n].copy_from_slice(l);
                hi[..n].copy_from_slice(h);
                lo[n] = *t_start;
                hi[n] = *t_end;
            }
            Region::Intersection { first, second } => {
                let (alo, ahi) = first.bounding_box();
                let (blo, bhi) = second.bounding_box();
                for k in 0..=n {
                    lo[k] = alo[k].max(blo[k]);
                    hi[k] = ahi[k].min(bhi[k]).max(lo[k]);
                }
            }
        }
        (lo, hi)
    }

    /// Exact measure where a closed form is known (`None` for intersections and semi-ellipsoids
    /// not centered on the boundary).
    pub fn exact_volume(&self) -> Option<f64> {
        let n = self.dim();
        match self {
            Region::Ellipsoid { radius, .. } => {
                Some(unit_ball_volume(n + 1) * radius.powi(n as i32 + 2))
            }
            Region::Cylinder { radius, .. } => {
                Some(unit_ball_volume(n) * radius.powi(n as i32) * 2.0 * radius * radius)
            }
            Region::SemiCylinder { radius, center } if center.space()[n - 1] == 0.0 => {
                Some(unit_ball_volume(n) * radius.powi(n as i32 + 2) * 0.5)
            }
            Region::SemiEllipsoid { radius, center }
                if center.space()[n - 1] == 0.0 && center.time() == 0.0 =>
            {
                Some(unit_ball_volume(n + 1) * radius.powi(n as i32 + 2) * 0.25)
            }
            Region::BoxCylinder {
                lo,
                hi,
                t_start,
                t_end,
            } => Some(lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>() * (t_end - t_start)),
            _ => None,
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("region radius must be positive, got {r}")))
    }
}

fn upper(p: &SpaceTimePoint) -> bool {
    p.space()[p.dim() - 1] > 0.0
}

fn in_ellipsoid(c: &SpaceTimePoint, r: f64, p: &SpaceTimePoint) -> bool {
    let d = *p - *c;
    let r2 = r * r;
    d.space_norm_sq() / r2 + d.time() * d.time() / (r2 * r2) < 1.0
}

fn in_cylinder(c: &SpaceTimePoint, r: f64, p: &SpaceTimePoint) -> bool {
    let d = *p - *c;
    d.space_norm_sq() < r * r && d.time().abs() < r * r
}

fn partial_sq(c: &SpaceTimePoint, prefix: &[f64], upto: usize) -> f64 {
    prefix[..upto]
        .iter()
        .enumerate()
        .map(|(i, y)| (y - c.space()[i]).powi(2))
        .sum()
}

fn ellipsoid_interval(c: &SpaceTimePoint, r: f64, k: usize, prefix: &[f64]) -> Option<Interval> {
    let n = c.dim();
    let r2 = r * r;
    if k < n {
        let rem = r2 - partial_sq(c, prefix, k);
        (rem > 0.0).then(|| {
            let w = rem.sqrt();
            (c.space()[k] - w, c.space()[k] + w)
        })
    } else {
        let rem = 1.0 - partial_sq(c, prefix, n) / r2;
        (rem > 0.0).then(|| {
            let w = r2 * rem.sqrt();
            (c.time() - w, c.time() + w)
        })
    }
}

fn cylinder_interval(c: &SpaceTimePoint, r: f64, k: usize, prefix: &[f64]) -> Option<Interval> {
    let n = c.dim();
    if k < n {
        let rem = r * r - partial_sq(c, prefix, k);
        (rem > 0.0).then(|| {
            let w = rem.sqrt();
            (c.space()[k] - w, c.space()[k] + w)
        })
    } else {
        (partial_sq(c, prefix, n) < r * r).then(|| (c.time() - r * r, c.time() + r * r))
    }
}

/// Volume of the Euclidean unit ball in `R^d`, `pi^{d/2} / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * PI / d as f64,
    }
}

/// `|E_1|` in `R^{n+1}`: the ellipsoid `E_1` is the Euclidean unit ball.
pub fn unit_ellipsoid_volume(n: usize) -> f64 {
    unit_ball_volume(n + 1)
}
