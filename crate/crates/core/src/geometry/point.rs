use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest supported space dimension `n`.
pub const MAX_SPACE_DIM: usize = 3;

/// `((1 + sqrt 5) / 2)^{1/2}`, the sharp constant in `varrho <= rho <= C varrho`.
pub const METRIC_EQUIVALENCE: f64 = 1.272_019_649_514_069;

/// A point `(x', t)` of `R^{n+1}` with `n <= 3`.
///
/// Stored inline so that hot quadrature loops never allocate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimePoint {
    space: [f64; MAX_SPACE_DIM],
    n: usize,
    time: f64,
}

impl SpaceTimePoint {
    pub fn new(space: &[f64], time: f64) -> Result<Self> {
        check_dim(space.len())?;
        if !time.is_finite() || space.iter().any(|v| !v.is_finite()) {
            return Err(invalid("space-time point components must be finite"));
        }
        Ok(Self::from_parts(space, time))
    }

    /// Unchecked constructor for internal use where the inputs are known to be valid.
    pub(crate) fn from_parts(space: &[f64], time: f64) -> Self {
        let mut s = [0.0; MAX_SPACE_DIM];
        s[..space.len()].copy_from_slice(space);
        Self {
            space: s,
            n: space.len(),
            time,
        }
    }

    pub fn origin(n: usize) -> Self {
        Self {
            space: [0.0; MAX_SPACE_DIM],
            n,
            time: 0.0,
        }
    }

    /// Builds a point from `n + 1` coordinates, time last.
    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::UnsupportedDimension(coords.len().saturating_sub(1)));
        }
        let n = coords.len() - 1;
        Self::new(&coords[..n], coords[n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn space(&self) -> &[f64] {
        &self.space[..self.n]
    }

    pub fn space_mut(&mut self) -> &mut [f64] {
        &mut self.space[..self.n]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    /// Coordinate `k` in `0..=n`; axis `n` is time.
    pub fn coord(&self, k: usize) -> f64 {
        if k == self.n {
            self.time
        } else {
            self.space[k]
        }
    }

    pub fn set_coord(&mut self, k: usize, v: f64) {
        if k == self.n {
            self.time = v;
        } else {
            self.space[k] = v;
        }
    }

    pub fn space_norm_sq(&self) -> f64 {
        self.space().iter().map(|v| v * v).sum()
    }

    /// Euclidean norm in `R^{n+1}`.
    pub fn euclidean_norm(&self) -> f64 {
        (self.space_norm_sq() + self.time * self.time).sqrt()
    }

    /// Parabolic dilation `(mu x', mu^2 t)`.
    pub fn dilate(&self, mu: f64) -> Self {
        let mut out = *self;
        for v in out.space_mut() {
            *v *= mu;
        }
        out.time *= mu * mu;
        out
    }

    /// `x~ = (x'', -x_n, t)`: plain reflection across `{x_n = 0}`.
    pub fn reflect(&self) -> Self {
        let mut out = *self;
        out.space[self.n - 1] = -out.space[self.n - 1];
        out
    }
}

impl Sub for SpaceTimePoint {
    type Output = SpaceTimePoint;
    fn sub(self, rhs: Self) -> Self {
        debug_assert_eq!(self.n, rhs.n);
        let mut out = self;
        for k in 0..self.n {
            out.space[k] -= rhs.space[k];
        }
        out.time -= rhs.time;
        out
    }
}

impl Add for SpaceTimePoint {
    type Output = SpaceTimePoint;
    fn add(self, rhs: Self) -> Self {
        debug_assert_eq!(self.n, rhs.n);
        let mut out = self;
        for k in 0..self.n {
            out.space[k] += rhs.space[k];
        }
        out.time += rhs.time;
        out
    }
}

impl Neg for SpaceTimePoint {
    type Output = SpaceTimePoint;
    fn neg(self) -> Self {
        let mut out = self;
        for v in out.space_mut() {
            *v = -*v;
        }
        out.time = -out.time;
        out
    }
}

/// Serialized form `[x_1, ..., x_n, t]`.
impl Serialize for SpaceTimePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut v = self.space().to_vec();
        v.push(self.time);
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpaceTimePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        SpaceTimePoint::from_coords(&v).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_dim(n: usize) -> Result<()> {
    if (1..=MAX_SPACE_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

/// Fabes-Riviere metric `rho(x) = ((|x'|^2 + sqrt(|x'|^4 + 4 t^2)) / 2)^{1/2}`.
///
/// `rho(x) < r` exactly when `x` lies in the ellipsoid `E_r(0)`.
pub fn rho(p: &SpaceTimePoint) -> f64 {
    let s = p.space_norm_sq();
    ((s + s.hypot(2.0 * p.time)) * 0.5).sqrt()
}

/// Standard parabolic metric `max(|x'|, |t|^{1/2})`.
pub fn varrho(p: &SpaceTimePoint) -> f64 {
    p.space_norm_sq().sqrt().max(p.time.abs().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x, t).unwrap()
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(&pt(&[1.0, 0.0], 0.0)), 1.0);
        assert!((rho(&pt(&[0.0, 0.0], 0.49)) - 0.7).abs() < 1e-15);
        let golden = ((1.0 + 5f64.sqrt()) / 2.0).sqrt();
        assert!((rho(&pt(&[0.6, 0.8], 1.0)) - golden).abs() < 1e-15);
        assert!((golden - 1.272020).abs() < 1e-6);
        assert!((METRIC_EQUIVALENCE - golden).abs() < 1e-15);
        assert_eq!(rho(&SpaceTimePoint::origin(3)), 0.0);
    }

    #[test]
    fn varrho_examples() {
        assert_eq!(varrho(&pt(&[2.0, 0.0], 1.0)), 2.0);
        assert_eq!(varrho(&pt(&[0.0], 4.0)), 2.0);
        assert_eq!(varrho(&pt(&[3.0, 0.0, 0.0], 16.0)), 4.0);
    }

    #[test]
    fn rejects_bad_points() {
        assert!(SpaceTimePoint::new(&[], 0.0).is_err());
        assert!(SpaceTimePoint::new(&[0.0; 4], 0.0).is_err());
        assert!(SpaceTimePoint::new(&[f64::NAN], 0.0).is_err());
        assert!(SpaceTimePoint::new(&[0.0], f64::INFINITY).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let p = pt(&[1.0, -2.0], 0.5);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[1.0,-2.0,0.5]");
        let q: SpaceTimePoint = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn reflection_flips_last_space_coordinate() {
        let p = pt(&[1.0, 2.0, 3.0], 4.0);
        let r = p.reflect();
        assert_eq!(r.space(), &[1.0, 2.0, -3.0]);
        assert_eq!(r.time(), 4.0);
    }
}
