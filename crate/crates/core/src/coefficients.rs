//! Symmetric coefficient matrices `a^{ij}(x)` and their ellipticity bounds.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::point::{check_dim, rho, SpaceTimePoint, MAX_SPACE_DIM};

/// Symmetric `n x n` matrix with `n <= 3`, stored inline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    m: [[f64; MAX_SPACE_DIM]; MAX_SPACE_DIM],
}

impl SymMatrix {
    pub fn identity(n: usize) -> Self {
        let mut m = [[0.0; MAX_SPACE_DIM]; MAX_SPACE_DIM];
        for (i, row) in m.iter_mut().enumerate().take(n) {
            row[i] = 1.0;
        }
        Self { n, m }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        check_dim(n)?;
        let mut m = [[0.0; MAX_SPACE_DIM]; MAX_SPACE_DIM];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Coefficient("matrix rows must all have length n".into()));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Coefficient("non-finite matrix entry".into()));
                }
                m[i][j] = *v;
            }
        }
        for i in 0..n {
            for j in 0..i {
                if m[i][j] != m[j][i] {
                    return Err(Error::Coefficient(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { n, m })
    }

    /// Builds from the upper triangle; the lower one is mirrored.
    pub(crate) fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = [[0.0; MAX_SPACE_DIM]; MAX_SPACE_DIM];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        Self { n, m }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.m[i][..self.n].to_vec()).collect()
    }

    fn to_nalgebra(self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.m[i][j])
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_bounds(&self) -> (f64, f64) {
        let eig = self.to_nalgebra().symmetric_eigen().eigenvalues;
        (eig.min(), eig.max())
    }

    pub fn det(&self) -> f64 {
        self.to_nalgebra().determinant()
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .to_nalgebra()
            .try_inverse()
            .ok_or_else(|| Error::Coefficient("singular coefficient matrix".into()))?;
        // Symmetrize against rounding so that downstream symmetry is exact.
        Ok(Self::from_fn(self.n, |i, j| 0.5 * (inv[(i, j)] + inv[(j, i)])))
    }

    pub fn frobenius(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.m[i][j] * self.m[i][j])
            .sum::<f64>()
            .sqrt()
    }

    /// `a v` for a vector of length `n`.
    pub fn apply(&self, v: &[f64]) -> [f64; MAX_SPACE_DIM] {
        let mut out = [0.0; MAX_SPACE_DIM];
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = (0..self.n).map(|j| self.m[i][j] * v[j]).sum();
        }
        out
    }

    /// Smallest `Λ >= 1` with `Λ^{-1} |ξ|^2 <= <aξ,ξ> <= Λ|ξ|^2`, or an error if not SPD.
    pub fn ellipticity(&self) -> Result<f64> {
        let (lo, hi) = self.eigen_bounds();
        if !(lo > 0.0) {
            return Err(Error::Coefficient(format!(
                "matrix is not positive definite (smallest eigenvalue {lo:e})"
            )));
        }
        Ok(hi.max(1.0 / lo).max(1.0))
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

type MatrixFn = dyn Fn(&SpaceTimePoint) -> SymMatrix + Send + Sync;

/// A coefficient field `x -> a(x)` together with its declared ellipticity `Λ`.
#[derive(Clone)]
pub struct CoefficientField {
    n: usize,
    label: String,
    lambda: f64,
    constant: Option<SymMatrix>,
    eval: Arc<MatrixFn>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("lambda", &self.lambda)
            .field("constant", &self.constant)
            .finish()
    }
}

impl CoefficientField {
    pub fn identity(n: usize) -> Self {
        Self::constant(SymMatrix::identity(n), "identity").expect("identity is elliptic")
    }

    pub fn constant(a: SymMatrix, label: impl Into<String>) -> Result<Self> {
        let lambda = a.ellipticity()?;
        Ok(Self {
            n: a.dim(),
            label: label.into(),
            lambda,
            constant: Some(a),
            eval: Arc::new(move |_| a),
        })
    }

    /// A variable field; `lambda` is the declared bound, enforced by [`check_on`](Self::check_on).
    pub fn from_fn(
        n: usize,
        label: impl Into<String>,
        lambda: f64,
        f: impl Fn(&SpaceTimePoint) -> SymMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        check_dim(n)?;
        if !(lambda >= 1.0) {
            return Err(Error::Coefficient("ellipticity constant must be >= 1".into()));
        }
        Ok(Self {
            n,
            label: label.into(),
            lambda,
            constant: None,
            eval: Arc::new(f),
        })
    }

    /// Smooth anisotropic field: `a^{ii} = 1 + sin^2(πx_i)(1 + sin^2(πt)/2)/2`,
    /// `a^{ij} = sin(πx_i) sin(πx_j)/5`.
    pub fn smooth_anisotropic(n: usize) -> Result<Self> {
        use std::f64::consts::PI;
        Self::from_fn(n, "smooth-anisotropic", 2.5, move |p| {
            let x = p.space();
            SymMatrix::from_fn(n, |i, j| {
                if i == j {
                    1.0 + 0.5 * (PI * x[i]).sin().powi(2) * (1.0 + 0.5 * (PI * p.time()).sin().powi(2))
                } else {
                    0.2 * (PI * x[i]).sin() * (PI * x[j]).sin()
                }
            })
        })
    }

    /// Discontinuous VMO field: `a^{11} = 2 + sin(|log ρ(x - x_c)|^{1/2})`, other entries
    /// those of the identity.
    pub fn vmo_log(center: SpaceTimePoint) -> Result<Self> {
        let n = center.dim();
        Self::from_fn(n, "vmo-log", 3.0, move |p| {
            let r = rho(&(*p - center)).max(1e-12);
            let a11 = 2.0 + r.ln().abs().sqrt().sin();
            SymMatrix::from_fn(n, |i, j| match (i, j) {
                (0, 0) => a11,
                _ if i == j => 1.0,
                _ => 0.0,
            })
        })
    }

    /// `a(x) = a0 + δ B(x)` with a fixed smooth symmetric `B`, `|B| <= 1` entrywise.
    pub fn perturbed_constant(a0: SymMatrix, delta: f64) -> Result<Self> {
        let n = a0.dim();
        let (lo, hi) = a0.eigen_bounds();
        let spread = n as f64 * delta.abs();
        if !(lo - spread > 0.0) {
            return Err(Error::Coefficient("perturbation destroys ellipticity".into()));
        }
        let lambda = (hi + spread).max(1.0 / (lo - spread));
        let label = format!("constant+{delta:e}·smooth");
        let field = Self::from_fn(n, label, lambda.max(1.0), move |p| {
            let x = p.space();
            SymMatrix::from_fn(n, |i, j| {
                let b = if i == j {
                    (2.0 * x[i] + p.time()).sin()
                } else {
                    0.5 * (x[i] - x[j] + 0.3).cos()
                };
                a0.get(i, j) + delta * b
            })
        })?;
        Ok(field)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `Some(a)` when the field is a constant matrix.
    pub fn as_constant(&self) -> Option<SymMatrix> {
        self.constant
    }

    pub fn at(&self, p: &SpaceTimePoint) -> SymMatrix {
        (self.eval)(p)
    }

    /// `Λ^{-1}|ξ|^2 <= <a ξ, ξ> <= Λ|ξ|^2` at every given point (the load check).
    pub fn check_on<'a>(&self, points: impl IntoIterator<Item = &'a SpaceTimePoint>) -> Result<()> {
        for p in points {
            let a = self.at(p);
            let (lo, hi) = a.eigen_bounds();
            let tol = 1e-12 * self.lambda;
            if lo < 1.0 / self.lambda - tol || hi > self.lambda + tol {
                return Err(Error::Coefficient(format!(
                    "ellipticity violated at {:?}: eigenvalues [{lo}, {hi}] outside [1/{l}, {l}]",
                    p,
                    l = self.lambda
                )));
            }
        }
        Ok(())
    }

    /// Entrywise-Frobenius supremum of `a` over the given points.
    pub fn sup_frobenius<'a>(&self, points: impl IntoIterator<Item = &'a SpaceTimePoint>) -> f64 {
        points
            .into_iter()
            .map(|p| self.at(p).frobenius())
            .fold(0.0, f64::max)
    }
}
