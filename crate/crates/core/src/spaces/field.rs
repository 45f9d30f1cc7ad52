use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::expr::Expr;
use crate::geometry::point::{check_dim, rho, SpaceTimePoint};
use crate::geometry::region::Region;

use super::lattice::GridField;

type PointFn = dyn Fn(&SpaceTimePoint) -> f64 + Send + Sync;

#[derive(Clone)]
enum Source {
    Closure(Arc<PointFn>),
    Grid(Arc<GridField>),
}

/// An evaluable function on `R^{n+1}`: closed form or backed by lattice samples.
///
/// A declared support is enforced: the field evaluates to zero outside it.
#[derive(Clone)]
pub struct ScalarField {
    n: usize,
    label: String,
    support: Option<Region>,
    source: Source,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("support", &self.support)
            .field("grid", &matches!(self.source, Source::Grid(_)))
            .finish()
    }
}

impl ScalarField {
    pub fn new(
        n: usize,
        label: impl Into<String>,
        f: impl Fn(&SpaceTimePoint) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            label: label.into(),
            support: None,
            source: Source::Closure(Arc::new(f)),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(n, format!("{c}"), move |_| c)
    }

    pub fn zero(n: usize) -> Self {
        Self::new(n, "0", |_| 0.0)
    }

    /// Field given by an expression over `x1..xn, t`.
    pub fn from_expr(n: usize, expr: &Expr) -> Result<Self> {
        check_dim(n)?;
        if expr.max_space_var() > n {
            return Err(invalid(format!(
                "expression `{expr}` references x{} but n = {n}",
                expr.max_space_var()
            )));
        }
        if expr.uses(crate::expr::SLOT_R) {
            return Err(invalid("field expressions cannot reference `r`"));
        }
        let e = expr.clone();
        Ok(Self::new(n, expr.source().to_string(), move |p| {
            let mut s = [0.0; 5];
            s[..p.dim()].copy_from_slice(p.space());
            s[crate::expr::SLOT_T] = p.time();
            e.eval(&s)
        }))
    }

    pub fn from_grid(grid: GridField, label: impl Into<String>) -> Self {
        let n = grid.lattice().dim();
        let support = Some(grid.lattice().bounding_region());
        Self {
            n,
            label: label.into(),
            support,
            source: Source::Grid(Arc::new(grid)),
        }
    }

    /// `|log ρ(x - c)|^α` with `ρ` floored at `puncture` (the singular point is cut out).
    pub fn f_alpha(center: SpaceTimePoint, alpha: f64, puncture: f64) -> Self {
        let floor = puncture.max(1e-12);
        Self::new(center.dim(), format!("|log rho|^{alpha}"), move |p| {
            rho(&(*p - center)).max(floor).ln().abs().powf(alpha)
        })
    }

    /// `sin(|log ρ(x - c)|^α)`, bounded and of vanishing mean oscillation.
    pub fn sin_f_alpha(center: SpaceTimePoint, alpha: f64, puncture: f64) -> Self {
        let inner = Self::f_alpha(center, alpha, puncture);
        Self::new(center.dim(), format!("sin(|log rho|^{alpha})"), move |p| {
            inner.eval(p).sin()
        })
    }

    pub fn with_support(mut self, support: Region) -> Self {
        self.support = Some(support);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support(&self) -> Option<&Region> {
        self.support.as_ref()
    }

    pub fn as_grid(&self) -> Option<&GridField> {
        match &self.source {
            Source::Grid(g) => Some(g),
            Source::Closure(_) => None,
        }
    }

    #[inline]
    pub fn eval(&self, p: &SpaceTimePoint) -> f64 {
        if let Some(s) = &self.support {
            if !s.contains(p) {
                return 0.0;
            }
        }
        self.eval_unchecked(p)
    }

    /// Evaluates without the support test, for callers that already know `p` is inside.
    #[inline]
    pub(crate) fn eval_unchecked(&self, p: &SpaceTimePoint) -> f64 {
        match &self.source {
            Source::Closure(f) => f(p),
            Source::Grid(g) => g.interpolate(p),
        }
    }

    /// `c f`.
    pub fn scaled(&self, c: f64) -> Self {
        let f = self.clone();
        let mut out = Self::new(self.n, format!("{c}*({})", self.label), move |p| c * f.eval(p));
        out.support = self.support.clone();
        out
    }

    /// `α f + β g` (support dropped unless both supports coincide).
    pub fn combine(&self, alpha: f64, other: &ScalarField, beta: f64) -> Self {
        let (f, g) = (self.clone(), other.clone());
        let mut out = Self::new(
            self.n,
            format!("{alpha}*({})+{beta}*({})", self.label, other.label),
            move |p| alpha * f.eval(p) + beta * g.eval(p),
        );
        if self.support.is_some() && self.support == other.support {
            out.support = self.support.clone();
        }
        out
    }

    /// Pointwise product.
    pub fn product(&self, other: &ScalarField) -> Self {
        let (f, g) = (self.clone(), other.clone());
        let mut out = Self::new(self.n, format!("({})*({})", self.label, other.label), move |p| {
            f.eval(p) * g.eval(p)
        });
        out.support = self.support.clone().or_else(|| other.support.clone());
        out
    }
}

/// A function together with its first and second space derivatives and its time derivative.
#[derive(Clone, Debug)]
pub struct DerivativeBundle {
    pub u: ScalarField,
    pub du: Vec<ScalarField>,
    d2u: Vec<ScalarField>,
    pub ut: ScalarField,
}

fn tri(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl DerivativeBundle {
    /// Builds from `D_ij u` for `i <= j`, listed row by row (`(0,0), (0,1), .., (1,1), ..`).
    pub fn new(
        u: ScalarField,
        du: Vec<ScalarField>,
        d2u_upper: Vec<ScalarField>,
        ut: ScalarField,
    ) -> Result<Self> {
        let n = u.dim();
        if du.len() != n || d2u_upper.len() != n * (n + 1) / 2 {
            return Err(invalid("derivative bundle has the wrong number of components"));
        }
        Ok(Self {
            u,
            du,
            d2u: d2u_upper,
            ut,
        })
    }

    pub fn zero(n: usize) -> Self {
        let z = ScalarField::zero(n);
        Self {
            u: z.clone(),
            du: vec![z.clone(); n],
            d2u: vec![z.clone(); n * (n + 1) / 2],
            ut: z,
        }
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    /// `D_ij u`; symmetric by construction.
    pub fn d2(&self, i: usize, j: usize) -> &ScalarField {
        &self.d2u[tri(self.dim(), i, j)]
    }

    /// Every `D^s u` with `|s| <= 2` as multi-indices, each once: `u, D_i u, D_ij u (i <= j)`.
    pub fn multi_index_terms(&self) -> Vec<(String, &ScalarField)> {
        let n = self.dim();
        let mut out = vec![("u".to_string(), &self.u)];
        for (i, f) in self.du.iter().enumerate() {
            out.push((format!("D{}u", i + 1), f));
        }
        for i in 0..n {
            for j in i..n {
                out.push((format!("D{}{}u", i + 1, j + 1), self.d2(i, j)));
            }
        }
        out
    }
}
