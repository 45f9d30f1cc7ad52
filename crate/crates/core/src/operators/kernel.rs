use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, SymMatrix};
use crate::error::{invalid, Error, Result};
use crate::geometry::point::{SpaceTimePoint, MAX_SPACE_DIM};

/// `Γ` with its first and second space derivatives at one `ξ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelJet {
    pub a: SymMatrix,
    pub gamma: f64,
    pub first: [f64; MAX_SPACE_DIM],
    pub second: [[f64; MAX_SPACE_DIM]; MAX_SPACE_DIM],
}

/// Fundamental solution of `u_t - a^{ij} D_ij u` for one frozen matrix `a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrozenGaussian {
    a: SymMatrix,
    ainv: SymMatrix,
    /// `(det a)^{-1/2}`.
    norm: f64,
}

impl FrozenGaussian {
    pub fn new(a: SymMatrix) -> Result<Self> {
        a.ellipticity()?;
        let ainv = a.inverse()?;
        Ok(Self {
            a,
            ainv,
            norm: a.det().powf(-0.5),
        })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `(a^{-1} ξ', Γ(ξ))`, with `Γ = 0` for `τ <= 0`.
    #[inline]
    fn core(&self, xi: &SpaceTimePoint) -> ([f64; MAX_SPACE_DIM], f64) {
        let tau = xi.time();
        let n = self.dim();
        let w = self.ainv.apply(xi.space());
        if tau <= 0.0 {
            return (w, 0.0);
        }
        let q: f64 = (0..n).map(|i| w[i] * xi.space()[i]).sum();
        let g = (4.0 * PI * tau).powf(-0.5 * n as f64) * self.norm * (-q / (4.0 * tau)).exp();
        (w, g)
    }

    #[inline]
    pub fn gamma(&self, xi: &SpaceTimePoint) -> f64 {
        self.core(xi).1
    }

    /// `∂Γ/∂ξ_j = -Γ (a^{-1}ξ')_j / (2τ)`.
    #[inline]
    pub fn first(&self, j: usize, xi: &SpaceTimePoint) -> f64 {
        let (w, g) = self.core(xi);
        if g == 0.0 {
            return 0.0;
        }
        -g * w[j] / (2.0 * xi.time())
    }

    /// `∂²Γ/∂ξ_i∂ξ_j = Γ [(a^{-1}ξ')_i (a^{-1}ξ')_j / (4τ²) - (a^{-1})_ij / (2τ)]`.
    #[inline]
    pub fn second(&self, i: usize, j: usize, xi: &SpaceTimePoint) -> f64 {
        let (w, g) = self.core(xi);
        if g == 0.0 {
            return 0.0;
        }
        let tau = xi.time();
        g * (w[i] * w[j] / (4.0 * tau * tau) - self.ainv.get(i, j) / (2.0 * tau))
    }

    pub fn jet(&self, xi: &SpaceTimePoint) -> KernelJet {
        let n = self.dim();
        let (w, g) = self.core(xi);
        let mut first = [0.0; MAX_SPACE_DIM];
        let mut second = [[0.0; MAX_SPACE_DIM]; MAX_SPACE_DIM];
        if g != 0.0 {
            let tau = xi.time();
            for i in 0..n {
                first[i] = -g * w[i] / (2.0 * tau);
                for j in 0..n {
                    second[i][j] = g * (w[i] * w[j] / (4.0 * tau * tau) - self.ainv.get(i, j) / (2.0 * tau));
                }
            }
            // Exact symmetry.
            for i in 0..n {
                for j in 0..i {
                    second[i][j] = second[j][i];
                }
            }
        }
        KernelJet {
            a: self.a,
            gamma: g,
            first,
            second,
        }
    }
}

/// `Γ(a; ξ)` and its derivatives; rejects matrices that are not positive definite.
pub fn gaussian_jet(a: &SymMatrix, xi: &SpaceTimePoint) -> Result<KernelJet> {
    if a.dim() != xi.dim() {
        return Err(invalid("matrix and point differ in dimension"));
    }
    Ok(FrozenGaussian::new(*a)?.jet(xi))
}

/// Which derivative of the Gaussian a kernel is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "component", rename_all = "snake_case")]
pub enum Component {
    Gamma,
    First { j: usize },
    Second { i: usize, j: usize },
}

impl Component {
    /// Parabolic homogeneity degree of this component.
    pub fn degree(self, n: usize) -> i32 {
        let n = n as i32;
        match self {
            Component::Gamma => -n,
            Component::First { .. } => -n - 1,
            Component::Second { .. } => -n - 2,
        }
    }

    fn check(self, n: usize) -> Result<()> {
        let ok = match self {
            Component::Gamma => true,
            Component::First { j } => j < n,
            Component::Second { i, j } => i < n && j < n,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("kernel component {self:?} out of range for n = {n}")))
        }
    }

    fn label(self) -> String {
        match self {
            Component::Gamma => "Gamma".into(),
            Component::First { j } => format!("Gamma_{}", j + 1),
            Component::Second { i, j } => format!("Gamma_{}{}", i + 1, j + 1),
        }
    }
}

type CustomFn = dyn Fn(&SpaceTimePoint, &SpaceTimePoint) -> f64 + Send + Sync;

#[derive(Clone)]
enum Source {
    Gaussian {
        coeffs: CoefficientField,
        component: Component,
        /// Precomputed when the coefficients are constant.
        frozen: Option<FrozenGaussian>,
    },
    Custom { f: Arc<CustomFn>, invariant: bool },
}

/// A variable kernel `K(x, ξ)`, homogeneous in `ξ` of a declared parabolic degree.
#[derive(Clone)]
pub struct Kernel {
    n: usize,
    label: String,
    degree: i32,
    source: Source,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("degree", &self.degree)
            .finish()
    }
}

/// `ξ ↦ K(x, ξ)` with `x` fixed.
#[derive(Clone)]
pub enum FrozenKernel {
    Gaussian(FrozenGaussian, Component),
    Custom(Arc<CustomFn>, SpaceTimePoint),
}

impl FrozenKernel {
    #[inline]
    pub fn eval(&self, xi: &SpaceTimePoint) -> f64 {
        match self {
            FrozenKernel::Gaussian(g, c) => match *c {
                Component::Gamma => g.gamma(xi),
                Component::First { j } => g.first(j, xi),
                Component::Second { i, j } => g.second(i, j, xi),
            },
            FrozenKernel::Custom(f, x) => f(x, xi),
        }
    }
}

impl Kernel {
    /// A component of the Gaussian with coefficients frozen at the evaluation point.
    pub fn gaussian(coeffs: CoefficientField, component: Component) -> Result<Self> {
        let n = coeffs.dim();
        component.check(n)?;
        let frozen = match coeffs.as_constant() {
            Some(a) => Some(FrozenGaussian::new(a)?),
            None => None,
        };
        Ok(Self {
            n,
            label: format!("{}[{}]", component.label(), coeffs.label()),
            degree: component.degree(n),
            source: Source::Gaussian {
                coeffs,
                component,
                frozen,
            },
        })
    }

    /// `Γ_ij` for the identity matrix.
    pub fn heat(n: usize, component: Component) -> Result<Self> {
        Self::gaussian(CoefficientField::identity(n), component)
    }

    /// `K(x, ξ) = f(x, ξ)`; `invariant` declares that `f` ignores `x`.
    pub fn custom(
        n: usize,
        label: impl Into<String>,
        degree: i32,
        invariant: bool,
        f: impl Fn(&SpaceTimePoint, &SpaceTimePoint) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            label: label.into(),
            degree,
            source: Source::Custom {
                f: Arc::new(f),
                invariant,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn component(&self) -> Option<Component> {
        match &self.source {
            Source::Gaussian { component, .. } => Some(*component),
            Source::Custom { .. } => None,
        }
    }

    pub fn coefficients(&self) -> Option<&CoefficientField> {
        match &self.source {
            Source::Gaussian { coeffs, .. } => Some(coeffs),
            Source::Custom { .. } => None,
        }
    }

    /// True when `K(x, ξ)` does not depend on `x`.
    pub fn is_translation_invariant(&self) -> bool {
        matches!(
            &self.source,
            Source::Gaussian { frozen: Some(_), .. } | Source::Custom { invariant: true, .. }
        )
    }

    /// The same derivative of the Gaussian with another component.
    pub fn with_component(&self, component: Component) -> Result<Self> {
        match &self.source {
            Source::Gaussian { coeffs, .. } => Self::gaussian(coeffs.clone(), component),
            Source::Custom { .. } => Err(invalid("custom kernels have no components")),
        }
    }

    /// `K(x, ·)`, freezing the coefficients at `x`.
    pub fn frozen(&self, x: &SpaceTimePoint) -> Result<FrozenKernel> {
        match &self.source {
            Source::Gaussian {
                coeffs,
                component,
                frozen,
            } => {
                let g = match frozen {
                    Some(g) => *g,
                    None => FrozenGaussian::new(coeffs.at(x)).map_err(|e| match e {
                        Error::Coefficient(m) => Error::Coefficient(format!("at {x:?}: {m}")),
                        e => e,
                    })?,
                };
                Ok(FrozenKernel::Gaussian(g, *component))
            }
            Source::Custom { f, .. } => Ok(FrozenKernel::Custom(f.clone(), *x)),
        }
    }

    /// Frozen kernel of a translation-invariant kernel.
    pub fn frozen_constant(&self) -> Option<FrozenKernel> {
        match &self.source {
            Source::Gaussian {
                frozen: Some(g),
                component,
                ..
            } => Some(FrozenKernel::Gaussian(*g, *component)),
            Source::Custom { f, invariant: true } => {
                Some(FrozenKernel::Custom(f.clone(), SpaceTimePoint::origin(self.n)))
            }
            _ => None,
        }
    }

    pub fn eval(&self, x: &SpaceTimePoint, xi: &SpaceTimePoint) -> Result<f64> {
        Ok(self.frozen(x)?.eval(xi))
    }
}
