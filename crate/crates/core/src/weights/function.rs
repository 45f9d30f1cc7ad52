use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expr::{Expr, SLOT_R, SLOT_T};
use crate::geometry::point::SpaceTimePoint;

/// Parameterised weight families; `γ = (n+2)/p` throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightFamily {
    /// `r^{β - γ}`.
    Power { beta: f64 },
    /// `r^{β - γ} log^m(e + r)`.
    PowerLog { beta: f64, m: f64 },
    /// `c`.
    Constant { c: f64 },
    /// A user expression over `x1..xn, t, r`.
    Expression { source: String },
}

type WeightFn = dyn Fn(&SpaceTimePoint, f64) -> f64 + Send + Sync;

/// `φ(x, r)`: point times radius to a positive real.
#[derive(Clone)]
pub struct WeightFunction {
    n: usize,
    p: f64,
    label: String,
    family: Option<WeightFamily>,
    eval: Arc<WeightFn>,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("p", &self.p)
            .field("family", &self.family)
            .finish()
    }
}

fn check_np(n: usize, p: f64) -> Result<()> {
    crate::geometry::point::check_dim(n)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must be >= 1, got {p}")));
    }
    Ok(())
}

impl WeightFunction {
    pub fn from_family(n: usize, p: f64, family: WeightFamily) -> Result<Self> {
        check_np(n, p)?;
        let gamma = (n as f64 + 2.0) / p;
        let (label, eval): (String, Arc<WeightFn>) = match &family {
            WeightFamily::Power { beta } => {
                let e = beta - gamma;
                (format!("r^({e})"), Arc::new(move |_, r: f64| r.powf(e)))
            }
            WeightFamily::PowerLog { beta, m } => {
                let (e, m) = (beta - gamma, *m);
                (
                    format!("r^({e})*log^{m}(e+r)"),
                    Arc::new(move |_, r: f64| r.powf(e) * (std::f64::consts::E + r).ln().powf(m)),
                )
            }
            WeightFamily::Constant { c } => {
                if !(*c > 0.0) {
                    return Err(Error::Weight("constant weight must be positive".into()));
                }
                let c = *c;
                (format!("{c}"), Arc::new(move |_, _| c))
            }
            WeightFamily::Expression { source } => {
                let expr = Expr::parse(source)?;
                if expr.max_space_var() > n {
                    return Err(invalid(format!("weight `{source}` references x{}", expr.max_space_var())));
                }
                (
                    source.clone(),
                    Arc::new(move |x: &SpaceTimePoint, r: f64| {
                        let mut s = [0.0; 5];
                        s[..x.dim()].copy_from_slice(x.space());
                        s[SLOT_T] = x.time();
                        s[SLOT_R] = r;
                        expr.eval(&s)
                    }),
                )
            }
        };
        Ok(Self {
            n,
            p,
            label,
            family: Some(family),
            eval,
        })
    }

    /// `r^{β - (n+2)/p}`.
    pub fn power(n: usize, p: f64, beta: f64) -> Result<Self> {
        Self::from_family(n, p, WeightFamily::Power { beta })
    }

    /// `r^{β - (n+2)/p} log^m(e + r)`.
    pub fn power_log(n: usize, p: f64, beta: f64, m: f64) -> Result<Self> {
        Self::from_family(n, p, WeightFamily::PowerLog { beta, m })
    }

    pub fn constant(n: usize, p: f64, c: f64) -> Result<Self> {
        Self::from_family(n, p, WeightFamily::Constant { c })
    }

    pub fn expression(n: usize, p: f64, source: &str) -> Result<Self> {
        Self::from_family(n, p, WeightFamily::Expression { source: source.into() })
    }

    pub fn from_fn(
        n: usize,
        p: f64,
        label: impl Into<String>,
        f: impl Fn(&SpaceTimePoint, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_np(n, p)?;
        Ok(Self {
            n,
            p,
            label: label.into(),
            family: None,
            eval: Arc::new(f),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn family(&self) -> Option<&WeightFamily> {
        self.family.as_ref()
    }

    /// True for `r^{β-γ}` and the constant family, whose checkers are scale covariant.
    pub fn is_pure_power(&self) -> bool {
        matches!(
            self.family,
            Some(WeightFamily::Power { .. }) | Some(WeightFamily::Constant { .. })
        )
    }

    #[inline]
    pub fn eval(&self, x: &SpaceTimePoint, r: f64) -> f64 {
        (self.eval)(x, r)
    }

    /// `φ(x, r)`, rejecting non-positive or non-finite values.
    pub fn checked(&self, x: &SpaceTimePoint, r: f64) -> Result<f64> {
        let v = self.eval(x, r);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Weight(format!(
                "weight `{}` is not positive at r = {r}: {v}",
                self.label
            )))
        }
    }

    /// `φ_λ(x, r) = φ(x, λ r)`.
    pub fn rescaled(&self, lambda: f64) -> Self {
        let inner = self.clone();
        Self {
            n: self.n,
            p: self.p,
            label: format!("{}(λ={lambda})", self.label),
            family: None,
            eval: Arc::new(move |x, r| inner.eval(x, lambda * r)),
        }
    }
}
