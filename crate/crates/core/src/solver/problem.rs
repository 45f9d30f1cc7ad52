use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientField;
use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::geometry::point::{check_dim, SpaceTimePoint};
use crate::geometry::region::Region;
use crate::spaces::ScalarField;

/// Space step `h` and time step `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub h: f64,
    pub tau: f64,
}

impl GridSpec {
    /// `tau = h^2`.
    pub fn parabolic(h: f64) -> Self {
        Self { h, tau: h * h }
    }
}

/// `u_t - a^{ij} D_ij u = f` in `Q = Ω x (0, T)`, `u = 0` on the parabolic boundary,
/// with `Ω = (lo, hi)` a box.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub id: String,
    pub coeffs: CoefficientField,
    pub rhs: ScalarField,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub t_end: f64,
    pub grid: GridSpec,
    pub exact: Option<ScalarField>,
}

impl ProblemInstance {
    pub fn new(
        id: impl Into<String>,
        coeffs: CoefficientField,
        rhs: ScalarField,
        lo: &[f64],
        hi: &[f64],
        t_end: f64,
        grid: GridSpec,
    ) -> Result<Self> {
        let n = coeffs.dim();
        check_dim(n)?;
        if rhs.dim() != n || lo.len() != n || hi.len() != n {
            return Err(invalid("coefficients, right-hand side and box differ in dimension"));
        }
        Region::box_cylinder(lo, hi, 0.0, t_end)?;
        if !(grid.h > 0.0 && grid.tau > 0.0) {
            return Err(invalid("grid steps must be positive"));
        }
        Ok(Self {
            id: id.into(),
            coeffs,
            rhs,
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            t_end,
            grid,
            exact: None,
        })
    }

    pub fn with_exact(mut self, u: ScalarField) -> Self {
        self.exact = Some(u);
        self
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_rhs(mut self, rhs: ScalarField) -> Self {
        self.rhs = rhs;
        self.exact = None;
        self
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    /// `Q` as a box cylinder.
    pub fn region(&self) -> Region {
        Region::box_cylinder(&self.lo, &self.hi, 0.0, self.t_end).expect("validated at construction")
    }
}

/// Identifiers of the manufactured catalog, sorted.
pub const MANUFACTURED: [&str; 3] = ["identity-sine", "smooth-anisotropic", "vmo-log"];

/// Centre of the logarithmic singularity of the `vmo-log` coefficients.
pub fn vmo_centre(n: usize) -> SpaceTimePoint {
    SpaceTimePoint::new(&vec![0.5; n], 0.5).expect("valid dimension")
}

fn sines(x: &[f64], skip: &[usize]) -> f64 {
    x.iter()
        .enumerate()
        .filter(|(k, _)| !skip.contains(k))
        .map(|(_, v)| (PI * v).sin())
        .product()
}

/// `u* = t Π sin(π x_k)` on the unit cube.
pub fn sine_solution(n: usize) -> ScalarField {
    ScalarField::new(n, "t*prod sin(pi x_k)", |p| p.time() * sines(p.space(), &[]))
}

/// `f = u*_t - a^{ij} D_ij u*` for the sine solution, in closed form.
pub fn sine_rhs(coeffs: &CoefficientField) -> ScalarField {
    let n = coeffs.dim();
    let a = coeffs.clone();
    ScalarField::new(n, format!("manufactured rhs ({})", coeffs.label()), move |p| {
        let x = p.space();
        let t = p.time();
        let m = a.at(p);
        let s = sines(x, &[]);
        let mut f = s;
        for i in 0..n {
            f += m.get(i, i) * PI * PI * t * s;
            for j in 0..n {
                if i != j {
                    let c = (PI * x[i]).cos() * (PI * x[j]).cos() * sines(x, &[i, j]);
                    f -= m.get(i, j) * PI * PI * t * c;
                }
            }
        }
        f
    })
}

/// Catalog entry `id` in dimension `n` on `(0,1)^n x (0,1]` with exact solution
/// [`sine_solution`].
pub fn make_manufactured_in(id: &str, n: usize, grid: GridSpec) -> Result<ProblemInstance> {
    check_dim(n)?;
    let coeffs = match id {
        "identity-sine" => CoefficientField::identity(n),
        "smooth-anisotropic" => CoefficientField::smooth_anisotropic(n)?,
        "vmo-log" => CoefficientField::vmo_log(vmo_centre(n))?,
        _ => return Err(Error::UnknownCatalogEntry(id.to_string())),
    };
    let rhs = sine_rhs(&coeffs);
    Ok(ProblemInstance::new(id, coeffs, rhs, &vec![0.0; n], &vec![1.0; n], 1.0, grid)?.with_exact(sine_solution(n)))
}

/// Catalog entry `id` at `n = 2`, `h = 1/16`, `tau = h^2`.
pub fn make_manufactured(id: &str) -> Result<ProblemInstance> {
    make_manufactured_in(id, 2, GridSpec::parabolic(1.0 / 16.0))
}

/// Ten right-hand sides on the unit cylinder (smooth, rough in time, sign-changing,
/// localised, not vanishing on the lateral boundary), as expressions.
pub fn rhs_battery_sources(n: usize) -> Result<Vec<String>> {
    check_dim(n)?;
    let prod = |f: &dyn Fn(usize) -> String| (1..=n).map(f).collect::<Vec<_>>().join("*");
    let sq = |c: &[f64]| {
        (1..=n)
            .map(|k| format!("(x{k}-{})^2", c[k - 1]))
            .collect::<Vec<_>>()
            .join("+")
    };
    let sum = (1..=n).map(|k| format!("x{k}")).collect::<Vec<_>>().join("+");
    let off: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 0.3 } else { 0.7 }).collect();
    Ok(vec![
        "1".to_string(),
        "t".to_string(),
        prod(&|k| format!("sin(pi*x{k})")),
        format!("4^{n}*{}", prod(&|k| format!("x{k}*(1-x{k})"))),
        format!("exp(-20*({}+(t-0.5)^2))", sq(&vec![0.5; n])),
        format!("exp(-30*({}+(t-0.3)^2))", sq(&off)),
        "(1+t)*cos(2*pi*x1)".to_string(),
        format!("t*sin(3*pi*x1)*{}", prod(&|k| if k == 1 { "1".into() } else { format!("sin(2*pi*x{k})") })),
        format!("exp(-t)*(x1-{})", if n > 1 { "x2" } else { "0.5" }),
        format!("sin(pi*({sum}+t))"),
    ])
}

/// [`rhs_battery_sources`] as fields.
pub fn rhs_battery(n: usize) -> Result<Vec<ScalarField>> {
    rhs_battery_sources(n)?
        .iter()
        .map(|s| ScalarField::from_expr(n, &Expr::parse(s)?))
        .collect()
}
