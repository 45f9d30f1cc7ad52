use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, SymMatrix};
use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::geometry::point::SpaceTimePoint;
use crate::geometry::region::Region;
use crate::operators::{majorant_kernel, Component, Kernel};
use crate::spaces::{Ball, Centering, ScalarField, SupSampler};
use crate::weights::{Condition, WeightFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Norm,
    WeightCheck,
    KernelAudit,
    OperatorBound,
    CommutatorVmo,
    Representation,
    PdeVerify,
    Apriori,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Norm,
        ExperimentKind::WeightCheck,
        ExperimentKind::KernelAudit,
        ExperimentKind::OperatorBound,
        ExperimentKind::CommutatorVmo,
        ExperimentKind::Representation,
        ExperimentKind::PdeVerify,
        ExperimentKind::Apriori,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Norm => "norm",
            ExperimentKind::WeightCheck => "weight-check",
            ExperimentKind::KernelAudit => "kernel-audit",
            ExperimentKind::OperatorBound => "operator-bound",
            ExperimentKind::CommutatorVmo => "commutator-vmo",
            ExperimentKind::Representation => "representation",
            ExperimentKind::PdeVerify => "pde-verify",
            ExperimentKind::Apriori => "apriori",
        }
    }
}

/// One experiment: its kind, seed and the parameter block named after the kind.
///
/// ```toml
/// kind = "weight-check"
/// seed = 7
///
/// [weight-check]
/// n = 2
/// p = 2.0
/// weight = { family = "power", beta = 1.0 }
/// ```
///
/// `output` is where reports go; it is not part of the echoed configuration because it
/// does not influence any result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_check: Option<WeightCheckParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_audit: Option<KernelAuditParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator_bound: Option<OperatorBoundParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commutator_vmo: Option<CommutatorVmoParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<RepresentationParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pde_verify: Option<PdeVerifyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apriori: Option<AprioriParams>,
}

impl ExperimentConfig {
    /// A configuration with only the kind and seed set; fill in the matching block.
    pub fn empty(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            output: None,
            norm: None,
            weight_check: None,
            kernel_audit: None,
            operator_bound: None,
            commutator_vmo: None,
            representation: None,
            pde_verify: None,
            apriori: None,
        }
    }

    /// Parses TOML; syntax and unknown keys are reported with line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn blocks(&self) -> [(ExperimentKind, bool); 8] {
        [
            (ExperimentKind::Norm, self.norm.is_some()),
            (ExperimentKind::WeightCheck, self.weight_check.is_some()),
            (ExperimentKind::KernelAudit, self.kernel_audit.is_some()),
            (ExperimentKind::OperatorBound, self.operator_bound.is_some()),
            (ExperimentKind::CommutatorVmo, self.commutator_vmo.is_some()),
            (ExperimentKind::Representation, self.representation.is_some()),
            (ExperimentKind::PdeVerify, self.pde_verify.is_some()),
            (ExperimentKind::Apriori, self.apriori.is_some()),
        ]
    }

    /// Exactly the block of `kind` is present, and its parameters are usable.
    pub fn validate(&self) -> Result<()> {
        for (kind, present) in self.blocks() {
            if kind == self.kind && !present {
                return Err(Error::Config(format!("kind `{}` needs a [{}] block", kind.name(), kind.name())));
            }
            if kind != self.kind && present {
                return Err(Error::Config(format!(
                    "block [{}] does not belong to kind `{}`",
                    kind.name(),
                    self.kind.name()
                )));
            }
        }
        let cfg = |msg: String| Error::Config(format!("[{}] {msg}", self.kind.name()));
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            if v.is_empty() || v.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                Err(cfg(format!("`{name}` must be a non-empty list of positive numbers")))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ExperimentKind::Norm => {
                let b = self.norm.as_ref().expect("checked");
                b.region.dim()?;
                b.sampler.validate().map_err(|e| cfg(e.to_string()))?;
            }
            ExperimentKind::WeightCheck => {
                let b = self.weight_check.as_ref().expect("checked");
                if b.conditions.is_empty() {
                    return Err(cfg("`conditions` is empty".into()));
                }
                if let Some(r) = &b.radii {
                    positive("radii", r)?;
                }
                if b.x_samples == 0 {
                    return Err(cfg("`x-samples` must be at least 1".into()));
                }
            }
            ExperimentKind::KernelAudit => {
                let b = self.kernel_audit.as_ref().expect("checked");
                if b.orders.is_empty() {
                    return Err(cfg("`orders` is empty".into()));
                }
                if b.dilation_samples == 0 {
                    return Err(cfg("`dilation-samples` must be at least 1".into()));
                }
            }
            ExperimentKind::OperatorBound => {
                let b = self.operator_bound.as_ref().expect("checked");
                if matches!(&b.battery.only, Some(l) if l.is_empty()) {
                    return Err(cfg("empty battery: `battery.only` lists no functions".into()));
                }
                if !(b.battery.radius > 0.0) {
                    return Err(cfg("`battery.radius` must be positive".into()));
                }
                positive("levels", &b.levels)?;
                b.window.dim()?;
                b.sampler.validate().map_err(|e| cfg(e.to_string()))?;
                let needs_symbol = matches!(b.operator, OperatorKind::Commutator | OperatorKind::ReflectedCommutator);
                if needs_symbol != b.symbol.is_some() {
                    return Err(cfg(format!(
                        "operator `{:?}` {} a `symbol`",
                        b.operator,
                        if needs_symbol { "needs" } else { "does not take" }
                    )));
                }
            }
            ExperimentKind::CommutatorVmo => {
                let b = self.commutator_vmo.as_ref().expect("checked");
                if b.symbols.is_empty() {
                    return Err(cfg("`symbols` is empty".into()));
                }
                positive("r0s", &b.r0s)?;
            }
            ExperimentKind::Representation => {
                let b = self.representation.as_ref().expect("checked");
                positive("levels", &b.levels)?;
                if b.points.is_empty() {
                    return Err(cfg("`points` is empty".into()));
                }
            }
            ExperimentKind::PdeVerify => {
                let b = self.pde_verify.as_ref().expect("checked");
                positive("levels", &b.levels)?;
                if b.levels.len() < 2 {
                    return Err(cfg("a convergence order needs at least two levels".into()));
                }
            }
            ExperimentKind::Apriori => {
                let b = self.apriori.as_ref().expect("checked");
                positive("levels", &b.levels)?;
                if b.problems.is_empty() {
                    return Err(cfg("`problems` is empty".into()));
                }
                b.sampler.validate().map_err(|e| cfg(e.to_string()))?;
            }
        }
        Ok(())
    }
}

/// An axis-aligned box of space-time: space coordinates first, time last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSpec {
    pub fn dim(&self) -> Result<usize> {
        if self.lo.len() != self.hi.len() || self.lo.len() < 2 {
            return Err(Error::Config("box `lo` and `hi` need n + 1 matching coordinates".into()));
        }
        Ok(self.lo.len() - 1)
    }

    pub fn region(&self) -> Result<Region> {
        let n = self.dim()?;
        Region::box_cylinder(&self.lo[..n], &self.hi[..n], self.lo[n], self.hi[n])
    }
}

fn default_per_axis() -> usize {
    4
}

fn default_radii() -> Vec<f64> {
    vec![0.125, 0.25, 0.5, 1.0]
}

/// Centres and radii of a sampled supremum: a lattice of centres, or `random` seeded ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SamplerSpec {
    #[serde(default = "default_per_axis")]
    pub per_axis: usize,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<usize>,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            per_axis: default_per_axis(),
            radii: default_radii(),
            random: None,
        }
    }
}

impl SamplerSpec {
    fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(invalid("sampler radii must be a non-empty list of positive numbers"));
        }
        if self.per_axis == 0 || self.random == Some(0) {
            return Err(invalid("sampler needs at least one centre"));
        }
        Ok(())
    }

    pub fn build(&self, region: &Region, seed: u64) -> Result<SupSampler> {
        match self.random {
            Some(count) => SupSampler::random(region, count, self.radii.clone(), seed),
            None => SupSampler::lattice(region, self.per_axis, self.radii.clone()),
        }
    }
}

fn default_puncture() -> f64 {
    1e-6
}

/// Coefficient fields by name; matrices are given row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
/// The field-less variants are empty structs so unknown keys next to `type` are rejected.
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Identity {},
    Constant { rows: Vec<Vec<f64>> },
    SmoothAnisotropic {},
    /// Centre given as space coordinates followed by time.
    VmoLog { centre: Vec<f64> },
    Perturbed { rows: Vec<Vec<f64>>, delta: f64 },
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec::Identity {}
    }
}

pub(crate) fn point(coords: &[f64], n: usize, what: &str) -> Result<SpaceTimePoint> {
    if coords.len() != n + 1 {
        return Err(Error::Config(format!("{what} needs {} coordinates (space, then time)", n + 1)));
    }
    SpaceTimePoint::from_coords(coords)
}

impl CoefficientSpec {
    pub fn build(&self, n: usize) -> Result<CoefficientField> {
        let matrix = |rows: &[Vec<f64>]| -> Result<SymMatrix> {
            let a = SymMatrix::from_rows(rows)?;
            if a.dim() != n {
                return Err(Error::Config(format!("coefficient matrix is {0}x{0}, expected {n}x{n}", a.dim())));
            }
            Ok(a)
        };
        match self {
            CoefficientSpec::Identity {} => Ok(CoefficientField::identity(n)),
            CoefficientSpec::Constant { rows } => CoefficientField::constant(matrix(rows)?, "constant"),
            CoefficientSpec::SmoothAnisotropic {} => CoefficientField::smooth_anisotropic(n),
            CoefficientSpec::VmoLog { centre } => CoefficientField::vmo_log(point(centre, n, "vmo-log centre")?),
            CoefficientSpec::Perturbed { rows, delta } => CoefficientField::perturbed_constant(matrix(rows)?, *delta),
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            CoefficientSpec::Identity {} => true,
            CoefficientSpec::Constant { rows } => rows
                .iter()
                .enumerate()
                .all(|(i, r)| r.iter().enumerate().all(|(j, v)| *v == if i == j { 1.0 } else { 0.0 })),
            _ => false,
        }
    }
}

/// Kernel families of the catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// Derivatives of the Gaussian fundamental solution of `∂_t - a^{ij}(x) D_ij`.
    GaussianJet,
    /// The same with `a = I`.
    Heat,
    /// `ρ(ξ)^{-(n+2)}`, which has no cancellation.
    Majorant,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [KernelFamily::GaussianJet, KernelFamily::Heat, KernelFamily::Majorant];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::GaussianJet => "gaussian-jet",
            KernelFamily::Heat => "heat",
            KernelFamily::Majorant => "majorant",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| Error::UnknownCatalogEntry(name.to_string()))
    }
}

/// A kernel; `component` lists 1-based derivative indices (`[]` is `Γ`, `[1, 2]` is `Γ_12`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<Vec<usize>>,
    #[serde(default)]
    pub coefficients: CoefficientSpec,
}

impl KernelSpec {
    pub fn component(&self) -> Result<Component> {
        let idx = self.component.as_deref().unwrap_or(&[1, 1]);
        if idx.iter().any(|&k| k == 0 || k > self.n) {
            return Err(Error::Config(format!("kernel component {idx:?} out of range 1..={}", self.n)));
        }
        match idx {
            [] => Ok(Component::Gamma),
            [j] => Ok(Component::First { j: j - 1 }),
            [i, j] => Ok(Component::Second { i: i - 1, j: j - 1 }),
            _ => Err(Error::Config("kernel components have at most two indices".into())),
        }
    }

    pub fn build(&self) -> Result<Kernel> {
        self.build_component(self.component()?)
    }

    pub fn build_component(&self, c: Component) -> Result<Kernel> {
        match self.family {
            KernelFamily::GaussianJet => Kernel::gaussian(self.coefficients.build(self.n)?, c),
            KernelFamily::Heat => Kernel::heat(self.n, c),
            KernelFamily::Majorant => {
                crate::geometry::point::check_dim(self.n)?;
                Ok(majorant_kernel(self.n))
            }
        }
    }
}

/// Symbols of commutators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SymbolSpec {
    Constant {
        c: f64,
    },
    Expression {
        source: String,
    },
    /// `|log ρ(x - c)|^α`.
    FAlpha {
        alpha: f64,
        centre: Vec<f64>,
        #[serde(default = "default_puncture")]
        puncture: f64,
    },
    /// `sin(|log ρ(x - c)|^α)`.
    SinFAlpha {
        alpha: f64,
        centre: Vec<f64>,
        #[serde(default = "default_puncture")]
        puncture: f64,
    },
}

impl SymbolSpec {
    pub fn build(&self, n: usize) -> Result<ScalarField> {
        match self {
            SymbolSpec::Constant { c } => Ok(ScalarField::constant(n, *c)),
            SymbolSpec::Expression { source } => ScalarField::from_expr(n, &Expr::parse(source)?),
            SymbolSpec::FAlpha { alpha, centre, puncture } => {
                Ok(ScalarField::f_alpha(point(centre, n, "symbol centre")?, *alpha, *puncture))
            }
            SymbolSpec::SinFAlpha { alpha, centre, puncture } => {
                Ok(ScalarField::sin_f_alpha(point(centre, n, "symbol centre")?, *alpha, *puncture))
            }
        }
    }
}

fn default_p() -> f64 {
    2.0
}

fn default_power_weight() -> WeightFamily {
    WeightFamily::Power { beta: 1.0 }
}

fn default_rel_tol() -> f64 {
    0.05
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMeasure {
    Strong,
    Weak,
    Bmo,
}

/// A sampled norm of an expression field over a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct NormParams {
    pub field: String,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_power_weight")]
    pub weight: WeightFamily,
    #[serde(default = "default_measure")]
    pub measure: NormMeasure,
    pub region: BoxSpec,
    #[serde(default = "default_ball")]
    pub ball: Ball,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_h: Option<f64>,
    /// Reference value; when set the norm must match it to `rel-tol`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_measure() -> NormMeasure {
    NormMeasure::Strong
}

fn default_ball() -> Ball {
    Ball::Ellipsoid
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightExpectation {
    Admissible,
    Divergent,
}

fn default_conditions() -> Vec<Condition> {
    vec![Condition::A, Condition::B]
}

fn default_x_samples() -> usize {
    8
}

fn default_admissible() -> WeightExpectation {
    WeightExpectation::Admissible
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct WeightCheckParams {
    pub n: usize,
    pub p: f64,
    pub weight: WeightFamily,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<Condition>,
    /// Sampled radii; `1e-2 · 2^k`, `k = 0..9` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    /// Seeded centres in `[-1, 1]^n × [0, 1]`.
    #[serde(default = "default_x_samples")]
    pub x_samples: usize,
    #[serde(default = "default_admissible")]
    pub expect: WeightExpectation,
    /// Agreement of the witnessed constants with the closed forms of pure powers.
    #[serde(default = "default_rel_tol")]
    pub closed_form_tol: f64,
}

fn default_orders() -> Vec<usize> {
    vec![6, 8, 10]
}

fn default_dilation_samples() -> usize {
    200
}

fn default_homogeneity_tol() -> f64 {
    1e-10
}

fn default_mean_tol() -> f64 {
    1e-4
}

/// Audits a kernel family; without `kernel.component` every second-order component is audited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct KernelAuditParams {
    pub kernel: KernelSpec,
    /// Frozen point `x`; the origin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_dilation_samples")]
    pub dilation_samples: usize,
    #[serde(default = "default_homogeneity_tol")]
    pub homogeneity_tol: f64,
    #[serde(default = "default_mean_tol")]
    pub mean_tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Singular,
    Commutator,
    Reflected,
    ReflectedCommutator,
}

/// The standard battery placed in `E_radius(centre)`, optionally restricted to `only`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BatterySpec {
    pub centre: Vec<f64>,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub only: Option<Vec<String>>,
}

fn default_drift_tol() -> f64 {
    0.2
}

fn default_vertex() -> Centering {
    Centering::Vertex
}

fn default_comparability_samples() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct OperatorBoundParams {
    pub operator: OperatorKind,
    pub kernel: KernelSpec,
    /// Coefficients of the reflection `T(x)`; identity when absent.
    #[serde(default)]
    pub coefficients: CoefficientSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<SymbolSpec>,
    pub battery: BatterySpec,
    pub window: BoxSpec,
    #[serde(default = "default_vertex")]
    pub centering: Centering,
    /// Space spacings of the lattices; time spacing is the square.
    pub levels: Vec<f64>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_power_weight")]
    pub weight: WeightFamily,
    /// Strong `p = 1` input norm against the weak output quantity.
    #[serde(default)]
    pub weak: bool,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default = "default_drift_tol")]
    pub drift_tol: f64,
    /// Coefficient fields whose reflection comparability constants are audited.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparability: Vec<CoefficientSpec>,
    #[serde(default = "default_comparability_samples")]
    pub comparability_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VmoExpectation {
    /// Every ratio is exactly zero.
    Vanishes,
    /// The maxima decrease strictly as `r0` decreases.
    Decreasing,
    /// The maxima do not fall by more than `non-decay-tol` relative.
    NonDecaying,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SymbolCase {
    pub symbol: SymbolSpec,
    pub expect: VmoExpectation,
}

fn default_r0s() -> Vec<f64> {
    vec![0.5, 0.25, 0.125]
}

fn default_cells() -> usize {
    12
}

fn default_vmo_centres() -> usize {
    3
}

fn default_beta() -> f64 {
    1.0
}

fn default_cell() -> Centering {
    Centering::Cell
}

fn default_non_decay_tol() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CommutatorVmoParams {
    pub kernel: KernelSpec,
    pub centre: Vec<f64>,
    #[serde(default = "default_r0s")]
    pub r0s: Vec<f64>,
    pub symbols: Vec<SymbolCase>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_vmo_centres")]
    pub centres_per_axis: usize,
    #[serde(default = "default_cell")]
    pub centering: Centering,
    #[serde(default = "default_non_decay_tol")]
    pub non_decay_tol: f64,
}

fn default_n() -> usize {
    2
}

fn default_bump_radius() -> f64 {
    0.5
}

fn default_t_end() -> f64 {
    0.6
}

fn default_representation_levels() -> Vec<f64> {
    vec![0.05, 0.035, 0.025]
}

/// The representation identity for a bump test function at the listed points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RepresentationParams {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub coefficients: CoefficientSpec,
    /// Half-space version with the reflected correction.
    #[serde(default)]
    pub boundary: bool,
    /// Space centre of the bump; the origin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centre: Option<Vec<f64>>,
    #[serde(default = "default_bump_radius")]
    pub radius: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Evaluation points (space, then time).
    pub points: Vec<Vec<f64>>,
    /// PV spacings; the first is the default grid, the rest refinements.
    #[serde(default = "default_representation_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_problem() -> String {
    "identity-sine".into()
}

fn default_pde_levels() -> Vec<f64> {
    vec![0.125, 0.0625, 0.03125]
}

fn default_order_min() -> f64 {
    1.8
}

fn default_zero_tol() -> f64 {
    1e-10
}

fn default_residual_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PdeVerifyParams {
    #[serde(default = "default_problem")]
    pub problem: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_pde_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_order_min")]
    pub order_min: f64,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
}

fn default_problems() -> Vec<String> {
    crate::solver::MANUFACTURED.iter().map(|s| s.to_string()).collect()
}

fn default_apriori_drift() -> f64 {
    0.25
}

fn default_true() -> bool {
    true
}

fn default_structure_tol() -> f64 {
    1e-9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AprioriParams {
    #[serde(default = "default_problems")]
    pub problems: Vec<String>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_pde_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_power_weight")]
    pub weight: WeightFamily,
    #[serde(default)]
    pub sampler: SamplerSpec,
    /// Also run the ten-member right-hand-side battery.
    #[serde(default = "default_true")]
    pub battery: bool,
    #[serde(default = "default_apriori_drift")]
    pub drift_tol: f64,
    #[serde(default = "default_structure_tol")]
    pub structure_tol: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_check_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
kind = "weight-check"
seed = 3
[weight-check]
n = 2
p = 2.0
weight = { family = "power-log", beta = 1.0, m = 1.0 }
"#,
        )
        .unwrap();
        let b = cfg.weight_check.unwrap();
        assert_eq!(b.conditions, vec![Condition::A, Condition::B]);
        assert_eq!(b.weight, WeightFamily::PowerLog { beta: 1.0, m: 1.0 });
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_position() {
        let err = ExperimentConfig::from_toml("kind = \"norm\"\ncolour = 1\n").unwrap_err().to_string();
        assert!(err.contains("colour") && err.contains("line 2"), "{err}");
        let err = ExperimentConfig::from_toml(
            "kind = \"weight-check\"\n[weight-check]\nn = 2\np = 2.0\nweight = { family = \"power\", beta = 1.0 }\ntypo = 3\n",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("typo"), "{err}");
        let err = ExperimentConfig::from_toml(
            "kind = \"representation\"\n[representation]\npoints = [[0.0, 0.0, 0.5]]\ncoefficients = { type = \"identity\", x = 1 }\n",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains('x'), "{err}");
        let err = ExperimentConfig::from_toml(
            "kind = \"weight-check\"\n[weight-check]\nn = 2\np = 2.0\nweight = { family = \"power\", beta = 1.0, betta = 2.0 }\n",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("betta"), "{err}");
    }

    #[test]
    fn blocks_must_match_the_kind() {
        let err = ExperimentConfig::from_toml("kind = \"norm\"\n").unwrap_err().to_string();
        assert!(err.contains("needs a [norm] block"), "{err}");
        let err = ExperimentConfig::from_toml(
            "kind = \"pde-verify\"\n[pde-verify]\n[apriori]\n",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("does not belong"), "{err}");
    }

    #[test]
    fn empty_battery_is_a_validation_error() {
        let text = r#"
kind = "operator-bound"
[operator-bound]
operator = "singular"
kernel = { family = "heat", n = 2 }
battery = { centre = [0.0, 0.0, 0.0], radius = 0.5, only = [] }
window = { lo = [-0.75, -0.75, -0.25], hi = [0.75, 0.75, 0.375] }
levels = [0.05]
"#;
        let err = ExperimentConfig::from_toml(text).unwrap_err().to_string();
        assert!(err.contains("empty battery"), "{err}");
    }

    #[test]
    fn echo_round_trips_without_the_output_path() {
        let mut cfg = ExperimentConfig::empty(ExperimentKind::PdeVerify, 9);
        cfg.pde_verify = Some(toml::from_str("").unwrap());
        cfg.output = Some("somewhere".into());
        let text = cfg.to_toml().unwrap();
        assert!(!text.contains("somewhere"));
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back.pde_verify, cfg.pde_verify);
        assert_eq!(back.output, None);
    }

    #[test]
    fn kernel_components_are_one_based() {
        let k: KernelSpec = toml::from_str("family = \"heat\"\nn = 2\ncomponent = [1, 2]\n").unwrap();
        assert_eq!(k.component().unwrap(), Component::Second { i: 0, j: 1 });
        let k: KernelSpec = toml::from_str("family = \"heat\"\nn = 2\ncomponent = [3]\n").unwrap();
        assert!(k.component().is_err());
    }
}
