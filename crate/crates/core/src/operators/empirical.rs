use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientField;
use crate::error::{invalid, Result};
use crate::geometry::point::SpaceTimePoint;
use crate::geometry::region::Region;
use crate::spaces::{
    morrey_norm, weak_morrey_norm, Ball, Centering, GridField, Lattice, MorreyDomain, Quadrature, ScalarField,
    SupSampler,
};
use crate::weights::WeightFunction;

use super::battery::standard_battery;
use super::kernel::Kernel;
use super::lattice_op::{LatticeMode, LatticeOperator, LatticeOptions};
use super::reflected::ReflectedOperator;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    /// `M_{p,φ}`.
    Strong { p: f64 },
    /// Weak Morrey quantity built on `WL_1`.
    Weak,
}

/// A sampled Morrey norm: kind, weight, domain and sampler.
#[derive(Clone, Debug)]
pub struct NormSpec {
    pub kind: NormKind,
    pub phi: WeightFunction,
    pub domain: MorreyDomain,
    pub sampler: SupSampler,
}

impl NormSpec {
    pub fn eval(&self, f: &ScalarField) -> Result<f64> {
        let q = Quadrature::default();
        Ok(match self.kind {
            NormKind::Strong { p } => morrey_norm(f, p, &self.phi, &self.domain, &self.sampler, &q)?.value,
            NormKind::Weak => weak_morrey_norm(f, &self.phi, &self.domain, &self.sampler, &q)?.value,
        })
    }

    pub fn describe(&self) -> String {
        let kind = match self.kind {
            NormKind::Strong { p } => format!("M_{{p={p}}}"),
            NormKind::Weak => "WM_1".to_string(),
        };
        format!("{kind}, phi = {}, {:?} balls, {}", self.phi.label(), self.domain.ball, self.sampler.description())
    }
}

/// The operators whose norms are estimated; all act on lattice samples.
#[derive(Clone, Debug)]
pub enum OperatorSpec {
    Singular { kernel: Kernel },
    Commutator { kernel: Kernel, symbol: ScalarField },
    Reflected { kernel: Kernel, coeffs: CoefficientField },
    ReflectedCommutator { kernel: Kernel, coeffs: CoefficientField, symbol: ScalarField },
}

impl OperatorSpec {
    pub fn label(&self) -> String {
        match self {
            OperatorSpec::Singular { kernel } => format!("singular[{}]", kernel.label()),
            OperatorSpec::Commutator { kernel, symbol } => format!("commutator[{}; {}]", kernel.label(), symbol.label()),
            OperatorSpec::Reflected { kernel, coeffs } => format!("reflected[{}; {}]", kernel.label(), coeffs.label()),
            OperatorSpec::ReflectedCommutator { kernel, coeffs, symbol } => {
                format!("reflected-commutator[{}; {}; {}]", kernel.label(), coeffs.label(), symbol.label())
            }
        }
    }
}

enum Built {
    Plain(LatticeOperator, Option<GridField>),
    Reflected(ReflectedOperator, Option<GridField>),
}

impl Built {
    fn new(op: &OperatorSpec, lattice: &Lattice) -> Result<Self> {
        Ok(match op {
            OperatorSpec::Singular { kernel } => {
                Built::Plain(LatticeOperator::new(kernel.clone(), lattice.clone(), LatticeOptions::default())?, None)
            }
            OperatorSpec::Commutator { kernel, symbol } => Built::Plain(
                LatticeOperator::new(kernel.clone(), lattice.clone(), LatticeOptions::default())?,
                Some(lattice.sample(|p| symbol.eval(p))),
            ),
            OperatorSpec::Reflected { kernel, coeffs } => Built::Reflected(
                ReflectedOperator::new(kernel.clone(), coeffs.clone(), lattice.clone(), LatticeMode::Auto)?,
                None,
            ),
            OperatorSpec::ReflectedCommutator { kernel, coeffs, symbol } => Built::Reflected(
                ReflectedOperator::new(kernel.clone(), coeffs.clone(), lattice.clone(), LatticeMode::Auto)?,
                Some(lattice.sample(|p| symbol.eval(p))),
            ),
        })
    }

    fn apply_many(&self, fs: &[&GridField]) -> Result<Vec<GridField>> {
        match self {
            Built::Plain(op, None) => fs.iter().map(|f| op.apply(f)).collect(),
            Built::Plain(op, Some(a)) => fs.iter().map(|f| op.commutator(a, f)).collect(),
            Built::Reflected(op, None) => op.apply_many(fs),
            Built::Reflected(op, Some(a)) => op.commutator_many(a, fs),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionRatio {
    pub label: String,
    pub input: f64,
    pub output: f64,
    pub ratio: f64,
}

/// Ratios on one lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub h: f64,
    pub nodes: usize,
    pub ratios: Vec<FunctionRatio>,
    pub max: f64,
    pub argmax: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorNormReport {
    pub operator: String,
    pub battery: Vec<String>,
    /// Functions left out because their input norm vanished on some level.
    pub excluded: Vec<String>,
    pub input_norm: String,
    pub output_norm: String,
    pub levels: Vec<RefinementLevel>,
    /// Largest ratio over all levels.
    pub max: f64,
    /// `(max_l M_l - min_l M_l) / min_l M_l` for the per-level maxima `M_l`.
    pub drift: f64,
}

impl OperatorNormReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "level,h,nodes,function,input,output,ratio")?;
        for (k, l) in self.levels.iter().enumerate() {
            for r in &l.ratios {
                writeln!(out, "{k},{:e},{},{},{:e},{:e},{:e}", l.h, l.nodes, r.label, r.input, r.output, r.ratio)?;
            }
        }
        Ok(())
    }
}

/// Relative spread of a sequence of positive maxima.
pub fn relative_drift(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    if values.is_empty() || hi == 0.0 {
        0.0
    } else if !(lo > 0.0) {
        f64::INFINITY
    } else {
        (hi - lo) / lo
    }
}

/// Output-to-input norm ratios of `op` over the battery on each lattice (coarse to fine).
///
/// The battery is processed in label order. A function whose input norm is zero on
/// some level is excluded everywhere, so every level covers the same functions.
pub fn empirical_norm(
    op: &OperatorSpec,
    battery: &[ScalarField],
    input: &NormSpec,
    output: &NormSpec,
    lattices: &[Lattice],
) -> Result<OperatorNormReport> {
    if battery.is_empty() {
        return Err(invalid("operator-norm battery is empty"));
    }
    if lattices.is_empty() {
        return Err(invalid("at least one refinement level is required"));
    }
    let mut sorted: Vec<&ScalarField> = battery.iter().collect();
    sorted.sort_by(|a, b| a.label().cmp(b.label()));
    let mut raw: Vec<(f64, usize, Vec<FunctionRatio>)> = Vec::new();
    for lattice in lattices {
        let built = Built::new(op, lattice)?;
        let samples: Vec<GridField> = sorted.iter().map(|f| lattice.sample(|p| f.eval(p))).collect();
        let inputs: Vec<f64> = sorted
            .iter()
            .zip(&samples)
            .map(|(f, g)| input.eval(&ScalarField::from_grid(g.clone(), f.label())))
            .collect::<Result<_>>()?;
        let live: Vec<&GridField> = samples.iter().zip(&inputs).filter(|(_, &i)| i > 0.0).map(|(g, _)| g).collect();
        let mut images = built.apply_many(&live)?.into_iter();
        let mut ratios = Vec::new();
        for (f, &inp) in sorted.iter().zip(&inputs) {
            let out = if inp > 0.0 {
                let image = images.next().expect("one image per live input");
                output.eval(&ScalarField::from_grid(image, f.label()))?
            } else {
                0.0
            };
            ratios.push(FunctionRatio {
                label: f.label().to_string(),
                input: inp,
                output: out,
                ratio: if inp > 0.0 { out / inp } else { 0.0 },
            });
        }
        raw.push((lattice.spacing(0), lattice.len(), ratios));
    }
    let mut excluded: Vec<String> = Vec::new();
    for (_, _, ratios) in &raw {
        for r in ratios {
            if !(r.input > 0.0) && !excluded.contains(&r.label) {
                excluded.push(r.label.clone());
            }
        }
    }
    if excluded.len() == sorted.len() {
        return Err(invalid("every battery function has zero input norm"));
    }
    let levels: Vec<RefinementLevel> = raw
        .into_iter()
        .map(|(h, nodes, ratios)| {
            let ratios: Vec<FunctionRatio> = ratios.into_iter().filter(|r| !excluded.contains(&r.label)).collect();
            let (mut max, mut argmax) = (0.0f64, String::new());
            for r in &ratios {
                if r.ratio > max || argmax.is_empty() {
                    max = max.max(r.ratio);
                    argmax = r.label.clone();
                }
            }
            RefinementLevel {
                h,
                nodes,
                ratios,
                max,
                argmax,
            }
        })
        .collect();
    let maxima: Vec<f64> = levels.iter().map(|l| l.max).collect();
    Ok(OperatorNormReport {
        operator: op.label(),
        battery: sorted.iter().map(|f| f.label().to_string()).collect(),
        excluded,
        input_norm: input.describe(),
        output_norm: output.describe(),
        max: maxima.iter().copied().fold(0.0, f64::max),
        drift: relative_drift(&maxima),
        levels,
    })
}

/// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = 0.5 * (i + j) as f64;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let (rx, ry) = (ranks(&x[..n]), ranks(&y[..n]));
    let mean = 0.5 * (n - 1) as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let (a, b) = (rx[k] - mean, ry[k] - mean);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Resolution and weight of the VMO-smallness experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmoSettings {
    pub p: f64,
    pub beta: f64,
    /// Space cells per radius of the lattice around `E_r`.
    pub cells: usize,
    /// Sampler centres per axis of the bounding box of `E_r`.
    pub centres_per_axis: usize,
    /// `Cell` keeps every node off the centre, where `f_alpha` is floored, so the rows
    /// stay exactly dilation-covariant.
    pub centering: Centering,
}

impl Default for VmoSettings {
    fn default() -> Self {
        Self {
            p: 2.0,
            beta: 1.0,
            cells: 12,
            centres_per_axis: 3,
            centering: Centering::Cell,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmoRow {
    pub r0: f64,
    /// Battery radius `r = r0 / 2`.
    pub r: f64,
    pub max_ratio: f64,
    pub argmax: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmoTable {
    pub kernel: String,
    pub symbol: String,
    pub rows: Vec<VmoRow>,
    /// Spearman correlation between the step index (r0 decreasing) and the max ratio.
    pub spearman: f64,
    pub strictly_decreasing: bool,
}

/// For each `r0`, the largest `‖C[a,f]‖_{p,φ;E_r} / ‖f‖_{p,φ;E_r}` over the standard
/// battery placed in `E_r(centre)`, `r = r0/2`.
///
/// Each level uses the same lattice dilated to `E_r`, so with a pure power weight every
/// change in the ratios comes from the symbol alone.
pub fn vmo_smallness_experiment(
    kernel: &Kernel,
    symbol: &ScalarField,
    centre: SpaceTimePoint,
    r0s: &[f64],
    settings: &VmoSettings,
) -> Result<VmoTable> {
    if r0s.is_empty() {
        return Err(invalid("VMO experiment needs at least one r0"));
    }
    if r0s.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("r0 sequence must be strictly decreasing"));
    }
    if settings.cells == 0 {
        return Err(invalid("VMO lattice needs at least one cell per radius"));
    }
    let n = centre.dim();
    let phi = WeightFunction::power(n, settings.p, settings.beta)?;
    let mut rows = Vec::new();
    for &r0 in r0s {
        let r = 0.5 * r0;
        let h = r / settings.cells as f64;
        let mut lo: Vec<f64> = centre.space().iter().map(|c| c - r).collect();
        let mut hi: Vec<f64> = centre.space().iter().map(|c| c + r).collect();
        lo.push(centre.time() - r * r);
        hi.push(centre.time() + r * r);
        let lattice = Lattice::parabolic(settings.centering, &lo, &hi, h)?;
        let er = Region::ellipsoid(centre, r)?;
        let domain = MorreyDomain::within(er.clone()).with_ball(Ball::Ellipsoid);
        let radii = vec![r / 4.0, r / 2.0, r, 2.0 * r];
        let sampler = SupSampler::lattice(&er, settings.centres_per_axis, radii)?;
        let spec = NormSpec {
            kind: NormKind::Strong { p: settings.p },
            phi: phi.clone(),
            domain,
            sampler,
        };
        let op = OperatorSpec::Commutator {
            kernel: kernel.clone(),
            symbol: symbol.clone(),
        };
        let report = empirical_norm(&op, &standard_battery(centre, r)?, &spec, &spec, &[lattice])?;
        let level = &report.levels[0];
        rows.push(VmoRow {
            r0,
            r,
            max_ratio: level.max,
            argmax: level.argmax.clone(),
        });
    }
    let steps: Vec<f64> = (0..rows.len()).map(|k| k as f64).collect();
    let maxima: Vec<f64> = rows.iter().map(|r| r.max_ratio).collect();
    Ok(VmoTable {
        kernel: kernel.label().to_string(),
        symbol: symbol.label().to_string(),
        spearman: spearman(&steps, &maxima),
        strictly_decreasing: maxima.windows(2).all(|w| w[1] < w[0]),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::kernel::Component;

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[0.0, 1.0, 2.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[0.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]) - 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[0.0, 1.0], &[2.0, 2.0]), 0.0);
        assert!((relative_drift(&[1.0, 1.1, 0.9]) - 0.2 / 0.9).abs() < 1e-12);
    }

    fn small_setup() -> (Lattice, NormSpec) {
        let lat = Lattice::parabolic(Centering::Vertex, &[-1.0, 0.0], &[1.0, 1.0], 0.125).unwrap();
        let region = lat.bounding_region();
        let spec = NormSpec {
            kind: NormKind::Strong { p: 2.0 },
            phi: WeightFunction::power(1, 2.0, 1.0).unwrap(),
            domain: MorreyDomain::within(region.clone()),
            sampler: SupSampler::lattice(&region, 3, vec![0.25, 0.5, 1.0]).unwrap(),
        };
        (lat, spec)
    }

    #[test]
    fn empty_battery_is_rejected_and_zero_functions_excluded() {
        let (lat, spec) = small_setup();
        let op = OperatorSpec::Singular {
            kernel: Kernel::heat(1, Component::Second { i: 0, j: 0 }).unwrap(),
        };
        assert!(empirical_norm(&op, &[], &spec, &spec, &[lat.clone()]).is_err());
        let centre = SpaceTimePoint::new(&[0.0], 0.4).unwrap();
        let mut battery = standard_battery(centre, 0.3).unwrap()[..3].to_vec();
        battery.push(ScalarField::zero(1).with_label("zero"));
        let rep = empirical_norm(&op, &battery, &spec, &spec, &[lat]).unwrap();
        assert_eq!(rep.excluded, vec!["zero".to_string()]);
        assert_eq!(rep.levels[0].ratios.len(), 3);
        assert!(rep.levels[0].ratios.iter().all(|r| r.ratio > 0.0));
        let mut csv = Vec::new();
        rep.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
    }

    #[test]
    fn constant_symbol_ratios_vanish() {
        let k = Kernel::heat(1, Component::Second { i: 0, j: 0 }).unwrap();
        let c = SpaceTimePoint::new(&[0.0], 0.0).unwrap();
        let settings = VmoSettings {
            cells: 6,
            ..Default::default()
        };
        let t = vmo_smallness_experiment(&k, &ScalarField::constant(1, 3.0), c, &[0.5, 0.25], &settings).unwrap();
        assert!(t.rows.iter().all(|r| r.max_ratio == 0.0));
        assert!(vmo_smallness_experiment(&k, &ScalarField::constant(1, 3.0), c, &[0.25, 0.5], &settings).is_err());
    }

    #[test]
    fn log_contrast_rows_are_scale_invariant() {
        // On E_r(c) with r < 1, |log ρ| shifts by a constant under the dilation, which
        // the commutator cannot see.
        let k = Kernel::heat(1, Component::Second { i: 0, j: 0 }).unwrap();
        let c = SpaceTimePoint::new(&[0.0], 0.0).unwrap();
        let settings = VmoSettings {
            cells: 6,
            ..Default::default()
        };
        let t = vmo_smallness_experiment(&k, &ScalarField::f_alpha(c, 1.0, 1e-6), c, &[0.5, 0.25], &settings).unwrap();
        let (a, b) = (t.rows[0].max_ratio, t.rows[1].max_ratio);
        assert!(a > 0.0 && ((a - b) / a).abs() < 1e-9, "{a} {b}");
    }
}
