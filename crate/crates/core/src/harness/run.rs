use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::point::SpaceTimePoint;
use crate::geometry::sphere::sphere_rule;
use crate::operators::{
    comparability_audit, czk_audit, dilation_samples, empirical_norm, relative_drift, standard_battery,
    vmo_smallness_experiment, Component, NormKind, NormSpec, OperatorSpec, VmoSettings,
};
use crate::solver::{
    apriori_report, boundary_representation_audit, bump_test_function, make_manufactured_in, representation_audit,
    rhs_battery, rhs_battery_sources, solve_cdp, structure_check, GridSpec,
};
use crate::spaces::{
    bmo_norm, morrey_norm, weak_morrey_norm, Lattice, MorreyDomain, Quadrature, ScalarField,
};
use crate::operators::PvConfig;
use crate::weights::{check_condition_a, check_condition_b, CheckSettings, Condition, WeightFamily, WeightFunction};

use super::config::*;
use super::report::{Check, RunReport, Table, SCHEMA_VERSION, TOOL};

/// What one experiment produced, before it is wrapped into a report.
#[derive(Default)]
struct Outcome {
    checks: Vec<Check>,
    results: serde_json::Map<String, Value>,
    tables: Vec<Table>,
    warnings: Vec<String>,
}

impl Outcome {
    fn result(&mut self, key: &str, v: impl serde::Serialize) -> Result<()> {
        self.results.insert(key.to_string(), serde_json::to_value(v)?);
        Ok(())
    }
}

/// Runs one experiment. Reports are not written; see [`RunReport::write_to`].
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let seed = config.seed;
    let outcome = match config.kind {
        ExperimentKind::Norm => norm(config.norm.as_ref().expect("validated"), seed),
        ExperimentKind::WeightCheck => weight_check(config.weight_check.as_ref().expect("validated"), seed),
        ExperimentKind::KernelAudit => kernel_audit(config.kernel_audit.as_ref().expect("validated"), seed),
        ExperimentKind::OperatorBound => operator_bound(config.operator_bound.as_ref().expect("validated"), seed),
        ExperimentKind::CommutatorVmo => commutator_vmo(config.commutator_vmo.as_ref().expect("validated")),
        ExperimentKind::Representation => representation(config.representation.as_ref().expect("validated")),
        ExperimentKind::PdeVerify => pde_verify(config.pde_verify.as_ref().expect("validated")),
        ExperimentKind::Apriori => apriori(config.apriori.as_ref().expect("validated"), seed),
    }
    .map_err(|e| e.context(format!("{} experiment", config.kind.name())))?;
    let passed = !outcome.checks.is_empty() && outcome.checks.iter().all(|c| c.passed);
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        tool: TOOL.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: config.kind,
        seed,
        config: config.clone(),
        checks: outcome.checks,
        results: Value::Object(outcome.results),
        tables: outcome.tables,
        warnings: outcome.warnings,
        passed,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn relative_error(measured: f64, reference: f64) -> f64 {
    (measured - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

fn norm(b: &NormParams, seed: u64) -> Result<Outcome> {
    let n = b.region.dim()?;
    let region = b.region.region()?;
    let field = ScalarField::from_expr(n, &Expr::parse(&b.field)?)?;
    let phi = WeightFunction::from_family(n, b.p, b.weight.clone())?;
    let domain = MorreyDomain::within(region.clone()).with_ball(b.ball);
    let sampler = b.sampler.build(&region, seed)?;
    let q = b.quadrature_h.map(Quadrature::with_h).unwrap_or_default();
    let rep = match b.measure {
        NormMeasure::Strong => morrey_norm(&field, b.p, &phi, &domain, &sampler, &q)?,
        NormMeasure::Weak => weak_morrey_norm(&field, &phi, &domain, &sampler, &q)?,
        NormMeasure::Bmo => bmo_norm(&field, &sampler, &domain, &q)?,
    };
    let mut out = Outcome::default();
    out.checks.push(Check::new("finite", rep.value.is_finite(), rep.value, "finite"));
    if let Some(expect) = b.expect {
        out.checks.push(
            Check::at_most("matches-expected", relative_error(rep.value, expect), b.rel_tol)
                .with_detail(format!("value {} against {expect}", rep.value)),
        );
    }
    out.result("norm", &rep)?;
    out.result("sampler", sampler.description())?;
    Ok(out)
}

/// `1/δ` and `1/δ + 1/δ²` for `φ = r^{β-γ}`, `δ = γ - β`.
fn power_closed_form(cond: Condition, n: usize, p: f64, beta: f64) -> Option<f64> {
    let delta = (n as f64 + 2.0) / p - beta;
    if !(delta > 0.0) {
        return None;
    }
    Some(match cond {
        Condition::A => 1.0 / delta,
        Condition::B => 1.0 / delta + 1.0 / (delta * delta),
    })
}

fn weight_check(b: &WeightCheckParams, seed: u64) -> Result<Outcome> {
    let phi = WeightFunction::from_family(b.n, b.p, b.weight.clone())?;
    let radii = b.radii.clone().unwrap_or_else(|| (0..9).map(|k| 1e-2 * 2f64.powi(k)).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<SpaceTimePoint> = (0..b.x_samples)
        .map(|_| {
            let space: Vec<f64> = (0..b.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            SpaceTimePoint::new(&space, rng.gen_range(0.0..1.0))
        })
        .collect::<Result<_>>()?;
    let settings = CheckSettings::for_radii(&radii);
    let admissible = b.expect == WeightExpectation::Admissible;
    let mut out = Outcome::default();
    let mut table = Table::new("conditions", &["condition", "constant", "witness_r", "tail_fraction", "last_decade_growth"]);
    let mut reports = Vec::new();
    for &cond in &b.conditions {
        let rep = match cond {
            Condition::A => check_condition_a(&phi, &xs, &radii, &settings)?,
            Condition::B => check_condition_b(&phi, &xs, &radii, &settings)?,
        };
        let name = format!("condition-{cond:?}");
        out.checks.push(Check::new(
            format!("{name}/verdict"),
            rep.passes() == admissible,
            serde_json::to_value(rep.constant)?,
            if admissible { "finite" } else { "DIVERGENT" },
        ));
        if let (true, Some(WeightFamily::Power { beta }), Some(c)) = (admissible, phi.family(), rep.constant.value()) {
            if let Some(exact) = power_closed_form(cond, b.n, b.p, *beta) {
                out.checks.push(
                    Check::at_most(format!("{name}/closed-form"), relative_error(c, exact), b.closed_form_tol)
                        .with_detail(format!("witnessed {c} against {exact}")),
                );
            }
        }
        table.push(vec![
            format!("{cond:?}"),
            rep.constant.to_string(),
            rep.witness.as_ref().map(|w| fmt(w.1)).unwrap_or_default(),
            fmt(rep.tail_fraction),
            fmt(rep.last_decade_growth),
        ]);
        reports.push(rep);
    }
    out.result("weight", phi.label())?;
    out.result("reports", &reports)?;
    out.tables.push(table);
    Ok(out)
}

/// Below this a sphere mean is round-off and no longer expected to shrink with the order.
const MEAN_FLOOR: f64 = 1e-13;

fn kernel_audit(b: &KernelAuditParams, seed: u64) -> Result<Outcome> {
    let n = b.kernel.n;
    let components: Vec<Component> = match (&b.kernel.component, b.kernel.family) {
        (Some(_), _) => vec![b.kernel.component()?],
        (None, KernelFamily::Majorant) => vec![Component::Second { i: 0, j: 0 }],
        (None, _) => (0..n).flat_map(|i| (i..n).map(move |j| Component::Second { i, j })).collect(),
    };
    let x = match &b.point {
        Some(p) => point(p, n, "audit point")?,
        None => SpaceTimePoint::origin(n),
    };
    let samples = dilation_samples(n, b.dilation_samples, seed);
    let mut orders = b.orders.clone();
    orders.sort_unstable();
    orders.dedup();
    let mut out = Outcome::default();
    let mut table = Table::new(
        "kernel_audit",
        &["kernel", "order", "nodes", "sphere_mean", "plain_sphere_mean", "homogeneity_defect", "l1_mass"],
    );
    let mut audits = Vec::new();
    for c in components {
        let k = b.kernel.build_component(c)?;
        let mut means = Vec::new();
        let mut last = None;
        for &order in &orders {
            let rule = sphere_rule(n + 1, order)?;
            let a = czk_audit(&k, &rule, &x, &samples);
            table.push(vec![
                a.kernel.clone(),
                order.to_string(),
                a.rule_nodes.to_string(),
                fmt(a.sphere_mean),
                fmt(a.plain_sphere_mean),
                fmt(a.homogeneity_defect),
                fmt(a.l1_mass),
            ]);
            means.push(a.sphere_mean.abs());
            last = Some(a.clone());
            audits.push(a);
        }
        let a = last.expect("orders is non-empty");
        let label = a.kernel.clone();
        if let Some(err) = &a.error {
            out.checks.push(Check::new(format!("{label}/evaluates"), false, err.as_str(), "no error"));
            continue;
        }
        out.checks.push(Check::at_most(format!("{label}/homogeneity"), a.homogeneity_defect, b.homogeneity_tol));
        out.checks.push(
            Check::at_most(format!("{label}/sphere-mean"), a.sphere_mean.abs(), b.mean_tol)
                .with_detail(format!("rule order {}", a.rule_order)),
        );
        let decreasing = means.windows(2).all(|w| w[1] < w[0] || w[1] <= MEAN_FLOOR);
        out.checks.push(
            Check::new(format!("{label}/mean-decreases-with-order"), decreasing, means.clone(), "decreasing")
                .with_detail(format!("orders {orders:?}, round-off floor {MEAN_FLOOR:e}")),
        );
    }
    out.result("point", x)?;
    out.result("audits", &audits)?;
    out.tables.push(table);
    Ok(out)
}

fn operator_bound(b: &OperatorBoundParams, seed: u64) -> Result<Outcome> {
    let n = b.kernel.n;
    if b.window.dim()? != n {
        return Err(Error::Config("window and kernel differ in dimension".into()));
    }
    let kernel = b.kernel.build()?;
    let centre = point(&b.battery.centre, n, "battery centre")?;
    let mut battery = standard_battery(centre, b.battery.radius)?;
    if let Some(only) = &b.battery.only {
        for name in only {
            if !battery.iter().any(|f| f.label() == name) {
                return Err(Error::UnknownCatalogEntry(name.clone()));
            }
        }
        battery.retain(|f| only.iter().any(|name| name == f.label()));
    }
    let lattices: Vec<Lattice> = b
        .levels
        .iter()
        .map(|&h| Lattice::parabolic(b.centering, &b.window.lo, &b.window.hi, h))
        .collect::<Result<_>>()?;
    let region = lattices[0].bounding_region();
    let sampler = b.sampler.build(&region, seed)?;
    let domain = MorreyDomain::within(region);
    let spec = |kind: NormKind, p: f64| -> Result<NormSpec> {
        Ok(NormSpec {
            kind,
            phi: WeightFunction::from_family(n, p, b.weight.clone())?,
            domain: domain.clone(),
            sampler: sampler.clone(),
        })
    };
    let (input, output) = if b.weak {
        (spec(NormKind::Strong { p: 1.0 }, 1.0)?, spec(NormKind::Weak, 1.0)?)
    } else {
        let s = spec(NormKind::Strong { p: b.p }, b.p)?;
        (s.clone(), s)
    };
    let coeffs = || b.coefficients.build(n);
    let symbol = || b.symbol.as_ref().expect("validated").build(n);
    let op = match b.operator {
        OperatorKind::Singular => OperatorSpec::Singular { kernel },
        OperatorKind::Commutator => OperatorSpec::Commutator { kernel, symbol: symbol()? },
        OperatorKind::Reflected => OperatorSpec::Reflected { kernel, coeffs: coeffs()? },
        OperatorKind::ReflectedCommutator => OperatorSpec::ReflectedCommutator {
            kernel,
            coeffs: coeffs()?,
            symbol: symbol()?,
        },
    };
    let rep = empirical_norm(&op, &battery, &input, &output, &lattices)?;
    let mut out = Outcome::default();
    let maxima: Vec<f64> = rep.levels.iter().map(|l| l.max).collect();
    out.checks.push(
        Check::at_most("ratio-drift", rep.drift, b.drift_tol)
            .with_detail(format!("per-level maxima {maxima:?}")),
    );
    let finite = rep.levels.iter().all(|l| l.ratios.iter().all(|r| r.ratio.is_finite()));
    out.checks.push(Check::new("ratios-finite", finite, rep.max, "finite"));
    let mut table = Table::new("ratios", &["level", "h", "nodes", "function", "input", "output", "ratio"]);
    for (k, l) in rep.levels.iter().enumerate() {
        for r in &l.ratios {
            table.push(vec![k.to_string(), fmt(l.h), l.nodes.to_string(), r.label.clone(), fmt(r.input), fmt(r.output), fmt(r.ratio)]);
        }
    }
    out.tables.push(table);
    if !rep.excluded.is_empty() {
        out.warnings.push(format!("excluded (zero input norm): {}", rep.excluded.join(", ")));
    }
    out.result("operator", &rep)?;

    let mut kappas = Vec::new();
    for spec in &b.comparability {
        let c = spec.build(n)?;
        let first = comparability_audit(&c, b.comparability_samples, seed)?;
        let label = format!("comparability/{}", c.label());
        let measured = json!([first.kappa1, first.kappa2]);
        if spec.is_identity() {
            let exact = first.kappa1 == 1.0 && first.kappa2 == 1.0;
            out.checks.push(Check::new(format!("{label}/exact"), exact, measured, json!([1.0, 1.0])));
        } else {
            let second = comparability_audit(&c, 4 * b.comparability_samples, seed.wrapping_add(1))?;
            let finite = first.kappa1 > 0.0 && first.kappa2.is_finite();
            out.checks.push(Check::new(format!("{label}/finite"), finite, measured, "0 < kappa1 <= kappa2 < inf"));
            let change = relative_error(first.kappa1, second.kappa1).max(relative_error(first.kappa2, second.kappa2));
            out.checks.push(
                Check::at_most(format!("{label}/stable"), change, 0.05)
                    .with_detail(format!("{} vs {} samples", first.samples, second.samples)),
            );
            kappas.push(second);
        }
        kappas.push(first);
    }
    if !kappas.is_empty() {
        out.result("comparability", &kappas)?;
    }
    Ok(out)
}

fn commutator_vmo(b: &CommutatorVmoParams) -> Result<Outcome> {
    let n = b.kernel.n;
    let kernel = b.kernel.build()?;
    let centre = point(&b.centre, n, "centre")?;
    let settings = VmoSettings {
        p: b.p,
        beta: b.beta,
        cells: b.cells,
        centres_per_axis: b.centres_per_axis,
        centering: b.centering,
    };
    let mut out = Outcome::default();
    let mut table = Table::new("vmo", &["symbol", "r0", "r", "max_ratio", "argmax"]);
    let mut tables = Vec::new();
    for (k, case) in b.symbols.iter().enumerate() {
        let symbol = case.symbol.build(n)?;
        let t = vmo_smallness_experiment(&kernel, &symbol, centre, &b.r0s, &settings)?;
        let maxima: Vec<f64> = t.rows.iter().map(|r| r.max_ratio).collect();
        let name = format!("symbol-{k} {}", t.symbol);
        let check = match case.expect {
            VmoExpectation::Vanishes => {
                let worst = maxima.iter().copied().fold(0.0, f64::max);
                Check::new(format!("{name}/vanishes"), worst == 0.0, worst, 0.0)
            }
            VmoExpectation::Decreasing => Check::new(
                format!("{name}/strictly-decreasing"),
                t.strictly_decreasing,
                maxima.clone(),
                "strictly decreasing",
            )
            .with_detail(format!("spearman {}", t.spearman)),
            VmoExpectation::NonDecaying => {
                let first = maxima[0];
                let last = *maxima.last().expect("r0s is non-empty");
                let decline = if first > 0.0 { (first - last) / first } else { f64::INFINITY };
                Check::at_most(format!("{name}/non-decaying"), decline, b.non_decay_tol)
                    .with_detail(format!("maxima {maxima:?}"))
            }
        };
        out.checks.push(check);
        for r in &t.rows {
            table.push(vec![t.symbol.clone(), fmt(r.r0), fmt(r.r), fmt(r.max_ratio), r.argmax.clone()]);
        }
        tables.push(t);
    }
    out.result("tables", &tables)?;
    out.tables.push(table);
    Ok(out)
}

fn representation(b: &RepresentationParams) -> Result<Outcome> {
    let n = b.n;
    let coeffs = b.coefficients.build(n)?;
    let centre = b.centre.clone().unwrap_or_else(|| vec![0.0; n]);
    if centre.len() != n {
        return Err(Error::Config(format!("bump centre needs {n} space coordinates")));
    }
    let v = bump_test_function(&centre, b.radius, b.t_end, b.boundary)?;
    let points: Vec<SpaceTimePoint> = b.points.iter().map(|p| point(p, n, "evaluation point")).collect::<Result<_>>()?;
    let mut out = Outcome::default();
    let mut table = Table::new("representation", &["h", "point", "i", "j", "lhs", "rhs", "relative", "qualifying"]);
    let mut errs = Vec::new();
    let mut audits = Vec::new();
    for &h in &b.levels {
        let cfg = PvConfig::for_spacing(h);
        let t = if b.boundary {
            boundary_representation_audit(&v, &coeffs, &points, &cfg)?
        } else {
            representation_audit(&v, &coeffs, &points, &cfg)?
        };
        for r in &t.rows {
            table.push(vec![
                fmt(h),
                format!("{:?}", (r.point.space(), r.point.time())),
                (r.i + 1).to_string(),
                (r.j + 1).to_string(),
                fmt(r.lhs),
                fmt(r.rhs),
                fmt(r.relative),
                r.qualifying.to_string(),
            ]);
        }
        let qualifying = t.rows.iter().filter(|r| r.qualifying).count();
        if qualifying == 0 {
            out.checks.push(Check::new(format!("h={h}/qualifying-rows"), false, 0, ">= 1"));
        }
        errs.push(t.max_relative);
        audits.push(t);
    }
    out.checks.push(
        Check::at_most("default-grid-relative-error", errs[0], b.rel_tol).with_detail(format!("h = {}", b.levels[0])),
    );
    if errs.len() > 1 {
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        out.checks.push(Check::new("strictly-decreasing-under-refinement", decreasing, errs.clone(), "strictly decreasing"));
    }
    out.result("audits", &audits)?;
    out.tables.push(table);
    Ok(out)
}

fn pde_verify(b: &PdeVerifyParams) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut table = Table::new("convergence", &["h", "max_error", "residual", "steps", "order"]);
    let (mut errs, mut residual): (Vec<f64>, f64) = (Vec::new(), 0.0);
    for (k, &h) in b.levels.iter().enumerate() {
        let inst = make_manufactured_in(&b.problem, b.n, GridSpec::parabolic(h))?;
        let exact = inst.exact.clone().expect("catalog problems carry their solution");
        let res = solve_cdp(&inst)?;
        let err = res.max_error(&exact);
        let order = if k > 0 { (errs[k - 1] / err).ln() / (b.levels[k - 1] / h).ln() } else { f64::NAN };
        table.push(vec![fmt(h), fmt(err), fmt(res.residual), res.steps.to_string(), if k > 0 { fmt(order) } else { String::new() }]);
        errs.push(err);
        residual = residual.max(res.residual);
    }
    let orders: Vec<f64> = (1..errs.len())
        .map(|k| (errs[k - 1] / errs[k]).ln() / (b.levels[k - 1] / b.levels[k]).ln())
        .collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    out.checks.push(Check::at_least("convergence-order", min_order, b.order_min).with_detail(format!("orders {orders:?}")));
    out.checks.push(Check::at_most("linear-residual", residual, b.residual_tol));
    let zero = make_manufactured_in(&b.problem, b.n, GridSpec::parabolic(b.levels[0]))?.with_rhs(ScalarField::zero(b.n));
    let res0 = solve_cdp(&zero)?;
    out.checks.push(Check::at_most("zero-rhs-sup", res0.fields.u.max_abs(), b.zero_tol));
    out.result("errors", &errs)?;
    out.result("orders", &orders)?;
    out.tables.push(table);
    Ok(out)
}

fn apriori(b: &AprioriParams, seed: u64) -> Result<Outcome> {
    let phi = WeightFunction::from_family(b.n, b.p, b.weight.clone())?;
    let mut rhs: Vec<(String, Option<ScalarField>)> = vec![("manufactured".into(), None)];
    if b.battery {
        for (src, f) in rhs_battery_sources(b.n)?.into_iter().zip(rhs_battery(b.n)?) {
            rhs.push((src, Some(f)));
        }
    }
    let mut out = Outcome::default();
    let mut table = Table::new("apriori", &["problem", "rhs", "h", "ratio", "solution_norm", "rhs_norm"]);
    let mut summary = Vec::new();
    for id in &b.problems {
        let (mut worst, mut worst_rhs) = (0.0f64, String::new());
        let mut structure_ok = true;
        let mut defect = 0.0f64;
        for (label, f) in &rhs {
            let mut ratios = Vec::new();
            for &h in &b.levels {
                let mut inst = make_manufactured_in(id, b.n, GridSpec::parabolic(h))?;
                if let Some(f) = f {
                    inst = inst.with_rhs(f.clone());
                }
                let sampler = b.sampler.build(&inst.region(), seed)?;
                let res = solve_cdp(&inst).map_err(|e| e.context(format!("{id}, rhs {label}, h = {h}")))?;
                let rep = apriori_report(&res, &inst, b.p, &phi, &sampler)?;
                let st = structure_check(&res, &inst, b.p, &phi, &sampler)?;
                structure_ok &= st.holds(b.structure_tol);
                defect = defect.max(st.pointwise_defect);
                for w in rep.warnings {
                    if !out.warnings.contains(&w) {
                        out.warnings.push(w);
                    }
                }
                table.push(vec![id.clone(), label.clone(), fmt(h), fmt(rep.ratio), fmt(rep.solution_norm), fmt(rep.rhs_norm)]);
                ratios.push(rep.ratio);
            }
            let drift = relative_drift(&ratios);
            if drift > worst || worst_rhs.is_empty() {
                worst = worst.max(drift);
                worst_rhs = label.clone();
            }
            summary.push(json!({ "problem": id, "rhs": label, "ratios": ratios, "drift": drift }));
        }
        out.checks.push(
            Check::at_most(format!("{id}/ratio-drift"), worst, b.drift_tol)
                .with_detail(format!("worst rhs `{worst_rhs}` over {} right-hand sides", rhs.len())),
        );
        out.checks.push(Check::new(format!("{id}/structure-inequality"), structure_ok, defect, b.structure_tol));
    }
    out.result("ratios", &summary)?;
    out.tables.push(table);
    Ok(out)
}
