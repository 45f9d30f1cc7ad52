use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::sphere::gauss_legendre;

use super::conditions::Witnessed;

/// `Hg(r) = r^{-1} ∫_0^r g(s) ds` by Gauss–Legendre on dyadic panels shrinking to 0.
///
/// Fails when the panel contributions stop decaying, i.e. `g` is not integrable at 0.
pub fn hardy_transform(g: impl Fn(f64) -> f64, r: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("Hardy transform needs r > 0, got {r}")));
    }
    let rule = gauss_legendre(16, 0.0, 1.0);
    let mut total = 0.0;
    let mut hi = r;
    let mut previous = f64::INFINITY;
    let mut rising = 0;
    for _ in 0..200 {
        let lo = hi * 0.5;
        let panel: f64 = rule.iter().map(|(u, w)| w * (hi - lo) * g(lo + u * (hi - lo))).sum();
        if !panel.is_finite() {
            return Err(Error::Weight("Hardy transform integrand is not finite".into()));
        }
        total += panel;
        if panel.abs() >= 0.99 * previous.abs() && panel != 0.0 {
            rising += 1;
            if rising >= 8 {
                return Err(Error::Weight("Hardy transform diverges at 0".into()));
            }
        } else {
            rising = 0;
        }
        previous = panel;
        if total != 0.0 && panel.abs() <= 1e-17 * total.abs() {
            break;
        }
        hi = lo;
    }
    if previous.abs() > 1e-12 * total.abs().max(1e-300) {
        return Err(Error::Weight("Hardy transform did not converge at 0".into()));
    }
    Ok(total / r)
}

/// Right-continuous-from-the-left step function on `(0, ∞)`: `values[k]` on
/// `(breaks[k-1], breaks[k]]` with `breaks[-1] = 0`, and the last value on `(breaks[last], ∞)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(invalid("step function needs one more value than breaks"));
        }
        if breaks.first().is_some_and(|b| !(*b > 0.0)) || breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("step breaks must be positive and increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("step values must be finite"));
        }
        Ok(Self { breaks, values })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_non_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    fn piece(&self, s: f64) -> usize {
        self.breaks.partition_point(|b| *b < s)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.values[self.piece(s)]
    }

    /// `∫_0^r g`, exactly.
    pub fn integral_to(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        let mut left = 0.0;
        for (b, v) in self.breaks.iter().zip(&self.values) {
            if *b >= r {
                return acc + v * (r - left);
            }
            acc += v * (b - left);
            left = *b;
        }
        acc + self.values.last().unwrap() * (r - left)
    }

    pub fn hardy(&self, r: f64) -> f64 {
        self.integral_to(r) / r
    }
}

type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Weights `w, v > 0` of a Hardy inequality `sup w Hg <= A sup v g` over non-increasing `g`.
#[derive(Clone)]
pub struct HardyPair {
    w: RadialFn,
    v: RadialFn,
    label: String,
}

impl fmt::Debug for HardyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HardyPair").field("label", &self.label).finish()
    }
}

impl HardyPair {
    pub fn new(
        label: impl Into<String>,
        w: impl Fn(f64) -> f64 + Send + Sync + 'static,
        v: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            w: Arc::new(w),
            v: Arc::new(v),
            label: label.into(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn w(&self, r: f64) -> f64 {
        (self.w)(r)
    }

    pub fn v(&self, r: f64) -> f64 {
        (self.v)(r)
    }

    /// Both weights multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let (w, v) = (self.w.clone(), self.v.clone());
        Self {
            w: Arc::new(move |r| c * w(r)),
            v: Arc::new(move |r| c * v(r)),
            label: format!("{c}*({})", self.label),
        }
    }
}

/// Nodes per decade of the refinement on which `sup_{(0,s)} v` is sampled.
pub const HARDY_PER_DECADE: usize = 1000;

/// Refinement of an `r` grid reaching three decades below its smallest point.
#[derive(Clone, Debug)]
struct Refinement {
    nodes: Vec<f64>,
}

impl Refinement {
    fn new(r_grid: &[f64]) -> Result<Self> {
        if r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid("Hardy r grid must be non-empty and positive"));
        }
        let r_min = r_grid.iter().cloned().fold(f64::INFINITY, f64::min);
        let r_max = r_grid.iter().cloned().fold(0.0, f64::max);
        let lo = r_min * 1e-3;
        let steps = ((r_max / lo).log10() * HARDY_PER_DECADE as f64).ceil().max(1.0) as usize;
        let mut nodes: Vec<f64> = (0..=steps)
            .map(|k| lo * (r_max / lo).powf(k as f64 / steps as f64))
            .chain(r_grid.iter().copied())
            .collect();
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        Ok(Self { nodes })
    }
}

/// `(w(r)/r) ∫_0^r ds / sup_{(0,s)} v` on every node of a refinement.
///
/// On each refinement cell the integrand is bounded by its value at the left node (the
/// running maximum of `v` can only grow), so the sum bounds the integral from above.
/// Below the first node `sup v` is extrapolated as a power law fitted over one decade.
fn hardy_profile(pair: &HardyPair, nodes: &[f64]) -> Result<Vec<Witnessed>> {
    let mut running = Vec::with_capacity(nodes.len());
    let mut m = 0.0f64;
    for s in nodes {
        let v = pair.v(*s);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Weight(format!("v is not positive at r = {s}: {v}")));
        }
        m = m.max(v);
        running.push(m);
    }
    let lo = nodes[0];
    let j = nodes.partition_point(|s| *s < 10.0 * lo).min(nodes.len() - 1);
    let head = if j == 0 {
        lo / running[0]
    } else {
        let kappa = (running[j] / running[0]).ln() / (nodes[j] / lo).ln();
        if kappa >= 1.0 - 1e-9 {
            f64::INFINITY
        } else {
            lo / (running[0] * (1.0 - kappa))
        }
    };
    let mut out = Vec::with_capacity(nodes.len());
    let mut integral = head;
    out.push(integral);
    for k in 1..nodes.len() {
        integral += (nodes[k] - nodes[k - 1]) / running[k - 1];
        out.push(integral);
    }
    Ok(nodes
        .iter()
        .zip(out)
        .map(|(r, i)| {
            if i.is_finite() {
                Witnessed::Finite(pair.w(*r) / r * i)
            } else {
                Witnessed::Divergent
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyConstant {
    /// `A` with the existential constant normalised to 1.
    pub value: Witnessed,
    pub witness_r: Option<f64>,
    pub r_grid: Vec<f64>,
    pub inner_operator: String,
}

/// `A = sup_{r in grid} (w(r)/r) ∫_0^r ds / sup_{(0,s)} v`.
pub fn hardy_constant(pair: &HardyPair, r_grid: &[f64]) -> Result<HardyConstant> {
    let refinement = Refinement::new(r_grid)?;
    let profile = hardy_profile(pair, &refinement.nodes)?;
    let mut best = Witnessed::Finite(0.0);
    let mut witness_r = None;
    for r in r_grid {
        let k = refinement.nodes.partition_point(|s| s < r);
        match profile[k] {
            Witnessed::Divergent => {
                best = Witnessed::Divergent;
                witness_r = Some(*r);
                break;
            }
            Witnessed::Finite(v) => {
                if witness_r.is_none() || best.value().is_some_and(|b| v > b) {
                    best = Witnessed::Finite(v);
                    witness_r = Some(*r);
                }
            }
        }
    }
    Ok(HardyConstant {
        value: best,
        witness_r,
        r_grid: r_grid.to_vec(),
        inner_operator: "essential supremum of v over (0, s)".into(),
    })
}

/// Both sides of the Hardy inequality for one step function, measured on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyTrial {
    /// `sup_r w(r) Hg(r)` over the grid.
    pub lhs: f64,
    /// `sup v g` over the pieces of `g`, sampled on the refinement and the breaks.
    pub rhs: f64,
}

/// `sup v g` for a step function: on each piece the sup of `v` is sampled at the refinement
/// nodes inside it and at both ends.
pub fn weighted_sup(pair: &HardyPair, g: &StepFunction, r_grid: &[f64]) -> Result<f64> {
    let refinement = Refinement::new(r_grid)?;
    let mut sup = 0.0f64;
    let mut left = refinement.nodes[0];
    let r_max = *refinement.nodes.last().unwrap();
    let ends: Vec<f64> = g.breaks.iter().copied().filter(|b| *b > left && *b < r_max).chain([r_max]).collect();
    let mut k = 0;
    for right in ends {
        let value = g.eval(right);
        let mut vmax = pair.v(left).max(pair.v(right));
        while k < refinement.nodes.len() && refinement.nodes[k] <= right {
            if refinement.nodes[k] >= left {
                vmax = vmax.max(pair.v(refinement.nodes[k]));
            }
            k += 1;
        }
        sup = sup.max(vmax * value.abs());
        left = right;
    }
    Ok(sup)
}

pub fn hardy_trial(pair: &HardyPair, g: &StepFunction, r_grid: &[f64]) -> Result<HardyTrial> {
    let lhs = r_grid.iter().map(|r| pair.w(*r) * g.hardy(*r)).fold(0.0, f64::max);
    Ok(HardyTrial {
        lhs,
        rhs: weighted_sup(pair, g, r_grid)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..25).map(|k| 1e-2 * 10f64.powf(k as f64 / 8.0)).collect()
    }

    #[test]
    fn transform_of_closed_forms() {
        assert!((hardy_transform(|_| 3.0, 0.7).unwrap() - 3.0).abs() < 1e-13);
        assert!((hardy_transform(|s| s, 2.0).unwrap() - 1.0).abs() < 1e-13);
        assert!((hardy_transform(|s| s.powf(-0.5), 1.0).unwrap() - 2.0).abs() < 1e-10);
        assert!((hardy_transform(|s| (s <= 1.0) as u8 as f64, 2.0).unwrap() - 0.5).abs() < 1e-13);
        assert!(hardy_transform(|s| 1.0 / s, 1.0).is_err());
        assert!(hardy_transform(|s| 1.0 / s.powf(1.2), 1.0).is_err());
    }

    #[test]
    fn step_functions_integrate_exactly() {
        let g = StepFunction::new(vec![1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(g.hardy(2.0), 0.5);
        assert_eq!(g.eval(1.0), 1.0);
        assert_eq!(g.eval(1.5), 0.0);
        let g = StepFunction::new(vec![0.5, 2.0], vec![4.0, 2.0, 1.0]).unwrap();
        assert_eq!(g.integral_to(3.0), 2.0 + 3.0 + 1.0);
        assert_eq!(g.integral_to(0.25), 1.0);
        assert!(g.is_non_increasing());
        assert!(StepFunction::new(vec![2.0, 1.0], vec![1.0; 3]).is_err());
    }

    #[test]
    fn constants_of_simple_pairs() {
        let one = HardyPair::new("1,1", |_| 1.0, |_| 1.0);
        let a = hardy_constant(&one, &grid()).unwrap();
        assert!((a.value.value().unwrap() - 1.0).abs() < 1e-12);
        let half = HardyPair::new("1,2", |_| 1.0, |_| 2.0);
        assert!((hardy_constant(&half, &grid()).unwrap().value.value().unwrap() - 0.5).abs() < 1e-12);
        let sqrt = HardyPair::new("sqrt", f64::sqrt, f64::sqrt);
        let a = hardy_constant(&sqrt, &grid()).unwrap().value.value().unwrap();
        assert!(a >= 2.0 && a < 2.0 * 1.002, "{a}");
        let lin = HardyPair::new("r", |r| r, |r| r);
        assert_eq!(hardy_constant(&lin, &grid()).unwrap().value, Witnessed::Divergent);
        let zero = HardyPair::new("0", |_| 1.0, |_| 0.0);
        assert!(hardy_constant(&zero, &grid()).is_err());
    }

    #[test]
    fn extremal_step_nearly_attains_the_constant() {
        let pair = HardyPair::new("sqrt", f64::sqrt, f64::sqrt);
        let r = grid();
        let a = hardy_constant(&pair, &r).unwrap().value.value().unwrap();
        // g = 1/v sampled from above at the right ends of a fine partition.
        let breaks: Vec<f64> = (0..400).map(|k| 1e-5 * 10f64.powf(k as f64 / 60.0)).collect();
        let mut values: Vec<f64> = breaks.iter().map(|b| 1.0 / b.sqrt()).collect();
        values.push(0.0);
        let g = StepFunction::new(breaks, values).unwrap();
        let t = hardy_trial(&pair, &g, &r).unwrap();
        assert!((t.rhs - 1.0).abs() < 1e-12);
        assert!(t.lhs <= a * (1.0 + 1e-6));
        assert!(t.lhs >= 0.95 * a, "{} {a}", t.lhs);
    }
}
