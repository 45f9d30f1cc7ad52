use std::fmt;

use rayon::prelude::*;
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::point::SpaceTimePoint;

use super::function::WeightFunction;

/// A sampled constant, or the verdict that the quantity behind it is infinite.
///
/// Serializes as a number or the string `"DIVERGENT"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Witnessed {
    Finite(f64),
    Divergent,
}

impl Witnessed {
    pub fn value(self) -> Option<f64> {
        match self {
            Witnessed::Finite(v) => Some(v),
            Witnessed::Divergent => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Witnessed::Finite(_))
    }
}

impl fmt::Display for Witnessed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witnessed::Finite(v) => write!(f, "{v}"),
            Witnessed::Divergent => f.write_str("DIVERGENT"),
        }
    }
}

impl Serialize for Witnessed {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Witnessed::Finite(v) => s.serialize_f64(*v),
            Witnessed::Divergent => s.serialize_str("DIVERGENT"),
        }
    }
}

impl<'de> Deserialize<'de> for Witnessed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Witnessed;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"DIVERGENT\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Witnessed, E> {
                Ok(Witnessed::Finite(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Witnessed, E> {
                Ok(Witnessed::Finite(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Witnessed, E> {
                Ok(Witnessed::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Witnessed, E> {
                if v == "DIVERGENT" {
                    Ok(Witnessed::Divergent)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Which tail integral is tested against `φ(x, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `∫_r^∞ ψ(s) s^{-γ-1} ds <= C φ(x, r)`: boundedness of the singular integrals.
    A,
    /// The same with the extra factor `1 + ln(s/r)`: boundedness of the commutators.
    B,
}

/// Knobs of the tail-integral checkers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSettings {
    /// Truncation point of the `s` integral.
    pub s_max: f64,
    /// Log-grid nodes per decade of `s`.
    pub per_decade: usize,
    /// Relative growth over the last decade before `s_max` that counts as divergence.
    pub growth_threshold: f64,
}

impl CheckSettings {
    /// `s_max = 10^5 max(r_samples)`, 200 nodes per decade, 10% growth threshold.
    pub fn for_radii(r_samples: &[f64]) -> Self {
        let r_max = r_samples.iter().cloned().fold(0.0, f64::max);
        Self {
            s_max: 1e5 * r_max,
            per_decade: 200,
            growth_threshold: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub weight: String,
    /// `max LHS(x, r) / φ(x, r)` over the samples, or DIVERGENT.
    pub constant: Witnessed,
    pub witness: Option<(SpaceTimePoint, f64)>,
    pub r_samples: Vec<f64>,
    pub x_samples: usize,
    pub s_max: f64,
    /// Largest share of a sampled LHS contributed by the estimated tail beyond `s_max`.
    pub tail_fraction: f64,
    /// Largest relative growth of the truncated integral over its last decade.
    pub last_decade_growth: f64,
    /// How the inner essential operator is read.
    pub inner_operator: String,
}

impl ConditionReport {
    pub fn passes(&self) -> bool {
        self.constant.is_finite()
    }
}

struct Sample {
    ratio: f64,
    divergent: bool,
    tail_fraction: f64,
    growth: f64,
}

/// LHS of the condition at one `(x, r)`, divided by `φ(x, r)`.
fn sample(phi: &WeightFunction, cond: Condition, x: &SpaceTimePoint, r: f64, set: &CheckSettings) -> Result<Sample> {
    let gamma = (phi.dim() as f64 + 2.0) / phi.p();
    let phi_r = phi.checked(x, r)?;
    let du = std::f64::consts::LN_10 / set.per_decade as f64;
    let k_max = ((set.s_max / r).ln() / du).ceil().max(1.0) as usize;
    let du = (set.s_max / r).ln() / k_max as f64;
    // ψ is needed up to s_max; the inf over (s, ∞) is taken over the grid up to 10 s_max.
    let k_ext = k_max + set.per_decade;
    let mut psi = Vec::with_capacity(k_ext + 1);
    for k in 0..=k_ext {
        let s = r * (k as f64 * du).exp();
        psi.push(phi.checked(x, s)? * s.powf(gamma));
    }
    for k in (0..k_ext).rev() {
        psi[k] = psi[k].min(psi[k + 1]);
    }
    let factor = |k: usize| match cond {
        Condition::A => 1.0,
        Condition::B => 1.0 + k as f64 * du,
    };
    // Trapezoid rule in u = ln s for ∫ ψ(s) s^{-γ} du.
    let integrand = |k: usize| {
        let s = r * (k as f64 * du).exp();
        factor(k) * psi[k] * s.powf(-gamma)
    };
    let mut cumulative = vec![0.0; k_max + 1];
    let mut prev = integrand(0);
    for k in 1..=k_max {
        let cur = integrand(k);
        cumulative[k] = cumulative[k - 1] + 0.5 * du * (prev + cur);
        prev = cur;
    }
    let total = cumulative[k_max];
    let decade = set.per_decade.min(k_max);
    let earlier = cumulative[k_max - decade];
    let growth = if earlier > 0.0 {
        (total - earlier) / earlier
    } else if total > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    // Tail: ψ(s) ≈ ψ(S)(s/S)^κ fitted over the last decade.
    let psi_s = psi[k_max];
    let kappa = (psi_s / psi[k_max - decade]).ln() / (decade as f64 * du);
    let delta = gamma - kappa;
    let s = set.s_max;
    let (tail, tail_divergent) = if delta <= 1e-9 {
        (f64::INFINITY, true)
    } else {
        let base = psi_s * s.powf(-gamma);
        let t = match cond {
            Condition::A => base / delta,
            Condition::B => base * ((1.0 + (s / r).ln()) / delta + 1.0 / (delta * delta)),
        };
        (t, false)
    };
    let lhs = total + tail;
    Ok(Sample {
        ratio: lhs / phi_r,
        divergent: tail_divergent || growth >= set.growth_threshold,
        tail_fraction: if lhs > 0.0 { tail / lhs } else { 0.0 },
        growth,
    })
}

fn check(
    phi: &WeightFunction,
    cond: Condition,
    x_samples: &[SpaceTimePoint],
    r_samples: &[f64],
    set: &CheckSettings,
) -> Result<ConditionReport> {
    if x_samples.is_empty() || r_samples.is_empty() {
        return Err(invalid("condition check needs x and r samples"));
    }
    if let Some(r) = r_samples.iter().find(|r| !(**r > 0.0 && **r < set.s_max)) {
        return Err(invalid(format!("r sample {r} is not in (0, s_max = {})", set.s_max)));
    }
    if set.per_decade < 2 {
        return Err(invalid("per_decade must be at least 2"));
    }
    let pairs: Vec<(SpaceTimePoint, f64)> = x_samples
        .iter()
        .flat_map(|x| r_samples.iter().map(move |r| (*x, *r)))
        .collect();
    let results: Vec<Result<Sample>> = pairs.par_iter().map(|(x, r)| sample(phi, cond, x, *r, set)).collect();
    let mut best = 0.0f64;
    let mut witness = None;
    let mut divergent = false;
    let mut tail_fraction = 0.0f64;
    let mut growth = 0.0f64;
    for ((x, r), s) in pairs.iter().zip(results) {
        let s = s?;
        divergent |= s.divergent;
        tail_fraction = tail_fraction.max(s.tail_fraction);
        growth = growth.max(s.growth);
        if witness.is_none() || s.ratio > best {
            best = best.max(s.ratio);
            witness = Some((*x, *r));
        }
    }
    Ok(ConditionReport {
        condition: cond,
        weight: phi.label().to_string(),
        constant: if divergent || !best.is_finite() {
            Witnessed::Divergent
        } else {
            Witnessed::Finite(best)
        },
        witness,
        r_samples: r_samples.to_vec(),
        x_samples: x_samples.len(),
        s_max: set.s_max,
        tail_fraction,
        last_decade_growth: growth,
        inner_operator: "essential infimum of φ(x,ζ)ζ^{(n+2)/p} over ζ in (s, ∞)".into(),
    })
}

pub fn check_condition_a(
    phi: &WeightFunction,
    x_samples: &[SpaceTimePoint],
    r_samples: &[f64],
    settings: &CheckSettings,
) -> Result<ConditionReport> {
    check(phi, Condition::A, x_samples, r_samples, settings)
}

pub fn check_condition_b(
    phi: &WeightFunction,
    x_samples: &[SpaceTimePoint],
    r_samples: &[f64],
    settings: &CheckSettings,
) -> Result<ConditionReport> {
    check(phi, Condition::B, x_samples, r_samples, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radii() -> Vec<f64> {
        (0..9).map(|k| 1e-2 * 2f64.powi(k)).collect()
    }

    #[test]
    fn pure_power_matches_closed_form() {
        let phi = WeightFunction::power(2, 2.0, 1.0).unwrap();
        let x = [SpaceTimePoint::origin(2)];
        let set = CheckSettings::for_radii(&radii());
        let a = check_condition_a(&phi, &x, &radii(), &set).unwrap();
        let b = check_condition_b(&phi, &x, &radii(), &set).unwrap();
        // 1/δ and 1/δ + 1/δ² with δ = (n+2)/p - β = 1.
        assert!((a.constant.value().unwrap() - 1.0).abs() < 1e-4, "{:?}", a.constant);
        assert!((b.constant.value().unwrap() - 2.0).abs() < 1e-4, "{:?}", b.constant);
        let phi = WeightFunction::power(3, 1.5, 0.5).unwrap();
        let a = check_condition_a(&phi, &x.map(|_| SpaceTimePoint::origin(3)), &radii(), &set).unwrap();
        assert!((a.constant.value().unwrap() - 1.0 / (5.0 / 1.5 - 0.5)).abs() < 1e-4);
    }

    #[test]
    fn borderline_and_constant_weights_diverge() {
        let x = [SpaceTimePoint::origin(2)];
        let set = CheckSettings::for_radii(&radii());
        let edge = WeightFunction::power(2, 2.0, 2.0).unwrap();
        assert_eq!(check_condition_a(&edge, &x, &radii(), &set).unwrap().constant, Witnessed::Divergent);
        assert_eq!(check_condition_b(&edge, &x, &radii(), &set).unwrap().constant, Witnessed::Divergent);
        let one = WeightFunction::constant(2, 2.0, 1.0).unwrap();
        assert_eq!(check_condition_a(&one, &x, &radii(), &set).unwrap().constant, Witnessed::Divergent);
    }

    #[test]
    fn power_log_passes() {
        let x = [SpaceTimePoint::origin(2)];
        let set = CheckSettings::for_radii(&radii());
        let phi = WeightFunction::power_log(2, 2.0, 1.0, 1.0).unwrap();
        let a = check_condition_a(&phi, &x, &radii(), &set).unwrap();
        let b = check_condition_b(&phi, &x, &radii(), &set).unwrap();
        assert!(a.passes() && b.passes());
        assert!(a.constant.value().unwrap() <= b.constant.value().unwrap());
    }

    #[test]
    fn non_positive_weight_is_rejected() {
        let phi = WeightFunction::expression(1, 1.0, "r - 1").unwrap();
        let x = [SpaceTimePoint::origin(1)];
        assert!(check_condition_a(&phi, &x, &[0.5], &CheckSettings::for_radii(&[0.5])).is_err());
    }

    #[test]
    fn witnessed_serializes() {
        assert_eq!(serde_json::to_string(&Witnessed::Divergent).unwrap(), "\"DIVERGENT\"");
        assert_eq!(serde_json::to_string(&Witnessed::Finite(2.5)).unwrap(), "2.5");
        let w: Witnessed = serde_json::from_str("\"DIVERGENT\"").unwrap();
        assert_eq!(w, Witnessed::Divergent);
        let w: Witnessed = serde_json::from_str("3").unwrap();
        assert_eq!(w, Witnessed::Finite(3.0));
    }
}
