use std::f64::consts::E;

use crate::error::{invalid, Result};
use crate::geometry::point::SpaceTimePoint;
use crate::geometry::region::Region;
use crate::spaces::ScalarField;

/// `exp(-1/(1-q))` normalised to 1 at `q = 0`, zero for `q >= 1`.
fn bump_profile(q: f64) -> f64 {
    if q < 1.0 {
        E * (-1.0 / (1.0 - q)).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 for `q <= lo`, 0 for `q >= hi`.
fn plateau_profile(q: f64, lo: f64, hi: f64) -> f64 {
    if q <= lo {
        return 1.0;
    }
    if q >= hi {
        return 0.0;
    }
    let s = (q - lo) / (hi - lo);
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    b / (a + b)
}

type Shape = Box<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

fn q_at(xi: &[f64], tau: f64, centre: &[f64], tc: f64, r: f64) -> f64 {
    let s: f64 = xi.iter().zip(centre).map(|(x, c)| (x - c).powi(2)).sum();
    (s + (tau - tc).powi(2)) / (r * r)
}

/// Unit-scale shapes, each supported in the Euclidean unit ball (= `E_1`) of `R^{n+1}`.
fn shapes(n: usize) -> Vec<(&'static str, Shape)> {
    let mut shift = vec![0.0; n];
    shift[0] = 0.45;
    let mut other = vec![0.0; n];
    other[0] = -0.45;
    let z = vec![0.0; n];
    let mut out: Vec<(&'static str, Shape)> = Vec::new();
    {
        let z = z.clone();
        out.push(("bump", Box::new(move |x, t| bump_profile(q_at(x, t, &z, 0.0, 1.0)))));
    }
    {
        let z = z.clone();
        out.push(("steep-bump", Box::new(move |x, t| {
            let q = q_at(x, t, &z, 0.0, 1.0);
            if q < 1.0 {
                (-4.0 * q / (1.0 - q)).exp()
            } else {
                0.0
            }
        })));
    }
    {
        let z = z.clone();
        out.push(("late-bump", Box::new(move |x, t| bump_profile(q_at(x, t, &z, 0.35, 0.6)))));
    }
    out.push(("anisotropic-x1", Box::new(move |x, t| {
        let mut q = x[0] * x[0] / 0.36 + t * t;
        q += x[1..].iter().map(|v| v * v).sum::<f64>();
        bump_profile(q)
    })));
    out.push(("thin-in-time", Box::new(move |x, t| {
        bump_profile(x.iter().map(|v| v * v).sum::<f64>() + t * t / 0.09)
    })));
    out.push(("thin-in-space", Box::new(move |x, t| {
        bump_profile(x.iter().map(|v| v * v).sum::<f64>() / 0.25 + t * t)
    })));
    {
        let z = z.clone();
        out.push(("plateau", Box::new(move |x, t| plateau_profile(q_at(x, t, &z, 0.0, 1.0), 0.5, 0.9))));
    }
    {
        let z = z.clone();
        out.push(("small-plateau", Box::new(move |x, t| plateau_profile(q_at(x, t, &z, 0.0, 1.0), 0.15, 0.4))));
    }
    {
        let z = z.clone();
        out.push(("oscillating-x1", Box::new(move |x, t| {
            bump_profile(q_at(x, t, &z, 0.0, 1.0)) * (3.0 * x[0]).cos()
        })));
    }
    {
        let z = z.clone();
        out.push(("oscillating-t", Box::new(move |x, t| {
            bump_profile(q_at(x, t, &z, 0.0, 1.0)) * (3.0 * t + 0.4).sin()
        })));
    }
    {
        let z = z.clone();
        out.push(("oscillating-diagonal", Box::new(move |x, t| {
            let phase: f64 = x.iter().enumerate().map(|(i, v)| (2.5 + i as f64) * v).sum();
            bump_profile(q_at(x, t, &z, 0.0, 1.0)) * (phase + 2.0 * t).cos()
        })));
    }
    out.push(("two-signed", Box::new(move |x, t| {
        bump_profile(q_at(x, t, &shift, 0.1, 0.45)) - 0.7 * bump_profile(q_at(x, t, &other, -0.1, 0.45))
    })));
    {
        let z = z.clone();
        out.push(("odd-x1", Box::new(move |x, t| 2.0 * x[0] * bump_profile(q_at(x, t, &z, 0.0, 1.0)))));
    }
    {
        let mut c = vec![0.0; n];
        c[n - 1] = 0.3;
        out.push(("off-centre", Box::new(move |x, t| bump_profile(q_at(x, t, &c, -0.4, 0.4)))));
    }
    out
}

/// Labels of the standard battery, in order.
pub fn battery_labels(n: usize) -> Vec<&'static str> {
    shapes(n).into_iter().map(|(l, _)| l).collect()
}

/// The standard battery placed in `E_r(centre)`: each unit shape `g` becomes
/// `f(y) = g(δ_{1/r}(y - centre))`, supported in `E_r(centre)`.
///
/// Fourteen smooth compactly supported functions: bumps, anisotropic bumps, mollified
/// plateaus, oscillatory bumps, a two-signed pair and an odd function.
pub fn standard_battery(centre: SpaceTimePoint, r: f64) -> Result<Vec<ScalarField>> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("battery radius must be positive"));
    }
    let n = centre.dim();
    let support = Region::ellipsoid(centre, r)?;
    Ok(shapes(n)
        .into_iter()
        .map(|(label, g)| {
            ScalarField::new(n, label, move |p| {
                let d = (*p - centre).dilate(1.0 / r);
                g(d.space(), d.time())
            })
            .with_support(support.clone())
        })
        .collect())
}
