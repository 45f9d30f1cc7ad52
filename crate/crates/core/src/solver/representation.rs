use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientField;
use crate::error::{invalid, Result};
use crate::geometry::point::SpaceTimePoint;
use crate::geometry::reflection::reflection_row;
use crate::geometry::region::Region;
use crate::geometry::sphere::sphere_rule;
use crate::operators::{boundary_constants, reflected_apply, Component, Kernel, PvConfig, PvIntegrator, PvValue};
use crate::spaces::{DerivativeBundle, ScalarField};

/// `t_+^2 w(x)` with `w = (1 - |x - c|^2/R^2)_+^4`, or `w = x_n (1 - |x - c|^2/R^2)_+^4`
/// restricted to `x_n > 0` when `boundary` is set. Closed-form derivatives; support is the
/// box `(c - R, c + R) x (0, t_end)`, cut at `x_n = 0` in the boundary case.
pub fn bump_test_function(centre: &[f64], radius: f64, t_end: f64, boundary: bool) -> Result<DerivativeBundle> {
    let n = centre.len();
    if !(radius > 0.0 && t_end > 0.0) {
        return Err(invalid("test function needs a positive radius and end time"));
    }
    let lo: Vec<f64> = (0..n)
        .map(|k| {
            let a = centre[k] - radius;
            if boundary && k == n - 1 {
                a.max(0.0)
            } else {
                a
            }
        })
        .collect();
    let hi: Vec<f64> = centre.iter().map(|c| c + radius).collect();
    let support = Region::box_cylinder(&lo, &hi, 0.0, t_end)?;
    let c = centre.to_vec();
    let r2 = radius * radius;
    // Returns (w, Dw, D²w) at a space point.
    let jet = move |x: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
        let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        let q = 1.0 - d.iter().map(|v| v * v).sum::<f64>() / r2;
        let mut w = 0.0;
        let mut g = vec![0.0; n];
        let mut hs = vec![0.0; n * n];
        if q > 0.0 && !(boundary && x[n - 1] <= 0.0) {
            let b = q.powi(4);
            let bi: Vec<f64> = d.iter().map(|di| -8.0 * q.powi(3) * di / r2).collect();
            let bij = |i: usize, j: usize| {
                48.0 * q * q * d[i] * d[j] / (r2 * r2) - if i == j { 8.0 * q.powi(3) / r2 } else { 0.0 }
            };
            if boundary {
                let xn = x[n - 1];
                w = xn * b;
                for i in 0..n {
                    g[i] = xn * bi[i] + if i == n - 1 { b } else { 0.0 };
                    for j in 0..n {
                        let mut v = xn * bij(i, j);
                        if i == n - 1 {
                            v += bi[j];
                        }
                        if j == n - 1 {
                            v += bi[i];
                        }
                        hs[i * n + j] = v;
                    }
                }
            } else {
                w = b;
                g = bi;
                for i in 0..n {
                    for j in 0..n {
                        hs[i * n + j] = bij(i, j);
                    }
                }
            }
        }
        (w, g, hs)
    };
    let jet = std::sync::Arc::new(jet);
    let tp = |t: f64| t.max(0.0);
    let field = |label: String, f: Box<dyn Fn(&SpaceTimePoint) -> f64 + Send + Sync>| {
        ScalarField::new(n, label, f).with_support(support.clone())
    };
    let j = jet.clone();
    let u = field("v".into(), Box::new(move |p| tp(p.time()).powi(2) * j(p.space()).0));
    let du = (0..n)
        .map(|i| {
            let j = jet.clone();
            field(format!("D{}v", i + 1), Box::new(move |p| tp(p.time()).powi(2) * j(p.space()).1[i]))
        })
        .collect();
    let mut d2 = Vec::new();
    for a in 0..n {
        for b in a..n {
            let j = jet.clone();
            d2.push(field(
                format!("D{}{}v", a + 1, b + 1),
                Box::new(move |p| tp(p.time()).powi(2) * j(p.space()).2[a * n + b]),
            ));
        }
    }
    let j = jet.clone();
    let ut = field("vt".into(), Box::new(move |p| 2.0 * tp(p.time()) * j(p.space()).0));
    DerivativeBundle::new(u, du, d2, ut)
}

/// `P v = v_t - a^{hk} D_hk v` with variable coefficients.
pub fn apply_heat_operator(v: &DerivativeBundle, coeffs: &CoefficientField) -> ScalarField {
    let n = v.dim();
    let vb = v.clone();
    let a = coeffs.clone();
    let mut out = ScalarField::new(n, "Pv", move |p| {
        let m = a.at(p);
        let mut s = vb.ut.eval(p);
        for h in 0..n {
            for k in 0..n {
                s -= m.get(h, k) * vb.d2(h, k).eval(p);
            }
        }
        s
    });
    if let Some(s) = v.u.support() {
        out = out.with_support(s.clone());
    }
    out
}

/// `Σ_hk (a^{hk}(y) - a^{hk}(x)) D_hk v(y)` as a function of `y`.
fn commutator_density(v: &DerivativeBundle, coeffs: &CoefficientField, x: &SpaceTimePoint) -> ScalarField {
    let n = v.dim();
    let ax = coeffs.at(x);
    let vb = v.clone();
    let a = coeffs.clone();
    let mut out = ScalarField::new(n, "commutator density", move |p| {
        let m = a.at(p);
        let mut s = 0.0;
        for h in 0..n {
            for k in 0..n {
                let d = m.get(h, k) - ax.get(h, k);
                if d != 0.0 {
                    s += d * vb.d2(h, k).eval(p);
                }
            }
        }
        s
    });
    if let Some(s) = v.u.support() {
        out = out.with_support(s.clone());
    }
    out
}

/// One `(x, i, j)` comparison of the representation identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationRow {
    pub point: SpaceTimePoint,
    pub i: usize,
    pub j: usize,
    /// `D_ij v(x)` in closed form.
    pub lhs: f64,
    /// `P.V. ∫ Γ_ij(x; x - y) P v(y) dy`.
    pub singular: f64,
    /// `C_ij[a^{hk}, D_hk v](x)`; zero for constant coefficients.
    pub commutator: f64,
    /// `P v(x) ∫ Γ_j ν_i dσ`.
    pub boundary_term: f64,
    /// The half-space correction `I_ij(x)` (zero for interior audits).
    pub correction: f64,
    pub rhs: f64,
    /// `|lhs - rhs|`.
    pub residual: f64,
    /// `|lhs - rhs|` without the commutator term.
    pub residual_without_commutator: f64,
    pub relative: f64,
    /// `|D_ij v(x)|` is at least 10% of the largest sampled `|D_ij v|`.
    pub qualifying: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationTable {
    pub h: f64,
    pub eps: f64,
    pub coefficients: String,
    pub rows: Vec<RepresentationRow>,
    /// Largest relative error over qualifying rows (0 when none qualifies).
    pub max_relative: f64,
    pub max_residual: f64,
    pub max_residual_without_commutator: f64,
}

fn finish(h: f64, eps: f64, coefficients: String, mut rows: Vec<RepresentationRow>) -> RepresentationTable {
    let scale = rows.iter().map(|r| r.lhs.abs()).fold(0.0, f64::max);
    let (mut max_relative, mut max_residual, mut max_without) = (0.0f64, 0.0f64, 0.0f64);
    for r in &mut rows {
        r.qualifying = scale > 0.0 && r.lhs.abs() >= 0.1 * scale;
        if r.qualifying {
            max_relative = max_relative.max(r.relative);
        }
        max_residual = max_residual.max(r.residual);
        max_without = max_without.max(r.residual_without_commutator);
    }
    RepresentationTable {
        h,
        eps,
        coefficients,
        rows,
        max_relative,
        max_residual,
        max_residual_without_commutator: max_without,
    }
}

/// Interior representation identity
/// `D_ij v(x) = C_ij[a^{hk}, D_hk v](x) + K_ij(P v)(x) + P v(x) ∫_{S^n} Γ_j ν_i dσ`
/// with Gaussian kernels frozen at each `x`, for `i <= j` at every point.
///
/// `v` must declare its support (the far field of the principal values is integrated there).
pub fn representation_audit(
    v: &DerivativeBundle,
    coeffs: &CoefficientField,
    points: &[SpaceTimePoint],
    cfg: &PvConfig,
) -> Result<RepresentationTable> {
    audit(v, coeffs, points, cfg, false)
}

/// Half-space identity `D_ij u = C_ij + K_ij(P u) + P u c_ij - I_ij` for `u` vanishing on
/// `x_n = 0`, with `I_ij` from [`boundary_correction`].
pub fn boundary_representation_audit(
    u: &DerivativeBundle,
    coeffs: &CoefficientField,
    points: &[SpaceTimePoint],
    cfg: &PvConfig,
) -> Result<RepresentationTable> {
    audit(u, coeffs, points, cfg, true)
}

/// Richardson step on the truncation pair: the truncation error is a series in `ε^2`
/// (odd space moments cancel, time counts twice), so `(4 I(ε/2) - I(ε))/3` removes its
/// leading term.
fn extrapolated(v: PvValue) -> f64 {
    (4.0 * v.half_eps - v.value) / 3.0
}

fn audit(
    v: &DerivativeBundle,
    coeffs: &CoefficientField,
    points: &[SpaceTimePoint],
    cfg: &PvConfig,
    half_space: bool,
) -> Result<RepresentationTable> {
    let n = v.dim();
    if coeffs.dim() != n {
        return Err(invalid("coefficients and test function differ in dimension"));
    }
    let support = v
        .u
        .support()
        .ok_or_else(|| invalid("the test function must declare a compact support"))?
        .clone();
    let integ = PvIntegrator::new(n, *cfg, Some(&support))?;
    let rule = sphere_rule(n + 1, cfg.sphere_order.max(16))?;
    let pv = apply_heat_operator(v, coeffs);
    let variable = coeffs.as_constant().is_none();
    let per_point: Vec<Result<Vec<RepresentationRow>>> = points
        .par_iter()
        .map(|x| {
            let a = coeffs.at(x);
            let c = boundary_constants(&a, &rule)?;
            let pvx = pv.eval(x);
            let density = commutator_density(v, coeffs, x);
            let corr = if half_space {
                Some(boundary_correction(coeffs, v, x, cfg.h)?)
            } else {
                None
            };
            let mut rows = Vec::new();
            for i in 0..n {
                for j in i..n {
                    let k = Kernel::gaussian(coeffs.clone(), Component::Second { i, j })?;
                    let fk = k.frozen(x)?;
                    let singular = extrapolated(integ.integrate(&fk, k.degree(), &|y| pv.eval(y), x, true)?);
                    let commutator = if variable {
                        extrapolated(integ.integrate(&fk, k.degree(), &|y| density.eval(y), x, true)?)
                    } else {
                        0.0
                    };
                    let boundary_term = pvx * c[i][j];
                    let correction = corr.as_ref().map_or(0.0, |m| m.matrix[i][j]);
                    let lhs = v.d2(i, j).eval(x);
                    let rhs = singular + commutator + boundary_term - correction;
                    let residual = (lhs - rhs).abs();
                    rows.push(RepresentationRow {
                        point: *x,
                        i,
                        j,
                        lhs,
                        singular,
                        commutator,
                        boundary_term,
                        correction,
                        rhs,
                        residual,
                        residual_without_commutator: (lhs - rhs + commutator).abs(),
                        relative: if lhs != 0.0 { residual / lhs.abs() } else { residual },
                        qualifying: false,
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(finish(cfg.h, cfg.eps, coeffs.label().to_string(), rows))
}

/// The half-space correction and its parts at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCorrection {
    /// `I_ij(x)`.
    pub matrix: Vec<Vec<f64>>,
    /// `K̃_rl(P u)(x) = ∫ Γ_rl(x; T(x) - y) P u(y) dy`.
    pub reflected: Vec<Vec<f64>>,
    /// `C̃_rl[a^{hk}, D_hk u](x)`.
    pub commutator: Vec<Vec<f64>>,
    /// The first `n` entries of `∂T(x)/∂x_n`.
    pub row: Vec<f64>,
}

/// `I_ij(x)` assembled from reflected integrals:
/// `I_ij = K̃_ij + C̃_ij` for `i, j < n`, `I_in = I_ni = Σ_l (∂T/∂x_n)^l [C̃_il + K̃_il]`,
/// `I_nn = Σ_{r,l} (∂T/∂x_n)^r (∂T/∂x_n)^l [C̃_rl + K̃_rl]`.
///
/// The reflected integrals use midpoint quadrature of spacing `h` over the support of `u`.
pub fn boundary_correction(
    coeffs: &CoefficientField,
    u: &DerivativeBundle,
    x: &SpaceTimePoint,
    h: f64,
) -> Result<BoundaryCorrection> {
    let n = u.dim();
    if coeffs.dim() != n || x.dim() != n {
        return Err(invalid("coefficients, function and point differ in dimension"));
    }
    let pu = apply_heat_operator(u, coeffs);
    if pu.support().is_none() {
        return Err(invalid("the function must declare a compact support"));
    }
    let density = commutator_density(u, coeffs, x);
    let variable = coeffs.as_constant().is_none();
    let mut kt = vec![vec![0.0; n]; n];
    let mut ct = vec![vec![0.0; n]; n];
    for r in 0..n {
        for l in r..n {
            let k = Kernel::gaussian(coeffs.clone(), Component::Second { i: r, j: l })?;
            let kv = reflected_apply(&k, coeffs, &pu, x, h)?;
            let cv = if variable {
                reflected_apply(&k, coeffs, &density, x, h)?
            } else {
                0.0
            };
            kt[r][l] = kv;
            kt[l][r] = kv;
            ct[r][l] = cv;
            ct[l][r] = cv;
        }
    }
    let row: Vec<f64> = reflection_row(coeffs, x)?.into_iter().take(n).collect();
    let s = |r: usize, l: usize| kt[r][l] + ct[r][l];
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            m[i][j] = s(i, j);
        }
        let v: f64 = (0..n).map(|l| row[l] * s(i, l)).sum();
        m[i][n - 1] = v;
        m[n - 1][i] = v;
    }
    let mut nn = 0.0;
    for r in 0..n {
        for l in 0..n {
            nn += row[r] * row[l] * s(r, l);
        }
    }
    m[n - 1][n - 1] = nn;
    Ok(BoundaryCorrection {
        matrix: m,
        reflected: kt,
        commutator: ct,
        row,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::SymMatrix;
    use crate::geometry::sphere::gauss_legendre;
    use crate::operators::FrozenGaussian;

    fn pt(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x, t).unwrap()
    }

    #[test]
    fn test_function_derivatives_match_differences() {
        for boundary in [false, true] {
            let v = bump_test_function(&[0.1, if boundary { 0.0 } else { -0.2 }], 0.6, 0.5, boundary).unwrap();
            let x = pt(&[0.2, 0.15], 0.3);
            let d = 1e-5;
            let at = |f: &ScalarField, k: usize, s: f64| {
                let mut p = x;
                p.set_coord(k, p.coord(k) + s);
                f.eval(&p)
            };
            for i in 0..2 {
                let fd = (at(&v.u, i, d) - at(&v.u, i, -d)) / (2.0 * d);
                assert!((fd - v.du[i].eval(&x)).abs() < 1e-8);
                for j in 0..2 {
                    let fd = (at(&v.du[j], i, d) - at(&v.du[j], i, -d)) / (2.0 * d);
                    assert!((fd - v.d2(i, j).eval(&x)).abs() < 1e-7, "{i}{j}");
                }
            }
            let fd = (at(&v.u, 2, d) - at(&v.u, 2, -d)) / (2.0 * d);
            assert!((fd - v.ut.eval(&x)).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_function_gives_zero_table_and_matrix() {
        let s = Region::box_cylinder(&[-0.5, 0.0], &[0.5, 0.5], 0.0, 0.3).unwrap();
        let z = ScalarField::zero(2).with_support(s);
        let v = DerivativeBundle::new(z.clone(), vec![z.clone(); 2], vec![z.clone(); 3], z).unwrap();
        let id = CoefficientField::identity(2);
        let t = representation_audit(&v, &id, &[pt(&[0.0, 0.2], 0.2)], &PvConfig::for_spacing(0.05)).unwrap();
        assert!(t.rows.iter().all(|r| r.lhs == 0.0 && r.rhs == 0.0));
        assert_eq!(t.max_relative, 0.0);
        let m = boundary_correction(&id, &v, &pt(&[0.0, 0.2], 0.2), 0.05).unwrap();
        assert!(m.matrix.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_correction_uses_the_trivial_reflection_row() {
        let u = bump_test_function(&[0.0, 0.0], 0.5, 0.3, true).unwrap();
        let id = CoefficientField::identity(2);
        let x = pt(&[0.1, 0.15], 0.2);
        let b = boundary_correction(&id, &u, &x, 0.04).unwrap();
        assert_eq!(b.row, vec![0.0, -1.0]);
        assert_eq!(b.matrix[0][1], -(b.reflected[0][1] + b.commutator[0][1]));
        assert_eq!(b.matrix[0][1], b.matrix[1][0]);
        assert_eq!(b.matrix[1][1], b.reflected[1][1]);
    }

    #[test]
    fn identity_correction_matches_the_image_term() {
        // Image method for a = I: the correction is s_i s_j ∫ Γ_ij(x̃ - y) P u(y) dy with
        // s = (1, -1). Oracle: tensor Gauss–Legendre over the support.
        let u = bump_test_function(&[0.0, 0.0], 0.5, 0.25, true).unwrap();
        let id = CoefficientField::identity(2);
        let pu = apply_heat_operator(&u, &id);
        let g = FrozenGaussian::new(SymMatrix::identity(2)).unwrap();
        let x = pt(&[0.05, 0.12], 0.2);
        let xt = x.reflect();
        let b = boundary_correction(&id, &u, &x, 0.02).unwrap();
        let gx = gauss_legendre(40, -0.5, 0.5);
        let gy = gauss_legendre(40, 0.0, 0.5);
        let gt = gauss_legendre(40, 0.0, 0.2);
        let s = [1.0, -1.0];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for (y1, w1) in &gx {
                    for (y2, w2) in &gy {
                        for (t, wt) in &gt {
                            let y = pt(&[*y1, *y2], *t);
                            acc += w1 * w2 * wt * g.second(i, j, &(xt - y)) * pu.eval(&y);
                        }
                    }
                }
                let oracle = s[i] * s[j] * acc;
                let got = b.matrix[i][j];
                assert!((got - oracle).abs() < 0.03 * oracle.abs().max(0.05), "{i}{j}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn bump_identity_holds_and_improves() {
        let v = bump_test_function(&[0.0, 0.0], 0.5, 0.6, false).unwrap();
        let id = CoefficientField::identity(2);
        let pts = [pt(&[0.0, 0.0], 0.5), pt(&[0.15, -0.1], 0.4)];
        let coarse = representation_audit(&v, &id, &pts, &PvConfig::for_spacing(0.05)).unwrap();
        let fine = representation_audit(&v, &id, &pts, &PvConfig::for_spacing(0.035)).unwrap();
        assert!(fine.max_relative < coarse.max_relative, "{} {}", coarse.max_relative, fine.max_relative);
        assert!(fine.max_relative < 0.1, "{}", fine.max_relative);
        assert!(fine.rows.iter().all(|r| r.commutator == 0.0 && r.correction == 0.0));
    }

    #[test]
    fn half_space_identity_holds_for_coupled_coefficients() {
        let u = bump_test_function(&[0.0, 0.0], 0.5, 0.6, true).unwrap();
        let pts = [pt(&[0.0, 0.1], 0.5), pt(&[0.15, 0.2], 0.4)];
        let m = SymMatrix::from_rows(&[vec![1.0, 0.4], vec![0.4, 1.2]]).unwrap();
        let coupled = CoefficientField::constant(m, "coupled").unwrap();
        let coarse = boundary_representation_audit(&u, &coupled, &pts, &PvConfig::for_spacing(0.05)).unwrap();
        let fine = boundary_representation_audit(&u, &coupled, &pts, &PvConfig::for_spacing(0.035)).unwrap();
        assert!(fine.max_relative < coarse.max_relative && fine.max_relative < 0.03, "{}", fine.max_relative);
        assert!(fine.rows.iter().any(|r| r.i != r.j && r.correction.abs() > 0.01));
    }

    #[test]
    fn dropping_the_commutator_costs_order_delta() {
        let v = bump_test_function(&[0.0, 0.0], 0.5, 0.6, false).unwrap();
        let pts = [pt(&[0.0, 0.0], 0.5), pt(&[0.15, -0.1], 0.4)];
        let mut without = vec![];
        for d in [0.2, 0.1, 0.05] {
            let c = CoefficientField::perturbed_constant(SymMatrix::identity(2), d).unwrap();
            let t = representation_audit(&v, &c, &pts, &PvConfig::for_spacing(0.035)).unwrap();
            assert!(t.max_relative < 0.01, "{}", t.max_relative);
            without.push(t.max_residual_without_commutator - t.max_residual);
        }
        // Halving δ roughly halves the part of the residual the commutator accounts for.
        for w in without.windows(2) {
            let r = w[1] / w[0];
            assert!(r > 0.35 && r < 0.65, "{without:?}");
        }
    }
}
