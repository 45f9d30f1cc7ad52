use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::point::{SpaceTimePoint, MAX_SPACE_DIM};
use crate::spaces::{Centering, DerivativeBundle, GridField, Lattice, ScalarField};

use super::linalg::{bicgstab, BandedLu, CsrMatrix};
use super::problem::ProblemInstance;

/// Linear-solver knobs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual every time step must reach.
    pub tol: f64,
    /// Iteration cap of the BiCGSTAB fallback.
    pub max_iter: usize,
    /// Skip the banded LU and go straight to BiCGSTAB.
    pub force_iterative: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            force_iterative: false,
        }
    }
}

/// Nodal values of the solution and its discrete derivatives on the space-time lattice.
#[derive(Clone, Debug)]
pub struct DiscreteFields {
    pub u: GridField,
    pub du: Vec<GridField>,
    /// `D_ij u` for `i <= j`, row by row.
    pub d2u: Vec<GridField>,
    pub ut: GridField,
    /// The right-hand side sampled at the nodes.
    pub f: GridField,
}

impl DiscreteFields {
    pub fn d2(&self, i: usize, j: usize) -> &GridField {
        let n = self.du.len();
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &self.d2u[i * n - i * (i + 1) / 2 + j]
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub fields: DiscreteFields,
    pub bundle: DerivativeBundle,
    /// Largest relative residual `|b - Ax|/|b|` over all time steps.
    pub residual: f64,
    pub steps: usize,
    pub factorizations: usize,
    pub iterative_solves: usize,
    pub iterations: usize,
}

impl SolveResult {
    pub fn lattice(&self) -> &Lattice {
        self.fields.u.lattice()
    }

    /// `max |u - u*|` over all nodes.
    pub fn max_error(&self, exact: &ScalarField) -> f64 {
        let lat = self.lattice();
        self.fields
            .u
            .values()
            .par_iter()
            .enumerate()
            .map(|(i, v)| (v - exact.eval(&lat.point_of(i))).abs())
            .reduce(|| 0.0, f64::max)
    }
}

fn cells(extent: f64, step: f64, what: &str) -> Result<usize> {
    let c = extent / step;
    let r = c.round();
    if (c - r).abs() > 1e-9 * c.max(1.0) || r < 1.0 {
        return Err(invalid(format!("{what} extent {extent} is not a multiple of the step {step}")));
    }
    Ok(r as usize)
}

/// Vertex lattice of `Q̄` for the instance's grid.
pub fn solver_lattice(inst: &ProblemInstance) -> Result<Lattice> {
    let n = inst.dim();
    let mut counts = Vec::with_capacity(n + 1);
    for k in 0..n {
        let c = cells(inst.hi[k] - inst.lo[k], inst.grid.h, "space")?;
        if c < 4 {
            return Err(invalid("each space axis needs at least 4 cells"));
        }
        counts.push(c + 1);
    }
    counts.push(cells(inst.t_end, inst.grid.tau, "time")? + 1);
    let mut lo = inst.lo.clone();
    lo.push(0.0);
    let mut hi = inst.hi.clone();
    hi.push(inst.t_end);
    Lattice::new(Centering::Vertex, &lo, &hi, &counts)
}

/// Space part of the lattice: counts, strides (last axis fastest) and spacings.
struct SpaceGrid {
    n: usize,
    counts: Vec<usize>,
    strides: Vec<usize>,
    h: Vec<f64>,
    interior: Vec<usize>,
    istrides: Vec<usize>,
}

impl SpaceGrid {
    fn new(lat: &Lattice) -> Self {
        let n = lat.dim();
        let counts = lat.counts()[..n].to_vec();
        let mut strides = vec![1; n];
        let interior: Vec<usize> = counts.iter().map(|c| c - 2).collect();
        let mut istrides = vec![1; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
            istrides[k] = istrides[k + 1] * interior[k + 1];
        }
        Self {
            n,
            counts,
            strides,
            h: (0..n).map(|k| lat.spacing(k)).collect(),
            interior,
            istrides,
        }
    }

    fn len(&self) -> usize {
        self.counts.iter().product()
    }

    fn unknowns(&self) -> usize {
        self.interior.iter().product()
    }

    /// Multi-index of interior unknown `r` (indices into the full space grid).
    fn interior_index(&self, mut r: usize) -> [usize; MAX_SPACE_DIM] {
        let mut idx = [0; MAX_SPACE_DIM];
        for k in (0..self.n).rev() {
            idx[k] = r % self.interior[k] + 1;
            r /= self.interior[k];
        }
        idx
    }

    fn full_flat(&self, idx: &[usize]) -> usize {
        (0..self.n).map(|k| idx[k] * self.strides[k]).sum()
    }

    /// Unknown number of a full-grid multi-index, `None` on the boundary.
    fn unknown_of(&self, idx: &[isize]) -> Option<usize> {
        let mut r = 0;
        for k in 0..self.n {
            let i = idx[k];
            if i < 1 || i as usize > self.interior[k] {
                return None;
            }
            r += (i as usize - 1) * self.istrides[k];
        }
        Some(r)
    }
}

/// Row `r` of `I/τ - a^{ij}(x, t) D_ij^h` with the cross stencil for `i != j`.
fn assemble_row(g: &SpaceGrid, r: usize, a: &crate::coefficients::SymMatrix, tau: f64) -> Vec<(usize, f64)> {
    let n = g.n;
    let base = g.interior_index(r);
    let mut idx = [0isize; MAX_SPACE_DIM];
    for k in 0..n {
        idx[k] = base[k] as isize;
    }
    let mut row = Vec::with_capacity(1 + 2 * n + 2 * n * n);
    let mut diag = 1.0 / tau;
    for k in 0..n {
        let c = a.get(k, k) / (g.h[k] * g.h[k]);
        diag += 2.0 * c;
        for s in [-1isize, 1] {
            let mut j = idx;
            j[k] += s;
            if let Some(col) = g.unknown_of(&j[..n]) {
                row.push((col, -c));
            }
        }
    }
    row.push((r, diag));
    for k in 0..n {
        for l in k + 1..n {
            let c = a.get(k, l) / (2.0 * g.h[k] * g.h[l]);
            if c == 0.0 {
                continue;
            }
            for sk in [-1isize, 1] {
                for sl in [-1isize, 1] {
                    let mut j = idx;
                    j[k] += sk;
                    j[l] += sl;
                    if let Some(col) = g.unknown_of(&j[..n]) {
                        row.push((col, -c * (sk * sl) as f64));
                    }
                }
            }
        }
    }
    row
}

struct StepSolver<'a> {
    opts: &'a SolverOptions,
    lu: Option<BandedLu>,
    factorizations: usize,
    iterative_solves: usize,
    iterations: usize,
    residual: f64,
}

impl StepSolver<'_> {
    fn solve(&mut self, a: &CsrMatrix, b: &[f64], refactor: bool) -> Result<Vec<f64>> {
        if b.iter().all(|v| *v == 0.0) {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = vec![0.0; b.len()];
        let mut res = f64::INFINITY;
        if !self.opts.force_iterative {
            if refactor || self.lu.is_none() {
                self.lu = BandedLu::factor(a).ok();
                self.factorizations += 1;
            }
            if let Some(lu) = &self.lu {
                x = lu.solve(b);
                res = a.relative_residual(&x, b);
                if res > self.opts.tol {
                    // One step of iterative refinement.
                    let mut ax = vec![0.0; b.len()];
                    a.mul_vec(&x, &mut ax);
                    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
                    for (xi, d) in x.iter_mut().zip(lu.solve(&r)) {
                        *xi += d;
                    }
                    res = a.relative_residual(&x, b);
                }
            }
        }
        if res > self.opts.tol {
            let out = bicgstab(a, b, &mut x, 0.1 * self.opts.tol, self.opts.max_iter)?;
            self.iterative_solves += 1;
            self.iterations += out.iterations;
            res = out.residual;
            if res > self.opts.tol {
                return Err(Error::LinearSolve(format!("residual {res:e} above tolerance {:e}", self.opts.tol)));
            }
        }
        self.residual = self.residual.max(res);
        Ok(x)
    }
}

pub fn solve_cdp(inst: &ProblemInstance) -> Result<SolveResult> {
    solve_cdp_with(inst, &SolverOptions::default())
}

/// Implicit Euler in time, second-order central differences in space.
///
/// `u = 0` is imposed at `t = 0` and on `∂Ω`; only interior nodes are unknowns.
pub fn solve_cdp_with(inst: &ProblemInstance, opts: &SolverOptions) -> Result<SolveResult> {
    let lat = solver_lattice(inst)?;
    let n = lat.dim();
    let g = SpaceGrid::new(&lat);
    let steps = lat.counts()[n] - 1;
    let tau = lat.spacing(n);
    let nt = steps + 1;
    let nu = g.unknowns();
    let constant = inst.coeffs.as_constant();
    let node = |r: usize, t: f64| {
        let idx = g.interior_index(r);
        let x: Vec<f64> = (0..n).map(|k| lat.coord(k, idx[k])).collect();
        SpaceTimePoint::new(&x, t).expect("lattice point")
    };

    let mut u = vec![0.0; lat.len()];
    let mut prev = vec![0.0; nu];
    let mut solver = StepSolver {
        opts,
        lu: None,
        factorizations: 0,
        iterative_solves: 0,
        iterations: 0,
        residual: 0.0,
    };
    let mut matrix: Option<CsrMatrix> = None;
    for m in 1..=steps {
        let t = lat.coord(n, m);
        let refactor = constant.is_none() || matrix.is_none();
        if refactor {
            let rows: Vec<Vec<(usize, f64)>> = (0..nu)
                .into_par_iter()
                .map(|r| {
                    let p = node(r, t);
                    let a = inst.coeffs.at(&p);
                    inst.coeffs.check_on(std::iter::once(&p))?;
                    Ok(assemble_row(&g, r, &a, tau))
                })
                .collect::<Result<_>>()?;
            matrix = Some(CsrMatrix::from_rows(rows)?);
        }
        let a = matrix.as_ref().expect("assembled");
        let b: Vec<f64> = (0..nu)
            .into_par_iter()
            .map(|r| prev[r] / tau + inst.rhs.eval(&node(r, t)))
            .collect();
        if let Some(bad) = b.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("right-hand side is not finite at unknown {bad}, step {m}")));
        }
        let x = solver.solve(a, &b, refactor)?;
        for (r, v) in x.iter().enumerate() {
            let s = g.full_flat(&g.interior_index(r)[..n]);
            u[s * nt + m] = *v;
        }
        prev = x;
    }

    let f = lat.sample(|p| inst.rhs.eval(p));
    let fields = derivative_fields(&lat, &g, u, f)?;
    let bundle = DerivativeBundle::new(
        ScalarField::from_grid(fields.u.clone(), "u"),
        fields
            .du
            .iter()
            .enumerate()
            .map(|(k, d)| ScalarField::from_grid(d.clone(), format!("D{}u", k + 1)))
            .collect(),
        (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .map(|(i, j)| ScalarField::from_grid(fields.d2(i, j).clone(), format!("D{}{}u", i + 1, j + 1)))
            .collect(),
        ScalarField::from_grid(fields.ut.clone(), "ut"),
    )?;
    Ok(SolveResult {
        fields,
        bundle,
        residual: solver.residual,
        steps,
        factorizations: solver.factorizations,
        iterative_solves: solver.iterative_solves,
        iterations: solver.iterations,
    })
}

/// First derivative along space axis `k`: centred inside, second-order one-sided on the faces.
fn first_derivative(lat: &Lattice, v: &[f64], k: usize) -> Vec<f64> {
    let c = lat.counts()[k];
    let h = lat.spacing(k);
    let stride: usize = lat.counts()[k + 1..].iter().product();
    (0..v.len())
        .into_par_iter()
        .map(|i| {
            let j = (i / stride) % c;
            let at = |d: isize| v[(i as isize + d * stride as isize) as usize];
            if j == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if j == c - 1 {
                (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
            } else {
                (at(1) - at(-1)) / (2.0 * h)
            }
        })
        .collect()
}

/// Pure second derivative along space axis `k`: centred inside, four-point one-sided on the faces.
fn second_derivative(lat: &Lattice, v: &[f64], k: usize) -> Vec<f64> {
    let c = lat.counts()[k];
    let h2 = lat.spacing(k).powi(2);
    let stride: usize = lat.counts()[k + 1..].iter().product();
    (0..v.len())
        .into_par_iter()
        .map(|i| {
            let j = (i / stride) % c;
            let at = |d: isize| v[(i as isize + d * stride as isize) as usize];
            if j == 0 {
                (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2
            } else if j == c - 1 {
                (2.0 * at(0) - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) / h2
            } else {
                (at(1) - 2.0 * at(0) + at(-1)) / h2
            }
        })
        .collect()
}

/// Derivatives of the nodal solution. At interior nodes `D_ii` and `D_i(D_j u)` reproduce
/// the scheme's stencils exactly, and `u_t` is the backward difference the scheme used;
/// at `t = 0` it is `f(·, 0)` (the equation with `u(·, 0) = 0`), on `∂Ω` it is 0.
fn derivative_fields(lat: &Lattice, g: &SpaceGrid, u: Vec<f64>, f: GridField) -> Result<DiscreteFields> {
    let n = lat.dim();
    let nt = lat.counts()[n];
    let tau = lat.spacing(n);
    let du: Vec<Vec<f64>> = (0..n).map(|k| first_derivative(lat, &u, k)).collect();
    let mut d2u = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            d2u.push(if i == j {
                second_derivative(lat, &u, i)
            } else {
                first_derivative(lat, &du[j], i)
            });
        }
    }
    let fv = f.values();
    let ut: Vec<f64> = (0..u.len())
        .into_par_iter()
        .map(|i| {
            let m = i % nt;
            let s = i / nt;
            let on_face = (0..n).any(|k| {
                let j = (s / g.strides[k]) % g.counts[k];
                j == 0 || j == g.counts[k] - 1
            });
            if on_face {
                0.0
            } else if m == 0 {
                fv[i]
            } else {
                (u[i] - u[i - 1]) / tau
            }
        })
        .collect();
    debug_assert_eq!(g.len() * nt, u.len());
    let wrap = |v: Vec<f64>| GridField::new(lat.clone(), v);
    Ok(DiscreteFields {
        u: wrap(u)?,
        du: du.into_iter().map(wrap).collect::<Result<_>>()?,
        d2u: d2u.into_iter().map(wrap).collect::<Result<_>>()?,
        ut: wrap(ut)?,
        f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientField, SymMatrix};
    use crate::solver::problem::{make_manufactured_in, GridSpec};

    fn zero_rhs(id: &str, h: f64) -> ProblemInstance {
        let inst = make_manufactured_in(id, 2, GridSpec::parabolic(h)).unwrap();
        inst.with_rhs(ScalarField::zero(2))
    }

    #[test]
    fn zero_data_gives_the_zero_solution() {
        for id in ["identity-sine", "vmo-log"] {
            let r = solve_cdp(&zero_rhs(id, 0.125)).unwrap();
            assert!(r.fields.u.max_abs() <= 1e-10);
            assert_eq!(r.residual, 0.0);
        }
    }

    #[test]
    fn boundary_and_initial_values_are_exactly_zero() {
        let inst = make_manufactured_in("smooth-anisotropic", 2, GridSpec::parabolic(0.125)).unwrap();
        let r = solve_cdp(&inst).unwrap();
        let lat = r.lattice().clone();
        let c = lat.counts().to_vec();
        for (i, v) in r.fields.u.values().iter().enumerate() {
            let idx = lat.unflatten(i);
            let boundary = idx[2] == 0 || (0..2).any(|k| idx[k] == 0 || idx[k] == c[k] - 1);
            if boundary {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(r.residual <= 1e-10);
        assert_eq!(r.factorizations, r.steps);
    }

    #[test]
    fn identity_sine_error_is_second_order() {
        let mut errs = vec![];
        for h in [0.125, 0.0625] {
            let inst = make_manufactured_in("identity-sine", 2, GridSpec::parabolic(h)).unwrap();
            let r = solve_cdp(&inst).unwrap();
            assert_eq!(r.factorizations, 1);
            errs.push(r.max_error(inst.exact.as_ref().unwrap()));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "{errs:?}");
    }

    #[test]
    fn iterative_fallback_matches_the_direct_solve() {
        let m = SymMatrix::from_rows(&[vec![1.2, 0.4], vec![0.4, 0.9]]).unwrap();
        let coeffs = CoefficientField::constant(m, "c").unwrap();
        let base = make_manufactured_in("identity-sine", 2, GridSpec::parabolic(0.125)).unwrap();
        let rhs = crate::solver::problem::sine_rhs(&coeffs);
        let inst = ProblemInstance { coeffs, rhs, ..base };
        let direct = solve_cdp(&inst).unwrap();
        let opts = SolverOptions {
            force_iterative: true,
            ..SolverOptions::default()
        };
        let iter = solve_cdp_with(&inst, &opts).unwrap();
        assert!(iter.iterative_solves > 0 && iter.factorizations == 0);
        for (a, b) in direct.fields.u.values().iter().zip(iter.fields.u.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn one_sided_derivatives_are_exact_on_quadratics() {
        let lat = Lattice::new(Centering::Vertex, &[0.0, 0.0], &[1.0, 1.0], &[9, 3]).unwrap();
        let v = lat.sample(|p| 3.0 * p.space()[0].powi(2) - p.space()[0] + 2.0);
        let d = first_derivative(&lat, v.values(), 0);
        let dd = second_derivative(&lat, v.values(), 0);
        for (i, (a, b)) in d.iter().zip(&dd).enumerate() {
            let x = lat.point_of(i).space()[0];
            assert!((a - (6.0 * x - 1.0)).abs() < 1e-12);
            assert!((b - 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_must_fit_the_box() {
        let inst = make_manufactured_in("identity-sine", 2, GridSpec { h: 0.3, tau: 0.01 }).unwrap();
        assert!(solve_cdp(&inst).is_err());
    }
}
