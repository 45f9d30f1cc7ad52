use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientField;
use crate::error::{invalid, Result};
use crate::geometry::grid::build_grid;
use crate::geometry::point::{rho, SpaceTimePoint};
use crate::geometry::reflection::{generalized_reflection, reflect_with};
use crate::spaces::{GridField, Lattice, ScalarField};

use super::kernel::Kernel;
use super::lattice_op::{offset_point, FftPlan, LatticeMode};

fn upper(x: &SpaceTimePoint) -> Result<()> {
    let n = x.dim();
    if x.space()[n - 1] < 0.0 {
        return Err(invalid("reflected operators are evaluated in the upper half-space"));
    }
    Ok(())
}

fn reflected_integral(
    k: &Kernel,
    coeffs: &CoefficientField,
    f: &ScalarField,
    x: &SpaceTimePoint,
    h: f64,
    bracket: impl Fn(&SpaceTimePoint) -> f64,
) -> Result<f64> {
    upper(x)?;
    let support = f
        .support()
        .ok_or_else(|| invalid("reflected operators need a compactly supported f"))?;
    let tx = generalized_reflection(coeffs, x)?;
    let fk = k.frozen(x)?;
    let grid = build_grid(support, h)?;
    let mut s = 0.0;
    for (y, w) in grid.iter() {
        let b = bracket(y);
        if b == 0.0 {
            continue;
        }
        let fy = f.eval(y);
        if fy != 0.0 {
            s += w * fk.eval(&(tx - *y)) * b * fy;
        }
    }
    Ok(s)
}

/// `∫ K(x, T(x) - y) f(y) dy` by midpoint quadrature of spacing `h` over the support of `f`.
///
/// `T(x)` lies in the lower half-space, so the integrand is bounded for `x_n > 0`.
pub fn reflected_apply(k: &Kernel, coeffs: &CoefficientField, f: &ScalarField, x: &SpaceTimePoint, h: f64) -> Result<f64> {
    reflected_integral(k, coeffs, f, x, h, |_| 1.0)
}

/// `∫ K(x, T(x) - y) [a(y) - a(x)] f(y) dy`.
pub fn reflected_commutator(
    k: &Kernel,
    coeffs: &CoefficientField,
    a: &ScalarField,
    f: &ScalarField,
    x: &SpaceTimePoint,
    h: f64,
) -> Result<f64> {
    let ax = a.eval(x);
    reflected_integral(k, coeffs, f, x, h, |y| a.eval(y) - ax)
}

/// `∫ |b(x) - b(y)| |f(y)| ρ(x̃ - y)^{-(n+2)} dy` (without `b`, the plain majorant).
pub fn reflected_majorant(f: &ScalarField, b: Option<&ScalarField>, x: &SpaceTimePoint, h: f64) -> Result<f64> {
    upper(x)?;
    let support = f
        .support()
        .ok_or_else(|| invalid("reflected operators need a compactly supported f"))?;
    let n = x.dim();
    let xt = x.reflect();
    let bx = b.map(|b| b.eval(x));
    let grid = build_grid(support, h)?;
    let mut s = 0.0;
    for (y, w) in grid.iter() {
        let d = match (b, bx) {
            (Some(b), Some(bx)) => (b.eval(y) - bx).abs(),
            _ => 1.0,
        };
        if d == 0.0 {
            continue;
        }
        let r = rho(&(xt - *y));
        if r > 0.0 {
            s += w * d * f.eval(y).abs() * r.powi(-(n as i32 + 2));
        }
    }
    Ok(s)
}

/// Measured constants of `κ₁ ρ(x̃ - y) <= ρ(T(x) - y) <= κ₂ ρ(x̃ - y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparability {
    pub kappa1: f64,
    pub kappa2: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Samples `x, y` uniformly in `[-1, 1]^{n-1} × (0, 1] × [-1, 1]` and records the extreme
/// ratios `ρ(T(x) - y) / ρ(x̃ - y)`.
///
/// The best few samples on each side are then polished by a compass search inside the
/// sampling box, so the extremes converge quickly as `samples` grows.
pub fn comparability_audit(coeffs: &CoefficientField, samples: usize, seed: u64) -> Result<Comparability> {
    if samples == 0 {
        return Err(invalid("comparability audit needs at least one sample"));
    }
    let n = coeffs.dim();
    let d = 2 * (n + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratio = |z: &[f64]| -> Result<f64> {
        let x = SpaceTimePoint::from_coords(&z[..=n]).expect("dimension checked");
        let y = SpaceTimePoint::from_coords(&z[n + 1..]).expect("dimension checked");
        let tx = reflect_with(&coeffs.at(&x), &x)?;
        let den = rho(&(x.reflect() - y));
        Ok(rho(&(tx - y)) / den)
    };
    let mut low: Vec<(f64, [f64; 8])> = Vec::with_capacity(POLISHED + 1);
    let mut high: Vec<(f64, [f64; 8])> = Vec::with_capacity(POLISHED + 1);
    for _ in 0..samples {
        let mut z = [0.0; 8];
        for (k, v) in z.iter_mut().enumerate().take(d) {
            *v = if k % (n + 1) == n - 1 {
                1.0 - rng.gen::<f64>()
            } else {
                rng.gen_range(-1.0..1.0)
            };
        }
        let r = ratio(&z[..d])?;
        keep(&mut low, (r, z), |a, b| a < b);
        keep(&mut high, (r, z), |a, b| a > b);
    }
    let mut k1 = f64::INFINITY;
    let mut k2 = 0.0f64;
    for (r, z) in low {
        k1 = k1.min(polish(n, z, r, -1.0, &ratio)?);
    }
    for (r, z) in high {
        k2 = k2.max(polish(n, z, r, 1.0, &ratio)?);
    }
    Ok(Comparability {
        kappa1: k1,
        kappa2: k2,
        samples,
        seed,
    })
}

/// Candidates per side handed to [`polish`].
const POLISHED: usize = 8;

/// Keeps the `POLISHED` best entries of `list` under `better`, best first.
fn keep(list: &mut Vec<(f64, [f64; 8])>, item: (f64, [f64; 8]), better: impl Fn(f64, f64) -> bool) {
    if list.len() == POLISHED && !better(item.0, list[POLISHED - 1].0) {
        return;
    }
    let at = list.iter().position(|e| better(item.0, e.0)).unwrap_or(list.len());
    list.insert(at, item);
    list.truncate(POLISHED);
}

/// Compass search for a larger `sign · ratio` within the sampling box; steps halve from 1/8 to 1e-7.
fn polish(
    n: usize,
    mut z: [f64; 8],
    mut best: f64,
    sign: f64,
    ratio: &impl Fn(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let d = 2 * (n + 1);
    let mut step = 0.125;
    while step > 1e-7 {
        let mut moved = false;
        for k in 0..d {
            for dir in [1.0, -1.0] {
                let mut c = z;
                let (lo, hi) = if k % (n + 1) == n - 1 { (1e-9, 1.0) } else { (-1.0, 1.0) };
                c[k] = (c[k] + dir * step).clamp(lo, hi);
                if c[k] == z[k] {
                    continue;
                }
                let r = ratio(&c[..d])?;
                if r.is_finite() && sign * r > sign * best {
                    best = r;
                    z = c;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok(best)
}

enum Engine {
    /// Frozen matrix `a` and `b_i = a^{ni}/a^{nn}`.
    Slices { plan: FftPlan, b: Vec<f64> },
    Direct,
}

/// Memory allowed for the input transforms cached by one slice-FFT chunk.
const HAT_CACHE_BYTES: usize = 768 << 20;

/// `f ↦ Σ_j K(x_i, T(x_i) - x_j) ω_j f_j` on a lattice in the closed upper half-space.
///
/// With constant coefficients the sum is a convolution in `(x', t)` for every pair of
/// `x_n` layers, so it runs as one FFT per layer pair.
pub struct ReflectedOperator {
    kernel: Kernel,
    coeffs: CoefficientField,
    lattice: Lattice,
    weights: Vec<f64>,
    engine: Engine,
}

impl ReflectedOperator {
    pub fn new(kernel: Kernel, coeffs: CoefficientField, lattice: Lattice, mode: LatticeMode) -> Result<Self> {
        let n = lattice.dim();
        if kernel.dim() != n || coeffs.dim() != n {
            return Err(invalid("kernel, coefficients and lattice differ in dimension"));
        }
        if lattice.lo()[n - 1] < 0.0 {
            return Err(invalid("reflected lattices must lie in x_n >= 0"));
        }
        let constant = kernel.is_translation_invariant() && coeffs.as_constant().is_some();
        let slices = match mode {
            LatticeMode::Auto => constant,
            LatticeMode::Fft if !constant => {
                return Err(invalid("slice FFT needs constant coefficients"));
            }
            LatticeMode::Fft => true,
            LatticeMode::Direct => false,
        };
        let engine = if slices {
            let a = coeffs.as_constant().expect("checked constant");
            let ann = a.get(n - 1, n - 1);
            let b = (0..n - 1).map(|i| a.get(n - 1, i) / ann).collect();
            let dims: Vec<usize> = (0..=n).filter(|&k| k != n - 1).map(|k| lattice.counts()[k]).collect();
            Engine::Slices {
                plan: FftPlan::new(&dims)?,
                b,
            }
        } else {
            Engine::Direct
        };
        let weights = (0..lattice.len()).map(|i| lattice.weight_of(i)).collect();
        Ok(Self {
            kernel,
            coeffs,
            lattice,
            weights,
            engine,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn uses_fft(&self) -> bool {
        matches!(self.engine, Engine::Slices { .. })
    }

    /// Flat lattice index from a slice index (axes other than `x_n`) and an `x_n` layer.
    fn flat(&self, sub: usize, layer: usize) -> usize {
        let n = self.lattice.dim();
        let counts = self.lattice.counts();
        let mut idx = [0usize; 4];
        let mut rem = sub;
        for k in (0..=n).rev() {
            if k == n - 1 {
                continue;
            }
            idx[k] = rem % counts[k];
            rem /= counts[k];
        }
        idx[n - 1] = layer;
        self.lattice.index(&idx[..=n])
    }

    /// `Σ_j K(T x_i - x_j) g_j` for each input `g` (already multiplied by the weights).
    ///
    /// Kernel transforms are shared by all inputs of a chunk; chunks keep the cached input
    /// transforms under [`HAT_CACHE_BYTES`].
    fn slice_sums(&self, plan: &FftPlan, b: &[f64], inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let layers = self.lattice.counts()[self.lattice.dim() - 1];
        let per_input = layers * plan.len() * std::mem::size_of::<rustfft::num_complex::Complex64>();
        let chunk = (HAT_CACHE_BYTES / per_input.max(1)).max(1);
        inputs.chunks(chunk).flat_map(|c| self.slice_chunk(plan, b, c)).collect()
    }

    fn slice_chunk(&self, plan: &FftPlan, b: &[f64], inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.lattice.dim();
        let layers = self.lattice.counts()[n - 1];
        let sub_len = self.lattice.len() / layers;
        let fk = self.kernel.frozen_constant().expect("checked invariant");
        let hs: Vec<f64> = (0..=n).map(|k| self.lattice.spacing(k)).collect();
        let hats: Vec<Vec<_>> = (0..layers)
            .map(|jn| {
                inputs
                    .iter()
                    .map(|g| {
                        let slice: Vec<f64> = (0..sub_len).map(|s| g[self.flat(s, jn)]).collect();
                        plan.input_hat(&slice)
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![vec![0.0; self.lattice.len()]; inputs.len()];
        for i_n in 0..layers {
            let xn = self.lattice.coord(n - 1, i_n);
            let mut acc = vec![vec![rustfft::num_complex::Complex64::default(); hats[0][0].len()]; inputs.len()];
            for (jn, layer_hats) in hats.iter().enumerate() {
                let yn = self.lattice.coord(n - 1, jn);
                let khat = plan.kernel_hat(|m| {
                    // m = (m', m_t) over the slice axes.
                    let mut full = [0i64; 4];
                    full[..n - 1].copy_from_slice(&m[..n - 1]);
                    full[n] = m[n - 1];
                    let mut xi = offset_point(n, &full[..=n], &hs);
                    for (i, bi) in b.iter().enumerate() {
                        xi.space_mut()[i] -= 2.0 * xn * bi;
                    }
                    xi.space_mut()[n - 1] = -xn - yn;
                    fk.eval(&xi)
                });
                for (a, h) in acc.iter_mut().zip(layer_hats) {
                    for ((o, x), y) in a.iter_mut().zip(h).zip(&khat) {
                        *o += x * y;
                    }
                }
            }
            for (o, a) in out.iter_mut().zip(acc) {
                let vals = plan.output(a);
                for (s, v) in vals.into_iter().enumerate() {
                    o[self.flat(s, i_n)] = v;
                }
            }
        }
        out
    }

    fn direct(&self, g: impl Fn(usize, usize) -> f64 + Sync) -> Result<Vec<f64>> {
        let points: Vec<SpaceTimePoint> = (0..self.lattice.len()).map(|i| self.lattice.point_of(i)).collect();
        (0..points.len())
            .into_par_iter()
            .map(|i| {
                let fk = self.kernel.frozen(&points[i])?;
                let tx = reflect_with(&self.coeffs.at(&points[i]), &points[i])?;
                let mut s = 0.0;
                for (j, y) in points.iter().enumerate() {
                    let gij = g(i, j);
                    if gij != 0.0 {
                        s += fk.eval(&(tx - *y)) * self.weights[j] * gij;
                    }
                }
                Ok(s)
            })
            .collect()
    }

    fn check(&self, f: &GridField) -> Result<()> {
        if f.lattice() != &self.lattice {
            return Err(invalid("field lives on a different lattice"));
        }
        Ok(())
    }

    pub fn apply(&self, f: &GridField) -> Result<GridField> {
        Ok(self.apply_many(&[f])?.pop().expect("one input"))
    }

    /// [`apply`](Self::apply) for several fields at once, sharing the kernel transforms.
    pub fn apply_many(&self, fs: &[&GridField]) -> Result<Vec<GridField>> {
        for f in fs {
            self.check(f)?;
        }
        let outs = match &self.engine {
            Engine::Slices { plan, b } => {
                let gs: Vec<Vec<f64>> = fs
                    .iter()
                    .map(|f| f.values().iter().zip(&self.weights).map(|(a, w)| a * w).collect())
                    .collect();
                self.slice_sums(plan, b, &gs)
            }
            Engine::Direct => fs
                .iter()
                .map(|f| {
                    let fv = f.values();
                    self.direct(|_, j| fv[j])
                })
                .collect::<Result<_>>()?,
        };
        outs.into_iter().map(|o| GridField::new(self.lattice.clone(), o)).collect()
    }

    /// `Σ_j K(x_i, T(x_i) - x_j) ω_j [a_j - a_i] f_j`.
    pub fn commutator(&self, a: &GridField, f: &GridField) -> Result<GridField> {
        Ok(self.commutator_many(a, &[f])?.pop().expect("one input"))
    }

    /// [`commutator`](Self::commutator) with one symbol and several fields.
    pub fn commutator_many(&self, a: &GridField, fs: &[&GridField]) -> Result<Vec<GridField>> {
        self.check(a)?;
        for f in fs {
            self.check(f)?;
        }
        let av = a.values();
        let outs: Vec<Vec<f64>> = match &self.engine {
            Engine::Slices { plan, b } => {
                let abar = av[0];
                let mut gs = Vec::with_capacity(2 * fs.len());
                for f in fs {
                    let fv = f.values();
                    gs.push((0..fv.len()).map(|j| (av[j] - abar) * fv[j] * self.weights[j]).collect());
                    gs.push(fv.iter().zip(&self.weights).map(|(a, w)| a * w).collect());
                }
                let r = self.slice_sums(plan, b, &gs);
                r.chunks(2)
                    .map(|p| (0..av.len()).map(|i| p[0][i] - (av[i] - abar) * p[1][i]).collect())
                    .collect()
            }
            Engine::Direct => fs
                .iter()
                .map(|f| {
                    let fv = f.values();
                    self.direct(|i, j| (av[j] - av[i]) * fv[j])
                })
                .collect::<Result<_>>()?,
        };
        outs.into_iter().map(|o| GridField::new(self.lattice.clone(), o)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::SymMatrix;
    use crate::geometry::region::Region;
    use crate::operators::kernel::Component;
    use crate::spaces::Centering;

    fn bump_field(n: usize, centre: SpaceTimePoint, r: f64) -> ScalarField {
        let f = move |p: &SpaceTimePoint| {
            let d = *p - centre;
            let q = (d.space_norm_sq() + d.time() * d.time()) / (r * r);
            if q < 1.0 {
                (-1.0 / (1.0 - q)).exp()
            } else {
                0.0
            }
        };
        let lo: Vec<f64> = centre.space().iter().map(|c| c - r).collect();
        let hi: Vec<f64> = centre.space().iter().map(|c| c + r).collect();
        ScalarField::new(n, "bump", f)
            .with_support(Region::box_cylinder(&lo, &hi, centre.time() - r, centre.time() + r).unwrap())
    }

    /// Tensor Gauss-Legendre over the support box (the integrand is smooth).
    fn gl_oracle(n: usize, support: &Region, g: impl Fn(&SpaceTimePoint) -> f64) -> f64 {
        let (lo, hi) = support.bounding_box();
        let nodes = crate::geometry::sphere::gauss_legendre(40, -1.0, 1.0);
        let m = nodes.len();
        let total = m.pow(n as u32 + 1);
        let mut s = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            let mut c = [0.0; 4];
            let mut w = 1.0;
            for k in 0..=n {
                let (x, wk) = nodes[rem % m];
                rem /= m;
                let half = 0.5 * (hi[k] - lo[k]);
                c[k] = lo[k] + half * (x + 1.0);
                w *= wk * half;
            }
            s += w * g(&SpaceTimePoint::from_coords(&c[..=n]).unwrap());
        }
        s
    }

    fn coupled() -> CoefficientField {
        CoefficientField::constant(SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap(), "coupled").unwrap()
    }

    #[test]
    fn identity_comparability_is_exact() {
        let c = comparability_audit(&CoefficientField::identity(2), 1000, 3).unwrap();
        assert_eq!((c.kappa1, c.kappa2), (1.0, 1.0));
    }

    #[test]
    fn coupled_comparability_is_finite_and_stable() {
        let a = comparability_audit(&coupled(), 4000, 5).unwrap();
        let b = comparability_audit(&coupled(), 16000, 6).unwrap();
        assert!(0.0 < a.kappa1 && a.kappa1 <= 1.0 && 1.0 <= a.kappa2 && a.kappa2.is_finite());
        assert!((a.kappa1 / b.kappa1 - 1.0).abs() < 0.05 && (a.kappa2 / b.kappa2 - 1.0).abs() < 0.05, "{a:?} {b:?}");
    }

    #[test]
    fn comparability_shrinks_with_coupling() {
        let mut last = f64::INFINITY;
        for off in [0.6, 0.3, 0.1, 0.0] {
            let a = CoefficientField::constant(SymMatrix::from_rows(&[vec![1.0, off], vec![off, 1.0]]).unwrap(), "c").unwrap();
            let c = comparability_audit(&a, 4000, 9).unwrap();
            let spread = c.kappa2 / c.kappa1;
            assert!(spread <= last);
            last = spread;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn reflected_apply_matches_gauss_oracle() {
        let coeffs = coupled();
        let k = Kernel::gaussian(coeffs.clone(), Component::Second { i: 0, j: 1 }).unwrap();
        let f = bump_field(2, SpaceTimePoint::new(&[0.0, 0.5], 0.3).unwrap(), 0.3);
        let a = ScalarField::new(2, "y1", |p: &SpaceTimePoint| p.space()[0]);
        let x = SpaceTimePoint::new(&[0.1, 0.4], 0.7).unwrap();
        let tx = generalized_reflection(&coeffs, &x).unwrap();
        let fk = k.frozen(&x).unwrap();
        let support = f.support().unwrap().clone();
        let want = gl_oracle(2, &support, |y| fk.eval(&(tx - *y)) * f.eval(y));
        let got = reflected_apply(&k, &coeffs, &f, &x, 0.02).unwrap();
        assert!((got - want).abs() < 0.02 * want.abs(), "{got} vs {want}");
        let want = gl_oracle(2, &support, |y| fk.eval(&(tx - *y)) * (y.space()[0] - 0.1) * f.eval(y));
        let got = reflected_commutator(&k, &coeffs, &a, &f, &x, 0.02).unwrap();
        assert!((got - want).abs() < 0.02 * want.abs(), "{got} vs {want}");
        let c = ScalarField::constant(2, 1.5);
        assert_eq!(reflected_commutator(&k, &coeffs, &c, &f, &x, 0.05).unwrap(), 0.0);
        let zero = ScalarField::zero(2).with_support(support);
        assert_eq!(reflected_apply(&k, &coeffs, &zero, &x, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn reflected_commutator_is_dominated() {
        let coeffs = CoefficientField::identity(2);
        let k = Kernel::gaussian(coeffs.clone(), Component::Second { i: 0, j: 0 }).unwrap();
        let f = bump_field(2, SpaceTimePoint::new(&[0.0, 0.5], 0.3).unwrap(), 0.3);
        let a = ScalarField::new(2, "y1", |p: &SpaceTimePoint| (3.0 * p.space()[0]).sin());
        // |Γ_ij| <= M ρ^{-(n+2)} with M bounded by the sphere maximum; 1 is generous for a = I.
        for x in [[0.1, 0.1, 0.5], [0.0, 0.3, 0.2], [0.4, 0.05, 0.9]] {
            let x = SpaceTimePoint::new(&x[..2], x[2]).unwrap();
            let c = reflected_commutator(&k, &coeffs, &a, &f, &x, 0.03).unwrap().abs();
            let m = reflected_majorant(&f, Some(&a), &x, 0.03).unwrap();
            assert!(c <= m, "{c} > {m}");
        }
    }

    #[test]
    fn slice_fft_matches_direct() {
        let lat = Lattice::parabolic(Centering::Cell, &[-0.5, 0.0, 0.0], &[0.5, 0.5, 0.25], 0.125).unwrap();
        let coeffs = coupled();
        let k = Kernel::gaussian(coeffs.clone(), Component::Second { i: 1, j: 1 }).unwrap();
        let f = lat.sample(|p| (p.space()[0] * 3.0).cos() * p.space()[1] * (1.0 - p.time()));
        let a = lat.sample(|p| p.space()[1] + p.time());
        let fast = ReflectedOperator::new(k.clone(), coeffs.clone(), lat.clone(), LatticeMode::Auto).unwrap();
        let slow = ReflectedOperator::new(k, coeffs, lat, LatticeMode::Direct).unwrap();
        assert!(fast.uses_fft() && !slow.uses_fft());
        for (u, v) in [
            (fast.apply(&f).unwrap(), slow.apply(&f).unwrap()),
            (fast.commutator(&a, &f).unwrap(), slow.commutator(&a, &f).unwrap()),
        ] {
            let scale = v.max_abs().max(1.0);
            for (x, y) in u.values().iter().zip(v.values()) {
                assert!((x - y).abs() < 1e-10 * scale, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn batched_application_is_identical() {
        let lat = Lattice::parabolic(Centering::Cell, &[-0.5, 0.0, 0.0], &[0.5, 0.5, 0.25], 0.125).unwrap();
        let coeffs = coupled();
        let k = Kernel::gaussian(coeffs.clone(), Component::Second { i: 0, j: 1 }).unwrap();
        let op = ReflectedOperator::new(k, coeffs, lat.clone(), LatticeMode::Auto).unwrap();
        let fs: Vec<GridField> = (1..4).map(|m| lat.sample(|p| (m as f64 * p.space()[0]).sin() + p.time())).collect();
        let refs: Vec<&GridField> = fs.iter().collect();
        let a = lat.sample(|p| p.space()[1]);
        for (f, u) in fs.iter().zip(op.apply_many(&refs).unwrap()) {
            assert_eq!(u, op.apply(f).unwrap());
        }
        for (f, u) in fs.iter().zip(op.commutator_many(&a, &refs).unwrap()) {
            assert_eq!(u, op.commutator(&a, f).unwrap());
        }
    }

    #[test]
    fn rejects_lower_half_space() {
        let coeffs = CoefficientField::identity(1);
        let k = Kernel::gaussian(coeffs.clone(), Component::Second { i: 0, j: 0 }).unwrap();
        let f = bump_field(1, SpaceTimePoint::new(&[0.5], 0.3).unwrap(), 0.2);
        assert!(reflected_apply(&k, &coeffs, &f, &SpaceTimePoint::new(&[-0.1], 0.3).unwrap(), 0.05).is_err());
        let lat = Lattice::parabolic(Centering::Cell, &[-0.5, 0.0], &[0.5, 0.25], 0.125).unwrap();
        assert!(ReflectedOperator::new(k, coeffs, lat, LatticeMode::Auto).is_err());
    }
}
