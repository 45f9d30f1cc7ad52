use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::geometry::point::{rho, SpaceTimePoint};
use crate::spaces::{GridField, Lattice};

use super::kernel::{Component, FrozenKernel, Kernel};
use super::singular::cutoff;

/// Zero-padded linear convolution on a tensor grid, with the axis FFT plans cached.
pub(crate) struct FftPlan {
    dims: Vec<usize>,
    padded: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl FftPlan {
    pub(crate) fn new(dims: &[usize]) -> Result<Self> {
        let padded: Vec<usize> = dims.iter().map(|&c| 2 * c).collect();
        crate::check_budget(padded.iter().product())?;
        let mut planner = FftPlanner::new();
        let fwd = padded.iter().map(|&p| planner.plan_fft_forward(p)).collect();
        let inv = padded.iter().map(|&p| planner.plan_fft_inverse(p)).collect();
        Ok(Self {
            dims: dims.to_vec(),
            padded,
            fwd,
            inv,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.padded.iter().product()
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        let total = data.len();
        for (k, plan) in plans.iter().enumerate() {
            let p = self.padded[k];
            let stride: usize = self.padded[k + 1..].iter().product();
            let mut line = vec![Complex64::default(); p];
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            let block = p * stride;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (m, v) in line.iter_mut().enumerate() {
                        *v = data[base + m * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (m, v) in line.iter().enumerate() {
                        data[base + m * stride] = *v;
                    }
                }
            }
        }
    }

    /// Transform of `m ↦ w(m)` for offsets `|m_k| < dims[k]`.
    pub(crate) fn kernel_hat(&self, w: impl Fn(&[i64]) -> f64 + Sync) -> Vec<Complex64> {
        let d = self.padded.len();
        let mut data: Vec<Complex64> = (0..self.len())
            .into_par_iter()
            .map(|flat| {
                let mut m = [0i64; 8];
                let mut rem = flat;
                for k in (0..d).rev() {
                    let p = self.padded[k];
                    let pk = rem % p;
                    rem /= p;
                    let c = self.dims[k];
                    m[k] = if pk < c {
                        pk as i64
                    } else if pk > p - c {
                        pk as i64 - p as i64
                    } else {
                        return Complex64::default();
                    };
                }
                Complex64::new(w(&m[..d]), 0.0)
            })
            .collect();
        self.transform(&mut data, false);
        data
    }

    /// Transform of row-major `values` on `dims`, zero padded.
    pub(crate) fn input_hat(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data = vec![Complex64::default(); self.len()];
        let d = self.dims.len();
        for (flat, v) in values.iter().enumerate() {
            let mut rem = flat;
            let mut target = 0;
            let mut mult = 1;
            for k in (0..d).rev() {
                target += (rem % self.dims[k]) * mult;
                rem /= self.dims[k];
                mult *= self.padded[k];
            }
            data[target] = Complex64::new(*v, 0.0);
        }
        self.transform(&mut data, false);
        data
    }

    /// Inverse transform of a product of transforms, cropped back to `dims`.
    pub(crate) fn output(&self, mut hat: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut hat, true);
        let scale = 1.0 / self.len() as f64;
        let d = self.dims.len();
        let n: usize = self.dims.iter().product();
        (0..n)
            .map(|flat| {
                let mut rem = flat;
                let mut src = 0;
                let mut mult = 1;
                for k in (0..d).rev() {
                    src += (rem % self.dims[k]) * mult;
                    rem /= self.dims[k];
                    mult *= self.padded[k];
                }
                hat[src].re * scale
            })
            .collect()
    }

    /// `out[i] = Σ_j w(i - j) g[j]`.
    pub(crate) fn convolve(&self, w_hat: &[Complex64], values: &[f64]) -> Vec<f64> {
        let mut g = self.input_hat(values);
        for (a, b) in g.iter_mut().zip(w_hat) {
            *a *= *b;
        }
        self.output(g)
    }
}

/// How a lattice operator evaluates its sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeMode {
    /// FFT for translation-invariant kernels, direct summation otherwise.
    Auto,
    Fft,
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeOptions {
    pub mode: LatticeMode,
    /// Add the self-cell correction that restores cancellation (on by default for `Γ_ij`).
    pub cancel: Option<bool>,
    /// Radius of the correction, in units of the space spacing.
    pub correction_radius: f64,
    /// Offsets with `ρ <= exclusion·h` are dropped (0 keeps everything but the diagonal).
    pub exclusion: f64,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        Self {
            mode: LatticeMode::Auto,
            cancel: None,
            correction_radius: 4.0,
            exclusion: 0.0,
        }
    }
}

enum Engine {
    Fft { plan: FftPlan, hat: Vec<Complex64> },
    Direct,
}

/// A kernel operator `f ↦ Σ_j K(x_i, x_i - x_j) ω_j f_j` on a lattice, where `ω_j`
/// are the dual-cell volumes.
///
/// For cancelling kernels the diagonal is replaced by `c_i f_i` with
/// `c_i = -vol Σ_{m≠0} K(x_i, m̂) χ(ρ(m̂)/(c h))`, which removes the lattice's
/// failure to cancel near the origin so the sum approximates the principal value.
pub struct LatticeOperator {
    kernel: Kernel,
    lattice: Lattice,
    weights: Vec<f64>,
    cancel: bool,
    correction_radius: f64,
    exclusion: f64,
    /// Self-cell constant when the kernel is translation invariant.
    c0: Option<f64>,
    engine: Engine,
}

impl LatticeOperator {
    pub fn new(kernel: Kernel, lattice: Lattice, opts: LatticeOptions) -> Result<Self> {
        if kernel.dim() != lattice.dim() {
            return Err(invalid("kernel and lattice differ in dimension"));
        }
        if !(opts.correction_radius > 0.0) || !(opts.exclusion >= 0.0) {
            return Err(invalid("correction radius must be positive and exclusion nonnegative"));
        }
        let invariant = kernel.is_translation_invariant();
        let use_fft = match opts.mode {
            LatticeMode::Auto => invariant,
            LatticeMode::Fft if !invariant => {
                return Err(invalid("FFT evaluation needs a translation-invariant kernel"));
            }
            LatticeMode::Fft => true,
            LatticeMode::Direct => false,
        };
        let cancel = opts
            .cancel
            .unwrap_or(matches!(kernel.component(), Some(Component::Second { .. })));
        let weights: Vec<f64> = (0..lattice.len()).map(|i| lattice.weight_of(i)).collect();
        let mut op = Self {
            kernel,
            lattice,
            weights,
            cancel,
            correction_radius: opts.correction_radius,
            exclusion: opts.exclusion,
            c0: None,
            engine: Engine::Direct,
        };
        if let Some(fk) = op.kernel.frozen_constant() {
            op.c0 = Some(op.self_constant(&fk));
        }
        if use_fft {
            let fk = op.kernel.frozen_constant().expect("checked invariant");
            let plan = FftPlan::new(op.lattice.counts())?;
            let hs = op.spacings();
            let excl = op.exclusion * hs[0];
            let n = op.lattice.dim();
            let hat = plan.kernel_hat(|m| {
                if m.iter().all(|&v| v == 0) {
                    return 0.0;
                }
                let xi = offset_point(n, m, &hs);
                if excl > 0.0 && rho(&xi) <= excl {
                    return 0.0;
                }
                fk.eval(&xi)
            });
            op.engine = Engine::Fft { plan, hat };
        }
        Ok(op)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn uses_fft(&self) -> bool {
        matches!(self.engine, Engine::Fft { .. })
    }

    fn spacings(&self) -> Vec<f64> {
        (0..=self.lattice.dim()).map(|k| self.lattice.spacing(k)).collect()
    }

    fn self_constant(&self, fk: &FrozenKernel) -> f64 {
        if !self.cancel {
            return 0.0;
        }
        let n = self.lattice.dim();
        let hs = self.spacings();
        let vol: f64 = hs.iter().product();
        let rc = self.correction_radius * hs[0];
        let excl = self.exclusion * hs[0];
        let mut reach = [0i64; 4];
        for k in 0..n {
            reach[k] = (2.0 * rc / hs[k]).ceil() as i64;
        }
        reach[n] = ((2.0 * rc).powi(2) / hs[n]).ceil() as i64;
        let mut m = [0i64; 4];
        let mut sum = 0.0;
        let total: i64 = reach[..=n].iter().map(|r| 2 * r + 1).product();
        for flat in 0..total {
            let mut rem = flat;
            for k in (0..=n).rev() {
                let w = 2 * reach[k] + 1;
                m[k] = rem % w - reach[k];
                rem /= w;
            }
            if m[..=n].iter().all(|&v| v == 0) {
                continue;
            }
            let xi = offset_point(n, &m[..=n], &hs);
            let r = rho(&xi);
            if r >= 2.0 * rc || (excl > 0.0 && r <= excl) {
                continue;
            }
            sum += fk.eval(&xi) * cutoff(r / rc);
        }
        -vol * sum
    }

    fn check(&self, f: &GridField) -> Result<()> {
        if f.lattice() != &self.lattice {
            return Err(invalid("field lives on a different lattice"));
        }
        Ok(())
    }

    /// `Σ_{j≠i} K(x_i, x_i - x_j) ω_j g(i, j)` for every `i`, summed directly.
    fn direct(&self, g: impl Fn(usize, usize) -> f64 + Sync) -> Result<Vec<f64>> {
        let excl = self.exclusion * self.lattice.spacing(0);
        let points: Vec<SpaceTimePoint> = (0..self.lattice.len()).map(|i| self.lattice.point_of(i)).collect();
        (0..points.len())
            .into_par_iter()
            .map(|i| {
                let fk = self.kernel.frozen(&points[i])?;
                let mut s = 0.0;
                for (j, y) in points.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let gij = g(i, j);
                    if gij == 0.0 {
                        continue;
                    }
                    let xi = points[i] - *y;
                    if excl > 0.0 && rho(&xi) <= excl {
                        continue;
                    }
                    s += fk.eval(&xi) * self.weights[j] * gij;
                }
                Ok(s)
            })
            .collect()
    }

    fn self_constants(&self) -> Result<Vec<f64>> {
        if !self.cancel {
            return Ok(vec![0.0; self.lattice.len()]);
        }
        if let Some(c) = self.c0 {
            return Ok(vec![c; self.lattice.len()]);
        }
        (0..self.lattice.len())
            .into_par_iter()
            .map(|i| Ok(self.self_constant(&self.kernel.frozen(&self.lattice.point_of(i))?)))
            .collect()
    }

    /// The operator applied to `f`.
    pub fn apply(&self, f: &GridField) -> Result<GridField> {
        self.check(f)?;
        let fv = f.values();
        let mut out = match &self.engine {
            Engine::Fft { plan, hat } => {
                let g: Vec<f64> = fv.iter().zip(&self.weights).map(|(a, w)| a * w).collect();
                plan.convolve(hat, &g)
            }
            Engine::Direct => self.direct(|_, j| fv[j])?,
        };
        for ((o, c), v) in out.iter_mut().zip(self.self_constants()?).zip(fv) {
            *o += c * v;
        }
        GridField::new(self.lattice.clone(), out)
    }

    /// `Σ_j K(x_i, x_i - x_j) ω_j [a_j - a_i] f_j`.
    pub fn commutator(&self, a: &GridField, f: &GridField) -> Result<GridField> {
        self.check(a)?;
        self.check(f)?;
        let (av, fv) = (a.values(), f.values());
        let out = match &self.engine {
            Engine::Fft { plan, hat } => {
                // Shifting by a reference value keeps a constant symbol exactly zero.
                let abar = av[0];
                let g: Vec<f64> = (0..fv.len()).map(|j| (av[j] - abar) * fv[j] * self.weights[j]).collect();
                let plain: Vec<f64> = fv.iter().zip(&self.weights).map(|(a, w)| a * w).collect();
                let c1 = plan.convolve(hat, &g);
                let c2 = plan.convolve(hat, &plain);
                (0..fv.len()).map(|i| c1[i] - (av[i] - abar) * c2[i]).collect()
            }
            Engine::Direct => self.direct(|i, j| (av[j] - av[i]) * fv[j])?,
        };
        GridField::new(self.lattice.clone(), out)
    }

    /// `Σ_{j≠i} |K(x_i, x_i - x_j)| ω_j |b_j - b_i| |f_j|` (without `b`, the plain majorant).
    pub fn majorant(&self, b: Option<&GridField>, f: &GridField) -> Result<GridField> {
        self.check(f)?;
        if let Some(b) = b {
            self.check(b)?;
        }
        let fv = f.values();
        let out = self.direct_abs(|i, j| {
            let d = b.map_or(1.0, |b| (b.values()[j] - b.values()[i]).abs());
            d * fv[j].abs()
        })?;
        GridField::new(self.lattice.clone(), out)
    }

    fn direct_abs(&self, g: impl Fn(usize, usize) -> f64 + Sync) -> Result<Vec<f64>> {
        let excl = self.exclusion * self.lattice.spacing(0);
        let points: Vec<SpaceTimePoint> = (0..self.lattice.len()).map(|i| self.lattice.point_of(i)).collect();
        (0..points.len())
            .into_par_iter()
            .map(|i| {
                let fk = self.kernel.frozen(&points[i])?;
                let mut s = 0.0;
                for (j, y) in points.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let gij = g(i, j);
                    if gij == 0.0 {
                        continue;
                    }
                    let xi = points[i] - *y;
                    if excl > 0.0 && rho(&xi) <= excl {
                        continue;
                    }
                    s += fk.eval(&xi).abs() * self.weights[j] * gij;
                }
                Ok(s)
            })
            .collect()
    }
}

/// The lattice offset `m` as a point `(m_1 h_1, ..., m_t h_t)`.
pub(crate) fn offset_point(n: usize, m: &[i64], hs: &[f64]) -> SpaceTimePoint {
    let mut c = [0.0; 4];
    for k in 0..=n {
        c[k] = m[k] as f64 * hs[k];
    }
    SpaceTimePoint::from_coords(&c[..=n]).expect("dimension fixed by lattice")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientField, SymMatrix};
    use crate::geometry::region::Region;
    use crate::operators::{singular_apply, PvConfig};
    use crate::spaces::{Centering, ScalarField};

    fn small_lattice() -> Lattice {
        Lattice::parabolic(Centering::Vertex, &[-0.5, -0.5, 0.0], &[0.5, 0.5, 0.25], 0.125).unwrap()
    }

    fn bump(p: &SpaceTimePoint) -> f64 {
        let r2 = p.space_norm_sq() + (p.time() - 0.12).powi(2) * 16.0;
        if r2 < 0.16 {
            (-1.0 / (0.16 - r2)).exp() * 1e3
        } else {
            0.0
        }
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let plan = FftPlan::new(&[5, 3, 4]).unwrap();
        let w = |m: &[i64]| (m[0] as f64 * 0.3 + m[1] as f64).sin() + 0.1 * m[2] as f64;
        let vals: Vec<f64> = (0..60).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let hat = plan.kernel_hat(w);
        let out = plan.convolve(&hat, &vals);
        for i in 0..60usize {
            let ii = [(i / 12) as i64, ((i / 4) % 3) as i64, (i % 4) as i64];
            let mut s = 0.0;
            for (j, v) in vals.iter().enumerate() {
                let jj = [(j / 12) as i64, ((j / 4) % 3) as i64, (j % 4) as i64];
                s += w(&[ii[0] - jj[0], ii[1] - jj[1], ii[2] - jj[2]]) * v;
            }
            assert!((out[i] - s).abs() < 1e-10, "{i}: {} vs {s}", out[i]);
        }
    }

    #[test]
    fn fft_and_direct_modes_agree() {
        let lat = small_lattice();
        let f = lat.sample(bump);
        let a = lat.sample(|p| p.space()[0] + 0.3 * p.time());
        let k = Kernel::heat(2, Component::Second { i: 0, j: 0 }).unwrap();
        let fft = LatticeOperator::new(k.clone(), lat.clone(), LatticeOptions::default()).unwrap();
        let direct = LatticeOperator::new(
            k,
            lat,
            LatticeOptions {
                mode: LatticeMode::Direct,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fft.uses_fft() && !direct.uses_fft());
        let (u, v) = (fft.apply(&f).unwrap(), direct.apply(&f).unwrap());
        let scale = u.max_abs();
        for (x, y) in u.values().iter().zip(v.values()) {
            assert!((x - y).abs() <= 1e-10 * scale.max(1.0));
        }
        let (u, v) = (fft.commutator(&a, &f).unwrap(), direct.commutator(&a, &f).unwrap());
        let scale = u.max_abs();
        for (x, y) in u.values().iter().zip(v.values()) {
            assert!((x - y).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn constant_symbol_gives_zero_commutator() {
        let lat = small_lattice();
        let f = lat.sample(bump);
        let a = lat.sample(|_| 2.5);
        let k = Kernel::heat(2, Component::Second { i: 0, j: 1 }).unwrap();
        let op = LatticeOperator::new(k, lat, LatticeOptions::default()).unwrap();
        assert_eq!(op.commutator(&a, &f).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn variable_kernels_use_direct_sums() {
        let lat = Lattice::parabolic(Centering::Vertex, &[-0.25, -0.25, 0.0], &[0.25, 0.25, 0.0625], 0.125).unwrap();
        let coeffs = CoefficientField::from_fn(2, "var", 2.0, |p| {
            let s = 0.2 * p.space()[0];
            SymMatrix::from_rows(&[vec![1.0 + s, 0.1], vec![0.1, 1.0 - s]]).unwrap()
        })
        .unwrap();
        let k = Kernel::gaussian(coeffs, Component::Second { i: 0, j: 0 }).unwrap();
        let op = LatticeOperator::new(k, lat.clone(), LatticeOptions::default()).unwrap();
        assert!(!op.uses_fft());
        let out = op.apply(&lat.sample(bump)).unwrap();
        assert!(out.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lattice_operator_tracks_the_principal_value() {
        // The corrected lattice sum converges to the polar-quadrature principal value.
        let k = Kernel::heat(1, Component::Second { i: 0, j: 0 }).unwrap();
        let f = |p: &SpaceTimePoint| {
            let r2 = p.space_norm_sq() / 0.25 + (p.time() - 0.5).powi(2) / 0.09;
            if r2 < 1.0 {
                (1.0 - r2).powi(3)
            } else {
                0.0
            }
        };
        let centre = SpaceTimePoint::new(&[0.0], 0.5).unwrap();
        let sf = ScalarField::new(1, "bump", f).with_support(Region::ellipsoid(centre, 0.6).unwrap());
        let lat = Lattice::parabolic(Centering::Vertex, &[-1.0, 0.0], &[1.0, 1.0], 1.0 / 64.0).unwrap();
        let op = LatticeOperator::new(k.clone(), lat.clone(), LatticeOptions::default()).unwrap();
        let out = op.apply(&lat.sample(f)).unwrap();
        for x in [[0.0, 0.5], [0.2, 0.6]] {
            let x = SpaceTimePoint::new(&[x[0]], x[1]).unwrap();
            let pv = singular_apply(&k, &sf, &x, &PvConfig::for_spacing(0.005)).unwrap().value;
            let lv = out.interpolate(&x);
            assert!((lv - pv).abs() < 0.02 * pv.abs(), "{lv} vs {pv}");
        }
    }
}
