use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row form.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for mut row in rows {
            row.sort_by_key(|(c, _)| *c);
            for (c, v) in row {
                if c >= n {
                    return Err(Error::LinearSolve(format!("column {c} outside a {n}x{n} matrix")));
                }
                if cols.len() > *row_start.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Ok(Self {
            n,
            row_start,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `(lower, upper)` bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `max |b - A x| / max |b|` (absolute when `b = 0`).
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        self.mul_vec(x, &mut ax);
        let r = ax.iter().zip(b).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max);
        let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }
}

/// LU factors of a banded matrix with partial pivoting (row interchanges).
///
/// Row `i` stores columns `i - kl ..= i + kl + ku`: the extra `kl` columns hold the
/// fill-in that pivoting moves into the upper factor.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.slot(i, j)]
    }

    /// Factorises `a`; fails on a (numerically) zero pivot.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        crate::check_budget(n.saturating_mul(width))?;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        let mut scale = 0.0f64;
        for i in 0..n {
            for (j, v) in a.row(i) {
                let s = lu.slot(i, j);
                lu.data[s] = v;
                scale = scale.max(v.abs());
            }
        }
        let tiny = f64::EPSILON * scale * n as f64;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = lu.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::LinearSolve(format!("zero pivot in column {k}")));
            }
            lu.pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (s, t) = (lu.slot(k, j), lu.slot(p, j));
                    lu.data.swap(s, t);
                }
            }
            let pivot = lu.get(k, k);
            for i in k + 1..=last_row {
                let s = lu.slot(i, k);
                let l = lu.data[s] / pivot;
                lu.data[s] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let (s, t) = (lu.slot(i, j), lu.slot(k, j));
                        lu.data[s] -= l * lu.data[t];
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    x[i] -= self.get(i, k) * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                s -= self.get(k, j) * x[j];
            }
            x[k] = s / self.get(k, k);
        }
        x
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterativeOutcome {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BiCGSTAB with Jacobi preconditioning, started from `x`, to relative residual `tol`.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<IterativeOutcome> {
    let n = a.dim();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(IterativeOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.row(i).find(|(j, _)| *j == i).map(|(_, v)| v).unwrap_or(0.0);
            if d != 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let (mut y, mut z, mut s, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = inv_diag[i] * p[i];
        }
        a.mul_vec(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if dot(&s, &s).sqrt() / bnorm < tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(IterativeOutcome {
                iterations: it,
                residual: a.relative_residual(x, b),
            });
        }
        for i in 0..n {
            z[i] = inv_diag[i] * s[i];
        }
        a.mul_vec(&z, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if dot(&r, &r).sqrt() / bnorm < tol {
            return Ok(IterativeOutcome {
                iterations: it,
                residual: a.relative_residual(x, b),
            });
        }
    }
    Err(Error::LinearSolve(format!(
        "BiCGSTAB did not reach relative residual {tol:e} in {max_iter} iterations"
    )))
}
