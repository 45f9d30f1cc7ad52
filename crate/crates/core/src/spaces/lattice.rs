use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::point::{check_dim, SpaceTimePoint, MAX_SPACE_DIM};
use crate::geometry::region::Region;

const AXES: usize = MAX_SPACE_DIM + 1;

/// Where lattice nodes sit relative to the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Nodes include both box faces.
    Vertex,
    /// Nodes are the centres of `counts[k]` equal cells.
    Cell,
}

/// A tensor lattice on the box `[lo, hi]` of `R^{n+1}` (axis `n` is time).
///
/// Each node owns its dual cell clipped to the box, so the dual cells tile the
/// box exactly for either centering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    n: usize,
    centering: Centering,
    lo: Vec<f64>,
    hi: Vec<f64>,
    counts: Vec<usize>,
}

impl Lattice {
    pub fn new(centering: Centering, lo: &[f64], hi: &[f64], counts: &[usize]) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != counts.len() || lo.len() < 2 {
            return Err(invalid("lattice extents and counts must have length n + 1"));
        }
        let n = lo.len() - 1;
        check_dim(n)?;
        let min = if centering == Centering::Vertex { 2 } else { 1 };
        for k in 0..=n {
            if !(lo[k] < hi[k]) || counts[k] < min {
                return Err(invalid(format!("degenerate lattice axis {k}")));
            }
        }
        let total = counts.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
        crate::check_budget(total.unwrap_or(usize::MAX))?;
        Ok(Self {
            n,
            centering,
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            counts: counts.to_vec(),
        })
    }

    /// Parabolic lattice on `[lo, hi]`: space spacing `h`, time spacing `h^2`.
    ///
    /// Every extent must be an integer multiple of its spacing (to 1e-9 relative),
    /// which keeps the lattice aligned with scale-invariant discrete kernels.
    pub fn parabolic(centering: Centering, lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid("lattice spacing must be positive"));
        }
        let n = lo.len().saturating_sub(1);
        let mut counts = Vec::with_capacity(lo.len());
        for k in 0..lo.len() {
            let hk = if k == n { h * h } else { h };
            let cells = (hi[k] - lo[k]) / hk;
            let rounded = cells.round();
            if (cells - rounded).abs() > 1e-9 * cells.max(1.0) || rounded < 1.0 {
                return Err(invalid(format!(
                    "axis {k} extent {} is not a multiple of spacing {hk}",
                    hi[k] - lo[k]
                )));
            }
            let c = rounded as usize;
            counts.push(if centering == Centering::Vertex { c + 1 } else { c });
        }
        Self::new(centering, lo, hi, &counts)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn centering(&self) -> Centering {
        self.centering
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, k: usize) -> f64 {
        match self.centering {
            Centering::Vertex => (self.hi[k] - self.lo[k]) / (self.counts[k] - 1) as f64,
            Centering::Cell => (self.hi[k] - self.lo[k]) / self.counts[k] as f64,
        }
    }

    fn first(&self, k: usize) -> f64 {
        match self.centering {
            Centering::Vertex => self.lo[k],
            Centering::Cell => self.lo[k] + 0.5 * self.spacing(k),
        }
    }

    /// Coordinate of node `j` along axis `k`.
    pub fn coord(&self, k: usize, j: usize) -> f64 {
        self.first(k) + j as f64 * self.spacing(k)
    }

    /// Length of the dual cell of node `j` along axis `k`.
    pub fn dual_length(&self, k: usize, j: usize) -> f64 {
        let (a, b) = self.dual_cell(k, j);
        b - a
    }

    pub fn dual_cell(&self, k: usize, j: usize) -> (f64, f64) {
        let d = self.spacing(k);
        let c = self.coord(k, j);
        ((c - 0.5 * d).max(self.lo[k]), (c + 0.5 * d).min(self.hi[k]))
    }

    /// Flat index, time fastest.
    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.counts)
            .fold(0, |acc, (i, c)| acc * c + i)
    }

    /// Multi-index of a flat index.
    pub fn unflatten(&self, mut flat: usize) -> [usize; AXES] {
        let mut out = [0; AXES];
        for k in (0..=self.n).rev() {
            out[k] = flat % self.counts[k];
            flat /= self.counts[k];
        }
        out
    }

    pub fn point(&self, idx: &[usize]) -> SpaceTimePoint {
        let mut space = [0.0; MAX_SPACE_DIM];
        for (k, s) in space.iter_mut().enumerate().take(self.n) {
            *s = self.coord(k, idx[k]);
        }
        SpaceTimePoint::from_parts(&space[..self.n], self.coord(self.n, idx[self.n]))
    }

    pub fn point_of(&self, flat: usize) -> SpaceTimePoint {
        self.point(&self.unflatten(flat))
    }

    /// Dual-cell volume of a node.
    pub fn weight_of(&self, flat: usize) -> f64 {
        let idx = self.unflatten(flat);
        (0..=self.n).map(|k| self.dual_length(k, idx[k])).product()
    }

    /// The lattice box as a region.
    pub fn bounding_region(&self) -> Region {
        Region::BoxCylinder {
            lo: self.lo[..self.n].to_vec(),
            hi: self.hi[..self.n].to_vec(),
            t_start: self.lo[self.n],
            t_end: self.hi[self.n],
        }
    }

    pub fn contains_box(&self, p: &SpaceTimePoint) -> bool {
        (0..=self.n).all(|k| {
            let v = p.coord(k);
            self.lo[k] <= v && v <= self.hi[k]
        })
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(&SpaceTimePoint) -> f64 + Sync) -> GridField {
        use rayon::prelude::*;
        let values = (0..self.len())
            .into_par_iter()
            .map(|i| f(&self.point_of(i)))
            .collect();
        GridField {
            lattice: self.clone(),
            values,
        }
    }

    /// Node indices along axis `k` whose coordinate lies strictly inside `(a, b)`.
    fn nodes_within(&self, k: usize, a: f64, b: f64) -> std::ops::Range<usize> {
        let d = self.spacing(k);
        let o = self.first(k);
        let n = self.counts[k] as i64;
        let mut first = ((a - o) / d).floor() as i64;
        while first < n && o + first as f64 * d <= a {
            first += 1;
        }
        let mut last = ((b - o) / d).ceil() as i64;
        while last > 0 && o + (last - 1) as f64 * d >= b {
            last -= 1;
        }
        let first = first.clamp(0, n) as usize;
        let last = last.clamp(0, n) as usize;
        first..last.max(first)
    }

    /// Visits every spatial column whose node lies in the region's spatial projection,
    /// handing over `(column base index, spatial dual weight, time interval)`.
    pub(crate) fn for_each_column(
        &self,
        region: &Region,
        mut visit: impl FnMut(usize, f64, (f64, f64)),
    ) {
        let mut prefix = [0.0; AXES];
        let mut idx = [0usize; AXES];
        self.columns_rec(region, 0, &mut prefix, &mut idx, 1.0, &mut visit);
    }

    fn columns_rec(
        &self,
        region: &Region,
        k: usize,
        prefix: &mut [f64; AXES],
        idx: &mut [usize; AXES],
        weight: f64,
        visit: &mut impl FnMut(usize, f64, (f64, f64)),
    ) {
        let Some((a, b)) = region.axis_interval(k, &prefix[..k]) else {
            return;
        };
        if k == self.n {
            let a = a.max(self.lo[k]);
            let b = b.min(self.hi[k]);
            if b > a {
                idx[k] = 0;
                visit(self.index(&idx[..=self.n]), weight, (a, b));
            }
            return;
        }
        for j in self.nodes_within(k, a, b) {
            prefix[k] = self.coord(k, j);
            idx[k] = j;
            self.columns_rec(region, k + 1, prefix, idx, weight * self.dual_length(k, j), visit);
        }
    }

    /// Time node range overlapping `(a, b)` together with the overlap lengths.
    pub(crate) fn time_overlaps(&self, a: f64, b: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let k = self.n;
        let j0 = self.time_cell(a);
        let j1 = self.time_cell(b);
        (j0..=j1).filter_map(move |j| {
            let (c0, c1) = self.dual_cell(k, j);
            let len = c1.min(b) - c0.max(a);
            (len > 0.0).then_some((j, len))
        })
    }

    /// Time node whose dual cell contains `s` (clamped to the box).
    fn time_cell(&self, s: f64) -> usize {
        let k = self.n;
        let x = ((s - self.first(k)) / self.spacing(k) + 0.5).floor();
        (x.max(0.0) as usize).min(self.counts[k] - 1)
    }

    /// Quadrature weights of the region on this lattice: spatial nodes by centre
    /// inclusion, time by exact overlap with the dual cells.
    pub fn region_weights(&self, region: &Region) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_column(region, |base, w, (a, b)| {
            for (j, len) in self.time_overlaps(a, b) {
                out.push((base + j, w * len));
            }
        });
        out
    }
}

/// Samples of a function on a [`Lattice`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    lattice: Lattice,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(invalid("value count does not match the lattice"));
        }
        Ok(Self { lattice, values })
    }

    pub fn zeros(lattice: Lattice) -> Self {
        let values = vec![0.0; lattice.len()];
        Self { lattice, values }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            lattice: self.lattice.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Multilinear interpolation; exact at nodes, constant extension to the box
    /// faces, zero outside the box.
    pub fn interpolate(&self, p: &SpaceTimePoint) -> f64 {
        let lat = &self.lattice;
        if !lat.contains_box(p) {
            return 0.0;
        }
        let n = lat.n;
        let mut base = [0usize; AXES];
        let mut frac = [0.0f64; AXES];
        for k in 0..=n {
            let last = lat.counts[k] - 1;
            let x = ((p.coord(k) - lat.first(k)) / lat.spacing(k)).clamp(0.0, last as f64);
            let j = (x.floor() as usize).min(last.saturating_sub(1));
            base[k] = j;
            frac[k] = if last == 0 { 0.0 } else { x - j as f64 };
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << (n + 1)) {
            let mut w = 1.0;
            let mut idx = [0usize; AXES];
            for k in 0..=n {
                let up = (corner >> k) & 1 == 1;
                if up && lat.counts[k] == 1 {
                    w = 0.0;
                    break;
                }
                idx[k] = base[k] + up as usize;
                w *= if up { frac[k] } else { 1.0 - frac[k] };
            }
            if w != 0.0 {
                acc += w * self.values[lat.index(&idx[..=n])];
            }
        }
        acc
    }

    /// `∫ g` over the region with the lattice weights.
    pub fn integrate_region(&self, region: &Region, g: impl Fn(f64) -> f64) -> f64 {
        self.lattice
            .region_weights(region)
            .iter()
            .map(|&(i, w)| w * g(self.values[i]))
            .sum()
    }

    /// Writes the binary format: magic, `n`, centering, `lo`, `hi`, counts, values (little endian).
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let lat = &self.lattice;
        out.write_all(MAGIC)?;
        out.write_all(&(lat.n as u32).to_le_bytes())?;
        out.write_all(&[(lat.centering == Centering::Cell) as u8])?;
        for v in lat.lo.iter().chain(&lat.hi) {
            out.write_all(&v.to_le_bytes())?;
        }
        for c in &lat.counts {
            out.write_all(&(*c as u64).to_le_bytes())?;
        }
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(invalid("not a grid field file"));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        check_dim(n)?;
        let mut b1 = [0u8; 1];
        input.read_exact(&mut b1)?;
        let centering = if b1[0] == 1 { Centering::Cell } else { Centering::Vertex };
        let read_f = |input: &mut R| -> Result<f64> {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let lo: Vec<f64> = (0..=n).map(|_| read_f(&mut input)).collect::<Result<_>>()?;
        let hi: Vec<f64> = (0..=n).map(|_| read_f(&mut input)).collect::<Result<_>>()?;
        let mut counts = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            counts.push(u64::from_le_bytes(b) as usize);
        }
        let lattice = Lattice::new(centering, &lo, &hi, &counts)?;
        let values = (0..lattice.len())
            .map(|_| read_f(&mut input))
            .collect::<Result<_>>()?;
        GridField::new(lattice, values)
    }

    /// CSV with a `#`-comment header (`n`, centering, extents, counts) and columns
    /// `x1..xn,t,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let lat = &self.lattice;
        writeln!(out, "# n={}", lat.n)?;
        writeln!(
            out,
            "# centering={}",
            if lat.centering == Centering::Cell { "cell" } else { "vertex" }
        )?;
        writeln!(out, "# lo={}", join(&lat.lo))?;
        writeln!(out, "# hi={}", join(&lat.hi))?;
        let counts: Vec<String> = lat.counts.iter().map(|c| c.to_string()).collect();
        writeln!(out, "# counts={}", counts.join(","))?;
        let mut cols: Vec<String> = (1..=lat.n).map(|i| format!("x{i}")).collect();
        cols.push("t".into());
        cols.push("value".into());
        writeln!(out, "{}", cols.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let p = lat.point_of(i);
            let mut row: Vec<String> = p.space().iter().map(|c| format!("{c:e}")).collect();
            row.push(format!("{:e}", p.time()));
            row.push(format!("{v:e}"));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut n = None;
        let mut centering = Centering::Vertex;
        let (mut lo, mut hi, mut counts) = (Vec::new(), Vec::new(), Vec::new());
        let mut values = Vec::new();
        let mut header_seen = false;
        for (line_no, line) in input.lines().enumerate() {
            let line = line?;
            let bad = |what: &str| Error::Config(format!("grid csv line {}: {what}", line_no + 1));
            if let Some(meta) = line.strip_prefix("# ") {
                let (key, val) = meta.split_once('=').ok_or_else(|| bad("malformed header"))?;
                let floats = || -> Result<Vec<f64>> {
                    val.split(',')
                        .map(|s| s.trim().parse::<f64>().map_err(|_| bad("bad number")))
                        .collect()
                };
                match key {
                    "n" => n = Some(val.trim().parse::<usize>().map_err(|_| bad("bad n"))?),
                    "centering" => {
                        centering = match val.trim() {
                            "cell" => Centering::Cell,
                            "vertex" => Centering::Vertex,
                            _ => return Err(bad("unknown centering")),
                        }
                    }
                    "lo" => lo = floats()?,
                    "hi" => hi = floats()?,
                    "counts" => {
                        counts = val
                            .split(',')
                            .map(|s| s.trim().parse::<usize>().map_err(|_| bad("bad count")))
                            .collect::<Result<_>>()?
                    }
                    _ => return Err(bad("unknown header key")),
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            let last = line.rsplit(',').next().ok_or_else(|| bad("empty row"))?;
            values.push(last.trim().parse::<f64>().map_err(|_| bad("bad value"))?);
        }
        let n = n.ok_or_else(|| Error::Config("grid csv lacks `# n=`".into()))?;
        if lo.len() != n + 1 {
            return Err(Error::Config("grid csv extents do not match n".into()));
        }
        GridField::new(Lattice::new(centering, &lo, &hi, &counts)?, values)
    }
}

const MAGIC: &[u8; 8] = b"MLGRID01";

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

/// Region integrals of `|g|^p` in `O(columns)` via per-column time prefix sums.
///
/// Agrees with [`GridField::integrate_region`] up to rounding.
pub struct PowerIntegrator<'a> {
    field: &'a GridField,
    p: f64,
    prefix: Vec<f64>,
}

impl<'a> PowerIntegrator<'a> {
    pub fn new(field: &'a GridField, p: f64) -> Self {
        let lat = &field.lattice;
        let nt = lat.counts[lat.n];
        let columns = lat.len() / nt;
        let mut prefix = Vec::with_capacity(columns * (nt + 1));
        for c in 0..columns {
            let mut acc = 0.0;
            prefix.push(0.0);
            for j in 0..nt {
                acc += powp(field.values[c * nt + j], p) * lat.dual_length(lat.n, j);
                prefix.push(acc);
            }
        }
        Self { field, p, prefix }
    }

    fn column_integral(&self, base: usize, a: f64, b: f64) -> f64 {
        let lat = &self.field.lattice;
        let nt = lat.counts[lat.n];
        let col = base / nt;
        let pre = &self.prefix[col * (nt + 1)..(col + 1) * (nt + 1)];
        let cum = |s: f64| {
            let j = lat.time_cell(s);
            let (c0, _) = lat.dual_cell(lat.n, j);
            pre[j] + powp(self.field.values[base + j], self.p) * (s - c0).max(0.0)
        };
        cum(b) - cum(a)
    }

    /// `∫_region |g|^p`.
    pub fn integral(&self, region: &Region) -> f64 {
        let mut acc = 0.0;
        self.field
            .lattice
            .for_each_column(region, |base, w, (a, b)| acc += w * self.column_integral(base, a, b));
        acc
    }
}

#[inline]
pub(crate) fn powp(v: f64, p: f64) -> f64 {
    let a = v.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}
