use std::io::Write;

use super::point::{SpaceTimePoint, MAX_SPACE_DIM};
use super::region::Region;
use crate::error::{invalid, Error, Result};

/// Tensor midpoint rule restricted to a region.
///
/// Space spacing is `h`, time spacing `h^2`. Cells come from a global lattice
/// anchored at the origin and are clipped, axis by axis, to the exact fibre of
/// the region, so the innermost (time) integral is exact for constants.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    n: usize,
    h: f64,
    nodes: Vec<SpaceTimePoint>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[SpaceTimePoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&SpaceTimePoint) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SpaceTimePoint, f64)> {
        self.nodes.iter().zip(self.weights.iter().copied())
    }

    /// Debug dump: one row per node, columns `x1..xn,t,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        header.push("t".into());
        header.push("weight".into());
        writeln!(out, "{}", header.join(","))?;
        for (p, w) in self.iter() {
            let mut row: Vec<String> = p.space().iter().map(|v| format!("{v:e}")).collect();
            row.push(format!("{:e}", p.time()));
            row.push(format!("{w:e}"));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Grid (`build_grid`) on `region` with space spacing `h`, checked against the node budget.
pub fn build_grid(region: &Region, h: f64) -> Result<QuadratureGrid> {
    build_grid_with_budget(region, h, crate::node_budget())
}

pub fn build_grid_with_budget(region: &Region, h: f64, budget: usize) -> Result<QuadratureGrid> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("grid spacing must be positive, got {h}")));
    }
    let n = region.dim();
    let (lo, hi) = region.bounding_box();
    let mut estimate = 1.0f64;
    for k in 0..=n {
        let hk = if k == n { h * h } else { h };
        estimate *= ((hi[k] - lo[k]) / hk).ceil() + 1.0;
    }
    // The bounding box overestimates curved regions by at most a small factor.
    if estimate > 8.0 * budget as f64 {
        return Err(Error::BudgetExceeded {
            requested: estimate.min(usize::MAX as f64) as usize,
            budget,
        });
    }
    let mut grid = QuadratureGrid {
        n,
        h,
        nodes: Vec::new(),
        weights: Vec::new(),
    };
    let mut prefix = [0.0; MAX_SPACE_DIM + 1];
    fill(region, h, 0, &mut prefix, 1.0, &mut grid, budget)?;
    Ok(grid)
}

/// Clipped lattice cells of spacing `hk` covering `(lo, hi)`: `(midpoint, length)`.
pub(crate) fn clipped_cells(lo: f64, hi: f64, hk: f64) -> impl Iterator<Item = (f64, f64)> {
    let first = (lo / hk).floor() as i64;
    let last = (hi / hk).ceil() as i64;
    (first..last).filter_map(move |j| {
        let a = (j as f64 * hk).max(lo);
        let b = ((j + 1) as f64 * hk).min(hi);
        (b > a).then(|| (0.5 * (a + b), b - a))
    })
}

fn fill(
    region: &Region,
    h: f64,
    k: usize,
    prefix: &mut [f64; MAX_SPACE_DIM + 1],
    weight: f64,
    grid: &mut QuadratureGrid,
    budget: usize,
) -> Result<()> {
    let n = grid.n;
    let Some((lo, hi)) = region.axis_interval(k, &prefix[..k]) else {
        return Ok(());
    };
    let hk = if k == n { h * h } else { h };
    for (mid, len) in clipped_cells(lo, hi, hk) {
        prefix[k] = mid;
        if k == n {
            let p = SpaceTimePoint::from_parts(&prefix[..n], mid);
            if region.contains(&p) {
                if grid.nodes.len() >= budget {
                    return Err(Error::BudgetExceeded {
                        requested: grid.nodes.len() + 1,
                        budget,
                    });
                }
                grid.nodes.push(p);
                grid.weights.push(weight * len);
            }
        } else {
            fill(region, h, k + 1, prefix, weight * len, grid, budget)?;
        }
    }
    Ok(())
}
