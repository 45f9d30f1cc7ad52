use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::point::SpaceTimePoint;
use crate::geometry::region::Region;

/// Finite set of `(x, r)` pairs standing in for a supremum over `domain x R_+`.
///
/// Every value computed from a sampler is a lower bound for the true supremum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupSampler {
    centers: Vec<SpaceTimePoint>,
    radii: Vec<f64>,
    description: String,
    seed: Option<u64>,
}

/// Radii `r_min 2^k`, `k = 0..levels`.
pub fn dyadic_radii(r_min: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| r_min * 2f64.powi(k as i32)).collect()
}

impl SupSampler {
    pub fn new(centers: Vec<SpaceTimePoint>, radii: Vec<f64>, description: impl Into<String>) -> Result<Self> {
        if centers.is_empty() || radii.is_empty() {
            return Err(invalid("sampler needs at least one centre and one radius"));
        }
        if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid("sampler radii must be positive"));
        }
        let mut radii = radii;
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        Ok(Self {
            centers,
            radii,
            description: description.into(),
            seed: None,
        })
    }

    /// Centres on a uniform `per_axis^{n+1}` lattice of the domain's bounding box
    /// (cell midpoints), kept when inside the domain.
    pub fn lattice(domain: &Region, per_axis: usize, radii: Vec<f64>) -> Result<Self> {
        if per_axis == 0 {
            return Err(invalid("sampler lattice needs at least one centre per axis"));
        }
        let n = domain.dim();
        let (lo, hi) = domain.bounding_box();
        let total = per_axis.pow(n as u32 + 1);
        let mut centers = Vec::new();
        for flat in 0..total {
            let mut coords = [0.0; 4];
            let mut rest = flat;
            for k in (0..=n).rev() {
                let i = rest % per_axis;
                rest /= per_axis;
                coords[k] = lo[k] + (i as f64 + 0.5) / per_axis as f64 * (hi[k] - lo[k]);
            }
            let p = SpaceTimePoint::from_coords(&coords[..=n])?;
            if domain.contains(&p) {
                centers.push(p);
            }
        }
        let description = format!(
            "lattice centres {per_axis}^{} in bounding box, {} radii in [{:.4e}, {:.4e}]",
            n + 1,
            radii.len(),
            radii.iter().cloned().fold(f64::INFINITY, f64::min),
            radii.iter().cloned().fold(0.0, f64::max)
        );
        Self::new(centers, radii, description)
    }

    /// `count` centres drawn uniformly from the domain by rejection.
    pub fn random(domain: &Region, count: usize, radii: Vec<f64>, seed: u64) -> Result<Self> {
        let n = domain.dim();
        let (lo, hi) = domain.bounding_box();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers = Vec::with_capacity(count);
        let mut tries = 0usize;
        while centers.len() < count {
            tries += 1;
            if tries > 1000 * count.max(1) {
                return Err(invalid("could not draw sampler centres inside the domain"));
            }
            let coords: Vec<f64> = (0..=n).map(|k| rng.gen_range(lo[k]..hi[k])).collect();
            let p = SpaceTimePoint::from_coords(&coords)?;
            if domain.contains(&p) {
                centers.push(p);
            }
        }
        let mut s = Self::new(centers, radii, format!("{count} random centres (ChaCha8, seed {seed})"))?;
        s.seed = Some(seed);
        Ok(s)
    }

    pub fn centers(&self) -> &[SpaceTimePoint] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.centers.len() * self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples in a fixed order: centre-major, radii ascending.
    pub fn samples(&self) -> Vec<(SpaceTimePoint, f64)> {
        self.centers
            .iter()
            .flat_map(|c| self.radii.iter().map(move |r| (*c, *r)))
            .collect()
    }

    /// Same centres, radii `<= max_radius` only.
    pub fn up_to_radius(&self, max_radius: f64) -> Option<Self> {
        let radii: Vec<f64> = self.radii.iter().copied().filter(|r| *r <= max_radius).collect();
        if radii.is_empty() {
            return None;
        }
        Some(Self {
            centers: self.centers.clone(),
            radii,
            description: format!("{}; r <= {max_radius:.4e}", self.description),
            seed: self.seed,
        })
    }

    /// Union of centres and radii.
    pub fn merged(&self, other: &SupSampler) -> Self {
        let mut centers = self.centers.clone();
        for c in &other.centers {
            if !centers.contains(c) {
                centers.push(*c);
            }
        }
        let mut radii: Vec<f64> = self.radii.iter().chain(&other.radii).copied().collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        Self {
            centers,
            radii,
            description: format!("({}) ∪ ({})", self.description, other.description),
            seed: self.seed.or(other.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_centres_lie_in_domain() {
        let e = Region::ellipsoid(SpaceTimePoint::origin(2), 1.0).unwrap();
        let s = SupSampler::lattice(&e, 5, dyadic_radii(0.125, 4)).unwrap();
        assert!(s.centers().iter().all(|c| e.contains(c)));
        assert_eq!(s.radii(), &[0.125, 0.25, 0.5, 1.0]);
        assert_eq!(s.len(), s.centers().len() * 4);
    }

    #[test]
    fn random_sampler_is_reproducible() {
        let q = Region::window(2, 1.0, 0.0, 1.0).unwrap();
        let a = SupSampler::random(&q, 10, vec![0.5], 3).unwrap();
        let b = SupSampler::random(&q, 10, vec![0.5], 3).unwrap();
        assert_eq!(a.centers(), b.centers());
        assert_eq!(a.seed(), Some(3));
    }

    #[test]
    fn radius_filter_and_merge() {
        let q = Region::window(1, 1.0, 0.0, 1.0).unwrap();
        let s = SupSampler::lattice(&q, 2, dyadic_radii(0.25, 3)).unwrap();
        assert_eq!(s.up_to_radius(0.5).unwrap().radii(), &[0.25, 0.5]);
        assert!(s.up_to_radius(0.1).is_none());
        let t = SupSampler::lattice(&q, 3, vec![2.0]).unwrap();
        let m = s.merged(&t);
        assert_eq!(m.radii().len(), 4);
        assert!(m.centers().len() >= s.centers().len());
        assert!(SupSampler::new(vec![], vec![1.0], "").is_err());
    }
}
