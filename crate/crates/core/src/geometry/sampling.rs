//! Deterministic rejection sampling from bounding boxes.
//!
//! Candidates come from a randomized quasi-Monte Carlo design: a Halton
//! sequence with one Cranley–Patterson shift per replicate. The trial budget
//! is split into [`REPLICATES`] independent replicates, whose means give
//! honest standard errors. For `n ≤ 3` a jittered grid can be used instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Region;
use crate::error::{Error, Result};

/// Number of independent randomizations per sample set.
pub const REPLICATES: usize = 16;

/// Acceptance rate below which a region is treated as numerically empty.
pub const MIN_ACCEPTANCE: f64 = 1e-6;

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    QuasiMc,
    StratifiedGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBudget {
    pub points_per_scale: usize,
    pub seed: u64,
    #[serde(default)]
    pub strategy: Strategy,
}

impl SampleBudget {
    pub fn new(points_per_scale: usize, seed: u64) -> Result<Self> {
        let b = SampleBudget {
            points_per_scale,
            seed,
            strategy: Strategy::QuasiMc,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SampleBudget { seed, ..self.clone() }
    }

    /// Same seed and strategy, different point count (never below 100).
    pub fn scaled(&self, points: usize) -> Self {
        SampleBudget {
            points_per_scale: points.max(100),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_scale < 100 {
            return Err(Error::invalid(format!(
                "points per scale must be at least 100, got {}",
                self.points_per_scale
            )));
        }
        Ok(())
    }
}

/// Geometric radii `δ_k = delta0 · ratio^k`, `k = 0..count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSchedule {
    pub delta0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl DeltaSchedule {
    pub fn new(delta0: f64, ratio: f64, count: usize) -> Result<Self> {
        let s = DeltaSchedule { delta0, ratio, count };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::invalid("delta0 must be positive"));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::invalid("ratio must lie in (0, 1)"));
        }
        if self.count < 4 {
            return Err(Error::invalid("a schedule needs at least 4 scales"));
        }
        Ok(())
    }

    pub fn deltas(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.delta0 * self.ratio.powi(k as i32))
            .collect()
    }

    pub fn finest(&self) -> f64 {
        self.delta0 * self.ratio.powi(self.count as i32 - 1)
    }

    /// Index of the median scale.
    pub fn median_index(&self) -> usize {
        self.count / 2
    }
}

impl Default for DeltaSchedule {
    fn default() -> Self {
        DeltaSchedule {
            delta0: 0.3,
            ratio: 0.5,
            count: 10,
        }
    }
}

/// Accepted points of one sampling run, grouped by replicate.
#[derive(Clone, Debug)]
pub struct RegionSample {
    pub dim: usize,
    /// Row-major coordinates of the accepted points.
    pub coords: Vec<f64>,
    /// End offset (in points) of each replicate.
    pub rep_ends: Vec<usize>,
    /// Trials per replicate.
    pub rep_trials: Vec<usize>,
    /// Volume of the sampled bounding box.
    pub bbox_volume: f64,
}

impl RegionSample {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim.max(1))
    }

    pub fn trials(&self) -> usize {
        self.rep_trials.iter().sum()
    }

    pub fn acceptance(&self) -> f64 {
        self.len() as f64 / self.trials().max(1) as f64
    }

    /// Index ranges of the replicates.
    pub fn replicates(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let mut start = 0;
        self.rep_ends.iter().map(move |&end| {
            let r = start..end;
            start = end;
            r
        })
    }

    /// Measure estimate `vol(bbox)·acceptance` and its replicate standard error.
    pub fn measure(&self) -> (f64, f64) {
        let fracs: Vec<f64> = self
            .replicates()
            .zip(&self.rep_trials)
            .map(|(r, &t)| r.len() as f64 / t.max(1) as f64)
            .collect();
        let (mean, se) = mean_and_stderr(&fracs);
        (self.bbox_volume * mean, self.bbox_volume * se)
    }
}

pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for `(seed, stream, replicate)`.
pub fn stream_rng(seed: u64, stream: u64, rep: u64) -> ChaCha8Rng {
    let s = splitmix(splitmix(seed ^ 0xD1B5_4A32_D192_ED03).wrapping_add(stream))
        .wrapping_add(rep.wrapping_mul(0x2545_F491_4F6C_DD1D));
    ChaCha8Rng::seed_from_u64(splitmix(s))
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Unit-cube candidates for one replicate.
fn unit_candidates(
    dim: usize,
    count: usize,
    strategy: Strategy,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(count * dim);
    if strategy == Strategy::StratifiedGrid && dim <= 3 {
        let m = ((count as f64).powf(1.0 / dim as f64).floor() as usize).max(1);
        let cells = m.pow(dim as u32);
        for c in 0..cells {
            let mut idx = c;
            for _ in 0..dim {
                let cell = idx % m;
                idx /= m;
                out.push((cell as f64 + rng.gen::<f64>()) / m as f64);
            }
        }
        // top up the remainder with plain random points
        for _ in cells..count {
            for _ in 0..dim {
                out.push(rng.gen::<f64>());
            }
        }
        return out;
    }
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    for i in 0..count {
        for (d, s) in shift.iter().enumerate() {
            let u = radical_inverse(i as u64 + 1, PRIMES[d]) + s;
            out.push(u - u.floor());
        }
    }
    out
}

/// Rejection-samples `region` with `budget.points_per_scale` trials from its
/// bounding box. `stream` separates independent uses of the same budget.
pub fn sample_region(region: &Region, budget: &SampleBudget, stream: u64) -> Result<RegionSample> {
    budget.validate()?;
    let dim = region.dim();
    if dim == 0 || dim > PRIMES.len() {
        return Err(Error::invalid(format!("unsupported dimension {dim}")));
    }
    let bbox = region.bbox();
    if !bbox.is_finite() {
        return Err(Error::invalid(format!(
            "region of kind '{}' has an unbounded bounding box",
            region.kind_name()
        )));
    }
    let vol = bbox.volume();
    if !(vol > 0.0) {
        return Err(Error::invalid(format!(
            "region of kind '{}' has a zero-volume bounding box",
            region.kind_name()
        )));
    }
    let n = budget.points_per_scale;
    let mut coords = Vec::new();
    let mut rep_ends = Vec::with_capacity(REPLICATES);
    let mut rep_trials = Vec::with_capacity(REPLICATES);
    let mut p = vec![0.0; dim];
    for rep in 0..REPLICATES {
        let count = n / REPLICATES + usize::from(rep < n % REPLICATES);
        let mut rng = stream_rng(budget.seed, stream, rep as u64);
        let unit = unit_candidates(dim, count, budget.strategy, &mut rng);
        for u in unit.chunks_exact(dim) {
            for d in 0..dim {
                p[d] = bbox.lo[d] + u[d] * (bbox.hi[d] - bbox.lo[d]);
            }
            if region.contains(&p) {
                coords.extend_from_slice(&p);
            }
        }
        rep_ends.push(coords.len() / dim);
        rep_trials.push(count);
    }
    let s = RegionSample {
        dim,
        coords,
        rep_ends,
        rep_trials,
        bbox_volume: vol,
    };
    let acc = s.acceptance();
    if s.is_empty() || acc < MIN_ACCEPTANCE {
        return Err(Error::EmptyRegion {
            acceptance: acc,
            trials: s.trials(),
        });
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_reproducible_and_inside() {
        let r = Region::interval(0.0, 1.0);
        let b = SampleBudget::new(1000, 7).unwrap();
        let a = sample_region(&r, &b, 0).unwrap();
        let c = sample_region(&r, &b, 0).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a.coords, c.coords);
        assert!(a.points().all(|p| p[0] > 0.0 && p[0] < 1.0));
        let d = sample_region(&r, &b.with_seed(8), 0).unwrap();
        assert_ne!(a.coords, d.coords);
    }

    #[test]
    fn schedule_and_budget_validation() {
        assert!(DeltaSchedule::new(0.3, 0.5, 3).is_err());
        assert!(DeltaSchedule::new(0.3, 1.0, 5).is_err());
        assert!(SampleBudget::new(99, 0).is_err());
        let s = DeltaSchedule::default();
        let d = s.deltas();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(d.len(), 10);
    }

    #[test]
    fn stratified_grid_covers_cells() {
        let r = Region::boxed(vec![0.0, 0.0], vec![1.0, 1.0]);
        let b = SampleBudget::new(1600, 1).unwrap().with_strategy(Strategy::StratifiedGrid);
        let s = sample_region(&r, &b, 0).unwrap();
        assert_eq!(s.len(), 1600);
        let (m, _) = s.measure();
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn halton_radical_inverse() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(4, 3) - (1.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }
}
