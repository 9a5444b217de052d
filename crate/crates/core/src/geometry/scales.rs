//! Sample sets across a schedule of shrinking neighborhoods, and per-scale
//! statistics of fields evaluated on them.

use rayon::prelude::*;

use super::sampling::{mean_and_stderr, sample_region, RegionSample, SampleBudget};
use super::Region;
use crate::error::Result;
use crate::field::Field;

/// One sample set per scale, sampled in parallel and kept in scale order.
#[derive(Clone, Debug)]
pub struct ScaleSamples {
    pub deltas: Vec<f64>,
    pub samples: Vec<RegionSample>,
}

impl ScaleSamples {
    /// Samples `regions[k]` for every scale `k`; streams are offset by `stream`.
    pub fn collect(
        deltas: Vec<f64>,
        regions: Vec<Region>,
        budget: &SampleBudget,
        stream: u64,
    ) -> Result<Self> {
        let samples = regions
            .par_iter()
            .enumerate()
            .map(|(k, r)| sample_region(r, budget, stream.wrapping_add(k as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScaleSamples { deltas, samples })
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn accepted(&self) -> Vec<usize> {
        self.samples.iter().map(RegionSample::len).collect()
    }

    /// Evaluates a scalar statistic `g(p)` at every sample point.
    pub fn map(&self, g: impl Fn(&[f64]) -> f64 + Sync) -> ScaleValues {
        let values = self
            .samples
            .par_iter()
            .map(|s| s.points().map(&g).collect::<Vec<f64>>())
            .collect();
        ScaleValues {
            deltas: self.deltas.clone(),
            values,
            rep_ends: self.samples.iter().map(|s| s.rep_ends.clone()).collect(),
        }
    }

    /// First component of `f` at every sample point.
    pub fn eval(&self, f: &dyn Field) -> ScaleValues {
        self.map(|p| f.value(p))
    }
}

/// Values of a scalar statistic at the samples of each scale.
#[derive(Clone, Debug)]
pub struct ScaleValues {
    pub deltas: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub rep_ends: Vec<Vec<usize>>,
}

impl ScaleValues {
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    fn replicate_stat(&self, k: usize, stat: impl Fn(&[f64]) -> Option<f64>) -> (f64, f64) {
        let mut start = 0;
        let mut reps = Vec::with_capacity(self.rep_ends[k].len());
        for &end in &self.rep_ends[k] {
            if let Some(v) = stat(&self.values[k][start..end]) {
                reps.push(v);
            }
            start = end;
        }
        mean_and_stderr(&reps)
    }

    /// Mean of the finite values, estimated as the average of replicate means.
    pub fn mean(&self, k: usize) -> (f64, f64) {
        self.replicate_stat(k, |xs| {
            let (s, c) = xs
                .iter()
                .filter(|v| v.is_finite())
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            (c > 0).then(|| s / c as f64)
        })
    }

    /// Fraction of samples satisfying `pred` (NaN never satisfies it).
    pub fn fraction(&self, k: usize, pred: impl Fn(f64) -> bool) -> (f64, f64) {
        self.replicate_stat(k, |xs| {
            (!xs.is_empty()).then(|| xs.iter().filter(|v| pred(**v)).count() as f64 / xs.len() as f64)
        })
    }

    pub fn count(&self, k: usize, pred: impl Fn(f64) -> bool) -> usize {
        self.values[k].iter().filter(|v| pred(**v)).count()
    }

    pub fn max(&self, k: usize) -> f64 {
        self.values[k]
            .iter()
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, |a, b| a.max(*b))
    }

    pub fn min(&self, k: usize) -> f64 {
        self.values[k]
            .iter()
            .filter(|v| !v.is_nan())
            .fold(f64::INFINITY, |a, b| a.min(*b))
    }

    pub fn finite_count(&self, k: usize) -> usize {
        self.values[k].iter().filter(|v| v.is_finite()).count()
    }

    /// Pointwise transform, keeping the sample structure.
    pub fn transform(&self, g: impl Fn(f64) -> f64) -> ScaleValues {
        ScaleValues {
            deltas: self.deltas.clone(),
            values: self
                .values
                .iter()
                .map(|v| v.iter().map(|x| g(*x)).collect())
                .collect(),
            rep_ends: self.rep_ends.clone(),
        }
    }
}
