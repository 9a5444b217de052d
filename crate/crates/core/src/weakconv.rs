//! One-sided tests for weak convergence of explicit sequences in `L∞(Ω)`.
//!
//! Every criterion is applied to the differences `f_k - f`, so that the
//! same density measure is used for `f_k` and `f` at each probe. The
//! sufficient test can only return `WeaklyConvergent`, the necessary tests
//! only `NotWeaklyConvergent`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::extended;
use crate::field::{linear_combination, Field, PiecewiseField};
use crate::geometry::{density_point_test, sample_region, DeltaSchedule, Region, SampleBudget};
use crate::local_limits::Neighborhood;
use crate::meanvalue::{default_truncation, ess_bounds_near_infinity, ess_inf_of, ess_sup_of};

pub type Generator = Arc<dyn Fn(usize) -> PiecewiseField + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Interior,
    Boundary,
    Infinity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub kind: ProbeKind,
    /// Empty for the probe at infinity.
    pub point: Vec<f64>,
}

impl Probe {
    pub fn interior(p: Vec<f64>) -> Self {
        Probe { kind: ProbeKind::Interior, point: p }
    }

    pub fn boundary(p: Vec<f64>) -> Self {
        Probe { kind: ProbeKind::Boundary, point: p }
    }

    pub fn infinity() -> Self {
        Probe { kind: ProbeKind::Infinity, point: vec![] }
    }
}

/// Witness for the intersection criterion: a threshold and a subsequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionWitness {
    pub gamma: f64,
    pub subsequence: Vec<usize>,
    pub m_max: usize,
}

/// `k ↦ f_k` for `k = 1..=k_max` with a limit candidate on a common domain.
#[derive(Clone)]
pub struct FunctionSequence {
    pub name: String,
    pub omega: Region,
    pub k_max: usize,
    pub generator: Generator,
    pub limit: PiecewiseField,
    /// Explicit probes; defaults are derived from `omega` when empty.
    pub probes: Vec<Probe>,
    /// Within-region probes `(x, E)`.
    pub region_probes: Vec<(Vec<f64>, Region)>,
    pub witness: Option<IntersectionWitness>,
}

impl std::fmt::Debug for FunctionSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionSequence")
            .field("name", &self.name)
            .field("k_max", &self.k_max)
            .finish_non_exhaustive()
    }
}

impl FunctionSequence {
    pub fn new(name: &str, omega: Region, k_max: usize, generator: Generator, limit: PiecewiseField) -> Self {
        FunctionSequence {
            name: name.into(),
            omega,
            k_max,
            generator,
            limit,
            probes: vec![],
            region_probes: vec![],
            witness: None,
        }
    }

    pub fn term(&self, k: usize) -> PiecewiseField {
        (self.generator)(k)
    }

    fn validate(&self) -> Result<()> {
        if self.k_max < 3 {
            return Err(Error::invalid("k_max must be at least 3"));
        }
        let n = self.omega.dim();
        if self.limit.dim != n || self.term(1).dim != n {
            return Err(Error::invalid("sequence and domain dimensions differ"));
        }
        Ok(())
    }

    /// Indices `k` of the tail window: the last `⌈k_max/3⌉`.
    pub fn tail(&self) -> std::ops::RangeInclusive<usize> {
        let w = self.k_max.div_ceil(3);
        self.k_max + 1 - w..=self.k_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    WeaklyConvergent,
    NotWeaklyConvergent,
    Inconclusive,
    ConsistentWithWeak,
}

/// Interior grid points, boundary grid points that are density points, and
/// a probe at infinity for unbounded domains.
pub fn default_probes(
    omega: &Region,
    per_axis: usize,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
) -> Result<Vec<Probe>> {
    let b = omega.bbox();
    if !b.is_finite() {
        return Ok(vec![Probe::infinity()]);
    }
    let n = b.dim();
    let steps = per_axis + 1;
    let total = (steps + 1).pow(n as u32);
    let probe_budget = budget.scaled(budget.points_per_scale.min(2_000));
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let p: Vec<f64> = (0..n)
            .map(|i| {
                let j = rem % (steps + 1);
                rem /= steps + 1;
                b.lo[i] + (b.hi[i] - b.lo[i]) * j as f64 / steps as f64
            })
            .collect();
        let on_edge = p.iter().enumerate().any(|(i, v)| *v == b.lo[i] || *v == b.hi[i]);
        if omega.contains(&p) && !on_edge {
            out.push(Probe::interior(p));
        } else if density_point_test(&p, omega, schedule, &probe_budget)? {
            out.push(Probe::boundary(p));
        }
    }
    Ok(out)
}

fn probes_of(seq: &FunctionSequence, schedule: &DeltaSchedule, budget: &SampleBudget) -> Result<Vec<Probe>> {
    if seq.probes.is_empty() {
        default_probes(&seq.omega, 4, schedule, budget)
    } else {
        Ok(seq.probes.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrace {
    pub probe: Probe,
    /// Per-k statistic; meaning depends on the test.
    #[serde(with = "extended::reals")]
    pub values: Vec<f64>,
    /// The tail of `values` meets the test's condition.
    pub passes: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub verdict: Verdict,
    pub traces: Vec<ProbeTrace>,
}

/// `max(|ess sup|, |ess inf|)` of `f_k - f` near the probe at the finest scale.
fn ess_deviation(
    d: &dyn Field,
    probe: &Probe,
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    nb: Option<&Neighborhood>,
) -> Result<f64> {
    let (lo, hi) = match probe.kind {
        ProbeKind::Infinity => {
            let (lo, hi) = ess_bounds_near_infinity(d, omega, schedule, &default_truncation(schedule), budget)?;
            (lo.value, hi.value)
        }
        _ => {
            let vals = nb.expect("finite probes have neighborhoods").values(d);
            (ess_inf_of(&vals).value, ess_sup_of(&vals).value)
        }
    };
    Ok(lo.abs().max(hi.abs()))
}

fn probe_neighborhood(
    probe: &Probe,
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<Option<Neighborhood>> {
    match probe.kind {
        ProbeKind::Infinity => Ok(None),
        _ => Ok(Some(Neighborhood::new(&probe.point, omega, schedule, budget, tol)?)),
    }
}

/// Essential bounds of `f_k - f` tend to 0 at every probe.
pub fn sufficient_test(
    seq: &FunctionSequence,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<TestReport> {
    seq.validate()?;
    let mut traces = Vec::new();
    for probe in probes_of(seq, schedule, budget)? {
        let nb = probe_neighborhood(&probe, &seq.omega, schedule, budget, tol)?;
        let values = (1..=seq.k_max)
            .map(|k| {
                let fk = seq.term(k);
                let d = linear_combination(1.0, &fk, -1.0, &seq.limit)?;
                ess_deviation(&d, &probe, &seq.omega, schedule, budget, nb.as_ref())
            })
            .collect::<Result<Vec<f64>>>()?;
        let passes = seq.tail().all(|k| values[k - 1] <= tol.weak_tol);
        traces.push(ProbeTrace {
            probe,
            values,
            passes,
            note: None,
        });
    }
    let verdict = if traces.iter().all(|t| t.passes) {
        Verdict::WeaklyConvergent
    } else {
        Verdict::Inconclusive
    };
    Ok(TestReport {
        test: "sufficient".into(),
        verdict,
        traces,
    })
}

/// Collapsed precise values of `f_k - f`; the per-k value is NaN when the
/// bracket does not collapse.
fn precise_deviations(seq: &FunctionSequence, nb: &Neighborhood) -> Result<Vec<f64>> {
    (1..=seq.k_max)
        .map(|k| {
            let fk = seq.term(k);
            let d = linear_combination(1.0, &fk, -1.0, &seq.limit)?;
            let pr = nb.precise(&d);
            Ok(pr.value.map_or(f64::NAN, |v| v[0]))
        })
        .collect()
}

fn necessary_trace(seq: &FunctionSequence, probe: Probe, nb: &Neighborhood, tol: &Tolerances) -> Result<ProbeTrace> {
    let values = precise_deviations(seq, nb)?;
    let tail: Vec<f64> = seq.tail().map(|k| values[k - 1]).collect();
    let skipped = tail.iter().any(|v| v.is_nan());
    // `passes` marks a violation: the deviation stays above tolerance
    let passes = !skipped && tail.iter().all(|v| v.abs() > tol.weak_tol);
    Ok(ProbeTrace {
        probe,
        values,
        passes,
        note: skipped.then(|| "bracket did not collapse on the tail; probe skipped".to_string()),
    })
}

/// Precise values of `f_k - f` fail to tend to 0 at some probe.
pub fn necessary_precise_test(
    seq: &FunctionSequence,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<TestReport> {
    seq.validate()?;
    let mut traces = Vec::new();
    for probe in probes_of(seq, schedule, budget)? {
        if probe.kind == ProbeKind::Infinity {
            continue;
        }
        let nb = Neighborhood::new(&probe.point, &seq.omega, schedule, budget, tol)?;
        traces.push(necessary_trace(seq, probe, &nb, tol)?);
    }
    Ok(TestReport {
        test: "necessary_precise".into(),
        verdict: if traces.iter().any(|t| t.passes) {
            Verdict::NotWeaklyConvergent
        } else {
            Verdict::Inconclusive
        },
        traces,
    })
}

/// As the precise test, with mean values taken within `E`.
pub fn region_probe_test(
    seq: &FunctionSequence,
    x: &[f64],
    e: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<TestReport> {
    seq.validate()?;
    let samples = crate::meanvalue::local_samples(&Region::point(x.to_vec()), e, &seq.omega, schedule, budget)?;
    let nb = Neighborhood::from_samples(x, samples, tol);
    let trace = necessary_trace(seq, Probe::boundary(x.to_vec()), &nb, tol)?;
    Ok(TestReport {
        test: "region_probe".into(),
        verdict: if trace.passes {
            Verdict::NotWeaklyConvergent
        } else {
            Verdict::Inconclusive
        },
        traces: vec![trace],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub witness: IntersectionWitness,
    /// `λ(⋂_{j≤m} {|f_{k_j} - f| > γ})` for `m = 1..=m_max`.
    pub measures: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub verdict: Verdict,
}

/// Joint-membership estimate of the intersections along the witness.
pub fn intersection_criterion(
    seq: &FunctionSequence,
    witness: &IntersectionWitness,
    budget: &SampleBudget,
) -> Result<IntersectionReport> {
    seq.validate()?;
    if !(witness.gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    if witness.subsequence.is_empty()
        || witness.subsequence.windows(2).any(|w| w[1] <= w[0])
        || witness.subsequence[0] == 0
    {
        return Err(Error::invalid("subsequence must be nonempty, positive and increasing"));
    }
    let m_max = witness.m_max.min(witness.subsequence.len());
    if m_max == 0 {
        return Err(Error::invalid("m_max must be positive"));
    }
    let sample = sample_region(&seq.omega, budget, 0x1A7)?;
    let vol = sample.bbox_volume;
    let terms: Vec<PiecewiseField> = witness.subsequence[..m_max].iter().map(|&k| seq.term(k)).collect();
    let trials = sample.rep_trials.clone();
    // per point: number of leading terms whose deviation exceeds γ
    let depth: Vec<usize> = sample
        .points()
        .map(|p| {
            let f = seq.limit.value(p);
            terms
                .iter()
                .take_while(|t| (t.value(p) - f).abs() > witness.gamma)
                .count()
        })
        .collect();
    let mut measures = Vec::with_capacity(m_max);
    let mut stderrs = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let per_rep: Vec<f64> = sample
            .replicates()
            .zip(&trials)
            .map(|(r, t)| vol * depth[r].iter().filter(|d| **d >= m).count() as f64 / *t as f64)
            .collect();
        let (mean, se) = crate::geometry::sampling::mean_and_stderr(&per_rep);
        measures.push(mean);
        stderrs.push(se);
    }
    let violated = measures.iter().zip(&stderrs).all(|(m, s)| *m > 0.0 && *m >= 3.0 * s);
    Ok(IntersectionReport {
        witness: witness.clone(),
        measures,
        stderrs,
        verdict: if violated {
            Verdict::NotWeaklyConvergent
        } else {
            Verdict::ConsistentWithWeak
        },
    })
}

/// `sup |f_k - f|` over samples of `Ω`, per k.
pub fn sup_norms(seq: &FunctionSequence, budget: &SampleBudget) -> Result<Vec<f64>> {
    let sample = sample_region(&seq.omega, budget, 0x5A9)?;
    Ok((1..=seq.k_max)
        .map(|k| {
            let fk = seq.term(k);
            sample
                .points()
                .map(|p| (fk.value(p) - seq.limit.value(p)).abs())
                .fold(0.0, f64::max)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakConvReport {
    pub sequence: String,
    pub k_max: usize,
    pub verdict: Verdict,
    pub sufficient: TestReport,
    pub necessary: TestReport,
    pub region_probes: Vec<TestReport>,
    pub intersection: Option<IntersectionReport>,
    #[serde(with = "extended::reals")]
    pub sup_norms: Vec<f64>,
}

/// Runs every criterion and reconciles: any violation wins, positive
/// verdicts only come from the sufficient test.
pub fn weak_conv_report(
    seq: &FunctionSequence,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<WeakConvReport> {
    let sufficient = sufficient_test(seq, schedule, budget, tol)?;
    let necessary = necessary_precise_test(seq, schedule, budget, tol)?;
    let region_probes = seq
        .region_probes
        .iter()
        .map(|(x, e)| region_probe_test(seq, x, e, schedule, budget, tol))
        .collect::<Result<Vec<_>>>()?;
    let intersection = seq
        .witness
        .as_ref()
        .map(|w| intersection_criterion(seq, w, budget))
        .transpose()?;
    let negative = necessary.verdict == Verdict::NotWeaklyConvergent
        || region_probes.iter().any(|r| r.verdict == Verdict::NotWeaklyConvergent)
        || intersection.as_ref().is_some_and(|r| r.verdict == Verdict::NotWeaklyConvergent);
    let positive = sufficient.verdict == Verdict::WeaklyConvergent;
    if positive && negative {
        return Err(Error::InternalConsistency(format!(
            "sequence '{}': the sufficient test and a necessary test disagree; tolerances are miscalibrated",
            seq.name
        )));
    }
    let verdict = if negative {
        Verdict::NotWeaklyConvergent
    } else if positive {
        Verdict::WeaklyConvergent
    } else {
        Verdict::Inconclusive
    };
    Ok(WeakConvReport {
        sequence: seq.name.clone(),
        k_max: seq.k_max,
        verdict,
        sufficient,
        necessary,
        region_probes,
        intersection,
        sup_norms: sup_norms(seq, budget)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn unit() -> Region {
        Region::interval(0.0, 1.0)
    }

    fn chi(a: f64, b: f64) -> PiecewiseField {
        PiecewiseField::scalar(1, Expr::indicator(Region::interval(a, b))).unwrap()
    }

    fn zero() -> PiecewiseField {
        PiecewiseField::parse(1, "0").unwrap()
    }

    fn dyadic() -> FunctionSequence {
        let g: Generator = Arc::new(|k| chi(0.5f64.powi(k as i32 + 1), 0.5f64.powi(k as i32)));
        let mut s = FunctionSequence::new("dyadic", unit(), 8, g, zero());
        s.witness = Some(IntersectionWitness { gamma: 0.5, subsequence: vec![1, 2, 3, 4], m_max: 4 });
        s
    }

    fn shrinking() -> FunctionSequence {
        let g: Generator = Arc::new(|k| chi(0.0, 1.0 / k as f64));
        FunctionSequence::new("shrinking", unit(), 20, g, zero())
    }

    fn run() -> (DeltaSchedule, SampleBudget, Tolerances) {
        (DeltaSchedule::default(), SampleBudget::new(20_000, 2).unwrap(), Tolerances::default())
    }

    #[test]
    fn tail_window() {
        assert_eq!(dyadic().tail(), 6..=8);
        assert_eq!(shrinking().tail(), 14..=20);
    }

    #[test]
    fn default_probe_set_of_interval() {
        let (s, b, _) = run();
        let p = default_probes(&unit(), 4, &s, &b).unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p.iter().filter(|p| p.kind == ProbeKind::Boundary).count(), 2);
        let q = default_probes(&Region::Space { dim: 1 }, 4, &s, &b).unwrap();
        assert_eq!(q, vec![Probe::infinity()]);
    }

    #[test]
    fn dyadic_blocks_converge_weakly_not_in_norm() {
        let (s, b, t) = run();
        let r = weak_conv_report(&dyadic(), &s, &b, &t).unwrap();
        assert_eq!(r.verdict, Verdict::WeaklyConvergent);
        assert_eq!(r.intersection.as_ref().unwrap().verdict, Verdict::ConsistentWithWeak);
        assert_eq!(r.intersection.unwrap().measures[1], 0.0);
        assert!(r.sup_norms.iter().all(|n| *n >= 0.98), "{:?}", r.sup_norms);
    }

    #[test]
    fn shrinking_intervals_are_caught_at_the_boundary() {
        let (s, b, t) = run();
        let seq = shrinking();
        assert_eq!(sufficient_test(&seq, &s, &b, &t).unwrap().verdict, Verdict::Inconclusive);
        let n = necessary_precise_test(&seq, &s, &b, &t).unwrap();
        assert_eq!(n.verdict, Verdict::NotWeaklyConvergent);
        let at0 = n.traces.iter().find(|t| t.probe.point == vec![0.0]).unwrap();
        assert!(at0.values.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn constant_sequences() {
        let (s, b, t) = run();
        let g: Generator = Arc::new(|_| chi(0.0, 0.5));
        let same = FunctionSequence::new("same", unit(), 6, g.clone(), chi(0.0, 0.5));
        let r = weak_conv_report(&same, &s, &b, &t).unwrap();
        assert_eq!(r.verdict, Verdict::WeaklyConvergent);
        let w = IntersectionWitness { gamma: 0.5, subsequence: vec![1, 2, 3], m_max: 3 };
        assert_eq!(intersection_criterion(&same, &w, &b).unwrap().verdict, Verdict::ConsistentWithWeak);
        let off = FunctionSequence::new("off", unit(), 6, g, zero());
        let r = intersection_criterion(&off, &w, &b).unwrap();
        assert_eq!(r.verdict, Verdict::NotWeaklyConvergent);
        assert!(r.measures.iter().all(|m| (m - 0.5).abs() < 1e-2));
    }
}
