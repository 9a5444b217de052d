//! Mean values over shrinking neighborhoods, their liminf/limsup brackets,
//! and essential bounds near a set.
//!
//! A [`Bracket`] is the finite-sample stand-in for the interval of all values
//! that density measures at `C` can assign to `f`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended;
use crate::field::{dot, Field};
use crate::geometry::{
    ball_at_infinity, neighborhoods, DeltaSchedule, Region, SampleBudget, ScaleSamples, ScaleValues,
};

pub const DEFAULT_COLLAPSE_TOL: f64 = 1e-2;

/// Magnitudes beyond this are reported as `±∞`.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Growth factor per scale that marks a divergent extreme-value sequence.
const DIVERGENCE_RATIO: f64 = 1.2;

/// Tail mass of the quantile tracked alongside the sample extremes.
const DIVERGENCE_QUANTILE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    #[serde(with = "extended::real")]
    pub lo: f64,
    #[serde(with = "extended::real")]
    pub hi: f64,
    pub collapse: bool,
    #[serde(with = "extended::real")]
    pub tail_oscillation: f64,
    pub scales_used: usize,
}

impl Bracket {
    pub fn exact(v: f64) -> Self {
        Bracket {
            lo: v,
            hi: v,
            collapse: true,
            tail_oscillation: 0.0,
            scales_used: 0,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Bracket lies inside `[c - tol, c + tol]`.
    pub fn converges_to(&self, c: f64, tol: f64) -> bool {
        self.lo >= c - tol && self.hi <= c + tol
    }

    pub fn vanishes(&self, tol: f64) -> bool {
        self.converges_to(0.0, tol)
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanValueSequence {
    pub deltas: Vec<f64>,
    #[serde(with = "extended::reals")]
    pub means: Vec<f64>,
    #[serde(with = "extended::reals")]
    pub stderrs: Vec<f64>,
    pub n_accepted: Vec<usize>,
}

impl MeanValueSequence {
    pub fn new(deltas: Vec<f64>, means: Vec<f64>, stderrs: Vec<f64>) -> Result<Self> {
        let n = deltas.len();
        if means.len() != n || stderrs.len() != n {
            return Err(Error::invalid("sequence lengths differ"));
        }
        if deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("deltas must be strictly decreasing"));
        }
        Ok(MeanValueSequence {
            deltas,
            means,
            stderrs,
            n_accepted: vec![0; n],
        })
    }

    pub fn from_values(vals: &ScaleValues) -> Self {
        let (means, stderrs) = (0..vals.len()).map(|k| vals.mean(k)).unzip();
        MeanValueSequence {
            deltas: vals.deltas.clone(),
            means,
            stderrs,
            n_accepted: (0..vals.len()).map(|k| vals.finite_count(k)).collect(),
        }
    }

    /// Per-scale fractions of samples satisfying `pred`.
    pub fn from_fractions(vals: &ScaleValues, pred: impl Fn(f64) -> bool + Copy) -> Self {
        let (means, stderrs) = (0..vals.len()).map(|k| vals.fraction(k, pred)).unzip();
        MeanValueSequence {
            deltas: vals.deltas.clone(),
            means,
            stderrs,
            n_accepted: vals.values.iter().map(Vec::len).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,mean,stderr,n_accepted\n");
        for k in 0..self.len() {
            s.push_str(&format!(
                "{},{},{},{}\n",
                self.deltas[k],
                extended::fmt(self.means[k]),
                extended::fmt(self.stderrs[k]),
                self.n_accepted[k]
            ));
        }
        s
    }
}

/// Indices of the tail window: the last `max(4, len/2)` scales after burn-in.
pub fn tail_window(len: usize, burn_in: usize) -> Result<std::ops::Range<usize>> {
    if len < burn_in + 4 {
        return Err(Error::invalid(format!(
            "sequence of length {len} too short for burn-in {burn_in}"
        )));
    }
    let w = (len / 2).max(4).min(len - burn_in);
    Ok(len - w..len)
}

/// Tail min/max of the means, widened by three standard errors.
pub fn limit_bracket(seq: &MeanValueSequence, burn_in: usize, collapse_tol: f64) -> Result<Bracket> {
    if !(collapse_tol > 0.0) {
        return Err(Error::invalid("collapse tolerance must be positive"));
    }
    let tail = tail_window(seq.len(), burn_in)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut raw_lo = f64::INFINITY;
    let mut raw_hi = f64::NEG_INFINITY;
    for k in tail.clone() {
        let (m, se) = (seq.means[k], seq.stderrs[k]);
        if m.is_nan() {
            lo = f64::NEG_INFINITY;
            hi = f64::INFINITY;
            continue;
        }
        let se = if se.is_finite() { se } else { 0.0 };
        lo = lo.min(m - 3.0 * se);
        hi = hi.max(m + 3.0 * se);
        raw_lo = raw_lo.min(m);
        raw_hi = raw_hi.max(m);
    }
    let osc = if raw_hi >= raw_lo { raw_hi - raw_lo } else { f64::INFINITY };
    Ok(Bracket {
        lo,
        hi,
        collapse: hi - lo <= collapse_tol,
        tail_oscillation: osc,
        scales_used: tail.len(),
    })
}

/// Essential bound estimate: per-scale extremes plus diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssBound {
    /// Value at the finest scale, or `±∞` when the extremes diverge.
    #[serde(with = "extended::real")]
    pub value: f64,
    #[serde(with = "extended::reals")]
    pub per_scale: Vec<f64>,
    /// Extremes are monotone in δ up to three replicate standard errors.
    pub monotone: bool,
    pub divergent: bool,
    /// Spread of the per-scale extremes over the tail window.
    #[serde(with = "extended::real")]
    pub tail_spread: f64,
}

/// `Some(±∞)` when the tail of `xs` has a fixed sign and its running peak
/// magnitude grows geometrically on average, or some value exceeds the
/// overflow guard. Extremes over nested neighborhoods cannot grow for a
/// bounded field, so growth only reflects finer resolution of a singularity.
pub fn divergence(xs: &[f64]) -> Option<f64> {
    if let Some(v) = xs.iter().find(|v| v.abs() > OVERFLOW_GUARD) {
        return Some(v.signum() * f64::INFINITY);
    }
    let tail = tail_window(xs.len(), 0).ok()?;
    let t = &xs[tail];
    let sign = t[0].signum();
    let growth = DIVERGENCE_RATIO.powi(t.len() as i32 - 1);
    let peak = t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let grows = t.iter().all(|v| v.signum() == sign && v.abs() >= 1.0) && peak >= growth * t[0].abs();
    grows.then(|| sign * f64::INFINITY)
}

/// `q`-quantile of the non-NaN values.
pub(crate) fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    let idx = ((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1);
    let (_, x, _) = v.select_nth_unstable_by(idx, f64::total_cmp);
    *x
}

fn replicate_extreme_se(vals: &ScaleValues, k: usize, upper: bool) -> f64 {
    let mut start = 0;
    let mut ext = Vec::new();
    for &end in &vals.rep_ends[k] {
        let it = vals.values[k][start..end].iter().filter(|v| v.is_finite());
        let e = if upper {
            it.fold(f64::NEG_INFINITY, |a, b| a.max(*b))
        } else {
            it.fold(f64::INFINITY, |a, b| a.min(*b))
        };
        if e.is_finite() {
            ext.push(e);
        }
        start = end;
    }
    crate::geometry::sampling::mean_and_stderr(&ext).1
}

fn ess_bound(vals: &ScaleValues, upper: bool) -> EssBound {
    let per_scale: Vec<f64> = (0..vals.len())
        .map(|k| if upper { vals.max(k) } else { vals.min(k) })
        .collect();
    let monotone = (1..per_scale.len()).all(|k| {
        let noise = 3.0 * replicate_extreme_se(vals, k, upper);
        let noise = if noise.is_finite() { noise } else { 0.0 };
        if upper {
            !(per_scale[k] > per_scale[k - 1] + noise)
        } else {
            !(per_scale[k] < per_scale[k - 1] - noise)
        }
    });
    // a diverging high quantile bounds the supremum from below and is far
    // less noisy than the sample extreme
    let q = if upper { 1.0 - DIVERGENCE_QUANTILE } else { DIVERGENCE_QUANTILE };
    let quantiles: Vec<f64> = vals.values.iter().map(|v| quantile(v, q)).collect();
    let div = divergence(&per_scale).or_else(|| divergence(&quantiles));
    let tail = tail_window(per_scale.len(), 0).unwrap_or(0..per_scale.len());
    let t = &per_scale[tail];
    let spread = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - t.iter().cloned().fold(f64::INFINITY, f64::min);
    EssBound {
        value: div.unwrap_or(per_scale[per_scale.len() - 1]),
        per_scale,
        monotone,
        divergent: div.is_some(),
        tail_spread: if spread.is_nan() { f64::INFINITY } else { spread },
    }
}

/// Essential supremum from stored per-scale values.
pub fn ess_sup_of(vals: &ScaleValues) -> EssBound {
    ess_bound(vals, true)
}

pub fn ess_inf_of(vals: &ScaleValues) -> EssBound {
    ess_bound(vals, false)
}

/// Samples of `C_δ ∩ E ∩ Ω` for every scale.
pub fn local_samples(
    c: &Region,
    e: &Region,
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
) -> Result<ScaleSamples> {
    let regions = if e == omega {
        neighborhoods(c, &[omega], schedule)?
    } else {
        neighborhoods(c, &[e, omega], schedule)?
    };
    ScaleSamples::collect(schedule.deltas(), regions, budget, 0)
}

/// Mean values of `f` over `C_δ ∩ E ∩ Ω`.
pub fn mean_value_sequence(
    f: &dyn Field,
    c: &Region,
    e: &Region,
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
) -> Result<MeanValueSequence> {
    let s = local_samples(c, e, omega, schedule, budget)?;
    Ok(MeanValueSequence::from_values(&s.eval(f)))
}

pub fn ess_sup_near(
    f: &dyn Field,
    c: &Region,
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
) -> Result<EssBound> {
    let s = local_samples(c, omega, omega, schedule, budget)?;
    Ok(ess_sup_of(&s.eval(f)))
}

pub fn ess_inf_near(
    f: &dyn Field,
    c: &Region,
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
) -> Result<EssBound> {
    let s = local_samples(c, omega, omega, schedule, budget)?;
    Ok(ess_inf_of(&s.eval(f)))
}

/// Essential bounds near infinity along the diagonal `(δ_k, R_k)`, sampling
/// the truncated annuli `{1/δ_k < |p| ≤ R_k} ∩ E`.
pub fn ess_bounds_near_infinity(
    f: &dyn Field,
    e: &Region,
    schedule: &DeltaSchedule,
    r_max: &[f64],
    budget: &SampleBudget,
) -> Result<(EssBound, EssBound)> {
    schedule.validate()?;
    let deltas = schedule.deltas();
    if r_max.len() != deltas.len() {
        return Err(Error::invalid("one truncation radius per scale is required"));
    }
    if r_max.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("truncation radii must increase"));
    }
    let regions = deltas
        .iter()
        .zip(r_max)
        .map(|(d, r)| Ok(ball_at_infinity(e.dim(), *d, *r)?.and(e.clone())))
        .collect::<Result<Vec<_>>>()?;
    let s = ScaleSamples::collect(deltas, regions, budget, 0)?;
    let v = s.eval(f);
    Ok((ess_inf_of(&v), ess_sup_of(&v)))
}

/// Default truncation radii `R_k = 4/δ_k`.
pub fn default_truncation(schedule: &DeltaSchedule) -> Vec<f64> {
    schedule.deltas().iter().map(|d| 4.0 / d).collect()
}

/// Range `[ess inf, ess sup]` of values attainable by density measures at
/// `C`, together with the mean-value bracket it must contain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralRange {
    pub range: Bracket,
    pub ess_inf: EssBound,
    pub ess_sup: EssBound,
    pub mean_bracket: Bracket,
    pub sequence: MeanValueSequence,
    /// Every tail mean lies in the range up to three standard errors plus
    /// the finite-scale spread of the essential bounds.
    pub contains_means: bool,
}

pub fn integral_range_of(vals: &ScaleValues, collapse_tol: f64) -> Result<IntegralRange> {
    let lo = ess_inf_of(vals);
    let hi = ess_sup_of(vals);
    let seq = MeanValueSequence::from_values(vals);
    let mean_bracket = limit_bracket(&seq, 0, collapse_tol)?;
    let tail = tail_window(seq.len(), 0)?;
    let slack_lo = if lo.tail_spread.is_finite() { lo.tail_spread } else { 0.0 };
    let slack_hi = if hi.tail_spread.is_finite() { hi.tail_spread } else { 0.0 };
    let contains_means = tail.clone().all(|k| {
        let (m, se) = (seq.means[k], seq.stderrs[k]);
        let se = if se.is_finite() { 3.0 * se } else { 0.0 };
        m.is_nan() || (m >= lo.value - se - slack_lo && m <= hi.value + se + slack_hi)
    });
    let range = Bracket {
        lo: lo.value,
        hi: hi.value,
        collapse: hi.value - lo.value <= collapse_tol,
        tail_oscillation: slack_lo.max(slack_hi),
        scales_used: tail.len(),
    };
    Ok(IntegralRange {
        range,
        ess_inf: lo,
        ess_sup: hi,
        mean_bracket,
        sequence: seq,
        contains_means,
    })
}

pub fn density_integral_range(
    f: &dyn Field,
    c: &Region,
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    collapse_tol: f64,
) -> Result<IntegralRange> {
    let s = local_samples(c, omega, omega, schedule, budget)?;
    integral_range_of(&s.eval(f), collapse_tol)
}

/// Support function `v ↦ ess limsup F·v` of the density-measure integrals of `F`.
pub fn support_function_vector(
    f: &dyn Field,
    c: &Region,
    v: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
) -> Result<f64> {
    if v.len() != f.outputs() {
        return Err(Error::invalid("direction length must equal the number of components"));
    }
    let fv = dot(f, v.to_vec());
    Ok(ess_sup_near(&fv, c, omega, schedule, budget)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FnField, PiecewiseField};

    fn seq(means: &[f64]) -> MeanValueSequence {
        let d: Vec<f64> = (0..means.len()).map(|k| 0.5f64.powi(k as i32)).collect();
        MeanValueSequence::new(d, means.to_vec(), vec![0.0; means.len()]).unwrap()
    }

    fn budget() -> SampleBudget {
        SampleBudget::new(20_000, 3).unwrap()
    }

    #[test]
    fn bracket_of_constant_and_alternating() {
        let b = limit_bracket(&seq(&[1.0; 5]), 0, 1e-3).unwrap();
        assert_eq!((b.lo, b.hi, b.collapse), (1.0, 1.0, true));
        let alt: Vec<f64> = (0..8).map(|k| if k % 2 == 0 { 0.9 } else { -0.9 }).collect();
        let b = limit_bracket(&seq(&alt), 0, 1e-3).unwrap();
        assert_eq!((b.lo, b.hi, b.collapse), (-0.9, 0.9, false));
        assert!(limit_bracket(&seq(&[1.0; 5]), 2, 1e-3).is_err());
    }

    #[test]
    fn sin_inverse_bracket_oscillates_inside_unit_interval() {
        // oracle: composite midpoint quadrature of sin(1/x) on (0, δ) in log coordinates
        fn avg(delta: f64) -> f64 {
            let n = 400_000;
            let (a, b) = ((delta * 1e-7).ln(), delta.ln());
            let h = (b - a) / n as f64;
            let s: f64 = (0..n)
                .map(|i| {
                    let t = a + (i as f64 + 0.5) * h;
                    let x = t.exp();
                    (1.0 / x).sin() * x
                })
                .sum();
            s * h / delta
        }
        let sched = DeltaSchedule::new(0.3, 0.7, 12).unwrap();
        let f = PiecewiseField::parse(1, "sin(1/x)").unwrap();
        let omega = Region::interval(0.0, 1.0);
        let s = mean_value_sequence(&f, &Region::point(vec![0.0]), &omega, &omega, &sched, &budget()).unwrap();
        for (k, d) in s.deltas.iter().enumerate() {
            assert!((s.means[k] - avg(*d)).abs() < 0.02, "scale {k}");
        }
        let b = limit_bracket(&s, 0, 1e-3).unwrap();
        assert!(b.lo > -1.0 && b.hi < 1.0 && !b.collapse, "{b:?}");
    }

    #[test]
    fn one_sided_means_of_sign() {
        let f = PiecewiseField::parse(1, "sign(x)").unwrap();
        let c = Region::point(vec![0.0]);
        let omega = Region::interval(-1.0, 1.0);
        let sched = DeltaSchedule::default();
        let both = mean_value_sequence(&f, &c, &omega, &omega, &sched, &budget()).unwrap();
        assert!(both.means.iter().all(|m| m.abs() < 1e-2));
        let right = mean_value_sequence(&f, &c, &Region::interval(0.0, 1.0), &omega, &sched, &budget()).unwrap();
        assert!(right.means.iter().all(|m| *m == 1.0));
        let three = FnField::scalar(1, |_| 3.0);
        let s = mean_value_sequence(&three, &c, &omega, &omega, &sched, &budget()).unwrap();
        assert!(s.means.iter().all(|m| *m == 3.0));
    }

    #[test]
    fn ess_inf_is_negated_ess_sup_of_negation() {
        let f = PiecewiseField::parse(2, "sin(7*x0) + abs(x1)").unwrap();
        let g = PiecewiseField::parse(2, "-(sin(7*x0) + abs(x1))").unwrap();
        let c = Region::point(vec![0.1, 0.0]);
        let omega = Region::ball(vec![0.0, 0.0], 1.0);
        let sched = DeltaSchedule::default();
        let inf = ess_inf_near(&f, &c, &omega, &sched, &budget()).unwrap();
        let sup = ess_sup_near(&g, &c, &omega, &sched, &budget()).unwrap();
        assert_eq!(inf.value, -sup.value);
        assert!(inf.per_scale.iter().zip(&sup.per_scale).all(|(a, b)| *a == -b));
    }

    #[test]
    fn inverse_sqrt_diverges() {
        let f = PiecewiseField::parse(1, "1/sqrt(abs(x))").unwrap();
        let omega = Region::interval(-1.0, 1.0);
        let b = ess_sup_near(&f, &Region::point(vec![0.0]), &omega, &DeltaSchedule::default(), &budget()).unwrap();
        assert_eq!(b.value, f64::INFINITY);
    }

    #[test]
    fn bounds_near_infinity() {
        let sched = DeltaSchedule::default();
        let r = default_truncation(&sched);
        let space = Region::Space { dim: 1 };
        let f = PiecewiseField::parse(1, "atan(abs(x))").unwrap();
        let (lo, hi) = ess_bounds_near_infinity(&f, &space, &sched, &r, &budget()).unwrap();
        let h = std::f64::consts::FRAC_PI_2;
        assert!((lo.value - h).abs() < 1e-2 && (hi.value - h).abs() < 1e-2);
        let f = PiecewiseField::parse(1, "sin(x)").unwrap();
        let (lo, hi) = ess_bounds_near_infinity(&f, &space, &sched, &r, &budget()).unwrap();
        assert!((lo.value + 1.0).abs() < 1e-3 && (hi.value - 1.0).abs() < 1e-3);
        let bump = PiecewiseField::parse(1, "max(1 - abs(x), 0)").unwrap();
        let (lo, hi) = ess_bounds_near_infinity(&bump, &space, &sched, &r, &budget()).unwrap();
        assert_eq!((lo.value, hi.value), (0.0, 0.0));
        let bounded = Region::interval(-5.0, 5.0);
        assert!(ess_bounds_near_infinity(&bump, &bounded, &sched, &r, &budget()).is_err());
    }

    #[test]
    fn range_of_sign_and_support_function() {
        let sign = PiecewiseField::parse(1, "sign(x)").unwrap();
        let c = Region::point(vec![0.0]);
        let omega = Region::interval(-1.0, 1.0);
        let sched = DeltaSchedule::default();
        let r = density_integral_range(&sign, &c, &omega, &sched, &budget(), 1e-2).unwrap();
        assert_eq!((r.range.lo, r.range.hi), (-1.0, 1.0));
        assert!(r.contains_means);
        let f = PiecewiseField::parse(1, "sign(x); 1").unwrap();
        let w = support_function_vector(&f, &c, &[1.0, 0.0], &omega, &sched, &budget()).unwrap();
        assert_eq!(w, 1.0);
        let w0 = support_function_vector(&f, &c, &[0.0, 0.0], &omega, &sched, &budget()).unwrap();
        assert_eq!(w0, 0.0);
    }
}
