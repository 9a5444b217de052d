//! Local behavior of a field at a point: essential and approximate limits,
//! upper/lower approximate limits, Lebesgue points, the precise
//! representative and essential values.
//!
//! All quantities at one point are computed from a single set of samples of
//! `B_δ(x) ∩ Ω` per scale, so derived statistics are mutually consistent.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::extended;
use crate::field::{component, deviation, Field};
use crate::geometry::{DeltaSchedule, Region, SampleBudget, ScaleSamples, ScaleValues};
use crate::meanvalue::{
    divergence, ess_inf_of, quantile, ess_sup_of, limit_bracket, local_samples, Bracket, EssBound,
    MeanValueSequence,
};

/// Relative bisection tolerance for the upper/lower approximate limits.
const BISECTION_TOL: f64 = 1e-3;

/// Samples of `B_δ(x) ∩ Ω` across a schedule, with the tolerances applied to
/// every derived test.
#[derive(Clone, Debug)]
pub struct Neighborhood {
    pub point: Vec<f64>,
    pub samples: ScaleSamples,
    pub tol: Tolerances,
}

impl Neighborhood {
    /// Fails with invalid-argument when `x` is not a density point of `Ω`.
    pub fn new(
        x: &[f64],
        omega: &Region,
        schedule: &DeltaSchedule,
        budget: &SampleBudget,
        tol: &Tolerances,
    ) -> Result<Self> {
        Self::within(x, omega, omega, schedule, budget, tol)
    }

    /// Samples of `B_δ(x) ∩ E ∩ Ω`.
    pub fn within(
        x: &[f64],
        e: &Region,
        omega: &Region,
        schedule: &DeltaSchedule,
        budget: &SampleBudget,
        tol: &Tolerances,
    ) -> Result<Self> {
        if x.len() != omega.dim() {
            return Err(Error::invalid("point and domain dimensions differ"));
        }
        let samples = local_samples(&Region::point(x.to_vec()), e, omega, schedule, budget)
            .map_err(|err| match err {
                Error::EmptyRegion { acceptance, .. } => Error::invalid(format!(
                    "point {x:?} is not a density point of the domain (acceptance {acceptance:.2e})"
                )),
                other => other,
            })?;
        Ok(Neighborhood {
            point: x.to_vec(),
            samples,
            tol: tol.clone(),
        })
    }

    /// Neighborhood statistics over precomputed samples, e.g. annular shells.
    pub fn from_samples(point: &[f64], samples: ScaleSamples, tol: &Tolerances) -> Self {
        Neighborhood {
            point: point.to_vec(),
            samples,
            tol: tol.clone(),
        }
    }

    pub fn values(&self, f: &dyn Field) -> ScaleValues {
        self.samples.eval(f)
    }

    /// Bracket of the density ratio of `{pred(value)}` in the neighborhood.
    pub fn density_bracket(&self, vals: &ScaleValues, pred: impl Fn(f64) -> bool + Copy) -> Bracket {
        let seq = MeanValueSequence::from_fractions(vals, pred);
        limit_bracket(&seq, 0, self.tol.collapse_tol).expect("schedule has at least 4 scales")
    }

    /// The density of `{pred}` is below `density_tol` on the two finest scales.
    fn density_vanishes(&self, vals: &ScaleValues, pred: impl Fn(f64) -> bool + Copy) -> bool {
        let n = vals.len();
        (n - 2..n).all(|k| {
            let (m, se) = vals.fraction(k, pred);
            m + 3.0 * se <= self.tol.density_tol
        })
    }

    pub fn mean_bracket(&self, vals: &ScaleValues) -> (MeanValueSequence, Bracket) {
        let seq = MeanValueSequence::from_values(vals);
        let b = limit_bracket(&seq, 0, self.tol.collapse_tol).expect("schedule has at least 4 scales");
        (seq, b)
    }

    /// Componentwise ball-average brackets; the value is the finest-scale
    /// average when every component collapses.
    pub fn precise(&self, f: &dyn Field) -> Precise {
        let mut brackets = Vec::new();
        let mut finest = Vec::new();
        for i in 0..f.outputs() {
            let c = component(f, i);
            let (seq, b) = self.mean_bracket(&self.values(&c));
            finest.push(seq.means[seq.len() - 1]);
            brackets.push(b);
        }
        let value = (brackets.iter().all(|b| b.collapse) && finest.iter().all(|v| v.is_finite()))
            .then(|| finest.clone());
        Precise {
            brackets,
            finest,
            value,
        }
    }

    /// Essential limit: the precise value α if `ess limsup |f - α| ≤ accept_tol`.
    pub fn essential_limit(&self, f: &dyn Field) -> Option<Vec<f64>> {
        let alpha = self.precise(f).value?;
        self.essential_limit_at(f, &alpha).then_some(alpha)
    }

    pub fn essential_limit_at(&self, f: &dyn Field, alpha: &[f64]) -> bool {
        let dev = deviation(f, alpha.to_vec());
        let b = ess_sup_of(&self.values(&dev));
        !b.divergent && b.value <= self.tol.accept_tol
    }

    /// `α` passes the ε-grid density test for `{|f - α| ≥ ε}`.
    pub fn approximate_limit_at(&self, f: &dyn Field, alpha: &[f64]) -> bool {
        let dev = self.values(&deviation(f, alpha.to_vec()));
        self.tol
            .eps_grid
            .iter()
            .all(|&eps| self.density_vanishes(&dev, move |v| v >= eps || v.is_nan()))
    }

    /// Lower and upper approximate limits of a scalar field from stored values.
    pub fn approx_lim_inf_sup(&self, vals: &ScaleValues) -> (f64, f64) {
        let q = self.tol.density_tol;
        let k_all = 0..vals.len();
        let lower_q: Vec<f64> = k_all.clone().map(|k| quantile(&vals.values[k], q)).collect();
        let upper_q: Vec<f64> = k_all.map(|k| quantile(&vals.values[k], 1.0 - q)).collect();
        let tail = crate::meanvalue::tail_window(vals.len(), 0).expect("schedule has at least 4 scales");
        let a = tail.clone().map(|k| vals.min(k)).fold(f64::INFINITY, f64::min);
        let b = tail.map(|k| vals.max(k)).fold(f64::NEG_INFINITY, f64::max);
        let inf = match divergence(&lower_q) {
            Some(v) => v,
            None => self.bisect(vals, a, b, false),
        };
        let sup = match divergence(&upper_q) {
            Some(v) => v,
            None => self.bisect(vals, a, b, true),
        };
        // the density test reads two scales, the essential bounds only the
        // finest; {f > ess sup} is null on every smaller ball, so clamp
        let (lo, hi) = (ess_inf_of(vals).value, ess_sup_of(vals).value);
        (if inf < lo { lo } else { inf }, if sup > hi { hi } else { sup })
    }

    /// Upper: smallest α with vanishing density of `{f > α}`.
    /// Lower: largest α with vanishing density of `{f < α}`.
    fn bisect(&self, vals: &ScaleValues, a: f64, b: f64, upper: bool) -> f64 {
        if !(a.is_finite() && b.is_finite()) {
            return f64::NAN;
        }
        let test = |alpha: f64| {
            if upper {
                self.density_vanishes(vals, move |v| v > alpha)
            } else {
                self.density_vanishes(vals, move |v| v < alpha)
            }
        };
        // `good` always satisfies the test, `bad` never does
        let (mut good, mut bad) = if upper { (b, a) } else { (a, b) };
        if test(bad) {
            return bad;
        }
        let stop = BISECTION_TOL * (b - a).max(f64::MIN_POSITIVE);
        while (good - bad).abs() > stop {
            let mid = 0.5 * (good + bad);
            // adjacent floats: a range of a few ulps never shrinks below `stop`
            if mid == good || mid == bad {
                break;
            }
            if test(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    }

    /// Approximate limit with the scalar `±∞` extension.
    pub fn approximate_limit(&self, f: &dyn Field) -> ApproxLimit {
        let pr = self.precise(f);
        if pr.finest.iter().all(|v| v.is_finite()) && self.approximate_limit_at(f, &pr.finest) {
            return ApproxLimit::Value(pr.finest);
        }
        if f.outputs() != 1 {
            return ApproxLimit::None;
        }
        let (lo, hi) = self.approx_lim_inf_sup(&self.values(f));
        if lo == f64::INFINITY {
            return ApproxLimit::PlusInfinity;
        }
        if hi == f64::NEG_INFINITY {
            return ApproxLimit::MinusInfinity;
        }
        if lo.is_finite() && hi.is_finite() && hi - lo <= self.tol.accept_tol {
            let alpha = vec![0.5 * (lo + hi)];
            if self.approximate_limit_at(f, &alpha) {
                return ApproxLimit::Value(alpha);
            }
        }
        ApproxLimit::None
    }

    /// Ball averages of `|f - α|` vanish.
    pub fn lebesgue_point(&self, f: &dyn Field, alpha: &[f64]) -> bool {
        let dev = deviation(f, alpha.to_vec());
        self.mean_bracket(&self.values(&dev)).1.vanishes(self.tol.accept_tol)
    }

    pub fn mean_residual(&self, f: &dyn Field, alpha: &[f64]) -> MeanResidual {
        let holds = self.lebesgue_point(f, alpha);
        let norm = self.values(&deviation(f, vec![0.0; f.outputs()]));
        let sup = ess_sup_of(&norm);
        let alim_agrees = self.approximate_limit_at(f, alpha);
        MeanResidual {
            holds,
            implies_alim: holds,
            converse_valid: !sup.divergent && sup.value.is_finite(),
            alim_agrees,
        }
    }

    /// Grid values `γ` attained within `ε` on a set of positive measure at
    /// every tail scale.
    pub fn essential_values(&self, f: &dyn Field, grid: &[f64]) -> EssentialValues {
        let vals = self.values(f);
        let mut sorted = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        let spacing = sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min);
        let eps = if spacing.is_finite() { (0.5 * spacing).max(0.01) } else { 0.01 };
        let tail = crate::meanvalue::tail_window(vals.len(), 0).expect("schedule has at least 4 scales");
        let values: Vec<f64> = grid
            .iter()
            .copied()
            .filter(|&g| tail.clone().all(|k| vals.count(k, |v| (v - g).abs() < eps) > 0))
            .collect();
        let lo = ess_inf_of(&vals).value;
        let hi = ess_sup_of(&vals).value;
        let within_range = values
            .iter()
            .all(|v| *v >= lo - self.tol.accept_tol - eps && *v <= hi + self.tol.accept_tol + eps);
        EssentialValues {
            values,
            eps,
            within_range,
        }
    }

    /// Full local profile of the first component of `f`.
    pub fn profile(&self, f: &dyn Field) -> ProfileReport {
        let f0 = component(f, 0);
        let vals = self.values(&f0);
        let sup = ess_sup_of(&vals);
        let inf = ess_inf_of(&vals);
        let (alim_inf, alim_sup) = self.approx_lim_inf_sup(&vals);
        let pr = self.precise(&f0);
        let (seq, bracket) = self.mean_bracket(&vals);
        let alim = self.approximate_limit(&f0);
        let essential = pr.value.as_ref().is_some_and(|a| self.essential_limit_at(&f0, a));
        let lebesgue = pr.value.as_ref().is_some_and(|a| self.lebesgue_point(&f0, a));
        let profile = LocalProfile {
            point: self.point.clone(),
            alpha_candidate: pr.value.clone(),
            ess_inf: inf.value,
            ess_sup: sup.value,
            alim_inf,
            alim_sup,
            lebesgue_point: lebesgue,
            essential_limit_exists: essential,
            approximate_limit_exists: matches!(alim, ApproxLimit::Value(_)),
        };
        let sandwich = sandwich_check(&profile, 3.0 * self.tol.accept_tol);
        ProfileReport {
            profile,
            approximate_limit: alim,
            mean_sequence: seq,
            mean_bracket: bracket,
            ess_inf: inf,
            ess_sup: sup,
            sandwich,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Precise {
    pub brackets: Vec<Bracket>,
    #[serde(with = "extended::reals")]
    pub finest: Vec<f64>,
    pub value: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ApproxLimit {
    Value(Vec<f64>),
    PlusInfinity,
    MinusInfinity,
    None,
}

impl ApproxLimit {
    pub fn value(&self) -> Option<&[f64]> {
        match self {
            ApproxLimit::Value(v) => Some(v),
            _ => Option::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalProfile {
    pub point: Vec<f64>,
    pub alpha_candidate: Option<Vec<f64>>,
    #[serde(with = "extended::real")]
    pub ess_inf: f64,
    #[serde(with = "extended::real")]
    pub ess_sup: f64,
    #[serde(with = "extended::real")]
    pub alim_inf: f64,
    #[serde(with = "extended::real")]
    pub alim_sup: f64,
    pub lebesgue_point: bool,
    pub essential_limit_exists: bool,
    pub approximate_limit_exists: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub profile: LocalProfile,
    pub approximate_limit: ApproxLimit,
    pub mean_sequence: MeanValueSequence,
    pub mean_bracket: Bracket,
    pub ess_inf: EssBound,
    pub ess_sup: EssBound,
    pub sandwich: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanResidual {
    pub holds: bool,
    pub implies_alim: bool,
    /// The field is locally essentially bounded, so the criterion is also necessary.
    pub converse_valid: bool,
    /// Direct approximate-limit test of the same α.
    pub alim_agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssentialValues {
    pub values: Vec<f64>,
    pub eps: f64,
    pub within_range: bool,
}

/// `ess inf ≤ alim inf ≤ alim sup ≤ ess sup` up to `tol`.
pub fn sandwich_check(p: &LocalProfile, tol: f64) -> bool {
    let chain = [p.ess_inf, p.alim_inf, p.alim_sup, p.ess_sup];
    chain.iter().all(|v| !v.is_nan())
        && chain.windows(2).all(|w| w[0] == w[1] || w[0] <= w[1] + tol)
}

pub fn precise_representative(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<Precise> {
    Ok(Neighborhood::new(x, omega, schedule, budget, tol)?.precise(f))
}

pub fn essential_limit(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<Option<Vec<f64>>> {
    Ok(Neighborhood::new(x, omega, schedule, budget, tol)?.essential_limit(f))
}

pub fn approximate_limit(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<ApproxLimit> {
    Ok(Neighborhood::new(x, omega, schedule, budget, tol)?.approximate_limit(f))
}

pub fn approx_lim_sup_inf(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<(f64, f64)> {
    if f.outputs() != 1 {
        return Err(Error::invalid("upper and lower approximate limits need a scalar field"));
    }
    let n = Neighborhood::new(x, omega, schedule, budget, tol)?;
    Ok(n.approx_lim_inf_sup(&n.values(f)))
}

pub fn lebesgue_point_test(
    f: &dyn Field,
    x: &[f64],
    alpha: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<bool> {
    Ok(Neighborhood::new(x, omega, schedule, budget, tol)?.lebesgue_point(f, alpha))
}

pub fn mean_residual_criterion(
    f: &dyn Field,
    x: &[f64],
    alpha: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<MeanResidual> {
    Ok(Neighborhood::new(x, omega, schedule, budget, tol)?.mean_residual(f, alpha))
}

pub fn essential_values(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    grid: &[f64],
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<EssentialValues> {
    Ok(Neighborhood::new(x, omega, schedule, budget, tol)?.essential_values(f, grid))
}

pub fn local_profile(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<ProfileReport> {
    Ok(Neighborhood::new(x, omega, schedule, budget, tol)?.profile(f))
}
