//! Approximate, essential, precise and classical derivatives of integrable
//! fields, their ladder of implications, calculus rules and the mean value
//! identity along segments.
//!
//! Candidates `(α, L)` are fitted at the median scale and then frozen. The
//! scaled residual `|f(y) - α - L(y - x)| / |y - x|` is examined on annular
//! shells `δ_{k+1} < |y - x| ≤ δ_k`, which keeps sampling noise in `α` from
//! being amplified by points arbitrarily close to `x`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::extended;
use crate::expr::MAX_DIM;
use crate::field::{jacobian_pairing, linear_combination, Field, FnField};
use crate::geometry::sampling::stream_rng;
use crate::geometry::{
    neighborhoods, sample_region, DeltaSchedule, Region, RegionSample, SampleBudget, ScaleSamples,
};
use crate::local_limits::{ApproxLimit, LocalProfile, MeanResidual, Neighborhood};
use crate::meanvalue::{ess_sup_of, limit_bracket, tail_window, Bracket, MeanValueSequence};

/// Singular values of the column-normalized design below this fraction of
/// the largest one count as rank loss.
pub const RANK_TOL: f64 = 1e-3;

/// Samples used by a single fit.
const FIT_POINTS: usize = 20_000;

const IRLS_ITERS: usize = 60;

const STREAM_FIT: u64 = 3_000;
const STREAM_SHELL: u64 = 1_000;
const STREAM_PROBE: u64 = 2_000;

/// Affine least-squares fit `f(y) ≈ α + L(y - x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub alpha: Vec<f64>,
    pub l: Vec<Vec<f64>>,
    pub rank: usize,
    pub samples: usize,
    pub delta: f64,
}

/// Feature row `[1?, u/δ, (u_i u_j)/δ² if quad]`.
fn features(u: &[f64], delta: f64, intercept: bool, quad: bool, out: &mut Vec<f64>) {
    out.clear();
    if intercept {
        out.push(1.0);
    }
    out.extend(u.iter().map(|v| v / delta));
    if quad {
        for i in 0..u.len() {
            for j in i..u.len() {
                out.push(u[i] * u[j] / (delta * delta));
            }
        }
    }
}

fn n_features(n: usize, intercept: bool, quad: bool) -> usize {
    intercept as usize + n + if quad { n * (n + 1) / 2 } else { 0 }
}

/// Design rows with per-component targets.
struct Design {
    p: usize,
    rows: Vec<f64>,
    targets: Vec<Vec<f64>>,
    offsets: Vec<Vec<f64>>,
}

impl Design {
    fn build(
        f: &dyn Field,
        x: &[f64],
        pts: &[&[f64]],
        delta: f64,
        intercept: bool,
        quad: bool,
    ) -> Design {
        let n = x.len();
        let m = f.outputs();
        let p = n_features(n, intercept, quad);
        let mut rows = Vec::with_capacity(pts.len() * p);
        let mut targets = vec![Vec::with_capacity(pts.len()); m];
        let mut offsets = Vec::with_capacity(pts.len());
        let mut feat = Vec::with_capacity(p);
        let mut val = [0.0; MAX_DIM];
        for y in pts {
            f.eval_into(y, &mut val[..m]);
            if val[..m].iter().any(|v| !v.is_finite()) {
                continue;
            }
            let u: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
            features(&u, delta, intercept, quad, &mut feat);
            rows.extend_from_slice(&feat);
            for (i, t) in targets.iter_mut().enumerate() {
                t.push(val[i]);
            }
            offsets.push(u);
        }
        Design {
            p,
            rows,
            targets,
            offsets,
        }
    }

    fn len(&self) -> usize {
        self.offsets.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }

    /// Weighted least squares for one target. With `check_rank`, fails when
    /// the features (already scaled by δ) have a singular value below
    /// `RANK_TOL` relative to the largest, i.e. the samples are too thin in
    /// some direction.
    fn solve(&self, y: &[f64], w: &[f64], check_rank: bool) -> Result<Vec<f64>> {
        let p = self.p;
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        for i in 0..self.len() {
            let r = self.row(i);
            for a in 0..p {
                rhs[a] += w[i] * r[a] * y[i];
                for b in a..p {
                    gram[(a, b)] += w[i] * r[a] * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        if check_rank {
            let sv = gram.clone().singular_values();
            let smax = sv.max();
            let rank = sv.iter().filter(|s| s.sqrt() > RANK_TOL * smax.sqrt()).count();
            if rank < p {
                return Err(Error::RankDeficient { rank, expected: p });
            }
        }
        // diagonal scaling for the numerical solve
        let scale: Vec<f64> = (0..p).map(|a| gram[(a, a)].sqrt().max(f64::MIN_POSITIVE)).collect();
        for a in 0..p {
            rhs[a] /= scale[a];
            for b in 0..p {
                gram[(a, b)] /= scale[a] * scale[b];
            }
        }
        let sol = gram
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::InternalConsistency(format!("least squares solve failed: {e}")))?;
        Ok((0..p).map(|a| sol[a] / scale[a]).collect())
    }

    fn predict(&self, beta: &[f64], i: usize) -> f64 {
        self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    /// Least absolute deviations by iteratively reweighted least squares.
    fn solve_lad(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let mut w = vec![1.0; n];
        let mut beta = self.solve(y, &w, true)?;
        let ymax = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let floor = 1e-12 + 1e-9 * ymax;
        for _ in 0..IRLS_ITERS {
            for i in 0..n {
                w[i] = 1.0 / (y[i] - self.predict(&beta, i)).abs().max(floor);
            }
            let next = self.solve(y, &w, false)?;
            let change = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            beta = next;
            if change <= 1e-12 * (1.0 + ymax) {
                break;
            }
        }
        Ok(beta)
    }
}

/// Prefix of every replicate; strided thinning would break the
/// low-discrepancy structure of the point set.
fn thin(sample: &RegionSample) -> Vec<&[f64]> {
    let total = sample.len().max(1);
    let mut out = Vec::with_capacity(total.min(FIT_POINTS));
    for r in sample.replicates() {
        let take = (r.len() * FIT_POINTS).div_ceil(total).min(r.len());
        out.extend((r.start..r.start + take).map(|i| sample.point(i)));
    }
    out
}

fn ball_sample(
    x: &[f64],
    omega: &Region,
    delta: f64,
    budget: &SampleBudget,
    stream: u64,
) -> Result<RegionSample> {
    sample_region(
        &Region::intersect(vec![Region::ball(x.to_vec(), delta), omega.clone()]),
        budget,
        stream,
    )
}

fn check_point(f: &dyn Field, x: &[f64], omega: &Region) -> Result<()> {
    if x.len() != f.dim() || omega.dim() != f.dim() {
        return Err(Error::invalid("point, field and domain dimensions differ"));
    }
    Ok(())
}

fn min_samples(n: usize, got: usize) -> Result<()> {
    if got < (n + 1) * 10 {
        return Err(Error::invalid(format!(
            "only {got} samples accepted, need at least {}",
            (n + 1) * 10
        )));
    }
    Ok(())
}

/// Uniform least squares of `f(y)` against `(1, y - x)` over `B_δ(x) ∩ Ω`.
pub fn fit_affine(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    delta: f64,
    budget: &SampleBudget,
) -> Result<AffineFit> {
    check_point(f, x, omega)?;
    let sample = ball_sample(x, omega, delta, budget, STREAM_FIT)?;
    let pts = thin(&sample);
    let d = Design::build(f, x, &pts, delta, true, false);
    min_samples(x.len(), d.len())?;
    let w = vec![1.0; d.len()];
    let mut alpha = Vec::new();
    let mut l = Vec::new();
    for t in &d.targets {
        let beta = d.solve(t, &w, true)?;
        alpha.push(beta[0]);
        l.push(beta[1..=x.len()].iter().map(|b| b / delta).collect());
    }
    Ok(AffineFit {
        alpha,
        l,
        rank: d.p,
        samples: d.len(),
        delta,
    })
}

/// Robust candidate: LAD with quadratic terms at scale `delta`, giving `L`.
fn robust_slope(f: &dyn Field, x: &[f64], sample: &RegionSample, delta: f64) -> Result<Vec<Vec<f64>>> {
    let pts = thin(sample);
    let d = Design::build(f, x, &pts, delta, true, true);
    min_samples(x.len(), d.len())?;
    d.targets
        .iter()
        .map(|t| Ok(d.solve_lad(t)?[1..=x.len()].iter().map(|b| b / delta).collect()))
        .collect()
}

/// Componentwise median of `f(y) - L(y - x)`.
fn median_intercept(f: &dyn Field, x: &[f64], sample: &RegionSample, l: &[Vec<f64>]) -> Vec<f64> {
    let m = f.outputs();
    let mut cols = vec![Vec::with_capacity(sample.len()); m];
    let mut val = [0.0; MAX_DIM];
    for y in sample.points() {
        f.eval_into(y, &mut val[..m]);
        for i in 0..m {
            let lu: f64 = l[i].iter().zip(y.iter().zip(x)).map(|(a, (p, q))| a * (p - q)).sum();
            let v = val[i] - lu;
            if v.is_finite() {
                cols[i].push(v);
            }
        }
    }
    cols.into_iter()
        .map(|mut c| {
            if c.is_empty() {
                return f64::NAN;
            }
            c.sort_by(f64::total_cmp);
            let h = c.len() / 2;
            if c.len() % 2 == 1 {
                c[h]
            } else {
                0.5 * (c[h - 1] + c[h])
            }
        })
        .collect()
}

/// Weighted least squares of `(f(y) - α)` against `y - x` with weights `1/|y - x|²`.
fn quotient_slope(
    f: &dyn Field,
    x: &[f64],
    alpha: &[f64],
    sample: &RegionSample,
    delta: f64,
) -> Result<Vec<Vec<f64>>> {
    let pts = thin(sample);
    let d = Design::build(f, x, &pts, delta, false, true);
    min_samples(x.len(), d.len())?;
    let w: Vec<f64> = d
        .offsets
        .iter()
        .map(|u| (delta * delta / u.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE)).min(1e4))
        .collect();
    d.targets
        .iter()
        .zip(alpha)
        .map(|(t, a)| {
            let y: Vec<f64> = t.iter().map(|v| v - a).collect();
            Ok(d.solve(&y, &w, true)?[..x.len()].iter().map(|b| b / delta).collect())
        })
        .collect()
}

/// `y ↦ |f(y) - α - L(y - x)| / |y - x|`.
pub fn residual_field<'a>(f: &'a dyn Field, x: &[f64], alpha: &[f64], l: &[Vec<f64>]) -> FnField<'a> {
    let (x, alpha, l) = (x.to_vec(), alpha.to_vec(), l.to_vec());
    let m = f.outputs();
    FnField::new(f.dim(), 1, move |y, out| {
        let mut val = [0.0; MAX_DIM];
        f.eval_into(y, &mut val[..m]);
        let u: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let num = (0..m)
            .map(|i| {
                let lu: f64 = l[i].iter().zip(&u).map(|(a, b)| a * b).sum();
                let e = val[i] - alpha[i] - lu;
                e * e
            })
            .sum::<f64>()
            .sqrt();
        out[0] = if r > 0.0 { num / r } else { f64::NAN };
    })
}

/// Samples of the shells `δ_{k+1} < |y - x| ≤ δ_k` within `Ω`.
pub fn shells(
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    stream: u64,
) -> Result<ScaleSamples> {
    schedule.validate()?;
    let deltas = schedule.deltas();
    let regions = deltas
        .iter()
        .map(|&d| {
            Region::intersect(vec![
                Region::Annulus {
                    center: x.to_vec(),
                    inner: d * schedule.ratio,
                    outer: d,
                },
                omega.clone(),
            ])
        })
        .collect();
    ScaleSamples::collect(deltas, regions, budget, stream)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeKind {
    Approximate,
    Essential,
    Precise,
    ClassicalRepresentative,
}

impl DerivativeKind {
    pub fn name(self) -> &'static str {
        match self {
            DerivativeKind::Approximate => "approximate",
            DerivativeKind::Essential => "essential",
            DerivativeKind::Precise => "precise",
            DerivativeKind::ClassicalRepresentative => "classical_representative",
        }
    }
}

/// A derivative candidate with the evidence for or against it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub point: Vec<f64>,
    pub kind: DerivativeKind,
    pub accepted: bool,
    #[serde(with = "extended::reals")]
    pub alpha: Vec<f64>,
    pub l: Vec<Vec<f64>>,
    pub residual_profile: LocalProfile,
    pub residual_limit: ApproxLimit,
    /// Per-shell sample maxima of the residual.
    #[serde(with = "extended::reals")]
    pub residual_sup: Vec<f64>,
    /// Per-shell mean of the residual.
    pub residual_mean: MeanValueSequence,
    /// Mean-residual criterion at 0; only sufficient when the residual is unbounded.
    pub mean_criterion: MeanResidual,
    pub one_sided: bool,
    /// `α` agrees with the precise representative at `x`.
    pub alpha_matches_pr: bool,
    /// No cone at `x` fits inside `Ω`, so `L` need not be unique.
    pub non_unique: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl DerivativeEstimate {
    pub fn accepted_l(&self) -> Option<&[Vec<f64>]> {
        self.accepted.then_some(self.l.as_slice())
    }
}

/// Everything needed to test candidates at one point.
struct Setup<'a> {
    f: &'a dyn Field,
    x: Vec<f64>,
    schedule: DeltaSchedule,
    tol: Tolerances,
    ball: Neighborhood,
    shell: ScaleSamples,
    probe: ScaleSamples,
    pr: Vec<f64>,
    pr_defined: bool,
    non_unique: bool,
}

impl<'a> Setup<'a> {
    fn new(
        f: &'a dyn Field,
        x: &[f64],
        omega: &Region,
        schedule: &DeltaSchedule,
        budget: &SampleBudget,
        tol: &Tolerances,
    ) -> Result<Self> {
        check_point(f, x, omega)?;
        let ball = Neighborhood::new(x, omega, schedule, budget, tol)?;
        let shell = shells(x, omega, schedule, budget, STREAM_SHELL)?;
        let probe = shells(x, omega, schedule, budget, STREAM_PROBE)?;
        let pr = ball.precise(f);
        Ok(Setup {
            f,
            x: x.to_vec(),
            schedule: schedule.clone(),
            tol: tol.clone(),
            ball,
            shell,
            probe,
            pr_defined: pr.value.is_some(),
            pr: pr.finest,
            non_unique: !uniqueness_cone_check(omega, x, 64, budget.seed),
        })
    }

    fn median_sample(&self) -> &RegionSample {
        &self.ball.samples.samples[self.schedule.median_index()]
    }

    fn finest_sample(&self) -> &RegionSample {
        &self.ball.samples.samples[self.ball.samples.len() - 1]
    }

    fn median_delta(&self) -> f64 {
        self.schedule.deltas()[self.schedule.median_index()]
    }

    fn robust_candidate(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let l = robust_slope(self.f, &self.x, self.median_sample(), self.median_delta())?;
        let alpha = median_intercept(self.f, &self.x, self.finest_sample(), &l);
        Ok((alpha, l))
    }

    fn quotient_candidate(&self, alpha: &[f64]) -> Result<Vec<Vec<f64>>> {
        quotient_slope(self.f, &self.x, alpha, self.median_sample(), self.median_delta())
    }

    fn alpha_matches_pr(&self, alpha: &[f64]) -> bool {
        alpha
            .iter()
            .zip(&self.pr)
            .all(|(a, p)| (a - p).abs() <= self.tol.accept_tol)
    }

    /// Residual sample maxima vanish on the two finest shells without divergence.
    fn sup_vanishes(sup: &crate::meanvalue::EssBound, tol: f64) -> bool {
        let n = sup.per_scale.len();
        !sup.divergent && sup.per_scale[n - 2..].iter().all(|v| *v <= tol)
    }

    fn estimate(
        &self,
        kind: DerivativeKind,
        alpha: Vec<f64>,
        l: Vec<Vec<f64>>,
        probes: bool,
    ) -> DerivativeEstimate {
        let r = residual_field(self.f, &self.x, &alpha, &l);
        let samples = if probes { &self.probe } else { &self.shell };
        let nb = Neighborhood::from_samples(&self.x, samples.clone(), &self.tol);
        let vals = nb.values(&r);
        let sup = ess_sup_of(&vals);
        let report = nb.profile(&r);
        let mean_criterion = nb.mean_residual(&r, &[0.0]);
        let accepted = match kind {
            DerivativeKind::Approximate => nb.approximate_limit_at(&r, &[0.0]),
            _ => Self::sup_vanishes(&sup, self.tol.accept_tol),
        };
        DerivativeEstimate {
            point: self.x.clone(),
            kind,
            accepted,
            alpha_matches_pr: self.alpha_matches_pr(&alpha),
            alpha,
            l,
            residual_profile: report.profile,
            residual_limit: report.approximate_limit,
            residual_sup: sup.per_scale.clone(),
            residual_mean: report.mean_sequence,
            one_sided: kind == DerivativeKind::Approximate && (sup.divergent || !mean_criterion.converse_valid),
            mean_criterion,
            non_unique: self.non_unique,
            reason: None,
        }
    }

    fn approximate(&self) -> Result<DerivativeEstimate> {
        let (alpha, l) = self.robust_candidate()?;
        let mut e = self.estimate(DerivativeKind::Approximate, alpha, l, false);
        if !e.accepted {
            e.reason = Some("residual has no approximate limit 0".into());
        }
        Ok(e)
    }

    fn essential(&self) -> Result<DerivativeEstimate> {
        let (alpha, l) = self.robust_candidate()?;
        let mut e = self.estimate(DerivativeKind::Essential, alpha, l, false);
        if !e.accepted {
            e.reason = Some("essential supremum of the residual does not vanish".into());
        } else if !e.alpha_matches_pr {
            return Err(Error::InternalConsistency(format!(
                "essential derivative intercept {:?} differs from pr f(x) = {:?}",
                e.alpha, self.pr
            )));
        }
        Ok(e)
    }

    fn precise(&self) -> Result<DerivativeEstimate> {
        let alpha = self.pr.clone();
        let l = self.quotient_candidate(&alpha)?;
        let mut e = self.estimate(DerivativeKind::Precise, alpha, l, true);
        if !self.pr_defined {
            e.accepted = false;
            e.reason = Some("ball averages at x do not converge".into());
        } else if !e.accepted {
            e.reason = Some("difference quotients of pr f do not converge".into());
        }
        Ok(e)
    }

    fn classical(&self, precise_l: &[Vec<f64>]) -> DerivativeEstimate {
        let alpha = self.f.values(&self.x);
        let n = self.x.len();
        let l = match self.f.jacobian(&self.x) {
            Some(j) => j.chunks(n).map(<[f64]>::to_vec).collect(),
            None => precise_l.to_vec(),
        };
        let mut e = self.estimate(DerivativeKind::ClassicalRepresentative, alpha, l, true);
        if !e.accepted {
            e.reason = Some("difference quotients of f do not converge".into());
        }
        e
    }
}

pub fn approximate_derivative(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<DerivativeEstimate> {
    Setup::new(f, x, omega, schedule, budget, tol)?.approximate()
}

pub fn essential_derivative(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<DerivativeEstimate> {
    Setup::new(f, x, omega, schedule, budget, tol)?.essential()
}

pub fn precise_derivative(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<DerivativeEstimate> {
    Setup::new(f, x, omega, schedule, budget, tol)?.precise()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ladder {
    pub approximate: bool,
    pub essential: bool,
    pub precise: bool,
    pub classical_sampled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffClassification {
    pub point: Vec<f64>,
    pub ladder: Ladder,
    /// Largest Frobenius distance between accepted derivative matrices.
    pub agreement_matrix_norm: f64,
    pub violations: Vec<String>,
    pub estimates: Vec<DerivativeEstimate>,
}

impl DiffClassification {
    pub fn consistent(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn get(&self, kind: DerivativeKind) -> &DerivativeEstimate {
        self.estimates.iter().find(|e| e.kind == kind).expect("all kinds are estimated")
    }
}

pub fn matrix_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

pub fn classify_differentiability(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<DiffClassification> {
    let s = Setup::new(f, x, omega, schedule, budget, tol)?;
    let ap = s.approximate()?;
    let mut es = s.essential()?;
    if es.accepted && !es.alpha_matches_pr {
        es.accepted = false;
    }
    let pr = s.precise()?;
    let cl = s.classical(&pr.l);
    let ladder = Ladder {
        approximate: ap.accepted,
        essential: es.accepted,
        precise: pr.accepted,
        classical_sampled: cl.accepted,
    };
    let mut violations = Vec::new();
    if ladder.essential && !ladder.approximate {
        violations.push("essential without approximate".to_string());
    }
    if ladder.precise != ladder.essential {
        violations.push("precise and essential verdicts differ".to_string());
    }
    if ladder.classical_sampled && !ladder.precise {
        violations.push("classical without precise".to_string());
    }
    let accepted: Vec<&DerivativeEstimate> = [&ap, &es, &pr, &cl].into_iter().filter(|e| e.accepted).collect();
    let mut norm = 0.0f64;
    for (i, a) in accepted.iter().enumerate() {
        for b in &accepted[i + 1..] {
            norm = norm.max(matrix_distance(&a.l, &b.l));
        }
    }
    if norm > tol.accept_tol && !s.non_unique {
        violations.push(format!("accepted derivatives differ by {norm:.3e}"));
    }
    Ok(DiffClassification {
        point: x.to_vec(),
        ladder,
        agreement_matrix_norm: norm,
        violations,
        estimates: vec![ap, es, pr, cl],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleCheck {
    pub expected: Vec<Vec<f64>>,
    pub measured: Vec<Vec<f64>>,
    pub error: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalculusReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub sum_rule: Option<RuleCheck>,
    pub product_rule: Option<RuleCheck>,
}

impl CalculusReport {
    pub fn holds(&self) -> bool {
        self.skipped.is_none()
            && self.sum_rule.as_ref().is_some_and(|r| r.holds)
            && self.product_rule.as_ref().is_some_and(|r| r.holds)
    }
}

/// Sum rule for `c1 f1 + c2 f2` and product rule for `f1 · fb` with a
/// bounded scalar `fb`.
#[allow(clippy::too_many_arguments)]
pub fn calculus_check_approx(
    f1: &dyn Field,
    f2: &dyn Field,
    fb: &dyn Field,
    x: &[f64],
    c1: f64,
    c2: f64,
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<CalculusReport> {
    if f1.outputs() != f2.outputs() || fb.outputs() != 1 {
        return Err(Error::invalid("f1 and f2 must share outputs and fb must be scalar"));
    }
    let skip = |why: String| CalculusReport {
        skipped: Some(why),
        sum_rule: None,
        product_rule: None,
    };
    let d1 = approximate_derivative(f1, x, omega, schedule, budget, tol)?;
    let d2 = approximate_derivative(f2, x, omega, schedule, budget, tol)?;
    let db = approximate_derivative(fb, x, omega, schedule, budget, tol)?;
    for (name, d) in [("f1", &d1), ("f2", &d2), ("fb", &db)] {
        if !d.accepted {
            return Ok(skip(format!("{name} is not approximately differentiable at x")));
        }
    }
    let bound = ess_sup_of(&Neighborhood::new(x, omega, schedule, budget, tol)?.values(&crate::field::deviation(fb, vec![0.0])));
    if bound.divergent || !bound.value.is_finite() {
        return Ok(skip("fb is not locally bounded".into()));
    }
    let check = |expected: Vec<Vec<f64>>, measured: &DerivativeEstimate| {
        let error = matrix_distance(&expected, &measured.l);
        RuleCheck {
            holds: measured.accepted && error <= 10.0 * tol.accept_tol,
            expected,
            measured: measured.l.clone(),
            error,
        }
    };
    let sum = linear_combination(c1, f1, c2, f2)?;
    let ds = approximate_derivative(&sum, x, omega, schedule, budget, tol)?;
    let sum_expected: Vec<Vec<f64>> = d1
        .l
        .iter()
        .zip(&d2.l)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| c1 * p + c2 * q).collect())
        .collect();

    let pr1 = Neighborhood::new(x, omega, schedule, budget, tol)?.precise(f1).finest;
    let prb = Neighborhood::new(x, omega, schedule, budget, tol)?.precise(fb).finest[0];
    let m = f1.outputs();
    let prod = FnField::new(f1.dim(), m, move |p, out| {
        f1.eval_into(p, out);
        let b = fb.value(p);
        for v in out.iter_mut() {
            *v *= b;
        }
    });
    let dp = approximate_derivative(&prod, x, omega, schedule, budget, tol)?;
    let prod_expected: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            d1.l[i]
                .iter()
                .zip(&db.l[0])
                .map(|(a, b)| prb * a + pr1[i] * b)
                .collect()
        })
        .collect();
    Ok(CalculusReport {
        skipped: None,
        sum_rule: Some(check(sum_expected, &ds)),
        product_rule: Some(check(prod_expected, &dp)),
    })
}

/// Searches for an open cone `K` with vertex `x` and a radius `r` such that
/// `K ∩ B_r(x) ⊆ Ω`, probing boundary rays at 0.99 of the half-angle over
/// dyadic radii and interior points.
pub fn uniqueness_cone_check(omega: &Region, x: &[f64], cone_trials: usize, seed: u64) -> bool {
    let n = x.len();
    let mut rng = stream_rng(seed, 0xC0E, 0);
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; n];
            v[i] = s;
            axes.push(v);
        }
    }
    for _ in 0..cone_trials {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.0 {
            axes.push(v.iter().map(|a| a / norm).collect());
        }
    }
    let inside = |p: &[f64]| omega.contains(p);
    for (t, v) in axes.iter().enumerate() {
        let alpha = if n == 1 { 0.0 } else { 0.1 + 0.6 * ((t * 7919) % 97) as f64 / 97.0 };
        let r = 0.5f64.powi(1 + (t % 8) as i32);
        // boundary directions of the cone
        let mut dirs = vec![v.clone()];
        if n > 1 {
            for _ in 0..2 * n {
                let mut w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let dot: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= dot * vi;
                }
                let wn = w.iter().map(|a| a * a).sum::<f64>().sqrt();
                if wn == 0.0 {
                    continue;
                }
                let a = 0.99 * alpha;
                dirs.push(v.iter().zip(&w).map(|(vi, wi)| a.cos() * vi + a.sin() * wi / wn).collect());
            }
        }
        let ok = dirs.iter().all(|d| {
            (0..30).all(|j| {
                let s = 0.999 * r * 0.5f64.powi(j);
                let p: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + s * b).collect();
                inside(&p)
            })
        });
        if ok {
            return true;
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
    pub derivative: Option<Vec<Vec<f64>>>,
    /// Ball-average brackets of the analytic Jacobian entries, row-major.
    pub gradient_average: Vec<Bracket>,
    pub error: f64,
    pub holds: bool,
}

/// The derivative of the representative equals the ball-average limit of
/// the piecewise gradient.
pub fn sobolev_gradient_consistency(
    f: &dyn Field,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<SobolevReport> {
    let skip = |why: &str| SobolevReport {
        skipped: Some(why.into()),
        derivative: None,
        gradient_average: vec![],
        error: f64::NAN,
        holds: false,
    };
    let d = precise_derivative(f, x, omega, schedule, budget, tol)?;
    if !d.accepted {
        return Ok(skip("the representative is not differentiable at x"));
    }
    let nb = Neighborhood::new(x, omega, schedule, budget, tol)?;
    let (n, m) = (f.dim(), f.outputs());
    let mut brackets = Vec::new();
    let mut error = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            let mut e = vec![0.0; m * n];
            e[i * n + j] = 1.0;
            let entry = jacobian_pairing(f, e);
            let vals = nb.values(&entry);
            if ess_sup_of(&vals.transform(f64::abs)).divergent {
                return Ok(skip("the gradient is not locally bounded"));
            }
            let (_, b) = nb.mean_bracket(&vals);
            error = error.max((b.midpoint() - d.l[i][j]).abs()).max(b.width());
            brackets.push(b);
        }
    }
    Ok(SobolevReport {
        skipped: None,
        derivative: Some(d.l),
        holds: brackets.iter().all(|b| b.collapse) && error <= tol.accept_tol,
        gradient_average: brackets,
        error,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanValueReport {
    /// `pr f(y) - pr f(x)`.
    pub difference: f64,
    pub tube_sequence: MeanValueSequence,
    pub tube_bracket: Bracket,
    /// Intercept of a linear fit of the tail tube averages in δ.
    pub extrapolated: f64,
    pub hypothesis_holds: bool,
    pub error: f64,
    pub holds: bool,
}

/// Tube averages of `Df·(y - x)` over `[x, y]_δ ∩ Ω` against the increment
/// of the precise representative.
pub fn mean_value_verify(
    f: &dyn Field,
    x: &[f64],
    y: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
    tol: &Tolerances,
) -> Result<MeanValueReport> {
    check_point(f, x, omega)?;
    if y.len() != x.len() {
        return Err(Error::invalid("segment endpoints have different dimensions"));
    }
    if f.outputs() != 1 {
        return Err(Error::invalid("mean value verification needs a scalar field"));
    }
    if !(0..=64).all(|j| {
        let t = j as f64 / 64.0;
        let p: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect();
        omega.contains(&p)
    }) {
        return Err(Error::invalid("segment leaves the domain"));
    }
    let v: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let seg = Region::Segment { a: x.to_vec(), b: y.to_vec() };
    let regions = neighborhoods(&seg, &[omega], schedule)?;
    let samples = ScaleSamples::collect(schedule.deltas(), regions, budget, 0)?;
    let g = jacobian_pairing(f, v);
    let vals = samples.eval(&g);
    let hypothesis_holds = !ess_sup_of(&vals.transform(f64::abs)).divergent;
    let seq = MeanValueSequence::from_values(&vals);
    let bracket = limit_bracket(&seq, 0, tol.collapse_tol)?;
    let extrapolated = extrapolate(&seq);
    let prx = Neighborhood::new(x, omega, schedule, budget, tol)?.precise(f).finest[0];
    let pry = Neighborhood::new(y, omega, schedule, budget, tol)?.precise(f).finest[0];
    let difference = pry - prx;
    let error = (extrapolated - difference).abs();
    Ok(MeanValueReport {
        difference,
        tube_sequence: seq,
        tube_bracket: bracket.clone(),
        extrapolated,
        hypothesis_holds,
        error,
        holds: hypothesis_holds && error <= tol.accept_tol * len.max(f64::MIN_POSITIVE),
    })
}

/// Weighted linear fit `m(δ) ≈ a + bδ` over the tail window; returns `a`.
pub fn extrapolate(seq: &MeanValueSequence) -> f64 {
    let tail = tail_window(seq.len(), 0).unwrap_or(0..seq.len());
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in tail {
        let (x, y) = (seq.deltas[k], seq.means[k]);
        if !y.is_finite() {
            return f64::NAN;
        }
        let se = seq.stderrs[k];
        let w = if se.is_finite() && se > 1e-12 { 1.0 / (se * se) } else { 1e24 };
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() <= 1e-300 * sw * sw {
        return sy / sw;
    }
    (sxx * sy - sx * sxy) / det
}
