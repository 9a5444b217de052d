//! Registry of fields, sets and sequences with documented facts.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::PiecewiseField;
use crate::geometry::{Bounds, Profile, Region};
use crate::weakconv::{FunctionSequence, Generator, IntersectionWitness, Probe};

/// How a documented fact is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Immediate from the definitions.
    Elementary,
    /// A worked example from the literature.
    Literature,
    /// Computed by an independent closed form or quadrature.
    Computed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub claim: String,
    pub basis: Basis,
}

fn fact(claim: &str, basis: Basis) -> Fact {
    Fact { claim: claim.into(), basis }
}

#[derive(Clone, Debug)]
pub enum Payload {
    Field(PiecewiseField),
    /// A set whose density is studied within the domain.
    Set(Region),
    Sequence(FunctionSequence),
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub id: &'static str,
    pub summary: &'static str,
    pub domain: Region,
    /// Points of interest; the first is the default.
    pub points: Vec<Vec<f64>>,
    pub payload: Payload,
    pub facts: Vec<Fact>,
}

impl CorpusEntry {
    pub fn kind(&self) -> &'static str {
        match self.payload {
            Payload::Field(_) => "field",
            Payload::Set(_) => "set",
            Payload::Sequence(_) => "sequence",
        }
    }

    pub fn field(&self) -> Result<&PiecewiseField> {
        match &self.payload {
            Payload::Field(f) => Ok(f),
            _ => Err(Error::invalid(format!("corpus entry '{}' is a {}, not a field", self.id, self.kind()))),
        }
    }

    pub fn set(&self) -> Result<&Region> {
        match &self.payload {
            Payload::Set(s) => Ok(s),
            _ => Err(Error::invalid(format!("corpus entry '{}' is a {}, not a set", self.id, self.kind()))),
        }
    }

    pub fn sequence(&self) -> Result<&FunctionSequence> {
        match &self.payload {
            Payload::Sequence(s) => Ok(s),
            _ => Err(Error::invalid(format!("corpus entry '{}' is a {}, not a sequence", self.id, self.kind()))),
        }
    }

    pub fn point(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn describe(&self) -> Value {
        let payload = match &self.payload {
            Payload::Field(f) => json!({ "field": f }),
            Payload::Set(s) => json!({ "set": s }),
            Payload::Sequence(s) => json!({
                "k_max": s.k_max,
                "first_term": s.term(1),
                "limit": s.limit,
                "probes": s.probes,
                "region_probes": s.region_probes,
                "witness": s.witness,
            }),
        };
        json!({
            "id": self.id,
            "kind": self.kind(),
            "summary": self.summary,
            "domain": self.domain,
            "points": self.points,
            "payload": payload,
            "facts": self.facts,
        })
    }
}

fn x() -> Expr {
    Expr::var(0)
}

fn y() -> Expr {
    Expr::var(1)
}

fn c(v: f64) -> Expr {
    Expr::constant(v)
}

fn line() -> Region {
    Region::interval(-1.0, 1.0)
}

fn disc(r: f64) -> Region {
    Region::ball(vec![0.0, 0.0], r)
}

fn square(h: f64) -> Bounds {
    Bounds::new(vec![-h, -h], vec![h, h])
}

fn scalar(dim: usize, e: Expr) -> PiecewiseField {
    PiecewiseField::scalar(dim, e).expect("corpus fields are well formed")
}

fn chi(a: f64, b: f64) -> PiecewiseField {
    scalar(1, Expr::indicator(Region::interval(a, b)))
}

/// `{x₂ > g(|x₁|)}` style cusp at the origin pointing along `axis`.
pub fn parabolic_cusp(axis: Vec<f64>, length: f64) -> Region {
    Region::Cusp {
        vertex: vec![0.0, 0.0],
        axis,
        profile: Profile::power(1.0, 2.0),
        length,
    }
}

/// `{x₁ > x₂²}`.
pub fn omega_2plus() -> Region {
    Region::Level {
        expr: x() - y() * y(),
        within: square(1.0),
    }
}

/// The four-piece field with essential bounds ±2 and approximate bounds ±1 at 0.
pub fn dm_s9a() -> PiecewiseField {
    let w = square(1.0);
    let level = |e: Expr| Region::Level { expr: e, within: w.clone() };
    let root = x().abs().sqrt();
    scalar(
        2,
        Expr::piecewise(
            vec![
                (level(y() - root.clone()), c(2.0)),
                (level(-y() - root), c(-2.0)),
                (level(x() - y() * y()), c(1.0)),
                (level(-x() - y() * y()), c(-1.0)),
            ],
            c(0.0),
        ),
    )
}

/// `x² sin(1/x)` with value 0 at the origin.
pub fn x2sin() -> PiecewiseField {
    scalar(
        1,
        Expr::piecewise(
            vec![(Region::point(vec![0.0]), c(0.0))],
            x() * x() * (c(1.0) / x()).sin(),
        ),
    )
}

fn field(
    id: &'static str,
    summary: &'static str,
    domain: Region,
    points: Vec<Vec<f64>>,
    f: PiecewiseField,
    facts: Vec<Fact>,
) -> CorpusEntry {
    CorpusEntry { id, summary, domain, points, payload: Payload::Field(f), facts }
}

fn fields() -> Vec<CorpusEntry> {
    use Basis::*;
    let o1 = || vec![vec![0.0]];
    let o2 = || vec![vec![0.0, 0.0]];
    vec![
        field("const3", "constant 3 on (-1,1)", line(), o1(), scalar(1, c(3.0)).with_lipschitz(0.0), vec![
            fact("every local limit at 0 equals 3", Elementary),
            fact("all derivatives at 0 vanish", Elementary),
        ]),
        field("abs1d", "|x| on (-1,1)", line(), vec![vec![0.0], vec![0.5]], scalar(1, x().abs()).with_lipschitz(1.0), vec![
            fact("Clarke Jacobian at 0 is [-1,1]", Elementary),
            fact("f°(0; ±1) = 1", Elementary),
            fact("no approximate, essential or precise derivative at 0", Elementary),
            fact("not strictly differentiable at 0", Elementary),
        ]),
        field("neg_abs1d", "-|x| on (-1,1)", line(), o1(), scalar(1, -x().abs()).with_lipschitz(1.0), vec![
            fact("f°(0; 1) = 1", Computed),
            fact("Clarke Jacobian at 0 is [-1,1]", Elementary),
        ]),
        field("sign1d", "sign(x) on (-1,1)", line(), o1(), scalar(1, x().sign()), vec![
            fact("ess inf = approximate lim inf = -1 at 0", Elementary),
            fact("ess sup = approximate lim sup = 1 at 0", Elementary),
            fact("ball averages tend to 0, so pr f(0) = 0 without a Lebesgue point", Elementary),
        ]),
        field("x2sin", "x² sin(1/x), 0 at the origin", line(), o1(), x2sin().with_lipschitz(3.0), vec![
            fact("essential and precise derivative 0 at 0", Computed),
            fact("Clarke Jacobian at 0 is [-1,1], so not strictly differentiable", Computed),
        ]),
        field("inv_abs", "1/|x| on (-1,1)", line(), o1(), scalar(1, c(1.0) / x().abs()), vec![
            fact("approximate limit +∞ at 0", Elementary),
        ]),
        field("inv_sqrt", "1/√|x| on (-1,1)", line(), o1(), scalar(1, c(1.0) / x().abs().sqrt()), vec![
            fact("ess sup near 0 is +∞ while the function is integrable", Elementary),
        ]),
        field(
            "chi_cusp",
            "indicator of the cusp {|x₂| < x₁²} in the unit disc",
            disc(1.0),
            o2(),
            scalar(2, Expr::indicator(parabolic_cusp(vec![1.0, 0.0], 1.0))),
            vec![
                fact("approximate limit 0 and approximate derivative 0 at the origin", Computed),
                fact("no essential derivative at the origin (ess sup of the residual is 1)", Computed),
            ],
        ),
        field(
            "dm_s9a",
            "±2 on {±x₂ > √|x₁|}, ±1 on {±x₁ > x₂²} in the unit disc",
            disc(1.0),
            o2(),
            dm_s9a(),
            vec![
                fact("ess inf = -2 < approximate lim inf = -1 < approximate lim sup = 1 < ess sup = 2 at 0", Literature),
                fact("neither the essential nor the approximate limit exists at 0", Literature),
            ],
        ),
        field("max2d", "max(x₁, x₂) in the unit disc", disc(1.0), vec![vec![0.0, 0.0], vec![0.5, -0.2]], scalar(2, x().max(y())).with_lipschitz(1.0), vec![
            fact("Clarke Jacobian at 0 is the segment conv{(1,0),(0,1)}", Computed),
            fact("f°(0; v) = max(v₁, v₂)", Computed),
        ]),
        field(
            "smooth2d",
            "sin(x₁) + x₁x₂ in the unit disc",
            disc(1.0),
            vec![vec![0.0, 0.0], vec![0.3, -0.2]],
            scalar(2, x().sin() + x() * y()).with_lipschitz(2.5),
            vec![
                fact("gradient (cos x₁ + x₂, x₁); all derivative notions agree", Elementary),
                fact("strictly differentiable everywhere", Elementary),
            ],
        ),
        field("sin_inv", "sin(1/x), 0 at the origin", line(), o1(), scalar(1, Expr::piecewise(vec![(Region::point(vec![0.0]), c(0.0))], (c(1.0) / x()).sin())), vec![
            fact("essential values at 0 fill [-1,1]; no approximate limit", Elementary),
        ]),
        field("atan_abs", "atan(1/|x|) on (-1,1)", line(), o1(), scalar(1, (c(1.0) / x().abs()).atan()), vec![
            fact("essential and approximate limit π/2 at 0", Elementary),
        ]),
        field("absx_y", "|x₁| + x₂ in the unit disc", disc(1.0), o2(), scalar(2, x().abs() + y()).with_lipschitz(std::f64::consts::SQRT_2), vec![
            fact("Clarke Jacobian at 0 is [-1,1] × {1}", Elementary),
        ]),
        field("sq1d", "x² on (-1,1)", line(), vec![vec![0.0], vec![0.4]], scalar(1, x() * x()).with_lipschitz(2.0), vec![
            fact("derivative 2x; strictly differentiable", Elementary),
        ]),
        field("lin2x", "2x on (-1,1)", line(), o1(), scalar(1, c(2.0) * x()).with_lipschitz(2.0), vec![
            fact("linear and surjective", Elementary),
        ]),
    ]
}

fn set(id: &'static str, summary: &'static str, domain: Region, a: Region, facts: Vec<Fact>) -> CorpusEntry {
    let n = domain.dim();
    CorpusEntry { id, summary, domain, points: vec![vec![0.0; n]], payload: Payload::Set(a), facts }
}

fn sets() -> Vec<CorpusEntry> {
    use Basis::*;
    vec![
        set("half_line", "(0, ∞) within ℝ", Region::Space { dim: 1 }, Region::interval(0.0, 10.0), vec![fact(
            "density 1/2 at 0",
            Elementary,
        )]),
        set("omega_2plus", "{x₁ > x₂²} within the unit disc", disc(1.0), omega_2plus(), vec![fact(
            "density 1/2 at 0",
            Computed,
        )]),
        set(
            "cusp_s2",
            "cusp {|x₂| < x₁²} within ℝ²",
            Region::Space { dim: 2 },
            parabolic_cusp(vec![1.0, 0.0], 1.0),
            vec![fact("density 0 at the vertex; 2δ/(3π) at scale δ", Computed)],
        ),
    ]
}

fn sequence(id: &'static str, seq: FunctionSequence, summary: &'static str, facts: Vec<Fact>) -> CorpusEntry {
    debug_assert_eq!(id, seq.name);
    let n = seq.omega.dim();
    CorpusEntry {
        id,
        summary,
        domain: seq.omega.clone(),
        points: vec![vec![0.0; n]],
        payload: Payload::Sequence(seq),
        facts,
    }
}

pub fn app_s5a() -> FunctionSequence {
    let g: Generator = Arc::new(|k| chi(0.5f64.powi(k as i32 + 1), 0.5f64.powi(k as i32)));
    let mut s = FunctionSequence::new("app_s5a", Region::interval(0.0, 1.0), 8, g, scalar(1, c(0.0)));
    s.witness = Some(IntersectionWitness { gamma: 0.5, subsequence: (1..=6).collect(), m_max: 6 });
    s
}

fn shrinking_probes() -> Vec<Probe> {
    vec![Probe::boundary(vec![0.0]), Probe::interior(vec![0.5]), Probe::boundary(vec![1.0])]
}

pub fn app_s8() -> FunctionSequence {
    let g: Generator = Arc::new(|k| chi(0.0, 1.0 / k as f64));
    let mut s = FunctionSequence::new("app_s8", Region::interval(0.0, 1.0), 20, g, scalar(1, c(0.0)));
    s.probes = shrinking_probes();
    s
}

/// `sin(ln x)` has no limit of ball averages at 0.
fn oscillating() -> Expr {
    Expr::piecewise(vec![(Region::interval(0.0, 1.0), x().ln().sin())], c(0.0))
}

pub fn app_s8g() -> FunctionSequence {
    let g: Generator = Arc::new(|k| {
        scalar(1, Expr::indicator(Region::interval(0.0, 1.0 / k as f64)) + oscillating())
    });
    let mut s = FunctionSequence::new("app_s8g", Region::interval(0.0, 1.0), 20, g, scalar(1, oscillating()));
    s.probes = shrinking_probes();
    s
}

pub fn app_s10() -> FunctionSequence {
    let g: Generator = Arc::new(|k| scalar(2, Expr::indicator(parabolic_cusp(vec![0.0, 1.0], 1.0 / k as f64))));
    let mut s = FunctionSequence::new("app_s10", disc(2.0), 20, g, scalar(2, c(0.0)));
    s.probes = vec![
        Probe::interior(vec![0.0, 0.0]),
        Probe::interior(vec![0.5, 0.5]),
        Probe::interior(vec![1.0, 0.0]),
    ];
    s.region_probes = vec![(vec![0.0, 0.0], parabolic_cusp(vec![0.0, 1.0], 1.0))];
    s
}

pub fn const_half() -> FunctionSequence {
    let g: Generator = Arc::new(|_| chi(0.0, 0.5));
    let mut s = FunctionSequence::new("const_half", Region::interval(0.0, 1.0), 6, g, scalar(1, c(0.0)));
    s.probes = vec![Probe::boundary(vec![0.0]), Probe::interior(vec![0.25]), Probe::interior(vec![0.75])];
    s.witness = Some(IntersectionWitness { gamma: 0.5, subsequence: (1..=6).collect(), m_max: 6 });
    s
}

fn sequences() -> Vec<CorpusEntry> {
    use Basis::*;
    vec![
        sequence("app_s5a", app_s5a(), "indicators of the dyadic blocks (2^-k-1, 2^-k)", vec![
            fact("converges weakly to 0 while ‖f_k‖∞ = 1", Literature),
        ]),
        sequence("app_s8", app_s8(), "indicators of (0, 1/k)", vec![
            fact("pr f_k(0) = 1 for all k while pr f(0) = 0, so no weak convergence to 0", Literature),
        ]),
        sequence("app_s8g", app_s8g(), "indicators of (0, 1/k) plus sin(ln x)", vec![
            fact("no weak convergence to sin(ln x); detected through the differences", Literature),
        ]),
        sequence("app_s10", app_s10(), "indicators of the cusps {√|x| ≤ y ≤ 1/k} in B_2(0)", vec![
            fact("pr f_k = 0 everywhere, yet the density within the unit cusp gives 1 ≠ 0", Literature),
        ]),
        sequence("const_half", const_half(), "constant sequence χ(0,1/2), candidate limit 0", vec![
            fact("intersection criterion rules out weak convergence to 0", Elementary),
        ]),
    ]
}

/// Every entry in registry order.
pub fn entries() -> Vec<CorpusEntry> {
    let mut v = fields();
    v.extend(sets());
    v.extend(sequences());
    v
}

pub fn ids() -> Vec<&'static str> {
    entries().iter().map(|e| e.id).collect()
}

pub fn lookup(id: &str) -> Result<CorpusEntry> {
    entries().into_iter().find(|e| e.id == id).ok_or_else(|| {
        let mut ids = ids();
        ids.sort_by_key(|c| strsim(id, c));
        Error::invalid(format!("unknown corpus id '{id}'; did you mean one of: {}", ids[..5].join(", ")))
    })
}

/// Edit distance used to rank suggestions.
fn strsim(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut prev = row[0];
        row[0] = i + 1;
        for j in 0..b.len() {
            let cur = row[j + 1];
            row[j + 1] = (prev + usize::from(ca != b[j])).min(row[j] + 1).min(cur + 1);
            prev = cur;
        }
    }
    row[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;

    #[test]
    fn ids_are_unique_and_entries_have_facts() {
        let mut ids = ids();
        let n = ids.len();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), n);
        for e in entries() {
            assert!(!e.facts.is_empty(), "{}", e.id);
            assert_eq!(e.point().len(), e.dim(), "{}", e.id);
            serde_json::to_string(&e.describe()).unwrap();
        }
    }

    #[test]
    fn dm_s9a_pieces() {
        let f = dm_s9a();
        assert_eq!(f.value(&[0.01, 0.5]), 2.0);
        assert_eq!(f.value(&[0.01, -0.5]), -2.0);
        assert_eq!(f.value(&[0.5, 0.1]), 1.0);
        assert_eq!(f.value(&[-0.5, 0.1]), -1.0);
        assert_eq!(f.value(&[0.25, 0.5]), 0.0);
        assert_eq!(f.value(&[0.25, 0.4]), 1.0);
    }

    #[test]
    fn unknown_ids_get_suggestions() {
        let e = lookup("abs1").unwrap_err().to_string();
        assert!(e.contains("abs1d"), "{e}");
        assert_eq!(lookup("max2d").unwrap().kind(), "field");
        assert!(lookup("half_line").unwrap().field().is_err());
    }

    #[test]
    fn sequence_terms() {
        let s = app_s10();
        assert_eq!(s.term(2).value(&[0.0, 0.3]), 1.0);
        assert_eq!(s.term(4).value(&[0.0, 0.3]), 0.0);
        assert_eq!(s.term(2).value(&[0.2, 0.3]), 0.0);
        let g = app_s8g();
        assert!((g.term(3).value(&[0.2]) - 1.0 - 0.2f64.ln().sin()).abs() < 1e-15);
    }
}
