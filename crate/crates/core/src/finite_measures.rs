//! Finitely additive measures on finite atom algebras, computed exactly.
//!
//! Sets of atoms are bitmasks (`u64`, bit `i` is atom `i`). Every measure on a
//! finite algebra is determined by its atom values, so additivity holds by
//! construction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{estimate_measure, neighborhoods, DeltaSchedule, Region, SampleBudget, ScaleSamples};

pub type AtomSet = u64;

/// Largest atom count for exhaustive subset enumeration.
pub const MAX_SUBSET_ATOMS: usize = 20;
/// Largest atom count for vertex enumeration.
pub const MAX_VERTEX_ATOMS: usize = 8;
/// Tolerance for the convex-decomposition checks.
pub const DECOMPOSITION_TOL: f64 = 1e-12;
/// Cap on the size of the candidate grid.
const GRID_LIMIT: usize = 200_000;

pub fn singleton(i: usize) -> AtomSet {
    1u64 << i
}

pub fn set_of(atoms: &[usize]) -> AtomSet {
    atoms.iter().fold(0, |s, &i| s | singleton(i))
}

pub fn atoms_of(s: AtomSet) -> Vec<usize> {
    (0..64).filter(|i| s >> i & 1 == 1).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinitePartition {
    pub atoms: Vec<Region>,
    pub lambda_weights: Vec<f64>,
}

impl FinitePartition {
    pub fn new(atoms: Vec<Region>, lambda_weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != lambda_weights.len() {
            return Err(Error::invalid("one weight per atom is required"));
        }
        if atoms.is_empty() || atoms.len() > 64 {
            return Err(Error::invalid("atom count must be in 1..=64"));
        }
        if lambda_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        if !lambda_weights.iter().any(|w| *w > 0.0) {
            return Err(Error::invalid("at least one weight must be positive"));
        }
        Ok(FinitePartition { atoms, lambda_weights })
    }

    /// Consecutive intervals `[s_i, s_i + w_i]` on the line; null atoms are points.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let mut s = 0.0;
        let atoms = weights
            .iter()
            .map(|w| {
                let r = if *w > 0.0 {
                    Region::interval(s, s + w)
                } else {
                    Region::point(vec![s])
                };
                s += w.max(0.0);
                r
            })
            .collect();
        Self::new(atoms, weights.to_vec())
    }

    /// Measures the atoms of an explicit region list by sampling.
    pub fn measured(atoms: Vec<Region>, budget: &SampleBudget) -> Result<Self> {
        let weights = atoms
            .iter()
            .map(|a| estimate_measure(a, budget).map(|m| m.0))
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms, weights)
    }

    pub fn len(&self) -> usize {
        self.lambda_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_weights.is_empty()
    }

    pub fn full(&self) -> AtomSet {
        if self.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.len()) - 1
        }
    }

    pub fn complement(&self, a: AtomSet) -> AtomSet {
        self.full() & !a
    }

    pub fn lambda(&self, a: AtomSet) -> f64 {
        atoms_of(a & self.full()).iter().map(|&i| self.lambda_weights[i]).sum()
    }

    /// Atoms with positive weight.
    pub fn positive(&self) -> AtomSet {
        set_of(&(0..self.len()).filter(|&i| self.lambda_weights[i] > 0.0).collect::<Vec<_>>())
    }

    fn guard_subsets(&self) -> Result<()> {
        if self.len() > MAX_SUBSET_ATOMS {
            return Err(Error::ResourceLimit(format!(
                "{} atoms exceed the exhaustive limit of {MAX_SUBSET_ATOMS}",
                self.len()
            )));
        }
        Ok(())
    }

    /// All `2^n` atom sets.
    pub fn subsets(&self) -> Result<impl Iterator<Item = AtomSet>> {
        self.guard_subsets()?;
        Ok(0..=self.full())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMeasure {
    pub atom_values: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(atom_values: Vec<f64>) -> Self {
        FiniteMeasure { atom_values }
    }

    /// Unit mass on atom `i` of `n`.
    pub fn dirac(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        FiniteMeasure::new(v)
    }

    pub fn len(&self) -> usize {
        self.atom_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atom_values.is_empty()
    }

    pub fn value(&self, a: AtomSet) -> f64 {
        self.atom_values
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < 64 && a >> i & 1 == 1)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.atom_values.iter().sum()
    }

    /// `‖μ‖ = |μ|(Ω)`.
    pub fn norm(&self) -> f64 {
        self.atom_values.iter().map(|v| v.abs()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        FiniteMeasure::new(self.atom_values.iter().map(|v| s * v).collect())
    }

    pub fn combine(&self, a: f64, other: &FiniteMeasure, b: f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::invalid("measures live on different partitions"));
        }
        Ok(FiniteMeasure::new(
            self.atom_values.iter().zip(&other.atom_values).map(|(x, y)| a * x + b * y).collect(),
        ))
    }

    /// Vanishes on every null atom.
    pub fn is_weakly_ac(&self, p: &FinitePartition) -> bool {
        self.len() == p.len() && self.atom_values.iter().zip(&p.lambda_weights).all(|(v, w)| *w > 0.0 || *v == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jordan {
    pub plus: FiniteMeasure,
    pub minus: FiniteMeasure,
    pub total_variation: FiniteMeasure,
}

pub fn jordan_decomposition(mu: &FiniteMeasure) -> Jordan {
    let map = |g: fn(f64) -> f64| FiniteMeasure::new(mu.atom_values.iter().map(|v| g(*v)).collect());
    Jordan {
        plus: map(|v| v.max(0.0)),
        minus: map(|v| (-v).max(0.0)),
        total_variation: map(f64::abs),
    }
}

/// Exactly one atom carries 1, the others 0.
pub fn is_zero_one(mu: &FiniteMeasure) -> bool {
    mu.atom_values.iter().filter(|v| **v == 1.0).count() == 1 && mu.atom_values.iter().all(|v| *v == 0.0 || *v == 1.0)
}

/// `μ(Ω) = 1` and `μ(A) ∈ {0, 1}` for every atom set `A`, by enumeration.
/// The zero measure only takes values in {0, 1} but is not normalized.
pub fn is_zero_one_exhaustive(mu: &FiniteMeasure) -> Result<bool> {
    if mu.len() > MAX_SUBSET_ATOMS {
        return Err(Error::ResourceLimit("too many atoms for enumeration".into()));
    }
    let full = (1u64 << mu.len()) - 1;
    Ok(mu.value(full) == 1.0 && (0..=full).all(|a| {
        let v = mu.value(a);
        v == 0.0 || v == 1.0
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteUltrafilter {
    pub principal_atom: usize,
}

impl FiniteUltrafilter {
    pub fn new(principal_atom: usize, p: &FinitePartition) -> Result<Self> {
        if principal_atom >= p.len() {
            return Err(Error::invalid("atom index out of range"));
        }
        if p.lambda_weights[principal_atom] <= 0.0 {
            return Err(Error::invalid("principal atom must have positive weight"));
        }
        Ok(FiniteUltrafilter { principal_atom })
    }

    pub fn contains(&self, a: AtomSet) -> bool {
        a >> self.principal_atom & 1 == 1
    }

    pub fn as_filter(&self) -> FiniteFilter {
        FiniteFilter { generator: singleton(self.principal_atom) }
    }
}

/// Upper set of a fixed generator: `{A : generator ⊆ A}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteFilter {
    pub generator: AtomSet,
}

impl FiniteFilter {
    pub fn contains(&self, a: AtomSet) -> bool {
        a & self.generator == self.generator
    }
}

pub fn measure_from_ultrafilter(u: &FiniteUltrafilter, p: &FinitePartition) -> FiniteMeasure {
    FiniteMeasure::dirac(p.len(), u.principal_atom)
}

pub fn ultrafilter_from_measure(mu: &FiniteMeasure, p: &FinitePartition) -> Result<FiniteUltrafilter> {
    if !is_zero_one(mu) {
        return Err(Error::invalid("not a 0-1 measure"));
    }
    if !mu.is_weakly_ac(p) {
        return Err(Error::invalid("measure charges a null atom"));
    }
    let i = mu.atom_values.iter().position(|v| *v == 1.0).expect("0-1 measure has an atom of mass 1");
    FiniteUltrafilter::new(i, p)
}

/// For every atom set exactly one of `A`, `Ω∖A` belongs to the filter.
pub fn check_filter_dichotomy(f: &FiniteFilter, p: &FinitePartition) -> Result<bool> {
    let mut subsets = p.subsets()?;
    Ok(subsets.all(|a| f.contains(a) != f.contains(p.complement(a))))
}

pub fn check_ultrafilter_dichotomy(u: &FiniteUltrafilter, p: &FinitePartition) -> Result<bool> {
    check_filter_dichotomy(&u.as_filter(), p)
}

/// Every ultrafilter on the positive-weight sets, found by searching all
/// families of atom sets. Each family is a bitmask over the `2^n` sets.
pub fn ultrafilters_by_search(p: &FinitePartition) -> Result<Vec<u64>> {
    let n = p.len();
    if n > 4 {
        return Err(Error::ResourceLimit("family search is limited to 4 atoms".into()));
    }
    let sets = 1usize << n;
    let pos = |a: usize| p.lambda(a as AtomSet) > 0.0;
    let mut out = Vec::new();
    for fam in 0u64..(1u64 << sets) {
        let has = |a: usize| fam >> a & 1 == 1;
        if fam == 0 || (0..sets).any(|a| has(a) && !pos(a)) {
            continue;
        }
        let upward = (0..sets).all(|a| !has(a) || (0..sets).all(|b| b & a != a || has(b)));
        let meets = (0..sets).all(|a| (0..sets).all(|b| !(has(a) && has(b)) || has(a & b)));
        let ultra = (0..sets).filter(|&a| pos(a)).all(|a| has(a) || has(p.complement(a as AtomSet) as usize));
        if upward && meets && ultra {
            out.push(fam);
        }
    }
    Ok(out)
}

/// Family bitmask of the principal ultrafilter at `atom`.
pub fn principal_family(p: &FinitePartition, atom: usize) -> u64 {
    (0..1usize << p.len())
        .filter(|a| a >> atom & 1 == 1)
        .fold(0u64, |f, a| f | 1u64 << a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureFailure {
    /// Length of the shortest prefix of `S` whose intersection carries no weight.
    pub prefix: usize,
    pub intersection: AtomSet,
}

impl std::fmt::Display for ClosureFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "the first {} sets intersect in {:?}, which has zero weight",
            self.prefix,
            atoms_of(self.intersection)
        )
    }
}

/// An ultrafilter containing every set of `S`, if the finite intersections
/// all have positive weight. Ties go to the smallest atom index.
pub fn finite_intersection_closure(
    s: &[AtomSet],
    p: &FinitePartition,
) -> std::result::Result<FiniteUltrafilter, ClosureFailure> {
    let mut acc = p.full();
    for (k, a) in s.iter().enumerate() {
        acc &= a;
        if p.lambda(acc) <= 0.0 {
            return Err(ClosureFailure { prefix: k + 1, intersection: acc });
        }
    }
    let i = atoms_of(acc & p.positive())[0];
    Ok(FiniteUltrafilter { principal_atom: i })
}

/// `{x : A x ≤ b, E x = e}` over the free coordinates.
struct Polytope {
    dim: usize,
    ineq: Vec<(Vec<f64>, f64)>,
    eq: Vec<(Vec<f64>, f64)>,
}

fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(p, q)| p * q).sum()
}

impl Polytope {
    fn feasible(&self, x: &[f64]) -> bool {
        self.ineq.iter().all(|(a, b)| dot(a, x) <= b + DECOMPOSITION_TOL)
            && self.eq.iter().all(|(a, b)| (dot(a, x) - b).abs() <= DECOMPOSITION_TOL)
    }

    /// Active constraints span the space.
    fn is_vertex(&self, x: &[f64]) -> bool {
        let rows: Vec<&Vec<f64>> = self
            .ineq
            .iter()
            .filter(|(a, b)| (dot(a, x) - b).abs() <= DECOMPOSITION_TOL)
            .map(|(a, _)| a)
            .chain(self.eq.iter().map(|(a, _)| a))
            .collect();
        if rows.len() < self.dim {
            return false;
        }
        let m = DMatrix::from_fn(rows.len(), self.dim, |i, j| rows[i][j]);
        m.rank(1e-9) == self.dim
    }

    /// `x` is the midpoint of two distinct feasible grid points.
    fn splits_on(&self, x: &[f64], grid: &[Vec<f64>]) -> bool {
        grid.iter().any(|y| {
            let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| 2.0 * a - b).collect();
            y.iter().zip(x).any(|(a, b)| (a - b).abs() > DECOMPOSITION_TOL) && self.feasible(&z)
        })
    }

    /// Feasible points of the lattice `{lo + j/res}` per coordinate.
    fn grid(&self, lo: f64, hi: f64) -> Vec<Vec<f64>> {
        let mut res = 1usize;
        let span = ((hi - lo).round() as usize).max(1);
        while (span * (res + 1) + 1).pow(self.dim as u32) <= GRID_LIMIT && res < 8 {
            res += 1;
        }
        let steps = span * res + 1;
        let total = steps.pow(self.dim as u32);
        (0..total)
            .map(|mut idx| {
                (0..self.dim)
                    .map(|_| {
                        let j = idx % steps;
                        idx /= steps;
                        lo + j as f64 / res as f64
                    })
                    .collect::<Vec<f64>>()
            })
            .filter(|x| self.feasible(x))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremePoints {
    pub points: Vec<FiniteMeasure>,
    /// Grid candidates examined.
    pub candidates: usize,
    /// The rank test and the midpoint search agree on every candidate.
    pub cross_checked: bool,
}

fn vertices(poly: &Polytope, lo: f64, hi: f64, free: &[usize], n: usize) -> ExtremePoints {
    let grid = poly.grid(lo, hi);
    let mut agree = true;
    let mut points = Vec::new();
    for x in &grid {
        let v = poly.is_vertex(x);
        agree &= v != poly.splits_on(x, &grid);
        if v {
            let mut vals = vec![0.0; n];
            for (k, i) in free.iter().enumerate() {
                vals[*i] = x[k];
            }
            points.push(FiniteMeasure::new(vals));
        }
    }
    ExtremePoints {
        points,
        candidates: grid.len(),
        cross_checked: agree,
    }
}

fn guard_vertices(p: &FinitePartition) -> Result<()> {
    if p.len() > MAX_VERTEX_ATOMS {
        return Err(Error::ResourceLimit(format!(
            "{} atoms exceed the vertex limit of {MAX_VERTEX_ATOMS}",
            p.len()
        )));
    }
    Ok(())
}

/// Vertices of `{μ weakly a.c. : |μ|(Ω) ≤ 1}`.
pub fn extreme_points_unit_ball(p: &FinitePartition) -> Result<ExtremePoints> {
    guard_vertices(p)?;
    let free = atoms_of(p.positive());
    let m = free.len();
    let ineq = (0..1usize << m)
        .map(|signs| {
            let a = (0..m).map(|i| if signs >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
            (a, 1.0)
        })
        .collect();
    let poly = Polytope { dim: m, ineq, eq: vec![] };
    Ok(vertices(&poly, -1.0, 1.0, &free, p.len()))
}

/// Vertices of `{μ ≥ 0 weakly a.c. : μ(C) = μ(Ω) = 1}`. Null atoms in `C`
/// are ignored; the set is empty when `C` carries no weight.
pub fn extreme_points_density_set(c: AtomSet, p: &FinitePartition) -> Result<ExtremePoints> {
    guard_vertices(p)?;
    let free = atoms_of(c & p.positive());
    let m = free.len();
    if m == 0 {
        return Ok(ExtremePoints {
            points: vec![],
            candidates: 0,
            cross_checked: true,
        });
    }
    let ineq = (0..m)
        .map(|i| {
            let mut a = vec![0.0; m];
            a[i] = -1.0;
            (a, 0.0)
        })
        .collect();
    let poly = Polytope { dim: m, ineq, eq: vec![(vec![1.0; m], 1.0)] };
    Ok(vertices(&poly, 0.0, 1.0, &free, p.len()))
}

/// `Σ f_i μ_i`.
pub fn integrate(f: &[f64], mu: &FiniteMeasure) -> Result<f64> {
    if f.len() != mu.len() {
        return Err(Error::invalid(format!(
            "{} step values for {} atoms",
            f.len(),
            mu.len()
        )));
    }
    Ok(dot(f, &mu.atom_values))
}

/// `∫ fg dμ = ∫ f dμ · ∫ g dμ`, compared exactly.
pub fn check_multiplicativity(f: &[f64], g: &[f64], mu: &FiniteMeasure) -> Result<bool> {
    if !is_zero_one(mu) {
        return Err(Error::invalid("multiplicativity requires a 0-1 measure"));
    }
    multiplicativity_holds(f, g, mu)
}

/// As [`check_multiplicativity`] without the 0-1 precondition.
pub fn multiplicativity_holds(f: &[f64], g: &[f64], mu: &FiniteMeasure) -> Result<bool> {
    if g.len() != f.len() {
        return Err(Error::invalid("step functions differ in length"));
    }
    let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    Ok(integrate(&fg, mu)? == integrate(f, mu)? * integrate(g, mu)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurityWitness {
    pub point: Vec<f64>,
    pub set_sequence: Vec<Region>,
    pub lambda_values: Vec<f64>,
    /// `max_{j≥k}` mass that the scale-`δ_j` average puts outside `A_k`.
    pub escaped_mass: Vec<f64>,
    /// Scale-`δ_j` averages of `χ_{A_k}` for `j ≥ k`; all equal 1.
    pub mass_on_sets: Vec<f64>,
    pub decreasing: bool,
}

/// `A_k = B_{δ_k}(x) ∩ Ω` with its measures and the mass kept inside by the
/// averaging functionals.
pub fn purity_witness(
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
) -> Result<PurityWitness> {
    let sets = neighborhoods(&Region::point(x.to_vec()), &[omega], schedule)?;
    let samples = match ScaleSamples::collect(schedule.deltas(), sets.clone(), budget, 0x9E1) {
        Ok(s) => s,
        Err(Error::EmptyRegion { .. }) => return Err(Error::invalid("not a density point of the domain")),
        Err(e) => return Err(e),
    };
    let lambda_values: Vec<f64> = samples.samples.iter().map(|s| s.measure().0).collect();
    let mut escaped_mass = Vec::with_capacity(sets.len());
    let mut mass_on_sets = Vec::with_capacity(sets.len());
    for (k, a) in sets.iter().enumerate() {
        let mut esc: f64 = 0.0;
        let mut inside: f64 = 1.0;
        for s in &samples.samples[k..] {
            let out = s.points().filter(|p| !a.contains(p)).count();
            let frac = out as f64 / s.len() as f64;
            esc = esc.max(frac);
            inside = inside.min(1.0 - frac);
        }
        escaped_mass.push(esc);
        mass_on_sets.push(inside);
    }
    let decreasing = lambda_values.windows(2).all(|w| w[1] < w[0]);
    Ok(PurityWitness {
        point: x.to_vec(),
        set_sequence: sets,
        lambda_values,
        escaped_mass,
        mass_on_sets,
        decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn part(w: &[f64]) -> FinitePartition {
        FinitePartition::from_weights(w).unwrap()
    }

    #[test]
    fn jordan_example() {
        let j = jordan_decomposition(&FiniteMeasure::new(vec![1.0, -2.0, 0.0]));
        assert_eq!(j.plus.atom_values, vec![1.0, 0.0, 0.0]);
        assert_eq!(j.minus.atom_values, vec![0.0, 2.0, 0.0]);
        assert_eq!(j.total_variation.atom_values, vec![1.0, 2.0, 0.0]);
        assert_eq!(j.total_variation.total(), 3.0);
        let pos = FiniteMeasure::new(vec![0.5, 2.0]);
        let j = jordan_decomposition(&pos);
        assert_eq!(j.minus.norm(), 0.0);
        assert_eq!(j.total_variation, pos);
    }

    #[test]
    fn zero_one_agrees_with_enumeration() {
        for v in [vec![0.0, 1.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0, 0.0], vec![1.0, -1.0, 1.0]] {
            let mu = FiniteMeasure::new(v);
            assert_eq!(is_zero_one(&mu), is_zero_one_exhaustive(&mu).unwrap(), "{mu:?}");
        }
        assert!(is_zero_one(&FiniteMeasure::new(vec![0.0, 1.0, 0.0])));
        assert!(!is_zero_one(&FiniteMeasure::new(vec![1.0, 1.0, 0.0])));
    }

    #[test]
    fn ultrafilter_round_trip() {
        let p = part(&[1.0, 1.0, 1.0, 1.0]);
        let u = FiniteUltrafilter::new(2, &p).unwrap();
        assert_eq!(measure_from_ultrafilter(&u, &p).atom_values, vec![0.0, 0.0, 1.0, 0.0]);
        for i in 0..4 {
            let u = FiniteUltrafilter::new(i, &p).unwrap();
            let mu = measure_from_ultrafilter(&u, &p);
            assert_eq!(ultrafilter_from_measure(&mu, &p).unwrap(), u);
            for a in p.subsets().unwrap() {
                assert_eq!(mu.value(a) == 1.0, u.contains(a));
            }
        }
        let bad = FiniteMeasure::new(vec![0.3, 0.7, 0.0, 0.0]);
        assert!(matches!(ultrafilter_from_measure(&bad, &p), Err(Error::InvalidArgument(_))));
        let null = part(&[1.0, 0.0]);
        assert!(FiniteUltrafilter::new(1, &null).is_err());
        assert!(ultrafilter_from_measure(&FiniteMeasure::dirac(2, 1), &null).is_err());
    }

    #[test]
    fn searched_ultrafilters_are_principal() {
        for w in [vec![1.0], vec![1.0, 2.0], vec![1.0, 0.0, 3.0], vec![0.5, 0.0, 0.25, 1.0]] {
            let p = part(&w);
            let found = ultrafilters_by_search(&p).unwrap();
            let expected: Vec<u64> = atoms_of(p.positive()).iter().map(|&i| principal_family(&p, i)).collect();
            let mut f = found.clone();
            let mut e = expected.clone();
            f.sort();
            e.sort();
            assert_eq!(f, e, "{w:?}");
        }
    }

    #[test]
    fn dichotomy() {
        let p = part(&[1.0; 4]);
        for i in 0..4 {
            assert!(check_ultrafilter_dichotomy(&FiniteUltrafilter::new(i, &p).unwrap(), &p).unwrap());
        }
        let filter = FiniteFilter { generator: set_of(&[0, 1]) };
        assert!(!check_filter_dichotomy(&filter, &p).unwrap());
        assert!(!filter.contains(singleton(1)) && !filter.contains(p.complement(singleton(1))));
        let one = part(&[1.0]);
        assert!(check_ultrafilter_dichotomy(&FiniteUltrafilter::new(0, &one).unwrap(), &one).unwrap());
        let big = part(&[1.0; 21]);
        assert!(matches!(
            check_ultrafilter_dichotomy(&FiniteUltrafilter::new(0, &big).unwrap(), &big),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn intersection_closure() {
        let p = part(&[1.0; 4]);
        let u = finite_intersection_closure(&[set_of(&[1, 2]), set_of(&[2, 3])], &p).unwrap();
        assert_eq!(u.principal_atom, 2);
        let f = finite_intersection_closure(&[set_of(&[1]), set_of(&[2])], &p).unwrap_err();
        assert_eq!((f.prefix, f.intersection), (2, 0));
        let u = finite_intersection_closure(&[set_of(&[1, 2, 3]), set_of(&[2, 3]), set_of(&[3])], &p).unwrap();
        assert_eq!(u.principal_atom, 3);
    }

    fn signed_units(p: &FinitePartition) -> Vec<Vec<f64>> {
        atoms_of(p.positive())
            .iter()
            .flat_map(|&i| [1.0, -1.0].map(|s| FiniteMeasure::dirac(p.len(), i).scaled(s).atom_values))
            .collect()
    }

    fn sorted(v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let mut v = v;
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn unit_ball_vertices() {
        let p = part(&[1.0, 2.0, 0.5]);
        let e = extreme_points_unit_ball(&p).unwrap();
        assert!(e.cross_checked);
        assert_eq!(e.points.len(), 6);
        assert_eq!(sorted(e.points.into_iter().map(|m| m.atom_values).collect()), sorted(signed_units(&p)));
        let p = part(&[1.0, 0.0, 0.5]);
        let e = extreme_points_unit_ball(&p).unwrap();
        assert_eq!(e.points.len(), 4);
        assert!(e.points.iter().all(|m| m.atom_values[1] == 0.0));
        let e = extreme_points_unit_ball(&part(&[3.0])).unwrap();
        assert_eq!(sorted(e.points.into_iter().map(|m| m.atom_values).collect()), vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn density_set_vertices() {
        let p = part(&[1.0; 4]);
        let e = extreme_points_density_set(set_of(&[1, 2]), &p).unwrap();
        assert!(e.cross_checked);
        let got = sorted(e.points.into_iter().map(|m| m.atom_values).collect());
        assert_eq!(got, sorted(vec![FiniteMeasure::dirac(4, 1).atom_values, FiniteMeasure::dirac(4, 2).atom_values]));
        assert_eq!(extreme_points_density_set(singleton(3), &p).unwrap().points.len(), 1);
        let q = part(&[1.0, 0.0]);
        assert!(extreme_points_density_set(singleton(1), &q).unwrap().points.is_empty());
    }

    #[test]
    fn integration_and_multiplicativity() {
        let mu = FiniteMeasure::dirac(4, 2);
        assert_eq!(integrate(&[1.0, 2.0, 3.0, 4.0], &mu).unwrap(), 3.0);
        assert!(integrate(&[1.0], &mu).is_err());
        let m0 = FiniteMeasure::dirac(2, 0);
        assert!(check_multiplicativity(&[1.0, 2.0], &[3.0, 4.0], &m0).unwrap());
        let half = FiniteMeasure::new(vec![0.5, 0.5]);
        assert!(check_multiplicativity(&[1.0, 2.0], &[3.0, 4.0], &half).is_err());
        assert!(!multiplicativity_holds(&[1.0, 2.0], &[3.0, 4.0], &half).unwrap());
        assert_eq!(integrate(&[1.0, 2.0], &half).unwrap(), 1.5);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(1..8);
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let a = FiniteMeasure::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let b = FiniteMeasure::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let (s, t) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let lhs = integrate(&f, &a.combine(s, &b, t).unwrap()).unwrap();
            let rhs = s * integrate(&f, &a).unwrap() + t * integrate(&f, &b).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            let chi: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
            let mu = FiniteMeasure::dirac(n, rng.gen_range(0..n));
            assert!(check_multiplicativity(&chi, &chi, &mu).unwrap());
        }
    }

    #[test]
    fn purity_on_interval() {
        let omega = Region::interval(-1.0, 1.0);
        let sched = DeltaSchedule::new(0.5, 0.5, 8).unwrap();
        let budget = SampleBudget::new(4000, 1).unwrap();
        let w = purity_witness(&[0.0], &omega, &sched, &budget).unwrap();
        for (k, l) in w.lambda_values.iter().enumerate() {
            assert!((l - 0.5f64.powi(k as i32)).abs() < 1e-12, "{k}: {l}");
        }
        assert!(w.decreasing);
        assert!(w.escaped_mass.iter().all(|m| *m == 0.0));
        assert!(w.mass_on_sets.iter().all(|m| *m == 1.0));
        assert!(matches!(
            purity_witness(&[3.0], &omega, &sched, &budget),
            Err(Error::InvalidArgument(_))
        ));
    }
}
