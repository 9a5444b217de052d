use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Axis-aligned box, possibly unbounded in some directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        Bounds { lo, hi }
    }

    pub fn cube(center: &[f64], half: f64) -> Self {
        Bounds {
            lo: center.iter().map(|c| c - half).collect(),
            hi: center.iter().map(|c| c + half).collect(),
        }
    }

    pub fn unbounded(dim: usize) -> Self {
        Bounds {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| *x >= *l && *x <= *h)
    }

    pub fn is_finite(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l).max(0.0))
            .product()
    }

    pub fn intersect(&self, other: &Bounds) -> Bounds {
        Bounds {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
        }
    }

    pub fn hull(&self, other: &Bounds) -> Bounds {
        Bounds {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    pub fn grow(&self, by: f64) -> Bounds {
        Bounds {
            lo: self.lo.iter().map(|l| l - by).collect(),
            hi: self.hi.iter().map(|h| h + by).collect(),
        }
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (l, h))| {
                let d = (l - x).max(x - h).max(0.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Transverse profile `g(s) = coef * s^exponent` of a cusp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub coef: f64,
    pub exponent: f64,
}

impl Profile {
    pub fn power(coef: f64, exponent: f64) -> Self {
        Profile { coef, exponent }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coef * s.powf(self.exponent)
    }
}

/// Implicit measurable subset of ℝⁿ: an indicator plus a bounding box.
///
/// The JSON form is tagged by `kind` and round-trips losslessly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// All of ℝⁿ; only usable intersected with something bounded.
    Space { dim: usize },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// `inner < |p - center| <= outer`.
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
    /// `normal · p > offset`, clipped to `within`.
    Halfspace { normal: Vec<f64>, offset: f64, within: Bounds },
    /// `p != vertex` and `angle(p - vertex, axis) < half_angle`, clipped to `within`.
    Cone { vertex: Vec<f64>, axis: Vec<f64>, half_angle: f64, within: Bounds },
    /// `0 < s < length` and `r < g(s)` in coordinates adapted to `axis`.
    Cusp { vertex: Vec<f64>, axis: Vec<f64>, profile: Profile, length: f64 },
    /// Open `radius`-neighborhood of the segment `[a, b]`.
    SegmentTube { a: Vec<f64>, b: Vec<f64>, radius: f64 },
    /// `expr(p) > 0`, clipped to `within`.
    Level { expr: Expr, within: Bounds },
    /// Finite point set (λ-null).
    Points { points: Vec<Vec<f64>> },
    /// Closed segment (λ-null for n ≥ 2).
    Segment { a: Vec<f64>, b: Vec<f64> },
    /// Points of `within` whose listed coordinates take fixed values (λ-null).
    Flat { fixed: Vec<(usize, f64)>, within: Bounds },
    /// `dist(p, base) < delta`.
    Dilation { base: Box<Region>, delta: f64 },
    /// Cartesian product; factor dimensions add up.
    Product { factors: Vec<Region> },
    Union { parts: Vec<Region> },
    Intersect { parts: Vec<Region> },
    /// Points of `within` not in `of`.
    Complement { of: Box<Region>, within: Bounds },
    /// Carries an exact Lebesgue measure used verbatim by measure estimation.
    Hinted { region: Box<Region>, measure: f64 },
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn segment_distance(a: &[f64], b: &[f64], p: &[f64]) -> f64 {
    let ab: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let ap: Vec<f64> = p.iter().zip(a).map(|(x, y)| x - y).collect();
    let len2 = dot(&ab, &ab);
    let t = if len2 > 0.0 {
        (dot(&ap, &ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ap.iter()
        .zip(&ab)
        .map(|(u, w)| (u - t * w) * (u - t * w))
        .sum::<f64>()
        .sqrt()
}

/// `(s, r)`: distance along `axis` and transverse distance of `p - vertex`.
fn adapted(vertex: &[f64], axis: &[f64], p: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = p.iter().zip(vertex).map(|(x, v)| x - v).collect();
    let s = dot(&d, axis);
    let r2 = (dot(&d, &d) - s * s).max(0.0);
    (s, r2.sqrt())
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64) -> Region {
        Region::Ball { center, radius }
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Region {
        Region::Box { lo, hi }
    }

    pub fn interval(a: f64, b: f64) -> Region {
        Region::Box { lo: vec![a], hi: vec![b] }
    }

    pub fn point(p: Vec<f64>) -> Region {
        Region::Points { points: vec![p] }
    }

    pub fn intersect(parts: Vec<Region>) -> Region {
        Region::Intersect { parts }
    }

    pub fn union(parts: Vec<Region>) -> Region {
        Region::Union { parts }
    }

    pub fn and(self, other: Region) -> Region {
        match self {
            Region::Intersect { mut parts } => {
                parts.push(other);
                Region::Intersect { parts }
            }
            r => Region::Intersect { parts: vec![r, other] },
        }
    }

    pub fn with_measure_hint(self, measure: f64) -> Result<Region> {
        let vol = self.bbox().volume();
        if !(measure >= 0.0 && measure <= vol) {
            return Err(Error::invalid(format!(
                "measure hint {measure} outside [0, {vol}]"
            )));
        }
        Ok(Region::Hinted {
            region: Box::new(self),
            measure,
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Region::Space { .. } => "space",
            Region::Box { .. } => "box",
            Region::Ball { .. } => "ball",
            Region::Annulus { .. } => "annulus",
            Region::Halfspace { .. } => "halfspace",
            Region::Cone { .. } => "cone",
            Region::Cusp { .. } => "cusp",
            Region::SegmentTube { .. } => "segment_tube",
            Region::Level { .. } => "level",
            Region::Points { .. } => "points",
            Region::Segment { .. } => "segment",
            Region::Flat { .. } => "flat",
            Region::Dilation { .. } => "dilation",
            Region::Product { .. } => "product",
            Region::Union { .. } => "union",
            Region::Intersect { .. } => "intersect",
            Region::Complement { .. } => "complement",
            Region::Hinted { .. } => "hinted",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Space { dim } => *dim,
            Region::Box { lo, .. } => lo.len(),
            Region::Ball { center, .. } | Region::Annulus { center, .. } => center.len(),
            Region::Halfspace { normal, .. } => normal.len(),
            Region::Cone { vertex, .. } | Region::Cusp { vertex, .. } => vertex.len(),
            Region::SegmentTube { a, .. } | Region::Segment { a, .. } => a.len(),
            Region::Level { within, .. } | Region::Flat { within, .. } => within.dim(),
            Region::Points { points } => points.first().map_or(0, |p| p.len()),
            Region::Dilation { base, .. } => base.dim(),
            Region::Product { factors } => factors.iter().map(Region::dim).sum(),
            Region::Union { parts } | Region::Intersect { parts } => {
                parts.first().map_or(0, Region::dim)
            }
            Region::Complement { within, .. } => within.dim(),
            Region::Hinted { region, .. } => region.dim(),
        }
    }

    /// True for the explicitly λ-null kinds.
    pub fn is_null(&self) -> bool {
        match self {
            Region::Points { .. } | Region::Flat { .. } => true,
            Region::Segment { a, .. } => a.len() >= 2,
            _ => false,
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Region::Space { .. } => true,
            Region::Box { lo, hi } => p
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (l, h))| *x > *l && *x < *h),
            Region::Ball { center, radius } => dist(p, center) < *radius,
            Region::Annulus { center, inner, outer } => {
                let d = dist(p, center);
                d > *inner && d <= *outer
            }
            Region::Halfspace { normal, offset, within } => {
                within.contains(p) && dot(normal, p) > *offset
            }
            Region::Cone { vertex, axis, half_angle, within } => {
                if !within.contains(p) {
                    return false;
                }
                let d: Vec<f64> = p.iter().zip(vertex).map(|(x, v)| x - v).collect();
                let n = norm(&d);
                if n == 0.0 {
                    return false;
                }
                let c = (dot(&d, axis) / n).clamp(-1.0, 1.0);
                c.acos() < *half_angle
            }
            Region::Cusp { vertex, axis, profile, length } => {
                let (s, r) = adapted(vertex, axis, p);
                s > 0.0 && s < *length && r < profile.eval(s)
            }
            Region::SegmentTube { a, b, radius } => segment_distance(a, b, p) < *radius,
            Region::Level { expr, within } => within.contains(p) && expr.eval(p) > 0.0,
            Region::Points { points } => points.iter().any(|q| q.as_slice() == p),
            Region::Segment { a, b } => segment_distance(a, b, p) == 0.0,
            Region::Flat { fixed, within } => {
                within.contains(p) && fixed.iter().all(|(i, v)| p[*i] == *v)
            }
            Region::Dilation { base, delta } => match base.distance(p) {
                Some(d) => d < *delta,
                None => false,
            },
            Region::Product { factors } => {
                let mut off = 0;
                factors.iter().all(|f| {
                    let d = f.dim();
                    let ok = f.contains(&p[off..off + d]);
                    off += d;
                    ok
                })
            }
            Region::Union { parts } => parts.iter().any(|r| r.contains(p)),
            Region::Intersect { parts } => parts.iter().all(|r| r.contains(p)),
            Region::Complement { of, within } => within.contains(p) && !of.contains(p),
            Region::Hinted { region, .. } => region.contains(p),
        }
    }

    /// Distance from `p` to the set, for the kinds where it is available in
    /// closed form.
    pub fn distance(&self, p: &[f64]) -> Option<f64> {
        match self {
            Region::Points { points } => {
                Some(points.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            }
            Region::Segment { a, b } => Some(segment_distance(a, b, p)),
            Region::Flat { fixed, within } => {
                let mut q = p.to_vec();
                for (i, v) in fixed {
                    q[*i] = *v;
                }
                let fixed_part: f64 = fixed.iter().map(|(i, v)| (p[*i] - v).powi(2)).sum();
                let box_part = within.distance(&q);
                Some((fixed_part + box_part * box_part).sqrt())
            }
            Region::Ball { center, radius } => Some((dist(p, center) - radius).max(0.0)),
            Region::Box { lo, hi } => Some(Bounds::new(lo.clone(), hi.clone()).distance(p)),
            Region::Union { parts } => parts
                .iter()
                .map(|r| r.distance(p))
                .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d))),
            Region::Hinted { region, .. } => region.distance(p),
            _ => None,
        }
    }

    pub fn supports_distance(&self) -> bool {
        let probe = vec![0.0; self.dim().max(1)];
        self.distance(&probe).is_some()
    }

    /// Axis-aligned bounding box; `contains` is false outside it.
    pub fn bbox(&self) -> Bounds {
        match self {
            Region::Space { dim } => Bounds::unbounded(*dim),
            Region::Box { lo, hi } => Bounds::new(lo.clone(), hi.clone()),
            Region::Ball { center, radius } => Bounds::cube(center, *radius),
            Region::Annulus { center, outer, .. } => Bounds::cube(center, *outer),
            Region::Halfspace { within, .. }
            | Region::Cone { within, .. }
            | Region::Level { within, .. }
            | Region::Flat { within, .. }
            | Region::Complement { within, .. } => within.clone(),
            Region::Cusp { vertex, axis, profile, length } => {
                let g = profile.eval(*length);
                let mut lo = Vec::with_capacity(vertex.len());
                let mut hi = Vec::with_capacity(vertex.len());
                for (v, a) in vertex.iter().zip(axis) {
                    let end = v + length * a;
                    let spread = g * (1.0 - a * a).max(0.0).sqrt();
                    lo.push(v.min(end) - spread);
                    hi.push(v.max(end) + spread);
                }
                Bounds::new(lo, hi)
            }
            Region::SegmentTube { a, b, radius } => {
                Bounds::new(a.clone(), a.clone())
                    .hull(&Bounds::new(b.clone(), b.clone()))
                    .grow(*radius)
            }
            Region::Points { points } => {
                let mut it = points.iter();
                let first = it.next().map(|p| Bounds::new(p.clone(), p.clone()));
                it.fold(first.unwrap_or_else(|| Bounds::new(vec![], vec![])), |acc, p| {
                    acc.hull(&Bounds::new(p.clone(), p.clone()))
                })
            }
            Region::Segment { a, b } => {
                Bounds::new(a.clone(), a.clone()).hull(&Bounds::new(b.clone(), b.clone()))
            }
            Region::Dilation { base, delta } => base.bbox().grow(*delta),
            Region::Product { factors } => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for f in factors {
                    let b = f.bbox();
                    lo.extend(b.lo);
                    hi.extend(b.hi);
                }
                Bounds::new(lo, hi)
            }
            Region::Union { parts } => {
                let mut it = parts.iter().map(Region::bbox);
                let first = it.next().unwrap_or_else(|| Bounds::new(vec![], vec![]));
                it.fold(first, |a, b| a.hull(&b))
            }
            Region::Intersect { parts } => {
                let mut it = parts.iter().map(Region::bbox);
                let first = it.next().unwrap_or_else(|| Bounds::new(vec![], vec![]));
                it.fold(first, |a, b| a.intersect(&b))
            }
            Region::Hinted { region, .. } => region.bbox(),
        }
    }

    pub fn measure_hint(&self) -> Option<f64> {
        match self {
            Region::Hinted { measure, .. } => Some(*measure),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_membership() {
        let c = Region::Cone {
            vertex: vec![0.0, 0.0],
            axis: vec![1.0, 0.0],
            half_angle: std::f64::consts::FRAC_PI_4,
            within: Bounds::cube(&[0.0, 0.0], 5.0),
        };
        assert!(c.contains(&[1.0, 0.5]));
        assert!(!c.contains(&[1.0, 1.5]));
        assert!(!c.contains(&[0.0, 0.0]));
    }

    #[test]
    fn cusp_membership() {
        let c = Region::Cusp {
            vertex: vec![0.0, 0.0],
            axis: vec![1.0, 0.0],
            profile: Profile::power(1.0, 2.0),
            length: 1.0,
        };
        assert!(c.contains(&[0.1, 0.005]));
        assert!(!c.contains(&[0.1, 0.02]));
        assert!(c.bbox().contains(&[0.5, 0.2]));
    }

    #[test]
    fn flat_distance_for_axis() {
        let axis = Region::Flat {
            fixed: vec![(1, 0.0)],
            within: Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]),
        };
        assert!((axis.distance(&[0.5, 0.1]).unwrap() - 0.1).abs() < 1e-15);
        assert!((axis.distance(&[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hint_must_fit_bbox() {
        assert!(Region::interval(0.0, 1.0).with_measure_hint(2.0).is_err());
        assert!(Region::interval(0.0, 1.0).with_measure_hint(1.0).is_ok());
    }
}
