//! Implicit regions, neighborhoods and their Lebesgue measures.

mod region;
pub mod sampling;
mod scales;

pub use region::{Bounds, Profile, Region};
pub use sampling::{sample_region, DeltaSchedule, RegionSample, SampleBudget, Strategy};
pub use scales::{ScaleSamples, ScaleValues};

use crate::error::{Error, Result};
use crate::meanvalue::{limit_bracket, Bracket, MeanValueSequence, DEFAULT_COLLAPSE_TOL};

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

/// The open δ-neighborhood `{p : dist(p, C) < δ}`.
pub fn dilate(c: &Region, delta: f64) -> Result<Region> {
    check_delta(delta)?;
    if !c.supports_distance() {
        return Err(Error::invalid(format!(
            "cannot dilate a region of kind '{}'",
            c.kind_name()
        )));
    }
    Ok(Region::Dilation {
        base: Box::new(c.clone()),
        delta,
    })
}

/// `B_δ(x)` for a point set with one point, the δ-neighborhood otherwise.
pub fn neighborhood(c: &Region, delta: f64) -> Result<Region> {
    match c {
        Region::Points { points } if points.len() == 1 => {
            check_delta(delta)?;
            Ok(Region::ball(points[0].clone(), delta))
        }
        _ => dilate(c, delta),
    }
}

/// `C_δ ∩ parts…` for every scale of the schedule.
pub fn neighborhoods(c: &Region, parts: &[&Region], schedule: &DeltaSchedule) -> Result<Vec<Region>> {
    schedule.validate()?;
    schedule
        .deltas()
        .into_iter()
        .map(|d| {
            let mut all = vec![neighborhood(c, d)?];
            all.extend(parts.iter().map(|r| (*r).clone()));
            Ok(Region::intersect(all))
        })
        .collect()
}

fn unit_vector(v: &[f64]) -> Result<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("direction must be a unit vector, |v| = {n}")));
    }
    Ok(())
}

/// Open cone with vertex `x`, axis `v` and half-angle `alpha`, clipped to `within`.
pub fn cone(x: &[f64], v: &[f64], alpha: f64, within: Bounds) -> Result<Region> {
    unit_vector(v)?;
    if x.len() != v.len() || within.dim() != x.len() {
        return Err(Error::invalid("cone vertex, axis and box dimensions differ"));
    }
    if !(alpha > 0.0 && alpha < std::f64::consts::FRAC_PI_2) {
        return Err(Error::invalid("cone half-angle must lie in (0, π/2)"));
    }
    Ok(Region::Cone {
        vertex: x.to_vec(),
        axis: v.to_vec(),
        half_angle: alpha,
        within,
    })
}

/// Cone with vertex at infinity, which is the cone with vertex at the origin.
pub fn cone_at_infinity(v: &[f64], alpha: f64, within: Bounds) -> Result<Region> {
    cone(&vec![0.0; v.len()], v, alpha, within)
}

/// Cusp region `{0 < s < length, r < g(s)}` with `g(s) = coef·s^exponent`.
/// The second value carries a warning when `g(s)/s` does not visibly tend to 0.
pub fn cusp_region(
    x: &[f64],
    v: &[f64],
    profile: Profile,
    length: f64,
) -> Result<(Region, Option<String>)> {
    unit_vector(v)?;
    if x.len() != v.len() || x.len() < 2 {
        return Err(Error::invalid("cusp needs matching vertex and axis in dimension ≥ 2"));
    }
    if !(length > 0.0) || !(profile.coef > 0.0) {
        return Err(Error::invalid("cusp length and profile coefficient must be positive"));
    }
    let ratios: Vec<f64> = (0..30)
        .map(|j| {
            let s = length * 0.5f64.powi(j);
            profile.eval(s) / s
        })
        .collect();
    let decays = ratios.windows(2).all(|w| w[1] <= w[0]) && ratios[ratios.len() - 1] < 1e-3;
    let warning = (!decays).then(|| {
        format!(
            "profile g(s) = {}·s^{} does not satisfy g(s)/s → 0 over the sampled range",
            profile.coef, profile.exponent
        )
    });
    Ok((
        Region::Cusp {
            vertex: x.to_vec(),
            axis: v.to_vec(),
            profile,
            length,
        },
        warning,
    ))
}

/// Truncated ball around infinity, `{1/δ < |p| ≤ r_max}`.
pub fn ball_at_infinity(dim: usize, delta: f64, r_max: f64) -> Result<Region> {
    check_delta(delta)?;
    if !(r_max > 1.0 / delta) {
        return Err(Error::invalid(format!(
            "truncation radius {r_max} must exceed 1/delta = {}",
            1.0 / delta
        )));
    }
    Ok(Region::Annulus {
        center: vec![0.0; dim],
        inner: 1.0 / delta,
        outer: r_max,
    })
}

/// Lebesgue measure estimate with standard error. Measure hints are used
/// verbatim with zero error.
pub fn estimate_measure(r: &Region, budget: &SampleBudget) -> Result<(f64, f64)> {
    if let Some(h) = r.measure_hint() {
        return Ok((h, 0.0));
    }
    match sample_region(r, budget, 0) {
        Ok(s) => Ok(s.measure()),
        Err(Error::EmptyRegion { .. }) => Ok((0.0, 0.0)),
        Err(e) => Err(e),
    }
}

/// True iff `B_δ(x) ∩ Ω` has positive estimated measure at every scale.
pub fn density_point_test(
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
) -> Result<bool> {
    let regions = neighborhoods(&Region::point(x.to_vec()), &[omega], schedule)?;
    match ScaleSamples::collect(schedule.deltas(), regions, budget, 0) {
        Ok(_) => Ok(true),
        Err(Error::EmptyRegion { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Density ratios `λ(A ∩ Ω ∩ B_δ(x)) / λ(Ω ∩ B_δ(x))` across the schedule.
pub fn density_sequence(
    a: &Region,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
) -> Result<MeanValueSequence> {
    let regions = neighborhoods(&Region::point(x.to_vec()), &[omega], schedule)?;
    let samples = ScaleSamples::collect(schedule.deltas(), regions, budget, 0)?;
    let vals = samples.map(|p| if a.contains(p) { 1.0 } else { 0.0 });
    Ok(MeanValueSequence::from_fractions(&vals, |v| v > 0.5))
}

/// Bracket around the density of `A` at `x` within `Ω`.
pub fn density_of_set_at(
    a: &Region,
    x: &[f64],
    omega: &Region,
    schedule: &DeltaSchedule,
    budget: &SampleBudget,
) -> Result<Bracket> {
    let seq = density_sequence(a, x, omega, schedule, budget)?;
    limit_bracket(&seq, 0, DEFAULT_COLLAPSE_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(n: usize) -> SampleBudget {
        SampleBudget::new(n, 11).unwrap()
    }

    #[test]
    fn dilation_of_point_and_axis() {
        let d = dilate(&Region::point(vec![0.0]), 0.5).unwrap();
        assert!(d.contains(&[0.49]) && d.contains(&[-0.49]) && !d.contains(&[0.5]));
        assert!(dilate(&Region::point(vec![0.0]), 0.0).is_err());
        let axis = Region::Flat {
            fixed: vec![(1, 0.0)],
            within: Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]),
        };
        let d = dilate(&axis, 0.2).unwrap();
        assert!(d.contains(&[0.5, 0.1]) && !d.contains(&[0.5, 0.3]));
        let seg = Region::Segment { a: vec![0.0, 0.0], b: vec![1.0, 0.0] };
        let st = dilate(&seg, 0.1).unwrap();
        assert!(st.contains(&[1.05, 0.0]) && st.contains(&[0.5, 0.09]) && !st.contains(&[0.5, 0.11]));
        let b = st.bbox();
        assert_eq!(b.lo, vec![-0.1, -0.1]);
        assert!(dilate(&Region::ball(vec![0.0], 1.0).and(Region::interval(0.0, 1.0)), 0.1).is_err());
    }

    #[test]
    fn cone_validation() {
        let w = Bounds::cube(&[0.0, 0.0], 2.0);
        assert!(cone(&[0.0, 0.0], &[1.0, 1.0], 0.5, w.clone()).is_err());
        assert!(cone(&[0.0, 0.0], &[1.0, 0.0], 1.6, w.clone()).is_err());
        let c = cone_at_infinity(&[1.0, 0.0], std::f64::consts::FRAC_PI_4, w).unwrap();
        assert!(c.contains(&[1.0, 0.5]) && !c.contains(&[1.0, 1.5]));
    }

    #[test]
    fn cusp_profile_warning() {
        let (_, w) = cusp_region(&[0.0, 0.0], &[1.0, 0.0], Profile::power(1.0, 2.0), 1.0).unwrap();
        assert!(w.is_none());
        let (_, w) = cusp_region(&[0.0, 0.0], &[1.0, 0.0], Profile::power(0.5, 1.0), 1.0).unwrap();
        assert!(w.is_some());
    }

    #[test]
    fn ball_at_infinity_truncation() {
        let b = ball_at_infinity(1, 0.1, 100.0).unwrap();
        assert!(b.contains(&[-50.0]) && b.contains(&[50.0]) && !b.contains(&[5.0]) && !b.contains(&[0.0]));
        assert!(ball_at_infinity(2, 0.1, 100.0).unwrap().contains(&[20.0, 0.0]));
        assert!(ball_at_infinity(1, 0.1, 10.0).is_err());
    }

    #[test]
    fn measures_of_simple_sets() {
        let sq = Region::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).with_measure_hint(1.0).unwrap();
        assert_eq!(estimate_measure(&sq, &budget(200)).unwrap(), (1.0, 0.0));
        let (m, se) = estimate_measure(&Region::ball(vec![0.0, 0.0], 1.0), &budget(200_000)).unwrap();
        assert!((m - std::f64::consts::PI).abs() < 0.01 && se < 0.01);
        let (cusp, _) = cusp_region(&[0.0, 0.0], &[1.0, 0.0], Profile::power(1.0, 2.0), 1.0).unwrap();
        let (m, _) = estimate_measure(&cusp, &budget(200_000)).unwrap();
        assert!((m - 2.0 / 3.0).abs() < 0.01);
        assert!(estimate_measure(&Region::Space { dim: 1 }, &budget(200)).is_err());
    }

    #[test]
    fn empty_region_error_for_thin_cusp_ball() {
        let (cusp, _) = cusp_region(&[0.0, 0.0], &[1.0, 0.0], Profile::power(1.0, 2.0), 1.0).unwrap();
        let r = cusp.and(Region::ball(vec![0.0, 0.0], 1e-7));
        assert!(matches!(
            sample_region(&r, &budget(1000), 0),
            Err(Error::EmptyRegion { .. })
        ));
    }

    #[test]
    fn half_line_density() {
        let a = Region::Halfspace {
            normal: vec![1.0],
            offset: 0.0,
            within: Bounds::new(vec![-10.0], vec![10.0]),
        };
        let b = density_of_set_at(&a, &[0.0], &Region::Space { dim: 1 }, &DeltaSchedule::default(), &budget(20_000))
            .unwrap();
        assert!(b.converges_to(0.5, 0.02), "{b:?}");
    }
}
