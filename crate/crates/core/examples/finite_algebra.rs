//! Exact 0-1 measures, ultrafilters and extreme points on a finite algebra.

use densmeas::finite_measures::*;

fn main() -> densmeas::Result<()> {
    // atom 1 is Lebesgue-null
    let p = FinitePartition::from_weights(&[0.5, 0.0, 1.5, 1.0])?;
    for i in atoms_of(p.positive()) {
        let u = FiniteUltrafilter::new(i, &p)?;
        let mu = measure_from_ultrafilter(&u, &p);
        println!("ultrafilter at atom {i} <-> measure {:?}, dichotomy {}", mu.atom_values, check_ultrafilter_dichotomy(&u, &p)?);
    }
    let ball = extreme_points_unit_ball(&p)?;
    println!("unit ball has {} extreme points (cross-checked: {})", ball.points.len(), ball.cross_checked);
    let d = extreme_points_density_set(set_of(&[0, 1]), &p)?;
    println!("density set of {{0, 1}}: {:?}", d.points.iter().map(|m| &m.atom_values).collect::<Vec<_>>());

    let f = [1.0, 2.0, 3.0, 4.0];
    let g = [-1.0, 0.5, 2.0, 0.0];
    println!("dirac multiplicative: {}", multiplicativity_holds(&f, &g, &FiniteMeasure::dirac(4, 2))?);
    println!("average multiplicative: {}", multiplicativity_holds(&f, &g, &FiniteMeasure::new(vec![0.25; 4]))?);
    Ok(())
}
