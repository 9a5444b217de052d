//! Essential and approximate bounds of the four-piece field at the origin.

use densmeas::config::Tolerances;
use densmeas::corpus;
use densmeas::local_limits::Neighborhood;
use densmeas::{DeltaSchedule, SampleBudget};

fn main() -> densmeas::Result<()> {
    let entry = corpus::lookup("dm_s9a")?;
    let budget = SampleBudget::new(200_000, 0)?;
    let nb = Neighborhood::new(entry.point(), &entry.domain, &DeltaSchedule::default(), &budget, &Tolerances::default())?;
    let start = std::time::Instant::now();
    let report = nb.profile(entry.field()?);
    let p = &report.profile;
    println!("ess inf  {:+.4}", p.ess_inf);
    println!("alim inf {:+.4}", p.alim_inf);
    println!("alim sup {:+.4}", p.alim_sup);
    println!("ess sup  {:+.4}", p.ess_sup);
    println!("approximate limit: {:?}", report.approximate_limit);
    println!("sandwich holds: {}", report.sandwich);
    println!("elapsed {:.2?}", start.elapsed());
    Ok(())
}
