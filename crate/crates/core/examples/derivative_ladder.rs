//! Which of the approximate, essential and precise derivatives exist.

use densmeas::config::Tolerances;
use densmeas::corpus;
use densmeas::derivatives::classify_differentiability;
use densmeas::{DeltaSchedule, SampleBudget};

fn main() -> densmeas::Result<()> {
    let budget = SampleBudget::new(100_000, 0)?;
    println!("{:<10} {:>11} {:>9} {:>7}", "field", "approximate", "essential", "precise");
    for id in ["chi_cusp", "x2sin", "sq1d", "abs1d"] {
        let e = corpus::lookup(id)?;
        let c = classify_differentiability(e.field()?, e.point(), &e.domain, &DeltaSchedule::default(), &budget, &Tolerances::default())?;
        let l = &c.ladder;
        println!("{id:<10} {:>11} {:>9} {:>7}", l.approximate, l.essential, l.precise);
    }
    Ok(())
}
