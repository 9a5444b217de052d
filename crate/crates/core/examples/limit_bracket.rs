//! Brackets on the limit of ball averages for a jump and an oscillation.

use densmeas::corpus;
use densmeas::meanvalue::{limit_bracket, mean_value_sequence};
use densmeas::{DeltaSchedule, Region, SampleBudget};

fn main() -> densmeas::Result<()> {
    let budget = SampleBudget::new(100_000, 0)?;
    let sched = DeltaSchedule::default();
    for id in ["sign1d", "sin_inv", "abs1d"] {
        let e = corpus::lookup(id)?;
        let seq = mean_value_sequence(e.field()?, &Region::point(e.point().to_vec()), &e.domain, &e.domain, &sched, &budget)?;
        let b = limit_bracket(&seq, 0, 1e-2)?;
        println!("{id:<8} finest mean {:+.5}, limit in [{:+.4}, {:+.4}]", seq.means[seq.len() - 1], b.lo, b.hi);
    }
    Ok(())
}
