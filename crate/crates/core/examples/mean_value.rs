//! Mean value identities for |x| on [-1, 2], with densities and with
//! generalized gradients.

use densmeas::clarke::mean_value_inclusion;
use densmeas::config::Tolerances;
use densmeas::corpus;
use densmeas::derivatives::mean_value_verify;
use densmeas::{DeltaSchedule, Region, SampleBudget};

fn main() -> densmeas::Result<()> {
    let budget = SampleBudget::new(100_000, 0)?;
    let sched = DeltaSchedule::default();
    let tol = Tolerances::default();
    let f = corpus::lookup("abs1d")?;
    let r = mean_value_verify(f.field()?, &[-1.0], &[2.0], &Region::Space { dim: 1 }, &sched, &budget, &tol)?;
    println!("f(2) - f(-1) = {:.4}, extrapolated tube integral {:.4}, holds {}", r.difference, r.extrapolated, r.holds);
    let m = mean_value_inclusion(f.field()?, &[-1.0], &[2.0], &sched, &budget, &tol)?;
    println!("increment in hull of generalized gradients along the segment: {} (excess {:.4})", m.holds, m.excess);
    Ok(())
}
