//! Weak-* verdicts for sequences where the sup norm does not go to zero.

use densmeas::config::Tolerances;
use densmeas::corpus;
use densmeas::weakconv::weak_conv_report;
use densmeas::{DeltaSchedule, SampleBudget};

fn main() -> densmeas::Result<()> {
    let budget = SampleBudget::new(50_000, 0)?;
    for seq in [corpus::app_s5a(), corpus::app_s8(), corpus::app_s10()] {
        let r = weak_conv_report(&seq, &DeltaSchedule::default(), &budget, &Tolerances::default())?;
        let last = r.sup_norms.last().copied().unwrap_or(f64::NAN);
        println!(
            "{:<8} {:?} (sufficient {:?}, necessary {:?}, last sup norm {last:.3})",
            r.sequence, r.verdict, r.sufficient.verdict, r.necessary.verdict
        );
    }
    Ok(())
}
