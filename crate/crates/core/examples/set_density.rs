//! Lebesgue densities of a half line, a parabolic region and a cusp.

use densmeas::corpus;
use densmeas::geometry::density_of_set_at;
use densmeas::{DeltaSchedule, SampleBudget};

fn main() -> densmeas::Result<()> {
    let budget = SampleBudget::new(100_000, 0)?;
    for id in ["half_line", "omega_2plus", "cusp_s2"] {
        let e = corpus::lookup(id)?;
        let b = density_of_set_at(e.set()?, e.point(), &e.domain, &DeltaSchedule::default(), &budget)?;
        println!("{id:<12} density in [{:.4}, {:.4}], collapsed: {}", b.lo, b.hi, b.collapse);
    }
    Ok(())
}
