//! Generalized Jacobians of |x| and max(x, y) and the directional derivative.

use densmeas::clarke::{directional_derivative, generalized_jacobian};
use densmeas::config::Tolerances;
use densmeas::corpus;
use densmeas::{DeltaSchedule, SampleBudget};

fn main() -> densmeas::Result<()> {
    let budget = SampleBudget::new(100_000, 0)?;
    let sched = DeltaSchedule::default();
    let abs = corpus::lookup("abs1d")?;
    let j = generalized_jacobian(abs.field()?, &[0.0], &sched, &budget)?;
    println!("∂|x|(0) = [{:.4}, {:.4}]", -j.support(&[-1.0]), j.support(&[1.0]));

    let max = corpus::lookup("max2d")?;
    let j = generalized_jacobian(max.field()?, &[0.0, 0.0], &sched, &budget)?;
    for v in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, -1.0]] {
        let d = directional_derivative(max.field()?, &[0.0, 0.0], &v, &sched, &budget, &Tolerances::default())?;
        println!("max at 0, v = {v:?}: support {:+.4}, f° {:+.4}", j.support(&v), d.value);
    }
    Ok(())
}
