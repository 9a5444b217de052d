//! Sum, product and chain rules for generalized Jacobians.

use densmeas::clarke::{calculus_rule_check, chain_rule_check, Rule};
use densmeas::config::Tolerances;
use densmeas::corpus;
use densmeas::{DeltaSchedule, SampleBudget};

fn main() -> densmeas::Result<()> {
    let budget = SampleBudget::new(100_000, 0)?;
    let sched = DeltaSchedule::default();
    let tol = Tolerances::default();
    let abs = corpus::lookup("abs1d")?;
    let neg = corpus::lookup("neg_abs1d")?;
    let lin = corpus::lookup("lin2x")?;

    // |x| - |x| vanishes but the sum rule only gives [-2, 2]
    let r = calculus_rule_check(Rule::Sum, abs.field()?, Some(neg.field()?), &[0.0], &sched, &budget, &tol)?;
    println!("sum |x| + (-|x|): included {}, equality expected {}, hausdorff {:.3}", r.included, r.equality_expected, r.hausdorff);
    let r = calculus_rule_check(Rule::Sum, abs.field()?, Some(lin.field()?), &[0.0], &sched, &budget, &tol)?;
    println!("sum |x| + 2x:     included {}, equal {}", r.included, r.equal);
    let r = calculus_rule_check(Rule::Product, abs.field()?, Some(lin.field()?), &[0.3], &sched, &budget, &tol)?;
    println!("product at 0.3:   included {}, equal {}", r.included, r.equal);
    let r = chain_rule_check(abs.field()?, lin.field()?, &[0.0], &sched, &budget, &tol)?;
    println!("chain |2x|:       included {}, equal {}", r.included, r.equal);
    Ok(())
}
