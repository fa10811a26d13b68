// Second moments of randomly stopped sums, their decoupled bound, and the Wald identity.

use decouple::bounds::DEFAULT_TOL;
use decouple::montecarlo::EstimatorConfig;
use decouple::stopped::{
    decoupled_stopped_moments, estimate_stopped, exact_stopped, stopped_sum_upper_bound,
    tau_moments, StoppedSumSpec, StoppingRule,
};
use decouple::DiscreteLaw;

pub fn run_example() -> decouple::Result<()> {
    // Bernoulli(1/2) increments, stop at the first success, at most two steps.
    let spec = StoppedSumSpec::from_support(DiscreteLaw::bernoulli(0.5)?, vec![1.0, 0.5])?
        .with_rule(StoppingRule::FirstAtLeast { threshold: 1.0 });
    let exact = exact_stopped(&spec)?;
    let bound = stopped_sum_upper_bound(&spec);
    println!(
        "first success: E S² = {}, decoupled {:?}",
        exact.second_moment, bound.decoupled
    );
    println!(
        "  bound {} (alternate closed form {})",
        bound.rhs, bound.alternate_closed_form
    );
    println!("  {:?}", bound.report(exact.second_moment, DEFAULT_TOL));

    // Centered increments: E S² = σ² Eτ for any stopping time.
    let walk = StoppedSumSpec::from_support(DiscreteLaw::rademacher(), vec![1.0, 1.0, 0.5, 0.5])?
        .with_rule(StoppingRule::SumOutside {
            lower: -2.0,
            upper: 1.0,
        });
    let exact = exact_stopped(&walk)?;
    println!(
        "random walk stopped on leaving (−2, 1): tail {:?}",
        exact.tail
    );
    let walk = StoppedSumSpec::from_support(DiscreteLaw::rademacher(), exact.tail.clone())?
        .with_rule(StoppingRule::SumOutside {
            lower: -2.0,
            upper: 1.0,
        });
    println!(
        "  E S² = {}, σ² Eτ = {}",
        exact.second_moment,
        tau_moments(&walk).mean
    );
    println!("  bound {}", stopped_sum_upper_bound(&walk).rhs);

    // Monte Carlo agrees with the decoupled moments when τ is independent of the increments.
    let independent = StoppedSumSpec::from_support(
        DiscreteLaw::new(vec![(-1.0, 0.25), (2.0, 0.75)])?,
        vec![0.9, 0.6, 0.2],
    )?
    .with_rule(StoppingRule::Independent);
    let est = estimate_stopped(&independent, &EstimatorConfig::new(200_000, 1))?;
    println!(
        "independent τ: MC E S² = {:.4}, decoupled E S'² = {:.4}",
        est.moments.second_moment,
        decoupled_stopped_moments(&independent).second_moment
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> decouple::Result<()> {
    run_example()
}
