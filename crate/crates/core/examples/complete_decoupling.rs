// Complete decoupling and its lower bound `½ E(Σz)² ≤ E(Σd)²`, which the unit-vector model
// attains as `n` grows.

use decouple::bounds::{complete_lower_bound, DEFAULT_TOL};
use decouple::{complete_decouple, gallery, GalleryParams};

pub fn run_example() -> decouple::Result<()> {
    println!(
        "{:>3} {:>10} {:>10} {:>10} {:>10}",
        "n", "E(Σd)²", "E(Σz)²", "slack", "1/(2n)"
    );
    for n in 2..=10 {
        let tree = gallery(
            "unit_vector",
            &GalleryParams {
                n: Some(n),
                ..Default::default()
            },
        )?;
        let product = complete_decouple(&tree)?;
        let report = complete_lower_bound(&tree, DEFAULT_TOL)?;
        println!(
            "{n:>3} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            report.rhs,
            product.sum_second_moment(),
            report.slack,
            1.0 / (2.0 * n as f64)
        );
        assert!(report.holds);
    }

    // Σz has the law of a sum of independent Bernoulli(1/n) variables.
    let tree = gallery(
        "unit_vector",
        &GalleryParams {
            n: Some(4),
            ..Default::default()
        },
    )?;
    let z = complete_decouple(&tree)?.sum_law()?;
    println!("law of Σz for n = 4: {:?}", z.atoms());
    Ok(())
}

#[allow(dead_code)]
fn main() -> decouple::Result<()> {
    run_example()
}
