// Chebyshev- and Paley–Zygmund-type bounds that use the decoupled second moment, as plain
// calculators and against exact tail probabilities.

use decouple::bounds::{
    chebyshev_bound, chebyshev_report, paley_zygmund_bound, paley_zygmund_report, DEFAULT_TOL,
};
use decouple::{gallery, tangent_decouple, GalleryParams};

pub fn run_example() -> decouple::Result<()> {
    println!(
        "chebyshev(var = 0.5, t = 1) = {}",
        chebyshev_bound(0.5, 1.0)?
    );
    println!(
        "paley_zygmund(mean = 1, m2 = 1.5, θ = 0.5) = {}",
        paley_zygmund_bound(1.0, 1.5, 0.5)?
    );

    let tree = gallery(
        "unit_vector",
        &GalleryParams {
            n: Some(6),
            ..Default::default()
        },
    )?;
    let space = tangent_decouple(&tree)?;
    for t in [0.5, 1.0, 2.0] {
        let r = chebyshev_report(&space, t, DEFAULT_TOL)?;
        println!("t = {t}: P(|S − ES| > t) = {} ≤ {}", r.lhs, r.rhs);
    }
    for theta in [0.1, 0.5, 0.9] {
        let r = paley_zygmund_report(&space, theta, DEFAULT_TOL)?;
        println!("θ = {theta}: P(S > θES) = {} ≥ {:.6}", r.lhs, r.rhs);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> decouple::Result<()> {
    run_example()
}
