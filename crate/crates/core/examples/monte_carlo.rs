// Seeded, stream-parallel estimates of the three sums, checked against enumeration where it
// is feasible and used alone where it is not.

use decouple::moments::{d_sum_moments, e_sum_moments};
use decouple::montecarlo::{
    estimate_moments, zscore, DecoupledSampler, EstimatorConfig, PathSampler, ProductSampler,
    StreamRng,
};
use decouple::{complete_decouple, gallery, tangent_decouple, Error, GalleryParams};
use rand::Rng;

pub fn run_example() -> decouple::Result<()> {
    let cfg = EstimatorConfig::new(100_000, 2024);
    let tree = gallery(
        "unit_vector",
        &GalleryParams {
            n: Some(5),
            ..Default::default()
        },
    )?;
    let space = tangent_decouple(&tree)?;
    let product = complete_decouple(&tree)?;

    let d = estimate_moments(&PathSampler(&tree), &cfg)?;
    let e = estimate_moments(&DecoupledSampler(&tree), &cfg)?;
    let z = estimate_moments(&ProductSampler(&product), &cfg)?;
    println!("d: {:?}", zscore(&d, &d_sum_moments(&space))?);
    println!("e: {:?}", zscore(&e, &e_sum_moments(&space))?);
    println!("z: {:?}", zscore(&z, &product.sum_moments())?);
    assert_eq!(e, estimate_moments(&DecoupledSampler(&tree), &cfg)?);

    // 2^30 paths is past the enumeration cap, but a closure sampler still works. For the
    // chain Σ X_{i−1} X_i in Rademacher signs the tangent copy replaces X_i by a fresh sign.
    let n = 30;
    let coeffs: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if j == i + 1 { 1.0 } else { 0.0 }).collect())
        .collect();
    if let Err(Error::CapExceeded { needed, cap }) = gallery(
        "quadratic_form",
        &GalleryParams {
            coeffs: Some(coeffs),
            ..Default::default()
        },
    ) {
        println!("quadratic form: {needed} paths exceed the cap {cap}");
    }
    let sign = |rng: &mut StreamRng| if rng.random::<bool>() { 1.0 } else { -1.0 };
    let chain = |rng: &mut StreamRng| {
        let xs: Vec<f64> = (0..n).map(|_| sign(rng)).collect();
        xs.windows(2).map(|w| w[0] * w[1]).sum::<f64>()
    };
    let decoupled_chain = |rng: &mut StreamRng| {
        let xs: Vec<f64> = (0..n).map(|_| sign(rng)).collect();
        xs.windows(2).map(|w| w[0] * sign(rng)).sum::<f64>()
    };
    let d = estimate_moments(&chain, &cfg)?;
    let e = estimate_moments(&decoupled_chain, &cfg)?;
    println!(
        "chain, n = {n}: E(Σd)² ≈ {:.3}, E(Σe)² ≈ {:.3}, both exactly {}",
        d.second_moment,
        e.second_moment,
        n - 1
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> decouple::Result<()> {
    run_example()
}
