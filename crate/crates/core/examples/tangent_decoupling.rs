// The tangent decoupled copy of a dependent sequence, with the checks that it is tangent
// to `d` and conditionally independent given the `d` path.

use decouple::{
    gallery, tangent_decouple, verify_conditional_independence, verify_tangency, GalleryParams,
};

pub fn run_example() -> decouple::Result<()> {
    let tree = gallery("remark_equality", &GalleryParams::default())?;
    let space = tangent_decouple(&tree)?;
    println!(
        "remark_equality: {} d paths, {} joint atoms",
        space.paths().len(),
        space.atoms().len()
    );
    print!("{}", space.to_csv());

    println!("tangency discrepancy: {:e}", verify_tangency(&space));
    println!(
        "conditional independence discrepancy: {:e}",
        verify_conditional_independence(&space)
    );

    let tree = gallery(
        "quadratic_form",
        &GalleryParams {
            coeffs: Some(vec![vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0], vec![0.0; 3]]),
            ..Default::default()
        },
    )?;
    let space = tangent_decouple(&tree)?;
    println!(
        "quadratic form in 3 signs: {} joint atoms, tangency {:e}, CI {:e}",
        space.atoms().len(),
        verify_tangency(&space),
        verify_conditional_independence(&space)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> decouple::Result<()> {
    run_example()
}
