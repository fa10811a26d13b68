// The L² projection of `Σe` onto the `d` path and the identities built on it.

use decouple::moments::{
    check_decomposition, check_distance_equality, max_cross_term, project_on_g,
};
use decouple::{random_tree, tangent_decouple, RandomTreeSpec};

pub fn run_example() -> decouple::Result<()> {
    let tree = random_tree(&RandomTreeSpec::new(3, 3, -2.0, 2.0), 11)?;
    let space = tangent_decouple(&tree)?;
    let table = project_on_g(&space);
    print!("{}", table.to_csv(&space));
    println!("E[E(Σe|G)] = {}", table.expectation());

    let distance = check_distance_equality(&space);
    println!("E[Σd − E(Σe|G)]² = {}", distance.lhs);
    println!("E[Σe − E(Σe|G)]² = {}", distance.rhs);
    println!("decomposition residual {:e}", check_decomposition(&space));
    println!("largest cross term {:e}", max_cross_term(&space));
    Ok(())
}

#[allow(dead_code)]
fn main() -> decouple::Result<()> {
    run_example()
}
