// The three tangent decoupling bounds on a few models. On `remark_equality` all three hold
// with equality.

use decouple::bounds::{tangent_reports, DEFAULT_TOL};
use decouple::{gallery, random_tree, tangent_decouple, GalleryParams, RandomTreeSpec};

pub fn run_example() -> decouple::Result<()> {
    let models = [
        (
            "remark_equality",
            gallery("remark_equality", &GalleryParams::default())?,
        ),
        (
            "unit_vector(5)",
            gallery(
                "unit_vector",
                &GalleryParams {
                    n: Some(5),
                    ..Default::default()
                },
            )?,
        ),
        (
            "random(seed 17)",
            random_tree(&RandomTreeSpec::new(4, 3, -2.0, 2.0), 17)?,
        ),
    ];
    for (name, tree) in models {
        let space = tangent_decouple(&tree)?;
        for r in tangent_reports(&space, DEFAULT_TOL) {
            println!(
                "{name:<16} {:<20} lhs {:>10.6} rhs {:>10.6} slack {:>10.6}",
                r.inequality_id.as_str(),
                r.lhs,
                r.rhs,
                r.slack
            );
            assert!(r.holds);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> decouple::Result<()> {
    run_example()
}
