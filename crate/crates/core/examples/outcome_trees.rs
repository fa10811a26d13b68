// Building adapted sequences as outcome trees: by hand, as products, from the gallery,
// at random, and from a JSON model description.

use decouple::{
    gallery, random_tree, Branch, DiscreteLaw, GalleryParams, ModelDescription, Node, OutcomeTree,
    RandomTreeSpec,
};

pub fn run_example() -> decouple::Result<()> {
    // d_1 is a fair sign; d_2 repeats it after a +1 and is 0 after a −1.
    let up = Node::new(vec![
        Branch::terminal(1.0, 0.5),
        Branch::terminal(-1.0, 0.5),
    ]);
    let down = Node::new(vec![Branch::terminal(0.0, 1.0)]);
    let tree = OutcomeTree::new(
        2,
        Node::new(vec![
            Branch::new(1.0, 0.5, up),
            Branch::new(-1.0, 0.5, down),
        ]),
    )?;
    for path in tree.enumerate_paths()? {
        println!(
            "path {:?} branches {:?} prob {}",
            path.values, path.branches, path.prob
        );
    }
    let sum = tree.sum_law()?;
    println!("law of the sum: {:?}", sum.atoms());
    assert!((sum.second_moment() - 1.5).abs() < 1e-12);

    let iid = OutcomeTree::iid(&DiscreteLaw::bernoulli(0.3)?, 4)?;
    println!(
        "iid Bernoulli(0.3), 4 steps: {} paths, E(sum) = {}",
        iid.path_count(),
        iid.sum_law()?.mean()
    );

    let unit = gallery(
        "unit_vector",
        &GalleryParams {
            n: Some(3),
            ..Default::default()
        },
    )?;
    println!(
        "unit_vector(3): {} paths, sum law {:?}",
        unit.path_count(),
        unit.sum_law()?.atoms()
    );

    let random = random_tree(&RandomTreeSpec::new(3, 3, -2.0, 2.0), 10)?;
    println!("random tree (seed 10): {} paths", random.path_count());

    let described = ModelDescription::from_json(
        r#"{"kind": "product", "n": 2, "steps": [{"atoms": [[0, 0.5], [2, 0.5]]}]}"#,
    )?
    .build()?;
    println!(
        "product model from JSON: sum law {:?}",
        described.sum_law()?.atoms()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> decouple::Result<()> {
    run_example()
}
