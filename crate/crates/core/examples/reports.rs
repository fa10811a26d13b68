// Running every check on a model and rendering the result as JSON, CSV and a table.

use decouple::report::{analyze_tree, AnalysisOptions, ExperimentReport, Format};
use decouple::{gallery, GalleryParams};

pub fn run_example() -> decouple::Result<()> {
    let tree = gallery("remark_equality", &GalleryParams::default())?;
    let report = analyze_tree(
        "remark_equality",
        serde_json::json!({"name": "remark_equality"}),
        &tree,
        AnalysisOptions::default(),
    )?;
    print!(
        "{}",
        String::from_utf8_lossy(&report.render(Format::Table)?)
    );
    print!("{}", String::from_utf8_lossy(&report.render(Format::Csv)?));

    let json = report.to_json()?;
    let back = ExperimentReport::from_json(&json)?;
    assert_eq!(back.to_json()?, json);
    println!(
        "{} bytes of canonical JSON, all checks pass: {}",
        json.len(),
        back.all_pass()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> decouple::Result<()> {
    run_example()
}
