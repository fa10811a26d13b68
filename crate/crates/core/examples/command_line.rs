// Driving the command-line interface in-process. Reports go to standard output.

use decouple::cli::main_with_args;

pub fn run_example() -> decouple::Result<()> {
    let config = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/configs/first_success.json"
    );
    let runs: [&[&str]; 3] = [
        &[
            "decouple",
            "gallery",
            "unit_vector",
            "--n",
            "4",
            "--format",
            "table",
        ],
        &["decouple", "stopped", "--spec", config, "--format", "csv"],
        &[
            "decouple",
            "bounds",
            "--var-decoupled",
            "0.5",
            "--t",
            "1",
            "--mean",
            "1",
            "--m2-decoupled",
            "1.5",
            "--theta",
            "0.5",
        ],
    ];
    for args in runs {
        let code = main_with_args(args.iter().copied());
        println!("exit code {code}");
        assert_eq!(code, 0);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> decouple::Result<()> {
    run_example()
}
