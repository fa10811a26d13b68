macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $module() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(outcome_trees, "outcome_trees.rs");
example!(complete_decoupling, "complete_decoupling.rs");
example!(tangent_decoupling, "tangent_decoupling.rs");
example!(projection_lemmas, "projection_lemmas.rs");
example!(sharp_bounds, "sharp_bounds.rs");
example!(comonotone_counterexample, "comonotone_counterexample.rs");
example!(tail_bounds, "tail_bounds.rs");
example!(stopped_sums, "stopped_sums.rs");
example!(monte_carlo, "monte_carlo.rs");
example!(reports, "reports.rs");
example!(command_line, "command_line.rs");
