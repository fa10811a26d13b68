use decouple::bounds::{complete_lower_bound, tangent_reports, DEFAULT_TOL};
use decouple::moments::{check_decomposition, check_distance_equality, max_cross_term, MomentKind};
use decouple::montecarlo::{estimate_moments, DecoupledSampler, EstimatorConfig, PathSampler};
use decouple::report::{analyze_tree, AnalysisOptions, ExperimentReport};
use decouple::stopped::{tau_moments_from_tail, validate_tail};
use decouple::{
    random_tree, tangent_decouple, verify_conditional_independence, verify_tangency, DiscreteLaw,
    RandomTreeSpec,
};
use proptest::prelude::*;

fn tree_spec() -> impl Strategy<Value = (RandomTreeSpec, u64)> {
    (1usize..=4, 1usize..=3, any::<u64>())
        .prop_map(|(n, b, seed)| (RandomTreeSpec::new(n, b, -2.0, 2.0), seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lemma_residuals_vanish((spec, seed) in tree_spec()) {
        let space = tangent_decouple(&random_tree(&spec, seed).unwrap()).unwrap();
        prop_assert!(check_decomposition(&space) <= 1e-9);
        prop_assert!(check_distance_equality(&space).residual() <= 1e-9);
        prop_assert!(max_cross_term(&space) <= 1e-9);
        prop_assert!(verify_tangency(&space) <= 1e-9);
        prop_assert!(verify_conditional_independence(&space) <= 1e-9);
    }

    #[test]
    fn tangent_bounds_hold((spec, seed) in tree_spec()) {
        let space = tangent_decouple(&random_tree(&spec, seed).unwrap()).unwrap();
        for r in tangent_reports(&space, DEFAULT_TOL) {
            prop_assert!(r.slack >= -1e-9, "{:?}", r);
        }
    }

    #[test]
    fn complete_lower_bound_holds((spec, seed) in tree_spec()) {
        let tree = random_tree(&spec.nonnegative(), seed).unwrap();
        prop_assert!(complete_lower_bound(&tree, DEFAULT_TOL).unwrap().slack >= -1e-9);
    }

    #[test]
    fn joint_space_marginalizes_to_paths((spec, seed) in tree_spec()) {
        let space = tangent_decouple(&random_tree(&spec, seed).unwrap()).unwrap();
        let mut mass = vec![0.0; space.paths().len()];
        for a in space.atoms() {
            mass[a.path] += a.prob;
        }
        for (m, p) in mass.iter().zip(space.paths()) {
            prop_assert!((m - p.prob).abs() <= 1e-12);
        }
    }

    #[test]
    fn law_construction_normalizes(raw in prop::collection::vec((-5i32..5, 1u32..100), 1..8)) {
        let total: f64 = raw.iter().map(|&(_, w)| f64::from(w)).sum();
        let atoms: Vec<(f64, f64)> = raw.iter().map(|&(v, w)| (f64::from(v), f64::from(w) / total)).collect();
        let law = DiscreteLaw::new(atoms.clone()).unwrap();
        prop_assert!((law.total_mass() - 1.0).abs() <= 1e-12);
        prop_assert!(law.atoms().windows(2).all(|w| w[0].0 < w[1].0));
        let mean: f64 = atoms.iter().map(|&(v, p)| v * p).sum();
        prop_assert!((law.mean() - mean).abs() <= 1e-12);
    }

    #[test]
    fn convolution_adds_moments(a in prop::collection::vec((-3i32..3, 1u32..10), 1..5), b in prop::collection::vec((-3i32..3, 1u32..10), 1..5)) {
        let law = |raw: &[(i32, u32)]| {
            let total: f64 = raw.iter().map(|&(_, w)| f64::from(w)).sum();
            DiscreteLaw::new(raw.iter().map(|&(v, w)| (f64::from(v), f64::from(w) / total)).collect()).unwrap()
        };
        let (x, y) = (law(&a), law(&b));
        let s = x.convolve(&y, 1000).unwrap();
        prop_assert!((s.mean() - x.mean() - y.mean()).abs() <= 1e-12);
        prop_assert!((s.variance() - x.variance() - y.variance()).abs() <= 1e-10);
    }

    #[test]
    fn report_json_round_trips((spec, seed) in tree_spec()) {
        let tree = random_tree(&spec, seed).unwrap();
        let report = analyze_tree("prop", serde_json::json!({"seed": seed}), &tree, AnalysisOptions::default()).unwrap();
        let json = report.to_json().unwrap();
        let back = ExperimentReport::from_json(&json).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), json);
        prop_assert_eq!(back.bounds.len(), report.bounds.len());
        for (a, b) in back.bounds.iter().zip(&report.bounds) {
            prop_assert!((a.lhs - b.lhs).abs() <= 1e-11 * b.lhs.abs().max(1e-300));
            prop_assert_eq!(a.holds, b.holds);
        }
    }

    #[test]
    fn tail_moments_match_law(raw in prop::collection::vec(0.0f64..1.0, 0..8)) {
        let mut tail = raw.clone();
        tail.sort_by(|a, b| b.total_cmp(a));
        prop_assert!(validate_tail(&tail).is_ok());
        let t = tau_moments_from_tail(&tail).unwrap();
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        for k in 1..=tail.len() {
            let pk = tail[k - 1] - tail.get(k).copied().unwrap_or(0.0);
            e1 += k as f64 * pk;
            e2 += (k * k) as f64 * pk;
        }
        prop_assert!((t.mean - e1).abs() <= 1e-12);
        prop_assert!((t.second_moment - e2).abs() <= 1e-10);
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let tree = random_tree(&RandomTreeSpec::new(4, 3, -2.0, 2.0), 5).unwrap();
    let cfg = EstimatorConfig::new(20_000, 77);
    assert_eq!(
        estimate_moments(&DecoupledSampler(&tree), &cfg).unwrap(),
        estimate_moments(&DecoupledSampler(&tree), &cfg).unwrap()
    );
    let other = EstimatorConfig::new(20_000, 78);
    assert_ne!(
        estimate_moments(&PathSampler(&tree), &cfg).unwrap(),
        estimate_moments(&PathSampler(&tree), &other).unwrap()
    );
}

#[test]
fn standard_error_halves_when_samples_quadruple() {
    let tree = random_tree(&RandomTreeSpec::new(4, 3, -2.0, 2.0), 17).unwrap();
    let se = |n: u64, seed: u64| match estimate_moments(
        &PathSampler(&tree),
        &EstimatorConfig::new(n, seed),
    )
    .unwrap()
    .kind
    {
        MomentKind::Estimated { std_error, .. } => std_error,
        MomentKind::Exact => unreachable!(),
    };
    let ratios: Vec<f64> = (0..10)
        .map(|s| se(10_000, s) / se(40_000, 100 + s))
        .collect();
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean_ratio - 2.0).abs() <= 0.4, "ratio {mean_ratio}");
}
