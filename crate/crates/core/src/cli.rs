//! The `decouple` command-line driver.
//!
//! Exit codes: 0 every check holds, 1 a bound or residual check failed, 2 invalid input,
//! 3 enumeration cap exceeded.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::bounds::{self, InequalityId};
use crate::decoupling::{complete_decouple_capped, tangent_decouple_capped};
use crate::error::{Error, Result};
use crate::moments::MomentSummary;
use crate::montecarlo::{self, DecoupledSampler, EstimatorConfig, PathSampler, ProductSampler};
use crate::outcome::{
    gallery, random_tree, DiscreteLaw, GalleryModel, GalleryParams, ModelDescription,
    RandomTreeSpec, DEFAULT_CAP,
};
use crate::report::{analyze_tree, AnalysisOptions, ExperimentReport, Format};
use crate::stopped::{self, StoppedSumSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "decouple",
    version,
    about = "Exact and Monte Carlo checks of second-moment decoupling inequalities"
)]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Report format: json, csv or table.
    #[arg(long, global = true, default_value = "json")]
    pub format: String,

    /// Absolute tolerance applied to every check.
    #[arg(long, global = true, env = "DECOUPLE_TOL")]
    pub tol: Option<f64>,

    /// Largest number of atoms any enumeration may produce.
    #[arg(long, global = true, env = "DECOUPLE_CAP")]
    pub cap: Option<usize>,

    /// Record the wall-clock time in the report (breaks byte-identical reruns).
    #[arg(long, global = true)]
    pub timestamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a canned model through every applicable check.
    Gallery(GalleryArgs),
    /// Check a model file, or a batch of random trees.
    Verify(VerifyArgs),
    /// Bound the second moment of a randomly stopped sum.
    Stopped(StoppedArgs),
    /// Evaluate the tail bounds from given moments.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
pub struct GalleryArgs {
    /// comonotone_bernoulli, unit_vector, remark_equality or quadratic_form.
    pub name: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Coefficient matrix as JSON, e.g. `[[0,1],[0,0]]`.
    #[arg(long)]
    pub coeffs: Option<String>,
    /// Step law as JSON, e.g. `{"atoms":[[-1,0.5],[1,0.5]]}`.
    #[arg(long)]
    pub step: Option<String>,
    /// Also estimate the three sums from this many Monte Carlo samples.
    #[arg(long)]
    pub mc: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Model file (JSON).
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    pub model: Option<PathBuf>,
    /// Number of random trees, with seeds `seed..seed + random`.
    #[arg(long)]
    pub random: Option<u64>,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub branching: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub hi: f64,
    /// Draw values from `[max(lo, 0), hi]`.
    #[arg(long)]
    pub nonnegative: bool,
}

#[derive(Debug, Args)]
pub struct StoppedArgs {
    /// Stopped-sum spec file (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Also estimate the stopped sum from this many Monte Carlo samples.
    #[arg(long)]
    pub mc: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// `E S`.
    #[arg(long, allow_hyphen_values = true)]
    pub mean: Option<f64>,
    /// `Var S'` of the decoupled sum.
    #[arg(long)]
    pub var_decoupled: Option<f64>,
    /// `E S'²` of the decoupled sum.
    #[arg(long)]
    pub m2_decoupled: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match CliConfig::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(report) => {
            if report.all_pass() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("decouple: {e}");
            e.exit_code()
        }
    }
}

/// Runs the command, writes the report and returns it.
pub fn run(cli: &CliConfig) -> Result<ExperimentReport> {
    let format: Format = cli.format.parse()?;
    let opts = options(cli)?;
    let mut report = match &cli.command {
        Command::Gallery(args) => cmd_gallery(args, opts)?,
        Command::Verify(args) => cmd_verify(args, opts)?,
        Command::Stopped(args) => cmd_stopped(args, opts)?,
        Command::Bounds(args) => cmd_bounds(args, opts)?,
    };
    if cli.timestamp {
        report.timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }
    let bytes = report.render(format)?;
    match &cli.out {
        Some(path) => fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(report)
}

fn options(cli: &CliConfig) -> Result<AnalysisOptions> {
    let tol = cli.tol.unwrap_or(bounds::DEFAULT_TOL);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::validation(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let cap = cli.cap.unwrap_or(DEFAULT_CAP);
    if cap == 0 {
        return Err(Error::validation("cap must be positive"));
    }
    Ok(AnalysisOptions { tol, cap })
}

fn read_json(path: &Path) -> Result<(String, Value)> {
    let text = fs::read_to_string(path)?;
    let value = serde_json::from_str(&text)?;
    Ok((text, value))
}

fn mc_config(n: u64, seed: u64) -> Result<EstimatorConfig> {
    let cfg = EstimatorConfig::new(n, seed);
    cfg.validate()?;
    Ok(cfg)
}

/// `E(Σd)²`, `E(Σz)²` and their ratio for the comonotone Bernoulli model.
pub fn comonotone_closed_forms(n: usize, p: f64) -> (f64, f64, f64) {
    let nf = n as f64;
    let d2 = nf * nf * p;
    let z2 = nf * p * (nf * p + 1.0 - p);
    (d2, z2, nf / (nf * p + 1.0 - p))
}

pub fn cmd_gallery(args: &GalleryArgs, opts: AnalysisOptions) -> Result<ExperimentReport> {
    let params = GalleryParams {
        n: args.n,
        p: args.p,
        coeffs: args
            .coeffs
            .as_deref()
            .map(serde_json::from_str)
            .transpose()?,
        step: args
            .step
            .as_deref()
            .map(serde_json::from_str::<DiscreteLaw>)
            .transpose()?,
    };
    let model = GalleryModel::from_name(&args.name, &params)?;
    let tree = gallery(&args.name, &params)?;
    let echo = json!({ "command": "gallery", "name": model.name(), "params": params, "mc": args.mc, "seed": args.seed });
    let mut report = analyze_tree(model.name(), echo, &tree, opts)?;

    if let GalleryModel::ComonotoneBernoulli { n, p } = model {
        let (d2, z2, ratio) = comonotone_closed_forms(n, p);
        report.push_value("closed_form_d_second_moment", d2);
        report.push_value("closed_form_z_second_moment", z2);
        report.push_value("closed_form_ratio", ratio);
        let enumerated = report.values["second_moment_ratio_d_to_z"];
        report.push_residual(
            "ratio_relative_error",
            (enumerated - ratio).abs() / ratio,
            opts.tol,
        );
    }

    if let Some(n) = args.mc {
        let cfg = mc_config(n, args.seed)?;
        let product = complete_decouple_capped(&tree, opts.cap)?;
        let estimates = [
            (
                "d_sum",
                montecarlo::estimate_moments(&PathSampler(&tree), &cfg)?,
            ),
            (
                "z_sum",
                montecarlo::estimate_moments(&ProductSampler(&product), &cfg)?,
            ),
            (
                "e_sum",
                montecarlo::estimate_moments(&DecoupledSampler(&tree), &cfg)?,
            ),
        ];
        for (name, est) in estimates {
            let exact = *report
                .moment(name)
                .expect("exact moments are always reported");
            push_zscores(&mut report, name, &est, &exact)?;
            report.push_moments(format!("{name}_mc"), est);
        }
        report.seeds.push(args.seed);
    }
    Ok(report)
}

fn push_zscores(
    report: &mut ExperimentReport,
    name: &str,
    est: &MomentSummary,
    exact: &MomentSummary,
) -> Result<()> {
    let z = montecarlo::zscore(est, exact)?;
    report.push_value(format!("{name}_mc_mean_z"), z.mean);
    report.push_value(format!("{name}_mc_second_moment_z"), z.second_moment);
    Ok(())
}

pub fn cmd_verify(args: &VerifyArgs, opts: AnalysisOptions) -> Result<ExperimentReport> {
    if let Some(path) = &args.model {
        let (text, echo) = read_json(path)?;
        let tree = ModelDescription::from_json(&text)?.build()?;
        let echo = json!({ "command": "verify", "model": echo });
        return analyze_tree("verify_model", echo, &tree, opts);
    }

    let count = args.random.unwrap_or(0);
    if count == 0 {
        return Err(Error::validation(
            "--random needs a positive number of trees",
        ));
    }
    let mut spec = RandomTreeSpec::new(args.n, args.branching, args.lo, args.hi);
    if args.nonnegative {
        spec = spec.nonnegative();
    }
    let echo = json!({ "command": "verify", "random": count, "spec": spec, "seed": args.seed });
    let mut summary = ExperimentReport::new("verify_random", echo);

    // Keep the tightest bound per inequality and the largest residual per check.
    let mut worst_bounds: Vec<bounds::BoundReport> = Vec::new();
    for seed in args.seed..args.seed + count {
        let tree = random_tree(&spec, seed)?;
        let r = analyze_tree("", Value::Null, &tree, opts)?;
        for b in r.bounds {
            match worst_bounds
                .iter_mut()
                .find(|w| w.inequality_id == b.inequality_id)
            {
                Some(w) if b.slack < w.slack => *w = b,
                Some(_) => {}
                None => worst_bounds.push(b),
            }
        }
        for res in r.residuals {
            match summary.residuals.iter_mut().find(|w| w.name == res.name) {
                Some(w) if res.value.abs() > w.value.abs() => *w = res,
                Some(_) => {}
                None => summary.residuals.push(res),
            }
        }
        summary.seeds.push(seed);
    }
    worst_bounds.sort_by_key(|b| b.inequality_id);
    summary.bounds = worst_bounds;
    summary.push_value("trees", count as f64);
    Ok(summary)
}

pub fn cmd_stopped(args: &StoppedArgs, opts: AnalysisOptions) -> Result<ExperimentReport> {
    let (text, echo) = read_json(&args.spec)?;
    let spec = StoppedSumSpec::from_json(&text)?;
    let echo = json!({ "command": "stopped", "spec": echo, "mc": args.mc, "seed": args.seed });
    let tol = opts.tol;
    let mut report = ExperimentReport::new("stopped_sum", echo);

    let tau = stopped::tau_moments(&spec);
    let bound = stopped::stopped_sum_upper_bound(&spec);
    report.push_value("e_tau", tau.mean);
    report.push_value("e_tau_squared", tau.second_moment);
    report.push_value("decoupled_mean", bound.decoupled.mean);
    report.push_value("decoupled_second_moment", bound.decoupled.second_moment);
    report.push_value("bound_rhs", bound.rhs);
    report.push_value("alternate_closed_form", bound.alternate_closed_form);
    let centered = spec.mu() == 0.0;
    let wald = stopped::wald_second_moment(spec.sigma2(), tau.mean);
    if centered {
        report.push_value("wald_second_moment", wald);
    }

    let enumerable = spec.increment_support().is_some() && spec.stopping_rule().is_some();
    let mut lhs = None;
    if enumerable {
        let exact = stopped::exact_stopped_capped(&spec, opts.cap)?;
        report.push_moments(
            "stopped_sum",
            MomentSummary {
                mean: exact.mean,
                second_moment: exact.second_moment,
                variance: exact.second_moment - exact.mean * exact.mean,
                kind: crate::moments::MomentKind::Exact,
            },
        );
        report.push_value("capped_mass", exact.capped_mass);
        report.push_residual(
            "tail_matches_rule",
            exact.tail_discrepancy(spec.tail()),
            tol,
        );
        if centered {
            report.push_residual("wald_identity", (exact.second_moment - wald).abs(), tol);
        }
        if !spec.stopping_rule().is_some_and(|r| r.is_independent()) {
            match stopped::stopped_tree(&spec).and_then(|t| tangent_decouple_capped(&t, opts.cap)) {
                Ok(space) => {
                    let refined = bounds::refined_upper(&space, tol);
                    report.push_residual("tree_route_rhs", (refined.rhs - bound.rhs).abs(), tol);
                    report.push_residual(
                        "tree_route_lhs",
                        (refined.lhs - exact.second_moment).abs(),
                        tol,
                    );
                }
                Err(Error::CapExceeded { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        lhs = Some(exact.second_moment);
    } else if centered {
        lhs = Some(wald);
    }

    if let Some(n) = args.mc {
        let cfg = mc_config(n, args.seed)?;
        let est = stopped::estimate_stopped(&spec, &cfg)?;
        if let Some(exact) = report.moment("stopped_sum").copied() {
            push_zscores(&mut report, "stopped_sum", &est.moments, &exact)?;
        }
        report.push_value("tail_mc_max_z", est.tail_zscore(spec.tail()));
        report.push_moments("stopped_sum_mc", est.moments);
        report.seeds.push(args.seed);
        if lhs.is_none() {
            lhs = Some(est.moments.second_moment);
        }
    }

    if let Some(lhs) = lhs {
        report.push_bound(bound.report(lhs, tol));
    }
    Ok(report)
}

pub fn cmd_bounds(args: &BoundsArgs, opts: AnalysisOptions) -> Result<ExperimentReport> {
    let echo = json!({
        "command": "bounds",
        "mean": args.mean,
        "var_decoupled": args.var_decoupled,
        "m2_decoupled": args.m2_decoupled,
        "t": args.t,
        "theta": args.theta,
        "tol": opts.tol,
    });
    let mut report = ExperimentReport::new("tail_bounds", echo);
    let mut any = false;
    if let (Some(var), Some(t)) = (args.var_decoupled, args.t) {
        report.push_value(
            InequalityId::Chebyshev.as_str(),
            bounds::chebyshev_bound(var, t)?,
        );
        any = true;
    }
    if let (Some(mean), Some(m2), Some(theta)) = (args.mean, args.m2_decoupled, args.theta) {
        report.push_value(
            InequalityId::PaleyZygmund.as_str(),
            bounds::paley_zygmund_bound(mean, m2, theta)?,
        );
        any = true;
    }
    if !any {
        return Err(Error::validation(
            "give --var-decoupled with --t, or --mean with --m2-decoupled and --theta",
        ));
    }
    Ok(report)
}
