use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use medax::bounds::{constants_from_banach, BoundInput, BoundReport};
use medax::harness::report::{write_demo, write_oracle, write_run, write_scaling, write_sweep};
use medax::harness::run::{
    run_demo_unbounded, run_oracle_compare, run_scaling, run_sweep, run_verify,
};
use medax::harness::{exit, ExperimentConfig, HarnessError, Mode};

#[derive(Parser)]
#[command(name = "medax", version, about = "Medial axis stability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Matched medial samples of S and F(S) checked against the bounds.
    Verify(RunArgs),
    /// Verification over a grid of perturbation sizes with a log-log fit.
    Sweep(RunArgs),
    /// Verification of rescaled copies of one experiment.
    Scaling(RunArgs),
    /// Shooting clouds against brute-force grid oracles.
    OracleCompare(RunArgs),
    /// Growth of the axis displacement without a bounding circle.
    DemoUnbounded(RunArgs),
    /// Evaluates the bounds for explicit constants and prints JSON.
    Bounds(BoundArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config. Optional for demo-unbounded.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write figure.svg.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    r: f64,
    /// Derive every constant from this single norm instead.
    #[arg(long, conflicts_with_all = ["l_f", "l_df", "eps1", "eps2"])]
    banach: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    l_f: f64,
    #[arg(long, default_value_t = 0.0)]
    l_df: f64,
    #[arg(long, default_value_t = 0.0)]
    eps1: f64,
    #[arg(long, default_value_t = 0.0)]
    eps2: f64,
}

fn load(args: &RunArgs, mode: Mode) -> Result<ExperimentConfig, HarnessError> {
    let path = args
        .config
        .as_deref()
        .ok_or_else(|| HarnessError::Input("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.mode = mode;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out
        .clone()
        .unwrap_or_else(|| Path::new("out").to_path_buf())
}

fn verdict_code(pass: bool) -> i32 {
    if pass {
        exit::PASS
    } else {
        exit::FAIL
    }
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::Verify(args) => {
            let cfg = load(&args, Mode::Verify)?;
            let rec = run_verify(&cfg)?;
            let shape = cfg.build_shape()?;
            write_run(&out_dir(&cfg), &rec, Some(&shape), args.svg)?;
            println!(
                "verify {:?}: d_H = {:.6e}, bound = {:.6e} + slack {:.6e}, pairs = {} (dropped {})",
                rec.verdict,
                rec.measured_dh,
                rec.bound.hausdorff_bound,
                rec.sampling_slack,
                rec.checks.n_pairs,
                rec.checks.n_dropped
            );
            Ok(verdict_code(rec.verdict.passed()))
        }
        Command::Sweep(args) => {
            let cfg = load(&args, Mode::Sweep)?;
            let rep = run_sweep(&cfg)?;
            let shape = cfg.build_shape()?;
            write_sweep(&out_dir(&cfg), &rep, Some(&shape), args.svg)?;
            match rep.loglog {
                Some(f) => println!(
                    "sweep {:?}: slope = {:.4} ± {:.4}, R² = {:.4}, max d_H/eps = {:.4}",
                    rep.verdict,
                    f.slope,
                    2.0 * f.slope_se,
                    f.r_squared,
                    rep.max_dh_over_eps
                ),
                None => println!("sweep {:?}: no positive d_H to fit", rep.verdict),
            }
            Ok(verdict_code(rep.verdict.passed()))
        }
        Command::Scaling(args) => {
            let cfg = load(&args, Mode::Scaling)?;
            let rep = run_scaling(&cfg)?;
            write_scaling(&out_dir(&cfg), &rep)?;
            for e in &rep.entries {
                println!(
                    "scale {:.3}: leading ratio {:.12}, d_H ratio {:.6}",
                    e.factor, e.leading_ratio, e.dh_ratio
                );
            }
            println!("scaling {:?}", rep.verdict);
            Ok(verdict_code(rep.verdict.passed()))
        }
        Command::OracleCompare(args) => {
            let cfg = load(&args, Mode::OracleCompare)?;
            let rep = run_oracle_compare(&cfg)?;
            let shape = cfg.build_shape()?;
            write_oracle(&out_dir(&cfg), &rep, Some(&shape), args.svg)?;
            println!(
                "oracle-compare {:?}: d_H(S) = {:.6e}, d_H(F(S)) = {}, threshold {:.6e}",
                rep.verdict,
                rep.dh_shape,
                rep.dh_image.map_or("n/a".into(), |d| format!("{d:.6e}")),
                rep.threshold
            );
            Ok(verdict_code(rep.verdict.passed()))
        }
        Command::DemoUnbounded(args) => {
            let (spec, out) = match &args.config {
                Some(_) => {
                    let cfg = load(&args, Mode::DemoUnbounded)?;
                    (cfg.demo.clone().unwrap_or_default(), out_dir(&cfg))
                }
                None => (
                    Default::default(),
                    args.out.clone().unwrap_or_else(|| "out".into()),
                ),
            };
            let rep = run_demo_unbounded(&spec)?;
            write_demo(&out, &rep)?;
            for (w, d) in rep.windows.iter().zip(&rep.directed_dh) {
                println!("window {w:.3}: directed d_H = {d:.6e}");
            }
            println!("demo-unbounded {:?}", rep.verdict);
            Ok(verdict_code(rep.verdict.passed()))
        }
        Command::Bounds(b) => {
            let input = match b.banach {
                Some(eps) => constants_from_banach(b.r, eps, eps),
                None => BoundInput {
                    r: b.r,
                    rho: b.r,
                    l_f: b.l_f,
                    l_df: b.l_df,
                    eps1: b.eps1,
                    eps2: b.eps2,
                    eps_banach: b.l_df,
                },
            };
            let input = BoundInput {
                rho: b.rho.unwrap_or(input.rho),
                ..input
            };
            let report = BoundReport::evaluate(&input)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| HarnessError::Input(e.to_string()))?;
            println!("{text}");
            Ok(exit::PASS)
        }
    }
}

fn main() -> ExitCode {
    // clap's own usage-error code collides with the out-of-regime code
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::INPUT as u8 } else { 0 });
        }
    };
    let code = run(cli).unwrap_or_else(|e| {
        eprintln!("medax: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
