use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use padnet_bench::config::{parse_config, serialize_config, BenchConfig};
use padnet_bench::experiment::{
    parse_solver_list, run_experiment, run_training, verify_containers, SolverKind,
};
use padnet_bench::problems::{make_problem, DomainKind};
use padnet_bench::report::ExperimentReport;
use padnet_bench::BenchError;
use padnet_core::energy::prox::{oracle_prox_grid, prox_objective};
use padnet_core::energy::{prox_l0, prox_l1, prox_lp_gst};
use padnet_core::solver::{verify_cauchy_bounds, verify_descent, SolverMode};
use padnet_core::tensor::pgm;

/// Desk-scale deconvolution benchmark driver for the padnet solvers and
/// their ADMM/HQS baselines.
#[derive(Parser)]
#[command(name = "padnet-bench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (key = value sections); defaults apply when
    /// omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the problem seed from the config.
    #[arg(long)]
    seed: Option<i64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a problem instance and write its images.
    Gen(ConfigArgs),
    /// Run solvers on one shared instance and write traces + report.
    Run {
        #[command(flatten)]
        common: ConfigArgs,
        /// Comma-separated subset of admm,hqs,epadnet,ipadnet.
        #[arg(long, default_value = "admm,hqs,epadnet,ipadnet")]
        solvers: String,
    },
    /// Run the learning loop and emit per-iteration network containers.
    Train(ConfigArgs),
    /// Print a comparison table from report JSON files.
    Compare {
        /// Paths to report.json files.
        reports: Vec<PathBuf>,
    },
    /// Tabulate proximal operators against the brute-force oracle.
    ProxTable {
        /// Regularization weight.
        #[arg(long, default_value_t = 0.5)]
        weight: f64,
        /// Number of sample points per exponent.
        #[arg(long, default_value_t = 9)]
        points: usize,
    },
}

fn load_config(args: &ConfigArgs) -> Result<BenchConfig, BenchError> {
    let mut cfg = match &args.config {
        Some(path) => parse_config(path)?,
        None => BenchConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.problem.seed = seed;
    }
    Ok(cfg)
}

fn cmd_gen(args: &ConfigArgs) -> Result<(), BenchError> {
    let cfg = load_config(args)?;
    std::fs::create_dir_all(&args.out)?;
    let inst = make_problem(&cfg.problem)?;
    pgm::write_pgm_path(&inst.image_truth, args.out.join("ground_truth.pgm"))?;
    pgm::write_pgm_path(&inst.image_observation, args.out.join("observation.pgm"))?;
    let to_unit = |g: &padnet_core::tensor::Grid| g.map(|v| 0.5 * (v + 1.0));
    pgm::write_pgm_path(&to_unit(&inst.solve_truth), args.out.join("gradient_truth.pgm"))?;
    pgm::write_pgm_path(
        &to_unit(&inst.solve_observation),
        args.out.join("gradient_observation.pgm"),
    )?;
    std::fs::write(args.out.join("problem.cfg"), serialize_config(&cfg))?;
    println!(
        "generated {}x{} {} instance (seed {}) into {}",
        cfg.problem.rows,
        cfg.problem.cols,
        match cfg.problem.domain {
            DomainKind::Gradient => "gradient-domain",
            DomainKind::Image => "image-domain",
        },
        cfg.problem.seed,
        args.out.display()
    );
    Ok(())
}

fn cmd_run(common: &ConfigArgs, solvers: &str) -> Result<(), BenchError> {
    let cfg = load_config(common)?;
    let kinds: Vec<SolverKind> = parse_solver_list(solvers).map_err(|msg| {
        BenchError::Config(padnet_bench::ConfigError::Constraint { rule: msg })
    })?;
    let outputs = run_experiment(&cfg, &kinds, &common.out)?;
    print!("{}", outputs.report.comparison_table());

    // replay the theorem monitors over the padnet traces
    if let Some(trace) = outputs.traces.get(SolverKind::Epadnet.name()) {
        let rep = verify_descent(trace, cfg.padnet.mu, cfg.padnet.c_e);
        println!(
            "epadnet descent monitor: pass={} checked={} skipped={} margin={:.3}",
            rep.pass, rep.checked, rep.skipped, rep.margin
        );
    }
    if let Some(trace) = outputs.traces.get(SolverKind::Ipadnet.name()) {
        let mut scfg = cfg.padnet;
        scfg.mode = SolverMode::Implicit;
        let rep = verify_cauchy_bounds(trace, &scfg);
        println!(
            "ipadnet cauchy monitor: pass={} M_obs={:.3} dual_pass={}",
            rep.pass, rep.m_observed, rep.dual_pass
        );
    }
    println!("report: {}", common.out.join("report.json").display());
    Ok(())
}

fn cmd_train(args: &ConfigArgs) -> Result<(), BenchError> {
    let cfg = load_config(args)?;
    let outputs = run_training(&cfg, &args.out)?;
    verify_containers(&outputs.net_paths)?;
    println!(
        "trained {} stage network(s); trace: {}",
        outputs.net_paths.len(),
        outputs.trace_path.display()
    );
    Ok(())
}

fn cmd_compare(reports: &[PathBuf]) -> Result<(), BenchError> {
    if reports.is_empty() {
        return Err(BenchError::Config(padnet_bench::ConfigError::Constraint {
            rule: "compare needs at least one report path".into(),
        }));
    }
    for path in reports {
        let report = ExperimentReport::read(path)?;
        println!("== {} ==", path.display());
        print!("{}", report.comparison_table());
    }
    Ok(())
}

fn cmd_prox_table(weight: f64, points: usize) -> Result<(), BenchError> {
    if !(weight > 0.0) || points < 2 {
        return Err(BenchError::Config(padnet_bench::ConfigError::Constraint {
            rule: "prox-table needs weight > 0 and points >= 2".into(),
        }));
    }
    println!(
        "{:>8} {:>5} {:>6} {:>12} {:>12} {:>12}",
        "y", "p", "w", "prox", "oracle", "obj_gap"
    );
    for &p in &[0.0, 0.5, 0.8, 1.0] {
        for i in 0..points {
            let y = -3.0 + 6.0 * (i as f64) / (points as f64 - 1.0);
            let x = match p {
                0.0 => prox_l0(y, weight),
                1.0 => prox_l1(y, weight),
                _ => prox_lp_gst(y, weight, p).value,
            };
            let o = oracle_prox_grid(y, weight, p);
            let gap = prox_objective(x, y, weight, p) - prox_objective(o, y, weight, p);
            println!(
                "{y:>8.3} {p:>5.2} {weight:>6.3} {x:>12.6} {o:>12.6} {gap:>12.3e}"
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run { common, solvers } => cmd_run(common, solvers),
        Command::Train(args) => cmd_train(args),
        Command::Compare { reports } => cmd_compare(reports),
        Command::ProxTable { weight, points } => cmd_prox_table(*weight, *points),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
