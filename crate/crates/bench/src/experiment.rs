//! Experiment orchestration: one synthesized instance shared by every
//! requested solver, per-solver trace CSVs and reconstruction images,
//! and a JSON report.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use padnet_core::baselines::{admm_solve, hqs_solve};
use padnet_core::solver::{padnet_infer, padnet_learn, SolverMode, SolverState, Trace};
use padnet_core::tensor::{pgm, psnr, rel_error, Grid};
use padnet_core::unroll::train::{TrainingPair, UnitPrototype};
use padnet_core::unroll::BuiltInNetwork;

use crate::config::{config_echo, BenchConfig};
use crate::problems::{make_problem, DomainKind, ProblemInstance};
use crate::report::{ExperimentReport, SolverOutcome};
use crate::BenchError;

/// Offset applied to the problem seed to synthesize the training
/// instance the padnet solvers learn on before inferring on the shared
/// evaluation instance.
pub const TRAIN_SEED_OFFSET: i64 = 9001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Admm,
    Hqs,
    Epadnet,
    Ipadnet,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Admm,
        SolverKind::Hqs,
        SolverKind::Epadnet,
        SolverKind::Ipadnet,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Admm => "admm",
            SolverKind::Hqs => "hqs",
            SolverKind::Epadnet => "epadnet",
            SolverKind::Ipadnet => "ipadnet",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "admm" => Ok(SolverKind::Admm),
            "hqs" => Ok(SolverKind::Hqs),
            "epadnet" => Ok(SolverKind::Epadnet),
            "ipadnet" => Ok(SolverKind::Ipadnet),
            other => Err(format!(
                "unknown solver {other:?}; expected admm, hqs, epadnet or ipadnet"
            )),
        }
    }
}

pub fn parse_solver_list(s: &str) -> Result<Vec<SolverKind>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(SolverKind::from_str)
        .collect()
}

/// Learns per-iteration networks on the training instance derived from
/// the configuration seed, then infers on the evaluation instance.
pub fn train_and_infer(
    cfg: &BenchConfig,
    eval: &ProblemInstance,
    mode: SolverMode,
) -> Result<(Grid, Trace), padnet_core::Error> {
    let train_spec = cfg
        .problem
        .with_seed(cfg.problem.seed.wrapping_add(TRAIN_SEED_OFFSET));
    let train_inst = make_problem(&train_spec)?;
    let train_model = match mode {
        SolverMode::Explicit => train_inst.model.clone(),
        SolverMode::Implicit => train_inst.implicit_model(),
    };
    let pairs = vec![TrainingPair::new(
        train_inst.solve_observation.clone(),
        train_inst.solve_truth.clone(),
    )?];
    let mut scfg = cfg.padnet;
    scfg.mode = mode;
    let proto = UnitPrototype::conv_rbf_default();
    let (nets, _learn_trace) = padnet_learn(&train_model, &pairs, &proto, &scfg, &cfg.train)?;

    let eval_model = match mode {
        SolverMode::Explicit => eval.model.clone(),
        SolverMode::Implicit => eval.implicit_model(),
    };
    let init = SolverState::init(eval.solve_observation.clone(), &scfg);
    padnet_infer(&eval_model, &nets, &scfg, init, Some(&eval.solve_truth))
}

fn run_one(
    cfg: &BenchConfig,
    inst: &ProblemInstance,
    kind: SolverKind,
) -> Result<(Grid, Trace), padnet_core::Error> {
    let scfg_for_init = {
        let mut c = cfg.padnet;
        c.mode = SolverMode::Explicit;
        c
    };
    match kind {
        SolverKind::Admm => {
            let init = SolverState::init(inst.solve_observation.clone(), &scfg_for_init);
            admm_solve(&inst.model, &cfg.baseline, init, Some(&inst.solve_truth))
        }
        SolverKind::Hqs => {
            let init = SolverState::init(inst.solve_observation.clone(), &scfg_for_init);
            hqs_solve(&inst.model, &cfg.baseline, init, Some(&inst.solve_truth))
        }
        SolverKind::Epadnet => train_and_infer(cfg, inst, SolverMode::Explicit),
        SolverKind::Ipadnet => train_and_infer(cfg, inst, SolverMode::Implicit),
    }
}

/// Rescales a gradient channel from [-1,1] to [0,1] for PGM output.
fn gradient_to_unit(g: &Grid) -> Grid {
    g.map(|v| 0.5 * (v + 1.0))
}

fn solver_metrics(
    inst: &ProblemInstance,
    final_grid: &Grid,
) -> Result<(f64, f64, Grid), padnet_core::Error> {
    let recon = rel_error(final_grid, &inst.solve_truth)?;
    match inst.domain {
        DomainKind::Gradient => {
            let p = psnr(final_grid, &inst.solve_truth, 1.0)?;
            Ok((recon, p, gradient_to_unit(final_grid)))
        }
        DomainKind::Image => {
            let recovered = inst.recover_image(final_grid)?;
            let p = psnr(&recovered, &inst.image_truth, 1.0)?;
            Ok((recon, p, recovered))
        }
    }
}

/// Everything a `run` produces: the written report plus the in-memory
/// traces keyed by solver name (for monitor replay without re-running).
pub struct RunOutputs {
    pub report: ExperimentReport,
    pub traces: BTreeMap<String, Trace>,
}

/// Runs every requested solver on one shared instance, writing a trace
/// CSV and a reconstruction PGM per solver plus ground-truth/observation
/// PGMs and the report JSON. A diverging solver is recorded in the
/// report without aborting the others.
pub fn run_experiment(
    cfg: &BenchConfig,
    solvers: &[SolverKind],
    out_dir: &Path,
) -> Result<RunOutputs, BenchError> {
    std::fs::create_dir_all(out_dir)?;
    let inst = make_problem(&cfg.problem)?;
    pgm::write_pgm_path(&inst.image_truth, out_dir.join("ground_truth.pgm"))?;
    pgm::write_pgm_path(&inst.image_observation, out_dir.join("observation.pgm"))?;

    let mut outcomes: BTreeMap<String, SolverOutcome> = BTreeMap::new();
    let mut traces: BTreeMap<String, Trace> = BTreeMap::new();
    for kind in solvers {
        let name = kind.name();
        let t0 = Instant::now();
        let outcome = match run_one(cfg, &inst, *kind) {
            Ok((final_grid, trace)) => {
                let wall_time_ms = t0.elapsed().as_millis() as u64;
                let trace_name = format!("trace_{name}.csv");
                let mut file = std::fs::File::create(out_dir.join(&trace_name))?;
                trace.write_csv(&mut file)?;
                let (recon, psnr_db, recon_img) = solver_metrics(&inst, &final_grid)?;
                pgm::write_pgm_path(&recon_img, out_dir.join(format!("recon_{name}.pgm")))?;
                let outcome = SolverOutcome {
                    k: trace.final_k,
                    final_recon_error: recon,
                    final_psnr: psnr_db,
                    wall_time_ms,
                    trace_path: trace_name,
                    error: None,
                };
                traces.insert(name.to_string(), trace);
                outcome
            }
            Err(e) => SolverOutcome {
                k: 0,
                final_recon_error: 0.0,
                final_psnr: 0.0,
                wall_time_ms: t0.elapsed().as_millis() as u64,
                trace_path: String::new(),
                error: Some(e.to_string()),
            },
        };
        outcomes.insert(name.to_string(), outcome);
    }

    let report = ExperimentReport {
        config: config_echo(cfg).into_iter().collect(),
        solvers: outcomes,
    };
    report.write(out_dir.join("report.json"))?;
    Ok(RunOutputs { report, traces })
}

/// Output paths of a `train` run: one network container per outer
/// iteration plus the learning trace.
pub struct TrainOutputs {
    pub net_paths: Vec<PathBuf>,
    pub trace_path: PathBuf,
}

/// Runs the learning loop on the configured instance and writes the
/// per-iteration network containers and the learning trace.
pub fn run_training(cfg: &BenchConfig, out_dir: &Path) -> Result<TrainOutputs, BenchError> {
    std::fs::create_dir_all(out_dir)?;
    let inst = make_problem(&cfg.problem)?;
    let model = match cfg.padnet.mode {
        SolverMode::Explicit => inst.model.clone(),
        SolverMode::Implicit => inst.implicit_model(),
    };
    let pairs = vec![TrainingPair::new(
        inst.solve_observation.clone(),
        inst.solve_truth.clone(),
    )?];
    let proto = UnitPrototype::conv_rbf_default();
    let (nets, trace) = padnet_learn(&model, &pairs, &proto, &cfg.padnet, &cfg.train)?;

    let mut net_paths = Vec::new();
    for (k, net) in nets.iter().enumerate() {
        let path = out_dir.join(format!("stage_{k:03}.padn"));
        let file = std::fs::File::create(&path)?;
        padnet_core::unroll::write_network(net, file)?;
        net_paths.push(path);
    }
    let trace_path = out_dir.join("learn_trace.csv");
    let file = std::fs::File::create(&trace_path)?;
    trace.write_csv(file)?;
    Ok(TrainOutputs {
        net_paths,
        trace_path,
    })
}

/// Round-trips every written network container, confirming bit-exact
/// serialization; used by the CLI after training.
pub fn verify_containers(paths: &[PathBuf]) -> Result<(), BenchError> {
    for path in paths {
        let bytes = std::fs::read(path)?;
        let net: BuiltInNetwork = padnet_core::unroll::read_network(&bytes[..])?;
        let mut again = Vec::new();
        padnet_core::unroll::write_network(&net, &mut again)?;
        if again != bytes {
            return Err(BenchError::Core(padnet_core::Error::Container(format!(
                "container round-trip mismatch for {}",
                path.display()
            ))));
        }
    }
    Ok(())
}
