//! Flat key = value configuration files with [problem], [padnet],
//! [baseline] and [train] sections, '#' comments, hard errors on unknown
//! keys and documented defaults for missing ones.

use std::fmt;
use std::path::Path;

use padnet_core::solver::{SolverConfig, SolverMode};
use padnet_core::unroll::train::TrainConfig;
use padnet_core::baselines::BaselineConfig;

use crate::problems::{DomainKind, KernelKind, ProblemSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key {key:?} in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("constraint violated: {rule}")]
    Constraint { rule: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub problem: ProblemSpec,
    pub padnet: SolverConfig,
    pub baseline: BaselineConfig,
    pub train: TrainConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            problem: ProblemSpec::default(),
            padnet: SolverConfig::with_mode(SolverMode::Explicit),
            baseline: BaselineConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>().map_err(|e| ConfigError::Syntax {
        line,
        msg: format!("invalid value {raw:?} for {key}: {e}"),
    })
}

fn parse_size(line: usize, raw: &str) -> Result<(usize, usize), ConfigError> {
    let parts: Vec<&str> = raw.split('x').collect();
    if parts.len() != 2 {
        return Err(ConfigError::Syntax {
            line,
            msg: format!("size must look like 64x64, got {raw:?}"),
        });
    }
    Ok((
        parse_num(line, "size", parts[0].trim())?,
        parse_num(line, "size", parts[1].trim())?,
    ))
}

fn parse_kernel_kind(line: usize, raw: &str) -> Result<KernelKind, ConfigError> {
    let raw = raw.trim();
    if raw == "identity" {
        return Ok(KernelKind::Identity);
    }
    let bad = || ConfigError::Syntax {
        line,
        msg: format!(
            "kernel_kind must be identity, gaussian(sigma) or motion(length,angle), got {raw:?}"
        ),
    };
    let (name, args) = raw.split_once('(').ok_or_else(bad)?;
    let args = args.strip_suffix(')').ok_or_else(bad)?;
    match name.trim() {
        "gaussian" => Ok(KernelKind::Gaussian {
            sigma: parse_num(line, "kernel_kind", args.trim())?,
        }),
        "motion" => {
            let parts: Vec<&str> = args.split(',').collect();
            if parts.len() != 2 {
                return Err(bad());
            }
            Ok(KernelKind::Motion {
                length: parse_num(line, "kernel_kind", parts[0].trim())?,
                angle_deg: parse_num(line, "kernel_kind", parts[1].trim())?,
            })
        }
        _ => Err(bad()),
    }
}

/// Parses configuration text; missing keys keep their defaults, unknown
/// keys and sections are hard errors, and constraint violations surface
/// the violated rule.
pub fn parse_config_str(text: &str) -> Result<BenchConfig, ConfigError> {
    let mut cfg = BenchConfig::default();
    let mut section = String::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw_line.split_once('#') {
            Some((before, _)) => before,
            None => raw_line,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: "unterminated section header".into(),
            })?;
            match name {
                "problem" | "padnet" | "baseline" | "train" => section = name.to_string(),
                other => {
                    return Err(ConfigError::UnknownSection {
                        line,
                        section: other.to_string(),
                    })
                }
            }
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("expected key = value, got {content:?}"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if section.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("key {key:?} appears before any section header"),
            });
        }
        match (section.as_str(), key) {
            ("problem", "domain") => {
                cfg.problem.domain = match value {
                    "gradient" => DomainKind::Gradient,
                    "image" => DomainKind::Image,
                    other => {
                        return Err(ConfigError::Syntax {
                            line,
                            msg: format!("domain must be gradient or image, got {other:?}"),
                        })
                    }
                }
            }
            ("problem", "size") => {
                let (r, c) = parse_size(line, value)?;
                cfg.problem.rows = r;
                cfg.problem.cols = c;
            }
            ("problem", "kernel_kind") => cfg.problem.kernel_kind = parse_kernel_kind(line, value)?,
            ("problem", "noise_sigma") => cfg.problem.noise_sigma = parse_num(line, key, value)?,
            ("problem", "reg_weight") => cfg.problem.reg_weight = parse_num(line, key, value)?,
            ("problem", "p") => cfg.problem.p = parse_num(line, key, value)?,
            ("problem", "seed") => cfg.problem.seed = parse_num(line, key, value)?,
            ("problem", "beta") => cfg.problem.beta = parse_num(line, key, value)?,
            ("padnet", "rho0") => cfg.padnet.rho0 = parse_num(line, key, value)?,
            ("padnet", "gamma") => cfg.padnet.gamma = parse_num(line, key, value)?,
            ("padnet", "c_e") => cfg.padnet.c_e = parse_num(line, key, value)?,
            ("padnet", "mu") => cfg.padnet.mu = parse_num(line, key, value)?,
            ("padnet", "c_n") => cfg.padnet.c_n = parse_num(line, key, value)?,
            ("padnet", "epsilon") => cfg.padnet.epsilon = parse_num(line, key, value)?,
            ("padnet", "k_max") => cfg.padnet.k_max = parse_num(line, key, value)?,
            ("padnet", "t_max") => cfg.padnet.t_max = parse_num(line, key, value)?,
            ("padnet", "mode") => {
                cfg.padnet.mode = match value {
                    "explicit" => SolverMode::Explicit,
                    "implicit" => SolverMode::Implicit,
                    other => {
                        return Err(ConfigError::Syntax {
                            line,
                            msg: format!("mode must be explicit or implicit, got {other:?}"),
                        })
                    }
                }
            }
            ("baseline", "rho0") => cfg.baseline.rho0 = parse_num(line, key, value)?,
            ("baseline", "gamma") => cfg.baseline.gamma = parse_num(line, key, value)?,
            ("baseline", "epsilon") => cfg.baseline.epsilon = parse_num(line, key, value)?,
            ("baseline", "k_max") => cfg.baseline.k_max = parse_num(line, key, value)?,
            ("train", "learning_rate") => cfg.train.learning_rate = parse_num(line, key, value)?,
            ("train", "epochs") => cfg.train.epochs = parse_num(line, key, value)?,
            ("train", "batch") => cfg.train.batch = parse_num(line, key, value)?,
            ("train", "seed") => cfg.train.seed = parse_num(line, key, value)?,
            (sec, k) => {
                return Err(ConfigError::UnknownKey {
                    line,
                    section: sec.to_string(),
                    key: k.to_string(),
                })
            }
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &BenchConfig) -> Result<(), ConfigError> {
    let rule = |e: padnet_core::Error| ConfigError::Constraint {
        rule: e.to_string(),
    };
    cfg.problem.validate().map_err(rule)?;
    cfg.padnet.validate().map_err(rule)?;
    cfg.baseline.validate().map_err(rule)?;
    cfg.train.validate().map_err(rule)?;
    Ok(())
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<BenchConfig, ConfigError> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

fn fmt_kernel_kind(k: &KernelKind) -> String {
    match k {
        KernelKind::Gaussian { sigma } => format!("gaussian({sigma})"),
        KernelKind::Motion { length, angle_deg } => format!("motion({length},{angle_deg})"),
        KernelKind::Identity => "identity".into(),
    }
}

/// Inverse of [`parse_config_str`] for the supported grammar; parsing the
/// output reproduces the configuration exactly.
pub fn serialize_config(cfg: &BenchConfig) -> String {
    let mut s = String::new();
    s.push_str("[problem]\n");
    s.push_str(&format!(
        "domain = {}\n",
        match cfg.problem.domain {
            DomainKind::Gradient => "gradient",
            DomainKind::Image => "image",
        }
    ));
    s.push_str(&format!("size = {}x{}\n", cfg.problem.rows, cfg.problem.cols));
    s.push_str(&format!(
        "kernel_kind = {}\n",
        fmt_kernel_kind(&cfg.problem.kernel_kind)
    ));
    s.push_str(&format!("noise_sigma = {}\n", cfg.problem.noise_sigma));
    s.push_str(&format!("reg_weight = {}\n", cfg.problem.reg_weight));
    s.push_str(&format!("p = {}\n", cfg.problem.p));
    s.push_str(&format!("seed = {}\n", cfg.problem.seed));
    s.push_str(&format!("beta = {}\n", cfg.problem.beta));
    s.push_str("\n[padnet]\n");
    s.push_str(&format!("rho0 = {}\n", cfg.padnet.rho0));
    s.push_str(&format!("gamma = {}\n", cfg.padnet.gamma));
    s.push_str(&format!("c_e = {}\n", cfg.padnet.c_e));
    s.push_str(&format!("mu = {}\n", cfg.padnet.mu));
    s.push_str(&format!("c_n = {}\n", cfg.padnet.c_n));
    s.push_str(&format!("epsilon = {}\n", cfg.padnet.epsilon));
    s.push_str(&format!("k_max = {}\n", cfg.padnet.k_max));
    s.push_str(&format!("t_max = {}\n", cfg.padnet.t_max));
    s.push_str(&format!(
        "mode = {}\n",
        match cfg.padnet.mode {
            SolverMode::Explicit => "explicit",
            SolverMode::Implicit => "implicit",
        }
    ));
    s.push_str("\n[baseline]\n");
    s.push_str(&format!("rho0 = {}\n", cfg.baseline.rho0));
    s.push_str(&format!("gamma = {}\n", cfg.baseline.gamma));
    s.push_str(&format!("epsilon = {}\n", cfg.baseline.epsilon));
    s.push_str(&format!("k_max = {}\n", cfg.baseline.k_max));
    s.push_str("\n[train]\n");
    s.push_str(&format!("learning_rate = {}\n", cfg.train.learning_rate));
    s.push_str(&format!("epochs = {}\n", cfg.train.epochs));
    s.push_str(&format!("batch = {}\n", cfg.train.batch));
    s.push_str(&format!("seed = {}\n", cfg.train.seed));
    s
}

/// Key=value echo of the configuration for report headers.
pub fn config_echo(cfg: &BenchConfig) -> Vec<(String, String)> {
    serialize_config(cfg)
        .lines()
        .filter_map(|l| {
            let l = l.trim();
            if l.is_empty() {
                return None;
            }
            if let Some(section) = l.strip_prefix('[') {
                return Some(("section".into(), section.trim_end_matches(']').to_string()));
            }
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}
