//! Per-iteration diagnostics records and their CSV export.

use std::io::Write;

use crate::error::Result;

/// Diagnostics for one outer iteration k (describing the k -> k+1
/// transition). Optional fields stay empty where a mode does not produce
/// them: error-condition sides exist only in explicit mode, Cauchy
/// quantities only in implicit mode, and baselines fill neither.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Energy at the new iterate; NaN when the prior is implicit.
    pub energy: f64,
    /// ||x_{k+1} - x_k|| / ||x_k|| (absolute when ||x_k|| = 0).
    pub iter_error: f64,
    pub recon_error: Option<f64>,
    /// ||E_k(x_{k+1})||.
    pub err_lhs: Option<f64>,
    /// C_E * ||x_{k+1} - x_k||.
    pub err_rhs: Option<f64>,
    /// ||v_{k+1} - v_k||.
    pub cauchy_lhs: Option<f64>,
    /// (C_N + M_obs * sqrt(1/rho0)) * sqrt(1/rho_k), filled post-run.
    pub cauchy_bound: Option<f64>,
    /// Number of basic units applied at this iteration (T_k + 1 during
    /// learning).
    pub stages_used: Option<usize>,

    // Diagnostics beyond the CSV columns.
    /// ||x_{k+1} - x_k||, absolute.
    pub x_step_norm: f64,
    /// ||lambda_{k+1}||.
    pub lambda_norm: f64,
    /// ||grad of the Moreau-regularized fidelity at u_{k+1}||.
    pub moreau_grad_norm: Option<f64>,
    /// Explicit mode: whether the error condition passed at acceptance.
    /// Stages accepted only because t hit t_max are flagged false
    /// ("unverified") and skipped by the descent monitor.
    pub verified: Option<bool>,
}

impl IterationRecord {
    pub fn empty(k: usize) -> IterationRecord {
        IterationRecord {
            k,
            energy: f64::NAN,
            iter_error: 0.0,
            recon_error: None,
            err_lhs: None,
            err_rhs: None,
            cauchy_lhs: None,
            cauchy_bound: None,
            stages_used: None,
            x_step_norm: 0.0,
            lambda_norm: 0.0,
            moreau_grad_norm: None,
            verified: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Epsilon,
    KMax,
}

/// Full run history: one record per outer iteration plus the stopping
/// report and a key=value header echoing the configuration (kept out of
/// the CSV, whose column set is fixed).
#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
    pub terminated_by: StopReason,
    /// K: the iteration at which the stopping test fired.
    pub final_k: usize,
    /// Energy at the initial iterate (NaN when not evaluable).
    pub initial_energy: f64,
    pub header: Vec<(String, String)>,
}

pub const CSV_HEADER: &str =
    "k,energy,iter_error,recon_error,err_lhs,err_rhs,cauchy_lhs,cauchy_bound,stages_used";

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        // 17 significant digits: exact f64 round-trip
        format!("{v:.16e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl Trace {
    /// Writes the pinned CSV format: header row then one row per
    /// iteration, floats at 17 significant digits, empty cells for
    /// absent optionals.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.k,
                fmt_f64(r.energy),
                fmt_f64(r.iter_error),
                fmt_opt(r.recon_error),
                fmt_opt(r.err_lhs),
                fmt_opt(r.err_rhs),
                fmt_opt(r.cauchy_lhs),
                fmt_opt(r.cauchy_bound),
                r.stages_used.map(|s| s.to_string()).unwrap_or_default(),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("vec write");
        String::from_utf8(buf).expect("csv is utf8")
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}
