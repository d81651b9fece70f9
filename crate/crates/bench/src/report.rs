//! Experiment reports: per-solver outcomes serialized as JSON with
//! stable (sorted) key order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolverOutcome {
    /// Iteration K at which the stopping test fired.
    pub k: usize,
    pub final_recon_error: f64,
    pub final_psnr: f64,
    pub wall_time_ms: u64,
    /// Trace CSV file name, relative to the report's directory; empty
    /// when the solver failed before producing a trace.
    pub trace_path: String,
    /// Divergence or setup error; a failed solver does not abort the
    /// others.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentReport {
    /// Echo of the configuration the experiment ran under.
    pub config: BTreeMap<String, String>,
    pub solvers: BTreeMap<String, SolverOutcome>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }

    pub fn read(path: impl AsRef<Path>) -> std::io::Result<ExperimentReport> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad report: {e}"))
        })
    }

    /// Fixed-width text table in the style of a convergence-results
    /// comparison: one row per solver.
    pub fn comparison_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{:<10} {:>6} {:>14} {:>10} {:>10}\n",
            "solver", "K", "recon_error", "psnr_db", "time_ms"
        ));
        for (name, o) in &self.solvers {
            if let Some(err) = &o.error {
                s.push_str(&format!("{name:<10} failed: {err}\n"));
            } else {
                s.push_str(&format!(
                    "{:<10} {:>6} {:>14.4} {:>10.2} {:>10}\n",
                    name, o.k, o.final_recon_error, o.final_psnr, o.wall_time_ms
                ));
            }
        }
        s
    }
}
