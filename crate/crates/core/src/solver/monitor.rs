//! Runtime convergence monitors replayed over traces: the
//! monotone-descent inequality for explicit runs and the Cauchy /
//! dual-norm bounds for implicit runs.

use super::trace::Trace;
use super::{cauchy_bound, descent_margin, schedule, SolverConfig};

/// Outcome of the monotone-descent replay. Iterations whose error
/// condition did not pass are skipped rather than failed, matching the
/// run acceptance semantics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentReport {
    pub pass: bool,
    pub checked: usize,
    pub skipped: usize,
    pub first_violation: Option<usize>,
    /// Most negative slack of
    /// F(x_k) - F(x_{k+1}) - margin*||x_{k+1} - x_k||^2 + 1e-9*|F(x_k)|.
    pub worst_slack: f64,
    pub margin: f64,
}

/// Replays F(x_k) - F(x_{k+1}) >= (mu/4 - C_E^2/mu) ||x_{k+1} - x_k||^2
/// - 1e-9 |F(x_k)| over every condition-verified iteration of an
/// explicit-mode trace.
pub fn verify_descent(trace: &Trace, mu: f64, c_e: f64) -> DescentReport {
    let margin = descent_margin(mu, c_e);
    let mut pass = true;
    let mut checked = 0;
    let mut skipped = 0;
    let mut first_violation = None;
    let mut worst_slack = f64::INFINITY;
    let mut prev_energy = trace.initial_energy;
    for rec in &trace.records {
        let verified = rec.verified.unwrap_or(false);
        if !verified || prev_energy.is_nan() || rec.energy.is_nan() {
            skipped += 1;
            prev_energy = rec.energy;
            continue;
        }
        let decrease = prev_energy - rec.energy;
        let required = margin * rec.x_step_norm * rec.x_step_norm;
        let slack = decrease - required + 1e-9 * prev_energy.abs();
        worst_slack = worst_slack.min(slack);
        if slack < 0.0 {
            pass = false;
            if first_violation.is_none() {
                first_violation = Some(rec.k);
            }
        }
        checked += 1;
        prev_energy = rec.energy;
    }
    DescentReport {
        pass,
        checked,
        skipped,
        first_violation,
        worst_slack: if checked == 0 { 0.0 } else { worst_slack },
        margin,
    }
}

/// Outcome of the fixed-point bound replay on an implicit-mode trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyReport {
    pub pass: bool,
    /// Max recorded Moreau-gradient norm, the post-hoc M.
    pub m_observed: f64,
    pub cauchy_pass: bool,
    pub dual_pass: bool,
    pub first_violation: Option<usize>,
    pub checked: usize,
}

/// Checks ||v_{k+1} - v_k|| <= (C_N + M sqrt(1/rho0)) sqrt(1/rho_k) and
/// ||lambda_{k+1}|| <= C_N sqrt(1/rho_k) at every recorded iteration,
/// with M the max observed Moreau-gradient norm.
pub fn verify_cauchy_bounds(trace: &Trace, cfg: &SolverConfig) -> CauchyReport {
    let m_observed = trace
        .records
        .iter()
        .filter_map(|r| r.moreau_grad_norm)
        .fold(0.0f64, f64::max);
    let mut cauchy_pass = true;
    let mut dual_pass = true;
    let mut first_violation = None;
    let mut checked = 0;
    for rec in &trace.records {
        let (rho_k, _, _) = schedule(cfg, rec.k);
        let mut violated = false;
        if let Some(lhs) = rec.cauchy_lhs {
            checked += 1;
            let bound = cauchy_bound(rec.k, cfg, m_observed);
            if lhs > bound {
                cauchy_pass = false;
                violated = true;
            }
        }
        let dual_bound = cfg.c_n * (1.0 / rho_k).sqrt();
        if rec.lambda_norm > dual_bound {
            dual_pass = false;
            violated = true;
        }
        if violated && first_violation.is_none() {
            first_violation = Some(rec.k);
        }
    }
    CauchyReport {
        pass: cauchy_pass && dual_pass,
        m_observed,
        cauchy_pass,
        dual_pass,
        first_violation,
        checked,
    }
}
