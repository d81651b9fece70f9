//! Classical ADMM and half-quadratic splitting solvers over the same
//! energies, emitting column-compatible traces (error-condition and
//! Cauchy columns stay empty).

use crate::energy::{EnergyModel, Fidelity};
use crate::error::{Error, Result};
use crate::solver::trace::{IterationRecord, StopReason, Trace};
use crate::solver::{dual_update, quad_subproblem, SolverState};
use crate::tensor::{adjoint_conv2_circ, rel_error, rel_error_flagged, DiagSolver, Grid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub rho0: f64,
    /// Penalty growth factor per iteration; 1 keeps the penalty fixed
    /// (the standard convergent ADMM choice). HQS always grows its
    /// coupling by 2 per step, capped at 1e8.
    pub gamma: f64,
    pub epsilon: f64,
    pub k_max: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            rho0: 1.0,
            gamma: 1.0,
            epsilon: 1e-3,
            k_max: 200,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rho0 must be positive, got {}",
                self.rho0
            )));
        }
        if !(self.gamma >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "baseline gamma must be >= 1, got {}",
                self.gamma
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    fn header(&self, solver: &str) -> Vec<(String, String)> {
        vec![
            ("solver".into(), solver.into()),
            ("rho0".into(), self.rho0.to_string()),
            ("gamma".into(), self.gamma.to_string()),
            ("epsilon".into(), self.epsilon.to_string()),
            ("k_max".into(), self.k_max.to_string()),
        ]
    }
}

fn require_explicit(model: &EnergyModel) -> Result<f64> {
    model
        .prior
        .reg_weight()
        .ok_or(Error::ImplicitProx)
}

/// Alternating direction method of multipliers on the original energy
/// (no Moreau term): frequency-domain u-step, proximal v-step with
/// weight reg/rho, dual ascent. The reported iterate is v, the
/// post-prox estimate.
pub fn admm_solve(
    model: &EnergyModel,
    cfg: &BaselineConfig,
    init: SolverState,
    ground_truth: Option<&Grid>,
) -> Result<(Grid, Trace)> {
    cfg.validate()?;
    require_explicit(model)?;
    let initial_energy = model.eval(&init.v)?;
    let mut st = init;
    let mut records = Vec::new();
    let mut k = 0usize;
    let (final_k, terminated_by) = loop {
        let rho = cfg.rho0 * cfg.gamma.powi(k as i32);
        // u-step: argmin f(u) + rho/2 ||u - (v - lambda)||^2
        let target = st.v.sub(&st.lambda_dual)?;
        let u_new = quad_subproblem(&model.fidelity, 0.0, &st.x, rho, &target)?;
        // v-step: prox of r/rho at u + lambda
        let v_new = model.prior.prox_scaled(&u_new.add(&st.lambda_dual)?, 1.0 / rho)?;
        let lambda_new = dual_update(&st.lambda_dual, &u_new, &v_new)?;
        if !u_new.is_finite() || !v_new.is_finite() || !lambda_new.is_finite() {
            return Err(Error::SolverDiverged { k });
        }

        let (iter_error, _) = rel_error_flagged(&v_new, &st.v)?;
        let mut rec = IterationRecord::empty(k);
        rec.iter_error = iter_error;
        rec.x_step_norm = v_new.sub(&st.v)?.norm();
        rec.lambda_norm = lambda_new.norm();
        rec.energy = model.eval(&v_new)?;
        if let Some(gt) = ground_truth {
            rec.recon_error = Some(rel_error(&v_new, gt)?);
        }
        records.push(rec);

        st.u = u_new;
        st.v = v_new.clone();
        st.x = v_new;
        st.lambda_dual = lambda_new;

        if iter_error <= cfg.epsilon {
            break (k, StopReason::Epsilon);
        }
        if k >= cfg.k_max {
            break (k, StopReason::KMax);
        }
        k += 1;
    };
    Ok((
        st.v.clone(),
        Trace {
            records,
            terminated_by,
            final_k,
            initial_energy,
            header: cfg.header("admm"),
        },
    ))
}

const HQS_BETA_CAP: f64 = 1e8;
const HQS_BETA_GROWTH: f64 = 2.0;
const HQS_INNER_CAP: usize = 1000;

/// Half-quadratic splitting: per outer level k the coupling is
/// beta_k = min(rho0 * 2^k, 1e8), and the level alternates the quadratic
/// solve argmin f(x) + (beta/2)||x - z||^2 with the prox
/// z = prox_{r/beta}(x) until the level's coupled subproblem is solved.
///
/// The inner stop is contraction-compensated: the alternation contracts
/// at rate ~beta/(1+beta), so the remaining gap is about beta times the
/// last step; the level ends when rel_step * beta <= 0.1 * epsilon (or
/// after 1000 alternations). A single alternation per level would track
/// the unregularized solution instead of the prior-regularized one. The
/// reported iterate is z; K counts outer levels.
pub fn hqs_solve(
    model: &EnergyModel,
    cfg: &BaselineConfig,
    init: SolverState,
    ground_truth: Option<&Grid>,
) -> Result<(Grid, Trace)> {
    cfg.validate()?;
    require_explicit(model)?;
    let initial_energy = model.eval(&init.v)?;
    let (rows, cols) = init.v.shape();
    // amortize the spectra for the convolutional x-step
    let conv_parts = match &model.fidelity {
        Fidelity::ConvQuadratic {
            kernel,
            observation,
        } => Some((kernel.clone(), adjoint_conv2_circ(observation, kernel)?)),
        _ => None,
    };
    let mut z = init.v.clone();
    let mut records = Vec::new();
    let mut k = 0usize;
    let (final_k, terminated_by) = loop {
        let beta = (cfg.rho0 * HQS_BETA_GROWTH.powi(k as i32)).min(HQS_BETA_CAP);
        let level_solver = conv_parts
            .as_ref()
            .map(|(kernel, _)| DiagSolver::new(&[(kernel.clone(), 1.0)], rows, cols, beta))
            .transpose()?;
        let z_level = z.clone();
        for _ in 0..HQS_INNER_CAP {
            let x_new = match (&level_solver, &conv_parts) {
                (Some(solver), Some((_, ktb))) => {
                    let mut rhs = ktb.clone();
                    rhs.axpy(beta, &z)?;
                    solver.solve(&rhs)?
                }
                _ => quad_subproblem(&model.fidelity, 0.0, &z, beta, &z)?,
            };
            let z_new = model.prior.prox_scaled(&x_new, 1.0 / beta)?;
            if !x_new.is_finite() || !z_new.is_finite() {
                return Err(Error::SolverDiverged { k });
            }
            let (step, _) = rel_error_flagged(&z_new, &z)?;
            z = z_new;
            if step * beta <= 0.1 * cfg.epsilon {
                break;
            }
        }

        let (iter_error, _) = rel_error_flagged(&z, &z_level)?;
        let mut rec = IterationRecord::empty(k);
        rec.iter_error = iter_error;
        rec.x_step_norm = z.sub(&z_level)?.norm();
        rec.energy = model.eval(&z)?;
        if let Some(gt) = ground_truth {
            rec.recon_error = Some(rel_error(&z, gt)?);
        }
        records.push(rec);

        if iter_error <= cfg.epsilon {
            break (k, StopReason::Epsilon);
        }
        if k >= cfg.k_max {
            break (k, StopReason::KMax);
        }
        k += 1;
    };
    Ok((
        z,
        Trace {
            records,
            terminated_by,
            final_k,
            initial_energy,
            header: cfg.header("hqs"),
        },
    ))
}
