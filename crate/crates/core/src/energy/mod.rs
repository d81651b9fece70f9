//! Energy models (fidelity + prior), Moreau-regularized gradients and
//! proximal operators.

pub mod prox;

use crate::error::{Error, Result};
use crate::tensor::{
    adjoint_conv2_circ, conv2_circ, gradient_filters, solve_diag_freq, Grid, Kernel,
};

pub use prox::{oracle_prox_grid, prox_l0, prox_l1, prox_lp_gst, GstResult};

/// Sparsity prior attached to an energy. `Implicit` marks problems whose
/// prior is unknown or intractable: it has no prox and no evaluable
/// value, and solvers must run in implicit mode.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    L0 { weight: f64 },
    L1 { weight: f64 },
    Lp { p: f64, weight: f64 },
    Implicit,
}

impl Prior {
    pub fn l0(weight: f64) -> Result<Prior> {
        if !(weight > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prior weight must be positive, got {weight}"
            )));
        }
        Ok(Prior::L0 { weight })
    }

    pub fn l1(weight: f64) -> Result<Prior> {
        if !(weight > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prior weight must be positive, got {weight}"
            )));
        }
        Ok(Prior::L1 { weight })
    }

    pub fn lp(p: f64, weight: f64) -> Result<Prior> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lp prior requires 0 < p < 1, got {p}"
            )));
        }
        if !(weight > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prior weight must be positive, got {weight}"
            )));
        }
        Ok(Prior::Lp { p, weight })
    }

    /// Builds the prior for exponent `p` in [0,1]; 0 and 1 select the
    /// dedicated closed forms.
    pub fn from_exponent(p: f64, weight: f64) -> Result<Prior> {
        if p == 0.0 {
            Prior::l0(weight)
        } else if p == 1.0 {
            Prior::l1(weight)
        } else {
            Prior::lp(p, weight)
        }
    }

    pub fn is_implicit(&self) -> bool {
        matches!(self, Prior::Implicit)
    }

    pub fn reg_weight(&self) -> Option<f64> {
        match self {
            Prior::L0 { weight } | Prior::L1 { weight } | Prior::Lp { weight, .. } => Some(*weight),
            Prior::Implicit => None,
        }
    }

    /// Regularization value weight * sum |x_i|^p (l0 counts nonzeros).
    pub fn eval(&self, x: &Grid) -> Result<f64> {
        let (p, weight) = match self {
            Prior::L0 { weight } => (0.0, *weight),
            Prior::L1 { weight } => (1.0, *weight),
            Prior::Lp { p, weight } => (*p, *weight),
            Prior::Implicit => return Err(Error::EnergyNotEvaluable),
        };
        Ok(weight * x.data().iter().map(|&v| prox::penalty(v, p)).sum::<f64>())
    }

    /// Elementwise proximal map with the prior's own weight: each entry
    /// solves argmin 0.5*(x - y_i)^2 + weight*|x|^p.
    pub fn prox(&self, y: &Grid) -> Result<Grid> {
        match self {
            Prior::L0 { weight } => Ok(y.map(|v| prox_l0(v, *weight))),
            Prior::L1 { weight } => Ok(y.map(|v| prox_l1(v, *weight))),
            Prior::Lp { p, weight } => Ok(y.map(|v| prox_lp_gst(v, *weight, *p).value)),
            Prior::Implicit => Err(Error::ImplicitProx),
        }
    }

    /// Prox with the weight rescaled by `scale` (used by solvers that
    /// divide the prior by a penalty parameter).
    pub fn prox_scaled(&self, y: &Grid, scale: f64) -> Result<Grid> {
        debug_assert!(scale > 0.0);
        match self {
            Prior::L0 { weight } => Ok(y.map(|v| prox_l0(v, weight * scale))),
            Prior::L1 { weight } => Ok(y.map(|v| prox_l1(v, weight * scale))),
            Prior::Lp { p, weight } => Ok(y.map(|v| prox_lp_gst(v, weight * scale, *p).value)),
            Prior::Implicit => Err(Error::ImplicitProx),
        }
    }
}

/// Smooth data-fidelity term f of the energy.
///
/// `ConvQuadratic` is 0.5*||u (x) k - b||^2. `Quadratic` is
/// 0.5*||u - anchor||^2. `CoupledImage` treats the state as the
/// horizontal-gradient channel g and evaluates
/// 0.5 * inf_x { ||x (x) k - y||^2 + beta*||Dx(x) - g||^2 },
/// eliminating the image x through a frequency-domain solve at every
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Fidelity {
    ConvQuadratic { kernel: Kernel, observation: Grid },
    CoupledImage { kernel: Kernel, observation: Grid, beta: f64 },
    Quadratic { anchor: Grid },
}

impl Fidelity {
    pub fn coupled_image(kernel: Kernel, observation: Grid, beta: f64) -> Result<Fidelity> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        Ok(Fidelity::CoupledImage {
            kernel,
            observation,
            beta,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Fidelity::ConvQuadratic { observation, .. }
            | Fidelity::CoupledImage { observation, .. } => observation.shape(),
            Fidelity::Quadratic { anchor } => anchor.shape(),
        }
    }

    /// Minimizer of the inner image problem of `CoupledImage`:
    /// (K^T K + beta Dx^T Dx) x = K^T y + beta Dx^T g.
    pub fn eliminate_image(&self, g: &Grid) -> Result<Grid> {
        match self {
            Fidelity::CoupledImage {
                kernel,
                observation,
                beta,
            } => {
                observation.same_shape(g)?;
                let (dx, _) = gradient_filters();
                let mut rhs = adjoint_conv2_circ(observation, kernel)?;
                rhs.axpy(*beta, &adjoint_conv2_circ(g, &dx)?)?;
                solve_diag_freq(&[(kernel.clone(), 1.0), (dx, *beta)], &rhs, 0.0)
            }
            _ => Err(Error::InvalidParameter(
                "eliminate_image applies to CoupledImage fidelity only".into(),
            )),
        }
    }

    /// Fidelity value at `u`.
    pub fn eval(&self, u: &Grid) -> Result<f64> {
        match self {
            Fidelity::ConvQuadratic {
                kernel,
                observation,
            } => {
                observation.same_shape(u)?;
                let r = conv2_circ(u, kernel)?.sub(observation)?;
                Ok(0.5 * r.norm_sq())
            }
            Fidelity::CoupledImage {
                kernel,
                observation,
                beta,
            } => {
                let x = self.eliminate_image(u)?;
                let (dx, _) = gradient_filters();
                let rk = conv2_circ(&x, kernel)?.sub(observation)?;
                let rg = conv2_circ(&x, &dx)?.sub(u)?;
                Ok(0.5 * (rk.norm_sq() + beta * rg.norm_sq()))
            }
            Fidelity::Quadratic { anchor } => {
                anchor.same_shape(u)?;
                Ok(0.5 * u.sub(anchor)?.norm_sq())
            }
        }
    }

    /// Exact analytic gradient of the fidelity at `u`. For
    /// `CoupledImage` the envelope theorem gives
    /// grad f(g) = beta * (g - Dx(x*(g))).
    pub fn grad(&self, u: &Grid) -> Result<Grid> {
        match self {
            Fidelity::ConvQuadratic {
                kernel,
                observation,
            } => {
                observation.same_shape(u)?;
                let r = conv2_circ(u, kernel)?.sub(observation)?;
                adjoint_conv2_circ(&r, kernel)
            }
            Fidelity::CoupledImage { beta, .. } => {
                let x = self.eliminate_image(u)?;
                let (dx, _) = gradient_filters();
                u.sub(&conv2_circ(&x, &dx)?).map(|d| d.scale(*beta))
            }
            Fidelity::Quadratic { anchor } => {
                anchor.same_shape(u)?;
                u.sub(anchor)
            }
        }
    }
}

/// Moreau-Yosida regularization parameters: the quadratic
/// (mu/2)*||u - anchor||^2 added to the fidelity around the current
/// iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct MoreauParams {
    pub mu: f64,
    pub anchor: Grid,
}

impl MoreauParams {
    pub fn new(mu: f64, anchor: Grid) -> Result<MoreauParams> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu must be positive, got {mu}"
            )));
        }
        Ok(MoreauParams { mu, anchor })
    }
}

/// Gradient of the Moreau-regularized fidelity:
/// grad f(u) + mu * (u - anchor).
pub fn grad_moreau(fid: &Fidelity, mp: &MoreauParams, u: &Grid) -> Result<Grid> {
    mp.anchor.same_shape(u)?;
    let mut g = fid.grad(u)?;
    g.axpy(mp.mu, &u.sub(&mp.anchor)?)?;
    Ok(g)
}

/// Value of the Moreau-regularized fidelity f(u) + (mu/2)||u - anchor||^2.
pub fn eval_moreau(fid: &Fidelity, mp: &MoreauParams, u: &Grid) -> Result<f64> {
    mp.anchor.same_shape(u)?;
    Ok(fid.eval(u)? + 0.5 * mp.mu * u.sub(&mp.anchor)?.norm_sq())
}

/// Complete energy: fidelity plus prior.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub fidelity: Fidelity,
    pub prior: Prior,
}

impl EnergyModel {
    pub fn new(fidelity: Fidelity, prior: Prior) -> EnergyModel {
        EnergyModel { fidelity, prior }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.fidelity.shape()
    }

    /// Total energy f(x) + r(x); implicit priors are not evaluable.
    pub fn eval(&self, x: &Grid) -> Result<f64> {
        Ok(self.fidelity.eval(x)? + self.prior.eval(x)?)
    }

    /// Same model with the prior replaced by `Implicit`.
    pub fn with_implicit_prior(&self) -> EnergyModel {
        EnergyModel {
            fidelity: self.fidelity.clone(),
            prior: Prior::Implicit,
        }
    }
}

/// Recovers an image from gradient estimates: solves
/// (K^T K + beta * (Dx^T Dx + Dy^T Dy)) x = K^T y + beta * (Dx^T gx + Dy^T gy)
/// in the frequency domain; the stationarity residual of the underlying
/// quadratic is at the solver's accuracy (<= 1e-8 relative).
pub fn image_from_gradients(
    y: &Grid,
    k: &Kernel,
    g: (&Grid, &Grid),
    beta: f64,
) -> Result<Grid> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be nonnegative, got {beta}"
        )));
    }
    let (gx, gy) = g;
    y.same_shape(gx)?;
    y.same_shape(gy)?;
    let (dx, dy) = gradient_filters();
    let mut rhs = adjoint_conv2_circ(y, k)?;
    rhs.axpy(beta, &adjoint_conv2_circ(gx, &dx)?)?;
    rhs.axpy(beta, &adjoint_conv2_circ(gy, &dy)?)?;
    solve_diag_freq(
        &[(k.clone(), 1.0), (dx, beta), (dy, beta)],
        &rhs,
        0.0,
    )
}
