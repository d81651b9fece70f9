//! Greedy stage-wise training of built-in networks: one fresh unit is
//! appended per stage and optimized alone while earlier units stay
//! frozen, by plain gradient descent on the squared stage loss with
//! learning-rate halving on loss increase.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BuiltInNetwork, ConvRbf, DirectionUnit};
use crate::error::{Error, Result};
use crate::tensor::{adjoint_conv2_circ, conv2_circ, Grid, Kernel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: i64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.02,
            epochs: 60,
            batch: 8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::InvalidParameter(
                "epochs and batch must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One supervised example: a degraded or propagated state paired with
/// the ground-truth signal of the current domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: Grid,
    pub target: Grid,
}

impl TrainingPair {
    pub fn new(input: Grid, target: Grid) -> Result<TrainingPair> {
        input.same_shape(&target)?;
        Ok(TrainingPair { input, target })
    }
}

/// Architecture template for freshly appended units.
#[derive(Debug, Clone, PartialEq)]
pub enum UnitPrototype {
    ConvRbf {
        filter_pairs: usize,
        filter_size: usize,
        rbf_center_count: usize,
    },
    LinearDiffusion {
        kernel_size: usize,
    },
    SmoothedPriorGrad {
        p: f64,
        weight: f64,
        epsilon: f64,
    },
}

impl UnitPrototype {
    /// Desk-scale default: 4 filter pairs of 3x3 support, 11 RBF centers
    /// equally spaced on [-1, 1] with sigma equal to the spacing.
    pub fn conv_rbf_default() -> UnitPrototype {
        UnitPrototype::ConvRbf {
            filter_pairs: 4,
            filter_size: 3,
            rbf_center_count: 11,
        }
    }
}

/// Seeded initialization: filter taps uniform in (-0.1, 0.1), diffusion
/// gain 0.1, RBF weights zero so a fresh unit starts as a null
/// direction.
pub fn init_unit(proto: &UnitPrototype, rng: &mut ChaCha8Rng) -> Result<DirectionUnit> {
    match proto {
        UnitPrototype::ConvRbf {
            filter_pairs,
            filter_size,
            rbf_center_count,
        } => {
            if *filter_pairs == 0 || *filter_size % 2 == 0 || *rbf_center_count < 2 {
                return Err(Error::InvalidParameter(
                    "conv-rbf prototype needs filters, odd support and >= 2 centers".into(),
                ));
            }
            let mut mk_filters = |count: usize| -> Result<Vec<Kernel>> {
                (0..count)
                    .map(|_| {
                        let taps = (0..filter_size * filter_size)
                            .map(|_| rng.gen_range(-0.1..0.1))
                            .collect();
                        Kernel::new(*filter_size, *filter_size, taps)
                    })
                    .collect()
            };
            let filters_in = mk_filters(*filter_pairs)?;
            let filters_out = mk_filters(*filter_pairs)?;
            let n = *rbf_center_count;
            let spacing = 2.0 / (n - 1) as f64;
            let centers: Vec<f64> = (0..n).map(|i| -1.0 + i as f64 * spacing).collect();
            Ok(DirectionUnit::ConvRbf(ConvRbf::new(
                filters_in,
                filters_out,
                vec![0.0; n],
                centers,
                spacing,
            )?))
        }
        UnitPrototype::LinearDiffusion { kernel_size } => {
            if *kernel_size % 2 == 0 {
                return Err(Error::InvalidParameter(
                    "diffusion kernel support must be odd".into(),
                ));
            }
            // identity-centered kernel: only the gain trains, so the
            // frozen kernel must not start near zero
            let n = kernel_size * kernel_size;
            let mut taps: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
            taps[n / 2] = 1.0;
            Ok(DirectionUnit::LinearDiffusion {
                kernel: Kernel::new(*kernel_size, *kernel_size, taps)?,
                gain: 0.1,
            })
        }
        UnitPrototype::SmoothedPriorGrad { p, weight, epsilon } => {
            DirectionUnit::smoothed_prior_grad(*p, *weight, *epsilon)
        }
    }
}

impl DirectionUnit {
    /// Flat view of the trainable parameters. Layout: ConvRbf packs all
    /// input-filter taps, all output-filter taps, then the RBF weights;
    /// LinearDiffusion exposes the gain; SmoothedPriorGrad is a fixed
    /// analytic unit with no trainable parameters.
    pub fn trainable_params(&self) -> Vec<f64> {
        match self {
            DirectionUnit::ConvRbf(u) => {
                let mut p = Vec::new();
                for f in &u.filters_in {
                    p.extend_from_slice(f.taps());
                }
                for f in &u.filters_out {
                    p.extend_from_slice(f.taps());
                }
                p.extend_from_slice(&u.rbf_weights);
                p
            }
            DirectionUnit::LinearDiffusion { gain, .. } => vec![*gain],
            DirectionUnit::SmoothedPriorGrad { .. } => Vec::new(),
        }
    }

    pub fn set_trainable_params(&mut self, params: &[f64]) -> Result<()> {
        let expect = self.trainable_params().len();
        if params.len() != expect {
            return Err(Error::InvalidParameter(format!(
                "expected {expect} parameters, got {}",
                params.len()
            )));
        }
        match self {
            DirectionUnit::ConvRbf(u) => {
                let mut at = 0;
                for f in u.filters_in.iter_mut().chain(u.filters_out.iter_mut()) {
                    let n = f.taps().len();
                    f.taps_mut().copy_from_slice(&params[at..at + n]);
                    at += n;
                }
                u.rbf_weights.copy_from_slice(&params[at..]);
            }
            DirectionUnit::LinearDiffusion { gain, .. } => *gain = params[0],
            DirectionUnit::SmoothedPriorGrad { .. } => {}
        }
        Ok(())
    }
}

/// Sum of squared residuals of the network over the pairs.
pub fn stage_loss(net: &BuiltInNetwork, data: &[TrainingPair]) -> Result<f64> {
    let mut loss = 0.0;
    for pair in data {
        loss += net.apply(&pair.input)?.sub(&pair.target)?.norm_sq();
    }
    Ok(loss)
}

/// d/d tap[a,b] of <r, conv(q, k)> for a kernel of the given support:
/// the cross-correlation of r and q at the tap's offset.
fn conv_tap_grad(r: &Grid, q: &Grid, height: usize, width: usize) -> Vec<f64> {
    let (rows, cols) = r.shape();
    let (ch, cw) = (height / 2, width / 2);
    let mut out = vec![0.0; height * width];
    for a in 0..height {
        for b in 0..width {
            let mut acc = 0.0;
            for i in 0..rows {
                let si = (i + rows + ch - a) % rows;
                for j in 0..cols {
                    let sj = (j + cols + cw - b) % cols;
                    acc += r.get(i, j) * q.get(si, sj);
                }
            }
            out[a * width + b] = acc;
        }
    }
    out
}

/// Analytic gradient of the stage loss of `pair` with respect to the
/// trainable parameters of the network's last unit; layout matches
/// [`DirectionUnit::trainable_params`]. Backpropagation through the
/// residual recursion is trivial because only the final unit moves.
pub fn unit_param_grad(net: &BuiltInNetwork, pair: &TrainingPair) -> Result<Vec<f64>> {
    let last = net
        .units
        .last()
        .ok_or_else(|| Error::InvalidParameter("network has no units to train".into()))?;
    let states = net.apply_trace(&pair.input)?;
    let v_pre = &states[states.len() - 2];
    let v_out = &states[states.len() - 1];
    // loss = ||v_out - target||^2, dv_out = -alpha * dG
    let r = v_out.sub(&pair.target)?;
    let scale = -2.0 * net.alpha;
    match last {
        DirectionUnit::ConvRbf(u) => {
            let n_taps = u.filters_in[0].taps().len();
            let mut g_in = vec![0.0; u.filters_in.len() * n_taps];
            let mut g_out = vec![0.0; u.filters_out.len() * n_taps];
            let mut g_w = vec![0.0; u.rbf_weights.len()];
            let s2 = 2.0 * u.rbf_sigma * u.rbf_sigma;
            for (i, (fin, fout)) in u.filters_in.iter().zip(&u.filters_out).enumerate() {
                let z = conv2_circ(v_pre, fin)?;
                let phi = z.map(|x| u.rbf(x));
                let s = adjoint_conv2_circ(&r, fout)?;
                // RBF weights: dG/dw_j = fout (x) exp(-(z - c_j)^2 / 2s^2)
                for (j, &c) in u.rbf_centers.iter().enumerate() {
                    let e_j = z.map(|x| (-(x - c) * (x - c) / s2).exp());
                    g_w[j] += scale * s.dot(&e_j)?;
                }
                // output filter taps: dG/dtap = shift of phi
                for (slot, v) in conv_tap_grad(&r, &phi, fout.height(), fout.width())
                    .into_iter()
                    .enumerate()
                {
                    g_out[i * n_taps + slot] = scale * v;
                }
                // input filter taps, chain rule through phi'
                let tau = s.zip_map(&z, |sv, zv| sv * u.rbf_derivative(zv))?;
                for (slot, v) in conv_tap_grad(&tau, v_pre, fin.height(), fin.width())
                    .into_iter()
                    .enumerate()
                {
                    g_in[i * n_taps + slot] = scale * v;
                }
            }
            let mut grad = g_in;
            grad.extend(g_out);
            grad.extend(g_w);
            Ok(grad)
        }
        DirectionUnit::LinearDiffusion { kernel, .. } => {
            let kv = conv2_circ(v_pre, kernel)?;
            let a = adjoint_conv2_circ(&kv, kernel)?;
            Ok(vec![scale * r.dot(&a)?])
        }
        DirectionUnit::SmoothedPriorGrad { .. } => Ok(Vec::new()),
    }
}

/// Result of one greedy stage: the grown network plus the loss before
/// and after optimizing the new unit.
#[derive(Debug, Clone)]
pub struct TrainedStage {
    pub net: BuiltInNetwork,
    pub initial_loss: f64,
    pub final_loss: f64,
}

fn mix_seed(seed: i64, stage: usize) -> u64 {
    (seed as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stage as u64)
}

/// Appends one fresh unit from `proto` and optimizes only its
/// parameters on the stage loss; `stage` must equal the current unit
/// count. The recorded best loss never increases across epochs and the
/// returned network carries the best parameters seen.
pub fn train_stage(
    net: &BuiltInNetwork,
    stage: usize,
    proto: &UnitPrototype,
    data: &[TrainingPair],
    cfg: &TrainConfig,
) -> Result<TrainedStage> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingData);
    }
    if stage != net.units.len() {
        return Err(Error::InvalidParameter(format!(
            "stage {stage} does not match current unit count {}",
            net.units.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, stage));
    let mut grown = net.clone();
    grown.units.push(init_unit(proto, &mut rng)?);

    let n_params = grown.units.last().expect("just pushed").trainable_params().len();
    let initial_loss = stage_loss(&grown, data)?;
    if n_params == 0 {
        return Ok(TrainedStage {
            net: grown,
            initial_loss,
            final_loss: initial_loss,
        });
    }

    let mut best_params = grown.units.last().unwrap().trainable_params();
    let mut best_loss = initial_loss;
    let mut lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs {
        for chunk in data.chunks(cfg.batch) {
            let mut grad = vec![0.0; n_params];
            for pair in chunk {
                for (g, d) in grad.iter_mut().zip(unit_param_grad(&grown, pair)?) {
                    *g += d;
                }
            }
            let mut params = grown.units.last().unwrap().trainable_params();
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
            grown.units.last_mut().unwrap().set_trainable_params(&params)?;
        }
        let loss = stage_loss(&grown, data)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { stage, epoch });
        }
        if loss < best_loss {
            best_loss = loss;
            best_params = grown.units.last().unwrap().trainable_params();
        } else {
            lr *= 0.5;
            grown
                .units
                .last_mut()
                .unwrap()
                .set_trainable_params(&best_params)?;
        }
    }
    grown
        .units
        .last_mut()
        .unwrap()
        .set_trainable_params(&best_params)?;
    Ok(TrainedStage {
        net: grown,
        initial_loss,
        final_loss: best_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rand_grid(rows: usize, cols: usize, seed: u64) -> Grid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn zero_residual_data_keeps_parameters_at_init() {
        let input = rand_grid(6, 6, 1);
        let data = vec![TrainingPair::new(input.clone(), input).unwrap()];
        let net = BuiltInNetwork::new(0.5).unwrap();
        let cfg = TrainConfig {
            epochs: 10,
            ..Default::default()
        };
        let out = train_stage(&net, 0, &UnitPrototype::conv_rbf_default(), &data, &cfg).unwrap();
        assert_eq!(out.initial_loss, 0.0);
        assert_eq!(out.final_loss, 0.0);
        // RBF weights stay exactly zero: the unit remains a null direction
        match out.net.units.last().unwrap() {
            DirectionUnit::ConvRbf(u) => {
                assert!(u.rbf_weights.iter().all(|&w| w == 0.0));
            }
            other => panic!("unexpected unit {other:?}"),
        }
    }

    #[test]
    fn scalar_diffusion_reaches_closed_form_gain() {
        // v_T = (1 - alpha*gain) * v0 for the 1x1 identity-like kernel;
        // loss (v_T - t)^2 is minimized at gain* = (1 - t/v0) / alpha
        let alpha = 0.5;
        let v0 = Grid::constant(1, 1, 1.0);
        let t = Grid::constant(1, 1, 0.25);
        let data = vec![TrainingPair::new(v0, t).unwrap()];
        let net = BuiltInNetwork::new(alpha).unwrap();
        let proto = UnitPrototype::LinearDiffusion { kernel_size: 1 };
        let cfg = TrainConfig {
            learning_rate: 0.5,
            epochs: 400,
            batch: 1,
            seed: 3,
        };
        let out = train_stage(&net, 0, &proto, &data, &cfg).unwrap();
        let gain = match out.net.units.last().unwrap() {
            DirectionUnit::LinearDiffusion { kernel, gain } => {
                assert_eq!(kernel.taps(), &[1.0]); // identity-centered 1x1 init
                *gain
            }
            other => panic!("unexpected unit {other:?}"),
        };
        let want = (1.0 - 0.25) / alpha;
        assert!(
            (gain - want).abs() < 1e-3,
            "gain {gain} vs closed form {want}"
        );
        assert!(out.final_loss < 1e-8);
    }

    #[test]
    fn training_reduces_loss_on_toy_deblur_pairs() {
        let k = Kernel::gaussian(1.0).unwrap();
        let mut data = Vec::new();
        for seed in 0..3u64 {
            let target = rand_grid(16, 16, seed);
            let input = conv2_circ(&target, &k).unwrap();
            data.push(TrainingPair::new(input, target).unwrap());
        }
        let net = BuiltInNetwork::new(1.0).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.005,
            epochs: 50,
            batch: 3,
            seed: 42,
        };
        let out = train_stage(&net, 0, &UnitPrototype::conv_rbf_default(), &data, &cfg).unwrap();
        assert!(
            out.final_loss < out.initial_loss,
            "loss did not decrease: {} -> {}",
            out.initial_loss,
            out.final_loss
        );
    }

    #[test]
    fn stage_index_must_match_unit_count() {
        let net = BuiltInNetwork::new(1.0).unwrap();
        let data = vec![TrainingPair::new(rand_grid(4, 4, 0), rand_grid(4, 4, 1)).unwrap()];
        let err = train_stage(
            &net,
            2,
            &UnitPrototype::conv_rbf_default(),
            &data,
            &TrainConfig::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn empty_data_rejected() {
        let net = BuiltInNetwork::new(1.0).unwrap();
        let err = train_stage(
            &net,
            0,
            &UnitPrototype::conv_rbf_default(),
            &[],
            &TrainConfig::default(),
        );
        assert!(matches!(err, Err(Error::EmptyTrainingData)));
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let input = rand_grid(5, 5, 7);
        let pair = TrainingPair::new(input.clone(), input).unwrap();
        let mut net = BuiltInNetwork::new(0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        net.units
            .push(init_unit(&UnitPrototype::conv_rbf_default(), &mut rng).unwrap());
        // fresh conv-rbf has zero rbf weights: output == input, residual 0
        let grad = unit_param_grad(&net, &pair).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn diffusion_gain_gradient_matches_scalar_calculus() {
        // scalar case: L(gain) = ((1 - alpha*gain*k^2) v0 - t)^2
        // dL/dgain = 2((1-alpha*gain*k^2)v0 - t) * (-alpha*k^2*v0)
        let alpha = 0.3;
        let (v0, t, tap, gain) = (0.9, 0.2, 0.7, 0.5);
        let mut net = BuiltInNetwork::new(alpha).unwrap();
        net.units.push(DirectionUnit::LinearDiffusion {
            kernel: Kernel::new(1, 1, vec![tap]).unwrap(),
            gain,
        });
        let pair =
            TrainingPair::new(Grid::constant(1, 1, v0), Grid::constant(1, 1, t)).unwrap();
        let grad = unit_param_grad(&net, &pair).unwrap();
        let vt = (1.0 - alpha * gain * tap * tap) * v0;
        let want = 2.0 * (vt - t) * (-alpha * tap * tap * v0);
        assert!((grad[0] - want).abs() < 1e-12);
    }

    #[test]
    fn conv_rbf_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let proto = UnitPrototype::ConvRbf {
            filter_pairs: 2,
            filter_size: 3,
            rbf_center_count: 5,
        };
        let mut unit = init_unit(&proto, &mut rng).unwrap();
        // move weights off zero so every term participates
        let params: Vec<f64> = unit
            .trainable_params()
            .iter()
            .enumerate()
            .map(|(i, &p)| p + 0.05 * ((i % 7) as f64 - 3.0) / 7.0)
            .collect();
        unit.set_trainable_params(&params).unwrap();
        let mut net = BuiltInNetwork::new(0.35).unwrap();
        // frozen prefix unit, then the trainable one
        net.units.push(DirectionUnit::smoothed_prior_grad(0.8, 0.3, 1e-2).unwrap());
        net.units.push(unit);
        let pair = TrainingPair::new(rand_grid(4, 4, 12), rand_grid(4, 4, 13)).unwrap();

        let analytic = unit_param_grad(&net, &pair).unwrap();
        let base_params = net.units.last().unwrap().trainable_params();
        let h = 1e-5;
        let mut numeric = vec![0.0; base_params.len()];
        for i in 0..base_params.len() {
            let mut up = base_params.clone();
            up[i] += h;
            let mut dn = base_params.clone();
            dn[i] -= h;
            let mut net_up = net.clone();
            net_up.units.last_mut().unwrap().set_trainable_params(&up).unwrap();
            let mut net_dn = net.clone();
            net_dn.units.last_mut().unwrap().set_trainable_params(&dn).unwrap();
            let lu = stage_loss(&net_up, std::slice::from_ref(&pair)).unwrap();
            let ld = stage_loss(&net_dn, std::slice::from_ref(&pair)).unwrap();
            numeric[i] = (lu - ld) / (2.0 * h);
        }
        let an = Grid::from_vec(1, analytic.len(), analytic.clone()).unwrap();
        let nu = Grid::from_vec(1, numeric.len(), numeric.clone()).unwrap();
        let rel = an.sub(&nu).unwrap().norm() / nu.norm().max(1e-12);
        assert!(rel < 1e-5, "param gradient relative error {rel}");
    }
}
