use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{clip_global_norm, Adam};
use super::teacher::trainable_of;
use super::{OptimizerConfig, TrainingHistory};
use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::models::{Model, ObservationModel, Trainable};
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Multiple-shooting settings. The data are cut into `⌊T/L⌋` contiguous
/// subsequences of `subsequence_length` samples, each with its own
/// trainable initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsConfig {
    pub subsequence_length: usize,
    pub lambda_ms: f64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl MsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subsequence_length < 2 {
            return invalid("subsequence_length must be at least 2");
        }
        if !(self.lambda_ms >= 0.0) {
            return invalid("lambda_ms must be non-negative");
        }
        self.optimizer.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MsGradient<T> {
    pub loss: T,
    pub grad_params: Vec<T>,
    /// Same shape as the initial-state matrix.
    pub grad_initial: Mat<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MsResult<T> {
    pub history: TrainingHistory,
    /// One learned initial state per subsequence.
    pub initial_states: Mat<T>,
}

fn check<T: Scalar>(
    net: &(impl Trainable<T> + ?Sized),
    om: &ObservationModel<T>,
    data: &Mat<T>,
    initial: &Mat<T>,
    len: usize,
) -> Result<usize> {
    if len < 2 {
        return invalid("subsequence_length must be at least 2");
    }
    let n_seg = data.rows() / len;
    if n_seg == 0 {
        return Err(Error::TooShort {
            context: "multiple shooting data",
            needed: len,
            got: data.rows(),
        });
    }
    if initial.rows() != n_seg {
        return Err(Error::DimensionMismatch {
            context: "initial conditions per subsequence",
            expected: n_seg,
            got: initial.rows(),
        });
    }
    if initial.cols() != net.latent_dim() || om.latent_dim() != net.latent_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial condition dimension",
            expected: net.latent_dim(),
            got: initial.cols(),
        });
    }
    if data.cols() != om.obs_dim() {
        return Err(Error::DimensionMismatch {
            context: "multiple shooting data channels",
            expected: om.obs_dim(),
            got: data.cols(),
        });
    }
    Ok(n_seg)
}

/// Loss and gradients over the subsequences listed in `segments`.
///
/// The loss is the mean squared observation error of free roll-outs
/// `F^t(μ_i)`, `t = 0..L`, compared with `x_{iL+t}`, plus `λ` times the
/// mean continuity gap `||F^L(μ_i) − μ_{i+1}||²` over the listed
/// subsequences that have a successor.
pub fn multiple_shooting_gradients<T: Scalar>(
    net: &(impl Trainable<T> + ?Sized),
    om: &ObservationModel<T>,
    data: &Mat<T>,
    initial: &Mat<T>,
    len: usize,
    lambda: T,
    segments: &[usize],
) -> Result<MsGradient<T>> {
    let n_seg = check(net, om, data, initial, len)?;
    if segments.is_empty() || segments.iter().any(|&i| i >= n_seg) {
        return invalid("segment list must be non-empty and within range");
    }
    let m = net.latent_dim();
    let n_obs = om.obs_dim();
    let n_pairs = segments.iter().filter(|&&i| i + 1 < n_seg).count();
    let mse_scale = T::one() / T::from_count(segments.len() * len * n_obs);
    let pen_scale = if n_pairs > 0 {
        lambda / T::from_count(n_pairs)
    } else {
        T::zero()
    };

    let mut loss = T::zero();
    let mut grad_params = vec![T::zero(); net.n_params()];
    let mut grad_initial = Mat::zeros(initial.rows(), m);
    let mut states = Mat::zeros(len + 1, m);
    let mut gs = vec![T::zero(); m];
    for &i in segments {
        states.row_mut(0).copy_from_slice(initial.row(i));
        for t in 0..len {
            let (head, tail) = states.as_mut_slice().split_at_mut((t + 1) * m);
            net.step_into(&head[t * m..], &mut tail[..m]);
        }
        let mut resid: Vec<Vec<T>> = Vec::with_capacity(len);
        for t in 0..len {
            let r: Vec<T> = om
                .observe(states.row(t))
                .iter()
                .zip(data.row(i * len + t))
                .map(|(&p, &x)| x - p)
                .collect();
            loss += r.iter().map(|&v| v * v).sum::<T>() * mse_scale;
            resid.push(r);
        }
        let mut carry = vec![T::zero(); m];
        if i + 1 < n_seg {
            let gap: Vec<T> = states
                .row(len)
                .iter()
                .zip(initial.row(i + 1))
                .map(|(&a, &b)| a - b)
                .collect();
            loss += gap.iter().map(|&v| v * v).sum::<T>() * pen_scale;
            for k in 0..m {
                let g = T::lit(2.0) * pen_scale * gap[k];
                carry[k] = g;
                grad_initial[(i + 1, k)] -= g;
            }
        }
        for t in (0..len).rev() {
            net.vjp(states.row(t), &carry, &mut grad_params, &mut gs);
            let local: Vec<T> = resid[t].iter().map(|&r| T::lit(-2.0) * mse_scale * r).collect();
            carry.copy_from_slice(&gs);
            om.b().tmatvec_acc(&local, &mut carry);
        }
        for k in 0..m {
            grad_initial[(i, k)] += carry[k];
        }
    }
    if !loss.is_finite() || grad_params.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("multiple shooting loss".into()));
    }
    Ok(MsGradient {
        loss,
        grad_params,
        grad_initial,
    })
}

/// Full multiple-shooting loss over all subsequences.
pub fn multiple_shooting_loss<T: Scalar>(
    net: &(impl Trainable<T> + ?Sized),
    om: &ObservationModel<T>,
    data: &Mat<T>,
    initial: &Mat<T>,
    len: usize,
    lambda: T,
) -> Result<T> {
    let n_seg = check(net, om, data, initial, len)?;
    let all: Vec<usize> = (0..n_seg).collect();
    Ok(multiple_shooting_gradients(net, om, data, initial, len, lambda, &all)?.loss)
}

/// Jointly trains the model and the per-subsequence initial states, which
/// start at `B⁺x_{iL}`.
pub fn train_ms<T: Scalar>(
    model: &mut Model<T>,
    om: &ObservationModel<T>,
    data: &Trajectory<T>,
    cfg: &MsConfig,
) -> Result<MsResult<T>> {
    cfg.validate()?;
    let net = trainable_of(model)?;
    let len = cfg.subsequence_length;
    let x = data.samples();
    let n_seg = x.rows() / len;
    if n_seg < 2 {
        return Err(Error::TooShort {
            context: "multiple shooting data",
            needed: 2 * len,
            got: x.rows(),
        });
    }
    let m = net.latent_dim();
    let mut initial = Mat::zeros(n_seg, m);
    for i in 0..n_seg {
        initial.row_mut(i).copy_from_slice(&om.infer_state(x.row(i * len)));
    }
    check(net, om, x, &initial, len)?;

    let opt = &cfg.optimizer;
    let lambda = T::lit(cfg.lambda_ms);
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut adam_p = Adam::new(net.n_params(), T::lit(opt.learning_rate));
    let mut adam_ic = Adam::new(n_seg * m, T::lit(opt.learning_rate));
    let clip = T::lit(opt.clip_norm);
    let mut params = net.params();
    let mut history = TrainingHistory::default();
    let mut divergent_run = 0;
    for epoch in 0..opt.n_epochs {
        let mut loss_sum = 0.0;
        let mut used = 0;
        for _ in 0..opt.batches_per_epoch {
            let batch: Vec<usize> = (0..opt.batch_size).map(|_| rng.random_range(0..n_seg)).collect();
            let g = match multiple_shooting_gradients(&*net, om, x, &initial, len, lambda, &batch) {
                Ok(g) => g,
                Err(Error::NonFinite(_)) => {
                    history.skipped_batches += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let mut gp = g.grad_params;
            clip_global_norm(&mut gp, clip);
            adam_p.step(&mut params, &gp);
            net.set_params(&params)?;
            let mut gi = g.grad_initial.into_vec();
            clip_global_norm(&mut gi, clip);
            adam_ic.step(initial.as_mut_slice(), &gi);
            loss_sum += g.loss.as_f64();
            used += 1;
        }
        let epoch_loss = if used == 0 { f64::NAN } else { loss_sum / used as f64 };
        history.epoch_losses.push(epoch_loss);
        if !epoch_loss.is_finite() {
            divergent_run += 1;
            if divergent_run > opt.patience {
                return Err(Error::TrainingDiverged {
                    epochs: epoch + 1,
                    last_loss: epoch_loss,
                });
            }
        } else {
            divergent_run = 0;
        }
        adam_p.learning_rate *= T::lit(opt.lr_decay);
        adam_ic.learning_rate *= T::lit(opt.lr_decay);
    }
    Ok(MsResult {
        history,
        initial_states: initial,
    })
}
