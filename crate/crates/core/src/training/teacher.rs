use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{clip_global_norm, Adam};
use super::bptt::{bptt_gradients, gtf_jacobian_product_norm, max_step_singular_value, Forcing};
use super::{AlphaSetting, GtfConfig, OptimizerConfig, StfConfig, TrainingHistory};
use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::models::{Model, ObservationModel, Trainable};
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Loss above which an epoch counts as divergent.
const DIVERGENT_LOSS: f64 = 1e10;

const MAX_ALPHA_REFINEMENTS: usize = 8;

pub(crate) fn trainable_of<T: Scalar>(model: &mut Model<T>) -> Result<&mut dyn Trainable<T>> {
    let family = model.family();
    model.trainable_mut().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "{family} models are fitted by ridge regression, not gradient descent"
        ))
    })
}

pub(crate) fn check_data<T: Scalar>(
    data: &Trajectory<T>,
    om: &ObservationModel<T>,
    net: &dyn Trainable<T>,
    opt: &OptimizerConfig,
) -> Result<()> {
    if data.n_channels() != om.obs_dim() {
        return Err(Error::DimensionMismatch {
            context: "training data channels",
            expected: om.obs_dim(),
            got: data.n_channels(),
        });
    }
    if om.latent_dim() != net.latent_dim() {
        return Err(Error::DimensionMismatch {
            context: "observation model latent dimension",
            expected: net.latent_dim(),
            got: om.latent_dim(),
        });
    }
    let needed = 10 * opt.sequence_length;
    if data.len() < needed {
        return Err(Error::TooShort {
            context: "training data",
            needed,
            got: data.len(),
        });
    }
    Ok(())
}

fn sample_batch<T: Scalar>(rng: &mut ChaCha8Rng, data: &Mat<T>, opt: &OptimizerConfig) -> Vec<Mat<T>> {
    let len = opt.sequence_length;
    let n = data.cols();
    (0..opt.batch_size)
        .map(|_| {
            let start = rng.random_range(0..=data.rows() - len);
            Mat::from_row_major(len, n, data.as_slice()[start * n..(start + len) * n].to_vec())
                .expect("segment shape")
        })
        .collect()
}

/// Shared epoch loop. `choose_forcing` picks the forcing for each batch and
/// may record per-batch diagnostics.
fn run<T: Scalar>(
    net: &mut dyn Trainable<T>,
    om: &ObservationModel<T>,
    data: &Trajectory<T>,
    opt: &OptimizerConfig,
    history: &mut TrainingHistory,
    mut choose_forcing: impl FnMut(&dyn Trainable<T>, &[Mat<T>], &mut TrainingHistory) -> Result<Forcing<T>>,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut adam = Adam::new(net.n_params(), T::lit(opt.learning_rate));
    let clip = T::lit(opt.clip_norm);
    let mut divergent_run = 0usize;
    let mut params = net.params();
    for epoch in 0..opt.n_epochs {
        let mut loss_sum = 0.0;
        let mut used = 0usize;
        for _ in 0..opt.batches_per_epoch {
            let batch = sample_batch(&mut rng, data.samples(), opt);
            let forcing = choose_forcing(&*net, &batch, history)?;
            let mut grad = vec![T::zero(); net.n_params()];
            let mut batch_loss = T::zero();
            let mut ok = true;
            for seg in &batch {
                match bptt_gradients(&*net, om, seg, &forcing) {
                    Ok(sg) => {
                        batch_loss += sg.loss;
                        for (g, s) in grad.iter_mut().zip(&sg.grad) {
                            *g += *s;
                        }
                    }
                    Err(Error::NonFinite(_)) => {
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if !ok {
                history.skipped_batches += 1;
                continue;
            }
            let inv = T::one() / T::from_count(batch.len());
            grad.iter_mut().for_each(|g| *g *= inv);
            clip_global_norm(&mut grad, clip);
            adam.step(&mut params, &grad);
            net.set_params(&params)?;
            loss_sum += (batch_loss * inv).as_f64();
            used += 1;
        }
        let epoch_loss = if used == 0 {
            f64::NAN
        } else {
            loss_sum / used as f64
        };
        history.epoch_losses.push(epoch_loss);
        if !epoch_loss.is_finite() || epoch_loss > DIVERGENT_LOSS {
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
        adam.learning_rate *= T::lit(opt.lr_decay);
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("trained parameters".into()));
    }
    Ok(())
}

/// Trains a PLRNN-family model by BPTT with sparse teacher forcing on
/// randomly drawn segments of `data`.
pub fn train_stf<T: Scalar>(
    model: &mut Model<T>,
    om: &ObservationModel<T>,
    data: &Trajectory<T>,
    cfg: &StfConfig,
) -> Result<TrainingHistory> {
    cfg.validate()?;
    let net = trainable_of(model)?;
    check_data(data, om, net, &cfg.optimizer)?;
    let forcing = Forcing::Sparse {
        interval: cfg.interval,
        forced_units: cfg.forced_units.unwrap_or(om.obs_dim()),
    };
    forcing.validate(net.latent_dim())?;
    let mut history = TrainingHistory::default();
    run(net, om, data, &cfg.optimizer, &mut history, |_, _, _| Ok(forcing))?;
    Ok(history)
}

/// Trains by BPTT with generalized teacher forcing. With an adaptive
/// setting, `α = max(0, 1 − 1/σ_max)` where `σ_max` is the largest step
/// Jacobian singular value over the batch. `σ_max` is first evaluated on
/// roll-outs forced with the previous batch's `α` (fully forced for the
/// first batch), then `α` is raised until `(1 − α) σ_max ≤ 1` holds on the
/// roll-outs forced with `α` itself.
pub fn train_gtf<T: Scalar>(
    model: &mut Model<T>,
    om: &ObservationModel<T>,
    data: &Trajectory<T>,
    cfg: &GtfConfig,
) -> Result<TrainingHistory> {
    cfg.validate()?;
    let net = trainable_of(model)?;
    check_data(data, om, net, &cfg.optimizer)?;
    let mut history = TrainingHistory::default();
    match cfg.alpha {
        AlphaSetting::Fixed { value } => {
            let forcing = Forcing::Generalized { alpha: T::lit(value) };
            run(net, om, data, &cfg.optimizer, &mut history, |_, _, h| {
                h.alphas.push(value);
                Ok(forcing)
            })?;
        }
        AlphaSetting::Adaptive => {
            let mut previous = T::one();
            run(net, om, data, &cfg.optimizer, &mut history, |net, batch, h| {
                let batch_sigma = |alpha: T| -> Result<T> {
                    let probe = Forcing::Generalized { alpha };
                    let mut sigma = T::zero();
                    for seg in batch {
                        sigma = sigma.max(max_step_singular_value(net, om, seg, &probe)?);
                    }
                    Ok(sigma)
                };
                // The forced states depend on α itself; raise α until it covers
                // the largest singular value along its own roll-outs.
                let mut alpha = adaptive_alpha(batch_sigma(previous)?)?;
                for _ in 0..MAX_ALPHA_REFINEMENTS {
                    let sigma = batch_sigma(alpha)?;
                    if (T::one() - alpha) * sigma <= T::one() {
                        break;
                    }
                    alpha = alpha.max(adaptive_alpha(sigma)?);
                }
                let mut worst = T::zero();
                for seg in batch {
                    worst = worst.max(gtf_jacobian_product_norm(net, om, seg, alpha)?);
                }
                h.alphas.push(alpha.as_f64());
                h.jacobian_product_norms.push(worst.as_f64());
                previous = alpha;
                Ok(Forcing::Generalized { alpha })
            })?;
        }
    }
    Ok(history)
}

fn adaptive_alpha<T: Scalar>(sigma_max: T) -> Result<T> {
    if !sigma_max.is_finite() {
        return Err(Error::NonFinite("step Jacobian singular value".into()));
    }
    if sigma_max <= T::one() {
        return Ok(T::zero());
    }
    let alpha = T::one() - T::one() / sigma_max;
    if alpha >= T::one() {
        return invalid("adaptive forcing strength reached 1");
    }
    Ok(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_alpha_rule() {
        assert_eq!(adaptive_alpha(0.5f64).unwrap(), 0.0);
        assert_eq!(adaptive_alpha(2.0f64).unwrap(), 0.5);
        assert!(adaptive_alpha(f64::INFINITY).is_err());
    }
}
