use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{spectral_norm, Mat};
use crate::models::{ObservationModel, Trainable};
use crate::scalar::Scalar;

/// How data-inferred states `ẑ_t = B⁺x_t` enter the training roll-out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Forcing<T> {
    /// Free-running from `ẑ_0`.
    Free,
    /// At every `t` with `t mod interval == 0`, the first `forced_units`
    /// coordinates are replaced by those of `ẑ_t`.
    Sparse { interval: usize, forced_units: usize },
    /// Every step runs from `(1-α) z_t + α ẑ_t`.
    Generalized { alpha: T },
}

impl<T: Scalar> Forcing<T> {
    pub fn validate(&self, latent_dim: usize) -> Result<()> {
        match *self {
            Forcing::Free => Ok(()),
            Forcing::Sparse {
                interval,
                forced_units,
            } => {
                if interval == 0 {
                    invalid("forcing interval must be at least 1")
                } else if forced_units > latent_dim {
                    invalid(format!(
                        "cannot force {forced_units} units of a {latent_dim}-dimensional model"
                    ))
                } else {
                    Ok(())
                }
            }
            Forcing::Generalized { alpha } => {
                if alpha >= T::zero() && alpha <= T::one() {
                    Ok(())
                } else {
                    invalid(format!("forcing strength must lie in [0, 1], got {alpha}"))
                }
            }
        }
    }

    /// Builds the step input `s_t` from the model state and the forcing
    /// signal, and the factor `∂s_t/∂z_t` (diagonal) into `pass`.
    #[inline]
    fn apply(&self, t: usize, z: &[T], zhat: &[T], s: &mut [T], pass: &mut [T]) {
        match *self {
            Forcing::Free => {
                s.copy_from_slice(z);
                pass.fill(T::one());
            }
            Forcing::Sparse {
                interval,
                forced_units,
            } => {
                s.copy_from_slice(z);
                pass.fill(T::one());
                if t % interval == 0 {
                    s[..forced_units].copy_from_slice(&zhat[..forced_units]);
                    pass[..forced_units].fill(T::zero());
                }
            }
            Forcing::Generalized { alpha } => {
                let keep = T::one() - alpha;
                for i in 0..s.len() {
                    s[i] = keep * z[i] + alpha * zhat[i];
                }
                pass.fill(keep);
            }
        }
    }
}

/// Loss and exact gradients of one training segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentGradient<T> {
    /// `Σ_{t≥1} ||x_t − B z_t||² / ((T−1)·N)`.
    pub loss: T,
    /// Gradient with respect to the flat parameter vector.
    pub grad: Vec<T>,
    /// Row `t` holds the derivative of the loss terms after `t` with respect
    /// to the model state `z_t` (before forcing). Row 0 is all zero.
    pub future_cotangents: Mat<T>,
}

/// Forward roll-out record: step inputs `s_t` for `t = 0..T-1`, model
/// states `z_t` for `t = 0..T` and the forcing pass-through factors.
pub(crate) struct Rollout<T> {
    pub inputs: Mat<T>,
    pub states: Mat<T>,
    pub pass: Mat<T>,
    pub loss: T,
}

fn check_segment<T: Scalar>(
    model: &(impl Trainable<T> + ?Sized),
    om: &ObservationModel<T>,
    segment: &Mat<T>,
    forcing: &Forcing<T>,
) -> Result<()> {
    let m = model.latent_dim();
    if om.latent_dim() != m {
        return Err(Error::DimensionMismatch {
            context: "observation model latent dimension",
            expected: m,
            got: om.latent_dim(),
        });
    }
    if segment.cols() != om.obs_dim() {
        return Err(Error::DimensionMismatch {
            context: "training segment channels",
            expected: om.obs_dim(),
            got: segment.cols(),
        });
    }
    if segment.rows() < 2 {
        return Err(Error::TooShort {
            context: "training segment",
            needed: 2,
            got: segment.rows(),
        });
    }
    forcing.validate(m)
}

pub(crate) fn forward<T: Scalar>(
    model: &(impl Trainable<T> + ?Sized),
    om: &ObservationModel<T>,
    segment: &Mat<T>,
    forcing: &Forcing<T>,
) -> Rollout<T> {
    let m = model.latent_dim();
    let steps = segment.rows() - 1;
    let n = segment.cols();
    let mut inputs = Mat::zeros(steps, m);
    let mut states = Mat::zeros(steps + 1, m);
    let mut pass = Mat::zeros(steps, m);
    states.row_mut(0).copy_from_slice(&om.infer_state(segment.row(0)));
    let mut loss = T::zero();
    let mut next = vec![T::zero(); m];
    for t in 0..steps {
        let zhat = om.infer_state(segment.row(t));
        forcing.apply(t, states.row(t), &zhat, inputs.row_mut(t), pass.row_mut(t));
        model.step_into(inputs.row(t), &mut next);
        states.row_mut(t + 1).copy_from_slice(&next);
        let pred = om.observe(&next);
        loss += pred
            .iter()
            .zip(segment.row(t + 1))
            .map(|(&p, &x)| (x - p) * (x - p))
            .sum::<T>();
    }
    Rollout {
        inputs,
        states,
        pass,
        loss: loss / T::from_count(steps * n),
    }
}

/// Loss of a segment under the given forcing, without gradients.
pub fn segment_loss<T: Scalar>(
    model: &(impl Trainable<T> + ?Sized),
    om: &ObservationModel<T>,
    segment: &Mat<T>,
    forcing: &Forcing<T>,
) -> Result<T> {
    check_segment(model, om, segment, forcing)?;
    Ok(forward(model, om, segment, forcing).loss)
}

/// Backpropagation through time over one segment of observations (rows are
/// time steps). The forced roll-out starts from `ẑ_0 = B⁺x_0`.
pub fn bptt_gradients<T: Scalar>(
    model: &(impl Trainable<T> + ?Sized),
    om: &ObservationModel<T>,
    segment: &Mat<T>,
    forcing: &Forcing<T>,
) -> Result<SegmentGradient<T>> {
    check_segment(model, om, segment, forcing)?;
    let roll = forward(model, om, segment, forcing);
    if !roll.loss.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    let m = model.latent_dim();
    let steps = segment.rows() - 1;
    let scale = T::lit(-2.0) / T::from_count(steps * segment.cols());
    let mut grad = vec![T::zero(); model.n_params()];
    let mut future = Mat::zeros(steps + 1, m);
    let mut carry = vec![T::zero(); m];
    let mut g = vec![T::zero(); m];
    let mut gs = vec![T::zero(); m];
    for t in (0..steps).rev() {
        // Total cotangent of z_{t+1}: its own loss term plus everything later.
        let z = roll.states.row(t + 1);
        let resid: Vec<T> = om
            .observe(z)
            .iter()
            .zip(segment.row(t + 1))
            .map(|(&p, &x)| (x - p) * scale)
            .collect();
        g.fill(T::zero());
        om.b().tmatvec_acc(&resid, &mut g);
        for i in 0..m {
            g[i] += carry[i];
        }
        model.vjp(roll.inputs.row(t), &g, &mut grad, &mut gs);
        let pass = roll.pass.row(t);
        for i in 0..m {
            carry[i] = pass[i] * gs[i];
        }
        future.row_mut(t).copy_from_slice(&carry);
    }
    future.row_mut(0).fill(T::zero());
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training gradient".into()));
    }
    Ok(SegmentGradient {
        loss: roll.loss,
        grad,
        future_cotangents: future,
    })
}

/// Largest singular value over the step Jacobians `∂F/∂s` at the step
/// inputs of a forced roll-out.
pub fn max_step_singular_value<T: Scalar>(
    model: &(impl Trainable<T> + ?Sized),
    om: &ObservationModel<T>,
    segment: &Mat<T>,
    forcing: &Forcing<T>,
) -> Result<T> {
    check_segment(model, om, segment, forcing)?;
    let roll = forward(model, om, segment, forcing);
    let m = model.latent_dim();
    let mut j = Mat::zeros(m, m);
    let mut best = T::zero();
    for t in 0..roll.inputs.rows() {
        model.jacobian_into(roll.inputs.row(t), &mut j);
        best = best.max(spectral_norm(&j));
    }
    Ok(best)
}

/// Spectral norm of the training-time Jacobian product
/// `Π_t ∂z_{t+1}/∂z_t` over a segment rolled out under GTF with strength
/// `alpha`, where each factor is `(1-α) J(s_t)`.
pub fn gtf_jacobian_product_norm<T: Scalar>(
    model: &(impl Trainable<T> + ?Sized),
    om: &ObservationModel<T>,
    segment: &Mat<T>,
    alpha: T,
) -> Result<T> {
    let forcing = Forcing::Generalized { alpha };
    check_segment(model, om, segment, &forcing)?;
    let roll = forward(model, om, segment, &forcing);
    let m = model.latent_dim();
    let keep = T::one() - alpha;
    let mut j = Mat::zeros(m, m);
    let mut prod = Mat::identity(m);
    let mut tmp = Mat::zeros(m, m);
    for t in 0..roll.inputs.rows() {
        model.jacobian_into(roll.inputs.row(t), &mut j);
        crate::linalg::matmul_into(&j, &prod, &mut tmp);
        prod = tmp.scaled(keep);
    }
    Ok(spectral_norm(&prod))
}
