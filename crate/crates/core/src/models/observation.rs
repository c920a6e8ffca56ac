use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{pseudo_inverse, Mat};
use crate::scalar::Scalar;

/// Linear map from latent to observed space, `x = B z`, with its cached
/// pseudo-inverse for state inference `ẑ = B⁺ x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationModel<T> {
    b: Mat<T>,
    b_pinv: Mat<T>,
}

impl<T: Scalar> ObservationModel<T> {
    pub fn new(b: Mat<T>) -> Result<Self> {
        if b.rows() == 0 || b.cols() == 0 {
            return invalid("observation matrix must be non-empty");
        }
        if !b.is_finite() {
            return Err(Error::NonFinite("observation matrix".into()));
        }
        let b_pinv = pseudo_inverse(&b)?;
        Ok(Self { b, b_pinv })
    }

    /// `B = [I_N | 0]`: the first `obs_dim` latent units are read out.
    pub fn identity_prefix(obs_dim: usize, latent_dim: usize) -> Result<Self> {
        if obs_dim > latent_dim {
            return invalid(format!(
                "observation dimension {obs_dim} exceeds latent dimension {latent_dim}"
            ));
        }
        let b = Mat::from_fn(obs_dim, latent_dim, |i, j| if i == j { T::one() } else { T::zero() });
        Self::new(b)
    }

    pub fn b(&self) -> &Mat<T> {
        &self.b
    }

    pub fn b_pinv(&self) -> &Mat<T> {
        &self.b_pinv
    }

    pub fn obs_dim(&self) -> usize {
        self.b.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn observe(&self, z: &[T]) -> Vec<T> {
        self.b.matvec(z)
    }

    pub fn infer_state(&self, x: &[T]) -> Vec<T> {
        self.b_pinv.matvec(x)
    }

    /// Whether `B` is exactly `[I_N | 0]`.
    pub fn is_identity_prefix(&self) -> bool {
        (0..self.b.rows()).all(|i| {
            (0..self.b.cols()).all(|j| self.b[(i, j)] == if i == j { T::one() } else { T::zero() })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_vector_inverse() {
        let om = ObservationModel::new(Mat::from_rows(&[&[1.0, 0.0]])).unwrap();
        assert_eq!(om.infer_state(&[3.0]), vec![3.0, 0.0]);
        assert!(om.is_identity_prefix());
    }

    #[test]
    fn identity_is_exact_inverse() {
        let om = ObservationModel::<f64>::identity_prefix(3, 3).unwrap();
        let z = [1.0, -2.0, 0.5];
        assert_eq!(om.infer_state(&om.observe(&z)), z.to_vec());
    }

    #[test]
    fn orthonormal_rows_project() {
        let s = 0.5f64.sqrt();
        let om = ObservationModel::new(Mat::from_rows(&[&[s, s, 0.0]])).unwrap();
        let z = [1.0, 3.0, 2.0];
        let p = om.infer_state(&om.observe(&z));
        for (got, want) in p.iter().zip([2.0, 2.0, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(!om.is_identity_prefix());
    }

    #[test]
    fn pinv_axioms() {
        let b = Mat::from_rows(&[&[1.0, 2.0, 0.0, -1.0], &[0.5, -1.0, 3.0, 0.0]]);
        let om = ObservationModel::new(b).unwrap();
        let (b, p) = (om.b(), om.b_pinv());
        assert!(b.matmul(p).matmul(b).sub(b).max_abs() < 1e-10);
        assert!(p.matmul(b).matmul(p).sub(p).max_abs() < 1e-10);
    }

    #[test]
    fn rejects_too_many_observations() {
        assert!(ObservationModel::<f64>::identity_prefix(4, 3).is_err());
    }
}
