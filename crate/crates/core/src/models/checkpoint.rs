use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AlRnn, Model, ModelFamily, ObservationModel, Reservoir, ShPlrnn};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "dsr-model";
const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing JSON document holding a model and its observation
/// matrix. Arrays are flattened row-major and stored as `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub family: ModelFamily,
    pub dims: BTreeMap<String, usize>,
    pub arrays: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub scalars: BTreeMap<String, f64>,
    pub seed: u64,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

fn flat<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

impl Checkpoint {
    pub fn from_model<T: Scalar>(
        model: &Model<T>,
        om: &ObservationModel<T>,
        seed: u64,
        metadata: BTreeMap<String, serde_json::Value>,
    ) -> Self {
        let mut dims = BTreeMap::new();
        let mut arrays = BTreeMap::new();
        let mut scalars = BTreeMap::new();
        dims.insert("obs_dim".to_string(), om.obs_dim());
        dims.insert("latent_dim".to_string(), model.latent_dim());
        arrays.insert("B".to_string(), flat(om.b().as_slice()));
        match model {
            Model::AlRnn(m) => {
                dims.insert("relu_units".into(), m.relu_units);
                arrays.insert("A".into(), flat(&m.a));
                arrays.insert("W".into(), flat(m.w.as_slice()));
                arrays.insert("h".into(), flat(&m.h));
            }
            Model::ShPlrnn(m) => {
                dims.insert("hidden_dim".into(), m.hidden_dim());
                arrays.insert("A".into(), flat(&m.a));
                arrays.insert("W1".into(), flat(m.w1.as_slice()));
                arrays.insert("W2".into(), flat(m.w2.as_slice()));
                arrays.insert("h1".into(), flat(&m.h1));
                arrays.insert("h2".into(), flat(&m.h2));
            }
            Model::Reservoir(m) => {
                dims.insert("input_dim".into(), m.input_dim());
                arrays.insert("W".into(), flat(m.w.as_slice()));
                arrays.insert("W_in".into(), flat(m.w_in.as_slice()));
                arrays.insert("b".into(), flat(&m.b));
                arrays.insert("W_out".into(), flat(m.w_out.as_slice()));
                scalars.insert("alpha".into(), m.alpha.as_f64());
                scalars.insert("spectral_radius_target".into(), m.spectral_radius_target.as_f64());
            }
        }
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            family: model.family(),
            dims,
            arrays,
            scalars,
            seed,
            metadata,
        }
    }

    fn dim(&self, name: &str) -> Result<usize> {
        self.dims
            .get(name)
            .copied()
            .ok_or_else(|| Error::Checkpoint(format!("missing dimension '{name}'")))
    }

    fn scalar<T: Scalar>(&self, name: &str) -> Result<T> {
        self.scalars
            .get(name)
            .map(|&v| T::lit(v))
            .ok_or_else(|| Error::Checkpoint(format!("missing scalar '{name}'")))
    }

    fn vector<T: Scalar>(&self, name: &str, len: usize) -> Result<Vec<T>> {
        let v = self
            .arrays
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array '{name}'")))?;
        if v.len() != len {
            return Err(Error::Checkpoint(format!(
                "array '{name}' has {} entries, expected {len}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Checkpoint(format!("array '{name}' contains non-finite values")));
        }
        Ok(v.iter().map(|&x| T::lit(x)).collect())
    }

    fn matrix<T: Scalar>(&self, name: &str, rows: usize, cols: usize) -> Result<Mat<T>> {
        Mat::from_row_major(rows, cols, self.vector(name, rows * cols)?)
    }

    /// Rebuilds the model and observation model, validating every shape.
    pub fn to_model<T: Scalar>(&self) -> Result<(Model<T>, ObservationModel<T>)> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format '{}'", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        let m = self.dim("latent_dim")?;
        let n = self.dim("obs_dim")?;
        let om = ObservationModel::new(self.matrix("B", n, m)?)?;
        let model = match self.family {
            ModelFamily::AlRnn => Model::AlRnn(AlRnn::new(
                self.vector("A", m)?,
                self.matrix("W", m, m)?,
                self.vector("h", m)?,
                self.dim("relu_units")?,
            )?),
            ModelFamily::ShPlrnn => {
                let h = self.dim("hidden_dim")?;
                Model::ShPlrnn(ShPlrnn::new(
                    self.vector("A", m)?,
                    self.matrix("W1", m, h)?,
                    self.matrix("W2", h, m)?,
                    self.vector("h1", m)?,
                    self.vector("h2", h)?,
                )?)
            }
            ModelFamily::Reservoir => {
                let k = self.dim("input_dim")?;
                Model::Reservoir(Reservoir::new(
                    self.scalar("alpha")?,
                    self.matrix("W", m, m)?,
                    self.matrix("W_in", m, k)?,
                    self.vector("b", m)?,
                    self.matrix("W_out", k, m)?,
                    self.scalar("spectral_radius_target")?,
                )?)
            }
        };
        Ok((model, om))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_model, InitScheme, ModelSpec};

    #[test]
    fn round_trip_is_bit_exact() {
        for spec in [
            ModelSpec::al_rnn(6, 2, 3),
            ModelSpec::sh_plrnn(3, 8, 3),
            ModelSpec::reservoir(30, 3),
        ] {
            let model: Model<f64> = init_model(&spec, 9, &InitScheme::default()).unwrap();
            let om = ObservationModel::identity_prefix(3, spec.latent_dim).unwrap();
            let mut meta = BTreeMap::new();
            meta.insert("note".to_string(), serde_json::json!("unit test"));
            let ck = Checkpoint::from_model(&model, &om, 9, meta);
            let text = ck.to_json().unwrap();
            let back = Checkpoint::from_json(&text).unwrap();
            assert_eq!(back, ck);
            let (m2, om2) = back.to_model::<f64>().unwrap();
            assert_eq!(m2, model);
            assert_eq!(om2.b(), om.b());
        }
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let model: Model<f64> = init_model(&ModelSpec::al_rnn(4, 1, 2), 1, &InitScheme::default()).unwrap();
        let om = ObservationModel::identity_prefix(2, 4).unwrap();
        let mut ck = Checkpoint::from_model(&model, &om, 1, BTreeMap::new());
        ck.arrays.get_mut("W").unwrap().pop();
        assert!(matches!(ck.to_model::<f64>(), Err(Error::Checkpoint(_))));
        let mut ck = Checkpoint::from_model(&model, &om, 1, BTreeMap::new());
        ck.format = "other".into();
        assert!(ck.to_model::<f64>().is_err());
        assert!(Checkpoint::from_json("{not json").is_err());
    }
}
