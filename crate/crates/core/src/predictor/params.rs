use std::collections::BTreeMap;

use sardiff_tensor::{Scalar, Tensor};

use super::config::PredictorConfig;
use super::network::layout;
use crate::error::{Error, Result};

/// Named learnable tensors of the noise predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams<S: Scalar = f32> {
    tensors: BTreeMap<String, Tensor<S>>,
}

impl<S: Scalar> PredictorParams<S> {
    pub fn from_map(tensors: BTreeMap<String, Tensor<S>>) -> Self {
        Self { tensors }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.tensors.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<S>)> {
        self.tensors.iter()
    }

    /// Number of named tensors.
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalars across all tensors.
    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn as_map(&self) -> &BTreeMap<String, Tensor<S>> {
        &self.tensors
    }

    pub fn as_map_mut(&mut self) -> &mut BTreeMap<String, Tensor<S>> {
        &mut self.tensors
    }

    pub fn into_map(self) -> BTreeMap<String, Tensor<S>> {
        self.tensors
    }

    pub fn cast<T: Scalar>(&self) -> PredictorParams<T> {
        PredictorParams { tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect() }
    }

    /// Checks that names and shapes are exactly the slots `cfg` defines.
    pub fn check_against(&self, cfg: &PredictorConfig) -> Result<()> {
        let slots = layout(cfg);
        if slots.len() != self.tensors.len() {
            return Err(Error::Config(format!("config defines {} tensors, parameter set has {}", slots.len(), self.tensors.len())));
        }
        for slot in slots {
            match self.tensors.get(&slot.name) {
                None => return Err(Error::Config(format!("missing parameter `{}`", slot.name))),
                Some(t) if t.shape() != slot.shape.as_slice() => {
                    return Err(Error::Config(format!("parameter `{}` has shape {:?}, config expects {:?}", slot.name, t.shape(), slot.shape)));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}
