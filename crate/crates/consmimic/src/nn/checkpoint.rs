//! Flat checkpoint container: named parameter arrays serialized as JSON.
//!
//! Every entry is `name -> { shape, row-major data }`. Values are written
//! with shortest round-trip decimal formatting, so save/load is bit-exact
//! for finite `f64` values (non-finite values are rejected on save).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "consmimic-checkpoint-v1";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NamedArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub format: String,
    pub arrays: BTreeMap<String, NamedArray>,
}

impl Default for Checkpoint {
    fn default() -> Self {
        Self::new()
    }
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            arrays: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: String, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.arrays.insert(name, NamedArray { shape, data });
    }

    pub fn insert_scalar(&mut self, name: &str, value: f64) {
        self.insert(name.to_string(), vec![1], vec![value]);
    }

    pub fn get(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array `{name}`")))
    }

    pub fn get_scalar(&self, name: &str) -> Result<f64> {
        let a = self.get(name)?;
        if a.data.len() != 1 {
            return Err(Error::Checkpoint(format!(
                "array `{name}` is not a scalar (len {})",
                a.data.len()
            )));
        }
        Ok(a.data[0])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        for (name, a) in &self.arrays {
            if a.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!(
                    "array `{name}` contains non-finite values"
                )));
            }
            if a.shape.iter().product::<usize>() != a.data.len() {
                return Err(Error::Checkpoint(format!(
                    "array `{name}`: shape {:?} does not match {} values",
                    a.shape,
                    a.data.len()
                )));
            }
        }
        let json = serde_json::to_string(self)
            .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("parse {}: {e}", path.display())))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint format `{}`",
                ckpt.format
            )));
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Mlp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::new(&[4, 16, 2], Activation::Elu, 0.01, &mut rng).unwrap();
        let mut ckpt = Checkpoint::new();
        net.write_checkpoint(&mut ckpt, "policy.mean");
        ckpt.insert_scalar("lagrangian.lambda", -0.1234567890123456789);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(ckpt, loaded);

        let mut rng2 = ChaCha8Rng::seed_from_u64(12);
        let mut net2 = Mlp::new(&[4, 16, 2], Activation::Elu, 0.01, &mut rng2).unwrap();
        net2.read_checkpoint(&loaded, "policy.mean").unwrap();
        let x = [0.25, -1.5, 3.0, 0.0];
        assert_eq!(net.forward(&x).unwrap(), net2.forward(&x).unwrap());
    }

    #[test]
    fn save_rejects_non_finite() {
        let mut ckpt = Checkpoint::new();
        ckpt.insert_scalar("bad", f64::NAN);
        let dir = tempfile::tempdir().unwrap();
        assert!(ckpt.save(&dir.path().join("x.json")).is_err());
    }

    #[test]
    fn shape_mismatch_on_load_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::new(&[3, 4, 1], Activation::Elu, 1.0, &mut rng).unwrap();
        let mut ckpt = Checkpoint::new();
        net.write_checkpoint(&mut ckpt, "critic");
        let mut other = Mlp::new(&[3, 5, 1], Activation::Elu, 1.0, &mut rng).unwrap();
        assert!(other.read_checkpoint(&ckpt, "critic").is_err());
    }
}
