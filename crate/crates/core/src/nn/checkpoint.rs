//! JSON checkpoints: named networks plus named float vectors.

use super::mlp::{Activation, Head, Mlp};
use super::NnError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "barnbench-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpRecord {
    pub dims: Vec<usize>,
    pub activation: Activation,
    pub head: Head,
    pub params: Vec<f64>,
}

impl MlpRecord {
    pub fn from_mlp(net: &Mlp) -> Self {
        Self {
            dims: net.dims().to_vec(),
            activation: net.activation(),
            head: net.head(),
            params: net.params(),
        }
    }

    pub fn to_mlp(&self) -> Result<Mlp, NnError> {
        let mut net = Mlp::new(&self.dims, self.activation, self.head, 0)?;
        net.set_params(&self.params)?;
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(NnError::Checkpoint("non-finite parameter".into()));
        }
        Ok(net)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
    pub networks: BTreeMap<String, MlpRecord>,
    #[serde(default)]
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            ..Self::default()
        }
    }

    pub fn with_network(mut self, name: &str, net: &Mlp) -> Self {
        self.networks.insert(name.into(), MlpRecord::from_mlp(net));
        self
    }

    pub fn with_vector(mut self, name: &str, v: &[f64]) -> Self {
        self.vectors.insert(name.into(), v.to_vec());
        self
    }

    pub fn network(&self, name: &str) -> Result<Mlp, NnError> {
        self.networks
            .get(name)
            .ok_or_else(|| NnError::Checkpoint(format!("missing network `{name}`")))?
            .to_mlp()
    }

    pub fn vector(&self, name: &str) -> Result<&[f64], NnError> {
        self.vectors
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| NnError::Checkpoint(format!("missing vector `{name}`")))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, NnError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(NnError::Checkpoint(format!("format `{}` is not `{CHECKPOINT_FORMAT}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        for (name, rec) in &ck.networks {
            rec.to_mlp()
                .map_err(|e| NnError::Checkpoint(format!("network `{name}`: {e}")))?;
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_json_string()).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_round_trip() {
        let net = Mlp::new(&[7, 16, 4], Activation::Relu, Head::Gaussian, 11).unwrap();
        let ck = Checkpoint::new()
            .with_network("model", &net)
            .with_vector("mean", &[0.1, 1.0 / 3.0, -2e-300]);
        let back = Checkpoint::from_json_str(&ck.to_json_string()).unwrap();
        assert_eq!(back, ck);
        let restored = back.network("model").unwrap();
        assert_eq!(restored.params(), net.params());
        let x = ndarray::Array2::from_elem((2, 7), 0.3);
        assert_eq!(restored.predict(&x).unwrap(), net.predict(&x).unwrap());
    }

    #[test]
    fn rejects_wrong_param_count_and_format() {
        let net = Mlp::new(&[2, 2], Activation::Tanh, Head::Linear, 0).unwrap();
        let mut ck = Checkpoint::new().with_network("a", &net);
        ck.networks.get_mut("a").unwrap().params.pop();
        assert!(Checkpoint::from_json_str(&ck.to_json_string()).is_err());
        let text = Checkpoint::new().to_json_string().replace(CHECKPOINT_FORMAT, "other");
        assert!(Checkpoint::from_json_str(&text).is_err());
        assert!(Checkpoint::from_json_str("{").is_err());
    }
}
