use std::path::Path;

use lop_tensor::{Checkpoint, ParamStore};

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::model::Model;

const KIND: &str = "lop-model";

impl Model<f32> {
    fn bn_name(layer: usize, edge: bool) -> String {
        format!("enc.layer{layer}.{}", if edge { "bn_edge" } else { "bn_node" })
    }

    /// Parameters, batch-norm statistics and (optionally) optimizer state.
    /// The configuration is stored under `meta.model_config`.
    pub fn to_checkpoint(&self, optimizer: bool) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(serde_json::json!({
            "kind": KIND,
            "model_config": self.config,
        }));
        ck.put_params(&self.params, optimizer)?;
        for (l, n) in self.norms.iter().enumerate() {
            ck.put_batch_norm(&Self::bn_name(l, false), &n.node)?;
            ck.put_batch_norm(&Self::bn_name(l, true), &n.edge)?;
        }
        Ok(ck)
    }

    pub fn config_in(ck: &Checkpoint) -> Result<ModelConfig> {
        if ck.meta.get("kind").and_then(|k| k.as_str()) != Some(KIND) {
            return Err(ModelError::Incompatible("checkpoint does not hold a model".into()));
        }
        serde_json::from_value(ck.meta["model_config"].clone())
            .map_err(|e| ModelError::Incompatible(format!("unreadable model config: {e}")))
    }

    /// Rebuilds a model from a checkpoint written by [`Model::to_checkpoint`].
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config = Self::config_in(ck)?;
        let mut model = Model::new(config, 0)?;
        model.load_checkpoint(ck)?;
        Ok(model)
    }

    /// Loads weights into this model. Fails without modifying anything when
    /// the stored architecture differs.
    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        let stored = Self::config_in(ck)?;
        if !stored.same_architecture(&self.config) {
            return Err(ModelError::Incompatible(format!(
                "checkpoint has d={}, L={}, M={}; model has d={}, L={}, M={}",
                stored.d, stored.layers, stored.heads, self.config.d, self.config.layers, self.config.heads
            )));
        }
        let mut params: ParamStore<f32> = self.params.clone();
        ck.load_params(&mut params)?;
        let mut norms = self.norms.clone();
        for (l, n) in norms.iter_mut().enumerate() {
            ck.load_batch_norm(&Self::bn_name(l, false), &mut n.node)?;
            ck.load_batch_norm(&Self::bn_name(l, true), &mut n.edge)?;
        }
        self.params = params;
        self.norms = norms;
        self.config = stored;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(self.to_checkpoint(true)?.save(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

