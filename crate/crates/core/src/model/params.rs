use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Aggregator, GinEpsilon, ModelConfig};
use crate::error::{Error, Result};
use crate::kg::{DirectedRelation, RelationKind};
use crate::numerics::{ParamStore, Tensor};

/// Parameter names. Per-layer parameters are prefixed `layer{l}.` with
/// `l` counted from 0.
pub mod names {
    pub const ENTITY: &str = "entity";
    pub const RELATION: &str = "relation";
    pub const GATE_E: &str = "gate.w_e";
    pub const GATE_N: &str = "gate.w_n";
    pub const GATE_T: &str = "gate.w_t";
    pub const GATE_B: &str = "gate.b";
    /// Blocks of the ν transform `W·(e‖n‖t) = V_E·e + V_N·n + V_T·t`.
    pub const GATE_VE: &str = "gate.v_e";
    pub const GATE_VN: &str = "gate.v_n";
    pub const GATE_VT: &str = "gate.v_t";
    pub const ATTENTION: &str = "att.w";
    pub const HEAD_W: &str = "head.w";
    pub const HEAD_B: &str = "head.b";
    pub const CLS_W1: &str = "cls.w1";
    pub const CLS_B1: &str = "cls.b1";
    pub const CLS_W2: &str = "cls.w2";
    pub const CLS_B2: &str = "cls.b2";

    pub fn layer(l: usize, name: &str) -> String {
        format!("layer{l}.{name}")
    }

    pub fn projection(symbol: &str) -> String {
        format!("proj.{symbol}")
    }
}

/// Sizes the parameter shapes depend on besides the model config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub entities: usize,
    pub numeric: usize,
    pub text: usize,
}

/// Every learnable tensor of the model, plus the configuration that
/// determines their shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub dims: Dims,
    pub seed: u64,
    pub store: ParamStore,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    xavier_with_fan(rng, rows, cols, rows)
}

fn xavier_with_fan(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Tensor {
    xavier_scaled(rng, rows, cols, fan_in, 1.0)
}

fn xavier_scaled(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, gain: f64) -> Tensor {
    let a = gain * (6.0 / (fan_in + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
    Tensor::new(vec![rows, cols], data).expect("sized")
}

impl ModelParams {
    /// Seeded initialization: Xavier-uniform matrices and embedding tables,
    /// zero biases and identity relation projections.
    pub fn init(config: &ModelConfig, dims: Dims, seed: u64) -> Result<Self> {
        config.validate()?;
        if dims.entities == 0 {
            return Err(Error::Config("model needs at least one entity".into()));
        }
        let d = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        s.insert(names::ENTITY, xavier(&mut rng, dims.entities, d));
        s.insert(names::RELATION, xavier(&mut rng, DirectedRelation::COUNT, d));
        s.insert(names::GATE_E, xavier(&mut rng, d, d));
        s.insert(names::GATE_N, xavier(&mut rng, dims.numeric, d));
        // text rows are unit-norm, so each coordinate has variance 1/T rather
        // than the unit variance the Xavier bound assumes
        let tg = (dims.text as f64).sqrt();
        s.insert(names::GATE_T, xavier_scaled(&mut rng, dims.text, d, dims.text, tg));
        s.insert(names::GATE_B, Tensor::zeros(&[d]));
        // one Xavier bound for the three blocks of the stacked matrix
        let fan = d + dims.numeric + dims.text;
        s.insert(names::GATE_VE, xavier_with_fan(&mut rng, d, d, fan));
        s.insert(names::GATE_VN, xavier_with_fan(&mut rng, dims.numeric, d, fan));
        s.insert(names::GATE_VT, xavier_scaled(&mut rng, dims.text, d, fan, tg));
        s.insert(names::ATTENTION, xavier(&mut rng, d, d));
        for l in 0..config.layers {
            let p = |n: &str| names::layer(l, n);
            match config.aggregator {
                Aggregator::Gcn => s.insert(p("w"), xavier(&mut rng, d, d)),
                Aggregator::GraphSage => s.insert(p("w"), xavier(&mut rng, 2 * d, d)),
                Aggregator::BiInteraction => {
                    s.insert(p("w1"), xavier(&mut rng, d, d));
                    s.insert(p("w2"), xavier(&mut rng, d, d));
                }
                Aggregator::Gin => {
                    s.insert(p("fc1.w"), xavier(&mut rng, d, d));
                    s.insert(p("fc1.b"), Tensor::zeros(&[d]));
                    s.insert(p("fc2.w"), xavier(&mut rng, d, d));
                    s.insert(p("fc2.b"), Tensor::zeros(&[d]));
                    if let GinEpsilon::Learnable(e) = config.gin_epsilon {
                        s.insert(p("eps"), Tensor::scalar(e));
                    }
                }
            }
            if config.residual_identity {
                s.insert(p("res.w"), xavier(&mut rng, d, d));
            }
        }
        s.insert(names::HEAD_W, xavier(&mut rng, config.layers * d, d));
        s.insert(names::HEAD_B, Tensor::zeros(&[d]));
        for rel in RelationKind::ALL {
            s.insert(names::projection(rel.symbol()), Tensor::identity(d));
        }
        let c = config.classifier_hidden;
        s.insert(names::CLS_W1, xavier(&mut rng, 2 * d, c));
        s.insert(names::CLS_B1, Tensor::zeros(&[c]));
        s.insert(names::CLS_W2, xavier(&mut rng, c, 1));
        s.insert(names::CLS_B2, Tensor::zeros(&[1]));
        Ok(Self { config: config.clone(), dims, seed, store: s })
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.store.get(name).ok_or_else(|| Error::Contract(format!("missing parameter `{name}`")))
    }

    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .store
            .get_mut(name)
            .ok_or_else(|| Error::Contract(format!("missing parameter `{name}`")))?;
        if slot.shape() != value.shape() {
            return Err(Error::Shape(format!(
                "parameter `{name}` has shape {:?}, got {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }

    /// Saves a JSON manifest plus one little-endian f64 blob per tensor.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tensors = Vec::new();
        for (name, t) in self.store.iter() {
            let file = format!("{name}.bin");
            let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
            let path = dir.join(&file);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            tensors.push(TensorEntry { name: name.clone(), shape: t.shape().to_vec(), file });
        }
        let manifest = Manifest { config: self.config.clone(), dims: self.dims, seed: self.seed, tensors };
        let path = dir.join(MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        manifest.config.validate()?;
        let mut store = ParamStore::new();
        for entry in manifest.tensors {
            let path = dir.join(&entry.file);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if bytes.len() % 8 != 0 {
                return Err(Error::Parse(format!("{} is not a whole number of f64 values", path.display())));
            }
            let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            store.insert(entry.name, Tensor::new(entry.shape, data)?);
        }
        Ok(Self { config: manifest.config, dims: manifest.dims, seed: manifest.seed, store })
    }
}

const MANIFEST: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: ModelConfig,
    dims: Dims,
    seed: u64,
    tensors: Vec<TensorEntry>,
}
