use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{featurize, GraphBatch, GraphFeatures, EDGE_DIM, NODE_DIM};
use super::ModelError;
use crate::molio::{morgan_fingerprint, BitFingerprint, MolGraph};
use crate::tensor::{xavier_uniform, Checkpoint, Tape, Tensor, Var};

pub const BN_EPS: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// GINE message passing over the molecular graph.
    Gnn,
    /// MLP over a Morgan fingerprint.
    Ecfp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: EncoderKind,
    /// embedding width `h`
    pub width: usize,
    /// hidden width of the MLP inside each block
    pub block_hidden: usize,
    pub blocks: usize,
    pub head_hidden: usize,
    pub out_dim: usize,
    pub fp_bits: usize,
    pub fp_radius: u32,
    pub fp_hidden: usize,
}

impl ModelConfig {
    pub fn full() -> Self {
        ModelConfig {
            kind: EncoderKind::Gnn,
            width: 512,
            block_hidden: 1024,
            blocks: 5,
            head_hidden: 1024,
            out_dim: 256,
            fp_bits: 2048,
            fp_radius: 2,
            fp_hidden: 2048,
        }
    }

    /// The 64-wide, 3-block variant.
    pub fn small() -> Self {
        ModelConfig {
            kind: EncoderKind::Gnn,
            width: 64,
            block_hidden: 128,
            blocks: 3,
            head_hidden: 128,
            out_dim: 32,
            fp_bits: 2048,
            fp_radius: 2,
            fp_hidden: 128,
        }
    }

    pub fn with_kind(mut self, kind: EncoderKind) -> Self {
        self.kind = kind;
        self
    }

    fn validate(&self) -> Result<(), ModelError> {
        let dims = [self.width, self.head_hidden, self.out_dim];
        if dims.contains(&0) {
            return Err(ModelError::InvalidConfig("zero-sized layer".into()));
        }
        match self.kind {
            EncoderKind::Gnn if self.block_hidden == 0 => Err(ModelError::InvalidConfig("zero-sized layer".into())),
            EncoderKind::Ecfp if self.fp_hidden == 0 || !self.fp_bits.is_power_of_two() => {
                Err(ModelError::InvalidConfig("fingerprint size must be a power of two".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A molecule ready for the encoder.
#[derive(Debug, Clone)]
pub enum MolInput {
    Graph(GraphFeatures),
    Fingerprint(BitFingerprint),
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gamma: usize,
    beta: usize,
    /// slot in `Model::running`
    stats: usize,
}

#[derive(Debug, Clone)]
struct Block {
    edge: Linear,
    eps: usize,
    mlp1: Linear,
    bn1: Norm,
    mlp2: Linear,
    bn_out: Norm,
}

#[derive(Debug, Clone)]
enum Encoder {
    Gnn { input: Linear, blocks: Vec<Block> },
    Ecfp { l1: Linear, l2: Linear },
}

#[derive(Debug, Clone, Copy)]
struct Head {
    l1: Linear,
    l2: Linear,
}

/// Running batch-norm statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
}

/// Encoder plus shape and color projection heads.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub names: Vec<String>,
    pub params: Vec<Tensor<f32>>,
    pub running: Vec<RunningStats>,
    encoder: Encoder,
    shape_head: Head,
    color_head: Head,
}

/// Tape nodes produced by [`Model::forward`].
#[derive(Debug)]
pub struct Forward {
    pub h: Var,
    pub z_shape: Var,
    pub z_color: Var,
    /// batch mean/variance per norm layer (training mode only)
    pub batch_stats: Vec<(Vec<f32>, Vec<f32>, usize)>,
}

/// Embeddings of one molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub h: Vec<f32>,
    pub z_shape: Vec<f32>,
    pub z_color: Vec<f32>,
}

struct Builder<'a> {
    names: Vec<String>,
    params: Vec<Tensor<f32>>,
    running: Vec<RunningStats>,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn push(&mut self, name: String, t: Tensor<f32>) -> usize {
        self.names.push(name);
        self.params.push(t);
        self.params.len() - 1
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        let w = xavier_uniform(fan_in, fan_out, self.rng);
        Linear {
            w: self.push(format!("{name}.w"), w),
            b: self.push(format!("{name}.b"), Tensor::zeros(1, fan_out)),
        }
    }

    fn norm(&mut self, name: &str, width: usize) -> Norm {
        self.running.push(RunningStats {
            mean: vec![0.0; width],
            var: vec![1.0; width],
        });
        Norm {
            gamma: self.push(format!("{name}.gamma"), Tensor::full(1, width, 1.0)),
            beta: self.push(format!("{name}.beta"), Tensor::zeros(1, width)),
            stats: self.running.len() - 1,
        }
    }

    fn head(&mut self, name: &str, c: &ModelConfig) -> Head {
        Head {
            l1: self.linear(&format!("{name}.l1"), c.width, c.head_hidden),
            l2: self.linear(&format!("{name}.l2"), c.head_hidden, c.out_dim),
        }
    }
}

impl Model {
    /// Xavier-uniform weights, zero biases, unit norm scales; ε starts at 0.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Builder {
            names: Vec::new(),
            params: Vec::new(),
            running: Vec::new(),
            rng: &mut rng,
        };
        let encoder = match config.kind {
            EncoderKind::Gnn => {
                let input = b.linear("input", NODE_DIM, config.width);
                let blocks = (0..config.blocks)
                    .map(|k| Block {
                        edge: b.linear(&format!("block{k}.edge"), EDGE_DIM, config.width),
                        eps: b.push(format!("block{k}.eps"), Tensor::scalar(0.0)),
                        mlp1: b.linear(&format!("block{k}.mlp1"), config.width, config.block_hidden),
                        bn1: b.norm(&format!("block{k}.bn1"), config.block_hidden),
                        mlp2: b.linear(&format!("block{k}.mlp2"), config.block_hidden, config.width),
                        bn_out: b.norm(&format!("block{k}.bn_out"), config.width),
                    })
                    .collect();
                Encoder::Gnn { input, blocks }
            }
            EncoderKind::Ecfp => Encoder::Ecfp {
                l1: b.linear("fp.l1", config.fp_bits, config.fp_hidden),
                l2: b.linear("fp.l2", config.fp_hidden, config.width),
            },
        };
        let shape_head = b.head("shape_head", &config);
        let color_head = b.head("color_head", &config);
        let (names, params, running) = (b.names, b.params, b.running);
        Ok(Model {
            config,
            names,
            params,
            running,
            encoder,
            shape_head,
            color_head,
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    /// Featurize a molecule for this model's encoder.
    pub fn prepare(&self, graph: &MolGraph) -> MolInput {
        match self.config.kind {
            EncoderKind::Gnn => MolInput::Graph(featurize(graph)),
            EncoderKind::Ecfp => MolInput::Fingerprint(morgan_fingerprint(
                graph,
                self.config.fp_radius,
                self.config.fp_bits,
            )),
        }
    }

    /// Register every parameter on the tape, in `self.params` order.
    pub fn bind(&self, tape: &mut Tape<f32>) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(p.clone())).collect()
    }

    /// Forward pass over a batch. `train` selects batch statistics for the
    /// norm layers; otherwise the running statistics are used.
    pub fn forward(
        &self,
        tape: &mut Tape<f32>,
        vars: &[Var],
        inputs: &[&MolInput],
        train: bool,
    ) -> Result<Forward, ModelError> {
        let mut batch_stats = Vec::new();
        let h = match &self.encoder {
            Encoder::Gnn { input, blocks } => {
                let graphs = inputs
                    .iter()
                    .map(|m| match m {
                        MolInput::Graph(g) => Ok(g),
                        MolInput::Fingerprint(_) => Err(ModelError::WrongInput),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let batch = GraphBatch::new(&graphs);
                self.encode_graphs(tape, vars, input, blocks, &batch, train, &mut batch_stats)?
            }
            Encoder::Ecfp { l1, l2 } => {
                let bits = self.config.fp_bits;
                let mut dense = Vec::with_capacity(inputs.len() * bits);
                for m in inputs {
                    match m {
                        MolInput::Fingerprint(fp) if fp.nbits() == bits => dense.extend(fp.to_dense()),
                        _ => return Err(ModelError::WrongInput),
                    }
                }
                let x = tape.constant(Tensor::matrix(inputs.len(), bits, dense)?);
                let a = linear(tape, vars, *l1, x)?;
                let a = tape.relu(a);
                linear(tape, vars, *l2, a)?
            }
        };
        let z_shape = head(tape, vars, self.shape_head, h)?;
        let z_color = head(tape, vars, self.color_head, h)?;
        Ok(Forward {
            h,
            z_shape,
            z_color,
            batch_stats,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn encode_graphs(
        &self,
        tape: &mut Tape<f32>,
        vars: &[Var],
        input: &Linear,
        blocks: &[Block],
        batch: &GraphBatch,
        train: bool,
        stats: &mut Vec<(Vec<f32>, Vec<f32>, usize)>,
    ) -> Result<Var, ModelError> {
        let n = batch.nodes.rows();
        let x = tape.constant(batch.nodes.clone());
        let e = tape.constant(batch.edges.clone());
        let mut v = linear(tape, vars, *input, x)?;
        for blk in blocks {
            let edge_emb = linear(tape, vars, blk.edge, e)?;
            let from = tape.gather(v, Rc::clone(&batch.src))?;
            let msg = tape.add(from, edge_emb)?;
            let msg = tape.relu(msg);
            let agg = tape.scatter_add(msg, Rc::clone(&batch.dst), n)?;
            // (1 + ε)·v
            let ev = tape.mul_scalar(v, vars[blk.eps])?;
            let self_term = tape.add(v, ev)?;
            let m = tape.add(self_term, agg)?;
            let a = linear(tape, vars, blk.mlp1, m)?;
            let a = self.norm(tape, vars, blk.bn1, a, train, stats)?;
            let a = tape.relu(a);
            let a = linear(tape, vars, blk.mlp2, a)?;
            let a = self.norm(tape, vars, blk.bn_out, a, train, stats)?;
            v = tape.relu(a);
        }
        Ok(tape.scatter_add(v, Rc::clone(&batch.graph_of_node), batch.n_graphs)?)
    }

    fn norm(
        &self,
        tape: &mut Tape<f32>,
        vars: &[Var],
        bn: Norm,
        x: Var,
        train: bool,
        stats: &mut Vec<(Vec<f32>, Vec<f32>, usize)>,
    ) -> Result<Var, ModelError> {
        let (g, b) = (vars[bn.gamma], vars[bn.beta]);
        if train && tape.value(x).rows() > 0 {
            let rows = tape.value(x).rows();
            let (y, mean, var) = tape.batchnorm_train(x, g, b, BN_EPS)?;
            // running variance tracks the unbiased estimate
            let correction = if rows > 1 { rows as f32 / (rows - 1) as f32 } else { 1.0 };
            let var = var.into_iter().map(|s| s * correction).collect();
            stats.push((mean, var, bn.stats));
            Ok(y)
        } else {
            let rs = &self.running[bn.stats];
            Ok(tape.batchnorm_eval(x, g, b, &rs.mean, &rs.var, BN_EPS)?)
        }
    }

    /// Fold one batch's statistics into the running averages.
    pub fn update_running(&mut self, batch_stats: &[(Vec<f32>, Vec<f32>, usize)]) {
        for (mean, var, slot) in batch_stats {
            let rs = &mut self.running[*slot];
            for (r, &m) in rs.mean.iter_mut().zip(mean) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
            }
            for (r, &s) in rs.var.iter_mut().zip(var) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * s;
            }
        }
    }

    /// Inference-mode embeddings, one per input, in batches of `batch`.
    pub fn embed(&self, inputs: &[&MolInput], batch: usize) -> Result<Vec<Embedding>, ModelError> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(batch.max(1)) {
            let mut tape = Tape::new();
            let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
            let f = self.forward(&mut tape, &vars, chunk, false)?;
            let (h, zs, zc) = (tape.value(f.h), tape.value(f.z_shape), tape.value(f.z_color));
            for i in 0..chunk.len() {
                out.push(Embedding {
                    h: h.row_slice(i).to_vec(),
                    z_shape: zs.row_slice(i).to_vec(),
                    z_color: zc.row_slice(i).to_vec(),
                });
            }
        }
        Ok(out)
    }

    /// Encoder output `h` of a single molecule (inference mode).
    pub fn encode(&self, input: &MolInput) -> Result<Vec<f32>, ModelError> {
        Ok(self.embed(&[input], 1)?.remove(0).h)
    }

    /// Both heads applied to an encoder output.
    pub fn project(&self, h: &[f32]) -> Result<(Vec<f32>, Vec<f32>), ModelError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let x = tape.constant(Tensor::row(h.to_vec()));
        let zs = head(&mut tape, &vars, self.shape_head, x)?;
        let zc = head(&mut tape, &vars, self.color_head, x)?;
        Ok((tape.value(zs).data().to_vec(), tape.value(zc).data().to_vec()))
    }

    pub fn to_checkpoint(&self, mut meta: serde_json::Value) -> Checkpoint {
        let mut tensors: Vec<(String, Tensor<f32>)> =
            self.names.iter().cloned().zip(self.params.iter().cloned()).collect();
        for (k, rs) in self.running.iter().enumerate() {
            tensors.push((format!("running.{k}.mean"), Tensor::row(rs.mean.clone())));
            tensors.push((format!("running.{k}.var"), Tensor::row(rs.var.clone())));
        }
        if let Some(obj) = meta.as_object_mut() {
            obj.insert("model".into(), serde_json::to_value(&self.config).expect("config serializes"));
        } else {
            meta = serde_json::json!({ "model": self.config });
        }
        Checkpoint { tensors, meta }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, ModelError> {
        let config: ModelConfig = serde_json::from_value(ckpt.meta.get("model").cloned().unwrap_or_default())
            .map_err(|e| ModelError::Checkpoint(format!("model config: {e}")))?;
        let mut model = Model::new(config, 0)?;
        for (name, p) in model.names.iter().zip(model.params.iter_mut()) {
            let t = ckpt
                .get(name)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing tensor {name}")))?;
            if t.shape() != p.shape() {
                return Err(ModelError::Checkpoint(format!(
                    "{name}: shape {:?}, expected {:?}",
                    t.shape(),
                    p.shape()
                )));
            }
            *p = t.clone();
        }
        for (k, rs) in model.running.iter_mut().enumerate() {
            for (field, dst) in [("mean", &mut rs.mean), ("var", &mut rs.var)] {
                let name = format!("running.{k}.{field}");
                let t = ckpt
                    .get(&name)
                    .ok_or_else(|| ModelError::Checkpoint(format!("missing tensor {name}")))?;
                if t.len() != dst.len() {
                    return Err(ModelError::Checkpoint(format!("{name}: wrong length")));
                }
                dst.copy_from_slice(t.data());
            }
        }
        Ok(model)
    }
}

fn linear(tape: &mut Tape<f32>, vars: &[Var], l: Linear, x: Var) -> Result<Var, ModelError> {
    let y = tape.matmul(x, vars[l.w])?;
    Ok(tape.add(y, vars[l.b])?)
}

fn head(tape: &mut Tape<f32>, vars: &[Var], h: Head, x: Var) -> Result<Var, ModelError> {
    let a = linear(tape, vars, h.l1, x)?;
    let a = tape.relu(a);
    linear(tape, vars, h.l2, a)
}
