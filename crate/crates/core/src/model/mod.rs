//! Graph featurization, the GINE encoder with sum pooling, the shape and
//! color projection heads, the continuous Tanimoto kernel and the
//! fingerprint MLP baseline.

mod features;
mod kernel;
mod net;

pub use features::{featurize, GraphBatch, GraphFeatures, EDGE_DIM, NODE_DIM};
pub use kernel::{tanimoto_kernel, tanimoto_kernel_matrix, tanimoto_kernel_pair};
pub use net::{EncoderKind, Embedding, Forward, Model, ModelConfig, MolInput, RunningStats, BN_EPS, BN_MOMENTUM};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("input does not match the encoder kind or fingerprint length")]
    WrongInput,
    #[error("checkpoint does not fit the model: {0}")]
    Checkpoint(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molio::{parse_smiles, BitFingerprint};
    use crate::tensor::Tape;

    fn tiny() -> ModelConfig {
        ModelConfig {
            width: 8,
            block_hidden: 16,
            blocks: 2,
            head_hidden: 12,
            out_dim: 6,
            fp_bits: 64,
            fp_hidden: 16,
            ..ModelConfig::small()
        }
    }

    fn embed_one(m: &Model, smiles: &str) -> Embedding {
        let input = m.prepare(&parse_smiles(smiles).unwrap());
        m.embed(&[&input], 1).unwrap().remove(0)
    }

    #[test]
    fn parameter_counts() {
        let m = Model::new(ModelConfig::full(), 0).unwrap();
        let w = 512;
        let block = 4 * w + w + 1 + w * 1024 + 1024 + 2 * 1024 + 1024 * w + w + 2 * w;
        let heads = 2 * (w * 1024 + 1024 + 1024 * 256 + 256);
        assert_eq!(m.param_count(), 26 * w + w + 5 * block + heads);
        let e = Model::new(ModelConfig::full().with_kind(EncoderKind::Ecfp), 0).unwrap();
        assert_eq!(e.param_count(), 2048 * 2048 + 2048 + 2048 * w + w + heads);
    }

    #[test]
    fn output_dims() {
        let m = Model::new(tiny(), 3).unwrap();
        let e = embed_one(&m, "CCO");
        assert_eq!((e.h.len(), e.z_shape.len(), e.z_color.len()), (8, 6, 6));
        assert!(e.h.iter().chain(&e.z_shape).all(|x| x.is_finite()));
    }

    #[test]
    fn permutation_invariant() {
        let m = Model::new(tiny(), 5).unwrap();
        let g = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let base = m.encode(&m.prepare(&g)).unwrap();
        let n = g.atom_count();
        let order: Vec<usize> = (0..n).rev().collect();
        let p = m.encode(&m.prepare(&g.permuted(&order).unwrap())).unwrap();
        for (a, b) in base.iter().zip(&p) {
            assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn disconnected_duplicate_doubles_h() {
        let m = Model::new(tiny(), 9).unwrap();
        let single = featurize(&parse_smiles("CCN").unwrap());
        let mut double = single.clone();
        double.node_feats.extend_from_slice(&single.node_feats);
        double.edge_feats.extend_from_slice(&single.edge_feats);
        let n = single.n_nodes;
        double.edge_index.extend(single.edge_index.iter().map(|&(s, t)| (s + n, t + n)));
        double.n_nodes = 2 * n;
        let h1 = m.encode(&MolInput::Graph(single)).unwrap();
        let h2 = m.encode(&MolInput::Graph(double)).unwrap();
        for (a, b) in h1.iter().zip(&h2) {
            assert!((2.0 * a - b).abs() <= 1e-5 * b.abs().max(1.0));
        }
    }

    #[test]
    fn zero_weights_give_zero_projections() {
        let mut m = Model::new(tiny(), 1).unwrap();
        m.params.iter_mut().for_each(|p| p.data_mut().fill(0.0));
        let e = embed_one(&m, "c1ccccc1O");
        assert!(e.z_shape.iter().chain(&e.z_color).all(|&x| x == 0.0));
        let (zs, zc) = m.project(&[0.3; 8]).unwrap();
        assert!(zs.iter().chain(&zc).all(|&x| x == 0.0));
    }

    #[test]
    fn heads_are_independent() {
        let mut m = Model::new(tiny(), 2).unwrap();
        let h = [0.5, -0.1, 0.2, 1.0, 0.0, 0.3, -0.7, 0.9];
        let (zs, zc) = m.project(&h).unwrap();
        for (name, p) in m.names.iter().zip(m.params.iter_mut()) {
            if name.starts_with("shape_head") {
                p.data_mut().iter_mut().for_each(|x| *x += 0.25);
            }
        }
        let (zs2, zc2) = m.project(&h).unwrap();
        assert_eq!(zc, zc2);
        assert_ne!(zs, zs2);
    }

    #[test]
    fn baseline_encoder() {
        let mut m = Model::new(tiny().with_kind(EncoderKind::Ecfp), 4).unwrap();
        let a = m.prepare(&parse_smiles("CCOC").unwrap());
        let b = m.prepare(&parse_smiles("COCC").unwrap());
        assert_eq!(m.encode(&a).unwrap(), m.encode(&b).unwrap());
        assert_eq!(m.encode(&a).unwrap().len(), 8);
        for (name, p) in m.names.iter().zip(m.params.iter_mut()) {
            if name.ends_with(".b") {
                p.data_mut().fill(0.0);
            }
        }
        let zero = MolInput::Fingerprint(BitFingerprint::new(64, 2));
        assert!(m.encode(&zero).unwrap().iter().all(|&x| x == 0.0));
        let wrong = MolInput::Fingerprint(BitFingerprint::new(128, 2));
        assert!(matches!(m.encode(&wrong), Err(ModelError::WrongInput)));
        let graph = MolInput::Graph(featurize(&parse_smiles("C").unwrap()));
        assert!(matches!(m.encode(&graph), Err(ModelError::WrongInput)));
    }

    #[test]
    fn train_mode_updates_running_stats() {
        let mut m = Model::new(tiny(), 6).unwrap();
        let inputs: Vec<MolInput> = ["CCO", "c1ccccc1", "CC(=O)O"]
            .iter()
            .map(|s| m.prepare(&parse_smiles(s).unwrap()))
            .collect();
        let refs: Vec<&MolInput> = inputs.iter().collect();
        let mut tape = Tape::new();
        let vars = m.bind(&mut tape);
        let f = m.forward(&mut tape, &vars, &refs, true).unwrap();
        assert_eq!(f.batch_stats.len(), 4);
        let before = m.running.clone();
        m.update_running(&f.batch_stats);
        assert_ne!(before, m.running);
        let (mean, _, slot) = &f.batch_stats[0];
        assert!((m.running[*slot].mean[0] - 0.1 * mean[0]).abs() < 1e-7);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = Model::new(tiny(), 8).unwrap();
        let ckpt = m.to_checkpoint(serde_json::json!({"epoch": 3}));
        let bytes = ckpt.to_bytes();
        let back = Model::from_checkpoint(&crate::tensor::Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.config, m.config);
        assert_eq!(embed_one(&back, "CCN"), embed_one(&m, "CCN"));
    }
}
