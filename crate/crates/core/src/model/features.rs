use std::rc::Rc;

use crate::molio::{BondOrder, MolGraph};
use crate::tensor::Tensor;

/// element (11) + degree 0..=5 (6) + charge −1/0/+1 (3) + aromatic (1) + H 0..=4 (5)
pub const NODE_DIM: usize = 26;
pub const EDGE_DIM: usize = 4;

const DEGREE_OFFSET: usize = 11;
const CHARGE_OFFSET: usize = 17;
const AROMATIC_OFFSET: usize = 20;
const H_OFFSET: usize = 21;

/// Numeric graph encoding. Each bond appears as two directed edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFeatures {
    /// `n × NODE_DIM`, row-major
    pub node_feats: Vec<f32>,
    /// `e × EDGE_DIM`, row-major
    pub edge_feats: Vec<f32>,
    /// directed edges `(source, target)`
    pub edge_index: Vec<(usize, usize)>,
    pub n_nodes: usize,
}

pub fn featurize(graph: &MolGraph) -> GraphFeatures {
    let n = graph.atom_count();
    let mut node_feats = vec![0.0f32; n * NODE_DIM];
    for (i, a) in graph.atoms().iter().enumerate() {
        let row = &mut node_feats[i * NODE_DIM..(i + 1) * NODE_DIM];
        row[a.element.index()] = 1.0;
        let degree = a.degree as usize;
        if degree > 5 {
            log::warn!("{}: atom {i} has degree {degree}; clamped to 5", graph.name);
        }
        row[DEGREE_OFFSET + degree.min(5)] = 1.0;
        if a.formal_charge.abs() > 1 {
            log::warn!("{}: atom {i} has charge {}; clamped", graph.name, a.formal_charge);
        }
        row[CHARGE_OFFSET + (a.formal_charge.clamp(-1, 1) + 1) as usize] = 1.0;
        if a.aromatic {
            row[AROMATIC_OFFSET] = 1.0;
        }
        row[H_OFFSET + (a.h_count as usize).min(4)] = 1.0;
    }
    let mut edge_feats = Vec::with_capacity(graph.bonds().len() * 2 * EDGE_DIM);
    let mut edge_index = Vec::with_capacity(graph.bonds().len() * 2);
    for b in graph.bonds() {
        let slot = match b.order {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        };
        for (s, t) in [(b.begin, b.end), (b.end, b.begin)] {
            let mut one_hot = [0.0f32; EDGE_DIM];
            one_hot[slot] = 1.0;
            edge_feats.extend_from_slice(&one_hot);
            edge_index.push((s, t));
        }
    }
    GraphFeatures {
        node_feats,
        edge_feats,
        edge_index,
        n_nodes: n,
    }
}

/// Several graphs merged into one disjoint union for a forward pass.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub nodes: Tensor<f32>,
    pub edges: Tensor<f32>,
    pub src: Rc<[usize]>,
    pub dst: Rc<[usize]>,
    pub graph_of_node: Rc<[usize]>,
    pub n_graphs: usize,
}

impl GraphBatch {
    pub fn new(graphs: &[&GraphFeatures]) -> Self {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut owner = Vec::new();
        let mut offset = 0;
        for (g, f) in graphs.iter().enumerate() {
            nodes.extend_from_slice(&f.node_feats);
            edges.extend_from_slice(&f.edge_feats);
            for &(s, t) in &f.edge_index {
                src.push(s + offset);
                dst.push(t + offset);
            }
            owner.extend(std::iter::repeat_n(g, f.n_nodes));
            offset += f.n_nodes;
        }
        GraphBatch {
            nodes: Tensor::matrix(offset, NODE_DIM, nodes).unwrap(),
            edges: Tensor::matrix(src.len(), EDGE_DIM, edges).unwrap(),
            src: src.into(),
            dst: dst.into(),
            graph_of_node: owner.into(),
            n_graphs: graphs.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molio::parse_smiles;

    #[test]
    fn methane() {
        let f = featurize(&parse_smiles("C").unwrap());
        assert_eq!(f.n_nodes, 1);
        assert!(f.edge_index.is_empty());
        let hot: Vec<usize> = (0..NODE_DIM).filter(|&k| f.node_feats[k] == 1.0).collect();
        // C, degree 0, neutral, 4 H
        assert_eq!(hot, vec![2, DEGREE_OFFSET, CHARGE_OFFSET + 1, H_OFFSET + 4]);
    }

    #[test]
    fn formaldehyde_edges() {
        let f = featurize(&parse_smiles("C=O").unwrap());
        assert_eq!(f.n_nodes, 2);
        assert_eq!(f.edge_index, vec![(0, 1), (1, 0)]);
        assert_eq!(f.edge_feats, vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn permutation_permutes_rows() {
        let g = parse_smiles("CC(=O)N").unwrap();
        let order = [3, 1, 0, 2];
        let p = g.permuted(&order).unwrap();
        let (f, fp) = (featurize(&g), featurize(&p));
        for (new, &old) in order.iter().enumerate() {
            assert_eq!(
                &fp.node_feats[new * NODE_DIM..(new + 1) * NODE_DIM],
                &f.node_feats[old * NODE_DIM..(old + 1) * NODE_DIM]
            );
        }
    }

    #[test]
    fn batch_offsets() {
        let a = featurize(&parse_smiles("CO").unwrap());
        let b = featurize(&parse_smiles("CCC").unwrap());
        let batch = GraphBatch::new(&[&a, &b]);
        assert_eq!(batch.nodes.shape(), &[5, NODE_DIM]);
        assert_eq!(&*batch.graph_of_node, &[0, 0, 1, 1, 1]);
        assert_eq!(&batch.src[2..], &[2, 3, 3, 4]);
    }
}
