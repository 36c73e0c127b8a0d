//! Conformer ensembles: ingestion, toy generation by idealized embedding with
//! torsion sampling, and inertial descriptors.

mod embed;
mod frame;
mod geometry;

pub use embed::{generate_conformers, rotatable_bonds};
pub use frame::{principal_frame, shape_descriptors, PrincipalFrame, ShapeDescriptors};
pub use geometry::{ideal_bond_length, Hybridization};

use nalgebra::Vector3;
use thiserror::Error;

use crate::molio::{MolGraph, SdfRecord};
use crate::overlay::PharmacophorePoint;

pub type Point = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConformError {
    #[error("unsupported topology in {name}: {reason}")]
    UnsupportedTopology { name: String, reason: String },
    #[error("inconsistent conformer records for {0}")]
    Inconsistent(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One 3D geometry; `coords[i]` belongs to heavy atom `i` of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Conformer {
    pub coords: Vec<Point>,
    /// Pharmacophore points; empty until typed by [`crate::overlay::gaussianize`].
    pub features: Vec<PharmacophorePoint>,
    /// Set when no sample passed the clash filter and this is the least
    /// clashing one.
    pub clash_fallback: bool,
}

impl Conformer {
    pub fn new(coords: Vec<Point>) -> Self {
        Conformer {
            coords,
            features: Vec::new(),
            clash_fallback: false,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Applies `x -> rotation * x + translation` to every coordinate and feature.
    pub fn transformed(&self, rotation: &nalgebra::Matrix3<f64>, translation: &Point) -> Conformer {
        Conformer {
            coords: self.coords.iter().map(|p| rotation * p + translation).collect(),
            features: self
                .features
                .iter()
                .map(|f| PharmacophorePoint {
                    center: rotation * f.center + translation,
                    ..f.clone()
                })
                .collect(),
            clash_fallback: self.clash_fallback,
        }
    }
}

/// A molecule and its sampled conformers (at least one).
#[derive(Debug, Clone)]
pub struct ConformerSet {
    pub graph: MolGraph,
    pub conformers: Vec<Conformer>,
}

impl ConformerSet {
    pub fn name(&self) -> &str {
        &self.graph.name
    }

    pub fn len(&self) -> usize {
        self.conformers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conformers.is_empty()
    }

    /// Groups SDF records by molecule name in order of first appearance,
    /// keeping at most `max_confs` conformers per molecule when given.
    pub fn group(records: Vec<SdfRecord>, max_confs: Option<usize>) -> Result<Vec<ConformerSet>, ConformError> {
        let mut sets: Vec<ConformerSet> = Vec::new();
        let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
        for (graph, conf) in records {
            match index.get(&graph.name) {
                Some(&k) => {
                    let set = &mut sets[k];
                    if set.graph.atom_count() != graph.atom_count()
                        || set.graph.bonds().len() != graph.bonds().len()
                    {
                        return Err(ConformError::Inconsistent(graph.name.clone()));
                    }
                    if max_confs.is_none_or(|m| set.conformers.len() < m) {
                        set.conformers.push(conf);
                    }
                }
                None => {
                    index.insert(graph.name.clone(), sets.len());
                    sets.push(ConformerSet {
                        graph,
                        conformers: vec![conf],
                    });
                }
            }
        }
        Ok(sets)
    }
}
