//! Molecular input: SMILES and SDF parsing, the heavy-atom graph model,
//! Morgan fingerprints and bit-vector Tanimoto similarity.

mod element;
mod fingerprint;
mod graph;
mod rings;
mod sdf;
mod smifile;
mod smiles;

pub use element::Element;
pub use fingerprint::{morgan_fingerprint, tanimoto_2d, BitFingerprint};
pub use graph::{Atom, Bond, BondOrder, MolGraph};
pub use rings::Ring;
pub use sdf::{read_sdf, write_sdf_record, SdfRecord};
pub use smifile::{read_smiles_file, write_smiles_file, SmilesEntry};
pub use smiles::{parse_smiles, to_smiles};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MolError {
    #[error("SMILES syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("valence exceeded on atom {atom} ({element}): {valence} bonds")]
    Valence {
        atom: usize,
        element: &'static str,
        valence: u32,
    },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("SDF format error (line {line}): {msg}")]
    Format { line: usize, msg: String },
    #[error("fingerprint length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MolError {
    fn from(e: std::io::Error) -> Self {
        MolError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, MolError>;
