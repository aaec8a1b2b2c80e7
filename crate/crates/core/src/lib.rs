//! Multiset Transformer: attention over a base set with per-element
//! multiplicities, plus the persistence-diagram pipeline that feeds it
//! graph data (heat kernel signatures, ordinary and extended persistence,
//! DBSCAN compression) and a harness for cross-validated training.

pub mod error;
pub mod numerics;
pub mod multiset;
pub mod attention;
pub mod clustering;
pub mod data;
pub mod harness;
pub mod blocks;
pub mod model;
pub mod topology;

pub use error::{MstError, Result};
pub use multiset::Multiset;
pub use numerics::{Matrix, ParamStore, Tape};
