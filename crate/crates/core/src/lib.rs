//! Finite approximants of countable homogeneous structures that carry a
//! stationary independence relation.
//!
//! The crate covers four concrete classes (graphs with free or complete
//! amalgamation, partial orders, rational metric spaces, and generalized
//! n-gon fragments), canonical amalgamation over a common base, extension
//! towers with automorphism lifting, axiom checking for the independence
//! relations, and the free completion machinery for n-gons.

pub mod amalgam;
pub mod dot;
pub mod error;
pub mod iso;
pub mod json;
pub mod katetov;
pub mod ngon;
pub mod sir;
pub mod structure;

pub use amalgam::{Amalgam, ExtensionType, FactorMap};
pub use error::{Error, Result, Violation};
pub use iso::{CanonicalKey, Embedding, SearchOpts, DEFAULT_SEARCH_BOUND};
pub use katetov::{
    BnfOutcome, KatetovStep, LiftedAutomorphism, SaturateParams, SaturationChain, Tower,
    TowerParams, TypeCatalog,
};
pub use sir::{AxiomReport, SirKind};
pub use structure::{ClassData, ClassTag, Edge, FinStructure, VertexId};
