//! Minimum-bandwidth regenerating (MBR) codes with exact read/download
//! accounting.
//!
//! The crate implements the product-matrix MBR code and two modifications of
//! it that allow helpers to repair by plain transfer of stored symbols in
//! restricted situations:
//!
//! - [`CodeVariant::C1`] stores `ψᵢᵀ M Ψ₀`; any of the first `d` nodes is
//!   repaired from any `d` helpers by transfer.
//! - [`CodeVariant::C2`] stores `ψᵢᵀ M [ψ_{i⊕1} … ψ_{i⊕d}]`; every node has a
//!   designated helper set `{i⊖d, …, i⊖1}` that repairs it by transfer.
//! - [`CodeVariant::CompleteGraph`] is the `d = n − 1` code that repairs any
//!   node by transfer from all others.
//!
//! All variants download exactly `beta` symbols per helper. The
//! [`search`] module enumerates transfer schedules of concrete code instances
//! and confirms that no implemented variant repairs every node from every
//! helper set by transfer when `d ≠ n − 1`.

pub mod block;
pub mod code;
pub mod error;
pub mod field;
pub mod harness;
pub mod matrix;
pub mod pm;
pub mod recovery;
pub mod search;
pub mod variants;

pub use code::{Code, RepairMode};
pub use error::{Error, Result};
pub use field::{FieldElement, FieldSpec};
pub use matrix::Matrix;
pub use pm::{EncodingVectors, MessageMatrix, SystemParams};
pub use recovery::{HelperResponse, RepairMetrics};
pub use variants::{CodeVariant, NodeContent, NodeTransform};
