//! Verifiable dropout.
//!
//! Dropout randomness is derived from a deterministic Ed25519 signature over a
//! hash of the public training context, expanded by a SHA-256 counter-mode
//! PRG into a keep mask, and applied to fixed-point activations with exact
//! integer arithmetic. The resulting mask and output hashes are committed in a
//! [`dropout::Journal`], attested by a pluggable backend, and bundled into a
//! [`protocol::DropoutProof`] that a verifier checks without ever seeing the
//! activations.
//!
//! ```
//! use vdo_core::{attestation, crypto, context::Context, prg::DropoutParams, protocol, quantize};
//!
//! let trainer = crypto::keygen(&[1; 32]).unwrap();
//! let attestor = crypto::keygen(&[2; 32]).unwrap();
//! let ctx = Context::new("mlp", 3, 0, [9; 32], "fc1.dropout").unwrap();
//! let x = quantize::FloatTensor::from_vec(vec![0.25, -1.5, 3.0, 0.0]).unwrap();
//!
//! let (_y, proof) = protocol::run_verifiable_dropout(
//!     &x,
//!     &ctx,
//!     DropoutParams::new(1, 2).unwrap(),
//!     quantize::DEFAULT_SCALE,
//!     &trainer,
//!     attestation::default_backend(),
//!     &attestor,
//! )
//! .unwrap();
//!
//! let verdict = protocol::verify_proof(&proof, &ctx, &trainer.public_key(), &attestor.public_key());
//! assert!(verdict.is_accept());
//! ```

pub mod attestation;
pub mod context;
pub mod crypto;
pub mod dropout;
pub mod error;
pub mod harness;
pub mod prg;
pub mod protocol;
pub mod quantize;
pub mod wire;

pub use error::{Error, Result};
