//! Pluggable attestation backends.
//!
//! A backend takes the private inputs of one dropout invocation (seed,
//! probability and quantized activations) and returns a [`Receipt`] that
//! vouches for the resulting [`Journal`].
//!
//! The only backend shipped here is [`ReexecBackend`] (`"reexec-v1"`): a
//! trusted executor re-runs the transform and signs the canonical journal
//! bytes with an attestor key. It checks every protocol binding a zkVM receipt
//! would, but it is **not** zero-knowledge and **not** trustless: whoever holds
//! the attestor key can attest any journal, and the executor sees the
//! activations in the clear.

use std::fmt;

use crate::crypto::{sign_deterministic, verify_signature, PublicKey, Signature, VrfKeyPair};
use crate::dropout::{apply_quantized_dropout, compute_journal, Journal};
use crate::error::{Error, Result};
use crate::prg::{generate_mask, DropoutParams, KeepMask, Seed};
use crate::quantize::QuantizedTensor;

pub const REEXEC_BACKEND_ID: &str = "reexec-v1";

/// Evidence that a journal came from the dropout computation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Receipt {
    pub backend_id: String,
    pub journal: Journal,
    pub attestation: Vec<u8>,
    pub attestor_pk: PublicKey,
}

impl Receipt {
    /// Size of the backend evidence plus the fixed-width journal.
    pub fn size_bytes(&self) -> usize {
        self.attestation.len() + crate::dropout::JOURNAL_ENCODED_LEN + self.attestor_pk.0.len()
    }
}

/// Private inputs handed to the prover.
#[derive(Clone, Debug)]
pub struct ProverInput {
    pub seed: Seed,
    pub params: DropoutParams,
    pub q: QuantizedTensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReceiptError {
    UnknownBackend,
    BadAttestation,
}

impl fmt::Display for ReceiptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReceiptError::UnknownBackend => "unknown backend",
            ReceiptError::BadAttestation => "attestation does not verify",
        })
    }
}

/// Output of the attested computation.
#[derive(Clone, Debug)]
pub struct Execution {
    pub mask: KeepMask,
    pub output: QuantizedTensor,
    pub journal: Journal,
}

/// Mask generation, integer dropout and journal commitment, in that order.
pub fn execute(input: &ProverInput) -> Result<Execution> {
    let mask = generate_mask(input.seed, input.params, input.q.len());
    let output = apply_quantized_dropout(&input.q, &mask, input.params)?;
    let journal = compute_journal(&mask, &output)?;
    Ok(Execution { mask, output, journal })
}

pub trait AttestationBackend: Send + Sync {
    fn id(&self) -> &'static str;

    fn prove(&self, input: &ProverInput, attestor: &VrfKeyPair) -> Result<Receipt>;

    fn verify(&self, receipt: &Receipt) -> Result<(), ReceiptError>;
}

/// Trusted re-execution plus an Ed25519 signature over the canonical journal.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReexecBackend;

impl AttestationBackend for ReexecBackend {
    fn id(&self) -> &'static str {
        REEXEC_BACKEND_ID
    }

    fn prove(&self, input: &ProverInput, attestor: &VrfKeyPair) -> Result<Receipt> {
        let journal = execute(input)?.journal;
        let sig = sign_deterministic(attestor, &journal.canonical_bytes());
        Ok(Receipt {
            backend_id: REEXEC_BACKEND_ID.to_string(),
            journal,
            attestation: sig.0.to_vec(),
            attestor_pk: attestor.public_key(),
        })
    }

    fn verify(&self, receipt: &Receipt) -> Result<(), ReceiptError> {
        if receipt.backend_id != REEXEC_BACKEND_ID {
            return Err(ReceiptError::UnknownBackend);
        }
        let sig: [u8; 64] = receipt
            .attestation
            .as_slice()
            .try_into()
            .map_err(|_| ReceiptError::BadAttestation)?;
        if verify_signature(
            &receipt.attestor_pk,
            &receipt.journal.canonical_bytes(),
            &Signature(sig),
        ) {
            Ok(())
        } else {
            Err(ReceiptError::BadAttestation)
        }
    }
}

static REEXEC: ReexecBackend = ReexecBackend;

/// Looks up a registered backend by its identifier.
pub fn backend(id: &str) -> Result<&'static dyn AttestationBackend> {
    match id {
        REEXEC_BACKEND_ID => Ok(&REEXEC),
        other => Err(Error::UnknownBackend(other.to_string())),
    }
}

pub fn default_backend() -> &'static dyn AttestationBackend {
    &REEXEC
}

/// Proves with the default backend.
pub fn prove(input: &ProverInput, attestor: &VrfKeyPair) -> Result<Receipt> {
    default_backend().prove(input, attestor)
}

/// Dispatches on `receipt.backend_id`.
pub fn verify_receipt(receipt: &Receipt) -> Result<(), ReceiptError> {
    match backend(&receipt.backend_id) {
        Ok(b) => b.verify(receipt),
        Err(_) => Err(ReceiptError::UnknownBackend),
    }
}
