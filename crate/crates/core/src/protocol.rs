//! End-to-end prover flow and the three-stage verifier.
//!
//! A verifier accepts a [`DropoutProof`] only if
//! 1. the seed packet is signed by the trusted trainer key over the input
//!    derived from the verifier's own context, and the seed is the hash of
//!    that signature;
//! 2. the receipt verifies under the trusted attestor key;
//! 3. the receipt's journal matches the statement, the statement matches the
//!    expected context, and the claimed mask hash is the one the verified seed
//!    and the claimed probability produce.

use std::fmt;

use crate::attestation::{verify_receipt, AttestationBackend, ProverInput, Receipt};
use crate::context::Context;
use crate::crypto::{sha256, sign_deterministic, verify_signature, Digest32, PublicKey, Signature, VrfKeyPair};
use crate::dropout::apply_float_dropout;
use crate::error::{Error, Result};
use crate::prg::{generate_mask, DropoutParams, Seed};
use crate::quantize::{quantize, FloatTensor};

pub const PROOF_VERSION: &str = "vdo-proof-v1";

/// Seed provenance: `x = sha256(pack(ctx))`, `pi = Sign(sk, x)`, `y = sha256(pi)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VrfPacket {
    pub pk: PublicKey,
    pub x: Digest32,
    pub y: Seed,
    pub pi: Signature,
}

/// The public claim a proof is checked against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub context: Context,
    pub params: DropoutParams,
    pub scale: u32,
    pub element_count: u64,
    pub shape: Vec<u64>,
    pub mask_hash: Digest32,
    pub output_hash: Digest32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DropoutProof {
    pub version: String,
    pub statement: Statement,
    pub vrf: VrfPacket,
    pub receipt: Receipt,
}

/// Stable reject codes, one per failed check family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    Malformed,
    VrfKey,
    VrfSig,
    SeedDerivation,
    Receipt,
    StatementMismatch,
    ContextMismatch,
}

impl RejectReason {
    pub const ALL: [RejectReason; 7] = [
        RejectReason::Malformed,
        RejectReason::VrfKey,
        RejectReason::VrfSig,
        RejectReason::SeedDerivation,
        RejectReason::Receipt,
        RejectReason::StatementMismatch,
        RejectReason::ContextMismatch,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::Malformed => "MALFORMED",
            RejectReason::VrfKey => "VRF_KEY",
            RejectReason::VrfSig => "VRF_SIG",
            RejectReason::SeedDerivation => "SEED_DERIVATION",
            RejectReason::Receipt => "RECEIPT",
            RejectReason::StatementMismatch => "STATEMENT_MISMATCH",
            RejectReason::ContextMismatch => "CONTEXT_MISMATCH",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code() == code)
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }

    pub fn reason(&self) -> Option<RejectReason> {
        match self {
            Verdict::Accept => None,
            Verdict::Reject(r) => Some(*r),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accept => f.write_str("ACCEPT"),
            Verdict::Reject(r) => write!(f, "REJECT({r})"),
        }
    }
}

pub fn derive_seed(ctx: &Context, keys: &VrfKeyPair) -> Result<VrfPacket> {
    let x = ctx.vrf_input()?;
    let pi = sign_deterministic(keys, &x.0);
    Ok(VrfPacket {
        pk: keys.public_key(),
        x,
        y: sha256(&pi.0).into(),
        pi,
    })
}

/// Runs one verifiable dropout invocation.
///
/// Returns the float-path output that training should consume together with
/// the proof. Nothing is returned if any stage fails.
pub fn run_verifiable_dropout(
    x: &FloatTensor,
    ctx: &Context,
    params: DropoutParams,
    scale: u32,
    trainer_keys: &VrfKeyPair,
    backend: &dyn AttestationBackend,
    attestor: &VrfKeyPair,
) -> Result<(FloatTensor, DropoutProof)> {
    let vrf = derive_seed(ctx, trainer_keys)?;
    let mask = generate_mask(vrf.y, params, x.len());
    let output = apply_float_dropout(x, &mask, params)?;
    let q = quantize(x, scale)?;
    let shape = q.shape().iter().map(|&d| d as u64).collect();
    let receipt = backend.prove(&ProverInput { seed: vrf.y, params, q }, attestor)?;
    let statement = Statement {
        context: ctx.clone(),
        params,
        scale,
        element_count: receipt.journal.element_count,
        shape,
        mask_hash: receipt.journal.mask_hash,
        output_hash: receipt.journal.output_hash,
    };
    Ok((
        output,
        DropoutProof {
            version: PROOF_VERSION.to_string(),
            statement,
            vrf,
            receipt,
        },
    ))
}

/// What the verifier trusts: its own context, both public keys, and
/// optionally a dropout probability fixed in advance.
#[derive(Clone, Debug)]
pub struct Expectation {
    pub context: Context,
    pub trainer_pk: PublicKey,
    pub attestor_pk: PublicKey,
    pub params: Option<DropoutParams>,
}

/// Tripartite verifier.
#[derive(Clone, Debug, Default)]
pub struct Verifier {
    disabled: Vec<RejectReason>,
}

impl Verifier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Turns off every check reporting `reason`. Only for mutation-testing the
    /// tamper harness; a verifier built this way is unsound.
    #[doc(hidden)]
    pub fn with_disabled_check(mut self, reason: RejectReason) -> Self {
        self.disabled.push(reason);
        self
    }

    fn fail(&self, reason: RejectReason) -> Option<RejectReason> {
        (!self.disabled.contains(&reason)).then_some(reason)
    }

    pub fn verify(&self, proof: &DropoutProof, expected: &Expectation) -> Verdict {
        match self.first_failure(proof, expected) {
            Some(r) => Verdict::Reject(r),
            None => Verdict::Accept,
        }
    }

    fn first_failure(&self, proof: &DropoutProof, exp: &Expectation) -> Option<RejectReason> {
        use RejectReason::*;

        let st = &proof.statement;
        if proof.version != PROOF_VERSION
            || st.scale == 0
            || st.context.validate().is_err()
            || usize::try_from(st.element_count).is_err()
        {
            return self.fail(Malformed);
        }

        // 1. seed provenance
        let vrf = &proof.vrf;
        if vrf.pk != exp.trainer_pk {
            if let Some(r) = self.fail(VrfKey) {
                return Some(r);
            }
        }
        match exp.context.vrf_input() {
            Ok(x) if x == vrf.x => {}
            _ => {
                if let Some(r) = self.fail(ContextMismatch) {
                    return Some(r);
                }
            }
        }
        if !verify_signature(&vrf.pk, &vrf.x.0, &vrf.pi) {
            if let Some(r) = self.fail(VrfSig) {
                return Some(r);
            }
        }
        if Seed::from(sha256(&vrf.pi.0)) != vrf.y {
            if let Some(r) = self.fail(SeedDerivation) {
                return Some(r);
            }
        }

        // 2. receipt
        let receipt = &proof.receipt;
        if receipt.attestor_pk != exp.attestor_pk || verify_receipt(receipt).is_err() {
            if let Some(r) = self.fail(Receipt) {
                return Some(r);
            }
        }

        // 3. statement consistency
        if st.context != exp.context {
            if let Some(r) = self.fail(ContextMismatch) {
                return Some(r);
            }
        }
        let shape_count = st.shape.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d));
        let journal = &receipt.journal;
        let consistent = exp.params.is_none_or(|p| p == st.params)
            && shape_count == Some(st.element_count)
            && journal.element_count == st.element_count
            && journal.mask_hash == st.mask_hash
            && journal.output_hash == st.output_hash;
        if !consistent {
            if let Some(r) = self.fail(StatementMismatch) {
                return Some(r);
            }
            // A disabled check must not let the mask recomputation below run
            // on an unattested element count.
            return None;
        }
        let mask = generate_mask(vrf.y, st.params, st.element_count as usize);
        if sha256(mask.as_bytes()) != st.mask_hash {
            if let Some(r) = self.fail(StatementMismatch) {
                return Some(r);
            }
        }
        None
    }
}

/// Verifies in the mode where the dropout probability is read from the statement.
pub fn verify_proof(
    proof: &DropoutProof,
    expected: &Context,
    trusted_trainer_pk: &PublicKey,
    trusted_attestor_pk: &PublicKey,
) -> Verdict {
    Verifier::new().verify(
        proof,
        &Expectation {
            context: expected.clone(),
            trainer_pk: *trusted_trainer_pk,
            attestor_pk: *trusted_attestor_pk,
            params: None,
        },
    )
}

/// Decodes and verifies; undecodable input is `REJECT(MALFORMED)`.
pub fn verify_encoded(bytes: &[u8], verifier: &Verifier, expected: &Expectation) -> Verdict {
    match crate::wire::decode_proof(bytes) {
        Ok(proof) => verifier.verify(&proof, expected),
        Err(_) => Verdict::Reject(RejectReason::Malformed),
    }
}

impl DropoutProof {
    pub fn encode(&self) -> Vec<u8> {
        crate::wire::encode_proof(self)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, Error> {
        crate::wire::decode_proof(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attestation::{default_backend, execute, prove, REEXEC_BACKEND_ID};
    use crate::crypto::keygen;
    use crate::quantize::DEFAULT_SCALE;

    struct Fixture {
        ctx: Context,
        trainer: VrfKeyPair,
        attestor: VrfKeyPair,
        x: FloatTensor,
        params: DropoutParams,
    }

    fn fixture() -> Fixture {
        Fixture {
            ctx: Context::new("resnet18", 42, 7, [0xa5; 32], "dropout.0").unwrap(),
            trainer: keygen(&[1; 32]).unwrap(),
            attestor: keygen(&[2; 32]).unwrap(),
            x: FloatTensor::new(vec![4, 16], (0..64).map(|i| (f64::from(i) - 31.5) / 8.0).collect()).unwrap(),
            params: DropoutParams::new(1, 4).unwrap(),
        }
    }

    impl Fixture {
        fn run(&self) -> (FloatTensor, DropoutProof) {
            run_verifiable_dropout(
                &self.x,
                &self.ctx,
                self.params,
                DEFAULT_SCALE,
                &self.trainer,
                default_backend(),
                &self.attestor,
            )
            .unwrap()
        }

        fn expectation(&self) -> Expectation {
            Expectation {
                context: self.ctx.clone(),
                trainer_pk: self.trainer.public_key(),
                attestor_pk: self.attestor.public_key(),
                params: None,
            }
        }

        fn verify(&self, proof: &DropoutProof) -> Verdict {
            Verifier::new().verify(proof, &self.expectation())
        }
    }

    #[test]
    fn derive_seed_is_deterministic_and_context_bound() {
        let f = fixture();
        let a = derive_seed(&f.ctx, &f.trainer).unwrap();
        assert_eq!(a, derive_seed(&f.ctx, &f.trainer).unwrap());
        assert_eq!(a.y, Seed::from(sha256(&a.pi.0)));
        assert_eq!(a.x, f.ctx.vrf_input().unwrap());
        let mut next = f.ctx.clone();
        next.step += 1;
        assert_ne!(a.y, derive_seed(&next, &f.trainer).unwrap().y);
    }

    #[test]
    fn honest_proof_is_accepted() {
        let f = fixture();
        let (_, proof) = f.run();
        assert_eq!(f.verify(&proof), Verdict::Accept);
        assert_eq!(
            verify_proof(&proof, &f.ctx, &f.trainer.public_key(), &f.attestor.public_key()),
            Verdict::Accept
        );
        assert_eq!(proof.statement.mask_hash, proof.receipt.journal.mask_hash);
        assert_eq!(proof.statement.element_count, 64);
        assert_eq!(proof.statement.shape, vec![4, 16]);
    }

    #[test]
    fn zero_probability_passes_input_through() {
        let mut f = fixture();
        f.params = DropoutParams::new(0, 1).unwrap();
        let (out, proof) = f.run();
        assert_eq!(out, f.x);
        assert!(f.verify(&proof).is_accept());
    }

    #[test]
    fn runs_are_byte_identical() {
        let f = fixture();
        let (o1, p1) = f.run();
        let (o2, p2) = f.run();
        assert_eq!(o1, o2);
        assert_eq!(p1.encode(), p2.encode());
    }

    #[test]
    fn run_aborts_on_bad_context() {
        let mut f = fixture();
        f.ctx.model_id.clear();
        assert!(run_verifiable_dropout(
            &f.x,
            &f.ctx,
            f.params,
            DEFAULT_SCALE,
            &f.trainer,
            default_backend(),
            &f.attestor
        )
        .is_err());
    }

    fn reject(f: &Fixture, proof: &DropoutProof) -> RejectReason {
        f.verify(proof).reason().expect("tampered proof accepted")
    }

    #[test]
    fn every_reason_code_is_reachable() {
        let f = fixture();
        let (_, honest) = f.run();

        let mut p = honest.clone();
        p.version = "vdo-proof-v0".into();
        assert_eq!(reject(&f, &p), RejectReason::Malformed);

        let mut p = honest.clone();
        p.vrf.pk = f.attestor.public_key();
        assert_eq!(reject(&f, &p), RejectReason::VrfKey);

        let mut p = honest.clone();
        p.vrf.pi.0[5] ^= 1;
        assert_eq!(reject(&f, &p), RejectReason::VrfSig);

        let mut p = honest.clone();
        p.vrf.y.0[0] ^= 1;
        assert_eq!(reject(&f, &p), RejectReason::SeedDerivation);

        let mut p = honest.clone();
        p.receipt.attestation[0] ^= 1;
        assert_eq!(reject(&f, &p), RejectReason::Receipt);

        let mut p = honest.clone();
        p.receipt.backend_id = "unknown".into();
        assert_eq!(reject(&f, &p), RejectReason::Receipt);

        let mut p = honest.clone();
        p.statement.output_hash.0[0] ^= 1;
        assert_eq!(reject(&f, &p), RejectReason::StatementMismatch);

        let mut p = honest.clone();
        p.statement.shape = vec![8, 16];
        assert_eq!(reject(&f, &p), RejectReason::StatementMismatch);

        let mut p = honest.clone();
        p.statement.context.batch_id += 1;
        assert_eq!(reject(&f, &p), RejectReason::ContextMismatch);
    }

    #[test]
    fn wrong_nonce_is_a_context_mismatch_at_the_seed_check() {
        let f = fixture();
        let (_, proof) = f.run();
        let mut exp = f.expectation();
        exp.context.nonce[31] ^= 0xff;
        assert_eq!(
            Verifier::new().verify(&proof, &exp),
            Verdict::Reject(RejectReason::ContextMismatch)
        );
    }

    #[test]
    fn untrusted_attestor_is_rejected() {
        let f = fixture();
        let (_, proof) = f.run();
        let mut exp = f.expectation();
        exp.attestor_pk = f.trainer.public_key();
        assert_eq!(
            Verifier::new().verify(&proof, &exp),
            Verdict::Reject(RejectReason::Receipt)
        );
    }

    #[test]
    fn probability_claim_is_bound_through_the_mask() {
        let f = fixture();
        let (_, honest) = f.run();
        let mut p = honest.clone();
        p.statement.params = DropoutParams::new(3, 4).unwrap();
        assert_eq!(reject(&f, &p), RejectReason::StatementMismatch);

        // Fixed-p mode catches a substituted p even before the mask check.
        let mut exp = f.expectation();
        exp.params = Some(DropoutParams::new(1, 2).unwrap());
        assert_eq!(
            Verifier::new().verify(&honest, &exp),
            Verdict::Reject(RejectReason::StatementMismatch)
        );
        exp.params = Some(f.params);
        assert!(Verifier::new().verify(&honest, &exp).is_accept());
    }

    #[test]
    fn cherry_picked_seed_needs_the_seed_check() {
        let f = fixture();
        let (_, honest) = f.run();
        let y = Seed([0xee; 32]);
        let q = quantize(&f.x, DEFAULT_SCALE).unwrap();
        let input = ProverInput {
            seed: y,
            params: f.params,
            q,
        };
        let receipt = prove(&input, &f.attestor).unwrap();
        let mut forged = honest.clone();
        forged.vrf.y = y;
        forged.statement.mask_hash = receipt.journal.mask_hash;
        forged.statement.output_hash = receipt.journal.output_hash;
        forged.receipt = receipt;
        assert_eq!(reject(&f, &forged), RejectReason::SeedDerivation);
        let lax = Verifier::new().with_disabled_check(RejectReason::SeedDerivation);
        assert!(lax.verify(&forged, &f.expectation()).is_accept());
        assert_eq!(execute(&input).unwrap().journal, forged.receipt.journal);
        assert_eq!(forged.receipt.backend_id, REEXEC_BACKEND_ID);
    }

    #[test]
    fn undecodable_bytes_are_malformed() {
        let f = fixture();
        assert_eq!(
            verify_encoded(b"{not json", &Verifier::new(), &f.expectation()),
            Verdict::Reject(RejectReason::Malformed)
        );
        let (_, proof) = f.run();
        assert!(verify_encoded(&proof.encode(), &Verifier::new(), &f.expectation()).is_accept());
    }

    #[test]
    fn reason_codes_round_trip() {
        for r in RejectReason::ALL {
            assert_eq!(RejectReason::from_code(r.code()), Some(r));
        }
        assert_eq!(RejectReason::from_code("NOPE"), None);
    }
}
