//! Canonical JSON encoding of [`DropoutProof`].
//!
//! Keys are sorted, there is no insignificant whitespace and all binary
//! fields are lowercase hex, so equal proofs encode to equal bytes.

use serde::{Deserialize, Serialize};

use crate::attestation::Receipt;
use crate::context::{parse_nonce_hex, Context};
use crate::crypto::{Digest32, PublicKey, Signature};
use crate::dropout::Journal;
use crate::error::{Error, Result};
use crate::prg::{DropoutParams, Seed};
use crate::protocol::{DropoutProof, Statement, VrfPacket, PROOF_VERSION};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProofWire {
    version: String,
    statement: StatementWire,
    vrf: VrfWire,
    receipt: ReceiptWire,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatementWire {
    model_id: String,
    step: u64,
    batch_id: u64,
    nonce_hex: String,
    layer_id: String,
    p_num: u32,
    p_den: u32,
    scale: u32,
    n: u64,
    shape: Vec<u64>,
    mask_hash_hex: String,
    output_hash_hex: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VrfWire {
    pk_hex: String,
    x_hex: String,
    y_hex: String,
    pi_hex: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceiptWire {
    backend_id: String,
    journal: JournalWire,
    attestation_hex: String,
    attestor_pk_hex: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JournalWire {
    mask_hash_hex: String,
    output_hash_hex: String,
    n: u64,
}

pub fn encode_proof(proof: &DropoutProof) -> Vec<u8> {
    let st = &proof.statement;
    let wire = ProofWire {
        version: proof.version.clone(),
        statement: StatementWire {
            model_id: st.context.model_id.clone(),
            step: st.context.step,
            batch_id: st.context.batch_id,
            nonce_hex: st.context.nonce_hex(),
            layer_id: st.context.layer_id.clone(),
            p_num: st.params.p_num(),
            p_den: st.params.p_den(),
            scale: st.scale,
            n: st.element_count,
            shape: st.shape.clone(),
            mask_hash_hex: st.mask_hash.to_hex(),
            output_hash_hex: st.output_hash.to_hex(),
        },
        vrf: VrfWire {
            pk_hex: proof.vrf.pk.to_hex(),
            x_hex: proof.vrf.x.to_hex(),
            y_hex: proof.vrf.y.to_hex(),
            pi_hex: proof.vrf.pi.to_hex(),
        },
        receipt: ReceiptWire {
            backend_id: proof.receipt.backend_id.clone(),
            journal: journal_to_wire(&proof.receipt.journal),
            attestation_hex: hex::encode(&proof.receipt.attestation),
            attestor_pk_hex: proof.receipt.attestor_pk.to_hex(),
        },
    };
    to_canonical_json(&wire)
}

/// Serializes through `serde_json::Value`, whose object map keeps keys sorted.
pub(crate) fn to_canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    let value = serde_json::to_value(value).expect("wire types always serialize");
    serde_json::to_vec(&value).expect("values always serialize")
}

fn journal_to_wire(j: &Journal) -> JournalWire {
    JournalWire {
        mask_hash_hex: j.mask_hash.to_hex(),
        output_hash_hex: j.output_hash.to_hex(),
        n: j.element_count,
    }
}

pub fn decode_proof(bytes: &[u8]) -> Result<DropoutProof> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::Malformed(format!("not JSON: {e}")))?;
    match value.get("version").and_then(|v| v.as_str()) {
        Some(PROOF_VERSION) => {}
        Some(other) => return Err(Error::UnsupportedVersion(other.to_string())),
        None => return Err(Error::Malformed("missing version".into())),
    }
    let wire: ProofWire = serde_json::from_value(value).map_err(|e| Error::Malformed(e.to_string()))?;

    let st = wire.statement;
    let context = Context::new(
        st.model_id,
        st.step,
        st.batch_id,
        parse_nonce_hex(&st.nonce_hex).map_err(|e| Error::Malformed(e.to_string()))?,
        st.layer_id,
    )
    .map_err(|e| Error::Malformed(e.to_string()))?;
    let params = DropoutParams::new(st.p_num, st.p_den).map_err(|e| Error::Malformed(e.to_string()))?;
    if st.scale == 0 {
        return Err(Error::Malformed("scale must be at least 1".into()));
    }
    let statement = Statement {
        context,
        params,
        scale: st.scale,
        element_count: st.n,
        shape: st.shape,
        mask_hash: Digest32::from_hex(&st.mask_hash_hex)?,
        output_hash: Digest32::from_hex(&st.output_hash_hex)?,
    };

    let vrf = VrfPacket {
        pk: PublicKey::from_hex(&wire.vrf.pk_hex)?,
        x: Digest32::from_hex(&wire.vrf.x_hex)?,
        y: Seed::from_hex(&wire.vrf.y_hex)?,
        pi: Signature::from_hex(&wire.vrf.pi_hex)?,
    };

    let r = wire.receipt;
    if r.attestation_hex.is_empty() || r.attestation_hex.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(Error::Malformed("attestation must be non-empty lowercase hex".into()));
    }
    let receipt = Receipt {
        backend_id: r.backend_id,
        journal: Journal {
            mask_hash: Digest32::from_hex(&r.journal.mask_hash_hex)?,
            output_hash: Digest32::from_hex(&r.journal.output_hash_hex)?,
            element_count: r.journal.n,
        },
        attestation: hex::decode(&r.attestation_hex).map_err(|e| Error::Malformed(format!("attestation: {e}")))?,
        attestor_pk: PublicKey::from_hex(&r.attestor_pk_hex)?,
    };

    Ok(DropoutProof {
        version: wire.version,
        statement,
        vrf,
        receipt,
    })
}
