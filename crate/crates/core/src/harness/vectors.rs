//! Golden conformance vectors shared with independent implementations.
//!
//! The file is canonical JSON:
//!
//! ```text
//! { "version": "vdo-vectors-v1",
//!   "keys": { "trainer_sk_hex", "attestor_sk_hex" },
//!   "cases": [ { "id", "model_id", "step", "batch_id", "nonce_hex", "layer_id",
//!                "x_hex", "y_hex", "prg_words", "p_num", "p_den", "scale", "shape",
//!                "q", "mask_hex", "q_out", "journal": { "mask_hash_hex",
//!                "output_hash_hex", "n" }, "proof": { ... } } ] }
//! ```
//!
//! `prg_words` holds the first sixteen stream words for `y`. The keys are
//! fixed test keys and carry no secrets.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attestation::{execute, ProverInput, ReexecBackend};
use crate::context::{parse_nonce_hex, Context};
use crate::crypto::{keygen, sha256, VrfKeyPair};
use crate::dropout::Journal;
use crate::error::{Error, Result};
use crate::prg::{DropoutParams, PrgStream, Seed};
use crate::protocol::{derive_seed, run_verifiable_dropout};
use crate::quantize::{dequantize, quantize, FloatTensor, QuantizedTensor, DEFAULT_SCALE};

pub const VECTORS_VERSION: &str = "vdo-vectors-v1";
pub const PRG_WORDS_PER_CASE: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorFile {
    pub version: String,
    pub keys: VectorKeys,
    pub cases: Vec<VectorCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorKeys {
    pub trainer_sk_hex: String,
    pub attestor_sk_hex: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorCase {
    pub id: String,
    pub model_id: String,
    pub step: u64,
    pub batch_id: u64,
    pub nonce_hex: String,
    pub layer_id: String,
    pub x_hex: String,
    pub y_hex: String,
    pub prg_words: Vec<u32>,
    pub p_num: u32,
    pub p_den: u32,
    pub scale: u32,
    pub shape: Vec<usize>,
    pub q: Vec<i32>,
    pub mask_hex: String,
    pub q_out: Vec<i32>,
    pub journal: VectorJournal,
    pub proof: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorJournal {
    pub mask_hash_hex: String,
    pub output_hash_hex: String,
    pub n: u64,
}

impl From<&Journal> for VectorJournal {
    fn from(j: &Journal) -> Self {
        Self {
            mask_hash_hex: j.mask_hash.to_hex(),
            output_hash_hex: j.output_hash.to_hex(),
            n: j.element_count,
        }
    }
}

/// One field of one case that failed to reproduce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorMismatch {
    pub id: String,
    pub field: &'static str,
}

pub fn grid_shapes() -> Vec<Vec<usize>> {
    vec![vec![8, 8], vec![32, 32], vec![64, 64], vec![256, 256]]
}

pub fn grid_probabilities() -> Vec<(u32, u32)> {
    vec![(0, 1), (1, 10), (1, 4), (1, 2), (9, 10)]
}

fn test_keys() -> Result<(VrfKeyPair, VrfKeyPair)> {
    Ok((
        keygen(&sha256(b"vdo vectors trainer").0)?,
        keygen(&sha256(b"vdo vectors attestor").0)?,
    ))
}

struct CaseSpec {
    id: String,
    shape: Vec<usize>,
    params: DropoutParams,
    q: Vec<i32>,
}

fn case_specs() -> Vec<CaseSpec> {
    let mut specs = Vec::new();
    for (si, shape) in grid_shapes().into_iter().enumerate() {
        let n: usize = shape.iter().product();
        for (num, den) in grid_probabilities() {
            let mut rng = ChaCha8Rng::seed_from_u64((si as u64) << 32 | u64::from(num) << 8 | u64::from(den));
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            let q = quantize(&FloatTensor::from_vec(x).unwrap(), DEFAULT_SCALE).unwrap();
            specs.push(CaseSpec {
                id: format!("n{n}-p{num}_{den}"),
                shape: shape.clone(),
                params: DropoutParams::new(num, den).unwrap(),
                q: q.values().to_vec(),
            });
        }
    }
    specs.push(CaseSpec {
        id: "edge-empty".into(),
        shape: vec![0],
        params: DropoutParams::new(1, 2).unwrap(),
        q: vec![],
    });
    specs.push(CaseSpec {
        id: "edge-saturation".into(),
        shape: vec![2, 4],
        params: DropoutParams::new(1, 2).unwrap(),
        q: vec![
            i32::MAX,
            i32::MIN,
            i32::MAX - 1,
            i32::MIN + 1,
            1 << 30,
            -(1 << 30),
            3,
            -3,
        ],
    });
    specs.push(CaseSpec {
        id: "edge-ties".into(),
        shape: vec![32],
        // factor 3/2: odd values land exactly on .5
        params: DropoutParams::new(1, 3).unwrap(),
        q: (0..32)
            .map(|i| if i % 2 == 0 { 2 * i + 1 } else { -(2 * i + 1) })
            .collect(),
    });
    specs
}

fn build_case(index: usize, plan: &CaseSpec, trainer: &VrfKeyPair, attestor: &VrfKeyPair) -> Result<VectorCase> {
    let ctx = Context::new(
        "vdo-vectors",
        index as u64,
        7 * index as u64,
        sha256(b"vdo vectors nonce").0,
        format!("layer.{index}"),
    )?;
    let q = QuantizedTensor::new(plan.shape.clone(), DEFAULT_SCALE, plan.q.clone())?;
    let vrf = derive_seed(&ctx, trainer)?;
    let exec = execute(&ProverInput {
        seed: vrf.y,
        params: plan.params,
        q: q.clone(),
    })?;
    // q / S is exact for a power-of-two scale, so the float path re-quantizes to q.
    let x = dequantize(&q);
    let (_, proof) = run_verifiable_dropout(&x, &ctx, plan.params, DEFAULT_SCALE, trainer, &ReexecBackend, attestor)?;
    Ok(VectorCase {
        id: plan.id.clone(),
        model_id: ctx.model_id.clone(),
        step: ctx.step,
        batch_id: ctx.batch_id,
        nonce_hex: ctx.nonce_hex(),
        layer_id: ctx.layer_id.clone(),
        x_hex: vrf.x.to_hex(),
        y_hex: vrf.y.to_hex(),
        prg_words: PrgStream::new(vrf.y).take(PRG_WORDS_PER_CASE).collect(),
        p_num: plan.params.p_num(),
        p_den: plan.params.p_den(),
        scale: DEFAULT_SCALE,
        shape: plan.shape.clone(),
        q: plan.q.clone(),
        mask_hex: hex::encode(exec.mask.as_bytes()),
        q_out: exec.output.values().to_vec(),
        journal: (&exec.journal).into(),
        proof: serde_json::from_slice(&proof.encode()).expect("proof encoding is JSON"),
    })
}

pub fn build_vectors() -> Result<VectorFile> {
    let (trainer, attestor) = test_keys()?;
    let cases = case_specs()
        .iter()
        .enumerate()
        .map(|(i, s)| build_case(i, s, &trainer, &attestor))
        .collect::<Result<_>>()?;
    Ok(VectorFile {
        version: VECTORS_VERSION.into(),
        keys: VectorKeys {
            trainer_sk_hex: hex::encode(trainer.secret_bytes()),
            attestor_sk_hex: hex::encode(attestor.secret_bytes()),
        },
        cases,
    })
}

pub fn encode_vectors(file: &VectorFile) -> Vec<u8> {
    let mut out = crate::wire::to_canonical_json(file);
    out.push(b'\n');
    out
}

pub fn decode_vectors(bytes: &[u8]) -> Result<VectorFile> {
    let file: VectorFile = serde_json::from_slice(bytes).map_err(|e| Error::Malformed(format!("vector file: {e}")))?;
    if file.version != VECTORS_VERSION {
        return Err(Error::UnsupportedVersion(file.version));
    }
    if file.cases.is_empty() {
        return Err(Error::Malformed("vector file has no cases".into()));
    }
    Ok(file)
}

pub fn emit(path: &Path) -> Result<VectorFile> {
    let file = build_vectors()?;
    std::fs::write(path, encode_vectors(&file))?;
    Ok(file)
}

/// Re-derives every case from its inputs (context, keys, probability, scale,
/// shape and `q`) and reports each field that differs.
pub fn check(file: &VectorFile) -> Result<Vec<VectorMismatch>> {
    let trainer = keygen(&hex_bytes(&file.keys.trainer_sk_hex)?)?;
    let attestor = keygen(&hex_bytes(&file.keys.attestor_sk_hex)?)?;
    let mut mismatches = Vec::new();
    for case in &file.cases {
        let mut miss = |field: &'static str, ok: bool| {
            if !ok {
                mismatches.push(VectorMismatch {
                    id: case.id.clone(),
                    field,
                });
            }
        };
        let ctx = Context::new(
            case.model_id.clone(),
            case.step,
            case.batch_id,
            parse_nonce_hex(&case.nonce_hex)?,
            case.layer_id.clone(),
        )?;
        let params = DropoutParams::new(case.p_num, case.p_den)?;
        let q = QuantizedTensor::new(case.shape.clone(), case.scale, case.q.clone())?;

        let vrf = derive_seed(&ctx, &trainer)?;
        miss("x_hex", vrf.x.to_hex() == case.x_hex);
        miss("y_hex", vrf.y.to_hex() == case.y_hex);

        // Mask and journal are checked against the recorded seed, so a bad
        // seed field does not mask downstream disagreements.
        let seed = Seed::from_hex(&case.y_hex)?;
        let words: Vec<u32> = PrgStream::new(seed).take(case.prg_words.len()).collect();
        miss("prg_words", words == case.prg_words);
        let exec = execute(&ProverInput {
            seed,
            params,
            q: q.clone(),
        })?;
        miss("mask_hex", hex::encode(exec.mask.as_bytes()) == case.mask_hex);
        miss("q_out", exec.output.values() == case.q_out.as_slice());
        miss("journal", VectorJournal::from(&exec.journal) == case.journal);

        let (_, proof) = run_verifiable_dropout(
            &dequantize(&q),
            &ctx,
            params,
            case.scale,
            &trainer,
            &ReexecBackend,
            &attestor,
        )?;
        miss("proof", crate::wire::to_canonical_json(&case.proof) == proof.encode());
    }
    Ok(mismatches)
}

fn hex_bytes(s: &str) -> Result<Vec<u8>> {
    hex::decode(s).map_err(|e| Error::Malformed(format!("bad hex key: {e}")))
}

pub fn check_path(path: &Path) -> Result<Vec<VectorMismatch>> {
    check(&decode_vectors(&std::fs::read(path)?)?)
}
