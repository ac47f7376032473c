//! Forward-pass timing for three dropout variants.
//!
//! * `baseline`: unverified float dropout driven by an ordinary RNG.
//! * `hash_only`: seed derivation, hash-expander mask, float and quantized
//!   dropout and the local journal, without a receipt.
//! * `attested`: the full prover run including the attestation backend and
//!   proof encoding.
//!
//! CSV columns: `variant,shape,p_num,p_den,n,rep,wall_time_s,artifact_bytes`.
//! `shape` is the dimension list joined with `x`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attestation::AttestationBackend;
use crate::context::Context;
use crate::crypto::{keygen, VrfKeyPair};
use crate::dropout::{apply_float_dropout, apply_quantized_dropout, compute_journal, JOURNAL_ENCODED_LEN};
use crate::error::{Error, Result};
use crate::prg::{generate_mask, threshold, DropoutParams, KeepMask};
use crate::protocol::{derive_seed, run_verifiable_dropout};
use crate::quantize::{quantize, FloatTensor, DEFAULT_SCALE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    HashOnly,
    Attested,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::HashOnly, Variant::Attested];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub variant: Variant,
    pub shape: String,
    pub p_num: u32,
    pub p_den: u32,
    pub n: u64,
    pub rep: u32,
    pub wall_time_s: f64,
    pub artifact_bytes: u64,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub probabilities: Vec<DropoutParams>,
    pub reps: usize,
}

impl BenchConfig {
    /// Sizes `2^10 ..= 2^20` in steps of `4x`, five probabilities, five repetitions.
    pub fn standard() -> Self {
        Self {
            sizes: (0..6).map(|k| 1usize << (10 + 2 * k)).collect(),
            probabilities: [(0, 1), (1, 10), (1, 4), (1, 2), (9, 10)]
                .into_iter()
                .map(|(n, d)| DropoutParams::new(n, d).unwrap())
                .collect(),
            reps: 5,
        }
    }
}

/// Median wall time per `(variant, n, p_num, p_den)`.
pub type Medians = BTreeMap<(Variant, u64, u32, u32), f64>;

struct Harness {
    trainer: VrfKeyPair,
    attestor: VrfKeyPair,
    backend: &'static dyn AttestationBackend,
}

impl Harness {
    fn run(
        &self,
        variant: Variant,
        x: &FloatTensor,
        ctx: &Context,
        p: DropoutParams,
        rng: &mut ChaCha8Rng,
    ) -> Result<u64> {
        match variant {
            Variant::Baseline => {
                let t = threshold(p);
                let mask: Vec<u8> = (0..x.len()).map(|_| u8::from(rng.random::<u32>() >= t)).collect();
                let out = apply_float_dropout(x, &KeepMask::from_bytes(mask)?, p)?;
                std::hint::black_box(out);
                Ok(0)
            }
            Variant::HashOnly => {
                let vrf = derive_seed(ctx, &self.trainer)?;
                let mask = generate_mask(vrf.y, p, x.len());
                let out = apply_float_dropout(x, &mask, p)?;
                let q = quantize(x, DEFAULT_SCALE)?;
                let q_out = apply_quantized_dropout(&q, &mask, p)?;
                let journal = compute_journal(&mask, &q_out)?;
                std::hint::black_box((out, journal));
                Ok(JOURNAL_ENCODED_LEN as u64)
            }
            Variant::Attested => {
                let (out, proof) =
                    run_verifiable_dropout(x, ctx, p, DEFAULT_SCALE, &self.trainer, self.backend, &self.attestor)?;
                let bytes = proof.encode();
                std::hint::black_box(out);
                Ok(bytes.len() as u64)
            }
        }
    }
}

/// Times every variant over the grid. Variants and probabilities are
/// interleaved within each repetition and each configuration gets one untimed
/// warm-up pass.
pub fn run_bench(config: &BenchConfig, backend: &'static dyn AttestationBackend) -> Result<Vec<BenchRecord>> {
    if config.reps == 0 || config.sizes.is_empty() || config.probabilities.is_empty() {
        return Err(Error::Malformed(
            "bench grid must have sizes, probabilities and reps >= 1".into(),
        ));
    }
    let h = Harness {
        trainer: keygen(&[0x11; 32])?,
        attestor: keygen(&[0x22; 32])?,
        backend,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut records = Vec::new();
    for &n in &config.sizes {
        let data: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let x = FloatTensor::from_vec(data)?;
        let contexts = config
            .probabilities
            .iter()
            .map(|p| Context::new("bench", n as u64, u64::from(p.p_num()), [7; 32], "dropout"))
            .collect::<Result<Vec<_>>>()?;
        for (&p, ctx) in config.probabilities.iter().zip(&contexts) {
            for v in Variant::ALL {
                h.run(v, &x, ctx, p, &mut rng)?;
            }
        }
        // probabilities are interleaved too, so drift in machine speed is
        // shared across p instead of landing on one of them
        for rep in 0..config.reps {
            for (&p, ctx) in config.probabilities.iter().zip(&contexts) {
                for v in Variant::ALL {
                    let start = Instant::now();
                    let artifact_bytes = h.run(v, &x, ctx, p, &mut rng)?;
                    let wall_time_s = start.elapsed().as_secs_f64();
                    records.push(BenchRecord {
                        variant: v,
                        shape: n.to_string(),
                        p_num: p.p_num(),
                        p_den: p.p_den(),
                        n: n as u64,
                        rep: rep as u32,
                        wall_time_s,
                        artifact_bytes,
                    });
                }
            }
        }
    }
    Ok(records)
}

pub fn medians(records: &[BenchRecord]) -> Medians {
    let mut groups: BTreeMap<(Variant, u64, u32, u32), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.variant, r.n, r.p_num, r.p_den))
            .or_default()
            .push(r.wall_time_s);
    }
    groups
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(f64::total_cmp);
            let mid = v.len() / 2;
            let m = if v.len() % 2 == 1 {
                v[mid]
            } else {
                (v[mid - 1] + v[mid]) / 2.0
            };
            (k, m)
        })
        .collect()
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Malformed(format!("csv: {e}"))
}
