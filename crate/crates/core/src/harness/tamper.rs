//! Attack harness for the three tamper classes a dishonest trainer can try
//! from a valid transcript: replacing the seed, claiming a different dropout
//! probability than was applied, and substituting the claimed post-dropout
//! activations while reusing the receipt.
//!
//! Every trial builds a fresh honest proof, checks that it is accepted, then
//! applies exactly one attack and records the verifier's verdict.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attestation::{default_backend, execute, prove, ProverInput};
use crate::context::Context;
use crate::crypto::{keygen, sha256, sign_deterministic, VrfKeyPair};
use crate::dropout::compute_journal;
use crate::error::Result;
use crate::prg::{DropoutParams, Seed};
use crate::protocol::{run_verifiable_dropout, DropoutProof, Expectation, RejectReason, Verifier};
use crate::quantize::{quantize, FloatTensor, QuantizedTensor, DEFAULT_SCALE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TamperClass {
    Seed,
    Probability,
    Activation,
}

impl TamperClass {
    pub const ALL: [TamperClass; 3] = [TamperClass::Seed, TamperClass::Probability, TamperClass::Activation];

    pub fn name(&self) -> &'static str {
        match self {
            TamperClass::Seed => "seed",
            TamperClass::Probability => "probability",
            TamperClass::Activation => "activation",
        }
    }

    /// Reason codes that correctly attribute an attack of this class.
    pub fn expected_reasons(&self) -> &'static [RejectReason] {
        match self {
            TamperClass::Seed => &[RejectReason::VrfSig, RejectReason::SeedDerivation],
            TamperClass::Probability => &[RejectReason::StatementMismatch],
            TamperClass::Activation => &[RejectReason::StatementMismatch, RejectReason::Receipt],
        }
    }
}

impl fmt::Display for TamperClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TamperTrial {
    pub class: TamperClass,
    pub variant: &'static str,
    pub detected: bool,
    /// Reject code, or `"ACCEPT"` for a missed attack.
    pub reason_code: String,
}

impl TamperTrial {
    pub fn correctly_attributed(&self) -> bool {
        self.detected
            && self
                .class
                .expected_reasons()
                .iter()
                .any(|r| r.code() == self.reason_code)
    }
}

#[derive(Clone, Debug, Default)]
pub struct TamperReport {
    pub trials: Vec<TamperTrial>,
    /// Honest transcripts the verifier refused; should always be zero.
    pub honest_rejections: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassSummary {
    pub class: TamperClass,
    pub trials: usize,
    pub detected: usize,
    pub attributed: usize,
    pub reasons: BTreeMap<String, usize>,
}

impl ClassSummary {
    pub fn detection_rate(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.detected as f64 / self.trials as f64
    }
}

impl TamperReport {
    pub fn summary(&self, class: TamperClass) -> ClassSummary {
        let mut s = ClassSummary {
            class,
            trials: 0,
            detected: 0,
            attributed: 0,
            reasons: BTreeMap::new(),
        };
        for t in self.trials.iter().filter(|t| t.class == class) {
            s.trials += 1;
            s.detected += usize::from(t.detected);
            s.attributed += usize::from(t.correctly_attributed());
            *s.reasons.entry(t.reason_code.clone()).or_default() += 1;
        }
        s
    }

    /// True when every class ran, every attack was caught and every honest run passed.
    pub fn all_detected(&self) -> bool {
        self.honest_rejections == 0
            && TamperClass::ALL.iter().all(|&c| {
                let s = self.summary(c);
                s.trials > 0 && s.detected == s.trials
            })
    }

    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>7} {:>9} {:>10} {:>10}  reasons\n",
            "class", "trials", "detected", "rate", "attributed"
        );
        for c in TamperClass::ALL {
            let s = self.summary(c);
            let reasons: Vec<String> = s.reasons.iter().map(|(k, v)| format!("{k}={v}")).collect();
            out.push_str(&format!(
                "{:<12} {:>7} {:>9} {:>9.1}% {:>10}  {}\n",
                c.name(),
                s.trials,
                s.detected,
                100.0 * s.detection_rate(),
                s.attributed,
                reasons.join(",")
            ));
        }
        out.push_str(&format!("honest transcripts rejected: {}\n", self.honest_rejections));
        out
    }
}

const PROBABILITIES: [(u32, u32); 6] = [(0, 1), (1, 10), (1, 4), (1, 2), (3, 4), (9, 10)];

struct Scenario {
    ctx: Context,
    params: DropoutParams,
    x: FloatTensor,
    q: QuantizedTensor,
}

fn scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let rows = rng.random_range(4..=16);
    let cols = rng.random_range(64..=128);
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-8.0..8.0)).collect();
    let x = FloatTensor::new(vec![rows, cols], data).expect("finite by construction");
    let (num, den) = PROBABILITIES[rng.random_range(0..PROBABILITIES.len())];
    let ctx = Context::new(
        format!("model-{}", rng.random::<u16>()),
        rng.random(),
        rng.random(),
        rng.random(),
        format!("layer.{}.dropout", rng.random_range(0..48)),
    )
    .expect("valid ids");
    Scenario {
        q: quantize(&x, DEFAULT_SCALE).expect("finite"),
        ctx,
        params: DropoutParams::new(num, den).unwrap(),
        x,
    }
}

/// A probability at least 1/5 away from `p`, so the two thresholds split the
/// mask of a few hundred elements with overwhelming probability.
fn distant_probability(rng: &mut ChaCha8Rng, p: DropoutParams) -> DropoutParams {
    let candidates: Vec<DropoutParams> = PROBABILITIES
        .iter()
        .map(|&(n, d)| DropoutParams::new(n, d).unwrap())
        .filter(|c| (c.as_f64() - p.as_f64()).abs() >= 0.2)
        .collect();
    candidates[rng.random_range(0..candidates.len())]
}

fn random_seed(rng: &mut ChaCha8Rng, avoid: Seed) -> Seed {
    loop {
        let s = Seed(rng.random());
        if s != avoid {
            return s;
        }
    }
}

/// Runs `trials_per_class` attacks of each class against `verifier`.
///
/// `rng_seed` makes the whole run reproducible.
pub fn run_tamper_trials(trials_per_class: usize, verifier: &Verifier, rng_seed: u64) -> Result<TamperReport> {
    let trainer = keygen(&sha256(&rng_seed.to_le_bytes()).0)?;
    let attestor = keygen(&sha256(&(!rng_seed).to_le_bytes()).0)?;
    let rogue = keygen(&sha256(b"rogue trainer key").0)?;
    let mut report = TamperReport::default();

    for class in TamperClass::ALL {
        for i in 0..trials_per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ ((class as u64) << 56) ^ i as u64);
            let sc = scenario(&mut rng);
            let (_, honest) = run_verifiable_dropout(
                &sc.x,
                &sc.ctx,
                sc.params,
                DEFAULT_SCALE,
                &trainer,
                default_backend(),
                &attestor,
            )?;
            let expected = Expectation {
                context: sc.ctx.clone(),
                trainer_pk: trainer.public_key(),
                attestor_pk: attestor.public_key(),
                params: None,
            };
            if !verifier.verify(&honest, &expected).is_accept() {
                report.honest_rejections += 1;
            }
            let (variant, forged) = match class {
                TamperClass::Seed => tamper_seed(i, &mut rng, &sc, honest, &attestor, &rogue)?,
                TamperClass::Probability => tamper_probability(i, &mut rng, &sc, honest, &attestor)?,
                TamperClass::Activation => tamper_activation(i, &mut rng, &sc, honest)?,
            };
            let verdict = verifier.verify(&forged, &expected);
            report.trials.push(TamperTrial {
                class,
                variant,
                detected: !verdict.is_accept(),
                reason_code: verdict.reason().map_or("ACCEPT", |r| r.code()).to_string(),
            });
        }
    }
    Ok(report)
}

fn tamper_seed(
    i: usize,
    rng: &mut ChaCha8Rng,
    sc: &Scenario,
    mut proof: DropoutProof,
    attestor: &VrfKeyPair,
    rogue: &VrfKeyPair,
) -> Result<(&'static str, DropoutProof)> {
    Ok(match i % 3 {
        0 => {
            proof.vrf.y = random_seed(rng, proof.vrf.y);
            ("replace-seed", proof)
        }
        1 => {
            // A well-formed packet for the right input, signed by the wrong key.
            let pi = sign_deterministic(rogue, &proof.vrf.x.0);
            proof.vrf.pi = pi;
            proof.vrf.y = sha256(&pi.0).into();
            ("replace-signature", proof)
        }
        _ => {
            // Cherry-pick a seed and get a genuine receipt for it.
            let y = random_seed(rng, proof.vrf.y);
            let receipt = prove(
                &ProverInput {
                    seed: y,
                    params: sc.params,
                    q: sc.q.clone(),
                },
                attestor,
            )?;
            proof.vrf.y = y;
            proof.statement.mask_hash = receipt.journal.mask_hash;
            proof.statement.output_hash = receipt.journal.output_hash;
            proof.receipt = receipt;
            ("cherry-picked-seed", proof)
        }
    })
}

fn tamper_probability(
    i: usize,
    rng: &mut ChaCha8Rng,
    sc: &Scenario,
    mut proof: DropoutProof,
    attestor: &VrfKeyPair,
) -> Result<(&'static str, DropoutProof)> {
    let other = distant_probability(rng, sc.params);
    Ok(if i.is_multiple_of(2) {
        proof.statement.params = other;
        ("claim-different-p", proof)
    } else {
        // Apply `other` for real but keep claiming the agreed probability.
        let receipt = prove(
            &ProverInput {
                seed: proof.vrf.y,
                params: other,
                q: sc.q.clone(),
            },
            attestor,
        )?;
        proof.statement.mask_hash = receipt.journal.mask_hash;
        proof.statement.output_hash = receipt.journal.output_hash;
        proof.receipt = receipt;
        ("apply-different-p", proof)
    })
}

fn tamper_activation(
    i: usize,
    rng: &mut ChaCha8Rng,
    sc: &Scenario,
    mut proof: DropoutProof,
) -> Result<(&'static str, DropoutProof)> {
    let exec = execute(&ProverInput {
        seed: proof.vrf.y,
        params: sc.params,
        q: sc.q.clone(),
    })?;
    let kept: Vec<usize> = (0..exec.mask.len()).filter(|&j| exec.mask.is_kept(j)).collect();
    let mut values = exec.output.values().to_vec();
    if !kept.is_empty() {
        let j = kept[rng.random_range(0..kept.len())];
        let delta = rng.random_range(1..=1 << 16) * if rng.random() { 1 } else { -1 };
        values[j] = values[j].saturating_add(delta);
    }
    let modified = QuantizedTensor::new(exec.output.shape().to_vec(), exec.output.scale(), values)?;
    let forged_hash = compute_journal(&exec.mask, &modified)?.output_hash;
    proof.statement.output_hash = forged_hash;
    Ok(if i.is_multiple_of(2) {
        ("substitute-output-reuse-receipt", proof)
    } else {
        proof.receipt.journal.output_hash = forged_hash;
        ("substitute-output-patch-journal", proof)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_trial_per_class_is_detected() {
        let r = run_tamper_trials(1, &Verifier::new(), 1).unwrap();
        assert_eq!(r.trials.len(), 3);
        assert!(r.all_detected(), "{}", r.render_table());
        assert!(r.trials.iter().all(TamperTrial::correctly_attributed));
    }

    #[test]
    fn disabled_seed_check_lets_cherry_picking_through() {
        let lax = Verifier::new().with_disabled_check(RejectReason::SeedDerivation);
        let r = run_tamper_trials(6, &lax, 2).unwrap();
        assert!(!r.all_detected());
        let s = r.summary(TamperClass::Seed);
        assert!(s.detection_rate() < 1.0);
        let missed: Vec<_> = r.trials.iter().filter(|t| !t.detected).collect();
        assert!(missed.iter().all(|t| t.variant == "cherry-picked-seed"));
    }

    #[test]
    fn runs_are_reproducible() {
        let a = run_tamper_trials(2, &Verifier::new(), 9).unwrap();
        let b = run_tamper_trials(2, &Verifier::new(), 9).unwrap();
        assert_eq!(a.trials, b.trials);
    }
}
