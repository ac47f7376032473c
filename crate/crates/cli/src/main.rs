//! `vdo`: prove, verify and benchmark verifiable dropout from the shell.
//!
//! Exit codes: 0 accept/success, 2 reject (or a failed tamper run / vector
//! check), 3 usage or invalid input, 4 I/O.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vdo_core::attestation::{backend, REEXEC_BACKEND_ID};
use vdo_core::context::{parse_nonce_hex, Context};
use vdo_core::crypto::PublicKey;
use vdo_core::harness::bench::{self, BenchConfig};
use vdo_core::harness::{keyfile, tamper, tensor_file, vectors};
use vdo_core::prg::DropoutParams;
use vdo_core::protocol::{run_verifiable_dropout, verify_encoded, Expectation, RejectReason, Verdict, Verifier};
use vdo_core::Error;

const EXIT_REJECT: u8 = 2;
const EXIT_USAGE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "vdo", version, about = "Verifiable dropout prover and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write fresh trainer and attestor key pairs into a directory.
    Keygen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply dropout to a tensor file and write the proof and output tensor.
    Prove(ProveArgs),
    /// Check a proof against the expected context and trusted keys.
    Verify(VerifyArgs),
    /// Run the seed, probability and activation attacks and report detection.
    TamperTest {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0x7a3d_e001)]
        seed: u64,
        /// Turn off one verifier check (reason code). Mutation testing only.
        #[arg(long, hide = true)]
        disable_check: Option<String>,
    },
    /// Time baseline, hash-only and attested dropout and write a CSV.
    Bench {
        /// Element counts, comma separated. Defaults to 2^10..2^20 in steps of 4x.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Probabilities as NUM/DEN, comma separated.
        #[arg(long = "p", value_delimiter = ',')]
        probabilities: Vec<String>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, env = "VDO_BACKEND", default_value = REEXEC_BACKEND_ID)]
        backend: String,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit or check the shared golden vector file.
    Vectors {
        #[command(subcommand)]
        action: VectorsAction,
    },
}

#[derive(Subcommand)]
enum VectorsAction {
    Emit { path: PathBuf },
    Check { path: PathBuf },
}

#[derive(Args)]
struct ContextArgs {
    #[arg(long)]
    model_id: String,
    #[arg(long)]
    step: u64,
    #[arg(long)]
    batch_id: u64,
    /// 64 hex characters.
    #[arg(long)]
    nonce: String,
    #[arg(long)]
    layer_id: String,
}

impl ContextArgs {
    fn context(&self) -> Result<Context, Error> {
        Context::new(
            self.model_id.clone(),
            self.step,
            self.batch_id,
            parse_nonce_hex(&self.nonce)?,
            self.layer_id.clone(),
        )
    }
}

#[derive(Args)]
struct ProveArgs {
    /// Input tensor file.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    ctx: ContextArgs,
    #[arg(long)]
    p_num: u32,
    #[arg(long)]
    p_den: u32,
    /// Overrides the scale recorded in the tensor file.
    #[arg(long)]
    scale: Option<u32>,
    #[arg(long)]
    trainer_key: PathBuf,
    #[arg(long)]
    attestor_key: PathBuf,
    #[arg(long, env = "VDO_BACKEND", default_value = REEXEC_BACKEND_ID)]
    backend: String,
    /// Proof file.
    #[arg(long)]
    out: PathBuf,
    /// Float output tensor; defaults to `<out>` with extension `out.tensor`.
    #[arg(long)]
    out_tensor: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    proof: PathBuf,
    #[command(flatten)]
    ctx: ContextArgs,
    /// Trainer public key as hex, or a path to a `.pub` file.
    #[arg(long)]
    trainer_pk: String,
    /// Attestor public key as hex, or a path to a `.pub` file.
    #[arg(long)]
    attestor_pk: String,
    /// Pin the probability the proof must claim.
    #[arg(long, requires = "p_den")]
    p_num: Option<u32>,
    #[arg(long, requires = "p_num")]
    p_den: Option<u32>,
}

enum Failure {
    Reject(String),
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

/// Attaches the path to I/O errors, leaving content errors alone.
fn at(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| match e {
        Error::Io(io) => Failure::Io(format!("{}: {io}", path.display())),
        other => Failure::Usage(format!("{}: {other}", path.display())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Keygen { out } => keygen(&out),
        Command::Prove(args) => prove(&args),
        Command::Verify(args) => verify(&args),
        Command::TamperTest {
            trials,
            seed,
            disable_check,
        } => tamper_test(trials, seed, disable_check.as_deref()),
        Command::Bench {
            sizes,
            probabilities,
            reps,
            backend,
            out,
        } => run_bench(sizes, &probabilities, reps, &backend, out.as_deref()),
        Command::Vectors { action } => match action {
            VectorsAction::Emit { path } => emit_vectors(&path),
            VectorsAction::Check { path } => check_vectors(&path),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Reject(msg)) => {
            if !msg.is_empty() {
                eprintln!("vdo: {msg}");
            }
            ExitCode::from(EXIT_REJECT)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("vdo: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("vdo: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn keygen(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for name in [keyfile::TRAINER_KEY_NAME, keyfile::ATTESTOR_KEY_NAME] {
        for path in [keyfile::secret_path(dir, name), keyfile::public_path(dir, name)] {
            if path.exists() {
                return Err(Failure::Io(format!(
                    "{}: already exists, refusing to overwrite",
                    path.display()
                )));
            }
        }
    }
    for name in [keyfile::TRAINER_KEY_NAME, keyfile::ATTESTOR_KEY_NAME] {
        let keys = keyfile::generate_keypair()?;
        let (_, public) = keyfile::write_keypair(dir, name, &keys).map_err(at(dir))?;
        println!("{name}: {}", public.display());
    }
    Ok(())
}

fn prove(args: &ProveArgs) -> Result<(), Failure> {
    let input = tensor_file::read_tensor(&args.input).map_err(at(&args.input))?;
    let ctx = args.ctx.context()?;
    let params = DropoutParams::new(args.p_num, args.p_den)?;
    let scale = args.scale.unwrap_or(input.scale);
    let trainer = keyfile::read_secret(&args.trainer_key).map_err(at(&args.trainer_key))?;
    let attestor = keyfile::read_secret(&args.attestor_key).map_err(at(&args.attestor_key))?;
    let backend = backend(&args.backend)?;

    let (output, proof) = run_verifiable_dropout(&input.tensor, &ctx, params, scale, &trainer, backend, &attestor)?;

    fs::write(&args.out, proof.encode()).map_err(io_err(&args.out))?;
    let out_tensor = args
        .out_tensor
        .clone()
        .unwrap_or_else(|| args.out.with_extension("out.tensor"));
    tensor_file::write_tensor(&out_tensor, &output, scale).map_err(at(&out_tensor))?;
    println!("proof={} output={}", args.out.display(), out_tensor.display());
    Ok(())
}

fn public_key_arg(arg: &str) -> Result<PublicKey, Failure> {
    if arg.len() == 64 && arg.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Ok(keyfile::parse_public(arg)?);
    }
    let path = Path::new(arg);
    keyfile::read_public(path).map_err(at(path))
}

fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    let expected = Expectation {
        context: args.ctx.context()?,
        trainer_pk: public_key_arg(&args.trainer_pk)?,
        attestor_pk: public_key_arg(&args.attestor_pk)?,
        params: match (args.p_num, args.p_den) {
            (Some(n), Some(d)) => Some(DropoutParams::new(n, d)?),
            _ => None,
        },
    };
    let bytes = fs::read(&args.proof).map_err(io_err(&args.proof))?;
    match verify_encoded(&bytes, &Verifier::new(), &expected) {
        Verdict::Accept => {
            println!("verdict=ACCEPT");
            Ok(())
        }
        Verdict::Reject(reason) => {
            println!("verdict=REJECT reason={}", reason.code());
            Err(Failure::Reject(String::new()))
        }
    }
}

fn tamper_test(trials: usize, seed: u64, disable: Option<&str>) -> Result<(), Failure> {
    if trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let mut verifier = Verifier::new();
    if let Some(code) = disable {
        let reason =
            RejectReason::from_code(code).ok_or_else(|| Failure::Usage(format!("unknown reason code `{code}`")))?;
        verifier = verifier.with_disabled_check(reason);
    }
    let report = tamper::run_tamper_trials(trials, &verifier, seed)?;
    print!("{}", report.render_table());
    if report.all_detected() && report.honest_rejections == 0 {
        Ok(())
    } else {
        Err(Failure::Reject("tamper detection below 100%".into()))
    }
}

fn parse_probability(s: &str) -> Result<DropoutParams, Failure> {
    let (n, d) = s
        .split_once('/')
        .ok_or_else(|| Failure::Usage(format!("probability `{s}` is not NUM/DEN")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<u32>()
            .map_err(|e| Failure::Usage(format!("probability `{s}`: {e}")))
    };
    Ok(DropoutParams::new(parse(n)?, parse(d)?)?)
}

fn run_bench(
    sizes: Vec<usize>,
    probabilities: &[String],
    reps: usize,
    backend_id: &str,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut config = BenchConfig::standard();
    if !sizes.is_empty() {
        config.sizes = sizes;
    }
    if !probabilities.is_empty() {
        config.probabilities = probabilities
            .iter()
            .map(|s| parse_probability(s))
            .collect::<Result<_, _>>()?;
    }
    config.reps = reps;
    let records = bench::run_bench(&config, backend(backend_id)?)?;
    match out {
        Some(path) => {
            let file = fs::File::create(path).map_err(io_err(path))?;
            bench::write_csv(&records, file).map_err(at(path))?;
        }
        None => {
            let stdout = io::stdout().lock();
            bench::write_csv(&records, stdout)?;
        }
    }
    let mut err = io::stderr().lock();
    for ((variant, n, p_num, p_den), median) in bench::medians(&records) {
        let _ = writeln!(err, "{variant:?} n={n} p={p_num}/{p_den} median={median:.6}s");
    }
    Ok(())
}

fn emit_vectors(path: &Path) -> Result<(), Failure> {
    let file = vectors::emit(path).map_err(at(path))?;
    println!("wrote {} cases to {}", file.cases.len(), path.display());
    Ok(())
}

fn check_vectors(path: &Path) -> Result<(), Failure> {
    let file = fs::read(path).map_err(io_err(path))?;
    let file = vectors::decode_vectors(&file).map_err(at(path))?;
    let mismatches = vectors::check(&file)?;
    for m in &mismatches {
        println!("mismatch id={} field={}", m.id, m.field);
    }
    println!("cases={} mismatches={}", file.cases.len(), mismatches.len());
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(Failure::Reject(String::new()))
    }
}
