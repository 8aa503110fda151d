//! The `acnkit` command line.
//!
//! Exit codes: 0 success, 1 contract or constraint failure (including
//! encode/decode errors), 2 usage or I/O error, 3 parse or compile
//! diagnostics.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::AcnCodec;
use crate::compiler::{compile, resolve, CodecPlan, CompileError};
use crate::engine::{self, RoundtripOptions};
use crate::frontend::{parse_acn, parse_asn1, parse_value, print_value};
use crate::gen::{random_schema, random_value, GenConfig};
use crate::value::Value;

/// Revision of the supported ASN.1/ACN subset.
pub const SUBSET_REVISION: &str = "1";

/// Environment variable holding the default `selftest` time budget, in seconds.
pub const SWEEP_TIMEOUT_ENV: &str = "ACNKIT_SWEEP_TIMEOUT_SECS";

const DEFAULT_SWEEP_TIMEOUT: u64 = 600;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (ASN.1/ACN subset revision 1)");

#[derive(Parser, Debug)]
#[command(name = "acnkit", version = VERSION, about = "Compile ASN.1/ACN schemas and encode, decode and check messages")]
struct Cli {
    /// Print per-contract details.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Resolve and compile a type; print its plan and size bounds.
    Compile {
        #[command(flatten)]
        schema: SchemaArgs,
        /// Write the plan here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode a value file into a binary message plus a metadata sidecar.
    Encode {
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long)]
        value: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Start bit of the message inside the output.
        #[arg(long, default_value_t = 0)]
        offset: u64,
        #[arg(long, value_enum, default_value_t = CheckLevel::Constraints)]
        check: CheckLevel,
    },
    /// Decode a binary message and print its value.
    Decode {
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Start bit; defaults to the sidecar's, or 0.
        #[arg(long)]
        offset: Option<u64>,
    },
    /// Print the exact encoded size of a value and the type's bounds.
    Size {
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long)]
        value: PathBuf,
        #[arg(long, default_value_t = 0)]
        offset: u64,
    },
    /// Run the encode/decode contract suite on a value.
    Roundtrip {
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long)]
        value: PathBuf,
        #[arg(long, default_value_t = 0)]
        offset: u64,
        /// Check every start offset 0..31 instead of one.
        #[arg(long)]
        all_offsets: bool,
        /// Prefix-stability trials per offset.
        #[arg(long, default_value_t = 16)]
        fuzz: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Invertibility sweep over random schemas and values.
    Selftest {
        #[arg(long, default_value_t = 1000)]
        cases: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        fuzz: usize,
        /// Time budget in seconds; defaults to $ACNKIT_SWEEP_TIMEOUT_SECS, then 600.
        #[arg(long)]
        timeout: Option<u64>,
        /// Worker threads; 0 uses every available core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Args, Debug)]
struct SchemaArgs {
    /// ASN.1 module (.asn1 or .asn).
    asn: Option<PathBuf>,
    /// ACN encoding specification (.acn).
    acn: Option<PathBuf>,
    /// Type assignment to compile.
    #[arg(long = "type", short = 't')]
    type_name: Option<String>,
    /// Use a plan written by `compile --out` instead of schema files.
    #[arg(long, conflicts_with_all = ["asn", "acn", "type_name"])]
    plan: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CheckLevel {
    /// Check ASN.1 constraints before encoding.
    Constraints,
    /// Also run the full contract suite at the requested offset.
    Full,
}

/// Metadata written next to an encoded message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sidecar {
    #[serde(rename = "type")]
    pub type_name: String,
    pub bit_length: u64,
    pub start_offset: u64,
    pub byte_length: u64,
}

/// Path of the sidecar for a message file: `msg.bin` -> `msg.bin.json`.
pub fn sidecar_path(message: &Path) -> PathBuf {
    let mut s = message.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

enum Failure {
    Contract(String),
    Usage(String),
    Diagnostics(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Contract(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Diagnostics(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Contract(m) | Failure::Usage(m) | Failure::Diagnostics(m) => m,
        }
    }
}

type CliResult = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_plan(args: &SchemaArgs) -> Result<CodecPlan, Failure> {
    if let Some(p) = &args.plan {
        return CodecPlan::load(&read(p)?).map_err(|e| Failure::Diagnostics(format!("{}: {e}", p.display())));
    }
    let (Some(asn_path), Some(acn_path), Some(name)) = (&args.asn, &args.acn, &args.type_name) else {
        return Err(Failure::Usage(
            "expected <ASN> <ACN> --type <NAME>, or --plan <FILE>".into(),
        ));
    };
    let (asn_text, acn_text) = (read(asn_path)?, read(acn_path)?);
    let (asn_name, acn_name) = (asn_path.display().to_string(), acn_path.display().to_string());
    let diag = |d: crate::frontend::Diagnostics| Failure::Diagnostics(d.render(&asn_name, &acn_name));
    let asn = parse_asn1(&asn_text).map_err(diag)?;
    let acn = parse_acn(&acn_text).map_err(diag)?;
    let schema = resolve(&asn, &acn).map_err(diag)?;
    compile(&schema, name).map_err(|e| match e {
        CompileError::Diagnostics(d) => diag(d),
        other => Failure::Diagnostics(format!("{asn_name}: {other}")),
    })
}

fn load_value(plan: &CodecPlan, path: &Path) -> Result<Value, Failure> {
    let v = parse_value(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    engine::coerce(plan, v).map_err(|e| Failure::Contract(format!("{}: {e}", path.display())))
}

fn check_value(plan: &CodecPlan, v: &Value, path: &Path) -> CliResult {
    let bad = engine::check_constraints(plan, v);
    if bad.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = bad.iter().map(|b| format!("{}: {b}", path.display())).collect();
    Err(Failure::Contract(lines.join("\n")))
}

fn compile_cmd(out: &mut dyn Write, schema: &SchemaArgs, dest: Option<&Path>) -> CliResult {
    let plan = load_plan(schema)?;
    let text = plan.dump();
    match dest {
        Some(p) => {
            write(p, text.as_bytes())?;
            let _ = writeln!(out, "wrote plan for {} to {}", plan.type_name, p.display());
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    let b = plan.bounds();
    let _ = writeln!(
        out,
        "bounds: {} .. {} bits, alignment {}, {} outlined node(s)",
        b.min_bits,
        b.max_bits,
        b.alignment,
        plan.outlined().len()
    );
    Ok(())
}

fn encode_cmd(
    out: &mut dyn Write,
    schema: &SchemaArgs,
    value: &Path,
    dest: &Path,
    offset: u64,
    check: CheckLevel,
    verbose: bool,
) -> CliResult {
    let plan = load_plan(schema)?;
    let v = load_value(&plan, value)?;
    check_value(&plan, &v, value)?;
    if check == CheckLevel::Full {
        let r = engine::roundtrip_check(&plan, &v, offset, RoundtripOptions::default());
        if verbose || !r.passed() {
            let _ = write!(out, "{r}");
        }
        if !r.passed() {
            return Err(Failure::Contract("contract check failed; nothing written".into()));
        }
    }
    // Zero-filled, so leading offset bits and trailing pad bits are zero.
    let capacity = (offset + plan.bounds().max_bits).div_ceil(8).max(1) as usize;
    let mut codec = AcnCodec::with_capacity(capacity).map_err(|e| Failure::Contract(e.to_string()))?;
    codec
        .stream_mut()
        .set_cursor((offset as usize).into())
        .map_err(|e| Failure::Contract(e.to_string()))?;
    let report = engine::encode(&plan, &v, &mut codec).map_err(|e| Failure::Contract(e.to_string()))?;
    let end = (offset + report.bit_length).div_ceil(8) as usize;
    let bytes = &codec.buf()[..end];
    write(dest, bytes)?;
    let sidecar = Sidecar {
        type_name: plan.type_name.clone(),
        bit_length: report.bit_length,
        start_offset: offset,
        byte_length: bytes.len() as u64,
    };
    let meta = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n";
    write(&sidecar_path(dest), meta.as_bytes())?;
    let _ = writeln!(
        out,
        "encoded {} bits ({} bytes) to {}",
        report.bit_length,
        bytes.len(),
        dest.display()
    );
    Ok(())
}

fn decode_cmd(
    out: &mut dyn Write,
    schema: &SchemaArgs,
    input: &Path,
    dest: Option<&Path>,
    offset: Option<u64>,
) -> CliResult {
    let plan = load_plan(schema)?;
    let bytes = fs::read(input).map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?;
    let side_path = sidecar_path(input);
    let sidecar: Option<Sidecar> = match fs::read_to_string(&side_path) {
        Ok(text) => Some(
            serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", side_path.display())))?,
        ),
        Err(_) => None,
    };
    let offset = offset.or(sidecar.as_ref().map(|s| s.start_offset)).unwrap_or(0);
    if bytes.is_empty() {
        return Err(Failure::Contract(format!("{}: insufficient data: the file is empty", input.display())));
    }
    let mut codec = AcnCodec::from_bytes(bytes).map_err(|e| Failure::Contract(e.to_string()))?;
    codec
        .stream_mut()
        .set_cursor((offset as usize).into())
        .map_err(|e| Failure::Contract(format!("{}: offset {offset}: {e}", input.display())))?;
    let decoded = engine::decode(&plan, &mut codec).map_err(|e| Failure::Contract(format!("{}: {e}", input.display())))?;
    let used = codec.bit_index() as u64 - offset;
    if let Some(s) = &sidecar {
        if s.bit_length != used {
            return Err(Failure::Contract(format!(
                "{}: decoded {used} bits but the sidecar records {}",
                input.display(),
                s.bit_length
            )));
        }
    }
    let text = print_value(&decoded.value) + "\n";
    match dest {
        Some(p) => {
            write(p, text.as_bytes())?;
            let _ = writeln!(out, "decoded {used} bits to {}", p.display());
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(())
}

fn size_cmd(out: &mut dyn Write, schema: &SchemaArgs, value: &Path, offset: u64) -> CliResult {
    let plan = load_plan(schema)?;
    let v = load_value(&plan, value)?;
    let size = engine::size_of(&plan, &v, offset).map_err(|e| Failure::Contract(e.to_string()))?;
    let b = plan.bounds();
    let _ = writeln!(out, "size: {size} bits at offset {offset}");
    let _ = writeln!(out, "bounds: {} .. {} bits", b.min_bits, b.max_bits);
    let _ = writeln!(out, "alignment: {}", b.alignment);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn roundtrip_cmd(
    out: &mut dyn Write,
    schema: &SchemaArgs,
    value: &Path,
    offset: u64,
    all_offsets: bool,
    fuzz: usize,
    seed: u64,
    verbose: bool,
) -> CliResult {
    let plan = load_plan(schema)?;
    let v = load_value(&plan, value)?;
    let offsets: Vec<u64> = if all_offsets { (0..32).collect() } else { vec![offset] };
    let mut failed = 0;
    for o in offsets {
        let r = engine::roundtrip_check(&plan, &v, o, RoundtripOptions { fuzz, seed });
        if verbose || !r.passed() {
            let _ = writeln!(out, "offset {o}:");
            let _ = write!(out, "{r}");
        }
        if !r.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Failure::Contract(format!("contracts failed at {failed} offset(s)")));
    }
    let _ = writeln!(out, "all contracts passed");
    Ok(())
}

/// Outcome of one selftest case.
struct CaseFailure {
    case: u64,
    detail: String,
}

fn selftest_case(seed: u64, case: u64, fuzz: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case);
    let schema = random_schema(&mut rng, &GenConfig::default());
    let context = || format!("ASN.1:\n{}ACN:\n{}", schema.asn_text(), schema.acn_text());
    let plan = schema.compile().map_err(|e| format!("compile: {e}\n{}", context()))?;
    let v = random_value(&plan, &mut rng);
    let offset = rng.gen_range(0..32);
    let r = engine::roundtrip_check(&plan, &v, offset, RoundtripOptions { fuzz, seed: case });
    if r.passed() {
        Ok(())
    } else {
        Err(format!("value {v} at offset {offset}\n{r}{}", context()))
    }
}

fn selftest_cmd(
    out: &mut dyn Write,
    cases: u64,
    seed: u64,
    fuzz: usize,
    timeout: Option<u64>,
    jobs: usize,
) -> CliResult {
    let timeout = match timeout {
        Some(t) => t,
        None => match std::env::var(SWEEP_TIMEOUT_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(format!("{SWEEP_TIMEOUT_ENV}={s:?} is not a number of seconds")))?,
            Err(_) => DEFAULT_SWEEP_TIMEOUT,
        },
    };
    let deadline = Instant::now() + Duration::from_secs(timeout);
    let jobs = match jobs {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    let jobs = jobs.min(cases.max(1) as usize);
    let failures = Mutex::new(Vec::new());
    let timed_out = AtomicBool::new(false);
    let ran = std::sync::atomic::AtomicU64::new(0);
    std::thread::scope(|s| {
        for worker in 0..jobs {
            let (failures, timed_out, ran) = (&failures, &timed_out, &ran);
            s.spawn(move || {
                let mut case = worker as u64;
                while case < cases {
                    if Instant::now() > deadline {
                        timed_out.store(true, Ordering::Relaxed);
                        return;
                    }
                    if let Err(detail) = selftest_case(seed, case, fuzz) {
                        failures.lock().unwrap().push(CaseFailure { case, detail });
                    }
                    ran.fetch_add(1, Ordering::Relaxed);
                    case += jobs as u64;
                }
            });
        }
    });
    let mut failures = failures.into_inner().unwrap();
    failures.sort_by_key(|f| f.case);
    let ran = ran.into_inner();
    if let Some(first) = failures.first() {
        let _ = writeln!(out, "case {} failed: {}", first.case, first.detail);
    }
    let _ = writeln!(
        out,
        "selftest: {ran} of {cases} cases run, {} failed (seed {seed})",
        failures.len()
    );
    if timed_out.load(Ordering::Relaxed) {
        return Err(Failure::Contract(format!("time budget of {timeout} s exhausted")));
    }
    if !failures.is_empty() {
        return Err(Failure::Contract(format!("{} case(s) failed", failures.len())));
    }
    Ok(())
}

/// Runs the command line `argv` (including the program name), writing
/// results to `out` and errors to `err`; returns the exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    let verbose = cli.verbose;
    let result = match &cli.command {
        Command::Compile { schema, out: dest } => compile_cmd(out, schema, dest.as_deref()),
        Command::Encode {
            schema,
            value,
            out: dest,
            offset,
            check,
        } => encode_cmd(out, schema, value, dest, *offset, *check, verbose),
        Command::Decode {
            schema,
            input,
            out: dest,
            offset,
        } => decode_cmd(out, schema, input, dest.as_deref(), *offset),
        Command::Size { schema, value, offset } => size_cmd(out, schema, value, *offset),
        Command::Roundtrip {
            schema,
            value,
            offset,
            all_offsets,
            fuzz,
            seed,
        } => roundtrip_cmd(out, schema, value, *offset, *all_offsets, *fuzz, *seed, verbose),
        Command::Selftest {
            cases,
            seed,
            fuzz,
            timeout,
            jobs,
        } => selftest_cmd(out, *cases, *seed, *fuzz, *timeout, *jobs),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

/// [`run_with`] on the process's standard streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
