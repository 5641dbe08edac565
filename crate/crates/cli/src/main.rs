use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use flashcode::bounds::{parse_axis, table_csv, Formula, Grid};
use flashcode::verifier::{self, Outcome, DEFAULT_BUDGET};
use flashcode::scheme::input_label;
use flashcode::{trace_line, Scheme, WriteOutcome};

#[macro_use]
mod schemes;

use schemes::SchemeArgs;

/// Rewriting codes for multilevel flash memory.
#[derive(Parser)]
#[command(name = "flashcode", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print closed-form bounds as CSV.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Replay a file of inputs and print the trace or the final state.
    Simulate(SimulateArgs),
    /// Compute guaranteed writes exhaustively, or stress with random inputs.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Apply one write to a state read from stdin.
    Encode(EncodeArgs),
    /// Decode a state read from stdin.
    Decode(DecodeArgs),
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Flash-code formulas over n, k, q. Each flag takes `4`, `2,3,5` or `3..=9`.
    Flash {
        #[arg(long)]
        n: String,
        #[arg(long)]
        k: String,
        #[arg(long)]
        q: String,
    },
    /// Buffer formulas. Single-cell bounds over q, l, r; with --n, the
    /// multi-cell guarantees over n, q, r instead.
    Buffer {
        #[arg(long)]
        q: String,
        #[arg(long, default_value = "2")]
        l: String,
        #[arg(long)]
        r: String,
        #[arg(long)]
        n: Option<String>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Input file, one input per line, `#` starts a comment; `-` is stdin.
    #[arg(long)]
    inputs: String,
    /// Write the trace here; `-` is stdout.
    #[arg(long)]
    trace: Option<String>,
    /// Write the final serialized state here.
    #[arg(long)]
    state_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Shortest erase-forcing input sequence by breadth-first search.
    Exhaustive {
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Maximum number of distinct states to store.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Seeded random input sequences with per-step consistency checks.
    Random {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Inputs per trial; defaults to four times the cell capacity.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Bit index (flash codes) or symbol (buffer codes).
    #[arg(long)]
    input: u32,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
}

/// Failures that map to exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

/// Library errors caused by bad arguments become usage errors.
pub(crate) fn lib_err(e: flashcode::Error) -> anyhow::Error {
    match e {
        flashcode::Error::InvalidConfig(_) | flashcode::Error::Unsupported(_) => usage(e.to_string()),
        other => anyhow::Error::new(other),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Bounds(cmd) => bounds(cmd),
        Command::Simulate(args) => {
            let built = args.scheme.build()?;
            dispatch!(built, code => simulate(&code, &args))
        }
        Command::Verify(VerifyCommand::Exhaustive { scheme, budget }) => {
            let built = scheme.build()?;
            dispatch!(built, code => verify_exhaustive(&code, budget))
        }
        Command::Verify(VerifyCommand::Random { scheme, trials, horizon, seed }) => {
            let built = scheme.build()?;
            dispatch!(built, code => verify_random(&code, trials, horizon, seed))
        }
        Command::Encode(args) => {
            let built = args.scheme.build()?;
            dispatch!(built, code => encode(&code, args.input))
        }
        Command::Decode(args) => {
            let built = args.scheme.build()?;
            dispatch!(built, code => decode(&code))
        }
    }
}

fn axis(flag: &str, text: &str) -> Result<Vec<u64>> {
    parse_axis(text).map_err(|e| usage(format!("--{flag}: {e}")))
}

fn bounds(cmd: BoundsCommand) -> Result<ExitCode> {
    let (formulas, grid): (&[Formula], Grid) = match cmd {
        BoundsCommand::Flash { n, k, q } => (
            &Formula::FLASH,
            Grid::new(vec![axis("n", &n)?, axis("k", &k)?, axis("q", &q)?]),
        ),
        BoundsCommand::Buffer { q, l, r, n: None } => (
            &Formula::BUFFER_SINGLE,
            Grid::new(vec![axis("q", &q)?, axis("l", &l)?, axis("r", &r)?]),
        ),
        BoundsCommand::Buffer { q, l, r, n: Some(n) } => {
            if axis("l", &l)? != [2] {
                return Err(usage("the multi-cell buffer formulas are binary; use --l 2"));
            }
            (
                &Formula::BUFFER_MULTI,
                Grid::new(vec![axis("n", &n)?, axis("q", &q)?, axis("r", &r)?]),
            )
        }
    };
    let csv = table_csv(formulas, &grid).map_err(lib_err)?;
    io::stdout().write_all(csv.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

/// Parses one input per line; blank lines and `#` comments are skipped.
fn parse_inputs(text: &str, domain_size: u32) -> Result<Vec<u32>> {
    let mut inputs = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v: u32 = body
            .parse()
            .map_err(|_| usage(format!("inputs line {}: `{body}` is not a non-negative integer", no + 1)))?;
        if v >= domain_size {
            return Err(usage(format!(
                "inputs line {}: {v} is outside 0..{domain_size}",
                no + 1
            )));
        }
        inputs.push(v);
    }
    Ok(inputs)
}

fn read_source(path: &str) -> Result<String> {
    if path == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {path}"))
    }
}

fn simulate<S: Scheme>(code: &S, args: &SimulateArgs) -> Result<ExitCode> {
    let inputs = parse_inputs(&read_source(&args.inputs)?, code.domain().size())?;
    let mut trace = vec![trace_line(code, 0, None, &code.initial())];
    let mut state = code.initial();
    let mut erased = false;
    for (w, &input) in inputs.iter().enumerate() {
        match code.write(&state, input).map_err(lib_err)? {
            WriteOutcome::Written(next) => {
                state = next;
                trace.push(trace_line(code, w + 1, Some(input), &state));
            }
            WriteOutcome::Erase => {
                trace.push(format!("w={} {}={input} erase", w + 1, input_label(code.domain())));
                erased = true;
                break;
            }
        }
    }
    let writes = trace.len() - 1 - usize::from(erased);
    let serialized = code.serialize(&state) + "\n";
    let trace_text: String = trace.iter().map(|l| format!("{l}\n")).collect();
    match args.trace.as_deref() {
        Some("-") => io::stdout().write_all(trace_text.as_bytes())?,
        Some(path) => {
            fs::write(path, &trace_text).with_context(|| format!("writing {path}"))?;
            io::stdout().write_all(serialized.as_bytes())?;
        }
        None => io::stdout().write_all(serialized.as_bytes())?,
    }
    if let Some(path) = &args.state_out {
        fs::write(path, &serialized).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!("writes={writes} erased={}", if erased { "yes" } else { "no" });
    Ok(if erased { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn verify_exhaustive<S: Scheme>(code: &S, budget: u64) -> Result<ExitCode> {
    let report = verifier::min_writes_exhaustive(code, budget).map_err(lib_err)?;
    print!("{report}");
    Ok(match report.outcome {
        Outcome::Certified { .. } => ExitCode::SUCCESS,
        Outcome::Inconclusive { .. } => ExitCode::from(3),
        Outcome::NoErase => ExitCode::from(1),
    })
}

fn verify_random<S: Scheme>(code: &S, trials: u64, horizon: Option<usize>, seed: u64) -> Result<ExitCode> {
    let horizon = horizon.unwrap_or_else(|| (4 * code.capacity()).max(1) as usize);
    let summary = verifier::random_adversary(code, trials, horizon, seed).map_err(lib_err)?;
    print!("{summary}");
    Ok(if summary.violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn read_state<S: Scheme>(code: &S) -> Result<S::State> {
    let text = read_source("-")?;
    code.deserialize(&text).map_err(|e| anyhow!("state on stdin: {e}"))
}

fn encode<S: Scheme>(code: &S, input: u32) -> Result<ExitCode> {
    if input >= code.domain().size() {
        bail!(usage(format!("--input {input} is outside 0..{}", code.domain().size())));
    }
    let state = read_state(code)?;
    match code.write(&state, input).map_err(lib_err)? {
        WriteOutcome::Written(next) => {
            println!("{}", code.serialize(&next));
            Ok(ExitCode::SUCCESS)
        }
        WriteOutcome::Erase => {
            println!("erase");
            Ok(ExitCode::from(1))
        }
    }
}

fn decode<S: Scheme>(code: &S) -> Result<ExitCode> {
    let state = read_state(code)?;
    let decoded = code.decode(&state).map_err(lib_err)?;
    println!("{decoded}");
    Ok(ExitCode::SUCCESS)
}
