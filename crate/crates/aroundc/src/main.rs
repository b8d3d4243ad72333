//! Command-line driver.
//!
//! Exit codes: 0 success, 1 diagnostics (parse errors, safety violations,
//! size refusals), 2 verification failure, 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use aroundc::frontend::{build_v_chain, emit_text, parse, stats};
use aroundc::numerics::{self, NumericsError, VerifyOutcome};
use aroundc::passes::{run_pipeline, OptLevel};
use aroundc::{check_circuit, Circuit};

#[derive(Parser)]
#[command(name = "aroundc", version, about = "Conjugation-aware quantum circuit compiler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptArg {
    None,
    Ctrl,
    Approx,
    All,
}

impl From<OptArg> for OptLevel {
    fn from(v: OptArg) -> OptLevel {
        match v {
            OptArg::None => OptLevel::None,
            OptArg::Ctrl => OptLevel::Ctrl,
            OptArg::Approx => OptLevel::Approx,
            OptArg::All => OptLevel::All,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EmitArg {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a circuit file through the pass pipeline.
    Compile {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = OptArg::None)]
        opt: OptArg,
        #[arg(long, value_enum)]
        emit: Option<EmitArg>,
        /// Print gate statistics as JSON.
        #[arg(long)]
        stats: bool,
        /// Check the rewritten circuit against the input with the oracle.
        #[arg(long)]
        verify: bool,
    },
    /// Build and compile the V-chain multi-controlled X directly.
    Vchain {
        #[arg(long)]
        controls: usize,
        #[arg(long, value_enum, default_value_t = OptArg::None)]
        opt: OptArg,
        #[arg(long, value_enum)]
        emit: Option<EmitArg>,
        #[arg(long)]
        stats: bool,
        #[arg(long)]
        verify: bool,
    },
    /// Run the ancilla safety checker over a circuit file.
    Check { file: PathBuf },
}

const EXIT_OK: u8 = 0;
const EXIT_DIAGNOSTICS: u8 = 1;
const EXIT_VERIFY_FAILED: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn load_circuit(path: &Path) -> Result<Circuit, u8> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_DIAGNOSTICS
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "circuit".to_string());
    parse(&text, &name).map_err(|e| {
        eprintln!("{}:{e}", path.display());
        EXIT_DIAGNOSTICS
    })
}

fn drive(circuit: Circuit, opt: OptArg, emit: Option<EmitArg>, want_stats: bool, verify: bool) -> u8 {
    let (flat, reports) = match run_pipeline(&circuit, opt.into()) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("internal error: {e}");
            return EXIT_INTERNAL;
        }
    };

    if verify {
        match numerics::verify_rewrite(&circuit, &flat) {
            Ok(VerifyOutcome::Equivalent) => {
                eprintln!("verify: rewritten circuit is equivalent to the input");
            }
            Ok(VerifyOutcome::MainBlockMismatch) => {
                eprintln!("verify: FAILED — rewritten circuit differs from the input");
                return EXIT_VERIFY_FAILED;
            }
            Ok(VerifyOutcome::AuxNotRestored { side }) => {
                eprintln!("verify: FAILED — {side} circuit does not restore its aux qubits");
                return EXIT_VERIFY_FAILED;
            }
            Err(NumericsError::TooLarge { qubits, max }) => {
                eprintln!(
                    "verify: refusing to build a {qubits}-qubit unitary (oracle cap is {max} qubits); \
                     rerun without --verify or shrink the circuit"
                );
                return EXIT_DIAGNOSTICS;
            }
            Err(e) => {
                eprintln!("internal error during verification: {e}");
                return EXIT_INTERNAL;
            }
        }
    }

    match emit {
        Some(EmitArg::Text) => print!("{}", emit_text(&flat)),
        Some(EmitArg::Json) => match serde_json::to_string_pretty(&flat) {
            Ok(js) => println!("{js}"),
            Err(e) => {
                eprintln!("internal error: {e}");
                return EXIT_INTERNAL;
            }
        },
        None => {}
    }

    if want_stats {
        match stats(&flat) {
            Ok(s) => println!("{}", s.with_passes(&reports).to_json()),
            Err(e) => {
                eprintln!("internal error: {e}");
                return EXIT_INTERNAL;
            }
        }
    }

    if emit.is_none() && !want_stats {
        print!("{}", emit_text(&flat));
    }
    EXIT_OK
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Compile { file, opt, emit, stats, verify } => match load_circuit(&file) {
            Ok(circuit) => drive(circuit, opt, emit, stats, verify),
            Err(code) => code,
        },
        Command::Vchain { controls, opt, emit, stats, verify } => {
            if controls < 1 {
                eprintln!("error: --controls must be at least 1");
                EXIT_DIAGNOSTICS
            } else {
                drive(build_v_chain(controls), opt, emit, stats, verify)
            }
        }
        Command::Check { file } => match load_circuit(&file) {
            Ok(circuit) => {
                let verdict = check_circuit(&circuit);
                if verdict.accepted {
                    println!("ACCEPTED: every aux scope provably restores its qubits");
                    EXIT_OK
                } else {
                    println!("REJECTED: {} violation(s)", verdict.violations.len());
                    for v in &verdict.violations {
                        println!("  {}: {}", v.path, v.reason);
                    }
                    EXIT_DIAGNOSTICS
                }
            }
            Err(code) => code,
        },
    };
    ExitCode::from(code)
}
