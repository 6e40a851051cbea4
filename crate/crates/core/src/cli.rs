//! The `steering` command-line tool.
//!
//! Exit codes: 0 ok, 1 validation failure, 2 parse or usage error,
//! 3 truncated decomposition, 4 oracle disagreement.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::assemblage::Assemblage;
use crate::decomposition::{decompose, DecomposeOptions};
use crate::exec::Execution;
use crate::extremality::{is_extremal, is_extremal_direct};
use crate::format::{self, parse_assemblage};
use crate::numerics::{DEFAULT_EPSILON, HERMITICITY_TOL};
use crate::scenarios::Scenario;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_TRUNCATED: i32 = 3;
pub const EXIT_DISAGREEMENT: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "steering",
    version,
    about = "Extremality tests and extremal decompositions of steering assemblages"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check positivity, no-signalling and normalization.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Decide extremality and print a witness perturbation if there is one.
    Check {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// Also run the direct test and compare verdicts.
        #[arg(long)]
        oracle: bool,
    },
    /// Decompose into extremal assemblages.
    Decompose {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 100_000)]
        max_leaves: usize,
        /// Defaults to 4 N R d.
        #[arg(long)]
        max_depth: Option<usize>,
        /// Result file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Disable the parallel recursion.
        #[arg(long)]
        sequential: bool,
    },
    /// Write a named example assemblage.
    Generate {
        /// pentagon, xtetra, mub3 or povm-counterexample
        name: String,
        /// White-noise weight (mub3 only, default 0.2).
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

struct Failure(i32, String);

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure(EXIT_PARSE, format!("{}: {e}", path.display()))
}

fn check_epsilon(epsilon: f64) -> Result<(), Failure> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Failure(
            EXIT_PARSE,
            format!("--epsilon must be positive, got {epsilon}"),
        ))
    }
}

/// Reads, parses and validates an assemblage file, printing the residual
/// report to `out`.
fn load(
    path: &Path,
    epsilon: f64,
    out: &mut dyn Write,
    verbose: bool,
) -> Result<Assemblage, Failure> {
    check_epsilon(epsilon)?;
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let raw = parse_assemblage(&text)
        .map_err(|e| Failure(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    let (herm, (hn, hr)) = raw.hermiticity_residual();
    let herm_ok = raw.to_assemblage().is_ok();
    let line = |out: &mut dyn Write, name: &str, value: String, ok: bool| {
        let _ = writeln!(
            out,
            "{name:<14} {value:<52} {}",
            if ok { "ok" } else { "FAIL" }
        );
    };
    if verbose || !herm_ok {
        line(
            out,
            "hermiticity",
            format!("max |s_ij - conj(s_ji)| = {herm:.6e} at (outcome {hn}, input {hr})"),
            herm_ok,
        );
    }
    if !herm_ok {
        return Err(Failure(
            EXIT_INVALID,
            format!(
                "block (outcome {hn}, input {hr}) is not Hermitian (tolerance {HERMITICITY_TOL:e})"
            ),
        ));
    }
    let sigma = raw.to_assemblage().expect("checked above");
    let report = sigma.validate(epsilon);
    if verbose || !report.passed() {
        line(
            out,
            "positivity",
            format!(
                "min eigenvalue = {:.6e} at (outcome {}, input {})",
                report.min_eigenvalue, report.min_block.0, report.min_block.1
            ),
            report.positivity_ok(),
        );
        line(
            out,
            "no-signalling",
            format!("max marginal gap = {:.6e}", report.max_marginal_gap),
            report.no_signalling_ok(),
        );
        line(
            out,
            "trace",
            format!("|Tr marginal - 1| = {:.6e}", report.trace_deviation),
            report.trace_ok(),
        );
    }
    if !report.passed() {
        return Err(Failure(
            EXIT_INVALID,
            format!("validation failed at epsilon {epsilon:e}"),
        ));
    }
    Ok(sigma)
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure(EXIT_PARSE, e.to_string())),
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Validate { file, epsilon } => {
            load(&file, epsilon, out, true)?;
            let _ = writeln!(out, "PASS");
            Ok(EXIT_OK)
        }
        Command::Check {
            file,
            epsilon,
            oracle,
        } => {
            let sigma = load(&file, epsilon, out, false)?;
            let report =
                is_extremal(&sigma, epsilon).map_err(|e| Failure(EXIT_INVALID, e.to_string()))?;
            let verdict = if report.extremal {
                "extremal"
            } else {
                "not extremal"
            };
            let _ = writeln!(out, "verdict: {verdict}");
            let _ = writeln!(out, "stage: {}", report.stage);
            if let Some(w) = &report.witness {
                let _ = writeln!(out, "witness:");
                let _ = write!(out, "{}", format::perturbation_to_json(w));
            }
            if oracle {
                let direct = is_extremal_direct(&sigma, epsilon)
                    .map_err(|e| Failure(EXIT_INVALID, e.to_string()))?;
                let agree = direct == report.extremal;
                let _ = writeln!(
                    out,
                    "oracle: {} ({})",
                    if direct { "extremal" } else { "not extremal" },
                    if agree { "agrees" } else { "DISAGREES" }
                );
                if !agree {
                    let _ = writeln!(err, "error: extremality test and direct oracle disagree");
                    return Ok(EXIT_DISAGREEMENT);
                }
            }
            Ok(EXIT_OK)
        }
        Command::Decompose {
            file,
            epsilon,
            max_leaves,
            max_depth,
            out: out_path,
            sequential,
        } => {
            let sigma = load(&file, epsilon, out, false)?;
            let opts = DecomposeOptions {
                epsilon,
                max_leaves,
                max_depth,
                execution: if sequential {
                    Execution::Sequential
                } else {
                    Execution::Parallel
                },
                ..DecomposeOptions::default()
            };
            let result =
                decompose(&sigma, &opts).map_err(|e| Failure(EXIT_INVALID, e.to_string()))?;
            let text = format::result_to_json(&sigma, &result, epsilon);
            // With the result on stdout, the summary goes to stderr.
            let summary: &mut dyn Write = if out_path.is_some() { out } else { err };
            let weights = result.leaves.iter().map(|l| l.weight);
            let min_w = weights.clone().fold(f64::INFINITY, f64::min);
            let max_w = weights.fold(0.0, f64::max);
            let _ = writeln!(summary, "leaves        {}", result.leaves.len());
            let _ = writeln!(summary, "min weight    {min_w:.6e}");
            let _ = writeln!(summary, "max weight    {max_w:.6e}");
            let _ = writeln!(
                summary,
                "residual      {:.6e}",
                result.reconstruction_residual(&sigma)
            );
            let _ = writeln!(
                summary,
                "nodes         {} (splits {}, depth {}, merges {})",
                result.stats.nodes,
                result.stats.splits,
                result.stats.max_depth,
                result.stats.merges
            );
            if let Some(rs) = &result.stats.root_split {
                let _ = writeln!(
                    summary,
                    "first split   {:.6} / {:.6}",
                    rs.p_plus, rs.p_minus
                );
            }
            if result.truncated {
                let _ = writeln!(
                    summary,
                    "truncated     {} pending nodes",
                    result.pending.len()
                );
            }
            write_output(out_path.as_deref(), &text, out)?;
            Ok(if result.truncated {
                EXIT_TRUNCATED
            } else {
                EXIT_OK
            })
        }
        Command::Generate {
            name,
            noise,
            out: out_path,
        } => {
            let scenario: Scenario = name
                .parse()
                .map_err(|e: crate::scenarios::ScenarioError| Failure(EXIT_PARSE, e.to_string()))?;
            let sigma = scenario
                .build(noise)
                .map_err(|e| Failure(EXIT_PARSE, e.to_string()))?;
            write_output(
                out_path.as_deref(),
                &format::assemblage_to_json(&sigma),
                out,
            )?;
            Ok(EXIT_OK)
        }
    }
}
