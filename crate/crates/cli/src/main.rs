//! Batch front end: load systems, measures, and property specs, run the
//! checkers, and emit deterministic reports.
//!
//! Exit codes: 0 all checks pass, 1 some check fails, 2 usage or parse
//! error, 3 semantic error (zero-probability class, non-measurable event,
//! zero conditioning event, unknown agents).

mod files;
mod report;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use files::{
    kind_name, parse_rational_list, read_spec, read_system, write_formula_spec, write_system,
    SpecEntry,
};
use report::{Report, ReportEntry};
use veil_core::anonymity::{check, Mode};
use veil_core::csp::{
    apply_hiding, compatible_system, parse_trace_file, render_trace, strong_anonymity_on,
    theorem51_check, Event,
};
use veil_core::dc::{build_dc_system, dc_conditional_spec, dc_spec_formulas, DcConfig};
use veil_core::logic::{valid_in, EvalContext};
use veil_core::ratio::parse_rational;
use veil_core::system::AgentId;

#[derive(Parser)]
#[command(
    name = "veil",
    about = "Epistemic and probabilistic anonymity checking over finite multiagent systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the formulas and anonymity queries of a spec file over a system file.
    Check {
        /// JSON system file
        system: PathBuf,
        /// JSON spec file (formula and query entries)
        spec: PathBuf,
        /// Default occurrence mode for queries that do not set one
        #[arg(long, default_value = "theta")]
        mode: String,
        /// Emit the report as JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Generate dining-cryptographers systems and their spec files.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Build the interpreted system compatible with a trace process.
    ImportCsp {
        /// Trace file (header `alphabet: ...`, one trace per line)
        traces: PathBuf,
        /// Comma-separated anonymized events (the set A, e.g. `0.gives,1.gives`)
        #[arg(long)]
        alphabet: String,
        /// Observer agent name
        #[arg(long, default_value = "o")]
        observer: String,
        /// Output system file
        #[arg(long)]
        out: PathBuf,
        /// Close the trace set under prefixes instead of rejecting gaps
        #[arg(long)]
        close_prefixes: bool,
        /// Comma-separated events to hide before building the system
        #[arg(long)]
        hide: Option<String>,
    },
    /// Check strong anonymity of a trace process on an alphabet.
    CspCheck {
        /// Trace file
        traces: PathBuf,
        /// Comma-separated anonymized events (the set A)
        #[arg(long)]
        alphabet: String,
        /// Comma-separated events to hide first
        #[arg(long)]
        hide: Option<String>,
        /// Close the trace set under prefixes instead of rejecting gaps
        #[arg(long)]
        close_prefixes: bool,
        /// Cross-check against anonymity-up-to on the compatible system
        #[arg(long)]
        verify_theorem: bool,
        /// Observer agent for the cross-check
        #[arg(long, default_value = "o")]
        observer: String,
        /// Emit the report as JSON instead of text
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum GenerateKind {
    /// Possibilistic dining cryptographers (no measure).
    Dc {
        /// Ring size
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Include the outside observer `o`
        #[arg(long)]
        outsider: bool,
        /// Output system file
        #[arg(long)]
        out: PathBuf,
        /// Also write the ring anonymity spec
        #[arg(long)]
        emit_spec: Option<PathBuf>,
    },
    /// Probabilistic dining cryptographers with payer priors.
    DcProb {
        /// Ring size
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Include the outside observer `o`
        #[arg(long)]
        outsider: bool,
        /// Comma-separated cryptographer priors, conditional on one of them paying
        #[arg(long)]
        priors: String,
        /// Unconditional probability that nobody in the ring paid
        #[arg(long, default_value = "0")]
        nsa_share: String,
        /// Output system file
        #[arg(long)]
        out: PathBuf,
        /// Also write the conditional-anonymity spec
        #[arg(long)]
        emit_spec: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl std::fmt::Display) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }

    fn semantic(message: impl std::fmt::Display) -> Self {
        Failure {
            code: 3,
            message: message.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Check {
            system,
            spec,
            mode,
            json,
        } => run_check(&system, &spec, &mode, json),
        Command::Generate { kind } => run_generate(kind),
        Command::ImportCsp {
            traces,
            alphabet,
            observer,
            out,
            close_prefixes,
            hide,
        } => run_import_csp(&traces, &alphabet, &observer, &out, close_prefixes, hide),
        Command::CspCheck {
            traces,
            alphabet,
            hide,
            close_prefixes,
            verify_theorem,
            observer,
            json,
        } => run_csp_check(
            &traces,
            &alphabet,
            hide,
            close_prefixes,
            verify_theorem,
            &observer,
            json,
        ),
    }
}

fn parse_mode(mode: &str) -> Result<Mode, Failure> {
    match mode {
        "theta" => Ok(Mode::Theta),
        "delta" => Ok(Mode::Delta),
        other => Err(Failure::usage(format!(
            "--mode must be theta or delta, got {other:?}"
        ))),
    }
}

fn run_check(
    system_path: &Path,
    spec_path: &Path,
    mode: &str,
    json: bool,
) -> Result<u8, Failure> {
    let default_mode = parse_mode(mode)?;
    let loaded = read_system(system_path).map_err(Failure::usage)?;
    let entries = read_spec(spec_path, default_mode).map_err(Failure::usage)?;

    let ctx = match &loaded.measure {
        Some(measure) => EvalContext::with_measure(&loaded.system, measure),
        None => EvalContext::new(&loaded.system),
    };
    let mut rows = Vec::new();
    for (idx, entry) in entries.iter().enumerate() {
        let index = idx + 1;
        let row = match entry {
            SpecEntry::Formula(formula) => match valid_in(&ctx, formula) {
                Ok(verdict) => {
                    let report = veil_core::anonymity::CheckReport {
                        holds: verdict.holds,
                        compiled: formula.clone(),
                        witness: verdict.witness,
                        diagnostics: Default::default(),
                    };
                    ReportEntry::from_check(index, "formula", None, &report)
                }
                Err(error) => ReportEntry::from_error(
                    index,
                    "formula",
                    None,
                    Some(formula.to_string()),
                    error.to_string(),
                ),
            },
            SpecEntry::Query(query) => match check(&ctx, query) {
                Ok(outcome) => {
                    ReportEntry::from_check(index, "query", Some(kind_name(query.kind)), &outcome)
                }
                Err(error) => ReportEntry::from_error(
                    index,
                    "query",
                    Some(kind_name(query.kind)),
                    None,
                    error.to_string(),
                ),
            },
        };
        rows.push(row);
    }
    let report = Report::new(rows);
    if json {
        print!("{}", report.render_json());
    } else {
        print!("{}", report.render_text());
    }
    Ok(report.exit_code() as u8)
}

fn run_generate(kind: GenerateKind) -> Result<u8, Failure> {
    match kind {
        GenerateKind::Dc {
            n,
            outsider,
            out,
            emit_spec,
        } => {
            let cfg = DcConfig::uniform(n, outsider);
            let dc = build_dc_system(&cfg).map_err(Failure::usage)?;
            write_system(&out, &dc.interpreted, None).map_err(Failure::usage)?;
            println!(
                "wrote {} ({} runs, horizon {})",
                out.display(),
                dc.interpreted.system().runs().len(),
                dc.interpreted.horizon()
            );
            if let Some(spec_path) = emit_spec {
                let formulas = dc_spec_formulas(&cfg);
                write_formula_spec(&spec_path, &formulas).map_err(Failure::usage)?;
                println!(
                    "wrote {} ({} formulas)",
                    spec_path.display(),
                    formulas.len()
                );
            }
            Ok(0)
        }
        GenerateKind::DcProb {
            n,
            outsider,
            priors,
            nsa_share,
            out,
            emit_spec,
        } => {
            let conditional = parse_rational_list(&priors).map_err(Failure::usage)?;
            let nsa = parse_rational(&nsa_share)
                .map_err(|e| Failure::usage(format!("--nsa-share: {e}")))?;
            let cfg = DcConfig::from_conditional_priors(n, outsider, &conditional, nsa)
                .map_err(Failure::usage)?;
            let dc = build_dc_system(&cfg).map_err(Failure::usage)?;
            write_system(&out, &dc.interpreted, dc.measure.as_ref()).map_err(Failure::usage)?;
            println!(
                "wrote {} ({} runs, horizon {})",
                out.display(),
                dc.interpreted.system().runs().len(),
                dc.interpreted.horizon()
            );
            if let Some(spec_path) = emit_spec {
                let spec = dc_conditional_spec(&cfg).map_err(Failure::semantic)?;
                for (actor, observer) in &spec.undefined {
                    eprintln!(
                        "warning: alpha({actor}, {observer}) has a zero denominator; \
                         the pair is omitted from the emitted spec file"
                    );
                }
                write_formula_spec(&spec_path, &spec.formulas).map_err(Failure::usage)?;
                println!(
                    "wrote {} ({} formulas)",
                    spec_path.display(),
                    spec.formulas.len()
                );
            }
            Ok(0)
        }
    }
}

fn parse_event_list(text: &str) -> BTreeSet<Event> {
    text.split(',')
        .map(str::trim)
        .filter(|part| !part.is_empty())
        .map(Event::new)
        .collect()
}

fn load_process(
    path: &Path,
    close_prefixes: bool,
    hide: Option<&str>,
) -> Result<veil_core::csp::Process, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let process = parse_trace_file(&text, close_prefixes)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    match hide {
        None => Ok(process),
        Some(events) => apply_hiding(&process, &parse_event_list(events)).map_err(Failure::usage),
    }
}

fn run_import_csp(
    traces: &Path,
    alphabet: &str,
    observer: &str,
    out: &Path,
    close_prefixes: bool,
    hide: Option<String>,
) -> Result<u8, Failure> {
    let process = load_process(traces, close_prefixes, hide.as_deref())?;
    let renamed = parse_event_list(alphabet);
    let observer = AgentId::new(observer).map_err(Failure::usage)?;
    let system = compatible_system(&process, &renamed, &observer).map_err(Failure::usage)?;
    write_system(out, &system, None).map_err(Failure::usage)?;
    println!(
        "wrote {} ({} runs, horizon {})",
        out.display(),
        system.system().runs().len(),
        system.horizon()
    );
    Ok(0)
}

fn run_csp_check(
    traces: &Path,
    alphabet: &str,
    hide: Option<String>,
    close_prefixes: bool,
    verify_theorem: bool,
    observer: &str,
    json: bool,
) -> Result<u8, Failure> {
    let process = load_process(traces, close_prefixes, hide.as_deref())?;
    let renamed = parse_event_list(alphabet);
    let verdict = strong_anonymity_on(&process, &renamed).map_err(Failure::usage)?;
    let theorem = if verify_theorem {
        let observer = AgentId::new(observer).map_err(Failure::usage)?;
        Some(theorem51_check(&process, &renamed, &observer).map_err(Failure::semantic)?)
    } else {
        None
    };

    if json {
        let payload = serde_json::json!({
            "alphabet": renamed.iter().map(Event::as_str).collect::<Vec<_>>(),
            "strong_anonymity": verdict.holds,
            "counterexample": verdict.counterexample.as_ref().map(|t| render_trace(t)),
            "theorem51": theorem,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&payload).expect("serializes")
        );
    } else {
        let alphabet_text = renamed
            .iter()
            .map(Event::as_str)
            .collect::<Vec<_>>()
            .join(", ");
        println!(
            "strong anonymity on {{{alphabet_text}}}: {}",
            if verdict.holds { "PASS" } else { "FAIL" }
        );
        if let Some(counterexample) = &verdict.counterexample {
            println!("counterexample: {}", render_trace(counterexample));
        }
        if let Some(theorem) = theorem {
            println!(
                "theorem cross-check (strong anonymity vs anonymity up to the performers): {}",
                if theorem { "agree" } else { "DISAGREE" }
            );
        }
    }
    if theorem == Some(false) {
        return Ok(3);
    }
    Ok(if verdict.holds { 0 } else { 1 })
}
