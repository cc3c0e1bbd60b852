//! Command line front end.
//!
//! Verbs:
//!
//! * `parse` prints the canonical form of one formula;
//! * `wff` reports well-formedness violations;
//! * `print` prints the canonical form of every formula in a `.tf` file;
//! * `axioms` prints the axiom table;
//! * `prove` checks a `.tfp` proof script;
//! * `model-eval` evaluates a formula in a `.tfu` universe;
//! * `model-audit` evaluates every axiom in a `.tfu` universe;
//! * `model-build` generates the universe of all sets of bounded rank;
//! * `corpus` verifies a directory of `.tf`, `.tfp`, and `.tfu` artifacts.
//!
//! Exit codes: 0 on success, 1 when a check ran to completion and rejected
//! (a proof was refused, a formula evaluated false, a corpus item failed),
//! 2 on bad input (parse errors, well-formedness violations, missing files).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::kernel::{check_proof, check_proof_trace, parse_script, Verdict};
use crate::model::{audit_axioms, build_universe, parse_tfu, FnMode, Universe};
use crate::parser::{parse_formula, parse_tf, print_formula};
use crate::syntax::{check_wff, Formula, Registry};
use crate::theory::{axiom, AxiomId};

#[derive(Parser)]
#[command(
    name = "setfn",
    about = "A workbench for a finitely axiomatized theory of sets and functions",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a formula and print its canonical form.
    Parse {
        /// The formula text.
        #[arg(long)]
        formula: String,
    },
    /// Check the well-formedness side conditions of a formula.
    Wff {
        /// The formula text.
        #[arg(long)]
        formula: String,
    },
    /// Print the canonical form of every formula in a .tf file.
    Print {
        /// Path to a .tf file of named formulas.
        path: PathBuf,
    },
    /// Print the axiom table in canonical form.
    Axioms,
    /// Check a proof script.
    Prove {
        /// Path to a .tfp proof script.
        path: PathBuf,
        /// Print the derivation trace line by line.
        #[arg(long)]
        trace: bool,
    },
    /// Evaluate a formula in a finite universe.
    #[command(name = "model-eval")]
    ModelEval {
        /// Path to a .tfu universe description.
        path: PathBuf,
        /// The formula text (may mention the universe's entries).
        #[arg(long)]
        formula: String,
        /// Use the clause-based validity checker instead of the evaluator.
        #[arg(long)]
        oracle: bool,
        /// Refuse universes with more carrier values than this.
        #[arg(long, default_value_t = 512)]
        max_universe: usize,
    },
    /// Evaluate every axiom in a finite universe.
    #[command(name = "model-audit")]
    ModelAudit {
        /// Path to a .tfu universe description.
        path: PathBuf,
        /// Refuse universes with more carrier values than this.
        #[arg(long, default_value_t = 512)]
        max_universe: usize,
    },
    /// Generate the universe of all sets of rank at most --rank.
    #[command(name = "model-build")]
    ModelBuild {
        /// Maximum set rank (capped at 3).
        #[arg(long, default_value_t = 2)]
        rank: u32,
        /// Also generate every total function between the sets.
        #[arg(long)]
        fns: bool,
    },
    /// Verify a directory of corpus artifacts.
    Corpus {
        /// Directory holding .tf, .tfp, and .tfu files.
        #[arg(long, default_value = "corpus")]
        paths: PathBuf,
    },
}

/// Runs the command line tool and returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match cli.cmd {
        Command::Parse { formula } => cmd_parse(&formula),
        Command::Wff { formula } => cmd_wff(&formula),
        Command::Print { path } => cmd_print(&path),
        Command::Axioms => cmd_axioms(),
        Command::Prove { path, trace } => cmd_prove(&path, trace),
        Command::ModelEval { path, formula, oracle, max_universe } => {
            cmd_model_eval(&path, &formula, oracle, max_universe)
        }
        Command::ModelAudit { path, max_universe } => cmd_model_audit(&path, max_universe),
        Command::ModelBuild { rank, fns } => cmd_model_build(rank, fns),
        Command::Corpus { paths } => cmd_corpus(&paths),
    }
}

fn parse_with(reg: &Registry, text: &str) -> Result<Formula, String> {
    parse_formula(text, reg).map_err(|e| e.to_string())
}

fn cmd_parse(text: &str) -> i32 {
    match parse_with(&Registry::builtin(), text) {
        Ok(f) => {
            println!("{}", print_formula(&f));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn cmd_wff(text: &str) -> i32 {
    let reg = Registry::builtin();
    let f = match parse_with(&reg, text) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let report = check_wff(&f, &reg);
    if report.ok {
        println!("well-formed");
        0
    } else {
        for v in &report.violations {
            println!("{v}");
        }
        2
    }
}

fn cmd_print(path: &Path) -> i32 {
    let src = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return 2;
        }
    };
    match parse_tf(&src, &Registry::builtin()) {
        Ok(entries) => {
            for (name, f) in entries {
                println!("{name} : {}", print_formula(&f));
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn cmd_axioms() -> i32 {
    for id in AxiomId::ALL {
        println!("{} : {}", id.name(), print_formula(axiom(id)));
    }
    0
}

fn cmd_prove(path: &Path, trace: bool) -> i32 {
    let src = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return 2;
        }
    };
    let script = match parse_script(&src) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let verdict = if trace {
        let (verdict, lines) = check_proof_trace(&script);
        for line in lines {
            println!("{line}");
        }
        verdict
    } else {
        check_proof(&script)
    };
    match verdict {
        Verdict::Accepted => {
            println!("accepted");
            0
        }
        Verdict::Rejected { step, reason } => {
            println!("rejected at step {step}: {reason}");
            1
        }
    }
}

fn load_universe(path: &Path, max_universe: usize) -> Result<Universe, String> {
    let src = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let uni = parse_tfu(&src).map_err(|e| e.to_string())?;
    if uni.carrier().len() > max_universe {
        return Err(format!(
            "universe has {} carrier values, more than the cap {max_universe}",
            uni.carrier().len()
        ));
    }
    Ok(uni)
}

fn cmd_model_eval(path: &Path, text: &str, oracle: bool, max_universe: usize) -> i32 {
    let uni = match load_universe(path, max_universe) {
        Ok(u) => u,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let f = match parse_with(&uni.registry(), text) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let result = if oracle { uni.check_validity(&f) } else { uni.eval_sentence(&f) };
    match result {
        Ok(true) => {
            println!("true");
            0
        }
        Ok(false) => {
            println!("false");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn cmd_model_audit(path: &Path, max_universe: usize) -> i32 {
    let uni = match load_universe(path, max_universe) {
        Ok(u) => u,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match audit_axioms(&uni) {
        Ok(results) => {
            for (id, holds) in results {
                println!("{:8} {}", id.name(), if holds { "true" } else { "false" });
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn cmd_model_build(rank: u32, fns: bool) -> i32 {
    let mode = if fns { FnMode::AllTotal } else { FnMode::None };
    match build_universe(rank, mode) {
        Ok(uni) => {
            print!("{}", uni.to_text());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Checks every artifact in the corpus directory. A `.tf` file must parse
/// against the builtin registry with every formula well-formed; the file
/// named `axioms.tf` must in addition match the generated axiom table
/// exactly. A `.tfp` file must be accepted by the proof checker. A `.tfu`
/// file must resolve and every axiom must evaluate (the infinity axiom is
/// expected to read false in any finite universe).
fn cmd_corpus(dir: &Path) -> i32 {
    let entries = match fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) => {
            eprintln!("error: {}: {e}", dir.display());
            return 2;
        }
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("tf" | "tfp" | "tfu")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        eprintln!("error: no corpus files in {}", dir.display());
        return 2;
    }
    let mut failures = 0usize;
    for p in &paths {
        let result = check_corpus_file(p);
        match result {
            Ok(()) => println!("PASS {}", p.display()),
            Err(e) => {
                println!("FAIL {}: {e}", p.display());
                failures += 1;
            }
        }
    }
    if failures == 0 {
        0
    } else {
        1
    }
}

fn check_corpus_file(path: &Path) -> Result<(), String> {
    let src = fs::read_to_string(path).map_err(|e| e.to_string())?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("tf") => {
            let reg = Registry::builtin();
            let entries = parse_tf(&src, &reg).map_err(|e| e.to_string())?;
            for (name, f) in &entries {
                let report = check_wff(f, &reg);
                if !report.ok {
                    return Err(format!("`{name}` is not well-formed"));
                }
            }
            if path.file_name().and_then(|n| n.to_str()) == Some("axioms.tf") {
                let expected: Vec<(String, String)> = AxiomId::ALL
                    .iter()
                    .map(|&id| (id.name().to_string(), print_formula(axiom(id))))
                    .collect();
                let found: Vec<(String, String)> = entries
                    .iter()
                    .map(|(n, f)| (n.clone(), print_formula(f)))
                    .collect();
                if expected != found {
                    return Err("axiom table does not match the generated table".to_string());
                }
            }
            Ok(())
        }
        Some("tfp") => {
            let script = parse_script(&src).map_err(|e| e.to_string())?;
            match check_proof(&script) {
                Verdict::Accepted => Ok(()),
                Verdict::Rejected { step, reason } => {
                    Err(format!("rejected at step {step}: {reason}"))
                }
            }
        }
        Some("tfu") => {
            let uni = parse_tfu(&src).map_err(|e| e.to_string())?;
            let audit = audit_axioms(&uni).map_err(|e| e.to_string())?;
            let inf = audit
                .iter()
                .find(|(id, _)| *id == AxiomId::Inf)
                .map(|(_, holds)| *holds)
                .unwrap_or(false);
            if inf {
                return Err("the infinity axiom cannot hold in a finite universe".to_string());
            }
            Ok(())
        }
        _ => Err("unknown corpus file type".to_string()),
    }
}
