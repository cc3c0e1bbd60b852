//! End-to-end checks of the proof checker over the bundled corpus: every
//! script must be accepted, every premise perturbation rejected, and the
//! authoring affordances (placeholder reporting, witness freshness, the
//! arbitrary-constant discipline) must hold.

use std::fs;
use std::path::PathBuf;

use setfn::kernel::{
    check_proof, check_proof_trace, parse_script, KernelError, ProofScript, Verdict,
};
use setfn::parser::print_formula;

const SCRIPTS: [&str; 6] = [
    "identity_on_omega.tfp",
    "identity_on_012.tfp",
    "main_theorem_inst.tfp",
    "sep_inst.tfp",
    "sub_inst.tfp",
    "graph_theorem.tfp",
];

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load_script(name: &str) -> ProofScript {
    let path = corpus_dir().join(name);
    let text = fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    parse_script(&text).unwrap_or_else(|e| panic!("parsing {name}: {e}"))
}

#[test]
fn corpus_scripts_are_accepted() {
    for name in SCRIPTS {
        let script = load_script(name);
        let verdict = check_proof(&script);
        assert!(verdict.is_accepted(), "{name}: {verdict:?}");
    }
}

/// Replacing any premise index with any other step whose recorded formula
/// differs must make the checker reject. Substituting a step with an
/// identical recorded formula re-derives the same conclusion, so those
/// substitutions are not faults and are skipped.
#[test]
fn premise_mutants_are_all_rejected() {
    let mut total = 0usize;
    let mut survivors: Vec<String> = Vec::new();
    for name in SCRIPTS {
        let script = load_script(name);
        let max_id = script.steps.last().map(|s| s.id).unwrap_or(0);
        let recorded = |id: usize| {
            script
                .steps
                .iter()
                .find(|s| s.id == id)
                .and_then(|s| s.formula.clone())
        };
        for si in 0..script.steps.len() {
            for slot in 0..script.steps[si].premises.len() {
                let orig = script.steps[si].premises[slot];
                let orig_formula = recorded(orig);
                for cand in 1..=max_id {
                    if cand == orig || recorded(cand) == orig_formula {
                        continue;
                    }
                    let mut mutant = script.clone();
                    mutant.steps[si].premises[slot] = cand;
                    total += 1;
                    if check_proof(&mutant).is_accepted() {
                        survivors.push(format!(
                            "{name}: step {} slot {slot} -> {cand}",
                            script.steps[si].id
                        ));
                    }
                }
            }
        }
    }
    assert!(total > 1000, "mutation harness produced only {total} mutants");
    assert!(survivors.is_empty(), "accepted mutants: {survivors:?}");
}

#[test]
fn checking_is_deterministic() {
    for name in SCRIPTS {
        let script = load_script(name);
        let (v1, t1) = check_proof_trace(&script);
        let (v2, t2) = check_proof_trace(&script);
        assert!(v1.is_accepted() && v2.is_accepted(), "{name}");
        assert_eq!(t1, t2, "{name}: trace differs between runs");
    }
}

/// In the {0,1,2} script the conjunctor is taken apart element by element
/// and rebuilt by verification; the rebuilt step must carry exactly the
/// formula the elimination started from.
#[test]
fn verification_rebuilds_what_elimination_takes_apart() {
    let script = load_script("identity_on_012.tfp");
    let formula_of = |id: usize| {
        script
            .steps
            .iter()
            .find(|s| s.id == id)
            .and_then(|s| s.formula.as_ref())
            .map(print_formula)
            .unwrap()
    };
    assert_eq!(formula_of(6), formula_of(10));
    assert!(check_proof(&script).is_accepted());
}

#[test]
fn element_outside_the_range_is_rejected() {
    let mut script = load_script("identity_on_012.tfp");
    let step = script.steps.iter_mut().find(|s| s.id == 7).unwrap();
    assert_eq!(step.side, vec!["0".to_string()]);
    step.side[0] = "5".into();
    match check_proof(&script) {
        Verdict::Rejected { step: 7, .. } => {}
        other => panic!("expected rejection at step 7, got {other:?}"),
    }
}

/// Blanking a recorded formula to the placeholder must produce a rejection
/// that reports exactly the formula the rule would derive, which is the
/// mechanism the fill-in authoring flow relies on.
#[test]
fn placeholders_report_the_derivable_formula() {
    let mut script = load_script("identity_on_omega.tfp");
    let original = script.steps[2].formula.take().unwrap();
    match check_proof(&script) {
        Verdict::Rejected { step: 3, reason: KernelError::Placeholder { derived } } => {
            assert_eq!(derived, print_formula(&original));
        }
        other => panic!("expected a placeholder report at step 3, got {other:?}"),
    }
}

#[test]
fn generalization_requires_an_arbitrary_constant() {
    let declared_arbitrary = "\
arbitrary c0 : Set
goal : forall X . (X = empty => X = empty)
1. discharge : c0 = empty
2. discharge [1 1] : c0 = empty => c0 = empty
3. all-i [2] {c0 X} : forall X . (X = empty => X = empty)
";
    let script = parse_script(declared_arbitrary).unwrap();
    assert!(check_proof(&script).is_accepted());

    let not_arbitrary = "\
set c0 { }
goal : forall X . (X = empty => X = empty)
1. discharge : c0 = empty
2. discharge [1 1] : c0 = empty => c0 = empty
3. all-i [2] {c0 X} : forall X . (X = empty => X = empty)
";
    let script = parse_script(not_arbitrary).unwrap();
    match check_proof(&script) {
        Verdict::Rejected { step: 3, .. } => {}
        other => panic!("expected rejection at step 3, got {other:?}"),
    }
}

/// A goal that tries to name a choice witness instead of re-quantifying it
/// is unprovable: the goal line parses before the witness exists, so the
/// name stays a plain variable there and the final comparison fails.
#[test]
fn goals_cannot_capture_choice_witnesses() {
    let text = fs::read_to_string(corpus_dir().join("identity_on_omega.tfp")).unwrap();
    let hijacked = text.replace(
        "goal : exists F{omega} . exists Y . (F{omega} : omega ->> Y and /\\_{a in omega} . F{omega} : a |-> a)",
        "goal : exists Y . (iom : omega ->> Y and /\\_{a in omega} . iom : a |-> a)",
    );
    assert_ne!(text, hijacked, "goal line not found");
    let script = parse_script(&hijacked).unwrap();
    match check_proof(&script) {
        Verdict::Rejected { step: 7, reason: KernelError::GoalMismatch { .. } } => {}
        other => panic!("expected a final goal mismatch, got {other:?}"),
    }
}

/// A choice witness must use a fresh name: colliding with a declared
/// constant is rejected at the introducing step.
#[test]
fn witnesses_must_be_fresh() {
    let text = fs::read_to_string(corpus_dir().join("identity_on_omega.tfp")).unwrap();
    let shadowed = format!("arbitrary iom : Fn omega\n{text}");
    let script = parse_script(&shadowed).unwrap();
    match check_proof(&script) {
        Verdict::Rejected { step: 4, reason: KernelError::NameCollision(n) } => {
            assert_eq!(n, "iom");
        }
        other => panic!("expected a name collision at step 4, got {other:?}"),
    }
}
