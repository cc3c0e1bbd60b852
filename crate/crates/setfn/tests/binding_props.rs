//! Property suite for the binding analysis: the free-variable law of
//! substitution, capture avoidance, and conjunctor expansion against
//! hand-built instances.
//!
//! The generator binds names only from its binder pools and draws free
//! variables from the disjoint pools `P R p r`, so a free-pool variable has
//! no dependent function variables and a free-pool replacement can never be
//! captured. That split makes the exact set equality of the free-variable
//! law testable; capture avoidance is then exercised separately with
//! replacements drawn from the binder pools.

mod common;

use setfn::binding::{expand_conjunction, occurrences, substitute};
use setfn::parser::print_formula;
use setfn::syntax::{check_wff, Formula, Registry, Sort, Term};

const FREE_SETS: [&str; 2] = ["P", "R"];
const FREE_THINGS: [&str; 2] = ["p", "r"];
const BOUND_SETS: [&str; 4] = ["X", "Y", "Z", "W"];
const BOUND_THINGS: [&str; 4] = ["a", "b", "c", "g"];

/// Free simple pool variables of a formula, with their sorts.
fn pool_candidates(f: &Formula) -> Vec<(String, Sort)> {
    let free = occurrences(f).free;
    let mut out = Vec::new();
    for n in FREE_SETS {
        if free.contains(n) {
            out.push((n.to_string(), Sort::SetVar));
        }
    }
    for n in FREE_THINGS {
        if free.contains(n) {
            out.push((n.to_string(), Sort::ThingVar));
        }
    }
    out
}

#[test]
fn substitution_obeys_the_free_variable_law() {
    let reg = Registry::builtin();
    let mut hits = 0usize;
    for seed in 0..10_000u64 {
        let f = common::formula_from_seed(seed);
        let cands = pool_candidates(&f);
        if cands.is_empty() {
            continue;
        }
        let (x, sort) = cands[(seed as usize) % cands.len()].clone();
        // Replacements whose free variables are never bound by the
        // generator: no renaming can fire, so the law holds exactly.
        let u = match (&sort, seed % 3) {
            (Sort::SetVar, 0) => Term::Var("P".into(), Sort::SetVar),
            (Sort::SetVar, 1) => Term::Constant("omega".into()),
            (Sort::SetVar, _) => common::tower(2),
            (_, 0) => Term::Var("r".into(), Sort::ThingVar),
            (_, 1) => Term::Constant("empty".into()),
            (_, _) => common::tower(1),
        };
        let before = occurrences(&f).free;
        let result = substitute(&f, &Term::Var(x.clone(), sort.clone()), &u, &reg)
            .unwrap_or_else(|e| {
                panic!("seed {seed}: substitution refused: {e}\n{}", print_formula(&f))
            });
        let mut expected = before.clone();
        expected.remove(&x);
        if let Term::Var(n, _) = &u {
            expected.insert(n.clone());
        }
        let after = occurrences(&result).free;
        assert_eq!(
            after,
            expected,
            "seed {seed}: free set law broke for [{} := {}] on\n{}",
            x,
            setfn::parser::print_term(&u),
            print_formula(&f)
        );
        hits += 1;
    }
    assert!(hits >= 2000, "only {hits} formulas offered a free pool variable");
}

#[test]
fn substitution_avoids_capturing_the_replacement() {
    let reg = Registry::builtin();
    let mut oks = 0usize;
    let mut refused = 0usize;
    for seed in 0..10_000u64 {
        let f = common::formula_from_seed(seed);
        let cands = pool_candidates(&f);
        if cands.is_empty() {
            continue;
        }
        let (x, sort) = cands[(seed as usize) % cands.len()].clone();
        // Replacement names collide with the binder pools on purpose, so the
        // substitution must rename binders (or refuse when an operator index
        // is at stake) to keep every substituted occurrence free.
        let u_name = match &sort {
            Sort::SetVar => BOUND_SETS[(seed as usize / 7) % BOUND_SETS.len()],
            _ => BOUND_THINGS[(seed as usize / 7) % BOUND_THINGS.len()],
        };
        let u = Term::Var(u_name.to_string(), sort.clone());
        assert_eq!(
            common::count_free(&f, u_name, &sort),
            0,
            "generator bound pools leaked a free occurrence of {u_name}"
        );
        let x_occurrences = common::count_free(&f, &x, &sort);
        assert!(x_occurrences > 0);
        match substitute(&f, &Term::Var(x.clone(), sort.clone()), &u, &reg) {
            Err(_) => refused += 1,
            Ok(result) => {
                oks += 1;
                assert_eq!(
                    common::count_free(&result, u_name, &sort),
                    x_occurrences,
                    "seed {seed}: an occurrence of the replacement `{u_name}` was \
                     captured or lost in\n{}",
                    print_formula(&f)
                );
                assert_eq!(
                    common::count_free(&result, &x, &sort),
                    0,
                    "seed {seed}: a free occurrence of `{x}` survived"
                );
            }
        }
    }
    assert!(oks >= 1000, "only {oks} capture-prone substitutions went through");
    // Refusals happen only when an operator index is at stake; they must be
    // the exception, not the rule.
    assert!(refused < oks, "refused {refused} of {} capture-prone substitutions", refused + oks);
}

#[test]
fn conjunction_expansion_matches_the_hand_built_instances() {
    let reg = Registry::builtin();
    let element_lists: Vec<Vec<Term>> = vec![
        vec![],
        vec![Term::Constant("empty".into())],
        vec![common::tower(1), common::tower(2)],
        vec![Term::Constant("empty".into()), common::tower(1), common::tower(2)],
    ];
    for base in ["u", "f"] {
        for index in ["a", "b"] {
            let images = [
                Term::Var(index.to_string(), Sort::ThingVar),
                common::tower(1),
                Term::Var("p".into(), Sort::ThingVar),
            ];
            for img in &images {
                let body = Formula::MapsTo(
                    Term::Var(base.to_string(), Sort::UrFamily(index.to_string())),
                    Term::Var(index.to_string(), Sort::ThingVar),
                    img.clone(),
                );
                let conj = Formula::BigAnd {
                    index: index.to_string(),
                    range: Term::Constant("omega".into()),
                    body: Box::new(body.clone()),
                };
                for elements in &element_lists {
                    let out = expand_conjunction(&conj, elements, &reg)
                        .expect("expansion over closed elements");
                    assert_eq!(out.len(), elements.len());
                    for (inst, el) in out.iter().zip(elements) {
                        // Hand-built oracle: the family head becomes a
                        // function variable on the singleton of the element,
                        // and the index is replaced everywhere.
                        let expected_img =
                            if *img == Term::Var(index.to_string(), Sort::ThingVar) {
                                el.clone()
                            } else {
                                img.clone()
                            };
                        let expected = Formula::MapsTo(
                            Term::Var(
                                base.to_string(),
                                Sort::FnOnConstant(Box::new(Term::Singleton(Box::new(
                                    el.clone(),
                                )))),
                            ),
                            el.clone(),
                            expected_img,
                        );
                        assert_eq!(inst, &expected, "instance differs from the oracle");
                        assert_eq!(
                            common::count_free(inst, index, &Sort::ThingVar),
                            0,
                            "instance still open in the index"
                        );
                        assert!(check_wff(inst, &reg).ok);
                    }
                }
            }
        }
    }
}

#[test]
fn expansion_instances_are_well_formed_and_closed_in_the_index() {
    let reg = Registry::builtin();
    for seed in 0..2_000u64 {
        let mut g = common::Gen::new(seed);
        let mut sc = common::Scope::default();
        let index = ["a", "b", "c"][g.pick(3)].to_string();
        let head = if g.flip() {
            Term::Var(["u", "s"][g.pick(2)].to_string(), Sort::UrFamily(index.clone()))
        } else {
            common::fn_term(&mut g, &sc)
        };
        sc.things.push(index.clone());
        let img = common::thing_term(&mut g, &sc);
        sc.things.pop();
        let body = Formula::MapsTo(head, Term::Var(index.clone(), Sort::ThingVar), img);
        let conj = Formula::BigAnd {
            index: index.clone(),
            range: Term::Constant("omega".into()),
            body: Box::new(body.clone()),
        };
        let elements: Vec<Term> = (0..g.pick(4)).map(common::tower).collect();
        let out = expand_conjunction(&conj, &elements, &reg)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_eq!(out.len(), elements.len());
        for (inst, el) in out.iter().zip(&elements) {
            assert!(
                check_wff(inst, &reg).ok,
                "seed {seed}: ill-formed instance {}",
                print_formula(inst)
            );
            assert_eq!(
                common::count_free(inst, &index, &Sort::ThingVar),
                0,
                "seed {seed}: instance open in `{index}`"
            );
            let direct = substitute(
                &body,
                &Term::Var(index.clone(), Sort::ThingVar),
                el,
                &reg,
            )
            .expect("direct substitution");
            assert_eq!(inst, &direct, "seed {seed}: expansion and substitution disagree");
        }
    }
}
