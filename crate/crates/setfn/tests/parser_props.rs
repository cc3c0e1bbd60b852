//! Property suite for the concrete syntax: printing any generated formula
//! and parsing the result reproduces the tree exactly, and printing is
//! idempotent on its own output.

mod common;

use proptest::prelude::*;
use setfn::parser::{parse_formula, print_formula};
use setfn::syntax::Registry;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn printing_then_parsing_reproduces_the_tree(seed in any::<u64>()) {
        let reg = Registry::builtin();
        let f = common::formula_from_seed(seed);
        let text = print_formula(&f);
        let back = parse_formula(&text, &reg)
            .unwrap_or_else(|e| panic!("printed form failed to parse: `{text}`: {e}"));
        prop_assert_eq!(&back, &f, "text `{}` reparsed differently", text);
        let again = print_formula(&back);
        prop_assert_eq!(&again, &text, "printing is not idempotent on `{}`", text);
    }
}

#[test]
fn every_axiom_prints_parses_and_checks() {
    let reg = Registry::builtin();
    for id in setfn::theory::AxiomId::ALL {
        let f = setfn::theory::axiom(id);
        let text = print_formula(f);
        let back = parse_formula(&text, &reg)
            .unwrap_or_else(|e| panic!("axiom {id:?} failed to reparse: {e}"));
        assert_eq!(&back, f, "axiom {id:?} changed under a print/parse cycle");
        assert!(setfn::syntax::check_wff(f, &reg).ok, "axiom {id:?} is not well-formed");
    }
}
