//! The axiom system, definitional constructions (numerals, two-tuples), and
//! theorem schema instantiation.
//!
//! The theory is finitely axiomatized: twenty sentences, no axiom schemas.
//! Separation, replacement-style subset construction, and graph existence are
//! theorem *schemas derived per instance*; this module builds the instance
//! sentences from a caller-supplied predicate.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use thiserror::Error;

use crate::binding::{primed, substitute, BindError};
use crate::parser::parse_formula;
use crate::syntax::{formula_vars, term_vars, Formula, Registry, Sort, Term};

/// Largest numeral accepted as a singleton tower.
pub const NUMERAL_CAP: u64 = 64;

/// Errors from numeral and schema construction.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("numeral {got} exceeds the cap of {cap}")]
    CapExceeded { got: u64, cap: u64 },
    #[error("hole `{hole}` expects {expected} argument(s), found {found}")]
    ArityMismatch { hole: String, expected: usize, found: usize },
    #[error("filler formula has stray free variable `{0}` besides its parameters")]
    StrayFreeVariable(String),
    #[error("invalid filler: {0}")]
    BadFiller(String),
    #[error("substitution failed during instantiation: {0}")]
    Bind(#[from] BindError),
}

/// The Zermelo numeral `n`: a singleton tower of height `n` over `empty`.
pub fn zermelo_ordinal(n: u64) -> Result<Term, TheoryError> {
    if n > NUMERAL_CAP {
        return Err(TheoryError::CapExceeded { got: n, cap: NUMERAL_CAP });
    }
    let mut t = Term::Constant("empty".into());
    for _ in 0..n {
        t = Term::Singleton(Box::new(t));
    }
    Ok(t)
}

/// Characterization of `t = <a,b>` where `<a,b>` is the two-tuple
/// `{a, {a,b}}`: there is a set with exactly the members `a` and `{a,b}`,
/// and `t` equals it. Bound names are primed away from the argument terms.
pub fn two_tuple_eq(t: &Term, a: &Term, b: &Term, reg: &Registry) -> Formula {
    let mut taken: Vec<String> = Vec::new();
    for x in [t, a, b] {
        taken.extend(term_vars(x).into_iter().map(|(n, _)| n));
    }
    let fresh = |base: &str, taken: &[String]| {
        primed(base, |cand| taken.iter().any(|x| x == cand) || reg.contains(cand))
    };
    let p = fresh("P", &taken);
    taken.push(p.clone());
    let g = fresh("g", &taken);
    taken.push(g.clone());
    let q = fresh("Q", &taken);
    taken.push(q.clone());
    let h = fresh("h", &taken);
    let pv = Term::Var(p.clone(), Sort::SetVar);
    let gv = Term::Var(g.clone(), Sort::ThingVar);
    let qv = Term::Var(q.clone(), Sort::SetVar);
    let hv = Term::Var(h.clone(), Sort::ThingVar);
    // forall h . (h in Q <=> (h = a or h = b))
    let inner_pair = Formula::Forall(
        h,
        Sort::ThingVar,
        Box::new(Formula::Iff(
            Box::new(Formula::Mem(hv.clone(), qv.clone())),
            Box::new(Formula::Or(
                Box::new(Formula::Eq(hv.clone(), a.clone())),
                Box::new(Formula::Eq(hv, b.clone())),
            )),
        )),
    );
    // exists Q . (g = Q and <inner_pair>)
    let is_pair = Formula::Exists(
        q,
        Sort::SetVar,
        Box::new(Formula::And(
            Box::new(Formula::Eq(gv.clone(), qv)),
            Box::new(inner_pair),
        )),
    );
    // forall g . (g in P <=> (g = a or <is_pair>))
    let members = Formula::Forall(
        g,
        Sort::ThingVar,
        Box::new(Formula::Iff(
            Box::new(Formula::Mem(gv.clone(), pv.clone())),
            Box::new(Formula::Or(Box::new(Formula::Eq(gv, a.clone())), Box::new(is_pair))),
        )),
    );
    Formula::Exists(
        p,
        Sort::SetVar,
        Box::new(Formula::And(Box::new(Formula::Eq(t.clone(), pv)), Box::new(members))),
    )
}

/// Identifiers of the twenty axioms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AxiomId {
    Ext,
    FnNotSet,
    SetNoDom,
    Empty,
    Pair,
    Sum,
    Pow,
    Inf,
    Reg,
    Eps,
    GenF,
    NegD,
    NonA,
    NegC,
    Inv,
    ExtF,
    InfFn,
    Ufa,
    RegF,
    SumF,
}

impl AxiomId {
    pub const ALL: [AxiomId; 20] = [
        AxiomId::Ext,
        AxiomId::FnNotSet,
        AxiomId::SetNoDom,
        AxiomId::Empty,
        AxiomId::Pair,
        AxiomId::Sum,
        AxiomId::Pow,
        AxiomId::Inf,
        AxiomId::Reg,
        AxiomId::Eps,
        AxiomId::GenF,
        AxiomId::NegD,
        AxiomId::NonA,
        AxiomId::NegC,
        AxiomId::Inv,
        AxiomId::ExtF,
        AxiomId::InfFn,
        AxiomId::Ufa,
        AxiomId::RegF,
        AxiomId::SumF,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AxiomId::Ext => "EXT",
            AxiomId::FnNotSet => "FNOTS",
            AxiomId::SetNoDom => "SNODOM",
            AxiomId::Empty => "EMPTY",
            AxiomId::Pair => "PAIR",
            AxiomId::Sum => "SUM",
            AxiomId::Pow => "POW",
            AxiomId::Inf => "INF",
            AxiomId::Reg => "REG",
            AxiomId::Eps => "EPS",
            AxiomId::GenF => "GENF",
            AxiomId::NegD => "NEGD",
            AxiomId::NonA => "NONA",
            AxiomId::NegC => "NEGC",
            AxiomId::Inv => "INV",
            AxiomId::ExtF => "EXTF",
            AxiomId::InfFn => "INF_FN",
            AxiomId::Ufa => "UFA",
            AxiomId::RegF => "REGF",
            AxiomId::SumF => "SUMF",
        }
    }

    pub fn from_name(s: &str) -> Option<AxiomId> {
        AxiomId::ALL.iter().copied().find(|id| id.name() == s)
    }
}

impl std::fmt::Display for AxiomId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Source text of each axiom (input spelling; the registry stores the parsed
/// trees and the canonical spellings come from the printer).
fn axiom_source(id: AxiomId) -> &'static str {
    match id {
        AxiomId::Ext => "forall X . forall Y . (X = Y <=> forall a . (a in X <=> a in Y))",
        AxiomId::FnNotSet => "forall X . forall f{X} . forall Y . not f{X} = Y",
        AxiomId::SetNoDom => {
            "forall X . forall a . forall b . (not X : a ->> b and not X : a |-> b)"
        }
        AxiomId::Empty => "exists X . (X = empty and forall a . not a in X)",
        AxiomId::Pair => {
            "forall a . forall b . exists X . forall g . (g in X <=> (g = a or g = b))"
        }
        AxiomId::Sum => {
            "forall X . exists Y . forall a . (a in Y <=> exists Z . (Z in X and a in Z))"
        }
        AxiomId::Pow => {
            "forall X . exists Y . forall a . (a in Y <=> exists Z . (Z sub X and a = Z))"
        }
        AxiomId::Inf => {
            "empty in omega and (forall a in omega . a+ in omega) and \
             forall b in omega . (not (exists g in omega . b = g+) <=> b = empty)"
        }
        AxiomId::Reg => "forall X != empty . exists a in X . forall b in a . not b in X",
        AxiomId::Eps => "forall X . forall f{X} . forall a . not a in f{X}",
        AxiomId::GenF => {
            "forall X . forall f{X} . (not X = empty => exists Y . exists Z . \
             (f{X} : Y ->> Z and forall a in Y . exists! b . f{X} : a |-> b))"
        }
        AxiomId::NegD => {
            "forall X . forall f{X} . forall a . (not a = X => forall c . not f{X} : a ->> c)"
        }
        AxiomId::NonA => {
            "forall X . forall f{X} . forall a . (not a in X => forall b . not f{X} : a |-> b)"
        }
        AxiomId::NegC => {
            "forall X . forall f{X} . (not X = empty => forall b . (f{X} : X ->> b => \
             exists Z . (b = Z and forall g . (g in Z <=> exists h in X . f{X} : h |-> g))))"
        }
        AxiomId::Inv => {
            "forall X != empty . forall f{X} . forall Y . (f{X} : X ->> Y => \
             forall b . exists Z . forall a . (a in Z <=> (a in X and f{X} : a |-> b)))"
        }
        AxiomId::ExtF => {
            "forall X . forall f{X} . forall Y . forall g{Y} . (f{X} = g{Y} <=> \
             (X = Y and forall a . forall b . (f{X} : a |-> b <=> g{Y} : a |-> b)))"
        }
        AxiomId::InfFn => {
            "exists f{empty} . (f{empty} = id_empty and f{empty} : empty ->> empty and \
             forall a . forall b . not f{empty} : a |-> b)"
        }
        AxiomId::Ufa => {
            "forall a . forall b . exists f{a+} . (f{a+} : a+ ->> b+ and f{a+} : a |-> b)"
        }
        AxiomId::RegF => {
            "forall X . forall f{X} . forall Y . (f{X} : X ->> Y => \
             forall a . (not f{X} : f{X} |-> a and not f{X} : a |-> f{X}))"
        }
        AxiomId::SumF => {
            "forall X != empty . (forall f{a+})_{a in X} . exists F{X} . exists Y . \
             (F{X} : X ->> Y and /\\_{a in X} . F{X} : a |-> iota b.(f{a+} : a |-> b))"
        }
    }
}

fn axiom_map() -> &'static BTreeMap<AxiomId, Formula> {
    static MAP: OnceLock<BTreeMap<AxiomId, Formula>> = OnceLock::new();
    MAP.get_or_init(|| {
        let reg = Registry::builtin();
        AxiomId::ALL
            .iter()
            .map(|&id| {
                let f = parse_formula(axiom_source(id), &reg)
                    .unwrap_or_else(|e| panic!("axiom {id} failed to parse: {e}"));
                (id, f)
            })
            .collect()
    })
}

/// The axiom sentence for an identifier.
pub fn axiom(id: AxiomId) -> &'static Formula {
    &axiom_map()[&id]
}

/// The choice sentence: every nonempty set of pairwise disjoint nonempty
/// sets admits a choice function. Not an axiom; provided for parsing and
/// evaluation experiments only.
pub fn ac_formula() -> &'static Formula {
    static AC: OnceLock<Formula> = OnceLock::new();
    AC.get_or_init(|| {
        let reg = Registry::builtin();
        let src = "forall X != empty . ((forall a in X . exists Y . (a = Y and exists h . h in Y)) \
                   and (forall U in X . forall V in X . not exists b . (b in U and b in V)) => \
                   exists f{X} . forall Z in X . forall g . (f{X} : Z |-> g => g in Z))";
        parse_formula(src, &reg).expect("choice sentence parses")
    })
}

/// A formula with named holes (placeholder predicates) or, dually, a plain
/// formula abstracted over parameter variables (a "filler").
///
/// For a filler, `holes` lists the parameter variables with arity 0 and
/// `body` is an ordinary formula open in exactly those variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaTemplate {
    pub holes: Vec<(String, usize)>,
    pub body: Formula,
}

impl SchemaTemplate {
    /// A filler: a formula whose only free variables are the given thing
    /// variables, in argument order.
    pub fn filler(params: &[&str], body: Formula) -> Result<Self, TheoryError> {
        for p in params {
            if crate::syntax::simple_var_sort(p) != Sort::ThingVar {
                return Err(TheoryError::BadFiller(format!(
                    "parameter `{p}` must be a thing variable"
                )));
            }
        }
        let allowed: Vec<(String, Sort)> =
            params.iter().map(|p| (p.to_string(), Sort::ThingVar)).collect();
        for (n, s) in formula_vars(&body) {
            if !allowed.iter().any(|(an, asort)| *an == n && *asort == s) {
                return Err(TheoryError::StrayFreeVariable(crate::binding::display_var(
                    &n, &s,
                )));
            }
        }
        Ok(SchemaTemplate {
            holes: params.iter().map(|p| (p.to_string(), 0)).collect(),
            body,
        })
    }

    fn arity(&self) -> usize {
        self.holes.len()
    }

    /// Applies the filler to argument variables, renaming parameters in two
    /// phases so argument/parameter name clashes cannot cross-contaminate.
    fn apply(&self, args: &[Term], reg: &Registry) -> Result<Formula, TheoryError> {
        if args.len() != self.arity() {
            return Err(TheoryError::ArityMismatch {
                hole: "phi".into(),
                expected: self.arity(),
                found: args.len(),
            });
        }
        let mut out = self.body.clone();
        let temps: Vec<String> =
            (0..args.len()).map(|k| format!("#tmp{k}")).collect();
        for ((p, _), tmp) in self.holes.iter().zip(&temps) {
            out = substitute(
                &out,
                &Term::Var(p.clone(), Sort::ThingVar),
                &Term::Var(tmp.clone(), Sort::ThingVar),
                reg,
            )?;
        }
        for (tmp, arg) in temps.iter().zip(args) {
            out = substitute(&out, &Term::Var(tmp.clone(), Sort::ThingVar), arg, reg)?;
        }
        Ok(out)
    }
}

fn tvar(n: &str) -> Term {
    Term::Var(n.into(), Sort::ThingVar)
}

fn svar(n: &str) -> Term {
    Term::Var(n.into(), Sort::SetVar)
}

fn guard_nonempty(v: &str, body: Formula) -> Formula {
    Formula::Forall(
        v.into(),
        Sort::SetVar,
        Box::new(Formula::Implies(
            Box::new(Formula::Not(Box::new(Formula::Eq(
                svar(v),
                Term::Constant("empty".into()),
            )))),
            Box::new(body),
        )),
    )
}

/// `forall a . (a in R => body)`
pub(crate) fn forall_in(v: &str, range: Term, body: Formula) -> Formula {
    Formula::Forall(
        v.into(),
        Sort::ThingVar,
        Box::new(Formula::Implies(Box::new(Formula::Mem(tvar(v), range)), Box::new(body))),
    )
}

/// `exists! b . body` expanded as the parser sugar does.
pub(crate) fn exists_unique(v: &str, body: Formula, reg: &Registry) -> Result<Formula, TheoryError> {
    let taken: Vec<String> = formula_vars(&body).into_iter().map(|(n, _)| n).collect();
    let pv = primed(v, |cand| cand == v || taken.iter().any(|t| t == cand) || reg.contains(cand));
    let renamed = substitute(&body, &tvar(v), &tvar(&pv), reg)?;
    Ok(Formula::Exists(
        v.into(),
        Sort::ThingVar,
        Box::new(Formula::And(
            Box::new(body),
            Box::new(Formula::Forall(
                pv.clone(),
                Sort::ThingVar,
                Box::new(Formula::Implies(
                    Box::new(renamed),
                    Box::new(Formula::Eq(tvar(&pv), tvar(v))),
                )),
            )),
        )),
    ))
}

/// Separation instance for a unary predicate `phi`:
/// `forall X != empty . exists Y . forall a . (a in Y <=> (a in X and phi(a)))`.
pub fn instantiate_sep(phi: &SchemaTemplate) -> Result<Formula, TheoryError> {
    if phi.arity() != 1 {
        return Err(TheoryError::ArityMismatch {
            hole: "phi".into(),
            expected: 1,
            found: phi.arity(),
        });
    }
    let reg = Registry::builtin();
    let phi_a = phi.apply(&[tvar("a")], &reg)?;
    let body = Formula::Exists(
        "Y".into(),
        Sort::SetVar,
        Box::new(Formula::Forall(
            "a".into(),
            Sort::ThingVar,
            Box::new(Formula::Iff(
                Box::new(Formula::Mem(tvar("a"), svar("Y"))),
                Box::new(Formula::And(
                    Box::new(Formula::Mem(tvar("a"), svar("X"))),
                    Box::new(phi_a),
                )),
            )),
        )),
    );
    Ok(guard_nonempty("X", body))
}

/// Functional-image instance for a binary predicate `phi(a, b)`:
/// if `phi` maps each member of `X` to a unique value, the set of values
/// exists.
pub fn instantiate_sub(phi: &SchemaTemplate) -> Result<Formula, TheoryError> {
    if phi.arity() != 2 {
        return Err(TheoryError::ArityMismatch {
            hole: "phi".into(),
            expected: 2,
            found: phi.arity(),
        });
    }
    let reg = Registry::builtin();
    let phi_ab = phi.apply(&[tvar("a"), tvar("b")], &reg)?;
    let ante = forall_in("a", svar("X"), exists_unique("b", phi_ab, &reg)?);
    let phi_xg = phi.apply(&[tvar("x"), tvar("g")], &reg)?;
    let cons = Formula::Exists(
        "Z".into(),
        Sort::SetVar,
        Box::new(Formula::Forall(
            "g".into(),
            Sort::ThingVar,
            Box::new(Formula::Iff(
                Box::new(Formula::Mem(tvar("g"), svar("Z"))),
                Box::new(Formula::Exists(
                    "x".into(),
                    Sort::ThingVar,
                    Box::new(Formula::And(
                        Box::new(Formula::Mem(tvar("x"), svar("X"))),
                        Box::new(phi_xg),
                    )),
                )),
            )),
        )),
    );
    Ok(guard_nonempty("X", Formula::Implies(Box::new(ante), Box::new(cons))))
}

/// Sum-function instance for a binary predicate `phi(a, b)`: if `phi` maps
/// each member of `X` to a unique value, a function on `X` realizing it
/// exists. When `phi` is an explicit graph `b = t(a)`, the function clause
/// collapses to `F{X} : h |-> t(h)`; otherwise the value is characterized
/// pointwise.
pub fn instantiate_main(phi: &SchemaTemplate) -> Result<Formula, TheoryError> {
    if phi.arity() != 2 {
        return Err(TheoryError::ArityMismatch {
            hole: "phi".into(),
            expected: 2,
            found: phi.arity(),
        });
    }
    let reg = Registry::builtin();
    let phi_ab = phi.apply(&[tvar("a"), tvar("b")], &reg)?;
    let ante = forall_in("a", svar("X"), exists_unique("b", phi_ab.clone(), &reg)?);
    let fvar = Term::Var("F".into(), Sort::FnComposite("X".into()));

    // Explicit graph shape: phi(a, b) is `b = t(a)` with b not in t.
    let value_clause = match &phi_ab {
        Formula::Eq(lhs, rhs)
            if *lhs == tvar("b")
                && !term_vars(rhs).iter().any(|(n, s)| n == "b" && *s == Sort::ThingVar) =>
        {
            let image = rhs.clone();
            let img_h = {
                // Rewrite a -> h inside the image term via a formula wrapper.
                let wrapped = Formula::Eq(tvar("b"), image);
                let sub = substitute(&wrapped, &tvar("a"), &tvar("h"), &reg)?;
                match sub {
                    Formula::Eq(_, img) => img,
                    _ => unreachable!(),
                }
            };
            forall_in(
                "h",
                svar("X"),
                Formula::MapsTo(fvar.clone(), tvar("h"), img_h),
            )
        }
        _ => {
            let phi_hb = phi.apply(&[tvar("h"), tvar("b")], &reg)?;
            forall_in(
                "h",
                svar("X"),
                Formula::Forall(
                    "b".into(),
                    Sort::ThingVar,
                    Box::new(Formula::Iff(
                        Box::new(Formula::MapsTo(fvar.clone(), tvar("h"), tvar("b"))),
                        Box::new(phi_hb),
                    )),
                ),
            )
        }
    };

    let cons = Formula::Exists(
        "F".into(),
        Sort::FnComposite("X".into()),
        Box::new(Formula::Exists(
            "Y".into(),
            Sort::SetVar,
            Box::new(Formula::And(
                Box::new(Formula::Surj(fvar, svar("X"), svar("Y"))),
                Box::new(value_clause),
            )),
        )),
    );
    Ok(guard_nonempty("X", Formula::Implies(Box::new(ante), Box::new(cons))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_formula, print_formula, print_term};
    use crate::syntax::{check_wff, Registry};

    #[test]
    fn numerals() {
        assert_eq!(zermelo_ordinal(0).unwrap(), Term::Constant("empty".into()));
        assert_eq!(print_term(&zermelo_ordinal(3).unwrap()), "3");
        assert!(matches!(
            zermelo_ordinal(65),
            Err(TheoryError::CapExceeded { got: 65, cap: 64 })
        ));
    }

    #[test]
    fn all_axioms_are_sentences() {
        let reg = Registry::builtin();
        for id in AxiomId::ALL {
            let f = axiom(id);
            let report = check_wff(f, &reg);
            assert!(report.ok, "axiom {id} is not well formed: {:?}", report.violations);
            assert!(
                crate::binding::is_sentence(f),
                "axiom {id} has free variables"
            );
            // Canonical print parses back to the same tree.
            let printed = print_formula(f);
            let back = parse_formula(&printed, &reg).expect(&printed);
            assert_eq!(&back, f, "axiom {id} does not round-trip");
        }
    }

    #[test]
    fn axiom_names_roundtrip() {
        for id in AxiomId::ALL {
            assert_eq!(AxiomId::from_name(id.name()), Some(id));
        }
        assert_eq!(AxiomId::from_name("NOPE"), None);
    }

    #[test]
    fn choice_sentence_parses_and_prints() {
        let reg = Registry::builtin();
        let f = ac_formula();
        assert!(check_wff(f, &reg).ok);
        let printed = print_formula(f);
        assert_eq!(&parse_formula(&printed, &reg).unwrap(), f);
    }

    #[test]
    fn separation_instance() {
        let reg = Registry::builtin();
        let phi = SchemaTemplate::filler(
            &["a"],
            parse_formula("a in omega", &reg).unwrap(),
        )
        .unwrap();
        let inst = instantiate_sep(&phi).unwrap();
        assert_eq!(
            print_formula(&inst),
            "forall X != empty . exists Y . forall a . (a in Y <=> a in X and a in omega)"
        );
        assert!(check_wff(&inst, &reg).ok);
    }

    #[test]
    fn subset_instance() {
        let reg = Registry::builtin();
        let phi = SchemaTemplate::filler(
            &["a", "b"],
            parse_formula("b = a+", &reg).unwrap(),
        )
        .unwrap();
        let inst = instantiate_sub(&phi).unwrap();
        assert_eq!(
            print_formula(&inst),
            "forall X != empty . ((forall a . (a in X => exists b . (b = a+ and forall b' . \
             (b' = a+ => b' = b)))) => exists Z . forall g . (g in Z <=> exists x . \
             (x in X and g = x+)))"
        );
        assert!(check_wff(&inst, &reg).ok);
    }

    #[test]
    fn main_instance_collapses_explicit_graphs() {
        let reg = Registry::builtin();
        let phi = SchemaTemplate::filler(
            &["a", "b"],
            parse_formula("b = a+", &reg).unwrap(),
        )
        .unwrap();
        let inst = instantiate_main(&phi).unwrap();
        assert_eq!(
            print_formula(&inst),
            "forall X != empty . ((forall a . (a in X => exists b . (b = a+ and forall b' . \
             (b' = a+ => b' = b)))) => exists F{X} . exists Y . (F{X} : X ->> Y and \
             forall h . (h in X => F{X} : h |-> h+)))"
        );
        assert!(check_wff(&inst, &reg).ok);
    }

    #[test]
    fn main_instance_general_shape() {
        let reg = Registry::builtin();
        let phi = SchemaTemplate::filler(
            &["a", "b"],
            parse_formula("b in a or b = a", &reg).unwrap(),
        )
        .unwrap();
        let inst = instantiate_main(&phi).unwrap();
        let printed = print_formula(&inst);
        assert!(printed.contains("F{X} : h |-> b <=> b in h or b = h"), "{printed}");
        assert!(check_wff(&inst, &reg).ok);
    }

    #[test]
    fn filler_rejects_stray_variables() {
        let reg = Registry::builtin();
        let err = SchemaTemplate::filler(&["a"], parse_formula("a in Z", &reg).unwrap())
            .unwrap_err();
        assert!(matches!(err, TheoryError::StrayFreeVariable(v) if v == "Z"));
    }

    #[test]
    fn arity_is_checked() {
        let reg = Registry::builtin();
        let phi =
            SchemaTemplate::filler(&["a"], parse_formula("a in omega", &reg).unwrap()).unwrap();
        assert!(matches!(
            instantiate_sub(&phi),
            Err(TheoryError::ArityMismatch { expected: 2, found: 1, .. })
        ));
    }

    #[test]
    fn tuple_characterization_uses_fresh_names() {
        let reg = Registry::builtin();
        // The term t mentions P, so the bound set variable gets primed.
        let t = Term::Var("P".into(), Sort::SetVar);
        let f = two_tuple_eq(&t, &tvar("a"), &tvar("b"), &reg);
        let printed = print_formula(&f);
        assert!(printed.starts_with("exists P' . (P = P'"), "{printed}");
    }
}
