//! Abstract syntax for the object language: terms, formulas, sorts, and the
//! well-formedness checker.
//!
//! The language has three kinds of individuals (sets, things, functions), two
//! mapping predicates besides `=` and `in`, and a small nonstandard layer:
//! indexed conjunctions (`/\_{a in T}`), multiple quantifiers over families of
//! ur-functions (`(forall f{a+})_{a in T}`), and iota-terms restricted to the
//! ur-function image shape `iota b.(u{t+} : t |-> b)`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Sort of a variable occurrence or constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    /// Simple variable ranging over sets (uppercase identifier).
    SetVar,
    /// Simple variable ranging over all things (lowercase identifier).
    ThingVar,
    /// Function variable on a fixed set denoted by a closed subscript term,
    /// e.g. `f{omega}`, `f{0+}`, `f{Xhat}`.
    FnOnConstant(Box<Term>),
    /// Composite function variable subscripted by a set variable, e.g. `f{X}`.
    FnComposite(String),
    /// Variable over ur-functions on the singleton of a thing variable,
    /// e.g. `f{a+}`; also the sort of named family variables.
    UrFamily(String),
    /// A declared constant (`empty`, `omega`, `id_empty`, or script/universe
    /// introduced names).
    Constant,
}

/// A term of the object language.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// Named constant.
    Constant(String),
    /// Variable with its sort.
    Var(String, Sort),
    /// Singleton `t+`.
    Singleton(Box<Term>),
    /// Iota-term `iota b.(body)`; `body` must be a `MapsTo` atom whose image
    /// position is the bound variable.
    Iota { bound: String, body: Box<Formula> },
}

/// A formula of the object language.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    /// `t1 = t2`
    Eq(Term, Term),
    /// `t1 in t2`
    Mem(Term, Term),
    /// `t1 : t2 ->> t3` (maps the middle set onto the right one)
    Surj(Term, Term, Term),
    /// `t1 : t2 |-> t3` (maps the argument to the image)
    MapsTo(Term, Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    /// `forall v . body`; the sort is the bound variable's sort.
    Forall(String, Sort, Box<Formula>),
    /// `exists v . body`
    Exists(String, Sort, Box<Formula>),
    /// `(forall base{index+})_{index in range} . body`
    MultiForall { base: String, index: String, range: Term, body: Box<Formula> },
    /// `(exists base{index+})_{index in range} . body`
    MultiExists { base: String, index: String, range: Term, body: Box<Formula> },
    /// `/\_{index in range} . body`; typographically finite conjunction over
    /// the members of the range.
    BigAnd { index: String, range: Term, body: Box<Formula> },
    /// Placeholder inside schema templates; never well-formed on its own.
    SchemaHole { name: String, args: Vec<Term> },
}

/// Value kind a term denotes: set, thing (anything), or function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Set,
    Thing,
    Fn,
}

/// What a registered constant denotes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstKind {
    /// A set; `extension` is `Some` when the finite extension is known
    /// (literal set declarations, `empty`).
    Set { extension: Option<Vec<Term>> },
    /// An individual thing.
    Thing,
    /// A function on the given constant set.
    Fn { domain: Term },
    /// Introduced by a script but with sort resolved later (parser-side only).
    Opaque,
}

/// Registry of declared constants, used for parsing (constant vs. variable)
/// and sort checking.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    entries: BTreeMap<String, ConstKind>,
}

impl Registry {
    /// Registry holding exactly the built-in constants `empty`, `omega`, and
    /// `id_empty` (the inactive function on the empty set).
    pub fn builtin() -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("empty".into(), ConstKind::Set { extension: Some(Vec::new()) });
        entries.insert("omega".into(), ConstKind::Set { extension: None });
        entries.insert(
            "id_empty".into(),
            ConstKind::Fn { domain: Term::Constant("empty".into()) },
        );
        Registry { entries }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&ConstKind> {
        self.entries.get(name)
    }

    /// Registers a constant; returns false if the name was already taken.
    pub fn insert(&mut self, name: &str, kind: ConstKind) -> bool {
        if self.entries.contains_key(name) {
            return false;
        }
        self.entries.insert(name.to_string(), kind);
        true
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }
}

/// Error raised by sort queries.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
}

/// Sort of a term: declared sort for variables, `Constant` for registered
/// constants. Singletons are classified as set-valued (`SetVar`) and
/// iota-terms as thing-valued (`ThingVar`).
pub fn sort_of(t: &Term, reg: &Registry) -> Result<Sort, SyntaxError> {
    match t {
        Term::Constant(name) => {
            if reg.contains(name) {
                Ok(Sort::Constant)
            } else {
                Err(SyntaxError::UnknownConstant(name.clone()))
            }
        }
        Term::Var(_, s) => Ok(s.clone()),
        Term::Singleton(_) => Ok(Sort::SetVar),
        Term::Iota { .. } => Ok(Sort::ThingVar),
    }
}

/// Value kind denoted by a term. Thing variables (and iota-terms) may denote
/// anything; they are reported as `Thing`.
pub fn value_kind(t: &Term, reg: &Registry) -> Result<ValueKind, SyntaxError> {
    match t {
        Term::Constant(name) => match reg.get(name) {
            Some(ConstKind::Set { .. }) => Ok(ValueKind::Set),
            Some(ConstKind::Thing) | Some(ConstKind::Opaque) => Ok(ValueKind::Thing),
            Some(ConstKind::Fn { .. }) => Ok(ValueKind::Fn),
            None => Err(SyntaxError::UnknownConstant(name.clone())),
        },
        Term::Var(_, Sort::SetVar) => Ok(ValueKind::Set),
        Term::Var(_, Sort::ThingVar) => Ok(ValueKind::Thing),
        Term::Var(_, Sort::FnOnConstant(_) | Sort::FnComposite(_) | Sort::UrFamily(_)) => {
            Ok(ValueKind::Fn)
        }
        Term::Var(_, Sort::Constant) => Ok(ValueKind::Thing),
        Term::Singleton(_) => Ok(ValueKind::Set),
        Term::Iota { .. } => Ok(ValueKind::Thing),
    }
}

/// Classifies a function-variable subscript term into the matching sort.
pub fn fn_sort_for_subscript(sub: Term) -> Sort {
    match &sub {
        Term::Var(x, Sort::SetVar) => Sort::FnComposite(x.clone()),
        Term::Singleton(inner) => {
            if let Term::Var(a, Sort::ThingVar) = inner.as_ref() {
                Sort::UrFamily(a.clone())
            } else {
                Sort::FnOnConstant(Box::new(sub))
            }
        }
        _ => Sort::FnOnConstant(Box::new(sub)),
    }
}

/// One well-formedness violation: the grammar clause, the tree path, and a
/// human-readable message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub clause: String,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] at {}: {}", self.clause, self.path, self.message)
    }
}

/// Result of `check_wff`: all violations, never an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WffReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

struct WffCtx<'a> {
    reg: &'a Registry,
    violations: Vec<Violation>,
    /// Active simple binders as (name, sort).
    binders: Vec<(String, Sort)>,
    /// Active multiple-quantifier binders as (base, index).
    multi: Vec<(String, String)>,
}

impl<'a> WffCtx<'a> {
    fn report(&mut self, clause: &str, path: &[String], message: String) {
        self.violations.push(Violation {
            clause: clause.to_string(),
            path: if path.is_empty() { "root".to_string() } else { path.join("/") },
            message,
        });
    }

    fn binder_active(&self, name: &str, sort: &Sort) -> bool {
        self.binders.iter().any(|(n, s)| n == name && s == sort)
    }
}

/// Checks the grammar side conditions that the tree representation cannot
/// enforce. Reports all violations; never fails.
pub fn check_wff(f: &Formula, reg: &Registry) -> WffReport {
    let mut ctx = WffCtx { reg, violations: Vec::new(), binders: Vec::new(), multi: Vec::new() };
    let mut path = Vec::new();
    wff_formula(f, &mut ctx, &mut path);
    WffReport { ok: ctx.violations.is_empty(), violations: ctx.violations }
}

fn is_range_term(t: &Term) -> bool {
    matches!(t, Term::Var(_, Sort::SetVar)) || free_term_vars(t).is_empty()
}

/// Collects the (name, sort) pairs of variables occurring in a term,
/// including subscript variables of function variables.
fn free_term_vars(t: &Term) -> Vec<(String, Sort)> {
    let mut out = Vec::new();
    collect_term_vars(t, &mut out);
    out
}

fn collect_term_vars(t: &Term, out: &mut Vec<(String, Sort)>) {
    match t {
        Term::Constant(_) => {}
        Term::Var(n, s) => {
            out.push((n.clone(), s.clone()));
            match s {
                Sort::FnComposite(x) => out.push((x.clone(), Sort::SetVar)),
                Sort::UrFamily(a) => out.push((a.clone(), Sort::ThingVar)),
                Sort::FnOnConstant(sub) => collect_term_vars(sub, out),
                _ => {}
            }
        }
        Term::Singleton(inner) => collect_term_vars(inner, out),
        Term::Iota { bound, body } => {
            let mut inner = Vec::new();
            collect_formula_vars(body, &mut inner);
            inner.retain(|(n, s)| !(n == bound && *s == Sort::ThingVar));
            out.extend(inner);
        }
    }
}

fn collect_formula_vars(f: &Formula, out: &mut Vec<(String, Sort)>) {
    match f {
        Formula::Eq(a, b) | Formula::Mem(a, b) => {
            collect_term_vars(a, out);
            collect_term_vars(b, out);
        }
        Formula::Surj(a, b, c) | Formula::MapsTo(a, b, c) => {
            collect_term_vars(a, out);
            collect_term_vars(b, out);
            collect_term_vars(c, out);
        }
        Formula::Not(g) => collect_formula_vars(g, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            collect_formula_vars(a, out);
            collect_formula_vars(b, out);
        }
        Formula::Forall(v, s, body) | Formula::Exists(v, s, body) => {
            let mut inner = Vec::new();
            collect_formula_vars(body, &mut inner);
            inner.retain(|(n, vs)| !(n == v && vs == s));
            out.extend(inner);
            // Subscript variables of the binder itself occur in the formula.
            match s {
                Sort::FnComposite(x) => out.push((x.clone(), Sort::SetVar)),
                Sort::UrFamily(a) => out.push((a.clone(), Sort::ThingVar)),
                Sort::FnOnConstant(sub) => collect_term_vars(sub, out),
                _ => {}
            }
        }
        Formula::MultiForall { base, index, range, body }
        | Formula::MultiExists { base, index, range, body } => {
            collect_term_vars(range, out);
            let mut inner = Vec::new();
            collect_formula_vars(body, &mut inner);
            inner.retain(|(n, s)| !(n == base && *s == Sort::UrFamily(index.clone())));
            out.extend(inner);
        }
        Formula::BigAnd { index, range, body } => {
            collect_term_vars(range, out);
            let mut inner = Vec::new();
            collect_formula_vars(body, &mut inner);
            inner.retain(|(n, s)| !(n == index && *s == Sort::ThingVar));
            out.extend(inner);
        }
        Formula::SchemaHole { args, .. } => {
            for a in args {
                collect_term_vars(a, out);
            }
        }
    }
}

fn wff_term(t: &Term, ctx: &mut WffCtx, path: &mut Vec<String>) {
    match t {
        Term::Constant(name) => {
            if !ctx.reg.contains(name) {
                ctx.report("vocabulary.constant", path, format!("undeclared constant `{name}`"));
            }
        }
        Term::Var(_, Sort::FnOnConstant(sub)) => {
            path.push("subscript".into());
            wff_term(sub, ctx, path);
            path.pop();
        }
        Term::Var(..) => {}
        Term::Singleton(inner) => {
            path.push("singleton".into());
            wff_term(inner, ctx, path);
            path.pop();
        }
        Term::Iota { bound, body } => {
            path.push(format!("iota({bound})"));
            match body.as_ref() {
                Formula::MapsTo(fun, arg, img) => {
                    if !matches!(img, Term::Var(b, Sort::ThingVar) if b == bound) {
                        ctx.report(
                            "extra-syntax.ii",
                            path,
                            "iota body image must be the bound thing variable".into(),
                        );
                    }
                    let sub_ok = match fun {
                        Term::Var(_, Sort::UrFamily(i)) => {
                            matches!(arg, Term::Var(a, Sort::ThingVar) if a == i)
                        }
                        Term::Var(_, Sort::FnOnConstant(sub)) => {
                            **sub == Term::Singleton(Box::new(arg.clone()))
                        }
                        _ => false,
                    };
                    if !sub_ok {
                        ctx.report(
                            "extra-syntax.ii",
                            path,
                            "iota function position must be an ur-function variable subscripted by \
                             the singleton of the argument"
                                .into(),
                        );
                    }
                    wff_term(fun, ctx, path);
                    wff_term(arg, ctx, path);
                }
                _ => {
                    ctx.report(
                        "extra-syntax.ii",
                        path,
                        "iota body must be a `|->` atom".into(),
                    );
                }
            }
            path.pop();
        }
    }
}

/// True when the subtree contains a `BigAnd` with the given index and range
/// whose scope mentions the family variable `base{index+}`.
fn contains_matching_bigand(f: &Formula, base: &str, index: &str, range: &Term) -> bool {
    match f {
        Formula::BigAnd { index: i, range: r, body }
            if i == index && r == range =>
        {
            let mut vars = Vec::new();
            collect_formula_vars(body, &mut vars);
            // The family variable is reported with its UrFamily sort.
            vars.iter().any(|(n, s)| n == base && *s == Sort::UrFamily(index.to_string()))
                || contains_matching_bigand(body, base, index, range)
        }
        Formula::Not(g) => contains_matching_bigand(g, base, index, range),
        Formula::And(a, b)
        | Formula::Or(a, b)
        | Formula::Implies(a, b)
        | Formula::Iff(a, b) => {
            contains_matching_bigand(a, base, index, range)
                || contains_matching_bigand(b, base, index, range)
        }
        Formula::Forall(_, _, body)
        | Formula::Exists(_, _, body)
        | Formula::BigAnd { body, .. } => contains_matching_bigand(body, base, index, range),
        Formula::MultiForall { base: b2, index: i2, body, .. }
        | Formula::MultiExists { base: b2, index: i2, body, .. } => {
            // A nested multiple quantifier over the same family shadows it.
            if b2 == base && i2 == index {
                false
            } else {
                contains_matching_bigand(body, base, index, range)
            }
        }
        _ => false,
    }
}

fn wff_formula(f: &Formula, ctx: &mut WffCtx, path: &mut Vec<String>) {
    match f {
        Formula::Eq(a, b) | Formula::Mem(a, b) => {
            path.push("atom".into());
            wff_term(a, ctx, path);
            wff_term(b, ctx, path);
            path.pop();
        }
        Formula::Surj(a, b, c) | Formula::MapsTo(a, b, c) => {
            path.push("atom".into());
            wff_term(a, ctx, path);
            wff_term(b, ctx, path);
            wff_term(c, ctx, path);
            path.pop();
        }
        Formula::Not(g) => {
            path.push("not".into());
            wff_formula(g, ctx, path);
            path.pop();
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            let tag = match f {
                Formula::And(..) => "and",
                Formula::Or(..) => "or",
                Formula::Implies(..) => "implies",
                _ => "iff",
            };
            path.push(format!("{tag}.l"));
            wff_formula(a, ctx, path);
            path.pop();
            path.push(format!("{tag}.r"));
            wff_formula(b, ctx, path);
            path.pop();
        }
        Formula::Forall(v, s, body) | Formula::Exists(v, s, body) => {
            let q = if matches!(f, Formula::Forall(..)) { "forall" } else { "exists" };
            path.push(format!("{q}({v})"));
            match s {
                Sort::FnComposite(x) => {
                    if !ctx.binder_active(x, &Sort::SetVar) {
                        ctx.report(
                            "syntax.vi",
                            path,
                            format!(
                                "quantifier over composite variable `{v}{{{x}}}` outside the \
                                 scope of a quantifier binding `{x}`"
                            ),
                        );
                    }
                }
                Sort::UrFamily(a) => {
                    if !ctx.binder_active(a, &Sort::ThingVar) {
                        ctx.report(
                            "syntax.vi",
                            path,
                            format!(
                                "quantifier over ur-function variable `{v}{{{a}+}}` outside the \
                                 scope of a quantifier binding `{a}`"
                            ),
                        );
                    }
                }
                Sort::FnOnConstant(sub) => {
                    path.push("subscript".into());
                    wff_term(sub, ctx, path);
                    path.pop();
                }
                Sort::Constant => {
                    ctx.report("syntax.v", path, "cannot bind a constant".into());
                }
                _ => {}
            }
            ctx.binders.push((v.clone(), s.clone()));
            wff_formula(body, ctx, path);
            ctx.binders.pop();
            path.pop();
        }
        Formula::MultiForall { base, index, range, body }
        | Formula::MultiExists { base, index, range, body } => {
            let q = if matches!(f, Formula::MultiForall { .. }) { "multiforall" } else { "multiexists" };
            path.push(format!("{q}({base}{{{index}+}})"));
            if !is_range_term(range) {
                ctx.report(
                    "extra-syntax.iv",
                    path,
                    "multiple-quantifier range must be a constant term or a set variable".into(),
                );
            }
            if let Term::Var(x, Sort::SetVar) = range {
                if !ctx.binder_active(x, &Sort::SetVar) {
                    ctx.report(
                        "extra-syntax.v",
                        path,
                        format!(
                            "variable-range multiple quantifier over `{x}` outside the scope of a \
                             quantifier binding `{x}`"
                        ),
                    );
                }
            }
            wff_term(range, ctx, path);
            if !contains_matching_bigand(body, base, index, range) {
                ctx.report(
                    "extra-syntax.iv",
                    path,
                    format!(
                        "multiple quantifier must contain a conjunctor over the same index and \
                         range mentioning `{base}{{{index}+}}`"
                    ),
                );
            }
            ctx.multi.push((base.clone(), index.clone()));
            wff_formula(body, ctx, path);
            ctx.multi.pop();
            path.pop();
        }
        Formula::BigAnd { index, range, body } => {
            path.push(format!("bigand({index})"));
            if !is_range_term(range) {
                ctx.report(
                    "extra-syntax.iii",
                    path,
                    "conjunctor range must be a constant term or a set variable".into(),
                );
            }
            if let Term::Var(x, Sort::SetVar) = range {
                if !ctx.binder_active(x, &Sort::SetVar) {
                    ctx.report(
                        "extra-syntax.v",
                        path,
                        format!(
                            "variable-range conjunctor over `{x}` outside the scope of a \
                             quantifier binding `{x}`"
                        ),
                    );
                }
            }
            wff_term(range, ctx, path);
            match body.as_ref() {
                Formula::MapsTo(..) => {
                    let mut vars = Vec::new();
                    collect_formula_vars(body, &mut vars);
                    let open_in_index =
                        vars.iter().any(|(n, s)| n == index && *s == Sort::ThingVar);
                    if !open_in_index {
                        ctx.report(
                            "extra-syntax.iii",
                            path,
                            format!("conjunctor body must be open in the index variable `{index}`"),
                        );
                    }
                    ctx.binders.push((index.clone(), Sort::ThingVar));
                    wff_formula(body, ctx, path);
                    ctx.binders.pop();
                }
                _ => {
                    ctx.report(
                        "extra-syntax.iii",
                        path,
                        "conjunctor body must be a `|->` atom".into(),
                    );
                }
            }
            path.pop();
        }
        Formula::SchemaHole { name, .. } => {
            ctx.report("template.hole", path, format!("unfilled schema hole `{name}`"));
        }
    }
}

/// Builds a `Forall` that binds the variable `name` with the right sort
/// inferred from a sigil-free name (uppercase = set, lowercase = thing).
pub fn simple_var_sort(name: &str) -> Sort {
    if name.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
        Sort::SetVar
    } else {
        Sort::ThingVar
    }
}

/// All variable occurrences in a formula as (name, sort) pairs, with binder
/// shadowing applied (bound occurrences removed).
pub(crate) fn formula_vars(f: &Formula) -> Vec<(String, Sort)> {
    let mut out = Vec::new();
    collect_formula_vars(f, &mut out);
    out
}

/// All variable occurrences in a term as (name, sort) pairs.
pub(crate) fn term_vars(t: &Term) -> Vec<(String, Sort)> {
    free_term_vars(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> Registry {
        Registry::builtin()
    }

    #[test]
    fn sort_of_builtins() {
        let r = reg();
        assert_eq!(sort_of(&Term::Constant("empty".into()), &r), Ok(Sort::Constant));
        assert_eq!(value_kind(&Term::Constant("empty".into()), &r), Ok(ValueKind::Set));
        assert!(matches!(
            sort_of(&Term::Constant("nonsuch".into()), &r),
            Err(SyntaxError::UnknownConstant(_))
        ));
    }

    #[test]
    fn sort_of_function_variables() {
        let r = reg();
        let f = Term::Var("f".into(), Sort::FnComposite("X".into()));
        assert_eq!(sort_of(&f, &r), Ok(Sort::FnComposite("X".into())));
        assert_eq!(value_kind(&f, &r), Ok(ValueKind::Fn));
    }

    #[test]
    fn subscript_classification() {
        assert_eq!(
            fn_sort_for_subscript(Term::Var("X".into(), Sort::SetVar)),
            Sort::FnComposite("X".into())
        );
        assert_eq!(
            fn_sort_for_subscript(Term::Singleton(Box::new(Term::Var(
                "a".into(),
                Sort::ThingVar
            )))),
            Sort::UrFamily("a".into())
        );
        assert!(matches!(
            fn_sort_for_subscript(Term::Constant("omega".into())),
            Sort::FnOnConstant(_)
        ));
        assert!(matches!(
            fn_sort_for_subscript(Term::Singleton(Box::new(Term::Constant("empty".into())))),
            Sort::FnOnConstant(_)
        ));
    }

    #[test]
    fn bigand_body_must_be_mapsto() {
        let r = reg();
        let good = Formula::BigAnd {
            index: "a".into(),
            range: Term::Constant("omega".into()),
            body: Box::new(Formula::MapsTo(
                Term::Constant("id_empty".into()),
                Term::Var("a".into(), Sort::ThingVar),
                Term::Var("a".into(), Sort::ThingVar),
            )),
        };
        assert!(check_wff(&good, &r).ok);
        let bad = Formula::BigAnd {
            index: "a".into(),
            range: Term::Constant("omega".into()),
            body: Box::new(Formula::Eq(
                Term::Var("a".into(), Sort::ThingVar),
                Term::Var("a".into(), Sort::ThingVar),
            )),
        };
        let report = check_wff(&bad, &r);
        assert!(!report.ok);
        assert_eq!(report.violations[0].clause, "extra-syntax.iii");
    }

    #[test]
    fn composite_quantifier_needs_set_binder() {
        let r = reg();
        // exists f{X} . f{X} = f{X} without a binder for X
        let inner = Formula::Exists(
            "f".into(),
            Sort::FnComposite("X".into()),
            Box::new(Formula::Eq(
                Term::Var("f".into(), Sort::FnComposite("X".into())),
                Term::Var("f".into(), Sort::FnComposite("X".into())),
            )),
        );
        let report = check_wff(&inner, &r);
        assert!(report.violations.iter().any(|v| v.clause == "syntax.vi"));
        let wrapped = Formula::Forall("X".into(), Sort::SetVar, Box::new(inner));
        assert!(check_wff(&wrapped, &r).ok);
    }
}
