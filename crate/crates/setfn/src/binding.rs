//! Variable occurrence analysis and capture-avoiding substitution.
//!
//! Substitution here is richer than in ordinary first-order logic because
//! variables can occur inside the subscripts of function variables and as the
//! ranges of indexed operators. Substituting a term for a set variable `X`
//! therefore also rewrites every composite variable `f{X}` and switches
//! variable-range conjunctors and multiple quantifiers over `X` to
//! constant-range ones (and the reverse substitution switches them back).

use std::collections::BTreeSet;

use thiserror::Error;

use crate::parser::print_term;
use crate::syntax::{
    fn_sort_for_subscript, formula_vars, term_vars, value_kind, ConstKind, Formula, Registry,
    Sort, Term, ValueKind,
};

/// Errors raised by substitution.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindError {
    #[error("sort mismatch: cannot substitute {found} where {expected} is required")]
    SortMismatch { expected: String, found: String },
    #[error("substitution would capture `{0}` and no safe rename exists")]
    Capture(String),
    #[error("cannot rewrite subscript occurrences with `{0}`: replacement must be a variable or a closed term")]
    SubscriptSubstitution(String),
    #[error("replacement for a constant or closed term must be a variable, got `{0}`")]
    NotAVariable(String),
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
}

/// Free/bound variable report for a formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrences {
    /// Display forms of variables with free occurrences, e.g. `X`, `a`, `f{X}`.
    pub free: BTreeSet<String>,
    /// Display forms of variables with bound occurrences (every binder counts
    /// as an occurrence of its variable).
    pub bound: BTreeSet<String>,
    /// True when there are no free occurrences.
    pub is_sentence: bool,
}

/// Display form of a variable: `X`, `a`, `f{X}`, `f{a+}`, `f{omega}`.
pub fn display_var(name: &str, sort: &Sort) -> String {
    match sort {
        Sort::SetVar | Sort::ThingVar | Sort::Constant => name.to_string(),
        Sort::FnComposite(x) => format!("{name}{{{x}}}"),
        Sort::UrFamily(a) => format!("{name}{{{a}+}}"),
        Sort::FnOnConstant(sub) => format!("{name}{{{}}}", print_term(sub)),
    }
}

#[derive(Default)]
struct OccCtx {
    free: BTreeSet<String>,
    bound: BTreeSet<String>,
    binders: Vec<(String, Sort)>,
}

impl OccCtx {
    fn active(&self, name: &str, sort: &Sort) -> bool {
        self.binders.iter().any(|(n, s)| n == name && s == sort)
    }

    /// Records one variable occurrence, free or bound depending on the active
    /// binders. Subscript variables of function variables are recorded too.
    fn occurrence(&mut self, name: &str, sort: &Sort) {
        if self.active(name, sort) {
            self.bound.insert(display_var(name, sort));
        } else {
            self.free.insert(display_var(name, sort));
        }
        match sort {
            Sort::FnComposite(x) => self.occurrence(&x.clone(), &Sort::SetVar),
            Sort::UrFamily(a) => self.occurrence(&a.clone(), &Sort::ThingVar),
            Sort::FnOnConstant(sub) => {
                for (n, s) in term_vars(sub) {
                    self.occurrence(&n, &s);
                }
            }
            _ => {}
        }
    }
}

fn occ_term(t: &Term, ctx: &mut OccCtx) {
    match t {
        Term::Constant(_) => {}
        Term::Var(n, s) => ctx.occurrence(n, s),
        Term::Singleton(inner) => occ_term(inner, ctx),
        Term::Iota { bound, body } => {
            ctx.bound.insert(bound.clone());
            ctx.binders.push((bound.clone(), Sort::ThingVar));
            occ_formula(body, ctx);
            ctx.binders.pop();
        }
    }
}

fn occ_formula(f: &Formula, ctx: &mut OccCtx) {
    match f {
        Formula::Eq(a, b) | Formula::Mem(a, b) => {
            occ_term(a, ctx);
            occ_term(b, ctx);
        }
        Formula::Surj(a, b, c) | Formula::MapsTo(a, b, c) => {
            occ_term(a, ctx);
            occ_term(b, ctx);
            occ_term(c, ctx);
        }
        Formula::Not(g) => occ_formula(g, ctx),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            occ_formula(a, ctx);
            occ_formula(b, ctx);
        }
        Formula::Forall(v, s, body) | Formula::Exists(v, s, body) => {
            ctx.bound.insert(display_var(v, s));
            // Subscript variables inside the binder notation occur here.
            match s {
                Sort::FnComposite(x) => ctx.occurrence(x, &Sort::SetVar),
                Sort::UrFamily(a) => ctx.occurrence(a, &Sort::ThingVar),
                Sort::FnOnConstant(sub) => {
                    let sub = sub.clone();
                    occ_term(&sub, ctx);
                }
                _ => {}
            }
            ctx.binders.push((v.clone(), s.clone()));
            occ_formula(body, ctx);
            ctx.binders.pop();
        }
        Formula::MultiForall { base, index, range, body }
        | Formula::MultiExists { base, index, range, body } => {
            ctx.bound.insert(display_var(base, &Sort::UrFamily(index.clone())));
            ctx.bound.insert(index.clone());
            occ_term(range, ctx);
            ctx.binders.push((base.clone(), Sort::UrFamily(index.clone())));
            occ_formula(body, ctx);
            ctx.binders.pop();
        }
        Formula::BigAnd { index, range, body } => {
            ctx.bound.insert(index.clone());
            occ_term(range, ctx);
            ctx.binders.push((index.clone(), Sort::ThingVar));
            occ_formula(body, ctx);
            ctx.binders.pop();
        }
        Formula::SchemaHole { args, .. } => {
            for a in args {
                occ_term(a, ctx);
            }
        }
    }
}

/// Computes the free and bound variables of a formula.
pub fn occurrences(f: &Formula) -> Occurrences {
    let mut ctx = OccCtx::default();
    occ_formula(f, &mut ctx);
    let is_sentence = ctx.free.is_empty();
    Occurrences { free: ctx.free, bound: ctx.bound, is_sentence }
}

/// True when the formula has no free variables.
pub fn is_sentence(f: &Formula) -> bool {
    occurrences(f).is_sentence
}

/// All constants occurring in a formula (including inside subscripts and
/// operator ranges).
pub fn constants_in(f: &Formula) -> BTreeSet<String> {
    fn go_t(t: &Term, out: &mut BTreeSet<String>) {
        match t {
            Term::Constant(c) => {
                out.insert(c.clone());
            }
            Term::Var(_, Sort::FnOnConstant(sub)) => go_t(sub, out),
            Term::Var(..) => {}
            Term::Singleton(inner) => go_t(inner, out),
            Term::Iota { body, .. } => go_f(body, out),
        }
    }
    fn go_f(f: &Formula, out: &mut BTreeSet<String>) {
        match f {
            Formula::Eq(a, b) | Formula::Mem(a, b) => {
                go_t(a, out);
                go_t(b, out);
            }
            Formula::Surj(a, b, c) | Formula::MapsTo(a, b, c) => {
                go_t(a, out);
                go_t(b, out);
                go_t(c, out);
            }
            Formula::Not(g) => go_f(g, out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                go_f(a, out);
                go_f(b, out);
            }
            Formula::Forall(_, s, body) | Formula::Exists(_, s, body) => {
                if let Sort::FnOnConstant(sub) = s {
                    go_t(sub, out);
                }
                go_f(body, out);
            }
            Formula::MultiForall { range, body, .. }
            | Formula::MultiExists { range, body, .. }
            | Formula::BigAnd { range, body, .. } => {
                go_t(range, out);
                go_f(body, out);
            }
            Formula::SchemaHole { args, .. } => {
                for a in args {
                    go_t(a, out);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    go_f(f, &mut out);
    out
}

/// True when the constant occurs as (part of) the range of a conjunctor or
/// multiple quantifier somewhere in the formula.
pub fn occurs_as_range_constant(f: &Formula, name: &str) -> bool {
    fn term_mentions(t: &Term, name: &str) -> bool {
        match t {
            Term::Constant(c) => c == name,
            Term::Var(_, Sort::FnOnConstant(sub)) => term_mentions(sub, name),
            Term::Var(..) => false,
            Term::Singleton(inner) => term_mentions(inner, name),
            Term::Iota { .. } => false,
        }
    }
    match f {
        Formula::MultiForall { range, body, .. }
        | Formula::MultiExists { range, body, .. }
        | Formula::BigAnd { range, body, .. } => {
            term_mentions(range, name) || occurs_as_range_constant(body, name)
        }
        Formula::Not(g) => occurs_as_range_constant(g, name),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            occurs_as_range_constant(a, name) || occurs_as_range_constant(b, name)
        }
        Formula::Forall(_, _, body) | Formula::Exists(_, _, body) => {
            occurs_as_range_constant(body, name)
        }
        _ => false,
    }
}

/// Returns `base` extended with primes until `taken` rejects it.
pub fn primed(base: &str, taken: impl Fn(&str) -> bool) -> String {
    let mut name = base.to_string();
    while taken(&name) {
        name.push('\'');
    }
    name
}

/// What is being replaced.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Target {
    /// Free occurrences of a variable.
    Var(String, Sort),
    /// All occurrences of a closed term (constants included).
    Closed(Term),
}

struct Subst<'a> {
    target: Target,
    replacement: Term,
    reg: &'a Registry,
    /// Free variables of the replacement, for capture detection.
    repl_vars: Vec<(String, Sort)>,
}

impl<'a> Subst<'a> {
    fn shielded(&self, binder: &(String, Sort)) -> bool {
        match &self.target {
            Target::Var(n, s) => binder.0 == *n && binder.1 == *s,
            Target::Closed(_) => false,
        }
    }

    fn would_capture(&self, binder: &(String, Sort)) -> bool {
        self.repl_vars.iter().any(|(n, s)| n == &binder.0 && s == &binder.1)
    }

    /// Does the subtree contain an occurrence of the target (ignoring
    /// shadowing, a cheap over-approximation)?
    fn mentions_target_f(&self, f: &Formula) -> bool {
        match &self.target {
            Target::Var(n, s) => formula_vars(f).iter().any(|(vn, vs)| vn == n && vs == s),
            Target::Closed(t) => match t {
                Term::Constant(c) => constants_in(f).contains(c),
                _ => formula_contains_term(f, t),
            },
        }
    }

    fn term(&self, t: &Term, binders: &mut Vec<(String, Sort)>) -> Result<Term, BindError> {
        // Closed-term targets match structurally anywhere.
        if let Target::Closed(pat) = &self.target {
            if t == pat {
                return Ok(self.replacement.clone());
            }
        }
        match t {
            Term::Constant(_) => Ok(t.clone()),
            Term::Var(n, s) => {
                if let Target::Var(tn, ts) = &self.target {
                    if n == tn && s == ts && !binders.iter().any(|b| b == &(n.clone(), s.clone()))
                    {
                        return Ok(self.replacement.clone());
                    }
                }
                // Rewrite subscripts that mention the target.
                match s {
                    Sort::FnComposite(x) => {
                        let sub = Term::Var(x.clone(), Sort::SetVar);
                        let new_sub = self.term(&sub, binders)?;
                        if new_sub == sub {
                            Ok(t.clone())
                        } else {
                            self.check_subscript_replacement()?;
                            Ok(Term::Var(n.clone(), fn_sort_for_subscript(new_sub)))
                        }
                    }
                    Sort::UrFamily(a) => {
                        let sub = Term::Var(a.clone(), Sort::ThingVar);
                        let new_sub = self.term(&sub, binders)?;
                        if new_sub == sub {
                            Ok(t.clone())
                        } else {
                            self.check_subscript_replacement()?;
                            Ok(Term::Var(
                                n.clone(),
                                fn_sort_for_subscript(Term::Singleton(Box::new(new_sub))),
                            ))
                        }
                    }
                    Sort::FnOnConstant(sub) => {
                        let new_sub = self.term(sub, binders)?;
                        if new_sub == **sub {
                            Ok(t.clone())
                        } else {
                            Ok(Term::Var(n.clone(), fn_sort_for_subscript(new_sub)))
                        }
                    }
                    _ => Ok(t.clone()),
                }
            }
            Term::Singleton(inner) => {
                Ok(Term::Singleton(Box::new(self.term(inner, binders)?)))
            }
            Term::Iota { bound, body } => {
                let binder = (bound.clone(), Sort::ThingVar);
                if self.shielded(&binder) {
                    return Ok(t.clone());
                }
                if self.would_capture(&binder) && self.mentions_target_f(body) {
                    let fresh = self.fresh_for(bound, body);
                    let renamed = rename_simple_binder(body, bound, &fresh, &Sort::ThingVar, self.reg)?;
                    binders.push((fresh.clone(), Sort::ThingVar));
                    let new_body = self.formula(&renamed, binders)?;
                    binders.pop();
                    return Ok(Term::Iota { bound: fresh, body: Box::new(new_body) });
                }
                binders.push(binder);
                let new_body = self.formula(body, binders)?;
                binders.pop();
                Ok(Term::Iota { bound: bound.clone(), body: Box::new(new_body) })
            }
        }
    }

    /// Subscript rewrites require the replacement to be a variable or closed.
    fn check_subscript_replacement(&self) -> Result<(), BindError> {
        let ok = matches!(self.replacement, Term::Var(..))
            || term_vars(&self.replacement).is_empty();
        if ok {
            Ok(())
        } else {
            Err(BindError::SubscriptSubstitution(print_term(&self.replacement)))
        }
    }

    fn fresh_for(&self, base: &str, body: &Formula) -> String {
        let body_vars: BTreeSet<String> =
            formula_vars(body).into_iter().map(|(n, _)| n).collect();
        let repl: BTreeSet<String> =
            self.repl_vars.iter().map(|(n, _)| n.clone()).collect();
        primed(base, |cand| {
            body_vars.contains(cand) || repl.contains(cand) || self.reg.contains(cand)
        })
    }

    fn binder_case(
        &self,
        v: &str,
        s: &Sort,
        body: &Formula,
        binders: &mut Vec<(String, Sort)>,
        rebuild: &dyn Fn(String, Sort, Formula) -> Formula,
    ) -> Result<Formula, BindError> {
        // The binder's subscript may itself mention the target: rewrite it.
        let new_sort = match s {
            Sort::FnComposite(x) => {
                let sub = Term::Var(x.clone(), Sort::SetVar);
                let new_sub = self.term(&sub, binders)?;
                if new_sub == sub { s.clone() } else { fn_sort_for_subscript(new_sub) }
            }
            Sort::UrFamily(a) => {
                let sub = Term::Var(a.clone(), Sort::ThingVar);
                let new_sub = self.term(&sub, binders)?;
                if new_sub == sub {
                    s.clone()
                } else {
                    fn_sort_for_subscript(Term::Singleton(Box::new(new_sub)))
                }
            }
            Sort::FnOnConstant(sub) => {
                let new_sub = self.term(sub, binders)?;
                if new_sub == **sub { s.clone() } else { fn_sort_for_subscript(new_sub) }
            }
            _ => s.clone(),
        };
        if new_sort != *s {
            // The binder identity changed (e.g. forall f{Chat} became
            // forall f{X}). Occurrences inside are rewritten by the same
            // subscript rule, so binding is preserved; but the new identity
            // must not collide with a variable already free in the body.
            let clashes = formula_vars(body)
                .iter()
                .any(|(n, vs)| n == v && *vs == new_sort);
            if clashes {
                return Err(BindError::Capture(display_var(v, &new_sort)));
            }
            binders.push((v.to_string(), s.clone()));
            let new_body = self.formula(body, binders)?;
            binders.pop();
            return Ok(rebuild(v.to_string(), new_sort, new_body));
        }
        let binder = (v.to_string(), s.clone());
        if self.shielded(&binder) {
            return Ok(rebuild(v.to_string(), s.clone(), body.clone()));
        }
        if self.would_capture(&binder) && self.mentions_target_f(body) {
            let fresh = self.fresh_for(v, body);
            let renamed = rename_simple_binder(body, v, &fresh, s, self.reg)?;
            binders.push((fresh.clone(), s.clone()));
            let new_body = self.formula(&renamed, binders)?;
            binders.pop();
            return Ok(rebuild(fresh, s.clone(), new_body));
        }
        binders.push(binder);
        let new_body = self.formula(body, binders)?;
        binders.pop();
        Ok(rebuild(v.to_string(), s.clone(), new_body))
    }

    fn formula(&self, f: &Formula, binders: &mut Vec<(String, Sort)>) -> Result<Formula, BindError> {
        match f {
            Formula::Eq(a, b) => {
                Ok(Formula::Eq(self.term(a, binders)?, self.term(b, binders)?))
            }
            Formula::Mem(a, b) => {
                Ok(Formula::Mem(self.term(a, binders)?, self.term(b, binders)?))
            }
            Formula::Surj(a, b, c) => Ok(Formula::Surj(
                self.term(a, binders)?,
                self.term(b, binders)?,
                self.term(c, binders)?,
            )),
            Formula::MapsTo(a, b, c) => Ok(Formula::MapsTo(
                self.term(a, binders)?,
                self.term(b, binders)?,
                self.term(c, binders)?,
            )),
            Formula::Not(g) => Ok(Formula::Not(Box::new(self.formula(g, binders)?))),
            Formula::And(a, b) => Ok(Formula::And(
                Box::new(self.formula(a, binders)?),
                Box::new(self.formula(b, binders)?),
            )),
            Formula::Or(a, b) => Ok(Formula::Or(
                Box::new(self.formula(a, binders)?),
                Box::new(self.formula(b, binders)?),
            )),
            Formula::Implies(a, b) => Ok(Formula::Implies(
                Box::new(self.formula(a, binders)?),
                Box::new(self.formula(b, binders)?),
            )),
            Formula::Iff(a, b) => Ok(Formula::Iff(
                Box::new(self.formula(a, binders)?),
                Box::new(self.formula(b, binders)?),
            )),
            Formula::Forall(v, s, body) => {
                self.binder_case(v, s, body, binders, &|v, s, b| {
                    Formula::Forall(v, s, Box::new(b))
                })
            }
            Formula::Exists(v, s, body) => {
                self.binder_case(v, s, body, binders, &|v, s, b| {
                    Formula::Exists(v, s, Box::new(b))
                })
            }
            Formula::MultiForall { base, index, range, body }
            | Formula::MultiExists { base, index, range, body } => {
                let is_forall = matches!(f, Formula::MultiForall { .. });
                let new_range = self.term(range, binders)?;
                let fam = (base.clone(), Sort::UrFamily(index.clone()));
                if self.shielded(&fam) {
                    let body = body.clone();
                    return Ok(rebuild_multi(is_forall, base, index, new_range, *body));
                }
                // Renaming the operator index is not supported; refuse the
                // substitution instead of producing a wrong result.
                let index_clash = match &self.target {
                    Target::Var(n, s) => n == index && *s == Sort::ThingVar,
                    Target::Closed(_) => false,
                };
                let index_capture = self
                    .repl_vars
                    .iter()
                    .any(|(n, s)| n == index && *s == Sort::ThingVar);
                if (index_clash || index_capture || self.would_capture(&fam))
                    && self.mentions_target_f(body)
                {
                    return Err(BindError::Capture(index.clone()));
                }
                if index_clash {
                    // Target is shadowed inside family subscripts and the
                    // inner conjunctor; with no other mention, nothing to do.
                    let body = body.clone();
                    return Ok(rebuild_multi(is_forall, base, index, new_range, *body));
                }
                binders.push(fam);
                let new_body = self.formula(body, binders)?;
                binders.pop();
                Ok(rebuild_multi(is_forall, base, index, new_range, new_body))
            }
            Formula::BigAnd { index, range, body } => {
                let new_range = self.term(range, binders)?;
                let binder = (index.clone(), Sort::ThingVar);
                if self.shielded(&binder) {
                    return Ok(Formula::BigAnd {
                        index: index.clone(),
                        range: new_range,
                        body: body.clone(),
                    });
                }
                if self.would_capture(&binder) && self.mentions_target_f(body) {
                    return Err(BindError::Capture(index.clone()));
                }
                binders.push(binder);
                let new_body = self.formula(body, binders)?;
                binders.pop();
                Ok(Formula::BigAnd {
                    index: index.clone(),
                    range: new_range,
                    body: Box::new(new_body),
                })
            }
            Formula::SchemaHole { name, args } => {
                let mut new_args = Vec::with_capacity(args.len());
                for a in args {
                    new_args.push(self.term(a, binders)?);
                }
                Ok(Formula::SchemaHole { name: name.clone(), args: new_args })
            }
        }
    }
}

fn rebuild_multi(
    is_forall: bool,
    base: &str,
    index: &str,
    range: Term,
    body: Formula,
) -> Formula {
    if is_forall {
        Formula::MultiForall {
            base: base.to_string(),
            index: index.to_string(),
            range,
            body: Box::new(body),
        }
    } else {
        Formula::MultiExists {
            base: base.to_string(),
            index: index.to_string(),
            range,
            body: Box::new(body),
        }
    }
}

fn formula_contains_term(f: &Formula, pat: &Term) -> bool {
    fn t_contains(t: &Term, pat: &Term) -> bool {
        if t == pat {
            return true;
        }
        match t {
            Term::Singleton(inner) => t_contains(inner, pat),
            Term::Var(_, Sort::FnOnConstant(sub)) => t_contains(sub, pat),
            Term::Iota { body, .. } => formula_contains_term(body, pat),
            _ => false,
        }
    }
    match f {
        Formula::Eq(a, b) | Formula::Mem(a, b) => t_contains(a, pat) || t_contains(b, pat),
        Formula::Surj(a, b, c) | Formula::MapsTo(a, b, c) => {
            t_contains(a, pat) || t_contains(b, pat) || t_contains(c, pat)
        }
        Formula::Not(g) => formula_contains_term(g, pat),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            formula_contains_term(a, pat) || formula_contains_term(b, pat)
        }
        Formula::Forall(_, s, body) | Formula::Exists(_, s, body) => {
            let in_sort = match s {
                Sort::FnOnConstant(sub) => t_contains(sub, pat),
                _ => false,
            };
            in_sort || formula_contains_term(body, pat)
        }
        Formula::MultiForall { range, body, .. }
        | Formula::MultiExists { range, body, .. }
        | Formula::BigAnd { range, body, .. } => {
            t_contains(range, pat) || formula_contains_term(body, pat)
        }
        Formula::SchemaHole { args, .. } => args.iter().any(|a| t_contains(a, pat)),
    }
}

/// Renames a simple binder variable inside `body` (used for capture
/// avoidance). The new name must be fresh for the body.
fn rename_simple_binder(
    body: &Formula,
    old: &str,
    new: &str,
    sort: &Sort,
    reg: &Registry,
) -> Result<Formula, BindError> {
    let subst = Subst {
        target: Target::Var(old.to_string(), sort.clone()),
        replacement: Term::Var(new.to_string(), sort.clone()),
        reg,
        repl_vars: vec![(new.to_string(), sort.clone())],
    };
    subst.formula(body, &mut Vec::new())
}

fn kind_name(k: ValueKind) -> &'static str {
    match k {
        ValueKind::Set => "a set term",
        ValueKind::Thing => "a thing term",
        ValueKind::Fn => "a function term",
    }
}

/// Checks that `u` can stand where a variable of sort `s` stands.
fn check_replacement_sort(s: &Sort, u: &Term, reg: &Registry) -> Result<(), BindError> {
    let found = value_kind(u, reg).map_err(|e| match e {
        crate::syntax::SyntaxError::UnknownConstant(c) => BindError::UnknownConstant(c),
    })?;
    let ok = match s {
        Sort::SetVar => found == ValueKind::Set,
        Sort::ThingVar => true,
        Sort::FnOnConstant(dom) => {
            found == ValueKind::Fn && {
                // Domain agreement when the domain is knowable.
                match u {
                    Term::Constant(c) => match reg.get(c) {
                        Some(ConstKind::Fn { domain }) => domain == dom.as_ref(),
                        _ => false,
                    },
                    Term::Var(_, Sort::FnOnConstant(d)) => d == dom,
                    Term::Var(_, Sort::UrFamily(_)) | Term::Var(_, Sort::FnComposite(_)) => true,
                    _ => false,
                }
            }
        }
        Sort::FnComposite(_) | Sort::UrFamily(_) => found == ValueKind::Fn,
        Sort::Constant => false,
    };
    if ok {
        Ok(())
    } else {
        Err(BindError::SortMismatch {
            expected: format!("{:?}", s),
            found: kind_name(found).to_string(),
        })
    }
}

/// Capture-avoiding substitution `[u \\ x] f`.
///
/// `x` must be a variable (free occurrences are replaced) or a constant /
/// closed term (all occurrences are replaced; `u` must then be a variable).
/// Substituting for a set variable rewrites composite variables `g{X}` and
/// switches variable-range operators to the substituted range; the constant
/// direction switches them back.
pub fn substitute(f: &Formula, x: &Term, u: &Term, reg: &Registry) -> Result<Formula, BindError> {
    let (target, repl) = match x {
        Term::Var(n, s) => {
            check_replacement_sort(s, u, reg)?;
            (Target::Var(n.clone(), s.clone()), u.clone())
        }
        Term::Constant(c) => {
            let sort = match u {
                Term::Var(_, s) => s.clone(),
                other => return Err(BindError::NotAVariable(print_term(other))),
            };
            // Reverse substitution: the constant's kind must fit the
            // variable's sort.
            match reg.get(c) {
                Some(ConstKind::Set { .. }) => {
                    if sort != Sort::SetVar {
                        return Err(BindError::SortMismatch {
                            expected: "a set variable".into(),
                            found: display_var_term(u),
                        });
                    }
                }
                Some(ConstKind::Thing) | Some(ConstKind::Opaque) => {
                    if sort != Sort::ThingVar {
                        return Err(BindError::SortMismatch {
                            expected: "a thing variable".into(),
                            found: display_var_term(u),
                        });
                    }
                }
                Some(ConstKind::Fn { domain }) => match &sort {
                    Sort::FnOnConstant(d) if d.as_ref() == domain => {}
                    _ => {
                        return Err(BindError::SortMismatch {
                            expected: format!(
                                "a function variable on {}",
                                print_term(domain)
                            ),
                            found: display_var_term(u),
                        })
                    }
                },
                None => return Err(BindError::UnknownConstant(c.clone())),
            }
            (Target::Closed(x.clone()), u.clone())
        }
        other => {
            // Closed-term target (used by existential introduction).
            if !term_vars(other).is_empty() {
                return Err(BindError::NotAVariable(print_term(other)));
            }
            let sort = match u {
                Term::Var(_, s) => s.clone(),
                bad => return Err(BindError::NotAVariable(print_term(bad))),
            };
            let kind = value_kind(other, reg).map_err(|e| match e {
                crate::syntax::SyntaxError::UnknownConstant(c) => BindError::UnknownConstant(c),
            })?;
            let fits = match (&sort, kind) {
                (Sort::SetVar, ValueKind::Set) => true,
                // Sets and functions are things too.
                (Sort::ThingVar, _) => true,
                (Sort::FnOnConstant(_), ValueKind::Fn) => true,
                _ => false,
            };
            if !fits {
                return Err(BindError::SortMismatch {
                    expected: format!("{:?}", sort),
                    found: kind_name(kind).to_string(),
                });
            }
            (Target::Closed(other.clone()), u.clone())
        }
    };
    let repl_vars = term_vars(&repl);
    let subst = Subst { target, replacement: repl, reg, repl_vars };
    subst.formula(f, &mut Vec::new())
}

fn display_var_term(t: &Term) -> String {
    match t {
        Term::Var(n, s) => display_var(n, s),
        other => print_term(other),
    }
}

/// Expands a conjunctor over an explicitly listed finite range into the list
/// of its instances, rewriting family variables `f{a+}` into per-element
/// function variables `f{t+}` along the way.
pub fn expand_conjunction(
    f: &Formula,
    elements: &[Term],
    reg: &Registry,
) -> Result<Vec<Formula>, BindError> {
    let Formula::BigAnd { index, body, .. } = f else {
        return Err(BindError::NotAVariable("expected a conjunctor formula".into()));
    };
    let var = Term::Var(index.clone(), Sort::ThingVar);
    elements
        .iter()
        .map(|el| substitute(body, &var, el, reg))
        .collect()
}
