//! Deterministic random formula generator shared by the property suites.
//!
//! Every construction step applies one grammar clause, so the output is
//! well-formed by construction. The syntax suite checks that claim against
//! `check_wff`; the parser suite round-trips the output through the printer.
//!
//! Name discipline: binders draw from fixed pools (`X Y Z W`, `a b c g`,
//! `f u s`, `F G`) while free simple variables draw from the disjoint pools
//! `P R` and `p r`, which the generator never binds. Substitution properties
//! rely on that split: a replacement variable taken from the free pools can
//! never be captured, and pool names never occur as subscripts of function
//! variables.

#![allow(dead_code)]

use setfn::syntax::{Formula, Sort, Term};

const SET_POOL: [&str; 4] = ["X", "Y", "Z", "W"];
const THING_POOL: [&str; 4] = ["a", "b", "c", "g"];
const FN_POOL: [&str; 3] = ["f", "u", "s"];
const COMP_POOL: [&str; 2] = ["F", "G"];
const FREE_SET_POOL: [&str; 2] = ["P", "R"];
const FREE_THING_POOL: [&str; 2] = ["p", "r"];

/// Splitmix64 stream; one generator per seed keeps every case reproducible
/// from its seed alone.
pub struct Gen {
    state: u64,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen { state: seed ^ 0x9e37_79b9_7f4a_7c15 }
    }

    pub fn next(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn pick(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }

    pub fn flip(&mut self) -> bool {
        self.next() & 1 == 0
    }
}

/// Names currently bound by enclosing quantifiers, by sort.
#[derive(Default, Clone)]
pub struct Scope {
    pub sets: Vec<String>,
    pub things: Vec<String>,
}

/// Singleton tower of the given height over `empty`; height 0 is `empty`.
pub fn tower(k: usize) -> Term {
    let mut t = Term::Constant("empty".into());
    for _ in 0..k {
        t = Term::Singleton(Box::new(t));
    }
    t
}

fn closed_set_term(g: &mut Gen) -> Term {
    match g.pick(4) {
        0 => Term::Constant("omega".into()),
        1 => Term::Constant("empty".into()),
        2 => tower(1 + g.pick(3)),
        _ => Term::Singleton(Box::new(Term::Constant("omega".into()))),
    }
}

/// A term denoting a set: a bound or free set variable, a singleton of a
/// thing variable, or a closed set term.
pub fn set_term(g: &mut Gen, sc: &Scope) -> Term {
    let roll = g.pick(6);
    if roll == 0 && !sc.sets.is_empty() {
        let n = sc.sets[g.pick(sc.sets.len())].clone();
        return Term::Var(n, Sort::SetVar);
    }
    if roll == 1 {
        let n = FREE_SET_POOL[g.pick(FREE_SET_POOL.len())].to_string();
        return Term::Var(n, Sort::SetVar);
    }
    if roll == 2 && !sc.things.is_empty() {
        let n = sc.things[g.pick(sc.things.len())].clone();
        return Term::Singleton(Box::new(Term::Var(n, Sort::ThingVar)));
    }
    closed_set_term(g)
}

/// A term denoting a thing: a bound or free thing variable, a set term
/// (sets are things), or an iota-term.
pub fn thing_term(g: &mut Gen, sc: &Scope) -> Term {
    let roll = g.pick(8);
    if roll == 0 && !sc.things.is_empty() {
        let n = sc.things[g.pick(sc.things.len())].clone();
        return Term::Var(n, Sort::ThingVar);
    }
    if roll == 1 {
        let n = FREE_THING_POOL[g.pick(FREE_THING_POOL.len())].to_string();
        return Term::Var(n, Sort::ThingVar);
    }
    if roll == 2 {
        return iota_term(g, sc);
    }
    if roll <= 4 && !sc.things.is_empty() {
        let n = sc.things[g.pick(sc.things.len())].clone();
        return Term::Var(n, Sort::ThingVar);
    }
    set_term(g, sc)
}

/// An iota-term in one of the two licensed shapes: the image of a family
/// member at a bound index, or the image of an ur-function on the singleton
/// of a closed argument.
pub fn iota_term(g: &mut Gen, sc: &Scope) -> Term {
    if !sc.things.is_empty() && g.flip() {
        let a = sc.things[g.pick(sc.things.len())].clone();
        let mut b = THING_POOL[g.pick(THING_POOL.len())].to_string();
        if b == a {
            b = if a == "b" { "c".into() } else { "b".into() };
        }
        let fun = Term::Var(
            FN_POOL[g.pick(FN_POOL.len())].to_string(),
            Sort::UrFamily(a.clone()),
        );
        let body = Formula::MapsTo(
            fun,
            Term::Var(a, Sort::ThingVar),
            Term::Var(b.clone(), Sort::ThingVar),
        );
        return Term::Iota { bound: b, body: Box::new(body) };
    }
    let arg = match g.pick(3) {
        0 => Term::Constant("empty".into()),
        1 => Term::Constant("omega".into()),
        _ => tower(1 + g.pick(2)),
    };
    let b = THING_POOL[g.pick(THING_POOL.len())].to_string();
    let fun = Term::Var(
        FN_POOL[g.pick(FN_POOL.len())].to_string(),
        Sort::FnOnConstant(Box::new(Term::Singleton(Box::new(arg.clone())))),
    );
    let body = Formula::MapsTo(fun, arg, Term::Var(b.clone(), Sort::ThingVar));
    Term::Iota { bound: b, body: Box::new(body) }
}

/// A term denoting a function: a composite variable over a bound set
/// variable, a family variable over a bound thing variable, a function
/// variable on a closed set, or the inactive function on `empty`.
pub fn fn_term(g: &mut Gen, sc: &Scope) -> Term {
    let roll = g.pick(4);
    if roll == 0 && !sc.sets.is_empty() {
        let x = sc.sets[g.pick(sc.sets.len())].clone();
        return Term::Var(
            COMP_POOL[g.pick(COMP_POOL.len())].to_string(),
            Sort::FnComposite(x),
        );
    }
    if roll == 1 && !sc.things.is_empty() {
        let a = sc.things[g.pick(sc.things.len())].clone();
        return Term::Var(FN_POOL[g.pick(FN_POOL.len())].to_string(), Sort::UrFamily(a));
    }
    if roll == 2 {
        return Term::Constant("id_empty".into());
    }
    Term::Var(
        FN_POOL[g.pick(FN_POOL.len())].to_string(),
        Sort::FnOnConstant(Box::new(closed_set_term(g))),
    )
}

/// An atomic formula over the current scope.
pub fn atom(g: &mut Gen, sc: &Scope) -> Formula {
    match g.pick(4) {
        0 => Formula::Eq(thing_term(g, sc), thing_term(g, sc)),
        1 => Formula::Mem(thing_term(g, sc), set_term(g, sc)),
        2 => Formula::Surj(fn_term(g, sc), set_term(g, sc), set_term(g, sc)),
        _ => Formula::MapsTo(fn_term(g, sc), thing_term(g, sc), thing_term(g, sc)),
    }
}

fn range_term(g: &mut Gen, sc: &Scope) -> Term {
    if !sc.sets.is_empty() && g.flip() {
        let n = sc.sets[g.pick(sc.sets.len())].clone();
        return Term::Var(n, Sort::SetVar);
    }
    closed_set_term(g)
}

fn big_and(g: &mut Gen, sc: &mut Scope, index: &str, range: &Term, base: Option<&str>) -> Formula {
    let head = match base {
        Some(b) => Term::Var(b.to_string(), Sort::UrFamily(index.to_string())),
        None => {
            if g.flip() {
                Term::Var(
                    FN_POOL[g.pick(FN_POOL.len())].to_string(),
                    Sort::UrFamily(index.to_string()),
                )
            } else {
                fn_term(g, sc)
            }
        }
    };
    sc.things.push(index.to_string());
    let img = thing_term(g, sc);
    sc.things.pop();
    Formula::BigAnd {
        index: index.to_string(),
        range: range.clone(),
        body: Box::new(Formula::MapsTo(
            head,
            Term::Var(index.to_string(), Sort::ThingVar),
            img,
        )),
    }
}

/// A well-formed formula of bounded depth over the current scope. Every
/// branch corresponds to one grammar production.
pub fn formula(g: &mut Gen, depth: u32, sc: &mut Scope) -> Formula {
    if depth == 0 {
        return atom(g, sc);
    }
    match g.pick(14) {
        0 | 1 => atom(g, sc),
        2 => Formula::Not(Box::new(formula(g, depth - 1, sc))),
        3 => Formula::And(
            Box::new(formula(g, depth - 1, sc)),
            Box::new(formula(g, depth - 1, sc)),
        ),
        4 => Formula::Or(
            Box::new(formula(g, depth - 1, sc)),
            Box::new(formula(g, depth - 1, sc)),
        ),
        5 => Formula::Implies(
            Box::new(formula(g, depth - 1, sc)),
            Box::new(formula(g, depth - 1, sc)),
        ),
        6 => Formula::Iff(
            Box::new(formula(g, depth - 1, sc)),
            Box::new(formula(g, depth - 1, sc)),
        ),
        7 => {
            let v = SET_POOL[g.pick(SET_POOL.len())].to_string();
            sc.sets.push(v.clone());
            let body = formula(g, depth - 1, sc);
            sc.sets.pop();
            let q = if g.flip() { Formula::Forall } else { Formula::Exists };
            q(v, Sort::SetVar, Box::new(body))
        }
        8 => {
            let v = THING_POOL[g.pick(THING_POOL.len())].to_string();
            sc.things.push(v.clone());
            let body = formula(g, depth - 1, sc);
            sc.things.pop();
            let q = if g.flip() { Formula::Forall } else { Formula::Exists };
            q(v, Sort::ThingVar, Box::new(body))
        }
        9 => {
            // Guarded universal: the printer re-sugars this very pattern.
            let v = SET_POOL[g.pick(SET_POOL.len())].to_string();
            sc.sets.push(v.clone());
            let body = formula(g, depth - 1, sc);
            sc.sets.pop();
            let guard = Formula::Not(Box::new(Formula::Eq(
                Term::Var(v.clone(), Sort::SetVar),
                Term::Constant("empty".into()),
            )));
            Formula::Forall(
                v,
                Sort::SetVar,
                Box::new(Formula::Implies(Box::new(guard), Box::new(body))),
            )
        }
        10 => {
            let v = FN_POOL[g.pick(FN_POOL.len())].to_string();
            let sort = Sort::FnOnConstant(Box::new(closed_set_term(g)));
            let body = formula(g, depth - 1, sc);
            let q = if g.flip() { Formula::Forall } else { Formula::Exists };
            q(v, sort, Box::new(body))
        }
        11 => {
            // Quantifier over a composite variable; only inside the scope of
            // a set-variable binder, so introduce one when none is active.
            let (x, fresh) = match sc.sets.last() {
                Some(x) if g.flip() => (x.clone(), false),
                _ => {
                    let x = SET_POOL[g.pick(SET_POOL.len())].to_string();
                    sc.sets.push(x.clone());
                    (x, true)
                }
            };
            let v = COMP_POOL[g.pick(COMP_POOL.len())].to_string();
            let comp = Term::Var(v.clone(), Sort::FnComposite(x.clone()));
            let body = if g.flip() {
                Formula::Surj(comp, Term::Var(x.clone(), Sort::SetVar), set_term(g, sc))
            } else {
                formula(g, depth - 1, sc)
            };
            let inner = Formula::Exists(v, Sort::FnComposite(x.clone()), Box::new(body));
            if fresh {
                sc.sets.pop();
                Formula::Forall(x, Sort::SetVar, Box::new(inner))
            } else {
                inner
            }
        }
        12 => {
            // Quantifier over an ur-function variable; only inside the scope
            // of a thing-variable binder, so introduce one when none is
            // active.
            let (a, fresh) = match sc.things.last() {
                Some(a) if g.flip() => (a.clone(), false),
                _ => {
                    let a = THING_POOL[g.pick(THING_POOL.len())].to_string();
                    sc.things.push(a.clone());
                    (a, true)
                }
            };
            let v = FN_POOL[g.pick(FN_POOL.len())].to_string();
            let fam = Term::Var(v.clone(), Sort::UrFamily(a.clone()));
            let body = if g.flip() {
                Formula::MapsTo(fam, Term::Var(a.clone(), Sort::ThingVar), {
                    sc.things.push(a.clone());
                    let t = thing_term(g, sc);
                    sc.things.pop();
                    t
                })
            } else {
                formula(g, depth - 1, sc)
            };
            let inner = Formula::Forall(v, Sort::UrFamily(a.clone()), Box::new(body));
            if fresh {
                sc.things.pop();
                Formula::Forall(a, Sort::ThingVar, Box::new(inner))
            } else {
                inner
            }
        }
        _ => {
            let index = THING_POOL[g.pick(THING_POOL.len())].to_string();
            let range = range_term(g, sc);
            if g.flip() {
                // Bare conjunctor.
                big_and(g, sc, &index, &range, None)
            } else {
                // Multiple quantifier; its body must contain a conjunctor
                // over the same index and range mentioning the family.
                let base = FN_POOL[g.pick(FN_POOL.len())].to_string();
                let conj = big_and(g, sc, &index, &range, Some(&base));
                let body = match g.pick(3) {
                    0 => conj,
                    1 => Formula::And(Box::new(conj), Box::new(atom(g, sc))),
                    _ => {
                        let y = SET_POOL[g.pick(SET_POOL.len())].to_string();
                        Formula::Exists(
                            y,
                            Sort::SetVar,
                            Box::new(Formula::And(Box::new(atom(g, sc)), Box::new(conj))),
                        )
                    }
                };
                if g.flip() {
                    Formula::MultiForall { base, index, range, body: Box::new(body) }
                } else {
                    Formula::MultiExists { base, index, range, body: Box::new(body) }
                }
            }
        }
    }
}

/// Top-level entry: a formula of depth 2 to 5 decided by the seed, generated
/// in an empty scope.
pub fn formula_from_seed(seed: u64) -> Formula {
    let mut g = Gen::new(seed);
    let depth = 2 + (g.pick(4) as u32);
    let mut sc = Scope::default();
    formula(&mut g, depth, &mut sc)
}

/// Counts free occurrences of the simple variable `(name, sort)` in a
/// formula, walking with an explicit binder stack. Subscript positions of
/// function variables count as occurrences of the subscript variable, the
/// same way the binding analysis treats them.
pub fn count_free(f: &Formula, name: &str, sort: &Sort) -> usize {
    let mut active: Vec<(String, Sort)> = Vec::new();
    let mut n = 0;
    count_formula(f, name, sort, &mut active, &mut n);
    n
}

fn hit(n: &str, s: &Sort, name: &str, sort: &Sort, active: &[(String, Sort)], out: &mut usize) {
    if n == name && s == sort && !active.iter().any(|(an, asrt)| an == n && asrt == s) {
        *out += 1;
    }
}

fn count_term(t: &Term, name: &str, sort: &Sort, active: &mut Vec<(String, Sort)>, out: &mut usize) {
    match t {
        Term::Constant(_) => {}
        Term::Var(n, s) => {
            hit(n, s, name, sort, active, out);
            match s {
                Sort::FnComposite(x) => hit(x, &Sort::SetVar, name, sort, active, out),
                Sort::UrFamily(a) => hit(a, &Sort::ThingVar, name, sort, active, out),
                Sort::FnOnConstant(sub) => count_term(sub, name, sort, active, out),
                _ => {}
            }
        }
        Term::Singleton(inner) => count_term(inner, name, sort, active, out),
        Term::Iota { bound, body } => {
            active.push((bound.clone(), Sort::ThingVar));
            count_formula(body, name, sort, active, out);
            active.pop();
        }
    }
}

fn count_formula(
    f: &Formula,
    name: &str,
    sort: &Sort,
    active: &mut Vec<(String, Sort)>,
    out: &mut usize,
) {
    match f {
        Formula::Eq(a, b) | Formula::Mem(a, b) => {
            count_term(a, name, sort, active, out);
            count_term(b, name, sort, active, out);
        }
        Formula::Surj(a, b, c) | Formula::MapsTo(a, b, c) => {
            count_term(a, name, sort, active, out);
            count_term(b, name, sort, active, out);
            count_term(c, name, sort, active, out);
        }
        Formula::Not(g) => count_formula(g, name, sort, active, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            count_formula(a, name, sort, active, out);
            count_formula(b, name, sort, active, out);
        }
        Formula::Forall(v, s, body) | Formula::Exists(v, s, body) => {
            match s {
                Sort::FnComposite(x) => hit(x, &Sort::SetVar, name, sort, active, out),
                Sort::UrFamily(a) => hit(a, &Sort::ThingVar, name, sort, active, out),
                Sort::FnOnConstant(sub) => count_term(sub, name, sort, active, out),
                _ => {}
            }
            active.push((v.clone(), s.clone()));
            count_formula(body, name, sort, active, out);
            active.pop();
        }
        Formula::MultiForall { base, index, range, body }
        | Formula::MultiExists { base, index, range, body } => {
            count_term(range, name, sort, active, out);
            active.push((base.clone(), Sort::UrFamily(index.clone())));
            count_formula(body, name, sort, active, out);
            active.pop();
        }
        Formula::BigAnd { index, range, body } => {
            count_term(range, name, sort, active, out);
            active.push((index.clone(), Sort::ThingVar));
            count_formula(body, name, sort, active, out);
            active.pop();
        }
        Formula::SchemaHole { args, .. } => {
            for a in args {
                count_term(a, name, sort, active, out);
            }
        }
    }
}

/// A term of moderate size from a seed, for term-level properties.
pub fn term_from_seed(seed: u64) -> Term {
    let mut g = Gen::new(seed);
    let mut sc = Scope::default();
    // Open a couple of pseudo-binders so variable-dependent shapes appear.
    sc.sets.push("X".into());
    sc.things.push("a".into());
    match g.pick(3) {
        0 => thing_term(&mut g, &sc),
        1 => set_term(&mut g, &sc),
        _ => fn_term(&mut g, &sc),
    }
}
