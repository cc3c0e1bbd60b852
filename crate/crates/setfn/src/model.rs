//! Finite universes and semantic checking.
//!
//! A universe (`.tfu` file) names finitely many sets and functions. Sets are
//! hereditarily finite values; functions carry an explicit domain and graph.
//! Entries may reference each other cyclically (for counterexample hunting);
//! entries on a reference cycle are represented by an opaque handle equal
//! only to itself, with a one-level unfolding for structural access.
//!
//! Two independent checkers decide sentences over a universe:
//!
//! * [`Universe::eval_sentence`] walks the formula with an environment of
//!   variable bindings, enumerating team assignments for the multiple
//!   quantifiers;
//! * [`Universe::check_validity`] names every carrier value and instantiates
//!   quantifiers by substituting constants into the formula, clause by
//!   clause.
//!
//! The two share only the atomic-formula semantics, so they serve as mutual
//! oracles: tests assert that they agree.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use thiserror::Error;

use crate::binding::occurrences;
use crate::syntax::{ConstKind, Formula, Registry, Sort, Term};
use crate::theory::AxiomId;

/// A value of a finite universe.
///
/// Sets hold their members sorted and deduplicated, so structural equality
/// is extensional equality. Functions hold their domain members and their
/// graph sorted by argument. `Cyc` is the handle of a named entry that lies
/// on a reference cycle; it is equal only to the same handle.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    Cyc(String),
    SetV(Vec<Value>),
    FnV { dom: Vec<Value>, graph: Vec<(Value, Value)> },
}

impl Value {
    /// A set value with normalized (sorted, deduplicated) members.
    pub fn set(mut members: Vec<Value>) -> Value {
        members.sort();
        members.dedup();
        Value::SetV(members)
    }

    /// The empty-domain function.
    pub fn inactive_fn() -> Value {
        Value::FnV { dom: Vec::new(), graph: Vec::new() }
    }

    /// The tower numeral: 0 is the empty set, n+1 the singleton of n.
    pub fn tower(n: u64) -> Value {
        let mut v = Value::SetV(Vec::new());
        for _ in 0..n {
            v = Value::SetV(vec![v]);
        }
        v
    }

    /// Is this a tower numeral (a chain of singletons ending in the empty
    /// set)?
    pub fn is_tower(&self) -> bool {
        match self {
            Value::SetV(ms) if ms.is_empty() => true,
            Value::SetV(ms) if ms.len() == 1 => ms[0].is_tower(),
            _ => false,
        }
    }

    /// Set-theoretic rank; functions and cycle handles count like their
    /// components for size estimation.
    pub fn rank(&self) -> u32 {
        match self {
            Value::Cyc(_) => 0,
            Value::SetV(ms) => 1 + ms.iter().map(Value::rank).max().unwrap_or(0),
            Value::FnV { dom, graph } => {
                let d = dom.iter().map(Value::rank).max().unwrap_or(0);
                let g = graph
                    .iter()
                    .map(|(a, b)| a.rank().max(b.rank()))
                    .max()
                    .unwrap_or(0);
                1 + d.max(g)
            }
        }
    }
}

/// Errors from universe parsing, construction, or semantic checking.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("universe error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown entry `{0}`")]
    UnknownName(String),
    #[error("name `{0}` is already taken")]
    NameTaken(String),
    #[error("function `{0}` must define exactly one image for each domain member")]
    NotFunctional(String),
    #[error("entries `{first}` and `{second}` denote the same value")]
    DuplicateValue { first: String, second: String },
    #[error("formula has free variables: {0}")]
    FreeVariables(String),
    #[error("universe too large: {0}")]
    TooLarge(String),
    #[error("entry `{0}` is not a set")]
    NotASet(String),
    #[error("formula error: {0}")]
    Formula(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

fn perr(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::Parse { line: line + 1, message: message.into() }
}

const NUMERAL_CAP: u64 = 64;

/// A member, domain, or graph token in a `.tfu` file.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Name(String),
    Tower(u64),
}

impl Token {
    fn parse(tok: &str, line: usize) -> Result<Token, ModelError> {
        if tok == "empty" {
            return Ok(Token::Tower(0));
        }
        if tok.chars().all(|c| c.is_ascii_digit()) {
            let n: u64 = tok
                .parse()
                .map_err(|_| perr(line, format!("invalid numeral `{tok}`")))?;
            if n > NUMERAL_CAP {
                return Err(perr(line, format!("numeral `{n}` exceeds the cap {NUMERAL_CAP}")));
            }
            return Ok(Token::Tower(n));
        }
        if is_valid_name(tok) {
            return Ok(Token::Name(tok.to_string()));
        }
        Err(perr(line, format!("invalid token `{tok}`")))
    }

    fn text(&self) -> String {
        match self {
            Token::Name(n) => n.clone(),
            Token::Tower(0) => "empty".to_string(),
            Token::Tower(n) => n.to_string(),
        }
    }
}

fn is_valid_name(s: &str) -> bool {
    const RESERVED: [&str; 9] =
        ["forall", "exists", "not", "and", "or", "in", "sub", "iota", "omega"];
    !s.is_empty()
        && s.chars().next().unwrap().is_ascii_alphabetic()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED.contains(&s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum RawBody {
    Set(Vec<Token>),
    Fn { dom: Token, graph: Vec<(Token, Token)> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct RawEntry {
    name: String,
    body: RawBody,
}

/// Whether a named entry denotes a set or a function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Set,
    Fn,
}

/// A finite universe of named sets and functions.
#[derive(Debug, Clone)]
pub struct Universe {
    raw: Vec<RawEntry>,
    order: Vec<String>,
    kinds: BTreeMap<String, EntryKind>,
    reprs: BTreeMap<String, Value>,
    /// One-level unfoldings of the entries on reference cycles.
    unfolds: BTreeMap<String, Value>,
    /// Reverse index of the unfoldings, for canonicalizing built values.
    unfold_index: BTreeMap<Value, String>,
    carrier: Vec<Value>,
    omega: Value,
    reg: Registry,
}

/// Parses a `.tfu` universe description.
///
/// ```text
/// # comment
/// set X { 0 1 }
/// fn swap dom X { 0 -> 1 ; 1 -> 0 }
/// ```
///
/// Member, domain, and graph tokens are entry names, numerals (towers), or
/// `empty`. A function's graph must define exactly one image for each member
/// of its domain. Two entries may not denote the same value.
pub fn parse_tfu(src: &str) -> Result<Universe, ModelError> {
    let mut raw = Vec::new();
    let mut names = BTreeSet::new();
    for (lineno, line_raw) in src.lines().enumerate() {
        let line = match line_raw.find('#') {
            Some(k) => &line_raw[..k],
            None => line_raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let entry = if let Some(rest) = line.strip_prefix("set ") {
            let (name, members_text) = brace_block(rest, lineno)?;
            let mut members = Vec::new();
            for tok in members_text.split_whitespace() {
                members.push(Token::parse(tok, lineno)?);
            }
            RawEntry { name, body: RawBody::Set(members) }
        } else if let Some(rest) = line.strip_prefix("fn ") {
            let (head, graph_text) = brace_block(rest, lineno)?;
            let (name, dom_text) = head
                .split_once(" dom ")
                .map(|(n, d)| (n.trim().to_string(), d.trim().to_string()))
                .ok_or_else(|| perr(lineno, "expected `fn <name> dom <token> { ... }`"))?;
            let dom = Token::parse(&dom_text, lineno)?;
            let mut graph = Vec::new();
            for pair in graph_text.split(';') {
                let pair = pair.trim();
                if pair.is_empty() {
                    continue;
                }
                let (a, b) = pair
                    .split_once("->")
                    .ok_or_else(|| perr(lineno, format!("expected `a -> b`, found `{pair}`")))?;
                graph.push((
                    Token::parse(a.trim(), lineno)?,
                    Token::parse(b.trim(), lineno)?,
                ));
            }
            RawEntry { name, body: RawBody::Fn { dom, graph } }
        } else {
            return Err(perr(lineno, format!("expected `set` or `fn`, found `{line}`")));
        };
        if !is_valid_name(&entry.name) {
            return Err(perr(lineno, format!("invalid entry name `{}`", entry.name)));
        }
        if !names.insert(entry.name.clone()) {
            return Err(ModelError::NameTaken(entry.name));
        }
        raw.push(entry);
    }
    build_from_raw(raw)
}

/// Splits `<name> { body }`, returning the trimmed head before the brace and
/// the brace contents.
fn brace_block(rest: &str, lineno: usize) -> Result<(String, String), ModelError> {
    let open = rest
        .find('{')
        .ok_or_else(|| perr(lineno, "expected `{`"))?;
    let close = rest
        .rfind('}')
        .ok_or_else(|| perr(lineno, "unclosed `{`"))?;
    if close < open {
        return Err(perr(lineno, "unclosed `{`"));
    }
    Ok((
        rest[..open].trim().to_string(),
        rest[open + 1..close].trim().to_string(),
    ))
}

fn build_from_raw(raw: Vec<RawEntry>) -> Result<Universe, ModelError> {
    let order: Vec<String> = raw.iter().map(|e| e.name.clone()).collect();
    let by_name: BTreeMap<String, &RawEntry> =
        raw.iter().map(|e| (e.name.clone(), e)).collect();

    // Direct name references of each entry.
    let refs = |name: &str| -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |t: &Token| {
            if let Token::Name(n) = t {
                out.push(n.clone());
            }
        };
        match &by_name[name].body {
            RawBody::Set(members) => members.iter().for_each(&mut push),
            RawBody::Fn { dom, graph } => {
                push(dom);
                for (a, b) in graph {
                    push(a);
                    push(b);
                }
            }
        }
        out
    };

    // Validate references.
    for e in &raw {
        for r in refs(&e.name) {
            if !by_name.contains_key(&r) {
                return Err(ModelError::UnknownName(r));
            }
        }
    }

    // An entry is cyclic when it can reach itself through references.
    let mut cyclic: BTreeSet<String> = BTreeSet::new();
    for e in &raw {
        let mut seen = BTreeSet::new();
        let mut work = refs(&e.name);
        let mut found = false;
        while let Some(n) = work.pop() {
            if n == e.name {
                found = true;
                break;
            }
            if seen.insert(n.clone()) {
                work.extend(refs(&n));
            }
        }
        if found {
            cyclic.insert(e.name.clone());
        }
    }

    // Resolve representatives: cyclic entries become handles, the rest are
    // built bottom-up (the non-cyclic reference subgraph is acyclic).
    fn resolve(
        name: &str,
        by_name: &BTreeMap<String, &RawEntry>,
        cyclic: &BTreeSet<String>,
        memo: &mut BTreeMap<String, Value>,
    ) -> Result<Value, ModelError> {
        if cyclic.contains(name) {
            return Ok(Value::Cyc(name.to_string()));
        }
        if let Some(v) = memo.get(name) {
            return Ok(v.clone());
        }
        let v = build_body(&by_name[name].body, name, by_name, cyclic, memo)?;
        memo.insert(name.to_string(), v.clone());
        Ok(v)
    }

    fn token_value(
        t: &Token,
        by_name: &BTreeMap<String, &RawEntry>,
        cyclic: &BTreeSet<String>,
        memo: &mut BTreeMap<String, Value>,
    ) -> Result<Value, ModelError> {
        match t {
            Token::Tower(n) => Ok(Value::tower(*n)),
            Token::Name(n) => resolve(n, by_name, cyclic, memo),
        }
    }

    fn build_body(
        body: &RawBody,
        name: &str,
        by_name: &BTreeMap<String, &RawEntry>,
        cyclic: &BTreeSet<String>,
        memo: &mut BTreeMap<String, Value>,
    ) -> Result<Value, ModelError> {
        match body {
            RawBody::Set(members) => {
                let mut out = Vec::new();
                for m in members {
                    out.push(token_value(m, by_name, cyclic, memo)?);
                }
                Ok(Value::set(out))
            }
            RawBody::Fn { dom, graph } => {
                let dom_v = token_value(dom, by_name, cyclic, memo)?;
                let dom_members = match &dom_v {
                    Value::SetV(ms) => ms.clone(),
                    Value::Cyc(n) => match &by_name[n.as_str()].body {
                        RawBody::Set(members) => {
                            let mut out = Vec::new();
                            for m in members {
                                out.push(token_value(m, by_name, cyclic, memo)?);
                            }
                            out.sort();
                            out.dedup();
                            out
                        }
                        RawBody::Fn { .. } => {
                            return Err(ModelError::NotASet(n.clone()));
                        }
                    },
                    _ => return Err(ModelError::NotASet(name.to_string())),
                };
                let mut pairs = Vec::new();
                for (a, b) in graph {
                    pairs.push((
                        token_value(a, by_name, cyclic, memo)?,
                        token_value(b, by_name, cyclic, memo)?,
                    ));
                }
                pairs.sort();
                pairs.dedup();
                let args: Vec<&Value> = pairs.iter().map(|(a, _)| a).collect();
                let mut sorted_args: Vec<Value> = args.iter().map(|a| (*a).clone()).collect();
                sorted_args.dedup();
                if sorted_args.len() != pairs.len() || sorted_args != dom_members {
                    return Err(ModelError::NotFunctional(name.to_string()));
                }
                Ok(Value::FnV { dom: dom_members, graph: pairs })
            }
        }
    }

    let mut memo = BTreeMap::new();
    let mut reprs = BTreeMap::new();
    let mut unfolds = BTreeMap::new();
    let mut kinds = BTreeMap::new();
    for e in &raw {
        kinds.insert(
            e.name.clone(),
            match e.body {
                RawBody::Set(_) => EntryKind::Set,
                RawBody::Fn { .. } => EntryKind::Fn,
            },
        );
        reprs.insert(e.name.clone(), resolve(&e.name, &by_name, &cyclic, &mut memo)?);
        if cyclic.contains(&e.name) {
            let unfolded = build_body(&e.body, &e.name, &by_name, &cyclic, &mut memo)?;
            unfolds.insert(e.name.clone(), unfolded);
        }
    }
    let mut unfold_index = BTreeMap::new();
    for (n, v) in &unfolds {
        unfold_index.insert(v.clone(), n.clone());
    }

    // No two entries (or an entry and a builtin) may denote the same value:
    // equality is structural, so aliases would be indistinguishable, and a
    // structural value must not coincide with a cycle unfolding.
    let mut identity_forms: Vec<(String, Value)> = vec![
        ("empty".to_string(), Value::SetV(Vec::new())),
        ("id_empty".to_string(), Value::inactive_fn()),
    ];
    for e in &raw {
        let form = if cyclic.contains(&e.name) {
            unfolds[&e.name].clone()
        } else {
            reprs[&e.name].clone()
        };
        identity_forms.push((e.name.clone(), form));
    }
    for i in 0..identity_forms.len() {
        for j in i + 1..identity_forms.len() {
            if identity_forms[i].1 == identity_forms[j].1 {
                return Err(ModelError::DuplicateValue {
                    first: identity_forms[i].0.clone(),
                    second: identity_forms[j].0.clone(),
                });
            }
        }
    }

    // Registry for parsing formulas over this universe.
    let mut reg = Registry::builtin();
    for e in &raw {
        let kind = match &e.body {
            RawBody::Set(_) => ConstKind::Set { extension: None },
            RawBody::Fn { dom, .. } => ConstKind::Fn { domain: token_term(dom) },
        };
        if !reg.insert(&e.name, kind) {
            return Err(ModelError::NameTaken(e.name.clone()));
        }
    }

    // Carrier: hereditary closure of the entry values plus the builtins.
    // Every function also contributes its domain and image as sets, so
    // existential codomains can be found.
    let canon = |v: Value| -> Value {
        match unfold_index.get(&v) {
            Some(n) => Value::Cyc(n.clone()),
            None => v,
        }
    };
    let deref = |v: &Value| -> Value {
        match v {
            Value::Cyc(n) => unfolds[n.as_str()].clone(),
            other => other.clone(),
        }
    };
    let mut carrier_set: BTreeSet<Value> = BTreeSet::new();
    let mut work: Vec<Value> = vec![Value::SetV(Vec::new()), Value::inactive_fn()];
    work.extend(reprs.values().cloned());
    while let Some(v) = work.pop() {
        if !carrier_set.insert(v.clone()) {
            continue;
        }
        match deref(&v) {
            Value::SetV(ms) => work.extend(ms),
            Value::FnV { dom, graph } => {
                let images: Vec<Value> = graph.iter().map(|(_, b)| b.clone()).collect();
                work.push(canon(Value::set(dom.clone())));
                work.push(canon(Value::set(images.clone())));
                work.extend(dom);
                for (a, b) in graph {
                    work.push(a);
                    work.push(b);
                }
            }
            Value::Cyc(_) => unreachable!("unfoldings are structural"),
        }
    }
    let carrier: Vec<Value> = carrier_set.into_iter().collect();
    let towers: Vec<Value> = carrier.iter().filter(|v| v.is_tower()).cloned().collect();
    let omega = Value::set(towers);

    Ok(Universe {
        raw,
        order,
        kinds,
        reprs,
        unfolds,
        unfold_index,
        carrier,
        omega,
        reg,
    })
}

fn token_term(t: &Token) -> Term {
    match t {
        Token::Name(n) => Term::Constant(n.clone()),
        Token::Tower(n) => {
            let mut t = Term::Constant("empty".to_string());
            for _ in 0..*n {
                t = Term::Singleton(Box::new(t));
            }
            t
        }
    }
}

impl Universe {
    /// A registry containing the builtins and this universe's entries, for
    /// parsing formulas that mention them.
    pub fn registry(&self) -> Registry {
        self.reg.clone()
    }

    /// Entry names in declaration order.
    pub fn entry_names(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    /// Whether the named entry is a set or a function.
    pub fn kind(&self, name: &str) -> Option<EntryKind> {
        self.kinds.get(name).copied()
    }

    /// The value of a named entry (its handle if the entry is cyclic).
    pub fn value(&self, name: &str) -> Option<&Value> {
        self.reprs.get(name)
    }

    /// All carrier values (the hereditary closure of the entries).
    pub fn carrier(&self) -> &[Value] {
        &self.carrier
    }

    /// The finite stand-in for `omega`: the set of all tower numerals that
    /// occur in the carrier.
    pub fn omega_value(&self) -> &Value {
        &self.omega
    }

    /// Regenerates the `.tfu` text of this universe.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.raw {
            match &e.body {
                RawBody::Set(members) => {
                    let toks: Vec<String> = members.iter().map(Token::text).collect();
                    out.push_str(&format!("set {} {{ {} }}\n", e.name, toks.join(" ")));
                }
                RawBody::Fn { dom, graph } => {
                    let pairs: Vec<String> = graph
                        .iter()
                        .map(|(a, b)| format!("{} -> {}", a.text(), b.text()))
                        .collect();
                    out.push_str(&format!(
                        "fn {} dom {} {{ {} }}\n",
                        e.name,
                        dom.text(),
                        pairs.join(" ; ")
                    ));
                }
            }
        }
        out
    }

    /// The universe obtained by deleting the named entries. Remaining
    /// references to a deleted entry are an error.
    pub fn without(&self, names: &[&str]) -> Result<Universe, ModelError> {
        for n in names {
            if !self.kinds.contains_key(*n) {
                return Err(ModelError::UnknownName((*n).to_string()));
            }
        }
        let kept: Vec<RawEntry> = self
            .raw
            .iter()
            .filter(|e| !names.contains(&e.name.as_str()))
            .cloned()
            .collect();
        build_from_raw(kept)
    }

    /// Replaces a built value by the handle of the cyclic entry it unfolds.
    fn canon(&self, v: Value) -> Value {
        match self.unfold_index.get(&v) {
            Some(n) => Value::Cyc(n.clone()),
            None => v,
        }
    }

    /// One structural level of a value (unfolds cycle handles).
    fn deref<'a>(&'a self, v: &'a Value) -> &'a Value {
        match v {
            Value::Cyc(n) => &self.unfolds[n.as_str()],
            other => other,
        }
    }

    fn members<'a>(&'a self, v: &'a Value) -> Option<&'a [Value]> {
        match self.deref(v) {
            Value::SetV(ms) => Some(ms),
            _ => None,
        }
    }

    fn members_or_empty<'a>(&'a self, v: &'a Value) -> &'a [Value] {
        self.members(v).unwrap_or(&[])
    }

    /// All carrier functions whose domain members are exactly `dom`.
    fn fns_with_dom(&self, dom: &[Value]) -> Vec<Value> {
        self.carrier
            .iter()
            .filter(|v| matches!(self.deref(v), Value::FnV { dom: d, .. } if d == dom))
            .cloned()
            .collect()
    }

    fn sentence_gate(&self, f: &Formula) -> Result<(), ModelError> {
        let occ = occurrences(f);
        if !occ.free.is_empty() {
            return Err(ModelError::FreeVariables(
                occ.free.into_iter().collect::<Vec<_>>().join(", "),
            ));
        }
        Ok(())
    }

    /// Environment-based evaluation of a sentence.
    pub fn eval_sentence(&self, f: &Formula) -> Result<bool, ModelError> {
        self.sentence_gate(f)?;
        let mut ev = Evaluator { uni: self, env: Vec::new() };
        Ok(ev.eval(f))
    }

    /// Clause-based evaluation of a sentence by constant substitution; an
    /// independent oracle for [`Universe::eval_sentence`].
    pub fn check_validity(&self, f: &Formula) -> Result<bool, ModelError> {
        self.sentence_gate(f)?;
        let v = Validity::new(self);
        Ok(v.walk(f))
    }
}

// ----- shared atomic semantics -----

fn eq_truth(a: &Value, b: &Value) -> bool {
    a == b
}

fn mem_truth(uni: &Universe, a: &Value, b: &Value) -> bool {
    match uni.deref(b) {
        Value::SetV(ms) => ms.contains(a),
        _ => false,
    }
}

fn surj_truth(uni: &Universe, f: &Value, x: &Value, y: &Value) -> bool {
    let Value::FnV { dom, graph } = uni.deref(f) else {
        return false;
    };
    let Some(xm) = uni.members(x) else {
        return false;
    };
    let Some(ym) = uni.members(y) else {
        return false;
    };
    if dom.as_slice() != xm {
        return false;
    }
    let mut images: Vec<Value> = graph.iter().map(|(_, b)| b.clone()).collect();
    images.sort();
    images.dedup();
    images.as_slice() == ym
}

fn mapsto_truth(uni: &Universe, f: &Value, a: &Value, b: &Value) -> bool {
    match uni.deref(f) {
        Value::FnV { graph, .. } => graph.iter().any(|(x, y)| x == a && y == b),
        _ => false,
    }
}

// ----- environment-based evaluator -----

#[derive(Debug, Clone)]
enum Binding {
    Val(Value),
    Team(BTreeMap<Value, Value>),
}

struct Evaluator<'u> {
    uni: &'u Universe,
    env: Vec<(String, Binding)>,
}

impl<'u> Evaluator<'u> {
    fn lookup(&self, name: &str) -> Option<&Binding> {
        self.env.iter().rev().find(|(n, _)| n == name).map(|(_, b)| b)
    }

    fn eval_term(&mut self, t: &Term) -> Option<Value> {
        match t {
            Term::Constant(c) => match c.as_str() {
                "empty" => Some(Value::SetV(Vec::new())),
                "omega" => Some(self.uni.omega.clone()),
                "id_empty" => Some(Value::inactive_fn()),
                name => self.uni.reprs.get(name).cloned(),
            },
            Term::Var(n, Sort::UrFamily(idx)) => {
                let idx_val = match self.lookup(idx) {
                    Some(Binding::Val(v)) => v.clone(),
                    _ => return None,
                };
                match self.lookup(n) {
                    Some(Binding::Team(team)) => team.get(&idx_val).cloned(),
                    _ => None,
                }
            }
            Term::Var(n, _) => match self.lookup(n) {
                Some(Binding::Val(v)) => Some(v.clone()),
                _ => None,
            },
            Term::Singleton(inner) => {
                let v = self.eval_term(inner)?;
                Some(self.uni.canon(Value::SetV(vec![v])))
            }
            Term::Iota { bound, body } => {
                let candidates: Vec<Value> = self.uni.carrier.to_vec();
                let mut winner = None;
                for cand in candidates {
                    self.env.push((bound.clone(), Binding::Val(cand.clone())));
                    let ok = self.eval(body);
                    self.env.pop();
                    if ok {
                        if winner.is_some() {
                            return None;
                        }
                        winner = Some(cand);
                    }
                }
                winner
            }
        }
    }

    fn candidates(&mut self, sort: &Sort) -> Vec<Value> {
        match sort {
            Sort::ThingVar => self.uni.carrier.to_vec(),
            Sort::SetVar => self
                .uni
                .carrier
                .iter()
                .filter(|v| matches!(self.uni.deref(v), Value::SetV(_)))
                .cloned()
                .collect(),
            Sort::FnOnConstant(dom) => match self.eval_term(dom) {
                Some(dv) => match self.uni.members(&dv) {
                    Some(ms) => self.uni.fns_with_dom(&ms.to_vec()),
                    None => Vec::new(),
                },
                None => Vec::new(),
            },
            Sort::FnComposite(x) => match self.lookup(x).cloned() {
                Some(Binding::Val(dv)) => match self.uni.members(&dv) {
                    Some(ms) => self.uni.fns_with_dom(&ms.to_vec()),
                    None => Vec::new(),
                },
                _ => Vec::new(),
            },
            Sort::UrFamily(_) | Sort::Constant => Vec::new(),
        }
    }

    fn eval(&mut self, f: &Formula) -> bool {
        match f {
            Formula::Eq(a, b) => match (self.eval_term(a), self.eval_term(b)) {
                (Some(va), Some(vb)) => eq_truth(&va, &vb),
                _ => false,
            },
            Formula::Mem(a, b) => match (self.eval_term(a), self.eval_term(b)) {
                (Some(va), Some(vb)) => mem_truth(self.uni, &va, &vb),
                _ => false,
            },
            Formula::Surj(g, x, y) => {
                match (self.eval_term(g), self.eval_term(x), self.eval_term(y)) {
                    (Some(vg), Some(vx), Some(vy)) => surj_truth(self.uni, &vg, &vx, &vy),
                    _ => false,
                }
            }
            Formula::MapsTo(g, a, b) => {
                match (self.eval_term(g), self.eval_term(a), self.eval_term(b)) {
                    (Some(vg), Some(va), Some(vb)) => mapsto_truth(self.uni, &vg, &va, &vb),
                    _ => false,
                }
            }
            Formula::Not(g) => !self.eval(g),
            Formula::And(a, b) => self.eval(a) && self.eval(b),
            Formula::Or(a, b) => self.eval(a) || self.eval(b),
            Formula::Implies(a, b) => !self.eval(a) || self.eval(b),
            Formula::Iff(a, b) => self.eval(a) == self.eval(b),
            Formula::Forall(v, s, body) => {
                let cands = self.candidates(s);
                cands.into_iter().all(|c| {
                    self.env.push((v.clone(), Binding::Val(c)));
                    let r = self.eval(body);
                    self.env.pop();
                    r
                })
            }
            Formula::Exists(v, s, body) => {
                let cands = self.candidates(s);
                cands.into_iter().any(|c| {
                    self.env.push((v.clone(), Binding::Val(c)));
                    let r = self.eval(body);
                    self.env.pop();
                    r
                })
            }
            Formula::MultiForall { base, index: _, range, body } => {
                self.eval_teams(base, range, body, true)
            }
            Formula::MultiExists { base, index: _, range, body } => {
                self.eval_teams(base, range, body, false)
            }
            Formula::BigAnd { index, range, body } => {
                let Some(rv) = self.eval_term(range) else {
                    return false;
                };
                let members = self.uni.members_or_empty(&rv).to_vec();
                members.into_iter().all(|m| {
                    self.env.push((index.clone(), Binding::Val(m)));
                    let r = self.eval(body);
                    self.env.pop();
                    r
                })
            }
            Formula::SchemaHole { .. } => false,
        }
    }

    /// Quantifies over team assignments: one ur-function on each member's
    /// singleton, for every member of the range.
    fn eval_teams(&mut self, base: &str, range: &Term, body: &Formula, forall: bool) -> bool {
        let Some(rv) = self.eval_term(range) else {
            return forall;
        };
        let members = self.uni.members_or_empty(&rv).to_vec();
        if members.is_empty() {
            self.env.push((base.to_string(), Binding::Team(BTreeMap::new())));
            let r = self.eval(body);
            self.env.pop();
            return r;
        }
        let pools: Vec<Vec<Value>> = members
            .iter()
            .map(|m| {
                let single = self.uni.canon(Value::SetV(vec![m.clone()]));
                let ms = self.uni.members_or_empty(&single).to_vec();
                self.uni.fns_with_dom(&ms)
            })
            .collect();
        let mut assignments = pools.into_iter().multi_cartesian_product();
        let check = |ev: &mut Self, choice: Vec<Value>| -> bool {
            let team: BTreeMap<Value, Value> =
                members.iter().cloned().zip(choice).collect();
            ev.env.push((base.to_string(), Binding::Team(team)));
            let r = ev.eval(body);
            ev.env.pop();
            r
        };
        if forall {
            assignments.all(|choice| check(self, choice))
        } else {
            assignments.any(|choice| check(self, choice))
        }
    }
}

// ----- clause-based validity checker -----

struct Validity<'u> {
    uni: &'u Universe,
    /// Every carrier value has exactly one name.
    val_names: BTreeMap<Value, String>,
    name_vals: BTreeMap<String, Value>,
}

impl<'u> Validity<'u> {
    fn new(uni: &'u Universe) -> Self {
        let mut val_names = BTreeMap::new();
        let mut name_vals = BTreeMap::new();
        let mut add = |name: String, v: Value| {
            if !val_names.contains_key(&v) && !name_vals.contains_key(&name) {
                val_names.insert(v.clone(), name.clone());
                name_vals.insert(name, v);
            }
        };
        add("empty".to_string(), Value::SetV(Vec::new()));
        add("id_empty".to_string(), Value::inactive_fn());
        for n in &uni.order {
            add(n.clone(), uni.reprs[n].clone());
        }
        let mut k = 0usize;
        for v in &uni.carrier {
            if !val_names.contains_key(v) {
                loop {
                    let cand = format!("v{k}");
                    k += 1;
                    if !name_vals.contains_key(&cand) {
                        val_names.insert(v.clone(), cand.clone());
                        name_vals.insert(cand, v.clone());
                        break;
                    }
                }
            }
        }
        Validity { uni, val_names, name_vals }
    }

    fn name_of(&self, v: &Value) -> Option<&str> {
        self.val_names.get(v).map(String::as_str)
    }

    fn term_value(&self, t: &Term) -> Option<Value> {
        match t {
            Term::Constant(c) => match c.as_str() {
                "omega" => Some(self.uni.omega.clone()),
                name => self.name_vals.get(name).cloned(),
            },
            Term::Var(..) => None,
            Term::Singleton(inner) => {
                let v = self.term_value(inner)?;
                Some(self.uni.canon(Value::SetV(vec![v])))
            }
            Term::Iota { bound, body } => {
                let mut winner = None;
                for name in self.name_vals.keys() {
                    let inst = subst_const(body, bound, &Sort::ThingVar, name);
                    if self.walk(&inst) {
                        if winner.is_some() {
                            return None;
                        }
                        winner = self.name_vals.get(name).cloned();
                    }
                }
                winner
            }
        }
    }

    fn candidate_names(&self, sort: &Sort) -> Vec<String> {
        let filtered = |pred: &dyn Fn(&Value) -> bool| -> Vec<String> {
            self.val_names
                .iter()
                .filter(|(v, _)| pred(v))
                .map(|(_, n)| n.clone())
                .collect()
        };
        match sort {
            Sort::ThingVar => filtered(&|_| true),
            Sort::SetVar => filtered(&|v| matches!(self.uni.deref(v), Value::SetV(_))),
            Sort::FnOnConstant(dom) => match self.term_value(dom) {
                Some(dv) => match self.uni.members(&dv) {
                    Some(ms) => {
                        let ms = ms.to_vec();
                        filtered(&|v| {
                            matches!(self.uni.deref(v), Value::FnV { dom: d, .. } if *d == ms)
                        })
                    }
                    None => Vec::new(),
                },
                None => Vec::new(),
            },
            Sort::FnComposite(_) | Sort::UrFamily(_) | Sort::Constant => Vec::new(),
        }
    }

    fn walk(&self, f: &Formula) -> bool {
        match f {
            Formula::Eq(a, b) => match (self.term_value(a), self.term_value(b)) {
                (Some(va), Some(vb)) => eq_truth(&va, &vb),
                _ => false,
            },
            Formula::Mem(a, b) => match (self.term_value(a), self.term_value(b)) {
                (Some(va), Some(vb)) => mem_truth(self.uni, &va, &vb),
                _ => false,
            },
            Formula::Surj(g, x, y) => {
                match (self.term_value(g), self.term_value(x), self.term_value(y)) {
                    (Some(vg), Some(vx), Some(vy)) => surj_truth(self.uni, &vg, &vx, &vy),
                    _ => false,
                }
            }
            Formula::MapsTo(g, a, b) => {
                match (self.term_value(g), self.term_value(a), self.term_value(b)) {
                    (Some(vg), Some(va), Some(vb)) => mapsto_truth(self.uni, &vg, &va, &vb),
                    _ => false,
                }
            }
            Formula::Not(g) => !self.walk(g),
            Formula::And(a, b) => self.walk(a) && self.walk(b),
            Formula::Or(a, b) => self.walk(a) || self.walk(b),
            Formula::Implies(a, b) => !self.walk(a) || self.walk(b),
            Formula::Iff(a, b) => self.walk(a) == self.walk(b),
            Formula::Forall(v, s, body) => self
                .candidate_names(s)
                .iter()
                .all(|n| self.walk(&subst_const(body, v, s, n))),
            Formula::Exists(v, s, body) => self
                .candidate_names(s)
                .iter()
                .any(|n| self.walk(&subst_const(body, v, s, n))),
            Formula::MultiForall { base, index, range, body } => {
                self.walk_teams(base, index, range, body, true)
            }
            Formula::MultiExists { base, index, range, body } => {
                self.walk_teams(base, index, range, body, false)
            }
            Formula::BigAnd { index, range, body } => {
                let Some(rv) = self.term_value(range) else {
                    return false;
                };
                let members = self.uni.members_or_empty(&rv).to_vec();
                members.iter().all(|m| match self.name_of(m) {
                    Some(n) => self.walk(&subst_const(body, index, &Sort::ThingVar, n)),
                    None => false,
                })
            }
            Formula::SchemaHole { .. } => false,
        }
    }

    fn walk_teams(
        &self,
        base: &str,
        index: &str,
        range: &Term,
        body: &Formula,
        forall: bool,
    ) -> bool {
        let Some(rv) = self.term_value(range) else {
            return forall;
        };
        let members = self.uni.members_or_empty(&rv).to_vec();
        if members.is_empty() {
            return self.walk(body);
        }
        let mut member_names = Vec::new();
        for m in &members {
            match self.name_of(m) {
                Some(n) => member_names.push(n.to_string()),
                None => return forall,
            }
        }
        let pools: Vec<Vec<String>> = members
            .iter()
            .map(|m| {
                let single = self.uni.canon(Value::SetV(vec![m.clone()]));
                let ms = self.uni.members_or_empty(&single).to_vec();
                self.uni
                    .fns_with_dom(&ms)
                    .iter()
                    .filter_map(|f| self.name_of(f).map(str::to_string))
                    .collect()
            })
            .collect();
        let mut assignments = pools.into_iter().multi_cartesian_product();
        let check = |choice: Vec<String>| -> bool {
            let asg: Vec<(String, String)> =
                member_names.iter().cloned().zip(choice).collect();
            let inst = instantiate_team(body, base, index, &asg);
            self.walk(&inst)
        };
        if forall {
            assignments.all(check)
        } else {
            assignments.any(check)
        }
    }
}

/// Substitutes the constant `name` for the variable `(var, sort)`: plain
/// occurrences are replaced, composite-variable subscripts are rewritten to
/// the constant form, and operator ranges are replaced. The replacement is
/// closed, so no capture can occur; binders of the same variable shadow.
fn subst_const(f: &Formula, var: &str, sort: &Sort, name: &str) -> Formula {
    let c = Term::Constant(name.to_string());

    fn in_term(t: &Term, var: &str, sort: &Sort, c: &Term) -> Term {
        match t {
            Term::Constant(_) => t.clone(),
            Term::Var(n, s) if n == var && s == sort => c.clone(),
            Term::Var(n, Sort::FnComposite(x)) if *sort == Sort::SetVar && x == var => {
                Term::Var(n.clone(), Sort::FnOnConstant(Box::new(c.clone())))
            }
            Term::Var(n, Sort::UrFamily(a)) if *sort == Sort::ThingVar && a == var => {
                Term::Var(
                    n.clone(),
                    Sort::FnOnConstant(Box::new(Term::Singleton(Box::new(c.clone())))),
                )
            }
            Term::Var(n, Sort::FnOnConstant(d)) => Term::Var(
                n.clone(),
                Sort::FnOnConstant(Box::new(in_term(d, var, sort, c))),
            ),
            Term::Var(..) => t.clone(),
            Term::Singleton(inner) => {
                Term::Singleton(Box::new(in_term(inner, var, sort, c)))
            }
            Term::Iota { bound, body } => {
                if bound == var && *sort == Sort::ThingVar {
                    t.clone()
                } else {
                    Term::Iota {
                        bound: bound.clone(),
                        body: Box::new(in_formula(body, var, sort, c)),
                    }
                }
            }
        }
    }

    fn rewrite_binder_sort(s: &Sort, var: &str, sort: &Sort, c: &Term) -> Sort {
        match s {
            Sort::FnComposite(x) if *sort == Sort::SetVar && x == var => {
                Sort::FnOnConstant(Box::new(c.clone()))
            }
            Sort::UrFamily(a) if *sort == Sort::ThingVar && a == var => {
                Sort::FnOnConstant(Box::new(Term::Singleton(Box::new(c.clone()))))
            }
            Sort::FnOnConstant(d) => {
                Sort::FnOnConstant(Box::new(in_term(d, var, sort, c)))
            }
            other => other.clone(),
        }
    }

    fn in_formula(f: &Formula, var: &str, sort: &Sort, c: &Term) -> Formula {
        match f {
            Formula::Eq(a, b) => {
                Formula::Eq(in_term(a, var, sort, c), in_term(b, var, sort, c))
            }
            Formula::Mem(a, b) => {
                Formula::Mem(in_term(a, var, sort, c), in_term(b, var, sort, c))
            }
            Formula::Surj(g, x, y) => Formula::Surj(
                in_term(g, var, sort, c),
                in_term(x, var, sort, c),
                in_term(y, var, sort, c),
            ),
            Formula::MapsTo(g, a, b) => Formula::MapsTo(
                in_term(g, var, sort, c),
                in_term(a, var, sort, c),
                in_term(b, var, sort, c),
            ),
            Formula::Not(g) => Formula::Not(Box::new(in_formula(g, var, sort, c))),
            Formula::And(a, b) => Formula::And(
                Box::new(in_formula(a, var, sort, c)),
                Box::new(in_formula(b, var, sort, c)),
            ),
            Formula::Or(a, b) => Formula::Or(
                Box::new(in_formula(a, var, sort, c)),
                Box::new(in_formula(b, var, sort, c)),
            ),
            Formula::Implies(a, b) => Formula::Implies(
                Box::new(in_formula(a, var, sort, c)),
                Box::new(in_formula(b, var, sort, c)),
            ),
            Formula::Iff(a, b) => Formula::Iff(
                Box::new(in_formula(a, var, sort, c)),
                Box::new(in_formula(b, var, sort, c)),
            ),
            Formula::Forall(v, s, body) => {
                let s2 = rewrite_binder_sort(s, var, sort, c);
                if v == var && s == sort {
                    Formula::Forall(v.clone(), s2, body.clone())
                } else {
                    Formula::Forall(v.clone(), s2, Box::new(in_formula(body, var, sort, c)))
                }
            }
            Formula::Exists(v, s, body) => {
                let s2 = rewrite_binder_sort(s, var, sort, c);
                if v == var && s == sort {
                    Formula::Exists(v.clone(), s2, body.clone())
                } else {
                    Formula::Exists(v.clone(), s2, Box::new(in_formula(body, var, sort, c)))
                }
            }
            Formula::MultiForall { base, index, range, body } => {
                let range2 = in_term(range, var, sort, c);
                let body2 = if index == var && *sort == Sort::ThingVar {
                    body.clone()
                } else {
                    Box::new(in_formula(body, var, sort, c))
                };
                Formula::MultiForall {
                    base: base.clone(),
                    index: index.clone(),
                    range: range2,
                    body: body2,
                }
            }
            Formula::MultiExists { base, index, range, body } => {
                let range2 = in_term(range, var, sort, c);
                let body2 = if index == var && *sort == Sort::ThingVar {
                    body.clone()
                } else {
                    Box::new(in_formula(body, var, sort, c))
                };
                Formula::MultiExists {
                    base: base.clone(),
                    index: index.clone(),
                    range: range2,
                    body: body2,
                }
            }
            Formula::BigAnd { index, range, body } => {
                let range2 = in_term(range, var, sort, c);
                let body2 = if index == var && *sort == Sort::ThingVar {
                    body.clone()
                } else {
                    Box::new(in_formula(body, var, sort, c))
                };
                Formula::BigAnd { index: index.clone(), range: range2, body: body2 }
            }
            Formula::SchemaHole { name, args } => Formula::SchemaHole {
                name: name.clone(),
                args: args.iter().map(|a| in_term(a, var, sort, c)).collect(),
            },
        }
    }

    in_formula(f, var, sort, &c)
}

/// Instantiates a team inside a multiple-quantifier body: conjunctor
/// formulas over the index are expanded member by member, and the family
/// variable at each member is replaced by the assigned function constant.
fn instantiate_team(
    f: &Formula,
    base: &str,
    index: &str,
    asg: &[(String, String)],
) -> Formula {
    match f {
        Formula::BigAnd { index: i, range: _, body } if i == index => {
            let mut parts = Vec::new();
            for (member_name, fn_name) in asg {
                let inst = subst_const(body, index, &Sort::ThingVar, member_name);
                let pat = Term::Var(
                    base.to_string(),
                    Sort::FnOnConstant(Box::new(Term::Singleton(Box::new(Term::Constant(
                        member_name.clone(),
                    ))))),
                );
                parts.push(replace_term(&inst, &pat, &Term::Constant(fn_name.clone())));
            }
            let mut out = parts
                .pop()
                .unwrap_or(Formula::Eq(
                    Term::Constant("empty".into()),
                    Term::Constant("empty".into()),
                ));
            while let Some(p) = parts.pop() {
                out = Formula::And(Box::new(p), Box::new(out));
            }
            out
        }
        Formula::Not(g) => {
            Formula::Not(Box::new(instantiate_team(g, base, index, asg)))
        }
        Formula::And(a, b) => Formula::And(
            Box::new(instantiate_team(a, base, index, asg)),
            Box::new(instantiate_team(b, base, index, asg)),
        ),
        Formula::Or(a, b) => Formula::Or(
            Box::new(instantiate_team(a, base, index, asg)),
            Box::new(instantiate_team(b, base, index, asg)),
        ),
        Formula::Implies(a, b) => Formula::Implies(
            Box::new(instantiate_team(a, base, index, asg)),
            Box::new(instantiate_team(b, base, index, asg)),
        ),
        Formula::Iff(a, b) => Formula::Iff(
            Box::new(instantiate_team(a, base, index, asg)),
            Box::new(instantiate_team(b, base, index, asg)),
        ),
        Formula::Forall(v, s, body) => Formula::Forall(
            v.clone(),
            s.clone(),
            Box::new(instantiate_team(body, base, index, asg)),
        ),
        Formula::Exists(v, s, body) => Formula::Exists(
            v.clone(),
            s.clone(),
            Box::new(instantiate_team(body, base, index, asg)),
        ),
        other => other.clone(),
    }
}

/// Structural replacement of an exact term by another, in term positions.
fn replace_term(f: &Formula, pat: &Term, rep: &Term) -> Formula {
    fn in_term(t: &Term, pat: &Term, rep: &Term) -> Term {
        if t == pat {
            return rep.clone();
        }
        match t {
            Term::Singleton(inner) => Term::Singleton(Box::new(in_term(inner, pat, rep))),
            Term::Iota { bound, body } => Term::Iota {
                bound: bound.clone(),
                body: Box::new(walk(body, pat, rep)),
            },
            other => other.clone(),
        }
    }
    fn walk(f: &Formula, pat: &Term, rep: &Term) -> Formula {
        match f {
            Formula::Eq(a, b) => Formula::Eq(in_term(a, pat, rep), in_term(b, pat, rep)),
            Formula::Mem(a, b) => Formula::Mem(in_term(a, pat, rep), in_term(b, pat, rep)),
            Formula::Surj(g, x, y) => Formula::Surj(
                in_term(g, pat, rep),
                in_term(x, pat, rep),
                in_term(y, pat, rep),
            ),
            Formula::MapsTo(g, a, b) => Formula::MapsTo(
                in_term(g, pat, rep),
                in_term(a, pat, rep),
                in_term(b, pat, rep),
            ),
            Formula::Not(g) => Formula::Not(Box::new(walk(g, pat, rep))),
            Formula::And(a, b) => {
                Formula::And(Box::new(walk(a, pat, rep)), Box::new(walk(b, pat, rep)))
            }
            Formula::Or(a, b) => {
                Formula::Or(Box::new(walk(a, pat, rep)), Box::new(walk(b, pat, rep)))
            }
            Formula::Implies(a, b) => {
                Formula::Implies(Box::new(walk(a, pat, rep)), Box::new(walk(b, pat, rep)))
            }
            Formula::Iff(a, b) => {
                Formula::Iff(Box::new(walk(a, pat, rep)), Box::new(walk(b, pat, rep)))
            }
            Formula::Forall(v, s, body) => {
                Formula::Forall(v.clone(), s.clone(), Box::new(walk(body, pat, rep)))
            }
            Formula::Exists(v, s, body) => {
                Formula::Exists(v.clone(), s.clone(), Box::new(walk(body, pat, rep)))
            }
            Formula::MultiForall { base, index, range, body } => Formula::MultiForall {
                base: base.clone(),
                index: index.clone(),
                range: in_term(range, pat, rep),
                body: Box::new(walk(body, pat, rep)),
            },
            Formula::MultiExists { base, index, range, body } => Formula::MultiExists {
                base: base.clone(),
                index: index.clone(),
                range: in_term(range, pat, rep),
                body: Box::new(walk(body, pat, rep)),
            },
            Formula::BigAnd { index, range, body } => Formula::BigAnd {
                index: index.clone(),
                range: in_term(range, pat, rep),
                body: Box::new(walk(body, pat, rep)),
            },
            Formula::SchemaHole { name, args } => Formula::SchemaHole {
                name: name.clone(),
                args: args.iter().map(|a| in_term(a, pat, rep)).collect(),
            },
        }
    }
    walk(f, pat, rep)
}

// ----- audits and derived constructions -----

/// Evaluates every axiom in the universe. The infinity axiom can never hold
/// in a finite universe; its entry is expected to read `false`.
pub fn audit_axioms(uni: &Universe) -> Result<Vec<(AxiomId, bool)>, ModelError> {
    AxiomId::ALL
        .iter()
        .map(|&id| Ok((id, uni.eval_sentence(crate::theory::axiom(id))?)))
        .collect()
}

/// How [`build_universe`] populates functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FnMode {
    /// Sets only (plus the builtin inactive function).
    None,
    /// Every total function from each set into the generated sets.
    AllTotal,
}

/// Builds the universe of all hereditarily finite sets of rank at most
/// `max_rank`, optionally with every total function between them.
pub fn build_universe(max_rank: u32, fn_mode: FnMode) -> Result<Universe, ModelError> {
    if max_rank > 3 {
        return Err(ModelError::TooLarge(format!(
            "rank {max_rank} generates too many sets (cap is 3)"
        )));
    }
    let mut sets: Vec<Value> = vec![Value::SetV(Vec::new())];
    for _ in 0..max_rank {
        let prev = sets.clone();
        let mut next = BTreeSet::new();
        for v in &prev {
            next.insert(v.clone());
        }
        // All subsets of the previous level.
        for mask in 0u32..(1 << prev.len()) {
            let members: Vec<Value> = prev
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, v)| v.clone())
                .collect();
            next.insert(Value::set(members));
        }
        sets = next.into_iter().collect();
    }
    let set_name = |v: &Value, sets: &[Value]| -> String {
        let i = sets.iter().position(|s| s == v).expect("member is generated");
        format!("s{i}")
    };
    let token_for = |v: &Value, sets: &[Value]| -> String {
        if v == &Value::SetV(Vec::new()) {
            "empty".to_string()
        } else {
            set_name(v, sets)
        }
    };
    let mut text = String::new();
    for (i, v) in sets.iter().enumerate() {
        let Value::SetV(ms) = v else { unreachable!() };
        if ms.is_empty() {
            continue; // the empty set is the builtin `empty`
        }
        let toks: Vec<String> = ms.iter().map(|m| token_for(m, &sets)).collect();
        text.push_str(&format!("set s{i} {{ {} }}\n", toks.join(" ")));
    }
    if fn_mode == FnMode::AllTotal {
        let mut count = 0usize;
        let mut fi = 0usize;
        for dom in &sets {
            let Value::SetV(ms) = dom else { unreachable!() };
            if ms.is_empty() {
                continue; // the only total function on `empty` is `id_empty`
            }
            let pools: Vec<Vec<Value>> = ms.iter().map(|_| sets.clone()).collect();
            for images in pools.into_iter().multi_cartesian_product() {
                count += 1;
                if count > 10_000 {
                    return Err(ModelError::TooLarge(
                        "more than 10000 generated functions".to_string(),
                    ));
                }
                let pairs: Vec<String> = ms
                    .iter()
                    .zip(&images)
                    .map(|(a, b)| {
                        format!("{} -> {}", token_for(a, &sets), token_for(b, &sets))
                    })
                    .collect();
                text.push_str(&format!(
                    "fn f{fi} dom {} {{ {} }}\n",
                    token_for(dom, &sets),
                    pairs.join(" ; ")
                ));
                fi += 1;
            }
        }
    }
    parse_tfu(&text)
}

/// Results of checking the category structure of a universe: objects are
/// the declared sets plus the empty set, morphisms the declared functions
/// plus the inactive function, composition is function composition where
/// the image fits the next domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryReport {
    pub objects: usize,
    pub morphisms: usize,
    pub composition_closed: bool,
    pub identities_present: bool,
    pub identity_laws: bool,
    pub associativity: bool,
}

fn fn_parts<'a>(uni: &'a Universe, v: &'a Value) -> Option<(&'a [Value], &'a [(Value, Value)])> {
    match uni.deref(v) {
        Value::FnV { dom, graph } => Some((dom, graph)),
        _ => None,
    }
}

fn image_of(graph: &[(Value, Value)]) -> Vec<Value> {
    let mut im: Vec<Value> = graph.iter().map(|(_, b)| b.clone()).collect();
    im.sort();
    im.dedup();
    im
}

/// `g` after `f`: defined when every image of `f` lies in the domain of `g`.
fn compose(uni: &Universe, g: &Value, f: &Value) -> Option<Value> {
    let (fdom, fgraph) = fn_parts(uni, f)?;
    let (gdom, ggraph) = fn_parts(uni, g)?;
    for b in image_of(fgraph) {
        if !gdom.contains(&b) {
            return None;
        }
    }
    let mut pairs = Vec::new();
    for (a, b) in fgraph {
        let c = ggraph
            .iter()
            .find(|(x, _)| x == b)
            .map(|(_, y)| y.clone())?;
        pairs.push((a.clone(), c));
    }
    pairs.sort();
    Some(uni.canon(Value::FnV { dom: fdom.to_vec(), graph: pairs }))
}

/// Checks the category laws over the declared entries.
pub fn check_category_laws(uni: &Universe) -> CategoryReport {
    let empty_set = Value::SetV(Vec::new());
    let inactive = Value::inactive_fn();
    let mut objects: Vec<&Value> = vec![&empty_set];
    let mut morphisms: Vec<&Value> = vec![&inactive];
    for name in &uni.order {
        let v = &uni.reprs[name];
        match uni.kinds[name] {
            EntryKind::Set => objects.push(v),
            EntryKind::Fn => morphisms.push(v),
        }
    }

    let mut composition_closed = true;
    let mut composites: Vec<(usize, usize, Value)> = Vec::new();
    for (i, f) in morphisms.iter().enumerate() {
        for (j, g) in morphisms.iter().enumerate() {
            if let Some(gf) = compose(uni, g, f) {
                if !morphisms.iter().any(|m| **m == gf) {
                    composition_closed = false;
                }
                composites.push((j, i, gf));
            }
        }
    }

    let identity_on = |x: &Value| -> Option<Value> {
        let ms = uni.members(x)?;
        let graph: Vec<(Value, Value)> = ms.iter().map(|m| (m.clone(), m.clone())).collect();
        Some(uni.canon(Value::FnV { dom: ms.to_vec(), graph }))
    };
    let mut identities_present = true;
    for x in &objects {
        match identity_on(x) {
            Some(idx) => {
                if !morphisms.iter().any(|m| **m == idx) {
                    identities_present = false;
                }
            }
            None => identities_present = false,
        }
    }

    let mut identity_laws = true;
    for f in &morphisms {
        let Some((fdom, fgraph)) = fn_parts(uni, f) else { continue };
        let dom_set = uni.canon(Value::set(fdom.to_vec()));
        let im_set = uni.canon(Value::set(image_of(fgraph)));
        if let Some(id_dom) = identity_on(&dom_set) {
            if compose(uni, f, &id_dom).as_ref() != Some(*f) {
                identity_laws = false;
            }
        }
        if let Some(id_im) = identity_on(&im_set) {
            if compose(uni, &id_im, f).as_ref() != Some(*f) {
                identity_laws = false;
            }
        }
    }

    // Associativity is asserted over composable triples: when both g after f
    // and h after g are defined, so are both bracketings, and they must
    // agree.
    let mut associativity = true;
    'outer: for f in &morphisms {
        for g in &morphisms {
            let Some(gf) = compose(uni, g, f) else { continue };
            for h in &morphisms {
                let Some(hg) = compose(uni, h, g) else { continue };
                let left = compose(uni, h, &gf);
                let right = compose(uni, &hg, f);
                if left.is_none() || left != right {
                    associativity = false;
                    break 'outer;
                }
            }
        }
    }

    CategoryReport {
        objects: objects.len(),
        morphisms: morphisms.len(),
        composition_closed,
        identities_present,
        identity_laws,
        associativity,
    }
}

/// For each function on the named set, the subset of the set it fixes
/// pointwise. A team marking membership (member maps to itself, non-member
/// to an outside marker) encodes a subset this way, so a deleted subset can
/// be recovered from its sum function.
pub fn encoded_subsets(
    uni: &Universe,
    set_name: &str,
) -> Result<Vec<(String, Value)>, ModelError> {
    let x = uni
        .value(set_name)
        .ok_or_else(|| ModelError::UnknownName(set_name.to_string()))?;
    let members = uni
        .members(x)
        .ok_or_else(|| ModelError::NotASet(set_name.to_string()))?
        .to_vec();
    let mut out = Vec::new();
    for name in &uni.order {
        if uni.kinds[name] != EntryKind::Fn {
            continue;
        }
        let v = &uni.reprs[name];
        let Some((dom, graph)) = fn_parts(uni, v) else { continue };
        if dom != members.as_slice() {
            continue;
        }
        let fixed: Vec<Value> = graph
            .iter()
            .filter(|(a, b)| a == b)
            .map(|(a, _)| a.clone())
            .collect();
        out.push((name.clone(), Value::set(fixed)));
    }
    Ok(out)
}

/// Team assignment and sum function realizing the case split that encodes a
/// subset: members of `a` map to themselves, everything else maps to the
/// anchor `h`. Returns the team (one one-point function per member of `x`)
/// and the assembled sum function; since `h` itself lies in `a`, the sum
/// function's image set is exactly `a`.
pub fn missing_subset_reconstruction(
    x: &Value,
    a: &Value,
    h: &Value,
) -> Result<(Vec<(Value, Value)>, Value), ModelError> {
    let Value::SetV(xm) = x else {
        return Err(ModelError::Precondition("the base is not a set value".into()));
    };
    let Value::SetV(am) = a else {
        return Err(ModelError::Precondition("the subset is not a set value".into()));
    };
    if xm.is_empty() {
        return Err(ModelError::Precondition("the base set is empty".into()));
    }
    if !am.iter().all(|m| xm.contains(m)) {
        return Err(ModelError::Precondition(
            "the subset has a member outside the base set".into(),
        ));
    }
    if !am.contains(h) {
        return Err(ModelError::Precondition(
            "the anchor is not a member of the subset".into(),
        ));
    }
    let mut team = Vec::new();
    let mut graph = Vec::new();
    for n in xm {
        let image = if am.contains(n) { n.clone() } else { h.clone() };
        let one_point = Value::FnV {
            dom: vec![n.clone()],
            graph: vec![(n.clone(), image.clone())],
        };
        team.push((n.clone(), one_point));
        graph.push((n.clone(), image));
    }
    graph.sort();
    let sum = Value::FnV { dom: xm.clone(), graph };
    Ok((team, sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_formula;

    const TWINS: &str = "\
set df { h }
set dh { f }
fn f dom df { h -> f }
fn h dom dh { f -> h }
";

    fn formula(uni: &Universe, src: &str) -> Formula {
        parse_formula(src, &uni.registry()).expect("formula parses")
    }

    #[test]
    fn cyclic_entries_resolve_to_handles() {
        let uni = parse_tfu(TWINS).unwrap();
        assert_eq!(uni.value("f"), Some(&Value::Cyc("f".into())));
        let members: Vec<Value> = uni
            .members(uni.value("df").unwrap())
            .unwrap()
            .to_vec();
        assert_eq!(members, vec![Value::Cyc("h".into())]);
    }

    #[test]
    fn twins_satisfy_their_surjections() {
        let uni = parse_tfu(TWINS).unwrap();
        assert_eq!(uni.eval_sentence(&formula(&uni, "f : df ->> dh")), Ok(true));
        assert_eq!(uni.eval_sentence(&formula(&uni, "h : dh ->> df")), Ok(true));
        assert_eq!(uni.eval_sentence(&formula(&uni, "f : h |-> f")), Ok(true));
        assert_eq!(uni.eval_sentence(&formula(&uni, "h in df")), Ok(true));
        assert_eq!(uni.eval_sentence(&formula(&uni, "f = h")), Ok(false));
    }

    #[test]
    fn twins_break_function_regularity_but_not_set_regularity() {
        let uni = parse_tfu(TWINS).unwrap();
        let regf = crate::theory::axiom(AxiomId::RegF);
        let reg = crate::theory::axiom(AxiomId::Reg);
        assert_eq!(uni.eval_sentence(regf), Ok(false));
        assert_eq!(uni.eval_sentence(reg), Ok(true));
        let cleaned = uni.without(&["f", "h", "df", "dh"]).unwrap();
        assert_eq!(cleaned.eval_sentence(regf), Ok(true));
        assert_eq!(cleaned.eval_sentence(reg), Ok(true));
    }

    #[test]
    fn validity_and_eval_agree_on_the_twins() {
        let uni = parse_tfu(TWINS).unwrap();
        for id in [AxiomId::Ext, AxiomId::Reg, AxiomId::RegF, AxiomId::FnNotSet] {
            let f = crate::theory::axiom(id);
            assert_eq!(
                uni.eval_sentence(f),
                uni.check_validity(f),
                "disagreement on {id}"
            );
        }
    }

    #[test]
    fn duplicate_values_are_rejected() {
        let err = parse_tfu("set a { 0 }\nset b { 0 }\n").unwrap_err();
        assert_eq!(
            err,
            ModelError::DuplicateValue { first: "a".into(), second: "b".into() }
        );
        // An entry equal to a builtin is a duplicate too.
        let err = parse_tfu("set a { }\n").unwrap_err();
        assert!(matches!(err, ModelError::DuplicateValue { .. }));
    }

    #[test]
    fn graphs_must_cover_the_domain_exactly() {
        assert!(matches!(
            parse_tfu("set a { 0 1 }\nfn g dom a { 0 -> 0 }\n"),
            Err(ModelError::NotFunctional(_))
        ));
        assert!(matches!(
            parse_tfu("set a { 0 }\nfn g dom a { 0 -> 0 ; 0 -> 1 }\n"),
            Err(ModelError::NotFunctional(_))
        ));
    }

    #[test]
    fn tuples_evaluate_via_their_characterization() {
        let uni = parse_tfu(
            "set s01 { 0 1 }\nset t01 { 0 s01 }\nset t10 { 1 s01 }\nset g { t01 t10 }\n",
        )
        .unwrap();
        assert_eq!(uni.eval_sentence(&formula(&uni, "t01 = <0, 1>")), Ok(true));
        assert_eq!(uni.eval_sentence(&formula(&uni, "t10 = <1, 0>")), Ok(true));
        assert_eq!(uni.eval_sentence(&formula(&uni, "t01 = <1, 0>")), Ok(false));
        assert_eq!(uni.eval_sentence(&formula(&uni, "<0, 1> in g")), Ok(true));
    }

    #[test]
    fn generated_universe_is_a_category() {
        let uni = build_universe(2, FnMode::AllTotal).unwrap();
        let report = check_category_laws(&uni);
        assert_eq!(report.objects, 4);
        assert_eq!(report.morphisms, 25);
        assert!(report.composition_closed);
        assert!(report.identities_present);
        assert!(report.identity_laws);
        assert!(report.associativity);
    }

    #[test]
    fn infinity_fails_in_finite_universes() {
        let uni = parse_tfu("set s01 { 0 1 }\n").unwrap();
        let audit = audit_axioms(&uni).unwrap();
        let inf = audit.iter().find(|(id, _)| *id == AxiomId::Inf).unwrap();
        assert!(!inf.1);
    }

    #[test]
    fn subset_encoding_is_recovered_from_fixed_points() {
        let uni = parse_tfu(
            "set x { 0 1 }\nset a { 0 }\nfn enc dom x { 0 -> 0 ; 1 -> 5 }\n",
        )
        .unwrap();
        let encoded = encoded_subsets(&uni, "x").unwrap();
        assert_eq!(encoded.len(), 1);
        assert_eq!(encoded[0].0, "enc");
        assert_eq!(Some(&encoded[0].1), uni.value("a"));
    }

    #[test]
    fn reconstruction_image_equals_the_subset() {
        let x = Value::set((0..3).map(Value::tower).collect());
        let a = Value::set(vec![Value::tower(0), Value::tower(2)]);
        let (team, sum) = missing_subset_reconstruction(&x, &a, &Value::tower(0)).unwrap();
        assert_eq!(team.len(), 3);
        let Value::FnV { dom, graph } = &sum else { panic!("not a function") };
        assert_eq!(dom.len(), 3);
        let expected = [
            (Value::tower(0), Value::tower(0)),
            (Value::tower(1), Value::tower(0)),
            (Value::tower(2), Value::tower(2)),
        ];
        assert_eq!(graph.as_slice(), expected.as_slice());
        let image = Value::set(graph.iter().map(|(_, b)| b.clone()).collect());
        assert_eq!(image, a);
        let bad = missing_subset_reconstruction(&x, &a, &Value::tower(1));
        assert!(matches!(bad, Err(ModelError::Precondition(_))));
    }
}
