//! Proof scripts and the proof checker.
//!
//! A script (`.tfp` file) declares a goal, optional constants, literal sets,
//! and function families, followed by numbered steps. Every step records the
//! formula it claims to derive; the checker re-derives each step from its
//! premises by the named rule and accepts the script only if every recorded
//! formula matches the derivation exactly, every assumption is discharged,
//! and the final formula equals the goal.
//!
//! Assumptions use a flat natural-deduction discipline: `discharge` with no
//! premises opens an assumption (its recorded formula), and `discharge [i j]`
//! closes the innermost open assumption `i`, deriving `Phi_i => Phi_j`.
//! Steps inside a closed subproof can no longer be cited.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::binding::{
    constants_in, is_sentence, occurs_as_range_constant, substitute, BindError,
};
use crate::parser::{parse_formula, parse_term_str, print_formula, print_term, ParseError};
use crate::syntax::{
    check_wff, formula_vars, simple_var_sort, term_vars, ConstKind, Formula, Registry, Sort,
    Term,
};
use crate::theory::{self, AxiomId};

/// The inference rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleTag {
    Axiom,
    Nue,
    Mue,
    RuleC,
    Ce,
    Coi,
    Mui,
    Mei,
    GenA,
    GenE,
    Mp,
    AndI,
    AndE,
    AllE,
    AllI,
    ExI,
    ExC,
    IffE,
    IffI,
    Discharge,
}

impl RuleTag {
    pub fn name(self) -> &'static str {
        match self {
            RuleTag::Axiom => "axiom",
            RuleTag::Nue => "nue",
            RuleTag::Mue => "mue",
            RuleTag::RuleC => "rule-c",
            RuleTag::Ce => "ce",
            RuleTag::Coi => "coi",
            RuleTag::Mui => "mui",
            RuleTag::Mei => "mei",
            RuleTag::GenA => "gen-a",
            RuleTag::GenE => "gen-e",
            RuleTag::Mp => "mp",
            RuleTag::AndI => "and-i",
            RuleTag::AndE => "and-e",
            RuleTag::AllE => "all-e",
            RuleTag::AllI => "all-i",
            RuleTag::ExI => "ex-i",
            RuleTag::ExC => "ex-c",
            RuleTag::IffE => "iff-e",
            RuleTag::IffI => "iff-i",
            RuleTag::Discharge => "discharge",
        }
    }

    pub fn from_name(s: &str) -> Option<RuleTag> {
        const ALL: [RuleTag; 20] = [
            RuleTag::Axiom,
            RuleTag::Nue,
            RuleTag::Mue,
            RuleTag::RuleC,
            RuleTag::Ce,
            RuleTag::Coi,
            RuleTag::Mui,
            RuleTag::Mei,
            RuleTag::GenA,
            RuleTag::GenE,
            RuleTag::Mp,
            RuleTag::AndI,
            RuleTag::AndE,
            RuleTag::AllE,
            RuleTag::AllI,
            RuleTag::ExI,
            RuleTag::ExC,
            RuleTag::IffE,
            RuleTag::IffI,
            RuleTag::Discharge,
        ];
        ALL.iter().copied().find(|r| r.name() == s)
    }
}

impl fmt::Display for RuleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a family of ur-functions is prescribed, one ur-function per member of
/// the operator range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Prescription {
    /// `maps a to t`: the ur-function at `a` sends `a` to the term `t(a)`.
    MapsTerm(Term),
    /// `cases g ? t1 : t2`: sends `a` to `t1(a)` when the guard holds at `a`,
    /// else to `t2(a)`.
    Cases { guard: Formula, then_t: Term, else_t: Term },
    /// `via iota phi justified j`: sends `a` to the unique value satisfying
    /// `phi(a, value)`; step `j` must derive that uniqueness over the range.
    ViaIota { phi: Formula, value_var: String, justified: usize },
    /// `arbitrary`: no prescription; eligible for generalization.
    Arbitrary,
}

/// A named family declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Family {
    pub name: String,
    pub index: String,
    pub prescription: Prescription,
}

/// Script declarations preceding the steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    /// `arbitrary <name> : Set | Thing | Fn <term>`
    Arbitrary { name: String, kind: ConstKind },
    /// `set <name> { <closed-term> ... }`
    LiteralSet { name: String, members: Vec<Term> },
    /// `family <name> index <var> ...`
    Family(Family),
}

/// One proof step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub id: usize,
    pub rule: RuleTag,
    pub premises: Vec<usize>,
    pub side: Vec<String>,
    /// Recorded formula; `None` is the `?` placeholder (parses, never checks).
    pub formula: Option<Formula>,
}

/// A parsed proof script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofScript {
    pub goal: Option<Formula>,
    pub decls: Vec<Decl>,
    pub steps: Vec<Step>,
}

/// Reasons the checker rejects a step (or the script as a whole).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("unknown axiom `{0}`")]
    UnknownAxiom(String),
    #[error("rule shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("derived formula does not match the recorded one; derived: {derived}")]
    FormulaMismatch { derived: String },
    #[error("sort mismatch: {0}")]
    SortMismatch(String),
    #[error("name `{0}` is not fresh")]
    NameCollision(String),
    #[error("`{element}` is not a recognized member of `{range}`")]
    NotAMember { element: String, range: String },
    #[error("family index `{family}` does not match quantifier index `{quantifier}`")]
    IndexMismatch { family: String, quantifier: String },
    #[error("arbitrary-constant discipline violated: {0}")]
    ArbitraryViolation(String),
    #[error("operator range `{0}` is not a constant")]
    NotAConstant(String),
    #[error("conjunctor range is not completely covered: {0}")]
    IncompleteCover(String),
    #[error("assumptions still open at the end of the script: steps {0:?}")]
    OpenAssumptions(Vec<usize>),
    #[error("final formula does not equal the goal; derived: {derived}")]
    GoalMismatch { derived: String },
    #[error("step {cited} is not citable here (closed subproof or out of scope)")]
    NotCitable { cited: usize },
    #[error("placeholder formula; the rule derives: {derived}")]
    Placeholder { derived: String },
    #[error("placeholder formula cannot be checked for this rule")]
    PlaceholderUnresolvable,
    #[error("derived formula is not well formed: {0}")]
    NotAWff(String),
    #[error("derived formula has free variables: {0}")]
    NotASentence(String),
    #[error("rule `{rule}` expects {expected} premise(s), found {found}")]
    WrongPremiseCount { rule: &'static str, expected: &'static str, found: usize },
    #[error("missing or invalid side data: {0}")]
    BadSideData(String),
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("family justification mismatch: expected step deriving: {0}")]
    JustificationMismatch(String),
    #[error("a script with steps must declare a goal")]
    MissingGoal,
    #[error("substitution failed: {0}")]
    Bind(String),
    #[error("declaration error: {0}")]
    BadDeclaration(String),
}

impl From<BindError> for KernelError {
    fn from(e: BindError) -> Self {
        match e {
            BindError::SortMismatch { expected, found } => {
                KernelError::SortMismatch(format!("expected {expected}, found {found}"))
            }
            other => KernelError::Bind(other.to_string()),
        }
    }
}

/// Outcome of checking a script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected { step: usize, reason: KernelError },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

// ----- script parsing -----

fn line_err(lineno: usize, message: String) -> ParseError {
    ParseError { message, line: lineno + 1, col: 1 }
}

/// Splits side data on whitespace outside braces, so `F{Xhat}` stays whole.
fn split_side_tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut depth = 0i32;
    for c in s.chars() {
        match c {
            '{' => {
                depth += 1;
                cur.push(c);
            }
            '}' => {
                depth -= 1;
                cur.push(c);
            }
            c if c.is_whitespace() && depth == 0 => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().unwrap().is_ascii_alphabetic()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses a `.tfp` proof script.
///
/// Constants introduced by `rule-c` / `ex-c` steps are registered as they are
/// encountered so later formulas (including the step's own) parse them as
/// constants; the checker re-validates freshness and sorts.
pub fn parse_script(src: &str) -> Result<ProofScript, ParseError> {
    let mut reg = Registry::builtin();
    let mut goal: Option<Formula> = None;
    let mut decls: Vec<Decl> = Vec::new();
    let mut steps: Vec<Step> = Vec::new();
    let mut family_names: BTreeSet<String> = BTreeSet::new();

    for (lineno, raw) in src.lines().enumerate() {
        let line = match raw.find('#') {
            Some(k) => &raw[..k],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }

        if let Some(rest) = line.strip_prefix("goal") {
            let rest = rest.trim_start();
            let rest = rest
                .strip_prefix(':')
                .ok_or_else(|| line_err(lineno, "expected `goal : <formula>`".into()))?;
            if goal.is_some() {
                return Err(line_err(lineno, "duplicate goal".into()));
            }
            if !steps.is_empty() {
                return Err(line_err(lineno, "goal must precede the steps".into()));
            }
            let f = parse_formula(rest, &reg)
                .map_err(|e| line_err(lineno, format!("in goal: {e}")))?;
            goal = Some(f);
            continue;
        }

        if let Some(rest) = line.strip_prefix("arbitrary ") {
            let (name, kind_text) = rest
                .split_once(':')
                .ok_or_else(|| line_err(lineno, "expected `arbitrary <name> : <kind>`".into()))?;
            let name = name.trim();
            let kind_text = kind_text.trim();
            if !valid_name(name) {
                return Err(line_err(lineno, format!("invalid constant name `{name}`")));
            }
            let kind = if kind_text == "Set" {
                ConstKind::Set { extension: None }
            } else if kind_text == "Thing" {
                ConstKind::Thing
            } else if let Some(dom) = kind_text.strip_prefix("Fn ") {
                let domain = parse_term_str(dom.trim(), &reg)
                    .map_err(|e| line_err(lineno, format!("in function domain: {e}")))?;
                ConstKind::Fn { domain }
            } else {
                return Err(line_err(
                    lineno,
                    format!("unknown kind `{kind_text}` (expected Set, Thing, or Fn <term>)"),
                ));
            };
            if !reg.insert(name, kind.clone()) {
                return Err(line_err(lineno, format!("constant `{name}` already declared")));
            }
            decls.push(Decl::Arbitrary { name: name.to_string(), kind });
            continue;
        }

        if let Some(rest) = line.strip_prefix("set ") {
            let open = rest
                .find('{')
                .ok_or_else(|| line_err(lineno, "expected `set <name> { <members> }`".into()))?;
            let close = rest
                .rfind('}')
                .ok_or_else(|| line_err(lineno, "unclosed `{` in set declaration".into()))?;
            let name = rest[..open].trim();
            if !valid_name(name) {
                return Err(line_err(lineno, format!("invalid set name `{name}`")));
            }
            let mut members = Vec::new();
            for tok in split_side_tokens(&rest[open + 1..close]) {
                let t = parse_term_str(&tok, &reg)
                    .map_err(|e| line_err(lineno, format!("in set member `{tok}`: {e}")))?;
                if !term_vars(&t).is_empty() {
                    return Err(line_err(
                        lineno,
                        format!("set member `{tok}` must be a closed term"),
                    ));
                }
                members.push(t);
            }
            if !reg.insert(name, ConstKind::Set { extension: Some(members.clone()) }) {
                return Err(line_err(lineno, format!("constant `{name}` already declared")));
            }
            decls.push(Decl::LiteralSet { name: name.to_string(), members });
            continue;
        }

        if let Some(rest) = line.strip_prefix("family ") {
            let toks: Vec<&str> = rest.splitn(4, char::is_whitespace).collect();
            if toks.len() < 4 || toks[1] != "index" {
                return Err(line_err(
                    lineno,
                    "expected `family <name> index <var> <prescription>`".into(),
                ));
            }
            let name = toks[0];
            let index = toks[2];
            let rest = toks[3].trim();
            if !valid_name(name) || reg.contains(name) || family_names.contains(name) {
                return Err(line_err(lineno, format!("invalid or taken family name `{name}`")));
            }
            if simple_var_sort(index) != Sort::ThingVar || reg.contains(index) {
                return Err(line_err(
                    lineno,
                    format!("family index `{index}` must be a thing variable"),
                ));
            }
            let prescription = if rest == "arbitrary" {
                Prescription::Arbitrary
            } else if let Some(body) = rest.strip_prefix("maps ") {
                let (v, t) = body.split_once(" to ").ok_or_else(|| {
                    line_err(lineno, "expected `maps <var> to <term>`".into())
                })?;
                if v.trim() != index {
                    return Err(line_err(
                        lineno,
                        format!("`maps` variable must be the index `{index}`"),
                    ));
                }
                let t = parse_term_str(t.trim(), &reg)
                    .map_err(|e| line_err(lineno, format!("in prescription term: {e}")))?;
                Prescription::MapsTerm(t)
            } else if let Some(body) = rest.strip_prefix("cases ") {
                let (guard_text, branches) = body.split_once('?').ok_or_else(|| {
                    line_err(lineno, "expected `cases <formula> ? <term> : <term>`".into())
                })?;
                let (then_text, else_text) = branches.split_once(':').ok_or_else(|| {
                    line_err(lineno, "expected `? <term> : <term>` branches".into())
                })?;
                let guard = parse_formula(guard_text, &reg)
                    .map_err(|e| line_err(lineno, format!("in case guard: {e}")))?;
                let then_t = parse_term_str(then_text.trim(), &reg)
                    .map_err(|e| line_err(lineno, format!("in case branch: {e}")))?;
                let else_t = parse_term_str(else_text.trim(), &reg)
                    .map_err(|e| line_err(lineno, format!("in case branch: {e}")))?;
                Prescription::Cases { guard, then_t, else_t }
            } else if let Some(body) = rest.strip_prefix("via iota ") {
                let split_at = body.rfind(" justified ").ok_or_else(|| {
                    line_err(lineno, "expected `via iota <formula> justified <step>`".into())
                })?;
                let phi_text = &body[..split_at];
                let step_text = body[split_at + " justified ".len()..].trim();
                let justified: usize = step_text.parse().map_err(|_| {
                    line_err(lineno, format!("invalid step id `{step_text}`"))
                })?;
                let phi = parse_formula(phi_text, &reg)
                    .map_err(|e| line_err(lineno, format!("in prescription formula: {e}")))?;
                let mut value_vars: Vec<String> = formula_vars(&phi)
                    .into_iter()
                    .filter(|(n, s)| *s == Sort::ThingVar && n != index)
                    .map(|(n, _)| n)
                    .collect();
                value_vars.sort();
                value_vars.dedup();
                if value_vars.len() != 1 {
                    return Err(line_err(
                        lineno,
                        format!(
                            "prescription formula must have exactly one free thing variable \
                             besides the index, found {value_vars:?}"
                        ),
                    ));
                }
                Prescription::ViaIota { phi, value_var: value_vars.remove(0), justified }
            } else {
                return Err(line_err(
                    lineno,
                    "expected `maps`, `cases`, `via iota`, or `arbitrary`".into(),
                ));
            };
            family_names.insert(name.to_string());
            decls.push(Decl::Family(Family {
                name: name.to_string(),
                index: index.to_string(),
                prescription,
            }));
            continue;
        }

        // Otherwise this is a step line: `<num>. <rule> [ids] {side} : <formula>`.
        let dot = line
            .find('.')
            .ok_or_else(|| line_err(lineno, "expected `<number>. <rule> ... : <formula>`".into()))?;
        let id: usize = line[..dot]
            .trim()
            .parse()
            .map_err(|_| line_err(lineno, format!("invalid step number `{}`", &line[..dot])))?;
        if id != steps.len() + 1 {
            return Err(line_err(
                lineno,
                format!("step numbers must be sequential; expected {}", steps.len() + 1),
            ));
        }
        let mut rest = line[dot + 1..].trim_start();
        let rule_end = rest
            .find(|c: char| c.is_whitespace() || c == '[' || c == '{' || c == ':')
            .unwrap_or(rest.len());
        let rule_name = &rest[..rule_end];
        let rule = RuleTag::from_name(rule_name)
            .ok_or_else(|| line_err(lineno, format!("unknown rule `{rule_name}`")))?;
        rest = rest[rule_end..].trim_start();

        let mut premises = Vec::new();
        if let Some(after) = rest.strip_prefix('[') {
            let close = after
                .find(']')
                .ok_or_else(|| line_err(lineno, "unclosed `[` in premise list".into()))?;
            for tok in after[..close].split(|c: char| c == ',' || c.is_whitespace()) {
                let tok = tok.trim();
                if tok.is_empty() {
                    continue;
                }
                let p: usize = tok
                    .parse()
                    .map_err(|_| line_err(lineno, format!("invalid premise id `{tok}`")))?;
                if p >= id {
                    return Err(line_err(
                        lineno,
                        format!("step {id} cites step {p}: forward references are not allowed"),
                    ));
                }
                if p == 0 {
                    return Err(line_err(lineno, "step ids start at 1".into()));
                }
                premises.push(p);
            }
            rest = after[close + 1..].trim_start();
        }

        let mut side = Vec::new();
        if rest.starts_with('{') {
            let mut depth = 0i32;
            let mut end = None;
            for (k, c) in rest.char_indices() {
                match c {
                    '{' => depth += 1,
                    '}' => {
                        depth -= 1;
                        if depth == 0 {
                            end = Some(k);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            let end =
                end.ok_or_else(|| line_err(lineno, "unclosed `{` in side data".into()))?;
            side = split_side_tokens(&rest[1..end]);
            rest = rest[end + 1..].trim_start();
        }

        let rest = rest.strip_prefix(':').ok_or_else(|| {
            line_err(lineno, "expected `:` before the step formula".into())
        })?;
        let body = rest.trim();

        // Constants introduced by this step must parse in its own formula.
        if matches!(rule, RuleTag::RuleC | RuleTag::ExC) {
            if let Some(name) = side.first() {
                if valid_name(name) && !reg.contains(name) {
                    reg.insert(name, ConstKind::Opaque);
                }
            }
        }

        let formula = if body == "?" {
            None
        } else {
            Some(
                parse_formula(body, &reg)
                    .map_err(|e| line_err(lineno, format!("in step {id}: {e}")))?,
            )
        };
        steps.push(Step { id, rule, premises, side, formula });
    }

    Ok(ProofScript { goal, decls, steps })
}

// ----- checking -----

struct CheckedStep {
    formula: Formula,
    /// Open-assumption stack at the time this step was checked (innermost
    /// last); a step is citable iff its chain is a prefix of the current one.
    chain: Vec<usize>,
}

struct Checker<'a> {
    script: &'a ProofScript,
    reg: Registry,
    arbitrary: BTreeSet<String>,
    families: BTreeMap<String, Family>,
    checked: BTreeMap<usize, CheckedStep>,
    scope: Vec<usize>,
    trace: Vec<String>,
}

type RuleResult = Result<Formula, KernelError>;

impl<'a> Checker<'a> {
    fn new(script: &'a ProofScript) -> Result<Self, KernelError> {
        let mut reg = Registry::builtin();
        let mut arbitrary = BTreeSet::new();
        let mut families = BTreeMap::new();
        for d in &script.decls {
            match d {
                Decl::Arbitrary { name, kind } => {
                    if !reg.insert(name, kind.clone()) {
                        return Err(KernelError::NameCollision(name.clone()));
                    }
                    arbitrary.insert(name.clone());
                }
                Decl::LiteralSet { name, members } => {
                    if !reg.insert(name, ConstKind::Set { extension: Some(members.clone()) }) {
                        return Err(KernelError::NameCollision(name.clone()));
                    }
                }
                Decl::Family(f) => {
                    if reg.contains(&f.name) || families.contains_key(&f.name) {
                        return Err(KernelError::NameCollision(f.name.clone()));
                    }
                    validate_family(f, &reg)?;
                    families.insert(f.name.clone(), f.clone());
                }
            }
        }
        Ok(Checker {
            script,
            reg,
            arbitrary,
            families,
            checked: BTreeMap::new(),
            scope: Vec::new(),
            trace: Vec::new(),
        })
    }

    fn citable(&self, id: usize) -> bool {
        match self.checked.get(&id) {
            None => false,
            Some(s) => {
                s.chain.len() <= self.scope.len() && self.scope[..s.chain.len()] == s.chain[..]
            }
        }
    }

    fn premise(&self, id: usize) -> Result<&Formula, KernelError> {
        if !self.citable(id) {
            return Err(KernelError::NotCitable { cited: id });
        }
        Ok(&self.checked[&id].formula)
    }

    fn premises_exactly(&self, step: &Step, n: usize) -> Result<Vec<&Formula>, KernelError> {
        if step.premises.len() != n {
            return Err(KernelError::WrongPremiseCount {
                rule: step.rule.name(),
                expected: match n {
                    0 => "0",
                    1 => "1",
                    2 => "2",
                    _ => "several",
                },
                found: step.premises.len(),
            });
        }
        step.premises.iter().map(|&p| self.premise(p)).collect()
    }

    fn side_exactly(&self, step: &Step, n: usize, what: &str) -> Result<(), KernelError> {
        if step.side.len() != n {
            return Err(KernelError::BadSideData(format!(
                "`{}` expects {{{what}}}",
                step.rule.name()
            )));
        }
        Ok(())
    }

    fn parse_side_term(&self, tok: &str) -> Result<Term, KernelError> {
        parse_term_str(tok, &self.reg)
            .map_err(|e| KernelError::BadSideData(format!("`{tok}`: {e}")))
    }

    fn parse_side_var(&self, tok: &str) -> Result<(String, Sort), KernelError> {
        match self.parse_side_term(tok)? {
            Term::Var(n, s) => Ok((n, s)),
            other => Err(KernelError::BadSideData(format!(
                "`{}` is not a variable",
                print_term(&other)
            ))),
        }
    }

    /// A term whose nonemptiness is decided canonically: `omega`, a literal
    /// set constant with at least one member, or a singleton term.
    fn canonically_nonempty(&self, t: &Term) -> bool {
        match t {
            Term::Constant(c) if c == "omega" => true,
            Term::Singleton(_) => true,
            Term::Constant(c) => matches!(
                self.reg.get(c),
                Some(ConstKind::Set { extension: Some(m) }) if !m.is_empty()
            ),
            _ => false,
        }
    }

    fn fresh_constant(&self, name: &str) -> Result<(), KernelError> {
        if !valid_name(name)
            || self.reg.contains(name)
            || self.families.contains_key(name)
            || RuleTag::from_name(name).is_some()
        {
            return Err(KernelError::NameCollision(name.to_string()));
        }
        // The goal must not anticipate the constant either.
        if let Some(goal) = &self.script.goal {
            if constants_in(goal).contains(name) {
                return Err(KernelError::NameCollision(name.to_string()));
            }
        }
        Ok(())
    }

    fn arbitrary_ok(&self, name: &str, rule: &str) -> Result<(), KernelError> {
        if !self.arbitrary.contains(name) {
            return Err(KernelError::ArbitraryViolation(format!(
                "`{rule}` requires `{name}` to be declared arbitrary"
            )));
        }
        for &a in &self.scope {
            if constants_in(&self.checked[&a].formula).contains(name) {
                return Err(KernelError::ArbitraryViolation(format!(
                    "`{name}` occurs in the open assumption of step {a}"
                )));
            }
        }
        Ok(())
    }

    fn subst(&self, f: &Formula, x: &Term, u: &Term) -> Result<Formula, KernelError> {
        Ok(substitute(f, x, u, &self.reg)?)
    }

    fn check_step(&mut self, step: &Step) -> RuleResult {
        match step.rule {
            RuleTag::Axiom => {
                self.premises_exactly(step, 0)?;
                self.side_exactly(step, 1, "axiom-id")?;
                let id = AxiomId::from_name(&step.side[0])
                    .ok_or_else(|| KernelError::UnknownAxiom(step.side[0].clone()))?;
                Ok(theory::axiom(id).clone())
            }
            RuleTag::Mp => {
                let ps = self.premises_exactly(step, 2)?;
                match ps[1] {
                    Formula::Implies(a, b) if a.as_ref() == ps[0] => Ok((**b).clone()),
                    Formula::Implies(..) => Err(KernelError::ShapeMismatch(
                        "mp: first premise is not the antecedent of the second".into(),
                    )),
                    _ => Err(KernelError::ShapeMismatch(
                        "mp: second premise must be an implication".into(),
                    )),
                }
            }
            RuleTag::AndI => {
                let ps = self.premises_exactly(step, 2)?;
                Ok(Formula::And(Box::new(ps[0].clone()), Box::new(ps[1].clone())))
            }
            RuleTag::AndE => {
                let ps = self.premises_exactly(step, 1)?;
                self.side_exactly(step, 1, "l|r")?;
                match (ps[0], step.side[0].as_str()) {
                    (Formula::And(a, _), "l") => Ok((**a).clone()),
                    (Formula::And(_, b), "r") => Ok((**b).clone()),
                    (Formula::And(..), other) => Err(KernelError::BadSideData(format!(
                        "`and-e` side must be `l` or `r`, found `{other}`"
                    ))),
                    _ => Err(KernelError::ShapeMismatch(
                        "and-e: premise is not a conjunction".into(),
                    )),
                }
            }
            RuleTag::IffI => {
                let ps = self.premises_exactly(step, 2)?;
                match (ps[0], ps[1]) {
                    (Formula::Implies(a1, b1), Formula::Implies(b2, a2))
                        if a1 == a2 && b1 == b2 =>
                    {
                        Ok(Formula::Iff(a1.clone(), b1.clone()))
                    }
                    _ => Err(KernelError::ShapeMismatch(
                        "iff-i: premises must be converse implications".into(),
                    )),
                }
            }
            RuleTag::IffE => {
                let ps = self.premises_exactly(step, 1)?;
                self.side_exactly(step, 1, "lr|rl")?;
                match (ps[0], step.side[0].as_str()) {
                    (Formula::Iff(a, b), "lr") => Ok(Formula::Implies(a.clone(), b.clone())),
                    (Formula::Iff(a, b), "rl") => Ok(Formula::Implies(b.clone(), a.clone())),
                    (Formula::Iff(..), other) => Err(KernelError::BadSideData(format!(
                        "`iff-e` side must be `lr` or `rl`, found `{other}`"
                    ))),
                    _ => Err(KernelError::ShapeMismatch(
                        "iff-e: premise is not a biconditional".into(),
                    )),
                }
            }
            RuleTag::AllE => {
                let ps = self.premises_exactly(step, 1)?;
                self.side_exactly(step, 1, "term")?;
                let t = self.parse_side_term(&step.side[0])?;
                if !term_vars(&t).is_empty() {
                    return Err(KernelError::BadSideData(format!(
                        "`{}` must be a closed term",
                        step.side[0]
                    )));
                }
                match ps[0] {
                    Formula::Forall(v, s, body) => {
                        if matches!(s, Sort::FnComposite(_)) {
                            return Err(KernelError::SortMismatch(
                                "all-e cannot instantiate a composite function variable; \
                                 instantiate its subscript set variable first"
                                    .into(),
                            ));
                        }
                        self.subst(body, &Term::Var(v.clone(), s.clone()), &t)
                    }
                    _ => Err(KernelError::ShapeMismatch(
                        "all-e: premise is not a universal quantification".into(),
                    )),
                }
            }
            RuleTag::AllI => {
                let ps = self.premises_exactly(step, 1)?;
                self.side_exactly(step, 2, "constant variable")?;
                let chat = &step.side[0];
                if self.reg.get(chat).is_none() {
                    return Err(KernelError::NotAConstant(chat.clone()));
                }
                self.arbitrary_ok(chat, "all-i")?;
                if occurs_as_range_constant(ps[0], chat) {
                    return Err(KernelError::ShapeMismatch(format!(
                        "`{chat}` occurs as an operator range; use gen-a"
                    )));
                }
                let (vn, vs) = self.parse_side_var(&step.side[1])?;
                let body =
                    self.subst(ps[0], &Term::Constant(chat.clone()), &Term::Var(vn.clone(), vs.clone()))?;
                Ok(Formula::Forall(vn, vs, Box::new(body)))
            }
            RuleTag::ExI => {
                let ps = self.premises_exactly(step, 1)?;
                self.side_exactly(step, 2, "term variable")?;
                let t = self.parse_side_term(&step.side[0])?;
                if !term_vars(&t).is_empty() {
                    return Err(KernelError::BadSideData(format!(
                        "`{}` must be a closed term",
                        step.side[0]
                    )));
                }
                if let Term::Constant(c) = &t {
                    if occurs_as_range_constant(ps[0], c) {
                        return Err(KernelError::ShapeMismatch(format!(
                            "`{c}` occurs as an operator range; use gen-e"
                        )));
                    }
                }
                let (vn, vs) = self.parse_side_var(&step.side[1])?;
                let body = self.subst(ps[0], &t, &Term::Var(vn.clone(), vs.clone()))?;
                Ok(Formula::Exists(vn, vs, Box::new(body)))
            }
            RuleTag::ExC => {
                let premise = self.premises_exactly(step, 1)?[0].clone();
                self.side_exactly(step, 1, "fresh-constant")?;
                let chat = &step.side[0];
                match premise {
                    Formula::Exists(v, Sort::ThingVar, body) => {
                        self.fresh_constant(chat)?;
                        self.reg.insert(chat, ConstKind::Thing);
                        self.subst(
                            &body,
                            &Term::Var(v, Sort::ThingVar),
                            &Term::Constant(chat.clone()),
                        )
                    }
                    _ => Err(KernelError::ShapeMismatch(
                        "ex-c: premise must be an existential over a thing variable".into(),
                    )),
                }
            }
            RuleTag::RuleC => {
                let premise = self.premises_exactly(step, 1)?[0].clone();
                self.side_exactly(step, 1, "fresh-constant")?;
                let chat = &step.side[0];
                match premise {
                    Formula::Exists(v, s @ Sort::SetVar, body) => {
                        self.fresh_constant(chat)?;
                        self.reg.insert(chat, ConstKind::Set { extension: None });
                        self.subst(&body, &Term::Var(v, s), &Term::Constant(chat.clone()))
                    }
                    Formula::Exists(v, Sort::FnOnConstant(dom), body) => {
                        self.fresh_constant(chat)?;
                        self.reg
                            .insert(chat, ConstKind::Fn { domain: (*dom).clone() });
                        self.subst(
                            &body,
                            &Term::Var(v, Sort::FnOnConstant(dom)),
                            &Term::Constant(chat.clone()),
                        )
                    }
                    _ => Err(KernelError::ShapeMismatch(
                        "rule-c: premise must be an existential over a set or function \
                         variable (use ex-c for thing variables)"
                            .into(),
                    )),
                }
            }
            RuleTag::Nue => self.check_nue(step),
            RuleTag::Mue => self.check_mue(step),
            RuleTag::Ce => self.check_ce(step),
            RuleTag::Coi => self.check_coi(step),
            RuleTag::Mui => self.check_mui(step),
            RuleTag::Mei => self.check_mei(step),
            RuleTag::GenA | RuleTag::GenE => self.check_gen(step),
            RuleTag::Discharge => unreachable!("discharge handled by the driver"),
        }
    }

    fn check_nue(&mut self, step: &Step) -> RuleResult {
        let ps = self.premises_exactly(step, 1)?;
        self.side_exactly(step, 1, "set-term")?;
        let t = self.parse_side_term(&step.side[0])?;
        if !term_vars(&t).is_empty() {
            return Err(KernelError::BadSideData(format!(
                "`{}` must be a closed term",
                step.side[0]
            )));
        }
        let Formula::Forall(x, Sort::SetVar, body) = ps[0] else {
            return Err(KernelError::ShapeMismatch(
                "nue: premise is not a universal set quantification".into(),
            ));
        };
        // Peel a nonemptiness guard if the instantiating term is canonically
        // nonempty.
        let guard_inner = match body.as_ref() {
            Formula::Implies(lhs, rhs) => match lhs.as_ref() {
                Formula::Not(e)
                    if **e
                        == Formula::Eq(
                            Term::Var(x.clone(), Sort::SetVar),
                            Term::Constant("empty".into()),
                        ) =>
                {
                    Some(rhs.as_ref())
                }
                _ => None,
            },
            _ => None,
        };
        let core: &Formula = match guard_inner {
            Some(inner) if self.canonically_nonempty(&t) => inner,
            _ => body,
        };
        if !occurs_as_range_var(core, x) {
            return Err(KernelError::ShapeMismatch(format!(
                "nue: premise has no generalized operator ranging over `{x}`; use all-e"
            )));
        }
        self.subst(core, &Term::Var(x.clone(), Sort::SetVar), &t)
    }

    fn family(&self, name: &str) -> Result<&Family, KernelError> {
        self.families
            .get(name)
            .ok_or_else(|| KernelError::UnknownFamily(name.to_string()))
    }

    fn check_mue(&mut self, step: &Step) -> RuleResult {
        let ps = self.premises_exactly(step, 1)?;
        self.side_exactly(step, 1, "family")?;
        let Formula::MultiForall { base, index, range, body } = ps[0] else {
            return Err(KernelError::ShapeMismatch(
                "mue: premise is not a universal multiple quantification".into(),
            ));
        };
        let fam = self.family(&step.side[0])?.clone();
        if fam.index != *index {
            return Err(KernelError::IndexMismatch {
                family: fam.index.clone(),
                quantifier: index.clone(),
            });
        }
        if let Prescription::ViaIota { phi, value_var, justified } = &fam.prescription {
            // The justification step must derive unique existence of the
            // value over exactly this range.
            let expected = theory::forall_in(
                index,
                range.clone(),
                theory::exists_unique(value_var, phi.clone(), &self.reg)
                    .map_err(|e| KernelError::Bind(e.to_string()))?,
            );
            if !self.citable(*justified) {
                return Err(KernelError::NotCitable { cited: *justified });
            }
            if self.checked[justified].formula != expected {
                return Err(KernelError::JustificationMismatch(print_formula(&expected)));
            }
        }
        let out = rename_family_var(body, base, &fam.name, index)?;
        Ok(match &fam.prescription {
            Prescription::MapsTerm(t) => {
                reduce_prescribed_iotas(&out, &fam.name, index, t, &self.reg)?
            }
            _ => out,
        })
    }

    fn check_ce(&mut self, step: &Step) -> RuleResult {
        if step.premises.is_empty() || step.premises.len() > 2 {
            return Err(KernelError::WrongPremiseCount {
                rule: "ce",
                expected: "1 or 2",
                found: step.premises.len(),
            });
        }
        self.side_exactly(step, 1, "element")?;
        let conj = self.premise(step.premises[0])?.clone();
        let t = self.parse_side_term(&step.side[0])?;
        if !term_vars(&t).is_empty() {
            return Err(KernelError::BadSideData(format!(
                "`{}` must be a closed term",
                step.side[0]
            )));
        }
        let Formula::BigAnd { index, range, body } = &conj else {
            return Err(KernelError::ShapeMismatch(
                "ce: first premise is not a conjunctor formula".into(),
            ));
        };
        // Membership of the element in the range.
        let membership_ok = if step.premises.len() == 2 {
            let m = self.premise(step.premises[1])?;
            *m == Formula::Mem(t.clone(), range.clone())
        } else {
            match range {
                Term::Constant(c) if c == "omega" => is_numeral(&t),
                Term::Constant(c) => match self.reg.get(c) {
                    Some(ConstKind::Set { extension: Some(members) }) => members.contains(&t),
                    _ => false,
                },
                Term::Singleton(u) => t == **u,
                _ => false,
            }
        };
        if !membership_ok {
            return Err(KernelError::NotAMember {
                element: print_term(&t),
                range: print_term(range),
            });
        }
        let inst = self.subst(body, &Term::Var(index.clone(), Sort::ThingVar), &t)?;
        self.unfold_family_image(inst, index)
    }

    /// After conjunctor elimination the instance may carry an iota-image over
    /// a prescribed family; unfold it per the prescription.
    fn unfold_family_image(&self, inst: Formula, index: &str) -> RuleResult {
        let Formula::MapsTo(fun, arg, img) = &inst else {
            return Ok(inst);
        };
        let Term::Iota { body: ibody, .. } = img else {
            return Ok(inst);
        };
        let Formula::MapsTo(ifun, iarg, _) = ibody.as_ref() else {
            return Ok(inst);
        };
        let Term::Var(fname, _) = ifun else {
            return Ok(inst);
        };
        let Some(fam) = self.families.get(fname) else {
            return Ok(inst);
        };
        let idx_var = Term::Var(index.to_string(), Sort::ThingVar);
        match &fam.prescription {
            Prescription::Arbitrary => Ok(inst),
            Prescription::MapsTerm(t) => {
                let img = subst_in_term(t, &idx_var, iarg, &self.reg)?;
                Ok(Formula::MapsTo(fun.clone(), arg.clone(), img))
            }
            Prescription::Cases { guard, then_t, else_t } => {
                let g = self.subst(guard, &idx_var, iarg)?;
                let then_i = subst_in_term(then_t, &idx_var, iarg, &self.reg)?;
                let else_i = subst_in_term(else_t, &idx_var, iarg, &self.reg)?;
                if then_i == else_i
                    || !term_vars(&then_i).is_empty()
                    || !term_vars(&else_i).is_empty()
                {
                    return Err(KernelError::ShapeMismatch(
                        "conditional prescription branches must be distinct closed terms"
                            .into(),
                    ));
                }
                let lhs = Formula::Iff(
                    Box::new(g.clone()),
                    Box::new(Formula::MapsTo(fun.clone(), arg.clone(), then_i)),
                );
                let rhs = Formula::Iff(
                    Box::new(Formula::Not(Box::new(g))),
                    Box::new(Formula::MapsTo(fun.clone(), arg.clone(), else_i)),
                );
                Ok(Formula::And(Box::new(lhs), Box::new(rhs)))
            }
            Prescription::ViaIota { phi, value_var, .. } => {
                let phi_inst = self.subst(phi, &idx_var, iarg)?;
                Ok(Formula::Forall(
                    value_var.clone(),
                    Sort::ThingVar,
                    Box::new(Formula::Iff(
                        Box::new(Formula::MapsTo(
                            fun.clone(),
                            arg.clone(),
                            Term::Var(value_var.clone(), Sort::ThingVar),
                        )),
                        Box::new(phi_inst),
                    )),
                ))
            }
        }
    }

    fn check_coi(&mut self, step: &Step) -> RuleResult {
        // Verification style: the recorded formula names the conjunctor; the
        // premises must be exactly its instances in range order.
        let Some(target) = &step.formula else {
            return Err(KernelError::PlaceholderUnresolvable);
        };
        let Formula::BigAnd { index, range, body } = target else {
            return Err(KernelError::ShapeMismatch(
                "coi: recorded formula is not a conjunctor formula".into(),
            ));
        };
        let elements: Vec<Term> = match range {
            Term::Constant(c) if c == "omega" => {
                return Err(KernelError::IncompleteCover(
                    "the range `omega` has no finite cover".into(),
                ));
            }
            Term::Constant(c) => match self.reg.get(c) {
                Some(ConstKind::Set { extension: Some(members) }) => members.clone(),
                Some(ConstKind::Set { extension: None }) => {
                    return Err(KernelError::IncompleteCover(format!(
                        "the extension of `{c}` is not known"
                    )));
                }
                _ => return Err(KernelError::NotAConstant(print_term(range))),
            },
            Term::Singleton(u) => vec![(**u).clone()],
            _ => return Err(KernelError::NotAConstant(print_term(range))),
        };
        if step.premises.len() != elements.len() {
            return Err(KernelError::IncompleteCover(format!(
                "range has {} member(s), found {} premise(s)",
                elements.len(),
                step.premises.len()
            )));
        }
        for (&p, el) in step.premises.iter().zip(&elements) {
            let expected = self.subst(body, &Term::Var(index.clone(), Sort::ThingVar), el)?;
            let got = self.premise(p)?;
            if *got != expected {
                return Err(KernelError::ShapeMismatch(format!(
                    "coi: step {p} is not the instance at `{}`; expected: {}",
                    print_term(el),
                    print_formula(&expected)
                )));
            }
        }
        Ok(target.clone())
    }

    fn check_mui(&mut self, step: &Step) -> RuleResult {
        let ps = self.premises_exactly(step, 1)?;
        self.side_exactly(step, 2, "family base")?;
        let fam = self.family(&step.side[0])?.clone();
        if fam.prescription != Prescription::Arbitrary {
            return Err(KernelError::ArbitraryViolation(format!(
                "mui requires family `{}` to be prescribed `arbitrary`",
                fam.name
            )));
        }
        for &a in &self.scope {
            if mentions_family(&self.checked[&a].formula, &fam.name, &fam.index) {
                return Err(KernelError::ArbitraryViolation(format!(
                    "family `{}` occurs in the open assumption of step {a}",
                    fam.name
                )));
            }
        }
        let base = self.parse_base_token(&step.side[1], &fam.index)?;
        let premise = ps[0].clone();
        let range = self.family_occurrence_range(&premise, &fam)?;
        if mentions_family(&premise, &base, &fam.index) {
            return Err(KernelError::NameCollision(base));
        }
        let body = rename_family_var(&premise, &fam.name, &base, &fam.index)?;
        Ok(Formula::MultiForall {
            base,
            index: fam.index.clone(),
            range,
            body: Box::new(body),
        })
    }

    fn check_mei(&mut self, step: &Step) -> RuleResult {
        let ps = self.premises_exactly(step, 1)?;
        self.side_exactly(step, 2, "family base")?;
        let fam = self.family(&step.side[0])?.clone();
        let base = self.parse_base_token(&step.side[1], &fam.index)?;
        let premise = ps[0].clone();
        if mentions_family(&premise, &base, &fam.index) {
            return Err(KernelError::NameCollision(base));
        }
        let (body, range) = match &fam.prescription {
            Prescription::Arbitrary => {
                let range = self.family_occurrence_range(&premise, &fam)?;
                let body = rename_family_var(&premise, &fam.name, &base, &fam.index)?;
                (body, range)
            }
            Prescription::MapsTerm(t) => {
                let mut range = None;
                let body = fold_images_to_iotas(&premise, &fam, t, &base, &mut range)?;
                let range = range.ok_or_else(|| {
                    KernelError::ShapeMismatch(format!(
                        "mei: no conjunctor instance of family `{}` found",
                        fam.name
                    ))
                })?;
                (body, range)
            }
            _ => {
                // Symbolic prescriptions keep their iota images; rewriting the
                // family name back to a bound base variable suffices.
                let range = self.family_occurrence_range(&premise, &fam)?;
                let body = rename_family_var(&premise, &fam.name, &base, &fam.index)?;
                (body, range)
            }
        };
        Ok(Formula::MultiExists {
            base,
            index: fam.index.clone(),
            range,
            body: Box::new(body),
        })
    }

    fn parse_base_token(&self, tok: &str, index: &str) -> Result<String, KernelError> {
        if tok.contains('{') {
            match self.parse_side_term(tok)? {
                Term::Var(n, Sort::UrFamily(i)) if i == index => Ok(n),
                other => Err(KernelError::BadSideData(format!(
                    "`{}` is not a family variable over `{index}`",
                    print_term(&other)
                ))),
            }
        } else if valid_name(tok) && !self.reg.contains(tok) {
            Ok(tok.to_string())
        } else {
            Err(KernelError::BadSideData(format!("invalid base variable `{tok}`")))
        }
    }

    /// The common constant range of the conjunctors mentioning the family.
    fn family_occurrence_range(
        &self,
        f: &Formula,
        fam: &Family,
    ) -> Result<Term, KernelError> {
        let mut ranges = Vec::new();
        collect_family_ranges(f, &fam.name, &fam.index, &mut ranges);
        let Some(first) = ranges.first().cloned() else {
            return Err(KernelError::ShapeMismatch(format!(
                "no conjunctor over family `{}` found in the premise",
                fam.name
            )));
        };
        if ranges.iter().any(|r| *r != first) {
            return Err(KernelError::ShapeMismatch(format!(
                "family `{}` occurs under conjunctors with different ranges",
                fam.name
            )));
        }
        if !term_vars(&first).is_empty() {
            return Err(KernelError::NotAConstant(print_term(&first)));
        }
        Ok(first)
    }

    fn check_gen(&mut self, step: &Step) -> RuleResult {
        let ps = self.premises_exactly(step, 1)?;
        self.side_exactly(step, 2, "constant variable")?;
        let chat = &step.side[0];
        match self.reg.get(chat) {
            Some(ConstKind::Set { .. }) => {}
            Some(_) => {
                return Err(KernelError::SortMismatch(format!(
                    "`{chat}` is not a set constant"
                )))
            }
            None => return Err(KernelError::NotAConstant(chat.clone())),
        }
        if step.rule == RuleTag::GenA {
            self.arbitrary_ok(chat, "gen-a")?;
        }
        if !occurs_as_range_constant(ps[0], chat) {
            return Err(KernelError::ShapeMismatch(format!(
                "`{chat}` does not occur as an operator range; use {} instead",
                if step.rule == RuleTag::GenA { "all-i" } else { "ex-i" }
            )));
        }
        let v = &step.side[1];
        if !valid_name(v) || simple_var_sort(v) != Sort::SetVar || self.reg.contains(v) {
            return Err(KernelError::BadSideData(format!(
                "`{v}` is not a set variable"
            )));
        }
        let body = self.subst(
            ps[0],
            &Term::Constant(chat.clone()),
            &Term::Var(v.clone(), Sort::SetVar),
        )?;
        Ok(if step.rule == RuleTag::GenA {
            Formula::Forall(v.clone(), Sort::SetVar, Box::new(body))
        } else {
            Formula::Exists(v.clone(), Sort::SetVar, Box::new(body))
        })
    }

    fn run(&mut self) -> Verdict {
        if !self.script.steps.is_empty() && self.script.goal.is_none() {
            return Verdict::Rejected { step: 0, reason: KernelError::MissingGoal };
        }
        for step in &self.script.steps {
            let derived = if step.rule == RuleTag::Discharge {
                match self.check_discharge(step) {
                    Ok(f) => f,
                    Err(reason) => return Verdict::Rejected { step: step.id, reason },
                }
            } else {
                match self.check_step(step) {
                    Ok(f) => f,
                    Err(reason) => return Verdict::Rejected { step: step.id, reason },
                }
            };
            // The recorded formula must match the derivation exactly.
            match &step.formula {
                None => {
                    return Verdict::Rejected {
                        step: step.id,
                        reason: KernelError::Placeholder { derived: print_formula(&derived) },
                    };
                }
                Some(rec) if *rec != derived => {
                    // Roll back a scope opened by a mismatched assumption.
                    if step.rule == RuleTag::Discharge && step.premises.is_empty() {
                        self.scope.pop();
                    }
                    return Verdict::Rejected {
                        step: step.id,
                        reason: KernelError::FormulaMismatch {
                            derived: print_formula(&derived),
                        },
                    };
                }
                Some(_) => {}
            }
            let report = check_wff(&derived, &self.reg);
            if !report.ok {
                return Verdict::Rejected {
                    step: step.id,
                    reason: KernelError::NotAWff(
                        report
                            .violations
                            .first()
                            .map(|v| v.to_string())
                            .unwrap_or_default(),
                    ),
                };
            }
            if !is_sentence(&derived) {
                // Declared families act as constants: a prescription defines
                // the family member at every index, so `u{a+}` with `a` bound
                // leaves nothing open. Only other free variables are errors.
                let occ = crate::binding::occurrences(&derived);
                let family_forms: BTreeSet<String> = self
                    .families
                    .values()
                    .map(|f| {
                        crate::binding::display_var(
                            &f.name,
                            &Sort::UrFamily(f.index.clone()),
                        )
                    })
                    .collect();
                let stray: Vec<String> = occ
                    .free
                    .into_iter()
                    .filter(|v| !family_forms.contains(v))
                    .collect();
                if !stray.is_empty() {
                    return Verdict::Rejected {
                        step: step.id,
                        reason: KernelError::NotASentence(stray.join(", ")),
                    };
                }
            }
            self.trace.push(format!(
                "{}{}. {} : {}",
                "  ".repeat(self.scope.len().saturating_sub(usize::from(
                    step.rule == RuleTag::Discharge && step.premises.is_empty()
                ))),
                step.id,
                step.rule.name(),
                print_formula(&derived)
            ));
            self.checked.insert(
                step.id,
                CheckedStep { formula: derived, chain: self.scope.clone() },
            );
        }
        if !self.scope.is_empty() {
            return Verdict::Rejected {
                step: self.script.steps.last().map(|s| s.id).unwrap_or(0),
                reason: KernelError::OpenAssumptions(self.scope.clone()),
            };
        }
        if let Some(goal) = &self.script.goal {
            match self.script.steps.last() {
                None => {
                    return Verdict::Rejected {
                        step: 0,
                        reason: KernelError::GoalMismatch { derived: "nothing".into() },
                    }
                }
                Some(last) => {
                    let lf = &self.checked[&last.id].formula;
                    if lf != goal {
                        return Verdict::Rejected {
                            step: last.id,
                            reason: KernelError::GoalMismatch {
                                derived: print_formula(lf),
                            },
                        };
                    }
                }
            }
        }
        Verdict::Accepted
    }

    fn check_discharge(&mut self, step: &Step) -> RuleResult {
        match step.premises.len() {
            0 => {
                // Opens an assumption: the recorded formula itself.
                let Some(f) = &step.formula else {
                    return Err(KernelError::PlaceholderUnresolvable);
                };
                self.scope.push(step.id);
                Ok(f.clone())
            }
            2 => {
                let i = step.premises[0];
                let j = step.premises[1];
                match self.scope.last() {
                    Some(&innermost) if innermost == i => {}
                    _ => {
                        return Err(KernelError::ShapeMismatch(format!(
                            "discharge must close the innermost open assumption, which is {}",
                            self.scope
                                .last()
                                .map(|s| s.to_string())
                                .unwrap_or_else(|| "absent".into())
                        )));
                    }
                }
                let fi = self.premise(i)?.clone();
                let fj = self.premise(j)?.clone();
                self.scope.pop();
                Ok(Formula::Implies(Box::new(fi), Box::new(fj)))
            }
            n => Err(KernelError::WrongPremiseCount {
                rule: "discharge",
                expected: "0 (open) or 2 (close)",
                found: n,
            }),
        }
    }
}

fn validate_family(f: &Family, reg: &Registry) -> Result<(), KernelError> {
    let only_index = |vars: Vec<(String, Sort)>| -> Result<(), KernelError> {
        for (n, s) in vars {
            if !(n == f.index && s == Sort::ThingVar) {
                return Err(KernelError::BadDeclaration(format!(
                    "family `{}` prescription mentions `{}` besides the index",
                    f.name,
                    crate::binding::display_var(&n, &s)
                )));
            }
        }
        Ok(())
    };
    match &f.prescription {
        Prescription::MapsTerm(t) => only_index(term_vars(t)),
        Prescription::Cases { guard, then_t, else_t } => {
            only_index(formula_vars(guard))?;
            only_index(term_vars(then_t))?;
            only_index(term_vars(else_t))
        }
        Prescription::ViaIota { phi, value_var, .. } => {
            let _ = reg;
            for (n, s) in formula_vars(phi) {
                let is_index = n == f.index && s == Sort::ThingVar;
                let is_value = n == *value_var && s == Sort::ThingVar;
                if !is_index && !is_value {
                    return Err(KernelError::BadDeclaration(format!(
                        "family `{}` prescription mentions `{}` besides index and value",
                        f.name,
                        crate::binding::display_var(&n, &s)
                    )));
                }
            }
            Ok(())
        }
        Prescription::Arbitrary => Ok(()),
    }
}

/// Does `x` (a set variable) occur as the range of a conjunctor or multiple
/// quantifier in the formula?
fn occurs_as_range_var(f: &Formula, x: &str) -> bool {
    let range_is_x =
        |r: &Term| matches!(r, Term::Var(n, Sort::SetVar) if n == x);
    match f {
        Formula::MultiForall { range, body, .. }
        | Formula::MultiExists { range, body, .. }
        | Formula::BigAnd { range, body, .. } => {
            range_is_x(range) || occurs_as_range_var(body, x)
        }
        Formula::Not(g) => occurs_as_range_var(g, x),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            occurs_as_range_var(a, x) || occurs_as_range_var(b, x)
        }
        Formula::Forall(v, s, body) | Formula::Exists(v, s, body) => {
            if v == x && *s == Sort::SetVar {
                false
            } else {
                occurs_as_range_var(body, x)
            }
        }
        _ => false,
    }
}

/// Renames every occurrence of the family variable `old{index+}` to
/// `new{index+}`. Unlike capture-avoiding substitution, the subscript index
/// keeps referring to whatever binds it at the occurrence site; families are
/// indexed wholesale, so a rename under the conjunctor binding the index is
/// exactly what the multiple-quantifier rules need. A binder that re-binds
/// `old` over the same index shadows the rename; a binder over `new` that
/// encloses an occurrence still to be renamed is a collision.
fn rename_family_var(
    f: &Formula,
    old: &str,
    new: &str,
    index: &str,
) -> Result<Formula, KernelError> {
    fn go_term(t: &Term, old: &str, new: &str, index: &str) -> Result<Term, KernelError> {
        Ok(match t {
            Term::Constant(_) => t.clone(),
            Term::Var(n, Sort::UrFamily(i)) if n == old && i == index => {
                Term::Var(new.to_string(), Sort::UrFamily(i.clone()))
            }
            Term::Var(n, Sort::FnOnConstant(sub)) => Term::Var(
                n.clone(),
                Sort::FnOnConstant(Box::new(go_term(sub, old, new, index)?)),
            ),
            Term::Var(..) => t.clone(),
            Term::Singleton(u) => Term::Singleton(Box::new(go_term(u, old, new, index)?)),
            Term::Iota { bound, body } => Term::Iota {
                bound: bound.clone(),
                body: Box::new(go(body, old, new, index)?),
            },
        })
    }
    fn shadows(name: &str, sort: &Sort, who: &str, index: &str) -> bool {
        name == who && matches!(sort, Sort::UrFamily(i) if i == index)
    }
    fn go(f: &Formula, old: &str, new: &str, index: &str) -> Result<Formula, KernelError> {
        let t = |t: &Term| go_term(t, old, new, index);
        Ok(match f {
            Formula::Eq(a, b) => Formula::Eq(t(a)?, t(b)?),
            Formula::Mem(a, b) => Formula::Mem(t(a)?, t(b)?),
            Formula::Surj(a, b, c) => Formula::Surj(t(a)?, t(b)?, t(c)?),
            Formula::MapsTo(a, b, c) => Formula::MapsTo(t(a)?, t(b)?, t(c)?),
            Formula::Not(g) => Formula::Not(Box::new(go(g, old, new, index)?)),
            Formula::And(a, b) => Formula::And(
                Box::new(go(a, old, new, index)?),
                Box::new(go(b, old, new, index)?),
            ),
            Formula::Or(a, b) => Formula::Or(
                Box::new(go(a, old, new, index)?),
                Box::new(go(b, old, new, index)?),
            ),
            Formula::Implies(a, b) => Formula::Implies(
                Box::new(go(a, old, new, index)?),
                Box::new(go(b, old, new, index)?),
            ),
            Formula::Iff(a, b) => Formula::Iff(
                Box::new(go(a, old, new, index)?),
                Box::new(go(b, old, new, index)?),
            ),
            Formula::Forall(v, s, body) | Formula::Exists(v, s, body) => {
                let rebuilt_body = if shadows(v, s, old, index) {
                    (**body).clone()
                } else if shadows(v, s, new, index) && mentions_family(body, old, index) {
                    return Err(KernelError::NameCollision(new.to_string()));
                } else {
                    go(body, old, new, index)?
                };
                let s = match s {
                    Sort::FnOnConstant(sub) => {
                        Sort::FnOnConstant(Box::new(t(sub)?))
                    }
                    other => other.clone(),
                };
                match f {
                    Formula::Forall(..) => Formula::Forall(v.clone(), s, Box::new(rebuilt_body)),
                    _ => Formula::Exists(v.clone(), s, Box::new(rebuilt_body)),
                }
            }
            Formula::MultiForall { base, index: i2, range, body }
            | Formula::MultiExists { base, index: i2, range, body } => {
                let range = t(range)?;
                let rebuilt_body = if base == old && i2 == index {
                    (**body).clone()
                } else if base == new && i2 == index && mentions_family(body, old, index) {
                    return Err(KernelError::NameCollision(new.to_string()));
                } else {
                    go(body, old, new, index)?
                };
                match f {
                    Formula::MultiForall { .. } => Formula::MultiForall {
                        base: base.clone(),
                        index: i2.clone(),
                        range,
                        body: Box::new(rebuilt_body),
                    },
                    _ => Formula::MultiExists {
                        base: base.clone(),
                        index: i2.clone(),
                        range,
                        body: Box::new(rebuilt_body),
                    },
                }
            }
            Formula::BigAnd { index: i2, range, body } => Formula::BigAnd {
                index: i2.clone(),
                range: t(range)?,
                body: Box::new(go(body, old, new, index)?),
            },
            Formula::SchemaHole { .. } => f.clone(),
        })
    }
    go(f, old, new, index)
}

fn mentions_family(f: &Formula, name: &str, index: &str) -> bool {
    formula_vars(f)
        .iter()
        .any(|(n, s)| n == name && *s == Sort::UrFamily(index.to_string()))
}

fn collect_family_ranges(f: &Formula, name: &str, index: &str, out: &mut Vec<Term>) {
    match f {
        Formula::BigAnd { range, body, .. } => {
            if mentions_family(body, name, index) {
                out.push(range.clone());
            }
            collect_family_ranges(body, name, index, out);
        }
        Formula::MultiForall { range: _, body, .. }
        | Formula::MultiExists { range: _, body, .. } => {
            collect_family_ranges(body, name, index, out);
        }
        Formula::Not(g) => collect_family_ranges(g, name, index, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            collect_family_ranges(a, name, index, out);
            collect_family_ranges(b, name, index, out);
        }
        Formula::Forall(_, _, body) | Formula::Exists(_, _, body) => {
            collect_family_ranges(body, name, index, out);
        }
        _ => {}
    }
}

fn is_numeral(t: &Term) -> bool {
    match t {
        Term::Constant(c) => c == "empty",
        Term::Singleton(inner) => is_numeral(inner),
        _ => false,
    }
}

/// Substitutes inside a term by wrapping it in a disposable equation.
fn subst_in_term(
    t: &Term,
    x: &Term,
    u: &Term,
    reg: &Registry,
) -> Result<Term, KernelError> {
    let wrapped = Formula::Eq(Term::Constant("empty".into()), t.clone());
    match substitute(&wrapped, x, u, reg)? {
        Formula::Eq(_, out) => Ok(out),
        _ => unreachable!("substitution preserves the equation shape"),
    }
}

/// Replaces `iota b.(fam{a+} : a |-> b)` images of the named family by the
/// prescription term (eager reduction for explicit graph prescriptions).
fn reduce_prescribed_iotas(
    f: &Formula,
    fam_name: &str,
    index: &str,
    prescription: &Term,
    reg: &Registry,
) -> Result<Formula, KernelError> {
    let reduce_term = |t: &Term| -> Result<Term, KernelError> {
        if let Term::Iota { body, .. } = t {
            if let Formula::MapsTo(ifun, iarg, _) = body.as_ref() {
                if matches!(ifun, Term::Var(n, _) if n == fam_name) {
                    return subst_in_term(
                        prescription,
                        &Term::Var(index.to_string(), Sort::ThingVar),
                        iarg,
                        reg,
                    );
                }
            }
        }
        Ok(t.clone())
    };
    fn walk(
        f: &Formula,
        red: &dyn Fn(&Term) -> Result<Term, KernelError>,
    ) -> Result<Formula, KernelError> {
        Ok(match f {
            Formula::Eq(a, b) => Formula::Eq(red(a)?, red(b)?),
            Formula::Mem(a, b) => Formula::Mem(red(a)?, red(b)?),
            Formula::Surj(a, b, c) => Formula::Surj(red(a)?, red(b)?, red(c)?),
            Formula::MapsTo(a, b, c) => Formula::MapsTo(red(a)?, red(b)?, red(c)?),
            Formula::Not(g) => Formula::Not(Box::new(walk(g, red)?)),
            Formula::And(a, b) => {
                Formula::And(Box::new(walk(a, red)?), Box::new(walk(b, red)?))
            }
            Formula::Or(a, b) => {
                Formula::Or(Box::new(walk(a, red)?), Box::new(walk(b, red)?))
            }
            Formula::Implies(a, b) => {
                Formula::Implies(Box::new(walk(a, red)?), Box::new(walk(b, red)?))
            }
            Formula::Iff(a, b) => {
                Formula::Iff(Box::new(walk(a, red)?), Box::new(walk(b, red)?))
            }
            Formula::Forall(v, s, body) => {
                Formula::Forall(v.clone(), s.clone(), Box::new(walk(body, red)?))
            }
            Formula::Exists(v, s, body) => {
                Formula::Exists(v.clone(), s.clone(), Box::new(walk(body, red)?))
            }
            Formula::MultiForall { base, index, range, body } => Formula::MultiForall {
                base: base.clone(),
                index: index.clone(),
                range: range.clone(),
                body: Box::new(walk(body, red)?),
            },
            Formula::MultiExists { base, index, range, body } => Formula::MultiExists {
                base: base.clone(),
                index: index.clone(),
                range: range.clone(),
                body: Box::new(walk(body, red)?),
            },
            Formula::BigAnd { index, range, body } => Formula::BigAnd {
                index: index.clone(),
                range: range.clone(),
                body: Box::new(walk(body, red)?),
            },
            Formula::SchemaHole { name, args } => Formula::SchemaHole {
                name: name.clone(),
                args: args.iter().map(red).collect::<Result<_, _>>()?,
            },
        })
    }
    walk(f, &reduce_term)
}

/// For `mei` over an explicitly prescribed family: rewrite conjunctor bodies
/// `F : a |-> t(a)` back into `F : a |-> iota b.(base{a+} : a |-> b)`.
fn fold_images_to_iotas(
    f: &Formula,
    fam: &Family,
    prescription: &Term,
    base: &str,
    found_range: &mut Option<Term>,
) -> Result<Formula, KernelError> {
    Ok(match f {
        Formula::BigAnd { index, range, body } if *index == fam.index => {
            if let Formula::MapsTo(fun, arg, img) = body.as_ref() {
                if *img == *prescription
                    && *arg == Term::Var(fam.index.clone(), Sort::ThingVar)
                {
                    if found_range.is_none() {
                        *found_range = Some(range.clone());
                    }
                    let bound = crate::binding::primed("b", |cand| {
                        formula_vars(body).iter().any(|(n, _)| n == cand)
                            || cand == fam.index
                            || cand == base
                    });
                    let iota = Term::Iota {
                        bound: bound.clone(),
                        body: Box::new(Formula::MapsTo(
                            Term::Var(base.to_string(), Sort::UrFamily(fam.index.clone())),
                            arg.clone(),
                            Term::Var(bound, Sort::ThingVar),
                        )),
                    };
                    return Ok(Formula::BigAnd {
                        index: index.clone(),
                        range: range.clone(),
                        body: Box::new(Formula::MapsTo(fun.clone(), arg.clone(), iota)),
                    });
                }
            }
            Formula::BigAnd {
                index: index.clone(),
                range: range.clone(),
                body: Box::new(fold_images_to_iotas(body, fam, prescription, base, found_range)?),
            }
        }
        Formula::Not(g) => {
            Formula::Not(Box::new(fold_images_to_iotas(g, fam, prescription, base, found_range)?))
        }
        Formula::And(a, b) => Formula::And(
            Box::new(fold_images_to_iotas(a, fam, prescription, base, found_range)?),
            Box::new(fold_images_to_iotas(b, fam, prescription, base, found_range)?),
        ),
        Formula::Or(a, b) => Formula::Or(
            Box::new(fold_images_to_iotas(a, fam, prescription, base, found_range)?),
            Box::new(fold_images_to_iotas(b, fam, prescription, base, found_range)?),
        ),
        Formula::Implies(a, b) => Formula::Implies(
            Box::new(fold_images_to_iotas(a, fam, prescription, base, found_range)?),
            Box::new(fold_images_to_iotas(b, fam, prescription, base, found_range)?),
        ),
        Formula::Iff(a, b) => Formula::Iff(
            Box::new(fold_images_to_iotas(a, fam, prescription, base, found_range)?),
            Box::new(fold_images_to_iotas(b, fam, prescription, base, found_range)?),
        ),
        Formula::Forall(v, s, body) => Formula::Forall(
            v.clone(),
            s.clone(),
            Box::new(fold_images_to_iotas(body, fam, prescription, base, found_range)?),
        ),
        Formula::Exists(v, s, body) => Formula::Exists(
            v.clone(),
            s.clone(),
            Box::new(fold_images_to_iotas(body, fam, prescription, base, found_range)?),
        ),
        other => other.clone(),
    })
}

/// Checks a proof script.
pub fn check_proof(script: &ProofScript) -> Verdict {
    check_proof_trace(script).0
}

/// Checks a proof script, returning the verdict together with one trace line
/// per successfully checked step.
pub fn check_proof_trace(script: &ProofScript) -> (Verdict, Vec<String>) {
    let mut checker = match Checker::new(script) {
        Ok(c) => c,
        Err(reason) => return (Verdict::Rejected { step: 0, reason }, Vec::new()),
    };
    let verdict = checker.run();
    (verdict, checker.trace)
}
