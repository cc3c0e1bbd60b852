//! Concrete syntax: lexer, parser, and canonical printer.
//!
//! The surface language is plain ASCII. Sorts are encoded by sigils: an
//! uppercase identifier is a set variable, a lowercase one a thing variable,
//! and `f{...}` a function variable whose subscript decides its sort.
//! Identifiers registered as constants (built-ins plus declared names) parse
//! as constants instead.
//!
//! Several sugars expand during parsing and are not re-sugared by the
//! printer: `t1 != t2`, `A sub X`, `f : X -> Y`, membership-bounded
//! quantifiers (`forall a in X .`, `exists a in X .`), unique existence
//! (`exists! b .`), numerals (singleton towers over `empty`), and two-tuples
//! `<t1,t2>`. The printer re-sugars exactly one pattern: `forall X != empty .`
//! for a universal set quantifier guarded by nonemptiness.

use std::fmt;

use crate::binding::{primed, substitute};
use crate::syntax::{
    fn_sort_for_subscript, formula_vars, simple_var_sort, term_vars, Formula, Registry, Sort,
    Term,
};
use crate::theory::{two_tuple_eq, zermelo_ordinal};

/// Parse error with 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at {}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Dot,
    Comma,
    Plus,
    Underscore,
    Colon,
    Eq,
    Neq,
    Lt,
    Gt,
    Arrow,
    SurjArrow,
    MapsArrow,
    ImpliesOp,
    IffOp,
    Wedge,
    Bang,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Num(n) => return write!(f, "`{n}`"),
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::Dot => "`.`",
            Tok::Comma => "`,`",
            Tok::Plus => "`+`",
            Tok::Underscore => "`_`",
            Tok::Colon => "`:`",
            Tok::Eq => "`=`",
            Tok::Neq => "`!=`",
            Tok::Lt => "`<`",
            Tok::Gt => "`>`",
            Tok::Arrow => "`->`",
            Tok::SurjArrow => "`->>`",
            Tok::MapsArrow => "`|->`",
            Tok::ImpliesOp => "`=>`",
            Tok::IffOp => "`<=>`",
            Tok::Wedge => "`/\\`",
            Tok::Bang => "`!`",
        };
        f.write_str(s)
    }
}

const KEYWORDS: &[&str] = &["forall", "exists", "not", "and", "or", "in", "sub", "iota"];

fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut advance = |i: &mut usize, n: usize| {
            for k in 0..n {
                if chars[*i + k] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
            }
            *i += n;
        };
        if c == '\n' || c.is_whitespace() {
            advance(&mut i, 1);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, 1);
            }
            continue;
        }
        if !c.is_ascii() {
            return Err(ParseError {
                message: format!("unexpected character `{c}`"),
                line: tl,
                col: tc,
            });
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let two: &str = &rest[..rest.len().min(2)];
        if rest.starts_with("<=>") {
            toks.push((Tok::IffOp, tl, tc));
            advance(&mut i, 3);
            continue;
        }
        if rest.starts_with("->>") {
            toks.push((Tok::SurjArrow, tl, tc));
            advance(&mut i, 3);
            continue;
        }
        if rest.starts_with("|->") {
            toks.push((Tok::MapsArrow, tl, tc));
            advance(&mut i, 3);
            continue;
        }
        if two == "->" {
            toks.push((Tok::Arrow, tl, tc));
            advance(&mut i, 2);
            continue;
        }
        if two == "=>" {
            toks.push((Tok::ImpliesOp, tl, tc));
            advance(&mut i, 2);
            continue;
        }
        if two == "!=" {
            toks.push((Tok::Neq, tl, tc));
            advance(&mut i, 2);
            continue;
        }
        if two == "/\\" {
            toks.push((Tok::Wedge, tl, tc));
            advance(&mut i, 2);
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '.' => Tok::Dot,
            ',' => Tok::Comma,
            '+' => Tok::Plus,
            '_' => Tok::Underscore,
            ':' => Tok::Colon,
            '=' => Tok::Eq,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            '!' => Tok::Bang,
            _ => {
                if c.is_ascii_alphabetic() {
                    let start = i;
                    let mut len = 0;
                    while i + len < chars.len()
                        && (chars[i + len].is_ascii_alphanumeric()
                            || chars[i + len] == '_'
                            || chars[i + len] == '\'')
                    {
                        len += 1;
                    }
                    let word: String = chars[start..start + len].iter().collect();
                    toks.push((Tok::Ident(word), tl, tc));
                    advance(&mut i, len);
                    continue;
                }
                if c.is_ascii_digit() {
                    let start = i;
                    let mut len = 0;
                    while i + len < chars.len() && chars[i + len].is_ascii_digit() {
                        len += 1;
                    }
                    let word: String = chars[start..start + len].iter().collect();
                    let n: u64 = word.parse().map_err(|_| ParseError {
                        message: format!("numeral `{word}` out of range"),
                        line: tl,
                        col: tc,
                    })?;
                    toks.push((Tok::Num(n), tl, tc));
                    advance(&mut i, len);
                    continue;
                }
                return Err(ParseError {
                    message: format!("unexpected character `{c}`"),
                    line: tl,
                    col: tc,
                });
            }
        };
        toks.push((tok, tl, tc));
        advance(&mut i, 1);
    }
    Ok(toks)
}

/// Surface term: a term that may still contain two-tuples, which are
/// eliminated when the enclosing atom is built.
#[derive(Debug, Clone, PartialEq, Eq)]
enum STerm {
    Plain(Term),
    Tuple(Box<STerm>, Box<STerm>),
    Single(Box<STerm>),
}

impl STerm {
    fn has_tuple(&self) -> bool {
        match self {
            STerm::Plain(_) => false,
            STerm::Tuple(..) => true,
            STerm::Single(inner) => inner.has_tuple(),
        }
    }

    fn plain(self) -> Option<Term> {
        match self {
            STerm::Plain(t) => Some(t),
            STerm::Single(inner) => {
                inner.plain().map(|t| Term::Singleton(Box::new(t)))
            }
            STerm::Tuple(..) => None,
        }
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    reg: &'a Registry,
}

impl<'a> Parser<'a> {
    fn err_at(&self, message: String) -> ParseError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|(_, l, c)| (*l, *c))
            .or_else(|| self.toks.last().map(|(_, l, c)| (*l, *c + 1)))
            .unwrap_or((1, 1));
        ParseError { message, line, col }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn next(&mut self) -> Result<Tok, ParseError> {
        let t = self
            .peek()
            .cloned()
            .ok_or_else(|| self.err_at("unexpected end of input".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err_at(format!("expected {want}, found {t}"))),
            None => Err(self.err_at(format!("expected {want}, found end of input"))),
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.next()? {
            Tok::Ident(s) => Ok(s),
            t => {
                self.pos -= 1;
                Err(self.err_at(format!("expected an identifier, found {t}")))
            }
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err_at(format!("expected `{kw}`, found {t}"))),
            None => Err(self.err_at(format!("expected `{kw}`, found end of input"))),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    // ----- formulas -----

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.implies()?;
        while matches!(self.peek(), Some(Tok::IffOp)) {
            self.pos += 1;
            let rhs = self.implies()?;
            lhs = Formula::Iff(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if matches!(self.peek(), Some(Tok::ImpliesOp)) {
            self.pos += 1;
            let rhs = self.implies()?;
            return Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while self.at_keyword("or") {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = Formula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.at_keyword("and") {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Formula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == "not" => {
                self.pos += 1;
                let inner = self.unary()?;
                Ok(Formula::Not(Box::new(inner)))
            }
            Some(Tok::Ident(s)) if s == "forall" || s == "exists" => self.quantifier(),
            Some(Tok::Wedge) => {
                self.pos += 1;
                let (index, range) = self.index_spec()?;
                self.expect(&Tok::Dot)?;
                let body = self.formula()?;
                Ok(Formula::BigAnd { index, range, body: Box::new(body) })
            }
            Some(Tok::LParen) => {
                // Lookahead: a multiple quantifier is `( forall|exists fam )`
                // followed by `_`; anything else here is a parenthesized
                // formula or a term-led atom.
                let close = self.matching_paren()?;
                match self.toks.get(close + 1).map(|(t, _, _)| t) {
                    Some(Tok::Underscore) => self.multi_quantifier(),
                    Some(Tok::Plus)
                    | Some(Tok::Eq)
                    | Some(Tok::Neq)
                    | Some(Tok::Colon) => self.atom(),
                    Some(Tok::Ident(s)) if s == "in" || s == "sub" => self.atom(),
                    _ => {
                        self.pos += 1;
                        let f = self.formula()?;
                        self.expect(&Tok::RParen)?;
                        Ok(f)
                    }
                }
            }
            Some(_) => self.atom(),
            None => Err(self.err_at("expected a formula".into())),
        }
    }

    /// Index of the `)` matching the `(` at the current position.
    fn matching_paren(&self) -> Result<usize, ParseError> {
        let mut depth = 0usize;
        for (k, (t, _, _)) in self.toks.iter().enumerate().skip(self.pos) {
            match t {
                Tok::LParen => depth += 1,
                Tok::RParen => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(k);
                    }
                }
                _ => {}
            }
        }
        Err(self.err_at("unbalanced `(`".into()))
    }

    fn index_spec(&mut self) -> Result<(String, Term), ParseError> {
        self.expect(&Tok::Underscore)?;
        self.expect(&Tok::LBrace)?;
        let index = self.expect_ident()?;
        if simple_var_sort(&index) != Sort::ThingVar || self.reg.contains(&index) {
            return Err(self.err_at(format!("index `{index}` must be a thing variable")));
        }
        self.expect_keyword("in")?;
        let range = self.plain_term()?;
        self.expect(&Tok::RBrace)?;
        Ok((index, range))
    }

    fn multi_quantifier(&mut self) -> Result<Formula, ParseError> {
        self.expect(&Tok::LParen)?;
        let is_forall = if self.at_keyword("forall") {
            self.pos += 1;
            true
        } else {
            self.expect_keyword("exists")?;
            false
        };
        let base = self.expect_ident()?;
        self.expect(&Tok::LBrace)?;
        let fam_index = self.expect_ident()?;
        self.expect(&Tok::Plus)?;
        self.expect(&Tok::RBrace)?;
        self.expect(&Tok::RParen)?;
        let (index, range) = self.index_spec()?;
        if index != fam_index {
            return Err(self.err_at(format!(
                "family subscript `{fam_index}+` does not match operator index `{index}`"
            )));
        }
        self.expect(&Tok::Dot)?;
        let body = self.formula()?;
        Ok(if is_forall {
            Formula::MultiForall { base, index, range, body: Box::new(body) }
        } else {
            Formula::MultiExists { base, index, range, body: Box::new(body) }
        })
    }

    fn binder_var(&mut self) -> Result<(String, Sort), ParseError> {
        let name = self.expect_ident()?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(self.err_at(format!("`{name}` is a reserved word")));
        }
        if self.reg.contains(&name) {
            return Err(self.err_at(format!("cannot bind constant `{name}`")));
        }
        if matches!(self.peek(), Some(Tok::LBrace)) {
            self.pos += 1;
            let sub = self.plain_term()?;
            self.expect(&Tok::RBrace)?;
            Ok((name, fn_sort_for_subscript(sub)))
        } else {
            let sort = simple_var_sort(&name);
            Ok((name, sort))
        }
    }

    fn quantifier(&mut self) -> Result<Formula, ParseError> {
        let is_forall = if self.at_keyword("forall") {
            self.pos += 1;
            true
        } else {
            self.expect_keyword("exists")?;
            false
        };
        let unique = if matches!(self.peek(), Some(Tok::Bang)) {
            if is_forall {
                return Err(self.err_at("`!` is only allowed after `exists`".into()));
            }
            self.pos += 1;
            true
        } else {
            false
        };
        let (name, sort) = self.binder_var()?;
        let var = Term::Var(name.clone(), sort.clone());

        // Optional bounds: `!= empty` (forall over sets) or `in <term>`.
        let mut guard_nonempty = false;
        let mut member_range: Option<Term> = None;
        match self.peek() {
            Some(Tok::Neq) => {
                self.pos += 1;
                self.expect_keyword("empty")?;
                if !is_forall || sort != Sort::SetVar {
                    return Err(self.err_at(
                        "`!= empty` binder sugar requires `forall` over a set variable".into(),
                    ));
                }
                guard_nonempty = true;
            }
            Some(Tok::Ident(s)) if s == "in" => {
                self.pos += 1;
                if unique {
                    return Err(
                        self.err_at("`exists!` cannot be combined with `in` sugar".into())
                    );
                }
                member_range = Some(self.plain_term()?);
            }
            _ => {}
        }
        self.expect(&Tok::Dot)?;
        let body = self.formula()?;

        if unique {
            // exists! b . P  ~>  exists b . (P and forall b' . ([b'\b]P => b' = b))
            let taken: Vec<String> = formula_vars(&body).into_iter().map(|(n, _)| n).collect();
            let primed_name = primed(&name, |cand| {
                cand == name || taken.iter().any(|t| t == cand) || self.reg.contains(cand)
            });
            let primed_var = Term::Var(primed_name.clone(), sort.clone());
            let renamed = substitute(&body, &var, &primed_var, self.reg)
                .map_err(|e| self.err_at(format!("cannot expand `exists!`: {e}")))?;
            let uniqueness = Formula::Forall(
                primed_name,
                sort.clone(),
                Box::new(Formula::Implies(
                    Box::new(renamed),
                    Box::new(Formula::Eq(primed_var, var)),
                )),
            );
            return Ok(Formula::Exists(
                name,
                sort,
                Box::new(Formula::And(Box::new(body), Box::new(uniqueness))),
            ));
        }

        let body = if guard_nonempty {
            Formula::Implies(
                Box::new(Formula::Not(Box::new(Formula::Eq(
                    var,
                    Term::Constant("empty".into()),
                )))),
                Box::new(body),
            )
        } else if let Some(range) = member_range {
            if is_forall {
                Formula::Implies(Box::new(Formula::Mem(var, range)), Box::new(body))
            } else {
                Formula::And(Box::new(Formula::Mem(var, range)), Box::new(body))
            }
        } else {
            body
        };
        Ok(if is_forall {
            Formula::Forall(name, sort, Box::new(body))
        } else {
            Formula::Exists(name, sort, Box::new(body))
        })
    }

    // ----- atoms and terms -----

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.surf_term()?;
        match self.peek().cloned() {
            Some(Tok::Eq) => {
                self.pos += 1;
                let rhs = self.surf_term()?;
                self.lower_atom(AtomKind::Eq, vec![lhs, rhs])
            }
            Some(Tok::Neq) => {
                self.pos += 1;
                let rhs = self.surf_term()?;
                let eq = self.lower_atom(AtomKind::Eq, vec![lhs, rhs])?;
                Ok(Formula::Not(Box::new(eq)))
            }
            Some(Tok::Ident(s)) if s == "in" => {
                self.pos += 1;
                let rhs = self.surf_term()?;
                self.lower_atom(AtomKind::Mem, vec![lhs, rhs])
            }
            Some(Tok::Ident(s)) if s == "sub" => {
                self.pos += 1;
                let rhs = self.surf_term()?;
                let a = self.require_plain(lhs)?;
                let b = self.require_plain(rhs)?;
                Ok(self.subset_formula(&a, &b))
            }
            Some(Tok::Colon) => {
                self.pos += 1;
                let mid = self.surf_term()?;
                match self.next()? {
                    Tok::SurjArrow => {
                        let rhs = self.surf_term()?;
                        self.lower_atom(AtomKind::Surj, vec![lhs, mid, rhs])
                    }
                    Tok::MapsArrow => {
                        let rhs = self.surf_term()?;
                        self.lower_atom(AtomKind::MapsTo, vec![lhs, mid, rhs])
                    }
                    Tok::Arrow => {
                        // f : X -> Y  ~>  exists Z . (f : X ->> Z and Z sub Y)
                        let rhs = self.surf_term()?;
                        let f = self.require_plain(lhs)?;
                        let x = self.require_plain(mid)?;
                        let y = self.require_plain(rhs)?;
                        let mut taken: Vec<String> = Vec::new();
                        for t in [&f, &x, &y] {
                            taken.extend(term_vars(t).into_iter().map(|(n, _)| n));
                        }
                        let z = primed("Z", |cand| {
                            taken.iter().any(|t| t == cand) || self.reg.contains(cand)
                        });
                        let zv = Term::Var(z.clone(), Sort::SetVar);
                        let surj = Formula::Surj(f, x, zv.clone());
                        let sub = self.subset_formula(&zv, &y);
                        Ok(Formula::Exists(
                            z,
                            Sort::SetVar,
                            Box::new(Formula::And(Box::new(surj), Box::new(sub))),
                        ))
                    }
                    t => {
                        self.pos -= 1;
                        Err(self.err_at(format!(
                            "expected `->>`, `|->`, or `->` after `:`, found {t}"
                        )))
                    }
                }
            }
            Some(t) => Err(self.err_at(format!("expected an atom operator, found {t}"))),
            None => Err(self.err_at("expected an atom operator, found end of input".into())),
        }
    }

    /// `a sub b` expands to `forall g . (g in a => g in b)` with `g` fresh.
    fn subset_formula(&self, a: &Term, b: &Term) -> Formula {
        let mut taken: Vec<String> = Vec::new();
        taken.extend(term_vars(a).into_iter().map(|(n, _)| n));
        taken.extend(term_vars(b).into_iter().map(|(n, _)| n));
        let g = primed("g", |cand| taken.iter().any(|t| t == cand) || self.reg.contains(cand));
        let gv = Term::Var(g.clone(), Sort::ThingVar);
        Formula::Forall(
            g,
            Sort::ThingVar,
            Box::new(Formula::Implies(
                Box::new(Formula::Mem(gv.clone(), a.clone())),
                Box::new(Formula::Mem(gv, b.clone())),
            )),
        )
    }

    fn require_plain(&self, s: STerm) -> Result<Term, ParseError> {
        s.plain()
            .ok_or_else(|| self.err_at("a two-tuple is not allowed in this position".into()))
    }

    /// Builds an atom, eliminating two-tuples. An equation with a tuple on
    /// one side and a tuple-free term on the other becomes the membership
    /// characterization of the pair; every other tuple occurrence `<a,b>` is
    /// pulled out as `exists p . (p = <a,b> and ...)`, innermost first.
    fn lower_atom(&self, kind: AtomKind, args: Vec<STerm>) -> Result<Formula, ParseError> {
        if args.iter().all(|a| !a.has_tuple()) {
            let terms: Vec<Term> = args.into_iter().map(|a| a.plain().unwrap()).collect();
            return Ok(build_atom(kind, terms));
        }
        // Direct characterization: t = <a,b> with plain components.
        if kind == AtomKind::Eq && args.len() == 2 {
            let as_pair = |s: &STerm| -> Option<(Term, Term)> {
                if let STerm::Tuple(a, b) = s {
                    match (a.clone().plain(), b.clone().plain()) {
                        (Some(a), Some(b)) => Some((a, b)),
                        _ => None,
                    }
                } else {
                    None
                }
            };
            let (plain_side, tuple_side) = (args[0].clone(), args[1].clone());
            if let (Some(t), Some((a, b))) = (plain_side.clone().plain(), as_pair(&tuple_side)) {
                return Ok(two_tuple_eq(&t, &a, &b, self.reg));
            }
            if let (Some((a, b)), Some(t)) = (as_pair(&plain_side), tuple_side.clone().plain()) {
                return Ok(two_tuple_eq(&t, &a, &b, self.reg));
            }
        }
        // Pull out one innermost tuple and recurse.
        let mut args = args;
        let mut taken: Vec<String> = Vec::new();
        for s in &args {
            collect_sterm_vars(s, &mut taken);
        }
        let p = primed("p", |cand| taken.iter().any(|t| t == cand) || self.reg.contains(cand));
        let pv = Term::Var(p.clone(), Sort::ThingVar);
        let mut pulled: Option<(Term, Term)> = None;
        for s in &mut args {
            if pulled.is_none() {
                pulled = pull_innermost_tuple(s, &pv);
            }
        }
        let (a, b) = pulled.expect("has_tuple implied a tuple exists");
        let inner = self.lower_atom(kind, args)?;
        Ok(Formula::Exists(
            p,
            Sort::ThingVar,
            Box::new(Formula::And(
                Box::new(two_tuple_eq(&pv, &a, &b, self.reg)),
                Box::new(inner),
            )),
        ))
    }

    fn surf_term(&mut self) -> Result<STerm, ParseError> {
        let mut t = self.surf_primary()?;
        while matches!(self.peek(), Some(Tok::Plus)) {
            self.pos += 1;
            t = if t.has_tuple() {
                STerm::Single(Box::new(t))
            } else {
                let p = t.plain().expect("tuple-free surface terms are plain");
                STerm::Plain(Term::Singleton(Box::new(p)))
            };
        }
        Ok(t)
    }

    fn surf_primary(&mut self) -> Result<STerm, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Lt) => {
                self.pos += 1;
                let a = self.surf_term()?;
                self.expect(&Tok::Comma)?;
                let b = self.surf_term()?;
                self.expect(&Tok::Gt)?;
                Ok(STerm::Tuple(Box::new(a), Box::new(b)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.surf_term()?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            Some(Tok::Num(n)) => {
                self.pos += 1;
                let t = zermelo_ordinal(n).map_err(|e| self.err_at(e.to_string()))?;
                Ok(STerm::Plain(t))
            }
            Some(Tok::Ident(s)) if s == "iota" => {
                self.pos += 1;
                Ok(STerm::Plain(self.iota_term()?))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if KEYWORDS.contains(&name.as_str()) {
                    self.pos -= 1;
                    return Err(self.err_at(format!("`{name}` cannot start a term")));
                }
                if matches!(self.peek(), Some(Tok::LBrace)) {
                    if self.reg.contains(&name) {
                        return Err(self.err_at(format!(
                            "constant `{name}` cannot take a subscript"
                        )));
                    }
                    self.pos += 1;
                    let sub = self.plain_term()?;
                    self.expect(&Tok::RBrace)?;
                    return Ok(STerm::Plain(Term::Var(name, fn_sort_for_subscript(sub))));
                }
                if self.reg.contains(&name) {
                    Ok(STerm::Plain(Term::Constant(name)))
                } else {
                    let sort = simple_var_sort(&name);
                    Ok(STerm::Plain(Term::Var(name, sort)))
                }
            }
            Some(t) => Err(self.err_at(format!("expected a term, found {t}"))),
            None => Err(self.err_at("expected a term, found end of input".into())),
        }
    }

    fn iota_term(&mut self) -> Result<Term, ParseError> {
        let bound = self.expect_ident()?;
        if simple_var_sort(&bound) != Sort::ThingVar || self.reg.contains(&bound) {
            return Err(self.err_at(format!(
                "iota binds a thing variable, `{bound}` is not one"
            )));
        }
        self.expect(&Tok::Dot)?;
        self.expect(&Tok::LParen)?;
        let fun = self.plain_term()?;
        self.expect(&Tok::Colon)?;
        let arg = self.plain_term()?;
        self.expect(&Tok::MapsArrow)?;
        let img = self.plain_term()?;
        self.expect(&Tok::RParen)?;
        if img != Term::Var(bound.clone(), Sort::ThingVar) {
            return Err(self.err_at(format!(
                "iota body image must be the bound variable `{bound}`"
            )));
        }
        Ok(Term::Iota {
            bound: bound.clone(),
            body: Box::new(Formula::MapsTo(fun, arg, Term::Var(bound, Sort::ThingVar))),
        })
    }

    fn plain_term(&mut self) -> Result<Term, ParseError> {
        let s = self.surf_term()?;
        self.require_plain(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AtomKind {
    Eq,
    Mem,
    Surj,
    MapsTo,
}

fn build_atom(kind: AtomKind, mut terms: Vec<Term>) -> Formula {
    match kind {
        AtomKind::Eq => {
            let b = terms.pop().unwrap();
            let a = terms.pop().unwrap();
            Formula::Eq(a, b)
        }
        AtomKind::Mem => {
            let b = terms.pop().unwrap();
            let a = terms.pop().unwrap();
            Formula::Mem(a, b)
        }
        AtomKind::Surj => {
            let c = terms.pop().unwrap();
            let b = terms.pop().unwrap();
            let a = terms.pop().unwrap();
            Formula::Surj(a, b, c)
        }
        AtomKind::MapsTo => {
            let c = terms.pop().unwrap();
            let b = terms.pop().unwrap();
            let a = terms.pop().unwrap();
            Formula::MapsTo(a, b, c)
        }
    }
}

fn collect_sterm_vars(s: &STerm, out: &mut Vec<String>) {
    match s {
        STerm::Plain(t) => out.extend(term_vars(t).into_iter().map(|(n, _)| n)),
        STerm::Tuple(a, b) => {
            collect_sterm_vars(a, out);
            collect_sterm_vars(b, out);
        }
        STerm::Single(inner) => collect_sterm_vars(inner, out),
    }
}

/// Replaces the first innermost tuple with `pv`, returning its components.
fn pull_innermost_tuple(s: &mut STerm, pv: &Term) -> Option<(Term, Term)> {
    match s {
        STerm::Plain(_) => None,
        STerm::Tuple(a, b) => {
            if a.has_tuple() {
                return pull_innermost_tuple(a, pv);
            }
            if b.has_tuple() {
                return pull_innermost_tuple(b, pv);
            }
            let at = a.clone().plain().unwrap();
            let bt = b.clone().plain().unwrap();
            *s = STerm::Plain(pv.clone());
            Some((at, bt))
        }
        STerm::Single(inner) => {
            let got = pull_innermost_tuple(inner, pv);
            if got.is_some() {
                if let Some(t) = inner.clone().plain() {
                    *s = STerm::Plain(Term::Singleton(Box::new(t)));
                }
            }
            got
        }
    }
}

/// Parses a single formula; the whole input must be consumed.
pub fn parse_formula(src: &str, reg: &Registry) -> Result<Formula, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, reg };
    let f = p.formula()?;
    if p.pos != p.toks.len() {
        return Err(p.err_at("trailing input after formula".into()));
    }
    Ok(f)
}

/// Parses a single tuple-free term; the whole input must be consumed.
pub fn parse_term_str(src: &str, reg: &Registry) -> Result<Term, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, reg };
    let t = p.plain_term()?;
    if p.pos != p.toks.len() {
        return Err(p.err_at("trailing input after term".into()));
    }
    Ok(t)
}

/// A named formula collection (`.tf` file): lines of
/// `formula <name> : <formula>`, with `#` comments and blank lines.
pub fn parse_tf(src: &str, reg: &Registry) -> Result<Vec<(String, Formula)>, ParseError> {
    let mut out: Vec<(String, Formula)> = Vec::new();
    for (lineno, raw) in src.lines().enumerate() {
        let line = match raw.find('#') {
            Some(k) => &raw[..k],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ParseError { message, line: lineno + 1, col: 1 };
        let rest = line
            .strip_prefix("formula")
            .ok_or_else(|| err("expected `formula <name> : <formula>`".into()))?;
        let rest = rest.trim_start();
        let colon = rest
            .find(':')
            .ok_or_else(|| err("expected `:` after formula name".into()))?;
        let name = rest[..colon].trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(format!("invalid formula name `{name}`")));
        }
        if out.iter().any(|(n, _)| n == name) {
            return Err(err(format!("duplicate formula name `{name}`")));
        }
        let body = &rest[colon + 1..];
        let f = parse_formula(body, reg).map_err(|e| ParseError {
            message: e.message,
            line: lineno + 1,
            col: e.col,
        })?;
        out.push((name.to_string(), f));
    }
    Ok(out)
}

// ----- canonical printer -----

/// Depth of a singleton tower over `empty`, if the term is one.
fn tower_depth(t: &Term) -> Option<u64> {
    match t {
        Term::Constant(c) if c == "empty" => Some(0),
        Term::Singleton(inner) => tower_depth(inner).map(|d| d + 1),
        _ => None,
    }
}

/// Canonical text of a term. Singleton towers over `empty` of height >= 1
/// print as numerals; `empty` itself prints as `empty`.
pub fn print_term(t: &Term) -> String {
    if let Some(d) = tower_depth(t) {
        if d > 0 {
            return d.to_string();
        }
    }
    match t {
        Term::Constant(c) => c.clone(),
        Term::Var(n, s) => match s {
            Sort::SetVar | Sort::ThingVar | Sort::Constant => n.clone(),
            Sort::FnComposite(x) => format!("{n}{{{x}}}"),
            Sort::UrFamily(a) => format!("{n}{{{a}+}}"),
            Sort::FnOnConstant(sub) => format!("{n}{{{}}}", print_term(sub)),
        },
        Term::Singleton(inner) => match inner.as_ref() {
            Term::Iota { .. } => format!("({})+", print_term(inner)),
            _ => format!("{}+", print_term(inner)),
        },
        Term::Iota { bound, body } => match body.as_ref() {
            Formula::MapsTo(fun, arg, img) => format!(
                "iota {bound}.({} : {} |-> {})",
                print_term(fun),
                print_term(arg),
                print_term(img)
            ),
            other => format!("iota {bound}.({})", print_inner(other, 0, true)),
        },
    }
}

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Iff(..) => 1,
        Formula::Implies(..) => 2,
        Formula::Or(..) => 3,
        Formula::And(..) => 4,
        Formula::Not(..) => 5,
        Formula::Forall(..)
        | Formula::Exists(..)
        | Formula::MultiForall { .. }
        | Formula::MultiExists { .. }
        | Formula::BigAnd { .. } => 0,
        _ => 6,
    }
}

/// Quantifier bodies print bare except when rooted at a binary connective,
/// which gets explicit parentheses.
fn print_body(f: &Formula) -> String {
    if (1..=4).contains(&prec(f)) {
        format!("({})", print_inner(f, 0, true))
    } else {
        print_inner(f, 0, true)
    }
}

fn print_inner(f: &Formula, ctx: u8, fin: bool) -> String {
    let p = prec(f);
    if p == 0 {
        // Quantifier-like formulas extend maximally to the right; they print
        // bare only in final position.
        let s = print_quantifier(f);
        if fin {
            return s;
        }
        return format!("({})", print_quantifier_inner(f));
    }
    let bare = match f {
        Formula::Iff(a, b) => {
            format!("{} <=> {}", print_inner(a, 1, false), print_inner(b, 2, fin))
        }
        Formula::Implies(a, b) => {
            format!("{} => {}", print_inner(a, 3, false), print_inner(b, 2, fin))
        }
        Formula::Or(a, b) => {
            format!("{} or {}", print_inner(a, 3, false), print_inner(b, 4, fin))
        }
        Formula::And(a, b) => {
            format!("{} and {}", print_inner(a, 4, false), print_inner(b, 5, fin))
        }
        Formula::Not(g) => format!("not {}", print_inner(g, 5, fin)),
        Formula::Eq(a, b) => format!("{} = {}", print_term(a), print_term(b)),
        Formula::Mem(a, b) => format!("{} in {}", print_term(a), print_term(b)),
        Formula::Surj(a, b, c) => {
            format!("{} : {} ->> {}", print_term(a), print_term(b), print_term(c))
        }
        Formula::MapsTo(a, b, c) => {
            format!("{} : {} |-> {}", print_term(a), print_term(b), print_term(c))
        }
        Formula::SchemaHole { name, args } => {
            let args: Vec<String> = args.iter().map(print_term).collect();
            format!("${name}({})", args.join(", "))
        }
        _ => unreachable!("prec 0 handled above"),
    };
    if p < ctx {
        format!("({bare})")
    } else {
        bare
    }
}

fn binder_display(v: &str, s: &Sort) -> String {
    match s {
        Sort::SetVar | Sort::ThingVar | Sort::Constant => v.to_string(),
        Sort::FnComposite(x) => format!("{v}{{{x}}}"),
        Sort::UrFamily(a) => format!("{v}{{{a}+}}"),
        Sort::FnOnConstant(sub) => format!("{v}{{{}}}", print_term(sub)),
    }
}

fn print_quantifier_inner(f: &Formula) -> String {
    print_quantifier(f)
}

fn print_quantifier(f: &Formula) -> String {
    match f {
        Formula::Forall(v, s, body) => {
            // Re-sugar the nonemptiness guard.
            if *s == Sort::SetVar {
                if let Formula::Implies(lhs, rhs) = body.as_ref() {
                    if let Formula::Not(inner) = lhs.as_ref() {
                        if **inner
                            == Formula::Eq(
                                Term::Var(v.clone(), Sort::SetVar),
                                Term::Constant("empty".into()),
                            )
                        {
                            return format!("forall {v} != empty . {}", print_body(rhs));
                        }
                    }
                }
            }
            format!("forall {} . {}", binder_display(v, s), print_body(body))
        }
        Formula::Exists(v, s, body) => {
            format!("exists {} . {}", binder_display(v, s), print_body(body))
        }
        Formula::MultiForall { base, index, range, body } => format!(
            "(forall {base}{{{index}+}})_{{{index} in {}}} . {}",
            print_term(range),
            print_body(body)
        ),
        Formula::MultiExists { base, index, range, body } => format!(
            "(exists {base}{{{index}+}})_{{{index} in {}}} . {}",
            print_term(range),
            print_body(body)
        ),
        Formula::BigAnd { index, range, body } => format!(
            "/\\_{{{index} in {}}} . {}",
            print_term(range),
            print_body(body)
        ),
        _ => unreachable!(),
    }
}

/// Canonical text of a formula. Parsing the output reproduces the tree, and
/// printing is idempotent on its own output.
pub fn print_formula(f: &Formula) -> String {
    print_inner(f, 0, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Registry;

    fn reg() -> Registry {
        Registry::builtin()
    }

    fn roundtrip(src: &str) -> String {
        let f = parse_formula(src, &reg()).expect(src);
        let printed = print_formula(&f);
        let back = parse_formula(&printed, &reg()).expect(&printed);
        assert_eq!(f, back, "round trip changed the tree for `{src}`");
        printed
    }

    #[test]
    fn atoms_and_connectives() {
        assert_eq!(roundtrip("a in X and b in X"), "a in X and b in X");
        assert_eq!(roundtrip("not a = b"), "not a = b");
        assert_eq!(roundtrip("a = b or (a in X => b in X)"), "a = b or (a in X => b in X)");
        assert_eq!(roundtrip("(a = b <=> b = a) <=> a = b"), "a = b <=> b = a <=> a = b");
        assert_eq!(roundtrip("a = b <=> (b = a <=> a = b)"), "a = b <=> (b = a <=> a = b)");
        // Left-associative chains print without parentheses.
        assert_eq!(roundtrip("(a = a and b = b) and g = g"), "a = a and b = b and g = g");
    }

    #[test]
    fn quantifier_bodies_extend_right() {
        let f = parse_formula("forall a . a in X and a in Y", &reg()).unwrap();
        let Formula::Forall(_, _, body) = &f else { panic!() };
        assert!(matches!(body.as_ref(), Formula::And(..)));
        assert_eq!(print_formula(&f), "forall a . (a in X and a in Y)");
    }

    #[test]
    fn quantifier_needs_parens_when_not_final() {
        let f = Formula::And(
            Box::new(parse_formula("forall a . a = a", &reg()).unwrap()),
            Box::new(parse_formula("b = b", &reg()).unwrap()),
        );
        let printed = print_formula(&f);
        assert_eq!(printed, "(forall a . a = a) and b = b");
        assert_eq!(parse_formula(&printed, &reg()).unwrap(), f);
    }

    #[test]
    fn numerals_are_towers() {
        let f = parse_formula("2 in omega", &reg()).unwrap();
        let Formula::Mem(t, _) = &f else { panic!() };
        assert_eq!(
            *t,
            Term::Singleton(Box::new(Term::Singleton(Box::new(Term::Constant(
                "empty".into()
            )))))
        );
        assert_eq!(print_formula(&f), "2 in omega");
        // A hand-built tower prints as a numeral.
        assert_eq!(roundtrip("empty++ in omega"), "2 in omega");
        assert_eq!(roundtrip("empty in omega"), "empty in omega");
    }

    #[test]
    fn numeral_cap() {
        assert!(parse_formula("65 in omega", &reg()).is_err());
        assert!(parse_formula("64 in omega", &reg()).is_ok());
    }

    #[test]
    fn guard_sugar_roundtrip() {
        let printed = roundtrip("forall X != empty . exists a . a in X");
        assert_eq!(printed, "forall X != empty . exists a . a in X");
        let expanded = roundtrip("forall X . (not X = empty => exists a . a in X)");
        assert_eq!(expanded, "forall X != empty . exists a . a in X");
    }

    #[test]
    fn membership_sugar_expands() {
        assert_eq!(
            roundtrip("forall a in X . a in Y"),
            "forall a . (a in X => a in Y)"
        );
        assert_eq!(
            roundtrip("exists a in X . a in Y"),
            "exists a . (a in X and a in Y)"
        );
    }

    #[test]
    fn unique_existence_expands() {
        let printed = roundtrip("exists! b . b = a+");
        assert_eq!(
            printed,
            "exists b . (b = a+ and forall b' . (b' = a+ => b' = b))"
        );
    }

    #[test]
    fn subset_and_partial_arrow_sugar() {
        assert_eq!(
            roundtrip("A sub X"),
            "forall g . (g in A => g in X)"
        );
        let printed = roundtrip("f{omega} : omega -> Y");
        assert_eq!(
            printed,
            "exists Z . (f{omega} : omega ->> Z and forall g . (g in Z => g in Y))"
        );
    }

    #[test]
    fn multi_quantifier_and_conjunctor() {
        let src = "forall X != empty . (forall f{a+})_{a in X} . exists F{X} . exists Y . \
                   (F{X} : X ->> Y and /\\_{a in X} . F{X} : a |-> iota b.(f{a+} : a |-> b))";
        assert_eq!(roundtrip(src), src);
    }

    #[test]
    fn tuples_expand_to_pair_characterization() {
        let printed = roundtrip("g = <a,b>");
        assert_eq!(
            printed,
            "exists P . (g = P and forall g' . (g' in P <=> g' = a or exists Q . (g' = Q \
             and forall h . (h in Q <=> h = a or h = b))))"
        );
    }

    #[test]
    fn tuple_in_non_equation_position_is_pulled_out() {
        let f = parse_formula("<a,b> in X", &reg()).unwrap();
        let Formula::Exists(p, Sort::ThingVar, body) = &f else { panic!("{f:?}") };
        assert_eq!(p, "p");
        let Formula::And(_, rhs) = body.as_ref() else { panic!() };
        assert_eq!(
            **rhs,
            Formula::Mem(Term::Var("p".into(), Sort::ThingVar), Term::Var("X".into(), Sort::SetVar))
        );
    }

    #[test]
    fn iota_requires_bound_image() {
        assert!(parse_formula("a = iota b.(f{a+} : a |-> g)", &reg()).is_err());
        assert!(parse_formula("a = iota b.(f{a+} : a |-> b)", &reg()).is_ok());
    }

    #[test]
    fn constants_do_not_parse_as_variables() {
        let r = reg();
        let f = parse_formula("empty in omega", &r).unwrap();
        assert_eq!(
            f,
            Formula::Mem(Term::Constant("empty".into()), Term::Constant("omega".into()))
        );
        assert!(parse_formula("forall empty . empty = empty", &r).is_err());
    }

    #[test]
    fn tf_files() {
        let src = "# a comment\nformula one : 1 in omega\n\nformula two : forall X . X = X\n";
        let fs = parse_tf(src, &reg()).unwrap();
        assert_eq!(fs.len(), 2);
        assert_eq!(fs[0].0, "one");
        assert!(parse_tf("formula one : 1 in omega\nformula one : 2 in omega", &reg()).is_err());
    }

    #[test]
    fn error_positions() {
        let err = parse_formula("forall X .\n a in in X", &reg()).unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.col > 1);
    }
}
