use num::{BigInt, BigRational, Signed, Zero};

use crate::inference::{Literal, Query};
use crate::ground::GroundAtom;
use crate::logic::{Formula, FreqCmp, Signature, SortId, Term, Var};

use super::lexer::{tokenize, Tok, Token};
use super::SourceError;

// ---------------------------------------------------------------------------
// raw AST: names only; sorts are attached in a resolution pass
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub(crate) enum RawTerm {
    Var(String, u32, u32),
    Const(u32),
}

#[derive(Debug, Clone)]
pub(crate) struct RawFreqTerm {
    pub num: Box<RawFormula>,
    pub den: Option<Box<RawFormula>>,
    pub binders: Vec<(String, Option<String>, u32, u32)>,
}

#[derive(Debug, Clone)]
pub(crate) enum RawFormula {
    Bool(bool),
    Atom { rel: String, args: Vec<RawTerm>, line: u32, column: u32 },
    Not(Box<RawFormula>),
    And(Box<RawFormula>, Box<RawFormula>),
    Or(Box<RawFormula>, Box<RawFormula>),
    Implies(Box<RawFormula>, Box<RawFormula>),
    Quant { forall: bool, var: String, sort: String, body: Box<RawFormula>, line: u32, column: u32 },
    Freq {
        slack_on_left: bool,
        slack: BigRational,
        lhs: RawFreqTerm,
        rhs: Option<RawFreqTerm>,
        line: u32,
        column: u32,
    },
}

pub(crate) fn rational_from_text(text: &str, line: u32, column: u32) -> Result<BigRational, SourceError> {
    let bad = |m: &str| SourceError::new(line, column, format!("bad number `{}`: {}", text, m));
    if let Some((n, d)) = text.split_once('/') {
        let num: BigInt = n.parse().map_err(|_| bad("numerator"))?;
        let den: BigInt = d.parse().map_err(|_| bad("denominator"))?;
        if den.is_zero() {
            return Err(bad("zero denominator"));
        }
        return Ok(BigRational::new(num, den));
    }
    let (mantissa, exp) = match text.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().map_err(|_| bad("exponent"))?),
        None => (text, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    let digits = format!("{}{}", int_part, frac_part);
    let value: BigInt = digits.parse().map_err(|_| bad("digits"))?;
    let scale = frac_part.len() as i32 - exp;
    let ten = BigInt::from(10);
    let pow = |k: u32| -> BigInt { num::pow::pow(ten.clone(), k as usize) };
    Ok(if scale >= 0 {
        BigRational::new(value, pow(scale as u32))
    } else {
        BigRational::new(value * pow((-scale) as u32), BigInt::from(1))
    })
}

// ---------------------------------------------------------------------------
// token stream parser
// ---------------------------------------------------------------------------

pub(crate) struct Tokens {
    toks: Vec<Token>,
    pos: usize,
}

impl Tokens {
    pub(crate) fn new(input: &str) -> Result<Self, SourceError> {
        Ok(Tokens { toks: tokenize(input)?, pos: 0 })
    }

    pub(crate) fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub(crate) fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn err_here(&self, msg: impl Into<String>) -> SourceError {
        let t = self.peek();
        SourceError::new(t.line, t.column, msg)
    }

    pub(crate) fn expect(&mut self, tok: Tok) -> Result<Token, SourceError> {
        if self.peek().tok == tok {
            Ok(self.next())
        } else {
            let got = self.peek().tok.describe();
            Err(self
                .err_here(format!("expected {}, found {}", tok.describe(), got))
                .expecting(vec![tok.describe()]))
        }
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.next();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_ident(&mut self) -> Result<(String, u32, u32), SourceError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(s) => {
                self.next();
                Ok((s, t.line, t.column))
            }
            other => Err(SourceError::new(
                t.line,
                t.column,
                format!("expected identifier, found {}", other.describe()),
            )
            .expecting(vec!["identifier".into()])),
        }
    }

    pub(crate) fn expect_keyword(&mut self, kw: &str) -> Result<(), SourceError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            other => Err(SourceError::new(
                t.line,
                t.column,
                format!("expected `{}`, found {}", kw, other.describe()),
            )
            .expecting(vec![format!("`{}`", kw)])),
        }
    }

    pub(crate) fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    pub(crate) fn expect_number(&mut self) -> Result<(String, u32, u32), SourceError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Number(s) => {
                self.next();
                Ok((s, t.line, t.column))
            }
            other => Err(SourceError::new(
                t.line,
                t.column,
                format!("expected number, found {}", other.describe()),
            )
            .expecting(vec!["number".into()])),
        }
    }

    pub(crate) fn expect_eof(&self) -> Result<(), SourceError> {
        if self.peek().tok == Tok::Eof {
            Ok(())
        } else {
            Err(self.err_here(format!("unexpected {}", self.peek().tok.describe())))
        }
    }
}

const KEYWORDS: &[&str] = &[
    "sort", "relation", "node", "parents", "feature", "function", "case", "domain", "fact",
    "forall", "exists", "true", "false", "freq",
];

pub(crate) fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// formula := quant | implies; quantifier scope extends maximally right.
pub(crate) fn parse_raw_formula(ts: &mut Tokens) -> Result<RawFormula, SourceError> {
    if ts.at_keyword("forall") || ts.at_keyword("exists") {
        return parse_quant(ts);
    }
    let lhs = parse_or(ts)?;
    if ts.eat(&Tok::Arrow) {
        let rhs = parse_raw_formula(ts)?;
        return Ok(RawFormula::Implies(Box::new(lhs), Box::new(rhs)));
    }
    Ok(lhs)
}

fn parse_quant(ts: &mut Tokens) -> Result<RawFormula, SourceError> {
    let t = ts.peek().clone();
    let forall = ts.at_keyword("forall");
    ts.next();
    let (var, vl, vc) = ts.expect_ident()?;
    if is_keyword(&var) {
        return Err(SourceError::new(vl, vc, format!("`{}` is a reserved word", var)));
    }
    ts.expect(Tok::Colon)?;
    let (sort, _, _) = ts.expect_ident()?;
    ts.expect(Tok::Dot)?;
    let body = parse_raw_formula(ts)?;
    Ok(RawFormula::Quant {
        forall,
        var,
        sort,
        body: Box::new(body),
        line: t.line,
        column: t.column,
    })
}

fn parse_or(ts: &mut Tokens) -> Result<RawFormula, SourceError> {
    let mut lhs = parse_and(ts)?;
    while ts.eat(&Tok::Bar) {
        let rhs = parse_and(ts)?;
        lhs = RawFormula::Or(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_and(ts: &mut Tokens) -> Result<RawFormula, SourceError> {
    let mut lhs = parse_unary(ts)?;
    while ts.eat(&Tok::Amp) {
        let rhs = parse_unary(ts)?;
        lhs = RawFormula::And(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_unary(ts: &mut Tokens) -> Result<RawFormula, SourceError> {
    if ts.eat(&Tok::Tilde) {
        let inner = parse_unary(ts)?;
        return Ok(RawFormula::Not(Box::new(inner)));
    }
    if ts.at_keyword("forall") || ts.at_keyword("exists") {
        return parse_quant(ts);
    }
    parse_primary(ts)
}

fn parse_primary(ts: &mut Tokens) -> Result<RawFormula, SourceError> {
    let t = ts.peek().clone();
    match &t.tok {
        Tok::LParen => {
            ts.next();
            let inner = parse_raw_formula(ts)?;
            ts.expect(Tok::RParen)?;
            Ok(inner)
        }
        Tok::Ident(s) if s == "true" => {
            ts.next();
            Ok(RawFormula::Bool(true))
        }
        Tok::Ident(s) if s == "false" => {
            ts.next();
            Ok(RawFormula::Bool(false))
        }
        Tok::Ident(s) if s == "freq" => parse_freq_comparison(ts, None),
        Tok::Number(text) => {
            // `r + freq(..) >= freq(..)`  or  `r >= freq(..)`
            let text = text.clone();
            ts.next();
            let r = rational_from_text(&text, t.line, t.column)?;
            if r.is_negative() {
                return Err(SourceError::new(t.line, t.column, "slack must be non-negative"));
            }
            parse_freq_comparison(ts, Some((r, t.line, t.column)))
        }
        Tok::Ident(s) if !is_keyword(s) => parse_atom(ts),
        other => Err(SourceError::new(
            t.line,
            t.column,
            format!("expected a formula, found {}", other.describe()),
        )
        .expecting(vec![
            "`(`".into(),
            "`~`".into(),
            "`true`".into(),
            "`false`".into(),
            "`freq`".into(),
            "atom".into(),
        ])),
    }
}

fn parse_atom(ts: &mut Tokens) -> Result<RawFormula, SourceError> {
    let (rel, line, column) = ts.expect_ident()?;
    ts.expect(Tok::LParen)?;
    let mut args = Vec::new();
    if !ts.eat(&Tok::RParen) {
        loop {
            let t = ts.peek().clone();
            match &t.tok {
                Tok::Ident(s) if !is_keyword(s) => {
                    ts.next();
                    args.push(RawTerm::Var(s.clone(), t.line, t.column));
                }
                Tok::Number(text) => {
                    ts.next();
                    let v: u32 = text.parse().map_err(|_| {
                        SourceError::new(t.line, t.column, "domain elements are non-negative integers")
                    })?;
                    args.push(RawTerm::Const(v));
                }
                other => {
                    return Err(SourceError::new(
                        t.line,
                        t.column,
                        format!("expected variable or element, found {}", other.describe()),
                    ))
                }
            }
            if ts.eat(&Tok::RParen) {
                break;
            }
            ts.expect(Tok::Comma)?;
        }
    }
    Ok(RawFormula::Atom { rel, args, line, column })
}

/// Parse `freq(...) (>= ...)` with an optional already-consumed left slack.
/// With a left slack the `>=` part is mandatory.
fn parse_freq_comparison(
    ts: &mut Tokens,
    left_slack: Option<(BigRational, u32, u32)>,
) -> Result<RawFormula, SourceError> {
    if left_slack.is_some() {
        // the `r >= freq(..)` shorthand has no left freq term
        if ts.eat(&Tok::Ge) {
            let (r, line, column) = left_slack.unwrap();
            let rhs = parse_freq_term(ts)?;
            return Ok(RawFormula::Freq {
                slack_on_left: true,
                slack: r,
                lhs: RawFreqTerm {
                    num: Box::new(RawFormula::Bool(false)),
                    den: None,
                    binders: rhs.binders.clone(),
                },
                rhs: Some(rhs),
                line,
                column,
            });
        }
        ts.expect(Tok::Plus)?;
    }
    let t = ts.peek().clone();
    let lhs = parse_freq_term(ts)?;
    match left_slack {
        Some((r, line, column)) => {
            ts.expect(Tok::Ge)?;
            let rhs = parse_freq_term(ts)?;
            Ok(RawFormula::Freq {
                slack_on_left: true,
                slack: r,
                lhs,
                rhs: Some(rhs),
                line,
                column,
            })
        }
        None => {
            ts.expect(Tok::Ge)?;
            // rhs: number, or freq term with optional `+ number`
            if let Tok::Number(text) = &ts.peek().tok {
                let text = text.clone();
                let nt = ts.peek().clone();
                ts.next();
                let r = rational_from_text(&text, nt.line, nt.column)?;
                if r.is_negative() {
                    return Err(SourceError::new(nt.line, nt.column, "slack must be non-negative"));
                }
                return Ok(RawFormula::Freq {
                    slack_on_left: false,
                    slack: r,
                    lhs,
                    rhs: None,
                    line: t.line,
                    column: t.column,
                });
            }
            let rhs = parse_freq_term(ts)?;
            let slack = if ts.eat(&Tok::Plus) {
                let (text, line, column) = ts.expect_number()?;
                let r = rational_from_text(&text, line, column)?;
                if r.is_negative() {
                    return Err(SourceError::new(line, column, "slack must be non-negative"));
                }
                r
            } else {
                BigRational::zero()
            };
            Ok(RawFormula::Freq {
                slack_on_left: false,
                slack,
                lhs,
                rhs: Some(rhs),
                line: t.line,
                column: t.column,
            })
        }
    }
}

/// `freq(f (| g)? ; binds?)`. Inside the parentheses a top-level `|`
/// separates formula from condition, so disjunctions must be parenthesized.
pub(crate) fn parse_freq_term(ts: &mut Tokens) -> Result<RawFreqTerm, SourceError> {
    ts.expect_keyword("freq")?;
    ts.expect(Tok::LParen)?;
    let num = parse_freq_arg(ts)?;
    let den = if ts.eat(&Tok::Bar) {
        Some(parse_freq_arg(ts)?)
    } else {
        None
    };
    ts.expect(Tok::Semi)?;
    let mut binders = Vec::new();
    while !ts.eat(&Tok::RParen) {
        if !binders.is_empty() {
            ts.expect(Tok::Comma)?;
        }
        let (name, line, column) = ts.expect_ident()?;
        if is_keyword(&name) {
            return Err(SourceError::new(line, column, format!("`{}` is a reserved word", name)));
        }
        let sort = if ts.eat(&Tok::Colon) {
            Some(ts.expect_ident()?.0)
        } else {
            None
        };
        binders.push((name, sort, line, column));
    }
    Ok(RawFreqTerm {
        num: Box::new(num),
        den: den.map(Box::new),
        binders,
    })
}

/// A freq argument: conjunction level and below, plus `->` chains built from
/// them; top-level `|` is reserved for the conditional separator.
fn parse_freq_arg(ts: &mut Tokens) -> Result<RawFormula, SourceError> {
    if ts.at_keyword("forall") || ts.at_keyword("exists") {
        return parse_quant(ts);
    }
    let lhs = parse_and(ts)?;
    if ts.eat(&Tok::Arrow) {
        let rhs = parse_freq_arg(ts)?;
        return Ok(RawFormula::Implies(Box::new(lhs), Box::new(rhs)));
    }
    Ok(lhs)
}

// ---------------------------------------------------------------------------
// resolution: names -> sorted variables, sort checking
// ---------------------------------------------------------------------------

struct ScopeEntry {
    name: String,
    sort: Option<SortId>,
}

pub(crate) struct Resolver<'a> {
    pub signature: &'a Signature,
    scopes: Vec<ScopeEntry>,
    /// free variables seen so far: name -> sort (unified on use)
    pub free: Vec<(String, Option<SortId>)>,
}

impl<'a> Resolver<'a> {
    pub(crate) fn new(signature: &'a Signature) -> Self {
        Resolver {
            signature,
            scopes: Vec::new(),
            free: Vec::new(),
        }
    }

    /// Pre-declare a free variable with a known sort (argument variables of
    /// a node, say).
    pub(crate) fn declare_free(&mut self, name: &str, sort: SortId) {
        self.free.push((name.to_string(), Some(sort)));
    }

    fn sort_by_name(&self, name: &str, line: u32, column: u32) -> Result<SortId, SourceError> {
        self.signature
            .sort_id(name)
            .ok_or_else(|| SourceError::new(line, column, format!("unknown sort `{}`", name)))
    }

    fn unify_var(
        &mut self,
        name: &str,
        sort: SortId,
        line: u32,
        column: u32,
    ) -> Result<(), SourceError> {
        for e in self.scopes.iter_mut().rev() {
            if e.name == name {
                match e.sort {
                    None => {
                        e.sort = Some(sort);
                        return Ok(());
                    }
                    Some(s) if s == sort => return Ok(()),
                    Some(s) => {
                        return Err(SourceError::new(
                            line,
                            column,
                            format!(
                                "variable `{}` used at sort `{}` but bound at sort `{}`",
                                name,
                                self.signature.sort_name(sort),
                                self.signature.sort_name(s)
                            ),
                        ))
                    }
                }
            }
        }
        for (n, s) in self.free.iter_mut() {
            if n == name {
                match s {
                    None => {
                        *s = Some(sort);
                        return Ok(());
                    }
                    Some(s) if *s == sort => return Ok(()),
                    Some(s) => {
                        return Err(SourceError::new(
                            line,
                            column,
                            format!(
                                "variable `{}` used at sort `{}` but previously at sort `{}`",
                                name,
                                self.signature.sort_name(sort),
                                self.signature.sort_name(*s)
                            ),
                        ))
                    }
                }
            }
        }
        self.free.push((name.to_string(), Some(sort)));
        Ok(())
    }

    pub(crate) fn resolve(&mut self, raw: &RawFormula) -> Result<Formula, SourceError> {
        match raw {
            RawFormula::Bool(b) => Ok(Formula::Bool(*b)),
            RawFormula::Atom { rel, args, line, column } => {
                let rid = self.signature.rel_id(rel).ok_or_else(|| {
                    SourceError::new(*line, *column, format!("unknown relation `{}`", rel))
                })?;
                let decl = self.signature.relation(rid);
                if decl.arity() != args.len() {
                    return Err(SourceError::new(
                        *line,
                        *column,
                        format!(
                            "relation `{}` expects {} arguments, got {}",
                            rel,
                            decl.arity(),
                            args.len()
                        ),
                    ));
                }
                // first pass: unify variable sorts from their positions
                for (i, a) in args.iter().enumerate() {
                    if let RawTerm::Var(name, l, c) = a {
                        self.unify_var(name, decl.arg_sorts[i], *l, *c)?;
                    }
                }
                let mut terms = Vec::with_capacity(args.len());
                for (i, a) in args.iter().enumerate() {
                    let sort = decl.arg_sorts[i];
                    match a {
                        RawTerm::Var(name, _, _) => {
                            terms.push(Term::Var(Var::new(name, sort)));
                        }
                        RawTerm::Const(v) => terms.push(Term::Const { value: *v, sort }),
                    }
                }
                Ok(Formula::Atom { rel: rid, args: terms })
            }
            RawFormula::Not(g) => Ok(Formula::not(self.resolve(g)?)),
            RawFormula::And(a, b) => Ok(Formula::and(self.resolve(a)?, self.resolve(b)?)),
            RawFormula::Or(a, b) => Ok(Formula::or(self.resolve(a)?, self.resolve(b)?)),
            RawFormula::Implies(a, b) => Ok(Formula::implies(self.resolve(a)?, self.resolve(b)?)),
            RawFormula::Quant { forall, var, sort, body, line, column } => {
                let sid = self.sort_by_name(sort, *line, *column)?;
                self.scopes.push(ScopeEntry { name: var.clone(), sort: Some(sid) });
                let body = self.resolve(body);
                self.scopes.pop();
                let v = Var::new(var, sid);
                Ok(if *forall {
                    Formula::forall(v, body?)
                } else {
                    Formula::exists(v, body?)
                })
            }
            RawFormula::Freq { slack_on_left, slack, lhs, rhs, line, column } => {
                // the binder tuple is shared by the whole comparison; both
                // sides must list the same names, annotations are merged
                let mut binder_decls: Vec<(String, Option<SortId>, u32, u32)> = Vec::new();
                for (name, sort, l, c) in &lhs.binders {
                    if binder_decls.iter().any(|(n, _, _, _)| n == name) {
                        return Err(SourceError::new(*l, *c, format!("duplicate frequency binder `{}`", name)));
                    }
                    let sid = match sort {
                        Some(s) => Some(self.sort_by_name(s, *l, *c)?),
                        None => None,
                    };
                    binder_decls.push((name.clone(), sid, *l, *c));
                }
                if let Some(r) = rhs {
                    if r.binders.len() != binder_decls.len()
                        || r.binders
                            .iter()
                            .zip(binder_decls.iter())
                            .any(|((n1, _, _, _), (n2, _, _, _))| n1 != n2)
                    {
                        return Err(SourceError::new(
                            *line,
                            *column,
                            "both sides of a frequency comparison must bind the same variables",
                        ));
                    }
                    for ((_, sort, l, c), decl) in r.binders.iter().zip(binder_decls.iter_mut()) {
                        if let Some(s) = sort {
                            let sid = self.sort_by_name(s, *l, *c)?;
                            match decl.1 {
                                None => decl.1 = Some(sid),
                                Some(prev) if prev == sid => {}
                                Some(_) => {
                                    return Err(SourceError::new(
                                        *l,
                                        *c,
                                        format!("conflicting sort annotations for binder `{}`", decl.0),
                                    ))
                                }
                            }
                        }
                    }
                }
                for (name, sid, _, _) in &binder_decls {
                    self.scopes.push(ScopeEntry { name: name.clone(), sort: *sid });
                }
                let lhs_num = self.resolve(&lhs.num);
                let lhs_den = match &lhs.den {
                    Some(d) => self.resolve(d).map(Some),
                    None => Ok(None),
                };
                let (rhs_num, rhs_den) = match rhs {
                    Some(r) => {
                        let n = self.resolve(&r.num);
                        let d = match &r.den {
                            Some(d) => self.resolve(d).map(Some),
                            None => Ok(None),
                        };
                        (n, d)
                    }
                    None => (Ok(Formula::Bool(false)), Ok(None)),
                };
                let mut binders = Vec::new();
                let mut missing = None;
                for (name, _, l, c) in binder_decls.iter().rev() {
                    let entry = self.scopes.pop().unwrap();
                    debug_assert_eq!(&entry.name, name);
                    match entry.sort {
                        Some(s) => binders.push(Var::new(name, s)),
                        None => {
                            missing.get_or_insert_with(|| {
                                SourceError::new(
                                    *l,
                                    *c,
                                    format!(
                                        "cannot infer the sort of binder `{}`; annotate as `{}:sort`",
                                        name, name
                                    ),
                                )
                            });
                        }
                    }
                }
                if let Some(e) = missing {
                    return Err(e);
                }
                binders.reverse();
                Ok(Formula::FreqCmp(Box::new(FreqCmp {
                    slack_on_left: *slack_on_left,
                    slack: slack.clone(),
                    lhs_num: lhs_num?,
                    lhs_den: lhs_den?.unwrap_or(Formula::Bool(true)),
                    rhs_num: rhs_num?,
                    rhs_den: rhs_den?.unwrap_or(Formula::Bool(true)),
                    binders,
                })))
            }
        }
    }

    /// Resolve a standalone feature term `freq(f (| g)? ; binds)`, returning
    /// the formula, the optional condition, and the resolved binders.
    pub(crate) fn resolve_feature(
        &mut self,
        t: &RawFreqTerm,
    ) -> Result<(Formula, Option<Formula>, Vec<Var>), SourceError> {
        let mut seen = Vec::new();
        for (name, sort, line, column) in &t.binders {
            if seen.contains(name) {
                return Err(SourceError::new(
                    *line,
                    *column,
                    format!("duplicate frequency binder `{}`", name),
                ));
            }
            seen.push(name.clone());
            let sid = match sort {
                Some(s) => Some(self.sort_by_name(s, *line, *column)?),
                None => None,
            };
            self.scopes.push(ScopeEntry { name: name.clone(), sort: sid });
        }
        let num = self.resolve(&t.num);
        let den = match &t.den {
            Some(d) => self.resolve(d).map(Some),
            None => Ok(None),
        };
        // binder sorts must be determined by explicit annotation or use
        let mut binders = Vec::new();
        let mut err = None;
        for (name, _, line, column) in t.binders.iter().rev() {
            let entry = self.scopes.pop().unwrap();
            debug_assert_eq!(&entry.name, name);
            match entry.sort {
                Some(s) => binders.push(Var::new(name, s)),
                None => {
                    err.get_or_insert_with(|| {
                        SourceError::new(
                            *line,
                            *column,
                            format!("cannot infer the sort of binder `{}`; annotate as `{}:sort`", name, name),
                        )
                    });
                }
            }
        }
        if let Some(e) = err {
            return Err(e);
        }
        binders.reverse();
        Ok((num?, den?, binders))
    }
}

/// Parse a formula against a signature. Free-variable sorts are inferred
/// from atom positions; quantifier binders carry explicit sorts.
pub fn parse_formula(text: &str, signature: &Signature) -> Result<Formula, SourceError> {
    let mut ts = Tokens::new(text)?;
    let raw = parse_raw_formula(&mut ts)?;
    ts.expect_eof()?;
    let mut resolver = Resolver::new(signature);
    resolver.resolve(&raw)
}

/// Parse a ground literal such as `R(0, 2)` or `~Q(1)`.
pub fn parse_ground_literal(text: &str, signature: &Signature) -> Result<Literal, SourceError> {
    let mut ts = Tokens::new(text)?;
    let positive = !ts.eat(&Tok::Tilde);
    let raw = parse_atom(&mut ts)?;
    ts.expect_eof()?;
    let mut resolver = Resolver::new(signature);
    let f = resolver.resolve(&raw)?;
    match f {
        Formula::Atom { rel, args } => {
            let mut tuple = Vec::with_capacity(args.len());
            for a in &args {
                match a {
                    Term::Const { value, .. } => tuple.push(*value),
                    Term::Var(v) => {
                        return Err(SourceError::new(
                            1,
                            1,
                            format!("ground literal contains variable `{}`", v.name),
                        ))
                    }
                }
            }
            let atom = GroundAtom::new(rel, tuple);
            Ok(if positive { Literal::pos(atom) } else { Literal::neg(atom) })
        }
        _ => unreachable!(),
    }
}

/// Parse a query of the form `target` or `target | ev1, ev2, ...` where each
/// part is a ground literal.
pub fn parse_query(text: &str, signature: &Signature) -> Result<Query, SourceError> {
    let (target_text, evidence_text) = match text.split_once('|') {
        Some((t, e)) => (t, Some(e)),
        None => (text, None),
    };
    let target = parse_ground_literal(target_text.trim(), signature)?;
    let mut evidence = Vec::new();
    if let Some(e) = evidence_text {
        for part in e.split(',') {
            let part = part.trim();
            if !part.is_empty() {
                evidence.push(parse_ground_literal(part, signature)?);
            }
        }
    }
    Query::new(target, evidence).map_err(|e| SourceError::new(1, 1, e.to_string()))
}
