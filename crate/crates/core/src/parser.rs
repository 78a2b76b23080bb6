//! Text formats: the model file, specification strings, valuation files.
//!
//! Model files are line oriented, `#` starts a comment:
//!
//! ```text
//! @type pmdp|pmc
//! @parameters <id> [lo,hi] <id> ...
//! @states <state> ...          (optional, fixes state order)
//! @initial <state>
//! @targets <state> ...
//! <state> <action> <state'> <affine-expr>     (pmc files omit <action>)
//! @costs
//! <state> <action> <rational>                  (pmc files omit <action>)
//! @transitions                                 (back to transition lines)
//! ```
//!
//! Expressions follow `expr := term (('+'|'-') term)*`,
//! `term := rational | rational '*' ident | ident`, where rationals are `a/b`
//! or decimal literals, converted exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Pow, Zero};
use thiserror::Error;

use crate::model::{
    format_affine, format_rational, AffineExpr, Choice, Direction, Instantiation, Interval,
    ModelError, ModelKind, ParamId, Parameter, Pmdp, Rational, SpecKind, Specification, StateId,
};

/// A diagnostic with a 1-based source location.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn at(span: Span, message: impl Into<String>) -> Self {
        Self {
            line: span.line,
            column: span.column,
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

/// A whitespace-delimited token with its location.
#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub text: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamDecl {
    pub name: Token,
    pub bounds: Option<(Bound, Bound)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Bound {
    Finite(Rational),
    Infinite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRecord {
    pub state: Token,
    pub action: Option<Token>,
    pub successor: Token,
    pub expr: String,
    pub expr_span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostRecord {
    pub state: Token,
    pub action: Option<Token>,
    pub cost: Token,
}

/// Syntactic content of a model file, before semantic checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelDocument {
    pub kind: Option<(ModelKind, Span)>,
    pub params: Vec<ParamDecl>,
    pub states: Vec<Token>,
    pub initial: Vec<Token>,
    pub targets: Vec<Token>,
    pub transitions: Vec<TransitionRecord>,
    pub costs: Vec<CostRecord>,
}

const PMC_ACTION: &str = "tau";

fn tokens(line: &str, line_no: usize) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(tok(&line[s..i], line_no, line, s));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(tok(&line[s..], line_no, line, s));
    }
    out
}

fn tok(text: &str, line_no: usize, line: &str, byte: usize) -> Token {
    Token {
        text: text.to_string(),
        span: Span {
            line: line_no,
            column: line[..byte].chars().count() + 1,
        },
    }
}

fn strip_comment(line: &str) -> &str {
    line.find('#').map_or(line, |i| &line[..i])
}

/// Syntax pass over a model file.
pub fn parse_document(text: &str) -> Result<ModelDocument, ParseError> {
    let mut doc = ModelDocument::default();
    let mut in_costs = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw);
        let toks = tokens(line, line_no);
        let Some(head) = toks.first() else { continue };
        if let Some(directive) = head.text.strip_prefix('@') {
            match directive {
                "type" => {
                    let [_, kind] = toks.as_slice() else {
                        return Err(ParseError::at(head.span, "expected `@type pmdp|pmc`"));
                    };
                    let k = match kind.text.as_str() {
                        "pmdp" => ModelKind::Pmdp,
                        "pmc" => ModelKind::Pmc,
                        other => {
                            return Err(ParseError::at(kind.span, format!("unknown model type `{other}`")))
                        }
                    };
                    if doc.kind.is_some() {
                        return Err(ParseError::at(head.span, "duplicate @type"));
                    }
                    if !doc.transitions.is_empty() {
                        return Err(ParseError::at(head.span, "@type must precede transitions"));
                    }
                    doc.kind = Some((k, head.span));
                }
                "parameters" => {
                    let rest_col = head.span.column + head.text.chars().count();
                    let rest: String = line.chars().skip(rest_col - 1).collect();
                    doc.params.extend(parse_param_list(&rest, line_no, rest_col)?);
                }
                "states" => doc.states.extend(toks[1..].iter().cloned()),
                "initial" => {
                    if toks.len() != 2 {
                        return Err(ParseError::at(head.span, "expected `@initial <state>`"));
                    }
                    doc.initial.push(toks[1].clone());
                }
                "targets" => doc.targets.extend(toks[1..].iter().cloned()),
                "costs" => in_costs = true,
                "transitions" => in_costs = false,
                other => {
                    return Err(ParseError::at(head.span, format!("unknown directive `@{other}`")));
                }
            }
            continue;
        }
        let pmc = matches!(doc.kind, Some((ModelKind::Pmc, _)));
        if in_costs {
            let want = if pmc { 2 } else { 3 };
            if toks.len() != want {
                return Err(ParseError::at(
                    head.span,
                    if pmc {
                        "expected `<state> <cost>`"
                    } else {
                        "expected `<state> <action> <cost>`"
                    },
                ));
            }
            doc.costs.push(CostRecord {
                state: toks[0].clone(),
                action: (!pmc).then(|| toks[1].clone()),
                cost: toks[want - 1].clone(),
            });
            continue;
        }
        let fixed = if pmc { 2 } else { 3 };
        if toks.len() <= fixed {
            return Err(ParseError::at(
                head.span,
                if pmc {
                    "expected `<state> <state'> <expr>`"
                } else {
                    "expected `<state> <action> <state'> <expr>`"
                },
            ));
        }
        let expr_tok = &toks[fixed];
        let expr: String = line.chars().skip(expr_tok.span.column - 1).collect();
        doc.transitions.push(TransitionRecord {
            state: toks[0].clone(),
            action: (!pmc).then(|| toks[1].clone()),
            successor: toks[fixed - 1].clone(),
            expr: expr.trim_end().to_string(),
            expr_span: expr_tok.span,
        });
    }
    Ok(doc)
}

fn parse_param_list(rest: &str, line: usize, col0: usize) -> Result<Vec<ParamDecl>, ParseError> {
    let chars: Vec<char> = rest.chars().collect();
    let span = |i: usize| Span {
        line,
        column: col0 + i,
    };
    let mut out: Vec<ParamDecl> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '[' {
            let start = i;
            let close = chars[i..]
                .iter()
                .position(|&c| c == ']')
                .map(|off| i + off)
                .ok_or_else(|| ParseError::at(span(start), "unterminated bound `[`"))?;
            let inner: String = chars[i + 1..close].iter().collect();
            let Some(last) = out.last_mut() else {
                return Err(ParseError::at(span(start), "bounds must follow a parameter name"));
            };
            if last.bounds.is_some() {
                return Err(ParseError::at(span(start), "parameter already has bounds"));
            }
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            let [lo, hi] = parts.as_slice() else {
                return Err(ParseError::at(span(start), "expected `[lo,hi]`"));
            };
            let bound = |s: &str| -> Result<Bound, ParseError> {
                match s {
                    "inf" | "-inf" | "+inf" => Ok(Bound::Infinite),
                    _ => parse_rational(s)
                        .map(Bound::Finite)
                        .map_err(|m| ParseError::at(span(start + 1), m)),
                }
            };
            last.bounds = Some((bound(lo)?, bound(hi)?));
            i = close + 1;
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '[' {
                i += 1;
            }
            let name: String = chars[start..i].iter().collect();
            if !is_ident(&name) {
                return Err(ParseError::at(span(start), format!("invalid parameter name `{name}`")));
            }
            out.push(ParamDecl {
                name: Token {
                    text: name,
                    span: span(start),
                },
                bounds: None,
            });
        }
    }
    Ok(out)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '.')
}

/// Parses a model file into a validated [`Pmdp`].
pub fn parse_model(text: &str) -> Result<Pmdp, ParseError> {
    parse_document(text)?.into_model()
}

impl ModelDocument {
    /// Semantic pass: resolves names and enforces the model invariants.
    pub fn into_model(self) -> Result<Pmdp, ParseError> {
        let kind = self.kind.map_or(ModelKind::Pmdp, |(k, _)| k);

        let mut params = Vec::new();
        let mut param_ids: HashMap<String, ParamId> = HashMap::new();
        for decl in &self.params {
            if param_ids.contains_key(&decl.name.text) {
                return Err(ParseError::at(
                    decl.name.span,
                    format!("duplicate parameter `{}`", decl.name.text),
                ));
            }
            param_ids.insert(decl.name.text.clone(), ParamId(params.len()));
            let bounds = decl.bounds.as_ref().map(|(lo, hi)| Interval {
                lo: match lo {
                    Bound::Finite(r) => Some(r.clone()),
                    Bound::Infinite => None,
                },
                hi: match hi {
                    Bound::Finite(r) => Some(r.clone()),
                    Bound::Infinite => None,
                },
            });
            params.push(Parameter {
                name: decl.name.text.clone(),
                bounds,
            });
        }

        let mut names: Vec<String> = Vec::new();
        let mut ids: HashMap<String, StateId> = HashMap::new();
        let mut intern = |t: &Token| -> StateId {
            if let Some(id) = ids.get(&t.text) {
                return *id;
            }
            let id = StateId(names.len());
            names.push(t.text.clone());
            ids.insert(t.text.clone(), id);
            id
        };
        let mut declared = BTreeSet::new();
        for t in &self.states {
            if !declared.insert(t.text.clone()) {
                return Err(ParseError::at(t.span, format!("state `{}` declared twice", t.text)));
            }
            intern(t);
        }
        let initial = match self.initial.as_slice() {
            [] => None,
            [t] => Some((intern(t), t.span)),
            [_, dup, ..] => return Err(ParseError::at(dup.span, "duplicate @initial")),
        };
        let targets: BTreeSet<StateId> = self.targets.iter().map(&mut intern).collect();

        // (state, action) -> choice, in order of first appearance
        let mut rows: BTreeMap<StateId, Vec<Choice>> = BTreeMap::new();
        let mut row_spans: HashMap<(StateId, String), Span> = HashMap::new();
        for rec in &self.transitions {
            let s = intern(&rec.state);
            let t = intern(&rec.successor);
            let action = rec
                .action
                .as_ref()
                .map_or_else(|| PMC_ACTION.to_string(), |a| a.text.clone());
            let expr = parse_affine(&rec.expr, &param_ids, rec.expr_span)?;
            let row = rows.entry(s).or_default();
            let choice = match row.iter_mut().position(|c| c.action == action) {
                Some(i) => &mut row[i],
                None => {
                    row.push(Choice {
                        action: action.clone(),
                        transitions: Vec::new(),
                        cost: None,
                    });
                    row_spans.insert((s, action.clone()), rec.state.span);
                    row.last_mut().unwrap()
                }
            };
            if choice.transitions.iter().any(|(succ, _)| *succ == t) {
                return Err(ParseError::at(
                    rec.state.span,
                    format!(
                        "duplicate transition ({}, {}, {})",
                        rec.state.text, action, rec.successor.text
                    ),
                ));
            }
            choice.transitions.push((t, expr));
        }

        for rec in &self.costs {
            let Some(s) = ids.get(&rec.state.text).copied() else {
                return Err(ParseError::at(rec.state.span, format!("unknown state `{}`", rec.state.text)));
            };
            let action = rec
                .action
                .as_ref()
                .map_or_else(|| PMC_ACTION.to_string(), |a| a.text.clone());
            let cost = parse_rational(&rec.cost.text).map_err(|m| ParseError::at(rec.cost.span, m))?;
            let choice = rows
                .get_mut(&s)
                .and_then(|row| row.iter_mut().find(|c| c.action == action))
                .ok_or_else(|| {
                    ParseError::at(
                        rec.state.span,
                        format!("cost for unknown choice ({}, {})", rec.state.text, action),
                    )
                })?;
            if choice.cost.is_some() {
                return Err(ParseError::at(rec.state.span, "duplicate cost"));
            }
            choice.cost = Some(cost);
        }

        let n = names.len();
        let mut choices = Vec::with_capacity(n);
        for s in 0..n {
            let row = rows.remove(&StateId(s)).unwrap_or_default();
            if row.is_empty() {
                let span = self
                    .states
                    .iter()
                    .chain(&self.targets)
                    .chain(&self.initial)
                    .chain(self.transitions.iter().map(|r| &r.successor))
                    .find(|t| t.text == names[s])
                    .map(|t| t.span)
                    .unwrap_or_default();
                return Err(ParseError::at(
                    span,
                    format!("state `{}` has no enabled action", names[s]),
                ));
            }
            for c in &row {
                let sum = c.row_sum();
                if !sum.is_one() {
                    let span = row_spans[&(StateId(s), c.action.clone())];
                    return Err(ParseError::at(
                        span,
                        format!(
                            "row ({}, {}) sums to {}, not identically 1",
                            names[s],
                            c.action,
                            format_affine(&sum, &params)
                        ),
                    ));
                }
            }
            choices.push(row);
        }

        let Some((initial, _)) = initial else {
            return Err(ParseError::at(Span { line: 1, column: 1 }, "missing @initial"));
        };
        Pmdp::new(kind, names, initial, params, choices, targets).map_err(|e: ModelError| {
            ParseError::at(Span { line: 1, column: 1 }, e.to_string())
        })
    }
}

/// Exact rational from `a/b`, an integer or a decimal literal with optional
/// exponent.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_decimal(n.trim())?;
        let d = parse_decimal(d.trim())?;
        if d.is_zero() {
            return Err(format!("zero denominator in `{s}`"));
        }
        return Ok(n / d);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Result<Rational, String> {
    let bad = || format!("invalid number `{s}`");
    let (neg, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (body, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let numer: BigInt = digits.parse().map_err(|_| bad())?;
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        Rational::from_integer(numer * Pow::pow(&ten, scale as u32))
    } else {
        Rational::new(numer, Pow::pow(&ten, (-scale) as u32))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
enum ExprTok {
    Num(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
}

fn lex_expr(s: &str, base: Span) -> Result<Vec<(ExprTok, Span)>, ParseError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let span = Span {
            line: base.line,
            column: base.column + i,
        };
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(ExprTok::Plus),
            '-' => Some(ExprTok::Minus),
            '*' => Some(ExprTok::Star),
            '/' => Some(ExprTok::Slash),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, span));
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            out.push((ExprTok::Num(chars[start..i].iter().collect()), span));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            out.push((ExprTok::Ident(chars[start..i].iter().collect()), span));
        } else {
            return Err(ParseError::at(span, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

/// Parses an affine expression, resolving identifiers against `params`.
pub fn parse_affine(
    s: &str,
    params: &HashMap<String, ParamId>,
    base: Span,
) -> Result<AffineExpr, ParseError> {
    let toks = lex_expr(s, base)?;
    let mut pos = 0;
    let mut out = AffineExpr::zero();
    let mut sign = Rational::one();
    let end_span = Span {
        line: base.line,
        column: base.column + s.chars().count(),
    };
    let peek_span = |pos: usize| toks.get(pos).map_or(end_span, |t| t.1);
    if let Some((ExprTok::Minus | ExprTok::Plus, _)) = toks.first() {
        if toks[0].0 == ExprTok::Minus {
            sign = -sign;
        }
        pos = 1;
    }
    loop {
        // term
        let term = match toks.get(pos) {
            Some((ExprTok::Num(n), span)) => {
                let mut text = n.clone();
                pos += 1;
                if let (Some((ExprTok::Slash, _)), Some((ExprTok::Num(d), _))) = (toks.get(pos), toks.get(pos + 1)) {
                    text = format!("{text}/{d}");
                    pos += 2;
                }
                let value = parse_rational(&text).map_err(|m| ParseError::at(*span, m))?;
                if let Some((ExprTok::Star, _)) = toks.get(pos) {
                    pos += 1;
                    match toks.get(pos) {
                        Some((ExprTok::Ident(name), span)) => {
                            pos += 1;
                            AffineExpr::term(value, lookup_param(params, name, *span)?)
                        }
                        _ => return Err(ParseError::at(peek_span(pos), "expected parameter after `*`")),
                    }
                } else {
                    AffineExpr::constant(value)
                }
            }
            Some((ExprTok::Ident(name), span)) => {
                pos += 1;
                AffineExpr::param(lookup_param(params, name, *span)?)
            }
            _ => return Err(ParseError::at(peek_span(pos), "expected a number or a parameter")),
        };
        out += &term.scale(&sign);
        match toks.get(pos) {
            None => return Ok(out),
            Some((ExprTok::Plus, _)) => sign = Rational::one(),
            Some((ExprTok::Minus, _)) => sign = -Rational::one(),
            Some((_, span)) => return Err(ParseError::at(*span, "expected `+` or `-`")),
        }
        pos += 1;
    }
}

fn lookup_param(params: &HashMap<String, ParamId>, name: &str, span: Span) -> Result<ParamId, ParseError> {
    params
        .get(name)
        .copied()
        .ok_or_else(|| ParseError::at(span, format!("undeclared parameter `{name}`")))
}

/// Serializes a model; `parse_model(&write_model(m)) == m`.
pub fn write_model(m: &Pmdp) -> String {
    let mut out = String::new();
    let pmc = m.kind() == ModelKind::Pmc;
    let _ = writeln!(out, "@type {}", if pmc { "pmc" } else { "pmdp" });
    if !m.params().is_empty() {
        out.push_str("@parameters");
        for p in m.params() {
            let _ = write!(out, " {}", p.name);
            if let Some(b) = &p.bounds {
                let side = |r: &Option<Rational>| r.as_ref().map_or_else(|| "inf".to_string(), format_rational);
                let _ = write!(out, " [{},{}]", side(&b.lo), side(&b.hi));
            }
        }
        out.push('\n');
    }
    let _ = writeln!(out, "@states {}", m.state_names().join(" "));
    let _ = writeln!(out, "@initial {}", m.state_name(m.initial()));
    if !m.targets().is_empty() {
        let names: Vec<&str> = m.targets().iter().map(|t| m.state_name(*t)).collect();
        let _ = writeln!(out, "@targets {}", names.join(" "));
    }
    for s in m.states() {
        for c in m.choices(s) {
            for (t, f) in &c.transitions {
                if pmc {
                    let _ = writeln!(out, "{} {} {}", m.state_name(s), m.state_name(*t), format_affine(f, m.params()));
                } else {
                    let _ = writeln!(
                        out,
                        "{} {} {} {}",
                        m.state_name(s),
                        c.action,
                        m.state_name(*t),
                        format_affine(f, m.params())
                    );
                }
            }
        }
    }
    if m.has_costs() {
        out.push_str("@costs\n");
        for s in m.states() {
            for c in m.choices(s) {
                if let Some(cost) = &c.cost {
                    if pmc {
                        let _ = writeln!(out, "{} {}", m.state_name(s), format_rational(cost));
                    } else {
                        let _ = writeln!(out, "{} {} {}", m.state_name(s), c.action, format_rational(cost));
                    }
                }
            }
        }
    }
    out
}

/// Parses `P<=x`, `P>=x`, `E<=x` or `E>=x`.
pub fn parse_spec(text: &str) -> Result<Specification, ParseError> {
    let start = text.len() - text.trim_start().len();
    let t = text.trim();
    let span = |off: usize| Span {
        line: 1,
        column: text[..(start + off).min(text.len())].chars().count() + 1,
    };
    let kind = match t.chars().next() {
        Some('P') => SpecKind::ReachProbability,
        Some('E') => SpecKind::ExpectedCost,
        _ => return Err(ParseError::at(span(0), "specification must start with `P` or `E`")),
    };
    let rest = t[1..].trim_start();
    let op_off = t.len() - rest.len();
    let (direction, value) = if let Some(v) = rest.strip_prefix("<=") {
        (Direction::AtMost, v)
    } else if let Some(v) = rest.strip_prefix(">=") {
        (Direction::AtLeast, v)
    } else {
        return Err(ParseError::at(span(op_off), "expected `<=` or `>=`"));
    };
    let threshold = parse_rational(value).map_err(|m| ParseError::at(span(op_off + 2), m))?;
    Specification::new(kind, direction, threshold).map_err(|e| ParseError::at(span(op_off + 2), e.to_string()))
}

/// Parses a valuation file: one `<id> = <decimal>` per line.
pub fn parse_valuation(text: &str, m: &Pmdp) -> Result<Instantiation, ParseError> {
    let mut u = Instantiation::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let span = Span {
            line: idx + 1,
            column: line.len() - line.trim_start().len() + 1,
        };
        let (name, value) = line
            .split_once('=')
            .ok_or_else(|| ParseError::at(span, "expected `<id> = <value>`"))?;
        let name = name.trim();
        let p = m
            .param_index(name)
            .ok_or_else(|| ParseError::at(span, format!("unknown parameter `{name}`")))?;
        if u.get(p).is_some() {
            return Err(ParseError::at(span, format!("parameter `{name}` assigned twice")));
        }
        let value = parse_rational(value).map_err(|msg| ParseError::at(span, msg))?;
        u.insert(p, value);
    }
    if let Some(missing) = m.params().iter().find(|p| u.get(m.param_index(&p.name).unwrap()).is_none()) {
        return Err(ParseError::at(
            Span { line: 1, column: 1 },
            format!("parameter `{}` has no value", missing.name),
        ));
    }
    Ok(u)
}

/// Writes a valuation file. Floats use the shortest representation that
/// round-trips, so the output is a pure function of the values.
pub fn write_valuation(m: &Pmdp, values: &[f64]) -> String {
    let mut out = String::new();
    for (p, v) in m.params().iter().zip(values) {
        let _ = writeln!(out, "{} = {}", p.name, DecimalF64(*v));
    }
    out
}

/// Formats a float in plain decimal (no exponent), round-trip exact.
pub struct DecimalF64(pub f64);

impl fmt::Display for DecimalF64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `{}` on f64 never uses exponent notation and round-trips
        write!(f, "{}", self.0)
    }
}

/// A `key = value` block, printed in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValueBlock {
    pub entries: Vec<(String, String)>,
}

impl KeyValueBlock {
    pub fn push(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Self { entries }
    }
}

impl fmt::Display for KeyValueBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
