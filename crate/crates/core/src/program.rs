//! Explanation programs: AST, parser and canonical printer.
//!
//! A program is a set of statements of four shapes:
//!
//! ```text
//! Q0 -> Mul (Q1, Q2)          computation over sub-questions
//! Q1 -> A1 because F1         value reference justified by a fact
//! Q1: What is ...?            question declaration
//! F1: There are 7 days ...    fact declaration
//! A1: 18 L                    value declaration
//! ```
//!
//! Statements are separated by newlines or by commas. `P` is accepted as an
//! alias for the root question `Q0` (`P: Mul (Q1, Q2)`), and `|` is accepted
//! in place of `because`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::units::format_number;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IdKind {
    Question,
    Fact,
    Value,
}

impl IdKind {
    fn prefix(self) -> char {
        match self {
            IdKind::Question => 'Q',
            IdKind::Fact => 'F',
            IdKind::Value => 'A',
        }
    }
}

/// `Q<n>`, `F<n>` or `A<n>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Identifier {
    pub kind: IdKind,
    pub index: u32,
}

impl Identifier {
    pub const ROOT: Identifier = Identifier::question(0);

    pub const fn question(index: u32) -> Identifier {
        Identifier {
            kind: IdKind::Question,
            index,
        }
    }

    pub const fn fact(index: u32) -> Identifier {
        Identifier {
            kind: IdKind::Fact,
            index,
        }
    }

    pub const fn value(index: u32) -> Identifier {
        Identifier {
            kind: IdKind::Value,
            index,
        }
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.prefix(), self.index)
    }
}

impl FromStr for Identifier {
    type Err = ();

    fn from_str(s: &str) -> Result<Identifier, ()> {
        let mut chars = s.chars();
        let kind = match chars.next() {
            Some('Q') => IdKind::Question,
            Some('F') => IdKind::Fact,
            Some('A') => IdKind::Value,
            _ => return Err(()),
        };
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(());
        }
        let index = digits.parse().map_err(|_| ())?;
        Ok(Identifier { kind, index })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operator {
    Add,
    Sub,
    Mul,
    Div,
}

impl Operator {
    pub fn name(self) -> &'static str {
        match self {
            Operator::Add => "Add",
            Operator::Sub => "Sub",
            Operator::Mul => "Mul",
            Operator::Div => "Div",
        }
    }

    pub fn from_name(name: &str) -> Option<Operator> {
        match name {
            "Add" => Some(Operator::Add),
            "Sub" => Some(Operator::Sub),
            "Mul" => Some(Operator::Mul),
            "Div" => Some(Operator::Div),
            _ => None,
        }
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Operator::Add | Operator::Mul => n >= 2,
            Operator::Sub | Operator::Div => n == 2,
        }
    }
}

/// Argument of a math expression: a sub-question or a dimensionless literal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arg {
    Question(Identifier),
    Literal(f64),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Question(id) => id.fmt(f),
            Arg::Literal(x) => f.write_str(&format_number(*x)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MathExpr {
    pub op: Operator,
    pub args: Vec<Arg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValueRef {
    pub value: Identifier,
    pub because: Identifier,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CompBody {
    Math(MathExpr),
    Value(ValueRef),
}

impl fmt::Display for CompBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompBody::Math(m) => {
                write!(f, "{}(", m.op.name())?;
                for (i, a) in m.args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt(f)?;
                }
                f.write_str(")")
            }
            CompBody::Value(v) => write!(f, "{} because {}", v.value, v.because),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Statement {
    Comp { target: Identifier, body: CompBody },
    Question { id: Identifier, text: String },
    Fact { id: Identifier, text: String },
    Value { id: Identifier, quantity_text: String },
}

impl Statement {
    // Canonical ordering: declarations (questions, values, facts) first, then
    // computations, each group by index.
    fn sort_key(&self) -> (u8, u32) {
        match self {
            Statement::Question { id, .. } => (0, id.index),
            Statement::Value { id, .. } => (1, id.index),
            Statement::Fact { id, .. } => (2, id.index),
            Statement::Comp { target, .. } => (3, target.index),
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Comp { target, body } => write!(f, "{target} -> {body}"),
            Statement::Question { id, text } | Statement::Fact { id, text } => {
                write!(f, "{id}: {text}")
            }
            Statement::Value { id, quantity_text } => write!(f, "{id}: {quantity_text}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("empty program")]
    Empty,
    #[error("{line}:{column}: {message} (at {token:?})")]
    Syntax {
        line: usize,
        column: usize,
        token: String,
        message: String,
    },
    #[error("{line}:{column}: unknown operator {name:?}")]
    UnknownOperator {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("{0} is defined twice with conflicting bodies")]
    DuplicateDefinition(Identifier),
}

/// A parsed program. Statements are held in canonical order, so two programs
/// with the same statements compare equal regardless of source order.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    statements: Vec<Statement>,
    root: Identifier,
}

impl Program {
    /// Builds a program from statements, dropping exact duplicates.
    pub fn new(statements: Vec<Statement>) -> Result<Program, ParseError> {
        let mut seen: HashMap<(u8, u32), &Statement> = HashMap::new();
        let mut keep = Vec::with_capacity(statements.len());
        for s in &statements {
            match seen.get(&s.sort_key()) {
                Some(prev) if *prev == s => continue,
                Some(_) => {
                    let id = match s {
                        Statement::Comp { target, .. } => *target,
                        Statement::Question { id, .. }
                        | Statement::Fact { id, .. }
                        | Statement::Value { id, .. } => *id,
                    };
                    return Err(ParseError::DuplicateDefinition(id));
                }
                None => {
                    seen.insert(s.sort_key(), s);
                    keep.push(s.clone());
                }
            }
        }
        keep.sort_by_key(Statement::sort_key);
        Ok(Program {
            statements: keep,
            root: Identifier::ROOT,
        })
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn root(&self) -> Identifier {
        self.root
    }

    pub fn computation(&self, target: Identifier) -> Option<&CompBody> {
        self.statements.iter().find_map(|s| match s {
            Statement::Comp { target: t, body } if *t == target => Some(body),
            _ => None,
        })
    }

    /// Fact ids cited by value references. Declarations alone are not uses.
    pub fn used_fact_ids(&self) -> BTreeSet<Identifier> {
        self.statements
            .iter()
            .filter_map(|s| match s {
                Statement::Comp {
                    body: CompBody::Value(v),
                    ..
                } => Some(v.because),
                _ => None,
            })
            .collect()
    }

    pub fn declared_fact_ids(&self) -> BTreeSet<Identifier> {
        self.statements
            .iter()
            .filter_map(|s| match s {
                Statement::Fact { id, .. } => Some(*id),
                _ => None,
            })
            .collect()
    }

    pub fn facts(&self) -> impl Iterator<Item = (Identifier, &str)> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Fact { id, text } => Some((*id, text.as_str())),
            _ => None,
        })
    }

    /// Copy of the program with fact declarations removed.
    pub fn without_fact_decls(&self) -> Program {
        Program {
            statements: self
                .statements
                .iter()
                .filter(|s| !matches!(s, Statement::Fact { .. }))
                .cloned()
                .collect(),
            root: self.root,
        }
    }

    /// Renames fact ids in citations and declarations. Ids missing from
    /// `mapping` are left as they are.
    pub fn remap_facts(&self, mapping: &BTreeMap<Identifier, Identifier>) -> Result<Program, ParseError> {
        let map = |id: Identifier| mapping.get(&id).copied().unwrap_or(id);
        let statements = self
            .statements
            .iter()
            .map(|s| match s {
                Statement::Comp {
                    target,
                    body: CompBody::Value(v),
                } => Statement::Comp {
                    target: *target,
                    body: CompBody::Value(ValueRef {
                        value: v.value,
                        because: map(v.because),
                    }),
                },
                Statement::Fact { id, text } => Statement::Fact {
                    id: map(*id),
                    text: text.clone(),
                },
                other => other.clone(),
            })
            .collect();
        Program::new(statements)
    }

    /// Nesting depth of computations reachable from the root; a root that is
    /// a single value reference has depth 1. Cycles and dangling references
    /// stop the descent.
    pub fn depth(&self) -> usize {
        fn walk(p: &Program, id: Identifier, on_path: &mut Vec<Identifier>) -> usize {
            if on_path.contains(&id) {
                return 0;
            }
            let Some(body) = p.computation(id) else {
                return 0;
            };
            on_path.push(id);
            let d = match body {
                CompBody::Value(_) => 1,
                CompBody::Math(m) => {
                    1 + m
                        .args
                        .iter()
                        .map(|a| match a {
                            Arg::Question(q) => walk(p, *q, on_path),
                            Arg::Literal(_) => 0,
                        })
                        .max()
                        .unwrap_or(0)
                }
            };
            on_path.pop();
            d
        }
        walk(self, self.root, &mut Vec::new())
    }

    /// Canonical text: one statement per line.
    pub fn render(&self) -> String {
        let lines: Vec<String> = self.statements.iter().map(|s| s.to_string()).collect();
        lines.join("\n")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Program, ParseError> {
        parse_program(s)
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut statements = Vec::new();
    for (offset, chunk) in split_statements(text) {
        statements.push(parse_statement(text, offset, chunk)?);
    }
    if statements.is_empty() {
        return Err(ParseError::Empty);
    }
    Program::new(statements)
}

pub fn render_program(p: &Program) -> String {
    p.render()
}

pub fn used_fact_ids(p: &Program) -> BTreeSet<Identifier> {
    p.used_fact_ids()
}

/// Length of a statement head (`Q12 ->`, `F3:`, `P:` ...) at the start of
/// `s`, if there is one.
fn statement_head(s: &str) -> Option<usize> {
    let b = s.as_bytes();
    let mut i = 0;
    match b.first()? {
        b'Q' | b'F' | b'A' => {
            i += 1;
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            if i == start {
                return None;
            }
        }
        b'P' => i += 1,
        _ => return None,
    }
    while i < b.len() && (b[i] == b' ' || b[i] == b'\t') {
        i += 1;
    }
    let rest = &s[i..];
    if rest.starts_with("->") {
        Some(i + 2)
    } else if rest.starts_with('\u{2192}') {
        Some(i + '\u{2192}'.len_utf8())
    } else if rest.starts_with(':') {
        Some(i + 1)
    } else {
        None
    }
}

/// Splits program text into statement chunks with their byte offsets. A
/// newline always ends a statement; a comma ends one only when the next
/// non-blank text starts a new statement, so commas inside sentences and
/// argument lists survive.
fn split_statements(text: &str) -> Vec<(usize, &str)> {
    fn push<'t>(out: &mut Vec<(usize, &'t str)>, text: &'t str, from: usize, to: usize) {
        let raw = &text[from..to];
        let trimmed = raw.trim_start();
        let lead = raw.len() - trimmed.len();
        let trimmed = trimmed.trim_end();
        if !trimmed.is_empty() {
            out.push((from + lead, trimmed));
        }
    }
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '\n' => {
                push(&mut out, text, start, i);
                start = i + 1;
            }
            ',' => {
                let after = text[i + 1..].trim_start();
                if statement_head(after).is_some() {
                    push(&mut out, text, start, i);
                    start = i + 1;
                }
            }
            _ => {}
        }
    }
    push(&mut out, text, start, text.len());
    out
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Number(f64),
    LParen,
    RParen,
    Comma,
    Pipe,
    Other(&'a str),
}

fn tokenize(s: &str) -> Vec<(usize, Tok<'_>)> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b',' => {
                i += 1;
                Tok::Comma
            }
            b'|' => {
                i += 1;
                Tok::Pipe
            }
            _ if c.is_ascii_alphabetic() || c == b'_' => {
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                Tok::Word(&s[start..i])
            }
            _ if c.is_ascii_digit() || c == b'.' || c == b'-' || c == b'+' => {
                i += 1;
                while i < b.len()
                    && (b[i].is_ascii_alphanumeric() || b[i] == b'.' || b[i] == b'+' || b[i] == b'-')
                {
                    // only let a sign through right after an exponent marker
                    if (b[i] == b'+' || b[i] == b'-') && !matches!(b[i - 1], b'e' | b'E') {
                        break;
                    }
                    i += 1;
                }
                match s[start..i].parse::<f64>() {
                    Ok(v) if v.is_finite() => Tok::Number(v),
                    _ => Tok::Other(&s[start..i]),
                }
            }
            _ => {
                let ch = s[i..].chars().next().map_or(1, char::len_utf8);
                i += ch;
                Tok::Other(&s[start..i])
            }
        };
        out.push((start, tok));
    }
    out
}

fn tok_text(t: &Tok<'_>) -> String {
    match t {
        Tok::Word(w) | Tok::Other(w) => (*w).to_string(),
        Tok::Number(x) => format_number(*x),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
        Tok::Pipe => "|".into(),
    }
}

fn parse_statement(text: &str, offset: usize, chunk: &str) -> Result<Statement, ParseError> {
    let syntax = |at: usize, token: &str, message: &str| {
        let (line, column) = line_col(text, offset + at);
        ParseError::Syntax {
            line,
            column,
            token: token.to_string(),
            message: message.to_string(),
        }
    };
    let Some(head_len) = statement_head(chunk) else {
        let token = chunk.split_whitespace().next().unwrap_or(chunk);
        return Err(syntax(0, token, "expected a statement such as `Q1 -> ...` or `F1: ...`"));
    };
    let head = chunk[..head_len].trim_end();
    let is_comp = !head.ends_with(':');
    let name = head
        .trim_end_matches(':')
        .trim_end_matches("->")
        .trim_end_matches('\u{2192}')
        .trim();
    let body_start = head_len + (chunk[head_len..].len() - chunk[head_len..].trim_start().len());
    let body = chunk[head_len..].trim();

    if name == "P" {
        return parse_comp_body(text, offset + body_start, body)
            .map(|body| Statement::Comp {
                target: Identifier::ROOT,
                body,
            });
    }
    let id: Identifier = name
        .parse()
        .map_err(|_| syntax(0, name, "bad identifier"))?;
    if is_comp {
        if id.kind != IdKind::Question {
            return Err(syntax(0, name, "only questions can be computed"));
        }
        let body = parse_comp_body(text, offset + body_start, body)?;
        return Ok(Statement::Comp { target: id, body });
    }
    if body.is_empty() {
        return Err(syntax(head_len, "", "empty declaration"));
    }
    let text_body = body.to_string();
    Ok(match id.kind {
        IdKind::Question => Statement::Question {
            id,
            text: text_body,
        },
        IdKind::Fact => Statement::Fact {
            id,
            text: text_body,
        },
        IdKind::Value => Statement::Value {
            id,
            quantity_text: body.trim_end_matches(',').trim_end().to_string(),
        },
    })
}

fn parse_comp_body(text: &str, offset: usize, body: &str) -> Result<CompBody, ParseError> {
    let syntax = |at: usize, token: &str, message: &str| {
        let (line, column) = line_col(text, offset + at);
        ParseError::Syntax {
            line,
            column,
            token: token.to_string(),
            message: message.to_string(),
        }
    };
    let mut toks = tokenize(body);
    // tolerate a trailing separator comma or full stop
    while matches!(toks.last(), Some((_, Tok::Comma)) | Some((_, Tok::Other(".")))) {
        toks.pop();
    }
    let end = body.len();
    let Some((at0, first)) = toks.first().cloned() else {
        return Err(syntax(0, "", "missing expression"));
    };
    let word = match first {
        Tok::Word(w) => w,
        other => return Err(syntax(at0, &tok_text(&other), "expected an operator or value id")),
    };

    // value-expr: A<n> because F<n>
    if let Ok(value) = word.parse::<Identifier>() {
        if value.kind != IdKind::Value {
            return Err(syntax(at0, word, "expected a value id or operator"));
        }
        match toks.get(1) {
            Some((_, Tok::Word("because"))) | Some((_, Tok::Pipe)) => {}
            Some((at, t)) => return Err(syntax(*at, &tok_text(t), "expected `because`")),
            None => return Err(syntax(end, "", "expected `because`")),
        }
        let because = match toks.get(2) {
            Some((at, Tok::Word(w))) => match w.parse::<Identifier>() {
                Ok(id) if id.kind == IdKind::Fact => id,
                _ => return Err(syntax(*at, w, "expected a fact id")),
            },
            Some((at, t)) => return Err(syntax(*at, &tok_text(t), "expected a fact id")),
            None => return Err(syntax(end, "", "expected a fact id")),
        };
        if let Some((at, t)) = toks.get(3) {
            return Err(syntax(*at, &tok_text(t), "unexpected trailing input"));
        }
        return Ok(CompBody::Value(ValueRef { value, because }));
    }

    // math-expr: Op ( arg, arg, ... )
    if !matches!(toks.get(1), Some((_, Tok::LParen))) {
        return Err(syntax(at0, word, "expected `(` after operator"));
    }
    let Some(op) = Operator::from_name(word) else {
        let (line, column) = line_col(text, offset + at0);
        return Err(ParseError::UnknownOperator {
            line,
            column,
            name: word.to_string(),
        });
    };
    let mut args = Vec::new();
    let mut i = 2;
    loop {
        match toks.get(i) {
            Some((_, Tok::RParen)) if args.is_empty() => {
                i += 1;
                break;
            }
            Some((at, Tok::Word(w))) => match w.parse::<Identifier>() {
                Ok(id) if id.kind == IdKind::Question => args.push(Arg::Question(id)),
                _ => return Err(syntax(*at, w, "operator arguments must be question ids or numbers")),
            },
            Some((_, Tok::Number(x))) => args.push(Arg::Literal(*x)),
            Some((at, t)) => return Err(syntax(*at, &tok_text(t), "expected an argument")),
            None => return Err(syntax(end, "", "unclosed `(`")),
        }
        i += 1;
        match toks.get(i) {
            Some((_, Tok::Comma)) => i += 1,
            Some((_, Tok::RParen)) => {
                i += 1;
                break;
            }
            Some((at, t)) => return Err(syntax(*at, &tok_text(t), "expected `,` or `)`")),
            None => return Err(syntax(end, "", "unclosed `(`")),
        }
    }
    if let Some((at, t)) = toks.get(i) {
        return Err(syntax(*at, &tok_text(t), "unexpected trailing input"));
    }
    if !op.arity_ok(args.len()) {
        return Err(syntax(
            at0,
            word,
            match op {
                Operator::Add | Operator::Mul => "needs at least two arguments",
                Operator::Sub | Operator::Div => "needs exactly two arguments",
            },
        ));
    }
    Ok(CompBody::Math(MathExpr { op, args }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const WATER: &str = "Q0 -> Mul (Q1, Q2)\nQ1 -> A1 because F1\nQ2 -> A2 because F2\nA1: 7\nA2: 18 L\nF1: There are 7 days in a week.\nF2: An average student's water consumption per day amounts to 18 litres.";

    #[test]
    fn parses_water_example() {
        let p = parse_program(WATER).unwrap();
        assert_eq!(p.statements().len(), 7);
        assert_eq!(p.root(), Identifier::ROOT);
        assert!(matches!(
            p.computation(Identifier::ROOT),
            Some(CompBody::Math(MathExpr { op: Operator::Mul, .. }))
        ));
    }

    #[test]
    fn comma_separated_minimal() {
        let p = parse_program("Q0 -> A1 because F1, A1: 5, F1: x.").unwrap();
        assert_eq!(p.statements().len(), 3);
        assert_eq!(p.root(), Identifier::ROOT);
    }

    #[test]
    fn unknown_operator() {
        let err = parse_program("Q0 -> Frob(Q1)").unwrap_err();
        assert!(matches!(err, ParseError::UnknownOperator { ref name, line: 1, column: 7 } if name == "Frob"));
    }

    #[test]
    fn canonical_rendering() {
        let p = parse_program("Q0 -> A1 because F1\nA1: 7\nF1: t").unwrap();
        assert_eq!(p.render(), "A1: 7\nF1: t\nQ0 -> A1 because F1");
        let again = parse_program(&p.render()).unwrap();
        assert_eq!(again.render(), p.render());
    }

    #[test]
    fn root_alias_and_pipe() {
        let a = parse_program("Q2 -> A2 because  F2, Q1 -> A1 because F1, P: Mul (Q1, Q2)").unwrap();
        let b = parse_program("Q0 -> Mul(Q1, Q2)\nQ1 -> A1 | F1\nQ2 -> A2 | F2").unwrap();
        let c = parse_program("P -> Mul(Q1,Q2), Q1 -> A1 because F1, Q2 -> A2 because F2").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn commas_inside_sentences_survive() {
        let p = parse_program(
            "F1: At any given time, 1270000 people are airborne., Q1 -> A1 because F1, A1: 1270000, P: Mul (Q1, Q1)",
        )
        .unwrap();
        let fact = p.facts().next().unwrap();
        assert_eq!(fact.1, "At any given time, 1270000 people are airborne.");
    }

    #[test]
    fn used_facts() {
        assert_eq!(
            parse_program(WATER).unwrap().used_fact_ids(),
            [Identifier::fact(1), Identifier::fact(2)].into()
        );
        let none = parse_program("Q0 -> Mul(2, 3)").unwrap();
        assert!(none.used_fact_ids().is_empty());
        let p = parse_program(
            "F1: a\nF2: b\nF3: c\nF4: d\nF5: e\nA1: 1\nQ0 -> A1 because F2",
        )
        .unwrap();
        assert_eq!(p.used_fact_ids(), [Identifier::fact(2)].into());
    }

    #[test]
    fn duplicate_definitions() {
        assert_eq!(
            parse_program("A1: 5\nA1: 6\nQ0 -> A1 because F1").unwrap_err(),
            ParseError::DuplicateDefinition(Identifier::value(1))
        );
        assert_eq!(
            parse_program("Q0 -> A1 because F1\nQ0 -> A2 because F1").unwrap_err(),
            ParseError::DuplicateDefinition(Identifier::ROOT)
        );
        // identical repeats are harmless
        assert!(parse_program("A1: 5\nA1: 5\nQ0 -> A1 because F1").is_ok());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_program("A1: 5\nQ0 -> Mul(Q1 Q2)").unwrap_err() {
            ParseError::Syntax { line, column, token, .. } => {
                assert_eq!((line, column), (2, 14));
                assert_eq!(token, "Q2");
            }
            e => panic!("{e:?}"),
        }
        assert!(matches!(parse_program("Q0 -> Sub(Q1, Q2, Q3)"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("Q0 -> Mul(Q1)"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("Q0 -> A1"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("Q0 -> F1 because A1"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("hello"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("F1 -> A1 because F1"), Err(ParseError::Syntax { .. })));
        assert_eq!(parse_program("  \n "), Err(ParseError::Empty));
    }

    #[test]
    fn literal_arguments() {
        let p = parse_program("Q0 -> Div(Q1, 2)\nQ1 -> A1 because F1\nA1: 3").unwrap();
        assert_eq!(
            p.computation(Identifier::ROOT),
            Some(&CompBody::Math(MathExpr {
                op: Operator::Div,
                args: vec![Arg::Question(Identifier::question(1)), Arg::Literal(2.0)],
            }))
        );
        assert_eq!(p.depth(), 2);
    }

    #[test]
    fn remap_and_strip_facts() {
        let p = parse_program(WATER).unwrap();
        let m: BTreeMap<_, _> = [(Identifier::fact(1), Identifier::fact(7))].into();
        let q = p.remap_facts(&m).unwrap();
        assert_eq!(q.used_fact_ids(), [Identifier::fact(2), Identifier::fact(7)].into());
        assert!(p.without_fact_decls().declared_fact_ids().is_empty());
    }

    fn arb_program() -> impl Strategy<Value = Program> {
        let text = "[a-zA-Z][a-zA-Z0-9 ,.'?]{0,30}[a-zA-Z0-9.?]";
        (1u32..8, proptest::collection::vec((0u8..4, any::<bool>(), 2usize..4), 1..8), text)
            .prop_flat_map(move |(n_vals, ops, t)| {
                let n_q = ops.len() as u32;
                (
                    Just(n_vals),
                    Just(ops),
                    proptest::collection::vec(text, n_vals as usize),
                    proptest::collection::vec(0.001f64..1e6, n_vals as usize),
                    Just(t),
                    Just(n_q),
                )
            })
            .prop_map(|(n_vals, ops, texts, values, qtext, n_q)| {
                let mut st = Vec::new();
                // math questions Q0..Q{n_q-1}; value questions after them
                for (i, (op, lit, arity)) in ops.iter().enumerate() {
                    let op = [Operator::Add, Operator::Sub, Operator::Mul, Operator::Div][*op as usize];
                    let arity = if matches!(op, Operator::Sub | Operator::Div) { 2 } else { *arity };
                    let mut args = Vec::new();
                    for j in 0..arity {
                        if *lit && j == arity - 1 {
                            args.push(Arg::Literal(0.5 * (j as f64 + 1.0)));
                        } else {
                            let next = i as u32 + 1 + j as u32;
                            args.push(Arg::Question(Identifier::question(next.min(n_q + n_vals - 1))));
                        }
                    }
                    st.push(Statement::Comp { target: Identifier::question(i as u32), body: CompBody::Math(MathExpr { op, args }) });
                }
                for v in 0..n_vals {
                    st.push(Statement::Comp {
                        target: Identifier::question(n_q + v),
                        body: CompBody::Value(ValueRef { value: Identifier::value(v + 1), because: Identifier::fact(v + 1) }),
                    });
                    st.push(Statement::Value { id: Identifier::value(v + 1), quantity_text: format!("{} m**2", format_number(values[v as usize])) });
                    st.push(Statement::Fact { id: Identifier::fact(v + 1), text: texts[v as usize].clone() });
                }
                st.push(Statement::Question { id: Identifier::ROOT, text: qtext });
                Program::new(st).unwrap()
            })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(p in arb_program()) {
            let text = p.render();
            let back = parse_program(&text).unwrap();
            prop_assert_eq!(&back, &p);
            // comma-joined form parses to the same program
            let comma = p.statements().iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ");
            prop_assert_eq!(parse_program(&comma).unwrap(), p);
        }

        #[test]
        fn statement_order_is_irrelevant(p in arb_program(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut lines: Vec<String> = p.statements().iter().map(|s| s.to_string()).collect();
            lines.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(parse_program(&lines.join("\n")).unwrap(), p);
        }
    }
}
