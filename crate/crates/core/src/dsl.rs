//! The step-sequence program language.
//!
//! ```text
//! STEP    := VAR '=' MODNAME '(' [ARG (',' ARG)*] ')'
//! ARG     := NAME '=' (QUOTED | NUMBER | 'True' | 'False' | 'None' | VAR)
//! VAR     := [A-Z][A-Z0-9_]*
//! MODNAME := [A-Za-z][A-Za-z0-9_]*
//! ```
//!
//! Quoted text may use single or double quotes; `\'`, `\"` and `\\` are
//! escapes, any other backslash is kept literally. Programs are one step per
//! line; blank lines and lines starting with `#` are ignored.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::signature::{ArgType, Signatures};
use crate::value::{format_number, is_identifier, ValueKind};

#[derive(Debug, Clone, PartialEq)]
pub enum ArgValue {
    Text(String),
    Number(f64),
    Bool(bool),
    None,
    Var(String),
}

impl ArgValue {
    /// Kind of the value this literal produces; `None` for variable references.
    pub fn literal_kind(&self) -> Option<ValueKind> {
        match self {
            ArgValue::Text(_) => Some(ValueKind::Text),
            ArgValue::Number(_) => Some(ValueKind::Number),
            ArgValue::Bool(_) => Some(ValueKind::Boolean),
            ArgValue::None => Some(ValueKind::Null),
            ArgValue::Var(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramStep {
    pub output: String,
    pub module: String,
    pub args: Vec<(String, ArgValue)>,
}

impl ProgramStep {
    pub fn arg(&self, name: &str) -> Option<&ArgValue> {
        self.args.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

impl fmt::Display for ProgramStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_step(self))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub steps: Vec<ProgramStep>,
    pub source: String,
}

impl Program {
    /// Canonical text, one rendered step per line.
    pub fn render(&self) -> String {
        self.steps.iter().map(render_step).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("syntax error at column {column}: expected {}, found {found}", expected.join(" or "))]
pub struct SyntaxError {
    /// 1-based character column.
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("line {line}: {error}")]
pub struct LineError {
    pub line: usize,
    pub error: SyntaxError,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("program is empty")]
    EmptyProgram,
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Syntax(Vec<LineError>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Eq,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Str(_) => "quoted text".into(),
            Tok::Num(n) => format!("number {}", format_number(*n)),
            Tok::Eq => "'='".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::End => "end of line".into(),
        }
    }
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { chars: src.chars().collect(), pos: 0, _src: src }
    }

    fn err(&self, column: usize, expected: &[&str], found: impl Into<String>) -> SyntaxError {
        SyntaxError {
            column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: found.into(),
        }
    }

    /// Returns the next token and its 1-based column.
    fn next(&mut self) -> Result<(Tok, usize), SyntaxError> {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
        let col = self.pos + 1;
        let Some(&c) = self.chars.get(self.pos) else {
            return Ok((Tok::End, col));
        };
        let single = |t| (t, col);
        match c {
            '=' => {
                self.pos += 1;
                Ok(single(Tok::Eq))
            }
            '(' => {
                self.pos += 1;
                Ok(single(Tok::LParen))
            }
            ')' => {
                self.pos += 1;
                Ok(single(Tok::RParen))
            }
            ',' => {
                self.pos += 1;
                Ok(single(Tok::Comma))
            }
            '\'' | '"' => self.quoted(c, col),
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = self.pos;
                while self.pos < self.chars.len()
                    && (self.chars[self.pos].is_ascii_alphanumeric() || self.chars[self.pos] == '_')
                {
                    self.pos += 1;
                }
                Ok((Tok::Ident(self.chars[start..self.pos].iter().collect()), col))
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => self.number(col),
            other => Err(self.err(col, &["token"], format!("{other:?}"))),
        }
    }

    fn quoted(&mut self, quote: char, col: usize) -> Result<(Tok, usize), SyntaxError> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.chars.get(self.pos) {
                None => {
                    return Err(self.err(self.pos + 1, &[if quote == '\'' { "\"'\"" } else { "'\"'" }], "end of line"))
                }
                Some('\\') => match self.chars.get(self.pos + 1) {
                    Some(&e @ ('\'' | '"' | '\\')) => {
                        out.push(e);
                        self.pos += 2;
                    }
                    _ => {
                        out.push('\\');
                        self.pos += 1;
                    }
                },
                Some(&c) if c == quote => {
                    self.pos += 1;
                    return Ok((Tok::Str(out), col));
                }
                Some(&c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn number(&mut self, col: usize) -> Result<(Tok, usize), SyntaxError> {
        let start = self.pos;
        let at = |p: usize| self.chars.get(p).copied();
        let mut p = self.pos;
        if at(p) == Some('-') {
            p += 1;
        }
        let int_start = p;
        while at(p).is_some_and(|c| c.is_ascii_digit()) {
            p += 1;
        }
        let mut digits = p - int_start;
        if at(p) == Some('.') {
            p += 1;
            let frac_start = p;
            while at(p).is_some_and(|c| c.is_ascii_digit()) {
                p += 1;
            }
            digits += p - frac_start;
        }
        if digits == 0 {
            return Err(self.err(col, &["number"], format!("{:?}", self.chars[start..p.max(start + 1)].iter().collect::<String>())));
        }
        if matches!(at(p), Some('e' | 'E')) {
            let mut q = p + 1;
            if matches!(at(q), Some('+' | '-')) {
                q += 1;
            }
            let exp_start = q;
            while at(q).is_some_and(|c| c.is_ascii_digit()) {
                q += 1;
            }
            if q > exp_start {
                p = q;
            }
        }
        let text: String = self.chars[start..p].iter().collect();
        self.pos = p;
        match text.parse::<f64>() {
            Ok(n) if n.is_finite() => Ok((Tok::Num(n), col)),
            _ => Err(self.err(col, &["finite number"], format!("{text:?}"))),
        }
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    peeked: Option<(Tok, usize)>,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<&(Tok, usize), SyntaxError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lex.next()?);
        }
        Ok(self.peeked.as_ref().unwrap())
    }

    fn bump(&mut self) -> Result<(Tok, usize), SyntaxError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex.next(),
        }
    }

    fn expect(&mut self, want: Tok, label: &str) -> Result<usize, SyntaxError> {
        let (tok, col) = self.bump()?;
        if tok == want {
            Ok(col)
        } else {
            Err(unexpected(col, &[label], &tok))
        }
    }

    fn ident(&mut self, label: &str) -> Result<(String, usize), SyntaxError> {
        match self.bump()? {
            (Tok::Ident(s), col) => Ok((s, col)),
            (tok, col) => Err(unexpected(col, &[label], &tok)),
        }
    }

    fn value(&mut self) -> Result<ArgValue, SyntaxError> {
        const EXPECTED: &[&str] = &["quoted text", "number", "True", "False", "None", "variable"];
        match self.bump()? {
            (Tok::Str(s), _) => Ok(ArgValue::Text(s)),
            (Tok::Num(n), _) => Ok(ArgValue::Number(n)),
            (Tok::Ident(s), col) => match s.as_str() {
                "True" => Ok(ArgValue::Bool(true)),
                "False" => Ok(ArgValue::Bool(false)),
                "None" => Ok(ArgValue::None),
                _ if is_identifier(&s) => Ok(ArgValue::Var(s)),
                _ => Err(unexpected(col, EXPECTED, &Tok::Ident(s))),
            },
            (tok, col) => Err(unexpected(col, EXPECTED, &tok)),
        }
    }

    fn step(&mut self) -> Result<ProgramStep, SyntaxError> {
        let (output, col) = self.ident("variable")?;
        if !is_identifier(&output) {
            return Err(unexpected(col, &["variable"], &Tok::Ident(output)));
        }
        self.expect(Tok::Eq, "'='")?;
        let (module, col) = self.ident("module name")?;
        if !module.starts_with(|c: char| c.is_ascii_alphabetic()) {
            return Err(unexpected(col, &["module name"], &Tok::Ident(module)));
        }
        self.expect(Tok::LParen, "'('")?;
        let mut args: Vec<(String, ArgValue)> = Vec::new();
        if matches!(self.peek()?.0, Tok::RParen) {
            self.bump()?;
        } else {
            loop {
                let (name, col) = self.ident("argument name")?;
                if args.iter().any(|(n, _)| *n == name) {
                    return Err(SyntaxError {
                        column: col,
                        expected: vec!["unique argument name".into()],
                        found: format!("duplicate {name:?}"),
                    });
                }
                self.expect(Tok::Eq, "'='")?;
                let v = self.value()?;
                args.push((name, v));
                match self.bump()? {
                    (Tok::Comma, _) => continue,
                    (Tok::RParen, _) => break,
                    (tok, col) => return Err(unexpected(col, &["')'", "','"], &tok)),
                }
            }
        }
        let (tok, col) = self.bump()?;
        if tok != Tok::End {
            return Err(unexpected(col, &["end of line"], &tok));
        }
        Ok(ProgramStep { output, module, args })
    }
}

fn unexpected(column: usize, expected: &[&str], found: &Tok) -> SyntaxError {
    SyntaxError {
        column,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found: found.describe(),
    }
}

/// Parses one program line.
pub fn parse_step(line: &str) -> Result<ProgramStep, SyntaxError> {
    if let Some(col) = line.chars().position(|c| c == '\n' || c == '\r') {
        return Err(SyntaxError {
            column: col + 1,
            expected: vec!["single line".into()],
            found: "line break".into(),
        });
    }
    Parser { lex: Lexer::new(line), peeked: None }.step()
}

/// Parses a whole program, collecting every line's syntax error.
pub fn parse_program(src: &str) -> Result<Program, ProgramError> {
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_step(line) {
            Ok(s) => steps.push(s),
            Err(error) => errors.push(LineError { line: i + 1, error }),
        }
    }
    if !errors.is_empty() {
        return Err(ProgramError::Syntax(errors));
    }
    if steps.is_empty() {
        return Err(ProgramError::EmptyProgram);
    }
    Ok(Program { steps, source: src.to_string() })
}

/// Quotes text with single quotes, escaping backslashes and single quotes.
pub fn quote_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        if c == '\\' || c == '\'' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

pub fn render_arg_value(v: &ArgValue) -> String {
    match v {
        ArgValue::Text(s) => quote_text(s),
        ArgValue::Number(n) => format_number(*n),
        ArgValue::Bool(true) => "True".into(),
        ArgValue::Bool(false) => "False".into(),
        ArgValue::None => "None".into(),
        ArgValue::Var(v) => v.clone(),
    }
}

/// Canonical rendering: no spaces anywhere outside quoted text.
pub fn render_step(step: &ProgramStep) -> String {
    let args: Vec<String> = step
        .args
        .iter()
        .map(|(n, v)| format!("{n}={}", render_arg_value(v)))
        .collect();
    format!("{}={}({})", step.output, step.module, args.join(","))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum IssueKind {
    UnknownModule { module: String },
    UnknownArgument { arg: String },
    MissingArgument { arg: String },
    DuplicateArgument { arg: String },
    UndefinedVariable { name: String },
    OutputCollision { name: String },
    TypeMismatch { arg: String, expected: String, actual: String },
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IssueKind::UnknownModule { module } => write!(f, "unknown module {module}"),
            IssueKind::UnknownArgument { arg } => write!(f, "unknown argument {arg}"),
            IssueKind::MissingArgument { arg } => write!(f, "missing argument {arg}"),
            IssueKind::DuplicateArgument { arg } => write!(f, "duplicate argument {arg}"),
            IssueKind::UndefinedVariable { name } => write!(f, "undefined variable {name}"),
            IssueKind::OutputCollision { name } => write!(f, "output {name} is already defined"),
            IssueKind::TypeMismatch { arg, expected, actual } => {
                write!(f, "argument {arg} expects {expected}, got {actual}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    /// 1-based step number.
    pub step: usize,
    #[serde(flatten)]
    pub kind: IssueKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "step {}: {}", issue.step, issue.kind)?;
        }
        Ok(())
    }
}

/// Static checks against module signatures. Input kinds are unknown.
pub fn validate<'a>(
    program: &Program,
    sigs: &dyn Signatures,
    inputs: impl IntoIterator<Item = &'a str>,
) -> ValidationReport {
    let inputs: HashMap<String, Option<ValueKind>> = inputs.into_iter().map(|n| (n.to_string(), None)).collect();
    validate_typed(program, sigs, &inputs)
}

/// Like [`validate`], but with optional known kinds for inputs.
pub fn validate_typed(
    program: &Program,
    sigs: &dyn Signatures,
    inputs: &HashMap<String, Option<ValueKind>>,
) -> ValidationReport {
    // Known type of each defined variable; `None` means unknown.
    let mut defined: HashMap<String, Option<ArgType>> =
        inputs.iter().map(|(n, k)| (n.clone(), k.map(ArgType::Kind))).collect();
    let mut issues = Vec::new();
    for (i, step) in program.steps.iter().enumerate() {
        let n = i + 1;
        let mut push = |kind| issues.push(Issue { step: n, kind });
        let sig = sigs.signature(&step.module);
        if sig.is_none() {
            push(IssueKind::UnknownModule { module: step.module.clone() });
        }
        let mut seen = HashSet::new();
        for (arg, value) in &step.args {
            if !seen.insert(arg.as_str()) {
                push(IssueKind::DuplicateArgument { arg: arg.clone() });
            }
            let actual: Option<ArgType> = match value {
                ArgValue::Var(v) => match defined.get(v) {
                    Some(t) => *t,
                    None => {
                        push(IssueKind::UndefinedVariable { name: v.clone() });
                        None
                    }
                },
                lit => lit.literal_kind().map(ArgType::Kind),
            };
            let Some(sig) = sig else { continue };
            match sig.arg(arg) {
                None => push(IssueKind::UnknownArgument { arg: arg.clone() }),
                Some(spec) => {
                    if let Some(actual) = actual {
                        if !spec.ty.overlaps(&actual) {
                            push(IssueKind::TypeMismatch {
                                arg: arg.clone(),
                                expected: spec.ty.to_string(),
                                actual: actual.to_string(),
                            });
                        }
                    }
                }
            }
        }
        if let Some(sig) = sig {
            for spec in sig.args.iter().filter(|a| a.required) {
                if step.arg(spec.name).is_none() {
                    push(IssueKind::MissingArgument { arg: spec.name.to_string() });
                }
            }
        }
        if defined.contains_key(&step.output) {
            push(IssueKind::OutputCollision { name: step.output.clone() });
        } else {
            defined.insert(step.output.clone(), sig.map(|s| s.output));
        }
    }
    ValidationReport { issues }
}
