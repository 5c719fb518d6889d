//! Restricted infix expressions for the `EVAL` module.
//!
//! Precedence, loosest first: `A if C else B`, `or`/`xor`, `and`, `not`,
//! comparisons (non-chaining), `+ -`, `* /`, unary `-`. `and`, `or` and the
//! conditional evaluate lazily. There are no calls, attributes or loops.

use thiserror::Error;

use crate::error::StateError;
use crate::value::{format_number, is_identifier, ProgramState, Value, ValueKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("expression syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("expression type error: {0}")]
    Type(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error(transparent)]
    Unbound(#[from] StateError),
    #[error("cannot splice {name} ({kind}) into an expression")]
    UnsupportedValueKind { name: String, kind: ValueKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Xor,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Text(String),
    Bool(bool),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Cond { then: Box<Expr>, cond: Box<Expr>, otherwise: Box<Expr> },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Word(String),
    Op(&'static str),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        match c {
            '(' => {
                out.push((Tok::LParen, start));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, start));
                i += 1;
            }
            '\'' | '"' => {
                let quote = c;
                i += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None => return Err(ExprError::Syntax { pos: start, msg: "unterminated text".into() }),
                        Some('\\') if matches!(chars.get(i + 1), Some('\'' | '"' | '\\')) => {
                            s.push(chars[i + 1]);
                            i += 2;
                        }
                        Some(&ch) if ch == quote => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push((Tok::Str(s), start));
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && matches!(chars[i], 'e' | 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && matches!(chars[j], '+' | '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let n = text
                    .parse::<f64>()
                    .map_err(|_| ExprError::Syntax { pos: start, msg: format!("bad number {text:?}") })?;
                out.push((Tok::Num(n), start));
            }
            c if c.is_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Word(chars[start..i].iter().collect()), start));
            }
            _ => {
                let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
                let op = match two.as_str() {
                    "==" => Some("=="),
                    "!=" => Some("!="),
                    "<=" => Some("<="),
                    ">=" => Some(">="),
                    _ => None,
                };
                if let Some(op) = op {
                    out.push((Tok::Op(op), start));
                    i += 2;
                    continue;
                }
                let op = match c {
                    '+' => "+",
                    '-' => "-",
                    '*' => "*",
                    '/' => "/",
                    '<' => "<",
                    '>' => ">",
                    other => {
                        return Err(ExprError::Syntax { pos: start, msg: format!("unexpected character {other:?}") })
                    }
                };
                out.push((Tok::Op(op), start));
                i += 1;
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { pos: self.offset(), msg: msg.into() })
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x == w)
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let then = self.or_expr()?;
        if self.is_word("if") {
            self.pos += 1;
            let cond = self.or_expr()?;
            if !self.is_word("else") {
                return self.err("expected 'else'");
            }
            self.pos += 1;
            let otherwise = self.expr()?;
            return Ok(Expr::Cond { then: Box::new(then), cond: Box::new(cond), otherwise: Box::new(otherwise) });
        }
        Ok(then)
    }

    fn or_expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.and_expr()?;
        loop {
            let op = if self.is_word("or") {
                BinOp::Or
            } else if self.is_word("xor") {
                BinOp::Xor
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            let rhs = self.and_expr()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn and_expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.not_expr()?;
        while self.is_word("and") {
            self.pos += 1;
            let rhs = self.not_expr()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, ExprError> {
        if self.is_word("not") {
            self.pos += 1;
            let e = self.not_expr()?;
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(e)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, ExprError> {
        let lhs = self.additive()?;
        let Some(op) = self.cmp_op() else { return Ok(lhs) };
        self.pos += 1;
        let rhs = self.additive()?;
        if self.cmp_op().is_some() {
            return self.err("chained comparisons are not supported");
        }
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn cmp_op(&self) -> Option<BinOp> {
        match self.peek() {
            Some(Tok::Op("==")) => Some(BinOp::Eq),
            Some(Tok::Op("!=")) => Some(BinOp::Ne),
            Some(Tok::Op("<")) => Some(BinOp::Lt),
            Some(Tok::Op("<=")) => Some(BinOp::Le),
            Some(Tok::Op(">")) => Some(BinOp::Gt),
            Some(Tok::Op(">=")) => Some(BinOp::Ge),
            _ => None,
        }
    }

    fn additive(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op("+")) => BinOp::Add,
                Some(Tok::Op("-")) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.multiplicative()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op("*")) => BinOp::Mul,
                Some(Tok::Op("/")) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if matches!(self.peek(), Some(Tok::Op("-"))) {
            self.pos += 1;
            let e = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(e)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let Some((tok, _)) = self.toks.get(self.pos).cloned() else {
            return self.err("unexpected end of expression");
        };
        self.pos += 1;
        match tok {
            Tok::Num(n) => Ok(Expr::Number(n)),
            Tok::Str(s) => Ok(Expr::Text(s)),
            Tok::Word(w) if w == "True" => Ok(Expr::Bool(true)),
            Tok::Word(w) if w == "False" => Ok(Expr::Bool(false)),
            Tok::LParen => {
                let e = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            other => {
                self.pos -= 1;
                self.err(format!("unexpected {other:?}"))
            }
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, ExprError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, end: src.chars().count() };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

fn kind_name(v: &Value) -> ValueKind {
    v.kind()
}

fn type_err<T>(op: &str, a: &Value, b: Option<&Value>) -> Result<T, ExprError> {
    Err(ExprError::Type(match b {
        Some(b) => format!("{op} not defined for {} and {}", kind_name(a), kind_name(b)),
        None => format!("{op} not defined for {}", kind_name(a)),
    }))
}

fn as_bool(op: &str, v: &Value) -> Result<bool, ExprError> {
    match v {
        Value::Boolean(b) => Ok(*b),
        other => type_err(op, other, None),
    }
}

pub fn eval(e: &Expr) -> Result<Value, ExprError> {
    match e {
        Expr::Number(n) => Ok(Value::Number(*n)),
        Expr::Text(s) => Ok(Value::Text(s.clone())),
        Expr::Bool(b) => Ok(Value::Boolean(*b)),
        Expr::Unary(UnaryOp::Not, x) => Ok(Value::Boolean(!as_bool("not", &eval(x)?)?)),
        Expr::Unary(UnaryOp::Neg, x) => match eval(x)? {
            Value::Number(n) => Ok(Value::Number(-n)),
            other => type_err("unary -", &other, None),
        },
        Expr::Cond { then, cond, otherwise } => {
            if as_bool("if", &eval(cond)?)? {
                eval(then)
            } else {
                eval(otherwise)
            }
        }
        Expr::Binary(BinOp::And, a, b) => {
            if !as_bool("and", &eval(a)?)? {
                return Ok(Value::Boolean(false));
            }
            Ok(Value::Boolean(as_bool("and", &eval(b)?)?))
        }
        Expr::Binary(BinOp::Or, a, b) => {
            if as_bool("or", &eval(a)?)? {
                return Ok(Value::Boolean(true));
            }
            Ok(Value::Boolean(as_bool("or", &eval(b)?)?))
        }
        Expr::Binary(op, a, b) => binary(*op, eval(a)?, eval(b)?),
    }
}

fn binary(op: BinOp, a: Value, b: Value) -> Result<Value, ExprError> {
    use Value::{Boolean, Number, Text};
    Ok(match (op, &a, &b) {
        (BinOp::Xor, Boolean(x), Boolean(y)) => Boolean(x != y),
        (BinOp::Add, Number(x), Number(y)) => Number(x + y),
        (BinOp::Add, Text(x), Text(y)) => Text(format!("{x}{y}")),
        (BinOp::Sub, Number(x), Number(y)) => Number(x - y),
        (BinOp::Mul, Number(x), Number(y)) => Number(x * y),
        (BinOp::Div, Number(_), Number(y)) if *y == 0.0 => return Err(ExprError::DivisionByZero),
        (BinOp::Div, Number(x), Number(y)) => Number(x / y),
        (BinOp::Eq | BinOp::Ne, _, _) => {
            let same = match (&a, &b) {
                (Number(x), Number(y)) => x == y,
                (Text(x), Text(y)) => x == y,
                (Boolean(x), Boolean(y)) => x == y,
                _ => return type_err(op_symbol(op), &a, Some(&b)),
            };
            Boolean(same == (op == BinOp::Eq))
        }
        (BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge, _, _) => {
            let ord = match (&a, &b) {
                (Number(x), Number(y)) => x.partial_cmp(y),
                (Text(x), Text(y)) => Some(x.cmp(y)),
                _ => return type_err(op_symbol(op), &a, Some(&b)),
            };
            let Some(ord) = ord else { return Ok(Boolean(false)) };
            Boolean(match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            })
        }
        _ => return type_err(op_symbol(op), &a, Some(&b)),
    })
}

pub fn op_symbol(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Eq => "==",
        BinOp::Ne => "!=",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
        BinOp::And => "and",
        BinOp::Or => "or",
        BinOp::Xor => "xor",
    }
}

/// Parses and evaluates `src`.
pub fn eval_expr(src: &str) -> Result<Value, ExprError> {
    eval(&parse_expr(src)?)
}

fn splice_literal(name: &str, v: &Value) -> Result<String, ExprError> {
    match v {
        Value::Text(s) => {
            let mut out = String::from("'");
            for c in s.chars() {
                if c == '\\' || c == '\'' {
                    out.push('\\');
                }
                out.push(c);
            }
            out.push('\'');
            Ok(out)
        }
        Value::Number(n) => Ok(format_number(*n)),
        Value::Boolean(b) => Ok(if *b { "True" } else { "False" }.to_string()),
        other => Err(ExprError::UnsupportedValueKind { name: name.to_string(), kind: other.kind() }),
    }
}

/// Replaces each `{VAR}` placeholder with the literal form of its bound value.
/// Braces that do not enclose an identifier are copied through unchanged.
pub fn substitute(template: &str, state: &ProgramState, step: Option<usize>) -> Result<String, ExprError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_identifier(&after[..close]) => {
                let name = &after[..close];
                out.push_str(&splice_literal(name, state.lookup(name, step)?)?);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}
