//! Tree-walking reference evaluator and exhaustive expression enumeration.
//!
//! Leaves are the integers -3..=3 plus `True` and `False`. A depth-1 tree is
//! one operator over leaves. Depth-2 trees put exactly one depth-1 subtree
//! under a further operator, all other operands being leaves. Counting a
//! leaf as depth 1 this covers every such tree up to depth 3.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
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

pub const OPS: [Op; 13] =
    [Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Eq, Op::Ne, Op::Lt, Op::Le, Op::Gt, Op::Ge, Op::And, Op::Or, Op::Xor];

#[derive(Debug, Clone, PartialEq)]
pub enum E {
    Int(i64),
    Bool(bool),
    Not(Box<E>),
    Neg(Box<E>),
    Bin(Op, Box<E>, Box<E>),
    /// then, cond, otherwise
    If(Box<E>, Box<E>, Box<E>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum V {
    Num(f64),
    Bool(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    Type,
    DivZero,
}

fn truth(v: V) -> Result<bool, Fault> {
    match v {
        V::Bool(b) => Ok(b),
        V::Num(_) => Err(Fault::Type),
    }
}

pub fn eval(e: &E) -> Result<V, Fault> {
    Ok(match e {
        E::Int(n) => V::Num(*n as f64),
        E::Bool(b) => V::Bool(*b),
        E::Not(x) => V::Bool(!truth(eval(x)?)?),
        E::Neg(x) => match eval(x)? {
            V::Num(n) => V::Num(-n),
            V::Bool(_) => return Err(Fault::Type),
        },
        E::If(a, c, b) => {
            return if truth(eval(c)?)? { eval(a) } else { eval(b) };
        }
        E::Bin(Op::And, a, b) => {
            let l = truth(eval(a)?)?;
            V::Bool(l && truth(eval(b)?)?)
        }
        E::Bin(Op::Or, a, b) => {
            let l = truth(eval(a)?)?;
            V::Bool(l || truth(eval(b)?)?)
        }
        E::Bin(op, a, b) => {
            let (l, r) = (eval(a)?, eval(b)?);
            match (op, l, r) {
                (Op::Xor, V::Bool(x), V::Bool(y)) => V::Bool(x ^ y),
                (Op::Eq, V::Num(x), V::Num(y)) => V::Bool(x == y),
                (Op::Eq, V::Bool(x), V::Bool(y)) => V::Bool(x == y),
                (Op::Ne, V::Num(x), V::Num(y)) => V::Bool(x != y),
                (Op::Ne, V::Bool(x), V::Bool(y)) => V::Bool(x != y),
                (_, V::Num(x), V::Num(y)) => match op {
                    Op::Add => V::Num(x + y),
                    Op::Sub => V::Num(x - y),
                    Op::Mul => V::Num(x * y),
                    Op::Div if y == 0.0 => return Err(Fault::DivZero),
                    Op::Div => V::Num(x / y),
                    Op::Lt => V::Bool(x < y),
                    Op::Le => V::Bool(x <= y),
                    Op::Gt => V::Bool(x > y),
                    Op::Ge => V::Bool(x >= y),
                    _ => return Err(Fault::Type),
                },
                _ => return Err(Fault::Type),
            }
        }
    })
}

fn symbol(op: Op) -> &'static str {
    match op {
        Op::Add => "+",
        Op::Sub => "-",
        Op::Mul => "*",
        Op::Div => "/",
        Op::Eq => "==",
        Op::Ne => "!=",
        Op::Lt => "<",
        Op::Le => "<=",
        Op::Gt => ">",
        Op::Ge => ">=",
        Op::And => "and",
        Op::Or => "or",
        Op::Xor => "xor",
    }
}

// Binding strength, loosest first.
const COND: u8 = 0;
const OR: u8 = 1;
const AND: u8 = 2;
const NOT: u8 = 3;
const CMP: u8 = 4;
const ADD: u8 = 5;
const MUL: u8 = 6;
const NEG: u8 = 7;
const ATOM: u8 = 8;

fn level(op: Op) -> u8 {
    match op {
        Op::Or | Op::Xor => OR,
        Op::And => AND,
        Op::Eq | Op::Ne | Op::Lt | Op::Le | Op::Gt | Op::Ge => CMP,
        Op::Add | Op::Sub => ADD,
        Op::Mul | Op::Div => MUL,
    }
}

fn wrap((s, l): (String, u8), need: u8) -> String {
    if l < need {
        format!("({s})")
    } else {
        s
    }
}

fn show(e: &E) -> (String, u8) {
    match e {
        E::Int(n) if *n < 0 => (n.to_string(), NEG),
        E::Int(n) => (n.to_string(), ATOM),
        E::Bool(b) => ((if *b { "True" } else { "False" }).to_string(), ATOM),
        E::Not(x) => (format!("not {}", wrap(show(x), NOT)), NOT),
        E::Neg(x) => (format!("- {}", wrap(show(x), NEG)), NEG),
        E::Bin(op, a, b) => {
            let p = level(*op);
            let (lneed, rneed) = if p == CMP { (p + 1, p + 1) } else { (p, p + 1) };
            (format!("{} {} {}", wrap(show(a), lneed), symbol(*op), wrap(show(b), rneed)), p)
        }
        E::If(a, c, b) => (format!("{} if {} else {}", wrap(show(a), OR), wrap(show(c), OR), wrap(show(b), COND)), COND),
    }
}

/// Source text with the fewest parentheses the grammar allows.
pub fn render(e: &E) -> String {
    show(e).0
}

/// Source text with every compound operand parenthesized.
pub fn render_full(e: &E) -> String {
    let p = |x: &E| match x {
        E::Int(_) | E::Bool(_) => render_full(x),
        _ => format!("({})", render_full(x)),
    };
    match e {
        E::Int(n) => n.to_string(),
        E::Bool(b) => (if *b { "True" } else { "False" }).to_string(),
        E::Not(x) => format!("not {}", p(x)),
        E::Neg(x) => format!("- {}", p(x)),
        E::Bin(op, a, b) => format!("{} {} {}", p(a), symbol(*op), p(b)),
        E::If(a, c, b) => format!("{} if {} else {}", p(a), p(c), p(b)),
    }
}

pub fn leaves() -> Vec<E> {
    (-3..=3).map(E::Int).chain([E::Bool(true), E::Bool(false)]).collect()
}

fn b(e: &E) -> Box<E> {
    Box::new(e.clone())
}

/// Every single-operator tree over leaves.
pub fn depth1() -> Vec<E> {
    let ls = leaves();
    let mut out = Vec::new();
    for l in &ls {
        out.push(E::Not(b(l)));
        out.push(E::Neg(b(l)));
    }
    for op in OPS {
        for x in &ls {
            for y in &ls {
                out.push(E::Bin(op, b(x), b(y)));
            }
        }
    }
    for x in &ls {
        for c in &ls {
            for y in &ls {
                out.push(E::If(b(x), b(c), b(y)));
            }
        }
    }
    out
}

/// Trees with `inner` as the only compound operand of one more operator.
pub fn around(inner: &E) -> Vec<E> {
    let ls = leaves();
    let mut out = vec![E::Not(b(inner)), E::Neg(b(inner))];
    for op in OPS {
        for l in &ls {
            out.push(E::Bin(op, b(inner), b(l)));
            out.push(E::Bin(op, b(l), b(inner)));
        }
    }
    for x in &ls {
        for y in &ls {
            out.push(E::If(b(inner), b(x), b(y)));
            out.push(E::If(b(x), b(inner), b(y)));
            out.push(E::If(b(x), b(y), b(inner)));
        }
    }
    out
}

/// Total number of enumerated expressions.
pub fn case_count() -> usize {
    let d1 = depth1();
    leaves().len() + d1.len() + d1.iter().map(|e| around(e).len()).sum::<usize>()
}
