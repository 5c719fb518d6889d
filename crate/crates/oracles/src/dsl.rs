//! Random program steps with an independent renderer, and malformed lines.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum Lit {
    Text(String),
    Num(f64),
    Bool(bool),
    None,
    Var(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub output: String,
    pub module: String,
    pub args: Vec<(String, Lit)>,
}

const UPPER: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";
const VAR_TAIL: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_";
const NAME_HEAD: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
const NAME_TAIL: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_";
const TEXT_CHARS: &[char] = &[
    'a', 'b', 'z', 'Q', ' ', ' ', '0', '9', '\'', '"', '\\', ',', '(', ')', '=', '{', '}', '#', '-', '.', 'é', '→', '猫',
    '\t',
];

fn word<R: Rng>(rng: &mut R, head: &[u8], tail: &[u8], max_tail: usize) -> String {
    let mut s = String::new();
    s.push(head[rng.random_range(0..head.len())] as char);
    for _ in 0..rng.random_range(0..=max_tail) {
        s.push(tail[rng.random_range(0..tail.len())] as char);
    }
    s
}

pub fn var<R: Rng>(rng: &mut R) -> String {
    word(rng, UPPER, VAR_TAIL, 6)
}

fn arg_name<R: Rng>(rng: &mut R) -> String {
    loop {
        let w = word(rng, NAME_HEAD, NAME_TAIL, 6);
        // Reserved literal spellings would read back as literals.
        if !matches!(w.as_str(), "True" | "False" | "None") {
            return w;
        }
    }
}

fn number<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(-1000i64..1000) as f64,
        1 => rng.random_range(-1000i64..1000) as f64 / 8.0,
        2 => rng.random_range(-1.0e6..1.0e6),
        _ => rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-12..12)),
    }
}

pub fn lit<R: Rng>(rng: &mut R) -> Lit {
    match rng.random_range(0..6) {
        0 | 1 => {
            let n = rng.random_range(0..12);
            Lit::Text((0..n).map(|_| TEXT_CHARS[rng.random_range(0..TEXT_CHARS.len())]).collect())
        }
        2 => Lit::Num(number(rng)),
        3 => Lit::Bool(rng.random()),
        4 => Lit::None,
        _ => Lit::Var(var(rng)),
    }
}

pub fn step<R: Rng>(rng: &mut R) -> Step {
    let n = rng.random_range(0..5);
    let mut args: Vec<(String, Lit)> = Vec::new();
    while args.len() < n {
        let name = arg_name(rng);
        if args.iter().all(|(a, _)| *a != name) {
            args.push((name, lit(rng)));
        }
    }
    Step { output: var(rng), module: word(rng, NAME_HEAD, NAME_TAIL, 8), args }
}

/// Double-quoted text, escaping only what must be escaped.
fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    let chars: Vec<char> = s.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '"' => out.push_str("\\\""),
            // A backslash survives unescaped unless it precedes a quote or backslash.
            '\\' if matches!(chars.get(i + 1), Some('"' | '\'' | '\\') | None) => out.push_str("\\\\"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn show_lit(l: &Lit) -> String {
    match l {
        Lit::Text(s) => quote(s),
        Lit::Num(n) => format!("{n:e}"),
        Lit::Bool(true) => "True".into(),
        Lit::Bool(false) => "False".into(),
        Lit::None => "None".into(),
        Lit::Var(v) => v.clone(),
    }
}

/// A spelling of `s` that differs from the engine's canonical form:
/// double quotes, exponent notation and loose spacing.
pub fn render<R: Rng>(rng: &mut R, s: &Step) -> String {
    let mut sp = || if rng.random_bool(0.3) { " " } else { "" };
    let mut out = format!("{}{}={}{}{}(", sp(), s.output, sp(), s.module, sp());
    for (i, (n, v)) in s.args.iter().enumerate() {
        if i > 0 {
            out.push(',');
            out.push_str(sp());
        }
        out.push_str(&format!("{n}{}={}{}", sp(), sp(), show_lit(v)));
    }
    out.push(')');
    out.push_str(sp());
    out
}

/// Random edits of a well-formed line plus pure noise.
pub fn malformed<R: Rng>(rng: &mut R, good: &str) -> String {
    const NOISE: &[char] = &['=', '(', ')', ',', '\'', '"', '\\', '-', '.', 'e', 'A', '1', ' ', '#', '\u{0}', 'ß'];
    let mut chars: Vec<char> = good.chars().collect();
    match rng.random_range(0..5) {
        0 if !chars.is_empty() => {
            let at = rng.random_range(0..chars.len());
            chars.truncate(at);
        }
        1 if !chars.is_empty() => {
            for _ in 0..rng.random_range(1..4) {
                if chars.is_empty() {
                    break;
                }
                let at = rng.random_range(0..chars.len());
                chars.remove(at);
            }
        }
        2 => {
            for _ in 0..rng.random_range(1..4) {
                let at = rng.random_range(0..=chars.len());
                chars.insert(at, NOISE[rng.random_range(0..NOISE.len())]);
            }
        }
        3 if chars.len() > 1 => {
            let a = rng.random_range(0..chars.len());
            let b = rng.random_range(0..chars.len());
            chars.swap(a, b);
        }
        _ => {
            let n = rng.random_range(0..40);
            chars = (0..n).map(|_| NOISE[rng.random_range(0..NOISE.len())]).collect();
        }
    }
    chars.into_iter().collect()
}
