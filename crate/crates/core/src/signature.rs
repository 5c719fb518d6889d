//! Declared argument and output types for modules.

use std::fmt;

use serde::Serialize;

use crate::value::{Value, ValueKind};

/// Which runtime kinds an argument (or output) may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgType {
    Kind(ValueKind),
    OneOf(&'static [ValueKind]),
    Any,
}

impl ArgType {
    pub fn accepts(&self, kind: ValueKind) -> bool {
        match self {
            ArgType::Kind(k) => *k == kind,
            ArgType::OneOf(ks) => ks.contains(&kind),
            ArgType::Any => true,
        }
    }

    /// True if some kind satisfies both types.
    pub fn overlaps(&self, other: &ArgType) -> bool {
        match (self, other) {
            (ArgType::Any, _) | (_, ArgType::Any) => true,
            (ArgType::Kind(k), t) | (t, ArgType::Kind(k)) => t.accepts(*k),
            (ArgType::OneOf(a), ArgType::OneOf(b)) => a.iter().any(|k| b.contains(k)),
        }
    }
}

impl fmt::Display for ArgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgType::Kind(k) => write!(f, "{k}"),
            ArgType::OneOf(ks) => {
                let names: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                write!(f, "{}", names.join("|"))
            }
            ArgType::Any => f.write_str("any"),
        }
    }
}

impl Serialize for ArgType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArgSpec {
    pub name: &'static str,
    pub ty: ArgType,
    pub required: bool,
    pub default: Option<Value>,
}

impl ArgSpec {
    pub fn required(name: &'static str, ty: ArgType) -> Self {
        ArgSpec { name, ty, required: true, default: None }
    }

    pub fn optional(name: &'static str, ty: ArgType, default: Value) -> Self {
        ArgSpec { name, ty, required: false, default: Some(default) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleSignature {
    pub name: &'static str,
    pub args: Vec<ArgSpec>,
    pub output: ArgType,
}

impl ModuleSignature {
    pub fn new(name: &'static str, args: Vec<ArgSpec>, output: ArgType) -> Self {
        let sig = ModuleSignature { name, args, output };
        debug_assert!(sig.check().is_ok(), "{:?}", sig.check());
        sig
    }

    pub fn arg(&self, name: &str) -> Option<&ArgSpec> {
        self.args.iter().find(|a| a.name == name)
    }

    /// Arg names unique; defaults well-typed.
    pub fn check(&self) -> Result<(), String> {
        for (i, a) in self.args.iter().enumerate() {
            if self.args[..i].iter().any(|b| b.name == a.name) {
                return Err(format!("{}: duplicate arg {}", self.name, a.name));
            }
            if let Some(d) = &a.default {
                if !a.ty.accepts(d.kind()) {
                    return Err(format!("{}: default for {} is {}", self.name, a.name, d.kind()));
                }
            }
        }
        Ok(())
    }
}

/// Lookup of module signatures by (case-insensitive) name.
pub trait Signatures {
    fn signature(&self, module: &str) -> Option<&ModuleSignature>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_rules() {
        let text = ArgType::Kind(ValueKind::Text);
        let text_or_bool = ArgType::OneOf(&[ValueKind::Text, ValueKind::Boolean]);
        assert!(text.overlaps(&text_or_bool));
        assert!(!ArgType::Kind(ValueKind::Image).overlaps(&text_or_bool));
        assert!(ArgType::Any.overlaps(&text));
        assert_eq!(text_or_bool.to_string(), "text|boolean");
    }

    #[test]
    fn ill_typed_default_is_caught() {
        let sig = ModuleSignature {
            name: "X",
            args: vec![ArgSpec::optional("n", ArgType::Kind(ValueKind::Number), Value::Null)],
            output: ArgType::Any,
        };
        assert!(sig.check().is_err());
    }
}
