//! Module registry and the standard module set.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::backend::Backend;
use crate::emoji::EmojiTable;
use crate::error::StateError;
use crate::expr::{eval_expr, substitute, ExprError};
use crate::image::{BBox, Image, ObjectRegion};
use crate::imageops::{self, ImageOpError, Relation};
use crate::neural::{self, ListConfig, NeuralError};
use crate::par::Exec;
use crate::signature::{ArgSpec, ArgType, ModuleSignature, Signatures};
use crate::value::{ProgramState, Value, ValueKind};

const IMAGE: ArgType = ArgType::Kind(ValueKind::Image);
const TEXT: ArgType = ArgType::Kind(ValueKind::Text);
const OBJECTS: ArgType = ArgType::Kind(ValueKind::ObjectList);
const TEXT_OR_NULL: ArgType = ArgType::OneOf(&[ValueKind::Text, ValueKind::Null]);
const NUMBER_OR_NULL: ArgType = ArgType::OneOf(&[ValueKind::Number, ValueKind::Null]);
const REGION: ArgType = ArgType::OneOf(&[ValueKind::ObjectList, ValueKind::Box]);
const CATEGORIES: ArgType = ArgType::OneOf(&[ValueKind::TextList, ValueKind::Text]);
const ANSWER: ArgType = ArgType::OneOf(&[ValueKind::Text, ValueKind::Boolean]);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModuleError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    ImageOp(#[from] ImageOpError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("argument {arg} expects {expected}, got {actual}")]
    TypeMismatch { arg: String, expected: String, actual: String },
    #[error("missing argument {arg}")]
    MissingArgument { arg: String },
    #[error("unknown argument {arg}")]
    UnknownArgument { arg: String },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("step took {elapsed_ms} ms, over the {limit_ms} ms limit")]
    Timeout { elapsed_ms: u64, limit_ms: u64 },
}

impl ModuleError {
    /// Stable snake_case name of the error variant, used in traces.
    pub fn kind(&self) -> &'static str {
        use crate::backend::BackendError as B;
        match self {
            ModuleError::Neural(NeuralError::Backend(b)) => match b {
                B::FixtureMiss { .. } => "fixture_miss",
                B::UnknownImage { .. } => "unknown_image",
                B::Unsupported { .. } => "unsupported",
                B::Protocol { .. } => "protocol",
                B::Transport { .. } => "transport",
            },
            ModuleError::Neural(NeuralError::NoCandidates { .. }) => "no_candidates",
            ModuleError::Neural(NeuralError::EmptyQuery) => "empty_query",
            ModuleError::Neural(NeuralError::NoCategories) => "no_categories",
            ModuleError::Neural(NeuralError::EmptyList { .. }) => "empty_list",
            ModuleError::Neural(NeuralError::BadMax(_)) => "bad_max",
            ModuleError::Neural(NeuralError::ImageOp(e)) | ModuleError::ImageOp(e) => match e {
                ImageOpError::EmptyCrop => "empty_crop",
                ImageOpError::UntaggedRegion { .. } => "untagged_region",
                ImageOpError::MissingMask { .. } => "missing_mask",
                ImageOpError::UnknownEmoji { .. } => "unknown_emoji",
                ImageOpError::Image(_) => "image",
            },
            ModuleError::Expr(e) => match e {
                ExprError::Syntax { .. } => "expr_syntax",
                ExprError::Type(_) => "expr_type",
                ExprError::DivisionByZero => "division_by_zero",
                ExprError::Unbound(_) => "unbound_variable",
                ExprError::UnsupportedValueKind { .. } => "unsupported_value_kind",
            },
            ModuleError::State(StateError::UnboundVariable { .. }) => "unbound_variable",
            ModuleError::State(StateError::DuplicateBinding(_)) => "duplicate_binding",
            ModuleError::State(StateError::InvalidIdentifier(_)) => "invalid_identifier",
            ModuleError::TypeMismatch { .. } => "type_mismatch",
            ModuleError::MissingArgument { .. } => "missing_argument",
            ModuleError::UnknownArgument { .. } => "unknown_argument",
            ModuleError::Registry(RegistryError::UnknownModule(_)) => "unknown_module",
            ModuleError::Registry(RegistryError::DuplicateModule(_)) => "duplicate_module",
            ModuleError::Timeout { .. } => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("module {0} is already registered")]
    DuplicateModule(String),
    #[error("unknown module {0}")]
    UnknownModule(String),
}

/// Everything a module may use besides its arguments.
pub struct ExecContext<'a> {
    pub backend: &'a dyn Backend,
    pub list: ListConfig,
    pub emoji: &'a EmojiTable,
    pub exec: Exec,
    pub state: &'a ProgramState,
    /// 1-based index of the running step.
    pub step: usize,
}

/// Resolved arguments of one step, in signature order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Args {
    values: Vec<(String, Value)>,
}

impl Args {
    pub fn new(values: Vec<(String, Value)>) -> Self {
        Args { values }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.values.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn get(&self, name: &str) -> Result<&Value, ModuleError> {
        self.values
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| ModuleError::MissingArgument { arg: name.to_string() })
    }

    fn mismatch(name: &str, expected: &str, v: &Value) -> ModuleError {
        ModuleError::TypeMismatch { arg: name.to_string(), expected: expected.to_string(), actual: v.kind().to_string() }
    }

    pub fn text(&self, name: &str) -> Result<&str, ModuleError> {
        let v = self.get(name)?;
        v.as_text().ok_or_else(|| Self::mismatch(name, "text", v))
    }

    pub fn opt_text(&self, name: &str) -> Result<Option<&str>, ModuleError> {
        match self.get(name)? {
            Value::Null => Ok(None),
            Value::Text(s) => Ok(Some(s)),
            v => Err(Self::mismatch(name, "text|null", v)),
        }
    }

    pub fn opt_number(&self, name: &str) -> Result<Option<f64>, ModuleError> {
        match self.get(name)? {
            Value::Null => Ok(None),
            Value::Number(n) => Ok(Some(*n)),
            v => Err(Self::mismatch(name, "number|null", v)),
        }
    }

    pub fn image(&self, name: &str) -> Result<&Arc<Image>, ModuleError> {
        let v = self.get(name)?;
        v.as_image().ok_or_else(|| Self::mismatch(name, "image", v))
    }

    pub fn objects(&self, name: &str) -> Result<&[ObjectRegion], ModuleError> {
        let v = self.get(name)?;
        v.as_objects().ok_or_else(|| Self::mismatch(name, "object_list", v))
    }
}

pub trait Module: Send + Sync {
    fn signature(&self) -> &ModuleSignature;

    fn execute(&self, args: &Args, ctx: &ExecContext<'_>) -> Result<Value, ModuleError>;

    /// One-line caption for the step's rationale cell.
    fn summarize(&self, args: &Args, output: &Value) -> String {
        let _ = args;
        format!("{} produced {}", self.signature().name, output.summary())
    }
}

type ExecFn = fn(&Args, &ExecContext<'_>) -> Result<Value, ModuleError>;
type SummaryFn = fn(&Args, &Value) -> String;

/// A module defined by a signature and a plain function.
pub struct FnModule {
    sig: ModuleSignature,
    run: ExecFn,
    caption: Option<SummaryFn>,
}

impl FnModule {
    pub fn new(sig: ModuleSignature, run: ExecFn) -> Self {
        FnModule { sig, run, caption: None }
    }

    fn with_caption(mut self, caption: SummaryFn) -> Self {
        self.caption = Some(caption);
        self
    }
}

impl Module for FnModule {
    fn signature(&self) -> &ModuleSignature {
        &self.sig
    }

    fn execute(&self, args: &Args, ctx: &ExecContext<'_>) -> Result<Value, ModuleError> {
        (self.run)(args, ctx)
    }

    fn summarize(&self, args: &Args, output: &Value) -> String {
        match self.caption {
            Some(f) => f(args, output),
            None => format!("{} produced {}", self.sig.name, output.summary()),
        }
    }
}

/// Modules by upper-cased name, in registration order.
#[derive(Clone, Default)]
pub struct Registry {
    modules: HashMap<String, Arc<dyn Module>>,
    order: Vec<String>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Registry").field("modules", &self.order).finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    pub fn register(&mut self, module: Arc<dyn Module>) -> Result<(), RegistryError> {
        let key = module.signature().name.to_ascii_uppercase();
        if self.modules.contains_key(&key) {
            return Err(RegistryError::DuplicateModule(key));
        }
        self.order.push(key.clone());
        self.modules.insert(key, module);
        Ok(())
    }

    pub fn resolve(&self, name: &str) -> Result<&Arc<dyn Module>, RegistryError> {
        self.modules.get(&name.to_ascii_uppercase()).ok_or_else(|| RegistryError::UnknownModule(name.to_string()))
    }

    pub fn names(&self) -> &[String] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The 22 built-in modules.
    pub fn standard() -> Registry {
        let mut r = Registry::new();
        for m in standard_modules() {
            r.register(Arc::new(m)).expect("built-in module names are unique");
        }
        r
    }
}

impl Signatures for Registry {
    fn signature(&self, module: &str) -> Option<&ModuleSignature> {
        self.resolve(module).ok().map(|m| m.signature())
    }
}

fn req(name: &'static str, ty: ArgType) -> ArgSpec {
    ArgSpec::required(name, ty)
}

fn sig(name: &'static str, args: Vec<ArgSpec>, output: ArgType) -> ModuleSignature {
    ModuleSignature::new(name, args, output)
}

fn objects_value(v: Vec<ObjectRegion>) -> Value {
    Value::ObjectList(v)
}

fn count_caption(_: &Args, out: &Value) -> String {
    format!("counted {}", out.summary())
}

fn region_caption(args: &Args, out: &Value) -> String {
    let what = args.get("object").ok().and_then(Value::as_text).unwrap_or("objects");
    match out.as_objects() {
        Some(o) => format!("found {} region{} for {what:?}", o.len(), if o.len() == 1 { "" } else { "s" }),
        None => out.summary(),
    }
}

fn crop_box(args: &Args, img: &Image) -> Result<BBox, ModuleError> {
    match args.get("box")? {
        Value::Box(b) => Ok(*b),
        Value::ObjectList(o) => Ok(o.first().map(|r| r.bbox).unwrap_or_else(|| img.full_box())),
        v => Err(Args::mismatch("box", "object_list|box", v)),
    }
}

fn crop_with(args: &Args, rel: Relation) -> Result<Value, ModuleError> {
    let img = args.image("image")?;
    let b = crop_box(args, img)?;
    Ok(Value::image(imageops::crop_spatial(img, &b, rel)?))
}

macro_rules! crop_module {
    ($name:literal, $rel:expr) => {
        FnModule::new(sig($name, vec![req("image", IMAGE), req("box", REGION)], IMAGE), |a, _| crop_with(a, $rel))
    };
}

fn standard_modules() -> Vec<FnModule> {
    vec![
        FnModule::new(sig("LOC", vec![req("image", IMAGE), req("object", TEXT)], OBJECTS), |a, cx| {
            Ok(objects_value(neural::loc(cx.backend, a.image("image")?, a.text("object")?)?))
        })
        .with_caption(region_caption),
        FnModule::new(sig("FACEDET", vec![req("image", IMAGE)], OBJECTS), |a, cx| {
            Ok(objects_value(neural::face_det(cx.backend, a.image("image")?)?))
        }),
        FnModule::new(sig("SEG", vec![req("image", IMAGE)], OBJECTS), |a, cx| {
            Ok(objects_value(neural::seg(cx.backend, a.image("image")?)?))
        }),
        FnModule::new(sig("VQA", vec![req("image", IMAGE), req("question", TEXT)], ANSWER), |a, cx| {
            Ok(neural::vqa(cx.backend, a.image("image")?, a.text("question")?)?)
        }),
        FnModule::new(
            sig(
                "SELECT",
                vec![
                    req("image", IMAGE),
                    req("object", OBJECTS),
                    req("query", TEXT),
                    ArgSpec::optional("category", TEXT_OR_NULL, Value::Null),
                ],
                OBJECTS,
            ),
            |a, cx| {
                Ok(objects_value(neural::select(
                    cx.backend,
                    a.image("image")?,
                    a.objects("object")?,
                    a.text("query")?,
                    a.opt_text("category")?,
                )?))
            },
        ),
        FnModule::new(
            sig("CLASSIFY", vec![req("image", IMAGE), req("object", OBJECTS), req("categories", CATEGORIES)], OBJECTS),
            |a, cx| {
                let cats = match a.get("categories")? {
                    Value::TextList(t) => t.clone(),
                    Value::Text(s) => neural::split_phrases(s),
                    v => return Err(Args::mismatch("categories", "text_list|text", v)),
                };
                Ok(objects_value(neural::classify(cx.backend, a.image("image")?, a.objects("object")?, &cats)?))
            },
        ),
        FnModule::new(
            sig(
                "LIST",
                vec![req("query", TEXT), ArgSpec::optional("max", NUMBER_OR_NULL, Value::Null)],
                ArgType::Kind(ValueKind::TextList),
            ),
            |a, cx| Ok(Value::TextList(neural::knowledge_list(cx.backend, a.text("query")?, a.opt_number("max")?, cx.list)?)),
        ),
        FnModule::new(sig("COUNT", vec![req("box", OBJECTS)], ArgType::Kind(ValueKind::Number)), |a, _| {
            Ok(Value::Number(a.objects("box")?.len() as f64))
        })
        .with_caption(count_caption),
        crop_module!("CROP", Relation::None),
        crop_module!("CROP_LEFTOF", Relation::Left),
        crop_module!("CROP_RIGHTOF", Relation::Right),
        crop_module!("CROP_ABOVE", Relation::Above),
        crop_module!("CROP_BELOW", Relation::Below),
        crop_module!("CROP_FRONTOF", Relation::FrontOf),
        crop_module!("CROP_BEHIND", Relation::Behind),
        FnModule::new(sig("EVAL", vec![req("expr", TEXT)], ArgType::Any), |a, cx| {
            let src = substitute(a.text("expr")?, cx.state, Some(cx.step))?;
            Ok(eval_expr(&src)?)
        })
        .with_caption(|a, out| format!("{} = {}", a.text("expr").unwrap_or(""), out.summary())),
        FnModule::new(sig("RESULT", vec![req("var", ArgType::Any)], ArgType::Any), |a, _| Ok(a.get("var")?.clone()))
            .with_caption(|_, out| format!("result: {}", out.summary())),
        FnModule::new(sig("TAG", vec![req("image", IMAGE), req("object", OBJECTS)], IMAGE), |a, _| {
            Ok(Value::image(imageops::tag(a.image("image")?, a.objects("object")?)?))
        }),
        FnModule::new(sig("COLORPOP", vec![req("image", IMAGE), req("object", OBJECTS)], IMAGE), |a, _| {
            Ok(Value::image(imageops::color_pop(a.image("image")?, a.objects("object")?)?))
        }),
        FnModule::new(sig("BGBLUR", vec![req("image", IMAGE), req("object", OBJECTS)], IMAGE), |a, cx| {
            Ok(Value::image(imageops::bg_blur(a.image("image")?, a.objects("object")?, cx.exec)?))
        }),
        FnModule::new(
            sig("EMOJI", vec![req("image", IMAGE), req("object", OBJECTS), req("emoji", TEXT)], IMAGE),
            |a, cx| {
                Ok(Value::image(imageops::emoji(a.image("image")?, a.objects("object")?, a.text("emoji")?, cx.emoji)?))
            },
        ),
        FnModule::new(
            sig("REPLACE", vec![req("image", IMAGE), req("object", OBJECTS), req("prompt", TEXT)], IMAGE),
            |a, cx| {
                Ok(Value::Image(neural::replace(cx.backend, a.image("image")?, a.objects("object")?, a.text("prompt")?)?))
            },
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{FixtureBackend, FixtureSet};

    #[test]
    fn standard_roster() {
        let r = Registry::standard();
        assert_eq!(r.len(), 22);
        for name in [
            "LOC", "FACEDET", "SEG", "VQA", "SELECT", "CLASSIFY", "LIST", "COUNT", "CROP", "CROP_LEFTOF",
            "CROP_RIGHTOF", "CROP_ABOVE", "CROP_BELOW", "CROP_FRONTOF", "CROP_BEHIND", "EVAL", "RESULT", "TAG",
            "COLORPOP", "BGBLUR", "EMOJI", "REPLACE",
        ] {
            assert!(r.resolve(name).is_ok(), "{name}");
            assert!(r.resolve(name).unwrap().signature().check().is_ok());
        }
    }

    #[test]
    fn resolution_is_case_insensitive_and_unique() {
        let mut r = Registry::standard();
        assert_eq!(r.resolve("Count").unwrap().signature().name, "COUNT");
        let dup = FnModule::new(sig("count", vec![], ArgType::Any), |_, _| Ok(Value::Null));
        assert_eq!(r.register(Arc::new(dup)), Err(RegistryError::DuplicateModule("COUNT".into())));
        assert!(matches!(r.resolve("SELCT"), Err(RegistryError::UnknownModule(_))));
    }

    #[test]
    fn count_and_result() {
        let r = Registry::standard();
        let be = FixtureBackend::new(FixtureSet::default());
        let st = ProgramState::new();
        let cx = ExecContext {
            backend: &be,
            list: ListConfig::default(),
            emoji: EmojiTable::builtin(),
            exec: Exec::Sequential,
            state: &st,
            step: 1,
        };
        let region = ObjectRegion::new(BBox::new(0.0, 0.0, 1.0, 1.0), 1.0);
        let count = r.resolve("COUNT").unwrap();
        let args = Args::new(vec![("box".into(), Value::ObjectList(vec![region.clone(); 3]))]);
        let out = count.execute(&args, &cx).unwrap();
        assert_eq!(out, Value::Number(3.0));
        assert_eq!(count.summarize(&args, &out), "counted 3");
        let empty = Args::new(vec![("box".into(), Value::ObjectList(vec![]))]);
        assert_eq!(count.execute(&empty, &cx).unwrap(), Value::Number(0.0));
        let result = r.resolve("RESULT").unwrap();
        assert_eq!(result.execute(&Args::new(vec![("var".into(), Value::text("left"))]), &cx).unwrap(), Value::text("left"));
    }

    #[test]
    fn crop_accepts_boxes_and_lists() {
        let r = Registry::standard();
        let be = FixtureBackend::new(FixtureSet::default());
        let st = ProgramState::new();
        let cx = ExecContext {
            backend: &be,
            list: ListConfig::default(),
            emoji: EmojiTable::builtin(),
            exec: Exec::Sequential,
            state: &st,
            step: 1,
        };
        let img = Value::image(Image::new(100, 80, [9, 9, 9, 255]).unwrap());
        let b = BBox::new(40.0, 10.0, 60.0, 50.0);
        let left = r.resolve("CROP_LEFTOF").unwrap();
        let out = left.execute(&Args::new(vec![("image".into(), img.clone()), ("box".into(), Value::Box(b))]), &cx).unwrap();
        let o = out.as_image().unwrap();
        assert_eq!((o.width(), o.height()), (40, 80));
        let crop = r.resolve("CROP").unwrap();
        let list = Value::ObjectList(vec![ObjectRegion::new(b, 1.0)]);
        let out = crop.execute(&Args::new(vec![("image".into(), img.clone()), ("box".into(), list)]), &cx).unwrap();
        let o = out.as_image().unwrap();
        assert_eq!((o.width(), o.height()), (20, 40));
        let edge = Value::Box(BBox::new(0.0, 10.0, 60.0, 50.0));
        let err = left.execute(&Args::new(vec![("image".into(), img), ("box".into(), edge)]), &cx).unwrap_err();
        assert_eq!(err.kind(), "empty_crop");
    }
}
