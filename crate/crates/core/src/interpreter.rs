//! Step-by-step program execution with full traces.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::dsl::{render_step, ArgValue, Program, ProgramStep};
use crate::emoji::EmojiTable;
use crate::error::CodecError;
use crate::neural::ListConfig;
use crate::par::Exec;
use crate::registry::{Args, ExecContext, ModuleError, Registry};
use crate::signature::ModuleSignature;
use crate::value::{ImageSource, ImageStore, ProgramState, Value, ValueRepr};

pub const DEFAULT_STEP_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceError {
    pub kind: String,
    pub message: String,
}

impl From<&ModuleError> for TraceError {
    fn from(e: &ModuleError) -> Self {
        TraceError { kind: e.kind().to_string(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    /// 1-based.
    pub index: usize,
    pub step_text: String,
    pub module: String,
    pub args: Args,
    pub output: Option<Value>,
    pub caption: Option<String>,
    pub wall_ms: f64,
    pub error: Option<TraceError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub source: String,
    pub inputs: Vec<(String, Value)>,
    pub traces: Vec<StepTrace>,
    pub result: Option<Value>,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn failed_trace(&self) -> Option<&StepTrace> {
        self.traces.iter().find(|t| t.error.is_some())
    }

    pub fn to_repr(&self, images: &mut ImageStore) -> RunRecordRepr {
        let named = |pairs: &[(String, Value)], images: &mut ImageStore| {
            pairs.iter().map(|(n, v)| NamedValue { name: n.clone(), value: ValueRepr::encode(v, images) }).collect()
        };
        let traces = self
            .traces
            .iter()
            .map(|t| {
                let args: Vec<(String, Value)> = t.args.iter().map(|(n, v)| (n.to_string(), v.clone())).collect();
                StepTraceRepr {
                    index: t.index,
                    step_text: t.step_text.clone(),
                    module: t.module.clone(),
                    args: named(&args, images),
                    output: t.output.as_ref().map(|v| ValueRepr::encode(v, images)),
                    caption: t.caption.clone(),
                    wall_ms: t.wall_ms,
                    error: t.error.clone(),
                }
            })
            .collect();
        RunRecordRepr {
            run_id: self.run_id.clone(),
            source: self.source.clone(),
            status: self.status,
            inputs: named(&self.inputs, images),
            traces,
            result: self.result.as_ref().map(|v| ValueRepr::encode(v, images)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: ValueRepr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTraceRepr {
    pub index: usize,
    pub step_text: String,
    pub module: String,
    pub args: Vec<NamedValue>,
    pub output: Option<ValueRepr>,
    #[serde(default)]
    pub caption: Option<String>,
    pub wall_ms: f64,
    pub error: Option<TraceError>,
}

/// JSON form of a [`RunRecord`]; images are referenced by content id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecordRepr {
    pub run_id: String,
    pub source: String,
    pub status: RunStatus,
    pub inputs: Vec<NamedValue>,
    pub traces: Vec<StepTraceRepr>,
    pub result: Option<ValueRepr>,
}

impl RunRecordRepr {
    pub fn decode(&self, images: &dyn ImageSource) -> Result<RunRecord, CodecError> {
        let named = |vs: &[NamedValue]| -> Result<Vec<(String, Value)>, CodecError> {
            vs.iter().map(|nv| Ok((nv.name.clone(), nv.value.decode(images)?))).collect()
        };
        let traces = self
            .traces
            .iter()
            .map(|t| {
                Ok(StepTrace {
                    index: t.index,
                    step_text: t.step_text.clone(),
                    module: t.module.clone(),
                    args: Args::new(named(&t.args)?),
                    output: t.output.as_ref().map(|v| v.decode(images)).transpose()?,
                    caption: t.caption.clone(),
                    wall_ms: t.wall_ms,
                    error: t.error.clone(),
                })
            })
            .collect::<Result<_, CodecError>>()?;
        Ok(RunRecord {
            run_id: self.run_id.clone(),
            source: self.source.clone(),
            inputs: named(&self.inputs)?,
            traces,
            result: self.result.as_ref().map(|v| v.decode(images)).transpose()?,
            status: self.status,
        })
    }

    /// Zeroes per-step timings so records can be compared across runs.
    pub fn without_timing(mut self) -> Self {
        for t in &mut self.traces {
            t.wall_ms = 0.0;
        }
        self
    }
}

/// Turns a step's literal and variable arguments into values, filling
/// defaults and checking kinds against the signature.
pub fn resolve_args(
    step: &ProgramStep,
    state: &ProgramState,
    sig: &ModuleSignature,
    index: usize,
) -> Result<Args, ModuleError> {
    if let Some((name, _)) = step.args.iter().find(|(n, _)| sig.arg(n).is_none()) {
        return Err(ModuleError::UnknownArgument { arg: name.clone() });
    }
    let mut out = Vec::with_capacity(sig.args.len());
    for spec in &sig.args {
        let value = match step.arg(spec.name) {
            Some(ArgValue::Text(s)) => Value::Text(s.clone()),
            Some(ArgValue::Number(n)) => Value::Number(*n),
            Some(ArgValue::Bool(b)) => Value::Boolean(*b),
            Some(ArgValue::None) => Value::Null,
            Some(ArgValue::Var(v)) => state.lookup(v, Some(index))?.clone(),
            None => match &spec.default {
                Some(d) => d.clone(),
                None => return Err(ModuleError::MissingArgument { arg: spec.name.to_string() }),
            },
        };
        if !spec.ty.accepts(value.kind()) {
            return Err(ModuleError::TypeMismatch {
                arg: spec.name.to_string(),
                expected: spec.ty.to_string(),
                actual: value.kind().to_string(),
            });
        }
        out.push((spec.name.to_string(), value));
    }
    Ok(Args::new(out))
}

/// Executes programs against a registry and a backend.
#[derive(Clone)]
pub struct Interpreter {
    registry: Arc<Registry>,
    backend: Arc<dyn Backend>,
    pub list: ListConfig,
    pub emoji: &'static EmojiTable,
    pub exec: Exec,
    pub step_timeout: Duration,
}

impl Interpreter {
    pub fn new(registry: Arc<Registry>, backend: Arc<dyn Backend>) -> Self {
        Interpreter {
            registry,
            backend,
            list: ListConfig::default(),
            emoji: EmojiTable::builtin(),
            exec: Exec::default(),
            step_timeout: DEFAULT_STEP_TIMEOUT,
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn backend(&self) -> &Arc<dyn Backend> {
        &self.backend
    }

    pub fn execute(&self, run_id: &str, program: &Program, inputs: &[(String, Value)]) -> RunRecord {
        let mut record = RunRecord {
            run_id: run_id.to_string(),
            source: program.render(),
            inputs: inputs.to_vec(),
            traces: Vec::new(),
            result: None,
            status: RunStatus::Failed,
        };
        let mut state = ProgramState::new();
        for (name, v) in inputs {
            if let Err(e) = state.bind(name, v.clone()) {
                record.traces.push(StepTrace {
                    index: 0,
                    step_text: format!("input {name}"),
                    module: "INPUT".into(),
                    args: Args::default(),
                    output: None,
                    caption: None,
                    wall_ms: 0.0,
                    error: Some(TraceError::from(&ModuleError::State(e))),
                });
                return record;
            }
        }
        let mut result: Option<Value> = None;
        let mut last: Option<Value> = None;
        for (i, step) in program.steps.iter().enumerate() {
            let index = i + 1;
            let start = Instant::now();
            let mut args = Args::default();
            let outcome = self.run_step(step, &state, index, &mut args);
            let elapsed = start.elapsed();
            let outcome = outcome.and_then(|(v, caption)| {
                if elapsed > self.step_timeout {
                    Err(ModuleError::Timeout {
                        elapsed_ms: elapsed.as_millis() as u64,
                        limit_ms: self.step_timeout.as_millis() as u64,
                    })
                } else {
                    Ok((v, caption))
                }
            });
            let outcome = outcome.and_then(|(v, caption)| {
                state.bind(&step.output, v.clone())?;
                Ok((v, caption))
            });
            let wall_ms = (elapsed.as_secs_f64() * 1e6).round() / 1e3;
            let mut trace = StepTrace {
                index,
                step_text: render_step(step),
                module: step.module.to_ascii_uppercase(),
                args,
                output: None,
                caption: None,
                wall_ms,
                error: None,
            };
            match outcome {
                Ok((v, caption)) => {
                    if trace.module == "RESULT" {
                        result = Some(v.clone());
                    }
                    last = Some(v.clone());
                    trace.output = Some(v);
                    trace.caption = Some(caption);
                    record.traces.push(trace);
                }
                Err(e) => {
                    trace.error = Some(TraceError::from(&e));
                    record.traces.push(trace);
                    return record;
                }
            }
        }
        record.result = result.or(last);
        record.status = if record.result.is_some() { RunStatus::Ok } else { RunStatus::Failed };
        record
    }

    fn run_step(
        &self,
        step: &ProgramStep,
        state: &ProgramState,
        index: usize,
        args_out: &mut Args,
    ) -> Result<(Value, String), ModuleError> {
        let module = self.registry.resolve(&step.module)?;
        let args = resolve_args(step, state, module.signature(), index)?;
        *args_out = args.clone();
        let cx = ExecContext {
            backend: self.backend.as_ref(),
            list: self.list,
            emoji: self.emoji,
            exec: self.exec,
            state,
            step: index,
        };
        let v = module.execute(&args, &cx)?;
        let caption = module.summarize(&args, &v);
        Ok((v, caption))
    }
}
