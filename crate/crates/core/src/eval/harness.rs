//! Batch generate, execute and score.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{LoadedDataset, Task};
use super::metrics::{accuracy, aggregate_f1, match_tagging, F1Summary, MatchMode, IOU_THRESHOLD};
use crate::generator::{generate_program, vote_index, CompletionClient, GenError, PromptSpec, Strategy};
use crate::image::ObjectRegion;
use crate::interpreter::{Interpreter, RunRecord, RunStatus, StepTrace, TraceError};
use crate::par::Exec;
use crate::rationale::{render_rationale, sidecar_json};
use crate::registry::Args;
use crate::value::Value;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub seed: u64,
    /// Fan-out over records.
    pub exec: Exec,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("voting is only defined for question answering, not {0}")]
    VotingUnsupported(Task),
    #[error("example pool is for task {pool:?} but the dataset is {dataset}")]
    PoolTaskMismatch { pool: String, dataset: Task },
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
    pub status: RunStatus,
    /// Canonical text of the program behind the prediction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localization: Option<PrecisionRecall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tagging: Option<PrecisionRecall>,
    /// Editing only: left blank for a human judge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub rationale: String,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub records: usize,
    pub ok: usize,
    pub failed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localization: Option<F1Summary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tagging: Option<F1Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub strategy: Strategy,
    pub k: usize,
    pub seed: u64,
    pub backend: String,
    pub records: Vec<RecordRow>,
    pub summary: EvalSummary,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Answer text used for scoring and voting. Booleans read as yes/no for
/// single-image questions and true/false for statements about a pair.
pub fn answer_text(task: Task, v: &Value) -> String {
    match (task, v) {
        (Task::Qa, Value::Boolean(b)) => if *b { "yes" } else { "no" }.to_string(),
        (_, Value::Boolean(b)) => if *b { "true" } else { "false" }.to_string(),
        (_, Value::Text(s)) => s.trim().to_lowercase(),
        (_, other) => crate::generator::normalize_answer(other),
    }
}

/// Objects a tagging program predicts: the `object` argument of its last
/// TAG step, or the result when that is an object list.
pub fn tagged_objects(run: &RunRecord) -> Option<Vec<ObjectRegion>> {
    run.traces
        .iter()
        .rev()
        .filter(|t| t.module == "TAG" && t.error.is_none())
        .find_map(|t| t.args.objects("object").ok().map(<[ObjectRegion]>::to_vec))
        .or_else(|| match &run.result {
            Some(Value::ObjectList(o)) => Some(o.clone()),
            _ => None,
        })
}

fn generation_failure(run_id: &str, e: &GenError) -> RunRecord {
    let source = match e {
        GenError::Generation { raw, .. } => raw.clone(),
        _ => String::new(),
    };
    RunRecord {
        run_id: run_id.to_string(),
        source,
        inputs: Vec::new(),
        traces: vec![StepTrace {
            index: 0,
            step_text: "generate program".into(),
            module: "GENERATE".into(),
            args: Args::default(),
            output: None,
            caption: None,
            wall_ms: 0.0,
            error: Some(TraceError { kind: "generation".into(), message: e.to_string() }),
        }],
        result: None,
        status: RunStatus::Failed,
    }
}

struct Outcome {
    row: RecordRow,
    run: RunRecord,
    edited: Option<Vec<u8>>,
}

fn eval_record(
    data: &LoadedDataset,
    i: usize,
    spec: &PromptSpec,
    client: &dyn CompletionClient,
    interp: &Interpreter,
    seed: u64,
) -> Outcome {
    let task = data.task();
    let rec = &data.dataset.records[i];
    let names = task.input_names();
    let inputs: Vec<(String, Value)> =
        names.iter().zip(&data.images[i]).map(|(n, img)| (n.to_string(), Value::Image(img.clone()))).collect();
    let runs = match spec.strategy {
        Strategy::Voting { runs } => runs.max(1),
        _ => 1,
    };

    let mut records = Vec::with_capacity(runs);
    let mut summaries = Vec::with_capacity(runs);
    for s in seed..seed + runs as u64 {
        let run_id = format!("{}-s{s}", rec.id);
        let run = match generate_program(spec, &rec.instruction, client, s, interp.registry(), names.iter().copied()) {
            Ok(g) => interp.execute(&run_id, &g.program, &inputs),
            Err(e) => generation_failure(&run_id, &e),
        };
        let answer = match (run.status, &run.result) {
            (RunStatus::Ok, Some(v)) if matches!(task, Task::Qa | Task::Pairqa) => Some(answer_text(task, v)),
            _ => None,
        };
        let error = run.failed_trace().and_then(|t| t.error.as_ref()).map(|e| format!("{}: {}", e.kind, e.message));
        summaries.push(RunSummary { run_id: run_id.clone(), seed: s, status: run.status, answer, error });
        records.push(run);
    }

    let keys: Vec<Option<String>> = summaries.iter().map(|r| r.answer.clone()).collect();
    let pick = vote_index(&keys).unwrap_or(0);
    let run = records.swap_remove(pick);
    let chosen = &summaries[pick];

    let mut row = RecordRow {
        id: rec.id.clone(),
        question_type: rec.question_type.clone(),
        status: run.status,
        program: (!run.traces.iter().any(|t| t.module == "GENERATE")).then(|| run.source.clone()),
        prediction: None,
        gold: rec.answer.clone(),
        correct: None,
        localization: None,
        tagging: None,
        judgment: None,
        error: chosen.error.clone(),
        rationale: format!("rationale/{}.html", rec.id),
        runs: summaries.clone(),
    };
    let mut edited = None;
    let ok = run.status == RunStatus::Ok;
    match task {
        Task::Qa | Task::Pairqa => {
            row.prediction = chosen.answer.clone();
            let gold = rec.answer.clone().unwrap_or_default();
            row.correct = Some(accuracy(&[row.prediction.clone()], &[gold]).map(|a| a == 1.0).unwrap_or(false));
        }
        Task::Tagging => {
            let gold = rec.objects.clone().unwrap_or_default();
            let preds = if ok { tagged_objects(&run) } else { None };
            let score = |mode| {
                let m = match_tagging(preds.as_deref().unwrap_or(&[]), &gold, IOU_THRESHOLD, mode);
                PrecisionRecall { precision: m.precision, recall: m.recall }
            };
            if ok && preds.is_none() {
                row.error = Some("program did not tag any objects".into());
            }
            row.prediction = preds.as_ref().map(|p| {
                p.iter().map(|o| o.label().unwrap_or("").to_string()).collect::<Vec<_>>().join(", ")
            });
            row.localization = Some(score(MatchMode::Localization));
            row.tagging = Some(score(MatchMode::Tagging));
        }
        Task::Editing => {
            row.judgment = Some(String::new());
            match (&run.result, ok) {
                (Some(Value::Image(img)), true) => {
                    row.prediction = Some(format!("images/{}.png", rec.id));
                    edited = Some(img.to_png());
                }
                (_, true) => row.error = Some("program did not return an image".into()),
                _ => {}
            }
        }
    }
    Outcome { row, run, edited }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), EvalError> {
    std::fs::write(path, bytes).map_err(|source| EvalError::Io { path: path.display().to_string(), source })
}

/// Evaluates every record and, when `out_dir` is given, writes
/// `report.json`, `rationale/<id>.html` (plus a `.json` sidecar) and, for
/// editing, `images/<id>.png`. Per-record failures never abort the batch.
pub fn run_eval(
    data: &LoadedDataset,
    spec: &PromptSpec,
    client: &dyn CompletionClient,
    interp: &Interpreter,
    opts: &EvalOptions,
    out_dir: Option<&Path>,
) -> Result<EvalReport, EvalError> {
    let task = data.task();
    if matches!(spec.strategy, Strategy::Voting { .. }) && matches!(task, Task::Tagging | Task::Editing) {
        return Err(EvalError::VotingUnsupported(task));
    }
    if !spec.pool.task.eq_ignore_ascii_case(task.name()) {
        return Err(EvalError::PoolTaskMismatch { pool: spec.pool.task.clone(), dataset: task });
    }

    let outcomes = opts.exec.map_range(data.len(), |i| eval_record(data, i, spec, client, interp, opts.seed));

    if let Some(dir) = out_dir {
        let mkdir = |p: &Path| {
            std::fs::create_dir_all(p).map_err(|source| EvalError::Io { path: p.display().to_string(), source })
        };
        mkdir(&dir.join("rationale"))?;
        if task == Task::Editing {
            mkdir(&dir.join("images"))?;
        }
        for o in &outcomes {
            let id = &o.row.id;
            write(&dir.join(format!("rationale/{id}.html")), render_rationale(&o.run).as_bytes())?;
            write(&dir.join(format!("rationale/{id}.json")), sidecar_json(&o.run).as_bytes())?;
            if let Some(png) = &o.edited {
                write(&dir.join(format!("images/{id}.png")), png)?;
            }
        }
    }

    let rows: Vec<RecordRow> = outcomes.into_iter().map(|o| o.row).collect();
    let ok = rows.iter().filter(|r| r.status == RunStatus::Ok).count();
    let mut summary =
        EvalSummary { records: rows.len(), ok, failed: rows.len() - ok, accuracy: None, localization: None, tagging: None };
    match task {
        Task::Qa | Task::Pairqa => {
            let preds: Vec<Option<String>> = rows.iter().map(|r| r.prediction.clone()).collect();
            let gold: Vec<String> = rows.iter().map(|r| r.gold.clone().unwrap_or_default()).collect();
            summary.accuracy = accuracy(&preds, &gold).ok();
        }
        Task::Tagging => {
            let pr = |f: fn(&RecordRow) -> Option<PrecisionRecall>| {
                let v: Vec<(f64, f64)> = rows.iter().filter_map(f).map(|p| (p.precision, p.recall)).collect();
                aggregate_f1(&v).ok()
            };
            summary.localization = pr(|r| r.localization);
            summary.tagging = pr(|r| r.tagging);
        }
        Task::Editing => {}
    }

    let report = EvalReport {
        task,
        strategy: spec.strategy.clone(),
        k: spec.k,
        seed: opts.seed,
        backend: interp.backend().name(),
        records: rows,
        summary,
    };
    if let Some(dir) = out_dir {
        write(&dir.join("report.json"), report.to_json().as_bytes())?;
    }
    Ok(report)
}
