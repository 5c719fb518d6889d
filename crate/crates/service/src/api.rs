//! The JSON API used by the tuning interface.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use vispipe_core::dsl::{parse_program, validate, Program, ProgramError};
use vispipe_core::eval::Task;
use vispipe_core::generator::{generate_program, CompletionClient, ExamplePool, GenError, GenerationFailure, PromptSpec, Strategy};
use vispipe_core::image::{sniff_format, Image, ImageId};
use vispipe_core::interpreter::{Interpreter, RunRecord, RunStatus, TraceError};
use vispipe_core::rationale::{render_rationale, sidecar_json};
use vispipe_core::value::{ImageStore, Value, ValueRepr};

use crate::backend_api::backend_router;
use crate::error::ApiError;
use crate::store::Store;

/// Generation and execution resources.
pub struct Engine {
    pub interp: Interpreter,
    pub client: Arc<dyn CompletionClient>,
    pub pools: HashMap<Task, ExamplePool>,
    pub k: usize,
    pub list_max: u32,
}

struct Inner {
    engine: Engine,
    store: Store,
    sessions: parking_lot::Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(engine: Engine, store: Store) -> Self {
        AppState(Arc::new(Inner { engine, store, sessions: parking_lot::Mutex::new(HashMap::new()) }))
    }

    pub fn store(&self) -> &Store {
        &self.0.store
    }

    pub fn engine(&self) -> &Engine {
        &self.0.engine
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    #[default]
    Random,
    Curated,
    Voting,
}

fn parse_task(s: &str) -> Result<Task, ApiError> {
    s.parse().map_err(ApiError::bad_request)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("worker task panicked")
}

/// Prompt settings shared by one-off generation and sessions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptSettings {
    #[serde(default)]
    pub strategy: StrategyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub example_ids: Vec<u32>,
}

impl Engine {
    fn spec(&self, task: Task, s: &PromptSettings) -> Result<PromptSpec, ApiError> {
        let pool = self
            .pools
            .get(&task)
            .cloned()
            .ok_or_else(|| ApiError::bad_request(format!("no example pool for task {task}")))?;
        let strategy = match s.strategy {
            StrategyName::Random => Strategy::Random,
            StrategyName::Curated => Strategy::Curated { ids: s.example_ids.clone() },
            StrategyName::Voting => {
                return Err(ApiError::bad_request("voting applies to batch evaluation, not single programs"))
            }
        };
        Ok(PromptSpec { pool, k: s.k.unwrap_or(self.k), strategy, list_max: self.list_max })
    }
}

fn gen_error(e: GenError) -> ApiError {
    match e {
        GenError::Generation { raw, reason } => {
            let details = match &reason {
                GenerationFailure::Invalid(r) => json!({ "raw": raw, "issues": r.issues }),
                GenerationFailure::Syntax(_) => json!({ "raw": raw }),
            };
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "generation", reason.to_string()).with(details)
        }
        GenError::Client(c) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "client", c.to_string()),
        other => ApiError::bad_request(other.to_string()),
    }
}

#[derive(Debug, Deserialize)]
struct GenerateRequest {
    instruction: String,
    task: String,
    #[serde(flatten)]
    settings: PromptSettings,
}

async fn generate(State(st): State<AppState>, Json(req): Json<GenerateRequest>) -> Result<Response, ApiError> {
    let task = parse_task(&req.task)?;
    let spec = st.engine().spec(task, &req.settings)?;
    let g = blocking(move || {
        let e = st.engine();
        generate_program(&spec, &req.instruction, e.client.as_ref(), req.settings.seed, e.interp.registry(), task.input_names().iter().copied())
    })
    .await
    .map_err(gen_error)?;
    Ok(Json(json!({ "program": g.program.render(), "raw": g.raw, "prompt": g.prompt })).into_response())
}

fn check_program(src: &str, task: Task, engine: &Engine) -> Result<Program, ApiError> {
    let program = parse_program(src).map_err(|e| {
        let lines = match &e {
            ProgramError::Syntax(lines) => json!(lines),
            ProgramError::EmptyProgram => json!([]),
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "syntax", e.to_string()).with(json!({ "lines": lines }))
    })?;
    let report = validate(&program, engine.interp.registry(), task.input_names().iter().copied());
    if !report.is_ok() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", report.to_string())
            .with(json!({ "issues": report.issues })));
    }
    Ok(program)
}

fn input_values(st: &AppState, task: Task, ids: &[String]) -> Result<Vec<(String, Value)>, ApiError> {
    let names = task.input_names();
    if ids.len() != names.len() {
        return Err(ApiError::bad_request(format!("task {task} takes {} images, got {}", names.len(), ids.len())));
    }
    names
        .iter()
        .zip(ids)
        .map(|(n, id)| {
            let img = ImageId::parse(id).and_then(|i| st.store().image(&i)).ok_or_else(|| ApiError::not_found("image", id))?;
            Ok((n.to_string(), Value::Image(img)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_id: String,
    pub status: RunStatus,
    pub result: Option<ValueRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<TraceError>,
}

/// Executes and persists a run, returning its summary.
fn run_and_store(st: &AppState, program: &Program, inputs: &[(String, Value)]) -> Result<RunOutcome, ApiError> {
    let run_id = format!("run-{:06}", st.store().next("run")?);
    let run = st.engine().interp.execute(&run_id, program, inputs);
    save_run(st.store(), &run)?;
    let mut scratch = ImageStore::new();
    Ok(RunOutcome {
        run_id,
        status: run.status,
        result: run.result.as_ref().map(|v| ValueRepr::encode(v, &mut scratch)),
        error: run.failed_trace().and_then(|t| t.error.clone()),
    })
}

pub fn save_run(store: &Store, run: &RunRecord) -> Result<(), ApiError> {
    let mut images = ImageStore::new();
    let repr = run.to_repr(&mut images);
    for (_, img) in images.iter() {
        store.put_image(img.clone())?;
    }
    let id = &run.run_id;
    let sidecar: serde_json::Value = serde_json::from_str(&sidecar_json(run)).expect("sidecar is JSON");
    store.put_all(vec![
        (format!("run/{id}"), serde_json::to_value(&repr).expect("run serializes")),
        (format!("rationale/{id}"), serde_json::Value::String(render_rationale(run))),
        (format!("rationale_json/{id}"), sidecar),
    ])?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ExecuteRequest {
    program: String,
    input_image_ids: Vec<String>,
    task: String,
}

async fn execute(State(st): State<AppState>, Json(req): Json<ExecuteRequest>) -> Result<Response, ApiError> {
    let task = parse_task(&req.task)?;
    let program = check_program(&req.program, task, st.engine())?;
    let inputs = input_values(&st, task, &req.input_image_ids)?;
    let out = blocking(move || run_and_store(&st, &program, &inputs)).await?;
    Ok(Json(out).into_response())
}

fn json_text(v: &serde_json::Value) -> Response {
    let body = serde_json::to_string_pretty(v).expect("stored JSON serializes");
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn list_runs(State(st): State<AppState>) -> Response {
    let ids: Vec<String> =
        st.store().keys_with_prefix("run/").into_iter().map(|k| k["run/".len()..].to_string()).collect();
    Json(json!({ "runs": ids })).into_response()
}

async fn get_run(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let v = st.store().get(&format!("run/{id}")).ok_or_else(|| ApiError::not_found("run", &id))?;
    Ok(json_text(&v))
}

async fn get_rationale(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let v = st.store().get(&format!("rationale/{id}")).ok_or_else(|| ApiError::not_found("run", &id))?;
    let html = v.as_str().unwrap_or_default().to_string();
    Ok(([(header::CONTENT_TYPE, "text/html; charset=utf-8")], html).into_response())
}

async fn get_rationale_json(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let v = st.store().get(&format!("rationale_json/{id}")).ok_or_else(|| ApiError::not_found("run", &id))?;
    Ok(json_text(&v))
}

async fn upload_image(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    if sniff_format(&body).is_none() {
        return Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type", "expected a PNG or JPEG image"));
    }
    let img = Image::decode(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let id = st.store().put_image(Arc::new(img))?;
    Ok(Json(json!({ "image_id": id })).into_response())
}

async fn get_image(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let bare = id.strip_suffix(".png").unwrap_or(&id);
    let img = ImageId::parse(bare).and_then(|i| st.store().image(&i)).ok_or_else(|| ApiError::not_found("image", &id))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], img.to_png()).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: usize,
    pub instruction: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ValueRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub task: Task,
    pub image_ids: Vec<String>,
    #[serde(flatten)]
    pub settings: PromptSettings,
    pub history: Vec<Iteration>,
}

#[derive(Debug, Deserialize)]
struct NewSession {
    task: String,
    image_ids: Vec<String>,
    #[serde(flatten)]
    settings: PromptSettings,
}

fn load_session(st: &AppState, id: &str) -> Result<Session, ApiError> {
    let v = st.store().get(&format!("session/{id}")).ok_or_else(|| ApiError::not_found("session", id))?;
    Ok(serde_json::from_value(v).expect("stored sessions deserialize"))
}

fn save_session(st: &AppState, s: &Session) -> Result<(), ApiError> {
    st.store().put(&format!("session/{}", s.id), serde_json::to_value(s).expect("session serializes"))?;
    Ok(())
}

async fn create_session(State(st): State<AppState>, Json(req): Json<NewSession>) -> Result<Response, ApiError> {
    let task = parse_task(&req.task)?;
    st.engine().spec(task, &req.settings)?;
    input_values(&st, task, &req.image_ids)?;
    let id = format!("session-{:06}", st.store().next("session")?);
    let s = Session { id, task, image_ids: req.image_ids, settings: req.settings, history: Vec::new() };
    save_session(&st, &s)?;
    Ok((StatusCode::CREATED, Json(s)).into_response())
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(load_session(&st, &id)?).into_response())
}

#[derive(Debug, Deserialize)]
struct NewIteration {
    instruction: String,
}

/// Generates, executes and records one instruction. Iterations of the same
/// session run one at a time.
async fn add_iteration(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<NewIteration>,
) -> Result<Response, ApiError> {
    load_session(&st, &id)?;
    let lock = st.0.sessions.lock().entry(id.clone()).or_default().clone();
    let _guard = lock.lock().await;
    let mut session = load_session(&st, &id)?;
    let spec = st.engine().spec(session.task, &session.settings)?;
    let inputs = input_values(&st, session.task, &session.image_ids)?;
    let index = session.history.len();
    let seed = session.settings.seed + index as u64;
    let task = session.task;
    let st2 = st.clone();
    let instruction = req.instruction.clone();
    let it = blocking(move || -> Result<Iteration, ApiError> {
        let e = st2.engine();
        let mut it = Iteration {
            index,
            instruction: instruction.clone(),
            seed,
            program: None,
            run_id: None,
            status: RunStatus::Failed,
            result: None,
            error: None,
        };
        match generate_program(&spec, &instruction, e.client.as_ref(), seed, e.interp.registry(), task.input_names().iter().copied()) {
            Err(err) => it.error = Some(err.to_string()),
            Ok(g) => {
                it.program = Some(g.program.render());
                let out = run_and_store(&st2, &g.program, &inputs)?;
                it.run_id = Some(out.run_id);
                it.status = out.status;
                it.result = out.result;
                it.error = out.error.map(|t| format!("{}: {}", t.kind, t.message));
            }
        }
        Ok(it)
    })
    .await?;
    session.history.push(it.clone());
    save_session(&st, &session)?;
    Ok((StatusCode::CREATED, Json(it)).into_response())
}

/// The full HTTP surface, including the backend protocol under `/v1`.
pub fn router(state: AppState) -> Router {
    let backend = state.engine().interp.backend().clone();
    Router::new()
        .route("/api/generate", post(generate))
        .route("/api/execute", post(execute))
        .route("/api/runs", get(list_runs))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/runs/{id}/rationale", get(get_rationale))
        .route("/api/runs/{id}/rationale.json", get(get_rationale_json))
        .route("/api/images", post(upload_image))
        .route("/api/images/{id}", get(get_image))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/iterations", post(add_iteration))
        .layer(DefaultBodyLimit::max(64 << 20))
        .with_state(state)
        .merge(backend_router(backend))
}
