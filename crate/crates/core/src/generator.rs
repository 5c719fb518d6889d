//! Few-shot program generation and answer voting.
//!
//! A prompt is the task header followed by `k` example blocks and the new
//! instruction:
//!
//! ```text
//! <header>
//!
//! Instruction: <example instruction>
//! Program:
//! <example program>
//!
//! Instruction: <new instruction>
//! Program:
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_program, validate, Program, ProgramError, ValidationReport};
use crate::signature::Signatures;
use crate::value::{format_number, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InContextExample {
    pub id: u32,
    pub instruction: String,
    pub program: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExamplePool {
    pub task: String,
    /// May contain `{list_max}`.
    pub header: String,
    pub examples: Vec<InContextExample>,
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("reading pool {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing pool: {0}")]
    Json(#[from] serde_json::Error),
    #[error("example {id} does not parse: {error}")]
    BadExample { id: u32, error: ProgramError },
    #[error("example id {0} appears twice")]
    DuplicateId(u32),
}

impl ExamplePool {
    pub fn from_json(s: &str) -> Result<ExamplePool, PoolError> {
        let pool: ExamplePool = serde_json::from_str(s)?;
        pool.check()?;
        Ok(pool)
    }

    pub fn load(path: &Path) -> Result<ExamplePool, PoolError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|source| PoolError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&raw)
    }

    /// Every example program must parse; ids must be unique.
    pub fn check(&self) -> Result<(), PoolError> {
        let mut seen = std::collections::HashSet::new();
        for ex in &self.examples {
            if !seen.insert(ex.id) {
                return Err(PoolError::DuplicateId(ex.id));
            }
            parse_program(&ex.program).map_err(|error| PoolError::BadExample { id: ex.id, error })?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    /// `k` examples drawn without replacement with the run seed.
    Random,
    /// The listed example ids, in order.
    Curated { ids: Vec<u32> },
    /// `runs` random prompts (seeds `seed..seed+runs`), answers voted.
    Voting { runs: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub pool: ExamplePool,
    pub k: usize,
    pub strategy: Strategy,
    pub list_max: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ClientError {
    #[error("no replay completion for instruction {instruction:?}")]
    ReplayMiss { instruction: String },
    #[error("no script rule matches instruction {instruction:?}")]
    NoRule { instruction: String },
    #[error("completion client: {message}")]
    Remote { message: String },
    #[error("completion client is misconfigured: {message}")]
    Config { message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("pool has {pool} examples but {k} were requested")]
    PoolTooSmall { k: usize, pool: usize },
    #[error("curated example {0} is not in the pool")]
    UnknownExample(u32),
    #[error("pool is empty")]
    EmptyPool,
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("generated program is unusable: {reason}")]
    Generation { raw: String, reason: GenerationFailure },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationFailure {
    #[error("{0}")]
    Syntax(ProgramError),
    #[error("{0}")]
    Invalid(ValidationReport),
}

/// Example indices for a prompt under `spec` and `seed`.
pub fn choose_examples(spec: &PromptSpec, seed: u64) -> Result<Vec<usize>, GenError> {
    let n = spec.pool.len();
    if n == 0 {
        return Err(GenError::EmptyPool);
    }
    match &spec.strategy {
        Strategy::Curated { ids } => ids
            .iter()
            .map(|id| spec.pool.examples.iter().position(|e| e.id == *id).ok_or(GenError::UnknownExample(*id)))
            .collect(),
        Strategy::Random | Strategy::Voting { .. } => {
            if spec.k > n {
                return Err(GenError::PoolTooSmall { k: spec.k, pool: n });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(rand::seq::index::sample(&mut rng, n, spec.k).into_vec())
        }
    }
}

fn block(instruction: &str, program: &str) -> String {
    format!("Instruction: {}\nProgram:\n{}\n", instruction.trim(), program.trim())
}

pub fn build_prompt(spec: &PromptSpec, instruction: &str, seed: u64) -> Result<String, GenError> {
    let picks = choose_examples(spec, seed)?;
    let mut out = spec.pool.header.replace("{list_max}", &spec.list_max.to_string()).trim_end().to_string();
    out.push_str("\n\n");
    for i in picks {
        let ex = &spec.pool.examples[i];
        out.push_str(&block(&ex.instruction, &ex.program));
        out.push('\n');
    }
    out.push_str(&format!("Instruction: {}\nProgram:\n", instruction.trim()));
    Ok(out)
}

/// The instruction of the final block of a prompt.
pub fn prompt_instruction(prompt: &str) -> Option<&str> {
    let start = prompt.rfind("Instruction: ")? + "Instruction: ".len();
    let rest = &prompt[start..];
    Some(rest[..rest.find('\n').unwrap_or(rest.len())].trim())
}

/// Prompt text in, completion text out.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ClientError>;
}

/// Answers from a fixed instruction → completion map.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReplayClient {
    pub completions: BTreeMap<String, String>,
}

impl ReplayClient {
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl CompletionClient for ReplayClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let instruction = prompt_instruction(prompt).unwrap_or("");
        self.completions
            .get(instruction)
            .cloned()
            .ok_or_else(|| ClientError::ReplayMiss { instruction: instruction.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Regex matched against the instruction (case-insensitive).
    pub pattern: String,
    /// Completion template; `$1`, `${name}` refer to captures.
    pub program: String,
}

/// Turns instructions into programs with regex templates.
#[derive(Debug, Clone)]
pub struct ScriptedClient {
    rules: Vec<(Regex, String)>,
}

impl ScriptedClient {
    pub fn new(rules: &[ScriptRule]) -> Result<Self, regex::Error> {
        let rules = rules
            .iter()
            .map(|r| Ok((Regex::new(&format!("(?i){}", r.pattern))?, r.program.clone())))
            .collect::<Result<_, regex::Error>>()?;
        Ok(ScriptedClient { rules })
    }
}

impl CompletionClient for ScriptedClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let instruction = prompt_instruction(prompt).unwrap_or("");
        for (re, template) in &self.rules {
            if let Some(caps) = re.captures(instruction) {
                let mut out = String::new();
                caps.expand(template, &mut out);
                return Ok(out);
            }
        }
        Err(ClientError::NoRule { instruction: instruction.to_string() })
    }
}

/// Settings for an OpenAI-style `/completions` endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub key_var: String,
    pub max_tokens: u32,
}

impl RemoteConfig {
    /// Reads `VISPIPE_LLM_ENDPOINT`, `VISPIPE_LLM_MODEL` and
    /// `VISPIPE_LLM_KEY_VAR` (default `OPENAI_API_KEY`).
    pub fn from_env() -> Result<Self, ClientError> {
        let endpoint = std::env::var("VISPIPE_LLM_ENDPOINT")
            .map_err(|_| ClientError::Config { message: "VISPIPE_LLM_ENDPOINT is not set".into() })?;
        Ok(RemoteConfig {
            endpoint,
            model: std::env::var("VISPIPE_LLM_MODEL").unwrap_or_else(|_| "text-davinci-003".into()),
            key_var: std::env::var("VISPIPE_LLM_KEY_VAR").unwrap_or_else(|_| "OPENAI_API_KEY".into()),
            max_tokens: 512,
        })
    }
}

pub struct RemoteClient {
    config: RemoteConfig,
    http: reqwest::blocking::Client,
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .map_err(|e| ClientError::Config { message: e.to_string() })?;
        Ok(RemoteClient { config, http })
    }
}

impl CompletionClient for RemoteClient {
    fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        let remote = |e: reqwest::Error| ClientError::Remote { message: e.to_string() };
        let body = serde_json::json!({
            "model": self.config.model,
            "prompt": prompt,
            "max_tokens": self.config.max_tokens,
            "temperature": 0,
            "stop": ["\n\n"],
        });
        let mut req = self.http.post(&self.config.endpoint).json(&body);
        if let Ok(key) = std::env::var(&self.config.key_var) {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(remote)?;
        if !resp.status().is_success() {
            return Err(ClientError::Remote { message: format!("HTTP {}", resp.status()) });
        }
        let v: serde_json::Value = resp.json().map_err(remote)?;
        v["choices"][0]["text"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ClientError::Remote { message: "response has no choices[0].text".into() })
    }
}

/// Cuts a completion at its first blank line.
pub fn trim_completion(raw: &str) -> &str {
    let mut end = 0;
    let mut seen_content = false;
    for line in raw.split_inclusive('\n') {
        if line.trim().is_empty() {
            if seen_content {
                break;
            }
        } else {
            seen_content = true;
        }
        end += line.len();
    }
    raw[..end].trim()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub prompt: String,
    pub raw: String,
    pub program: Program,
}

/// Builds a prompt, asks the client, and parses and validates the answer.
pub fn generate_program<'a>(
    spec: &PromptSpec,
    instruction: &str,
    client: &dyn CompletionClient,
    seed: u64,
    sigs: &dyn Signatures,
    inputs: impl IntoIterator<Item = &'a str>,
) -> Result<Generated, GenError> {
    let prompt = build_prompt(spec, instruction, seed)?;
    let raw = client.complete(&prompt)?;
    let program = parse_program(trim_completion(&raw))
        .map_err(|e| GenError::Generation { raw: raw.clone(), reason: GenerationFailure::Syntax(e) })?;
    let report = validate(&program, sigs, inputs);
    if !report.is_ok() {
        return Err(GenError::Generation { raw, reason: GenerationFailure::Invalid(report) });
    }
    Ok(Generated { prompt, raw, program })
}

/// Comparison key for voting: trimmed lowercase text.
pub fn normalize_answer(v: &Value) -> String {
    let s = match v {
        Value::Number(n) => format_number(*n),
        other => other.summary(),
    };
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VoteError {
    #[error("every run failed")]
    AllRunsFailed,
}

/// Index of the winning answer among `keys` (`None` = failed run).
/// Plurality wins; ties go to the answer whose first occurrence is earliest.
pub fn vote_index(keys: &[Option<String>]) -> Option<usize> {
    let mut counts: Vec<(&str, usize, usize)> = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        let Some(k) = k else { continue };
        match counts.iter_mut().find(|(key, _, _)| key == k) {
            Some(entry) => entry.1 += 1,
            None => counts.push((k, 1, i)),
        }
    }
    counts.iter().fold(None::<(usize, usize)>, |best, &(_, n, first)| match best {
        Some((bn, _)) if bn >= n => best,
        _ => Some((n, first)),
    })
    .map(|(_, first)| first)
}

/// Plurality vote over run answers; failed runs do not count.
/// Returns the first answer given for the winning key.
pub fn vote(results: &[Option<Value>]) -> Result<Value, VoteError> {
    let keys: Vec<Option<String>> = results.iter().map(|r| r.as_ref().map(normalize_answer)).collect();
    let i = vote_index(&keys).ok_or(VoteError::AllRunsFailed)?;
    Ok(results[i].clone().expect("winner is a successful run"))
}
