//! Service settings and the backend / completion-client selectors shared
//! with the command line.

use std::collections::HashMap;
use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vispipe_core::backend::{Backend, FixtureBackend, HttpBackend, ProceduralBackend, ProceduralConfig};
use vispipe_core::eval::Task;
use vispipe_core::generator::{
    CompletionClient, ExamplePool, RemoteClient, RemoteConfig, ReplayClient, ScriptRule, ScriptedClient,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("bad selector {0:?}")]
    Selector(String),
    #[error("reading {path}: {message}")]
    Load { path: String, message: String },
}

fn load_err(path: &Path, e: impl fmt::Display) -> ConfigError {
    ConfigError::Load { path: path.display().to_string(), message: e.to_string() }
}

/// `procedural`, `procedural:CONFIG.json`, `fixtures:FILE` or `remote:URL`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BackendMode {
    Procedural(Option<PathBuf>),
    Fixtures(PathBuf),
    Remote(String),
}

impl FromStr for BackendMode {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "procedural" => Ok(BackendMode::Procedural(None)),
            Some(("procedural", p)) => Ok(BackendMode::Procedural(Some(p.into()))),
            Some(("fixtures", p)) if !p.is_empty() => Ok(BackendMode::Fixtures(p.into())),
            Some(("remote", u)) if !u.is_empty() => Ok(BackendMode::Remote(u.to_string())),
            _ => Err(ConfigError::Selector(s.to_string())),
        }
    }
}

impl fmt::Display for BackendMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendMode::Procedural(None) => f.write_str("procedural"),
            BackendMode::Procedural(Some(p)) => write!(f, "procedural:{}", p.display()),
            BackendMode::Fixtures(p) => write!(f, "fixtures:{}", p.display()),
            BackendMode::Remote(u) => write!(f, "remote:{u}"),
        }
    }
}

impl TryFrom<String> for BackendMode {
    type Error = ConfigError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<BackendMode> for String {
    fn from(m: BackendMode) -> String {
        m.to_string()
    }
}

impl BackendMode {
    pub fn build(&self) -> Result<Arc<dyn Backend>, ConfigError> {
        Ok(match self {
            BackendMode::Procedural(None) => Arc::new(ProceduralBackend::new(ProceduralConfig::default())),
            BackendMode::Procedural(Some(p)) => {
                let text = std::fs::read_to_string(p).map_err(|e| load_err(p, e))?;
                let cfg: ProceduralConfig = serde_json::from_str(&text).map_err(|e| load_err(p, e))?;
                Arc::new(ProceduralBackend::new(cfg))
            }
            BackendMode::Fixtures(p) => Arc::new(FixtureBackend::load(p).map_err(|e| load_err(p, e))?),
            BackendMode::Remote(u) => {
                Arc::new(HttpBackend::new(u).map_err(|e| ConfigError::Load { path: u.clone(), message: e.to_string() })?)
            }
        })
    }
}

/// `replay:FILE`, `scripted:FILE` or `remote` (settings from the environment).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ClientMode {
    Replay(PathBuf),
    Scripted(PathBuf),
    Remote,
}

impl FromStr for ClientMode {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "remote" => Ok(ClientMode::Remote),
            Some(("replay", p)) if !p.is_empty() => Ok(ClientMode::Replay(p.into())),
            Some(("scripted", p)) if !p.is_empty() => Ok(ClientMode::Scripted(p.into())),
            _ => Err(ConfigError::Selector(s.to_string())),
        }
    }
}

impl fmt::Display for ClientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClientMode::Replay(p) => write!(f, "replay:{}", p.display()),
            ClientMode::Scripted(p) => write!(f, "scripted:{}", p.display()),
            ClientMode::Remote => f.write_str("remote"),
        }
    }
}

impl TryFrom<String> for ClientMode {
    type Error = ConfigError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ClientMode> for String {
    fn from(m: ClientMode) -> String {
        m.to_string()
    }
}

impl ClientMode {
    pub fn build(&self) -> Result<Arc<dyn CompletionClient>, ConfigError> {
        Ok(match self {
            ClientMode::Replay(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| load_err(p, e))?;
                Arc::new(ReplayClient::from_json(&text).map_err(|e| load_err(p, e))?)
            }
            ClientMode::Scripted(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| load_err(p, e))?;
                let rules: Vec<ScriptRule> = serde_json::from_str(&text).map_err(|e| load_err(p, e))?;
                Arc::new(ScriptedClient::new(&rules).map_err(|e| load_err(p, e))?)
            }
            ClientMode::Remote => {
                let cfg = RemoteConfig::from_env().map_err(|e| ConfigError::Selector(e.to_string()))?;
                Arc::new(RemoteClient::new(cfg).map_err(|e| ConfigError::Selector(e.to_string()))?)
            }
        })
    }
}

/// Reads every `<task>.json` pool present in `dir`.
pub fn load_pools(dir: &Path) -> Result<HashMap<Task, ExamplePool>, ConfigError> {
    let mut out = HashMap::new();
    for task in [Task::Qa, Task::Pairqa, Task::Tagging, Task::Editing] {
        let path = dir.join(format!("{task}.json"));
        if path.exists() {
            let pool = ExamplePool::load(&path).map_err(|e| load_err(&path, e))?;
            pool.check().map_err(|e| load_err(&path, e))?;
            out.insert(task, pool);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Directory holding `<task>.json` example pools.
    pub pools: PathBuf,
    pub backend: BackendMode,
    pub client: ClientMode,
    /// Directory for the store; `None` keeps everything in memory.
    #[serde(default)]
    pub store: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_list_max")]
    pub list_max: u32,
}

fn default_k() -> usize {
    2
}

fn default_list_max() -> u32 {
    20
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| load_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| load_err(path, e))
    }
}
