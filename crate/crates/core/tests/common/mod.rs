#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use vispipe_core::backend::{Backend, ProceduralBackend, ProceduralConfig};
use vispipe_core::eval::{LoadedDataset, Task};
use vispipe_core::generator::{ExamplePool, PromptSpec, ReplayClient, Strategy};
use vispipe_core::interpreter::Interpreter;
use vispipe_core::registry::Registry;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn dataset(task: Task) -> LoadedDataset {
    LoadedDataset::load(&fixtures().join(format!("datasets/{task}.json"))).expect("dataset loads")
}

pub fn spec(task: Task, strategy: Strategy) -> PromptSpec {
    let pool = ExamplePool::load(&fixtures().join(format!("pools/{task}.json"))).expect("pool loads");
    PromptSpec { k: 2.min(pool.len()), pool, strategy, list_max: 20 }
}

pub fn replay() -> ReplayClient {
    ReplayClient::from_json(&std::fs::read_to_string(fixtures().join("completions.json")).unwrap()).unwrap()
}

pub fn procedural() -> Arc<dyn Backend> {
    Arc::new(ProceduralBackend::new(ProceduralConfig::default()))
}

pub fn interpreter(backend: Arc<dyn Backend>) -> Interpreter {
    Interpreter::new(Arc::new(Registry::standard()), backend)
}
