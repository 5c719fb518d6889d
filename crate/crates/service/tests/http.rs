use std::path::PathBuf;
use std::sync::Arc;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};
use vispipe_core::backend::HttpBackend;
use vispipe_core::eval::{run_eval, EvalOptions, LoadedDataset};
use vispipe_core::generator::{ExamplePool, PromptSpec, ReplayClient, Strategy};
use vispipe_core::interpreter::Interpreter;
use vispipe_core::registry::Registry;
use vispipe_core::scene::Scene;
use vispipe_service::{router, spawn, AppState, BackendMode, ClientMode, Running, ServiceConfig};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn config(store: Option<PathBuf>) -> ServiceConfig {
    ServiceConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
        pools: fixtures().join("pools"),
        backend: BackendMode::Procedural(None),
        client: ClientMode::Replay(fixtures().join("completions.json")),
        store,
        k: 2,
        list_max: 20,
    }
}

fn start(store: Option<PathBuf>) -> Running {
    let cfg = config(store);
    spawn(router(AppState::from_config(&cfg).unwrap()), cfg.listen).unwrap()
}

fn scene_png(name: &str) -> Vec<u8> {
    let text = std::fs::read_to_string(fixtures().join(format!("scenes/{name}.json"))).unwrap();
    Scene::from_json(&text).unwrap().render().unwrap().to_png()
}

fn upload(c: &Client, url: &str, png: Vec<u8>) -> String {
    let r = c.post(format!("{url}/api/images")).body(png).send().unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    r.json::<Value>().unwrap()["image_id"].as_str().unwrap().to_string()
}

const COUNT: &str = "BOX0=LOC(image=IMAGE,object='red circle')\nANSWER0=COUNT(box=BOX0)\nFINAL_RESULT=RESULT(var=ANSWER0)";

#[test]
fn execute_then_fetch_is_byte_identical() {
    let srv = start(None);
    let url = srv.url();
    let c = Client::new();
    let img = upload(&c, &url, scene_png("qa_count"));
    assert_eq!(upload(&c, &url, scene_png("qa_count")), img);

    let r = c.post(format!("{url}/api/execute")).json(&json!({"program": COUNT, "input_image_ids": [img], "task": "qa"})).send().unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let out: Value = r.json().unwrap();
    assert_eq!(out["run_id"], "run-000001");
    assert_eq!(out["status"], "ok");
    assert_eq!(out["result"], json!({"kind": "number", "value": 3.0}));

    let a = c.get(format!("{url}/api/runs/run-000001")).send().unwrap().bytes().unwrap();
    let b = c.get(format!("{url}/api/runs/run-000001")).send().unwrap().bytes().unwrap();
    assert_eq!(a, b);
    let rec: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(rec["traces"].as_array().unwrap().len(), 3);
    assert_eq!(rec["source"], COUNT);

    let html = c.get(format!("{url}/api/runs/run-000001/rationale")).send().unwrap().text().unwrap();
    assert_eq!(vispipe_core::rationale::check_structure(&html).unwrap(), 3);
    let side: Value = c.get(format!("{url}/api/runs/run-000001/rationale.json")).send().unwrap().json().unwrap();
    assert_eq!(side["cells"].as_array().unwrap().len(), 3);

    // Images referenced by the run can be fetched.
    let input_id = rec["inputs"][0]["value"]["id"].as_str().unwrap();
    let png = c.get(format!("{url}/api/images/{input_id}.png")).send().unwrap().bytes().unwrap();
    assert_eq!(png.to_vec(), scene_png("qa_count"));

    let runs: Value = c.get(format!("{url}/api/runs")).send().unwrap().json().unwrap();
    assert_eq!(runs["runs"], json!(["run-000001"]));
}

#[test]
fn error_statuses() {
    let srv = start(None);
    let url = srv.url();
    let c = Client::new();
    let img = upload(&c, &url, scene_png("qa_count"));
    let post = |path: &str, body: Value| c.post(format!("{url}{path}")).json(&body).send().unwrap();

    let r = c.post(format!("{url}/api/images")).body("GIF89a not really").send().unwrap();
    assert_eq!(r.status(), StatusCode::UNSUPPORTED_MEDIA_TYPE);

    let r = post("/api/generate", json!({"instruction": "How many red circles are there?", "task": "poetry"}));
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    let r = post("/api/generate", json!({"instruction": "Nobody scripted this", "task": "qa"}));
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);

    let r = post("/api/execute", json!({"program": "BOX0=LOC(image=IMAGE,", "input_image_ids": [img], "task": "qa"}));
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json::<Value>().unwrap()["error"], "syntax");

    let r = post("/api/execute", json!({"program": "X=COUNT(box=NOPE)", "input_image_ids": [img], "task": "qa"}));
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let body: Value = r.json().unwrap();
    assert_eq!(body["error"], "validation");
    assert_eq!(body["issues"][0]["issue"], "undefined_variable");

    let missing = "0".repeat(64);
    let r = post("/api/execute", json!({"program": COUNT, "input_image_ids": [missing], "task": "qa"}));
    assert_eq!(r.status(), StatusCode::NOT_FOUND);

    assert_eq!(c.get(format!("{url}/api/runs/run-999999")).send().unwrap().status(), StatusCode::NOT_FOUND);
    assert_eq!(c.get(format!("{url}/api/sessions/nope")).send().unwrap().status(), StatusCode::NOT_FOUND);
    let r = post("/api/sessions/nope/iterations", json!({"instruction": "x"}));
    assert_eq!(r.status(), StatusCode::NOT_FOUND);

    // A failing step is still a stored run.
    let r = post("/api/execute", json!({"program": "A=EVAL(expr='1 / 0')\nFINAL_RESULT=RESULT(var=A)", "input_image_ids": [img], "task": "qa"}));
    assert_eq!(r.status(), StatusCode::OK);
    let body: Value = r.json().unwrap();
    assert_eq!(body["status"], "failed");
    assert_eq!(body["error"]["kind"], "division_by_zero");
}

#[test]
fn generate_returns_a_canonical_program() {
    let srv = start(None);
    let c = Client::new();
    let r = c
        .post(format!("{}/api/generate", srv.url()))
        .json(&json!({"instruction": "How many red circles are there?", "task": "qa", "strategy": "random", "k": 2, "seed": 4}))
        .send()
        .unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let body: Value = r.json().unwrap();
    assert!(body["program"].as_str().unwrap().contains("COUNT(box=BOX0)"));
    assert!(body["prompt"].as_str().unwrap().ends_with("Instruction: How many red circles are there?\nProgram:\n"));
}

#[test]
fn sessions_accumulate_history_one_iteration_at_a_time() {
    let srv = start(None);
    let url = srv.url();
    let c = Client::new();
    let img = upload(&c, &url, scene_png("qa_count"));
    let r = c.post(format!("{url}/api/sessions")).json(&json!({"task": "qa", "image_ids": [img], "seed": 10})).send().unwrap();
    assert_eq!(r.status(), StatusCode::CREATED);
    let id = r.json::<Value>().unwrap()["id"].as_str().unwrap().to_string();

    let handles: Vec<_> = (0..4)
        .map(|i| {
            let url = url.clone();
            let id = id.clone();
            std::thread::spawn(move || {
                let instruction = if i % 2 == 0 { "How many red circles are there?" } else { "Unscripted" };
                Client::new()
                    .post(format!("{url}/api/sessions/{id}/iterations"))
                    .json(&json!({"instruction": instruction}))
                    .send()
                    .unwrap()
                    .status()
            })
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), StatusCode::CREATED);
    }
    let s: Value = c.get(format!("{url}/api/sessions/{id}")).send().unwrap().json().unwrap();
    let hist = s["history"].as_array().unwrap();
    assert_eq!(hist.len(), 4);
    for (i, it) in hist.iter().enumerate() {
        assert_eq!(it["index"], i);
        assert_eq!(it["seed"], 10 + i);
        if it["instruction"] == "Unscripted" {
            assert_eq!(it["status"], "failed");
            assert!(it["run_id"].is_null());
        } else {
            assert_eq!(it["status"], "ok");
            assert_eq!(it["result"]["value"], 3.0);
        }
    }
}

#[test]
fn store_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let first = {
        let srv = start(Some(dir.path().to_path_buf()));
        let c = Client::new();
        let img = upload(&c, &srv.url(), scene_png("qa_count"));
        c.post(format!("{}/api/execute", srv.url()))
            .json(&json!({"program": COUNT, "input_image_ids": [img], "task": "qa"}))
            .send()
            .unwrap();
        c.get(format!("{}/api/runs/run-000001", srv.url())).send().unwrap().bytes().unwrap()
    };
    let srv = start(Some(dir.path().to_path_buf()));
    let c = Client::new();
    let again = c.get(format!("{}/api/runs/run-000001", srv.url())).send().unwrap().bytes().unwrap();
    assert_eq!(first, again);
    let img = upload(&c, &srv.url(), scene_png("qa_count"));
    let out: Value = c
        .post(format!("{}/api/execute", srv.url()))
        .json(&json!({"program": COUNT, "input_image_ids": [img], "task": "qa"}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(out["run_id"], "run-000002");
}

#[test]
fn remote_backend_matches_in_process_backend() {
    let srv = start(None);
    let data = LoadedDataset::load(&fixtures().join("datasets/tagging.json")).unwrap();
    let pool = ExamplePool::load(&fixtures().join("pools/tagging.json")).unwrap();
    let spec = PromptSpec { pool, k: 2, strategy: Strategy::Random, list_max: 20 };
    let client = ReplayClient::from_json(&std::fs::read_to_string(fixtures().join("completions.json")).unwrap()).unwrap();
    let opts = EvalOptions { seed: 2, ..Default::default() };

    let local = Interpreter::new(Arc::new(Registry::standard()), BackendMode::Procedural(None).build().unwrap());
    let remote = Interpreter::new(Arc::new(Registry::standard()), Arc::new(HttpBackend::new(&srv.url()).unwrap()));
    let a = run_eval(&data, &spec, &client, &local, &opts, None).unwrap();
    let b = run_eval(&data, &spec, &client, &remote, &opts, None).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(b.summary.tagging.unwrap().f1, 1.0);
}

#[test]
fn instruction_edit_changes_the_tagged_result() {
    let tuning = fixtures().join("tuning");
    let cfg = ServiceConfig {
        backend: BackendMode::Procedural(Some(tuning.join("knowledge.json"))),
        client: ClientMode::Replay(tuning.join("completions.json")),
        ..config(None)
    };
    let srv = spawn(router(AppState::from_config(&cfg).unwrap()), cfg.listen).unwrap();
    let url = srv.url();
    let c = Client::new();
    let text = std::fs::read_to_string(tuning.join("scene.json")).unwrap();
    let img = upload(&c, &url, Scene::from_json(&text).unwrap().render().unwrap().to_png());
    let s: Value =
        c.post(format!("{url}/api/sessions")).json(&json!({"task": "tagging", "image_ids": [img]})).send().unwrap().json().unwrap();
    let id = s["id"].as_str().unwrap();

    let mut results = Vec::new();
    for instruction in ["Tag the CEOs of IBM", "Tag the most recent CEO of IBM"] {
        let it: Value = c
            .post(format!("{url}/api/sessions/{id}/iterations"))
            .json(&json!({ "instruction": instruction }))
            .send()
            .unwrap()
            .json()
            .unwrap();
        assert_eq!(it["status"], "ok", "{it}");
        let run_id = it["run_id"].as_str().unwrap();
        let side: Value = c.get(format!("{url}/api/runs/{run_id}/rationale.json")).send().unwrap().json().unwrap();
        assert_eq!(side["cells"].as_array().unwrap().len(), 5);
        results.push((side["cells"][1]["output"]["items"].clone(), it["result"]["id"].clone()));
    }
    assert_eq!(results[0].0, json!(["Krishna", "Rometty", "Palmisano"]));
    assert_eq!(results[1].0, json!(["Krishna"]));
    assert_ne!(results[0].1, results[1].1);
    let s: Value = c.get(format!("{url}/api/sessions/{id}")).send().unwrap().json().unwrap();
    assert_eq!(s["history"].as_array().unwrap().len(), 2);
}
