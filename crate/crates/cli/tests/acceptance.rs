//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. An optional argument filters
//! criteria by substring.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};
use vispipe_core::backend::{Backend, ProceduralBackend, ProceduralConfig};
use vispipe_core::dsl::{parse_program, parse_step, render_step, ArgValue};
use vispipe_core::emoji::EmojiTable;
use vispipe_core::eval::{aggregate_f1, run_eval, EvalOptions, ImageRef, LoadedDataset, Task};
use vispipe_core::expr::{eval_expr, ExprError};
use vispipe_core::generator::{vote, vote_index, ExamplePool, PromptSpec, ReplayClient, Strategy, VoteError};
use vispipe_core::image::{BBox, Image, Mask, ObjectRegion};
use vispipe_core::imageops::{bg_blur, color_pop, emoji, tag};
use vispipe_core::interpreter::{Interpreter, RunStatus};
use vispipe_core::neural::{classify_assignment, select_winners};
use vispipe_core::par::Exec;
use vispipe_core::rationale::check_structure;
use vispipe_core::registry::Registry;
use vispipe_core::scene::{color_rgba, Scene};
use vispipe_core::value::Value;
use vispipe_oracles::{assign, dsl as gen, expr as oracle, image as img_oracle, vote as vote_oracle};
use vispipe_service::{router, spawn, AppState, BackendMode, ClientMode, ServiceConfig};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn dataset(task: Task) -> LoadedDataset {
    LoadedDataset::load(&fixtures().join(format!("datasets/{task}.json"))).expect("dataset loads")
}

fn spec(task: Task, strategy: Strategy) -> PromptSpec {
    let pool = ExamplePool::load(&fixtures().join(format!("pools/{task}.json"))).expect("pool loads");
    PromptSpec { k: 2, pool, strategy, list_max: 20 }
}

fn replay() -> ReplayClient {
    ReplayClient::from_json(&std::fs::read_to_string(fixtures().join("completions.json")).unwrap()).unwrap()
}

fn interpreter() -> Interpreter {
    let be: Arc<dyn Backend> = Arc::new(ProceduralBackend::new(ProceduralConfig::default()));
    Interpreter::new(Arc::new(Registry::standard()), be)
}

fn scene_image(name: &str) -> (Scene, Image) {
    let text = std::fs::read_to_string(fixtures().join(format!("scenes/{name}.json"))).unwrap();
    let sc = Scene::from_json(&text).unwrap();
    let img = sc.render().unwrap();
    (sc, img)
}

// F1 from mean precision and recall, in percent.
fn f1_metric() -> Outcome {
    let rows = [(69.0, 59.1, 63.7), (77.6, 73.9, 75.7), (87.2, 74.9, 80.6)];
    let mut worst: f64 = 0.0;
    for (p, r, want) in rows {
        let got = aggregate_f1(&[(p / 100.0, r / 100.0)]).map_err(|e| e.to_string())?.f1 * 100.0;
        ensure!((got - want).abs() <= 0.05, "({p},{r}) gave {got:.4}, expected {want}");
        worst = worst.max((got - want).abs());
    }
    // Means over several records, checked against the closed form.
    let per = [(0.5, 1.0), (1.0, 0.25), (0.0, 0.0), (0.75, 0.5)];
    let (mp, mr) = (per.iter().map(|x| x.0).sum::<f64>() / 4.0, per.iter().map(|x| x.1).sum::<f64>() / 4.0);
    let got = aggregate_f1(&per).unwrap();
    ensure!((got.f1 - 2.0 * mp * mr / (mp + mr)).abs() < 1e-12, "multi-record F1 {got:?}");
    ensure!(aggregate_f1(&[]).is_err(), "empty set must be an error");
    Ok(format!("3 rows, max deviation {worst:.3}"))
}

fn same_arg(a: &ArgValue, l: &gen::Lit) -> bool {
    match (a, l) {
        (ArgValue::Text(x), gen::Lit::Text(y)) => x == y,
        (ArgValue::Number(x), gen::Lit::Num(y)) => x == y,
        (ArgValue::Bool(x), gen::Lit::Bool(y)) => x == y,
        (ArgValue::None, gen::Lit::None) => true,
        (ArgValue::Var(x), gen::Lit::Var(y)) => x == y,
        _ => false,
    }
}

fn parser() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..10_000 {
        let step = gen::step(&mut rng);
        let line = gen::render(&mut rng, &step);
        let parsed = parse_step(&line).map_err(|e| format!("case {i} {line:?}: {e}"))?;
        ensure!(parsed.output == step.output && parsed.module == step.module, "case {i} {line:?}: header differs");
        ensure!(parsed.args.len() == step.args.len(), "case {i} {line:?}: argument count");
        for ((n, v), (gn, gv)) in parsed.args.iter().zip(&step.args) {
            ensure!(n == gn && same_arg(v, gv), "case {i} {line:?}: {n}={v:?} vs {gn}={gv:?}");
        }
        let canon = render_step(&parsed);
        ensure!(parse_step(&canon).as_ref() == Ok(&parsed), "case {i}: canonical form {canon:?} does not reparse");
    }
    let mut rejected = 0;
    for i in 0..10_000 {
        let step = gen::step(&mut rng);
        let good = gen::render(&mut rng, &step);
        let bad = gen::malformed(&mut rng, &good);
        let r = catch_unwind(|| (parse_step(&bad), parse_program(&format!("{good}\n{bad}")).is_ok()));
        let (single, _) = r.map_err(|_| format!("case {i}: panic on {bad:?}"))?;
        if let Err(e) = single {
            rejected += 1;
            let len = bad.chars().count();
            ensure!(e.column >= 1 && e.column <= len + 1, "case {i}: column {} outside {bad:?}", e.column);
        }
    }
    Ok(format!("10000 round trips, 10000 malformed ({rejected} rejected with positions), no panics"))
}

fn agree(e: &oracle::E) -> Result<(), String> {
    let want = oracle::eval(e);
    for src in [oracle::render(e), oracle::render_full(e)] {
        let got = match eval_expr(&src) {
            Ok(Value::Number(n)) => Ok(oracle::V::Num(n)),
            Ok(Value::Boolean(b)) => Ok(oracle::V::Bool(b)),
            Ok(other) => return Err(format!("{src}: unexpected {other:?}")),
            Err(ExprError::Type(_)) => Err(oracle::Fault::Type),
            Err(ExprError::DivisionByZero) => Err(oracle::Fault::DivZero),
            Err(other) => return Err(format!("{src}: {other}")),
        };
        if got != want {
            return Err(format!("{src}: engine {got:?}, oracle {want:?}"));
        }
    }
    Ok(())
}

fn expressions() -> Outcome {
    let leaves = oracle::leaves();
    let d1 = oracle::depth1();
    let mut bad: Vec<String> = leaves.iter().chain(&d1).filter_map(|e| agree(e).err()).collect();
    let nested: Vec<(usize, Vec<String>)> = Exec::default().map(&d1, |inner| {
        let all = oracle::around(inner);
        (all.len(), all.iter().filter_map(|e| agree(e).err()).collect())
    });
    let mut total = leaves.len() + d1.len();
    for (n, b) in nested {
        total += n;
        bad.extend(b);
    }
    ensure!(total == oracle::case_count(), "enumerated {total}, expected {}", oracle::case_count());
    ensure!(bad.is_empty(), "{} of {total} disagree, first: {}", bad.len(), bad[0]);
    Ok(format!("{total} expressions, each in two spellings, 100% agreement"))
}

fn classify_select() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for case in 0..1000 {
        let rows = rng.random_range(1..9);
        let cols = rng.random_range(1..7);
        let m: Vec<Vec<f64>> =
            (0..rows).map(|_| (0..cols).map(|_| f64::from(rng.random_range(0..6u8)) / 5.0).collect()).collect();
        let tags = classify_assignment(&m, cols);
        let used: Vec<usize> = tags.iter().flatten().copied().collect();
        ensure!(used.iter().collect::<BTreeSet<_>>().len() == used.len(), "case {case}: duplicate tag {m:?}");
        ensure!(tags == assign::classify(&m, cols), "case {case}: classify differs from search on {m:?}");

        let single: Vec<Vec<f64>> = m.iter().map(|r| vec![r[0]]).collect();
        let top = assign::select(&single, 1)[0];
        let t1 = classify_assignment(&single, 1);
        ensure!(
            t1.iter().enumerate().all(|(i, t)| *t == (i == top).then_some(0)),
            "case {case}: single category not argmax on {single:?}"
        );
        let winners = select_winners(&m, cols);
        ensure!(winners.len() == cols, "case {case}: select returned {} for {cols} phrases", winners.len());
        ensure!(winners == assign::select(&m, cols), "case {case}: select differs on {m:?}");
    }
    let mut exhaustive = 0usize;
    for rows in 1..=4 {
        for cols in 1..=4 {
            let alphabet: &[f64] = if rows * cols <= 9 { &[0.0, 0.5, 1.0] } else { &[0.0, 1.0] };
            for m in assign::all_matrices(rows, cols, alphabet) {
                ensure!(classify_assignment(&m, cols) == assign::classify(&m, cols), "exhaustive: {m:?}");
                exhaustive += 1;
            }
        }
    }
    Ok(format!("1000 random matrices, {exhaustive} exhaustive matrices up to 4x4"))
}

fn rgb(name: &str) -> [u8; 3] {
    let c = color_rgba(name).unwrap();
    [c[0], c[1], c[2]]
}

fn px(img: &Image, x: u32, y: u32) -> [u8; 3] {
    let p = img.get(x, y);
    [p[0], p[1], p[2]]
}

fn check_editing(outputs: &BTreeMap<String, Image>) -> Result<(), String> {
    let (_, src) = scene_image("edit_pop");
    let got = &outputs["e1"];
    for y in 0..src.height() {
        for x in 0..src.width() {
            let (a, b) = (px(&src, x, y), px(got, x, y));
            let l = img_oracle::luma(a[0], a[1], a[2]);
            let want = if a == rgb("red") { a } else { [l, l, l] };
            ensure!(b == want, "color pop ({x},{y}): {b:?} vs {want:?}");
        }
    }
    let (_, src) = scene_image("edit_blur");
    let got = &outputs["e2"];
    let blurred = img_oracle::box_blur(src.width() as usize, src.height() as usize, src.pixels(), 5, 2);
    for y in 0..src.height() {
        for x in 0..src.width() {
            let (a, b) = (px(&src, x, y), px(got, x, y));
            if a == rgb("green") {
                ensure!(b == a, "background blur touched the square at ({x},{y})");
            } else {
                let i = (y * src.width() + x) as usize;
                for c in 0..3 {
                    ensure!((b[c] as f64 - blurred[c][i]).abs() <= 0.5 + 1e-3, "blur ({x},{y}) channel {c}");
                }
            }
        }
    }
    let (sc, src) = scene_image("edit_emoji");
    let got = &outputs["e3"];
    let jade: [f64; 4] = sc.shapes.iter().find(|s| s.name.as_deref() == Some("Jade")).unwrap().bbox.into();
    let mut changed = 0;
    for y in 0..src.height() {
        for x in 0..src.width() {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = fx >= jade[0] && fx < jade[2] && fy >= jade[1] && fy < jade[3];
            let (a, b) = (px(&src, x, y), px(got, x, y));
            if inside {
                changed += usize::from(a != b);
            } else {
                ensure!(a == b, "emoji touched ({x},{y}) outside the face");
            }
        }
    }
    ensure!(changed > 0, "emoji left the face unchanged");
    let (_, src) = scene_image("edit_replace");
    let got = &outputs["e4"];
    for y in 0..src.height() {
        for x in 0..src.width() {
            let (a, b) = (px(&src, x, y), px(got, x, y));
            let want = if a == rgb("blue") { rgb("orange") } else { a };
            ensure!(b == want, "replace ({x},{y}): {b:?} vs {want:?}");
        }
    }
    Ok(())
}

fn golden_suite() -> Outcome {
    let interp = interpreter();
    let opts = EvalOptions { seed: 7, exec: Exec::default() };
    let mut scenes = BTreeSet::new();
    let mut records = 0;
    for task in [Task::Qa, Task::Pairqa, Task::Tagging, Task::Editing] {
        let data = dataset(task);
        for r in &data.dataset.records {
            for i in &r.images {
                match i {
                    ImageRef::Path(p) => scenes.insert(p.clone()),
                    ImageRef::Inline { scene } => scenes.insert(serde_json::to_string(scene).unwrap()),
                };
            }
        }
        records += data.len();
        let out = tempfile::tempdir().unwrap();
        let report = run_eval(&data, &spec(task, Strategy::Random), &replay(), &interp, &opts, Some(out.path()))
            .map_err(|e| e.to_string())?;
        for r in &report.records {
            ensure!(r.status == RunStatus::Ok, "{task} {}: {:?}", r.id, r.error);
        }
        match task {
            Task::Qa | Task::Pairqa => {
                for r in &report.records {
                    ensure!(r.correct == Some(true), "{task} {}: {:?} vs {:?}", r.id, r.prediction, r.gold);
                }
            }
            Task::Tagging => {
                let t = report.summary.tagging.unwrap();
                let l = report.summary.localization.unwrap();
                ensure!(t.f1 == 1.0 && l.f1 == 1.0, "tagging F1 {} localization F1 {}", t.f1, l.f1);
            }
            Task::Editing => {
                let outputs: BTreeMap<String, Image> = report
                    .records
                    .iter()
                    .map(|r| {
                        let p = out.path().join(r.prediction.as_ref().unwrap());
                        (r.id.clone(), Image::decode(&std::fs::read(p).unwrap()).unwrap())
                    })
                    .collect();
                check_editing(&outputs)?;
            }
        }
    }
    ensure!(scenes.len() >= 12, "only {} scenes", scenes.len());
    Ok(format!("{records} records over {} scenes, all expected; tagging F1 1.0", scenes.len()))
}

fn voting() -> Outcome {
    let seqs = vote_oracle::sequences(&["a", "b", "c"], 5);
    ensure!(seqs.len() == 1024, "{} sequences", seqs.len());
    for s in &seqs {
        let keys: Vec<Option<String>> = s.iter().map(|a| a.map(String::from)).collect();
        let want = vote_oracle::winner(s);
        let got = vote_index(&keys).map(|i| keys[i].clone().unwrap());
        ensure!(got == want, "{s:?}: index vote {got:?}, oracle {want:?}");
        let values: Vec<Option<Value>> = s.iter().map(|a| a.map(|t| Value::text(format!(" {} ", t.to_uppercase())))).collect();
        match (vote(&values), &want) {
            (Ok(v), Some(w)) => ensure!(v == Value::text(format!(" {} ", w.to_uppercase())), "{s:?}: {v:?}"),
            (Err(VoteError::AllRunsFailed), None) => {}
            (got, want) => return Err(format!("{s:?}: {got:?} vs {want:?}")),
        }
    }
    Ok("1024 five-run sequences over 3 answers plus failure".into())
}

fn noise(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Image {
    let px: Vec<u8> = (0..w * h).flat_map(|_| [rng.random(), rng.random(), rng.random(), 255]).collect();
    Image::from_rgba(w, h, px).unwrap()
}

fn random_box(rng: &mut ChaCha8Rng, w: u32, h: u32) -> [f64; 4] {
    let x0 = rng.random_range(0..w - 2);
    let y0 = rng.random_range(0..h - 2);
    let x1 = rng.random_range(x0 + 1..=w);
    let y1 = rng.random_range(y0 + 1..=h);
    [x0 as f64, y0 as f64, x1 as f64, y1 as f64]
}

fn region(img: &Image, b: [f64; 4], label: &str) -> ObjectRegion {
    let bb = BBox::from(b);
    ObjectRegion::new(bb, 1.0).with_mask(Mask::from_box(img.width(), img.height(), &bb)).with_tag(label)
}

fn inside(b: [f64; 4], x: u32, y: u32) -> bool {
    (x as f64) >= b[0] && (x as f64) < b[2] && (y as f64) >= b[1] && (y as f64) < b[3]
}

fn image_ops() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for case in 0..100 {
        let img = noise(&mut rng, 48, 36);
        let r = vec![region(&img, random_box(&mut rng, 48, 36), "x")];
        let once = color_pop(&img, &r).unwrap();
        ensure!(color_pop(&once, &r).unwrap() == once, "color_pop not idempotent (case {case})");
    }
    for (w, h, c) in [(1, 1, [0, 0, 0, 255]), (37, 23, [90, 140, 200, 255]), (64, 64, [255, 255, 255, 255])] {
        let img = Image::new(w, h, c).unwrap();
        let r = vec![region(&img, [0.0, 0.0, 1.0, 1.0], "x")];
        for exec in [Exec::Sequential, Exec::Parallel] {
            ensure!(bg_blur(&img, &r, exec).unwrap() == img, "bg_blur moved a constant {w}x{h} image");
        }
    }
    for case in 0..100 {
        let img = noise(&mut rng, 64, 48);
        let b = random_box(&mut rng, 64, 48);
        let r = vec![region(&img, b, "ab")];
        let tagged = tag(&img, &r).unwrap();
        let stamped = emoji(&img, &r, "smiling_face", EmojiTable::builtin()).unwrap();
        for y in 0..48 {
            for x in 0..64 {
                let band = x as f64 >= b[0] && y as f64 >= b[1] - 11.0 && (y as f64) < b[1] + 11.0;
                ensure!(
                    inside(b, x, y) || band || tagged.get(x, y) == img.get(x, y),
                    "tag touched ({x},{y}) outside {b:?} (case {case})"
                );
                ensure!(
                    inside(b, x, y) || stamped.get(x, y) == img.get(x, y),
                    "emoji touched ({x},{y}) outside {b:?} (case {case})"
                );
            }
        }
    }
    let (_, img) = scene_image("edit_pop");
    let circle = region(&img, [20.0, 30.0, 60.0, 70.0], "red circle");
    let square = region(&img, [90.0, 30.0, 130.0, 70.0], "blue square");
    let both = vec![circle, square];
    let goldens = [
        ("color_pop", color_pop(&img, &both[..1]).unwrap()),
        ("bg_blur", bg_blur(&img, &both[..1], Exec::default()).unwrap()),
        ("tag", tag(&img, &both).unwrap()),
        ("emoji", emoji(&img, &both[1..], "winking_face", EmojiTable::builtin()).unwrap()),
    ];
    for (name, got) in &goldens {
        let path = fixtures().join(format!("golden/{name}.png"));
        let want = Image::decode(&std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?).unwrap();
        ensure!(want == *got, "{name} differs from its golden PNG");
    }
    Ok("idempotence, fixed point and locality on 100 cases each, 4 goldens".into())
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let mut files = 0;
    for task in [Task::Qa, Task::Pairqa, Task::Tagging, Task::Editing] {
        let data = dataset(task);
        let s = spec(task, Strategy::Random);
        let mut trees = Vec::new();
        for _ in 0..3 {
            let dir = tempfile::tempdir().unwrap();
            run_eval(&data, &s, &replay(), &interpreter(), &EvalOptions { seed: 9, exec: Exec::Parallel }, Some(dir.path()))
                .map_err(|e| e.to_string())?;
            trees.push(tree(dir.path()));
        }
        ensure!(trees[0].contains_key("report.json"), "{task}: no report written");
        ensure!(trees[0].keys().filter(|k| k.ends_with(".html")).count() == data.len(), "{task}: rationale count");
        for t in &trees[1..] {
            ensure!(
                *t == trees[0],
                "{task}: outputs differ in {:?}",
                trees[0].iter().find(|(k, v)| t.get(*k) != Some(v)).map(|(k, _)| k)
            );
        }
        files += trees[0].len();
    }
    Ok(format!("3 runs x 4 tasks, {files} files byte-identical"))
}

fn service() -> Outcome {
    let store = tempfile::tempdir().unwrap();
    let cfg = ServiceConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
        pools: fixtures().join("pools"),
        backend: BackendMode::Procedural(None),
        client: ClientMode::Replay(fixtures().join("completions.json")),
        store: Some(store.path().to_path_buf()),
        k: 2,
        list_max: 20,
    };
    let http = reqwest::blocking::Client::new();
    let e = |e: reqwest::Error| e.to_string();
    let (run_id, first) = {
        let srv = spawn(router(AppState::from_config(&cfg).map_err(|e| e.to_string())?), cfg.listen).map_err(|e| e.to_string())?;
        let url = srv.url();
        let (_, img) = scene_image("qa_count");
        let up: Json = http.post(format!("{url}/api/images")).body(img.to_png()).send().map_err(e)?.json().map_err(e)?;
        let image_id = up["image_id"].as_str().ok_or("no image id")?.to_string();

        let g: Json = http
            .post(format!("{url}/api/generate"))
            .json(&json!({"instruction": "How many red circles are there?", "task": "qa", "strategy": "random", "k": 2, "seed": 1}))
            .send()
            .map_err(e)?
            .json()
            .map_err(e)?;
        let program = g["program"].as_str().ok_or(format!("generate failed: {g}"))?;

        let x: Json = http
            .post(format!("{url}/api/execute"))
            .json(&json!({"program": program, "input_image_ids": [image_id], "task": "qa"}))
            .send()
            .map_err(e)?
            .json()
            .map_err(e)?;
        ensure!(x["status"] == "ok" && x["result"]["value"] == 3.0, "execute returned {x}");
        let run_id = x["run_id"].as_str().unwrap().to_string();

        let a = http.get(format!("{url}/api/runs/{run_id}")).send().map_err(e)?.bytes().map_err(e)?;
        let b = http.get(format!("{url}/api/runs/{run_id}")).send().map_err(e)?.bytes().map_err(e)?;
        ensure!(a == b, "run record changed between fetches");
        let html = http.get(format!("{url}/api/runs/{run_id}/rationale")).send().map_err(e)?.text().map_err(e)?;
        let cells = check_structure(&html)?;
        ensure!(cells == 3, "rationale has {cells} cells");
        (run_id, a)
    };
    let srv = spawn(router(AppState::from_config(&cfg).map_err(|e| e.to_string())?), cfg.listen).map_err(|e| e.to_string())?;
    let again = http.get(format!("{}/api/runs/{run_id}", srv.url())).send().map_err(e)?.bytes().map_err(e)?;
    ensure!(again == first, "run record changed across a restart");
    Ok(format!("upload, generate, execute, rationale; {run_id} identical on re-fetch and after restart"))
}

struct Check {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let checks = [
        Check { name: "f1-metric", limit: Some(Duration::from_secs(1)), run: f1_metric },
        Check { name: "parser", limit: Some(Duration::from_secs(30)), run: parser },
        Check { name: "expression-oracle", limit: Some(Duration::from_secs(120)), run: expressions },
        Check { name: "classify-select", limit: None, run: classify_select },
        Check { name: "golden-suite", limit: Some(Duration::from_secs(60)), run: golden_suite },
        Check { name: "voting", limit: None, run: voting },
        Check { name: "image-ops", limit: None, run: image_ops },
        Check { name: "determinism", limit: None, run: determinism },
        Check { name: "service-round-trip", limit: None, run: service },
    ];
    let mut failed = 0;
    for c in checks.iter().filter(|c| filter.as_deref().is_none_or(|f| c.name.contains(f))) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or("panic".into()))
        });
        let took = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if took > limit => Err(format!("took {took:.2?}, limit {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS  {:<20} {detail} ({took:.2?})", c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<20} {why} ({took:.2?})", c.name);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
