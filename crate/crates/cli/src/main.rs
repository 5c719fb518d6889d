use std::io::Read;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use vispipe_core::backend::{Backend, RecordingBackend};
use vispipe_core::dsl::{parse_program, validate};
use vispipe_core::eval::{run_eval, stratified_sample, EvalOptions, LoadedDataset, Task};
use vispipe_core::generator::{ExamplePool, PromptSpec, Strategy};
use vispipe_core::image::Image;
use vispipe_core::interpreter::{Interpreter, RunStatus};
use vispipe_core::par::Exec;
use vispipe_core::rationale::{render_rationale, sidecar_json};
use vispipe_core::registry::Registry;
use vispipe_core::scene::Scene;
use vispipe_core::value::{ImageStore, Value, ValueRepr};
use vispipe_service::{BackendMode, ClientMode, ServiceConfig};

#[derive(Parser)]
#[command(name = "vispipe", version, about = "Generate, run and evaluate step-sequence visual programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Random,
    Curated,
    Voting,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate and execute a program per dataset record and score the results.
    Eval {
        #[arg(long)]
        task: Task,
        #[arg(long)]
        dataset: PathBuf,
        /// Example pool; defaults to pools/<task>.json beside the dataset's parent directory.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "random")]
        strategy: StrategyArg,
        /// Example ids for the curated strategy, comma separated.
        #[arg(long, value_delimiter = ',')]
        ids: Vec<u32>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Programs per record when voting.
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// procedural[:CONFIG], fixtures:FILE or remote:URL
        #[arg(long, default_value = "procedural")]
        backend: BackendMode,
        /// replay:FILE, scripted:FILE or remote
        #[arg(long)]
        client: ClientMode,
        /// Keep at most this many records per question type.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 20)]
        list_max: u32,
        /// Run records one after another.
        #[arg(long)]
        sequential: bool,
        /// Save every backend exchange as a fixture file.
        #[arg(long)]
        record_fixtures: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        /// JSON config file; the flags below are ignored when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, default_value = "pools")]
        pools: PathBuf,
        #[arg(long, default_value = "procedural")]
        backend: BackendMode,
        #[arg(long)]
        client: Option<ClientMode>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Execute a program file on images (PNG, JPEG or scene JSON).
    Run {
        #[arg(long)]
        program: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        image: Vec<PathBuf>,
        #[arg(long, default_value = "qa")]
        task: Task,
        #[arg(long, default_value = "procedural")]
        backend: BackendMode,
        /// Write the rationale HTML (and a .json sidecar) here.
        #[arg(long)]
        rationale: Option<PathBuf>,
        /// Write an image result here as PNG.
        #[arg(long)]
        save_image: Option<PathBuf>,
    },
    /// Parse and validate a program; prints its canonical form.
    Validate {
        /// Program file; reads stdin when omitted.
        file: Option<PathBuf>,
        #[arg(long, default_value = "qa")]
        task: Task,
    },
    /// Print the content id of each image file.
    ImageId {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn load_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let scene = Scene::from_json(&String::from_utf8_lossy(&bytes))?;
        scene.render().map_err(anyhow::Error::msg)
    } else {
        Ok(Image::decode(&bytes).with_context(|| format!("decoding {}", path.display()))?)
    }
}

fn read_source(file: Option<&Path>) -> Result<String> {
    match file {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn eval(
    task: Task,
    dataset: &Path,
    pool: Option<PathBuf>,
    strategy: Strategy,
    k: usize,
    seed: u64,
    backend: &BackendMode,
    client: &ClientMode,
    sample: Option<usize>,
    list_max: u32,
    exec: Exec,
    record: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    let mut data = LoadedDataset::load(dataset)?;
    if data.task() != task {
        bail!("dataset {} is for task {}, not {task}", dataset.display(), data.task());
    }
    if let Some(n) = sample {
        data = data.subset(&stratified_sample(&data.dataset.records, n, seed));
    }
    let pool_path = pool.unwrap_or_else(|| {
        let base = dataset.parent().and_then(Path::parent).unwrap_or(Path::new("."));
        base.join("pools").join(format!("{task}.json"))
    });
    let pool = ExamplePool::load(&pool_path).with_context(|| format!("loading pool {}", pool_path.display()))?;
    pool.check()?;
    let spec = PromptSpec { pool, k, strategy, list_max };
    let client = client.build()?;
    let base = backend.build()?;
    let recorder = record.as_ref().map(|_| Arc::new(RecordingBackend::new(base.clone())));
    let be: Arc<dyn Backend> = match &recorder {
        Some(r) => r.clone(),
        None => base,
    };
    let interp = Interpreter::new(Arc::new(Registry::standard()), be);
    std::fs::create_dir_all(out)?;
    let report = run_eval(&data, &spec, client.as_ref(), &interp, &EvalOptions { seed, exec }, Some(out))?;
    if let (Some(path), Some(r)) = (record, recorder) {
        std::fs::write(&path, serde_json::to_string_pretty(&r.fixtures())?)?;
    }
    let s = &report.summary;
    println!("records {}  ok {}  failed {}", s.records, s.ok, s.failed);
    if let Some(a) = s.accuracy {
        println!("accuracy {:.4}", a);
    }
    for (name, f) in [("localization", s.localization), ("tagging", s.tagging)] {
        if let Some(f) = f {
            println!("{name} precision {:.4} recall {:.4} f1 {:.4}", f.avg_precision, f.avg_recall, f.f1);
        }
    }
    println!("report written to {}", out.join("report.json").display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Eval {
            task,
            dataset,
            pool,
            strategy,
            ids,
            k,
            runs,
            seed,
            backend,
            client,
            sample,
            list_max,
            sequential,
            record_fixtures,
            out,
        } => {
            let strategy = match strategy {
                StrategyArg::Random => Strategy::Random,
                StrategyArg::Curated => Strategy::Curated { ids },
                StrategyArg::Voting => Strategy::Voting { runs },
            };
            let exec = if sequential { Exec::Sequential } else { Exec::default() };
            eval(task, &dataset, pool, strategy, k, seed, &backend, &client, sample, list_max, exec, record_fixtures, &out)
        }
        Cmd::Serve { config, listen, pools, backend, client, store } => {
            let cfg = match config {
                Some(p) => ServiceConfig::load(&p)?,
                None => ServiceConfig {
                    listen,
                    pools,
                    backend,
                    client: client.context("--client is required without --config")?,
                    store,
                    k: 2,
                    list_max: 20,
                },
            };
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            eprintln!("listening on http://{}", cfg.listen);
            rt.block_on(vispipe_service::serve(&cfg))?;
            Ok(())
        }
        Cmd::Run { program, image, task, backend, rationale, save_image } => {
            let src = read_source(Some(&program))?;
            let prog = parse_program(&src)?;
            let names = task.input_names();
            let report = validate(&prog, &Registry::standard(), names.iter().copied());
            if !report.is_ok() {
                bail!("invalid program: {report}");
            }
            if image.len() != names.len() {
                bail!("task {task} takes {} images, got {}", names.len(), image.len());
            }
            let inputs = names
                .iter()
                .zip(&image)
                .map(|(n, p)| Ok((n.to_string(), Value::Image(Arc::new(load_image(p)?)))))
                .collect::<Result<Vec<_>>>()?;
            let interp = Interpreter::new(Arc::new(Registry::standard()), backend.build()?);
            let run = interp.execute("run-000001", &prog, &inputs);
            for t in &run.traces {
                let status = match &t.error {
                    Some(e) => format!("error {}: {}", e.kind, e.message),
                    None => "ok".into(),
                };
                println!("{:>3}  {:<60} {}", t.index, t.step_text, status);
            }
            if let Some(p) = rationale {
                std::fs::write(&p, render_rationale(&run))?;
                std::fs::write(p.with_extension("json"), sidecar_json(&run))?;
            }
            match &run.result {
                Some(Value::Image(img)) => {
                    if let Some(p) = save_image {
                        std::fs::write(&p, img.to_png())?;
                        println!("result image written to {}", p.display());
                    } else {
                        println!("result: image {}x{} {}", img.width(), img.height(), img.id());
                    }
                }
                Some(v) => println!("result: {}", serde_json::to_string(&ValueRepr::encode(v, &mut ImageStore::new()))?),
                None => {}
            }
            if run.status == RunStatus::Failed {
                std::process::exit(1);
            }
            Ok(())
        }
        Cmd::Validate { file, task } => {
            let src = read_source(file.as_deref())?;
            let prog = parse_program(&src)?;
            print!("{}", prog.render());
            println!();
            let report = validate(&prog, &Registry::standard(), task.input_names().iter().copied());
            if !report.is_ok() {
                for i in &report.issues {
                    eprintln!("step {}: {}", i.step, i.kind);
                }
                std::process::exit(1);
            }
            Ok(())
        }
        Cmd::ImageId { files } => {
            for f in files {
                println!("{}  {}", load_image(&f)?.id(), f.display());
            }
            Ok(())
        }
    }
}
