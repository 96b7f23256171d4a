use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use gest_core::graph::{export_dot as render_dot, reduce_next_edges, GestGraph};
use gest_core::ingest::{parse_video_record, ParseOptions};
use gest_core::llm::{build_description_prompt, complete, CompletionMode};
use gest_core::metrics::{align, evaluate_corpus, parse_candidates, parse_references};
use gest_core::pipeline::{build_graph_forced, build_graph_from_frames, proto_for_graph};
use serde::Serialize;

use crate::settings::{self, RunConfig};
use crate::ConfigArgs;

#[derive(Args)]
pub struct BuildGraphArgs {
    /// Detection stream (NDJSON); repeat for several videos
    #[arg(long = "detections", required = true)]
    pub detections: Vec<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory; with several inputs each video gets a subdirectory named after its file stem
    #[arg(long)]
    pub out: PathBuf,
    /// Fail on unknown fields and malformed lines instead of skipping them
    #[arg(long)]
    pub strict: bool,
    /// Build the graph even when validation reports errors
    #[arg(long)]
    pub force: bool,
    /// Videos processed in parallel
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args)]
pub struct DescribeArgs {
    /// Graph dump written by build-graph
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory for proto.txt, proto.json, prompt.json and description.txt
    #[arg(long)]
    pub out: PathBuf,
    /// Stop after writing the proto-language
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args)]
pub struct EvalArgs {
    /// JSONL lines of {"video_id", "text"}
    #[arg(long)]
    pub candidates: PathBuf,
    /// JSONL lines of {"video_id", "references": [..], "group"?}
    #[arg(long)]
    pub references: PathBuf,
    /// Output directory for report.json and report.txt
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ExportDotArgs {
    /// Graph dump written by build-graph
    #[arg(long)]
    pub graph: PathBuf,
    /// DOT file to write; parent directories are created
    #[arg(long)]
    pub out: PathBuf,
    /// Drop `next` edges implied by longer `next` chains
    #[arg(long)]
    pub reduce_next: bool,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub video_id: String,
    pub inputs: Vec<PathBuf>,
    pub config_hash: String,
    pub config: gest_core::PipelineConfig,
    pub stage_timings_ms: BTreeMap<&'static str, f64>,
    pub outputs: Vec<PathBuf>,
    pub parse_warnings: usize,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

fn build_one(input: &Path, out: &Path, cfg: &RunConfig, strict: bool, force: bool) -> Result<()> {
    let mut timings = BTreeMap::new();
    let t = Instant::now();
    let parsed = parse_video_record(open(input)?, ParseOptions { strict })
        .with_context(|| format!("cannot parse {}", input.display()))?;
    for w in &parsed.warnings {
        log::warn!("{}: {w}", input.display());
    }
    timings.insert("ingest", ms(t));

    let t = Instant::now();
    let build = if force { build_graph_forced } else { build_graph_from_frames };
    let graph = build(&parsed.meta, &parsed.frames, &cfg.pipeline)
        .with_context(|| format!("cannot build graph for {}", input.display()))?;
    timings.insert("pipeline", ms(t));

    let graph_path = out.join("graph.json");
    ensure_dir(out)?;
    let t = Instant::now();
    let dot_path = out.join("graph.dot");
    write(&graph_path, &graph.to_json())?;
    write(&dot_path, &render_dot(&graph))?;
    timings.insert("export", ms(t));

    let manifest_path = out.join("manifest.json");
    let manifest = RunManifest {
        tool: "gest",
        version: env!("CARGO_PKG_VERSION"),
        video_id: parsed.meta.video_id.clone(),
        inputs: vec![input.to_path_buf()],
        config_hash: cfg.pipeline.hash_hex(),
        config: cfg.pipeline.clone(),
        stage_timings_ms: timings,
        outputs: vec![graph_path, dot_path, manifest_path.clone()],
        parse_warnings: parsed.warnings.len(),
    };
    write(&manifest_path, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    log::info!("{}: {} events, {} edges", parsed.meta.video_id, graph.nodes.len(), graph.edges.len());
    Ok(())
}

/// Output directory for the i-th input: `out` itself for a single input,
/// otherwise a subdirectory named after the file stem.
fn out_dir_for(out: &Path, inputs: &[PathBuf], input: &Path) -> PathBuf {
    if inputs.len() == 1 {
        return out.to_path_buf();
    }
    let stem = input.file_stem().map_or_else(|| "video".into(), |s| s.to_string_lossy().into_owned());
    out.join(stem)
}

pub fn build_graph(args: BuildGraphArgs) -> Result<()> {
    let cfg = settings::load_or_fail(args.config.config.as_ref(), &args.config.overrides)?;
    for d in &args.detections {
        if !d.is_file() {
            bail!("detections file {} does not exist", d.display());
        }
    }
    let mut stems = std::collections::HashSet::new();
    for d in &args.detections {
        if !stems.insert(out_dir_for(&args.out, &args.detections, d)) {
            bail!("two inputs share the file name {}; outputs would collide", d.display());
        }
    }

    let next = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    let workers = args.jobs.clamp(1, args.detections.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(input) = args.detections.get(i) else { break };
                let out = out_dir_for(&args.out, &args.detections, input);
                if let Err(e) = build_one(input, &out, &cfg, args.strict, args.force) {
                    failures.lock().unwrap().push((i, e));
                }
            });
        }
    });
    let mut failures = failures.into_inner().unwrap();
    failures.sort_by_key(|(i, _)| *i);
    match failures.len() {
        0 => Ok(()),
        1 => Err(failures.pop().unwrap().1),
        n => {
            for (_, e) in &failures {
                eprintln!("error: {e:#}");
            }
            Err(anyhow!("{n} of {} inputs failed", args.detections.len()))
        }
    }
}

fn load_graph(path: &Path) -> Result<GestGraph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read graph {}", path.display()))?;
    GestGraph::from_json(&text).with_context(|| format!("invalid graph dump {}", path.display()))
}

pub fn describe(args: DescribeArgs) -> Result<()> {
    let cfg = settings::load_or_fail(args.config.config.as_ref(), &args.config.overrides)?;
    if !args.dry_run {
        cfg.llm.validate().map_err(|e| anyhow!(e).context(settings::ConfigFailure))?;
    }
    let graph = load_graph(&args.graph)?;
    let proto = proto_for_graph(&graph);
    ensure_dir(&args.out)?;
    write(&args.out.join("proto.txt"), &proto.to_text())?;
    write(&args.out.join("proto.json"), &proto.sidecar_json())?;
    if args.dry_run {
        return Ok(());
    }

    let prompt = build_description_prompt(&proto)?;
    write(&args.out.join("prompt.json"), &(serde_json::to_string_pretty(&prompt)? + "\n"))?;
    if cfg.llm.mode == CompletionMode::Live {
        log::info!("requesting description from {}", cfg.llm.endpoint_url);
    }
    let text = complete(&cfg.llm, &prompt).context("description request failed; proto-language was kept")?;
    let mut text = text.trim().to_string();
    text.push('\n');
    write(&args.out.join("description.txt"), &text)
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let candidates = parse_candidates(open(&args.candidates)?)
        .with_context(|| format!("cannot read candidates {}", args.candidates.display()))?;
    let references = parse_references(open(&args.references)?)
        .with_context(|| format!("cannot read references {}", args.references.display()))?;
    let pairs = align(candidates, references)?;
    let report = evaluate_corpus(&pairs);
    ensure_dir(&args.out)?;
    write(&args.out.join("report.json"), &report.to_json())?;
    let table = report.to_text();
    write(&args.out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn export_dot(args: ExportDotArgs) -> Result<()> {
    let mut graph = load_graph(&args.graph)?;
    if args.reduce_next {
        graph.edges = reduce_next_edges(&graph.edges);
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write(&args.out, &render_dot(&graph))
}
