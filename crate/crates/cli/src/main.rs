use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use virtfusion_core::assetio::{read_scene_ply, LabelMap, SceneFile};
use virtfusion_core::composer::{validate_scene, ComposerConfig, SceneTemplate};
use virtfusion_core::dragplan::{plan_drag, serialize_plan, DragConfig};
use virtfusion_core::objectpool::class_stats;
use virtfusion_core::promptgen::{collect_prompts, ChatClient, FixtureChatClient, MockChatClient, PromptKind, PromptOptions, PromptTemplate};
use virtfusion_core::rng::seeded;
use virtfusion_pipeline::image::decode_mask;
use virtfusion_pipeline::run::{compose_scenes, load_pool};
use virtfusion_pipeline::{run_full, Counts, PipelineConfig, Runner};

#[derive(Parser)]
#[command(name = "virtfusion", version, about = "Synthetic labeled 3D scene generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full generation runs driven by a config file.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
    /// Object pool construction.
    #[command(subcommand)]
    Pool(PoolCmd),
    /// Scene composition and checking.
    #[command(subcommand)]
    Scene(SceneCmd),
    /// Per-class point statistics over scene files.
    Stats(StatsArgs),
    /// Collect generation prompts for a class.
    Prompts(PromptsArgs),
    /// Drag instruction planning.
    #[command(subcommand)]
    Drag(DragCmd),
}

#[derive(Subcommand)]
enum PipelineCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum PoolCmd {
    /// Generate N·M·P assets per class with the mock (or configured) services.
    Build(PoolBuildArgs),
}

#[derive(Args)]
struct PoolBuildArgs {
    /// Comma-separated class names from the label map.
    #[arg(long, value_delimiter = ',', required = true)]
    classes: Vec<String>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    m: usize,
    #[arg(long, default_value_t = 5)]
    p: usize,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to `./cache`; `VIRTFUSION_CACHE` overrides.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Subcommand)]
enum SceneCmd {
    Generate(GenerateArgs),
    Validate(ValidateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Pool directory holding `manifest.json`.
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 9)]
    k: usize,
    #[arg(long, default_value_t = 200_000)]
    tau: usize,
    #[arg(long, default_value_t = 1.5)]
    pitch: f64,
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
    #[arg(long, default_value_t = 0.05)]
    shift_step: f64,
    /// Defaults to twice the pitch.
    #[arg(long)]
    max_shift: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    floor: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, default_value_t = 200_000)]
    tau: usize,
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Also write a bar chart.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct PromptsArgs {
    #[arg(long)]
    kind: PromptKind,
    #[arg(long)]
    class: String,
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Canned chat replies; without it a built-in offline generator answers.
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Leave out the "centered, clean background, no occlusion" suffix.
    #[arg(long)]
    no_qualifiers: bool,
}

#[derive(Subcommand)]
enum DragCmd {
    Plan(DragPlanArgs),
}

#[derive(Args)]
struct DragPlanArgs {
    /// PNG mask; white (gray) or non-backdrop (RGB) pixels are the object.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, default_value_t = 40.0)]
    mu: f64,
    #[arg(long, default_value_t = 10.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    handles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Recorded in the plan; defaults to the mask path.
    #[arg(long)]
    image_ref: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Pipeline(PipelineCmd::Run { config }) => pipeline_run(&config),
        Command::Pool(PoolCmd::Build(a)) => pool_build(a),
        Command::Scene(SceneCmd::Generate(a)) => scene_generate(a),
        Command::Scene(SceneCmd::Validate(a)) => scene_validate(a),
        Command::Stats(a) => stats(a),
        Command::Prompts(a) => prompts(a),
        Command::Drag(DragCmd::Plan(a)) => drag_plan(a),
    }
}

fn run(cfg: PipelineConfig) -> Result<()> {
    let runner = Runner::new(cfg)?;
    let summary = run_full(&runner)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    for f in &summary.failures {
        eprintln!("warning: {} {} [{}]: {} ({} assets lost)", f.class, f.stage, f.branch, f.message, f.lost_assets);
    }
    Ok(())
}

fn pipeline_run(config: &Path) -> Result<()> {
    run(PipelineConfig::load(config)?)
}

fn pool_build(a: PoolBuildArgs) -> Result<()> {
    let mut cfg = PipelineConfig {
        classes: a.classes,
        counts: Counts { n: a.n, m: a.m, p: a.p },
        cache_dir: a.cache.unwrap_or_else(|| PathBuf::from("cache")),
        out_dir: a.out,
        seed: a.seed,
        workers: a.workers,
        ..PipelineConfig::default()
    };
    if let Some(p) = a.points {
        cfg.points_per_object = p;
    }
    cfg.apply_env();
    run(cfg)
}

fn scene_generate(a: GenerateArgs) -> Result<()> {
    let template = SceneTemplate::for_k(a.k, a.pitch)?;
    let cfg = ComposerConfig {
        k: a.k,
        tau: a.tau,
        margin: a.margin,
        shift_step: a.shift_step,
        max_shift: a.max_shift.unwrap_or(2.0 * a.pitch),
        seed: a.seed,
        floor: a.floor,
        ..ComposerConfig::default()
    };
    cfg.check(&template)?;
    let pool = load_pool(&a.pool, Some(&LabelMap::scannet20()))?;
    let scenes = compose_scenes(&pool, &template, &cfg, a.count, &a.out)?;
    println!("wrote {} scenes to {}", scenes.len(), a.out.display());
    Ok(())
}

fn read_scene(path: &Path) -> Result<SceneFile> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_scene_ply(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn scene_validate(a: ValidateArgs) -> Result<()> {
    let mut bad = 0;
    for f in &a.files {
        let scene = read_scene(f)?;
        let cfg = ComposerConfig {
            tau: a.tau,
            ..ComposerConfig::default()
        };
        let report = validate_scene(&scene, &cfg, a.margin);
        if report.is_ok() {
            println!("{}: ok", f.display());
        } else {
            bad += 1;
            println!("{}: {}", f.display(), serde_json::to_string(&report.violations)?);
        }
    }
    if bad > 0 {
        bail!("{bad} of {} scenes have violations", a.files.len());
    }
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let scenes = a.files.iter().map(|f| read_scene(f)).collect::<Result<Vec<_>>>()?;
    let stats = class_stats(&scenes).with_names(&LabelMap::scannet20());
    println!("{}", serde_json::to_string_pretty(&stats)?);
    if let Some(svg) = a.svg {
        std::fs::write(&svg, stats.to_svg()).with_context(|| format!("writing {}", svg.display()))?;
    }
    Ok(())
}

fn prompts(a: PromptsArgs) -> Result<()> {
    let client: Box<dyn ChatClient> = match &a.fixture {
        Some(p) => Box::new(FixtureChatClient::from_path(p, a.kind, &a.class)?),
        None => Box::new(MockChatClient),
    };
    let opts = if a.no_qualifiers {
        PromptOptions { qualifiers: vec![] }
    } else {
        PromptOptions::default()
    };
    let set = collect_prompts(client.as_ref(), &PromptTemplate::default_for(a.kind), &a.class, a.n, &opts)?;
    if set.achieved() < a.n {
        eprintln!("warning: only {} of {} prompts after {} calls", set.achieved(), a.n, set.calls);
    }
    println!("{}", serde_json::to_string_pretty(&set)?);
    Ok(())
}

fn drag_plan(a: DragPlanArgs) -> Result<()> {
    let bytes = std::fs::read(&a.mask).with_context(|| format!("reading {}", a.mask.display()))?;
    let mask = decode_mask(&bytes)?;
    let cfg = DragConfig {
        mu: a.mu,
        sigma: a.sigma,
        n_handles: a.handles,
        seed: a.seed,
    };
    let image_ref = a.image_ref.unwrap_or_else(|| a.mask.display().to_string());
    let plan = plan_drag(&mask, &cfg, &image_ref, &mut seeded(a.seed))?;
    let json = serialize_plan(&plan);
    match a.out {
        Some(p) => std::fs::write(&p, &json).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{}", String::from_utf8(json)?),
    }
    Ok(())
}
