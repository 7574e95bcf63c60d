//! Command-line front end. `dispatch` parses arguments, runs one
//! subcommand and returns the process exit code: 0 on success, 1 on a
//! runtime failure, 2 on a usage or configuration error.

mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{
    BenchSection, InstaFillSection, PaletteSection, PipelineSection, PixSynthSection, RunConfig, SemGanSection,
    ToyDataSection, TrainSection,
};

use crate::bench::{evaluate, format_annotations, AnnotationRecord};
use crate::nn::archive;
use crate::semmap::io::encode_map_png;
use crate::semmap::{generate_toy_scene_with, LabelPalette, ToyScene, ToySceneConfig};
use crate::{instafill, pipeline, pixsynth, seeds, semgan, Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "ganseq",
    version,
    about = "Synthetic pedestrian data from a three-stage GAN pipeline, and detection evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write toy scenes: label maps, colorized images and person boxes.
    Toydata(ToydataArgs),
    /// Train the semantic-map generator on toy scenes.
    TrainSemgan(TrainArgs),
    /// Train the person placement and silhouette networks on toy scenes.
    TrainInsert(TrainArgs),
    /// Train the map-to-image translator on colorized toy scenes.
    TrainTranslate(TrainArgs),
    /// Run the full pipeline and export an annotated dataset.
    Generate(GenerateArgs),
    /// Score detections against range-tagged ground truth.
    Evaluate(EvaluateArgs),
    /// Print checkpoint metadata or a resolved configuration.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Run configuration (TOML). Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct ToydataArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of scenes, overriding `toydata.count`.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Epochs, overriding the stage's `train.epochs`.
    #[arg(long)]
    epochs: Option<usize>,
    /// Checkpoint to write, overriding the stage's `checkpoint`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Optional per-step metrics CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Detections CSV: image_id,class_id,x,y,w,h,confidence.
    #[arg(long)]
    dets: PathBuf,
    /// Ground truth CSV: image_id,class_id,x,y,w,h,range.
    #[arg(long)]
    gt: PathBuf,
    /// IoU threshold for a true positive.
    #[arg(long, default_value_t = crate::bench::DEFAULT_IOU_THRESHOLD)]
    threshold: f64,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// Checkpoint archive to describe.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    checkpoint: Option<PathBuf>,
    /// Configuration file to print with defaults filled in.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Exit code for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Palette(_) => 2,
        _ => 1,
    }
}

pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let mut cfg = RunConfig::load(path)?;
            cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            cfg
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Writes to stdout; a reader that hung up early is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::path(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::path(path, e))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Toydata(a) => toydata(a),
        Command::TrainSemgan(a) => train_semgan(a),
        Command::TrainInsert(a) => train_insert(a),
        Command::TrainTranslate(a) => train_translate(a),
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Inspect(a) => inspect(a),
    }
}

fn toy_scene_config(cfg: &RunConfig, min_persons: usize) -> ToySceneConfig {
    ToySceneConfig {
        roles: None,
        min_persons: cfg.toydata.min_persons.max(min_persons),
        max_persons: cfg.toydata.max_persons.max(min_persons),
    }
}

/// Toy scene `i` of a named stream at `(w, h)`.
fn toy_scenes(
    cfg: &RunConfig,
    palette: &LabelPalette,
    stream: &str,
    n: usize,
    size: (usize, usize),
    min_persons: usize,
) -> Result<Vec<ToyScene>> {
    let tc = toy_scene_config(cfg, min_persons);
    (0..n)
        .map(|i| generate_toy_scene_with(seeds::derive(cfg.seed, stream, i as u64), size.0, size.1, palette, &tc))
        .collect()
}

fn toydata(a: ToydataArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let palette = cfg.palette()?;
    let n = a.count.unwrap_or(cfg.toydata.count);
    let size = (cfg.toydata.width, cfg.toydata.height);
    let scenes = toy_scenes(&cfg, &palette, "toydata", n, size, 0)?;
    let person = palette.person_id().ok_or_else(|| Error::Config("palette has no person class".into()))?;
    let mut records = Vec::new();
    for (i, s) in scenes.iter().enumerate() {
        let id = format!("scene_{i:04}");
        write_file(&a.out.join("maps").join(format!("{id}.png")), &encode_map_png(&s.map)?)?;
        let target = pixsynth::toy_target(
            &s.map,
            &palette,
            seeds::derive(cfg.seed, "toydata.target", i as u64),
            cfg.toydata.noise,
        )?;
        write_file(&a.out.join("images").join(format!("{id}.png")), &target.to_png()?)?;
        records.extend(s.persons.iter().map(|b| AnnotationRecord { image_id: id.clone(), class_id: person, bbox: *b }));
    }
    write_file(&a.out.join("annotations.csv"), format_annotations(&records).as_bytes())?;
    log::info!("wrote {n} toy scenes to {}", a.out.display());
    Ok(())
}

fn apply_train_overrides(section: &mut TrainSection, checkpoint: &mut PathBuf, a: &TrainArgs) {
    if let Some(e) = a.epochs {
        section.epochs = e;
    }
    if let Some(p) = &a.checkpoint {
        *checkpoint = p.clone();
    }
}

fn train_semgan(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&a.common)?;
    let (mut train, mut ckpt_path) = (cfg.semgan.train.clone(), cfg.semgan.checkpoint.clone());
    apply_train_overrides(&mut train, &mut ckpt_path, &a);
    cfg.semgan.train = train;
    let palette = cfg.palette()?;
    cfg.validate_palette(&palette)?;
    let r = cfg.semgan.model.resolution;
    let maps: Vec<_> = toy_scenes(&cfg, &palette, "toydata.semgan", cfg.semgan.samples, (r, r), 0)?
        .into_iter()
        .map(|s| s.map)
        .collect();
    let tc = cfg.semgan.train.to_train_config(cfg.stage_seed("semgan.train"));
    let (ckpt, report) = semgan::train(&maps, &cfg.semgan.model, &tc)?;
    let js = report.js_trace();
    log::info!("class-frequency JS divergence: start {:.4}, end {:.4}", js[0], js[js.len() - 1]);
    write_file(&ckpt_path, &ckpt.to_bytes()?)?;
    if let Some(m) = &a.metrics {
        write_file(m, report.metrics_csv().as_bytes())?;
    }
    Ok(())
}

fn train_insert(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&a.common)?;
    let (mut train, mut ckpt_path) = (cfg.instafill.train.clone(), cfg.instafill.checkpoint.clone());
    apply_train_overrides(&mut train, &mut ckpt_path, &a);
    cfg.instafill.train = train;
    let palette = cfg.palette()?;
    cfg.validate_palette(&palette)?;
    let scenes =
        toy_scenes(&cfg, &palette, "toydata.instafill", cfg.instafill.samples, cfg.instafill.model.full_size, 1)?;
    let tc = cfg.instafill.train.to_train_config(cfg.stage_seed("instafill.train"));
    let (ckpt, log) = instafill::train_insertion(&scenes, &cfg.instafill.model, &tc)?;
    write_file(&ckpt_path, &ckpt.to_bytes()?)?;
    if let Some(m) = &a.metrics {
        write_file(m, instafill::metrics_csv(&log).as_bytes())?;
    }
    Ok(())
}

fn train_translate(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&a.common)?;
    let (mut train, mut ckpt_path) = (cfg.pixsynth.train.clone(), cfg.pixsynth.checkpoint.clone());
    apply_train_overrides(&mut train, &mut ckpt_path, &a);
    cfg.pixsynth.train = train;
    let palette = cfg.palette()?;
    cfg.validate_palette(&palette)?;
    let size = cfg.pixsynth.model.operating_size;
    let scenes = toy_scenes(&cfg, &palette, "toydata.pixsynth", cfg.pixsynth.samples, size, 0)?;
    let pairs = scenes
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let seed = seeds::derive(cfg.seed, "toydata.pixsynth.target", i as u64);
            let t = pixsynth::toy_target(&s.map, &palette, seed, cfg.toydata.noise)?;
            Ok((s.map, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let tc = cfg.pixsynth.train.to_train_config(cfg.stage_seed("pixsynth.train"));
    let (ckpt, log) = pixsynth::train_translation(&pairs, &cfg.pixsynth.model, &tc)?;
    write_file(&ckpt_path, &ckpt.to_bytes()?)?;
    if let Some(m) = &a.metrics {
        write_file(m, pixsynth::metrics_csv(&log).as_bytes())?;
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let mut pc = cfg.pipeline_config();
    for p in [&pc.semgan_checkpoint, &pc.insertion_checkpoint, &pc.synth_checkpoint] {
        if !p.is_file() {
            return Err(Error::Config(format!("checkpoint {} does not exist", p.display())));
        }
    }
    if a.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    pc.parallel = a.jobs > 1;
    let run = if pc.parallel {
        let pool =
            rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build().map_err(|e| Error::Run(e.to_string()))?;
        pool.install(|| pipeline::run_generation(&pc, a.n))?
    } else {
        pipeline::run_generation(&pc, a.n)?
    };
    let summary = pipeline::export_dataset(&run, &a.out)?;
    log::info!(
        "exported {} images, {} annotations, {} failed samples to {}",
        summary.images,
        summary.annotations,
        summary.failed,
        a.out.display()
    );
    Ok(())
}

fn run_evaluate(a: EvaluateArgs) -> Result<()> {
    for p in [&a.dets, &a.gt] {
        if !p.is_file() {
            return Err(Error::Config(format!("input {} does not exist", p.display())));
        }
    }
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(Error::Config(format!("threshold {} must lie in [0, 1]", a.threshold)));
    }
    let report = evaluate(&a.dets, &a.gt, a.threshold)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    emit(&report.render_table());
    if let Some(p) = &a.json {
        write_file(p, report.to_json()?.as_bytes())?;
    }
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    if let Some(path) = &a.config {
        let cfg = RunConfig::load(path)?;
        emit(&toml::to_string_pretty(&cfg).map_err(|e| Error::Config(e.to_string()))?);
        return Ok(());
    }
    let path = a.checkpoint.expect("clap requires one of the two");
    let bytes = std::fs::read(&path).map_err(|e| Error::path(&path, e))?;
    let magic = archive::peek_magic(&bytes)
        .filter(|m| [semgan::CHECKPOINT_MAGIC, instafill::CHECKPOINT_MAGIC, pixsynth::CHECKPOINT_MAGIC].contains(m))
        .ok_or_else(|| Error::Checkpoint(format!("{} is not a known checkpoint", path.display())))?
        .to_string();
    let ar = archive::from_bytes(&magic, &bytes)?;
    let values: usize = ar.tensors.values().map(|t| t.elem_count()).sum();
    let summary = serde_json::json!({
        "magic": magic,
        "meta": ar.meta,
        "tensors": ar.tensors.len(),
        "values": values,
    });
    emit(&(serde_json::to_string_pretty(&summary)? + "\n"));
    Ok(())
}
