//! Command-line workflows: `simulate`, `train`, `despeckle` and `eval`.
//!
//! Every command writes its fully resolved configuration next to its outputs; passing
//! that file back through `--config` reproduces the run.

mod checkpoint;
mod config;
mod image_io;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use image::imageops::{self, FilterType};
use image::{ImageBuffer, Luma};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use checkpoint::{Checkpoint, Manifest, TensorEntry, FORMAT_VERSION, MAGIC};
pub use config::{NamedRegion, RunConfig, RESOLVED_CONFIG_FILE};
pub use image_io::{expand_inputs, list_images, load_image, save_image};

use crate::cyclespin::{despeckle_batch, CycleSpinPlan};
use crate::diffusion::{ScheduleParams, Trainer};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{enl, psnr, ssim};
use crate::predictor::{Predictor, PredictorConfig};
use crate::rng::derive_seed;
use crate::scene::synthetic_scene;
use crate::speckle::{make_dataset, ImagePair};

pub const DATASET_MANIFEST: &str = "manifest.json";
pub const LOSS_LOG: &str = "loss.jsonl";
pub const FINAL_CHECKPOINT: &str = "model.sdck";
pub const EVAL_REPORT: &str = "report.jsonl";

const SCENE_STREAM: u64 = 1;
const PATCH_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;
const DESPECKLE_STREAM: u64 = 4;

#[derive(Parser, Debug)]
#[command(name = "sardiff", version, about = "Diffusion-based SAR despeckling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate clean/speckled training pairs.
    Simulate(SimulateArgs),
    /// Train the conditional noise predictor.
    Train(TrainArgs),
    /// Despeckle images with a trained checkpoint and cycle spinning.
    Despeckle(DespeckleArgs),
    /// Score despeckled images against references.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Clean source images (file or directory); synthetic scenes if omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    looks: Option<f64>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    /// Number of synthetic scenes when no input is given.
    #[arg(long)]
    scenes: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Architecture preset: desk, toy or tiny.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Number of diffusion steps.
    #[arg(long = "T")]
    t: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Args, Debug)]
struct DespeckleArgs {
    #[command(flatten)]
    common: Common,
    /// Speckled image file or directory.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Cycle-spin shifts as `u1,v1;u2,v2;...`.
    #[arg(long)]
    shifts: Option<String>,
    /// Resample inputs to the predictor's native size and back.
    #[arg(long)]
    resize: bool,
    /// Plain ancestral sampling without clipping the clean-image estimate.
    #[arg(long)]
    no_clip: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Images to score (file or directory).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Reference images (file or directory, matched by file name).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// ENL region `name:top,left,height,width`; repeatable.
    #[arg(long)]
    region: Vec<String>,
}

/// Parses `argv` (including the program name), runs the command and returns the
/// process exit status: 0 on success, 2 for usage errors, 1 otherwise.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => {
            let cfg = resolve_simulate(&args)?;
            simulate(&cfg)
        }
        Command::Train(args) => {
            let cfg = resolve_train(&args)?;
            train(&cfg).map(|_| ())
        }
        Command::Despeckle(args) => {
            let cfg = resolve_despeckle(&args)?;
            despeckle(&cfg)
        }
        Command::Eval(args) => {
            let cfg = resolve_eval(&args)?;
            evaluate(&cfg)
        }
    }
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn apply_data(cfg: &mut RunConfig, data: &DataArgs) {
    if let Some(v) = &data.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = data.looks {
        cfg.looks = v;
    }
    if let Some(v) = data.patch {
        cfg.patch = v;
    }
    if let Some(v) = data.count {
        cfg.count = v;
    }
    if let Some(v) = data.scenes {
        cfg.scenes = v;
    }
}

fn resolve_simulate(args: &SimulateArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common)?;
    apply_data(&mut cfg, &args.data);
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_train(args: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common)?;
    apply_data(&mut cfg, &args.data);
    if let Some(dir) = &args.data_dir {
        cfg.data = Some(dir.clone());
    }
    if let Some(name) = &args.preset {
        cfg.predictor = match name.as_str() {
            "desk" => PredictorConfig::desk(),
            "toy" => PredictorConfig::toy(),
            "tiny" => PredictorConfig::tiny(),
            other => return Err(Error::Usage(format!("unknown preset `{other}` (expected desk, toy or tiny)"))),
        };
    }
    if let Some(v) = args.steps {
        cfg.train.iterations = v;
    }
    if let Some(v) = args.batch {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.lr {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = args.t {
        cfg.train.schedule = ScheduleParams::scaled_linear(v);
    }
    if let Some(v) = args.checkpoint_every {
        cfg.train.checkpoint_interval = v;
    }
    cfg.train.seed = cfg.seed;
    if let Some(dir) = &cfg.data {
        cfg.patch = read_dataset_manifest(dir)?.patch;
    }
    cfg.predictor = cfg.predictor.with_input_size(cfg.patch)?;
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_despeckle(args: &DespeckleArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common)?;
    if let Some(v) = &args.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = &args.checkpoint {
        cfg.checkpoint = Some(v.clone());
    }
    if let Some(v) = &args.shifts {
        cfg.shifts = CycleSpinPlan::parse(v)?;
    }
    cfg.resize |= args.resize;
    if args.no_clip {
        cfg.sampler.clip_denoised = false;
    }
    if cfg.checkpoint.is_none() {
        return Err(Error::Usage("despeckle requires --checkpoint".into()));
    }
    if cfg.input.is_none() {
        return Err(Error::Usage("despeckle requires --input".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_eval(args: &EvalArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common)?;
    if let Some(v) = &args.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = &args.reference {
        cfg.reference = Some(v.clone());
    }
    if !args.region.is_empty() {
        cfg.regions = args.region.iter().map(|r| NamedRegion::parse(r)).collect::<Result<_>>()?;
    }
    if cfg.input.is_none() || cfg.reference.is_none() {
        return Err(Error::Usage("eval requires --input and --reference".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir()?.to_path_buf();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    cfg.write_resolved(&dir)?;
    Ok(dir)
}

/// Source images for dataset generation: the configured input, or synthetic scenes.
pub fn source_images(cfg: &RunConfig) -> Result<Vec<Image>> {
    match &cfg.input {
        Some(path) => expand_inputs(path)?.iter().map(load_image).collect(),
        None => {
            let base = derive_seed(cfg.seed, SCENE_STREAM);
            Ok((0..cfg.scenes).map(|i| synthetic_scene(cfg.scene_size, derive_seed(base, i as u64))).collect())
        }
    }
}

/// The paired dataset a config describes, generated in memory.
pub fn build_dataset(cfg: &RunConfig) -> Result<Vec<ImagePair>> {
    make_dataset(&source_images(cfg)?, &cfg.speckle()?, cfg.patch, cfg.count, derive_seed(cfg.seed, PATCH_STREAM))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub index: usize,
    pub seed: u64,
    pub clean: String,
    pub speckled: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub looks: f64,
    pub patch: usize,
    pub count: usize,
    pub seed: u64,
    pub pairs: Vec<PairEntry>,
}

pub fn read_dataset_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(DATASET_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Loads the pairs of a `simulate` output directory.
pub fn load_dataset(dir: &Path) -> Result<Vec<ImagePair>> {
    let manifest = read_dataset_manifest(dir)?;
    manifest
        .pairs
        .iter()
        .map(|p| ImagePair::observed(load_image(dir.join(&p.clean))?, load_image(dir.join(&p.speckled))?, manifest.looks, p.seed))
        .collect()
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let out = create_out_dir(cfg)?;
    let pairs = build_dataset(cfg)?;
    for sub in ["clean", "speckled"] {
        let dir = out.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut entries = Vec::with_capacity(pairs.len());
    for (index, pair) in pairs.iter().enumerate() {
        let entry = PairEntry {
            index,
            seed: pair.seed,
            clean: format!("clean/{index:05}.png"),
            speckled: format!("speckled/{index:05}.png"),
        };
        save_image(out.join(&entry.clean), &pair.clean)?;
        save_image(out.join(&entry.speckled), &pair.speckled)?;
        entries.push(entry);
    }
    let manifest = DatasetManifest { looks: cfg.looks, patch: cfg.patch, count: pairs.len(), seed: cfg.seed, pairs: entries };
    let path = out.join(DATASET_MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n").map_err(|e| Error::io(&path, e))?;
    info!("wrote {} pairs to {}", pairs.len(), out.display());
    Ok(())
}

/// Runs training as configured and returns the final checkpoint.
pub fn train(cfg: &RunConfig) -> Result<Checkpoint> {
    let out = create_out_dir(cfg)?;
    let data = match &cfg.data {
        Some(dir) => load_dataset(dir)?,
        None => build_dataset(cfg)?,
    };
    let predictor = Predictor::init(cfg.predictor.clone(), derive_seed(cfg.seed, INIT_STREAM))?;
    info!("training {} parameters on {} pairs", predictor.params().num_scalars(), data.len());
    let mut trainer = Trainer::new(predictor, cfg.train.clone())?;
    let log_path = out.join(LOSS_LOG);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| Error::io(&log_path, e))?);
    let interval = cfg.train.checkpoint_interval;
    trainer.run(&data, |record, trainer| {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(log, "{line}").map_err(|e| Error::io(&log_path, e))?;
        if interval > 0 && record.iteration % interval == 0 {
            info!("iteration {} loss {:.5}", record.iteration, record.loss);
            let ck = Checkpoint::new(trainer.predictor().clone(), cfg.train.schedule, record.iteration);
            ck.save(out.join(format!("checkpoint_{:06}.sdck", record.iteration)))?;
        }
        Ok(())
    })?;
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    let iteration = trainer.iteration();
    let ck = Checkpoint::new(trainer.into_predictor(), cfg.train.schedule, iteration);
    ck.save(out.join(FINAL_CHECKPOINT))?;
    Ok(ck)
}

fn resample(image: &Image, height: usize, width: usize) -> Image {
    if image.dims() == (height, width) {
        return image.clone();
    }
    let buf: ImageBuffer<Luma<f32>, Vec<f32>> =
        ImageBuffer::from_raw(image.width() as u32, image.height() as u32, image.pixels().to_vec()).expect("buffer size matches");
    let resized = imageops::resize(&buf, width as u32, height as u32, FilterType::Triangle);
    Image::new(height, width, resized.into_raw()).expect("resize output matches").clamp01()
}

fn despeckle(cfg: &RunConfig) -> Result<()> {
    let out = create_out_dir(cfg)?;
    let ck = Checkpoint::load(cfg.checkpoint.as_ref().expect("resolved"))?;
    let sched = ck.schedule.build()?;
    let size = ck.predictor.config().input_size;
    let paths = expand_inputs(cfg.input.as_ref().expect("resolved"))?;
    if paths.is_empty() {
        return Err(Error::Usage("no input images found".into()));
    }
    let base = derive_seed(cfg.seed, DESPECKLE_STREAM);
    let mut inputs = Vec::with_capacity(paths.len());
    let mut dims = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let img = load_image(path)?;
        dims.push(img.dims());
        if img.dims() != (size, size) && !cfg.resize {
            return Err(Error::Dimension(format!(
                "{} is {}x{} but the checkpoint expects {size}x{size}; pass --resize to resample",
                path.display(),
                img.height(),
                img.width()
            )));
        }
        inputs.push((resample(&img, size, size), derive_seed(base, i as u64)));
    }
    info!("despeckling {} images with {} shifts", inputs.len(), cfg.shifts.len());
    let outputs = despeckle_batch(&inputs, &cfg.shifts, &ck.predictor, &sched, cfg.sampler)?;
    for ((path, result), (h, w)) in paths.iter().zip(&outputs).zip(dims) {
        let name = path.file_stem().expect("image path has a name").to_string_lossy();
        save_image(out.join(format!("{name}.png")), &resample(result, h, w))?;
    }
    Ok(())
}

/// PSNR as a JSON number, or the string `"inf"` for identical images.
pub fn psnr_json(value: f64) -> Value {
    if value.is_infinite() && value > 0.0 {
        Value::String("inf".into())
    } else {
        json!(value)
    }
}

/// One report record comparing `test` against `reference`.
pub fn metric_record(name: &str, reference: &Image, test: &Image, regions: &[NamedRegion]) -> Result<Value> {
    let mut enl_values = serde_json::Map::new();
    for r in regions {
        enl_values.insert(r.name.clone(), json!(enl(test, &r.region)?));
    }
    Ok(json!({
        "image": name,
        "psnr_db": psnr_json(psnr(reference, test, 1.0)?),
        "ssim": ssim(reference, test)?,
        "enl": enl_values,
    }))
}

fn evaluate(cfg: &RunConfig) -> Result<()> {
    let tests = expand_inputs(cfg.input.as_ref().expect("resolved"))?;
    let reference = cfg.reference.as_ref().expect("resolved");
    let mut lines = Vec::with_capacity(tests.len());
    for path in &tests {
        let name = path.file_name().expect("image path has a name");
        let ref_path = if reference.is_dir() { reference.join(name) } else { reference.clone() };
        let record = metric_record(&name.to_string_lossy(), &load_image(&ref_path)?, &load_image(path)?, &cfg.regions)?;
        lines.push(serde_json::to_string(&record).expect("record serializes"));
    }
    let report = lines.iter().map(|l| format!("{l}\n")).collect::<String>();
    match &cfg.out {
        Some(_) => {
            let out = create_out_dir(cfg)?;
            let path = out.join(EVAL_REPORT);
            fs::write(&path, report).map_err(|e| Error::io(&path, e))
        }
        None => {
            print!("{report}");
            Ok(())
        }
    }
}
