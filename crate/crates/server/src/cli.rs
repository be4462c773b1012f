use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{ArgGroup, Args, Parser, Subcommand};
use interplay_core::calibration::{
    detect_markers, marker_pattern, Calibration, CalibrationSet, Frame, Homography,
};
use interplay_core::dataset::{
    build_dataset, ingest_artist_archive, parse_ndjson, read_dataset, write_dataset, Dataset,
    DatasetConfig, LabeledSketch,
};
use interplay_core::session::{
    complete_sketch, parse_journal, render_svg, replay, CompletionPolicy,
};
use interplay_core::sketcher::{
    fine_tune, train, write_loss_csv, Checkpoint, EpochRecord, LoadedModel, ModelParams,
    SketcherConfig, SketcherError, TrainReport,
};
use interplay_core::stroke::{PlayerChannel, Sketch, DEFAULT_CANVAS_MM};
use interplay_core::vision::{vectorize, ColorPalette, Raster, TraceOptions};
use serde::Deserialize;
use serde_json::json;

use crate::config::ServiceConfig;
use crate::state::session_view;

#[derive(Debug, Parser)]
#[command(
    name = "interplay",
    version,
    about = "Collaborative painting sketcher: training, tools and session service"
)]
pub struct Cli {
    /// Log filter, e.g. `info` or `interplay=debug`. Logs go to stderr.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a sketcher from scratch and write a checkpoint.
    Train(TrainArgs),
    /// Continue training a checkpoint on new data at a reduced learning rate.
    Finetune(FinetuneArgs),
    /// Build a training dataset from QuickDraw NDJSON or canvas photos.
    Ingest(IngestArgs),
    /// Continue a sketch; writes the suggestion JSON and optionally an SVG.
    Complete(CompleteArgs),
    /// Recover strokes from a canvas photo.
    Vectorize(VectorizeArgs),
    /// Solve homographies from a correspondence file.
    Calibrate(CalibrateArgs),
    /// Generate a projector marker pattern or detect markers in a capture.
    Markers(MarkersArgs),
    /// Rebuild a session from its journal and print its state.
    Replay(ReplayArgs),
    /// Run the HTTP and WebSocket service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory written by `ingest`, or a QuickDraw .ndjson file.
    #[arg(long)]
    pub data: PathBuf,
    /// Longest stroke-5 sequence kept when building from NDJSON.
    #[arg(long, default_value_t = 250)]
    pub max_seq_len: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Checkpoint path, rewritten after every epoch.
    #[arg(long)]
    pub out: PathBuf,
    /// Sketcher config JSON; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub mixtures: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-epoch loss curve as CSV.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Starting checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Multiplier on the checkpoint's learning rate.
    #[arg(long)]
    pub factor: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["ndjson", "captures"])))]
pub struct IngestArgs {
    /// QuickDraw NDJSON file.
    #[arg(long)]
    pub ndjson: Option<PathBuf>,
    /// PNG photos of finished paintings, or directories of them.
    #[arg(long, num_args = 1..)]
    pub captures: Vec<PathBuf>,
    /// Calibration used to map capture pixels to canvas millimeters.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Canvas size in millimeters, `WxH`.
    #[arg(long, value_parser = parse_size_f64)]
    pub canvas: Option<(f64, f64)>,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 250)]
    pub max_seq_len: usize,
    #[arg(long, default_value_t = 2.0)]
    pub rdp_epsilon: f64,
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    /// Also write the recovered capture sketches as a JSON array.
    #[arg(long)]
    pub sketches_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// Sketch JSON to continue.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub amount: usize,
    #[arg(long, default_value_t = 0.4)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `emitter`, `receptor`, or a comma list of channels.
    #[arg(long, default_value = "receptor", value_parser = parse_policy)]
    pub policy: CompletionPolicy,
    /// Suggestion JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SVG of the input with the suggestion dashed on top.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VectorizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Calibration with a camera-to-canvas map. Without it one pixel is one
    /// millimeter.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Canvas size in millimeters, `WxH`.
    #[arg(long, value_parser = parse_size_f64)]
    pub canvas: Option<(f64, f64)>,
    /// Palette JSON; missing fields keep their defaults.
    #[arg(long)]
    pub palette: Option<PathBuf>,
    /// Sketch JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for the corrected capture, masks and skeletons.
    #[arg(long)]
    pub debug_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Correspondence sets: `{"sets": [{from, to, correspondences}]}`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Existing calibration to update.
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Calibration JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("action").required(true).args(["count", "detect"])))]
pub struct MarkersArgs {
    /// Generate a pattern of this many markers.
    #[arg(long, requires = "out")]
    pub count: Option<usize>,
    /// Projector resolution, `WxH`.
    #[arg(long, value_parser = parse_size_u32, default_value = "1920x1080")]
    pub projector: (u32, u32),
    /// Pattern PNG.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Marker centers as JSON: the generated ones in projector pixels, or
    /// the detected ones in capture pixels.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Capture to search for markers; prints their centers.
    #[arg(long)]
    pub detect: Option<PathBuf>,
    /// Smallest blob, in pixels, accepted as a marker.
    #[arg(long, default_value_t = 12)]
    pub min_area: usize,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub journal: PathBuf,
    /// State JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service config JSON; the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<SocketAddr>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Palette JSON; missing fields keep their defaults.
    #[arg(long)]
    pub palette: Option<PathBuf>,
    #[arg(long, value_parser = parse_size_u32)]
    pub projector: Option<(u32, u32)>,
}

fn parse_size<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<T>()
            .map_err(|_| format!("bad number {v:?} in {s:?}"))
    };
    Ok((num(w)?, num(h)?))
}

fn parse_size_f64(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = parse_size::<f64>(s)?;
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err(format!("size must be positive, got {s:?}"));
    }
    Ok((w, h))
}

fn parse_size_u32(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = parse_size::<u32>(s)?;
    if w == 0 || h == 0 {
        return Err(format!("size must be positive, got {s:?}"));
    }
    Ok((w, h))
}

pub fn parse_policy(s: &str) -> Result<CompletionPolicy, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "emitter" => Ok(CompletionPolicy::Emitter),
        "receptor" => Ok(CompletionPolicy::Receptor),
        list => {
            let set = list
                .split(',')
                .map(|c| c.trim().parse::<PlayerChannel>().map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
            Ok(CompletionPolicy::Custom(set))
        }
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_palette(path: Option<&Path>) -> anyhow::Result<ColorPalette> {
    let Some(p) = path else {
        return Ok(ColorPalette::default());
    };
    let palette: ColorPalette = serde_json::from_str(&read_text(p)?)
        .with_context(|| format!("parsing palette {}", p.display()))?;
    palette.validate()?;
    Ok(palette)
}

fn load_calibration(path: &Path) -> anyhow::Result<Calibration> {
    Calibration::from_json(&read_text(path)?)
        .with_context(|| format!("parsing calibration {}", path.display()))
}

/// Capture-to-canvas map and canvas size: from the calibration when given,
/// otherwise one pixel per millimeter over the image.
fn capture_frame(
    calib: Option<&Path>,
    canvas: Option<(f64, f64)>,
    image: &Raster,
) -> anyhow::Result<(Homography, (f64, f64))> {
    match calib {
        Some(p) => {
            let h = load_calibration(p)?.map_between(Frame::Camera, Frame::Canvas)?;
            Ok((h, canvas.unwrap_or(DEFAULT_CANVAS_MM)))
        }
        None => Ok((
            Homography::IDENTITY,
            canvas.unwrap_or((image.width() as f64, image.height() as f64)),
        )),
    }
}

fn load_dataset(args: &DataArgs, seed: u64) -> anyhow::Result<Dataset> {
    if args.data.is_dir() {
        return read_dataset(&args.data)
            .with_context(|| format!("reading dataset {}", args.data.display()));
    }
    let sketches = parse_ndjson(&read_text(&args.data)?)?;
    let cfg = DatasetConfig {
        max_seq_len: args.max_seq_len,
        seed,
        ..DatasetConfig::default()
    };
    Ok(build_dataset(&sketches, &cfg)?)
}

fn save_checkpoint(
    path: &Path,
    cfg: &SketcherConfig,
    scale: f64,
    params: &ModelParams<f32>,
) -> Result<(), SketcherError> {
    Checkpoint::new(cfg.clone(), scale, params.clone()).save(path)
}

fn log_epoch(rec: &EpochRecord) {
    match rec.val_nll {
        Some(v) => tracing::info!(
            epoch = rec.epoch,
            train_nll = rec.train_nll,
            val_nll = v,
            "epoch"
        ),
        None => tracing::info!(epoch = rec.epoch, train_nll = rec.train_nll, "epoch"),
    }
}

fn finish_training(
    report: &TrainReport<f32>,
    cfg: &SketcherConfig,
    scale: f64,
    out: &Path,
    loss_csv: Option<&Path>,
) -> anyhow::Result<()> {
    let checkpoint = Checkpoint::new(cfg.clone(), scale, report.params.clone());
    checkpoint.save(out)?;
    if let Some(csv) = loss_csv {
        write_loss_csv(csv, &report.curve)?;
    }
    let summary = json!({
        "checkpoint": out,
        "checkpoint_id": checkpoint.id(),
        "epochs": report.curve.len(),
        "initial_train_nll": report.initial_train_nll,
        "final_train_nll": report.curve.last().map(|r| r.train_nll),
        "final_val_nll": report.curve.last().and_then(|r| r.val_nll),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run_train(a: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str(&read_text(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => SketcherConfig::default(),
    };
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.hidden_size = a.hidden.unwrap_or(cfg.hidden_size);
    cfg.num_mixtures = a.mixtures.unwrap_or(cfg.num_mixtures);
    cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
    cfg.learning_rate = a.learning_rate.unwrap_or(cfg.learning_rate);
    cfg.grad_clip = a.grad_clip.unwrap_or(cfg.grad_clip);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    let data = load_dataset(&a.data, cfg.seed)?;
    let scale = data.offset_scale;
    let report = train::<f32>(&data, &cfg, &mut |rec, params| {
        log_epoch(rec);
        save_checkpoint(&a.out, &cfg, scale, params)
    })?;
    finish_training(&report, &cfg, scale, &a.out, a.loss_csv.as_deref())
}

fn run_finetune(a: FinetuneArgs) -> anyhow::Result<()> {
    let base = Checkpoint::load(&a.checkpoint)
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let mut cfg = base.config.clone();
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
    cfg.fine_tune_factor = a.factor.unwrap_or(cfg.fine_tune_factor);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    let data = load_dataset(&a.data, cfg.seed)?;
    let scale = data.offset_scale;
    let report = fine_tune::<f32>(&base.params, &data, &cfg, &mut |rec, params| {
        log_epoch(rec);
        save_checkpoint(&a.out, &cfg, scale, params)
    })?;
    finish_training(&report, &cfg, scale, &a.out, a.loss_csv.as_deref())
}

fn png_files(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn run_ingest(a: IngestArgs) -> anyhow::Result<()> {
    let cfg = DatasetConfig {
        max_seq_len: a.max_seq_len,
        rdp_epsilon: a.rdp_epsilon,
        split: (a.train_fraction, a.val_fraction),
        seed: a.seed,
    };
    cfg.validate()?;
    let sketches = match &a.ndjson {
        Some(path) => parse_ndjson(&read_text(path)?)?,
        None => {
            let files = png_files(&a.captures)?;
            anyhow::ensure!(!files.is_empty(), "no PNG captures found");
            let rasters = files
                .iter()
                .map(|f| Raster::load_png(f).with_context(|| format!("loading {}", f.display())))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let (px_to_mm, canvas) = capture_frame(a.calib.as_deref(), a.canvas, &rasters[0])?;
            let report =
                ingest_artist_archive(&rasters, &px_to_mm, &ColorPalette::default(), canvas);
            for (i, msg) in &report.failures {
                tracing::warn!(capture = %files[*i].display(), "skipped: {msg}");
            }
            let labeled: Vec<LabeledSketch> = files
                .iter()
                .zip(report.sketches)
                .filter_map(|(f, s)| {
                    let label = f
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    s.map(|sketch| LabeledSketch { label, sketch })
                })
                .collect();
            if let Some(p) = &a.sketches_out {
                let all: Vec<&Sketch> = labeled.iter().map(|l| &l.sketch).collect();
                write_output(Some(p), &serde_json::to_string_pretty(&all)?)?;
            }
            labeled
        }
    };
    let data = build_dataset(&sketches, &cfg)?;
    let manifest = write_dataset(&a.out, &data)?;
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(())
}

fn run_complete(a: CompleteArgs) -> anyhow::Result<()> {
    let sketch = Sketch::from_json(&read_text(&a.input)?)
        .with_context(|| format!("parsing sketch {}", a.input.display()))?;
    let model = LoadedModel::load(&a.checkpoint)
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let completion = complete_sketch(&sketch, &a.policy, a.amount, a.temperature, a.seed, &model)?;
    if let Some(svg) = &a.svg {
        write_output(Some(svg), &render_svg(&sketch, Some(&completion.sketch)))?;
    }
    write_output(
        a.out.as_deref(),
        &serde_json::to_string_pretty(&completion)?,
    )
}

fn run_vectorize(a: VectorizeArgs) -> anyhow::Result<()> {
    let image =
        Raster::load_png(&a.input).with_context(|| format!("loading {}", a.input.display()))?;
    let palette = load_palette(a.palette.as_deref())?;
    let (px_to_mm, canvas) = capture_frame(a.calib.as_deref(), a.canvas, &image)?;
    let v = vectorize(
        &image,
        &palette,
        &px_to_mm,
        canvas,
        &TraceOptions::default(),
    )?;
    if let Some(dir) = &a.debug_dir {
        v.write_debug(dir)?;
    }
    write_output(a.out.as_deref(), &v.sketch.to_json())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SetsFile {
    Wrapped { sets: Vec<CalibrationSet> },
    Bare(Vec<CalibrationSet>),
}

fn run_calibrate(a: CalibrateArgs) -> anyhow::Result<()> {
    let sets = match serde_json::from_str::<SetsFile>(&read_text(&a.input)?)
        .with_context(|| format!("parsing correspondences {}", a.input.display()))?
    {
        SetsFile::Wrapped { sets } | SetsFile::Bare(sets) => sets,
    };
    anyhow::ensure!(
        !sets.is_empty(),
        "no correspondence sets in {}",
        a.input.display()
    );
    let mut calib = match &a.base {
        Some(p) => load_calibration(p)?,
        None => Calibration::default(),
    };
    calib.solve(&sets)?;
    for e in calib.entries() {
        tracing::info!(from = %e.from, to = %e.to, rmse = e.rmse, "solved");
    }
    write_output(a.out.as_deref(), &calib.to_json())
}

fn run_markers(a: MarkersArgs) -> anyhow::Result<()> {
    if let Some(n) = a.count {
        let pattern = marker_pattern(n, a.projector)?;
        let out = a.out.as_deref().expect("clap requires --out with --count");
        pattern.raster.save_png(out)?;
        if let Some(p) = &a.points {
            write_output(Some(p), &serde_json::to_string_pretty(&pattern.points)?)?;
        }
    }
    if let Some(capture) = &a.detect {
        let image =
            Raster::load_png(capture).with_context(|| format!("loading {}", capture.display()))?;
        let found = detect_markers(&image, &ColorPalette::default(), a.min_area);
        let text = serde_json::to_string_pretty(&found)?;
        write_output(a.points.as_deref(), &text)?;
    }
    Ok(())
}

fn run_replay(a: ReplayArgs) -> anyhow::Result<()> {
    let entries = parse_journal(&read_text(&a.journal)?)?;
    let session = replay(&entries)?;
    write_output(
        a.out.as_deref(),
        &serde_json::to_string_pretty(&session_view(&session))?,
    )
}

fn service_config(a: ServeArgs) -> anyhow::Result<ServiceConfig> {
    let mut cfg = match &a.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    if let Some(v) = a.listen {
        cfg.listen = v;
    }
    if let Some(v) = a.checkpoint {
        cfg.checkpoint = v;
    }
    if let Some(v) = a.calibration {
        cfg.calibration = Some(v);
    }
    if let Some(v) = a.data_dir {
        cfg.data_dir = v;
    }
    if let Some(v) = a.projector {
        cfg.projector_size = v;
    }
    if a.palette.is_some() {
        cfg.palette = load_palette(a.palette.as_deref())?;
    }
    Ok(cfg)
}

fn init_logging(filter: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(filter)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let level = cli.log_level.clone();
    if !matches!(cli.command, Command::Serve(_)) {
        init_logging(level.as_deref().unwrap_or("warn"));
    }
    match cli.command {
        Command::Train(a) => run_train(a),
        Command::Finetune(a) => run_finetune(a),
        Command::Ingest(a) => run_ingest(a),
        Command::Complete(a) => run_complete(a),
        Command::Vectorize(a) => run_vectorize(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Markers(a) => run_markers(a),
        Command::Replay(a) => run_replay(a),
        Command::Serve(a) => {
            let mut cfg = service_config(a)?;
            if let Some(l) = level {
                cfg.log_level = l;
            }
            init_logging(&cfg.log_level);
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            rt.block_on(crate::serve(cfg))
        }
    }
}
