//! Command-line front end: argument parsing, command dispatch and the recipe
//! runner. `main.rs` only forwards `std::env::args` to [`run_from`].

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ris_sense::channel::{gain_matrix, CellReflectionTable, IdealReflection, LinkBudget, ReflectionModel, SceneGrid};
use ris_sense::classifier::{
    dataset_features_m1, evaluate, load_model, save_model, train, EvalReport, InMemory, LazyImages, ModelKind,
    TrainConfig, TrainReport, DESIGN_FREQUENCY,
};
use ris_sense::codebook::{
    characterization_feed, ideal_phase_profile, quantize_profile, radiation_pattern, RisState, SteeringSpec,
};
use ris_sense::geometry::{efficiency_report, GeometryConfig, GridRange, SweepSpec};
use ris_sense::plot;
use ris_sense::sensing::{
    build_dataset, export_dataset, load_external_dataset, read_record, AugmentSpec, BuildOptions, Dataset, SynthSetup,
};
use ris_sense::sequencer::{
    fcao_optimize, mutual_coherence, random_time_matrix, realize_sequence, time_matrix_from_sequence,
    ConfigSequence, FcaoOptions, Provenance, DEFAULT_FRAMES, SLOTS_PER_FRAME,
};

mod recipe;

pub use recipe::{run_recipe, Recipe, RecipeManifest, RecipeStep, MANIFEST_NAME};

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: exit::USAGE, message: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self { code: exit::DATA, message: msg.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ris_sense::Error> for CliError {
    fn from(e: ris_sense::Error) -> Self {
        use ris_sense::Error as E;
        let code = match &e {
            E::InvalidInput(_) => exit::USAGE,
            E::Numerical(_) => exit::NUMERICAL,
            E::DimensionMismatch(_) | E::Data(_) | E::Io { .. } | E::Json(_) => exit::DATA,
        };
        Self { code, message: e.to_string() }
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ris-sense", version, about = "RIS-assisted RF gesture sensing toolkit")]
pub struct Cli {
    /// Master seed; every random draw of the command derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Feed placement: efficiency of one geometry or an exhaustive sweep.
    #[command(subcommand)]
    Geometry(GeometryCmd),
    /// Quantized 1-bit steering state for a commanded angle.
    Codebook(CodebookArgs),
    /// Far-field pattern of a stored RIS state over the rotor angles.
    Pattern(PatternArgs),
    /// Configuration sequence, random or coherence-optimized.
    Sequence(SequenceArgs),
    /// Mutual coherence of a sequence's measurement matrix.
    Coherence(CoherenceArgs),
    /// Build, import or export S21 datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train a classifier on one provenance of a dataset.
    Train(TrainArgs),
    /// Score a stored model on one provenance of a dataset.
    Evaluate(EvaluateArgs),
    /// Render an SVG figure and its CSV twin.
    Plot(PlotArgs),
    /// Side-by-side table of training or evaluation reports.
    Report(ReportArgs),
    /// Run a JSON experiment recipe.
    Recipe(RecipeArgs),
}

#[derive(Debug, Subcommand)]
pub enum GeometryCmd {
    /// Exhaustive aperture-efficiency maximization over the placement grid.
    Sweep(SweepArgs),
    /// Efficiencies and edge taper of a single placement.
    Eval(GeometryEvalArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Offset angle range in degrees, start:stop:step.
    #[arg(long, default_value = "0:50:1")]
    pub theta0: GridRange,
    /// Feed height range in metres.
    #[arg(long, default_value = "0.20:1.80:0.01")]
    pub h: GridRange,
    /// Feed beam point y0 range in metres.
    #[arg(long, default_value = "-0.15:0.15:0.01", allow_hyphen_values = true)]
    pub y0: GridRange,
    /// Lower bound on the feed height (m).
    #[arg(long)]
    pub h_min: Option<f64>,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GeometryEvalArgs {
    /// Feed height (m).
    #[arg(long)]
    pub h: f64,
    /// Offset angle (deg).
    #[arg(long)]
    pub theta0: f64,
    /// Feed beam point y0 (m).
    #[arg(long, default_value_t = 0.0)]
    pub y0: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CodebookArgs {
    /// Commanded steering angle (deg).
    #[arg(long, allow_hyphen_values = true)]
    pub steer_theta: f64,
    #[arg(long, default_value_t = 5.91)]
    pub freq_ghz: f64,
    /// Feed distance from the tile centre (m).
    #[arg(long, default_value_t = 0.40)]
    pub feed_d: f64,
    /// Feed angle off the tile normal (deg).
    #[arg(long, default_value_t = 35.0)]
    pub feed_angle: f64,
    /// State file: row-major array of 64 bits.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Cells {
    /// Tabulated unit-cell response.
    Measured,
    /// Lossless ±1 reflection.
    Ideal,
}

#[derive(Debug, Args)]
pub struct PatternArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long, default_value_t = 6.16)]
    pub freq_ghz: f64,
    /// Rotor angles in degrees, start:stop:step.
    #[arg(long, default_value = "-60:60:2", allow_hyphen_values = true)]
    pub angles: GridRange,
    #[arg(long, default_value_t = 0.40)]
    pub feed_d: f64,
    #[arg(long, default_value_t = 35.0)]
    pub feed_angle: f64,
    #[arg(long, value_enum, default_value_t = Cells::Measured)]
    pub cells: Cells,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SequenceMode {
    Fcao,
    Random,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    /// Link budget JSON; the built-in bench layout when omitted.
    #[arg(long)]
    pub channel: Option<PathBuf>,
    /// Frequency at which the gain matrix is evaluated.
    #[arg(long, default_value_t = 5.91)]
    pub freq_ghz: f64,
}

#[derive(Debug, Args)]
pub struct SequenceArgs {
    #[arg(long, value_enum)]
    pub mode: SequenceMode,
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = DEFAULT_FRAMES)]
    pub frames: usize,
    /// Optimizer restarts (fcao only).
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    /// Coordinate sweeps per restart (fcao only).
    #[arg(long, default_value_t = 30)]
    pub max_sweeps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CoherenceArgs {
    #[arg(long)]
    pub seq: PathBuf,
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    /// Synthesize base runs and augmented replicas for one sequence.
    Build(DatasetBuildArgs),
    /// Import a directory in the external CSV layout.
    Import(DatasetImportArgs),
    /// Write a dataset in the external CSV layout.
    Export(DatasetExportArgs),
}

#[derive(Debug, Args)]
pub struct DatasetBuildArgs {
    /// Must match the sequence file; taken from it when omitted.
    #[arg(long)]
    pub provenance: Option<Provenance>,
    #[arg(long)]
    pub seq: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Noise replicas per base run.
    #[arg(long, default_value_t = ris_sense::sensing::DEFAULT_REPLICAS)]
    pub replicas: u32,
    /// Noise std added to the base runs themselves.
    #[arg(long, default_value_t = 0.0)]
    pub base_noise: f64,
    /// Link budget JSON; the built-in bench layout when omitted.
    #[arg(long)]
    pub channel: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetImportArgs {
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DatasetExportArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Only this provenance; everything when omitted.
    #[arg(long)]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub provenance: Provenance,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Spread mini-batch gradients over threads (same result as serial).
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub provenance: Provenance,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Pattern CSV (angle_deg,gain_db).
    Pattern,
    /// Record `.bin` file, or a dataset directory plus --sample.
    S21Heatmap,
    /// Training report JSON.
    LossCurves,
    /// Training or evaluation report JSON.
    Confusion,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[arg(long)]
    pub input: PathBuf,
    /// Sample id when the heatmap input is a dataset directory.
    #[arg(long)]
    pub sample: Option<String>,
    /// SVG path; the CSV twin goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// NAME=report.json, repeatable; training or evaluation reports.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<String>,
    /// Markdown table path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecipeArgs {
    pub file: PathBuf,
    /// Output directory; overrides the recipe's own.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command. Returns the exit
/// status and prints errors to stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match execute(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn execute(cli: Cli) -> CliResult {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Geometry(GeometryCmd::Sweep(a)) => geometry_sweep(a),
        Command::Geometry(GeometryCmd::Eval(a)) => geometry_eval(a),
        Command::Codebook(a) => codebook(a),
        Command::Pattern(a) => pattern(a),
        Command::Sequence(a) => sequence(a, seed),
        Command::Coherence(a) => coherence(a),
        Command::Dataset(DatasetCmd::Build(a)) => dataset_build(a, seed),
        Command::Dataset(DatasetCmd::Import(a)) => dataset_import(a),
        Command::Dataset(DatasetCmd::Export(a)) => dataset_export(a),
        Command::Train(a) => train_cmd(a, seed),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Plot(a) => plot_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Recipe(a) => {
            let m = run_recipe(&a.file, a.out.as_deref(), cli.seed)?;
            println!("recipe finished: {} steps", m.steps.len());
            Ok(())
        }
    }
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_slice(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn emit_json(value: &impl Serialize, out: Option<&Path>) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))? + "\n";
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct Placement {
    h_m: f64,
    theta0_deg: f64,
    fbp_y0_m: f64,
}

#[derive(Serialize)]
struct GeometryReport {
    best: Placement,
    eta_s: f64,
    eta_i: f64,
    eta_a: f64,
    edge_taper_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_size: Option<usize>,
}

fn geometry_sweep(a: SweepArgs) -> CliResult {
    let spec = SweepSpec {
        theta0_deg: a.theta0,
        h_m: a.h,
        y0_m: a.y0,
        h_min: a.h_min,
        ..SweepSpec::default()
    };
    let o = ris_sense::geometry::sweep_optimize(&spec)?;
    let r = GeometryReport {
        best: Placement {
            h_m: o.best.h,
            theta0_deg: o.best.theta0.to_degrees(),
            fbp_y0_m: o.best.fbp[1],
        },
        eta_s: o.report.eta_s,
        eta_i: o.report.eta_i,
        eta_a: o.report.eta_a,
        edge_taper_db: o.report.edge_taper_db,
        grid_size: Some(o.grid_size),
    };
    eprintln!(
        "best H = {:.3} m, theta0 = {:.1} deg, y0 = {:.3} m, eta_a = {:.4}",
        r.best.h_m, r.best.theta0_deg, r.best.fbp_y0_m, r.eta_a
    );
    emit_json(&r, a.out.as_deref())
}

fn geometry_eval(a: GeometryEvalArgs) -> CliResult {
    let g = GeometryConfig::new(a.h, a.theta0.to_radians(), [0.0, a.y0]);
    let e = efficiency_report(&g)?;
    let r = GeometryReport {
        best: Placement {
            h_m: a.h,
            theta0_deg: a.theta0,
            fbp_y0_m: a.y0,
        },
        eta_s: e.eta_s,
        eta_i: e.eta_i,
        eta_a: e.eta_a,
        edge_taper_db: e.edge_taper_db,
        grid_size: None,
    };
    emit_json(&r, a.out.as_deref())
}

fn codebook(a: CodebookArgs) -> CliResult {
    let spec = SteeringSpec::characterization(
        a.feed_d,
        a.feed_angle.to_radians(),
        a.freq_ghz * 1e9,
        a.steer_theta.to_radians(),
    );
    let state = quantize_profile(&ideal_phase_profile(&spec)?);
    emit_json(&state, Some(&a.out))?;
    eprintln!("{} of 64 elements in state 1", state.to_row_major().iter().filter(|&&b| b == 1).count());
    Ok(())
}

fn pattern(a: PatternArgs) -> CliResult {
    let state: RisState = read_json(&a.state)?;
    let angles = a.angles.values()?;
    let feed = characterization_feed(a.feed_d, a.feed_angle.to_radians());
    let table;
    let cells: &dyn ReflectionModel = match a.cells {
        Cells::Ideal => &IdealReflection,
        Cells::Measured => {
            table = CellReflectionTable::default();
            &table
        }
    };
    let p = radiation_pattern(&state, a.freq_ghz * 1e9, feed, &angles, cells)?;
    let fig = plot::pattern_figure(&p)?;
    match (&a.svg, &a.csv) {
        (None, None) => print!("{}", fig.csv),
        _ => {
            if let Some(s) = &a.svg {
                write_file(s, &fig.svg)?;
            }
            if let Some(c) = &a.csv {
                write_file(c, &fig.csv)?;
            }
        }
    }
    eprintln!("peak at {} deg", p.peak_angle());
    Ok(())
}

fn channel_matrix(c: &ChannelArgs) -> CliResult<ris_sense::channel::ChannelGainMatrix> {
    let lb = match &c.channel {
        Some(p) => read_json::<LinkBudget>(p)?,
        None => LinkBudget::default(),
    };
    lb.validate()?;
    Ok(gain_matrix(
        &lb,
        &CellReflectionTable::default(),
        &SceneGrid::default_geometry(),
        c.freq_ghz * 1e9,
    )?)
}

fn sequence(a: SequenceArgs, seed: u64) -> CliResult {
    let (t, prov) = match a.mode {
        SequenceMode::Random => (random_time_matrix(a.frames, ris_sense::channel::GROUPS, seed)?, Provenance::Random),
        SequenceMode::Fcao => {
            let opts = FcaoOptions {
                frames: a.frames,
                max_sweeps: a.max_sweeps,
                restarts: a.restarts,
                seed,
                ..FcaoOptions::default()
            };
            let out = fcao_optimize(&channel_matrix(&a.channel)?, &opts)?;
            eprintln!(
                "objective {:.6} (restart {} of {})",
                out.objective,
                out.winning_restart,
                out.initial_objectives.len()
            );
            (out.time_matrix, Provenance::Fcao)
        }
    };
    let seq = realize_sequence(&t, SLOTS_PER_FRAME, prov, seed)?;
    emit_json(&seq, Some(&a.out))
}

#[derive(Serialize)]
struct CoherenceReport {
    provenance: Provenance,
    frames: usize,
    max: f64,
    avg: f64,
}

fn coherence(a: CoherenceArgs) -> CliResult {
    let seq: ConfigSequence = read_json(&a.seq)?;
    seq.validate()?;
    let t = time_matrix_from_sequence(&seq)?;
    let c = mutual_coherence(&t.measurement_matrix(&channel_matrix(&a.channel)?)?)?;
    emit_json(
        &CoherenceReport {
            provenance: seq.provenance,
            frames: seq.frames(),
            max: c.max,
            avg: c.avg,
        },
        a.out.as_deref(),
    )
}

fn dataset_build(a: DatasetBuildArgs, seed: u64) -> CliResult {
    let seq: ConfigSequence = read_json(&a.seq)?;
    if let Some(p) = a.provenance {
        if p != seq.provenance {
            return Err(CliError::usage(format!(
                "--provenance {p} does not match the sequence file ({})",
                seq.provenance
            )));
        }
    }
    let mut setup = SynthSetup::default();
    if let Some(p) = &a.channel {
        setup.link = read_json(p)?;
    }
    let opts = BuildOptions {
        master_seed: seed,
        augmentation: AugmentSpec {
            replicas: a.replicas,
            ..AugmentSpec::default()
        },
        base_noise_std: a.base_noise,
        setup,
    };
    let m = build_dataset(&a.out, &seq, &opts)?;
    eprintln!("{} {} samples in {}", m.total(seq.provenance), seq.provenance, a.out.display());
    Ok(())
}

fn dataset_import(a: DatasetImportArgs) -> CliResult {
    let m = load_external_dataset(&a.path, &a.out)?;
    for p in Provenance::ALL {
        eprintln!("{p}: {} samples", m.total(p));
    }
    Ok(())
}

fn dataset_export(a: DatasetExportArgs) -> CliResult {
    let ds = Dataset::open(&a.data)?;
    let n = export_dataset(&ds, &a.out, |s| a.provenance.is_none_or(|p| s.provenance == p))?;
    eprintln!("exported {n} samples");
    Ok(())
}

fn train_cmd(a: TrainArgs, seed: u64) -> CliResult {
    let ds = Dataset::open(&a.data)?;
    let mut cfg = TrainConfig::new(a.model, seed);
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.learning_rate;
    cfg.parallel = a.parallel;
    let (model, report) = match a.model {
        ModelKind::M1 => {
            let (x, y) = dataset_features_m1(&ds, a.provenance, DESIGN_FREQUENCY)?;
            train(&InMemory::new(x, y)?, &cfg)?
        }
        ModelKind::M2 => train(&LazyImages::new(&ds, a.provenance)?, &cfg)?,
    };
    save_model(&a.out, &model)?;
    if let Some(r) = &a.report {
        emit_json(&report, Some(r))?;
    }
    eprintln!(
        "{} on {}: test accuracy {:.2}% ({} samples)",
        a.model,
        a.provenance,
        100.0 * report.test.accuracy,
        report.test.total
    );
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let ds = Dataset::open(&a.data)?;
    let report = match model.arch.kind {
        ModelKind::M1 => {
            let f = model.arch.design_frequency_hz.unwrap_or(DESIGN_FREQUENCY);
            let (x, y) = dataset_features_m1(&ds, a.provenance, f)?;
            let src = InMemory::new(x, y)?;
            let idx: Vec<usize> = (0..src.inputs.len()).collect();
            evaluate(&model, &src, &idx)?
        }
        ModelKind::M2 => {
            let src = LazyImages::new(&ds, a.provenance)?;
            let idx: Vec<usize> = (0..src.labels().len()).collect();
            evaluate(&model, &src, &idx)?
        }
    };
    eprintln!("accuracy {:.2}% over {} samples", 100.0 * report.accuracy, report.total);
    emit_json(&report, a.out.as_deref())
}

/// A training report or a bare evaluation report.
#[derive(serde::Deserialize)]
#[serde(untagged)]
enum AnyReport {
    Train(Box<TrainReport>),
    Eval(EvalReport),
}

impl AnyReport {
    fn eval(&self) -> &EvalReport {
        match self {
            AnyReport::Train(t) => &t.test,
            AnyReport::Eval(e) => e,
        }
    }
}

fn plot_cmd(a: PlotArgs) -> CliResult {
    let fig = match a.kind {
        PlotKind::Pattern => {
            let text = fs::read_to_string(&a.input)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", a.input.display())))?;
            plot::pattern_figure(&plot::parse_pattern_csv(&text)?)?
        }
        PlotKind::S21Heatmap => {
            let rec = if a.input.is_dir() {
                let id = a
                    .sample
                    .as_deref()
                    .ok_or_else(|| CliError::usage("--sample is required when the input is a dataset"))?;
                let ds = Dataset::open(&a.input)?;
                let s = ds
                    .manifest
                    .samples
                    .iter()
                    .find(|s| s.sample_id == id)
                    .ok_or_else(|| CliError::data(format!("no sample {id:?} in {}", a.input.display())))?;
                ds.materialize(s)?
            } else {
                read_record(&a.input)?
            };
            plot::s21_heatmap_figure(&rec)?
        }
        PlotKind::LossCurves => match read_json::<AnyReport>(&a.input)? {
            AnyReport::Train(t) => plot::loss_curves_figure(&t)?,
            AnyReport::Eval(_) => {
                return Err(CliError::data(format!(
                    "{} is an evaluation report without loss curves",
                    a.input.display()
                )))
            }
        },
        PlotKind::Confusion => plot::confusion_figure(read_json::<AnyReport>(&a.input)?.eval())?,
    };
    write_file(&a.out, &fig.svg)?;
    write_file(&a.out.with_extension("csv"), &fig.csv)
}

fn report_cmd(a: ReportArgs) -> CliResult {
    let mut rows = Vec::new();
    for item in &a.inputs {
        let (name, path) = item
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("expected NAME=PATH, got {item:?}")))?;
        rows.push((name.to_string(), read_json::<AnyReport>(Path::new(path))?));
    }
    let mut out = String::from("| run | model | test samples | accuracy (%) |");
    let classes = rows[0].1.eval().classes.clone();
    for c in &classes {
        out.push_str(&format!(" recall {c} (%) |"));
    }
    out.push_str("\n|---|---|---|---|");
    out.push_str(&"---|".repeat(classes.len()));
    out.push('\n');
    for (name, r) in &rows {
        let e = r.eval();
        let kind = match r {
            AnyReport::Train(t) => t.config.kind.to_string(),
            AnyReport::Eval(_) => "-".into(),
        };
        out.push_str(&format!("| {name} | {kind} | {} | {:.2} |", e.total, 100.0 * e.accuracy));
        for v in &e.recall {
            out.push_str(&format!(" {:.2} |", 100.0 * v));
        }
        out.push('\n');
    }
    match &a.out {
        Some(p) => write_file(p, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}
