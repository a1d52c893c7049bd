//! The `cchart` command line.
//!
//! Diagnostics go to stdout as `key=value` lines, data goes to files. Exit
//! status: 0 success, 2 usage or validation error, 3 I/O error, 4 pipeline
//! stage failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::channel::{ChannelDataset, Points};
use crate::distance::{build_distance_matrix, Measure};
use crate::error::{Error, Result, Stage};
use crate::isomap::{chart_channels_timed, ChartParams, ConnectivityPolicy};
use crate::io;
use crate::metrics::quality_curves;
use crate::svg;
use crate::synth::{self, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_STAGE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cchart", version, about = "Channel charting toolkit")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from a config file or a preset.
    Generate(GenerateArgs),
    /// Chart a dataset: distances, neighborhood graph, geodesics, MDS.
    Chart(ChartArgs),
    /// Continuity and trustworthiness of a chart against ground truth.
    Evaluate(EvaluateArgs),
    /// Render a chart or quality-curve CSV as SVG.
    Plot(PlotArgs),
    /// Export the pairwise distance matrix of a dataset as CSV.
    Distances(DistancesArgs),
    /// Convert a channel CSV into the binary dataset format.
    Import(ImportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    QuadrigaLike,
    DeepmimoLike,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
pub struct GenerateArgs {
    /// Scenario file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChartArgs {
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    #[arg(long, default_value = "phase-insensitive", value_parser = parse_measure)]
    pub measure: Measure,
    #[arg(long, default_value = "bridge", value_parser = parse_policy)]
    pub connectivity: ConnectivityPolicy,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub chart: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Comma-separated neighborhood sizes; `start:step:end` expands to a range.
    #[arg(long, default_value = "5,10,25,50", value_parser = parse_k_list)]
    pub k_list: KList,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Scatter,
    Curves,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "scatter")]
    pub kind: PlotKind,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistancesArgs {
    pub dataset: PathBuf,
    #[arg(long, default_value = "phase-insensitive", value_parser = parse_measure)]
    pub measure: Measure,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub antennas: usize,
    #[arg(long, default_value_t = 1)]
    pub subcarriers: usize,
    /// Hz.
    #[arg(long)]
    pub center_frequency: f64,
    /// Hz; subcarriers are spread evenly across it.
    #[arg(long, default_value_t = 0.0)]
    pub bandwidth: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Neighborhood sizes in the order given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KList(pub Vec<usize>);

fn parse_measure(s: &str) -> std::result::Result<Measure, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_policy(s: &str) -> std::result::Result<ConnectivityPolicy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_k_list(s: &str) -> std::result::Result<KList, String> {
    let mut ks = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let nums: Vec<usize> = part
            .split(':')
            .map(|x| x.trim().parse::<usize>().map_err(|e| format!("`{part}`: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        match nums[..] {
            [k] => ks.push(k),
            [start, step, end] if step > 0 && start <= end => {
                ks.extend((start..=end).step_by(step));
            }
            _ => return Err(format!("`{part}` is neither K nor start:step:end")),
        }
    }
    if ks.is_empty() {
        return Err("empty K list".into());
    }
    Ok(KList(ks))
}

/// Failure of a subcommand, with the exit status it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Write { .. } => EXIT_IO,
            Error::Stage { .. } => EXIT_STAGE,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { out } else { err };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let threads = cli.threads.map(usize::from);
    let mut diagnostics = Vec::new();
    let result = crate::exec::with_threads(threads, || dispatch(cli.command, &mut diagnostics))
        .unwrap_or_else(|e| Err(Failure { code: EXIT_USAGE, message: format!("thread pool: {e}") }));
    let _ = out.write_all(&diagnostics);
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    match command {
        Command::Generate(a) => generate(a, out),
        Command::Chart(a) => chart(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Plot(a) => plot(a),
        Command::Distances(a) => distances(a, out),
        Command::Import(a) => import(a, out),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_dataset(path: &Path) -> Result<ChannelDataset> {
    io::read_dataset(open(path)?)
}

fn emit(out: &mut dyn Write, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key}={value}");
}

fn generate(args: GenerateArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let mut config = match (&args.config, args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            ScenarioConfig::from_kv_str(&text)?
        }
        (None, Some(Preset::QuadrigaLike)) => synth::preset_quadriga_like(),
        (None, Some(Preset::DeepmimoLike)) => synth::preset_deepmimo_like(),
        (None, None) => return Err(usage("either --config or --preset is required")),
    };
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    let dataset = synth::generate_scenario(&config)?;
    let bytes = io::write_dataset(&dataset, create(&args.output)?)?;
    emit(out, "n", dataset.len());
    emit(out, "a", dataset.antennas());
    emit(out, "s", dataset.subcarriers());
    emit(out, "m", dataset.channel_dim());
    emit(out, "seed", config.rng_seed);
    emit(out, "bytes", bytes);
    Ok(())
}

fn chart(args: ChartArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let dataset = load_dataset(&args.dataset)?;
    let params = ChartParams {
        dim: args.dim,
        k: args.k,
        measure: args.measure,
        connectivity: args.connectivity,
    };
    emit(out, "n", dataset.len());
    emit(out, "m", dataset.channel_dim());
    emit(out, "dim", params.dim);
    emit(out, "k", params.k);
    emit(out, "measure", params.measure);
    emit(out, "connectivity", params.connectivity);
    let mut total = Duration::ZERO;
    let result = chart_channels_timed(&dataset, &params, |stage: Stage, t: Duration| {
        total += t;
        emit(out, &format!("time_{}_s", stage.name()), format!("{:.6}", t.as_secs_f64()));
    });
    emit(out, "time_total_s", format!("{:.6}", total.as_secs_f64()));
    let result = result?;
    emit(out, "geodesic_stress", result.geodesic_stress);
    for (i, v) in result.eigenvalues.iter().enumerate() {
        emit(out, &format!("eigenvalue_{}", i + 1), v);
    }
    emit(out, "negative_eigenvalues_clipped", result.negative_eigenvalues_clipped);
    emit(out, "eigen_iterations", result.iterations);
    io::write_chart_csv(&result.chart, dataset.positions(), create(&args.output)?)?;
    Ok(())
}

fn evaluate(args: EvaluateArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let table = io::read_table(open(&args.chart)?)?;
    let chart = table
        .points_with_prefix("z", true)?
        .expect("fallback selects every column");
    let dataset = load_dataset(&args.dataset)?;
    let positions: &Points = dataset
        .positions()
        .ok_or_else(|| usage("ground truth required: dataset has no positions"))?;
    if positions.len() != chart.len() {
        return Err(usage(format!(
            "chart has {} rows but the dataset has {} channels",
            chart.len(),
            positions.len()
        )));
    }
    let (ct, tw) = quality_curves(positions, &chart, &args.k_list.0)?;
    io::write_curves_csv(&ct.ks, &ct.scores, &tw.scores, create(&args.output)?)?;
    emit(out, "rows", ct.ks.len());
    emit(out, "mean_ct", ct.mean());
    emit(out, "mean_tw", tw.mean());
    Ok(())
}

fn plot(args: PlotArgs) -> std::result::Result<(), Failure> {
    let table = io::read_table(open(&args.input)?)?;
    let text = match args.kind {
        PlotKind::Scatter => {
            let chart = table
                .points_with_prefix("z", true)?
                .expect("fallback selects every column");
            let positions = table.points_with_prefix("p", false)?;
            svg::scatter(&chart, positions.as_ref())?
        }
        PlotKind::Curves => {
            let col = |name: &str| {
                table
                    .column_index(name)
                    .map(|i| table.column(i))
                    .ok_or_else(|| usage(format!("curves input lacks a `{name}` column")))
            };
            svg::curves(&col("K")?, &col("CT")?, &col("TW")?)?
        }
    };
    let mut file = create(&args.output)?;
    file.write_all(text.as_bytes()).map_err(Error::Io)?;
    file.flush().map_err(Error::Io)?;
    Ok(())
}

fn distances(args: DistancesArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let dataset = load_dataset(&args.dataset)?;
    let matrix = build_distance_matrix(&dataset, args.measure).map_err(|e| e.at(Stage::Distance))?;
    io::write_distance_csv(&matrix, create(&args.output)?)?;
    emit(out, "n", matrix.size());
    emit(out, "measure", args.measure);
    emit(out, "max", matrix.max());
    Ok(())
}

fn import(args: ImportArgs, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let grid = synth::frequency_grid(args.center_frequency, args.bandwidth, args.subcarriers);
    let dataset = io::import_csv(open(&args.input)?, args.antennas, args.subcarriers, grid)?;
    let bytes = io::write_dataset(&dataset, create(&args.output)?)?;
    emit(out, "n", dataset.len());
    emit(out, "m", dataset.channel_dim());
    emit(out, "positions", dataset.positions().map_or(0, Points::dim));
    emit(out, "bytes", bytes);
    Ok(())
}
