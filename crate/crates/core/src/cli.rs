//! `gproj` command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::baselines::{random_projection, DiffusionModel, Method, PcaModel};
use crate::bench::{
    evaluate_scores, run_experiment, ExperimentSpec, GridSpec, IndexKind, RpAggregate, Setup,
    DEFAULT_CLUSTER_CAP,
};
use crate::diagnostics::{diagnostic_svg, PlotSpec};
use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::io::{data_matrix_csv, matrix_csv, read_data_matrix, read_table, write_atomic, DEFAULT_LABEL_COLUMN};
use crate::projection::OsdKind;
use crate::sequencer::{build_sequence, SequencerConfig};
use crate::validity::PartitionLabels;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(name = "gproj", version, about = "Guided projections for high-dimensional group structure")]
pub struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads; defaults to GP_THREADS or all cores.
    #[arg(long, global = true, env = "GP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Transform a CSV data set into GP, PCA, RP or diffusion-map scores.
    Transform(TransformArgs),
    /// Generate a labelled data set from one of the simulation setups.
    Simulate(SimulateArgs),
    /// Compute validity indices of labelled data.
    Evaluate(EvaluateArgs),
    /// Run a replicated simulation experiment with per-method optimization.
    Benchmark(BenchmarkArgs),
    /// Render a GP matrix CSV as a diagnostic SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TransformMethod {
    Gp,
    Pca,
    Rp,
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OsdArg {
    Od,
    Sd,
    Sum,
}

#[derive(Debug, Args, Serialize)]
struct TransformArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = TransformMethod::Gp)]
    method: TransformMethod,
    /// Observations per GP window.
    #[arg(long, default_value_t = 10)]
    q: usize,
    #[arg(long, value_enum, default_value_t = OsdArg::Od)]
    osd: OsdArg,
    /// Orthogonal-distance normalizer for `--osd sum`.
    #[arg(long)]
    od_norm: Option<f64>,
    /// Score-distance normalizer for `--osd sum`.
    #[arg(long)]
    sd_norm: Option<f64>,
    /// Output dimension for pca, rp and diff; pca defaults to the rank.
    #[arg(long)]
    k: Option<usize>,
    /// Neighbour rank for the diffusion bandwidth; defaults to 2% of n.
    #[arg(long)]
    knn: Option<usize>,
    /// Name of the label column.
    #[arg(long = "labels", default_value = DEFAULT_LABEL_COLUMN)]
    label_column: String,
    /// Diagnostic SVG of the GP matrix.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// JSON record of the GP observation order and step log.
    #[arg(long)]
    sequence: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    setup: u8,
    #[arg(long)]
    r: usize,
    /// Observations per group.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long)]
    output: PathBuf,
    #[arg(long = "labels", default_value = DEFAULT_LABEL_COLUMN)]
    label_column: String,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long = "labels", default_value = DEFAULT_LABEL_COLUMN)]
    label_column: String,
    /// Comma-separated subset of gamma, silhouette, c_index, f_measure.
    #[arg(long, value_delimiter = ',', default_value = "gamma,silhouette,c_index,f_measure")]
    indices: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_CLUSTER_CAP)]
    cluster_cap: usize,
    /// Method tag recorded in the report.
    #[arg(long, default_value = "raw")]
    method: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Scale {
    Desk,
    Paper,
}

#[derive(Debug, Args, Serialize)]
struct BenchmarkArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    setup: u8,
    /// Comma-separated r values; defaults to a coarse sweep of the setup's range.
    #[arg(long, value_delimiter = ',')]
    r: Vec<usize>,
    /// desk: 50 per group and 10 replicates; paper: 100 per group and 25.
    #[arg(long, value_enum, default_value_t = Scale::Desk)]
    scale: Scale,
    #[arg(long)]
    replicates: Option<usize>,
    /// Observations per group.
    #[arg(long)]
    n: Option<usize>,
    /// Transforms besides raw data.
    #[arg(long, value_delimiter = ',', default_value = "gp,pca,diff,rp")]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "gamma,silhouette,c_index,f_measure")]
    indices: Vec<String>,
    #[arg(long, default_value_t = 5)]
    q_min: usize,
    #[arg(long, default_value_t = 30)]
    q_max: usize,
    #[arg(long, default_value_t = 10)]
    resolution: usize,
    #[arg(long, default_value_t = 500)]
    rp_repeats: usize,
    #[arg(long, value_enum, default_value_t = RpAggregateArg::Best)]
    rp_aggregate: RpAggregateArg,
    #[arg(long, default_value_t = DEFAULT_CLUSTER_CAP)]
    cluster_cap: usize,
    /// Per-replicate optima.
    #[arg(long)]
    output: PathBuf,
    /// JSON with the experiment settings, optima and summary.
    #[arg(long)]
    summary: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum RpAggregateArg {
    Best,
    Mean,
}

#[derive(Debug, Args, Serialize)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long = "labels", default_value = DEFAULT_LABEL_COLUMN)]
    label_column: String,
    /// Comma-separated 0-based rows to draw on top.
    #[arg(long, value_delimiter = ',')]
    highlight: Vec<usize>,
    #[arg(long, default_value_t = 900)]
    width: u32,
    #[arg(long, default_value_t = 500)]
    height: u32,
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    #[arg(long, default_value = "projection index")]
    x_label: String,
    #[arg(long, default_value = "OSD")]
    y_label: String,
}

/// Files are staged in memory and written only after every computation
/// has succeeded.
#[derive(Default)]
struct Outputs(Vec<(PathBuf, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, path: &Path, bytes: Vec<u8>) {
        self.0.push((path.to_path_buf(), bytes));
    }

    fn add_json(&mut self, path: &Path, value: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(path, bytes);
        Ok(())
    }

    fn commit(self) -> Result<()> {
        for (path, bytes) in self.0 {
            write_atomic(&path, &bytes)?;
        }
        Ok(())
    }
}

/// Sidecar holding the invocation next to a CSV output.
fn meta_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn parse_indices(names: &[String]) -> Result<Vec<IndexKind>> {
    let mut out = Vec::new();
    for name in names {
        let index = IndexKind::parse(name)?;
        if !out.contains(&index) {
            out.push(index);
        }
    }
    Ok(out)
}

fn osd_kind(args: &TransformArgs) -> Result<OsdKind> {
    let kind = match args.osd {
        OsdArg::Od => OsdKind::OdOnly,
        OsdArg::Sd => OsdKind::SdOnly,
        OsdArg::Sum => match (args.od_norm, args.sd_norm) {
            (Some(od_norm), Some(sd_norm)) => OsdKind::NormalizedSum { od_norm, sd_norm },
            _ => {
                return Err(Error::InvalidConfig(
                    "--osd sum needs --od-norm and --sd-norm".into(),
                ))
            }
        },
    };
    kind.validate()?;
    Ok(kind)
}

fn transform(cli: &Cli, args: &TransformArgs) -> Result<()> {
    if args.plot.is_some() && args.method != TransformMethod::Gp {
        return Err(Error::InvalidConfig("--plot is only available for --method gp".into()));
    }
    if args.sequence.is_some() && args.method != TransformMethod::Gp {
        return Err(Error::InvalidConfig("--sequence is only available for --method gp".into()));
    }
    let osd = osd_kind(args)?;
    let x = read_data_matrix(&args.input, &args.label_column)?;
    let mut outputs = Outputs::default();
    let mut derived = serde_json::Map::new();
    derived.insert("n".into(), x.nrows().into());
    derived.insert("p".into(), x.ncols().into());

    let (names, scores, prefix) = match args.method {
        TransformMethod::Gp => {
            let cfg = SequencerConfig {
                q: args.q,
                osd_kind: osd,
                rng_seed: cli.seed,
            };
            let (seq, gp) = build_sequence(&x, &cfg)?;
            if let Some(path) = &args.plot {
                let svg = diagnostic_svg(&gp, x.labels(), &PlotSpec::default())?;
                outputs.add(path, svg.into_bytes());
            }
            if let Some(path) = &args.sequence {
                let mut bytes = seq.to_json()?.into_bytes();
                bytes.push(b'\n');
                outputs.add(path, bytes);
            }
            (gp.column_names(), gp.into_values(), "gp")
        }
        TransformMethod::Pca => {
            let model = PcaModel::fit(x.values())?;
            let k = args.k.unwrap_or(model.rank());
            derived.insert("rank".into(), model.rank().into());
            derived.insert("k".into(), k.into());
            (Vec::new(), model.transform(k)?.scores, "pc")
        }
        TransformMethod::Rp => {
            let k = args
                .k
                .ok_or_else(|| Error::InvalidConfig("--method rp needs --k".into()))?;
            (Vec::new(), random_projection(x.values(), k, cli.seed)?.scores, "rp")
        }
        TransformMethod::Diff => {
            let k = args
                .k
                .ok_or_else(|| Error::InvalidConfig("--method diff needs --k".into()))?;
            let n = x.nrows();
            let knn = args
                .knn
                .unwrap_or_else(|| ((0.02 * n as f64).round() as usize).clamp(1, n - 1));
            let model = DiffusionModel::fit(&DistanceMatrix::from_points(x.values()), knn)?;
            derived.insert("knn".into(), knn.into());
            derived.insert("epsilon".into(), model.epsilon().into());
            (Vec::new(), model.transform(k)?.scores, "dc")
        }
    };
    let names = if names.is_empty() {
        (1..=scores.ncols()).map(|j| format!("{prefix}_{j}")).collect()
    } else {
        names
    };
    derived.insert("columns".into(), scores.ncols().into());
    let csv = matrix_csv(&names, &scores, x.labels(), &args.label_column)?;
    outputs.add(&args.output, csv);
    outputs.add_json(&meta_path(&args.output), &json!({ "invocation": cli, "derived": derived }))?;
    outputs.commit()
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let setup = if args.setup == 1 { Setup::One } else { Setup::Two };
    let x = setup.generate(args.r, args.n, cli.seed)?;
    let mut outputs = Outputs::default();
    outputs.add(&args.output, data_matrix_csv(&x, &args.label_column)?);
    outputs.add_json(&meta_path(&args.output), &json!({ "invocation": cli }))?;
    outputs.commit()
}

fn evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let indices = parse_indices(&args.indices)?;
    if args.cluster_cap < 1 {
        return Err(Error::InvalidConfig("--cluster-cap must be >= 1".into()));
    }
    let x = read_data_matrix(&args.input, &args.label_column)?;
    let labels = x.labels().ok_or_else(|| {
        Error::InvalidData(format!(
            "{}: no label column '{}'",
            args.input.display(),
            args.label_column
        ))
    })?;
    let truth = PartitionLabels::from_labels(labels);
    let mut report = evaluate_scores(x.values(), &truth, &indices, args.cluster_cap.min(x.nrows()))?;
    report.method = args.method.clone();
    report.parameters.insert("invocation".into(), serde_json::to_value(cli)?);
    let mut outputs = Outputs::default();
    outputs.add_json(&args.output, &report)?;
    outputs.commit()
}

fn default_r_values(setup: Setup) -> Vec<usize> {
    match setup {
        Setup::One => vec![1, 26, 51, 76, 100],
        Setup::Two => vec![0, 150, 300, 600, 1250],
    }
}

fn benchmark(cli: &Cli, args: &BenchmarkArgs) -> Result<()> {
    let setup = if args.setup == 1 { Setup::One } else { Setup::Two };
    let r_values = if args.r.is_empty() {
        default_r_values(setup)
    } else {
        args.r.clone()
    };
    let mut spec = match args.scale {
        Scale::Desk => ExperimentSpec::desk(setup, r_values),
        Scale::Paper => ExperimentSpec::paper_scale(setup, r_values),
    };
    if let Some(n) = args.replicates {
        spec.replicates = n;
    }
    if let Some(n) = args.n {
        spec.n_per_group = n;
    }
    spec.methods = args
        .methods
        .iter()
        .map(|m| Method::parse(m))
        .collect::<Result<_>>()?;
    spec.master_seed = cli.seed;
    spec.grid = GridSpec {
        indices: parse_indices(&args.indices)?,
        gp_q: (args.q_min, args.q_max),
        resolution: args.resolution,
        rp_repeats: args.rp_repeats,
        rp_aggregate: match args.rp_aggregate {
            RpAggregateArg::Best => RpAggregate::Best,
            RpAggregateArg::Mean => RpAggregate::Mean,
        },
        cluster_cap: Some(args.cluster_cap),
        ..GridSpec::default()
    };
    let result = run_experiment(&spec)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &result.rows {
        w.serialize(row)?;
    }
    let csv = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut outputs = Outputs::default();
    outputs.add(&args.output, csv);
    outputs.add_json(&args.summary, &json!({ "invocation": cli, "result": result }))?;
    outputs.commit()
}

fn plot(cli: &Cli, args: &PlotArgs) -> Result<()> {
    let table = read_table(&args.input, &args.label_column)?;
    let gp = crate::sequencer::GpMatrix::new(table.values)?;
    let spec = PlotSpec {
        width: args.width,
        height: args.height,
        line_alpha: args.alpha,
        highlight: args.highlight.clone(),
        x_label: args.x_label.clone(),
        y_label: args.y_label.clone(),
    };
    let svg = diagnostic_svg(&gp, table.labels.as_deref(), &spec)?;
    let mut outputs = Outputs::default();
    outputs.add(&args.output, svg.into_bytes());
    outputs.add_json(&meta_path(&args.output), &json!({ "invocation": cli }))?;
    outputs.commit()
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let default_level = if matches!(cli.command, Command::Benchmark(_)) {
        "info"
    } else {
        "warn"
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level))
        .try_init();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be >= 1");
            return EXIT_USAGE;
        }
        // Fails only if the global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match &cli.command {
        Command::Transform(a) => transform(&cli, a),
        Command::Simulate(a) => simulate(&cli, a),
        Command::Evaluate(a) => evaluate(&cli, a),
        Command::Benchmark(a) => benchmark(&cli, a),
        Command::Plot(a) => plot(&cli, a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
