//! The `hdse` command-line front end.
//!
//! Exit codes: 0 success (or "distinguished" for `gdwl`), 1 negative
//! verdict, 2 I/O or parse failure, 3 invalid configuration. Payloads go to
//! files or standard output; diagnostics go to standard error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::attention::train::{metrics_csv, train_demo, DemoConfig, DemoEncoding};
use crate::coarsening::{Algorithm, CoarsenError, Hierarchy, HierarchyConfig};
use crate::distance::{hdse, high_level_hdse, CodeTensor, DistanceError};
use crate::gdwl::named::make_named_graph;
use crate::gdwl::{gd_wl_pair, EncodingKind, GdwlError, Verdict};
use crate::graph::Graph;

pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse(_) => EXIT_IO,
            CliError::Config(_) => EXIT_CONFIG,
        }
    }
}

impl From<CoarsenError> for CliError {
    fn from(e: CoarsenError) -> Self {
        match e {
            CoarsenError::InvalidHierarchy(_) | CoarsenError::Graph(_) => CliError::Parse(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<DistanceError> for CliError {
    fn from(e: DistanceError) -> Self {
        match e {
            DistanceError::Coarsen(c) => c.into(),
            DistanceError::Format(_) | DistanceError::Io(_) => CliError::Parse(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<GdwlError> for CliError {
    fn from(e: GdwlError) -> Self {
        match e {
            GdwlError::Coarsen(c) => c.into(),
            GdwlError::Distance(d) => d.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hdse", version, about = "Hierarchical distance structural encodings")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, env = "HDSE_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a coarsening hierarchy and write it as JSON.
    Coarsen(CoarsenArgs),
    /// Compute the HDSE tensor of a hierarchy file.
    Encode(EncodeArgs),
    /// Run GD-WL on two graphs; exit 0 if distinguished, 1 if not.
    Gdwl(GdwlArgs),
    /// Train the community-classification demo for each encoding.
    Demo(DemoArgs),
    /// Print a generated graph as an edge list.
    NamedGraph(NamedGraphArgs),
}

#[derive(Debug, Clone, Args)]
pub struct HierarchyArgs {
    /// louvain, newman or hem.
    #[arg(long, default_value = "louvain")]
    pub algo: String,
    /// Number of coarsening steps K.
    #[arg(long = "levels", short = 'k', default_value_t = 1)]
    pub max_level: usize,
    /// Target ratio for heavy-edge matching, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl HierarchyArgs {
    fn config(&self) -> Result<HierarchyConfig, CliError> {
        let algo: Algorithm = self.algo.parse()?;
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(CliError::Config(format!("--ratio must lie in (0, 1), got {}", self.ratio)));
        }
        Ok(HierarchyConfig::new(algo, self.max_level).ratio(self.ratio).seed(self.seed))
    }
}

#[derive(Debug, Args)]
pub struct CoarsenArgs {
    /// Input graph: `.json`, otherwise an edge list; `named:<name>` generates one.
    pub input: String,
    #[command(flatten)]
    pub hierarchy: HierarchyArgs,
    /// Hierarchy JSON destination (default: standard output).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TensorFormat {
    Bin,
    Json,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Hierarchy JSON written by `coarsen`.
    pub hierarchy: PathBuf,
    /// Clip length L.
    #[arg(long, default_value_t = 30)]
    pub clip: usize,
    /// Emit the high-level tensor with clusters of this level as columns.
    #[arg(long)]
    pub base_level: Option<usize>,
    #[arg(long, value_enum, default_value_t = TensorFormat::Bin)]
    pub format: TensorFormat,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairEncodingArg {
    Spd,
    Hdse,
}

#[derive(Debug, Args)]
pub struct GdwlArgs {
    pub first: String,
    pub second: String,
    #[arg(long = "enc", value_enum, default_value_t = PairEncodingArg::Hdse)]
    pub encoding: PairEncodingArg,
    #[arg(long, default_value = "newman")]
    pub algo: String,
    #[arg(long = "levels", short = 'k', default_value_t = 1)]
    pub max_level: usize,
    #[arg(long, default_value_t = 30)]
    pub clip: usize,
    #[arg(long, default_value_t = 0.5)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coarsening seeds `seed, seed+1, …` to check the verdict against.
    #[arg(long, default_value_t = 3)]
    pub stability_seeds: u64,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Number of seeds, `0..seeds`.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 20)]
    pub graphs: usize,
    #[arg(long, default_value_t = 30)]
    pub nodes: usize,
    #[arg(long, default_value_t = 2.0)]
    pub feature_signal: f64,
    #[arg(long = "levels", short = 'k', default_value_t = 1)]
    pub max_level: usize,
    #[arg(long, default_value = "louvain")]
    pub algo: String,
    #[arg(long, default_value_t = 30)]
    pub clip: usize,
    #[arg(long)]
    pub shuffle_labels: bool,
    /// Accuracy table destination (default: standard output).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Directory for per-run metric CSVs and JSON checkpoints.
    #[arg(long)]
    pub runs_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NamedGraphArgs {
    /// dodecahedron, desargues, cycle:N, barbell:K or community:N:P:Q:SEED.
    pub name: String,
    #[arg(long)]
    pub json: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn emit(output: Option<&Path>, out: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    match output {
        Some(path) => write(path, bytes),
        None => out
            .write_all(bytes)
            .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source }),
    }
}

/// Loads `named:<name>`, a `.json` graph, or an edge list.
pub fn load_graph(source: &str) -> Result<Graph, CliError> {
    if let Some(name) = source.strip_prefix("named:") {
        return make_named_graph(name).map_err(|e| CliError::Config(e.to_string()));
    }
    let path = Path::new(source);
    let text = read(path)?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        Graph::from_json(&text)
    } else {
        Graph::from_edge_list(&text)
    };
    parsed.map_err(|e| CliError::Parse(format!("{source}: {e}")))
}

fn cmd_coarsen(args: &CoarsenArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let config = args.hierarchy.config()?;
    let g = load_graph(&args.input)?;
    let h = Hierarchy::build(&g, &config)?;
    let json = h.to_json();
    emit(args.output.as_deref(), out, json.as_bytes())?;
    // With the payload on stdout the summary moves to stderr.
    let summary: &mut dyn Write = if args.output.is_some() { out } else { err };
    for (k, level) in h.levels().iter().enumerate() {
        let ratio = if k == 0 { 1.0 } else { h.ratios()[k - 1] };
        let _ = writeln!(summary, "level {k}: {} nodes, ratio {ratio:.4}", level.num_nodes());
    }
    Ok(0)
}

fn cmd_encode(args: &EncodeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let text = read(&args.hierarchy)?;
    let h = Hierarchy::from_json(&text).map_err(|e| CliError::Parse(format!("{}: {e}", args.hierarchy.display())))?;
    let tensor: CodeTensor = match args.base_level {
        None => hdse(&h, args.clip)?.0,
        Some(c) => high_level_hdse(&h, c, args.clip)?.codes,
    };
    let bytes = match args.format {
        TensorFormat::Bin => tensor.to_binary(),
        TensorFormat::Json => tensor.to_debug_json().into_bytes(),
    };
    write(&args.output, &bytes)?;
    let (rows, cols, levels) = tensor.dims();
    let _ = writeln!(out, "{rows} x {cols} x {levels}");
    Ok(0)
}

#[derive(Serialize)]
struct SeedVerdict {
    seed: u64,
    distinguished: bool,
}

#[derive(Serialize)]
struct GdwlReport<'a> {
    encoding: &'a str,
    #[serde(flatten)]
    verdict: &'a Verdict,
    /// Verdicts for further coarsening seeds; empty for SPD.
    seed_stability: Vec<SeedVerdict>,
    /// Whether the verdict flips between coarsening seeds.
    seed_dependent: bool,
}

fn cmd_gdwl(args: &GdwlArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let g1 = load_graph(&args.first)?;
    let g2 = load_graph(&args.second)?;
    let (encoding, base) = match args.encoding {
        PairEncodingArg::Spd => ("spd", EncodingKind::Spd),
        PairEncodingArg::Hdse => {
            let algo: Algorithm = args.algo.parse()?;
            if !(args.ratio > 0.0 && args.ratio < 1.0) {
                return Err(CliError::Config(format!("--ratio must lie in (0, 1), got {}", args.ratio)));
            }
            let kind =
                EncodingKind::Hdse { max_level: args.max_level, algo, clip: args.clip, seed: args.seed, ratio: args.ratio };
            ("hdse", kind)
        }
    };
    let verdict = gd_wl_pair(&g1, &g2, &base)?;
    let mut seed_stability = Vec::new();
    if args.encoding == PairEncodingArg::Hdse {
        for seed in args.seed..args.seed + args.stability_seeds {
            let distinguished = if seed == args.seed {
                verdict.distinguished
            } else {
                gd_wl_pair(&g1, &g2, &base.with_seed(seed))?.distinguished
            };
            seed_stability.push(SeedVerdict { seed, distinguished });
        }
    }
    let seed_dependent = seed_stability.iter().any(|s| s.distinguished != verdict.distinguished);
    if seed_dependent {
        let _ = writeln!(err, "warning: verdict depends on the coarsening seed");
    }
    let report = GdwlReport { encoding, verdict: &verdict, seed_stability, seed_dependent };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let _ = writeln!(out, "{json}");
    Ok(if verdict.distinguished { 0 } else { EXIT_NEGATIVE })
}

fn cmd_demo(args: &DemoArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    if args.seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    let cfg = DemoConfig {
        num_graphs: args.graphs,
        nodes: args.nodes,
        feature_signal: args.feature_signal,
        max_level: args.max_level,
        algo: args.algo.parse()?,
        clip: args.clip,
        lr: args.lr,
        epochs: args.epochs,
        shuffle_labels: args.shuffle_labels,
        ..DemoConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(dir) = &args.runs_dir {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
    }

    let mut table = String::from("encoding");
    for seed in 0..args.seeds {
        table.push_str(&format!(",seed{seed}"));
    }
    table.push_str(",mean\n");
    let mut means = Vec::new();
    for enc in DemoEncoding::ALL {
        let mut accs = Vec::new();
        for seed in 0..args.seeds {
            let run = train_demo(&cfg, enc, seed).map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(dir) = &args.runs_dir {
                write(&dir.join(format!("{enc}_seed{seed}.csv")), metrics_csv(&run.metrics).as_bytes())?;
                write(&dir.join(format!("{enc}_seed{seed}.json")), run.model.to_json().as_bytes())?;
            }
            accs.push(run.test_accuracy);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        table.push_str(&enc.to_string());
        for a in &accs {
            table.push_str(&format!(",{a:.6}"));
        }
        table.push_str(&format!(",{mean:.6}\n"));
        means.push(mean);
    }
    emit(args.output.as_deref(), out, table.as_bytes())?;

    let (none, spd, hdse) = (means[0], means[1], means[2]);
    let ordered = hdse > none && hdse >= spd;
    let line = format!(
        "verdict: hdse {hdse:.4} {} none {none:.4}, hdse {hdse:.4} {} spd {spd:.4} -> {}",
        if hdse > none { ">" } else { "<=" },
        if hdse >= spd { ">=" } else { "<" },
        if ordered { "ordering holds" } else { "ordering does not hold" },
    );
    let verdict_sink: &mut dyn Write = if args.output.is_some() { out } else { err };
    let _ = writeln!(verdict_sink, "{line}");
    Ok(0)
}

fn cmd_named_graph(args: &NamedGraphArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let g = make_named_graph(&args.name).map_err(|e| CliError::Config(e.to_string()))?;
    let text = if args.json { g.to_json() + "\n" } else { g.to_edge_list() };
    emit(args.output.as_deref(), out, text.as_bytes())?;
    Ok(0)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            let _ = writeln!(err, "error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        // Only the first configuration in a process takes effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match &cli.command {
        Command::Coarsen(a) => cmd_coarsen(a, out, err),
        Command::Encode(a) => cmd_encode(a, out),
        Command::Gdwl(a) => cmd_gdwl(a, out, err),
        Command::Demo(a) => cmd_demo(a, out, err),
        Command::NamedGraph(a) => cmd_named_graph(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point for the binary: process arguments, real stdout/stderr.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
