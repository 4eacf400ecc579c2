//! The `umtr` command-line tool.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bench::{self, Suite};
use crate::dataset::{load_csv, load_schema, save_csv};
use crate::engine::{self, EngineConfig, UnmaskingModel};
use crate::error::Error;
use crate::gbdt::GbdtParams;

pub const THREADS_ENV: &str = "UMTR_THREADS";
pub const MODEL_FILE: &str = "model.umtr";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const FIT: u8 = 3;
    pub const MODEL_LOAD: u8 = 4;
    pub const SCHEMA: u8 = 5;
    pub const BENCH: u8 = 6;
}

#[derive(Debug, Parser)]
#[command(name = "umtr", version, about = "Tabular generation and imputation with boosted trees")]
pub struct Cli {
    /// Worker threads; falls back to UMTR_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV file.
    Fit(FitArgs),
    /// Sample new rows from a fitted model.
    Generate(GenerateArgs),
    /// Fill the missing cells of a CSV file, several times.
    Impute(ImputeArgs),
    /// Run a bundled case study end to end.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Column types, one `name,kind[,cardinality]` line per column.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long = "top-p", default_value_t = 0.9)]
    pub top_p: f64,
    #[arg(long, default_value_t = 50)]
    pub kdup: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = GbdtParams::default().rounds)]
    pub rounds: usize,
    #[arg(long = "max-depth", default_value_t = GbdtParams::default().max_depth)]
    pub max_depth: usize,
    #[arg(long = "learning-rate", default_value_t = GbdtParams::default().learning_rate)]
    pub learning_rate: f64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// A failure with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn data_error(e: Error) -> Failure {
    let code = match e {
        Error::Schema(_) => exit::SCHEMA,
        Error::Io { .. } => exit::IO,
        _ => exit::PARSE,
    };
    Failure::new(code, e.to_string())
}

fn io_failure(e: Error) -> Failure {
    Failure::new(exit::IO, e.to_string())
}

/// Parses `argv` and runs the command.
pub fn main_with_args(argv: Vec<String>) -> ExitCode {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::PARSE } else { exit::OK });
        }
    };
    match run(cli, &argv) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(f) => {
            eprintln!("umtr: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

pub fn thread_count(flag: Option<usize>) -> Result<usize, Failure> {
    let from_env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| Failure::new(exit::PARSE, format!("{THREADS_ENV}={v:?} is not a count")))?,
        ),
        Err(_) => None,
    };
    let n = flag
        .or(from_env)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(Failure::new(exit::PARSE, "thread count must be at least 1"));
    }
    Ok(n)
}

pub fn run(cli: Cli, argv: &[String]) -> Result<(), Failure> {
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::new(exit::IO, format!("cannot start thread pool: {e}")))?;
    let mut manifest = Manifest::new(argv, threads);
    pool.install(|| match &cli.command {
        Command::Fit(a) => cmd_fit(a, &mut manifest),
        Command::Generate(a) => cmd_generate(a, &mut manifest),
        Command::Impute(a) => cmd_impute(a, &mut manifest),
        Command::Bench(a) => cmd_bench(a, &mut manifest),
    })
}

fn load_model_file(path: &Path) -> Result<UnmaskingModel, Failure> {
    engine::load_model(path).map_err(|e| Failure::new(exit::MODEL_LOAD, format!("{}: {e}", path.display())))
}

fn cmd_fit(a: &FitArgs, manifest: &mut Manifest) -> Result<(), Failure> {
    manifest.command("fit");
    let hint = match &a.schema {
        Some(p) => {
            manifest.input("schema", p)?;
            Some(load_schema(p).map_err(data_error)?)
        }
        None => None,
    };
    manifest.input("data", &a.data)?;
    let data = load_csv(&a.data, hint.as_ref()).map_err(data_error)?;
    let config = EngineConfig {
        n_bins: a.bins,
        top_p: a.top_p,
        k_dup: a.kdup,
        alpha: a.alpha,
        seed: a.seed,
        tree: GbdtParams {
            rounds: a.rounds,
            max_depth: a.max_depth,
            learning_rate: a.learning_rate,
            ..GbdtParams::default()
        },
    };
    manifest.config(&config);
    let model = engine::fit(&data, &config).map_err(|e| Failure::new(exit::FIT, e.to_string()))?;
    engine::save_model(&model, &a.out).map_err(io_failure)?;
    manifest.output("model", &a.out)?;
    manifest.write(&sidecar(&a.out))
}

fn cmd_generate(a: &GenerateArgs, manifest: &mut Manifest) -> Result<(), Failure> {
    manifest.command("generate");
    let model = load_model_file(&a.model)?;
    manifest.input("model", &a.model)?;
    manifest.config(model.config());
    manifest.entry("seed", a.seed);
    manifest.entry("n", a.n);
    let out = engine::generate(&model, a.n, a.seed).map_err(|e| Failure::new(exit::FIT, e.to_string()))?;
    save_csv(&out, &a.out).map_err(io_failure)?;
    manifest.output("generated", &a.out)?;
    manifest.write(&sidecar(&a.out))
}

fn cmd_impute(a: &ImputeArgs, manifest: &mut Manifest) -> Result<(), Failure> {
    manifest.command("impute");
    let model = load_model_file(&a.model)?;
    manifest.input("model", &a.model)?;
    manifest.input("data", &a.data)?;
    let data = load_csv(&a.data, Some(model.schema())).map_err(data_error)?;
    manifest.config(model.config());
    manifest.entry("seed", a.seed);
    manifest.entry("m", a.m);
    let outs = engine::impute(&model, &data, a.m, a.seed).map_err(|e| match e {
        Error::Argument(msg) if msg.contains("schema") => Failure::new(exit::SCHEMA, msg),
        e => Failure::new(exit::FIT, e.to_string()),
    })?;
    create_dir(&a.out_dir)?;
    for (k, out) in outs.iter().enumerate() {
        let path = a.out_dir.join(imputed_file_name(k));
        save_csv(out, &path).map_err(io_failure)?;
        manifest.output(&format!("imputed.{k}"), &path)?;
    }
    manifest.write(&a.out_dir.join(MANIFEST_FILE))
}

fn cmd_bench(a: &BenchArgs, manifest: &mut Manifest) -> Result<(), Failure> {
    manifest.command("bench");
    manifest.entry("suite", a.suite);
    manifest.entry("seed", a.seed);
    let config = bench::default_config(a.seed);
    manifest.config(&config);
    let run = bench::run(a.suite, a.seed, &config).map_err(|e| Failure::new(exit::BENCH, e.to_string()))?;
    let stage = |stage: &str, e: Error| Failure::new(exit::BENCH, format!("stage {stage}: {e}"));
    create_dir(&a.out)?;
    let model_path = a.out.join(MODEL_FILE);
    engine::save_model(&run.model, &model_path).map_err(|e| stage("write", e))?;
    manifest.output("model", &model_path)?;
    for (name, table) in run.point_tables() {
        let path = a.out.join(&name);
        save_csv(&table, &path).map_err(|e| stage("write", e))?;
        manifest.output(&name, &path)?;
    }
    for (name, text) in [("report.txt", run.report.to_key_value()), ("report.csv", run.report.to_csv())] {
        let path = a.out.join(name);
        fs::write(&path, text).map_err(|e| stage("write", Error::io(&path, e)))?;
        manifest.output(name, &path)?;
    }
    print!("{}", run.report.to_key_value());
    manifest.write(&a.out.join(MANIFEST_FILE))
}

pub fn imputed_file_name(k: usize) -> String {
    format!("imputed_{k:03}.csv")
}

/// `<file>.manifest.txt` next to a single-file output.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.txt");
    PathBuf::from(s)
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(Error::io(dir, e)))
}

fn file_crc(path: &Path) -> Result<u32, Failure> {
    let bytes = fs::read(path).map_err(|e| io_failure(Error::io(path, e)))?;
    Ok(crc32fast::hash(&bytes))
}

/// Run record written beside the outputs: the exact argument vector, the
/// effective configuration, and CRC32 checksums of every input and output.
struct Manifest {
    started: Instant,
    lines: Vec<(String, String)>,
}

impl Manifest {
    fn new(argv: &[String], threads: usize) -> Self {
        let mut m = Manifest {
            started: Instant::now(),
            lines: Vec::new(),
        };
        m.entry("argv", shell_join(argv));
        m.entry("threads", threads);
        m.entry("version", env!("CARGO_PKG_VERSION"));
        m
    }

    fn entry(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    fn command(&mut self, name: &str) {
        self.entry("command", name);
    }

    fn config(&mut self, c: &EngineConfig) {
        self.entry("config.bins", c.n_bins);
        self.entry("config.top_p", c.top_p);
        self.entry("config.kdup", c.k_dup);
        self.entry("config.alpha", c.alpha);
        self.entry("config.seed", c.seed);
        self.entry("config.rounds", c.tree.rounds);
        self.entry("config.learning_rate", c.tree.learning_rate);
        self.entry("config.max_depth", c.tree.max_depth);
        self.entry("config.min_child_weight", c.tree.min_child_weight);
        self.entry("config.lambda", c.tree.lambda);
        self.entry("config.hist_bins", c.tree.n_hist_bins);
    }

    fn input(&mut self, key: &str, path: &Path) -> Result<(), Failure> {
        self.entry(&format!("input.{key}"), path.display());
        let crc = file_crc(path)?;
        self.entry(&format!("input.{key}.crc32"), format_args!("{crc:08x}"));
        Ok(())
    }

    fn output(&mut self, key: &str, path: &Path) -> Result<(), Failure> {
        self.entry(&format!("output.{key}"), path.display());
        let crc = file_crc(path)?;
        self.entry(&format!("output.{key}.crc32"), format_args!("{crc:08x}"));
        Ok(())
    }

    fn write(&mut self, path: &Path) -> Result<(), Failure> {
        let secs = self.started.elapsed().as_secs_f64();
        self.entry("wall_clock_seconds", format_args!("{secs:.3}"));
        let mut text = String::new();
        for (k, v) in &self.lines {
            writeln!(text, "{k} = {v}").expect("writing to a String");
        }
        fs::write(path, text).map_err(|e| io_failure(Error::io(path, e)))
    }
}

fn shell_join(argv: &[String]) -> String {
    argv.iter()
        .map(|a| {
            if !a.is_empty() && a.chars().all(|c| c.is_ascii_alphanumeric() || "-_./=:,".contains(c)) {
                a.clone()
            } else {
                format!("'{}'", a.replace('\'', r"'\''"))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}
