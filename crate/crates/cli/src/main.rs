mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ahd_core::ast_metric::{island_similarity, tsed_sources, SimilarityMatrix};
use ahd_core::config::{parse_overrides, ConfigError, RunConfig};
use ahd_core::problems::{baselines, generate_instances, ProblemKind, Scale};
use ahd_core::session::{self, SessionError};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ahd", version, about = "Island-model heuristic evolution with language models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Tsp,
    Kp,
    #[value(name = "bpp_online", alias = "bpp")]
    BppOnline,
}

impl From<Problem> for ProblemKind {
    fn from(p: Problem) -> Self {
        match p {
            Problem::Tsp => ProblemKind::Tsp,
            Problem::Kp => ProblemKind::Kp,
            Problem::BppOnline => ProblemKind::BppOnline,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Llm {
    Live,
    Replay,
    Synthetic,
}

#[derive(Subcommand)]
enum Cmd {
    /// Start a run. Any `--section.key value` or `section.key=value` overrides the configuration.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Problem to solve when no config file is given.
        #[arg(long, value_enum, default_value = "tsp")]
        problem: Problem,
        #[arg(long, value_enum)]
        llm: Option<Llm>,
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Append every exchange to the transcript.
        #[arg(long)]
        record: bool,
        /// Run directory (default: <output.dir>/<problem>-<unix ms>).
        #[arg(long)]
        out: Option<PathBuf>,
        overrides: Vec<String>,
    },
    /// Continue a run from its last checkpoint.
    Resume { dir: PathBuf, overrides: Vec<String> },
    /// Reference results of the built-in constructive baselines.
    Baselines {
        #[arg(long, value_enum)]
        problem: Problem,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        capacity: Option<f64>,
        #[arg(long, default_value_t = 64)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fail when the exact oracle cannot handle the size.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        json: bool,
    },
    /// Export convergence, similarity and strategy traces as CSV.
    Report {
        dir: PathBuf,
        /// Output directory (default: the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structural similarity of two sources, or a matrix over a directory.
    Tsed {
        #[arg(required_unless_present = "matrix")]
        a: Option<PathBuf>,
        #[arg(required_unless_present = "matrix")]
        b: Option<PathBuf>,
        /// Each subdirectory (or each .py file when there are none) is one population.
        #[arg(long, conflicts_with_all = ["a", "b"])]
        matrix: Option<PathBuf>,
    },
    /// Write a generated instance set as JSON.
    Gen {
        #[arg(long, value_enum)]
        problem: Problem,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        capacity: Option<f64>,
        #[arg(long, default_value_t = 64)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with its exit code.
struct Exit(u8, String);

impl From<SessionError> for Exit {
    fn from(e: SessionError) -> Self {
        Exit(e.exit_code() as u8, e.to_string())
    }
}

impl From<ConfigError> for Exit {
    fn from(e: ConfigError) -> Self {
        Exit(1, e.to_string())
    }
}

fn config_err(e: impl std::fmt::Display) -> Exit {
    Exit(1, e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> Exit {
    Exit(2, e.to_string())
}

/// Pulls `--a.b value` and `--a.b=value` out of the argument list; clap
/// never sees them.
fn split_dotted(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    let mut rest = Vec::new();
    let mut dotted = Vec::new();
    let mut it = args.into_iter().peekable();
    while let Some(a) = it.next() {
        let is_dotted = a.strip_prefix("--").is_some_and(|k| k.split('=').next().is_some_and(|k| k.contains('.')));
        if !is_dotted {
            rest.push(a);
            continue;
        }
        dotted.push(a.clone());
        if !a.contains('=') {
            if let Some(v) = it.next() {
                dotted.push(v);
            }
        }
    }
    (rest, dotted)
}

fn scale(n: usize, capacity: Option<f64>) -> Scale {
    Scale { n, capacity }
}

fn run(cmd: Cmd, dotted: Vec<String>) -> Result<(), Exit> {
    match cmd {
        Cmd::Run { config, problem, llm, transcript, record, out, overrides } => {
            let mut ov = parse_overrides(&dotted)?;
            ov.extend(parse_overrides(&overrides)?);
            if let Some(l) = llm {
                let v = match l {
                    Llm::Live => "live",
                    Llm::Replay => "replay",
                    Llm::Synthetic => "synthetic",
                };
                ov.push(("llm.transport".into(), v.into()));
            }
            if let Some(t) = transcript {
                ov.push(("llm.transcript".into(), t.display().to_string()));
            }
            if record {
                ov.push(("llm.record".into(), "true".into()));
            }
            let cfg = match config {
                Some(path) => RunConfig::load(&path, &ov)?,
                None => RunConfig::from_toml(&format!("[problem]\nkind = \"{}\"\n", ProblemKind::from(problem).tag()), &ov)?,
            };
            let dir = out.unwrap_or_else(|| session::default_run_dir(&cfg));
            let done = session::start(cfg, &dir)?;
            summarize(&done);
            Ok(())
        }
        Cmd::Resume { dir, overrides } => {
            let mut ov = parse_overrides(&dotted)?;
            ov.extend(parse_overrides(&overrides)?);
            let done = session::resume(&dir, &ov)?;
            summarize(&done);
            Ok(())
        }
        Cmd::Baselines { problem, n, capacity, count, seed, exact, json } => {
            let t = baselines(problem.into(), scale(n, capacity), count, seed, exact).map_err(config_err)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&t).map_err(runtime_err)?);
            } else {
                print!("{}", t.to_text());
            }
            Ok(())
        }
        Cmd::Report { dir, out } => {
            let out = out.unwrap_or_else(|| dir.clone());
            let done = report::export(&dir, &out).map_err(config_err)?;
            for f in done.files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Cmd::Tsed { a, b, matrix } => {
            if let Some(dir) = matrix {
                print!("{}", tsed_matrix(&dir)?);
                return Ok(());
            }
            let (a, b) = (a.expect("required by clap"), b.expect("required by clap"));
            let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())));
            let score = tsed_sources(&read(&a)?, &read(&b)?).map_err(config_err)?;
            println!("{score:.6}");
            Ok(())
        }
        Cmd::Gen { problem, n, capacity, count, seed, out } => {
            let set = generate_instances(problem.into(), scale(n, capacity), count, seed).map_err(config_err)?;
            let text = serde_json::to_string(&set).map_err(runtime_err)?;
            match out {
                Some(p) => std::fs::write(&p, text + "\n").map_err(|e| runtime_err(format!("{}: {e}", p.display())))?,
                None => println!("{text}"),
            }
            Ok(())
        }
    }
}

fn py_files(dir: &Path) -> Result<Vec<PathBuf>, Exit> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| config_err(format!("{}: {e}", dir.display())))?
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "py"))
        .collect();
    files.sort();
    Ok(files)
}

fn tsed_matrix(dir: &Path) -> Result<String, Exit> {
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| config_err(format!("{}: {e}", dir.display())))?
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let groups: Vec<(String, Vec<PathBuf>)> = if subdirs.is_empty() {
        py_files(dir)?.into_iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), vec![p])).collect()
    } else {
        subdirs
            .into_iter()
            .map(|d| Ok((d.file_name().unwrap().to_string_lossy().into_owned(), py_files(&d)?)))
            .collect::<Result<_, Exit>>()?
    };
    if groups.is_empty() {
        return Err(config_err(format!("{} holds no populations", dir.display())));
    }
    let sources: Vec<Vec<String>> = groups
        .iter()
        .map(|(_, files)| files.iter().map(|f| std::fs::read_to_string(f).map_err(|e| config_err(format!("{}: {e}", f.display())))).collect())
        .collect::<Result<_, Exit>>()?;
    let k = sources.len();
    let mut rows = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let m = island_similarity(&sources[i], &sources[j]).map_err(|e| config_err(format!("{}: {e}", groups[i].0)))?;
            rows[i][j] = m;
            rows[j][i] = m;
        }
    }
    let names: Vec<String> = groups.into_iter().map(|(n, _)| n).collect();
    Ok(SimilarityMatrix::from_rows(rows).to_csv(Some(&names)))
}

fn summarize(done: &session::Finished) {
    let m = &done.manifest;
    println!("run directory: {}", done.dir.display());
    println!("generations: {}  evaluations: {}  tokens: {}", m.generations, m.evaluations, m.tokens.total());
    if let Some(b) = &m.best {
        println!("best objective: {}", b.objective);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (args, dotted) = split_dotted(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd, dotted) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
