use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use vexec::bench::{run_bench, Suite};
use vexec::exec::{execute, EngineConfig, EngineError};
use vexec::ntriples::{load, LoadError};
use vexec::operator::ExecError;
use vexec::plan::EngineMode;
use vexec::query::QueryError;
use vexec::results::{to_json, to_tsv};
use vexec::storage::TripleStore;

const EXIT_OTHER: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_UNSUPPORTED: u8 = 3;
const EXIT_MEMORY: u8 = 4;

#[derive(Parser)]
#[command(name = "vexec", version, about = "Batch and row execution of SPARQL basic graph pattern queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an N-Triples file and report the triple count.
    Load { file: PathBuf },
    /// Run a query given as a file path or inline text.
    Query(QueryArgs),
    /// Run a synthetic benchmark suite under both engines and both sizing modes.
    Bench {
        /// two_hop, selective_join, group_distinct or all.
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 2)]
        warmups: usize,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Emit the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(clap::Args)]
struct QueryArgs {
    query: String,
    /// N-Triples file to query; an empty store when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
    engine: EngineArg,
    /// Print the profiled operator tree to stderr.
    #[arg(long)]
    profile: bool,
    #[arg(long, default_value_t = 512)]
    batch_max: usize,
    #[arg(long)]
    no_adaptive: bool,
    #[arg(long, value_enum, default_value_t = OutputArg::Tsv)]
    output: OutputArg,
    /// Memory cap for blocking operators, in bytes.
    #[arg(long, env = "VEXEC_MEMORY_CAP")]
    memory_cap: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    #[value(alias = "barq")]
    Batch,
    Legacy,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputArg {
    Tsv,
    Json,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn other(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_OTHER,
            message: message.into(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::Query(QueryError::Parse { .. } | QueryError::Invalid(_)) => EXIT_PARSE,
            EngineError::Query(QueryError::Unsupported { .. }) => EXIT_UNSUPPORTED,
            EngineError::Exec(ExecError::QueryMemoryExceeded { .. }) => EXIT_MEMORY,
            EngineError::Exec(_) => EXIT_OTHER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::other(e.to_string())
    }
}

fn load_file(path: &Path) -> Result<TripleStore, Failure> {
    let f = File::open(path).map_err(|e| Failure::other(format!("{}: {e}", path.display())))?;
    Ok(load(BufReader::new(f))?)
}

fn cmd_load(file: &Path) -> Result<(), Failure> {
    let start = Instant::now();
    let st = load_file(file)?;
    println!("loaded {} triples in {:.1} ms", st.len(), start.elapsed().as_secs_f64() * 1e3);
    Ok(())
}

fn cmd_query(a: &QueryArgs) -> Result<(), Failure> {
    let text = if Path::new(&a.query).is_file() {
        std::fs::read_to_string(&a.query).map_err(|e| Failure::other(format!("{}: {e}", a.query)))?
    } else {
        a.query.clone()
    };
    let store = match &a.data {
        Some(p) => load_file(p)?,
        None => {
            let mut st = TripleStore::new();
            st.freeze();
            st
        }
    };
    let mode = match a.engine {
        EngineArg::Batch => EngineMode::Batch,
        EngineArg::Legacy => EngineMode::Legacy,
        EngineArg::Auto => EngineMode::Auto,
    };
    let mut cfg = EngineConfig::new(mode);
    if a.batch_max < cfg.exec.batch_min {
        return Err(Failure::other(format!("--batch-max must be at least {}", cfg.exec.batch_min)));
    }
    cfg.exec.batch_max = a.batch_max;
    cfg.exec.adaptive = !a.no_adaptive;
    if let Some(cap) = a.memory_cap {
        cfg.exec.memory_cap = cap;
    }
    cfg.profile = a.profile;
    let out = execute(&Arc::new(store), &text, &cfg)?;
    let body = match a.output {
        OutputArg::Tsv => to_tsv(&out.columns, &out.rows),
        OutputArg::Json => format!("{}\n", serde_json::to_string_pretty(&to_json(&out.columns, &out.rows)).unwrap()),
    };
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(body.as_bytes()).map_err(|e| Failure::other(e.to_string()))?;
    if let Some(p) = &out.profile {
        eprintln!("{}", p.render());
    }
    Ok(())
}

fn cmd_bench(suite: &str, seed: u64, scale: f64, warmups: usize, runs: usize, json: bool) -> Result<(), Failure> {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![suite.parse().map_err(Failure::other)?]
    };
    if scale.is_nan() || scale <= 0.0 {
        return Err(Failure::other("--scale must be positive"));
    }
    let mut reports = Vec::new();
    for s in suites {
        let r = run_bench(s, seed, scale, warmups, runs.max(1))?;
        if !json {
            print!("{}", r.summary());
        }
        reports.push(r);
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&reports).unwrap());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Load { file } => cmd_load(file),
        Command::Query(a) => cmd_query(a),
        Command::Bench {
            suite,
            seed,
            scale,
            warmups,
            runs,
            json,
        } => cmd_bench(suite, *seed, *scale, *warmups, *runs, *json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
