mod config;
mod run;

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use cachesage::baselines::PolicyKind;
use cachesage::bench::run_bench;
use cachesage::workloads::{generate_trace, measure_trace, preset, read_trace, write_trace};
use clap::{Parser, Subcommand};

use crate::config::Overrides;

#[derive(Parser)]
#[command(name = "cachesage", version, about = "Agent-aware KV-cache policy simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (workload, policy) cell of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Seed for every generated workload.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write into a non-empty output directory.
        #[arg(long)]
        force: bool,
        /// Comma-separated policy list; overrides policy.names.
        #[arg(long)]
        policy: Option<String>,
        /// Block budget; overrides engine.budget.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Print the phi and routing-entropy report of a trace as JSON.
    Measure {
        /// Trace file (JSONL).
        trace: Option<PathBuf>,
        /// Measure a generated preset instead of a file.
        #[arg(long, conflicts_with = "trace")]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sessions: Option<u32>,
    },
    /// Time the policy hot path on a synthetic dispatch stream.
    Bench {
        #[arg(long, default_value_t = 50)]
        agents: usize,
        #[arg(long, default_value_t = 20_000)]
        dispatches: usize,
        #[arg(long, default_value_t = 8)]
        touches: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Generate a preset trace and write it as JSONL.
    GenTrace {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sessions: Option<u32>,
        /// Destination file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

/// Bad input (config, names, traces): exit 2. Anything else: exit 1.
enum Failure {
    Input(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn parse_policies(list: &str) -> Result<Vec<PolicyKind>, Failure> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind: PolicyKind = name.parse().map_err(|e: cachesage::Error| Failure::Input(e.to_string()))?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    if out.is_empty() {
        return Err(Failure::Input(format!("--policy is empty; valid policies: {}", PolicyKind::valid_names())));
    }
    Ok(out)
}

fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    force: bool,
    policy: Option<String>,
    budget: Option<usize>,
) -> Result<(), Failure> {
    let policies = policy.as_deref().map(parse_policies).transpose()?;
    let overrides = Overrides { seed, policies, budget, out_dir: out };
    let cfg = config::load(config, &overrides).map_err(|e| Failure::Input(e.to_string()))?;
    run::prepare_out_dir(&cfg.out_dir, force).map_err(|e| Failure::Input(format!("{e:#}")))?;
    let rows = run::execute(&cfg)?;
    print!("{}", run::format_table(&rows, cfg.policies[0].as_str()));
    eprintln!("wrote {}", cfg.out_dir.display());
    Ok(())
}

fn cmd_measure(
    trace: Option<PathBuf>,
    name: Option<String>,
    seed: Option<u64>,
    sessions: Option<u32>,
) -> Result<(), Failure> {
    let t = match (trace, name) {
        (Some(path), None) => {
            let f = fs::File::open(&path)
                .with_context(|| format!("opening {}", path.display()))
                .map_err(|e| Failure::Input(format!("{e:#}")))?;
            read_trace(BufReader::new(f)).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => {
            let mut spec = preset(&name).map_err(|e| Failure::Input(e.to_string()))?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(n) = sessions {
                spec.sessions = n;
            }
            generate_trace(&spec).map_err(|e| Failure::Input(e.to_string()))?
        }
        _ => return Err(Failure::Input("measure needs a trace file or --preset".into())),
    };
    let report = measure_trace(&t).map_err(|e| Failure::Input(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?);
    Ok(())
}

fn cmd_bench(agents: usize, dispatches: usize, touches: usize, seed: u64, json: bool) -> Result<(), Failure> {
    if agents < 2 || dispatches == 0 {
        return Err(Failure::Input("bench needs at least 2 agents and 1 dispatch".into()));
    }
    let r = run_bench(agents, dispatches, touches, seed);
    if json {
        println!("{}", serde_json::to_string_pretty(&r).map_err(anyhow::Error::from)?);
    } else {
        println!("agents              {}", r.agents);
        println!("observe (touch)     {:.3} us/call over {} calls", r.observe_touch_ns_mean / 1e3, r.touch_calls);
        println!("observe (dispatch)  {:.3} us/call over {} calls", r.observe_dispatch_ns_mean / 1e3, r.dispatch_calls);
        println!("observe (all)       {:.3} us/call", r.observe_ns_mean / 1e3);
        println!("score               {:.3} us/call over {} calls", r.score_ns_mean / 1e3, r.score_calls);
        println!("rebuilds            {} for {} agent changes", r.rebuilds, r.agent_changes);
        println!("state               {} bytes", r.state_bytes);
    }
    Ok(())
}

fn cmd_gen_trace(
    name: &str,
    seed: Option<u64>,
    sessions: Option<u32>,
    out: Option<PathBuf>,
    force: bool,
) -> Result<(), Failure> {
    let mut spec = preset(name).map_err(|e| Failure::Input(e.to_string()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(n) = sessions {
        spec.sessions = n;
    }
    spec.validate().map_err(|e| Failure::Input(e.to_string()))?;
    let trace = generate_trace(&spec).map_err(|e| Failure::Runtime(e.into()))?;
    match out {
        Some(path) => {
            if path.exists() && !force {
                return Err(Failure::Input(format!("{} exists; pass --force to overwrite", path.display())));
            }
            let mut w = io::BufWriter::new(fs::File::create(&path)?);
            write_trace(&trace, &mut w).map_err(|e| Failure::Runtime(e.into()))?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = io::BufWriter::new(stdout.lock());
            write_trace(&trace, &mut w).map_err(|e| Failure::Runtime(e.into()))?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, seed, out, force, policy, budget } => cmd_run(&config, seed, out, force, policy, budget),
        Command::Measure { trace, preset, seed, sessions } => cmd_measure(trace, preset, seed, sessions),
        Command::Bench { agents, dispatches, touches, seed, json } => {
            cmd_bench(agents, dispatches, touches, seed, json)
        }
        Command::GenTrace { preset, seed, sessions, out, force } => cmd_gen_trace(&preset, seed, sessions, out, force),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e))
            if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
