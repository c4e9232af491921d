//! `hornet`: scenario runner, benchmarks, anonymity sets and wire vectors.
//!
//! Exit codes: 0 success, 1 invalid input or failed check, 2 invariant
//! violation during a scenario run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use hornet_core::simnet::{
    anonymity_set_size, run_bench, run_scenario, Scenario, Topology, TopologySpec,
};
use hornet_core::vectors;

const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(
    name = "hornet",
    version,
    about = "HORNET onion routing simulator and tools"
)]
struct Cli {
    /// Only machine-readable JSON on standard output.
    #[arg(long, global = true)]
    json: bool,
    /// Progress messages on standard error.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run or validate a scenario file.
    Scenario {
        #[command(subcommand)]
        action: ScenarioCmd,
    },
    /// Time setup and data packet processing at one node.
    Bench {
        /// Data-packet iterations; setup runs a tenth as many (at least 100).
        #[arg(long, default_value_t = 10_000)]
        iters: usize,
        #[arg(long, env = "HORNET_SEED")]
        seed: Option<u64>,
        /// Also write the report here.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Weighted anonymity set seen by an adversary on one link.
    Anonset {
        /// Topology JSON, or a scenario whose `topology` is used.
        topology: PathBuf,
        #[arg(long)]
        adversary: String,
        #[arg(long)]
        ingress: String,
        /// Known hop distance to the source.
        #[arg(long)]
        distance: Option<usize>,
    },
    /// Generate or verify golden wire vectors.
    Vectors {
        #[command(subcommand)]
        action: VectorsCmd,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    Run {
        file: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long, env = "HORNET_SEED")]
        seed: Option<u64>,
        /// Write the transcript here instead of standard output.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Write a hex dump of recorded packets here.
        #[arg(long)]
        observations: Option<PathBuf>,
    },
    Validate {
        file: PathBuf,
    },
}

#[derive(Subcommand)]
enum VectorsCmd {
    Gen {
        #[arg(long, default_value = "vectors")]
        dir: PathBuf,
    },
    Check {
        #[arg(long, default_value = "vectors")]
        dir: PathBuf,
    },
}

enum Failure {
    Invalid(String),
    Violations(u64),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Scenario::from_json(&read(path)?)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load_topology(path: &Path) -> Result<Topology, Failure> {
    let mut v: serde_json::Value = serde_json::from_str(&read(path)?)?;
    if v.get("nodes").is_none() {
        if let Some(t) = v.get_mut("topology") {
            v = t.take();
        }
    }
    let spec: TopologySpec = serde_json::from_value(v)?;
    Ok(Topology::new(spec)?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let json = cli.json;
    let verbose = cli.verbose > 0;
    match cli.command {
        Command::Scenario { action } => match action {
            ScenarioCmd::Run {
                file,
                seed,
                out,
                observations,
            } => {
                let mut sc = load_scenario(&file)?;
                if let Some(s) = seed {
                    sc.seed = s;
                }
                if verbose {
                    eprintln!("running {} with seed {}", file.display(), sc.seed);
                }
                let report = run_scenario(&sc)?;
                let text = serde_json::to_string_pretty(&report)? + "\n";
                match &out {
                    Some(p) => {
                        write(p, &text)?;
                        let summary = serde_json::json!({
                            "transcript": p,
                            "violations": report.violations(),
                        });
                        if json {
                            println!("{summary}");
                        } else {
                            println!(
                                "wrote {} ({} invariant violations)",
                                p.display(),
                                report.violations()
                            );
                        }
                    }
                    None => print!("{text}"),
                }
                if let Some(p) = observations {
                    write(&p, &report.observation_log())?;
                }
                match report.violations() {
                    0 => Ok(()),
                    n => Err(Failure::Violations(n)),
                }
            }
            ScenarioCmd::Validate { file } => {
                load_scenario(&file)?.validate()?;
                if json {
                    println!("{}", serde_json::json!({ "valid": true }));
                } else {
                    println!("{}: valid", file.display());
                }
                Ok(())
            }
        },
        Command::Bench { iters, seed, out } => {
            let report = run_bench(iters, seed.unwrap_or(DEFAULT_SEED))?;
            let text = serde_json::to_string_pretty(&report)? + "\n";
            if let Some(p) = &out {
                write(p, &text)?;
            }
            print!("{text}");
            Ok(())
        }
        Command::Anonset {
            topology,
            adversary,
            ingress,
            distance,
        } => {
            let topo = load_topology(&topology)?;
            let set = anonymity_set_size(&topo, &adversary, &ingress, distance)?;
            if json {
                println!("{}", serde_json::to_string(&set)?);
            } else {
                println!("{}", set.weight);
                if verbose {
                    eprintln!("members: {}", set.members.join(" "));
                }
            }
            Ok(())
        }
        Command::Vectors { action } => match action {
            VectorsCmd::Gen { dir } => {
                let written = vectors::write_all(&dir)?;
                if json {
                    println!("{}", serde_json::json!({ "written": written }));
                } else {
                    for p in written {
                        println!("wrote {}", p.display());
                    }
                }
                Ok(())
            }
            VectorsCmd::Check { dir } => {
                let report = vectors::check_all(&dir)?;
                if json {
                    println!("{}", serde_json::to_string(&report)?);
                } else {
                    for n in &report.matched {
                        println!("ok       {n}");
                    }
                    for n in &report.mismatched {
                        println!("MISMATCH {n}");
                    }
                    for n in &report.missing {
                        println!("MISSING  {n}");
                    }
                }
                if report.ok() {
                    Ok(())
                } else {
                    Err(Failure::Invalid("golden vectors differ".into()))
                }
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Violations(n)) => {
            eprintln!("{n} invariant violations");
            ExitCode::from(2)
        }
    }
}
