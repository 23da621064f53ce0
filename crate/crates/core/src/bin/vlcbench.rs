use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vlcbench::harness::{self, RunSpec, OUT_ENV};
use vlcbench::kv::{AllocationKind, KvMethod, KvPolicySpec, MergeStrategy};
use vlcbench::metrics::Agreement;
use vlcbench::sim::{ModelConfig, TaskKind, TaskParams};

#[derive(Parser)]
#[command(name = "vlcbench", version, about = "Compression policy benchmark on a toy vision-language transformer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run spec and write a results archive.
    Run {
        spec: PathBuf,
        /// Override the spec's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Comma-separated budget fractions, e.g. 0.01,0.1.
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<f64>>,
        /// Output root; the archive goes to <out>/<spec name>.
        #[arg(long, env = OUT_ENV, default_value = "vlcbench-out")]
        out: PathBuf,
    },
    /// Compute metrics for an archive and write report.json, ratios.csv
    /// and pareto.csv into it.
    Report {
        archive: PathBuf,
        /// Score loyalty by token F1 >= 0.5 instead of exact match.
        #[arg(long)]
        token_f1: bool,
    },
    /// Run one prefill and store its attention trace.
    ExportTraces {
        #[arg(long, default_value = "needle")]
        task: TaskKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML model config; defaults to the built-in toy model.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 480)]
        visual_len: usize,
        #[arg(long, default_value_t = 32)]
        text_len: usize,
        #[arg(long, env = OUT_ENV, default_value = "vlcbench-out")]
        out: PathBuf,
    },
    /// Apply a KV policy to a stored trace and print its retention plan.
    Replay {
        trace: PathBuf,
        #[arg(long, default_value = "snapkv")]
        method: String,
        #[arg(long, default_value_t = 0.05)]
        budget: f64,
        #[arg(long)]
        allocation: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        head_adaptive: bool,
        #[arg(long)]
        merge: Option<String>,
        #[arg(long)]
        window: Option<usize>,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> vlcbench::Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| vlcbench::Error::Config(format!("unknown {what} `{s}`")))
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn real_main(cli: Cli) -> vlcbench::Result<ExitCode> {
    match cli.command {
        Command::Run {
            spec,
            seed,
            jobs,
            budgets,
            out,
        } => {
            let mut spec = RunSpec::load(&spec)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(j) = jobs {
                spec.jobs = j;
            }
            if let Some(b) = budgets {
                spec.budgets = b;
            }
            spec.validate()?;
            let dir = out.join(&spec.name);
            let result = harness::run(&spec)?;
            harness::write_archive(&dir, &spec, &result)?;
            println!("{} records, {} failed cells -> {}", result.records.len(), result.failures.len(), dir.display());
            for f in &result.failures {
                eprintln!("failed: {} / {} / {}: {}", f.model, f.benchmark, f.method, f.error);
            }
            Ok(if result.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Report { archive, token_f1 } => {
            let agreement = if token_f1 { Agreement::token_f1() } else { Agreement::ExactMatch };
            let report = harness::report_archive(&archive, agreement)?;
            println!("{:<28} {:>8} {:>8} {:>8} {:>8} {:>10}", "method", "OP", "OG", "OL", "OE", "TTFT x");
            for m in &report.methods {
                let op = report.op.iter().filter(|e| e.method == m.method).map(|e| e.op).sum::<f64>()
                    / report.op.iter().filter(|e| e.method == m.method).count().max(1) as f64;
                let og = m.og.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
                println!(
                    "{:<28} {:>8.4} {:>8} {:>8.4} {:>8.3} {:>10.3}",
                    m.method, op, og, m.ol, m.oe, m.ttft_speedup
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportTraces {
            task,
            seed,
            model,
            visual_len,
            text_len,
            out,
        } => {
            let config: ModelConfig = match model {
                Some(p) => toml::from_str(&std::fs::read_to_string(p)?)?,
                None => ModelConfig::default(),
            };
            let params = TaskParams {
                visual_len,
                text_len,
                ..TaskParams::default()
            };
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("{task}-{seed}.vlct"));
            let trace = harness::export_trace(&config, task, &params, seed, &path)?;
            println!(
                "{} layers x {} heads, {} tokens -> {}",
                trace.num_layers(),
                trace.num_heads(),
                trace.seq_len(),
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay {
            trace,
            method,
            budget,
            allocation,
            alpha,
            head_adaptive,
            merge,
            window,
            out,
        } => {
            let mut spec = KvPolicySpec::new(parse_enum::<KvMethod>("method", &method)?, budget);
            spec.allocation = allocation
                .map(|a| parse_enum::<AllocationKind>("allocation", &a))
                .transpose()?;
            spec.alpha = alpha;
            spec.head_adaptive = head_adaptive;
            spec.merge = merge.map(|m| parse_enum::<MergeStrategy>("merge", &m)).transpose()?;
            spec.window = window;
            let report = harness::replay(&trace, &spec)?;
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => std::fs::write(p, json)?,
                None => {
                    let mut stdout = std::io::stdout().lock();
                    if let Err(e) = writeln!(stdout, "{json}") {
                        if e.kind() != std::io::ErrorKind::BrokenPipe {
                            return Err(e.into());
                        }
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
