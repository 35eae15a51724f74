use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pushsum::config::{parse_config, Config};
use pushsum::ergodicity::{compute_k_sequence, infinite_flow_report, MixingTimeline, RenewalMode};
use pushsum::montecarlo::{run_experiment, run_trial_with_graphs, Execution};
use pushsum::output;
use pushsum::randgen;
use pushsum::stochmat::weight_from_graph;
use pushsum::verify::{self, VerifyOptions};

#[derive(Parser)]
#[command(name = "pushsum", version, about = "Push-sum consensus experiments on random directed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overrides the config
    #[arg(long, env = "PUSHSUM_SEED")]
    seed: Option<u64>,
    /// Output directory, overrides the config
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its full trace
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Trial id (selects the random stream)
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Run all trials and write the aggregate summary
    Montecarlo {
        #[command(flatten)]
        common: Common,
        /// Worker threads (1 runs sequentially)
        #[arg(long)]
        workers: Option<usize>,
        /// Also write tidy long-format plot data
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Recompute the mixing timeline and Λ from a saved simulate output
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Directory written by `simulate`
        #[arg(long)]
        trace: PathBuf,
    },
    /// Run every inequality suite on the default family matrix
    VerifyBounds {
        #[arg(long, env = "PUSHSUM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the config and the schedule assumption only
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(common: &Common) -> anyhow::Result<(Config, PathBuf)> {
    let mut cfg = parse_config(&common.config).with_context(|| format!("config {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.source.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir().to_path_buf());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok((cfg, out))
}

fn execution(workers: Option<usize>) -> anyhow::Result<Execution> {
    match workers {
        Some(0) => bail!("--workers must be at least 1"),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        w => Ok(Execution::Parallel { workers: w }),
        #[cfg(not(feature = "parallel"))]
        _ => Ok(Execution::Sequential),
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn report<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct Status<'a, T: Serialize> {
    command: &'a str,
    ok: bool,
    #[serde(flatten)]
    detail: T,
}

fn simulate(common: &Common, trial: u64) -> anyhow::Result<bool> {
    let (cfg, out) = load(common)?;
    let exp = cfg.experiment();
    exp.check()?;
    let (trace, graphs) = run_trial_with_graphs(&exp, trial)?;
    let traces = std::slice::from_ref(&trace);
    let mut w = create(&out, "trace.csv")?;
    output::write_trace(&mut w, traces)?;
    w.flush()?;
    let mut w = create(&out, "timeline.csv")?;
    output::write_timeline(&mut w, traces)?;
    w.flush()?;
    let mut w = create(&out, "graphs.csv")?;
    output::write_graphs(&mut w, &graphs)?;
    w.flush()?;

    #[derive(Serialize)]
    struct Detail<'a> {
        trial: u64,
        seed: u64,
        final_consensus_error: f64,
        truncated_timeline: bool,
        renewals: &'a [usize],
        violations: &'a [pushsum::montecarlo::Violation],
    }
    let ok = trace.conforming();
    let status = Status {
        command: "simulate",
        ok,
        detail: Detail {
            trial,
            seed: trace.seed,
            final_consensus_error: trace.records.last().map_or(0.0, |r| r.consensus_error),
            truncated_timeline: trace.timeline.truncated,
            renewals: trace.timeline.renewals(),
            violations: &trace.violations,
        },
    };
    write_json(&out, "trial.json", &status)?;
    report(&status)?;
    Ok(ok)
}

fn montecarlo(common: &Common, workers: Option<usize>, emit_plot_data: bool) -> anyhow::Result<bool> {
    let (cfg, out) = load(common)?;
    let mut exp = cfg.experiment();
    exp.execution = execution(workers)?;
    let summary = run_experiment(&exp)?;
    let mut w = create(&out, "summary.csv")?;
    output::write_summary(&mut w, &summary)?;
    w.flush()?;
    let mut w = create(&out, "summary.json")?;
    output::write_summary_json(&mut w, &cfg.family, &summary)?;
    writeln!(w)?;
    w.flush()?;
    if emit_plot_data {
        let mut w = create(&out, "plot_data.csv")?;
        output::write_plot_data(&mut w, &summary)?;
        w.flush()?;
    }

    #[derive(Serialize)]
    struct Detail<'a> {
        trials: usize,
        total_violations: usize,
        rate_rows: usize,
        rate_rows_failed: usize,
        floored_samples: u64,
        convergence_fraction: f64,
        failures: &'a [pushsum::montecarlo::TrialFailure],
    }
    let ok = summary.passed();
    let status = Status {
        command: "montecarlo",
        ok,
        detail: Detail {
            trials: summary.trials,
            total_violations: summary.total_violations,
            rate_rows: summary.rate_rows().count(),
            rate_rows_failed: summary.rate_rows().filter(|r| r.rate_ok != Some(true)).count(),
            floored_samples: summary.floored_samples,
            convergence_fraction: summary.convergence.fraction,
            failures: &summary.failures,
        },
    };
    write_json(&out, "violations.json", &status)?;
    report(&status)?;
    Ok(ok)
}

fn analyze(common: &Common, trace_dir: &Path) -> anyhow::Result<bool> {
    let (cfg, out) = load(common)?;
    let n = cfg.n();
    let graphs_path = trace_dir.join("graphs.csv");
    let file = File::open(&graphs_path).with_context(|| format!("opening {}", graphs_path.display()))?;
    let graphs = output::read_graphs(BufReader::new(file), n, cfg.source.horizon)?;
    let seq: Vec<_> = graphs.iter().map(weight_from_graph).collect();
    let timeline = compute_k_sequence(&seq, RenewalMode::Scc)?;
    let oracle_agrees = if n <= 12 {
        Some(compute_k_sequence(&seq, RenewalMode::BruteCut)? == timeline)
    } else {
        None
    };
    let flow = if n <= 12 {
        let mats: Vec<_> = seq.iter().map(|w| w.matrix().clone()).collect();
        Some(infinite_flow_report(&mats)?)
    } else {
        None
    };

    let lambdas: Vec<f64> = (0..seq.len())
        .map(|t| timeline.log_lambda_product_from_zero(t).exp())
        .collect();
    let mut w = create(&out, "lambda.csv")?;
    writeln!(w, "t,lambda_prod")?;
    for (t, l) in lambdas.iter().enumerate() {
        writeln!(w, "{},{}", t + 1, output::num(*l))?;
    }
    w.flush()?;

    let saved = trace_dir.join("trace.csv");
    let mismatches = if saved.exists() {
        Some(lambda_mismatches(&saved, &lambdas)?)
    } else {
        None
    };

    #[derive(Serialize)]
    struct Detail<'a> {
        rounds: usize,
        timeline: &'a MixingTimeline,
        oracle_agrees: Option<bool>,
        min_cumulative_cut_flow: Option<f64>,
        min_cut_flow_slope: Option<f64>,
        inverse_power_sum: f64,
        lambda_mismatches: Option<usize>,
    }
    let ok = oracle_agrees != Some(false) && mismatches.unwrap_or(0) == 0;
    let status = Status {
        command: "analyze",
        ok,
        detail: Detail {
            rounds: seq.len(),
            timeline: &timeline,
            oracle_agrees,
            min_cumulative_cut_flow: flow.as_ref().map(|f| f.min_flow),
            min_cut_flow_slope: flow.as_ref().map(|f| f.min_flow_slope),
            inverse_power_sum: timeline.inverse_power_sum(),
            lambda_mismatches: mismatches,
        },
    };
    write_json(&out, "analysis.json", &status)?;
    report(&status)?;
    Ok(ok)
}

/// Rows of a saved trace whose `lambda_prod` differs from the recomputed value.
fn lambda_mismatches(path: &Path, lambdas: &[f64]) -> anyhow::Result<usize> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(output::TRACE_HEADER) {
        bail!("{} is not a trace file", path.display());
    }
    let mut bad = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let t: usize = fields[1].parse()?;
        let l: f64 = fields[8].parse()?;
        match lambdas.get(t - 1) {
            Some(&expected) if output::num(expected) == output::num(l) => {}
            _ => bad += 1,
        }
    }
    Ok(bad)
}

fn verify_bounds(
    seed: u64,
    workers: Option<usize>,
    trials: usize,
    horizon: usize,
    out: Option<&Path>,
) -> anyhow::Result<bool> {
    if trials == 0 || horizon == 0 {
        bail!("--trials and --horizon must be at least 1");
    }
    let opts = VerifyOptions {
        seed,
        trials,
        horizon,
        execution: execution(workers)?,
    };
    let result = verify::run_all(&opts)?;
    let ok = result.passed();
    let status = Status {
        command: "verify-bounds",
        ok,
        detail: &result,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_json(dir, "verify.json", &status)?;
    }
    report(&status)?;
    Ok(ok)
}

fn validate(path: &Path) -> anyhow::Result<bool> {
    let cfg = parse_config(path).with_context(|| format!("config {}", path.display()))?;
    let r = randgen::validate(&cfg.family, cfg.source.horizon);
    #[derive(Serialize)]
    struct Detail {
        n: usize,
        checked_until: usize,
        certifies_all_time: bool,
        issue_count: usize,
        /// first 20
        issues: Vec<String>,
    }
    let ok = r.is_valid();
    report(&Status {
        command: "validate",
        ok,
        detail: Detail {
            n: cfg.n(),
            checked_until: r.checked_until,
            certifies_all_time: r.certifies_all_time,
            issue_count: r.issues.len(),
            issues: r.issues.iter().take(20).map(ToString::to_string).collect(),
        },
    })?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, trial } => simulate(common, *trial),
        Command::Montecarlo {
            common,
            workers,
            emit_plot_data,
        } => montecarlo(common, *workers, *emit_plot_data),
        Command::Analyze { common, trace } => analyze(common, trace),
        Command::VerifyBounds {
            seed,
            workers,
            trials,
            horizon,
            out,
        } => verify_bounds(*seed, *workers, *trials, *horizon, out.as_deref()),
        Command::Validate { config } => validate(config),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
