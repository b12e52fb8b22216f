use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tslab_bench::config::{RunConfig, Task};
use tslab_bench::run;
use tslab_core::eval::ThresholdMode;

#[derive(Parser)]
#[command(name = "bench", about = "Evaluate forecasters and anomaly detectors on CSV datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forecasting benchmark.
    Forecast(Common),
    /// Anomaly detection benchmark.
    Anomaly {
        #[command(flatten)]
        common: Common,
        /// Calibrated score threshold.
        #[arg(long)]
        threshold: Option<f64>,
        /// Candidates needed inside the alert window before an alert fires.
        #[arg(long)]
        min_alerts: Option<usize>,
        /// Alert window in seconds.
        #[arg(long)]
        alert_window: Option<i64>,
        /// Dead time after an alert in seconds.
        #[arg(long)]
        suppress: Option<i64>,
        /// fixed, optimize-on-train or optimize-on-test.
        #[arg(long, value_parser = parse_mode)]
        threshold_mode: Option<ThresholdMode>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads.
    #[arg(long, env = "BENCH_JOBS", default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config, defaults to ./bench-out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_plots: bool,
}

fn parse_mode(s: &str) -> Result<ThresholdMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let (task, common) = match &cli.command {
        Command::Forecast(c) => (Task::Forecast, c),
        Command::Anomaly { common, .. } => (Task::Anomaly, common),
    };
    let mut resolved = RunConfig::from_file(&common.config)?;
    let cfg = &mut resolved.config;
    if cfg.task != task {
        anyhow::bail!("config is for the {:?} task", cfg.task);
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.no_plots |= common.no_plots;
    if let Command::Anomaly {
        threshold,
        min_alerts,
        alert_window,
        suppress,
        threshold_mode,
        ..
    } = &cli.command
    {
        let rule = &mut cfg.threshold;
        rule.threshold = threshold.unwrap_or(rule.threshold);
        rule.min_alerts = min_alerts.unwrap_or(rule.min_alerts);
        rule.alert_window = alert_window.unwrap_or(rule.alert_window);
        rule.suppress = suppress.unwrap_or(rule.suppress);
        rule.validate()?;
        if let Some(m) = threshold_mode {
            cfg.threshold_mode = *m;
        }
    }
    let out = common.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("bench-out"));
    let report = run::run(&resolved, common.jobs, &out)?;

    let primary = task.primary_metric();
    for a in report.aggregates.iter().filter(|a| a.metric == primary) {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("{:<24} {primary} mean {} median {} (n={})", a.model, show(a.mean), show(a.median), a.count);
    }
    let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} series/model pairs failed; see {}", out.join(run::RESULTS_CSV).display());
    }
    Ok(())
}
