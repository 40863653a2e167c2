use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use evmix::dist_zoo::sample;
use evmix::gev_fit::BlockSize;
use evmix::harness::{
    emit_table, fit, forecast, parse_config, parse_table, read_data, render_records,
    run_experiment_detailed, EstimatorKnobs, FitSummary, KernelChoice, Method, TableFormat,
    CONFIG_HELP,
};
use evmix::DistributionSpec;

#[derive(Parser)]
#[command(
    name = "evmix",
    version,
    about = "Estimators of the distribution of the sample maximum"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write the result table.
    #[command(after_help = CONFIG_HELP)]
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value = "csv")]
        format: TableFormat,
        /// Log every replication's MISE and mixing ratio to stderr.
        #[arg(long)]
        verbose: bool,
    },
    /// Fit an estimator to newline-separated data and print a JSON summary.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Forecast horizon: number of future observations in the maximum.
        #[arg(long)]
        m: usize,
        /// ml, cv, par or np.
        #[arg(long)]
        method: Method,
        /// gaussian or epanechnikov [default: gaussian]
        #[arg(long)]
        kernel: Option<KernelChoice>,
        /// auto or a positive integer [default: auto]
        #[arg(long)]
        block_size: Option<BlockSize>,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predictive quantiles and exceedance probabilities from a saved fit.
    Forecast {
        #[arg(long)]
        fit: PathBuf,
        /// Comma-separated probabilities in (0, 1).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        probs: Vec<f64>,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        thresholds: Vec<f64>,
    },
    /// Re-render a CSV result table.
    Table {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: TableFormat,
    },
    /// Draw a sample from one of the built-in distributions.
    Sample {
        /// e.g. pareto:l=1, burr:c=0.5,l=0.5, rvonmises
        #[arg(long)]
        spec: DistributionSpec,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn simulate(
    config: &Path,
    out: &Path,
    threads: Option<usize>,
    format: TableFormat,
    verbose: bool,
) -> Result<()> {
    let cfg = parse_config(&read(config)?)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build()?;
    let (rows, records) = pool.install(|| run_experiment_detailed(&cfg))?;
    if verbose {
        let mut err = std::io::stderr().lock();
        for r in &records {
            let cell = &cfg.cells[r.cell];
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_else(|| "-".into());
            writeln!(
                err,
                "cell={} spec={} n={} m={} rep={} method={} mise={} mix={}{}",
                r.cell,
                cell.spec,
                cell.n,
                cell.m,
                r.rep,
                r.method,
                fmt(r.mise),
                fmt(r.mix),
                r.error
                    .as_ref()
                    .map(|e| format!(" error={e}"))
                    .unwrap_or_default()
            )?;
        }
    }
    for row in rows.iter().filter(|r| r.flagged()) {
        eprintln!(
            "warning: {}:{} n={} m={} {}: {} of {} replications failed",
            row.family, row.params, row.n, row.m, row.method, row.failures, row.reps
        );
    }
    fs::write(out, emit_table(&rows, format)?).with_context(|| format!("writing {}", out.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            config,
            out,
            threads,
            format,
            verbose,
        } => simulate(&config, &out, threads, format, verbose),
        Command::Fit {
            data,
            m,
            method,
            kernel,
            block_size,
            out,
        } => {
            let sample = read_data(&data)?;
            let mut knobs = EstimatorKnobs::default();
            if let Some(k) = kernel {
                knobs.kernel = k;
            }
            if let Some(b) = block_size {
                knobs.block_size = b;
            }
            let summary = fit(&sample, m, method, &knobs)?;
            let mut json = serde_json::to_string_pretty(&summary)?;
            json.push('\n');
            write_out(out.as_deref(), &json)
        }
        Command::Forecast {
            fit,
            probs,
            thresholds,
        } => {
            let summary: FitSummary = serde_json::from_str(&read(&fit)?)
                .with_context(|| format!("parsing {}", fit.display()))?;
            let report = forecast(&summary, &probs, &thresholds)?;
            let mut json = serde_json::to_string_pretty(&report)?;
            json.push('\n');
            write_out(None, &json)
        }
        Command::Table { input, format } => {
            let records = parse_table(&read(&input)?)?;
            write_out(None, &render_records(&records, format)?)
        }
        Command::Sample { spec, n, seed } => {
            let s = sample(&spec, n, seed)?;
            let mut text = String::new();
            for v in s.values() {
                text.push_str(&format!("{v:?}\n"));
            }
            write_out(None, &text)
        }
    }
}
