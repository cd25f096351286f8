//! `gridfreq`: command-line front end for the frequency analysis battery.
//!
//! Exit codes: 0 success, 1 partial result (skipped analyses or dropped
//! rows), 2 fatal error.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gridfreq::report::{characterize, compare, AnalysisConfig, CharacterizationReport};
use gridfreq::series::{ingest_csv, IngestConfig, SegmentedSeries};
use gridfreq::synth::{generate, Mixture, ModelConfig, ModelKind};
use gridfreq::{acf, dfa, dip_statistic, dip_test, fit_exp_decay, increment_report, kde, lt_rmse, moments};

const THREADS_ENV: &str = "GRIDFREQ_THREADS";

#[derive(Parser, Debug)]
#[command(name = "gridfreq", version, about = "Stochastic characterization of power-grid frequency recordings")]
struct Cli {
    /// Seed for every randomized step (surrogates, bootstrap, synthesis).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` file with analysis parameters; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write results into this directory instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Sampling interval of the input in seconds.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Largest tolerated gap in seconds before a recording is split.
    #[arg(long, global = true)]
    max_gap: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Input {
    /// `timestamp,frequency` CSV file, or `-` for standard input.
    input: PathBuf,
    /// Region label; defaults to the file name without extension.
    #[arg(long)]
    region: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate and segment a recording.
    Ingest(Input),
    /// Moments of the frequency distribution.
    Stats(Input),
    /// Kernel density estimate of the frequency distribution.
    Density {
        #[command(flatten)]
        input: Input,
        /// Bandwidth in Hz (Silverman's rule if omitted).
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Dip statistic of unimodality.
    Dip {
        #[command(flatten)]
        input: Input,
        /// Bootstrap replicates for a p-value against uniform samples.
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Increment distribution at a lag.
    Increments {
        #[command(flatten)]
        input: Input,
        /// Lag in seconds.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Time-reversal linearity test against phase surrogates.
    Linearity {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        surrogates: Option<usize>,
        /// Largest lag in seconds.
        #[arg(long)]
        max_lag: Option<f64>,
    },
    /// Autocorrelation and exponential decay fit.
    Acf {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        max_lag: Option<f64>,
        #[arg(long)]
        fit_window: Option<f64>,
    },
    /// Detrended fluctuation analysis.
    Dfa {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        min_scale: Option<usize>,
        #[arg(long)]
        max_scale: Option<usize>,
        #[arg(long)]
        scales: Option<usize>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Generate a synthetic recording as `timestamp,frequency` CSV.
    Synth(SynthArgs),
    /// Run the whole battery and emit a report.
    Characterize(Input),
    /// Rank several reports produced by `characterize`.
    Compare {
        /// Report JSON files.
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value = "ou")]
    kind: String,
    #[arg(long, default_value_t = 0.01)]
    theta: f64,
    #[arg(long, default_value_t = 50.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.002)]
    sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    hurst: f64,
    /// Deadband half-width in Hz.
    #[arg(long, default_value_t = 0.0)]
    deadband: f64,
    /// Mixture centers in Hz, comma separated.
    #[arg(long, value_delimiter = ',')]
    centers: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    widths: Vec<f64>,
    #[arg(long, default_value_t = 86_400)]
    n: usize,
    /// Unix time of the first sample.
    #[arg(long, default_value_t = 0.0)]
    start: f64,
}

/// A document to emit: JSON payload plus optional plot-ready CSV tables.
struct Emission {
    name: &'static str,
    json: serde_json::Value,
    tables: Vec<(&'static str, String)>,
    default_format: Format,
    partial: bool,
}

impl Emission {
    fn new(name: &'static str, value: &impl Serialize) -> Result<Self> {
        Ok(Self { name, json: serde_json::to_value(value)?, tables: Vec::new(), default_format: Format::Json, partial: false })
    }

    fn table(mut self, suffix: &'static str, csv: String) -> Self {
        self.tables.push((suffix, csv));
        self
    }
}

fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn key_value_csv(json: &serde_json::Value) -> String {
    let mut out = String::from("key,value\n");
    if let Some(map) = json.as_object() {
        for (k, v) in map {
            if !v.is_object() && !v.is_array() {
                out.push_str(&format!("{k},{}\n", v.to_string().trim_matches('"')));
            }
        }
    }
    out
}

fn json_text(value: &serde_json::Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn emit(e: &Emission, format: Option<Format>, output: Option<&Path>) -> Result<()> {
    match output {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            fs::write(dir.join(format!("{}.json", e.name)), json_text(&e.json)?)?;
            for (suffix, table) in &e.tables {
                fs::write(dir.join(format!("{}_{suffix}.csv", e.name)), table)?;
            }
        }
        None => {
            let text = match format.unwrap_or(e.default_format) {
                Format::Json => json_text(&e.json)?,
                Format::Csv => e.tables.first().map_or_else(|| key_value_csv(&e.json), |t| t.1.clone()),
            };
            io::stdout().lock().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<AnalysisConfig> {
    let mut config = AnalysisConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        config.apply_text(&text)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dt) = cli.dt {
        config.dt = dt;
    }
    if cli.max_gap.is_some() {
        config.max_gap = cli.max_gap;
    }
    Ok(config)
}

fn read_input(input: &Input, config: &AnalysisConfig) -> Result<SegmentedSeries> {
    let region = input.region.clone().unwrap_or_else(|| {
        input.input.file_stem().map_or_else(|| "stdin".into(), |s| s.to_string_lossy().into_owned())
    });
    let ingest = IngestConfig { dt: config.dt, max_gap: config.max_gap, region, ..IngestConfig::default() };
    let mut data = if input.input.as_os_str() == "-" {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf)?;
        ingest_csv(buf.as_slice(), &ingest)?
    } else {
        let file = fs::File::open(&input.input).with_context(|| format!("opening {}", input.input.display()))?;
        ingest_csv(io::BufReader::new(file), &ingest)?
    };
    data.source = input.input.display().to_string();
    Ok(data)
}

fn fmt(v: f64) -> String {
    v.to_string()
}

#[derive(Serialize)]
struct SegmentInfo {
    start: f64,
    end: f64,
    len: usize,
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    source: &'a str,
    region: &'a str,
    n_samples: usize,
    dt: f64,
    segments: Vec<SegmentInfo>,
    dropped_samples: usize,
    isolated_samples: usize,
    row_errors: &'a [gridfreq::error::RowError],
}

fn run(cli: &Cli) -> Result<bool> {
    let mut config = load_config(cli)?;
    let emission = match &cli.command {
        Command::Ingest(input) => {
            let data = read_input(input, &config)?;
            let segments: Vec<SegmentInfo> =
                data.segments.iter().map(|s| SegmentInfo { start: s.start_epoch, end: s.end_epoch(), len: s.len() }).collect();
            let table = csv_table(
                &["start", "end", "len"],
                segments.iter().map(|s| vec![fmt(s.start), fmt(s.end), s.len.to_string()]),
            );
            let summary = IngestSummary {
                source: &data.source,
                region: data.region(),
                n_samples: data.total_len(),
                dt: config.dt,
                segments,
                dropped_samples: data.dropped_samples,
                isolated_samples: data.isolated_samples,
                row_errors: &data.row_errors,
            };
            let mut e = Emission::new("ingest", &summary)?.table("segments", table);
            e.partial = data.dropped_samples > 0 || data.isolated_samples > 0;
            e
        }
        Command::Stats(input) => {
            let data = read_input(input, &config)?;
            Emission::new("stats", &moments(&data.pooled_values())?)?
        }
        Command::Density { input, bandwidth } => {
            let data = read_input(input, &config)?;
            let d = kde(&data.pooled_values(), bandwidth.or(config.bandwidth))?;
            let table = csv_table(&["frequency", "density"], d.grid.iter().zip(&d.density).map(|(g, p)| vec![fmt(*g), fmt(*p)]));
            let mut e = Emission::new("density", &d)?.table("density", table);
            e.default_format = Format::Csv;
            e
        }
        Command::Dip { input, bootstrap } => {
            let data = read_input(input, &config)?;
            let values = data.pooled_values();
            let replicates = bootstrap.unwrap_or(config.dip_bootstrap);
            let r = if replicates > 0 { dip_test(&values, replicates, config.seed)? } else { dip_statistic(&values)? };
            Emission::new("dip", &r)?
        }
        Command::Increments { input, tau, bandwidth } => {
            let data = read_input(input, &config)?;
            let r = increment_report(&data, tau.unwrap_or(config.tau), bandwidth.or(config.bandwidth))?;
            let table = csv_table(
                &["increment", "density"],
                r.density.grid.iter().zip(&r.density.density).map(|(g, p)| vec![fmt(*g), fmt(*p)]),
            );
            Emission::new("increments", &r)?.table("density", table)
        }
        Command::Linearity { input, surrogates, max_lag } => {
            let data = read_input(input, &config)?;
            config.n_surrogates = surrogates.unwrap_or(config.n_surrogates);
            config.lt_max_lag = max_lag.unwrap_or(config.lt_max_lag);
            let longest = data.longest().context("no segments")?;
            let r = lt_rmse(longest, &config.linearity_config(), config.seed)?;
            let table = csv_table(
                &["lag", "lt_data", "lt_surrogate_mean"],
                (0..r.lags.len()).map(|i| vec![fmt(r.lags[i]), fmt(r.lt_data[i]), fmt(r.lt_surrogate_mean[i])]),
            );
            Emission::new("linearity", &r)?.table("lt", table)
        }
        Command::Acf { input, max_lag, fit_window } => {
            let data = read_input(input, &config)?;
            let max_lag = max_lag.unwrap_or(config.acf_max_lag);
            let window = fit_window.unwrap_or(config.fit_window.min(max_lag));
            let a = acf(&data, max_lag)?;
            let fit = fit_exp_decay(&a, window);
            let table = csv_table(&["lag", "acf"], a.lags.iter().zip(&a.acf).map(|(l, v)| vec![fmt(*l), fmt(*v)]));
            let partial = fit.is_err();
            #[derive(Serialize)]
            struct AcfOutput {
                acf: gridfreq::AcfResult,
                fit: gridfreq::Outcome<gridfreq::ExpDecayFit>,
            }
            let mut e = Emission::new("acf", &AcfOutput { acf: a, fit: fit.into() })?.table("acf", table);
            e.partial = partial;
            e
        }
        Command::Dfa { input, min_scale, max_scale, scales, order } => {
            let data = read_input(input, &config)?;
            config.dfa_min_scale = min_scale.unwrap_or(config.dfa_min_scale);
            config.dfa_max_scale = max_scale.or(config.dfa_max_scale);
            config.dfa_scales = scales.unwrap_or(config.dfa_scales);
            config.dfa_order = order.unwrap_or(config.dfa_order);
            let r = dfa(&data, &config.dfa_config())?;
            let table = csv_table(
                &["window", "fluctuation"],
                r.window_sizes.iter().zip(&r.fluctuation).map(|(n, f)| vec![n.to_string(), fmt(*f)]),
            );
            Emission::new("dfa", &r)?.table("fluctuation", table)
        }
        Command::Synth(args) => {
            let kind: ModelKind = args.kind.parse()?;
            let mixture = (!args.centers.is_empty()).then(|| Mixture {
                centers: args.centers.clone(),
                weights: if args.weights.is_empty() {
                    vec![1.0 / args.centers.len() as f64; args.centers.len()]
                } else {
                    args.weights.clone()
                },
                widths: args.widths.clone(),
            });
            let model = ModelConfig {
                kind,
                theta: args.theta,
                mu: args.mu,
                sigma: args.sigma,
                hurst_h: args.hurst,
                deadband_halfwidth: args.deadband,
                mixture,
                n: args.n,
                dt: config.dt,
                seed: config.seed,
            };
            let series = generate(&model)?;
            let mut csv = String::with_capacity(series.len() * 32);
            csv.push_str("timestamp,frequency\n");
            for (i, v) in series.values.iter().enumerate() {
                csv.push_str(&format!("{},{v}\n", args.start + i as f64 * series.dt));
            }
            match &cli.output {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join(format!("synthetic_{}.csv", kind.name())), csv)?;
                }
                None => io::stdout().lock().write_all(csv.as_bytes())?,
            }
            return Ok(false);
        }
        Command::Characterize(input) => {
            let data = read_input(input, &config)?;
            let report = characterize(&data, &config)?;
            let mut e = Emission::new("report", &report)?;
            e.partial = report.skipped() > 0;
            e
        }
        Command::Compare { reports } => {
            let parsed = reports
                .iter()
                .map(|p| {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<CharacterizationReport>(&text).with_context(|| format!("parsing {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            let table = compare(&parsed)?;
            let csv = table.to_csv()?;
            Emission::new("comparison", &table)?.table("rows", csv)
        }
    };
    emit(&emission, cli.format, cli.output.as_deref())?;
    Ok(emission.partial)
}

fn configure_threads() -> Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value.trim().parse().with_context(|| format!("{THREADS_ENV} must be a positive integer"))?;
        if threads == 0 {
            bail!("{THREADS_ENV} must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(&cli)) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
