//! Command-line front end behind the `qgsa` binary.
//!
//! Settings resolve as flag, then `--config` file key, then built-in default.
//! The config file is plain `key = value` lines; `#` starts a comment and key
//! names are the long flag names with `-` or `_` accepted interchangeably.
//!
//! Exit codes: 0 success (possibly with warnings), 2 usage, 3 data or I/O,
//! 4 numerical failure.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use chrono::{Duration, NaiveDate};
use clap::{Args, Parser, Subcommand};

use crate::export::{read_surface_csv, write_surface_csv, ExportError, Meta};
use crate::gsa::{gsa_minimize, BundleMode, GsaError, GsaParams};
use crate::oracle::{quadratic_benchmark, valley_benchmark, weighted_l1_benchmark};
use crate::panel::{
    build_weekday_panel, generate_synthetic, parse_csv, CsvSchema, Distribution, PanelError, SyntheticSpec,
    WEEKDAY_NAMES,
};
use crate::plot::write_day_plots;
use crate::qam::{qam_fit, qam_predict, InitMode, QamConfig, QamError};
use crate::smoother::GroupKey;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Environment variable capping the worker threads of a fit; 0 means auto.
pub const THREADS_ENV: &str = "QGSA_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<PanelError> for CliError {
    fn from(e: PanelError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<GsaError> for CliError {
    fn from(e: GsaError) -> Self {
        Self::Numerical(e.to_string())
    }
}

impl From<QamError> for CliError {
    fn from(e: QamError) -> Self {
        match e {
            QamError::EmptyPanel | QamError::UnknownDay(_) => Self::Data(e.to_string()),
            QamError::Loss(_) | QamError::Smoother(crate::smoother::SmootherError::InvalidSpan(_)) => {
                Self::Usage(e.to_string())
            }
            _ => Self::Numerical(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "qgsa", version, about = "Quantile surfaces of intraday sales by gradient sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Fit an alpha-quantile surface to an hourly sales CSV.
    Fit(FitArgs),
    /// Query a fitted surface at (day, hour) pairs.
    Predict(PredictArgs),
    /// Write a synthetic hourly sales CSV.
    Simulate(SimulateArgs),
    /// Run the optimiser benchmarks and a 753×18 quantile fit.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sales CSV with date, hour and quantity columns.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key = value` settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// LOESS span.
    #[arg(long)]
    pub span: Option<f64>,
    /// Local polynomial degree (0, 1 or 2).
    #[arg(long)]
    pub degree: Option<usize>,
    /// Subgradient reduction: `avg` or `qp` (min-norm).
    #[arg(long)]
    pub mode: Option<BundleMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sampled perturbations per iteration.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Initial sampling radius, in interquartile ranges of the data.
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub tau0: Option<f64>,
    #[arg(long)]
    pub eps_min: Option<f64>,
    #[arg(long)]
    pub tau_min: Option<f64>,
    /// Sufficient-decrease constant.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Starting surface: `global` or `per-day`.
    #[arg(long)]
    pub init: Option<String>,
    /// Smoothing groups: `day` or `pooled`.
    #[arg(long)]
    pub group: Option<String>,
    /// Re-smooth the iterate after each trial step.
    #[arg(long)]
    pub resmooth: bool,
    /// Number of hour slots; defaults to the latest hour in the data.
    #[arg(long)]
    pub hours: Option<usize>,
    /// Wall-clock hour of the first slot.
    #[arg(long)]
    pub open_hour: Option<u32>,
    #[arg(long)]
    pub col_date: Option<String>,
    #[arg(long)]
    pub col_hour: Option<String>,
    #[arg(long)]
    pub col_qty: Option<String>,
    /// Write one SVG per day class.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// surface.csv written by `fit`.
    #[arg(long)]
    pub surface: PathBuf,
    /// Day classes as numbers (1 = Mon) or weekday names; comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub day: Vec<String>,
    /// Wall-clock hours, possibly fractional; comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub hour: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// `normal`, `lognormal` or `poisson`.
    #[arg(long, alias = "spec-dist", default_value = "normal")]
    pub dist: String,
    /// Base level of the hourly mean.
    #[arg(long, alias = "spec-mean", default_value_t = 10.0)]
    pub mean: f64,
    #[arg(long, alias = "spec-sd", default_value_t = 1.0)]
    pub sd: f64,
    /// Amplitude of the intraday sine profile.
    #[arg(long, alias = "spec-amplitude", default_value_t = 2.0)]
    pub amplitude: f64,
    /// Mean increment per day class.
    #[arg(long, alias = "spec-day-shift", default_value_t = 0.5)]
    pub day_shift: f64,
    #[arg(long, alias = "spec-hours", default_value_t = 17)]
    pub hours: usize,
    #[arg(long, alias = "spec-days", default_value_t = 7)]
    pub days: usize,
    /// Weeks of data, i.e. observations per cell.
    #[arg(long, alias = "spec-replicates", default_value_t = 20)]
    pub replicates: usize,
    #[arg(long, alias = "spec-seed", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, alias = "spec-open-hour", default_value_t = 6)]
    pub open_hour: u32,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Iteration cap for the small benchmark problems.
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    /// Skip the 753×18 quantile fit.
    #[arg(long)]
    pub skip_qam: bool,
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Bench(a) => cmd_bench(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qgsa: {e}");
            e.exit_code()
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "input", "out", "alpha", "span", "degree", "mode", "seed", "samples", "max_iter", "eps0", "tau0", "eps_min",
    "tau_min", "beta", "init", "group", "resmooth", "hours", "open_hour", "col_date", "col_hour", "col_qty", "plot",
    "threads",
];

/// Flat `key = value` settings.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            let key = k.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key `{}`", n + 1, k.trim())));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("config key {key} = {v}: {e}")))
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }
}

fn pick<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

fn threads_from_env(cfg: &ConfigFile) -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v} is not a thread count"))),
        Err(_) => Ok(cfg.get("threads")?.unwrap_or(0)),
    }
}

fn parse_init(s: &str) -> Result<InitMode> {
    match s.to_ascii_lowercase().as_str() {
        "global" => Ok(InitMode::GlobalConstant),
        "per-day" | "per_day" | "day" => Ok(InitMode::PerDayConstant),
        _ => Err(CliError::Usage(format!("unknown init `{s}` (global | per-day)"))),
    }
}

fn parse_group(s: &str) -> Result<GroupKey> {
    match s.to_ascii_lowercase().as_str() {
        "day" => Ok(GroupKey::Day),
        "pooled" => Ok(GroupKey::Pooled),
        _ => Err(CliError::Usage(format!("unknown group `{s}` (day | pooled)"))),
    }
}

fn create_out(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let input: PathBuf = pick(args.input.clone(), &cfg, "input")?
        .ok_or_else(|| CliError::Usage("fit needs --input".into()))?;
    let out: PathBuf = pick(args.out.clone(), &cfg, "out")?.unwrap_or_else(|| PathBuf::from("out"));
    let defaults = CsvSchema::default();
    let schema = CsvSchema {
        date_col: pick(args.col_date.clone(), &cfg, "col_date")?.unwrap_or(defaults.date_col),
        hour_col: pick(args.col_hour.clone(), &cfg, "col_hour")?.unwrap_or(defaults.hour_col),
        qty_col: pick(args.col_qty.clone(), &cfg, "col_qty")?.unwrap_or(defaults.qty_col),
        open_hour: pick(args.open_hour, &cfg, "open_hour")?.unwrap_or(defaults.open_hour),
    };

    let file = File::open(&input).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let records = parse_csv(file, &schema)?;
    if records.is_empty() {
        return Err(CliError::Data(format!("{} has no rows", input.display())));
    }
    let t_count = match pick(args.hours, &cfg, "hours")? {
        Some(h) => h,
        None => records.iter().map(|r| r.hour).max().unwrap_or(1),
    };
    let panel = build_weekday_panel(&records, t_count)?;

    let alpha = pick(args.alpha, &cfg, "alpha")?.unwrap_or(0.9);
    let mut config = QamConfig::new(alpha);
    let mode: BundleMode = pick(args.mode, &cfg, "mode")?.unwrap_or(BundleMode::Avg);
    if mode == BundleMode::Qp {
        config = config.with_qp(panel.len());
    }
    if let Some(m) = pick(args.samples, &cfg, "samples")? {
        config.gsa.m = m;
    }
    let g = &mut config.gsa;
    g.seed = pick(args.seed, &cfg, "seed")?.unwrap_or(1);
    g.max_iter = pick(args.max_iter, &cfg, "max_iter")?.unwrap_or(g.max_iter);
    g.eps0 = pick(args.eps0, &cfg, "eps0")?.unwrap_or(g.eps0);
    g.tau0 = pick(args.tau0, &cfg, "tau0")?.unwrap_or(g.tau0);
    g.eps_min = pick(args.eps_min, &cfg, "eps_min")?.unwrap_or(g.eps_min);
    g.tau_min = pick(args.tau_min, &cfg, "tau_min")?.unwrap_or(g.tau_min);
    g.beta = pick(args.beta, &cfg, "beta")?.unwrap_or(g.beta);
    let s = &mut config.smoother;
    s.span = pick(args.span, &cfg, "span")?.unwrap_or(s.span);
    s.degree = pick(args.degree, &cfg, "degree")?.unwrap_or(s.degree);
    if let Some(group) = pick(args.group.clone(), &cfg, "group")? {
        s.group_key = parse_group(&group)?;
    }
    s.resmooth_iterate = args.resmooth || cfg.flag("resmooth")?;
    s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(init) = pick(args.init.clone(), &cfg, "init")? {
        config.init = parse_init(&init)?;
    }
    config.gsa.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    config.threads = threads_from_env(&cfg)?;
    let plot = args.plot || cfg.flag("plot")?;

    let surface = qam_fit(&panel, &config)?;

    fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    let meta: Meta = vec![
        ("span".into(), config.smoother.span.to_string()),
        ("degree".into(), config.smoother.degree.to_string()),
        ("group".into(), format!("{:?}", config.smoother.group_key).to_lowercase()),
        ("mode".into(), config.gsa.bundle_mode.to_string()),
        ("samples".into(), config.gsa.m.to_string()),
        ("seed".into(), config.gsa.seed.to_string()),
        ("max_iter".into(), config.gsa.max_iter.to_string()),
        ("iterations".into(), surface.fit_log.len().to_string()),
        ("converged".into(), surface.converged().to_string()),
        ("final_loss".into(), surface.final_loss.to_string()),
    ];
    let mut w = create_out(&out.join("surface.csv"))?;
    write_surface_csv(&mut w, &surface, schema.open_hour, &meta)?;
    w.flush()?;
    let mut w = create_out(&out.join("fit_log.csv"))?;
    surface.fit_log.write_csv(&mut w)?;
    w.flush()?;
    if plot {
        let labels: Vec<String> = WEEKDAY_NAMES.iter().map(|s| s.to_string()).collect();
        write_day_plots(&out, &panel, &surface, &labels, schema.open_hour)?;
    }

    println!(
        "fitted {}-quantile surface: {} hours x {} days, {} observations",
        alpha,
        panel.t_count(),
        panel.j_count(),
        panel.len()
    );
    println!(
        "pinball loss {:.6} -> {:.6} in {} iterations",
        surface.initial_loss,
        surface.final_loss,
        surface.fit_log.len()
    );
    for w in &surface.fit_log.warnings {
        eprintln!("warning: {w}");
    }
    if !surface.converged() {
        eprintln!("==============================================================");
        eprintln!("WARNING: iteration cap reached before eps/tau fell below their");
        eprintln!("minimums; surface.csv holds the best iterate found.");
        eprintln!("==============================================================");
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// Day class from `1..=7` or an English weekday name.
pub fn parse_day(s: &str) -> Result<usize> {
    if let Ok(n) = s.trim().parse::<usize>() {
        return Ok(n);
    }
    let lower = s.trim().to_ascii_lowercase();
    const FULL: [&str; 7] = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
    FULL.iter()
        .position(|d| lower.len() >= 3 && d.starts_with(&lower))
        .map(|i| i + 1)
        .ok_or_else(|| CliError::Usage(format!("unrecognised day `{s}`")))
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let file = File::open(&args.surface).map_err(|e| CliError::Data(format!("{}: {e}", args.surface.display())))?;
    let sf = read_surface_csv(file)?;
    let days = args.day.iter().map(|d| parse_day(d)).collect::<Result<Vec<_>>>()?;
    let n = days.len().max(args.hour.len());
    if !(days.len() == n || days.len() == 1) || !(args.hour.len() == n || args.hour.len() == 1) {
        return Err(CliError::Usage(format!(
            "{} days and {} hours cannot be paired",
            days.len(),
            args.hour.len()
        )));
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "day,hour,q_hat")?;
    for k in 0..n {
        let j = days[if days.len() == 1 { 0 } else { k }];
        let hour = args.hour[if args.hour.len() == 1 { 0 } else { k }];
        if j == 0 || j > sf.surface.j_count() {
            return Err(CliError::Data(format!(
                "day {j} is not in the fitted surface (days 1..={})",
                sf.surface.j_count()
            )));
        }
        let t = hour - sf.open_hour as f64 + 1.0;
        let p = qam_predict(&sf.surface, t, j).map_err(|_| {
            CliError::Data(format!("day {j} has no fitted hours in {}", args.surface.display()))
        })?;
        if p.extrapolated {
            eprintln!("warning: hour {hour} is outside the fitted hours of day {j}; nearest endpoint used");
        }
        writeln!(out, "{j},{hour},{}", p.value)?;
    }
    Ok(())
}

/// First date written by `simulate`; a Monday, so day class `j` lands on
/// weekday `j`.
pub fn simulate_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 11, 5).expect("valid date")
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let dist: Distribution = args.dist.parse().map_err(|e: PanelError| CliError::Usage(e.to_string()))?;
    if !(1..=7).contains(&args.days) {
        return Err(CliError::Usage("--days must lie in 1..=7 (weekday classes)".into()));
    }
    if args.hours == 0 || args.replicates == 0 {
        return Err(CliError::Usage("--hours and --replicates must be positive".into()));
    }
    if args.open_hour as usize + args.hours > 24 {
        return Err(CliError::Usage("--open-hour + --hours runs past midnight".into()));
    }
    let (base, amp, shift, t_count) = (args.mean, args.amplitude, args.day_shift, args.hours);
    let mean_fn = move |t: usize, j: usize| {
        let m = base + amp * (2.0 * std::f64::consts::PI * t as f64 / t_count as f64).sin() + shift * j as f64;
        if dist == Distribution::Normal {
            m
        } else {
            m.max(0.0)
        }
    };
    let sd = args.sd;
    let spec = SyntheticSpec::new(args.hours, args.days, args.replicates, mean_fn, move |_, _| sd, dist, args.seed);
    let panel = generate_synthetic(&spec)?;

    let start = simulate_start_date();
    let mut rows = Vec::with_capacity(panel.len());
    for (t, j, range) in panel.cells() {
        for (i, &y) in panel.values()[range].iter().enumerate() {
            let date = start + Duration::days(7 * i as i64 + (j as i64 - 1));
            rows.push((date, args.open_hour as usize + t - 1, y.max(0.0)));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    let mut w = create_out(&args.out)?;
    writeln!(w, "date,hour,qty")?;
    for (date, hour, qty) in rows {
        writeln!(w, "{date},{hour},{qty}")?;
    }
    w.flush()?;
    println!("wrote {} rows to {}", panel.len(), args.out.display());
    Ok(())
}

/// One line of the benchmark report.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub task: String,
    pub mode: String,
    pub final_f: f64,
    /// Distance of the best point to the known minimiser, when there is one.
    pub x_error: Option<f64>,
    pub iterations: usize,
    pub wall_seconds: f64,
}

/// The 753-day × 18-hour panel with one observation per cell.
pub fn retail_scale_panel(seed: u64) -> std::result::Result<crate::panel::SalesPanel, PanelError> {
    let spec = SyntheticSpec::new(
        18,
        753,
        1,
        |t, j| 10.0 + 2.0 * (2.0 * std::f64::consts::PI * t as f64 / 18.0).sin() + 0.5 * ((j - 1) % 7) as f64,
        |_, _| 1.0,
        Distribution::Normal,
        seed,
    );
    generate_synthetic(&spec)
}

pub fn run_benchmarks(seed: u64, max_iter: usize, with_qam: bool) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for bench in [weighted_l1_benchmark(), valley_benchmark(), quadratic_benchmark()] {
        let dim = bench.start.len();
        for mode in [BundleMode::Qp, BundleMode::Avg] {
            let mut params = GsaParams::new(dim, mode);
            params.seed = seed;
            params.max_iter = max_iter;
            let clock = Instant::now();
            let res = gsa_minimize(&bench.objective, &bench.start, &params)?;
            let wall_seconds = clock.elapsed().as_secs_f64();
            let err = res
                .x_best
                .iter()
                .zip(&bench.minimizer)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            rows.push(BenchRow {
                task: bench.name.to_string(),
                mode: mode.to_string(),
                final_f: res.f_best,
                x_error: Some(err),
                iterations: res.log.len(),
                wall_seconds,
            });
        }
    }
    if with_qam {
        let panel = retail_scale_panel(seed)?;
        let mut config = QamConfig::new(0.9);
        config.gsa.seed = seed;
        config.threads = threads_from_env(&ConfigFile::default())?;
        let clock = Instant::now();
        let surface = qam_fit(&panel, &config)?;
        rows.push(BenchRow {
            task: "qam-753x18".into(),
            mode: config.gsa.bundle_mode.to_string(),
            final_f: surface.final_loss,
            x_error: None,
            iterations: surface.fit_log.len(),
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

pub fn bench_markdown(rows: &[BenchRow]) -> String {
    let mut s = String::from("| task | mode | final f | ‖x − x*‖ | iterations | wall s |\n|---|---|---|---|---|---|\n");
    for r in rows {
        let err = r.x_error.map_or("-".to_string(), |e| format!("{e:.3e}"));
        let _ = writeln!(
            s,
            "| {} | {} | {:.3e} | {} | {} | {:.3} |",
            r.task, r.mode, r.final_f, err, r.iterations, r.wall_seconds
        );
    }
    s
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let rows = run_benchmarks(args.seed, args.max_iter, !args.skip_qam)?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    let mut w = create_out(&args.out.join("bench.csv"))?;
    writeln!(w, "task,mode,final_f,x_error,iterations,wall_seconds")?;
    for r in &rows {
        let err = r.x_error.map_or(String::new(), |e| e.to_string());
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.task, r.mode, r.final_f, err, r.iterations, r.wall_seconds
        )?;
    }
    w.flush()?;
    let md = bench_markdown(&rows);
    fs::write(args.out.join("bench.md"), &md)?;
    print!("{md}");
    Ok(())
}
