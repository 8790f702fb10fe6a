use std::fs;
use std::path::{Path, PathBuf};

use airq_core::harness::{
    compare_methods, merged_table, sweep_training_interval, write_plot_csv, write_report_csv,
    write_sweep_csv, Forecaster,
};
use airq_core::series::{
    format_hour, ingest_csv, interpolate_missing, write_csv, ColumnSpec, TimeSeries,
};
use airq_core::synth::generate;

use crate::args::{
    CommonArgs, CompareArgs, IngestArgs, SourceArgs, SweepArgs, SynthArgs, WindowArgs,
};
use crate::config::{FileConfig, Method, Overrides, RunConfig, Source};
use crate::error::CliError;

pub const SERIES_FILE: &str = "series.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const PLOT_FILE: &str = "plot_data.csv";

fn overrides(
    common: &CommonArgs,
    source: Option<&SourceArgs>,
    windows: Option<&WindowArgs>,
) -> Overrides {
    Overrides {
        input: source.and_then(|s| s.input.clone()),
        out_dir: common.out_dir.clone(),
        seed: common.seed,
        jobs: common.jobs,
        hours: source.and_then(|s| s.hours),
        missing_rate: source.and_then(|s| s.missing_rate),
        horizon: None,
        windows: windows.and_then(|w| w.windows),
        stride: windows.and_then(|w| w.stride),
    }
}

/// Runs `f` on a pool of `jobs` threads, or on the global pool.
fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
fn write_output(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn read_input(path: &Path, columns: &ColumnSpec) -> Result<TimeSeries, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(ingest_csv(std::io::BufReader::new(file), columns)?)
}

/// The gap-free series a run evaluates on.
fn load_series(cfg: &RunConfig) -> Result<TimeSeries, CliError> {
    let raw = match &cfg.source {
        Source::Input(path) => read_input(path, &ColumnSpec::default())?,
        Source::Synth(spec) => generate(spec)?,
    };
    if raw.is_gap_free() {
        Ok(raw)
    } else {
        Ok(interpolate_missing(&raw)?)
    }
}

fn forecaster(cfg: &RunConfig, m: Method) -> &dyn Forecaster {
    match m {
        Method::Es => &cfg.es,
        Method::Sarima => &cfg.sarima,
        Method::Lstm => &cfg.lstm,
    }
}

pub fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let input = args
        .input
        .or(file.input)
        .ok_or_else(|| CliError::Usage("ingest needs --input".into()))?;
    let out_dir = args
        .common
        .out_dir
        .or(file.out_dir)
        .unwrap_or_else(|| ".".into());
    let columns = ColumnSpec {
        timestamp: args.timestamp_col,
        value: args.value_col,
    };
    let raw = read_input(&input, &columns)?;
    let filled = raw.missing_count();
    let series = if filled == 0 {
        raw
    } else {
        interpolate_missing(&raw)?
    };
    let mut buf = Vec::new();
    write_csv(&series, &mut buf)?;
    let path = write_output(&out_dir, SERIES_FILE, &buf)?;
    println!(
        "ingested {} hours ({} to {}), filled {filled} missing values -> {}",
        series.len(),
        format_hour(series.start_hour()),
        format_hour(series.end_hour() - 1),
        path.display()
    );
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    if file.input.is_some() {
        return Err(CliError::Usage("synth does not read an input file".into()));
    }
    let source = SourceArgs {
        input: None,
        hours: args.hours,
        missing_rate: args.missing_rate,
    };
    let cfg = RunConfig::resolve(file, overrides(&args.common, Some(&source), None))?;
    let Source::Synth(spec) = &cfg.source else {
        unreachable!("no input was given")
    };
    let series = generate(spec)?;
    let mut buf = Vec::new();
    write_csv(&series, &mut buf)?;
    let path = write_output(&cfg.out_dir, SERIES_FILE, &buf)?;
    println!(
        "generated {} hours (seed {}, {} missing) -> {}",
        series.len(),
        spec.seed,
        series.missing_count(),
        path.display()
    );
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let method = args
        .method
        .or_else(|| file.method.clone())
        .ok_or_else(|| CliError::Usage("sweep needs --method".into()))?;
    let method = Method::parse(&method)?;
    let cfg = RunConfig::resolve(
        file,
        overrides(&args.common, Some(&args.source), Some(&args.windows)),
    )?;
    let candidates = match args.train_len {
        Some(list) if list.is_empty() || list.contains(&0) => {
            return Err(CliError::Usage("--train-len needs positive hours".into()))
        }
        Some(list) => list,
        None => cfg.candidates(method).to_vec(),
    };
    let series = load_series(&cfg)?;
    let report = with_jobs(cfg.jobs, || {
        sweep_training_interval(&series, forecaster(&cfg, method), &candidates, &cfg.rolling)
    })??;

    let mut buf = Vec::new();
    write_sweep_csv(std::slice::from_ref(&report), &mut buf)?;
    let path = write_output(&cfg.out_dir, SWEEP_FILE, &buf)?;
    for (len, rmse) in &report.rows {
        println!("{:>6} {len:>5} h  rmse {rmse:.4}", report.method);
    }
    println!(
        "best training interval {} h ({:.1} s) -> {}",
        report.best_train_len,
        report.elapsed_seconds,
        path.display()
    );
    Ok(())
}

pub fn compare(args: CompareArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let names = args
        .methods
        .or_else(|| file.methods.clone())
        .unwrap_or_else(|| vec!["es".into(), "arima".into(), "lstm".into()]);
    let mut methods = Vec::new();
    for name in &names {
        let m = Method::parse(name)?;
        if methods.contains(&m) {
            return Err(CliError::Usage(format!("method '{m}' listed twice")));
        }
        methods.push(m);
    }
    if methods.is_empty() {
        return Err(CliError::Usage("--methods is empty".into()));
    }
    let mut o = overrides(&args.common, Some(&args.source), Some(&args.windows));
    o.horizon = args.horizon;
    let mut cfg = RunConfig::resolve(file, o)?;
    if let Some(len) = args.train_len {
        if len == 0 {
            return Err(CliError::Usage("--train-len must be positive".into()));
        }
        cfg.es.train_len = len;
        cfg.sarima.train_len = len;
    }

    let series = load_series(&cfg)?;
    let forecasters: Vec<&dyn Forecaster> = methods.iter().map(|m| forecaster(&cfg, *m)).collect();
    let reports = with_jobs(cfg.jobs, || {
        compare_methods(&series, &forecasters, &cfg.rolling)
    })??;
    let rows = merged_table(&reports);

    let mut report = Vec::new();
    write_report_csv(&rows, &mut report)?;
    let mut plot = Vec::new();
    write_plot_csv(&rows, &mut plot)?;
    let report_path = write_output(&cfg.out_dir, REPORT_FILE, &report)?;
    write_output(&cfg.out_dir, PLOT_FILE, &plot)?;
    for r in &reports {
        println!(
            "{:>6}  h1 {:.4}  h{} {:.4}  mean {:.4}  build {:.3} s  predict {:.4} s",
            r.method,
            r.per_horizon_rmse[0],
            r.per_horizon_rmse.len(),
            r.per_horizon_rmse[r.per_horizon_rmse.len() - 1],
            r.mean_window_rmse,
            r.mean_build_seconds,
            r.mean_predict_seconds
        );
    }
    println!(
        "{} windows -> {}",
        cfg.rolling.window_count,
        report_path.parent().unwrap_or(Path::new(".")).display()
    );
    Ok(())
}
