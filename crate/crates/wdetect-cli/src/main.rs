//! Command-line front end: detection probability curves, density overlays and
//! the series/quadrature benchmark, written as CSV plus a JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use wdetect::pipeline::{self, BenchmarkRow, Method, Mode, PointReport, RunSpec, REFERENCE_SETTINGS};
use wdetect::Exec;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    PdPoint,
    PdVsThreshold,
    PdVsSnr,
    PdfOverlay,
    Benchmark,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Series,
    Fox,
    Quadrature,
    Mc,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExecArg {
    Sequential,
    Parallel,
}

#[derive(Debug, Parser)]
#[command(name = "wdetect", version, about = "Detection probability for Weibull-fluctuating targets")]
struct Cli {
    /// JSON run description; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    alpha_tilde: Option<f64>,
    /// Comma-separated list; one curve per value.
    #[arg(long, value_delimiter = ',')]
    omega_tilde: Option<Vec<f64>>,
    #[arg(long)]
    pulses: Option<u32>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, conflicts_with = "pfa")]
    gamma: Option<f64>,
    #[arg(long)]
    pfa: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    gamma_grid: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum)]
    exec: Option<ExecArg>,
}

const CONFIG_ERROR: u8 = 2;
const NUMERIC_ERROR: u8 = 3;

fn build_spec(cli: &Cli) -> Result<RunSpec, String> {
    let mut spec = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunSpec::default(),
    };
    if let Some(m) = cli.mode {
        spec.mode = match m {
            ModeArg::PdPoint => Mode::PdPoint,
            ModeArg::PdVsThreshold => Mode::PdVsThreshold,
            ModeArg::PdVsSnr => Mode::PdVsSnr,
            ModeArg::PdfOverlay => Mode::PdfOverlay,
            ModeArg::Benchmark => Mode::Benchmark,
        };
    }
    if let Some(v) = cli.alpha_tilde {
        spec.alpha_tilde = v;
    }
    if let Some(v) = &cli.omega_tilde {
        spec.omega_tilde = v.clone();
    }
    if let Some(v) = cli.pulses {
        spec.n_pulses = v;
    }
    if let Some(v) = cli.sigma2 {
        spec.sigma2 = v;
    }
    // A threshold flag replaces whichever threshold the config carried.
    if let Some(v) = cli.gamma {
        spec.threshold = Some(v);
        spec.target_pfa = None;
    }
    if let Some(v) = cli.pfa {
        spec.target_pfa = Some(v);
        spec.threshold = None;
    }
    if let Some(v) = &cli.snr_db_grid {
        spec.snr_db_grid = v.clone();
    }
    if let Some(v) = &cli.gamma_grid {
        spec.gamma_grid = v.clone();
    }
    if let Some(m) = cli.method {
        spec.method = match m {
            MethodArg::Series => Method::Series,
            MethodArg::Fox => Method::Fox,
            MethodArg::Quadrature => Method::Quadrature,
            MethodArg::Mc => Method::Mc,
            MethodArg::All => Method::All,
        };
    }
    if let Some(v) = cli.tol {
        spec.tol = v;
    }
    if let Some(v) = cli.trials {
        spec.trials = v;
    }
    if let Some(v) = cli.seed {
        spec.seed = v;
    }
    if let Some(v) = &cli.out {
        spec.out = v.clone();
    }
    if let Some(e) = cli.exec {
        spec.exec = match e {
            ExecArg::Sequential => Exec::Sequential,
            ExecArg::Parallel => Exec::Parallel,
        };
    }
    if spec.mode != Mode::Benchmark {
        spec.validate().map_err(|e| e.to_string())?;
    }
    Ok(spec)
}

fn num(v: f64) -> String {
    format!("{v:.11e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

const POINT_HEADER: [&str; 22] = [
    "point",
    "mode",
    "n_pulses",
    "alpha_tilde",
    "omega_tilde",
    "sigma2",
    "gamma",
    "pfa",
    "snr_db",
    "eta",
    "fit_alpha",
    "fit_mu",
    "fit_omega",
    "method",
    "status",
    "value",
    "terms_used",
    "truncation_estimate",
    "mc_half_width",
    "imag_residue",
    "detail",
    "wall_time_s",
];

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::PdPoint => "pd-point",
        Mode::PdVsThreshold => "pd-vs-threshold",
        Mode::PdVsSnr => "pd-vs-snr",
        Mode::PdfOverlay => "pdf-overlay",
        Mode::Benchmark => "benchmark",
    }
}

fn write_points(path: &Path, spec: &RunSpec, reports: &[PointReport]) -> Result<usize, String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| e.to_string())?;
    w.write_record(POINT_HEADER).map_err(|e| e.to_string())?;
    let mut rows = 0;
    for rep in reports {
        let p = &rep.point;
        let lead = vec![
            p.index.to_string(),
            mode_name(spec.mode).to_string(),
            p.cfg.n_pulses.to_string(),
            num(p.target.alpha_tilde),
            num(p.target.omega_tilde),
            num(p.cfg.sigma2),
            num(p.cfg.gamma),
            num(p.pfa),
            num(p.snr_db),
            opt(rep.eta),
            opt(rep.fit.map(|q| q.alpha)),
            opt(rep.fit.map(|q| q.mu)),
            opt(rep.fit.map(|q| q.omega)),
        ];
        if let Some(err) = &rep.fit_error {
            let mut rec = lead.clone();
            rec.extend(["fit".into(), "no_convergence".into(), String::new(), String::new()]);
            rec.extend([String::new(), String::new(), String::new(), err.clone(), num(0.0)]);
            w.write_record(&rec).map_err(|e| e.to_string())?;
            rows += 1;
        }
        for m in &rep.rows {
            let mut rec = lead.clone();
            rec.extend([
                m.method.to_string(),
                m.status.clone(),
                opt(m.value),
                m.terms_used.map(|t| t.to_string()).unwrap_or_default(),
                opt(m.truncation_estimate),
                opt(m.mc_half_width),
                opt(m.imag_residue),
                m.detail.clone(),
                num(m.wall_time),
            ]);
            w.write_record(&rec).map_err(|e| e.to_string())?;
            rows += 1;
        }
    }
    w.flush().map_err(|e| e.to_string())?;
    Ok(rows)
}

fn write_benchmark(path: &Path, rows: &[BenchmarkRow]) -> Result<usize, String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| e.to_string())?;
    w.write_record([
        "setting",
        "reading",
        "n_pulses",
        "alpha_tilde",
        "mu_tilde",
        "omega_tilde",
        "gamma",
        "fit_alpha",
        "fit_mu",
        "fit_omega",
        "published_pd",
        "series",
        "quadrature",
        "difference",
        "terms_used",
        "status",
        "series_time_s",
        "quadrature_time_s",
        "time_ratio",
    ])
    .map_err(|e| e.to_string())?;
    for r in rows {
        let s = &REFERENCE_SETTINGS[r.setting - 1];
        w.write_record([
            r.setting.to_string(),
            r.reading.name().to_string(),
            s.n_pulses.to_string(),
            num(s.alpha_tilde),
            num(s.mu_tilde),
            num(s.omega_tilde),
            num(s.gamma),
            opt(r.law.map(|q| q.alpha)),
            opt(r.law.map(|q| q.mu)),
            opt(r.law.map(|q| q.omega)),
            num(r.published_pd),
            opt(r.series),
            opt(r.quadrature),
            opt(r.difference),
            r.terms_used.map(|t| t.to_string()).unwrap_or_default(),
            r.status.clone(),
            num(r.series_time),
            num(r.quadrature_time),
            opt(r.time_ratio()),
        ])
        .map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())?;
    Ok(rows.len())
}

#[derive(Serialize)]
struct Manifest<'a> {
    spec: &'a RunSpec,
    package: &'static str,
    version: &'static str,
    parallel_feature: bool,
    csv: String,
    rows: usize,
    failed_points: usize,
}

fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn run(spec: &RunSpec) -> Result<bool, String> {
    let csv_path = PathBuf::from(&spec.out);
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    }
    let (rows, failed) = if spec.mode == Mode::Benchmark {
        let rows = pipeline::benchmark(1e-4);
        (write_benchmark(&csv_path, &rows)?, 0)
    } else {
        let reports = pipeline::run_pipeline(spec).map_err(|e| e.to_string())?;
        let failed = reports.iter().filter(|r| r.has_errors()).count();
        (write_points(&csv_path, spec, &reports)?, failed)
    };
    let manifest = Manifest {
        spec,
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        parallel_feature: cfg!(feature = "parallel"),
        csv: csv_path.display().to_string(),
        rows,
        failed_points: failed,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
    fs::write(manifest_path(&csv_path), text + "\n").map_err(|e| e.to_string())?;
    eprintln!("wrote {rows} rows to {}", csv_path.display());
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let spec = match build_spec(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    match run(&spec) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some grid points failed; see the status column");
            ExitCode::from(NUMERIC_ERROR)
        }
        Err(e) => {
            eprintln!("error: {e}");
            // Grid construction only fails on inputs the validator could not see.
            ExitCode::from(CONFIG_ERROR)
        }
    }
}
