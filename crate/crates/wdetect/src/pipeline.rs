//! End-to-end runs: moments, α-μ fit, then one or more detection routes per
//! grid point. File output lives in the command-line crate; this module only
//! produces rows.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::detection::{
    omega_for_snr, pd_quadrature, pd_series, pfa, series_applicable, snr_of, threshold_for_pfa, DetectorConfig,
    EvalResult,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fox_h::{pd_fox_with, FoxOptions};
use crate::monte_carlo::{self, SimConfig};
use crate::weibull_sum::{alpha_mu_pdf, fit_alpha_mu, AlphaMuParams, ExactSumPdf, WeibullParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    PdPoint,
    PdVsThreshold,
    PdVsSnr,
    PdfOverlay,
    Benchmark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Series,
    Fox,
    Quadrature,
    Mc,
    All,
}

impl Method {
    fn expand(self) -> Vec<Method> {
        match self {
            Method::All => vec![Method::Series, Method::Fox, Method::Quadrature, Method::Mc],
            m => vec![m],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Series => "series",
            Method::Fox => "fox",
            Method::Quadrature => "quadrature",
            Method::Mc => "mc",
            Method::All => "all",
        }
    }
}

/// Everything needed to reproduce a run. Mirrors the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub mode: Mode,
    pub alpha_tilde: f64,
    /// One scale per curve of a family.
    pub omega_tilde: Vec<f64>,
    pub n_pulses: u32,
    pub sigma2: f64,
    pub threshold: Option<f64>,
    pub target_pfa: Option<f64>,
    pub gamma_grid: Vec<f64>,
    pub snr_db_grid: Vec<f64>,
    pub method: Method,
    pub tol: f64,
    pub trials: u64,
    pub seed: u64,
    pub out: String,
    pub exec: Exec,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            mode: Mode::PdPoint,
            alpha_tilde: 0.5,
            omega_tilde: vec![2.0],
            n_pulses: 3,
            sigma2: 1.0,
            threshold: None,
            target_pfa: None,
            gamma_grid: Vec::new(),
            snr_db_grid: Vec::new(),
            method: Method::Series,
            tol: 1e-6,
            trials: 1_000_000,
            seed: 1,
            out: "wdetect.csv".into(),
            exec: Exec::default(),
        }
    }
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.alpha_tilde) {
            return Err(config("alpha_tilde must be positive"));
        }
        if self.n_pulses == 0 {
            return Err(config("n_pulses must be positive"));
        }
        if !positive(self.sigma2) {
            return Err(config("sigma2 must be positive"));
        }
        if !positive(self.tol) {
            return Err(config("tol must be positive"));
        }
        if self.trials == 0 {
            return Err(config("trials must be positive"));
        }
        if let Some(p) = self.target_pfa {
            if !(p > 0.0 && p < 1.0) {
                return Err(config("target_pfa must lie in (0, 1)"));
            }
        }
        if let Some(g) = self.threshold {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(config("threshold must be non-negative"));
            }
        }
        let one_threshold = self.threshold.is_some() != self.target_pfa.is_some();
        match self.mode {
            Mode::PdPoint | Mode::PdVsSnr if !one_threshold => {
                return Err(config("set exactly one of threshold / target_pfa"));
            }
            Mode::PdVsThreshold if self.gamma_grid.is_empty() => {
                return Err(config("pd-vs-threshold needs a non-empty gamma grid"));
            }
            Mode::PdVsThreshold if self.threshold.is_some() || self.target_pfa.is_some() => {
                return Err(config("pd-vs-threshold takes its thresholds from the grid"));
            }
            Mode::PdVsSnr if self.snr_db_grid.is_empty() => {
                return Err(config("pd-vs-snr needs a non-empty SNR grid"));
            }
            _ => {}
        }
        if matches!(self.mode, Mode::PdPoint | Mode::PdVsThreshold | Mode::PdfOverlay)
            && (self.omega_tilde.is_empty() || !self.omega_tilde.iter().all(|&o| positive(o)))
        {
            return Err(config("omega_tilde must be a non-empty list of positive values"));
        }
        if self.gamma_grid.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(config("gamma grid entries must be non-negative"));
        }
        if self.snr_db_grid.iter().any(|s| !s.is_finite()) {
            return Err(config("SNR grid entries must be finite"));
        }
        Ok(())
    }

    fn gamma(&self) -> Result<f64> {
        match (self.threshold, self.target_pfa) {
            (Some(g), None) => Ok(g),
            (None, Some(p)) => threshold_for_pfa(self.n_pulses, p),
            _ => Err(config("set exactly one of threshold / target_pfa")),
        }
    }
}

/// One grid point of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub index: usize,
    pub target: WeibullParams,
    pub cfg: DetectorConfig,
    pub snr_db: f64,
    pub pfa: f64,
}

/// Outcome of one method at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRow {
    pub method: &'static str,
    /// `ok`, an error tag, or `skipped`.
    pub status: String,
    pub detail: String,
    pub value: Option<f64>,
    pub terms_used: Option<u64>,
    pub truncation_estimate: Option<f64>,
    pub mc_half_width: Option<f64>,
    pub imag_residue: Option<f64>,
    pub wall_time: f64,
}

impl MethodRow {
    fn from_eval(method: Method, r: Result<EvalResult>) -> Self {
        match r {
            Ok(e) => MethodRow {
                method: method.name(),
                status: "ok".into(),
                detail: String::new(),
                value: Some(e.value),
                terms_used: Some(e.terms_used),
                truncation_estimate: Some(e.truncation_estimate),
                mc_half_width: None,
                imag_residue: Some(e.imag_residue),
                wall_time: e.wall_time,
            },
            Err(e) => Self::failed(method.name(), &e, 0.0),
        }
    }

    fn failed(method: &'static str, e: &Error, wall_time: f64) -> Self {
        MethodRow {
            method,
            status: e.tag().into(),
            detail: e.to_string(),
            value: None,
            terms_used: None,
            truncation_estimate: None,
            mc_half_width: None,
            imag_residue: None,
            wall_time,
        }
    }

    pub fn is_error(&self) -> bool {
        self.status != "ok" && self.status != "skipped"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub point: GridPoint,
    /// The eta at which densities are compared (overlay mode only).
    pub eta: Option<f64>,
    pub fit: Option<AlphaMuParams>,
    pub fit_error: Option<String>,
    pub rows: Vec<MethodRow>,
}

impl PointReport {
    pub fn has_errors(&self) -> bool {
        self.fit_error.is_some() || self.rows.iter().any(MethodRow::is_error)
    }
}

fn grid(spec: &RunSpec) -> Result<Vec<GridPoint>> {
    let n = spec.n_pulses;
    let mut out = Vec::new();
    let mut push = |target: WeibullParams, gamma: f64| -> Result<()> {
        let cfg = DetectorConfig::new(n, spec.sigma2, gamma)?;
        let snr = snr_of(&target, n, spec.sigma2);
        out.push(GridPoint {
            index: out.len(),
            target,
            cfg,
            snr_db: 10.0 * snr.log10(),
            pfa: pfa(&cfg)?,
        });
        Ok(())
    };
    match spec.mode {
        Mode::PdPoint | Mode::PdfOverlay => {
            let gamma = if spec.mode == Mode::PdfOverlay && spec.threshold.is_none() && spec.target_pfa.is_none() {
                0.0
            } else {
                spec.gamma()?
            };
            for &o in &spec.omega_tilde {
                push(WeibullParams::new(spec.alpha_tilde, o)?, gamma)?;
            }
        }
        Mode::PdVsThreshold => {
            for &o in &spec.omega_tilde {
                for &g in &spec.gamma_grid {
                    push(WeibullParams::new(spec.alpha_tilde, o)?, g)?;
                }
            }
        }
        Mode::PdVsSnr => {
            let gamma = spec.gamma()?;
            for &db in &spec.snr_db_grid {
                let o = omega_for_snr(spec.alpha_tilde, n, spec.sigma2, 10f64.powf(db / 10.0))?;
                push(WeibullParams::new(spec.alpha_tilde, o)?, gamma)?;
            }
        }
        Mode::Benchmark => return Err(config("benchmark mode has no grid; use benchmark()")),
    }
    Ok(out)
}

fn run_method(method: Method, point: &GridPoint, q: &AlphaMuParams, spec: &RunSpec, exec: Exec) -> MethodRow {
    let cfg = &point.cfg;
    match method {
        Method::Series => {
            if spec.method == Method::All {
                if let Err(e) = series_applicable(cfg, q) {
                    let mut row = MethodRow::failed("series", &e, 0.0);
                    row.status = "skipped".into();
                    return row;
                }
            }
            MethodRow::from_eval(method, pd_series(cfg, q, spec.tol))
        }
        Method::Quadrature => MethodRow::from_eval(method, pd_quadrature(cfg, q)),
        Method::Fox => {
            let opts = FoxOptions {
                exec,
                ..Default::default()
            };
            MethodRow::from_eval(method, pd_fox_with(cfg, q, spec.tol, &opts))
        }
        Method::Mc => {
            let started = Instant::now();
            match SimConfig::new(spec.trials, spec.seed, *cfg, Some(point.target)) {
                Ok(sim) => {
                    let r = monte_carlo::run(&sim, exec);
                    MethodRow {
                        method: "mc",
                        status: "ok".into(),
                        detail: String::new(),
                        value: Some(r.estimate),
                        terms_used: Some(r.trials),
                        truncation_estimate: None,
                        mc_half_width: Some(r.half_width_99),
                        imag_residue: None,
                        wall_time: started.elapsed().as_secs_f64(),
                    }
                }
                Err(e) => MethodRow::failed("mc", &e, 0.0),
            }
        }
        Method::All => unreachable!("expanded before dispatch"),
    }
}

fn overlay_grid(q: &AlphaMuParams) -> Vec<f64> {
    // Up to roughly the 0.999 quantile of the fitted law.
    let top = q.omega.powf(1.0 / q.alpha) * (1.0 + 6.0 / q.mu.sqrt()).powf(1.0 / q.alpha) * 1.5;
    (1..=60).map(|k| top * k as f64 / 60.0).collect()
}

/// Run every grid point of `spec`. Rows come back in grid order.
pub fn run_pipeline(spec: &RunSpec) -> Result<Vec<PointReport>> {
    spec.validate()?;
    let points = grid(spec)?;
    let exec = spec.exec;
    if spec.mode == Mode::PdfOverlay {
        return overlay(spec, &points);
    }
    let reports = exec.map(&points, |p| {
        let fit = fit_alpha_mu(&p.target, spec.n_pulses as usize, Exec::Sequential);
        match fit {
            Ok(q) => PointReport {
                point: *p,
                eta: None,
                fit: Some(q),
                fit_error: None,
                rows: spec.method.expand().into_iter().map(|m| run_method(m, p, &q, spec, exec)).collect(),
            },
            Err(e) => PointReport {
                point: *p,
                eta: None,
                fit: None,
                fit_error: Some(e.to_string()),
                rows: Vec::new(),
            },
        }
    });
    Ok(reports)
}

fn overlay(spec: &RunSpec, points: &[GridPoint]) -> Result<Vec<PointReport>> {
    let n = spec.n_pulses as usize;
    let mut out = Vec::new();
    for p in points {
        let q = fit_alpha_mu(&p.target, n, Exec::Sequential)?;
        let exact = ExactSumPdf::new(&p.target, n)?;
        let etas = match spec.gamma_grid.is_empty() {
            true => overlay_grid(&q),
            false => spec.gamma_grid.clone(),
        };
        for eta in etas {
            let started = Instant::now();
            let density = |name: &'static str, r: Result<f64>| match r {
                Ok(v) => MethodRow {
                    method: name,
                    status: "ok".into(),
                    detail: String::new(),
                    value: Some(v),
                    terms_used: None,
                    truncation_estimate: None,
                    mc_half_width: None,
                    imag_residue: None,
                    wall_time: started.elapsed().as_secs_f64(),
                },
                Err(e) => MethodRow::failed(name, &e, started.elapsed().as_secs_f64()),
            };
            let rows = vec![
                density("exact_sum", exact.eval(eta, spec.tol)),
                density("alpha_mu", Ok(alpha_mu_pdf(&q, eta))),
            ];
            out.push(PointReport {
                point: GridPoint { index: out.len(), ..*p },
                eta: Some(eta),
                fit: Some(q),
                fit_error: None,
                rows,
            });
        }
    }
    Ok(out)
}

/// A published parameter setting for the series/quadrature comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceSetting {
    pub n_pulses: u32,
    pub alpha_tilde: f64,
    /// Second shape-like entry of the published table; its role is ambiguous.
    pub mu_tilde: f64,
    pub omega_tilde: f64,
    pub sigma2: f64,
    pub gamma: f64,
    pub published_pd: f64,
}

const fn setting(n: u32, a: f64, m: f64, o: f64, g: f64, pd: f64) -> ReferenceSetting {
    ReferenceSetting {
        n_pulses: n,
        alpha_tilde: a,
        mu_tilde: m,
        omega_tilde: o,
        sigma2: 1.0,
        gamma: g,
        published_pd: pd,
    }
}

pub const REFERENCE_SETTINGS: [ReferenceSetting; 10] = [
    setting(3, 0.5, 1.5, 2.0, 3.0, 0.691485),
    setting(3, 1.0, 1.0, 2.0, 2.0, 0.831095),
    setting(3, 0.5, 2.0, 5.0, 3.0, 0.887412),
    setting(5, 0.5, 1.5, 2.0, 2.0, 0.976474),
    setting(5, 0.5, 1.0, 2.0, 2.0, 0.902578),
    setting(5, 1.0, 0.5, 5.0, 2.0, 0.975109),
    setting(5, 1.0 / 3.0, 3.0, 2.0, 2.0, 0.920891),
    setting(6, 0.25, 3.0, 1.0, 1.0, 0.999091),
    setting(6, 0.2, 2.0, 0.5, 1.0, 0.999387),
    setting(5, 0.5, 1.5, 2.0, 3.0, 0.999413),
];

/// How the table's `(α̃, μ̃, Ω̃)` triple becomes an α-μ law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reading {
    /// The triple is used as `(α, μ, Ω)` directly.
    Direct,
    /// `μ̃` is ignored and the law is fitted from `(α̃, Ω̃, N)`.
    Fitted,
}

impl Reading {
    pub fn name(self) -> &'static str {
        match self {
            Reading::Direct => "direct",
            Reading::Fitted => "fitted",
        }
    }
}

impl ReferenceSetting {
    pub fn config(&self) -> DetectorConfig {
        DetectorConfig::new(self.n_pulses, self.sigma2, self.gamma).expect("reference settings are valid")
    }

    pub fn law(&self, reading: Reading) -> Result<AlphaMuParams> {
        match reading {
            Reading::Direct => AlphaMuParams::new(self.alpha_tilde, self.mu_tilde, self.omega_tilde),
            Reading::Fitted => fit_alpha_mu(
                &WeibullParams::new(self.alpha_tilde, self.omega_tilde)?,
                self.n_pulses as usize,
                Exec::Sequential,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub setting: usize,
    pub reading: Reading,
    pub law: Option<AlphaMuParams>,
    pub published_pd: f64,
    pub series: Option<f64>,
    pub quadrature: Option<f64>,
    /// `|series − quadrature|`.
    pub difference: Option<f64>,
    pub terms_used: Option<u64>,
    pub status: String,
    pub series_time: f64,
    pub quadrature_time: f64,
}

impl BenchmarkRow {
    pub fn time_ratio(&self) -> Option<f64> {
        (self.series.is_some() && self.quadrature_time > 0.0).then(|| self.series_time / self.quadrature_time)
    }
}

/// Mean wall time of `f`, repeated until at least 20 ms have been spent.
fn timed<T>(mut f: impl FnMut() -> T) -> (T, f64) {
    let started = Instant::now();
    let first = f();
    let mut calls = 1u32;
    while started.elapsed().as_secs_f64() < 0.02 && calls < 10_000 {
        f();
        calls += 1;
    }
    (first, started.elapsed().as_secs_f64() / calls as f64)
}

/// Series at `tol` against quadrature on every reference setting, under both
/// readings of the table.
pub fn benchmark(tol: f64) -> Vec<BenchmarkRow> {
    let jobs: Vec<(usize, Reading)> = [Reading::Direct, Reading::Fitted]
        .into_iter()
        .flat_map(|r| (0..REFERENCE_SETTINGS.len()).map(move |i| (i, r)))
        .collect();
    // Sequential on purpose: concurrent jobs would distort the timings.
    jobs.iter()
        .map(|&(i, reading)| {
            let s = &REFERENCE_SETTINGS[i];
            let cfg = s.config();
            let mut row = BenchmarkRow {
                setting: i + 1,
                reading,
                law: None,
                published_pd: s.published_pd,
                series: None,
                quadrature: None,
                difference: None,
                terms_used: None,
                status: "ok".into(),
                series_time: 0.0,
                quadrature_time: 0.0,
            };
            let q = match s.law(reading) {
                Ok(q) => q,
                Err(e) => {
                    row.status = e.tag().into();
                    return row;
                }
            };
            row.law = Some(q);
            let (quad, qt) = timed(|| pd_quadrature(&cfg, &q));
            row.quadrature_time = qt;
            match quad {
                Ok(r) => row.quadrature = Some(r.value),
                Err(e) => row.status = e.tag().into(),
            }
            let (series, st) = timed(|| pd_series(&cfg, &q, tol));
            row.series_time = st;
            match series {
                Ok(r) => {
                    row.series = Some(r.value);
                    row.terms_used = Some(r.terms_used);
                }
                Err(e) => row.status = e.tag().into(),
            }
            if let (Some(a), Some(b)) = (row.series, row.quadrature) {
                row.difference = Some((a - b).abs());
            }
            row
        })
        .collect()
}
