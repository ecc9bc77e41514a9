//! Seasonal-plus-VAR wind speed model: estimation, forecasting, simulation
//! and file IO.
//!
//! Speeds are modelled as `r_t = g_t + r̃_t` where `g_t` is a harmonic
//! regression on the time of day and `r̃_t` follows a vector autoregression
//! `r̃_t = Σ_s A_s r̃_{t−s} + ε_t`, `ε_t ~ N(0, Σ)`, `Σ = B Bᵀ`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples per day at a 10-minute cadence.
pub const PERIODS_PER_DAY: usize = 144;
pub const DEFAULT_LAGS: usize = 6;
pub const STEP_MINUTES: i64 = 10;

const BURN_IN: usize = 500;
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

/// A uniformly spaced multi-site wind speed record.
#[derive(Clone, Debug, PartialEq)]
pub struct WindSeries {
    /// Minutes since the Unix epoch of the first row.
    pub start_minute: i64,
    pub step_minutes: i64,
    /// time × site, m/s
    pub speeds: DMatrix<f64>,
}

impl WindSeries {
    pub fn new(start_minute: i64, step_minutes: i64, speeds: DMatrix<f64>) -> Result<Self> {
        if step_minutes <= 0 {
            return Err(Error::Parse("time step must be positive".into()));
        }
        if speeds.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parse("wind speeds must be finite and nonnegative".into()));
        }
        Ok(WindSeries {
            start_minute,
            step_minutes,
            speeds,
        })
    }

    pub fn len(&self) -> usize {
        self.speeds.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.nrows() == 0
    }

    pub fn n_sites(&self) -> usize {
        self.speeds.ncols()
    }

    /// Absolute time index (in steps) of row `k`; the phase reference for
    /// seasonal terms.
    pub fn time_index(&self, k: usize) -> i64 {
        self.start_minute.div_euclid(self.step_minutes) + k as i64
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        self.speeds.row(k).iter().copied().collect()
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> WindSeries {
        let n = n.min(self.len());
        WindSeries {
            start_minute: self.start_minute,
            step_minutes: self.step_minutes,
            speeds: self.speeds.rows(0, n).into_owned(),
        }
    }

    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let (start, step, speeds) = read_timed_table(reader, "site")?;
        WindSeries::new(start, step, speeds)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        write_timed_table(writer, self.start_minute, self.step_minutes, &self.speeds, "site")
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Reads a uniformly spaced `timestamp,<prefix>_1,...` table of
/// nonnegative values.
pub(crate) fn read_timed_table(reader: impl Read, prefix: &str) -> Result<(i64, i64, DMatrix<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.len() < 2 || &headers[0] != "timestamp" {
        return Err(Error::Parse(format!("expected header `timestamp,{prefix}_1,...`")));
    }
    let n_cols = headers.len() - 1;
    let mut minutes = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(Error::Parse(format!("row {} has {} fields", line + 2, rec.len())));
        }
        minutes.push(parse_timestamp(&rec[0])?);
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad value `{field}`", line + 2)))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parse(format!("row {}: values must be finite and nonnegative", line + 2)));
            }
            values.push(v);
        }
    }
    if minutes.is_empty() {
        return Err(Error::Parse("table has no rows".into()));
    }
    let step = if minutes.len() > 1 {
        minutes[1].checked_sub(minutes[0]).unwrap_or(0)
    } else {
        STEP_MINUTES
    };
    if step <= 0 || minutes.windows(2).any(|w| w[1].checked_sub(w[0]) != Some(step)) {
        return Err(Error::Parse("timestamps are not uniformly spaced".into()));
    }
    Ok((minutes[0], step, DMatrix::from_row_slice(minutes.len(), n_cols, &values)))
}

pub(crate) fn write_timed_table(
    writer: impl Write,
    start_minute: i64,
    step_minutes: i64,
    values: &DMatrix<f64>,
    prefix: &str,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend((1..=values.ncols()).map(|i| format!("{prefix}_{i}")));
    w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
    for k in 0..values.nrows() {
        let mut rec = vec![format_timestamp(start_minute + k as i64 * step_minutes)];
        rec.extend(values.row(k).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

/// Accepts `YYYY-MM-DDTHH:MM[:SS]`, the same with a space separator, or an
/// integer number of minutes since the epoch.
pub fn parse_timestamp(s: &str) -> Result<i64> {
    if let Ok(m) = s.parse::<i64>() {
        return Ok(m);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc().timestamp().div_euclid(60));
        }
    }
    Err(Error::Parse(format!("bad timestamp `{s}`")))
}

pub fn format_timestamp(minute: i64) -> String {
    match minute.checked_mul(60).and_then(|s| DateTime::from_timestamp(s, 0)) {
        Some(t) => t.naive_utc().format(TIMESTAMP_FORMAT).to_string(),
        None => minute.to_string(),
    }
}

/// Per-site harmonic regression `a + Σ_p (b_p cos(2πt/P) + c_p sin(2πt/P))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonalModel {
    /// Harmonic periods in samples; daily and semi-daily by default.
    pub periods: Vec<f64>,
    /// One row per site: intercept followed by a cos/sin pair per period.
    pub coefficients: Vec<Vec<f64>>,
}

impl SeasonalModel {
    pub fn daily(coefficients: Vec<Vec<f64>>) -> Self {
        SeasonalModel {
            periods: vec![PERIODS_PER_DAY as f64, PERIODS_PER_DAY as f64 / 2.0],
            coefficients,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.coefficients.len()
    }

    fn regressors(&self, t: i64) -> Vec<f64> {
        let mut z = Vec::with_capacity(1 + 2 * self.periods.len());
        z.push(1.0);
        for &p in &self.periods {
            let phase = 2.0 * PI * (t as f64).rem_euclid(p) / p;
            z.push(phase.cos());
            z.push(phase.sin());
        }
        z
    }

    /// `g_t` for every site.
    pub fn eval(&self, t: i64) -> Vec<f64> {
        let z = self.regressors(t);
        self.coefficients
            .iter()
            .map(|c| c.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let k = 1 + 2 * self.periods.len();
        if self.periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidModel("harmonic periods must be positive".into()));
        }
        if self.coefficients.iter().any(|c| c.len() != k || c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidModel(format!("each site needs {k} finite coefficients")));
        }
        Ok(())
    }
}

/// Least-squares harmonic fit per site.
pub fn fit_seasonal(series: &WindSeries) -> Result<SeasonalModel> {
    fit_seasonal_with(series, &[PERIODS_PER_DAY as f64, PERIODS_PER_DAY as f64 / 2.0])
}

pub fn fit_seasonal_with(series: &WindSeries, periods: &[f64]) -> Result<SeasonalModel> {
    let longest = periods.iter().copied().fold(0.0, f64::max);
    if (series.len() as f64) < 2.0 * longest || series.len() < 1 + 2 * periods.len() {
        return Err(Error::InsufficientData(format!(
            "seasonal fit needs at least two full cycles ({} samples), got {}",
            (2.0 * longest).ceil(),
            series.len()
        )));
    }
    let proto = SeasonalModel {
        periods: periods.to_vec(),
        coefficients: Vec::new(),
    };
    let k = 1 + 2 * periods.len();
    let n = series.len();
    let mut x = DMatrix::zeros(n, k);
    for row in 0..n {
        for (j, v) in proto.regressors(series.time_index(row)).into_iter().enumerate() {
            x[(row, j)] = v;
        }
    }
    let coef = least_squares(&x, &series.speeds)?;
    Ok(SeasonalModel {
        periods: periods.to_vec(),
        coefficients: (0..series.n_sites())
            .map(|i| coef.column(i).iter().copied().collect())
            .collect(),
    })
}

/// `speeds − g` for every row of `series`.
pub fn seasonal_residuals(series: &WindSeries, seasonal: &SeasonalModel) -> Result<DMatrix<f64>> {
    if seasonal.n_sites() != series.n_sites() {
        return Err(Error::Dimension(format!(
            "model has {} sites, series has {}",
            seasonal.n_sites(),
            series.n_sites()
        )));
    }
    let mut r = series.speeds.clone();
    for k in 0..series.len() {
        let g = seasonal.eval(series.time_index(k));
        for (i, gi) in g.into_iter().enumerate() {
            r[(k, i)] -= gi;
        }
    }
    Ok(r)
}

/// Solves `min ‖X C − Y‖` column-wise through the SVD, rejecting
/// numerically rank-deficient designs.
fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= smax * 1e-10 {
        return Err(Error::Singular(format!("condition estimate {:.3e}", smax / smin.max(f64::MIN_POSITIVE))));
    }
    svd.solve(y, 0.0).map_err(|e| Error::Singular(e.to_string()))
}

/// Vector autoregression of order `L = a.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarModel {
    pub a: Vec<DMatrix<f64>>,
    pub sigma: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl VarModel {
    pub fn lags(&self) -> usize {
        self.a.len()
    }

    pub fn n_sites(&self) -> usize {
        self.sigma.nrows()
    }

    /// Builds a model from `A_s` and `Σ`, factoring `Σ`.
    pub fn new(a: Vec<DMatrix<f64>>, sigma: DMatrix<f64>) -> Result<Self> {
        let b = chol(&sigma)?;
        let m = VarModel { a, sigma, b };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sigma.nrows();
        let square = |m: &DMatrix<f64>| m.nrows() == n && m.ncols() == n;
        if !square(&self.sigma) || !square(&self.b) || !self.a.iter().all(square) {
            return Err(Error::InvalidModel(format!("all VAR matrices must be {n}×{n}")));
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !finite(&self.sigma) || !finite(&self.b) || !self.a.iter().all(finite) {
            return Err(Error::InvalidModel("non-finite VAR entry".into()));
        }
        let scale = self.sigma.abs().max().max(1.0);
        if (&self.sigma - self.sigma.transpose()).abs().max() > 1e-9 * scale {
            return Err(Error::InvalidModel("Σ is not symmetric".into()));
        }
        if (&self.b * self.b.transpose() - &self.sigma).abs().max() > 1e-8 * scale {
            return Err(Error::InvalidModel("B Bᵀ does not reproduce Σ".into()));
        }
        Ok(())
    }

    /// `Σ_s A_s r̃_{t−s}` where `history` is ordered oldest first and its last
    /// entry is `r̃_{t−1}`.
    pub fn predict(&self, history: &[DVector<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_sites());
        for (s, a) in self.a.iter().enumerate() {
            out += a * &history[history.len() - 1 - s];
        }
        out
    }
}

/// Multivariate least squares of `r̃_t` on its `L` lags (no intercept).
///
/// `Σ` is the sample covariance (divisor n−1) of the fit residuals, or of the
/// input itself when `L = 0`.
pub fn fit_var(residuals: &DMatrix<f64>, lags: usize) -> Result<VarModel> {
    let (n, nw) = residuals.shape();
    if nw == 0 {
        return Err(Error::InsufficientData("no sites".into()));
    }
    let need = lags * nw + nw;
    if n <= need || n < lags + 2 {
        return Err(Error::InsufficientData(format!(
            "VAR({lags}) on {nw} sites needs more than {need} rows, got {n}"
        )));
    }
    let m = n - lags;
    let y = residuals.rows(lags, m).into_owned();
    let (a, fit_res) = if lags == 0 {
        (Vec::new(), y)
    } else {
        let mut x = DMatrix::zeros(m, lags * nw);
        for s in 1..=lags {
            x.view_mut((0, (s - 1) * nw), (m, nw))
                .copy_from(&residuals.rows(lags - s, m));
        }
        let coef = least_squares(&x, &y)?;
        let fitted = &x * &coef;
        // coef is (L·N) × N with block s holding A_sᵀ.
        let a = (0..lags)
            .map(|s| coef.rows(s * nw, nw).transpose())
            .collect::<Vec<_>>();
        (a, y - fitted)
    };
    let sigma = sample_covariance(&fit_res);
    let b = chol(&sigma)?;
    let model = VarModel { a, sigma, b };
    model.validate()?;
    Ok(model)
}

/// Centered sample covariance with divisor n−1.
pub fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let mut cov = centered.transpose() * &centered / (n.saturating_sub(1).max(1) as f64);
    cov = (&cov + cov.transpose()) * 0.5;
    cov
}

/// Lower-triangular `B` with `B Bᵀ = Σ`.
///
/// A semidefinite `Σ` that fails factorization gets `1e-10·trace(Σ)/N` added
/// to its diagonal once.
pub fn chol(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::Dimension("Σ must be square".into()));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveSemidefinite);
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    let trace = sym.trace();
    if trace == 0.0 && sym.iter().all(|v| *v == 0.0) {
        return Ok(DMatrix::zeros(n, n));
    }
    if let Some(c) = sym.clone().cholesky() {
        return Ok(c.l());
    }
    if trace <= 0.0 {
        return Err(Error::NotPositiveSemidefinite);
    }
    let jitter = 1e-10 * trace / n as f64;
    let jittered = &sym + DMatrix::identity(n, n) * jitter;
    match jittered.cholesky() {
        Some(c) => Ok(c.l()),
        None => Err(Error::NotPositiveSemidefinite),
    }
}

/// Conditional-mean speed forecast for periods 2..=T.
///
/// `history` holds the realized residuals `r̃` up to period 1, oldest first;
/// at least `L` entries are needed. `t1` is the absolute time index of
/// period 1. Returns a (T−1) × N matrix clipped at zero.
pub fn nominal_forecast(
    seasonal: &SeasonalModel,
    var: &VarModel,
    history: &[DVector<f64>],
    t1: i64,
    horizon: usize,
) -> Result<DMatrix<f64>> {
    let resid = residual_forecast(var, history, horizon)?;
    let n = var.n_sites();
    if seasonal.n_sites() != n {
        return Err(Error::Dimension("seasonal and VAR site counts differ".into()));
    }
    let mut out = DMatrix::zeros(horizon.saturating_sub(1), n);
    for k in 0..out.nrows() {
        let g = seasonal.eval(t1 + 1 + k as i64);
        for i in 0..n {
            out[(k, i)] = (g[i] + resid[(k, i)]).max(0.0);
        }
    }
    Ok(out)
}

/// Zero-innovation propagation of `r̃` for periods 2..=T.
pub fn residual_forecast(var: &VarModel, history: &[DVector<f64>], horizon: usize) -> Result<DMatrix<f64>> {
    let lags = var.lags();
    if history.len() < lags {
        return Err(Error::InsufficientData(format!("need {lags} lags of history, got {}", history.len())));
    }
    if history.iter().any(|h| h.len() != var.n_sites()) {
        return Err(Error::Dimension("history vectors must match the site count".into()));
    }
    let mut window: Vec<DVector<f64>> = history[history.len() - lags..].to_vec();
    let steps = horizon.saturating_sub(1);
    let mut out = DMatrix::zeros(steps, var.n_sites());
    for k in 0..steps {
        let next = var.predict(&window);
        out.set_row(k, &next.transpose());
        if lags > 0 {
            window.remove(0);
            window.push(next);
        }
    }
    Ok(out)
}

/// Latent residual path `r̃` of length `n` after a burn-in from zero.
pub fn simulate_residuals(var: &VarModel, seed: u64, n: usize) -> DMatrix<f64> {
    let nw = var.n_sites();
    let lags = var.lags();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut window = vec![DVector::zeros(nw); lags];
    let mut out = DMatrix::zeros(n, nw);
    for k in 0..BURN_IN + n {
        let z = DVector::from_fn(nw, |_, _| StandardNormal.sample(&mut rng));
        let next = var.predict(&window) + &var.b * z;
        if k >= BURN_IN {
            out.set_row(k - BURN_IN, &next.transpose());
        }
        if lags > 0 {
            window.remove(0);
            window.push(next);
        }
    }
    out
}

/// Synthetic wind speeds `max(0, g_t + r̃_t)`, reproducible by seed.
pub fn simulate_wind(
    seasonal: &SeasonalModel,
    var: &VarModel,
    seed: u64,
    n: usize,
    start_minute: i64,
) -> Result<WindSeries> {
    seasonal.validate()?;
    var.validate()?;
    if seasonal.n_sites() != var.n_sites() {
        return Err(Error::Dimension("seasonal and VAR site counts differ".into()));
    }
    let resid = simulate_residuals(var, seed, n);
    let t0 = start_minute.div_euclid(STEP_MINUTES);
    let mut speeds = resid;
    for k in 0..n {
        let g = seasonal.eval(t0 + k as i64);
        for (i, gi) in g.into_iter().enumerate() {
            speeds[(k, i)] = (speeds[(k, i)] + gi).max(0.0);
        }
    }
    WindSeries::new(start_minute, STEP_MINUTES, speeds)
}

/// Seasonal and VAR parts fitted together; the estimation output.
#[derive(Clone, Debug, PartialEq)]
pub struct WindModel {
    pub seasonal: SeasonalModel,
    pub var: VarModel,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VarFile {
    lags: usize,
    a: Vec<Vec<Vec<f64>>>,
    sigma: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    seasonal: SeasonalModel,
    var: VarFile,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidModel(format!("{what} must be {n}×{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl WindModel {
    pub fn fit(series: &WindSeries, lags: usize) -> Result<Self> {
        let seasonal = fit_seasonal(series)?;
        let resid = seasonal_residuals(series, &seasonal)?;
        let var = fit_var(&resid, lags)?;
        Ok(WindModel { seasonal, var })
    }

    pub fn to_json_string(&self) -> String {
        let file = ModelFile {
            seasonal: self.seasonal.clone(),
            var: VarFile {
                lags: self.var.lags(),
                a: self.var.a.iter().map(to_rows).collect(),
                sigma: to_rows(&self.var.sigma),
                b: to_rows(&self.var.b),
            },
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.seasonal.validate()?;
        let n = file.seasonal.n_sites();
        if n == 0 {
            return Err(Error::InvalidModel("model has no sites".into()));
        }
        if file.var.a.len() != file.var.lags {
            return Err(Error::InvalidModel("lag count does not match A matrices".into()));
        }
        let a = file
            .var
            .a
            .iter()
            .map(|m| from_rows(m, n, "A_s"))
            .collect::<Result<Vec<_>>>()?;
        let var = VarModel {
            a,
            sigma: from_rows(&file.var.sigma, n, "sigma")?,
            b: from_rows(&file.var.b, n, "b")?,
        };
        var.validate()?;
        Ok(WindModel {
            seasonal: file.seasonal,
            var,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}
