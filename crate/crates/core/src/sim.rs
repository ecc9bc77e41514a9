//! Rolling-horizon simulation, realized cost accounting and budget sweeps.
//!
//! Every 10-minute interval the simulator observes the realized demand and
//! available wind, rebuilds the forecasts and uncertainty sets from the
//! models fitted on data seen so far, solves the configured policy and
//! implements the period-1 dispatch. Costs are charged on that dispatch.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ccg::{solve_robust_ed_with, AdOracle, CcgOptions};
use crate::dispatch::{
    build_first_stage, build_second_stage, solve_la_ed, solve_res_la_ed, CompactStage2, DispatchSchedule, Forecast,
    Penalties, PeriodDispatch, PrevDispatch, ReserveShortfall,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::uncertainty::{
    build_demand_set, build_wind_trajectory_set, nominal_wind_power, product_set, Polyhedron, PowerCurvePWL, SetKind,
    SetSpec, WindSetInput,
};
use crate::wind::{
    fit_seasonal, fit_var, read_timed_table, seasonal_residuals, simulate_wind, write_timed_table, SeasonalModel,
    VarModel, WindModel, WindSeries, PERIODS_PER_DAY, STEP_MINUTES,
};

/// Intervals per hour; costs in $/MWh are divided by this per interval.
pub const INTERVALS_PER_HOUR: f64 = 6.0;
pub const DEFAULT_HORIZON: usize = 9;
pub const DEFAULT_TRAIN_DAYS: usize = 7;
pub const DEFAULT_DEMAND_STD_FRAC: f64 = 0.05;
/// An interval counts as penalized when its penalty exceeds this many dollars.
pub const PENALTY_EPS: f64 = 1e-6;
/// 2013-01-01T00:00 UTC in minutes, the start of generated data.
pub const SYNTHETIC_START_MINUTE: i64 = 1_356_998_400 / 60;

// ---- demand data ---------------------------------------------------------------

/// Realized per-load demand on the same 10-minute grid as the wind record.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandSeries {
    pub start_minute: i64,
    pub step_minutes: i64,
    /// time × load, MW
    pub values: DMatrix<f64>,
}

impl DemandSeries {
    pub fn new(start_minute: i64, step_minutes: i64, values: DMatrix<f64>) -> Result<Self> {
        if step_minutes <= 0 {
            return Err(Error::Parse("time step must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parse("demand must be finite and nonnegative".into()));
        }
        Ok(DemandSeries {
            start_minute,
            step_minutes,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn n_loads(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        self.values.row(k).iter().copied().collect()
    }

    /// Header `timestamp,load_1,...`; same timestamp rules as the wind CSV.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let (start, step, values) = read_timed_table(reader, "load")?;
        DemandSeries::new(start, step, values)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        write_timed_table(writer, self.start_minute, self.step_minutes, &self.values, "load")
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Mean demand per load for each of the 144 intervals of a day. Serves as
/// the demand forecast `d̄`.
#[derive(Clone, Debug, PartialEq)]
pub struct DailyProfile {
    /// 144 × load, MW
    pub values: DMatrix<f64>,
}

impl DailyProfile {
    pub fn n_loads(&self) -> usize {
        self.values.ncols()
    }

    /// Mean demand at absolute time index `t`.
    pub fn at(&self, t: i64) -> Vec<f64> {
        let k = t.rem_euclid(self.values.nrows() as i64) as usize;
        self.values.row(k).iter().copied().collect()
    }

    /// Means for `n` consecutive intervals starting at time index `t0`.
    pub fn series(&self, t0: i64, n: usize) -> DMatrix<f64> {
        let nd = self.n_loads();
        let mut out = DMatrix::zeros(n, nd);
        for k in 0..n {
            let row = self.at(t0 + k as i64);
            for j in 0..nd {
                out[(k, j)] = row[j];
            }
        }
        out
    }
}

/// System demand in MW at interval `tau` of the day: a raised cosine from
/// 132.6 MW at midnight to 319.1 MW at noon.
pub fn system_demand(tau: i64) -> f64 {
    let phase = 2.0 * std::f64::consts::PI * tau.rem_euclid(PERIODS_PER_DAY as i64) as f64 / PERIODS_PER_DAY as f64;
    132.6 + 186.5 * ((1.0 - phase.cos()) / 2.0)
}

/// Splits [`system_demand`] over the loads in proportion to their nominal MW.
pub fn daily_demand_profile(grid: &Grid) -> DailyProfile {
    let total: f64 = grid.loads.iter().map(|l| l.nominal_mw).sum();
    let nd = grid.n_loads();
    let values = DMatrix::from_fn(PERIODS_PER_DAY, nd, |k, j| {
        if total > 0.0 {
            system_demand(k as i64) * grid.loads[j].nominal_mw / total
        } else {
            0.0
        }
    });
    DailyProfile { values }
}

/// Independent `N(μ, (0.05 μ)²)` draws truncated to be nonnegative.
pub fn generate_demand(means: &DMatrix<f64>, seed: u64) -> Result<DMatrix<f64>> {
    generate_demand_with(means, DEFAULT_DEMAND_STD_FRAC, seed)
}

pub fn generate_demand_with(means: &DMatrix<f64>, std_frac: f64, seed: u64) -> Result<DMatrix<f64>> {
    if means.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::Config("demand means must be finite and nonnegative".into()));
    }
    if !(std_frac.is_finite() && std_frac >= 0.0) {
        return Err(Error::Config("demand std fraction must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Row-major draw order so the series does not depend on the load count
    // of later rows.
    let mut out = DMatrix::zeros(means.nrows(), means.ncols());
    for k in 0..means.nrows() {
        for j in 0..means.ncols() {
            let mu = means[(k, j)];
            if mu == 0.0 {
                continue;
            }
            // μ > 0, so each draw is accepted with probability above 1/2.
            out[(k, j)] = loop {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = mu + std_frac * mu * z;
                if v >= 0.0 {
                    break v;
                }
            };
        }
    }
    Ok(out)
}

// ---- synthetic wind ----------------------------------------------------------------

/// A four-site model with strongly persistent, spatially correlated
/// residuals: VAR(2) with a double root at 0.8, innovation std 0.4 m/s and
/// pairwise innovation correlation 0.7. Mean speeds are 7.5 to 8.3 m/s with
/// a daily cycle.
pub fn synthetic_wind_model() -> WindModel {
    let n = 4;
    let a1 = DMatrix::from_diagonal_element(n, n, 1.6);
    let a2 = DMatrix::from_diagonal_element(n, n, -0.64);
    let sd = 0.4;
    let sigma = DMatrix::from_fn(n, n, |i, j| if i == j { sd * sd } else { 0.7 * sd * sd });
    let var = VarModel::new(vec![a1, a2], sigma).expect("synthetic covariance is positive definite");
    let seasonal = SeasonalModel::daily(vec![
        vec![7.9, -0.9, 0.3, 0.2, 0.1],
        vec![8.3, -0.8, 0.4, 0.1, -0.1],
        vec![7.5, -1.0, 0.2, 0.2, 0.0],
        vec![8.0, -0.7, 0.5, 0.0, 0.1],
    ]);
    WindModel { seasonal, var }
}

/// Wind, realized demand and the demand forecast profile for one run.
#[derive(Clone, Debug)]
pub struct SimData {
    pub wind: WindSeries,
    pub demand: DemandSeries,
    pub profile: DailyProfile,
}

impl SimData {
    /// Seeded synthetic data covering `days` days from
    /// [`SYNTHETIC_START_MINUTE`]. Wind comes from [`synthetic_wind_model`],
    /// demand from the grid's daily profile with 5% noise.
    pub fn synthetic(grid: &Grid, days: usize, seed: u64) -> Result<Self> {
        let model = synthetic_wind_model();
        if grid.n_wind() != model.var.n_sites() {
            return Err(Error::Config(format!(
                "synthetic wind has {} sites but the grid has {} wind farms",
                model.var.n_sites(),
                grid.n_wind()
            )));
        }
        let n = days * PERIODS_PER_DAY;
        let wind = simulate_wind(&model.seasonal, &model.var, seed, n, SYNTHETIC_START_MINUTE)?;
        let profile = daily_demand_profile(grid);
        let demand = Self::demand_for(&wind, &profile, DEFAULT_DEMAND_STD_FRAC, seed)?;
        Ok(SimData { wind, demand, profile })
    }

    /// Demand realized around `profile` on the wind record's time grid.
    pub fn demand_for(wind: &WindSeries, profile: &DailyProfile, std_frac: f64, seed: u64) -> Result<DemandSeries> {
        let means = profile.series(wind.time_index(0), wind.len());
        let values = generate_demand_with(&means, std_frac, seed ^ 0x9e37_79b9_7f4a_7c15)?;
        DemandSeries::new(wind.start_minute, wind.step_minutes, values)
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if self.wind.n_sites() != grid.n_wind() {
            return Err(Error::Dimension(format!(
                "wind record has {} sites, grid has {} wind farms",
                self.wind.n_sites(),
                grid.n_wind()
            )));
        }
        if self.demand.n_loads() != grid.n_loads() || self.profile.n_loads() != grid.n_loads() {
            return Err(Error::Dimension("demand columns must match the grid's loads".into()));
        }
        if self.wind.step_minutes != STEP_MINUTES || self.demand.step_minutes != STEP_MINUTES {
            return Err(Error::Dimension(format!("data must be on a {STEP_MINUTES}-minute grid")));
        }
        if self.wind.start_minute != self.demand.start_minute {
            return Err(Error::Dimension("wind and demand records start at different times".into()));
        }
        Ok(())
    }
}

// ---- configuration -----------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    /// Deterministic look-ahead ED.
    La,
    /// Look-ahead ED with a spinning reserve requirement.
    ResLa { res_factor: f64 },
    /// Robust ED over the given uncertainty set.
    Rob(SetSpec),
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::La => "la",
            Policy::ResLa { .. } => "res-la",
            Policy::Rob(_) => "rob",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Look-ahead periods T, including the current one.
    pub horizon: usize,
    /// Simulated days after the training window.
    pub days: usize,
    /// Caps the number of simulated intervals below `days · 144`.
    pub max_intervals: Option<usize>,
    pub policy: Policy,
    pub penalties: Penalties,
    /// Intervals between model re-fits.
    pub refit_every: usize,
    /// VAR order of the forecasting model.
    pub lags: usize,
    /// Days of data before the first simulated interval.
    pub train_days: usize,
    /// Fit on at most this many most recent intervals; all history if unset.
    pub estimation_window: Option<usize>,
    /// `d̂` as a fraction of `d̄`.
    pub demand_std_frac: f64,
    pub ccg: CcgOptions,
    pub reserve_caps: Option<Vec<f64>>,
    pub reserve_shortfall: ReserveShortfall,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: DEFAULT_HORIZON,
            days: 35,
            max_intervals: None,
            policy: Policy::La,
            penalties: Penalties::default(),
            refit_every: PERIODS_PER_DAY,
            lags: crate::wind::DEFAULT_LAGS,
            train_days: DEFAULT_TRAIN_DAYS,
            estimation_window: None,
            demand_std_frac: DEFAULT_DEMAND_STD_FRAC,
            ccg: CcgOptions::default(),
            reserve_caps: None,
            reserve_shortfall: ReserveShortfall::Penalize,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::Config("look-ahead horizon T must be at least 2".into()));
        }
        let pen_ok = |v: f64| v.is_finite() && v >= 0.0;
        if !pen_ok(self.penalties.under) || !pen_ok(self.penalties.over) {
            return Err(Error::Config("penalties must be finite and nonnegative".into()));
        }
        if self.refit_every == 0 {
            return Err(Error::Config("refit cadence must be positive".into()));
        }
        if self.train_days < 2 {
            return Err(Error::Config("at least two training days are needed for the seasonal fit".into()));
        }
        if self.intervals() == 0 {
            return Err(Error::Config("nothing to simulate".into()));
        }
        if self.estimation_window.is_some_and(|w| w < 2 * PERIODS_PER_DAY) {
            return Err(Error::Config("estimation window must cover at least two days".into()));
        }
        if !(self.demand_std_frac.is_finite() && self.demand_std_frac >= 0.0) {
            return Err(Error::Config("demand std fraction must be nonnegative".into()));
        }
        match &self.policy {
            Policy::La => {}
            Policy::ResLa { res_factor } => {
                if !(res_factor.is_finite() && *res_factor >= 0.0) {
                    return Err(Error::Config("reserve factor must be nonnegative".into()));
                }
            }
            Policy::Rob(spec) => spec.validate()?,
        }
        Ok(())
    }

    pub fn intervals(&self) -> usize {
        let full = self.days * PERIODS_PER_DAY;
        self.max_intervals.map_or(full, |m| m.min(full))
    }

    /// Row of the first simulated interval.
    pub fn start_row(&self) -> usize {
        self.train_days * PERIODS_PER_DAY
    }

    /// Rows of data a run consumes.
    pub fn rows_needed(&self) -> usize {
        self.start_row() + self.intervals()
    }
}

// ---- metrics ------------------------------------------------------------------------

/// Realized cost of one implemented interval, in dollars.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalCost {
    pub total: f64,
    pub penalty: f64,
}

/// `(Σ Cᵍ pᵍ + Σ Cʷ pʷ + C⁺ s⁺ + C⁻ s⁻) / 6`, with the slack part reported
/// separately.
pub fn interval_cost(grid: &Grid, dispatch: &PeriodDispatch, pen: &Penalties) -> IntervalCost {
    let energy: f64 = grid.gens.iter().zip(&dispatch.pg).map(|(g, p)| g.cost * p).sum::<f64>()
        + grid.windfarms.iter().zip(&dispatch.pw).map(|(w, p)| w.cost * p).sum::<f64>();
    let penalty = (pen.under * dispatch.s_plus + pen.over * dispatch.s_minus) / INTERVALS_PER_HOUR;
    IntervalCost {
        total: energy / INTERVALS_PER_HOUR + penalty,
        penalty,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalRecord {
    /// Absolute time index of the interval.
    pub t: i64,
    pub cost: f64,
    pub penalty: f64,
    pub s_plus: f64,
    pub s_minus: f64,
    pub thermal_mw: f64,
    pub wind_mw: f64,
    /// Available wind observed for the interval.
    pub wind_available_mw: f64,
    pub pg: Vec<f64>,
    pub pw: Vec<f64>,
    /// Planning objective of the solved look-ahead problem.
    pub objective: f64,
    /// CCG iterations for the robust policy, simplex iterations otherwise.
    pub solver_iters: usize,
    pub solve_ms: f64,
    /// The robust solve failed and LA-ED was implemented instead.
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimMetrics {
    pub records: Vec<IntervalRecord>,
    pub intervals: usize,
    pub cost_avg: f64,
    /// Population standard deviation of the per-interval cost.
    pub cost_std: f64,
    pub penalty_avg: f64,
    /// Fraction of intervals whose penalty exceeds [`PENALTY_EPS`].
    pub penalty_freq: f64,
    pub thermal_avg: f64,
    pub wind_avg: f64,
    pub fallbacks: usize,
}

impl SimMetrics {
    pub fn from_records(records: Vec<IntervalRecord>) -> Self {
        let n = records.len();
        let nf = n.max(1) as f64;
        let mean = |f: &dyn Fn(&IntervalRecord) -> f64| records.iter().map(f).sum::<f64>() / nf;
        let cost_avg = mean(&|r| r.cost);
        let cost_std = (records.iter().map(|r| (r.cost - cost_avg).powi(2)).sum::<f64>() / nf).sqrt();
        let penalty_avg = mean(&|r| r.penalty);
        let penalty_freq = records.iter().filter(|r| r.penalty > PENALTY_EPS).count() as f64 / nf;
        let thermal_avg = mean(&|r| r.thermal_mw);
        let wind_avg = mean(&|r| r.wind_mw);
        let fallbacks = records.iter().filter(|r| r.fallback).count();
        SimMetrics {
            records,
            intervals: n,
            cost_avg,
            cost_std,
            penalty_avg,
            penalty_freq,
            thermal_avg,
            wind_avg,
            fallbacks,
        }
    }

    pub fn total_penalty(&self) -> f64 {
        self.records.iter().map(|r| r.penalty).sum()
    }

    /// Drops the per-interval records, keeping the aggregates.
    pub fn summary(&self) -> SimMetrics {
        SimMetrics {
            records: Vec::new(),
            ..self.clone()
        }
    }
}

// ---- simulation ---------------------------------------------------------------------

/// Models fitted on the wind observed before an interval.
#[derive(Clone, Debug)]
pub struct FittedModels {
    pub seasonal: SeasonalModel,
    /// Forecasting VAR of order `cfg.lags`.
    pub forecast: VarModel,
    /// The VAR behind the robust set when it differs from `forecast`.
    pub robust: Option<VarModel>,
}

fn window(wind: &WindSeries, lo: usize, hi: usize) -> WindSeries {
    WindSeries {
        start_minute: wind.start_minute + lo as i64 * wind.step_minutes,
        step_minutes: wind.step_minutes,
        speeds: wind.speeds.rows(lo, hi - lo).into_owned(),
    }
}

impl FittedModels {
    /// Fits on rows before `hi`, limited to the estimation window.
    pub fn fit(wind: &WindSeries, hi: usize, cfg: &SimConfig) -> Result<Self> {
        let lo = cfg.estimation_window.map_or(0, |w| hi.saturating_sub(w));
        let series = window(wind, lo, hi.min(wind.len()));
        let seasonal = fit_seasonal(&series)?;
        let resid = seasonal_residuals(&series, &seasonal)?;
        let forecast = fit_var(&resid, cfg.lags)?;
        let robust = match &cfg.policy {
            Policy::Rob(spec) => match spec.kind {
                SetKind::Dus if spec.lags == cfg.lags => None,
                SetKind::Dus => Some(fit_var(&resid, spec.lags)?),
                SetKind::Sus1 | SetKind::Sus2 => Some(fit_var(&resid, 0)?),
            },
            _ => None,
        };
        Ok(FittedModels {
            seasonal,
            forecast,
            robust,
        })
    }
}

/// What the policies see at one interval.
#[derive(Clone, Debug)]
pub struct IntervalInputs {
    pub t1: i64,
    pub observed_demand: Vec<f64>,
    pub observed_wind: Vec<f64>,
    /// Demand forecast for periods 2..=T, one row per period.
    pub demand_bar: DMatrix<f64>,
    /// Look-ahead forecast, period 1 being the observation.
    pub forecast: Forecast,
    /// Realized speeds up to period 1, oldest first.
    pub history: Vec<Vec<f64>>,
}

fn history_len(cfg: &SimConfig) -> usize {
    let spec_lags = match &cfg.policy {
        Policy::Rob(spec) if spec.kind == SetKind::Dus => spec.lags,
        _ => 0,
    };
    cfg.lags.max(spec_lags).max(1)
}

fn farm_curves(grid: &Grid) -> Vec<PowerCurvePWL> {
    grid.windfarms.iter().map(|w| w.power_curve.clone()).collect()
}

fn observe(data: &SimData, curves: &[PowerCurvePWL], k: usize) -> (Vec<f64>, Vec<f64>) {
    let speeds = data.wind.row(k);
    let avail = curves.iter().zip(&speeds).map(|(c, &r)| c.available(r)).collect();
    (data.demand.row(k), avail)
}

impl IntervalInputs {
    pub fn new(grid: &Grid, data: &SimData, models: &FittedModels, cfg: &SimConfig, k: usize) -> Result<Self> {
        Self::with_curves(&farm_curves(grid), data, models, cfg, k)
    }

    fn with_curves(
        curves: &[PowerCurvePWL],
        data: &SimData,
        models: &FittedModels,
        cfg: &SimConfig,
        k: usize,
    ) -> Result<Self> {
        let hist_len = history_len(cfg);
        if k + 1 < hist_len || k >= data.wind.len() || k >= data.demand.len() {
            return Err(Error::InsufficientData(format!("no usable history at row {k}")));
        }
        let t_len = cfg.horizon;
        let t1 = data.wind.time_index(k);
        let (obs_d, obs_w) = observe(data, curves, k);
        let history: Vec<Vec<f64>> = (k + 1 - hist_len..=k).map(|r| data.wind.row(r)).collect();
        let demand_bar = data.profile.series(t1 + 1, t_len - 1);
        let input = WindSetInput {
            seasonal: &models.seasonal,
            var: &models.forecast,
            history: &history,
            t1,
            horizon: t_len,
            curves,
        };
        let mut forecast = Forecast {
            demand: vec![obs_d.clone()],
            wind: vec![obs_w.clone()],
        };
        forecast
            .demand
            .extend(demand_bar.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()));
        forecast.wind.extend(nominal_wind_power(&input, SetKind::Dus)?);
        Ok(IntervalInputs {
            t1,
            observed_demand: obs_d,
            observed_wind: obs_w,
            demand_bar,
            forecast,
            history,
        })
    }

    /// Demand set times wind trajectory set for periods 2..=T.
    pub fn uncertainty_set(
        &self,
        grid: &Grid,
        models: &FittedModels,
        spec: &SetSpec,
        cfg: &SimConfig,
    ) -> Result<Polyhedron> {
        self.set_with_curves(&farm_curves(grid), models, spec, cfg)
    }

    fn set_with_curves(
        &self,
        curves: &[PowerCurvePWL],
        models: &FittedModels,
        spec: &SetSpec,
        cfg: &SimConfig,
    ) -> Result<Polyhedron> {
        let input = WindSetInput {
            seasonal: &models.seasonal,
            var: models.robust.as_ref().unwrap_or(&models.forecast),
            history: &self.history,
            t1: self.t1,
            horizon: cfg.horizon,
            curves,
        };
        let d_hat = self.demand_bar.map(|v| v * cfg.demand_std_frac);
        let dset = build_demand_set(&self.demand_bar, &d_hat, spec.gamma_d)?;
        let wset = build_wind_trajectory_set(&input, spec)?;
        product_set(&dset, &wset)
    }
}

struct Outcome {
    dispatch: PeriodDispatch,
    objective: f64,
    iterations: usize,
    fallback: bool,
}

fn first_of(schedule: DispatchSchedule) -> PeriodDispatch {
    schedule.periods.into_iter().next().expect("schedule has period 1")
}

/// Runs the configured policy over the data and returns the realized
/// metrics.
///
/// The first `cfg.train_days` days are used only for the initial fit. The
/// initial dispatch is a single-period ED without ramp limits on the first
/// simulated interval's observations.
pub fn run_rolling_horizon(grid: &Grid, data: &SimData, cfg: &SimConfig) -> Result<SimMetrics> {
    cfg.validate()?;
    data.validate(grid)?;
    let need = cfg.rows_needed();
    if data.wind.len() < need || data.demand.len() < need {
        return Err(Error::InsufficientData(format!(
            "run needs {need} intervals of wind and demand, have {} and {}",
            data.wind.len(),
            data.demand.len()
        )));
    }
    grid.ptdf()?;
    let curves = farm_curves(grid);
    let stage2: Option<CompactStage2> = match cfg.policy {
        Policy::Rob(_) => Some(build_second_stage(grid, cfg.horizon, &cfg.penalties)?),
        _ => None,
    };

    let start = cfg.start_row();
    let (d0, w0) = observe(data, &curves, start);
    let init = solve_la_ed(
        grid,
        &Forecast {
            demand: vec![d0],
            wind: vec![w0],
        },
        None,
        &cfg.penalties,
    )?;
    let p0 = first_of(init);
    let mut prev = PrevDispatch { pg: p0.pg, pw: p0.pw };

    let mut models: Option<FittedModels> = None;
    let mut oracle: Option<AdOracle> = None;
    let mut records = Vec::with_capacity(cfg.intervals());
    for step in 0..cfg.intervals() {
        let k = start + step;
        if step % cfg.refit_every == 0 || models.is_none() {
            models = Some(FittedModels::fit(&data.wind, k, cfg)?);
            log::debug!("refit at row {k}");
        }
        let m = models.as_ref().expect("models fitted");
        let inputs = IntervalInputs::with_curves(&curves, data, m, cfg, k)?;
        let t1 = inputs.t1;

        let clock = Instant::now();
        let la = |prev: &PrevDispatch| -> Result<Outcome> {
            let s = solve_la_ed(grid, &inputs.forecast, Some(prev), &cfg.penalties)?;
            Ok(Outcome {
                iterations: s.iterations,
                objective: s.objective,
                dispatch: first_of(s),
                fallback: false,
            })
        };
        let outcome = match &cfg.policy {
            Policy::La => la(&prev)?,
            Policy::ResLa { res_factor } => {
                let s = solve_res_la_ed(
                    grid,
                    &inputs.forecast,
                    Some(&prev),
                    &cfg.penalties,
                    *res_factor,
                    cfg.reserve_caps.as_deref(),
                    cfg.reserve_shortfall,
                )?;
                Outcome {
                    iterations: s.iterations,
                    objective: s.objective,
                    dispatch: first_of(s),
                    fallback: false,
                }
            }
            Policy::Rob(spec) => {
                let stage2 = stage2.as_ref().expect("built for the robust policy");
                let attempt = (|| -> Result<Option<Outcome>> {
                    let stage1 = build_first_stage(
                        grid,
                        &inputs.observed_demand,
                        &inputs.observed_wind,
                        Some(&prev),
                        &cfg.penalties,
                    )?;
                    let set = inputs.set_with_curves(&curves, m, spec, cfg)?;
                    // Retargeting patches changed coefficients in place, so the
                    // oracle's LPs stay warm between intervals.
                    match oracle.as_mut() {
                        Some(o) => o.retarget(stage2, &set)?,
                        None => oracle = Some(AdOracle::new(stage2, &set, cfg.ccg.ad)?),
                    }
                    let o = oracle.as_mut().expect("oracle set above");
                    let sol = solve_robust_ed_with(&stage1, stage2, o, &set.nominal_xi(), &cfg.ccg)?;
                    if !sol.converged {
                        return Ok(None);
                    }
                    Ok(Some(Outcome {
                        iterations: sol.iterations,
                        objective: sol.objective(),
                        dispatch: sol.schedule.periods[0].clone(),
                        fallback: false,
                    }))
                })();
                match attempt {
                    Ok(Some(o)) => o,
                    Ok(None) => {
                        log::warn!("interval {t1}: CCG did not converge, using LA-ED");
                        Outcome { fallback: true, ..la(&prev)? }
                    }
                    Err(e) => {
                        oracle = None;
                        log::warn!("interval {t1}: robust solve failed ({e}), using LA-ED");
                        Outcome { fallback: true, ..la(&prev)? }
                    }
                }
            }
        };
        let solve_ms = clock.elapsed().as_secs_f64() * 1e3;
        let d = outcome.dispatch;
        let c = interval_cost(grid, &d, &cfg.penalties);
        records.push(IntervalRecord {
            t: t1,
            cost: c.total,
            penalty: c.penalty,
            s_plus: d.s_plus,
            s_minus: d.s_minus,
            thermal_mw: d.thermal_total(),
            wind_mw: d.wind_total(),
            wind_available_mw: inputs.observed_wind.iter().sum(),
            pg: d.pg.clone(),
            pw: d.pw.clone(),
            objective: outcome.objective,
            solver_iters: outcome.iterations,
            solve_ms,
            fallback: outcome.fallback,
        });
        prev = PrevDispatch { pg: d.pg, pw: d.pw };
    }
    Ok(SimMetrics::from_records(records))
}

// ---- sweeps -------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub variant: SetKind,
    pub gamma_w: f64,
    pub gamma_d: f64,
    pub gamma_t: Option<f64>,
    /// Aggregate metrics, or the error that stopped the cell.
    pub result: std::result::Result<SimMetrics, String>,
}

/// One rolling-horizon run per (variant, Γʷ, Γᵈ) cell on the same data.
/// `cfg.policy` supplies Γᵀ and the lag order when it is robust. A failing
/// cell is reported in its row and does not stop the sweep.
pub fn sweep_gamma(
    grid: &Grid,
    data: &SimData,
    gamma_w: &[f64],
    gamma_d: &[f64],
    variants: &[SetKind],
    cfg: &SimConfig,
) -> Result<Vec<SweepRow>> {
    if gamma_w.is_empty() || gamma_d.is_empty() || variants.is_empty() {
        return Err(Error::Config("sweep lists must be nonempty".into()));
    }
    let base = match &cfg.policy {
        Policy::Rob(spec) => spec.clone(),
        _ => SetSpec {
            lags: cfg.lags,
            ..SetSpec::default()
        },
    };
    let mut rows = Vec::with_capacity(variants.len() * gamma_w.len() * gamma_d.len());
    for &kind in variants {
        for &gw in gamma_w {
            for &gd in gamma_d {
                let spec = SetSpec {
                    kind,
                    gamma_w: gw,
                    gamma_d: gd,
                    ..base.clone()
                };
                let cell = SimConfig {
                    policy: Policy::Rob(spec),
                    ..cfg.clone()
                };
                let result = run_rolling_horizon(grid, data, &cell)
                    .map(|m| m.summary())
                    .map_err(|e| e.to_string());
                match &result {
                    Ok(m) => log::info!(
                        "sweep cell {kind} Γw={gw} Γd={gd}: avg {:.2} std {:.2}",
                        m.cost_avg,
                        m.cost_std
                    ),
                    Err(e) => log::warn!("sweep cell {kind} Γw={gw} Γd={gd} failed: {e}"),
                }
                rows.push(SweepRow {
                    variant: kind,
                    gamma_w: gw,
                    gamma_d: gd,
                    gamma_t: base.gamma_t,
                    result,
                });
            }
        }
    }
    Ok(rows)
}

// ---- CSV output ---------------------------------------------------------------------

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn aggregate_fields(m: &SimMetrics) -> Vec<String> {
    vec![
        m.intervals.to_string(),
        m.cost_avg.to_string(),
        m.cost_std.to_string(),
        m.penalty_avg.to_string(),
        m.penalty_freq.to_string(),
        m.thermal_avg.to_string(),
        m.wind_avg.to_string(),
        m.fallbacks.to_string(),
    ]
}

const AGGREGATE_HEADER: [&str; 8] = [
    "intervals",
    "cost_avg",
    "cost_std",
    "penalty_avg",
    "penalty_freq",
    "thermal_avg",
    "wind_avg",
    "fallbacks",
];

pub const METRICS_HEADER_PREFIX: [&str; 6] = ["policy", "variant", "res_factor", "gamma_w", "gamma_d", "gamma_t"];

/// One-row metrics table. Floats use the shortest round-trip formatting so
/// identical runs give identical bytes.
pub fn write_metrics_csv(writer: impl Write, policy: &Policy, metrics: &SimMetrics) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = METRICS_HEADER_PREFIX.to_vec();
    header.extend(AGGREGATE_HEADER);
    w.write_record(&header).map_err(csv_err)?;
    let (variant, res, gw, gd, gt) = match policy {
        Policy::La => (String::new(), None, None, None, None),
        Policy::ResLa { res_factor } => (String::new(), Some(*res_factor), None, None, None),
        Policy::Rob(s) => (s.kind.to_string(), None, Some(s.gamma_w), Some(s.gamma_d), s.gamma_t),
    };
    let mut rec = vec![policy.name().to_string(), variant, opt(res), opt(gw), opt(gd), opt(gt)];
    rec.extend(aggregate_fields(metrics));
    w.write_record(&rec).map_err(csv_err)?;
    w.flush().map_err(csv_err)?;
    Ok(())
}

pub const INTERVAL_HEADER: [&str; 12] = [
    "t",
    "cost",
    "penalty",
    "s_plus",
    "s_minus",
    "thermal_mw",
    "wind_mw",
    "wind_available_mw",
    "objective",
    "solver_iters",
    "solve_ms",
    "fallback",
];

pub fn write_intervals_csv(writer: impl Write, metrics: &SimMetrics) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(INTERVAL_HEADER).map_err(csv_err)?;
    for r in &metrics.records {
        w.write_record([
            r.t.to_string(),
            r.cost.to_string(),
            r.penalty.to_string(),
            r.s_plus.to_string(),
            r.s_minus.to_string(),
            r.thermal_mw.to_string(),
            r.wind_mw.to_string(),
            r.wind_available_mw.to_string(),
            r.objective.to_string(),
            r.solver_iters.to_string(),
            format!("{:.3}", r.solve_ms),
            (r.fallback as u8).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;
    Ok(())
}

pub fn write_sweep_csv(writer: impl Write, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["variant", "gamma_w", "gamma_d", "gamma_t"];
    header.extend(AGGREGATE_HEADER);
    header.push("status");
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.variant.to_string(),
            r.gamma_w.to_string(),
            r.gamma_d.to_string(),
            opt(r.gamma_t),
        ];
        match &r.result {
            Ok(m) => {
                rec.extend(aggregate_fields(m));
                rec.push("ok".into());
            }
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), AGGREGATE_HEADER.len()));
                rec.push(format!("failed: {e}"));
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)?;
    Ok(())
}

/// Non-dominated sweep rows in (cost avg, cost std), sorted by average.
pub fn pareto_frontier(rows: &[SweepRow]) -> Vec<&SweepRow> {
    let ok: Vec<(&SweepRow, &SimMetrics)> = rows.iter().filter_map(|r| r.result.as_ref().ok().map(|m| (r, m))).collect();
    let mut front: Vec<(&SweepRow, &SimMetrics)> = ok
        .iter()
        .filter(|(_, m)| {
            !ok.iter().any(|(_, o)| {
                o.cost_avg <= m.cost_avg
                    && o.cost_std <= m.cost_std
                    && (o.cost_avg < m.cost_avg || o.cost_std < m.cost_std)
            })
        })
        .copied()
        .collect();
    front.sort_by(|a, b| a.1.cost_avg.total_cmp(&b.1.cost_avg));
    front.into_iter().map(|(r, _)| r).collect()
}
