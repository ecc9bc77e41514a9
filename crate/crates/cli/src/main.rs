use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use robust_dispatch::ccg::solve_robust_ed;
use robust_dispatch::config::{PolicyKind, RunConfig};
use robust_dispatch::dispatch::{
    build_first_stage, build_second_stage, solve_la_ed, solve_res_la_ed, DispatchSchedule, Forecast, Stage1Region,
};
use robust_dispatch::grid::Grid;
use robust_dispatch::lp::{LpProblem, Sense};
use robust_dispatch::sim::{
    daily_demand_profile, pareto_frontier, run_rolling_horizon, sweep_gamma, write_intervals_csv, write_metrics_csv,
    write_sweep_csv, DemandSeries, Policy, SimData, SYNTHETIC_START_MINUTE,
};
use robust_dispatch::uncertainty::{
    build_demand_set, build_wind_trajectory_set, nominal_wind_power, product_set, SetKind, WindSetInput,
};
use robust_dispatch::wind::{fit_var, seasonal_residuals, simulate_wind, WindModel, WindSeries, PERIODS_PER_DAY};

#[derive(Parser)]
#[command(name = "robust-dispatch", version, about = "Robust look-ahead economic dispatch with wind uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the seasonal and VAR wind model from a wind CSV.
    Estimate(Common),
    /// Solve one dispatch problem from the end of a wind record.
    Solve(SolveArgs),
    /// Run the rolling-horizon simulation.
    Simulate(Common),
    /// Simulate a grid of uncertainty budgets and write the frontier table.
    Sweep(SweepArgs),
    /// Write seeded synthetic wind and demand CSVs.
    Generate(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    wind: Option<PathBuf>,
    #[arg(long)]
    demand: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_parser = ["la", "res-la", "rob"])]
    policy: Option<String>,
    #[arg(long = "gamma-w")]
    gamma_w: Option<f64>,
    #[arg(long = "gamma-d")]
    gamma_d: Option<f64>,
    #[arg(long = "gamma-t")]
    gamma_t: Option<f64>,
    #[arg(long, value_parser = ["dus", "sus1", "sus2"])]
    variant: Option<String>,
    #[arg(long)]
    lags: Option<usize>,
    /// Look-ahead periods.
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    days: Option<usize>,
    /// Stop after this many simulated intervals.
    #[arg(long)]
    intervals: Option<usize>,
    #[arg(long = "res-factor")]
    res_factor: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Also write the CCG bound trace.
    #[arg(long)]
    trace: bool,
    /// Write the first-stage region and uncertainty set in LP format.
    #[arg(long = "dump-lp")]
    dump_lp: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated Γʷ values.
    #[arg(long = "gamma-w-list", value_delimiter = ',')]
    gamma_w_list: Option<Vec<f64>>,
    /// Comma-separated Γᵈ values.
    #[arg(long = "gamma-d-list", value_delimiter = ',')]
    gamma_d_list: Option<Vec<f64>>,
    /// Comma-separated set variants.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Estimate(c) => estimate(&c),
        Command::Solve(a) => solve(&a),
        Command::Simulate(c) => simulate(&c),
        Command::Sweep(a) => sweep(&a),
        Command::Generate(c) => generate(&c),
    }
}

/// Loads the configuration file, if any, and applies the flags on top.
fn run_config(c: &Common) -> Result<RunConfig> {
    let mut rc = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src.clone() {
                $dst = Some(v);
            }
        };
    }
    set!(rc.grid, c.grid);
    set!(rc.wind, c.wind);
    set!(rc.demand, c.demand);
    set!(rc.model, c.model);
    set!(rc.out, c.out);
    set!(rc.seed, c.seed);
    set!(rc.sim.lags, c.lags);
    set!(rc.sim.horizon, c.horizon);
    set!(rc.sim.days, c.days);
    set!(rc.sim.max_intervals, c.intervals);
    set!(rc.policy.gamma_w, c.gamma_w);
    set!(rc.policy.gamma_d, c.gamma_d);
    set!(rc.policy.gamma_t, c.gamma_t);
    set!(rc.policy.res_factor, c.res_factor);
    if let Some(p) = &c.policy {
        rc.policy.kind = Some(p.parse::<PolicyKind>()?);
    }
    if let Some(v) = &c.variant {
        rc.policy.variant = Some(v.parse::<SetKind>()?);
    }
    Ok(rc)
}

fn out_dir(rc: &RunConfig) -> Result<PathBuf> {
    let dir = rc.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_grid(rc: &RunConfig) -> Result<Grid> {
    let path = rc.grid.as_ref().context("--grid is required")?;
    Grid::load(path).with_context(|| format!("loading grid {}", path.display()))
}

fn estimate(c: &Common) -> Result<()> {
    let rc = run_config(c)?;
    let wind_path = rc.wind.as_ref().context("--wind is required")?;
    let series = WindSeries::read_csv(wind_path)?;
    let model = WindModel::fit(&series, rc.lags())?;
    let path = match &rc.model {
        Some(p) => p.clone(),
        None => out_dir(&rc)?.join("model.json"),
    };
    model.save(&path)?;
    println!(
        "fitted {} sites, {} lags on {} samples -> {}",
        model.var.n_sites(),
        model.var.lags(),
        series.len(),
        path.display()
    );
    Ok(())
}

fn stage1_lp(s: &Stage1Region) -> LpProblem {
    let mut lp = LpProblem::new(Sense::Minimize);
    for j in 0..s.n_cols() {
        lp.add_named_col(&s.col_labels[j], s.cost[j], s.col_lower[j], s.col_upper[j]);
    }
    for r in 0..s.row_lower.len() {
        let e: Vec<(usize, f64)> = s.rows.row(r).collect();
        lp.add_named_row(&s.row_labels[r], s.row_lower[r], s.row_upper[r], &e);
    }
    lp
}

fn write_schedule(path: &Path, grid: &Grid, s: &DispatchSchedule) -> Result<()> {
    let mut w = create(path)?;
    let mut header = vec!["period".to_string()];
    header.extend((1..=grid.n_gens()).map(|i| format!("pg_{i}")));
    header.extend((1..=grid.n_wind()).map(|i| format!("pw_{i}")));
    header.extend(["s_plus".into(), "s_minus".into()]);
    writeln!(w, "{}", header.join(","))?;
    for (t, p) in s.periods.iter().enumerate() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(p.pg.iter().chain(&p.pw).map(|v| v.to_string()));
        row.extend([p.s_plus.to_string(), p.s_minus.to_string()]);
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn solve(a: &SolveArgs) -> Result<()> {
    let rc = run_config(&a.common)?;
    let grid = load_grid(&rc)?;
    let cfg = rc.sim_config()?;
    let wind_path = rc.wind.as_ref().context("--wind is required (the last row is period 1)")?;
    let series = WindSeries::read_csv(wind_path)?;
    let model = match &rc.model {
        Some(p) => WindModel::load(p)?,
        None => WindModel::fit(&series, rc.lags())?,
    };
    if series.n_sites() != grid.n_wind() {
        bail!("wind record has {} sites, grid has {} farms", series.n_sites(), grid.n_wind());
    }
    let last = series.len() - 1;
    let t1 = series.time_index(last);
    let need = model.var.lags().max(1);
    if series.len() < need {
        bail!("need at least {need} wind rows");
    }
    let history: Vec<Vec<f64>> = (series.len() - need..series.len()).map(|k| series.row(k)).collect();
    let curves: Vec<_> = grid.windfarms.iter().map(|w| w.power_curve.clone()).collect();
    let profile = daily_demand_profile(&grid);
    let obs_d = match &rc.demand {
        Some(p) => {
            let d = DemandSeries::read_csv(p)?;
            d.row(d.len() - 1)
        }
        None => profile.at(t1),
    };
    let obs_w: Vec<f64> = curves.iter().zip(series.row(last)).map(|(c, r)| c.available(r)).collect();
    let t_len = cfg.horizon;
    let d_bar = profile.series(t1 + 1, t_len - 1);
    let input = WindSetInput {
        seasonal: &model.seasonal,
        var: &model.var,
        history: &history,
        t1,
        horizon: t_len,
        curves: &curves,
    };
    let mut forecast = Forecast {
        demand: vec![obs_d.clone()],
        wind: vec![obs_w.clone()],
    };
    forecast.demand.extend(d_bar.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()));
    forecast.wind.extend(nominal_wind_power(&input, SetKind::Dus)?);
    let dir = out_dir(&rc)?;
    let stage1 = build_first_stage(&grid, &obs_d, &obs_w, None, &cfg.penalties)?;
    if a.dump_lp {
        std::fs::write(dir.join("stage1.lp"), stage1_lp(&stage1).to_lp_string())?;
    }
    let schedule = match &cfg.policy {
        Policy::La => solve_la_ed(&grid, &forecast, None, &cfg.penalties)?,
        Policy::ResLa { res_factor } => solve_res_la_ed(
            &grid,
            &forecast,
            None,
            &cfg.penalties,
            *res_factor,
            cfg.reserve_caps.as_deref(),
            cfg.reserve_shortfall,
        )?,
        Policy::Rob(spec) => {
            let stage2 = build_second_stage(&grid, t_len, &cfg.penalties)?;
            // Static sets describe the marginal residual spread, as in the
            // simulator.
            let marginal;
            let input = match spec.kind {
                SetKind::Dus => input,
                SetKind::Sus1 | SetKind::Sus2 => {
                    marginal = fit_var(&seasonal_residuals(&series, &model.seasonal)?, 0)?;
                    WindSetInput { var: &marginal, ..input }
                }
            };
            let d_hat = d_bar.map(|v| v * cfg.demand_std_frac);
            let set = product_set(
                &build_demand_set(&d_bar, &d_hat, spec.gamma_d)?,
                &build_wind_trajectory_set(&input, spec)?,
            )?;
            if a.dump_lp {
                std::fs::write(dir.join("uncertainty.lp"), set.to_lp_string())?;
            }
            let sol = solve_robust_ed(&stage1, &stage2, &set, &cfg.ccg)?;
            println!(
                "CCG: {} iterations, LB {:.6}, UB {:.6}, converged {}",
                sol.iterations, sol.lower_bound, sol.upper_bound, sol.converged
            );
            if a.trace {
                let mut w = create(&dir.join("trace.csv"))?;
                writeln!(w, "iteration,lower_bound,upper_bound,alternations,xi_min,xi_max")?;
                for r in &sol.trace {
                    writeln!(
                        w,
                        "{},{},{},{},{},{}",
                        r.iteration, r.lower_bound, r.upper_bound, r.alternations, r.xi_min, r.xi_max
                    )?;
                }
                w.flush()?;
            }
            DispatchSchedule {
                objective: sol.objective(),
                ..sol.schedule
            }
        }
    };
    write_schedule(&dir.join("schedule.csv"), &grid, &schedule)?;
    println!("{} objective {:.6}", cfg.policy.name(), schedule.objective);
    Ok(())
}

/// Wind and demand for a run: files when given, seeded synthetic data
/// otherwise.
fn sim_data(rc: &RunConfig, grid: &Grid, rows: usize) -> Result<SimData> {
    let seed = rc.seed();
    let profile = daily_demand_profile(grid);
    let days = rows.div_ceil(PERIODS_PER_DAY);
    let wind = match &rc.wind {
        Some(p) => WindSeries::read_csv(p)?,
        None => SimData::synthetic(grid, days, seed)?.wind,
    };
    let demand = match &rc.demand {
        Some(p) => DemandSeries::read_csv(p)?,
        None => SimData::demand_for(&wind, &profile, rc.sim_config()?.demand_std_frac, seed)?,
    };
    Ok(SimData { wind, demand, profile })
}

fn simulate(c: &Common) -> Result<()> {
    let rc = run_config(c)?;
    let grid = load_grid(&rc)?;
    let cfg = rc.sim_config()?;
    let data = sim_data(&rc, &grid, cfg.rows_needed())?;
    let metrics = run_rolling_horizon(&grid, &data, &cfg)?;
    let dir = out_dir(&rc)?;
    let mut w = create(&dir.join("metrics.csv"))?;
    write_metrics_csv(&mut w, &cfg.policy, &metrics)?;
    w.flush()?;
    let mut w = create(&dir.join("intervals.csv"))?;
    write_intervals_csv(&mut w, &metrics)?;
    w.flush()?;
    println!(
        "{} intervals: cost avg {:.2} std {:.2}, penalty avg {:.2} freq {:.2}%, fallbacks {}",
        metrics.intervals,
        metrics.cost_avg,
        metrics.cost_std,
        metrics.penalty_avg,
        100.0 * metrics.penalty_freq,
        metrics.fallbacks
    );
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let mut rc = run_config(&a.common)?;
    if let Some(v) = &a.gamma_w_list {
        rc.sweep.gamma_w = Some(v.clone());
    }
    if let Some(v) = &a.gamma_d_list {
        rc.sweep.gamma_d = Some(v.clone());
    }
    if let Some(v) = &a.variants {
        rc.sweep.variants = Some(v.iter().map(|s| s.parse::<SetKind>()).collect::<Result<_, _>>()?);
    }
    rc.policy.kind = Some(PolicyKind::Rob);
    let grid = load_grid(&rc)?;
    let cfg = rc.sim_config()?;
    let data = sim_data(&rc, &grid, cfg.rows_needed())?;
    let (gw, gd, variants) = rc.sweep_lists();
    let rows = sweep_gamma(&grid, &data, &gw, &gd, &variants, &cfg)?;
    let dir = out_dir(&rc)?;
    let mut w = create(&dir.join("frontier.csv"))?;
    write_sweep_csv(&mut w, &rows)?;
    w.flush()?;
    for r in pareto_frontier(&rows) {
        let m = r.result.as_ref().expect("frontier rows succeeded");
        println!(
            "frontier: {} Γw={} Γd={} avg {:.2} std {:.2}",
            r.variant, r.gamma_w, r.gamma_d, m.cost_avg, m.cost_std
        );
    }
    Ok(())
}

fn generate(c: &Common) -> Result<()> {
    let rc = run_config(c)?;
    let grid = load_grid(&rc)?;
    let cfg = rc.sim_config()?;
    let seed = rc.seed();
    let data = match &rc.model {
        Some(p) => {
            let m = WindModel::load(p)?;
            let wind = simulate_wind(&m.seasonal, &m.var, seed, cfg.rows_needed(), SYNTHETIC_START_MINUTE)?;
            let profile = daily_demand_profile(&grid);
            let demand = SimData::demand_for(&wind, &profile, cfg.demand_std_frac, seed)?;
            SimData { wind, demand, profile }
        }
        None => SimData::synthetic(&grid, cfg.train_days + cfg.days, seed)?,
    };
    let dir = out_dir(&rc)?;
    data.wind.write_csv_file(dir.join("wind.csv"))?;
    data.demand.write_csv_file(dir.join("demand.csv"))?;
    println!("wrote {} intervals to {}", data.wind.len(), dir.display());
    Ok(())
}
