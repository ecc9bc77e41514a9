//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a hard criterion fails. Criteria 7 and 8 are soft: a failure
//! prints a report but does not fail the run.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_dispatch::ccg::{
    eval_q_ad, exact_q_enum, solve_robust_ed, solve_robust_ed_with, solve_vertex_equivalent, AdOptions, CcgOptions,
    EnumOracle, RobustSolution,
};
use robust_dispatch::dispatch::{
    build_first_stage, build_second_stage, CompactStage2, Penalties, PrevDispatch, Stage1Region,
};
use robust_dispatch::grid::{compute_ptdf, Grid};
use robust_dispatch::sim::{
    run_rolling_horizon, sweep_gamma, FittedModels, IntervalInputs, Policy, SimConfig, SimData, SimMetrics, SweepRow,
};
use robust_dispatch::uncertainty::{Polyhedron, SetKind, SetSpec};
use robust_dispatch::wind::{
    chol, fit_seasonal, fit_var, simulate_residuals, SeasonalModel, VarModel, WindSeries, PERIODS_PER_DAY,
};

const FIXTURE: &str = include_str!("../../core/fixtures/14bus.json");
const FIXTURE_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/14bus.json");
const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixture() -> Grid {
    let mut g = Grid::from_json_str(FIXTURE).unwrap();
    g.compute_and_cache_ptdf().unwrap();
    g
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn robust(kind: SetKind, gamma_w: f64, gamma_d: f64) -> Policy {
    Policy::Rob(SetSpec {
        kind,
        gamma_w,
        gamma_d,
        ..SetSpec::default()
    })
}

// ---- 1 ------------------------------------------------------------------------

fn zero_budget_equivalence() -> Outcome {
    let clock = Instant::now();
    let g = fixture();
    let data = SimData::synthetic(&g, 9, SEED).unwrap();
    let cfg = |policy| SimConfig {
        policy,
        max_intervals: Some(200),
        ..SimConfig::default()
    };
    let la = run_rolling_horizon(&g, &data, &cfg(Policy::La)).unwrap();
    let rob = run_rolling_horizon(&g, &data, &cfg(robust(SetKind::Dus, 0.0, 0.0))).unwrap();
    let mut worst_obj = 0.0f64;
    let mut worst_dispatch = 0.0f64;
    for (a, b) in la.records.iter().zip(&rob.records) {
        worst_obj = worst_obj.max(rel(b.objective, a.objective));
        let pa = a.pg.iter().chain(&a.pw).chain([&a.s_plus, &a.s_minus]);
        let pb = b.pg.iter().chain(&b.pw).chain([&b.s_plus, &b.s_minus]);
        for (x, y) in pa.zip(pb) {
            worst_dispatch = worst_dispatch.max(rel(*y, *x));
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    let n = la.records.len().min(rob.records.len());
    outcome(
        n == 200 && worst_obj <= 1e-6 && worst_dispatch <= 1e-6 && secs < 120.0,
        format!("{n} intervals, max rel diff objective {worst_obj:.1e}, dispatch {worst_dispatch:.1e}, {secs:.1}s"),
    )
}

// ---- tiny instances (2, 3, 4) ------------------------------------------------------

struct Tiny {
    stage1: Stage1Region,
    stage2: CompactStage2,
    set: Polyhedron,
}

/// Two generators, one farm, T = 3, and a box over the four ξ components.
fn tiny(seed: u64) -> Tiny {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gen = |bus: u32| {
        let pmin = rng.gen_range(0.0..20.0);
        let pmax = rng.gen_range(40.0..120.0);
        let ramp = rng.gen_range(5.0..40.0);
        let cost = rng.gen_range(10.0..60.0);
        let prev = rng.gen_range(pmin..pmax);
        (
            format!(r#"{{"bus": {bus}, "pmin": {pmin}, "pmax": {pmax}, "ramp_up": {ramp}, "cost": {cost}}}"#),
            prev,
        )
    };
    let (g1, p1) = gen(1);
    let (g2, p2) = gen(2);
    let pwmax = rng.gen_range(20.0..80.0);
    let text = format!(
        r#"{{
        "buses": [1, 2],
        "lines": [{{"from": 1, "to": 2, "reactance": 0.1, "flow_limit": 1000}}],
        "generators": [{g1}, {g2}],
        "windfarms": [{{"bus": 2, "pwmax": {pwmax}}}],
        "loads": [{{"bus": 2, "p_mw": 100}}],
        "power_curve": {{"speeds": [3, 12], "powers": [0, {pwmax}], "pieces": 1}}
    }}"#
    );
    let mut grid = Grid::from_json_str(&text).unwrap();
    grid.compute_and_cache_ptdf().unwrap();
    let pen = Penalties::default();
    let demand = rng.gen_range(40.0..160.0);
    let wind = rng.gen_range(0.0..pwmax);
    let prev = PrevDispatch {
        pg: vec![p1, p2],
        pw: vec![rng.gen_range(0.0..pwmax)],
    };
    let stage1 = build_first_stage(&grid, &[demand], &[wind], Some(&prev), &pen).unwrap();
    let stage2 = build_second_stage(&grid, 3, &pen).unwrap();
    let n = stage2.n_xi();
    let nd = (stage2.horizon - 1) * stage2.n_loads;
    let (mut lo, mut hi, mut nom) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let (c, r) = if k < nd {
            (demand + rng.gen_range(-10.0..10.0), rng.gen_range(0.0..30.0))
        } else {
            (rng.gen_range(0.0..pwmax), rng.gen_range(0.0..30.0))
        };
        lo[k] = (c - r).max(0.0);
        hi[k] = c + r;
        nom[k] = c;
    }
    let set = Polyhedron::boxed((0..n).map(|k| format!("xi{k}")).collect(), &lo, &hi, &nom);
    Tiny { stage1, stage2, set }
}

struct TinyRun {
    exact: f64,
    enumerated: RobustSolution,
    ad: RobustSolution,
    vertices: usize,
}

fn tiny_runs() -> &'static [TinyRun] {
    static RUNS: OnceLock<Vec<TinyRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let opts = CcgOptions::default();
        (0..100)
            .map(|seed| {
                let t = tiny(seed);
                let verts = t.set.xi_vertices(100).unwrap();
                let (exact, _) = solve_vertex_equivalent(&t.stage1, &t.stage2, &verts).unwrap();
                let mut oracle = EnumOracle::new(&t.stage2, &t.set, 100).unwrap();
                let enumerated =
                    solve_robust_ed_with(&t.stage1, &t.stage2, &mut oracle, &t.set.nominal_xi(), &opts).unwrap();
                let ad = solve_robust_ed(&t.stage1, &t.stage2, &t.set, &opts).unwrap();
                TinyRun {
                    exact,
                    enumerated,
                    ad,
                    vertices: verts.len(),
                }
            })
            .collect()
    })
}

fn ccg_exactness() -> Outcome {
    let runs = tiny_runs();
    let max_vertices = runs.iter().map(|r| r.vertices).max().unwrap_or(0);
    let enum_err = runs.iter().map(|r| rel(r.enumerated.objective(), r.exact)).fold(0.0, f64::max);
    let ad_excess = runs
        .iter()
        .map(|r| (r.ad.objective() - r.exact) / r.exact.abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let equal = runs.iter().filter(|r| rel(r.ad.objective(), r.exact) <= 1e-7).count();
    let pass = max_vertices <= 16 && enum_err <= 1e-7 && ad_excess <= 1e-6;
    outcome(
        pass,
        format!(
            "{} instances, ≤{max_vertices} vertices, enum-CCG max rel err {enum_err:.1e}, \
             AD-CCG max excess {ad_excess:.1e}, AD equal to exact in {equal}/{}",
            runs.len(),
            runs.len()
        ),
    )
}

fn ad_ordering() -> Outcome {
    let opts = AdOptions::default();
    let (mut checks, mut worst, mut drops, mut singleton_bad) = (0, f64::NEG_INFINITY, 0, 0);
    for (seed, run) in tiny_runs().iter().enumerate() {
        let t = tiny(seed as u64);
        let mid: Vec<f64> = t
            .stage1
            .col_lower
            .iter()
            .zip(&t.stage1.col_upper)
            .map(|(l, u)| if u.is_finite() { (l + u) / 2.0 } else { *l })
            .collect();
        for x in [mid, run.enumerated.x.clone(), run.ad.x.clone()] {
            let r = eval_q_ad(&x, &t.stage2, &t.set, &opts, None).unwrap();
            let (exact, _) = exact_q_enum(&x, &t.stage2, &t.set, 100).unwrap();
            worst = worst.max(r.value - exact);
            drops += r.history.windows(2).filter(|w| w[1] < w[0] - 1e-9 * w[0].abs().max(1.0)).count();
            let single = Polyhedron::singleton(t.set.xi_labels().iter().map(|s| s.to_string()).collect(), &t.set.nominal_xi());
            let s = eval_q_ad(&x, &t.stage2, &single, &opts, None).unwrap();
            if !(s.converged && s.alternations == 1) {
                singleton_bad += 1;
            }
            checks += 1;
        }
    }
    outcome(
        worst <= 1e-6 && drops == 0 && singleton_bad == 0,
        format!(
            "{checks} evaluations, max AD − exact {worst:.1e}, decreasing alternation steps {drops}, \
             singleton sets needing more than one alternation {singleton_bad}"
        ),
    )
}

fn lb_monotone(sol: &RobustSolution) -> bool {
    sol.trace
        .windows(2)
        .all(|w| w[1].lower_bound >= w[0].lower_bound - 1e-9 * w[0].lower_bound.abs().max(1.0))
}

fn gap_ok(sol: &RobustSolution) -> bool {
    sol.upper_bound - sol.lower_bound <= 1e-4 * sol.upper_bound.abs().max(1.0)
}

fn master_bounds() -> Outcome {
    let mut bad = 0;
    for r in tiny_runs() {
        for sol in [&r.enumerated, &r.ad] {
            if !lb_monotone(sol) || (sol.converged && !gap_ok(sol)) || !sol.converged {
                bad += 1;
            }
        }
    }

    // Rolling robust run on the 14-bus fixture, T = 9 and L = 6.
    let g = fixture();
    let data = SimData::synthetic(&g, 8, SEED).unwrap();
    let cfg = SimConfig {
        policy: robust(SetKind::Dus, 1.0, 1.0),
        max_intervals: Some(PERIODS_PER_DAY),
        ..SimConfig::default()
    };
    let m = run_rolling_horizon(&g, &data, &cfg).unwrap();
    let max_iters = m.records.iter().map(|r| r.solver_iters).max().unwrap_or(0);
    let max_ms = m.records.iter().map(|r| r.solve_ms).fold(0.0, f64::max);

    // Direct solves with the bound trace at a few of those intervals.
    let models = FittedModels::fit(&data.wind, cfg.start_row(), &cfg).unwrap();
    let spec = match &cfg.policy {
        Policy::Rob(s) => s.clone(),
        _ => unreachable!(),
    };
    let stage2 = build_second_stage(&g, cfg.horizon, &cfg.penalties).unwrap();
    let mut direct_bad = 0;
    let mut direct_ms = 0.0f64;
    for step in (1..PERIODS_PER_DAY).step_by(12) {
        let k = cfg.start_row() + step;
        let inputs = IntervalInputs::new(&g, &data, &models, &cfg, k).unwrap();
        let prev = &m.records[step - 1];
        let prev = PrevDispatch {
            pg: prev.pg.clone(),
            pw: prev.pw.clone(),
        };
        let stage1 =
            build_first_stage(&g, &inputs.observed_demand, &inputs.observed_wind, Some(&prev), &cfg.penalties).unwrap();
        let set = inputs.uncertainty_set(&g, &models, &spec, &cfg).unwrap();
        let clock = Instant::now();
        let sol = solve_robust_ed(&stage1, &stage2, &set, &cfg.ccg).unwrap();
        direct_ms = direct_ms.max(clock.elapsed().as_secs_f64() * 1e3);
        if !(sol.converged && lb_monotone(&sol) && gap_ok(&sol) && sol.iterations <= 50) {
            direct_bad += 1;
        }
    }
    let pass = bad == 0 && max_iters <= 50 && max_ms <= 5000.0 && m.fallbacks == 0 && direct_bad == 0;
    outcome(
        pass,
        format!(
            "tiny-instance violations {bad}; 14-bus: {} robust solves, max {max_iters} iterations, \
             max {max_ms:.1} ms, fallbacks {}; traced solves failing {direct_bad}, max {direct_ms:.1} ms",
            m.records.len(),
            m.fallbacks
        ),
    )
}

// ---- 5 ------------------------------------------------------------------------

fn companion_radius(a: &[DMatrix<f64>]) -> f64 {
    let n = a[0].nrows();
    let l = a.len();
    let mut c = DMatrix::zeros(n * l, n * l);
    for (s, m) in a.iter().enumerate() {
        c.view_mut((0, s * n), (n, n)).copy_from(m);
    }
    for s in 1..l {
        c.view_mut((s * n, (s - 1) * n), (n, n)).fill_with_identity();
    }
    c.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn estimation_recovery() -> Outcome {
    let a1 = DMatrix::from_row_slice(
        4,
        4,
        &[0.5, 0.1, 0.0, 0.05, 0.0, 0.45, 0.1, 0.0, 0.05, 0.0, 0.4, 0.1, 0.1, 0.05, 0.0, 0.35],
    );
    let a2 = DMatrix::from_row_slice(
        4,
        4,
        &[0.2, 0.0, 0.05, 0.0, 0.05, 0.15, 0.0, 0.0, 0.0, 0.05, 0.2, 0.0, 0.0, 0.0, 0.05, 0.25],
    );
    // Scaling A1 by c and A2 by c² scales the companion spectrum by c.
    let c = 0.8 / companion_radius(&[a1.clone(), a2.clone()]);
    let a = vec![a1 * c, a2 * (c * c)];
    let radius = companion_radius(&a);
    let sigma = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.4 });
    let truth = VarModel::new(a.clone(), sigma.clone()).unwrap();
    let data = simulate_residuals(&truth, 2024, 10_000);
    let fit = fit_var(&data, 2).unwrap();
    let var_err = fit.a.iter().zip(&a).map(|(f, t)| (f - t).abs().max()).fold(0.0, f64::max);
    let chol_err = (&fit.b * fit.b.transpose() - &fit.sigma).abs().max();
    let chol_true = chol(&sigma).map(|b| (&b * b.transpose() - &sigma).abs().max()).unwrap_or(f64::INFINITY);

    let coeffs = vec![vec![8.0, 1.5, -0.7, 0.3, 0.2], vec![6.5, -0.4, 1.1, -0.25, 0.6]];
    let model = SeasonalModel::daily(coeffs.clone());
    let n = 3 * PERIODS_PER_DAY;
    let start = 21_000_000i64;
    let speeds = DMatrix::from_fn(n, 2, |k, i| model.eval(start / 10 + k as i64)[i]);
    let series = WindSeries::new(start, 10, speeds).unwrap();
    let fitted = fit_seasonal(&series).unwrap();
    let seasonal_err = fitted
        .coefficients
        .iter()
        .flatten()
        .zip(coeffs.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        (radius - 0.8).abs() < 1e-9 && var_err <= 0.05 && seasonal_err <= 1e-6 && chol_err <= 1e-10 && chol_true <= 1e-10,
        format!(
            "VAR(2) radius {radius:.3}: max |ΔA| {var_err:.4}; seasonal max err {seasonal_err:.1e}; \
             BBᵀ−Σ {chol_err:.1e} (fitted), {chol_true:.1e} (true)"
        ),
    )
}

// ---- 6 ------------------------------------------------------------------------

fn ptdf_correctness() -> Outcome {
    let g = Grid::from_json_str(
        r#"{
        "buses": [1, 2, 3],
        "lines": [
            {"from": 1, "to": 2, "reactance": 0.1, "flow_limit": 100},
            {"from": 2, "to": 3, "reactance": 0.1, "flow_limit": 100},
            {"from": 1, "to": 3, "reactance": 0.1, "flow_limit": 100}
        ],
        "generators": [{"bus": 2, "pmin": 0, "pmax": 100, "ramp_up": 10, "cost": 10}],
        "loads": [{"bus": 1, "p_mw": 50}]
    }"#,
    )
    .unwrap();
    let a = compute_ptdf(&g, 1).unwrap();
    // One MW from bus 2 to bus 1: two thirds direct, one third via bus 3.
    let split = (a[(0, 1)] + 2.0 / 3.0).abs().max((a[(1, 1)] - 1.0 / 3.0).abs()).max((a[(2, 1)] + 1.0 / 3.0).abs());
    let injections = [
        nalgebra::DVector::from_column_slice(&[-40.0, 25.0, 15.0]),
        nalgebra::DVector::from_column_slice(&[10.0, -30.0, 20.0]),
    ];
    let mut slack = 0.0f64;
    for p in &injections {
        let base = &a * p;
        for s in [2, 3] {
            slack = slack.max((compute_ptdf(&g, s).unwrap() * p - &base).abs().max());
        }
    }
    outcome(split <= 1e-9 && slack <= 1e-9, format!("split error {split:.1e}, slack dependence {slack:.1e}"))
}

// ---- 7, 8 ---------------------------------------------------------------------

fn sweep_rows() -> &'static [SweepRow] {
    static ROWS: OnceLock<Vec<SweepRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let g = fixture();
        let cfg = SimConfig {
            days: 35,
            policy: robust(SetKind::Dus, 0.0, 0.0),
            ..SimConfig::default()
        };
        let data = SimData::synthetic(&g, cfg.train_days + cfg.days, SEED).unwrap();
        let gw: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        sweep_gamma(&g, &data, &gw, &[0.0], &[SetKind::Dus, SetKind::Sus2], &cfg).unwrap()
    })
}

fn metrics_of(rows: &[SweepRow], kind: SetKind) -> Vec<(f64, &SimMetrics)> {
    rows.iter()
        .filter(|r| r.variant == kind)
        .filter_map(|r| r.result.as_ref().ok().map(|m| (r.gamma_w, m)))
        .collect()
}

fn table(points: &[(f64, &SimMetrics)]) -> String {
    points
        .iter()
        .map(|(g, m)| format!("Γ={g}: avg {:.2} std {:.2}", m.cost_avg, m.cost_std))
        .collect::<Vec<_>>()
        .join("; ")
}

fn directional_budget_sweep() -> Outcome {
    let rows = sweep_rows();
    let dus = metrics_of(rows, SetKind::Dus);
    // Pairs ordered against the budget; at most one is allowed.
    let mut inversions = 0;
    for i in 0..dus.len() {
        for j in i + 1..dus.len() {
            if dus[j].1.cost_std >= dus[i].1.cost_std {
                inversions += 1;
            }
        }
    }
    let base = dus.iter().find(|(g, _)| *g == 0.0).map(|(_, m)| m.cost_avg);
    let better = dus.iter().filter(|(g, m)| *g > 0.0 && base.is_some_and(|b| m.cost_avg < b)).count();
    outcome(
        dus.len() == 11 && inversions <= 1 && better > 0,
        format!(
            "DUS std inversions {inversions}, Γ>0 points cheaper than Γ=0: {better}; {}",
            table(&dus)
        ),
    )
}

fn dus_dominates_sus2() -> Outcome {
    let rows = sweep_rows();
    let dus = metrics_of(rows, SetKind::Dus);
    let sus = metrics_of(rows, SetKind::Sus2);
    let undominated: Vec<f64> = sus
        .iter()
        .filter(|(_, s)| {
            !dus.iter().any(|(_, d)| {
                d.cost_avg <= s.cost_avg
                    && d.cost_std <= s.cost_std
                    && (d.cost_avg < s.cost_avg || d.cost_std < s.cost_std)
            })
        })
        .map(|(g, _)| *g)
        .collect();
    outcome(
        sus.len() == 11 && undominated.is_empty(),
        format!("SUS2 points not dominated by DUS: {undominated:?}; SUS2: {}", table(&sus)),
    )
}

// ---- 9 ------------------------------------------------------------------------

fn wind_cliff() -> Outcome {
    let g = fixture();
    let mut data = SimData::synthetic(&g, 8, 3).unwrap();
    let cfg = |policy| SimConfig {
        policy,
        days: 1,
        max_intervals: Some(90),
        ..SimConfig::default()
    };
    let start = cfg(Policy::La).start_row();
    let cliff = 60;
    for k in start..data.wind.len() {
        let speed = if k < start + cliff { 11.5 } else { 2.0 };
        for i in 0..data.wind.n_sites() {
            data.wind.speeds[(k, i)] = speed;
        }
    }
    let la = run_rolling_horizon(&g, &data, &cfg(Policy::La)).unwrap();
    let rob = run_rolling_horizon(&g, &data, &cfg(robust(SetKind::Dus, 1.0, 0.0))).unwrap();
    let drop = la.records[cliff - 1].wind_available_mw - la.records[cliff].wind_available_mw;
    let ramp: f64 = g.gens.iter().map(|x| x.ramp_up).sum();
    let short: Vec<_> = la.records.iter().filter(|r| r.s_plus > 1e-6).collect();
    let exact = short
        .iter()
        .all(|r| r.s_minus == 0.0 && (r.penalty - 1000.0 * r.s_plus).abs() <= 1e-12 * r.penalty.max(1.0));
    let (pl, pr) = (la.total_penalty(), rob.total_penalty());
    outcome(
        drop > ramp && !short.is_empty() && exact && pr <= pl + 1e-9,
        format!(
            "available wind drops {drop:.1} MW against {ramp} MW of ramp; LA-ED s⁺ in {} intervals \
             (first {:.2} MW, penalty ${:.2}); total penalty LA-ED ${pl:.2}, Rob-ED ${pr:.2}, fallbacks {}",
            short.len(),
            short.first().map_or(0.0, |r| r.s_plus),
            short.first().map_or(0.0, |r| r.penalty),
            rob.fallbacks
        ),
    )
}

// ---- 10 -----------------------------------------------------------------------

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_robust-dispatch")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "robust-dispatch {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Every output of every command, into `dir`.
fn cli_outputs(dir: &Path) {
    let d = |sub: &str| dir.join(sub).to_string_lossy().into_owned();
    let gen = d("gen");
    let wind = format!("{gen}/wind.csv");
    let model = format!("{}/model.json", d("est"));
    run_cli(&["generate", "--grid", FIXTURE_PATH, "--days", "1", "--seed", "7", "--out", &gen]);
    run_cli(&["estimate", "--wind", &wind, "--out", &d("est")]);
    for policy in ["la", "rob"] {
        let out = d(&format!("solve-{policy}"));
        run_cli(&[
            "solve", "--grid", FIXTURE_PATH, "--wind", &wind, "--model", &model, "--policy", policy, "--gamma-w",
            "0.5", "--trace", "--out", &out,
        ]);
    }
    for policy in ["la", "res-la", "rob"] {
        let out = d(&format!("sim-{policy}"));
        run_cli(&[
            "simulate", "--grid", FIXTURE_PATH, "--policy", policy, "--gamma-w", "0.5", "--days", "1",
            "--intervals", "36", "--seed", "7", "--out", &out,
        ]);
    }
    run_cli(&[
        "sweep", "--grid", FIXTURE_PATH, "--days", "1", "--intervals", "18", "--gamma-w-list", "0,0.5",
        "--variants", "dus,sus2", "--seed", "7", "--out", &d("sweep"),
    ]);
}

/// File contents with the wall-clock column of per-interval files removed.
fn comparable(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    if path.file_name().is_some_and(|n| n == "intervals.csv") {
        let header: Vec<&str> = text.lines().next().unwrap_or("").split(',').collect();
        let skip = header.iter().position(|h| *h == "solve_ms");
        return text
            .lines()
            .map(|l| {
                l.split(',')
                    .enumerate()
                    .filter(|(i, _)| Some(*i) != skip)
                    .map(|(_, v)| v)
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("\n");
    }
    text
}

fn files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn cli_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cli_outputs(a.path());
    cli_outputs(b.path());
    let fa = files(a.path());
    let fb = files(b.path());
    let mut differing = Vec::new();
    for (x, y) in fa.iter().zip(&fb) {
        if x.strip_prefix(a.path()) != y.strip_prefix(b.path()) || comparable(x) != comparable(y) {
            differing.push(x.strip_prefix(a.path()).unwrap().display().to_string());
        }
    }
    let csvs = fa.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")).count();
    outcome(
        fa.len() == fb.len() && differing.is_empty() && csvs >= 10,
        format!("{} files ({csvs} CSV) compared across two runs, differing: {differing:?}", fa.len()),
    )
}

fn main() {
    let criteria: [(&str, bool, fn() -> Outcome); 10] = [
        ("zero-budget equivalence", false, zero_budget_equivalence),
        ("CCG exactness at tiny scale", false, ccg_exactness),
        ("AD ordering and monotonicity", false, ad_ordering),
        ("master bounds", false, master_bounds),
        ("estimation recovery", false, estimation_recovery),
        ("PTDF correctness", false, ptdf_correctness),
        ("budget sweep direction", true, directional_budget_sweep),
        ("DUS frontier dominates SUS2", true, dus_dominates_sus2),
        ("penalty mechanics", false, wind_cliff),
        ("CLI determinism", false, cli_determinism),
    ];
    // ACCEPTANCE_ONLY=1,5,9 runs a subset.
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut hard_failures = 0;
    for (i, (name, soft, check)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let clock = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let status = match (result.pass, soft) {
            (true, _) => "PASS",
            (false, true) => "FAIL (soft)",
            (false, false) => "FAIL",
        };
        if !result.pass && !soft {
            hard_failures += 1;
        }
        println!(
            "criterion {:>2} {name}: {status} [{:.1}s] {}",
            i + 1,
            clock.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if hard_failures > 0 {
        println!("{hard_failures} hard criteria failed");
        std::process::exit(1);
    }
}
