//! Dispatch LP construction: the first-stage region, the compact second
//! stage `G y ≥ h − E x − M ξ`, the scenario master LP and the deterministic
//! look-ahead baselines.
//!
//! Decision blocks share one layout per period: thermal outputs, wind
//! outputs, then the balance slacks `s⁺` (under-generation) and `s⁻`
//! (over-generation). The balance reads `Σpᵍ + Σpʷ + s⁺ − s⁻ = Σd`.
//! Slack power does not enter line flows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lp::{LpModel, LpProblem, LpSolution, LpStatus, Sense, SparseRows, INF};

pub const DEFAULT_UNDER_PENALTY: f64 = 6000.0;
pub const DEFAULT_OVER_PENALTY: f64 = 600.0;
const TINY: f64 = 1e-12;

/// Balance penalties in $/MWh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    /// C⁺, priced on under-generation `s⁺`.
    pub under: f64,
    /// C⁻, priced on over-generation `s⁻`.
    pub over: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Penalties {
            under: DEFAULT_UNDER_PENALTY,
            over: DEFAULT_OVER_PENALTY,
        }
    }
}

/// Outputs implemented in the previous interval.
#[derive(Clone, Debug, PartialEq)]
pub struct PrevDispatch {
    pub pg: Vec<f64>,
    pub pw: Vec<f64>,
}

/// Column positions inside one period block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub n_gens: usize,
    pub n_wind: usize,
}

impl BlockLayout {
    pub fn of(grid: &Grid) -> Self {
        BlockLayout {
            n_gens: grid.n_gens(),
            n_wind: grid.n_wind(),
        }
    }

    pub fn width(&self) -> usize {
        self.n_gens + self.n_wind + 2
    }

    pub fn pg(&self, i: usize) -> usize {
        i
    }

    pub fn pw(&self, i: usize) -> usize {
        self.n_gens + i
    }

    pub fn s_plus(&self) -> usize {
        self.n_gens + self.n_wind
    }

    pub fn s_minus(&self) -> usize {
        self.n_gens + self.n_wind + 1
    }

    fn costs(&self, grid: &Grid, pen: &Penalties) -> Vec<f64> {
        let mut c: Vec<f64> = grid.gens.iter().map(|g| g.cost).collect();
        c.extend(grid.windfarms.iter().map(|w| w.cost));
        c.push(pen.under);
        c.push(pen.over);
        c
    }

    fn labels(&self, t: usize) -> Vec<String> {
        let mut l: Vec<String> = (0..self.n_gens).map(|i| format!("pg_t{t}_g{}", i + 1)).collect();
        l.extend((0..self.n_wind).map(|i| format!("pw_t{t}_w{}", i + 1)));
        l.push(format!("splus_t{t}"));
        l.push(format!("sminus_t{t}"));
        l
    }

    /// Splits a block of values into a period record.
    pub fn period(&self, values: &[f64]) -> PeriodDispatch {
        PeriodDispatch {
            pg: values[..self.n_gens].to_vec(),
            pw: values[self.n_gens..self.n_gens + self.n_wind].to_vec(),
            s_plus: values[self.s_plus()],
            s_minus: values[self.s_minus()],
        }
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what}: expected {want} values, got {got}")))
    }
}

/// The period-1 feasible region Ω₁ over `x = (pᵍ₁, pʷ₁, s⁺₁, s⁻₁)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage1Region {
    pub layout: BlockLayout,
    pub cost: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub col_labels: Vec<String>,
    pub rows: SparseRows,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    pub row_labels: Vec<String>,
    pub obs_demand: Vec<f64>,
    pub obs_wind: Vec<f64>,
    pub prev: Option<PrevDispatch>,
}

impl Stage1Region {
    pub fn n_cols(&self) -> usize {
        self.cost.len()
    }
}

/// Builds Ω₁ from observed period-1 demand and available wind. Without a
/// previous dispatch the ramp limits are omitted.
pub fn build_first_stage(
    grid: &Grid,
    obs_d1: &[f64],
    obs_wind1: &[f64],
    prev: Option<&PrevDispatch>,
    pen: &Penalties,
) -> Result<Stage1Region> {
    check_len("period-1 demand", obs_d1.len(), grid.n_loads())?;
    check_len("period-1 available wind", obs_wind1.len(), grid.n_wind())?;
    if obs_d1.iter().chain(obs_wind1).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Dimension("observations must be finite and nonnegative".into()));
    }
    if let Some(p) = prev {
        check_len("previous thermal dispatch", p.pg.len(), grid.n_gens())?;
        check_len("previous wind dispatch", p.pw.len(), grid.n_wind())?;
    }
    let sf = grid.ptdf()?;
    let layout = BlockLayout::of(grid);
    let mut lo = Vec::with_capacity(layout.width());
    let mut up = Vec::with_capacity(layout.width());
    for (i, g) in grid.gens.iter().enumerate() {
        let (mut l, mut u) = (g.pmin, g.pmax);
        if let Some(p) = prev {
            l = l.max(p.pg[i] - g.ramp_down);
            u = u.min(p.pg[i] + g.ramp_up);
        }
        if l > u + 1e-9 {
            return Err(Error::Infeasible(format!(
                "generator {i}: previous output {:?} leaves no room inside its box",
                prev.map(|p| p.pg[i])
            )));
        }
        lo.push(l);
        up.push(u.max(l));
    }
    for (i, w) in grid.windfarms.iter().enumerate() {
        let mut u = w.pwmax.min(obs_wind1[i]);
        let mut l: f64 = 0.0;
        if let Some(p) = prev {
            u = u.min(p.pw[i] + w.ramp_up);
            l = l.max(p.pw[i] - w.ramp_down);
        }
        // Wind that is no longer available cannot be forced on.
        lo.push(l.min(u));
        up.push(u);
    }
    lo.extend([0.0, 0.0]);
    up.extend([INF, INF]);

    let mut rows = SparseRows::new();
    let (mut row_lower, mut row_upper, mut row_labels) = (Vec::new(), Vec::new(), Vec::new());
    for (l, line) in grid.lines.iter().enumerate() {
        let mut entries = Vec::new();
        for i in 0..layout.n_gens {
            entries.push((layout.pg(i), sf.gen[(l, i)]));
        }
        for i in 0..layout.n_wind {
            entries.push((layout.pw(i), sf.wind[(l, i)]));
        }
        entries.retain(|e| e.1.abs() > TINY);
        let load_flow: f64 = (0..grid.n_loads()).map(|j| sf.load[(l, j)] * obs_d1[j]).sum();
        if entries.is_empty() {
            continue;
        }
        rows.push_row(&entries);
        row_lower.push(-line.flow_limit + load_flow);
        row_upper.push(line.flow_limit + load_flow);
        row_labels.push(format!("line_t1_l{}", l + 1));
    }
    let mut balance: Vec<(usize, f64)> = (0..layout.n_gens + layout.n_wind).map(|c| (c, 1.0)).collect();
    balance.push((layout.s_plus(), 1.0));
    balance.push((layout.s_minus(), -1.0));
    let total: f64 = obs_d1.iter().sum();
    rows.push_row(&balance);
    row_lower.push(total);
    row_upper.push(total);
    row_labels.push("balance_t1".into());

    Ok(Stage1Region {
        layout,
        cost: layout.costs(grid, pen),
        col_lower: lo,
        col_upper: up,
        col_labels: layout.labels(1),
        rows,
        row_lower,
        row_upper,
        row_labels,
        obs_demand: obs_d1.to_vec(),
        obs_wind: obs_wind1.to_vec(),
        prev: prev.cloned(),
    })
}

/// Second-stage constraints for periods 2..=T as ranged rows
/// `lower ≤ A_y y + A_x x + A_ξ ξ ≤ upper`.
///
/// The `≥` form used by the dual is obtained by [`CompactStage2::ge_form`]:
/// each finite side becomes one row of `G y ≥ h − E x − M ξ`, so equalities
/// appear as paired inequalities.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactStage2 {
    pub horizon: usize,
    pub layout: BlockLayout,
    pub n_loads: usize,
    /// Cost vector b over y.
    pub cost: Vec<f64>,
    pub y_labels: Vec<String>,
    pub rows_y: SparseRows,
    pub rows_x: SparseRows,
    pub rows_xi: SparseRows,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub labels: Vec<String>,
}

/// The `≥` form `G y ≥ h − E x − M ξ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeForm {
    pub g: SparseRows,
    pub h: Vec<f64>,
    pub e: SparseRows,
    pub m: SparseRows,
    /// Logical row and side (`false` = lower, `true` = upper) of each row.
    pub origin: Vec<(usize, bool)>,
}

impl CompactStage2 {
    pub fn n_y(&self) -> usize {
        self.cost.len()
    }

    pub fn n_x(&self) -> usize {
        self.layout.width()
    }

    pub fn n_xi(&self) -> usize {
        (self.horizon - 1) * (self.n_loads + self.layout.n_wind)
    }

    pub fn n_rows(&self) -> usize {
        self.lower.len()
    }

    /// Index of y in period `t` (2-based) at block offset `off`.
    pub fn y(&self, t: usize, off: usize) -> usize {
        (t - 2) * self.layout.width() + off
    }

    /// Index of demand `d_{t,j}` in ξ.
    pub fn xi_demand(&self, t: usize, j: usize) -> usize {
        (t - 2) * self.n_loads + j
    }

    /// Index of available wind `p̄_{t,i}` in ξ.
    pub fn xi_wind(&self, t: usize, i: usize) -> usize {
        (self.horizon - 1) * self.n_loads + (t - 2) * self.layout.n_wind + i
    }

    /// `A_x x + A_ξ ξ` for logical row `r`.
    pub fn shift(&self, r: usize, x: &[f64], xi: &[f64]) -> f64 {
        self.rows_x.dot_row(r, x) + self.rows_xi.dot_row(r, xi)
    }

    pub fn ge_form(&self) -> GeForm {
        let mut out = GeForm {
            g: SparseRows::new(),
            h: Vec::new(),
            e: SparseRows::new(),
            m: SparseRows::new(),
            origin: Vec::new(),
        };
        for r in 0..self.n_rows() {
            let y: Vec<(usize, f64)> = self.rows_y.row(r).collect();
            let x: Vec<(usize, f64)> = self.rows_x.row(r).collect();
            let xi: Vec<(usize, f64)> = self.rows_xi.row(r).collect();
            if self.lower[r].is_finite() {
                out.g.push_row(&y);
                out.e.push_row(&x);
                out.m.push_row(&xi);
                out.h.push(self.lower[r]);
                out.origin.push((r, false));
            }
            if self.upper[r].is_finite() {
                let neg = |v: &[(usize, f64)]| v.iter().map(|&(j, a)| (j, -a)).collect::<Vec<_>>();
                out.g.push_row(&neg(&y));
                out.e.push_row(&neg(&x));
                out.m.push_row(&neg(&xi));
                out.h.push(-self.upper[r]);
                out.origin.push((r, true));
            }
        }
        out
    }

    /// Flattens per-period forecasts (rows 2..=T of `demand`/`wind`, each
    /// with T rows) into ξ.
    pub fn xi_from_forecast(&self, demand: &[Vec<f64>], wind: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_len("demand forecast periods", demand.len(), self.horizon)?;
        check_len("wind forecast periods", wind.len(), self.horizon)?;
        let mut xi = Vec::with_capacity(self.n_xi());
        for row in &demand[1..] {
            check_len("demand forecast row", row.len(), self.n_loads)?;
            xi.extend(row);
        }
        for row in &wind[1..] {
            check_len("wind forecast row", row.len(), self.layout.n_wind)?;
            xi.extend(row);
        }
        Ok(xi)
    }
}

/// Builds the second-stage rows for periods 2..=T.
pub fn build_second_stage(grid: &Grid, horizon: usize, pen: &Penalties) -> Result<CompactStage2> {
    if horizon < 2 {
        return Err(Error::Dimension("second stage needs a horizon of at least 2".into()));
    }
    let sf = grid.ptdf()?;
    let layout = BlockLayout::of(grid);
    let w = layout.width();
    let mut s = CompactStage2 {
        horizon,
        layout,
        n_loads: grid.n_loads(),
        cost: Vec::new(),
        y_labels: Vec::new(),
        rows_y: SparseRows::new(),
        rows_x: SparseRows::new(),
        rows_xi: SparseRows::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        labels: Vec::new(),
    };
    let block_cost = layout.costs(grid, pen);
    for t in 2..=horizon {
        s.cost.extend(&block_cost);
        s.y_labels.extend(layout.labels(t));
    }
    let push = |s: &mut CompactStage2,
                    label: String,
                    lo: f64,
                    up: f64,
                    y: &[(usize, f64)],
                    x: &[(usize, f64)],
                    xi: &[(usize, f64)]| {
        s.rows_y.push_row(y);
        s.rows_x.push_row(x);
        s.rows_xi.push_row(xi);
        s.lower.push(lo);
        s.upper.push(up);
        s.labels.push(label);
    };
    for t in 2..=horizon {
        let base = (t - 2) * w;
        for (i, g) in grid.gens.iter().enumerate() {
            let yi = base + layout.pg(i);
            push(&mut s, format!("pgbox_t{t}_g{}", i + 1), g.pmin, g.pmax, &[(yi, 1.0)], &[], &[]);
            if t == 2 {
                push(
                    &mut s,
                    format!("rampg_t{t}_g{}", i + 1),
                    -g.ramp_down,
                    g.ramp_up,
                    &[(yi, 1.0)],
                    &[(layout.pg(i), -1.0)],
                    &[],
                );
            } else {
                push(
                    &mut s,
                    format!("rampg_t{t}_g{}", i + 1),
                    -g.ramp_down,
                    g.ramp_up,
                    &[(yi - w, -1.0), (yi, 1.0)],
                    &[],
                    &[],
                );
            }
        }
        for (i, wf) in grid.windfarms.iter().enumerate() {
            let yi = base + layout.pw(i);
            push(&mut s, format!("pwbox_t{t}_w{}", i + 1), 0.0, wf.pwmax, &[(yi, 1.0)], &[], &[]);
            let xi_idx = s.xi_wind(t, i);
            push(&mut s, format!("avail_t{t}_w{}", i + 1), -INF, 0.0, &[(yi, 1.0)], &[], &[(xi_idx, -1.0)]);
            if t == 2 {
                push(
                    &mut s,
                    format!("rampw_t{t}_w{}", i + 1),
                    -wf.ramp_down,
                    wf.ramp_up,
                    &[(yi, 1.0)],
                    &[(layout.pw(i), -1.0)],
                    &[],
                );
            } else {
                push(
                    &mut s,
                    format!("rampw_t{t}_w{}", i + 1),
                    -wf.ramp_down,
                    wf.ramp_up,
                    &[(yi - w, -1.0), (yi, 1.0)],
                    &[],
                    &[],
                );
            }
        }
        for (l, line) in grid.lines.iter().enumerate() {
            let mut y = Vec::new();
            for i in 0..layout.n_gens {
                y.push((base + layout.pg(i), sf.gen[(l, i)]));
            }
            for i in 0..layout.n_wind {
                y.push((base + layout.pw(i), sf.wind[(l, i)]));
            }
            y.retain(|e| e.1.abs() > TINY);
            if y.is_empty() {
                continue;
            }
            let mut xi: Vec<(usize, f64)> = (0..grid.n_loads()).map(|j| (s.xi_demand(t, j), -sf.load[(l, j)])).collect();
            xi.retain(|e| e.1.abs() > TINY);
            push(&mut s, format!("line_t{t}_l{}", l + 1), -line.flow_limit, line.flow_limit, &y, &[], &xi);
        }
        let mut y: Vec<(usize, f64)> = (0..layout.n_gens + layout.n_wind).map(|c| (base + c, 1.0)).collect();
        y.push((base + layout.s_plus(), 1.0));
        y.push((base + layout.s_minus(), -1.0));
        let xi: Vec<(usize, f64)> = (0..grid.n_loads()).map(|j| (s.xi_demand(t, j), -1.0)).collect();
        push(&mut s, format!("balance_t{t}"), 0.0, 0.0, &y, &[], &xi);
        push(&mut s, format!("splus_t{t}"), 0.0, INF, &[(base + layout.s_plus(), 1.0)], &[], &[]);
        push(&mut s, format!("sminus_t{t}"), 0.0, INF, &[(base + layout.s_minus(), 1.0)], &[], &[]);
    }
    Ok(s)
}

/// Column bounds implied by rows that involve a single y variable and no
/// first-stage variable, for a fixed ξ. Such rows are not added as rows.
pub(crate) fn implied_bounds(stage2: &CompactStage2, xi: &[f64], with_x: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let n = stage2.n_y();
    let (mut lo, mut up) = (vec![-INF; n], vec![INF; n]);
    for r in 0..stage2.n_rows() {
        if stage2.rows_y.row_len(r) != 1 || (with_x.is_none() && stage2.rows_x.row_len(r) != 0) {
            continue;
        }
        let (j, a) = stage2.rows_y.row(r).next().expect("single entry");
        let shift = stage2.rows_xi.dot_row(r, xi) + with_x.map_or(0.0, |x| stage2.rows_x.dot_row(r, x));
        let (l, u) = (stage2.lower[r] - shift, stage2.upper[r] - shift);
        let (l, u) = if a > 0.0 { (l / a, u / a) } else { (u / a, l / a) };
        lo[j] = lo[j].max(l);
        up[j] = up[j].min(u);
    }
    (lo, up)
}

/// Whether logical row `r` is folded into column bounds in the master.
fn is_master_bound(stage2: &CompactStage2, r: usize) -> bool {
    stage2.rows_y.row_len(r) == 1 && stage2.rows_x.row_len(r) == 0
}

/// The scenario master `min cᵀx + η` s.t. `x ∈ Ω₁`, `η ≥ bᵀy_l` and
/// second-stage feasibility of each `y_l` under its scenario `ξ_l`.
pub struct MasterLp {
    model: LpModel,
    n_x: usize,
    eta: usize,
    scenario_cols: Vec<usize>,
    n_y: usize,
}

#[derive(Clone, Debug)]
pub struct MasterSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub eta: f64,
    /// Recourse decisions per scenario, in insertion order.
    pub y: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl MasterLp {
    /// Master without scenarios; with no second stage `η` is fixed at zero.
    pub fn new(stage1: &Stage1Region, stage2: Option<&CompactStage2>) -> Result<Self> {
        let mut lp = LpProblem::new(Sense::Minimize);
        for j in 0..stage1.n_cols() {
            lp.add_named_col(stage1.col_labels[j].clone(), stage1.cost[j], stage1.col_lower[j], stage1.col_upper[j]);
        }
        let eta = match stage2 {
            Some(_) => lp.add_named_col("eta", 1.0, -INF, INF),
            None => lp.add_named_col("eta", 1.0, 0.0, 0.0),
        };
        for r in 0..stage1.row_lower.len() {
            let entries: Vec<(usize, f64)> = stage1.rows.row(r).collect();
            lp.add_named_row(stage1.row_labels[r].clone(), stage1.row_lower[r], stage1.row_upper[r], &entries);
        }
        Ok(MasterLp {
            model: LpModel::new(&lp)?,
            n_x: stage1.n_cols(),
            eta,
            scenario_cols: Vec::new(),
            n_y: stage2.map_or(0, |s| s.n_y()),
        })
    }

    pub fn n_scenarios(&self) -> usize {
        self.scenario_cols.len()
    }

    /// Adds a recourse block for scenario `xi` with its rows and the epigraph
    /// cut `η ≥ bᵀy`.
    pub fn add_scenario(&mut self, stage2: &CompactStage2, xi: &[f64]) -> Result<()> {
        check_len("scenario ξ", xi.len(), stage2.n_xi())?;
        let (lo, up) = implied_bounds(stage2, xi, None);
        let first = self.model.add_cols(&vec![0.0; stage2.n_y()], &lo, &up)?;
        self.scenario_cols.push(first);
        let mut rows = SparseRows::new();
        let (mut rl, mut ru) = (Vec::new(), Vec::new());
        for r in 0..stage2.n_rows() {
            if is_master_bound(stage2, r) {
                continue;
            }
            let mut entries: Vec<(usize, f64)> = stage2.rows_y.row(r).map(|(j, a)| (first + j, a)).collect();
            entries.extend(stage2.rows_x.row(r));
            let shift = stage2.rows_xi.dot_row(r, xi);
            rows.push_row(&entries);
            rl.push(stage2.lower[r] - shift);
            ru.push(stage2.upper[r] - shift);
        }
        let mut cut = vec![(self.eta, 1.0)];
        cut.extend(stage2.cost.iter().enumerate().map(|(j, &b)| (first + j, -b)));
        rows.push_row(&cut);
        rl.push(0.0);
        ru.push(INF);
        self.model.add_rows(&rl, &ru, &rows)?;
        Ok(())
    }

    pub fn solve(&mut self) -> Result<MasterSolution> {
        let sol: LpSolution = self.model.solve()?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::Infeasible("master LP".into())),
            LpStatus::Unbounded => return Err(Error::Solver("master LP is unbounded".into())),
        }
        let y = self
            .scenario_cols
            .iter()
            .map(|&c| sol.primal[c..c + self.n_y].to_vec())
            .collect();
        Ok(MasterSolution {
            objective: sol.objective,
            x: sol.primal[..self.n_x].to_vec(),
            eta: sol.primal[self.eta],
            y,
            iterations: sol.iterations,
        })
    }
}

/// Implemented outputs of one period.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodDispatch {
    pub pg: Vec<f64>,
    pub pw: Vec<f64>,
    pub s_plus: f64,
    pub s_minus: f64,
}

impl PeriodDispatch {
    pub fn thermal_total(&self) -> f64 {
        self.pg.iter().sum()
    }

    pub fn wind_total(&self) -> f64 {
        self.pw.iter().sum()
    }

    /// `Σpᵍ + Σpʷ + s⁺ − s⁻ − Σd`.
    pub fn balance_residual(&self, demand_total: f64) -> f64 {
        self.thermal_total() + self.wind_total() + self.s_plus - self.s_minus - demand_total
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispatchSchedule {
    pub periods: Vec<PeriodDispatch>,
    /// Optimal objective in raw $/MWh weights summed over the horizon.
    pub objective: f64,
    /// Reserve per period and generator, for the reserve-augmented model.
    pub reserves: Option<Vec<Vec<f64>>>,
    pub iterations: usize,
}

impl DispatchSchedule {
    pub fn first(&self) -> &PeriodDispatch {
        &self.periods[0]
    }
}

/// Point forecasts for periods 1..=T; row 0 is the observed period 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecast {
    /// T rows of per-load demand (MW).
    pub demand: Vec<Vec<f64>>,
    /// T rows of per-farm available wind (MW).
    pub wind: Vec<Vec<f64>>,
}

impl Forecast {
    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if self.demand.is_empty() || self.demand.len() != self.wind.len() {
            return Err(Error::Dimension("forecast must have T ≥ 1 demand and wind rows".into()));
        }
        for row in &self.demand {
            check_len("demand forecast row", row.len(), grid.n_loads())?;
        }
        for row in &self.wind {
            check_len("wind forecast row", row.len(), grid.n_wind())?;
        }
        Ok(())
    }
}

/// Deterministic look-ahead ED: one LP over all T periods with point
/// forecasts. Built as the scenario master with the single nominal scenario,
/// so the robust model with a zero budget produces the same LP.
pub fn solve_la_ed(
    grid: &Grid,
    forecast: &Forecast,
    prev: Option<&PrevDispatch>,
    pen: &Penalties,
) -> Result<DispatchSchedule> {
    forecast.validate(grid)?;
    let t_len = forecast.horizon();
    let stage1 = build_first_stage(grid, &forecast.demand[0], &forecast.wind[0], prev, pen)?;
    if t_len == 1 {
        let mut master = MasterLp::new(&stage1, None)?;
        let sol = master.solve()?;
        return Ok(DispatchSchedule {
            periods: vec![stage1.layout.period(&sol.x)],
            objective: sol.objective,
            reserves: None,
            iterations: sol.iterations,
        });
    }
    let stage2 = build_second_stage(grid, t_len, pen)?;
    let xi = stage2.xi_from_forecast(&forecast.demand, &forecast.wind)?;
    let mut master = MasterLp::new(&stage1, Some(&stage2))?;
    master.add_scenario(&stage2, &xi)?;
    let sol = master.solve()?;
    Ok(schedule_from_master(&stage1, &stage2, &sol))
}

pub(crate) fn schedule_from_master(stage1: &Stage1Region, stage2: &CompactStage2, sol: &MasterSolution) -> DispatchSchedule {
    let w = stage1.layout.width();
    let mut periods = vec![stage1.layout.period(&sol.x)];
    if let Some(y) = sol.y.first() {
        periods.extend((0..stage2.horizon - 1).map(|k| stage1.layout.period(&y[k * w..(k + 1) * w])));
    }
    DispatchSchedule {
        periods,
        objective: sol.objective,
        reserves: None,
        iterations: sol.iterations,
    }
}

/// What to do when generator headroom cannot cover the reserve requirement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReserveShortfall {
    /// Allow a shortfall priced at the under-generation penalty C⁺.
    #[default]
    Penalize,
    /// Report the LP as infeasible.
    Strict,
}

/// Look-ahead ED with spinning reserve: `R_it ∈ [0, R̄_i]`, `pᵍ_it + R_it ≤
/// p̄ᵍ_i` and `Σ_i R_it ≥ res_factor · max(0, Σd_t − Σp̄ʷ_t)`.
///
/// Reserve caps default to each generator's ramp-up rate.
pub fn solve_res_la_ed(
    grid: &Grid,
    forecast: &Forecast,
    prev: Option<&PrevDispatch>,
    pen: &Penalties,
    res_factor: f64,
    reserve_caps: Option<&[f64]>,
    shortfall: ReserveShortfall,
) -> Result<DispatchSchedule> {
    if !(res_factor.is_finite() && res_factor >= 0.0) {
        return Err(Error::Config("reserve factor must be nonnegative".into()));
    }
    if res_factor == 0.0 {
        return solve_la_ed(grid, forecast, prev, pen);
    }
    forecast.validate(grid)?;
    let caps: Vec<f64> = match reserve_caps {
        Some(c) => {
            check_len("reserve caps", c.len(), grid.n_gens())?;
            c.to_vec()
        }
        None => grid.gens.iter().map(|g| g.ramp_up).collect(),
    };
    let t_len = forecast.horizon();
    let stage1 = build_first_stage(grid, &forecast.demand[0], &forecast.wind[0], prev, pen)?;
    let layout = stage1.layout;
    let w = layout.width();

    // Deterministic LP over x and the stacked y of periods 2..=T.
    let mut lp = LpProblem::new(Sense::Minimize);
    for j in 0..stage1.n_cols() {
        lp.add_col(stage1.cost[j], stage1.col_lower[j], stage1.col_upper[j]);
    }
    for r in 0..stage1.row_lower.len() {
        let e: Vec<(usize, f64)> = stage1.rows.row(r).collect();
        lp.add_row(stage1.row_lower[r], stage1.row_upper[r], &e);
    }
    let stage2 = if t_len > 1 { Some(build_second_stage(grid, t_len, pen)?) } else { None };
    let y0 = lp.n_cols();
    if let Some(s2) = &stage2 {
        let xi = s2.xi_from_forecast(&forecast.demand, &forecast.wind)?;
        let (lo, up) = implied_bounds(s2, &xi, None);
        for j in 0..s2.n_y() {
            lp.add_col(s2.cost[j], lo[j], up[j]);
        }
        for r in 0..s2.n_rows() {
            if is_master_bound(s2, r) {
                continue;
            }
            let mut e: Vec<(usize, f64)> = s2.rows_y.row(r).map(|(j, a)| (y0 + j, a)).collect();
            e.extend(s2.rows_x.row(r));
            let shift = s2.rows_xi.dot_row(r, &xi);
            lp.add_row(s2.lower[r] - shift, s2.upper[r] - shift, &e);
        }
    }
    let pg_col = |t: usize, i: usize| if t == 0 { layout.pg(i) } else { y0 + (t - 1) * w + layout.pg(i) };
    let mut reserve_cols = vec![vec![0usize; grid.n_gens()]; t_len];
    for t in 0..t_len {
        let required = res_factor
            * (forecast.demand[t].iter().sum::<f64>() - forecast.wind[t].iter().sum::<f64>()).max(0.0);
        let mut req = Vec::new();
        for (i, g) in grid.gens.iter().enumerate() {
            let rc = lp.add_col(0.0, 0.0, caps[i]);
            reserve_cols[t][i] = rc;
            lp.add_row(-INF, g.pmax, &[(pg_col(t, i), 1.0), (rc, 1.0)]);
            req.push((rc, 1.0));
        }
        if shortfall == ReserveShortfall::Penalize {
            req.push((lp.add_col(pen.under, 0.0, INF), 1.0));
        }
        lp.add_row(required, INF, &req);
    }
    let sol = crate::lp::lp_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible("reserve requirement cannot be met".into())),
        LpStatus::Unbounded => return Err(Error::Solver("reserve LP is unbounded".into())),
    }
    let mut periods = vec![layout.period(&sol.primal[..w])];
    for t in 1..t_len {
        let start = y0 + (t - 1) * w;
        periods.push(layout.period(&sol.primal[start..start + w]));
    }
    let reserves = reserve_cols
        .iter()
        .map(|cols| cols.iter().map(|&c| sol.primal[c]).collect())
        .collect();
    Ok(DispatchSchedule {
        periods,
        objective: sol.objective,
        reserves: Some(reserves),
        iterations: sol.iterations,
    })
}
