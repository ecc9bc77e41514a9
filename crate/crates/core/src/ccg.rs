//! Column-and-constraint generation for the two-stage robust dispatch, the
//! alternating-direction heuristic for the inner max-min problem and an
//! exhaustive vertex oracle for small sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dispatch::{
    implied_bounds, schedule_from_master, CompactStage2, DispatchSchedule, MasterLp, PeriodDispatch, Stage1Region,
};
use crate::error::{Error, Result};
use crate::lp::{LpModel, LpProblem, LpStatus, Sense, SparseRows};
use crate::uncertainty::{inf_dist, Polyhedron, DEFAULT_VERTEX_BUDGET};

/// Inner recourse LP `min bᵀy` for fixed `(x, ξ)`, kept warm across calls.
///
/// Rows with a single y coefficient become column bounds; their duals are
/// recovered from reduced costs.
pub struct RecourseModel {
    model: LpModel,
    /// Logical row of each LP row.
    lp_rows: Vec<usize>,
    /// Bound-defining logical rows per column.
    bound_rows: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct RecourseSolution {
    pub value: f64,
    pub y: Vec<f64>,
    /// Multipliers of the lower and upper side of each logical row; together
    /// they form a dual vertex π of the `≥` form.
    pub pi_lo: Vec<f64>,
    pub pi_up: Vec<f64>,
    pub iterations: usize,
}

impl RecourseModel {
    pub fn new(stage2: &CompactStage2) -> Result<Self> {
        let mut lp = LpProblem::new(Sense::Minimize);
        let (lo, up) = implied_bounds(stage2, &vec![0.0; stage2.n_xi()], Some(&vec![0.0; stage2.n_x()]));
        let mut bound_rows = vec![Vec::new(); stage2.n_y()];
        for j in 0..stage2.n_y() {
            lp.add_col(stage2.cost[j], lo[j], up[j].max(lo[j]));
        }
        let mut lp_rows = Vec::new();
        for r in 0..stage2.n_rows() {
            if stage2.rows_y.row_len(r) == 1 {
                let (j, _) = stage2.rows_y.row(r).next().expect("single entry");
                bound_rows[j].push(r);
                continue;
            }
            let e: Vec<(usize, f64)> = stage2.rows_y.row(r).collect();
            lp.add_row(stage2.lower[r], stage2.upper[r], &e);
            lp_rows.push(r);
        }
        Ok(RecourseModel {
            model: LpModel::new(&lp)?,
            lp_rows,
            bound_rows,
        })
    }

    pub fn solve(&mut self, stage2: &CompactStage2, x: &[f64], xi: &[f64]) -> Result<RecourseSolution> {
        let (lo, up) = implied_bounds(stage2, xi, Some(x));
        let n = stage2.n_y();
        let mut up_fixed = up.clone();
        for j in 0..n {
            if lo[j] > up[j] {
                if lo[j] - up[j] > 1e-9 * (1.0 + up[j].abs()) {
                    return Err(Error::RecourseInfeasible);
                }
                up_fixed[j] = lo[j];
            }
        }
        let cols: Vec<usize> = (0..n).collect();
        self.model.set_col_bounds(&cols, &lo, &up_fixed)?;
        let mut rl = Vec::with_capacity(self.lp_rows.len());
        let mut ru = Vec::with_capacity(self.lp_rows.len());
        for &r in &self.lp_rows {
            let s = stage2.shift(r, x, xi);
            rl.push(stage2.lower[r] - s);
            ru.push(stage2.upper[r] - s);
        }
        let rows: Vec<usize> = (0..self.lp_rows.len()).collect();
        self.model.set_row_bounds(&rows, &rl, &ru)?;
        let sol = self.model.solve()?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::RecourseInfeasible),
            LpStatus::Unbounded => return Err(Error::Solver("recourse LP is unbounded".into())),
        }
        let m = stage2.n_rows();
        let (mut pi_lo, mut pi_up) = (vec![0.0; m], vec![0.0; m]);
        let mut assign = |r: usize, lambda: f64| {
            if lambda > 0.0 && stage2.lower[r].is_finite() {
                pi_lo[r] = lambda;
            } else if lambda < 0.0 && stage2.upper[r].is_finite() {
                pi_up[r] = -lambda;
            }
        };
        for (k, &r) in self.lp_rows.iter().enumerate() {
            assign(r, sol.row_duals[k]);
        }
        for j in 0..n {
            let d = sol.col_duals[j];
            if d == 0.0 || self.bound_rows[j].is_empty() {
                continue;
            }
            let target = if d > 0.0 { lo[j] } else { up_fixed[j] };
            // The row whose implied bound is the active one carries the multiplier.
            let mut best: Option<(usize, f64, f64)> = None;
            for &r in &self.bound_rows[j] {
                let (_, a) = stage2.rows_y.row(r).next().expect("single entry");
                let s = stage2.shift(r, x, xi);
                let side = if (d > 0.0) == (a > 0.0) { stage2.lower[r] } else { stage2.upper[r] };
                if !side.is_finite() {
                    continue;
                }
                let gap = ((side - s) / a - target).abs();
                if best.is_none_or(|b| gap < b.2) {
                    best = Some((r, a, gap));
                }
            }
            if let Some((r, a, _)) = best {
                assign(r, d / a);
            }
        }
        Ok(RecourseSolution {
            value: sol.objective,
            y: sol.primal,
            pi_lo,
            pi_up,
            iterations: sol.iterations,
        })
    }
}

/// The dual objective of π split into a constant and a linear function of ξ:
/// `πᵀ(h − E x − M ξ) = constant + coefᵀ ξ`.
pub fn dual_objective(stage2: &CompactStage2, pi_lo: &[f64], pi_up: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
    let mut constant = 0.0;
    let mut coef = vec![0.0; stage2.n_xi()];
    for r in 0..stage2.n_rows() {
        let (pl, pu) = (pi_lo[r], pi_up[r]);
        if pl == 0.0 && pu == 0.0 {
            continue;
        }
        let ax = stage2.rows_x.dot_row(r, x);
        if pl != 0.0 {
            constant += pl * (stage2.lower[r] - ax);
        }
        if pu != 0.0 {
            constant -= pu * (stage2.upper[r] - ax);
        }
        let w = pl - pu;
        for (k, a) in stage2.rows_xi.row(r) {
            coef[k] -= w * a;
        }
    }
    (constant, coef)
}

/// Residual of `πᵀ G = b` in the ∞-norm; zero for a member of Π.
pub fn dual_residual(stage2: &CompactStage2, pi_lo: &[f64], pi_up: &[f64]) -> f64 {
    let w: Vec<f64> = pi_lo.iter().zip(pi_up).map(|(a, b)| a - b).collect();
    let gt = stage2.rows_y.mul_transpose(&w, stage2.n_y());
    gt.iter().zip(&stage2.cost).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdOptions {
    /// Relative stopping tolerance on `C' − C`.
    pub delta: f64,
    pub max_alternations: usize,
    /// Adds one restart from a random vertex of Ξ when set.
    pub restart_seed: Option<u64>,
}

impl Default for AdOptions {
    fn default() -> Self {
        AdOptions {
            delta: 1e-6,
            max_alternations: 100,
            restart_seed: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdResult {
    /// Estimate C' of Q(x), a lower bound on the true value.
    pub value: f64,
    pub xi: Vec<f64>,
    /// Lifted point of Ξ behind `xi`.
    pub xi_full: Vec<f64>,
    pub pi_lo: Vec<f64>,
    pub pi_up: Vec<f64>,
    pub alternations: usize,
    pub converged: bool,
    /// C, C', C, C', ... over the alternations.
    pub history: Vec<f64>,
}

/// Alternating-direction evaluator holding warm LPs for both blocks.
pub struct AdEvaluator {
    recourse: RecourseModel,
    adversary: LpModel,
    set_xi_index: Vec<usize>,
    n_set_vars: usize,
    /// Constraint matrix of the current set, to decide whether a new set can
    /// reuse the adversary LP.
    set_rows: SparseRows,
}

impl AdEvaluator {
    pub fn new(stage2: &CompactStage2, set: &Polyhedron) -> Result<Self> {
        if set.n_xi() != stage2.n_xi() {
            return Err(Error::Dimension(format!(
                "uncertainty set has {} ξ components, second stage expects {}",
                set.n_xi(),
                stage2.n_xi()
            )));
        }
        Ok(AdEvaluator {
            recourse: RecourseModel::new(stage2)?,
            adversary: LpModel::new(&set.lp_over_xi(&vec![0.0; set.n_xi()], Sense::Maximize))?,
            set_xi_index: set.xi_index.clone(),
            n_set_vars: set.n_vars(),
            set_rows: set.rows.clone(),
        })
    }

    /// Switches to `set` by updating bounds and coefficients in place,
    /// keeping both LPs warm. Returns `false` without changing anything when
    /// the sparsity pattern or the ξ positions differ.
    pub fn retarget(&mut self, set: &Polyhedron) -> Result<bool> {
        if set.n_vars() != self.n_set_vars
            || set.xi_index != self.set_xi_index
            || !set.rows.same_pattern(&self.set_rows)
        {
            return Ok(false);
        }
        for (i, j, v) in self.set_rows.changed_entries(&set.rows) {
            self.adversary.set_coeff(i, j, v)?;
        }
        self.set_rows = set.rows.clone();
        let cols: Vec<usize> = (0..set.n_vars()).collect();
        self.adversary.set_col_bounds(&cols, &set.col_lower, &set.col_upper)?;
        let rows: Vec<usize> = (0..set.n_rows()).collect();
        self.adversary.set_row_bounds(&rows, &set.row_lower, &set.row_upper)?;
        Ok(true)
    }

    pub fn recourse(&mut self) -> &mut RecourseModel {
        &mut self.recourse
    }

    /// Maximizes `coefᵀξ` over Ξ; returns the full point.
    fn adversary_step(&mut self, coef: &[f64]) -> Result<Vec<f64>> {
        let mut full = vec![0.0; self.n_set_vars];
        for (k, &j) in self.set_xi_index.iter().enumerate() {
            full[j] = coef[k];
        }
        self.adversary.set_objective(&full)?;
        let sol = self.adversary.solve()?;
        match sol.status {
            LpStatus::Optimal => Ok(sol.primal),
            LpStatus::Infeasible => Err(Error::EmptySet),
            LpStatus::Unbounded => Err(Error::Solver("adversary LP is unbounded".into())),
        }
    }

    fn project(&self, full: &[f64]) -> Vec<f64> {
        self.set_xi_index.iter().map(|&j| full[j]).collect()
    }

    /// Runs the alternation from the lifted start point `start`.
    ///
    /// Each alternation maximizes over Ξ for the current π and then re-solves
    /// the recourse at the new ξ, which both supplies the next π and makes
    /// the reported value the exact recourse value of the returned ξ. A tie
    /// in the Ξ step can move to a point whose recourse value is higher; the
    /// re-solve picks that up instead of stopping there.
    pub fn run(&mut self, stage2: &CompactStage2, x: &[f64], start: &[f64], opts: &AdOptions) -> Result<AdResult> {
        let mut inner = self.recourse.solve(stage2, x, &self.project(start))?;
        let mut c = inner.value;
        let mut history = vec![c];
        let mut last: Option<AdResult> = None;
        for k in 1..=opts.max_alternations.max(1) {
            let (constant, coef) = dual_objective(stage2, &inner.pi_lo, &inner.pi_up, x);
            let next_full = self.adversary_step(&coef)?;
            let next = self.project(&next_full);
            let c_adv = constant + coef.iter().zip(&next).map(|(a, b)| a * b).sum::<f64>();
            if !c_adv.is_finite() {
                return Err(Error::RecourseInfeasible);
            }
            history.push(c_adv);
            inner = self.recourse.solve(stage2, x, &next)?;
            let c_new = inner.value;
            history.push(c_new);
            let converged = c_new - c <= opts.delta * c.abs().max(1.0);
            c = c_new;
            let result = AdResult {
                value: c_new,
                xi: next,
                xi_full: next_full,
                pi_lo: inner.pi_lo.clone(),
                pi_up: inner.pi_up.clone(),
                alternations: k,
                converged,
                history: history.clone(),
            };
            if converged {
                return Ok(result);
            }
            last = Some(result);
        }
        Ok(last.expect("at least one alternation"))
    }

    /// AD from `start`, plus an optional restart from a random vertex; the
    /// larger estimate wins.
    pub fn evaluate(&mut self, stage2: &CompactStage2, x: &[f64], start: &[f64], opts: &AdOptions) -> Result<AdResult> {
        let mut best = self.run(stage2, x, start, opts)?;
        if let Some(seed) = opts.restart_seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coef: Vec<f64> = (0..self.set_xi_index.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let vertex = self.adversary_step(&coef)?;
            let other = self.run(stage2, x, &vertex, opts)?;
            if other.value > best.value {
                best = other;
            }
        }
        Ok(best)
    }
}

/// One-shot AD evaluation of `Q(x)` starting from `xi0_full` (a lifted
/// point of Ξ) or the set's nominal point.
pub fn eval_q_ad(
    x: &[f64],
    stage2: &CompactStage2,
    set: &Polyhedron,
    opts: &AdOptions,
    xi0_full: Option<&[f64]>,
) -> Result<AdResult> {
    let start = xi0_full.unwrap_or(&set.nominal);
    if start.len() != set.n_vars() || set.max_violation(start) > 1e-7 {
        return Err(Error::NotInSet(if start.len() == set.n_vars() { set.max_violation(start) } else { f64::INFINITY }));
    }
    AdEvaluator::new(stage2, set)?.evaluate(stage2, x, start, opts)
}

/// Exact `Q(x)` as the largest recourse value over the vertices of Ξ.
pub fn exact_q_enum(x: &[f64], stage2: &CompactStage2, set: &Polyhedron, budget: usize) -> Result<(f64, Vec<f64>)> {
    let vertices = set.xi_vertices(budget)?;
    exact_q_over(x, stage2, &vertices, &mut RecourseModel::new(stage2)?)
}

fn exact_q_over(
    x: &[f64],
    stage2: &CompactStage2,
    vertices: &[Vec<f64>],
    recourse: &mut RecourseModel,
) -> Result<(f64, Vec<f64>)> {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for v in vertices {
        let q = recourse.solve(stage2, x, v)?.value;
        if q > best.0 {
            best = (q, v.clone());
        }
    }
    if best.1.is_empty() && !vertices.is_empty() {
        return Err(Error::Solver("no recourse value computed".into()));
    }
    Ok(best)
}

/// Result of one second-stage evaluation inside CCG.
#[derive(Clone, Debug)]
pub struct OracleResult {
    pub value: f64,
    pub xi: Vec<f64>,
    pub alternations: usize,
}

/// Supplies `Q̂(x)` and a worst-case scenario to the master loop.
pub trait SecondStageOracle {
    fn evaluate(&mut self, stage2: &CompactStage2, x: &[f64]) -> Result<OracleResult>;
}

/// The alternating-direction heuristic as an oracle.
pub struct AdOracle {
    evaluator: AdEvaluator,
    start: Vec<f64>,
    opts: AdOptions,
}

impl AdOracle {
    pub fn new(stage2: &CompactStage2, set: &Polyhedron, opts: AdOptions) -> Result<Self> {
        Ok(AdOracle {
            evaluator: AdEvaluator::new(stage2, set)?,
            start: set.nominal.clone(),
            opts,
        })
    }

    /// Reuses the warm LPs for a set with the same structure, or rebuilds
    /// them. The AD start point becomes the new set's nominal point.
    pub fn retarget(&mut self, stage2: &CompactStage2, set: &Polyhedron) -> Result<()> {
        if !self.evaluator.retarget(set)? {
            self.evaluator = AdEvaluator::new(stage2, set)?;
        }
        self.start = set.nominal.clone();
        Ok(())
    }
}

impl SecondStageOracle for AdOracle {
    fn evaluate(&mut self, stage2: &CompactStage2, x: &[f64]) -> Result<OracleResult> {
        let r = self.evaluator.evaluate(stage2, x, &self.start, &self.opts)?;
        Ok(OracleResult {
            value: r.value,
            xi: r.xi,
            alternations: r.alternations,
        })
    }
}

/// Exhaustive oracle over a precomputed vertex list.
pub struct EnumOracle {
    vertices: Vec<Vec<f64>>,
    recourse: RecourseModel,
}

impl EnumOracle {
    pub fn new(stage2: &CompactStage2, set: &Polyhedron, budget: usize) -> Result<Self> {
        Ok(EnumOracle {
            vertices: set.xi_vertices(budget)?,
            recourse: RecourseModel::new(stage2)?,
        })
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }
}

impl SecondStageOracle for EnumOracle {
    fn evaluate(&mut self, stage2: &CompactStage2, x: &[f64]) -> Result<OracleResult> {
        let (value, xi) = exact_q_over(x, stage2, &self.vertices, &mut self.recourse)?;
        Ok(OracleResult {
            value,
            xi,
            alternations: self.vertices.len(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CcgOptions {
    /// Relative gap tolerance ε.
    pub epsilon: f64,
    pub max_iter: usize,
    pub ad: AdOptions,
}

impl Default for CcgOptions {
    fn default() -> Self {
        CcgOptions {
            epsilon: 1e-4,
            max_iter: 50,
            ad: AdOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub alternations: usize,
    /// Smallest and largest ξ component of the returned scenario.
    pub xi_min: f64,
    pub xi_max: f64,
}

#[derive(Clone, Debug)]
pub struct RobustSolution {
    /// First-stage decision from the last master solve.
    pub x: Vec<f64>,
    /// Period 1 from `x`; later periods are the recourse planned for the
    /// seed scenario.
    pub schedule: DispatchSchedule,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
    pub scenarios: Vec<Vec<f64>>,
    /// Total AD alternations (or oracle evaluations) across iterations.
    pub alternations: usize,
}

impl RobustSolution {
    /// The reported objective, the final master value (lower bound).
    pub fn objective(&self) -> f64 {
        self.lower_bound
    }

    pub fn first(&self) -> &PeriodDispatch {
        self.schedule.first()
    }
}

/// CCG with the alternating-direction oracle, seeded with the set's nominal
/// scenario.
pub fn solve_robust_ed(
    stage1: &Stage1Region,
    stage2: &CompactStage2,
    set: &Polyhedron,
    opts: &CcgOptions,
) -> Result<RobustSolution> {
    let mut oracle = AdOracle::new(stage2, set, opts.ad)?;
    solve_robust_ed_with(stage1, stage2, &mut oracle, &set.nominal_xi(), opts)
}

/// CCG with an arbitrary second-stage oracle.
pub fn solve_robust_ed_with(
    stage1: &Stage1Region,
    stage2: &CompactStage2,
    oracle: &mut dyn SecondStageOracle,
    seed_xi: &[f64],
    opts: &CcgOptions,
) -> Result<RobustSolution> {
    if !(opts.epsilon > 0.0) {
        return Err(Error::Config("CCG tolerance must be positive".into()));
    }
    let mut master = MasterLp::new(stage1, Some(stage2))?;
    master.add_scenario(stage2, seed_xi)?;
    let mut scenarios = vec![seed_xi.to_vec()];
    let mut ub = f64::INFINITY;
    let mut trace = Vec::new();
    let mut alternations = 0;
    let mut converged = false;
    let mut last = None;
    for it in 1..=opts.max_iter.max(1) {
        let sol = master.solve()?;
        let lb = sol.objective;
        let first_cost: f64 = stage1.cost.iter().zip(&sol.x).map(|(c, x)| c * x).sum();
        let q = oracle.evaluate(stage2, &sol.x)?;
        alternations += q.alternations;
        ub = ub.min(first_cost + q.value);
        let (xi_min, xi_max) = q
            .xi
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        trace.push(TraceRow {
            iteration: it,
            lower_bound: lb,
            upper_bound: ub,
            alternations: q.alternations,
            xi_min,
            xi_max,
        });
        let gap_ok = ub - lb <= opts.epsilon * ub.abs().max(1.0);
        let duplicate = scenarios.iter().any(|s| inf_dist(s, &q.xi) <= 1e-8);
        last = Some(sol);
        if gap_ok {
            converged = true;
            break;
        }
        if duplicate {
            break;
        }
        master.add_scenario(stage2, &q.xi)?;
        scenarios.push(q.xi);
    }
    let sol = last.expect("at least one master solve");
    let schedule = schedule_from_master(stage1, stage2, &sol);
    Ok(RobustSolution {
        x: sol.x.clone(),
        schedule,
        lower_bound: sol.objective,
        upper_bound: ub,
        iterations: trace.len(),
        converged,
        trace,
        scenarios,
        alternations,
    })
}

/// The deterministic equivalent with every vertex of Ξ as an explicit
/// scenario; returns its optimal value and first-stage decision.
pub fn solve_vertex_equivalent(
    stage1: &Stage1Region,
    stage2: &CompactStage2,
    vertices: &[Vec<f64>],
) -> Result<(f64, Vec<f64>)> {
    let mut master = MasterLp::new(stage1, Some(stage2))?;
    for v in vertices {
        master.add_scenario(stage2, v)?;
    }
    let sol = master.solve()?;
    Ok((sol.objective, sol.x))
}

/// Convenience wrapper enumerating Ξ within the default vertex budget.
pub fn solve_exact_small(stage1: &Stage1Region, stage2: &CompactStage2, set: &Polyhedron) -> Result<(f64, Vec<f64>)> {
    solve_vertex_equivalent(stage1, stage2, &set.xi_vertices(DEFAULT_VERTEX_BUDGET)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::tests::toy_grid;
    use crate::dispatch::{build_first_stage, build_second_stage, solve_la_ed, Forecast, Penalties, PrevDispatch};

    fn toy_setup(t: usize) -> (Stage1Region, CompactStage2) {
        let g = toy_grid();
        let pen = Penalties::default();
        let prev = PrevDispatch {
            pg: vec![50.0, 20.0],
            pw: vec![20.0],
        };
        let s1 = build_first_stage(&g, &[90.0], &[25.0], Some(&prev), &pen).unwrap();
        let s2 = build_second_stage(&g, t, &pen).unwrap();
        (s1, s2)
    }

    fn box_set(s2: &CompactStage2, d: f64, w: f64, dd: f64, dw: f64) -> Polyhedron {
        let n = s2.n_xi();
        let nd = (s2.horizon - 1) * s2.n_loads;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        let mut nom = vec![0.0; n];
        for k in 0..n {
            let (c, r) = if k < nd { (d, dd) } else { (w, dw) };
            lo[k] = c - r;
            hi[k] = c + r;
            nom[k] = c;
        }
        Polyhedron::boxed((0..n).map(|k| format!("xi{k}")).collect(), &lo, &hi, &nom)
    }

    #[test]
    fn strong_duality_on_recourse() {
        let (s1, s2) = toy_setup(3);
        let mut rec = RecourseModel::new(&s2).unwrap();
        let x: Vec<f64> = s1.col_lower.iter().zip(&s1.col_upper).map(|(l, u)| if u.is_finite() { (l + u) / 2.0 } else { *l }).collect();
        for (d, w) in [(90.0, 10.0), (120.0, 0.0), (40.0, 60.0), (200.0, 30.0)] {
            let xi = [d, d, w, w];
            let sol = rec.solve(&s2, &x, &xi).unwrap();
            let (c, coef) = dual_objective(&s2, &sol.pi_lo, &sol.pi_up, &x);
            let dual = c + coef.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>();
            assert!((dual - sol.value).abs() <= 1e-7 * sol.value.abs().max(1.0), "{dual} vs {}", sol.value);
            assert!(dual_residual(&s2, &sol.pi_lo, &sol.pi_up) < 1e-7);
            assert!(sol.pi_lo.iter().chain(&sol.pi_up).all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn singleton_set_converges_in_one_alternation() {
        let (s1, s2) = toy_setup(3);
        let set = box_set(&s2, 90.0, 20.0, 0.0, 0.0);
        let x = s1.col_lower.clone();
        let r = eval_q_ad(&x, &s2, &set, &AdOptions::default(), None).unwrap();
        assert!(r.converged);
        assert_eq!(r.alternations, 1);
        let direct = RecourseModel::new(&s2).unwrap().solve(&s2, &x, &r.xi).unwrap().value;
        assert!((r.value - direct).abs() < 1e-7);
    }

    #[test]
    fn ad_is_monotone_and_below_exact() {
        let (s1, s2) = toy_setup(3);
        let set = box_set(&s2, 90.0, 20.0, 15.0, 15.0);
        let x = s1.col_lower.clone();
        let r = eval_q_ad(&x, &s2, &set, &AdOptions::default(), None).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        let (exact, _) = exact_q_enum(&x, &s2, &set, 100).unwrap();
        assert!(r.value <= exact + 1e-6);
        assert!(set.max_violation(&r.xi_full) <= 1e-8);
    }

    #[test]
    fn zero_budget_robust_equals_la_ed() {
        let g = toy_grid();
        let pen = Penalties::default();
        let prev = PrevDispatch {
            pg: vec![50.0, 20.0],
            pw: vec![20.0],
        };
        let f = Forecast {
            demand: vec![vec![90.0], vec![95.0], vec![100.0]],
            wind: vec![vec![25.0], vec![20.0], vec![15.0]],
        };
        let la = solve_la_ed(&g, &f, Some(&prev), &pen).unwrap();
        let (s1, s2) = toy_setup(3);
        let set = box_set(&s2, 0.0, 0.0, 0.0, 0.0);
        let xi = s2.xi_from_forecast(&f.demand, &f.wind).unwrap();
        let set = Polyhedron::singleton(set.labels.clone(), &xi);
        let rob = solve_robust_ed(&s1, &s2, &set, &CcgOptions::default()).unwrap();
        assert_eq!(rob.iterations, 1);
        assert!(rob.converged);
        assert_eq!(rob.objective(), la.objective);
        assert_eq!(rob.first(), la.first());
    }

    #[test]
    fn ccg_matches_vertex_equivalent() {
        let (s1, s2) = toy_setup(3);
        let set = box_set(&s2, 90.0, 20.0, 20.0, 20.0);
        let verts = set.xi_vertices(100).unwrap();
        assert_eq!(verts.len(), 16);
        let (exact, _) = solve_vertex_equivalent(&s1, &s2, &verts).unwrap();
        let mut oracle = EnumOracle::new(&s2, &set, 100).unwrap();
        let sol = solve_robust_ed_with(&s1, &s2, &mut oracle, &set.nominal_xi(), &CcgOptions::default()).unwrap();
        assert!((sol.objective() - exact).abs() <= 1e-7 * exact.abs().max(1.0));
        for w in sol.trace.windows(2) {
            assert!(w[1].lower_bound >= w[0].lower_bound - 1e-9);
        }
        let ad = solve_robust_ed(&s1, &s2, &set, &CcgOptions::default()).unwrap();
        assert!(ad.objective() <= exact + 1e-6);
        assert!(ad.converged);
        assert!(ad.upper_bound - ad.lower_bound <= 1e-4 * ad.upper_bound.abs().max(1.0));
    }
}
