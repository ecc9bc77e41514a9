//! Polyhedral uncertainty sets over demand and available wind power.
//!
//! A [`Polyhedron`] is stored in lifted form: auxiliary variables (wind
//! speeds, residuals, budget splits) sit next to the uncertain vector ξ and
//! `xi_index` selects ξ from the full variable vector. ξ is ordered as the
//! demand block `d[t][j]` followed by the wind block `p̄[t][i]`, periods
//! 2..=T in both.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{lp_solve, LpProblem, LpStatus, Sense, SparseRows, INF};
use crate::wind::{SeasonalModel, VarModel};

pub const DEFAULT_VERTEX_BUDGET: usize = 10_000;
const MAX_CURVE_SAMPLES: usize = 1000;
const MAX_VERTEX_SUBSETS: u128 = 5_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Polyhedron {
    pub labels: Vec<String>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub rows: SparseRows,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    pub row_labels: Vec<String>,
    /// Positions of the ξ components in the full variable vector.
    pub xi_index: Vec<usize>,
    /// A member point (full vector); the nominal scenario when one exists.
    pub nominal: Vec<f64>,
}

impl Polyhedron {
    fn empty() -> Self {
        Polyhedron {
            labels: Vec::new(),
            col_lower: Vec::new(),
            col_upper: Vec::new(),
            rows: SparseRows::new(),
            row_lower: Vec::new(),
            row_upper: Vec::new(),
            row_labels: Vec::new(),
            xi_index: Vec::new(),
            nominal: Vec::new(),
        }
    }

    fn add_var(&mut self, label: String, lower: f64, upper: f64, nominal: f64) -> usize {
        self.labels.push(label);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.nominal.push(nominal);
        self.labels.len() - 1
    }

    fn add_row(&mut self, label: String, lower: f64, upper: f64, entries: &[(usize, f64)]) {
        self.rows.push_row(entries);
        self.row_lower.push(lower);
        self.row_upper.push(upper);
        self.row_labels.push(label);
    }

    /// The set containing exactly `values`.
    pub fn singleton(labels: Vec<String>, values: &[f64]) -> Self {
        Self::boxed(labels, values, values, values)
    }

    /// An axis-aligned box; every variable is a ξ component.
    pub fn boxed(labels: Vec<String>, lower: &[f64], upper: &[f64], nominal: &[f64]) -> Self {
        let mut p = Polyhedron::empty();
        for (k, label) in labels.into_iter().enumerate() {
            let j = p.add_var(label, lower[k], upper[k], nominal[k]);
            p.xi_index.push(j);
        }
        p
    }

    pub fn n_vars(&self) -> usize {
        self.labels.len()
    }

    pub fn n_rows(&self) -> usize {
        self.row_lower.len()
    }

    pub fn n_xi(&self) -> usize {
        self.xi_index.len()
    }

    pub fn xi_labels(&self) -> Vec<&str> {
        self.xi_index.iter().map(|&j| self.labels[j].as_str()).collect()
    }

    pub fn var_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// ξ components of a full variable vector.
    pub fn project(&self, full: &[f64]) -> Vec<f64> {
        self.xi_index.iter().map(|&j| full[j]).collect()
    }

    pub fn nominal_xi(&self) -> Vec<f64> {
        self.project(&self.nominal)
    }

    /// Largest bound or row violation of a full variable vector.
    pub fn max_violation(&self, full: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in full.iter().enumerate() {
            worst = worst.max(self.col_lower[j] - v).max(v - self.col_upper[j]);
        }
        for i in 0..self.n_rows() {
            let a = self.rows.dot_row(i, full);
            worst = worst.max(self.row_lower[i] - a).max(a - self.row_upper[i]);
        }
        worst
    }

    /// LP over the lifted set with a linear objective on ξ.
    pub fn lp_over_xi(&self, xi_objective: &[f64], sense: Sense) -> LpProblem {
        let mut lp = LpProblem::new(sense);
        for j in 0..self.n_vars() {
            lp.add_named_col(self.labels[j].clone(), 0.0, self.col_lower[j], self.col_upper[j]);
        }
        for (k, &j) in self.xi_index.iter().enumerate() {
            lp.objective[j] = xi_objective[k];
        }
        for i in 0..self.n_rows() {
            let entries: Vec<(usize, f64)> = self.rows.row(i).collect();
            lp.add_named_row(self.row_labels[i].clone(), self.row_lower[i], self.row_upper[i], &entries);
        }
        lp
    }

    /// Optimizes a linear function of ξ; returns the value and a full
    /// optimal vector.
    pub fn optimize_xi(&self, xi_objective: &[f64], sense: Sense) -> Result<(f64, Vec<f64>)> {
        let sol = lp_solve(&self.lp_over_xi(xi_objective, sense))?;
        match sol.status {
            LpStatus::Optimal => Ok((sol.objective, sol.primal)),
            LpStatus::Infeasible => Err(Error::EmptySet),
            LpStatus::Unbounded => Err(Error::InvalidSet("objective is unbounded over the set".into())),
        }
    }

    /// Confirms the set is nonempty; if the stored nominal point is not a
    /// member it is replaced by a feasible one.
    pub fn ensure_nonempty(&mut self) -> Result<()> {
        if self.col_lower.iter().zip(&self.col_upper).any(|(l, u)| l > u) {
            return Err(Error::EmptySet);
        }
        // A member nominal point already certifies nonemptiness.
        if self.max_violation(&self.nominal) <= 1e-9 {
            return Ok(());
        }
        let sol = lp_solve(&self.lp_over_xi(&vec![0.0; self.n_xi()], Sense::Minimize))?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::EmptySet);
        }
        self.nominal = sol.primal;
        Ok(())
    }

    /// Whether some lifting of `xi` lies in the set (within `tol`).
    pub fn contains_xi(&self, xi: &[f64], tol: f64) -> Result<bool> {
        if xi.len() != self.n_xi() {
            return Err(Error::Dimension(format!("expected {} ξ components, got {}", self.n_xi(), xi.len())));
        }
        let mut lp = self.lp_over_xi(&vec![0.0; self.n_xi()], Sense::Minimize);
        for (k, &j) in self.xi_index.iter().enumerate() {
            if xi[k] < self.col_lower[j] - tol || xi[k] > self.col_upper[j] + tol {
                return Ok(false);
            }
            lp.col_lower[j] = xi[k].max(self.col_lower[j]).min(self.col_upper[j]);
            lp.col_upper[j] = lp.col_lower[j];
        }
        // Absorb the tolerance in the row bounds.
        for i in 0..lp.n_rows() {
            lp.row_lower[i] -= tol;
            lp.row_upper[i] += tol;
        }
        Ok(lp_solve(&lp)?.status == LpStatus::Optimal)
    }

    /// Plain-text LP-style listing of the constraints.
    pub fn to_lp_string(&self) -> String {
        self.lp_over_xi(&vec![0.0; self.n_xi()], Sense::Minimize).to_lp_string()
    }

    /// Vertices of the lifted set, found by solving every square system of
    /// active constraints. Intended for tiny bounded sets.
    pub fn vertices(&self, budget: usize) -> Result<Vec<Vec<f64>>> {
        let n = self.n_vars();
        if n == 0 {
            return Ok(vec![Vec::new()]);
        }
        // Hyperplanes as (coefficients, rhs); mandatory ones are equalities.
        let mut mandatory: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        let mut optional: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        for j in 0..n {
            let (l, u) = (self.col_lower[j], self.col_upper[j]);
            if l == u {
                mandatory.push((vec![(j, 1.0)], l));
                continue;
            }
            if l.is_finite() {
                optional.push((vec![(j, 1.0)], l));
            }
            if u.is_finite() {
                optional.push((vec![(j, 1.0)], u));
            }
        }
        for i in 0..self.n_rows() {
            let entries: Vec<(usize, f64)> = self.rows.row(i).collect();
            let (l, u) = (self.row_lower[i], self.row_upper[i]);
            if l == u {
                mandatory.push((entries, l));
                continue;
            }
            if l.is_finite() {
                optional.push((entries.clone(), l));
            }
            if u.is_finite() {
                optional.push((entries, u));
            }
        }
        if mandatory.len() > n {
            // Redundant equalities; fall back to treating them as optional
            // pairs would change semantics, so reject.
            return Err(Error::InvalidSet("more equalities than variables".into()));
        }
        let pick = n - mandatory.len();
        if pick > optional.len() {
            return Ok(Vec::new());
        }
        if binomial(optional.len(), pick) > MAX_VERTEX_SUBSETS {
            return Err(Error::VertexBudget(budget));
        }
        let mut found: Vec<Vec<f64>> = Vec::new();
        let mut combo: Vec<usize> = (0..pick).collect();
        loop {
            let mut a = DMatrix::<f64>::zeros(n, n);
            let mut b = DVector::<f64>::zeros(n);
            for (r, (entries, rhs)) in mandatory.iter().chain(combo.iter().map(|&c| &optional[c])).enumerate() {
                for &(j, v) in entries {
                    a[(r, j)] = v;
                }
                b[r] = *rhs;
            }
            let lu = a.lu();
            if let Some(z) = lu.solve(&b) {
                let z: Vec<f64> = z.iter().copied().collect();
                let ok = z.iter().all(|v| v.is_finite()) && self.max_violation(&z) <= 1e-9 && lu_well_posed(&lu);
                if ok && !found.iter().any(|f| inf_dist(f, &z) <= 1e-9) {
                    found.push(z);
                    if found.len() > budget {
                        return Err(Error::VertexBudget(budget));
                    }
                }
            }
            if !next_combination(&mut combo, optional.len()) {
                break;
            }
        }
        Ok(found)
    }

    /// Distinct projections of the lifted vertices onto ξ. Every vertex of
    /// the projected set is among them.
    pub fn xi_vertices(&self, budget: usize) -> Result<Vec<Vec<f64>>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for v in self.vertices(budget)? {
            let xi = self.project(&v);
            if !out.iter().any(|o| inf_dist(o, &xi) <= 1e-9) {
                out.push(xi);
            }
        }
        Ok(out)
    }
}

fn lu_well_posed(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> bool {
    let u = lu.u();
    let diag: Vec<f64> = u.diagonal().iter().map(|v| v.abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    diag.iter().all(|d| *d > 1e-12 * max.max(1.0))
}

pub(crate) fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > MAX_VERTEX_SUBSETS * 16 {
            return acc;
        }
    }
    acc
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Cartesian product; ξ is the concatenation of the two ξ vectors.
pub fn product_set(first: &Polyhedron, second: &Polyhedron) -> Result<Polyhedron> {
    let seen: HashSet<&str> = first.labels.iter().map(String::as_str).collect();
    if let Some(dup) = second.labels.iter().find(|l| seen.contains(l.as_str())) {
        return Err(Error::LabelCollision(dup.clone()));
    }
    let off = first.n_vars();
    let mut p = first.clone();
    p.labels.extend(second.labels.iter().cloned());
    p.col_lower.extend(&second.col_lower);
    p.col_upper.extend(&second.col_upper);
    p.nominal.extend(&second.nominal);
    for i in 0..second.n_rows() {
        let entries: Vec<(usize, f64)> = second.rows.row(i).map(|(j, v)| (j + off, v)).collect();
        p.add_row(second.row_labels[i].clone(), second.row_lower[i], second.row_upper[i], &entries);
    }
    p.xi_index.extend(second.xi_index.iter().map(|j| j + off));
    Ok(p)
}

// ---- power curve --------------------------------------------------------------

/// One supporting line `h0 + h·r` (MW, MW per m/s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinePiece {
    pub h0: f64,
    pub h: f64,
}

impl LinePiece {
    pub fn at(&self, r: f64) -> f64 {
        self.h0 + self.h * r
    }
}

/// Convex piecewise-linear under-approximation of the increasing part of a
/// turbine power curve.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerCurvePWL {
    pub pieces: Vec<LinePiece>,
    pub pwmax: f64,
    /// Largest `sample − envelope` over the fitted samples.
    pub max_gap: f64,
}

pub fn pwl_power_curve(samples: &[(f64, f64)], pieces: usize, pwmax: f64) -> Result<PowerCurvePWL> {
    PowerCurvePWL::fit(samples, pieces, pwmax)
}

impl PowerCurvePWL {
    /// `max(0, max_k(h0_k + h_k r))`.
    pub fn envelope(&self, r: f64) -> f64 {
        self.pieces.iter().map(|p| p.at(r)).fold(0.0, f64::max)
    }

    /// Envelope capped at the farm capacity.
    pub fn available(&self, r: f64) -> f64 {
        self.envelope(r).min(self.pwmax)
    }

    /// Fits `min(K, hull segments)` lines chosen from the lower convex hull
    /// of the increasing part so that the largest gap is minimal.
    pub fn fit(samples: &[(f64, f64)], k: usize, pwmax: f64) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidSet(m.to_string()));
        if k == 0 {
            return bad("power curve needs at least one piece");
        }
        if !(pwmax.is_finite() && pwmax > 0.0) {
            return bad("pwmax must be positive");
        }
        if samples.len() < 2 {
            return bad("power curve needs at least two samples");
        }
        if samples.len() > MAX_CURVE_SAMPLES {
            return bad("power curve has too many samples");
        }
        if samples.iter().any(|(s, p)| !s.is_finite() || !p.is_finite() || *p < 0.0) {
            return bad("power curve samples must be finite with nonnegative power");
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("power curve samples must be strictly sorted by speed");
        }
        let pts: Vec<(f64, f64)> = samples.iter().map(|&(s, p)| (s, p.min(pwmax))).collect();
        let Some(first_pos) = pts.iter().position(|p| p.1 > 0.0) else {
            return bad("power curve never produces power");
        };
        let start = first_pos.saturating_sub(1);
        let end = (start..pts.len()).find(|&i| pts[i].1 >= pwmax).unwrap_or(pts.len() - 1);
        let part = &pts[start..=end];
        if part.windows(2).any(|w| w[1].1 < w[0].1) {
            return bad("power curve is not monotone on its increasing part");
        }
        if part.len() < 2 {
            return bad("increasing part of the power curve has a single sample");
        }

        // Lower convex hull (monotone chain).
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for &p in part {
            while hull.len() >= 2 {
                let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                if cross <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        let lines: Vec<LinePiece> = hull
            .windows(2)
            .map(|w| {
                let h = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                LinePiece { h0: w[0].1 - h * w[0].0, h }
            })
            .collect();
        let m = lines.len();
        // Segment containing each fitted sample.
        let seg: Vec<usize> = part
            .iter()
            .map(|p| hull.iter().rposition(|h| h.0 <= p.0).unwrap_or(0).min(m - 1))
            .collect();
        let gap = |idx: usize, chosen: &[usize]| -> f64 {
            let env = chosen.iter().map(|&c| lines[c].at(part[idx].0)).fold(0.0, f64::max);
            part[idx].1 - env
        };
        let worst = |lo: Option<usize>, hi: Option<usize>| -> f64 {
            // Samples strictly right of `lo` and at or left of `hi`.
            let chosen: Vec<usize> = lo.into_iter().chain(hi).collect();
            (0..part.len())
                .filter(|&p| lo.is_none_or(|l| seg[p] > l) && hi.is_none_or(|h| seg[p] <= h))
                .map(|p| gap(p, &chosen))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let kk = k.min(m);
        // dp[c][j]: best worst-gap over samples up to segment j with c+1 lines, j last.
        let mut dp = vec![vec![f64::INFINITY; m]; kk];
        let mut from = vec![vec![usize::MAX; m]; kk];
        for j in 0..m {
            dp[0][j] = worst(None, Some(j));
        }
        for c in 1..kk {
            for j in c..m {
                for i in (c - 1)..j {
                    let v = dp[c - 1][i].max(worst(Some(i), Some(j)));
                    if v < dp[c][j] {
                        dp[c][j] = v;
                        from[c][j] = i;
                    }
                }
            }
        }
        let mut best = (f64::INFINITY, 0usize);
        for j in (kk - 1)..m {
            let v = dp[kk - 1][j].max(worst(Some(j), None));
            if v < best.0 {
                best = (v, j);
            }
        }
        let mut chosen = vec![best.1];
        for c in (1..kk).rev() {
            let prev = from[c][*chosen.last().expect("nonempty")];
            chosen.push(prev);
        }
        chosen.reverse();
        let pieces: Vec<LinePiece> = chosen.iter().map(|&c| lines[c]).collect();
        let curve = PowerCurvePWL {
            pieces,
            pwmax,
            max_gap: 0.0,
        };
        let max_gap = part.iter().map(|p| p.1 - curve.envelope(p.0)).fold(0.0, f64::max);
        Ok(PowerCurvePWL { max_gap, ..curve })
    }
}

// ---- set specification -------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    #[default]
    Dus,
    Sus1,
    Sus2,
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetKind::Dus => "dus",
            SetKind::Sus1 => "sus1",
            SetKind::Sus2 => "sus2",
        })
    }
}

impl std::str::FromStr for SetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dus" => Ok(SetKind::Dus),
            "sus1" => Ok(SetKind::Sus1),
            "sus2" => Ok(SetKind::Sus2),
            other => Err(Error::Config(format!("unknown set kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    #[serde(default)]
    pub kind: SetKind,
    pub gamma_w: f64,
    #[serde(default)]
    pub gamma_t: Option<f64>,
    #[serde(default)]
    pub gamma_d: f64,
    #[serde(default = "default_lags")]
    pub lags: usize,
}

fn default_lags() -> usize {
    crate::wind::DEFAULT_LAGS
}

impl Default for SetSpec {
    fn default() -> Self {
        SetSpec {
            kind: SetKind::Dus,
            gamma_w: 0.0,
            gamma_t: None,
            gamma_d: 0.0,
            lags: default_lags(),
        }
    }
}

impl SetSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |g: f64| g.is_finite() && g >= 0.0;
        if !ok(self.gamma_w) || !ok(self.gamma_d) || !self.gamma_t.is_none_or(ok) {
            return Err(Error::InvalidSet("budgets must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

// ---- builders ----------------------------------------------------------------

/// Demand set for periods 2..=T: `d̄` and `d̂` are (T−1) × N^d.
///
/// Per period, `Σ_j |d_j − d̄_j| / d̂_j ≤ Γ √N^d` and each `d_j` lies within
/// `d̄_j ± Γ d̂_j` (floored at zero). Loads with `d̂ = 0` are fixed.
pub fn build_demand_set(dbar: &DMatrix<f64>, dhat: &DMatrix<f64>, gamma_d: f64) -> Result<Polyhedron> {
    if dbar.shape() != dhat.shape() {
        return Err(Error::Dimension(format!("d̄ is {:?} but d̂ is {:?}", dbar.shape(), dhat.shape())));
    }
    if !(gamma_d.is_finite() && gamma_d >= 0.0) {
        return Err(Error::InvalidSet("Γ^d must be finite and nonnegative".into()));
    }
    if dhat.iter().chain(dbar.iter()).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidSet("d̄ and d̂ must be finite and nonnegative".into()));
    }
    let (periods, nd) = dbar.shape();
    let mut p = Polyhedron::empty();
    let mut d_idx = vec![vec![0usize; nd]; periods];
    for (k, row) in d_idx.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let (m, h) = (dbar[(k, j)], dhat[(k, j)]);
            *slot = p.add_var(format!("d_t{}_l{}", k + 2, j + 1), (m - gamma_d * h).max(0.0), m + gamma_d * h, m);
        }
    }
    p.xi_index = d_idx.iter().flatten().copied().collect();
    let cap = gamma_d * (nd as f64).sqrt();
    for k in 0..periods {
        let mut budget = Vec::new();
        for j in 0..nd {
            let h = dhat[(k, j)];
            let dev = gamma_d * h;
            let dp = p.add_var(format!("dp_t{}_l{}", k + 2, j + 1), 0.0, dev, 0.0);
            let dm = p.add_var(format!("dm_t{}_l{}", k + 2, j + 1), 0.0, dev, 0.0);
            let m = dbar[(k, j)];
            p.add_row(format!("dev_t{}_l{}", k + 2, j + 1), m, m, &[(d_idx[k][j], 1.0), (dp, -1.0), (dm, 1.0)]);
            if h > 0.0 {
                budget.push((dp, 1.0 / h));
                budget.push((dm, 1.0 / h));
            }
        }
        if !budget.is_empty() {
            p.add_row(format!("dbudget_t{}", k + 2), -INF, cap, &budget);
        }
    }
    p.ensure_nonempty()?;
    Ok(p)
}

/// Inputs shared by the wind trajectory set builders.
pub struct WindSetInput<'a> {
    pub seasonal: &'a SeasonalModel,
    /// The fitted VAR for the dynamic set; for SUS variants, the zero-lag
    /// fit whose `Σ`/`B` describe the marginal residual distribution.
    pub var: &'a VarModel,
    /// Realized speeds up to and including period 1, oldest first.
    pub history: &'a [Vec<f64>],
    /// Absolute time index of period 1.
    pub t1: i64,
    pub horizon: usize,
    pub curves: &'a [PowerCurvePWL],
}

/// Zero-innovation speed path for periods 2..=T together with the realized
/// residual history it is conditioned on.
struct WindPath {
    n_sites: usize,
    /// Realized residuals, oldest first; the last row is period 1.
    hist: Vec<DVector<f64>>,
    /// Mean speed per future period: seasonal, plus the period-1 residual for
    /// the static variants.
    mean: Vec<Vec<f64>>,
    nominal_rt: Vec<DVector<f64>>,
}

impl WindPath {
    fn new(input: &WindSetInput<'_>, kind: SetKind) -> Result<Self> {
        let nw = input.var.n_sites();
        let seasonal = input.seasonal;
        if seasonal.n_sites() != nw || input.curves.len() != nw {
            return Err(Error::Dimension(format!(
                "{} sites in VAR, {} in seasonal model, {} power curves",
                nw,
                seasonal.n_sites(),
                input.curves.len()
            )));
        }
        if input.horizon < 2 {
            return Err(Error::InvalidSet("horizon must be at least 2".into()));
        }
        let lags = match kind {
            SetKind::Dus => input.var.lags(),
            SetKind::Sus1 | SetKind::Sus2 => 0,
        };
        let need = lags.max(1);
        if input.history.len() < need {
            return Err(Error::InsufficientData(format!(
                "wind set needs {need} realized periods, got {}",
                input.history.len()
            )));
        }
        if input.history.iter().any(|h| h.len() != nw) {
            return Err(Error::Dimension("history rows must match the site count".into()));
        }
        let hlen = input.history.len();
        let hist: Vec<DVector<f64>> = input
            .history
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let g = seasonal.eval(input.t1 - (hlen - 1 - k) as i64);
                DVector::from_fn(nw, |i, _| r[i] - g[i])
            })
            .collect();
        let a: &[DMatrix<f64>] = match kind {
            SetKind::Dus => &input.var.a,
            _ => &[],
        };
        let now = hist.last().expect("history checked nonempty").clone();
        let steps = input.horizon - 1;
        let mut path: Vec<DVector<f64>> = hist[hlen - lags.min(hlen)..].to_vec();
        let mut nominal_rt = Vec::with_capacity(steps);
        for _ in 0..steps {
            let mut next = DVector::zeros(nw);
            for (s, am) in a.iter().enumerate() {
                next += am * &path[path.len() - 1 - s];
            }
            nominal_rt.push(next.clone());
            path.push(next);
        }
        let mut mean = vec![vec![0.0; nw]; steps];
        for (k, row) in mean.iter_mut().enumerate() {
            let g = seasonal.eval(input.t1 + 1 + k as i64);
            for i in 0..nw {
                row[i] = match kind {
                    SetKind::Dus => g[i],
                    _ => g[i] + now[i],
                };
            }
        }
        Ok(WindPath {
            n_sites: nw,
            hist,
            mean,
            nominal_rt,
        })
    }

    fn speed(&self, k: usize, i: usize) -> f64 {
        self.mean[k][i] + self.nominal_rt[k][i]
    }
}

/// Nominal available wind for periods 2..=T, (T−1) rows of per-farm MW.
///
/// This is the point the trajectory set of the same kind is centred on; the
/// deterministic look-ahead forecast uses the dynamic variant.
pub fn nominal_wind_power(input: &WindSetInput<'_>, kind: SetKind) -> Result<Vec<Vec<f64>>> {
    let path = WindPath::new(input, kind)?;
    Ok((0..input.horizon - 1)
        .map(|k| (0..path.n_sites).map(|i| input.curves[i].envelope(path.speed(k, i))).collect())
        .collect())
}

/// Available-wind trajectory set for periods 2..=T.
///
/// Variables per period and site: speed `r`, residual `r̃`, split
/// innovations `u⁺`, `u⁻` and available power `p̄`. The dynamic set links
/// `r̃_t = Σ_s A_s r̃_{t−s} + B (u⁺_t − u⁻_t)` with realized residuals for
/// lags reaching period 1 or earlier. SUS1 drops the lags; SUS2 also
/// replaces `B` by `diag(√Σ_ii)`. Both static variants shift the seasonal
/// mean by the residual observed at period 1 (persistence).
pub fn build_wind_trajectory_set(input: &WindSetInput<'_>, spec: &SetSpec) -> Result<Polyhedron> {
    spec.validate()?;
    let path = WindPath::new(input, spec.kind)?;
    let nw = path.n_sites;
    let hist = &path.hist;
    let hlen = hist.len();
    let mean = &path.mean;
    let nominal_rt = &path.nominal_rt;
    let b = match spec.kind {
        SetKind::Dus | SetKind::Sus1 => input.var.b.clone(),
        SetKind::Sus2 => DMatrix::from_diagonal(&input.var.sigma.diagonal().map(|v| v.max(0.0).sqrt())),
    };
    let a: &[DMatrix<f64>] = match spec.kind {
        SetKind::Dus => &input.var.a,
        _ => &[],
    };
    let steps = input.horizon - 1;
    let gamma = spec.gamma_w;

    let mut p = Polyhedron::empty();
    let mut r_idx = vec![vec![0usize; nw]; steps];
    let mut rt_idx = vec![vec![0usize; nw]; steps];
    let mut up_idx = vec![vec![0usize; nw]; steps];
    let mut um_idx = vec![vec![0usize; nw]; steps];
    let mut pw_idx = vec![vec![0usize; nw]; steps];
    for k in 0..steps {
        let t = k + 2;
        for i in 0..nw {
            let rt = nominal_rt[k][i];
            let r = path.speed(k, i);
            r_idx[k][i] = p.add_var(format!("r_t{t}_w{}", i + 1), -INF, INF, r);
            rt_idx[k][i] = p.add_var(format!("rt_t{t}_w{}", i + 1), -INF, INF, rt);
            up_idx[k][i] = p.add_var(format!("up_t{t}_w{}", i + 1), 0.0, gamma, 0.0);
            um_idx[k][i] = p.add_var(format!("um_t{t}_w{}", i + 1), 0.0, gamma, 0.0);
            pw_idx[k][i] = p.add_var(format!("pw_t{t}_w{}", i + 1), 0.0, INF, input.curves[i].envelope(r));
        }
    }
    p.xi_index = pw_idx.iter().flatten().copied().collect();
    let cap = gamma * (nw as f64).sqrt();
    for k in 0..steps {
        let t = k + 2;
        for i in 0..nw {
            let g = mean[k][i];
            p.add_row(format!("speed_t{t}_w{}", i + 1), g, g, &[(r_idx[k][i], 1.0), (rt_idx[k][i], -1.0)]);
            let mut entries = vec![(rt_idx[k][i], 1.0)];
            let mut rhs = 0.0;
            for (s, am) in a.iter().enumerate() {
                let lag = s + 1;
                for j in 0..nw {
                    let coef = am[(i, j)];
                    if coef == 0.0 {
                        continue;
                    }
                    if k >= lag {
                        entries.push((rt_idx[k - lag][j], -coef));
                    } else {
                        // Period t − lag ≤ 1 is realized.
                        let back = lag - k - 1;
                        rhs += coef * hist[hlen - 1 - back][j];
                    }
                }
            }
            for j in 0..nw {
                let coef = b[(i, j)];
                if coef != 0.0 {
                    entries.push((up_idx[k][j], -coef));
                    entries.push((um_idx[k][j], coef));
                }
            }
            p.add_row(format!("var_t{t}_w{}", i + 1), rhs, rhs, &entries);
            p.add_row(
                format!("ubox_t{t}_w{}", i + 1),
                -INF,
                gamma,
                &[(up_idx[k][i], 1.0), (um_idx[k][i], 1.0)],
            );
            for (q, piece) in input.curves[i].pieces.iter().enumerate() {
                p.add_row(
                    format!("curve_t{t}_w{}_k{}", i + 1, q + 1),
                    piece.h0,
                    INF,
                    &[(pw_idx[k][i], 1.0), (r_idx[k][i], -piece.h)],
                );
            }
        }
        let budget: Vec<(usize, f64)> = (0..nw).flat_map(|i| [(up_idx[k][i], 1.0), (um_idx[k][i], 1.0)]).collect();
        p.add_row(format!("ubudget_t{t}"), -INF, cap, &budget);
    }
    if let Some(gt) = spec.gamma_t {
        let all: Vec<(usize, f64)> = (0..steps)
            .flat_map(|k| (0..nw).flat_map(move |i| [(k, i, 0), (k, i, 1)]))
            .map(|(k, i, side)| (if side == 0 { up_idx[k][i] } else { um_idx[k][i] }, 1.0))
            .collect();
        p.add_row("time_budget".into(), -INF, gt * cap * (steps as f64).sqrt(), &all);
    }
    p.ensure_nonempty()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn linear_curve_single_piece_exact() {
        let samples: Vec<(f64, f64)> = (0..=10).map(|s| (s as f64, 5.0 * s as f64)).collect();
        let c = pwl_power_curve(&samples, 1, 50.0).unwrap();
        assert_eq!(c.pieces.len(), 1);
        assert!(c.max_gap.abs() < 1e-12);
        for &(s, p) in &samples {
            assert!((c.envelope(s) - p).abs() < 1e-9);
        }
    }

    #[test]
    fn cubic_curve_under_approximated() {
        let samples: Vec<(f64, f64)> = (0..=12)
            .map(|s| {
                let s = s as f64;
                (s, if s < 3.0 { 0.0 } else { (75.0 * ((s - 3.0) / 9.0).powi(3)).min(75.0) })
            })
            .collect();
        let c = pwl_power_curve(&samples, 4, 75.0).unwrap();
        assert_eq!(c.pieces.len(), 4);
        let mut gap: f64 = 0.0;
        for &(s, p) in &samples {
            assert!(c.envelope(s) <= p + 1e-9, "speed {s}");
            gap = gap.max(p - c.envelope(s));
        }
        assert!((gap - c.max_gap).abs() < 1e-12);
        // Envelope is nondecreasing and convex on the sampled grid.
        let env: Vec<f64> = (0..=120).map(|k| c.envelope(k as f64 * 0.1)).collect();
        for w in env.windows(3) {
            assert!(w[1] >= w[0] - 1e-12);
            assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
        }
    }

    #[test]
    fn more_pieces_never_worse() {
        let samples: Vec<(f64, f64)> = (3..=13).map(|s| (s as f64, ((s as f64 - 3.0) / 10.0).powi(3) * 75.0)).collect();
        let mut last = f64::INFINITY;
        for k in 1..=6 {
            let c = pwl_power_curve(&samples, k, 75.0).unwrap();
            assert!(c.max_gap <= last + 1e-12);
            last = c.max_gap;
        }
    }

    #[test]
    fn zero_pieces_and_nonmonotone_rejected() {
        let ok = [(0.0, 0.0), (1.0, 1.0)];
        assert!(pwl_power_curve(&ok, 0, 1.0).is_err());
        let bumpy = [(0.0, 0.0), (1.0, 2.0), (2.0, 1.0), (3.0, 5.0)];
        assert!(pwl_power_curve(&bumpy, 2, 5.0).is_err());
    }

    #[test]
    fn demand_zero_budget_is_singleton() {
        let dbar = DMatrix::from_row_slice(2, 2, &[10.0, 20.0, 11.0, 21.0]);
        let dhat = &dbar * 0.05;
        let p = build_demand_set(&dbar, &dhat, 0.0).unwrap();
        let c = [1.0, -2.0, 0.5, 3.0];
        let (hi, _) = p.optimize_xi(&c, Sense::Maximize).unwrap();
        let (lo, _) = p.optimize_xi(&c, Sense::Minimize).unwrap();
        assert!((hi - lo).abs() < 1e-9);
    }

    #[test]
    fn demand_single_load_interval() {
        let dbar = DMatrix::from_element(1, 1, 100.0);
        let dhat = DMatrix::from_element(1, 1, 5.0);
        let p = build_demand_set(&dbar, &dhat, 1.0).unwrap();
        let (hi, _) = p.optimize_xi(&[1.0], Sense::Maximize).unwrap();
        let (lo, _) = p.optimize_xi(&[1.0], Sense::Minimize).unwrap();
        assert!((hi - 105.0).abs() < 1e-9 && (lo - 95.0).abs() < 1e-9);
    }

    #[test]
    fn demand_diamond_budget_sqrt_two() {
        // Box [-1, 1]² intersected with |x| + |y| ≤ √2: max x + y is √2.
        let dbar = DMatrix::from_row_slice(1, 2, &[50.0, 60.0]);
        let dhat = DMatrix::from_element(1, 2, 1.0);
        let p = build_demand_set(&dbar, &dhat, 1.0).unwrap();
        let (hi, _) = p.optimize_xi(&[1.0, 1.0], Sense::Maximize).unwrap();
        assert!((hi - 110.0 - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn demand_dimension_mismatch() {
        let r = build_demand_set(&DMatrix::zeros(2, 2), &DMatrix::zeros(2, 3), 1.0);
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn product_of_singletons_and_vertex_count() {
        let a = Polyhedron::singleton(labels("a", 1), &[1.0]);
        let b = Polyhedron::singleton(labels("b", 2), &[2.0, 3.0]);
        let ab = product_set(&a, &b).unwrap();
        assert_eq!(ab.nominal_xi(), vec![1.0, 2.0, 3.0]);
        assert_eq!(ab.xi_vertices(100).unwrap(), vec![vec![1.0, 2.0, 3.0]]);

        let seg = Polyhedron::boxed(labels("s", 1), &[0.0], &[1.0], &[0.0]);
        let mut tri = Polyhedron::boxed(labels("t", 2), &[0.0, 0.0], &[INF, INF], &[0.0, 0.0]);
        tri.add_row("simplex".into(), -INF, 1.0, &[(0, 1.0), (1, 1.0)]);
        assert_eq!(seg.xi_vertices(100).unwrap().len(), 2);
        assert_eq!(tri.xi_vertices(100).unwrap().len(), 3);
        assert_eq!(product_set(&seg, &tri).unwrap().xi_vertices(100).unwrap().len(), 6);
    }

    #[test]
    fn product_label_collision() {
        let a = Polyhedron::singleton(labels("x", 2), &[1.0, 2.0]);
        assert!(matches!(product_set(&a, &a), Err(Error::LabelCollision(_))));
    }

    #[test]
    fn vertex_budget_enforced() {
        let p = Polyhedron::boxed(labels("x", 6), &[0.0; 6], &[1.0; 6], &[0.0; 6]);
        assert_eq!(p.xi_vertices(100).unwrap().len(), 64);
        assert!(matches!(p.xi_vertices(10), Err(Error::VertexBudget(10))));
    }

    fn toy_wind(kind: SetKind, gamma: f64, a: f64) -> (Polyhedron, SeasonalModel, VarModel, PowerCurvePWL) {
        let seasonal = SeasonalModel::daily(vec![vec![8.0, 0.5, 0.0, 0.0, 0.0], vec![7.0, 0.0, 0.3, 0.0, 0.0]]);
        let var = VarModel::new(
            vec![DMatrix::from_row_slice(2, 2, &[a, 0.1, 0.05, a])],
            DMatrix::from_row_slice(2, 2, &[0.25, 0.15, 0.15, 0.25]),
        )
        .unwrap();
        let curve = pwl_power_curve(
            &[(3.0, 0.0), (5.0, 6.0), (7.0, 20.0), (9.0, 45.0), (11.0, 68.0), (12.0, 75.0)],
            4,
            75.0,
        )
        .unwrap();
        let history = vec![vec![8.3, 6.6], vec![8.9, 7.4]];
        let curves = vec![curve.clone(), curve.clone()];
        let input = WindSetInput {
            seasonal: &seasonal,
            var: &var,
            history: &history,
            t1: 40,
            horizon: 5,
            curves: &curves,
        };
        let spec = SetSpec {
            kind,
            gamma_w: gamma,
            ..SetSpec::default()
        };
        (build_wind_trajectory_set(&input, &spec).unwrap(), seasonal, var, curve)
    }

    #[test]
    fn zero_budget_pins_trajectory_to_forecast() {
        let (p, seasonal, var, curve) = toy_wind(SetKind::Dus, 0.0, 0.6);
        let g1 = seasonal.eval(40);
        let hist = [DVector::from_vec(vec![8.9 - g1[0], 7.4 - g1[1]])];
        let f = crate::wind::nominal_forecast(&seasonal, &var, &hist, 40, 5).unwrap();
        for k in 0..4 {
            for i in 0..2 {
                let j = p.var_index(&format!("r_t{}_w{}", k + 2, i + 1)).unwrap();
                let mut obj = vec![0.0; p.n_vars()];
                obj[j] = 1.0;
                let mut lp = p.lp_over_xi(&vec![0.0; p.n_xi()], Sense::Maximize);
                lp.objective = obj.clone();
                let hi = lp_solve(&lp).unwrap().objective;
                lp.sense = Sense::Minimize;
                let lo = lp_solve(&lp).unwrap().objective;
                assert!((hi - f[(k, i)]).abs() < 1e-9 && (lo - f[(k, i)]).abs() < 1e-9);
                // The cheapest available power is the curve envelope at the forecast.
                let xi = p.xi_index.iter().position(|&x| x == j + 4).unwrap();
                let mut c = vec![0.0; p.n_xi()];
                c[xi] = 1.0;
                let (v, _) = p.optimize_xi(&c, Sense::Minimize).unwrap();
                assert!((v - curve.envelope(f[(k, i)])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn budgets_are_nested() {
        let (small, ..) = toy_wind(SetKind::Dus, 0.3, 0.6);
        let (large, ..) = toy_wind(SetKind::Dus, 0.6, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r_cols: Vec<usize> = (0..small.n_vars()).filter(|&j| small.labels[j].starts_with("r_")).collect();
        for _ in 0..30 {
            let mut obj = vec![0.0; small.n_vars()];
            for &j in &r_cols {
                obj[j] = rng.gen_range(-1.0..1.0);
            }
            let mut lp_s = small.lp_over_xi(&vec![0.0; small.n_xi()], Sense::Maximize);
            lp_s.objective = obj.clone();
            let mut lp_l = large.lp_over_xi(&vec![0.0; large.n_xi()], Sense::Maximize);
            lp_l.objective = obj;
            let s = lp_solve(&lp_s).unwrap();
            let l = lp_solve(&lp_l).unwrap();
            assert!(s.objective <= l.objective + 1e-9);
            assert!(large.max_violation(&s.primal) <= 1e-9);
            assert!(large.contains_xi(&small.project(&s.primal), 1e-9).unwrap());
        }
    }

    #[test]
    fn speeds_nonnegative_and_curve_tight_at_adversarial_vertex() {
        let (p, _, _, curve) = toy_wind(SetKind::Dus, 1.0, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let w: Vec<f64> = (0..p.n_xi()).map(|_| -rng.gen_range(0.1..1.0)).collect();
            let (_, z) = p.optimize_xi(&w, Sense::Maximize).unwrap();
            for k in 0..4 {
                for i in 0..2 {
                    let r = z[p.var_index(&format!("r_t{}_w{}", k + 2, i + 1)).unwrap()];
                    let pw = z[p.var_index(&format!("pw_t{}_w{}", k + 2, i + 1)).unwrap()];
                    assert!(r >= -1e-9);
                    assert!((pw - curve.envelope(r)).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn sus2_innovations_do_not_cross_sites() {
        let (p, ..) = toy_wind(SetKind::Sus2, 0.5, 0.6);
        let u_site1: HashSet<usize> = (0..p.n_vars())
            .filter(|&j| p.labels[j].starts_with("up_") || p.labels[j].starts_with("um_"))
            .filter(|&j| p.labels[j].ends_with("_w1"))
            .collect();
        for i in 0..p.n_rows() {
            if p.row_labels[i].starts_with("var_") && p.row_labels[i].ends_with("_w2") {
                assert!(p.rows.row(i).all(|(j, _)| !u_site1.contains(&j)));
            }
        }
        // SUS1 keeps the spatial coupling through B.
        let (q, ..) = toy_wind(SetKind::Sus1, 0.5, 0.6);
        let coupled = (0..q.n_rows()).any(|i| {
            q.row_labels[i].starts_with("var_")
                && q.row_labels[i].ends_with("_w2")
                && q.rows.row(i).any(|(j, _)| q.labels[j].starts_with("up_") && q.labels[j].ends_with("_w1"))
        });
        assert!(coupled);
    }

    #[test]
    fn split_variables_reproduce_l1_linf_ball() {
        // Lifted budget set for two sites: u± ≥ 0, u⁺+u⁻ ≤ 1, Σ(u⁺+u⁻) ≤ √2.
        let mut p = Polyhedron::boxed(labels("u", 4), &[0.0; 4], &[1.0; 4], &[0.0; 4]);
        p.xi_index.clear();
        p.add_row("b1".into(), -INF, 1.0, &[(0, 1.0), (1, 1.0)]);
        p.add_row("b2".into(), -INF, 1.0, &[(2, 1.0), (3, 1.0)]);
        p.add_row("b".into(), -INF, 2f64.sqrt(), &[(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)]);
        let proj: Vec<(f64, f64)> = p.vertices(1000).unwrap().iter().map(|v| (v[0] - v[1], v[2] - v[3])).collect();
        let s = 2f64.sqrt() - 1.0;
        for (x, y) in &proj {
            assert!(x.abs() <= 1.0 + 1e-9 && y.abs() <= 1.0 + 1e-9 && x.abs() + y.abs() <= 2f64.sqrt() + 1e-9);
        }
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for (a, b) in [(1.0, s), (s, 1.0)] {
                    let target = (sx * a, sy * b);
                    assert!(proj.iter().any(|q| (q.0 - target.0).abs() < 1e-9 && (q.1 - target.1).abs() < 1e-9));
                }
            }
        }
    }

    #[test]
    fn time_budget_tightens_set() {
        let seasonal = SeasonalModel::daily(vec![vec![8.0, 0.0, 0.0, 0.0, 0.0]]);
        let var = VarModel::new(vec![], DMatrix::from_element(1, 1, 1.0)).unwrap();
        let curve = pwl_power_curve(&[(0.0, 0.0), (10.0, 50.0)], 1, 50.0).unwrap();
        let curves = vec![curve];
        let history = vec![vec![8.0]];
        let input = WindSetInput {
            seasonal: &seasonal,
            var: &var,
            history: &history,
            t1: 0,
            horizon: 5,
            curves: &curves,
        };
        let base = SetSpec {
            gamma_w: 1.0,
            lags: 0,
            ..SetSpec::default()
        };
        let free = build_wind_trajectory_set(&input, &base).unwrap();
        let capped = build_wind_trajectory_set(&input, &SetSpec { gamma_t: Some(0.5), ..base.clone() }).unwrap();
        let loose = build_wind_trajectory_set(&input, &SetSpec { gamma_t: Some(2.0), ..base }).unwrap();
        let w = vec![-1.0; 4];
        let v_free = free.optimize_xi(&w, Sense::Maximize).unwrap().0;
        let v_cap = capped.optimize_xi(&w, Sense::Maximize).unwrap().0;
        let v_loose = loose.optimize_xi(&w, Sense::Maximize).unwrap().0;
        assert!(v_cap < v_free - 1e-6);
        assert!((v_loose - v_free).abs() < 1e-9);
    }

    #[test]
    fn missing_history_is_an_error() {
        let seasonal = SeasonalModel::daily(vec![vec![8.0, 0.0, 0.0, 0.0, 0.0]]);
        let var = VarModel::new(vec![DMatrix::zeros(1, 1); 3], DMatrix::from_element(1, 1, 1.0)).unwrap();
        let curves = vec![pwl_power_curve(&[(0.0, 0.0), (10.0, 50.0)], 1, 50.0).unwrap()];
        let history = vec![vec![8.0]];
        let input = WindSetInput {
            seasonal: &seasonal,
            var: &var,
            history: &history,
            t1: 0,
            horizon: 3,
            curves: &curves,
        };
        let r = build_wind_trajectory_set(&input, &SetSpec::default());
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn lp_listing_names_blocks() {
        let (p, ..) = toy_wind(SetKind::Dus, 0.5, 0.6);
        let s = p.to_lp_string();
        assert!(s.contains("pw_t2_w1") && s.contains("ubudget_t3"));
    }
}
