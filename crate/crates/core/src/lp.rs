#![allow(non_upper_case_globals)]
//! Linear programming layer.
//!
//! Every model in the crate (dispatch, master problem, adversary problems)
//! is reduced to an [`LpProblem`] and solved through HiGHS. [`lp_solve`] is the
//! one-shot entry point; [`LpModel`] keeps a solver instance alive so that
//! repeated solves with changed bounds, costs or appended rows/columns are
//! warm-started from the previous basis.
//!
//! Duals are reported as sensitivities: `row_duals[i]` is the rate of change of
//! the optimal objective per unit increase of the active bound of row `i`, for
//! both minimization and maximization. `col_duals` are reduced costs with the
//! same convention for column bounds.

use std::ffi::{c_void, CString};
use std::fmt::Write as _;
use std::ptr::NonNull;

use highs_sys::*;

use crate::error::{Error, Result};

pub const INF: f64 = f64::INFINITY;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Row-compressed sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRows {
    starts: Vec<usize>,
    index: Vec<usize>,
    value: Vec<f64>,
}

impl Default for SparseRows {
    fn default() -> Self {
        Self::new()
    }
}

impl SparseRows {
    pub fn new() -> Self {
        SparseRows {
            starts: vec![0],
            index: Vec::new(),
            value: Vec::new(),
        }
    }

    /// Appends a row; zero coefficients are dropped.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) -> usize {
        for &(j, v) in entries {
            if v != 0.0 {
                self.index.push(j);
                self.value.push(v);
            }
        }
        self.starts.push(self.index.len());
        self.starts.len() - 2
    }

    pub fn n_rows(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.index.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.starts[i], self.starts[i + 1]);
        self.index[a..b].iter().copied().zip(self.value[a..b].iter().copied())
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.starts[i + 1] - self.starts[i]
    }

    pub fn dot_row(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| v * x[j]).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.dot_row(i, x)).collect()
    }

    /// `selfᵀ y`, producing a vector of length `n_cols`.
    pub fn mul_transpose(&self, y: &[f64], n_cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += v * yi;
            }
        }
        out
    }

    /// Whether both matrices have nonzeros in the same positions.
    pub fn same_pattern(&self, other: &SparseRows) -> bool {
        self.starts == other.starts && self.index == other.index
    }

    /// Entries of `other` whose value differs from `self`, as
    /// `(row, col, value)`. Assumes [`same_pattern`](Self::same_pattern).
    pub fn changed_entries(&self, other: &SparseRows) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n_rows() {
            for k in self.starts[i]..self.starts[i + 1] {
                if self.value[k] != other.value[k] {
                    out.push((i, self.index[k], other.value[k]));
                }
            }
        }
        out
    }

    /// Largest column index referenced plus one.
    pub fn min_cols(&self) -> usize {
        self.index.iter().map(|&j| j + 1).max().unwrap_or(0)
    }

    fn raw(&self) -> (Vec<HighsInt>, Vec<HighsInt>, &[f64]) {
        let starts = self.starts[..self.n_rows()]
            .iter()
            .map(|&s| s as HighsInt)
            .collect();
        let index = self.index.iter().map(|&j| j as HighsInt).collect();
        (starts, index, &self.value)
    }
}

/// A linear program `min/max cᵀx + offset` subject to
/// `row_lower ≤ A x ≤ row_upper` and `col_lower ≤ x ≤ col_upper`.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub offset: f64,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub rows: SparseRows,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    pub col_names: Vec<String>,
    pub row_names: Vec<String>,
}

impl LpProblem {
    pub fn new(sense: Sense) -> Self {
        LpProblem {
            sense,
            objective: Vec::new(),
            offset: 0.0,
            col_lower: Vec::new(),
            col_upper: Vec::new(),
            rows: SparseRows::new(),
            row_lower: Vec::new(),
            row_upper: Vec::new(),
            col_names: Vec::new(),
            row_names: Vec::new(),
        }
    }

    pub fn n_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.n_rows()
    }

    pub fn add_col(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_named_col(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        let j = self.add_col(cost, lower, upper);
        self.col_names.resize(j, String::new());
        self.col_names.push(name.into());
        j
    }

    pub fn add_row(&mut self, lower: f64, upper: f64, entries: &[(usize, f64)]) -> usize {
        self.row_lower.push(lower);
        self.row_upper.push(upper);
        self.rows.push_row(entries)
    }

    pub fn add_named_row(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        entries: &[(usize, f64)],
    ) -> usize {
        let i = self.add_row(lower, upper, entries);
        self.row_names.resize(i, String::new());
        self.row_names.push(name.into());
        i
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_cols();
        let m = self.n_rows();
        if self.col_lower.len() != n || self.col_upper.len() != n {
            return Err(Error::Dimension("column bound arrays".into()));
        }
        if self.row_lower.len() != m || self.row_upper.len() != m {
            return Err(Error::Dimension("row bound arrays".into()));
        }
        if self.rows.min_cols() > n {
            return Err(Error::Dimension("row references unknown column".into()));
        }
        let finite = self.objective.iter().chain(self.rows.value.iter()).all(|v| v.is_finite());
        if !finite || !self.offset.is_finite() {
            return Err(Error::Solver("non-finite objective or matrix coefficient".into()));
        }
        if self.col_lower.iter().chain(&self.row_lower).any(|v| v.is_nan() || *v == INF)
            || self.col_upper.iter().chain(&self.row_upper).any(|v| v.is_nan() || *v == -INF)
        {
            return Err(Error::Solver("invalid bound value".into()));
        }
        Ok(())
    }

    /// Objective value of a primal point.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Plain-text listing in LP-file style, for inspection.
    pub fn to_lp_string(&self) -> String {
        let col = |j: usize| -> String {
            match self.col_names.get(j) {
                Some(n) if !n.is_empty() => n.clone(),
                _ => format!("x{j}"),
            }
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}",
            match self.sense {
                Sense::Minimize => "Minimize",
                Sense::Maximize => "Maximize",
            }
        );
        let mut obj = String::from(" obj:");
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(obj, " {} {} {}", if c < 0.0 { '-' } else { '+' }, c.abs(), col(j));
            }
        }
        if self.offset != 0.0 {
            let _ = write!(obj, " + {}", self.offset);
        }
        let _ = writeln!(s, "{obj}");
        let _ = writeln!(s, "Subject To");
        for i in 0..self.n_rows() {
            let name = match self.row_names.get(i) {
                Some(n) if !n.is_empty() => n.clone(),
                _ => format!("c{i}"),
            };
            let mut expr = String::new();
            for (j, v) in self.rows.row(i) {
                let _ = write!(expr, " {} {} {}", if v < 0.0 { '-' } else { '+' }, v.abs(), col(j));
            }
            let (lo, up) = (self.row_lower[i], self.row_upper[i]);
            let line = if lo == up {
                format!(" {name}:{expr} = {lo}")
            } else if lo == -INF {
                format!(" {name}:{expr} <= {up}")
            } else if up == INF {
                format!(" {name}:{expr} >= {lo}")
            } else {
                format!(" {name}: {lo} <={expr} <= {up}")
            };
            let _ = writeln!(s, "{line}");
        }
        let _ = writeln!(s, "Bounds");
        for j in 0..self.n_cols() {
            let (lo, up) = (self.col_lower[j], self.col_upper[j]);
            let _ = match (lo == -INF, up == INF) {
                (true, true) => writeln!(s, " {} free", col(j)),
                (true, false) => writeln!(s, " -inf <= {} <= {up}", col(j)),
                (false, true) => writeln!(s, " {} >= {lo}", col(j)),
                (false, false) if lo == up => writeln!(s, " {} = {lo}", col(j)),
                (false, false) => writeln!(s, " {lo} <= {} <= {up}", col(j)),
            };
        }
        let _ = writeln!(s, "End");
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub row_activity: Vec<f64>,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn non_optimal(status: LpStatus) -> Self {
        LpSolution {
            status,
            objective: f64::NAN,
            primal: Vec::new(),
            row_activity: Vec::new(),
            row_duals: Vec::new(),
            col_duals: Vec::new(),
            iterations: 0,
        }
    }
}

/// Solves a one-off LP. Infeasible and unbounded outcomes are reported in the
/// returned status; solver breakdowns are errors.
pub fn lp_solve(problem: &LpProblem) -> Result<LpSolution> {
    LpModel::new(problem)?.solve()
}

/// A persistent HiGHS instance supporting incremental modification.
pub struct LpModel {
    highs: NonNull<c_void>,
    n_cols: usize,
    n_rows: usize,
    costs: Vec<f64>,
}

// The handle is owned exclusively; HiGHS instances carry no thread affinity.
unsafe impl Send for LpModel {}

fn check(status: HighsInt, what: &str) -> Result<()> {
    if status == kHighsStatusError {
        Err(Error::Solver(format!("HiGHS call failed: {what}")))
    } else {
        Ok(())
    }
}

fn to_ints(v: &[usize]) -> Vec<HighsInt> {
    v.iter().map(|&i| i as HighsInt).collect()
}

impl LpModel {
    pub fn new(problem: &LpProblem) -> Result<Self> {
        problem.validate()?;
        let raw = unsafe { Highs_create() };
        let highs = NonNull::new(raw).ok_or_else(|| Error::Solver("Highs_create returned null".into()))?;
        let mut model = LpModel {
            highs,
            n_cols: problem.n_cols(),
            n_rows: problem.n_rows(),
            costs: problem.objective.clone(),
        };
        model.set_options()?;
        let (starts, index, value) = problem.rows.raw();
        let sense = match problem.sense {
            Sense::Minimize => kHighsObjSenseMinimize,
            Sense::Maximize => kHighsObjSenseMaximize,
        };
        let status = unsafe {
            Highs_passLp(
                model.ptr(),
                problem.n_cols() as HighsInt,
                problem.n_rows() as HighsInt,
                problem.rows.nnz() as HighsInt,
                kHighsMatrixFormatRowwise,
                sense,
                problem.offset,
                problem.objective.as_ptr(),
                problem.col_lower.as_ptr(),
                problem.col_upper.as_ptr(),
                problem.row_lower.as_ptr(),
                problem.row_upper.as_ptr(),
                starts.as_ptr(),
                index.as_ptr(),
                value.as_ptr(),
            )
        };
        check(status, "passLp")?;
        Ok(model)
    }

    fn ptr(&self) -> *mut c_void {
        self.highs.as_ptr()
    }

    fn set_options(&mut self) -> Result<()> {
        let set_bool = |name: &str, v: bool| {
            let c = CString::new(name).expect("option name");
            check(unsafe { Highs_setBoolOptionValue(self.ptr(), c.as_ptr(), v as HighsInt) }, name)
        };
        set_bool("output_flag", false)?;
        let set_str = |name: &str, v: &str| {
            let c = CString::new(name).expect("option name");
            let val = CString::new(v).expect("option value");
            check(unsafe { Highs_setStringOptionValue(self.ptr(), c.as_ptr(), val.as_ptr()) }, name)
        };
        set_str("presolve", "off")?;
        set_str("solver", "simplex")?;
        set_str("parallel", "off")?;
        let threads = CString::new("threads").expect("option name");
        check(unsafe { Highs_setIntOptionValue(self.ptr(), threads.as_ptr(), 1) }, "threads")?;
        Ok(())
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn set_col_bounds(&mut self, cols: &[usize], lower: &[f64], upper: &[f64]) -> Result<()> {
        if cols.is_empty() {
            return Ok(());
        }
        let set = to_ints(cols);
        let status = unsafe {
            Highs_changeColsBoundsBySet(self.ptr(), set.len() as HighsInt, set.as_ptr(), lower.as_ptr(), upper.as_ptr())
        };
        check(status, "changeColsBoundsBySet")
    }

    pub fn set_row_bounds(&mut self, rows: &[usize], lower: &[f64], upper: &[f64]) -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let set = to_ints(rows);
        let status = unsafe {
            Highs_changeRowsBoundsBySet(self.ptr(), set.len() as HighsInt, set.as_ptr(), lower.as_ptr(), upper.as_ptr())
        };
        check(status, "changeRowsBoundsBySet")
    }

    /// Sets one matrix coefficient.
    pub fn set_coeff(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if row >= self.n_rows || col >= self.n_cols {
            return Err(Error::Dimension(format!("coefficient ({row}, {col}) outside the model")));
        }
        let status = unsafe { Highs_changeCoeff(self.ptr(), row as HighsInt, col as HighsInt, value) };
        check(status, "changeCoeff")
    }

    /// Replaces the full objective vector.
    pub fn set_objective(&mut self, costs: &[f64]) -> Result<()> {
        if costs.len() != self.n_cols {
            return Err(Error::Dimension(format!(
                "objective has {} entries, model has {} columns",
                costs.len(),
                self.n_cols
            )));
        }
        if self.n_cols == 0 {
            return Ok(());
        }
        let status =
            unsafe { Highs_changeColsCostByRange(self.ptr(), 0, (self.n_cols - 1) as HighsInt, costs.as_ptr()) };
        check(status, "changeColsCostByRange")?;
        self.costs.copy_from_slice(costs);
        Ok(())
    }

    /// Appends columns with no matrix entries; returns the index of the first.
    pub fn add_cols(&mut self, costs: &[f64], lower: &[f64], upper: &[f64]) -> Result<usize> {
        let first = self.n_cols;
        if costs.is_empty() {
            return Ok(first);
        }
        let starts = vec![0 as HighsInt; costs.len()];
        let status = unsafe {
            Highs_addCols(
                self.ptr(),
                costs.len() as HighsInt,
                costs.as_ptr(),
                lower.as_ptr(),
                upper.as_ptr(),
                0,
                starts.as_ptr(),
                std::ptr::null(),
                std::ptr::null(),
            )
        };
        check(status, "addCols")?;
        self.n_cols += costs.len();
        self.costs.extend_from_slice(costs);
        Ok(first)
    }

    /// Appends rows; returns the index of the first.
    pub fn add_rows(&mut self, lower: &[f64], upper: &[f64], rows: &SparseRows) -> Result<usize> {
        let first = self.n_rows;
        if rows.n_rows() == 0 {
            return Ok(first);
        }
        if rows.min_cols() > self.n_cols {
            return Err(Error::Dimension("added row references unknown column".into()));
        }
        let (starts, index, value) = rows.raw();
        let status = unsafe {
            Highs_addRows(
                self.ptr(),
                rows.n_rows() as HighsInt,
                lower.as_ptr(),
                upper.as_ptr(),
                rows.nnz() as HighsInt,
                starts.as_ptr(),
                index.as_ptr(),
                value.as_ptr(),
            )
        };
        check(status, "addRows")?;
        self.n_rows += rows.n_rows();
        Ok(first)
    }

    fn run(&mut self) -> Result<HighsInt> {
        let status = unsafe { Highs_run(self.ptr()) };
        check(status, "run")?;
        Ok(unsafe { Highs_getModelStatus(self.ptr()) })
    }

    pub fn solve(&mut self) -> Result<LpSolution> {
        let mut status = self.run()?;
        if !matches!(
            status,
            kHighsModelStatusOptimal
                | kHighsModelStatusInfeasible
                | kHighsModelStatusUnbounded
                | kHighsModelStatusUnboundedOrInfeasible
                | kHighsModelStatusModelEmpty
        ) {
            // Discard the warm basis and retry from scratch once.
            check(unsafe { Highs_clearSolver(self.ptr()) }, "clearSolver")?;
            status = self.run()?;
        }
        match status {
            kHighsModelStatusOptimal | kHighsModelStatusModelEmpty => self.extract(),
            kHighsModelStatusInfeasible => Ok(LpSolution::non_optimal(LpStatus::Infeasible)),
            kHighsModelStatusUnbounded => Ok(LpSolution::non_optimal(LpStatus::Unbounded)),
            kHighsModelStatusUnboundedOrInfeasible => self.classify_unbounded_or_infeasible(),
            other => Err(Error::Solver(format!("HiGHS model status {other}"))),
        }
    }

    /// Distinguishes the two cases by solving the feasibility problem.
    fn classify_unbounded_or_infeasible(&mut self) -> Result<LpSolution> {
        let saved = self.costs.clone();
        self.set_objective(&vec![0.0; self.n_cols])?;
        check(unsafe { Highs_clearSolver(self.ptr()) }, "clearSolver")?;
        let status = self.run();
        self.set_objective(&saved)?;
        check(unsafe { Highs_clearSolver(self.ptr()) }, "clearSolver")?;
        match status? {
            kHighsModelStatusOptimal | kHighsModelStatusModelEmpty => {
                Ok(LpSolution::non_optimal(LpStatus::Unbounded))
            }
            _ => Ok(LpSolution::non_optimal(LpStatus::Infeasible)),
        }
    }

    fn extract(&mut self) -> Result<LpSolution> {
        let mut primal = vec![0.0; self.n_cols];
        let mut col_duals = vec![0.0; self.n_cols];
        let mut row_activity = vec![0.0; self.n_rows];
        let mut row_duals = vec![0.0; self.n_rows];
        let status = unsafe {
            Highs_getSolution(
                self.ptr(),
                primal.as_mut_ptr(),
                col_duals.as_mut_ptr(),
                row_activity.as_mut_ptr(),
                row_duals.as_mut_ptr(),
            )
        };
        check(status, "getSolution")?;
        let objective = unsafe { Highs_getObjectiveValue(self.ptr()) };
        let iterations = unsafe { Highs_getSimplexIterationCount(self.ptr()) }.max(0) as usize;
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective,
            primal,
            row_activity,
            row_duals,
            col_duals,
            iterations,
        })
    }
}

impl Drop for LpModel {
    fn drop(&mut self) {
        unsafe { Highs_destroy(self.ptr()) }
    }
}
