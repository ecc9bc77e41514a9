//! Power system description, file loading and DC shift factors.
//!
//! Grid files are JSON or TOML (chosen by extension) with the arrays
//! `buses`, `lines`, `generators`, `windfarms` and `loads`. Units are MW,
//! per-unit reactance on `base_mva` (default 100 MVA) and $/MWh. Ramp rates
//! are MW per 10-minute interval. See `docs/grid-schema.md` for the
//! field-by-field description.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uncertainty::PowerCurvePWL;

pub type BusId = u32;

pub const DEFAULT_BASE_MVA: f64 = 100.0;
pub const DEFAULT_CURVE_PIECES: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub from: BusId,
    pub to: BusId,
    pub reactance: f64,
    pub flow_limit: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalGen {
    pub bus: BusId,
    pub pmin: f64,
    pub pmax: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindFarm {
    pub bus: BusId,
    pub pwmax: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub cost: f64,
    pub power_curve: PowerCurvePWL,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Load {
    pub bus: BusId,
    /// Nominal demand; the daily profile scales loads proportionally to it.
    pub nominal_mw: f64,
}

/// DC shift factors and their projections onto unit buses.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftFactors {
    pub slack_bus: BusId,
    /// lines × buses
    pub alpha: DMatrix<f64>,
    /// lines × generators, `alpha · E^g`
    pub gen: DMatrix<f64>,
    /// lines × wind farms, `alpha · E^w`
    pub wind: DMatrix<f64>,
    /// lines × loads, `alpha · E^d`
    pub load: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct Grid {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<BusId>,
    pub lines: Vec<Line>,
    pub gens: Vec<ThermalGen>,
    pub windfarms: Vec<WindFarm>,
    pub loads: Vec<Load>,
    pub slack_bus: BusId,
    bus_index: HashMap<BusId, usize>,
    shift_factors: Option<ShiftFactors>,
}

// ---- file schema -----------------------------------------------------------

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default)]
    name: String,
    #[serde(default = "default_base")]
    base_mva: f64,
    #[serde(default)]
    slack_bus: Option<BusId>,
    buses: Vec<BusId>,
    lines: Vec<LineFile>,
    generators: Vec<GenFile>,
    #[serde(default)]
    windfarms: Vec<WindFile>,
    loads: Vec<LoadFile>,
    /// Power curve shared by wind farms that do not define their own.
    #[serde(default)]
    power_curve: Option<CurveFile>,
}

fn default_base() -> f64 {
    DEFAULT_BASE_MVA
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct LineFile {
    from: BusId,
    to: BusId,
    reactance: f64,
    flow_limit: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct GenFile {
    bus: BusId,
    pmin: f64,
    pmax: f64,
    ramp_up: f64,
    #[serde(default)]
    ramp_down: Option<f64>,
    cost: f64,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct WindFile {
    bus: BusId,
    pwmax: f64,
    #[serde(default)]
    ramp_up: Option<f64>,
    #[serde(default)]
    ramp_down: Option<f64>,
    #[serde(default)]
    cost: f64,
    #[serde(default)]
    power_curve: Option<CurveFile>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct CurveFile {
    /// m/s, ascending
    speeds: Vec<f64>,
    /// MW at the farm level
    powers: Vec<f64>,
    #[serde(default)]
    pieces: Option<usize>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct LoadFile {
    bus: BusId,
    p_mw: f64,
}

/// Loads and validates a grid file. Shift factors are not computed.
pub fn load_grid(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => Grid::from_toml_str(&text),
        _ => Grid::from_json_str(&text),
    }
}

impl Grid {
    /// Loads a grid file and computes its shift factors.
    pub fn load(path: impl AsRef<Path>) -> Result<Grid> {
        let mut grid = load_grid(path)?;
        grid.compute_and_cache_ptdf()?;
        Ok(grid)
    }

    pub fn from_json_str(text: &str) -> Result<Grid> {
        let file: GridFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_toml_str(text: &str) -> Result<Grid> {
        let file: GridFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    fn from_file(file: GridFile) -> Result<Grid> {
        let invalid = |msg: String| Err(Error::InvalidGrid(msg));
        if file.buses.is_empty() {
            return invalid("no buses".into());
        }
        if !(file.base_mva.is_finite() && file.base_mva > 0.0) {
            return invalid("base_mva must be positive".into());
        }
        let mut bus_index = HashMap::new();
        for (k, &b) in file.buses.iter().enumerate() {
            if bus_index.insert(b, k).is_some() {
                return invalid(format!("duplicate bus id {b}"));
            }
        }
        let known = |b: BusId, what: &str| -> Result<()> {
            if bus_index.contains_key(&b) {
                Ok(())
            } else {
                Err(Error::InvalidGrid(format!("{what} references unknown bus {b}")))
            }
        };
        let slack_bus = file.slack_bus.unwrap_or(file.buses[0]);
        known(slack_bus, "slack_bus")?;

        let mut lines = Vec::with_capacity(file.lines.len());
        for (l, lf) in file.lines.iter().enumerate() {
            known(lf.from, &format!("line {l}"))?;
            known(lf.to, &format!("line {l}"))?;
            if lf.from == lf.to {
                return invalid(format!("line {l} is a self-loop"));
            }
            if !(lf.reactance.is_finite() && lf.reactance > 0.0) {
                return invalid(format!("line {l} has nonpositive reactance"));
            }
            if !(lf.flow_limit > 0.0) || lf.flow_limit.is_nan() {
                return invalid(format!("line {l} has nonpositive flow limit"));
            }
            lines.push(Line {
                from: lf.from,
                to: lf.to,
                reactance: lf.reactance,
                flow_limit: lf.flow_limit,
            });
        }

        let mut gens = Vec::with_capacity(file.generators.len());
        for (i, g) in file.generators.iter().enumerate() {
            known(g.bus, &format!("generator {i}"))?;
            let ramp_down = g.ramp_down.unwrap_or(g.ramp_up);
            let ok = g.pmin.is_finite()
                && g.pmax.is_finite()
                && 0.0 <= g.pmin
                && g.pmin <= g.pmax
                && g.ramp_up.is_finite()
                && g.ramp_up > 0.0
                && ramp_down.is_finite()
                && ramp_down > 0.0
                && g.cost.is_finite()
                && g.cost >= 0.0;
            if !ok {
                return invalid(format!("generator {i} violates 0 <= pmin <= pmax, ramps > 0, cost >= 0"));
            }
            gens.push(ThermalGen {
                bus: g.bus,
                pmin: g.pmin,
                pmax: g.pmax,
                ramp_up: g.ramp_up,
                ramp_down,
                cost: g.cost,
            });
        }

        let mut windfarms = Vec::with_capacity(file.windfarms.len());
        for (i, w) in file.windfarms.iter().enumerate() {
            known(w.bus, &format!("wind farm {i}"))?;
            if !(w.pwmax.is_finite() && w.pwmax > 0.0) || !(w.cost.is_finite() && w.cost >= 0.0) {
                return invalid(format!("wind farm {i} needs pwmax > 0 and cost >= 0"));
            }
            // Wind ramp limits default to the capacity, i.e. non-binding.
            let ramp_up = w.ramp_up.unwrap_or(w.pwmax);
            let ramp_down = w.ramp_down.unwrap_or(w.pwmax);
            if !(ramp_up > 0.0 && ramp_down > 0.0) || !ramp_up.is_finite() || !ramp_down.is_finite() {
                return invalid(format!("wind farm {i} has nonpositive ramp limit"));
            }
            let curve = w
                .power_curve
                .as_ref()
                .or(file.power_curve.as_ref())
                .ok_or_else(|| Error::InvalidGrid(format!("wind farm {i} has no power curve")))?;
            let samples: Vec<(f64, f64)> = curve.speeds.iter().copied().zip(curve.powers.iter().copied()).collect();
            if curve.speeds.len() != curve.powers.len() {
                return invalid(format!("wind farm {i}: speeds and powers differ in length"));
            }
            let pieces = curve.pieces.unwrap_or(DEFAULT_CURVE_PIECES);
            let power_curve = PowerCurvePWL::fit(&samples, pieces, w.pwmax)
                .map_err(|e| Error::InvalidGrid(format!("wind farm {i} power curve: {e}")))?;
            windfarms.push(WindFarm {
                bus: w.bus,
                pwmax: w.pwmax,
                ramp_up,
                ramp_down,
                cost: w.cost,
                power_curve,
            });
        }

        let mut loads = Vec::with_capacity(file.loads.len());
        for (j, ld) in file.loads.iter().enumerate() {
            known(ld.bus, &format!("load {j}"))?;
            if !(ld.p_mw.is_finite() && ld.p_mw >= 0.0) {
                return invalid(format!("load {j} has negative or non-finite demand"));
            }
            loads.push(Load {
                bus: ld.bus,
                nominal_mw: ld.p_mw,
            });
        }

        Ok(Grid {
            name: file.name,
            base_mva: file.base_mva,
            buses: file.buses,
            lines,
            gens,
            windfarms,
            loads,
            slack_bus,
            bus_index,
            shift_factors: None,
        })
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_gens(&self) -> usize {
        self.gens.len()
    }

    pub fn n_wind(&self) -> usize {
        self.windfarms.len()
    }

    pub fn n_loads(&self) -> usize {
        self.loads.len()
    }

    pub fn bus_index(&self, bus: BusId) -> Option<usize> {
        self.bus_index.get(&bus).copied()
    }

    fn incidence(&self, unit_buses: impl Iterator<Item = BusId>) -> DMatrix<f64> {
        let buses: Vec<usize> = unit_buses.map(|b| self.bus_index[&b]).collect();
        let mut e = DMatrix::zeros(self.n_buses(), buses.len());
        for (u, k) in buses.into_iter().enumerate() {
            e[(k, u)] = 1.0;
        }
        e
    }

    /// Bus × generator 0/1 incidence.
    pub fn incidence_gen(&self) -> DMatrix<f64> {
        self.incidence(self.gens.iter().map(|g| g.bus))
    }

    pub fn incidence_wind(&self) -> DMatrix<f64> {
        self.incidence(self.windfarms.iter().map(|w| w.bus))
    }

    pub fn incidence_load(&self) -> DMatrix<f64> {
        self.incidence(self.loads.iter().map(|l| l.bus))
    }

    pub fn shift_factors(&self) -> Option<&ShiftFactors> {
        self.shift_factors.as_ref()
    }

    /// Shift factors, or an error if they were never computed.
    pub fn ptdf(&self) -> Result<&ShiftFactors> {
        self.shift_factors
            .as_ref()
            .ok_or_else(|| Error::InvalidGrid("shift factors not computed; call compute_and_cache_ptdf".into()))
    }

    pub fn compute_and_cache_ptdf(&mut self) -> Result<&ShiftFactors> {
        let alpha = compute_ptdf(self, self.slack_bus)?;
        let gen = &alpha * self.incidence_gen();
        let wind = &alpha * self.incidence_wind();
        let load = &alpha * self.incidence_load();
        self.shift_factors = Some(ShiftFactors {
            slack_bus: self.slack_bus,
            alpha,
            gen,
            wind,
            load,
        });
        Ok(self.shift_factors.as_ref().expect("just set"))
    }

    fn is_connected(&self) -> bool {
        let n = self.n_buses();
        let mut adj = vec![Vec::new(); n];
        for l in &self.lines {
            let (a, b) = (self.bus_index[&l.from], self.bus_index[&l.to]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(k) = queue.pop_front() {
            for &m in &adj[k] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// DC power transfer distribution factors relative to `slack`.
///
/// Entry `(l, k)` is the flow on line `l` (positive from `from` to `to`) per
/// MW injected at bus `k` and withdrawn at the slack bus.
pub fn compute_ptdf(grid: &Grid, slack: BusId) -> Result<DMatrix<f64>> {
    let n = grid.n_buses();
    let s = grid
        .bus_index(slack)
        .ok_or_else(|| Error::InvalidGrid(format!("slack bus {slack} does not exist")))?;
    if !grid.is_connected() {
        return Err(Error::DisconnectedNetwork);
    }
    // Reduced index: every bus except the slack.
    let red = |k: usize| -> Option<usize> {
        match k.cmp(&s) {
            std::cmp::Ordering::Less => Some(k),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(k - 1),
        }
    };
    let mut bred = DMatrix::<f64>::zeros(n - 1, n - 1);
    let susceptance: Vec<f64> = grid.lines.iter().map(|l| grid.base_mva / l.reactance).collect();
    for (l, line) in grid.lines.iter().enumerate() {
        let b = susceptance[l];
        let (i, j) = (red(grid.bus_index[&line.from]), red(grid.bus_index[&line.to]));
        if let Some(i) = i {
            bred[(i, i)] += b;
        }
        if let Some(j) = j {
            bred[(j, j)] += b;
        }
        if let (Some(i), Some(j)) = (i, j) {
            bred[(i, j)] -= b;
            bred[(j, i)] -= b;
        }
    }
    let mut alpha = DMatrix::zeros(grid.n_lines(), n);
    if n == 1 {
        return Ok(alpha);
    }
    let lu = bred.lu();
    // X = B_red⁻¹ (angles per unit injection), solved one column at a time.
    let mut theta = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let Some(kr) = red(k) else { continue };
        let mut e = DVector::zeros(n - 1);
        e[kr] = 1.0;
        let col = lu.solve(&e).ok_or(Error::DisconnectedNetwork)?;
        for m in 0..n {
            if let Some(mr) = red(m) {
                theta[(m, k)] = col[mr];
            }
        }
    }
    for (l, line) in grid.lines.iter().enumerate() {
        let (i, j) = (grid.bus_index[&line.from], grid.bus_index[&line.to]);
        for k in 0..n {
            alpha[(l, k)] = susceptance[l] * (theta[(i, k)] - theta[(j, k)]);
        }
    }
    Ok(alpha)
}

/// Line flows `α (E^g pg + E^w pw − E^d d)` in MW.
pub fn line_flow(grid: &Grid, pg: &[f64], pw: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    if pg.len() != grid.n_gens() || pw.len() != grid.n_wind() || d.len() != grid.n_loads() {
        return Err(Error::Dimension(format!(
            "expected {}/{}/{} generator/wind/load values, got {}/{}/{}",
            grid.n_gens(),
            grid.n_wind(),
            grid.n_loads(),
            pg.len(),
            pw.len(),
            d.len()
        )));
    }
    let sf = grid.ptdf()?;
    let mut flows = vec![0.0; grid.n_lines()];
    for (l, f) in flows.iter_mut().enumerate() {
        *f = (0..pg.len()).map(|i| sf.gen[(l, i)] * pg[i]).sum::<f64>()
            + (0..pw.len()).map(|i| sf.wind[(l, i)] * pw[i]).sum::<f64>()
            - (0..d.len()).map(|j| sf.load[(l, j)] * d[j]).sum::<f64>();
    }
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const LINEAR_CURVE: &str = r#""power_curve": {"speeds": [0, 10], "powers": [0, 50], "pieces": 1}"#;

    fn two_bus() -> Grid {
        let text = format!(
            r#"{{
            "buses": [1, 2],
            "slack_bus": 1,
            "lines": [{{"from": 1, "to": 2, "reactance": 0.1, "flow_limit": 100}}],
            "generators": [{{"bus": 1, "pmin": 0, "pmax": 50, "ramp_up": 10, "cost": 10}}],
            "loads": [{{"bus": 2, "p_mw": 10}}],
            {LINEAR_CURVE}
        }}"#
        );
        let mut g = Grid::from_json_str(&text).unwrap();
        g.compute_and_cache_ptdf().unwrap();
        g
    }

    fn triangle(slack: BusId) -> Grid {
        let text = format!(
            r#"{{
            "buses": [1, 2, 3],
            "slack_bus": {slack},
            "lines": [
                {{"from": 1, "to": 2, "reactance": 0.1, "flow_limit": 100}},
                {{"from": 2, "to": 3, "reactance": 0.1, "flow_limit": 100}},
                {{"from": 1, "to": 3, "reactance": 0.1, "flow_limit": 100}}
            ],
            "generators": [{{"bus": 1, "pmin": 0, "pmax": 50, "ramp_up": 10, "cost": 10}}],
            "windfarms": [{{"bus": 2, "pwmax": 50}}],
            "loads": [{{"bus": 3, "p_mw": 10}}],
            {LINEAR_CURVE}
        }}"#
        );
        let mut g = Grid::from_json_str(&text).unwrap();
        g.compute_and_cache_ptdf().unwrap();
        g
    }

    #[test]
    fn two_bus_schema_minimal() {
        let g = load_grid_from_str_no_ptdf();
        assert_eq!(g.n_lines(), 1);
        assert_eq!(g.n_gens(), 1);
        assert!(g.shift_factors().is_none());
    }

    fn load_grid_from_str_no_ptdf() -> Grid {
        Grid::from_json_str(
            r#"{"buses":[1,2],"lines":[{"from":1,"to":2,"reactance":0.1,"flow_limit":100}],
                "generators":[{"bus":1,"pmin":0,"pmax":50,"ramp_up":10,"cost":10}],
                "loads":[{"bus":2,"p_mw":10}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn unknown_bus_is_rejected() {
        let err = Grid::from_json_str(
            r#"{"buses":[1,2],"lines":[{"from":1,"to":7,"reactance":0.1,"flow_limit":100}],
                "generators":[],"loads":[]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidGrid(_)), "{err}");
    }

    #[test]
    fn nonpositive_reactance_and_limit_rejected() {
        for (x, f) in [(0.0, 10.0), (-1.0, 10.0), (0.1, 0.0)] {
            let text = format!(
                r#"{{"buses":[1,2],"lines":[{{"from":1,"to":2,"reactance":{x},"flow_limit":{f}}}],
                "generators":[],"loads":[]}}"#
            );
            assert!(matches!(Grid::from_json_str(&text), Err(Error::InvalidGrid(_))));
        }
    }

    #[test]
    fn single_path_flow_toward_slack() {
        let g = two_bus();
        let a = &g.ptdf().unwrap().alpha;
        // +1 MW at bus 2, withdrawn at slack bus 1: flow from 2 to 1, i.e. -1 on line 1->2.
        assert!((a[(0, 1)] + 1.0).abs() < 1e-12);
        assert_eq!(a[(0, 0)], 0.0);
    }

    #[test]
    fn two_bus_line_flow() {
        let g = two_bus();
        let f = line_flow(&g, &[10.0], &[], &[10.0]).unwrap();
        assert!((f[0] - 10.0).abs() < 1e-12);
        let z = line_flow(&g, &[0.0], &[], &[0.0]).unwrap();
        assert_eq!(z, vec![0.0]);
    }

    #[test]
    fn triangle_split_two_thirds_one_third() {
        let g = triangle(3);
        // Hand oracle: b = 100/0.1 = 1000 per line, B_red = [[2000,-1000],[-1000,2000]].
        // 1 MW at bus 1 gives theta = [2/3000, 1/3000], so flow 1->3 = 1000 * 2/3000 = 2/3.
        let a = &g.ptdf().unwrap().alpha;
        assert!((a[(2, 0)] - 2.0 / 3.0).abs() < 1e-9);
        assert!((a[(0, 0)] - 1.0 / 3.0).abs() < 1e-9);
        assert!((a[(1, 0)] - 1.0 / 3.0).abs() < 1e-9);
        for l in 0..3 {
            assert_eq!(a[(l, 2)], 0.0);
        }
    }

    #[test]
    fn flows_do_not_depend_on_slack_for_balanced_injections() {
        let pg = [30.0];
        let pw = [12.5];
        let d = [42.5];
        let base = line_flow(&triangle(1), &pg, &pw, &d).unwrap();
        for slack in [2, 3] {
            let other = line_flow(&triangle(slack), &pg, &pw, &d).unwrap();
            for (a, b) in base.iter().zip(&other) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn incidence_columns_have_single_one() {
        let g = triangle(1);
        for e in [g.incidence_gen(), g.incidence_wind(), g.incidence_load()] {
            for c in 0..e.ncols() {
                assert_eq!(e.column(c).iter().filter(|v| **v == 1.0).count(), 1);
                assert_eq!(e.column(c).sum(), 1.0);
            }
        }
    }

    #[test]
    fn disconnected_network_fails() {
        let mut g = Grid::from_json_str(
            r#"{"buses":[1,2,3],"lines":[{"from":1,"to":2,"reactance":0.1,"flow_limit":100}],
                "generators":[],"loads":[]}"#,
        )
        .unwrap();
        assert!(matches!(g.compute_and_cache_ptdf(), Err(Error::DisconnectedNetwork)));
    }

    #[test]
    fn dimension_mismatch_in_line_flow() {
        let g = two_bus();
        assert!(matches!(line_flow(&g, &[1.0, 2.0], &[], &[1.0]), Err(Error::Dimension(_))));
    }
}
