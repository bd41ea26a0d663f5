//! The control system `y' = Σ Z_i(y) β_i`, `|β| ≤ 1`: RK4 trajectories,
//! grid reachable sets, bounded-time connection and local controllability.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DomainBox, VectorFieldFamily};
use crate::linalg::Vector;
use crate::sampling;

/// Allowed excess of `|β|²` over 1.
pub const UNIT_BALL_TOL: f64 = 1e-12;

/// Piecewise-constant control: `values[k]` on `[breakpoints[k], breakpoints[k+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub breakpoints: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints for {} intervals",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) || breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("breakpoints must increase strictly".into()));
        }
        if let Some(m) = values.first().map(Vec::len) {
            if values.iter().any(|v| v.len() != m) {
                return Err(Error::InvalidParameter("control values of mixed length".into()));
            }
        }
        if let Some(v) = values
            .iter()
            .find(|v| v.iter().map(|b| b * b).sum::<f64>() > 1.0 + UNIT_BALL_TOL)
        {
            return Err(Error::InvalidParameter(format!("control {v:?} outside the unit ball")));
        }
        Ok(Self { breakpoints, values })
    }

    /// `β` on `[0, t]`.
    pub fn constant(beta: Vec<f64>, t: f64) -> Result<Self> {
        Self::new(vec![0.0, t], vec![beta])
    }

    /// Consecutive pieces `(β, duration)` starting at time 0.
    pub fn from_pieces(pieces: &[(Vec<f64>, f64)]) -> Result<Self> {
        let mut bps = vec![0.0];
        let mut values = Vec::with_capacity(pieces.len());
        for (beta, dur) in pieces {
            bps.push(bps.last().unwrap() + dur);
            values.push(beta.clone());
        }
        Self::new(bps, values)
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    /// Time-reversed signal with negated controls; for this symmetric
    /// system it retraces the path backwards.
    pub fn reversed(&self) -> Self {
        let t0 = self.start();
        let t1 = self.end();
        let breakpoints = self.breakpoints.iter().rev().map(|t| t0 + t1 - t).collect();
        let values = self
            .values
            .iter()
            .rev()
            .map(|v| v.iter().map(|b| -b).collect())
            .collect();
        Self { breakpoints, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub signal: ControlSignal,
    /// Time at which the state left the domain box, if it did.
    pub exited: Option<f64>,
}

impl Trajectory {
    pub fn end_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// CSV with columns `t, y1 … yd`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.states.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("y{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for (t, y) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(y.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn rk4_step(family: &VectorFieldFamily, y: &[f64], beta: &[f64], h: f64) -> Vec<f64> {
    let y0 = Vector::from_column_slice(y);
    let k1 = family.velocity(y, beta);
    let y1 = &y0 + &k1 * (0.5 * h);
    let k2 = family.velocity(y1.as_slice(), beta);
    let y2 = &y0 + &k2 * (0.5 * h);
    let k3 = family.velocity(y2.as_slice(), beta);
    let y3 = &y0 + &k3 * h;
    let k4 = family.velocity(y3.as_slice(), beta);
    (y0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)).iter().copied().collect()
}

/// Number of RK4 steps covering `len` with steps no longer than `dt`.
fn step_count(len: f64, dt: f64) -> usize {
    ((len / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Fixed-step RK4 of the control system on `[0, T]`.
///
/// Each control interval is split into equal steps no longer than `dt`;
/// after the signal ends the control is zero. Integration stops when the
/// state leaves the family's domain box.
pub fn integrate_trajectory(
    family: &VectorFieldFamily,
    x0: &[f64],
    signal: &ControlSignal,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!("need dt > 0 and T >= 0, got {dt}, {t_end}")));
    }
    family.check_point(x0)?;
    if let Some(v) = signal.values.first() {
        if v.len() != family.count() {
            return Err(Error::DimensionMismatch {
                expected: family.count(),
                got: v.len(),
            });
        }
    }
    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let mut y = x0.to_vec();
    let mut t = 0.0;
    let mut pieces: Vec<(f64, f64, Option<&[f64]>)> = signal
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| (signal.breakpoints[k], signal.breakpoints[k + 1], Some(v.as_slice())))
        .filter(|(_, b, _)| *b > 0.0)
        .collect();
    if signal.end() < t_end {
        pieces.push((signal.end().max(0.0), t_end, None));
    }
    for (a, b, beta) in pieces {
        let a = a.max(0.0);
        let b = b.min(t_end);
        if b <= a {
            continue;
        }
        let Some(beta) = beta else {
            // zero control: the state is frozen
            times.push(b);
            states.push(y.clone());
            t = b;
            continue;
        };
        let n = step_count(b - a, dt);
        let h = (b - a) / n as f64;
        for k in 1..=n {
            y = rk4_step(family, &y, beta, h);
            t = if k == n { b } else { a + k as f64 * h };
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { time: t });
            }
            times.push(t);
            states.push(y.clone());
            if !family.domain().contains(&y) {
                return Ok(Trajectory {
                    times,
                    states,
                    signal: signal.clone(),
                    exited: Some(t),
                });
            }
        }
        if b >= t_end {
            break;
        }
    }
    let _ = t;
    Ok(Trajectory {
        times,
        states,
        signal: signal.clone(),
        exited: None,
    })
}

/// Uniform cell grid over a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub bounds: DomainBox,
    pub resolution: Vec<usize>,
}

impl CellGrid {
    pub fn new(bounds: DomainBox, resolution: Vec<usize>) -> Result<Self> {
        if resolution.len() != bounds.dim() || resolution.iter().any(|r| *r == 0) {
            return Err(Error::InvalidParameter(format!("bad grid resolution {resolution:?}")));
        }
        Ok(Self { bounds, resolution })
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn n_cells(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bounds
            .widths()
            .iter()
            .zip(&self.resolution)
            .map(|(w, r)| w / *r as f64)
            .collect()
    }

    pub fn cell_diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Flat index (first axis fastest) of the cell containing `x`.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if !self.bounds.contains(x) {
            return None;
        }
        let mut flat = 0;
        let mut stride = 1;
        for k in 0..self.dim() {
            let w = (self.bounds.hi[k] - self.bounds.lo[k]) / self.resolution[k] as f64;
            let i = (((x[k] - self.bounds.lo[k]) / w).floor() as usize).min(self.resolution[k] - 1);
            flat += i * stride;
            stride *= self.resolution[k];
        }
        Some(flat)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        self.resolution
            .iter()
            .map(|r| {
                let i = flat % r;
                flat /= r;
                i
            })
            .collect()
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let w = self.widths();
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(k, i)| self.bounds.lo[k] + (*i as f64 + 0.5) * w[k])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReachParams {
    /// Cells per axis; a single entry applies to every axis.
    pub grid_res: Vec<usize>,
    pub horizon: f64,
    /// Defaults to `min cell width / (4 max |Z_i|)`.
    pub dt: Option<f64>,
    /// Defaults to `±e_i` plus `2m` seeded unit mixtures.
    pub control_dirs: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    /// Cap on RK4 substeps spent inside one cell per expansion.
    pub max_substeps: usize,
}

impl Default for ReachParams {
    fn default() -> Self {
        Self {
            grid_res: vec![32],
            horizon: 10.0,
            dt: None,
            control_dirs: None,
            seed: 0,
            max_substeps: 256,
        }
    }
}

/// Control directions `±e_i` plus `2m` random unit mixtures.
pub fn default_control_dirs(m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs = Vec::with_capacity(4 * m);
    for i in 0..m {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; m];
            e[i] = s;
            dirs.push(e);
        }
    }
    if m > 1 {
        let mut rng = sampling::rng(seed);
        for _ in 0..2 * m {
            dirs.push(sampling::random_unit(m, &mut rng).iter().copied().collect());
        }
    }
    dirs
}

/// How a cell was first reached: from `from` with direction `dir` for
/// `steps` RK4 steps of `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub from: usize,
    pub dir: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachableSet {
    pub grid: CellGrid,
    pub origin: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub directions: Vec<Vec<f64>>,
    pub occupancy: Vec<bool>,
    /// First-arrival time per cell (infinite when unreached).
    pub arrival: Vec<f64>,
    /// State at first arrival; reached cells only.
    pub representative: Vec<Option<Vec<f64>>>,
    pub predecessor: Vec<Option<Arrival>>,
}

impl ReachableSet {
    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|o| **o).count()
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupied_count() as f64 / self.occupancy.len() as f64
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.grid.locate(x).is_some_and(|c| self.occupancy[c])
    }

    /// Control signal from the origin to the representative of `cell`.
    pub fn signal_to(&self, cell: usize) -> Option<ControlSignal> {
        if !self.occupancy[cell] {
            return None;
        }
        let mut pieces = Vec::new();
        let mut c = cell;
        while let Some(a) = self.predecessor[c] {
            pieces.push((self.directions[a.dir].clone(), a.steps as f64 * self.dt));
            c = a.from;
        }
        pieces.reverse();
        if pieces.is_empty() {
            return Some(ControlSignal {
                breakpoints: vec![0.0, self.dt],
                values: vec![vec![0.0; self.directions.first().map_or(0, Vec::len)]],
            });
        }
        ControlSignal::from_pieces(&pieces).ok()
    }

    /// Structured text: a TOML header, a `---` line, the run-length encoded
    /// occupancy (`count:bit` pairs, first axis fastest) and the arrival
    /// times of occupied cells in index order.
    pub fn to_text(&self) -> String {
        #[derive(Serialize)]
        struct Header<'a> {
            lo: &'a [f64],
            hi: &'a [f64],
            resolution: &'a [usize],
            horizon: f64,
            dt: f64,
            origin: &'a [f64],
            occupied: usize,
        }
        let header = Header {
            lo: &self.grid.bounds.lo,
            hi: &self.grid.bounds.hi,
            resolution: &self.grid.resolution,
            horizon: self.horizon,
            dt: self.dt,
            origin: &self.origin,
            occupied: self.occupied_count(),
        };
        let mut out = toml::to_string(&header).expect("header serializes");
        out.push_str("---\n");
        let mut runs = Vec::new();
        let mut cur = self.occupancy[0];
        let mut len = 0usize;
        for &o in &self.occupancy {
            if o == cur {
                len += 1;
            } else {
                runs.push(format!("{len}:{}", cur as u8));
                cur = o;
                len = 1;
            }
        }
        runs.push(format!("{len}:{}", cur as u8));
        out.push_str(&runs.join(" "));
        out.push('\n');
        let times: Vec<String> = self
            .arrival
            .iter()
            .zip(&self.occupancy)
            .filter(|(_, o)| **o)
            .map(|(t, _)| t.to_string())
            .collect();
        out.push_str(&times.join(" "));
        out.push('\n');
        out
    }

    /// Rows `(i₁ … i_d, occupied, first_arrival)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.grid.dim()).map(|k| format!("i{k}")).collect();
        header.push("occupied".into());
        header.push("first_arrival".into());
        w.write_record(&header).map_err(csv_err)?;
        for c in 0..self.occupancy.len() {
            let mut row: Vec<String> = self.grid.multi_index(c).iter().map(|i| i.to_string()).collect();
            row.push((self.occupancy[c] as u8).to_string());
            row.push(if self.occupancy[c] {
                self.arrival[c].to_string()
            } else {
                String::new()
            });
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Short text summary for logs.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{} of {} cells reached (T = {}, dt = {})",
            self.occupied_count(),
            self.occupancy.len(),
            self.horizon,
            self.dt
        );
        s
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    t: f64,
    cell: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on (t, cell)
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Setup {
    grid: CellGrid,
    dt: f64,
    dirs: Vec<Vec<f64>>,
}

fn setup(family: &VectorFieldFamily, x0: &[f64], region: &DomainBox, params: &ReachParams) -> Result<Setup> {
    let d = family.dim();
    family.check_point(x0)?;
    if region.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: region.dim(),
        });
    }
    if !region.contains(x0) {
        return Err(Error::OutsideDomain { point: x0.to_vec() });
    }
    if !family.domain().contains_box(region) {
        return Err(Error::InvalidParameter("reach box must lie in the family domain".into()));
    }
    let res = match params.grid_res.len() {
        1 => vec![params.grid_res[0]; d],
        n if n == d => params.grid_res.clone(),
        n => {
            return Err(Error::DimensionMismatch { expected: d, got: n });
        }
    };
    let grid = CellGrid::new(region.clone(), res)?;
    let min_w = grid.widths().iter().copied().fold(f64::INFINITY, f64::min);
    let max_z = family.max_field_norm(region);
    let dt = match params.dt {
        Some(dt) => dt,
        None if max_z > 0.0 => min_w / (4.0 * max_z),
        None => min_w,
    };
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be > 0")));
    }
    if dt * max_z > min_w {
        return Err(Error::InvalidParameter(format!(
            "grid too coarse for dt: dt * max|Z| = {} exceeds the cell width {min_w}; \
             need dt <= {}",
            dt * max_z,
            min_w / max_z
        )));
    }
    let m = family.count();
    let dirs = match &params.control_dirs {
        Some(d) => {
            if d.is_empty() {
                return Err(Error::InvalidParameter("empty control direction list".into()));
            }
            if d.iter().any(|b| b.iter().map(|v| v * v).sum::<f64>() > 1.0 + UNIT_BALL_TOL) {
                return Err(Error::InvalidParameter("control direction outside the unit ball".into()));
            }
            if d.iter().any(|b| b.len() != m) {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: d.iter().map(Vec::len).find(|l| *l != m).unwrap_or(0),
                });
            }
            d.clone()
        }
        None => default_control_dirs(m, params.seed),
    };
    Ok(Setup { grid, dt, dirs })
}

/// Flow with constant `β` from `y` until the state leaves `cell`.
fn exit_cell(
    family: &VectorFieldFamily,
    grid: &CellGrid,
    y: &[f64],
    cell: usize,
    beta: &[f64],
    dt: f64,
    max_steps: usize,
) -> Option<(usize, Vec<f64>, usize)> {
    if family.velocity(y, beta).norm() == 0.0 {
        return None;
    }
    let mut z = y.to_vec();
    for k in 1..=max_steps {
        z = rk4_step(family, &z, beta, dt);
        match grid.locate(&z) {
            Some(c) if c == cell => continue,
            Some(c) => return Some((c, z, k)),
            None => return None,
        }
    }
    None
}

/// Dijkstra over cells with arrival time as key, run until the horizon (or
/// until `target` is settled). Each expansion flows from the cell's
/// first-arrival state with one constant control until the state leaves
/// the cell. Entries whose keys lie within `dt` of the current minimum
/// cannot improve one another, so they are expanded as one parallel batch
/// and merged in heap order.
fn flood(
    family: &VectorFieldFamily,
    x0: &[f64],
    s: &Setup,
    horizon: f64,
    max_substeps: usize,
    target: Option<usize>,
) -> ReachableSet {
    let n = s.grid.n_cells();
    let mut arrival = vec![f64::INFINITY; n];
    let mut rep: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut pred: Vec<Option<Arrival>> = vec![None; n];
    let mut settled = vec![false; n];
    let c0 = s.grid.locate(x0).expect("origin inside the grid");
    arrival[c0] = 0.0;
    rep[c0] = Some(x0.to_vec());
    let mut heap = BinaryHeap::new();
    heap.push(Entry { t: 0.0, cell: c0 });

    'outer: while let Some(first) = heap.pop() {
        let mut batch = vec![first];
        while let Some(top) = heap.peek() {
            if top.t < first.t + s.dt {
                batch.push(heap.pop().unwrap());
            } else {
                break;
            }
        }
        let batch: Vec<Entry> = batch
            .into_iter()
            .filter(|e| {
                let fresh = !settled[e.cell] && e.t == arrival[e.cell];
                if fresh {
                    settled[e.cell] = true;
                }
                fresh
            })
            .collect();
        if target.is_some_and(|t| batch.iter().any(|e| e.cell == t)) {
            break 'outer;
        }
        let moves: Vec<Vec<(usize, usize, Vec<f64>, usize)>> = batch
            .par_iter()
            .map(|e| {
                let y = rep[e.cell].as_ref().expect("settled cells have a state");
                s.dirs
                    .iter()
                    .enumerate()
                    .filter_map(|(di, beta)| {
                        exit_cell(family, &s.grid, y, e.cell, beta, s.dt, max_substeps)
                            .map(|(c, z, k)| (di, c, z, k))
                    })
                    .collect()
            })
            .collect();
        for (e, mv) in batch.iter().zip(moves) {
            for (di, c, z, k) in mv {
                let t = e.t + k as f64 * s.dt;
                if t <= horizon && !settled[c] && t < arrival[c] {
                    arrival[c] = t;
                    rep[c] = Some(z);
                    pred[c] = Some(Arrival {
                        from: e.cell,
                        dir: di,
                        steps: k,
                    });
                    heap.push(Entry { t, cell: c });
                }
            }
        }
    }

    let occupancy = arrival.iter().map(|t| t.is_finite()).collect();
    ReachableSet {
        grid: s.grid.clone(),
        origin: x0.to_vec(),
        horizon,
        dt: s.dt,
        directions: s.dirs.clone(),
        occupancy,
        arrival,
        representative: rep,
        predecessor: pred,
    }
}

/// Grid approximation of the set reachable from `x0` within the horizon.
pub fn reachable_set(family: &VectorFieldFamily, x0: &[f64], region: &DomainBox, params: &ReachParams) -> Result<ReachableSet> {
    let s = setup(family, x0, region, params)?;
    Ok(flood(family, x0, &s, params.horizon, params.max_substeps, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtcReport {
    pub success: bool,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    /// Duration of the reconstructed signal.
    pub time: Option<f64>,
    pub endpoint: Option<Vec<f64>>,
    pub error: Option<f64>,
    pub tol: f64,
    pub signal: Option<ControlSignal>,
    pub cells_reached: usize,
    pub cells_total: usize,
    pub message: String,
}

/// Searches for a piecewise-constant control steering `x0` to the cell of
/// `x1` within `t_max`, then re-integrates the signal and checks
/// `|y(s) − x1| ≤ tol` (default: one cell diameter). A failure is a report,
/// never a claim that no such control exists.
pub fn btc_connect(
    family: &VectorFieldFamily,
    x0: &[f64],
    x1: &[f64],
    region: &DomainBox,
    t_max: f64,
    tol: Option<f64>,
    params: &ReachParams,
) -> Result<BtcReport> {
    let s = setup(family, x0, region, params)?;
    let target = s
        .grid
        .locate(x1)
        .ok_or_else(|| Error::OutsideDomain { point: x1.to_vec() })?;
    let tol = tol.unwrap_or_else(|| s.grid.cell_diameter());
    let set = flood(family, x0, &s, t_max, params.max_substeps, Some(target));
    let mut report = BtcReport {
        success: false,
        from: x0.to_vec(),
        to: x1.to_vec(),
        time: None,
        endpoint: None,
        error: None,
        tol,
        signal: None,
        cells_reached: set.occupied_count(),
        cells_total: set.occupancy.len(),
        message: String::new(),
    };
    let Some(signal) = set.signal_to(target) else {
        report.message = format!(
            "target cell not reached within T = {t_max} ({} of {} cells reached); \
             this does not refute bounded-time controllability",
            report.cells_reached, report.cells_total
        );
        return Ok(report);
    };
    let traj = integrate_trajectory(family, x0, &signal, signal.end(), s.dt)?;
    let end = traj.end_state().to_vec();
    let err = end
        .iter()
        .zip(x1)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    report.success = traj.exited.is_none() && err <= tol;
    report.time = Some(signal.duration());
    report.endpoint = Some(end);
    report.error = Some(err);
    report.signal = Some(signal);
    report.message = if report.success {
        "connected; re-integration lands within tolerance".into()
    } else {
        "target cell reached but re-integration missed the tolerance".into()
    };
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalControllability {
    pub center: Vec<f64>,
    pub radius: f64,
    pub cells_in_ball: usize,
    pub cells_reached: usize,
    pub fraction: f64,
}

/// Fraction of the grid cells with centers in `B(x0, r)` reached from `x0`
/// on the grid over the cube of half-width `r`.
pub fn local_controllability(
    family: &VectorFieldFamily,
    x0: &[f64],
    r: f64,
    params: &ReachParams,
) -> Result<LocalControllability> {
    let region = DomainBox::around(x0, r);
    if !family.domain().contains_box(&region) {
        return Err(Error::Precondition(format!("B({x0:?}, {r}) leaves the domain box")));
    }
    let set = reachable_set(family, x0, &region, params)?;
    let mut in_ball = 0;
    let mut reached = 0;
    for c in 0..set.occupancy.len() {
        let ctr = set.grid.center(c);
        let dist2: f64 = ctr.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist2 <= r * r {
            in_ball += 1;
            if set.occupancy[c] {
                reached += 1;
            }
        }
    }
    Ok(LocalControllability {
        center: x0.to_vec(),
        radius: r,
        cells_in_ball: in_ball,
        cells_reached: reached,
        fraction: if in_ball == 0 { 0.0 } else { reached as f64 / in_ball as f64 },
    })
}

/// Piecewise-constant control with `pieces` random values in the unit ball
/// over `[0, t]`.
pub fn random_signal(m: usize, t: f64, pieces: usize, rng: &mut sampling::SeededRng) -> Result<ControlSignal> {
    let pieces = pieces.max(1);
    let h = t / pieces as f64;
    let parts: Vec<(Vec<f64>, f64)> = (0..pieces)
        .map(|_| {
            let u = sampling::random_unit(m, rng);
            let scale: f64 = rand::Rng::random(rng);
            (u.iter().map(|v| v * scale).collect(), h)
        })
        .collect();
    ControlSignal::from_pieces(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    fn square_loop(s: f64) -> ControlSignal {
        ControlSignal::from_pieces(&[
            (vec![1.0, 0.0], s),
            (vec![0.0, 1.0], s),
            (vec![-1.0, 0.0], s),
            (vec![0.0, -1.0], s),
        ])
        .unwrap()
    }

    #[test]
    fn signal_validation() {
        assert!(ControlSignal::new(vec![0.0, 1.0], vec![vec![0.8, 0.7]]).is_err());
        assert!(ControlSignal::new(vec![0.0, 0.0], vec![vec![1.0]]).is_err());
        assert!(ControlSignal::new(vec![0.0, 1.0, 2.0], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn grushin_translation() {
        let g = VectorFieldFamily::grushin();
        let s = ControlSignal::constant(vec![1.0, 0.0], 1.0).unwrap();
        let tr = integrate_trajectory(&g, &[0.0, 0.0], &s, 1.0, 0.01).unwrap();
        assert!(dist(tr.end_state(), &[1.0, 0.0]) < 1e-12);
        assert!(tr.exited.is_none());
    }

    #[test]
    fn zero_control_is_stationary() {
        let h = VectorFieldFamily::heisenberg();
        let s = ControlSignal::constant(vec![0.0, 0.0], 2.0).unwrap();
        let tr = integrate_trajectory(&h, &[0.1, 0.2, 0.3], &s, 2.0, 0.1).unwrap();
        assert!(tr.states.iter().all(|y| y == &vec![0.1, 0.2, 0.3]));
    }

    #[test]
    fn heisenberg_loop_and_reversal() {
        let h = VectorFieldFamily::heisenberg();
        let s = 0.1;
        let sig = square_loop(s);
        let tr = integrate_trajectory(&h, &[0.0; 3], &sig, sig.end(), 0.01).unwrap();
        let end = tr.end_state();
        assert!(dist(end, &[0.0, 0.0, -4.0 * s * s]) < 1e-12);
        let back = integrate_trajectory(&h, end, &sig.reversed(), sig.end(), 0.01).unwrap();
        assert!(dist(back.end_state(), &[0.0; 3]) < 1e-12);
    }

    #[test]
    fn exit_is_recorded() {
        let e = VectorFieldFamily::euclidean(2).with_domain(DomainBox::cube(2, 1.0)).unwrap();
        let s = ControlSignal::constant(vec![1.0, 0.0], 5.0).unwrap();
        let tr = integrate_trajectory(&e, &[0.0, 0.0], &s, 5.0, 0.1).unwrap();
        let t = tr.exited.unwrap();
        assert!((t - 1.1).abs() < 1e-9);
    }

    #[test]
    fn euclidean_fills_box() {
        let e = VectorFieldFamily::euclidean(2);
        let region = DomainBox::cube(2, 1.0);
        let params = ReachParams {
            grid_res: vec![16],
            horizon: 2.0 * region.diameter(),
            ..ReachParams::default()
        };
        let set = reachable_set(&e, &[0.3, -0.2], &region, &params).unwrap();
        assert_eq!(set.occupied_fraction(), 1.0);
        assert!(set.to_text().contains("---"));
    }

    #[test]
    fn single_field_stays_on_segment() {
        let f = VectorFieldFamily::euclidean(2).subfamily(&[0]).unwrap();
        let region = DomainBox::cube(2, 1.0);
        let params = ReachParams {
            grid_res: vec![20],
            horizon: 10.0,
            ..ReachParams::default()
        };
        let set = reachable_set(&f, &[0.0, 0.05], &region, &params).unwrap();
        assert_eq!(set.occupied_count(), 20);
    }

    #[test]
    fn monotone_in_horizon() {
        let g = VectorFieldFamily::grushin();
        let region = DomainBox::cube(2, 1.0);
        let mk = |t| ReachParams {
            grid_res: vec![24],
            horizon: t,
            ..ReachParams::default()
        };
        let a = reachable_set(&g, &[0.0, 0.0], &region, &mk(0.8)).unwrap();
        let b = reachable_set(&g, &[0.0, 0.0], &region, &mk(1.6)).unwrap();
        assert!(a.occupancy.iter().zip(&b.occupancy).all(|(x, y)| !*x || *y));
        assert!(b.occupied_count() > a.occupied_count());
        for c in 0..a.arrival.len() {
            if a.occupancy[c] {
                assert_eq!(a.arrival[c], b.arrival[c]);
            }
        }
    }

    #[test]
    fn rejects_coarse_dt() {
        let e = VectorFieldFamily::euclidean(2);
        let params = ReachParams {
            grid_res: vec![10],
            dt: Some(0.5),
            ..ReachParams::default()
        };
        assert!(reachable_set(&e, &[0.0, 0.0], &DomainBox::cube(2, 1.0), &params).is_err());
    }

    #[test]
    fn euclidean_btc() {
        let e = VectorFieldFamily::euclidean(2);
        let region = DomainBox::cube(2, 1.5);
        let params = ReachParams {
            grid_res: vec![30],
            ..ReachParams::default()
        };
        let r = btc_connect(&e, &[0.0, 0.0], &[1.0, 1.0], &region, 5.0, None, &params).unwrap();
        assert!(r.success, "{}", r.message);
        assert!(r.time.unwrap() <= 2.0 + r.tol);
    }
}
