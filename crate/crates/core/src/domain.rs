//! Spatial discretization of the truncated line, gauge-normalized potentials
//! and thick control sets.
//!
//! The grid stores interior Dirichlet nodes only: node `j` sits at
//! `x_min + (j + 1) h` with `h = (x_max - x_min) / (n + 1)`. All L² norms use
//! the weight `h`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, LabError, Result};

pub const MIN_NODES: usize = 16;

/// Margins this close to zero are reported as exactly zero.
const THICK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct GridSpec {
    x_min: f64,
    x_max: f64,
    n: usize,
}

/// Uniform mesh of interior nodes on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
    h: f64,
}

impl TryFrom<GridSpec> for Grid {
    type Error = LabError;

    fn try_from(s: GridSpec) -> Result<Self> {
        make_grid(s.x_min, s.x_max, s.n)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            x_min: g.x_min,
            x_max: g.x_max,
            n: g.n,
        }
    }
}

pub fn make_grid(x_min: f64, x_max: f64, n: usize) -> Result<Grid> {
    if !x_min.is_finite() || !x_max.is_finite() {
        return param(format!("grid bounds must be finite, got [{x_min}, {x_max}]"));
    }
    if x_min >= x_max {
        return param(format!("grid needs x_min < x_max, got [{x_min}, {x_max}]"));
    }
    if n < MIN_NODES {
        return param(format!("grid needs at least {MIN_NODES} interior nodes, got {n}"));
    }
    let h = (x_max - x_min) / (n as f64 + 1.0);
    Ok(Grid { x_min, x_max, n, h })
}

impl Grid {
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn node(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 1.0) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Same box with twice as many cells (`2(n + 1) - 1` interior nodes).
    pub fn refined(&self) -> Grid {
        Grid {
            n: 2 * (self.n + 1) - 1,
            h: self.h / 2.0,
            ..*self
        }
    }
}

/// Potential samples on the grid nodes with `V >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    samples: Vec<f64>,
    inf_val: f64,
    sup_val: f64,
    theta: f64,
}

/// Shifts raw samples by `theta`; the result must satisfy `V >= 1`.
pub fn gauge_shift(v_raw: &[f64], theta: f64) -> Result<Potential> {
    if v_raw.is_empty() {
        return param("potential has no samples");
    }
    if !theta.is_finite() || v_raw.iter().any(|v| !v.is_finite()) {
        return param("potential samples and gauge shift must be finite");
    }
    let samples: Vec<f64> = v_raw.iter().map(|v| v + theta).collect();
    let inf_val = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let sup_val = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // A grid node placed on an extremum may miss it by a rounding error.
    if inf_val < 1.0 - 1e-12 {
        return param(format!(
            "gauge shift {theta} leaves min V = {inf_val} < 1; need theta >= {}",
            theta + 1.0 - inf_val
        ));
    }
    Ok(Potential {
        samples,
        inf_val,
        sup_val,
        theta,
    })
}

impl Potential {
    /// Samples `v` on the grid and applies the smallest shift giving `V >= 1`
    /// (no shift when the raw potential is already above 1).
    pub fn normalized(grid: &Grid, v: impl Fn(f64) -> f64) -> Result<Potential> {
        let raw: Vec<f64> = grid.nodes().into_iter().map(v).collect();
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        gauge_shift(&raw, (1.0 - min).max(0.0))
    }

    pub fn constant(grid: &Grid, value: f64) -> Result<Potential> {
        gauge_shift(&vec![value; grid.n()], 0.0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn inf_val(&self) -> f64 {
        self.inf_val
    }

    pub fn sup_val(&self) -> f64 {
        self.sup_val
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same samples shifted by a further `dtheta` (gauge transformation).
    pub fn shifted(&self, dtheta: f64) -> Result<Potential> {
        let raw: Vec<f64> = self.samples.iter().map(|v| v - self.theta).collect();
        gauge_shift(&raw, self.theta + dtheta)
    }
}

/// Raw samples of a smooth random potential
/// `amplitude Σ_j a_j sin(2πj (x - x_min)/len + p_j)` with `Σ|a_j| = 1`.
pub fn random_potential_samples(grid: &Grid, amplitude: f64, modes: usize, seed: u64) -> Result<Vec<f64>> {
    if modes == 0 || !amplitude.is_finite() {
        return param("random potential needs at least one mode and a finite amplitude");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<(f64, f64)> = (0..modes)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let total: f64 = terms.iter().map(|t| t.0.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let k = std::f64::consts::TAU / grid.length();
    Ok(grid
        .nodes()
        .into_iter()
        .map(|x| {
            let s: f64 = terms
                .iter()
                .enumerate()
                .map(|(j, (a, p))| a * (k * (j + 1) as f64 * (x - grid.x_min()) + p).sin())
                .sum();
            amplitude * s / total
        })
        .collect())
}

/// A finite union of disjoint intervals carrying an `(L, zeta)`-thickness
/// certificate on the grid box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThickSet {
    pub intervals: Vec<[f64; 2]>,
    #[serde(rename = "L")]
    pub l: f64,
    pub zeta: f64,
    pub margin: f64,
    pub worst_window: f64,
}

impl ThickSet {
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|[a, b]| b - a).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<ThickSet> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Measure of the union of `intervals` inside `[x, x + l]`.
pub fn window_measure(intervals: &[[f64; 2]], x: f64, l: f64) -> f64 {
    let end = x + l;
    intervals.iter().map(|&[a, b]| (b.min(end) - a.max(x)).max(0.0)).sum()
}

fn validate_intervals(intervals: &[[f64; 2]], grid: &Grid) -> Result<()> {
    let slack = 1e-12 * grid.length();
    for (i, &[a, b]) in intervals.iter().enumerate() {
        if !a.is_finite() || !b.is_finite() {
            return Err(LabError::Structural(format!("interval {i} has non-finite endpoints")));
        }
        if a >= b {
            return Err(LabError::Structural(format!(
                "interval {i} = [{a}, {b}] is empty or reversed"
            )));
        }
        if a < grid.x_min() - slack || b > grid.x_max() + slack {
            return Err(LabError::Structural(format!(
                "interval {i} = [{a}, {b}] leaves the box [{}, {}]",
                grid.x_min(),
                grid.x_max()
            )));
        }
    }
    for (i, w) in intervals.windows(2).enumerate() {
        if w[0][1] > w[1][0] {
            return Err(LabError::Structural(format!(
                "intervals {i} and {} overlap or are unsorted",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Exact thickness check over all windows `[x, x + L]` inside the box.
///
/// `x -> |Omega ∩ [x, x + L]|` is piecewise linear with breakpoints where a
/// window edge meets an interval endpoint, so the minimum sits at one of the
/// finitely many candidates `a_i, b_i, a_i - L, b_i - L` or at the box ends.
pub fn check_thick(intervals: &[[f64; 2]], l: f64, zeta: f64, grid: &Grid) -> Result<ThickSet> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return param(format!("density zeta must lie in (0, 1), got {zeta}"));
    }
    if !(l > 0.0 && l <= grid.length() * (1.0 + 1e-12)) {
        return param(format!("window length L must lie in (0, {}], got {l}", grid.length()));
    }
    validate_intervals(intervals, grid)?;

    let lo = grid.x_min();
    let hi = (grid.x_max() - l).max(lo);
    let mut candidates = vec![lo, hi];
    for &[a, b] in intervals {
        candidates.extend([a, b, a - l, b - l]);
    }

    let required = zeta * l;
    let mut worst = (f64::INFINITY, lo);
    for x in candidates {
        let x = x.clamp(lo, hi);
        let m = window_measure(intervals, x, l) - required;
        if m < worst.0 {
            worst = (m, x);
        }
    }
    let (mut margin, worst_window) = worst;
    if margin.abs() <= THICK_TOL * l.max(1.0) {
        margin = 0.0;
    }
    if margin < 0.0 {
        return Err(LabError::ThicknessViolation {
            l,
            zeta,
            window_start: worst_window,
            window_end: worst_window + l,
            measure: margin + required,
            required,
        });
    }
    Ok(ThickSet {
        intervals: intervals.to_vec(),
        l,
        zeta,
        margin,
        worst_window,
    })
}

/// `[x_min + k p, x_min + k p + fill]` for every period start inside the box;
/// `(period, fill / period)`-thick by construction.
pub fn gen_periodic_thickset(period: f64, fill: f64, grid: &Grid) -> Result<ThickSet> {
    if !(fill > 0.0 && fill < period) {
        return param(format!("need 0 < fill < period, got fill = {fill}, period = {period}"));
    }
    if period > grid.length() {
        return param(format!("period {period} exceeds the box length {}", grid.length()));
    }
    let eps = 1e-12 * grid.length();
    let mut intervals = Vec::new();
    let mut k = 0usize;
    loop {
        let a = grid.x_min() + k as f64 * period;
        if a >= grid.x_max() - eps {
            break;
        }
        let b = (a + fill).min(grid.x_max());
        intervals.push([a, b]);
        k += 1;
    }
    check_thick(&intervals, period, fill / period, grid)
}

/// Random `(L, zeta)`-thick set.
///
/// The box is tiled by `K` equal cells of width `c <= L / m`; each cell holds
/// one randomly placed interval of length `zeta L / q` (plus, for half of the
/// cells, some extra mass), where `q = floor(L / c) - 1` is the number of
/// complete cells every window of length `L` is guaranteed to contain.
pub fn gen_random_thickset(l: f64, zeta: f64, seed: u64, grid: &Grid) -> Result<ThickSet> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return param(format!("density zeta must lie in (0, 1), got {zeta}"));
    }
    if !(l > 0.0 && l <= grid.length()) {
        return param(format!("window length must lie in (0, {}], got {l}", grid.length()));
    }
    let len = grid.length();
    let mut layout = None;
    for m in 2..100_000usize {
        let cells = (len * m as f64 / l - 1e-9).ceil().max(1.0) as usize;
        let c = len / cells as f64;
        let q = (l / c + 1e-9).floor() as i64 - 1;
        if q < 1 {
            continue;
        }
        let piece = zeta * l / q as f64;
        if piece < c * (1.0 - 1e-9) {
            layout = Some((cells, c, piece));
            break;
        }
    }
    let (cells, c, piece) =
        layout.ok_or_else(|| LabError::Parameter(format!("no cell layout found for zeta = {zeta}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut intervals = Vec::with_capacity(cells);
    for k in 0..cells {
        let start = grid.x_min() + k as f64 * c;
        let end = if k + 1 == cells {
            grid.x_max()
        } else {
            grid.x_min() + (k + 1) as f64 * c
        };
        let room = (end - start - piece).max(0.0);
        let extra = if rng.random_bool(0.5) {
            rng.random::<f64>() * 0.5 * room
        } else {
            0.0
        };
        let width = piece + extra;
        let a = start + rng.random::<f64>() * (end - start - width).max(0.0);
        intervals.push([a, (a + width).min(end)]);
    }
    check_thick(&intervals, l, zeta, grid)
}

/// Discrete indicator of a control set on the grid nodes.
///
/// Node `x_j` belongs to the mask when `a <= x_j < b` for some interval
/// (half-open, with a rounding allowance of `1e-9 h`).
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    nodes: Vec<bool>,
    h: f64,
}

pub fn mask(omega: &ThickSet, grid: &Grid) -> Mask {
    Mask::from_intervals(&omega.intervals, grid)
}

impl Mask {
    pub fn from_intervals(intervals: &[[f64; 2]], grid: &Grid) -> Mask {
        let eps = 1e-9 * grid.h();
        let xs = grid.nodes();
        let mut nodes = vec![false; grid.n()];
        for &[a, b] in intervals {
            let mut hit = false;
            for (j, &x) in xs.iter().enumerate() {
                if x >= a - eps && x < b - eps {
                    nodes[j] = true;
                    hit = true;
                }
            }
            if !hit {
                log::warn!("interval [{a}, {b}] contains no grid node (h = {})", grid.h());
            }
        }
        Mask { nodes, h: grid.h() }
    }

    pub fn full(grid: &Grid) -> Mask {
        Mask {
            nodes: vec![true; grid.n()],
            h: grid.h(),
        }
    }

    pub fn from_nodes(nodes: Vec<bool>, grid: &Grid) -> Result<Mask> {
        if nodes.len() != grid.n() {
            return param(format!("mask has {} entries for {} nodes", nodes.len(), grid.n()));
        }
        Ok(Mask { nodes, h: grid.h() })
    }

    pub fn nodes(&self) -> &[bool] {
        &self.nodes
    }

    pub fn count(&self) -> usize {
        self.nodes.iter().filter(|&&m| m).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn is_full(&self) -> bool {
        self.nodes.iter().all(|&m| m)
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&j| self.nodes[j]).collect()
    }

    pub fn contains(&self, other: &Mask) -> bool {
        self.nodes.len() == other.nodes.len() && self.nodes.iter().zip(&other.nodes).all(|(&a, &b)| a || !b)
    }
}
