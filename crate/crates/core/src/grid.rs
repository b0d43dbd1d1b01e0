//! Wave functions sampled on uniform tensor grids.
//!
//! Amplitudes are stored as discrete coefficients with `Σ|c|² = 1`, so the
//! probability carried by a grid cell is `|c|²` in either representation.
//! Axis `i` carries degree of freedom `i`: position variable `i` and momentum
//! variable `i + N`. Momentum amplitudes are kept in FFT order.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::VariableKind;

/// Required clearance around a Gaussian, in widths.
pub const COVERAGE_WIDTHS: f64 = 8.0;
/// Fraction of cells at each grid end treated as the boundary band.
const BOUNDARY_BAND: usize = 64;
/// Boundary mass above which quadrature is flagged as inaccurate.
pub const BOUNDARY_MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rep {
    Position,
    Momentum,
}

impl From<VariableKind> for Rep {
    fn from(k: VariableKind) -> Self {
        match k {
            VariableKind::Position => Rep::Position,
            VariableKind::Momentum => Rep::Momentum,
        }
    }
}

/// Periodic grid `x_j = lower + j·dx`, `j < points`, `dx = (upper − lower)/points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    /// Position variable index (equal to the degree of freedom).
    pub variable: usize,
    pub points: usize,
    pub lower: f64,
    pub upper: f64,
}

impl GridAxis {
    pub fn new(variable: usize, points: usize, lower: f64, upper: f64) -> Result<Self> {
        if points < 64 || !points.is_power_of_two() {
            return Err(Error::config(format!("grid points must be a power of two >= 64, got {points}")));
        }
        if !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::config(format!("grid bounds need upper > lower, got [{lower}, {upper}]")));
        }
        Ok(Self { variable, points, lower, upper })
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / self.points as f64
    }

    pub fn position(&self, j: usize) -> f64 {
        self.lower + j as f64 * self.spacing()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.position(j)).collect()
    }

    pub fn momentum_spacing(&self, hbar: f64) -> f64 {
        2.0 * PI * hbar / (self.upper - self.lower)
    }

    /// Signed frequency index of FFT slot `k`.
    fn frequency(&self, k: usize) -> f64 {
        if k < self.points / 2 {
            k as f64
        } else {
            k as f64 - self.points as f64
        }
    }

    /// Momentum of FFT slot `k`.
    pub fn momentum(&self, k: usize, hbar: f64) -> f64 {
        self.frequency(k) * self.momentum_spacing(hbar)
    }

    pub fn momenta(&self, hbar: f64) -> Vec<f64> {
        (0..self.points).map(|k| self.momentum(k, hbar)).collect()
    }

    /// Span covered by the grid cells in a representation.
    pub fn extent(&self, rep: Rep, hbar: f64) -> (f64, f64) {
        match rep {
            Rep::Position => {
                let dx = self.spacing();
                (self.lower - 0.5 * dx, self.upper - 0.5 * dx)
            }
            Rep::Momentum => {
                let dp = self.momentum_spacing(hbar);
                let half = (self.points / 2) as f64;
                (-(half + 0.5) * dp, (half - 0.5) * dp)
            }
        }
    }

    pub fn cell_width(&self, rep: Rep, hbar: f64) -> f64 {
        match rep {
            Rep::Position => self.spacing(),
            Rep::Momentum => self.momentum_spacing(hbar),
        }
    }
}

/// Unitary 1-D transforms along one axis of a tensor grid.
#[derive(Clone)]
pub(crate) struct AxisFft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `e^{−i p_k x₀/ℏ}` so momentum amplitudes match the continuous transform.
    phase: Vec<Complex64>,
    scale: f64,
}

impl AxisFft {
    pub(crate) fn new(axis: &GridAxis, hbar: f64) -> Self {
        let mut planner = FftPlanner::new();
        let phase = (0..axis.points)
            .map(|k| Complex64::from_polar(1.0, -axis.momentum(k, hbar) * axis.lower / hbar))
            .collect();
        Self {
            forward: planner.plan_fft_forward(axis.points),
            inverse: planner.plan_fft_inverse(axis.points),
            phase,
            scale: 1.0 / (axis.points as f64).sqrt(),
        }
    }

    fn lane(&self, lane: &mut [Complex64], scratch: &mut [Complex64], target: Rep) {
        match target {
            Rep::Momentum => {
                self.forward.process_with_scratch(lane, scratch);
                for (c, ph) in lane.iter_mut().zip(&self.phase) {
                    *c *= ph * self.scale;
                }
            }
            Rep::Position => {
                for (c, ph) in lane.iter_mut().zip(&self.phase) {
                    *c *= ph.conj() * self.scale;
                }
                self.inverse.process_with_scratch(lane, scratch);
            }
        }
    }

    /// Transforms every lane along `axis` of a row-major array of `shape`.
    pub(crate) fn apply(&self, amps: &mut [Complex64], shape: &[usize], axis: usize, target: Rep) {
        let n = shape[axis];
        let scratch_len = self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len());
        if axis + 1 == shape.len() {
            amps.par_chunks_mut(n).for_each_init(
                || vec![Complex64::new(0.0, 0.0); scratch_len],
                |scratch, lane| self.lane(lane, scratch, target),
            );
        } else {
            // Two-axis grids only: transform columns through a transpose.
            let (rows, cols) = (shape[0], shape[1]);
            let mut t = transpose(amps, rows, cols);
            t.par_chunks_mut(rows).for_each_init(
                || vec![Complex64::new(0.0, 0.0); scratch_len],
                |scratch, lane| self.lane(lane, scratch, target),
            );
            amps.copy_from_slice(&transpose(&t, cols, rows));
        }
    }
}

fn transpose(a: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len()];
    out.par_chunks_mut(rows).enumerate().for_each(|(c, col)| {
        for (r, o) in col.iter_mut().enumerate() {
            *o = a[r * cols + c];
        }
    });
    out
}

/// One-dimensional probability distribution of a canonical variable,
/// cells sorted by coordinate.
#[derive(Debug, Clone)]
pub struct Marginal {
    pub coords: Vec<f64>,
    pub mass: Vec<f64>,
    pub cell_width: f64,
    pub extent: (f64, f64),
}

impl Marginal {
    /// Mass inside `[lo, hi]` with boundary cells weighted by their overlap.
    pub fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        let h = 0.5 * self.cell_width;
        let start = self.coords.partition_point(|&c| c + h <= lo);
        let mut total = 0.0;
        for (c, m) in self.coords[start..].iter().zip(&self.mass[start..]) {
            let a = (c - h).max(lo);
            let b = (c + h).min(hi);
            if c - h >= hi {
                break;
            }
            if b > a {
                total += m * (b - a) / self.cell_width;
            }
        }
        total
    }

    pub fn moment(&self, center: f64, power: i32) -> f64 {
        self.coords
            .iter()
            .zip(&self.mass)
            .map(|(c, m)| (c - center).powi(power) * m)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(0.0, 1) / self.total()
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass in the outer `1/64` of the cells at each end.
    pub fn boundary_mass(&self) -> f64 {
        let band = (self.mass.len() / BOUNDARY_BAND).max(1);
        let n = self.mass.len();
        self.mass[..band].iter().chain(&self.mass[n - band..]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalProbability {
    pub value: f64,
    /// `hi <= lo`; the value is 0.
    pub empty: bool,
    /// The interval reaches beyond the grid and was clipped.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub boundary_mass: f64,
}

impl MomentEstimate {
    pub fn is_accurate(&self) -> bool {
        self.boundary_mass <= BOUNDARY_MASS_TOL
    }
}

/// Complex amplitudes over a 1- or 2-axis tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub(crate) axes: Vec<GridAxis>,
    pub(crate) amps: Vec<Complex64>,
    pub(crate) reps: Vec<Rep>,
    pub(crate) hbar: f64,
}

impl GridState {
    /// Wraps raw amplitudes (row-major, axis 0 slowest). Does not normalize.
    pub fn from_amplitudes(axes: Vec<GridAxis>, amps: Vec<Complex64>, reps: Vec<Rep>, hbar: f64) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::invalid(format!("grid states support 1 or 2 axes, got {}", axes.len())));
        }
        if reps.len() != axes.len() {
            return Err(Error::invalid("one representation tag per axis is required"));
        }
        if let Some((i, a)) = axes.iter().enumerate().find(|(i, a)| a.variable != *i) {
            return Err(Error::invalid(format!("axis {i} must carry position variable {i}, got {}", a.variable)));
        }
        let len: usize = axes.iter().map(|a| a.points).product();
        if amps.len() != len {
            return Err(Error::invalid(format!("expected {len} amplitudes, got {}", amps.len())));
        }
        if !(hbar > 0.0) {
            return Err(Error::config(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { axes, amps, reps, hbar })
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn reps(&self) -> &[Rep] {
        &self.reps
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn degrees(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sq().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite state"));
        }
        let s = 1.0 / n;
        self.amps.iter_mut().for_each(|c| *c *= s);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// `⟨self|other⟩`, both in the same representation layout.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        let other = other.in_reps(&self.reps);
        if self.axes != other.axes {
            return Err(Error::invalid("inner product of states on different grids"));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `self ← self + c·other`.
    pub fn add_scaled(&mut self, other: &Self, c: Complex64) -> Result<()> {
        let other = other.in_reps(&self.reps);
        if self.axes != other.axes {
            return Err(Error::invalid("cannot combine states on different grids"));
        }
        self.amps.iter_mut().zip(&other.amps).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    pub fn scale(&mut self, c: Complex64) {
        self.amps.iter_mut().for_each(|a| *a *= c);
    }

    /// Axis and representation that diagonalize a canonical variable.
    pub fn locate(&self, variable: usize) -> Result<(usize, Rep)> {
        let n = self.degrees();
        match variable {
            v if v < n => Ok((v, Rep::Position)),
            v if v < 2 * n => Ok((v - n, Rep::Momentum)),
            v => Err(Error::invalid(format!("variable {v} is outside a {}-variable phase space", 2 * n))),
        }
    }

    pub fn set_rep(&mut self, axis: usize, target: Rep) {
        if self.reps[axis] == target {
            return;
        }
        let fft = AxisFft::new(&self.axes[axis], self.hbar);
        let shape = self.shape();
        fft.apply(&mut self.amps, &shape, axis, target);
        self.reps[axis] = target;
    }

    /// Copy with `axis` transformed to `target` (unitary DFT).
    pub fn to_rep(&self, axis: usize, target: Rep) -> Self {
        let mut s = self.clone();
        s.set_rep(axis, target);
        s
    }

    /// Copy in the given per-axis representations.
    pub fn in_reps(&self, reps: &[Rep]) -> Self {
        let mut s = self.clone();
        for (a, &r) in reps.iter().enumerate() {
            s.set_rep(a, r);
        }
        s
    }

    /// Copy with every axis in position representation.
    pub fn in_position(&self) -> Self {
        self.in_reps(&vec![Rep::Position; self.degrees()])
    }

    /// Coordinates of the cells of `axis` in its current representation
    /// (FFT order for momentum).
    pub(crate) fn axis_coords(&self, axis: usize) -> Vec<f64> {
        match self.reps[axis] {
            Rep::Position => self.axes[axis].positions(),
            Rep::Momentum => self.axes[axis].momenta(self.hbar),
        }
    }

    /// Distribution of `variable`, marginalized over the other axes.
    pub fn marginal(&self, variable: usize) -> Result<Marginal> {
        let (axis, rep) = self.locate(variable)?;
        let converted;
        let state = if self.reps[axis] == rep {
            self
        } else {
            converted = self.to_rep(axis, rep);
            &converted
        };
        let shape = state.shape();
        let n = shape[axis];
        let mut mass = vec![0.0; n];
        if shape.len() == 1 {
            for (m, c) in mass.iter_mut().zip(&state.amps) {
                *m = c.norm_sqr();
            }
        } else {
            let cols = shape[1];
            for (idx, c) in state.amps.iter().enumerate() {
                let k = if axis == 0 { idx / cols } else { idx % cols };
                mass[k] += c.norm_sqr();
            }
        }
        let g = &state.axes[axis];
        let mut coords = state.axis_coords(axis);
        if rep == Rep::Momentum {
            // FFT order -> ascending
            let half = n / 2;
            coords.rotate_left(half);
            mass.rotate_left(half);
        }
        Ok(Marginal { coords, mass, cell_width: g.cell_width(rep, self.hbar), extent: g.extent(rep, self.hbar) })
    }

    /// Probability that a measurement of `variable` lands in `[lo, hi]`.
    pub fn interval_probability(&self, variable: usize, lo: f64, hi: f64) -> Result<IntervalProbability> {
        if !(hi > lo) {
            return Ok(IntervalProbability { value: 0.0, empty: true, clamped: false });
        }
        let m = self.marginal(variable)?;
        let clamped = lo < m.extent.0 || hi > m.extent.1;
        Ok(IntervalProbability { value: m.interval_mass(lo, hi), empty: false, clamped })
    }

    /// `∫ (x − center)^order |ψ(x)|² dx` in the representation of `variable`.
    pub fn quadrature_moment(&self, variable: usize, center: f64, order: u32) -> Result<MomentEstimate> {
        if order < 2 || order % 2 != 0 {
            return Err(Error::invalid(format!("moment order must be even and >= 2, got {order}")));
        }
        let m = self.marginal(variable)?;
        Ok(MomentEstimate { value: m.moment(center, order as i32), boundary_mass: m.boundary_mass() })
    }

    pub fn mean(&self, variable: usize) -> Result<f64> {
        Ok(self.marginal(variable)?.mean())
    }

    pub fn variance(&self, variable: usize) -> Result<f64> {
        let m = self.marginal(variable)?;
        let mu = m.mean();
        Ok(m.moment(mu, 2) / m.total())
    }

    /// Checks that `[lo, hi]` lies inside the grid extent for `variable`.
    pub fn check_covers(&self, variable: usize, lo: f64, hi: f64) -> Result<()> {
        let (axis, rep) = self.locate(variable)?;
        let (a, b) = self.axes[axis].extent(rep, self.hbar);
        if lo < a || hi > b {
            return Err(Error::coverage(format!(
                "interval [{lo:.6}, {hi:.6}] for variable {variable} exceeds the grid extent [{a:.6}, {b:.6}]"
            )));
        }
        Ok(())
    }

    /// Tensor product of single-axis states. The result is in position
    /// representation on every axis.
    pub fn product(factors: &[GridState]) -> Result<Self> {
        if factors.is_empty() || factors.len() > 2 {
            return Err(Error::invalid("product states need 1 or 2 single-axis factors"));
        }
        let hbar = factors[0].hbar;
        if factors.iter().any(|f| f.degrees() != 1 || f.hbar != hbar) {
            return Err(Error::invalid("product factors must be single-axis states with equal hbar"));
        }
        let parts: Vec<GridState> = factors.iter().map(GridState::in_position).collect();
        let axes: Vec<GridAxis> = parts
            .iter()
            .enumerate()
            .map(|(i, p)| GridAxis { variable: i, ..p.axes[0] })
            .collect();
        let amps = if parts.len() == 1 {
            parts[0].amps.clone()
        } else {
            let mut v = Vec::with_capacity(parts[0].amps.len() * parts[1].amps.len());
            for a in &parts[0].amps {
                v.extend(parts[1].amps.iter().map(|b| a * b));
            }
            v
        };
        let n = axes.len();
        GridState::from_amplitudes(axes, amps, vec![Rep::Position; n], hbar)
    }
}

/// Gaussian packet `∝ exp{−(q−q₀)²/(4Δq²) + i p₀ q/ℏ}`, normalized on the grid.
pub fn make_gaussian(center_q: f64, center_p: f64, width: f64, axis: GridAxis, hbar: f64) -> Result<GridState> {
    if !(width > 0.0) {
        return Err(Error::config(format!("Gaussian width must be positive, got {width}")));
    }
    if !(hbar > 0.0) {
        return Err(Error::config(format!("hbar must be positive, got {hbar}")));
    }
    let (lo, hi) = (axis.lower, axis.upper - axis.spacing());
    let reach = COVERAGE_WIDTHS * width;
    if center_q - reach < lo || center_q + reach > hi {
        return Err(Error::coverage(format!(
            "position grid [{lo}, {hi}] does not cover q0 ± {COVERAGE_WIDTHS}·Δq = [{}, {}]",
            center_q - reach,
            center_q + reach
        )));
    }
    let (plo, phi) = axis.extent(Rep::Momentum, hbar);
    let preach = COVERAGE_WIDTHS * hbar / (2.0 * width);
    if center_p - preach < plo || center_p + preach > phi {
        return Err(Error::coverage(format!(
            "momentum grid [{plo}, {phi}] does not cover p0 ± {COVERAGE_WIDTHS}·ħ/(2Δq) = [{}, {}]",
            center_p - preach,
            center_p + preach
        )));
    }
    let amps = axis
        .positions()
        .into_iter()
        .map(|q| {
            let d = q - center_q;
            Complex64::from_polar((-d * d / (4.0 * width * width)).exp(), center_p * q / hbar)
        })
        .collect();
    let axis = GridAxis { variable: 0, ..axis };
    GridState::from_amplitudes(vec![axis], amps, vec![Rep::Position], hbar)?.normalized()
}

/// Loads whitespace-separated `x re im` rows, interpolates linearly onto the
/// axis (zero outside the tabulated range) and normalizes.
pub fn from_tabulated(text: &str, axis: GridAxis, hbar: f64) -> Result<GridState> {
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("tabulated line {}: {e}", n + 1)))?;
        if vals.len() != 3 {
            return Err(Error::invalid(format!("tabulated line {} needs 3 columns, got {}", n + 1, vals.len())));
        }
        rows.push((vals[0], vals[1], vals[2]));
    }
    if rows.len() < 2 {
        return Err(Error::invalid("tabulated wave function needs at least two rows"));
    }
    if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::invalid("tabulated x values must be strictly increasing"));
    }
    let amps = axis
        .positions()
        .into_iter()
        .map(|x| {
            let i = rows.partition_point(|r| r.0 <= x);
            if i == 0 || i == rows.len() && x > rows[rows.len() - 1].0 {
                return Complex64::new(0.0, 0.0);
            }
            let i = i.min(rows.len() - 1);
            let (x0, r0, i0) = rows[i - 1];
            let (x1, r1, i1) = rows[i];
            let w = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
            Complex64::new(r0 + w * (r1 - r0), i0 + w * (i1 - i0))
        })
        .collect();
    let axis = GridAxis { variable: 0, ..axis };
    GridState::from_amplitudes(vec![axis], amps, vec![Rep::Position], hbar)?.normalized()
}
