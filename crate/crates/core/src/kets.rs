//! Error kets `(Â_n − a⁰_n)⋯(Â_1 − a⁰_1)|ψ⟩` on grid states, their norms and
//! the spreads they induce.
//!
//! Momentum factors are applied spectrally: the axis is transformed to the
//! momentum representation, multiplied by `(p − center)` and transformed back.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::{ClassicalData, SequenceSpec};
use crate::error::{Error, Result};
use crate::grid::GridState;

/// Unnormalized state produced by applying error factors.
#[derive(Debug, Clone)]
pub struct ErrorKet {
    /// Amplitudes in the representation layout of the originating state.
    pub state: GridState,
    /// Variables in the order they were applied.
    pub sequence: Vec<usize>,
    pub centers: Vec<f64>,
}

impl ErrorKet {
    /// The identity ket: no factors applied.
    pub fn identity(state: &GridState) -> Self {
        Self { state: state.clone(), sequence: Vec::new(), centers: Vec::new() }
    }

    pub fn norm_sq(&self) -> f64 {
        self.state.norm_sq()
    }

    pub fn inner(&self, other: &ErrorKet) -> Result<Complex64> {
        self.state.inner(&other.state)
    }

    /// Applies one more factor `(â − center)`.
    pub fn then(mut self, variable: usize, center: f64) -> Result<Self> {
        multiply_factor(&mut self.state, variable, 1.0, center)?;
        self.sequence.push(variable);
        self.centers.push(center);
        Ok(self)
    }
}

/// In place `ψ ← (c·â − center) ψ`, leaving the representation unchanged.
pub(crate) fn multiply_factor(state: &mut GridState, variable: usize, scale: f64, center: f64) -> Result<()> {
    let (axis, rep) = state.locate(variable)?;
    let original = state.reps[axis];
    state.set_rep(axis, rep);
    let coords = state.axis_coords(axis);
    let shape = state.shape();
    if shape.len() == 1 {
        for (c, x) in state.amps.iter_mut().zip(&coords) {
            *c *= scale * x - center;
        }
    } else {
        let cols = shape[1];
        for (idx, c) in state.amps.iter_mut().enumerate() {
            let k = if axis == 0 { idx / cols } else { idx % cols };
            *c *= scale * coords[k] - center;
        }
    }
    if original != rep {
        state.set_rep(axis, original);
    }
    Ok(())
}

/// First-order error ket `(â − center)|ψ⟩`.
pub fn apply_error_factor(state: &GridState, variable: usize, center: f64) -> Result<ErrorKet> {
    ErrorKet::identity(state).then(variable, center)
}

/// Applies a linear combination `Σ cᵢ âᵢ − center` in one step.
pub fn apply_linear_factor(state: &GridState, terms: &[(usize, f64)], center: f64) -> Result<GridState> {
    let mut acc: Option<GridState> = None;
    for &(v, c) in terms {
        let mut s = state.clone();
        multiply_factor(&mut s, v, c, 0.0)?;
        acc = Some(match acc {
            None => s,
            Some(mut a) => {
                a.amps.iter_mut().zip(&s.amps).for_each(|(x, y)| *x += y);
                a
            }
        });
    }
    let mut out = acc.ok_or_else(|| Error::invalid("linear factor needs at least one term"))?;
    out.amps.iter_mut().zip(&state.amps).for_each(|(x, y)| *x -= y * center);
    Ok(out)
}

/// Mixed error ket for an ordered list of variables; the first listed factor
/// is applied first. Centers come from the classical values.
pub fn mixed_error_ket_ordered(state: &GridState, order: &[usize], data: &ClassicalData) -> Result<ErrorKet> {
    if order.is_empty() {
        return Err(Error::invalid("sequence must be non-empty"));
    }
    if data.dim() != 2 * state.degrees() {
        return Err(Error::invalid(format!(
            "classical data has {} variables but the state has {} degrees of freedom",
            data.dim(),
            state.degrees()
        )));
    }
    order
        .iter()
        .try_fold(ErrorKet::identity(state), |ket, &v| ket.then(v, data.values()[v]))
}

/// Mixed error ket for a canonical (sorted) sequence.
pub fn mixed_error_ket(state: &GridState, sequence: &SequenceSpec, data: &ClassicalData) -> Result<ErrorKet> {
    mixed_error_ket_ordered(state, sequence.indices(), data)
}

pub fn error_ket_norm_sq(ket: &ErrorKet) -> f64 {
    ket.norm_sq()
}

/// `Δₙ = (⟨Eⁿ|Eⁿ⟩ / (1 − p))^{1/2n}`.
pub fn nth_order_spread(norm_sq: f64, n: u32, p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("probability must satisfy 0 <= p < 1, got {p}")));
    }
    if n < 1 {
        return Err(Error::invalid("spread order must be at least 1"));
    }
    if !(norm_sq >= 0.0) {
        return Err(Error::invalid(format!("norm squared must be non-negative, got {norm_sq}")));
    }
    Ok((norm_sq / (1.0 - p)).powf(1.0 / (2.0 * f64::from(n))))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpreadGuarantee {
    pub spread: f64,
    pub probability: f64,
    pub holds: bool,
}

/// Computes `Δₙ` from the `2n`-th moment and verifies that the interval
/// `[center ± Δₙ]` holds probability at least `p`.
pub fn spread_probability_guarantee_check(
    state: &GridState,
    variable: usize,
    center: f64,
    n: u32,
    p: f64,
) -> Result<SpreadGuarantee> {
    let moment = state.quadrature_moment(variable, center, 2 * n)?.value;
    let spread = nth_order_spread(moment, n, p)?;
    let probability = state
        .interval_probability(variable, center - spread, center + spread)?
        .value;
    // The closed cell at exactly ±Δ carries the boundary mass Chebyshev counts
    // inside, so allow rounding-level slack.
    Ok(SpreadGuarantee { spread, probability, holds: probability >= p - 1e-12 })
}
