//! Split-step spectral propagation of grid states for the builtin systems and
//! verification that the consistency order is preserved along the flow.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{ClassicalData, System};
use crate::error::{Error, Result};
use crate::grid::{AxisFft, GridState, Rep, COVERAGE_WIDTHS};

/// Default number of split steps spanning the verification window.
pub const DEFAULT_WINDOW_STEPS: usize = 2000;
/// Default number of verification samples.
pub const DEFAULT_TIME_SAMPLES: usize = 50;
/// Probability slack tolerated before an interval check fails.
const PROBABILITY_TOL: f64 = 1e-9;

/// Strang splitting `e^{−iVdt/2ℏ} e^{−iTdt/ℏ} e^{−iVdt/2ℏ}` where `V` is
/// diagonal in the held representation and `T` after transforming
/// `kinetic_axis` to momentum.
struct SplitStep {
    held: Vec<Rep>,
    kinetic_axis: usize,
    fft: AxisFft,
    shape: Vec<usize>,
    dt: f64,
    /// `None` when `V ≡ 0`.
    half_v: Option<Vec<Complex64>>,
    full_v: Option<Vec<Complex64>>,
    kinetic: Vec<Complex64>,
}

impl SplitStep {
    fn new(system: &System, state: &GridState, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config(format!("time step must be positive and finite, got {dt}")));
        }
        let hbar = state.hbar();
        let shape = state.shape();
        let phases = |energy: &[f64], scale: f64| -> Vec<Complex64> {
            energy
                .par_iter()
                .map(|e| Complex64::from_polar(1.0, -e * dt * scale / hbar))
                .collect()
        };
        let (held, kinetic_axis, potential, kinetic_energy): (Vec<Rep>, usize, Option<Vec<f64>>, Vec<f64>) = match *system {
            System::HarmonicOscillator { mass, omega } => {
                Self::require_axes(system, state, 1)?;
                let ax = &state.axes()[0];
                let v = ax.positions().iter().map(|x| 0.5 * mass * omega * omega * x * x).collect();
                let t = ax.momenta(hbar).iter().map(|p| p * p / (2.0 * mass)).collect();
                (vec![Rep::Position], 0, Some(v), t)
            }
            System::FreeParticle { mass } => {
                Self::require_axes(system, state, 1)?;
                let t = state.axes()[0].momenta(hbar).iter().map(|p| p * p / (2.0 * mass)).collect();
                (vec![Rep::Position], 0, None, t)
            }
            System::CoupledQp2 { light_mass, heavy_mass, coupling } => {
                Self::require_axes(system, state, 2)?;
                // light axis held in momentum: p²/2m + kQp² is diagonal in (p, Q)
                let light = state.axes()[0].momenta(hbar);
                let heavy_q = state.axes()[1].positions();
                let mut v = Vec::with_capacity(shape[0] * shape[1]);
                for p in &light {
                    v.extend(heavy_q.iter().map(|q| p * p / (2.0 * light_mass) + coupling * q * p * p));
                }
                let t = state.axes()[1].momenta(hbar).iter().map(|p| p * p / (2.0 * heavy_mass)).collect();
                (vec![Rep::Momentum, Rep::Position], 1, Some(v), t)
            }
            System::Polynomial { .. } => {
                return Err(Error::Unsupported("quantum propagation is only available for builtin systems".into()))
            }
        };
        Ok(Self {
            fft: AxisFft::new(&state.axes()[kinetic_axis], hbar),
            held,
            kinetic_axis,
            shape,
            dt,
            half_v: potential.as_ref().map(|v| phases(v, 0.5)),
            full_v: potential.as_ref().map(|v| phases(v, 1.0)),
            kinetic: phases(&kinetic_energy, 1.0),
        })
    }

    fn require_axes(system: &System, state: &GridState, n: usize) -> Result<()> {
        if state.degrees() != n {
            return Err(Error::config(format!(
                "system `{}` needs a {n}-axis grid, got {} axes",
                system.id(),
                state.degrees()
            )));
        }
        Ok(())
    }

    fn multiply(amps: &mut [Complex64], phase: &[Complex64]) {
        amps.par_iter_mut().zip(phase.par_iter()).for_each(|(a, p)| *a *= p);
    }

    fn kinetic_step(&self, state: &mut GridState) {
        let axis = self.kinetic_axis;
        self.fft.apply(&mut state.amps, &self.shape, axis, Rep::Momentum);
        if self.shape.len() == 1 {
            Self::multiply(&mut state.amps, &self.kinetic);
        } else {
            let cols = self.shape[1];
            let k = &self.kinetic;
            // kinetic axis is the last axis, so each row sees the full phase vector
            state.amps.par_chunks_mut(cols).for_each(|row| {
                row.iter_mut().zip(k).for_each(|(a, p)| *a *= p);
            });
        }
        self.fft.apply(&mut state.amps, &self.shape, axis, Rep::Position);
    }

    /// Advances in place by `steps` steps. `state` must be in the held layout.
    fn run(&self, state: &mut GridState, steps: usize) {
        if steps == 0 {
            return;
        }
        if let Some(h) = &self.half_v {
            Self::multiply(&mut state.amps, h);
        }
        for s in 0..steps {
            self.kinetic_step(state);
            match (&self.full_v, &self.half_v) {
                (Some(f), Some(_)) if s + 1 < steps => Self::multiply(&mut state.amps, f),
                (_, Some(h)) => Self::multiply(&mut state.amps, h),
                _ => {}
            }
        }
    }
}

/// Propagates `state` by `steps` Strang steps of size `dt`. The result is in
/// position representation on every axis.
pub fn split_step_evolve(state: &GridState, system: &System, dt: f64, steps: usize) -> Result<GridState> {
    let stepper = SplitStep::new(system, state, dt)?;
    let mut s = state.in_reps(&stepper.held);
    stepper.run(&mut s, steps);
    if s.amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::config(format!("propagation became non-finite at t = {}", dt * steps as f64)));
    }
    Ok(s.in_position())
}

/// `⟨(â_j − a_j(t))^{order}⟩` of the evolved state.
pub fn evolved_moment(state_t: &GridState, variable: usize, classical_value: f64, order: u32) -> Result<f64> {
    Ok(state_t.quadrature_moment(variable, classical_value, order)?.value)
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalCheck {
    pub p_required: f64,
    pub interval_lo: f64,
    pub interval_hi: f64,
    pub probability: f64,
    pub pass: bool,
    pub clamped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableSample {
    pub variable: String,
    pub classical_value: f64,
    pub margin: f64,
    /// Evolved second moment about the classical value.
    pub moment2: f64,
    /// Evolved `2M`-th moment about the classical value.
    pub moment_2m: f64,
    /// `moment2 <= margin²` and `moment_2m <= margin^{2M}`.
    pub moment_bound_holds: bool,
    pub checks: Vec<IntervalCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeSample {
    pub t: f64,
    pub norm: f64,
    pub variables: Vec<VariableSample>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionSummary {
    pub pass: bool,
    pub checks: usize,
    pub violations: usize,
    /// Smallest `probability / P` over all checks.
    pub min_slack: f64,
    pub max_norm_drift: f64,
    /// Largest pointwise drift of the light-particle momentum marginal
    /// (coupled system only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conserved_marginal_drift: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionRecord {
    pub system: String,
    pub order: u32,
    pub p_list: Vec<f64>,
    pub dt: Vec<f64>,
    pub samples: Vec<TimeSample>,
    pub aggregate: EvolutionSummary,
}

impl EvolutionRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per `(t, variable, P)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t", "variable", "classical_value", "margin", "interval_lo", "interval_hi", "probability", "P_required", "pass",
        ])?;
        for s in &self.samples {
            for v in &s.variables {
                for c in &v.checks {
                    w.write_record([
                        s.t.to_string(),
                        v.variable.clone(),
                        v.classical_value.to_string(),
                        v.margin.to_string(),
                        c.interval_lo.to_string(),
                        c.interval_hi.to_string(),
                        c.probability.to_string(),
                        c.p_required.to_string(),
                        c.pass.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolutionOptions {
    /// Approximate number of steps across the whole window.
    pub window_steps: usize,
    pub check_coverage: bool,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self { window_steps: DEFAULT_WINDOW_STEPS, check_coverage: true }
    }
}

/// `count` uniform samples over `[start, end]`, endpoints included.
pub fn uniform_samples(start: f64, end: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![start];
    }
    (0..count)
        .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Pre-checks that the grid covers every tested interval and the estimated
/// packet along the classical trajectory.
fn check_trajectory_coverage(
    state: &GridState,
    data: &ClassicalData,
    system: &System,
    t_samples: &[f64],
    widest: f64,
) -> Result<()> {
    let variances: Vec<f64> = (0..data.dim()).map(|i| state.variance(i)).collect::<Result<_>>()?;
    for &t in t_samples {
        let traj = system.trajectory(t)?;
        let values = traj.eval(data.values());
        let margins = traj.margins(data);
        for (j, f) in traj.components.iter().enumerate() {
            // linearized width estimate of the evolved packet
            let spread: f64 = (0..data.dim())
                .map(|k| f.derivative(k).eval(data.values()).powi(2) * variances[k])
                .sum::<f64>()
                .sqrt();
            let reach = (margins[j] * widest).max(COVERAGE_WIDTHS * spread);
            state
                .check_covers(j, values[j] - reach, values[j] + reach)
                .map_err(|e| Error::coverage(format!("at t = {t}: {e}")))?;
        }
    }
    Ok(())
}

/// Evolves `state` through `t_samples` and checks, at every sample and for
/// every variable and `P`, that the probability inside
/// `[a_j(t) ± δ_j(t)/(1−P)^{1/2M}]` is at least `P`.
pub fn verify_consistency_over_time(
    state: &GridState,
    data: &ClassicalData,
    system: &System,
    t_samples: &[f64],
    p_list: &[f64],
    order: u32,
    options: &EvolutionOptions,
) -> Result<EvolutionRecord> {
    if order < 1 {
        return Err(Error::invalid("consistency order must be at least 1"));
    }
    if t_samples.is_empty() || t_samples[0] < 0.0 || t_samples.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time samples must be non-negative and strictly increasing"));
    }
    if p_list.is_empty() || p_list.iter().any(|p| !(0.0..1.0).contains(p)) {
        return Err(Error::invalid("P values must lie in [0, 1)"));
    }
    if data.dim() != 2 * state.degrees() || system.phase_space().dim() != data.dim() {
        return Err(Error::invalid("state, classical data and system dimensions disagree"));
    }
    let exponent = 1.0 / (2.0 * f64::from(order));
    let p_max = p_list.iter().copied().fold(0.0, f64::max);
    if options.check_coverage {
        check_trajectory_coverage(state, data, system, t_samples, (1.0 - p_max).powf(-exponent))?;
    }

    let space = system.phase_space();
    let window = t_samples[t_samples.len() - 1] - t_samples[0].min(0.0);
    let target_dt = window.max(f64::MIN_POSITIVE) / options.window_steps.max(1) as f64;

    let mut stepper: Option<SplitStep> = None;
    let mut current = state.clone();
    let mut now = 0.0;
    let conserved = matches!(system, System::CoupledQp2 { .. }).then(|| state.marginal(2)).transpose()?;
    let mut conserved_drift = conserved.as_ref().map(|_| 0.0f64);
    let mut dts = Vec::new();
    let mut samples = Vec::with_capacity(t_samples.len());
    let (mut checks, mut violations, mut min_slack, mut max_norm_drift) = (0usize, 0usize, f64::INFINITY, 0.0f64);

    for &t in t_samples {
        let span = t - now;
        if span > 0.0 {
            let steps = ((span / target_dt).round() as usize).max(1);
            let dt = span / steps as f64;
            let reuse = stepper.as_ref().is_some_and(|s| (s.dt - dt).abs() <= 1e-15 * dt);
            if !reuse {
                stepper = Some(SplitStep::new(system, state, dt)?);
                dts.push(dt);
            }
            let st = stepper.as_ref().expect("stepper");
            let mut work = current.in_reps(&st.held);
            st.run(&mut work, steps);
            if work.amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::config(format!("propagation became non-finite before t = {t}")));
            }
            current = work;
            now = t;
        }
        let norm = current.norm_sq().sqrt();
        max_norm_drift = max_norm_drift.max((norm - 1.0).abs());
        if let (Some(c0), Some(drift)) = (&conserved, conserved_drift.as_mut()) {
            let m = current.marginal(2)?;
            let d = c0.mass.iter().zip(&m.mass).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            *drift = drift.max(d);
        }
        let traj = system.trajectory(t)?;
        let values = traj.eval(data.values());
        let margins = traj.margins(data);
        let mut variables = Vec::with_capacity(data.dim());
        for j in 0..data.dim() {
            let marginal = current.marginal(j)?;
            let (a, d) = (values[j], margins[j]);
            let moment2 = marginal.moment(a, 2);
            let moment_2m = marginal.moment(a, 2 * order as i32);
            let moment_bound_holds = moment2 <= d * d * (1.0 + 1e-9)
                && moment_2m.powf(exponent) <= d * (1.0 + 1e-9);
            let mut var_checks = Vec::with_capacity(p_list.len());
            for &p in p_list {
                let half = d / (1.0 - p).powf(exponent);
                let (lo, hi) = (a - half, a + half);
                let probability = marginal.interval_mass(lo, hi);
                let pass = probability >= p - PROBABILITY_TOL;
                checks += 1;
                violations += usize::from(!pass);
                if p > 0.0 {
                    min_slack = min_slack.min(probability / p);
                }
                var_checks.push(IntervalCheck {
                    p_required: p,
                    interval_lo: lo,
                    interval_hi: hi,
                    probability,
                    pass,
                    clamped: lo < marginal.extent.0 || hi > marginal.extent.1,
                });
            }
            variables.push(VariableSample {
                variable: space.label(j).to_string(),
                classical_value: a,
                margin: d,
                moment2,
                moment_2m,
                moment_bound_holds,
                checks: var_checks,
            });
        }
        samples.push(TimeSample { t, norm, variables });
    }

    Ok(EvolutionRecord {
        system: system.id().to_string(),
        order,
        p_list: p_list.to_vec(),
        dt: dts,
        samples,
        aggregate: EvolutionSummary {
            pass: violations == 0,
            checks,
            violations,
            min_slack,
            max_norm_drift,
            conserved_marginal_drift: conserved_drift,
        },
    })
}
