//! Classical side of the comparison: phase-space flows of polynomial
//! Hamiltonians, all-orders propagation of error margins and the
//! fundamental sequences that index the classicality inequalities.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{poisson_bracket, PhaseSpace, Polynomial};

/// Default truncation order of the Lie series for generic Hamiltonians.
pub const DEFAULT_LIE_ORDER: usize = 8;

/// Classical description of a configuration: values `a⁰ᵢ` and margins `δᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalData {
    values: Vec<f64>,
    margins: Vec<f64>,
    space: PhaseSpace,
}

impl ClassicalData {
    pub fn new(values: Vec<f64>, margins: Vec<f64>) -> Result<Self> {
        if values.len() != margins.len() || values.is_empty() || values.len() % 2 != 0 {
            return Err(Error::invalid(format!(
                "classical data needs 2N values and 2N margins, got {} and {}",
                values.len(),
                margins.len()
            )));
        }
        if let Some(i) = margins.iter().position(|d| !(*d > 0.0)) {
            return Err(Error::invalid(format!(
                "error margin {i} must be strictly positive, got {}",
                margins[i]
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("classical values must be finite"));
        }
        let space = PhaseSpace::with_degrees(values.len() / 2);
        Ok(Self { values, margins, space })
    }

    /// Attaches variable labels.
    pub fn with_space(mut self, space: PhaseSpace) -> Result<Self> {
        if space.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "phase space has {} variables but the data has {}",
                space.dim(),
                self.dim()
            )));
        }
        self.space = space;
        Ok(self)
    }

    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Classical interval `[a⁰ᵢ − δᵢ, a⁰ᵢ + δᵢ]`.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.values[i] - self.margins[i], self.values[i] + self.margins[i])
    }

    pub fn with_margins(&self, margins: Vec<f64>) -> Result<Self> {
        Self::new(self.values.clone(), margins)?.with_space(self.space.clone())
    }
}

/// Multiset of canonical-variable indices, stored sorted ascending
/// (positions before momenta).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SequenceSpec(Vec<usize>);

impl SequenceSpec {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("sequence must be non-empty"));
        }
        indices.sort_unstable();
        Ok(Self(indices))
    }

    pub fn single(index: usize) -> Self {
        Self(vec![index])
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiset union of several sequences.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a SequenceSpec>) -> Result<Self> {
        Self::new(parts.into_iter().flat_map(|s| s.0.iter().copied()).collect())
    }

    /// Product of the margins over the sequence, `δ_{k₁} ⋯ δ_{kₙ}`.
    pub fn margin_product(&self, data: &ClassicalData) -> f64 {
        self.0.iter().map(|&i| data.margins()[i]).product()
    }

    pub fn label(&self, space: &PhaseSpace) -> String {
        let names: Vec<&str> = self.0.iter().map(|&i| space.label(i)).collect();
        format!("({})", names.join(","))
    }

    /// Every distinct ordering of the multiset, in lexicographic order.
    pub fn orderings(&self) -> Vec<Vec<usize>> {
        let mut current = self.0.clone();
        let mut out = vec![current.clone()];
        // next lexicographic permutation
        loop {
            let Some(i) = (0..current.len().saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1])
            else {
                break;
            };
            let j = (i + 1..current.len()).rev().find(|&j| current[j] > current[i]).unwrap();
            current.swap(i, j);
            current[i + 1..].reverse();
            out.push(current.clone());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    LieSeries { order: usize, terminated: bool },
}

/// Classical flow at one time, as polynomials in the initial variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub time: f64,
    pub components: Vec<Polynomial>,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn identity(nvars: usize) -> Self {
        Self {
            time: 0.0,
            components: (0..nvars).map(|j| Polynomial::variable(nvars, j)).collect(),
            provenance: Provenance::ClosedForm,
        }
    }

    /// Classical values `a_j(t)` for initial point `initial`.
    pub fn eval(&self, initial: &[f64]) -> Vec<f64> {
        self.components.iter().map(|f| f.eval(initial)).collect()
    }

    pub fn is_identity(&self) -> bool {
        let n = self.components.len();
        self.components
            .iter()
            .enumerate()
            .all(|(j, f)| *f == Polynomial::variable(n, j))
    }

    /// Propagated margins `δ_j(t)` for every component.
    pub fn margins(&self, data: &ClassicalData) -> Vec<f64> {
        self.components
            .iter()
            .map(|f| propagate_error_margin(f, data))
            .collect()
    }
}

/// Truncated Lie series `Σ_{m≤K} tᵐ/m! {…{a_j,H}…,H}` for every component.
///
/// The `terminated` flag is set when the (K+1)-fold bracket vanishes for every
/// component, in which case the series is exact.
pub fn lie_series_trajectory(h: &Polynomial, t: f64, order: usize) -> Result<Trajectory> {
    if order < 1 {
        return Err(Error::invalid("Lie series truncation order must be at least 1"));
    }
    let n = h.nvars();
    let mut components = Vec::with_capacity(n);
    let mut terminated = true;
    for j in 0..n {
        let mut bracket = Polynomial::variable(n, j);
        let mut sum = bracket.clone();
        let mut weight = 1.0;
        let mut exact = false;
        for m in 1..=order + 1 {
            bracket = poisson_bracket(&bracket, h)?;
            if bracket.is_zero() {
                exact = true;
                break;
            }
            if m > order {
                break;
            }
            weight *= t / m as f64;
            sum = &sum + &bracket.scale(weight);
        }
        terminated &= exact;
        components.push(sum);
    }
    Ok(Trajectory {
        time: t,
        components,
        provenance: Provenance::LieSeries { order, terminated },
    })
}

/// Dynamical systems known to the tool.
#[derive(Debug, Clone, PartialEq)]
pub enum System {
    /// `H = p²/2m + mω²q²/2`.
    HarmonicOscillator { mass: f64, omega: f64 },
    /// `H = P²/2M + p²/2m + kQp²`, variables ordered `(q, Q, p, P)`.
    CoupledQp2 { light_mass: f64, heavy_mass: f64, coupling: f64 },
    /// `H = p²/2m`, a diagnostic system with analytic wave-packet spreading.
    FreeParticle { mass: f64 },
    /// Generic polynomial Hamiltonian, propagated by a truncated Lie series.
    Polynomial { space: PhaseSpace, hamiltonian: Polynomial, lie_order: usize },
}

impl System {
    pub fn harmonic_oscillator() -> Self {
        Self::HarmonicOscillator { mass: 1.0, omega: 1.0 }
    }

    pub fn coupled_qp2(light_mass: f64, heavy_mass: f64, coupling: f64) -> Self {
        Self::CoupledQp2 { light_mass, heavy_mass, coupling }
    }

    pub fn free_particle(mass: f64) -> Self {
        Self::FreeParticle { mass }
    }

    pub fn polynomial(space: PhaseSpace, hamiltonian: Polynomial) -> Result<Self> {
        if hamiltonian.nvars() != space.dim() {
            return Err(Error::invalid(format!(
                "Hamiltonian has {} variables but the phase space has {}",
                hamiltonian.nvars(),
                space.dim()
            )));
        }
        Ok(Self::Polynomial { space, hamiltonian, lie_order: DEFAULT_LIE_ORDER })
    }

    /// Looks up a builtin by id; missing parameters default to 1 (coupling 0.1).
    pub fn builtin(id: &str, mass: Option<f64>, heavy_mass: Option<f64>, coupling: Option<f64>, omega: Option<f64>) -> Result<Self> {
        let system = match id {
            "harmonic_oscillator" => Self::HarmonicOscillator {
                mass: mass.unwrap_or(1.0),
                omega: omega.unwrap_or(1.0),
            },
            "coupled_qp2" => Self::CoupledQp2 {
                light_mass: mass.unwrap_or(1.0),
                heavy_mass: heavy_mass.unwrap_or(1.0),
                coupling: coupling.unwrap_or(0.1),
            },
            "free_particle" => Self::FreeParticle { mass: mass.unwrap_or(1.0) },
            other => return Err(Error::invalid(format!("unknown builtin system `{other}`"))),
        };
        system.validate()?;
        Ok(system)
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            Self::HarmonicOscillator { mass, omega } => {
                positive("mass", mass)?;
                positive("omega", omega)
            }
            Self::CoupledQp2 { light_mass, heavy_mass, coupling } => {
                positive("m", light_mass)?;
                positive("M", heavy_mass)?;
                if coupling.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("coupling must be finite"))
                }
            }
            Self::FreeParticle { mass } => positive("mass", mass),
            Self::Polynomial { .. } => Ok(()),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::HarmonicOscillator { .. } => "harmonic_oscillator",
            Self::CoupledQp2 { .. } => "coupled_qp2",
            Self::FreeParticle { .. } => "free_particle",
            Self::Polynomial { .. } => "polynomial",
        }
    }

    pub fn phase_space(&self) -> PhaseSpace {
        match self {
            Self::HarmonicOscillator { .. } | Self::FreeParticle { .. } => PhaseSpace::with_degrees(1),
            Self::CoupledQp2 { .. } => PhaseSpace::new(["q", "Q", "p", "P"]).expect("static labels"),
            Self::Polynomial { space, .. } => space.clone(),
        }
    }

    pub fn hamiltonian(&self) -> Polynomial {
        match *self {
            Self::HarmonicOscillator { mass, omega } => Polynomial::from_terms(
                2,
                [(0.5 * mass * omega * omega, vec![2, 0]), (0.5 / mass, vec![0, 2])],
            ),
            Self::CoupledQp2 { light_mass, heavy_mass, coupling } => Polynomial::from_terms(
                4,
                [
                    (0.5 / heavy_mass, vec![0, 0, 0, 2]),
                    (0.5 / light_mass, vec![0, 0, 2, 0]),
                    (coupling, vec![0, 1, 2, 0]),
                ],
            ),
            Self::FreeParticle { mass } => Polynomial::from_terms(2, [(0.5 / mass, vec![0, 2])]),
            Self::Polynomial { ref hamiltonian, .. } => Ok(hamiltonian.clone()),
        }
        .expect("well-formed Hamiltonian")
    }

    /// Flow at time `t`: closed form for builtins, Lie series otherwise.
    pub fn trajectory(&self, t: f64) -> Result<Trajectory> {
        match self {
            Self::Polynomial { hamiltonian, lie_order, .. } => lie_series_trajectory(hamiltonian, t, *lie_order),
            _ => builtin_trajectory(self, t),
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: H = {}", self.id(), self.hamiltonian().format_with(&self.phase_space()))
    }
}

/// Closed-form flow of a builtin system.
pub fn builtin_trajectory(system: &System, t: f64) -> Result<Trajectory> {
    let poly = |n: usize, terms: Vec<(f64, Vec<u32>)>| Polynomial::from_terms(n, terms);
    let components = match *system {
        System::HarmonicOscillator { mass, omega } => {
            let (s, c) = (omega * t).sin_cos();
            let mw = mass * omega;
            vec![
                poly(2, vec![(c, vec![1, 0]), (s / mw, vec![0, 1])])?,
                poly(2, vec![(-mw * s, vec![1, 0]), (c, vec![0, 1])])?,
            ]
        }
        System::CoupledQp2 { light_mass: m, heavy_mass: big_m, coupling: k } => {
            // (q, Q, p, P)
            vec![
                poly(
                    4,
                    vec![
                        (1.0, vec![1, 0, 0, 0]),
                        (t / m, vec![0, 0, 1, 0]),
                        (2.0 * k * t, vec![0, 1, 1, 0]),
                        (k * t * t / big_m, vec![0, 0, 1, 1]),
                        (-k * k * t.powi(3) / (3.0 * big_m), vec![0, 0, 3, 0]),
                    ],
                )?,
                poly(
                    4,
                    vec![
                        (1.0, vec![0, 1, 0, 0]),
                        (t / big_m, vec![0, 0, 0, 1]),
                        (-k * t * t / (2.0 * big_m), vec![0, 0, 2, 0]),
                    ],
                )?,
                Polynomial::variable(4, 2),
                poly(4, vec![(1.0, vec![0, 0, 0, 1]), (-k * t, vec![0, 0, 2, 0])])?,
            ]
        }
        System::FreeParticle { mass } => vec![
            poly(2, vec![(1.0, vec![1, 0]), (t / mass, vec![0, 1])])?,
            Polynomial::variable(2, 1),
        ],
        System::Polynomial { .. } => {
            return Err(Error::invalid("polynomial systems have no closed-form builtin trajectory"))
        }
    };
    Ok(Trajectory { time: t, components, provenance: Provenance::ClosedForm })
}

/// All-orders margin `Σ_{n≥1} 1/n! Σ_{k₁…kₙ} |∂ⁿF/∂a_{k₁}…∂a_{kₙ}| δ_{k₁}⋯δ_{kₙ}`
/// evaluated at the classical values.
///
/// The ordered sum over `k₁…kₙ` collapses to `Σ_α |∂^α F| δ^α / α!` over
/// multi-indices, i.e. the absolute Taylor coefficients of `F` re-expanded
/// around `a⁰`.
pub fn propagate_error_margin(component: &Polynomial, data: &ClassicalData) -> f64 {
    let taylor = component.shifted(data.values());
    taylor
        .terms()
        .filter(|(e, _)| e.iter().any(|&k| k > 0))
        .map(|(e, c)| {
            c.abs()
                * e.iter()
                    .zip(data.margins())
                    .map(|(&k, &d)| d.powi(k as i32))
                    .product::<f64>()
        })
        .sum()
}

/// `count` uniformly spaced times covering `(0, window]`.
pub fn default_enumeration_times(window: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| window * i as f64 / count as f64).collect()
}

/// Multisets whose mixed partial of some component is structurally nonzero
/// at some sampled time.
///
/// A partial `∂^α F` is nonzero iff some monomial of `F` dominates `α`
/// componentwise, so the result is the union of the nonzero sub-multi-indices
/// of every monomial.
pub fn enumerate_fundamental_sequences(trajectories: &[Trajectory]) -> Result<BTreeSet<SequenceSpec>> {
    if !trajectories.iter().any(|t| t.time != 0.0) {
        return Err(Error::invalid("sequence enumeration needs at least one sampled time t != 0"));
    }
    let mut out: BTreeSet<SequenceSpec> = BTreeSet::new();
    let mut seen_exponents = BTreeSet::new();
    for traj in trajectories {
        for f in &traj.components {
            for (e, _) in f.terms() {
                if !seen_exponents.insert(e.clone()) {
                    continue;
                }
                for sub in sub_multi_indices(e) {
                    let seq: Vec<usize> = sub
                        .iter()
                        .enumerate()
                        .flat_map(|(v, &k)| std::iter::repeat_n(v, k as usize))
                        .collect();
                    if !seq.is_empty() {
                        out.insert(SequenceSpec(seq));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn sub_multi_indices(e: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::with_capacity(e.len())];
    for &k in e {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=k).map(move |j| {
                    let mut p = prefix.clone();
                    p.push(j);
                    p
                })
            })
            .collect();
    }
    out
}

/// Polynomial compiled to flat monomial lists for fast repeated evaluation.
struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    fn new(p: &Polynomial) -> Self {
        Self {
            terms: p
                .terms()
                .map(|(e, c)| {
                    let factors = e
                        .iter()
                        .enumerate()
                        .filter(|(_, &k)| k > 0)
                        .map(|(v, &k)| (v, k as i32))
                        .collect();
                    (c, factors)
                })
                .collect(),
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, f)| c * f.iter().map(|&(v, k)| x[v].powi(k)).product::<f64>())
            .sum()
    }
}

/// Hamilton's equations `q̇ = ∂H/∂p`, `ṗ = −∂H/∂q` integrated by classical
/// fourth-order Runge–Kutta. Independent of the closed forms and Lie series.
pub struct HamiltonFlow {
    rhs: Vec<(CompiledPoly, f64)>,
}

impl HamiltonFlow {
    pub fn new(h: &Polynomial) -> Self {
        let n = h.nvars() / 2;
        let rhs = (0..2 * n)
            .map(|j| {
                if j < n {
                    (CompiledPoly::new(&h.derivative(j + n)), 1.0)
                } else {
                    (CompiledPoly::new(&h.derivative(j - n)), -1.0)
                }
            })
            .collect();
        Self { rhs }
    }

    fn velocity(&self, x: &[f64], out: &mut [f64]) {
        for (o, (p, s)) in out.iter_mut().zip(&self.rhs) {
            *o = s * p.eval(x);
        }
    }

    pub fn flow(&self, initial: &[f64], t: f64, max_step: f64) -> Vec<f64> {
        let steps = ((t.abs() / max_step).ceil() as usize).max(1);
        let dt = t / steps as f64;
        let n = initial.len();
        let mut x = initial.to_vec();
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for _ in 0..steps {
            self.velocity(&x, &mut k1);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * dt * k1[i];
            }
            self.velocity(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * dt * k2[i];
            }
            self.velocity(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = x[i] + dt * k3[i];
            }
            self.velocity(&tmp, &mut k4);
            for i in 0..n {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        x
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginCheck {
    pub samples: usize,
    pub violations: usize,
    /// Largest `|a_j(t; x) − a_j(t)| / δ_j(t)` seen over all samples.
    pub worst_ratio: f64,
}

/// ODE step used by the Monte-Carlo oracle.
pub const ORACLE_STEP: f64 = 0.005;
const CONTAINMENT_ABS_TOL: f64 = 1e-9;
const MC_CHUNK: usize = 1024;

/// Samples initial points uniformly in the classical box, flows each one with
/// the Runge–Kutta oracle and counts exits from `[a_j(t) ± δ_j(t)]`.
///
/// Chunks of samples use independent ChaCha streams derived from `seed`, so
/// results are identical for any worker count.
pub fn monte_carlo_margin_check(system: &System, data: &ClassicalData, t: f64, samples: usize, seed: u64) -> Result<MarginCheck> {
    if samples < 1 {
        return Err(Error::invalid("Monte-Carlo check needs at least one sample"));
    }
    let h = system.hamiltonian();
    if h.nvars() != data.dim() {
        return Err(Error::invalid("classical data dimension does not match the system"));
    }
    let traj = system.trajectory(t)?;
    let centre = traj.eval(data.values());
    let margins = traj.margins(data);
    let flow = HamiltonFlow::new(&h);
    let chunks = samples.div_ceil(MC_CHUNK);
    let (violations, worst) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut violations = 0usize;
            let mut worst = 0.0f64;
            let mut x0 = vec![0.0; data.dim()];
            for _ in 0..n {
                for (i, x) in x0.iter_mut().enumerate() {
                    let (lo, hi) = data.interval(i);
                    *x = rng.random_range(lo..=hi);
                }
                let xt = flow.flow(&x0, t, ORACLE_STEP);
                let mut bad = false;
                for j in 0..xt.len() {
                    let dev = (xt[j] - centre[j]).abs();
                    worst = worst.max(dev / margins[j]);
                    bad |= dev > margins[j] + CONTAINMENT_ABS_TOL * (1.0 + margins[j]);
                }
                violations += usize::from(bad);
            }
            (violations, worst)
        })
        .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)));
    Ok(MarginCheck { samples, violations, worst_ratio: worst })
}
