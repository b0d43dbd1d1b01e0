//! Consistency and classicality criteria with structured reports.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::classical::{enumerate_fundamental_sequences, ClassicalData, SequenceSpec, System, Trajectory};
use crate::error::{Error, Result};
use crate::gaussian::{product_ket_norm_sq, GaussianPacket};
use crate::grid::GridState;
use crate::kets::{mixed_error_ket, mixed_error_ket_ordered};
use crate::poly::PhaseSpace;

/// Relative tolerance on the bound before a row fails.
pub const BORDERLINE_TOL: f64 = 1e-9;
/// Default cap on the number of composite sequences.
pub const DEFAULT_MAX_COMPOSITES: usize = 10_000;

/// Default probabilities scanned by the second consistency criterion.
pub fn default_p_samples() -> Vec<f64> {
    vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionKind {
    #[serde(rename = "consistency-1")]
    ConsistencyFirst,
    #[serde(rename = "consistency-2")]
    ConsistencySecond,
    #[serde(rename = "classicality-1")]
    ClassicalityFirst,
    #[serde(rename = "classicality-2")]
    ClassicalitySecond,
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ConsistencyFirst => "consistency-1",
            Self::ConsistencySecond => "consistency-2",
            Self::ClassicalityFirst => "classicality-1",
            Self::ClassicalitySecond => "classicality-2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `value <= bound`
    AtMost,
    /// `value >= bound`
    AtLeast,
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionRow {
    pub sequence: String,
    /// Measured quantity: a ket norm² or an interval probability.
    pub norm_sq: f64,
    pub bound: f64,
    pub pass: bool,
    /// Ratio `>= 1` when the row passes; infinite (serialized as null) when the
    /// measured value is zero.
    #[serde(serialize_with = "finite_or_null")]
    pub slack: f64,
    pub relation: Relation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl CriterionRow {
    pub fn new(sequence: String, value: f64, bound: f64, relation: Relation) -> Self {
        let (pass, slack) = match relation {
            Relation::AtMost => (value <= bound * (1.0 + BORDERLINE_TOL), bound / value),
            Relation::AtLeast => (value >= bound * (1.0 - BORDERLINE_TOL), value / bound),
        };
        let slack = if slack.is_nan() { f64::INFINITY } else { slack };
        Self { sequence, norm_sq: value, bound, pass, slack, relation, p: None }
    }

    fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Aggregate {
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_order: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub kind: CriterionKind,
    /// `grid` or `gaussian_closed_form`.
    pub method: String,
    pub rows: Vec<CriterionRow>,
    pub aggregate: Aggregate,
    /// Momentum rows evaluated with the textbook width `ℏ/(√2 Δq)` instead of
    /// the exact `ℏ/(2Δq)`; informational only.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reference_rows: Vec<CriterionRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl CriterionReport {
    fn new(kind: CriterionKind, method: &str, rows: Vec<CriterionRow>) -> Self {
        let pass = rows.iter().all(|r| r.pass);
        let worst = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
        Self {
            kind,
            method: method.to_string(),
            rows,
            aggregate: Aggregate {
                pass,
                worst_slack: worst.is_finite().then_some(worst),
                ..Aggregate::default()
            },
            reference_rows: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.aggregate.pass
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned-column text table.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} [{}]\n", self.kind, self.method);
        let width = self.rows.iter().map(|r| r.sequence.len()).max().unwrap_or(8).max(8);
        s.push_str(&format!(
            "{:<width$}  {:>8}  {:>14}  {:>14}  {:>10}  {}\n",
            "sequence", "p", "value", "bound", "slack", "pass"
        ));
        for r in &self.rows {
            let p = r.p.map_or_else(|| "-".to_string(), |p| format!("{p:.4}"));
            s.push_str(&format!(
                "{:<width$}  {:>8}  {:>14.6e}  {:>14.6e}  {:>10.4}  {}\n",
                r.sequence,
                p,
                r.norm_sq,
                r.bound,
                r.slack,
                if r.pass { "yes" } else { "NO" }
            ));
        }
        let a = &self.aggregate;
        s.push_str(&format!("aggregate: {}", if a.pass { "PASS" } else { "FAIL" }));
        if let Some(p0) = a.p0 {
            s.push_str(&format!("  p0={p0:.6}"));
        }
        if let Some(m) = a.order {
            s.push_str(&format!("  order={m}"));
        }
        if let Some(m) = a.max_order {
            s.push_str(&format!("  max_order={m}"));
        }
        s.push('\n');
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

fn check_dims(state: &GridState, data: &ClassicalData) -> Result<()> {
    if data.dim() != 2 * state.degrees() {
        return Err(Error::invalid(format!(
            "classical data has {} variables but the state has {} degrees of freedom",
            data.dim(),
            state.degrees()
        )));
    }
    Ok(())
}

/// First consistency criterion: `pᵢ` inside `[a⁰ᵢ ± δᵢ]`, `p₀ = min pᵢ`.
/// Rows pass when `pᵢ >= required_p0` (use 0 to only measure).
pub fn consistency_first(state: &GridState, data: &ClassicalData, required_p0: f64) -> Result<CriterionReport> {
    check_dims(state, data)?;
    let space = data.space();
    let mut rows = Vec::with_capacity(data.dim());
    for i in 0..data.dim() {
        let (lo, hi) = data.interval(i);
        state.check_covers(i, lo, hi)?;
        let p = state.interval_probability(i, lo, hi)?.value;
        rows.push(CriterionRow::new(space.label(i).to_string(), p, required_p0, Relation::AtLeast));
    }
    let p0 = rows.iter().map(|r| r.norm_sq).fold(f64::INFINITY, f64::min);
    let mut report = CriterionReport::new(CriterionKind::ConsistencyFirst, "grid", rows);
    report.aggregate.p0 = Some(p0);
    Ok(report)
}

/// Second consistency criterion at order `order`, scanned over `p_samples`.
pub fn consistency_second(state: &GridState, data: &ClassicalData, order: u32, p_samples: &[f64]) -> Result<CriterionReport> {
    check_dims(state, data)?;
    if order < 1 {
        return Err(Error::invalid("consistency order must be at least 1"));
    }
    if let Some(p) = p_samples.iter().find(|p| !(0.0..1.0).contains(*p)) {
        return Err(Error::invalid(format!("p samples must lie in [0, 1), got {p}")));
    }
    let space = data.space();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for i in 0..data.dim() {
        let a = data.values()[i];
        for &p in p_samples {
            let half = data.margins()[i] / (1.0 - p).powf(1.0 / (2.0 * f64::from(order)));
            let prob = state.interval_probability(i, a - half, a + half)?;
            if prob.clamped {
                warnings.push(format!("interval for {} at p={p} exceeds the grid and was clamped", space.label(i)));
            }
            rows.push(CriterionRow::new(space.label(i).to_string(), prob.value, p, Relation::AtLeast).with_p(p));
        }
    }
    let mut report = CriterionReport::new(CriterionKind::ConsistencySecond, "grid", rows);
    report.aggregate.order = Some(order);
    report.warnings = warnings;
    Ok(report)
}

/// Largest `M <= max_order` with `⟨(âᵢ − a⁰ᵢ)^{2M}⟩ <= δᵢ^{2M}` for every
/// variable at every order up to `M`; 0 if even `M = 1` fails.
pub fn sufficient_consistency_order(state: &GridState, data: &ClassicalData, max_order: u32) -> Result<u32> {
    check_dims(state, data)?;
    if max_order < 1 {
        return Err(Error::invalid("max order must be at least 1"));
    }
    let marginals: Vec<_> = (0..data.dim()).map(|i| state.marginal(i)).collect::<Result<_>>()?;
    let mut best = 0;
    for m in 1..=max_order {
        let ok = marginals.iter().enumerate().all(|(i, mg)| {
            let d = data.margins()[i];
            let moment = mg.moment(data.values()[i], 2 * m as i32);
            // compare 2M-th roots to stay finite for large M
            moment.powf(1.0 / (2.0 * f64::from(m))) <= d * (1.0 + BORDERLINE_TOL)
        });
        if !ok {
            break;
        }
        best = m;
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalityOptions {
    pub max_composites: usize,
    /// Evaluate every distinct ordering of each composite instead of the
    /// sorted one.
    pub exhaustive_orderings: bool,
}

impl Default for ClassicalityOptions {
    fn default() -> Self {
        Self { max_composites: DEFAULT_MAX_COMPOSITES, exhaustive_orderings: false }
    }
}

pub fn system_trajectories(system: &System, t_samples: &[f64]) -> Result<Vec<Trajectory>> {
    t_samples.iter().map(|&t| system.trajectory(t)).collect()
}

pub fn fundamental_sequences(system: &System, t_samples: &[f64]) -> Result<BTreeSet<SequenceSpec>> {
    enumerate_fundamental_sequences(&system_trajectories(system, t_samples)?)
}

/// `C(n, k)`, or some value above `cap` once the partial products exceed it.
fn binomial_capped(n: u128, k: u128, cap: u128) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        // partial products C(n-k+i+1, i+1) increase with i
        r = r * (n - k + i + 1) / (i + 1);
        if r > cap {
            return r;
        }
    }
    r
}

/// All multisets formed by `order` fundamental sequences, deduplicated.
pub fn composite_sequences(fundamental: &BTreeSet<SequenceSpec>, order: u32, cap: usize) -> Result<Vec<SequenceSpec>> {
    if order < 1 {
        return Err(Error::invalid("classicality order must be at least 1"));
    }
    let f = fundamental.len() as u128;
    let combos = binomial_capped(f + u128::from(order) - 1, u128::from(order), cap as u128);
    if combos > cap as u128 {
        return Err(Error::Resource(format!(
            "{combos} composite sequences at order {order} exceed the cap of {cap}"
        )));
    }
    let items: Vec<&SequenceSpec> = fundamental.iter().collect();
    let mut out = BTreeSet::new();
    let mut pick = Vec::with_capacity(order as usize);
    fn rec<'a>(items: &[&'a SequenceSpec], start: usize, left: u32, pick: &mut Vec<&'a SequenceSpec>, out: &mut BTreeSet<SequenceSpec>) -> Result<()> {
        if left == 0 {
            out.insert(SequenceSpec::concat(pick.iter().copied())?);
            return Ok(());
        }
        for i in start..items.len() {
            pick.push(items[i]);
            rec(items, i, left - 1, pick, out)?;
            pick.pop();
        }
        Ok(())
    }
    rec(&items, 0, order, &mut pick, &mut out)?;
    Ok(out.into_iter().collect())
}

fn ordering_label(order: &[usize], space: &PhaseSpace) -> String {
    let names: Vec<&str> = order.iter().map(|&i| space.label(i)).collect();
    format!("({})", names.join(","))
}

/// Evaluates `⟨E_S|E_S⟩ <= (δ_S)²·factor` for every sequence, on the grid.
fn ket_rows(
    state: &GridState,
    data: &ClassicalData,
    space: &PhaseSpace,
    sequences: &[SequenceSpec],
    factor: f64,
    exhaustive: bool,
    cap: usize,
) -> Result<Vec<CriterionRow>> {
    let jobs: Vec<Vec<usize>> = if exhaustive {
        let all: Vec<Vec<usize>> = sequences.iter().flat_map(SequenceSpec::orderings).collect();
        if all.len() > cap {
            return Err(Error::Resource(format!("{} orderings exceed the cap of {cap}", all.len())));
        }
        all
    } else {
        sequences.iter().map(|s| s.indices().to_vec()).collect()
    };
    jobs.par_iter()
        .map(|order| {
            let seq = SequenceSpec::new(order.clone())?;
            let norm = if exhaustive {
                mixed_error_ket_ordered(state, order, data)?.norm_sq()
            } else {
                mixed_error_ket(state, &seq, data)?.norm_sq()
            };
            let bound = seq.margin_product(data).powi(2) * factor;
            Ok(CriterionRow::new(ordering_label(order, space), norm, bound, Relation::AtMost))
        })
        .collect()
}

fn check_system(system: &System, data: &ClassicalData) -> Result<()> {
    if system.phase_space().dim() != data.dim() {
        return Err(Error::invalid(format!(
            "system `{}` has {} canonical variables but the classical data has {}",
            system.id(),
            system.phase_space().dim(),
            data.dim()
        )));
    }
    Ok(())
}

/// First classicality criterion at order `order` (grid evaluation).
pub fn classicality_first(
    state: &GridState,
    data: &ClassicalData,
    system: &System,
    order: u32,
    t_samples: &[f64],
    options: &ClassicalityOptions,
) -> Result<CriterionReport> {
    check_dims(state, data)?;
    check_system(system, data)?;
    let fundamental = fundamental_sequences(system, t_samples)?;
    let composites = composite_sequences(&fundamental, order, options.max_composites)?;
    let space = system.phase_space();
    let rows = ket_rows(state, data, &space, &composites, 1.0, options.exhaustive_orderings, options.max_composites)?;
    let mut report = CriterionReport::new(CriterionKind::ClassicalityFirst, "grid", rows);
    report.aggregate.order = Some(order);
    Ok(report)
}

/// Largest order `<= max_order` at which the first criterion passes at every
/// lower order, using a fixed evaluation routine.
pub fn max_order_by<F>(max_order: u32, mut passes: F) -> Result<u32>
where
    F: FnMut(u32) -> Result<bool>,
{
    let mut best = 0;
    for m in 1..=max_order {
        if !passes(m)? {
            break;
        }
        best = m;
    }
    Ok(best)
}

/// Second classicality criterion: `⟨E_S|E_S⟩ <= (δ_S)²(1 − p₀)` over the
/// fundamental sequences. Also reports the largest passing `p₀`.
pub fn classicality_second(
    state: &GridState,
    data: &ClassicalData,
    system: &System,
    p0: f64,
    t_samples: &[f64],
) -> Result<CriterionReport> {
    check_dims(state, data)?;
    check_system(system, data)?;
    if !(0.0..1.0).contains(&p0) {
        return Err(Error::invalid(format!("p0 must satisfy 0 <= p0 < 1, got {p0}")));
    }
    let fundamental: Vec<SequenceSpec> = fundamental_sequences(system, t_samples)?.into_iter().collect();
    let space = system.phase_space();
    let rows = ket_rows(state, data, &space, &fundamental, 1.0 - p0, false, DEFAULT_MAX_COMPOSITES)?;
    let max_p0 = max_p0_from_rows(&rows, 1.0 - p0);
    let mut report = CriterionReport::new(CriterionKind::ClassicalitySecond, "grid", rows);
    report.aggregate.p0 = Some(max_p0);
    Ok(report)
}

/// `1 − max(norm / (δ_S)²)` clamped to `[0, 1)`.
fn max_p0_from_rows(rows: &[CriterionRow], factor: f64) -> f64 {
    let worst = rows
        .iter()
        .map(|r| r.norm_sq / (r.bound / factor))
        .fold(0.0, f64::max);
    (1.0 - worst).clamp(0.0, 1.0f64.next_down())
}

/// Closed-form first classicality criterion for (product) Gaussian packets.
pub fn gaussian_fastpath(
    packets: &[GaussianPacket],
    data: &ClassicalData,
    system: &System,
    order: u32,
    t_samples: &[f64],
    hbar: f64,
) -> Result<CriterionReport> {
    check_system(system, data)?;
    if packets.len() * 2 != data.dim() {
        return Err(Error::Unsupported(format!(
            "{} Gaussian packets cannot describe {} canonical variables",
            packets.len(),
            data.dim()
        )));
    }
    let fundamental = fundamental_sequences(system, t_samples)?;
    let composites = composite_sequences(&fundamental, order, DEFAULT_MAX_COMPOSITES)?;
    let space = system.phase_space();
    let rows = composites
        .iter()
        .map(|seq| {
            let norm = product_ket_norm_sq(packets, seq.indices(), data.values(), hbar)?;
            let bound = seq.margin_product(data).powi(2);
            Ok(CriterionRow::new(seq.label(&space), norm, bound, Relation::AtMost))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = packets.len();
    let mut reference_rows = Vec::new();
    for seq in &composites {
        // pure momentum rows on one axis, with the √2-convention width
        let idx = seq.indices();
        if idx.iter().all(|&v| v == idx[0]) && idx[0] >= n {
            let g = packets[idx[0] - n];
            let mut stretched = g;
            stretched.width = g.width / 2f64.sqrt();
            let norm = crate::gaussian::axis_ket_norm_sq(&stretched, &vec![(true, g.center_p); idx.len()], hbar);
            let bound = seq.margin_product(data).powi(2);
            reference_rows.push(CriterionRow::new(seq.label(&space), norm, bound, Relation::AtMost));
        }
    }
    let mut report = CriterionReport::new(CriterionKind::ClassicalityFirst, "gaussian_closed_form", rows);
    report.aggregate.order = Some(order);
    report.reference_rows = reference_rows;
    Ok(report)
}

/// Closed-form second classicality criterion for (product) Gaussian packets.
pub fn gaussian_fastpath_second(
    packets: &[GaussianPacket],
    data: &ClassicalData,
    system: &System,
    p0: f64,
    t_samples: &[f64],
    hbar: f64,
) -> Result<CriterionReport> {
    check_system(system, data)?;
    if !(0.0..1.0).contains(&p0) {
        return Err(Error::invalid(format!("p0 must satisfy 0 <= p0 < 1, got {p0}")));
    }
    if packets.len() * 2 != data.dim() {
        return Err(Error::Unsupported("Gaussian packets do not match the phase space".into()));
    }
    let space = system.phase_space();
    let rows = fundamental_sequences(system, t_samples)?
        .iter()
        .map(|seq| {
            let norm = product_ket_norm_sq(packets, seq.indices(), data.values(), hbar)?;
            let bound = seq.margin_product(data).powi(2) * (1.0 - p0);
            Ok(CriterionRow::new(seq.label(&space), norm, bound, Relation::AtMost))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_p0 = max_p0_from_rows(&rows, 1.0 - p0);
    let mut report = CriterionReport::new(CriterionKind::ClassicalitySecond, "gaussian_closed_form", rows);
    report.aggregate.p0 = Some(max_p0);
    Ok(report)
}
