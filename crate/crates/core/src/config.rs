//! Run configuration: JSON text with strict key checking, defaults, and
//! dotted-path overrides.
//!
//! Every block keeps unrecognized keys in a catch-all map so that validation
//! can report all of them, with their paths, in one pass.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classical::{default_enumeration_times, ClassicalData, System};
use crate::criteria::{default_p_samples, ClassicalityOptions, CriterionKind, DEFAULT_MAX_COMPOSITES};
use crate::error::{Error, Result};
use crate::evolution::{uniform_samples, EvolutionOptions, DEFAULT_TIME_SAMPLES, DEFAULT_WINDOW_STEPS};
use crate::gaussian::GaussianPacket;
use crate::grid::{from_tabulated, make_gaussian, GridAxis, GridState};
use crate::poly::{PhaseSpace, Polynomial};

type Extra = BTreeMap<String, Value>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TermConfig {
    pub coefficient: f64,
    pub powers: Vec<u32>,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolynomialConfig {
    /// Positions first, then momenta.
    pub variables: Vec<String>,
    pub terms: Vec<TermConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lie_order: Option<usize>,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heavy_mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<PolynomialConfig>,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassicalConfig {
    /// Keyed by variable label; missing values default to 0.
    pub values: BTreeMap<String, f64>,
    /// Keyed by variable label; missing margins default to 1.
    pub margins: BTreeMap<String, f64>,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AxisStateConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    /// Tabulated `x re im` rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantumConfig {
    /// `gaussian` or `tabulated`.
    pub kind: String,
    pub axes: Vec<AxisStateConfig>,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

impl Default for QuantumConfig {
    fn default() -> Self {
        Self { kind: "gaussian".into(), axes: Vec::new(), extra: Extra::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub points: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub hbar: f64,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points: Vec::new(), lower: Vec::new(), upper: Vec::new(), hbar: 1.0, extra: Extra::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriteriaConfig {
    pub kind: String,
    pub order: u32,
    pub max_order: u32,
    pub p0: f64,
    pub p_samples: Vec<f64>,
    /// Window over which fundamental sequences are enumerated.
    pub t_window: f64,
    pub t_samples: usize,
    pub max_composites: usize,
    pub exhaustive_orderings: bool,
    /// `grid` or `gaussian_closed_form`.
    pub method: String,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        Self {
            kind: "consistency-2".into(),
            order: 1,
            max_order: 10,
            p0: 0.0,
            p_samples: default_p_samples(),
            t_window: 2.0 * PI,
            t_samples: 8,
            max_composites: DEFAULT_MAX_COMPOSITES,
            exhaustive_orderings: false,
            method: "grid".into(),
            extra: Extra::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub t_window: Vec<f64>,
    pub samples: usize,
    pub p_list: Vec<f64>,
    pub order: u32,
    /// Approximate split steps across the window; each sample interval gets
    /// a whole number of equal steps.
    pub steps: usize,
    pub check_coverage: bool,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            t_window: vec![0.0, 4.0 * PI],
            samples: DEFAULT_TIME_SAMPLES,
            p_list: vec![0.5, 0.9, 0.99],
            order: 1,
            steps: DEFAULT_WINDOW_STEPS,
            check_coverage: true,
            extra: Extra::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    /// Dotted path of the leaf to sweep, e.g. `quantum.axes.0.width`.
    pub parameter: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Orders reported as pass/fail columns.
    pub orders: Vec<u32>,
    pub max_order: u32,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            parameter: "quantum.axes.0.width".into(),
            start: 0.1,
            stop: 2.0,
            points: 40,
            orders: vec![1],
            max_order: 10,
            extra: Extra::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: String,
    /// Any of `json`, `csv`, `text`.
    pub formats: Vec<String>,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into(), formats: vec!["json".into(), "csv".into()], extra: Extra::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub classical: ClassicalConfig,
    pub quantum: QuantumConfig,
    pub grid: GridConfig,
    pub criteria: CriteriaConfig,
    pub evolution: EvolutionConfig,
    pub scan: ScanConfig,
    pub output: OutputConfig,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(flatten, skip_serializing)]
    extra: Extra,
}

const BUILTINS: [&str; 3] = ["harmonic_oscillator", "coupled_qp2", "free_particle"];
const CRITERION_KINDS: [&str; 4] = ["consistency-1", "consistency-2", "classicality-1", "classicality-2"];

/// Parses, fills defaults and validates. All problems are reported together.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[])
}

/// Like [`parse_config`], applying `path=value` overrides first.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut value: Value = if text.trim().is_empty() {
        Value::Object(Default::default())
    } else {
        serde_json::from_str(text).map_err(|e| Error::Validation(vec![format!("parse: {e}")]))?
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    from_value(value)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_with_overrides(&text, overrides)
}

fn from_value(value: Value) -> Result<RunConfig> {
    if !value.is_object() {
        return Err(Error::Validation(vec!["<root>: config must be a JSON object".into()]));
    }
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Validation(vec![format!("type error: {e}")]))?;
    let errors = cfg.validate();
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    Ok(cfg.resolved())
}

/// Sets the leaf at a dotted path (`a.b.0.c=value`); the value is parsed as
/// JSON and falls back to a bare string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{assignment}` must look like path=value")))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(root, path, parsed)
}

pub(crate) fn set_path(root: &mut Value, path: &str, new: Value) -> Result<()> {
    let bad = || Error::config(format!("override path `{path}` does not resolve"));
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(bad());
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                let slot = map.entry(part.to_string()).or_insert(Value::Null);
                if slot.is_null() && !last {
                    let next_is_index = parts[i + 1].parse::<usize>().is_ok();
                    *slot = if next_is_index { Value::Array(Vec::new()) } else { Value::Object(Default::default()) };
                }
                slot
            }
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| bad())?;
                if idx == items.len() {
                    items.push(if last { Value::Null } else { Value::Object(Default::default()) });
                }
                items.get_mut(idx).ok_or_else(bad)?
            }
            _ => return Err(bad()),
        };
    }
    *cur = new;
    Ok(())
}

fn unknown(errors: &mut Vec<String>, prefix: &str, extra: &Extra) {
    for k in extra.keys() {
        errors.push(format!("{prefix}{k}: unknown key"));
    }
}

fn check_p(errors: &mut Vec<String>, path: String, p: f64) {
    if !(0.0..1.0).contains(&p) {
        errors.push(format!("{path}: must satisfy 0 <= P < 1, got {p}"));
    }
}

fn positive(errors: &mut Vec<String>, path: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errors.push(format!("{path}: must be positive, got {v}"));
    }
}

impl RunConfig {
    /// Phase space implied by the system block, if it is well formed.
    fn space(&self) -> Option<PhaseSpace> {
        if let Some(poly) = &self.system.polynomial {
            return PhaseSpace::new(poly.variables.clone()).ok();
        }
        let id = self.system.builtin.as_deref().unwrap_or("harmonic_oscillator");
        System::builtin(id, None, None, None, None).ok().map(|s| s.phase_space())
    }

    fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        unknown(&mut e, "", &self.extra);
        let s = &self.system;
        unknown(&mut e, "system.", &s.extra);
        match (&s.builtin, &s.polynomial) {
            (Some(_), Some(_)) => e.push("system: give either `builtin` or `polynomial`, not both".into()),
            (Some(id), None) if !BUILTINS.contains(&id.as_str()) => {
                e.push(format!("system.builtin: unknown system `{id}` (expected one of {})", BUILTINS.join(", ")))
            }
            (None, Some(poly)) => {
                unknown(&mut e, "system.polynomial.", &poly.extra);
                if let Err(err) = PhaseSpace::new(poly.variables.clone()) {
                    e.push(format!("system.polynomial.variables: {err}"));
                }
                for (i, t) in poly.terms.iter().enumerate() {
                    unknown(&mut e, &format!("system.polynomial.terms.{i}."), &t.extra);
                    if t.powers.len() != poly.variables.len() {
                        e.push(format!(
                            "system.polynomial.terms.{i}.powers: expected {} exponents, got {}",
                            poly.variables.len(),
                            t.powers.len()
                        ));
                    }
                    if !t.coefficient.is_finite() {
                        e.push(format!("system.polynomial.terms.{i}.coefficient: must be finite"));
                    }
                }
                if poly.lie_order == Some(0) {
                    e.push("system.polynomial.lie_order: must be at least 1".into());
                }
                for (key, v) in [("mass", s.mass), ("heavy_mass", s.heavy_mass), ("coupling", s.coupling), ("omega", s.omega)] {
                    if v.is_some() {
                        e.push(format!("system.{key}: only applies to builtin systems"));
                    }
                }
            }
            _ => {}
        }
        for (key, v) in [("mass", s.mass), ("heavy_mass", s.heavy_mass), ("omega", s.omega)] {
            if let Some(v) = v {
                positive(&mut e, &format!("system.{key}"), v);
            }
        }
        if let Some(c) = s.coupling {
            if !c.is_finite() {
                e.push("system.coupling: must be finite".into());
            }
        }

        let space = self.space();
        let c = &self.classical;
        unknown(&mut e, "classical.", &c.extra);
        for (block, map) in [("values", &c.values), ("margins", &c.margins)] {
            for (label, v) in map {
                if let Some(sp) = &space {
                    if sp.index_of(label).is_none() {
                        e.push(format!("classical.{block}.{label}: unknown variable (expected one of {})", sp.labels().join(", ")));
                        continue;
                    }
                }
                if block == "margins" {
                    positive(&mut e, &format!("classical.margins.{label}"), *v);
                } else if !v.is_finite() {
                    e.push(format!("classical.values.{label}: must be finite"));
                }
            }
        }

        let degrees = space.as_ref().map(PhaseSpace::degrees);
        let q = &self.quantum;
        unknown(&mut e, "quantum.", &q.extra);
        if q.kind != "gaussian" && q.kind != "tabulated" {
            e.push(format!("quantum.kind: expected `gaussian` or `tabulated`, got `{}`", q.kind));
        }
        if let Some(n) = degrees {
            if !q.axes.is_empty() && q.axes.len() != n {
                e.push(format!("quantum.axes: expected {n} entries, got {}", q.axes.len()));
            }
            if q.kind == "tabulated" && q.axes.len() != n {
                e.push(format!("quantum.axes: tabulated states need one `file` per axis ({n})"));
            }
        }
        for (i, a) in q.axes.iter().enumerate() {
            unknown(&mut e, &format!("quantum.axes.{i}."), &a.extra);
            if let Some(w) = a.width {
                positive(&mut e, &format!("quantum.axes.{i}.width"), w);
            }
            if q.kind == "tabulated" && a.file.is_none() {
                e.push(format!("quantum.axes.{i}.file: required for tabulated states"));
            }
        }

        let g = &self.grid;
        unknown(&mut e, "grid.", &g.extra);
        positive(&mut e, "grid.hbar", g.hbar);
        if let Some(n) = degrees {
            for (key, len) in [("points", g.points.len()), ("lower", g.lower.len()), ("upper", g.upper.len())] {
                if len != 0 && len != n {
                    e.push(format!("grid.{key}: expected {n} entries, got {len}"));
                }
            }
        }
        for (i, &p) in g.points.iter().enumerate() {
            if p < 64 || !p.is_power_of_two() {
                e.push(format!("grid.points.{i}: must be a power of two >= 64, got {p}"));
            }
        }
        for (i, (lo, hi)) in g.lower.iter().zip(&g.upper).enumerate() {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                e.push(format!("grid.upper.{i}: must exceed grid.lower.{i} ({hi} <= {lo})"));
            }
        }

        let k = &self.criteria;
        unknown(&mut e, "criteria.", &k.extra);
        if !CRITERION_KINDS.contains(&k.kind.as_str()) {
            e.push(format!("criteria.kind: expected one of {}, got `{}`", CRITERION_KINDS.join(", "), k.kind));
        }
        if k.order < 1 {
            e.push("criteria.order: must be at least 1".into());
        }
        if k.max_order < 1 {
            e.push("criteria.max_order: must be at least 1".into());
        }
        check_p(&mut e, "criteria.p0".into(), k.p0);
        for (i, &p) in k.p_samples.iter().enumerate() {
            check_p(&mut e, format!("criteria.p_samples.{i}"), p);
        }
        positive(&mut e, "criteria.t_window", k.t_window);
        if k.t_samples < 1 {
            e.push("criteria.t_samples: must be at least 1".into());
        }
        if k.max_composites < 1 {
            e.push("criteria.max_composites: must be at least 1".into());
        }
        if k.method != "grid" && k.method != "gaussian_closed_form" {
            e.push(format!("criteria.method: expected `grid` or `gaussian_closed_form`, got `{}`", k.method));
        }
        if k.method == "gaussian_closed_form" && q.kind != "gaussian" {
            e.push("criteria.method: the closed form needs quantum.kind = gaussian".into());
        }

        let v = &self.evolution;
        unknown(&mut e, "evolution.", &v.extra);
        match v.t_window.as_slice() {
            [a, b] if *a >= 0.0 && b > a && b.is_finite() => {}
            _ => e.push(format!("evolution.t_window: expected [start, end] with 0 <= start < end, got {:?}", v.t_window)),
        }
        if v.samples < 1 {
            e.push("evolution.samples: must be at least 1".into());
        }
        if v.p_list.is_empty() {
            e.push("evolution.p_list: must not be empty".into());
        }
        for (i, &p) in v.p_list.iter().enumerate() {
            check_p(&mut e, format!("evolution.p_list.{i}"), p);
        }
        if v.order < 1 {
            e.push("evolution.order: must be at least 1".into());
        }
        if v.steps < 1 {
            e.push("evolution.steps: must be at least 1".into());
        }

        let sc = &self.scan;
        unknown(&mut e, "scan.", &sc.extra);
        if sc.points < 1 {
            e.push("scan.points: must be at least 1".into());
        }
        if !sc.start.is_finite() || !sc.stop.is_finite() {
            e.push("scan.start, scan.stop: must be finite".into());
        }
        if sc.parameter.is_empty() {
            e.push("scan.parameter: must name a config leaf".into());
        }
        if sc.orders.iter().any(|&m| m < 1) {
            e.push("scan.orders: orders must be at least 1".into());
        }
        if sc.max_order < 1 {
            e.push("scan.max_order: must be at least 1".into());
        }

        let o = &self.output;
        unknown(&mut e, "output.", &o.extra);
        for (i, f) in o.formats.iter().enumerate() {
            if !["json", "csv", "text"].contains(&f.as_str()) {
                e.push(format!("output.formats.{i}: unknown format `{f}`"));
            }
        }
        if self.workers == Some(0) {
            e.push("workers: must be at least 1".into());
        }
        e
    }

    /// Copy with every default written out explicitly.
    fn resolved(mut self) -> Self {
        let space = self.space().expect("validated system");
        let n = space.degrees();
        if self.system.polynomial.is_none() && self.system.builtin.is_none() {
            self.system.builtin = Some("harmonic_oscillator".into());
        }
        for label in space.labels() {
            self.classical.values.entry(label.clone()).or_insert(0.0);
            self.classical.margins.entry(label.clone()).or_insert(1.0);
        }
        if self.quantum.axes.is_empty() {
            self.quantum.axes = vec![AxisStateConfig::default(); n];
        }
        if self.quantum.kind == "gaussian" {
            for (i, a) in self.quantum.axes.iter_mut().enumerate() {
                a.center_q.get_or_insert(self.classical.values[&space.labels()[i]]);
                a.center_p.get_or_insert(self.classical.values[&space.labels()[i + n]]);
                a.width.get_or_insert((self.grid.hbar / 2.0).sqrt());
            }
        }
        if self.grid.points.is_empty() {
            self.grid.points = vec![if n == 1 { 4096 } else { 512 }; n];
        }
        if self.grid.lower.is_empty() {
            self.grid.lower = vec![-25.0; n];
        }
        if self.grid.upper.is_empty() {
            self.grid.upper = vec![25.0; n];
        }
        self
    }

    /// Serialized form with all defaults; re-parsing it yields an equal config.
    pub fn to_json_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn system(&self) -> Result<System> {
        let s = &self.system;
        if let Some(poly) = &s.polynomial {
            let space = PhaseSpace::new(poly.variables.clone())?;
            let h = Polynomial::from_terms(space.dim(), poly.terms.iter().map(|t| (t.coefficient, t.powers.clone())))?;
            let mut system = System::polynomial(space, h)?;
            if let (System::Polynomial { lie_order, .. }, Some(k)) = (&mut system, poly.lie_order) {
                *lie_order = k;
            }
            return Ok(system);
        }
        System::builtin(s.builtin.as_deref().unwrap_or("harmonic_oscillator"), s.mass, s.heavy_mass, s.coupling, s.omega)
    }

    pub fn classical_data(&self) -> Result<ClassicalData> {
        let space = self.system()?.phase_space();
        let values = space.labels().iter().map(|l| self.classical.values[l]).collect();
        let margins = space.labels().iter().map(|l| self.classical.margins[l]).collect();
        ClassicalData::new(values, margins)?.with_space(space)
    }

    pub fn axes(&self) -> Result<Vec<GridAxis>> {
        let g = &self.grid;
        (0..g.points.len())
            .map(|i| GridAxis::new(i, g.points[i], g.lower[i], g.upper[i]))
            .collect()
    }

    /// Gaussian parameters per axis, when the state is Gaussian.
    pub fn packets(&self) -> Result<Option<Vec<GaussianPacket>>> {
        if self.quantum.kind != "gaussian" {
            return Ok(None);
        }
        self.quantum
            .axes
            .iter()
            .map(|a| GaussianPacket::new(a.center_q.unwrap_or(0.0), a.center_p.unwrap_or(0.0), a.width.unwrap_or(1.0)))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Builds the initial grid state; relative file paths resolve against
    /// `base`.
    pub fn state(&self, base: &Path) -> Result<GridState> {
        let axes = self.axes()?;
        let hbar = self.grid.hbar;
        let factors: Vec<GridState> = if let Some(packets) = self.packets()? {
            packets
                .iter()
                .zip(&axes)
                .map(|(g, ax)| make_gaussian(g.center_q, g.center_p, g.width, *ax, hbar))
                .collect::<Result<_>>()?
        } else {
            self.quantum
                .axes
                .iter()
                .zip(&axes)
                .map(|(a, ax)| {
                    let path = base.join(a.file.as_deref().unwrap_or_default());
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
                    from_tabulated(&text, *ax, hbar)
                })
                .collect::<Result<_>>()?
        };
        if factors.len() == 1 {
            Ok(factors.into_iter().next().expect("one factor"))
        } else {
            GridState::product(&factors)
        }
    }

    pub fn criterion_kind(&self) -> CriterionKind {
        match self.criteria.kind.as_str() {
            "consistency-1" => CriterionKind::ConsistencyFirst,
            "classicality-1" => CriterionKind::ClassicalityFirst,
            "classicality-2" => CriterionKind::ClassicalitySecond,
            _ => CriterionKind::ConsistencySecond,
        }
    }

    pub fn enumeration_times(&self) -> Vec<f64> {
        default_enumeration_times(self.criteria.t_window, self.criteria.t_samples)
    }

    pub fn classicality_options(&self) -> ClassicalityOptions {
        ClassicalityOptions {
            max_composites: self.criteria.max_composites,
            exhaustive_orderings: self.criteria.exhaustive_orderings,
        }
    }

    pub fn evolution_times(&self) -> Vec<f64> {
        let w = &self.evolution.t_window;
        uniform_samples(w[0], w[1], self.evolution.samples)
    }

    pub fn evolution_options(&self) -> EvolutionOptions {
        EvolutionOptions { window_steps: self.evolution.steps, check_coverage: self.evolution.check_coverage }
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(r#"{"system": {"builtin": "harmonic_oscillator"}}"#).unwrap();
        assert_eq!(cfg.classical.margins["q"], 1.0);
        assert_eq!(cfg.grid.points, vec![4096]);
        assert_eq!(cfg.quantum.axes.len(), 1);
        assert!(cfg.state(Path::new(".")).is_ok());
        assert!(parse_config("").is_ok());
    }

    #[test]
    fn negative_margin_names_path() {
        let err = parse_config(r#"{"classical": {"margins": {"q": -1}}}"#).unwrap_err();
        let Error::Validation(list) = err else { panic!("{err}") };
        assert!(list.iter().any(|m| m.starts_with("classical.margins.q")), "{list:?}");
    }

    #[test]
    fn collects_every_error() {
        let err = parse_config(r#"{"bogus": 1, "grid": {"points": [100], "colour": 2}, "criteria": {"p0": 1.5}}"#).unwrap_err();
        let Error::Validation(list) = err else { panic!("{err}") };
        for want in ["bogus: unknown key", "grid.colour: unknown key", "grid.points.0", "criteria.p0"] {
            assert!(list.iter().any(|m| m.starts_with(want)), "missing {want} in {list:?}");
        }
    }

    #[test]
    fn coupled_round_trip() {
        let text = r#"{
            "system": {"builtin": "coupled_qp2", "mass": 1, "heavy_mass": 2, "coupling": 0.1},
            "classical": {"values": {"q": 0, "Q": 0, "p": 1, "P": 0}},
            "grid": {"points": [256, 256], "lower": [-20, -20], "upper": [20, 20]}
        }"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.quantum.axes[0].center_p, Some(1.0));
        let echoed = serde_json::to_string(&cfg.to_json_value()).unwrap();
        assert_eq!(parse_config(&echoed).unwrap(), cfg);
    }

    #[test]
    fn overrides() {
        let cfg = parse_config_with_overrides(
            "{}",
            &["quantum.axes.0.width=0.3".into(), "criteria.kind=classicality-1".into(), "seed=7".into()],
        )
        .unwrap();
        assert_eq!(cfg.quantum.axes[0].width, Some(0.3));
        assert_eq!(cfg.criteria.kind, "classicality-1");
        assert_eq!(cfg.seed, 7);
        let mut v = serde_json::json!({"a": [1]});
        assert!(apply_override(&mut v, "a.5=1").is_err());
        assert!(apply_override(&mut v, "nonsense").is_err());
    }

    #[test]
    fn polynomial_system() {
        let text = r#"{"system": {"polynomial": {"variables": ["x", "k"], "terms": [
            {"coefficient": 0.5, "powers": [0, 2]}, {"coefficient": 0.5, "powers": [2, 0]}]}},
            "classical": {"values": {"x": 1}}}"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.system().unwrap().phase_space().labels(), &["x", "k"]);
        let err = parse_config(r#"{"system": {"polynomial": {"variables": ["x", "k"], "terms": [{"coefficient": 1, "powers": [1]}]}}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("terms.0.powers"));
    }
}
