//! Command dispatch for the CLI: each command reads a validated
//! [`RunConfig`], writes its artifacts and maps the primary report onto an
//! exit status (0 pass, 1 fail, 2 error).

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{set_path, RunConfig};
use crate::criteria::{
    classicality_first, classicality_second, consistency_first, consistency_second, gaussian_fastpath,
    gaussian_fastpath_second, sufficient_consistency_order, CriterionKind, CriterionReport,
};
use crate::error::{Error, Result};
use crate::evolution::{uniform_samples, verify_consistency_over_time};
use crate::selftest::run_selftest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Classicality,
    Evolve,
    Scan,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Check => "check",
            Self::Classicality => "classicality",
            Self::Evolve => "evolve",
            Self::Scan => "scan",
            Self::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output.dir`.
    pub out_dir: Option<PathBuf>,
    /// Overrides `seed`.
    pub seed: Option<u64>,
    /// Overrides `workers`.
    pub workers: Option<usize>,
    /// Directory that relative input paths resolve against.
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    /// Human-readable summary for stdout.
    pub summary: String,
    pub written: Vec<PathBuf>,
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

struct Produced {
    pass: bool,
    summary: String,
}

/// Runs `command` and never panics on bad input: failures become
/// `errors.json` plus exit status 2.
pub fn execute(command: Command, config: &RunConfig, options: &RunOptions) -> Outcome {
    let mut cfg = config.clone();
    if let Some(seed) = options.seed {
        cfg.seed = seed;
    }
    if let Some(w) = options.workers {
        cfg.workers = Some(w);
    }
    let dir = options.out_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let mut artifacts = match Artifacts::new(dir.clone()) {
        Ok(a) => a,
        Err(e) => {
            return Outcome { exit_code: 2, summary: format!("error: {e}"), written: Vec::new() };
        }
    };
    let result = with_pool(cfg.workers, || match command {
        Command::Check => cmd_check(&cfg, &options.base_dir, &mut artifacts),
        Command::Classicality => cmd_classicality(&cfg, &options.base_dir, &mut artifacts),
        Command::Evolve => cmd_evolve(&cfg, &options.base_dir, &mut artifacts),
        Command::Scan => cmd_scan(&cfg, &options.base_dir, &mut artifacts),
        Command::Selftest => cmd_selftest(&cfg, &mut artifacts),
    });
    match result {
        Ok(p) => Outcome { exit_code: i32::from(!p.pass), summary: p.summary, written: artifacts.written },
        Err(e) => {
            let summary = format!("error: {e}");
            let _ = artifacts.json("errors.json", &error_json(command, &e));
            Outcome { exit_code: 2, summary, written: artifacts.written }
        }
    }
}

/// Writes `errors.json` for failures that happen before a command runs,
/// such as config validation.
pub fn report_error(command: Command, error: &Error, dir: &Path) -> Outcome {
    let mut written = Vec::new();
    let mut summary = format!("error: {error}");
    match Artifacts::new(dir.to_path_buf()).and_then(|mut a| {
        a.json("errors.json", &error_json(command, error))?;
        Ok(a.written)
    }) {
        Ok(w) => written = w,
        Err(e) => summary.push_str(&format!("\n(could not write errors.json: {e})")),
    }
    Outcome { exit_code: 2, summary, written }
}

fn error_json(command: Command, e: &Error) -> Value {
    let details = match e {
        Error::Validation(list) => list.clone(),
        other => vec![other.to_string()],
    };
    json!({ "command": command.name(), "error": { "kind": e.kind(), "message": e.to_string(), "details": details } })
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}

fn envelope(command: Command, cfg: &RunConfig) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command.name()));
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("config".into(), cfg.to_json_value());
    m
}

fn finish(artifacts: &mut Artifacts, cfg: &RunConfig, mut body: serde_json::Map<String, Value>, pass: bool, text: String) -> Result<Produced> {
    body.insert("pass".into(), json!(pass));
    if cfg.wants("json") || !cfg.wants("text") {
        artifacts.json("report.json", &Value::Object(body))?;
    }
    if cfg.wants("text") {
        artifacts.write("report.txt", text.as_bytes())?;
    }
    Ok(Produced { pass, summary: text })
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn cmd_check(cfg: &RunConfig, base: &Path, artifacts: &mut Artifacts) -> Result<Produced> {
    let state = cfg.state(base)?;
    let data = cfg.classical_data()?;
    let k = &cfg.criteria;
    let first = consistency_first(&state, &data, k.p0)?;
    let second = consistency_second(&state, &data, k.order, &k.p_samples)?;
    let sufficient = sufficient_consistency_order(&state, &data, k.max_order)?;
    let pass = match cfg.criterion_kind() {
        CriterionKind::ConsistencyFirst => first.passed(),
        _ => second.passed(),
    };
    let mut body = envelope(Command::Check, cfg);
    body.insert("primary".into(), json!(primary_label(cfg)));
    body.insert("reports".into(), json!([to_value(&first)?, to_value(&second)?]));
    body.insert("sufficient_order".into(), json!(sufficient));
    let text = format!(
        "{}\n{}\nsufficient consistency order: {sufficient}\ncheck: {}\n",
        first.to_text(),
        second.to_text(),
        verdict(pass)
    );
    finish(artifacts, cfg, body, pass, text)
}

fn primary_label(cfg: &RunConfig) -> String {
    cfg.criterion_kind().to_string()
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Evaluates the first classicality criterion at a given order with the
/// configured method.
struct Evaluator<'a> {
    cfg: &'a RunConfig,
    state: Option<crate::grid::GridState>,
    data: crate::classical::ClassicalData,
    system: crate::classical::System,
    times: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(cfg: &'a RunConfig, base: &Path, closed_form: bool) -> Result<Self> {
        let state = if closed_form { None } else { Some(cfg.state(base)?) };
        Ok(Self { cfg, state, data: cfg.classical_data()?, system: cfg.system()?, times: cfg.enumeration_times() })
    }

    fn first(&self, order: u32) -> Result<CriterionReport> {
        match &self.state {
            Some(s) => classicality_first(s, &self.data, &self.system, order, &self.times, &self.cfg.classicality_options()),
            None => {
                let packets = self.cfg.packets()?.ok_or_else(|| Error::Unsupported("closed form needs Gaussian packets".into()))?;
                gaussian_fastpath(&packets, &self.data, &self.system, order, &self.times, self.cfg.grid.hbar)
            }
        }
    }

    fn second(&self, p0: f64) -> Result<CriterionReport> {
        match &self.state {
            Some(s) => classicality_second(s, &self.data, &self.system, p0, &self.times),
            None => {
                let packets = self.cfg.packets()?.ok_or_else(|| Error::Unsupported("closed form needs Gaussian packets".into()))?;
                gaussian_fastpath_second(&packets, &self.data, &self.system, p0, &self.times, self.cfg.grid.hbar)
            }
        }
    }

    /// Largest passing order up to `max_order`, stopping at the first
    /// failure. A resource-guard trip ends the search with a note.
    fn max_order(&self, max_order: u32) -> Result<(u32, Option<String>)> {
        let mut best = 0;
        for m in 1..=max_order {
            match self.first(m) {
                Ok(r) if r.passed() => best = m,
                Ok(_) => break,
                Err(Error::Resource(msg)) => return Ok((best, Some(format!("search stopped at order {m}: {msg}")))),
                Err(e) => return Err(e),
            }
        }
        Ok((best, None))
    }
}

fn cmd_classicality(cfg: &RunConfig, base: &Path, artifacts: &mut Artifacts) -> Result<Produced> {
    let closed = cfg.criteria.method == "gaussian_closed_form";
    let eval = Evaluator::new(cfg, base, closed)?;
    let k = &cfg.criteria;
    let (max_m, note) = eval.max_order(k.max_order)?;
    let first = eval.first(k.order)?;
    let second = eval.second(k.p0)?;
    let max_p0 = second.aggregate.p0.unwrap_or(0.0);
    let pass = match cfg.criterion_kind() {
        CriterionKind::ClassicalitySecond => second.passed(),
        _ => first.passed(),
    };
    let mut body = envelope(Command::Classicality, cfg);
    body.insert("primary".into(), json!(primary_label(cfg)));
    body.insert("method".into(), json!(k.method));
    body.insert("max_order".into(), json!(max_m));
    body.insert("max_p0".into(), json!(max_p0));
    if let Some(n) = &note {
        body.insert("warnings".into(), json!([n]));
    }
    body.insert("reports".into(), json!([to_value(&first)?, to_value(&second)?]));
    let mut text = format!("{}\n{}\nmax order: {max_m}\nmax p0: {max_p0:.6}\n", first.to_text(), second.to_text());
    if let Some(n) = note {
        text.push_str(&format!("warning: {n}\n"));
    }
    text.push_str(&format!("classicality: {}\n", verdict(pass)));
    finish(artifacts, cfg, body, pass, text)
}

fn cmd_evolve(cfg: &RunConfig, base: &Path, artifacts: &mut Artifacts) -> Result<Produced> {
    let state = cfg.state(base)?;
    let data = cfg.classical_data()?;
    let system = cfg.system()?;
    let e = &cfg.evolution;
    let record = verify_consistency_over_time(
        &state,
        &data,
        &system,
        &cfg.evolution_times(),
        &e.p_list,
        e.order,
        &cfg.evolution_options(),
    )?;
    if cfg.wants("csv") {
        let mut buf = Vec::new();
        record.write_csv(&mut buf)?;
        artifacts.write("evolution.csv", &buf)?;
    }
    let a = &record.aggregate;
    let pass = a.pass;
    let mut body = envelope(Command::Evolve, cfg);
    body.insert("record".into(), to_value(&record)?);
    let mut text = format!(
        "evolution of {} at order {}: {} samples, {} checks, {} violations, min slack {:.6}, norm drift {:.3e}\n",
        record.system,
        record.order,
        record.samples.len(),
        a.checks,
        a.violations,
        a.min_slack,
        a.max_norm_drift
    );
    if let Some(d) = a.conserved_marginal_drift {
        text.push_str(&format!("light momentum marginal drift: {d:.3e}\n"));
    }
    text.push_str(&format!("evolve: {}\n", verdict(pass)));
    finish(artifacts, cfg, body, pass, text)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub value: f64,
    pub max_order: u32,
    pub max_p0: f64,
    /// `(order, pass)` for every requested order.
    pub passes: Vec<(u32, bool)>,
    pub pass: bool,
}

/// Indices of the first and last passing rows, and whether the passing rows
/// form one contiguous run.
pub fn pass_region(rows: &[ScanRow]) -> (Option<(usize, usize)>, bool) {
    let idx: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| r.pass).map(|(i, _)| i).collect();
    match (idx.first(), idx.last()) {
        (Some(&a), Some(&b)) => (Some((a, b)), b - a + 1 == idx.len()),
        _ => (None, true),
    }
}

fn scan_point(base_cfg: &Value, cfg: &RunConfig, base: &Path, value: f64) -> Result<ScanRow> {
    let mut v = base_cfg.clone();
    set_path(&mut v, &cfg.scan.parameter, json!(value))?;
    let point: RunConfig = crate::config::parse_config(&v.to_string())?;
    let closed = point.quantum.kind == "gaussian";
    let eval = Evaluator::new(&point, base, closed)?;
    let (max_order, _) = eval.max_order(cfg.scan.max_order)?;
    let passes = cfg
        .scan
        .orders
        .iter()
        .map(|&m| Ok((m, eval.first(m)?.passed())))
        .collect::<Result<Vec<_>>>()?;
    let max_p0 = eval.second(point.criteria.p0)?.aggregate.p0.unwrap_or(0.0);
    let pass = passes.iter().all(|p| p.1);
    Ok(ScanRow { value, max_order, max_p0, passes, pass })
}

fn cmd_scan(cfg: &RunConfig, base: &Path, artifacts: &mut Artifacts) -> Result<Produced> {
    let sc = &cfg.scan;
    let base_cfg = cfg.to_json_value();
    let values = uniform_samples(sc.start, sc.stop, sc.points);
    // reject a bad parameter path up front rather than once per point
    set_path(&mut base_cfg.clone(), &sc.parameter, json!(sc.start))?;
    let rows: Vec<ScanRow> = values
        .par_iter()
        .map(|&v| scan_point(&base_cfg, cfg, base, v))
        .collect::<Result<_>>()?;
    if cfg.wants("csv") {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![sc.parameter.clone(), "max_order".into(), "max_p0".into()];
        header.extend(sc.orders.iter().map(|m| format!("pass_M{m}")));
        header.push("pass".into());
        w.write_record(&header)?;
        for r in &rows {
            let mut rec = vec![r.value.to_string(), r.max_order.to_string(), r.max_p0.to_string()];
            rec.extend(r.passes.iter().map(|p| p.1.to_string()));
            rec.push(r.pass.to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        artifacts.write("scan.csv", &bytes)?;
    }
    let (region, contiguous) = pass_region(&rows);
    let pass = rows.iter().all(|r| r.pass);
    let mut body = envelope(Command::Scan, cfg);
    body.insert("rows".into(), to_value(&rows)?);
    body.insert(
        "pass_region".into(),
        region.map_or(Value::Null, |(a, b)| json!([rows[a].value, rows[b].value])),
    );
    body.insert("contiguous".into(), json!(contiguous));
    let mut text = format!("{:>14}  {:>9}  {:>10}  pass\n", sc.parameter, "max_order", "max_p0");
    for r in &rows {
        text.push_str(&format!("{:>14.6}  {:>9}  {:>10.6}  {}\n", r.value, r.max_order, r.max_p0, if r.pass { "yes" } else { "no" }));
    }
    match region {
        Some((a, b)) => text.push_str(&format!(
            "pass region: [{}, {}]{}\n",
            rows[a].value,
            rows[b].value,
            if contiguous { "" } else { " (not contiguous)" }
        )),
        None => text.push_str("pass region: empty\n"),
    }
    text.push_str(&format!("scan: {}\n", verdict(pass)));
    finish(artifacts, cfg, body, pass, text)
}

fn cmd_selftest(cfg: &RunConfig, artifacts: &mut Artifacts) -> Result<Produced> {
    let report = run_selftest(cfg.seed)?;
    let pass = report.passed();
    let mut body = envelope(Command::Selftest, cfg);
    body.insert("checks".into(), to_value(&report.checks)?);
    finish(artifacts, cfg, body, pass, report.to_text())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_with_overrides;

    fn run(command: Command, overrides: &[&str]) -> (Outcome, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        let cfg = parse_config_with_overrides("{}", &o).unwrap();
        let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), ..RunOptions::default() };
        (execute(command, &cfg, &opts), dir)
    }

    #[test]
    fn check_writes_report() {
        let (out, dir) = run(Command::Check, &["grid.points.0=1024", "classical.margins.q=2", "classical.margins.p=2"]);
        assert_eq!(out.exit_code, 0, "{}", out.summary);
        let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(v["pass"], json!(true));
        assert_eq!(v["reports"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn evolve_failure_still_writes_record() {
        let (out, dir) = run(
            Command::Evolve,
            &["grid.points.0=1024", "classical.margins.q=0.1", "classical.margins.p=0.1", "evolution.samples=4", "evolution.steps=100"],
        );
        assert_eq!(out.exit_code, 1, "{}", out.summary);
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("evolution.csv").exists());
    }

    #[test]
    fn coverage_error_writes_errors_json() {
        let (out, dir) = run(Command::Check, &["grid.points.0=64", "grid.lower.0=-1", "grid.upper.0=1"]);
        assert_eq!(out.exit_code, 2);
        let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("errors.json")).unwrap()).unwrap();
        assert_eq!(v["error"]["kind"], json!("coverage"));
    }

    #[test]
    fn region_detection() {
        let row = |pass| ScanRow { value: 0.0, max_order: 0, max_p0: 0.0, passes: vec![], pass };
        assert_eq!(pass_region(&[row(false), row(true), row(true), row(false)]), (Some((1, 2)), true));
        assert_eq!(pass_region(&[row(true), row(false), row(true)]).1, false);
        assert_eq!(pass_region(&[row(false)]), (None, true));
    }
}
