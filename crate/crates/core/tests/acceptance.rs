//! End-to-end acceptance checks. Prints one line per criterion and exits
//! nonzero if any of them fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use classicality::classical::{
    default_enumeration_times, monte_carlo_margin_check, propagate_error_margin, ClassicalData, SequenceSpec, System,
};
use classicality::commands::{execute, Command, RunOptions};
use classicality::config::parse_config;
use classicality::criteria::{fundamental_sequences, gaussian_fastpath};
use classicality::evolution::{uniform_samples, verify_consistency_over_time, EvolutionOptions, EvolutionRecord};
use classicality::gaussian::{double_factorial_odd, GaussianPacket};
use classicality::grid::{make_gaussian, GridAxis, GridState};
use classicality::kets::{apply_error_factor, apply_linear_factor, mixed_error_ket_ordered, spread_probability_guarantee_check, ErrorKet};
use classicality::selftest::random_superposition;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn factorial(n: u128) -> u128 {
    (1..=n).product()
}

fn gaussian_moments() -> Outcome {
    let w = 0.7;
    let s = make_gaussian(0.0, 0.0, w, GridAxis::new(0, 4096, -20.0, 20.0).map_err(err)?, 1.0).map_err(err)?;
    let mut worst = 0.0f64;
    for m in 1..=6u32 {
        let ratio = s.quadrature_moment(0, 0.0, 2 * m).map_err(err)?.value / w.powi(2 * m as i32);
        worst = worst.max((ratio / double_factorial_odd(m) - 1.0).abs());
        let m = u128::from(m);
        let coefficient = factorial(2 * m - 1) / (2u128.pow(m as u32 - 1) * factorial(m - 1));
        let exact = factorial(2 * m - 1) % (2u128.pow(m as u32 - 1) * factorial(m - 1)) == 0;
        let dfact: u128 = (1..=m).map(|k| 2 * k - 1).product();
        ensure(exact && coefficient == dfact, || format!("coefficient mismatch at M={m}: {coefficient} vs {dfact}"))?;
    }
    ensure(worst < 1e-8, || format!("moment relative error {worst:.2e}"))?;
    Ok(format!("max relative error {worst:.1e}; integer coefficients equal (2M-1)!! for M=1..6"))
}

fn sequence_enumeration() -> Outcome {
    let times = default_enumeration_times(2.0 * PI, 8);
    let ho = fundamental_sequences(&System::harmonic_oscillator(), &times).map_err(err)?;
    let want_ho: BTreeSet<_> = [SequenceSpec::single(0), SequenceSpec::single(1)].into();
    ensure(ho == want_ho, || format!("oscillator sequences {ho:?}"))?;
    let sys = System::coupled_qp2(1.0, 2.0, 0.1);
    let got = fundamental_sequences(&sys, &default_enumeration_times(5.0, 8)).map_err(err)?;
    let space = sys.phase_space();
    let labels: BTreeSet<String> = got.iter().map(|s| s.label(&space)).collect();
    let want: BTreeSet<String> = ["(q)", "(p)", "(Q)", "(P)", "(p,p)", "(Q,p)", "(p,P)", "(p,p,p)"]
        .into_iter()
        .map(String::from)
        .collect();
    ensure(labels == want, || format!("coupled sequences {labels:?}"))?;
    Ok(format!("oscillator {{(q),(p)}}; coupled {}", labels.into_iter().collect::<Vec<_>>().join(" ")))
}

/// Term-by-term margins of the coupled system, written out by hand from the
/// closed-form flow.
fn coupled_margin_terms(m: f64, big_m: f64, k: f64, t: f64, v: &[f64], d: &[f64]) -> [f64; 4] {
    let (_q, big_q, p, big_p) = (v[0], v[1], v[2], v[3]);
    let (dq, d_big_q, dp, d_big_p) = (d[0], d[1], d[2], d[3]);
    let delta_big_q = d_big_q + (t / big_m).abs() * d_big_p + (k * p * t * t / big_m).abs() * dp + (k * t * t / (2.0 * big_m)).abs() * dp * dp;
    let delta_big_p = d_big_p + (2.0 * k * p * t).abs() * dp + (k * t).abs() * dp * dp;
    let delta_q = dq
        + ((1.0 / m + 2.0 * k * big_q) * t + k * big_p * t * t / big_m - k * k * p * p * t.powi(3) / big_m).abs() * dp
        + (2.0 * k * p * t).abs() * d_big_q
        + (k * p * t * t / big_m).abs() * d_big_p
        + (2.0 * k * t).abs() * d_big_q * dp
        + (k * t * t / big_m).abs() * d_big_p * dp
        + (k * k * p * t.powi(3) / big_m).abs() * dp * dp
        + (k * k * t.powi(3) / (3.0 * big_m)).abs() * dp.powi(3);
    [delta_q, delta_big_q, dp, delta_big_p]
}

fn margin_formulas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (m, big_m, k) = (1.0, 2.0, 0.1);
    let sys = System::coupled_qp2(m, big_m, k);
    let mut worst = 0.0f64;
    let mut mc_violations = 0;
    for _ in 0..5 {
        let t = rng.random_range(0.1..5.0);
        let values: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let margins: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..0.5)).collect();
        let data = ClassicalData::new(values.clone(), margins.clone()).map_err(err)?;
        let traj = sys.trajectory(t).map_err(err)?;
        let want = coupled_margin_terms(m, big_m, k, t, &values, &margins);
        for (f, w) in traj.components.iter().zip(want) {
            worst = worst.max((propagate_error_margin(f, &data) / w - 1.0).abs());
        }
        let mc = monte_carlo_margin_check(&sys, &data, t, 10_000, rng.random()).map_err(err)?;
        mc_violations += mc.violations;
    }
    ensure(worst < 1e-12, || format!("margin relative error {worst:.2e}"))?;
    ensure(mc_violations == 0, || format!("{mc_violations} Monte-Carlo violations"))?;
    Ok(format!("5 points, max relative error {worst:.1e}; 0 violations in 5x10^4 samples"))
}

fn evolve(state: &GridState, data: &ClassicalData, sys: &System, window: f64, ps: &[f64], order: u32) -> Result<EvolutionRecord, String> {
    verify_consistency_over_time(state, data, sys, &uniform_samples(0.0, window, 50), ps, order, &EvolutionOptions::default())
        .map_err(err)
}

fn summary(r: &EvolutionRecord) -> Result<String, String> {
    let a = &r.aggregate;
    ensure(a.violations == 0, || format!("{} of {} interval checks failed", a.violations, a.checks))?;
    ensure(r.samples.len() == 50, || format!("{} samples", r.samples.len()))?;
    Ok(format!("{} checks over {} samples, 0 violations, min slack {:.4}", a.checks, r.samples.len(), a.min_slack))
}

fn first_order_oscillator() -> Outcome {
    let sys = System::harmonic_oscillator();
    let state = make_gaussian(1.0, 0.0, 0.5, GridAxis::new(0, 4096, -25.0, 25.0).map_err(err)?, 1.0).map_err(err)?;
    let data = ClassicalData::new(vec![1.0, 0.0], vec![1.5, 1.5]).map_err(err)?;
    let rec = evolve(&state, &data, &sys, 4.0 * PI, &[0.5, 0.9, 0.99], 1)?;
    // at P = 0.99 the half-width is exactly 10 δ(t)
    for s in &rec.samples {
        for v in &s.variables {
            let c = v.checks.iter().find(|c| c.p_required == 0.99).ok_or("missing P=0.99")?;
            let ratio = (c.interval_hi - v.classical_value) / v.margin;
            ensure((ratio - 10.0).abs() < 1e-12, || format!("half-width ratio {ratio}"))?;
        }
    }
    summary(&rec)
}

fn tenth_order_oscillator() -> Outcome {
    let (width, margin) = (1.0f64, 3.0f64);
    let sys = System::harmonic_oscillator();
    let coefficient = double_factorial_odd(10);
    // the Gaussian conditions at M = 10, with either momentum-width convention
    for momentum_width in [1.0 / (2.0 * width), 1.0 / (2f64.sqrt() * width)] {
        ensure(coefficient * width.powi(20) <= margin.powi(20), || "position condition fails".into())?;
        ensure(coefficient * momentum_width.powi(20) <= margin.powi(20), || "momentum condition fails".into())?;
    }
    let data = ClassicalData::new(vec![1.0, 0.0], vec![margin, margin]).map_err(err)?;
    let g = [GaussianPacket::new(1.0, 0.0, width).map_err(err)?];
    let report = gaussian_fastpath(&g, &data, &sys, 10, &default_enumeration_times(2.0 * PI, 8), 1.0).map_err(err)?;
    ensure(report.passed(), || "tenth-order classicality fails in closed form".into())?;
    let factor = 0.01f64.powf(-1.0 / 20.0);
    ensure((factor - 1.2589).abs() < 1e-4, || format!("factor {factor}"))?;
    ensure((1.0 / factor * 100.0).round() / 100.0 == 0.79 && (factor - 1.25).abs() < 0.01, || format!("factor {factor}"))?;
    let state = make_gaussian(1.0, 0.0, width, GridAxis::new(0, 4096, -25.0, 25.0).map_err(err)?, 1.0).map_err(err)?;
    let rec = evolve(&state, &data, &sys, 4.0 * PI, &[0.99], 10)?;
    Ok(format!("factor {factor:.4}; {}", summary(&rec)?))
}

fn coupled_system() -> Outcome {
    let sys = System::coupled_qp2(1.0, 2.0, 0.1);
    let hbar = 1.0;
    let (wq, w_big_q) = (2.0, 1.0);
    let values = vec![0.0, 0.0, 0.5, 0.2];
    let margins = vec![2.1, 1.1, 0.6, 0.75];
    // Gaussian conditions, including the sixth-moment row for p
    let textbook_p = 15f64.powf(1.0 / 6.0) * hbar / (2f64.sqrt() * wq);
    let exact_p = (15.0 * (hbar / (2.0 * wq)).powi(6)).powf(1.0 / 6.0);
    ensure(wq <= margins[0] && textbook_p <= margins[2] && exact_p <= margins[2], || "light-particle conditions fail".into())?;
    ensure(w_big_q <= margins[1] && hbar / (2f64.sqrt() * w_big_q) <= margins[3], || "heavy-particle conditions fail".into())?;
    let data = ClassicalData::new(values.clone(), margins).map_err(err)?;
    let packets = [GaussianPacket::new(values[0], values[2], wq).map_err(err)?, GaussianPacket::new(values[1], values[3], w_big_q).map_err(err)?];
    let report = gaussian_fastpath(&packets, &data, &sys, 1, &default_enumeration_times(5.0, 8), hbar).map_err(err)?;
    ensure(report.passed() && report.rows.len() == 8, || "first-order classicality fails in closed form".into())?;
    let axes = [GridAxis::new(0, 1024, -80.0, 80.0).map_err(err)?, GridAxis::new(1, 1024, -40.0, 40.0).map_err(err)?];
    let parts: Vec<GridState> = packets
        .iter()
        .zip(axes)
        .map(|(g, ax)| make_gaussian(g.center_q, g.center_p, g.width, ax, hbar))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let state = GridState::product(&parts).map_err(err)?;
    let rec = evolve(&state, &data, &sys, 5.0, &[0.99], 1)?;
    let drift = rec.aggregate.conserved_marginal_drift.ok_or("no drift recorded")?;
    ensure(drift < 1e-10, || format!("light momentum marginal drift {drift:.2e}"))?;
    ensure(rec.samples.iter().all(|s| s.variables.len() == 4), || "missing variables".into())?;
    Ok(format!("{}; momentum marginal drift {drift:.1e}", summary(&rec)?))
}

fn spread_guarantee() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let axis = GridAxis::new(0, 1024, -30.0, 30.0).map_err(err)?;
    let (mut cases, mut failures) = (0, 0);
    for _ in 0..100 {
        let s = random_superposition(axis, 1.0, &mut rng).map_err(err)?;
        let var = rng.random_range(0..2);
        let center = s.mean(var).map_err(err)? + rng.random_range(-1.0..1.0);
        for n in 1..=3 {
            for p in [0.5, 0.9, 0.99] {
                cases += 1;
                failures += usize::from(!spread_probability_guarantee_check(&s, var, center, n, p).map_err(err)?.holds);
            }
        }
    }
    ensure(failures == 0, || format!("{failures} counterexamples"))?;
    Ok(format!("{cases} cases, 0 counterexamples"))
}

fn max_rel(a: &GridState, b: &GridState) -> f64 {
    let scale = a.norm_sq().sqrt().max(b.norm_sq().sqrt()).max(1e-300);
    a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt() / scale
}

fn error_ket_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let axis = GridAxis::new(0, 1024, -30.0, 30.0).map_err(err)?;
    let one = Complex64::new(1.0, 0.0);
    let (mut worst, mut cs_worst, mut pairs) = (0.0f64, f64::NEG_INFINITY, 0);
    for _ in 0..100 {
        let s = random_superposition(axis, 1.0, &mut rng).map_err(err)?;
        let (a, b, c) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-3.0..3.0));
        let e_q = apply_error_factor(&s, 0, a).map_err(err)?.state;
        let e_p = apply_error_factor(&s, 1, b).map_err(err)?.state;
        let sum = apply_linear_factor(&s, &[(0, 1.0), (1, 1.0)], a + b).map_err(err)?;
        let mut rhs = e_q.clone();
        rhs.add_scaled(&e_p, one).map_err(err)?;
        worst = worst.max(max_rel(&sum, &rhs));
        let scaled = apply_linear_factor(&s, &[(0, c)], c * a).map_err(err)?;
        let mut rhs = e_q.clone();
        rhs.scale(Complex64::new(c, 0.0));
        worst = worst.max(max_rel(&scaled, &rhs));
        let data = ClassicalData::new(vec![a, b], vec![1.0, 1.0]).map_err(err)?;
        let mut lhs = ErrorKet::identity(&s).then(1, 0.0).and_then(|k| k.then(0, 0.0)).map_err(err)?.state;
        lhs.add_scaled(&s, Complex64::new(-a * b, 0.0)).map_err(err)?;
        let mixed = mixed_error_ket_ordered(&s, &[1, 0], &data).map_err(err)?;
        let mut rhs = mixed.state.clone();
        rhs.add_scaled(&e_p, Complex64::new(a, 0.0)).map_err(err)?;
        rhs.add_scaled(&e_q, Complex64::new(b, 0.0)).map_err(err)?;
        worst = worst.max(max_rel(&lhs, &rhs));
        let kets = [&e_q, &e_p, &mixed.state, &lhs];
        for x in kets {
            for y in kets {
                let lhs = x.inner(y).map_err(err)?.norm_sqr();
                let rhs = x.norm_sq() * y.norm_sq();
                cs_worst = cs_worst.max(lhs / rhs - 1.0);
                pairs += 1;
            }
        }
    }
    ensure(worst < 1e-9, || format!("identity relative error {worst:.2e}"))?;
    ensure(cs_worst <= 1e-12, || format!("Cauchy-Schwarz excess {cs_worst:.2e}"))?;
    Ok(format!("max identity error {worst:.1e}; {pairs} pairs, worst Cauchy-Schwarz excess {cs_worst:.1e}"))
}

fn monotonicity() -> Outcome {
    let cfg = parse_config(
        r#"{"system": {"builtin": "harmonic_oscillator"},
            "classical": {"values": {"q": 0, "p": 0}, "margins": {"q": 1, "p": 1}},
            "grid": {"points": [1024]},
            "criteria": {"method": "gaussian_closed_form"},
            "scan": {"parameter": "quantum.axes.0.width", "start": 0.1, "stop": 2.0, "points": 40, "orders": [1, 2, 3], "max_order": 6},
            "output": {"formats": ["json", "csv"]}}"#,
    )
    .map_err(err)?;
    let dir = tempfile::tempdir().map_err(err)?;
    let opts = RunOptions { out_dir: Some(dir.path().to_path_buf()), ..RunOptions::default() };
    let outcome = execute(Command::Scan, &cfg, &opts);
    ensure(outcome.exit_code != 2, || outcome.summary.clone())?;
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).map_err(err)?).map_err(err)?;
    ensure(report["contiguous"] == true, || "pass region is not contiguous".into())?;
    let rows = report["rows"].as_array().ok_or("no rows")?;
    ensure(rows.len() == 40, || format!("{} rows", rows.len()))?;
    let sys = System::harmonic_oscillator();
    let times = default_enumeration_times(2.0 * PI, 8);
    let mut passing = Vec::new();
    for r in rows {
        let width = r["value"].as_f64().ok_or("value")?;
        let passes: Vec<bool> = r["passes"].as_array().ok_or("passes")?.iter().map(|p| p[1] == true).collect();
        // pass at M implies pass at every lower order
        for (i, &p) in passes.iter().enumerate() {
            ensure(!p || passes[..i].iter().all(|&x| x), || format!("order monotonicity broken at width {width}"))?;
        }
        // widening any single margin keeps a passing point passing
        if passes[0] {
            passing.push(width);
            for i in 0..2 {
                let mut d = vec![1.0, 1.0];
                d[i] = 1.3;
                let data = ClassicalData::new(vec![0.0, 0.0], d).map_err(err)?;
                let g = [GaussianPacket::new(0.0, 0.0, width).map_err(err)?];
                let ok = gaussian_fastpath(&g, &data, &sys, 1, &times, 1.0).map_err(err)?.passed();
                ensure(ok, || format!("margin monotonicity broken at width {width}"))?;
            }
        }
    }
    ensure(!passing.is_empty(), || "empty pass region".into())?;
    let (lo, hi) = (passing[0], passing[passing.len() - 1]);
    ensure(lo >= 0.5 - 1e-12 && hi <= 1.0 + 1e-12, || format!("pass region [{lo}, {hi}] outside [0.5, 1]"))?;
    Ok(format!("pass region width in [{lo:.4}, {hi:.4}], contiguous, monotone in M and in each margin"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("gaussian moment identity", gaussian_moments, Duration::from_secs(1)),
        ("sequence enumeration", sequence_enumeration, Duration::from_secs(1)),
        ("classical margin formulas", margin_formulas, Duration::from_secs(10)),
        ("first-order oscillator evolution", first_order_oscillator, Duration::from_secs(60)),
        ("tenth-order oscillator evolution", tenth_order_oscillator, Duration::from_secs(60)),
        ("coupled system evolution", coupled_system, Duration::from_secs(300)),
        ("spread guarantee", spread_guarantee, Duration::from_secs(30)),
        ("error-ket algebra", error_ket_algebra, Duration::from_secs(30)),
        ("monotonicity", monotonicity, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > *budget => Err(format!("{d}; took {:.1} s, budget {} s", elapsed.as_secs_f64(), budget.as_secs())),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}; {:.2} s)", i + 1, elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why}; {:.2} s)", i + 1, elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
