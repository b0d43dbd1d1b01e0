//! Oracle cross-checks run by the `selftest` command: closed forms against
//! grid quadrature, Lie series against closed-form flows, and sampled
//! margin containment.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classical::{lie_series_trajectory, monte_carlo_margin_check, ClassicalData, SequenceSpec, System};
use crate::criteria::{classicality_first, fundamental_sequences, gaussian_fastpath, ClassicalityOptions};
use crate::error::Result;
use crate::evolution::split_step_evolve;
use crate::gaussian::{double_factorial_odd, GaussianPacket};
use crate::grid::{make_gaussian, GridAxis, GridState, Rep};
use crate::kets::spread_probability_guarantee_check;

#[derive(Debug, Clone, Serialize)]
pub struct SelftestCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<SelftestCheck>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(4);
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!("{:<width$}  {}  {}\n", c.name, if c.pass { "pass" } else { "FAIL" }, c.detail));
        }
        s.push_str(&format!("selftest: {}\n", if self.passed() { "PASS" } else { "FAIL" }));
        s
    }
}

/// Smooth random state: a few Gaussian bumps with random centers, widths,
/// momenta and complex weights, normalized on `axis`.
pub fn random_superposition(axis: GridAxis, hbar: f64, rng: &mut impl Rng) -> Result<GridState> {
    let span = axis.upper - axis.lower;
    let mid = 0.5 * (axis.upper + axis.lower);
    let bumps: Vec<(f64, f64, f64, Complex64)> = (0..rng.random_range(1..=4))
        .map(|_| {
            let c = mid + span * rng.random_range(-0.1..0.1);
            let w = span * rng.random_range(0.015..0.04);
            let p = rng.random_range(-2.0..2.0);
            let a = Complex64::from_polar(rng.random_range(0.2..1.0), rng.random_range(0.0..2.0 * PI));
            (c, w, p, a)
        })
        .collect();
    let amps = axis
        .positions()
        .into_iter()
        .map(|x| {
            bumps
                .iter()
                .map(|&(c, w, p, a)| a * Complex64::from_polar((-(x - c).powi(2) / (4.0 * w * w)).exp(), p * x / hbar))
                .sum()
        })
        .collect();
    GridState::from_amplitudes(vec![GridAxis { variable: 0, ..axis }], amps, vec![Rep::Position], hbar)?.normalized()
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> SelftestCheck {
    match f() {
        Ok((pass, detail)) => SelftestCheck { name: name.into(), pass, detail },
        Err(e) => SelftestCheck { name: name.into(), pass: false, detail: format!("error: {e}") },
    }
}

fn gaussian_moments() -> Result<(bool, String)> {
    let s = make_gaussian(0.0, 0.0, 0.7, GridAxis::new(0, 4096, -20.0, 20.0)?, 1.0)?;
    let mut worst = 0.0f64;
    for m in 1..=6u32 {
        let got = s.quadrature_moment(0, 0.0, 2 * m)?.value / 0.7f64.powi(2 * m as i32);
        worst = worst.max((got / double_factorial_odd(m) - 1.0).abs());
    }
    Ok((worst < 1e-8, format!("max relative error {worst:.2e}")))
}

fn sequence_sets() -> Result<(bool, String)> {
    let times: Vec<f64> = (1..=8).map(|i| i as f64 * 0.7).collect();
    let ho = fundamental_sequences(&System::harmonic_oscillator(), &times)?;
    let want_ho: BTreeSet<_> = [SequenceSpec::single(0), SequenceSpec::single(1)].into();
    let coupled = fundamental_sequences(&System::coupled_qp2(1.0, 2.0, 0.1), &times)?;
    let want: BTreeSet<_> = [vec![0], vec![1], vec![2], vec![3], vec![1, 2], vec![2, 2], vec![2, 2, 2], vec![2, 3]]
        .into_iter()
        .map(SequenceSpec::new)
        .collect::<Result<_>>()?;
    Ok((ho == want_ho && coupled == want, format!("{} + {} sequences", ho.len(), coupled.len())))
}

fn lie_series() -> Result<(bool, String)> {
    let sys = System::coupled_qp2(1.0, 2.0, 0.1);
    let t = 1.3;
    let closed = sys.trajectory(t)?;
    let lie = lie_series_trajectory(&sys.hamiltonian(), t, 8)?;
    let worst = closed
        .components
        .iter()
        .zip(&lie.components)
        .map(|(a, b)| (a - b).max_abs_coefficient())
        .fold(0.0, f64::max);
    Ok((worst < 1e-12, format!("max coefficient difference {worst:.2e}")))
}

fn margin_containment(seed: u64) -> Result<(bool, String)> {
    let sys = System::coupled_qp2(1.0, 2.0, 0.1);
    let data = ClassicalData::new(vec![0.5, -0.3, 1.0, 0.2], vec![0.2, 0.3, 0.25, 0.1])?;
    let r = monte_carlo_margin_check(&sys, &data, 2.0, 10_000, seed)?;
    Ok((r.violations == 0, format!("{} violations in {} samples, worst ratio {:.4}", r.violations, r.samples, r.worst_ratio)))
}

fn closed_form_vs_grid() -> Result<(bool, String)> {
    let g = GaussianPacket::new(0.4, -0.2, 0.6)?;
    let s = make_gaussian(g.center_q, g.center_p, g.width, GridAxis::new(0, 2048, -20.0, 20.0)?, 1.0)?;
    let data = ClassicalData::new(vec![0.5, 0.0], vec![1.0, 1.0])?;
    let sys = System::harmonic_oscillator();
    let times = [1.0, 2.0];
    let grid = classicality_first(&s, &data, &sys, 3, &times, &ClassicalityOptions::default())?;
    let closed = gaussian_fastpath(&[g], &data, &sys, 3, &times, 1.0)?;
    let worst = grid
        .rows
        .iter()
        .zip(&closed.rows)
        .map(|(a, b)| (a.norm_sq / b.norm_sq - 1.0).abs())
        .fold(0.0, f64::max);
    Ok((worst < 1e-8, format!("max relative error {worst:.2e} over {} rows", grid.rows.len())))
}

fn spread_guarantee(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = GridAxis::new(0, 1024, -30.0, 30.0)?;
    let mut failures = 0;
    let mut total = 0;
    for _ in 0..10 {
        let s = random_superposition(axis, 1.0, &mut rng)?;
        for var in 0..2 {
            let center = s.mean(var)? + rng.random_range(-0.5..0.5);
            for n in 1..=3 {
                for p in [0.5, 0.9, 0.99] {
                    total += 1;
                    failures += usize::from(!spread_probability_guarantee_check(&s, var, center, n, p)?.holds);
                }
            }
        }
    }
    Ok((failures == 0, format!("{failures} counterexamples in {total} cases")))
}

fn coherent_period() -> Result<(bool, String)> {
    let s = make_gaussian(1.5, 0.5, 0.5f64.sqrt(), GridAxis::new(0, 1024, -16.0, 16.0)?, 1.0)?;
    let steps = 1000;
    let out = split_step_evolve(&s, &System::harmonic_oscillator(), 2.0 * PI / steps as f64, steps)?;
    let fidelity = s.inner(&out)?.norm_sqr();
    Ok((fidelity >= 1.0 - 1e-6, format!("fidelity after one period 1 - {:.2e}", 1.0 - fidelity)))
}

/// Runs every oracle cross-check; `seed` drives the sampled ones.
pub fn run_selftest(seed: u64) -> Result<SelftestReport> {
    Ok(SelftestReport {
        checks: vec![
            check("gaussian_moments", gaussian_moments),
            check("fundamental_sequences", sequence_sets),
            check("lie_series_vs_closed_form", lie_series),
            check("margin_containment", || margin_containment(seed)),
            check("closed_form_vs_grid_kets", closed_form_vs_grid),
            check("spread_guarantee", || spread_guarantee(seed)),
            check("coherent_state_period", coherent_period),
        ],
    })
}
