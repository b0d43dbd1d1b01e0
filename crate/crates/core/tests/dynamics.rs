use std::f64::consts::PI;

use classicality::classical::System;
use classicality::evolution::{evolved_moment, split_step_evolve};
use classicality::grid::{make_gaussian, GridAxis, GridState};
use classicality::selftest::random_superposition;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn distance(a: &GridState, b: &GridState) -> f64 {
    a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn coherent_state_returns_after_one_period() {
    let s = make_gaussian(2.0, -1.0, 0.5f64.sqrt(), GridAxis::new(0, 2048, -20.0, 20.0).unwrap(), 1.0).unwrap();
    let out = split_step_evolve(&s, &System::harmonic_oscillator(), 2.0 * PI / 2000.0, 2000).unwrap();
    let fidelity = s.inner(&out).unwrap().norm_sqr();
    assert!(fidelity >= 1.0 - 1e-6, "{fidelity}");
}

#[test]
fn ehrenfest_means_follow_the_classical_flow() {
    // quadratic Hamiltonians: ⟨q⟩, ⟨p⟩ obey the classical equations exactly
    let sys = System::harmonic_oscillator();
    let s = make_gaussian(1.0, 0.5, 0.4, GridAxis::new(0, 2048, -20.0, 20.0).unwrap(), 1.0).unwrap();
    let t = 1.7;
    let out = split_step_evolve(&s, &sys, t / 800.0, 800).unwrap();
    let want = sys.trajectory(t).unwrap().eval(&[1.0, 0.5]);
    assert!((out.mean(0).unwrap() - want[0]).abs() < 1e-5);
    assert!((out.mean(1).unwrap() - want[1]).abs() < 1e-5);
}

#[test]
fn strang_splitting_is_second_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = random_superposition(GridAxis::new(0, 1024, -20.0, 20.0).unwrap(), 1.0, &mut rng).unwrap();
    let sys = System::harmonic_oscillator();
    let t = 1.0;
    let reference = split_step_evolve(&s, &sys, t / 4096.0, 4096).unwrap();
    let err = |n: usize| distance(&split_step_evolve(&s, &sys, t / n as f64, n).unwrap(), &reference);
    let (e1, e2) = (err(64), err(128));
    let ratio = e1 / e2;
    assert!((3.5..4.5).contains(&ratio), "error ratio {ratio} ({e1:.3e}, {e2:.3e})");
}

#[test]
fn free_particle_width_grows_as_expected() {
    let w = 0.5;
    let s = make_gaussian(0.0, 1.0, w, GridAxis::new(0, 2048, -40.0, 40.0).unwrap(), 1.0).unwrap();
    let sys = System::free_particle(2.0);
    for t in [1.0, 3.0] {
        let out = split_step_evolve(&s, &sys, t / 10.0, 10).unwrap();
        let mean = out.mean(0).unwrap();
        assert!((mean - t / 2.0).abs() < 1e-9);
        let want = w * w * (1.0 + (t / (2.0 * 2.0 * w * w)).powi(2));
        let got = evolved_moment(&out, 0, mean, 2).unwrap();
        assert!((got / want - 1.0).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn coupled_light_momentum_marginal_is_conserved() {
    let axes: Vec<GridAxis> = vec![GridAxis::new(0, 256, -30.0, 30.0).unwrap(), GridAxis::new(1, 256, -30.0, 30.0).unwrap()];
    let parts = [
        make_gaussian(0.0, 1.0, 0.8, axes[0], 1.0).unwrap(),
        make_gaussian(0.5, 0.0, 1.0, axes[1], 1.0).unwrap(),
    ];
    let s = GridState::product(&parts).unwrap();
    let out = split_step_evolve(&s, &System::coupled_qp2(1.0, 2.0, 0.1), 0.01, 300).unwrap();
    let (a, b) = (s.marginal(2).unwrap(), out.marginal(2).unwrap());
    let drift = a.mass.iter().zip(&b.mass).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-10, "{drift}");
    assert!((out.norm_sq() - 1.0).abs() < 1e-12);
    // the heavy particle is pushed: ⟨P⟩(t) = ⟨P⟩ − k⟨p²⟩t
    let p2 = s.quadrature_moment(2, 0.0, 2).unwrap().value;
    assert!((out.mean(3).unwrap() - (-0.1 * p2 * 3.0)).abs() < 1e-6);
}
