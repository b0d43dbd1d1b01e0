use classicality::classical::{propagate_error_margin, ClassicalData, System};
use classicality::criteria::{gaussian_fastpath, sufficient_consistency_order};
use classicality::gaussian::GaussianPacket;
use classicality::grid::{make_gaussian, GridAxis};
use classicality::poly::{poisson_bracket, Polynomial};
use classicality::selftest::random_superposition;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn poly(nvars: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((-3.0..3.0f64, prop::collection::vec(0u32..3, nvars)), 1..5)
        .prop_map(move |terms| Polynomial::from_terms(nvars, terms).unwrap())
}

fn close(a: &Polynomial, b: &Polynomial) -> bool {
    let scale = 1.0 + a.max_abs_coefficient().max(b.max_abs_coefficient());
    (a - b).max_abs_coefficient() <= 1e-10 * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_antisymmetric(f in poly(4), g in poly(4)) {
        let fg = poisson_bracket(&f, &g).unwrap();
        let gf = poisson_bracket(&g, &f).unwrap();
        prop_assert!(close(&fg, &-&gf));
    }

    #[test]
    fn bracket_obeys_leibniz(f in poly(2), g in poly(2), h in poly(2)) {
        let lhs = poisson_bracket(&f, &(&g * &h)).unwrap();
        let rhs = &(&poisson_bracket(&f, &g).unwrap() * &h) + &(&g * &poisson_bracket(&f, &h).unwrap());
        prop_assert!(close(&lhs, &rhs));
    }

    #[test]
    fn bracket_obeys_jacobi(f in poly(2), g in poly(2), h in poly(2)) {
        let b = |x: &Polynomial, y: &Polynomial| poisson_bracket(x, y).unwrap();
        let sum = &(&b(&f, &b(&g, &h)) + &b(&g, &b(&h, &f))) + &b(&h, &b(&f, &g));
        prop_assert!(close(&sum, &Polynomial::zero(2)));
    }

    #[test]
    fn margins_grow_with_initial_margins(
        f in poly(4),
        values in prop::collection::vec(-2.0..2.0f64, 4),
        margins in prop::collection::vec(0.01..1.0f64, 4),
        factor in 1.0..3.0f64,
    ) {
        let small = ClassicalData::new(values.clone(), margins.clone()).unwrap();
        let big = ClassicalData::new(values, margins.iter().map(|d| d * factor).collect()).unwrap();
        prop_assert!(propagate_error_margin(&f, &big) >= propagate_error_margin(&f, &small) * (1.0 - 1e-12));
    }

    #[test]
    fn central_moment_norms_increase_with_order(seed in 0u64..1000, offset in -1.0..1.0f64) {
        // power-mean inequality: ⟨|x−c|^{2M}⟩^{1/2M} is non-decreasing in M
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_superposition(GridAxis::new(0, 512, -30.0, 30.0).unwrap(), 1.0, &mut rng).unwrap();
        for var in 0..2 {
            let c = s.mean(var).unwrap() + offset;
            let norms: Vec<f64> = (1..=5u32)
                .map(|m| s.quadrature_moment(var, c, 2 * m).unwrap().value.powf(1.0 / (2.0 * m as f64)))
                .collect();
            for w in norms.windows(2) {
                prop_assert!(w[1] >= w[0] * (1.0 - 1e-12), "{norms:?}");
            }
        }
    }

    #[test]
    fn classicality_pass_is_monotone(width in 0.2..2.0f64, dq in 0.3..3.0f64, dp in 0.3..3.0f64, grow in 1.0..2.0f64) {
        let sys = System::harmonic_oscillator();
        let data = ClassicalData::new(vec![0.5, -0.5], vec![dq, dp]).unwrap();
        let g = [GaussianPacket::new(0.5, -0.5, width).unwrap()];
        let times = [1.0, 2.0, 3.0];
        let pass = |d: &ClassicalData, m| gaussian_fastpath(&g, d, &sys, m, &times, 1.0).unwrap().passed();
        let wider = data.with_margins(vec![dq * grow, dp * grow]).unwrap();
        for m in 1..=6u32 {
            if pass(&data, m) {
                for lower in 1..m {
                    prop_assert!(pass(&data, lower), "pass at {m} but not {lower}");
                }
                prop_assert!(pass(&wider, m));
            }
        }
    }

    #[test]
    fn sufficient_order_is_monotone_in_margins(width in 0.3..1.5f64, dq in 0.3..3.0f64, dp in 0.3..3.0f64) {
        let s = make_gaussian(0.0, 0.0, width, GridAxis::new(0, 1024, -30.0, 30.0).unwrap(), 1.0).unwrap();
        let data = ClassicalData::new(vec![0.0, 0.0], vec![dq, dp]).unwrap();
        let wider = data.with_margins(vec![dq * 1.5, dp * 1.5]).unwrap();
        let m = sufficient_consistency_order(&s, &data, 8).unwrap();
        prop_assert!(sufficient_consistency_order(&s, &wider, 8).unwrap() >= m);
    }
}
