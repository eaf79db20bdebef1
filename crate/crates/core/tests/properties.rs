use proptest::prelude::*;

use memattack_core::bits;
use memattack_core::box_lab::{
    bell_value, bias_box, bias_float_box, build_exact_box, build_quantum_box, quantum_eps, AnyBox, BoxParams,
};
use memattack_core::hash::{exact_attack_setup, is_almost_balanced, HashFunction, PivotalProfile, ZeroCountTree};
use memattack_core::system::{alice_marginal_at, ProductSystem, SystemEvaluator};
use memattack_core::value::{decimal_string, rat, Number, Rat};

fn eps_strategy() -> impl Strategy<Value = Rat> {
    (2i64..=40).prop_flat_map(|q| (1i64..=q / 2).prop_map(move |p| rat(p, q)))
}

fn balanced_function() -> impl Strategy<Value = HashFunction> {
    (1usize..=10, any::<u64>())
        .prop_map(|(n, seed)| HashFunction::random(n, seed).unwrap())
        .prop_filter("almost balanced", is_almost_balanced)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn biased_halves_average_to_base(n in 2usize..=6, eps in eps_strategy()) {
        let base = build_exact_box(n, &eps).unwrap();
        let b0 = bias_box(&base, 0, &eps).unwrap();
        let b1 = bias_box(&base, 1, &eps).unwrap();
        for i in 0..base.cells().len() {
            prop_assert_eq!((&b0.cells()[i] + &b1.cells()[i]) / rat(2, 1), base.cells()[i].clone());
        }
    }

    #[test]
    fn bias_keeps_bell_value_and_bob_marginal(n in 2usize..=6, eps in eps_strategy(), sigma in 0u8..2) {
        let base = build_exact_box(n, &eps).unwrap();
        let b = bias_box(&base, sigma, &eps).unwrap();
        prop_assert_eq!(bell_value(&b), bell_value(&base));
        prop_assert_eq!(bell_value(&b), Number::Exact(rat(2 * n as i64, 1) * &eps));
        b.check_invariants().unwrap();
        for a in 0..n {
            for bob in 0..n {
                for y in 0..2 {
                    prop_assert_eq!(b.bob_marginal(a, bob, y), rat(1, 2));
                }
                let towards = b.alice_marginal(a, bob, sigma as usize);
                prop_assert_eq!(towards, rat(1, 2) + &eps);
            }
        }
    }

    #[test]
    fn unbiased_cells_stay_above_half_eps(n in 2usize..=8, eps in eps_strategy()) {
        let b = build_exact_box(n, &eps).unwrap();
        let floor = &eps / rat(2, 1);
        prop_assert!(b.cells().iter().all(|c| *c >= floor));
    }

    #[test]
    fn pivotal_index_exists_with_large_delta(f in balanced_function()) {
        let n = f.n();
        let profile = PivotalProfile::build(&f).unwrap();
        let threshold = rat(2, 3 * n as i64);
        for x in 0..1usize << n {
            let p = profile.pivot(x).unwrap();
            prop_assert!(p.delta(n) >= threshold);
        }
    }

    #[test]
    fn pivot_depends_only_on_prefix(f in balanced_function(), x in any::<usize>(), tail in any::<usize>()) {
        let n = f.n();
        let x = x & ((1 << n) - 1);
        let p = PivotalProfile::build(&f).unwrap().pivot(x).unwrap();
        // Keep the first i − 1 bits, replace the rest.
        let keep = p.index - 1;
        let low = n - keep;
        let other = (bits::prefix(x, keep, n) << low) | (tail & ((1 << low) - 1));
        let q = PivotalProfile::build(&f).unwrap().pivot(other).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn zero_counts_add_up(n in 1usize..=10, seed in any::<u64>()) {
        let f = HashFunction::random(n, seed).unwrap();
        let tree = ZeroCountTree::new(&f);
        prop_assert_eq!(tree.zeros(0, 0) as u64, f.zero_count());
        for len in 0..n {
            for p in 0..1usize << len {
                prop_assert_eq!(tree.zeros(len, p), tree.zeros(len + 1, 2 * p) + tree.zeros(len + 1, 2 * p + 1));
            }
        }
        for x in 0..1usize << n {
            prop_assert_eq!(tree.zeros(n, x), 1 - f.eval(x) as u32);
        }
    }

    #[test]
    fn attacked_parts_are_normalized(seed in any::<u64>(), u in any::<usize>(), v in any::<usize>()) {
        let Ok(f) = HashFunction::random(3, seed) else { unreachable!() };
        prop_assume!(is_almost_balanced(&f));
        let setup = exact_attack_setup(&f, 2, &rat(1, 8)).unwrap();
        let u = bits::settings_of(u % 8, 3, 2);
        let v = bits::settings_of(v % 8, 3, 2);
        for z in 0..2 {
            let part = setup.part(z).unwrap();
            let mut total = rat(0, 1);
            for x in 0..8 {
                for y in 0..8 {
                    let p = part.evaluate(x, y, &u, &v);
                    prop_assert!(p >= rat(0, 1));
                    total += p;
                }
            }
            prop_assert_eq!(total, part.unit());
            // Closed-form and summed marginals agree at this input.
            let summed = alice_marginal_at(&part, &u, &v);
            prop_assert_eq!(summed, part.alice_output_distribution());
        }
    }

    #[test]
    fn product_marginal_is_uniform(n in 1usize..=4, u in any::<usize>(), v in any::<usize>()) {
        let b = build_exact_box(3, &rat(1, 8)).unwrap();
        let sys = ProductSystem::iid(&b, n).unwrap();
        let count = 3usize.pow(n as u32);
        let u = bits::settings_of(u % count, n, 3);
        let v = bits::settings_of(v % count, n, 3);
        let m = alice_marginal_at(&sys, &u, &v);
        let expected = sys.unit() / rat(1i64 << n, 1);
        prop_assert!(m.iter().all(|p| *p == expected));
    }

    #[test]
    fn decimal_rendering_is_close(p in -10_000i64..10_000, q in 1i64..10_000) {
        let r = rat(p, q);
        let s = decimal_string(&r, 15);
        let parsed: f64 = s.parse().unwrap();
        prop_assert!((parsed - p as f64 / q as f64).abs() <= 1e-12 * (1.0 + (p as f64 / q as f64).abs()));
    }

    #[test]
    fn number_json_round_trips(p in -1000i64..1000, q in 1i64..1000) {
        let n = Number::Exact(rat(p, q));
        let json = serde_json::to_string(&n).unwrap();
        let back: Number = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, n);
    }
}

#[test]
fn quantum_and_rational_share_structure() {
    for n in 2..=6 {
        let q = build_quantum_box(n).unwrap();
        let eps = quantum_eps(n);
        let r = build_exact_box(n, &rat(1, 8)).unwrap();
        assert_eq!(q.n_settings(), r.n_settings());
        assert!(AnyBox::Float(q.clone()).check_invariants().is_ok());
        for sigma in 0..2 {
            let b = bias_float_box(&q, sigma, eps).unwrap();
            assert!((bell_value(&b).to_f64() - bell_value(&q).to_f64()).abs() < 1e-12);
            assert!((bell_value(&q).to_f64() - 2.0 * n as f64 * eps).abs() < 1e-12);
            for a in 0..n {
                for bob in 0..n {
                    assert!((b.alice_marginal(a, bob, sigma as usize) - (0.5 + eps)).abs() < 1e-12);
                    assert!((b.bob_marginal(a, bob, 0) - 0.5).abs() < 1e-12);
                }
            }
        }
    }
    assert!(BoxParams::quantum(1).is_err());
}
