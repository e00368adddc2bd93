mod common;

use common::brute_force_product;
use diraccbd::blocks::{step_multiplier, MultiplierHistory};
use diraccbd::signal::*;
use proptest::prelude::*;
use proptest::strategy::ValueTree;

fn coef() -> impl Strategy<Value = f64> {
    prop_oneof![(-1000i32..1000).prop_map(|x| x as f64 / 8.0), -1e3f64..1e3,]
}

fn impulses(max_order: u32) -> impl Strategy<Value = ImpulseVector> {
    prop::collection::vec((0..=max_order, coef()), 0..5).prop_map(ImpulseVector::from_pairs)
}

fn sample() -> impl Strategy<Value = StepSample> {
    (coef(), coef(), impulses(4)).prop_map(|(l, r, i)| StepSample::new(l, r, i))
}

fn ulps_apart(a: f64, b: f64) -> u64 {
    if a == b {
        return 0;
    }
    if a.signum() != b.signum() {
        return u64::MAX;
    }
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

// Sums of three terms may round differently in either association; allow a
// few units in the last place of the largest operand.
fn close(a: f64, b: f64, scale: f64) -> bool {
    ulps_apart(a, b) <= 1 || (a - b).abs() <= 4.0 * f64::EPSILON * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn addition_commutes(a in sample(), b in sample()) {
        prop_assert_eq!(add_samples(&a, &b), add_samples(&b, &a));
    }

    #[test]
    fn addition_associates_to_an_ulp(a in sample(), b in sample(), c in sample()) {
        let l = add_samples(&add_samples(&a, &b), &c);
        let r = add_samples(&a, &add_samples(&b, &c));
        let scale = |f: fn(&StepSample) -> f64| f(&a).abs().max(f(&b).abs()).max(f(&c).abs());
        prop_assert!(close(l.left, r.left, scale(|s| s.left)));
        prop_assert!(close(l.right, r.right, scale(|s| s.right)));
        for o in 0..=4 {
            let s = a.impulses.get(o).abs().max(b.impulses.get(o).abs()).max(c.impulses.get(o).abs());
            prop_assert!(close(l.impulses.get(o), r.impulses.get(o), s));
        }
    }

    #[test]
    fn negation_is_an_involution(a in sample()) {
        prop_assert_eq!(negate_sample(&negate_sample(&a)), a.clone());
        let zero = add_samples(&a, &negate_sample(&a));
        prop_assert_eq!(zero.left, 0.0);
        prop_assert!(zero.impulses.is_empty());
    }

    #[test]
    fn extract_undoes_shift(v in impulses(6)) {
        let (jump, rest) = extract_order_zero(&shift_orders_up(&v));
        prop_assert_eq!(jump, 0.0);
        prop_assert_eq!(rest, v);
    }

    #[test]
    fn unit_factor_is_identity(v in impulses(6)) {
        let mut u = vec![0.0; 7];
        u[0] = 1.0;
        prop_assert_eq!(leibniz_product(&u, &v).unwrap(), v);
    }
}

fn assert_matches_oracle(got: &ImpulseVector, want: &[f64], tol: f64) {
    let scale = want.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    for (order, w) in want.iter().enumerate() {
        let g = got.get(order as u32);
        assert!((g - w).abs() <= tol * scale, "order {order}: {g} vs {w}");
    }
    assert!(got.max_order().is_none_or(|o| (o as usize) < want.len()));
}

#[test]
fn leibniz_matches_brute_force_pairing() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strat = (prop::collection::vec(-50.0f64..50.0, 4), impulses(3));
    for _ in 0..1000 {
        let (u, v) = strat.new_tree(&mut runner).unwrap().current();
        let got = leibniz_product(&u, &v).unwrap();
        assert_matches_oracle(&got, &brute_force_product(&u, &v), 1e-12);
    }
}

#[test]
fn multiplier_block_matches_brute_force_pairing() {
    // u(t) = a + b t sampled on an integer grid, so the block's divided
    // differences are exact and u' = b, u'' = u''' = 0.
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strat = (-20i32..20, -20i32..20, 3i32..50, impulses(3));
    for _ in 0..1000 {
        let (a, b, t_now, v) = strat.new_tree(&mut runner).unwrap().current();
        let (a, b) = (a as f64, b as f64);
        let u_at = |t: f64| StepSample::value(a + b * t);
        let mut hist = MultiplierHistory::new(2, 4);
        for back in (1..=3).rev() {
            let t = (t_now - back) as f64;
            hist = hist.pushed(t, &[&u_at(t), &StepSample::value(0.0)]);
        }
        let t = t_now as f64;
        let carrier = StepSample::new(0.0, 0.0, v.clone());
        let out = step_multiplier(&[&u_at(t), &carrier], &hist, t).unwrap();
        let want = brute_force_product(&[a + b * t, b, 0.0, 0.0], &v);
        assert_matches_oracle(&out.impulses, &want, 1e-12);
    }
}

#[test]
fn falling_velocity_times_second_derivative_impulse() {
    let g = 9.81;
    let v = ImpulseVector::single(2, 20.0);
    let got = leibniz_product(&[-1.44 * g, -g, 0.0], &v).unwrap();
    let want = brute_force_product(&[-1.44 * g, -g, 0.0], &v);
    assert_matches_oracle(&got, &want, 1e-12);
    assert!((got.get(2) + 282.528).abs() <= 1e-12 * 282.528);
    assert!((got.get(1) - 392.4).abs() <= 1e-12 * 392.4);
    assert_eq!(got.get(0), 0.0);
}
