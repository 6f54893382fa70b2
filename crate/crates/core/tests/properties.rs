use std::sync::{Arc, OnceLock};

use pettis_forge::{
    allocate_carriers, find_inner_dyadic, BlockLayout, BlockVector, CarrierScheme, ContinuousConfig, ContinuousModel,
    Exponent, Functional, GrowthSettings, Interval, IntervalSet, ModelConfig, PettisModel, PsiFamily, PsiSpec,
    SequenceRule,
};
use proptest::prelude::*;

fn interval() -> impl Strategy<Value = Interval> {
    (0.0f64..1.0, 0.0f64..1.0)
        .prop_filter("non-degenerate", |(a, b)| (a - b).abs() > 1e-9)
        .prop_map(|(a, b)| Interval::new(a.min(b), a.max(b)).unwrap())
}

fn interval_set() -> impl Strategy<Value = IntervalSet> {
    prop::collection::vec(interval(), 0..5).prop_map(IntervalSet::from_intervals)
}

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![Just(1.0), Just(2.0), Just(4.0), Just(f64::INFINITY)].prop_map(|p| Exponent::new(p).unwrap())
}

fn entries(depth: u32) -> impl Strategy<Value = Vec<(u32, u64, f64)>> {
    prop::collection::vec(
        (1..=depth).prop_flat_map(|n| (Just(n), 1..=1u64 << n, -5.0f64..5.0)),
        0..16,
    )
}

fn pettis16() -> &'static PettisModel {
    static M: OnceLock<PettisModel> = OnceLock::new();
    M.get_or_init(|| ModelConfig::three_quarter_power(16).build().unwrap())
}

fn continuous9() -> &'static ContinuousModel {
    static M: OnceLock<ContinuousModel> = OnceLock::new();
    M.get_or_init(|| {
        ContinuousConfig {
            psi: PsiSpec::power(0.25),
            k: 1.0,
            p: Exponent::TWO,
            rule: SequenceRule::Affine { a: 4.0, b: 0 },
            depth: 9,
            growth: GrowthSettings::default(),
        }
        .build()
        .unwrap()
    })
}

fn psi_specs() -> Vec<PsiSpec> {
    vec![
        PsiSpec::power(0.75),
        PsiSpec::power(0.25),
        PsiSpec::new(PsiFamily::SqrtLog { epsilon: 0.5 }, Exponent::TWO).unwrap(),
        PsiSpec::new(PsiFamily::SqrtLogLog { epsilon: 1.0 }, Exponent::TWO).unwrap(),
        PsiSpec::new(PsiFamily::CustomTable { points: vec![(0.0, 0.0), (0.1, 0.2), (0.5, 0.3), (2.0, 0.9)] }, Exponent::TWO)
            .unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100_000))]

    #[test]
    fn inner_dyadic_contained_and_large(i in interval()) {
        let d = find_inner_dyadic(&i).unwrap();
        let cell = d.interval();
        prop_assert!(cell.is_subset_of(&i));
        prop_assert!(4.0 * cell.measure() >= i.measure());
        // the level is minimal: no coarser cell fits
        if d.level > 0 {
            let coarse = d.level - 1;
            let w = 2f64.powi(-(coarse as i32));
            let first = (i.lo() / w).ceil();
            prop_assert!((first + 1.0) * w > i.hi());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn psi_is_nondecreasing(a in 0.0f64..4.0, b in 0.0f64..4.0, idx in 0usize..5) {
        let spec = &psi_specs()[idx];
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(spec.eval_extended(lo) <= spec.eval_extended(hi) * (1.0 + 1e-12));
        if let (Ok(x), Ok(y)) = (spec.eval(lo), spec.eval(hi)) {
            prop_assert!(x <= y * (1.0 + 1e-12));
        }
    }

    #[test]
    fn triangle_and_holder(p in exponent(), ex in entries(6), ey in entries(6), ef in entries(6)) {
        let layout = Arc::new(BlockLayout::dyadic(p, 6));
        let x = BlockVector::from_entries(layout.clone(), ex).unwrap();
        let y = BlockVector::from_entries(layout.clone(), ey).unwrap();
        let f = Functional::new(layout, ef).unwrap();
        let sum = x.add(&y).unwrap();
        prop_assert!(sum.norm() <= (x.norm() + y.norm()) * (1.0 + 1e-12) + 1e-15);
        prop_assert!(f.apply(&x).unwrap().abs() <= f.dual_norm() * x.norm() * (1.0 + 1e-12) + 1e-15);
        prop_assert!((x.scale(-2.0).norm() - 2.0 * x.norm()).abs() <= 1e-12 * (1.0 + x.norm()));
        prop_assert!(x.sub(&x).unwrap().is_zero());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn set_algebra(a in interval_set(), b in interval_set()) {
        let i = a.intersect(&b);
        let u = a.union(&b);
        prop_assert!(i.is_subset_of(&a) && i.is_subset_of(&b));
        prop_assert!(a.is_subset_of(&u) && b.is_subset_of(&u));
        prop_assert!((i.measure() - b.intersect(&a).measure()).abs() < 1e-12);
        prop_assert!((u.measure() + i.measure() - a.measure() - b.measure()).abs() < 1e-12);
        let d = a.difference(&b);
        prop_assert!(d.intersect(&b).measure() < 1e-12);
        prop_assert!((d.measure() + i.measure() - a.measure()).abs() < 1e-12);
    }

    #[test]
    fn block_vector_json_roundtrip(p in exponent(), ex in entries(5)) {
        let layout = Arc::new(BlockLayout::dyadic(p, 5));
        let x = BlockVector::from_entries(layout.clone(), ex).unwrap();
        let text = serde_json::to_string(&x.to_json()).unwrap();
        let back = BlockVector::from_json(layout, &serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn pettis_lower_bound_on_provable_intervals(i in interval()) {
        let m = pettis16();
        prop_assume!(i.measure() >= m.min_provable_measure());
        let enc = m.pettis_integral(&IntervalSet::from_interval(i));
        prop_assert!(enc.lower >= m.psi(i.measure()) - 1e-12);
        prop_assert!(enc.upper >= enc.lower);
        let chain = m.proof_chain(&i).unwrap();
        prop_assert!(enc.truncated.block_norm(chain.level) >= chain.bound * 2.0 - 1e-12);
    }

    #[test]
    fn pettis_integral_is_additive(a in interval_set(), b in interval_set()) {
        let m = pettis16();
        let b = b.difference(&a);
        let whole = m.pettis_integral(&a.union(&b)).truncated;
        let parts = m.pettis_integral(&a).truncated.add(&m.pettis_integral(&b).truncated).unwrap();
        let err = whole.sub(&parts).unwrap().norm();
        prop_assert!(err <= 1e-9 * (1.0 + whole.norm()), "err = {}", err);
    }

    #[test]
    fn enclosure_brackets_deeper_truncations(i in interval(), n1 in 2u32..16) {
        let m = pettis16();
        let e = IntervalSet::from_interval(i);
        let deep = m.pettis_integral(&e).lower;
        let enc = m.pettis_integral_to(&e, n1);
        prop_assert!(enc.lower <= deep * (1.0 + 1e-12));
        prop_assert!(deep <= enc.upper * (1.0 + 1e-12));
    }

    #[test]
    fn f_has_one_coordinate(omega in 0.0f64..1.0) {
        let v = pettis16().evaluate_f(omega);
        prop_assert!(v.support_len() <= 1);
        prop_assert!(v.entries().all(|(_, _, x)| x > 0.0));
    }

    #[test]
    fn continuous_separation_and_modulus(s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let m = continuous9();
        prop_assume!((s - t).abs() >= m.min_separation());
        let r = m.check_pair(s, t).unwrap();
        let d = (s - t).abs();
        prop_assert!(r.holds);
        prop_assert!(r.separation >= m.psi(d) - 1e-12);
        prop_assert!(r.lhs >= r.separation * (1.0 - 1e-12));
        prop_assert!(r.lhs <= m.lipschitz(m.depth()) * d * (1.0 + 1e-12));
        for n in 2..=m.depth() {
            let truncated = m.eval_f(s).unwrap().0.truncate(n).sub(&m.eval_f(t).unwrap().0.truncate(n)).unwrap();
            prop_assert!(truncated.norm() <= m.lipschitz(n) * d * (1.0 + 1e-12) + 1e-15);
            prop_assert!(r.lhs <= m.modulus_bound(n, d) * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn carrier_families_are_disjoint(depth in 1u32..=10, stages in 1u32..=4, fat in any::<bool>()) {
        let scheme = if fat { CarrierScheme::FatCantorStage { stages } } else { CarrierScheme::LeafGap };
        let fam = allocate_carriers(depth, scheme).unwrap();
        let report = fam.verify_disjointness();
        prop_assert!(report.pass, "{:?}", report.violations.first());
        let explicit = fam.materialize().verify_disjointness();
        prop_assert!(explicit.pass);
    }
}
