use causal_bench_core::scoring::{
    aggregate_linear, aggregate_quadratic, coverage, encis, enormse_population, PopulationRow, SizeScore,
};
use proptest::prelude::*;

fn rows() -> impl Strategy<Value = Vec<PopulationRow>> {
    prop::collection::vec(
        (-5.0f64..5.0, -5.0f64..5.0, 0.0f64..3.0).prop_map(|(e, est, half)| PopulationRow {
            truth: e,
            estimate: est,
            li: est - half,
            ri: est + half,
        }),
        1..40,
    )
}

proptest! {
    #[test]
    fn metrics_ignore_instance_order(mut rs in rows(), seed in any::<u64>()) {
        let before = (enormse_population(&rs).unwrap(), coverage(&rs).unwrap(), encis(&rs).unwrap());
        let k = (seed as usize) % rs.len();
        rs.rotate_left(k);
        rs.reverse();
        let after = (enormse_population(&rs).unwrap(), coverage(&rs).unwrap(), encis(&rs).unwrap());
        prop_assert!((before.0 - after.0).abs() <= 1e-12 * before.0.max(1.0));
        prop_assert_eq!(before.1, after.1);
        prop_assert!((before.2 - after.2).abs() <= 1e-12 * before.2.max(1.0));
    }

    #[test]
    fn enormse_is_nonnegative_and_scale_free(rs in rows(), c in 0.5f64..20.0) {
        let rs: Vec<PopulationRow> = rs.into_iter().filter(|r| r.truth.abs() >= 0.1).collect();
        prop_assume!(!rs.is_empty());
        let a = enormse_population(&rs).unwrap();
        prop_assert!(a >= 0.0);
        let scaled: Vec<PopulationRow> = rs
            .iter()
            .map(|r| PopulationRow { truth: r.truth * c, estimate: r.estimate * c, li: r.li * c, ri: r.ri * c })
            .collect();
        let b = enormse_population(&scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-5 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn widening_intervals_never_lowers_coverage(rs in rows(), extra in 0.0f64..2.0) {
        let wider: Vec<PopulationRow> = rs
            .iter()
            .map(|r| PopulationRow { li: r.li - extra, ri: r.ri + extra, ..*r })
            .collect();
        let c0 = coverage(&rs).unwrap();
        let c1 = coverage(&wider).unwrap();
        prop_assert!((0.0..=1.0).contains(&c0));
        prop_assert!(c1 >= c0);
    }

    #[test]
    fn constant_values_aggregate_to_themselves(
        v in -10.0f64..10.0,
        sizes in prop::collection::vec((1usize..100_000, 1usize..20), 1..7),
    ) {
        let per: Vec<SizeScore> = sizes.iter().map(|&(n, m)| SizeScore { n, instances: m, value: v }).collect();
        prop_assert_eq!(aggregate_linear(&per).unwrap(), v);
        prop_assert_eq!(aggregate_quadratic(&per).unwrap(), v.abs());
    }

    #[test]
    fn aggregates_lie_within_per_size_range(
        sizes in prop::collection::vec((1usize..100_000, 1usize..20, 0.0f64..5.0), 1..7),
    ) {
        let per: Vec<SizeScore> = sizes.iter().map(|&(n, m, value)| SizeScore { n, instances: m, value }).collect();
        let lo = per.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
        let hi = per.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
        for a in [aggregate_linear(&per).unwrap(), aggregate_quadratic(&per).unwrap()] {
            prop_assert!(a >= lo - 1e-12 && a <= hi + 1e-12);
        }
    }
}
