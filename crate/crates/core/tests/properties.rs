use proptest::prelude::*;

use ldpm_core::analysis::{
    binomial_pmf, distribution_distance, indistinguishability_margin, leaky_message_set, random_private_binary_channel,
    FiniteDist, IndistinguishabilityReport, Norm,
};
use ldpm_core::attacks::{run_manip_game, AdversarySpec, GameConfig, GameResult};
use ldpm_core::channel::{
    compose, embed_channel, kov_decompose, max_row_tv, measure_privacy, rr_channel, Channel, RrOutput, SubsetH,
};
use ldpm_core::protocols::{hst_protocol, rr_mean_protocol, SourceDistribution};
use ldpm_core::rng::seeded;
use ldpm_core::stats::{median, quantile, wilson_interval};

fn dist(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("nonzero mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

fn dist_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..10).prop_flat_map(|k| (dist(k), dist(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kov_round_trip_is_exact(seed in any::<u64>(), eps in 0.05f64..3.0, k in 1usize..9) {
        let mut rng = seeded(seed);
        let ch = random_private_binary_channel(k, eps, &mut rng).unwrap();
        let post = kov_decompose(&ch, eps, 0.0).unwrap();
        let back = compose(&post, &rr_channel(eps, RrOutput::Raw).unwrap()).unwrap();
        prop_assert!(max_row_tv(&back, &ch).unwrap() < 1e-9);
    }

    #[test]
    fn random_channels_respect_their_epsilon(seed in any::<u64>(), eps in 0.05f64..3.0, k in 1usize..9) {
        let ch = random_private_binary_channel(k, eps, &mut seeded(seed)).unwrap();
        prop_assert!(measure_privacy(&ch, None).epsilon.at_most(eps + 1e-9));
    }

    #[test]
    fn unit_factor_margin_is_total_variation((p, q) in dist_pair()) {
        let p = FiniteDist::indexed(p).unwrap();
        let q = FiniteDist::indexed(q).unwrap();
        let r = indistinguishability_margin(&p, &q, 1.0, 0.0).unwrap();
        let tv = distribution_distance(&p, &q, Norm::Tv).unwrap();
        prop_assert!((r.margin - tv).abs() < 1e-12);
    }

    #[test]
    fn margin_decreases_in_factor((p, q) in dist_pair(), c in 1.0f64..10.0, extra in 0.0f64..10.0) {
        let p = FiniteDist::indexed(p).unwrap();
        let q = FiniteDist::indexed(q).unwrap();
        let a = indistinguishability_margin(&p, &q, c, 0.0).unwrap().margin;
        let b = indistinguishability_margin(&p, &q, c + extra, 0.0).unwrap().margin;
        prop_assert!(b <= a + 1e-12);
        prop_assert!(b >= -1e-12);
    }

    #[test]
    fn report_serde_round_trip((p, q) in dist_pair(), c in 1.0f64..60.0, slack in 0.0f64..1.0) {
        let r = indistinguishability_margin(
            &FiniteDist::indexed(p).unwrap(),
            &FiniteDist::indexed(q).unwrap(),
            c,
            slack,
        ).unwrap();
        let back: IndistinguishabilityReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn leaky_set_shrinks_as_threshold_grows(eps in 0.1f64..3.0, half in 1usize..6, seed in any::<u64>(), v in 0.0f64..1.0, dv in 0.0f64..1.0) {
        let d = 2 * half;
        let ch = Channel::randomized_response(d, eps).unwrap();
        let h = SubsetH::random_half(d, &mut seeded(seed)).unwrap();
        let wide = leaky_message_set(&ch, &h, v).unwrap();
        let narrow = leaky_message_set(&ch, &h, v + dv).unwrap();
        prop_assert!(narrow.iter().all(|y| wide.contains(y)));
    }

    #[test]
    fn embedding_never_loses_privacy(eps in 0.1f64..3.0, half in 1usize..6, seed in any::<u64>()) {
        let d = 2 * half;
        let ch = Channel::randomized_response(d, eps).unwrap();
        let h = SubsetH::random_half(d, &mut seeded(seed)).unwrap();
        let q = embed_channel(&ch, &h).unwrap();
        prop_assert!(measure_privacy(&q, None).epsilon.at_most(eps + 1e-12));
    }

    #[test]
    fn binomial_pmf_sums_to_one(n in 0usize..3000, p in 0.0f64..=1.0) {
        let pmf = binomial_pmf(n, p);
        prop_assert_eq!(pmf.len(), n + 1);
        prop_assert!(pmf.iter().all(|x| *x >= 0.0));
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wilson_interval_brackets_estimate(t in 1usize..5000, frac in 0.0f64..=1.0) {
        let s = ((t as f64) * frac).floor() as usize;
        let (lo, hi) = wilson_interval(s, t);
        let p = s as f64 / t as f64;
        prop_assert!((0.0..=p + 1e-15).contains(&lo));
        prop_assert!(hi >= p - 1e-15 && hi <= 1.0);
    }

    #[test]
    fn upper_quantile_dominates_median(xs in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        prop_assert!(quantile(&xs, 0.95) >= median(&xs));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn games_are_deterministic_in_the_seed(seed in any::<u64>(), m in 0usize..50) {
        let p = rr_mean_protocol(200, 1.0).unwrap();
        let src = SourceDistribution::Rademacher { mu: 0.1 };
        let cfg = GameConfig::new(200, m, seed);
        let a = run_manip_game(&p, &src, &AdversarySpec::RrPlusOne, &cfg).unwrap();
        let b = run_manip_game(&p, &src, &AdversarySpec::RrPlusOne, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        let back: GameResult = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn histogram_manipulation_is_capped(seed in any::<u64>(), m in 0usize..100, eps in 0.2f64..3.0) {
        let (n, d) = (500, 8);
        let p = hst_protocol(n, d, eps).unwrap();
        let r = run_manip_game(&p, &SourceDistribution::uniform(d), &AdversarySpec::RrPlusOne, &GameConfig::new(n, m, seed)).unwrap();
        let cap = 2.0 * ldpm_core::channel::rr_scale(eps) * m as f64 / n as f64;
        prop_assert!(r.manipulation_linf().unwrap() <= cap + 1e-12);
    }
}
