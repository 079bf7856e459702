use proptest::prelude::*;

use dptopk_core::accountant::{advanced_composition, bounded_range_composition, eps_prime, BudgetSession};
use dptopk_core::histogram::rank_order;
use dptopk_core::mechanisms::{bottom_threshold, ThresholdVariant};
use dptopk_core::noise::SeededRng;
use dptopk_core::oracle::{exact_mechanism_distribution, exact_peeling_distribution, NeighborPair, OracleConfig};
use dptopk_core::{
    DomainConfig, Histogram, Label, Mechanism, PrivacyParams, SensitivitySetting, TopKRequest,
};

const LABELS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

fn histogram(max: u64) -> impl Strategy<Value = Histogram> {
    prop::collection::vec(0..=max, LABELS.len())
        .prop_map(|cs| LABELS.iter().zip(cs).map(|(l, c)| (*l, c)).collect())
}

/// A histogram, a user (nonempty label subset it can lose) and the neighbor.
fn neighbor_pair(max: u64, delta: Option<u64>) -> impl Strategy<Value = NeighborPair> {
    (histogram(max), prop::collection::vec(any::<bool>(), LABELS.len())).prop_filter_map(
        "user must be nonempty and removable",
        move |(h, mask)| {
            let user: Vec<Label> = LABELS
                .iter()
                .zip(&mask)
                .filter(|(l, m)| **m && h.count(l) > 0)
                .map(|(l, _)| l.to_string())
                .take(delta.unwrap_or(6) as usize)
                .collect();
            if user.is_empty() {
                return None;
            }
            NeighborPair::remove_user(h, &user, delta).ok()
        },
    )
}

fn params(eps: f64, delta: f64) -> PrivacyParams {
    PrivacyParams::new(eps, delta, 0.0, SensitivitySetting::Unrestricted).unwrap()
}

proptest! {
    #[test]
    fn sorted_view_is_a_sorted_permutation(h in histogram(20)) {
        let v = h.sorted_view();
        prop_assert_eq!(v.len(), h.len());
        for w in v.entries().windows(2) {
            prop_assert!(rank_order((&w[0].0, w[0].1), (&w[1].0, w[1].1)).is_lt());
        }
        for (l, c) in v.entries() {
            prop_assert_eq!(h.count(l), *c);
        }
    }

    #[test]
    fn rank_counts_move_by_at_most_one(pair in neighbor_pair(6, None)) {
        let (a, b) = (pair.h.sorted_view(), pair.h_prime.sorted_view());
        for j in 1..=LABELS.len() + 1 {
            prop_assert!(a.rank_count(j).abs_diff(b.rank_count(j)) <= 1);
        }
    }

    #[test]
    fn limited_domains_differ_by_at_most_min_delta_kbar(
        delta in 1u64..=3,
        kbar in 1usize..=5,
        seed in any::<u64>(),
    ) {
        let mut rng = SeededRng::new(seed);
        let h: Histogram = LABELS.iter().map(|l| (*l, rng.below(6))).collect();
        let user: Vec<Label> = LABELS
            .iter()
            .filter(|l| h.count(l) > 0)
            .take(delta as usize)
            .map(|l| l.to_string())
            .collect();
        prop_assume!(!user.is_empty());
        let pair = NeighborPair::remove_user(h, &user, Some(delta)).unwrap();
        let cfg = DomainConfig::default();
        let d = pair.h.sorted_view().limited_domain(kbar, &cfg).unwrap();
        let d2 = pair.h_prime.sorted_view().limited_domain(kbar, &cfg).unwrap();
        let diff = d.iter().filter(|l| !d2.contains(l)).count() as u64;
        prop_assert!(diff <= delta.min(kbar as u64), "{diff} > min({delta}, {kbar})");
    }

    #[test]
    fn budget_is_conserved(
        ks in prop::collection::vec(1usize..=4, 1..12),
        seed in any::<u64>(),
    ) {
        let h: Histogram = [("a", 9u64), ("b", 7), ("c", 4), ("d", 1)].into_iter().collect();
        let mut s = BudgetSession::create(1, 12, 6, 0.5, 1e-3, 1e-4).unwrap();
        let mut rng = SeededRng::new(seed);
        for k in ks {
            let req = TopKRequest::new(k, 4, Mechanism::LimitedDomain).unwrap();
            s.query(&h, &req, SensitivitySetting::Unrestricted, &DomainConfig::default(), &mut rng).unwrap();
            prop_assert_eq!(s.kmax_initial - s.kmax_remaining, s.log.iter().map(|e| e.cost).sum::<u64>());
            prop_assert!(s.check_consistency().is_ok());
        }
    }

    #[test]
    fn eps_prime_is_monotone(k in 1u64..300, eps in 0.001f64..2.0, dp in 1e-12f64..0.5) {
        let base = eps_prime(k, eps, dp).unwrap();
        prop_assert!(eps_prime(k + 1, eps, dp).unwrap() >= base);
        prop_assert!(eps_prime(k, eps * 1.01, dp).unwrap() >= base);
    }

    #[test]
    fn bounded_range_never_exceeds_advanced(k in 1usize..=200, eps in 1e-6f64..=1.0, dp in 1e-12f64..0.5) {
        let br = bounded_range_composition(&vec![eps; k], dp).unwrap().eps_total;
        let adv = advanced_composition(&vec![eps; k], &vec![0.0; k], dp).unwrap().eps_total;
        prop_assert!(br <= adv + 1e-12, "{br} > {adv}");
    }

    #[test]
    fn peeling_is_shift_invariant(
        h in histogram(8),
        c in 1u64..50,
        k in 1usize..=3,
        eps in 0.1f64..2.0,
    ) {
        let p = params(eps, 0.1);
        let domain = h.sorted_view().limited_domain(4, &DomainConfig::default()).unwrap();
        let bot = bottom_threshold(&h, 4, &p, ThresholdVariant::Gumbel).unwrap().value;
        let shifted: Histogram = domain.iter().map(|l| (l.clone(), h.count(l) + c)).collect();
        let a = exact_peeling_distribution(&h, &domain, k, bot, eps).unwrap();
        let b = exact_peeling_distribution(&shifted, &domain, k, bot + c as f64, eps).unwrap();
        for (o, pa) in a.iter() {
            prop_assert!((pa - b.prob(o)).abs() < 1e-12);
        }
        prop_assert_eq!(a.support_len(), b.support_len());
    }

    #[test]
    fn raising_a_top_count_never_raises_early_stop(
        h in histogram(6),
        pick in 0usize..3,
        k in 1usize..=3,
    ) {
        let kbar = 3;
        let cfg = OracleConfig::new(TopKRequest::new(k, kbar, Mechanism::LimitedDomain).unwrap(), params(0.7, 0.2));
        let view = h.sorted_view();
        let cutoff = view.rank_count(kbar + 1);
        let Some((label, count)) = view.entries().get(pick).cloned() else { return Ok(()) };
        prop_assume!(count > cutoff);
        let mut raised = h.clone();
        raised.set(label, count + 1);
        let short = |h: &Histogram| {
            exact_mechanism_distribution(h, &cfg).unwrap().mass_where(|o| o.output.len() < k)
        };
        prop_assert!(short(&raised) <= short(&h) + 1e-12);
    }

    #[test]
    fn sampled_outputs_stay_in_their_domains(h in histogram(10), seed in any::<u64>(), kbar in 1usize..=4) {
        let p = params(0.5, 0.1);
        let mut rng = SeededRng::new(seed);
        let cfg = DomainConfig::default();
        let lim = h.sorted_view().limited_domain(kbar, &cfg).unwrap();
        let strict = h.sorted_view().strict_limited_domain(kbar).unwrap();
        for m in [Mechanism::LimitedDomain, Mechanism::Strict] {
            let req = TopKRequest::new(1.max(kbar / 2), kbar, m).unwrap();
            for _ in 0..50 {
                let out = dptopk_core::mechanisms::run_mechanism(&h, &req, &p, &cfg, &mut rng).unwrap().output;
                let dom = if m == Mechanism::Strict { &strict } else { &lim };
                prop_assert!(out.indices.iter().all(|l| dom.contains(l)));
                prop_assert!(out.terminated || out.len() == req.k);
            }
        }
    }

    #[test]
    fn exact_distributions_sum_to_one(h in histogram(5), k in 1usize..=3) {
        for m in [Mechanism::LimitedDomain, Mechanism::Strict, Mechanism::FixedThreshold] {
            let cfg = OracleConfig::new(TopKRequest::new(k, 3, m).unwrap(), params(0.4, 0.1));
            let d = exact_mechanism_distribution(&h, &cfg).unwrap();
            prop_assert!((d.total() - 1.0).abs() < 1e-12);
        }
        if k >= 2 {
            let cfg = OracleConfig::new(TopKRequest::new(k, 4, Mechanism::OptimalThreshold).unwrap(), params(0.4, 0.1));
            prop_assert!((exact_mechanism_distribution(&h, &cfg).unwrap().total() - 1.0).abs() < 1e-12);
        }
    }
}
