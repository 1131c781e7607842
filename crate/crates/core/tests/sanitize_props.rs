use std::collections::{BTreeMap, BTreeSet};

use hsp_core::sanitize::{
    detect_noisy_origins, FilterAccounting, FilterKind, FilterOutcome, FilterRule, RuleMatch, RuleSet,
};
use hsp_core::{Family, PathSegment, RecordKind, RouteRecord, Timestamp};
use hsp_testkit::fixtures::{self, FEEDER};
use hsp_testkit::gen;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn every_default_rule_drops_its_fixture_alone() {
    let rules = RuleSet::default_rules();
    let fixtures = fixtures::default_rule_fixtures();
    let ids: BTreeSet<&str> = rules.rules.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, fixtures.iter().map(|(id, _)| *id).collect());
    for (id, rec) in &fixtures {
        let matching: Vec<&str> = rules.rules.iter().filter(|r| r.matches(rec, FEEDER)).map(|r| r.id.as_str()).collect();
        assert_eq!(matching, vec![*id]);
    }
    assert!(rules.apply(&fixtures::clean("45.64.10.0/25", "2021-02-15"), FEEDER).is_kept());
}

#[test]
fn table_examples() {
    let rules = RuleSet::default_rules();
    let kind_of = |rec: &RouteRecord| match rules.apply(rec, FEEDER) {
        FilterOutcome::Kept => None,
        FilterOutcome::Dropped { kind, .. } => Some(kind),
    };
    let base = fixtures::clean("45.64.10.0/25", "2021-02-15");
    let with_origin = |o: u32| base.clone().with_path(vec![PathSegment::seq([FEEDER, o])]);
    assert_eq!(kind_of(&with_origin(65000)), Some(FilterKind::PrivateOriginAsn));
    assert_eq!(kind_of(&with_origin(4_200_000_001)), Some(FilterKind::PrivateOriginAsn));
    assert_eq!(kind_of(&with_origin(64511)), None);
    assert_eq!(kind_of(&with_origin(65535)), None);
    assert_eq!(kind_of(&fixtures::clean("224.0.0.0/25", "2021-02-15")), Some(FilterKind::ClassDE));
    assert_eq!(kind_of(&base.clone().with_path(vec![PathSegment::seq([FEEDER])])), Some(FilterKind::FeederInternal));
    assert_eq!(kind_of(&base.clone().with_path(vec![PathSegment::seq([FEEDER, 64496])])), None);
    assert_eq!(kind_of(&with_origin(12400)), Some(FilterKind::NoisyOrigin));
    let noisy_peer = |date: &str| {
        let mut r = fixtures::clean("45.64.10.0/25", date);
        r.peer_asn = 35908;
        r
    };
    assert_eq!(kind_of(&noisy_peer("2016-07-07")), Some(FilterKind::NoisyPeer));
    assert_eq!(kind_of(&noisy_peer("2016-07-08")), None);
}

#[test]
fn noisy_origin_detection() {
    let snaps = |counts: &[u64]| -> Vec<BTreeMap<u32, u64>> {
        counts.iter().map(|&c| [(64496u32, c)].into_iter().filter(|(_, c)| *c > 0).collect()).collect()
    };
    let flags = detect_noisy_origins(&snaps(&[3, 2, 400, 3]), 100.0);
    // median(3, 2, 3) = 3, so the threshold is 300
    assert_eq!(flags.len(), 1);
    assert_eq!((flags[0].snapshot, flags[0].count, flags[0].baseline), (2, 400, 3.0));
    assert!(detect_noisy_origins(&snaps(&[3, 2, 299, 3]), 100.0).is_empty());
    assert!(detect_noisy_origins(&snaps(&[5, 5, 5]), 100.0).is_empty());
    assert!(detect_noisy_origins(&snaps(&[1000]), 100.0).is_empty());
}

/// Random records with private ASNs, reserved space and noisy peers mixed in.
fn dirty_corpus(rng: &mut impl Rng, n: usize) -> Vec<(RouteRecord, u32)> {
    let days = [
        Timestamp::from_secs(1_443_700_000), // 2015-10-01
        Timestamp::from_secs(1_467_400_000), // 2016-07-01
        Timestamp::from_secs(1_613_000_000),
    ];
    (0..n)
        .map(|_| {
            let ts = days[rng.gen_range(0..days.len())];
            let kind = [RecordKind::Announcement, RecordKind::Withdrawal, RecordKind::RibEntry][rng.gen_range(0..3)];
            let mut rec = gen::record(rng, kind, ts, true);
            if rng.gen_bool(0.1) {
                rec.prefix = if rec.family() == Family::V4 { "10.0.0.0/25".parse().unwrap() } else { "fd00::/64".parse().unwrap() };
            }
            if rng.gen_bool(0.1) && !rec.is_withdrawal() {
                let o = [65000, 4_200_000_000, 9498, 12400, 64512][rng.gen_range(0..5)];
                rec.as_path.push(PathSegment::seq([o]));
            }
            if rng.gen_bool(0.05) {
                rec.peer_asn = 35908;
            }
            if rng.gen_bool(0.05) {
                rec.abnormal_length = Some(rec.family().max_len() + 1);
            }
            let feeder = if rng.gen_bool(0.2) { rec.origin_asn().unwrap_or(rec.peer_asn) } else { rec.peer_asn };
            (rec, feeder)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accounting_identity_and_kept_records_are_clean(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let rules = RuleSet::default_rules();
        let corpus = dirty_corpus(&mut rng, 500);
        let mut acc = FilterAccounting::default();
        for (rec, feeder) in &corpus {
            let outcome = rules.apply(rec, *feeder);
            prop_assert_eq!(&outcome, &rules.apply(rec, *feeder));
            acc.record(&outcome);
            if outcome.is_kept() {
                let private = rec.origin_asn().is_some_and(|o| (64512..=65534).contains(&o) || (4_200_000_000..=4_294_967_294).contains(&o));
                prop_assert!(!private);
                prop_assert!(rec.abnormal_length.is_none());
                prop_assert!(!(rec.family() == Family::V4 && rec.prefix.bits() >= 224 << 24));
            }
        }
        prop_assert_eq!(acc.total, corpus.len() as u64);
        prop_assert_eq!(acc.kept + acc.dropped_total(), acc.total);
    }

    #[test]
    fn feeder_internal_spares_multi_hop_paths(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let rule = FilterRule::new("internal", None, RuleMatch::FeederInternal);
        for (rec, feeder) in dirty_corpus(&mut rng, 200) {
            if rec.hops() >= 2 {
                prop_assert!(!rule.matches(&rec, feeder));
            }
        }
    }

    #[test]
    fn merged_accounting_equals_single_pass(seed in any::<u64>(), split in 0usize..300) {
        let mut rng = StdRng::seed_from_u64(seed);
        let rules = RuleSet::default_rules();
        let corpus = dirty_corpus(&mut rng, 300);
        let tally = |recs: &[(RouteRecord, u32)]| {
            let mut acc = FilterAccounting::default();
            for (r, f) in recs {
                acc.record(&rules.apply(r, *f));
            }
            acc
        };
        let mut merged = tally(&corpus[..split]);
        merged.merge(&tally(&corpus[split..]));
        prop_assert_eq!(merged, tally(&corpus));
    }
}
