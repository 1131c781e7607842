use std::collections::BTreeSet;

use hsp_core::classify::{
    aggregation_position, anchor_position, cidr_bucket, classify_communities, community_share_stats, hit_rate,
    hit_rate_all, relative_hit_rate_diff, AggregationPosition, AnchorPosition, CommunityConfig, CommunityLabel,
    LabelSet, ScanRecord, ShareKey, SnapshotLabelCounts, UseCaseHint,
};
use hsp_core::stats::{median, std_dev};
use hsp_core::{Community, Family, PathSegment, Prefix, PrefixTrie};
use hsp_testkit::{fixtures, gen, oracle};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn buckets_partition_the_hsp_lengths() {
    for family in [Family::V4, Family::V6] {
        let mut seen = BTreeSet::new();
        for len in 0..=family.max_len() {
            let p = Prefix::new(family, 0, len).unwrap();
            match cidr_bucket(&p) {
                Ok(hint) => {
                    assert!(p.is_hyper_specific(), "{p}");
                    seen.insert(hint);
                }
                Err(_) => assert!(!p.is_hyper_specific(), "{p}"),
            }
        }
        let expected: BTreeSet<UseCaseHint> = match family {
            Family::V4 => [UseCaseHint::TrafficEngineering, UseCaseHint::OtherV4, UseCaseHint::PeeringSubnet, UseCaseHint::BlackholingV4].into(),
            Family::V6 => [UseCaseHint::Reassignment, UseCaseHint::OtherV6, UseCaseHint::BlackholingV6].into(),
        };
        assert_eq!(seen, expected);
    }
}

#[test]
fn blackhole_labels_follow_the_heuristic_flag() {
    let off = CommunityConfig::parse("x666 off").unwrap();
    let on = CommunityConfig::default();
    let bh = |c: Community, cfg: &CommunityConfig| classify_communities(&[c], cfg).contains(CommunityLabel::Blackhole);
    assert!(bh(Community(65535, 666), &off));
    assert!(!bh(Community(3356, 666), &off));
    assert!(bh(Community(3356, 666), &on));
    assert!(bh(Community(65535, 666), &on));
    for hi in [0u16, 1, 174, 64496, 65534] {
        for lo in [0u16, 665, 666, 667, 65281] {
            assert!(!bh(Community(hi, lo), &off), "{hi}:{lo}");
        }
    }
}

#[test]
fn relative_hit_rate_examples() {
    assert_eq!(relative_hit_rate_diff(0.06, 0.01), Ok(500.0));
    assert_eq!(relative_hit_rate_diff(0.01, 0.01), Ok(0.0));
    assert_eq!(relative_hit_rate_diff(0.001, 0.01), Ok(-90.0));
    assert!(relative_hit_rate_diff(0.5, 0.0).is_err());
}

#[test]
fn aggregation_fixtures_cover_every_branch() {
    let fixtures = fixtures::aggregation_fixtures();
    let mut classes = BTreeSet::new();
    for (expected, rec) in &fixtures {
        let got = aggregation_position(rec);
        assert_eq!(got.as_str(), *expected);
        classes.insert(got);
    }
    assert_eq!(classes.len(), 5);
    let positions: Vec<AggregationPosition> = fixtures.iter().map(|(_, r)| aggregation_position(r)).collect();
    assert_eq!(anchor_position(positions.iter().copied()), Some(AnchorPosition::Multiple));
    assert_eq!(anchor_position([AggregationPosition::OnPath, AggregationPosition::Excluded]), Some(AnchorPosition::OnPath));
    assert_eq!(anchor_position([AggregationPosition::NotAggregated]), None);
}

fn random_labels(rng: &mut impl Rng) -> LabelSet {
    let pool = [
        Community(65535, 666),
        Community(65535, 65281),
        Community(65535, 65282),
        Community(65535, 65283),
        Community(3356, 666),
        Community(3356, 70),
    ];
    let comms: Vec<Community> = pool.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
    classify_communities(&comms, &CommunityConfig::default())
}

#[test]
fn share_stats_match_recomputation() {
    let mut rng = StdRng::seed_from_u64(21);
    let snapshots: Vec<Vec<LabelSet>> =
        (0..9).map(|i| (0..if i == 4 { 0 } else { rng.gen_range(1..50) }).map(|_| random_labels(&mut rng)).collect()).collect();
    let counts: Vec<SnapshotLabelCounts> = snapshots.iter().map(SnapshotLabelCounts::from_sets).collect();
    let stats = community_share_stats(&counts);
    assert_eq!((stats.snapshots, stats.skipped), (8, 1));
    for row in &stats.rows {
        let shares: Vec<f64> = snapshots
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| {
                let hits = s.iter().filter(|set| match row.key {
                    ShareKey::Label(l) => set.iter().any(|x| x == l),
                    ShareKey::AnyBH => set.iter().any(|x| x == CommunityLabel::Blackhole),
                    ShareKey::AnyRES => set.iter().any(|x| matches!(x, CommunityLabel::NoExport | CommunityLabel::NoAdvertise)),
                    ShareKey::AnyComm => set.iter().next().is_some(),
                });
                hits.count() as f64 / s.len() as f64
            })
            .collect();
        assert_eq!(row.median, median(&shares).unwrap());
        assert_eq!(row.std_dev, std_dev(&shares).unwrap());
    }
}

fn scan(rng: &mut impl Rng, n: usize) -> Vec<ScanRecord> {
    (0..n)
        .map(|_| ScanRecord {
            protocol: ["http", "https", "cwmp"][rng.gen_range(0..3)].to_string(),
            address: gen::ip(rng, Family::V4),
            probed: rng.gen_bool(0.9),
            responded: rng.gen_bool(0.2),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn as_set_always_excludes(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut rec = gen::record(&mut rng, hsp_core::RecordKind::Announcement, hsp_core::Timestamp(0), true);
        let at = rng.gen_range(0..=rec.as_path.len());
        rec.as_path.insert(at, PathSegment::set([rng.gen(), rng.gen()]));
        prop_assert_eq!(aggregation_position(&rec), AggregationPosition::Excluded);
    }

    #[test]
    fn universal_scope_is_neutral(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let records = scan(&mut rng, 300);
        let mut universal = PrefixTrie::new();
        universal.insert(Prefix::new(Family::V4, 0, 0).unwrap(), ());
        prop_assert_eq!(hit_rate(&records, &universal), hit_rate_all(&records));
    }

    #[test]
    fn hit_rate_matches_linear_scan(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut records = scan(&mut rng, 300);
        let scope: Vec<Prefix> = (0..20).map(|_| gen::prefix(&mut rng, Family::V4)).collect();
        // put some probes inside the scope
        for (i, r) in records.iter_mut().enumerate().take(100) {
            r.address = scope[i % scope.len()].addr();
        }
        let trie: PrefixTrie<()> = scope.iter().map(|p| (*p, ())).collect();
        let got = hit_rate(&records, &trie);
        let want = oracle::hit_counts(&records, &scope);
        prop_assert_eq!(got.len(), want.len());
        for (proto, (probed, responded)) in want {
            prop_assert_eq!((got[&proto].probed, got[&proto].responded), (probed, responded));
        }
    }

    #[test]
    fn label_groups_are_consistent(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let set = random_labels(&mut rng);
        prop_assert_eq!(set.any_res(), set.contains(CommunityLabel::NoExport) || set.contains(CommunityLabel::NoAdvertise));
        prop_assert_eq!(set.any_comm(), !set.is_empty());
        prop_assert_eq!(set.any_bh(), set.contains(CommunityLabel::Blackhole));
    }
}
