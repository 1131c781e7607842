use std::collections::{BTreeMap, BTreeSet};

use hsp_core::registry::{
    anchor_dataset_attribution, attribute_origins, class_counts, roa_hsp_kind, AnchorClass, AnchorSources,
    OriginAttribution, RoaHspKind, RoaRecord, RoaSet, RovStatus,
};
use hsp_core::{Family, Prefix};
use hsp_testkit::gen;
use hsp_testkit::oracle::{self, StandardRov};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const ROA_ASNS: [u32; 3] = [0, 64500, 64501];
const ORIGINS: [u32; 3] = [64500, 64501, 64502];

fn p(s: &str) -> Prefix {
    s.parse().unwrap()
}

/// Every prefix from /20 to /32 inside 198.18.16.0/20.
fn universe() -> Vec<Prefix> {
    let base = p("198.18.16.0/20");
    let mut out = Vec::new();
    for len in 20..=32u8 {
        let step = 1u128 << (32 - len);
        for i in 0..(1u128 << (len - 20)) {
            out.push(Prefix::new(Family::V4, base.bits() + i * step, len).unwrap());
        }
    }
    out
}

fn collapse(s: RovStatus) -> StandardRov {
    match s {
        RovStatus::NotFound => StandardRov::NotFound,
        RovStatus::Valid => StandardRov::Valid,
        _ => StandardRov::Invalid,
    }
}

fn check_all(queries: &[Prefix], roas: &[RoaRecord]) {
    let set: RoaSet = roas.iter().cloned().collect();
    for q in queries {
        for origin in ORIGINS {
            let got = set.validate(q, origin);
            assert_eq!(got, oracle::rov_four_way(q, origin, roas), "{q} AS{origin} {roas:?}");
            assert_eq!(collapse(got), oracle::rov_standard(q, origin, roas), "{q} AS{origin} {roas:?}");
            assert_eq!(got == RovStatus::NotFound, !roas.iter().any(|r| r.prefix.contains(q)));
        }
    }
}

#[test]
fn rov_matches_brute_force_on_every_single_roa() {
    let all = universe();
    assert_eq!(all.len(), (1 << 13) - 1);
    // one ROA per (length, max length, ASN) on the first /20 branch, plus one
    // sibling so both halves of each split are exercised
    let chain: Vec<Prefix> = (20..=32u8).map(|l| p("198.18.16.0/32").truncate(l)).collect();
    let mut anchors = chain.clone();
    anchors.push(p("198.18.24.0/21"));
    anchors.push(p("198.18.16.128/25"));
    for roa_prefix in anchors {
        for max_length in roa_prefix.len()..=32 {
            for asn in ROA_ASNS {
                let roa = RoaRecord::new(roa_prefix, max_length, asn).unwrap();
                check_all(&all, &[roa]);
            }
        }
    }
}

#[test]
fn rov_matches_brute_force_on_random_roa_sets() {
    let all = universe();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..60 {
        let n = rng.gen_range(1..=6);
        let roas: Vec<RoaRecord> = (0..n)
            .map(|_| {
                let prefix = all[rng.gen_range(0..all.len())];
                let max_length = rng.gen_range(prefix.len()..=32);
                RoaRecord::new(prefix, max_length, ROA_ASNS[rng.gen_range(0..3)]).unwrap()
            })
            .collect();
        check_all(&all, &roas);
    }
}

#[test]
fn roa_set_covering_matches_linear_scan() {
    let mut rng = StdRng::seed_from_u64(12);
    let roas: Vec<RoaRecord> = (0..2000)
        .map(|_| {
            let family = gen::family(&mut rng);
            let prefix = gen::prefix(&mut rng, family);
            RoaRecord::new(prefix, prefix.len(), rng.gen()).unwrap()
        })
        .collect();
    let set: RoaSet = roas.iter().cloned().collect();
    let prefixes: Vec<Prefix> = roas.iter().map(|r| r.prefix).collect();
    for _ in 0..5000 {
        let family = gen::family(&mut rng);
        let q = gen::prefix(&mut rng, family);
        let got: BTreeSet<Prefix> = set.covering(&q).map(|r| r.prefix).collect();
        let want: BTreeSet<Prefix> = oracle::covering(&prefixes, &q).into_iter().collect();
        assert_eq!(got, want);
    }
}

#[test]
fn roa_hsp_kind_examples() {
    let kind = |s: &str, m: u8| roa_hsp_kind(&RoaRecord::new(p(s), m, 1).unwrap());
    assert_eq!(kind("192.0.2.0/25", 32), RoaHspKind::Explicit);
    assert_eq!(kind("192.0.2.0/24", 25), RoaHspKind::Implicit);
    assert_eq!(kind("192.0.2.0/24", 24), RoaHspKind::NonHsp);
    assert_eq!(kind("2001:db8::/48", 64), RoaHspKind::Implicit);
    assert_eq!(kind("2001:db8::/49", 49), RoaHspKind::Explicit);
}

fn any_prefix() -> impl Strategy<Value = Prefix> {
    prop_oneof![
        (any::<u32>(), 0u8..=32).prop_map(|(b, l)| Prefix::new_truncating(Family::V4, b as u128, l).unwrap().0),
        (any::<u128>(), 0u8..=128).prop_map(|(b, l)| Prefix::new_truncating(Family::V6, b, l).unwrap().0),
    ]
}

fn asn_set() -> impl Strategy<Value = BTreeSet<u32>> {
    proptest::collection::btree_set(0u32..40, 0..20)
}

proptest! {
    #[test]
    fn raising_max_length_keeps_hsp_roas(prefix in any_prefix(), a in 0u8..=128, b in 0u8..=128) {
        let max = prefix.family().max_len();
        let lo = prefix.len() + a % (max - prefix.len() + 1);
        let hi = lo + b % (max - lo + 1);
        let before = roa_hsp_kind(&RoaRecord::new(prefix, lo, 1).unwrap());
        let after = roa_hsp_kind(&RoaRecord::new(prefix, hi, 1).unwrap());
        if before != RoaHspKind::NonHsp {
            prop_assert_ne!(after, RoaHspKind::NonHsp);
        }
    }

    #[test]
    fn origin_classes_partition_the_universe(bgp in asn_set(), irr in asn_set(), rpki in asn_set()) {
        let classes = attribute_origins(&bgp, &irr, &rpki);
        let universe: BTreeSet<u32> = bgp.iter().chain(&irr).chain(&rpki).copied().collect();
        prop_assert_eq!(classes.keys().copied().collect::<BTreeSet<_>>(), universe);
        for (asn, class) in &classes {
            let hits = [&bgp, &irr, &rpki].iter().filter(|s| s.contains(asn)).count();
            prop_assert_eq!(*class == OriginAttribution::Multiple, hits >= 2);
        }
        let counts = class_counts(&classes, &OriginAttribution::ALL);
        prop_assert_eq!(counts.values().sum::<u64>(), classes.len() as u64);
    }

    #[test]
    fn anchor_classes_conserve_anchors(c in asn_set(), i in asn_set(), r in asn_set(), a in asn_set()) {
        let to_prefixes = |s: &BTreeSet<u32>| -> BTreeSet<Prefix> {
            s.iter().map(|&n| Prefix::new(Family::V4, (n as u128) << 8, 24).unwrap()).collect()
        };
        let sources = AnchorSources { collectors: to_prefixes(&c), irr: to_prefixes(&i), rpki: to_prefixes(&r), aggregated: to_prefixes(&a) };
        let classes = anchor_dataset_attribution(&sources);
        let mut hits: BTreeMap<Prefix, usize> = BTreeMap::new();
        for set in [&sources.collectors, &sources.irr, &sources.rpki, &sources.aggregated] {
            for p in set {
                *hits.entry(*p).or_default() += 1;
            }
        }
        prop_assert_eq!(classes.len(), hits.len());
        for (p, n) in hits {
            prop_assert_eq!(classes[&p] == AnchorClass::Multiple, n >= 2);
        }
        prop_assert_eq!(class_counts(&classes, &AnchorClass::ALL).values().sum::<u64>(), classes.len() as u64);
    }
}
