//! Random inputs for property and oracle tests.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use hsp_core::route::{Aggregator, Community};
use hsp_core::{Family, PathSegment, Prefix, RecordKind, RouteRecord, SegmentKind, Timestamp};
use rand::seq::SliceRandom;
use rand::Rng;

pub const COLLECTOR: &str = "ref00";

/// Random canonical prefix, biased towards lengths around the HSP boundary.
pub fn prefix(rng: &mut impl Rng, family: Family) -> Prefix {
    let max = family.max_len();
    let len = if rng.gen_bool(0.6) {
        let b = family.hsp_boundary();
        rng.gen_range(b.saturating_sub(4)..=max.min(b + 12))
    } else {
        rng.gen_range(0..=max)
    };
    let bits: u128 = match family {
        Family::V4 => rng.gen::<u32>() as u128,
        Family::V6 => rng.gen(),
    };
    Prefix::new_truncating(family, bits, len).unwrap().0
}

pub fn family(rng: &mut impl Rng) -> Family {
    if rng.gen_bool(0.5) {
        Family::V4
    } else {
        Family::V6
    }
}

pub fn asn(rng: &mut impl Rng, wide: bool) -> u32 {
    if wide && rng.gen_bool(0.3) {
        rng.gen_range(65536..=4_294_967_295)
    } else {
        rng.gen_range(1..=65535)
    }
}

/// 1 to 3 segments, mostly sequences, never empty, no two sequences in a row.
pub fn path(rng: &mut impl Rng, wide: bool) -> Vec<PathSegment> {
    let n = rng.gen_range(1..=3);
    let mut out: Vec<PathSegment> = Vec::new();
    for _ in 0..n {
        let asns: Vec<u32> = (0..rng.gen_range(1..=6)).map(|_| asn(rng, wide)).collect();
        if rng.gen_bool(0.15) {
            out.push(PathSegment::set(asns));
        } else if let Some(last) = out.last_mut().filter(|s| s.kind == SegmentKind::Sequence) {
            last.asns.extend(asns);
        } else {
            out.push(PathSegment::seq(asns));
        }
    }
    out
}

pub fn ip(rng: &mut impl Rng, family: Family) -> IpAddr {
    match family {
        Family::V4 => IpAddr::V4(Ipv4Addr::from(rng.gen::<u32>())),
        Family::V6 => IpAddr::V6(Ipv6Addr::from(rng.gen::<u128>())),
    }
}

/// Fully attributed record. `wide` allows 4-byte ASNs.
pub fn record(rng: &mut impl Rng, kind: RecordKind, timestamp: Timestamp, wide: bool) -> RouteRecord {
    let fam = family(rng);
    let peer_fam = family(rng);
    let mut rec = RouteRecord::new(kind, timestamp, asn(rng, wide), ip(rng, peer_fam), prefix(rng, fam));
    rec.collector_id = COLLECTOR.to_string();
    if kind == RecordKind::Withdrawal {
        return rec;
    }
    rec.as_path = path(rng, wide);
    let nc = rng.gen_range(0..4);
    rec.communities = (0..nc).map(|_| Community(rng.gen(), rng.gen())).collect();
    if rng.gen_bool(0.2) {
        rec.large_communities = vec![[rng.gen(), rng.gen(), rng.gen()]];
    }
    if rng.gen_bool(0.2) {
        rec.extended_communities = vec![rng.gen()];
    }
    if rng.gen_bool(0.3) {
        // on 2-byte sessions a narrow aggregator hides AS4_PATH, so keep it wide
        let path_wide = rec.as_path.iter().flat_map(|s| &s.asns).any(|&a| a > 0xffff);
        let a = if path_wide && wide { rng.gen_range(65536..=u32::MAX) } else { asn(rng, wide) };
        rec.aggregator = Some(Aggregator { asn: a, address: ip(rng, Family::V4) });
    }
    rec.atomic_aggregate = rng.gen_bool(0.1);
    rec
}

/// A mix of RIB entries (whole seconds) and updates for round-trip tests.
/// RIB entries come first, as they would in a dump followed by updates.
pub fn mrt_corpus(rng: &mut impl Rng, n: usize) -> Vec<RouteRecord> {
    let base = 1_600_000_000u64;
    let n_rib = n / 3;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n_rib {
        out.push(record(rng, RecordKind::RibEntry, Timestamp::from_secs(base), true));
    }
    let mut t = Timestamp::from_secs(base);
    for _ in n_rib..n {
        t = Timestamp(t.0 + rng.gen_range(0..3_000_000));
        let kind = if rng.gen_bool(0.3) { RecordKind::Withdrawal } else { RecordKind::Announcement };
        out.push(record(rng, kind, t, true));
    }
    out
}

/// Updates restricted to 2-byte peers, for BGP4MP MESSAGE encoding.
pub fn two_byte_updates(rng: &mut impl Rng, n: usize) -> Vec<RouteRecord> {
    let mut t = Timestamp::from_secs(1_600_000_000);
    (0..n)
        .map(|_| {
            t = Timestamp(t.0 + rng.gen_range(0..3_000_000));
            let kind = if rng.gen_bool(0.3) { RecordKind::Withdrawal } else { RecordKind::Announcement };
            let mut r = record(rng, kind, t, true);
            r.peer_asn = rng.gen_range(1..=65535);
            r
        })
        .collect()
}

/// An event stream for replay tests: a small pool of prefixes and
/// sessions, whole-second timestamps inside `[start, start + len)`.
pub struct ReplayCase {
    pub window_start: u64,
    pub window_secs: u64,
    pub ribs: Vec<RouteRecord>,
    pub updates: Vec<RouteRecord>,
}

pub fn replay_case(rng: &mut impl Rng, events: usize) -> ReplayCase {
    let window_start = 1_600_000_000u64;
    let window_secs = rng.gen_range(50..2_000);
    let prefixes: Vec<Prefix> = (0..rng.gen_range(1..6)).map(|_| {
            let f = family(rng);
            prefix(rng, f)
        })
        .collect();
    // two sessions of AS 1 plus a few other ASes
    let mut sessions: Vec<(u32, IpAddr)> = vec![(1, "192.0.2.1".parse().unwrap()), (1, "192.0.2.2".parse().unwrap())];
    for k in 2..rng.gen_range(3..6) {
        sessions.push((k, IpAddr::V4(Ipv4Addr::new(198, 51, 100, k as u8))));
    }
    let mk = |kind, secs, (asn, addr): (u32, IpAddr), p: Prefix| {
        let r = RouteRecord::new(kind, Timestamp::from_secs(secs), asn, addr, p);
        if kind == RecordKind::Withdrawal {
            r
        } else {
            r.with_path(vec![PathSegment::seq(vec![asn, 64496])])
        }
    };
    let mut ribs = Vec::new();
    for &s in &sessions {
        for &p in &prefixes {
            if rng.gen_bool(0.3) {
                ribs.push(mk(RecordKind::RibEntry, window_start, s, p));
            }
        }
    }
    // runs past the window end on purpose
    let mut times: Vec<u64> = (0..events).map(|_| window_start + rng.gen_range(0..window_secs + 20)).collect();
    times.sort_unstable();
    let updates = times
        .into_iter()
        .map(|t| {
            let kind = if rng.gen_bool(0.45) { RecordKind::Withdrawal } else { RecordKind::Announcement };
            mk(kind, t, *sessions.choose(rng).unwrap(), *prefixes.choose(rng).unwrap())
        })
        .collect();
    ReplayCase { window_start, window_secs, ribs, updates }
}

/// ASNs named by a default rule; kept out of clean corpora.
const RULED: &[u32] = &[
    4761, 7122, 7713, 8100, 9498, 12400, 14361, 17451, 27630, 35908, 36937, 37497, 45899, 60924, 199036, 203125,
    262757, 268430, 398465,
];

/// A public ASN that no default rule drops.
pub fn clean_asn(rng: &mut impl Rng) -> u32 {
    loop {
        let a = if rng.gen_bool(0.8) { rng.gen_range(1_000..60_000) } else { rng.gen_range(131_072..399_999) };
        if !RULED.contains(&a) && a != hsp_core::route::AS_TRANS {
            return a;
        }
    }
}

/// A prefix in public space (45.64.0.0/12 or 2a0e::/16) that the default
/// rules keep. `hsp` forces a length beyond the family boundary.
pub fn clean_prefix(rng: &mut impl Rng, family: Family, hsp: bool) -> Prefix {
    let (base, fixed): (u128, u8) = match family {
        Family::V4 => (0x2d40_0000, 12),
        Family::V6 => (0x2a0e << 112, 16),
    };
    let b = family.hsp_boundary();
    let len = if hsp { rng.gen_range(b + 1..=family.max_len()) } else { rng.gen_range(fixed..=b) };
    let host_bits = family.max_len() - fixed;
    let free: u128 = match family {
        Family::V4 => rng.gen::<u32>() as u128 & ((1u128 << host_bits) - 1),
        Family::V6 => rng.gen::<u128>() & ((1u128 << host_bits) - 1),
    };
    Prefix::new_truncating(family, base | free, len).unwrap().0
}

fn clean_route(rng: &mut impl Rng, kind: RecordKind, secs: u64, (peer, addr): (u32, IpAddr), (p, origin): (Prefix, u32)) -> RouteRecord {
    let mut hops = vec![peer];
    if rng.gen_bool(0.5) {
        hops.push(clean_asn(rng));
    }
    hops.push(origin);
    hops.dedup();
    if hops.len() < 2 {
        hops.insert(1, clean_asn(rng));
    }
    let mut r = RouteRecord::new(kind, Timestamp::from_secs(secs), peer, addr, p).with_path(vec![PathSegment::seq(hops)]);
    r.collector_id = COLLECTOR.to_string();
    if rng.gen_bool(0.2) {
        let n = rng.gen_range(1..=2);
        r.communities = [Community(peer as u16, 666), Community(65535, 666)][..n].to_vec();
    }
    r
}

/// One collector day: `feeders` sessions each carrying a RIB dump of a
/// shared prefix pool at `start`, then `updates` announcements and
/// withdrawals spread over the day. Every record passes the default rules.
pub struct DayCorpus {
    pub ribs: Vec<RouteRecord>,
    pub updates: Vec<RouteRecord>,
}

pub fn public_day(rng: &mut impl Rng, start: u64, feeders: usize, prefixes: usize, updates: usize) -> DayCorpus {
    let mut sessions: Vec<(u32, IpAddr)> = Vec::new();
    while sessions.len() < feeders {
        let a = clean_asn(rng);
        if sessions.iter().all(|s| s.0 != a) {
            let k = sessions.len() as u32;
            sessions.push((a, IpAddr::V4(Ipv4Addr::from(0x5051_c000 + k + 1))));
        }
    }
    let pool: Vec<(Prefix, u32)> = (0..prefixes)
        .map(|_| {
            let f = family(rng);
            let hsp = rng.gen_bool(0.3);
            (clean_prefix(rng, f, hsp), clean_asn(rng))
        })
        .collect();
    let mut ribs = Vec::new();
    for &entry in &pool {
        for &s in &sessions {
            if rng.gen_bool(0.7) {
                ribs.push(clean_route(rng, RecordKind::RibEntry, start, s, entry));
            }
        }
    }
    ribs.sort_by_key(|r| r.prefix);
    let mut times: Vec<u64> = (0..updates).map(|_| start + rng.gen_range(1..86_400)).collect();
    times.sort_unstable();
    let updates = times
        .into_iter()
        .map(|t| {
            let s = *sessions.choose(rng).unwrap();
            let entry = *pool.choose(rng).unwrap();
            if rng.gen_bool(0.4) {
                let mut r = RouteRecord::new(RecordKind::Withdrawal, Timestamp::from_secs(t), s.0, s.1, entry.0);
                r.collector_id = COLLECTOR.to_string();
                r
            } else {
                clean_route(rng, RecordKind::Announcement, t, s, entry)
            }
        })
        .collect();
    DayCorpus { ribs, updates }
}
