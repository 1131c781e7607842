//! Brute-force reference implementations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::IpAddr;

use hsp_core::classify::ScanRecord;
use hsp_core::registry::{RoaRecord, RovStatus};
use hsp_core::{Prefix, RecordKind, RouteRecord};

/// Same family, first `q.len()` bits equal, `q` no longer than `p`.
pub fn contains(q: &Prefix, p: &Prefix) -> bool {
    if q.family() != p.family() || q.len() > p.len() {
        return false;
    }
    (0..q.len()).all(|i| q.bit(i) == p.bit(i))
}

pub fn covering(set: &[Prefix], p: &Prefix) -> Vec<Prefix> {
    let mut out: Vec<Prefix> = set.iter().filter(|q| contains(q, p)).copied().collect::<BTreeSet<_>>().into_iter().collect();
    out.sort_by_key(|p| std::cmp::Reverse(p.len()));
    out
}

pub fn covered(set: &[Prefix], p: &Prefix) -> Vec<Prefix> {
    set.iter().filter(|q| contains(p, q)).copied().collect::<BTreeSet<_>>().into_iter().collect()
}

pub type Session = (u32, IpAddr);

/// Per-second state simulation. Returns, per (session, prefix), the
/// maximal runs of seconds in which the route was installed, as
/// half-open `[start, end)` second ranges.
pub fn simulate_replay(
    ribs: &[RouteRecord],
    updates: &[RouteRecord],
    window_start: u64,
    window_secs: u64,
) -> BTreeMap<(Prefix, Session), Vec<(u64, u64)>> {
    let mut state: HashMap<(Prefix, Session), bool> = HashMap::new();
    for r in ribs {
        state.insert((r.prefix, (r.peer_asn, r.peer_address)), true);
    }
    let mut by_second: BTreeMap<u64, Vec<&RouteRecord>> = BTreeMap::new();
    for u in updates {
        by_second.entry(u.timestamp.secs()).or_default().push(u);
    }
    let mut runs: BTreeMap<(Prefix, Session), Vec<(u64, u64)>> = BTreeMap::new();
    for t in window_start..window_start + window_secs {
        for u in by_second.get(&t).into_iter().flatten() {
            let present = u.kind != RecordKind::Withdrawal;
            state.insert((u.prefix, (u.peer_asn, u.peer_address)), present);
        }
        for (key, &present) in &state {
            if !present {
                continue;
            }
            let v = runs.entry(*key).or_default();
            match v.last_mut() {
                Some(last) if last.1 == t => last.1 = t + 1,
                _ => v.push((t, t + 1)),
            }
        }
    }
    runs
}

/// Seconds during which at least one session carried `prefix`.
pub fn present_seconds(runs: &BTreeMap<(Prefix, Session), Vec<(u64, u64)>>, prefix: &Prefix) -> u64 {
    let mut secs = BTreeSet::new();
    for ((p, _), spans) in runs {
        if p == prefix {
            for &(s, e) in spans {
                secs.extend(s..e);
            }
        }
    }
    secs.len() as u64
}

/// Window consistency fractions by direct set arithmetic.
pub fn window_fractions<T: Ord + Clone>(daily: &[BTreeSet<T>], w: usize) -> Vec<Option<f64>> {
    let d = daily.len();
    let mut out = Vec::new();
    let mut n = 0;
    while n + w + 1 < d {
        let mut union = BTreeSet::new();
        for s in &daily[n..=n + w] {
            union.extend(s.iter().cloned());
        }
        let target = &daily[n + w + 1];
        out.push(if target.is_empty() {
            None
        } else {
            Some(target.intersection(&union).count() as f64 / target.len() as f64)
        });
        n += 1;
    }
    out
}

/// Four-way status by scanning every ROA.
pub fn rov_four_way(prefix: &Prefix, origin: u32, roas: &[RoaRecord]) -> RovStatus {
    let covering: Vec<&RoaRecord> = roas.iter().filter(|r| contains(&r.prefix, prefix)).collect();
    if covering.is_empty() {
        return RovStatus::NotFound;
    }
    let len_ok = |r: &RoaRecord| prefix.len() <= r.max_length;
    let origin_ok = |r: &RoaRecord| r.asn != 0 && r.asn == origin;
    if covering.iter().any(|r| len_ok(r) && origin_ok(r)) {
        RovStatus::Valid
    } else if covering.iter().any(|r| !len_ok(r) && origin_ok(r)) {
        RovStatus::InvalidLength
    } else if covering.iter().any(|r| len_ok(r) && !origin_ok(r)) {
        RovStatus::InvalidOrigin
    } else {
        RovStatus::InvalidBoth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardRov {
    Valid,
    Invalid,
    NotFound,
}

/// Origin validation as written in RFC 6811: a route is Valid if some
/// covering VRP matches both origin and length, Invalid if VRPs cover it
/// but none match, NotFound otherwise. AS0 VRPs never match.
pub fn rov_standard(prefix: &Prefix, origin: u32, roas: &[RoaRecord]) -> StandardRov {
    let mut covered = false;
    for r in roas {
        if r.prefix.family() != prefix.family() || r.prefix.len() > prefix.len() {
            continue;
        }
        if prefix.truncate(r.prefix.len()) != r.prefix {
            continue;
        }
        covered = true;
        if r.asn != 0 && r.asn == origin && prefix.len() <= r.max_length {
            return StandardRov::Valid;
        }
    }
    if covered {
        StandardRov::Invalid
    } else {
        StandardRov::NotFound
    }
}

/// Per-protocol (probed, responded) counts within `scope`, by linear scan.
pub fn hit_counts(scan: &[ScanRecord], scope: &[Prefix]) -> BTreeMap<String, (u64, u64)> {
    let mut out: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for r in scan {
        let e = out.entry(r.protocol.clone()).or_default();
        let host = Prefix::host(r.address);
        if r.probed && scope.iter().any(|q| contains(q, &host)) {
            e.0 += 1;
            if r.responded {
                e.1 += 1;
            }
        }
    }
    out
}
