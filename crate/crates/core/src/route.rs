//! Normalized route records produced by the MRT decoder.

use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prefix::{Family, Prefix};

/// Reserved ASN that stands in for a 4-byte ASN on 2-byte sessions.
pub const AS_TRANS: u32 = 23456;

/// Microseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const fn from_secs(secs: u64) -> Timestamp {
        Timestamp(secs * 1_000_000)
    }

    pub const fn new(secs: u64, micros: u32) -> Timestamp {
        Timestamp(secs * 1_000_000 + micros as u64)
    }

    pub const fn secs(self) -> u64 {
        self.0 / 1_000_000
    }

    pub const fn subsec_micros(self) -> u32 {
        (self.0 % 1_000_000) as u32
    }

    pub const fn micros(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.secs(), self.subsec_micros())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed timestamp `{0}`")]
pub struct TimestampError(String);

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Timestamp, TimestampError> {
        let err = || TimestampError(s.to_string());
        let (secs, frac) = match s.split_once('.') {
            Some((a, b)) => (a, b),
            None => (s, ""),
        };
        let secs: u64 = secs.parse().map_err(|_| err())?;
        if frac.len() > 6 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let micros = if frac.is_empty() { 0 } else { frac.parse::<u32>().map_err(|_| err())? * 10u32.pow(6 - frac.len() as u32) };
        secs.checked_mul(1_000_000)
            .and_then(|v| v.checked_add(micros as u64))
            .map(Timestamp)
            .ok_or_else(err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecordKind {
    Announcement,
    Withdrawal,
    RibEntry,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Announcement => "A",
            RecordKind::Withdrawal => "W",
            RecordKind::RibEntry => "R",
        }
    }

    pub fn parse(s: &str) -> Option<RecordKind> {
        match s {
            "A" => Some(RecordKind::Announcement),
            "W" => Some(RecordKind::Withdrawal),
            "R" => Some(RecordKind::RibEntry),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SegmentKind {
    Sequence,
    Set,
}

/// One AS_PATH segment. `asns` is never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSegment {
    pub kind: SegmentKind,
    pub asns: Vec<u32>,
}

impl PathSegment {
    pub fn seq(asns: impl Into<Vec<u32>>) -> PathSegment {
        PathSegment { kind: SegmentKind::Sequence, asns: asns.into() }
    }

    pub fn set(asns: impl Into<Vec<u32>>) -> PathSegment {
        PathSegment { kind: SegmentKind::Set, asns: asns.into() }
    }
}

/// Origin AS of a path: the last ASN if the path ends in a sequence.
pub fn origin_of(path: &[PathSegment]) -> Option<u32> {
    match path.last() {
        Some(PathSegment { kind: SegmentKind::Sequence, asns }) => asns.last().copied(),
        _ => None,
    }
}

/// AS hops after collapsing prepending. An AS_SET counts as a single hop.
pub fn hops_of(path: &[PathSegment]) -> usize {
    let mut hops = 0;
    let mut last: Option<u32> = None;
    for seg in path {
        match seg.kind {
            SegmentKind::Sequence => {
                for &asn in &seg.asns {
                    if last != Some(asn) {
                        hops += 1;
                        last = Some(asn);
                    }
                }
            }
            SegmentKind::Set => {
                hops += 1;
                last = None;
            }
        }
    }
    hops
}

/// Renders a path as `3303 1299 {64496,64497}`.
pub fn format_as_path(path: &[PathSegment]) -> String {
    let mut out = String::new();
    for seg in path {
        if !out.is_empty() {
            out.push(' ');
        }
        match seg.kind {
            SegmentKind::Sequence => {
                let parts: Vec<String> = seg.asns.iter().map(u32::to_string).collect();
                out.push_str(&parts.join(" "));
            }
            SegmentKind::Set => {
                let parts: Vec<String> = seg.asns.iter().map(u32::to_string).collect();
                out.push('{');
                out.push_str(&parts.join(","));
                out.push('}');
            }
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed AS path `{0}`")]
pub struct AsPathError(String);

/// Inverse of [`format_as_path`]. Consecutive plain ASNs form one sequence.
pub fn parse_as_path(text: &str) -> Result<Vec<PathSegment>, AsPathError> {
    let err = || AsPathError(text.to_string());
    let mut path: Vec<PathSegment> = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        if let Some(after) = rest.strip_prefix('{') {
            let end = after.find('}').ok_or_else(err)?;
            let asns = after[..end]
                .split(',')
                .map(|a| a.trim().parse::<u32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| err())?;
            path.push(PathSegment::set(asns));
            rest = after[end + 1..].trim_start();
        } else {
            let end = rest.find([' ', '{']).unwrap_or(rest.len());
            let asn: u32 = rest[..end].parse().map_err(|_| err())?;
            match path.last_mut() {
                Some(seg) if seg.kind == SegmentKind::Sequence => seg.asns.push(asn),
                _ => path.push(PathSegment::seq(vec![asn])),
            }
            rest = rest[end..].trim_start();
        }
    }
    Ok(path)
}

/// Classic 32-bit community, `asn:value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Community(pub u16, pub u16);

impl fmt::Display for Community {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.0, self.1)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed community `{0}`")]
pub struct CommunityError(String);

impl FromStr for Community {
    type Err = CommunityError;

    fn from_str(s: &str) -> Result<Community, CommunityError> {
        let err = || CommunityError(s.to_string());
        let (a, b) = s.trim().split_once(':').ok_or_else(err)?;
        Ok(Community(a.parse().map_err(|_| err())?, b.parse().map_err(|_| err())?))
    }
}

/// Large community (RFC 8092), carried without interpretation.
pub type LargeCommunity = [u32; 3];

/// Extended community (RFC 4360), carried without interpretation.
pub type ExtendedCommunity = [u8; 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Aggregator {
    pub asn: u32,
    pub address: IpAddr,
}

/// One announcement, withdrawal or RIB entry for a single prefix.
///
/// Withdrawals carry an empty path and no attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteRecord {
    pub timestamp: Timestamp,
    pub collector_id: String,
    pub peer_asn: u32,
    pub peer_address: IpAddr,
    pub prefix: Prefix,
    /// Wire length when it exceeded the family maximum (e.g. an IPv4 /33).
    /// `prefix` then holds the host route built from the decoded bits.
    pub abnormal_length: Option<u8>,
    pub kind: RecordKind,
    pub as_path: Vec<PathSegment>,
    pub communities: Vec<Community>,
    pub large_communities: Vec<LargeCommunity>,
    pub extended_communities: Vec<ExtendedCommunity>,
    pub aggregator: Option<Aggregator>,
    pub atomic_aggregate: bool,
}

impl RouteRecord {
    /// A bare record with no path attributes.
    pub fn new(kind: RecordKind, timestamp: Timestamp, peer_asn: u32, peer_address: IpAddr, prefix: Prefix) -> RouteRecord {
        RouteRecord {
            timestamp,
            collector_id: String::new(),
            peer_asn,
            peer_address,
            prefix,
            abnormal_length: None,
            kind,
            as_path: Vec::new(),
            communities: Vec::new(),
            large_communities: Vec::new(),
            extended_communities: Vec::new(),
            aggregator: None,
            atomic_aggregate: false,
        }
    }

    pub fn with_path(mut self, path: Vec<PathSegment>) -> RouteRecord {
        self.as_path = path;
        self
    }

    pub fn with_communities(mut self, communities: Vec<Community>) -> RouteRecord {
        self.communities = communities;
        self
    }

    pub fn origin_asn(&self) -> Option<u32> {
        origin_of(&self.as_path)
    }

    pub fn hops(&self) -> usize {
        hops_of(&self.as_path)
    }

    pub fn family(&self) -> Family {
        self.prefix.family()
    }

    pub fn is_withdrawal(&self) -> bool {
        self.kind == RecordKind::Withdrawal
    }

    pub fn has_as_set(&self) -> bool {
        self.as_path.iter().any(|s| s.kind == SegmentKind::Set)
    }
}
