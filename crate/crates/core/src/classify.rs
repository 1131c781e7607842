//! Use-case labels for HSPs: CIDR-size buckets, community semantics,
//! aggregation position and scan hit rates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use thiserror::Error;

use crate::prefix::{Family, Prefix, PrefixError};
use crate::route::{Community, RouteRecord, AS_TRANS};
use crate::stats::{median, std_dev};
use crate::trie::PrefixTrie;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UseCaseHint {
    TrafficEngineering,
    OtherV4,
    PeeringSubnet,
    BlackholingV4,
    Reassignment,
    OtherV6,
    BlackholingV6,
}

impl UseCaseHint {
    pub const ALL: [UseCaseHint; 7] = [
        UseCaseHint::TrafficEngineering,
        UseCaseHint::OtherV4,
        UseCaseHint::PeeringSubnet,
        UseCaseHint::BlackholingV4,
        UseCaseHint::Reassignment,
        UseCaseHint::OtherV6,
        UseCaseHint::BlackholingV6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UseCaseHint::TrafficEngineering => "TrafficEngineering",
            UseCaseHint::OtherV4 => "OtherV4",
            UseCaseHint::PeeringSubnet => "PeeringSubnet",
            UseCaseHint::BlackholingV4 => "BlackholingV4",
            UseCaseHint::Reassignment => "Reassignment",
            UseCaseHint::OtherV6 => "OtherV6",
            UseCaseHint::BlackholingV6 => "BlackholingV6",
        }
    }
}

impl fmt::Display for UseCaseHint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn cidr_bucket(p: &Prefix) -> Result<UseCaseHint, PrefixError> {
    use UseCaseHint::*;
    Ok(match (p.family(), p.len()) {
        (Family::V4, 25..=26) => TrafficEngineering,
        (Family::V4, 27..=28) => OtherV4,
        (Family::V4, 29..=30) => PeeringSubnet,
        (Family::V4, 31..=32) => BlackholingV4,
        (Family::V6, 49..=64) => Reassignment,
        (Family::V6, 65..=112) => OtherV6,
        (Family::V6, 113..=128) => BlackholingV6,
        _ => return Err(PrefixError::NotHyperSpecific(*p)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommunityLabel {
    Blackhole,
    NoExport,
    NoAdvertise,
    NoExportSubconfed,
    OtherCommunity,
}

impl CommunityLabel {
    pub const ALL: [CommunityLabel; 5] = [
        CommunityLabel::Blackhole,
        CommunityLabel::NoExport,
        CommunityLabel::NoAdvertise,
        CommunityLabel::NoExportSubconfed,
        CommunityLabel::OtherCommunity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommunityLabel::Blackhole => "Blackhole",
            CommunityLabel::NoExport => "NoExport",
            CommunityLabel::NoAdvertise => "NoAdvertise",
            CommunityLabel::NoExportSubconfed => "NoExportSubconfed",
            CommunityLabel::OtherCommunity => "OtherCommunity",
        }
    }

    fn bit(self) -> u8 {
        1 << self as u8
    }
}

impl fmt::Display for CommunityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommunityLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<CommunityLabel, String> {
        CommunityLabel::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| format!("unknown community label `{s}`"))
    }
}

/// Small set of [`CommunityLabel`]s.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LabelSet(u8);

impl LabelSet {
    pub fn insert(&mut self, label: CommunityLabel) {
        self.0 |= label.bit();
    }

    pub fn contains(&self, label: CommunityLabel) -> bool {
        self.0 & label.bit() != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = CommunityLabel> + '_ {
        CommunityLabel::ALL.into_iter().filter(|l| self.contains(*l))
    }

    pub fn any_bh(&self) -> bool {
        self.contains(CommunityLabel::Blackhole)
    }

    pub fn any_res(&self) -> bool {
        self.contains(CommunityLabel::NoExport) || self.contains(CommunityLabel::NoAdvertise)
    }

    pub fn any_comm(&self) -> bool {
        !self.is_empty()
    }
}

impl FromIterator<CommunityLabel> for LabelSet {
    fn from_iter<I: IntoIterator<Item = CommunityLabel>>(iter: I) -> LabelSet {
        let mut s = LabelSet::default();
        for l in iter {
            s.insert(l);
        }
        s
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(CommunityLabel::as_str).collect();
        f.write_str(&names.join("|"))
    }
}

pub const BLACKHOLE: Community = Community(65535, 666);
pub const NO_EXPORT: Community = Community(65535, 65281);
pub const NO_ADVERTISE: Community = Community(65535, 65282);
pub const NO_EXPORT_SUBCONFED: Community = Community(65535, 65283);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityConfig {
    /// Treat any `X:666` as a blackhole request.
    pub x666_heuristic: bool,
    /// Operator-specific values with a fixed label.
    pub extra: BTreeMap<Community, CommunityLabel>,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        CommunityConfig { x666_heuristic: true, extra: BTreeMap::new() }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct CommunityConfigError {
    pub line: usize,
    pub message: String,
}

impl CommunityConfig {
    /// Parses a table of `asn:value label` lines. `#` starts a comment.
    /// The line `x666 off` (or `on`) toggles the heuristic.
    pub fn parse(text: &str) -> Result<CommunityConfig, CommunityConfigError> {
        let mut cfg = CommunityConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| CommunityConfigError { line: i + 1, message };
            let mut parts = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
            let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(format!("expected two fields, got `{line}`")));
            };
            if key == "x666" {
                cfg.x666_heuristic = match value {
                    "on" | "true" => true,
                    "off" | "false" => false,
                    other => return Err(err(format!("x666 takes on/off, got `{other}`"))),
                };
                continue;
            }
            let community: Community = key.parse().map_err(|e| err(format!("{e}")))?;
            let label: CommunityLabel = value.parse().map_err(err)?;
            cfg.extra.insert(community, label);
        }
        Ok(cfg)
    }
}

pub fn classify_community(c: Community, cfg: &CommunityConfig) -> CommunityLabel {
    if let Some(&label) = cfg.extra.get(&c) {
        return label;
    }
    match c {
        BLACKHOLE => CommunityLabel::Blackhole,
        NO_EXPORT => CommunityLabel::NoExport,
        NO_ADVERTISE => CommunityLabel::NoAdvertise,
        NO_EXPORT_SUBCONFED => CommunityLabel::NoExportSubconfed,
        Community(_, 666) if cfg.x666_heuristic => CommunityLabel::Blackhole,
        _ => CommunityLabel::OtherCommunity,
    }
}

pub fn classify_communities(comms: &[Community], cfg: &CommunityConfig) -> LabelSet {
    comms.iter().map(|&c| classify_community(c, cfg)).collect()
}

/// A column of the community share table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShareKey {
    Label(CommunityLabel),
    AnyBH,
    AnyRES,
    AnyComm,
}

impl ShareKey {
    pub fn all() -> Vec<ShareKey> {
        let mut keys: Vec<ShareKey> = CommunityLabel::ALL.into_iter().map(ShareKey::Label).collect();
        keys.extend([ShareKey::AnyBH, ShareKey::AnyRES, ShareKey::AnyComm]);
        keys
    }

    pub fn holds(self, set: &LabelSet) -> bool {
        match self {
            ShareKey::Label(l) => set.contains(l),
            ShareKey::AnyBH => set.any_bh(),
            ShareKey::AnyRES => set.any_res(),
            ShareKey::AnyComm => set.any_comm(),
        }
    }
}

impl fmt::Display for ShareKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShareKey::Label(l) => f.write_str(l.as_str()),
            ShareKey::AnyBH => f.write_str("AnyBH"),
            ShareKey::AnyRES => f.write_str("AnyRES"),
            ShareKey::AnyComm => f.write_str("AnyComm"),
        }
    }
}

/// Labeled-HSP counts for one snapshot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SnapshotLabelCounts {
    pub total: u64,
    pub counts: BTreeMap<ShareKey, u64>,
}

impl SnapshotLabelCounts {
    /// Counts one label set per HSP.
    pub fn from_sets<'a>(sets: impl IntoIterator<Item = &'a LabelSet>) -> SnapshotLabelCounts {
        let mut out = SnapshotLabelCounts::default();
        for set in sets {
            out.total += 1;
            for key in ShareKey::all() {
                if key.holds(set) {
                    *out.counts.entry(key).or_default() += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareRow {
    pub key: ShareKey,
    pub median: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareStats {
    pub rows: Vec<ShareRow>,
    pub snapshots: usize,
    /// Snapshots without any HSP.
    pub skipped: usize,
}

/// Median and population standard deviation of each label's share over
/// the non-empty snapshots.
pub fn community_share_stats(snapshots: &[SnapshotLabelCounts]) -> ShareStats {
    let used: Vec<&SnapshotLabelCounts> = snapshots.iter().filter(|s| s.total > 0).collect();
    let rows = if used.is_empty() {
        Vec::new()
    } else {
        ShareKey::all()
            .into_iter()
            .map(|key| {
                let shares: Vec<f64> =
                    used.iter().map(|s| s.counts.get(&key).copied().unwrap_or(0) as f64 / s.total as f64).collect();
                ShareRow { key, median: median(&shares).unwrap_or(0.0), std_dev: std_dev(&shares).unwrap_or(0.0) }
            })
            .collect()
    };
    ShareStats { rows, snapshots: used.len(), skipped: snapshots.len() - used.len() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggregationPosition {
    Origin,
    OnPath,
    OffPath,
    Excluded,
    NotAggregated,
}

impl AggregationPosition {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationPosition::Origin => "Origin",
            AggregationPosition::OnPath => "OnPath",
            AggregationPosition::OffPath => "OffPath",
            AggregationPosition::Excluded => "Excluded",
            AggregationPosition::NotAggregated => "NotAggregated",
        }
    }
}

impl fmt::Display for AggregationPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where along the path the route was aggregated. The second value is true
/// when the aggregator ASN is AS_TRANS, which is always classed OffPath.
pub fn aggregation_position_checked(rec: &RouteRecord) -> (AggregationPosition, bool) {
    if rec.atomic_aggregate || rec.has_as_set() {
        return (AggregationPosition::Excluded, false);
    }
    let Some(agg) = &rec.aggregator else {
        return (AggregationPosition::NotAggregated, false);
    };
    if agg.asn == AS_TRANS {
        return (AggregationPosition::OffPath, true);
    }
    let pos = if rec.origin_asn() == Some(agg.asn) {
        AggregationPosition::Origin
    } else if rec.as_path.iter().any(|s| s.asns.contains(&agg.asn)) {
        AggregationPosition::OnPath
    } else {
        AggregationPosition::OffPath
    };
    (pos, false)
}

pub fn aggregation_position(rec: &RouteRecord) -> AggregationPosition {
    aggregation_position_checked(rec).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnchorPosition {
    Origin,
    OnPath,
    OffPath,
    Multiple,
}

impl AnchorPosition {
    pub fn as_str(self) -> &'static str {
        match self {
            AnchorPosition::Origin => "Origin",
            AnchorPosition::OnPath => "OnPath",
            AnchorPosition::OffPath => "OffPath",
            AnchorPosition::Multiple => "Multiple",
        }
    }
}

impl fmt::Display for AnchorPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Common class of an anchor's routes after dropping Excluded and
/// NotAggregated ones, or Multiple on disagreement. `None` if nothing is left.
pub fn anchor_position(positions: impl IntoIterator<Item = AggregationPosition>) -> Option<AnchorPosition> {
    let classes: BTreeSet<AnchorPosition> = positions
        .into_iter()
        .filter_map(|p| match p {
            AggregationPosition::Origin => Some(AnchorPosition::Origin),
            AggregationPosition::OnPath => Some(AnchorPosition::OnPath),
            AggregationPosition::OffPath => Some(AnchorPosition::OffPath),
            AggregationPosition::Excluded | AggregationPosition::NotAggregated => None,
        })
        .collect();
    match classes.len() {
        0 => None,
        1 => classes.into_iter().next(),
        _ => Some(AnchorPosition::Multiple),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanRecord {
    pub protocol: String,
    pub address: IpAddr,
    pub probed: bool,
    pub responded: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ScanParseError {
    pub line: usize,
    pub message: String,
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Parses `protocol,address,probed,responded` lines. A leading header row
/// is skipped.
pub fn parse_scan_csv(text: &str) -> Result<Vec<ScanRecord>, ScanParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if out.is_empty() && i == 0 && cols.first() == Some(&"protocol") {
            continue;
        }
        let err = |message: String| ScanParseError { line: i + 1, message };
        if cols.len() != 4 {
            return Err(err(format!("expected 4 columns, found {}", cols.len())));
        }
        let address = cols[1].parse().map_err(|_| err(format!("bad address `{}`", cols[1])))?;
        let probed = parse_flag(cols[2]).ok_or_else(|| err(format!("bad flag `{}`", cols[2])))?;
        let responded = parse_flag(cols[3]).ok_or_else(|| err(format!("bad flag `{}`", cols[3])))?;
        out.push(ScanRecord { protocol: cols[0].to_string(), address, probed, responded });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HitCounts {
    pub probed: u64,
    pub responded: u64,
}

impl HitCounts {
    /// `None` when nothing was probed.
    pub fn rate(&self) -> Option<f64> {
        (self.probed > 0).then(|| self.responded as f64 / self.probed as f64)
    }
}

/// Per-protocol probe and response counts for addresses inside `scope`.
/// Every protocol in `scan` gets an entry, so protocols with no probed
/// address in scope report an absent rate.
pub fn hit_rate<T>(scan: &[ScanRecord], scope: &PrefixTrie<T>) -> BTreeMap<String, HitCounts> {
    hit_rate_where(scan, |addr| scope.longest_match(addr).is_some())
}

/// Per-protocol counts over the whole scan.
pub fn hit_rate_all(scan: &[ScanRecord]) -> BTreeMap<String, HitCounts> {
    hit_rate_where(scan, |_| true)
}

fn hit_rate_where(scan: &[ScanRecord], in_scope: impl Fn(IpAddr) -> bool) -> BTreeMap<String, HitCounts> {
    let mut out: BTreeMap<String, HitCounts> = BTreeMap::new();
    for r in scan {
        let e = out.entry(r.protocol.clone()).or_default();
        if r.probed && in_scope(r.address) {
            e.probed += 1;
            if r.responded {
                e.responded += 1;
            }
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("baseline hit rate is zero")]
pub struct ZeroBaseline;

/// Signed percentage change of `scope` relative to `baseline`.
pub fn relative_hit_rate_diff(scope: f64, baseline: f64) -> Result<f64, ZeroBaseline> {
    if baseline == 0.0 {
        return Err(ZeroBaseline);
    }
    Ok(100.0 * (scope / baseline - 1.0))
}
