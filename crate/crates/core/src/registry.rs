//! IRR route objects and validated ROAs: HSP-ROA classification, route
//! origin validation and cross-dataset origin attribution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use thiserror::Error;

use crate::prefix::{Family, Prefix};
use crate::trie::PrefixTrie;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("max length {max_length} is shorter than {prefix}")]
    MaxLengthTooShort { prefix: Prefix, max_length: u8 },
    #[error("max length {max_length} exceeds the {family} maximum")]
    MaxLengthTooLong { family: Family, max_length: u8 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoaRecord {
    pub prefix: Prefix,
    pub max_length: u8,
    pub asn: u32,
    pub date: Option<NaiveDate>,
}

impl RoaRecord {
    pub fn new(prefix: Prefix, max_length: u8, asn: u32) -> Result<RoaRecord, RegistryError> {
        if max_length < prefix.len() {
            return Err(RegistryError::MaxLengthTooShort { prefix, max_length });
        }
        if max_length > prefix.family().max_len() {
            return Err(RegistryError::MaxLengthTooLong { family: prefix.family(), max_length });
        }
        Ok(RoaRecord { prefix, max_length, asn, date: None })
    }

    pub fn with_date(mut self, date: NaiveDate) -> RoaRecord {
        self.date = Some(date);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoaHspKind {
    Explicit,
    Implicit,
    NonHsp,
}

impl RoaHspKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RoaHspKind::Explicit => "Explicit",
            RoaHspKind::Implicit => "Implicit",
            RoaHspKind::NonHsp => "NonHsp",
        }
    }
}

pub fn roa_hsp_kind(roa: &RoaRecord) -> RoaHspKind {
    let boundary = roa.prefix.family().hsp_boundary();
    match (roa.prefix.len() > boundary, roa.max_length > boundary) {
        (true, true) => RoaHspKind::Explicit,
        (false, true) => RoaHspKind::Implicit,
        _ => RoaHspKind::NonHsp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RovStatus {
    NotFound,
    Valid,
    InvalidLength,
    InvalidOrigin,
    InvalidBoth,
}

impl RovStatus {
    pub const ALL: [RovStatus; 5] =
        [RovStatus::NotFound, RovStatus::Valid, RovStatus::InvalidLength, RovStatus::InvalidOrigin, RovStatus::InvalidBoth];

    pub fn as_str(self) -> &'static str {
        match self {
            RovStatus::NotFound => "NotFound",
            RovStatus::Valid => "Valid",
            RovStatus::InvalidLength => "InvalidLength",
            RovStatus::InvalidOrigin => "InvalidOrigin",
            RovStatus::InvalidBoth => "InvalidBoth",
        }
    }

    pub fn is_invalid(self) -> bool {
        matches!(self, RovStatus::InvalidLength | RovStatus::InvalidOrigin | RovStatus::InvalidBoth)
    }
}

impl fmt::Display for RovStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// ROAs indexed by prefix for covering lookups.
#[derive(Debug, Clone, Default)]
pub struct RoaSet {
    trie: PrefixTrie<Vec<RoaRecord>>,
    len: usize,
}

impl RoaSet {
    pub fn new() -> RoaSet {
        RoaSet::default()
    }

    pub fn insert(&mut self, roa: RoaRecord) {
        self.trie.get_or_insert_with(roa.prefix, Vec::new).push(roa);
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &RoaRecord> {
        self.trie.iter().flat_map(|(_, v)| v.iter())
    }

    /// ROAs whose prefix contains `prefix`.
    pub fn covering(&self, prefix: &Prefix) -> impl Iterator<Item = &RoaRecord> {
        self.trie.covering(prefix).into_iter().flat_map(|(_, v)| v.iter())
    }

    pub fn validate(&self, prefix: &Prefix, origin: u32) -> RovStatus {
        rov_validate(prefix, origin, self)
    }
}

impl FromIterator<RoaRecord> for RoaSet {
    fn from_iter<I: IntoIterator<Item = RoaRecord>>(iter: I) -> RoaSet {
        let mut set = RoaSet::new();
        for r in iter {
            set.insert(r);
        }
        set
    }
}

/// Four-way origin validation. With several covering ROAs the best
/// outcome wins, in the order Valid, InvalidLength, InvalidOrigin,
/// InvalidBoth. An AS0 ROA never matches an origin.
pub fn rov_validate(prefix: &Prefix, origin: u32, roas: &RoaSet) -> RovStatus {
    let mut best: Option<RovStatus> = None;
    for roa in roas.covering(prefix) {
        let status = match (prefix.len() <= roa.max_length, roa.asn != 0 && origin == roa.asn) {
            (true, true) => return RovStatus::Valid,
            (false, true) => RovStatus::InvalidLength,
            (true, false) => RovStatus::InvalidOrigin,
            (false, false) => RovStatus::InvalidBoth,
        };
        best = Some(best.map_or(status, |b| b.min(status)));
    }
    best.unwrap_or(RovStatus::NotFound)
}

fn parse_asn(s: &str) -> Option<u32> {
    let s = s.trim();
    let digits = s.strip_prefix("AS").or_else(|| s.strip_prefix("as")).unwrap_or(s);
    digits.parse().ok()
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().or_else(|| NaiveDate::parse_from_str(s, "%Y%m%d").ok())
}

/// Parses validated ROA CSV with columns `prefix,max_length,asn[,date]`.
/// An empty max length means the prefix length. A header row is optional.
pub fn parse_roa_csv(text: &str) -> Result<Vec<RoaRecord>, RegistryError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.first().is_some_and(|c| c.eq_ignore_ascii_case("prefix")) {
            continue;
        }
        let err = |message: String| RegistryError::Parse { line: i + 1, message };
        if !(3..=4).contains(&cols.len()) {
            return Err(err(format!("expected 3 or 4 columns, found {}", cols.len())));
        }
        let prefix: Prefix = cols[0].parse().map_err(|e| err(format!("{e}")))?;
        let max_length = if cols[1].is_empty() {
            prefix.len()
        } else {
            cols[1].parse().map_err(|_| err(format!("bad max length `{}`", cols[1])))?
        };
        let asn = parse_asn(cols[2]).ok_or_else(|| err(format!("bad ASN `{}`", cols[2])))?;
        let mut roa = RoaRecord::new(prefix, max_length, asn).map_err(|e| err(e.to_string()))?;
        if let Some(d) = cols.get(3).filter(|d| !d.is_empty()) {
            roa = roa.with_date(parse_date(d).ok_or_else(|| err(format!("bad date `{d}`")))?);
        }
        out.push(roa);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IrrRouteObject {
    pub prefix: Prefix,
    pub origin_asn: u32,
    pub source: String,
    pub date: Option<NaiveDate>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RpslParse {
    /// Sorted, one entry per (prefix, origin, source, date).
    pub objects: Vec<IrrRouteObject>,
    pub missing_origin: u64,
    /// route/route6 objects whose prefix or origin does not parse.
    pub malformed: u64,
}

/// Extracts route and route6 objects from an RPSL dump. Objects are
/// separated by blank lines; lines starting with whitespace or `+`
/// continue the previous attribute.
pub fn parse_rpsl(text: &str, date: Option<NaiveDate>) -> RpslParse {
    let mut out = RpslParse::default();
    let mut seen = BTreeSet::new();
    let mut attrs: Vec<(String, String)> = Vec::new();
    let mut flush = |attrs: &mut Vec<(String, String)>, out: &mut RpslParse| {
        if let Some(obj) = rpsl_route(attrs, date, out) {
            seen.insert(obj);
        }
        attrs.clear();
    };
    for raw in text.lines() {
        if raw.trim().is_empty() {
            flush(&mut attrs, &mut out);
            continue;
        }
        if raw.starts_with('%') || raw.starts_with('#') {
            continue;
        }
        if raw.starts_with(|c: char| c.is_whitespace() || c == '+') {
            if let Some((_, value)) = attrs.last_mut() {
                let more = strip_comment(raw[1..].trim());
                if !more.is_empty() {
                    value.push(' ');
                    value.push_str(more);
                }
            }
            continue;
        }
        if let Some((key, value)) = raw.split_once(':') {
            attrs.push((key.trim().to_ascii_lowercase(), strip_comment(value.trim()).to_string()));
        }
    }
    flush(&mut attrs, &mut out);
    out.objects = seen.into_iter().collect();
    out
}

fn strip_comment(s: &str) -> &str {
    s.split('#').next().unwrap_or("").trim()
}

fn rpsl_route(attrs: &[(String, String)], date: Option<NaiveDate>, out: &mut RpslParse) -> Option<IrrRouteObject> {
    let (class, prefix_text) = attrs.first()?;
    if class != "route" && class != "route6" {
        return None;
    }
    let get = |k: &str| attrs.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
    let Some(origin) = get("origin") else {
        out.missing_origin += 1;
        return None;
    };
    let (Ok(prefix), Some(origin_asn)) = (prefix_text.parse::<Prefix>(), parse_asn(origin)) else {
        out.malformed += 1;
        return None;
    };
    let source = get("source").unwrap_or("").to_ascii_uppercase();
    Some(IrrRouteObject { prefix, origin_asn, source, date })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OriginAttribution {
    BGPOnly,
    IRROnly,
    RPKIOnly,
    Multiple,
}

impl OriginAttribution {
    pub const ALL: [OriginAttribution; 4] =
        [OriginAttribution::BGPOnly, OriginAttribution::IRROnly, OriginAttribution::RPKIOnly, OriginAttribution::Multiple];

    pub fn as_str(self) -> &'static str {
        match self {
            OriginAttribution::BGPOnly => "BGPOnly",
            OriginAttribution::IRROnly => "IRROnly",
            OriginAttribution::RPKIOnly => "RPKIOnly",
            OriginAttribution::Multiple => "Multiple",
        }
    }
}

impl fmt::Display for OriginAttribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn attribute_origins(
    bgp: &BTreeSet<u32>,
    irr: &BTreeSet<u32>,
    rpki: &BTreeSet<u32>,
) -> BTreeMap<u32, OriginAttribution> {
    let all: BTreeSet<u32> = bgp.iter().chain(irr).chain(rpki).copied().collect();
    all.into_iter()
        .map(|asn| {
            let class = match (bgp.contains(&asn), irr.contains(&asn), rpki.contains(&asn)) {
                (true, false, false) => OriginAttribution::BGPOnly,
                (false, true, false) => OriginAttribution::IRROnly,
                (false, false, true) => OriginAttribution::RPKIOnly,
                _ => OriginAttribution::Multiple,
            };
            (asn, class)
        })
        .collect()
}

/// Origin ASNs of HSP ROAs. Implicit ROAs count only when asked.
pub fn rpki_hsp_origins<'a>(
    roas: impl IntoIterator<Item = &'a RoaRecord>,
    family: Option<Family>,
    include_implicit: bool,
) -> BTreeSet<u32> {
    roas.into_iter()
        .filter(|r| family.is_none_or(|f| r.prefix.family() == f))
        .filter(|r| match roa_hsp_kind(r) {
            RoaHspKind::Explicit => true,
            RoaHspKind::Implicit => include_implicit,
            RoaHspKind::NonHsp => false,
        })
        .map(|r| r.asn)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnchorClass {
    Collectors,
    Irr,
    Rpki,
    Aggregated,
    Multiple,
}

impl AnchorClass {
    pub const ALL: [AnchorClass; 5] =
        [AnchorClass::Collectors, AnchorClass::Irr, AnchorClass::Rpki, AnchorClass::Aggregated, AnchorClass::Multiple];

    pub fn as_str(self) -> &'static str {
        match self {
            AnchorClass::Collectors => "Collectors",
            AnchorClass::Irr => "IRR",
            AnchorClass::Rpki => "RPKI",
            AnchorClass::Aggregated => "Aggregated",
            AnchorClass::Multiple => "Multiple",
        }
    }
}

impl fmt::Display for AnchorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Anchor prefixes found in each source.
#[derive(Debug, Clone, Default)]
pub struct AnchorSources {
    pub collectors: BTreeSet<Prefix>,
    pub irr: BTreeSet<Prefix>,
    pub rpki: BTreeSet<Prefix>,
    pub aggregated: BTreeSet<Prefix>,
}

pub fn anchor_dataset_attribution(sources: &AnchorSources) -> BTreeMap<Prefix, AnchorClass> {
    let tagged = [
        (&sources.collectors, AnchorClass::Collectors),
        (&sources.irr, AnchorClass::Irr),
        (&sources.rpki, AnchorClass::Rpki),
        (&sources.aggregated, AnchorClass::Aggregated),
    ];
    let mut out: BTreeMap<Prefix, AnchorClass> = BTreeMap::new();
    for (set, class) in tagged {
        for anchor in set {
            out.entry(*anchor).and_modify(|c| *c = AnchorClass::Multiple).or_insert(class);
        }
    }
    out
}

/// Class totals, with every class present.
pub fn class_counts<K: Ord + Copy, V: Ord + Copy>(map: &BTreeMap<K, V>, all: &[V]) -> BTreeMap<V, u64> {
    let mut counts: BTreeMap<V, u64> = all.iter().map(|&c| (c, 0)).collect();
    for v in map.values() {
        *counts.entry(*v).or_default() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    fn roa(prefix: &str, max: u8, asn: u32) -> RoaRecord {
        RoaRecord::new(p(prefix), max, asn).unwrap()
    }

    #[test]
    fn hsp_kinds() {
        assert_eq!(roa_hsp_kind(&roa("192.0.2.0/25", 32, 1)), RoaHspKind::Explicit);
        assert_eq!(roa_hsp_kind(&roa("192.0.2.0/24", 25, 1)), RoaHspKind::Implicit);
        assert_eq!(roa_hsp_kind(&roa("192.0.2.0/24", 24, 1)), RoaHspKind::NonHsp);
        assert_eq!(roa_hsp_kind(&roa("2001:db8::/48", 64, 1)), RoaHspKind::Implicit);
    }

    #[test]
    fn roa_validation() {
        assert!(RoaRecord::new(p("192.0.2.0/24"), 23, 1).is_err());
        assert!(RoaRecord::new(p("192.0.2.0/24"), 33, 1).is_err());
    }

    #[test]
    fn rov_examples() {
        let set: RoaSet = [roa("192.0.2.0/24", 24, 64496)].into_iter().collect();
        assert_eq!(rov_validate(&p("192.0.2.0/25"), 64496, &set), RovStatus::InvalidLength);
        assert_eq!(rov_validate(&p("192.0.2.0/25"), 64511, &set), RovStatus::InvalidBoth);
        assert_eq!(rov_validate(&p("192.0.2.0/24"), 64511, &set), RovStatus::InvalidOrigin);
        assert_eq!(rov_validate(&p("198.51.100.0/25"), 64496, &set), RovStatus::NotFound);
        let wider: RoaSet = [roa("192.0.2.0/24", 25, 64496)].into_iter().collect();
        assert_eq!(rov_validate(&p("192.0.2.0/25"), 64496, &wider), RovStatus::Valid);
    }

    #[test]
    fn rov_prefers_length_over_origin() {
        let set: RoaSet = [roa("192.0.2.0/24", 24, 64496), roa("192.0.2.0/23", 25, 64500)].into_iter().collect();
        // /25 from 64496: first ROA fails length only, second fails origin only
        assert_eq!(rov_validate(&p("192.0.2.0/25"), 64496, &set), RovStatus::InvalidLength);
    }

    #[test]
    fn roa_csv() {
        let text = "prefix,max_length,asn,date\n192.0.2.0/24,25,AS64496,2020-01-01\n2001:db8::/32,,64497,\n";
        let roas = parse_roa_csv(text).unwrap();
        assert_eq!(roas.len(), 2);
        assert_eq!(roas[0].max_length, 25);
        assert_eq!(roas[1].max_length, 32);
        assert!(parse_roa_csv("192.0.2.0/24,20,1").is_err());
    }

    #[test]
    fn rpsl_minimal_and_missing_origin() {
        let one = parse_rpsl("route: 192.0.2.0/25\norigin: AS64496\n", None);
        assert_eq!(one.objects.len(), 1);
        assert_eq!(one.objects[0].origin_asn, 64496);
        let none = parse_rpsl("route: 192.0.2.0/25\ndescr: nothing\n", None);
        assert_eq!((none.objects.len(), none.missing_origin), (0, 1));
    }

    #[test]
    fn rpsl_dump() {
        let dump = "\
% comment header

route:          192.0.2.0/25
descr:          first
                continued
origin:         AS64496 # trailing
mnt-by:         MNT-X
source:         ripe

aut-num:        AS64496
as-name:        IGNORED

route6:         2001:db8:1::/49
+
origin:         AS64497
source:         RADB

route:          192.0.2.0/25
origin:         AS64496
source:         RIPE

route:          not-a-prefix
origin:         AS1
";
        let parsed = parse_rpsl(dump, None);
        assert_eq!(parsed.objects.len(), 2);
        assert_eq!(parsed.malformed, 1);
        assert_eq!(parsed.objects[0].source, "RIPE");
        assert_eq!(parsed.objects[1].prefix, p("2001:db8:1::/49"));
    }

    #[test]
    fn origin_attribution() {
        let bgp = BTreeSet::from([1, 2]);
        let irr = BTreeSet::from([2, 3]);
        let rpki = BTreeSet::from([4]);
        let m = attribute_origins(&bgp, &irr, &rpki);
        assert_eq!(m[&1], OriginAttribution::BGPOnly);
        assert_eq!(m[&2], OriginAttribution::Multiple);
        assert_eq!(m[&3], OriginAttribution::IRROnly);
        assert_eq!(m[&4], OriginAttribution::RPKIOnly);
        assert!(attribute_origins(&BTreeSet::new(), &BTreeSet::new(), &BTreeSet::new()).is_empty());
    }

    #[test]
    fn anchor_attribution() {
        let sources = AnchorSources {
            collectors: BTreeSet::from([p("192.0.2.0/24"), p("198.51.100.0/24")]),
            irr: BTreeSet::from([p("192.0.2.0/24")]),
            rpki: BTreeSet::new(),
            aggregated: BTreeSet::from([p("203.0.113.0/24")]),
        };
        let m = anchor_dataset_attribution(&sources);
        assert_eq!(m[&p("192.0.2.0/24")], AnchorClass::Multiple);
        assert_eq!(m[&p("203.0.113.0/24")], AnchorClass::Aggregated);
        let counts = class_counts(&m, &AnchorClass::ALL);
        assert_eq!(counts.values().sum::<u64>(), 3);
    }

    #[test]
    fn hsp_origin_sets() {
        let roas = [roa("192.0.2.0/25", 32, 1), roa("192.0.2.0/24", 28, 2), roa("192.0.2.0/24", 24, 3)];
        assert_eq!(rpki_hsp_origins(&roas, None, false), BTreeSet::from([1]));
        assert_eq!(rpki_hsp_origins(&roas, Some(Family::V4), true), BTreeSet::from([1, 2]));
    }
}
