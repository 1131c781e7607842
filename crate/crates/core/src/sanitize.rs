//! Sanitization rules: drop routes that would distort HSP measurements and
//! keep a machine-readable reason for every drop.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::ops::RangeInclusive;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use chrono::NaiveDate;
use thiserror::Error;

use crate::prefix::{Family, Prefix};
use crate::route::{RouteRecord, Timestamp};
use crate::stats::median;
use crate::trie::PrefixTrie;

/// Bundled default rule set.
pub const DEFAULT_RULES: &str = include_str!("default_rules.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    PrivateOriginAsn,
    PrivateOrReservedPrefix,
    ClassDE,
    AbnormalLength,
    NoOrigin,
    FeederInternal,
    NoisyOrigin,
    NoisyPeer,
    UnallocatedResource,
}

impl FilterKind {
    pub const ALL: [FilterKind; 9] = [
        FilterKind::PrivateOriginAsn,
        FilterKind::PrivateOrReservedPrefix,
        FilterKind::ClassDE,
        FilterKind::AbnormalLength,
        FilterKind::NoOrigin,
        FilterKind::FeederInternal,
        FilterKind::NoisyOrigin,
        FilterKind::NoisyPeer,
        FilterKind::UnallocatedResource,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::PrivateOriginAsn => "PrivateOriginAsn",
            FilterKind::PrivateOrReservedPrefix => "PrivateOrReservedPrefix",
            FilterKind::ClassDE => "ClassDE",
            FilterKind::AbnormalLength => "AbnormalLength",
            FilterKind::NoOrigin => "NoOrigin",
            FilterKind::FeederInternal => "FeederInternal",
            FilterKind::NoisyOrigin => "NoisyOrigin",
            FilterKind::NoisyPeer => "NoisyPeer",
            FilterKind::UnallocatedResource => "UnallocatedResource",
        }
    }

    /// Kinds that look at path attributes and therefore never match a
    /// withdrawal.
    fn needs_attributes(self) -> bool {
        matches!(
            self,
            FilterKind::PrivateOriginAsn | FilterKind::NoOrigin | FilterKind::FeederInternal | FilterKind::NoisyOrigin
        )
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<FilterKind, String> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown filter kind `{s}`"))
    }
}

/// Half-open `[start, end)` interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Timeframe {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Timeframe {
    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    fn overlaps(&self, other: &Timeframe) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Midnight UTC of `start` up to midnight UTC of `end`.
    pub fn from_dates(start: NaiveDate, end: NaiveDate) -> Timeframe {
        Timeframe { start: date_start(start), end: date_start(end) }
    }
}

pub(crate) fn date_start(d: NaiveDate) -> Timestamp {
    let secs = d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp();
    Timestamp::from_secs(secs.max(0) as u64)
}

/// Special-purpose IPv4 blocks treated as private or reserved.
pub const RESERVED_V4: &[&str] = &[
    "0.0.0.0/8",
    "10.0.0.0/8",
    "100.64.0.0/10",
    "127.0.0.0/8",
    "169.254.0.0/16",
    "172.16.0.0/12",
    "192.0.0.0/24",
    "192.0.2.0/24",
    "192.168.0.0/16",
    "198.18.0.0/15",
    "198.51.100.0/24",
    "203.0.113.0/24",
];

/// Special-purpose IPv6 blocks treated as private or reserved.
pub const RESERVED_V6: &[&str] = &["::1/128", "fc00::/7", "fe80::/10", "2001:db8::/32"];

/// Allocated address space and ASNs taken from RIR delegation files.
#[derive(Debug, Default)]
pub struct Delegations {
    prefixes: PrefixTrie<()>,
    asns: Vec<RangeInclusive<u32>>,
}

impl Delegations {
    /// Parses the RIR statistics exchange format
    /// (`registry|cc|type|start|value|date|status`). Only `allocated` and
    /// `assigned` entries count.
    pub fn parse(text: &str) -> Result<Delegations, ConfigError> {
        let mut out = Delegations::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('|').collect();
            if fields.len() < 7 || fields[1] == "*" || fields[3] == "*" {
                // version and summary lines
                continue;
            }
            if !matches!(fields[6], "allocated" | "assigned") {
                continue;
            }
            let bad = |what: &str| ConfigError::Invalid { line: lineno + 1, message: format!("delegation {what}: {line}") };
            match fields[2] {
                "ipv4" => {
                    let start: std::net::Ipv4Addr = fields[3].parse().map_err(|_| bad("address"))?;
                    let count: u64 = fields[4].parse().map_err(|_| bad("count"))?;
                    for p in ipv4_range_blocks(u32::from(start) as u64, count) {
                        out.prefixes.insert(p, ());
                    }
                }
                "ipv6" => {
                    let p: Prefix = format!("{}/{}", fields[3], fields[4]).parse().map_err(|_| bad("prefix"))?;
                    out.prefixes.insert(p, ());
                }
                "asn" => {
                    let start: u32 = fields[3].parse().map_err(|_| bad("asn"))?;
                    let count: u32 = fields[4].parse().map_err(|_| bad("count"))?;
                    if count > 0 {
                        out.asns.push(start..=start.saturating_add(count - 1));
                    }
                }
                _ => {}
            }
        }
        Ok(out)
    }

    fn prefix_allocated(&self, p: &Prefix) -> bool {
        self.prefixes.is_covered(p)
    }

    fn asn_allocated(&self, asn: u32) -> bool {
        self.asns.is_empty() || self.asns.iter().any(|r| r.contains(&asn))
    }
}

/// Splits `[start, start + count)` into maximal aligned CIDR blocks.
fn ipv4_range_blocks(mut start: u64, mut count: u64) -> Vec<Prefix> {
    let mut out = Vec::new();
    let end = (start + count).min(1 << 32);
    count = end.saturating_sub(start);
    while count > 0 {
        let align = if start == 0 { 32 } else { start.trailing_zeros().min(32) };
        let mut size_log = align;
        while (1u64 << size_log) > count {
            size_log -= 1;
        }
        let len = 32 - size_log as u8;
        if let Ok(p) = Prefix::new(Family::V4, start as u128, len) {
            out.push(p);
        }
        start += 1 << size_log;
        count -= 1 << size_log;
    }
    out
}

/// What a rule tests, with its parameters.
#[derive(Debug, Clone)]
pub enum RuleMatch {
    PrivateOriginAsn(RangeInclusive<u32>),
    PrivateOrReservedPrefix(Vec<Prefix>),
    ClassDE,
    AbnormalLength,
    NoOrigin,
    FeederInternal,
    NoisyOrigin(BTreeSet<u32>),
    NoisyPeer(BTreeSet<u32>),
    UnallocatedResource(Arc<Delegations>),
}

impl RuleMatch {
    pub fn kind(&self) -> FilterKind {
        match self {
            RuleMatch::PrivateOriginAsn(_) => FilterKind::PrivateOriginAsn,
            RuleMatch::PrivateOrReservedPrefix(_) => FilterKind::PrivateOrReservedPrefix,
            RuleMatch::ClassDE => FilterKind::ClassDE,
            RuleMatch::AbnormalLength => FilterKind::AbnormalLength,
            RuleMatch::NoOrigin => FilterKind::NoOrigin,
            RuleMatch::FeederInternal => FilterKind::FeederInternal,
            RuleMatch::NoisyOrigin(_) => FilterKind::NoisyOrigin,
            RuleMatch::NoisyPeer(_) => FilterKind::NoisyPeer,
            RuleMatch::UnallocatedResource(_) => FilterKind::UnallocatedResource,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilterRule {
    pub id: String,
    pub family: Option<Family>,
    /// Active windows; empty means the entire period.
    pub windows: Vec<Timeframe>,
    pub matcher: RuleMatch,
    param: String,
}

impl FilterRule {
    pub fn new(id: impl Into<String>, family: Option<Family>, matcher: RuleMatch) -> FilterRule {
        FilterRule { id: id.into(), family, windows: Vec::new(), matcher, param: String::new() }
    }

    pub fn with_window(mut self, window: Timeframe) -> FilterRule {
        self.windows.push(window);
        self
    }

    pub fn kind(&self) -> FilterKind {
        self.matcher.kind()
    }

    /// Tests the rule against one record. `feeder_asn` is the AS of the
    /// collector session the record came from.
    pub fn matches(&self, rec: &RouteRecord, feeder_asn: u32) -> bool {
        if let Some(f) = self.family {
            if rec.family() != f {
                return false;
            }
        }
        if !self.windows.is_empty() && !self.windows.iter().any(|w| w.contains(rec.timestamp)) {
            return false;
        }
        if rec.is_withdrawal() && self.kind().needs_attributes() {
            return false;
        }
        let origin = rec.origin_asn();
        match &self.matcher {
            RuleMatch::PrivateOriginAsn(range) => origin.is_some_and(|o| range.contains(&o)),
            RuleMatch::PrivateOrReservedPrefix(blocks) => blocks.iter().any(|b| b.contains(&rec.prefix)),
            RuleMatch::ClassDE => rec.family() == Family::V4 && rec.prefix.bits() >= 224 << 24,
            RuleMatch::AbnormalLength => rec.abnormal_length.is_some(),
            RuleMatch::NoOrigin => origin.is_none(),
            RuleMatch::FeederInternal => {
                rec.prefix.is_hyper_specific() && origin == Some(feeder_asn) && rec.hops() < 2
            }
            RuleMatch::NoisyOrigin(asns) => origin.is_some_and(|o| asns.contains(&o)),
            RuleMatch::NoisyPeer(asns) => asns.contains(&rec.peer_asn),
            RuleMatch::UnallocatedResource(d) => {
                !d.prefix_allocated(&rec.prefix)
                    || (!rec.is_withdrawal() && origin.is_some_and(|o| !d.asn_allocated(o)))
            }
        }
    }

    fn same_definition(&self, other: &FilterRule) -> bool {
        self.kind() == other.kind() && self.family == other.family && self.param == other.param
    }
}

/// Result of filtering one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterOutcome {
    Kept,
    Dropped { kind: FilterKind, rule_id: String },
}

impl FilterOutcome {
    pub fn is_kept(&self) -> bool {
        matches!(self, FilterOutcome::Kept)
    }
}

/// First matching rule wins.
pub fn apply_filters(rec: &RouteRecord, rules: &[FilterRule], feeder_asn: u32) -> FilterOutcome {
    match rules.iter().find(|r| r.matches(rec, feeder_asn)) {
        Some(rule) => FilterOutcome::Dropped { kind: rule.kind(), rule_id: rule.id.clone() },
        None => FilterOutcome::Kept,
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("line {line}: rule `{id}` contradicts an earlier definition: {message}")]
    Contradiction { line: usize, id: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Loaded rules plus bookkeeping about what the loader merged away.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    pub rules: Vec<FilterRule>,
    /// Windows dropped because an earlier rule with the same definition
    /// already covers exactly that window.
    pub redundant_windows: usize,
}

impl RuleSet {
    pub fn apply(&self, rec: &RouteRecord, feeder_asn: u32) -> FilterOutcome {
        apply_filters(rec, &self.rules, feeder_asn)
    }

    pub fn get(&self, id: &str) -> Option<&FilterRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// The bundled defaults.
    pub fn default_rules() -> RuleSet {
        load_rules(DEFAULT_RULES, None).expect("bundled rules are valid")
    }
}

/// Parses a rule file (`id,kind,family,param,start,end`). Relative paths in
/// `UnallocatedResource` params resolve against `base_dir`.
pub fn load_rules(text: &str, base_dir: Option<&Path>) -> Result<RuleSet, ConfigError> {
    let mut set = RuleSet::default();
    let mut drafts: Vec<Draft> = Vec::new();
    let mut seen_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if !seen_header && cols.first() == Some(&"id") {
            seen_header = true;
            continue;
        }
        seen_header = true;
        if cols.len() != 6 {
            return Err(ConfigError::Invalid { line, message: format!("expected 6 columns, found {}", cols.len()) });
        }
        let invalid = |message: String| ConfigError::Invalid { line, message };
        let (id, kind, family, param, start, end) = (cols[0], cols[1], cols[2], cols[3], cols[4], cols[5]);
        if id.is_empty() {
            return Err(invalid("empty rule id".into()));
        }
        let kind: FilterKind = kind.parse().map_err(invalid)?;
        let family = match family {
            "" => None,
            "4" => Some(Family::V4),
            "6" => Some(Family::V6),
            other => return Err(invalid(format!("family must be 4, 6 or empty, got `{other}`"))),
        };
        let window = match (start, end) {
            ("", "") => None,
            (s, e) if !s.is_empty() && !e.is_empty() => {
                let s = NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| invalid(format!("start date: {e}")))?;
                let e = NaiveDate::parse_from_str(e, "%Y-%m-%d").map_err(|e| invalid(format!("end date: {e}")))?;
                if s >= e {
                    return Err(invalid("start date must precede end date".into()));
                }
                Some(Timeframe::from_dates(s, e))
            }
            _ => return Err(invalid("start and end must both be set or both be empty".into())),
        };
        let matcher = parse_matcher(kind, family, param, base_dir).map_err(invalid)?;
        let mut rule = FilterRule { id: id.to_string(), family, windows: Vec::new(), matcher, param: param.to_string() };

        let Some(pos) = drafts.iter().position(|d| d.rule.id == id) else {
            let redundant = is_redundant(&drafts, &rule, window);
            if redundant {
                set.redundant_windows += 1;
            } else if let Some(w) = window {
                rule.windows.push(w);
            }
            drafts.push(Draft { rule, seen: window.into_iter().collect(), windowed: window.is_some(), redundant });
            continue;
        };
        let contradiction = |message: &str| ConfigError::Contradiction { line, id: id.to_string(), message: message.into() };
        let existing = &drafts[pos];
        if !existing.rule.same_definition(&rule) {
            return Err(contradiction("same id with a different kind, family or parameter"));
        }
        let Some(w) = window else {
            return Err(contradiction("entire-period row for a windowed rule"));
        };
        if !existing.windowed {
            return Err(contradiction("windowed row for an entire-period rule"));
        }
        if existing.seen.iter().any(|x| x.overlaps(&w)) {
            return Err(contradiction("overlapping windows"));
        }
        if is_redundant(&drafts[..pos], &rule, Some(w)) {
            set.redundant_windows += 1;
        } else {
            drafts[pos].rule.windows.push(w);
        }
        drafts[pos].seen.push(w);
    }
    // rules whose every row was redundant have nothing left to do
    set.rules = drafts.into_iter().filter(|d| if d.windowed { !d.rule.windows.is_empty() } else { !d.redundant }).map(|d| d.rule).collect();
    Ok(set)
}

struct Draft {
    rule: FilterRule,
    /// Every window listed for the id, including redundant ones.
    seen: Vec<Timeframe>,
    windowed: bool,
    redundant: bool,
}

/// True if an earlier rule with the same definition already covers `window`
/// exactly (or covers the entire period).
fn is_redundant(earlier: &[Draft], rule: &FilterRule, window: Option<Timeframe>) -> bool {
    earlier.iter().filter(|d| d.rule.same_definition(rule)).any(|d| match window {
        None => !d.windowed,
        Some(w) => !d.windowed || d.rule.windows.contains(&w),
    })
}

fn parse_asn(s: &str) -> Result<u32, String> {
    let digits = s.strip_prefix("AS").or_else(|| s.strip_prefix("as")).unwrap_or(s);
    digits.parse().map_err(|_| format!("bad ASN `{s}`"))
}

fn parse_matcher(kind: FilterKind, family: Option<Family>, param: &str, base_dir: Option<&Path>) -> Result<RuleMatch, String> {
    let no_param = |m: RuleMatch| {
        if param.is_empty() {
            Ok(m)
        } else {
            Err(format!("{kind} takes no parameter"))
        }
    };
    match kind {
        FilterKind::PrivateOriginAsn => {
            let (a, b) = param.split_once('-').ok_or_else(|| format!("expected ASN range `a-b`, got `{param}`"))?;
            let (a, b) = (parse_asn(a.trim())?, parse_asn(b.trim())?);
            if a > b {
                return Err(format!("empty ASN range `{param}`"));
            }
            Ok(RuleMatch::PrivateOriginAsn(a..=b))
        }
        FilterKind::PrivateOrReservedPrefix => {
            let blocks: Vec<Prefix> = if param.is_empty() {
                let mut texts: Vec<&str> = Vec::new();
                if family != Some(Family::V6) {
                    texts.extend(RESERVED_V4);
                }
                if family != Some(Family::V4) {
                    texts.extend(RESERVED_V6);
                }
                texts.iter().map(|t| t.parse().expect("static prefix list")).collect()
            } else {
                param
                    .split_whitespace()
                    .map(|t| t.parse::<Prefix>().map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?
            };
            Ok(RuleMatch::PrivateOrReservedPrefix(blocks))
        }
        FilterKind::ClassDE => no_param(RuleMatch::ClassDE),
        FilterKind::AbnormalLength => no_param(RuleMatch::AbnormalLength),
        FilterKind::NoOrigin => no_param(RuleMatch::NoOrigin),
        FilterKind::FeederInternal => no_param(RuleMatch::FeederInternal),
        FilterKind::NoisyOrigin | FilterKind::NoisyPeer => {
            let asns: BTreeSet<u32> = param.split_whitespace().map(parse_asn).collect::<Result<_, _>>()?;
            if asns.is_empty() {
                return Err(format!("{kind} needs at least one ASN"));
            }
            Ok(if kind == FilterKind::NoisyOrigin { RuleMatch::NoisyOrigin(asns) } else { RuleMatch::NoisyPeer(asns) })
        }
        FilterKind::UnallocatedResource => {
            if param.is_empty() {
                return Err("UnallocatedResource needs a delegation file path".into());
            }
            let path = match base_dir {
                Some(dir) => dir.join(param),
                None => Path::new(param).to_path_buf(),
            };
            let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let d = Delegations::parse(&text).map_err(|e| e.to_string())?;
            Ok(RuleMatch::UnallocatedResource(Arc::new(d)))
        }
    }
}

/// Per-reason drop counters. `kept + dropped == total` at all times.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterAccounting {
    pub total: u64,
    pub kept: u64,
    pub dropped: BTreeMap<(FilterKind, String), u64>,
}

impl FilterAccounting {
    pub fn record(&mut self, outcome: &FilterOutcome) {
        self.total += 1;
        match outcome {
            FilterOutcome::Kept => self.kept += 1,
            FilterOutcome::Dropped { kind, rule_id } => *self.dropped.entry((*kind, rule_id.clone())).or_default() += 1,
        }
    }

    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }

    pub fn merge(&mut self, other: &FilterAccounting) {
        self.total += other.total;
        self.kept += other.kept;
        for (k, v) in &other.dropped {
            *self.dropped.entry(k.clone()).or_default() += v;
        }
    }
}

/// An origin whose per-snapshot count is far above its usual level.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyFlag {
    pub asn: u32,
    pub snapshot: usize,
    pub count: u64,
    /// Median of the origin's counts in all other snapshots (absent = 0).
    pub baseline: f64,
}

/// Flags origins whose count in some snapshot is at least `factor` times
/// the median of their counts in every other snapshot. The baseline is
/// floored at 1 so origins that are usually absent need `factor` HSPs
/// before they are flagged.
pub fn detect_noisy_origins(snapshots: &[BTreeMap<u32, u64>], factor: f64) -> Vec<NoisyFlag> {
    if snapshots.len() < 2 {
        return Vec::new();
    }
    let origins: BTreeSet<u32> = snapshots.iter().flat_map(|s| s.keys().copied()).collect();
    let mut flags = Vec::new();
    for asn in origins {
        let counts: Vec<u64> = snapshots.iter().map(|s| s.get(&asn).copied().unwrap_or(0)).collect();
        for (i, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let others: Vec<f64> = counts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &c)| c as f64).collect();
            let baseline = median(&others).unwrap_or(0.0);
            if count as f64 >= factor * baseline.max(1.0) {
                flags.push(NoisyFlag { asn, snapshot: i, count, baseline });
            }
        }
    }
    flags
}

/// Distinct HSPs per origin AS.
pub fn hsp_counts_by_origin<'a>(records: impl IntoIterator<Item = &'a RouteRecord>) -> BTreeMap<u32, u64> {
    distinct_by_origin(records, |p| Some(*p))
}

/// Distinct anchor prefixes per origin AS, for the "many anchors" signal.
pub fn anchor_counts_by_origin<'a>(records: impl IntoIterator<Item = &'a RouteRecord>) -> BTreeMap<u32, u64> {
    distinct_by_origin(records, |p| p.anchor().ok())
}

fn distinct_by_origin<'a>(
    records: impl IntoIterator<Item = &'a RouteRecord>,
    key: impl Fn(&Prefix) -> Option<Prefix>,
) -> BTreeMap<u32, u64> {
    let mut seen: HashSet<(u32, Prefix)> = HashSet::new();
    let mut out = BTreeMap::new();
    for rec in records {
        if rec.is_withdrawal() || !rec.prefix.is_hyper_specific() {
            continue;
        }
        let (Some(origin), Some(k)) = (rec.origin_asn(), key(&rec.prefix)) else {
            continue;
        };
        if seen.insert((origin, k)) {
            *out.entry(origin).or_default() += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::route::{PathSegment, RecordKind};

    fn rec(prefix: &str, path: &[u32], peer: u32, ts: u64) -> RouteRecord {
        RouteRecord::new(RecordKind::Announcement, Timestamp::from_secs(ts), peer, "203.0.113.1".parse().unwrap(), prefix.parse().unwrap())
            .with_path(vec![PathSegment::seq(path.to_vec())])
    }

    fn dropped_by(rules: &RuleSet, r: &RouteRecord) -> Option<String> {
        match rules.apply(r, r.peer_asn) {
            FilterOutcome::Kept => None,
            FilterOutcome::Dropped { rule_id, .. } => Some(rule_id),
        }
    }

    const T2020: u64 = 1_600_000_000;

    #[test]
    fn default_rules_load() {
        let rules = RuleSet::default_rules();
        assert_eq!(rules.redundant_windows, 1);
        let r = rules.get("noisy-origin-12400").unwrap();
        assert_eq!(r.kind(), FilterKind::NoisyOrigin);
        assert!(r.windows.is_empty());
        let p = rules.get("noisy-peer-35908-2016q3").unwrap();
        assert_eq!(p.windows.len(), 1);
        assert_eq!(p.windows[0].start, Timestamp::from_secs(1_467_331_200));
        assert_eq!(rules.get("noisy-peer-203125-2021").unwrap().windows.len(), 4);
        assert_eq!(rules.get("noisy-peer-268430-2020").unwrap().windows.len(), 1);
    }

    #[test]
    fn private_origin_and_class_de() {
        let rules = RuleSet::default_rules();
        assert_eq!(dropped_by(&rules, &rec("184.164.241.0/25", &[3303, 65000], 3303, T2020)).as_deref(), Some("private-asn-2byte"));
        assert_eq!(
            dropped_by(&rules, &rec("184.164.241.0/25", &[3303, 4200000001], 3303, T2020)).as_deref(),
            Some("private-asn-4byte")
        );
        assert_eq!(dropped_by(&rules, &rec("224.0.0.0/25", &[3303, 64496], 3303, T2020)).as_deref(), Some("class-d-e"));
        assert_eq!(dropped_by(&rules, &rec("184.164.241.0/25", &[3303, 64496], 3303, T2020)), None);
    }

    #[test]
    fn feeder_internal_needs_two_hops() {
        let rules = RuleSet::default_rules();
        let direct = rec("184.164.241.0/25", &[3303], 3303, T2020);
        assert_eq!(dropped_by(&rules, &direct).as_deref(), Some("internal"));
        let prepended = rec("184.164.241.0/25", &[3303, 3303], 3303, T2020);
        assert_eq!(dropped_by(&rules, &prepended).as_deref(), Some("internal"));
        let forwarded = rec("184.164.241.0/25", &[3303, 64496], 3303, T2020);
        assert_eq!(dropped_by(&rules, &forwarded), None);
        // non-HSP routes of the feeder itself are kept
        assert_eq!(dropped_by(&rules, &rec("184.164.241.0/24", &[3303], 3303, T2020)), None);
    }

    #[test]
    fn abnormal_length_and_no_origin() {
        let rules = RuleSet::default_rules();
        let mut r = rec("184.164.241.1/32", &[3303, 64496], 3303, T2020);
        r.abnormal_length = Some(33);
        assert_eq!(dropped_by(&rules, &r).as_deref(), Some("abnormal-prefix"));
        let mut set_ended = rec("184.164.241.0/25", &[3303], 3303, T2020);
        set_ended.as_path.push(PathSegment::set(vec![1, 2]));
        assert_eq!(dropped_by(&rules, &set_ended).as_deref(), Some("no-origin"));
    }

    #[test]
    fn withdrawals_skip_attribute_rules() {
        let rules = RuleSet::default_rules();
        let w = RouteRecord::new(RecordKind::Withdrawal, Timestamp::from_secs(T2020), 3303, "203.0.113.1".parse().unwrap(), "184.164.241.0/25".parse().unwrap());
        assert!(rules.apply(&w, 3303).is_kept());
        let w_private = RouteRecord { prefix: "10.1.0.0/25".parse().unwrap(), ..w };
        assert!(!rules.apply(&w_private, 3303).is_kept());
    }

    #[test]
    fn windows_are_half_open() {
        let rules = RuleSet::default_rules();
        // 2016-07-01T00:00:00Z .. 2016-07-08T00:00:00Z
        let inside = rec("184.164.241.0/25", &[35908, 64496], 35908, 1_467_331_200);
        let at_end = rec("184.164.241.0/25", &[35908, 64496], 35908, 1_467_936_000);
        assert_eq!(dropped_by(&rules, &inside).as_deref(), Some("noisy-peer-35908-2016q3"));
        assert_eq!(dropped_by(&rules, &at_end), None);
    }

    #[test]
    fn empty_config_is_empty() {
        assert!(load_rules("", None).unwrap().rules.is_empty());
        assert!(load_rules("id,kind,family,param,start,end\n# nothing\n", None).unwrap().rules.is_empty());
    }

    #[test]
    fn contradictions_rejected() {
        let hdr = "id,kind,family,param,start,end\n";
        let same_id_other_param = format!("{hdr}a,NoisyPeer,4,1,2020-01-01,2020-01-08\na,NoisyPeer,4,2,2020-04-01,2020-04-08\n");
        assert!(matches!(load_rules(&same_id_other_param, None), Err(ConfigError::Contradiction { line: 3, .. })));
        let overlap = format!("{hdr}a,NoisyPeer,4,1,2020-01-01,2020-01-08\na,NoisyPeer,4,1,2020-01-05,2020-01-10\n");
        assert!(matches!(load_rules(&overlap, None), Err(ConfigError::Contradiction { .. })));
        let mixed = format!("{hdr}a,NoisyPeer,4,1,,\na,NoisyPeer,4,1,2020-01-05,2020-01-10\n");
        assert!(matches!(load_rules(&mixed, None), Err(ConfigError::Contradiction { .. })));
        let reversed = format!("{hdr}a,NoisyPeer,4,1,2020-01-08,2020-01-01\n");
        assert!(matches!(load_rules(&reversed, None), Err(ConfigError::Invalid { .. })));
        let bad_kind = format!("{hdr}a,Bogus,4,1,,\n");
        assert!(matches!(load_rules(&bad_kind, None), Err(ConfigError::Invalid { .. })));
        let param_on_flag = format!("{hdr}a,ClassDE,4,1,,\n");
        assert!(load_rules(&param_on_flag, None).is_err());
    }

    #[test]
    fn exact_duplicates_merge() {
        let text = "a,NoisyOrigin,4,7,,\nb,NoisyOrigin,4,7,,\n";
        let set = load_rules(text, None).unwrap();
        assert_eq!(set.rules.len(), 1);
        assert_eq!(set.redundant_windows, 1);
    }

    #[test]
    fn delegations() {
        let text = "2|ripencc|1|3|19830705|20240101|+0100\n\
                    ripencc|*|ipv4|*|2|summary\n\
                    ripencc|NL|ipv4|193.0.0.0|768|19930901|allocated\n\
                    ripencc|NL|ipv6|2001:67c::|32|20000101|allocated\n\
                    ripencc|NL|asn|3333|1|19930901|allocated\n\
                    ripencc||ipv4|5.0.0.0|256||available\n";
        let d = Delegations::parse(text).unwrap();
        assert!(d.prefix_allocated(&"193.0.2.0/25".parse().unwrap()));
        assert!(d.prefix_allocated(&"193.0.0.0/23".parse().unwrap()));
        assert!(!d.prefix_allocated(&"193.0.0.0/22".parse().unwrap()));
        assert!(!d.prefix_allocated(&"5.0.0.0/25".parse().unwrap()));
        assert!(d.prefix_allocated(&"2001:67c:1::/48".parse().unwrap()));
        assert!(d.asn_allocated(3333));
        assert!(!d.asn_allocated(3334));
    }

    #[test]
    fn range_blocks() {
        let blocks: Vec<String> = ipv4_range_blocks(u32::from("193.0.0.0".parse::<std::net::Ipv4Addr>().unwrap()) as u64, 768)
            .iter()
            .map(|p| p.to_string())
            .collect();
        assert_eq!(blocks, vec!["193.0.0.0/23", "193.0.2.0/24"]);
        assert_eq!(ipv4_range_blocks(0, 1 << 32).len(), 1);
    }

    #[test]
    fn noisy_origin_detection() {
        let snaps: Vec<BTreeMap<u32, u64>> = [3u64, 2, 400, 3].iter().map(|&c| BTreeMap::from([(64496, c)])).collect();
        let flags = detect_noisy_origins(&snaps, 100.0);
        assert_eq!(flags.len(), 1);
        assert_eq!((flags[0].snapshot, flags[0].count, flags[0].baseline), (2, 400, 3.0));
        let constant: Vec<_> = (0..3).map(|_| BTreeMap::from([(1u32, 5u64)])).collect();
        assert!(detect_noisy_origins(&constant, 100.0).is_empty());
        assert!(detect_noisy_origins(&snaps[..1], 100.0).is_empty());
    }
}
