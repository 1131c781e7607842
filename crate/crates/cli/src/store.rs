//! On-disk record store: one directory per snapshot holding sorted CSV
//! files and a JSON manifest.

use std::fs;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use hsp_core::timeline::{Feeder, ObservationWindow, PresenceInterval};
use hsp_core::{Family, Prefix, Timestamp};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const HSP_RECORDS: &str = "hsp_records.csv";
pub const PREFIX_LENGTHS: &str = "prefix_lengths.csv";
pub const ORIGINS: &str = "origins.csv";
pub const FEEDERS: &str = "feeders.csv";
pub const ANCHOR_ROUTES: &str = "anchor_routes.csv";
pub const INTERVALS: &str = "intervals.csv";
pub const DROPS: &str = "drops.csv";
pub const MANIFEST: &str = "manifest.json";

/// Distinct kept HSP route, with the number of records that carried it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HspRow {
    pub prefix: Prefix,
    /// Empty when the path ends in an AS_SET and no rule dropped it.
    pub origin_asn: Option<u32>,
    pub peer_asn: u32,
    pub peer_address: IpAddr,
    pub as_path: String,
    /// Space-separated classic communities, sorted.
    pub communities: String,
    pub aggregator_asn: Option<u32>,
    pub atomic_aggregate: bool,
    pub records: u64,
}

impl HspRow {
    pub fn family(&self) -> Family {
        self.prefix.family()
    }

    pub fn community_list(&self) -> Vec<hsp_core::Community> {
        self.communities.split_whitespace().filter_map(|c| c.parse().ok()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LengthRow {
    pub family: u8,
    pub length: u8,
    /// Distinct visible prefixes of this length.
    pub prefixes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OriginRow {
    pub family: u8,
    pub asn: u32,
    pub prefixes: u64,
    pub hsps: u64,
    pub hsp_anchors: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeederRow {
    pub family: u8,
    pub asn: u32,
    pub records: u64,
}

/// A kept /24 or /48 route and where it was aggregated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnchorRouteRow {
    pub prefix: Prefix,
    pub origin_asn: u32,
    pub position: String,
    pub routes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DropRow {
    pub reason: String,
    pub rule_id: String,
    pub records: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub prefix: Prefix,
    pub feeder_asn: u32,
    pub start: String,
    pub end: String,
    pub feeder_address: IpAddr,
    pub uncertain: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSummary {
    pub name: String,
    pub collector: String,
    pub sha256: String,
    pub kind: String,
    pub records: u64,
    pub malformed: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub decoded: u64,
    pub kept: u64,
    pub dropped: u64,
    pub malformed: u64,
    pub skipped: u64,
    pub abnormal_length: u64,
    pub replay_rib_entries: u64,
    pub replay_updates: u64,
    pub absent_withdrawals: u64,
    pub before_window: u64,
    pub after_window: u64,
    pub later_rib_entries: u64,
    /// Aggregated anchor routes whose aggregator is AS_TRANS (classed OffPath).
    pub as_trans_aggregators: u64,
    /// Aggregated anchor routes dropped for ATOMIC_AGGREGATE or an AS_SET.
    pub excluded_anchor_routes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub snapshot: String,
    pub window_start: String,
    pub window_end: String,
    pub window_days: u64,
    pub config_hash: String,
    pub inputs: Vec<InputSummary>,
    pub counters: Counters,
}

impl Manifest {
    pub fn window(&self) -> Result<ObservationWindow, CliError> {
        let parse = |s: &str| s.parse::<Timestamp>().map_err(|e| CliError::input(&self.snapshot, e));
        ObservationWindow::new(parse(&self.window_start)?, parse(&self.window_end)?).map_err(|e| CliError::input(&self.snapshot, e))
    }
}

/// Everything `scan` stores for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub manifest: Manifest,
    pub hsp_records: Vec<HspRow>,
    pub prefix_lengths: Vec<LengthRow>,
    pub origins: Vec<OriginRow>,
    pub feeders: Vec<FeederRow>,
    pub anchor_routes: Vec<AnchorRouteRow>,
    pub intervals: Vec<PresenceInterval>,
    pub drops: Vec<DropRow>,
}

impl Snapshot {
    pub fn id(&self) -> &str {
        &self.manifest.snapshot
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_path(path).map_err(|e| CliError::input(path.display(), e))?;
    if rows.is_empty() {
        w.write_record(header).map_err(|e| CliError::input(path.display(), e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| CliError::input(path.display(), e))?;
    }
    w.flush().map_err(|e| CliError::input(path.display(), e))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::input(path.display(), e))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| CliError::input(path.display(), e))
}

impl Snapshot {
    pub fn write(&self, store: &Path) -> Result<PathBuf, CliError> {
        let dir = store.join(&self.manifest.snapshot);
        fs::create_dir_all(&dir).map_err(|e| CliError::input(dir.display(), e))?;
        let hsp_header = ["prefix", "origin_asn", "peer_asn", "peer_address", "as_path", "communities", "aggregator_asn", "atomic_aggregate", "records"];
        write_csv(&dir.join(HSP_RECORDS), &self.hsp_records, &hsp_header)?;
        write_csv(&dir.join(PREFIX_LENGTHS), &self.prefix_lengths, &["family", "length", "prefixes"])?;
        write_csv(&dir.join(ORIGINS), &self.origins, &["family", "asn", "prefixes", "hsps", "hsp_anchors"])?;
        write_csv(&dir.join(FEEDERS), &self.feeders, &["family", "asn", "records"])?;
        write_csv(&dir.join(ANCHOR_ROUTES), &self.anchor_routes, &["prefix", "origin_asn", "position", "routes"])?;
        write_csv(&dir.join(DROPS), &self.drops, &["reason", "rule_id", "records"])?;
        let intervals: Vec<IntervalRow> = self
            .intervals
            .iter()
            .map(|iv| IntervalRow {
                prefix: iv.prefix,
                feeder_asn: iv.feeder.asn,
                start: iv.start.to_string(),
                end: iv.end.to_string(),
                feeder_address: iv.feeder.address,
                uncertain: iv.uncertain,
            })
            .collect();
        write_csv(&dir.join(INTERVALS), &intervals, &["prefix", "feeder_asn", "start", "end", "feeder_address", "uncertain"])?;
        let mut manifest = serde_json::to_string_pretty(&self.manifest).expect("serializable");
        manifest.push('\n');
        let path = dir.join(MANIFEST);
        fs::write(&path, manifest).map_err(|e| CliError::input(path.display(), e))?;
        Ok(dir)
    }

    pub fn read(dir: &Path) -> Result<Snapshot, CliError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::input(path.display(), e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CliError::input(path.display(), e))?;
        let intervals = read_csv::<IntervalRow>(&dir.join(INTERVALS))?
            .into_iter()
            .map(|r| {
                let ts = |s: &str| s.parse::<Timestamp>().map_err(|e| CliError::input(dir.join(INTERVALS).display(), e));
                Ok(PresenceInterval {
                    prefix: r.prefix,
                    feeder: Feeder { asn: r.feeder_asn, address: r.feeder_address },
                    start: ts(&r.start)?,
                    end: ts(&r.end)?,
                    uncertain: r.uncertain,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(Snapshot {
            manifest,
            hsp_records: read_csv(&dir.join(HSP_RECORDS))?,
            prefix_lengths: read_csv(&dir.join(PREFIX_LENGTHS))?,
            origins: read_csv(&dir.join(ORIGINS))?,
            feeders: read_csv(&dir.join(FEEDERS))?,
            anchor_routes: read_csv(&dir.join(ANCHOR_ROUTES))?,
            intervals,
            drops: read_csv(&dir.join(DROPS))?,
        })
    }
}

/// All snapshots in `store`, ordered by id. A missing store is an input
/// error; an empty one yields no snapshots.
pub fn open(store: &Path) -> Result<Vec<Snapshot>, CliError> {
    let entries = fs::read_dir(store).map_err(|e| CliError::input(store.display(), e))?;
    let mut dirs: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::input(store.display(), e))?;
        if entry.path().join(MANIFEST).is_file() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    let mut snaps = dirs.iter().map(|d| Snapshot::read(d)).collect::<Result<Vec<_>, _>>()?;
    snaps.sort_by(|a, b| a.manifest.snapshot.cmp(&b.manifest.snapshot));
    Ok(snaps)
}
