//! `scan`: decode MRT inputs, sanitize, replay HSP presence and build one
//! snapshot of the record store.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use hsp_core::classify::{aggregation_position_checked, AggregationPosition};
use hsp_core::mrt::{DecodeStats, MrtDecoder};
use hsp_core::route::format_as_path;
use hsp_core::sanitize::{FilterAccounting, FilterOutcome};
use hsp_core::timeline::{ObservationWindow, Replayer, MICROS_PER_DAY};
use hsp_core::{Prefix, RecordKind, RouteRecord, Timestamp};
use sha2::{Digest, Sha256};

use crate::config::{hex, Loaded};
use crate::error::{CliError, Warnings};
use crate::report::TOOL_VERSION;
use crate::store::{
    AnchorRouteRow, Counters, DropRow, FeederRow, HspRow, InputSummary, LengthRow, Manifest, OriginRow, Snapshot,
};

/// An input file, optionally tagged `collector=path`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Input {
    pub collector: String,
    pub path: PathBuf,
}

impl FromStr for Input {
    type Err = String;

    fn from_str(s: &str) -> Result<Input, String> {
        match s.split_once('=') {
            Some((name, path)) if !name.is_empty() && !name.contains('/') => {
                Ok(Input { collector: name.to_string(), path: PathBuf::from(path) })
            }
            _ => Ok(Input { collector: "default".to_string(), path: PathBuf::from(s) }),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScanOptions {
    pub snapshot: Option<String>,
    pub start: Option<Timestamp>,
    pub window_days: u64,
}

type HspKey = (Prefix, Option<u32>, u32, std::net::IpAddr, String, String, Option<u32>, bool);

#[derive(Default)]
struct FileScan {
    summary: Option<InputSummary>,
    stats: DecodeStats,
    acc: FilterAccounting,
    has_rib: bool,
    first_ts: Option<Timestamp>,
    visible: HashSet<Prefix>,
    origin_prefixes: HashSet<(u32, Prefix)>,
    feeders: HashMap<(u8, u32), u64>,
    hsp: HashMap<HspKey, u64>,
    anchors: HashMap<(Prefix, u32, AggregationPosition), u64>,
    as_trans: u64,
    excluded_anchor_routes: u64,
    /// Kept HSP records, attributes stripped, in file order.
    events: Vec<RouteRecord>,
}

enum Source {
    Plain(BufReader<File>),
    Piped(Child),
}

impl Source {
    fn open(path: &Path, cfg: &Loaded) -> io::Result<Source> {
        let name = path.to_string_lossy();
        let cmd = if name.ends_with(".gz") {
            Some(&cfg.config.gzip)
        } else if name.ends_with(".bz2") {
            Some(&cfg.config.bzip2)
        } else {
            None
        };
        match cmd {
            None => Ok(Source::Plain(BufReader::with_capacity(1 << 20, File::open(path)?))),
            Some(argv) => {
                let child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .arg(path)
                    .stdin(Stdio::null())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::null())
                    .spawn()?;
                Ok(Source::Piped(child))
            }
        }
    }
}

fn sha256_file(path: &Path) -> io::Result<String> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

fn scan_file(input: &Input, cfg: &Loaded) -> FileScan {
    let mut out = FileScan::default();
    let name = input.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut error = None;
    let sha256 = sha256_file(&input.path).unwrap_or_else(|e| {
        error = Some(e.to_string());
        String::new()
    });
    let mut has_updates = false;
    match Source::open(&input.path, cfg) {
        Err(e) => error = Some(format!("cannot open: {e}")),
        Ok(source) => {
            let (reader, child): (Box<dyn Read>, Option<Child>) = match source {
                Source::Plain(r) => (Box::new(r), None),
                Source::Piped(mut c) => {
                    let stdout = c.stdout.take().expect("piped stdout");
                    (Box::new(BufReader::with_capacity(1 << 20, stdout)), Some(c))
                }
            };
            let mut decoder = MrtDecoder::new(reader).with_collector(input.collector.clone());
            for item in decoder.by_ref() {
                match item {
                    Ok(rec) => {
                        if rec.kind == RecordKind::RibEntry {
                            out.has_rib = true;
                        } else {
                            has_updates = true;
                        }
                        out.first_ts = Some(out.first_ts.map_or(rec.timestamp, |t| t.min(rec.timestamp)));
                        absorb(&mut out, rec, cfg);
                    }
                    Err(e) => error = Some(e.to_string()),
                }
            }
            out.stats = *decoder.stats();
            drop(decoder);
            if let Some(mut c) = child {
                match c.wait() {
                    Ok(status) if !status.success() => error = Some(format!("decompressor exited with {status}")),
                    Err(e) => error = Some(format!("decompressor: {e}")),
                    _ => {}
                }
            }
        }
    }
    let kind = match (out.has_rib, has_updates) {
        (true, false) => "rib",
        (false, true) => "updates",
        (true, true) => "mixed",
        (false, false) => "empty",
    };
    out.summary = Some(InputSummary {
        name,
        collector: input.collector.clone(),
        sha256,
        kind: kind.to_string(),
        records: out.stats.records,
        malformed: out.stats.malformed,
        error,
    });
    out
}

fn slim(rec: &RouteRecord) -> RouteRecord {
    let mut r = RouteRecord::new(rec.kind, rec.timestamp, rec.peer_asn, rec.peer_address, rec.prefix);
    r.collector_id = rec.collector_id.clone();
    r
}

fn absorb(out: &mut FileScan, rec: RouteRecord, cfg: &Loaded) {
    let outcome = cfg.rules.apply(&rec, rec.peer_asn);
    out.acc.record(&outcome);
    if outcome != FilterOutcome::Kept {
        return;
    }
    let hsp = rec.prefix.is_hyper_specific();
    if rec.is_withdrawal() {
        if hsp {
            out.events.push(slim(&rec));
        }
        return;
    }
    let family = rec.family().number();
    out.visible.insert(rec.prefix);
    *out.feeders.entry((family, rec.peer_asn)).or_default() += 1;
    let origin = rec.origin_asn();
    if let Some(o) = origin {
        out.origin_prefixes.insert((o, rec.prefix));
    }
    if hsp {
        let mut comms = rec.communities.clone();
        comms.sort();
        comms.dedup();
        let comms = comms.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        let key = (
            rec.prefix,
            origin,
            rec.peer_asn,
            rec.peer_address,
            format_as_path(&rec.as_path),
            comms,
            rec.aggregator.map(|a| a.asn),
            rec.atomic_aggregate,
        );
        *out.hsp.entry(key).or_default() += 1;
        out.events.push(slim(&rec));
    } else if rec.prefix.len() == rec.family().hsp_boundary() {
        let (pos, as_trans) = aggregation_position_checked(&rec);
        out.as_trans += u64::from(as_trans);
        if pos == AggregationPosition::Excluded && rec.aggregator.is_some() {
            out.excluded_anchor_routes += 1;
        }
        if let (Some(o), AggregationPosition::Origin | AggregationPosition::OnPath | AggregationPosition::OffPath) = (origin, pos) {
            *out.anchors.entry((rec.prefix, o, pos)).or_default() += 1;
        }
    }
}

fn scan_all(inputs: &[Input], cfg: &Loaded) -> Vec<FileScan> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(inputs.len()).max(1);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<FileScan>>> = Mutex::new((0..inputs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(input) = inputs.get(i) else { break };
                let r = scan_file(input, cfg);
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    results.into_inner().expect("no poisoned workers").into_iter().map(|r| r.expect("every input scanned")).collect()
}

fn day_of(t: Timestamp) -> String {
    chrono::DateTime::from_timestamp(t.secs() as i64, 0).map_or_else(|| t.secs().to_string(), |d| d.format("%Y-%m-%d").to_string())
}

/// Runs the whole scan. Inputs that cannot be opened at all are an input
/// error; files that fail part way are processed as far as they go and
/// reported as warnings.
pub fn scan(inputs: &[Input], opts: &ScanOptions, cfg: &Loaded, warnings: &mut Warnings) -> Result<Snapshot, CliError> {
    if opts.window_days == 0 {
        return Err(CliError::Config("window_days must be at least 1".into()));
    }
    for input in inputs {
        File::open(&input.path).map_err(|e| CliError::input(input.path.display(), e))?;
    }
    let mut inputs = inputs.to_vec();
    inputs.sort();
    inputs.dedup();
    let files = scan_all(&inputs, cfg);

    let mut counters = Counters::default();
    let mut acc = FilterAccounting::default();
    let mut summaries = Vec::new();
    for (input, f) in inputs.iter().zip(&files) {
        let s = f.summary.clone().expect("summary set");
        if let Some(e) = &s.error {
            warnings.push(format!("{}: {e}", input.path.display()));
        }
        if s.malformed > 0 {
            warnings.push(format!("{}: {} malformed MRT records skipped", input.path.display(), s.malformed));
        }
        acc.merge(&f.acc);
        counters.malformed += f.stats.malformed;
        counters.skipped += f.stats.skipped;
        counters.abnormal_length += f.stats.abnormal_length;
        counters.as_trans_aggregators += f.as_trans;
        counters.excluded_anchor_routes += f.excluded_anchor_routes;
        summaries.push(s);
    }
    counters.decoded = acc.total;
    counters.kept = acc.kept;
    counters.dropped = acc.dropped_total();

    // one seed RIB per collector: its earliest RIB file
    let mut seeds: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, (input, f)) in inputs.iter().zip(&files).enumerate() {
        if !f.has_rib {
            continue;
        }
        let e = seeds.entry(&input.collector).or_insert(i);
        if f.first_ts < files[*e].first_ts {
            *e = i;
        }
    }
    let start = opts.start.unwrap_or_else(|| {
        let seed_start = seeds.values().filter_map(|&i| files[i].first_ts).min();
        let any_start = files.iter().filter_map(|f| f.first_ts).min();
        Timestamp::from_secs(seed_start.or(any_start).map_or(0, |t| t.secs()))
    });
    let window = ObservationWindow::new(start, Timestamp(start.0 + opts.window_days * MICROS_PER_DAY))
        .map_err(|e| CliError::Config(e.to_string()))?;

    let collectors: BTreeSet<&str> = inputs.iter().map(|i| i.collector.as_str()).collect();
    let mut intervals = Vec::new();
    for c in collectors {
        let seed = seeds.get(c).copied();
        let mut replayer = Replayer::new(window);
        if let Some(i) = seed {
            replayer.load_rib(files[i].events.iter().filter(|r| r.kind == RecordKind::RibEntry));
        }
        let mut updates: Vec<&RouteRecord> = Vec::new();
        for (i, (input, f)) in inputs.iter().zip(&files).enumerate() {
            if input.collector != c {
                continue;
            }
            for r in &f.events {
                if r.kind == RecordKind::RibEntry {
                    if Some(i) != seed {
                        counters.later_rib_entries += 1;
                    }
                } else {
                    updates.push(r);
                }
            }
        }
        updates.sort_by_key(|r| r.timestamp);
        for r in updates {
            if r.timestamp < window.start {
                counters.before_window += 1;
                continue;
            }
            replayer.apply(r).map_err(|e| CliError::Input(e.to_string()))?;
        }
        let out = replayer.finish();
        counters.replay_rib_entries += out.stats.rib_entries;
        counters.replay_updates += out.stats.announcements + out.stats.withdrawals;
        counters.absent_withdrawals += out.stats.absent_withdrawals;
        counters.after_window += out.stats.after_window;
        intervals.extend(out.intervals);
    }
    intervals.sort();
    if counters.before_window > 0 {
        warnings.push(format!("{} updates before the window start were ignored", counters.before_window));
    }

    let mut visible: HashSet<Prefix> = HashSet::new();
    let mut origin_prefixes: HashSet<(u32, Prefix)> = HashSet::new();
    let mut feeders: BTreeMap<(u8, u32), u64> = BTreeMap::new();
    let mut hsp: HashMap<HspKey, u64> = HashMap::new();
    let mut anchors: HashMap<(Prefix, u32, AggregationPosition), u64> = HashMap::new();
    for f in files {
        visible.extend(f.visible);
        origin_prefixes.extend(f.origin_prefixes);
        for (k, v) in f.feeders {
            *feeders.entry(k).or_default() += v;
        }
        for (k, v) in f.hsp {
            *hsp.entry(k).or_default() += v;
        }
        for (k, v) in f.anchors {
            *anchors.entry(k).or_default() += v;
        }
    }

    let mut lengths: BTreeMap<(u8, u8), u64> = BTreeMap::new();
    for p in &visible {
        *lengths.entry((p.family().number(), p.len())).or_default() += 1;
    }
    let mut per_origin: BTreeMap<(u8, u32), (u64, u64, BTreeSet<Prefix>)> = BTreeMap::new();
    for (o, p) in &origin_prefixes {
        let e = per_origin.entry((p.family().number(), *o)).or_default();
        e.0 += 1;
        if p.is_hyper_specific() {
            e.1 += 1;
            e.2.insert(p.anchor().expect("HSP has an anchor"));
        }
    }

    let mut hsp_records: Vec<HspRow> = hsp
        .into_iter()
        .map(|((prefix, origin_asn, peer_asn, peer_address, as_path, communities, aggregator_asn, atomic_aggregate), records)| HspRow {
            prefix,
            origin_asn,
            peer_asn,
            peer_address,
            as_path,
            communities,
            aggregator_asn,
            atomic_aggregate,
            records,
        })
        .collect();
    hsp_records.sort();
    let mut anchor_routes: Vec<AnchorRouteRow> = anchors
        .into_iter()
        .map(|((prefix, origin_asn, pos), routes)| AnchorRouteRow { prefix, origin_asn, position: pos.as_str().to_string(), routes })
        .collect();
    anchor_routes.sort();
    let mut drops: Vec<DropRow> =
        acc.dropped.iter().map(|((k, id), n)| DropRow { reason: k.as_str().to_string(), rule_id: id.clone(), records: *n }).collect();
    drops.sort();

    let snapshot = opts.snapshot.clone().unwrap_or_else(|| day_of(start));
    Ok(Snapshot {
        manifest: Manifest {
            schema_version: crate::report::SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            snapshot,
            window_start: window.start.to_string(),
            window_end: window.end.to_string(),
            window_days: opts.window_days,
            config_hash: cfg.hash.clone(),
            inputs: summaries,
            counters,
        },
        hsp_records,
        prefix_lengths: lengths.into_iter().map(|((family, length), prefixes)| LengthRow { family, length, prefixes }).collect(),
        origins: per_origin
            .into_iter()
            .map(|((family, asn), (prefixes, hsps, anchors))| OriginRow { family, asn, prefixes, hsps, hsp_anchors: anchors.len() as u64 })
            .collect(),
        feeders: feeders.into_iter().map(|((family, asn), records)| FeederRow { family, asn, records }).collect(),
        anchor_routes,
        intervals,
        drops,
    })
}
