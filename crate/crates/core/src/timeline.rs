//! Routing-table replay: presence intervals per (feeder session, prefix),
//! and the visibility and consistency statistics derived from them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io;
use std::net::IpAddr;

use thiserror::Error;

use crate::prefix::Prefix;
use crate::route::{RecordKind, RouteRecord, Timestamp};
use crate::stats::{mean, quantile};

pub const MICROS_PER_DAY: u64 = 86_400 * 1_000_000;

/// One collector session: the feeder AS and the address it peers from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Feeder {
    pub asn: u32,
    pub address: IpAddr,
}

impl Feeder {
    pub fn of(rec: &RouteRecord) -> Feeder {
        Feeder { asn: rec.peer_asn, address: rec.peer_address }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PresenceInterval {
    pub prefix: Prefix,
    pub feeder: Feeder,
    pub start: Timestamp,
    pub end: Timestamp,
    /// Set when one end of the interval borders a data gap.
    pub uncertain: bool,
}

impl PresenceInterval {
    pub fn duration_micros(&self) -> u64 {
        self.end.0 - self.start.0
    }
}

/// Half-open observation period `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationWindow {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl ObservationWindow {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<ObservationWindow, ReplayError> {
        if start >= end {
            return Err(ReplayError::EmptyWindow { start, end });
        }
        Ok(ObservationWindow { start, end })
    }

    pub fn from_days(start: Timestamp, days: u64) -> Result<ObservationWindow, ReplayError> {
        ObservationWindow::new(start, Timestamp(start.0 + days * MICROS_PER_DAY))
    }

    pub fn len_micros(&self) -> u64 {
        self.end.0 - self.start.0
    }

    /// Number of whole or partial days in the window.
    pub fn days(&self) -> usize {
        self.len_micros().div_ceil(MICROS_PER_DAY) as usize
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("observation window is empty ({start} to {end})")]
    EmptyWindow { start: Timestamp, end: Timestamp },
    #[error("update at {at} precedes the replay position {cursor}")]
    UpdateBeforeWindow { at: Timestamp, cursor: Timestamp },
    #[error("update at {at} for session AS{asn} {address} is older than the previous one at {previous}")]
    UnsortedUpdates { at: Timestamp, previous: Timestamp, asn: u32, address: IpAddr },
    #[error("gap from {from} to {to} is not inside the window or is reversed")]
    BadGap { from: Timestamp, to: Timestamp },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayStats {
    pub rib_entries: u64,
    pub announcements: u64,
    pub withdrawals: u64,
    /// Withdrawals of prefixes the session did not carry.
    pub absent_withdrawals: u64,
    /// Updates at or after the window end.
    pub after_window: u64,
    pub gaps: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ReplayOutput {
    /// Sorted by (prefix, feeder, start).
    pub intervals: Vec<PresenceInterval>,
    pub stats: ReplayStats,
}

#[derive(Debug, Clone, Copy)]
struct Open {
    start: Timestamp,
    uncertain: bool,
}

/// Incremental replay over one observation window.
#[derive(Debug)]
pub struct Replayer {
    window: ObservationWindow,
    cursor: Timestamp,
    open: HashMap<(Feeder, Prefix), Open>,
    last_update: HashMap<Feeder, Timestamp>,
    closed: Vec<PresenceInterval>,
    stats: ReplayStats,
}

impl Replayer {
    pub fn new(window: ObservationWindow) -> Replayer {
        Replayer {
            window,
            cursor: window.start,
            open: HashMap::new(),
            last_update: HashMap::new(),
            closed: Vec::new(),
            stats: ReplayStats::default(),
        }
    }

    /// Installs RIB entries at the current replay position.
    pub fn load_rib<'a>(&mut self, entries: impl IntoIterator<Item = &'a RouteRecord>) {
        self.seed(entries, false);
    }

    fn seed<'a>(&mut self, entries: impl IntoIterator<Item = &'a RouteRecord>, uncertain: bool) {
        for rec in entries {
            if rec.is_withdrawal() {
                continue;
            }
            self.stats.rib_entries += 1;
            let start = self.cursor;
            self.open.entry((Feeder::of(rec), rec.prefix)).or_insert(Open { start, uncertain });
        }
    }

    pub fn apply(&mut self, rec: &RouteRecord) -> Result<(), ReplayError> {
        let at = rec.timestamp;
        if at < self.cursor {
            return Err(ReplayError::UpdateBeforeWindow { at, cursor: self.cursor });
        }
        let feeder = Feeder::of(rec);
        if let Some(&previous) = self.last_update.get(&feeder) {
            if at < previous {
                return Err(ReplayError::UnsortedUpdates { at, previous, asn: feeder.asn, address: feeder.address });
            }
        }
        self.last_update.insert(feeder, at);
        if at >= self.window.end {
            self.stats.after_window += 1;
            return Ok(());
        }
        let key = (feeder, rec.prefix);
        match rec.kind {
            RecordKind::Withdrawal => {
                self.stats.withdrawals += 1;
                match self.open.remove(&key) {
                    Some(open) => self.close(key, open, at, false),
                    None => self.stats.absent_withdrawals += 1,
                }
            }
            RecordKind::Announcement | RecordKind::RibEntry => {
                self.stats.announcements += 1;
                self.open.entry(key).or_insert(Open { start: at, uncertain: false });
            }
        }
        Ok(())
    }

    /// Marks `[from, to)` as missing data. Every open interval closes at
    /// `from`; state is then reseeded from `rib` at `to`. Intervals on both
    /// sides of the gap are flagged uncertain.
    pub fn gap<'a>(
        &mut self,
        from: Timestamp,
        to: Timestamp,
        rib: impl IntoIterator<Item = &'a RouteRecord>,
    ) -> Result<(), ReplayError> {
        if from < self.cursor || to < from || to > self.window.end {
            return Err(ReplayError::BadGap { from, to });
        }
        self.stats.gaps += 1;
        let open: Vec<_> = self.open.drain().collect();
        for (key, o) in open {
            self.close(key, o, from, true);
        }
        self.cursor = to;
        self.last_update.clear();
        self.seed(rib, true);
        Ok(())
    }

    fn close(&mut self, (feeder, prefix): (Feeder, Prefix), open: Open, end: Timestamp, uncertain: bool) {
        if end > open.start {
            self.closed.push(PresenceInterval { prefix, feeder, start: open.start, end, uncertain: open.uncertain || uncertain });
        }
    }

    /// Closes everything still open at the window end.
    pub fn finish(mut self) -> ReplayOutput {
        let end = self.window.end;
        let open: Vec<_> = self.open.drain().collect();
        for (key, o) in open {
            self.close(key, o, end, false);
        }
        let mut intervals = self.closed;
        intervals.sort();
        ReplayOutput { intervals: merge_adjacent(intervals), stats: self.stats }
    }
}

/// Joins intervals of the same session and prefix that touch.
fn merge_adjacent(sorted: Vec<PresenceInterval>) -> Vec<PresenceInterval> {
    let mut out: Vec<PresenceInterval> = Vec::with_capacity(sorted.len());
    for iv in sorted {
        if let Some(last) = out.last_mut() {
            if last.prefix == iv.prefix && last.feeder == iv.feeder && last.end >= iv.start {
                last.end = last.end.max(iv.end);
                last.uncertain |= iv.uncertain;
                continue;
            }
        }
        out.push(iv);
    }
    out
}

/// Replays `ribs` (installed at the window start) followed by `updates`.
pub fn replay(ribs: &[RouteRecord], updates: &[RouteRecord], window: ObservationWindow) -> Result<ReplayOutput, ReplayError> {
    let mut r = Replayer::new(window);
    r.load_rib(ribs);
    for rec in updates {
        r.apply(rec)?;
    }
    Ok(r.finish())
}

/// Distinct feeder ASes with at least one interval for `prefix`.
pub fn visibility(prefix: &Prefix, intervals: &[PresenceInterval]) -> usize {
    intervals.iter().filter(|iv| iv.prefix == *prefix).map(|iv| iv.feeder.asn).collect::<BTreeSet<_>>().len()
}

/// Length of the union of `spans`, clipped to the window.
fn union_measure(mut spans: Vec<(u64, u64)>, window: &ObservationWindow) -> u64 {
    spans.sort_unstable();
    let (lo, hi) = (window.start.0, window.end.0);
    let mut total = 0;
    let mut current: Option<(u64, u64)> = None;
    for (s, e) in spans {
        let (s, e) = (s.max(lo), e.min(hi));
        if s >= e {
            continue;
        }
        current = match current {
            Some((cs, ce)) if s <= ce => Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                Some((s, e))
            }
            None => Some((s, e)),
        };
    }
    if let Some((cs, ce)) = current {
        total += ce - cs;
    }
    total
}

/// Fraction of the window during which at least one feeder carried `prefix`.
pub fn consistency(prefix: &Prefix, intervals: &[PresenceInterval], window: &ObservationWindow) -> f64 {
    let spans = intervals.iter().filter(|iv| iv.prefix == *prefix).map(|iv| (iv.start.0, iv.end.0)).collect();
    union_measure(spans, window) as f64 / window.len_micros() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixStats {
    pub prefix: Prefix,
    pub visibility: usize,
    /// Microseconds covered by at least one feeder.
    pub present_micros: u64,
    pub consistency: f64,
}

/// Visibility and consistency for every prefix in `intervals`, sorted by prefix.
pub fn prefix_stats(intervals: &[PresenceInterval], window: &ObservationWindow) -> Vec<PrefixStats> {
    let mut by_prefix: BTreeMap<Prefix, (BTreeSet<u32>, Vec<(u64, u64)>)> = BTreeMap::new();
    for iv in intervals {
        let e = by_prefix.entry(iv.prefix).or_default();
        e.0.insert(iv.feeder.asn);
        e.1.push((iv.start.0, iv.end.0));
    }
    by_prefix
        .into_iter()
        .map(|(prefix, (feeders, spans))| {
            let present = union_measure(spans, window);
            PrefixStats {
                prefix,
                visibility: feeders.len(),
                present_micros: present,
                consistency: present as f64 / window.len_micros() as f64,
            }
        })
        .collect()
}

/// Per-day prefix sets: a prefix belongs to day `i` if any interval overlaps it.
pub fn daily_sets(intervals: &[PresenceInterval], window: &ObservationWindow) -> Vec<BTreeSet<Prefix>> {
    let days = window.days();
    let mut sets = vec![BTreeSet::new(); days];
    for iv in intervals {
        let s = iv.start.0.max(window.start.0);
        let e = iv.end.0.min(window.end.0);
        if s >= e {
            continue;
        }
        let first = ((s - window.start.0) / MICROS_PER_DAY) as usize;
        let last = ((e - 1 - window.start.0) / MICROS_PER_DAY) as usize;
        for set in &mut sets[first..=last.min(days - 1)] {
            set.insert(iv.prefix);
        }
    }
    sets
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("window consistency with w = {w} needs at least {} daily sets, got {got}", w + 2)]
pub struct TooFewDays {
    pub w: usize,
    pub got: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowConsistency {
    pub w: usize,
    /// `(n, fraction)` for every position whose target day was non-empty.
    pub fractions: Vec<(usize, f64)>,
    /// Positions skipped because the target day had no prefixes.
    pub skipped: usize,
    pub mean: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
}

impl WindowConsistency {
    pub fn iqr(&self) -> Option<f64> {
        Some(self.q75? - self.q25?)
    }
}

/// For each position `n`, the share of day `n + w + 1`'s set that was
/// already seen on some day in `n..=n + w`.
pub fn window_consistency<T: Ord>(daily: &[BTreeSet<T>], w: usize) -> Result<WindowConsistency, TooFewDays> {
    let d = daily.len();
    if d < w + 2 {
        return Err(TooFewDays { w, got: d });
    }
    let mut fractions = Vec::new();
    let mut skipped = 0;
    for n in 0..=d - w - 2 {
        let target = &daily[n + w + 1];
        if target.is_empty() {
            skipped += 1;
            continue;
        }
        let seen = target.iter().filter(|x| daily[n..=n + w].iter().any(|s| s.contains(x))).count();
        fractions.push((n, seen as f64 / target.len() as f64));
    }
    let values: Vec<f64> = fractions.iter().map(|&(_, f)| f).collect();
    Ok(WindowConsistency {
        w,
        skipped,
        mean: mean(&values),
        q25: quantile(&values, 0.25),
        q75: quantile(&values, 0.75),
        fractions,
    })
}

/// Counts of prefixes per (feeder group, time cell). Row `g` holds prefixes
/// seen by `g * group + 1 ..= (g + 1) * group` feeders; column `c` those
/// present for `c * cell + 1 ..= (c + 1) * cell` seconds in total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heatmap {
    pub feeder_group: usize,
    pub cell_days: u64,
    pub counts: Vec<Vec<u64>>,
}

impl Heatmap {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Count for 1-based `(group, cell)`.
    pub fn get(&self, group: usize, cell: usize) -> u64 {
        self.counts.get(group.wrapping_sub(1)).and_then(|r| r.get(cell.wrapping_sub(1))).copied().unwrap_or(0)
    }

    /// CSV grid: one row per feeder group, one column per time cell.
    pub fn to_csv(&self) -> String {
        let cells = self.counts.first().map_or(0, Vec::len);
        let mut out = String::from("feeders");
        for c in 0..cells {
            let _ = write!(out, ",days_{}_{}", c as u64 * self.cell_days, (c as u64 + 1) * self.cell_days);
        }
        out.push('\n');
        for (g, row) in self.counts.iter().enumerate() {
            let _ = write!(out, "{}-{}", g * self.feeder_group + 1, (g + 1) * self.feeder_group);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn heatmap_bins(stats: &[PrefixStats], window: &ObservationWindow, feeder_group: usize, cell_days: u64) -> Heatmap {
    let feeder_group = feeder_group.max(1);
    let cell = cell_days.max(1) * MICROS_PER_DAY;
    let cells = window.len_micros().div_ceil(cell).max(1) as usize;
    let groups = stats.iter().map(|s| s.visibility.div_ceil(feeder_group)).max().unwrap_or(0).max(1);
    let mut counts = vec![vec![0u64; cells]; groups];
    for s in stats {
        let g = s.visibility.div_ceil(feeder_group).max(1);
        let c = (s.present_micros.div_ceil(cell) as usize).clamp(1, cells);
        counts[g - 1][c - 1] += 1;
    }
    Heatmap { feeder_group, cell_days: cell_days.max(1), counts }
}

/// Writes intervals as CSV: `prefix,feeder_asn,start,end,feeder_address,uncertain`.
pub fn write_intervals_csv(mut out: impl io::Write, intervals: &[PresenceInterval]) -> io::Result<()> {
    writeln!(out, "prefix,feeder_asn,start,end,feeder_address,uncertain")?;
    for iv in intervals {
        writeln!(out, "{},{},{},{},{},{}", iv.prefix, iv.feeder.asn, iv.start, iv.end, iv.feeder.address, iv.uncertain)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::route::PathSegment;

    const DAY: u64 = 86_400;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    fn rec(kind: RecordKind, secs: u64, asn: u32, prefix: &str) -> RouteRecord {
        let addr: IpAddr = format!("192.0.2.{}", asn % 250).parse().unwrap();
        let r = RouteRecord::new(kind, Timestamp::from_secs(secs), asn, addr, p(prefix));
        if kind == RecordKind::Withdrawal {
            r
        } else {
            r.with_path(vec![PathSegment::seq(vec![asn, 64496])])
        }
    }

    fn week() -> ObservationWindow {
        ObservationWindow::from_days(Timestamp::from_secs(1_600_000_000), 7).unwrap()
    }

    #[test]
    fn rib_then_withdraw_halfway() {
        let w = week();
        let t0 = w.start.secs();
        let ribs = [rec(RecordKind::RibEntry, t0, 1, "184.164.241.0/25")];
        let ups = [rec(RecordKind::Withdrawal, t0 + 7 * DAY / 2, 1, "184.164.241.0/25")];
        let out = replay(&ribs, &ups, w).unwrap();
        assert_eq!(out.intervals.len(), 1);
        assert_eq!(consistency(&p("184.164.241.0/25"), &out.intervals, &w), 0.5);
    }

    #[test]
    fn reannouncement_opens_new_interval() {
        let w = week();
        let t0 = w.start.secs();
        let ups = [
            rec(RecordKind::Announcement, t0 + 10, 1, "184.164.241.0/25"),
            rec(RecordKind::Announcement, t0 + 15, 1, "184.164.241.0/25"),
            rec(RecordKind::Withdrawal, t0 + 20, 1, "184.164.241.0/25"),
            rec(RecordKind::Announcement, t0 + 30, 1, "184.164.241.0/25"),
        ];
        let out = replay(&[], &ups, w).unwrap();
        let spans: Vec<_> = out.intervals.iter().map(|iv| (iv.start.secs() - t0, iv.end)).collect();
        assert_eq!(spans, vec![(10, Timestamp::from_secs(t0 + 20)), (30, w.end)]);
    }

    #[test]
    fn update_before_window_rejected() {
        let w = week();
        let ups = [rec(RecordKind::Announcement, w.start.secs() - 1, 1, "184.164.241.0/25")];
        assert!(matches!(replay(&[], &ups, w), Err(ReplayError::UpdateBeforeWindow { .. })));
    }

    #[test]
    fn absent_withdrawal_counted() {
        let w = week();
        let ups = [rec(RecordKind::Withdrawal, w.start.secs() + 5, 1, "184.164.241.0/25")];
        let out = replay(&[], &ups, w).unwrap();
        assert!(out.intervals.is_empty());
        assert_eq!(out.stats.absent_withdrawals, 1);
    }

    #[test]
    fn withdraw_and_reannounce_same_instant_merges() {
        let w = week();
        let t0 = w.start.secs();
        let ups = [
            rec(RecordKind::Announcement, t0 + 10, 1, "184.164.241.0/25"),
            rec(RecordKind::Withdrawal, t0 + 20, 1, "184.164.241.0/25"),
            rec(RecordKind::Announcement, t0 + 20, 1, "184.164.241.0/25"),
        ];
        assert_eq!(replay(&[], &ups, w).unwrap().intervals.len(), 1);
    }

    #[test]
    fn visibility_counts_ases_not_sessions() {
        let w = week();
        let t0 = w.start.secs();
        let mut second = rec(RecordKind::RibEntry, t0, 1, "184.164.241.0/25");
        second.peer_address = "198.51.100.7".parse().unwrap();
        let ribs = [
            rec(RecordKind::RibEntry, t0, 1, "184.164.241.0/25"),
            second,
            rec(RecordKind::RibEntry, t0, 2, "184.164.241.0/25"),
            rec(RecordKind::RibEntry, t0, 3, "184.164.241.0/25"),
        ];
        let out = replay(&ribs, &[], w).unwrap();
        assert_eq!(out.intervals.len(), 4);
        assert_eq!(visibility(&p("184.164.241.0/25"), &out.intervals), 3);
        assert_eq!(visibility(&p("184.164.241.128/25"), &out.intervals), 0);
    }

    #[test]
    fn disjoint_halves_union_to_full() {
        let w = week();
        let t0 = w.start.secs();
        let half = t0 + 7 * DAY / 2;
        let ribs = [rec(RecordKind::RibEntry, t0, 1, "184.164.241.0/25")];
        let ups = [
            rec(RecordKind::Withdrawal, half, 1, "184.164.241.0/25"),
            rec(RecordKind::Announcement, half, 2, "184.164.241.0/25"),
        ];
        let out = replay(&ribs, &ups, w).unwrap();
        assert_eq!(consistency(&p("184.164.241.0/25"), &out.intervals, &w), 1.0);
    }

    #[test]
    fn gap_splits_and_flags() {
        let w = week();
        let t0 = w.start.secs();
        let ribs = [rec(RecordKind::RibEntry, t0, 1, "184.164.241.0/25")];
        let mut r = Replayer::new(w);
        r.load_rib(&ribs);
        r.gap(Timestamp::from_secs(t0 + DAY), Timestamp::from_secs(t0 + 2 * DAY), &ribs).unwrap();
        assert!(r.apply(&rec(RecordKind::Announcement, t0 + DAY + 5, 2, "184.164.241.0/25")).is_err());
        let out = r.finish();
        assert_eq!(out.intervals.len(), 2);
        assert!(out.intervals.iter().all(|iv| iv.uncertain));
        assert_eq!(out.intervals[0].end, Timestamp::from_secs(t0 + DAY));
        assert_eq!(out.intervals[1].start, Timestamp::from_secs(t0 + 2 * DAY));
    }

    #[test]
    fn window_consistency_extremes() {
        let same: Vec<BTreeSet<u32>> = (0..10).map(|_| BTreeSet::from([1, 2, 3])).collect();
        let wc = window_consistency(&same, 3).unwrap();
        assert_eq!(wc.fractions.len(), 10 - 3 - 1);
        assert!(wc.fractions.iter().all(|&(_, f)| f == 1.0));
        let disjoint: Vec<BTreeSet<u32>> = (0..10).map(|i| BTreeSet::from([i])).collect();
        let wc = window_consistency(&disjoint, 1).unwrap();
        assert_eq!(wc.mean, Some(0.0));
        assert_eq!(window_consistency(&disjoint[..2], 1), Err(TooFewDays { w: 1, got: 2 }));
        let mut with_empty = same.clone();
        with_empty[5].clear();
        assert_eq!(window_consistency(&with_empty, 1).unwrap().skipped, 1);
    }

    #[test]
    fn heatmap_examples() {
        let w = ObservationWindow::from_days(Timestamp::from_secs(0), 365).unwrap();
        let one = PrefixStats { prefix: p("184.164.241.0/25"), visibility: 5, present_micros: 21 * MICROS_PER_DAY, consistency: 0.0 };
        let h = heatmap_bins(&[one], &w, 10, 14);
        assert_eq!(h.get(1, 2), 1);
        assert_eq!(h.total(), 1);
        let empty = heatmap_bins(&[], &w, 10, 14);
        assert_eq!(empty.total(), 0);
        assert_eq!(empty.counts[0].len(), 27);
    }

    #[test]
    fn daily_sets_cover_overlapping_days() {
        let w = ObservationWindow::from_days(Timestamp::from_secs(0), 3).unwrap();
        let iv = PresenceInterval {
            prefix: p("184.164.241.0/25"),
            feeder: Feeder { asn: 1, address: "192.0.2.1".parse().unwrap() },
            start: Timestamp::from_secs(DAY - 1),
            end: Timestamp::from_secs(2 * DAY),
            uncertain: false,
        };
        let sets = daily_sets(&[iv], &w);
        assert_eq!(sets.iter().map(BTreeSet::len).collect::<Vec<_>>(), vec![1, 1, 0]);
    }
}
