//! Analyses over a record store. Every function returns tables whose rows
//! are ordered by snapshot id, then family, then the class order of the
//! table's key column.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use hsp_core::classify::{
    anchor_position, cidr_bucket, classify_communities, community_share_stats, AggregationPosition, AnchorPosition,
    LabelSet, ShareKey, SnapshotLabelCounts, UseCaseHint,
};
use hsp_core::registry::{
    anchor_dataset_attribution, attribute_origins, class_counts, parse_roa_csv, parse_rpsl, roa_hsp_kind,
    rpki_hsp_origins, AnchorClass, AnchorSources, IrrRouteObject, OriginAttribution, RoaHspKind, RoaRecord, RoaSet,
    RovStatus,
};
use hsp_core::sanitize::detect_noisy_origins;
use hsp_core::timeline::{daily_sets, heatmap_bins, prefix_stats, window_consistency, PresenceInterval};
use hsp_core::{Family, Prefix};

use crate::config::Loaded;
use crate::error::CliError;
use crate::report::{Cell, Table};
use crate::store::Snapshot;

pub struct Ctx<'a> {
    pub snaps: &'a [Snapshot],
    pub families: Vec<Family>,
    pub cfg: &'a Loaded,
}

fn fam(f: Family) -> Cell {
    Cell::Text(f.number().to_string())
}

fn share(part: u64, whole: u64) -> Cell {
    if whole == 0 {
        Cell::Missing
    } else {
        Cell::Float(part as f64 / whole as f64)
    }
}

impl Snapshot {
    pub fn hsps(&self, family: Family) -> BTreeSet<Prefix> {
        self.hsp_records.iter().filter(|r| r.family() == family).map(|r| r.prefix).collect()
    }

    pub fn hsp_origins(&self, family: Family) -> BTreeSet<u32> {
        self.hsp_records.iter().filter(|r| r.family() == family).filter_map(|r| r.origin_asn).collect()
    }

    fn intervals_of(&self, family: Family) -> Vec<PresenceInterval> {
        self.intervals.iter().filter(|iv| iv.prefix.family() == family).cloned().collect()
    }

    /// Anchor-level aggregation position of every aggregated anchor.
    pub fn anchor_positions(&self, family: Family) -> BTreeMap<Prefix, AnchorPosition> {
        let mut by_anchor: BTreeMap<Prefix, Vec<AggregationPosition>> = BTreeMap::new();
        for r in self.anchor_routes.iter().filter(|r| r.prefix.family() == family) {
            let pos = match r.position.as_str() {
                "Origin" => AggregationPosition::Origin,
                "OnPath" => AggregationPosition::OnPath,
                _ => AggregationPosition::OffPath,
            };
            by_anchor.entry(r.prefix).or_default().push(pos);
        }
        by_anchor.into_iter().filter_map(|(p, v)| anchor_position(v).map(|a| (p, a))).collect()
    }
}

pub fn growth(ctx: &Ctx, consistent: bool, noisy: bool) -> Vec<Table> {
    let mut t = Table::new("growth", &["snapshot", "family", "mode", "hsps", "origins"]);
    let mut stable: BTreeMap<Family, BTreeSet<u32>> = BTreeMap::new();
    for &f in &ctx.families {
        let mut sets = ctx.snaps.iter().map(|s| s.feeders.iter().filter(|r| r.family == f.number()).map(|r| r.asn).collect::<BTreeSet<u32>>());
        let first = sets.next().unwrap_or_default();
        stable.insert(f, sets.fold(first, |acc, s| &acc & &s));
    }
    for s in ctx.snaps {
        for &f in &ctx.families {
            t.push(vec![s.id().into(), fam(f), "all".into(), s.hsps(f).len().into(), s.hsp_origins(f).len().into()]);
            if consistent {
                let keep = &stable[&f];
                let rows: Vec<_> = s.hsp_records.iter().filter(|r| r.family() == f && keep.contains(&r.peer_asn)).collect();
                let hsps: BTreeSet<Prefix> = rows.iter().map(|r| r.prefix).collect();
                let origins: BTreeSet<u32> = rows.iter().filter_map(|r| r.origin_asn).collect();
                t.push(vec![s.id().into(), fam(f), "consistent".into(), hsps.len().into(), origins.len().into()]);
            }
        }
    }
    let mut out = vec![t];
    if noisy {
        let mut n = Table::new("noisy_origins", &["family", "signal", "asn", "snapshot", "count", "baseline"]);
        for &f in &ctx.families {
            for (signal, pick) in [("hsps", 0usize), ("anchors", 1)] {
                let per_snap: Vec<BTreeMap<u32, u64>> = ctx
                    .snaps
                    .iter()
                    .map(|s| {
                        s.origins
                            .iter()
                            .filter(|o| o.family == f.number())
                            .map(|o| (o.asn, if pick == 0 { o.hsps } else { o.hsp_anchors }))
                            .filter(|(_, c)| *c > 0)
                            .collect()
                    })
                    .collect();
                for flag in detect_noisy_origins(&per_snap, ctx.cfg.config.noise_factor) {
                    n.push(vec![fam(f), signal.into(), flag.asn.into(), ctx.snaps[flag.snapshot].id().into(), flag.count.into(), flag.baseline.into()]);
                }
            }
        }
        out.push(n);
    }
    out
}

pub fn share_table(ctx: &Ctx) -> Vec<Table> {
    let mut t = Table::new("share", &["snapshot", "family", "group", "prefixes", "visible", "share"]);
    for s in ctx.snaps {
        for &f in &ctx.families {
            let rows: Vec<_> = s.prefix_lengths.iter().filter(|r| r.family == f.number()).collect();
            let visible: u64 = rows.iter().map(|r| r.prefixes).sum();
            let mut hsp_total = 0;
            for r in rows.iter().filter(|r| r.length > f.hsp_boundary()) {
                hsp_total += r.prefixes;
                t.push(vec![s.id().into(), fam(f), format!("/{}", r.length).into(), r.prefixes.into(), visible.into(), share(r.prefixes, visible)]);
            }
            t.push(vec![s.id().into(), fam(f), "hsp".into(), hsp_total.into(), visible.into(), share(hsp_total, visible)]);
        }
    }
    vec![t]
}

fn band_labels(bands: &[usize]) -> Vec<String> {
    bands
        .iter()
        .enumerate()
        .map(|(i, &lo)| match bands.get(i + 1) {
            Some(&next) if next == lo + 1 => lo.to_string(),
            Some(&next) => format!("{lo}-{}", next - 1),
            None => format!(">{}", lo - 1),
        })
        .collect()
}

pub fn visibility(ctx: &Ctx) -> Result<Vec<Table>, CliError> {
    let bands = &ctx.cfg.config.visibility_bands;
    let labels = band_labels(bands);
    let mut t = Table::new("visibility", &["snapshot", "family", "band", "hsps"]);
    for s in ctx.snaps {
        let window = s.manifest.window()?;
        for &f in &ctx.families {
            let mut counts = vec![0u64; bands.len()];
            for st in prefix_stats(&s.intervals_of(f), &window) {
                let i = bands.iter().rposition(|&lo| st.visibility >= lo).unwrap_or(0);
                counts[i] += 1;
            }
            for (label, n) in labels.iter().zip(counts) {
                t.push(vec![s.id().into(), fam(f), label.clone().into(), n.into()]);
            }
        }
    }
    Ok(vec![t])
}

pub fn timeline(ctx: &Ctx) -> Result<Vec<Table>, CliError> {
    let c = &ctx.cfg.config;
    let mut heat = Table::new("heatmap", &["snapshot", "family", "feeders", "days", "hsps"]);
    let mut wc = Table::new("window_consistency", &["snapshot", "family", "w", "positions", "skipped", "mean", "q25", "q75"]);
    for s in ctx.snaps {
        let window = s.manifest.window()?;
        for &f in &ctx.families {
            let intervals = s.intervals_of(f);
            let h = heatmap_bins(&prefix_stats(&intervals, &window), &window, c.feeder_group, c.cell_days);
            for (g, row) in h.counts.iter().enumerate() {
                for (cell, n) in row.iter().enumerate() {
                    let feeders = format!("{}-{}", g * h.feeder_group + 1, (g + 1) * h.feeder_group);
                    let days = format!("{}-{}", cell as u64 * h.cell_days, (cell as u64 + 1) * h.cell_days);
                    heat.push(vec![s.id().into(), fam(f), feeders.into(), days.into(), (*n).into()]);
                }
            }
            let daily = daily_sets(&intervals, &window);
            for &w in &c.window_sizes {
                if let Ok(r) = window_consistency(&daily, w) {
                    wc.push(vec![s.id().into(), fam(f), w.into(), r.fractions.len().into(), r.skipped.into(), r.mean.into(), r.q25.into(), r.q75.into()]);
                }
            }
        }
    }
    Ok(vec![heat, wc])
}

fn hints(f: Family) -> &'static [UseCaseHint] {
    match f {
        Family::V4 => &UseCaseHint::ALL[..4],
        Family::V6 => &UseCaseHint::ALL[4..],
    }
}

pub fn classify(ctx: &Ctx) -> Vec<Table> {
    let mut t = Table::new("classify", &["snapshot", "family", "hint", "hsps", "share"]);
    for s in ctx.snaps {
        for &f in &ctx.families {
            let hsps = s.hsps(f);
            let mut counts: BTreeMap<UseCaseHint, u64> = BTreeMap::new();
            for p in &hsps {
                if let Ok(h) = cidr_bucket(p) {
                    *counts.entry(h).or_default() += 1;
                }
            }
            for h in hints(f) {
                let n = counts.get(h).copied().unwrap_or(0);
                t.push(vec![s.id().into(), fam(f), h.as_str().into(), n.into(), share(n, hsps.len() as u64)]);
            }
        }
    }
    vec![t]
}

fn label_sets(s: &Snapshot, f: Family, ctx: &Ctx) -> BTreeMap<Prefix, LabelSet> {
    let mut out: BTreeMap<Prefix, LabelSet> = BTreeMap::new();
    for r in s.hsp_records.iter().filter(|r| r.family() == f) {
        let set = out.entry(r.prefix).or_default();
        for l in classify_communities(&r.community_list(), &ctx.cfg.communities).iter() {
            set.insert(l);
        }
    }
    out
}

pub fn communities(ctx: &Ctx) -> Vec<Table> {
    let mut t = Table::new("communities", &["snapshot", "family", "label", "hsps", "total", "share"]);
    let mut summary = Table::new("community_summary", &["family", "label", "median", "std_dev", "snapshots", "skipped"]);
    for &f in &ctx.families {
        let mut per_snap = Vec::new();
        for s in ctx.snaps {
            let sets = label_sets(s, f, ctx);
            per_snap.push((s.id(), SnapshotLabelCounts::from_sets(sets.values())));
        }
        for (id, c) in &per_snap {
            for key in ShareKey::all() {
                let n = c.counts.get(&key).copied().unwrap_or(0);
                t.push(vec![(*id).into(), fam(f), key.to_string().into(), n.into(), c.total.into(), share(n, c.total)]);
            }
        }
        let counts: Vec<SnapshotLabelCounts> = per_snap.into_iter().map(|(_, c)| c).collect();
        let stats = community_share_stats(&counts);
        for row in &stats.rows {
            summary.push(vec![fam(f), row.key.to_string().into(), row.median.into(), row.std_dev.into(), stats.snapshots.into(), stats.skipped.into()]);
        }
    }
    // rows were built family-first; reorder to snapshot-first
    t.rows.sort_by(|a, b| (cell_text(&a[0]), cell_text(&a[1])).cmp(&(cell_text(&b[0]), cell_text(&b[1]))));
    vec![t, summary]
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Text(s) => s.clone(),
        _ => String::new(),
    }
}

pub fn aggregation(ctx: &Ctx) -> Vec<Table> {
    let mut t = Table::new("aggregation", &["snapshot", "family", "position", "anchors", "routes"]);
    let classes = [AnchorPosition::Origin, AnchorPosition::OnPath, AnchorPosition::OffPath, AnchorPosition::Multiple];
    for s in ctx.snaps {
        for &f in &ctx.families {
            let positions = s.anchor_positions(f);
            let mut routes: BTreeMap<&str, u64> = BTreeMap::new();
            for r in s.anchor_routes.iter().filter(|r| r.prefix.family() == f) {
                *routes.entry(r.position.as_str()).or_default() += r.routes;
            }
            for c in classes {
                let anchors = positions.values().filter(|&&p| p == c).count();
                let r = if c == AnchorPosition::Multiple { Cell::Missing } else { routes.get(c.as_str()).copied().unwrap_or(0).into() };
                t.push(vec![s.id().into(), fam(f), c.as_str().into(), anchors.into(), r]);
            }
        }
    }
    let mut w = Table::new("aggregation_warnings", &["snapshot", "as_trans_aggregators", "excluded_anchor_routes"]);
    for s in ctx.snaps {
        let c = &s.manifest.counters;
        w.push(vec![s.id().into(), c.as_trans_aggregators.into(), c.excluded_anchor_routes.into()]);
    }
    vec![t, w]
}

pub fn read_roas(path: &Path) -> Result<Vec<RoaRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path.display(), e))?;
    parse_roa_csv(&text).map_err(|e| CliError::input(path.display(), e))
}

pub fn read_irr(paths: &[std::path::PathBuf]) -> Result<Vec<IrrRouteObject>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| CliError::input(p.display(), e))?;
        out.extend(parse_rpsl(&text, None).objects);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn rov(ctx: &Ctx, roas: &[RoaRecord]) -> Vec<Table> {
    let set: RoaSet = roas.iter().cloned().collect();
    let mut t = Table::new("rov", &["snapshot", "family", "status", "pairs", "share"]);
    for s in ctx.snaps {
        for &f in &ctx.families {
            let pairs: BTreeSet<(Prefix, u32)> =
                s.hsp_records.iter().filter(|r| r.family() == f).filter_map(|r| Some((r.prefix, r.origin_asn?))).collect();
            let mut counts: BTreeMap<RovStatus, u64> = BTreeMap::new();
            for (p, o) in &pairs {
                *counts.entry(set.validate(p, *o)).or_default() += 1;
            }
            for status in RovStatus::ALL {
                let n = counts.get(&status).copied().unwrap_or(0);
                t.push(vec![s.id().into(), fam(f), status.as_str().into(), n.into(), share(n, pairs.len() as u64)]);
            }
        }
    }
    vec![t]
}

pub fn attribute(ctx: &Ctx, irr: &[IrrRouteObject], roas: &[RoaRecord], include_implicit: bool) -> Vec<Table> {
    let mut origins = Table::new("attribute_origins", &["snapshot", "family", "class", "asns"]);
    let mut anchors = Table::new("attribute_anchors", &["snapshot", "family", "class", "anchors"]);
    for s in ctx.snaps {
        for &f in &ctx.families {
            let irr_hsp: Vec<&IrrRouteObject> = irr.iter().filter(|o| o.prefix.family() == f && o.prefix.is_hyper_specific()).collect();
            let bgp = s.hsp_origins(f);
            let irr_origins: BTreeSet<u32> = irr_hsp.iter().map(|o| o.origin_asn).collect();
            let rpki = rpki_hsp_origins(roas, Some(f), include_implicit);
            let classes = attribute_origins(&bgp, &irr_origins, &rpki);
            for (class, n) in class_counts(&classes, &OriginAttribution::ALL) {
                origins.push(vec![s.id().into(), fam(f), class.as_str().into(), n.into()]);
            }
            let anchor = |p: &Prefix| p.anchor().ok();
            let sources = AnchorSources {
                collectors: s.hsps(f).iter().filter_map(anchor).collect(),
                irr: irr_hsp.iter().filter_map(|o| anchor(&o.prefix)).collect(),
                rpki: roas
                    .iter()
                    .filter(|r| r.prefix.family() == f && roa_hsp_kind(r) == RoaHspKind::Explicit)
                    .filter_map(|r| anchor(&r.prefix))
                    .collect(),
                aggregated: s.anchor_positions(f).into_iter().filter(|(_, p)| *p == AnchorPosition::OnPath).map(|(a, _)| a).collect(),
            };
            let by_anchor = anchor_dataset_attribution(&sources);
            for (class, n) in class_counts(&by_anchor, &AnchorClass::ALL) {
                anchors.push(vec![s.id().into(), fam(f), class.as_str().into(), n.into()]);
            }
        }
    }
    vec![origins, anchors]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RankKey {
    Origin,
    Feeder,
}

/// Distinct HSPs per AS, descending, ties by ascending ASN.
pub fn rank(ctx: &Ctx, key: RankKey, top: usize) -> Vec<Table> {
    let mut t = Table::new("rank", &["snapshot", "rank", "asn", "hsps"]);
    for s in ctx.snaps {
        let mut per_as: BTreeMap<u32, BTreeSet<Prefix>> = BTreeMap::new();
        for r in s.hsp_records.iter().filter(|r| ctx.families.contains(&r.family())) {
            let asn = match key {
                RankKey::Origin => r.origin_asn,
                RankKey::Feeder => Some(r.peer_asn),
            };
            if let Some(a) = asn {
                per_as.entry(a).or_default().insert(r.prefix);
            }
        }
        let mut rows: Vec<(u32, usize)> = per_as.into_iter().map(|(a, p)| (a, p.len())).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        for (i, (asn, n)) in rows.into_iter().take(top).enumerate() {
            t.push(vec![s.id().into(), (i + 1).into(), asn.into(), n.into()]);
        }
    }
    vec![t]
}

pub const CATEGORIES: [&str; 7] = ["Content", "Education", "Hypergiant", "ISP (Stub)", "ISP (Transit)", "Tier 1", "Others"];

/// Reads `asn,category` lines. A header row and `AS` prefixes are accepted.
pub fn read_categories(path: &Path) -> Result<BTreeMap<u32, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path.display(), e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((asn, cat)) = line.split_once(',') else {
            return Err(CliError::Input(format!("{}:{}: expected asn,category", path.display(), i + 1)));
        };
        let asn = asn.trim();
        let digits = asn.strip_prefix("AS").unwrap_or(asn);
        match digits.parse::<u32>() {
            Ok(a) => {
                out.insert(a, cat.trim().to_string());
            }
            Err(_) if i == 0 => continue,
            Err(_) => return Err(CliError::Input(format!("{}:{}: bad ASN `{asn}`", path.display(), i + 1))),
        }
    }
    Ok(out)
}

pub fn categories(ctx: &Ctx, map: &BTreeMap<u32, String>) -> Vec<Table> {
    let mut names: Vec<String> = CATEGORIES.iter().map(|s| s.to_string()).collect();
    let extra: BTreeSet<&String> = map.values().filter(|c| !CATEGORIES.contains(&c.as_str())).collect();
    names.splice(names.len() - 1..names.len() - 1, extra.into_iter().cloned());
    let mut t = Table::new("categories", &["snapshot", "family", "population", "category", "asns", "share"]);
    for s in ctx.snaps {
        for &f in &ctx.families {
            let all: BTreeSet<u32> = s.origins.iter().filter(|o| o.family == f.number()).map(|o| o.asn).collect();
            let hsp: BTreeSet<u32> = s.origins.iter().filter(|o| o.family == f.number() && o.hsps > 0).map(|o| o.asn).collect();
            for (population, set) in [("all", &all), ("hsp", &hsp)] {
                let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
                for a in set {
                    *counts.entry(map.get(a).map_or("Others", String::as_str)).or_default() += 1;
                }
                for name in &names {
                    let n = counts.get(name.as_str()).copied().unwrap_or(0);
                    t.push(vec![s.id().into(), fam(f), population.into(), name.clone().into(), n.into(), share(n, set.len() as u64)]);
                }
            }
        }
    }
    vec![t]
}
