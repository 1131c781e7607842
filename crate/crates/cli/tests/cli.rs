use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use hsp_core::{Family, Prefix, RecordKind, RouteRecord};
use hsp_testkit::encode::{encode_table_dump, encode_updates};
use hsp_testkit::gen::{public_day, DayCorpus};
use rand::rngs::StdRng;
use rand::SeedableRng;
use sha2::{Digest, Sha256};

const DAY: u64 = 1_646_092_800; // 2022-03-01

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn hsp<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Out {
    let o = Command::new(env!("CARGO_BIN_EXE_hsp")).args(args).output().expect("spawn hsp");
    Out {
        code: o.status.code().unwrap_or(-1),
        stdout: String::from_utf8(o.stdout).unwrap(),
        stderr: String::from_utf8(o.stderr).unwrap(),
    }
}

fn ok<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> String {
    let o = hsp(args);
    assert_eq!(o.code, 0, "stderr: {}", o.stderr);
    o.stdout
}

/// Rows of a CSV report with its comment line stripped.
fn rows(csv_text: &str) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(csv_text.as_bytes());
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| headers.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn write_day(dir: &Path, tag: &str, day: &DayCorpus) -> Vec<String> {
    let rib = dir.join(format!("{tag}.rib.mrt"));
    let upd = dir.join(format!("{tag}.updates.mrt"));
    fs::write(&rib, encode_table_dump(&day.ribs)).unwrap();
    fs::write(&upd, encode_updates(&day.updates, true)).unwrap();
    vec![rib.display().to_string(), upd.display().to_string()]
}

fn scan(store: &Path, snapshot: &str, inputs: &[String]) -> String {
    let mut args = vec!["scan".to_string(), "--store".into(), store.display().to_string(), "--snapshot".into(), snapshot.into()];
    args.extend(inputs.iter().cloned());
    ok(&args)
}

fn announced(day: &DayCorpus) -> impl Iterator<Item = &RouteRecord> {
    day.ribs.iter().chain(&day.updates).filter(|r| r.kind != RecordKind::Withdrawal)
}

fn store_cmd(store: &Path, verb: &[&str]) -> String {
    let mut args: Vec<String> = verb.iter().map(|s| s.to_string()).collect();
    args.push("--store".into());
    args.push(store.display().to_string());
    ok(&args)
}

#[test]
fn scan_counts_every_record_once() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(11);
    let a = public_day(&mut rng, DAY, 6, 80, 300);
    let b = public_day(&mut rng, DAY, 4, 40, 200);
    let mut inputs = write_day(dir.path(), "a", &a);
    inputs.extend(write_day(dir.path(), "b", &b).into_iter().map(|p| format!("rrc01={p}")));
    let store = dir.path().join("store");
    let out = scan(&store, "s1", &inputs);

    let total = a.ribs.len() + a.updates.len() + b.ribs.len() + b.updates.len();
    let table = rows(&out);
    let get = |outcome: &str| table.iter().find(|r| r["outcome"] == outcome).map(|r| r["records"].parse::<usize>().unwrap());
    assert_eq!(get("total"), Some(total));
    assert_eq!(get("kept"), Some(total));

    let stored = fs::read_to_string(store.join("s1/hsp_records.csv")).unwrap();
    let got: BTreeSet<String> = rows(&stored).into_iter().map(|r| r["prefix"].clone()).collect();
    let want: BTreeSet<String> =
        announced(&a).chain(announced(&b)).filter(|r| r.prefix.is_hyper_specific()).map(|r| r.prefix.to_string()).collect();
    assert_eq!(got, want);

    let lengths = rows(&fs::read_to_string(store.join("s1/prefix_lengths.csv")).unwrap());
    let mut want_len: BTreeMap<(String, String), usize> = BTreeMap::new();
    let visible: BTreeSet<Prefix> = announced(&a).chain(announced(&b)).map(|r| r.prefix).collect();
    for p in &visible {
        *want_len.entry((p.family().number().to_string(), p.len().to_string())).or_default() += 1;
    }
    let got_len: BTreeMap<(String, String), usize> =
        lengths.into_iter().map(|r| ((r["family"].clone(), r["length"].clone()), r["prefixes"].parse().unwrap())).collect();
    assert_eq!(got_len, want_len);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let empty = dir.path().join("empty.mrt");
    fs::write(&empty, b"").unwrap();
    let out = hsp(&["scan", "--store", store.to_str().unwrap(), empty.to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stderr);

    let corrupt = dir.path().join("corrupt.mrt");
    let mut rng = StdRng::seed_from_u64(3);
    let day = public_day(&mut rng, DAY, 2, 10, 10);
    let mut bytes = encode_updates(&day.updates, true);
    bytes.extend_from_slice(&[0, 0, 0, 1, 0, 16, 0, 4, 0, 0, 0, 9, 1, 2]);
    fs::write(&corrupt, bytes).unwrap();
    let out = hsp(&["scan", "--store", store.to_str().unwrap(), corrupt.to_str().unwrap()]);
    assert_eq!(out.code, 3, "{}", out.stderr);
    assert!(out.stderr.contains("warning"));

    let missing = dir.path().join("nope.mrt");
    assert_eq!(hsp(&["scan", "--store", store.to_str().unwrap(), missing.to_str().unwrap()]).code, 1);
    assert_eq!(hsp(&["share", "--store", dir.path().join("absent").to_str().unwrap()]).code, 1);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "no_such_key = 1\n").unwrap();
    assert_eq!(hsp(&["share", "--config", bad.to_str().unwrap(), "--store", store.to_str().unwrap()]).code, 2);
    assert_eq!(hsp(&["share", "--window-days", "0", "--store", store.to_str().unwrap()]).code, 2);
    assert_eq!(hsp(&["share", "--family", "5"]).code, 2);
    assert_eq!(hsp(&["rov", "--store", store.to_str().unwrap(), "--roas", missing.to_str().unwrap()]).code, 1);
}

/// Two snapshots a month apart. The second keeps all but one of the first
/// snapshot's feeders and adds a few new ones.
fn two_snapshot_store(dir: &Path) -> (PathBuf, DayCorpus, DayCorpus) {
    let mut rng = StdRng::seed_from_u64(29);
    let a = public_day(&mut rng, DAY, 5, 60, 150);
    let later = DAY + 86_400 * 30;
    let extra = public_day(&mut rng, later, 3, 30, 50);
    let gone = a.ribs[0].peer_asn;
    let shift = |r: &RouteRecord| {
        let mut r = r.clone();
        r.timestamp = hsp_core::Timestamp::from_secs(r.timestamp.secs() + 86_400 * 30);
        r
    };
    let mut ribs: Vec<RouteRecord> = a.ribs.iter().filter(|r| r.peer_asn != gone).map(shift).chain(extra.ribs).collect();
    ribs.sort_by_key(|r| r.prefix);
    let mut updates: Vec<RouteRecord> = a.updates.iter().filter(|r| r.peer_asn != gone).map(shift).chain(extra.updates).collect();
    updates.sort_by_key(|r| r.timestamp);
    let b = DayCorpus { ribs, updates };
    let store = dir.join("store");
    scan(&store, "2022-03-01", &write_day(dir, "a", &a));
    scan(&store, "2022-03-31", &write_day(dir, "b", &b));
    (store, a, b)
}

#[test]
fn growth_matches_hand_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (store, a, b) = two_snapshot_store(dir.path());
    let out = rows(&store_cmd(&store, &["growth", "--consistent"]));
    for fam in [Family::V4, Family::V6] {
        let feeders = |d: &DayCorpus| announced(d).filter(|r| r.family() == fam).map(|r| r.peer_asn).collect::<BTreeSet<u32>>();
        let shared = &feeders(&a) & &feeders(&b);
        assert!(shared.len() >= 3);
        for (snap, day) in [("2022-03-01", &a), ("2022-03-31", &b)] {
            let hsp: Vec<&RouteRecord> = announced(day).filter(|r| r.family() == fam && r.prefix.is_hyper_specific()).collect();
            let prefixes: BTreeSet<Prefix> = hsp.iter().map(|r| r.prefix).collect();
            let origins: BTreeSet<u32> = hsp.iter().filter_map(|r| r.origin_asn()).collect();
            let row = |mode: &str| {
                out.iter().find(|r| r["snapshot"] == snap && r["family"] == fam.number().to_string() && r["mode"] == mode).unwrap()
            };
            assert_eq!(row("all")["hsps"], prefixes.len().to_string());
            assert_eq!(row("all")["origins"], origins.len().to_string());
            let kept: Vec<&&RouteRecord> = hsp.iter().filter(|r| shared.contains(&r.peer_asn)).collect();
            let kept_prefixes: BTreeSet<Prefix> = kept.iter().map(|r| r.prefix).collect();
            let kept_origins: BTreeSet<u32> = kept.iter().filter_map(|r| r.origin_asn()).collect();
            assert_eq!(row("consistent")["hsps"], kept_prefixes.len().to_string());
            assert_eq!(row("consistent")["origins"], kept_origins.len().to_string());
            assert!(kept_prefixes.len() <= prefixes.len());
        }
        let b_only = &feeders(&b) - &feeders(&a);
        assert!(!b_only.is_empty());
    }
}

#[test]
fn share_matches_recount() {
    let dir = tempfile::tempdir().unwrap();
    let (store, a, _) = two_snapshot_store(dir.path());
    let out = rows(&store_cmd(&store, &["share", "--family", "4"]));
    assert!(out.iter().all(|r| r["family"] == "4"));
    let visible: BTreeSet<Prefix> = announced(&a).filter(|r| r.family() == Family::V4).map(|r| r.prefix).collect();
    let hsp = visible.iter().filter(|p| p.is_hyper_specific()).count();
    let total = out.iter().find(|r| r["snapshot"] == "2022-03-01" && r["group"] == "hsp").unwrap();
    assert_eq!(total["prefixes"], hsp.to_string());
    assert_eq!(total["visible"], visible.len().to_string());
    assert_eq!(total["share"], format!("{:.6}", hsp as f64 / visible.len() as f64));
    for len in 25..=32u8 {
        let n = visible.iter().filter(|p| p.len() == len).count();
        let row = out.iter().find(|r| r["snapshot"] == "2022-03-01" && r["group"] == format!("/{len}"));
        assert_eq!(row.map_or(0, |r| r["prefixes"].parse().unwrap()), n);
    }
}

/// One /32 seen from 150 feeders, one from 3, one from a single feeder.
fn visibility_corpus() -> DayCorpus {
    let mk = |peer: u32, prefix: &str| {
        RouteRecord::new(RecordKind::RibEntry, hsp_core::Timestamp::from_secs(DAY), peer, std::net::IpAddr::from([80, 81, 192, (peer % 250) as u8]), prefix.parse().unwrap())
            .with_path(vec![hsp_core::PathSegment::seq([peer, 13335])])
    };
    let mut ribs = Vec::new();
    for peer in 0..150u32 {
        ribs.push(mk(1000 + peer, "45.64.1.1/32"));
    }
    for peer in 0..3u32 {
        ribs.push(mk(1000 + peer, "45.64.1.2/32"));
    }
    ribs.push(mk(1000, "45.64.1.3/32"));
    ribs.sort_by_key(|r| r.prefix);
    DayCorpus { ribs, updates: Vec::new() }
}

#[test]
fn visibility_bands() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let day = visibility_corpus();
    let rib = dir.path().join("rib.mrt");
    fs::write(&rib, encode_table_dump(&day.ribs)).unwrap();
    scan(&store, "v", &[rib.display().to_string()]);
    let out = rows(&store_cmd(&store, &["visibility", "--family", "4"]));
    let bands: Vec<(String, String)> = out.iter().map(|r| (r["band"].clone(), r["hsps"].clone())).collect();
    let want = [("1", "1"), ("2-5", "1"), ("6-10", "0"), ("11-100", "0"), (">100", "1")];
    assert_eq!(bands, want.map(|(a, b)| (a.to_string(), b.to_string())).to_vec());
}

#[test]
fn rank_breaks_ties_by_asn() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let mk = |origin: u32, prefix: &str| {
        RouteRecord::new(RecordKind::RibEntry, hsp_core::Timestamp::from_secs(DAY), 3356, std::net::IpAddr::from([80, 81, 192, 1]), prefix.parse().unwrap())
            .with_path(vec![hsp_core::PathSegment::seq([3356, origin])])
    };
    let mut ribs = vec![
        mk(2000, "45.64.2.0/25"),
        mk(2000, "45.64.2.128/25"),
        mk(1500, "45.64.3.0/25"),
        mk(1500, "45.64.3.128/25"),
        mk(1200, "45.64.4.0/26"),
        mk(3000, "45.64.5.0/24"),
    ];
    ribs.sort_by_key(|r| r.prefix);
    let rib = dir.path().join("rib.mrt");
    fs::write(&rib, encode_table_dump(&ribs)).unwrap();
    scan(&store, "r", &[rib.display().to_string()]);
    let out = rows(&store_cmd(&store, &["rank", "--top", "2"]));
    let got: Vec<(String, String, String)> = out.iter().map(|r| (r["rank"].clone(), r["asn"].clone(), r["hsps"].clone())).collect();
    assert_eq!(got, vec![("1".into(), "1500".into(), "2".into()), ("2".into(), "2000".into(), "2".into())]);

    let map = dir.path().join("cats.csv");
    fs::write(&map, "asn,category\nAS1500,Tier 1\n3000,Tier 1\n").unwrap();
    let cats = rows(&ok(&["categories", "--store", store.to_str().unwrap(), "--map", map.to_str().unwrap(), "--family", "4"]));
    let count = |pop: &str, cat: &str| cats.iter().find(|r| r["population"] == pop && r["category"] == cat).unwrap()["asns"].clone();
    assert_eq!(count("all", "Tier 1"), "2");
    assert_eq!(count("hsp", "Tier 1"), "1");
    assert_eq!(count("all", "Others"), "2");
    assert_eq!(count("hsp", "Others"), "2");

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let cats = rows(&ok(&["categories", "--store", store.to_str().unwrap(), "--map", empty.to_str().unwrap(), "--family", "4"]));
    assert_eq!(cats.iter().find(|r| r["population"] == "all" && r["category"] == "Others").unwrap()["asns"], "4");
}

fn fixture_files(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let roas = dir.join("roas.csv");
    fs::write(&roas, "prefix,max_length,asn\n45.64.0.0/12,24,1000\n45.64.1.0/24,32,1001\n2a0e::/16,64,1002\n").unwrap();
    let irr = dir.join("irr.db");
    fs::write(&irr, "route: 45.64.1.0/25\norigin: AS1001\nsource: TEST\n\nroute6: 2a0e:1::/56\norigin: AS1002\nsource: TEST\n").unwrap();
    let map = dir.join("cats.csv");
    fs::write(&map, "1001,Content\n1002,Education\n").unwrap();
    (roas, irr, map)
}

fn all_commands(store: &Path, out: &Path, roas: &Path, irr: &Path, map: &Path, inputs: &[String]) -> Vec<Vec<String>> {
    let s = store.display().to_string();
    let o = out.display().to_string();
    let mut scan_args = vec!["scan".to_string(), "--store".into(), s.clone(), "--snapshot".into(), "d".into()];
    scan_args.extend(inputs.iter().cloned());
    let mut cmds = vec![scan_args];
    for verb in [
        vec!["growth", "--consistent", "--noisy"],
        vec!["share"],
        vec!["visibility"],
        vec!["timeline"],
        vec!["classify"],
        vec!["communities"],
        vec!["aggregation"],
        vec!["rov", "--roas", roas.to_str().unwrap()],
        vec!["attribute", "--irr", irr.to_str().unwrap(), "--roas", roas.to_str().unwrap()],
        vec!["rank", "--by", "feeder"],
        vec!["categories", "--map", map.to_str().unwrap()],
        vec!["export", "--roas", roas.to_str().unwrap()],
    ] {
        let mut args: Vec<String> = verb.into_iter().map(String::from).collect();
        args.extend(["--store".to_string(), s.clone()]);
        cmds.push(args);
    }
    for c in &mut cmds {
        c.extend(["--out-dir".to_string(), o.clone(), "--format".into(), "json".into()]);
    }
    cmds
}

fn digest_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let h = Sha256::digest(fs::read(&p).unwrap());
                let hex: String = h.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), hex);
            }
        }
    }
    out
}

#[test]
fn every_command_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(41);
    let day = public_day(&mut rng, DAY, 8, 120, 400);
    let inputs = write_day(dir.path(), "d", &day);
    let (roas, irr, map) = fixture_files(dir.path());
    let mut digests = Vec::new();
    for run in 0..3 {
        let root = dir.path().join(format!("run{run}"));
        for cmd in all_commands(&root.join("store"), &root.join("out"), &roas, &irr, &map, &inputs) {
            ok(&cmd);
        }
        digests.push(digest_dir(&root));
    }
    assert!(digests[0].len() > 20);
    assert_eq!(digests[0], digests[1]);
    assert_eq!(digests[0], digests[2]);
}

#[test]
fn export_feeds_carry_schema_version() {
    let dir = tempfile::tempdir().unwrap();
    let (store, _, _) = two_snapshot_store(dir.path());
    let (roas, _, _) = fixture_files(dir.path());
    let out = dir.path().join("dash");
    ok(&["export", "--store", store.to_str().unwrap(), "--roas", roas.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    let mut names: Vec<String> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(
        names,
        ["feed_communities.json", "feed_community_summary.json", "feed_growth.json", "feed_heatmap.json", "feed_rank.json", "feed_rov.json", "feed_share.json", "feed_window_consistency.json"]
    );
    for n in names {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(&n)).unwrap()).unwrap();
        assert_eq!(v["schema_version"], 1, "{n}");
        assert_eq!(v["report"], n.trim_start_matches("feed_").trim_end_matches(".json"));
        assert!(v["rows"].is_array());
    }
}

#[test]
fn rank_golden_csv() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let day = visibility_corpus();
    let rib = dir.path().join("rib.mrt");
    fs::write(&rib, encode_table_dump(&day.ribs)).unwrap();
    scan(&store, "v", &[rib.display().to_string()]);
    let out = store_cmd(&store, &["rank", "--top", "3"]);
    let body: Vec<&str> = out.lines().skip(1).collect();
    assert!(out.starts_with("# hsp 0.1.0 report=rank schema=1 config="));
    assert_eq!(body, ["snapshot,rank,asn,hsps", "v,1,13335,3"]);
}

#[test]
fn compressed_inputs_match_plain() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(53);
    let day = public_day(&mut rng, DAY, 4, 50, 120);
    let plain = write_day(dir.path(), "p", &day);
    let zipped: Vec<String> = plain
        .iter()
        .zip(["gzip", "bzip2"])
        .map(|(p, tool)| {
            let st = Command::new(tool).args(["-k", p]).status().unwrap();
            assert!(st.success());
            format!("{p}.{}", if tool == "gzip" { "gz" } else { "bz2" })
        })
        .collect();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    scan(&a, "x", &plain);
    scan(&b, "x", &zipped);
    for f in ["hsp_records.csv", "prefix_lengths.csv", "origins.csv", "intervals.csv", "drops.csv"] {
        assert_eq!(fs::read(a.join("x").join(f)).unwrap(), fs::read(b.join("x").join(f)).unwrap(), "{f}");
    }
}
