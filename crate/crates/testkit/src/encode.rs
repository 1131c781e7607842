//! Reference MRT writer.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use hsp_core::route::AS_TRANS;
use hsp_core::{Family, PathSegment, Prefix, RecordKind, RouteRecord, SegmentKind};

const ORIGIN: u8 = 1;
const AS_PATH: u8 = 2;
const NEXT_HOP: u8 = 3;
const ATOMIC_AGGREGATE: u8 = 6;
const AGGREGATOR: u8 = 7;
const COMMUNITIES: u8 = 8;
const MP_REACH: u8 = 14;
const MP_UNREACH: u8 = 15;
const EXT_COMMUNITIES: u8 = 16;
const AS4_PATH: u8 = 17;
const AS4_AGGREGATOR: u8 = 18;
const LARGE_COMMUNITIES: u8 = 32;

const OPTIONAL: u8 = 0x80;
const TRANSITIVE: u8 = 0x40;

/// Appends one MRT record (common header + body).
pub fn mrt_record(out: &mut Vec<u8>, secs: u32, mrt_type: u16, subtype: u16, body: &[u8]) {
    out.extend_from_slice(&secs.to_be_bytes());
    out.extend_from_slice(&mrt_type.to_be_bytes());
    out.extend_from_slice(&subtype.to_be_bytes());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
}

fn ip_bytes(addr: IpAddr) -> Vec<u8> {
    match addr {
        IpAddr::V4(a) => a.octets().to_vec(),
        IpAddr::V6(a) => a.octets().to_vec(),
    }
}

fn afi(family: Family) -> u16 {
    match family {
        Family::V4 => 1,
        Family::V6 => 2,
    }
}

/// NLRI encoding of one prefix. A record with `abnormal_length` set is
/// written with that wire length and zero padding.
fn nlri(rec_prefix: &Prefix, abnormal: Option<u8>) -> Vec<u8> {
    let wire_len = abnormal.unwrap_or(rec_prefix.len());
    let addr = ip_bytes(rec_prefix.addr());
    let n = (wire_len as usize).div_ceil(8);
    let mut out = vec![wire_len];
    for i in 0..n {
        out.push(*addr.get(i).unwrap_or(&0));
    }
    out
}

fn attr(out: &mut Vec<u8>, flags: u8, code: u8, value: &[u8]) {
    if value.len() > 255 {
        out.push(flags | 0x10);
        out.push(code);
        out.extend_from_slice(&(value.len() as u16).to_be_bytes());
    } else {
        out.push(flags);
        out.push(code);
        out.push(value.len() as u8);
    }
    out.extend_from_slice(value);
}

fn path_bytes(path: &[PathSegment], four_byte: bool) -> Vec<u8> {
    let mut v = Vec::new();
    for seg in path {
        v.push(match seg.kind {
            SegmentKind::Set => 1,
            SegmentKind::Sequence => 2,
        });
        v.push(seg.asns.len() as u8);
        for &asn in &seg.asns {
            if four_byte {
                v.extend_from_slice(&asn.to_be_bytes());
            } else {
                let a = if asn > 0xffff { AS_TRANS as u16 } else { asn as u16 };
                v.extend_from_slice(&a.to_be_bytes());
            }
        }
    }
    v
}

/// Path attributes common to RIB entries and updates. `four_byte` selects
/// the AS_PATH encoding; on 2-byte sessions AS4_PATH and AS4_AGGREGATOR are
/// added when any ASN needs them.
fn path_attributes(rec: &RouteRecord, four_byte: bool) -> Vec<u8> {
    let mut out = Vec::new();
    attr(&mut out, TRANSITIVE, ORIGIN, &[0]);
    attr(&mut out, TRANSITIVE, AS_PATH, &path_bytes(&rec.as_path, four_byte));
    let wide = rec.as_path.iter().flat_map(|s| s.asns.iter()).any(|&a| a > 0xffff);
    if !four_byte && wide {
        attr(&mut out, OPTIONAL | TRANSITIVE, AS4_PATH, &path_bytes(&rec.as_path, true));
    }
    if rec.atomic_aggregate {
        attr(&mut out, TRANSITIVE, ATOMIC_AGGREGATE, &[]);
    }
    if let Some(agg) = &rec.aggregator {
        let addr = match agg.address {
            IpAddr::V4(a) => a.octets(),
            IpAddr::V6(_) => [0; 4],
        };
        let mut v = Vec::new();
        if four_byte {
            v.extend_from_slice(&agg.asn.to_be_bytes());
        } else {
            let a = if agg.asn > 0xffff { AS_TRANS as u16 } else { agg.asn as u16 };
            v.extend_from_slice(&a.to_be_bytes());
        }
        v.extend_from_slice(&addr);
        attr(&mut out, OPTIONAL | TRANSITIVE, AGGREGATOR, &v);
        if !four_byte && agg.asn > 0xffff {
            let mut v4 = agg.asn.to_be_bytes().to_vec();
            v4.extend_from_slice(&addr);
            attr(&mut out, OPTIONAL | TRANSITIVE, AS4_AGGREGATOR, &v4);
        }
    }
    if !rec.communities.is_empty() {
        let v: Vec<u8> = rec.communities.iter().flat_map(|c| [c.0.to_be_bytes(), c.1.to_be_bytes()].concat()).collect();
        attr(&mut out, OPTIONAL | TRANSITIVE, COMMUNITIES, &v);
    }
    if !rec.extended_communities.is_empty() {
        let v: Vec<u8> = rec.extended_communities.iter().flatten().copied().collect();
        attr(&mut out, OPTIONAL | TRANSITIVE, EXT_COMMUNITIES, &v);
    }
    if !rec.large_communities.is_empty() {
        let v: Vec<u8> = rec.large_communities.iter().flatten().flat_map(|x| x.to_be_bytes()).collect();
        attr(&mut out, OPTIONAL | TRANSITIVE, LARGE_COMMUNITIES, &v);
    }
    out
}

fn same_attributes(a: &RouteRecord, b: &RouteRecord) -> bool {
    a.as_path == b.as_path
        && a.communities == b.communities
        && a.large_communities == b.large_communities
        && a.extended_communities == b.extended_communities
        && a.aggregator == b.aggregator
        && a.atomic_aggregate == b.atomic_aggregate
}

/// TABLE_DUMP_V2 PEER_INDEX_TABLE followed by one RIB record per run of
/// consecutive entries with the same prefix and second.
pub fn encode_table_dump(records: &[RouteRecord]) -> Vec<u8> {
    let mut peers: Vec<(u32, IpAddr)> = Vec::new();
    for r in records {
        if !peers.contains(&(r.peer_asn, r.peer_address)) {
            peers.push((r.peer_asn, r.peer_address));
        }
    }
    let secs = records.first().map_or(0, |r| r.timestamp.secs() as u32);
    let mut out = Vec::new();
    let mut body = Vec::new();
    body.extend_from_slice(&0x0a00_0001u32.to_be_bytes());
    let view = b"ref";
    body.extend_from_slice(&(view.len() as u16).to_be_bytes());
    body.extend_from_slice(view);
    body.extend_from_slice(&(peers.len() as u16).to_be_bytes());
    for (i, (asn, addr)) in peers.iter().enumerate() {
        let v6 = matches!(addr, IpAddr::V6(_));
        body.push(u8::from(v6) | 0x02);
        body.extend_from_slice(&(i as u32 + 1).to_be_bytes());
        body.extend_from_slice(&ip_bytes(*addr));
        body.extend_from_slice(&asn.to_be_bytes());
    }
    mrt_record(&mut out, secs, 13, 1, &body);

    let mut seq = 0u32;
    let mut i = 0;
    while i < records.len() {
        let first = &records[i];
        let mut j = i + 1;
        while j < records.len()
            && records[j].prefix == first.prefix
            && records[j].abnormal_length == first.abnormal_length
            && records[j].timestamp.secs() == first.timestamp.secs()
        {
            j += 1;
        }
        let mut body = Vec::new();
        body.extend_from_slice(&seq.to_be_bytes());
        body.extend_from_slice(&nlri(&first.prefix, first.abnormal_length));
        body.extend_from_slice(&((j - i) as u16).to_be_bytes());
        for r in &records[i..j] {
            let idx = peers.iter().position(|p| *p == (r.peer_asn, r.peer_address)).unwrap();
            body.extend_from_slice(&(idx as u16).to_be_bytes());
            body.extend_from_slice(&(r.timestamp.secs() as u32).to_be_bytes());
            let mut attrs = path_attributes(r, true);
            if r.family() == Family::V6 {
                // abbreviated MP_REACH: next hop only
                let mut v = vec![16];
                v.extend_from_slice(&Ipv6Addr::LOCALHOST.octets());
                attr(&mut attrs, OPTIONAL, MP_REACH, &v);
            } else {
                attr(&mut attrs, TRANSITIVE, NEXT_HOP, &Ipv4Addr::LOCALHOST.octets());
            }
            body.extend_from_slice(&(attrs.len() as u16).to_be_bytes());
            body.extend_from_slice(&attrs);
        }
        let subtype = if first.family() == Family::V4 { 2 } else { 4 };
        mrt_record(&mut out, first.timestamp.secs() as u32, 13, subtype, &body);
        seq += 1;
        i = j;
    }
    out
}

/// BGP4MP (or BGP4MP_ET when microseconds are present) UPDATE messages.
/// Consecutive records of one session, second, family and attribute set
/// share a message, as long as withdrawals come first.
pub fn encode_updates(records: &[RouteRecord], four_byte: bool) -> Vec<u8> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let first = &records[i];
        let mut j = i + 1;
        let mut seen_announce = !first.is_withdrawal();
        let mut template = (!first.is_withdrawal()).then_some(first);
        while j < records.len() {
            let r = &records[j];
            if r.timestamp != first.timestamp
                || r.peer_asn != first.peer_asn
                || r.peer_address != first.peer_address
                || r.family() != first.family()
                || j - i >= 64
            {
                break;
            }
            if r.is_withdrawal() {
                if seen_announce {
                    break;
                }
            } else {
                if let Some(t) = template {
                    if !same_attributes(t, r) {
                        break;
                    }
                }
                template = Some(r);
                seen_announce = true;
            }
            j += 1;
        }
        encode_update(&mut out, &records[i..j], four_byte);
        i = j;
    }
    out
}

fn encode_update(out: &mut Vec<u8>, group: &[RouteRecord], four_byte: bool) {
    let first = &group[0];
    let family = first.family();
    let withdrawn: Vec<u8> = group.iter().filter(|r| r.is_withdrawal()).flat_map(|r| nlri(&r.prefix, r.abnormal_length)).collect();
    let announced: Vec<u8> = group.iter().filter(|r| !r.is_withdrawal()).flat_map(|r| nlri(&r.prefix, r.abnormal_length)).collect();
    let template = group.iter().find(|r| !r.is_withdrawal());

    let mut attrs = Vec::new();
    if let Some(t) = template {
        attrs = path_attributes(t, four_byte);
        if family == Family::V4 {
            attr(&mut attrs, TRANSITIVE, NEXT_HOP, &[192, 0, 2, 1]);
        } else {
            let mut v = afi(family).to_be_bytes().to_vec();
            v.push(1);
            v.push(16);
            v.extend_from_slice(&"2001:db8::1".parse::<Ipv6Addr>().unwrap().octets());
            v.push(0);
            v.extend_from_slice(&announced);
            attr(&mut attrs, OPTIONAL, MP_REACH, &v);
        }
    }
    if family == Family::V6 && !withdrawn.is_empty() {
        let mut v = afi(family).to_be_bytes().to_vec();
        v.push(1);
        v.extend_from_slice(&withdrawn);
        attr(&mut attrs, OPTIONAL, MP_UNREACH, &v);
    }

    let mut msg = vec![0xff; 16];
    msg.extend_from_slice(&[0, 0, 2]);
    let classic_withdrawn: &[u8] = if family == Family::V4 { &withdrawn } else { &[] };
    msg.extend_from_slice(&(classic_withdrawn.len() as u16).to_be_bytes());
    msg.extend_from_slice(classic_withdrawn);
    msg.extend_from_slice(&(attrs.len() as u16).to_be_bytes());
    msg.extend_from_slice(&attrs);
    if family == Family::V4 {
        msg.extend_from_slice(&announced);
    }
    let len = msg.len() as u16;
    msg[16..18].copy_from_slice(&len.to_be_bytes());

    let mut body = Vec::new();
    let micros = first.timestamp.subsec_micros();
    if micros != 0 {
        body.extend_from_slice(&micros.to_be_bytes());
    }
    if four_byte {
        body.extend_from_slice(&first.peer_asn.to_be_bytes());
        body.extend_from_slice(&65000u32.to_be_bytes());
    } else {
        body.extend_from_slice(&(first.peer_asn as u16).to_be_bytes());
        body.extend_from_slice(&65000u16.to_be_bytes());
    }
    body.extend_from_slice(&0u16.to_be_bytes());
    let peer_family = Family::of(&first.peer_address);
    body.extend_from_slice(&afi(peer_family).to_be_bytes());
    body.extend_from_slice(&ip_bytes(first.peer_address));
    body.extend_from_slice(&vec![0; if peer_family == Family::V4 { 4 } else { 16 }]);
    body.extend_from_slice(&msg);

    let mrt_type = if micros != 0 { 17 } else { 16 };
    let subtype = if four_byte { 4 } else { 1 };
    mrt_record(out, first.timestamp.secs() as u32, mrt_type, subtype, &body);
}

/// RIB entries as a table dump, everything else as 4-byte updates.
pub fn encode_records(records: &[RouteRecord]) -> Vec<u8> {
    let (rib, updates): (Vec<RouteRecord>, Vec<RouteRecord>) =
        records.iter().cloned().partition(|r| r.kind == RecordKind::RibEntry);
    let mut out = Vec::new();
    if !rib.is_empty() {
        out.extend(encode_table_dump(&rib));
    }
    out.extend(encode_updates(&updates, true));
    out
}
