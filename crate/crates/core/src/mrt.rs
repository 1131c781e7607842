//! Streaming MRT decoder (RFC 6396) for TABLE_DUMP_V2 RIB dumps and
//! BGP4MP / BGP4MP_ET update archives.
//!
//! The decoder yields one [`RouteRecord`] per RIB entry and per announced or
//! withdrawn prefix. MRT records it does not understand are skipped and
//! counted; records whose body does not parse are counted as malformed. Only
//! a truncated stream ends decoding with an error.

use std::collections::VecDeque;
use std::io::{self, Read};
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use thiserror::Error;

use crate::prefix::{Family, Prefix};
use crate::route::{
    Aggregator, Community, ExtendedCommunity, LargeCommunity, PathSegment, RecordKind, RouteRecord, SegmentKind,
    Timestamp, AS_TRANS,
};

pub const TYPE_TABLE_DUMP_V2: u16 = 13;
pub const TYPE_BGP4MP: u16 = 16;
pub const TYPE_BGP4MP_ET: u16 = 17;

pub const SUBTYPE_PEER_INDEX_TABLE: u16 = 1;
pub const SUBTYPE_RIB_IPV4_UNICAST: u16 = 2;
pub const SUBTYPE_RIB_IPV6_UNICAST: u16 = 4;

pub const SUBTYPE_BGP4MP_MESSAGE: u16 = 1;
pub const SUBTYPE_BGP4MP_MESSAGE_AS4: u16 = 4;
pub const SUBTYPE_BGP4MP_MESSAGE_LOCAL: u16 = 6;
pub const SUBTYPE_BGP4MP_MESSAGE_AS4_LOCAL: u16 = 7;

const ATTR_AS_PATH: u8 = 2;
const ATTR_ATOMIC_AGGREGATE: u8 = 6;
const ATTR_AGGREGATOR: u8 = 7;
const ATTR_COMMUNITIES: u8 = 8;
const ATTR_MP_REACH_NLRI: u8 = 14;
const ATTR_MP_UNREACH_NLRI: u8 = 15;
const ATTR_EXTENDED_COMMUNITIES: u8 = 16;
const ATTR_AS4_PATH: u8 = 17;
const ATTR_AS4_AGGREGATOR: u8 = 18;
const ATTR_LARGE_COMMUNITIES: u8 = 32;

const BGP_UPDATE: u8 = 2;
const BGP_HEADER_LEN: usize = 19;

/// Counters collected while decoding one stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    /// MRT records read (any type).
    pub mrt_records: u64,
    /// Route records produced.
    pub records: u64,
    /// MRT records or BGP messages skipped because of unknown or
    /// non-routing type/subtype.
    pub skipped: u64,
    /// MRT records whose body failed to parse.
    pub malformed: u64,
    /// Prefixes that arrived with host bits set and were canonicalized.
    pub noncanonical: u64,
    /// Prefixes whose wire length exceeded the family maximum.
    pub abnormal_length: u64,
}

impl DecodeStats {
    pub fn merge(&mut self, other: &DecodeStats) {
        self.mrt_records += other.mrt_records;
        self.records += other.records;
        self.skipped += other.skipped;
        self.malformed += other.malformed;
        self.noncanonical += other.noncanonical;
        self.abnormal_length += other.abnormal_length;
    }
}

#[derive(Debug, Error)]
pub enum DecodeErrorKind {
    #[error("truncated MRT header ({got} of 12 bytes)")]
    TruncatedHeader { got: usize },
    #[error("truncated MRT body ({got} of {expected} bytes)")]
    TruncatedBody { expected: u32, got: usize },
    #[error("read failed: {0}")]
    Io(#[from] io::Error),
}

/// Fatal stream error, located by the byte offset of the MRT record it hit.
#[derive(Debug, Error)]
#[error("MRT decode error at byte {offset}: {kind}")]
pub struct DecodeError {
    pub offset: u64,
    pub kind: DecodeErrorKind,
}

#[derive(Debug, Clone, Copy)]
struct Peer {
    asn: u32,
    address: IpAddr,
}

/// Iterator over the route records of an MRT stream.
pub struct MrtDecoder<R> {
    reader: R,
    offset: u64,
    collector_id: String,
    peers: Vec<Peer>,
    pending: VecDeque<RouteRecord>,
    stats: DecodeStats,
    done: bool,
    body: Vec<u8>,
}

impl<R: Read> MrtDecoder<R> {
    pub fn new(reader: R) -> Self {
        MrtDecoder {
            reader,
            offset: 0,
            collector_id: String::new(),
            peers: Vec::new(),
            pending: VecDeque::new(),
            stats: DecodeStats::default(),
            done: false,
            body: Vec::new(),
        }
    }

    /// Label stamped on every produced record.
    pub fn with_collector(mut self, collector_id: impl Into<String>) -> Self {
        self.collector_id = collector_id.into();
        self
    }

    pub fn stats(&self) -> &DecodeStats {
        &self.stats
    }

    /// Bytes consumed so far.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn fail(&mut self, offset: u64, kind: DecodeErrorKind) -> Option<Result<RouteRecord, DecodeError>> {
        self.done = true;
        Some(Err(DecodeError { offset, kind }))
    }

    /// Reads and decodes the next MRT record into `pending`.
    /// Returns `Ok(false)` at a clean end of stream.
    fn read_record(&mut self) -> Result<bool, DecodeError> {
        let start = self.offset;
        let mut header = [0u8; 12];
        let got = read_full(&mut self.reader, &mut header).map_err(|e| DecodeError { offset: start, kind: e.into() })?;
        self.offset += got as u64;
        if got == 0 {
            return Ok(false);
        }
        if got < header.len() {
            return Err(DecodeError { offset: start, kind: DecodeErrorKind::TruncatedHeader { got } });
        }
        let secs = u32::from_be_bytes([header[0], header[1], header[2], header[3]]);
        let mrt_type = u16::from_be_bytes([header[4], header[5]]);
        let subtype = u16::from_be_bytes([header[6], header[7]]);
        let length = u32::from_be_bytes([header[8], header[9], header[10], header[11]]);

        self.body.clear();
        let got = (&mut self.reader)
            .take(length as u64)
            .read_to_end(&mut self.body)
            .map_err(|e| DecodeError { offset: start, kind: e.into() })?;
        self.offset += got as u64;
        if got < length as usize {
            return Err(DecodeError { offset: start, kind: DecodeErrorKind::TruncatedBody { expected: length, got } });
        }
        self.stats.mrt_records += 1;

        let body = std::mem::take(&mut self.body);
        let mut out = Vec::new();
        let result = match mrt_type {
            TYPE_TABLE_DUMP_V2 => self.table_dump_v2(subtype, secs, &body, &mut out),
            TYPE_BGP4MP => self.bgp4mp(subtype, Timestamp::from_secs(secs as u64), &body, &mut out),
            TYPE_BGP4MP_ET => {
                if body.len() < 4 {
                    Err(Malformed("BGP4MP_ET body shorter than microsecond field"))
                } else {
                    let micros = u32::from_be_bytes([body[0], body[1], body[2], body[3]]);
                    if micros >= 1_000_000 {
                        Err(Malformed("microsecond field out of range"))
                    } else {
                        self.bgp4mp(subtype, Timestamp::new(secs as u64, micros), &body[4..], &mut out)
                    }
                }
            }
            _ => Ok(Outcome::Skipped),
        };
        self.body = body;
        match result {
            Ok(Outcome::Records(stats)) => {
                self.stats.noncanonical += stats.noncanonical;
                self.stats.abnormal_length += stats.abnormal;
                self.stats.records += out.len() as u64;
                self.pending.extend(out);
            }
            Ok(Outcome::Skipped) => self.stats.skipped += 1,
            Err(_) => self.stats.malformed += 1,
        }
        Ok(true)
    }

    fn table_dump_v2(&mut self, subtype: u16, secs: u32, body: &[u8], out: &mut Vec<RouteRecord>) -> Result<Outcome, Malformed> {
        let family = match subtype {
            SUBTYPE_PEER_INDEX_TABLE => {
                self.peers = parse_peer_index(body)?;
                return Ok(Outcome::Records(NlriStats::default()));
            }
            SUBTYPE_RIB_IPV4_UNICAST => Family::V4,
            SUBTYPE_RIB_IPV6_UNICAST => Family::V6,
            _ => return Ok(Outcome::Skipped),
        };
        if self.peers.is_empty() {
            return Err(Malformed("RIB entry before PEER_INDEX_TABLE"));
        }
        let mut cur = Cursor::new(body);
        let _sequence = cur.u32()?;
        let mut stats = NlriStats::default();
        let (prefix, abnormal) = read_nlri_prefix(&mut cur, family, &mut stats)?;
        let count = cur.u16()?;
        let timestamp = Timestamp::from_secs(secs as u64);
        for _ in 0..count {
            let peer_index = cur.u16()? as usize;
            let _originated = cur.u32()?;
            let attr_len = cur.u16()? as usize;
            let attr_bytes = cur.take(attr_len)?;
            let peer = *self.peers.get(peer_index).ok_or(Malformed("peer index out of range"))?;
            let attrs = parse_attributes(attr_bytes, true, AttrContext::Rib)?;
            let mut rec = RouteRecord::new(RecordKind::RibEntry, timestamp, peer.asn, peer.address, prefix);
            rec.abnormal_length = abnormal;
            rec.collector_id = self.collector_id.clone();
            attrs.apply_to(&mut rec);
            out.push(rec);
        }
        Ok(Outcome::Records(stats))
    }

    fn bgp4mp(&mut self, subtype: u16, timestamp: Timestamp, body: &[u8], out: &mut Vec<RouteRecord>) -> Result<Outcome, Malformed> {
        let asn4 = match subtype {
            SUBTYPE_BGP4MP_MESSAGE | SUBTYPE_BGP4MP_MESSAGE_LOCAL => false,
            SUBTYPE_BGP4MP_MESSAGE_AS4 | SUBTYPE_BGP4MP_MESSAGE_AS4_LOCAL => true,
            _ => return Ok(Outcome::Skipped),
        };
        let mut cur = Cursor::new(body);
        let peer_asn = if asn4 { cur.u32()? } else { cur.u16()? as u32 };
        let _local_asn = if asn4 { cur.u32()? } else { cur.u16()? as u32 };
        let _ifindex = cur.u16()?;
        let afi = cur.u16()?;
        let peer_address = match afi {
            1 => read_ip(&mut cur, Family::V4)?,
            2 => read_ip(&mut cur, Family::V6)?,
            _ => return Err(Malformed("unknown BGP4MP address family")),
        };
        let _local_address = read_ip(&mut cur, Family::of(&peer_address))?;

        let marker = cur.take(16)?;
        if marker.iter().any(|&b| b != 0xff) {
            return Err(Malformed("bad BGP marker"));
        }
        let msg_len = cur.u16()? as usize;
        let msg_type = cur.u8()?;
        if msg_len < BGP_HEADER_LEN || msg_len - BGP_HEADER_LEN > cur.remaining() {
            return Err(Malformed("BGP message length out of range"));
        }
        if msg_type != BGP_UPDATE {
            return Ok(Outcome::Skipped);
        }
        let mut msg = Cursor::new(cur.take(msg_len - BGP_HEADER_LEN)?);
        let withdrawn_len = msg.u16()? as usize;
        let withdrawn = msg.take(withdrawn_len)?;
        let attr_len = msg.u16()? as usize;
        let attr_bytes = msg.take(attr_len)?;
        let nlri = msg.rest();

        let mut stats = NlriStats::default();
        let mut withdrawn_prefixes = parse_nlri_list(withdrawn, Family::V4, &mut stats)?;
        let attrs = parse_attributes(attr_bytes, asn4, AttrContext::Update)?;
        withdrawn_prefixes.extend(parse_mp_list(&attrs.mp_unreach, &mut stats)?);
        let mut announced = parse_mp_list(&attrs.mp_reach, &mut stats)?;
        announced.extend(parse_nlri_list(nlri, Family::V4, &mut stats)?);

        let base = RouteRecord {
            collector_id: self.collector_id.clone(),
            ..RouteRecord::new(RecordKind::Withdrawal, timestamp, peer_asn, peer_address, Prefix::host(peer_address))
        };
        for (prefix, abnormal) in withdrawn_prefixes {
            out.push(RouteRecord { prefix, abnormal_length: abnormal, ..base.clone() });
        }
        if !announced.is_empty() {
            let mut template = RouteRecord { kind: RecordKind::Announcement, ..base };
            attrs.apply_to(&mut template);
            for (prefix, abnormal) in announced {
                out.push(RouteRecord { prefix, abnormal_length: abnormal, ..template.clone() });
            }
        }
        Ok(Outcome::Records(stats))
    }
}

impl<R: Read> Iterator for MrtDecoder<R> {
    type Item = Result<RouteRecord, DecodeError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(rec) = self.pending.pop_front() {
                return Some(Ok(rec));
            }
            if self.done {
                return None;
            }
            match self.read_record() {
                Ok(true) => continue,
                Ok(false) => {
                    self.done = true;
                    return None;
                }
                Err(e) => return self.fail(e.offset, e.kind),
            }
        }
    }
}

/// Result of decoding a whole in-memory stream.
#[derive(Debug)]
pub struct DecodeOutput {
    pub records: Vec<RouteRecord>,
    pub stats: DecodeStats,
    /// Set when the stream ended in a truncated record.
    pub error: Option<DecodeError>,
}

/// Decodes a complete MRT byte buffer.
pub fn decode_mrt(input: &[u8], collector_id: &str) -> DecodeOutput {
    let mut decoder = MrtDecoder::new(input).with_collector(collector_id);
    let mut records = Vec::new();
    let mut error = None;
    for item in decoder.by_ref() {
        match item {
            Ok(rec) => records.push(rec),
            Err(e) => error = Some(e),
        }
    }
    DecodeOutput { records, stats: *decoder.stats(), error }
}

fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

#[derive(Debug)]
struct Malformed(#[allow(dead_code)] &'static str);

enum Outcome {
    Records(NlriStats),
    Skipped,
}

#[derive(Debug, Default, Clone, Copy)]
struct NlriStats {
    noncanonical: u64,
    abnormal: u64,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], Malformed> {
        if n > self.remaining() {
            return Err(Malformed("field runs past end of record"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }

    fn u8(&mut self) -> Result<u8, Malformed> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, Malformed> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, Malformed> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn read_ip(cur: &mut Cursor<'_>, family: Family) -> Result<IpAddr, Malformed> {
    Ok(match family {
        Family::V4 => {
            let b = cur.take(4)?;
            IpAddr::V4(Ipv4Addr::new(b[0], b[1], b[2], b[3]))
        }
        Family::V6 => {
            let b = cur.take(16)?;
            let mut a = [0u8; 16];
            a.copy_from_slice(b);
            IpAddr::V6(Ipv6Addr::from(a))
        }
    })
}

fn parse_peer_index(body: &[u8]) -> Result<Vec<Peer>, Malformed> {
    let mut cur = Cursor::new(body);
    let _collector_bgp_id = cur.u32()?;
    let name_len = cur.u16()? as usize;
    cur.take(name_len)?;
    let count = cur.u16()?;
    let mut peers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let peer_type = cur.u8()?;
        let _bgp_id = cur.u32()?;
        let address = read_ip(&mut cur, if peer_type & 0x01 != 0 { Family::V6 } else { Family::V4 })?;
        let asn = if peer_type & 0x02 != 0 { cur.u32()? } else { cur.u16()? as u32 };
        peers.push(Peer { asn, address });
    }
    Ok(peers)
}

/// Reads one length-prefixed NLRI prefix. Lengths beyond the family maximum
/// are reported as abnormal and the prefix is clamped to a host route.
fn read_nlri_prefix(cur: &mut Cursor<'_>, family: Family, stats: &mut NlriStats) -> Result<(Prefix, Option<u8>), Malformed> {
    let wire_len = cur.u8()?;
    let bytes = cur.take((wire_len as usize).div_ceil(8))?;
    let width = family.max_len() as usize / 8;
    let mut bits: u128 = 0;
    for i in 0..width {
        bits = (bits << 8) | *bytes.get(i).unwrap_or(&0) as u128;
    }
    let abnormal = (wire_len > family.max_len()).then_some(wire_len);
    let len = wire_len.min(family.max_len());
    let (prefix, changed) = Prefix::new_truncating(family, bits, len).map_err(|_| Malformed("prefix"))?;
    if abnormal.is_some() {
        stats.abnormal += 1;
    } else if changed {
        stats.noncanonical += 1;
    }
    Ok((prefix, abnormal))
}

fn parse_nlri_list(bytes: &[u8], family: Family, stats: &mut NlriStats) -> Result<Vec<(Prefix, Option<u8>)>, Malformed> {
    let mut cur = Cursor::new(bytes);
    let mut out = Vec::new();
    while !cur.is_empty() {
        out.push(read_nlri_prefix(&mut cur, family, stats)?);
    }
    Ok(out)
}

fn parse_mp_list(blocks: &[(Family, Vec<u8>)], stats: &mut NlriStats) -> Result<Vec<(Prefix, Option<u8>)>, Malformed> {
    let mut out = Vec::new();
    for (family, bytes) in blocks {
        out.extend(parse_nlri_list(bytes, *family, stats)?);
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum AttrContext {
    /// TABLE_DUMP_V2 entry: 4-byte AS_PATH, abbreviated MP_REACH_NLRI.
    Rib,
    Update,
}

#[derive(Default)]
struct Attributes {
    as_path: Option<Vec<PathSegment>>,
    as4_path: Option<Vec<PathSegment>>,
    aggregator: Option<Aggregator>,
    as4_aggregator: Option<Aggregator>,
    atomic_aggregate: bool,
    communities: Vec<Community>,
    large_communities: Vec<LargeCommunity>,
    extended_communities: Vec<ExtendedCommunity>,
    mp_reach: Vec<(Family, Vec<u8>)>,
    mp_unreach: Vec<(Family, Vec<u8>)>,
    asn4: bool,
}

impl Attributes {
    fn apply_to(&self, rec: &mut RouteRecord) {
        let (path, aggregator) = self.merged_path();
        rec.as_path = path;
        rec.aggregator = aggregator;
        rec.atomic_aggregate = self.atomic_aggregate;
        rec.communities = self.communities.clone();
        rec.large_communities = self.large_communities.clone();
        rec.extended_communities = self.extended_communities.clone();
    }

    /// Reconstructs the path and aggregator on 2-byte sessions from the
    /// AS4_PATH / AS4_AGGREGATOR transition attributes (RFC 6793, 4.2.3).
    fn merged_path(&self) -> (Vec<PathSegment>, Option<Aggregator>) {
        let path = self.as_path.clone().unwrap_or_default();
        if self.asn4 {
            return (path, self.aggregator);
        }
        if let Some(agg) = self.aggregator {
            if agg.asn != AS_TRANS {
                return (path, Some(agg));
            }
        }
        let aggregator = self.as4_aggregator.or(self.aggregator);
        let Some(as4) = &self.as4_path else {
            return (path, aggregator);
        };
        let old_count = path_count(&path);
        let new_count = path_count(as4);
        if old_count < new_count {
            return (path, aggregator);
        }
        let mut keep = old_count - new_count;
        let mut merged: Vec<PathSegment> = Vec::new();
        for seg in &path {
            if keep == 0 {
                break;
            }
            match seg.kind {
                SegmentKind::Set => {
                    merged.push(seg.clone());
                    keep -= 1;
                }
                SegmentKind::Sequence => {
                    let n = keep.min(seg.asns.len());
                    merged.push(PathSegment::seq(seg.asns[..n].to_vec()));
                    keep -= n;
                }
            }
        }
        for seg in as4 {
            match (merged.last_mut(), seg.kind) {
                (Some(last), SegmentKind::Sequence) if last.kind == SegmentKind::Sequence => {
                    last.asns.extend_from_slice(&seg.asns)
                }
                _ => merged.push(seg.clone()),
            }
        }
        (merged, aggregator)
    }
}

fn path_count(path: &[PathSegment]) -> usize {
    path.iter()
        .map(|s| match s.kind {
            SegmentKind::Sequence => s.asns.len(),
            SegmentKind::Set => 1,
        })
        .sum()
}

fn parse_attributes(bytes: &[u8], asn4: bool, ctx: AttrContext) -> Result<Attributes, Malformed> {
    let mut attrs = Attributes { asn4, ..Attributes::default() };
    let mut cur = Cursor::new(bytes);
    while !cur.is_empty() {
        let flags = cur.u8()?;
        let type_code = cur.u8()?;
        let len = if flags & 0x10 != 0 { cur.u16()? as usize } else { cur.u8()? as usize };
        let value = cur.take(len)?;
        match type_code {
            ATTR_AS_PATH => attrs.as_path = Some(parse_as_path(value, asn4)?),
            ATTR_AS4_PATH => attrs.as4_path = Some(parse_as_path(value, true)?),
            ATTR_ATOMIC_AGGREGATE => attrs.atomic_aggregate = true,
            ATTR_AGGREGATOR => attrs.aggregator = Some(parse_aggregator(value)?),
            ATTR_AS4_AGGREGATOR => attrs.as4_aggregator = Some(parse_aggregator(value)?),
            ATTR_COMMUNITIES => {
                if value.len() % 4 != 0 {
                    return Err(Malformed("COMMUNITIES length"));
                }
                attrs.communities = value
                    .chunks_exact(4)
                    .map(|c| Community(u16::from_be_bytes([c[0], c[1]]), u16::from_be_bytes([c[2], c[3]])))
                    .collect();
            }
            ATTR_LARGE_COMMUNITIES => {
                if value.len() % 12 != 0 {
                    return Err(Malformed("LARGE_COMMUNITY length"));
                }
                attrs.large_communities = value
                    .chunks_exact(12)
                    .map(|c| {
                        [
                            u32::from_be_bytes([c[0], c[1], c[2], c[3]]),
                            u32::from_be_bytes([c[4], c[5], c[6], c[7]]),
                            u32::from_be_bytes([c[8], c[9], c[10], c[11]]),
                        ]
                    })
                    .collect();
            }
            ATTR_EXTENDED_COMMUNITIES => {
                if value.len() % 8 != 0 {
                    return Err(Malformed("EXTENDED_COMMUNITIES length"));
                }
                attrs.extended_communities = value
                    .chunks_exact(8)
                    .map(|c| {
                        let mut e = [0u8; 8];
                        e.copy_from_slice(c);
                        e
                    })
                    .collect();
            }
            ATTR_MP_REACH_NLRI if ctx == AttrContext::Update => {
                let mut mp = Cursor::new(value);
                let afi = mp.u16()?;
                let safi = mp.u8()?;
                let nh_len = mp.u8()? as usize;
                mp.take(nh_len)?;
                let _reserved = mp.u8()?;
                if let Some(family) = unicast_family(afi, safi) {
                    attrs.mp_reach.push((family, mp.rest().to_vec()));
                }
            }
            ATTR_MP_UNREACH_NLRI if ctx == AttrContext::Update => {
                let mut mp = Cursor::new(value);
                let afi = mp.u16()?;
                let safi = mp.u8()?;
                if let Some(family) = unicast_family(afi, safi) {
                    attrs.mp_unreach.push((family, mp.rest().to_vec()));
                }
            }
            _ => {}
        }
    }
    Ok(attrs)
}

fn unicast_family(afi: u16, safi: u8) -> Option<Family> {
    match (afi, safi) {
        (1, 1) => Some(Family::V4),
        (2, 1) => Some(Family::V6),
        _ => None,
    }
}

/// Decodes AS_PATH segments. Confederation segments are dropped: they never
/// leave the confederation and carry no origin information.
fn parse_as_path(value: &[u8], asn4: bool) -> Result<Vec<PathSegment>, Malformed> {
    let mut cur = Cursor::new(value);
    let mut path = Vec::new();
    while !cur.is_empty() {
        let seg_type = cur.u8()?;
        let count = cur.u8()? as usize;
        let mut asns = Vec::with_capacity(count);
        for _ in 0..count {
            asns.push(if asn4 { cur.u32()? } else { cur.u16()? as u32 });
        }
        let kind = match seg_type {
            1 => SegmentKind::Set,
            2 => SegmentKind::Sequence,
            3 | 4 => continue,
            _ => return Err(Malformed("unknown AS_PATH segment type")),
        };
        if asns.is_empty() {
            continue;
        }
        // sequences longer than 255 ASNs are split on the wire
        match path.last_mut() {
            Some(PathSegment { kind: SegmentKind::Sequence, asns: prev }) if kind == SegmentKind::Sequence => {
                prev.extend_from_slice(&asns)
            }
            _ => path.push(PathSegment { kind, asns }),
        }
    }
    Ok(path)
}

fn parse_aggregator(value: &[u8]) -> Result<Aggregator, Malformed> {
    let mut cur = Cursor::new(value);
    let asn = match value.len() {
        6 => cur.u16()? as u32,
        8 => cur.u32()?,
        _ => return Err(Malformed("AGGREGATOR length")),
    };
    Ok(Aggregator { asn, address: read_ip(&mut cur, Family::V4)? })
}
