//! Hand-built records for the rule table and aggregation positions.

use std::net::IpAddr;

use chrono::NaiveDate;
use hsp_core::route::Aggregator;
use hsp_core::{PathSegment, Prefix, RecordKind, RouteRecord, Timestamp};

pub const FEEDER: u32 = 3356;

fn at(date: &str) -> Timestamp {
    let d = NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap();
    Timestamp::from_secs(d.and_hms_opt(12, 0, 0).unwrap().and_utc().timestamp() as u64)
}

fn peer_address(prefix: &Prefix) -> IpAddr {
    match prefix.family() {
        hsp_core::Family::V4 => "80.81.192.1".parse().unwrap(),
        hsp_core::Family::V6 => "2001:7f8::1".parse().unwrap(),
    }
}

/// An HSP announced by FEEDER with a two-hop path on an otherwise quiet day.
pub fn clean(prefix: &str, date: &str) -> RouteRecord {
    let prefix: Prefix = prefix.parse().unwrap();
    RouteRecord::new(RecordKind::Announcement, at(date), FEEDER, peer_address(&prefix), prefix)
        .with_path(vec![PathSegment::seq([FEEDER, 13335])])
}

fn origin(rec: RouteRecord, asn: u32) -> RouteRecord {
    rec.with_path(vec![PathSegment::seq([FEEDER, asn])])
}

fn peer(mut rec: RouteRecord, asn: u32) -> RouteRecord {
    rec.peer_asn = asn;
    rec.as_path = vec![PathSegment::seq([asn, 13335])];
    rec
}

const QUIET: &str = "2021-02-15";
const V4: &str = "45.64.10.0/25";
const V6: &str = "2a0e:1000:1::/56";

/// One record per default rule, keyed by rule id. Each should be dropped
/// by that rule and matched by no other. The feeder is always FEEDER.
pub fn default_rule_fixtures() -> Vec<(&'static str, RouteRecord)> {
    let mut abnormal = clean("45.64.10.1/32", QUIET);
    abnormal.abnormal_length = Some(33);
    let mut no_origin = clean(V4, QUIET);
    no_origin.as_path.clear();
    vec![
        ("private-asn-2byte", origin(clean(V4, QUIET), 65000)),
        ("private-asn-4byte", origin(clean(V4, QUIET), 4_200_000_001)),
        ("private-ips", clean("10.1.2.0/25", QUIET)),
        ("private-ips-v6", clean("fd00:1::/64", QUIET)),
        ("class-d-e", clean("224.0.0.0/25", QUIET)),
        ("abnormal-prefix", abnormal),
        ("no-origin", no_origin),
        ("internal", clean(V4, QUIET).with_path(vec![PathSegment::seq([FEEDER, FEEDER])])),
        ("noisy-origin-9498-2015q4", origin(clean(V4, "2015-10-03"), 9498)),
        ("noisy-origin-36937-2016q4", origin(clean(V4, "2016-10-03"), 36937)),
        ("noisy-origin-9498-2017q2", origin(clean(V4, "2017-04-03"), 9498)),
        ("noisy-origin-7122-2019q3", origin(clean(V4, "2019-07-03"), 7122)),
        ("noisy-origin-12400", origin(clean(V4, QUIET), 12400)),
        ("noisy-peer-35908-2016q3", peer(clean(V4, "2016-07-03"), 35908)),
        ("noisy-peer-60924-27630-2017q1", peer(clean(V4, "2017-01-03"), 27630)),
        ("noisy-peer-37497-2017q4", peer(clean(V4, "2017-10-03"), 37497)),
        ("noisy-peer-14361-2018q4", peer(clean(V4, "2018-10-03"), 14361)),
        ("noisy-peer-262757-2019q1", peer(clean(V4, "2019-01-03"), 262757)),
        ("noisy-peer-268430-2020q2", peer(clean(V4, "2020-04-03"), 268430)),
        ("noisy-peer-398465-2021", peer(clean(V4, "2021-07-03"), 398465)),
        ("noisy-peer-203125-2021", peer(clean(V4, "2021-10-03"), 203125)),
        ("noisy-peer-268430-2020", peer(clean(V4, "2020-07-03"), 268430)),
        ("noisy-origin-v6-4761", origin(clean(V6, QUIET), 4761)),
        ("noisy-origin-v6-17451-45899-2017q3", origin(clean(V6, "2017-07-03"), 45899)),
        ("noisy-origin-v6-7713-2019q2", origin(clean(V6, "2019-04-03"), 7713)),
        ("noisy-origin-v6-8100-2021q3", origin(clean(V6, "2021-07-03"), 8100)),
        ("noisy-peer-v6-199036-2018q3", peer(clean(V6, "2018-07-03"), 199036)),
    ]
}

fn aggregated(path: &[u32], aggregator: u32) -> RouteRecord {
    let mut rec = clean(V4, QUIET).with_path(vec![PathSegment::seq(path.to_vec())]);
    rec.aggregator = Some(Aggregator { asn: aggregator, address: "45.64.10.1".parse().unwrap() });
    rec
}

/// Records for every aggregation position, labelled with the expected
/// class name.
pub fn aggregation_fixtures() -> Vec<(&'static str, RouteRecord)> {
    let mut atomic = aggregated(&[FEEDER, 13335], 13335);
    atomic.atomic_aggregate = true;
    let mut with_set = aggregated(&[FEEDER, 13335], 13335);
    with_set.as_path.push(PathSegment::set([64496, 64497]));
    vec![
        ("Origin", aggregated(&[FEEDER, 174, 13335], 13335)),
        ("OnPath", aggregated(&[FEEDER, 174, 13335], 174)),
        ("OffPath", aggregated(&[FEEDER, 174, 13335], 20940)),
        ("OffPath", aggregated(&[FEEDER, 174, 13335], hsp_core::route::AS_TRANS)),
        ("Excluded", atomic),
        ("Excluded", with_set),
        ("NotAggregated", clean(V4, QUIET)),
    ]
}
