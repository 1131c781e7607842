//! Building blocks for measuring hyper-specific prefixes (HSPs) in BGP
//! route-collector data.
//!
//! An HSP is an announced prefix longer than /24 (IPv4) or /48 (IPv6).
//! The crate covers the whole measurement path: decoding MRT archives,
//! sanitizing the resulting routes, replaying routing-table state to get
//! visibility and consistency, labelling HSPs with likely use cases and
//! cross-checking them against IRR and RPKI data.

pub mod classify;
pub mod mrt;
pub mod prefix;
pub mod registry;
pub mod route;
pub mod sanitize;
pub mod stats;
pub mod timeline;
pub mod trie;

pub use prefix::{Family, Prefix, PrefixError};
pub use route::{Community, PathSegment, RecordKind, RouteRecord, SegmentKind, Timestamp};
pub use trie::PrefixTrie;
