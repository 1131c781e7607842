//! Canonical IP prefixes and the hyper-specific / more-specific predicates.

use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Address family of a prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    V4,
    V6,
}

impl Family {
    /// Address width in bits.
    pub const fn max_len(self) -> u8 {
        match self {
            Family::V4 => 32,
            Family::V6 => 128,
        }
    }

    /// Longest prefix length that is still considered widely acceptable.
    /// Anything longer is hyper-specific.
    pub const fn hsp_boundary(self) -> u8 {
        match self {
            Family::V4 => 24,
            Family::V6 => 48,
        }
    }

    pub fn of(addr: &IpAddr) -> Family {
        match addr {
            IpAddr::V4(_) => Family::V4,
            IpAddr::V6(_) => Family::V6,
        }
    }

    /// `4` or `6`.
    pub const fn number(self) -> u8 {
        match self {
            Family::V4 => 4,
            Family::V6 => 6,
        }
    }

    fn full_mask(self) -> u128 {
        match self {
            Family::V4 => u32::MAX as u128,
            Family::V6 => u128::MAX,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::V4 => f.write_str("IPv4"),
            Family::V6 => f.write_str("IPv6"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrefixError {
    #[error("malformed prefix `{0}`")]
    Malformed(String),
    #[error("prefix length /{len} out of range for {family}")]
    LengthOutOfRange { family: Family, len: u32 },
    #[error("non-canonical prefix `{0}`: host bits are set")]
    NonCanonical(String),
    #[error("prefixes belong to different address families")]
    FamilyMismatch,
    #[error("{0} is not hyper-specific")]
    NotHyperSpecific(Prefix),
}

/// An IPv4 or IPv6 prefix in canonical form (no bits set beyond the length).
///
/// IPv4 addresses live in the low 32 bits of `bits`. The derived ordering
/// sorts by family, then address, then length.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prefix {
    family: Family,
    bits: u128,
    len: u8,
}

fn mask(family: Family, len: u8) -> u128 {
    if len == 0 {
        return 0;
    }
    let width = family.max_len();
    (family.full_mask() << (width - len)) & family.full_mask()
}

impl Prefix {
    /// Builds a prefix, rejecting out-of-range lengths and set host bits.
    pub fn new(family: Family, bits: u128, len: u8) -> Result<Prefix, PrefixError> {
        let (p, changed) = Prefix::new_truncating(family, bits, len)?;
        if changed || bits & !family.full_mask() != 0 {
            return Err(PrefixError::NonCanonical(format!("{}/{}", p.addr(), len)));
        }
        Ok(p)
    }

    /// Builds a prefix, clearing host bits. The flag reports whether any had to
    /// be cleared.
    pub fn new_truncating(family: Family, bits: u128, len: u8) -> Result<(Prefix, bool), PrefixError> {
        if len > family.max_len() {
            return Err(PrefixError::LengthOutOfRange { family, len: len as u32 });
        }
        let bits_in_range = bits & family.full_mask();
        let canonical = bits_in_range & mask(family, len);
        Ok((Prefix { family, bits: canonical, len }, canonical != bits))
    }

    pub fn from_addr(addr: IpAddr, len: u8) -> Result<Prefix, PrefixError> {
        let (family, bits) = addr_bits(addr);
        Prefix::new(family, bits, len)
    }

    /// The /32 or /128 covering exactly `addr`.
    pub fn host(addr: IpAddr) -> Prefix {
        let (family, bits) = addr_bits(addr);
        Prefix { family, bits, len: family.max_len() }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn bits(&self) -> u128 {
        self.bits
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    /// Network address.
    pub fn addr(&self) -> IpAddr {
        match self.family {
            Family::V4 => IpAddr::V4(Ipv4Addr::from(self.bits as u32)),
            Family::V6 => IpAddr::V6(Ipv6Addr::from(self.bits)),
        }
    }

    /// Bit `i` of the address, counting from the most significant bit.
    pub fn bit(&self, i: u8) -> bool {
        debug_assert!(i < self.family.max_len());
        (self.bits >> (self.family.max_len() - 1 - i)) & 1 == 1
    }

    /// True for IPv4 prefixes longer than /24 and IPv6 prefixes longer than /48.
    pub fn is_hyper_specific(&self) -> bool {
        self.len > self.family.hsp_boundary()
    }

    /// True if `other` lies inside this prefix (equality included).
    pub fn contains(&self, other: &Prefix) -> bool {
        self.family == other.family
            && self.len <= other.len
            && other.bits & mask(self.family, self.len) == self.bits
    }

    pub fn contains_addr(&self, addr: IpAddr) -> bool {
        self.contains(&Prefix::host(addr))
    }

    /// True if `self` is strictly contained in `other`. A prefix is never
    /// more-specific of itself.
    pub fn is_more_specific_of(&self, other: &Prefix) -> Result<bool, PrefixError> {
        if self.family != other.family {
            return Err(PrefixError::FamilyMismatch);
        }
        Ok(other.len < self.len && other.contains(self))
    }

    /// Shortens the prefix to `len` bits (no-op when `len >= self.len()`).
    pub fn truncate(&self, len: u8) -> Prefix {
        let len = len.min(self.len);
        Prefix { family: self.family, bits: self.bits & mask(self.family, len), len }
    }

    /// The covering /24 (IPv4) or /48 (IPv6) of a hyper-specific prefix.
    pub fn anchor(&self) -> Result<Prefix, PrefixError> {
        if !self.is_hyper_specific() {
            return Err(PrefixError::NotHyperSpecific(*self));
        }
        Ok(self.truncate(self.family.hsp_boundary()))
    }
}

fn addr_bits(addr: IpAddr) -> (Family, u128) {
    match addr {
        IpAddr::V4(a) => (Family::V4, u32::from(a) as u128),
        IpAddr::V6(a) => (Family::V6, u128::from(a)),
    }
}

impl FromStr for Prefix {
    type Err = PrefixError;

    fn from_str(text: &str) -> Result<Prefix, PrefixError> {
        let text = text.trim();
        let (addr, len) = text
            .split_once('/')
            .ok_or_else(|| PrefixError::Malformed(text.to_string()))?;
        let addr: IpAddr = addr.parse().map_err(|_| PrefixError::Malformed(text.to_string()))?;
        if len.is_empty() || !len.bytes().all(|b| b.is_ascii_digit()) {
            return Err(PrefixError::Malformed(text.to_string()));
        }
        let family = Family::of(&addr);
        let len: u32 = len.parse().map_err(|_| PrefixError::Malformed(text.to_string()))?;
        if len > family.max_len() as u32 {
            return Err(PrefixError::LengthOutOfRange { family, len });
        }
        let (family, bits) = addr_bits(addr);
        let (p, changed) = Prefix::new_truncating(family, bits, len as u8)?;
        if changed {
            return Err(PrefixError::NonCanonical(text.to_string()));
        }
        Ok(p)
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr(), self.len)
    }
}

impl fmt::Debug for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Prefix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prefix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Prefix, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
