//! Test support for the hsp crates: an MRT encoder written straight from
//! RFC 6396 / RFC 4271, random input generators and brute-force oracles.

pub mod encode;
pub mod fixtures;
pub mod gen;
pub mod oracle;
