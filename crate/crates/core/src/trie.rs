//! Binary radix trie keyed by [`Prefix`].
//!
//! One bit per edge, no path compression. Nodes live in an arena and refer
//! to each other by index, which keeps a full-table trie at a few bytes per
//! node. Built by a single writer, then shared read-only.

use std::net::IpAddr;

use crate::prefix::{Family, Prefix};

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    child: [u32; 2],
    value: u32,
}

impl Node {
    const EMPTY: Node = Node { child: [NIL, NIL], value: NIL };
}

#[derive(Debug, Clone)]
pub struct PrefixTrie<T> {
    nodes: Vec<Node>,
    entries: Vec<(Prefix, T)>,
}

impl<T> Default for PrefixTrie<T> {
    fn default() -> Self {
        PrefixTrie::new()
    }
}

fn root(family: Family) -> u32 {
    match family {
        Family::V4 => 0,
        Family::V6 => 1,
    }
}

impl<T> PrefixTrie<T> {
    pub fn new() -> Self {
        PrefixTrie { nodes: vec![Node::EMPTY, Node::EMPTY], entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts `value` under `prefix`, returning the previous value if any.
    pub fn insert(&mut self, prefix: Prefix, value: T) -> Option<T> {
        let node = self.walk_create(&prefix);
        let slot = self.nodes[node as usize].value;
        if slot == NIL {
            self.nodes[node as usize].value = self.entries.len() as u32;
            self.entries.push((prefix, value));
            None
        } else {
            Some(std::mem::replace(&mut self.entries[slot as usize].1, value))
        }
    }

    /// Returns the value stored under `prefix`, inserting `make()` first if absent.
    pub fn get_or_insert_with(&mut self, prefix: Prefix, make: impl FnOnce() -> T) -> &mut T {
        let node = self.walk_create(&prefix);
        let mut slot = self.nodes[node as usize].value;
        if slot == NIL {
            slot = self.entries.len() as u32;
            self.nodes[node as usize].value = slot;
            self.entries.push((prefix, make()));
        }
        &mut self.entries[slot as usize].1
    }

    pub fn get(&self, prefix: &Prefix) -> Option<&T> {
        let node = self.walk(prefix)?;
        let slot = self.nodes[node as usize].value;
        (slot != NIL).then(|| &self.entries[slot as usize].1)
    }

    /// All stored prefixes that contain `prefix` (itself included), longest first.
    pub fn covering(&self, prefix: &Prefix) -> Vec<(&Prefix, &T)> {
        let mut found = Vec::new();
        let mut node = root(prefix.family());
        let mut depth = 0u8;
        loop {
            let n = self.nodes[node as usize];
            if n.value != NIL {
                let (p, v) = &self.entries[n.value as usize];
                found.push((p, v));
            }
            if depth == prefix.len() {
                break;
            }
            let next = n.child[prefix.bit(depth) as usize];
            if next == NIL {
                break;
            }
            node = next;
            depth += 1;
        }
        found.reverse();
        found
    }

    /// All stored prefixes inside `prefix` (itself included), in prefix order.
    pub fn covered(&self, prefix: &Prefix) -> Vec<(&Prefix, &T)> {
        let mut found = Vec::new();
        let Some(start) = self.walk(prefix) else {
            return found;
        };
        let mut stack = vec![start];
        while let Some(node) = stack.pop() {
            let n = self.nodes[node as usize];
            if n.value != NIL {
                let (p, v) = &self.entries[n.value as usize];
                found.push((p, v));
            }
            // Push the one-branch first so the zero-branch is visited first.
            for child in [n.child[1], n.child[0]] {
                if child != NIL {
                    stack.push(child);
                }
            }
        }
        found
    }

    /// Longest stored prefix containing `addr`.
    pub fn longest_match(&self, addr: IpAddr) -> Option<(&Prefix, &T)> {
        self.covering(&Prefix::host(addr)).into_iter().next()
    }

    /// True if any stored prefix contains `prefix`.
    pub fn is_covered(&self, prefix: &Prefix) -> bool {
        let mut node = root(prefix.family());
        let mut depth = 0u8;
        loop {
            let n = self.nodes[node as usize];
            if n.value != NIL {
                return true;
            }
            if depth == prefix.len() {
                return false;
            }
            let next = n.child[prefix.bit(depth) as usize];
            if next == NIL {
                return false;
            }
            node = next;
            depth += 1;
        }
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&Prefix, &T)> {
        self.entries.iter().map(|(p, v)| (p, v))
    }

    fn walk(&self, prefix: &Prefix) -> Option<u32> {
        let mut node = root(prefix.family());
        for depth in 0..prefix.len() {
            node = self.nodes[node as usize].child[prefix.bit(depth) as usize];
            if node == NIL {
                return None;
            }
        }
        Some(node)
    }

    fn walk_create(&mut self, prefix: &Prefix) -> u32 {
        let mut node = root(prefix.family());
        for depth in 0..prefix.len() {
            let b = prefix.bit(depth) as usize;
            let mut next = self.nodes[node as usize].child[b];
            if next == NIL {
                next = self.nodes.len() as u32;
                self.nodes.push(Node::EMPTY);
                self.nodes[node as usize].child[b] = next;
            }
            node = next;
        }
        node
    }
}

impl<T> FromIterator<(Prefix, T)> for PrefixTrie<T> {
    fn from_iter<I: IntoIterator<Item = (Prefix, T)>>(iter: I) -> Self {
        let mut trie = PrefixTrie::new();
        for (p, v) in iter {
            trie.insert(p, v);
        }
        trie
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn nested_covering_and_covered() {
        let mut t = PrefixTrie::new();
        t.insert(p("184.164.240.0/23"), 1);
        t.insert(p("184.164.241.0/24"), 2);
        let cov: Vec<_> = t.covering(&p("184.164.241.255/32")).into_iter().map(|(q, _)| *q).collect();
        assert_eq!(cov, vec![p("184.164.241.0/24"), p("184.164.240.0/23")]);
        let inner: Vec<_> = t.covered(&p("184.164.240.0/23")).into_iter().map(|(q, _)| *q).collect();
        assert_eq!(inner, vec![p("184.164.240.0/23"), p("184.164.241.0/24")]);
        assert!(t.covered(&p("10.0.0.0/8")).is_empty());
    }

    #[test]
    fn insert_then_get_and_replace() {
        let mut t = PrefixTrie::new();
        assert_eq!(t.insert(p("2001:db8::/32"), "a"), None);
        assert_eq!(t.get(&p("2001:db8::/32")), Some(&"a"));
        assert_eq!(t.insert(p("2001:db8::/32"), "b"), Some("a"));
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(&p("2001:db8::/33")), None);
        // families do not mix
        t.insert(p("0.0.0.0/0"), "v4 default");
        assert!(t.covering(&p("::/0")).is_empty());
    }

    #[test]
    fn default_route_and_longest_match() {
        let t: PrefixTrie<u8> = [(p("0.0.0.0/0"), 0), (p("10.0.0.0/8"), 8), (p("10.1.0.0/16"), 16)]
            .into_iter()
            .collect();
        let (q, v) = t.longest_match("10.1.2.3".parse().unwrap()).unwrap();
        assert_eq!((*q, *v), (p("10.1.0.0/16"), 16));
        assert_eq!(*t.longest_match("11.0.0.1".parse().unwrap()).unwrap().1, 0);
        assert!(t.is_covered(&p("192.0.2.0/24")));
    }
}
