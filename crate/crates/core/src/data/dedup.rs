//! Near-duplicate grouping by Hamming distance between perceptual hashes.
//!
//! Groups are the connected components of the graph joining every pair at
//! distance ≤ threshold (single linkage). Duplicates are only reported.

use serde::{Deserialize, Serialize};

use super::phash::{hamming, PerceptualHash};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashedItem {
    pub id: String,
    pub hash: PerceptualHash,
    pub label: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateGroup {
    /// Member ids in input order.
    pub ids: Vec<String>,
    /// Positions of the members in the input list.
    pub indices: Vec<usize>,
    /// Largest Hamming distance between any two members.
    pub max_distance: u32,
    /// `max − min` label over labeled members; `None` when fewer than one is labeled.
    pub label_spread: Option<u8>,
}

/// Burkhard–Keller tree over 64-bit hashes.
struct BkTree {
    nodes: Vec<BkNode>,
}

struct BkNode {
    bits: u64,
    index: usize,
    children: Vec<(u32, usize)>,
}

impl BkTree {
    fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn insert(&mut self, bits: u64, index: usize) {
        let new = self.nodes.len();
        self.nodes.push(BkNode {
            bits,
            index,
            children: Vec::new(),
        });
        if new == 0 {
            return;
        }
        let mut cur = 0;
        loop {
            let d = hamming(self.nodes[cur].bits, bits);
            match self.nodes[cur].children.iter().find(|&&(cd, _)| cd == d) {
                Some(&(_, next)) => cur = next,
                None => {
                    self.nodes[cur].children.push((d, new));
                    return;
                }
            }
        }
    }

    /// Indices of all stored hashes within `radius` of `bits`.
    fn within(&self, bits: u64, radius: u32, out: &mut Vec<usize>) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let d = hamming(node.bits, bits);
            if d <= radius {
                out.push(node.index);
            }
            let (lo, hi) = (d.saturating_sub(radius), d + radius);
            stack.extend(node.children.iter().filter(|(cd, _)| (lo..=hi).contains(cd)).map(|&(_, c)| c));
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // Smaller root wins so component roots stay deterministic.
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Single-linkage groups of size ≥ 2, ordered by their first member.
pub fn find_duplicates(items: &[HashedItem], threshold: u32) -> Result<Vec<DuplicateGroup>> {
    if threshold > 64 {
        return Err(Error::contract(format!("threshold {threshold} outside 0..=64")));
    }
    let mut tree = BkTree::new();
    let mut uf = UnionFind::new(items.len());
    let mut hits = Vec::new();
    for (i, item) in items.iter().enumerate() {
        hits.clear();
        tree.within(item.hash.bits, threshold, &mut hits);
        for &j in &hits {
            uf.union(i, j);
        }
        tree.insert(item.hash.bits, i);
    }

    let mut components: Vec<Vec<usize>> = vec![Vec::new(); items.len()];
    for i in 0..items.len() {
        let r = uf.find(i);
        components[r].push(i);
    }
    Ok(components
        .into_iter()
        .filter(|c| c.len() >= 2)
        .map(|indices| group_of(items, indices))
        .collect())
}

fn group_of(items: &[HashedItem], indices: Vec<usize>) -> DuplicateGroup {
    let mut max_distance = 0;
    for (a, &i) in indices.iter().enumerate() {
        for &j in &indices[a + 1..] {
            max_distance = max_distance.max(items[i].hash.distance(&items[j].hash));
        }
    }
    let labels: Vec<u8> = indices.iter().filter_map(|&i| items[i].label).collect();
    let label_spread = match (labels.iter().max(), labels.iter().min()) {
        (Some(hi), Some(lo)) => Some(hi - lo),
        _ => None,
    };
    DuplicateGroup {
        ids: indices.iter().map(|&i| items[i].id.clone()).collect(),
        indices,
        max_distance,
        label_spread,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::HashAlgorithm;

    fn item(id: &str, bits: u64, label: Option<u8>) -> HashedItem {
        HashedItem {
            id: id.into(),
            hash: PerceptualHash { bits, algorithm: HashAlgorithm::Average },
            label,
        }
    }

    #[test]
    fn exact_copy_grouped_at_zero() {
        let items = [item("a", 0xFF00, Some(10)), item("a-copy", 0xFF00, Some(70)), item("b", 0x00FF, None)];
        let groups = find_duplicates(&items, 0).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].ids, ["a", "a-copy"]);
        assert_eq!(groups[0].max_distance, 0);
        assert_eq!(groups[0].label_spread, Some(60));
    }

    #[test]
    fn threshold_64_joins_everything() {
        let items: Vec<_> = (0..5).map(|i| item(&i.to_string(), (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15), None)).collect();
        let groups = find_duplicates(&items, 64).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].indices, [0, 1, 2, 3, 4]);
    }

    #[test]
    fn chain_links_through_middle() {
        // a–b and b–c are within 1 bit; a–c is 2 bits apart.
        let items = [item("a", 0b00, None), item("b", 0b01, None), item("c", 0b11, None)];
        let groups = find_duplicates(&items, 1).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].max_distance, 2);
    }

    #[test]
    fn no_duplicates_gives_empty_list() {
        let items = [item("a", 1, None), item("b", 2, None)];
        assert!(find_duplicates(&items, 0).unwrap().is_empty());
        assert!(find_duplicates(&items, 65).is_err());
    }
}
