//! Binary SHA-256 Merkle tree over rows of field elements.
//! Leaves hash as `sha256(0x00 ‖ values)` and nodes as `sha256(0x01 ‖ l ‖ r)`.

use super::field::GElement;
use crate::crypto::Sha256;

pub type Digest = [u8; 32];

pub fn hash_leaf(values: &[GElement]) -> Digest {
    let mut h = Sha256::new();
    h.update(&[0x00]);
    for v in values {
        h.update(&v.to_le_bytes());
    }
    h.finalize()
}

fn hash_node(l: &Digest, r: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update(&[0x01]).update(l).update(r);
    h.finalize()
}

pub struct MerkleTree {
    /// `levels[0]` holds leaf hashes; the last level is the root.
    levels: Vec<Vec<Digest>>,
}

impl MerkleTree {
    /// `leaves.len()` must be a power of two.
    pub fn new(leaves: Vec<Digest>) -> Self {
        assert!(leaves.len().is_power_of_two(), "leaf count must be a power of two");
        let mut levels = vec![leaves];
        while levels.last().unwrap().len() > 1 {
            let next = levels
                .last()
                .unwrap()
                .chunks_exact(2)
                .map(|p| hash_node(&p[0], &p[1]))
                .collect();
            levels.push(next);
        }
        MerkleTree { levels }
    }

    pub fn from_rows<R: AsRef<[GElement]>>(rows: impl Iterator<Item = R>) -> Self {
        Self::new(rows.map(|r| hash_leaf(r.as_ref())).collect())
    }

    pub fn root(&self) -> Digest {
        self.levels.last().unwrap()[0]
    }

    pub fn open(&self, mut index: usize) -> Vec<Digest> {
        let mut path = Vec::with_capacity(self.levels.len() - 1);
        for level in &self.levels[..self.levels.len() - 1] {
            path.push(level[index ^ 1]);
            index >>= 1;
        }
        path
    }
}

/// Checks `values` at `index` against `root` in a tree of `2^depth` leaves.
pub fn verify_path(root: &Digest, depth: usize, mut index: usize, values: &[GElement], path: &[Digest]) -> bool {
    if path.len() != depth || index >> depth != 0 {
        return false;
    }
    let mut acc = hash_leaf(values);
    for sibling in path {
        acc = if index & 1 == 0 { hash_node(&acc, sibling) } else { hash_node(sibling, &acc) };
        index >>= 1;
    }
    acc == *root
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_and_verify_every_leaf() {
        let rows: Vec<[GElement; 2]> =
            (0..16u64).map(|i| [GElement::new(i), GElement::new(i * i)]).collect();
        let tree = MerkleTree::from_rows(rows.iter());
        for (i, row) in rows.iter().enumerate() {
            let path = tree.open(i);
            assert!(verify_path(&tree.root(), 4, i, row, &path));
            assert!(!verify_path(&tree.root(), 4, i ^ 1, row, &path));
            assert!(!verify_path(&tree.root(), 4, i + 16, row, &path));
            let mut bad = *row;
            bad[1] += GElement::ONE;
            assert!(!verify_path(&tree.root(), 4, i, &bad, &path));
        }
    }

    #[test]
    fn leaf_and_node_domains_differ() {
        let a = hash_leaf(&[GElement::ONE]);
        let tree = MerkleTree::new(vec![a, a]);
        assert_ne!(tree.root(), hash_leaf(&[GElement::ONE, GElement::ONE]));
        assert_eq!(MerkleTree::new(vec![a]).root(), a);
    }
}
