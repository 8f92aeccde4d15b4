//! Bitcoin transaction Merkle trees (double-SHA-256, odd levels duplicate
//! their last node).

use serde::{Deserialize, Serialize};

use super::Hash256;
use crate::crypto::Sha256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MerkleError {
    #[error("cannot build a Merkle tree with no leaves")]
    EmptyLeaves,
    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Authentication path for one leaf; siblings run bottom-up and the bits of
/// `leaf_index` say on which side each one sits.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct MerkleBranch {
    pub leaf_index: u32,
    pub siblings: Vec<Hash256>,
}

pub(crate) fn hash_pair(left: &Hash256, right: &Hash256) -> Hash256 {
    let mut h = Sha256::new();
    h.update(&left.0).update(&right.0);
    Hash256(crate::crypto::sha256(&h.finalize()))
}

fn next_level(level: &[Hash256]) -> Vec<Hash256> {
    level
        .chunks(2)
        .map(|pair| hash_pair(&pair[0], pair.get(1).unwrap_or(&pair[0])))
        .collect()
}

pub fn merkle_root(leaves: &[Hash256]) -> Result<Hash256, MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyLeaves);
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = next_level(&level);
    }
    Ok(level[0])
}

pub fn build_merkle_branch(leaves: &[Hash256], index: usize) -> Result<MerkleBranch, MerkleError> {
    if index >= leaves.len() {
        return Err(MerkleError::IndexOutOfRange { index, len: leaves.len() });
    }
    let mut siblings = Vec::new();
    let mut level = leaves.to_vec();
    let mut pos = index;
    while level.len() > 1 {
        let sibling = pos ^ 1;
        siblings.push(*level.get(sibling).unwrap_or(&level[pos]));
        level = next_level(&level);
        pos /= 2;
    }
    Ok(MerkleBranch { leaf_index: index as u32, siblings })
}

fn fold(leaf: &Hash256, branch: &MerkleBranch, strict: bool) -> Option<Hash256> {
    let mut acc = *leaf;
    let mut idx = branch.leaf_index;
    for sibling in &branch.siblings {
        if idx & 1 == 1 {
            // A right child equal to its left sibling can only come from the
            // duplication rule, i.e. a position that does not really exist.
            if strict && *sibling == acc {
                return None;
            }
            acc = hash_pair(sibling, &acc);
        } else {
            acc = hash_pair(&acc, sibling);
        }
        idx >>= 1;
    }
    // Index bits beyond the branch depth would name a leaf outside the tree.
    (idx == 0).then_some(acc)
}

pub fn verify_merkle_branch(leaf: &Hash256, branch: &MerkleBranch, root: &Hash256) -> bool {
    fold(leaf, branch, false).is_some_and(|r| r == *root)
}

/// Like [`verify_merkle_branch`] but also rejects proofs for duplicated
/// positions (the CVE-2012-2459 shape).
pub fn verify_merkle_branch_strict(leaf: &Hash256, branch: &MerkleBranch, root: &Hash256) -> bool {
    fold(leaf, branch, true).is_some_and(|r| r == *root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::sha256d;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn leaf(i: u8) -> Hash256 {
        Hash256([i; 32])
    }

    fn cat(a: &Hash256, b: &Hash256) -> Hash256 {
        let mut buf = a.0.to_vec();
        buf.extend_from_slice(&b.0);
        Hash256(sha256d(&buf))
    }

    #[test]
    fn small_trees_by_direct_evaluation() {
        let (a, b, c) = (leaf(1), leaf(2), leaf(3));
        assert_eq!(merkle_root(&[a]).unwrap(), a);
        assert_eq!(merkle_root(&[a, b]).unwrap(), cat(&a, &b));
        assert_eq!(merkle_root(&[a, b, c]).unwrap(), cat(&cat(&a, &b), &cat(&c, &c)));
        assert_eq!(merkle_root(&[]), Err(MerkleError::EmptyLeaves));
    }

    #[test]
    fn branch_shapes() {
        let l: Vec<_> = (0..4).map(leaf).collect();
        let b = build_merkle_branch(&l, 2).unwrap();
        assert_eq!(b.siblings, vec![l[3], cat(&l[0], &l[1])]);
        assert!(build_merkle_branch(&[leaf(0)], 0).unwrap().siblings.is_empty());
        let three: Vec<_> = (0..3).map(leaf).collect();
        assert_eq!(build_merkle_branch(&three, 2).unwrap().siblings[0], three[2]);
        assert_eq!(
            build_merkle_branch(&three, 3),
            Err(MerkleError::IndexOutOfRange { index: 3, len: 3 })
        );
    }

    #[test]
    fn empty_branch_verifies_leaf_as_root() {
        let branch = MerkleBranch { leaf_index: 0, siblings: vec![] };
        assert!(verify_merkle_branch(&leaf(9), &branch, &leaf(9)));
        assert!(!verify_merkle_branch(&leaf(9), &branch, &leaf(8)));
    }

    #[test]
    fn completeness_for_all_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=64usize {
            let leaves: Vec<Hash256> = (0..n).map(|_| Hash256(rng.gen())).collect();
            let root = merkle_root(&leaves).unwrap();
            for i in 0..n {
                let b = build_merkle_branch(&leaves, i).unwrap();
                assert_eq!(b.siblings.len(), (n as f64).log2().ceil() as usize);
                assert!(verify_merkle_branch(&leaves[i], &b, &root));
                assert!(verify_merkle_branch_strict(&leaves[i], &b, &root));
            }
        }
    }

    #[test]
    fn strict_mode_rejects_duplicated_position() {
        let leaves: Vec<_> = (0..3).map(leaf).collect();
        let root = merkle_root(&leaves).unwrap();
        // [a, b, c] and [a, b, c, c] share a root, so a proof for index 3 exists.
        let phantom = MerkleBranch {
            leaf_index: 3,
            siblings: vec![leaves[2], cat(&leaves[0], &leaves[1])],
        };
        assert!(verify_merkle_branch(&leaves[2], &phantom, &root));
        assert!(!verify_merkle_branch_strict(&leaves[2], &phantom, &root));
        // The genuine last leaf still verifies in strict mode.
        let real = build_merkle_branch(&leaves, 2).unwrap();
        assert!(verify_merkle_branch_strict(&leaves[2], &real, &root));
    }

    #[test]
    fn index_beyond_depth_is_rejected() {
        let leaves: Vec<_> = (0..4).map(leaf).collect();
        let root = merkle_root(&leaves).unwrap();
        let mut b = build_merkle_branch(&leaves, 1).unwrap();
        b.leaf_index += 4;
        assert!(!verify_merkle_branch(&leaves[1], &b, &root));
    }
}
