//! Merkle tree over an ordered list of digests, using the split rule and
//! domain-separated node hashing of certificate-transparency logs:
//!
//! * leaf node     = H(0x00 || leaf)
//! * interior node = H(0x01 || left || right)
//! * a tree of `n > 1` leaves splits at the largest power of two `k < n`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{hash_parts, Digest};

pub const LEAF_PREFIX: u8 = 0x00;
pub const NODE_PREFIX: u8 = 0x01;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MerkleError {
    #[error("cannot build a Merkle tree over zero leaves")]
    EmptyTree,
    #[error("leaf index {index} out of range for {size} leaves")]
    IndexOutOfRange { index: u64, size: u64 },
}

/// Inclusion proof for one leaf. Siblings are ordered from the leaf upwards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub leaf_index: u64,
    pub tree_size: u64,
    pub siblings: Vec<Digest>,
}

pub fn leaf_hash(leaf: &Digest) -> Digest {
    hash_parts(&[&[LEAF_PREFIX], leaf.as_bytes()])
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    hash_parts(&[&[NODE_PREFIX], left.as_bytes(), right.as_bytes()])
}

/// Root over `leaves`, computed bottom-up with a stack of completed subtrees.
pub fn merkle_root(leaves: &[Digest]) -> Result<Digest, MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyTree);
    }
    // stack[i] holds the root of a perfect subtree; sizes are strictly
    // decreasing powers of two, mirroring the binary expansion of the count.
    let mut stack: Vec<(Digest, u64)> = Vec::new();
    for leaf in leaves {
        let mut node = (leaf_hash(leaf), 1u64);
        while let Some(&(top, size)) = stack.last() {
            if size != node.1 {
                break;
            }
            stack.pop();
            node = (node_hash(&top, &node.0), size * 2);
        }
        stack.push(node);
    }
    let (mut acc, _) = stack.pop().expect("non-empty");
    while let Some((left, _)) = stack.pop() {
        acc = node_hash(&left, &acc);
    }
    Ok(acc)
}

/// Inclusion proof for `leaves[index]`.
pub fn merkle_prove(leaves: &[Digest], index: usize) -> Result<MerkleProof, MerkleError> {
    if leaves.is_empty() {
        return Err(MerkleError::EmptyTree);
    }
    if index >= leaves.len() {
        return Err(MerkleError::IndexOutOfRange {
            index: index as u64,
            size: leaves.len() as u64,
        });
    }
    let mut siblings = Vec::new();
    path(leaves, index, &mut siblings);
    Ok(MerkleProof {
        leaf_index: index as u64,
        tree_size: leaves.len() as u64,
        siblings,
    })
}

fn subtree_root(leaves: &[Digest]) -> Digest {
    merkle_root(leaves).expect("subtrees are never empty")
}

fn path(leaves: &[Digest], index: usize, out: &mut Vec<Digest>) {
    let n = leaves.len();
    if n <= 1 {
        return;
    }
    let k = split_point(n);
    if index < k {
        path(&leaves[..k], index, out);
        out.push(subtree_root(&leaves[k..]));
    } else {
        path(&leaves[k..], index - k, out);
        out.push(subtree_root(&leaves[..k]));
    }
}

/// Largest power of two strictly less than `n` (requires `n >= 2`).
pub fn split_point(n: usize) -> usize {
    debug_assert!(n >= 2);
    1usize << (usize::BITS - 1 - (n - 1).leading_zeros())
}

/// Checks `proof` for `leaf` against `root`. Pure; consults nothing else.
pub fn merkle_verify(root: &Digest, leaf: &Digest, proof: &MerkleProof) -> bool {
    if proof.leaf_index >= proof.tree_size {
        return false;
    }
    let mut index = proof.leaf_index;
    let mut last = proof.tree_size - 1;
    let mut acc = leaf_hash(leaf);
    for sibling in &proof.siblings {
        if last == 0 {
            return false;
        }
        if index & 1 == 1 || index == last {
            acc = node_hash(sibling, &acc);
            if index & 1 == 0 {
                while index & 1 == 0 && index != 0 {
                    index >>= 1;
                    last >>= 1;
                }
            }
        } else {
            acc = node_hash(&acc, sibling);
        }
        index >>= 1;
        last >>= 1;
    }
    last == 0 && acc == *root
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::hash;

    fn leaves(n: usize) -> Vec<Digest> {
        (0..n).map(|i| hash(&(i as u64).to_be_bytes())).collect()
    }

    /// The recursive textbook definition, kept separate from the stack-based
    /// implementation above.
    fn reference_root(ls: &[Digest]) -> Digest {
        if ls.len() == 1 {
            return hash_parts(&[&[0u8], ls[0].as_bytes()]);
        }
        let mut k = 1;
        while k * 2 < ls.len() {
            k *= 2;
        }
        let l = reference_root(&ls[..k]);
        let r = reference_root(&ls[k..]);
        hash_parts(&[&[1u8], l.as_bytes(), r.as_bytes()])
    }

    #[test]
    fn single_and_pair() {
        let a = hash(b"a");
        let b = hash(b"b");
        assert_eq!(merkle_root(&[a]).unwrap(), hash_parts(&[&[0], a.as_bytes()]));
        let expected = hash_parts(&[
            &[1],
            hash_parts(&[&[0], a.as_bytes()]).as_bytes(),
            hash_parts(&[&[0], b.as_bytes()]).as_bytes(),
        ]);
        assert_eq!(merkle_root(&[a, b]).unwrap(), expected);
    }

    #[test]
    fn errors() {
        assert_eq!(merkle_root(&[]).unwrap_err(), MerkleError::EmptyTree);
        assert_eq!(merkle_prove(&[], 0).unwrap_err(), MerkleError::EmptyTree);
        assert_eq!(
            merkle_prove(&leaves(3), 3).unwrap_err(),
            MerkleError::IndexOutOfRange { index: 3, size: 3 }
        );
    }

    #[test]
    fn split_points() {
        assert_eq!(split_point(2), 1);
        assert_eq!(split_point(3), 2);
        assert_eq!(split_point(4), 2);
        assert_eq!(split_point(5), 4);
        assert_eq!(split_point(64), 32);
        assert_eq!(split_point(65), 64);
    }

    #[test]
    fn root_matches_reference_definition() {
        for n in 1..=130 {
            let ls = leaves(n);
            assert_eq!(merkle_root(&ls).unwrap(), reference_root(&ls), "n={n}");
        }
    }

    #[test]
    fn exhaustive_round_trip_and_perturbation() {
        for n in 1..=64 {
            let ls = leaves(n);
            let root = merkle_root(&ls).unwrap();
            for i in 0..n {
                let proof = merkle_prove(&ls, i).unwrap();
                let expected_len = {
                    // path length = depth of leaf i in the split tree
                    let (mut lo, mut hi, mut depth) = (0usize, n, 0usize);
                    while hi - lo > 1 {
                        let k = split_point(hi - lo);
                        if i < lo + k { hi = lo + k } else { lo += k }
                        depth += 1;
                    }
                    depth
                };
                assert_eq!(proof.siblings.len(), expected_len);
                assert!(merkle_verify(&root, &ls[i], &proof), "n={n} i={i}");
                for s in 0..proof.siblings.len() {
                    let mut bad = proof.clone();
                    bad.siblings[s].0[0] ^= 1;
                    assert!(!merkle_verify(&root, &ls[i], &bad));
                }
                for j in 0..n {
                    if j != i {
                        assert!(!merkle_verify(&root, &ls[j], &proof), "n={n} i={i} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn malformed_proofs_rejected() {
        let ls = leaves(5);
        let root = merkle_root(&ls).unwrap();
        let mut p = merkle_prove(&ls, 4).unwrap();
        p.siblings.push(Digest::ZERO);
        assert!(!merkle_verify(&root, &ls[4], &p));
        let mut p = merkle_prove(&ls, 4).unwrap();
        p.siblings.pop();
        assert!(!merkle_verify(&root, &ls[4], &p));
        let mut p = merkle_prove(&ls, 4).unwrap();
        p.leaf_index = 5;
        assert!(!merkle_verify(&root, &ls[4], &p));
    }

    #[test]
    fn domain_prefixes_present() {
        let d = hash(b"x");
        assert_eq!(leaf_hash(&d), hash_parts(&[&[LEAF_PREFIX], d.as_bytes()]));
        assert_ne!(leaf_hash(&d), hash(d.as_bytes()));
        assert_ne!(LEAF_PREFIX, NODE_PREFIX);
    }
}
