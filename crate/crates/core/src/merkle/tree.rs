//! Append-only Merkle tree hashing with inclusion and consistency proofs.
//!
//! Hashing follows the RFC 6962 conventions: SHA-256 with a `0x00` prefix
//! for leaves and a `0x01` prefix for interior nodes. Proof generation uses
//! the PATH/SUBPROOF recurrences from RFC 6962 section 2.1; verification
//! follows the iterative algorithms of RFC 9162 sections 2.1.3.2 and
//! 2.1.4.2.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::MerkleError;

/// Size of a tree digest in bytes.
pub const HASH_SIZE: usize = 32;

/// A 32-byte node or root digest.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Digest(#[serde(with = "hex::serde")] pub [u8; HASH_SIZE]);

impl Digest {
    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; HASH_SIZE] = bytes.try_into().ok()?;
        Some(Digest(arr))
    }

    pub fn as_bytes(&self) -> &[u8; HASH_SIZE] {
        &self.0
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Digest of the empty tree: the hash of the empty input.
pub fn empty_root() -> Digest {
    Digest(Sha256::digest([]).into())
}

/// Leaf digest: `SHA256(0x00 || data)`.
pub fn leaf_hash(data: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update([0x00]);
    h.update(data);
    Digest(h.finalize().into())
}

/// Interior node digest: `SHA256(0x01 || left || right)`.
pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update([0x01]);
    h.update(left.0);
    h.update(right.0);
    Digest(h.finalize().into())
}

/// Largest power of two strictly smaller than `n`. Requires `n > 1`.
fn split_point(n: u64) -> u64 {
    debug_assert!(n > 1);
    let k = 1u64 << (63 - (n - 1).leading_zeros());
    debug_assert!(k < n && 2 * k >= n);
    k
}

/// Tree hash over a slice of leaf digests.
fn subtree_root(hashes: &[Digest]) -> Digest {
    match hashes.len() {
        0 => empty_root(),
        1 => hashes[0],
        n => {
            let k = split_point(n as u64) as usize;
            node_hash(&subtree_root(&hashes[..k]), &subtree_root(&hashes[k..]))
        }
    }
}

/// An append-only sequence of leaves with Merkle tree hashing over every
/// prefix. Leaves are retained so that state can be exported and branches
/// forked.
#[derive(Clone, Default)]
pub struct MerkleTree {
    leaves: Vec<Vec<u8>>,
    leaf_hashes: Vec<Digest>,
}

impl MerkleTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a leaf and returns the new tree size.
    pub fn append(&mut self, leaf: &[u8]) -> u64 {
        self.leaf_hashes.push(leaf_hash(leaf));
        self.leaves.push(leaf.to_vec());
        self.size()
    }

    pub fn size(&self) -> u64 {
        self.leaf_hashes.len() as u64
    }

    pub fn leaves(&self) -> &[Vec<u8>] {
        &self.leaves
    }

    /// Root over all current leaves.
    pub fn root(&self) -> Digest {
        subtree_root(&self.leaf_hashes)
    }

    /// Root over the first `size` leaves.
    pub fn root_at(&self, size: u64) -> Result<Digest, MerkleError> {
        if size > self.size() {
            return Err(MerkleError::SizeOutOfRange {
                requested: size,
                tree_size: self.size(),
            });
        }
        Ok(subtree_root(&self.leaf_hashes[..size as usize]))
    }

    /// Proof that the tree of size `old_size` is a prefix of the tree of
    /// size `new_size`. Empty when `old_size == new_size` or `old_size == 0`.
    pub fn consistency_proof(
        &self,
        old_size: u64,
        new_size: u64,
    ) -> Result<Vec<Digest>, MerkleError> {
        if old_size > new_size || new_size > self.size() {
            return Err(MerkleError::BadProofRange {
                old_size,
                new_size,
                tree_size: self.size(),
            });
        }
        if old_size == new_size || old_size == 0 {
            return Ok(Vec::new());
        }
        let mut proof = Vec::new();
        subproof(
            old_size,
            &self.leaf_hashes[..new_size as usize],
            true,
            &mut proof,
        );
        Ok(proof)
    }

    /// Audit path for the leaf at `index` within the tree of size `size`.
    pub fn inclusion_proof(&self, index: u64, size: u64) -> Result<Vec<Digest>, MerkleError> {
        if index >= size || size > self.size() {
            return Err(MerkleError::IndexOutOfRange {
                index,
                size,
                tree_size: self.size(),
            });
        }
        let mut proof = Vec::new();
        audit_path(index, &self.leaf_hashes[..size as usize], &mut proof);
        Ok(proof)
    }
}

/// RFC 6962 SUBPROOF: proof that the first `m` leaves of `hashes` form a
/// prefix of the whole slice. `complete` is true while the `m`-leaf subtree
/// root is already known to the verifier.
fn subproof(m: u64, hashes: &[Digest], complete: bool, out: &mut Vec<Digest>) {
    let n = hashes.len() as u64;
    debug_assert!(0 < m && m <= n);
    if m == n {
        if !complete {
            out.push(subtree_root(hashes));
        }
        return;
    }
    let k = split_point(n);
    if m <= k {
        subproof(m, &hashes[..k as usize], complete, out);
        out.push(subtree_root(&hashes[k as usize..]));
    } else {
        subproof(m - k, &hashes[k as usize..], false, out);
        out.push(subtree_root(&hashes[..k as usize]));
    }
}

/// RFC 6962 PATH: audit path for leaf `index` within `hashes`.
fn audit_path(index: u64, hashes: &[Digest], out: &mut Vec<Digest>) {
    let n = hashes.len() as u64;
    debug_assert!(index < n);
    if n == 1 {
        return;
    }
    let k = split_point(n);
    if index < k {
        audit_path(index, &hashes[..k as usize], out);
        out.push(subtree_root(&hashes[k as usize..]));
    } else {
        audit_path(index - k, &hashes[k as usize..], out);
        out.push(subtree_root(&hashes[..k as usize]));
    }
}

/// Verifies that the tree of size `old_size` with root `old_root` is a
/// prefix of the tree of size `new_size` with root `new_root`.
///
/// Pure function; malformed proofs yield `false`, never an error. The empty
/// tree is vacuously a prefix of every tree, and equal sizes require equal
/// roots with an empty proof.
pub fn verify_consistency(
    old_root: &Digest,
    old_size: u64,
    new_root: &Digest,
    new_size: u64,
    proof: &[Digest],
) -> bool {
    if old_size > new_size {
        return false;
    }
    if old_size == new_size {
        return proof.is_empty() && old_root == new_root;
    }
    if old_size == 0 {
        return proof.is_empty();
    }

    // RFC 9162 section 2.1.4.2. `fn_` and `sn` walk the node coordinates of
    // the old subtree root inside both trees.
    let mut path = proof.iter();
    let mut fn_ = old_size - 1;
    let mut sn = new_size - 1;
    while fn_ & 1 == 1 {
        fn_ >>= 1;
        sn >>= 1;
    }
    let (mut fr, mut sr) = if old_size.is_power_of_two() {
        (*old_root, *old_root)
    } else {
        match path.next() {
            Some(first) => (*first, *first),
            None => return false,
        }
    };
    for c in path {
        if sn == 0 {
            return false;
        }
        if fn_ & 1 == 1 || fn_ == sn {
            fr = node_hash(c, &fr);
            sr = node_hash(c, &sr);
            while fn_ & 1 == 0 && fn_ != 0 {
                fn_ >>= 1;
                sn >>= 1;
            }
        } else {
            sr = node_hash(&sr, c);
        }
        fn_ >>= 1;
        sn >>= 1;
    }
    sn == 0 && fr == *old_root && sr == *new_root
}

/// Verifies an audit path for `leaf` at `index` in a tree of `size` leaves
/// with the given `root`. Pure; malformed input yields `false`.
pub fn verify_inclusion(
    leaf: &[u8],
    index: u64,
    size: u64,
    root: &Digest,
    proof: &[Digest],
) -> bool {
    if index >= size {
        return false;
    }
    // RFC 9162 section 2.1.3.2.
    let mut fn_ = index;
    let mut sn = size - 1;
    let mut r = leaf_hash(leaf);
    for p in proof {
        if sn == 0 {
            return false;
        }
        if fn_ & 1 == 1 || fn_ == sn {
            r = node_hash(p, &r);
            while fn_ & 1 == 0 && fn_ != 0 {
                fn_ >>= 1;
                sn >>= 1;
            }
        } else {
            r = node_hash(&r, p);
        }
        fn_ >>= 1;
        sn >>= 1;
    }
    sn == 0 && r == *root
}

#[cfg(test)]
mod tests {
    use super::*;

    // Classic RFC 6962 test leaves and their prefix roots.
    fn test_leaves() -> Vec<Vec<u8>> {
        [
            "",
            "00",
            "10",
            "2021",
            "3031",
            "40414243",
            "5051525354555657",
            "606162636465666768696a6b6c6d6e6f",
        ]
        .iter()
        .map(|h| hex::decode(h).unwrap())
        .collect()
    }

    const PREFIX_ROOTS: [&str; 9] = [
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
        "6e340b9cffb37a989ca544e6bb780a2c78901d3fb33738768511a30617afa01d",
        "fac54203e7cc696cf0dfcb42c92a1d9dbaf70ad9e621f4bd8d98662f00e3c125",
        "aeb6bcfe274b70a14fb067a5e5578264db0fa9b51af5e0ba159158f329e06e77",
        "d37ee418976dd95753c1c73862b9398fa2a2cf9b4ff0fdfe8b30cd95209614b7",
        "4e3bbb1f7b478dcfe71fb631631519a3bca12c9aefca1612bfce4c13a86264d4",
        "76e67dadbcdf1e10e1b74ddc608abd2f98dfb16fbce75277b5232a127f2087ef",
        "ddb89be403809e325750d3d263cd78929c2942b7942a34b77e122c9594a74c8c",
        "5dc9da79a70659a9ad559cb701ded9a2ab9d823aad2f4960cfe370eff4604328",
    ];

    #[test]
    fn known_prefix_roots() {
        let mut tree = MerkleTree::new();
        assert_eq!(tree.root().to_hex(), PREFIX_ROOTS[0]);
        for (i, leaf) in test_leaves().iter().enumerate() {
            assert_eq!(tree.append(leaf), (i + 1) as u64);
            assert_eq!(tree.root().to_hex(), PREFIX_ROOTS[i + 1]);
        }
        // Prefix roots stay reachable after later appends.
        for (n, want) in PREFIX_ROOTS.iter().enumerate() {
            assert_eq!(tree.root_at(n as u64).unwrap().to_hex(), *want);
        }
    }

    #[test]
    fn empty_root_is_hash_of_empty_input() {
        assert_eq!(
            empty_root().to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn single_leaf_root_is_prefixed_hash() {
        let mut tree = MerkleTree::new();
        tree.append(b"d0");
        assert_eq!(tree.root(), leaf_hash(b"d0"));
    }

    #[test]
    fn append_keeps_earlier_roots() {
        let mut tree = MerkleTree::new();
        tree.append(b"a");
        let r1 = tree.root_at(1).unwrap();
        tree.append(b"b");
        assert_eq!(tree.root_at(1).unwrap(), r1);
        assert_eq!(tree.size(), 2);
    }

    #[test]
    fn root_at_out_of_range() {
        let tree = MerkleTree::new();
        assert!(matches!(
            tree.root_at(1),
            Err(MerkleError::SizeOutOfRange { .. })
        ));
    }

    #[test]
    fn consistency_trivial_cases() {
        let mut tree = MerkleTree::new();
        for i in 0..8u8 {
            tree.append(&[i]);
        }
        assert!(tree.consistency_proof(5, 5).unwrap().is_empty());
        assert!(tree.consistency_proof(0, 8).unwrap().is_empty());
        assert!(tree.consistency_proof(9, 9).is_err());
        assert!(tree.consistency_proof(6, 5).is_err());
    }

    #[test]
    fn verify_consistency_equal_sizes() {
        let mut tree = MerkleTree::new();
        tree.append(b"x");
        let root = tree.root();
        let other = leaf_hash(b"y");
        assert!(verify_consistency(&root, 1, &root, 1, &[]));
        assert!(!verify_consistency(&other, 1, &root, 1, &[]));
        // Equal sizes with a spurious proof are malformed.
        assert!(!verify_consistency(&root, 1, &root, 1, &[root]));
    }

    #[test]
    fn consistency_round_trip_small() {
        let mut tree = MerkleTree::new();
        for i in 0..32u8 {
            tree.append(&[i, i.wrapping_mul(7)]);
        }
        for m in 0..=32u64 {
            for n in m..=32u64 {
                let proof = tree.consistency_proof(m, n).unwrap();
                let old = tree.root_at(m).unwrap();
                let new = tree.root_at(n).unwrap();
                assert!(
                    verify_consistency(&old, m, &new, n, &proof),
                    "consistency {m}..{n} failed"
                );
            }
        }
    }

    #[test]
    fn inclusion_round_trip_small() {
        let mut tree = MerkleTree::new();
        let leaves: Vec<Vec<u8>> = (0..32u8).map(|i| vec![i, 0xA5]).collect();
        for leaf in &leaves {
            tree.append(leaf);
        }
        for n in 1..=32u64 {
            let root = tree.root_at(n).unwrap();
            for i in 0..n {
                let proof = tree.inclusion_proof(i, n).unwrap();
                assert!(verify_inclusion(&leaves[i as usize], i, n, &root, &proof));
                // A proof for index i must not verify for a different index.
                let wrong = (i + 1) % n;
                if wrong != i {
                    assert!(!verify_inclusion(
                        &leaves[i as usize],
                        wrong,
                        n,
                        &root,
                        &proof
                    ));
                }
            }
        }
    }

    #[test]
    fn single_leaf_inclusion_has_empty_path() {
        let mut tree = MerkleTree::new();
        tree.append(b"only");
        let proof = tree.inclusion_proof(0, 1).unwrap();
        assert!(proof.is_empty());
        assert!(verify_inclusion(b"only", 0, 1, &tree.root(), &proof));
        assert!(!verify_inclusion(b"other", 0, 1, &tree.root(), &proof));
    }
}
