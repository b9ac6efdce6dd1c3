//! Tree-head signing.
//!
//! Tree heads are signed over a canonical fixed-width serialization so that
//! the signed statement is injective in (tree_size, timestamp, root_hash).
//! Two schemes are provided: a deterministic keyed-MAC signer for
//! reproducible fixtures and an Ed25519 signer for simulations that want a
//! real asymmetric scheme.

use ed25519_dalek::{Signature, Signer as _, SigningKey, Verifier as _, VerifyingKey};
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::tree::{Digest, HASH_SIZE};

type HmacSha256 = Hmac<Sha256>;

/// Canonical byte string a tree head is signed over:
/// version `0x00`, tree size (8 bytes BE), timestamp (8 bytes BE), root hash.
pub fn tree_head_bytes(tree_size: u64, timestamp_ms: u64, root_hash: &Digest) -> [u8; 49] {
    let mut out = [0u8; 49];
    out[1..9].copy_from_slice(&tree_size.to_be_bytes());
    out[9..17].copy_from_slice(&timestamp_ms.to_be_bytes());
    out[17..].copy_from_slice(&root_hash.0);
    out
}

/// Verification-side key material for a log.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum LogPublicKey {
    /// Symmetric MAC key of the test signer. Verification recomputes the
    /// tag, so holders of this "public" key can forge; test use only.
    TestMac {
        #[serde(with = "hex::serde")]
        key: [u8; 32],
    },
    /// Ed25519 verifying key.
    Ed25519 {
        #[serde(with = "hex::serde")]
        key: [u8; 32],
    },
}

impl LogPublicKey {
    pub fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        match self {
            LogPublicKey::TestMac { key } => {
                let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key size");
                mac.update(message);
                signature.len() == HASH_SIZE && mac.verify_slice(signature).is_ok()
            }
            LogPublicKey::Ed25519 { key } => {
                let Ok(vk) = VerifyingKey::from_bytes(key) else {
                    return false;
                };
                let Ok(sig) = Signature::from_slice(signature) else {
                    return false;
                };
                vk.verify(message, &sig).is_ok()
            }
        }
    }
}

/// Signing side of a log key pair.
pub trait SthSigner: Send + Sync {
    fn sign(&self, message: &[u8]) -> Vec<u8>;
    fn public_key(&self) -> LogPublicKey;
}

/// Deterministic HMAC-SHA256 signer for reproducible fixtures.
#[derive(Clone)]
pub struct TestSigner {
    key: [u8; 32],
}

impl TestSigner {
    pub fn new(key: [u8; 32]) -> Self {
        Self { key }
    }

    /// Key derived from a label, for fixtures that only care about
    /// distinctness between logs.
    pub fn from_label(label: &str) -> Self {
        use sha2::Digest as _;
        let mut h = Sha256::new();
        h.update(b"test-signer:");
        h.update(label.as_bytes());
        Self { key: h.finalize().into() }
    }
}

impl SthSigner for TestSigner {
    fn sign(&self, message: &[u8]) -> Vec<u8> {
        let mut mac = HmacSha256::new_from_slice(&self.key).expect("hmac accepts any key size");
        mac.update(message);
        mac.finalize().into_bytes().to_vec()
    }

    fn public_key(&self) -> LogPublicKey {
        LogPublicKey::TestMac { key: self.key }
    }
}

/// Ed25519 signer.
pub struct Ed25519Signer {
    keypair: SigningKey,
}

impl Ed25519Signer {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self { keypair: SigningKey::from_bytes(&seed) }
    }
}

impl SthSigner for Ed25519Signer {
    fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.keypair.sign(message).to_bytes().to_vec()
    }

    fn public_key(&self) -> LogPublicKey {
        LogPublicKey::Ed25519 { key: self.keypair.verifying_key().to_bytes() }
    }
}

/// Serializable signer material, used by log state files so a served log
/// can be reconstructed from disk.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum SignerSpec {
    TestMac {
        #[serde(with = "hex::serde")]
        key: [u8; 32],
    },
    Ed25519 {
        #[serde(with = "hex::serde")]
        seed: [u8; 32],
    },
}

impl SignerSpec {
    pub fn build(&self) -> Box<dyn SthSigner> {
        match self {
            SignerSpec::TestMac { key } => Box::new(TestSigner::new(*key)),
            SignerSpec::Ed25519 { seed } => Box::new(Ed25519Signer::from_seed(*seed)),
        }
    }
}
