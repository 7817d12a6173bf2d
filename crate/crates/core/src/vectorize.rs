//! Sparse vectorization of feature bags.
//!
//! Two interchangeable encoders over the same `family ":" token` key space:
//! [`hash_vectorize`] maps keys through 64-bit FNV-1a into `2^bits` buckets
//! and needs no fitted state, while [`Vocabulary`]/[`dict_vectorize`] keep an
//! explicit first-seen index map and serve as the collision-free reference.
//! Values are binary presence indicators; repeated tokens clip to 1.

use crate::features::{Family, FeatureBag};
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// Inclusive range of admissible hash widths.
pub const MIN_BITS: u32 = 8;
pub const MAX_BITS: u32 = 30;
/// Default hash width: 2^22 buckets keeps a full model comfortably small.
pub const DEFAULT_BITS: u32 = 22;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum VectorizeError {
    #[error("hash bits {0} outside [{MIN_BITS},{MAX_BITS}]")]
    BitsOutOfRange(u32),
    #[error("bad vocabulary line {line}: {reason}")]
    BadVocabularyLine { line: u64, reason: String },
    #[error("io error: {0}")]
    Io(String),
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a. Fixed bit-exactly so indices are reproducible across
/// platforms and runs.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// The byte string a `(family, token)` pair hashes under: `family ":" token`.
pub fn feature_key(family: Family, token: &str) -> String {
    format!("{}:{}", family.as_str(), token)
}

/// A sparse vector over a fixed-dimension feature space. Entries are sorted
/// by strictly increasing index and never hold zero values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: u32,
    entries: Vec<(u32, f32)>,
}

impl SparseVector {
    /// Build from unsorted, possibly duplicated indices; duplicate indices
    /// accumulate and zero values are dropped.
    pub fn from_indices(dim: u32, mut indices: Vec<(u32, f32)>) -> Self {
        indices.retain(|&(i, v)| {
            debug_assert!(i < dim, "index {i} out of range for dim {dim}");
            v != 0.0
        });
        indices.sort_unstable_by_key(|&(i, _)| i);
        let mut entries: Vec<(u32, f32)> = Vec::with_capacity(indices.len());
        for (i, v) in indices {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        SparseVector { dim, entries }
    }

    pub fn zeros(dim: u32) -> Self {
        SparseVector {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(u32, f32)] {
        &self.entries
    }

    /// Clip every stored value to 1 (binary presence).
    fn clip_binary(mut self) -> Self {
        for entry in &mut self.entries {
            entry.1 = 1.0;
        }
        self
    }

    /// Copy with one extra trailing dimension holding a constant 1, used as
    /// an intercept column.
    pub fn with_intercept(&self) -> SparseVector {
        let mut entries = self.entries.clone();
        entries.push((self.dim, 1.0));
        SparseVector {
            dim: self.dim + 1,
            entries,
        }
    }

    /// Dot product against a dense weight slice of length `dim`.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        debug_assert_eq!(weights.len(), self.dim as usize);
        self.entries
            .iter()
            .map(|&(i, v)| weights[i as usize] * f64::from(v))
            .sum()
    }
}

/// Hash a bag into `2^bits` buckets: index = FNV1a64(family ":" token)
/// mod 2^bits, values clipped to binary presence.
pub fn hash_vectorize(bag: &FeatureBag, bits: u32) -> Result<SparseVector, VectorizeError> {
    if !(MIN_BITS..=MAX_BITS).contains(&bits) {
        return Err(VectorizeError::BitsOutOfRange(bits));
    }
    let dim = 1u32 << bits;
    let mask = u64::from(dim) - 1;
    let indices = bag
        .iter()
        .map(|(family, token)| {
            let index = fnv1a64(feature_key(family, token).as_bytes()) & mask;
            (index as u32, 1.0)
        })
        .collect();
    Ok(SparseVector::from_indices(dim, indices).clip_binary())
}

/// Explicit token-to-index map; indices form the contiguous range [0, dim).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    token_to_index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn dim(&self) -> u32 {
        self.token_to_index.len() as u32
    }

    pub fn index_of(&self, family: Family, token: &str) -> Option<u32> {
        self.token_to_index.get(&feature_key(family, token)).copied()
    }

    /// Entries sorted by index, for persistence and deterministic iteration.
    pub fn sorted_entries(&self) -> Vec<(&str, u32)> {
        let mut entries: Vec<(&str, u32)> = self
            .token_to_index
            .iter()
            .map(|(k, &v)| (k.as_str(), v))
            .collect();
        entries.sort_unstable_by_key(|&(_, index)| index);
        entries
    }

    /// Write as `token<TAB>index` lines.
    pub fn save<W: Write>(&self, mut writer: W) -> Result<(), VectorizeError> {
        for (token, index) in self.sorted_entries() {
            writeln!(writer, "{token}\t{index}").map_err(|e| VectorizeError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, VectorizeError> {
        let mut token_to_index = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| VectorizeError::Io(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| VectorizeError::BadVocabularyLine {
                line: lineno as u64 + 1,
                reason: reason.to_string(),
            };
            let (token, index) = line.rsplit_once('\t').ok_or_else(|| bad("no tab"))?;
            let index: u32 = index.parse().map_err(|_| bad("bad index"))?;
            if token_to_index.insert(token.to_string(), index).is_some() {
                return Err(bad("duplicate token"));
            }
        }
        Ok(Vocabulary { token_to_index })
    }
}

/// Assign one index per distinct `(family, token)` in first-seen order.
pub fn dict_fit<'a, I>(bags: I) -> Vocabulary
where
    I: IntoIterator<Item = &'a FeatureBag>,
{
    let mut vocab = Vocabulary::default();
    for bag in bags {
        for (family, token) in bag.iter() {
            let key = feature_key(family, token);
            let next = vocab.token_to_index.len() as u32;
            vocab.token_to_index.entry(key).or_insert(next);
        }
    }
    vocab
}

/// Encode a bag against a fitted vocabulary; unknown tokens are dropped,
/// values are binary presence.
pub fn dict_vectorize(bag: &FeatureBag, vocab: &Vocabulary) -> SparseVector {
    let indices = bag
        .iter()
        .filter_map(|(family, token)| vocab.index_of(family, token).map(|i| (i, 1.0)))
        .collect();
    SparseVector::from_indices(vocab.dim(), indices).clip_binary()
}
