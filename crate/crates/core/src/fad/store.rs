use std::collections::BTreeMap;
use std::path::Path;

use super::stats::ByteReader;
use super::Embedding;
use crate::error::{Error, Result};

const EMBEDDINGS_MAGIC: &[u8; 8] = b"FADEMB01";

/// Encodes embeddings in the `FADEMB01` format. Values are stored as f32.
pub fn encode_embeddings(embeddings: &[Embedding], dimension: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + embeddings.len() * (16 + 4 * dimension));
    out.extend_from_slice(EMBEDDINGS_MAGIC);
    out.extend_from_slice(&u32::try_from(dimension).map_err(|_| Error::Argument("dimension too large".into()))?.to_le_bytes());
    out.extend_from_slice(
        &u32::try_from(embeddings.len())
            .map_err(|_| Error::Argument("too many embeddings".into()))?
            .to_le_bytes(),
    );
    for e in embeddings {
        if e.values.len() != dimension {
            return Err(Error::Argument(format!(
                "embedding for {} has dimension {}, expected {dimension}",
                e.clip_id,
                e.values.len()
            )));
        }
        let id = e.clip_id.as_bytes();
        let len = u16::try_from(id.len()).map_err(|_| Error::Argument(format!("clip id too long: {}", e.clip_id)))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&e.window_start.to_le_bytes());
        for &v in &e.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes a `FADEMB01` buffer; any truncation or trailing data is an error.
pub fn decode_embeddings(bytes: &[u8]) -> Result<(usize, Vec<Embedding>)> {
    let mut r = ByteReader::new(bytes, "embeddings");
    if r.take(8)? != EMBEDDINGS_MAGIC {
        return Err(Error::Format("embeddings file: bad magic".into()));
    }
    let d = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let clip_id = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("embeddings file: clip id is not UTF-8".into()))?
            .to_string();
        let window_start = r.f64()?;
        let values = (0..d).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
        out.push(Embedding {
            values,
            clip_id,
            window_start,
        });
    }
    r.finish()?;
    Ok((d, out))
}

pub fn save_embeddings(path: impl AsRef<Path>, embeddings: &[Embedding], dimension: usize) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_embeddings(embeddings, dimension)?).map_err(|e| Error::io(path, e))
}

/// Precomputed embeddings keyed by `(clip_id, window_start)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    entries: BTreeMap<(String, u64), Embedding>,
}

fn key(clip_id: &str, window_start: f64) -> (String, u64) {
    // Normalize -0.0 so both zeros share a key.
    (clip_id.to_string(), (window_start + 0.0).to_bits())
}

impl EmbeddingStore {
    pub fn new(dimension: usize, embeddings: Vec<Embedding>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for e in embeddings {
            if e.values.len() != dimension {
                return Err(Error::Format(format!(
                    "embedding for {} has dimension {}, header says {dimension}",
                    e.clip_id,
                    e.values.len()
                )));
            }
            entries.insert(key(&e.clip_id, e.window_start), e);
        }
        Ok(Self { dimension, entries })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (d, embeddings) = decode_embeddings(bytes)?;
        Self::new(d, embeddings)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, clip_id: &str, window_start: f64) -> Result<&Embedding> {
        self.entries
            .get(&key(clip_id, window_start))
            .ok_or_else(|| Error::Lookup(format!("no embedding for {clip_id} @ {window_start} s")))
    }

    /// All embeddings of one clip in window order.
    pub fn clip(&self, clip_id: &str) -> Vec<&Embedding> {
        let mut v: Vec<&Embedding> = self.entries.values().filter(|e| e.clip_id == clip_id).collect();
        v.sort_by(|a, b| a.window_start.total_cmp(&b.window_start));
        v
    }

    /// Every embedding, ordered by clip id then window start.
    pub fn embeddings(&self) -> Vec<Embedding> {
        let mut v: Vec<Embedding> = self.entries.values().cloned().collect();
        super::embedding::sort_embeddings(&mut v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_embeddings(n: usize, d: usize, seed: u64) -> Vec<Embedding> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| Embedding {
                values: (0..d).map(|_| f64::from(rng.random::<f32>() * 10.0 - 5.0)).collect(),
                clip_id: format!("clip_{}", i / 4),
                window_start: (i % 4) as f64 * 0.5,
            })
            .collect()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let e = random_embeddings(100, 128, 1);
        let bytes = encode_embeddings(&e, 128).unwrap();
        let (d, back) = decode_embeddings(&bytes).unwrap();
        assert_eq!(d, 128);
        assert_eq!(back, e);
        let store = EmbeddingStore::from_bytes(&bytes).unwrap();
        assert_eq!(store.len(), 100);
        assert_eq!(store.get("clip_3", 0.5).unwrap(), &e[13]);
        assert!(matches!(store.get("clip_3", 0.25), Err(Error::Lookup(_))));
        assert!(matches!(store.get("nope", 0.0), Err(Error::Lookup(_))));
        assert_eq!(store.clip("clip_0").len(), 4);
    }

    #[test]
    fn truncation_is_a_format_error() {
        let bytes = encode_embeddings(&random_embeddings(10, 8, 2), 8).unwrap();
        for cut in [0, 5, 12, 15, 30, bytes.len() - 1] {
            assert!(matches!(decode_embeddings(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_embeddings(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn empty_and_mismatched() {
        let bytes = encode_embeddings(&[], 128).unwrap();
        assert_eq!(bytes.len(), 16);
        let store = EmbeddingStore::from_bytes(&bytes).unwrap();
        assert!(store.is_empty());
        assert_eq!(store.dimension(), 128);
        assert!(encode_embeddings(&random_embeddings(2, 8, 3), 9).is_err());
        assert!(matches!(
            EmbeddingStore::new(9, random_embeddings(2, 8, 3)),
            Err(Error::Format(_))
        ));
    }
}
