//! Sentence embeddings: the provider contract, the structural embedder used for
//! self-contained experiments, the BLME binary container, and assembly of embedded datasets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{BlmInstance, ErrorLabel, PatternKey, Sentence};

pub const DIM: usize = 768;
pub const GRID_ROWS: usize = 32;
pub const GRID_COLS: usize = 24;

/// One sentence vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(values: Vec<f32>) -> Result<EmbeddingMatrix> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Embedding(format!("value {i} is not finite")));
        }
        Ok(EmbeddingMatrix { values })
    }

    pub fn flat(&self) -> &[f32] {
        &self.values
    }

    pub fn into_flat(self) -> Vec<f32> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Row-major 32×24 view: `grid[[i, j]] == flat[24 * i + j]`.
    pub fn grid(&self) -> Result<ArrayView2<'_, f32>> {
        if self.values.len() != DIM {
            return Err(Error::Embedding(format!(
                "the 32x24 grid needs {DIM} values, this embedding has {}",
                self.values.len()
            )));
        }
        Ok(ArrayView2::from_shape((GRID_ROWS, GRID_COLS), &self.values).expect("shape checked"))
    }

    pub fn from_grid(grid: ArrayView2<'_, f32>) -> Result<EmbeddingMatrix> {
        if grid.dim() != (GRID_ROWS, GRID_COLS) {
            return Err(Error::Embedding(format!(
                "grid shape {:?}, expected (32, 24)",
                grid.dim()
            )));
        }
        EmbeddingMatrix::new(grid.iter().copied().collect())
    }
}

pub trait EmbeddingProvider: Sync {
    /// Stable name recorded with every embedded dataset.
    fn identity(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, sentence: &Sentence) -> Result<EmbeddingMatrix>;
}

fn hash_rng(parts: &[&[u8]]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, sd: f32) -> impl Iterator<Item = f32> + '_ {
    let d = Normal::new(0.0f32, sd).expect("positive sd");
    (0..n).map(move |_| d.sample(rng))
}

/// Deterministic stand-in for a pretrained sentence encoder.
///
/// The first block is a seeded random vector of the sentence's pattern key, so sentences
/// sharing a pattern share that block exactly. Each chunk adds a hashed vector of its lemma
/// and features to one of four lexical blocks (chunk `i` goes to block `i % 4`), and small
/// seeded noise covers the lexical region.
#[derive(Debug, Clone)]
pub struct StructuralEmbedder {
    pub seed: u64,
    pub noise: f32,
}

impl StructuralEmbedder {
    pub const PATTERN_DIMS: usize = 256;
    pub const LEXICAL_BLOCK: usize = 128;

    pub fn new(seed: u64) -> StructuralEmbedder {
        StructuralEmbedder { seed, noise: 0.01 }
    }

    pub fn pattern_block(&self, key: &PatternKey) -> Vec<f32> {
        let sd = (2.0 / Self::PATTERN_DIMS as f32).sqrt();
        let mut rng = hash_rng(&[b"pattern", &self.seed.to_le_bytes(), key.as_str().as_bytes()]);
        gaussian(&mut rng, Self::PATTERN_DIMS, sd).collect()
    }
}

impl EmbeddingProvider for StructuralEmbedder {
    fn identity(&self) -> String {
        format!("structural-v1:seed={}:noise={}", self.seed, self.noise)
    }

    fn dim(&self) -> usize {
        DIM
    }

    fn embed(&self, sentence: &Sentence) -> Result<EmbeddingMatrix> {
        if sentence.chunks.is_empty() {
            return Err(Error::Embedding(format!(
                "sentence {} carries no chunk annotations",
                sentence.id
            )));
        }
        let mut v = vec![0f32; DIM];
        v[..Self::PATTERN_DIMS].copy_from_slice(&self.pattern_block(&sentence.pattern));
        let sd = (0.5 / Self::LEXICAL_BLOCK as f32).sqrt();
        let seed = self.seed.to_le_bytes();
        for (i, c) in sentence.chunks.iter().enumerate() {
            let word = c.lemma.clone().unwrap_or_else(|| c.span.to_lowercase());
            let features: Vec<String> = c
                .spec
                .features
                .iter()
                .map(|(a, v)| format!("{}={}", a.as_str(), v.as_str()))
                .collect();
            let mut rng = hash_rng(&[b"lexical", &seed, word.as_bytes(), features.join(",").as_bytes()]);
            let start = Self::PATTERN_DIMS + (i % 4) * Self::LEXICAL_BLOCK;
            for (slot, x) in
                v[start..start + Self::LEXICAL_BLOCK]
                    .iter_mut()
                    .zip(gaussian(&mut rng, Self::LEXICAL_BLOCK, sd))
            {
                *slot += x;
            }
        }
        if self.noise > 0.0 {
            let mut rng = hash_rng(&[
                b"noise",
                &seed,
                sentence.text.as_bytes(),
                sentence.pattern.as_str().as_bytes(),
            ]);
            for (slot, x) in
                v[Self::PATTERN_DIMS..]
                    .iter_mut()
                    .zip(gaussian(&mut rng, DIM - Self::PATTERN_DIMS, self.noise))
            {
                *slot += x;
            }
        }
        EmbeddingMatrix::new(v)
    }
}

/// Embeddings keyed by sentence id, all from one provider.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub provider: String,
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f32>>,
}

pub const PROVENANCE_PREFIX: &str = "#provenance:";

impl EmbeddingStore {
    pub fn new(provider: impl Into<String>, dim: usize) -> EmbeddingStore {
        EmbeddingStore {
            provider: provider.into(),
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn insert(&mut self, id: impl Into<String>, v: Vec<f32>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Embedding(format!(
                "vector of dim {} in a store of dim {}",
                v.len(),
                self.dim
            )));
        }
        self.vectors.insert(id.into(), v);
        Ok(())
    }

    /// Adds another store's vectors; both must come from the same provider.
    pub fn merge(&mut self, other: EmbeddingStore) -> Result<()> {
        if other.provider != self.provider || other.dim != self.dim {
            return Err(Error::Embedding(format!(
                "cannot mix providers '{}' and '{}' in one embedded dataset",
                self.provider, other.provider
            )));
        }
        self.vectors.extend(other.vectors);
        Ok(())
    }

    pub fn write_blme_to(&self, w: impl Write) -> Result<()> {
        let mut records: Vec<(&str, &[f32])> = Vec::with_capacity(self.vectors.len() + 1);
        let prov = format!("{PROVENANCE_PREFIX}{}", self.provider);
        let zeros = vec![0f32; self.dim];
        records.push((&prov, &zeros));
        records.extend(self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice())));
        write_blme_to(w, self.dim, &records)
    }

    pub fn write_blme(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_blme_to(std::fs::File::create(path)?)
    }

    /// Reads a BLME file; the provider comes from its provenance record, or `unknown`.
    pub fn read_blme_from(r: impl Read) -> Result<EmbeddingStore> {
        let file = read_blme_from(r)?;
        let mut providers = BTreeSet::new();
        let mut store = EmbeddingStore::new(String::new(), file.dim);
        for (id, v) in file.records {
            match id.strip_prefix(PROVENANCE_PREFIX) {
                Some(p) => {
                    providers.insert(p.to_string());
                }
                None => {
                    if store.vectors.insert(id.clone(), v).is_some() {
                        return Err(Error::Format(format!("duplicate record id '{id}'")));
                    }
                }
            }
        }
        if providers.len() > 1 {
            return Err(Error::Embedding(format!(
                "file mixes providers: {}",
                providers.into_iter().collect::<Vec<_>>().join(", ")
            )));
        }
        store.provider = providers.into_iter().next().unwrap_or_else(|| "unknown".into());
        Ok(store)
    }

    pub fn read_blme(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
        Self::read_blme_from(BufReader::new(std::fs::File::open(path)?))
    }
}

pub const BLME_MAGIC: &[u8; 4] = b"BLME";
pub const BLME_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BlmeFile {
    pub dim: usize,
    pub records: Vec<(String, Vec<f32>)>,
}

/// `"BLME" | u16 version | u32 dim | u64 count | count × (u16 id length, id, dim × f32)`,
/// all little-endian.
pub fn write_blme_to(w: impl Write, dim: usize, records: &[(&str, &[f32])]) -> Result<()> {
    let mut w = BufWriter::new(w);
    let dim32 = u32::try_from(dim).map_err(|_| Error::Format("dim does not fit in u32".into()))?;
    w.write_all(BLME_MAGIC)?;
    w.write_all(&BLME_VERSION.to_le_bytes())?;
    w.write_all(&dim32.to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for (id, v) in records {
        if v.len() != dim {
            return Err(Error::Format(format!(
                "record '{id}' has {} values, header says {dim}",
                v.len()
            )));
        }
        let len = u16::try_from(id.len()).map_err(|_| Error::Format(format!("id '{id}' longer than 65535 bytes")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        for x in v.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_blme(path: impl AsRef<Path>, dim: usize, records: &[(&str, &[f32])]) -> Result<()> {
    write_blme_to(std::fs::File::create(path)?, dim, records)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated payload while reading {what}")),
        _ => Error::Io(e),
    })
}

pub fn read_blme_from(r: impl Read) -> Result<BlmeFile> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "the magic")?;
    if &magic != BLME_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut b2 = [0u8; 2];
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    read_exact(&mut r, &mut b2, "the version")?;
    let version = u16::from_le_bytes(b2);
    if version != BLME_VERSION {
        return Err(Error::Format(format!(
            "version {version} is not supported (expected {BLME_VERSION})"
        )));
    }
    read_exact(&mut r, &mut b4, "the dim")?;
    let dim = u32::from_le_bytes(b4) as usize;
    read_exact(&mut r, &mut b8, "the count")?;
    let count = u64::from_le_bytes(b8);
    let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut payload = vec![0u8; dim * 4];
    for k in 0..count {
        read_exact(&mut r, &mut b2, &format!("record {k}"))?;
        let mut id = vec![0u8; u16::from_le_bytes(b2) as usize];
        read_exact(&mut r, &mut id, &format!("record {k}"))?;
        let id = String::from_utf8(id).map_err(|_| Error::Format(format!("record {k}: id is not UTF-8")))?;
        read_exact(&mut r, &mut payload, &format!("record '{id}'"))?;
        let v = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push((id, v));
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format(format!("trailing bytes after {count} records")));
    }
    Ok(BlmeFile { dim, records })
}

pub fn read_blme(path: impl AsRef<Path>) -> Result<BlmeFile> {
    read_blme_from(std::fs::File::open(path)?)
}

/// Embeds every sentence of `sentences` with one provider.
pub fn embed_sentences(provider: &dyn EmbeddingProvider, sentences: &[&Sentence]) -> Result<EmbeddingStore> {
    let vectors = crate::par::try_map(sentences.len(), |i| provider.embed(sentences[i]))?;
    let mut store = EmbeddingStore::new(provider.identity(), provider.dim());
    for (s, v) in sentences.iter().zip(vectors) {
        store.insert(s.id.clone(), v.into_flat())?;
    }
    Ok(store)
}

/// Embeds every context and answer sentence of a dataset.
pub fn embed_dataset(provider: &dyn EmbeddingProvider, instances: &[BlmInstance]) -> Result<EmbeddingStore> {
    embed_sentences(provider, &crate::dataset::all_sentences(instances))
}

/// An instance with its sentences replaced by vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedInstance {
    pub id: String,
    /// 7 × dim.
    pub context: Array2<f32>,
    /// answers × dim.
    pub answers: Array2<f32>,
    pub correct: usize,
    pub labels: Vec<ErrorLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSet {
    pub provider: String,
    pub dim: usize,
    pub items: Vec<EmbeddedInstance>,
}

fn missing_error(missing: &[String]) -> Error {
    let shown: Vec<&str> = missing.iter().take(10).map(String::as_str).collect();
    Error::Embedding(format!(
        "{} sentence ids have no embedding: {}{}",
        missing.len(),
        shown.join(", "),
        if missing.len() > 10 { ", ..." } else { "" }
    ))
}

fn rows(store: &EmbeddingStore, sentences: &[&Sentence], missing: &mut Vec<String>) -> Array2<f32> {
    let mut m = Array2::zeros((sentences.len(), store.dim));
    for (i, s) in sentences.iter().enumerate() {
        match store.get(&s.id) {
            Some(v) => m.row_mut(i).assign(&ndarray::ArrayView1::from(v)),
            None => missing.push(s.id.clone()),
        }
    }
    m
}

impl EmbeddedSet {
    pub fn assemble(instances: &[BlmInstance], store: &EmbeddingStore) -> Result<EmbeddedSet> {
        let mut missing = Vec::new();
        let items = instances
            .iter()
            .map(|inst| EmbeddedInstance {
                id: inst.id.clone(),
                context: rows(store, &inst.context.iter().collect::<Vec<_>>(), &mut missing),
                answers: rows(
                    store,
                    &inst.answers.iter().map(|a| &a.sentence).collect::<Vec<_>>(),
                    &mut missing,
                ),
                correct: inst.correct_index,
                labels: inst.labels(),
            })
            .collect();
        if !missing.is_empty() {
            return Err(missing_error(&missing));
        }
        Ok(EmbeddedSet {
            provider: store.provider.clone(),
            dim: store.dim,
            items,
        })
    }
}

/// A sentence bank with vectors, for the sentence-level model.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedBank {
    pub provider: String,
    pub ids: Vec<String>,
    pub patterns: Vec<PatternKey>,
    /// sentences × dim.
    pub vectors: Array2<f32>,
}

impl EmbeddedBank {
    pub fn assemble(sentences: &[Sentence], store: &EmbeddingStore) -> Result<EmbeddedBank> {
        let mut missing = Vec::new();
        let vectors = rows(store, &sentences.iter().collect::<Vec<_>>(), &mut missing);
        if !missing.is_empty() {
            return Err(missing_error(&missing));
        }
        Ok(EmbeddedBank {
            provider: store.provider.clone(),
            ids: sentences.iter().map(|s| s.id.clone()).collect(),
            patterns: sentences.iter().map(|s| s.pattern.clone()).collect(),
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> EmbeddedBank {
        EmbeddedBank {
            provider: self.provider.clone(),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            patterns: idx.iter().map(|&i| self.patterns[i].clone()).collect(),
            vectors: self.vectors.select(ndarray::Axis(0), idx),
        }
    }
}
