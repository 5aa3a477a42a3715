//! Store directory layout:
//!
//! ```text
//! manifest.json    corpus manifest (image order = row order)
//! vocab.txt        one term per line, in vector order
//! features.bin     binary block, little-endian:
//!                    magic "SRFB", version u32,
//!                    config_len u32, config JSON (config_len bytes),
//!                    n_images u32, bins_per_channel u32, dim u32, vocab_len u32, n_docs u32,
//!                    histograms  n_images × bins³ f64,
//!                    features    n_images × dim f64,
//!                    doc_freqs   vocab_len u32
//! embeddings.tsv   optional sidecar
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{load_manifest, save_manifest, CorpusManifest};
use crate::corpus::{Corpus, FeatureConfig};
use crate::error::{Error, Result};
use crate::features::{extract_color_histogram, load_embeddings, ColorHistogram, Embeddings, FeatureVector, Raster, TfIdfModel};
use crate::scent::ScentConfig;

pub const STORE_FORMAT_VERSION: u32 = 1;
pub const FEATURES_MAGIC: &[u8; 4] = b"SRFB";

const MANIFEST_FILE: &str = "manifest.json";
const FEATURES_FILE: &str = "features.bin";
const VOCAB_FILE: &str = "vocab.txt";
const EMBEDDINGS_FILE: &str = "embeddings.tsv";

/// Everything needed to regenerate a store from its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub features: FeatureConfig,
    pub scent: ScentConfig,
    pub seed: u64,
    /// Directory that relative image uris resolve against.
    pub image_root: PathBuf,
}

impl StoreConfig {
    pub fn new(image_root: impl Into<PathBuf>) -> Self {
        StoreConfig {
            features: FeatureConfig::default(),
            scent: ScentConfig::default(),
            seed: 0,
            image_root: image_root.into(),
        }
    }
}

/// A corpus with its features precomputed, as persisted on disk.
#[derive(Debug, Clone)]
pub struct Store {
    corpus: Corpus,
    config: StoreConfig,
    warnings: Vec<String>,
}

impl Store {
    /// Decodes every image, extracts histograms and builds the corpus.
    pub fn build(manifest: CorpusManifest, config: StoreConfig) -> Result<Self> {
        config.scent.validate()?;
        let histograms = manifest
            .images
            .iter()
            .map(|img| {
                let raster = Raster::open(&resolve(&config.image_root, &img.uri))?;
                extract_color_histogram(&raster, config.features.bins_per_channel)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_histograms(manifest, histograms, config)
    }

    /// Builds from precomputed histograms (same order as the manifest).
    pub fn from_histograms(manifest: CorpusManifest, histograms: Vec<ColorHistogram>, config: StoreConfig) -> Result<Self> {
        let corpus = Corpus::build(manifest.corpus, manifest.images, histograms, config.features)?;
        Ok(Store { corpus, config, warnings: Vec::new() })
    }

    /// Attaches embeddings; ids not in the corpus produce warnings.
    pub fn with_embeddings(mut self, embeddings: Embeddings) -> Self {
        let known: BTreeSet<&str> = self.corpus.ids().collect();
        self.warnings
            .extend(embeddings.ids().filter(|id| !known.contains(id)).map(|id| format!("embedding for unknown image id {id}")));
        self.corpus = self.corpus.with_embeddings(embeddings);
        self
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest { corpus: self.corpus.name().to_string(), images: self.corpus.images().to_vec() }
    }

    /// Filesystem location of an image's bytes.
    pub fn image_path(&self, id: &str) -> Option<PathBuf> {
        self.corpus.image(id).map(|img| resolve(&self.config.image_root, &img.uri))
    }
}

fn resolve(root: &Path, uri: &str) -> PathBuf {
    let uri = uri.strip_prefix("file://").unwrap_or(uri);
    let p = Path::new(uri);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

fn to_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("{what} {n} exceeds the store format limit")))
}

fn encode_features(store: &Store) -> Result<Vec<u8>> {
    let corpus = &store.corpus;
    let config = serde_json::to_vec(&store.config)?;
    let b = store.config.features.bins_per_channel;
    let dim = FeatureVector::dim_for(b, store.config.features.top_k_terms);
    let tfidf = corpus.tfidf();
    let mut out = Vec::new();
    out.extend_from_slice(FEATURES_MAGIC);
    let w = &mut out;
    w.write_u32::<LittleEndian>(STORE_FORMAT_VERSION).unwrap();
    w.write_u32::<LittleEndian>(to_u32(config.len(), "config length")?).unwrap();
    w.extend_from_slice(&config);
    for n in [corpus.len(), b, dim, tfidf.vocabulary().len(), tfidf.n_docs() as usize] {
        w.write_u32::<LittleEndian>(to_u32(n, "header field")?).unwrap();
    }
    for h in corpus.histograms() {
        for v in h.bins() {
            w.write_f64::<LittleEndian>(*v).unwrap();
        }
    }
    for f in corpus.features() {
        for v in f.values() {
            w.write_f64::<LittleEndian>(*v).unwrap();
        }
    }
    for df in tfidf.doc_freqs() {
        w.write_u32::<LittleEndian>(*df).unwrap();
    }
    Ok(out)
}

struct Decoded {
    config: StoreConfig,
    n_images: usize,
    histograms: Vec<ColorHistogram>,
    features: Vec<FeatureVector>,
    doc_freqs: Vec<u32>,
    n_docs: u32,
}

fn decode_features(bytes: &[u8]) -> Result<Decoded> {
    let truncated = |_| Error::Format("features.bin is truncated".into());
    let mut r = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != FEATURES_MAGIC {
        return Err(Error::Format("features.bin has the wrong magic bytes".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
    if version != STORE_FORMAT_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: STORE_FORMAT_VERSION });
    }
    let config_len = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let mut config = vec![0u8; config_len.min(bytes.len())];
    r.read_exact(&mut config).map_err(truncated)?;
    let config: StoreConfig = serde_json::from_slice(&config)?;
    let mut header = [0usize; 5];
    for h in &mut header {
        *h = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    }
    let [n_images, bins, dim, vocab_len, n_docs] = header;
    if bins != config.features.bins_per_channel {
        return Err(Error::Format(format!("features.bin header says {bins} bins, config says {}", config.features.bins_per_channel)));
    }
    let remaining = bytes.len() as u64 - r.position();
    let needed = 8 * (n_images as u64) * ((bins as u64).pow(3) + dim as u64) + 4 * vocab_len as u64;
    if remaining != needed {
        return Err(Error::Format(format!("features.bin body is {remaining} bytes, header implies {needed}")));
    }
    let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
        (0..n).map(|_| r.read_f64::<LittleEndian>().map_err(truncated)).collect()
    };
    let histograms = (0..n_images)
        .map(|_| ColorHistogram::from_bins(bins, read_f64s(bins.pow(3))?))
        .collect::<Result<Vec<_>>>()?;
    let features = (0..n_images).map(|_| read_f64s(dim).map(FeatureVector)).collect::<Result<Vec<_>>>()?;
    let doc_freqs = (0..vocab_len).map(|_| r.read_u32::<LittleEndian>().map_err(truncated)).collect::<Result<Vec<_>>>()?;
    Ok(Decoded { config, n_images, histograms, features, doc_freqs, n_docs: n_docs as u32 })
}

pub fn save_store(store: &Store, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_manifest(&store.manifest(), &dir.join(MANIFEST_FILE))?;
    let vocab: String = store.corpus.tfidf().vocabulary().iter().map(|t| format!("{t}\n")).collect();
    let vocab_path = dir.join(VOCAB_FILE);
    fs::write(&vocab_path, vocab).map_err(|e| Error::io(&vocab_path, e))?;
    let features_path = dir.join(FEATURES_FILE);
    fs::write(&features_path, encode_features(store)?).map_err(|e| Error::io(&features_path, e))?;
    let emb_path = dir.join(EMBEDDINGS_FILE);
    match store.corpus.embeddings() {
        Some(emb) => emb.save(&emb_path)?,
        None if emb_path.exists() => fs::remove_file(&emb_path).map_err(|e| Error::io(&emb_path, e))?,
        None => {}
    }
    Ok(())
}

pub fn load_store(dir: &Path) -> Result<Store> {
    if !dir.is_dir() {
        return Err(Error::NotFound { kind: "store", id: dir.display().to_string() });
    }
    let features_path = dir.join(FEATURES_FILE);
    let bytes = fs::read(&features_path).map_err(|e| Error::io(&features_path, e))?;
    let decoded = decode_features(&bytes)?;
    let manifest = load_manifest(&dir.join(MANIFEST_FILE))?;
    if manifest.len() != decoded.n_images {
        return Err(Error::Format(format!(
            "manifest has {} images, features.bin has {}",
            manifest.len(),
            decoded.n_images
        )));
    }
    let vocab_path = dir.join(VOCAB_FILE);
    let vocab: Vec<String> = fs::read_to_string(&vocab_path)
        .map_err(|e| Error::io(&vocab_path, e))?
        .lines()
        .map(str::to_string)
        .collect();
    if vocab.len() != decoded.doc_freqs.len() {
        return Err(Error::Format(format!(
            "vocab.txt has {} terms, features.bin has {} document frequencies",
            vocab.len(),
            decoded.doc_freqs.len()
        )));
    }
    let tfidf = TfIdfModel::from_parts(vocab, decoded.doc_freqs, decoded.n_docs)?;
    let corpus = Corpus::from_parts(
        manifest.corpus,
        manifest.images,
        decoded.histograms,
        tfidf,
        decoded.features,
        decoded.config.features,
    )?;
    let mut store = Store { corpus, config: decoded.config, warnings: Vec::new() };
    let emb_path = dir.join(EMBEDDINGS_FILE);
    if emb_path.is_file() {
        let (emb, warnings) = load_embeddings(&emb_path, None)?;
        store = store.with_embeddings(emb);
        store.warnings.extend(warnings);
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ImageDoc;
    use crate::features::extract_color_histogram;
    use std::collections::BTreeMap;

    fn sample() -> Store {
        let images: Vec<ImageDoc> = (0..4)
            .map(|i| {
                let mut d = ImageDoc::new(format!("i{i}"), 10 + i, 8);
                d.title = if i % 2 == 0 { "red pasta sauce".into() } else { "green zoodles".into() };
                d
            })
            .collect();
        let hists = (0..4u8)
            .map(|i| extract_color_histogram(&Raster::filled(2, 2, [i * 60, 255 - i * 60, 7]), 4).unwrap())
            .collect();
        let manifest = CorpusManifest { corpus: "t".into(), images };
        Store::from_histograms(manifest, hists, StoreConfig::new("/nowhere")).unwrap()
    }

    #[test]
    fn round_trip_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample();
        save_store(&s, dir.path()).unwrap();
        let bytes = fs::read(dir.path().join(FEATURES_FILE)).unwrap();
        let back = load_store(dir.path()).unwrap();
        assert_eq!(back.corpus().features(), s.corpus().features());
        assert_eq!(back.corpus().tfidf(), s.corpus().tfidf());
        assert_eq!(back.manifest(), s.manifest());
        assert_eq!(back.config(), s.config());
        assert!(back.corpus().embeddings().is_none());
        save_store(&back, dir.path()).unwrap();
        assert_eq!(fs::read(dir.path().join(FEATURES_FILE)).unwrap(), bytes);
    }

    #[test]
    fn embeddings_reattached() {
        let dir = tempfile::tempdir().unwrap();
        let vectors: BTreeMap<String, Vec<f64>> = (0..4).map(|i| (format!("i{i}"), vec![i as f64, 1.0])).collect();
        let s = sample().with_embeddings(Embeddings::new(vectors).unwrap());
        save_store(&s, dir.path()).unwrap();
        let back = load_store(dir.path()).unwrap();
        assert_eq!(back.corpus().embeddings(), s.corpus().embeddings());
        save_store(&sample(), dir.path()).unwrap();
        assert!(load_store(dir.path()).unwrap().corpus().embeddings().is_none());
    }

    #[test]
    fn missing_and_future_versions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_store(&dir.path().join("absent")), Err(Error::NotFound { .. })));
        save_store(&sample(), dir.path()).unwrap();
        let path = dir.path().join(FEATURES_FILE);
        let mut bytes = fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        match load_store(dir.path()) {
            Err(Error::VersionMismatch { found: 2, expected: 1 }) => {}
            other => panic!("{other:?}"),
        }
        bytes[4..8].copy_from_slice(&1u32.to_le_bytes());
        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_store(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn tampered_features_detected() {
        let dir = tempfile::tempdir().unwrap();
        save_store(&sample(), dir.path()).unwrap();
        let path = dir.path().join(FEATURES_FILE);
        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        // last f64 of the feature block sits just before the doc freqs
        let vocab = sample().corpus().tfidf().vocabulary().len();
        let at = n - 4 * vocab - 8;
        bytes[at..at + 8].copy_from_slice(&123.0f64.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_store(dir.path()), Err(Error::Format(_))));
    }
}
