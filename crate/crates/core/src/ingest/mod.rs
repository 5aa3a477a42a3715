//! Corpus manifests, category-directory import, label derivation and the
//! on-disk store.

mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{ImageDoc, InterestLabel};
use crate::error::{Error, Result};

pub use store::{load_store, save_store, Store, StoreConfig, FEATURES_MAGIC, STORE_FORMAT_VERSION};

/// Art subclasses imported by default from a category directory.
pub const DEFAULT_SUBCLASSES: [&str; 10] = [
    "abstract_painting",
    "cityscape",
    "genre_painting",
    "illustration",
    "landscape",
    "nude_painting",
    "portrait",
    "religious_painting",
    "sketch_and_study",
    "still_life",
];

pub const DEFAULT_INTERESTED: [&str; 4] = ["illustration", "nude_painting", "still_life", "abstract_painting"];

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "bmp", "gif"];

/// Reference per-subclass classification accuracies.
pub fn reference_subclass_accuracy() -> BTreeMap<String, f64> {
    [
        ("illustration", 0.66),
        ("nude_painting", 0.65),
        ("still_life", 0.57),
        ("abstract_painting", 0.54),
        ("landscape", 0.14),
        ("cityscape", 0.28),
        ("religious_painting", 0.32),
        ("sketch_and_study", 0.35),
        ("genre_painting", 0.36),
        ("portrait", 0.37),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub corpus: String,
    pub images: Vec<ImageDoc>,
}

impl CorpusManifest {
    /// Parses and validates manifest JSON, reporting every violation at once.
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Some(obj) = value.as_object() else {
            return Err(Error::Schema(vec!["manifest must be a JSON object".into()]));
        };
        let mut violations = Vec::new();
        let corpus = match obj.get("corpus") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                violations.push("corpus must be a string".to_string());
                String::new()
            }
            None => {
                violations.push("missing field corpus".to_string());
                String::new()
            }
        };
        let raw_images: &[Value] = match obj.get("images") {
            Some(Value::Array(a)) => a,
            Some(_) => {
                violations.push("images must be an array".to_string());
                &[]
            }
            None => {
                violations.push("missing field images".to_string());
                &[]
            }
        };
        let mut images = Vec::with_capacity(raw_images.len());
        for (i, raw) in raw_images.iter().enumerate() {
            match ImageDoc::deserialize(raw) {
                Ok(doc) => images.push(doc),
                Err(e) => {
                    let who = match raw.get("id").and_then(Value::as_str) {
                        Some(id) => format!("image {id}"),
                        None => format!("images[{i}]"),
                    };
                    violations.push(format!("{who}: {e}"));
                }
            }
        }
        let manifest = CorpusManifest { corpus, images };
        violations.extend(manifest.violations());
        if violations.is_empty() {
            Ok(manifest)
        } else {
            Err(Error::Schema(violations))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for img in &self.images {
            if !seen.insert(img.id.as_str()) {
                out.push(format!("duplicate image id {}", img.id));
            }
            out.extend(img.violations());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn load_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound { kind: "manifest", id: path.display().to_string() },
        _ => Error::io(path, e),
    })?;
    CorpusManifest::parse(&text)
}

pub fn save_manifest(manifest: &CorpusManifest, path: &Path) -> Result<()> {
    fs::write(path, manifest.to_json()? + "\n").map_err(|e| Error::io(path, e))
}

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Imports `root/<subclass>/*` image files. Ids are `<subclass>/<file stem>`,
/// uris are relative to `root`, titles come from the file stem. Returns the
/// manifest and warnings for missing subclass directories.
pub fn load_category_dir<S: AsRef<str>>(root: &Path, subclasses: &[S]) -> Result<(CorpusManifest, Vec<String>)> {
    if !root.is_dir() {
        return Err(Error::NotFound { kind: "directory", id: root.display().to_string() });
    }
    let mut warnings = Vec::new();
    let mut images = Vec::new();
    for sub in subclasses {
        let sub = sub.as_ref();
        let dir = root.join(sub);
        if !dir.is_dir() {
            warnings.push(format!("missing subclass directory {}", dir.display()));
            continue;
        }
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(&dir, e)))
            .collect::<Result<Vec<_>>>()?;
        files.retain(|p| p.is_file() && is_image_file(p));
        files.sort();
        for path in files {
            let (width, height) = image::image_dimensions(&path)
                .map_err(|e| Error::Image { path: path.clone(), message: e.to_string() })?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let file = path.file_name().and_then(|s| s.to_str()).unwrap_or_default();
            let mut doc = ImageDoc::new(format!("{sub}/{stem}"), width, height);
            doc.uri = format!("{sub}/{file}");
            doc.title = stem.replace(['_', '-'], " ");
            doc.category = Some(sub.to_string());
            images.push(doc);
        }
    }
    if images.is_empty() {
        return Err(Error::invalid(format!("no images found under {} for the selected subclasses", root.display())));
    }
    let corpus = root.file_name().and_then(|s| s.to_str()).unwrap_or("corpus").to_string();
    let manifest = CorpusManifest { corpus, images };
    let violations = manifest.violations();
    if !violations.is_empty() {
        return Err(Error::Schema(violations));
    }
    Ok((manifest, warnings))
}

/// How the interested-category set is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum InterestRule {
    Categories(BTreeSet<String>),
    /// Categories whose accuracy is at least `threshold`.
    AccuracyThreshold { accuracies: BTreeMap<String, f64>, threshold: f64 },
}

impl Default for InterestRule {
    fn default() -> Self {
        InterestRule::Categories(DEFAULT_INTERESTED.iter().map(|s| s.to_string()).collect())
    }
}

impl InterestRule {
    pub fn interested(&self) -> BTreeSet<String> {
        match self {
            InterestRule::Categories(set) => set.clone(),
            InterestRule::AccuracyThreshold { accuracies, threshold } => {
                accuracies.iter().filter(|(_, a)| **a >= *threshold).map(|(c, _)| c.clone()).collect()
            }
        }
    }
}

/// Labels each categorised image 1 iff its category is interested. Images
/// without a category keep an explicit label; those with neither are errors.
pub fn derive_labels(manifest: &CorpusManifest, rule: &InterestRule) -> Result<CorpusManifest> {
    let interested = rule.interested();
    let unlabeled: Vec<&str> = manifest
        .images
        .iter()
        .filter(|img| img.category.is_none() && img.label.is_none())
        .map(|img| img.id.as_str())
        .collect();
    if !unlabeled.is_empty() {
        return Err(Error::invalid(format!("images with neither category nor label: {}", unlabeled.join(", "))));
    }
    let mut out = manifest.clone();
    for img in &mut out.images {
        if let Some(cat) = &img.category {
            img.label = Some(InterestLabel::from(interested.contains(cat)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{"corpus":"food","images":[
        {"id":"a","uri":"a.png","width":800,"height":600,"title":"Zoodles","description":"","category":"zoodles","label":1,
         "cues":[{"id":"c1","kind":"visual","bbox":[0,0,10,10],"terms":["zoodles"]}]},
        {"id":"b","uri":"b.png","width":10,"height":10,"title":"Bolognese","description":"","cues":[]}]}"#;

    #[test]
    fn parses_valid_manifest() {
        let m = CorpusManifest::parse(TWO).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.images[0].label, Some(InterestLabel::from(true)));
        assert_eq!(CorpusManifest::parse(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn collects_every_violation() {
        let bad = TWO
            .replace(r#""id":"b""#, r#""id":"a""#)
            .replace("[0,0,10,10]", "[795,0,10,10]")
            .replace(r#""label":1"#, r#""label":2"#);
        let Err(Error::Schema(v)) = CorpusManifest::parse(&bad) else { panic!("expected schema error") };
        assert!(v.iter().any(|m| m.contains("image a") && m.contains("label")), "{v:?}");
        let dup = TWO.replace(r#""id":"b""#, r#""id":"a""#).replace("[0,0,10,10]", "[795,0,10,10]");
        let Err(Error::Schema(v)) = CorpusManifest::parse(&dup) else { panic!("expected schema error") };
        assert!(v.iter().any(|m| m.contains("duplicate image id a")), "{v:?}");
        assert!(v.iter().any(|m| m.contains("c1")), "{v:?}");
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn missing_fields_reported() {
        let Err(Error::Schema(v)) = CorpusManifest::parse(r#"{"images":[{"id":"x"}]}"#) else { panic!() };
        assert!(v.iter().any(|m| m.contains("corpus")));
        assert!(v.iter().any(|m| m.starts_with("image x")));
    }

    fn wiki(cat: &str) -> ImageDoc {
        let mut d = ImageDoc::new(format!("{cat}/1"), 4, 4);
        d.category = Some(cat.to_string());
        d
    }

    #[test]
    fn default_rule_labels() {
        let m = CorpusManifest { corpus: "w".into(), images: vec![wiki("illustration"), wiki("landscape")] };
        let l = derive_labels(&m, &InterestRule::default()).unwrap();
        assert_eq!(l.images[0].label, Some(InterestLabel::from(true)));
        assert_eq!(l.images[1].label, Some(InterestLabel::from(false)));
        assert_eq!(derive_labels(&l, &InterestRule::default()).unwrap(), l);
        assert_eq!(l.images[1].category.as_deref(), Some("landscape"));
    }

    #[test]
    fn accuracy_threshold_gives_four_of_ten() {
        let rule = InterestRule::AccuracyThreshold { accuracies: reference_subclass_accuracy(), threshold: 0.5 };
        assert_eq!(rule.interested(), InterestRule::default().interested());
        assert_eq!(reference_subclass_accuracy().len(), DEFAULT_SUBCLASSES.len());
    }

    #[test]
    fn unlabeled_uncategorised_listed() {
        let mut m = CorpusManifest { corpus: "w".into(), images: vec![ImageDoc::new("q", 1, 1), wiki("portrait")] };
        let err = derive_labels(&m, &InterestRule::default()).unwrap_err().to_string();
        assert!(err.contains('q'));
        m.images[0].label = Some(InterestLabel::from(true));
        assert_eq!(derive_labels(&m, &InterestRule::default()).unwrap().images[0].label, Some(InterestLabel::from(true)));
    }
}
