//! Data model for label catalogs, documents, and dataset splits.
//!
//! A [`LabelCatalog`] is an ordered set of labels, each paired with an
//! initial (seed) description and a refined description. Catalog order is
//! significant everywhere downstream: targets are assembled in catalog
//! order, embedding matrices are row-ordered by it, and ties break toward
//! the lowest index.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// A label viewed through its catalog: name plus stable position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub name: String,
    pub index: usize,
}

/// Where a refined description came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptionSource {
    /// Seed definition only (e.g. an encyclopedia lead sentence); the
    /// refined text either is absent or merely mirrors the seed.
    Seed,
    /// Produced by the description-refinement stage.
    Refined,
    /// Curated by hand (datasets that ship with descriptions).
    Manual,
}

/// One catalog row: a label name with its seed and refined descriptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    #[serde(default)]
    pub initial_text: String,
    #[serde(default)]
    pub refined_text: String,
    pub source: DescriptionSource,
}

/// Ordered set of labels with one description record per label.
///
/// Invariants enforced at construction: names are non-empty, trimmed, and
/// unique; entry order is the catalog order and is preserved verbatim by
/// save/load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CatalogFile", into = "CatalogFile")]
pub struct LabelCatalog {
    entries: Vec<CatalogEntry>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

/// Serialized shape: `{"labels": [...]}` with array order = catalog order.
#[derive(Serialize, Deserialize)]
struct CatalogFile {
    labels: Vec<CatalogEntry>,
}

impl From<LabelCatalog> for CatalogFile {
    fn from(c: LabelCatalog) -> Self {
        CatalogFile { labels: c.entries }
    }
}

impl TryFrom<CatalogFile> for LabelCatalog {
    type Error = CatalogError;
    fn try_from(f: CatalogFile) -> Result<Self, CatalogError> {
        LabelCatalog::new(f.labels)
    }
}

impl LabelCatalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self, CatalogError> {
        let mut index = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            let name = e.name.trim();
            if name.is_empty() {
                return Err(CatalogError::EmptyLabelName { index: i });
            }
            if name != e.name {
                return Err(CatalogError::UntrimmedLabelName {
                    name: e.name.clone(),
                });
            }
            if index.insert(e.name.clone(), i).is_some() {
                return Err(CatalogError::DuplicateLabel {
                    name: e.name.clone(),
                });
            }
        }
        Ok(Self { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &CatalogEntry {
        &self.entries[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn label(&self, index: usize) -> Label {
        Label {
            name: self.entries[index].name.clone(),
            index,
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.entries.iter().enumerate().map(|(index, e)| Label {
            name: e.name.clone(),
            index,
        })
    }

    /// Replace the description fields of one entry, preserving order.
    pub fn with_refinement(
        mut self,
        index: usize,
        refined_text: String,
        source: DescriptionSource,
    ) -> Self {
        self.entries[index].refined_text = refined_text;
        self.entries[index].source = source;
        self
    }

    /// True when every label has a non-empty refined description, which is
    /// required before the catalog can drive training or matching.
    pub fn ready_for_training(&self) -> bool {
        !self.is_empty()
            && self
                .entries
                .iter()
                .all(|e| !e.refined_text.trim().is_empty())
    }

    /// Order-sensitive fingerprint of names and refined descriptions.
    /// Binds derived artifacts (e.g. embedding matrices) to the catalog
    /// version they were computed from.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        for e in &self.entries {
            h.write(e.name.as_bytes());
            h.write(&[0xff]);
            h.write(e.refined_text.as_bytes());
            h.write(&[0xfe]);
        }
        h.finish()
    }
}

/// FNV-1a, 64-bit. Used for catalog fingerprints and vocabulary ids.
pub(crate) struct Fnv64(u64);

impl Fnv64 {
    pub(crate) fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }
    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01B3);
        }
    }
    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
    pub(crate) fn hash_str(s: &str) -> u64 {
        let mut h = Self::new();
        h.write(s.as_bytes());
        h.finish()
    }
}

/// One classification instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// Gold label names. Treated as a set; file order is preserved for
    /// round-tripping but carries no meaning.
    #[serde(default)]
    pub gold_labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Dev,
    Test,
    Other,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
            SplitName::Other => "other",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub documents: Vec<Document>,
}

impl DatasetSplit {
    pub fn new(name: SplitName, documents: Vec<Document>) -> Self {
        Self { name, documents }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

/// Corpus-level statistics over a train/dev/test triple and its catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub n_labels: usize,
    pub max_labels_per_sample: usize,
    /// Mean whitespace-token count of refined descriptions.
    pub avg_desc_length: f64,
}

/// Count of whitespace-delimited tokens.
pub fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Compute [`DatasetStats`] for a split triple. Pure; `dev` may be absent.
pub fn compute_stats(
    train: &DatasetSplit,
    dev: Option<&DatasetSplit>,
    test: &DatasetSplit,
    catalog: &LabelCatalog,
) -> DatasetStats {
    let max_labels_per_sample = train
        .documents
        .iter()
        .chain(dev.map(|d| d.documents.iter()).unwrap_or_default())
        .chain(test.documents.iter())
        .map(|d| dedup_count(&d.gold_labels))
        .max()
        .unwrap_or(0);
    let avg_desc_length = if catalog.is_empty() {
        0.0
    } else {
        let total: usize = catalog
            .entries()
            .iter()
            .map(|e| whitespace_tokens(&e.refined_text))
            .sum();
        total as f64 / catalog.len() as f64
    };
    DatasetStats {
        n_train: train.len(),
        n_dev: dev.map_or(0, DatasetSplit::len),
        n_test: test.len(),
        n_labels: catalog.len(),
        max_labels_per_sample,
        avg_desc_length,
    }
}

fn dedup_count(names: &[String]) -> usize {
    let mut seen: Vec<&str> = Vec::with_capacity(names.len());
    for n in names {
        if !seen.contains(&n.as_str()) {
            seen.push(n);
        }
    }
    seen.len()
}

/// A single problem found while validating a split against a catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    /// Gold label not present in the catalog.
    UnknownLabel { document_id: String, label: String },
    /// Document text is empty or whitespace-only.
    EmptyText { document_id: String },
    /// Gold label set is empty (acceptable only for inference splits).
    EmptyGoldSet { document_id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Check every document of `split` against `catalog`.
///
/// The report is empty iff the split is clean: all gold labels resolve to
/// catalog indices, no document text is empty, no gold set is empty.
pub fn validate(split: &DatasetSplit, catalog: &LabelCatalog) -> ValidationReport {
    let mut issues = Vec::new();
    for doc in &split.documents {
        if doc.text.trim().is_empty() {
            issues.push(ValidationIssue::EmptyText {
                document_id: doc.id.clone(),
            });
        }
        if doc.gold_labels.is_empty() {
            issues.push(ValidationIssue::EmptyGoldSet {
                document_id: doc.id.clone(),
            });
        }
        for label in &doc.gold_labels {
            if catalog.index_of(label).is_none() {
                issues.push(ValidationIssue::UnknownLabel {
                    document_id: doc.id.clone(),
                    label: label.clone(),
                });
            }
        }
    }
    ValidationReport { issues }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CatalogError {
    EmptyLabelName { index: usize },
    UntrimmedLabelName { name: String },
    DuplicateLabel { name: String },
}

impl fmt::Display for CatalogError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogError::EmptyLabelName { index } => {
                write!(f, "catalog entry {index} has an empty label name")
            }
            CatalogError::UntrimmedLabelName { name } => {
                write!(f, "label name {name:?} has surrounding whitespace")
            }
            CatalogError::DuplicateLabel { name } => {
                write!(f, "duplicate label name {name:?}")
            }
        }
    }
}

impl core::error::Error for CatalogError {}

impl CatalogEntry {
    /// Seed-only entry awaiting refinement.
    pub fn seed(name: &str, initial_text: &str) -> Self {
        CatalogEntry {
            name: name.to_string(),
            initial_text: initial_text.to_string(),
            refined_text: String::new(),
            source: DescriptionSource::Seed,
        }
    }

    /// Entry that already carries its final description.
    pub fn manual(name: &str, description: &str) -> Self {
        CatalogEntry {
            name: name.to_string(),
            initial_text: description.to_string(),
            refined_text: description.to_string(),
            source: DescriptionSource::Manual,
        }
    }
}
