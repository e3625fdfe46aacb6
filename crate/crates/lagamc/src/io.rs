//! File formats: JSONL datasets (with a field-name schema for foreign
//! corpora), catalog and template JSON, prompt records, and the
//! prediction wire format.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use lagamc_core::catalog::{DatasetSplit, Document, LabelCatalog, SplitName};
use lagamc_core::matcher::MatchResult;
use lagamc_core::promptkit::{PromptRecord, PromptTemplate};

use crate::error::{AppError, AppResult};

/// Field-name mapping for dataset records. Defaults match the native
/// format: `{"id": ..., "text": ..., "labels": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSchema {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default = "default_text")]
    pub text: String,
    #[serde(default = "default_labels")]
    pub labels: String,
}

fn default_id() -> String {
    "id".into()
}
fn default_text() -> String {
    "text".into()
}
fn default_labels() -> String {
    "labels".into()
}

impl Default for FieldSchema {
    fn default() -> Self {
        FieldSchema {
            id: default_id(),
            text: default_text(),
            labels: default_labels(),
        }
    }
}

/// Load a JSONL dataset split, preserving record order. Label names are
/// trimmed; duplicate ids and malformed records are reported with their
/// line number.
pub fn load_dataset(path: &Path, schema: &FieldSchema, name: SplitName) -> AppResult<DatasetSplit> {
    let file = File::open(path).map_err(|source| AppError::Read {
        path: path.into(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut documents = Vec::new();
    let mut seen_ids = std::collections::BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| AppError::Read {
            path: path.into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| AppError::Malformed {
            path: path.into(),
            line: line_no,
            message: format!("not a JSON object: {e}"),
        })?;
        let doc = document_from_value(&value, schema).map_err(|message| AppError::Malformed {
            path: path.into(),
            line: line_no,
            message,
        })?;
        if !seen_ids.insert(doc.id.clone()) {
            return Err(AppError::Malformed {
                path: path.into(),
                line: line_no,
                message: format!("duplicate document id {:?}", doc.id),
            });
        }
        documents.push(doc);
    }
    Ok(DatasetSplit::new(name, documents))
}

fn document_from_value(value: &Value, schema: &FieldSchema) -> Result<Document, String> {
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    let id = obj
        .get(&schema.id)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing string field {:?}", schema.id))?
        .to_string();
    let text = obj
        .get(&schema.text)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("missing string field {:?}", schema.text))?
        .to_string();
    let labels = match obj.get(&schema.labels) {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(|s| s.trim().to_string())
                    .ok_or_else(|| format!("non-string label in {:?}", schema.labels))
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(format!("field {:?} is not an array", schema.labels)),
    };
    Ok(Document {
        id,
        text,
        gold_labels: labels,
    })
}

/// Write a split in the native JSONL format (one object per line, native
/// field names). Round-trips exactly through [`load_dataset`].
pub fn save_dataset(path: &Path, split: &DatasetSplit) -> AppResult<()> {
    let file = File::create(path).map_err(|source| AppError::Write {
        path: path.into(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for doc in &split.documents {
        let line = serde_json::json!({
            "id": doc.id,
            "text": doc.text,
            "labels": doc.gold_labels,
        });
        writeln!(w, "{line}").map_err(|source| AppError::Write {
            path: path.into(),
            source,
        })?;
    }
    w.flush().map_err(|source| AppError::Write {
        path: path.into(),
        source,
    })
}

pub fn load_catalog(path: &Path) -> AppResult<LabelCatalog> {
    read_json(path)
}

pub fn save_catalog(path: &Path, catalog: &LabelCatalog) -> AppResult<()> {
    write_json(path, catalog)
}

pub fn load_template(path: &Path) -> AppResult<PromptTemplate> {
    let template: PromptTemplate = read_json(path)?;
    template
        .check()
        .map_err(|e| AppError::validation(format!("{}: {e}", path.display())))?;
    Ok(template)
}

pub fn save_template(path: &Path, template: &PromptTemplate) -> AppResult<()> {
    write_json(path, template)
}

pub fn load_prompts(path: &Path) -> AppResult<Vec<PromptRecord>> {
    read_jsonl(path)
}

pub fn save_prompts(path: &Path, records: &[PromptRecord]) -> AppResult<()> {
    write_jsonl(path, records)
}

/// Wire format for one predicted document:
/// `{"id", "sentences": [{"text", "label", "similarity"}...], "labels": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub sentences: Vec<PredictedSentence>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedSentence {
    pub text: String,
    pub label: Option<String>,
    pub similarity: f32,
}

impl From<MatchResult> for PredictionRecord {
    fn from(result: MatchResult) -> Self {
        PredictionRecord {
            id: result.document_id,
            sentences: result
                .sentences
                .into_iter()
                .map(|s| PredictedSentence {
                    text: s.text,
                    label: s.label,
                    similarity: s.similarity,
                })
                .collect(),
            labels: result.predicted_labels,
        }
    }
}

pub fn load_predictions(path: &Path) -> AppResult<Vec<PredictionRecord>> {
    read_jsonl(path)
}

pub fn save_predictions(path: &Path, records: &[PredictionRecord]) -> AppResult<()> {
    write_jsonl(path, records)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> AppResult<T> {
    let bytes = fs::read(path).map_err(|source| AppError::Read {
        path: path.into(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|source| AppError::Json {
        path: path.into(),
        source,
    })
}

/// Pretty-printed JSON with a trailing newline. Serialization is
/// deterministic (struct field order), which the pipeline's byte-identity
/// guarantees rely on.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| AppError::Write {
            path: path.into(),
            source,
        })?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|source| AppError::Json {
        path: path.into(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| AppError::Write {
        path: path.into(),
        source,
    })
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> AppResult<Vec<T>> {
    let file = File::open(path).map_err(|source| AppError::Read {
        path: path.into(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| AppError::Read {
            path: path.into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| AppError::Malformed {
            path: path.into(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> AppResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| AppError::Write {
            path: path.into(),
            source,
        })?;
    }
    let file = File::create(path).map_err(|source| AppError::Write {
        path: path.into(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).map_err(|source| AppError::Json {
            path: path.into(),
            source,
        })?;
        writeln!(w, "{line}").map_err(|source| AppError::Write {
            path: path.into(),
            source,
        })?;
    }
    w.flush().map_err(|source| AppError::Write {
        path: path.into(),
        source,
    })
}
