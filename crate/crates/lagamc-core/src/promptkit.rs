//! Prompt and target construction, plus sentence splitting of generated
//! output.
//!
//! A prompt is the concatenation of an instruction, a task header, a task
//! description, and the document text. The training target is the
//! concatenation of the refined descriptions of the document's gold
//! labels, in catalog order, period-separated.
//!
//! Sentence splitting is a deliberately naive period-boundary rule: the
//! matcher is tolerant of imperfect segmentation (any fragment still maps
//! to its nearest label), and [`lint_descriptions`] warns at load time
//! about catalogs whose descriptions would confuse the splitter.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{Document, LabelCatalog};

/// Template for assembling prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub instruction: String,
    pub task_name: String,
    pub task_description: String,
    /// Separator between the four prompt sections.
    #[serde(default = "default_separator")]
    pub separator: String,
}

fn default_separator() -> String {
    "\n".to_string()
}

impl PromptTemplate {
    pub fn new(
        instruction: &str,
        task_name: &str,
        task_description: &str,
    ) -> Result<Self, PromptError> {
        let t = PromptTemplate {
            instruction: instruction.to_string(),
            task_name: task_name.to_string(),
            task_description: task_description.to_string(),
            separator: default_separator(),
        };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), PromptError> {
        if self.instruction.trim().is_empty() {
            return Err(PromptError::EmptyInstruction);
        }
        if self.task_description.trim().is_empty() {
            return Err(PromptError::EmptyTaskDescription);
        }
        Ok(())
    }
}

/// Assembled prompt/target pair for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub document_id: String,
    pub prompt: String,
    /// Present iff the document carries gold labels.
    pub target: Option<String>,
}

/// Build the generation prompt for one document.
///
/// Layout: `instruction ⊕ "Task: "name ⊕ "Description: "desc ⊕ text`,
/// joined by the template separator. Byte-stable for identical inputs.
pub fn build_prompt(template: &PromptTemplate, doc: &Document) -> Result<String, PromptError> {
    template.check()?;
    if doc.text.trim().is_empty() {
        return Err(PromptError::EmptyDocumentText {
            document_id: doc.id.clone(),
        });
    }
    let sep = &template.separator;
    let mut out = String::with_capacity(
        template.instruction.len()
            + template.task_name.len()
            + template.task_description.len()
            + doc.text.len()
            + 3 * sep.len()
            + 24,
    );
    out.push_str(&template.instruction);
    out.push_str(sep);
    out.push_str("Task: ");
    out.push_str(&template.task_name);
    out.push_str(sep);
    out.push_str("Description: ");
    out.push_str(&template.task_description);
    out.push_str(sep);
    out.push_str(&doc.text);
    Ok(out)
}

/// Build the training target: refined descriptions of the document's gold
/// labels joined in catalog order, each terminated by exactly one period
/// and separated by a single space.
pub fn build_target(doc: &Document, catalog: &LabelCatalog) -> Result<String, PromptError> {
    let mut indices: Vec<usize> = Vec::with_capacity(doc.gold_labels.len());
    for name in &doc.gold_labels {
        let idx = catalog
            .index_of(name)
            .ok_or_else(|| PromptError::UnknownGoldLabel {
                document_id: doc.id.clone(),
                label: name.clone(),
            })?;
        if !indices.contains(&idx) {
            indices.push(idx);
        }
    }
    indices.sort_unstable();
    let mut parts: Vec<String> = Vec::with_capacity(indices.len());
    for idx in indices {
        let entry = catalog.entry(idx);
        let text = entry.refined_text.trim();
        if text.is_empty() {
            return Err(PromptError::MissingDescription {
                label: entry.name.clone(),
            });
        }
        parts.push(terminate_once(text));
    }
    Ok(parts.join(" "))
}

/// Trim trailing periods and terminate with exactly one.
fn terminate_once(text: &str) -> String {
    let trimmed = text.trim_end_matches('.').trim_end();
    let mut s = String::with_capacity(trimmed.len() + 1);
    s.push_str(trimmed);
    s.push('.');
    s
}

/// Split generated text into candidate description sentences.
///
/// Boundaries are `.` followed by whitespace or end of input. Pieces are
/// trimmed, empties dropped, and each piece re-terminated with a single
/// period. Empty input yields an empty list.
pub fn split_generated(text: &str) -> Vec<String> {
    let mut pieces = Vec::new();
    let mut start = 0usize;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '.' {
            let at_boundary = match chars.peek() {
                None => true,
                Some(&(_, next)) => next.is_whitespace(),
            };
            if at_boundary {
                push_piece(&mut pieces, &text[start..=i]);
                start = i + 1;
            }
        }
    }
    if start < text.len() {
        push_piece(&mut pieces, &text[start..]);
    }
    pieces
}

fn push_piece(pieces: &mut Vec<String>, raw: &str) {
    let trimmed = raw.trim();
    let body = trimmed.trim_end_matches('.').trim_end();
    if !body.is_empty() {
        pieces.push(terminate_once(body));
    }
}

/// Build prompt records for a whole split. Documents with gold labels get
/// targets; unlabeled documents get prompt-only records.
pub fn build_records(
    template: &PromptTemplate,
    split: &crate::catalog::DatasetSplit,
    catalog: &LabelCatalog,
) -> Result<Vec<PromptRecord>, PromptError> {
    let mut records = Vec::with_capacity(split.documents.len());
    for doc in &split.documents {
        let prompt = build_prompt(template, doc)?;
        let target = if doc.gold_labels.is_empty() {
            None
        } else {
            Some(build_target(doc, catalog)?)
        };
        records.push(PromptRecord {
            document_id: doc.id.clone(),
            prompt,
            target,
        });
    }
    Ok(records)
}

/// Catalog problem that can degrade sentence splitting or storage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LintWarning {
    /// The refined description contains an internal sentence boundary
    /// (period + whitespace + uppercase), so a generated copy of it would
    /// be split into multiple fragments.
    InternalSentenceBoundary { label: String },
    /// The refined description contains a line break, which collides with
    /// line-oriented storage.
    ContainsLineBreak { label: String },
}

/// Lint refined descriptions for patterns the splitter or storage format
/// would mishandle. Run at catalog load time.
pub fn lint_descriptions(catalog: &LabelCatalog) -> Vec<LintWarning> {
    let mut warnings = Vec::new();
    for entry in catalog.entries() {
        let text = entry.refined_text.trim();
        if text.contains('\n') || text.contains('\r') {
            warnings.push(LintWarning::ContainsLineBreak {
                label: entry.name.clone(),
            });
        }
        if has_internal_boundary(text) {
            warnings.push(LintWarning::InternalSentenceBoundary {
                label: entry.name.clone(),
            });
        }
    }
    warnings
}

fn has_internal_boundary(text: &str) -> bool {
    let mut chars = text.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if c != '.' {
            continue;
        }
        if let Some(&(rest_at, next)) = chars.peek() {
            if next.is_whitespace() {
                if let Some(after_ws) = text[rest_at..].trim_start().chars().next() {
                    if after_ws.is_uppercase() {
                        return true;
                    }
                }
            }
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptError {
    EmptyInstruction,
    EmptyTaskDescription,
    EmptyDocumentText { document_id: String },
    UnknownGoldLabel { document_id: String, label: String },
    MissingDescription { label: String },
}

impl fmt::Display for PromptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptError::EmptyInstruction => write!(f, "prompt template instruction is empty"),
            PromptError::EmptyTaskDescription => {
                write!(f, "prompt template task description is empty")
            }
            PromptError::EmptyDocumentText { document_id } => {
                write!(f, "document {document_id:?} has empty text")
            }
            PromptError::UnknownGoldLabel { document_id, label } => {
                write!(
                    f,
                    "document {document_id:?} carries label {label:?} not in the catalog"
                )
            }
            PromptError::MissingDescription { label } => {
                write!(f, "label {label:?} has no refined description")
            }
        }
    }
}

impl core::error::Error for PromptError {}
