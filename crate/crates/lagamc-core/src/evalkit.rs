//! Micro/Macro-F1 and the analysis suite: rare-label slice, zero-shot
//! split construction, description-length buckets, and the actual-vs-
//! predicted label-count table.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{whitespace_tokens, DatasetSplit, LabelCatalog};
use crate::rng::Rng;

/// Gold and predicted label sets for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocOutcome {
    pub id: String,
    pub gold: Vec<String>,
    pub predicted: Vec<String>,
}

/// Aligned predictions for a whole split. Construction deduplicates both
/// sets per document; order within a set carries no meaning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub docs: Vec<DocOutcome>,
}

impl PredictionSet {
    pub fn new(mut docs: Vec<DocOutcome>) -> Self {
        for d in &mut docs {
            dedup_in_place(&mut d.gold);
            dedup_in_place(&mut d.predicted);
        }
        PredictionSet { docs }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

fn dedup_in_place(names: &mut Vec<String>) {
    let mut seen: Vec<String> = Vec::with_capacity(names.len());
    names.retain(|n| {
        if seen.contains(n) {
            false
        } else {
            seen.push(n.clone());
            true
        }
    });
}

/// Per-label confusion counts and scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Equal-sized bucket of test documents ranked by gold description length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBucket {
    pub bucket: usize,
    pub n_documents: usize,
    pub mean_length: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

/// Tail-performance slice over the least frequent training labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RareLabelSlice {
    pub rare_labels: Vec<String>,
    /// Test documents whose gold set touches the rare set.
    pub n_documents: usize,
    /// Macro-F1 over the rare labels on those documents; absent when no
    /// test document touches the rare set.
    pub macro_f1: Option<f64>,
    pub per_label: Vec<LabelScore>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCountRow {
    pub k: usize,
    pub n_actual: usize,
    pub n_predicted: usize,
}

/// Counts of documents by exact gold / predicted label-set size, for
/// k = 1..=max_k. Sizes outside that range are tallied separately, with
/// empty predictions (k = 0) also reported on their own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCountTable {
    pub rows: Vec<LabelCountRow>,
    pub gold_out_of_range: usize,
    pub pred_out_of_range: usize,
    pub empty_predictions: usize,
}

/// Metric report for one prediction run. The slice fields are filled by
/// the corresponding analysis operations when requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub n_documents: usize,
    pub per_label: Vec<LabelScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_count_table: Option<LabelCountTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rare: Option<RareLabelSlice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buckets: Option<Vec<LengthBucket>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    UnknownLabel {
        document_id: String,
        label: String,
        in_prediction: bool,
    },
    BadFraction {
        fraction_times_1000: i64,
    },
    TooManyUnseen {
        requested: usize,
        n_labels: usize,
    },
    UnseenNotInTest {
        label: String,
    },
    TrainWouldBeEmpty,
    ZeroBuckets,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::UnknownLabel {
                document_id,
                label,
                in_prediction,
            } => {
                let side = if *in_prediction {
                    "prediction"
                } else {
                    "gold set"
                };
                write!(
                    f,
                    "document {document_id:?} {side} names unknown label {label:?}"
                )
            }
            EvalError::BadFraction {
                fraction_times_1000,
            } => {
                write!(f, "fraction {}/1000 outside (0, 1)", fraction_times_1000)
            }
            EvalError::TooManyUnseen {
                requested,
                n_labels,
            } => {
                write!(f, "cannot hold out {requested} of {n_labels} labels")
            }
            EvalError::UnseenNotInTest { label } => {
                write!(
                    f,
                    "candidate unseen label {label:?} never appears in the test split"
                )
            }
            EvalError::TrainWouldBeEmpty => {
                write!(
                    f,
                    "removing unseen-label documents empties the training split"
                )
            }
            EvalError::ZeroBuckets => write!(f, "bucket count must be at least 1"),
        }
    }
}

impl core::error::Error for EvalError {}

fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Resolve a document's label names to catalog indices, erroring on
/// unknown names.
fn resolve(
    names: &[String],
    catalog: &LabelCatalog,
    doc_id: &str,
    in_prediction: bool,
) -> Result<Vec<usize>, EvalError> {
    names
        .iter()
        .map(|n| {
            catalog.index_of(n).ok_or_else(|| EvalError::UnknownLabel {
                document_id: doc_id.to_string(),
                label: n.clone(),
                in_prediction,
            })
        })
        .collect()
}

fn confusion(
    preds: &PredictionSet,
    catalog: &LabelCatalog,
) -> Result<Vec<(usize, usize, usize)>, EvalError> {
    let mut counts = alloc::vec![(0usize, 0usize, 0usize); catalog.len()];
    for doc in &preds.docs {
        let gold = resolve(&doc.gold, catalog, &doc.id, false)?;
        let pred = resolve(&doc.predicted, catalog, &doc.id, true)?;
        for &g in &gold {
            if pred.contains(&g) {
                counts[g].0 += 1;
            } else {
                counts[g].2 += 1;
            }
        }
        for &p in &pred {
            if !gold.contains(&p) {
                counts[p].1 += 1;
            }
        }
    }
    Ok(counts)
}

fn score_label(name: &str, tp: usize, fp: usize, fn_: usize) -> LabelScore {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    LabelScore {
        label: name.to_string(),
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1: f1_from(precision, recall),
    }
}

/// Micro-F1 (pooled counts) and Macro-F1 (unweighted mean of per-label F1
/// over all catalog labels; a label with no traffic scores 0).
pub fn compute_f1(preds: &PredictionSet, catalog: &LabelCatalog) -> Result<EvalReport, EvalError> {
    let counts = confusion(preds, catalog)?;
    let per_label: Vec<LabelScore> = catalog
        .entries()
        .iter()
        .zip(&counts)
        .map(|(e, &(tp, fp, fn_))| score_label(&e.name, tp, fp, fn_))
        .collect();
    let (tp, fp, fn_) = counts.iter().fold((0, 0, 0), |acc, &(a, b, c)| {
        (acc.0 + a, acc.1 + b, acc.2 + c)
    });
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let micro_f1 = f1_from(precision, recall);
    let macro_f1 = if per_label.is_empty() {
        0.0
    } else {
        per_label.iter().map(|l| l.f1).sum::<f64>() / per_label.len() as f64
    };
    Ok(EvalReport {
        micro_f1,
        macro_f1,
        n_documents: preds.len(),
        per_label,
        label_count_table: None,
        rare: None,
        buckets: None,
    })
}

/// The `⌈fraction·p⌉` least frequent training labels (ties broken by
/// catalog index), evaluated on the test documents that touch them.
pub fn rare_label_slice(
    train: &DatasetSplit,
    preds: &PredictionSet,
    catalog: &LabelCatalog,
    fraction: f64,
) -> Result<RareLabelSlice, EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::BadFraction {
            fraction_times_1000: (fraction * 1000.0) as i64,
        });
    }
    let mut freq = alloc::vec![0usize; catalog.len()];
    for doc in &train.documents {
        for idx in resolve(&doc.gold_labels, catalog, &doc.id, false)? {
            freq[idx] += 1;
        }
    }
    let rare_count = ceil_mul(fraction, catalog.len());
    let mut order: Vec<usize> = (0..catalog.len()).collect();
    order.sort_by_key(|&i| (freq[i], i));
    let mut rare: Vec<usize> = order.into_iter().take(rare_count).collect();
    rare.sort_unstable();

    let subset: Vec<&DocOutcome> = preds
        .docs
        .iter()
        .map(|d| resolve(&d.gold, catalog, &d.id, false).map(|gold| (d, gold)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|(_, gold)| gold.iter().any(|g| rare.contains(g)))
        .map(|(d, _)| d)
        .collect();

    let mut per_label = Vec::with_capacity(rare.len());
    for &label_idx in &rare {
        let name = &catalog.entry(label_idx).name;
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        for doc in &subset {
            let in_gold = doc.gold.iter().any(|n| n == name);
            let in_pred = doc.predicted.iter().any(|n| n == name);
            match (in_gold, in_pred) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        per_label.push(score_label(name, tp, fp, fn_));
    }
    let macro_f1 = if subset.is_empty() {
        None
    } else {
        Some(per_label.iter().map(|l| l.f1).sum::<f64>() / per_label.len().max(1) as f64)
    };
    Ok(RareLabelSlice {
        rare_labels: rare
            .iter()
            .map(|&i| catalog.entry(i).name.clone())
            .collect(),
        n_documents: subset.len(),
        macro_f1,
        per_label,
    })
}

fn ceil_mul(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    let floor = exact as usize;
    if exact > floor as f64 {
        floor + 1
    } else {
        floor
    }
}

/// Result of building a zero-shot variant of a dataset: the pruned
/// training split and the held-out label names. The test split and the
/// catalog are left untouched so the matcher can still select unseen
/// labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotSplit {
    pub train: DatasetSplit,
    pub unseen_labels: Vec<String>,
}

/// Hold out `n_unseen` randomly chosen labels: every training document
/// whose gold set touches one of them is removed, so no training target
/// ever contains an unseen description. Candidates are restricted to
/// labels that actually appear in the test split.
pub fn zero_shot_split(
    train: &DatasetSplit,
    test: &DatasetSplit,
    catalog: &LabelCatalog,
    n_unseen: usize,
    seed: u64,
) -> Result<ZeroShotSplit, EvalError> {
    if n_unseen >= catalog.len() && n_unseen != 0 {
        return Err(EvalError::TooManyUnseen {
            requested: n_unseen,
            n_labels: catalog.len(),
        });
    }
    if n_unseen == 0 {
        return Ok(ZeroShotSplit {
            train: train.clone(),
            unseen_labels: Vec::new(),
        });
    }
    let mut in_test = alloc::vec![false; catalog.len()];
    for doc in &test.documents {
        for idx in resolve(&doc.gold_labels, catalog, &doc.id, false)? {
            in_test[idx] = true;
        }
    }
    let candidates: Vec<usize> = (0..catalog.len()).filter(|&i| in_test[i]).collect();
    if candidates.len() < n_unseen {
        return Err(EvalError::TooManyUnseen {
            requested: n_unseen,
            n_labels: candidates.len(),
        });
    }
    let mut rng = Rng::derive(seed, 0x7a73);
    let picks = rng.sample_indices(candidates.len(), n_unseen);
    let unseen: Vec<usize> = picks.into_iter().map(|i| candidates[i]).collect();
    let unseen_names: Vec<String> = unseen
        .iter()
        .map(|&i| catalog.entry(i).name.clone())
        .collect();

    let kept: Vec<_> = train
        .documents
        .iter()
        .filter(|doc| {
            !doc.gold_labels
                .iter()
                .any(|n| unseen_names.iter().any(|u| u == n))
        })
        .cloned()
        .collect();
    if kept.is_empty() && !train.documents.is_empty() {
        return Err(EvalError::TrainWouldBeEmpty);
    }
    Ok(ZeroShotSplit {
        train: DatasetSplit::new(train.name, kept),
        unseen_labels: unseen_names,
    })
}

/// Whitespace-token length of the concatenated gold descriptions, the
/// ranking key for [`length_buckets`].
pub fn gold_description_length(
    gold: &[String],
    catalog: &LabelCatalog,
    doc_id: &str,
) -> Result<usize, EvalError> {
    let mut indices = resolve(gold, catalog, doc_id, false)?;
    indices.sort_unstable();
    indices.dedup();
    Ok(indices
        .into_iter()
        .map(|i| whitespace_tokens(&catalog.entry(i).refined_text))
        .sum())
}

/// Rank test documents by gold description length and partition them into
/// `n_buckets` contiguous groups of equal size (±1, earlier buckets take
/// the remainder). Ties in length break by document id.
pub fn length_buckets(
    preds: &PredictionSet,
    catalog: &LabelCatalog,
    n_buckets: usize,
) -> Result<Vec<LengthBucket>, EvalError> {
    if n_buckets == 0 {
        return Err(EvalError::ZeroBuckets);
    }
    let mut ranked: Vec<(usize, &DocOutcome)> = Vec::with_capacity(preds.len());
    for doc in &preds.docs {
        ranked.push((gold_description_length(&doc.gold, catalog, &doc.id)?, doc));
    }
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));

    let n = ranked.len();
    let base = n / n_buckets;
    let remainder = n % n_buckets;
    let mut buckets = Vec::with_capacity(n_buckets);
    let mut cursor = 0usize;
    for bucket in 0..n_buckets {
        let size = base + usize::from(bucket < remainder);
        let slice = &ranked[cursor..cursor + size];
        cursor += size;
        let subset = PredictionSet::new(slice.iter().map(|(_, d)| (*d).clone()).collect());
        let report = compute_f1(&subset, catalog)?;
        let mean_length = if slice.is_empty() {
            0.0
        } else {
            slice.iter().map(|(l, _)| *l).sum::<usize>() as f64 / slice.len() as f64
        };
        buckets.push(LengthBucket {
            bucket,
            n_documents: size,
            mean_length,
            micro_f1: report.micro_f1,
            macro_f1: report.macro_f1,
        });
    }
    Ok(buckets)
}

/// For k = 1..=max_k, count documents with exactly k gold labels and with
/// exactly k predicted labels.
pub fn label_count_table(preds: &PredictionSet, max_k: usize) -> LabelCountTable {
    let mut rows: Vec<LabelCountRow> = (1..=max_k)
        .map(|k| LabelCountRow {
            k,
            n_actual: 0,
            n_predicted: 0,
        })
        .collect();
    let mut gold_out_of_range = 0;
    let mut pred_out_of_range = 0;
    let mut empty_predictions = 0;
    for doc in &preds.docs {
        let g = doc.gold.len();
        let p = doc.predicted.len();
        if (1..=max_k).contains(&g) {
            rows[g - 1].n_actual += 1;
        } else {
            gold_out_of_range += 1;
        }
        if (1..=max_k).contains(&p) {
            rows[p - 1].n_predicted += 1;
        } else {
            pred_out_of_range += 1;
            if p == 0 {
                empty_predictions += 1;
            }
        }
    }
    LabelCountTable {
        rows,
        gold_out_of_range,
        pred_out_of_range,
        empty_predictions,
    }
}
