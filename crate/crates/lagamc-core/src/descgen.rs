//! Label description refinement: build the refinement prompt from a seed
//! definition plus in-dataset examples, and drive a pluggable
//! text-generation client to produce dataset-specific descriptions.
//!
//! The client is abstract; a deterministic stub ships here for tests and
//! offline runs, and the companion crate provides an HTTP-backed client.
//! Waiting between retries is injected as a callback so this module stays
//! free of clocks.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU32, Ordering};
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::catalog::{DatasetSplit, DescriptionSource, Document, LabelCatalog};
use crate::rng::Rng;

/// Inputs for one label's refinement prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinementRequest {
    pub label_name: String,
    pub initial_description: String,
    /// One-line description of the dataset the label lives in.
    pub dataset_blurb: String,
    /// In-dataset examples: text plus the label set it was annotated with.
    pub examples: Vec<(String, Vec<String>)>,
}

impl RefinementRequest {
    pub fn check(&self) -> Result<(), DescgenError> {
        if self.examples.is_empty() {
            return Err(DescgenError::NoExamples {
                label: self.label_name.clone(),
            });
        }
        for (_, labels) in &self.examples {
            if !labels.iter().any(|l| l == &self.label_name) {
                return Err(DescgenError::ExampleMissingLabel {
                    label: self.label_name.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Abstract completion client. Implementations must be safe to call from
/// multiple threads; retry orchestration lives outside this trait.
pub trait GenerationClient: Sync {
    fn complete(
        &self,
        prompt: &str,
        max_tokens: u32,
        temperature: f64,
    ) -> Result<String, ClientError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientError {
    pub message: String,
}

impl fmt::Display for ClientError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "generation client error: {}", self.message)
    }
}

impl core::error::Error for ClientError {}

/// Retry schedule: `max_attempts` tries with exponentially growing waits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff: Duration::from_secs(1),
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Wait before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let secs =
            self.initial_backoff.as_secs_f64() * libm::pow(self.multiplier, (retry - 1) as f64);
        Duration::from_secs_f64(secs)
    }
}

/// Run one completion under the retry policy. Returns the response and
/// the number of retries that were needed.
pub fn complete_with_retry(
    client: &dyn GenerationClient,
    prompt: &str,
    max_tokens: u32,
    temperature: f64,
    policy: &RetryPolicy,
    sleep: &mut dyn FnMut(Duration),
) -> Result<(String, u32), ClientError> {
    let attempts = policy.max_attempts.max(1);
    let mut last = ClientError {
        message: "no attempts made".to_string(),
    };
    for attempt in 0..attempts {
        if attempt > 0 {
            sleep(policy.backoff(attempt));
        }
        match client.complete(prompt, max_tokens, temperature) {
            Ok(text) => return Ok((text, attempt)),
            Err(err) => last = err,
        }
    }
    Err(last)
}

/// Deterministic in-memory client for tests and offline runs. Responses
/// come from an exact prompt map, a label-keyed map (the label is parsed
/// from the prompt's `Label:` line), or an echo fallback.
#[derive(Debug, Default)]
pub struct StubClient {
    by_prompt: BTreeMap<String, String>,
    by_label: BTreeMap<String, String>,
    echo_prefix: Option<String>,
    fail_first: AtomicU32,
    calls: AtomicU32,
}

impl StubClient {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reply to every prompt with `prefix` + the label parsed from it.
    pub fn echo_label(prefix: &str) -> Self {
        StubClient {
            echo_prefix: Some(prefix.to_string()),
            ..Self::default()
        }
    }

    pub fn with_prompt_response(mut self, prompt: &str, response: &str) -> Self {
        self.by_prompt
            .insert(prompt.to_string(), response.to_string());
        self
    }

    pub fn with_label_response(mut self, label: &str, response: &str) -> Self {
        self.by_label
            .insert(label.to_string(), response.to_string());
        self
    }

    /// Make the first `n` calls fail, to exercise retry handling.
    pub fn failing_first(self, n: u32) -> Self {
        self.fail_first.store(n, Ordering::SeqCst);
        self
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }

    fn parse_label(prompt: &str) -> Option<&str> {
        prompt
            .lines()
            .find_map(|line| line.strip_prefix("Label: "))
            .map(str::trim)
    }
}

impl GenerationClient for StubClient {
    fn complete(
        &self,
        prompt: &str,
        _max_tokens: u32,
        _temperature: f64,
    ) -> Result<String, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let remaining = self.fail_first.load(Ordering::SeqCst);
        if remaining > 0 {
            self.fail_first.store(remaining - 1, Ordering::SeqCst);
            return Err(ClientError {
                message: "stubbed transient failure".to_string(),
            });
        }
        if let Some(resp) = self.by_prompt.get(prompt) {
            return Ok(resp.clone());
        }
        if let Some(label) = Self::parse_label(prompt) {
            if let Some(resp) = self.by_label.get(label) {
                return Ok(resp.clone());
            }
            if let Some(prefix) = &self.echo_prefix {
                return Ok(alloc::format!("{prefix}{label}"));
            }
        }
        Err(ClientError {
            message: "stub has no response for this prompt".to_string(),
        })
    }
}

/// Seeded, reproducible choice of up to `k` training documents whose gold
/// set contains `label`.
pub fn pick_examples<'a>(
    train: &'a DatasetSplit,
    label: &str,
    k: usize,
    seed: u64,
) -> Result<Vec<&'a Document>, DescgenError> {
    let carrying: Vec<&Document> = train
        .documents
        .iter()
        .filter(|d| d.gold_labels.iter().any(|l| l == label))
        .collect();
    if carrying.is_empty() {
        return Err(DescgenError::LabelNotInTrain {
            label: label.to_string(),
        });
    }
    let mut rng = Rng::derive(seed, crate::catalog::Fnv64::hash_str(label));
    let picks = rng.sample_indices(carrying.len(), k.max(1));
    Ok(picks.into_iter().map(|i| carrying[i]).collect())
}

/// Assemble the refinement prompt. Sections appear in a fixed order
/// (label, seed description, dataset blurb, the examples, the task line)
/// and the output is byte-stable for identical inputs.
pub fn build_refinement_prompt(req: &RefinementRequest) -> Result<String, DescgenError> {
    req.check()?;
    let mut out = String::new();
    out.push_str("Label: ");
    out.push_str(&req.label_name);
    out.push_str("\nInitial Description: ");
    out.push_str(&req.initial_description);
    out.push_str("\nDataset: ");
    out.push_str(&req.dataset_blurb);
    out.push_str("\nExamples from the dataset:");
    for (i, (text, labels)) in req.examples.iter().enumerate() {
        out.push_str(&alloc::format!(
            "\nExample {}: \"{}\"\nPrediction: ",
            i + 1,
            text
        ));
        out.push_str(&labels.join(", "));
    }
    out.push_str(&alloc::format!(
        "\nTask: Generate a suitable label description for '{}' that fits the context of this dataset.",
        req.label_name
    ));
    Ok(out)
}

/// Options for a catalog refinement run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    /// Examples per label in the prompt.
    pub examples_per_label: usize,
    pub seed: u64,
    pub retry: RetryPolicy,
    pub max_tokens: u32,
    pub temperature: f64,
    pub dataset_blurb: String,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            examples_per_label: 2,
            seed: 42,
            retry: RetryPolicy::default(),
            max_tokens: 128,
            temperature: 0.7,
            dataset_blurb: String::new(),
        }
    }
}

/// What happened to one label during refinement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum LabelOutcome {
    /// Refined text obtained from the client.
    Refined { label: String, retries: u32 },
    /// Already had a final description; left untouched.
    Skipped { label: String },
    /// Client (or example selection) failed; seed description kept.
    FellBack { label: String, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineReport {
    pub outcomes: Vec<LabelOutcome>,
}

impl RefineReport {
    pub fn refined(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, LabelOutcome::Refined { .. }))
            .count()
    }
    pub fn skipped(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, LabelOutcome::Skipped { .. }))
            .count()
    }
    pub fn fallbacks(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, LabelOutcome::FellBack { .. }))
            .count()
    }
}

/// Refine a single catalog entry. Exposed so drivers can parallelize
/// across labels; results depend only on (entry, options), never on
/// scheduling.
pub fn refine_entry(
    catalog: &LabelCatalog,
    index: usize,
    train: &DatasetSplit,
    client: &dyn GenerationClient,
    opts: &RefineOptions,
    sleep: &mut dyn FnMut(Duration),
) -> (Option<String>, LabelOutcome) {
    let entry = catalog.entry(index);
    let needs_refinement =
        entry.refined_text.trim().is_empty() || entry.source == DescriptionSource::Seed;
    if !needs_refinement {
        return (
            None,
            LabelOutcome::Skipped {
                label: entry.name.clone(),
            },
        );
    }
    let examples = match pick_examples(train, &entry.name, opts.examples_per_label, opts.seed) {
        Ok(docs) => docs
            .into_iter()
            .map(|d| (d.text.clone(), d.gold_labels.clone()))
            .collect::<Vec<_>>(),
        Err(err) => {
            return (
                None,
                LabelOutcome::FellBack {
                    label: entry.name.clone(),
                    reason: err.to_string(),
                },
            )
        }
    };
    let request = RefinementRequest {
        label_name: entry.name.clone(),
        initial_description: entry.initial_text.clone(),
        dataset_blurb: opts.dataset_blurb.clone(),
        examples,
    };
    let prompt = match build_refinement_prompt(&request) {
        Ok(p) => p,
        Err(err) => {
            return (
                None,
                LabelOutcome::FellBack {
                    label: entry.name.clone(),
                    reason: err.to_string(),
                },
            )
        }
    };
    match complete_with_retry(
        client,
        &prompt,
        opts.max_tokens,
        opts.temperature,
        &opts.retry,
        sleep,
    ) {
        Ok((text, retries)) if !text.trim().is_empty() => (
            Some(text.trim().to_string()),
            LabelOutcome::Refined {
                label: entry.name.clone(),
                retries,
            },
        ),
        Ok(_) => (
            None,
            LabelOutcome::FellBack {
                label: entry.name.clone(),
                reason: "client returned empty text".to_string(),
            },
        ),
        Err(err) => (
            None,
            LabelOutcome::FellBack {
                label: entry.name.clone(),
                reason: err.to_string(),
            },
        ),
    }
}

/// Refine every label that still needs it. Returns a new catalog (the
/// input is untouched) and a per-label report. Labels whose client calls
/// ultimately fail keep their seed text as the refined description; if
/// refinement was attempted and *every* attempt failed, that is a hard
/// error.
pub fn refine_catalog(
    catalog: &LabelCatalog,
    train: &DatasetSplit,
    client: &dyn GenerationClient,
    opts: &RefineOptions,
    sleep: &mut dyn FnMut(Duration),
) -> Result<(LabelCatalog, RefineReport), DescgenError> {
    let mut out = catalog.clone();
    let mut report = RefineReport::default();
    for index in 0..catalog.len() {
        let (text, outcome) = refine_entry(catalog, index, train, client, opts, sleep);
        out = apply_outcome(out, index, text);
        report.outcomes.push(outcome);
    }
    finish_refinement(out, report)
}

/// Fold one label's refinement result into the catalog.
pub fn apply_outcome(catalog: LabelCatalog, index: usize, text: Option<String>) -> LabelCatalog {
    match text {
        Some(t) => catalog.with_refinement(index, t, DescriptionSource::Refined),
        None => {
            let entry = catalog.entry(index);
            let needs = entry.refined_text.trim().is_empty();
            if needs {
                let seed = catalog.entry(index).initial_text.clone();
                catalog.with_refinement(index, seed, DescriptionSource::Seed)
            } else {
                catalog
            }
        }
    }
}

/// Validate a completed refinement run: attempted-and-all-failed is fatal.
pub fn finish_refinement(
    catalog: LabelCatalog,
    report: RefineReport,
) -> Result<(LabelCatalog, RefineReport), DescgenError> {
    let attempted = report.outcomes.len() - report.skipped();
    if attempted > 0 && report.fallbacks() == attempted {
        return Err(DescgenError::AllLabelsFailed { attempted });
    }
    Ok((catalog, report))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DescgenError {
    LabelNotInTrain { label: String },
    NoExamples { label: String },
    ExampleMissingLabel { label: String },
    AllLabelsFailed { attempted: usize },
}

impl fmt::Display for DescgenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DescgenError::LabelNotInTrain { label } => {
                write!(f, "label {label:?} never appears in the training split")
            }
            DescgenError::NoExamples { label } => {
                write!(f, "refinement request for {label:?} carries no examples")
            }
            DescgenError::ExampleMissingLabel { label } => {
                write!(f, "an example for {label:?} does not carry that label")
            }
            DescgenError::AllLabelsFailed { attempted } => {
                write!(f, "all {attempted} refinement attempts failed")
            }
        }
    }
}

impl core::error::Error for DescgenError {}
