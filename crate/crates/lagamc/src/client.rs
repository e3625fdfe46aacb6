//! Generation clients for the description-refinement stage: an HTTP
//! chat-completions client and an offline stub backed by a label→text
//! map file, plus a bounded-concurrency driver for whole-catalog
//! refinement.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use lagamc_core::catalog::{DatasetSplit, LabelCatalog};
use lagamc_core::descgen::{
    apply_outcome, finish_refinement, refine_entry, ClientError, DescgenError, GenerationClient,
    LabelOutcome, RefineOptions, RefineReport,
};

use crate::error::{AppError, AppResult};

/// Environment variable holding the API key. Keys never appear in config
/// files.
pub const API_KEY_ENV: &str = "LAGAMC_API_KEY";

/// Client for an HTTPS chat/completions-style endpoint.
#[derive(Debug, Clone)]
pub struct HttpGenerationClient {
    endpoint: String,
    model: String,
    api_key: String,
    timeout: Duration,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

impl HttpGenerationClient {
    /// Reads the API key from [`API_KEY_ENV`].
    pub fn from_env(endpoint: &str, model: &str) -> AppResult<Self> {
        let api_key = std::env::var(API_KEY_ENV).map_err(|_| {
            AppError::validation(format!("environment variable {API_KEY_ENV} is not set"))
        })?;
        Ok(HttpGenerationClient {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
            timeout: Duration::from_secs(60),
        })
    }
}

impl GenerationClient for HttpGenerationClient {
    fn complete(
        &self,
        prompt: &str,
        max_tokens: u32,
        temperature: f64,
    ) -> Result<String, ClientError> {
        let body = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            max_tokens,
            temperature,
        };
        let response = ureq::post(&self.endpoint)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .timeout(self.timeout)
            .send_json(serde_json::to_value(&body).map_err(|e| ClientError {
                message: e.to_string(),
            })?)
            .map_err(|e| ClientError {
                message: e.to_string(),
            })?;
        let parsed: ChatResponse = response.into_json().map_err(|e| ClientError {
            message: format!("bad response body: {e}"),
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ClientError {
                message: "response carried no choices".to_string(),
            })
    }
}

/// Offline stub: responses come from a JSON file mapping label names to
/// refined descriptions. The label is parsed from the prompt's
/// `Label:` line.
#[derive(Debug, Clone)]
pub struct FileStubClient {
    responses: BTreeMap<String, String>,
}

impl FileStubClient {
    pub fn load(path: &Path) -> AppResult<Self> {
        let responses: BTreeMap<String, String> = crate::io::read_json(path)?;
        Ok(FileStubClient { responses })
    }
}

impl GenerationClient for FileStubClient {
    fn complete(
        &self,
        prompt: &str,
        _max_tokens: u32,
        _temperature: f64,
    ) -> Result<String, ClientError> {
        let label = prompt
            .lines()
            .find_map(|l| l.strip_prefix("Label: "))
            .map(str::trim)
            .ok_or_else(|| ClientError {
                message: "prompt carries no Label: line".to_string(),
            })?;
        self.responses
            .get(label)
            .cloned()
            .ok_or_else(|| ClientError {
                message: format!("offline stub has no response for label {label:?}"),
            })
    }
}

type EntryOutcome = (Option<String>, LabelOutcome);

/// Refine a catalog with up to `concurrency` client calls in flight.
/// Results are merged by label index, so the outcome is identical to the
/// sequential driver regardless of scheduling; retries sleep on their
/// worker thread.
pub fn refine_catalog_bounded(
    catalog: &LabelCatalog,
    train: &DatasetSplit,
    client: &(dyn GenerationClient + Sync),
    opts: &RefineOptions,
    concurrency: usize,
) -> Result<(LabelCatalog, RefineReport), DescgenError> {
    let n = catalog.len();
    let workers = concurrency.clamp(1, n.max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Mutex<Vec<Option<EntryOutcome>>> = Mutex::new(vec![None; n]);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if index >= n {
                    break;
                }
                let mut sleep = |d: Duration| std::thread::sleep(d);
                let outcome = refine_entry(catalog, index, train, client, opts, &mut sleep);
                results.lock().expect("refine worker poisoned")[index] = Some(outcome);
            });
        }
    });

    let mut out = catalog.clone();
    let mut report = RefineReport::default();
    for slot in results.into_inner().expect("refine workers poisoned") {
        let (text, outcome) = slot.expect("every label index was processed");
        let index = report.outcomes.len();
        out = apply_outcome(out, index, text);
        report.outcomes.push(outcome);
    }
    finish_refinement(out, report)
}
