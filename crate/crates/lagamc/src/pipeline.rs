//! Resumable end-to-end pipeline: validate → (descriptions) → prompts →
//! train → predict → evaluate, with a per-run manifest, input
//! fingerprinting, and a lock file against concurrent writers.
//!
//! Every stage reads and writes plain JSON/JSONL files in the run
//! directory, so any stage can be re-run or replaced independently. A
//! completed stage is skipped on resume iff its recorded input
//! fingerprints still match; a mismatch is refused without `--force`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lagamc_core::catalog::{compute_stats, validate, DatasetSplit, LabelCatalog, SplitName};
use lagamc_core::descgen::RefineOptions;
use lagamc_core::evalkit::{
    compute_f1, label_count_table, length_buckets, rare_label_slice, DocOutcome, EvalReport,
    PredictionSet,
};
use lagamc_core::matcher::{embed_catalog, predict};
use lagamc_core::promptkit::{build_records, lint_descriptions};

use crate::artifacts::{load_artifacts, run_training, TrainSettings, TrainedBundle};
use crate::client::{refine_catalog_bounded, FileStubClient, HttpGenerationClient};
use crate::error::{AppError, AppResult};
use crate::io::{self, FieldSchema, PredictionRecord};

/// Top-level configuration for `lagamc run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub train_path: PathBuf,
    #[serde(default)]
    pub dev_path: Option<PathBuf>,
    pub test_path: PathBuf,
    pub catalog_path: PathBuf,
    pub template_path: PathBuf,
    #[serde(default)]
    pub schema: FieldSchema,
    #[serde(default)]
    pub descriptions: DescriptionsConfig,
    #[serde(default)]
    pub train: TrainSettings,
    /// Minimum best-similarity for a sentence to be assigned a label.
    #[serde(default)]
    pub threshold: Option<f32>,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionsConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub offline_stub: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub dataset_blurb: String,
    #[serde(default = "default_examples_per_label")]
    pub examples_per_label: usize,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_examples_per_label() -> usize {
    2
}
fn default_concurrency() -> usize {
    4
}
fn default_max_tokens() -> u32 {
    128
}
fn default_temperature() -> f64 {
    0.7
}

impl Default for DescriptionsConfig {
    fn default() -> Self {
        DescriptionsConfig {
            enabled: false,
            offline_stub: None,
            endpoint: None,
            model: None,
            dataset_blurb: String::new(),
            examples_per_label: default_examples_per_label(),
            concurrency: default_concurrency(),
            max_tokens: default_max_tokens(),
            temperature: default_temperature(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    #[serde(default = "default_rare_fraction")]
    pub rare_fraction: f64,
    #[serde(default = "default_buckets")]
    pub buckets: usize,
    #[serde(default = "default_max_k")]
    pub max_k: usize,
}

fn default_rare_fraction() -> f64 {
    0.15
}
fn default_buckets() -> usize {
    4
}
fn default_max_k() -> usize {
    5
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            rare_fraction: default_rare_fraction(),
            buckets: default_buckets(),
            max_k: default_max_k(),
        }
    }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

pub const STAGES: [&str; 6] = [
    "validate",
    "descriptions",
    "prompts",
    "train",
    "predict",
    "evaluate",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    Failed,
    Skipped,
}

/// One stage execution record. Records are appended, never rewritten; the
/// latest record per stage is the authoritative state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub input_fingerprints: BTreeMap<String, String>,
    pub output_fingerprints: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_unix_ms: u64,
    pub config_snapshot: RunConfig,
    pub records: Vec<StageRecord>,
}

impl RunManifest {
    pub fn last_completed(&self, stage: &str) -> Option<&StageRecord> {
        self.records
            .iter()
            .rev()
            .find(|r| r.stage == stage && r.status == StageStatus::Completed)
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// sha256 of a file, or of a directory's sorted (path, file-hash) pairs.
pub fn fingerprint_path(path: &Path) -> AppResult<String> {
    if path.is_dir() {
        let mut entries = Vec::new();
        collect_files(path, path, &mut entries)?;
        entries.sort();
        let mut hasher = Sha256::new();
        for (rel, hash) in entries {
            hasher.update(rel.as_bytes());
            hasher.update([0u8]);
            hasher.update(hash.as_bytes());
            hasher.update([0u8]);
        }
        Ok(format!("sha256:{:x}", hasher.finalize()))
    } else {
        let bytes = fs::read(path).map_err(|source| AppError::Read {
            path: path.into(),
            source,
        })?;
        Ok(format!("sha256:{:x}", Sha256::digest(&bytes)))
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> AppResult<()> {
    let read = fs::read_dir(dir).map_err(|source| AppError::Read {
        path: dir.into(),
        source,
    })?;
    for entry in read {
        let entry = entry.map_err(|source| AppError::Read {
            path: dir.into(),
            source,
        })?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .unwrap_or(&path)
                .to_string_lossy()
                .into_owned();
            let bytes = fs::read(&path).map_err(|source| AppError::Read {
                path: path.clone(),
                source,
            })?;
            out.push((rel, format!("sha256:{:x}", Sha256::digest(&bytes))));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Lock file
// ---------------------------------------------------------------------------

struct RunLock {
    path: PathBuf,
}

impl RunLock {
    fn acquire(run_dir: &Path, force: bool) -> AppResult<Self> {
        let path = run_dir.join("run.lock");
        if force && path.exists() {
            let _ = fs::remove_file(&path);
        }
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                let _ = writeln!(f, "{}", std::process::id());
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(AppError::validation(format!(
                    "run directory is locked by {} (remove it or pass --force if the owner is gone)",
                    path.display()
                )))
            }
            Err(source) => Err(AppError::Write { path, source }),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct StagePlan {
    name: &'static str,
    /// Input files whose fingerprints gate resumption.
    inputs: Vec<PathBuf>,
    /// Digest of the slice of the run config this stage depends on;
    /// changing it invalidates the stage the same way a file edit does.
    config_digest: String,
    /// Outputs fingerprinted on completion (and required to exist when
    /// the stage is skipped).
    outputs: Vec<PathBuf>,
    enabled: bool,
}

fn digest_config<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).unwrap_or_default();
    format!("sha256:{:x}", Sha256::digest(&json))
}

/// Paths of every stage artifact inside a run directory.
pub struct RunPaths {
    pub manifest: PathBuf,
    pub validation: PathBuf,
    pub refined_catalog: PathBuf,
    pub prompts: PathBuf,
    pub artifacts_dir: PathBuf,
    pub predictions: PathBuf,
    pub report: PathBuf,
}

impl RunPaths {
    pub fn new(run_dir: &Path) -> Self {
        RunPaths {
            manifest: run_dir.join("manifest.json"),
            validation: run_dir.join("validation.json"),
            refined_catalog: run_dir.join("catalog.refined.json"),
            prompts: run_dir.join("prompts.jsonl"),
            artifacts_dir: run_dir.join("artifacts"),
            predictions: run_dir.join("predictions.jsonl"),
            report: run_dir.join("report.json"),
        }
    }
}

/// Execute (or resume) the pipeline described by the config file.
pub fn run_pipeline(
    config_path: &Path,
    run_dir: &Path,
    force: bool,
    verbose: bool,
) -> AppResult<RunManifest> {
    let config: RunConfig = io::read_json(config_path)?;
    for (label, path) in [
        ("train_path", &config.train_path),
        ("test_path", &config.test_path),
        ("catalog_path", &config.catalog_path),
        ("template_path", &config.template_path),
    ] {
        if !path.exists() {
            return Err(AppError::validation(format!(
                "config {label} points at missing file {}",
                path.display()
            )));
        }
    }
    fs::create_dir_all(run_dir).map_err(|source| AppError::Write {
        path: run_dir.into(),
        source,
    })?;
    let _lock = RunLock::acquire(run_dir, force)?;
    let paths = RunPaths::new(run_dir);

    let mut manifest = if paths.manifest.exists() {
        let existing: RunManifest = io::read_json(&paths.manifest)?;
        if existing.config_snapshot != config && !force {
            return Err(AppError::validation(
                "run directory was created from a different config (pass --force to restart)"
                    .to_string(),
            ));
        }
        RunManifest {
            config_snapshot: config.clone(),
            ..existing
        }
    } else {
        RunManifest {
            run_id: format!(
                "run-{:x}",
                Sha256::digest(fs::read(config_path).map_err(|source| AppError::Read {
                    path: config_path.into(),
                    source
                },)?)
            )
            .chars()
            .take(16)
            .collect(),
            created_unix_ms: now_ms(),
            config_snapshot: config.clone(),
            records: Vec::new(),
        }
    };

    let catalog_for_downstream = if config.descriptions.enabled {
        paths.refined_catalog.clone()
    } else {
        config.catalog_path.clone()
    };

    let plans = [
        StagePlan {
            name: "validate",
            inputs: vec![
                config.train_path.clone(),
                config.test_path.clone(),
                config.catalog_path.clone(),
                config.template_path.clone(),
            ],
            config_digest: digest_config(&(&config.schema, &config.dev_path)),
            outputs: vec![paths.validation.clone()],
            enabled: true,
        },
        StagePlan {
            name: "descriptions",
            inputs: vec![config.catalog_path.clone(), config.train_path.clone()],
            config_digest: digest_config(&(&config.descriptions, config.train.core.seed)),
            outputs: vec![paths.refined_catalog.clone()],
            enabled: config.descriptions.enabled,
        },
        StagePlan {
            name: "prompts",
            inputs: vec![
                config.train_path.clone(),
                catalog_for_downstream.clone(),
                config.template_path.clone(),
            ],
            config_digest: digest_config(&config.schema),
            outputs: vec![paths.prompts.clone()],
            enabled: true,
        },
        StagePlan {
            name: "train",
            inputs: vec![paths.prompts.clone(), catalog_for_downstream.clone()],
            config_digest: digest_config(&config.train),
            outputs: vec![paths.artifacts_dir.clone()],
            enabled: true,
        },
        StagePlan {
            name: "predict",
            inputs: vec![
                paths.artifacts_dir.clone(),
                catalog_for_downstream.clone(),
                config.test_path.clone(),
            ],
            config_digest: digest_config(&(&config.schema, config.threshold)),
            outputs: vec![paths.predictions.clone()],
            enabled: true,
        },
        StagePlan {
            name: "evaluate",
            inputs: vec![
                paths.predictions.clone(),
                config.test_path.clone(),
                catalog_for_downstream.clone(),
                config.train_path.clone(),
            ],
            config_digest: digest_config(&(&config.schema, &config.eval)),
            outputs: vec![paths.report.clone()],
            enabled: true,
        },
    ];

    let mut dirty = false;
    for plan in &plans {
        if !plan.enabled {
            continue;
        }
        let mut current_inputs = fingerprints_of(&plan.inputs)?;
        current_inputs.insert("<config>".to_string(), plan.config_digest.clone());
        if !dirty {
            if let Some(record) = manifest.last_completed(plan.name) {
                let outputs_present = plan.outputs.iter().all(|p| p.exists());
                if record.input_fingerprints == current_inputs && outputs_present {
                    if verbose {
                        eprintln!("stage {}: up to date, skipped", plan.name);
                    }
                    continue;
                }
                if !force && outputs_present {
                    return Err(AppError::validation(format!(
                        "stage {} inputs changed since it completed; pass --force to re-run",
                        plan.name
                    )));
                }
            }
        }

        let started = now_ms();
        if verbose {
            eprintln!("stage {}: running", plan.name);
        }
        let result = execute_stage(plan.name, &config, &paths, &catalog_for_downstream, verbose);
        match result {
            Ok(()) => {
                let record = StageRecord {
                    stage: plan.name.to_string(),
                    status: StageStatus::Completed,
                    started_unix_ms: started,
                    finished_unix_ms: now_ms(),
                    input_fingerprints: current_inputs,
                    output_fingerprints: fingerprints_of(&plan.outputs)?,
                    error: None,
                };
                manifest.records.push(record);
                io::write_json(&paths.manifest, &manifest)?;
                dirty = true;
            }
            Err(err) => {
                let record = StageRecord {
                    stage: plan.name.to_string(),
                    status: StageStatus::Failed,
                    started_unix_ms: started,
                    finished_unix_ms: now_ms(),
                    input_fingerprints: current_inputs,
                    output_fingerprints: BTreeMap::new(),
                    error: Some(err.to_string()),
                };
                manifest.records.push(record);
                io::write_json(&paths.manifest, &manifest)?;
                return Err(match err {
                    e @ AppError::Stage { .. } => e,
                    other => AppError::stage(plan.name, other),
                });
            }
        }
    }
    Ok(manifest)
}

fn fingerprints_of(paths: &[PathBuf]) -> AppResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for p in paths {
        if p.exists() {
            map.insert(p.to_string_lossy().into_owned(), fingerprint_path(p)?);
        }
    }
    Ok(map)
}

fn execute_stage(
    name: &str,
    config: &RunConfig,
    paths: &RunPaths,
    catalog_path: &Path,
    verbose: bool,
) -> AppResult<()> {
    match name {
        "validate" => stage_validate(config, paths),
        "descriptions" => stage_descriptions(config, paths),
        "prompts" => stage_prompts(config, paths, catalog_path),
        "train" => stage_train(config, paths, catalog_path, verbose),
        "predict" => stage_predict(config, paths, catalog_path),
        "evaluate" => stage_evaluate(config, paths, catalog_path),
        other => Err(AppError::stage(
            "pipeline",
            format!("unknown stage {other}"),
        )),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ValidationFile {
    stats: lagamc_core::catalog::DatasetStats,
    train_issues: lagamc_core::catalog::ValidationReport,
    test_issues: lagamc_core::catalog::ValidationReport,
    catalog_lint: Vec<lagamc_core::promptkit::LintWarning>,
}

fn stage_validate(config: &RunConfig, paths: &RunPaths) -> AppResult<()> {
    let catalog = io::load_catalog(&config.catalog_path)?;
    let train = io::load_dataset(&config.train_path, &config.schema, SplitName::Train)?;
    let test = io::load_dataset(&config.test_path, &config.schema, SplitName::Test)?;
    let dev = config
        .dev_path
        .as_ref()
        .map(|p| io::load_dataset(p, &config.schema, SplitName::Dev))
        .transpose()?;
    io::load_template(&config.template_path)?;
    if train.is_empty() {
        return Err(AppError::validation("training split is empty"));
    }
    if test.is_empty() {
        return Err(AppError::validation("test split is empty"));
    }
    let train_issues = validate(&train, &catalog);
    let test_issues = validate(&test, &catalog);
    // Unknown labels or empty texts in the training split make targets
    // unbuildable; empty gold sets there are equally fatal. The test
    // split only has to be promptable. Fail on the first problem.
    if let Some(issue) = train_issues.issues.first() {
        use lagamc_core::catalog::ValidationIssue::*;
        let message = match issue {
            UnknownLabel { document_id, label } => {
                format!("train document {document_id:?} carries unknown label {label:?}")
            }
            EmptyText { document_id } => {
                format!("train document {document_id:?} has empty text")
            }
            EmptyGoldSet { document_id } => {
                format!(
                    "train document {document_id:?} has no gold labels (no target can be built)"
                )
            }
        };
        return Err(AppError::validation(message));
    }
    let file = ValidationFile {
        stats: compute_stats(&train, dev.as_ref(), &test, &catalog),
        train_issues,
        test_issues,
        catalog_lint: lint_descriptions(&catalog),
    };
    io::write_json(&paths.validation, &file)
}

fn stage_descriptions(config: &RunConfig, paths: &RunPaths) -> AppResult<()> {
    let catalog = io::load_catalog(&config.catalog_path)?;
    let train = io::load_dataset(&config.train_path, &config.schema, SplitName::Train)?;
    let dc = &config.descriptions;
    let opts = RefineOptions {
        examples_per_label: dc.examples_per_label,
        seed: config.train.core.seed,
        max_tokens: dc.max_tokens,
        temperature: dc.temperature,
        dataset_blurb: dc.dataset_blurb.clone(),
        ..RefineOptions::default()
    };
    let (refined, report) = if let Some(stub_path) = &dc.offline_stub {
        let client = FileStubClient::load(stub_path)?;
        refine_catalog_bounded(&catalog, &train, &client, &opts, dc.concurrency)
    } else {
        let endpoint = dc.endpoint.as_deref().ok_or_else(|| {
            AppError::validation("descriptions.enabled requires endpoint or offline_stub")
        })?;
        let model = dc.model.as_deref().ok_or_else(|| {
            AppError::validation("descriptions.endpoint requires descriptions.model")
        })?;
        let client = HttpGenerationClient::from_env(endpoint, model)?;
        refine_catalog_bounded(&catalog, &train, &client, &opts, dc.concurrency)
    }
    .map_err(|e| AppError::stage("descriptions", e))?;
    io::save_catalog(&paths.refined_catalog, &refined)?;
    io::write_json(
        &paths.refined_catalog.with_extension("report.json"),
        &report,
    )
}

fn stage_prompts(config: &RunConfig, paths: &RunPaths, catalog_path: &Path) -> AppResult<()> {
    let catalog = io::load_catalog(catalog_path)?;
    let train = io::load_dataset(&config.train_path, &config.schema, SplitName::Train)?;
    let template = io::load_template(&config.template_path)?;
    let records =
        build_records(&template, &train, &catalog).map_err(|e| AppError::stage("prompts", e))?;
    io::save_prompts(&paths.prompts, &records)
}

fn stage_train(
    config: &RunConfig,
    paths: &RunPaths,
    catalog_path: &Path,
    verbose: bool,
) -> AppResult<()> {
    let catalog = io::load_catalog(catalog_path)?;
    let records = io::load_prompts(&paths.prompts)?;
    let template = io::load_template(&config.template_path)?;
    run_training(
        &config.train,
        &records,
        &catalog,
        &template,
        &paths.artifacts_dir,
        verbose,
    )?;
    Ok(())
}

fn stage_predict(config: &RunConfig, paths: &RunPaths, catalog_path: &Path) -> AppResult<()> {
    let catalog = io::load_catalog(catalog_path)?;
    let test = io::load_dataset(&config.test_path, &config.schema, SplitName::Test)?;
    let bundle = load_artifacts(&paths.artifacts_dir)?;
    let records = predict_split(&bundle, &catalog, &test, config.threshold)?;
    io::save_predictions(&paths.predictions, &records)
}

/// Predict every document of a split with a trained bundle.
pub fn predict_split(
    bundle: &TrainedBundle,
    catalog: &LabelCatalog,
    split: &DatasetSplit,
    threshold: Option<f32>,
) -> AppResult<Vec<PredictionRecord>> {
    let labels =
        embed_catalog(&bundle.encoder, catalog).map_err(|e| AppError::stage("predict", e))?;
    let mut out = Vec::with_capacity(split.len());
    for doc in &split.documents {
        let result = predict(
            doc,
            &bundle.generator,
            &bundle.encoder,
            catalog,
            &labels,
            &bundle.meta.template,
            threshold,
            bundle.meta.resolved_max_output_tokens,
        )
        .map_err(|e| AppError::stage("predict", e))?;
        out.push(result.into());
    }
    Ok(out)
}

fn stage_evaluate(config: &RunConfig, paths: &RunPaths, catalog_path: &Path) -> AppResult<()> {
    let catalog = io::load_catalog(catalog_path)?;
    let test = io::load_dataset(&config.test_path, &config.schema, SplitName::Test)?;
    let train = io::load_dataset(&config.train_path, &config.schema, SplitName::Train)?;
    let predictions = io::load_predictions(&paths.predictions)?;
    let report = evaluate_predictions(&test, &predictions, &catalog, Some(&train), &config.eval)?;
    io::write_json(&paths.report, &report)
}

/// Join gold and predicted label sets by document id and compute the full
/// report (headline metrics plus the configured slices).
pub fn evaluate_predictions(
    gold: &DatasetSplit,
    predictions: &[PredictionRecord],
    catalog: &LabelCatalog,
    train: Option<&DatasetSplit>,
    eval: &EvalConfig,
) -> AppResult<EvalReport> {
    let mut by_id: BTreeMap<&str, &PredictionRecord> = BTreeMap::new();
    for p in predictions {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(AppError::validation(format!(
                "duplicate prediction for document {:?}",
                p.id
            )));
        }
    }
    let mut docs = Vec::with_capacity(gold.len());
    for doc in &gold.documents {
        let pred = by_id.remove(doc.id.as_str()).ok_or_else(|| {
            AppError::validation(format!("no prediction for document {:?}", doc.id))
        })?;
        docs.push(DocOutcome {
            id: doc.id.clone(),
            gold: doc.gold_labels.clone(),
            predicted: pred.labels.clone(),
        });
    }
    if let Some((id, _)) = by_id.into_iter().next() {
        return Err(AppError::validation(format!(
            "prediction for unknown document {id:?}"
        )));
    }
    let preds = PredictionSet::new(docs);
    let mut report = compute_f1(&preds, catalog).map_err(|e| AppError::stage("evaluate", e))?;
    report.label_count_table = Some(label_count_table(&preds, eval.max_k));
    if eval.buckets > 0 {
        report.buckets = Some(
            length_buckets(&preds, catalog, eval.buckets)
                .map_err(|e| AppError::stage("evaluate", e))?,
        );
    }
    if let Some(train) = train {
        report.rare = Some(
            rare_label_slice(train, &preds, catalog, eval.rare_fraction)
                .map_err(|e| AppError::stage("evaluate", e))?,
        );
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Inspect
// ---------------------------------------------------------------------------

/// Human-readable run summary: stage table plus headline metrics.
pub fn inspect(run_dir: &Path) -> AppResult<String> {
    let paths = RunPaths::new(run_dir);
    if !paths.manifest.exists() {
        return Err(AppError::validation(format!(
            "no manifest in {} (not a run directory?)",
            run_dir.display()
        )));
    }
    let manifest: RunManifest = io::read_json(&paths.manifest)
        .map_err(|e| AppError::validation(format!("corrupt manifest: {e}")))?;
    let mut out = String::new();
    out.push_str(&format!("run {}\n", manifest.run_id));
    out.push_str("stage         status     duration\n");
    for stage in STAGES {
        let line = match manifest.records.iter().rev().find(|r| r.stage == stage) {
            Some(r) => {
                let secs = (r.finished_unix_ms.saturating_sub(r.started_unix_ms)) as f64 / 1000.0;
                let status = match r.status {
                    StageStatus::Completed => "completed",
                    StageStatus::Failed => "failed",
                    StageStatus::Skipped => "skipped",
                };
                format!("{stage:<13} {status:<10} {secs:.2}s\n")
            }
            None => format!("{stage:<13} pending\n"),
        };
        out.push_str(&line);
    }
    if paths.report.exists() {
        let report: EvalReport = io::read_json(&paths.report)?;
        out.push_str(&format!("micro_f1 {:.4}\n", report.micro_f1));
        out.push_str(&format!("macro_f1 {:.4}\n", report.macro_f1));
    }
    Ok(out)
}

/// Stats for the `stats` subcommand.
pub fn dataset_stats(
    train_path: &Path,
    dev_path: Option<&Path>,
    test_path: &Path,
    catalog_path: &Path,
    schema: &FieldSchema,
) -> AppResult<lagamc_core::catalog::DatasetStats> {
    let catalog = io::load_catalog(catalog_path)?;
    let train = io::load_dataset(train_path, schema, SplitName::Train)?;
    let test = io::load_dataset(test_path, schema, SplitName::Test)?;
    let dev = dev_path
        .map(|p| io::load_dataset(p, schema, SplitName::Dev))
        .transpose()?;
    Ok(compute_stats(&train, dev.as_ref(), &test, &catalog))
}

/// Config file for standalone `lagamc train`: the flat training settings
/// plus the catalog and template the artifacts must be built against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainCliConfig {
    #[serde(flatten)]
    pub settings: TrainSettings,
    pub catalog_path: PathBuf,
    pub template_path: PathBuf,
}
