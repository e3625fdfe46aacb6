//! Training settings, the training driver, and artifact persistence.
//!
//! Artifact directory layout:
//!
//! ```text
//! out_dir/
//!   adapters/generator.json   # generator weights (base + any adapters)
//!   encoder/encoder.json      # sentence encoder weights
//!   lambda.json               # {"raw": .., "value": ..}
//!   log.jsonl                 # one epoch record per line
//!   train_meta.json           # template, settings snapshot, budgets, audit
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use lagamc_core::catalog::LabelCatalog;
use lagamc_core::model::{
    GeneratorConfig, GeneratorHandle, ParamCounts, ReferenceEncoder, ReferenceGenerator,
    SentenceEncoder, TextGenerator, Vocab,
};
use lagamc_core::promptkit::{PromptRecord, PromptTemplate};
use lagamc_core::trainer::{train, warmup_lm, EpochLog, TrainConfig, TrainedArtifacts};

use crate::error::{AppError, AppResult};
use crate::io;

/// Flat training configuration file: the core hyperparameters plus the
/// reference-model knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    #[serde(flatten)]
    pub core: TrainConfig,
    /// Freeze the base model and train rank-`lora_rank` adapters. Off
    /// means full fine-tuning (the small bundled model affords it).
    #[serde(default = "default_true")]
    pub lora_enabled: bool,
    /// Cross-entropy-only language-model warmup of the full base on the
    /// bare targets, before adapters attach.
    #[serde(default)]
    pub warmup_epochs: usize,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default = "default_encoder_dim")]
    pub encoder_dim: usize,
    #[serde(default = "default_true")]
    pub encoder_trainable: bool,
}

fn default_true() -> bool {
    true
}

fn default_encoder_dim() -> usize {
    48
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            core: TrainConfig::default(),
            lora_enabled: true,
            warmup_epochs: 0,
            generator: GeneratorConfig::default(),
            encoder_dim: default_encoder_dim(),
            encoder_trainable: true,
        }
    }
}

/// Everything predict needs besides the weights themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub template: PromptTemplate,
    pub settings: TrainSettings,
    pub resolved_max_input_tokens: usize,
    pub resolved_max_output_tokens: usize,
    pub vocab_fingerprint: u64,
    pub generator_params: ParamCounts,
    pub trainable_fraction: f64,
    pub final_lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LambdaFile {
    raw: f64,
    value: f64,
}

/// Loaded artifact bundle, ready for prediction.
pub struct TrainedBundle {
    pub generator: ReferenceGenerator,
    pub encoder: ReferenceEncoder,
    pub meta: TrainMeta,
    pub log: Vec<EpochLog>,
}

/// Build the vocabulary for a run: every prompt, every target, and every
/// catalog description, so labels that never appear in training targets
/// (e.g. held-out zero-shot labels) still tokenize.
pub fn build_vocab(records: &[PromptRecord], catalog: &LabelCatalog) -> Arc<Vocab> {
    let texts: Vec<&str> = records
        .iter()
        .flat_map(|r| [Some(r.prompt.as_str()), r.target.as_deref()])
        .flatten()
        .chain(catalog.entries().iter().map(|e| e.refined_text.as_str()))
        .collect();
    Arc::new(Vocab::from_texts(texts))
}

/// Run the full training stage: vocabulary, optional warmup, optional
/// adapters, hybrid-loss training, artifact persistence.
pub fn run_training(
    settings: &TrainSettings,
    records: &[PromptRecord],
    catalog: &LabelCatalog,
    template: &PromptTemplate,
    out_dir: &Path,
    verbose: bool,
) -> AppResult<TrainMeta> {
    settings
        .core
        .validate()
        .map_err(|e| AppError::validation(e.to_string()))?;
    let vocab = build_vocab(records, catalog);
    let mut generator =
        ReferenceGenerator::new(Arc::clone(&vocab), settings.generator, settings.core.seed);
    let mut encoder =
        ReferenceEncoder::new(Arc::clone(&vocab), settings.encoder_dim, settings.core.seed);
    encoder.set_trainable(settings.encoder_trainable);

    if settings.warmup_epochs > 0 {
        let targets: Vec<Vec<u32>> = records
            .iter()
            .filter_map(|r| r.target.as_deref())
            .map(|t| generator.tokenize(t))
            .collect();
        warmup_lm(
            &mut generator,
            &targets,
            settings.warmup_epochs,
            settings.core.learning_rate,
            settings.core.batch_size,
            settings.core.seed,
        )
        .map_err(|e| AppError::stage("train", e))?;
    }
    if settings.lora_enabled {
        generator.attach_lora(settings.core.lora_rank, settings.core.seed);
    }

    let artifacts = train(&settings.core, records, &mut generator, &mut encoder)
        .map_err(|e| AppError::stage("train", e))?;

    let counts = generator.param_counts();
    let meta = TrainMeta {
        template: template.clone(),
        settings: settings.clone(),
        resolved_max_input_tokens: artifacts.resolved_max_input_tokens,
        resolved_max_output_tokens: artifacts.resolved_max_output_tokens,
        vocab_fingerprint: vocab.fingerprint(),
        generator_params: counts,
        trainable_fraction: counts.trainable_fraction(),
        final_lambda: artifacts.lambda_value,
    };
    if verbose {
        eprintln!(
            "trained {} epochs: final hybrid loss {:.4}, lambda {:.4}, trainable {}/{} ({:.4}%)",
            artifacts.log.len(),
            artifacts.log.last().map(|l| l.hybrid).unwrap_or(f64::NAN),
            artifacts.lambda_value,
            counts.trainable,
            counts.total,
            100.0 * meta.trainable_fraction,
        );
    }
    save_artifacts(out_dir, &generator, &encoder, &artifacts, &meta)?;
    Ok(meta)
}

pub fn save_artifacts(
    dir: &Path,
    generator: &ReferenceGenerator,
    encoder: &ReferenceEncoder,
    artifacts: &TrainedArtifacts,
    meta: &TrainMeta,
) -> AppResult<()> {
    io::write_json(&dir.join("adapters/generator.json"), generator)?;
    io::write_json(&dir.join("encoder/encoder.json"), encoder)?;
    io::write_json(
        &dir.join("lambda.json"),
        &LambdaFile {
            raw: artifacts.lambda.raw(),
            value: artifacts.lambda_value,
        },
    )?;
    io::write_jsonl(&dir.join("log.jsonl"), &artifacts.log)?;
    io::write_json(&dir.join("train_meta.json"), meta)
}

pub fn load_artifacts(dir: &Path) -> AppResult<TrainedBundle> {
    let generator: ReferenceGenerator = io::read_json(&dir.join("adapters/generator.json"))?;
    let encoder: ReferenceEncoder = io::read_json(&dir.join("encoder/encoder.json"))?;
    let meta: TrainMeta = io::read_json(&dir.join("train_meta.json"))?;
    let log: Vec<EpochLog> = io::read_jsonl(&dir.join("log.jsonl"))?;
    if generator.vocab_fingerprint() != encoder.vocab_fingerprint() {
        return Err(AppError::validation(
            "artifact generator and encoder vocabularies disagree".to_string(),
        ));
    }
    Ok(TrainedBundle {
        generator,
        encoder,
        meta,
        log,
    })
}
