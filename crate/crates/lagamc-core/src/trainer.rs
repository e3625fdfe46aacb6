//! Supervised generative phase: fine-tune a generator on prompt/target
//! pairs under the hybrid loss, jointly adapting the sentence encoder and
//! the loss mixing weight.
//!
//! Gradients from the semantic term reach the generator through the
//! "soft embedding" of its teacher-forced output distributions (the
//! expected token embedding per position). The alternative
//! [`SemanticMode::DecodedText`] embeds the greedy decode instead, which
//! trains the encoder only.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::loss::{dot, MixingWeight};
use crate::model::{EncoderHandle, GeneratorHandle, EOS};
use crate::promptkit::PromptRecord;
use crate::rng::Rng;

/// How the generated-side embedding `v_gen` is produced during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticMode {
    /// Expected-token mixture under teacher forcing; differentiable into
    /// both the generator and the encoder.
    SoftEmbedding,
    /// Embed the greedy decode; differentiable into the encoder only.
    DecodedText,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Adapter rank used when the generator handle is built with low-rank
    /// adaptation; carried here so runs are reproducible from the config.
    pub lora_rank: usize,
    /// 0 means "derive from the dataset average, rounded up to the next
    /// multiple of 8".
    pub max_input_tokens: usize,
    /// 0 derives from the average target length the same way.
    pub max_output_tokens: usize,
    pub lambda_init: f64,
    pub semantic_mode: SemanticMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 8,
            learning_rate: 2e-4,
            lora_rank: 2,
            max_input_tokens: 0,
            max_output_tokens: 0,
            lambda_init: 0.5,
            semantic_mode: SemanticMode::SoftEmbedding,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig {
                reason: "batch_size must be positive".into(),
            });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig {
                reason: "learning_rate must be positive".into(),
            });
        }
        if self.lora_rank == 0 {
            return Err(TrainError::InvalidConfig {
                reason: "lora_rank must be positive".into(),
            });
        }
        if !(self.lambda_init > 0.0 && self.lambda_init < 1.0) {
            return Err(TrainError::InvalidConfig {
                reason: "lambda_init must lie strictly inside (0, 1)".into(),
            });
        }
        Ok(())
    }
}

/// Per-epoch record of the training trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub ce: f64,
    pub semantic: f64,
    pub hybrid: f64,
    pub lambda: f64,
}

/// What `train` returns: the final mixing weight, the per-epoch log, and
/// bookkeeping. The generator and encoder handles are updated in place;
/// persisting their weights is the caller's concern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedArtifacts {
    pub lambda: MixingWeight,
    pub lambda_value: f64,
    pub log: Vec<EpochLog>,
    pub resolved_max_input_tokens: usize,
    pub resolved_max_output_tokens: usize,
    pub truncated_inputs: usize,
    pub truncated_outputs: usize,
    /// Records whose decoded text came back empty (decoded-text mode).
    pub empty_decodes: usize,
    pub optimizer_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    InvalidConfig {
        reason: String,
    },
    EmptyDataset,
    MissingTarget {
        document_id: String,
    },
    VocabMismatch,
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        document_id: String,
    },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::InvalidConfig { reason } => write!(f, "invalid train config: {reason}"),
            TrainError::EmptyDataset => write!(f, "no prompt records to train on"),
            TrainError::MissingTarget { document_id } => {
                write!(f, "record {document_id:?} has no target")
            }
            TrainError::VocabMismatch => {
                write!(f, "generator and encoder vocabularies differ")
            }
            TrainError::NonFiniteLoss {
                epoch,
                batch,
                document_id,
            } => write!(
                f,
                "non-finite loss at epoch {epoch}, batch {batch} (document {document_id:?})"
            ),
        }
    }
}

impl core::error::Error for TrainError {}

/// Round up to the next multiple of 8, with a floor of 8.
fn budget_from_average(total_tokens: usize, n: usize) -> usize {
    if n == 0 {
        return 8;
    }
    let avg = total_tokens.div_ceil(n);
    avg.div_ceil(8).max(1) * 8
}

/// Unit-norm embedding of the generator's output for one record.
///
/// Soft mode embeds the expected-token mixture of the teacher-forced
/// distributions (positions covering the target, excluding the final
/// end-of-sequence position); decoded mode embeds the greedy decode.
/// The flag reports an empty decode (or empty target in soft mode), in
/// which case the encoder's empty-input sentinel embedding is returned.
pub fn generated_embedding(
    gen: &mut dyn GeneratorHandle,
    enc: &dyn EncoderHandle,
    prompt: &[u32],
    target: &[u32],
    mode: SemanticMode,
    max_output_tokens: usize,
) -> (Vec<f64>, bool) {
    match mode {
        SemanticMode::SoftEmbedding => {
            let fwd = gen.teacher_forward(prompt, target);
            let dists = &fwd.probs[..target.len()];
            (enc.embed_soft(dists), target.is_empty())
        }
        SemanticMode::DecodedText => {
            let text = gen.generate(prompt, max_output_tokens);
            let flagged = text.trim().is_empty();
            (enc.embed_text(&text), flagged)
        }
    }
}

/// `dL/dz` from `dL/dπ` through the softmax: `π ⊙ (g − ⟨π, g⟩)`.
pub fn softmax_backward(probs: &[f64], dprobs: &[f64]) -> Vec<f64> {
    let inner: f64 = probs.iter().zip(dprobs).map(|(p, g)| p * g).sum();
    probs
        .iter()
        .zip(dprobs)
        .map(|(p, g)| p * (g - inner))
        .collect()
}

struct Example {
    document_id: String,
    prompt: Vec<u32>,
    target: Vec<u32>,
}

/// Run the generative phase. The handles are updated in place; per-epoch
/// means of the loss terms and the λ trajectory are recorded. Two calls
/// with the same seed, config, and starting handles produce identical
/// logs and identical final weights.
pub fn train(
    config: &TrainConfig,
    records: &[PromptRecord],
    gen: &mut dyn GeneratorHandle,
    enc: &mut dyn EncoderHandle,
) -> Result<TrainedArtifacts, TrainError> {
    config.validate()?;
    if records.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if gen.vocab_fingerprint() != enc.vocab_fingerprint() {
        return Err(TrainError::VocabMismatch);
    }

    // Tokenize everything once, deriving token budgets from the data when
    // the config leaves them at 0.
    let mut tokenized: Vec<Example> = Vec::with_capacity(records.len());
    for rec in records {
        let target_text = rec
            .target
            .as_deref()
            .ok_or_else(|| TrainError::MissingTarget {
                document_id: rec.document_id.clone(),
            })?;
        if target_text.trim().is_empty() {
            return Err(TrainError::MissingTarget {
                document_id: rec.document_id.clone(),
            });
        }
        tokenized.push(Example {
            document_id: rec.document_id.clone(),
            prompt: gen.tokenize(&rec.prompt),
            target: gen.tokenize(target_text),
        });
    }
    let max_input = if config.max_input_tokens > 0 {
        config.max_input_tokens
    } else {
        budget_from_average(
            tokenized.iter().map(|e| e.prompt.len()).sum(),
            tokenized.len(),
        )
    };
    let max_output = if config.max_output_tokens > 0 {
        config.max_output_tokens
    } else {
        budget_from_average(
            tokenized.iter().map(|e| e.target.len()).sum(),
            tokenized.len(),
        )
    };
    let mut truncated_inputs = 0;
    let mut truncated_outputs = 0;
    for ex in &mut tokenized {
        if ex.prompt.len() > max_input {
            ex.prompt.truncate(max_input);
            truncated_inputs += 1;
        }
        if ex.target.len() > max_output {
            ex.target.truncate(max_output);
            truncated_outputs += 1;
        }
    }

    let mut lambda =
        MixingWeight::from_value(config.lambda_init).map_err(|_| TrainError::InvalidConfig {
            reason: "lambda_init out of range".into(),
        })?;
    let mut lam_m1 = 0.0f64;
    let mut lam_m2 = 0.0f64;
    let mut step: u64 = 0;
    let mut empty_decodes = 0usize;
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..tokenized.len()).collect();
        Rng::derive(config.seed, 1 + epoch as u64).shuffle(&mut order);

        let mut epoch_ce = 0.0;
        let mut epoch_sem = 0.0;
        let mut epoch_hybrid = 0.0;

        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            gen.zero_grad();
            enc.zero_grad();
            let mut lam_grad = 0.0f64;
            let lam_value = lambda.value();
            let weight = 1.0 / batch.len() as f64;
            let mut batch_hybrid = 0.0;
            let mut batch_doc = String::new();

            for &i in batch {
                let ex = &tokenized[i];
                let fwd = gen.teacher_forward(&ex.prompt, &ex.target);
                let n_pos = ex.target.len() + 1;

                let v_target = enc.embed_tokens(&ex.target);
                let (v_gen, grad_dists): (Vec<f64>, Option<Vec<Vec<f64>>>) =
                    match config.semantic_mode {
                        SemanticMode::SoftEmbedding => {
                            let v_gen = enc.embed_soft(&fwd.probs[..ex.target.len()]);
                            let g_vgen: Vec<f64> = v_target
                                .iter()
                                .map(|t| -(1.0 - lam_value) * weight * t)
                                .collect();
                            let grads = enc.soft_backward(&fwd.probs[..ex.target.len()], &g_vgen);
                            (v_gen, Some(grads))
                        }
                        SemanticMode::DecodedText => {
                            let text = gen.generate(&ex.prompt, max_output);
                            if text.trim().is_empty() {
                                empty_decodes += 1;
                            }
                            let v_gen = enc.embed_text(&text);
                            let g_vgen: Vec<f64> = v_target
                                .iter()
                                .map(|t| -(1.0 - lam_value) * weight * t)
                                .collect();
                            enc.tokens_backward(&gen.tokenize(&text), &g_vgen);
                            (v_gen, None)
                        }
                    };

                let ce = fwd.ce;
                let sem = 1.0 - dot(&v_gen, &v_target);
                let hybrid = lam_value * ce + (1.0 - lam_value) * sem;
                epoch_ce += ce;
                epoch_sem += sem;
                epoch_hybrid += hybrid;
                batch_hybrid += hybrid * weight;
                if !hybrid.is_finite() {
                    batch_doc = ex.document_id.clone();
                }

                // Target-side semantic gradient into the encoder.
                let g_vtar: Vec<f64> = v_gen
                    .iter()
                    .map(|g| -(1.0 - lam_value) * weight * g)
                    .collect();
                enc.tokens_backward(&ex.target, &g_vtar);

                // Mixing weight gradient.
                lam_grad += (ce - sem) * lambda.value_grad() * weight;

                // Generator gradient: cross-entropy at every position, plus
                // the semantic path through the softmax in soft mode.
                let mut grad_logits = Vec::with_capacity(n_pos);
                let ce_scale = lam_value * weight / n_pos as f64;
                for t in 0..n_pos {
                    let probs = &fwd.probs[t];
                    let predicted = if t < ex.target.len() {
                        ex.target[t]
                    } else {
                        EOS
                    } as usize;
                    let mut dz: Vec<f64> = probs.iter().map(|&p| p * ce_scale).collect();
                    dz[predicted] -= ce_scale;
                    if let Some(gd) = &grad_dists {
                        if t < gd.len() {
                            let sem_dz = softmax_backward(probs, &gd[t]);
                            for (a, b) in dz.iter_mut().zip(&sem_dz) {
                                *a += b;
                            }
                        }
                    }
                    grad_logits.push(dz);
                }
                gen.backward_logits(&grad_logits);
            }

            if !batch_hybrid.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    document_id: batch_doc,
                });
            }

            step += 1;
            gen.opt_step(config.learning_rate, step);
            enc.opt_step(config.learning_rate, step);
            adam_scalar(
                &mut lambda,
                &mut lam_m1,
                &mut lam_m2,
                lam_grad,
                config.learning_rate,
                step,
            );
        }

        let n = tokenized.len() as f64;
        log.push(EpochLog {
            epoch,
            ce: epoch_ce / n,
            semantic: epoch_sem / n,
            hybrid: epoch_hybrid / n,
            lambda: lambda.value(),
        });
    }

    Ok(TrainedArtifacts {
        lambda,
        lambda_value: lambda.value(),
        log,
        resolved_max_input_tokens: max_input,
        resolved_max_output_tokens: max_output,
        truncated_inputs,
        truncated_outputs,
        empty_decodes,
        optimizer_steps: step,
    })
}

fn adam_scalar(
    lambda: &mut MixingWeight,
    m1: &mut f64,
    m2: &mut f64,
    grad: f64,
    lr: f64,
    step: u64,
) {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let t = step as f64;
    *m1 = BETA1 * *m1 + (1.0 - BETA1) * grad;
    *m2 = BETA2 * *m2 + (1.0 - BETA2) * grad * grad;
    let mhat = *m1 / (1.0 - libm::pow(BETA1, t));
    let vhat = *m2 / (1.0 - libm::pow(BETA2, t));
    lambda.add_raw(-lr * mhat / (libm::sqrt(vhat) + EPS));
}

/// Language-model warmup: cross-entropy-only training on bare target
/// sequences (no prompt), full parameters. Run before adapters are
/// attached so the frozen base already speaks the output language and the
/// adapters only have to learn the conditioning.
pub fn warmup_lm(
    gen: &mut dyn GeneratorHandle,
    targets: &[Vec<u32>],
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    seed: u64,
) -> Result<(), TrainError> {
    if batch_size == 0 {
        return Err(TrainError::InvalidConfig {
            reason: "batch_size must be positive".into(),
        });
    }
    let mut step = 0u64;
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..targets.len()).collect();
        Rng::derive(seed, 0x7761_726d ^ (1 + epoch as u64)).shuffle(&mut order);
        for batch in order.chunks(batch_size) {
            gen.zero_grad();
            let weight = 1.0 / batch.len() as f64;
            for &i in batch {
                let target = &targets[i];
                let fwd = gen.teacher_forward(&[], target);
                let n_pos = target.len() + 1;
                let scale = weight / n_pos as f64;
                let mut grads = Vec::with_capacity(n_pos);
                for t in 0..n_pos {
                    let predicted = if t < target.len() { target[t] } else { EOS } as usize;
                    let mut dz: Vec<f64> = fwd.probs[t].iter().map(|&p| p * scale).collect();
                    dz[predicted] -= scale;
                    grads.push(dz);
                }
                gen.backward_logits(&grads);
            }
            step += 1;
            gen.opt_step(learning_rate, step);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        GeneratorConfig, ReferenceEncoder, ReferenceGenerator, TextGenerator, Vocab,
    };
    use alloc::sync::Arc;

    fn toy_records() -> Vec<PromptRecord> {
        let pairs = [
            ("north wind", "cold air moves south fast."),
            ("south sun", "warm light heats the ground."),
            ("north storm wind", "cold air moves south fast."),
            ("sun south glow", "warm light heats the ground."),
        ];
        pairs
            .iter()
            .enumerate()
            .map(|(i, (p, t))| PromptRecord {
                document_id: alloc::format!("d{i}"),
                prompt: (*p).to_string(),
                target: Some((*t).to_string()),
            })
            .collect()
    }

    fn handles(records: &[PromptRecord]) -> (ReferenceGenerator, ReferenceEncoder) {
        let vocab =
            Arc::new(Vocab::from_texts(records.iter().flat_map(|r| {
                [r.prompt.as_str(), r.target.as_deref().unwrap_or("")]
            })));
        let gen = ReferenceGenerator::new(
            Arc::clone(&vocab),
            GeneratorConfig {
                emb_dim: 12,
                hidden_dim: 20,
            },
            7,
        );
        let enc = ReferenceEncoder::new(vocab, 10, 7);
        (gen, enc)
    }

    /// Handle that reports a non-finite loss, for the abort contract.
    struct PoisonedGenerator {
        vocab: Arc<Vocab>,
    }

    impl TextGenerator for PoisonedGenerator {
        fn vocab_fingerprint(&self) -> u64 {
            self.vocab.fingerprint()
        }
        fn tokenize(&self, text: &str) -> alloc::vec::Vec<u32> {
            self.vocab.encode(text)
        }
        fn generate(&self, _prompt: &[u32], _max: usize) -> String {
            String::new()
        }
    }

    impl crate::model::GeneratorHandle for PoisonedGenerator {
        fn teacher_forward(
            &mut self,
            _prompt: &[u32],
            target: &[u32],
        ) -> crate::model::TeacherStep {
            let v = self.vocab.len();
            let uniform = alloc::vec![1.0 / v as f64; v];
            crate::model::TeacherStep {
                ce: f64::NAN,
                probs: alloc::vec![uniform; target.len() + 1],
            }
        }
        fn backward_logits(&mut self, _grad_logits: &[alloc::vec::Vec<f64>]) {}
        fn zero_grad(&mut self) {}
        fn opt_step(&mut self, _lr: f64, _step: u64) {}
        fn param_counts(&self) -> crate::model::ParamCounts {
            crate::model::ParamCounts {
                total: 0,
                trainable: 0,
            }
        }
    }

    #[test]
    fn non_finite_loss_aborts_with_the_offending_batch() {
        let records = toy_records();
        let (_, mut enc) = handles(&records);
        let vocab = Arc::clone(enc.vocab());
        let mut gen = PoisonedGenerator { vocab };
        let config = TrainConfig {
            epochs: 1,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let err = train(&config, &records, &mut gen, &mut enc).unwrap_err();
        match err {
            TrainError::NonFiniteLoss {
                epoch,
                batch,
                document_id,
            } => {
                assert_eq!((epoch, batch), (0, 0));
                assert!(!document_id.is_empty());
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn zero_epochs_returns_initial_state_and_empty_log() {
        let records = toy_records();
        let (mut gen, mut enc) = handles(&records);
        let snapshot = gen.clone();
        let config = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let artifacts = train(&config, &records, &mut gen, &mut enc).unwrap();
        assert!(artifacts.log.is_empty());
        assert_eq!(artifacts.lambda_value, 0.5);
        assert_eq!(gen, snapshot);
    }

    #[test]
    fn loss_decreases_on_toy_task() {
        let records = toy_records();
        let (mut gen, mut enc) = handles(&records);
        let config = TrainConfig {
            epochs: 15,
            batch_size: 2,
            learning_rate: 0.02,
            ..TrainConfig::default()
        };
        let artifacts = train(&config, &records, &mut gen, &mut enc).unwrap();
        let first = artifacts.log.first().unwrap().hybrid;
        let last = artifacts.log.last().unwrap().hybrid;
        assert!(last < first, "hybrid loss went {first} -> {last}");
        for entry in &artifacts.log {
            assert!(entry.lambda > 0.0 && entry.lambda < 1.0);
            assert!(entry.hybrid.is_finite());
        }
    }

    #[test]
    fn identical_seeds_produce_identical_logs() {
        let records = toy_records();
        let config = TrainConfig {
            epochs: 4,
            batch_size: 2,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let (mut gen_a, mut enc_a) = handles(&records);
        let (mut gen_b, mut enc_b) = handles(&records);
        let a = train(&config, &records, &mut gen_a, &mut enc_a).unwrap();
        let b = train(&config, &records, &mut gen_b, &mut enc_b).unwrap();
        assert_eq!(a, b);
        assert_eq!(gen_a, gen_b);
    }

    #[test]
    fn decoded_text_mode_trains_without_generator_semantic_grads() {
        let records = toy_records();
        let (mut gen, mut enc) = handles(&records);
        let config = TrainConfig {
            epochs: 3,
            batch_size: 2,
            learning_rate: 0.01,
            semantic_mode: SemanticMode::DecodedText,
            ..TrainConfig::default()
        };
        let artifacts = train(&config, &records, &mut gen, &mut enc).unwrap();
        assert_eq!(artifacts.log.len(), 3);
    }

    #[test]
    fn missing_target_is_rejected() {
        let mut records = toy_records();
        records[1].target = None;
        let (mut gen, mut enc) = handles(&toy_records());
        let err = train(&TrainConfig::default(), &records, &mut gen, &mut enc).unwrap_err();
        assert!(
            matches!(err, TrainError::MissingTarget { ref document_id } if document_id == "d1")
        );
    }

    #[test]
    fn empty_outputs_fall_back_to_the_sentinel_embedding() {
        let records = toy_records();
        let (mut gen, enc) = handles(&records);
        // soft mode with an empty target has no positions to mix
        let prompt = gen.tokenize("north wind");
        let (v, flagged) =
            generated_embedding(&mut gen, &enc, &prompt, &[], SemanticMode::SoftEmbedding, 8);
        assert!(flagged);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-9);
        // decoded mode with a zero-token budget decodes nothing
        let (v2, flagged2) =
            generated_embedding(&mut gen, &enc, &prompt, &[], SemanticMode::DecodedText, 0);
        assert!(flagged2);
        assert_eq!(v, v2);
    }

    #[test]
    fn budgets_round_up_to_multiples_of_eight() {
        assert_eq!(budget_from_average(10, 1), 16);
        assert_eq!(budget_from_average(8, 1), 8);
        assert_eq!(budget_from_average(0, 0), 8);
        assert_eq!(budget_from_average(33, 2), 24);
    }

    #[test]
    fn soft_and_decoded_agree_for_a_perfect_generator() {
        // A generator that puts all mass on the target tokens yields a soft
        // embedding equal to the decoded-text embedding of that target.
        let records = toy_records();
        let (mut gen, mut enc) = handles(&records);
        // Overfit fully so teacher-forced distributions are near one-hot.
        let targets: Vec<Vec<u32>> = records
            .iter()
            .map(|r| gen.tokenize(r.target.as_deref().unwrap()))
            .collect();
        warmup_lm(&mut gen, &targets[..1], 300, 0.05, 4, 3).unwrap();
        let (soft, _) = generated_embedding(
            &mut gen,
            &enc,
            &[],
            &targets[0],
            SemanticMode::SoftEmbedding,
            16,
        );
        let (decoded, _) = generated_embedding(
            &mut gen,
            &enc,
            &[],
            &targets[0],
            SemanticMode::DecodedText,
            16,
        );
        let cos: f64 = soft.iter().zip(&decoded).map(|(a, b)| a * b).sum();
        assert!(cos > 0.999, "cos={cos}");
        let _ = &mut enc;
    }
}
