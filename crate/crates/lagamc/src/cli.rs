//! The `lagamc` command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use lagamc_core::catalog::SplitName;
use lagamc_core::descgen::RefineOptions;
use lagamc_core::evalkit::zero_shot_split;

use crate::artifacts::load_artifacts;
use crate::client::{refine_catalog_bounded, FileStubClient, HttpGenerationClient};
use crate::error::{AppError, AppResult};
use crate::io::{self, FieldSchema};
use crate::pipeline::{
    self, dataset_stats, evaluate_predictions, run_pipeline, EvalConfig, TrainCliConfig,
};

#[derive(Parser)]
#[command(
    name = "lagamc",
    version,
    about = "Generative multi-label text classification: train a description generator, match generated descriptions to labels, evaluate"
)]
pub struct Cli {
    /// Override the seed used by seeded subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print progress details to stderr.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct SchemaArgs {
    /// Field name holding the document id.
    #[arg(long, default_value = "id")]
    pub schema_id: String,
    /// Field name holding the document text.
    #[arg(long, default_value = "text")]
    pub schema_text: String,
    /// Field name holding the label array.
    #[arg(long, default_value = "labels")]
    pub schema_labels: String,
}

impl SchemaArgs {
    fn to_schema(&self) -> FieldSchema {
        FieldSchema {
            id: self.schema_id.clone(),
            text: self.schema_text.clone(),
            labels: self.schema_labels.clone(),
        }
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Dataset statistics (counts, max labels per sample, description lengths).
    Stats {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Refine seed label descriptions with a generation client.
    PrepareDescriptions {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Offline label→description JSON map instead of a live endpoint.
        #[arg(long)]
        offline_stub: Option<PathBuf>,
        /// Chat-completions endpoint URL (API key via LAGAMC_API_KEY).
        #[arg(long)]
        endpoint: Option<String>,
        /// Model name sent to the endpoint.
        #[arg(long)]
        model: Option<String>,
        /// One-line dataset description included in every prompt.
        #[arg(long, default_value = "")]
        blurb: String,
        #[arg(long, default_value_t = 2)]
        examples_per_label: usize,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Assemble prompt/target records for a training split.
    BuildPrompts {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Train the generator and encoder on prompt records.
    Train {
        /// Flat JSON config (training settings + catalog/template paths).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Predict labels for a dataset with trained artifacts.
    Predict {
        #[arg(long)]
        artifacts: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Minimum best similarity required to assign any label.
        #[arg(long)]
        threshold: Option<f32>,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Time the batched vs sequential similarity paths.
    BenchMatcher {
        #[arg(long, default_value_t = 10_000)]
        sentences: usize,
        #[arg(long, default_value_t = 1_000)]
        labels: usize,
        #[arg(long, default_value_t = 1_024)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Score predictions against gold labels.
    Evaluate {
        /// Gold dataset (JSONL).
        #[arg(long)]
        gold: PathBuf,
        /// Predictions (JSONL, as written by predict).
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Rare-label fraction; requires --train for frequencies.
        #[arg(long)]
        rare: Option<f64>,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        buckets: usize,
        #[arg(long, default_value_t = 5)]
        max_k: usize,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Build a zero-shot variant: hold labels out of training entirely.
    SplitZeroshot {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
    },
    /// Execute the full pipeline from a run config, resumably.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        run_dir: PathBuf,
        /// Re-run stages whose inputs changed (and break stale locks).
        #[arg(long)]
        force: bool,
    },
    /// Summarize a run directory: stage table and headline metrics.
    Inspect { run_dir: PathBuf },
}

pub fn execute(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Stats {
            train,
            dev,
            test,
            catalog,
            schema,
        } => {
            let stats =
                dataset_stats(&train, dev.as_deref(), &test, &catalog, &schema.to_schema())?;
            print_json(&stats)
        }
        Command::PrepareDescriptions {
            catalog,
            train,
            out,
            offline_stub,
            endpoint,
            model,
            blurb,
            examples_per_label,
            concurrency,
            schema,
        } => {
            let catalog_data = io::load_catalog(&catalog)?;
            let train_data = io::load_dataset(&train, &schema.to_schema(), SplitName::Train)?;
            let opts = RefineOptions {
                examples_per_label,
                seed: cli.seed.unwrap_or(42),
                dataset_blurb: blurb,
                ..RefineOptions::default()
            };
            let (refined, report) = if let Some(stub) = offline_stub {
                let client = FileStubClient::load(&stub)?;
                refine_catalog_bounded(&catalog_data, &train_data, &client, &opts, concurrency)
            } else {
                let endpoint = endpoint
                    .ok_or_else(|| AppError::validation("pass --offline-stub or --endpoint"))?;
                let model =
                    model.ok_or_else(|| AppError::validation("--endpoint requires --model"))?;
                let client = HttpGenerationClient::from_env(&endpoint, &model)?;
                refine_catalog_bounded(&catalog_data, &train_data, &client, &opts, concurrency)
            }
            .map_err(|e| AppError::stage("prepare-descriptions", e))?;
            io::save_catalog(&out, &refined)?;
            if cli.verbose {
                eprintln!(
                    "refined {}, skipped {}, fallbacks {}",
                    report.refined(),
                    report.skipped(),
                    report.fallbacks()
                );
            }
            Ok(())
        }
        Command::BuildPrompts {
            train,
            catalog,
            template,
            out,
            schema,
        } => {
            let catalog_data = io::load_catalog(&catalog)?;
            let train_data = io::load_dataset(&train, &schema.to_schema(), SplitName::Train)?;
            let template_data = io::load_template(&template)?;
            let records =
                lagamc_core::promptkit::build_records(&template_data, &train_data, &catalog_data)
                    .map_err(|e| AppError::validation(e.to_string()))?;
            io::save_prompts(&out, &records)
        }
        Command::Train {
            config,
            prompts,
            out_dir,
        } => {
            let mut cfg: TrainCliConfig = io::read_json(&config)?;
            if let Some(seed) = cli.seed {
                cfg.settings.core.seed = seed;
            }
            let catalog = io::load_catalog(&cfg.catalog_path)?;
            let template = io::load_template(&cfg.template_path)?;
            let records = io::load_prompts(&prompts)?;
            let meta = crate::artifacts::run_training(
                &cfg.settings,
                &records,
                &catalog,
                &template,
                &out_dir,
                cli.verbose,
            )?;
            print_json(&meta)
        }
        Command::Predict {
            artifacts,
            catalog,
            input,
            out,
            threshold,
            schema,
        } => {
            let bundle = load_artifacts(&artifacts)?;
            let catalog_data = io::load_catalog(&catalog)?;
            let input_data = io::load_dataset(&input, &schema.to_schema(), SplitName::Test)?;
            let records = pipeline::predict_split(&bundle, &catalog_data, &input_data, threshold)?;
            io::save_predictions(&out, &records)
        }
        Command::BenchMatcher {
            sentences,
            labels,
            dim,
            repeats,
        } => {
            let report =
                crate::bench::run_bench(sentences, labels, dim, repeats, cli.seed.unwrap_or(42))?;
            print_json(&report)
        }
        Command::Evaluate {
            gold,
            pred,
            catalog,
            out,
            rare,
            train,
            buckets,
            max_k,
            schema,
        } => {
            let schema = schema.to_schema();
            let gold_data = io::load_dataset(&gold, &schema, SplitName::Test)?;
            let pred_data = io::load_predictions(&pred)?;
            let catalog_data = io::load_catalog(&catalog)?;
            let train_data = train
                .map(|p| io::load_dataset(&p, &schema, SplitName::Train))
                .transpose()?;
            if rare.is_some() && train_data.is_none() {
                return Err(AppError::validation(
                    "--rare needs --train to compute label frequencies",
                ));
            }
            let eval = EvalConfig {
                rare_fraction: rare.unwrap_or(0.15),
                buckets,
                max_k,
            };
            let report = evaluate_predictions(
                &gold_data,
                &pred_data,
                &catalog_data,
                train_data.as_ref(),
                &eval,
            )?;
            io::write_json(&out, &report)?;
            eprintln!(
                "micro_f1 {:.4} macro_f1 {:.4}",
                report.micro_f1, report.macro_f1
            );
            Ok(())
        }
        Command::SplitZeroshot {
            train,
            test,
            catalog,
            n,
            out_dir,
            schema,
        } => {
            let schema = schema.to_schema();
            let train_data = io::load_dataset(&train, &schema, SplitName::Train)?;
            let test_data = io::load_dataset(&test, &schema, SplitName::Test)?;
            let catalog_data = io::load_catalog(&catalog)?;
            let zs = zero_shot_split(
                &train_data,
                &test_data,
                &catalog_data,
                n,
                cli.seed.unwrap_or(42),
            )
            .map_err(|e| AppError::validation(e.to_string()))?;
            std::fs::create_dir_all(&out_dir).map_err(|source| AppError::Write {
                path: out_dir.clone(),
                source,
            })?;
            io::save_dataset(&out_dir.join("train.jsonl"), &zs.train)?;
            io::save_dataset(&out_dir.join("test.jsonl"), &test_data)?;
            io::write_json(&out_dir.join("unseen.json"), &zs.unseen_labels)?;
            if cli.verbose {
                eprintln!(
                    "held out {:?}; training split {} -> {} documents",
                    zs.unseen_labels,
                    train_data.len(),
                    zs.train.len()
                );
            }
            Ok(())
        }
        Command::Run {
            config,
            run_dir,
            force,
        } => {
            let manifest = run_pipeline(&config, &run_dir, force, cli.verbose)?;
            let completed = manifest
                .records
                .iter()
                .filter(|r| r.status == pipeline::StageStatus::Completed)
                .count();
            eprintln!("run {} ok ({completed} stage records)", manifest.run_id);
            Ok(())
        }
        Command::Inspect { run_dir } => {
            let summary = pipeline::inspect(&run_dir)?;
            print!("{summary}");
            Ok(())
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> AppResult<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| AppError::validation(e.to_string()))?;
    println!("{text}");
    Ok(())
}
