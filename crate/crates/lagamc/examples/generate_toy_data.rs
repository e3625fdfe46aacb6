//! Regenerate the bundled toy dataset under `data/toy/`.
//!
//! ```text
//! cargo run -p lagamc --example generate_toy_data
//! ```
//!
//! The output is deterministic; a test guards that the committed files
//! stay in sync with the generator.

use std::path::Path;

use lagamc_core::synthetic;
use lagamc_core::trainer::TrainConfig;

use lagamc::artifacts::TrainSettings;
use lagamc::io;
use lagamc::pipeline::{DescriptionsConfig, EvalConfig, RunConfig};

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let dir = root.join("data/toy");
    std::fs::create_dir_all(&dir).expect("create data/toy");

    let (catalog, train) = synthetic::toy_dataset(4, 50, 42);
    let template = synthetic::toy_template();

    io::save_catalog(&dir.join("catalog.json"), &catalog).unwrap();
    io::save_dataset(&dir.join("train.jsonl"), &train).unwrap();
    io::save_template(&dir.join("template.json"), &template).unwrap();

    // The toy run evaluates the model on its own training set; the small
    // bundled generator is fully fine-tuned (no adapters) at a learning
    // rate suited to its size.
    let config = RunConfig {
        train_path: "data/toy/train.jsonl".into(),
        dev_path: None,
        test_path: "data/toy/train.jsonl".into(),
        catalog_path: "data/toy/catalog.json".into(),
        template_path: "data/toy/template.json".into(),
        schema: io::FieldSchema::default(),
        descriptions: DescriptionsConfig::default(),
        train: TrainSettings {
            core: TrainConfig {
                learning_rate: 0.05,
                ..TrainConfig::default()
            },
            lora_enabled: false,
            warmup_epochs: 0,
            ..TrainSettings::default()
        },
        threshold: None,
        eval: EvalConfig::default(),
    };
    io::write_json(&dir.join("config.json"), &config).unwrap();

    println!("wrote {}", dir.display());
}
