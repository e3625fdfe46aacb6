//! Deterministic synthetic datasets for tests, demos, and the bundled toy
//! pipeline configuration.
//!
//! Eight labels, each with a token-disjoint description and a small set of
//! document keywords. Texts are templated so the gold labels are fully
//! recoverable from the keywords, which lets a small model learn the task
//! quickly while still exercising multi-label targets.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::catalog::{CatalogEntry, DatasetSplit, Document, LabelCatalog, SplitName};
use crate::promptkit::PromptTemplate;
use crate::rng::Rng;

/// (label, description, document keywords)
const LABEL_BANK: [(&str, &str, [&str; 3]); 8] = [
    (
        "solar",
        "Solar beacons absorb bright noon rays.",
        ["sunlit", "heliostat", "panels"],
    ),
    (
        "lunar",
        "Lunar craters reflect pale night glow.",
        ["moonrise", "crescent", "orbiters"],
    ),
    (
        "tidal",
        "Tidal currents drag salty shore foam.",
        ["seawall", "estuary", "breakers"],
    ),
    (
        "polar",
        "Polar glaciers trap ancient frozen layers.",
        ["icecap", "tundra", "floes"],
    ),
    (
        "magma",
        "Magma vents spew molten crimson sparks.",
        ["lavafield", "caldera", "eruptions"],
    ),
    (
        "storm",
        "Storm fronts hurl jagged thunder bolts.",
        ["rainband", "squall", "gusts"],
    ),
    (
        "dune",
        "Dune ridges shift under dry desert gales.",
        ["sandbar", "oasis", "dust"],
    ),
    (
        "reef",
        "Reef corals shelter vivid darting fish.",
        ["atoll", "snorkel", "plankton"],
    ),
];

const FILLERS: [&str; 6] = [
    "station", "harbor", "valley", "plateau", "meadow", "outpost",
];

pub const MAX_LABELS: usize = LABEL_BANK.len();

/// Catalog over the first `n_labels` synthetic labels.
pub fn build_catalog(n_labels: usize) -> LabelCatalog {
    assert!(
        (1..=MAX_LABELS).contains(&n_labels),
        "supported label counts: 1..={MAX_LABELS}"
    );
    LabelCatalog::new(
        LABEL_BANK[..n_labels]
            .iter()
            .map(|(name, desc, _)| CatalogEntry::manual(name, desc))
            .collect(),
    )
    .expect("bank labels are unique")
}

/// Prompt template used by the toy pipeline.
pub fn toy_template() -> PromptTemplate {
    PromptTemplate::new(
        "Instruction: First read the task description. There could be multiple categories \
         description for a report.",
        "Multi-label Text Classification",
        "Generate label description for the given texts.",
    )
    .expect("static template is valid")
}

/// Build a split of `n_docs` documents over the first `n_labels` labels.
///
/// Labels rotate round-robin; every fourth document carries a second
/// label, so single- and multi-label targets both occur. Keyword and
/// filler choices are seeded.
pub fn build_split(n_labels: usize, n_docs: usize, name: SplitName, seed: u64) -> DatasetSplit {
    assert!((1..=MAX_LABELS).contains(&n_labels));
    let mut rng = Rng::derive(seed, 0x53594e);
    let mut documents = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let primary = i % n_labels;
        let mut gold = alloc::vec![LABEL_BANK[primary].0.to_string()];
        let two_labels = n_labels > 1 && i % 4 == 3;
        let text = if two_labels {
            let secondary = (primary + 1 + rng.next_below(n_labels - 1)) % n_labels;
            gold.push(LABEL_BANK[secondary].0.to_string());
            format!(
                "field report blending {} and {} readings with {} traces near the {}",
                keyword(primary, &mut rng),
                keyword(secondary, &mut rng),
                keyword(primary, &mut rng),
                filler(&mut rng),
            )
        } else {
            format!(
                "field report covering {} activity and {} readings near the {}",
                keyword(primary, &mut rng),
                keyword(primary, &mut rng),
                filler(&mut rng),
            )
        };
        documents.push(Document {
            id: format!("{name}-{i:03}"),
            text,
            gold_labels: gold,
        });
    }
    DatasetSplit::new(name, documents)
}

fn keyword(label: usize, rng: &mut Rng) -> &'static str {
    LABEL_BANK[label].2[rng.next_below(3)]
}

fn filler(rng: &mut Rng) -> &'static str {
    FILLERS[rng.next_below(FILLERS.len())]
}

/// Catalog plus training split in one call.
pub fn toy_dataset(n_labels: usize, n_docs: usize, seed: u64) -> (LabelCatalog, DatasetSplit) {
    (
        build_catalog(n_labels),
        build_split(n_labels, n_docs, SplitName::Train, seed),
    )
}

/// Every text (prompt side and descriptions) needed to build a vocabulary
/// covering the synthetic world, including labels beyond `n_labels` so
/// zero-shot experiments can hold labels out without losing their tokens.
pub fn vocabulary_texts(catalog: &LabelCatalog, splits: &[&DatasetSplit]) -> Vec<String> {
    let mut texts: Vec<String> = catalog
        .entries()
        .iter()
        .map(|e| e.refined_text.clone())
        .collect();
    for split in splits {
        for doc in &split.documents {
            texts.push(doc.text.clone());
        }
    }
    texts
}
