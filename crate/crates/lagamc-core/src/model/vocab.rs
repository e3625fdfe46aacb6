//! Whitespace word-level vocabulary shared by the reference generator and
//! encoder.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::Fnv64;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Word-level vocabulary. Ids 0..=3 are the specials above; regular words
/// follow in sorted order, which makes construction independent of corpus
/// ordering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabFile", into = "VocabFile")]
pub struct Vocab {
    words: Vec<String>,
    map: BTreeMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    words: Vec<String>,
}

impl From<Vocab> for VocabFile {
    fn from(v: Vocab) -> Self {
        VocabFile { words: v.words }
    }
}

impl From<VocabFile> for Vocab {
    fn from(f: VocabFile) -> Self {
        let map = f
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocab {
            words: f.words,
            map,
        }
    }
}

impl Vocab {
    /// Build from an iterator of texts. Every whitespace token seen
    /// becomes a word.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut set: BTreeSet<&str> = BTreeSet::new();
        for text in texts {
            for token in text.split_whitespace() {
                set.insert(token);
            }
        }
        let mut words: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        words.extend(
            set.into_iter()
                .filter(|w| !SPECIALS.contains(w))
                .map(str::to_string),
        );
        let map = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocab { words, map }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        // The specials are always present.
        false
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.split_whitespace()
            .map(|t| self.map.get(t).copied().unwrap_or(UNK))
            .collect()
    }

    /// Join tokens back into text, skipping special ids.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id <= UNK {
                continue;
            }
            if let Some(word) = self.words.get(id as usize) {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(word);
            }
        }
        out
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        for w in &self.words {
            h.write(w.as_bytes());
            h.write(&[0]);
        }
        h.finish()
    }
}
