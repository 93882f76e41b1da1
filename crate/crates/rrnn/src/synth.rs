//! Planted-pattern datasets: positives contain a fixed token sequence,
//! negatives never do.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rrnn_core::Label;
use serde::{Deserialize, Serialize};

use crate::dataset::{save_dataset, LabeledDoc};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

pub const TRAIN_FILE: &str = "train.tsv";
pub const DEV_FILE: &str = "dev.tsv";
pub const TEST_FILE: &str = "test.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub vocab_size: usize,
    pub dim: usize,
    /// Vocabulary indices of the planted tokens, in order.
    pub pattern: Vec<usize>,
    /// Most filler tokens allowed between consecutive pattern tokens.
    pub max_gap: usize,
    pub min_doc_len: usize,
    pub max_doc_len: usize,
    pub num_train: usize,
    pub num_dev: usize,
    pub num_test: usize,
    pub seed: u64,
    /// Draws allowed per negative document before giving up.
    pub max_retries: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 50,
            dim: 10,
            pattern: vec![3, 17],
            max_gap: 0,
            min_doc_len: 8,
            max_doc_len: 16,
            num_train: 500,
            num_dev: 100,
            num_test: 500,
            seed: 0,
            max_retries: 1000,
        }
    }
}

/// Name of vocabulary entry `i`.
pub fn token_name(i: usize) -> String {
    format!("w{i}")
}

impl SynthConfig {
    pub fn pattern_tokens(&self) -> Vec<String> {
        self.pattern.iter().map(|&i| token_name(i)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.vocab_size == 0 || self.dim == 0 {
            return fail("vocab_size and dim must be positive".into());
        }
        if self.pattern.is_empty() || self.pattern.len() > 4 {
            return fail(format!("pattern must have 1 to 4 tokens, got {}", self.pattern.len()));
        }
        if let Some(&bad) = self.pattern.iter().find(|&&t| t >= self.vocab_size) {
            return fail(format!("pattern token {bad} is outside the vocabulary of {}", self.vocab_size));
        }
        let span = self.pattern.len() + (self.pattern.len() - 1) * self.max_gap;
        if self.min_doc_len < span || self.min_doc_len > self.max_doc_len {
            return fail(format!(
                "document lengths [{}, {}] must be ordered and fit the pattern span of {span}",
                self.min_doc_len, self.max_doc_len
            ));
        }
        if self.num_train == 0 || self.num_dev == 0 || self.num_test == 0 {
            return fail("split sizes must be positive".into());
        }
        if self.max_retries == 0 {
            return fail("max_retries must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: Vec<LabeledDoc>,
    pub dev: Vec<LabeledDoc>,
    pub test: Vec<LabeledDoc>,
    pub embeddings: EmbeddingTable,
}

impl SynthData {
    /// Writes the three splits and the embedding table into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_dataset(&dir.join(TRAIN_FILE), &self.train)?;
        save_dataset(&dir.join(DEV_FILE), &self.dev)?;
        save_dataset(&dir.join(TEST_FILE), &self.test)?;
        self.embeddings.save(&dir.join(EMBEDDINGS_FILE))
    }
}

/// Whether `doc` has the pattern in order with at most `max_gap` tokens
/// between consecutive pattern tokens.
fn has_pattern(doc: &[usize], pattern: &[usize], max_gap: usize) -> bool {
    fn from(doc: &[usize], pattern: &[usize], max_gap: usize, pos: usize) -> bool {
        let Some((&next, rest)) = pattern.split_first() else {
            return true;
        };
        (pos..doc.len().min(pos + max_gap + 1)).any(|p| doc[p] == next && from(doc, rest, max_gap, p + 1))
    }
    (0..doc.len()).any(|s| doc[s] == pattern[0] && from(doc, &pattern[1..], max_gap, s + 1))
}

fn random_doc(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let len = rng.random_range(config.min_doc_len..=config.max_doc_len);
    (0..len).map(|_| rng.random_range(0..config.vocab_size)).collect()
}

fn positive_doc(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut doc = random_doc(config, rng);
    let gaps: Vec<usize> = (1..config.pattern.len())
        .map(|_| rng.random_range(0..=config.max_gap))
        .collect();
    let span = config.pattern.len() + gaps.iter().sum::<usize>();
    let mut pos = rng.random_range(0..=doc.len() - span);
    for (i, &token) in config.pattern.iter().enumerate() {
        doc[pos] = token;
        pos += 1 + gaps.get(i).copied().unwrap_or(0);
    }
    doc
}

fn negative_doc(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    for _ in 0..config.max_retries {
        let doc = random_doc(config, rng);
        if !has_pattern(&doc, &config.pattern, config.max_gap) {
            return Ok(doc);
        }
    }
    Err(Error::Synth(format!(
        "no pattern-free negative document after {} draws; the pattern is too likely",
        config.max_retries
    )))
}

fn split(config: &SynthConfig, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<LabeledDoc>> {
    let positives = count.div_ceil(2);
    let mut docs = Vec::with_capacity(count);
    for i in 0..count {
        let (ids, label) = if i < positives {
            (positive_doc(config, rng), Label::Positive)
        } else {
            (negative_doc(config, rng)?, Label::Negative)
        };
        docs.push(LabeledDoc {
            tokens: ids.into_iter().map(token_name).collect(),
            label,
        });
    }
    docs.shuffle(rng);
    Ok(docs)
}

/// Seeded unit-norm embeddings plus class-balanced train, dev and test splits.
pub fn synth_generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let entries: Vec<(String, Vec<f64>)> = (0..config.vocab_size)
        .map(|i| {
            let mut v: Vec<f64> = (0..config.dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = rrnn_core::numeric::l2_norm(&v);
            v.iter_mut().for_each(|x| *x /= norm);
            (token_name(i), v)
        })
        .collect();
    let embeddings = EmbeddingTable::new(config.dim, entries)?;
    let train = split(config, config.num_train, &mut rng)?;
    let dev = split(config, config.num_dev, &mut rng)?;
    let test = split(config, config.num_test, &mut rng)?;
    Ok(SynthData {
        train,
        dev,
        test,
        embeddings,
    })
}
