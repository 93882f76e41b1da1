//! Top- and bottom-scoring phrases per WFSA.
//!
//! The model scores a document with the sum over all paths, but a single
//! path is what a reader can inspect. For every document and WFSA the
//! highest- and lowest-scoring accepting paths are extracted, then ranked
//! across the corpus.

use alloc::vec::Vec;

use crate::error::Result;
use crate::model::RationalModel;
use crate::wfsa::{extreme_path, PathRecord, PathStep};

/// Role of one token inside a phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Annotation {
    /// Consumed by main transition `i`.
    Main(usize),
    /// Consumed by the self-loop of a state `>= 1`.
    SelfLoop(usize),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhraseMatch {
    pub doc_id: usize,
    pub wfsa: usize,
    pub score: f64,
    pub path: PathRecord,
}

impl PhraseMatch {
    /// Token range `[first main transition, end of document)`.
    pub fn span(&self) -> core::ops::Range<usize> {
        let start = self.path.start_time().unwrap_or(self.path.steps.len());
        start..self.path.steps.len()
    }

    /// `(token index, role)` for every token in [`span`](Self::span).
    pub fn annotations(&self) -> Vec<(usize, Annotation)> {
        self.span()
            .map(|t| {
                let a = match self.path.steps[t] {
                    PathStep::Main(i) => Annotation::Main(i),
                    PathStep::SelfLoop(q) => Annotation::SelfLoop(q),
                    PathStep::Start => unreachable!("span starts at the first main transition"),
                };
                (t, a)
            })
            .collect()
    }

    /// Main transitions taken by the path.
    pub fn main_transitions(&self) -> usize {
        self.path.end_state()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WfsaPhrases {
    pub wfsa: usize,
    /// Highest scores first.
    pub top: Vec<PhraseMatch>,
    /// Lowest scores first.
    pub bottom: Vec<PhraseMatch>,
}

/// Equivalent model whose classifier weights are all nonnegative.
///
/// Every path of a WFSA takes the first main transition exactly once, so
/// negating that transition's parameters negates the WFSA score; negating
/// the classifier weight as well leaves every logit bit-for-bit unchanged.
/// After this, a WFSA's top phrases are the ones that push toward the
/// positive class.
pub fn orient_by_classifier(model: &RationalModel) -> RationalModel {
    let mut out = model.clone();
    let d = model.d_emb();
    for j in 0..model.num_wfsas() {
        if out.classifier_weight()[j] < 0.0 {
            out.group_mut(j, 1)[d + 1..].iter_mut().for_each(|x| *x = -*x);
            out.classifier_weight_mut()[j] = -out.classifier_weight()[j];
        }
    }
    out
}

/// The `n` highest- and `n` lowest-scoring document paths of every WFSA.
///
/// Ties are broken by document index.
pub fn top_bottom_phrases(model: &RationalModel, corpus: &[Vec<Vec<f64>>], n: usize) -> Result<Vec<WfsaPhrases>> {
    let mut out = Vec::with_capacity(model.num_wfsas());
    for (j, wfsa) in model.wfsas().enumerate() {
        let mut highs = Vec::with_capacity(corpus.len());
        let mut lows = Vec::with_capacity(corpus.len());
        for (doc_id, doc) in corpus.iter().enumerate() {
            let weights = wfsa.timestep_weights(doc);
            if let Some((hi, lo)) = extreme_path(wfsa.shape, &weights)? {
                highs.push(PhraseMatch {
                    doc_id,
                    wfsa: j,
                    score: hi.score,
                    path: hi,
                });
                lows.push(PhraseMatch {
                    doc_id,
                    wfsa: j,
                    score: lo.score,
                    path: lo,
                });
            }
        }
        highs.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.doc_id.cmp(&b.doc_id)));
        lows.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.doc_id.cmp(&b.doc_id)));
        highs.truncate(n);
        lows.truncate(n);
        out.push(WfsaPhrases {
            wfsa: j,
            top: highs,
            bottom: lows,
        });
    }
    Ok(out)
}
