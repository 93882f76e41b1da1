//! The d-dimensional rational RNN.
//!
//! Every WFSA state `i >= 1` owns one parameter group laid out as
//! `[w (d_emb), b_f, v (d_emb), b_u]`. For a token vector `z` the state's
//! self-loop weight is `f = sigmoid(w.z + b_f)` and its incoming main
//! transition weight is `u = (1 - f) (v.z + b_u)`. The per-WFSA Forward
//! scores feed a linear binary classifier.
//!
//! All parameters live in one flat buffer: the groups in (WFSA, state)
//! order, then the classifier weights, then the classifier bias. Gradients
//! use the same layout, so a gradient is itself a [`RationalModel`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{dot, logistic_loss, logistic_loss_slope, sigmoid, Label};
use crate::wfsa::{forward_score, ForwardTable, TimestepWeights, WfsaShape};

/// A document as a sequence of word vectors, with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub inputs: Vec<Vec<f64>>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalModel {
    d_emb: usize,
    lengths: Vec<usize>,
    group_offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Borrowed parameters of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateParams<'a> {
    pub self_loop_weight: &'a [f64],
    pub self_loop_bias: f64,
    pub main_weight: &'a [f64],
    pub main_bias: f64,
}

impl<'a> StateParams<'a> {
    pub fn from_group(values: &'a [f64], d_emb: usize) -> Self {
        debug_assert_eq!(values.len(), 2 * (d_emb + 1));
        StateParams {
            self_loop_weight: &values[..d_emb],
            self_loop_bias: values[d_emb],
            main_weight: &values[d_emb + 1..2 * d_emb + 1],
            main_bias: values[2 * d_emb + 1],
        }
    }
}

/// Borrowed parameters of one WFSA.
#[derive(Debug, Clone, Copy)]
pub struct WfsaParams<'a> {
    pub shape: WfsaShape,
    d_emb: usize,
    groups: &'a [f64],
}

impl<'a> WfsaParams<'a> {
    /// Parameters of state `i` in `1..=k`.
    pub fn state(&self, i: usize) -> StateParams<'a> {
        let gd = 2 * (self.d_emb + 1);
        StateParams::from_group(&self.groups[(i - 1) * gd..i * gd], self.d_emb)
    }

    pub fn states(&self) -> impl Iterator<Item = StateParams<'a>> + '_ {
        (1..=self.shape.main_transitions()).map(move |i| self.state(i))
    }

    pub fn d_emb(&self) -> usize {
        self.d_emb
    }

    /// Transition weights for every token of `doc`.
    pub fn timestep_weights(&self, doc: &[Vec<f64>]) -> Vec<TimestepWeights> {
        doc.iter()
            .map(|z| {
                let (self_loop, main) = self.states().map(|s| transition_weights(s, z)).unzip();
                TimestepWeights::new(self_loop, main)
            })
            .collect()
    }
}

/// One parameter group seen through [`RationalModel::group_view`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupRef<'a> {
    pub wfsa: usize,
    /// State index, `1..=k`.
    pub state: usize,
    pub values: &'a [f64],
}

#[derive(Debug)]
pub struct GroupMut<'a> {
    pub wfsa: usize,
    pub state: usize,
    pub values: &'a mut [f64],
}

/// `(f, u)` for one state and one token vector.
#[inline]
pub fn transition_weights(state: StateParams<'_>, z: &[f64]) -> (f64, f64) {
    let f = sigmoid(dot(state.self_loop_weight, z) + state.self_loop_bias);
    let u = (1.0 - f) * (dot(state.main_weight, z) + state.main_bias);
    (f, u)
}

/// Score of one WFSA on a document: the Forward total over its final states.
pub fn doc_score(wfsa: WfsaParams<'_>, doc: &[Vec<f64>]) -> Result<f64> {
    if doc.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(forward_score(wfsa.shape, &wfsa.timestep_weights(doc))?.total())
}

/// Dropout rates used while training.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dropout {
    /// Probability of zeroing a whole token vector.
    pub embedding: f64,
    /// Probability of zeroing one main-transition weight `u_{i,t}`,
    /// resampled per timestep.
    pub recurrent: f64,
}

impl Dropout {
    pub fn is_active(&self) -> bool {
        self.embedding > 0.0 || self.recurrent > 0.0
    }
}

fn keep_scale<R: Rng + ?Sized>(rng: &mut R, p: f64) -> f64 {
    if p <= 0.0 {
        1.0
    } else if rng.random::<f64>() < p {
        0.0
    } else {
        1.0 / (1.0 - p)
    }
}

/// Everything one WFSA computed on one document.
#[derive(Debug, Clone, PartialEq)]
pub struct WfsaTrace {
    pub table: ForwardTable<f64>,
    pub weights: Vec<TimestepWeights>,
    /// `v.z + b_u`, indexed `[t * k + (i - 1)]`.
    pub main_linear: Vec<f64>,
    /// `w.z + b_f`, same indexing.
    pub self_loop_linear: Vec<f64>,
    /// Recurrent dropout scale applied to each `u`, same indexing.
    pub masks: Option<Vec<f64>>,
}

/// Forward pass of the whole model on one document, kept for the backward sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    lengths: Vec<usize>,
    d_emb: usize,
    pub inputs: Vec<Vec<f64>>,
    pub wfsas: Vec<WfsaTrace>,
    pub scores: Vec<f64>,
    pub logit: f64,
}

impl ForwardTrace {
    /// Recomputes the logit from the stored scores.
    pub fn replay_logit(&self, model: &RationalModel) -> f64 {
        model.classify(&self.scores)
    }

    pub fn loss(&self, label: Label) -> f64 {
        logistic_loss(self.logit, label)
    }
}

impl RationalModel {
    /// All-zero model with WFSAs of the given main-transition counts.
    pub fn zeros(d_emb: usize, lengths: &[usize]) -> Result<Self> {
        if d_emb == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
        }
        if let Some(j) = lengths.iter().position(|&k| k == 0) {
            return Err(Error::InvalidConfig(format!("WFSA {j} has no main transitions")));
        }
        let mut group_offsets = Vec::with_capacity(lengths.len());
        let mut groups = 0;
        for &k in lengths {
            group_offsets.push(groups);
            groups += k;
        }
        let len = groups * 2 * (d_emb + 1) + lengths.len() + 1;
        Ok(RationalModel {
            d_emb,
            lengths: lengths.to_vec(),
            group_offsets,
            params: vec![0.0; len],
        })
    }

    /// Weights uniform in `(-1/sqrt(d_emb), 1/sqrt(d_emb))`; biases and the
    /// classifier start at zero.
    pub fn init_random<R: Rng + ?Sized>(d_emb: usize, lengths: &[usize], rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(d_emb, lengths)?;
        let bound = 1.0 / libm::sqrt(d_emb as f64);
        for group in model.group_view_mut() {
            let (w, rest) = group.values.split_at_mut(d_emb);
            let v = &mut rest[1..=d_emb];
            for x in w.iter_mut().chain(v.iter_mut()) {
                *x = rng.random_range(-bound..bound);
            }
        }
        Ok(model)
    }

    pub fn from_params(d_emb: usize, lengths: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut model = Self::zeros(d_emb, lengths)?;
        if params.len() != model.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                model.params.len(),
                params.len()
            )));
        }
        model.params = params;
        Ok(model)
    }

    /// Same structure, every parameter zero.
    pub fn zeros_like(&self) -> Self {
        RationalModel {
            params: vec![0.0; self.params.len()],
            ..self.clone()
        }
    }

    pub fn d_emb(&self) -> usize {
        self.d_emb
    }

    /// Main-transition count of each WFSA.
    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn num_wfsas(&self) -> usize {
        self.lengths.len()
    }

    /// `2 (d_emb + 1)`.
    pub fn group_dim(&self) -> usize {
        2 * (self.d_emb + 1)
    }

    pub fn num_groups(&self) -> usize {
        self.lengths.iter().sum()
    }

    /// Total main-path transitions across all WFSAs.
    pub fn total_transitions(&self) -> usize {
        self.num_groups()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn groups_len(&self) -> usize {
        self.num_groups() * self.group_dim()
    }

    pub fn wfsa(&self, j: usize) -> WfsaParams<'_> {
        let gd = self.group_dim();
        let start = self.group_offsets[j] * gd;
        let end = start + self.lengths[j] * gd;
        WfsaParams {
            shape: WfsaShape::new(self.lengths[j]).expect("lengths are validated"),
            d_emb: self.d_emb,
            groups: &self.params[start..end],
        }
    }

    pub fn wfsas(&self) -> impl Iterator<Item = WfsaParams<'_>> + '_ {
        (0..self.num_wfsas()).map(move |j| self.wfsa(j))
    }

    pub fn classifier_weight(&self) -> &[f64] {
        let start = self.groups_len();
        &self.params[start..start + self.num_wfsas()]
    }

    pub fn classifier_weight_mut(&mut self) -> &mut [f64] {
        let start = self.groups_len();
        let d = self.num_wfsas();
        &mut self.params[start..start + d]
    }

    pub fn classifier_bias(&self) -> f64 {
        *self.params.last().expect("bias is always present")
    }

    pub fn set_classifier_bias(&mut self, bias: f64) {
        *self.params.last_mut().expect("bias is always present") = bias;
    }

    /// Every state's parameter group, WFSA-major then state order.
    pub fn group_view(&self) -> Vec<GroupRef<'_>> {
        let gd = self.group_dim();
        let labels = self.group_labels();
        self.params[..self.groups_len()]
            .chunks_exact(gd)
            .zip(labels)
            .map(|(values, (wfsa, state))| GroupRef { wfsa, state, values })
            .collect()
    }

    pub fn group_view_mut(&mut self) -> Vec<GroupMut<'_>> {
        let gd = self.group_dim();
        let labels = self.group_labels();
        let len = self.groups_len();
        self.params[..len]
            .chunks_exact_mut(gd)
            .zip(labels)
            .map(|(values, (wfsa, state))| GroupMut { wfsa, state, values })
            .collect()
    }

    /// Mutable access to the group of `state` (1-based) in WFSA `wfsa`.
    pub fn group_mut(&mut self, wfsa: usize, state: usize) -> &mut [f64] {
        assert!(state >= 1 && state <= self.lengths[wfsa], "state out of range");
        let gd = self.group_dim();
        let start = (self.group_offsets[wfsa] + state - 1) * gd;
        &mut self.params[start..start + gd]
    }

    fn group_labels(&self) -> Vec<(usize, usize)> {
        self.lengths
            .iter()
            .enumerate()
            .flat_map(|(j, &k)| (1..=k).map(move |i| (j, i)))
            .collect()
    }

    /// Classifier logit for a vector of WFSA scores.
    pub fn classify(&self, scores: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (w, s) in self.classifier_weight().iter().zip(scores) {
            acc += w * s;
        }
        acc + self.classifier_bias()
    }

    fn check_doc(&self, doc: &[Vec<f64>]) -> Result<()> {
        if doc.is_empty() {
            return Err(Error::EmptyDocument);
        }
        if let Some(t) = doc.iter().position(|z| z.len() != self.d_emb) {
            return Err(Error::ShapeMismatch(format!(
                "token {t} has dimension {}, model expects {}",
                doc[t].len(),
                self.d_emb
            )));
        }
        Ok(())
    }

    /// Per-WFSA scores of a document.
    pub fn scores(&self, doc: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_doc(doc)?;
        self.wfsas().map(|w| doc_score(w, doc)).collect()
    }

    pub fn logit(&self, doc: &[Vec<f64>]) -> Result<f64> {
        Ok(self.classify(&self.scores(doc)?))
    }

    pub fn predict(&self, doc: &[Vec<f64>]) -> Result<Label> {
        Ok(Label::predict(self.logit(doc)?))
    }

    /// Deterministic forward pass, retaining everything the backward sweep needs.
    pub fn forward(&self, doc: &[Vec<f64>]) -> Result<ForwardTrace> {
        self.check_doc(doc)?;
        self.forward_inner(doc.to_vec(), None::<&mut rand_chacha::ChaCha8Rng>, 0.0)
    }

    /// Forward pass with embedding and recurrent dropout.
    pub fn forward_with_dropout<R: Rng + ?Sized>(
        &self,
        doc: &[Vec<f64>],
        dropout: Dropout,
        rng: &mut R,
    ) -> Result<ForwardTrace> {
        self.check_doc(doc)?;
        let inputs = if dropout.embedding > 0.0 {
            doc.iter()
                .map(|z| {
                    let scale = keep_scale(rng, dropout.embedding);
                    z.iter().map(|x| x * scale).collect()
                })
                .collect()
        } else {
            doc.to_vec()
        };
        self.forward_inner(inputs, Some(rng), dropout.recurrent)
    }

    fn forward_inner<R: Rng + ?Sized>(
        &self,
        inputs: Vec<Vec<f64>>,
        mut rng: Option<&mut R>,
        recurrent: f64,
    ) -> Result<ForwardTrace> {
        let n = inputs.len();
        let mut wfsas = Vec::with_capacity(self.num_wfsas());
        let mut scores = Vec::with_capacity(self.num_wfsas());
        for wfsa in self.wfsas() {
            let k = wfsa.shape.main_transitions();
            let mut main_linear = Vec::with_capacity(n * k);
            let mut self_loop_linear = Vec::with_capacity(n * k);
            let mut masks = (recurrent > 0.0).then(|| Vec::with_capacity(n * k));
            let mut weights = Vec::with_capacity(n);
            for z in &inputs {
                let mut f_t = Vec::with_capacity(k);
                let mut u_t = Vec::with_capacity(k);
                for state in wfsa.states() {
                    let a = dot(state.self_loop_weight, z) + state.self_loop_bias;
                    let g = dot(state.main_weight, z) + state.main_bias;
                    let f = sigmoid(a);
                    let mut u = (1.0 - f) * g;
                    if let (Some(masks), Some(rng)) = (masks.as_mut(), rng.as_deref_mut()) {
                        let m = keep_scale(rng, recurrent);
                        masks.push(m);
                        u *= m;
                    }
                    self_loop_linear.push(a);
                    main_linear.push(g);
                    f_t.push(f);
                    u_t.push(u);
                }
                weights.push(TimestepWeights::new(f_t, u_t));
            }
            let table = forward_score(wfsa.shape, &weights)?;
            scores.push(table.total());
            wfsas.push(WfsaTrace {
                table,
                weights,
                main_linear,
                self_loop_linear,
                masks,
            });
        }
        let logit = self.classify(&scores);
        if !logit.is_finite() {
            return Err(Error::Overflow { timestep: n });
        }
        Ok(ForwardTrace {
            lengths: self.lengths.clone(),
            d_emb: self.d_emb,
            inputs,
            wfsas,
            scores,
            logit,
        })
    }

    /// Gradient of the logistic loss of `trace` with respect to every parameter.
    pub fn backward(&self, trace: &ForwardTrace, label: Label) -> Result<RationalModel> {
        let mut grad = self.zeros_like();
        self.backward_into(trace, label, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Adds `scale` times the loss gradient into `grad`.
    pub fn backward_into(
        &self,
        trace: &ForwardTrace,
        label: Label,
        scale: f64,
        grad: &mut RationalModel,
    ) -> Result<()> {
        if trace.lengths != self.lengths || trace.d_emb != self.d_emb {
            return Err(Error::ShapeMismatch("trace was produced by a different model".into()));
        }
        if grad.lengths != self.lengths || grad.d_emb != self.d_emb {
            return Err(Error::ShapeMismatch("gradient buffer has a different layout".into()));
        }
        let delta = scale * logistic_loss_slope(trace.logit, label);
        let d = self.num_wfsas();
        let cls = self.groups_len();
        for j in 0..d {
            grad.params[cls + j] += delta * trace.scores[j];
        }
        *grad.params.last_mut().expect("bias") += delta;
        if delta == 0.0 {
            return Ok(());
        }

        let gd = self.group_dim();
        let d_emb = self.d_emb;
        let n = trace.inputs.len();
        for (j, wt) in trace.wfsas.iter().enumerate() {
            let k = self.lengths[j];
            let group_base = self.group_offsets[j] * gd;
            let mut adj = vec![delta * self.classifier_weight()[j]; k + 1];
            adj[0] = 0.0;
            let mut next = vec![0.0; k + 1];
            for t in (1..=n).rev() {
                next.iter_mut().for_each(|x| *x = 0.0);
                let w = &wt.weights[t - 1];
                let z = &trace.inputs[t - 1];
                let prev = wt.table.row(t - 1);
                for i in 1..=k {
                    let a = adj[i];
                    if a == 0.0 {
                        continue;
                    }
                    let idx = (t - 1) * k + (i - 1);
                    let f = w.self_loop[i - 1];
                    let u = w.main[i - 1];
                    let m = wt.masks.as_ref().map_or(1.0, |ms| ms[idx]);
                    let g = wt.main_linear[idx];

                    let d_f = a * prev[i];
                    let d_u = a * prev[i - 1];
                    next[i] += a * f;
                    if i > 1 {
                        next[i - 1] += a * u;
                    }
                    // u = m (1 - f) g
                    let d_g = d_u * m * (1.0 - f);
                    let d_pre = (d_f - d_u * m * g) * f * (1.0 - f);

                    let base = group_base + (i - 1) * gd;
                    let group = &mut grad.params[base..base + gd];
                    for (gw, x) in group[..d_emb].iter_mut().zip(z) {
                        *gw += d_pre * x;
                    }
                    group[d_emb] += d_pre;
                    for (gv, x) in group[d_emb + 1..2 * d_emb + 1].iter_mut().zip(z) {
                        *gv += d_g * x;
                    }
                    group[2 * d_emb + 1] += d_g;
                }
                core::mem::swap(&mut adj, &mut next);
            }
        }
        Ok(())
    }
}
