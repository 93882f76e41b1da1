//! Removing collapsed states and compacting the model.

use alloc::vec::Vec;

use crate::group_lasso::group_norms;
use crate::model::RationalModel;

/// Surviving non-start states per original WFSA.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrunedStructure {
    pub surviving_states: Vec<usize>,
}

impl PrunedStructure {
    /// Structure of an unpruned model.
    pub fn of(model: &RationalModel) -> Self {
        PrunedStructure {
            surviving_states: model.lengths().to_vec(),
        }
    }

    pub fn is_removed(&self, wfsa: usize) -> bool {
        self.surviving_states[wfsa] == 0
    }

    pub fn surviving_wfsas(&self) -> usize {
        self.surviving_states.iter().filter(|&&s| s > 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.surviving_wfsas() == 0
    }
}

/// Total surviving main-path transitions.
pub fn count_transitions(structure: &PrunedStructure) -> usize {
    structure.surviving_states.iter().sum()
}

/// Structure left after thresholding at `epsilon`: each chain keeps the
/// states before its first sub-threshold group.
pub fn structure_at(model: &RationalModel, epsilon: f64) -> PrunedStructure {
    let norms = group_norms(&model.group_view());
    let mut surviving = alloc::vec![0; model.num_wfsas()];
    let mut open = alloc::vec![true; model.num_wfsas()];
    for g in norms {
        if open[g.wfsa] && g.norm >= epsilon {
            surviving[g.wfsa] += 1;
        } else {
            open[g.wfsa] = false;
        }
    }
    PrunedStructure {
        surviving_states: surviving,
    }
}

/// Whether the sub-threshold states of one chain form a suffix.
///
/// On failure, returns the 1-based index of the interior removed state, the
/// first sub-threshold state that still has a retained state after it.
pub fn check_suffix_removal(norms: &[f64], epsilon: f64) -> Result<(), usize> {
    match norms.iter().position(|&n| n < epsilon) {
        None => Ok(()),
        Some(first) if norms[first..].iter().any(|&n| n >= epsilon) => Err(first + 1),
        Some(_) => Ok(()),
    }
}

/// What happened to one WFSA.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WfsaPruneReport {
    pub wfsa: usize,
    pub group_norms: Vec<f64>,
    pub original_states: usize,
    pub surviving_states: usize,
    /// States whose own norm fell below the threshold.
    pub below_threshold: Vec<usize>,
    /// States kept above the threshold but removed because an earlier state was.
    pub unreachable: Vec<usize>,
    /// First state that violated suffix removal, if any.
    pub suffix_violation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PruneReport {
    pub epsilon: f64,
    pub wfsas: Vec<WfsaPruneReport>,
    pub transitions_before: usize,
    pub transitions_after: usize,
}

impl PruneReport {
    pub fn has_suffix_violations(&self) -> bool {
        self.wfsas.iter().any(|w| w.suffix_violation.is_some())
    }
}

/// Removes every state whose group norm is below `epsilon`, plus the
/// states that become unreachable behind it, and drops WFSAs that lose all
/// states together with their classifier weight.
pub fn prune(model: &RationalModel, epsilon: f64) -> (PrunedStructure, RationalModel, PruneReport) {
    let norms = group_norms(&model.group_view());
    let mut surviving = Vec::with_capacity(model.num_wfsas());
    let mut reports = Vec::with_capacity(model.num_wfsas());
    let mut cursor = 0;
    for (j, &k) in model.lengths().iter().enumerate() {
        let chain: Vec<f64> = norms[cursor..cursor + k].iter().map(|g| g.norm).collect();
        cursor += k;
        let keep = chain.iter().position(|&n| n < epsilon).unwrap_or(k);
        let below_threshold = (1..=k).filter(|&i| chain[i - 1] < epsilon).collect();
        let unreachable: Vec<usize> = (keep + 1..=k).filter(|&i| chain[i - 1] >= epsilon).collect();
        let suffix_violation = check_suffix_removal(&chain, epsilon).err();
        if let Some(state) = suffix_violation {
            log::warn!("WFSA {j}: interior state {state} was removed; later states are unreachable and dropped");
        }
        surviving.push(keep);
        reports.push(WfsaPruneReport {
            wfsa: j,
            group_norms: chain,
            original_states: k,
            surviving_states: keep,
            below_threshold,
            unreachable,
            suffix_violation,
        });
    }
    let structure = PrunedStructure {
        surviving_states: surviving,
    };
    let compact = compact(model, &structure);
    let report = PruneReport {
        epsilon,
        wfsas: reports,
        transitions_before: model.total_transitions(),
        transitions_after: count_transitions(&structure),
    };
    (structure, compact, report)
}

/// Keeps the first `surviving_states[j]` states of every WFSA.
pub fn compact(model: &RationalModel, structure: &PrunedStructure) -> RationalModel {
    let kept: Vec<usize> = structure
        .surviving_states
        .iter()
        .copied()
        .filter(|&s| s > 0)
        .collect();
    let gd = model.group_dim();
    let mut params = Vec::with_capacity(count_transitions(structure) * gd + kept.len() + 1);
    for g in model.group_view() {
        if g.state <= structure.surviving_states[g.wfsa] {
            params.extend_from_slice(g.values);
        }
    }
    for (j, &s) in structure.surviving_states.iter().enumerate() {
        if s > 0 {
            params.push(model.classifier_weight()[j]);
        }
    }
    params.push(model.classifier_bias());
    RationalModel::from_params(model.d_emb(), &kept, params).expect("compacted layout is consistent")
}

/// Copy of `model` with every below-threshold group set to zero.
pub fn zero_small_groups(model: &RationalModel, epsilon: f64) -> RationalModel {
    let mut out = model.clone();
    for g in out.group_view_mut() {
        if crate::numeric::l2_norm(g.values) < epsilon {
            g.values.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    out
}
