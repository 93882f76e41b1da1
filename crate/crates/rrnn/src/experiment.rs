//! Drivers shared by the command line and the tests: data bundles, model
//! initialization, search, and run summaries.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rrnn_core::prune::{prune, PruneReport};
use rrnn_core::search::{lambda_search, sample_draws, SearchOutcome};
use rrnn_core::train::{accuracy, init_lambda_balance, train, TrainConfig, TrainHistory};
use rrnn_core::{Example, PrunedStructure, RationalModel};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{load_dataset, LabeledDoc};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::render::TradeoffPoint;
use crate::synth::{SynthData, DEV_FILE, EMBEDDINGS_FILE, TEST_FILE, TRAIN_FILE};

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub docs: Vec<LabeledDoc>,
    pub examples: Vec<Example>,
}

impl Split {
    pub fn new(docs: Vec<LabeledDoc>, table: &EmbeddingTable) -> Self {
        let examples = docs.iter().map(|d| d.to_example(table)).collect();
        Split { docs, examples }
    }

    pub fn tokens(&self) -> Vec<Vec<String>> {
        self.docs.iter().map(|d| d.tokens.clone()).collect()
    }

    pub fn inputs(&self) -> Vec<Vec<Vec<f64>>> {
        self.examples.iter().map(|e| e.inputs.clone()).collect()
    }
}

/// Embedded train, dev and (optional) test splits.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBundle {
    pub embeddings: EmbeddingTable,
    pub train: Split,
    pub dev: Split,
    pub test: Option<Split>,
}

impl DataBundle {
    /// Reads `train.tsv`, `dev.tsv`, the optional `test.tsv` and the
    /// embedding table from `dir`. `embeddings` overrides the table path.
    pub fn load(dir: &Path, embeddings: Option<&Path>, min_tokens: usize) -> Result<Self> {
        let table_path = embeddings.map_or_else(|| dir.join(EMBEDDINGS_FILE), Path::to_path_buf);
        let table = EmbeddingTable::load(&table_path)?;
        let split = |name: &str| -> Result<Split> {
            Ok(Split::new(load_dataset(&dir.join(name), min_tokens)?.docs, &table))
        };
        let test_path = dir.join(TEST_FILE);
        let test = if test_path.exists() { Some(split(TEST_FILE)?) } else { None };
        Ok(DataBundle {
            train: split(TRAIN_FILE)?,
            dev: split(DEV_FILE)?,
            test,
            embeddings: table,
        })
    }

    pub fn from_synth(data: &SynthData) -> Self {
        DataBundle {
            train: Split::new(data.train.clone(), &data.embeddings),
            dev: Split::new(data.dev.clone(), &data.embeddings),
            test: Some(Split::new(data.test.clone(), &data.embeddings)),
            embeddings: data.embeddings.clone(),
        }
    }

    pub fn test_accuracy(&self, model: &RationalModel) -> Result<Option<f64>> {
        match &self.test {
            Some(t) if model.d_emb() == self.embeddings.dim() => Ok(Some(accuracy(model, &t.examples)?)),
            Some(_) => Err(dim_mismatch(model, &self.embeddings)),
            None => Ok(None),
        }
    }

    pub fn check_model(&self, model: &RationalModel) -> Result<()> {
        if model.d_emb() == self.embeddings.dim() {
            Ok(())
        } else {
            Err(dim_mismatch(model, &self.embeddings))
        }
    }
}

fn dim_mismatch(model: &RationalModel, table: &EmbeddingTable) -> Error {
    Error::Config(format!(
        "model expects {}-dimensional embeddings, table has {}",
        model.d_emb(),
        table.dim()
    ))
}

/// Fresh model for `config`, seeded from the training seed on its own stream.
pub fn init_model(config: &RunConfig, d_emb: usize) -> Result<RationalModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
    rng.set_stream(1);
    Ok(RationalModel::init_random(d_emb, &config.model.lengths(), &mut rng)?)
}

/// The configured strength, or the loss/penalty balance of `initial`.
pub fn resolve_lambda(config: &RunConfig, initial: &RationalModel, train_data: &[Example]) -> Result<f64> {
    match config.penalty.lambda {
        Some(lambda) => Ok(lambda),
        None => {
            let lambda = init_lambda_balance(initial, train_data)?;
            log::info!("lambda from loss/penalty balance at initialization: {lambda:e}");
            Ok(lambda)
        }
    }
}

/// Stage-1 model and its pruned form for one search step.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchFit {
    pub config: TrainConfig,
    pub fitted: RationalModel,
    pub compact: RationalModel,
    pub report: PruneReport,
    pub history: TrainHistory,
}

/// Searches for a strength whose pruned structure is near the goal size.
///
/// Each step trains a fresh copy of `initial` under one hyperparameter
/// draw. With `config.random_search` the draws are sampled from the
/// allowed ranges and sorted by learning rate; otherwise `config.train`
/// is the only draw.
pub fn run_search(
    config: &RunConfig,
    data: &DataBundle,
    initial: &RationalModel,
    initial_lambda: f64,
) -> Result<SearchOutcome<SearchFit>> {
    let draws = if config.random_search {
        let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
        rng.set_stream(2);
        sample_draws(&config.train, config.search.max_restarts, &mut rng)
    } else {
        vec![config.train.clone()]
    };
    let epsilon = config.penalty.epsilon;
    let outcome = lambda_search(&config.search, &draws, initial_lambda, |draw, lambda| {
        let (fitted, history) = train(initial.clone(), &data.train.examples, &data.dev.examples, draw, lambda)?;
        let (structure, compact, report) = prune(&fitted, epsilon);
        Ok((
            structure,
            SearchFit {
                config: draw.clone(),
                fitted,
                compact,
                report,
                history,
            },
        ))
    })??;
    Ok(outcome)
}

/// Metadata of one finished run, aggregated by `tradeoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    /// Runs with the same method and setting are averaged together.
    pub setting: String,
    pub seed: u64,
    pub lambda: f64,
    pub epsilon: f64,
    pub structure: PrunedStructure,
    pub transitions: usize,
    pub dev_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and population standard deviation per `(method, setting)`, using
/// test accuracy when every run has one and dev accuracy otherwise.
pub fn aggregate_runs(runs: &[RunSummary]) -> Vec<TradeoffPoint> {
    let mut keys: Vec<(&str, &str)> = runs.iter().map(|r| (r.method.as_str(), r.setting.as_str())).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|(method, setting)| {
            let group: Vec<&RunSummary> = runs
                .iter()
                .filter(|r| r.method == method && r.setting == setting)
                .collect();
            let transitions: Vec<f64> = group.iter().map(|r| r.transitions as f64).collect();
            let accuracies: Vec<f64> = if group.iter().all(|r| r.test_accuracy.is_some()) {
                group.iter().filter_map(|r| r.test_accuracy).collect()
            } else {
                group.iter().map(|r| r.dev_accuracy).collect()
            };
            let (t, t_std) = mean_std(&transitions);
            let (a, a_std) = mean_std(&accuracies);
            TradeoffPoint {
                method: method.to_string(),
                transitions: t,
                transitions_std: t_std,
                accuracy: a,
                accuracy_std: a_std,
            }
        })
        .collect()
}

/// `dir/stem.suffix.json` next to a `stem.json` artifact.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(method: &str, setting: &str, transitions: usize, acc: f64) -> RunSummary {
        RunSummary {
            method: method.into(),
            setting: setting.into(),
            seed: 0,
            lambda: 0.0,
            epsilon: 0.1,
            structure: PrunedStructure {
                surviving_states: vec![transitions],
            },
            transitions,
            dev_accuracy: acc,
            test_accuracy: Some(acc),
        }
    }

    #[test]
    fn single_runs_have_zero_std() {
        let points = aggregate_runs(&[summary("sparse", "g20", 18, 0.9)]);
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].transitions_std, 0.0);
        assert_eq!(points[0].accuracy_std, 0.0);
    }

    #[test]
    fn runs_grouped_by_method_and_setting() {
        let points = aggregate_runs(&[
            summary("sparse", "g20", 18, 0.9),
            summary("sparse", "g20", 22, 0.8),
            summary("sparse", "g40", 40, 0.95),
            summary("baseline", "g20", 24, 0.7),
        ]);
        assert_eq!(points.len(), 3);
        let g20 = points.iter().find(|p| p.method == "sparse" && p.transitions == 20.0).unwrap();
        assert!((g20.accuracy - 0.85).abs() < 1e-12);
        assert!((g20.transitions_std - 2.0).abs() < 1e-12);
        assert!((g20.accuracy_std - 0.05).abs() < 1e-12);
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("out/m.json"), "history"), Path::new("out/m.history.json"));
        assert_eq!(sibling(Path::new("model"), "report"), Path::new("model.report.json"));
    }
}
