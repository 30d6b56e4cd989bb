//! Inspecting a dataset by item name: co-occurrence tables, labeled recommendation lists,
//! and the effect of removing item popularity from the models.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dataset::{InteractionDataset, InteractionMatrix};
use crate::error::{Error, Result};
use crate::eval::{evaluate_model, EvalOptions, Evaluation, FoldSplit};
use crate::knn::Similarity;
use crate::mf::MfLoss;
use crate::model_spec::ModelSpec;
use crate::recommender::top_n;
use crate::stats::{covariance_from_cooccurrence, ItemStatistics};

const SUGGESTIONS: usize = 5;

/// Column index of the item labeled `label`. Exact matches win; otherwise a unique
/// case-insensitive match is accepted. Failures list the closest labels.
pub fn resolve_label(ds: &InteractionDataset, label: &str) -> Result<usize> {
    let labels: Vec<&str> = (0..ds.n_items()).map(|j| ds.item_label(j)).collect();
    if let Some(j) = labels.iter().position(|l| *l == label) {
        return Ok(j);
    }
    let folded = label.to_lowercase();
    let loose: Vec<usize> = (0..labels.len())
        .filter(|&j| labels[j].to_lowercase() == folded)
        .collect();
    if let [j] = loose[..] {
        return Ok(j);
    }
    let mut ranked: Vec<(f64, &str)> = labels
        .iter()
        .map(|l| (strsim::jaro_winkler(&folded, &l.to_lowercase()), *l))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    Err(Error::UnknownLabel {
        label: label.into(),
        suggestions: ranked.iter().take(SUGGESTIONS).map(|(_, l)| l.to_string()).collect(),
    })
}

/// Pairwise interaction fractions for a handful of named items.
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceTable {
    pub labels: Vec<String>,
    pub items: Vec<usize>,
    /// `F_ab`: fraction of users that interacted with both items; the diagonal is popularity.
    pub fractions: DMatrix<f64>,
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

pub fn cooccurrence_submatrix(ds: &InteractionDataset, labels: &[&str]) -> Result<CooccurrenceTable> {
    let items = labels
        .iter()
        .map(|l| resolve_label(ds, l))
        .collect::<Result<Vec<_>>>()?;
    let n = ds.n_users();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let r = &ds.interactions;
    let k = items.len();
    let fractions = DMatrix::from_fn(k, k, |a, b| {
        sorted_intersection(r.col(items[a]), r.col(items[b])) as f64 / n as f64
    });
    Ok(CooccurrenceTable {
        labels: items.iter().map(|&j| ds.item_label(j).to_string()).collect(),
        items,
        fractions,
    })
}

/// Mean and covariance implied by a co-occurrence matrix of binary items: the mean is the
/// diagonal.
pub fn statistics_from_cooccurrence(f: &DMatrix<f64>) -> ItemStatistics {
    let mean = f.diagonal();
    let cov = covariance_from_cooccurrence(f, &mean);
    ItemStatistics::from_moments(mean, cov, 0.0, 0.0)
}

/// Rank-one reconstruction of a full 0/1 row: `mu + v v^T (x - mu)` with `v` the leading
/// eigenvector of the covariance. This is what a one-factor SVD predicts when the zeros are
/// taken as observed.
pub fn principal_axis_prediction(mean: &DVector<f64>, cov: &DMatrix<f64>, row: &[f64]) -> Vec<f64> {
    let eig = SymmetricEigen::new(cov.clone());
    let top = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(top);
    let dev = DVector::from_iterator(row.len(), row.iter().zip(mean.iter()).map(|(x, m)| x - m));
    let proj = v.dot(&dev);
    mean.iter().zip(v.iter()).map(|(m, vi)| m + proj * vi).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BiasMode {
    #[default]
    ItemBias,
    NoItemBias,
}

impl std::str::FromStr for BiasMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bias" | "item-bias" | "with" | "on" => Ok(BiasMode::ItemBias),
            "no-bias" | "no-item-bias" | "without" | "off" => Ok(BiasMode::NoItemBias),
            _ => Err(Error::Config(format!("bias mode {s:?}: expected bias or no-bias"))),
        }
    }
}

/// The popularity-free counterpart of a model: zero mean and correlation for MVN,
/// correlation similarity for kNN, no item intercepts for BPR, and random scores in place
/// of popularity ranking.
pub fn without_item_bias(spec: &ModelSpec) -> Result<ModelSpec> {
    let mut out = spec.clone();
    match &mut out {
        ModelSpec::Mvn(c) => c.popularity_free = true,
        ModelSpec::Knn(c) => c.similarity = Similarity::Correlation,
        ModelSpec::Mf { config, .. } if config.loss == MfLoss::Bpr => config.item_bias = false,
        ModelSpec::Popularity => out = ModelSpec::Random { seed: None },
        other => {
            return Err(Error::Config(format!(
                "{} has no item-bias term to remove",
                other.family()
            )))
        }
    }
    Ok(out)
}

pub fn apply_bias_mode(spec: &ModelSpec, mode: BiasMode) -> Result<ModelSpec> {
    match mode {
        BiasMode::ItemBias => Ok(spec.clone()),
        BiasMode::NoItemBias => without_item_bias(spec),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedItem {
    pub item: usize,
    pub label: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedRecommendation {
    pub seed_labels: Vec<String>,
    pub model: ModelSpec,
    pub bias: BiasMode,
    pub items: Vec<NamedItem>,
}

/// Fits the model on the whole dataset plus one extra user holding the named seed, and
/// returns that user's labeled Top-`n`.
pub fn recommend_named(
    ds: &InteractionDataset,
    spec: &ModelSpec,
    seed_labels: &[&str],
    n: usize,
    bias: BiasMode,
    rng_seed: u64,
) -> Result<NamedRecommendation> {
    let model_spec = apply_bias_mode(spec, bias)?;
    let seed = seed_labels
        .iter()
        .map(|l| resolve_label(ds, l))
        .collect::<Result<Vec<_>>>()?;
    let r = &ds.interactions;
    let mut rows: Vec<Vec<usize>> = (0..r.n_users()).map(|u| r.row(u).to_vec()).collect();
    rows.push(seed.clone());
    let train = InteractionMatrix::from_rows(r.n_items(), &rows)?;
    let mut model = model_spec.build(rng_seed);
    model.fit(&train)?;
    let scores = model.score_user(r.n_users(), &seed)?;
    let list = top_n(&scores, &seed, n);
    Ok(NamedRecommendation {
        seed_labels: seed.iter().map(|&j| ds.item_label(j).to_string()).collect(),
        model: model_spec,
        bias,
        items: list
            .items
            .iter()
            .zip(&list.scores)
            .map(|(&item, &score)| NamedItem {
                item,
                label: ds.item_label(item).to_string(),
                score,
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasComparison {
    pub with_bias: Evaluation,
    pub without_bias: Evaluation,
}

/// Evaluates each model with and without its item-popularity component on the same folds.
pub fn bias_removal_study(
    specs: &[ModelSpec],
    full: &InteractionMatrix,
    folds: &[FoldSplit],
    options: &EvalOptions,
    rng_seed: u64,
) -> Result<Vec<BiasComparison>> {
    specs
        .iter()
        .map(|spec| {
            Ok(BiasComparison {
                with_bias: evaluate_model(spec, full, folds, options, rng_seed)?,
                without_bias: evaluate_model(&without_item_bias(spec)?, full, folds, options, rng_seed)?,
            })
        })
        .collect()
}
