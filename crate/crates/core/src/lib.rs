//! Implicit-feedback collaborative filtering with a multivariate normal item model.
//!
//! Interactions are a binary user × item matrix. The central model treats each user's row as
//! a draw from a multivariate normal over items and ranks unseen items by their conditional
//! mean given the items the user has interacted with. Popularity, random, item kNN and
//! matrix-factorization baselines share the same [`Recommender`] interface, and [`eval`] runs
//! the seeded cross-validation protocol used to compare them.

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod knn;
pub mod linalg;
pub mod metrics;
pub mod mf;
pub mod model_spec;
pub mod mvn;
pub mod oracles;
pub mod qualitative;
pub mod recommender;
pub mod report;
pub mod stats;

pub use config::RunConfig;
pub use dataset::{InteractionDataset, InteractionMatrix, ProcessingRule};
pub use error::{Error, Result};
pub use eval::{evaluate_model, make_folds, EvalOptions, Evaluation, FoldSplit};
pub use knn::{KnnConfig, KnnModel};
pub use metrics::{ndcg_at_k, precision_at_k, MetricReport};
pub use mf::{MfConfig, MfLoss, MfModel};
pub use model_spec::ModelSpec;
pub use mvn::{MvnConfig, MvnModel};
pub use recommender::{top_n, NonInteractions, PopularityRecommender, RandomRecommender, Recommender};
pub use stats::ItemStatistics;
