//! Cross-validated Precision@20 and nDCG on a MovieLens file with default hyperparameters.
//!
//! cargo run --release --example evaluate_movielens -- data/ml-100k/u.data

use mvnrec::eval::{evaluate_model, make_folds};
use mvnrec::{ModelSpec, RunConfig};

fn main() -> mvnrec::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ml-100k/u.data".into());
    let mut config = RunConfig::default();
    config.set("dataset", &path)?;
    config.apply_environment()?;
    let ds = config.load_dataset()?;
    println!("{}: {}", config.name(), ds.summary());

    let r = &ds.interactions;
    let folds = make_folds(r, 5, 3, config.rng_seed)?;
    for family in ["random", "popularity", "mvn", "knn"] {
        let spec = ModelSpec::family_default(family)?;
        let e = evaluate_model(&spec, r, &folds, &config.eval_options(), config.rng_seed)?;
        println!(
            "{:<22} P@20 {:.3}  nDCG@m {:.3}",
            spec.label(),
            e.mean.precision_at_k,
            e.mean.ndcg_at_k
        );
    }
    Ok(())
}
