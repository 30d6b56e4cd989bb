//! Treating non-interactions as unknown versus as observed zeros.
//!
//! cargo run --release --example missing_vs_observed -- [interaction file]
//! Without an argument a synthetic dataset is used.

use mvnrec::dataset::synthetic_interactions;
use mvnrec::eval::{evaluate_model, make_folds, EvalOptions};
use mvnrec::{ModelSpec, RunConfig};

fn main() -> mvnrec::Result<()> {
    let ds = match std::env::args().nth(1) {
        Some(path) => {
            let mut config = RunConfig::default();
            config.set("dataset", &path)?;
            config.load_dataset()?
        }
        None => synthetic_interactions(800, 150, 5, 0.06, 4.0, 3),
    };
    println!("{}", ds.summary());
    let r = &ds.interactions;
    let folds = make_folds(r, 5, 3, 0)?;
    let pairs = [
        ("mvn:variant=missing", "mvn:variant=observed,lambda=1"),
        ("knn:normalized=false", "knn:normalized=true"),
        (
            "mf-ls:d=16,lambda=1,variant=missing",
            "mf-ls:d=16,lambda=1,variant=observed",
        ),
    ];
    for (missing, observed) in pairs {
        for spec in [missing, observed] {
            let spec: ModelSpec = spec.parse()?;
            let e = evaluate_model(&spec, r, &folds, &EvalOptions::default(), 0)?;
            println!("{:<24} P@20 {:.3}", spec.label(), e.mean.precision_at_k);
        }
    }
    Ok(())
}
