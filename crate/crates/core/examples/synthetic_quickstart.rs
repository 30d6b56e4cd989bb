//! Every model family on a small synthetic dataset, five folds with three seed items each.

use mvnrec::dataset::synthetic_interactions;
use mvnrec::eval::{evaluate_model, make_folds, EvalOptions};
use mvnrec::ModelSpec;

fn main() -> mvnrec::Result<()> {
    let ds = synthetic_interactions(600, 120, 4, 0.08, 4.0, 7);
    println!("{}", ds.summary());
    let r = &ds.interactions;
    let folds = make_folds(r, 5, 3, 0)?;
    let options = EvalOptions::default();
    for spec in [
        "random",
        "popularity",
        "mvn:lambda=1",
        "knn",
        "knn:normalized=true",
        "mf-ls:d=8,lambda=1,variant=missing",
        "bpr:d=16,epochs=30",
        "log:d=8,epochs=50",
    ] {
        let spec: ModelSpec = spec.parse()?;
        let e = evaluate_model(&spec, r, &folds, &options, 0)?;
        println!(
            "{:<28} P@20 {:.3}  nDCG {:.3}  fit {:.2}s",
            spec.label(),
            e.mean.precision_at_k,
            e.mean.ndcg_at_k,
            e.fit_seconds()
        );
    }
    Ok(())
}
