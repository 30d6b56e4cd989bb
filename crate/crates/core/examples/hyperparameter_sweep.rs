//! Per-fold hyperparameter selection on validation users drawn from the training fold.

use mvnrec::dataset::synthetic_interactions;
use mvnrec::eval::{make_folds, sweep, EvalOptions, SweepGrid};
use mvnrec::ModelSpec;

fn main() -> mvnrec::Result<()> {
    let ds = synthetic_interactions(500, 80, 4, 0.1, 4.0, 11);
    let r = &ds.interactions;
    let folds = make_folds(r, 5, 3, 0)?;
    let grids = [
        SweepGrid::new(ModelSpec::family_default("mvn")?)
            .axis("lambda", ["0", "0.1", "1", "10", "100"].map(String::from).to_vec()),
        SweepGrid::for_family(ModelSpec::family_default("knn")?, r.n_items()),
    ];
    for grid in &grids {
        println!("grid {}", grid.describe());
        let result = sweep(grid, r, &folds, 0.2, &EvalOptions::default(), 0)?;
        for f in &result.folds {
            println!(
                "  fold {}: {} (validation {:.3}, test {:.3})",
                f.outcome.fold,
                f.chosen.hyperparameters(),
                f.validation_precision,
                f.outcome.report.precision_at_k
            );
        }
        println!("  mean test P@20 {:.3}", result.mean.precision_at_k);
    }
    Ok(())
}
