//! Fit and scoring time as the number of users grows. Pass a thread count to bound rayon.

use mvnrec::dataset::synthetic_interactions;
use mvnrec::eval::{benchmark_runtime, EvalOptions};
use mvnrec::ModelSpec;

fn main() -> mvnrec::Result<()> {
    let threads = std::env::args().nth(1).and_then(|s| s.parse().ok());
    let ds = synthetic_interactions(4000, 300, 6, 0.05, 3.0, 1);
    let specs: Vec<ModelSpec> = ["popularity", "mvn", "knn", "mf-ls:d=32,epochs=20"]
        .iter()
        .map(|s| s.parse())
        .collect::<mvnrec::Result<_>>()?;
    let options = EvalOptions {
        threads,
        ..EvalOptions::default()
    };
    let points = benchmark_runtime(&specs, &ds.interactions, &[500, 1000, 2000, 4000], 3, &options, 0)?;
    println!("{:<20} {:>7} {:>10} {:>10}", "model", "users", "fit s", "score s");
    for p in points {
        println!(
            "{:<20} {:>7} {:>10.4} {:>10.4}",
            p.spec.label(),
            p.n_users,
            p.fit_seconds,
            p.score_seconds
        );
    }
    Ok(())
}
