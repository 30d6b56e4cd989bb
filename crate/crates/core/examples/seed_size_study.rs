//! Precision@20 as the number of seed items per test user grows from 0 to 10.
//!
//! With no seed the MVN prediction is the item mean, so its row at s=0 matches popularity.

use mvnrec::dataset::synthetic_interactions;
use mvnrec::eval::{seed_size_study, EvalOptions};
use mvnrec::{ModelSpec, RunConfig};

fn main() -> mvnrec::Result<()> {
    let ds = match std::env::args().nth(1) {
        Some(path) => {
            let mut config = RunConfig::default();
            config.set("dataset", &path)?;
            config.load_dataset()?
        }
        None => synthetic_interactions(600, 120, 4, 0.1, 4.0, 5),
    };
    let specs: Vec<ModelSpec> = ["popularity", "mvn", "knn", "mf-ls:d=16,lambda=1,variant=missing"]
        .iter()
        .map(|s| s.parse())
        .collect::<mvnrec::Result<_>>()?;
    let sizes: Vec<usize> = (0..=10).collect();
    let points = seed_size_study(&specs, &ds.interactions, &sizes, 5, &EvalOptions::default(), 0)?;

    print!("{:<6}", "s");
    for spec in &specs {
        print!("{:>14}", spec.family());
    }
    println!();
    for chunk in points.chunks(specs.len()) {
        print!("{:<6}", chunk[0].seed_size);
        for p in chunk {
            print!("{:>14.3}", p.evaluation.mean.precision_at_k);
        }
        println!();
    }
    Ok(())
}
