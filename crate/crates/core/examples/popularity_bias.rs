//! Named recommendations with and without the item-popularity component, plus the accuracy
//! cost of removing it.
//!
//! cargo run --release --example popularity_bias -- data/ml-100k/u.data "Star Wars (1977)"

use mvnrec::eval::{make_folds, EvalOptions};
use mvnrec::qualitative::{bias_removal_study, recommend_named, BiasMode};
use mvnrec::{ModelSpec, RunConfig};

fn main() -> mvnrec::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "data/ml-100k/u.data".into());
    let seeds: Vec<String> = args.collect();
    let mut config = RunConfig::default();
    config.set("dataset", &path)?;
    let ds = config.load_dataset()?;
    let specs = [ModelSpec::family_default("mvn")?, ModelSpec::family_default("knn")?];

    if !seeds.is_empty() {
        let seeds: Vec<&str> = seeds.iter().map(String::as_str).collect();
        for spec in &specs {
            for bias in [BiasMode::ItemBias, BiasMode::NoItemBias] {
                let rec = recommend_named(&ds, spec, &seeds, 10, bias, 0)?;
                println!("{}", mvnrec::report::format_named(&rec));
            }
        }
    }

    let folds = make_folds(&ds.interactions, 5, 3, 0)?;
    for c in bias_removal_study(&specs, &ds.interactions, &folds, &EvalOptions::default(), 0)? {
        println!(
            "{:<10} with bias {:.3}  without {:.3}",
            c.with_bias.spec.family(),
            c.with_bias.mean.precision_at_k,
            c.without_bias.mean.precision_at_k
        );
    }
    Ok(())
}
