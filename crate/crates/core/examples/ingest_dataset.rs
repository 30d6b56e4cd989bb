//! Loads an interaction file with a chosen format and rule, then filters sparse rows.
//!
//! cargo run --release --example ingest_dataset -- data/ml-100k/u.data gt:3

use mvnrec::dataset::{filter_dataset, load_interactions, DelimitedFormat};
use mvnrec::ProcessingRule;

fn main() -> mvnrec::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "data/ml-100k/u.data".into());
    let rule: ProcessingRule = args.next().as_deref().unwrap_or("identity").parse()?;
    let format = if path.ends_with(".inter") {
        DelimitedFormat::atomic_tsv()
    } else if path.ends_with(".dat") {
        DelimitedFormat::movielens_1m()
    } else {
        DelimitedFormat::movielens_100k()
    };
    let ds = load_interactions(&path, &format, rule)?;
    println!("{path} ({}): {}", rule.description(), ds.summary());
    let counts = ds.interactions.item_counts();
    let top = counts
        .iter()
        .enumerate()
        .max_by_key(|&(j, c)| (c, std::cmp::Reverse(j)));
    if let Some((j, c)) = top {
        println!("most popular item: {} with {c} users", ds.item_label(j));
    }
    let filtered = filter_dataset(&ds, 5, 5);
    println!("at least 5 users per item, 5 items per user: {}", filtered.summary());
    Ok(())
}
