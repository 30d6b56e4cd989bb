//! Runs the reference checks: MVN against ridge regression, ALS against truncated SVD,
//! normalized kNN against kernel regression, and the single-inverse observed MVN against
//! per-item solves.

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let reports = mvnrec::oracles::run_suite(seed);
    for r in &reports {
        println!("{r}");
    }
    if reports.iter().any(|r| !r.pass) {
        std::process::exit(1);
    }
}
