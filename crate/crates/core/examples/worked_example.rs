//! Three movies, one seed: conditional-mean scores from a hand-written co-occurrence matrix.
//!
//! Items: 0 Terminator 2, 1 Toy Story, 2 The Terminator. `F[i][j]` is the fraction of users
//! who watched both i and j, so the diagonal is each movie's popularity.

use nalgebra::DMatrix;

use mvnrec::qualitative::{principal_axis_prediction, statistics_from_cooccurrence};
use mvnrec::{top_n, MvnConfig, MvnModel};

fn main() -> mvnrec::Result<()> {
    let names = ["Terminator 2", "Toy Story", "The Terminator"];
    let f = DMatrix::from_row_slice(3, 3, &[0.44, 0.21, 0.28, 0.21, 0.34, 0.17, 0.28, 0.17, 0.35]);
    let stats = statistics_from_cooccurrence(&f);
    println!("mean {:?}", stats.mean.as_slice());
    for row in stats.covariance.row_iter() {
        println!("cov  {:.4} {:.4} {:.4}", row[0], row[1], row[2]);
    }

    let model = MvnModel::from_statistics(MvnConfig::default(), stats.clone())?;
    let scores = model.predict_missing(&[0])?;
    println!("seed: {}", names[0]);
    for item in top_n(&scores, &[0], 2).items {
        println!("  {:<15} {:.3}", names[item], scores[item]);
    }

    // the same seed seen through a single principal axis of each two-movie pair
    for other in [2, 1] {
        let idx = [0, other];
        let sub = DMatrix::from_fn(2, 2, |a, b| f[(idx[a], idx[b])]);
        let pair = statistics_from_cooccurrence(&sub);
        let p = principal_axis_prediction(&pair.mean, &pair.covariance, &[1.0, 0.0]);
        println!("rank-1 pair ({}, {}): {:.2} {:.2}", names[0], names[other], p[0], p[1]);
    }
    Ok(())
}
