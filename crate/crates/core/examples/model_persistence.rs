//! Fits MVN, kNN and MF models, writes them to bytes and reads them back.

use mvnrec::dataset::synthetic_interactions;
use mvnrec::{KnnConfig, KnnModel, MfConfig, MfModel, MvnConfig, MvnModel, Recommender};

fn main() -> mvnrec::Result<()> {
    let ds = synthetic_interactions(300, 50, 3, 0.1, 4.0, 2);
    let r = &ds.interactions;
    let seed = [0, 3];

    let mut mvn = MvnModel::new(MvnConfig {
        ridge: 1.0,
        ..MvnConfig::default()
    });
    mvn.fit(r)?;
    let mut bytes = Vec::new();
    mvn.write_binary(&mut bytes)?;
    let loaded = MvnModel::read_binary(&mut bytes.as_slice())?;
    println!(
        "mvn: {} bytes, same scores: {}",
        bytes.len(),
        loaded.predict_missing(&seed)? == mvn.predict_missing(&seed)?
    );

    let mut knn = KnnModel::new(KnnConfig {
        k: Some(10),
        ..KnnConfig::default()
    });
    knn.fit(r)?;
    let mut bytes = Vec::new();
    knn.write_binary(&mut bytes)?;
    let loaded = KnnModel::read_binary(&mut bytes.as_slice(), false)?;
    println!(
        "knn: {} bytes, same scores: {}",
        bytes.len(),
        loaded.predict(&seed)? == knn.predict(&seed)?
    );

    let mut mf = MfModel::new(MfConfig {
        dim: 8,
        lambda: 1.0,
        epochs: 20,
        ..MfConfig::default()
    });
    mf.fit(r)?;
    let mut bytes = Vec::new();
    mf.write_binary(&mut bytes)?;
    let loaded = MfModel::read_binary(&mut bytes.as_slice())?;
    println!(
        "mf: {} bytes, same scores: {}",
        bytes.len(),
        loaded.score_user(0, r.row(0))? == mf.score_user(0, r.row(0))?
    );
    Ok(())
}
