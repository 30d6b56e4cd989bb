//! Conditional-mean ranking under a multivariate normal model of user rows.
//!
//! Training computes the item mean vector and covariance matrix of the complete binary
//! matrix. Prediction conditions on the user's interactions: with non-interactions treated as
//! missing, the unknown coordinates get
//!
//! ```text
//! mu_J + (1 - mu_I)^T (Sigma_II + lambda I)^-1 Sigma_IJ
//! ```
//!
//! and an empty seed predicts `mu`. Treating non-interactions as observed instead predicts
//! each item from all the others, `E[x_j | x_{-j}]`, which needs the inverse of every
//! `(m-1)×(m-1)` principal submatrix. Those come from one full inverse `K = Sigma^-1`: removing
//! row and column `j` is the rank-one downdate `K_OO - K_Oj K_jO / K_jj`, and multiplying it by
//! `Sigma_Oj` collapses to `-K_Oj / K_jj`, so
//!
//! ```text
//! E[x_j | x_{-j}] = x_j - (K (x - mu))_j / K_jj
//! ```
//!
//! In popularity-free mode the mean is replaced by zero and the covariance by the correlation
//! matrix, which removes the item-popularity component from the ranking.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dataset::InteractionMatrix;
use crate::error::{check_non_negative, check_unit_interval, Error, Result};
use crate::linalg::{invert_symmetric, solve_symmetric_vec, SolvePath};
use crate::recommender::{NonInteractions, Recommender};
use crate::stats::{self, ItemStatistics, DEFAULT_ITEM_CAP};

const MAGIC: &[u8; 8] = b"MVNMODL\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct MvnConfig {
    /// Covariance shrinkage toward `tr(Sigma)/m * I`, in `[0, 1]`.
    pub alpha: f64,
    /// Mean shrinkage toward the average popularity, in `[0, 1]`.
    pub beta: f64,
    /// Ridge added to the seed block before solving.
    pub ridge: f64,
    pub popularity_free: bool,
    pub non_interactions: NonInteractions,
    /// Keep only the leading eigenpairs of the covariance.
    pub eigen_rank: Option<usize>,
    pub item_cap: usize,
}

impl Default for MvnConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            ridge: 0.0,
            popularity_free: false,
            non_interactions: NonInteractions::Missing,
            eigen_rank: None,
            item_cap: DEFAULT_ITEM_CAP,
        }
    }
}

impl MvnConfig {
    fn validate(&self) -> Result<()> {
        check_unit_interval("covariance shrinkage alpha", self.alpha)?;
        check_unit_interval("mean shrinkage beta", self.beta)?;
        check_non_negative("ridge lambda", self.ridge)
    }
}

#[derive(Clone, Debug)]
struct Fitted {
    stats: ItemStatistics,
    location: DVector<f64>,
    scatter: DMatrix<f64>,
    precision: Option<DMatrix<f64>>,
    precision_path: Option<SolvePath>,
}

#[derive(Clone, Debug)]
pub struct MvnModel {
    config: MvnConfig,
    fitted: Option<Fitted>,
}

impl MvnModel {
    pub fn new(config: MvnConfig) -> Self {
        Self { config, fitted: None }
    }

    pub fn config(&self) -> &MvnConfig {
        &self.config
    }

    /// Builds a model directly from item moments, e.g. published or loaded ones.
    pub fn from_statistics(config: MvnConfig, stats: ItemStatistics) -> Result<Self> {
        config.validate()?;
        let mut model = Self::new(config);
        model.finalize(stats);
        Ok(model)
    }

    fn finalize(&mut self, stats: ItemStatistics) {
        let m = stats.n_items();
        let (location, mut scatter) = if self.config.popularity_free {
            (DVector::zeros(m), stats.correlation.clone())
        } else {
            (stats.mean.clone(), stats.covariance.clone())
        };
        if let Some(rank) = self.config.eigen_rank {
            if rank < m {
                scatter = leading_eigen_part(&scatter, rank);
            }
        }
        let (precision, precision_path) = match self.config.non_interactions {
            NonInteractions::Observed => {
                let mut shifted = scatter.clone();
                for i in 0..m {
                    shifted[(i, i)] += self.config.ridge;
                }
                let (inv, path) = invert_symmetric(&shifted);
                (Some(inv), Some(path))
            }
            NonInteractions::Missing => (None, None),
        };
        self.fitted = Some(Fitted {
            stats,
            location,
            scatter,
            precision,
            precision_path,
        });
    }

    fn fitted(&self) -> Result<&Fitted> {
        self.fitted.as_ref().ok_or(Error::Unfitted("mvn"))
    }

    pub fn statistics(&self) -> Option<&ItemStatistics> {
        self.fitted.as_ref().map(|f| &f.stats)
    }

    /// How the full inverse for the observed variant was obtained, if it was needed.
    pub fn precision_path(&self) -> Option<SolvePath> {
        self.fitted.as_ref().and_then(|f| f.precision_path)
    }

    pub fn n_items(&self) -> Option<usize> {
        self.fitted.as_ref().map(|f| f.location.len())
    }

    /// Conditional mean of every non-seed item given the seed interactions. Seed positions
    /// hold their known value 1.
    pub fn predict_missing(&self, seed: &[usize]) -> Result<Vec<f64>> {
        let f = self.fitted()?;
        let m = f.location.len();
        let mut seed = seed.to_vec();
        seed.sort_unstable();
        seed.dedup();
        if let Some(&bad) = seed.iter().find(|&&j| j >= m) {
            return Err(Error::IndexOutOfRange { index: bad, len: m });
        }
        let mut scores = f.location.as_slice().to_vec();
        if seed.is_empty() {
            return Ok(scores);
        }
        let k = seed.len();
        let block = DMatrix::from_fn(k, k, |a, b| {
            f.scatter[(seed[a], seed[b])] + if a == b { self.config.ridge } else { 0.0 }
        });
        let deviation = DVector::from_iterator(k, seed.iter().map(|&j| 1.0 - f.location[j]));
        let (weights, _) = solve_symmetric_vec(&block, &deviation);
        for (w, &s) in weights.iter().zip(&seed) {
            // Sigma is symmetric: column s is row s
            for (score, c) in scores.iter_mut().zip(f.scatter.column(s).iter()) {
                *score += w * c;
            }
        }
        for &s in &seed {
            scores[s] = 1.0;
        }
        Ok(scores)
    }

    /// Prediction of every item from the user's full 0/1 row, all other items observed.
    pub fn predict_observed(&self, row: &[f64]) -> Result<Vec<f64>> {
        let f = self.fitted()?;
        let m = f.location.len();
        if row.len() != m {
            return Err(Error::Config(format!(
                "observed row has {} entries, model has {m} items",
                row.len()
            )));
        }
        let precision = match &f.precision {
            Some(p) => p,
            None => {
                return Err(Error::Config(
                    "model was fitted for missing non-interactions; refit with the observed variant".into(),
                ))
            }
        };
        let centered = DVector::from_iterator(m, row.iter().zip(f.location.iter()).map(|(x, mu)| x - mu));
        let weighted = precision * &centered;
        Ok((0..m)
            .map(|j| {
                let kjj = precision[(j, j)];
                if kjj > 0.0 {
                    row[j] - weighted[j] / kjj
                } else {
                    f.location[j]
                }
            })
            .collect())
    }

    /// Writes `magic, version, ridge, alpha, beta, flags, eigen_rank` followed by the item
    /// statistics block.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let f = self.fitted()?;
        let io = |e| Error::Format(format!("write failed: {e}"));
        let mut header = Vec::new();
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        header.extend_from_slice(&self.config.ridge.to_le_bytes());
        header.extend_from_slice(&self.config.alpha.to_le_bytes());
        header.extend_from_slice(&self.config.beta.to_le_bytes());
        let flags = u8::from(self.config.popularity_free)
            | (u8::from(self.config.non_interactions == NonInteractions::Observed) << 1);
        header.push(flags);
        header.extend_from_slice(&(self.config.eigen_rank.unwrap_or(0) as u64).to_le_bytes());
        out.write_all(&header).map_err(io)?;
        f.stats.write_binary(&mut out).map_err(io)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        stats::read_exact(&mut input, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, not an MVN model file".into()));
        }
        let version = stats::read_u32(&mut input)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let ridge = stats::read_f64(&mut input)?;
        let alpha = stats::read_f64(&mut input)?;
        let beta = stats::read_f64(&mut input)?;
        let mut flags = [0u8; 1];
        stats::read_exact(&mut input, &mut flags)?;
        let rank = stats::read_u64(&mut input)? as usize;
        let mut stats = ItemStatistics::read_binary(&mut input)?;
        stats.alpha = alpha;
        stats.beta = beta;
        let config = MvnConfig {
            alpha,
            beta,
            ridge,
            popularity_free: flags[0] & 1 != 0,
            non_interactions: if flags[0] & 2 != 0 {
                NonInteractions::Observed
            } else {
                NonInteractions::Missing
            },
            eigen_rank: (rank > 0).then_some(rank),
            item_cap: DEFAULT_ITEM_CAP,
        };
        Self::from_statistics(config, stats)
    }
}

/// `V_d diag(lambda_d) V_d^T` for the `rank` largest eigenvalues.
fn leading_eigen_part(a: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for &k in order.iter().take(rank) {
        let v = eig.eigenvectors.column(k);
        out.ger(eig.eigenvalues[k], &v, &v, 1.0);
    }
    out
}

impl Recommender for MvnModel {
    fn name(&self) -> String {
        "mvn".into()
    }

    fn fit(&mut self, train: &InteractionMatrix) -> Result<()> {
        self.config.validate()?;
        let stats =
            ItemStatistics::compute(train, self.config.alpha, self.config.beta, self.config.item_cap).map_err(|e| {
                match e {
                    Error::EmptyData => Error::Unfitted("mvn"),
                    other => other,
                }
            })?;
        self.finalize(stats);
        Ok(())
    }

    fn score_user(&self, _user: usize, seed: &[usize]) -> Result<Vec<f64>> {
        match self.config.non_interactions {
            NonInteractions::Missing => self.predict_missing(seed),
            NonInteractions::Observed => {
                let m = self.n_items().ok_or(Error::Unfitted("mvn"))?;
                let mut row = vec![0.0; m];
                for &j in seed {
                    *row.get_mut(j).ok_or(Error::IndexOutOfRange { index: j, len: m })? = 1.0;
                }
                self.predict_observed(&row)
            }
        }
    }
}
