//! Item-based k-nearest-neighbour scoring.
//!
//! The similarity matrix `S` is the cosine of the binary item columns (or the item correlation
//! matrix). `S^(k)` keeps the `k` largest entries of each column. Unnormalized prediction sums
//! the sparsified similarities of the user's items, `R_i S^(k)`; normalized prediction divides
//! item `j`'s sum by the total similarity mass of its neighbourhood.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::InteractionMatrix;
use crate::error::{Error, Result};
use crate::recommender::Recommender;
use crate::stats::{self, DEFAULT_ITEM_CAP};

const MAGIC: &[u8; 8] = b"KNNSIM\0\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Similarity {
    #[default]
    Cosine,
    Correlation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnnConfig {
    /// Neighbourhood size; `None` keeps every item.
    pub k: Option<usize>,
    pub normalized: bool,
    pub similarity: Similarity,
    pub item_cap: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: None,
            normalized: false,
            similarity: Similarity::Cosine,
            item_cap: DEFAULT_ITEM_CAP,
        }
    }
}

#[derive(Clone, Debug)]
struct Fitted {
    similarity: DMatrix<f64>,
    k: usize,
    /// For `k < m`: entry `i` lists `(j, S_ij)` for every column `j` whose neighbourhood holds `i`.
    by_neighbour: Option<Vec<Vec<(usize, f64)>>>,
    /// Column sums of `S^(k)`.
    mass: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct KnnModel {
    config: KnnConfig,
    fitted: Option<Fitted>,
}

/// Cosine similarity of the binary item columns. Empty columns give zero rows and columns.
pub fn cosine_similarity(r: &InteractionMatrix) -> DMatrix<f64> {
    let mut s = stats::cooccurrence_counts(r);
    let counts: Vec<f64> = s.diagonal().iter().copied().collect();
    let m = counts.len();
    if m == 0 {
        return s;
    }
    s.as_mut_slice().par_chunks_mut(m).enumerate().for_each(|(j, col)| {
        for i in 0..m {
            let d = (counts[i] * counts[j]).sqrt();
            col[i] = if d > 0.0 { col[i] / d } else { 0.0 };
        }
    });
    s
}

/// Row indices of the `k` largest entries of `column`, ties to the lower index.
fn top_k_indices(column: &[f64], k: usize) -> Vec<usize> {
    let order = |a: &usize, b: &usize| column[*b].total_cmp(&column[*a]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..column.len()).collect();
    if k < idx.len() {
        if k > 0 {
            idx.select_nth_unstable_by(k - 1, order);
        }
        idx.truncate(k);
    }
    idx.sort_unstable_by(order);
    idx
}

impl KnnModel {
    pub fn new(config: KnnConfig) -> Self {
        Self { config, fitted: None }
    }

    pub fn config(&self) -> &KnnConfig {
        &self.config
    }

    /// Builds a model from an explicit similarity matrix.
    pub fn from_similarity(config: KnnConfig, similarity: DMatrix<f64>) -> Result<Self> {
        let m = similarity.nrows();
        if similarity.ncols() != m {
            return Err(Error::Config("similarity matrix must be square".into()));
        }
        let k = match config.k {
            None => m,
            Some(k) if (1..=m).contains(&k) => k,
            Some(k) => return Err(Error::Config(format!("neighbourhood size k={k} outside 1..={m}"))),
        };
        let (by_neighbour, mass) = if k < m {
            let columns: Vec<Vec<usize>> = (0..m)
                .into_par_iter()
                .map(|j| top_k_indices(similarity.column(j).as_slice(), k))
                .collect();
            let mut by_neighbour = vec![Vec::new(); m];
            let mut mass = vec![0.0; m];
            for (j, neighbours) in columns.iter().enumerate() {
                for &i in neighbours {
                    let v = similarity[(i, j)];
                    by_neighbour[i].push((j, v));
                    mass[j] += v;
                }
            }
            (Some(by_neighbour), mass)
        } else {
            let mass = similarity.column_iter().map(|c| c.sum()).collect();
            (None, mass)
        };
        Ok(Self {
            config,
            fitted: Some(Fitted {
                similarity,
                k,
                by_neighbour,
                mass,
            }),
        })
    }

    fn fitted(&self) -> Result<&Fitted> {
        self.fitted.as_ref().ok_or(Error::Unfitted("knn"))
    }

    pub fn similarity(&self) -> Option<&DMatrix<f64>> {
        self.fitted.as_ref().map(|f| &f.similarity)
    }

    /// Effective neighbourhood size after fitting.
    pub fn k(&self) -> Option<usize> {
        self.fitted.as_ref().map(|f| f.k)
    }

    /// Entry `(i, j)` of the sparsified matrix `S^(k)`.
    pub fn sparsified_entry(&self, i: usize, j: usize) -> Option<f64> {
        let f = self.fitted.as_ref()?;
        match &f.by_neighbour {
            None => Some(f.similarity[(i, j)]),
            Some(rows) => Some(rows[i].iter().find(|(col, _)| *col == j).map_or(0.0, |(_, v)| *v)),
        }
    }

    /// Scores for a user with the given interactions.
    pub fn predict(&self, seed: &[usize]) -> Result<Vec<f64>> {
        let f = self.fitted()?;
        let m = f.mass.len();
        let mut used = vec![false; m];
        let mut scores = vec![0.0; m];
        for &i in seed {
            let flag = used.get_mut(i).ok_or(Error::IndexOutOfRange { index: i, len: m })?;
            if std::mem::replace(flag, true) {
                continue;
            }
            match &f.by_neighbour {
                // S is symmetric: row i equals column i
                None => {
                    for (s, v) in scores.iter_mut().zip(f.similarity.column(i).iter()) {
                        *s += v;
                    }
                }
                Some(rows) => {
                    for &(j, v) in &rows[i] {
                        scores[j] += v;
                    }
                }
            }
        }
        if self.config.normalized {
            for (s, &mass) in scores.iter_mut().zip(&f.mass) {
                *s = if mass != 0.0 { *s / mass } else { 0.0 };
            }
        }
        Ok(scores)
    }

    /// Writes `magic, version, m, k` and then `S` row-major, little-endian.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let f = self.fitted()?;
        let io = |e| Error::Format(format!("write failed: {e}"));
        let m = f.similarity.nrows();
        out.write_all(MAGIC).map_err(io)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
        out.write_all(&(m as u64).to_le_bytes()).map_err(io)?;
        out.write_all(&(f.k as u64).to_le_bytes()).map_err(io)?;
        stats::write_f64s(&mut out, f.similarity.transpose().iter().copied()).map_err(io)
    }

    pub fn read_binary<R: Read>(mut input: R, normalized: bool) -> Result<Self> {
        let mut magic = [0u8; 8];
        stats::read_exact(&mut input, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, not a similarity file".into()));
        }
        let version = stats::read_u32(&mut input)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let m = stats::read_u64(&mut input)? as usize;
        let k = stats::read_u64(&mut input)? as usize;
        let values = stats::read_f64s(&mut input, m * m)?;
        let config = KnnConfig {
            k: (k < m).then_some(k),
            normalized,
            ..KnnConfig::default()
        };
        Self::from_similarity(config, DMatrix::from_row_slice(m, m, &values))
    }
}

impl Recommender for KnnModel {
    fn name(&self) -> String {
        "knn".into()
    }

    fn fit(&mut self, train: &InteractionMatrix) -> Result<()> {
        stats::check_capacity("knn", train.n_items(), self.config.item_cap)?;
        let similarity = match self.config.similarity {
            Similarity::Cosine => cosine_similarity(train),
            Similarity::Correlation => {
                let mean = stats::mean_vector(train)?;
                stats::correlation_matrix(&stats::covariance_matrix(train, &mean)?)
            }
        };
        *self = Self::from_similarity(self.config.clone(), similarity)?;
        Ok(())
    }

    fn score_user(&self, _user: usize, seed: &[usize]) -> Result<Vec<f64>> {
        self.predict(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fit(train: &InteractionMatrix, config: KnnConfig) -> KnnModel {
        let mut model = KnnModel::new(config);
        model.fit(train).unwrap();
        model
    }

    fn binary_matrix(rows: usize, cols: usize) -> impl Strategy<Value = InteractionMatrix> {
        prop::collection::vec(prop::collection::vec(any::<bool>(), cols), rows).prop_map(move |bits| {
            let rows: Vec<Vec<usize>> = bits
                .iter()
                .map(|r| r.iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| j).collect())
                .collect();
            InteractionMatrix::from_rows(cols, &rows).unwrap()
        })
    }

    #[test]
    fn disjoint_columns_give_identity() {
        let train = InteractionMatrix::from_rows(3, &[vec![0], vec![1], vec![2], vec![0]]).unwrap();
        let s = cosine_similarity(&train);
        assert_eq!(s, DMatrix::identity(3, 3));
    }

    #[test]
    fn identical_columns_have_unit_similarity() {
        let train = InteractionMatrix::from_rows(3, &[vec![0, 1], vec![0, 1, 2], vec![2]]).unwrap();
        let s = cosine_similarity(&train);
        assert!((s[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((s[(0, 2)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_column_has_zero_similarity() {
        let train = InteractionMatrix::from_rows(3, &[vec![0, 1], vec![1]]).unwrap();
        let s = cosine_similarity(&train);
        assert!(s.row(2).iter().chain(s.column(2).iter()).all(|v| *v == 0.0));
    }

    #[test]
    fn single_seed_scores_equal_its_column() {
        let train = InteractionMatrix::from_rows(3, &[vec![0, 1], vec![0, 1, 2], vec![2], vec![1]]).unwrap();
        let model = fit(&train, KnnConfig::default());
        let s = model.similarity().unwrap();
        let expected: Vec<f64> = s.column(0).iter().copied().collect();
        assert_eq!(model.predict(&[0]).unwrap(), expected);
        assert_eq!(model.predict(&[0, 0]).unwrap(), expected);
    }

    #[test]
    fn empty_seed_scores_zero() {
        let train = InteractionMatrix::from_rows(3, &[vec![0, 1], vec![2]]).unwrap();
        let model = fit(&train, KnnConfig::default());
        assert_eq!(model.predict(&[]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn invalid_k_and_unfitted() {
        let train = InteractionMatrix::from_rows(3, &[vec![0, 1]]).unwrap();
        for k in [0, 4] {
            let mut model = KnnModel::new(KnnConfig {
                k: Some(k),
                ..KnnConfig::default()
            });
            assert!(matches!(model.fit(&train), Err(Error::Config(_))));
        }
        assert!(matches!(
            KnnModel::new(KnnConfig::default()).predict(&[0]),
            Err(Error::Unfitted(_))
        ));
        let mut capped = KnnModel::new(KnnConfig {
            item_cap: 2,
            ..KnnConfig::default()
        });
        assert!(matches!(capped.fit(&train), Err(Error::Capacity { .. })));
    }

    #[test]
    fn top_k_ties_go_to_lower_index() {
        assert_eq!(top_k_indices(&[0.5, 0.9, 0.5, 0.5], 2), vec![1, 0]);
        assert_eq!(top_k_indices(&[0.5, 0.9, 0.5, 0.5], 3), vec![1, 0, 2]);
    }

    #[test]
    fn normalized_zero_mass_scores_zero() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let model = KnnModel::from_similarity(
            KnnConfig {
                normalized: true,
                ..KnnConfig::default()
            },
            s,
        )
        .unwrap();
        assert_eq!(model.predict(&[0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn correlation_mode_uses_correlation_matrix() {
        let train = InteractionMatrix::from_rows(3, &[vec![0, 1, 2], vec![0, 2], vec![1, 2], vec![2]]).unwrap();
        let model = fit(
            &train,
            KnnConfig {
                similarity: Similarity::Correlation,
                ..KnnConfig::default()
            },
        );
        // independent pair, constant third column
        assert_eq!(model.predict(&[0]).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn similarity_binary_round_trip() {
        let train = InteractionMatrix::from_rows(4, &[vec![0, 1], vec![1, 2, 3], vec![0, 3]]).unwrap();
        let model = fit(
            &train,
            KnnConfig {
                k: Some(2),
                ..KnnConfig::default()
            },
        );
        let mut buf = Vec::new();
        model.write_binary(&mut buf).unwrap();
        let back = KnnModel::read_binary(&buf[..], false).unwrap();
        assert_eq!(back.similarity(), model.similarity());
        assert_eq!(back.predict(&[1, 3]).unwrap(), model.predict(&[1, 3]).unwrap());
    }

    proptest! {
        #[test]
        fn sparsified_columns_keep_the_k_largest(train in binary_matrix(10, 7), k in 1usize..=7) {
            let model = fit(&train, KnnConfig { k: Some(k), ..KnnConfig::default() });
            let s = model.similarity().unwrap();
            for j in 0..7 {
                let kept: Vec<usize> = (0..7)
                    .filter(|&i| model.sparsified_entry(i, j).unwrap() != 0.0)
                    .collect();
                prop_assert!(kept.len() <= k);
                let mut sorted: Vec<f64> = s.column(j).iter().copied().collect();
                sorted.sort_by(|a, b| b.total_cmp(a));
                for &i in &kept {
                    prop_assert!(s[(i, j)] >= sorted[k - 1]);
                }
            }
            prop_assert!((s - s.transpose()).abs().max() < 1e-15);
        }

        #[test]
        fn full_neighbourhood_score_is_seed_size_times_mean_similarity(
            train in binary_matrix(12, 6),
            seed in prop::collection::btree_set(0usize..6, 1..5),
        ) {
            let seed: Vec<usize> = seed.into_iter().collect();
            let model = fit(&train, KnnConfig::default());
            let s = model.similarity().unwrap();
            let scores = model.predict(&seed).unwrap();
            for j in 0..6 {
                let mean = seed.iter().map(|&i| s[(i, j)]).sum::<f64>() / seed.len() as f64;
                prop_assert!((scores[j] - seed.len() as f64 * mean).abs() < 1e-12);
            }
        }

        #[test]
        fn duplicated_rows_leave_scores_unchanged(train in binary_matrix(8, 5), seed in 0usize..5) {
            let rows: Vec<Vec<usize>> = (0..8).map(|u| train.row(u).to_vec()).collect();
            let doubled: Vec<Vec<usize>> = rows.iter().chain(rows.iter()).cloned().collect();
            let doubled = InteractionMatrix::from_rows(5, &doubled).unwrap();
            let a = fit(&train, KnnConfig::default()).predict(&[seed]).unwrap();
            let b = fit(&doubled, KnnConfig::default()).predict(&[seed]).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
