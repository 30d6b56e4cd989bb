//! Per-item mean and covariance of the interaction matrix, with shrinkage and correlation.
//!
//! All moments use the maximum-likelihood `1/n` normalization. The centered matrix
//! `X = R - 1 mu^T` is never materialized; the covariance comes from the co-occurrence
//! matrix as `F - mu mu^T`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::InteractionMatrix;
use crate::error::{check_unit_interval, Error, Result};

/// Default cap on the number of items for which dense m×m matrices are built.
pub const DEFAULT_ITEM_CAP: usize = 40_000;

const MAGIC: &[u8; 8] = b"MVNSTAT\0";
const FORMAT_VERSION: u32 = 1;

pub(crate) fn check_capacity(model: &str, items: usize, cap: usize) -> Result<()> {
    if items > cap {
        Err(Error::Capacity {
            model: model.to_owned(),
            items,
            cap,
        })
    } else {
        Ok(())
    }
}

/// Fraction of users interacting with each item.
pub fn mean_vector(r: &InteractionMatrix) -> Result<DVector<f64>> {
    let n = r.n_users();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let n = n as f64;
    Ok(DVector::from_iterator(
        r.n_items(),
        r.item_counts().into_iter().map(|c| c as f64 / n),
    ))
}

/// Unnormalized co-occurrence counts `R^T R`.
pub fn cooccurrence_counts(r: &InteractionMatrix) -> DMatrix<f64> {
    let m = r.n_items();
    let mut counts = DMatrix::<f64>::zeros(m, m);
    if m == 0 {
        return counts;
    }
    counts
        .as_mut_slice()
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(a, column)| {
            for &user in r.col(a) {
                for &b in r.row(user) {
                    column[b] += 1.0;
                }
            }
        });
    counts
}

/// Co-occurrence matrix `F = R^T R / n`: the fraction of users interacting with both items.
pub fn cooccurrence(r: &InteractionMatrix) -> Result<DMatrix<f64>> {
    if r.n_users() == 0 {
        return Err(Error::EmptyData);
    }
    Ok(cooccurrence_counts(r) / r.n_users() as f64)
}

/// Maximum-likelihood covariance `F - mu mu^T`.
pub fn covariance_matrix(r: &InteractionMatrix, mean: &DVector<f64>) -> Result<DMatrix<f64>> {
    let f = cooccurrence(r)?;
    Ok(covariance_from_cooccurrence(&f, mean))
}

/// `F - mu mu^T`, for when only the co-occurrence fractions are known.
pub fn covariance_from_cooccurrence(f: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut cov = f.clone();
    cov.ger(-1.0, mean, mean, 1.0);
    cov
}

/// Square roots of the covariance diagonal. Tiny negative round-off is clamped to zero.
pub fn stddev(cov: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(cov.nrows(), cov.diagonal().iter().map(|v| v.max(0.0).sqrt()))
}

/// `C_ij = Sigma_ij / (sd_i sd_j)`. Items with zero variance get an all-zero row and column,
/// diagonal included.
pub fn correlation_matrix(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let sd = stddev(cov);
    DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| {
        let denom = sd[i] * sd[j];
        if denom > 0.0 {
            if i == j {
                1.0
            } else {
                (cov[(i, j)] / denom).clamp(-1.0, 1.0)
            }
        } else {
            0.0
        }
    })
}

/// `(1 - alpha) Sigma + alpha (tr(Sigma) / m) I`.
pub fn shrink_covariance(cov: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>> {
    check_unit_interval("covariance shrinkage alpha", alpha)?;
    let m = cov.nrows();
    if m == 0 {
        return Ok(cov.clone());
    }
    let target = alpha * cov.trace() / m as f64;
    let mut out = cov * (1.0 - alpha);
    for i in 0..m {
        out[(i, i)] += target;
    }
    Ok(out)
}

/// `(1 - beta) mu + beta (sum(mu) / m) 1`.
pub fn shrink_mean(mean: &DVector<f64>, beta: f64) -> Result<DVector<f64>> {
    check_unit_interval("mean shrinkage beta", beta)?;
    let m = mean.len();
    if m == 0 {
        return Ok(mean.clone());
    }
    let target = beta * mean.sum() / m as f64;
    Ok(mean.map(|v| (1.0 - beta) * v + target))
}

/// Fitted item moments.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemStatistics {
    /// Shrunk mean (equal to the sample mean when `beta == 0`).
    pub mean: DVector<f64>,
    /// Shrunk covariance (equal to the sample covariance when `alpha == 0`).
    pub covariance: DMatrix<f64>,
    pub stddev: DVector<f64>,
    pub correlation: DMatrix<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl ItemStatistics {
    pub fn compute(r: &InteractionMatrix, alpha: f64, beta: f64, item_cap: usize) -> Result<Self> {
        check_unit_interval("covariance shrinkage alpha", alpha)?;
        check_unit_interval("mean shrinkage beta", beta)?;
        check_capacity("item covariance", r.n_items(), item_cap)?;
        let mean = mean_vector(r)?;
        let covariance = shrink_covariance(&covariance_matrix(r, &mean)?, alpha)?;
        Ok(Self::from_moments(shrink_mean(&mean, beta)?, covariance, alpha, beta))
    }

    /// Wraps precomputed moments, deriving the standard deviations and correlations.
    pub fn from_moments(mean: DVector<f64>, covariance: DMatrix<f64>, alpha: f64, beta: f64) -> Self {
        let stddev = stddev(&covariance);
        let correlation = correlation_matrix(&covariance);
        Self {
            mean,
            covariance,
            stddev,
            correlation,
            alpha,
            beta,
        }
    }

    pub fn n_items(&self) -> usize {
        self.mean.len()
    }

    /// Writes `magic, version, m, mu, sd, Sigma (row-major)` as little-endian values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let m = self.n_items();
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&(m as u64).to_le_bytes())?;
        write_f64s(&mut out, self.mean.iter().copied())?;
        write_f64s(&mut out, self.stddev.iter().copied())?;
        write_f64s(&mut out, self.covariance.transpose().iter().copied())?;
        Ok(())
    }

    /// Reads the format written by [`write_binary`](Self::write_binary). The correlation is
    /// recomputed and the shrinkage coefficients are reported as zero (the stored moments are
    /// taken as final).
    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut input, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, not an item statistics file".into()));
        }
        let version = read_u32(&mut input)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let m = read_u64(&mut input)? as usize;
        let mean = DVector::from_vec(read_f64s(&mut input, m)?);
        let sd = read_f64s(&mut input, m)?;
        let cov = DMatrix::from_row_slice(m, m, &read_f64s(&mut input, m * m)?);
        let mut stats = Self::from_moments(mean, cov, 0.0, 0.0);
        stats.stddev = DVector::from_vec(sd);
        Ok(stats)
    }
}

pub(crate) fn write_f64s<W: Write>(out: &mut W, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input
        .read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated input: {e}")))
}

pub(crate) fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(input, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64(input: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(input)?))
}

pub(crate) fn read_f64s<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    read_exact(input, &mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_point() -> InteractionMatrix {
        InteractionMatrix::from_rows(2, &[vec![0], vec![1]]).unwrap()
    }

    #[test]
    fn mean_of_symmetric_two_point_case() {
        let mu = mean_vector(&two_point()).unwrap();
        assert_eq!(mu.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn constant_column_has_unit_mean_and_zero_variance() {
        let r = InteractionMatrix::from_rows(2, &[vec![0, 1], vec![0]]).unwrap();
        let mu = mean_vector(&r).unwrap();
        assert_eq!(mu[0], 1.0);
        let cov = covariance_matrix(&r, &mu).unwrap();
        assert_eq!(cov.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        assert_eq!(cov.column(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
    }

    #[test]
    fn empty_matrix_has_no_statistics() {
        let r = InteractionMatrix::from_rows(3, &[]).unwrap();
        assert!(matches!(mean_vector(&r), Err(Error::EmptyData)));
    }

    #[test]
    fn covariance_of_two_point_case() {
        let r = two_point();
        let cov = covariance_matrix(&r, &mean_vector(&r).unwrap()).unwrap();
        assert_eq!(cov, DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]));
    }

    #[test]
    fn covariance_entry_from_published_cooccurrence() {
        let f = DMatrix::from_row_slice(3, 3, &[0.44, 0.21, 0.28, 0.21, 0.34, 0.17, 0.28, 0.17, 0.35]);
        let mu = f.diagonal();
        let cov = covariance_from_cooccurrence(&f, &mu);
        assert_abs_diff_eq!(cov[(0, 2)], 0.126, epsilon = 1e-12);
    }

    #[test]
    fn correlation_cases() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        assert_eq!(
            correlation_matrix(&cov),
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
        );

        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 2.0, 0.0]));
        let c = correlation_matrix(&diag);
        assert_eq!(c, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0])));
    }

    #[test]
    fn shrinkage_endpoints_and_midpoint() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        assert_eq!(shrink_covariance(&cov, 0.0).unwrap(), cov);
        assert_eq!(shrink_covariance(&cov, 1.0).unwrap(), DMatrix::identity(2, 2) * 0.25);
        assert_eq!(
            shrink_covariance(&cov, 0.5).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.25, -0.125, -0.125, 0.25])
        );
        assert!(matches!(shrink_covariance(&cov, 1.5), Err(Error::Domain { .. })));

        let mu = DVector::from_vec(vec![0.8, 0.2]);
        assert_eq!(shrink_mean(&mu, 0.0).unwrap(), mu);
        assert_eq!(shrink_mean(&mu, 1.0).unwrap().as_slice(), &[0.5, 0.5]);
        let half = shrink_mean(&mu, 0.5).unwrap();
        assert_abs_diff_eq!(half[0], 0.65, epsilon = 1e-15);
        assert_abs_diff_eq!(half[1], 0.35, epsilon = 1e-15);
        assert!(matches!(shrink_mean(&mu, -0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn capacity_guard() {
        let r = InteractionMatrix::from_rows(5, &[vec![0]]).unwrap();
        let err = ItemStatistics::compute(&r, 0.0, 0.0, 4).unwrap_err();
        assert!(matches!(err, Error::Capacity { items: 5, cap: 4, .. }));
    }

    #[test]
    fn binary_round_trip() {
        let r = InteractionMatrix::from_rows(3, &[vec![0, 1], vec![1, 2], vec![0]]).unwrap();
        let stats = ItemStatistics::compute(&r, 0.0, 0.0, DEFAULT_ITEM_CAP).unwrap();
        let mut buf = Vec::new();
        stats.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 8 + 8 * (3 + 3 + 9));
        let back = ItemStatistics::read_binary(&buf[..]).unwrap();
        assert_eq!(back, stats);
        assert!(ItemStatistics::read_binary(&buf[..20]).is_err());
        buf[0] = b'X';
        assert!(matches!(ItemStatistics::read_binary(&buf[..]), Err(Error::Format(_))));
    }

    fn arb_binary() -> impl Strategy<Value = InteractionMatrix> {
        prop::collection::vec(prop::collection::vec(any::<bool>(), 10), 20).prop_map(|rows| {
            let rows: Vec<Vec<usize>> = rows
                .iter()
                .map(|r| r.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j).collect())
                .collect();
            InteractionMatrix::from_rows(10, &rows).unwrap()
        })
    }

    proptest! {
        #[test]
        fn covariance_matches_centered_definition(r in arb_binary()) {
            let mu = mean_vector(&r).unwrap();
            let cov = covariance_matrix(&r, &mu).unwrap();
            let dense = r.to_dense();
            let n = r.n_users() as f64;
            for i in 0..10 {
                for j in 0..10 {
                    let direct: f64 = (0..r.n_users())
                        .map(|s| (dense[(s, i)] - mu[i]) * (dense[(s, j)] - mu[j]))
                        .sum::<f64>() / n;
                    prop_assert!((cov[(i, j)] - direct).abs() < 1e-10);
                    prop_assert!((cov[(i, j)] - cov[(j, i)]).abs() <= 1e-12);
                }
                prop_assert!(cov[(i, i)] >= 0.0);
                prop_assert!((0.0..=1.0).contains(&mu[i]));
            }
            let c = correlation_matrix(&cov);
            prop_assert!(c.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }

        #[test]
        fn shrinkage_preserves_totals_and_psd(r in arb_binary(), alpha in 0.0f64..=1.0, beta in 0.0f64..=1.0) {
            let mu = mean_vector(&r).unwrap();
            let cov = covariance_matrix(&r, &mu).unwrap();
            let shrunk = shrink_covariance(&cov, alpha).unwrap();
            prop_assert!((shrunk.trace() - cov.trace()).abs() < 1e-12);
            let min_eig = shrunk.symmetric_eigenvalues().min();
            prop_assert!(min_eig >= -1e-8);
            let mb = shrink_mean(&mu, beta).unwrap();
            prop_assert!((mb.sum() - mu.sum()).abs() < 1e-12);
        }
    }
}
