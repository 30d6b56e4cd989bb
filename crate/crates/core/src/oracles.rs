//! Brute-force reference computations for checking the fast model paths on small inputs.
//!
//! Nothing here calls the crate's solver module. Linear systems go through a local
//! Gauss-Jordan elimination and decompositions through nalgebra's SVD, so a bug in the
//! production shortcuts cannot hide in a shared helper.
//!
//! * MVN conditional mean with ridge `λ` equals ridge regression of the target columns on the
//!   seed columns of the centered matrix `X` with ridge `nλ`.
//! * Converged least-squares factorization with `λ = 0` reproduces the rank-`d` truncated SVD,
//!   and its predictions are the projections `X_i V_d V_d^T`.
//! * Normalized kNN over all items equals Nadaraya-Watson regression with the cosine kernel.
//! * The single-inverse observed MVN prediction equals `m` separate leave-one-out solves.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::InteractionMatrix;
use crate::knn::{KnnConfig, KnnModel};
use crate::mf::fit_als;
use crate::mvn::{MvnConfig, MvnModel};
use crate::recommender::{NonInteractions, Recommender};
use crate::stats::ItemStatistics;

/// Solves `a x = b` by Gauss-Jordan elimination with partial pivoting. `None` when a pivot
/// falls below `1e-13` of the largest entry.
pub fn gauss_jordan_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "square system");
    assert_eq!(b.nrows(), n, "matching right-hand side");
    let k = b.ncols();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if n > 0 && scale == 0.0 {
        return None;
    }
    let mut aug = DMatrix::zeros(n, n + k);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, k)).copy_from(b);
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| aug[(x, col)].abs().total_cmp(&aug[(y, col)].abs()))?;
        if aug[(pivot, col)].abs() <= 1e-13 * scale {
            return None;
        }
        aug.swap_rows(col, pivot);
        let p = aug[(col, col)];
        for c in 0..n + k {
            aug[(col, c)] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[(r, col)];
                if f != 0.0 {
                    for c in 0..n + k {
                        aug[(r, c)] -= f * aug[(col, c)];
                    }
                }
            }
        }
    }
    Some(aug.view((0, n), (n, k)).into_owned())
}

/// Column means and the centered matrix `X = R - 1 mu^T`.
pub fn center_columns(r: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = r.nrows().max(1) as f64;
    let mean = DVector::from_iterator(r.ncols(), r.column_iter().map(|c| c.sum() / n));
    let mut x = r.clone();
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    (mean, x)
}

/// Ridge regression of `X[:, targets]` on `X[:, seed]`, applied to one user's seed values.
/// Returns predictions for `targets`, shifted back by their means.
pub fn regression_oracle(
    x: &DMatrix<f64>,
    mean: &DVector<f64>,
    seed: &[usize],
    targets: &[usize],
    lambda: f64,
    seed_values: &[f64],
) -> Vec<f64> {
    if seed.is_empty() {
        return targets.iter().map(|&j| mean[j]).collect();
    }
    let xi = x.select_columns(seed);
    let xj = x.select_columns(targets);
    let gram = xi.transpose() * &xi + DMatrix::identity(seed.len(), seed.len()) * lambda;
    let rhs = xi.transpose() * &xj;
    let coef = gauss_jordan_solve(&gram, &rhs).unwrap_or_else(|| {
        gram.svd(true, true)
            .solve(&rhs, 1e-12)
            .expect("svd computed with both factors")
    });
    let centered = DVector::from_iterator(seed.len(), seed.iter().zip(seed_values).map(|(&j, v)| v - mean[j]));
    let pred = coef.transpose() * centered;
    targets.iter().enumerate().map(|(t, &j)| pred[t] + mean[j]).collect()
}

/// Singular values descending with the matching left and right vectors.
fn sorted_svd(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = u.select_columns(&order);
    let v = vt.transpose().select_columns(&order);
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    (u, s, v)
}

/// Rank-`d` truncated SVD reconstruction `U Psi_d V^T`.
pub fn truncated_svd_oracle(x: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let (u, s, v) = sorted_svd(x);
    let d = d.min(s.len());
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for (k, sk) in s.iter().enumerate().take(d) {
        out += u.column(k) * v.column(k).transpose() * *sk;
    }
    out
}

/// Row `i` of `X` projected on the leading `d` right singular vectors.
pub fn projection_oracle(x: &DMatrix<f64>, d: usize, i: usize) -> DVector<f64> {
    let (_, s, v) = sorted_svd(x);
    let vd = v.columns(0, d.min(s.len()));
    let row = x.row(i).transpose();
    vd * (vd.transpose() * row)
}

/// Cosine similarity of the columns of a dense matrix, by explicit sums.
pub fn cosine_oracle(r: &DMatrix<f64>) -> DMatrix<f64> {
    let m = r.ncols();
    DMatrix::from_fn(m, m, |i, j| {
        let (a, b) = (r.column(i), r.column(j));
        let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na > 0.0 && nb > 0.0 {
            dot / (na * nb)
        } else {
            0.0
        }
    })
}

/// Kernel regression `sum_k S_jk r_k / sum_k S_jk`; zero where the kernel mass vanishes.
pub fn nadaraya_watson_oracle(s: &DMatrix<f64>, row: &[f64]) -> Vec<f64> {
    (0..s.nrows())
        .map(|j| {
            let mass: f64 = s.row(j).iter().sum();
            if mass == 0.0 {
                0.0
            } else {
                s.row(j).iter().zip(row).map(|(w, r)| w * r).sum::<f64>() / mass
            }
        })
        .collect()
}

/// Each item's conditional mean given all other coordinates of `row`, from a separate
/// `(m-1)×(m-1)` solve per item. `None` if any of those systems is singular.
pub fn sherman_morrison_oracle(cov: &DMatrix<f64>, mean: &DVector<f64>, row: &[f64]) -> Option<Vec<f64>> {
    let m = mean.len();
    (0..m)
        .map(|j| {
            let others: Vec<usize> = (0..m).filter(|&k| k != j).collect();
            if others.is_empty() {
                return Some(mean[j]);
            }
            let block = cov.select_rows(&others).select_columns(&others);
            let cross = DMatrix::from_iterator(m - 1, 1, others.iter().map(|&k| cov[(k, j)]));
            let coef = gauss_jordan_solve(&block, &cross)?;
            let dev: f64 = others
                .iter()
                .enumerate()
                .map(|(t, &k)| (row[k] - mean[k]) * coef[(t, 0)])
                .sum();
            Some(mean[j] + dev)
        })
        .collect()
}

/// Outcome of one oracle comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub case: String,
    pub instances: usize,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(case: impl Into<String>, instances: usize, deviation: f64, tolerance: f64) -> Self {
        Self {
            case: case.into(),
            instances,
            deviation,
            tolerance,
            // NaN deviations fail
            pass: deviation <= tolerance,
        }
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} ({} instances): max deviation {:.3e}, tolerance {:.0e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.case,
            self.instances,
            self.deviation,
            self.tolerance
        )
    }
}

fn random_binary(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    let density = rng.random_range(0.2..0.7);
    DMatrix::from_fn(n, m, |_, _| if rng.random_bool(density) { 1.0 } else { 0.0 })
}

fn max_abs_diff(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, |m, d| {
        if d.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(d)
        }
    })
}

/// MVN missing-variant predictions against ridge regression on random instances.
pub fn check_mvn_regression(instances: usize, rng_seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(2..=20);
        let m = rng.random_range(2..=15);
        let dense = random_binary(&mut rng, n, m);
        let lambda = 10f64.powf(rng.random_range(-4.0..0.0));
        let k = rng.random_range(1..m.min(6));
        let mut seed = sample(&mut rng, m, k).into_vec();
        seed.sort_unstable();
        let targets: Vec<usize> = (0..m).filter(|j| !seed.contains(j)).collect();

        let mut model = MvnModel::new(MvnConfig {
            ridge: lambda,
            ..MvnConfig::default()
        });
        let fitted = model.fit(&InteractionMatrix::from_dense(&dense));
        let dev = match fitted.and_then(|_| model.predict_missing(&seed)) {
            Ok(scores) => {
                let (mean, x) = center_columns(&dense);
                let oracle = regression_oracle(&x, &mean, &seed, &targets, n as f64 * lambda, &vec![1.0; k]);
                max_abs_diff(targets.iter().map(|&j| scores[j]), oracle)
            }
            Err(_) => f64::NAN,
        };
        worst = if dev.is_nan() { f64::NAN } else { worst.max(dev) };
    }
    OracleReport::new("mvn conditional mean = ridge regression", instances, worst, 1e-8)
}

/// Converged ALS with `λ = 0` against the truncated SVD: relative Frobenius distance of the
/// reconstructions, and the largest deviation of a prediction row from its projection.
pub fn check_als_svd(instances: usize, rng_seed: u64) -> (OracleReport, OracleReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (mut worst_rec, mut worst_proj) = (0.0f64, 0.0f64);
    let (mut count_rec, mut count_proj) = (0, 0);
    for instance in 0..instances {
        let (n, m, d) = (50, 30, 5);
        let (_, x) = center_columns(&random_binary(&mut rng, n, m));
        let fit = fit_als(&x, d, 0.0, 20_000, 1e-15, rng_seed.wrapping_add(instance as u64));
        let rec = &fit.p * fit.g.transpose();
        let svd = truncated_svd_oracle(&x, d);
        worst_rec = worst_rec.max((&rec - &svd).norm() / svd.norm());
        count_rec += 1;

        // small planted low-rank case with a clear spectral gap
        let (pn, pm, pd) = (12, 8, 2);
        let a = DMatrix::from_fn(pn, pd, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(pd, pm, |_, _| rng.random_range(-1.0..1.0));
        let noise = DMatrix::from_fn(pn, pm, |_, _| rng.random_range(-0.05..0.05));
        let planted = a * b + noise;
        let fit = fit_als(&planted, pd, 0.0, 20_000, 1e-15, rng_seed ^ instance as u64);
        for i in 0..pn {
            let pred = fit.g.clone() * fit.p.row(i).transpose();
            let proj = projection_oracle(&planted, pd, i);
            worst_proj = worst_proj.max(max_abs_diff(pred.iter().copied(), proj.iter().copied()));
        }
        count_proj += 1;
    }
    (
        OracleReport::new(
            "als(lambda=0) = truncated svd, relative frobenius",
            count_rec,
            worst_rec,
            1e-3,
        ),
        OracleReport::new(
            "als predictions = projection on leading singular vectors",
            count_proj,
            worst_proj,
            1e-6,
        ),
    )
}

/// Normalized kNN over all items against cosine-kernel regression.
pub fn check_knn_kernel_regression(instances: usize, rng_seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let dense = random_binary(&mut rng, 12, 6);
        let mut model = KnnModel::new(KnnConfig {
            normalized: true,
            ..KnnConfig::default()
        });
        let r = InteractionMatrix::from_dense(&dense);
        if model.fit(&r).is_err() {
            worst = f64::NAN;
            continue;
        }
        let kernel = cosine_oracle(&dense);
        for u in 0..dense.nrows() {
            let row: Vec<f64> = dense.row(u).iter().copied().collect();
            let fast = model.score_user(u, r.row(u)).unwrap_or_default();
            worst = worst.max(max_abs_diff(fast, nadaraya_watson_oracle(&kernel, &row)));
        }
    }
    OracleReport::new("normalized knn(k=m) = nadaraya-watson", instances, worst, 1e-12)
}

/// Single-inverse observed MVN prediction against leave-one-out solves.
pub fn check_sherman_morrison(instances: usize, rng_seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut worst = 0.0f64;
    let mut used = 0;
    for _ in 0..instances {
        let m = rng.random_range(2..=50);
        let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let cov = &a * a.transpose() / m as f64 + DMatrix::identity(m, m) * 0.05;
        let mean = DVector::from_fn(m, |_, _| rng.random_range(0.0..1.0));
        let row: Vec<f64> = (0..m).map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 }).collect();
        let Some(oracle) = sherman_morrison_oracle(&cov, &mean, &row) else {
            continue;
        };
        let stats = ItemStatistics::from_moments(mean, cov, 0.0, 0.0);
        let config = MvnConfig {
            non_interactions: NonInteractions::Observed,
            ..MvnConfig::default()
        };
        let fast = MvnModel::from_statistics(config, stats).and_then(|model| model.predict_observed(&row));
        let dev = fast.map_or(f64::NAN, |f| max_abs_diff(f, oracle));
        worst = if dev.is_nan() { f64::NAN } else { worst.max(dev) };
        used += 1;
    }
    OracleReport::new("observed mvn single inverse = per-item solves", used, worst, 1e-6)
}

/// The full oracle suite at the sizes used for acceptance.
pub fn run_suite(rng_seed: u64) -> Vec<OracleReport> {
    let (svd, projection) = check_als_svd(20, rng_seed.wrapping_add(2));
    vec![
        check_mvn_regression(100, rng_seed.wrapping_add(1)),
        svd,
        projection,
        check_knn_kernel_regression(20, rng_seed.wrapping_add(3)),
        check_sherman_morrison(30, rng_seed.wrapping_add(4)),
    ]
}
