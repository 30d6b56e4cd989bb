//! Matrix factorization `R ≈ P G^T` with three losses.
//!
//! * Least squares on the complete matrix, fitted by alternating ridge solves. Predictions
//!   either read the fitted user row (non-interactions observed) or refit a user vector on
//!   the seed items only (non-interactions missing).
//! * BPR, fitted by stochastic gradient steps on (user, positive, negative) triples.
//! * Logistic, fitted by full-batch gradient descent on the Bernoulli likelihood of every cell.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::distr::Uniform;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dataset::InteractionMatrix;
use crate::error::{check_non_negative, Error, Result};
use crate::linalg::{regularized_inverse, ridge_least_norm};
use crate::recommender::{NonInteractions, Recommender};
use crate::stats;

const MAGIC: &[u8; 8] = b"MFMODEL\0";
const FORMAT_VERSION: u32 = 1;
/// Users per block when the logistic gradient is accumulated.
const DEFAULT_LOG_BLOCK: usize = 128;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MfLoss {
    #[default]
    LeastSquares,
    Bpr,
    Logistic,
}

impl MfLoss {
    fn code(self) -> u8 {
        match self {
            MfLoss::LeastSquares => 0,
            MfLoss::Bpr => 1,
            MfLoss::Logistic => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(MfLoss::LeastSquares),
            1 => Ok(MfLoss::Bpr),
            2 => Ok(MfLoss::Logistic),
            other => Err(Error::Format(format!("unknown loss code {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MfConfig {
    pub loss: MfLoss,
    pub dim: usize,
    pub lambda: f64,
    pub epochs: usize,
    /// Least squares stops once the relative loss change over an epoch drops below this.
    pub tolerance: f64,
    pub learning_rate: f64,
    pub rng_seed: u64,
    /// Item intercepts for BPR.
    pub item_bias: bool,
    /// Least squares only: refit the user vector on the seed when non-interactions are missing.
    pub non_interactions: NonInteractions,
    /// Users per gradient block for the logistic loss.
    pub block_size: usize,
}

impl Default for MfConfig {
    fn default() -> Self {
        Self {
            loss: MfLoss::LeastSquares,
            dim: 64,
            lambda: 0.0,
            epochs: 100,
            tolerance: 1e-6,
            learning_rate: 0.05,
            rng_seed: 0,
            item_bias: true,
            non_interactions: NonInteractions::Observed,
            block_size: DEFAULT_LOG_BLOCK,
        }
    }
}

impl MfConfig {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("latent dimension must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        check_non_negative("regularization lambda", self.lambda)?;
        if self.loss != MfLoss::LeastSquares
            && self.learning_rate.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
        {
            return Err(Error::Domain {
                what: "learning rate",
                range: "(0, inf)",
                value: self.learning_rate,
            });
        }
        Ok(())
    }
}

/// The matrix an alternating least-squares fit approximates.
pub trait AlsTarget: Sync {
    fn shape(&self) -> (usize, usize);
    fn frobenius_sq(&self) -> f64;
    /// `X G`, `n×d`.
    fn times(&self, g: &DMatrix<f64>) -> DMatrix<f64>;
    /// `X^T P`, `m×d`.
    fn transpose_times(&self, p: &DMatrix<f64>) -> DMatrix<f64>;
}

impl AlsTarget for InteractionMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.n_users(), self.n_items())
    }

    fn frobenius_sq(&self) -> f64 {
        self.nnz() as f64
    }

    fn times(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        sum_rows(self.n_users(), g, |u| self.row(u))
    }

    fn transpose_times(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        sum_rows(self.n_items(), p, |j| self.col(j))
    }
}

/// Row `i` of the result is the sum of the `factors` rows listed by `members(i)`.
fn sum_rows<'a>(count: usize, factors: &DMatrix<f64>, members: impl Fn(usize) -> &'a [usize] + Sync) -> DMatrix<f64> {
    let d = factors.ncols();
    let mut out = vec![0.0; count * d];
    if d > 0 {
        out.par_chunks_mut(d).enumerate().for_each(|(i, acc)| {
            for &k in members(i) {
                for (a, c) in acc.iter_mut().enumerate() {
                    *c += factors[(k, a)];
                }
            }
        });
    }
    DMatrix::from_row_slice(count, d, &out)
}

impl AlsTarget for DMatrix<f64> {
    fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    fn frobenius_sq(&self) -> f64 {
        self.norm_squared()
    }

    fn times(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        self * g
    }

    fn transpose_times(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(p)
    }
}

/// Result of an alternating least-squares run.
#[derive(Clone, Debug)]
pub struct AlsFit {
    pub p: DMatrix<f64>,
    pub g: DMatrix<f64>,
    /// Objective after every half-step.
    pub loss_history: Vec<f64>,
}

fn uniform_factors(rng: &mut ChaCha8Rng, rows: usize, d: usize, scale: f64) -> DMatrix<f64> {
    let dist = Uniform::new_inclusive(-scale, scale).expect("valid range");
    DMatrix::from_fn(rows, d, |_, _| dist.sample(rng))
}

/// Alternating ridge solves `P = X G (G^T G + λI)^+`, `G = X^T P (P^T P + λI)^+` from a
/// uniform `[-0.01, 0.01]` start, stopping after `epochs` or once an epoch changes the
/// objective by less than `tolerance` relative.
pub fn fit_als<T: AlsTarget + ?Sized>(
    target: &T,
    dim: usize,
    lambda: f64,
    epochs: usize,
    tolerance: f64,
    rng_seed: u64,
) -> AlsFit {
    let (n, m) = target.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut p = uniform_factors(&mut rng, n, dim, 0.01);
    let mut g = uniform_factors(&mut rng, m, dim, 0.01);
    let x_sq = target.frobenius_sq();
    let objective = |cross: f64, p: &DMatrix<f64>, g: &DMatrix<f64>| {
        let pp = p.tr_mul(p);
        let gg = g.tr_mul(g);
        let fit = (x_sq - 2.0 * cross + pp.component_mul(&gg).sum()).max(0.0);
        fit + lambda * (pp.trace() + gg.trace())
    };
    let mut loss_history = Vec::with_capacity(2 * epochs);
    let mut previous = f64::INFINITY;
    for epoch in 0..epochs {
        let xg = target.times(&g);
        p = &xg * regularized_inverse(&g.tr_mul(&g), lambda);
        loss_history.push(objective(p.dot(&xg), &p, &g));

        let xtp = target.transpose_times(&p);
        g = &xtp * regularized_inverse(&p.tr_mul(&p), lambda);
        let loss = objective(g.dot(&xtp), &p, &g);
        loss_history.push(loss);
        log::debug!("als epoch {epoch}: loss {loss:.6e}");

        let change = (previous - loss).abs() / previous.abs().max(f64::MIN_POSITIVE);
        if epoch > 0 && change < tolerance {
            break;
        }
        previous = loss;
    }
    AlsFit { p, g, loss_history }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per user block: (start row, rows of dP, dG contribution, row residual sums, column
/// residual sums, loss).
type BlockGradient = (usize, DMatrix<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>, f64);

#[derive(Clone, Debug)]
pub struct MfModel {
    config: MfConfig,
    p: Option<DMatrix<f64>>,
    g: Option<DMatrix<f64>>,
    user_bias: Option<DVector<f64>>,
    item_bias: Option<DVector<f64>>,
    loss_history: Vec<f64>,
}

impl MfModel {
    pub fn new(config: MfConfig) -> Self {
        Self {
            config,
            p: None,
            g: None,
            user_bias: None,
            item_bias: None,
            loss_history: Vec::new(),
        }
    }

    /// A model with given factors and no intercepts.
    pub fn from_factors(config: MfConfig, p: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        if p.ncols() != g.ncols() {
            return Err(Error::Config(format!(
                "factor widths differ: P has {}, G has {}",
                p.ncols(),
                g.ncols()
            )));
        }
        let config = MfConfig {
            dim: p.ncols(),
            ..config
        };
        Ok(Self {
            p: Some(p),
            g: Some(g),
            ..Self::new(config)
        })
    }

    pub fn config(&self) -> &MfConfig {
        &self.config
    }

    pub fn user_factors(&self) -> Option<&DMatrix<f64>> {
        self.p.as_ref()
    }

    pub fn item_factors(&self) -> Option<&DMatrix<f64>> {
        self.g.as_ref()
    }

    pub fn item_bias(&self) -> Option<&DVector<f64>> {
        self.item_bias.as_ref()
    }

    pub fn user_bias(&self) -> Option<&DVector<f64>> {
        self.user_bias.as_ref()
    }

    /// Adds `shift` to every item intercept, creating them if absent.
    pub fn shift_item_bias(&mut self, shift: f64) {
        if let Some(g) = &self.g {
            let bias = self.item_bias.get_or_insert_with(|| DVector::zeros(g.nrows()));
            bias.add_scalar_mut(shift);
        }
    }

    /// Objective values recorded while fitting. For least squares one per half-step, for the
    /// gradient losses one per epoch.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    fn factors(&self) -> Result<(&DMatrix<f64>, &DMatrix<f64>)> {
        match (&self.p, &self.g) {
            (Some(p), Some(g)) => Ok((p, g)),
            _ => Err(Error::Unfitted("matrix factorization")),
        }
    }

    /// Ridge fit of a fresh user vector on the seed rows of `G` with unit targets. An empty
    /// seed gives the zero vector.
    pub fn refit_user(&self, seed: &[usize]) -> Result<DVector<f64>> {
        let (_, g) = self.factors()?;
        let m = g.nrows();
        if let Some(&bad) = seed.iter().find(|&&j| j >= m) {
            return Err(Error::IndexOutOfRange { index: bad, len: m });
        }
        let mut seed = seed.to_vec();
        seed.sort_unstable();
        seed.dedup();
        let g_seed = g.select_rows(&seed);
        Ok(ridge_least_norm(
            &g_seed,
            &DVector::from_element(seed.len(), 1.0),
            self.config.lambda,
        ))
    }

    /// Scores `G v` plus any item intercepts.
    pub fn predict_vector(&self, user_vector: &DVector<f64>) -> Result<Vec<f64>> {
        let (_, g) = self.factors()?;
        let mut scores = g * user_vector;
        if let Some(b) = &self.item_bias {
            scores += b;
        }
        Ok(scores.as_slice().to_vec())
    }

    /// Scores for training row `user` from its fitted factors and intercepts.
    pub fn predict_user(&self, user: usize) -> Result<Vec<f64>> {
        let (p, _) = self.factors()?;
        if user >= p.nrows() {
            return Err(Error::IndexOutOfRange {
                index: user,
                len: p.nrows(),
            });
        }
        let v = p.row(user).transpose();
        let mut scores = self.predict_vector(&v)?;
        if let Some(b) = &self.user_bias {
            scores.iter_mut().for_each(|s| *s += b[user]);
        }
        Ok(scores)
    }

    fn fit_least_squares(&mut self, train: &InteractionMatrix) {
        let c = &self.config;
        let fit = fit_als(train, c.dim, c.lambda, c.epochs, c.tolerance, c.rng_seed);
        self.p = Some(fit.p);
        self.g = Some(fit.g);
        self.user_bias = None;
        self.item_bias = None;
        self.loss_history = fit.loss_history;
    }

    fn fit_bpr(&mut self, train: &InteractionMatrix) {
        let c = self.config.clone();
        let (n, m, d) = (train.n_users(), train.n_items(), c.dim);
        let mut rng = ChaCha8Rng::seed_from_u64(c.rng_seed);
        let init = Normal::new(0.0, 0.1).expect("valid deviation");
        // row-major working copies: one contiguous factor row per user or item
        let mut p: Vec<f64> = (0..n * d).map(|_| init.sample(&mut rng)).collect();
        let mut g: Vec<f64> = (0..m * d).map(|_| init.sample(&mut rng)).collect();
        let mut bias = vec![0.0; m];
        let pairs: Vec<(usize, usize)> = train.iter().collect();
        let (lr, reg) = (c.learning_rate, c.lambda);
        self.loss_history.clear();
        if !pairs.is_empty() && m > 1 {
            let pick_pair = Uniform::new(0, pairs.len()).expect("non-empty");
            let pick_item = Uniform::new(0, m).expect("non-empty");
            let mut pu = vec![0.0; d];
            for _ in 0..c.epochs {
                let mut epoch_loss = 0.0;
                for _ in 0..pairs.len() {
                    let (u, pos) = pairs[pick_pair.sample(&mut rng)];
                    if train.row(u).len() == m {
                        continue;
                    }
                    let neg = loop {
                        let s = pick_item.sample(&mut rng);
                        if !train.contains(u, s) {
                            break s;
                        }
                    };
                    let urow = &mut p[u * d..(u + 1) * d];
                    pu.copy_from_slice(urow);
                    let (gp, gn) = (pos * d, neg * d);
                    let mut x: f64 = (0..d).map(|a| pu[a] * (g[gp + a] - g[gn + a])).sum();
                    if c.item_bias {
                        x += bias[pos] - bias[neg];
                    }
                    epoch_loss += -(sigmoid(x).max(f64::MIN_POSITIVE)).ln();
                    let w = sigmoid(-x);
                    for a in 0..d {
                        let (vp, vn) = (g[gp + a], g[gn + a]);
                        urow[a] += lr * (w * (vp - vn) - reg * pu[a]);
                        g[gp + a] += lr * (w * pu[a] - reg * vp);
                        g[gn + a] += lr * (-w * pu[a] - reg * vn);
                    }
                    if c.item_bias {
                        bias[pos] += lr * (w - reg * bias[pos]);
                        bias[neg] += lr * (-w - reg * bias[neg]);
                    }
                }
                self.loss_history.push(epoch_loss / pairs.len() as f64);
            }
        }
        self.p = Some(DMatrix::from_row_slice(n, d, &p));
        self.g = Some(DMatrix::from_row_slice(m, d, &g));
        self.user_bias = None;
        self.item_bias = c.item_bias.then(|| DVector::from_vec(bias));
    }

    fn fit_logistic(&mut self, train: &InteractionMatrix) {
        let c = self.config.clone();
        let (n, m) = (train.n_users(), train.n_items());
        let d = c.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(c.rng_seed);
        let mut p = uniform_factors(&mut rng, n, d, 0.01);
        let mut g = uniform_factors(&mut rng, m, d, 0.01);
        let mut bu = DVector::<f64>::zeros(n);
        let mut bi = DVector::<f64>::zeros(m);
        let block = c.block_size.max(1);
        self.loss_history.clear();
        for _ in 0..c.epochs {
            let starts: Vec<usize> = (0..n).step_by(block).collect();
            let parts: Vec<BlockGradient> = starts
                .par_iter()
                .map(|&start| {
                    let rows = block.min(n - start);
                    let pb = p.rows(start, rows);
                    let mut resid = pb * g.transpose();
                    let mut loss = 0.0;
                    for r in 0..rows {
                        let u = start + r;
                        let liked = train.row(u);
                        let mut next = 0;
                        for j in 0..m {
                            let x = resid[(r, j)] + bu[u] + bi[j];
                            let y = if next < liked.len() && liked[next] == j {
                                next += 1;
                                1.0
                            } else {
                                0.0
                            };
                            // log(1 + e^x) - y x, computed stably
                            loss += x.max(0.0) + (-x.abs()).exp().ln_1p() - y * x;
                            resid[(r, j)] = sigmoid(x) - y;
                        }
                    }
                    let dp = &resid * &g;
                    let dg = resid.tr_mul(&pb);
                    let du = DVector::from_iterator(rows, resid.row_iter().map(|r| r.sum()));
                    let di = DVector::from_iterator(m, resid.column_iter().map(|col| col.sum()));
                    (start, dp, dg, du, di, loss)
                })
                .collect();
            let mut dg = DMatrix::zeros(m, d);
            let mut di = DVector::zeros(m);
            let mut loss = c.lambda * (p.norm_squared() + g.norm_squared());
            let scale_p = c.learning_rate / m.max(1) as f64;
            let scale_g = c.learning_rate / n.max(1) as f64;
            let p_old = p.clone();
            for (start, dp, dgb, du, dib, block_loss) in parts {
                let rows = dp.nrows();
                let mut pb = p.rows_mut(start, rows);
                pb -= (dp + p_old.rows(start, rows) * (c.lambda * m as f64)) * scale_p;
                let mut bub = bu.rows_mut(start, rows);
                bub -= du * scale_p;
                dg += dgb;
                di += dib;
                loss += block_loss;
            }
            g -= (dg + &g * (c.lambda * n as f64)) * scale_g;
            bi -= di * scale_g;
            self.loss_history.push(loss);
        }
        self.p = Some(p);
        self.g = Some(g);
        self.user_bias = Some(bu);
        self.item_bias = Some(bi);
    }

    /// Writes `magic, version, loss, n, m, d, lambda, flags`, then `P` and `G` row-major and
    /// any intercepts, all little-endian.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let (p, g) = self.factors()?;
        let io = |e| Error::Format(format!("write failed: {e}"));
        let mut header = Vec::new();
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        header.push(self.config.loss.code());
        for v in [p.nrows(), g.nrows(), p.ncols()] {
            header.extend_from_slice(&(v as u64).to_le_bytes());
        }
        header.extend_from_slice(&self.config.lambda.to_le_bytes());
        let flags = u8::from(self.user_bias.is_some())
            | (u8::from(self.item_bias.is_some()) << 1)
            | (u8::from(self.config.non_interactions == NonInteractions::Missing) << 2);
        header.push(flags);
        out.write_all(&header).map_err(io)?;
        stats::write_f64s(&mut out, p.transpose().iter().copied()).map_err(io)?;
        stats::write_f64s(&mut out, g.transpose().iter().copied()).map_err(io)?;
        for b in [&self.user_bias, &self.item_bias].into_iter().flatten() {
            stats::write_f64s(&mut out, b.iter().copied()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        stats::read_exact(&mut input, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, not a factorization model".into()));
        }
        let version = stats::read_u32(&mut input)?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut byte = [0u8; 1];
        stats::read_exact(&mut input, &mut byte)?;
        let loss = MfLoss::from_code(byte[0])?;
        let n = stats::read_u64(&mut input)? as usize;
        let m = stats::read_u64(&mut input)? as usize;
        let d = stats::read_u64(&mut input)? as usize;
        let lambda = stats::read_f64(&mut input)?;
        stats::read_exact(&mut input, &mut byte)?;
        let flags = byte[0];
        let p = DMatrix::from_row_slice(n, d, &stats::read_f64s(&mut input, n * d)?);
        let g = DMatrix::from_row_slice(m, d, &stats::read_f64s(&mut input, m * d)?);
        let user_bias = if flags & 1 != 0 {
            Some(DVector::from_vec(stats::read_f64s(&mut input, n)?))
        } else {
            None
        };
        let item_bias = if flags & 2 != 0 {
            Some(DVector::from_vec(stats::read_f64s(&mut input, m)?))
        } else {
            None
        };
        let config = MfConfig {
            loss,
            dim: d,
            lambda,
            item_bias: item_bias.is_some(),
            non_interactions: if flags & 4 != 0 {
                NonInteractions::Missing
            } else {
                NonInteractions::Observed
            },
            ..MfConfig::default()
        };
        Ok(Self {
            p: Some(p),
            g: Some(g),
            user_bias,
            item_bias,
            ..Self::new(config)
        })
    }
}

impl Recommender for MfModel {
    fn name(&self) -> String {
        match self.config.loss {
            MfLoss::LeastSquares => "mf-ls",
            MfLoss::Bpr => "bpr",
            MfLoss::Logistic => "log",
        }
        .into()
    }

    fn fit(&mut self, train: &InteractionMatrix) -> Result<()> {
        self.config.validate()?;
        if train.n_users() == 0 || train.n_items() == 0 {
            return Err(Error::EmptyData);
        }
        match self.config.loss {
            MfLoss::LeastSquares => self.fit_least_squares(train),
            MfLoss::Bpr => self.fit_bpr(train),
            MfLoss::Logistic => self.fit_logistic(train),
        }
        Ok(())
    }

    fn score_user(&self, user: usize, seed: &[usize]) -> Result<Vec<f64>> {
        match (self.config.loss, self.config.non_interactions) {
            (MfLoss::LeastSquares, NonInteractions::Missing) => self.predict_vector(&self.refit_user(seed)?),
            _ => self.predict_user(user),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recommender::top_n;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_binary(seed: u64, n: usize, m: usize, density: f64) -> InteractionMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|_| (0..m).filter(|_| rng.random_bool(density)).collect())
            .collect();
        InteractionMatrix::from_rows(m, &rows).unwrap()
    }

    fn ls(dim: usize, lambda: f64) -> MfConfig {
        MfConfig {
            dim,
            lambda,
            ..MfConfig::default()
        }
    }

    #[test]
    fn sparse_and_dense_products_agree() {
        let r = random_binary(1, 9, 6, 0.4);
        let dense = r.to_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = uniform_factors(&mut rng, 6, 3, 1.0);
        let p = uniform_factors(&mut rng, 9, 3, 1.0);
        assert_relative_eq!(r.times(&g), dense.times(&g), epsilon = 1e-12);
        assert_relative_eq!(r.transpose_times(&p), dense.transpose_times(&p), epsilon = 1e-12);
        assert_eq!(r.frobenius_sq(), dense.frobenius_sq());
    }

    #[test]
    fn full_rank_dimension_reconstructs_exactly() {
        let r = random_binary(3, 12, 5, 0.5);
        let mut model = MfModel::new(ls(5, 0.0));
        model.fit(&r).unwrap();
        let (p, g) = model.factors().unwrap();
        assert_relative_eq!(p * g.transpose(), r.to_dense(), epsilon = 1e-6);
    }

    #[test]
    fn orthonormal_factors_score_their_coordinate() {
        let p = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let g = DMatrix::identity(2, 2);
        let model = MfModel::from_factors(MfConfig::default(), p, g).unwrap();
        assert_eq!(model.predict_user(0).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(model.predict_user(1), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn one_factor_refit_is_scalar_ridge() {
        let g = DMatrix::from_column_slice(4, 1, &[0.5, -1.0, 2.0, 0.25]);
        let lambda = 0.3;
        let model = MfModel::from_factors(ls(1, lambda), DMatrix::zeros(1, 1), g).unwrap();
        let v = model.refit_user(&[0, 2]).unwrap();
        assert_relative_eq!(v[0], (0.5 + 2.0) / (0.25 + 4.0 + lambda), epsilon = 1e-14);
        assert_eq!(model.refit_user(&[]).unwrap(), DVector::zeros(1));
        assert_eq!(
            model.predict_vector(&model.refit_user(&[]).unwrap()).unwrap(),
            vec![0.0; 4]
        );
    }

    #[test]
    fn refit_matches_augmented_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = uniform_factors(&mut rng, 20, 6, 1.0);
        for (lambda, seed) in [(0.7, vec![1usize, 4, 5, 9, 11, 13, 17, 19]), (0.01, vec![2, 3])] {
            let model = MfModel::from_factors(ls(6, lambda), DMatrix::zeros(1, 6), g.clone()).unwrap();
            let v = model.refit_user(&seed).unwrap();
            // min |G_I v - 1|^2 + λ|v|^2 as an ordinary least-squares problem
            let k = seed.len();
            let mut a = DMatrix::zeros(k + 6, 6);
            a.rows_mut(0, k).copy_from(&g.select_rows(&seed));
            a.rows_mut(k, 6).copy_from(&(DMatrix::identity(6, 6) * lambda.sqrt()));
            let mut b = DVector::zeros(k + 6);
            b.rows_mut(0, k).fill(1.0);
            let oracle = a.svd(true, true).solve(&b, 1e-14).unwrap();
            assert_relative_eq!(v, oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn missing_variant_scores_from_refit() {
        let r = random_binary(5, 30, 10, 0.3);
        let mut model = MfModel::new(MfConfig {
            non_interactions: NonInteractions::Missing,
            ..ls(3, 0.1)
        });
        model.fit(&r).unwrap();
        let via_refit = model.predict_vector(&model.refit_user(&[1, 2]).unwrap()).unwrap();
        assert_eq!(model.score_user(0, &[1, 2]).unwrap(), via_refit);
    }

    #[test]
    fn bpr_ranks_the_liked_item_first() {
        let r = InteractionMatrix::from_rows(2, &[vec![0]]).unwrap();
        for item_bias in [true, false] {
            let mut model = MfModel::new(MfConfig {
                loss: MfLoss::Bpr,
                dim: 2,
                lambda: 0.01,
                epochs: 200,
                item_bias,
                ..MfConfig::default()
            });
            model.fit(&r).unwrap();
            let s = model.predict_user(0).unwrap();
            assert!(s[0] > s[1], "{s:?}");
        }
    }

    #[test]
    fn bpr_bias_shift_keeps_rankings() {
        let r = random_binary(6, 25, 12, 0.3);
        let mut model = MfModel::new(MfConfig {
            loss: MfLoss::Bpr,
            dim: 4,
            epochs: 5,
            ..MfConfig::default()
        });
        model.fit(&r).unwrap();
        let before: Vec<_> = (0..25)
            .map(|u| top_n(&model.predict_user(u).unwrap(), r.row(u), 5).items)
            .collect();
        model.shift_item_bias(3.5);
        let after: Vec<_> = (0..25)
            .map(|u| top_n(&model.predict_user(u).unwrap(), r.row(u), 5).items)
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn logistic_on_empty_matrix_scores_low() {
        let r = InteractionMatrix::from_rows(4, &[vec![], vec![], vec![]]).unwrap();
        let mut model = MfModel::new(MfConfig {
            loss: MfLoss::Logistic,
            dim: 2,
            epochs: 50,
            learning_rate: 1.0,
            ..MfConfig::default()
        });
        model.fit(&r).unwrap();
        for u in 0..3 {
            assert!(model.predict_user(u).unwrap().iter().all(|&s| sigmoid(s) < 0.5));
        }
        let h = model.loss_history();
        assert!(h.last().unwrap() < h.first().unwrap());
    }

    #[test]
    fn logistic_blocking_does_not_change_the_fit() {
        let r = random_binary(8, 11, 7, 0.3);
        let fit = |block_size| {
            let mut model = MfModel::new(MfConfig {
                loss: MfLoss::Logistic,
                dim: 3,
                epochs: 20,
                learning_rate: 0.5,
                lambda: 0.01,
                block_size,
                ..MfConfig::default()
            });
            model.fit(&r).unwrap();
            model.predict_user(4).unwrap()
        };
        let a = fit(3);
        let b = fit(100);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configuration() {
        let r = random_binary(9, 5, 4, 0.5);
        assert!(matches!(MfModel::new(ls(0, 0.0)).fit(&r), Err(Error::Config(_))));
        assert!(matches!(MfModel::new(ls(2, -1.0)).fit(&r), Err(Error::Domain { .. })));
        let bad_rate = MfConfig {
            loss: MfLoss::Bpr,
            learning_rate: 0.0,
            ..MfConfig::default()
        };
        assert!(matches!(MfModel::new(bad_rate).fit(&r), Err(Error::Domain { .. })));
        assert!(matches!(
            MfModel::new(MfConfig::default()).predict_user(0),
            Err(Error::Unfitted(_))
        ));
    }

    #[test]
    fn model_binary_round_trip() {
        let r = random_binary(10, 8, 6, 0.4);
        let mut model = MfModel::new(MfConfig {
            loss: MfLoss::Bpr,
            dim: 3,
            epochs: 3,
            ..MfConfig::default()
        });
        model.fit(&r).unwrap();
        let mut buf = Vec::new();
        model.write_binary(&mut buf).unwrap();
        let back = MfModel::read_binary(&buf[..]).unwrap();
        for u in 0..8 {
            assert_eq!(back.predict_user(u).unwrap(), model.predict_user(u).unwrap());
        }
        assert_eq!(back.config().loss, MfLoss::Bpr);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn als_objective_never_increases(seed in 0u64..10_000, dim in 1usize..6, lambda in prop_oneof![Just(0.0), 0.001f64..2.0]) {
            let r = random_binary(seed, 15, 9, 0.35);
            let fit = fit_als(&r, dim, lambda, 30, 0.0, seed);
            for w in fit.loss_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-9, "{} then {}", w[0], w[1]);
            }
        }
    }
}
