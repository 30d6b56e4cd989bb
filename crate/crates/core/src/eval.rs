//! Cross-validation over users with seed interactions.
//!
//! Users are shuffled and cut into folds. In each fold the test users keep only `s` randomly
//! chosen seed interactions in the training matrix; their remaining interactions are what the
//! models must find. Every model sees the same training matrix, with all `n` rows.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::InteractionMatrix;
use crate::error::{Error, Result};
use crate::metrics::{user_metrics, MetricReport};
use crate::model_spec::ModelSpec;
use crate::recommender::{top_n, Recommender};

/// RNG stream that orders users; seed items use streams offset by [`SEED_STREAM_BASE`].
const PARTITION_STREAM: u64 = 0;
const VALIDATION_STREAM: u64 = 1;
const SUBSAMPLE_STREAM: u64 = 2;
const SEED_STREAM_BASE: u64 = 1 << 32;

/// One train/test partition.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldSplit {
    pub fold: usize,
    pub train_users: Vec<usize>,
    pub test_users: Vec<usize>,
    /// Seed interactions of each test user, aligned with `test_users`.
    pub seeds: Vec<Vec<usize>>,
    /// Held-out interactions of each test user, aligned with `test_users`.
    pub held_out: Vec<Vec<usize>>,
    pub seed_size: usize,
    pub rng_seed: u64,
}

impl FoldSplit {
    /// `full` with every test user's row cut down to its seed.
    pub fn train_matrix(&self, full: &InteractionMatrix) -> InteractionMatrix {
        let mut rows: Vec<Vec<usize>> = (0..full.n_users()).map(|u| full.row(u).to_vec()).collect();
        for (u, seed) in self.test_users.iter().zip(&self.seeds) {
            rows[*u] = seed.clone();
        }
        InteractionMatrix::from_rows(full.n_items(), &rows).expect("indices come from a valid matrix")
    }
}

/// The first `s` items of the user's row after a shuffle that depends only on the user, so
/// seeds for a larger `s` extend those for a smaller one.
fn split_user(row: &[usize], user: usize, s: usize, rng_seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(SEED_STREAM_BASE + user as u64);
    let mut items = row.to_vec();
    items.shuffle(&mut rng);
    let cut = s.min(items.len());
    let mut seed = items[..cut].to_vec();
    let mut rest = items[cut..].to_vec();
    seed.sort_unstable();
    rest.sort_unstable();
    (seed, rest)
}

fn shuffled(count: usize, rng_seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(stream);
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut rng);
    order
}

/// Contiguous near-equal chunks; the first `len % parts` chunks get one extra element.
fn chunk_bounds(len: usize, parts: usize) -> Vec<(usize, usize)> {
    let base = len / parts;
    let extra = len % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let size = base + usize::from(i < extra);
            let range = (start, start + size);
            start += size;
            range
        })
        .collect()
}

fn seeded_split(
    fold: usize,
    r: &InteractionMatrix,
    train_users: Vec<usize>,
    test_users: Vec<usize>,
    seed_size: usize,
    rng_seed: u64,
) -> FoldSplit {
    let (seeds, held_out) = test_users
        .iter()
        .map(|&u| split_user(r.row(u), u, seed_size, rng_seed))
        .unzip();
    FoldSplit {
        fold,
        train_users,
        test_users,
        seeds,
        held_out,
        seed_size,
        rng_seed,
    }
}

/// User-level `folds`-fold split with `seed_size` seed interactions per test user.
pub fn make_folds(r: &InteractionMatrix, folds: usize, seed_size: usize, rng_seed: u64) -> Result<Vec<FoldSplit>> {
    let n = r.n_users();
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if folds > n {
        return Err(Error::Config(format!("{folds} folds requested for {n} users")));
    }
    let order = shuffled(n, rng_seed, PARTITION_STREAM);
    Ok(chunk_bounds(n, folds)
        .into_iter()
        .enumerate()
        .map(|(fold, (lo, hi))| {
            let mut test_users = order[lo..hi].to_vec();
            test_users.sort_unstable();
            let mut train_users: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
            train_users.sort_unstable();
            seeded_split(fold, r, train_users, test_users, seed_size, rng_seed)
        })
        .collect())
}

/// Evaluation settings shared by all studies.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub k_precision: usize,
    /// nDCG cutoff; `None` means the number of items.
    pub k_ndcg: Option<usize>,
    /// Worker threads for fitting and scoring; `None` uses the global pool.
    pub threads: Option<usize>,
    pub keep_per_user: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            k_precision: 20,
            k_ndcg: None,
            threads: None,
            keep_per_user: false,
        }
    }
}

impl EvalOptions {
    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t.max(1))
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                Ok(pool.install(job))
            }
            None => Ok(job()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    pub report: MetricReport,
    pub fit_seconds: f64,
    pub score_seconds: f64,
}

/// Cross-fold evaluation of one model configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub spec: ModelSpec,
    pub folds: Vec<FoldOutcome>,
    pub mean: MetricReport,
}

impl Evaluation {
    pub fn fit_seconds(&self) -> f64 {
        self.folds.iter().map(|f| f.fit_seconds).sum()
    }

    pub fn score_seconds(&self) -> f64 {
        self.folds.iter().map(|f| f.score_seconds).sum()
    }
}

/// Scores every test user of `split` with a fitted model.
pub fn score_split(
    model: &dyn Recommender,
    split: &FoldSplit,
    n_items: usize,
    options: &EvalOptions,
) -> Result<MetricReport> {
    let k_ndcg = options.k_ndcg.unwrap_or(n_items);
    let depth = options.k_precision.max(k_ndcg);
    let per_user: Vec<Option<_>> = (0..split.test_users.len())
        .into_par_iter()
        .map(|i| {
            let user = split.test_users[i];
            let seed = &split.seeds[i];
            let scores = model.score_user(user, seed)?;
            let list = top_n(&scores, seed, depth);
            Ok(user_metrics(
                user,
                &list.items,
                &split.held_out[i],
                options.k_precision,
                k_ndcg,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(MetricReport::from_users(
        per_user.into_iter().flatten().collect(),
        options.k_precision,
        k_ndcg,
        options.keep_per_user,
    ))
}

/// Fits on the split's training matrix and scores its test users.
pub fn evaluate_split(
    spec: &ModelSpec,
    full: &InteractionMatrix,
    split: &FoldSplit,
    options: &EvalOptions,
    rng_seed: u64,
) -> Result<FoldOutcome> {
    let train = split.train_matrix(full);
    options.run(|| {
        let mut model = spec.build(rng_seed);
        let start = Instant::now();
        model.fit(&train)?;
        let fit_seconds = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let report = score_split(model.as_ref(), split, full.n_items(), options)?;
        let score_seconds = start.elapsed().as_secs_f64();
        log::info!(
            "{} fold {}: precision {:.4} ndcg {:.4} (fit {:.2}s, score {:.2}s)",
            spec,
            split.fold,
            report.precision_at_k,
            report.ndcg_at_k,
            fit_seconds,
            score_seconds
        );
        Ok(FoldOutcome {
            fold: split.fold,
            report,
            fit_seconds,
            score_seconds,
        })
    })?
}

/// Evaluates one configuration on every fold.
pub fn evaluate_model(
    spec: &ModelSpec,
    full: &InteractionMatrix,
    folds: &[FoldSplit],
    options: &EvalOptions,
    rng_seed: u64,
) -> Result<Evaluation> {
    let outcomes = folds
        .iter()
        .map(|split| evaluate_split(spec, full, split, options, rng_seed))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<MetricReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    let mean = MetricReport::mean_of(&reports).ok_or_else(|| Error::Config("no folds to evaluate".into()))?;
    Ok(Evaluation {
        spec: spec.clone(),
        folds: outcomes,
        mean,
    })
}

/// Hyperparameter values tried by [`sweep`]: the cartesian product of the axes.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub base: ModelSpec,
    pub axes: Vec<(String, Vec<String>)>,
}

impl SweepGrid {
    pub fn new(base: ModelSpec) -> Self {
        Self { base, axes: Vec::new() }
    }

    pub fn axis(mut self, key: &str, values: Vec<String>) -> Self {
        self.axes.push((key.into(), values));
        self
    }

    /// `10^e` for `e = -5, -4.75, ..., 5`.
    pub fn lambda_values() -> Vec<f64> {
        (0..=40).map(|i| 10f64.powf(-5.0 + 0.25 * i as f64)).collect()
    }

    /// `1, 2, 4, ...` below `m`, then `m`.
    pub fn neighbourhood_values(m: usize) -> Vec<usize> {
        let mut out: Vec<usize> = std::iter::successors(Some(1usize), |k| k.checked_mul(2))
            .take_while(|&k| k < m)
            .collect();
        if m > 0 {
            out.push(m);
        }
        out
    }

    /// The grid used for a model family: lambda for the factor and covariance models,
    /// neighbourhood size for kNN, nothing for the rest.
    pub fn for_family(base: ModelSpec, n_items: usize) -> Self {
        let lambdas = || Self::lambda_values().iter().map(|v| format!("{v:e}")).collect();
        match &base {
            ModelSpec::Mvn(_) | ModelSpec::Mf { .. } => Self::new(base).axis("lambda", lambdas()),
            ModelSpec::Knn(_) => {
                let ks = Self::neighbourhood_values(n_items)
                    .iter()
                    .map(|k| k.to_string())
                    .collect();
                Self::new(base).axis("k", ks)
            }
            _ => Self::new(base),
        }
    }

    pub fn candidates(&self) -> Result<Vec<ModelSpec>> {
        let mut specs = vec![self.base.clone()];
        for (key, values) in &self.axes {
            if values.is_empty() {
                return Err(Error::Config(format!("sweep axis {key} has no values")));
            }
            specs = specs
                .iter()
                .flat_map(|s| values.iter().map(move |v| s.with(key, v)))
                .collect::<Result<_>>()?;
        }
        Ok(specs)
    }

    pub fn describe(&self) -> String {
        let axes: Vec<String> = self
            .axes
            .iter()
            .map(|(k, v)| format!("{k}={{{}}}", v.join(" ")))
            .collect();
        format!(
            "{} over {}",
            self.base,
            if axes.is_empty() { "-".into() } else { axes.join(", ") }
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepFold {
    pub chosen: ModelSpec,
    pub validation_precision: f64,
    pub outcome: FoldOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub folds: Vec<SweepFold>,
    pub mean: MetricReport,
}

/// Per fold: hold out `validation_fraction` of the training users, pick the candidate with
/// the best validation Precision@k (first one on ties), refit it on the whole training fold
/// and evaluate on the test users.
pub fn sweep(
    grid: &SweepGrid,
    full: &InteractionMatrix,
    folds: &[FoldSplit],
    validation_fraction: f64,
    options: &EvalOptions,
    rng_seed: u64,
) -> Result<SweepResult> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::Domain {
            what: "validation fraction",
            range: "(0, 1)",
            value: validation_fraction,
        });
    }
    let candidates = grid.candidates()?;
    let mut out = Vec::with_capacity(folds.len());
    for split in folds {
        let fold_train = split.train_matrix(full);
        let order = shuffled(
            split.train_users.len(),
            rng_seed,
            VALIDATION_STREAM + 16 * split.fold as u64,
        );
        let n_val = ((split.train_users.len() as f64 * validation_fraction).round() as usize)
            .clamp(1, split.train_users.len().max(1));
        let mut val_users: Vec<usize> = order[..n_val.min(order.len())]
            .iter()
            .map(|&i| split.train_users[i])
            .collect();
        val_users.sort_unstable();
        let inner_train: Vec<usize> = split
            .train_users
            .iter()
            .copied()
            .filter(|u| val_users.binary_search(u).is_err())
            .collect();
        let validation = seeded_split(split.fold, full, inner_train, val_users, split.seed_size, rng_seed);

        let mut best: Option<(f64, &ModelSpec)> = None;
        for candidate in &candidates {
            let outcome = evaluate_split(candidate, &fold_train, &validation, options, rng_seed)?;
            let p = outcome.report.precision_at_k;
            log::info!("sweep fold {}: {candidate} validation precision {p:.4}", split.fold);
            if best.is_none_or(|(b, _)| p > b) {
                best = Some((p, candidate));
            }
        }
        let (validation_precision, chosen) = best.ok_or_else(|| Error::Config("empty sweep grid".into()))?;
        let outcome = evaluate_split(chosen, full, split, options, rng_seed)?;
        out.push(SweepFold {
            chosen: chosen.clone(),
            validation_precision,
            outcome,
        });
    }
    let reports: Vec<MetricReport> = out.iter().map(|f| f.outcome.report.clone()).collect();
    let mean = MetricReport::mean_of(&reports).ok_or_else(|| Error::Config("no folds to sweep".into()))?;
    Ok(SweepResult { folds: out, mean })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedStudyPoint {
    pub spec: ModelSpec,
    pub seed_size: usize,
    pub evaluation: Evaluation,
}

/// Evaluates every model at every seed size. The user partition is the same for all seed
/// sizes, and seeds grow by extension.
pub fn seed_size_study(
    specs: &[ModelSpec],
    full: &InteractionMatrix,
    seed_sizes: &[usize],
    folds: usize,
    options: &EvalOptions,
    rng_seed: u64,
) -> Result<Vec<SeedStudyPoint>> {
    let mut out = Vec::new();
    for &s in seed_sizes {
        let splits = make_folds(full, folds, s, rng_seed)?;
        for spec in specs {
            let evaluation = evaluate_model(spec, full, &splits, options, rng_seed)?;
            out.push(SeedStudyPoint {
                spec: spec.clone(),
                seed_size: s,
                evaluation,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuntimePoint {
    pub spec: ModelSpec,
    pub n_users: usize,
    pub fit_seconds: f64,
    pub score_seconds: f64,
    pub precision_at_k: f64,
}

/// Fits and scores on random user subsamples of the given sizes, one fold each.
pub fn benchmark_runtime(
    specs: &[ModelSpec],
    full: &InteractionMatrix,
    user_counts: &[usize],
    seed_size: usize,
    options: &EvalOptions,
    rng_seed: u64,
) -> Result<Vec<RuntimePoint>> {
    let n = full.n_users();
    let order = shuffled(n, rng_seed, SUBSAMPLE_STREAM);
    let all_items: Vec<usize> = (0..full.n_items()).collect();
    let mut out = Vec::new();
    for &count in user_counts {
        if count == 0 || count > n {
            return Err(Error::Config(format!("user subsample of {count} outside 1..={n}")));
        }
        let mut users = order[..count].to_vec();
        users.sort_unstable();
        let sub = full.select(&users, &all_items);
        let split = make_folds(&sub, 5.min(count.max(2)), seed_size, rng_seed)?.swap_remove(0);
        for spec in specs {
            let outcome = evaluate_split(spec, &sub, &split, options, rng_seed)?;
            out.push(RuntimePoint {
                spec: spec.clone(),
                n_users: count,
                fit_seconds: outcome.fit_seconds,
                score_seconds: outcome.score_seconds,
                precision_at_k: outcome.report.precision_at_k,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(seed: u64, n: usize, m: usize, density: f64) -> InteractionMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|_| (0..m).filter(|_| rng.random_bool(density)).collect())
            .collect();
        InteractionMatrix::from_rows(m, &rows).unwrap()
    }

    #[test]
    fn ten_users_five_folds() {
        let r = random_matrix(1, 10, 8, 0.5);
        let folds = make_folds(&r, 5, 3, 7).unwrap();
        assert_eq!(folds.len(), 5);
        for f in &folds {
            assert_eq!(f.test_users.len(), 2);
            assert_eq!(f.train_users.len(), 8);
        }
        assert_eq!(folds, make_folds(&r, 5, 3, 7).unwrap());
        assert_ne!(folds, make_folds(&r, 5, 3, 8).unwrap());
    }

    #[test]
    fn short_users_go_entirely_to_seed() {
        let r = InteractionMatrix::from_rows(5, &[vec![0, 1], vec![1, 2, 3, 4], vec![0], vec![2, 3]]).unwrap();
        let folds = make_folds(&r, 2, 3, 0).unwrap();
        for f in &folds {
            for (i, &u) in f.test_users.iter().enumerate() {
                assert_eq!(f.seeds[i].len(), 3.min(r.row(u).len()));
                if r.row(u).len() <= 3 {
                    assert!(f.held_out[i].is_empty());
                }
            }
        }
        let report = evaluate_model(&ModelSpec::Popularity, &r, &folds, &EvalOptions::default(), 0).unwrap();
        // only user 1 has anything held out
        assert_eq!(report.folds.iter().map(|f| f.report.users_evaluated).sum::<usize>(), 1);
    }

    #[test]
    fn fold_count_is_validated() {
        let r = random_matrix(2, 3, 4, 0.5);
        assert!(matches!(make_folds(&r, 4, 1, 0), Err(Error::Config(_))));
        assert!(matches!(make_folds(&r, 1, 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn seeds_extend_as_seed_size_grows() {
        let r = random_matrix(3, 20, 15, 0.5);
        let small = make_folds(&r, 4, 2, 11).unwrap();
        let large = make_folds(&r, 4, 5, 11).unwrap();
        for (a, b) in small.iter().zip(&large) {
            assert_eq!(a.test_users, b.test_users);
            for (sa, sb) in a.seeds.iter().zip(&b.seeds) {
                assert!(sa.iter().all(|j| sb.contains(j)));
            }
        }
    }

    #[test]
    fn empty_seed_mvn_equals_popularity() {
        let r = random_matrix(4, 40, 12, 0.3);
        let folds = make_folds(&r, 4, 0, 5).unwrap();
        let opts = EvalOptions::default();
        let mvn = evaluate_model(&ModelSpec::family_default("mvn").unwrap(), &r, &folds, &opts, 0).unwrap();
        let pop = evaluate_model(&ModelSpec::Popularity, &r, &folds, &opts, 0).unwrap();
        assert_eq!(mvn.mean.precision_at_k, pop.mean.precision_at_k);
        assert_eq!(mvn.mean.ndcg_at_k, pop.mean.ndcg_at_k);
    }

    #[test]
    fn evaluation_is_deterministic_across_thread_counts() {
        let r = random_matrix(5, 50, 20, 0.25);
        let folds = make_folds(&r, 5, 3, 1).unwrap();
        let spec: ModelSpec = "bpr:d=4,epochs=3".parse().unwrap();
        let one = EvalOptions {
            threads: Some(1),
            ..EvalOptions::default()
        };
        let four = EvalOptions {
            threads: Some(4),
            ..EvalOptions::default()
        };
        let a = evaluate_model(&spec, &r, &folds, &one, 3).unwrap();
        let b = evaluate_model(&spec, &r, &folds, &four, 3).unwrap();
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn grids() {
        let l = SweepGrid::lambda_values();
        assert_eq!(l.len(), 41);
        assert!((l[0] - 1e-5).abs() < 1e-20 && (l[40] - 1e5).abs() < 1e-6 && (l[20] - 1.0).abs() < 1e-15);
        assert_eq!(SweepGrid::neighbourhood_values(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(SweepGrid::neighbourhood_values(8), vec![1, 2, 4, 8]);
        let grid = SweepGrid::for_family(ModelSpec::family_default("knn").unwrap(), 5);
        assert_eq!(grid.candidates().unwrap().len(), 4);
        assert!(SweepGrid::new(ModelSpec::Popularity)
            .axis("k", vec![])
            .candidates()
            .is_err());
    }

    #[test]
    fn single_point_sweep_returns_that_point() {
        let r = random_matrix(6, 40, 15, 0.3);
        let folds = make_folds(&r, 2, 3, 2).unwrap();
        let grid = SweepGrid::new(ModelSpec::family_default("mvn").unwrap()).axis("lambda", vec!["0.5".into()]);
        let res = sweep(&grid, &r, &folds, 0.2, &EvalOptions::default(), 0).unwrap();
        let expected = ModelSpec::family_default("mvn").unwrap().with("lambda", "0.5").unwrap();
        assert!(res.folds.iter().all(|f| f.chosen == expected));
        let direct = evaluate_model(&expected, &r, &folds, &EvalOptions::default(), 0).unwrap();
        assert_eq!(res.mean.precision_at_k, direct.mean.precision_at_k);
        assert!(sweep(&grid, &r, &folds, 1.0, &EvalOptions::default(), 0).is_err());
    }

    #[test]
    fn benchmark_rejects_empty_subsample() {
        let r = random_matrix(7, 20, 6, 0.4);
        let opts = EvalOptions::default();
        assert!(matches!(
            benchmark_runtime(&[ModelSpec::Popularity], &r, &[0], 3, &opts, 0),
            Err(Error::Config(_))
        ));
        let points = benchmark_runtime(&[ModelSpec::Popularity], &r, &[10, 20], 3, &opts, 0).unwrap();
        assert_eq!(points.iter().map(|p| p.n_users).collect::<Vec<_>>(), vec![10, 20]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn folds_partition_users_without_leakage(seed in 0u64..10_000, n in 2usize..30, k in 2usize..6, s in 0usize..5) {
            prop_assume!(k <= n);
            let r = random_matrix(seed, n, 10, 0.4);
            let folds = make_folds(&r, k, s, seed).unwrap();
            let mut seen: Vec<usize> = folds.iter().flat_map(|f| f.test_users.clone()).collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            for f in &folds {
                let train = f.train_matrix(&r);
                prop_assert_eq!(train.n_users(), n);
                for (i, &u) in f.test_users.iter().enumerate() {
                    let mut union = f.seeds[i].clone();
                    union.extend(&f.held_out[i]);
                    union.sort_unstable();
                    prop_assert_eq!(&union[..], r.row(u));
                    prop_assert_eq!(train.row(u), &f.seeds[i][..]);
                    for &j in &f.held_out[i] {
                        prop_assert!(!train.contains(u, j));
                    }
                }
                for &u in &f.train_users {
                    prop_assert_eq!(train.row(u), r.row(u));
                }
            }
        }
    }
}
