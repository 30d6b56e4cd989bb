//! The shared scoring contract, Top-N list construction, and the two trivial baselines.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::InteractionMatrix;
use crate::error::{Error, Result};
use crate::stats::mean_vector;

/// Whether a user's zeros are conditioned on or predicted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum NonInteractions {
    /// Zeros are unknown values to predict; only the interactions are conditioned on.
    #[default]
    Missing,
    /// Zeros are known values; every item is predicted from all other items.
    Observed,
}

/// A model that produces one score per item for a user. Only the order of the scores matters.
pub trait Recommender: Send + Sync {
    fn name(&self) -> String;

    fn fit(&mut self, train: &InteractionMatrix) -> Result<()>;

    /// Scores all items for training row `user`.
    ///
    /// `seed` lists the user's known interactions. Models that treat non-interactions as
    /// missing condition on `seed` alone; models that treat them as observed read the full
    /// row (ones at `seed`, zeros elsewhere), or their fitted per-user state.
    fn score_user(&self, user: usize, seed: &[usize]) -> Result<Vec<f64>>;
}

/// An ordered recommendation list with the items that were filtered out.
#[derive(Clone, Debug, PartialEq)]
pub struct RecommendationList {
    pub items: Vec<usize>,
    pub scores: Vec<f64>,
    pub excluded: Vec<usize>,
}

impl RecommendationList {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn rank_key(score: f64) -> f64 {
    if score.is_nan() {
        f64::NEG_INFINITY
    } else {
        score
    }
}

/// Descending by score, ascending by item index on ties. NaN sorts last.
fn rank_order(scores: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| rank_key(scores[b]).total_cmp(&rank_key(scores[a])).then(a.cmp(&b))
}

/// The `n` best-scored items outside `exclude`.
pub fn top_n(scores: &[f64], exclude: &[usize], n: usize) -> RecommendationList {
    let mut blocked = vec![false; scores.len()];
    for &j in exclude {
        if let Some(b) = blocked.get_mut(j) {
            *b = true;
        }
    }
    let mut candidates: Vec<usize> = (0..scores.len()).filter(|&j| !blocked[j]).collect();
    let order = rank_order(scores);
    if n < candidates.len() {
        if n > 0 {
            candidates.select_nth_unstable_by(n - 1, &order);
        }
        candidates.truncate(n);
    }
    candidates.sort_unstable_by(&order);
    let mut excluded = exclude.to_vec();
    excluded.sort_unstable();
    excluded.dedup();
    RecommendationList {
        scores: candidates.iter().map(|&j| scores[j]).collect(),
        items: candidates,
        excluded,
    }
}

/// Independent standard-normal scores: a random permutation of the items.
#[derive(Clone, Debug)]
pub struct RandomRecommender {
    rng_seed: u64,
    n_items: Option<usize>,
}

impl RandomRecommender {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            rng_seed,
            n_items: None,
        }
    }
}

impl Recommender for RandomRecommender {
    fn name(&self) -> String {
        "random".into()
    }

    fn fit(&mut self, train: &InteractionMatrix) -> Result<()> {
        self.n_items = Some(train.n_items());
        Ok(())
    }

    fn score_user(&self, user: usize, _seed: &[usize]) -> Result<Vec<f64>> {
        let m = self.n_items.ok_or(Error::Unfitted("random"))?;
        // one stream per user so scores do not depend on evaluation order
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(user as u64);
        Ok((0..m).map(|_| StandardNormal.sample(&mut rng)).collect())
    }
}

/// Ranks every user's items by the fraction of training users that interacted with them.
#[derive(Clone, Debug, Default)]
pub struct PopularityRecommender {
    popularity: Option<Vec<f64>>,
}

impl PopularityRecommender {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Recommender for PopularityRecommender {
    fn name(&self) -> String {
        "popularity".into()
    }

    fn fit(&mut self, train: &InteractionMatrix) -> Result<()> {
        self.popularity = Some(mean_vector(train)?.as_slice().to_vec());
        Ok(())
    }

    fn score_user(&self, _user: usize, _seed: &[usize]) -> Result<Vec<f64>> {
        self.popularity.clone().ok_or(Error::Unfitted("popularity"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn top_n_skips_excluded_items() {
        // items are 0-based here: (0.9, 0.1, 0.8) excluding the first
        let list = top_n(&[0.9, 0.1, 0.8], &[0], 2);
        assert_eq!(list.items, vec![2, 1]);
        assert_eq!(list.scores, vec![0.8, 0.1]);
        assert_eq!(list.excluded, vec![0]);
    }

    #[test]
    fn top_n_zero_is_empty() {
        assert!(top_n(&[1.0, 2.0], &[], 0).is_empty());
    }

    #[test]
    fn ties_break_by_index() {
        assert_eq!(top_n(&[0.5, 0.5, 0.5], &[], 3).items, vec![0, 1, 2]);
        assert_eq!(top_n(&[0.5, 0.7, 0.5, 0.7], &[], 3).items, vec![1, 3, 0]);
    }

    #[test]
    fn short_candidate_list_and_nan() {
        let list = top_n(&[f64::NAN, 0.2, 0.3], &[2], 10);
        assert_eq!(list.items, vec![1, 0]);
    }

    #[test]
    fn random_is_reproducible_per_user() {
        let train = InteractionMatrix::from_rows(5, &[vec![0], vec![1]]).unwrap();
        let mut a = RandomRecommender::new(7);
        let mut b = RandomRecommender::new(7);
        a.fit(&train).unwrap();
        b.fit(&train).unwrap();
        assert_eq!(a.score_user(1, &[]).unwrap(), b.score_user(1, &[]).unwrap());
        assert_ne!(a.score_user(0, &[]).unwrap(), a.score_user(1, &[]).unwrap());
        assert!(matches!(
            RandomRecommender::new(1).score_user(0, &[]),
            Err(Error::Unfitted(_))
        ));
    }

    #[test]
    fn popularity_scores_are_column_means() {
        let train = InteractionMatrix::from_rows(2, &[vec![0], vec![0, 1]]).unwrap();
        let mut pop = PopularityRecommender::new();
        assert!(matches!(pop.score_user(0, &[]), Err(Error::Unfitted(_))));
        pop.fit(&train).unwrap();
        assert_eq!(pop.score_user(0, &[]).unwrap(), vec![1.0, 0.5]);
        assert_eq!(pop.score_user(1, &[1]).unwrap(), vec![1.0, 0.5]);
    }

    proptest! {
        #[test]
        fn top_n_invariant_under_increasing_transforms(
            scores in prop::collection::vec(-5.0f64..5.0, 1..30),
            n in 0usize..30,
            shift in -3.0f64..3.0,
            scale in 0.01f64..10.0,
        ) {
            let exclude: Vec<usize> = (0..scores.len()).step_by(3).collect();
            let base = top_n(&scores, &exclude, n);
            let affine: Vec<f64> = scores.iter().map(|s| scale * s + shift).collect();
            let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
            prop_assert_eq!(&top_n(&affine, &exclude, n).items, &base.items);
            prop_assert_eq!(&top_n(&cubed, &exclude, n).items, &base.items);
            prop_assert_eq!(base.len(), n.min(scores.len() - exclude.len()));
            prop_assert!(base.items.iter().all(|j| !exclude.contains(j)));
            prop_assert!(base.scores.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn popularity_is_permutation_equivariant(
            rows in prop::collection::vec(prop::collection::vec(0usize..6, 0..6), 1..12),
            rotate in 0usize..6,
        ) {
            let train = InteractionMatrix::from_rows(6, &rows).unwrap();
            let perm: Vec<usize> = (0..6).map(|j| (j + rotate) % 6).collect();
            let permuted_rows: Vec<Vec<usize>> =
                rows.iter().map(|r| r.iter().map(|&j| perm[j]).collect()).collect();
            let permuted = InteractionMatrix::from_rows(6, &permuted_rows).unwrap();
            let mut a = PopularityRecommender::new();
            let mut b = PopularityRecommender::new();
            a.fit(&train).unwrap();
            b.fit(&permuted).unwrap();
            let sa = a.score_user(0, &[]).unwrap();
            let sb = b.score_user(0, &[]).unwrap();
            for j in 0..6 {
                prop_assert_eq!(sa[j], sb[perm[j]]);
            }
        }
    }
}
