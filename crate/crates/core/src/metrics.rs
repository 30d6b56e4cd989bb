//! Top-N accuracy: Precision@k and nDCG@k.

fn is_relevant(relevant: &[usize]) -> impl Fn(usize) -> bool + '_ {
    move |item| relevant.binary_search(&item).is_ok()
}

fn sorted_unique(items: &[usize]) -> Vec<usize> {
    let mut v = items.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Hits among the first `k` recommendations, divided by `k` even when the list is shorter.
pub fn precision_at_k(recommended: &[usize], relevant: &[usize], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let relevant = sorted_unique(relevant);
    let hit = is_relevant(&relevant);
    let hits = recommended.iter().take(k).filter(|&&j| hit(j)).count();
    hits as f64 / k as f64
}

/// Discounted cumulative gain of the first `k` recommendations over the best attainable value.
/// `None` when there is nothing relevant.
pub fn ndcg_at_k(recommended: &[usize], relevant: &[usize], k: usize) -> Option<f64> {
    let relevant = sorted_unique(relevant);
    if relevant.is_empty() {
        return None;
    }
    let hit = is_relevant(&relevant);
    let gain = |rank: usize| 1.0 / ((rank + 2) as f64).log2();
    let dcg: f64 = recommended
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &j)| hit(j))
        .map(|(rank, _)| gain(rank))
        .sum();
    let ideal: f64 = (0..relevant.len().min(k)).map(gain).sum();
    if ideal > 0.0 {
        Some(dcg / ideal)
    } else {
        Some(0.0)
    }
}

/// Per-user metric values for one evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UserMetrics {
    pub user: usize,
    pub precision: f64,
    pub ndcg: f64,
}

/// Mean Precision@k and nDCG@k over the users that had something to find.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub precision_at_k: f64,
    pub ndcg_at_k: f64,
    pub k_precision: usize,
    pub k_ndcg: usize,
    pub users_evaluated: usize,
    pub per_user: Option<Vec<UserMetrics>>,
}

impl MetricReport {
    /// Unweighted mean of the per-user values.
    pub fn from_users(users: Vec<UserMetrics>, k_precision: usize, k_ndcg: usize, keep_per_user: bool) -> Self {
        let count = users.len();
        let mean = |f: fn(&UserMetrics) -> f64| {
            if count == 0 {
                0.0
            } else {
                users.iter().map(f).sum::<f64>() / count as f64
            }
        };
        Self {
            precision_at_k: mean(|u| u.precision),
            ndcg_at_k: mean(|u| u.ndcg),
            k_precision,
            k_ndcg,
            users_evaluated: count,
            per_user: keep_per_user.then_some(users),
        }
    }

    /// Unweighted mean of several reports, e.g. one per fold.
    pub fn mean_of(reports: &[MetricReport]) -> Option<Self> {
        let first = reports.first()?;
        let count = reports.len() as f64;
        Some(Self {
            precision_at_k: reports.iter().map(|r| r.precision_at_k).sum::<f64>() / count,
            ndcg_at_k: reports.iter().map(|r| r.ndcg_at_k).sum::<f64>() / count,
            k_precision: first.k_precision,
            k_ndcg: first.k_ndcg,
            users_evaluated: reports.iter().map(|r| r.users_evaluated).sum(),
            per_user: None,
        })
    }
}

/// Both metrics for one user, or `None` when the user has no relevant items.
pub fn user_metrics(
    user: usize,
    recommended: &[usize],
    relevant: &[usize],
    k_precision: usize,
    k_ndcg: usize,
) -> Option<UserMetrics> {
    let ndcg = ndcg_at_k(recommended, relevant, k_ndcg)?;
    Some(UserMetrics {
        user,
        precision: precision_at_k(recommended, relevant, k_precision),
        ndcg,
    })
}
