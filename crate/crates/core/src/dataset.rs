//! Loading implicit-feedback interaction files into a complete binary user×item matrix.
//!
//! Every stored entry of an [`InteractionMatrix`] is a one; everything else is a zero. There are
//! no missing cells, so a user's row describes both what they interacted with and what they did
//! not.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sparse binary matrix, stored both row-wise and column-wise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl InteractionMatrix {
    /// Builds a matrix from per-row item lists. Items are sorted and duplicates dropped.
    pub fn from_rows(n_cols: usize, rows: &[Vec<usize>]) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in rows {
            let mut items = row.clone();
            items.sort_unstable();
            items.dedup();
            if let Some(&last) = items.last() {
                if last >= n_cols {
                    return Err(Error::IndexOutOfRange {
                        index: last,
                        len: n_cols,
                    });
                }
            }
            col_idx.extend_from_slice(&items);
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_csr(rows.len(), n_cols, row_ptr, col_idx))
    }

    /// Builds a matrix from (row, column) pairs; repeated pairs collapse to one entry.
    pub fn from_pairs(n_rows: usize, n_cols: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_rows];
        for &(r, c) in pairs {
            let row = rows
                .get_mut(r)
                .ok_or(Error::IndexOutOfRange { index: r, len: n_rows })?;
            row.push(c);
        }
        Self::from_rows(n_cols, &rows)
    }

    /// Binarizes a dense matrix: any nonzero cell becomes an interaction.
    pub fn from_dense(dense: &DMatrix<f64>) -> Self {
        let rows: Vec<Vec<usize>> = (0..dense.nrows())
            .map(|i| (0..dense.ncols()).filter(|&j| dense[(i, j)] != 0.0).collect())
            .collect();
        Self::from_rows(dense.ncols(), &rows).expect("indices are in range by construction")
    }

    fn from_csr(n_rows: usize, n_cols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Self {
        let mut counts = vec![0usize; n_cols];
        for &c in &col_idx {
            counts[c] += 1;
        }
        let mut col_ptr = Vec::with_capacity(n_cols + 1);
        col_ptr.push(0);
        for c in &counts {
            col_ptr.push(col_ptr.last().unwrap() + c);
        }
        let mut next = col_ptr.clone();
        let mut row_idx = vec![0usize; col_idx.len()];
        for r in 0..n_rows {
            for &c in &col_idx[row_ptr[r]..row_ptr[r + 1]] {
                row_idx[next[c]] = r;
                next[c] += 1;
            }
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            col_ptr,
            row_idx,
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_rows
    }

    pub fn n_items(&self) -> usize {
        self.n_cols
    }

    /// Number of stored ones.
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Sorted item indices the user interacted with.
    pub fn row(&self, user: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[user]..self.row_ptr[user + 1]]
    }

    /// Sorted user indices that interacted with the item.
    pub fn col(&self, item: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[item]..self.col_ptr[item + 1]]
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.row(user).binary_search(&item).is_ok()
    }

    pub fn item_counts(&self) -> Vec<usize> {
        (0..self.n_cols)
            .map(|j| self.col_ptr[j + 1] - self.col_ptr[j])
            .collect()
    }

    pub fn user_counts(&self) -> Vec<usize> {
        (0..self.n_rows)
            .map(|i| self.row_ptr[i + 1] - self.row_ptr[i])
            .collect()
    }

    /// The user's row as a dense 0/1 vector.
    pub fn dense_row(&self, user: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for &j in self.row(user) {
            out[j] = 1.0;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for &j in self.row(i) {
                out[(i, j)] = 1.0;
            }
        }
        out
    }

    /// Iterates over (user, item) pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).iter().map(move |&j| (i, j)))
    }

    /// Keeps the listed rows (in the given order) and columns (in the given order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut remap = vec![usize::MAX; self.n_cols];
        for (new, &old) in cols.iter().enumerate() {
            remap[old] = new;
        }
        let kept: Vec<Vec<usize>> = rows
            .iter()
            .map(|&r| {
                self.row(r)
                    .iter()
                    .filter_map(|&c| (remap[c] != usize::MAX).then_some(remap[c]))
                    .collect()
            })
            .collect();
        Self::from_rows(cols.len(), &kept).expect("remapped indices are in range")
    }
}

/// Bidirectional map between external string ids and dense indices, ordered by first insertion.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index for `id`, assigning the next free index on first sight.
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id_of(&self, index: usize) -> Option<&str> {
        self.ids.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Restricts the map to `keep` (old indices), renumbered densely in that order.
    pub fn subset(&self, keep: &[usize]) -> Self {
        let mut out = IdMap::new();
        for &i in keep {
            out.intern(&self.ids[i]);
        }
        out
    }
}

/// How raw ratings turn into binary interactions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProcessingRule {
    /// Every listed pair is an interaction.
    Identity,
    /// Pairs whose rating is strictly greater than the threshold.
    ThresholdGt(f64),
    /// Pairs whose rating is exactly zero (implicit rows of explicit/implicit mixed files).
    EqualsZero,
}

impl ProcessingRule {
    pub fn description(&self) -> String {
        match self {
            ProcessingRule::Identity => "every listed pair is an interaction".to_owned(),
            ProcessingRule::ThresholdGt(v) => format!("interaction iff rating > {v}"),
            ProcessingRule::EqualsZero => "interaction iff rating = 0".to_owned(),
        }
    }

    fn needs_rating(&self) -> bool {
        !matches!(self, ProcessingRule::Identity)
    }

    fn accepts(&self, rating: Option<f64>) -> bool {
        match (self, rating) {
            (ProcessingRule::Identity, _) => true,
            (ProcessingRule::ThresholdGt(t), Some(r)) => r > *t,
            (ProcessingRule::EqualsZero, Some(r)) => r == 0.0,
            _ => false,
        }
    }
}

impl fmt::Display for ProcessingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessingRule::Identity => f.write_str("identity"),
            ProcessingRule::ThresholdGt(v) => write!(f, "gt:{v}"),
            ProcessingRule::EqualsZero => f.write_str("eq0"),
        }
    }
}

impl FromStr for ProcessingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "identity" | "" => Ok(ProcessingRule::Identity),
            "eq0" | "equals_zero" => Ok(ProcessingRule::EqualsZero),
            _ => {
                let value = s
                    .strip_prefix("gt:")
                    .or_else(|| s.strip_prefix("threshold_gt:"))
                    .ok_or_else(|| Error::Config(format!("unknown processing rule {s:?}")))?;
                value
                    .parse()
                    .map(ProcessingRule::ThresholdGt)
                    .map_err(|_| Error::Config(format!("bad threshold in rule {s:?}")))
            }
        }
    }
}

/// Column layout of a delimited interaction file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelimitedFormat {
    pub separator: String,
    pub has_header: bool,
    pub user_col: usize,
    pub item_col: usize,
    pub rating_col: Option<usize>,
}

impl DelimitedFormat {
    /// Two tab-separated columns, no header: the canonical export format.
    pub fn tsv() -> Self {
        Self {
            separator: "\t".into(),
            has_header: false,
            user_col: 0,
            item_col: 1,
            rating_col: None,
        }
    }

    /// MovieLens 100K `u.data`: `user \t item \t rating \t timestamp`.
    pub fn movielens_100k() -> Self {
        Self {
            rating_col: Some(2),
            ..Self::tsv()
        }
    }

    /// MovieLens 1M/10M `ratings.dat`: `user::item::rating::timestamp`.
    pub fn movielens_1m() -> Self {
        Self {
            separator: "::".into(),
            ..Self::movielens_100k()
        }
    }

    /// Tab-separated atomic files with a typed header row (`user_id:token ...`).
    pub fn atomic_tsv() -> Self {
        Self {
            has_header: true,
            ..Self::movielens_100k()
        }
    }

    pub fn csv(has_header: bool, rating_col: Option<usize>) -> Self {
        Self {
            separator: ",".into(),
            has_header,
            user_col: 0,
            item_col: 1,
            rating_col,
        }
    }

    /// Looks up a named preset: `tsv`, `ml-100k`, `ml-1m`, `atomic`, `csv`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "tsv" => Ok(Self::tsv()),
            "ml-100k" | "u.data" => Ok(Self::movielens_100k()),
            "ml-1m" | "ml-10m" | "dat" => Ok(Self::movielens_1m()),
            "atomic" | "recbole" => Ok(Self::atomic_tsv()),
            "csv" => Ok(Self::csv(false, Some(2))),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}

/// A binary interaction matrix plus the id maps that give its rows and columns meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionDataset {
    pub interactions: InteractionMatrix,
    pub user_ids: IdMap,
    pub item_ids: IdMap,
    pub item_labels: Option<Vec<String>>,
}

impl InteractionDataset {
    pub fn n_users(&self) -> usize {
        self.interactions.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.interactions.n_items()
    }

    pub fn n_interactions(&self) -> usize {
        self.interactions.nnz()
    }

    /// Wraps a bare matrix with numeric ids `0..n` / `0..m`.
    pub fn from_matrix(interactions: InteractionMatrix) -> Self {
        let mut user_ids = IdMap::new();
        for i in 0..interactions.n_users() {
            user_ids.intern(&i.to_string());
        }
        let mut item_ids = IdMap::new();
        for j in 0..interactions.n_items() {
            item_ids.intern(&j.to_string());
        }
        Self {
            interactions,
            user_ids,
            item_ids,
            item_labels: None,
        }
    }

    /// Display name of an item: its label when labels are attached, else its external id.
    pub fn item_label(&self, item: usize) -> &str {
        match &self.item_labels {
            Some(labels) => &labels[item],
            None => self.item_ids.id_of(item).unwrap_or(""),
        }
    }

    /// Writes one `user \t item` line per interaction using external ids.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, j) in self.interactions.iter() {
            writeln!(
                out,
                "{}\t{}",
                self.user_ids.id_of(i).unwrap_or_default(),
                self.item_ids.id_of(j).unwrap_or_default()
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "{} users, {} items, {} interactions",
            self.n_users(),
            self.n_items(),
            self.n_interactions()
        )
    }
}

/// Decodes a raw line as UTF-8, falling back to Latin-1 (MovieLens metadata files use it).
fn decode_line(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_owned(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

fn lines_of<R: BufRead>(mut reader: R) -> impl Iterator<Item = std::io::Result<String>> {
    let mut buf = Vec::new();
    std::iter::from_fn(move || {
        buf.clear();
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => None,
            Ok(_) => {
                while matches!(buf.last(), Some(b'\n' | b'\r')) {
                    buf.pop();
                }
                Some(Ok(decode_line(&buf)))
            }
            Err(e) => Some(Err(e)),
        }
    })
}

/// Parses interactions from any reader; see [`load_interactions`].
pub fn parse_interactions<R: BufRead>(
    reader: R,
    format: &DelimitedFormat,
    rule: ProcessingRule,
) -> Result<InteractionDataset> {
    if rule.needs_rating() && format.rating_col.is_none() {
        return Err(Error::Config(format!(
            "processing rule {rule} needs a rating column but the format has none"
        )));
    }
    if format.separator.is_empty() {
        return Err(Error::Config("empty field separator".into()));
    }

    let mut user_ids = IdMap::new();
    let mut item_ids = IdMap::new();
    let mut pairs = Vec::new();
    let needed = format.user_col.max(format.item_col).max(format.rating_col.unwrap_or(0));

    for (lineno, line) in lines_of(reader).enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if lineno == 0 && format.has_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(format.separator.as_str()).map(str::trim).collect();
        if fields.len() <= needed {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected at least {} fields, found {}", needed + 1, fields.len()),
            });
        }
        let (user, item) = (fields[format.user_col], fields[format.item_col]);
        if user.is_empty() || item.is_empty() {
            return Err(Error::Parse {
                line: lineno + 1,
                message: "empty user or item id".into(),
            });
        }
        let rating = match format.rating_col {
            Some(c) if rule.needs_rating() => Some(fields[c].parse::<f64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("rating {:?} is not a number", fields[c]),
            })?),
            _ => None,
        };
        if rule.accepts(rating) {
            pairs.push((user_ids.intern(user), item_ids.intern(item)));
        }
    }

    let interactions = InteractionMatrix::from_pairs(user_ids.len(), item_ids.len(), &pairs)?;
    Ok(InteractionDataset {
        interactions,
        user_ids,
        item_ids,
        item_labels: None,
    })
}

/// Loads a delimited interaction file and binarizes it with `rule`.
///
/// Ids are numbered by first occurrence among the rows that pass the rule. Repeated
/// (user, item) rows collapse to a single interaction.
pub fn load_interactions(
    path: impl AsRef<Path>,
    format: &DelimitedFormat,
    rule: ProcessingRule,
) -> Result<InteractionDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_interactions(BufReader::new(file), format, rule)
}

/// Column layout of an item metadata file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelFormat {
    pub separator: String,
    pub has_header: bool,
    pub id_col: usize,
    pub name_col: usize,
}

impl LabelFormat {
    /// MovieLens 1M `movies.dat`: `id::title::genres`.
    pub fn movielens_1m() -> Self {
        Self {
            separator: "::".into(),
            has_header: false,
            id_col: 0,
            name_col: 1,
        }
    }

    /// MovieLens 100K `u.item`: `id|title|...`.
    pub fn movielens_100k() -> Self {
        Self {
            separator: "|".into(),
            ..Self::movielens_1m()
        }
    }

    /// Atomic item files: tab-separated with a typed header.
    pub fn atomic_tsv() -> Self {
        Self {
            separator: "\t".into(),
            has_header: true,
            id_col: 0,
            name_col: 1,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "ml-100k" | "u.item" => Ok(Self::movielens_100k()),
            "ml-1m" | "ml-10m" | "dat" => Ok(Self::movielens_1m()),
            "atomic" | "recbole" | "tsv" => Ok(Self::atomic_tsv()),
            other => Err(Error::Config(format!("unknown label format {other:?}"))),
        }
    }
}

/// Attaches display names to the dataset's items. Items missing from the file keep their id.
pub fn attach_item_labels<R: BufRead>(dataset: &mut InteractionDataset, reader: R, format: &LabelFormat) -> Result<()> {
    let mut labels: Vec<String> = dataset.item_ids.ids().to_vec();
    for (lineno, line) in lines_of(reader).enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if (lineno == 0 && format.has_header) || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(format.separator.as_str()).collect();
        let (Some(id), Some(name)) = (fields.get(format.id_col), fields.get(format.name_col)) else {
            return Err(Error::Parse {
                line: lineno + 1,
                message: "missing id or name column".into(),
            });
        };
        if let Some(j) = dataset.item_ids.index_of(id.trim()) {
            labels[j] = name.trim().to_owned();
        }
    }
    dataset.item_labels = Some(labels);
    Ok(())
}

pub fn load_item_labels(dataset: &mut InteractionDataset, path: impl AsRef<Path>, format: &LabelFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    attach_item_labels(dataset, BufReader::new(file), format)
}

/// Random interactions with taste clusters and skewed item popularity.
///
/// Each user belongs to one of `clusters` groups and each item to one group. An item's base
/// rate falls off with its index; users interact with items of their own group at
/// `affinity` times that rate. Deterministic in `rng_seed`.
pub fn synthetic_interactions(
    n_users: usize,
    n_items: usize,
    clusters: usize,
    density: f64,
    affinity: f64,
    rng_seed: u64,
) -> InteractionDataset {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
    let clusters = clusters.max(1);
    let base: Vec<f64> = (0..n_items).map(|j| 1.0 / (1.0 + j as f64 / 10.0)).collect();
    let scale = density * n_items as f64 / base.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let rows: Vec<Vec<usize>> = (0..n_users)
        .map(|u| {
            let group = u % clusters;
            (0..n_items)
                .filter(|&j| {
                    let boost = if j % clusters == group { affinity } else { 1.0 };
                    rng.random_bool((base[j] * scale * boost).clamp(0.0, 1.0))
                })
                .collect()
        })
        .collect();
    let matrix = InteractionMatrix::from_rows(n_items, &rows).expect("indices below n_items");
    let mut ds = InteractionDataset::from_matrix(matrix);
    ds.item_labels = Some(
        (0..n_items)
            .map(|j| format!("item-{j} (group {})", j % clusters))
            .collect(),
    );
    ds
}

/// Keeps items with at least `min_users_per_item` users, then users with at least
/// `min_items_per_user` of the remaining items. One pass, in that order.
pub fn filter_dataset(
    ds: &InteractionDataset,
    min_users_per_item: usize,
    min_items_per_user: usize,
) -> InteractionDataset {
    let m = &ds.interactions;
    let items: Vec<usize> = m
        .item_counts()
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c >= min_users_per_item)
        .map(|(j, _)| j)
        .collect();
    let all_users: Vec<usize> = (0..m.n_users()).collect();
    let item_filtered = m.select(&all_users, &items);
    let users: Vec<usize> = item_filtered
        .user_counts()
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c >= min_items_per_user)
        .map(|(i, _)| i)
        .collect();
    let all_items: Vec<usize> = (0..items.len()).collect();
    let interactions = item_filtered.select(&users, &all_items);

    InteractionDataset {
        interactions,
        user_ids: ds.user_ids.subset(&users),
        item_ids: ds.item_ids.subset(&items),
        item_labels: ds
            .item_labels
            .as_ref()
            .map(|labels| items.iter().map(|&j| labels[j].clone()).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn synthetic_data_is_deterministic_and_clustered() {
        let a = synthetic_interactions(200, 40, 4, 0.1, 5.0, 3);
        assert_eq!(a, synthetic_interactions(200, 40, 4, 0.1, 5.0, 3));
        assert_ne!(a, synthetic_interactions(200, 40, 4, 0.1, 5.0, 4));
        let r = &a.interactions;
        let own: usize = r.iter().filter(|&(u, j)| u % 4 == j % 4).count();
        assert!(own * 2 > r.nnz());
        assert_eq!(a.item_label(5), "item-5 (group 1)");
    }

    fn parse(text: &str, format: &DelimitedFormat, rule: ProcessingRule) -> Result<InteractionDataset> {
        parse_interactions(text.as_bytes(), format, rule)
    }

    #[test]
    fn empty_input_gives_empty_dataset() {
        let ds = parse("", &DelimitedFormat::tsv(), ProcessingRule::Identity).unwrap();
        assert_eq!((ds.n_users(), ds.n_items(), ds.n_interactions()), (0, 0, 0));
    }

    #[test]
    fn duplicates_collapse_and_ids_follow_first_occurrence() {
        let text = "u2\ti9\nu1\ti3\nu2\ti9\nu1\ti9\n";
        let ds = parse(text, &DelimitedFormat::tsv(), ProcessingRule::Identity).unwrap();
        assert_eq!(ds.n_interactions(), 3);
        assert_eq!(ds.user_ids.ids(), ["u2", "u1"]);
        assert_eq!(ds.item_ids.ids(), ["i9", "i3"]);
        assert_eq!(ds.interactions.row(1), &[0, 1]);
    }

    #[test]
    fn threshold_rule_keeps_only_high_ratings() {
        let text = "1\t1\t3\n1\t2\t3.5\n2\t1\t-2\n2\t3\t10\n";
        let ds = parse(
            text,
            &DelimitedFormat::movielens_100k(),
            ProcessingRule::ThresholdGt(3.0),
        )
        .unwrap();
        assert_eq!(ds.n_interactions(), 2);
        // user 2's only passing row is item 3
        assert_eq!(ds.item_ids.ids(), ["2", "3"]);
    }

    #[test]
    fn equals_zero_rule() {
        let text = "a,x,0\na,y,7\nb,y,0\n";
        let ds = parse(text, &DelimitedFormat::csv(false, Some(2)), ProcessingRule::EqualsZero).unwrap();
        assert_eq!(ds.n_interactions(), 2);
        assert_eq!(ds.n_items(), 2);
    }

    #[test]
    fn rating_rule_without_rating_column_is_a_config_error() {
        let err = parse("a\tb\n", &DelimitedFormat::tsv(), ProcessingRule::ThresholdGt(3.0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn bad_row_names_its_line() {
        let text = "1\t1\t5\n1\t2\tfive\n";
        let err = parse(
            text,
            &DelimitedFormat::movielens_100k(),
            ProcessingRule::ThresholdGt(3.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("1\t1\n2\n", &DelimitedFormat::tsv(), ProcessingRule::Identity).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn multi_char_separator_and_header() {
        let ds = parse(
            "1::10::5::0\n2::10::1::0\n",
            &DelimitedFormat::movielens_1m(),
            ProcessingRule::Identity,
        )
        .unwrap();
        assert_eq!(ds.summary(), "2 users, 1 items, 2 interactions");
        let ds = parse(
            "user_id:token\titem_id:token\trating:float\n7\t8\t1\n",
            &DelimitedFormat::atomic_tsv(),
            ProcessingRule::Identity,
        )
        .unwrap();
        assert_eq!(ds.n_interactions(), 1);
    }

    #[test]
    fn filter_drops_empty_column() {
        // 3x3 with the middle column all zero
        let m = InteractionMatrix::from_rows(3, &[vec![0], vec![0, 2], vec![2]]).unwrap();
        let ds = InteractionDataset::from_matrix(m);
        let f = filter_dataset(&ds, 1, 0);
        assert_eq!((f.n_users(), f.n_items()), (3, 2));
        assert_eq!(f.item_ids.ids(), ["0", "2"]);
        assert_eq!(f.interactions.row(1), &[0, 1]);
    }

    #[test]
    fn filter_is_items_then_users_single_pass() {
        // item 1 has one user; dropping it leaves user 2 with a single item
        let m = InteractionMatrix::from_rows(2, &[vec![0], vec![0], vec![0, 1]]).unwrap();
        let ds = InteractionDataset::from_matrix(m);
        let f = filter_dataset(&ds, 2, 1);
        assert_eq!((f.n_users(), f.n_items(), f.n_interactions()), (3, 1, 3));
        let f = filter_dataset(&ds, 2, 2);
        assert_eq!(f.n_users(), 0);
    }

    #[test]
    fn single_pass_can_leave_items_below_threshold() {
        // user 1 is dropped for having one item, which leaves item 1 with a single user
        let m = InteractionMatrix::from_rows(2, &[vec![0, 1], vec![1], vec![0]]).unwrap();
        let ds = InteractionDataset::from_matrix(m);
        let once = filter_dataset(&ds, 2, 2);
        assert_eq!((once.n_users(), once.n_items()), (1, 2));
        let twice = filter_dataset(&once, 2, 2);
        assert_eq!(twice.n_items(), 0);
    }

    #[test]
    fn zero_thresholds_are_a_no_op() {
        let m = InteractionMatrix::from_rows(4, &[vec![0, 3], vec![], vec![1]]).unwrap();
        let ds = InteractionDataset::from_matrix(m);
        assert_eq!(filter_dataset(&ds, 0, 0), ds);
    }

    #[test]
    fn labels_attach_with_latin1_fallback() {
        let mut ds = parse("1\t5\n1\t6\n", &DelimitedFormat::tsv(), ProcessingRule::Identity).unwrap();
        let mut bytes = b"5::Autumn Sonata (H".to_vec();
        bytes.push(0xF6); // o-umlaut in Latin-1
        bytes.extend_from_slice(b"stsonaten ) (1978)::Drama\n");
        attach_item_labels(&mut ds, &bytes[..], &LabelFormat::movielens_1m()).unwrap();
        assert_eq!(ds.item_label(0), "Autumn Sonata (Höstsonaten ) (1978)");
        assert_eq!(ds.item_label(1), "6");
    }

    fn arb_rows() -> impl Strategy<Value = Vec<Vec<usize>>> {
        prop::collection::vec(prop::collection::vec(0usize..12, 0..6), 0..15)
    }

    proptest! {
        #[test]
        fn tsv_round_trip_preserves_interactions(rows in arb_rows()) {
            let ds = InteractionDataset::from_matrix(InteractionMatrix::from_rows(12, &rows).unwrap());
            let ds = filter_dataset(&ds, 1, 1);
            let mut buf = Vec::new();
            ds.write_tsv(&mut buf).unwrap();
            let back = parse_interactions(&buf[..], &DelimitedFormat::tsv(), ProcessingRule::Identity).unwrap();
            prop_assert_eq!(back.n_users(), ds.n_users());
            prop_assert_eq!(back.n_items(), ds.n_items());
            prop_assert_eq!(back.n_interactions(), ds.n_interactions());
            for (i, j) in ds.interactions.iter() {
                let u = back.user_ids.index_of(ds.user_ids.id_of(i).unwrap()).unwrap();
                let v = back.item_ids.index_of(ds.item_ids.id_of(j).unwrap()).unwrap();
                prop_assert!(back.interactions.contains(u, v));
            }
        }

        #[test]
        fn filter_is_idempotent_per_pass(rows in arb_rows(), a in 0usize..4, b in 0usize..4) {
            let ds = InteractionDataset::from_matrix(InteractionMatrix::from_rows(12, &rows).unwrap());
            let items_only = filter_dataset(&ds, a, 0);
            prop_assert_eq!(&filter_dataset(&items_only, a, 0), &items_only);
            let users_only = filter_dataset(&ds, 0, b);
            prop_assert_eq!(&filter_dataset(&users_only, 0, b), &users_only);
            let once = filter_dataset(&ds, a, b);
            prop_assert_eq!(&filter_dataset(&once, 0, b), &once);
        }

        #[test]
        fn row_and_column_views_agree(rows in arb_rows()) {
            let m = InteractionMatrix::from_rows(12, &rows).unwrap();
            for j in 0..12 {
                for &i in m.col(j) {
                    prop_assert!(m.contains(i, j));
                }
            }
            prop_assert_eq!(m.item_counts().iter().sum::<usize>(), m.nnz());
        }
    }
}
