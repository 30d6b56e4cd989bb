//! Run configuration: a plain `key = value` file, overridable field by field.
//!
//! ```text
//! # lines starting with # are comments
//! dataset = data/ml-100k/u.data
//! format = auto
//! rule = identity
//! model = mvn; knn:k=64
//! folds = 5
//! seed_size = 3
//! rng_seed = 0
//! ```
//!
//! Several models are separated by `;` because model specs use commas.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dataset::{
    filter_dataset, load_interactions, load_item_labels, DelimitedFormat, InteractionDataset, LabelFormat,
    ProcessingRule,
};
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, SweepGrid};
use crate::model_spec::ModelSpec;
use crate::qualitative::BiasMode;

/// Environment variable holding the default worker-thread budget.
pub const THREADS_ENV: &str = "MVNREC_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// Display name in result files; defaults to the dataset's directory or file stem.
    pub dataset_name: Option<String>,
    /// Format preset or `auto` to infer from the file name.
    pub format: String,
    pub rule: ProcessingRule,
    pub labels: Option<PathBuf>,
    pub label_format: Option<String>,
    pub min_users_per_item: usize,
    pub min_items_per_user: usize,
    pub models: Vec<ModelSpec>,
    pub folds: usize,
    pub seed_size: usize,
    pub seed_sizes: Vec<usize>,
    pub rng_seed: u64,
    pub k_precision: usize,
    pub k_ndcg: Option<usize>,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub validation_fraction: f64,
    /// Sweep axes `grid.<key> = v1 v2 ...`; families without an explicit axis use their
    /// default grid.
    pub grid: Vec<(String, Vec<String>)>,
    pub user_counts: Vec<usize>,
    pub seed_labels: Vec<String>,
    pub top_n: usize,
    pub bias: BiasMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            dataset_name: None,
            format: "auto".into(),
            rule: ProcessingRule::Identity,
            labels: None,
            label_format: None,
            min_users_per_item: 0,
            min_items_per_user: 0,
            models: Vec::new(),
            folds: 5,
            seed_size: 3,
            seed_sizes: (0..=10).collect(),
            rng_seed: 0,
            k_precision: 20,
            k_ndcg: None,
            threads: None,
            out: PathBuf::from("results"),
            validation_fraction: 0.2,
            grid: Vec::new(),
            user_counts: Vec::new(),
            seed_labels: Vec::new(),
            top_n: 20,
            bias: BiasMode::ItemBias,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    // `a..b` is an inclusive integer range
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: usize = parse(key, lo.trim())?;
        let hi: usize = parse(key, hi.trim())?;
        return (lo..=hi).map(|v| parse(key, &v.to_string())).collect();
    }
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: ToString>(values: &[T], sep: &str) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

impl RunConfig {
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            config.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(message) => Error::Parse {
                    line: lineno + 1,
                    message,
                },
                other => other,
            })?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let opt_path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "dataset" => self.dataset = opt_path(value),
            "dataset_name" | "name" => self.dataset_name = (!value.is_empty()).then(|| value.to_string()),
            "format" => self.format = value.to_string(),
            "rule" => self.rule = value.parse()?,
            "labels" => self.labels = opt_path(value),
            "label_format" => self.label_format = (!value.is_empty()).then(|| value.to_string()),
            "min_users_per_item" => self.min_users_per_item = parse(key, value)?,
            "min_items_per_user" => self.min_items_per_user = parse(key, value)?,
            "model" | "models" => {
                self.models = value
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "folds" => self.folds = parse(key, value)?,
            "seed_size" => self.seed_size = parse(key, value)?,
            "seed_sizes" => self.seed_sizes = parse_list(key, value)?,
            "rng_seed" => self.rng_seed = parse(key, value)?,
            "k_precision" => self.k_precision = parse(key, value)?,
            "k_ndcg" => {
                self.k_ndcg = match value {
                    "m" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "threads" => {
                self.threads = match value {
                    "" | "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "out" => self.out = PathBuf::from(value),
            "validation_fraction" => self.validation_fraction = parse(key, value)?,
            "user_counts" => self.user_counts = parse_list(key, value)?,
            "seeds" => {
                self.seed_labels = value
                    .split('|')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "top_n" => self.top_n = parse(key, value)?,
            "bias" => self.bias = value.parse()?,
            other => match other.strip_prefix("grid.") {
                Some(axis) => {
                    let values: Vec<String> = value.split_whitespace().map(String::from).collect();
                    self.grid.retain(|(k, _)| k != axis);
                    self.grid.push((axis.to_string(), values));
                }
                None => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
            },
        }
        Ok(())
    }

    /// Fills the thread budget from the environment when it was not set explicitly.
    pub fn apply_environment(&mut self) -> Result<()> {
        if self.threads.is_none() {
            if let Ok(v) = std::env::var(THREADS_ENV) {
                if !v.trim().is_empty() {
                    self.threads = Some(parse(THREADS_ENV, v.trim())?);
                }
            }
        }
        Ok(())
    }

    /// The configuration as a file that reproduces it when loaded.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        line("dataset", path(&self.dataset));
        line("dataset_name", self.dataset_name.clone().unwrap_or_default());
        line("format", self.format.clone());
        line("rule", self.rule.to_string());
        line("labels", path(&self.labels));
        line("label_format", self.label_format.clone().unwrap_or_default());
        line("min_users_per_item", self.min_users_per_item.to_string());
        line("min_items_per_user", self.min_items_per_user.to_string());
        line("model", join(&self.models, "; "));
        line("folds", self.folds.to_string());
        line("seed_size", self.seed_size.to_string());
        line("seed_sizes", join(&self.seed_sizes, " "));
        line("rng_seed", self.rng_seed.to_string());
        line("k_precision", self.k_precision.to_string());
        line("k_ndcg", self.k_ndcg.map_or("m".into(), |k| k.to_string()));
        line("threads", self.threads.map_or("auto".into(), |t| t.to_string()));
        line("out", self.out.display().to_string());
        line("validation_fraction", self.validation_fraction.to_string());
        for (axis, values) in &self.grid {
            line(&format!("grid.{axis}"), values.join(" "));
        }
        line("user_counts", join(&self.user_counts, " "));
        line("seeds", self.seed_labels.join(" | "));
        line("top_n", self.top_n.to_string());
        line(
            "bias",
            match self.bias {
                BiasMode::ItemBias => "bias".into(),
                BiasMode::NoItemBias => "no-bias".into(),
            },
        );
        out
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            k_precision: self.k_precision,
            k_ndcg: self.k_ndcg,
            threads: self.threads,
            keep_per_user: false,
        }
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset given (set dataset = ... or --dataset)".into()))
    }

    pub fn name(&self) -> String {
        if let Some(name) = &self.dataset_name {
            return name.clone();
        }
        let Some(path) = &self.dataset else {
            return "dataset".into();
        };
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
        // generic MovieLens file names are less telling than their directory
        if matches!(stem, "u" | "ratings" | "data") {
            if let Some(dir) = path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()) {
                return dir.to_string();
            }
        }
        stem.to_string()
    }

    /// The interaction format, inferring it from the file name when set to `auto`.
    pub fn resolved_format(&self) -> Result<DelimitedFormat> {
        if self.format != "auto" {
            return DelimitedFormat::preset(&self.format);
        }
        let path = self.dataset_path()?;
        let file = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
        let preset = if file == "u.data" {
            "ml-100k"
        } else if file.ends_with(".dat") {
            "ml-1m"
        } else if file.ends_with(".inter") {
            "atomic"
        } else if file.ends_with(".csv") {
            "csv"
        } else {
            "tsv"
        };
        DelimitedFormat::preset(preset)
    }

    /// Explicit label file, or the conventional companion of the interaction file if present.
    fn resolved_labels(&self) -> Result<Option<(PathBuf, LabelFormat)>> {
        let path = self.dataset_path()?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let file = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
        let guess = if file == "u.data" {
            Some((dir.join("u.item"), "ml-100k"))
        } else if file == "ratings.dat" {
            Some((dir.join("movies.dat"), "ml-1m"))
        } else if file.ends_with(".inter") {
            Some((path.with_extension("item"), "atomic"))
        } else {
            None
        };
        match (&self.labels, guess) {
            (Some(p), guess) => {
                let preset = match (&self.label_format, guess) {
                    (Some(f), _) => f.clone(),
                    (None, Some((_, g))) => g.to_string(),
                    (None, None) => "tsv".into(),
                };
                Ok(Some((p.clone(), LabelFormat::preset(&preset)?)))
            }
            (None, Some((p, g))) if p.exists() => {
                let preset = self.label_format.clone().unwrap_or_else(|| g.to_string());
                Ok(Some((p, LabelFormat::preset(&preset)?)))
            }
            _ => Ok(None),
        }
    }

    /// Loads, labels and filters the dataset.
    pub fn load_dataset(&self) -> Result<InteractionDataset> {
        let path = self.dataset_path()?;
        let mut ds = load_interactions(path, &self.resolved_format()?, self.rule)?;
        if let Some((labels, format)) = self.resolved_labels()? {
            load_item_labels(&mut ds, labels, &format)?;
        }
        if self.min_users_per_item > 0 || self.min_items_per_user > 0 {
            ds = filter_dataset(&ds, self.min_users_per_item, self.min_items_per_user);
        }
        Ok(ds)
    }

    /// Sweep grid for `spec`: the configured axes, or the family default.
    pub fn sweep_grid(&self, spec: &ModelSpec, n_items: usize) -> SweepGrid {
        if self.grid.is_empty() {
            SweepGrid::for_family(spec.clone(), n_items)
        } else {
            self.grid
                .iter()
                .fold(SweepGrid::new(spec.clone()), |g, (k, v)| g.axis(k, v.clone()))
        }
    }
}
