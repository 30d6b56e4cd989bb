//! Textual model descriptions such as `mvn:lambda=0.5,variant=observed` or `knn:k=64`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::knn::{KnnConfig, KnnModel, Similarity};
use crate::mf::{MfConfig, MfLoss, MfModel};
use crate::mvn::{MvnConfig, MvnModel};
use crate::recommender::{NonInteractions, PopularityRecommender, RandomRecommender, Recommender};

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Random {
        seed: Option<u64>,
    },
    Popularity,
    Mvn(MvnConfig),
    Knn(KnnConfig),
    /// Matrix factorization; `seed` overrides the run seed for initialization and sampling.
    Mf {
        config: MfConfig,
        seed: Option<u64>,
    },
}

pub const FAMILIES: &[&str] = &["random", "popularity", "mvn", "knn", "mf-ls", "bpr", "log"];

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_variant(value: &str) -> Result<NonInteractions> {
    match value {
        "missing" => Ok(NonInteractions::Missing),
        "observed" => Ok(NonInteractions::Observed),
        _ => Err(Error::Config(format!(
            "variant: expected missing or observed, got {value:?}"
        ))),
    }
}

fn variant_name(v: NonInteractions) -> &'static str {
    match v {
        NonInteractions::Missing => "missing",
        NonInteractions::Observed => "observed",
    }
}

impl ModelSpec {
    /// Default configuration of a model family.
    pub fn family_default(family: &str) -> Result<Self> {
        Ok(match family {
            "random" => ModelSpec::Random { seed: None },
            "popularity" | "pop" => ModelSpec::Popularity,
            "mvn" => ModelSpec::Mvn(MvnConfig::default()),
            "knn" => ModelSpec::Knn(KnnConfig::default()),
            "mf-ls" | "mf" | "als" => ModelSpec::Mf {
                config: MfConfig::default(),
                seed: None,
            },
            "bpr" | "mf-bpr" => ModelSpec::Mf {
                config: MfConfig {
                    loss: MfLoss::Bpr,
                    lambda: 0.01,
                    ..MfConfig::default()
                },
                seed: None,
            },
            "log" | "mf-log" => ModelSpec::Mf {
                config: MfConfig {
                    loss: MfLoss::Logistic,
                    learning_rate: 1.0,
                    ..MfConfig::default()
                },
                seed: None,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown model {other:?}; expected one of {}",
                    FAMILIES.join(", ")
                )))
            }
        })
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Random { .. } => "random",
            ModelSpec::Popularity => "popularity",
            ModelSpec::Mvn(_) => "mvn",
            ModelSpec::Knn(_) => "knn",
            ModelSpec::Mf { config, .. } => match config.loss {
                MfLoss::LeastSquares => "mf-ls",
                MfLoss::Bpr => "bpr",
                MfLoss::Logistic => "log",
            },
        }
    }

    /// Short description of how non-interactions and popularity are handled.
    pub fn variant(&self) -> String {
        match self {
            ModelSpec::Random { .. } | ModelSpec::Popularity => "-".into(),
            ModelSpec::Mvn(c) => {
                let base = variant_name(c.non_interactions);
                if c.popularity_free {
                    format!("{base}+no-bias")
                } else {
                    base.into()
                }
            }
            ModelSpec::Knn(c) => {
                let base = if c.normalized { "normalized" } else { "unnormalized" };
                match c.similarity {
                    Similarity::Cosine => base.into(),
                    Similarity::Correlation => format!("{base}+no-bias"),
                }
            }
            ModelSpec::Mf { config, .. } => match config.loss {
                MfLoss::LeastSquares => variant_name(config.non_interactions).into(),
                MfLoss::Bpr if !config.item_bias => "no-bias".into(),
                _ => "-".into(),
            },
        }
    }

    /// Hyperparameters as `key=value` pairs joined by `;`.
    pub fn hyperparameters(&self) -> String {
        self.params().join(";")
    }

    fn params(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            ModelSpec::Random { seed } => {
                if let Some(s) = seed {
                    out.push(format!("seed={s}"));
                }
            }
            ModelSpec::Popularity => {}
            ModelSpec::Mvn(c) => {
                out.push(format!("lambda={}", c.ridge));
                out.push(format!("alpha={}", c.alpha));
                out.push(format!("beta={}", c.beta));
                if let Some(r) = c.eigen_rank {
                    out.push(format!("rank={r}"));
                }
            }
            ModelSpec::Knn(c) => {
                out.push(match c.k {
                    Some(k) => format!("k={k}"),
                    None => "k=m".into(),
                });
            }
            ModelSpec::Mf { config, seed } => {
                out.push(format!("d={}", config.dim));
                out.push(format!("lambda={}", config.lambda));
                out.push(format!("epochs={}", config.epochs));
                if config.loss != MfLoss::LeastSquares {
                    out.push(format!("lr={}", config.learning_rate));
                }
                if let Some(s) = seed {
                    out.push(format!("seed={s}"));
                }
            }
        }
        out
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        let unknown = |family: &str| Error::Config(format!("{family}: unknown parameter {key:?}"));
        match self {
            ModelSpec::Random { seed } => match key {
                "seed" => *seed = Some(parse_num(key, value)?),
                _ => return Err(unknown("random")),
            },
            ModelSpec::Popularity => return Err(unknown("popularity")),
            ModelSpec::Mvn(c) => match key {
                "lambda" | "ridge" => c.ridge = parse_num(key, value)?,
                "alpha" => c.alpha = parse_num(key, value)?,
                "beta" => c.beta = parse_num(key, value)?,
                "variant" => c.non_interactions = parse_variant(value)?,
                "bias" => c.popularity_free = !parse_bool(key, value)?,
                "popularity_free" => c.popularity_free = parse_bool(key, value)?,
                "rank" => c.eigen_rank = Some(parse_num(key, value)?),
                "cap" => c.item_cap = parse_num(key, value)?,
                _ => return Err(unknown("mvn")),
            },
            ModelSpec::Knn(c) => match key {
                "k" => {
                    c.k = match value {
                        "m" | "all" => None,
                        v => Some(parse_num(key, v)?),
                    }
                }
                "normalized" => c.normalized = parse_bool(key, value)?,
                "variant" => {
                    c.normalized = match value {
                        "normalized" | "observed" => true,
                        "unnormalized" | "missing" => false,
                        _ => return Err(Error::Config(format!("knn variant {value:?}"))),
                    }
                }
                "similarity" => {
                    c.similarity = match value {
                        "cosine" => Similarity::Cosine,
                        "correlation" => Similarity::Correlation,
                        _ => return Err(Error::Config(format!("knn similarity {value:?}"))),
                    }
                }
                "bias" => {
                    c.similarity = if parse_bool(key, value)? {
                        Similarity::Cosine
                    } else {
                        Similarity::Correlation
                    }
                }
                "cap" => c.item_cap = parse_num(key, value)?,
                _ => return Err(unknown("knn")),
            },
            ModelSpec::Mf { config, seed } => match key {
                "d" | "dim" => config.dim = parse_num(key, value)?,
                "lambda" => config.lambda = parse_num(key, value)?,
                "epochs" => config.epochs = parse_num(key, value)?,
                "tol" | "tolerance" => config.tolerance = parse_num(key, value)?,
                "lr" | "learning_rate" => config.learning_rate = parse_num(key, value)?,
                "seed" => *seed = Some(parse_num(key, value)?),
                "bias" | "item_bias" => config.item_bias = parse_bool(key, value)?,
                "variant" => config.non_interactions = parse_variant(value)?,
                "block" => config.block_size = parse_num(key, value)?,
                _ => return Err(unknown(self.family())),
            },
        }
        Ok(())
    }

    /// Copy of `self` with one parameter changed.
    pub fn with(&self, key: &str, value: &str) -> Result<Self> {
        let mut out = self.clone();
        out.set(key, value)?;
        Ok(out)
    }

    /// An unfitted model. `rng_seed` is used unless the spec fixes its own seed.
    pub fn build(&self, rng_seed: u64) -> Box<dyn Recommender> {
        match self {
            ModelSpec::Random { seed } => Box::new(RandomRecommender::new(seed.unwrap_or(rng_seed))),
            ModelSpec::Popularity => Box::new(PopularityRecommender::new()),
            ModelSpec::Mvn(c) => Box::new(MvnModel::new(c.clone())),
            ModelSpec::Knn(c) => Box::new(KnnModel::new(c.clone())),
            ModelSpec::Mf { config, seed } => Box::new(MfModel::new(MfConfig {
                rng_seed: seed.unwrap_or(rng_seed),
                ..config.clone()
            })),
        }
    }

    /// `family[:key=value,...]` label with the variant included.
    pub fn label(&self) -> String {
        let v = self.variant();
        if v == "-" {
            self.family().into()
        } else {
            format!("{} ({v})", self.family())
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, rest) = match s.split_once(':') {
            Some((f, r)) => (f, r),
            None => (s, ""),
        };
        let mut spec = ModelSpec::family_default(&family.trim().to_ascii_lowercase())?;
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value in model spec, got {pair:?}")))?;
            spec.set(k, v)?;
        }
        Ok(spec)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut params = self.params();
        match self {
            ModelSpec::Mvn(c) => {
                params.push(format!("variant={}", variant_name(c.non_interactions)));
                if c.popularity_free {
                    params.push("bias=off".into());
                }
            }
            ModelSpec::Knn(c) => {
                params.push(format!("normalized={}", c.normalized));
                if c.similarity == Similarity::Correlation {
                    params.push("similarity=correlation".into());
                }
            }
            ModelSpec::Mf { config, .. } => {
                if config.loss == MfLoss::LeastSquares {
                    params.push(format!("variant={}", variant_name(config.non_interactions)));
                }
                if config.loss == MfLoss::Bpr && !config.item_bias {
                    params.push("bias=off".into());
                }
            }
            _ => {}
        }
        if params.is_empty() {
            write!(f, "{}", self.family())
        } else {
            write!(f, "{}:{}", self.family(), params.join(","))
        }
    }
}
