use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mvnrec::config::RunConfig;
use mvnrec::eval::{benchmark_runtime, evaluate_model, make_folds, seed_size_study, sweep};
use mvnrec::qualitative::recommend_named;
use mvnrec::report::{self, ResultRow, RunManifest};
use mvnrec::{oracles, Error, InteractionDataset, ModelSpec, Result};

#[derive(Parser)]
#[command(
    name = "mvnrec",
    version,
    about = "Implicit-feedback recommenders and their evaluation"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Model spec such as `mvn:lambda=1` or `knn:k=64`; repeatable.
    #[arg(long, global = true)]
    model: Vec<String>,
    #[arg(long, global = true)]
    rng_seed: Option<u64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long, global = true)]
    seed_size: Option<usize>,
    /// Worker threads [default: $MVNREC_THREADS, else all cores].
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset and print its size.
    Ingest {
        /// Also write the processed interactions as `user<TAB>item`.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Cross-validate models with fixed hyperparameters.
    Evaluate,
    /// Pick hyperparameters on validation users inside each training fold.
    Sweep,
    /// Evaluate models over a range of seed sizes.
    SeedStudy,
    /// Time fitting and scoring on user subsamples.
    Bench,
    /// Check the models against independent reference computations.
    Verify,
    /// Top-N for a list of named seed items.
    Recommend {
        /// Seed item label; repeatable.
        #[arg(long = "item")]
        items: Vec<String>,
        #[arg(long)]
        top: Option<usize>,
        /// `bias` or `no-bias`.
        #[arg(long)]
        bias: Option<String>,
        /// Print CSV instead of aligned text.
        #[arg(long)]
        csv: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Evaluate => "evaluate",
            Command::Sweep => "sweep",
            Command::SeedStudy => "seed-study",
            Command::Bench => "bench",
            Command::Verify => "verify",
            Command::Recommend { .. } => "recommend",
        }
    }
}

fn resolve(common: &Common, command: &Command) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(d) = &common.dataset {
        config.dataset = Some(d.clone());
    }
    if !common.model.is_empty() {
        config.models = common.model.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    }
    if let Some(v) = common.rng_seed {
        config.rng_seed = v;
    }
    if let Some(v) = common.folds {
        config.folds = v;
    }
    if let Some(v) = common.seed_size {
        config.seed_size = v;
    }
    if let Some(v) = common.threads {
        config.threads = Some(v);
    }
    if let Some(v) = &common.out {
        config.out = v.clone();
    }
    if let Command::Recommend { items, top, bias, .. } = command {
        if !items.is_empty() {
            config.seed_labels = items.clone();
        }
        if let Some(n) = top {
            config.top_n = *n;
        }
        if let Some(b) = bias {
            config.bias = b.parse()?;
        }
    }
    config.apply_environment()?;
    if config.models.is_empty() {
        config.models = default_models(command)?;
    }
    Ok(config)
}

fn default_models(command: &Command) -> Result<Vec<ModelSpec>> {
    let families: &[&str] = match command {
        Command::Sweep => &["mvn", "knn"],
        Command::SeedStudy => &["popularity", "mvn", "knn"],
        Command::Recommend { .. } => &["mvn"],
        _ => &["random", "popularity", "mvn", "knn"],
    };
    families.iter().map(|f| ModelSpec::family_default(f)).collect()
}

struct Run {
    config: RunConfig,
    manifest: RunManifest,
    command: &'static str,
}

impl Run {
    fn new(config: RunConfig, command: &'static str) -> Self {
        let mut manifest = RunManifest::new(command);
        manifest.push("rng_seed", config.rng_seed);
        Self {
            config,
            manifest,
            command,
        }
    }

    fn dataset(&mut self) -> Result<InteractionDataset> {
        let ds = self.config.load_dataset()?;
        let path = self.config.dataset_path()?.to_path_buf();
        self.manifest.push("dataset_name", self.config.name());
        self.manifest.push_file("dataset", &path)?;
        self.manifest.push("format", &self.config.format);
        self.manifest.push("rule", self.config.rule);
        self.manifest.push("dataset_size", ds.summary());
        self.manifest.push("folds", self.config.folds);
        log::info!("{}: {}", self.config.name(), ds.summary());
        Ok(ds)
    }

    fn models(&mut self) {
        for spec in &self.config.models {
            self.manifest.push("model", spec);
        }
    }

    fn path(&self, ext: &str) -> PathBuf {
        self.config.out.join(format!("{}.{ext}", self.command))
    }

    /// Writes the result table, the resolved config and the manifest into the output directory.
    fn finish(mut self, table: Option<Vec<u8>>) -> Result<()> {
        let out = self.config.out.clone();
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        if let Some(bytes) = table {
            let path = self.path("csv");
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            self.manifest.push("results", path.display());
            eprintln!("wrote {}", path.display());
        }
        let config_path = self.path("config");
        fs::write(&config_path, self.config.to_kv_string()).map_err(|e| Error::io(&config_path, e))?;
        self.manifest.push("resolved_config", config_path.display());
        self.manifest.write_to(&self.path("manifest"))
    }
}

fn print_rows(rows: &[ResultRow]) {
    for r in rows.iter().filter(|r| r.fold == "mean") {
        println!(
            "{:<10} {:<22} {:<40} P@k {:.4}  nDCG {:.4}  fit {:.2}s  score {:.2}s",
            r.model, r.variant, r.hyperparameters, r.precision, r.ndcg, r.fit_seconds, r.score_seconds
        );
    }
}

fn run(cli: Cli) -> Result<bool> {
    let command = cli.command.name();
    let config = resolve(&cli.common, &cli.command)?;
    let mut run = Run::new(config, command);
    match &cli.command {
        Command::Ingest { write } => {
            let ds = run.config.load_dataset()?;
            println!("{}", ds.summary());
            if let Some(path) = write {
                let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
                ds.write_tsv(std::io::BufWriter::new(file))
                    .map_err(|e| Error::io(path, e))?;
            }
            Ok(true)
        }
        Command::Evaluate => {
            let ds = run.dataset()?;
            run.models();
            run.manifest.push("seed_size", run.config.seed_size);
            let r = &ds.interactions;
            let opts = run.config.eval_options();
            let folds = make_folds(r, run.config.folds, run.config.seed_size, run.config.rng_seed)?;
            let name = run.config.name();
            let mut rows = Vec::new();
            let mut last = None;
            for spec in &run.config.models {
                let e =
                    evaluate_model(spec, r, &folds, &opts, run.config.rng_seed).map_err(|e| e.with_context(&name))?;
                let new = ResultRow::from_evaluation(&name, &e);
                print_rows(&new);
                rows.extend(new);
                last = Some(e.mean);
            }
            let mut buf = Vec::new();
            report::write_results(&mut buf, &rows, last.as_ref(), r.n_items())?;
            run.finish(Some(buf))?;
            Ok(true)
        }
        Command::Sweep => {
            let ds = run.dataset()?;
            run.models();
            run.manifest.push("seed_size", run.config.seed_size);
            run.manifest.push("validation_fraction", run.config.validation_fraction);
            let r = &ds.interactions;
            let opts = run.config.eval_options();
            let folds = make_folds(r, run.config.folds, run.config.seed_size, run.config.rng_seed)?;
            let name = run.config.name();
            let mut rows = Vec::new();
            let mut last = None;
            for spec in run.config.models.clone() {
                let grid = run.config.sweep_grid(&spec, r.n_items());
                run.manifest.push("grid", grid.describe());
                let result = sweep(
                    &grid,
                    r,
                    &folds,
                    run.config.validation_fraction,
                    &opts,
                    run.config.rng_seed,
                )
                .map_err(|e| e.with_context(&name))?;
                for f in &result.folds {
                    println!(
                        "fold {}: chose {} (validation P@k {:.4}), test P@k {:.4}",
                        f.outcome.fold,
                        f.chosen.hyperparameters(),
                        f.validation_precision,
                        f.outcome.report.precision_at_k
                    );
                }
                let new = ResultRow::from_sweep(&name, &result);
                print_rows(&new);
                rows.extend(new);
                last = Some(result.mean);
            }
            let mut buf = Vec::new();
            report::write_results(&mut buf, &rows, last.as_ref(), r.n_items())?;
            run.finish(Some(buf))?;
            Ok(true)
        }
        Command::SeedStudy => {
            let ds = run.dataset()?;
            run.models();
            let sizes = run.config.seed_sizes.clone();
            run.manifest.push(
                "seed_sizes",
                sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
            );
            let r = &ds.interactions;
            let opts = run.config.eval_options();
            let name = run.config.name();
            let points = seed_size_study(
                &run.config.models,
                r,
                &sizes,
                run.config.folds,
                &opts,
                run.config.rng_seed,
            )
            .map_err(|e| e.with_context(&name))?;
            for p in &points {
                println!(
                    "{:<24} s={:<3} P@k {:.4}",
                    p.spec.label(),
                    p.seed_size,
                    p.evaluation.mean.precision_at_k
                );
            }
            let mut buf = Vec::new();
            report::write_seed_study(&mut buf, &name, &points, r.n_items())?;
            run.finish(Some(buf))?;
            Ok(true)
        }
        Command::Bench => {
            let ds = run.dataset()?;
            run.models();
            let r = &ds.interactions;
            let n = r.n_users();
            let counts = if run.config.user_counts.is_empty() {
                let mut c: Vec<usize> = [n / 8, n / 4, n / 2, n].into_iter().filter(|&c| c >= 2).collect();
                c.dedup();
                c
            } else {
                run.config.user_counts.clone()
            };
            run.manifest.push(
                "user_counts",
                counts.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
            );
            let opts = run.config.eval_options();
            let name = run.config.name();
            let points = benchmark_runtime(
                &run.config.models,
                r,
                &counts,
                run.config.seed_size,
                &opts,
                run.config.rng_seed,
            )
            .map_err(|e| e.with_context(&name))?;
            for p in &points {
                println!(
                    "{:<24} n={:<7} fit {:.3}s  score {:.3}s",
                    p.spec.label(),
                    p.n_users,
                    p.fit_seconds,
                    p.score_seconds
                );
            }
            let mut buf = Vec::new();
            report::write_benchmark(&mut buf, &name, &points, run.config.k_precision)?;
            run.finish(Some(buf))?;
            Ok(true)
        }
        Command::Verify => {
            let reports = oracles::run_suite(run.config.rng_seed);
            let mut ok = true;
            for r in &reports {
                println!("{r}");
                run.manifest.push("oracle", r);
                ok &= r.pass;
            }
            run.finish(None)?;
            Ok(ok)
        }
        Command::Recommend { csv, .. } => {
            let ds = run.dataset()?;
            run.models();
            if run.config.seed_labels.is_empty() {
                return Err(Error::Config("no seed items (use --item or seeds = a | b)".into()));
            }
            let seeds: Vec<&str> = run.config.seed_labels.iter().map(String::as_str).collect();
            let recs = run
                .config
                .models
                .iter()
                .map(|spec| {
                    recommend_named(
                        &ds,
                        spec,
                        &seeds,
                        run.config.top_n,
                        run.config.bias,
                        run.config.rng_seed,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            if *csv {
                report::write_named(std::io::stdout().lock(), &recs)?;
            } else {
                for rec in &recs {
                    println!("{}", report::format_named(rec));
                }
            }
            let mut table = Vec::new();
            report::write_named(&mut table, &recs)?;
            run.finish(Some(table))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
