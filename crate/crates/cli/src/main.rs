//! `mvmc` command-line driver.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use mvmc::ergm::{build_covariates, coclustering_logodds, CoclusteringCoefficients, Term};
use mvmc::graph::DistanceMetric;
use mvmc::ingest::YearRange;
use mvmc::pipeline::{
    run_pipeline, write_consensus, write_stability, write_stats, ClusterFile, ErgmFile, Pipeline,
    PipelineConfig,
};
use mvmc::stability::AgreementMetric;
use mvmc::synth::{bundled_corpus_over, generate, CorpusKind};
use mvmc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mvmc",
    version,
    about = "Multi-view modularity clustering of armed groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the yearly count matrices; `--dump` writes them as CSV.
    Ingest(Common),
    /// Learn the per-view similarity graphs; `--dump` writes edge lists.
    Graphs {
        #[command(flatten)]
        common: Common,
        /// Only this year (default: every year).
        #[arg(long)]
        year: Option<i32>,
    },
    /// One two-step clustering run for a year.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        year: i32,
    },
    /// Seeded ensemble and consensus for a year.
    Ensemble {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        year: i32,
    },
    /// Year-by-year agreement of the consensus partitions.
    Stability {
        #[command(flatten)]
        common: Common,
        /// ari or fms.
        #[arg(long, default_value = "ari")]
        metric: String,
    },
    /// Graph statistics and the clusters-to-groups trend.
    Stats(Common),
    /// Pseudo-likelihood fit of the co-clustering model for a year.
    Ergm {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        year: i32,
    },
    /// Co-clustering log-odds of two groups under fitted coefficients.
    ErgmPredict {
        #[command(flatten)]
        common: Common,
        /// Year whose activity supplies the group covariates.
        #[arg(long)]
        year: i32,
        /// An `ergm_{year}.json` file, or a JSON object of named coefficients.
        #[arg(long)]
        theta_file: PathBuf,
        /// Two group names separated by a comma.
        #[arg(long)]
        pair: String,
    },
    /// Every stage in order.
    Pipeline(Common),
    /// Write a synthetic events and metadata corpus.
    Synth {
        /// bundled, declining or reversion.
        #[arg(long, default_value = "bundled")]
        kind: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Year span of the bundled corpus.
        #[arg(long)]
        years: Option<String>,
        #[arg(long, default_value = "synthetic")]
        out_dir: PathBuf,
    },
}

/// Flags shared by every analysis subcommand. Each one overrides the
/// matching key of `--config`.
#[derive(Args, Debug, Default)]
struct Common {
    /// TOML file with pipeline settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Inclusive window, `A..B`.
    #[arg(long)]
    years: Option<String>,
    #[arg(long)]
    min_attacks: Option<usize>,
    /// euclidean or cosine.
    #[arg(long)]
    distance: Option<String>,
    /// Ensemble size.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: logical CPU count).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    dump: bool,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    refine_min: Option<usize>,
    /// Add an edges term to the co-clustering model.
    #[arg(long)]
    include_intercept: bool,
}

impl Common {
    fn resolve(self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                toml::from_str::<PipelineConfig>(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.events {
            c.events = v;
        }
        if let Some(v) = self.metadata {
            c.metadata = Some(v);
        }
        if let Some(v) = self.years {
            c.years = Some(v.parse::<YearRange>()?);
        }
        if let Some(v) = self.min_attacks {
            c.min_attacks = v;
        }
        if let Some(v) = self.distance {
            c.distance = v.parse::<DistanceMetric>()?;
        }
        if let Some(v) = self.runs {
            c.runs = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.jobs {
            c.jobs = Some(v);
        }
        if let Some(v) = self.out_dir {
            c.out_dir = v;
        }
        if let Some(v) = self.max_iter {
            c.max_iter = v;
        }
        if let Some(v) = self.tol {
            c.tol = v;
        }
        if let Some(v) = self.refine_min {
            c.refine_min = v;
        }
        c.dump |= self.dump;
        c.include_intercept |= self.include_intercept;
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(common) => ingest(common.resolve()?),
        Command::Graphs { common, year } => graphs(common.resolve()?, year),
        Command::Cluster { common, year } => {
            let p = Pipeline::load(common.resolve()?)?;
            let partition = p.cluster(year)?;
            let mut out = p.outputs()?;
            let path = out.write_json(
                &format!("clusters_{year}.json"),
                &ClusterFile::new(year, &partition),
            )?;
            out.finish()?;
            println!(
                "{}: {} clusters over {} groups",
                path.display(),
                partition.n_clusters(),
                partition.nodes.len()
            );
            Ok(())
        }
        Command::Ensemble { common, year } => {
            let p = Pipeline::load(common.resolve()?)?;
            let (ensemble, consensus) = p.ensemble(year)?;
            let mut out = p.outputs()?;
            let path = write_consensus(&mut out, year, &ensemble, &consensus)?;
            out.finish()?;
            println!(
                "{}: {} clusters over {} groups",
                path.display(),
                consensus.n_clusters(),
                consensus.nodes.len()
            );
            Ok(())
        }
        Command::Stability { common, metric } => {
            let metric: AgreementMetric = metric.parse()?;
            let p = Pipeline::load(common.resolve()?)?;
            let analyses = p.analyze(false)?;
            let mut out = p.outputs()?;
            write_stability(&mut out, &analyses, metric)?;
            out.finish()?;
            println!(
                "stability_{}.csv: {} years",
                metric.as_str(),
                analyses.len()
            );
            Ok(())
        }
        Command::Stats(common) => {
            let p = Pipeline::load(common.resolve()?)?;
            let analyses = p.analyze(false)?;
            let mut out = p.outputs()?;
            write_stats(&mut out, &analyses)?;
            out.finish()?;
            println!("rbg_stats.csv, cluster_trend.csv: {} years", analyses.len());
            Ok(())
        }
        Command::Ergm { common, year } => {
            let p = Pipeline::load(common.resolve()?)?;
            let (_, consensus) = p.ensemble(year)?;
            let model = p.ergm(year, &consensus)?;
            let mut out = p.outputs()?;
            out.write_json(&format!("ergm_{year}.json"), &ErgmFile::new(year, &model))?;
            out.finish()?;
            for (i, term) in model.terms.iter().enumerate() {
                println!(
                    "{term:<28} {:>12.6} {:>12.6} {:>10.3} {:>10.4}",
                    model.theta[i], model.std_errors[i], model.z[i], model.p_values[i]
                );
            }
            println!(
                "AIC {:.4}  BIC {:.4}  dyads {}",
                model.aic, model.bic, model.n_dyads
            );
            Ok(())
        }
        Command::ErgmPredict {
            common,
            year,
            theta_file,
            pair,
        } => predict(common.resolve()?, year, &theta_file, &pair),
        Command::Pipeline(common) => {
            let report = run_pipeline(common.resolve()?)?;
            for a in &report.analyses {
                println!(
                    "{}: {} groups, {} clusters",
                    a.year,
                    a.consensus.nodes.len(),
                    a.consensus.n_clusters()
                );
            }
            for s in &report.manifest.skipped {
                println!("{}: {} skipped ({})", s.year, s.stage, s.reason);
            }
            Ok(())
        }
        Command::Synth {
            kind,
            seed,
            years,
            out_dir,
        } => {
            let kind: CorpusKind = kind.parse()?;
            let corpus = match (kind, years) {
                (CorpusKind::Bundled, Some(y)) => bundled_corpus_over(seed, y.parse()?),
                (_, Some(_)) => {
                    return Err(Error::Config(
                        "--years applies only to the bundled corpus".into(),
                    ))
                }
                (kind, None) => generate(kind, seed),
            };
            let (events, metadata) = corpus.write(&out_dir)?;
            println!("{}\n{}", events.display(), metadata.display());
            Ok(())
        }
    }
}

fn ingest(config: PipelineConfig) -> Result<()> {
    let dump = config.dump;
    let p = Pipeline::load(config)?;
    for slice in p.dataset.slices.values() {
        println!("{}: {} groups", slice.year, slice.n_groups());
    }
    if dump {
        let mut out = p.outputs()?;
        let files = p.dataset.dump(out.dir())?;
        out.record(files);
        out.finish()?;
    }
    Ok(())
}

fn graphs(config: PipelineConfig, year: Option<i32>) -> Result<()> {
    let dump = config.dump;
    let p = Pipeline::load(config)?;
    let years = match year {
        Some(y) => vec![y],
        None => p.years(),
    };
    let mut out = if dump { Some(p.outputs()?) } else { None };
    for year in years {
        let graphs = p.graphs(year)?;
        for g in graphs.views() {
            println!(
                "{year} {}: {} nodes, {} edges, radius {:.6}, sigma {:.6}",
                g.view,
                g.n_nodes(),
                g.n_edges(),
                g.radius,
                g.sigma
            );
            if let Some(out) = out.as_mut() {
                let files = g.dump(out.dir(), year)?;
                out.record(files);
            }
        }
    }
    if let Some(out) = out {
        out.finish()?;
    }
    Ok(())
}

/// Accepts either a fitted-model file (`terms` and `theta`) or an object of
/// named coefficients.
fn read_coefficients(path: &Path) -> Result<CoclusteringCoefficients> {
    #[derive(Deserialize)]
    struct Fitted {
        terms: Vec<String>,
        theta: Vec<f64>,
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if let Ok(f) = serde_json::from_str::<Fitted>(&text) {
        let terms = f
            .terms
            .iter()
            .map(|t| t.parse::<Term>())
            .collect::<Result<Vec<_>>>()?;
        return CoclusteringCoefficients::from_terms(&terms, &f.theta);
    }
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn predict(config: PipelineConfig, year: i32, theta_file: &Path, pair: &str) -> Result<()> {
    let (a, b) = pair
        .split_once(',')
        .map(|(a, b)| (a.trim(), b.trim()))
        .ok_or_else(|| Error::Config(format!("--pair expects A,B, got `{pair}`")))?;
    let coef = read_coefficients(theta_file)?;
    let p = Pipeline::load(config)?;
    let covariates = build_covariates(&p.dataset, p.slice(year)?)?;
    let missing: BTreeSet<&str> = [a, b]
        .into_iter()
        .filter(|g| !covariates.contains_key(*g))
        .collect();
    if !missing.is_empty() {
        return Err(Error::EmptySample(format!(
            "not active in {year} after filtering: {}",
            missing.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let (logit, prob) = coclustering_logodds(&covariates[a], &covariates[b], &coef);
    println!("logit {logit:.6}");
    println!("probability {prob:.6e}");
    Ok(())
}
