//! End-to-end orchestration: ingest, graphs, clustering, consensus,
//! stability, network statistics and co-clustering models, with every
//! output file traceable to its configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::{bgpa_consensus, run_ensemble, ClusterEnsemble};
use crate::ergm::{build_covariates, default_terms, mple_fit, BipartiteClusterNetwork, ErgmModel};
use crate::error::{Error, Result};
use crate::graph::DistanceMetric;
use crate::ingest::{
    build_dataset, default_excluded_actors, filter_sample, parse_events, parse_metadata,
    restrict_years, EventSchema, MultiViewDataset, View, YearRange, YearSlice,
};
use crate::mvmc::{
    two_step_cluster, view_graphs, MultiViewGraphs, MvmcConfig, Partition, TwoStepConfig,
};
use crate::netstats::{
    cluster_trend, graph_stats, write_cluster_trend, write_rbg_stats, RbgStatsRow,
};
use crate::stability::{stability_matrix, AgreementMetric, StabilityMatrix, YearClusterings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Graphs,
    Cluster,
    Ensemble,
    Stability,
    Stats,
    Ergm,
    Output,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Graphs => "graphs",
            Stage::Cluster => "cluster",
            Stage::Ensemble => "ensemble",
            Stage::Stability => "stability",
            Stage::Stats => "stats",
            Stage::Ergm => "ergm",
            Stage::Output => "output",
        }
    }

    fn wrap<T>(self, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage: self.as_str(),
                source: Box::new(e),
            },
        })
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub events: PathBuf,
    pub metadata: Option<PathBuf>,
    /// Analysis window; the span of the event years when absent.
    pub years: Option<YearRange>,
    pub min_attacks: usize,
    pub distance: DistanceMetric,
    pub runs: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub refine_min: usize,
    pub seed: u64,
    pub excluded_actors: BTreeSet<String>,
    pub include_intercept: bool,
    pub dump: bool,
    /// Worker threads; all logical CPUs when absent.
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            events: PathBuf::new(),
            metadata: None,
            years: None,
            min_attacks: 50,
            distance: DistanceMetric::Euclidean,
            runs: 10,
            max_iter: 20,
            tol: 0.01,
            refine_min: 4,
            seed: 0,
            excluded_actors: default_excluded_actors(),
            include_intercept: false,
            dump: false,
            jobs: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.events.as_os_str().is_empty() {
            return bad("an events file is required".into());
        }
        if self.min_attacks < 1 {
            return bad("min_attacks must be at least 1".into());
        }
        if self.runs < 1 {
            return bad("runs must be at least 1".into());
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        if let Some(y) = self.years {
            if y.is_empty() {
                return bad(format!("empty year range {y}"));
            }
        }
        Ok(())
    }

    pub fn two_step(&self) -> TwoStepConfig {
        TwoStepConfig {
            metric: self.distance,
            mvmc: MvmcConfig {
                max_iter: self.max_iter,
                tol: self.tol,
                ..MvmcConfig::default()
            },
            refine_min: self.refine_min,
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Digest of everything that determines the numeric outputs: the input file
/// contents and every setting except the thread count and output location.
pub fn config_hash(config: &PipelineConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Hashed<'a> {
        events_sha256: String,
        metadata_sha256: Option<String>,
        years: Option<YearRange>,
        min_attacks: usize,
        distance: DistanceMetric,
        runs: usize,
        max_iter: usize,
        tol: f64,
        refine_min: usize,
        seed: u64,
        excluded_actors: &'a BTreeSet<String>,
        include_intercept: bool,
        dump: bool,
    }
    let hashed = Hashed {
        events_sha256: file_digest(&config.events)?,
        metadata_sha256: config.metadata.as_deref().map(file_digest).transpose()?,
        years: config.years,
        min_attacks: config.min_attacks,
        distance: config.distance,
        runs: config.runs,
        max_iter: config.max_iter,
        tol: config.tol,
        refine_min: config.refine_min,
        seed: config.seed,
        excluded_actors: &config.excluded_actors,
        include_intercept: config.include_intercept,
        dump: config.dump,
    };
    Ok(sha256_hex(&serde_json::to_vec(&hashed)?))
}

/// Provenance embedded in every JSON output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFile {
    pub year: i32,
    pub labels: BTreeMap<String, usize>,
    pub gammas: Vec<f64>,
    pub weights: Vec<f64>,
    pub modularity: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl ClusterFile {
    pub fn new(year: i32, p: &Partition) -> Self {
        Self {
            year,
            labels: p.label_map(),
            gammas: p.gammas.clone(),
            weights: p.weights.clone(),
            modularity: p.modularity,
            converged: p.converged,
            iterations: p.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusFile {
    #[serde(flatten)]
    pub clusters: ClusterFile,
    pub runs: usize,
    pub run_seeds: Vec<u64>,
    /// Mean pairwise ARI among the runs.
    pub agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgmFile {
    pub year: i32,
    pub terms: Vec<String>,
    pub theta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub z: Vec<f64>,
    pub p_values: Vec<f64>,
    pub aic: f64,
    pub bic: f64,
    pub n_dyads: usize,
    pub log_pseudo_likelihood: f64,
    pub iterations: usize,
}

impl ErgmFile {
    pub fn new(year: i32, m: &ErgmModel) -> Self {
        Self {
            year,
            terms: m.terms.iter().map(ToString::to_string).collect(),
            theta: m.theta.clone(),
            std_errors: m.std_errors.clone(),
            z: m.z.clone(),
            p_values: m.p_values.clone(),
            aic: m.aic,
            bic: m.bic,
            n_dyads: m.n_dyads,
            log_pseudo_likelihood: m.log_pseudo_likelihood,
            iterations: m.iterations,
        }
    }
}

#[derive(Serialize)]
struct WithMeta<'a, T: Serialize> {
    #[serde(flatten)]
    body: &'a T,
    meta: &'a Meta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub year: i32,
    pub stage: String,
    pub reason: String,
}

/// `manifest.json`: provenance plus a digest of every file written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub files: BTreeMap<String, String>,
    pub skipped: Vec<Skipped>,
}

/// Collects the files written into one output directory.
pub struct OutputSet {
    dir: PathBuf,
    meta: Meta,
    files: Vec<PathBuf>,
    skipped: Vec<Skipped>,
}

impl OutputSet {
    pub fn create(dir: &Path, meta: Meta) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
            files: Vec::new(),
            skipped: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(&WithMeta {
            body,
            meta: &self.meta,
        })?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        self.files.push(path.clone());
        Ok(path)
    }

    /// Registers files written by another writer.
    pub fn record(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.files.extend(paths);
    }

    pub fn skip(&mut self, skipped: Skipped) {
        self.skipped.push(skipped);
    }

    /// Writes `manifest.json` with the digests of every recorded file.
    pub fn finish(self) -> Result<Manifest> {
        let mut files = BTreeMap::new();
        for path in &self.files {
            let rel = path
                .strip_prefix(&self.dir)
                .unwrap_or(path)
                .to_string_lossy()
                .replace('\\', "/");
            files.insert(rel, file_digest(path)?);
        }
        let manifest = Manifest {
            config_hash: self.meta.config_hash,
            seed: self.meta.seed,
            files,
            skipped: self.skipped,
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

/// Everything computed for one year.
#[derive(Debug)]
pub struct YearAnalysis {
    pub year: i32,
    pub graphs: MultiViewGraphs,
    pub ensemble: ClusterEnsemble,
    pub consensus: Partition,
    pub stats: Vec<RbgStatsRow>,
    pub n_isolates: usize,
    /// `None` when the model stage was not requested.
    pub ergm: Option<Result<ErgmModel>>,
}

/// Loaded, filtered input plus the configuration that produced it.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub meta: Meta,
    pub dataset: MultiViewDataset,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    pub fn load(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let meta = Meta {
            config_hash: Stage::Ingest.wrap(config_hash(&config))?,
            seed: config.seed,
        };
        let dataset = Stage::Ingest.wrap(load_dataset(&config))?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs.unwrap_or(0))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Self {
            config,
            meta,
            dataset,
            pool,
        })
    }

    /// Years with at least two groups; smaller years cannot be clustered.
    pub fn years(&self) -> Vec<i32> {
        self.dataset
            .slices
            .values()
            .filter(|s| s.n_groups() >= 2)
            .map(|s| s.year)
            .collect()
    }

    pub fn slice(&self, year: i32) -> Result<&YearSlice> {
        match self.dataset.slice(year) {
            Some(s) if s.n_groups() >= 2 => Ok(s),
            Some(s) => Err(Error::EmptySample(format!(
                "year {year} has {} group(s) after filtering; at least 2 are needed",
                s.n_groups()
            ))),
            None => Err(Error::EmptySample(format!(
                "year {year} is outside the sample"
            ))),
        }
    }

    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        self.pool.install(f)
    }

    pub fn graphs(&self, year: i32) -> Result<MultiViewGraphs> {
        Stage::Graphs.wrap(view_graphs(self.slice(year)?, self.config.distance))
    }

    pub fn cluster(&self, year: i32) -> Result<Partition> {
        let slice = self.slice(year)?;
        Stage::Cluster.wrap(
            two_step_cluster(slice, &self.config.two_step(), self.config.seed).map(|o| o.partition),
        )
    }

    pub fn ensemble(&self, year: i32) -> Result<(ClusterEnsemble, Partition)> {
        let slice = self.slice(year)?;
        Stage::Ensemble.wrap(self.install(|| {
            let e = run_ensemble(
                slice,
                &self.config.two_step(),
                self.config.runs,
                self.config.seed,
            )?;
            let c = bgpa_consensus(&e, self.config.seed)?;
            Ok((e, c))
        }))
    }

    /// Pseudo-likelihood fit of the consensus network of `year`.
    pub fn ergm(&self, year: i32, consensus: &Partition) -> Result<ErgmModel> {
        let slice = self.slice(year)?;
        Stage::Ergm.wrap((|| {
            let by_group = build_covariates(&self.dataset, slice)?;
            let covariates: Vec<_> = consensus
                .nodes
                .iter()
                .map(|g| {
                    by_group
                        .get(g)
                        .cloned()
                        .ok_or_else(|| Error::Contract(format!("no covariates for `{g}`")))
                })
                .collect::<Result<_>>()?;
            let network = BipartiteClusterNetwork::from_partition(consensus);
            mple_fit(
                &network,
                &default_terms(),
                &covariates,
                self.config.include_intercept,
            )
        })())
    }

    fn analyze_year(&self, year: i32, with_ergm: bool) -> Result<YearAnalysis> {
        let graphs = self.graphs(year)?;
        let stats = Stage::Stats.wrap(
            View::ALL
                .iter()
                .zip(graphs.views())
                .map(|(&view, g)| {
                    Ok(RbgStatsRow {
                        year,
                        view,
                        stats: graph_stats(g)?,
                    })
                })
                .collect::<Result<Vec<_>>>(),
        )?;
        let n_isolates = graphs.isolates().len();
        let (ensemble, consensus) = self.ensemble(year)?;
        let ergm = with_ergm.then(|| self.ergm(year, &consensus));
        Ok(YearAnalysis {
            year,
            graphs,
            ensemble,
            consensus,
            stats,
            n_isolates,
            ergm,
        })
    }

    /// Analyses every year in parallel; results come back in year order and
    /// the first failing year (in year order) aborts.
    pub fn analyze(&self, with_ergm: bool) -> Result<Vec<YearAnalysis>> {
        let years = self.years();
        self.install(|| {
            years
                .par_iter()
                .map(|&y| self.analyze_year(y, with_ergm))
                .collect::<Vec<_>>()
        })
        .into_iter()
        .collect()
    }

    pub fn outputs(&self) -> Result<OutputSet> {
        Stage::Output.wrap(OutputSet::create(&self.config.out_dir, self.meta.clone()))
    }
}

/// Reads the inputs and applies the window and sample rules in order:
/// year window, doubted events, excluded actors, activity threshold.
pub fn load_dataset(config: &PipelineConfig) -> Result<MultiViewDataset> {
    let events = parse_events(&config.events, &EventSchema::default())?;
    let metadata = match &config.metadata {
        Some(p) => parse_metadata(p)?,
        None => Vec::new(),
    };
    let years = match config.years {
        Some(y) => y,
        None => {
            let lo = events.iter().map(|e| e.year).min();
            let hi = events.iter().map(|e| e.year).max();
            match (lo, hi) {
                (Some(lo), Some(hi)) => YearRange::new(lo, hi),
                _ => return Err(Error::EmptySample("the events file has no rows".into())),
            }
        }
    };
    let events = restrict_years(events, years);
    let kept = filter_sample(events, config.min_attacks, &config.excluded_actors);
    if kept.is_empty() {
        return Err(Error::EmptySample(format!(
            "no group has at least {} attacks in {years}",
            config.min_attacks
        )));
    }
    build_dataset(&kept, &metadata, years)
}

pub fn stability_for(
    analyses: &[YearAnalysis],
    metric: AgreementMetric,
) -> Result<StabilityMatrix> {
    let clusterings: YearClusterings = analyses
        .iter()
        .map(|a| (a.year, a.consensus.clone()))
        .collect();
    Stage::Stability.wrap(stability_matrix(&clusterings, metric))
}

/// Writes `rbg_stats.csv` and `cluster_trend.csv`.
pub fn write_stats(out: &mut OutputSet, analyses: &[YearAnalysis]) -> Result<()> {
    Stage::Stats.wrap((|| {
        let rows: Vec<RbgStatsRow> = analyses.iter().flat_map(|a| a.stats.clone()).collect();
        let path = out.dir().join("rbg_stats.csv");
        write_rbg_stats(&rows, &path)?;
        out.record([path]);

        let trend_in: Vec<(i32, &Partition, usize)> = analyses
            .iter()
            .map(|a| (a.year, &a.consensus, a.n_isolates))
            .collect();
        let path = out.dir().join("cluster_trend.csv");
        write_cluster_trend(&cluster_trend(&trend_in)?, &path)?;
        out.record([path]);
        Ok(())
    })())
}

pub fn write_stability(
    out: &mut OutputSet,
    analyses: &[YearAnalysis],
    metric: AgreementMetric,
) -> Result<StabilityMatrix> {
    let matrix = stability_for(analyses, metric)?;
    let path = out.dir().join(format!("stability_{}.csv", metric.as_str()));
    Stage::Stability.wrap(matrix.write_csv(&path))?;
    out.record([path]);
    Ok(matrix)
}

pub fn write_consensus(
    out: &mut OutputSet,
    year: i32,
    ensemble: &ClusterEnsemble,
    consensus: &Partition,
) -> Result<PathBuf> {
    let body = ConsensusFile {
        clusters: ClusterFile::new(year, consensus),
        runs: ensemble.len(),
        run_seeds: ensemble.run_seeds.clone(),
        agreement: Stage::Ensemble.wrap(ensemble.agreement())?,
    };
    out.write_json(&format!("consensus_{year}.json"), &body)
}

/// Summary of a full pipeline run.
#[derive(Debug)]
pub struct PipelineReport {
    pub manifest: Manifest,
    pub analyses: Vec<YearAnalysis>,
    pub stability: BTreeMap<AgreementMetric, StabilityMatrix>,
}

/// Runs every stage and writes all outputs into `config.out_dir`. A failed
/// model fit for a year is recorded in the manifest and skipped; any other
/// failure aborts with the name of its stage.
pub fn run_pipeline(config: PipelineConfig) -> Result<PipelineReport> {
    let pipeline = Pipeline::load(config)?;
    let years = pipeline.years();
    if years.is_empty() {
        return Err(Error::EmptySample(
            "no year has at least two groups after filtering".into(),
        ));
    }
    let mut out = pipeline.outputs()?;
    if pipeline.config.dump {
        let files = Stage::Ingest.wrap(pipeline.dataset.dump(&out.dir().join("matrices")))?;
        out.record(files);
    }

    let analyses = pipeline.analyze(true)?;
    for a in &analyses {
        if pipeline.config.dump {
            let dir = out.dir().join("graphs");
            for g in a.graphs.views() {
                let files = Stage::Graphs.wrap(g.dump(&dir, a.year))?;
                out.record(files);
            }
        }
        write_consensus(&mut out, a.year, &a.ensemble, &a.consensus)?;
        match &a.ergm {
            Some(Ok(model)) => {
                out.write_json(
                    &format!("ergm_{}.json", a.year),
                    &ErgmFile::new(a.year, model),
                )?;
            }
            Some(Err(e)) => {
                log::warn!("year {}: {e}", a.year);
                out.skip(Skipped {
                    year: a.year,
                    stage: Stage::Ergm.to_string(),
                    reason: e.to_string(),
                });
            }
            None => {}
        }
    }

    let mut stability = BTreeMap::new();
    for metric in [AgreementMetric::Ari, AgreementMetric::Fms] {
        stability.insert(metric, write_stability(&mut out, &analyses, metric)?);
    }
    write_stats(&mut out, &analyses)?;

    let manifest = Stage::Output.wrap(out.finish())?;
    Ok(PipelineReport {
        manifest,
        analyses,
        stability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{bundled_corpus, declining_ratio_corpus, reversion_corpus, Corpus};

    fn config_for(corpus: &Corpus, dir: &Path) -> PipelineConfig {
        let (events, metadata) = corpus.write(&dir.join("input")).unwrap();
        PipelineConfig {
            events,
            metadata: Some(metadata),
            seed: 7,
            out_dir: dir.join("out"),
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn validation_rejects_bad_settings() {
        let ok = PipelineConfig {
            events: "e.csv".into(),
            ..PipelineConfig::default()
        };
        assert!(ok.validate().is_ok());
        for bad in [
            PipelineConfig {
                runs: 0,
                ..ok.clone()
            },
            PipelineConfig {
                min_attacks: 0,
                ..ok.clone()
            },
            PipelineConfig {
                tol: 0.0,
                ..ok.clone()
            },
            PipelineConfig {
                tol: f64::NAN,
                ..ok.clone()
            },
            PipelineConfig {
                jobs: Some(0),
                ..ok.clone()
            },
            PipelineConfig {
                years: Some(YearRange::new(2005, 2001)),
                ..ok.clone()
            },
            PipelineConfig {
                events: PathBuf::new(),
                ..ok.clone()
            },
        ] {
            assert_eq!(bad.validate().unwrap_err().exit_code(), 2, "{bad:?}");
        }
    }

    #[test]
    fn hash_ignores_location_and_threads() {
        let dir = tempfile::tempdir().unwrap();
        let a = config_for(&reversion_corpus(), dir.path());
        let b = PipelineConfig {
            jobs: Some(3),
            out_dir: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        let c = PipelineConfig {
            seed: 8,
            ..a.clone()
        };
        assert_ne!(config_hash(&a).unwrap(), config_hash(&c).unwrap());
        let d = PipelineConfig {
            min_attacks: 30,
            ..a.clone()
        };
        assert_ne!(config_hash(&a).unwrap(), config_hash(&d).unwrap());
    }

    #[test]
    fn empty_sample_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let config = PipelineConfig {
            min_attacks: 1_000_000,
            ..config_for(&reversion_corpus(), dir.path())
        };
        let err = run_pipeline(config).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("empty sample"), "{err}");
        assert!(err.to_string().contains("ingest"), "{err}");
    }

    #[test]
    fn missing_input_names_the_stage() {
        let config = PipelineConfig {
            events: "/nonexistent/events.csv".into(),
            ..PipelineConfig::default()
        };
        let err = run_pipeline(config).unwrap_err();
        assert!(err.to_string().starts_with("stage `ingest`"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn reversion_fixture_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let config = PipelineConfig {
            dump: true,
            ..config_for(&reversion_corpus(), dir.path())
        };
        let report = run_pipeline(config.clone()).unwrap();
        let names: Vec<&str> = report.manifest.files.keys().map(String::as_str).collect();
        for expected in [
            "consensus_2001.json",
            "consensus_2003.json",
            "stability_ari.csv",
            "stability_fms.csv",
            "rbg_stats.csv",
            "cluster_trend.csv",
            "matrices/2002_weapon.csv",
            "graphs/2003_target_edges.csv",
            "graphs/2003_target_graph.json",
        ] {
            assert!(
                names.contains(&expected),
                "{expected} missing from {names:?}"
            );
        }
        for metric in [AgreementMetric::Ari, AgreementMetric::Fms] {
            let m = &report.stability[&metric];
            let s13 = m.get(2001, 2003).unwrap();
            let s23 = m.get(2002, 2003).unwrap();
            assert!(s13 > s23, "{metric:?}: {s13} vs {s23}");
        }

        let text = std::fs::read_to_string(config.out_dir.join("consensus_2001.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["meta"]["seed"], 7);
        assert_eq!(
            v["meta"]["config_hash"],
            report.manifest.config_hash.as_str()
        );
        assert_eq!(v["runs"], 10);
        assert_eq!(v["labels"].as_object().unwrap().len(), 18);
    }

    #[test]
    fn declining_fixture_ratio_decreases() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_pipeline(config_for(&declining_ratio_corpus(), dir.path())).unwrap();
        let ratios: Vec<f64> = report
            .analyses
            .iter()
            .map(|a| a.consensus.n_clusters() as f64 / a.consensus.nodes.len() as f64)
            .collect();
        assert_eq!(ratios.len(), 4);
        assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    }

    #[test]
    fn bundled_run_is_deterministic_across_thread_counts() {
        let dir = tempfile::tempdir().unwrap();
        let base = config_for(&bundled_corpus(7), dir.path());
        let a = run_pipeline(PipelineConfig {
            jobs: Some(1),
            out_dir: dir.path().join("a"),
            ..base.clone()
        })
        .unwrap();
        let b = run_pipeline(PipelineConfig {
            jobs: Some(4),
            out_dir: dir.path().join("b"),
            ..base
        })
        .unwrap();
        assert_eq!(a.manifest, b.manifest);
        assert!(
            a.manifest.files.contains_key("ergm_2001.json"),
            "{:?}",
            a.manifest
        );
    }
}
