//! Co-clustering covariates, pairwise log-odds, and pseudo-likelihood
//! estimation of a group-to-cluster network model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, EstimationError, Result};
use crate::ingest::{MultiViewDataset, View, YearSlice, UNKNOWN_CATEGORY};
use crate::mvmc::Partition;

const MAX_IRLS_ITER: usize = 50;
const IRLS_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 30;
/// Fitted probabilities this close to 0 or 1 indicate separation.
const SEPARATION_EPS: f64 = 1e-10;
/// Relative residual norm under which a design column counts as dependent.
const RANK_TOL: f64 = 1e-9;

/// Yearly per-group covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCovariates {
    /// Total weight across all three views.
    pub sum_weights: u64,
    /// Number of positive cells across all three views.
    pub nonzero_features: u64,
    /// `nonzero_features / sum_weights`, in (0, 1].
    pub ratio: f64,
    pub modal_tactic: String,
    pub modal_target: String,
    pub modal_weapon: String,
    pub region: String,
    pub ideology: String,
}

fn modal(row: &[u32], vocabulary: &[String]) -> String {
    // Ties go to the lexicographically first category.
    let mut best: Option<(u32, &String)> = None;
    for (&w, cat) in row.iter().zip(vocabulary) {
        best = match best {
            Some((bw, bc)) if bw > w || (bw == w && bc <= cat) => Some((bw, bc)),
            _ => Some((w, cat)),
        };
    }
    best.map_or_else(|| UNKNOWN_CATEGORY.to_string(), |(_, c)| c.clone())
}

/// Covariates of every group active in `slice`, keyed by group name.
pub fn build_covariates(
    dataset: &MultiViewDataset,
    slice: &YearSlice,
) -> Result<BTreeMap<String, GroupCovariates>> {
    let mut out = BTreeMap::new();
    for (r, group) in slice.groups.iter().enumerate() {
        let mut sum = 0u64;
        let mut nonzero = 0u64;
        for view in View::ALL {
            for &w in slice.matrix(view).row(r) {
                sum += u64::from(w);
                nonzero += u64::from(w > 0);
            }
        }
        if sum == 0 {
            return Err(Error::Contract(format!(
                "group `{group}` has no activity in {}",
                slice.year
            )));
        }
        let meta = dataset.metadata_for(group);
        out.insert(
            group.clone(),
            GroupCovariates {
                sum_weights: sum,
                nonzero_features: nonzero,
                ratio: nonzero as f64 / sum as f64,
                modal_tactic: modal(
                    slice.matrix(View::Tactic).row(r),
                    dataset.vocabulary(View::Tactic),
                ),
                modal_target: modal(
                    slice.matrix(View::Target).row(r),
                    dataset.vocabulary(View::Target),
                ),
                modal_weapon: modal(
                    slice.matrix(View::Weapon).row(r),
                    dataset.vocabulary(View::Weapon),
                ),
                region: meta.most_common_region,
                ideology: meta.ideology,
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    SumWeights,
    NonzeroFeatures,
    Ratio,
    Tactic,
    Target,
    Weapon,
    Region,
    Ideology,
}

impl Attribute {
    pub const ALL: [Attribute; 8] = [
        Self::SumWeights,
        Self::NonzeroFeatures,
        Self::Ratio,
        Self::Tactic,
        Self::Target,
        Self::Weapon,
        Self::Region,
        Self::Ideology,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SumWeights => "sum_weights",
            Self::NonzeroFeatures => "nonzero_features",
            Self::Ratio => "ratio",
            Self::Tactic => "tactic",
            Self::Target => "target",
            Self::Weapon => "weapon",
            Self::Region => "region",
            Self::Ideology => "ideology",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Self::SumWeights | Self::NonzeroFeatures | Self::Ratio)
    }

    fn numeric(self, c: &GroupCovariates) -> f64 {
        match self {
            Self::SumWeights => c.sum_weights as f64,
            Self::NonzeroFeatures => c.nonzero_features as f64,
            Self::Ratio => c.ratio,
            _ => unreachable!("categorical attribute used numerically"),
        }
    }

    fn category(self, c: &GroupCovariates) -> &str {
        match self {
            Self::Tactic => &c.modal_tactic,
            Self::Target => &c.modal_target,
            Self::Weapon => &c.modal_weapon,
            Self::Region => &c.region,
            Self::Ideology => &c.ideology,
            _ => unreachable!("numeric attribute used categorically"),
        }
    }

    /// Equality of a categorical attribute; unknown values never match.
    fn matches(self, a: &GroupCovariates, b: &GroupCovariates) -> bool {
        let (x, y) = (self.category(a), self.category(b));
        x == y && x != UNKNOWN_CATEGORY
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown covariate `{s}`")))
    }
}

/// A model statistic on the group-to-cluster network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    /// Number of edges (the intercept).
    Edges,
    /// Σ over edges of the group's value.
    NodeCovSum(Attribute),
    /// Σ over clusters and pairs of co-members of |x_a − x_b|.
    AbsDiff(Attribute),
    /// Σ over clusters of co-member pairs sharing the attribute.
    Match(Attribute),
}

impl Term {
    pub fn validate(self) -> Result<Self> {
        match self {
            Term::NodeCovSum(a) | Term::AbsDiff(a) if !a.is_numeric() => Err(Error::Config(
                format!("term {self} needs a numeric covariate"),
            )),
            Term::Match(a) if a.is_numeric() => Err(Error::Config(format!(
                "term {self} needs a categorical covariate"
            ))),
            _ => Ok(self),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Edges => f.write_str("edges"),
            Term::NodeCovSum(a) => write!(f, "nodecov.{}", a.as_str()),
            Term::AbsDiff(a) => write!(f, "absdiff.{}", a.as_str()),
            Term::Match(a) => write!(f, "nodematch.{}", a.as_str()),
        }
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "edges" {
            return Ok(Term::Edges);
        }
        let (kind, attr) = s
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("unknown term `{s}`")))?;
        let attr: Attribute = attr.parse()?;
        let term = match kind {
            "nodecov" => Term::NodeCovSum(attr),
            "absdiff" => Term::AbsDiff(attr),
            "nodematch" => Term::Match(attr),
            _ => return Err(Error::Config(format!("unknown term `{s}`"))),
        };
        term.validate()
    }
}

/// The eight-covariate specification used by the pipeline.
pub fn default_terms() -> Vec<Term> {
    vec![
        Term::NodeCovSum(Attribute::SumWeights),
        Term::AbsDiff(Attribute::NonzeroFeatures),
        Term::AbsDiff(Attribute::Ratio),
        Term::Match(Attribute::Target),
        Term::Match(Attribute::Tactic),
        Term::Match(Attribute::Weapon),
        Term::Match(Attribute::Region),
        Term::Match(Attribute::Ideology),
    ]
}

/// Coefficients of the pairwise co-clustering log-odds. Absent terms are 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoclusteringCoefficients {
    pub sum_weights: f64,
    pub nonzero_diff: f64,
    pub ratio_diff: f64,
    pub target: f64,
    pub tactic: f64,
    pub weapon: f64,
    pub region: f64,
    pub ideology: f64,
}

impl CoclusteringCoefficients {
    /// Picks the coefficients of the default terms out of a fitted term list.
    /// The intercept and any other term are ignored.
    pub fn from_terms(terms: &[Term], theta: &[f64]) -> Result<Self> {
        if terms.len() != theta.len() {
            return Err(Error::Config(format!(
                "{} terms but {} coefficients",
                terms.len(),
                theta.len()
            )));
        }
        let mut c = Self::default();
        for (term, &t) in terms.iter().zip(theta) {
            match term {
                Term::NodeCovSum(Attribute::SumWeights) => c.sum_weights = t,
                Term::AbsDiff(Attribute::NonzeroFeatures) => c.nonzero_diff = t,
                Term::AbsDiff(Attribute::Ratio) => c.ratio_diff = t,
                Term::Match(Attribute::Target) => c.target = t,
                Term::Match(Attribute::Tactic) => c.tactic = t,
                Term::Match(Attribute::Weapon) => c.weapon = t,
                Term::Match(Attribute::Region) => c.region = t,
                Term::Match(Attribute::Ideology) => c.ideology = t,
                _ => {}
            }
        }
        Ok(c)
    }
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Conditional log-odds, and its probability, that two groups tie to the
/// same cluster.
pub fn coclustering_logodds(
    a: &GroupCovariates,
    b: &GroupCovariates,
    theta: &CoclusteringCoefficients,
) -> (f64, f64) {
    let indicator = |attr: Attribute| f64::from(u8::from(attr.matches(a, b)));
    let logit = theta.sum_weights * (a.sum_weights + b.sum_weights) as f64
        + theta.nonzero_diff * a.nonzero_features.abs_diff(b.nonzero_features) as f64
        + theta.ratio_diff * (a.ratio - b.ratio).abs()
        + theta.target * indicator(Attribute::Target)
        + theta.tactic * indicator(Attribute::Tactic)
        + theta.weapon * indicator(Attribute::Weapon)
        + theta.region * indicator(Attribute::Region)
        + theta.ideology * indicator(Attribute::Ideology);
    (logit, expit(logit))
}

/// Bipartite network between groups and clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteClusterNetwork {
    pub groups: Vec<String>,
    pub n_clusters: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl BipartiteClusterNetwork {
    /// Network with an arbitrary edge set.
    pub fn new(
        groups: Vec<String>,
        n_clusters: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let edges: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        if let Some(&(o, c)) = edges
            .iter()
            .find(|&&(o, c)| o >= groups.len() || c >= n_clusters)
        {
            return Err(Error::Contract(format!("edge ({o}, {c}) is out of range")));
        }
        Ok(Self {
            groups,
            n_clusters,
            edges,
        })
    }

    /// The partition-induced network: each group tied to its own cluster.
    pub fn from_partition(partition: &Partition) -> Self {
        Self {
            groups: partition.nodes.clone(),
            n_clusters: partition.n_clusters(),
            edges: partition.labels.iter().copied().enumerate().collect(),
        }
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn has_edge(&self, group: usize, cluster: usize) -> bool {
        self.edges.contains(&(group, cluster))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn toggle(&mut self, group: usize, cluster: usize) {
        if !self.edges.remove(&(group, cluster)) {
            self.edges.insert((group, cluster));
        }
    }

    fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for &(o, c) in &self.edges {
            out[c].push(o);
        }
        out
    }
}

fn term_change(term: Term, o: usize, peers: &[usize], cov: &[GroupCovariates]) -> f64 {
    let x = &cov[o];
    match term {
        Term::Edges => 1.0,
        Term::NodeCovSum(a) => a.numeric(x),
        Term::AbsDiff(a) => peers
            .iter()
            .filter(|&&p| p != o)
            .map(|&p| (a.numeric(x) - a.numeric(&cov[p])).abs())
            .sum(),
        Term::Match(a) => peers
            .iter()
            .filter(|&&p| p != o && a.matches(x, &cov[p]))
            .count() as f64,
    }
}

fn check_covariates(network: &BipartiteClusterNetwork, cov: &[GroupCovariates]) -> Result<()> {
    if cov.len() != network.n_groups() {
        return Err(Error::Contract(format!(
            "{} covariate rows for {} groups",
            cov.len(),
            network.n_groups()
        )));
    }
    Ok(())
}

/// Δg for switching `(group, cluster)` on with the rest of the network fixed.
/// `covariates` is aligned with `network.groups`.
pub fn change_statistics(
    network: &BipartiteClusterNetwork,
    edge: (usize, usize),
    terms: &[Term],
    covariates: &[GroupCovariates],
) -> Result<Vec<f64>> {
    check_covariates(network, covariates)?;
    let (o, c) = edge;
    if o >= network.n_groups() || c >= network.n_clusters {
        return Err(Error::Contract(format!("edge ({o}, {c}) is out of range")));
    }
    let peers: Vec<usize> = network
        .edges
        .range((0, c)..)
        .filter(|&&(_, cc)| cc == c)
        .map(|&(p, _)| p)
        .collect();
    Ok(terms
        .iter()
        .map(|&t| term_change(t, o, &peers, covariates))
        .collect())
}

/// The full model statistics g(y).
pub fn network_statistics(
    network: &BipartiteClusterNetwork,
    terms: &[Term],
    covariates: &[GroupCovariates],
) -> Result<Vec<f64>> {
    check_covariates(network, covariates)?;
    let members = network.members();
    Ok(terms
        .iter()
        .map(|&term| match term {
            Term::Edges => network.edges.len() as f64,
            Term::NodeCovSum(a) => network
                .edges()
                .map(|(o, _)| a.numeric(&covariates[o]))
                .sum(),
            Term::AbsDiff(_) | Term::Match(_) => members
                .iter()
                .map(|m| {
                    let mut s = 0.0;
                    for (k, &u) in m.iter().enumerate() {
                        for &v in &m[k + 1..] {
                            s += match term {
                                Term::AbsDiff(a) => {
                                    (a.numeric(&covariates[u]) - a.numeric(&covariates[v])).abs()
                                }
                                Term::Match(a) => {
                                    f64::from(u8::from(a.matches(&covariates[u], &covariates[v])))
                                }
                                _ => unreachable!(),
                            };
                        }
                    }
                    s
                })
                .sum(),
        })
        .collect())
}

/// Fitted pseudo-likelihood model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgmModel {
    pub terms: Vec<Term>,
    pub theta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub z: Vec<f64>,
    pub p_values: Vec<f64>,
    pub log_pseudo_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_dyads: usize,
    pub iterations: usize,
}

impl ErgmModel {
    pub fn coefficients(&self) -> Result<CoclusteringCoefficients> {
        CoclusteringCoefficients::from_terms(&self.terms, &self.theta)
    }
}

/// Response and change-statistic rows for every (group, cluster) dyad,
/// group-major.
pub fn design_matrix(
    network: &BipartiteClusterNetwork,
    terms: &[Term],
    covariates: &[GroupCovariates],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_covariates(network, covariates)?;
    let members = network.members();
    let n_dyads = network.n_groups() * network.n_clusters;
    let mut x = DMatrix::zeros(n_dyads, terms.len());
    let mut y = DVector::zeros(n_dyads);
    for o in 0..network.n_groups() {
        for (c, peers) in members.iter().enumerate() {
            let row = o * network.n_clusters + c;
            y[row] = f64::from(u8::from(network.has_edge(o, c)));
            for (k, &t) in terms.iter().enumerate() {
                x[(row, k)] = term_change(t, o, peers, covariates);
            }
        }
    }
    Ok((x, y))
}

/// Index of the first column that lies in the span of the earlier ones.
fn first_dependent_column(x: &DMatrix<f64>) -> Option<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for k in 0..x.ncols() {
        let col = x.column(k).into_owned();
        let norm = col.norm();
        if norm == 0.0 {
            return Some(k);
        }
        let mut r = col / norm;
        for q in &basis {
            let proj = q.dot(&r);
            r -= q * proj;
        }
        let rn = r.norm();
        if rn < RANK_TOL {
            return Some(k);
        }
        basis.push(r / rn);
    }
    None
}

fn log_likelihood(eta: &DVector<f64>, y: &DVector<f64>) -> f64 {
    eta.iter()
        .zip(y.iter())
        .map(|(&e, &yi)| yi * e - (e.max(0.0) + (-e.abs()).exp().ln_1p()))
        .sum()
}

struct LogisticFit {
    theta: DVector<f64>,
    covariance: DMatrix<f64>,
    log_likelihood: f64,
    iterations: usize,
}

/// Newton-Raphson / IRLS for logistic regression with step halving.
fn irls(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<LogisticFit> {
    let k = x.ncols();
    let mut theta = DVector::zeros(k);
    let mut ll = log_likelihood(&(x * &theta), y);
    let mut trace = Vec::new();

    for iter in 1..=MAX_IRLS_ITER {
        let eta = x * &theta;
        let p = eta.map(expit);
        let w = p.map(|pi| pi * (1.0 - pi));
        let grad = x.transpose() * (y - &p);
        let mut xw = x.clone();
        for (r, &wr) in w.iter().enumerate() {
            xw.row_mut(r).scale_mut(wr);
        }
        let info = x.transpose() * xw;
        let step = match info.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => break,
        };

        let mut scale = 1.0;
        let mut next = &theta + &step;
        let mut next_ll = log_likelihood(&(x * &next), y);
        for _ in 0..MAX_HALVINGS {
            if next_ll >= ll - 1e-12 {
                break;
            }
            scale *= 0.5;
            next = &theta + &step * scale;
            next_ll = log_likelihood(&(x * &next), y);
        }
        let delta = (&next - &theta).amax();
        trace.push(delta);
        theta = next;
        ll = next_ll;

        if delta < IRLS_TOL {
            let p = (x * &theta).map(expit);
            let mut xw = x.clone();
            for (r, &pi) in p.iter().enumerate() {
                xw.row_mut(r).scale_mut(pi * (1.0 - pi));
            }
            let info = x.transpose() * xw;
            let covariance = info.cholesky().map(|ch| ch.inverse()).ok_or_else(|| {
                EstimationError::Separation {
                    term: names[largest_effect(&theta, x)].clone(),
                }
            })?;
            return Ok(LogisticFit {
                theta,
                covariance,
                log_likelihood: ll,
                iterations: iter,
            });
        }
    }

    let p = (x * &theta).map(expit);
    if p.iter()
        .any(|&pi| pi <= SEPARATION_EPS || pi >= 1.0 - SEPARATION_EPS)
    {
        return Err(EstimationError::Separation {
            term: names[largest_effect(&theta, x)].clone(),
        }
        .into());
    }
    Err(EstimationError::NonConvergence {
        iterations: trace.len(),
        trace,
    }
    .into())
}

/// Term whose coefficient moves the linear predictor the most.
fn largest_effect(theta: &DVector<f64>, x: &DMatrix<f64>) -> usize {
    (0..theta.len())
        .map(|k| (k, theta[k].abs() * x.column(k).amax()))
        .fold((0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        })
        .0
}

fn normal_two_sided_p(z: f64) -> f64 {
    statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Maximum pseudo-likelihood fit: logistic regression of every dyad's tie
/// indicator on its change statistics.
pub fn mple_fit(
    network: &BipartiteClusterNetwork,
    terms: &[Term],
    covariates: &[GroupCovariates],
    include_intercept: bool,
) -> Result<ErgmModel> {
    if network.n_groups() < 2 {
        return Err(EstimationError::TooSmall {
            what: "groups",
            needed: 2,
            found: network.n_groups(),
        }
        .into());
    }
    if network.n_clusters < 2 {
        return Err(EstimationError::TooSmall {
            what: "clusters",
            needed: 2,
            found: network.n_clusters,
        }
        .into());
    }
    let mut all_terms = Vec::with_capacity(terms.len() + 1);
    if include_intercept && !terms.contains(&Term::Edges) {
        all_terms.push(Term::Edges);
    }
    for &t in terms {
        all_terms.push(t.validate()?);
    }
    let names: Vec<String> = all_terms.iter().map(Term::to_string).collect();

    let (x, y) = design_matrix(network, &all_terms, covariates)?;
    if let Some(k) = first_dependent_column(&x) {
        return Err(EstimationError::RankDeficient {
            term: names[k].clone(),
        }
        .into());
    }
    let fit = irls(&x, &y, &names)?;

    let k = all_terms.len();
    let n_dyads = x.nrows();
    let std_errors: Vec<f64> = (0..k).map(|i| fit.covariance[(i, i)].sqrt()).collect();
    let theta: Vec<f64> = fit.theta.iter().copied().collect();
    let z: Vec<f64> = theta.iter().zip(&std_errors).map(|(t, s)| t / s).collect();
    let p_values = z.iter().map(|&zi| normal_two_sided_p(zi)).collect();
    let ll = fit.log_likelihood;
    Ok(ErgmModel {
        terms: all_terms,
        theta,
        std_errors,
        z,
        p_values,
        log_pseudo_likelihood: ll,
        aic: 2.0 * k as f64 - 2.0 * ll,
        bic: k as f64 * (n_dyads as f64).ln() - 2.0 * ll,
        n_dyads,
        iterations: fit.iterations,
    })
}
