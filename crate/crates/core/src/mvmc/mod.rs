//! Multi-view modularity clustering.
//!
//! The objective is the view-weighted, resolution-corrected modularity
//!
//! ```text
//! Q = Σ_v w_v Σ_{i,j : c_i = c_j} [ A^v_ij − γ_v deg^v_i deg^v_j / (2|E^v|) ]
//! ```
//!
//! summed over all ordered node pairs inside a cluster (diagonal included),
//! without per-view normalisation. With one view and `w = γ = 1` this is
//! `2|E|` times Newman modularity.
//!
//! [`mvmc`] alternates between clustering with fixed `(γ, w)` and
//! re-estimating `(γ, w)` from the clustering until both stabilise.

mod louvain;
mod resolution;
mod two_step;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;

pub(crate) use louvain::louvain_levels;
pub use louvain::{louvain_cluster, louvain_with_trace, LouvainOutcome};
pub use resolution::{
    estimate_thetas, update_resolution, update_weights, ThetaEstimates, ViewThetas, WeightUpdate,
    THETA_FLOOR,
};
pub use two_step::{two_step_cluster, two_step_with, view_graphs, TwoStepConfig, TwoStepOutcome};

/// View graphs sharing one node set, in a fixed view order.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewGraphs {
    nodes: Vec<String>,
    views: Vec<SimilarityGraph>,
}

impl MultiViewGraphs {
    pub fn new(views: Vec<SimilarityGraph>) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::Contract("at least one view is required".into()))?;
        let nodes = first.nodes.clone();
        if views.iter().any(|v| v.nodes != nodes) {
            return Err(Error::Contract("views disagree on node ordering".into()));
        }
        Ok(Self { nodes, views })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of views.
    pub fn m(&self) -> usize {
        self.views.len()
    }

    pub fn views(&self) -> &[SimilarityGraph] {
        &self.views
    }

    /// Nodes with no edge in any view.
    pub fn isolates(&self) -> Vec<usize> {
        let mut touched = vec![false; self.n_nodes()];
        for g in &self.views {
            for &(i, j, _) in g.edges() {
                touched[i] = true;
                touched[j] = true;
            }
        }
        (0..self.n_nodes()).filter(|&i| !touched[i]).collect()
    }
}

/// Cluster assignment plus the parameters it was produced under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub nodes: Vec<String>,
    /// Dense cluster ids, `labels[i]` for `nodes[i]`.
    pub labels: Vec<usize>,
    pub gammas: Vec<f64>,
    pub weights: Vec<f64>,
    pub modularity: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl Partition {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn label_map(&self) -> BTreeMap<String, usize> {
        self.nodes
            .iter()
            .cloned()
            .zip(self.labels.iter().copied())
            .collect()
    }

    pub fn label_of(&self, node: &str) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n == node)
            .map(|i| self.labels[i])
    }

    /// Members of each cluster, indexed by cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

/// Relabels so ids are dense and assigned in order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Per-view weighted adjacency in the form Louvain and the objective use:
/// off-diagonal neighbours in both directions plus a diagonal term.
#[derive(Debug, Clone)]
pub(crate) struct LevelGraph {
    pub adj: Vec<Vec<(usize, f64)>>,
    pub self_loop: Vec<f64>,
    pub degree: Vec<f64>,
    /// Σ_i deg_i, i.e. 2|E|.
    pub two_m: f64,
}

impl LevelGraph {
    pub fn from_similarity(g: &SimilarityGraph) -> Self {
        Self::from_edges(g.n_nodes(), g.edges())
    }

    /// Undirected graph on `n` nodes from `(i, j, w)` edges with `i != j`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        let mut degree = vec![0.0; n];
        for &(i, j, w) in edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
            degree[i] += w;
            degree[j] += w;
        }
        let two_m = degree.iter().sum();
        Self {
            adj,
            self_loop: vec![0.0; n],
            degree,
            two_m,
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    /// Unweighted-sum objective term for one view at resolution `gamma`.
    pub fn modularity(&self, labels: &[usize], gamma: f64) -> f64 {
        if self.two_m <= 0.0 {
            return 0.0;
        }
        let n_comm = labels.iter().max().map_or(0, |&m| m + 1);
        let mut kappa = vec![0.0; n_comm];
        let mut intra = 0.0;
        for i in 0..self.n() {
            kappa[labels[i]] += self.degree[i];
            intra += self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                if labels[j] == labels[i] {
                    intra += w;
                }
            }
        }
        let null: f64 = kappa.iter().map(|k| k * k).sum::<f64>() / self.two_m;
        intra - gamma * null
    }

    /// Collapses communities into single nodes; intra-community weight
    /// becomes the diagonal term.
    pub fn aggregate(&self, labels: &[usize], n_comm: usize) -> Self {
        let mut maps: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_comm];
        let mut self_loop = vec![0.0; n_comm];
        let mut degree = vec![0.0; n_comm];
        for i in 0..self.n() {
            let ci = labels[i];
            self_loop[ci] += self.self_loop[i];
            degree[ci] += self.degree[i];
            for &(j, w) in &self.adj[i] {
                let cj = labels[j];
                if ci == cj {
                    self_loop[ci] += w;
                } else {
                    *maps[ci].entry(cj).or_default() += w;
                }
            }
        }
        Self {
            adj: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_loop,
            degree,
            two_m: self.two_m,
        }
    }
}

fn check_params(graphs: &MultiViewGraphs, gammas: &[f64], weights: &[f64]) -> Result<()> {
    if gammas.len() != graphs.m() || weights.len() != graphs.m() {
        return Err(Error::Contract(format!(
            "expected {} per-view parameters, got {} gammas and {} weights",
            graphs.m(),
            gammas.len(),
            weights.len()
        )));
    }
    Ok(())
}

pub fn multiview_modularity(
    graphs: &MultiViewGraphs,
    labels: &[usize],
    gammas: &[f64],
    weights: &[f64],
) -> Result<f64> {
    if labels.len() != graphs.n_nodes() {
        return Err(Error::Contract(format!(
            "{} labels for {} nodes",
            labels.len(),
            graphs.n_nodes()
        )));
    }
    check_params(graphs, gammas, weights)?;
    let labels = canonical_labels(labels);
    Ok(graphs
        .views()
        .iter()
        .zip(gammas.iter().zip(weights))
        .map(|(g, (&gamma, &w))| w * LevelGraph::from_similarity(g).modularity(&labels, gamma))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvmcConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub start_gamma: f64,
    pub start_weight: f64,
}

impl Default for MvmcConfig {
    fn default() -> Self {
        Self {
            max_iter: 20,
            tol: 0.01,
            start_gamma: 1.0,
            start_weight: 1.0,
        }
    }
}

/// Mixes a base seed with a stream index.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn mvmc(graphs: &MultiViewGraphs, config: &MvmcConfig, seed: u64) -> Result<Partition> {
    mvmc_with(graphs, config, seed, |g, gammas, weights, s| {
        louvain_cluster(g, gammas, weights, s)
    })
}

/// [`mvmc`] with a caller-supplied clustering step.
pub fn mvmc_with<F>(
    graphs: &MultiViewGraphs,
    config: &MvmcConfig,
    seed: u64,
    mut cluster: F,
) -> Result<Partition>
where
    F: FnMut(&MultiViewGraphs, &[f64], &[f64], u64) -> Result<Vec<usize>>,
{
    if config.max_iter == 0 || !(config.tol > 0.0) {
        return Err(Error::Config("mvmc needs max_iter ≥ 1 and tol > 0".into()));
    }
    let m = graphs.m();
    let mut gammas = vec![config.start_gamma; m];
    let mut weights = vec![config.start_weight; m];
    let mut history: Vec<(Vec<usize>, f64, Vec<f64>, Vec<f64>)> = Vec::new();

    for iter in 0..config.max_iter {
        let labels = canonical_labels(&cluster(
            graphs,
            &gammas,
            &weights,
            derive_seed(seed, iter as u64),
        )?);
        let q = multiview_modularity(graphs, &labels, &gammas, &weights)?;
        let thetas = estimate_thetas(graphs, &labels)?;
        let next_gammas = update_resolution(&thetas);
        let next_weights = update_weights(&thetas).weights;

        if max_abs_diff(&next_gammas, &gammas) < config.tol
            && max_abs_diff(&next_weights, &weights) < config.tol
        {
            return Ok(Partition {
                nodes: graphs.nodes().to_vec(),
                labels,
                gammas,
                weights,
                modularity: q,
                converged: true,
                iterations: iter + 1,
            });
        }
        history.push((labels, q, gammas, weights));
        gammas = next_gammas;
        weights = next_weights;
    }

    // No convergence: the highest recorded modularity wins, earliest on ties.
    let best = history.iter().enumerate().fold(
        0,
        |best, (i, h)| if h.1 > history[best].1 { i } else { best },
    );
    let (labels, q, gammas, weights) = history.swap_remove(best);
    Ok(Partition {
        nodes: graphs.nodes().to_vec(),
        labels,
        gammas,
        weights,
        modularity: q,
        converged: false,
        iterations: config.max_iter,
    })
}
