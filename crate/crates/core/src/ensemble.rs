//! Repeated seeded clustering of one year and bipartite consensus over the runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::YearSlice;
use crate::mvmc::{
    canonical_labels, louvain_levels, two_step_cluster, LevelGraph, Partition, TwoStepConfig,
};
use crate::stability::adjusted_rand_index;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEnsemble {
    pub nodes: Vec<String>,
    pub runs: Vec<Partition>,
    pub run_seeds: Vec<u64>,
}

impl ClusterEnsemble {
    pub fn new(runs: Vec<Partition>, run_seeds: Vec<u64>) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| Error::Contract("an ensemble needs at least one run".into()))?;
        if runs
            .iter()
            .any(|r| r.nodes != first.nodes || r.labels.len() != first.nodes.len())
        {
            return Err(Error::Contract(
                "ensemble runs disagree on the node set".into(),
            ));
        }
        if run_seeds.len() != runs.len() {
            return Err(Error::Contract(format!(
                "{} seeds for {} runs",
                run_seeds.len(),
                runs.len()
            )));
        }
        Ok(Self {
            nodes: first.nodes.clone(),
            runs,
            run_seeds,
        })
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Mean pairwise ARI among the runs; `None` with fewer than two runs or
    /// fewer than two nodes.
    pub fn agreement(&self) -> Result<Option<f64>> {
        if self.runs.len() < 2 || self.nodes.len() < 2 {
            return Ok(None);
        }
        let mut total = 0.0;
        let mut pairs = 0usize;
        for (a, ra) in self.runs.iter().enumerate() {
            for rb in &self.runs[a + 1..] {
                total += adjusted_rand_index(&ra.labels, &rb.labels)?;
                pairs += 1;
            }
        }
        Ok(Some(total / pairs as f64))
    }
}

/// Runs the two-step clustering with seeds `base_seed .. base_seed + runs`
/// in parallel on the current rayon pool.
pub fn run_ensemble(
    slice: &YearSlice,
    config: &TwoStepConfig,
    runs: usize,
    base_seed: u64,
) -> Result<ClusterEnsemble> {
    if runs == 0 {
        return Err(Error::Config("ensemble runs must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..runs as u64)
        .map(|r| base_seed.wrapping_add(r))
        .collect();
    let partitions = seeds
        .par_iter()
        .map(|&seed| two_step_cluster(slice, config, seed).map(|o| o.partition))
        .collect::<Result<Vec<_>>>()?;
    ClusterEnsemble::new(partitions, seeds)
}

/// Consensus by clustering the bipartite graph of groups and run-level
/// cluster labels.
///
/// Each cluster of each run becomes a label node joined to its members by
/// unit edges, and single-view Louvain at `γ = 1` partitions the whole
/// graph; a group's consensus cluster is its community. Label nodes are
/// ordered by their member sets, so the result does not depend on run order
/// or on how any run numbers its clusters.
pub fn bgpa_consensus(ensemble: &ClusterEnsemble, seed: u64) -> Result<Partition> {
    let n = ensemble.nodes.len();
    if ensemble.is_empty() {
        return Err(Error::Contract("an ensemble needs at least one run".into()));
    }
    let mut label_nodes: Vec<Vec<usize>> = ensemble
        .runs
        .iter()
        .flat_map(Partition::clusters)
        .filter(|members| !members.is_empty())
        .collect();
    label_nodes.sort();

    let edges: Vec<(usize, usize, f64)> = label_nodes
        .iter()
        .enumerate()
        .flat_map(|(k, members)| members.iter().map(move |&g| (g, n + k, 1.0)))
        .collect();
    let graph = LevelGraph::from_edges(n + label_nodes.len(), &edges);
    let outcome = louvain_levels(std::slice::from_ref(&graph), &[1.0], &[1.0], seed);
    let modularity = graph.modularity(&outcome.labels, 1.0);

    Ok(Partition {
        nodes: ensemble.nodes.clone(),
        labels: canonical_labels(&outcome.labels[..n]),
        gammas: vec![1.0],
        weights: vec![1.0],
        modularity,
        converged: ensemble.runs.iter().all(|r| r.converged),
        iterations: ensemble
            .runs
            .iter()
            .map(|r| r.iterations)
            .max()
            .unwrap_or(0),
    })
}
