//! Rough / refined two-pass clustering of one year.
//!
//! The rough pass separates high-activity outliers; the largest rough
//! cluster is then re-learned and re-clustered on its own, and the two
//! assignments are merged.

use serde::{Deserialize, Serialize};

use super::{
    canonical_labels, derive_seed, multiview_modularity, mvmc, MultiViewGraphs, MvmcConfig,
    Partition,
};
use crate::error::{Error, Result};
use crate::graph::{learn_view_graph, DistanceMetric};
use crate::ingest::{View, YearSlice};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStepConfig {
    pub metric: DistanceMetric,
    pub mvmc: MvmcConfig,
    /// Smallest bulk cluster that gets a refined pass.
    pub refine_min: usize,
}

impl Default for TwoStepConfig {
    fn default() -> Self {
        Self {
            metric: DistanceMetric::Euclidean,
            mvmc: MvmcConfig::default(),
            refine_min: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepOutcome {
    /// Merged assignment over all of the year's groups.
    pub partition: Partition,
    pub rough: Partition,
    pub refined: Option<Partition>,
    /// Row indices (into the year slice) of the refined bulk.
    pub bulk: Vec<usize>,
}

/// Learns the tactic, target and weapon graphs of a slice.
pub fn view_graphs(slice: &YearSlice, metric: DistanceMetric) -> Result<MultiViewGraphs> {
    let graphs = View::ALL
        .iter()
        .map(|&v| learn_view_graph(slice.matrix(v), &slice.groups, v, metric))
        .collect::<Result<Vec<_>>>()?;
    MultiViewGraphs::new(graphs)
}

fn trivial(slice: &YearSlice) -> Partition {
    Partition {
        nodes: slice.groups.clone(),
        labels: vec![0; slice.n_groups()],
        gammas: vec![1.0; 3],
        weights: vec![1.0; 3],
        modularity: 0.0,
        converged: true,
        iterations: 0,
    }
}

pub fn two_step_cluster(
    slice: &YearSlice,
    config: &TwoStepConfig,
    seed: u64,
) -> Result<TwoStepOutcome> {
    two_step_with(slice, config, seed, |s, seed| {
        let graphs = view_graphs(s, config.metric)?;
        let p = mvmc(&graphs, &config.mvmc, seed)?;
        Ok((graphs, p))
    })
}

/// [`two_step_cluster`] with a caller-supplied learn-and-cluster pass.
pub fn two_step_with<F>(
    slice: &YearSlice,
    config: &TwoStepConfig,
    seed: u64,
    mut pass: F,
) -> Result<TwoStepOutcome>
where
    F: FnMut(&YearSlice, u64) -> Result<(MultiViewGraphs, Partition)>,
{
    match slice.n_groups() {
        0 => {
            return Err(Error::Contract(format!(
                "year {} has no active groups",
                slice.year
            )))
        }
        1 => {
            let p = trivial(slice);
            return Ok(TwoStepOutcome {
                partition: p.clone(),
                rough: p,
                refined: None,
                bulk: Vec::new(),
            });
        }
        _ => {}
    }

    let (graphs, rough) = pass(slice, derive_seed(seed, 0))?;
    let clusters = rough.clusters();
    // Largest cluster; the lowest label wins ties.
    let bulk = clusters.iter().enumerate().fold(0, |best, (c, members)| {
        if members.len() > clusters[best].len() {
            c
        } else {
            best
        }
    });
    let bulk_members = clusters[bulk].clone();

    if bulk_members.len() < config.refine_min.max(2) {
        return Ok(TwoStepOutcome {
            partition: rough.clone(),
            rough,
            refined: None,
            bulk: Vec::new(),
        });
    }

    let (_, refined) = pass(&slice.select_rows(&bulk_members), derive_seed(seed, 1))?;

    // Refined ids first, remaining rough clusters shifted past them.
    let offset = refined.n_clusters();
    let mut merged = vec![usize::MAX; slice.n_groups()];
    for (k, &row) in bulk_members.iter().enumerate() {
        merged[row] = refined.labels[k];
    }
    let mut others: Vec<usize> = rough.labels.clone();
    others.retain(|&c| c != bulk);
    others.sort_unstable();
    others.dedup();
    for (row, &c) in rough.labels.iter().enumerate() {
        if c != bulk {
            merged[row] = offset + others.binary_search(&c).expect("rough label present");
        }
    }
    let labels = canonical_labels(&merged);
    let modularity = multiview_modularity(&graphs, &labels, &rough.gammas, &rough.weights)?;

    Ok(TwoStepOutcome {
        partition: Partition {
            nodes: slice.groups.clone(),
            labels,
            gammas: rough.gammas.clone(),
            weights: rough.weights.clone(),
            modularity,
            converged: rough.converged && refined.converged,
            iterations: rough.iterations + refined.iterations,
        },
        rough,
        refined: Some(refined),
        bulk: bulk_members,
    })
}
