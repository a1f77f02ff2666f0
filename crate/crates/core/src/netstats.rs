//! Descriptive statistics of the learned graphs and of the yearly clusterings.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::ingest::View;
use crate::mvmc::Partition;

/// Topology statistics of one graph with edge weights ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub density: f64,
    /// Mean local clustering coefficient; nodes of degree < 2 count as 0.
    pub clustering_coefficient: f64,
    pub n_components: usize,
    /// `None` when every edge endpoint has the same degree.
    pub degree_assortativity: Option<f64>,
    pub n_isolates: usize,
}

/// Statistics of an undirected simple graph given as `i < j` pairs.
pub fn topology_stats(n: usize, edges: &[(usize, usize)]) -> Result<GraphStats> {
    if n < 2 {
        return Err(Error::Contract("graph statistics need ≥ 2 nodes".into()));
    }
    let mut nbrs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(i, j) in edges {
        if i == j || i >= n || j >= n {
            return Err(Error::Contract(format!("invalid edge ({i}, {j})")));
        }
        nbrs[i].insert(j);
        nbrs[j].insert(i);
    }
    let degree: Vec<usize> = nbrs.iter().map(BTreeSet::len).collect();
    let n_edges = degree.iter().sum::<usize>() / 2;

    let density = 2.0 * n_edges as f64 / (n * (n - 1)) as f64;

    let clustering_coefficient = (0..n)
        .map(|i| {
            let k = degree[i];
            if k < 2 {
                return 0.0;
            }
            let members: Vec<usize> = nbrs[i].iter().copied().collect();
            let mut closed = 0usize;
            for (a, &u) in members.iter().enumerate() {
                for &v in &members[a + 1..] {
                    if nbrs[u].contains(&v) {
                        closed += 1;
                    }
                }
            }
            2.0 * closed as f64 / (k * (k - 1)) as f64
        })
        .sum::<f64>()
        / n as f64;

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, set) in nbrs.iter().enumerate() {
        for &j in set {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let n_components = (0..n).filter(|&i| find(&mut parent, i) == i).count();

    // Pearson correlation of endpoint degrees over both orientations of every edge.
    let mut xs = Vec::with_capacity(2 * n_edges);
    let mut ys = Vec::with_capacity(2 * n_edges);
    for (i, set) in nbrs.iter().enumerate() {
        for &j in set {
            xs.push(degree[i] as f64);
            ys.push(degree[j] as f64);
        }
    }
    let degree_assortativity = pearson(&xs, &ys);

    Ok(GraphStats {
        density,
        clustering_coefficient,
        n_components,
        degree_assortativity,
        n_isolates: degree.iter().filter(|&&d| d == 0).count(),
    })
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn graph_stats(graph: &SimilarityGraph) -> Result<GraphStats> {
    let edges: Vec<(usize, usize)> = graph.edges().iter().map(|&(i, j, _)| (i, j)).collect();
    topology_stats(graph.n_nodes(), &edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbgStatsRow {
    pub year: i32,
    pub view: View,
    pub stats: GraphStats,
}

pub fn write_rbg_stats(rows: &[RbgStatsRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "year",
        "view",
        "density",
        "clustering",
        "components",
        "assortativity",
        "isolates",
    ])?;
    for r in rows {
        w.write_record([
            r.year.to_string(),
            r.view.to_string(),
            r.stats.density.to_string(),
            r.stats.clustering_coefficient.to_string(),
            r.stats.n_components.to_string(),
            r.stats
                .degree_assortativity
                .map(|a| a.to_string())
                .unwrap_or_default(),
            r.stats.n_isolates.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub year: i32,
    pub n_clusters: usize,
    pub n_groups: usize,
    pub ratio: f64,
    /// Groups without an edge in any view; each is its own cluster.
    pub n_isolates: usize,
}

/// Clusters-to-groups ratio per year. `years` holds each year's consensus
/// partition and its number of isolated groups, in ascending year order.
pub fn cluster_trend(years: &[(i32, &Partition, usize)]) -> Result<Vec<TrendRow>> {
    if years.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Contract("years must be strictly ascending".into()));
    }
    years
        .iter()
        .map(|&(year, p, n_isolates)| {
            let n_groups = p.nodes.len();
            if n_groups == 0 {
                return Err(Error::Contract(format!("year {year} has no groups")));
            }
            let n_clusters = p.labels.iter().collect::<BTreeSet<_>>().len();
            Ok(TrendRow {
                year,
                n_clusters,
                n_groups,
                ratio: n_clusters as f64 / n_groups as f64,
                n_isolates,
            })
        })
        .collect()
}

pub fn write_cluster_trend(rows: &[TrendRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
