//! Radius-ball graph learning.
//!
//! A view's count matrix becomes a monopartite graph over groups: every pair
//! within the view radius is joined, and the stored distance is mapped to a
//! similarity through a Gaussian kernel whose bandwidth is the standard
//! deviation of the graph's own positive edge distances.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CountMatrix, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Cosine,
}

impl std::str::FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "cosine" => Ok(Self::Cosine),
            other => Err(Error::Config(format!("unknown distance metric `{other}`"))),
        }
    }
}

/// Dense symmetric matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    // Rounding can push the cosine a hair past 1.
    (1.0 - dot / (na * nb)).max(0.0)
}

/// Pairwise distances between the rows of a real-valued matrix.
pub fn pairwise_distances_f64(rows: &[Vec<f64>], metric: DistanceMetric) -> Result<DistanceMatrix> {
    if rows.len() < 2 {
        return Err(Error::Contract("need ≥ 2 groups".into()));
    }
    let f = match metric {
        DistanceMetric::Euclidean => euclidean,
        DistanceMetric::Cosine => cosine,
    };
    Ok(DistanceMatrix::from_fn(rows.len(), |i, j| {
        f(&rows[i], &rows[j])
    }))
}

pub fn pairwise_distances(matrix: &CountMatrix, metric: DistanceMetric) -> Result<DistanceMatrix> {
    let rows: Vec<Vec<f64>> = matrix
        .rows()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect();
    pairwise_distances_f64(&rows, metric)
}

/// Number of neighbours used for the k-distance curve: ceil(sqrt(n)),
/// capped at n - 1.
pub fn neighbour_count(n: usize) -> usize {
    let mut k = (n as f64).sqrt().ceil() as usize;
    // Guard against sqrt rounding for perfect squares.
    while k > 1 && (k - 1) * (k - 1) >= n {
        k -= 1;
    }
    while k * k < n {
        k += 1;
    }
    k.clamp(1, n.saturating_sub(1).max(1))
}

/// Sorted k-distance curve: each node's distance to its k-th nearest other node.
pub fn k_distance_curve(distances: &DistanceMatrix) -> Vec<f64> {
    let n = distances.len();
    let k = neighbour_count(n);
    let mut curve: Vec<f64> = (0..n)
        .map(|i| {
            let mut others: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| distances.get(i, j))
                .collect();
            others.sort_by(f64::total_cmp);
            others[k - 1]
        })
        .collect();
    curve.sort_by(f64::total_cmp);
    curve
}

/// Index of the knee of an ascending curve: the point farthest from the
/// chord joining its endpoints. Ties resolve to the lowest index.
pub fn knee_index(curve: &[f64]) -> usize {
    let n = curve.len();
    if n < 3 {
        return 0;
    }
    let (first, last) = (curve[0], curve[n - 1]);
    if first == last {
        return 0;
    }
    // Perpendicular distance is proportional to the vertical gap to the chord.
    let slope = (last - first) / (n - 1) as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &s) in curve.iter().enumerate() {
        let gap = (first + slope * i as f64 - s).abs();
        if gap > best.1 {
            best = (i, gap);
        }
    }
    best.0
}

pub fn select_radius(distances: &DistanceMatrix) -> f64 {
    let curve = k_distance_curve(distances);
    curve[knee_index(&curve)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbgEdge {
    pub distance: f64,
    /// Set when the two rows are identical (distance exactly zero).
    pub duplicate: bool,
}

/// Distance-weighted radius-ball graph. Edges are stored once under
/// `(min, max)` and read symmetrically.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceGraph {
    pub nodes: Vec<String>,
    pub view: View,
    pub radius: f64,
    edges: BTreeMap<(usize, usize), RbgEdge>,
}

impl DistanceGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, i: usize, j: usize) -> Option<RbgEdge> {
        self.edges.get(&(i.min(j), i.max(j))).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, RbgEdge)> + '_ {
        self.edges.iter().map(|(&(i, j), &e)| (i, j, e))
    }
}

pub fn build_rbg(
    distances: &DistanceMatrix,
    radius: f64,
    nodes: Vec<String>,
    view: View,
) -> Result<DistanceGraph> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::Contract(format!("invalid radius {radius}")));
    }
    if nodes.len() != distances.len() {
        return Err(Error::Contract(
            "node list does not match distance matrix".into(),
        ));
    }
    let n = distances.len();
    let mut edges = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = distances.get(i, j);
            if d <= radius {
                edges.insert(
                    (i, j),
                    RbgEdge {
                        distance: d,
                        duplicate: d == 0.0,
                    },
                );
            }
        }
    }
    Ok(DistanceGraph {
        nodes,
        view,
        radius,
        edges,
    })
}

/// Similarity-weighted graph over groups for one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    pub nodes: Vec<String>,
    pub view: View,
    pub sigma: f64,
    pub radius: f64,
    /// Undirected edges `(i, j, weight)` with `i < j`, sorted.
    edges: Vec<(usize, usize, f64)>,
}

impl SimilarityGraph {
    /// Builds a graph from explicit weighted edges. Edges are canonicalised
    /// to `i < j`; self-loops and non-positive weights are rejected.
    pub fn from_edges(
        nodes: Vec<String>,
        view: View,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut map = BTreeMap::new();
        for (i, j, w) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::Contract(format!("invalid edge ({i}, {j})")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Contract(format!("invalid edge weight {w}")));
            }
            map.insert((i.min(j), i.max(j)), w);
        }
        Ok(Self {
            nodes,
            view,
            sigma: 0.0,
            radius: 0.0,
            edges: map.into_iter().map(|((i, j), w)| (i, j, w)).collect(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&key))
            .ok()
            .map(|idx| self.edges[idx].2)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes()];
        for &(i, j, _) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Writes `{stem}_edges.csv` and `{stem}_graph.json` into `dir`.
    pub fn dump(&self, dir: &Path, year: i32) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let stem = format!("{year}_{}", self.view);
        let edges_path = dir.join(format!("{stem}_edges.csv"));
        let mut w = csv::Writer::from_path(&edges_path)?;
        w.write_record(["src", "dst", "weight"])?;
        for &(i, j, wt) in &self.edges {
            w.write_record([
                self.nodes[i].as_str(),
                self.nodes[j].as_str(),
                &wt.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&edges_path, e))?;

        let sidecar = serde_json::json!({
            "radius": self.radius,
            "sigma": self.sigma,
            "n_nodes": self.n_nodes(),
            "n_edges": self.n_edges(),
            "view": self.view,
            "year": year,
        });
        let json_path = dir.join(format!("{stem}_graph.json"));
        let body = serde_json::to_string_pretty(&sidecar)?;
        std::fs::write(&json_path, body + "\n").map_err(|e| Error::io(&json_path, e))?;
        Ok(vec![edges_path, json_path])
    }
}

/// Population standard deviation.
pub(crate) fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Gaussian-kernel similarity. Duplicate pairs map to 1.0; when every
/// positive distance is equal the bandwidth is zero and those edges map to
/// exp(-1/2).
pub fn to_similarity(graph: &DistanceGraph) -> SimilarityGraph {
    let positive: Vec<f64> = graph
        .edges()
        .filter(|(_, _, e)| !e.duplicate)
        .map(|(_, _, e)| e.distance)
        .collect();
    let sigma = population_std(&positive);
    let edges = graph
        .edges()
        .map(|(i, j, e)| {
            let w = if e.duplicate {
                1.0
            } else if sigma == 0.0 {
                (-0.5f64).exp()
            } else {
                (-(e.distance * e.distance) / (2.0 * sigma * sigma))
                    .exp()
                    .max(f64::MIN_POSITIVE)
            };
            (i, j, w)
        })
        .collect();
    SimilarityGraph {
        nodes: graph.nodes.clone(),
        view: graph.view,
        sigma,
        radius: graph.radius,
        edges,
    }
}

/// Full graph-learning step for one view: distances, radius, RBG, kernel.
pub fn learn_view_graph(
    matrix: &CountMatrix,
    nodes: &[String],
    view: View,
    metric: DistanceMetric,
) -> Result<SimilarityGraph> {
    let distances = pairwise_distances(matrix, metric)?;
    let radius = select_radius(&distances);
    let rbg = build_rbg(&distances, radius, nodes.to_vec(), view)?;
    Ok(to_similarity(&rbg))
}
