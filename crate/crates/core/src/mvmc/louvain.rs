//! Greedy multi-level Louvain on the view-weighted objective.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{canonical_labels, check_params, LevelGraph, MultiViewGraphs};
use crate::error::Result;

/// Minimum improvement for a move to count; keeps sweeps finite under rounding.
const MIN_GAIN: f64 = 1e-10;
const MAX_SWEEPS: usize = 10_000;
const MAX_KICK_ROUNDS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct LouvainOutcome {
    pub labels: Vec<usize>,
    /// Objective after initialisation, after every local-moving sweep of the
    /// first descent, and after every accepted perturbation.
    pub trace: Vec<f64>,
}

pub fn louvain_cluster(
    graphs: &MultiViewGraphs,
    gammas: &[f64],
    weights: &[f64],
    seed: u64,
) -> Result<Vec<usize>> {
    Ok(louvain_with_trace(graphs, gammas, weights, seed)?.labels)
}

pub fn louvain_with_trace(
    graphs: &MultiViewGraphs,
    gammas: &[f64],
    weights: &[f64],
    seed: u64,
) -> Result<LouvainOutcome> {
    check_params(graphs, gammas, weights)?;
    let base: Vec<LevelGraph> = graphs
        .views()
        .iter()
        .map(LevelGraph::from_similarity)
        .collect();
    Ok(louvain_levels(&base, gammas, weights, seed))
}

/// Louvain plus perturbation search on prepared level graphs sharing one
/// node set.
pub(crate) fn louvain_levels(
    base: &[LevelGraph],
    gammas: &[f64],
    weights: &[f64],
    seed: u64,
) -> LouvainOutcome {
    let n = base.first().map_or(0, LevelGraph::n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective = |comm: &[usize]| -> f64 {
        base.iter()
            .zip(gammas.iter().zip(weights))
            .map(|(g, (&gamma, &w))| w * g.modularity(comm, gamma))
            .sum()
    };

    let singletons: Vec<usize> = (0..n).collect();
    let mut trace = vec![objective(&singletons)];
    if n == 0 || base.iter().all(|g| g.two_m <= 0.0) {
        return LouvainOutcome {
            labels: singletons,
            trace,
        };
    }

    let mut best = descend(base, gammas, weights, singletons, &mut rng, |c| {
        trace.push(objective(c))
    });
    let mut best_q = *trace.last().expect("trace is non-empty");

    // Perturbation search: push a node into a neighbouring community, or
    // split it off alone or with a neighbour, descend again, and keep the
    // result only if it is better. This escapes optima where two nodes
    // have to move together.
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..MAX_KICK_ROUNDS {
        let mut improved = false;
        order.shuffle(&mut rng);
        for &i in &order {
            let mut targets: Vec<usize> = base
                .iter()
                .flat_map(|g| g.adj[i].iter().map(|&(j, _)| best[j]))
                .filter(|&c| c != best[i])
                .collect();
            targets.sort_unstable();
            targets.dedup();
            let mut kicks: Vec<Vec<(usize, usize)>> =
                targets.into_iter().map(|c| vec![(i, c)]).collect();
            if best.iter().filter(|&&c| c == best[i]).count() > 1 {
                kicks.push(vec![(i, n)]);
                // Split off together with a neighbour from the same community.
                let mut mates: Vec<usize> = base
                    .iter()
                    .flat_map(|g| g.adj[i].iter().map(|&(j, _)| j))
                    .filter(|&j| best[j] == best[i])
                    .collect();
                mates.sort_unstable();
                mates.dedup();
                kicks.extend(mates.into_iter().map(|j| vec![(i, n), (j, n)]));
            }
            for kick in kicks {
                let mut start = best.clone();
                for (node, c) in kick {
                    start[node] = c;
                }
                let labels = descend(base, gammas, weights, start, &mut rng, |_| {});
                let q = objective(&labels);
                if q > best_q + MIN_GAIN {
                    best = labels;
                    best_q = q;
                    trace.push(q);
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }

    LouvainOutcome {
        labels: canonical_labels(&best),
        trace,
    }
}

/// Multi-level descent from `start`: node-level moves, then repeated
/// aggregation with community-level moves, until nothing changes.
fn descend(
    base: &[LevelGraph],
    gammas: &[f64],
    weights: &[f64],
    start: Vec<usize>,
    rng: &mut ChaCha8Rng,
    mut on_sweep: impl FnMut(&[usize]),
) -> Vec<usize> {
    let mut membership = canonical_labels(&start);
    for _ in 0..MAX_SWEEPS {
        let mut comm = membership.clone();
        let mut moved = local_moving(base, gammas, weights, &mut comm, rng, |c| on_sweep(c));
        membership = canonical_labels(&comm);
        let mut n_comm = membership.iter().max().map_or(0, |&m| m + 1);
        let mut levels: Vec<LevelGraph> = base
            .iter()
            .map(|g| g.aggregate(&membership, n_comm))
            .collect();
        loop {
            let mut comm: Vec<usize> = (0..n_comm).collect();
            let merged = local_moving(&levels, gammas, weights, &mut comm, rng, |c| {
                let expanded: Vec<usize> = membership.iter().map(|&m| c[m]).collect();
                on_sweep(&expanded)
            });
            if !merged {
                break;
            }
            moved = true;
            let comm = canonical_labels(&comm);
            let next = comm.iter().max().map_or(0, |&m| m + 1);
            for m in membership.iter_mut() {
                *m = comm[*m];
            }
            if next == n_comm {
                break;
            }
            levels = levels.iter().map(|g| g.aggregate(&comm, next)).collect();
            n_comm = next;
        }
        if !moved {
            break;
        }
    }
    membership
}

/// Phase one: repeated seeded sweeps moving single nodes to the community
/// with the best positive gain. Returns whether any node moved.
fn local_moving(
    levels: &[LevelGraph],
    gammas: &[f64],
    weights: &[f64],
    comm: &mut [usize],
    rng: &mut ChaCha8Rng,
    mut on_sweep: impl FnMut(&[usize]),
) -> bool {
    let n = comm.len();
    let m = levels.len();
    let mut kappa: Vec<Vec<f64>> = vec![vec![0.0; n]; levels.len()];
    let mut size = vec![0usize; n];
    for (i, &c) in comm.iter().enumerate() {
        for (v, g) in levels.iter().enumerate() {
            kappa[v][c] += g.degree[i];
        }
        size[c] += 1;
    }
    // Per-community link weight from the current node, flattened [comm * m + view].
    let mut links = vec![0.0; n * m];
    let mut touched: Vec<usize> = Vec::new();
    let mut is_touched = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut moved_any = false;

    for _ in 0..MAX_SWEEPS {
        order.shuffle(rng);
        let mut moved = false;
        for &i in &order {
            let old = comm[i];
            for (v, g) in levels.iter().enumerate() {
                kappa[v][old] -= g.degree[i];
            }
            size[old] -= 1;

            for (v, g) in levels.iter().enumerate() {
                for &(j, w) in &g.adj[i] {
                    let c = comm[j];
                    if !is_touched[c] {
                        is_touched[c] = true;
                        touched.push(c);
                    }
                    links[c * m + v] += w;
                }
            }

            let gain = |c: usize, links: &[f64]| -> f64 {
                let mut total = 0.0;
                for (v, g) in levels.iter().enumerate() {
                    if g.two_m <= 0.0 {
                        continue;
                    }
                    let k_ic = links[c * m + v];
                    total +=
                        weights[v] * 2.0 * (k_ic - gammas[v] * g.degree[i] * kappa[v][c] / g.two_m);
                }
                total
            };

            let stay_gain = gain(old, &links);
            touched.sort_unstable();
            // Isolation is the zero-gain baseline; only strictly positive gains join.
            let mut best: Option<usize> = None;
            let mut best_gain = 0.0;
            for &c in &touched {
                let g = gain(c, &links);
                if g > best_gain {
                    best = Some(c);
                    best_gain = g;
                }
            }
            let target = match best {
                Some(c) => c,
                None if size[old] == 0 => old,
                None => (0..n)
                    .find(|&c| size[c] == 0)
                    .expect("an empty community exists"),
            };
            let new = if target != old && best_gain > stay_gain + MIN_GAIN {
                moved = true;
                target
            } else {
                old
            };

            comm[i] = new;
            for (v, g) in levels.iter().enumerate() {
                kappa[v][new] += g.degree[i];
            }
            size[new] += 1;
            for &c in &touched {
                links[c * m..(c + 1) * m].iter_mut().for_each(|x| *x = 0.0);
                is_touched[c] = false;
            }
            touched.clear();
        }
        on_sweep(comm);
        if !moved {
            break;
        }
        moved_any = true;
    }
    moved_any
}

#[cfg(test)]
mod tests {
    use super::super::multiview_modularity;
    use super::super::test_graphs::*;
    use super::*;
    use crate::stability::adjusted_rand_index;
    use rand::{Rng, SeedableRng};

    /// All set partitions of `n` items as restricted growth strings.
    fn all_partitions(n: usize) -> Vec<Vec<usize>> {
        fn rec(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
            if prefix.len() == n {
                out.push(prefix.clone());
                return;
            }
            for c in 0..=max + 1 {
                prefix.push(c);
                rec(prefix, max.max(c), n, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if n == 0 {
            return out;
        }
        let mut prefix = vec![0];
        rec(&mut prefix, 0, n, &mut out);
        out
    }

    #[test]
    fn enumerator_counts_bell_numbers() {
        assert_eq!(all_partitions(4).len(), 15);
        assert_eq!(all_partitions(6).len(), 203);
    }

    #[test]
    fn two_triangles_split_into_components() {
        let g = two_triangles();
        let labels = louvain_cluster(&g, &[1.0], &[1.0], 0).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1]);
        // Exhaustive search agrees that this is the maximiser.
        let best = all_partitions(6)
            .into_iter()
            .map(|p| multiview_modularity(&g, &p, &[1.0], &[1.0]).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let got = multiview_modularity(&g, &labels, &[1.0], &[1.0]).unwrap();
        assert!((got - best).abs() < 1e-12);
    }

    #[test]
    fn single_edge_merges() {
        let g = single(2, &[(0, 1, 1.0)]);
        assert_eq!(louvain_cluster(&g, &[1.0], &[1.0], 0).unwrap(), vec![0, 0]);
    }

    #[test]
    fn edgeless_views_leave_singletons() {
        let g = single(3, &[]);
        assert_eq!(
            louvain_cluster(&g, &[1.0], &[1.0], 0).unwrap(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn isolates_stay_alone() {
        let g = single(5, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let labels = louvain_cluster(&g, &[1.0], &[1.0], 4).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[1], labels[2]);
        assert_ne!(labels[3], labels[4]);
        assert_ne!(labels[3], labels[0]);
    }

    #[test]
    fn planted_three_blocks_across_seeds() {
        let (g, truth) = planted(3, 10, 3, 17);
        for seed in 0..10 {
            let labels = louvain_cluster(&g, &[1.0; 3], &[1.0; 3], seed).unwrap();
            assert_eq!(
                adjusted_rand_index(&labels, &truth).unwrap(),
                1.0,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn near_optimal_and_monotone_on_small_graphs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for case in 0..30 {
            let n = rng.random_range(3..=8);
            let edges = random_graph(n, 0.5, &mut rng);
            if edges.is_empty() {
                continue;
            }
            let g = single(n, &edges);
            let out = louvain_with_trace(&g, &[1.0], &[1.0], case).unwrap();
            for w in out.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "trace decreased: {:?}", out.trace);
            }
            let got = multiview_modularity(&g, &out.labels, &[1.0], &[1.0]).unwrap();
            let best = all_partitions(n)
                .into_iter()
                .map(|p| multiview_modularity(&g, &p, &[1.0], &[1.0]).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                got >= 0.95 * best - 1e-12,
                "case {case}: {got} vs optimum {best}"
            );
        }
    }

    #[test]
    fn multi_view_trace_is_monotone_with_unequal_parameters() {
        let (g, _) = planted(3, 6, 3, 8);
        let out = louvain_with_trace(&g, &[0.7, 1.3, 1.0], &[1.2, 0.5, 1.3], 3).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        let q = multiview_modularity(&g, &out.labels, &[0.7, 1.3, 1.0], &[1.2, 0.5, 1.3]).unwrap();
        assert!((q - out.trace.last().unwrap()).abs() < 1e-9);
    }
}
