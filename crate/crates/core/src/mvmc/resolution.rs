//! Edge propensities and the resolution / view-weight updates derived from them.

use serde::{Deserialize, Serialize};

use super::{canonical_labels, MultiViewGraphs};
use crate::error::{Error, Result};

/// Lower clamp on propensities so their logarithms stay finite.
pub const THETA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewThetas {
    pub theta_in: f64,
    pub theta_out: f64,
    /// The between-cluster estimate had no support (no edges, or the
    /// expected within-cluster weight already covers every edge).
    pub degenerate: bool,
}

impl ViewThetas {
    pub fn log_ratio(&self) -> f64 {
        self.theta_in.ln() - self.theta_out.ln()
    }
}

pub type ThetaEstimates = Vec<ViewThetas>;

/// Degree-corrected planted-partition propensities per view: observed
/// within-cluster weight over its configuration-model expectation, and
/// likewise for between-cluster weight.
pub fn estimate_thetas(graphs: &MultiViewGraphs, labels: &[usize]) -> Result<ThetaEstimates> {
    if labels.len() != graphs.n_nodes() {
        return Err(Error::Contract(format!(
            "{} labels for {} nodes",
            labels.len(),
            graphs.n_nodes()
        )));
    }
    let labels = canonical_labels(labels);
    let k = labels.iter().max().map_or(0, |&m| m + 1);

    Ok(graphs
        .views()
        .iter()
        .map(|g| {
            let mut total = 0.0;
            let mut within = 0.0;
            let mut kappa = vec![0.0; k];
            for &(i, j, w) in g.edges() {
                total += w;
                if labels[i] == labels[j] {
                    within += w;
                }
                kappa[labels[i]] += w;
                kappa[labels[j]] += w;
            }
            if total <= 0.0 {
                return ViewThetas {
                    theta_in: THETA_FLOOR,
                    theta_out: THETA_FLOOR,
                    degenerate: true,
                };
            }
            let expected_within: f64 = kappa.iter().map(|c| c * c).sum::<f64>() / (4.0 * total);
            let theta_in = (within / expected_within).max(THETA_FLOOR);
            let (theta_out, degenerate) = if expected_within >= total {
                (THETA_FLOOR, true)
            } else {
                (
                    ((total - within) / (total - expected_within)).max(THETA_FLOOR),
                    false,
                )
            };
            ViewThetas {
                theta_in,
                theta_out,
                degenerate,
            }
        })
        .collect())
}

/// γ = (θ_in − θ_out) / (ln θ_in − ln θ_out), with the θ_in limit when the
/// two coincide.
pub fn update_resolution(thetas: &[ViewThetas]) -> Vec<f64> {
    thetas
        .iter()
        .map(|t| {
            if (t.theta_in - t.theta_out).abs() < 1e-9 {
                t.theta_in
            } else {
                (t.theta_in - t.theta_out) / t.log_ratio()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightUpdate {
    pub weights: Vec<f64>,
    /// The mean log-ratio was not positive and all weights fell back to 1.
    pub reset: bool,
}

/// w_v = (ln θ_in^v − ln θ_out^v) / mean over views of the same quantity.
pub fn update_weights(thetas: &[ViewThetas]) -> WeightUpdate {
    let ratios: Vec<f64> = thetas.iter().map(ViewThetas::log_ratio).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    if !(mean > 0.0) {
        return WeightUpdate {
            weights: vec![1.0; ratios.len()],
            reset: true,
        };
    }
    WeightUpdate {
        weights: ratios.iter().map(|r| r / mean).collect(),
        reset: false,
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_graphs::*;
    use super::*;
    use rand::{Rng, SeedableRng};

    fn thetas(theta_in: f64, theta_out: f64) -> ViewThetas {
        ViewThetas {
            theta_in,
            theta_out,
            degenerate: false,
        }
    }

    #[test]
    fn two_triangles_component_partition() {
        let t = estimate_thetas(&two_triangles(), &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((t[0].theta_in - 2.0).abs() < 1e-12);
        assert_eq!(t[0].theta_out, THETA_FLOOR);
        assert!(!t[0].degenerate);
    }

    #[test]
    fn single_cluster_is_degenerate() {
        let t = estimate_thetas(&two_triangles(), &[0; 6]).unwrap();
        assert!(t[0].degenerate);
        assert_eq!(t[0].theta_out, THETA_FLOOR);
        assert!((t[0].theta_in - 1.0).abs() < 1e-12);
    }

    #[test]
    fn edgeless_view_is_neutral() {
        let t = estimate_thetas(&single(3, &[]), &[0, 1, 2]).unwrap();
        assert_eq!(t[0].theta_in, THETA_FLOOR);
        assert_eq!(t[0].theta_out, THETA_FLOOR);
    }

    #[test]
    fn random_labels_give_balanced_propensities() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let mut gap = 0.0;
        for _ in 0..20 {
            let edges: Vec<_> = (0..60)
                .flat_map(|i| (i + 1..60).map(move |j| (i, j)))
                .filter(|_| rng.random_bool(0.2))
                .map(|(i, j)| (i, j, 1.0))
                .collect();
            let g = single(60, &edges);
            let labels: Vec<usize> = (0..60).map(|_| rng.random_range(0..4)).collect();
            let t = estimate_thetas(&g, &labels).unwrap();
            gap += (t[0].theta_in - t[0].theta_out).abs();
        }
        assert!(gap / 20.0 < 0.15, "mean |θ_in − θ_out| = {}", gap / 20.0);
    }

    #[test]
    fn resolution_arithmetic() {
        assert_eq!(update_resolution(&[thetas(1.3, 1.3)]), vec![1.3]);
        let g = update_resolution(&[thetas(2.0, 0.5)])[0];
        assert!((g - 1.5 / 4f64.ln()).abs() < 1e-12);
        assert!((g - 1.08202).abs() < 1e-5);
        let g = update_resolution(&[thetas(2.0, THETA_FLOOR)])[0];
        assert!(g.is_finite());
        assert!((g - (2.0 - THETA_FLOOR) / (2.0 / THETA_FLOOR).ln()).abs() < 1e-12);
    }

    #[test]
    fn weights_arithmetic() {
        let same = update_weights(&[thetas(2.0, 0.5); 3]);
        assert_eq!(same.weights, vec![1.0; 3]);
        assert!(!same.reset);

        let e = std::f64::consts::E;
        let w = update_weights(&[thetas(e * e, 1.0), thetas(e, 1.0)]).weights;
        assert!((w[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-12);

        let reset = update_weights(&[thetas(0.5, 2.0), thetas(1.0, 1.0)]);
        assert!(reset.reset);
        assert_eq!(reset.weights, vec![1.0, 1.0]);
    }

    proptest::proptest! {
        #[test]
        fn weights_average_to_one(
            pairs in proptest::collection::vec((1e-3f64..10.0, 1e-3f64..10.0), 1..6)
        ) {
            let t: Vec<_> = pairs.iter().map(|&(a, b)| thetas(a, b)).collect();
            let u = update_weights(&t);
            if !u.reset {
                let mean = u.weights.iter().sum::<f64>() / u.weights.len() as f64;
                proptest::prop_assert!((mean - 1.0).abs() < 1e-9);
            }
        }
    }
}
