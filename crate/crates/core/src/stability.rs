//! Pair-counting agreement between clusterings of different years.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mvmc::Partition;

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

struct PairCounts {
    /// Pairs together in both.
    both: f64,
    /// Pairs together in `a`.
    in_a: f64,
    /// Pairs together in `b`.
    in_b: f64,
    total: f64,
}

fn pair_counts(a: &[usize], b: &[usize]) -> Result<PairCounts> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "labelings cover {} and {} nodes",
            a.len(),
            b.len()
        )));
    }
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    Ok(PairCounts {
        both: joint.values().map(|&n| choose2(n)).sum(),
        in_a: rows.values().map(|&n| choose2(n)).sum(),
        in_b: cols.values().map(|&n| choose2(n)).sum(),
        total: choose2(a.len() as u64),
    })
}

/// Adjusted Rand index of two labelings of the same nodes (aligned by index).
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = pair_counts(a, b)?;
    if c.total == 0.0 {
        return Err(Error::Contract("need at least 2 nodes".into()));
    }
    let expected = c.in_a * c.in_b / c.total;
    let max = (c.in_a + c.in_b) / 2.0;
    let denom = max - expected;
    if denom == 0.0 {
        // Both partitions trivial in the same way.
        return Ok(if c.both == c.in_a && c.both == c.in_b {
            1.0
        } else {
            0.0
        });
    }
    Ok((c.both - expected) / denom)
}

/// Fowlkes–Mallows score of two labelings of the same nodes.
pub fn fowlkes_mallows(a: &[usize], b: &[usize]) -> Result<f64> {
    let c = pair_counts(a, b)?;
    if c.total == 0.0 {
        return Err(Error::Contract("need at least 2 nodes".into()));
    }
    if c.in_a == 0.0 || c.in_b == 0.0 {
        return Ok(if c.in_a == 0.0 && c.in_b == 0.0 {
            1.0
        } else {
            0.0
        });
    }
    Ok(c.both / (c.in_a * c.in_b).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgreementMetric {
    Ari,
    Fms,
}

impl AgreementMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ari => "ari",
            Self::Fms => "fms",
        }
    }

    pub fn score(self, a: &[usize], b: &[usize]) -> Result<f64> {
        match self {
            Self::Ari => adjusted_rand_index(a, b),
            Self::Fms => fowlkes_mallows(a, b),
        }
    }
}

impl std::str::FromStr for AgreementMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ari" => Ok(Self::Ari),
            "fms" => Ok(Self::Fms),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// Scores two node → label maps on their common nodes. `None` when fewer
/// than two nodes are shared.
pub fn score_on_intersection(
    a: &BTreeMap<String, usize>,
    b: &BTreeMap<String, usize>,
    metric: AgreementMetric,
) -> Result<Option<f64>> {
    let (la, lb): (Vec<usize>, Vec<usize>) = a
        .iter()
        .filter_map(|(node, &x)| b.get(node).map(|&y| (x, y)))
        .unzip();
    if la.len() < 2 {
        return Ok(None);
    }
    metric.score(&la, &lb).map(Some)
}

/// Consensus partitions per year; each partition's nodes are that year's
/// active groups.
pub type YearClusterings = Vec<(i32, Partition)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMatrix {
    pub metric: AgreementMetric,
    pub years: Vec<i32>,
    /// `values[i][j]`; `None` when the two years share fewer than 2 groups.
    pub values: Vec<Vec<Option<f64>>>,
}

impl StabilityMatrix {
    pub fn get(&self, year_a: i32, year_b: i32) -> Option<f64> {
        let i = self.years.iter().position(|&y| y == year_a)?;
        let j = self.years.iter().position(|&y| y == year_b)?;
        self.values[i][j]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec![String::from("year")];
        header.extend(self.years.iter().map(i32::to_string));
        w.write_record(&header)?;
        for (year, row) in self.years.iter().zip(&self.values) {
            let mut rec = vec![year.to_string()];
            rec.extend(
                row.iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub fn stability_matrix(
    clusterings: &YearClusterings,
    metric: AgreementMetric,
) -> Result<StabilityMatrix> {
    let maps: Vec<BTreeMap<String, usize>> =
        clusterings.iter().map(|(_, p)| p.label_map()).collect();
    let n = clusterings.len();
    let mut values = vec![vec![None; n]; n];
    for i in 0..n {
        values[i][i] = Some(1.0);
        for j in (i + 1)..n {
            let v = score_on_intersection(&maps[i], &maps[j], metric)?;
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(StabilityMatrix {
        metric,
        years: clusterings.iter().map(|(y, _)| *y).collect(),
        values,
    })
}
