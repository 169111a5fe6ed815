use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, RawPair};

/// Fractions of projects assigned to train, validation and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.9,
            val: 0.05,
            test: 0.05,
        }
    }
}

/// Assigns whole projects to splits so no project spans two of them.
/// Every split receives at least one project.
pub fn split_by_project(
    pairs: &[RawPair],
    ratios: SplitRatios,
    seed: u64,
) -> Result<[Vec<RawPair>; 3], DataError> {
    let r = [ratios.train, ratios.val, ratios.test];
    if r.iter().any(|x| !x.is_finite() || *x < 0.0) || r.iter().sum::<f64>() <= 0.0 {
        return Err(DataError::Invalid(format!("bad split ratios {r:?}")));
    }
    let mut by_project: BTreeMap<&str, Vec<&RawPair>> = BTreeMap::new();
    for p in pairs {
        by_project.entry(p.project.as_str()).or_default().push(p);
    }
    let n = by_project.len();
    if n < 3 {
        return Err(DataError::TooFewProjects { found: n });
    }
    let mut projects: Vec<&str> = by_project.keys().copied().collect();
    projects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let total: f64 = r.iter().sum();
    let mut val = ((r[1] / total) * n as f64).round() as usize;
    let mut test = ((r[2] / total) * n as f64).round() as usize;
    val = val.clamp(1, n - 2);
    test = test.clamp(1, n - 1 - val);
    let train = n - val - test;

    let mut out: [Vec<RawPair>; 3] = Default::default();
    for (i, proj) in projects.iter().enumerate() {
        let slot = if i < train {
            0
        } else if i < train + val {
            1
        } else {
            2
        };
        out[slot].extend(by_project[proj].iter().map(|p| (*p).clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn corpus(projects: usize, per: usize) -> Vec<RawPair> {
        (0..projects * per)
            .map(|i| RawPair {
                id: i.to_string(),
                project: format!("p{}", i % projects),
                code: "void f() {}".into(),
                summary: "f".into(),
            })
            .collect()
    }

    fn projects(v: &[RawPair]) -> BTreeSet<String> {
        v.iter().map(|p| p.project.clone()).collect()
    }

    #[test]
    fn disjoint_and_complete() {
        let c = corpus(20, 4);
        let [a, b, t] = split_by_project(&c, SplitRatios::default(), 7).unwrap();
        assert_eq!(a.len() + b.len() + t.len(), c.len());
        assert!(!b.is_empty() && !t.is_empty());
        let (pa, pb, pt) = (projects(&a), projects(&b), projects(&t));
        assert!(pa.is_disjoint(&pb) && pa.is_disjoint(&pt) && pb.is_disjoint(&pt));
    }

    #[test]
    fn deterministic_per_seed() {
        let c = corpus(10, 3);
        let r = SplitRatios::default();
        assert_eq!(split_by_project(&c, r, 1).unwrap(), split_by_project(&c, r, 1).unwrap());
    }

    #[test]
    fn needs_three_projects() {
        assert!(matches!(
            split_by_project(&corpus(2, 5), SplitRatios::default(), 0),
            Err(DataError::TooFewProjects { found: 2 })
        ));
        let [a, b, t] = split_by_project(&corpus(3, 2), SplitRatios::default(), 0).unwrap();
        assert_eq!((a.len(), b.len(), t.len()), (2, 2, 2));
    }
}
