//! Corpus BLEU and ROUGE-LCS over pre-split token lists.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("{candidates} candidates but {references} references")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("max_n must be at least 1")]
    BadOrder,
}

fn check<T>(c: &[T], r: &[T]) -> Result<(), MetricError> {
    if c.len() != r.len() {
        return Err(MetricError::LengthMismatch {
            candidates: c.len(),
            references: r.len(),
        });
    }
    if c.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(())
}

fn ngrams<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and candidate n-gram total for one pair.
pub fn clipped_matches<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> (usize, usize) {
    let cand = ngrams(candidate, n);
    let refs = ngrams(reference, n);
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScores {
    /// Brevity penalty times the geometric mean of the precisions, ×100.
    pub bleu_a: f64,
    /// `BP · p_n · 100` for n = 1..max_n.
    pub bleu_n: Vec<f64>,
    /// Corpus-level clipped precisions `p_n` as fractions.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
}

/// Corpus BLEU without smoothing; any zero precision gives `bleu_a = 0`.
pub fn bleu<T: Eq + Hash>(candidates: &[Vec<T>], references: &[Vec<T>], max_n: usize) -> Result<BleuScores, MetricError> {
    check(candidates, references)?;
    if max_n == 0 {
        return Err(MetricError::BadOrder);
    }
    let c: usize = candidates.iter().map(Vec::len).sum();
    let r: usize = references.iter().map(Vec::len).sum();
    let bp = if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    let precisions: Vec<f64> = (1..=max_n)
        .map(|n| {
            let (m, t) = candidates
                .iter()
                .zip(references)
                .map(|(a, b)| clipped_matches(a, b, n))
                .fold((0, 0), |(m, t), (a, b)| (m + a, t + b));
            if t == 0 {
                0.0
            } else {
                m as f64 / t as f64
            }
        })
        .collect();
    let bleu_a = if precisions.contains(&0.0) {
        0.0
    } else {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64;
        (bp * mean_log.exp() * 100.0).min(100.0)
    };
    Ok(BleuScores {
        bleu_a,
        bleu_n: precisions.iter().map(|p| bp * p * 100.0).collect(),
        precisions,
        brevity_penalty: bp,
    })
}

/// Longest common subsequence length, `O(|a|·|b|)` time and `O(|b|)` space.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS F1 of one pair as a fraction.
pub fn rouge_pair<T: PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    let l = lcs_length(candidate, reference) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / candidate.len() as f64;
    let r = l / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// Mean per-pair ROUGE-LCS F1, ×100.
pub fn rouge_lcs_f1<T: PartialEq>(candidates: &[Vec<T>], references: &[Vec<T>]) -> Result<f64, MetricError> {
    check(candidates, references)?;
    let mut f: Vec<f64> = candidates.iter().zip(references).map(|(c, r)| rouge_pair(c, r)).collect();
    // summing in sorted order makes the mean independent of example order
    f.sort_by(f64::total_cmp);
    Ok(100.0 * f.iter().sum::<f64>() / f.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub id: String,
    pub candidate: String,
    pub reference: String,
    pub bleu_a: f64,
    pub rouge_lcs_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu_a: f64,
    pub bleu_n: Vec<f64>,
    pub rouge_lcs_f1: f64,
    /// Masked next-token accuracy, when a model produced the candidates.
    pub accuracy: Option<f64>,
    pub per_example: Vec<ExampleScore>,
}

impl EvalReport {
    /// Scores `(id, candidate, reference)` triples; rows are ordered by id.
    pub fn from_pairs(mut rows: Vec<(String, Vec<String>, Vec<String>)>, accuracy: Option<f64>) -> Result<Self, MetricError> {
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        let cands: Vec<Vec<String>> = rows.iter().map(|r| r.1.clone()).collect();
        let refs: Vec<Vec<String>> = rows.iter().map(|r| r.2.clone()).collect();
        let corpus = bleu(&cands, &refs, 4)?;
        let rouge = rouge_lcs_f1(&cands, &refs)?;
        let per_example = rows
            .iter()
            .map(|(id, c, r)| ExampleScore {
                id: id.clone(),
                candidate: c.join(" "),
                reference: r.join(" "),
                bleu_a: bleu(std::slice::from_ref(c), std::slice::from_ref(r), 4).map(|b| b.bleu_a).unwrap_or(0.0),
                rouge_lcs_f1: 100.0 * rouge_pair(c, r),
            })
            .collect();
        Ok(Self {
            bleu_a: corpus.bleu_a,
            bleu_n: corpus.bleu_n,
            rouge_lcs_f1: rouge,
            accuracy,
            per_example,
        })
    }

    /// Aligned plain-text summary followed by one line per example.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>8} {:>8} {:>8} {:>8} {:>8} {:>12} {:>9}",
            "BLEU-A", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-LCS-F1", "accuracy"
        );
        let _ = write!(out, "{:>8.2}", self.bleu_a);
        for b in &self.bleu_n {
            let _ = write!(out, " {b:>8.2}");
        }
        let acc = self.accuracy.map_or("-".to_string(), |a| format!("{:.2}", 100.0 * a));
        let _ = writeln!(out, " {:>12.2} {acc:>9}", self.rouge_lcs_f1);
        if !self.per_example.is_empty() {
            let w = self.per_example.iter().map(|e| e.id.len()).max().unwrap_or(2).max(2);
            let _ = writeln!(out, "\n{:<w$}  {:>7}  {:>7}  candidate | reference", "id", "BLEU-A", "ROUGE");
            for e in &self.per_example {
                let _ = writeln!(
                    out,
                    "{:<w$}  {:>7.2}  {:>7.2}  {} | {}",
                    e.id, e.bleu_a, e.rouge_lcs_f1, e.candidate, e.reference
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(text: &str) -> Vec<&str> {
        text.split_whitespace().collect()
    }

    #[test]
    fn identity_and_disjoint() {
        let c = vec![s("returns the index of the item"), s("sets the value")];
        let b = bleu(&c, &c, 4).unwrap();
        assert!((b.bleu_a - 100.0).abs() < 1e-12);
        assert_eq!(rouge_lcs_f1(&c, &c).unwrap(), 100.0);
        let d = vec![s("alpha beta gamma delta"), s("x y z w")];
        let b = bleu(&c, &d, 4).unwrap();
        assert_eq!(b.bleu_a, 0.0);
        assert!(b.bleu_n.iter().all(|&v| v == 0.0));
        assert_eq!(rouge_lcs_f1(&c, &d).unwrap(), 0.0);
    }

    #[test]
    fn hand_counted_cat_example() {
        // 5 vs 6 tokens: p1 = 5/5, p2 = 3/4, p3 = 2/3, p4 = 1/2 since `on mat` never occurs in the reference
        let b = bleu(&[s("the cat sat on mat")], &[s("the cat sat on the mat")], 4).unwrap();
        assert_eq!(b.precisions, [1.0, 0.75, 2.0 / 3.0, 0.5]);
        let bp = (1.0f64 - 6.0 / 5.0).exp();
        let want = bp * (0.75f64 * (2.0 / 3.0) * 0.5).powf(0.25) * 100.0;
        assert!((b.bleu_a - want).abs() < 1e-9, "{} vs {want}", b.bleu_a);
        assert!((b.brevity_penalty - 0.8187307530779818).abs() < 1e-12);
    }

    #[test]
    fn clipping() {
        let (m, t) = clipped_matches(&s("the the the"), &s("the cat"), 1);
        assert_eq!((m, t), (1, 3));
    }

    #[test]
    fn hand_rouge() {
        let f = rouge_lcs_f1(&[s("a c d")], &[s("a b c d")]).unwrap();
        assert!((f - 85.71428571428571).abs() < 1e-9);
    }

    #[test]
    fn lcs_basics() {
        assert_eq!(lcs_length(&s("a b c"), &s("a b c")), 3);
        assert_eq!(lcs_length(&s("a b c"), &[]), 0);
        assert_eq!(lcs_length(&s("a b c b d a b"), &s("b d c a b a")), 4);
    }

    #[test]
    fn errors() {
        assert_eq!(
            bleu(&[s("a")], &[], 4).unwrap_err(),
            MetricError::LengthMismatch { candidates: 1, references: 0 }
        );
        assert_eq!(bleu::<&str>(&[], &[], 4).unwrap_err(), MetricError::EmptyCorpus);
        assert!(rouge_lcs_f1(&[s("a")], &[s("a"), s("b")]).is_err());
    }

    #[test]
    fn report_table_layout() {
        let rows = vec![
            ("b".to_string(), vec!["x".to_string()], vec!["x".to_string()]),
            ("a".to_string(), vec!["y".to_string()], vec!["y".to_string()]),
        ];
        let r = EvalReport::from_pairs(rows, Some(0.5)).unwrap();
        assert_eq!(r.per_example[0].id, "a");
        let t = r.to_table();
        assert!(t.lines().next().unwrap().contains("ROUGE-LCS-F1"));
        assert!(t.contains("50.00"));
    }

    proptest! {
        #[test]
        fn scores_in_range_and_symmetric_lcs(
            a in proptest::collection::vec(0u8..5, 0..10),
            b in proptest::collection::vec(0u8..5, 1..10),
        ) {
            prop_assert_eq!(lcs_length(&a, &b), lcs_length(&b, &a));
            let sc = bleu(std::slice::from_ref(&a), std::slice::from_ref(&b), 4).unwrap();
            prop_assert!((0.0..=100.0).contains(&sc.bleu_a));
            if sc.precisions.contains(&0.0) {
                prop_assert_eq!(sc.bleu_a, 0.0);
            }
            let f = rouge_lcs_f1(std::slice::from_ref(&a), std::slice::from_ref(&b)).unwrap();
            prop_assert!((0.0..=100.0).contains(&f));
            prop_assert_eq!(f == 100.0, a == b);
        }
    }
}
