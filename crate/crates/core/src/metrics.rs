//! Cluster purity entropy, augmentation accuracy and the evaluation
//! report tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::behavior::DetectionMatch;
use crate::clustering::{Backend, ClusterAssignment};
use crate::cvqvae::ModelParams;
use crate::error::{Error, Result};
use crate::types::{PseudoClassLabel, N_CLASSES};

/// Shannon entropy in bits of a count vector, with `0 log 0 = 0`.
pub fn entropy_bits(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .fold(0.0, |a, b| a + b)
}

/// Entropy in bits of a probability vector.
pub fn entropy_of_distribution(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).fold(0.0, |a, b| a + b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    /// `H_q` per cluster; `None` for empty clusters.
    pub per_cluster: Vec<Option<f64>>,
    /// Unweighted mean over non-empty clusters.
    pub h_avg: f64,
}

/// Purity entropy of each cluster from the empirical pseudo-class mix of
/// its members.
pub fn cluster_entropy(assignment: &ClusterAssignment, classes: &[PseudoClassLabel]) -> Result<EntropyReport> {
    if assignment.labels.is_empty() {
        return Err(Error::Input("cluster entropy of an empty assignment".into()));
    }
    if assignment.labels.len() != classes.len() {
        return Err(Error::Shape { expected: assignment.labels.len(), actual: classes.len() });
    }
    assignment.validate()?;
    let mut counts = vec![[0usize; N_CLASSES]; assignment.q];
    for (&l, c) in assignment.labels.iter().zip(classes) {
        counts[l][c.index()] += 1;
    }
    let per_cluster: Vec<Option<f64>> = counts
        .iter()
        .map(|c| (c.iter().sum::<usize>() > 0).then(|| entropy_bits(c)))
        .collect();
    let present: Vec<f64> = per_cluster.iter().flatten().copied().collect();
    Ok(EntropyReport {
        h_avg: present.iter().fold(0.0, |a, b| a + b) / present.len() as f64,
        per_cluster,
    })
}

/// Mean entropy of the pseudo-class head's prediction on each used code.
pub fn classifier_entropy(assignment: &ClusterAssignment, model: &ModelParams) -> Result<f64> {
    let sizes = assignment.sizes();
    let used: Vec<usize> = (0..assignment.q).filter(|&q| sizes[q] > 0).collect();
    if used.is_empty() {
        return Err(Error::Input("classifier entropy of an empty assignment".into()));
    }
    let mut sum = 0.0;
    for &q in &used {
        let code = model.weights.codebook.row(q).to_vec();
        sum += entropy_of_distribution(model.classify(&code)?.as_slice().expect("contiguous"));
    }
    Ok(sum / used.len() as f64)
}

/// Fraction of `(parent, child)` pairs with equal labels. `ids` names the
/// records of `assignment` in order.
pub fn augmentation_accuracy(
    ids: &[String],
    assignment: &ClusterAssignment,
    pairs: &[(String, String)],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Input("augmentation accuracy needs at least one pair".into()));
    }
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let label = |id: &str| {
        index
            .get(id)
            .map(|&i| assignment.labels[i])
            .ok_or_else(|| Error::Input(format!("record {id} is not in the assignment")))
    };
    let mut hits = 0;
    for (p, c) in pairs {
        if label(p)? == label(c)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub method: String,
    #[serde(flatten)]
    pub scores: DetectionMatch,
    /// Columns in which this row is best.
    pub best: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterScores {
    pub purity: f64,
    pub accuracy: f64,
    /// Classifier-based purity, codebook backend only.
    pub classifier_purity: Option<f64>,
    pub best: Vec<String>,
}

impl ClusterScores {
    pub fn new(purity: f64, accuracy: f64, classifier_purity: Option<f64>) -> Self {
        Self { purity, accuracy, classifier_purity, best: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringRow {
    pub backend: Backend,
    pub no_dk: Option<ClusterScores>,
    pub dk: Option<ClusterScores>,
}

/// One clustering run for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub backend: Backend,
    pub domain_knowledge: bool,
    pub scores: ClusterScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub detection: Vec<DetectionRow>,
    pub clustering: Vec<ClusteringRow>,
}

fn mark_best<T>(rows: &mut [T], column: &str, lower_is_better: bool, get: impl Fn(&T) -> Option<f64>, best: impl Fn(&mut T) -> Option<&mut Vec<String>>) {
    let values: Vec<Option<f64>> = rows.iter().map(&get).collect();
    let target = values
        .iter()
        .flatten()
        .copied()
        .reduce(if lower_is_better { f64::min } else { f64::max });
    let Some(target) = target else { return };
    for (row, v) in rows.iter_mut().zip(values) {
        if v == Some(target) {
            if let Some(b) = best(row) {
                b.push(column.to_string());
            }
        }
    }
}

/// Assembles both tables and marks the best value of every column.
pub fn report(detection: &[(String, DetectionMatch)], clustering: &[ClusteringResult]) -> Report {
    let mut det: Vec<DetectionRow> = detection
        .iter()
        .map(|(m, s)| DetectionRow { method: m.clone(), scores: *s, best: Vec::new() })
        .collect();
    mark_best(&mut det, "precision", false, |r| Some(r.scores.precision), |r| Some(&mut r.best));
    mark_best(&mut det, "recall", false, |r| Some(r.scores.recall), |r| Some(&mut r.best));

    let mut rows: Vec<ClusteringRow> = Vec::new();
    for backend in Backend::ALL {
        let pick = |dk: bool| {
            clustering
                .iter()
                .find(|c| c.backend == backend && c.domain_knowledge == dk)
                .map(|c| ClusterScores { best: Vec::new(), ..c.scores.clone() })
        };
        let (no_dk, dk) = (pick(false), pick(true));
        if no_dk.is_some() || dk.is_some() {
            rows.push(ClusteringRow { backend, no_dk, dk });
        }
    }
    type Side = fn(&mut ClusteringRow) -> Option<&mut ClusterScores>;
    let sides: [(Side, fn(&ClusteringRow) -> Option<&ClusterScores>); 2] = [
        (|r| r.no_dk.as_mut(), |r| r.no_dk.as_ref()),
        (|r| r.dk.as_mut(), |r| r.dk.as_ref()),
    ];
    for (side_mut, side) in sides {
        mark_best(&mut rows, "purity", true, |r| side(r).map(|s| s.purity), |r| side_mut(r).map(|s| &mut s.best));
        mark_best(&mut rows, "accuracy", false, |r| side(r).map(|s| s.accuracy), |r| side_mut(r).map(|s| &mut s.best));
    }
    Report { detection: det, clustering: rows }
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text tables; `*` marks the best value per column.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.detection.is_empty() {
            out.push_str("Evaluation of behavior-change detection. Best values are marked *.\n");
            let w = self.detection.iter().map(|r| r.method.chars().count()).max().unwrap_or(0).max(14);
            let _ = writeln!(out, "{:<w$} {:>12} {:>10} {:>6} {:>6} {:>6}", "Method", "Precision ↑", "Recall ↑", "TP", "FP", "FN");
            for r in &self.detection {
                let s = &r.scores;
                let _ = writeln!(
                    out,
                    "{:<w$} {:>12} {:>10} {:>6} {:>6} {:>6}",
                    r.method,
                    cell(s.precision, r.best.iter().any(|b| b == "precision")),
                    cell(s.recall, r.best.iter().any(|b| b == "recall")),
                    s.tp,
                    s.fp,
                    s.fn_
                );
            }
        }
        if !self.clustering.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("Clustering: cluster purity (↓) and augmentation cluster accuracy (↑). DK = domain knowledge. Best values are marked *.\n");
            let _ = writeln!(out, "{:<14} {:^33} {:^33}", "", "no DK", "DK");
            let _ = writeln!(
                out,
                "{:<14} {:>10} {:>10} {:>11} {:>10} {:>10} {:>11}",
                "Backend", "purity ↓", "accuracy ↑", "clf purity", "purity ↓", "accuracy ↑", "clf purity"
            );
            for r in &self.clustering {
                let mut line = format!("{:<14}", r.backend.name());
                for side in [&r.no_dk, &r.dk] {
                    match side {
                        Some(s) => {
                            let _ = write!(
                                line,
                                " {:>10} {:>10} {:>11}",
                                cell(s.purity, s.best.iter().any(|b| b == "purity")),
                                cell(s.accuracy, s.best.iter().any(|b| b == "accuracy")),
                                s.classifier_purity.map_or("-".to_string(), |v| format!("{v:.3}"))
                            );
                        }
                        None => {
                            let _ = write!(line, " {:>10} {:>10} {:>11}", "-", "-", "-");
                        }
                    }
                }
                out.push_str(line.trim_end());
                out.push('\n');
            }
        }
        out
    }
}

fn cell(v: f64, best: bool) -> String {
    if best {
        format!("{v:.3}*")
    } else {
        format!("{v:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classes(ix: &[usize]) -> Vec<PseudoClassLabel> {
        ix.iter().map(|&i| PseudoClassLabel::new(i).unwrap()).collect()
    }

    fn assignment(labels: Vec<usize>, q: usize) -> ClusterAssignment {
        ClusterAssignment { backend: Backend::Codebook, labels, q }
    }

    #[test]
    fn pure_clusters_have_zero_entropy() {
        let r = cluster_entropy(&assignment(vec![0, 0, 1, 1, 3], 4), &classes(&[2, 2, 7, 7, 0])).unwrap();
        assert_eq!(r.h_avg, 0.0);
        assert_eq!(r.per_cluster[2], None);
    }

    #[test]
    fn uniform_mix_reaches_the_maximum() {
        let r = cluster_entropy(&assignment(vec![0; 10], 1), &classes(&(0..10).collect::<Vec<_>>())).unwrap();
        assert!((r.h_avg - 10f64.log2()).abs() < 1e-12);
        assert!((r.h_avg - 3.322).abs() < 1e-3);
    }

    #[test]
    fn half_half_cluster_has_one_bit() {
        let r = cluster_entropy(&assignment(vec![0, 0, 1], 2), &classes(&[1, 4, 4])).unwrap();
        assert_eq!(r.per_cluster, vec![Some(1.0), Some(0.0)]);
        assert_eq!(r.h_avg, 0.5);
    }

    #[test]
    fn empty_assignment_is_an_input_error() {
        assert!(cluster_entropy(&assignment(vec![], 2), &[]).is_err());
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("r{i}")).collect()
    }

    #[test]
    fn accuracy_counts_matching_pairs() {
        let a = assignment(vec![0, 1, 2, 3, 0, 1, 3, 2, 4, 4, 5, 5, 6, 7, 6, 7], 8);
        let pairs: Vec<(String, String)> = (0..8).map(|k| (format!("r{}", 2 * k), format!("r{}", 2 * k + 1))).collect();
        assert_eq!(augmentation_accuracy(&ids(16), &a, &pairs).unwrap(), 0.25);
        let all = assignment(vec![0; 16], 1);
        assert_eq!(augmentation_accuracy(&ids(16), &all, &pairs).unwrap(), 1.0);
        let none = assignment((0..16).collect(), 16);
        assert_eq!(augmentation_accuracy(&ids(16), &none, &pairs).unwrap(), 0.0);
    }

    #[test]
    fn missing_record_is_an_input_error() {
        let a = assignment(vec![0, 0], 1);
        let pairs = vec![("r0".to_string(), "r9".to_string())];
        assert_eq!(augmentation_accuracy(&ids(2), &a, &pairs).unwrap_err().category(), "input");
    }

    fn table_one() -> Vec<(String, DetectionMatch)> {
        vec![
            ("Rule-based".into(), DetectionMatch::from_counts(109, 38, 10)),
            ("EMA".into(), DetectionMatch::from_counts(29, 119, 90)),
            ("CVQ-VAE".into(), DetectionMatch::from_counts(86, 199, 33)),
        ]
    }

    #[test]
    fn table_one_round_trips() {
        let r = report(&table_one(), &[]);
        let text = r.to_text();
        let line = text.lines().find(|l| l.starts_with("Rule-based")).unwrap();
        let cells: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cells, vec!["Rule-based", "0.741*", "0.916*", "109", "38", "10"]);
        let back: Report = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.clustering.is_empty());
        assert!(!text.contains("Clustering"));
    }

    #[test]
    fn no_dk_column_comes_first() {
        let runs = vec![
            ClusteringResult { backend: Backend::KMeans, domain_knowledge: true, scores: ClusterScores::new(1.127, 0.182, None) },
            ClusteringResult { backend: Backend::Codebook, domain_knowledge: true, scores: ClusterScores::new(1.243, 0.568, Some(0.9)) },
            ClusteringResult { backend: Backend::Codebook, domain_knowledge: false, scores: ClusterScores::new(3.014, 0.068, Some(3.2)) },
            ClusteringResult { backend: Backend::KMeans, domain_knowledge: false, scores: ClusterScores::new(3.014, 0.091, None) },
        ];
        let r = report(&[], &runs);
        assert_eq!(r.clustering[0].backend, Backend::Codebook);
        assert_eq!(r.clustering[0].dk.as_ref().unwrap().best, vec!["accuracy"]);
        assert_eq!(r.clustering[1].dk.as_ref().unwrap().best, vec!["purity"]);
        let text = r.to_text();
        let header = text.lines().nth(1).unwrap();
        assert!(header.find("no DK").unwrap() < header.rfind(" DK").unwrap());
        let row: Vec<&str> = text.lines().find(|l| l.starts_with("codebook")).unwrap().split_whitespace().collect();
        assert_eq!(row, vec!["codebook", "3.014*", "0.068", "3.200", "1.243", "0.568*", "0.900"]);
    }

    proptest! {
        #[test]
        fn entropy_is_bounded(labels in prop::collection::vec((0usize..4, 0usize..N_CLASSES), 1..80)) {
            let a = assignment(labels.iter().map(|p| p.0).collect(), 4);
            let c = classes(&labels.iter().map(|p| p.1).collect::<Vec<_>>());
            let r = cluster_entropy(&a, &c).unwrap();
            for h in r.per_cluster.iter().flatten() {
                prop_assert!(*h >= 0.0 && *h <= (N_CLASSES as f64).log2() + 1e-12);
            }
        }

        #[test]
        fn merging_never_drops_below_the_purer_part(
            a in prop::collection::vec(0usize..20, N_CLASSES),
            b in prop::collection::vec(0usize..20, N_CLASSES),
        ) {
            prop_assume!(a.iter().sum::<usize>() > 0 && b.iter().sum::<usize>() > 0);
            let merged: Vec<usize> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let floor = entropy_bits(&a).min(entropy_bits(&b));
            prop_assert!(entropy_bits(&merged) >= floor - 1e-12);
        }

        #[test]
        fn accuracy_ignores_label_names(labels in prop::collection::vec(0usize..5, 2..40), shift in 1usize..5) {
            let n = labels.len();
            let pairs: Vec<(String, String)> = (0..n / 2).map(|k| (format!("r{}", 2 * k), format!("r{}", 2 * k + 1))).collect();
            let a = assignment(labels.clone(), 5);
            let b = assignment(labels.iter().map(|l| (l + shift) % 5).collect(), 5);
            prop_assert_eq!(
                augmentation_accuracy(&ids(n), &a, &pairs).unwrap(),
                augmentation_accuracy(&ids(n), &b, &pairs).unwrap()
            );
        }
    }
}
