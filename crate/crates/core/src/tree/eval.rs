use std::fmt::Write as _;

use serde::Serialize;

use super::{predict_distribution, TreeModel};
use crate::error::{Error, Result};
use crate::kpi::{DiagnosisClass, KpiRecord, NUM_CLASSES};
use crate::scalar::Scalar;

/// Confusion matrix (rows actual, columns predicted, label order A, B, C,
/// Optimised) and the statistics derived from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    /// Mean over instances of the mean absolute difference between the
    /// predicted distribution and the one-hot actual class.
    #[serde(rename = "mae")]
    pub mean_absolute_error: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub precision: [f64; NUM_CLASSES],
    pub recall: [f64; NUM_CLASSES],
    pub n_correct: usize,
    pub n_incorrect: usize,
    pub classes: [&'static str; NUM_CLASSES],
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `Σ num_i / den_i` divided by `n`, summed as an exact fraction so that
/// results such as 5/6 round once. Falls back to floating point on overflow.
fn fraction_sum(terms: &[(usize, usize)], n: usize) -> f64 {
    let exact = || -> Option<f64> {
        let (mut num, mut den) = (0u128, 1u128);
        for &(a, b) in terms.iter().filter(|&&(_, b)| b != 0) {
            let (a, b) = (a as u128, b as u128);
            num = num.checked_mul(b)?.checked_add(a.checked_mul(den)?)?;
            den = den.checked_mul(b)?;
            let g = gcd(num, den).max(1);
            num /= g;
            den /= g;
        }
        den = den.checked_mul(n as u128)?;
        let g = gcd(num, den).max(1);
        Some((num / g) as f64 / (den / g) as f64)
    };
    exact().unwrap_or_else(|| {
        terms.iter().filter(|t| t.1 != 0).map(|&(a, b)| a as f64 / b as f64).sum::<f64>() / n as f64
    })
}

fn argmax(dist: &[f64; NUM_CLASSES]) -> usize {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best
}

/// Builds the report from actual labels and predicted distributions; the
/// predicted class is the distribution's argmax (ties to the earlier label).
pub fn report_from_distributions(actual: &[DiagnosisClass], predicted: &[[f64; NUM_CLASSES]]) -> Result<EvaluationReport> {
    if actual.is_empty() {
        return Err(Error::validation("cannot evaluate on an empty test set"));
    }
    if actual.len() != predicted.len() {
        return Err(Error::validation(format!(
            "{} actual labels but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    let mut confusion = [[0usize; NUM_CLASSES]; NUM_CLASSES];
    let mut abs_error = 0.0;
    for (&a, dist) in actual.iter().zip(predicted) {
        let row = a
            .label_index()
            .ok_or_else(|| Error::validation("test records must carry a trainable diagnosis"))?;
        confusion[row][argmax(dist)] += 1;
        let per_instance: f64 = dist
            .iter()
            .enumerate()
            .map(|(c, &p)| (p - if c == row { 1.0 } else { 0.0 }).abs())
            .sum();
        abs_error += per_instance / NUM_CLASSES as f64;
    }
    let n = actual.len();
    let n_correct: usize = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision: [f64; NUM_CLASSES] =
        std::array::from_fn(|c| ratio(confusion[c][c], (0..NUM_CLASSES).map(|r| confusion[r][c]).sum()));
    let recall: [f64; NUM_CLASSES] = std::array::from_fn(|c| ratio(confusion[c][c], confusion[c].iter().sum()));
    let support = |c: usize| confusion[c].iter().sum::<usize>();
    let predicted_count = |c: usize| (0..NUM_CLASSES).map(|r| confusion[r][c]).sum::<usize>();
    let precision_terms: Vec<(usize, usize)> =
        (0..NUM_CLASSES).map(|c| (support(c) * confusion[c][c], predicted_count(c))).collect();
    let recall_terms: Vec<(usize, usize)> = (0..NUM_CLASSES).map(|c| (confusion[c][c], 1)).collect();
    Ok(EvaluationReport {
        accuracy: n_correct as f64 / n as f64,
        mean_absolute_error: abs_error / n as f64,
        weighted_precision: fraction_sum(&precision_terms, n),
        weighted_recall: fraction_sum(&recall_terms, n),
        confusion,
        precision,
        recall,
        n_correct,
        n_incorrect: n - n_correct,
        classes: DiagnosisClass::LABELS.map(DiagnosisClass::as_str),
    })
}

pub fn evaluate<T: Scalar>(m: &TreeModel<T>, test: &[KpiRecord<T>]) -> Result<EvaluationReport> {
    let actual = test
        .iter()
        .map(|r| {
            r.diagnosis
                .ok_or_else(|| Error::validation(format!("test record {} is unlabeled", r.cell_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let predicted = test
        .iter()
        .map(|r| predict_distribution(m, r))
        .collect::<Result<Vec<_>>>()?;
    report_from_distributions(&actual, &predicted)
}

impl EvaluationReport {
    pub fn total(&self) -> usize {
        self.n_correct + self.n_incorrect
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let n = self.total();
        let _ = writeln!(out, "Correctly classified     {:>8}  {:>8.4} %", self.n_correct, 100.0 * self.accuracy);
        let _ = writeln!(
            out,
            "Incorrectly classified   {:>8}  {:>8.4} %",
            self.n_incorrect,
            100.0 * self.n_incorrect as f64 / n as f64
        );
        let _ = writeln!(out, "Mean absolute error      {:>8.6}", self.mean_absolute_error);
        let _ = writeln!(out, "Total instances          {n:>8}");
        out.push('\n');
        let _ = writeln!(out, "{:<14}{:>10}{:>10}", "Class", "Precision", "Recall");
        for (c, name) in self.classes.iter().enumerate() {
            let _ = writeln!(out, "{name:<14}{:>10.4}{:>10.4}", self.precision[c], self.recall[c]);
        }
        let _ = writeln!(
            out,
            "{:<14}{:>10.4}{:>10.4}",
            "Weighted avg", self.weighted_precision, self.weighted_recall
        );
        out.push_str("\nConfusion matrix (rows = actual, columns = predicted)\n");
        let _ = write!(out, "{:<14}", "");
        for name in &self.classes {
            let _ = write!(out, "{name:>11}");
        }
        out.push('\n');
        for (r, name) in self.classes.iter().enumerate() {
            let _ = write!(out, "{name:<14}");
            for c in 0..NUM_CLASSES {
                let _ = write!(out, "{:>11}", self.confusion[r][c]);
            }
            out.push('\n');
        }
        out
    }

    /// `metric,class,value` rows plus `confusion,<actual>|<predicted>,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,class,value\n");
        let _ = writeln!(out, "accuracy,,{}", self.accuracy);
        let _ = writeln!(out, "mae,,{}", self.mean_absolute_error);
        let _ = writeln!(out, "weighted_precision,,{}", self.weighted_precision);
        let _ = writeln!(out, "weighted_recall,,{}", self.weighted_recall);
        for (c, name) in self.classes.iter().enumerate() {
            let _ = writeln!(out, "precision,{name},{}", self.precision[c]);
            let _ = writeln!(out, "recall,{name},{}", self.recall[c]);
        }
        for (r, actual) in self.classes.iter().enumerate() {
            for (c, predicted) in self.classes.iter().enumerate() {
                let _ = writeln!(out, "confusion,{actual}|{predicted},{}", self.confusion[r][c]);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use DiagnosisClass::*;

    fn hard(c: DiagnosisClass) -> [f64; NUM_CLASSES] {
        let mut d = [0.0; NUM_CLASSES];
        d[c.label_index().unwrap()] = 1.0;
        d
    }

    #[test]
    fn hand_case() {
        let actual = [ClassA, ClassA, ClassB, ClassB];
        let predicted = [ClassA, ClassB, ClassB, ClassB].map(hard);
        let r = report_from_distributions(&actual, &predicted).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.precision[0], 1.0);
        assert_eq!(r.precision[1], 2.0 / 3.0);
        assert_eq!(r.weighted_precision, 5.0 / 6.0);
        assert_eq!(r.recall[0], 0.5);
        // one wrong instance contributes (1 + 1) / 4, averaged over 4
        assert_eq!(r.mean_absolute_error, 0.125);
        assert_eq!(r.confusion[0], [1, 1, 0, 0]);
    }

    #[test]
    fn perfect_predictions() {
        let actual = [ClassA, ClassC, Optimised];
        let r = report_from_distributions(&actual, &actual.map(hard)).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.mean_absolute_error, 0.0);
        assert_eq!(r.n_incorrect, 0);
    }

    #[test]
    fn recall_216_of_220() {
        let mut actual = vec![ClassB; 220];
        let mut predicted = vec![hard(ClassB); 216];
        predicted.extend(vec![hard(ClassA); 4]);
        actual.push(ClassA);
        predicted.push(hard(ClassA));
        let r = report_from_distributions(&actual, &predicted).unwrap();
        assert!((r.recall[1] - 216.0 / 220.0).abs() < 1e-12);
        assert!((r.recall[1] - 0.9818).abs() < 5e-5);
    }

    #[test]
    fn errors() {
        assert!(report_from_distributions(&[], &[]).is_err());
        assert!(report_from_distributions(&[Unclassified], &[hard(ClassA)]).is_err());
        assert!(report_from_distributions(&[ClassA], &[]).is_err());
    }

    #[test]
    fn renderings() {
        let r = report_from_distributions(&[ClassA, ClassB], &[hard(ClassA), hard(ClassA)]).unwrap();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["accuracy", "mae", "weighted_precision", "confusion"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(r.to_text().contains("Weighted avg"));
        assert!(r.to_csv().contains("confusion,Class B|Class A,1\n"));
    }
}
