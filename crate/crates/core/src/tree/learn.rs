use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use super::{majority, ClassCounts, LearnParams, Pruning, TreeModel, TreeNode};
use crate::error::{Error, Result};
use crate::kpi::{Attribute, KpiRecord, NUM_ATTRIBUTES, NUM_CLASSES};
use crate::scalar::Scalar;

/// Gains this small are treated as zero.
const GAIN_EPSILON: f64 = 1e-12;

fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

struct Sample<T> {
    values: [T; NUM_ATTRIBUTES],
    label: usize,
}

#[derive(Debug, Clone, Copy)]
struct Candidate<T> {
    attribute: usize,
    threshold: T,
    gain: f64,
    gain_ratio: f64,
}

fn count(samples: &[Sample<impl Scalar>], idx: &[usize]) -> ClassCounts {
    let mut c = [0; NUM_CLASSES];
    for &i in idx {
        c[samples[i].label] += 1;
    }
    c
}

/// Best binary split on one attribute by information gain. Thresholds are
/// midpoints between consecutive distinct values, skipping boundaries where
/// both neighbouring value groups are pure in the same class.
fn best_split_on<T: Scalar>(
    samples: &[Sample<T>],
    idx: &[usize],
    attribute: usize,
    node_counts: &ClassCounts,
    node_entropy: f64,
    min_leaf: usize,
) -> Option<Candidate<T>> {
    let mut order: Vec<usize> = idx.to_vec();
    order.sort_by(|&a, &b| {
        samples[a].values[attribute]
            .partial_cmp(&samples[b].values[attribute])
            .expect("finite features")
            .then(a.cmp(&b))
    });

    // Distinct-value groups with their class counts.
    let mut groups: Vec<(T, ClassCounts)> = Vec::new();
    for &i in &order {
        let v = samples[i].values[attribute];
        match groups.last_mut() {
            Some((gv, c)) if *gv == v => c[samples[i].label] += 1,
            _ => {
                let mut c = [0; NUM_CLASSES];
                c[samples[i].label] = 1;
                groups.push((v, c));
            }
        }
    }
    if groups.len() < 2 {
        return None;
    }
    let pure_class = |c: &ClassCounts| {
        let mut nonzero = c.iter().enumerate().filter(|(_, &x)| x > 0);
        match (nonzero.next(), nonzero.next()) {
            (Some((k, _)), None) => Some(k),
            _ => None,
        }
    };

    let n = idx.len();
    let mut left = [0usize; NUM_CLASSES];
    let mut n_left = 0usize;
    let mut best: Option<(f64, usize, usize)> = None; // (gain, group index, n_left)
    for g in 0..groups.len() - 1 {
        for (l, c) in left.iter_mut().zip(groups[g].1) {
            *l += c;
        }
        n_left += groups[g].1.iter().sum::<usize>();
        let n_right = n - n_left;
        if n_left < min_leaf || n_right < min_leaf {
            continue;
        }
        if let (Some(a), Some(b)) = (pure_class(&groups[g].1), pure_class(&groups[g + 1].1)) {
            if a == b {
                continue;
            }
        }
        let mut right = *node_counts;
        for (r, l) in right.iter_mut().zip(left) {
            *r -= l;
        }
        let gain = node_entropy
            - (n_left as f64 / n as f64) * entropy(&left)
            - (n_right as f64 / n as f64) * entropy(&right);
        if best.is_none_or(|(b, _, _)| gain > b) {
            best = Some((gain, g, n_left));
        }
    }

    let (gain, g, n_left) = best?;
    if gain <= GAIN_EPSILON {
        return None;
    }
    let (lo, hi) = (groups[g].0, groups[g + 1].0);
    let mut threshold = (lo + hi) / T::lit(2.0);
    if threshold >= hi || threshold < lo {
        threshold = lo;
    }
    let split_info = entropy(&[n_left, n - n_left]);
    Some(Candidate {
        attribute,
        threshold,
        gain,
        gain_ratio: gain / split_info,
    })
}

/// Per-attribute best splits, filtered to those with at least average gain,
/// then the highest gain ratio; ties keep the lower attribute index.
fn choose_split<T: Scalar>(samples: &[Sample<T>], idx: &[usize], counts: &ClassCounts, min_leaf: usize) -> Option<Candidate<T>> {
    let h = entropy(counts);
    let candidates: Vec<Candidate<T>> = (0..NUM_ATTRIBUTES)
        .filter_map(|a| best_split_on(samples, idx, a, counts, h, min_leaf))
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let mean_gain = candidates.iter().map(|c| c.gain).sum::<f64>() / candidates.len() as f64;
    let mut best: Option<Candidate<T>> = None;
    for c in candidates.into_iter().filter(|c| c.gain >= mean_gain - GAIN_EPSILON) {
        if best.is_none_or(|b| c.gain_ratio > b.gain_ratio) {
            best = Some(c);
        }
    }
    best
}

fn grow<T: Scalar>(samples: &[Sample<T>], idx: Vec<usize>, params: &LearnParams) -> TreeNode<T> {
    let counts = count(samples, &idx);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || idx.len() < 2 * params.min_leaf_instances {
        return TreeNode::leaf(counts, params.laplace);
    }
    let Some(split) = choose_split(samples, &idx, &counts, params.min_leaf_instances) else {
        return TreeNode::leaf(counts, params.laplace);
    };
    let (left, right): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| samples[i].values[split.attribute] <= split.threshold);
    TreeNode::Internal {
        attribute: Attribute::ALL[split.attribute],
        split_threshold: split.threshold,
        left: Box::new(grow(samples, left, params)),
        right: Box::new(grow(samples, right, params)),
        class_counts: counts,
    }
}

/// Extra errors added to `errors` observed among `n` training cases to get
/// the upper confidence bound used by pessimistic pruning.
pub fn pessimistic_extra_errors(n: f64, errors: f64, confidence: f64) -> f64 {
    if confidence > 0.5 {
        return 0.0;
    }
    if errors < 1.0 {
        let base = n * (1.0 - confidence.powf(1.0 / n));
        if errors == 0.0 {
            return base;
        }
        return base + errors * (pessimistic_extra_errors(n, 1.0, confidence) - base);
    }
    if errors + 0.5 >= n {
        return (n - errors).max(0.0);
    }
    let z = Normal::standard().inverse_cdf(1.0 - confidence);
    let f = (errors + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt()) / (1.0 + z * z / n);
    r * n - errors
}

fn node_errors(counts: &ClassCounts) -> f64 {
    let total: usize = counts.iter().sum();
    (total - counts[majority(counts)]) as f64
}

fn estimated_errors(counts: &ClassCounts, confidence: f64) -> f64 {
    let n: usize = counts.iter().sum();
    let e = node_errors(counts);
    e + pessimistic_extra_errors(n as f64, e, confidence)
}

/// Bottom-up subtree replacement; returns the estimated errors of the result.
fn prune_pessimistic<T: Scalar>(node: &mut TreeNode<T>, confidence: f64, laplace: bool) -> f64 {
    let TreeNode::Internal {
        left, right, class_counts, ..
    } = node
    else {
        return estimated_errors(node.class_counts(), confidence);
    };
    let subtree = prune_pessimistic(left, confidence, laplace) + prune_pessimistic(right, confidence, laplace);
    let as_leaf = estimated_errors(class_counts, confidence);
    if as_leaf <= subtree + 0.1 {
        *node = TreeNode::leaf(*class_counts, laplace);
        as_leaf
    } else {
        subtree
    }
}

/// Bottom-up replacement by the node's majority leaf whenever that does not
/// increase errors on the held-out samples; returns those errors.
fn prune_reduced_error<T: Scalar>(node: &mut TreeNode<T>, samples: &[Sample<T>], holdout: &[usize], laplace: bool) -> usize {
    match node {
        TreeNode::Leaf { class, .. } => {
            let k = class.label_index().expect("leaves carry labels");
            holdout.iter().filter(|&&i| samples[i].label != k).count()
        }
        TreeNode::Internal {
            attribute,
            split_threshold,
            left,
            right,
            class_counts,
        } => {
            let (hl, hr): (Vec<usize>, Vec<usize>) = holdout
                .iter()
                .partition(|&&i| samples[i].values[attribute.index()] <= *split_threshold);
            let subtree = prune_reduced_error(left, samples, &hl, laplace) + prune_reduced_error(right, samples, &hr, laplace);
            let k = majority(class_counts);
            let as_leaf = holdout.iter().filter(|&&i| samples[i].label != k).count();
            if as_leaf <= subtree {
                *node = TreeNode::leaf(*class_counts, laplace);
                as_leaf
            } else {
                subtree
            }
        }
    }
}

/// Top-down induction with gain-ratio binary splits, then the configured
/// pruning. Every record must carry a trainable diagnosis.
pub fn train<T: Scalar>(data: &[KpiRecord<T>], params: &LearnParams) -> Result<TreeModel<T>> {
    params.validate()?;
    if data.len() < 2 {
        return Err(Error::validation(format!("need at least 2 training records, got {}", data.len())));
    }
    let samples = data
        .iter()
        .map(|r| {
            let label = r
                .diagnosis
                .and_then(|d| d.label_index())
                .ok_or_else(|| Error::validation(format!("record {} has no trainable diagnosis", r.cell_id)))?;
            let values = r.values();
            if let Some(a) = Attribute::ALL.iter().find(|a| !values[a.index()].is_finite()) {
                return Err(Error::validation(format!("record {}: attribute {a} is not finite", r.cell_id)));
            }
            Ok(Sample { values, label })
        })
        .collect::<Result<Vec<_>>>()?;

    let all: Vec<usize> = (0..samples.len()).collect();
    let root = match params.pruning {
        Pruning::None => grow(&samples, all, params),
        Pruning::Pessimistic { confidence } => {
            let mut root = grow(&samples, all, params);
            prune_pessimistic(&mut root, confidence, params.laplace);
            root
        }
        Pruning::ReducedError { holdout_fraction, seed } => {
            let mut order = all;
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let n_hold = ((holdout_fraction * samples.len() as f64).round() as usize).clamp(1, samples.len() - 1);
            let (holdout, grow_set) = order.split_at(n_hold);
            let mut grow_set = grow_set.to_vec();
            grow_set.sort_unstable();
            let mut root = grow(&samples, grow_set, params);
            prune_reduced_error(&mut root, &samples, holdout, params.laplace);
            root
        }
    };
    Ok(TreeModel {
        root,
        training_params: *params,
        attribute_schema: Attribute::ALL.to_vec(),
    })
}
