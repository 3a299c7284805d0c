//! C4.5-style decision trees over the KPI attributes.
//!
//! Binary splits on numeric attributes (`value <= threshold` goes left),
//! leaves carry their training class counts. See [`train`] for induction and
//! pruning, [`evaluate`] for the accuracy / MAE / precision report.

mod eval;
mod learn;

use std::fmt::Write as _;

pub use eval::{evaluate, report_from_distributions, EvaluationReport};
pub use learn::{pessimistic_extra_errors, train};

use crate::error::{Error, Result};
use crate::kpi::{Attribute, DiagnosisClass, KpiRecord, NUM_CLASSES};
use crate::rules::{Comparator, DiagnosticRule, RuleAtom, RuleSet};
use crate::scalar::Scalar;

/// Training counts per label, in [`DiagnosisClass::LABELS`] order.
pub type ClassCounts = [usize; NUM_CLASSES];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pruning {
    None,
    /// Subtree replacement driven by the upper confidence bound on the
    /// training error rate.
    Pessimistic { confidence: f64 },
    /// Grow on part of the training data, prune against the held-out rest.
    ReducedError { holdout_fraction: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnParams {
    pub min_leaf_instances: usize,
    pub pruning: Pruning,
    pub seed: u64,
    /// Laplace-smooth leaf distributions.
    pub laplace: bool,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            min_leaf_instances: 2,
            pruning: Pruning::Pessimistic { confidence: 0.25 },
            seed: 0,
            laplace: false,
        }
    }
}

impl LearnParams {
    pub fn unpruned() -> Self {
        LearnParams {
            pruning: Pruning::None,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_leaf_instances == 0 {
            return Err(Error::validation("min_leaf_instances must be at least 1"));
        }
        match self.pruning {
            Pruning::Pessimistic { confidence } if !(confidence > 0.0 && confidence < 1.0) => {
                Err(Error::validation(format!("pruning confidence must lie in (0, 1), got {confidence}")))
            }
            Pruning::ReducedError { holdout_fraction, .. } if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) => {
                Err(Error::validation(format!(
                    "holdout fraction must lie in (0, 1), got {holdout_fraction}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode<T = f64> {
    Internal {
        attribute: Attribute,
        split_threshold: T,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
        /// Training counts that reached this node; used when pruning.
        class_counts: ClassCounts,
    },
    Leaf {
        class: DiagnosisClass,
        class_counts: ClassCounts,
        probability_distribution: [f64; NUM_CLASSES],
    },
}

/// Index of the largest count; ties go to the earlier label.
pub(crate) fn majority(counts: &ClassCounts) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl<T: Scalar> TreeNode<T> {
    pub fn leaf(class_counts: ClassCounts, laplace: bool) -> Self {
        let total: usize = class_counts.iter().sum();
        let probability_distribution = if laplace {
            class_counts.map(|c| (c as f64 + 1.0) / (total + NUM_CLASSES) as f64)
        } else if total == 0 {
            [1.0 / NUM_CLASSES as f64; NUM_CLASSES]
        } else {
            class_counts.map(|c| c as f64 / total as f64)
        };
        TreeNode::Leaf {
            class: DiagnosisClass::from_label_index(majority(&class_counts)),
            class_counts,
            probability_distribution,
        }
    }

    pub fn class_counts(&self) -> &ClassCounts {
        match self {
            TreeNode::Internal { class_counts, .. } | TreeNode::Leaf { class_counts, .. } => class_counts,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn route(&self, r: &KpiRecord<T>) -> Result<&TreeNode<T>> {
        let mut node = self;
        while let TreeNode::Internal {
            attribute,
            split_threshold,
            left,
            right,
            ..
        } = node
        {
            let v = r.get(*attribute);
            if !v.is_finite() {
                return Err(Error::Predict(format!(
                    "cell {}: attribute {attribute} is not finite",
                    r.cell_id
                )));
            }
            node = if v <= *split_threshold { left } else { right };
        }
        Ok(node)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel<T = f64> {
    pub root: TreeNode<T>,
    pub training_params: LearnParams,
    pub attribute_schema: Vec<Attribute>,
}

pub fn predict<T: Scalar>(m: &TreeModel<T>, r: &KpiRecord<T>) -> Result<DiagnosisClass> {
    match m.root.route(r)? {
        TreeNode::Leaf { class, .. } => Ok(*class),
        TreeNode::Internal { .. } => unreachable!("route stops at leaves"),
    }
}

pub fn predict_distribution<T: Scalar>(m: &TreeModel<T>, r: &KpiRecord<T>) -> Result<[f64; NUM_CLASSES]> {
    match m.root.route(r)? {
        TreeNode::Leaf {
            probability_distribution, ..
        } => Ok(*probability_distribution),
        TreeNode::Internal { .. } => unreachable!("route stops at leaves"),
    }
}

/// One rule per leaf, left to right; guards are the root-to-leaf split
/// conditions. A single-leaf tree yields one rule guarded by the tautology
/// `<first attribute> >= 0` over the non-negative KPI domain.
pub fn export_rules<T: Scalar>(m: &TreeModel<T>) -> RuleSet<T> {
    fn walk<T: Scalar>(node: &TreeNode<T>, path: &mut Vec<RuleAtom<T>>, out: &mut Vec<DiagnosticRule<T>>) {
        match node {
            TreeNode::Leaf { class, .. } => {
                let id = format!("L{}", out.len() + 1);
                out.push(DiagnosticRule::new(id, path.clone(), *class));
            }
            TreeNode::Internal {
                attribute,
                split_threshold,
                left,
                right,
                ..
            } => {
                path.push(RuleAtom::new(*attribute, Comparator::Le, *split_threshold));
                walk(left, path, out);
                path.pop();
                path.push(RuleAtom::new(*attribute, Comparator::Gt, *split_threshold));
                walk(right, path, out);
                path.pop();
            }
        }
    }
    let mut rules = Vec::new();
    walk(&m.root, &mut Vec::new(), &mut rules);
    if let [only] = rules.as_mut_slice() {
        if only.guard.is_empty() {
            let first = m.attribute_schema.first().copied().unwrap_or(Attribute::TchCallDropRate);
            only.guard.push(RuleAtom::new(first, Comparator::Ge, T::zero()));
        }
    }
    RuleSet::new(rules, "tree-export").expect("exported leaves form a valid rule set")
}

const MODEL_HEADER: &str = "kpidiag-tree v1";

fn format_pruning(p: &Pruning) -> String {
    match p {
        Pruning::None => "none".into(),
        Pruning::Pessimistic { confidence } => format!("pessimistic:{confidence}"),
        Pruning::ReducedError { holdout_fraction, seed } => format!("reduced:{holdout_fraction}:{seed}"),
    }
}

pub fn parse_pruning(text: &str) -> Option<Pruning> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        ["none"] => Some(Pruning::None),
        ["pessimistic"] => Some(Pruning::Pessimistic { confidence: 0.25 }),
        ["pessimistic", c] => Some(Pruning::Pessimistic { confidence: c.parse().ok()? }),
        ["reduced"] => Some(Pruning::ReducedError { holdout_fraction: 1.0 / 3.0, seed: 0 }),
        ["reduced", h] => Some(Pruning::ReducedError { holdout_fraction: h.parse().ok()?, seed: 0 }),
        ["reduced", h, s] => Some(Pruning::ReducedError {
            holdout_fraction: h.parse().ok()?,
            seed: s.parse().ok()?,
        }),
        _ => None,
    }
}

fn format_counts(c: &ClassCounts) -> String {
    c.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Versioned text form: a header, the attribute schema, the parameters, then
/// one line per node in pre-order, indented two spaces per depth level.
pub fn save_model<T: Scalar>(m: &TreeModel<T>) -> String {
    fn node_lines<T: Scalar>(node: &TreeNode<T>, depth: usize, out: &mut String) {
        let indent = "  ".repeat(depth);
        match node {
            TreeNode::Leaf { class, class_counts, .. } => {
                let _ = writeln!(out, "{indent}leaf \"{class}\" counts={}", format_counts(class_counts));
            }
            TreeNode::Internal {
                attribute,
                split_threshold,
                left,
                right,
                class_counts,
            } => {
                let _ = writeln!(
                    out,
                    "{indent}split {attribute} <= {split_threshold} counts={}",
                    format_counts(class_counts)
                );
                node_lines(left, depth + 1, out);
                node_lines(right, depth + 1, out);
            }
        }
    }
    let p = &m.training_params;
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_HEADER}");
    let schema: Vec<&str> = m.attribute_schema.iter().map(|a| a.name()).collect();
    let _ = writeln!(out, "schema {}", schema.join(" "));
    let _ = writeln!(
        out,
        "params min_leaf={} pruning={} seed={} laplace={}",
        p.min_leaf_instances,
        format_pruning(&p.pruning),
        p.seed,
        p.laplace
    );
    node_lines(&m.root, 0, &mut out);
    out
}

fn parse_counts(text: &str) -> Option<ClassCounts> {
    let v: Vec<usize> = text.split(',').map(|x| x.parse().ok()).collect::<Option<_>>()?;
    v.try_into().ok()
}

pub fn load_model<T: Scalar>(text: &str) -> Result<TreeModel<T>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let bad = |n: usize, m: &str| Error::at_line(n + 1, m.to_string());

    let (n, header) = lines.next().ok_or_else(|| Error::parse("line 1", "empty model"))?;
    if header.trim() != MODEL_HEADER {
        return Err(bad(n, "unsupported model header"));
    }
    let (n, schema_line) = lines.next().ok_or_else(|| Error::parse("end of input", "missing schema"))?;
    let schema = schema_line
        .trim()
        .strip_prefix("schema")
        .ok_or_else(|| bad(n, "expected `schema`"))?
        .split_whitespace()
        .map(|name| Attribute::from_name(name).ok_or_else(|| bad(n, &format!("unknown attribute {name}"))))
        .collect::<Result<Vec<_>>>()?;
    let (n, params_line) = lines.next().ok_or_else(|| Error::parse("end of input", "missing params"))?;
    let mut params = LearnParams::default();
    for kv in params_line
        .trim()
        .strip_prefix("params")
        .ok_or_else(|| bad(n, "expected `params`"))?
        .split_whitespace()
    {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(n, "expected key=value"))?;
        match k {
            "min_leaf" => params.min_leaf_instances = v.parse().map_err(|_| bad(n, "bad min_leaf"))?,
            "pruning" => params.pruning = parse_pruning(v).ok_or_else(|| bad(n, "bad pruning"))?,
            "seed" => params.seed = v.parse().map_err(|_| bad(n, "bad seed"))?,
            "laplace" => params.laplace = v.parse().map_err(|_| bad(n, "bad laplace"))?,
            _ => return Err(bad(n, &format!("unknown parameter {k}"))),
        }
    }

    type Lines<'a, I> = std::iter::Peekable<I>;
    fn parse_node<'a, T: Scalar, I: Iterator<Item = (usize, &'a str)>>(
        lines: &mut Lines<'a, I>,
        depth: usize,
        schema: &[Attribute],
        laplace: bool,
    ) -> Result<TreeNode<T>> {
        let (n, raw) = lines.next().ok_or_else(|| Error::parse("end of input", "truncated tree"))?;
        let bad = |m: &str| Error::at_line(n + 1, m.to_string());
        let indent = raw.len() - raw.trim_start_matches(' ').len();
        if indent != depth * 2 {
            return Err(bad(&format!("expected indent {}, found {indent}", depth * 2)));
        }
        let line = raw.trim();
        let (body, counts) = line.rsplit_once(" counts=").ok_or_else(|| bad("missing counts"))?;
        let counts = parse_counts(counts).ok_or_else(|| bad("bad counts"))?;
        if let Some(rest) = body.strip_prefix("leaf ") {
            let class: DiagnosisClass = rest.trim().trim_matches('"').parse().map_err(|_| bad("bad class"))?;
            let node = TreeNode::leaf(counts, laplace);
            if let TreeNode::Leaf { class: derived, .. } = &node {
                if *derived != class {
                    return Err(bad("leaf class disagrees with its counts"));
                }
            }
            Ok(node)
        } else if let Some(rest) = body.strip_prefix("split ") {
            let mut it = rest.split_whitespace();
            let (Some(name), Some("<="), Some(thr), None) = (it.next(), it.next(), it.next(), it.next()) else {
                return Err(bad("expected `split <attribute> <= <threshold>`"));
            };
            let attribute = Attribute::from_name(name).ok_or_else(|| bad("unknown attribute"))?;
            if !schema.contains(&attribute) {
                return Err(bad("attribute not in schema"));
            }
            let split_threshold = T::parse_text(thr).filter(|t| t.is_finite()).ok_or_else(|| bad("bad threshold"))?;
            let left = parse_node(lines, depth + 1, schema, laplace)?;
            let right = parse_node(lines, depth + 1, schema, laplace)?;
            Ok(TreeNode::Internal {
                attribute,
                split_threshold,
                left: Box::new(left),
                right: Box::new(right),
                class_counts: counts,
            })
        } else {
            Err(bad("expected `leaf` or `split`"))
        }
    }

    let root = parse_node(&mut lines, 0, &schema, params.laplace)?;
    if let Some((n, _)) = lines.next() {
        return Err(bad(n, "trailing content after tree"));
    }
    Ok(TreeModel {
        root,
        training_params: params,
        attribute_schema: schema,
    })
}
