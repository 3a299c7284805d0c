//! Synthetic KPI datasets: cluster-template sampling, uniform sampling over
//! attribute ranges, and rule-boundary records for branch coverage.

use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cluster::{feature_index, feature_label, CLUSTER_FEATURES, NUM_FEATURES};
use crate::dataset::{Dataset, DEFAULT_RELATION};
use crate::error::{Error, Result};
use crate::kpi::{Attribute, KpiRecord, NUM_ATTRIBUTES};
use crate::rules::{branch_witness, classify, Bounds, RuleSet};
use crate::scalar::Scalar;

/// Per-attribute Gaussian shape of one cluster, over the clustering features.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTemplate {
    pub id: String,
    pub mean: [f64; NUM_FEATURES],
    pub std_dev: [f64; NUM_FEATURES],
    pub weight: f64,
}

/// The nine cluster profiles shipped with the crate.
pub const DEFAULT_TEMPLATES_CSV: &str = include_str!("../data/templates.csv");

pub fn default_templates() -> Vec<ClusterTemplate> {
    parse_templates(DEFAULT_TEMPLATES_CSV).expect("bundled templates are valid")
}

pub fn read_templates(source: impl Read) -> Result<Vec<ClusterTemplate>> {
    let mut text = String::new();
    let mut source = source;
    source.read_to_string(&mut text)?;
    parse_templates(&text)
}

/// Parses `template_id,attribute,mean,std,weight` rows. Every template must
/// give each clustering attribute exactly once; weights are relative and
/// are normalized to sum to 1.
pub fn parse_templates(text: &str) -> Result<Vec<ClusterTemplate>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut templates: Vec<(ClusterTemplate, [bool; NUM_FEATURES])> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let loc = format!("row {}", i + 2);
        let row = row.map_err(|e| Error::parse(loc.clone(), e.to_string()))?;
        if row.len() != 5 {
            return Err(Error::parse(loc, format!("expected 5 fields, found {}", row.len())));
        }
        let num = |c: usize| -> Result<f64> {
            row[c]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(format!("{loc}, column {}", c + 1), format!("bad number {:?}", &row[c])))
        };
        let (mean, std, weight) = (num(2)?, num(3)?, num(4)?);
        if std < 0.0 || weight < 0.0 {
            return Err(Error::parse(loc, "std and weight must be non-negative"));
        }
        let d = feature_index(&row[1]).ok_or_else(|| Error::parse(loc.clone(), format!("unknown attribute {:?}", &row[1])))?;
        let id = row[0].to_string();
        let pos = match templates.iter().position(|(t, _)| t.id == id) {
            Some(p) => p,
            None => {
                templates.push((
                    ClusterTemplate {
                        id,
                        mean: [0.0; NUM_FEATURES],
                        std_dev: [0.0; NUM_FEATURES],
                        weight,
                    },
                    [false; NUM_FEATURES],
                ));
                templates.len() - 1
            }
        };
        let (t, seen) = &mut templates[pos];
        if seen[d] {
            return Err(Error::parse(loc, format!("template {} repeats {}", t.id, feature_label(d))));
        }
        if t.weight != weight {
            return Err(Error::parse(loc, format!("template {} has inconsistent weights", t.id)));
        }
        seen[d] = true;
        t.mean[d] = mean;
        t.std_dev[d] = std;
    }
    if templates.is_empty() {
        return Err(Error::validation("template file defines no templates"));
    }
    for (t, seen) in &templates {
        if let Some(d) = seen.iter().position(|s| !s) {
            return Err(Error::validation(format!("template {} lacks {}", t.id, feature_label(d))));
        }
    }
    let total: f64 = templates.iter().map(|(t, _)| t.weight).sum();
    if total <= 0.0 {
        return Err(Error::validation("template weights sum to zero"));
    }
    Ok(templates
        .into_iter()
        .map(|(mut t, _)| {
            t.weight /= total;
            t
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenMode<T = f64> {
    /// Each record drawn from one template; standard deviations are scaled
    /// by `separation_scale` (0 puts every record on its template mean).
    Templates {
        templates: Vec<ClusterTemplate>,
        separation_scale: f64,
    },
    /// Every attribute drawn independently and uniformly from its range.
    Uniform { bounds: Bounds<T> },
    /// For each rule, one record `eps` inside its guard and one record per
    /// guard atom moved `eps` across that atom's threshold. `n` is ignored.
    Boundary { ruleset: RuleSet<T>, eps: T, bounds: Bounds<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec<T = f64> {
    pub mode: GenMode<T>,
    pub n: usize,
    pub seed: u64,
    pub label_with: Option<RuleSet<T>>,
}

/// Range of `sdcch_drops` in template mode, which the templates do not cover.
const SDCCH_DROPS_RANGE: (f64, f64) = (0.0, 100.0);
const MAX_RESAMPLES: usize = 100;

/// Splits `n` over the weights by largest remainder; ties go to the
/// earlier template.
fn allocate(n: usize, weights: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return mean.max(0.0);
    }
    let normal = Normal::new(mean, std).expect("std is finite and positive");
    for _ in 0..MAX_RESAMPLES {
        let v = normal.sample(rng);
        if v >= 0.0 {
            return v;
        }
    }
    0.0
}

fn template_records<T: Scalar>(templates: &[ClusterTemplate], scale: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<KpiRecord<T>>> {
    if templates.is_empty() {
        return Err(Error::validation("templates mode needs at least one template"));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::validation(format!("separation scale must be non-negative, got {scale}")));
    }
    for t in templates {
        if t.mean.iter().chain(&t.std_dev).any(|v| !v.is_finite()) || t.std_dev.iter().any(|&s| s < 0.0) {
            return Err(Error::validation(format!("template {} has invalid parameters", t.id)));
        }
        if !(t.weight.is_finite() && t.weight >= 0.0) {
            return Err(Error::validation(format!("template {} has invalid weight", t.id)));
        }
    }
    let weights: Vec<f64> = templates.iter().map(|t| t.weight).collect();
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::validation("template weights sum to zero"));
    }
    let total: f64 = weights.iter().sum();
    let counts = allocate(n, &weights.iter().map(|w| w / total).collect::<Vec<_>>());
    let mut out = Vec::with_capacity(n);
    for (ti, (t, &count)) in templates.iter().zip(&counts).enumerate() {
        for i in 0..count {
            let mut values = [T::zero(); NUM_ATTRIBUTES];
            for (d, (attr, _)) in CLUSTER_FEATURES.iter().enumerate() {
                values[attr.index()] = T::lit(truncated_normal(rng, t.mean[d], t.std_dev[d] * scale));
            }
            let (lo, hi) = SDCCH_DROPS_RANGE;
            values[Attribute::SdcchDrops.index()] = T::lit(rng.random_range(lo..=hi));
            out.push(KpiRecord::from_values(format!("tpl{ti}-{i:05}"), values));
        }
    }
    Ok(out)
}

fn uniform_records<T: Scalar>(bounds: &Bounds<T>, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<KpiRecord<T>>> {
    let ranges: Vec<(f64, f64)> = bounds.ranges.iter().map(|(lo, hi)| (lo.as_f64(), hi.as_f64())).collect();
    for (a, &(lo, hi)) in Attribute::ALL.iter().zip(&ranges) {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::validation(format!("range [{lo}, {hi}] for {a} is empty or degenerate")));
        }
        if lo < 0.0 {
            return Err(Error::validation(format!("range for {a} must be non-negative")));
        }
    }
    Ok((0..n)
        .map(|i| {
            let values = std::array::from_fn(|d| T::lit(rng.random_range(ranges[d].0..=ranges[d].1)));
            KpiRecord::from_values(format!("u-{i:05}"), values)
        })
        .collect())
}

fn boundary_records<T: Scalar>(rs: &RuleSet<T>, eps: T, bounds: &Bounds<T>) -> Result<Vec<KpiRecord<T>>> {
    if !(eps.is_finite() && eps > T::zero()) {
        return Err(Error::validation("boundary offset must be positive"));
    }
    let mut out = Vec::new();
    for (i, rule) in rs.rules().iter().enumerate() {
        let Some(w) = branch_witness(rs, i, eps, bounds) else { continue };
        let mut inside = w.record;
        inside.cell_id = format!("b-{}-in", rule.rule_id);
        out.push(inside.clone());
        for (j, atom) in rule.guard.iter().enumerate() {
            let mut outside = inside.clone();
            outside.cell_id = format!("b-{}-out{}", rule.rule_id, j + 1);
            let v = if atom.comparator.is_upper() {
                atom.threshold + eps
            } else {
                atom.threshold - eps
            };
            outside.set(atom.attribute, v.max(T::zero()));
            out.push(outside);
        }
    }
    if out.is_empty() {
        return Err(Error::validation("no rule has a satisfiable guard within the bounds"));
    }
    Ok(out)
}

/// Generated records, labeled when the spec carries a rule set.
pub fn generate_records<T: Scalar>(spec: &GenSpec<T>) -> Result<Vec<KpiRecord<T>>> {
    let boundary = matches!(spec.mode, GenMode::Boundary { .. });
    if spec.n == 0 && !boundary {
        return Err(Error::validation("n must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = match &spec.mode {
        GenMode::Templates {
            templates,
            separation_scale,
        } => template_records(templates, *separation_scale, spec.n, &mut rng)?,
        GenMode::Uniform { bounds } => uniform_records(bounds, spec.n, &mut rng)?,
        GenMode::Boundary { ruleset, eps, bounds } => boundary_records(ruleset, *eps, bounds)?,
    };
    if let Some(rs) = &spec.label_with {
        for r in &mut records {
            r.diagnosis = Some(classify(r, rs)?);
        }
    }
    Ok(records)
}

pub fn generate<T: Scalar>(spec: &GenSpec<T>) -> Result<Dataset<T>> {
    Dataset::from_records(DEFAULT_RELATION, &generate_records(spec)?)
}
