//! End-to-end technical-area analysis: label every cell (rules or a trained
//! tree), map classes to cause groups, cluster, and cross-tabulate clusters
//! against classes and groups.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cluster::{self, ClusterParams, ProfileAttribute, NUM_FEATURES};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kpi::{class_to_group, CauseGroup, DiagnosisClass, KpiRecord};
use crate::rules::{classify, default_ruleset, RuleSet};
use crate::scalar::Scalar;
use crate::tree::{self, LearnParams};

#[derive(Debug, Clone, PartialEq)]
pub enum Labeling<T = f64> {
    /// Label with a rule set, first match wins.
    Rules(RuleSet<T>),
    /// Train a tree on the input labels and relabel with its predictions.
    /// Unlabeled input is first labeled with the default rule set.
    TrainedTree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T = f64> {
    pub labeling: Labeling<T>,
    pub learn_params: LearnParams,
    pub cluster_params: ClusterParams,
    /// When set, the report files are written here.
    pub output_dir: Option<PathBuf>,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        PipelineConfig {
            labeling: Labeling::Rules(default_ruleset()),
            learn_params: LearnParams::default(),
            cluster_params: ClusterParams::default(),
            output_dir: None,
        }
    }
}

/// Counts per diagnosis class, in `DiagnosisClass::ALL` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassTally {
    pub class_a: usize,
    pub class_b: usize,
    pub class_c: usize,
    pub optimised: usize,
    pub unclassified: usize,
}

impl ClassTally {
    pub fn add(&mut self, d: DiagnosisClass) {
        *self.slot(d) += 1;
    }

    fn slot(&mut self, d: DiagnosisClass) -> &mut usize {
        match d {
            DiagnosisClass::ClassA => &mut self.class_a,
            DiagnosisClass::ClassB => &mut self.class_b,
            DiagnosisClass::ClassC => &mut self.class_c,
            DiagnosisClass::Optimised => &mut self.optimised,
            DiagnosisClass::Unclassified => &mut self.unclassified,
        }
    }

    pub fn get(&self, d: DiagnosisClass) -> usize {
        match d {
            DiagnosisClass::ClassA => self.class_a,
            DiagnosisClass::ClassB => self.class_b,
            DiagnosisClass::ClassC => self.class_c,
            DiagnosisClass::Optimised => self.optimised,
            DiagnosisClass::Unclassified => self.unclassified,
        }
    }

    pub fn total(&self) -> usize {
        DiagnosisClass::ALL.iter().map(|&d| self.get(d)).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GroupTally {
    pub gca: usize,
    pub gcb: usize,
    pub gcc: usize,
    pub gcd: usize,
}

impl GroupTally {
    pub fn add(&mut self, g: CauseGroup) {
        match g {
            CauseGroup::Gca => self.gca += 1,
            CauseGroup::Gcb => self.gcb += 1,
            CauseGroup::Gcc => self.gcc += 1,
            CauseGroup::Gcd => self.gcd += 1,
        }
    }

    pub fn get(&self, g: CauseGroup) -> usize {
        match g {
            CauseGroup::Gca => self.gca,
            CauseGroup::Gcb => self.gcb,
            CauseGroup::Gcc => self.gcc,
            CauseGroup::Gcd => self.gcd,
        }
    }
}

const GROUPS: [CauseGroup; 4] = [CauseGroup::Gca, CauseGroup::Gcb, CauseGroup::Gcc, CauseGroup::Gcd];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    pub class_counts: ClassTally,
    pub group_counts: GroupTally,
    pub optimised_cell_count: usize,
    /// Cause groups with no member in this cluster.
    pub missing_groups: Vec<&'static str>,
    pub warning: bool,
    pub profile: Vec<ProfileAttribute>,
}

/// Final label and cluster of one input record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellOutcome {
    pub cell_id: String,
    pub cluster: usize,
    pub diagnosis: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeSummary {
    pub leaves: usize,
    pub nodes: usize,
    pub depth: usize,
    /// Fraction of records whose tree label equals their training label.
    pub training_agreement: f64,
}

/// Mean and sample standard deviation of one KPI family within a class;
/// `None` for a class with no members.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KpiStat {
    pub kpi: &'static str,
    pub mean: Option<f64>,
    pub std_dev: Option<f64>,
}

/// Per-class value lists of the four KPI families and their statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassKpiSummary {
    pub class: &'static str,
    pub count: usize,
    #[serde(skip)]
    pub traffic: Vec<f64>,
    #[serde(skip)]
    pub dropped_calls: Vec<f64>,
    #[serde(skip)]
    pub handover_success: Vec<f64>,
    #[serde(skip)]
    pub call_success: Vec<f64>,
    pub stats: Vec<KpiStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterDiagnosisReport {
    pub n_records: usize,
    pub k: usize,
    pub labeling: String,
    pub tree: Option<TreeSummary>,
    pub cluster_seed: u64,
    pub wcss: f64,
    pub class_totals: ClassTally,
    pub group_totals: GroupTally,
    pub clusters: Vec<ClusterSummary>,
    pub kpi_summary: Vec<ClassKpiSummary>,
    /// Input records in input order.
    pub cells: Vec<CellOutcome>,
}

pub const KPI_FAMILIES: [&str; 4] = ["traffic", "dropped_calls", "handover_success", "call_success"];

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

/// Groups the traffic, dropped-call, handover-success and call-success
/// values of labeled records by class. The KPI record carries no direct
/// traffic or call-success column, so traffic is read from
/// `handover_attempts`, dropped calls from `tch_call_drop_rate`, handover
/// success from `handover_success_rate`, and call success as
/// `100 - tch_call_drop_rate`. Unlabeled records are skipped.
pub fn kpi_group_summary<T: Scalar>(labeled: &[KpiRecord<T>]) -> Vec<ClassKpiSummary> {
    DiagnosisClass::ALL
        .iter()
        .map(|&class| {
            let members: Vec<&KpiRecord<T>> = labeled.iter().filter(|r| r.diagnosis == Some(class)).collect();
            let traffic: Vec<f64> = members.iter().map(|r| r.handover_attempts.as_f64()).collect();
            let dropped_calls: Vec<f64> = members.iter().map(|r| r.tch_call_drop_rate.as_f64()).collect();
            let handover_success: Vec<f64> = members.iter().map(|r| r.handover_success_rate.as_f64()).collect();
            let call_success: Vec<f64> = members.iter().map(|r| 100.0 - r.tch_call_drop_rate.as_f64()).collect();
            let stats = KPI_FAMILIES
                .iter()
                .zip([&traffic, &dropped_calls, &handover_success, &call_success])
                .map(|(&kpi, v)| {
                    let (mean, std_dev) = mean_std(v);
                    KpiStat { kpi, mean, std_dev }
                })
                .collect();
            ClassKpiSummary {
                class: class.as_str(),
                count: members.len(),
                traffic,
                dropped_calls,
                handover_success,
                call_success,
                stats,
            }
        })
        .collect()
}

fn label_records<T: Scalar>(records: &mut [KpiRecord<T>], cfg: &PipelineConfig<T>) -> Result<(String, Option<TreeSummary>)> {
    match &cfg.labeling {
        Labeling::Rules(rs) => {
            for r in records.iter_mut() {
                r.diagnosis = Some(classify(r, rs).map_err(|e| e.in_stage("label"))?);
            }
            Ok((format!("rules:{}", rs.version()), None))
        }
        Labeling::TrainedTree => {
            let trainable = records
                .iter()
                .all(|r| r.diagnosis.is_some_and(|d| d.label_index().is_some()));
            let source = if trainable {
                "input labels"
            } else {
                let rs = default_ruleset::<T>();
                for r in records.iter_mut() {
                    r.diagnosis = Some(classify(r, &rs).map_err(|e| e.in_stage("label"))?);
                }
                "default rules"
            };
            let model = tree::train(records, &cfg.learn_params).map_err(|e| e.in_stage("train"))?;
            let mut agree = 0;
            for r in records.iter_mut() {
                let predicted = tree::predict(&model, r).map_err(|e| e.in_stage("label"))?;
                agree += usize::from(r.diagnosis == Some(predicted));
                r.diagnosis = Some(predicted);
            }
            let summary = TreeSummary {
                leaves: model.root.leaf_count(),
                nodes: model.root.node_count(),
                depth: model.root.depth(),
                training_agreement: agree as f64 / records.len() as f64,
            };
            Ok((format!("tree trained on {source}"), Some(summary)))
        }
    }
}

/// Runs label, summary, cluster and cross-tabulation in order; failures
/// carry the stage name. Writes the report files when `output_dir` is set.
pub fn run_pipeline<T: Scalar>(data: &Dataset<T>, cfg: &PipelineConfig<T>) -> Result<ClusterDiagnosisReport> {
    let mut records = data.to_records().map_err(|e| e.in_stage("label"))?;
    if records.is_empty() {
        return Err(Error::validation("dataset has no records").in_stage("label"));
    }
    let (labeling, tree) = label_records(&mut records, cfg)?;
    let kpi_summary = kpi_group_summary(&records);

    let model = cluster::fit(&records, &cfg.cluster_params).map_err(|e| e.in_stage("cluster"))?;
    let k = model.k();
    let mut class_counts = vec![ClassTally::default(); k];
    let mut group_counts = vec![GroupTally::default(); k];
    let mut class_totals = ClassTally::default();
    let mut group_totals = GroupTally::default();
    for (r, &c) in records.iter().zip(&model.assignments) {
        let d = r.diagnosis.unwrap_or(DiagnosisClass::Unclassified);
        class_counts[c].add(d);
        class_totals.add(d);
        if let Ok(g) = class_to_group(d) {
            group_counts[c].add(g);
            group_totals.add(g);
        }
    }
    let table = cluster::profile_report(&model);
    let clusters = table
        .clusters
        .into_iter()
        .map(|col| {
            let j = col.cluster;
            let missing_groups: Vec<&'static str> = GROUPS
                .iter()
                .filter(|&&g| group_counts[j].get(g) == 0)
                .map(|g| g.as_str())
                .collect();
            ClusterSummary {
                cluster: j,
                size: col.size,
                class_counts: class_counts[j],
                group_counts: group_counts[j],
                optimised_cell_count: class_counts[j].optimised,
                warning: !missing_groups.is_empty(),
                missing_groups,
                profile: col.attributes,
            }
        })
        .collect();

    let cells = records
        .iter()
        .zip(&model.assignments)
        .map(|(r, &cluster)| CellOutcome {
            cell_id: r.cell_id.clone(),
            cluster,
            diagnosis: r.diagnosis.unwrap_or(DiagnosisClass::Unclassified).as_str(),
        })
        .collect();
    let report = ClusterDiagnosisReport {
        n_records: records.len(),
        k,
        labeling,
        tree,
        cluster_seed: cfg.cluster_params.seed,
        wcss: model.wcss.as_f64(),
        class_totals,
        group_totals,
        clusters,
        kpi_summary,
        cells,
    };
    if let Some(dir) = &cfg.output_dir {
        write_report(&report, dir).map_err(|e| e.in_stage("report"))?;
    }
    Ok(report)
}

pub const REPORT_JSON: &str = "pipeline_report.json";
pub const REPORT_TEXT: &str = "pipeline_report.txt";
pub const REPORT_CSV: &str = "pipeline_clusters.csv";

/// Writes the JSON, text and per-cluster CSV renderings under fixed names.
pub fn write_report(report: &ClusterDiagnosisReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, body) in [
        (REPORT_JSON, report.to_json()),
        (REPORT_TEXT, report.to_text()),
        (REPORT_CSV, report.to_csv()),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "–".to_string(), |x| format!("{x:.2}"))
}

impl ClusterDiagnosisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Cells: {}  Clusters: {}  Labeling: {}", self.n_records, self.k, self.labeling);
        if let Some(t) = &self.tree {
            let _ = writeln!(
                out,
                "Tree: {} leaves, {} nodes, depth {}, training agreement {:.4}",
                t.leaves, t.nodes, t.depth, t.training_agreement
            );
        }
        let _ = writeln!(out, "WCSS: {:.4}", self.wcss);
        let c = &self.class_totals;
        let _ = writeln!(
            out,
            "Classes: A {}  B {}  C {}  Optimised {}  Unclassified {}",
            c.class_a, c.class_b, c.class_c, c.optimised, c.unclassified
        );
        out.push_str("\nKPI summary by class (mean / std-dev)\n");
        let _ = write!(out, "{:<14}{:>7}", "Class", "Cells");
        for kpi in KPI_FAMILIES {
            let _ = write!(out, "{kpi:>24}");
        }
        out.push('\n');
        for s in &self.kpi_summary {
            let _ = write!(out, "{:<14}{:>7}", s.class, s.count);
            for st in &s.stats {
                let _ = write!(out, "{:>24}", format!("{} / {}", fmt_opt(st.mean), fmt_opt(st.std_dev)));
            }
            out.push('\n');
        }
        out.push_str("\nClusters\n");
        let _ = writeln!(
            out,
            "{:>7}{:>7}{:>7}{:>7}{:>7}{:>11}{:>8}{:>8}{:>8}{:>8}  warning",
            "cluster", "size", "A", "B", "C", "Optimised", "GCA", "GCB", "GCC", "GCD"
        );
        for s in &self.clusters {
            let cc = &s.class_counts;
            let g = &s.group_counts;
            let warn = if s.warning {
                format!("missing {}", s.missing_groups.join(", "))
            } else {
                String::new()
            };
            let _ = writeln!(
                out,
                "{:>7}{:>7}{:>7}{:>7}{:>7}{:>11}{:>8}{:>8}{:>8}{:>8}  {warn}",
                s.cluster, s.size, cc.class_a, cc.class_b, cc.class_c, cc.optimised, g.gca, g.gcb, g.gcc, g.gcd
            );
        }
        out
    }

    /// One row per cluster: counts, warning flag and profile means.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "cluster,size,class_a,class_b,class_c,optimised,unclassified,gca,gcb,gcc,gcd,optimised_cell_count,warning",
        );
        for d in 0..NUM_FEATURES {
            let _ = write!(out, ",mean {}", cluster::feature_label(d));
        }
        out.push('\n');
        for s in &self.clusters {
            let c = &s.class_counts;
            let g = &s.group_counts;
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.cluster,
                s.size,
                c.class_a,
                c.class_b,
                c.class_c,
                c.optimised,
                c.unclassified,
                g.gca,
                g.gcb,
                g.gcc,
                g.gcd,
                s.optimised_cell_count,
                s.warning
            );
            for a in &s.profile {
                let _ = write!(out, ",{}", a.mean);
            }
            out.push('\n');
        }
        out
    }
}
