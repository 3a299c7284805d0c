//! One function per subcommand.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kpidiag::cluster::{self, profile_report, ClusterParams};
use kpidiag::dataset::{read_counters_csv, split, write_kpis_csv, Dataset, SplitSpec, DEFAULT_RELATION};
use kpidiag::kpi::{derive_kpis, Attribute, DiagnosisClass, KpiRecord};
use kpidiag::pipeline::{run_pipeline, Labeling, PipelineConfig};
use kpidiag::rules::{analyze_reachability, branch_witness, classify, rule_family, Bounds, RuleSet};
use kpidiag::synth::{default_templates, generate, read_templates, GenMode, GenSpec};
use kpidiag::tree::{self, evaluate, export_rules, load_model, parse_pruning, save_model, LearnParams};
use serde::Deserialize;
use serde_json::json;

use crate::files::{self, Format};
use crate::{
    ClusterArgs, CliError, DeriveArgs, EvalArgs, GenArgs, LabelArgs, ModeName, PipelineArgs, RulesCheckArgs, TrainArgs,
};

/// Prints a status line to standard output, or to standard error when
/// standard output carries the data itself.
fn status(data_on_stdout: bool, line: &str) {
    if data_on_stdout {
        eprintln!("{line}");
    } else {
        println!("{line}");
    }
}

fn records_of(data: &Dataset) -> Result<Vec<KpiRecord>, CliError> {
    data.to_records()
        .map_err(|e| CliError::Input(format!("{}: {e}", data.provenance)))
}

/// Contents of a `gen --spec` TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenFile {
    mode: Option<ModeName>,
    n: Option<usize>,
    seed: Option<u64>,
    label: Option<String>,
    templates: Option<PathBuf>,
    separation_scale: Option<f64>,
    eps: Option<f64>,
    /// Attribute name to `[low, high]`; unlisted attributes keep the
    /// default ranges.
    #[serde(default)]
    ranges: BTreeMap<String, [f64; 2]>,
}

fn bounds_from(ranges: &BTreeMap<String, [f64; 2]>) -> Result<Bounds, CliError> {
    let mut all = Bounds::broad().ranges;
    for (name, [lo, hi]) in ranges {
        let a = Attribute::from_name(name).ok_or_else(|| CliError::Input(format!("unknown attribute `{name}` in ranges")))?;
        all[a.index()] = (*lo, *hi);
    }
    Ok(Bounds::new(all)?)
}

pub fn gen(a: GenArgs, format: Option<Format>) -> Result<(), CliError> {
    let file: GenFile = match &a.spec {
        Some(path) => toml::from_str(&files::read_text(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
        None => GenFile::default(),
    };
    let label = a.label.or(file.label).unwrap_or_else(|| "none".into());
    let label_with = if label.eq_ignore_ascii_case("none") {
        None
    } else {
        Some(files::load_rules(&label)?)
    };
    let mode = match a.mode.or(file.mode).unwrap_or(ModeName::Templates) {
        ModeName::Templates => {
            let templates = match a.templates.or(file.templates) {
                Some(path) => read_templates(files::read_text(&path)?.as_bytes())
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
                None => default_templates(),
            };
            GenMode::Templates {
                templates,
                separation_scale: a.separation.or(file.separation_scale).unwrap_or(1.0),
            }
        }
        ModeName::Uniform => GenMode::Uniform {
            bounds: bounds_from(&file.ranges)?,
        },
        ModeName::Boundary => GenMode::Boundary {
            ruleset: label_with.clone().unwrap_or_else(kpidiag::default_ruleset),
            eps: a.eps.or(file.eps).unwrap_or(0.01),
            bounds: bounds_from(&file.ranges)?,
        },
    };
    let spec = GenSpec {
        mode,
        n: a.n.or(file.n).unwrap_or(1000),
        seed: a.seed.or(file.seed).unwrap_or(0),
        label_with,
    };
    let data = generate(&spec)?;
    files::write_dataset(&data, a.out.as_deref(), format)?;
    status(a.out.is_none(), &format!("generated {} records", data.len()));
    Ok(())
}

pub fn derive(a: DeriveArgs) -> Result<(), CliError> {
    let text = files::read_text(&a.input)?;
    let counters = read_counters_csv::<f64>(text.as_bytes())
        .map_err(|e| CliError::Input(format!("{}: {e}", a.input.display())))?;
    let rows = counters
        .iter()
        .map(|c| {
            derive_kpis(c)
                .map(|k| (c.cell_id.clone(), k))
                .map_err(|e| CliError::Input(format!("cell {}: {e}", c.cell_id)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    files::emit(a.out.as_deref(), &write_kpis_csv(&rows)?)?;
    status(a.out.is_none(), &format!("derived KPIs for {} cells", rows.len()));
    Ok(())
}

fn histogram(records: &[KpiRecord]) -> String {
    let mut out = String::new();
    for class in DiagnosisClass::ALL {
        let n = records.iter().filter(|r| r.diagnosis == Some(class)).count();
        let _ = writeln!(out, "{:<14}{n:>8}", class.as_str());
    }
    out
}

pub fn label(a: LabelArgs, format: Option<Format>) -> Result<(), CliError> {
    let rules = files::load_rules(&a.rules)?;
    let data = files::read_dataset(&a.input, format)?;
    let mut records = records_of(&data)?;
    let previously = records.iter().filter(|r| r.diagnosis.is_some()).count();
    if previously > 0 {
        eprintln!("warning: overwriting existing diagnosis labels on {previously} records");
    }
    for r in &mut records {
        r.diagnosis = Some(classify(r, &rules)?);
    }
    let relation = if data.relation_name.is_empty() {
        DEFAULT_RELATION
    } else {
        &data.relation_name
    };
    let labeled = Dataset::from_records(relation, &records)?;
    files::write_dataset(&labeled, a.out.as_deref(), format)?;
    let on_stdout = a.out.is_none();
    status(on_stdout, &format!("labeled {} records with rules {}", records.len(), rules.version()));
    status(on_stdout, histogram(&records).trim_end());
    Ok(())
}

/// The whole dataset, or the train/test halves of a seeded split.
fn partition(data: &Dataset, fraction: Option<f64>, seed: u64) -> Result<(Dataset, Option<Dataset>), CliError> {
    match fraction {
        None => Ok((data.clone(), None)),
        Some(f) => {
            let (train, test) = split(data, SplitSpec { train_fraction: f, seed })?;
            Ok((train, Some(test)))
        }
    }
}

pub fn train(a: TrainArgs, format: Option<Format>) -> Result<(), CliError> {
    let pruning = parse_pruning(&a.pruning).ok_or_else(|| CliError::Input(format!("invalid --pruning `{}`", a.pruning)))?;
    let params = LearnParams {
        min_leaf_instances: a.min_leaf,
        pruning,
        seed: a.seed,
        laplace: a.laplace,
    };
    let data = files::read_dataset(&a.input, format)?;
    let (train_set, test_set) = partition(&data, a.split, a.seed)?;
    let model = tree::train(&records_of(&train_set)?, &params)?;
    files::write_file(&a.model, &save_model(&model))?;
    println!(
        "trained on {} records: {} leaves, {} nodes, depth {}",
        train_set.len(),
        model.root.leaf_count(),
        model.root.node_count(),
        model.root.depth()
    );
    println!("model written to {}", a.model.display());
    if let Some(path) = &a.export_rules {
        files::write_file(path, &kpidiag::save_ruleset(&export_rules(&model)))?;
        println!("rules written to {}", path.display());
    }
    if let Some(test) = test_set {
        let report = evaluate(&model, &records_of(&test)?)?;
        println!("held-out accuracy: {:.4} ({} records)", report.accuracy, report.total());
    }
    Ok(())
}

pub fn eval(a: EvalArgs, format: Option<Format>) -> Result<(), CliError> {
    let model = load_model::<f64>(&files::read_text(&a.model)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.model.display())))?;
    let data = files::read_dataset(&a.input, format)?;
    let (all, test) = partition(&data, a.split, a.seed)?;
    let target = test.unwrap_or(all);
    let report = evaluate(&model, &records_of(&target)?)?;
    files::emit(a.out.as_deref(), &report.to_text())?;
    if let Some(path) = &a.json {
        files::write_file(path, &report.to_json())?;
    }
    Ok(())
}

pub fn cluster(a: ClusterArgs, format: Option<Format>) -> Result<(), CliError> {
    let data = files::read_dataset(&a.input, format)?;
    let params = ClusterParams {
        k: a.k,
        max_iterations: a.max_iter,
        seed: a.seed,
        restarts: a.restarts,
        standardize: !a.no_standardize,
    };
    let model = cluster::fit(&records_of(&data)?, &params)?;
    let table = profile_report(&model);
    let mut text = table.to_text();
    let _ = writeln!(text, "\nWCSS: {:.4}  iterations: {}", model.wcss, model.iterations_run);
    files::emit(a.out.as_deref(), &text)?;
    if let Some(path) = &a.csv {
        files::write_file(path, &table.to_csv())?;
    }
    if let Some(path) = &a.json {
        files::write_file(path, &table.to_json())?;
    }
    Ok(())
}

pub fn pipeline(a: PipelineArgs, format: Option<Format>) -> Result<(), CliError> {
    let labeling = if a.trained_tree {
        Labeling::TrainedTree
    } else {
        Labeling::Rules(files::load_rules(&a.rules)?)
    };
    let cfg = PipelineConfig {
        labeling,
        learn_params: LearnParams {
            seed: a.seed,
            ..LearnParams::default()
        },
        cluster_params: ClusterParams {
            k: a.k,
            seed: a.seed,
            restarts: a.restarts,
            ..ClusterParams::default()
        },
        output_dir: a.out_dir.clone(),
    };
    let data = files::read_dataset(&a.input, format)?;
    let report = run_pipeline(&data, &cfg)?;
    files::emit(None, &report.to_text())?;
    if let Some(path) = &a.json {
        files::write_file(path, &report.to_json())?;
    }
    Ok(())
}

fn witness_json(r: &KpiRecord) -> serde_json::Value {
    let map: serde_json::Map<String, serde_json::Value> =
        Attribute::ALL.iter().map(|a| (a.name().to_string(), json!(r.get(*a)))).collect();
    serde_json::Value::Object(map)
}

fn witness_text(r: &KpiRecord) -> String {
    Attribute::ALL
        .iter()
        .map(|a| format!("{}={}", a.code(), (r.get(*a) * 1e6).round() / 1e6))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Rule ids and families with no reachable branch.
fn unreachable_summary(rs: &RuleSet, reachable: &[bool]) -> (Vec<String>, Vec<String>) {
    let ids: Vec<String> = rs
        .rules()
        .iter()
        .zip(reachable)
        .filter(|(_, &ok)| !ok)
        .map(|(r, _)| r.rule_id.clone())
        .collect();
    let mut families: Vec<String> = Vec::new();
    for (rule, _) in rs.rules().iter().zip(reachable).filter(|(_, &ok)| !ok) {
        let family = rule_family(&rule.rule_id);
        let any_live = rs
            .rules()
            .iter()
            .zip(reachable)
            .any(|(r, &ok)| ok && rule_family(&r.rule_id) == family);
        if !any_live && !families.iter().any(|f| f == family) {
            families.push(family.to_string());
        }
    }
    (ids, families)
}

pub fn rules_check(a: RulesCheckArgs) -> Result<(), CliError> {
    if !(a.eps > 0.0 && a.eps.is_finite()) {
        return Err(CliError::Input(format!("--eps must be positive, got {}", a.eps)));
    }
    let rs = files::load_rules(&a.rules)?;
    let bounds = Bounds::broad();
    let analysis = analyze_reachability(&rs, &bounds);
    let witnesses: Vec<Option<KpiRecord>> = analysis
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.reachable.then(|| {
                branch_witness(&rs, i, a.eps, &bounds)
                    .filter(|w| w.first_match)
                    .map(|w| w.record)
                    .or_else(|| r.witness.clone())
            })?
        })
        .collect();
    let reachable: Vec<bool> = analysis.iter().map(|r| r.reachable).collect();
    let (ids, families) = unreachable_summary(&rs, &reachable);

    let mut out = String::new();
    let _ = writeln!(out, "Rule set {} ({} rules)", rs.version(), rs.len());
    let _ = writeln!(out, "{:<8}{:<8}{:<14}{:<11}witness", "rule", "family", "outcome", "reachable");
    for ((rule, r), w) in rs.rules().iter().zip(&analysis).zip(&witnesses) {
        let _ = writeln!(
            out,
            "{:<8}{:<8}{:<14}{:<11}{}",
            rule.rule_id,
            rule_family(&rule.rule_id),
            rule.outcome.as_str(),
            if r.reachable { "yes" } else { "no" },
            w.as_ref().map_or_else(|| "-".to_string(), witness_text)
        );
    }
    let _ = writeln!(out, "\nunreachable branches: {}", if ids.is_empty() { "none".into() } else { ids.join(" ") });
    let _ = writeln!(
        out,
        "unreachable rules: {} ({})",
        families.len(),
        if families.is_empty() { "none".into() } else { families.join(" ") }
    );
    files::emit(None, &out)?;

    if let Some(path) = &a.json {
        let rules: Vec<serde_json::Value> = rs
            .rules()
            .iter()
            .zip(&analysis)
            .zip(&witnesses)
            .map(|((rule, r), w)| {
                json!({
                    "rule_id": rule.rule_id,
                    "family": rule_family(&rule.rule_id),
                    "outcome": rule.outcome.as_str(),
                    "reachable": r.reachable,
                    "witness": w.as_ref().map(witness_json),
                })
            })
            .collect();
        let doc = json!({
            "version": rs.version(),
            "rules": rules,
            "unreachable_branches": ids,
            "unreachable_rules": families,
        });
        write_json(path, &doc)?;
    }
    Ok(())
}

fn write_json(path: &Path, doc: &serde_json::Value) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(doc).map_err(|e| CliError::Internal(e.to_string()))?;
    files::write_file(path, &body)
}
