//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.
//!
//! Every check compares library output against an oracle written here,
//! independently of the code under test.

use std::time::{Duration, Instant};

use kpidiag::cluster::{self, fit_points, ClusterParams, Point, NUM_FEATURES};
use kpidiag::dataset::{parse_arff, read_csv, split, write_arff, write_csv, Dataset, SplitSpec};
use kpidiag::kpi::{derive_kpis, Attribute, CounterRecord, DiagnosisClass, KpiRecord, NUM_CLASSES};
use kpidiag::pipeline::{run_pipeline, Labeling, PipelineConfig, REPORT_CSV, REPORT_JSON, REPORT_TEXT};
use kpidiag::rules::{
    analyze_reachability, branch_witness, classify, default_ruleset, rule_family, Bounds, Comparator, RuleSet,
};
use kpidiag::synth::{default_templates, generate, generate_records, GenMode, GenSpec};
use kpidiag::tree::{evaluate, report_from_distributions, train, LearnParams, TreeNode};
use kpidiag::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Independent atom evaluation straight from the comparator semantics.
fn atom_holds(cmp: Comparator, v: f64, t: f64) -> bool {
    match cmp {
        Comparator::Le => v <= t,
        Comparator::Lt => v < t,
        Comparator::Gt => v > t,
        Comparator::Ge => v >= t,
    }
}

fn oracle_first_match(rs: &RuleSet, r: &KpiRecord) -> Option<usize> {
    rs.rules().iter().position(|rule| {
        rule.guard
            .iter()
            .all(|a| atom_holds(a.comparator, r.get(a.attribute), a.threshold))
    })
}

// 1. Every branch has a witness 0.01 inside its guard that classifies to the
// branch outcome, and moving any one atom across its threshold changes the
// matched rule.
fn rule_fidelity() -> Outcome {
    let rs = default_ruleset::<f64>();
    let bounds = Bounds::broad();
    let eps = 0.01;
    let mut cases = 0;
    let mut first_match = 0;
    let mut shadowed = Vec::new();
    for (i, rule) in rs.rules().iter().enumerate() {
        let w = branch_witness(&rs, i, eps, &bounds).ok_or_else(|| format!("{}: no witness", rule.rule_id))?;
        for atom in &rule.guard {
            let v = w.record.get(atom.attribute);
            ensure(atom_holds(atom.comparator, v, atom.threshold), || {
                format!("{}: witness violates {atom}", rule.rule_id)
            })?;
            ensure((v - atom.threshold).abs() >= eps - 1e-9, || {
                format!("{}: witness lies closer than {eps} to {atom}", rule.rule_id)
            })?;
        }
        let isolated = RuleSet::new(vec![rule.clone()], "single").map_err(|e| e.to_string())?;
        ensure(classify(&w.record, &isolated).unwrap() == rule.outcome, || {
            format!("{}: isolated outcome differs", rule.rule_id)
        })?;
        if w.first_match {
            ensure(oracle_first_match(&rs, &w.record) == Some(i), || {
                format!("{}: witness is not matched first", rule.rule_id)
            })?;
            ensure(classify(&w.record, &rs).unwrap() == rule.outcome, || {
                format!("{}: classify gives another outcome", rule.rule_id)
            })?;
            first_match += 1;
        } else {
            shadowed.push(rule.rule_id.clone());
        }
        cases += 1;
        for (j, atom) in rule.guard.iter().enumerate() {
            let mut moved = w.record.clone();
            let across = if atom.comparator.is_upper() {
                atom.threshold + eps
            } else {
                atom.threshold - eps
            };
            moved.set(atom.attribute, across);
            ensure(!atom_holds(atom.comparator, across, atom.threshold), || {
                format!("{} atom {}: perturbation stays inside", rule.rule_id, j + 1)
            })?;
            ensure(oracle_first_match(&rs, &moved) != Some(i), || {
                format!("{} atom {}: matched rule unchanged", rule.rule_id, j + 1)
            })?;
            ensure(classify(&moved, &isolated).unwrap() == DiagnosisClass::Unclassified, || {
                format!("{} atom {}: guard still matches", rule.rule_id, j + 1)
            })?;
            cases += 1;
        }
    }
    ensure(cases >= 26, || format!("only {cases} cases"))?;
    Ok(format!(
        "{cases} cases; {first_match} branches matched first, shadowed branches checked in isolation: {}",
        shadowed.join(" ")
    ))
}

fn declared_thresholds(rs: &RuleSet, a: Attribute) -> Vec<f64> {
    rs.rules()
        .iter()
        .flat_map(|r| r.guard.iter())
        .filter(|atom| atom.attribute == a)
        .map(|atom| atom.threshold)
        .collect()
}

// 2. A tree trained on rule-labeled uniform data recovers the rules.
fn tree_recovers_rules() -> Outcome {
    let rs = default_ruleset::<f64>();
    let spec = |n, seed| GenSpec {
        mode: GenMode::Uniform { bounds: Bounds::broad() },
        n,
        seed,
        label_with: Some(rs.clone()),
    };
    let train_set = generate_records(&spec(10_000, 2024)).map_err(|e| e.to_string())?;
    let test_set = generate_records(&spec(2_000, 4048)).map_err(|e| e.to_string())?;
    let model = train(&train_set, &LearnParams::default()).map_err(|e| e.to_string())?;
    let report = evaluate(&model, &test_set).map_err(|e| e.to_string())?;
    let TreeNode::Internal {
        attribute,
        split_threshold,
        ..
    } = &model.root
    else {
        return Err("root is a leaf".into());
    };
    let nearest = declared_thresholds(&rs, *attribute)
        .into_iter()
        .min_by(|a, b| (a - split_threshold).abs().total_cmp(&(b - split_threshold).abs()))
        .ok_or_else(|| format!("root attribute {attribute} appears in no rule"))?;
    ensure(report.accuracy >= 0.98, || format!("accuracy {:.4} < 0.98", report.accuracy))?;
    ensure((nearest - split_threshold).abs() <= 1.0, || {
        format!("root split {attribute} <= {split_threshold} is not within 1.0 of a rule threshold")
    })?;
    Ok(format!(
        "accuracy {:.4}, MAE {:.4}, weighted precision {:.4}; root {} <= {:.4} (rule threshold {nearest}); {} leaves",
        report.accuracy,
        report.mean_absolute_error,
        report.weighted_precision,
        attribute.code(),
        split_threshold,
        model.root.leaf_count()
    ))
}

const LABELS: [DiagnosisClass; 4] = DiagnosisClass::LABELS;

// 3. The evaluation statistics agree with a brute-force recomputation.
fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..100 {
        let n = rng.random_range(1..=60);
        let actual: Vec<DiagnosisClass> = (0..n).map(|_| LABELS[rng.random_range(0..NUM_CLASSES)]).collect();
        let predicted: Vec<[f64; 4]> = (0..n)
            .map(|_| {
                if rng.random_bool(0.3) {
                    let mut d = [0.0; 4];
                    d[rng.random_range(0..4)] = 1.0;
                    d
                } else {
                    let raw: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
                    let s: f64 = raw.iter().sum();
                    raw.map(|x| x / s)
                }
            })
            .collect();
        let r = report_from_distributions(&actual, &predicted).map_err(|e| e.to_string())?;

        let picked: Vec<usize> = predicted
            .iter()
            .map(|d| {
                let mut best = 0;
                for c in 1..4 {
                    if d[c] > d[best] {
                        best = c;
                    }
                }
                best
            })
            .collect();
        let truth: Vec<usize> = actual.iter().map(|a| LABELS.iter().position(|l| l == a).unwrap()).collect();
        let nf = n as f64;
        let acc = truth.iter().zip(&picked).filter(|(a, p)| a == p).count() as f64 / nf;
        let mae = truth
            .iter()
            .zip(&predicted)
            .map(|(&a, d)| (0..4).map(|c| (d[c] - if c == a { 1.0 } else { 0.0 }).abs()).sum::<f64>() / 4.0)
            .sum::<f64>()
            / nf;
        let mut weighted = 0.0;
        for c in 0..4 {
            let tp = (0..n).filter(|&i| truth[i] == c && picked[i] == c).count() as f64;
            let pred_c = picked.iter().filter(|&&p| p == c).count() as f64;
            let support = truth.iter().filter(|&&a| a == c).count() as f64;
            let prec = if pred_c > 0.0 { tp / pred_c } else { 0.0 };
            let rec = if support > 0.0 { tp / support } else { 0.0 };
            ensure((r.precision[c] - prec).abs() <= 1e-9 && (r.recall[c] - rec).abs() <= 1e-9, || {
                format!("case {case}: class {c} precision/recall mismatch")
            })?;
            weighted += support / nf * prec;
        }
        ensure((r.accuracy - acc).abs() <= 1e-9, || format!("case {case}: accuracy {} vs {acc}", r.accuracy))?;
        ensure((r.mean_absolute_error - mae).abs() <= 1e-9, || format!("case {case}: MAE mismatch"))?;
        ensure((r.weighted_precision - weighted).abs() <= 1e-9, || {
            format!("case {case}: weighted precision mismatch")
        })?;
    }

    let hard = |c: DiagnosisClass| {
        let mut d = [0.0; 4];
        d[LABELS.iter().position(|l| *l == c).unwrap()] = 1.0;
        d
    };
    use DiagnosisClass::{ClassA, ClassB};
    let hand = report_from_distributions(&[ClassA, ClassA, ClassB, ClassB], &[ClassA, ClassB, ClassB, ClassB].map(hard))
        .map_err(|e| e.to_string())?;
    ensure(hand.accuracy == 0.75, || format!("hand accuracy {}", hand.accuracy))?;
    ensure(hand.weighted_precision == 5.0 / 6.0, || {
        format!("hand weighted precision {}", hand.weighted_precision)
    })?;

    let mut actual = vec![ClassB; 220];
    let mut predicted = vec![hard(ClassB); 216];
    predicted.extend([hard(ClassA); 4]);
    actual.extend([ClassA; 93]);
    predicted.extend([hard(ClassA); 93]);
    let b = report_from_distributions(&actual, &predicted).map_err(|e| e.to_string())?;
    ensure(b.recall[1] == 216.0 / 220.0 && (b.recall[1] - 0.981818).abs() < 1e-6, || {
        format!("class B recall {}", b.recall[1])
    })?;
    Ok(format!(
        "100 random matrices within 1e-9; hand case accuracy 0.75, weighted precision 5/6; class B recall {:.6}",
        b.recall[1]
    ))
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dims: usize) -> Vec<Point<f64>> {
    (0..n)
        .map(|_| std::array::from_fn(|d| if d < dims { rng.random_range(0.0..100.0) } else { 0.0 }))
        .collect()
}

/// Best agreement over all label permutations, by DP over subsets of the
/// true labels.
fn matched_agreement(confusion: &[Vec<usize>]) -> (usize, Vec<usize>) {
    let k = confusion.len();
    let full = 1usize << k;
    let mut best = vec![None::<usize>; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = Some(0);
    for mask in 0..full {
        let Some(score) = best[mask] else { continue };
        let row = mask.count_ones() as usize;
        if row == k {
            continue;
        }
        for (col, &count) in confusion[row].iter().enumerate().take(k) {
            if mask & (1 << col) == 0 {
                let next = mask | (1 << col);
                let s = score + count;
                if best[next].is_none_or(|b| s > b) {
                    best[next] = Some(s);
                    choice[next] = col;
                }
            }
        }
    }
    let mut mapping = vec![0; k];
    let mut mask = full - 1;
    for row in (0..k).rev() {
        let col = choice[mask];
        mapping[row] = col;
        mask &= !(1 << col);
    }
    (best[full - 1].unwrap(), mapping)
}

fn brute_force_two_means(xs: &[f64]) -> f64 {
    let n = xs.len();
    let sse = |part: &[f64]| {
        let m = part.iter().sum::<f64>() / part.len() as f64;
        part.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
    };
    let mut best = f64::INFINITY;
    for mask in 1..(1u32 << (n - 1)) {
        let (a, b): (Vec<f64>, Vec<f64>) = {
            let mut a = Vec::new();
            let mut b = vec![xs[n - 1]];
            for (i, &x) in xs[..n - 1].iter().enumerate() {
                if mask & (1 << i) != 0 {
                    a.push(x);
                } else {
                    b.push(x);
                }
            }
            (a, b)
        };
        best = best.min(sse(&a) + sse(&b));
    }
    best
}

// 4. k-means: objective monotonicity, blob recovery, and exact optimum for
// k = 2 on small one-dimensional sets.
fn kmeans_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut steps = 0;
    for case in 0..50 {
        let n = rng.random_range(20..200);
        let dims = rng.random_range(1..=NUM_FEATURES);
        let pts = random_points(&mut rng, n, dims);
        let p = ClusterParams {
            k: rng.random_range(2..=6),
            seed: case,
            restarts: 1,
            standardize: rng.random_bool(0.5),
            ..Default::default()
        };
        let m = fit_points(&pts, &p).map_err(|e| e.to_string())?;
        for w in m.wcss_history.windows(2) {
            ensure(w[1] <= w[0], || format!("dataset {case}: wcss rose from {} to {}", w[0], w[1]))?;
            steps += 1;
        }
        ensure(m.iterations_run <= p.max_iterations, || format!("dataset {case}: too many iterations"))?;
    }

    let templates = default_templates();
    let k = templates.len();
    let per = 100;
    let spec = GenSpec::<f64> {
        mode: GenMode::Templates {
            templates: templates.clone(),
            separation_scale: 0.1,
        },
        n: per * k,
        seed: 11,
        label_with: None,
    };
    let recs = generate_records(&spec).map_err(|e| e.to_string())?;
    let truth: Vec<usize> = recs
        .iter()
        .map(|r| r.cell_id[3..].split('-').next().unwrap().parse().unwrap())
        .collect();
    let m = cluster::fit(
        &recs,
        &ClusterParams {
            k,
            seed: 7,
            restarts: 10,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut confusion = vec![vec![0; k]; k];
    for (&t, &a) in truth.iter().zip(&m.assignments) {
        confusion[t][a] += 1;
    }
    let (agree, mapping) = matched_agreement(&confusion);
    let agreement = agree as f64 / recs.len() as f64;
    let mut worst = 0.0f64;
    for (t, tpl) in templates.iter().enumerate() {
        let target = m.scaler.transform(&tpl.mean);
        let c = &m.centroids[mapping[t]];
        let dist = target.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        worst = worst.max(dist);
    }
    ensure(agreement >= 0.95, || format!("blob agreement {agreement:.4} < 0.95"))?;
    ensure(worst < 0.5, || format!("centroid error {worst:.4} >= 0.5"))?;

    let mut small = 0;
    for n in 2..=12 {
        for rep in 0..25 {
            let xs: Vec<f64> = (0..n)
                .map(|_| {
                    if rep % 5 == 0 {
                        rng.random_range(0..4) as f64
                    } else {
                        rng.random_range(0.0..50.0)
                    }
                })
                .collect();
            let pts: Vec<Point<f64>> = xs
                .iter()
                .map(|&x| {
                    let mut p = [0.0; NUM_FEATURES];
                    p[0] = x;
                    p
                })
                .collect();
            let m = fit_points(
                &pts,
                &ClusterParams {
                    k: 2,
                    seed: rep,
                    restarts: 50,
                    standardize: false,
                    ..Default::default()
                },
            )
            .map_err(|e| e.to_string())?;
            let opt = brute_force_two_means(&xs);
            ensure((m.wcss - opt).abs() <= 1e-9 * opt.max(1.0), || {
                format!("k=2 on {xs:?}: wcss {} vs optimum {opt}", m.wcss)
            })?;
            small += 1;
        }
    }
    Ok(format!(
        "{steps} monotone steps over 50 datasets; blobs agreement {agreement:.4}, worst centroid error {worst:.4}; {small} small k=2 sets optimal"
    ))
}

// 5. Reachability agrees with an exhaustive threshold-adjacent grid.
fn reachability_report() -> Outcome {
    let rs = default_ruleset::<f64>();
    let bounds = Bounds::broad();
    let report = analyze_reachability(&rs, &bounds);

    let delta = 0.005;
    let attrs: Vec<Attribute> = Attribute::ALL
        .iter()
        .copied()
        .filter(|a| rs.rules().iter().any(|r| r.guard.iter().any(|x| x.attribute == *a)))
        .collect();
    let axes: Vec<Vec<f64>> = attrs
        .iter()
        .map(|&a| {
            let (lo, hi) = bounds.range(a);
            let mut v = vec![lo, hi];
            for t in declared_thresholds(&rs, a) {
                v.extend([t - delta, t, t + delta]);
            }
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
        .collect();
    let mut hit = vec![false; rs.len()];
    let mut idx = vec![0usize; attrs.len()];
    let mut base = bounds.midpoint_record("grid");
    let mut points = 0usize;
    'grid: loop {
        for (d, &a) in attrs.iter().enumerate() {
            base.set(a, axes[d][idx[d]]);
        }
        if let Some(i) = oracle_first_match(&rs, &base) {
            hit[i] = true;
        }
        points += 1;
        let mut d = 0;
        loop {
            if d == attrs.len() {
                break 'grid;
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }

    for (i, r) in report.iter().enumerate() {
        ensure(r.reachable == hit[i], || {
            format!("{}: analyzer says {}, grid says {}", r.rule_id, r.reachable, hit[i])
        })?;
        if r.reachable {
            let w = r.witness.as_ref().ok_or_else(|| format!("{}: no witness", r.rule_id))?;
            ensure(oracle_first_match(&rs, w) == Some(i), || format!("{}: witness not first", r.rule_id))?;
        }
    }
    let unreachable: Vec<&str> = report.iter().filter(|r| !r.reachable).map(|r| r.rule_id.as_str()).collect();
    let mut families: Vec<&str> = unreachable.iter().map(|id| rule_family(id)).collect();
    families.dedup();
    let rab_rules = ["R6", "R7", "R8"];
    ensure(families == rab_rules, || format!("unreachable families {families:?}"))?;
    for id in &unreachable {
        let rule = rs.rules().iter().find(|r| r.rule_id == *id).unwrap();
        ensure(rule.guard.iter().any(|a| a.attribute == Attribute::Rab), || format!("{id} has no RAB atom"))?;
    }
    Ok(format!(
        "unreachable branches {} (rules {}); {} grid points agree; witnesses for all {} reachable branches",
        unreachable.join(" "),
        families.join(" "),
        points,
        report.iter().filter(|r| r.reachable).count()
    ))
}

// 6. ARFF and CSV round trips; the 550-record split is 440/110.
fn io_round_trips() -> Outcome {
    let rs = default_ruleset::<f64>();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = GenSpec {
            mode: GenMode::Uniform { bounds: Bounds::broad() },
            n: rng.random_range(1..80),
            seed,
            label_with: rng.random_bool(0.5).then(|| rs.clone()),
        };
        let mut records = generate_records(&spec).map_err(|e| e.to_string())?;
        for (i, r) in records.iter_mut().enumerate() {
            if i % 7 == 3 {
                r.cell_id = format!("BSC {seed} 'cell' {i}");
            }
        }
        let d = Dataset::from_records("round trip", &records).map_err(|e| e.to_string())?;
        let text = write_arff(&d);
        let back: Dataset = parse_arff(&text).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(back == d, || format!("seed {seed}: ARFF structure changed"))?;
        ensure(write_arff(&back) == text, || format!("seed {seed}: ARFF text changed"))?;
        let csv = write_csv(&d).map_err(|e| e.to_string())?;
        let from_csv: Dataset = read_csv(csv.as_bytes(), true).map_err(|e| format!("seed {seed}: {e}"))?;
        let a = back.to_records().map_err(|e| e.to_string())?;
        let c = from_csv.to_records().map_err(|e| e.to_string())?;
        ensure(a == c && a == records, || format!("seed {seed}: CSV and ARFF values differ"))?;
    }
    let d = generate(&GenSpec::<f64> {
        mode: GenMode::Uniform { bounds: Bounds::broad() },
        n: 550,
        seed: 7,
        label_with: Some(rs),
    })
    .map_err(|e| e.to_string())?;
    let (tr, te) = split(
        &d,
        SplitSpec {
            train_fraction: 0.8,
            seed: 7,
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(tr.len() == 440 && te.len() == 110, || format!("split {}/{}", tr.len(), te.len()))?;
    let mut ids: Vec<String> = tr.rows.iter().chain(&te.rows).map(|r| format!("{:?}", r[0])).collect();
    ids.sort();
    ids.dedup();
    ensure(ids.len() == 550, || "split is not a partition".into())?;
    Ok("100 datasets round-trip through ARFF and CSV; 550 records split 440/110".into())
}

// 7. End-to-end pipeline conserves records and is reproducible.
fn pipeline_conservation() -> Outcome {
    let data = generate(&GenSpec::<f64> {
        mode: GenMode::Uniform { bounds: Bounds::broad() },
        n: 1000,
        seed: 77,
        label_with: None,
    })
    .map_err(|e| e.to_string())?;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let cfg = |dir: &std::path::Path| PipelineConfig::<f64> {
        labeling: Labeling::TrainedTree,
        learn_params: LearnParams::default(),
        cluster_params: ClusterParams {
            k: 9,
            seed: 77,
            ..Default::default()
        },
        output_dir: Some(dir.to_path_buf()),
    };
    let report = run_pipeline(&data, &cfg(dirs[0].path())).map_err(|e| e.to_string())?;
    run_pipeline(&data, &cfg(dirs[1].path())).map_err(|e| e.to_string())?;

    let sizes: usize = report.clusters.iter().map(|c| c.size).sum();
    ensure(sizes == 1000 && report.cells.len() == 1000, || format!("cluster sizes sum to {sizes}"))?;
    for c in &report.clusters {
        ensure(c.class_counts.total() == c.size, || format!("cluster {}: class counts != size", c.cluster))?;
    }

    // Independent replay: rule labels, tree relabel, clustering.
    let rs = default_ruleset::<f64>();
    let mut records = data.to_records().map_err(|e| e.to_string())?;
    for r in &mut records {
        r.diagnosis = Some(classify(r, &rs).unwrap());
    }
    let tree = train(&records, &LearnParams::default()).map_err(|e| e.to_string())?;
    for r in &mut records {
        r.diagnosis = Some(kpidiag::tree::predict(&tree, r).unwrap());
    }
    let model = cluster::fit(&records, &cfg(dirs[0].path()).cluster_params).map_err(|e| e.to_string())?;
    let mut optimised = [0usize; 9];
    for (i, (r, &a)) in records.iter().zip(&model.assignments).enumerate() {
        let cell = &report.cells[i];
        ensure(cell.cell_id == r.cell_id && cell.cluster == a, || format!("record {i}: cluster differs"))?;
        ensure(cell.diagnosis == r.diagnosis.unwrap().as_str(), || format!("record {i}: label differs"))?;
        if r.diagnosis == Some(DiagnosisClass::Optimised) {
            optimised[a] += 1;
        }
    }
    for c in &report.clusters {
        ensure(c.optimised_cell_count == optimised[c.cluster], || {
            format!("cluster {}: optimised count {} vs recount {}", c.cluster, c.optimised_cell_count, optimised[c.cluster])
        })?;
    }
    for name in [REPORT_JSON, REPORT_TEXT, REPORT_CSV] {
        let a = std::fs::read(dirs[0].path().join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name} differs between runs"))?;
    }
    Ok(format!(
        "1000 records over 9 clusters conserved; {} optimised cells recounted; reports byte-identical",
        optimised.iter().sum::<usize>()
    ))
}

// 8. KPI ratios are invariant to scaling the counters, and boundary
// counters raise the specified errors.
fn kpi_derivation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..1000 {
        let ca = rng.random_range(1..1_000_000u64);
        let cs = rng.random_range(1..=ca);
        let cf = rng.random_range(0..=cs);
        let sa = rng.random_range(1..1_000_000u64);
        let ss = rng.random_range(0..=sa);
        let m = rng.random_range(1..1000u64);
        let rec = |k: u64| CounterRecord::<f64> {
            cell_id: format!("c{i}"),
            ca: ca * k,
            cf: cf * k,
            cs: cs * k,
            te: 1.5,
            oe: 0.5,
            sdcch_attempts: sa * k,
            sdcch_successes: ss * k,
        };
        let a = derive_kpis(&rec(1)).map_err(|e| e.to_string())?;
        let b = derive_kpis(&rec(m)).map_err(|e| e.to_string())?;
        ensure(a.csr == b.csr && a.dcr == b.dcr && a.sdcchsr == b.sdcchsr, || {
            format!("record {i}: ratios change under scale {m}")
        })?;
        ensure((0.0..=100.0).contains(&a.csr) && (0.0..=100.0).contains(&a.sdcchsr), || {
            format!("record {i}: rate out of range")
        })?;
    }
    let base = CounterRecord::<f64> {
        cell_id: "edge".into(),
        ca: 100,
        cf: 9,
        cs: 90,
        te: 2.5,
        oe: 1.5,
        sdcch_attempts: 200,
        sdcch_successes: 190,
    };
    let zero_ca = CounterRecord { ca: 0, ..base.clone() };
    ensure(matches!(derive_kpis(&zero_ca), Err(Error::Derivation(ref c)) if c == "CA"), || {
        "CA = 0 did not raise a derivation error naming CA".into()
    })?;
    let over = CounterRecord { cs: 101, ..base.clone() };
    ensure(matches!(derive_kpis(&over), Err(Error::Validation(_))), || {
        "CS > CA did not raise a validation error".into()
    })?;
    let ok = derive_kpis(&base).map_err(|e| e.to_string())?;
    ensure(ok.csr == 90.0 && ok.dcr == 10.0 && ok.tr == 4.0 && ok.sdcchsr == 95.0, || {
        format!("reference record derived as {ok:?}")
    })?;
    Ok("1000 scaled counter records keep CSR, DCR, SDCCHSR; CA = 0 and CS > CA rejected".into())
}

type Criterion = (u8, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "rule transcription fidelity", Duration::from_secs(1), rule_fidelity),
        (2, "tree recovers rules", Duration::from_secs(10), tree_recovers_rules),
        (3, "metric oracle equivalence", Duration::from_secs(5), metric_oracle),
        (4, "k-means correctness", Duration::from_secs(30), kmeans_correctness),
        (5, "reachability report", Duration::from_secs(5), reachability_report),
        (6, "IO round trips", Duration::from_secs(5), io_round_trips),
        (7, "pipeline conservation", Duration::from_secs(15), pipeline_conservation),
        (8, "KPI derivation properties", Duration::from_secs(1), kpi_derivation),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {id} ({name}): PASS [{elapsed:.2?}] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL [{elapsed:.2?}] {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 8 acceptance criteria passed");
}
