use kpidiag::cluster::ClusterParams;
use kpidiag::dataset::Dataset;
use kpidiag::kpi::{DiagnosisClass, KpiRecord};
use kpidiag::pipeline::{kpi_group_summary, run_pipeline, Labeling, PipelineConfig};
use kpidiag::rules::{default_ruleset, Bounds};
use kpidiag::synth::{generate, GenMode, GenSpec};

fn uniform(n: usize, seed: u64) -> Dataset {
    generate(&GenSpec {
        mode: GenMode::Uniform { bounds: Bounds::broad() },
        n,
        seed,
        label_with: None,
    })
    .unwrap()
}

fn config(k: usize) -> PipelineConfig {
    PipelineConfig {
        cluster_params: ClusterParams {
            k,
            seed: 5,
            restarts: 3,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn rule_labeling_conserves_records() {
    let report = run_pipeline(&uniform(1000, 1), &config(9)).unwrap();
    assert_eq!(report.clusters.iter().map(|c| c.size).sum::<usize>(), 1000);
    assert_eq!(report.class_totals.total(), 1000);
    let mut pairs = std::collections::BTreeMap::new();
    for cell in &report.cells {
        *pairs.entry((cell.cluster, cell.diagnosis)).or_insert(0usize) += 1;
    }
    for c in &report.clusters {
        for d in DiagnosisClass::ALL {
            assert_eq!(pairs.get(&(c.cluster, d.as_str())).copied().unwrap_or(0), c.class_counts.get(d));
        }
        assert_eq!(c.warning, !c.missing_groups.is_empty());
    }
}

#[test]
fn all_optimised_input() {
    let recs: Vec<KpiRecord> = (0..60)
        .map(|i| {
            let mut r = KpiRecord::from_values(format!("c{i}"), [0.0; 8]);
            r.handover_success_rate = 72.0 + i as f64 * 0.4;
            r.tch_call_drop_rate = 1.5 + (i % 7) as f64;
            r.rab = (i % 11) as f64;
            r
        })
        .collect();
    let data = Dataset::from_records("opt", &recs).unwrap();
    let report = run_pipeline(&data, &config(4)).unwrap();
    for c in &report.clusters {
        assert_eq!(c.optimised_cell_count, c.size);
        assert_eq!(c.missing_groups, vec!["GCA", "GCB", "GCC"]);
    }
}

#[test]
fn pipeline_is_idempotent() {
    let data = uniform(300, 2);
    let cfg = PipelineConfig {
        labeling: Labeling::TrainedTree,
        ..config(5)
    };
    let a = run_pipeline(&data, &cfg).unwrap();
    let b = run_pipeline(&data, &cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_text(), b.to_text());
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.tree.is_some());
    assert!(a.labeling.contains("default rules"));
}

#[test]
fn trained_tree_uses_existing_labels() {
    let rs = default_ruleset();
    let labeled = generate(&GenSpec {
        mode: GenMode::Uniform { bounds: Bounds::broad() },
        n: 400,
        seed: 9,
        label_with: Some(rs),
    })
    .unwrap();
    let cfg = PipelineConfig {
        labeling: Labeling::TrainedTree,
        ..config(3)
    };
    let report = run_pipeline(&labeled, &cfg).unwrap();
    assert!(report.labeling.contains("input labels"));
}

#[test]
fn summary_means_match_recomputation() {
    let recs = kpidiag::synth::generate_records::<f64>(&GenSpec {
        mode: GenMode::Uniform { bounds: Bounds::broad() },
        n: 500,
        seed: 4,
        label_with: Some(default_ruleset()),
    })
    .unwrap();
    let summary = kpi_group_summary(&recs);
    for s in &summary {
        let members: Vec<&KpiRecord> = recs.iter().filter(|r| r.diagnosis.map(|d| d.as_str()) == Some(s.class)).collect();
        assert_eq!(s.count, members.len());
        if members.is_empty() {
            assert!(s.stats.iter().all(|st| st.mean.is_none()));
            continue;
        }
        let mut total = 0.0;
        for r in &members {
            total += r.handover_success_rate;
        }
        let mean = total / members.len() as f64;
        let got = s.stats.iter().find(|st| st.kpi == "handover_success").unwrap().mean.unwrap();
        assert!((got - mean).abs() < 1e-9);
    }
}

#[test]
fn missing_attribute_fails_with_stage() {
    let mut d = uniform(20, 3);
    d.attributes.remove(4);
    for row in &mut d.rows {
        row.remove(4);
    }
    let err = run_pipeline(&d, &config(2)).unwrap_err();
    assert!(err.to_string().contains("label"));
    assert!(err.root().to_string().contains("rab"));
}
