//! End-to-end runs over the bundled mini-corpus.

mod common;

use esgdoc::llm::ModelClient;
use esgdoc::model::{import_structured, DataType};
use esgdoc::pipeline::{run_eval, run_pipeline, Engine, PipelineConfig};
use esgdoc::toc::{toc_metrics, TocTree};

fn close(got: Option<f64>, want: f64) {
    let got = got.expect("metric defined");
    assert!((got - want).abs() < 5e-5, "{got} != {want}");
}

#[test]
fn replay_output_scores_against_gold() {
    let out = tempfile::tempdir().unwrap();
    let summary = run_pipeline(&common::replay_engine(2), &common::corpus().join("layouts"), out.path()).unwrap();
    assert!(summary.ok());
    let report = run_eval(out.path(), &common::corpus().join("gold")).unwrap();
    let names: Vec<&str> = report.reports.iter().map(|r| r.report.as_str()).collect();
    assert_eq!(names, ["0999.HK-2023", "600999.SH-2023", "EXMP-2022"]);

    // counts checked by hand against the gold files:
    // HK misses the index heading level and one narrated image text,
    // US files the women block under a heading the ToC lookup never placed
    let hk = &report.reports[0];
    assert_eq!((hk.parsing.true_positives, hk.parsing.predicted, hk.parsing.gold), (25, 27, 27));
    close(hk.tbta, 7.0 / 8.0);
    close(hk.toc.map(|t| t.hc), 7.0 / 8.0);
    close(hk.toc.map(|t| t.cc), 1.0);
    close(hk.rokt, 1.0);
    close(hk.rokt_pages, 1.0);
    close(hk.hla, 1.0);
    close(hk.labels.map(|l| l.macro_f1), 0.7284);

    let cn = &report.reports[1];
    assert_eq!((cn.parsing.true_positives, cn.parsing.predicted, cn.parsing.gold), (26, 26, 26));
    close(cn.tbta, 1.0);
    close(cn.toc.map(|t| t.rc), 1.0);
    close(cn.labels.map(|l| l.macro_f1), 0.7821);

    let us = &report.reports[2];
    assert_eq!((us.parsing.true_positives, us.parsing.predicted, us.parsing.gold), (24, 26, 26));
    close(us.tbta, 6.0 / 7.0);
    close(us.toc.map(|t| t.hc), 1.0);
    close(us.labels.map(|l| l.macro_f1), 0.6933);

    close(Some(report.aggregate.f1), 75.0 / 79.0);
    close(report.aggregate.tbta, (7.0 / 8.0 + 1.0 + 6.0 / 7.0) / 3.0);
    close(report.aggregate.hc, (7.0 / 8.0 + 2.0) / 3.0);
    assert!(report.to_table().lines().last().unwrap().starts_with("ALL"));
}

#[test]
fn extracted_tocs_against_gold_tocs() {
    for name in ["0999.HK-2023", "600999.SH-2023", "EXMP-2022"] {
        let read = |sub: &str| -> TocTree {
            let raw = std::fs::read(common::corpus().join(sub).join("toc").join(format!("{name}.json"))).unwrap();
            serde_json::from_slice(&raw).unwrap()
        };
        let s = toc_metrics(&read("expected"), &read("gold")).unwrap();
        assert_eq!((s.cc, s.rc), (1.0, 1.0), "{name}");
        let want_hc = if name.starts_with("0999") { 7.0 / 8.0 } else { 1.0 };
        assert_eq!(s.hc, want_hc, "{name}");
    }
}

#[test]
fn offline_run_degrades_without_failing() {
    let out = tempfile::tempdir().unwrap();
    let engine = Engine::with_client(PipelineConfig::default(), ModelClient::offline()).unwrap();
    let summary = run_pipeline(&engine, &common::corpus().join("layouts"), out.path()).unwrap();
    assert!(summary.ok());
    assert_eq!(summary.outputs.len(), 3);
    for path in &summary.outputs {
        let doc = import_structured(&std::fs::read(path).unwrap()).unwrap();
        let images: Vec<_> = doc.blocks().filter(|(_, b)| b.data_type == DataType::Image).collect();
        assert!(!images.is_empty());
        for (_, b) in images {
            assert!(b.data.starts_with("[image: ") && b.data.ends_with(", no narration available]"), "{}", b.data);
        }
    }
    // the ToC falls back to page parsing, so the fallback scores stay measurable
    let report = run_eval(out.path(), &common::corpus().join("gold")).unwrap();
    assert!(report.aggregate.tbta.unwrap() > 0.0);
}

#[test]
fn a_corrupt_report_does_not_stop_the_others() {
    let input = tempfile::tempdir().unwrap();
    for name in ["cn_600999_2023.json", "us_exmp_2022.json"] {
        std::fs::copy(common::corpus().join("layouts").join(name), input.path().join(name)).unwrap();
    }
    std::fs::write(input.path().join("broken.json"), b"{\"pages\": [").unwrap();
    let out = tempfile::tempdir().unwrap();
    let engine = Engine::with_client(PipelineConfig::default(), ModelClient::offline()).unwrap();
    let summary = run_pipeline(&engine, input.path(), out.path()).unwrap();
    assert_eq!(summary.outputs.len(), 2);
    assert_eq!(summary.failures.len(), 1);
    assert!(summary.failures[0].0.ends_with("broken.json"));
    assert!(!summary.ok());
}
