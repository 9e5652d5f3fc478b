//! The command-line tool, driven as a subprocess.

mod common;

use std::path::Path;
use std::process::{Command, Output};

fn esgdoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esgdoc"))
        .args(args)
        .env_remove("MODEL_ENDPOINT")
        .env_remove("MODEL_API_KEY")
        .env_remove("MODEL_MODE")
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn esgdoc")
}

fn ok(args: &[&str]) -> Output {
    let out = esgdoc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stages_compose_to_the_fused_run() {
    let corpus = common::corpus();
    let layouts = corpus.join("layouts");
    let fixtures = corpus.join("fixtures");
    let replay = ["--mode", "replay", "--fixtures", s(&fixtures)];
    let t = tempfile::tempdir().unwrap();
    let f = |name: &str| t.path().join(name);

    for (layout, report) in [
        ("cn_600999_2023.json", "600999.SH-2023.json"),
        ("hk_0999_2023.json", "0999.HK-2023.json"),
        ("us_exmp_2022.json", "EXMP-2022.json"),
    ] {
        ok(&["ingest", "--input", s(&layouts.join(layout)), "--output", s(&f("blocks.json"))]);
        ok(&["order", "--input", s(&f("blocks.json")), "--output", s(&f("ordered.json"))]);
        ok(&[&replay[..], &["toc", "--input", s(&f("ordered.json")), "--output", s(&f("toc.json")), "--assets", s(&layouts)]].concat());
        ok(&[
            &replay[..],
            &["align", "--toc", s(&f("toc.json")), "--ordered", s(&f("ordered.json")), "--output", s(&f("aligned.json"))],
        ]
        .concat());
        ok(&[&replay[..], &["narrate", "--input", s(&f("aligned.json")), "--output", s(&f("narrated.json")), "--assets", s(&layouts)]].concat());
        ok(&["label", "--input", s(&f("narrated.json")), "--output", s(&f("labeled.json"))]);

        let want = std::fs::read(corpus.join("expected").join(report)).unwrap();
        assert_eq!(std::fs::read(f("labeled.json")).unwrap(), want, "{layout}");
        let want_toc = std::fs::read(corpus.join("expected/toc").join(report)).unwrap();
        assert_eq!(std::fs::read(f("toc.json")).unwrap(), want_toc, "{layout}");

        let out = ok(&["export", "--input", s(&f("labeled.json")), "--out-dir", s(&f("export"))]);
        let written = String::from_utf8(out.stdout).unwrap();
        assert!(written.trim_end().ends_with(report), "{written}");
        assert_eq!(std::fs::read(f("export").join(report)).unwrap(), want);
    }
}

#[test]
fn run_then_eval() {
    let corpus = common::corpus();
    let out = tempfile::tempdir().unwrap();
    let run = ok(&[
        "--mode",
        "replay",
        "--fixtures",
        s(&corpus.join("fixtures")),
        "--jobs",
        "2",
        "run",
        "--input",
        s(&corpus.join("layouts")),
        "--output",
        s(out.path()),
    ]);
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "3 report(s) written, 0 failed");
    assert!(out.path().join("diagnostics").is_dir());

    let report = out.path().join("eval.json");
    let eval = ok(&["eval", "--predicted", s(out.path()), "--gold", s(&corpus.join("gold")), "--json", s(&report)]);
    let table = String::from_utf8(eval.stdout).unwrap();
    let last = table.lines().last().unwrap();
    assert!(last.starts_with("ALL") && last.contains("0.9494"), "{table}");
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 3);
}

#[test]
fn corrupt_input_fails_the_run_but_writes_the_rest() {
    let input = tempfile::tempdir().unwrap();
    std::fs::copy(common::corpus().join("layouts/us_exmp_2022.json"), input.path().join("us.json")).unwrap();
    std::fs::write(input.path().join("bad.json"), "not json").unwrap();
    let out = tempfile::tempdir().unwrap();
    let res = esgdoc(&["run", "--input", s(input.path()), "--output", s(out.path())]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("1 report(s) written, 1 failed"));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bad.json"));
    assert!(out.path().join("EXMP-2022.json").is_file());
}

#[test]
fn eval_rejects_mismatched_sets() {
    let corpus = common::corpus();
    let gold = tempfile::tempdir().unwrap();
    std::fs::copy(corpus.join("gold/EXMP-2022.json"), gold.path().join("EXMP-2022.json")).unwrap();
    let res = esgdoc(&["eval", "--predicted", s(&corpus.join("expected")), "--gold", s(gold.path())]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("0999.HK-2023"), "{err}");
}

#[test]
fn bad_options_are_rejected() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("c.toml");
    std::fs::write(&cfg, "tau = 1.5\n").unwrap();
    let res = esgdoc(&["--config", s(&cfg), "run", "--input", s(t.path()), "--output", s(t.path())]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("tau"));

    let res = esgdoc(&["--mode", "replay", "run", "--input", s(t.path()), "--output", s(t.path())]);
    assert!(!res.status.success(), "replay without fixtures must fail");
}

#[test]
fn help_lists_config_keys() {
    let out = ok(&["--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["tau", "fuzzy_threshold", "theta", "radius", "toc_mode", "ESGDOC_"] {
        assert!(text.contains(key), "{key}");
    }
}
