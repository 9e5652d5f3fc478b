//! Re-records the replay fixtures of the bundled mini-corpus.
//!
//! A scripted transport stands in for the model service: it answers the ToC,
//! heading-insertion and narration prompts with hand-written responses, and
//! the client in record mode writes one fixture per distinct request. A
//! replay pass over the new fixtures then rewrites the golden outputs.
//!
//!     cargo run --example record_fixtures [corpus-dir]

use std::path::PathBuf;

use anyhow::{Context, Result};
use esgdoc::llm::{Mode, ModelClient, Transport, WireRequest};
use esgdoc::pipeline::{run_pipeline, Engine, PipelineConfig};

const CN_TOC: &str = r#"[
 {"title": "关于本报告", "level": 1, "page_hint": 3, "region_id": 0, "line": 1},
 {"title": "环境责任", "level": 1, "page_hint": 4, "region_id": 0, "line": 2},
 {"title": "应对气候变化", "level": 2, "page_hint": 4, "region_id": 0, "line": 3},
 {"title": "能源管理", "level": 2, "page_hint": 5, "region_id": 0, "line": 4},
 {"title": "社会责任", "level": 1, "page_hint": 6, "region_id": 0, "line": 5},
 {"title": "员工发展", "level": 2, "page_hint": 6, "region_id": 0, "line": 6},
 {"title": "公司治理", "level": 1, "page_hint": 7, "region_id": 0, "line": 7}
]"#;

// The last entry carries a wrong level on purpose: real answers are not perfect.
const HK_TOC: &str = r#"```json
[
 {"title": "About This Report", "level": 1, "page_hint": 2, "region_id": 0, "line": 1},
 {"title": "Environmental", "level": 1, "page_hint": 3, "region_id": 0, "line": 3},
 {"title": "Emissions", "level": 2, "page_hint": 3, "region_id": 0, "line": 5},
 {"title": "Use of Resources", "level": 2, "page_hint": 4, "region_id": 0, "line": 7},
 {"title": "Social", "level": 1, "page_hint": 5, "region_id": 1, "line": 2},
 {"title": "Employment and Labour Practices", "level": 2, "page_hint": 5, "region_id": 1, "line": 4},
 {"title": "Supply Chain Management", "level": 2, "page_hint": 6, "region_id": 1, "line": 6},
 {"title": "HKEX ESG Reporting Guide Index", "level": 2, "page_hint": 7, "region_id": 1, "line": 8}
]
```"#;

const US_TOC: &str = r#"[
 {"title": "Introduction", "level": 1, "page_hint": 3, "region_id": 0, "line": 1},
 {"title": "Climate Change and", "level": 1, "page_hint": null, "region_id": 0, "line": 2},
 {"title": "Carbon Neutrality", "level": null, "page_hint": 4, "region_id": 0, "line": 3},
 {"title": "Renewable Energy", "level": 2, "page_hint": 4, "region_id": 0, "line": 4},
 {"title": "Scope 3 Emissions", "level": 2, "page_hint": 5, "region_id": 0, "line": 5},
 {"title": "Supplier Engagement", "level": 3, "page_hint": 5, "region_id": 0, "line": 6},
 {"title": "People", "level": 1, "page_hint": 6, "region_id": 0, "line": 7},
 {"title": "Inclusion and Diversity", "level": 2, "page_hint": 6, "region_id": 0, "line": 8}
]"#;

const NARRATIONS: [(&str, &str); 8] = [
    ("cn_cover.png", "封面图片：远山与酒厂厂区的航拍照片，画面中央为报告标题。"),
    ("cn_emissions.png", "柱状图显示2021年至2023年温室气体排放总量逐年下降，2023年较上年下降8%。"),
    ("cn_governance.png", "组织架构图：董事会下设审计委员会、薪酬与考核委员会及战略与可持续发展委员会。"),
    ("hk_emissions.png", "Stacked bar chart of Scope 1 and Scope 2 emissions for 2022 and 2023; both scopes decline, total down 6%."),
    ("hk_energy.png", "{\"description\": \"Line chart of monthly electricity use in GWh, falling after the LED retrofit in the second quarter.\"}"),
    ("us_cover.png", "Cover photo of a campus rooftop covered with solar panels under a clear sky."),
    ("us_solar.png", "Photograph of the solar array that supplies the Reno data center with renewable electricity."),
    ("us_supply.png", "Map of supplier sites that committed to renewable electricity, clustered in East Asia."),
];

struct Scripted;

fn between<'a>(s: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = s.find(start)? + start.len();
    let to = s[from..].find(end)? + from;
    Some(&s[from..to])
}

impl Transport for Scripted {
    fn send(&self, req: &WireRequest) -> esgdoc::Result<String> {
        let p = &req.prompt;
        let reply = match req.template_id.as_str() {
            "rap.v1" if p.contains("关于本报告") => CN_TOC.to_string(),
            "rap.v1" if p.contains("About This Report") => HK_TOC.to_string(),
            "rap.v1" if p.contains("Introduction") => US_TOC.to_string(),
            "cip.v1" => match between(p, "Heading to place: ", " (level") {
                Some("员工发展") => r#"{"insert_before_block": "p6-b2"}"#.to_string(),
                _ => r#"{"insert_before_block": null}"#.to_string(),
            },
            "narration.v1" => {
                let k = between(p, "Target image: element [", "]").unwrap_or("0");
                let line = p.lines().find(|l| l.starts_with(&format!("[{k}] "))).unwrap_or("");
                NARRATIONS
                    .iter()
                    .find(|(name, _)| line.ends_with(name))
                    .map(|(_, text)| text.to_string())
                    // an empty answer is retried once, then the placeholder is used
                    .unwrap_or_default()
            }
            other => return Err(esgdoc::Error::Service(format!("no script for {other}"))),
        };
        Ok(reply)
    }
}

fn main() -> Result<()> {
    env_logger::init();
    let corpus = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus"));
    let fixtures = corpus.join("fixtures");
    std::fs::create_dir_all(&fixtures)?;
    for entry in std::fs::read_dir(&fixtures)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            std::fs::remove_file(&path)?;
        }
    }

    let cfg = PipelineConfig {
        mode: Mode::Record,
        fixtures: Some(fixtures.clone()),
        ..Default::default()
    };
    let client = ModelClient::new(Mode::Record, Some(Box::new(Scripted)), Some(fixtures.clone()));
    let engine = Engine::with_client(cfg.clone(), client)?;
    let scratch = tempfile::tempdir()?;
    let summary = run_pipeline(&engine, &corpus.join("layouts"), scratch.path()).context("recording run")?;
    for (path, err) in &summary.failures {
        eprintln!("FAILED {}: {err}", path.display());
    }
    let written = std::fs::read_dir(&fixtures)?.count();
    println!("{} report(s) recorded, {} fixture(s) in {}", summary.outputs.len(), written, fixtures.display());

    // golden outputs come from a clean replay pass over what was just recorded
    let expected = corpus.join("expected");
    if expected.exists() {
        std::fs::remove_dir_all(&expected)?;
    }
    let replay = Engine::new(PipelineConfig { mode: Mode::Replay, ..cfg })?;
    let summary = run_pipeline(&replay, &corpus.join("layouts"), &expected).context("replay run")?;
    // diagnostics carry wall-clock timings, so only outputs and ToCs are kept
    std::fs::remove_dir_all(expected.join("diagnostics"))?;
    println!("{} golden output(s) in {}", summary.outputs.len(), expected.display());
    Ok(())
}
