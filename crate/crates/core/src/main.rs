use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use esgdoc::llm::{write_atomic, Mode, ModelClient};
use esgdoc::model::{export_structured, import_structured, ingest_layout, LayoutDocument};
use esgdoc::pipeline::{output_name, run_eval, run_pipeline, AlignedDocument, Engine, PipelineConfig};
use esgdoc::toc::TocTree;

const CONFIG_HELP: &str = "\
Config file keys (flat TOML) and defaults; each can be overridden with ESGDOC_<KEY>:
  tau = 0.3                succession threshold, [0, 1)
  fuzzy_threshold = 0.8    heading similarity for fuzzy matches, (0, 1]
  theta = 0.5              label decision threshold, (0, 1)
  lambda = 0.1             hierarchy penalty weight of the training objective, >= 0
  radius = 3               narration context radius in blocks, <= 50
  embedding_dim = 64       content embedding width
  embedder = \"hash\"        hash | service:<url>
  scorer = \"geometric\"     geometric | service:<url>
  label_provider = \"lexicon\"  lexicon | classifier | service:<url>
  toc_mode = \"rap\"         rap | fallback
  cip = true               model-guided heading insertion
  mode = \"live\"            live | replay | record
  endpoint, api_key        model service (also MODEL_ENDPOINT, MODEL_API_KEY, MODEL_MODE)
  fixtures                 fixture directory for replay/record
  timeout_secs = 60
  instruction              file replacing the narration instruction
  input, output            defaults for `run`
  jobs = 0                 worker threads, 0 = all cores";

#[derive(Parser)]
#[command(name = "esgdoc", version, about = "Structure reconstruction for layout-analyzed ESG reports", after_help = CONFIG_HELP)]
struct Cli {
    /// Flat TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the report pool (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Model access mode.
    #[arg(long, global = true, value_parser = ["live", "replay", "record"])]
    mode: Option<String>,
    /// Fixture directory used by replay and record modes.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// Input file.
    #[arg(long)]
    input: PathBuf,
    /// Output file.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Narrator {
    /// Use the model service configured by --mode.
    Service,
    /// Serve narrations from the fixture store only.
    Replay,
    /// No model calls; every image gets the placeholder description.
    Placeholder,
}

#[derive(Subcommand)]
enum Command {
    /// Layout JSON -> validated block list.
    Ingest(Io),
    /// Block list -> block list in reading order.
    Order {
        #[command(flatten)]
        io: Io,
        /// Succession threshold [default: 0.3].
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Ordered block list -> ToC tree.
    Toc {
        #[command(flatten)]
        io: Io,
        /// rap | fallback [default: rap].
        #[arg(long)]
        toc_mode: Option<String>,
        /// Directory page images are resolved against [default: input's directory].
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// ToC tree + ordered blocks -> heading tree.
    Align {
        #[arg(long)]
        toc: PathBuf,
        #[arg(long)]
        ordered: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Similarity needed for a fuzzy match [default: 0.8].
        #[arg(long)]
        fuzzy_threshold: Option<f64>,
        /// Model-guided insertion of unmatched headings [default: on].
        #[arg(long, value_enum)]
        cip: Option<OnOff>,
    },
    /// Aligned document -> aligned document with image descriptions.
    Narrate {
        #[command(flatten)]
        io: Io,
        /// Neighbours on each side of an image [default: 3].
        #[arg(long)]
        radius: Option<usize>,
        /// Where descriptions come from [default: service].
        #[arg(long, value_enum)]
        narrator: Option<Narrator>,
        /// Directory image references are resolved against [default: input's directory].
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Narrated document -> labeled output record.
    Label {
        #[command(flatten)]
        io: Io,
        /// Label decision threshold [default: 0.5].
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Labeled output record -> canonical `<stock_code>-<year>.json` in a directory.
    Export {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// All stages on every `*.json` layout file of a directory.
    Run {
        /// Input directory or file [default: config `input`].
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory [default: config `output`].
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Scores a predicted output directory against a gold directory.
    Eval {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&raw).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}

fn parent_dir(p: &Path) -> Option<PathBuf> {
    p.parent().map(Path::to_path_buf)
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(m) = &cli.mode {
        cfg.mode = m.parse()?;
    }
    if let Some(f) = &cli.fixtures {
        cfg.fixtures = Some(f.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = config(&cli)?;
    match cli.command {
        Command::Ingest(io) => {
            let raw = std::fs::read(&io.input).with_context(|| format!("reading {}", io.input.display()))?;
            let doc = ingest_layout(&raw)?;
            write_json(&io.output, &doc)?;
        }
        Command::Order { io, tau } => {
            if let Some(t) = tau {
                cfg.tau = t;
            }
            let engine = Engine::with_client(cfg, ModelClient::offline())?;
            let doc: LayoutDocument = read_json(&io.input)?;
            doc.validate()?;
            let (ordered, stats) = engine.order(&doc)?;
            log::info!("{} edges kept, {} removed to break cycles", stats.edges, stats.removed_edges);
            write_json(&io.output, &ordered)?;
        }
        Command::Toc { io, toc_mode, assets } => {
            if let Some(m) = toc_mode {
                cfg.toc_mode = m;
            }
            let engine = Engine::new(cfg)?;
            let doc: LayoutDocument = read_json(&io.input)?;
            let assets = assets.or_else(|| parent_dir(&io.input));
            let out = engine.toc(&doc, assets.as_deref())?;
            for n in &out.notes {
                log::warn!("{n}");
            }
            out.tree.validate()?;
            write_json(&io.output, &out.tree)?;
        }
        Command::Align {
            toc,
            ordered,
            output,
            fuzzy_threshold,
            cip,
        } => {
            if let Some(f) = fuzzy_threshold {
                cfg.fuzzy_threshold = f;
            }
            if let Some(c) = cip {
                cfg.cip = matches!(c, OnOff::On);
            }
            let engine = Engine::new(cfg)?;
            let toc: TocTree = read_json(&toc)?;
            toc.validate()?;
            let doc: LayoutDocument = read_json(&ordered)?;
            doc.validate()?;
            let aligned = engine.align(doc, toc)?;
            for n in &aligned.notes {
                log::warn!("{n}");
            }
            write_json(&output, &aligned)?;
        }
        Command::Narrate {
            io,
            radius,
            narrator,
            assets,
        } => {
            if let Some(r) = radius {
                cfg.radius = r;
            }
            let engine = match narrator.unwrap_or(Narrator::Service) {
                Narrator::Service => Engine::new(cfg)?,
                Narrator::Replay => {
                    let store = cfg.fixtures.clone().context("--narrator replay needs --fixtures")?;
                    cfg.mode = Mode::Replay;
                    Engine::with_client(cfg, ModelClient::replay(store))?
                }
                Narrator::Placeholder => Engine::with_client(cfg, ModelClient::offline())?,
            };
            let mut aligned: AlignedDocument = read_json(&io.input)?;
            let assets = assets.or_else(|| parent_dir(&io.input));
            let report = engine.narrate(&mut aligned, assets.as_deref())?;
            log::info!("{} images, {} placeholders", report.images, report.fallbacks);
            write_json(&io.output, &aligned)?;
        }
        Command::Label { io, theta } => {
            if let Some(t) = theta {
                cfg.theta = t;
            }
            let engine = Engine::with_client(cfg, ModelClient::offline())?;
            let aligned: AlignedDocument = read_json(&io.input)?;
            let doc = engine.label(&aligned)?;
            write_atomic(&io.output, &export_structured(&doc)?)?;
        }
        Command::Export { input, out_dir } => {
            let raw = std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let doc = import_structured(&raw)?;
            std::fs::create_dir_all(&out_dir)?;
            let out = out_dir.join(output_name(&doc, &input));
            write_atomic(&out, &export_structured(&doc)?)?;
            println!("{}", out.display());
        }
        Command::Run { input, output } => {
            let input = input.or_else(|| cfg.input.clone()).context("no input (use --input or config `input`)")?;
            let output = output
                .or_else(|| cfg.output.clone())
                .context("no output (use --output or config `output`)")?;
            let engine = Engine::new(cfg)?;
            let summary = run_pipeline(&engine, &input, &output)?;
            for (path, err) in &summary.failures {
                eprintln!("FAILED {}: {err}", path.display());
            }
            println!("{} report(s) written, {} failed", summary.outputs.len(), summary.failures.len());
            if !summary.ok() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Eval { predicted, gold, json } => {
            if !predicted.is_dir() || !gold.is_dir() {
                bail!("--predicted and --gold must be directories");
            }
            let report = run_eval(&predicted, &gold)?;
            print!("{}", report.to_table());
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
