use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::list_inputs;
use crate::align::tbta;
use crate::error::{Error, Result};
use crate::labeling::{hla, label_macro_f1, multilevel_f1, stored_selections, LabelHierarchy, Level, MultiLevelF1};
use crate::model::{import_structured, BlockId, BlockRecord, StructuredDocument};
use crate::reading_order::rokt;
use crate::toc::{toc_metrics, TocScores, TocTree};

/// Characters of normalized block data compared when matching blocks.
pub const DATA_PREFIX_CHARS: usize = 100;

/// Content identity of a block: data type and normalized data prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockKey {
    pub data_type: &'static str,
    pub data: String,
}

impl BlockKey {
    pub fn of(b: &BlockRecord) -> Self {
        let collapsed: String = b.data.nfc().collect::<String>().split_whitespace().collect::<Vec<_>>().join(" ");
        BlockKey {
            data_type: b.data_type.as_str(),
            data: collapsed.chars().take(DATA_PREFIX_CHARS).collect(),
        }
    }
}

/// Pairs predicted and gold blocks with equal content keys; the k-th
/// occurrence of a key on one side pairs with the k-th on the other.
/// Returns `(predicted id, gold id)` in gold order.
pub fn match_blocks(predicted: &StructuredDocument, gold: &StructuredDocument) -> Vec<(BlockId, BlockId)> {
    let mut pool: HashMap<BlockKey, std::collections::VecDeque<BlockId>> = HashMap::new();
    for (id, b) in predicted.blocks() {
        pool.entry(BlockKey::of(b)).or_default().push_back(id);
    }
    gold.blocks()
        .filter_map(|(gid, b)| {
            pool.get_mut(&BlockKey::of(b))
                .and_then(|q| q.pop_front())
                .map(|pid| (pid, gid))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsingCounts {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl ParsingCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.gold)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

/// A predicted block is a true positive when a not yet claimed gold block has
/// the same data type, normalized data prefix and heading path.
pub fn parsing_counts(predicted: &StructuredDocument, gold: &StructuredDocument) -> ParsingCounts {
    let key = |b: &BlockRecord| (BlockKey::of(b), b.heading_columns());
    let mut available: HashMap<_, usize> = HashMap::new();
    for (_, b) in gold.blocks() {
        *available.entry(key(b)).or_insert(0) += 1;
    }
    let mut tp = 0;
    for (_, b) in predicted.blocks() {
        if let Some(n) = available.get_mut(&key(b)).filter(|n| **n > 0) {
            *n -= 1;
            tp += 1;
        }
    }
    ParsingCounts {
        true_positives: tp,
        predicted: predicted.block_count(),
        gold: gold.block_count(),
    }
}

fn page_of(id: &BlockId) -> &str {
    id.as_str().split('-').next().unwrap_or_default()
}

/// Kendall tau over every matched block of the document.
fn document_rokt(
    pairs: &[(BlockId, BlockId)],
    predicted: &StructuredDocument,
    gold: &StructuredDocument,
) -> Result<Option<f64>> {
    if pairs.len() < 2 {
        return Ok(None);
    }
    let rank = |d: &StructuredDocument| -> HashMap<BlockId, usize> { d.blocks().enumerate().map(|(k, (id, _))| (id, k)).collect() };
    let (pred_rank, gold_rank) = (rank(predicted), rank(gold));
    let mut gold_seq: Vec<&BlockId> = pairs.iter().map(|(_, g)| g).collect();
    gold_seq.sort_by_key(|g| gold_rank[*g]);
    let mut by_pred: Vec<&(BlockId, BlockId)> = pairs.iter().collect();
    by_pred.sort_by_key(|(p, _)| pred_rank[p]);
    let pred_seq: Vec<&BlockId> = by_pred.iter().map(|(_, g)| g).collect();
    Ok(Some(rokt(&pred_seq, &gold_seq)?))
}

/// Mean per-page Kendall tau over blocks matched on the same page; pages
/// with fewer than two such blocks are skipped.
fn page_rokt(pairs: &[(BlockId, BlockId)], predicted: &StructuredDocument) -> Result<Option<f64>> {
    let pred_rank: HashMap<BlockId, usize> = predicted.blocks().enumerate().map(|(k, (id, _))| (id, k)).collect();
    let mut by_page: BTreeMap<&str, Vec<(usize, &BlockId)>> = BTreeMap::new();
    for (p, g) in pairs {
        if page_of(p) == page_of(g) {
            by_page.entry(page_of(g)).or_default().push((pred_rank[p], g));
        }
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (_, members) in by_page {
        if members.len() < 2 {
            continue;
        }
        let gold_seq: Vec<&BlockId> = members.iter().map(|(_, g)| *g).collect();
        let mut pred = members.clone();
        pred.sort_by_key(|(r, _)| *r);
        let pred_seq: Vec<&BlockId> = pred.iter().map(|(_, g)| *g).collect();
        sum += rokt(&pred_seq, &gold_seq)?;
        n += 1;
    }
    Ok((n > 0).then(|| sum / n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetrics {
    pub report: String,
    pub parsing: ParsingCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Kendall tau over the whole document.
    pub rokt: Option<f64>,
    /// Mean of per-page Kendall tau.
    pub rokt_pages: Option<f64>,
    pub tbta: Option<f64>,
    pub toc: Option<TocScores>,
    pub hla: Option<f64>,
    pub labels: Option<MultiLevelF1>,
    pub gri_macro_f1: Option<f64>,
}

/// Every metric for one report. `toc` holds the predicted and gold ToC when both exist.
pub fn report_metrics(
    report: &str,
    predicted: &StructuredDocument,
    gold: &StructuredDocument,
    toc: Option<(&TocTree, &TocTree)>,
    h: &LabelHierarchy,
) -> Result<ReportMetrics> {
    let parsing = parsing_counts(predicted, gold);
    let pairs = match_blocks(predicted, gold);
    let pred_sel = stored_selections(predicted, h);
    let gold_sel = stored_selections(gold, h);
    let (labels, gri_macro_f1) = if pairs.is_empty() {
        (None, None)
    } else {
        let p: BTreeMap<BlockId, _> = pairs.iter().map(|(pid, gid)| (gid.clone(), pred_sel[pid].clone())).collect();
        let g: BTreeMap<BlockId, _> = pairs.iter().map(|(_, gid)| (gid.clone(), gold_sel[gid].clone())).collect();
        (Some(multilevel_f1(&p, &g)?), Some(label_macro_f1(&p, &g, Level::Gri)?))
    };
    let all_pred: Vec<_> = pred_sel.into_values().collect();
    Ok(ReportMetrics {
        report: report.to_string(),
        precision: parsing.precision(),
        recall: parsing.recall(),
        f1: parsing.f1(),
        parsing,
        rokt: document_rokt(&pairs, predicted, gold)?,
        rokt_pages: page_rokt(&pairs, predicted)?,
        tbta: tbta(&predicted.tree, &gold.tree).ok(),
        toc: toc.map(|(p, g)| toc_metrics(p, g)).transpose().unwrap_or(None),
        hla: hla(&all_pred, h).ok(),
        labels,
        gri_macro_f1,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    /// Micro-averaged block counts over all reports.
    pub parsing: ParsingCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Means over reports where the metric is defined.
    pub rokt: Option<f64>,
    pub rokt_pages: Option<f64>,
    pub tbta: Option<f64>,
    pub cc: Option<f64>,
    pub rc: Option<f64>,
    pub hc: Option<f64>,
    pub hla: Option<f64>,
    pub category_f1: Option<f64>,
    pub gri_f1: Option<f64>,
    pub sentiment_f1: Option<f64>,
    pub macro_f1: Option<f64>,
    pub gri_macro_f1: Option<f64>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub reports: Vec<ReportMetrics>,
    pub aggregate: MetricSummary,
}

impl EvalReport {
    pub fn from_reports(reports: Vec<ReportMetrics>) -> Self {
        let mut parsing = ParsingCounts::default();
        for r in &reports {
            parsing.true_positives += r.parsing.true_positives;
            parsing.predicted += r.parsing.predicted;
            parsing.gold += r.parsing.gold;
        }
        let rs = &reports;
        let aggregate = MetricSummary {
            precision: parsing.precision(),
            recall: parsing.recall(),
            f1: parsing.f1(),
            parsing,
            rokt: mean(rs.iter().map(|r| r.rokt)),
            rokt_pages: mean(rs.iter().map(|r| r.rokt_pages)),
            tbta: mean(rs.iter().map(|r| r.tbta)),
            cc: mean(rs.iter().map(|r| r.toc.map(|t| t.cc))),
            rc: mean(rs.iter().map(|r| r.toc.map(|t| t.rc))),
            hc: mean(rs.iter().map(|r| r.toc.map(|t| t.hc))),
            hla: mean(rs.iter().map(|r| r.hla)),
            category_f1: mean(rs.iter().map(|r| r.labels.map(|l| l.category))),
            gri_f1: mean(rs.iter().map(|r| r.labels.map(|l| l.gri))),
            sentiment_f1: mean(rs.iter().map(|r| r.labels.map(|l| l.sentiment))),
            macro_f1: mean(rs.iter().map(|r| r.labels.map(|l| l.macro_f1))),
            gri_macro_f1: mean(rs.iter().map(|r| r.gri_macro_f1)),
        };
        EvalReport { reports, aggregate }
    }

    /// Aligned plain-text table, one row per report plus the aggregate.
    pub fn to_table(&self) -> String {
        let cols = ["report", "P", "R", "F1", "ROKT", "TBTA", "CC", "RC", "HC", "HLA", "macroF1"];
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let mut rows: Vec<Vec<String>> = self
            .reports
            .iter()
            .map(|r| {
                vec![
                    r.report.clone(),
                    fmt(Some(r.precision)),
                    fmt(Some(r.recall)),
                    fmt(Some(r.f1)),
                    fmt(r.rokt),
                    fmt(r.tbta),
                    fmt(r.toc.map(|t| t.cc)),
                    fmt(r.toc.map(|t| t.rc)),
                    fmt(r.toc.map(|t| t.hc)),
                    fmt(r.hla),
                    fmt(r.labels.map(|l| l.macro_f1)),
                ]
            })
            .collect();
        let a = &self.aggregate;
        rows.push(vec![
            "ALL".into(),
            fmt(Some(a.precision)),
            fmt(Some(a.recall)),
            fmt(Some(a.f1)),
            fmt(a.rokt),
            fmt(a.tbta),
            fmt(a.cc),
            fmt(a.rc),
            fmt(a.hc),
            fmt(a.hla),
            fmt(a.macro_f1),
        ]);
        let widths: Vec<usize> = (0..cols.len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).chain([cols[c].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let mut line = |cells: Vec<String>| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(cols.iter().map(|s| s.to_string()).collect());
        for r in rows {
            line(r);
        }
        out
    }
}

fn stems(files: &[std::path::PathBuf]) -> BTreeSet<String> {
    files.iter().map(|p| super::report_stem(p)).collect()
}

fn read_toc(path: &Path) -> Result<Option<TocTree>> {
    if !path.exists() {
        return Ok(None);
    }
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Some(serde_json::from_slice(&raw)?))
}

/// Compares every `<name>.json` in `predicted_dir` with the same file in
/// `gold_dir`. ToC metrics use `toc/<name>.json` when both sides have it.
pub fn run_eval(predicted_dir: &Path, gold_dir: &Path) -> Result<EvalReport> {
    let pred_files = list_inputs(predicted_dir)?;
    let gold_files = list_inputs(gold_dir)?;
    let (p, g) = (stems(&pred_files), stems(&gold_files));
    if p != g {
        return Err(Error::ElementMismatch(format!(
            "reports only predicted: {:?}; only in gold: {:?}",
            p.difference(&g).collect::<Vec<_>>(),
            g.difference(&p).collect::<Vec<_>>()
        )));
    }
    let h = LabelHierarchy::builtin();
    let mut reports = Vec::new();
    for name in &g {
        let file = format!("{name}.json");
        let read = |dir: &Path| -> Result<StructuredDocument> {
            let path = dir.join(&file);
            let raw = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            import_structured(&raw)
        };
        let (pred, gold) = (read(predicted_dir)?, read(gold_dir)?);
        let pt = read_toc(&predicted_dir.join("toc").join(&file))?;
        let gt = read_toc(&gold_dir.join("toc").join(&file))?;
        let toc = pt.as_ref().zip(gt.as_ref());
        reports.push(report_metrics(name, &pred, &gold, toc, h)?);
    }
    Ok(EvalReport::from_reports(reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DataType, PageRecord};

    /// Five blocks on one page: h1 "Intro" over b0..b1, h1 "Energy" over b2..b4.
    fn doc(paths: [(&str, &str); 5]) -> StructuredDocument {
        let mut page = PageRecord::new(1);
        for (k, (h1, data)) in paths.iter().enumerate() {
            let mut b = BlockRecord::new(DataType::Text, *data, k as u32);
            b.h1 = h1.to_string();
            page.blocks.push(b);
        }
        let mut d = StructuredDocument {
            metadata: Default::default(),
            pages: vec![page],
            tree: Default::default(),
        };
        d.rebuild_tree().unwrap();
        d
    }

    fn gold() -> StructuredDocument {
        doc([
            ("Intro", "Intro"),
            ("Intro", "Welcome text"),
            ("Energy", "Energy"),
            ("Energy", "Power use fell"),
            ("Energy", "Solar grew"),
        ])
    }

    #[test]
    fn identical_is_perfect() {
        let g = gold();
        let m = report_metrics("x", &g, &g, None, LabelHierarchy::builtin()).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        assert_eq!((m.rokt, m.tbta), (Some(1.0), Some(1.0)));
    }

    #[test]
    fn missing_heading() {
        // the "Energy" heading was never found: its blocks stay under "Intro"
        let p = doc([
            ("Intro", "Intro"),
            ("Intro", "Welcome text"),
            ("Intro", "Energy"),
            ("Intro", "Power use fell"),
            ("Intro", "Solar grew"),
        ]);
        let m = report_metrics("x", &p, &gold(), None, LabelHierarchy::builtin()).unwrap();
        // 2 of 5 blocks keep their heading path
        assert!((m.precision - 0.4).abs() < 1e-12);
        assert!((m.recall - 0.4).abs() < 1e-12);
        assert!((m.f1 - 0.4).abs() < 1e-12);
        assert_eq!(m.tbta, Some(0.5));
        assert_eq!(m.rokt, Some(1.0));
    }

    #[test]
    fn swapped_blocks_lower_rokt() {
        let p = doc([
            ("Intro", "Intro"),
            ("Intro", "Welcome text"),
            ("Energy", "Energy"),
            ("Energy", "Solar grew"),
            ("Energy", "Power use fell"),
        ]);
        let m = report_metrics("x", &p, &gold(), None, LabelHierarchy::builtin()).unwrap();
        // one discordant pair of ten: (9 - 1) / 10
        assert!((m.rokt.unwrap() - 0.8).abs() < 1e-12);
        // a single page, so the page mean agrees
        assert_eq!(m.rokt, m.rokt_pages);
    }

    #[test]
    fn table_lists_aggregate() {
        let g = gold();
        let r = EvalReport::from_reports(vec![report_metrics("demo", &g, &g, None, LabelHierarchy::builtin()).unwrap()]);
        let t = r.to_table();
        assert!(t.lines().next().unwrap().starts_with("report"));
        assert!(t.contains("ALL"));
        assert!(t.contains("1.0000"));
    }
}
