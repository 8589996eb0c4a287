//! Strict CoNLL-style scoring, multi-run averaging, inter-annotator
//! agreement and side-by-side comparison tables.
//!
//! A predicted mention counts as correct only when a gold mention matches it
//! exactly in document, sentence, token span and entity type. Scores are kept
//! unrounded at 64-bit precision; rounding to two decimals happens only at
//! rendering. Zero denominators yield 0.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Corpus, EntityType};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn metrics(self) -> Metrics {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        Metrics {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }

    fn is_zero(self) -> bool {
        self.tp == 0 && self.fp == 0 && self.fn_ == 0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Round-to-two-decimals rendering used in all tables.
pub fn render_score(value: f64) -> String {
    format!("{value:.2}")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// One table cell: raw counts are present for single runs and omitted for
/// averaged reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub counts: Option<Counts>,
    pub metrics: Metrics,
    /// Whether the type occurred in gold or in any prediction; absent types
    /// render as "-".
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub corpus: String,
    pub gold_source: String,
    pub system_source: String,
    /// Number of runs averaged into this report (1 = a plain single run).
    pub runs: usize,
    /// One entry per entity type, in the fixed enumeration order.
    pub per_type: Vec<(EntityType, EvalCell)>,
    pub all: EvalCell,
}

impl EvalReport {
    pub fn cell(&self, t: EntityType) -> &EvalCell {
        &self.per_type[t.index()].1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("bad report JSON: {e}")))
    }
}

/// Strict scoring of one system source against one gold source.
pub fn score_strict(corpus: &Corpus, gold_source: &str, system_source: &str) -> Result<EvalReport> {
    for source in [gold_source, system_source] {
        if !corpus.documents.is_empty() && !corpus.has_source(source) {
            return Err(Error::MissingSource(source.to_string()));
        }
    }
    let mut per_type = vec![Counts::default(); EntityType::ALL.len()];
    for doc in &corpus.documents {
        // Mentions within one (document, source) never overlap, so every
        // (sentence, span, type) key is unique and set logic suffices.
        let gold: BTreeSet<_> = doc.mentions(gold_source).iter().copied().collect();
        let predicted: BTreeSet<_> = doc.mentions(system_source).iter().copied().collect();
        for m in predicted.intersection(&gold) {
            per_type[m.entity_type.index()].tp += 1;
        }
        for m in predicted.difference(&gold) {
            per_type[m.entity_type.index()].fp += 1;
        }
        for m in gold.difference(&predicted) {
            per_type[m.entity_type.index()].fn_ += 1;
        }
    }
    let mut all = Counts::default();
    for c in &per_type {
        all.add(*c);
    }
    let cell = |c: Counts| EvalCell {
        counts: Some(c),
        metrics: c.metrics(),
        present: !c.is_zero(),
    };
    Ok(EvalReport {
        corpus: corpus.name.clone(),
        gold_source: gold_source.to_string(),
        system_source: system_source.to_string(),
        runs: 1,
        per_type: EntityType::ALL
            .iter()
            .map(|&t| (t, cell(per_type[t.index()])))
            .collect(),
        all: cell(all),
    })
}

/// Inter-annotator agreement: identical machinery to [`score_strict`] with
/// annotator A as reference and B as system. F1 is symmetric in the two
/// orientations; P and R swap.
pub fn compute_iaa(corpus: &Corpus, annotator_a: &str, annotator_b: &str) -> Result<EvalReport> {
    score_strict(corpus, annotator_a, annotator_b)
}

/// Default number of seeded runs averaged by the multi-run protocol.
pub const DEFAULT_RUNS: usize = 5;

/// Cell-wise arithmetic mean of identically configured runs. Counts are
/// omitted from the result, which is marked with the number of runs.
pub fn aggregate_runs(runs: &[EvalReport]) -> Result<EvalReport> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Invalid("aggregate_runs needs at least one report".to_string()))?;
    for r in runs {
        if (&r.corpus, &r.gold_source, &r.system_source)
            != (&first.corpus, &first.gold_source, &first.system_source)
        {
            return Err(Error::Resource(format!(
                "run metadata mismatch: ({}, {}, {}) vs ({}, {}, {})",
                r.corpus,
                r.gold_source,
                r.system_source,
                first.corpus,
                first.gold_source,
                first.system_source
            )));
        }
    }
    let k = runs.len() as f64;
    let mean_cell = |cells: Vec<&EvalCell>| EvalCell {
        counts: None,
        metrics: Metrics {
            precision: cells.iter().map(|c| c.metrics.precision).sum::<f64>() / k,
            recall: cells.iter().map(|c| c.metrics.recall).sum::<f64>() / k,
            f1: cells.iter().map(|c| c.metrics.f1).sum::<f64>() / k,
        },
        present: cells.iter().any(|c| c.present),
    };
    Ok(EvalReport {
        corpus: first.corpus.clone(),
        gold_source: first.gold_source.clone(),
        system_source: first.system_source.clone(),
        runs: runs.len(),
        per_type: EntityType::ALL
            .iter()
            .map(|&t| (t, mean_cell(runs.iter().map(|r| r.cell(t)).collect())))
            .collect(),
        all: mean_cell(runs.iter().map(|r| &r.all).collect()),
    })
}

/// Render reports side by side, one row per entity type plus "All".
///
/// Reports must share corpus and gold metadata. The optional IAA report is
/// rendered as the last column group and excluded from the best-F1 marker
/// (`*`), which flags the best system per row. Types absent from gold and
/// from every system render as "-".
pub fn compare_systems(
    reports: &[EvalReport],
    iaa: Option<&EvalReport>,
    tsv: bool,
) -> Result<String> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Invalid("compare_systems needs at least one report".to_string()))?;
    for r in reports {
        if (&r.corpus, &r.gold_source) != (&first.corpus, &first.gold_source) {
            return Err(Error::Resource(format!(
                "report metadata mismatch: ({}, {}) vs ({}, {})",
                r.corpus, r.gold_source, first.corpus, first.gold_source
            )));
        }
    }
    if let Some(r) = iaa {
        if r.corpus != first.corpus {
            return Err(Error::Resource(format!(
                "IAA corpus {} does not match {}",
                r.corpus, first.corpus
            )));
        }
    }

    let mut columns: Vec<(&str, &EvalReport)> = reports
        .iter()
        .map(|r| (r.system_source.as_str(), r))
        .collect();
    if let Some(r) = iaa {
        columns.push(("IAA", r));
    }

    let n_systems = reports.len();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["Entity Type".to_string()];
    for (name, _) in &columns {
        header.push(format!("{name} P"));
        header.push("R".to_string());
        header.push("F1".to_string());
    }
    rows.push(header);

    let mut emit_row = |label: &str, cells: Vec<&EvalCell>| {
        let mut row = vec![label.to_string()];
        let row_present = cells.iter().take(n_systems).any(|c| c.present);
        let best = cells
            .iter()
            .take(n_systems)
            .filter(|c| c.present)
            .map(|c| c.metrics.f1)
            .fold(f64::NEG_INFINITY, f64::max);
        for (i, cell) in cells.iter().enumerate() {
            let is_system = i < n_systems;
            let shown = if is_system { row_present && cell.present } else { cell.present };
            if !shown {
                row.extend(["-".to_string(), "-".to_string(), "-".to_string()]);
                continue;
            }
            let m = cell.metrics;
            row.push(render_score(m.precision));
            row.push(render_score(m.recall));
            let mut f1s = render_score(m.f1);
            if is_system && (m.f1 - best).abs() < 1e-12 {
                f1s.push('*');
            }
            row.push(f1s);
        }
        rows.push(row);
    };

    for t in EntityType::ALL {
        let cells: Vec<&EvalCell> = columns.iter().map(|(_, r)| r.cell(t)).collect();
        emit_row(t.name(), cells);
    }
    emit_row("All", columns.iter().map(|(_, r)| &r.all).collect());

    if tsv {
        let mut out = String::new();
        for row in &rows {
            writeln!(out, "{}", row.join("\t")).unwrap();
        }
        return Ok(out);
    }

    let ncols = rows[0].len();
    let mut widths = vec![0usize; ncols];
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    writeln!(out, "# corpus {}  gold {:?}", first.corpus, first.gold_source).unwrap();
    for row in &rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i == 0 {
                line.push_str(&format!("{:<width$}", cell, width = widths[i]));
            } else {
                line.push_str(&format!("  {:>width$}", cell, width = widths[i]));
            }
        }
        writeln!(out, "{}", line.trim_end()).unwrap();
    }
    Ok(out)
}
