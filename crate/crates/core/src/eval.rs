//! Accuracy, per-class precision/recall/F1, macro-F1, confusion matrices and
//! per-language slices, with text and JSON rendering.
//!
//! Any 0/0 ratio is scored 0. By default every label in the label set counts
//! toward macro-F1, including labels absent from the gold data.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use crate::corpus::{Language, Task, Task1Label, Task2Label, TextRecord};
use crate::pipeline::PredictionRow;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{gold} gold labels but {pred} predictions")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("label `{0}` is not in the label set")]
    UnknownLabel(String),
    #[error("the label set is empty or repeats a label")]
    LabelSet,
    #[error("id `{0}` appears more than once in the {1}")]
    DuplicateId(String, &'static str),
    #[error("no prediction for gold id `{0}`")]
    MissingPrediction(String),
    #[error("prediction for id `{0}` has no gold record")]
    UnexpectedPrediction(String),
    #[error("gold record `{id}` has no {task} label")]
    MissingGold { id: String, task: Task },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreOptions {
    /// Average macro-F1 over labels with no gold support too.
    pub include_zero_support: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            include_zero_support: true,
        }
    }
}

/// Rows are gold labels, columns predicted labels, both in label-set order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub slices: BTreeMap<Language, EvaluationReport>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn score<L: PartialEq + fmt::Display>(
    gold: &[L],
    pred: &[L],
    label_set: &[L],
) -> Result<EvaluationReport, EvalError> {
    score_with(gold, pred, label_set, ScoreOptions::default())
}

pub fn score_with<L: PartialEq + fmt::Display>(
    gold: &[L],
    pred: &[L],
    label_set: &[L],
    options: ScoreOptions,
) -> Result<EvaluationReport, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if label_set.is_empty() || label_set.iter().enumerate().any(|(i, l)| label_set[..i].contains(l)) {
        return Err(EvalError::LabelSet);
    }
    let position = |l: &L| {
        label_set
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| EvalError::UnknownLabel(l.to_string()))
    };
    let n = label_set.len();
    let mut counts = vec![vec![0usize; n]; n];
    for (g, p) in gold.iter().zip(pred) {
        counts[position(g)?][position(p)?] += 1;
    }
    let confusion = ConfusionMatrix {
        labels: label_set.iter().map(|l| l.to_string()).collect(),
        counts,
    };

    let per_class: Vec<ClassMetrics> = (0..n)
        .map(|i| {
            let tp = confusion.counts[i][i];
            let support: usize = confusion.counts[i].iter().sum();
            let predicted: usize = confusion.counts.iter().map(|row| row[i]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label: confusion.labels[i].clone(),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let averaged: Vec<f64> = per_class
        .iter()
        .filter(|c| options.include_zero_support || c.support > 0)
        .map(|c| c.f1)
        .collect();
    let macro_f1 = if averaged.is_empty() {
        0.0
    } else {
        averaged.iter().sum::<f64>() / averaged.len() as f64
    };
    Ok(EvaluationReport {
        accuracy: ratio(confusion.trace(), confusion.total()),
        macro_f1,
        per_class,
        confusion,
        slices: BTreeMap::new(),
    })
}

/// Pairs each gold record with the prediction carrying its id, in gold order.
pub fn align<'a>(
    gold: &'a [TextRecord],
    preds: &'a [PredictionRow],
) -> Result<Vec<(&'a TextRecord, &'a PredictionRow)>, EvalError> {
    let mut by_id: HashMap<&str, &PredictionRow> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(EvalError::DuplicateId(p.id.clone(), "predictions"));
        }
    }
    let mut seen: HashMap<&str, ()> = HashMap::with_capacity(gold.len());
    let mut pairs = Vec::with_capacity(gold.len());
    for g in gold {
        if seen.insert(g.id.as_str(), ()).is_some() {
            return Err(EvalError::DuplicateId(g.id.clone(), "gold records"));
        }
        let p = by_id
            .get(g.id.as_str())
            .ok_or_else(|| EvalError::MissingPrediction(g.id.clone()))?;
        pairs.push((g, *p));
    }
    if let Some(extra) = preds.iter().find(|p| !seen.contains_key(p.id.as_str())) {
        return Err(EvalError::UnexpectedPrediction(extra.id.clone()));
    }
    Ok(pairs)
}

fn task_labels(
    pairs: &[(&TextRecord, &PredictionRow)],
    task: Task,
) -> Result<(Vec<&'static str>, Vec<&'static str>), EvalError> {
    let mut gold = Vec::with_capacity(pairs.len());
    let mut pred = Vec::with_capacity(pairs.len());
    for (g, p) in pairs {
        gold.push(
            g.label(task)
                .ok_or_else(|| EvalError::MissingGold { id: g.id.clone(), task })?,
        );
        pred.push(match task {
            Task::Task1 => p.task1.as_str(),
            Task::Task2 => p.task2.as_str(),
        });
    }
    Ok((gold, pred))
}

fn label_set(task: Task) -> Vec<&'static str> {
    match task {
        Task::Task1 => Task1Label::ALL.iter().map(|l| l.as_str()).collect(),
        Task::Task2 => Task2Label::ALL.iter().map(|l| l.as_str()).collect(),
    }
}

/// One report per language present in `gold`, each over that language's
/// records only.
pub fn slice_by_language(
    gold: &[TextRecord],
    preds: &[PredictionRow],
    task: Task,
) -> Result<BTreeMap<Language, EvaluationReport>, EvalError> {
    slice_by_language_with(gold, preds, task, ScoreOptions::default())
}

pub fn slice_by_language_with(
    gold: &[TextRecord],
    preds: &[PredictionRow],
    task: Task,
    options: ScoreOptions,
) -> Result<BTreeMap<Language, EvaluationReport>, EvalError> {
    let pairs = align(gold, preds)?;
    let labels = label_set(task);
    let mut out = BTreeMap::new();
    for &language in Language::ALL {
        let subset: Vec<_> = pairs.iter().copied().filter(|(g, _)| g.language == language).collect();
        if subset.is_empty() {
            continue;
        }
        let (g, p) = task_labels(&subset, task)?;
        out.insert(language, score_with(&g, &p, &labels, options)?);
    }
    Ok(out)
}

/// Global report for `task` with per-language slices attached.
pub fn evaluate_task(gold: &[TextRecord], preds: &[PredictionRow], task: Task) -> Result<EvaluationReport, EvalError> {
    evaluate_task_with(gold, preds, task, ScoreOptions::default())
}

pub fn evaluate_task_with(
    gold: &[TextRecord],
    preds: &[PredictionRow],
    task: Task,
    options: ScoreOptions,
) -> Result<EvaluationReport, EvalError> {
    let pairs = align(gold, preds)?;
    let (g, p) = task_labels(&pairs, task)?;
    let mut report = score_with(&g, &p, &label_set(task), options)?;
    report.slices = slice_by_language_with(gold, preds, task, options)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Text => render_text(report, "", &mut out),
        ReportFormat::Json => {
            render_json(report, &mut out);
            out.push('\n');
        }
    }
    out
}

fn render_text(r: &EvaluationReport, indent: &str, out: &mut String) {
    writeln!(out, "{indent}accuracy={:.6}", r.accuracy).unwrap();
    writeln!(out, "{indent}macro_f1={:.6}", r.macro_f1).unwrap();
    for c in &r.per_class {
        writeln!(
            out,
            "{indent}class={} precision={:.6} recall={:.6} f1={:.6} support={}",
            c.label, c.precision, c.recall, c.f1, c.support
        )
        .unwrap();
    }
    writeln!(out, "{indent}confusion (rows = gold, columns = predicted):").unwrap();
    let labels = &r.confusion.labels;
    let label_w = labels.iter().map(|l| l.len()).max().unwrap_or(0);
    let widths: Vec<usize> = labels
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let widest = r
                .confusion
                .counts
                .iter()
                .map(|row| row[j].to_string().len())
                .max()
                .unwrap_or(1);
            l.len().max(widest)
        })
        .collect();
    let mut header = format!("{indent}{:label_w$}", "");
    for (l, w) in labels.iter().zip(&widths) {
        write!(header, "  {l:>w$}").unwrap();
    }
    writeln!(out, "{}", header.trim_end()).unwrap();
    for (l, row) in labels.iter().zip(&r.confusion.counts) {
        write!(out, "{indent}{l:<label_w$}").unwrap();
        for (c, w) in row.iter().zip(&widths) {
            write!(out, "  {c:>w$}").unwrap();
        }
        out.push('\n');
    }
    for (lang, slice) in &r.slices {
        writeln!(out, "{indent}slice={lang}").unwrap();
        render_text(slice, &format!("{indent}  "), out);
    }
}

fn json_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => write!(out, "\\u{:04x}", c as u32).unwrap(),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn render_json(r: &EvaluationReport, out: &mut String) {
    write!(
        out,
        "{{\"accuracy\":{:.6},\"macro_f1\":{:.6},\"labels\":[",
        r.accuracy, r.macro_f1
    )
    .unwrap();
    for (i, l) in r.confusion.labels.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        json_string(l, out);
    }
    out.push_str("],\"per_class\":[");
    for (i, c) in r.per_class.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("{\"label\":");
        json_string(&c.label, out);
        write!(
            out,
            ",\"precision\":{:.6},\"recall\":{:.6},\"f1\":{:.6},\"support\":{}}}",
            c.precision, c.recall, c.f1, c.support
        )
        .unwrap();
    }
    out.push_str("],\"confusion\":[");
    for (i, row) in r.confusion.counts.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        write!(out, "[{}]", cells.join(",")).unwrap();
    }
    out.push_str("],\"slices\":{");
    for (i, (lang, slice)) in r.slices.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        json_string(lang.as_str(), out);
        out.push(':');
        render_json(slice, out);
    }
    out.push_str("}}");
}
