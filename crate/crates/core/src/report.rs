//! Text and CSV rendering of result tables.
//!
//! Every table comes in two renderings: aligned text with rounded, human
//! oriented cells, and CSV with full-precision values in separate columns.

use crate::eval::{AggregateReport, ScatterRow};
use crate::probe::{BinStat, CodelengthReport};
use crate::types::MutabilityClass;
use crate::update::UpdateReport;

/// Left-aligned columns separated by two spaces, with a rule under the
/// header row.
pub fn align<R: AsRef<[String]>>(rows: &[R]) -> String {
    let n = rows.iter().map(|r| r.as_ref().len()).max().unwrap_or(0);
    let mut widths = vec![0usize; n];
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row.as_ref()) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .as_ref()
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * n.saturating_sub(1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// A header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(Into::into).collect());
    }

    pub fn to_text(&self) -> String {
        let mut all = Vec::with_capacity(self.rows.len() + 1);
        all.push(self.header.clone());
        all.extend(self.rows.iter().cloned());
        align(&all)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        // writing to memory cannot fail
        w.write_record(&self.header).expect("in-memory csv");
        for r in &self.rows {
            w.write_record(r).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv of utf-8 cells")
    }
}

/// The text and CSV forms of one table.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub text: Table,
    pub csv: Table,
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn opt(x: Option<f64>, f: impl Fn(f64) -> String) -> String {
    x.map(f).unwrap_or_else(|| "-".into())
}

fn raw(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// F1 (percent) and confidence per class, one row per model.
pub fn knowledge_table(rows: &[(&str, &AggregateReport)]) -> Rendered {
    let mut text_header = vec!["Model".to_string()];
    let mut csv_header = vec!["model".to_string()];
    for c in MutabilityClass::ALL {
        text_header.push(format!("{c} F1"));
        text_header.push("Conf.".into());
        csv_header.push(format!("{}_f1", c.key()));
        csv_header.push(format!("{}_confidence", c.key()));
    }
    let mut text = Table::new(text_header);
    let mut csv = Table::new(csv_header);
    for (model, report) in rows {
        let mut t = vec![model.to_string()];
        let mut r = vec![model.to_string()];
        for c in MutabilityClass::ALL {
            let s = report.class(c);
            t.push(opt(s.map(|s| s.mean_f1), pct));
            t.push(opt(s.map(|s| s.mean_confidence), |v| format!("{v:.2}")));
            r.push(raw(s.map(|s| s.mean_f1)));
            r.push(raw(s.map(|s| s.mean_confidence)));
        }
        text.push(t);
        csv.push(r);
    }
    Rendered { text, csv }
}

/// Per-relation F1 grouped by class, with class averages and the overall
/// macro average as the last row.
pub fn relation_table(report: &AggregateReport) -> Rendered {
    let mut text = Table::new(["Class", "PID", "Relation", "#Q", "F1", "Conf.", "Best template"]);
    let mut csv = Table::new([
        "class",
        "pid",
        "relation",
        "queries",
        "f1",
        "confidence",
        "best_template",
    ]);
    for c in MutabilityClass::ALL {
        for r in report.relations.iter().filter(|r| r.class == c) {
            text.push([
                c.to_string(),
                r.pid.to_string(),
                r.label.clone(),
                r.queries.to_string(),
                pct(r.mean_f1),
                format!("{:.2}", r.mean_confidence),
                r.best_template.to_string(),
            ]);
            csv.push([
                c.key().to_string(),
                r.pid.to_string(),
                r.label.clone(),
                r.queries.to_string(),
                r.mean_f1.to_string(),
                r.mean_confidence.to_string(),
                r.best_template.to_string(),
            ]);
        }
        if let Some(s) = report.class(c) {
            text.push([
                c.to_string(),
                String::new(),
                "Average".into(),
                String::new(),
                pct(s.mean_f1),
                format!("{:.2}", s.mean_confidence),
                String::new(),
            ]);
            csv.push([
                c.key().to_string(),
                String::new(),
                "average".into(),
                String::new(),
                s.mean_f1.to_string(),
                s.mean_confidence.to_string(),
                String::new(),
            ]);
        }
    }
    text.push([
        String::new(),
        String::new(),
        "mAverage".into(),
        String::new(),
        pct(report.macro_f1),
        format!("{:.2}", report.macro_confidence),
        String::new(),
    ]);
    csv.push([
        String::new(),
        String::new(),
        "macro_average".into(),
        String::new(),
        report.macro_f1.to_string(),
        report.macro_confidence.to_string(),
        String::new(),
    ]);
    Rendered { text, csv }
}

/// Codelength in the "mutability / random labels" convention, the matching
/// compression pair and probe accuracy.
pub fn codelength_table(rows: &[(&str, &CodelengthReport)]) -> Rendered {
    let mut text = Table::new([
        "Model",
        "Task",
        "Uniform",
        "Codelength (mutability / random labels)",
        "Compression",
        "Accuracy",
        "Template baseline",
    ]);
    let mut csv = Table::new([
        "model",
        "task",
        "n",
        "uniform_bits",
        "online_bits",
        "control_online_bits",
        "compression",
        "control_compression",
        "accuracy",
        "control_accuracy",
        "template_baseline_accuracy",
    ]);
    for (model, r) in rows {
        let m = &r.mutability;
        let c = r.control.as_ref();
        text.push([
            model.to_string(),
            r.task.to_string(),
            format!("{:.0}", m.uniform_bits),
            format!("{:.0} / {}", m.online_bits, opt(c.map(|c| c.online_bits), |v| format!("{v:.0}"))),
            format!("{:.1} / {}", m.compression, opt(c.map(|c| c.compression), |v| format!("{v:.1}"))),
            format!("{:.2}", m.accuracy),
            format!("{:.2}", r.template_baseline_accuracy),
        ]);
        csv.push([
            model.to_string(),
            r.task.to_string(),
            m.n.to_string(),
            m.uniform_bits.to_string(),
            m.online_bits.to_string(),
            raw(c.map(|c| c.online_bits)),
            m.compression.to_string(),
            raw(c.map(|c| c.compression)),
            m.accuracy.to_string(),
            raw(c.map(|c| c.accuracy)),
            r.template_baseline_accuracy.to_string(),
        ]);
    }
    Rendered { text, csv }
}

/// Test-set frequency bins: class counts and probe accuracy per bin.
pub fn bin_table(bins: &[BinStat]) -> Rendered {
    let mut text = Table::new(["Percentile", "Frequency", "#Immutable", "#Mutable", "Accuracy"]);
    let mut csv = Table::new([
        "percentile",
        "min_frequency",
        "max_frequency",
        "immutable",
        "mutable",
        "accuracy",
    ]);
    for b in bins {
        let range = match (b.min_frequency, b.max_frequency) {
            (Some(lo), Some(hi)) => format!("{lo}-{hi}"),
            _ => "-".into(),
        };
        text.push([
            b.bin.to_string(),
            range,
            b.immutable.to_string(),
            b.mutable.to_string(),
            opt(b.accuracy, |v| format!("{v:.2}")),
        ]);
        csv.push([
            b.bin.to_string(),
            b.min_frequency.map(|v| v.to_string()).unwrap_or_default(),
            b.max_frequency.map(|v| v.to_string()).unwrap_or_default(),
            b.immutable.to_string(),
            b.mutable.to_string(),
            raw(b.accuracy),
        ]);
    }
    Rendered { text, csv }
}

/// Share of successful in-context updates per class, in percent.
pub fn update_table(rows: &[(&str, &UpdateReport)]) -> Rendered {
    let mut text_header = vec!["Model".to_string()];
    let mut csv_header = vec!["model".to_string()];
    for c in MutabilityClass::ALL {
        text_header.push(c.to_string());
        csv_header.push(format!("{}_rate", c.key()));
        csv_header.push(format!("{}_cases", c.key()));
    }
    let mut text = Table::new(text_header);
    let mut csv = Table::new(csv_header);
    for (model, report) in rows {
        let mut t = vec![model.to_string()];
        let mut r = vec![model.to_string()];
        for c in MutabilityClass::ALL {
            let s = report.classes.iter().find(|s| s.class == c);
            let rate = s.filter(|s| s.cases > 0).map(|s| s.rate);
            t.push(opt(rate, pct));
            r.push(raw(rate));
            r.push(s.map(|s| s.cases).unwrap_or(0).to_string());
        }
        text.push(t);
        csv.push(r);
    }
    Rendered { text, csv }
}

fn ordinal(i: usize) -> String {
    let suffix = match (i % 10, i % 100) {
        (1, n) if n != 11 => "st",
        (2, n) if n != 12 => "nd",
        (3, n) if n != 13 => "rd",
        _ => "th",
    };
    format!("{i}{suffix}")
}

/// Update success in the `top` highest frequency percentiles, highest
/// first. Empty percentiles print as `-`.
pub fn percentile_table(rows: &[(&str, &UpdateReport)], top: usize) -> Rendered {
    let mut text = Table::new(["Model".to_string(), "Class".to_string()]);
    let mut csv = Table::new(["model".to_string(), "class".to_string()]);
    for i in 1..=top {
        text.header.push(ordinal(i));
        csv.header.push(format!("top_{i}"));
    }
    for (model, report) in rows {
        for s in &report.classes {
            let rates = s.top_percentiles(top);
            let mut t = vec![model.to_string(), s.class.to_string()];
            let mut r = vec![model.to_string(), s.class.key().to_string()];
            for i in 0..top {
                let v = rates.get(i).copied().flatten();
                t.push(opt(v, pct));
                r.push(raw(v));
            }
            text.push(t);
            csv.push(r);
        }
    }
    Rendered { text, csv }
}

/// Mean confidence per F1 bucket and class, as plot-ready CSV.
pub fn scatter_csv(rows: &[ScatterRow]) -> String {
    let mut t = Table::new(["f1".to_string()]);
    t.header.extend(MutabilityClass::ALL.iter().map(|c| format!("{}_confidence", c.key())));
    for row in rows {
        let mut r = vec![format!("{:.1}", row.f1)];
        r.extend(MutabilityClass::ALL.iter().map(|c| raw(row.by_class.get(c).copied().flatten())));
        t.push(r);
    }
    t.to_csv()
}
