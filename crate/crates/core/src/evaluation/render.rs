use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{round1, Aggregate, Confusion, EvalReport};
use crate::annotation::Emotion;
use crate::error::ArgumentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    TextTable,
    Json,
    Csv,
    ConfusionPng,
}

impl FromStr for ReportFormat {
    type Err = ArgumentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text_table" | "text" => Ok(Self::TextTable),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "confusion_png" | "png" => Ok(Self::ConfusionPng),
            other => Err(ArgumentError(format!("unknown report format {other:?}"))),
        }
    }
}

fn capitalized(e: Emotion) -> String {
    let s = e.as_str();
    s[..1].to_uppercase() + &s[1..]
}

fn cell(x: f64) -> String {
    format!("{:.1}", round1(x))
}

fn text_table(r: &EvalReport) -> String {
    let mut out = String::new();
    let s = &r.speaker;
    let _ = writeln!(out, "Speaker and emotion accuracy (%)");
    let _ = writeln!(out, "{:<14}{:>7}{:>7}{:>7} |{:>8}{:>7}", "Method", "Easy", "Hard", "Total", "Neutral", "Total");
    let (neutral, total) = match &r.emotion {
        Some(e) => (
            e.class(Emotion::Neutral).map_or("---".to_string(), |c| cell(c.recall)),
            cell(e.micro.recall),
        ),
        None => ("---".to_string(), "---".to_string()),
    };
    let _ = writeln!(
        out,
        "{:<14}{:>7}{:>7}{:>7} |{:>8}{:>7}",
        r.method_tag,
        cell(s.easy.percent),
        cell(s.hard.percent),
        cell(s.total.percent),
        neutral,
        total
    );
    let _ = writeln!(
        out,
        "{:<14}{:>7}{:>7}{:>7} |",
        "#Support", s.easy.support, s.hard.support, s.total.support
    );

    if let Some(e) = &r.emotion {
        out.push('\n');
        let _ = writeln!(out, "5-way emotion recognition (%)");
        let _ = writeln!(out, "{:<14}{:>10}{:>8}{:>7}{:>10}", "Label", "Precision", "Recall", "F1", "#Support");
        for c in &e.per_class {
            let _ = writeln!(
                out,
                "{:<14}{:>10}{:>8}{:>7}{:>10}",
                capitalized(c.label),
                cell(c.precision),
                cell(c.recall),
                cell(c.f1),
                c.support
            );
        }
        let agg = |out: &mut String, name: &str, a: &Aggregate| {
            let _ = writeln!(
                out,
                "{:<14}{:>10}{:>8}{:>7}{:>10}",
                name,
                cell(a.precision),
                cell(a.recall),
                cell(a.f1),
                a.support
            );
        };
        agg(&mut out, "Micro avg", &e.micro);
        agg(&mut out, "Macro avg", &e.macro_avg);
        agg(&mut out, "Weighted avg", &e.weighted);
        if e.excluded_gold > 0 || e.out_of_set_predictions > 0 {
            let _ = writeln!(
                out,
                "Excluded gold samples: {}; predictions outside the evaluated labels: {}",
                e.excluded_gold, e.out_of_set_predictions
            );
        }
    }
    if let Some(j) = &r.joint {
        out.push('\n');
        let _ = writeln!(out, "Joint accuracy (%): {} ({}/{})", cell(j.percent), j.correct, j.support);
    }
    if let Some(c) = &r.confusion {
        out.push('\n');
        let _ = writeln!(out, "Confusion matrix (rows gold, columns predicted)");
        let _ = write!(out, "{:<10}", "");
        for l in &c.labels {
            let _ = write!(out, "{:>10}", l.as_str());
        }
        out.push('\n');
        for (l, row) in c.labels.iter().zip(&c.counts) {
            let _ = write!(out, "{:<10}", l.as_str());
            for n in row {
                let _ = write!(out, "{n:>10}");
            }
            out.push('\n');
        }
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

fn csv_rows(r: &EvalReport) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "precision", "recall", "f1", "support"])?;
    if let Some(e) = &r.emotion {
        for c in &e.per_class {
            w.write_record([c.label.as_str().to_string(), cell(c.precision), cell(c.recall), cell(c.f1), c.support.to_string()])?;
        }
        for (name, a) in [("micro avg", &e.micro), ("macro avg", &e.macro_avg), ("weighted avg", &e.weighted)] {
            w.write_record([name.to_string(), cell(a.precision), cell(a.recall), cell(a.f1), a.support.to_string()])?;
        }
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// Side length of one matrix cell in the heat map.
const CELL_PX: usize = 24;

/// Grayscale heat map of the row-normalized confusion matrix; darker is more.
fn confusion_png(c: &Confusion) -> Result<Vec<u8>, png::EncodingError> {
    let n = c.labels.len();
    let side = n * CELL_PX;
    let mut pixels = vec![255u8; side * side];
    for (i, row) in c.counts.iter().enumerate() {
        let total: usize = row.iter().sum();
        for (j, &count) in row.iter().enumerate() {
            let share = if total == 0 { 0.0 } else { count as f64 / total as f64 };
            let shade = (255.0 * (1.0 - share)).round() as u8;
            for y in i * CELL_PX..(i + 1) * CELL_PX {
                let line = &mut pixels[y * side..(y + 1) * side];
                line[j * CELL_PX..(j + 1) * CELL_PX].fill(shade);
            }
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, side as u32, side as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&pixels)?;
    }
    Ok(out)
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> Result<Vec<u8>, ArgumentError> {
    match format {
        ReportFormat::TextTable => Ok(text_table(report).into_bytes()),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| ArgumentError(e.to_string()))?;
            s.push('\n');
            Ok(s.into_bytes())
        }
        ReportFormat::Csv => csv_rows(report).map_err(|e| ArgumentError(e.to_string())),
        ReportFormat::ConfusionPng => {
            let empty = Confusion::default();
            confusion_png(report.confusion.as_ref().unwrap_or(&empty)).map_err(|e| ArgumentError(e.to_string()))
        }
    }
}
