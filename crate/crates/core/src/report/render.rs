use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AgreementRow, EvaluationReport, ReportError, RunComparison};
use crate::corpus::AttributeId;
use crate::metrics::average_accuracy;

/// Allowed gap between a stored average accuracy and the recomputed mean.
pub const AVERAGE_TOLERANCE: f64 = 1e-9;

const ABSENT: &str = "---";

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

fn score(x: f64) -> String {
    format!("{x:.4}")
}

fn pair(d: f64, t: f64) -> String {
    format!("{} / {}", score(d), score(t))
}

fn signed(x: f64, decimals: usize) -> String {
    let s = format!("{x:+.decimals$}");
    // Rounding can leave "-0.00".
    if s.trim_start_matches(['+', '-']).chars().all(|c| c == '0' || c == '.') {
        format!("+{}", &s[1..])
    } else {
        s
    }
}

fn opt(x: Option<f64>, f: impl Fn(f64) -> String) -> String {
    x.map(f).unwrap_or_else(|| ABSENT.to_string())
}

fn check_average(r: &EvaluationReport) -> Result<(), ReportError> {
    if let Some(a) = &r.accuracy {
        if (average_accuracy(a.emotion, a.arousal, a.valence) - a.average).abs() > AVERAGE_TOLERANCE {
            return Err(ReportError::InconsistentAverage {
                label: r.label.clone(),
                average: a.average,
            });
        }
    }
    Ok(())
}

fn table(out: &mut String, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in rows {
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    out.push('\n');
}

/// Markdown tables with one row per report. Sections that no report has
/// are left out; a missing cell is rendered as `---`.
pub fn render_markdown(reports: &[EvaluationReport]) -> Result<String, ReportError> {
    for r in reports {
        check_average(r)?;
    }
    let mut out = String::new();
    if let [r] = reports {
        let _ = writeln!(out, "# Evaluation report: {}\n", r.label);
        let _ = writeln!(out, "- Condition: {}", r.condition);
        let _ = writeln!(out, "- Final model: {}", r.model_id);
        let _ = writeln!(
            out,
            "- Records: {} ({} with comparable affect labels, {} excluded)",
            r.n_records, r.n_samples, r.n_excluded
        );
        let _ = writeln!(out, "- Tversky: alpha = {}, beta = {}", r.tversky.alpha, r.tversky.beta);
        let _ = writeln!(out, "- Tokenizer: {}", r.tokenizer);
        let _ = writeln!(out, "- Gold digest: {}\n", r.gold_digest);
    } else {
        out.push_str("# Evaluation reports\n\n");
    }

    if reports.iter().any(|r| r.accuracy.is_some()) {
        out.push_str("## Main results (accuracy, %)\n\n");
        table(
            &mut out,
            &["Model", "Emotion", "Arousal", "Valence", "Avg.", "Excluded"],
            reports.iter().map(|r| {
                let a = r.accuracy.as_ref();
                vec![
                    r.label.clone(),
                    opt(a.map(|a| a.emotion), pct),
                    opt(a.map(|a| a.arousal), pct),
                    opt(a.map(|a| a.valence), pct),
                    opt(a.map(|a| a.average), pct),
                    r.n_excluded.to_string(),
                ]
            }),
        );
    }

    if reports.iter().any(|r| r.alignment.is_some()) {
        out.push_str("## Reasoning quality (Dice / Tversky)\n\n");
        let mut header = vec!["Model", "Sample Mean", "Attr. Mean"];
        let names = ["Color", "Composition", "Line", "Light", "Brushstroke"];
        header.extend(names);
        table(
            &mut out,
            &header,
            reports.iter().map(|r| {
                let mut row = vec![r.label.clone()];
                match &r.alignment {
                    Some(al) => {
                        row.push(pair(al.sample_wise_mean_dice, al.sample_wise_mean_tversky));
                        row.push(pair(al.attribute_wise_mean_dice, al.attribute_wise_mean_tversky));
                        for a in AttributeId::ALL {
                            let cell = al.per_attribute.get(&a).map(|s| pair(s.dice, s.tversky));
                            row.push(cell.unwrap_or_else(|| ABSENT.to_string()));
                        }
                    }
                    None => row.extend(std::iter::repeat_n(ABSENT.to_string(), 7)),
                }
                row
            }),
        );
    }

    if reports.iter().any(|r| r.compactness.is_some()) {
        let tok = reports.iter().find_map(|r| r.compactness.as_ref()).map(|c| c.tokenizer.clone());
        let _ = writeln!(out, "## Compactness ({} tokens)\n", tok.unwrap_or_default());
        let two = |x: f64| format!("{x:.2}");
        table(
            &mut out,
            &["Model", "Avg. Tokens", "Emotion-correct", "Arousal-correct", "Valence-correct"],
            reports.iter().map(|r| {
                let c = r.compactness.as_ref();
                vec![
                    r.label.clone(),
                    opt(c.map(|c| c.mean_tokens), two),
                    opt(c.and_then(|c| c.emotion_correct_mean), two),
                    opt(c.and_then(|c| c.arousal_correct_mean), two),
                    opt(c.and_then(|c| c.valence_correct_mean), two),
                ]
            }),
        );
    }

    out.push_str("## Flooding and sparsity\n\n");
    table(
        &mut out,
        &["Model", "Mean flooding", "All-five fraction", "Mean l0", "l0 = 0/1/2/3/4/5"],
        reports.iter().map(|r| {
            let f = &r.flooding;
            vec![
                r.label.clone(),
                opt(f.mean_flooding_count, score),
                score(f.flooding_regime_fraction),
                score(f.mean_sparsity),
                f.sparsity_distribution.map(|c| c.to_string()).join("/"),
            ]
        }),
    );

    out.push_str("## Failures\n\n");
    let kinds = |m: &std::collections::BTreeMap<String, usize>| {
        if m.is_empty() {
            "0".to_string()
        } else {
            m.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join(", ")
        }
    };
    table(
        &mut out,
        &["Model", "Attribute parse", "Final parse", "Attribute backend", "Final backend", "Final skipped"],
        reports.iter().map(|r| {
            let f = &r.failures;
            vec![
                r.label.clone(),
                kinds(&f.attribute_parse),
                kinds(&f.final_parse),
                f.attribute_backend.to_string(),
                f.final_backend.to_string(),
                f.final_skipped.to_string(),
            ]
        }),
    );
    Ok(out)
}

const CSV_HEADER: &[&str] = &[
    "label",
    "condition",
    "model_id",
    "n_records",
    "n_samples",
    "n_excluded",
    "emotion_acc",
    "arousal_acc",
    "valence_acc",
    "avg_acc",
    "sample_dice",
    "sample_tversky",
    "attr_dice",
    "attr_tversky",
    "color_dice",
    "color_tversky",
    "composition_dice",
    "composition_tversky",
    "line_dice",
    "line_tversky",
    "light_dice",
    "light_tversky",
    "brushstroke_dice",
    "brushstroke_tversky",
    "mean_tokens",
    "emotion_correct_tokens",
    "arousal_correct_tokens",
    "valence_correct_tokens",
    "mean_flooding_count",
    "flooding_regime_fraction",
    "mean_sparsity",
    "attribute_parse_failures",
    "final_parse_failures",
    "alpha",
    "beta",
    "tokenizer",
    "gold_digest",
];

/// One row per report, fixed column order, full-precision values. Absent
/// values are empty cells.
pub fn render_csv(reports: &[EvaluationReport]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| ReportError::Format {
        path: "report.csv".into(),
        message: e.to_string(),
    };
    w.write_record(CSV_HEADER).map_err(io)?;
    let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in reports {
        check_average(r)?;
        let a = r.accuracy.as_ref();
        let al = r.alignment.as_ref();
        let c = r.compactness.as_ref();
        let mut row = vec![
            r.label.clone(),
            r.condition.clone(),
            r.model_id.clone(),
            r.n_records.to_string(),
            r.n_samples.to_string(),
            r.n_excluded.to_string(),
            f(a.map(|a| a.emotion)),
            f(a.map(|a| a.arousal)),
            f(a.map(|a| a.valence)),
            f(a.map(|a| a.average)),
            f(al.map(|a| a.sample_wise_mean_dice)),
            f(al.map(|a| a.sample_wise_mean_tversky)),
            f(al.map(|a| a.attribute_wise_mean_dice)),
            f(al.map(|a| a.attribute_wise_mean_tversky)),
        ];
        for attr in AttributeId::ALL {
            let s = al.and_then(|a| a.per_attribute.get(&attr));
            row.push(f(s.map(|s| s.dice)));
            row.push(f(s.map(|s| s.tversky)));
        }
        row.extend([
            f(c.map(|c| c.mean_tokens)),
            f(c.and_then(|c| c.emotion_correct_mean)),
            f(c.and_then(|c| c.arousal_correct_mean)),
            f(c.and_then(|c| c.valence_correct_mean)),
            f(r.flooding.mean_flooding_count),
            f(Some(r.flooding.flooding_regime_fraction)),
            f(Some(r.flooding.mean_sparsity)),
            r.failures.attribute_parse_total().to_string(),
            r.failures.final_parse_total().to_string(),
            r.tversky.alpha.to_string(),
            r.tversky.beta.to_string(),
            r.tokenizer.clone(),
            r.gold_digest.clone(),
        ]);
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Format {
        path: "report.csv".into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

pub fn render_json(report: &EvaluationReport) -> Result<String, ReportError> {
    check_average(report)?;
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    Ok(s)
}

/// Writes `report.json`, `report.md` and `report.csv` into `dir`.
pub fn write_report_files(report: &EvaluationReport, dir: &Path) -> Result<(), ReportError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let one = std::slice::from_ref(report);
    for (name, body) in [
        ("report.json", render_json(report)?),
        ("report.md", render_markdown(one)?),
        ("report.csv", render_csv(one)?),
    ] {
        let p = dir.join(name);
        fs::write(&p, body).map_err(io(&p))?;
    }
    Ok(())
}

fn metric_title(metric: &str) -> (&str, usize) {
    match metric {
        "emotion_acc" => ("Emotion Acc. (%)", 2),
        "arousal_acc" => ("Arousal Acc. (%)", 2),
        "valence_acc" => ("Valence Acc. (%)", 2),
        "avg_acc" => ("Avg. Acc. (%)", 2),
        "sample_dice" => ("Sample Mean Dice", 4),
        "sample_tversky" => ("Sample Mean Tversky", 4),
        "attr_dice" => ("Attr. Mean Dice", 4),
        "attr_tversky" => ("Attr. Mean Tversky", 4),
        "mean_flooding_count" => ("Mean flooding", 4),
        "mean_sparsity" => ("Mean l0", 4),
        "mean_tokens" => ("Avg. Tokens", 2),
        other => (other, 4),
    }
}

pub fn render_comparison_markdown(c: &RunComparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Run comparison\n");
    let _ = writeln!(out, "- A: {}", c.a);
    let _ = writeln!(out, "- B: {}", c.b);
    let _ = writeln!(out, "- Gold digest: {}\n", c.gold_digest);
    table(
        &mut out,
        &["Metric", "A", "B", "Delta (B - A)"],
        c.deltas.iter().map(|d| {
            let (title, dp) = metric_title(&d.metric);
            vec![
                title.to_string(),
                format!("{:.dp$}", d.a),
                format!("{:.dp$}", d.b),
                signed(d.delta, dp),
            ]
        }),
    );
    if !c.per_attribute.is_empty() {
        out.push_str("## Per-attribute deltas (Dice / Tversky)\n\n");
        table(
            &mut out,
            &["Attribute", "Delta"],
            c.per_attribute
                .iter()
                .map(|(a, s)| vec![a.name().to_string(), format!("{} / {}", signed(s.dice, 4), signed(s.tversky, 4))]),
        );
    }
    out
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub fn render_agreement_markdown(rows: &[AgreementRow]) -> String {
    let mut out = String::from("# Inter-annotator agreement\n\n");
    table(
        &mut out,
        &["Section", "True Prop. (%)", "Pa (%)", "AC1", "Sample Size"],
        rows.iter().map(|r| {
            vec![
                r.section.clone(),
                pct(r.true_proportion),
                pct(r.percent_agreement),
                format!("{:.4}", r.ac1),
                thousands(r.sample_size),
            ]
        }),
    );
    out
}
