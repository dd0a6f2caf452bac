//! Run reports and their CSV rendering.
//!
//! The CSV schema is fixed: header `tick,node_id,event,verdict,affinity,energy,mode`,
//! UTF-8, `\n` newlines, no trailing whitespace, and a `# summary:` trailer.
//! The summary is always recomputable from the rows alone; `compute_summary`
//! is that recomputation and the `report` subcommand exposes it as an
//! external oracle.

use std::collections::BTreeMap;
use std::path::Path;

use crate::admission::AdmissionVerdict;
use crate::response::{Mode, NeutralizationReport};
use crate::world::NodeId;

use super::scenario::HarnessError;

/// One CSV row. Optional columns render as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub tick: u64,
    pub node_id: NodeId,
    pub event: String,
    pub verdict: String,
    pub affinity: Option<f64>,
    pub energy: Option<f64>,
    pub mode: Mode,
}

impl MetricsRow {
    pub fn new(tick: u64, node_id: NodeId, event: &str, mode: Mode) -> Self {
        Self {
            tick,
            node_id,
            event: event.to_string(),
            verdict: String::new(),
            affinity: None,
            energy: None,
            mode,
        }
    }
}

/// Aggregate outcome of a run. Rates use the vacuous convention: a rate with
/// a zero denominator reports 1.0 and lists itself under `vacuous`.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub detection_rate: f64,
    pub false_positive_rate: f64,
    pub mean_ticks_to_neutralize: f64,
    pub total_energy_drained: f64,
    pub vacuous: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<MetricsRow>,
    pub verdicts: Vec<AdmissionVerdict>,
    pub neutralizations: Vec<NeutralizationReport>,
    pub summary: Summary,
}

/// Recomputes the summary from rows alone.
///
/// Ground truth comes from `script` rows (verdict column `Hostile`/`Benign`),
/// classification from the last `verdict` row per node, neutralization times
/// from `confront_start`/`neutralized` tick pairs, and drained energy from
/// the `drain` rows.
pub fn compute_summary(rows: &[MetricsRow]) -> Summary {
    let mut truth_hostile = Vec::new();
    let mut truth_benign = Vec::new();
    let mut final_verdict: BTreeMap<NodeId, String> = BTreeMap::new();
    let mut confront_start: BTreeMap<NodeId, u64> = BTreeMap::new();
    let mut neutralize_ticks: Vec<u64> = Vec::new();
    let mut total_energy = 0.0;

    for row in rows {
        match row.event.as_str() {
            "script" => match row.verdict.as_str() {
                "Hostile" => truth_hostile.push(row.node_id),
                _ => truth_benign.push(row.node_id),
            },
            "verdict" => {
                final_verdict.insert(row.node_id, row.verdict.clone());
            }
            "confront_start" => {
                confront_start.insert(row.node_id, row.tick);
            }
            "neutralized" => {
                if let Some(start) = confront_start.get(&row.node_id) {
                    neutralize_ticks.push(row.tick - start);
                }
            }
            "drain" => {
                total_energy += row.energy.unwrap_or(0.0);
            }
            _ => {}
        }
    }

    let mut vacuous = Vec::new();
    let hostile_hits = truth_hostile
        .iter()
        .filter(|id| final_verdict.get(id).map(String::as_str) == Some("Hostile"))
        .count();
    let detection_rate = if truth_hostile.is_empty() {
        vacuous.push("detection_rate".to_string());
        1.0
    } else {
        hostile_hits as f64 / truth_hostile.len() as f64
    };
    let benign_hits = truth_benign
        .iter()
        .filter(|id| final_verdict.get(id).map(String::as_str) == Some("Hostile"))
        .count();
    let false_positive_rate = if truth_benign.is_empty() {
        vacuous.push("false_positive_rate".to_string());
        1.0
    } else {
        benign_hits as f64 / truth_benign.len() as f64
    };
    let mean_ticks_to_neutralize = if neutralize_ticks.is_empty() {
        vacuous.push("mean_ticks_to_neutralize".to_string());
        0.0
    } else {
        neutralize_ticks.iter().sum::<u64>() as f64 / neutralize_ticks.len() as f64
    };

    Summary {
        detection_rate,
        false_positive_rate,
        mean_ticks_to_neutralize,
        total_energy_drained: total_energy,
        vacuous,
    }
}

pub const CSV_HEADER: &str = "tick,node_id,event,verdict,affinity,energy,mode";

fn format_opt(value: Option<f64>) -> String {
    value.map_or(String::new(), |v| format!("{v:.6}"))
}

fn summary_line(summary: &Summary) -> String {
    let vacuous = if summary.vacuous.is_empty() {
        "none".to_string()
    } else {
        summary.vacuous.join(",")
    };
    format!(
        "# summary: detection_rate={:.6} false_positive_rate={:.6} mean_ticks_to_neutralize={:.6} total_energy_drained={:.6} vacuous={}",
        summary.detection_rate,
        summary.false_positive_rate,
        summary.mean_ticks_to_neutralize,
        summary.total_energy_drained,
        vacuous,
    )
}

/// Renders the report to its canonical CSV bytes.
pub fn render_csv(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.tick,
            row.node_id,
            row.event,
            row.verdict,
            format_opt(row.affinity),
            format_opt(row.energy),
            row.mode.name(),
        ));
    }
    out.push_str(&summary_line(&report.summary));
    out.push('\n');
    out
}

/// Writes the CSV to `path`; emission is idempotent.
pub fn emit_metrics(report: &RunReport, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, render_csv(report)).map_err(|source| HarnessError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn parse_mode(s: &str) -> Option<Mode> {
    match s {
        "Sensing" => Some(Mode::Sensing),
        "Recognition" => Some(Mode::Recognition),
        "Response" => Some(Mode::Response),
        _ => None,
    }
}

fn parse_summary_line(line: &str) -> Option<Summary> {
    let rest = line.strip_prefix("# summary: ")?;
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for part in rest.split(' ') {
        let (key, value) = part.split_once('=')?;
        fields.insert(key, value);
    }
    let vacuous_field = *fields.get("vacuous")?;
    let vacuous = if vacuous_field == "none" {
        Vec::new()
    } else {
        vacuous_field.split(',').map(str::to_string).collect()
    };
    Some(Summary {
        detection_rate: fields.get("detection_rate")?.parse().ok()?,
        false_positive_rate: fields.get("false_positive_rate")?.parse().ok()?,
        mean_ticks_to_neutralize: fields.get("mean_ticks_to_neutralize")?.parse().ok()?,
        total_energy_drained: fields.get("total_energy_drained")?.parse().ok()?,
        vacuous,
    })
}

/// Parses a metrics CSV back into rows and the embedded summary trailer.
pub fn parse_csv(
    text: &str,
    origin: &str,
) -> Result<(Vec<MetricsRow>, Option<Summary>), HarnessError> {
    let mut rows = Vec::new();
    let mut summary = None;
    let bad = |line: usize, message: &str| HarnessError::BadCsv {
        path: origin.to_string(),
        line,
        message: message.to_string(),
    };
    for (i, line) in text.lines().enumerate() {
        let number = i + 1;
        if i == 0 {
            if line != CSV_HEADER {
                return Err(bad(number, "unexpected header"));
            }
            continue;
        }
        if line.starts_with('#') {
            if let Some(parsed) = parse_summary_line(line) {
                summary = Some(parsed);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(bad(number, "expected 7 columns"));
        }
        let tick = fields[0].parse().map_err(|_| bad(number, "bad tick"))?;
        let node_id = NodeId(fields[1].parse().map_err(|_| bad(number, "bad node id"))?);
        let affinity = if fields[4].is_empty() {
            None
        } else {
            Some(fields[4].parse().map_err(|_| bad(number, "bad affinity"))?)
        };
        let energy = if fields[5].is_empty() {
            None
        } else {
            Some(fields[5].parse().map_err(|_| bad(number, "bad energy"))?)
        };
        let mode = parse_mode(fields[6]).ok_or_else(|| bad(number, "bad mode"))?;
        rows.push(MetricsRow {
            tick,
            node_id,
            event: fields[2].to_string(),
            verdict: fields[3].to_string(),
            affinity,
            energy,
            mode,
        });
    }
    Ok((rows, summary))
}
