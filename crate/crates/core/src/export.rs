//! Reproducible CSV and JSON renderings of sweep results.
//!
//! Every real number is rounded to 12 significant digits (ties to even) so that output
//! bytes do not depend on platform float printing.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sweep::{extreme_indices, front_path, RuleDetail, SweepResult};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` in at most 12 significant digits, positional when the exponent is moderate.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if negative { "-" } else { "" };

    if !(-6..21).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        return if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        };
    }
    let point = exp + 1;
    if point <= 0 {
        format!("{sign}0.{}{digits}", "0".repeat((-point) as usize))
    } else if point as usize >= digits.len() {
        format!("{sign}{digits}{}", "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{sign}{int}.{frac}")
    }
}

/// `x` rounded to 12 significant digits; `-0` becomes `0`.
pub fn round_number(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("float");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn rounded_map(m: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    m.iter().map(|(k, v)| (k.clone(), round_number(*v))).collect()
}

/// One evaluated rule as exported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub thresholds: BTreeMap<String, f64>,
    pub dm_utility: f64,
    pub fairness_score: f64,
    pub position_utilities: BTreeMap<String, f64>,
    pub on_front: bool,
    pub viable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub max_dm_utility: usize,
    pub max_fairness: usize,
}

/// Serialized sweep result shared by the command line and the HTTP service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDocument {
    pub config_digest: String,
    pub groups: Vec<String>,
    /// Claim holders per relevant position; the same for every rule.
    pub claim_counts: BTreeMap<String, usize>,
    pub size: usize,
    pub front_size: usize,
    pub viable_size: usize,
    pub extremes: Extremes,
    /// Front indices from the best decision-maker utility to the best fairness score.
    pub front_path: Vec<usize>,
    pub points: Vec<PointRecord>,
}

pub fn point_record(result: &SweepResult, index: usize) -> PointRecord {
    let r = &result.evaluated[index];
    PointRecord {
        index,
        thresholds: result
            .groups
            .iter()
            .cloned()
            .zip(result.thresholds(index).into_iter().map(round_number))
            .collect(),
        dm_utility: round_number(r.dm_utility),
        fairness_score: round_number(r.fairness_score),
        position_utilities: rounded_map(&r.position_utilities.utilities),
        on_front: r.on_front,
        viable: r.viable,
    }
}

impl SweepDocument {
    /// All points, or only those passing the filters.
    pub fn from_result(result: &SweepResult, viable_only: bool, front_only: bool) -> Result<Self> {
        let (max_dm, max_fair) = extreme_indices(result)?;
        let points = (0..result.len())
            .filter(|&i| {
                let r = &result.evaluated[i];
                (!viable_only || r.viable) && (!front_only || r.on_front)
            })
            .map(|i| point_record(result, i))
            .collect();
        Ok(SweepDocument {
            config_digest: result.config_digest.clone(),
            groups: result.groups.clone(),
            claim_counts: result.evaluated[0].position_utilities.counts.clone(),
            size: result.len(),
            front_size: result.front_size(),
            viable_size: result.evaluated.iter().filter(|r| r.viable).count(),
            extremes: Extremes {
                max_dm_utility: max_dm,
                max_fairness: max_fair,
            },
            front_path: front_path(result),
            points,
        })
    }
}

/// Per-group breakdown of one rule, rounded for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub thresholds: BTreeMap<String, f64>,
    pub dm_utility: f64,
    pub fairness_score: f64,
    pub position_utilities: BTreeMap<String, f64>,
    pub claim_holders: BTreeMap<String, usize>,
    pub accepted: BTreeMap<String, usize>,
    pub group_sizes: BTreeMap<String, usize>,
    pub acceptance_rates: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub on_front: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub viable: Option<bool>,
}

impl RuleRecord {
    pub fn new(detail: &RuleDetail) -> Self {
        let thresholds = match &detail.rule {
            crate::model::DecisionRule::GroupSpecific { thresholds } => rounded_map(thresholds),
            crate::model::DecisionRule::Uniform { threshold } => detail
                .group_sizes
                .keys()
                .map(|g| (g.clone(), round_number(*threshold)))
                .collect(),
        };
        RuleRecord {
            index: None,
            thresholds,
            dm_utility: round_number(detail.dm_utility),
            fairness_score: round_number(detail.fairness_score),
            position_utilities: rounded_map(&detail.position_utilities.utilities),
            claim_holders: detail.position_utilities.counts.clone(),
            accepted: detail.accepted.clone(),
            group_sizes: detail.group_sizes.clone(),
            acceptance_rates: rounded_map(&detail.acceptance_rates),
            on_front: None,
            viable: None,
        }
    }

    /// Attaches the rule's position in a sweep.
    pub fn in_sweep(mut self, result: &SweepResult, index: usize) -> Self {
        let r = &result.evaluated[index];
        self.index = Some(index);
        self.on_front = Some(r.on_front);
        self.viable = Some(r.viable);
        self
    }
}

/// Compact JSON followed by a newline.
pub fn write_json<W: Write>(doc: &SweepDocument, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, doc)?;
    out.write_all(b"\n")
}

/// Header of the per-rule CSV export.
pub fn csv_header(groups: &[String]) -> Vec<String> {
    let mut h: Vec<String> = groups.iter().map(|g| format!("threshold_{g}")).collect();
    h.push("dm_utility".into());
    h.push("fairness_score".into());
    h.extend(groups.iter().map(|g| format!("utility_{g}")));
    h.push("on_front".into());
    h.push("viable".into());
    h
}

/// One row per listed rule, in the given order.
pub fn write_csv<W: Write>(result: &SweepResult, rows: &[usize], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(csv_header(&result.groups))?;
    for &i in rows {
        let r = &result.evaluated[i];
        let mut rec: Vec<String> = result
            .thresholds(i)
            .into_iter()
            .map(format_number)
            .collect();
        rec.push(format_number(r.dm_utility));
        rec.push(format_number(r.fairness_score));
        rec.extend(
            result
                .groups
                .iter()
                .map(|g| format_number(r.position_utilities.utilities[g])),
        );
        rec.push(r.on_front.to_string());
        rec.push(r.viable.to_string());
        w.write_record(&rec)?;
    }
    w.flush()
}

pub fn write_csv_all<W: Write>(result: &SweepResult, out: W) -> std::io::Result<()> {
    let rows: Vec<usize> = (0..result.len()).collect();
    write_csv(result, &rows, out)
}
