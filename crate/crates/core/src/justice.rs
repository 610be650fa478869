//! Relevant positions and patterns of justice.
//!
//! A claims differentiator selects the individuals who hold equal moral claims to utility.
//! Among those, each group forms a relevant position whose utility is the mean
//! decision-subject utility of its claim holders. A pattern of justice turns the
//! position utilities into a single fairness score where higher is fairer.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttributeValue, Dataset, DecisionVector};
use crate::utility::{ds_utility_individual, DsUtilitySpec, EvaluationMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "=", alias = "==")]
    Eq,
    #[serde(rename = "!=", alias = "≠")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        })
    }
}

/// Which individuals hold equal claims to utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimsDifferentiator {
    All,
    /// Individuals whose observed outcome equals the given value (0 or 1).
    OutcomeEquals(u8),
    AttributePredicate {
        attribute: String,
        op: CompareOp,
        value: AttributeValue,
    },
}

impl ClaimsDifferentiator {
    pub fn validate(&self) -> Result<()> {
        match self {
            ClaimsDifferentiator::OutcomeEquals(y) if *y > 1 => {
                Err(Error::schema("/claims/outcome_equals", "must be 0 or 1"))
            }
            _ => Ok(()),
        }
    }

    /// Attribute the predicate reads, if any.
    pub fn attribute(&self) -> Option<&str> {
        match self {
            ClaimsDifferentiator::AttributePredicate { attribute, .. } => Some(attribute),
            _ => None,
        }
    }
}

fn compare(attribute: &str, lhs: &AttributeValue, op: CompareOp, rhs: &AttributeValue) -> Result<bool> {
    use AttributeValue::*;
    match (lhs, rhs) {
        (Number(a), Number(b)) => Ok(match op {
            CompareOp::Eq => a == b,
            CompareOp::Ne => a != b,
            CompareOp::Lt => a < b,
            CompareOp::Le => a <= b,
            CompareOp::Gt => a > b,
            CompareOp::Ge => a >= b,
        }),
        _ => match op {
            CompareOp::Eq => Ok(lhs == rhs),
            CompareOp::Ne => Ok(lhs != rhs),
            _ => Err(Error::IncomparableAttribute {
                attribute: attribute.to_string(),
                op: op.to_string(),
            }),
        },
    }
}

/// `true` for every individual holding a claim under `differentiator`.
pub fn claims_mask(dataset: &Dataset, differentiator: &ClaimsDifferentiator) -> Result<Vec<bool>> {
    differentiator.validate()?;
    let people = dataset.individuals();
    match differentiator {
        ClaimsDifferentiator::All => Ok(vec![true; people.len()]),
        ClaimsDifferentiator::OutcomeEquals(y) => {
            Ok(people.iter().map(|i| i.outcome == (*y == 1)).collect())
        }
        ClaimsDifferentiator::AttributePredicate {
            attribute,
            op,
            value,
        } => people
            .iter()
            .map(|i| {
                let v = i
                    .attributes
                    .get(attribute)
                    .ok_or_else(|| Error::UnknownAttribute(attribute.clone()))?;
                compare(attribute, v, *op, value)
            })
            .collect(),
    }
}

/// Number of claim holders per group, aligned with `dataset.groups()`.
pub fn claim_counts(dataset: &Dataset, mask: &[bool]) -> Vec<usize> {
    let mut counts = vec![0usize; dataset.groups().len()];
    for (&g, &m) in dataset.group_indices().iter().zip(mask) {
        if m {
            counts[g] += 1;
        }
    }
    counts
}

/// Checks that fairness can be evaluated: at least two groups, none without claim holders.
pub fn check_positions(dataset: &Dataset, counts: &[usize]) -> Result<()> {
    let groups = dataset.groups();
    if groups.len() < 2 {
        return Err(Error::TooFewGroups(groups.len()));
    }
    match counts.iter().position(|&c| c == 0) {
        Some(g) => Err(Error::EmptyPosition(groups[g].clone())),
        None => Ok(()),
    }
}

/// Mean decision-subject utility and claim-holder count of each relevant position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionUtilities {
    pub utilities: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
}

impl PositionUtilities {
    pub(crate) fn from_aligned(groups: &[String], utilities: &[f64], counts: &[usize]) -> Self {
        PositionUtilities {
            utilities: groups.iter().cloned().zip(utilities.iter().copied()).collect(),
            counts: groups.iter().cloned().zip(counts.iter().copied()).collect(),
        }
    }

    pub fn min_utility(&self) -> f64 {
        self.utilities.values().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn position_utilities(
    dataset: &Dataset,
    decisions: &DecisionVector,
    ds_spec: &DsUtilitySpec,
    differentiator: &ClaimsDifferentiator,
    mode: EvaluationMode,
) -> Result<PositionUtilities> {
    decisions.check_len(dataset)?;
    let mask = claims_mask(dataset, differentiator)?;
    let counts = claim_counts(dataset, &mask);
    check_positions(dataset, &counts)?;

    let mut sums = vec![0.0; counts.len()];
    for ((ind, &g), (&d, &m)) in dataset
        .individuals()
        .iter()
        .zip(dataset.group_indices())
        .zip(decisions.as_slice().iter().zip(&mask))
    {
        if m {
            sums[g] += ds_utility_individual(ind, d, ds_spec, mode);
        }
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    Ok(PositionUtilities::from_aligned(dataset.groups(), &means, &counts))
}

/// Scores a distribution of position utilities; higher is fairer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternOfJustice {
    /// Negated range of position utilities.
    Egalitarian,
    /// Utility of the worst-off position.
    Maximin,
    /// Rank-weighted mean; `weights[0]` applies to the worst-off position.
    Prioritarian { weights: Vec<f64> },
    /// Negated total shortfall below `tau`.
    Sufficientarian { tau: f64 },
}

impl PatternOfJustice {
    /// Checks parameters that do not depend on the number of positions.
    pub fn validate(&self) -> Result<()> {
        match self {
            PatternOfJustice::Prioritarian { weights } => {
                if weights.is_empty() {
                    return Err(Error::InvalidPattern("weights must not be empty".into()));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::InvalidPattern(
                        "weights must be finite and non-negative".into(),
                    ));
                }
                if weights.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::InvalidPattern("weights must be non-increasing".into()));
                }
                if weights.iter().all(|&w| w == 0.0) {
                    return Err(Error::AllZeroWeights);
                }
                Ok(())
            }
            PatternOfJustice::Sufficientarian { tau } if !tau.is_finite() => {
                Err(Error::InvalidPattern("tau must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    /// Checks that the pattern can score `positions` relevant positions.
    pub fn validate_for(&self, positions: usize) -> Result<()> {
        self.validate()?;
        if let PatternOfJustice::Prioritarian { weights } = self {
            if weights.len() != positions {
                return Err(Error::WeightLengthMismatch {
                    expected: positions,
                    actual: weights.len(),
                });
            }
        }
        Ok(())
    }
}

pub fn fairness_score(positions: &PositionUtilities, pattern: &PatternOfJustice) -> Result<f64> {
    let values: Vec<f64> = positions.utilities.values().copied().collect();
    score_values(&values, pattern)
}

/// Scores position utilities given in group-label order.
pub(crate) fn score_values(values: &[f64], pattern: &PatternOfJustice) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooFewGroups(values.len()));
    }
    pattern.validate_for(values.len())?;
    // stable sort keeps label order among ties
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let worst = sorted[0];
    let best = sorted[sorted.len() - 1];
    Ok(match pattern {
        PatternOfJustice::Egalitarian => worst - best,
        PatternOfJustice::Maximin => worst,
        PatternOfJustice::Prioritarian { weights } => {
            let num = sorted.iter().zip(weights).fold(0.0, |acc, (u, w)| acc + w * u);
            let den = weights.iter().fold(0.0, |acc, w| acc + w);
            num / den
        }
        PatternOfJustice::Sufficientarian { tau } => {
            let shortfall = sorted.iter().fold(0.0, |acc, u| acc + (tau - u).max(0.0));
            0.0 - shortfall
        }
    })
}
