//! Individuals, datasets and threshold decision rules.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold that rejects everybody, since acceptance is `score >= threshold` and scores are at most 1.
pub const REJECT_ALL: f64 = 1.01;

/// Value of an extra per-individual attribute usable by claim predicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Number(f64),
    Text(String),
}

impl AttributeValue {
    /// Numeric if the cell parses as a finite number, text otherwise.
    pub fn parse(raw: &str) -> Self {
        match raw.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => AttributeValue::Number(v),
            _ => AttributeValue::Text(raw.to_string()),
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Number(v) => write!(f, "{v}"),
            AttributeValue::Text(s) => f.write_str(s),
        }
    }
}

/// One decision subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: String,
    /// Model estimate of P(Y = 1 | X).
    pub score: f64,
    pub group: String,
    /// Observed decision-relevant outcome.
    pub outcome: bool,
    #[serde(default = "default_amount")]
    pub amount: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, AttributeValue>,
}

fn default_amount() -> f64 {
    1.0
}

impl Individual {
    pub fn new(id: impl Into<String>, score: f64, group: impl Into<String>, outcome: bool) -> Self {
        Individual {
            id: id.into(),
            score,
            group: group.into(),
            outcome,
            amount: 1.0,
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_amount(mut self, amount: f64) -> Self {
        self.amount = amount;
        self
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: AttributeValue) -> Self {
        self.attributes.insert(name.into(), value);
        self
    }

    fn check(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidIndividual {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if !(0.0..=1.0).contains(&self.score) {
            return Err(invalid("score must lie in [0, 1]"));
        }
        if !(self.amount.is_finite() && self.amount >= 0.0) {
            return Err(invalid("amount must be a finite non-negative number"));
        }
        Ok(())
    }
}

/// An ordered, validated, immutable collection of individuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct Dataset {
    individuals: Vec<Individual>,
    groups: Vec<String>,
    group_index: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    individuals: Vec<Individual>,
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = Error;

    fn try_from(repr: DatasetRepr) -> Result<Self> {
        Dataset::new(repr.individuals)
    }
}

impl From<Dataset> for DatasetRepr {
    fn from(ds: Dataset) -> Self {
        DatasetRepr {
            individuals: ds.individuals,
        }
    }
}

impl Dataset {
    pub fn new(individuals: Vec<Individual>) -> Result<Self> {
        if individuals.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = HashSet::with_capacity(individuals.len());
        for ind in &individuals {
            ind.check()?;
            if !seen.insert(ind.id.as_str()) {
                return Err(Error::DuplicateIdentifier { id: ind.id.clone() });
            }
        }
        let groups: Vec<String> = individuals
            .iter()
            .map(|i| i.group.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let group_index = individuals
            .iter()
            .map(|i| groups.binary_search(&i.group).expect("group in vocabulary"))
            .collect();
        Ok(Dataset {
            individuals,
            groups,
            group_index,
        })
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    /// Sorted distinct group labels.
    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    /// Position of each individual's group in [`Dataset::groups`].
    pub fn group_indices(&self) -> &[usize] {
        &self.group_index
    }

    pub fn group_position(&self, group: &str) -> Option<usize> {
        self.groups.binary_search_by(|g| g.as_str().cmp(group)).ok()
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Concatenation of two datasets; ids must stay unique.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        let mut all = self.individuals.clone();
        all.extend(other.individuals.iter().cloned());
        Dataset::new(all)
    }
}

/// Sorted distinct group labels of the dataset.
pub fn groups(dataset: &Dataset) -> Vec<String> {
    dataset.groups().to_vec()
}

/// Acceptance thresholds on the score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    Uniform { threshold: f64 },
    GroupSpecific { thresholds: BTreeMap<String, f64> },
}

fn check_threshold(t: f64) -> Result<()> {
    if (0.0..=REJECT_ALL).contains(&t) {
        Ok(())
    } else {
        Err(Error::ThresholdOutOfRange(t))
    }
}

impl DecisionRule {
    pub fn uniform(threshold: f64) -> Self {
        DecisionRule::Uniform { threshold }
    }

    pub fn group_specific<I, S>(thresholds: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        DecisionRule::GroupSpecific {
            thresholds: thresholds.into_iter().map(|(g, t)| (g.into(), t)).collect(),
        }
    }

    /// Thresholds aligned with `dataset.groups()`, validating coverage and range.
    pub fn thresholds_for(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        match self {
            DecisionRule::Uniform { threshold } => {
                check_threshold(*threshold)?;
                Ok(vec![*threshold; dataset.groups().len()])
            }
            DecisionRule::GroupSpecific { thresholds } => {
                if let Some(unknown) = thresholds.keys().find(|g| dataset.group_position(g).is_none()) {
                    return Err(Error::UnknownGroup(unknown.clone()));
                }
                dataset
                    .groups()
                    .iter()
                    .map(|g| {
                        let t = *thresholds
                            .get(g)
                            .ok_or_else(|| Error::MissingGroupThreshold(g.clone()))?;
                        check_threshold(t)?;
                        Ok(t)
                    })
                    .collect()
            }
        }
    }

    /// The same rule written out per group.
    pub fn to_group_specific(&self, dataset: &Dataset) -> Result<DecisionRule> {
        let ts = self.thresholds_for(dataset)?;
        Ok(DecisionRule::group_specific(
            dataset.groups().iter().cloned().zip(ts),
        ))
    }
}

impl fmt::Display for DecisionRule {
    /// Formats in the command-line rule syntax (`u:<t>` or `g:<group>=<t>,...`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecisionRule::Uniform { threshold } => write!(f, "u:{threshold}"),
            DecisionRule::GroupSpecific { thresholds } => {
                f.write_str("g:")?;
                for (i, (g, t)) in thresholds.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{g}={t}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::str::FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::schema("rule", reason);
        if let Some(t) = s.strip_prefix("u:") {
            let threshold = t.trim().parse::<f64>().map_err(|_| bad("threshold is not a number"))?;
            check_threshold(threshold)?;
            return Ok(DecisionRule::Uniform { threshold });
        }
        if let Some(body) = s.strip_prefix("g:") {
            let mut thresholds = BTreeMap::new();
            for part in body.split(',') {
                let (g, t) = part
                    .rsplit_once('=')
                    .ok_or_else(|| bad("expected <group>=<threshold>"))?;
                let t = t.trim().parse::<f64>().map_err(|_| bad("threshold is not a number"))?;
                check_threshold(t)?;
                if thresholds.insert(g.trim().to_string(), t).is_some() {
                    return Err(bad("group listed twice"));
                }
            }
            return Ok(DecisionRule::GroupSpecific { thresholds });
        }
        Err(bad("expected u:<threshold> or g:<group>=<threshold>,..."))
    }
}

/// Binary decisions aligned with a dataset's individuals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecisionVector(Vec<bool>);

impl DecisionVector {
    pub fn new(decisions: Vec<bool>) -> Self {
        DecisionVector(decisions)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn accepted(&self) -> usize {
        self.0.iter().filter(|&&d| d).count()
    }

    pub(crate) fn check_len(&self, dataset: &Dataset) -> Result<()> {
        if self.0.len() == dataset.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected: dataset.len(),
                actual: self.0.len(),
            })
        }
    }
}

impl From<Vec<bool>> for DecisionVector {
    fn from(v: Vec<bool>) -> Self {
        DecisionVector(v)
    }
}

/// Accept individual `i` iff its score is at least its group's threshold.
pub fn apply_rule(dataset: &Dataset, rule: &DecisionRule) -> Result<DecisionVector> {
    let thresholds = rule.thresholds_for(dataset)?;
    Ok(apply_thresholds(dataset, &thresholds))
}

/// `thresholds` must be aligned with `dataset.groups()`.
pub(crate) fn apply_thresholds(dataset: &Dataset, thresholds: &[f64]) -> DecisionVector {
    dataset
        .individuals()
        .iter()
        .zip(dataset.group_indices())
        .map(|(ind, &g)| ind.score >= thresholds[g])
        .collect::<Vec<_>>()
        .into()
}
