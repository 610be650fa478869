//! CSV datasets.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttributeValue, Dataset, Individual};

/// Which CSV columns hold which fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub score_column: String,
    pub group_column: String,
    pub outcome_column: String,
    #[serde(default)]
    pub amount_column: Option<String>,
    /// Ids default to the 1-based data row number.
    #[serde(default)]
    pub id_column: Option<String>,
    #[serde(default)]
    pub attribute_columns: Vec<String>,
    /// Also keep every unmapped column as an attribute.
    #[serde(default)]
    pub include_other_columns: bool,
}

impl DatasetSchema {
    pub fn new(score: &str, group: &str, outcome: &str) -> Self {
        DatasetSchema {
            score_column: score.into(),
            group_column: group.into(),
            outcome_column: outcome.into(),
            amount_column: None,
            id_column: None,
            attribute_columns: Vec::new(),
            include_other_columns: false,
        }
    }

    fn mapped(&self) -> Vec<&str> {
        let mut cols = vec![
            self.score_column.as_str(),
            self.group_column.as_str(),
            self.outcome_column.as_str(),
        ];
        cols.extend(self.amount_column.as_deref());
        cols.extend(self.id_column.as_deref());
        cols
    }
}

impl Default for DatasetSchema {
    fn default() -> Self {
        DatasetSchema::new("score", "group", "outcome")
    }
}

fn column(header: &csv::StringRecord, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Parses an RFC 4180 CSV file with a header row. No partial datasets are returned.
pub fn parse_dataset<R: Read>(reader: R, schema: &DatasetSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            reason: e.to_string(),
        })?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyFile);
    }

    let mapped = schema.mapped();
    let mut seen = HashSet::new();
    for name in &mapped {
        if !seen.insert(*name) {
            return Err(Error::DuplicateColumn(name.to_string()));
        }
    }
    let score_at = column(&header, &schema.score_column)?;
    let group_at = column(&header, &schema.group_column)?;
    let outcome_at = column(&header, &schema.outcome_column)?;
    let amount_at = schema
        .amount_column
        .as_deref()
        .map(|c| column(&header, c))
        .transpose()?;
    let id_at = schema.id_column.as_deref().map(|c| column(&header, c)).transpose()?;
    let mut attribute_at: Vec<(String, usize)> = schema
        .attribute_columns
        .iter()
        .map(|c| Ok((c.clone(), column(&header, c)?)))
        .collect::<Result<_>>()?;
    if schema.include_other_columns {
        for (i, h) in header.iter().enumerate() {
            if !mapped.contains(&h) && !attribute_at.iter().any(|(n, _)| n == h) {
                attribute_at.push((h.to_string(), i));
            }
        }
    }

    let mut individuals = Vec::new();
    let mut ids = HashSet::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            reason: e.to_string(),
        })?;
        let cell = |i: usize| record.get(i).unwrap_or("").trim();

        let raw = cell(score_at);
        let score = match raw.parse::<f64>() {
            Ok(s) if (0.0..=1.0).contains(&s) => s,
            _ => {
                return Err(Error::BadScore {
                    row,
                    column: schema.score_column.clone(),
                    value: raw.to_string(),
                })
            }
        };
        let raw = cell(outcome_at);
        let outcome = match raw {
            "1" => true,
            "0" => false,
            _ => {
                return Err(Error::BadOutcome {
                    row,
                    column: schema.outcome_column.clone(),
                    value: raw.to_string(),
                })
            }
        };
        let amount = match amount_at {
            None => 1.0,
            Some(i) => match cell(i).parse::<f64>() {
                Ok(a) if a.is_finite() && a >= 0.0 => a,
                _ => {
                    return Err(Error::BadAmount {
                        row,
                        column: schema.amount_column.clone().unwrap_or_default(),
                        value: cell(i).to_string(),
                    })
                }
            },
        };
        let id = match id_at {
            Some(i) => cell(i).to_string(),
            None => row.to_string(),
        };
        if !ids.insert(id.clone()) {
            return Err(Error::DuplicateId {
                row,
                column: schema.id_column.clone().unwrap_or_else(|| "<row>".into()),
                value: id,
            });
        }
        let attributes: BTreeMap<String, AttributeValue> = attribute_at
            .iter()
            .map(|(name, i)| (name.clone(), AttributeValue::parse(cell(*i))))
            .collect();

        individuals.push(Individual {
            id,
            score,
            group: cell(group_at).to_string(),
            outcome,
            amount,
            attributes,
        });
    }
    if individuals.is_empty() {
        return Err(Error::EmptyFile);
    }
    Dataset::new(individuals)
}

pub fn parse_dataset_str(text: &str, schema: &DatasetSchema) -> Result<Dataset> {
    parse_dataset(text.as_bytes(), schema)
}
