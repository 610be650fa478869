//! The value-configuration document.
//!
//! One JSON file records value choices one through four plus the sweep grid and the
//! viability floor. Parsing reports violations with a JSON-pointer path; serializing
//! produces a canonical compact form whose SHA-256 is the configuration digest.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::DatasetSchema;
use crate::justice::{ClaimsDifferentiator, PatternOfJustice};
use crate::model::{Dataset, REJECT_ALL};
use crate::sweep::{
    filter_viable, pareto_front, sweep, threshold_grid, AnalysisSpec, SweepOptions, SweepResult,
    ThresholdGrid, DEFAULT_GRID_SIZE,
};
use crate::utility::{DmUtilitySpec, DsUtilitySpec, EvaluationMode, UtilityTable};

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `n` evenly spaced thresholds in `[lo, hi]`, shared by all groups.
    Linspace { n: usize, lo: f64, hi: f64 },
    Explicit(BTreeMap<String, Vec<f64>>),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Linspace {
            n: DEFAULT_GRID_SIZE,
            lo: 0.0,
            hi: 1.0,
        }
    }
}

/// Dataset columns other than the group column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    #[serde(default = "default_score_column")]
    pub score: String,
    #[serde(default = "default_outcome_column")]
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<String>,
}

fn default_score_column() -> String {
    "score".into()
}

fn default_outcome_column() -> String {
    "outcome".into()
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec {
            score: default_score_column(),
            outcome: default_outcome_column(),
            amount: None,
            id: None,
            attributes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueConfig {
    pub analysis: AnalysisSpec,
    /// Column holding the group label that defines relevant positions.
    pub positions: String,
    pub grid: GridSpec,
    /// Minimum decision-maker utility for a rule to count as viable; `-inf` disables it.
    pub viability_floor: f64,
    pub columns: ColumnSpec,
}

// Wire format.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDocument {
    dm_utility: DmDocument,
    ds_utility: DsDocument,
    claims: ClaimsDifferentiator,
    positions: String,
    pattern: PatternOfJustice,
    #[serde(default)]
    mode: EvaluationMode,
    #[serde(default)]
    grid: GridDocument,
    #[serde(default = "default_floor")]
    viability_floor: Option<f64>,
    #[serde(default)]
    columns: ColumnSpec,
}

fn default_floor() -> Option<f64> {
    Some(0.0)
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum DmDocument {
    Lending {
        interest_rate: f64,
    },
    Table {
        u11: f64,
        u10: f64,
        u01: f64,
        u00: f64,
        #[serde(default)]
        amount_scaled: bool,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DsDocument {
    base: UtilityTable,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    #[serde(alias = "per_group")]
    per_group_overrides: BTreeMap<String, UtilityTable>,
    #[serde(default)]
    amount_scaled: bool,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    explicit: Option<BTreeMap<String, Vec<f64>>>,
}

impl TryFrom<ConfigDocument> for ValueConfig {
    type Error = Error;

    fn try_from(doc: ConfigDocument) -> Result<Self> {
        let dm_utility = match doc.dm_utility {
            DmDocument::Lending { interest_rate } => {
                if interest_rate <= 0.0 || !interest_rate.is_finite() {
                    return Err(Error::schema(
                        "/dm_utility/lending/interest_rate",
                        "must be positive",
                    ));
                }
                DmUtilitySpec::lending(interest_rate)
            }
            DmDocument::Table {
                u11,
                u10,
                u01,
                u00,
                amount_scaled,
            } => DmUtilitySpec::table(UtilityTable::new(u11, u10, u01, u00), amount_scaled),
        };
        let ds_utility = DsUtilitySpec {
            base: doc.ds_utility.base,
            per_group_overrides: doc.ds_utility.per_group_overrides,
            amount_scaled: doc.ds_utility.amount_scaled,
        };

        if let ClaimsDifferentiator::OutcomeEquals(y) = doc.claims {
            if y > 1 {
                return Err(Error::schema("/claims/outcome_equals", "must be 0 or 1"));
            }
        }
        if let ClaimsDifferentiator::AttributePredicate { attribute, .. } = &doc.claims {
            if attribute.is_empty() {
                return Err(Error::schema(
                    "/claims/attribute_predicate/attribute",
                    "must not be empty",
                ));
            }
        }

        validate_pattern(&doc.pattern)?;

        if doc.positions.is_empty() {
            return Err(Error::schema("/positions", "must name the group column"));
        }
        let c = &doc.columns;
        let mut names: Vec<(&str, &str)> = vec![
            ("/positions", doc.positions.as_str()),
            ("/columns/score", c.score.as_str()),
            ("/columns/outcome", c.outcome.as_str()),
        ];
        if let Some(a) = &c.amount {
            names.push(("/columns/amount", a));
        }
        if let Some(i) = &c.id {
            names.push(("/columns/id", i));
        }
        for (k, (path, name)) in names.iter().enumerate() {
            if names[..k].iter().any(|(_, other)| other == name) {
                return Err(Error::schema(*path, format!("column {name:?} is mapped twice")));
            }
        }

        let grid = grid_spec(doc.grid)?;

        let viability_floor = doc.viability_floor.unwrap_or(f64::NEG_INFINITY);

        Ok(ValueConfig {
            analysis: AnalysisSpec {
                dm_utility,
                ds_utility,
                claims: doc.claims,
                pattern: doc.pattern,
                mode: doc.mode,
            },
            positions: doc.positions,
            grid,
            viability_floor,
            columns: doc.columns,
        })
    }
}

fn validate_pattern(pattern: &PatternOfJustice) -> Result<()> {
    if let PatternOfJustice::Prioritarian { weights } = pattern {
        let path = "/pattern/prioritarian/weights";
        if weights.is_empty() {
            return Err(Error::schema(path, "must not be empty"));
        }
        if let Some(i) = weights.iter().position(|w| *w < 0.0) {
            return Err(Error::schema(format!("{path}/{i}"), "must be non-negative"));
        }
        if weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::schema(path, "must be non-increasing"));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::schema(path, "must contain a positive weight"));
        }
    }
    Ok(())
}

fn grid_spec(doc: GridDocument) -> Result<GridSpec> {
    if let Some(explicit) = doc.explicit {
        if doc.n.is_some() || doc.lo.is_some() || doc.hi.is_some() {
            return Err(Error::schema("/grid", "explicit grids exclude n, lo and hi"));
        }
        if explicit.is_empty() {
            return Err(Error::schema("/grid/explicit", "must list at least one group"));
        }
        for (g, values) in &explicit {
            let path = format!("/grid/explicit/{g}");
            if values.is_empty() {
                return Err(Error::schema(path, "must not be empty"));
            }
            if values.iter().any(|t| !(0.0..=REJECT_ALL).contains(t)) {
                return Err(Error::schema(path, format!("values must lie in [0, {REJECT_ALL}]")));
            }
            if values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::schema(path, "must be strictly increasing"));
            }
        }
        return Ok(GridSpec::Explicit(explicit));
    }
    let n = doc.n.unwrap_or(DEFAULT_GRID_SIZE);
    let lo = doc.lo.unwrap_or(0.0);
    let hi = doc.hi.unwrap_or(1.0);
    if n < 2 {
        return Err(Error::schema("/grid/n", "must be at least 2"));
    }
    if !(0.0..REJECT_ALL).contains(&lo) {
        return Err(Error::schema("/grid/lo", format!("must lie in [0, {REJECT_ALL})")));
    }
    if !(hi > lo && hi <= REJECT_ALL) {
        return Err(Error::schema("/grid/hi", format!("must lie in (lo, {REJECT_ALL}]")));
    }
    Ok(GridSpec::Linspace { n, lo, hi })
}

impl From<&ValueConfig> for ConfigDocument {
    fn from(c: &ValueConfig) -> Self {
        let a = &c.analysis;
        ConfigDocument {
            dm_utility: match a.dm_utility {
                DmUtilitySpec::Lending { interest_rate } => DmDocument::Lending { interest_rate },
                DmUtilitySpec::Table {
                    table,
                    amount_scaled,
                } => DmDocument::Table {
                    u11: table.u11,
                    u10: table.u10,
                    u01: table.u01,
                    u00: table.u00,
                    amount_scaled,
                },
            },
            ds_utility: DsDocument {
                base: a.ds_utility.base,
                per_group_overrides: a.ds_utility.per_group_overrides.clone(),
                amount_scaled: a.ds_utility.amount_scaled,
            },
            claims: a.claims.clone(),
            positions: c.positions.clone(),
            pattern: a.pattern.clone(),
            mode: a.mode,
            grid: match &c.grid {
                GridSpec::Linspace { n, lo, hi } => GridDocument {
                    n: Some(*n),
                    lo: Some(*lo),
                    hi: Some(*hi),
                    explicit: None,
                },
                GridSpec::Explicit(m) => GridDocument {
                    explicit: Some(m.clone()),
                    ..Default::default()
                },
            },
            viability_floor: c.viability_floor.is_finite().then_some(c.viability_floor),
            columns: c.columns.clone(),
        }
    }
}

impl Serialize for ValueConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConfigDocument::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ValueConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ConfigDocument::deserialize(d)?;
        ValueConfig::try_from(doc).map_err(serde::de::Error::custom)
    }
}

/// Reads and validates a configuration document, applying defaults.
pub fn parse_config<R: Read>(reader: R) -> Result<ValueConfig> {
    let mut de = serde_json::Deserializer::from_reader(reader);
    let doc: ConfigDocument = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let pointer = if path == "." {
            String::from("/")
        } else {
            format!("/{}", path.replace('.', "/"))
        };
        let reason = e.into_inner().to_string();
        Error::schema(pointer, reason)
    })?;
    de.end().map_err(|e| Error::schema("/", e.to_string()))?;
    ValueConfig::try_from(doc)
}

pub fn parse_config_str(text: &str) -> Result<ValueConfig> {
    parse_config(text.as_bytes())
}

impl ValueConfig {
    /// Canonical compact JSON.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        crate::digest::sha256_hex(self.to_canonical_json().as_bytes())
    }

    /// Columns to read from a dataset file. Attributes read by the claims predicate are added.
    pub fn dataset_schema(&self) -> DatasetSchema {
        let mut attributes = self.columns.attributes.clone();
        if let Some(a) = self.analysis.claims.attribute() {
            if !attributes.iter().any(|x| x == a) {
                attributes.push(a.to_string());
            }
        }
        DatasetSchema {
            score_column: self.columns.score.clone(),
            group_column: self.positions.clone(),
            outcome_column: self.columns.outcome.clone(),
            amount_column: self.columns.amount.clone(),
            id_column: self.columns.id.clone(),
            attribute_columns: attributes,
            include_other_columns: false,
        }
    }

    pub fn threshold_grid(&self, dataset: &Dataset) -> Result<ThresholdGrid> {
        match &self.grid {
            GridSpec::Linspace { n, lo, hi } => threshold_grid(dataset, *n, *lo, *hi),
            GridSpec::Explicit(m) => ThresholdGrid::new(m.clone()),
        }
    }

    /// Checks everything that depends on the dataset's group vocabulary and columns.
    pub fn validate_against(&self, dataset: &Dataset) -> Result<()> {
        if let Some(g) = self
            .analysis
            .ds_utility
            .per_group_overrides
            .keys()
            .find(|g| dataset.group_position(g).is_none())
        {
            return Err(Error::schema(
                format!("/ds_utility/per_group_overrides/{g}"),
                "no such group in the dataset",
            ));
        }
        if let GridSpec::Explicit(m) = &self.grid {
            if let Some(g) = m.keys().find(|g| dataset.group_position(g).is_none()) {
                return Err(Error::schema(
                    format!("/grid/explicit/{g}"),
                    "no such group in the dataset",
                ));
            }
            if let Some(g) = dataset.groups().iter().find(|g| !m.contains_key(*g)) {
                return Err(Error::schema(
                    "/grid/explicit",
                    format!("missing thresholds for group {g:?}"),
                ));
            }
        }
        self.analysis.prepare(dataset)?;
        Ok(())
    }

    /// Sweep, front extraction and viability flags, stamped with this config's digest.
    pub fn run(&self, dataset: &Dataset, options: SweepOptions<'_>) -> Result<SweepResult> {
        self.validate_against(dataset)?;
        let grid = self.threshold_grid(dataset)?;
        let mut result = sweep(dataset, &grid, &self.analysis, options)?;
        result.config_digest = self.digest();
        let result = pareto_front(result)?;
        Ok(filter_viable(result, self.viability_floor))
    }
}
