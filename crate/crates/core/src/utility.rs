//! Decision-maker and decision-subject utility.
//!
//! Both parties are described by a 2x2 table indexed by decision `d` and outcome `y`.
//! In [`EvaluationMode::Expected`] the unknown outcome is replaced by the score `p`,
//! giving `p * u(d, 1) + (1 - p) * u(d, 0)`; in [`EvaluationMode::Empirical`] the observed
//! outcome selects the cell. Lending is the table `(z, -1, 0, 0)` scaled by the loan amount.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, DecisionVector, Individual};

/// Utility of each (decision, outcome) combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityTable {
    /// Accepted, outcome 1.
    pub u11: f64,
    /// Accepted, outcome 0.
    pub u10: f64,
    /// Rejected, outcome 1.
    pub u01: f64,
    /// Rejected, outcome 0.
    pub u00: f64,
}

impl UtilityTable {
    pub const fn new(u11: f64, u10: f64, u01: f64, u00: f64) -> Self {
        UtilityTable { u11, u10, u01, u00 }
    }

    /// The lending case-study table for decision subjects: +10, -5, -1, 0.
    pub const fn lending_subjects() -> Self {
        UtilityTable::new(10.0, -5.0, -1.0, 0.0)
    }

    #[inline]
    pub fn get(&self, decision: bool, outcome: bool) -> f64 {
        match (decision, outcome) {
            (true, true) => self.u11,
            (true, false) => self.u10,
            (false, true) => self.u01,
            (false, false) => self.u00,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        UtilityTable::new(self.u11 * c, self.u10 * c, self.u01 * c, self.u00 * c)
    }

    fn is_finite(&self) -> bool {
        [self.u11, self.u10, self.u01, self.u00].iter().all(|v| v.is_finite())
    }

    #[inline]
    fn evaluate(&self, ind: &Individual, decision: bool, mode: EvaluationMode, amount_scaled: bool) -> f64 {
        let v = match mode {
            EvaluationMode::Expected => {
                let p = ind.score;
                p * self.get(decision, true) + (1.0 - p) * self.get(decision, false)
            }
            EvaluationMode::Empirical => self.get(decision, ind.outcome),
        };
        if amount_scaled {
            v * ind.amount
        } else {
            v
        }
    }
}

/// How the decision maker values decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmUtilitySpec {
    /// Repaid loans earn `interest_rate * amount`, defaults lose `amount`, rejections are neutral.
    Lending { interest_rate: f64 },
    Table {
        table: UtilityTable,
        amount_scaled: bool,
    },
}

impl DmUtilitySpec {
    pub fn lending(interest_rate: f64) -> Self {
        DmUtilitySpec::Lending { interest_rate }
    }

    pub fn table(table: UtilityTable, amount_scaled: bool) -> Self {
        DmUtilitySpec::Table {
            table,
            amount_scaled,
        }
    }

    /// Equivalent table form and whether it is scaled by amount.
    pub fn as_table(&self) -> (UtilityTable, bool) {
        match *self {
            DmUtilitySpec::Lending { interest_rate } => {
                (UtilityTable::new(interest_rate, -1.0, 0.0, 0.0), true)
            }
            DmUtilitySpec::Table {
                table,
                amount_scaled,
            } => (table, amount_scaled),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DmUtilitySpec::Lending { interest_rate } => {
                if !(interest_rate.is_finite() && interest_rate > 0.0) {
                    return Err(Error::InvalidUtilitySpec(
                        "interest rate must be finite and positive".into(),
                    ));
                }
            }
            DmUtilitySpec::Table { table, .. } => {
                if !table.is_finite() {
                    return Err(Error::InvalidUtilitySpec("table entries must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// How decision subjects value decisions, optionally differing by group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsUtilitySpec {
    pub base: UtilityTable,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_group_overrides: BTreeMap<String, UtilityTable>,
    #[serde(default)]
    pub amount_scaled: bool,
}

impl DsUtilitySpec {
    pub fn new(base: UtilityTable) -> Self {
        DsUtilitySpec {
            base,
            per_group_overrides: BTreeMap::new(),
            amount_scaled: false,
        }
    }

    pub fn with_override(mut self, group: impl Into<String>, table: UtilityTable) -> Self {
        self.per_group_overrides.insert(group.into(), table);
        self
    }

    pub fn table_for(&self, group: &str) -> &UtilityTable {
        self.per_group_overrides.get(group).unwrap_or(&self.base)
    }

    /// Every table multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        DsUtilitySpec {
            base: self.base.scaled(c),
            per_group_overrides: self.per_group_overrides.iter().map(|(g, t)| (g.clone(), t.scaled(c))).collect(),
            amount_scaled: self.amount_scaled,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.base.is_finite() || !self.per_group_overrides.values().all(UtilityTable::is_finite) {
            return Err(Error::InvalidUtilitySpec("table entries must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    /// Weight outcomes by the score.
    #[default]
    Expected,
    /// Use the observed outcome.
    Empirical,
}

pub fn dm_utility_individual(
    individual: &Individual,
    decision: bool,
    spec: &DmUtilitySpec,
    mode: EvaluationMode,
) -> f64 {
    let (table, scaled) = spec.as_table();
    table.evaluate(individual, decision, mode, scaled)
}

/// Sum of individual decision-maker utilities in dataset order.
pub fn dm_utility_total(
    dataset: &Dataset,
    decisions: &DecisionVector,
    spec: &DmUtilitySpec,
    mode: EvaluationMode,
) -> Result<f64> {
    decisions.check_len(dataset)?;
    Ok(dataset
        .individuals()
        .iter()
        .zip(decisions.as_slice())
        .fold(0.0, |acc, (ind, &d)| acc + dm_utility_individual(ind, d, spec, mode)))
}

pub fn ds_utility_individual(
    individual: &Individual,
    decision: bool,
    spec: &DsUtilitySpec,
    mode: EvaluationMode,
) -> f64 {
    spec.table_for(&individual.group)
        .evaluate(individual, decision, mode, spec.amount_scaled)
}

/// Why no interior break-even threshold exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    AlwaysAccept,
    AlwaysReject,
    /// Accepting pays off only for low scores.
    Reversed,
}

impl fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Degeneracy::AlwaysAccept => "always accept",
            Degeneracy::AlwaysReject => "always reject",
            Degeneracy::Reversed => "accepting only low scores",
        })
    }
}

/// Score at which accepting and rejecting have equal expected decision-maker utility.
///
/// With `gain = u11 - u01` (advantage of accepting a repayer) and `loss = u00 - u10`
/// (cost of accepting a defaulter), the break-even score is `loss / (gain + loss)`.
/// The amount multiplies both sides and cancels.
pub fn optimal_uniform_threshold(spec: &DmUtilitySpec) -> Result<f64> {
    spec.validate()?;
    let (t, _) = spec.as_table();
    let gain = t.u11 - t.u01;
    let loss = t.u00 - t.u10;
    // accept-minus-reject at p = 1 is `gain`, at p = 0 it is `-loss`
    match (gain > 0.0, loss > 0.0) {
        (true, true) => Ok(loss / (gain + loss)),
        (true, false) => Err(Error::DegenerateSpec(Degeneracy::AlwaysAccept)),
        (false, true) => Err(Error::DegenerateSpec(Degeneracy::AlwaysReject)),
        (false, false) if gain == 0.0 && loss == 0.0 => {
            Err(Error::DegenerateSpec(Degeneracy::AlwaysReject))
        }
        (false, false) if gain == 0.0 => Err(Error::DegenerateSpec(Degeneracy::AlwaysAccept)),
        (false, false) if loss == 0.0 => Err(Error::DegenerateSpec(Degeneracy::AlwaysReject)),
        (false, false) => Err(Error::DegenerateSpec(Degeneracy::Reversed)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_rule, DecisionRule};
    use proptest::prelude::*;

    fn ind(p: f64, y: bool, s: f64) -> Individual {
        Individual::new("i", p, "F", y).with_amount(s)
    }

    #[test]
    fn lending_break_even_score_is_neutral() {
        let spec = DmUtilitySpec::lending(0.1);
        let u = dm_utility_individual(&ind(1.0 / 1.1, true, 1000.0), true, &spec, EvaluationMode::Expected);
        assert!(u.abs() < 1e-9, "{u}");
    }

    #[test]
    fn lending_certain_outcomes() {
        let spec = DmUtilitySpec::lending(0.1);
        let e = EvaluationMode::Expected;
        assert_eq!(dm_utility_individual(&ind(1.0, true, 500.0), true, &spec, e), 50.0);
        let u = dm_utility_individual(&ind(0.7, false, 200.0), true, &spec, EvaluationMode::Empirical);
        assert_eq!(u, -200.0);
        for mode in [EvaluationMode::Expected, EvaluationMode::Empirical] {
            assert_eq!(dm_utility_individual(&ind(0.3, true, 9.0), false, &spec, mode), 0.0);
        }
    }

    #[test]
    fn totals_sum_in_order() {
        let ds = Dataset::new(vec![
            Individual::new("1", 0.95, "F", true),
            Individual::new("2", 0.80, "F", true),
            Individual::new("3", 0.95, "M", true),
            Individual::new("4", 0.50, "M", false),
        ])
        .unwrap();
        let spec = DmUtilitySpec::lending(0.1);
        let d = apply_rule(&ds, &DecisionRule::uniform(0.9)).unwrap();
        assert_eq!(d.as_slice(), &[true, false, true, false]);
        let total = dm_utility_total(&ds, &d, &spec, EvaluationMode::Expected).unwrap();
        assert!((total - 0.09).abs() < 1e-12, "{total}");

        let none = apply_rule(&ds, &DecisionRule::uniform(1.01)).unwrap();
        assert_eq!(dm_utility_total(&ds, &none, &spec, EvaluationMode::Expected).unwrap(), 0.0);

        let short = DecisionVector::new(vec![true]);
        assert!(matches!(
            dm_utility_total(&ds, &short, &spec, EvaluationMode::Expected),
            Err(Error::LengthMismatch { expected: 4, actual: 1 })
        ));
    }

    #[test]
    fn additivity_with_table_spec() {
        let ds = Dataset::new(vec![
            Individual::new("1", 0.5, "F", true),
            Individual::new("2", 0.5, "F", false),
        ])
        .unwrap();
        let spec = DmUtilitySpec::table(UtilityTable::new(3.0, -1.0, 0.0, 0.0), false);
        let d = DecisionVector::new(vec![true, true]);
        let total = dm_utility_total(&ds, &d, &spec, EvaluationMode::Empirical).unwrap();
        assert_eq!(total, 2.0);
    }

    #[test]
    fn subject_table_lookup_and_expectation() {
        let spec = DsUtilitySpec::new(UtilityTable::lending_subjects());
        let emp = EvaluationMode::Empirical;
        assert_eq!(ds_utility_individual(&ind(0.5, true, 1.0), true, &spec, emp), 10.0);
        assert_eq!(ds_utility_individual(&ind(0.5, false, 1.0), false, &spec, emp), 0.0);
        let v = ds_utility_individual(&ind(0.8, true, 1.0), true, &spec, EvaluationMode::Expected);
        assert!((v - 7.0).abs() < 1e-12);
    }

    #[test]
    fn subject_overrides_and_scaling() {
        let spec = DsUtilitySpec::new(UtilityTable::lending_subjects())
            .with_override("M", UtilityTable::new(5.0, -5.0, -1.0, 0.0));
        let emp = EvaluationMode::Empirical;
        let f = Individual::new("f", 0.5, "F", true);
        let m = Individual::new("m", 0.5, "M", true).with_amount(3.0);
        assert_eq!(ds_utility_individual(&f, true, &spec, emp), 10.0);
        assert_eq!(ds_utility_individual(&m, true, &spec, emp), 5.0);
        let scaled = DsUtilitySpec {
            amount_scaled: true,
            ..spec
        };
        assert_eq!(ds_utility_individual(&m, true, &scaled, emp), 15.0);
    }

    #[test]
    fn break_even_closed_forms() {
        let lending = optimal_uniform_threshold(&DmUtilitySpec::lending(0.1)).unwrap();
        assert!((lending - 1.0 / 1.1).abs() < 1e-12);
        let table = optimal_uniform_threshold(&DmUtilitySpec::table(
            UtilityTable::new(0.1, -1.0, 0.0, 0.0),
            false,
        ))
        .unwrap();
        assert_eq!(table, lending);
        let sym = DmUtilitySpec::table(UtilityTable::new(1.0, -1.0, 0.0, 0.0), false);
        assert_eq!(optimal_uniform_threshold(&sym).unwrap(), 0.5);
        assert_eq!(optimal_uniform_threshold(&DmUtilitySpec::lending(1.0)).unwrap(), 0.5);
    }

    #[test]
    fn break_even_degenerate_cases() {
        let t = |a, b, c, d| DmUtilitySpec::table(UtilityTable::new(a, b, c, d), false);
        let deg = |s| match optimal_uniform_threshold(&s) {
            Err(Error::DegenerateSpec(d)) => d,
            other => panic!("{other:?}"),
        };
        assert_eq!(deg(t(1.0, 1.0, 0.0, 0.0)), Degeneracy::AlwaysAccept);
        assert_eq!(deg(t(-1.0, -1.0, 0.0, 0.0)), Degeneracy::AlwaysReject);
        assert_eq!(deg(t(-1.0, 1.0, 0.0, 0.0)), Degeneracy::Reversed);
        assert_eq!(deg(t(0.0, 0.0, 0.0, 0.0)), Degeneracy::AlwaysReject);
        assert_eq!(Degeneracy::AlwaysAccept.to_string(), "always accept");
        assert!(matches!(
            optimal_uniform_threshold(&DmUtilitySpec::lending(0.0)),
            Err(Error::InvalidUtilitySpec(_))
        ));
        assert!(matches!(
            optimal_uniform_threshold(&t(f64::NAN, 0.0, 0.0, 0.0)),
            Err(Error::InvalidUtilitySpec(_))
        ));
    }

    fn arb_individual() -> impl Strategy<Value = Individual> {
        (0.0..=1.0f64, any::<bool>(), 0.0..1e4f64)
            .prop_map(|(p, y, s)| Individual::new("i", p, "G", y).with_amount(s))
    }

    fn modes() -> impl Strategy<Value = EvaluationMode> {
        prop_oneof![Just(EvaluationMode::Expected), Just(EvaluationMode::Empirical)]
    }

    proptest! {
        #[test]
        fn lending_equals_its_table(ind in arb_individual(), z in 0.001..2.0f64, d in any::<bool>(), mode in modes()) {
            let lending = DmUtilitySpec::lending(z);
            let table = DmUtilitySpec::table(UtilityTable::new(z, -1.0, 0.0, 0.0), true);
            prop_assert_eq!(
                dm_utility_individual(&ind, d, &lending, mode).to_bits(),
                dm_utility_individual(&ind, d, &table, mode).to_bits()
            );
        }

        #[test]
        fn certain_scores_make_modes_agree(y in any::<bool>(), d in any::<bool>(), s in 0.0..1e3f64,
                                           u in prop::array::uniform4(-10.0..10.0f64)) {
            let ind = Individual::new("i", if y { 1.0 } else { 0.0 }, "G", y).with_amount(s);
            let table = UtilityTable::new(u[0], u[1], u[2], u[3]);
            let dm = DmUtilitySpec::table(table, true);
            let ds = DsUtilitySpec::new(table);
            prop_assert_eq!(
                dm_utility_individual(&ind, d, &dm, EvaluationMode::Expected),
                dm_utility_individual(&ind, d, &dm, EvaluationMode::Empirical)
            );
            prop_assert_eq!(
                ds_utility_individual(&ind, d, &ds, EvaluationMode::Expected),
                ds_utility_individual(&ind, d, &ds, EvaluationMode::Empirical)
            );
        }

        #[test]
        fn break_even_separates_profitable_scores(gain in 0.01..10.0f64, loss in 0.01..10.0f64,
                                                  u01 in -5.0..5.0f64, u00 in -5.0..5.0f64) {
            let spec = DmUtilitySpec::table(UtilityTable::new(u01 + gain, u00 - loss, u01, u00), false);
            let p_star = optimal_uniform_threshold(&spec).unwrap();
            prop_assert!(p_star > 0.0 && p_star < 1.0);
            for k in 0..=200 {
                let p = k as f64 / 200.0;
                let i = Individual::new("i", p, "G", true);
                let advantage = dm_utility_individual(&i, true, &spec, EvaluationMode::Expected)
                    - dm_utility_individual(&i, false, &spec, EvaluationMode::Expected);
                if p > p_star + 1e-9 {
                    prop_assert!(advantage > 0.0, "p={} p*={} adv={}", p, p_star, advantage);
                } else if p < p_star - 1e-9 {
                    prop_assert!(advantage < 0.0);
                }
            }
        }
    }
}
