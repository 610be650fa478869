//! Grid sweep over group-specific thresholds and Pareto front extraction.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::justice::{
    check_positions, claim_counts, claims_mask, score_values, ClaimsDifferentiator,
    PatternOfJustice, PositionUtilities,
};
use crate::model::{apply_rule, Dataset, DecisionRule, REJECT_ALL};
use crate::utility::{
    dm_utility_individual, dm_utility_total, ds_utility_individual, DmUtilitySpec, DsUtilitySpec,
    EvaluationMode,
};

/// Grid size used when none is configured.
pub const DEFAULT_GRID_SIZE: usize = 101;
/// Largest sweep run without raising the cap.
pub const DEFAULT_SWEEP_CAP: u64 = 10_000_000;

/// Candidate thresholds for each group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub per_group: BTreeMap<String, Vec<f64>>,
}

/// `n` evenly spaced values from `lo` to `hi`, both included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * (i as f64 / last) })
        .collect()
}

/// The same `linspace(lo, hi, n)` for every group of the dataset.
pub fn threshold_grid(dataset: &Dataset, n: usize, lo: f64, hi: f64) -> Result<ThresholdGrid> {
    if n < 2 {
        return Err(Error::InvalidRange(format!("n = {n}, need at least 2")));
    }
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= REJECT_ALL) {
        return Err(Error::InvalidRange(format!(
            "need 0 <= lo < hi <= {REJECT_ALL}, got lo = {lo}, hi = {hi}"
        )));
    }
    let values = linspace(lo, hi, n);
    Ok(ThresholdGrid {
        per_group: dataset
            .groups()
            .iter()
            .map(|g| (g.clone(), values.clone()))
            .collect(),
    })
}

impl ThresholdGrid {
    pub fn new(per_group: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let grid = ThresholdGrid { per_group };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (g, values) in &self.per_group {
            if values.is_empty() {
                return Err(Error::InvalidGrid(format!("grid for {g:?} is empty")));
            }
            if values.iter().any(|t| !(0.0..=REJECT_ALL).contains(t)) {
                return Err(Error::InvalidGrid(format!(
                    "grid for {g:?} leaves [0, {REJECT_ALL}]"
                )));
            }
            if values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidGrid(format!(
                    "grid for {g:?} is not strictly increasing"
                )));
            }
        }
        Ok(())
    }

    /// Grids aligned with `dataset.groups()`.
    pub fn aligned(&self, dataset: &Dataset) -> Result<Vec<&[f64]>> {
        self.validate()?;
        if let Some(g) = self.per_group.keys().find(|g| dataset.group_position(g).is_none()) {
            return Err(Error::UnknownGroup(g.clone()));
        }
        dataset
            .groups()
            .iter()
            .map(|g| {
                self.per_group
                    .get(g)
                    .map(Vec::as_slice)
                    .ok_or_else(|| Error::MissingGroupThreshold(g.clone()))
            })
            .collect()
    }

    /// Number of threshold combinations.
    pub fn size(&self) -> u128 {
        self.per_group.values().map(|v| v.len() as u128).product()
    }

    /// Copy with `value` added to every group's grid.
    pub fn with_value(&self, value: f64) -> Result<Self> {
        let mut per_group = self.per_group.clone();
        for values in per_group.values_mut() {
            if let Err(pos) = values.binary_search_by(|v| v.total_cmp(&value)) {
                values.insert(pos, value);
            }
        }
        ThresholdGrid::new(per_group)
    }
}

/// Everything needed to score a decision rule: value choices one through four.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSpec {
    pub dm_utility: DmUtilitySpec,
    pub ds_utility: DsUtilitySpec,
    pub claims: ClaimsDifferentiator,
    pub pattern: PatternOfJustice,
    #[serde(default)]
    pub mode: EvaluationMode,
}

impl AnalysisSpec {
    /// Checks the spec can be evaluated on `dataset` and returns the claims mask.
    pub fn prepare(&self, dataset: &Dataset) -> Result<Vec<bool>> {
        self.dm_utility.validate()?;
        self.ds_utility.validate()?;
        let mask = claims_mask(dataset, &self.claims)?;
        check_positions(dataset, &claim_counts(dataset, &mask))?;
        self.pattern.validate_for(dataset.groups().len())?;
        Ok(mask)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedRule {
    pub rule: DecisionRule,
    pub dm_utility: f64,
    pub fairness_score: f64,
    pub position_utilities: PositionUtilities,
    pub on_front: bool,
    pub viable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Group vocabulary of the swept dataset.
    pub groups: Vec<String>,
    /// One entry per threshold combination, first group varying slowest.
    pub evaluated: Vec<EvaluatedRule>,
    pub config_digest: String,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.evaluated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evaluated.is_empty()
    }

    pub fn front_size(&self) -> usize {
        self.evaluated.iter().filter(|r| r.on_front).count()
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.evaluated.iter().map(|r| (r.dm_utility, r.fairness_score)).collect()
    }

    /// Thresholds of rule `index`, aligned with `groups`.
    pub fn thresholds(&self, index: usize) -> Vec<f64> {
        match &self.evaluated[index].rule {
            DecisionRule::GroupSpecific { thresholds } => {
                self.groups.iter().map(|g| thresholds[g]).collect()
            }
            DecisionRule::Uniform { threshold } => vec![*threshold; self.groups.len()],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions<'a> {
    pub cap: u64,
    /// Incremented once per evaluated rule.
    pub progress: Option<&'a AtomicUsize>,
}

impl Default for SweepOptions<'_> {
    fn default() -> Self {
        SweepOptions {
            cap: DEFAULT_SWEEP_CAP,
            progress: None,
        }
    }
}

/// Evaluates every combination of per-group thresholds.
///
/// Results come back in lexicographic grid order regardless of how many worker threads
/// run; each rule's sums are accumulated in dataset order, so values are bit-identical to
/// evaluating the rule on its own. Front and viability flags start out false.
pub fn sweep(
    dataset: &Dataset,
    grid: &ThresholdGrid,
    spec: &AnalysisSpec,
    options: SweepOptions<'_>,
) -> Result<SweepResult> {
    let mask = spec.prepare(dataset)?;
    let grids = grid.aligned(dataset)?;
    let size = grid.size();
    if size > options.cap as u128 {
        return Err(Error::SweepTooLarge {
            size,
            cap: options.cap,
        });
    }
    let size = size as usize;
    let groups = dataset.groups();
    let counts = claim_counts(dataset, &mask);
    let people = dataset.individuals();
    let group_of = dataset.group_indices();
    let (dm_reject, dm_accept): (Vec<f64>, Vec<f64>) = people
        .iter()
        .map(|i| {
            (
                dm_utility_individual(i, false, &spec.dm_utility, spec.mode),
                dm_utility_individual(i, true, &spec.dm_utility, spec.mode),
            )
        })
        .unzip();
    let (ds_reject, ds_accept): (Vec<f64>, Vec<f64>) = people
        .iter()
        .map(|i| {
            (
                ds_utility_individual(i, false, &spec.ds_utility, spec.mode),
                ds_utility_individual(i, true, &spec.ds_utility, spec.mode),
            )
        })
        .unzip();

    let evaluate = |index: usize| -> Result<EvaluatedRule> {
        let mut thresholds = vec![0.0; grids.len()];
        let mut rest = index;
        for (slot, values) in thresholds.iter_mut().zip(&grids).rev() {
            *slot = values[rest % values.len()];
            rest /= values.len();
        }
        let mut dm = 0.0;
        let mut sums = vec![0.0; groups.len()];
        for (i, ind) in people.iter().enumerate() {
            let g = group_of[i];
            let accept = ind.score >= thresholds[g];
            dm += if accept { dm_accept[i] } else { dm_reject[i] };
            if mask[i] {
                sums[g] += if accept { ds_accept[i] } else { ds_reject[i] };
            }
        }
        let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        let fairness = score_values(&means, &spec.pattern)?;
        if let Some(p) = options.progress {
            p.fetch_add(1, Ordering::Relaxed);
        }
        Ok(EvaluatedRule {
            rule: DecisionRule::group_specific(groups.iter().cloned().zip(thresholds)),
            dm_utility: dm,
            fairness_score: fairness,
            position_utilities: PositionUtilities::from_aligned(groups, &means, &counts),
            on_front: false,
            viable: false,
        })
    };
    let evaluated = (0..size)
        .into_par_iter()
        .with_min_len(32)
        .map(evaluate)
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        groups: groups.to_vec(),
        evaluated,
        config_digest: crate::digest::of_json(&(spec, grid)),
    })
}

/// Per-group breakdown of one rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDetail {
    pub rule: DecisionRule,
    pub dm_utility: f64,
    pub fairness_score: f64,
    pub position_utilities: PositionUtilities,
    pub accepted: BTreeMap<String, usize>,
    pub group_sizes: BTreeMap<String, usize>,
    pub acceptance_rates: BTreeMap<String, f64>,
}

/// Evaluates a single rule through the individual operations.
pub fn evaluate_rule(dataset: &Dataset, rule: &DecisionRule, spec: &AnalysisSpec) -> Result<RuleDetail> {
    spec.prepare(dataset)?;
    let rule = rule.to_group_specific(dataset)?;
    let decisions = apply_rule(dataset, &rule)?;
    let dm_utility = dm_utility_total(dataset, &decisions, &spec.dm_utility, spec.mode)?;
    let positions = crate::justice::position_utilities(
        dataset,
        &decisions,
        &spec.ds_utility,
        &spec.claims,
        spec.mode,
    )?;
    let fairness_score = crate::justice::fairness_score(&positions, &spec.pattern)?;

    let k = dataset.groups().len();
    let mut accepted = vec![0usize; k];
    let mut sizes = vec![0usize; k];
    for (&g, &d) in dataset.group_indices().iter().zip(decisions.as_slice()) {
        sizes[g] += 1;
        accepted[g] += d as usize;
    }
    let named = |v: &[usize]| -> BTreeMap<String, usize> {
        dataset.groups().iter().cloned().zip(v.iter().copied()).collect()
    };
    Ok(RuleDetail {
        rule,
        dm_utility,
        fairness_score,
        position_utilities: positions,
        acceptance_rates: dataset
            .groups()
            .iter()
            .enumerate()
            .map(|(g, name)| (name.clone(), accepted[g] as f64 / sizes[g] as f64))
            .collect(),
        accepted: named(&accepted),
        group_sizes: named(&sizes),
    })
}

/// Non-dominated flags for `(dm_utility, fairness_score)` points, both maximized.
///
/// `a` dominates `b` iff it is at least as good in both coordinates and strictly better in
/// one; identical points never dominate each other. Sort-and-scan, O(m log m).
/// Coordinates must not be NaN.
pub fn pareto_flags(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[b].0.total_cmp(&points[a].0));
    let mut flags = vec![false; points.len()];
    // best fairness among points with strictly larger dm utility
    let mut best_above: Option<f64> = None;
    let mut start = 0;
    while start < order.len() {
        let dm = points[order[start]].0;
        let end = start
            + order[start..]
                .iter()
                .take_while(|&&i| points[i].0 == dm)
                .count();
        let tier = &order[start..end];
        let tier_max = tier
            .iter()
            .map(|&i| points[i].1)
            .fold(f64::NEG_INFINITY, f64::max);
        for &i in tier {
            let f = points[i].1;
            flags[i] = f == tier_max && best_above.is_none_or(|b| f > b);
        }
        best_above = Some(best_above.map_or(tier_max, |b| b.max(tier_max)));
        start = end;
    }
    flags
}

/// Marks the non-dominated rules.
pub fn pareto_front(mut result: SweepResult) -> Result<SweepResult> {
    if result.is_empty() {
        return Err(Error::EmptySweep);
    }
    let flags = pareto_flags(&result.points());
    for (rule, on) in result.evaluated.iter_mut().zip(flags) {
        rule.on_front = on;
    }
    Ok(result)
}

/// Marks rules whose decision-maker utility reaches `floor`.
pub fn filter_viable(mut result: SweepResult, floor: f64) -> SweepResult {
    for rule in &mut result.evaluated {
        rule.viable = rule.dm_utility >= floor;
    }
    result
}

/// Indices of the front's best decision-maker rule and best fairness rule.
///
/// Ties prefer the better other coordinate, then the earlier rule.
/// If no rule is flagged the front is computed on the fly.
pub fn extreme_indices(result: &SweepResult) -> Result<(usize, usize)> {
    if result.is_empty() {
        return Err(Error::EmptySweep);
    }
    let flags: Vec<bool> = if result.evaluated.iter().any(|r| r.on_front) {
        result.evaluated.iter().map(|r| r.on_front).collect()
    } else {
        pareto_flags(&result.points())
    };
    let pts = result.points();
    let front = (0..pts.len()).filter(|&i| flags[i]);
    let better = |a: (f64, f64), b: (f64, f64)| a.0 > b.0 || (a.0 == b.0 && a.1 > b.1);
    let mut max_dm: Option<usize> = None;
    let mut max_fair: Option<usize> = None;
    for i in front {
        let (dm, fair) = pts[i];
        if max_dm.is_none_or(|j| better((dm, fair), pts[j])) {
            max_dm = Some(i);
        }
        if max_fair.is_none_or(|j| better((fair, dm), (pts[j].1, pts[j].0))) {
            max_fair = Some(i);
        }
    }
    Ok((max_dm.expect("non-empty front"), max_fair.expect("non-empty front")))
}

pub fn extreme_points(result: &SweepResult) -> Result<(&EvaluatedRule, &EvaluatedRule)> {
    let (a, b) = extreme_indices(result)?;
    Ok((&result.evaluated[a], &result.evaluated[b]))
}

/// Front rules ordered from the best decision-maker utility to the best fairness score.
pub fn front_path(result: &SweepResult) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..result.len()).filter(|&i| result.evaluated[i].on_front).collect();
    idx.sort_by(|&a, &b| {
        let (ra, rb) = (&result.evaluated[a], &result.evaluated[b]);
        rb.dm_utility
            .total_cmp(&ra.dm_utility)
            .then(ra.fairness_score.total_cmp(&rb.fairness_score))
            .then(a.cmp(&b))
    });
    idx
}
