//! Seeded synthetic credit-style datasets for tests and benchmarks.
//!
//! Scores are drawn per group from shifted uniform mixtures and outcomes are Bernoulli
//! draws from the score, so the scores are calibrated by construction.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::model::{Dataset, Individual};

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub size: usize,
    pub groups: Vec<String>,
    /// Added to each group's mean score, aligned with `groups`.
    pub score_shift: Vec<f64>,
    /// Draw loan amounts in `[500, 10000)` instead of using 1.
    pub amounts: bool,
    /// Round scores to this many decimals, producing ties.
    pub decimals: Option<u32>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn two_groups(size: usize, seed: u64) -> Self {
        SynthSpec {
            size,
            groups: vec!["female".into(), "male".into()],
            score_shift: vec![-0.05, 0.05],
            amounts: false,
            decimals: None,
            seed,
        }
    }
}

pub fn generate(spec: &SynthSpec) -> Dataset {
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let k = spec.groups.len();
    let individuals = (0..spec.size)
        .map(|i| {
            // the first k individuals cover every group
            let g = if i < k { i } else { rng.random_range(0..k) };
            let base: f64 = (rng.random::<f64>() + rng.random::<f64>()) / 2.0;
            let mut score = (0.25 + 0.7 * base + spec.score_shift.get(g).copied().unwrap_or(0.0))
                .clamp(0.0, 1.0);
            if let Some(d) = spec.decimals {
                let f = 10f64.powi(d as i32);
                score = (score * f).round() / f;
            }
            let outcome = rng.random::<f64>() < score;
            let mut ind = Individual::new(format!("s{i}"), score, spec.groups[g].clone(), outcome);
            if spec.amounts {
                ind.amount = (rng.random_range(500.0..10_000.0f64)).round();
            }
            ind
        })
        .collect();
    Dataset::new(individuals).expect("synthetic individuals are valid")
}

/// Renders a dataset as CSV with columns `id,score,<group_column>,outcome,amount`.
pub fn to_csv(dataset: &Dataset, group_column: &str) -> String {
    let mut out = format!("id,score,{group_column},outcome,amount\n");
    for i in dataset.individuals() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i.id,
            i.score,
            i.group,
            i.outcome as u8,
            i.amount
        ));
    }
    out
}
