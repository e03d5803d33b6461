//! Empirical power of the equality test across a family of scenarios.

use serde::{Deserialize, Serialize};

use super::stats::{wilson_interval, Z_95};
use super::{run_replications, HarnessError, Metadata, ScenarioSpec, TestPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub scenario: String,
    pub e: Option<f64>,
    /// True `m_2 - m_3` of the member.
    pub m2_minus_m3: Option<f64>,
    /// Replications whose test could be carried out.
    pub replications: u64,
    pub rejections: u64,
    pub power: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Replications where the simulation or the test failed.
    pub failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub alpha: f64,
    pub k0: Option<usize>,
    pub rows: Vec<PowerRow>,
    pub metadata: Vec<Metadata>,
}

impl PowerCurve {
    /// Whether power never drops between consecutive rows by more than
    /// their Wilson intervals allow, with at most `allowed` overlapping
    /// inversions.
    pub fn monotone_within_noise(&self, allowed: usize) -> bool {
        let mut inversions = 0;
        for w in self.rows.windows(2) {
            if w[1].power < w[0].power {
                if w[1].wilson_high < w[0].wilson_low {
                    return false;
                }
                inversions += 1;
            }
        }
        inversions <= allowed
    }
}

/// Run every member with the test at level `alpha` on the `k0` leading
/// arms (`None`: all arms) and tabulate rejection rates with 95% Wilson
/// intervals.
pub fn power_curve(
    family: &[ScenarioSpec],
    alpha: f64,
    k0: Option<usize>,
    parallelism: usize,
) -> Result<PowerCurve, HarnessError> {
    let mut rows = Vec::with_capacity(family.len());
    let mut metadata = Vec::with_capacity(family.len());
    for spec in family {
        let k0 = k0.unwrap_or(spec.dim());
        if k0 < 2 || k0 > spec.dim() {
            return Err(HarnessError::InvalidScenario(format!(
                "{}: k0 = {k0} must lie in 2..={}",
                spec.name,
                spec.dim()
            )));
        }
        let summary = run_replications(spec, parallelism, Some(TestPlan { k0, alpha }))?;
        let p = summary.power.expect("test plan given");
        let (wilson_low, wilson_high) = wilson_interval(p.rejections, p.tests, Z_95);
        rows.push(PowerRow {
            scenario: spec.name.clone(),
            e: spec.e,
            m2_minus_m3: spec.gap_23(),
            replications: p.tests,
            rejections: p.rejections,
            power: p.power,
            wilson_low,
            wilson_high,
            failures: summary.failures + p.test_failures,
        });
        metadata.push(summary.metadata);
    }
    Ok(PowerCurve {
        alpha,
        k0,
        rows,
        metadata,
    })
}
