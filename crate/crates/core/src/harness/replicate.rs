//! Independent replications of a scenario, run in parallel and merged in
//! replication order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Metadata, ScenarioSpec};
use crate::estimators::estimate_all;
use crate::inference::{run_test, TestResult};
use crate::sampling::SimRng;
use crate::urn::{Urn, UrnState};

pub const HISTOGRAM_BINS: usize = 50;

/// Run the equality test at the end of every replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPlan {
    pub k0: usize,
    pub alpha: f64,
}

/// Terminal values of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub replication: u64,
    pub n: u64,
    #[serde(rename = "Z")]
    pub z: Vec<f64>,
    pub m_hat: Vec<Option<f64>>,
    #[serde(rename = "N_A")]
    pub n_a: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestResult>,
    /// Why the test could not be run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_error: Option<String>,
    /// Why the simulation itself failed; the other fields are empty then.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Counts of `Z_k` over `[0, 1]` in equal-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// One-based color.
    pub color: usize,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(color: usize, bins: usize) -> Self {
        Self {
            color,
            edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
            counts: vec![0; bins],
        }
    }

    pub fn add(&mut self, z: f64) {
        let bins = self.counts.len();
        let idx = ((z * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        self.counts[idx] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Rejection count over the replications whose test ran.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub k0: usize,
    pub alpha: f64,
    pub tests: u64,
    pub rejections: u64,
    pub power: f64,
    pub test_failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub scenario: String,
    #[serde(default)]
    pub e: Option<f64>,
    pub d: usize,
    pub horizon: u64,
    pub replications: u64,
    pub base_seed: u64,
    pub outcomes: Vec<ReplicationOutcome>,
    pub histograms: Vec<Histogram>,
    #[serde(default)]
    pub power: Option<PowerEstimate>,
    pub failures: u64,
    pub metadata: Metadata,
}

impl ReplicationSummary {
    /// Terminal `Z_k` of every successful replication, in order.
    pub fn terminal(&self, k: usize) -> Vec<f64> {
        self.successes().map(|o| o.z[k]).collect()
    }

    pub fn successes(&self) -> impl Iterator<Item = &ReplicationOutcome> {
        self.outcomes.iter().filter(|o| o.error.is_none())
    }
}

/// Simulate replication `r` of `spec`: stream `(base_seed, r)`.
pub fn simulate_one(spec: &ScenarioSpec, r: u64) -> Result<UrnState, HarnessError> {
    let mut rng = SimRng::new(spec.base_seed, r);
    let mut urn = Urn::new(spec.config.clone())?;
    urn.run(spec.horizon, &mut rng, 0)?;
    Ok(urn.into_state())
}

fn outcome(spec: &ScenarioSpec, r: u64, test: Option<TestPlan>) -> ReplicationOutcome {
    let mut out = ReplicationOutcome {
        replication: r,
        n: 0,
        z: Vec::new(),
        m_hat: Vec::new(),
        n_a: Vec::new(),
        test: None,
        test_error: None,
        error: None,
    };
    let state = match simulate_one(spec, r) {
        Ok(s) => s,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.n = state.n;
    out.z = state.normalized_composition();
    out.n_a = state.n_a.clone();
    out.m_hat = match estimate_all(&state) {
        Ok(est) => est.m_hat,
        Err(_) => vec![None; state.dim()],
    };
    if let Some(plan) = test {
        match run_test(&state, plan.k0, plan.alpha) {
            Ok(t) => {
                out.test = Some(TestResult {
                    estimates: None,
                    ..t
                })
            }
            Err(e) => out.test_error = Some(e.to_string()),
        }
    }
    out
}

/// Run `f(r)` for `r in 0..count` on `parallelism` threads (0 = all
/// cores) and return the results in index order.
pub fn parallel_map<T, F>(count: u64, parallelism: usize, f: F) -> Result<Vec<T>, HarnessError>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| HarnessError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(&f).collect()))
}

/// All replications of `spec`, with histograms of every color and, when
/// `test` is given, the empirical rejection rate. The result does not
/// depend on `parallelism`.
pub fn run_replications(
    spec: &ScenarioSpec,
    parallelism: usize,
    test: Option<TestPlan>,
) -> Result<ReplicationSummary, HarnessError> {
    if spec.replications == 0 {
        return Err(HarnessError::InvalidScenario(
            "replications must be at least 1".into(),
        ));
    }
    spec.config.validate()?;
    let outcomes = parallel_map(spec.replications, parallelism, |r| outcome(spec, r, test))?;
    let failures = outcomes.iter().filter(|o| o.error.is_some()).count() as u64;
    if failures == spec.replications {
        let first = outcomes[0].error.clone().unwrap_or_default();
        return Err(HarnessError::AllReplicationsFailed(first));
    }
    Ok(summarize(spec, outcomes, test))
}

fn summarize(
    spec: &ScenarioSpec,
    outcomes: Vec<ReplicationOutcome>,
    test: Option<TestPlan>,
) -> ReplicationSummary {
    let d = spec.dim();
    let mut histograms: Vec<Histogram> =
        (1..=d).map(|k| Histogram::new(k, HISTOGRAM_BINS)).collect();
    for o in outcomes.iter().filter(|o| o.error.is_none()) {
        for (h, &z) in histograms.iter_mut().zip(&o.z) {
            h.add(z);
        }
    }
    let power = test.map(|plan| {
        let tests = outcomes.iter().filter(|o| o.test.is_some()).count() as u64;
        let rejections = outcomes
            .iter()
            .filter(|o| o.test.as_ref().is_some_and(|t| t.reject))
            .count() as u64;
        let test_failures = outcomes.iter().filter(|o| o.test_error.is_some()).count() as u64;
        PowerEstimate {
            k0: plan.k0,
            alpha: plan.alpha,
            tests,
            rejections,
            power: if tests == 0 {
                0.0
            } else {
                rejections as f64 / tests as f64
            },
            test_failures,
        }
    });
    let failures = outcomes.iter().filter(|o| o.error.is_some()).count() as u64;
    ReplicationSummary {
        scenario: spec.name.clone(),
        e: spec.e,
        d,
        horizon: spec.horizon,
        replications: spec.replications,
        base_seed: spec.base_seed,
        outcomes,
        histograms,
        power,
        failures,
        metadata: Metadata::for_spec(spec),
    }
}
