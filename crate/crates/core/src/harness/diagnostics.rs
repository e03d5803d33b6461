//! Path-wise ratios that settle down when the urn has reached its
//! asymptotic regime: `S_n/n -> N m_1`, and for every color the exact-order
//! ratios `H_nk / n^{m_k/m_1}`, `N_{A_k,n} / n^{m_k/m_1}` and
//! `n^{1 - m_k/m_1} Z_nk`.

use serde::{Deserialize, Serialize};

use super::replicate::parallel_map;
use super::{HarnessError, ScenarioSpec};
use crate::sampling::SimRng;
use crate::urn::Urn;

/// Relative change between the last two checkpoints below which a path
/// counts as converged. Calibrated on pilot runs.
pub const CONVERGENCE_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorDiagnostic {
    /// `H_nk / n^{m_k/m_1}`.
    pub h_ratio: f64,
    /// `N_{A_k,n} / n^{m_k/m_1}`.
    pub draws_ratio: f64,
    /// `n^{1 - m_k/m_1} Z_nk`.
    pub z_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: u64,
    pub s_over_n: f64,
    pub colors: Vec<ColorDiagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDiagnostics {
    pub path: u64,
    pub checkpoints: Vec<Checkpoint>,
    pub converged: bool,
}

impl PathDiagnostics {
    /// Relative change of `f` between the last two checkpoints.
    pub fn last_change(&self, f: impl Fn(&Checkpoint) -> f64) -> Option<f64> {
        let [.., a, b] = self.checkpoints.as_slice() else {
            return None;
        };
        Some(relative_change(f(a), f(b)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scenario: String,
    /// `m_k / m_1` with `m_1` the largest true mean.
    pub exponents: Vec<f64>,
    /// `N m_1`, the limit of `S_n / n`, with `N` at its mean.
    pub s_limit: f64,
    pub tolerance: f64,
    pub paths: Vec<PathDiagnostics>,
}

impl ConvergenceReport {
    pub fn converged_fraction(&self) -> f64 {
        self.paths.iter().filter(|p| p.converged).count() as f64 / self.paths.len().max(1) as f64
    }
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Follow `paths` independent paths of `spec` (path `p` uses the stream of
/// replication `p`) and record the ratios at each checkpoint. A path is
/// converged when `S_n/n` and every `z_ratio` change by less than
/// [`CONVERGENCE_TOLERANCE`] between the last two checkpoints.
pub fn convergence_diagnostics(
    spec: &ScenarioSpec,
    checkpoints: &[u64],
    paths: u64,
    parallelism: usize,
) -> Result<ConvergenceReport, HarnessError> {
    let mut cps = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    if cps.is_empty() || cps[0] == 0 {
        return Err(HarnessError::InvalidScenario(
            "checkpoints must be positive".into(),
        ));
    }
    spec.config.validate()?;
    let m = &spec.true_moments.m;
    let m1 = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exponents: Vec<f64> = m.iter().map(|mk| mk / m1).collect();
    let (mu, _) = spec.config.count_law.moments();
    let results = parallel_map(paths, parallelism, |p| follow(spec, &cps, &exponents, p))?;
    let paths = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ConvergenceReport {
        scenario: spec.name.clone(),
        exponents,
        s_limit: mu * m1,
        tolerance: CONVERGENCE_TOLERANCE,
        paths,
    })
}

fn follow(
    spec: &ScenarioSpec,
    cps: &[u64],
    exponents: &[f64],
    p: u64,
) -> Result<PathDiagnostics, HarnessError> {
    let mut rng = SimRng::new(spec.base_seed, p);
    let mut urn = Urn::new(spec.config.clone())?;
    let mut out = Vec::with_capacity(cps.len());
    for &c in cps {
        urn.run(c - urn.state().n, &mut rng, 0)?;
        let st = urn.state();
        let n = st.n as f64;
        let z = st.normalized_composition();
        let colors = exponents
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                let scale = n.powf(e);
                ColorDiagnostic {
                    h_ratio: st.h[k] / scale,
                    draws_ratio: st.n_a[k] as f64 / scale,
                    z_ratio: n.powf(1.0 - e) * z[k],
                }
            })
            .collect();
        out.push(Checkpoint {
            n: st.n,
            s_over_n: st.s / n,
            colors,
        });
    }
    let mut path = PathDiagnostics {
        path: p,
        checkpoints: out,
        converged: false,
    };
    path.converged = path
        .last_change(|c| c.s_over_n)
        .is_some_and(|r| r < CONVERGENCE_TOLERANCE)
        && (0..exponents.len()).all(|k| {
            path.last_change(|c| c.colors[k].z_ratio)
                .is_some_and(|r| r < CONVERGENCE_TOLERANCE)
        });
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::composition_case;
    use crate::sampling::{DiscreteLaw, DrawCountLaw, ReplacementLaw};
    use crate::urn::{DrawMode, UrnConfig};

    #[test]
    fn single_color_grows_linearly() {
        let law = ReplacementLaw::independent(vec![DiscreteLaw::uniform(vec![1.0, 3.0]).unwrap()])
            .unwrap();
        let config = UrnConfig::new(
            vec![2],
            DrawMode::WithReplacement,
            DrawCountLaw::point(2).unwrap(),
            law,
        )
        .unwrap();
        let spec = ScenarioSpec::new("one", "", config).with_seed(4);
        let report = convergence_diagnostics(&spec, &[1000, 2000], 20, 1).unwrap();
        assert_eq!(report.s_limit, 4.0);
        let mean: f64 = report
            .paths
            .iter()
            .map(|p| p.checkpoints[1].s_over_n)
            .sum::<f64>()
            / 20.0;
        assert!((mean - 4.0).abs() < 0.05, "{mean}");
        assert!(report
            .paths
            .iter()
            .all(|p| p.checkpoints[1].colors[0].z_ratio == 1.0));
    }

    #[test]
    fn case_a_ratios() {
        let spec = composition_case('a', [6, 6, 6]).with_seed(2);
        let report = convergence_diagnostics(&spec, &[10_000, 5_000], 2, 1).unwrap();
        assert_eq!(&report.exponents[..2], &[1.0, 1.0]);
        assert!((report.exponents[2] - 0.25).abs() < 1e-15);
        assert!((report.s_limit - 20.0).abs() < 1e-12);
        for p in &report.paths {
            assert_eq!(p.checkpoints[0].n, 5_000);
            assert!((p.checkpoints[1].s_over_n / 20.0 - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn rejects_empty_checkpoints() {
        let spec = composition_case('a', [6, 6, 6]);
        assert!(convergence_diagnostics(&spec, &[], 1, 1).is_err());
        assert!(convergence_diagnostics(&spec, &[0, 10], 1, 1).is_err());
    }
}
