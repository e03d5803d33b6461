//! Scenario definitions: the built-in experiments and the TOML scenario
//! file format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::sampling::{DiscreteLaw, DrawCountLaw, LawMoments, ReplacementLaw, ReplacementVariant};
use crate::urn::{DrawMode, UrnConfig};

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub description: String,
    pub config: UrnConfig,
    pub true_moments: LawMoments,
    /// Number of colors tied (within `1e-12`) for the largest mean.
    pub true_t: usize,
    pub horizon: u64,
    pub replications: u64,
    pub base_seed: u64,
    /// Index of a member of the power family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    /// Departures from the nominal law, reported in export metadata.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviations: Vec<String>,
}

impl ScenarioSpec {
    pub fn new(name: impl Into<String>, description: impl Into<String>, config: UrnConfig) -> Self {
        let true_moments = config.replacement_law.moments();
        let true_t = true_moments.top_count();
        Self {
            name: name.into(),
            description: description.into(),
            config,
            true_moments,
            true_t,
            horizon: 10_000,
            replications: 5_000,
            base_seed: 1,
            e: None,
            deviations: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_replications(mut self, replications: u64) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_initial(mut self, initial: Vec<u64>) -> Self {
        self.config.initial = initial;
        self
    }

    /// `m_2 - m_3` of the true law, the power family's effect size.
    pub fn gap_23(&self) -> Option<f64> {
        let m = &self.true_moments.m;
        (m.len() >= 3).then(|| m[1] - m[2])
    }
}

fn uniform(values: &[f64]) -> DiscreteLaw {
    DiscreteLaw::uniform(values.to_vec()).expect("valid built-in law")
}

fn point(v: f64) -> DiscreteLaw {
    DiscreteLaw::point(v).expect("valid built-in law")
}

/// `N` law of the composition experiments: 3 w.p. 1/3, 6 w.p. 2/3.
pub fn composition_count_law() -> DrawCountLaw {
    DrawCountLaw::new(vec![3, 6], vec![1.0 / 3.0, 2.0 / 3.0], None).expect("valid built-in law")
}

/// `N` law of the power experiments: 6 w.p. 1/4, 8 w.p. 3/4.
pub fn power_count_law() -> DrawCountLaw {
    DrawCountLaw::new(vec![6, 8], vec![0.25, 0.75], None).expect("valid built-in law")
}

fn case_law(case: char) -> (ReplacementLaw, &'static str) {
    let law = match case {
        'a' => ReplacementLaw::independent(vec![
            uniform(&[3.0, 4.0, 5.0]),
            uniform(&[3.0, 4.0, 5.0]),
            point(1.0),
        ]),
        'b' => ReplacementLaw::independent(vec![
            uniform(&[2.0, 3.0, 4.0, 5.0, 6.0]),
            uniform(&[3.0, 4.0, 5.0]),
            point(1.0),
        ]),
        'c' => ReplacementLaw::shifted_multinomial(
            5,
            vec![0.4, 0.4, 0.2],
            vec![2.0, 2.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ),
        'd' => ReplacementLaw::shifted_multinomial(
            5,
            vec![0.3, 0.4, 0.3],
            vec![1.0, 2.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ),
        _ => unreachable!("cases are a-d"),
    };
    let text = match case {
        'a' => "A1, A2 iid uniform{3,4,5}, A3 = 1",
        'b' => "A1 uniform{2..6}, A2 uniform{3,4,5}, A3 = 1",
        'c' => "A = (2+Y1, 2+Y2, 1), Y ~ Multinomial(5; 0.4, 0.4, 0.2)",
        _ => "A = (1+2Y1, 2+Y2, 1), Y ~ Multinomial(5; 0.3, 0.4, 0.3)",
    };
    (law.expect("valid built-in law"), text)
}

/// One of the composition experiments (`case` in `'a'..='d'`) from the
/// given start; N is 3 or 6, drawing without replacement.
pub fn composition_case(case: char, initial: [u64; 3]) -> ScenarioSpec {
    let (law, text) = case_law(case);
    let config = UrnConfig::new(
        initial.to_vec(),
        DrawMode::WithoutReplacement,
        composition_count_law(),
        law,
    )
    .expect("valid built-in scenario");
    let suffix = if initial == [6, 6, 6] {
        String::new()
    } else {
        format!(
            "-{}",
            initial.iter().map(u64::to_string).collect::<String>()
        )
    };
    ScenarioSpec::new(
        format!("case-{case}{suffix}"),
        format!("{text}; H0 = {initial:?}; N = 3 (1/3) or 6 (2/3)"),
        config,
    )
}

/// Member `e` of the power family: `A_1, A_2 ~ Y + 1`, `A_3 ~ max(1, Y + 1
/// - 0.2 e)`, `Y ~ Poisson(6)`, all independent, `H0 = (9,9,9)`, N = 6 or 8.
///
/// `A_3` is fractional for most `e`, so balls are drawn with replacement.
/// The clamp at 1 moves the mean of `A_3` up slightly; the true moments
/// are those of the clamped law.
pub fn power_member(e: u32) -> ScenarioSpec {
    let shift = 1.0 - 0.2 * e as f64;
    let top = DiscreteLaw::shifted_poisson(6.0, 1.0, 1.0).expect("valid built-in law");
    let third = DiscreteLaw::shifted_poisson(6.0, shift, 1.0).expect("valid built-in law");
    let law =
        ReplacementLaw::independent(vec![top.clone(), top, third]).expect("valid built-in law");
    let config = UrnConfig::new(
        vec![9, 9, 9],
        DrawMode::WithReplacement,
        power_count_law(),
        law,
    )
    .expect("valid built-in scenario");
    let mut spec = ScenarioSpec::new(
        format!("power-e{e}"),
        format!("A = (Y+1, Y+1, max(1, Y+1-{:.1})), Y ~ Poisson(6); H0 = (9,9,9); N = 6 (1/4) or 8 (3/4)", 0.2 * e as f64),
        config,
    );
    spec.horizon = 1_000;
    spec.replications = 500;
    spec.e = Some(e as f64);
    let nominal = 0.2 * e as f64;
    let actual = spec.gap_23().expect("three colors");
    if (actual - nominal).abs() > 1e-12 {
        spec.deviations.push(format!(
            "A_3 clamped at 1: m2 - m3 = {actual:.6} instead of the nominal {nominal:.1}"
        ));
    }
    spec
}

/// The power family for `e = 1..=10`.
pub fn power_family() -> Vec<ScenarioSpec> {
    (1..=10).map(power_member).collect()
}

/// Three identically distributed arms: the power family at `e = 0`.
pub fn equal_arms() -> ScenarioSpec {
    let mut spec = power_member(0);
    spec.name = "equal-arms".into();
    spec
}

/// Deterministic reinforcement `(4, 4, 1)`: every variance is zero.
pub fn point_mass() -> ScenarioSpec {
    let law = ReplacementLaw::point_mass(vec![4.0, 4.0, 1.0]).expect("valid built-in law");
    let config = UrnConfig::new(
        vec![6, 6, 6],
        DrawMode::WithoutReplacement,
        composition_count_law(),
        law,
    )
    .expect("valid built-in scenario");
    ScenarioSpec::new(
        "point-mass",
        "A = (4, 4, 1) always; H0 = (6,6,6); N = 3 (1/3) or 6 (2/3)",
        config,
    )
}

/// Every built-in scenario.
pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    let mut out = Vec::new();
    for initial in [[6, 6, 6], [6, 3, 6]] {
        for case in ['a', 'b', 'c', 'd'] {
            out.push(composition_case(case, initial));
        }
    }
    out.push(equal_arms());
    out.extend((0..=10).map(power_member));
    out.push(point_mass());
    out
}

pub fn find_builtin(name: &str) -> Option<ScenarioSpec> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

pub fn builtin_names() -> Vec<String> {
    builtin_scenarios().into_iter().map(|s| s.name).collect()
}

// Scenario files. The raw types carry no validation so that every failure
// can be reported against the field it came from.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileScenario {
    name: String,
    #[serde(default)]
    description: String,
    initial: Vec<u64>,
    draw_mode: DrawMode,
    #[serde(default)]
    horizon: Option<u64>,
    #[serde(default)]
    replications: Option<u64>,
    #[serde(default)]
    base_seed: Option<u64>,
    #[serde(default)]
    e: Option<f64>,
    #[serde(default)]
    compensated: bool,
    count_law: FileCountLaw,
    replacement_law: FileReplacement,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCountLaw {
    support: Vec<u64>,
    probabilities: Vec<f64>,
    #[serde(default)]
    cap: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FileDiscrete {
    Table {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
    /// `max(floor, Y + shift)`, `Y ~ Poisson(poisson_mean)`.
    Poisson {
        poisson_mean: f64,
        #[serde(default)]
        shift: f64,
        #[serde(default = "one")]
        floor: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum FileReplacement {
    IndependentDiscrete {
        marginals: Vec<FileDiscrete>,
    },
    ShiftedMultinomial {
        trials: u64,
        probabilities: Vec<f64>,
        offsets: Vec<f64>,
        scales: Vec<f64>,
    },
    ShiftedCommonCount {
        base: FileDiscrete,
        offsets: Vec<f64>,
        scales: Vec<f64>,
    },
    PointMass {
        values: Vec<f64>,
    },
}

/// A file holds either one scenario at top level or a family under
/// `[[scenario]]`.
#[derive(Debug, Deserialize)]
struct FileFamily {
    scenario: Vec<FileScenario>,
}

fn invalid(field: &str, err: impl std::fmt::Display) -> HarnessError {
    HarnessError::InvalidScenario(format!("{field}: {err}"))
}

fn discrete(field: &str, raw: FileDiscrete) -> Result<DiscreteLaw, HarnessError> {
    match raw {
        FileDiscrete::Table {
            values,
            probabilities,
        } => DiscreteLaw::new(values, probabilities)
            .map_err(|e| invalid(&format!("{field}.probabilities"), e)),
        FileDiscrete::Poisson {
            poisson_mean,
            shift,
            floor,
        } => {
            DiscreteLaw::shifted_poisson(poisson_mean, shift, floor).map_err(|e| invalid(field, e))
        }
    }
}

fn build(raw: FileScenario) -> Result<ScenarioSpec, HarnessError> {
    let count_law = DrawCountLaw::new(
        raw.count_law.support,
        raw.count_law.probabilities,
        raw.count_law.cap,
    )
    .map_err(|e| invalid("count_law", e))?;
    let variant = match raw.replacement_law {
        FileReplacement::IndependentDiscrete { marginals } => {
            ReplacementVariant::IndependentDiscrete {
                marginals: marginals
                    .into_iter()
                    .enumerate()
                    .map(|(i, m)| discrete(&format!("replacement_law.marginals[{i}]"), m))
                    .collect::<Result<_, _>>()?,
            }
        }
        FileReplacement::ShiftedMultinomial {
            trials,
            probabilities,
            offsets,
            scales,
        } => ReplacementVariant::ShiftedMultinomial {
            trials,
            probabilities,
            offsets,
            scales,
        },
        FileReplacement::ShiftedCommonCount {
            base,
            offsets,
            scales,
        } => ReplacementVariant::ShiftedCommonCount {
            base: discrete("replacement_law.base", base)?,
            offsets,
            scales,
        },
        FileReplacement::PointMass { values } => ReplacementVariant::PointMass { values },
    };
    let law = ReplacementLaw::new(variant).map_err(|e| invalid("replacement_law", e))?;
    let mut config = UrnConfig::new(raw.initial, raw.draw_mode, count_law, law)
        .map_err(|e| invalid("scenario", e))?;
    config.compensated = raw.compensated;
    let mut spec = ScenarioSpec::new(raw.name, raw.description, config);
    if let Some(h) = raw.horizon {
        spec.horizon = h;
    }
    if let Some(r) = raw.replications {
        spec.replications = r;
    }
    if let Some(s) = raw.base_seed {
        spec.base_seed = s;
    }
    spec.e = raw.e;
    Ok(spec)
}

/// Parse scenario text: a single scenario, or a family of `[[scenario]]`
/// tables.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioSpec>, HarnessError> {
    let value: toml::Table =
        toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
    if value.contains_key("scenario") {
        let fam: FileFamily =
            toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        fam.scenario.into_iter().map(build).collect()
    } else {
        let raw: FileScenario =
            toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        Ok(vec![build(raw)?])
    }
}

/// Read a single-scenario file.
pub fn parse_scenario_file(path: &Path) -> Result<ScenarioSpec, HarnessError> {
    let mut all = parse_scenario_family_file(path)?;
    if all.len() != 1 {
        return Err(HarnessError::InvalidScenario(format!(
            "{} holds {} scenarios, expected one",
            path.display(),
            all.len()
        )));
    }
    Ok(all.remove(0))
}

pub fn parse_scenario_family_file(path: &Path) -> Result<Vec<ScenarioSpec>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_scenarios(&text).map_err(|e| match e {
        HarnessError::Parse(m) => HarnessError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}
