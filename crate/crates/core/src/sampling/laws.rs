//! Draw-count and replacement laws, with closed-form moments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::discrete::{check_probabilities, multinomial_into};
use super::SamplingError;

/// Finite discrete law over real values, sampled by inverting its CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiscrete", into = "RawDiscrete")]
pub struct DiscreteLaw {
    values: Vec<f64>,
    probabilities: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDiscrete {
    values: Vec<f64>,
    probabilities: Vec<f64>,
}

impl TryFrom<RawDiscrete> for DiscreteLaw {
    type Error = SamplingError;
    fn try_from(raw: RawDiscrete) -> Result<Self, Self::Error> {
        DiscreteLaw::new(raw.values, raw.probabilities)
    }
}

impl From<DiscreteLaw> for RawDiscrete {
    fn from(law: DiscreteLaw) -> Self {
        RawDiscrete {
            values: law.values,
            probabilities: law.probabilities,
        }
    }
}

impl DiscreteLaw {
    pub fn new(values: Vec<f64>, probabilities: Vec<f64>) -> Result<Self, SamplingError> {
        if values.len() != probabilities.len() {
            return Err(SamplingError::InvalidLaw(format!(
                "{} values but {} probabilities",
                values.len(),
                probabilities.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(SamplingError::InvalidLaw(format!(
                "value {v} is not finite"
            )));
        }
        check_probabilities(&probabilities)?;
        let mut acc = 0.0;
        let cdf = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            values,
            probabilities,
            cdf,
        })
    }

    pub fn point(value: f64) -> Result<Self, SamplingError> {
        Self::new(vec![value], vec![1.0])
    }

    /// Uniform over the given values.
    pub fn uniform(values: Vec<f64>) -> Result<Self, SamplingError> {
        let p = 1.0 / values.len() as f64;
        let n = values.len();
        Self::new(values, vec![p; n])
    }

    /// `max(floor, Y + shift)` with `Y ~ Poisson(mean)`.
    ///
    /// The table stops once the remaining Poisson tail is far below the
    /// resolution of a double-precision uniform, so inversion of the table
    /// is indistinguishable from inversion of the untruncated law. Mass of
    /// values below `floor` is moved onto `floor`.
    pub fn shifted_poisson(mean: f64, shift: f64, floor: f64) -> Result<Self, SamplingError> {
        if !(mean > 0.0 && mean.is_finite() && mean < 500.0) {
            return Err(SamplingError::InvalidLaw(format!(
                "Poisson mean {mean} outside (0, 500)"
            )));
        }
        let mut values: Vec<f64> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        let mut p = (-mean).exp();
        let mut y = 0u64;
        loop {
            let v = (y as f64 + shift).max(floor);
            match values.last() {
                Some(&last) if last == v => *probs.last_mut().unwrap() += p,
                _ => {
                    values.push(v);
                    probs.push(p);
                }
            }
            y += 1;
            p *= mean / y as f64;
            if y as f64 > mean && p < 1e-20 {
                break;
            }
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|q| *q /= total);
        Self::new(values, probs)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.values.len() - 1);
        self.values[idx]
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probabilities)
            .map(|(v, p)| v * p)
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probabilities)
            .map(|(v, p)| v * v * p)
            .sum()
    }

    /// Values that occur with positive probability.
    pub fn support(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.probabilities)
            .filter(|(_, p)| **p > 0.0)
            .map(|(v, _)| *v)
    }
}

/// Law of the number of balls drawn per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDrawCount")]
pub struct DrawCountLaw {
    support: Vec<u64>,
    probabilities: Vec<f64>,
    cap: u64,
    #[serde(skip)]
    cdf: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDrawCount {
    support: Vec<u64>,
    probabilities: Vec<f64>,
    cap: Option<u64>,
}

impl TryFrom<RawDrawCount> for DrawCountLaw {
    type Error = SamplingError;
    fn try_from(raw: RawDrawCount) -> Result<Self, Self::Error> {
        DrawCountLaw::new(raw.support, raw.probabilities, raw.cap)
    }
}

impl DrawCountLaw {
    /// `cap` defaults to the largest support point.
    pub fn new(
        support: Vec<u64>,
        probabilities: Vec<f64>,
        cap: Option<u64>,
    ) -> Result<Self, SamplingError> {
        if support.is_empty() || support.len() != probabilities.len() {
            return Err(SamplingError::InvalidLaw(
                "draw-count support and probabilities must be non-empty and of equal length".into(),
            ));
        }
        if support.contains(&0) {
            return Err(SamplingError::InvalidLaw(
                "draw counts must be at least 1".into(),
            ));
        }
        check_probabilities(&probabilities)?;
        let max = *support.iter().max().unwrap();
        let cap = cap.unwrap_or(max);
        if max > cap {
            return Err(SamplingError::InvalidLaw(format!(
                "support point {max} exceeds the cap {cap}"
            )));
        }
        let mut acc = 0.0;
        let cdf = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            support,
            probabilities,
            cap,
            cdf,
        })
    }

    pub fn point(n: u64) -> Result<Self, SamplingError> {
        Self::new(vec![n], vec![1.0], None)
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    /// `E[N]` and `E[N^2]` of the unclamped law.
    pub fn moments(&self) -> (f64, f64) {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (&n, &p) in self.support.iter().zip(&self.probabilities) {
            let n = n as f64;
            m1 += p * n;
            m2 += p * n * n;
        }
        (m1, m2)
    }

    /// Draw a count for an urn holding `available` balls. Support points
    /// above `min(cap, available)` collapse onto that bound.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(
        &self,
        available: u64,
        rng: &mut R,
    ) -> Result<u64, SamplingError> {
        let bound = available.min(self.cap);
        if bound == 0 {
            return Err(SamplingError::EmptySupport);
        }
        let n = if self.support.len() == 1 {
            self.support[0]
        } else {
            let u: f64 = rng.random();
            let idx = self
                .cdf
                .partition_point(|&c| c <= u)
                .min(self.support.len() - 1);
            self.support[idx]
        };
        Ok(n.min(bound))
    }
}

/// Free-function form of [`DrawCountLaw::sample`].
pub fn sample_draw_count<R: Rng + ?Sized>(
    law: &DrawCountLaw,
    s_n: u64,
    rng: &mut R,
) -> Result<u64, SamplingError> {
    law.sample(s_n, rng)
}

/// The ways a replacement vector `(A_1, ..., A_d)` can be generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReplacementVariant {
    /// Independent components, each with its own discrete marginal.
    IndependentDiscrete {
        marginals: Vec<DiscreteLaw>,
    },
    /// `A_k = offset_k + scale_k * Y_k` with `Y ~ Multinomial(trials, p)`.
    ShiftedMultinomial {
        trials: u64,
        probabilities: Vec<f64>,
        offsets: Vec<f64>,
        scales: Vec<f64>,
    },
    /// `A_k = offset_k + scale_k * Y` with one shared draw `Y` from `base`.
    ShiftedCommonCount {
        base: DiscreteLaw,
        offsets: Vec<f64>,
        scales: Vec<f64>,
    },
    PointMass {
        values: Vec<f64>,
    },
}

/// Validated replacement law. Every realizable component is at least 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplacementLaw {
    #[serde(flatten)]
    variant: ReplacementVariant,
}

/// `m_k = E[A_k]`, `q_k = E[A_k^2]`, `q_cross[k][s] = E[A_k A_s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawMoments {
    pub m: Vec<f64>,
    pub q: Vec<f64>,
    pub q_cross: Vec<Vec<f64>>,
}

impl LawMoments {
    pub fn variances(&self) -> Vec<f64> {
        self.q.iter().zip(&self.m).map(|(q, m)| q - m * m).collect()
    }

    /// Number of colors whose mean equals the largest one within `1e-12`.
    pub fn top_count(&self) -> usize {
        let max = self.m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.m.iter().filter(|&&m| m >= max - 1e-12).count()
    }
}

impl ReplacementLaw {
    pub fn new(variant: ReplacementVariant) -> Result<Self, SamplingError> {
        let law = Self { variant };
        law.validate()?;
        Ok(law)
    }

    pub fn independent(marginals: Vec<DiscreteLaw>) -> Result<Self, SamplingError> {
        Self::new(ReplacementVariant::IndependentDiscrete { marginals })
    }

    pub fn shifted_multinomial(
        trials: u64,
        probabilities: Vec<f64>,
        offsets: Vec<f64>,
        scales: Vec<f64>,
    ) -> Result<Self, SamplingError> {
        Self::new(ReplacementVariant::ShiftedMultinomial {
            trials,
            probabilities,
            offsets,
            scales,
        })
    }

    pub fn shifted_common_count(
        base: DiscreteLaw,
        offsets: Vec<f64>,
        scales: Vec<f64>,
    ) -> Result<Self, SamplingError> {
        Self::new(ReplacementVariant::ShiftedCommonCount {
            base,
            offsets,
            scales,
        })
    }

    pub fn point_mass(values: Vec<f64>) -> Result<Self, SamplingError> {
        Self::new(ReplacementVariant::PointMass { values })
    }

    pub fn variant(&self) -> &ReplacementVariant {
        &self.variant
    }

    pub fn dim(&self) -> usize {
        match &self.variant {
            ReplacementVariant::IndependentDiscrete { marginals } => marginals.len(),
            ReplacementVariant::ShiftedMultinomial { probabilities, .. } => probabilities.len(),
            ReplacementVariant::ShiftedCommonCount { offsets, .. } => offsets.len(),
            ReplacementVariant::PointMass { values } => values.len(),
        }
    }

    /// Every value component `k` can take with positive probability.
    pub fn component_support(&self, k: usize) -> Vec<f64> {
        match &self.variant {
            ReplacementVariant::IndependentDiscrete { marginals } => {
                marginals[k].support().collect()
            }
            ReplacementVariant::ShiftedMultinomial {
                trials,
                probabilities,
                offsets,
                scales,
            } => {
                let p = probabilities[k];
                let ys: Vec<u64> = if p == 0.0 {
                    vec![0]
                } else if p == 1.0 {
                    vec![*trials]
                } else {
                    (0..=*trials).collect()
                };
                ys.into_iter()
                    .map(|y| offsets[k] + scales[k] * y as f64)
                    .collect()
            }
            ReplacementVariant::ShiftedCommonCount {
                base,
                offsets,
                scales,
            } => base.support().map(|y| offsets[k] + scales[k] * y).collect(),
            ReplacementVariant::PointMass { values } => vec![values[k]],
        }
    }

    /// True when every realizable component is an integer, which drawing
    /// without replacement requires.
    pub fn is_integer_valued(&self) -> bool {
        (0..self.dim()).all(|k| self.component_support(k).iter().all(|v| v.fract() == 0.0))
    }

    fn validate(&self) -> Result<(), SamplingError> {
        let d = self.dim();
        if d == 0 {
            return Err(SamplingError::InvalidLaw(
                "replacement law has no components".into(),
            ));
        }
        let same_len = |name: &str, len: usize| {
            if len == d {
                Ok(())
            } else {
                Err(SamplingError::InvalidLaw(format!(
                    "{name} has length {len}, expected {d}"
                )))
            }
        };
        match &self.variant {
            ReplacementVariant::IndependentDiscrete { .. } => {}
            ReplacementVariant::ShiftedMultinomial {
                probabilities,
                offsets,
                scales,
                ..
            } => {
                check_probabilities(probabilities)?;
                same_len("offsets", offsets.len())?;
                same_len("scales", scales.len())?;
            }
            ReplacementVariant::ShiftedCommonCount {
                offsets, scales, ..
            } => {
                same_len("scales", scales.len())?;
                same_len("offsets", offsets.len())?;
            }
            ReplacementVariant::PointMass { .. } => {}
        }
        for k in 0..d {
            if let Some(v) = self
                .component_support(k)
                .into_iter()
                .find(|v| !v.is_finite() || *v < 1.0)
            {
                return Err(SamplingError::SupportBelowOne {
                    component: k,
                    value: v,
                });
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.variant {
            ReplacementVariant::IndependentDiscrete { marginals } => {
                for (a, law) in out.iter_mut().zip(marginals) {
                    *a = law.sample(rng);
                }
            }
            ReplacementVariant::ShiftedMultinomial {
                trials,
                probabilities,
                offsets,
                scales,
            } => {
                let mut y = [0u64; 16];
                let mut heap;
                let y: &mut [u64] = if probabilities.len() <= 16 {
                    &mut y[..probabilities.len()]
                } else {
                    heap = vec![0u64; probabilities.len()];
                    &mut heap
                };
                multinomial_into(probabilities, *trials, rng, y);
                for (k, a) in out.iter_mut().enumerate() {
                    *a = offsets[k] + scales[k] * y[k] as f64;
                }
            }
            ReplacementVariant::ShiftedCommonCount {
                base,
                offsets,
                scales,
            } => {
                let y = base.sample(rng);
                for (k, a) in out.iter_mut().enumerate() {
                    *a = offsets[k] + scales[k] * y;
                }
            }
            ReplacementVariant::PointMass { values } => out.copy_from_slice(values),
        }
    }

    /// Exact first and second moments.
    pub fn moments(&self) -> LawMoments {
        let d = self.dim();
        let mut m = vec![0.0; d];
        let mut q = vec![0.0; d];
        let mut qc = vec![vec![0.0; d]; d];
        match &self.variant {
            ReplacementVariant::IndependentDiscrete { marginals } => {
                for (k, law) in marginals.iter().enumerate() {
                    m[k] = law.mean();
                    q[k] = law.second_moment();
                }
                for k in 0..d {
                    for s in 0..d {
                        qc[k][s] = if k == s { q[k] } else { m[k] * m[s] };
                    }
                }
            }
            ReplacementVariant::ShiftedMultinomial {
                trials,
                probabilities,
                offsets,
                scales,
            } => {
                let t = *trials as f64;
                let ey: Vec<f64> = probabilities.iter().map(|p| t * p).collect();
                // E[Y_k Y_s]: T p_k (1 - p_k) + T^2 p_k^2 on the diagonal,
                // T (T - 1) p_k p_s off it.
                let eyy = |k: usize, s: usize| {
                    let (pk, ps) = (probabilities[k], probabilities[s]);
                    if k == s {
                        t * pk * (1.0 - pk) + t * t * pk * pk
                    } else {
                        t * (t - 1.0) * pk * ps
                    }
                };
                for k in 0..d {
                    m[k] = offsets[k] + scales[k] * ey[k];
                    for s in 0..d {
                        qc[k][s] = offsets[k] * offsets[s]
                            + offsets[k] * scales[s] * ey[s]
                            + offsets[s] * scales[k] * ey[k]
                            + scales[k] * scales[s] * eyy(k, s);
                    }
                    q[k] = qc[k][k];
                }
            }
            ReplacementVariant::ShiftedCommonCount {
                base,
                offsets,
                scales,
            } => {
                let (ey, ey2) = (base.mean(), base.second_moment());
                for k in 0..d {
                    m[k] = offsets[k] + scales[k] * ey;
                    for s in 0..d {
                        qc[k][s] = offsets[k] * offsets[s]
                            + (offsets[k] * scales[s] + offsets[s] * scales[k]) * ey
                            + scales[k] * scales[s] * ey2;
                    }
                    q[k] = qc[k][k];
                }
            }
            ReplacementVariant::PointMass { values } => {
                for k in 0..d {
                    m[k] = values[k];
                    q[k] = values[k] * values[k];
                    for s in 0..d {
                        qc[k][s] = values[k] * values[s];
                    }
                }
            }
        }
        LawMoments { m, q, q_cross: qc }
    }
}

impl<'de> Deserialize<'de> for ReplacementLaw {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let variant = ReplacementVariant::deserialize(deserializer)?;
        ReplacementLaw::new(variant).map_err(serde::de::Error::custom)
    }
}

/// Free-function form of [`ReplacementLaw::sample`].
pub fn sample_replacement<R: Rng + ?Sized>(law: &ReplacementLaw, rng: &mut R) -> Vec<f64> {
    law.sample(rng)
}

/// Free-function form of [`ReplacementLaw::moments`].
pub fn law_moments(law: &ReplacementLaw) -> LawMoments {
    law.moments()
}
