//! The urn process: composition, one reinforcement stage, and the running
//! sums every estimator is built from.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::g12;
use crate::sampling::{
    multinomial_into, multivariate_hypergeometric_into, DrawCountLaw, ReplacementLaw, SamplingError,
};

/// How the balls of one stage are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    /// Multivariate hypergeometric given the composition `H`.
    WithoutReplacement,
    /// Multinomial given the proportions `Z = H / S`.
    WithReplacement,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UrnError {
    #[error(
        "dimension mismatch: initial composition has {initial} colors, replacement law has {law}"
    )]
    DimensionMismatch { initial: usize, law: usize },
    #[error("the urn needs at least one color")]
    NoColors,
    #[error("the initial urn is empty")]
    EmptyUrn,
    #[error("drawing without replacement needs an integer-valued replacement law")]
    NonIntegerLaw,
    #[error("composition is no longer integral ({0}); cannot draw without replacement")]
    NonIntegerComposition(f64),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnConfig {
    pub initial: Vec<u64>,
    pub draw_mode: DrawMode,
    pub count_law: DrawCountLaw,
    pub replacement_law: ReplacementLaw,
    /// Neumaier-compensated running sums; worth it beyond ~1e7 stages.
    #[serde(default)]
    pub compensated: bool,
}

impl UrnConfig {
    pub fn new(
        initial: Vec<u64>,
        draw_mode: DrawMode,
        count_law: DrawCountLaw,
        replacement_law: ReplacementLaw,
    ) -> Result<Self, UrnError> {
        let config = Self {
            initial,
            draw_mode,
            count_law,
            replacement_law,
            compensated: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<(), UrnError> {
        if self.initial.is_empty() {
            return Err(UrnError::NoColors);
        }
        if self.initial.len() != self.replacement_law.dim() {
            return Err(UrnError::DimensionMismatch {
                initial: self.initial.len(),
                law: self.replacement_law.dim(),
            });
        }
        if self.initial.iter().sum::<u64>() == 0 {
            return Err(UrnError::EmptyUrn);
        }
        if self.draw_mode == DrawMode::WithoutReplacement
            && !self.replacement_law.is_integer_valued()
        {
            return Err(UrnError::NonIntegerLaw);
        }
        Ok(())
    }
}

/// A sum that is either plain or Neumaier-compensated.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accum {
    sum: f64,
    comp: f64,
}

impl Accum {
    #[inline]
    fn add(&mut self, x: f64, compensated: bool) {
        if !compensated {
            self.sum += x;
            return;
        }
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Every sum the estimators need. Matrices are `d x d`, row-major, with
/// the diagonal unused.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningSums {
    d: usize,
    compensated: bool,
    pub sum_n: u64,
    pub sum_n2: u64,
    pub total_draws: u64,
    /// `sum_j X_jk / N_j`
    pub sum_ratio: Vec<Accum>,
    /// `sum_j A_jk X_jk`
    pub sum_ax: Vec<Accum>,
    /// `sum_j A_jk^2 X_jk`
    pub sum_a2x: Vec<Accum>,
    /// `[k][s]`: `sum_j A_jk A_js X_jk` (not symmetric)
    pub sum_aax: Vec<Accum>,
    /// `[k][s]`: `sum_j X_jk X_js`
    pub sum_xx: Vec<u64>,
    /// `[k][s]`: `sum_j A_jk A_js X_jk X_js`
    pub sum_aaxx: Vec<Accum>,
}

impl RunningSums {
    pub fn new(d: usize, compensated: bool) -> Self {
        Self {
            d,
            compensated,
            sum_n: 0,
            sum_n2: 0,
            total_draws: 0,
            sum_ratio: vec![Accum::default(); d],
            sum_ax: vec![Accum::default(); d],
            sum_a2x: vec![Accum::default(); d],
            sum_aax: vec![Accum::default(); d * d],
            sum_xx: vec![0; d * d],
            sum_aaxx: vec![Accum::default(); d * d],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn ratio(&self, k: usize) -> f64 {
        self.sum_ratio[k].value()
    }

    pub fn ax(&self, k: usize) -> f64 {
        self.sum_ax[k].value()
    }

    pub fn a2x(&self, k: usize) -> f64 {
        self.sum_a2x[k].value()
    }

    pub fn aax(&self, k: usize, s: usize) -> f64 {
        self.sum_aax[k * self.d + s].value()
    }

    pub fn xx(&self, k: usize, s: usize) -> u64 {
        self.sum_xx[k * self.d + s]
    }

    pub fn aaxx(&self, k: usize, s: usize) -> f64 {
        self.sum_aaxx[k * self.d + s].value()
    }

    /// `sum_j sum_k A_jk X_jk`: everything added to the urn so far.
    pub fn weighted_additions(&self) -> f64 {
        self.sum_ax.iter().map(Accum::value).sum()
    }

    fn record(&mut self, n: u64, x: &[u64], a: &[f64]) {
        let c = self.compensated;
        let d = self.d;
        self.sum_n += n;
        self.sum_n2 += n * n;
        self.total_draws += n;
        let nf = n as f64;
        for k in 0..d {
            if x[k] == 0 {
                continue;
            }
            let xk = x[k] as f64;
            self.sum_ratio[k].add(xk / nf, c);
            self.sum_ax[k].add(a[k] * xk, c);
            self.sum_a2x[k].add(a[k] * a[k] * xk, c);
            for s in 0..d {
                if s == k {
                    continue;
                }
                let aa = a[k] * a[s];
                self.sum_aax[k * d + s].add(aa * xk, c);
                if x[s] != 0 {
                    self.sum_xx[k * d + s] += x[k] * x[s];
                    self.sum_aaxx[k * d + s].add(aa * xk * x[s] as f64, c);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrnState {
    pub n: u64,
    pub h: Vec<f64>,
    pub s: f64,
    pub s0: f64,
    /// Cumulative draws per color, `N_{A_k,n}`.
    pub n_a: Vec<u64>,
    pub sums: RunningSums,
}

impl UrnState {
    pub fn init(config: &UrnConfig) -> Result<Self, UrnError> {
        config.validate()?;
        let d = config.dim();
        let h: Vec<f64> = config.initial.iter().map(|&v| v as f64).collect();
        let s: f64 = h.iter().sum();
        Ok(Self {
            n: 0,
            h,
            s,
            s0: s,
            n_a: vec![0; d],
            sums: RunningSums::new(d, config.compensated),
        })
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    /// Rebuild the state reached by applying `records` (every stage, in
    /// order) to the initial composition.
    pub fn replay(initial: &[u64], records: &[StageRecord], compensated: bool) -> Self {
        let d = initial.len();
        let h: Vec<f64> = initial.iter().map(|&v| v as f64).collect();
        let s0: f64 = h.iter().sum();
        let mut st = Self {
            n: 0,
            h,
            s: s0,
            s0,
            n_a: vec![0; d],
            sums: RunningSums::new(d, compensated),
        };
        for r in records {
            st.apply(r.draws, &r.x, &r.a);
        }
        st
    }

    fn apply(&mut self, n: u64, x: &[u64], a: &[f64]) {
        let mut added = 0.0;
        for k in 0..self.h.len() {
            if x[k] > 0 {
                let inc = a[k] * x[k] as f64;
                self.h[k] += inc;
                added += inc;
                self.n_a[k] += x[k];
            }
        }
        self.s += added;
        self.n += 1;
        self.sums.record(n, x, a);
    }

    /// `Z = H / S`.
    pub fn normalized_composition(&self) -> Vec<f64> {
        normalized_composition(&self.h)
    }
}

/// `H / sum(H)`.
pub fn normalized_composition(h: &[f64]) -> Vec<f64> {
    let s: f64 = h.iter().sum();
    h.iter().map(|v| v / s).collect()
}

/// One stage as it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub n: u64,
    #[serde(rename = "N")]
    pub draws: u64,
    #[serde(rename = "X")]
    pub x: Vec<u64>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "Z")]
    pub z_after: Vec<f64>,
}

/// An urn together with its configuration and scratch buffers.
#[derive(Debug, Clone)]
pub struct Urn {
    config: UrnConfig,
    state: UrnState,
    x: Vec<u64>,
    a: Vec<f64>,
    buf: Vec<u64>,
    p: Vec<f64>,
}

impl Urn {
    pub fn new(config: UrnConfig) -> Result<Self, UrnError> {
        let state = UrnState::init(&config)?;
        let d = config.dim();
        Ok(Self {
            config,
            state,
            x: vec![0; d],
            a: vec![0.0; d],
            buf: vec![0; d],
            p: vec![0.0; d],
        })
    }

    pub fn config(&self) -> &UrnConfig {
        &self.config
    }

    pub fn state(&self) -> &UrnState {
        &self.state
    }

    pub fn into_state(self) -> UrnState {
        self.state
    }

    /// Draw `N`, then `X` given the current composition, then `A`
    /// independently of the past; add `A_k X_k` balls of each color.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), UrnError> {
        let st = &mut self.state;
        let available = if st.s >= u64::MAX as f64 {
            u64::MAX
        } else {
            st.s.floor() as u64
        };
        let n = self.config.count_law.sample(available, rng)?;
        match self.config.draw_mode {
            DrawMode::WithoutReplacement => {
                for (b, &h) in self.buf.iter_mut().zip(&st.h) {
                    if h.fract() != 0.0 || h > 9.007_199_254_740_992e15 {
                        return Err(UrnError::NonIntegerComposition(h));
                    }
                    *b = h as u64;
                }
                multivariate_hypergeometric_into(&self.buf, n, rng, &mut self.x)?;
            }
            DrawMode::WithReplacement => {
                for (p, &h) in self.p.iter_mut().zip(&st.h) {
                    *p = h / st.s;
                }
                multinomial_into(&self.p, n, rng, &mut self.x);
            }
        }
        self.config.replacement_law.sample_into(rng, &mut self.a);
        st.apply(n, &self.x, &self.a);
        Ok(())
    }

    /// [`Urn::step`], returning what happened.
    pub fn step_recorded<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StageRecord, UrnError> {
        self.step(rng)?;
        Ok(self.last_record())
    }

    fn last_record(&self) -> StageRecord {
        StageRecord {
            n: self.state.n,
            draws: self.x.iter().sum(),
            x: self.x.clone(),
            a: self.a.clone(),
            z_after: self.state.normalized_composition(),
        }
    }

    /// Apply `steps` stages, keeping a record of every stage whose index is
    /// a multiple of `record_every` (`0` records nothing).
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        steps: u64,
        rng: &mut R,
        record_every: u64,
    ) -> Result<Vec<StageRecord>, UrnError> {
        let mut records = Vec::new();
        if record_every > 0 {
            records.reserve((steps / record_every) as usize);
        }
        for _ in 0..steps {
            self.step(rng)?;
            if record_every > 0 && self.state.n % record_every == 0 {
                records.push(self.last_record());
            }
        }
        Ok(records)
    }
}

/// Trajectory CSV: `n,N,X_1..X_d,A_1..A_d,Z_1..Z_d`.
pub fn write_trajectory_csv<W: Write + ?Sized>(
    out: &mut W,
    d: usize,
    records: &[StageRecord],
) -> std::io::Result<()> {
    let mut header = vec!["n".to_string(), "N".to_string()];
    for prefix in ["X", "A", "Z"] {
        header.extend((1..=d).map(|k| format!("{prefix}_{k}")));
    }
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        let mut row = vec![r.n.to_string(), r.draws.to_string()];
        row.extend(r.x.iter().map(u64::to_string));
        row.extend(r.a.iter().map(|&v| g12(v)));
        row.extend(r.z_after.iter().map(|&v| g12(v)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
