//! CSV and JSON output. Numbers are written with 12 significant digits in
//! CSV and exactly in JSON; CSV files get a `.meta.json` sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    HarnessError, PowerCurve, ReplicationSummary, ScenarioSpec, CONVERGENCE_TOLERANCE,
    HISTOGRAM_BINS,
};
use crate::estimators::DEFAULT_MIN_JOINT;
use crate::format::g12;
use crate::inference::DEFAULT_MIN_DRAWS;

/// Where the base seed came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Scenario,
    Flag,
    Environment,
}

/// Provenance of an export. Parallelism is deliberately absent: it does
/// not affect the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub scenario: String,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub horizon: u64,
    pub replications: u64,
    pub deviations: Vec<String>,
    pub library_version: String,
    pub min_draws: u64,
    pub min_joint: u64,
    pub histogram_bins: usize,
    pub convergence_tolerance: f64,
}

impl Metadata {
    pub fn for_spec(spec: &ScenarioSpec) -> Self {
        Self {
            scenario: spec.name.clone(),
            seed: spec.base_seed,
            seed_source: SeedSource::Scenario,
            horizon: spec.horizon,
            replications: spec.replications,
            deviations: spec.deviations.clone(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            min_draws: DEFAULT_MIN_DRAWS,
            min_joint: DEFAULT_MIN_JOINT,
            histogram_bins: HISTOGRAM_BINS,
            convergence_tolerance: CONVERGENCE_TOLERANCE,
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(g12).unwrap_or_default()
}

fn numbered(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |k| format!("{prefix}_{k}"))
}

/// One row per successful replication:
/// `scenario,e,replication,n,Z_1..,m_hat_1..,N_A_1..,theta,p_value,reject`.
/// Undefined values are empty fields.
pub fn write_summary_csv<W: Write + ?Sized>(
    out: &mut W,
    summary: &ReplicationSummary,
) -> std::io::Result<()> {
    let d = summary.d;
    let mut header: Vec<String> = ["scenario", "e", "replication", "n"]
        .map(String::from)
        .to_vec();
    header.extend(numbered("Z", d));
    header.extend(numbered("m_hat", d));
    header.extend(numbered("N_A", d));
    header.extend(["theta", "p_value", "reject"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for o in summary.successes() {
        let mut row = vec![
            summary.scenario.clone(),
            opt(summary.e),
            o.replication.to_string(),
            o.n.to_string(),
        ];
        row.extend(o.z.iter().map(|&z| g12(z)));
        row.extend(o.m_hat.iter().map(|&m| opt(m)));
        row.extend(o.n_a.iter().map(u64::to_string));
        match &o.test {
            Some(t) => row.extend([g12(t.theta), g12(t.p_value), t.reject.to_string()]),
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// `scenario,color,bin_left,bin_right,count`, one row per bin and color.
pub fn write_histogram_csv<W: Write + ?Sized>(
    out: &mut W,
    summary: &ReplicationSummary,
) -> std::io::Result<()> {
    writeln!(out, "scenario,color,bin_left,bin_right,count")?;
    for h in &summary.histograms {
        for (i, count) in h.counts.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                summary.scenario,
                h.color,
                g12(h.edges[i]),
                g12(h.edges[i + 1]),
                count
            )?;
        }
    }
    Ok(())
}

/// `e,m2_minus_m3,replications,rejections,power,wilson_low,wilson_high`.
pub fn write_power_csv<W: Write + ?Sized>(out: &mut W, curve: &PowerCurve) -> std::io::Result<()> {
    writeln!(
        out,
        "e,m2_minus_m3,replications,rejections,power,wilson_low,wilson_high"
    )?;
    for r in &curve.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            opt(r.e),
            opt(r.m2_minus_m3),
            r.replications,
            r.rejections,
            g12(r.power),
            g12(r.wilson_low),
            g12(r.wilson_high)
        )?;
    }
    Ok(())
}

/// `<path>.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Write `meta` next to the CSV at `path`.
pub fn write_meta_sidecar<T: Serialize>(path: &Path, meta: &T) -> Result<PathBuf, HarnessError> {
    let side = sidecar_path(path);
    export_json(&side, meta)?;
    Ok(side)
}

/// Pretty JSON; floats are written so that they parse back to the same bits.
pub fn export_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| HarnessError::io(path, e))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| HarnessError::io(path, e))
}

pub fn import_json<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))
}
