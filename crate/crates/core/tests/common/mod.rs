//! Direct recomputation of every estimator from a full trajectory, with
//! none of the running sums the library keeps.

#![allow(dead_code)]

use mmru::estimators::{CrossForm, DEFAULT_MIN_JOINT};
use mmru::urn::StageRecord;

pub struct Naive {
    pub mu: f64,
    pub q_n: f64,
    pub nu: Vec<f64>,
    pub n_a: Vec<u64>,
    pub m: Vec<Option<f64>>,
    pub q: Vec<Option<f64>>,
    pub cross: Vec<Vec<Option<(f64, CrossForm)>>>,
}

pub fn naive(d: usize, records: &[StageRecord]) -> Naive {
    let n = records.len() as f64;
    let mu = records.iter().map(|r| r.draws as f64).sum::<f64>() / n;
    let q_n = records.iter().map(|r| (r.draws * r.draws) as f64).sum::<f64>() / n;
    let nu = (0..d)
        .map(|k| records.iter().map(|r| r.x[k] as f64 / r.draws as f64).sum::<f64>() / n)
        .collect();
    let n_a: Vec<u64> = (0..d).map(|k| records.iter().map(|r| r.x[k]).sum()).collect();
    let per_draw = |k: usize, f: &dyn Fn(&StageRecord) -> f64| -> Option<f64> {
        (n_a[k] > 0).then(|| records.iter().filter(|r| r.x[k] > 0).map(f).sum::<f64>() / n_a[k] as f64)
    };
    let m = (0..d).map(|k| per_draw(k, &|r| r.a[k] * r.x[k] as f64)).collect();
    let q = (0..d).map(|k| per_draw(k, &|r| r.a[k] * r.a[k] * r.x[k] as f64)).collect();
    let mut cross = vec![vec![None; d]; d];
    for k in 0..d {
        for s in 0..d {
            if k == s {
                continue;
            }
            let joint: u64 = records.iter().map(|r| r.x[k] * r.x[s]).sum();
            cross[k][s] = if joint >= DEFAULT_MIN_JOINT {
                let num: f64 = records
                    .iter()
                    .filter(|r| r.x[k] > 0 && r.x[s] > 0)
                    .map(|r| r.a[k] * r.a[s] * (r.x[k] * r.x[s]) as f64)
                    .sum();
                Some((num / joint as f64, CrossForm::Product))
            } else {
                let (lo, hi) = (k.min(s), k.max(s));
                let base = if n_a[hi] > n_a[lo] { hi } else { lo };
                per_draw(base, &|r| r.a[k] * r.a[s] * r.x[base] as f64).map(|v| (v, CrossForm::Fallback))
            };
        }
    }
    Naive { mu, q_n, nu, n_a, m, q, cross }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
