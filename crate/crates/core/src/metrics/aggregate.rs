use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance of a system's mean from the reference system's mean, in
/// reference standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Band {
    #[serde(rename = "")]
    None,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "*")]
    Star,
    #[serde(rename = "**")]
    DoubleStar,
}

impl Band {
    pub fn symbol(self) -> &'static str {
        match self {
            Band::None => "",
            Band::Plus => "+",
            Band::Star => "*",
            Band::DoubleStar => "**",
        }
    }

    /// Band for `|Δ| / std` (`std > 0`).
    pub fn from_ratio(ratio: f64) -> Band {
        if ratio >= 3.0 {
            Band::DoubleStar
        } else if ratio >= 2.0 {
            Band::Star
        } else if ratio >= 1.0 {
            Band::Plus
        } else {
            Band::None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
    pub band: Band,
    /// The reference system has zero spread while the means differ.
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub reference: String,
    /// system → metric → summary
    pub systems: BTreeMap<String, BTreeMap<String, MetricSummary>>,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `runs` maps system → one metric map per seed.
pub fn aggregate_runs(
    runs: &BTreeMap<String, Vec<BTreeMap<String, f64>>>,
    reference: &str,
) -> Result<MetricReport> {
    let stats = |system: &str| -> Result<BTreeMap<String, (f64, f64, usize)>> {
        let seeds = &runs[system];
        if seeds.is_empty() {
            return Err(Error::Input(format!("system {system} has no runs")));
        }
        let mut by_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for s in seeds {
            for (k, v) in s {
                by_metric.entry(k.clone()).or_default().push(*v);
            }
        }
        Ok(by_metric
            .into_iter()
            .map(|(k, v)| {
                let (m, s) = mean_std(&v);
                (k, (m, s, v.len()))
            })
            .collect())
    };
    if !runs.contains_key(reference) {
        return Err(Error::Input(format!(
            "reference system {reference} has no runs"
        )));
    }
    let ref_stats = stats(reference)?;
    let mut systems = BTreeMap::new();
    for system in runs.keys() {
        let mut rows = BTreeMap::new();
        for (metric, (mean, std, n)) in stats(system)? {
            let (band, zero_variance) = match ref_stats.get(&metric) {
                None => (Band::None, false),
                Some(&(rm, rs, _)) => {
                    let delta = (mean - rm).abs();
                    if rs == 0.0 {
                        if delta == 0.0 {
                            (Band::None, false)
                        } else {
                            (Band::DoubleStar, true)
                        }
                    } else {
                        (Band::from_ratio(delta / rs), false)
                    }
                }
            };
            rows.insert(
                metric,
                MetricSummary {
                    mean,
                    std,
                    runs: n,
                    band,
                    zero_variance,
                },
            );
        }
        systems.insert(system.clone(), rows);
    }
    Ok(MetricReport {
        reference: reference.to_string(),
        systems,
    })
}

/// Aligned text table with scores ×100 and band symbols.
pub fn render_report(report: &MetricReport) -> String {
    let metrics: Vec<&String> = {
        let mut m: Vec<&String> = report.systems.values().flat_map(|r| r.keys()).collect();
        m.sort();
        m.dedup();
        m
    };
    let name_w = report
        .systems
        .keys()
        .map(|s| s.len())
        .max()
        .unwrap_or(6)
        .max(6);
    let col_w = 16;
    let mut out = format!("{:<name_w$}", "system");
    for m in &metrics {
        let _ = write!(out, " {m:>col_w$}");
    }
    out.push('\n');
    for (system, rows) in &report.systems {
        let _ = write!(out, "{system:<name_w$}");
        for m in &metrics {
            let cell = match rows.get(*m) {
                Some(s) => format!(
                    "{:.2}±{:.2}{}{}",
                    100.0 * s.mean,
                    100.0 * s.std,
                    s.band.symbol(),
                    if s.zero_variance { "!" } else { "" }
                ),
                None => "-".into(),
            };
            let _ = write!(out, " {cell:>col_w$}");
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "bands vs {}: + ≥1σ, * ≥2σ, ** ≥3σ; ! reference has zero variance",
        report.reference
    );
    out
}
