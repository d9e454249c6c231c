//! Cartesian-product parameter sweeps over configuration keys.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cebu_core::experiment::{run_experiment, RunConfig, RunReport};

use crate::output::{fmt_float, write_report};

/// One swept key and its values, parsed from `key=v1,v2,...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for Axis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, values) = s
            .split_once('=')
            .with_context(|| format!("grid '{s}' is not key=v1,v2,..."))?;
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            bail!("grid '{s}' lists no values");
        }
        Ok(Self {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Every combination of axis values, first axis slowest.
pub fn combinations(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    axes.iter().fold(vec![vec![]], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push((axis.key.clone(), v.clone()));
                    next
                })
            })
            .collect()
    })
}

/// Runs every grid point, writing each report to its own directory and a
/// `sweep.csv` overview to `out`.
pub fn run_sweep(base: &RunConfig, axes: &[Axis], out: &Path) -> Result<Vec<RunReport>> {
    let combos = combinations(axes);
    for axis in axes {
        let mut probe = base.clone();
        probe
            .set(&axis.key, &axis.values[0])
            .with_context(|| format!("grid key '{}'", axis.key))?;
    }
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    let mut header: Vec<String> = axes.iter().map(|a| a.key.clone()).collect();
    header.extend(
        [
            "eps_mu_mean",
            "eps_mu_cv",
            "eps_var_mean",
            "eps_var_cv",
            "mean_likelihood_calls",
            "mean_gradient_calls",
            "mean_final_ness",
            "mean_log_evidence_error",
            "modal_first_rank",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;

    let mut reports = Vec::with_capacity(combos.len());
    for combo in combos {
        let mut cfg = base.clone();
        for (k, v) in &combo {
            cfg.set(k, v)?;
        }
        let name = combo
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("_");
        log::info!("sweep point {name}");
        let report = run_experiment(&cfg).map_err(|e| anyhow::anyhow!("{name}: {e}"))?;
        write_report(&out.join(&name), &report)?;
        let a = &report.aggregate;
        let mut row: Vec<String> = combo.iter().map(|(_, v)| v.clone()).collect();
        row.extend([
            fmt_float(a.eps_mu_mean),
            fmt_float(a.eps_mu_cv),
            fmt_float(a.eps_var_mean),
            fmt_float(a.eps_var_cv),
            fmt_float(a.mean_likelihood_calls),
            fmt_float(a.mean_gradient_calls),
            fmt_float(a.mean_final_ness),
            fmt_float(a.mean_log_evidence_error),
            a.modal_first_rank
                .map_or_else(String::new, |r| r.to_string()),
        ]);
        w.write_record(&row)?;
        reports.push(report);
    }
    w.flush()?;
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_and_product() {
        let a: Axis = "d=5, 25".parse().unwrap();
        assert_eq!(a.values, vec!["5", "25"]);
        let b: Axis = "epsilon=1,0.1,0.01".parse().unwrap();
        let c = combinations(&[a, b]);
        assert_eq!(c.len(), 6);
        assert_eq!(
            c[0],
            vec![("d".into(), "5".into()), ("epsilon".into(), "1".into())]
        );
        assert_eq!(
            c[5],
            vec![("d".into(), "25".into()), ("epsilon".into(), "0.01".into())]
        );
        assert!("d".parse::<Axis>().is_err());
        assert!("d=".parse::<Axis>().is_err());
        assert_eq!(combinations(&[]), vec![Vec::<(String, String)>::new()]);
    }
}
