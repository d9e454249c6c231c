//! CSV and JSON result files.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use cebu_core::experiment::{ProblemKind, Reference, RunConfig, RunReport};
use cebu_core::field_prior::GridSpec;

/// Float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Collocation points of the configured problem: segment midpoints for the
/// beam, coordinate indices otherwise.
pub fn collocation_points(config: &RunConfig) -> Result<Vec<f64>> {
    Ok(match config.problem {
        ProblemKind::Beam => GridSpec::new(config.beam.length, config.d)?.midpoints,
        ProblemKind::Toy1d => vec![0.0],
        ProblemKind::ToyActiveCoordinate => (0..config.d).map(|i| i as f64).collect(),
    })
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

/// `x,mean,var` of the closed-form posterior.
pub fn write_reference_csv(path: &Path, x: &[f64], reference: &Reference) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "mean", "var"])?;
    for ((xi, m), v) in x.iter().zip(&reference.mean).zip(&reference.var) {
        w.write_record([fmt_float(*xi), fmt_float(*m), fmt_float(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.json`, `config.txt`, `summary.csv`, `steps.csv` and one
/// `moments/repeat_NNN.csv` per repeat into `dir`.
pub fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    fs::create_dir_all(dir.join("moments"))
        .with_context(|| format!("cannot create {}", dir.display()))?;
    fs::write(dir.join("results.json"), report.to_json()?)?;
    fs::write(dir.join("config.txt"), report.config.to_kv_string())?;

    let mut w = writer(&dir.join("summary.csv"))?;
    w.write_record([
        "repeat",
        "num_steps",
        "first_rank",
        "eps_mu",
        "eps_var",
        "log_evidence",
        "likelihood_calls",
        "gradient_calls",
        "final_ness",
        "n_final",
    ])?;
    for r in &report.repeats {
        w.write_record([
            r.repeat.to_string(),
            r.num_steps.to_string(),
            fmt_opt(r.first_rank),
            fmt_float(r.eps_mu),
            fmt_float(r.eps_var),
            fmt_float(r.log_evidence),
            r.likelihood_calls.to_string(),
            r.gradient_calls.to_string(),
            fmt_float(r.final_ness),
            r.n_final.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(&dir.join("steps.csv"))?;
    w.write_record([
        "repeat",
        "step",
        "beta",
        "n_samples",
        "ness",
        "rank",
        "n_h",
        "inner_iterations",
        "likelihood_calls",
        "gradient_calls",
    ])?;
    for r in &report.repeats {
        for (t, s) in r.steps.iter().enumerate() {
            w.write_record([
                r.repeat.to_string(),
                (t + 1).to_string(),
                fmt_float(s.beta),
                s.n_samples.to_string(),
                fmt_float(s.ness),
                fmt_opt(s.rank),
                fmt_opt(s.n_h),
                fmt_opt(s.inner_iterations),
                s.likelihood_calls.to_string(),
                s.gradient_calls.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let x = collocation_points(&report.config)?;
    let reference = &report.reference;
    for r in &report.repeats {
        let mut w = writer(
            &dir.join("moments")
                .join(format!("repeat_{:03}.csv", r.repeat)),
        )?;
        w.write_record(["x", "mean", "var", "ref_mean", "ref_var"])?;
        for (i, &xi) in x.iter().enumerate() {
            w.write_record([
                fmt_float(xi),
                fmt_float(r.mean[i]),
                fmt_float(r.var[i]),
                fmt_float(reference.mean[i]),
                fmt_float(reference.var[i]),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

/// One-line human summary of a report.
pub fn summary_line(report: &RunReport) -> String {
    let a = &report.aggregate;
    format!(
        "{} on {} (d = {}): eps_mu = {:.4} (cv {:.2}), eps_var = {:.4} (cv {:.2}), ln Z error = {:+.4}, likelihood calls = {:.1}, gradient calls = {:.1}, final nESS = {:.3}, steps = {:?}",
        report.config.method,
        report.config.problem,
        report.config.d,
        a.eps_mu_mean,
        a.eps_mu_cv,
        a.eps_var_mean,
        a.eps_var_cv,
        a.mean_log_evidence_error,
        a.mean_likelihood_calls,
        a.mean_gradient_calls,
        a.mean_final_ness,
        a.step_histogram,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_significant_digits() {
        let s = fmt_float(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        let third = 1.0 / 3.0;
        let mantissa = fmt_float(third).split('e').next().unwrap().replace('.', "");
        assert_eq!(mantissa.len(), 17);
        assert_eq!(fmt_float(third).parse::<f64>().unwrap(), third);
        assert_eq!(fmt_float(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn beam_collocation_points_are_midpoints() {
        let cfg = RunConfig {
            d: 4,
            ..RunConfig::default()
        };
        assert_eq!(
            collocation_points(&cfg).unwrap(),
            vec![0.625, 1.875, 3.125, 4.375]
        );
    }
}
