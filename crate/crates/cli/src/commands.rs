//! The five subcommands. Each writes its artifacts atomically into `out`,
//! prints a short report to `log`, and returns `Err` when the exit code is
//! not 0.

use std::io::Write;
use std::path::Path;

use plap_core::asymptotics::limit_test_pair;
use plap_core::inequalities::run_all_suites;
use plap_core::{
    infimum_i_abd, lambda_infinity, normalized_cone, residuals_limit_system, solve_eigenpair,
    sweep_p, EigenPair, Error, LimitParams, SweepRecord,
};
use serde_json::json;

use crate::config::{ResidualPair, RunConfig};
use crate::error::CliError;
use crate::output::{fmt_f64, write_atomic, Csv};

pub type CmdResult = Result<(), CliError>;

/// Agreement required between the numerical infimum and the closed form.
const ANALYTIC_TOLERANCE: f64 = 1e-3;

fn limit_params(cfg: &RunConfig) -> Result<LimitParams, CliError> {
    let prm = cfg.params()?;
    let domain = cfg.domain()?.build()?;
    Ok(LimitParams::for_domain(&domain, prm.gamma, prm.r, prm.s)?)
}

fn pair_csv(pair: &EigenPair) -> String {
    let mut csv = Csv::new(&["node", "x", "y", "u", "v"]);
    let d = pair.u.domain();
    for (i, (u, v)) in pair.u.values().iter().zip(pair.v.values()).enumerate() {
        let x = d.node(i);
        csv.row(&[
            i.to_string(),
            fmt_f64(x[0]),
            fmt_f64(x[1]),
            fmt_f64(*u),
            fmt_f64(*v),
        ]);
    }
    csv.finish()
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path, log: &mut dyn Write) -> CmdResult {
    let domain = cfg.domain()?.build()?;
    let prm_cfg = cfg.params()?;
    let p = prm_cfg
        .p
        .ok_or_else(|| CliError::key("params.p", None, "required key is missing".into()))?;
    let params = prm_cfg.at(p)?;
    let (pair, failure) = match solve_eigenpair(&domain, &params, &cfg.solver.options) {
        Ok(pair) => (pair, None),
        Err(Error::NonConvergence {
            best, iterations, ..
        }) => (
            *best,
            Some(format!("no convergence after {iterations} iterations")),
        ),
        Err(e) => return Err(e.into()),
    };
    write_atomic(out, "eigenpair.csv", &pair_csv(&pair))?;
    let mut summary = Csv::new(&[
        "p",
        "alpha",
        "beta",
        "lambda",
        "lambda_root",
        "residual",
        "iterations",
        "converged",
    ]);
    summary.row(&[
        fmt_f64(p),
        fmt_f64(params.alpha()),
        fmt_f64(params.beta()),
        fmt_f64(pair.lambda),
        fmt_f64(pair.lambda_root(p)),
        fmt_f64(pair.residual),
        pair.iterations.to_string(),
        pair.converged.to_string(),
    ]);
    write_atomic(out, "summary.csv", &summary.finish())?;
    writeln!(
        log,
        "lambda={} lambda_root={} residual={} iterations={}",
        fmt_f64(pair.lambda),
        fmt_f64(pair.lambda_root(p)),
        fmt_f64(pair.residual),
        pair.iterations
    )?;
    match failure {
        Some(msg) => Err(CliError::Numerical(msg)),
        None => Ok(()),
    }
}

fn sweep_csv(rows: &[SweepRecord]) -> String {
    let mut csv = Csv::new(&[
        "p",
        "alpha",
        "beta",
        "lambda_p",
        "lambda_root",
        "lambda_inf",
        "gap",
        "iterations",
        "converged",
    ]);
    for r in rows {
        csv.row(&[
            fmt_f64(r.p),
            fmt_f64(r.alpha),
            fmt_f64(r.beta),
            fmt_f64(r.lambda_p),
            fmt_f64(r.lambda_root),
            fmt_f64(r.lambda_inf),
            fmt_f64(r.gap),
            r.iterations.to_string(),
            r.converged.to_string(),
        ]);
    }
    csv.finish()
}

fn run_sweep(
    cfg: &RunConfig,
    out: &Path,
    log: &mut dyn Write,
) -> Result<Vec<SweepRecord>, CliError> {
    let domain = cfg.domain()?.build()?;
    let prm = cfg.params()?;
    let ps = cfg.p_values()?;
    // validates a fixed alpha/beta against every exponent before solving
    for &p in ps {
        prm.at(p)?;
    }
    let rows = sweep_p(&domain, prm.gamma, prm.r, prm.s, ps, &cfg.solver.options)?;
    write_atomic(out, "sweep.csv", &sweep_csv(&rows))?;
    for r in &rows {
        writeln!(
            log,
            "p={} lambda_root={} gap={} iterations={}{}",
            r.p,
            fmt_f64(r.lambda_root),
            fmt_f64(r.gap),
            r.iterations,
            if r.converged { "" } else { " (not converged)" }
        )?;
    }
    Ok(rows)
}

fn unconverged(rows: &[SweepRecord]) -> CmdResult {
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| r.p.to_string())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "no convergence at p = {}",
            bad.join(", ")
        )))
    }
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path, log: &mut dyn Write) -> CmdResult {
    let rows = run_sweep(cfg, out, log)?;
    unconverged(&rows)
}

pub fn cmd_verify_limit(cfg: &RunConfig, out: &Path, log: &mut dyn Write) -> CmdResult {
    let lp = limit_params(cfg)?;
    let lambda_inf = lambda_infinity(&lp)?;
    writeln!(log, "lambda_inf={}", fmt_f64(lambda_inf))?;
    if cfg.verify_analytic {
        let inf = infimum_i_abd(&lp);
        let gap = (inf - lambda_inf).abs();
        let pass = gap <= ANALYTIC_TOLERANCE;
        writeln!(
            log,
            "infimum={} gap={} {}",
            fmt_f64(inf),
            fmt_f64(gap),
            if pass { "PASS" } else { "FAIL" }
        )?;
        return if pass {
            Ok(())
        } else {
            Err(CliError::Assertion(format!(
                "infimum differs from lambda_inf by {gap}"
            )))
        };
    }
    let rows = run_sweep(cfg, out, log)?;
    let last = rows.last().expect("sweep has at least one row");
    let pass = last.gap <= cfg.verify_tolerance;
    writeln!(
        log,
        "final p={} lambda_root={} gap={} tolerance={} {}",
        last.p,
        fmt_f64(last.lambda_root),
        fmt_f64(last.gap),
        cfg.verify_tolerance,
        if pass { "PASS" } else { "FAIL" }
    )?;
    if !pass {
        return Err(CliError::Assertion(format!(
            "gap {} at p = {} exceeds {}",
            last.gap, last.p, cfg.verify_tolerance
        )));
    }
    unconverged(&rows)
}

pub fn cmd_residuals(cfg: &RunConfig, out: &Path, log: &mut dyn Write) -> CmdResult {
    let domain = cfg.domain()?.build()?;
    let lp = limit_params(cfg)?;
    let (u, v) = match cfg.residual_pair {
        ResidualPair::TestPair => limit_test_pair(&domain, &lp),
        ResidualPair::Cone => (normalized_cone(&domain), normalized_cone(&domain)),
    };
    let rep = residuals_limit_system(&u, &v, &lp, cfg.residual_nodes.as_deref())?;
    let mut csv = Csv::new(&[
        "node", "x", "y", "flag", "g1_r", "g2_r", "g1_s", "g2_s", "defect",
    ]);
    for n in &rep.nodes {
        csv.row(&[
            n.node.to_string(),
            fmt_f64(n.location[0]),
            fmt_f64(n.location[1]),
            n.flag.as_str().to_string(),
            fmt_f64(n.g1_r),
            fmt_f64(n.g2_r),
            fmt_f64(n.g1_s),
            fmt_f64(n.g2_s),
            fmt_f64(n.defect()),
        ]);
    }
    write_atomic(out, "residuals.csv", &csv.finish())?;
    writeln!(
        log,
        "lambda_inf={} max_abs={} max_value={} min_value={}",
        fmt_f64(rep.lambda_inf),
        fmt_f64(rep.max_abs),
        fmt_f64(rep.max_value),
        fmt_f64(rep.min_value)
    )?;
    Ok(())
}

pub fn cmd_check(cfg: &RunConfig, out: &Path, log: &mut dyn Write) -> CmdResult {
    let reports = run_all_suites(cfg.check_samples, cfg.check_seed)?;
    let mut lines = String::new();
    for r in &reports {
        let line = json!({
            "suite": r.name,
            "cases": r.cases,
            "violations": r.violations,
            "worst_margin": r.worst_margin,
            "passed": r.passed,
        })
        .to_string();
        writeln!(log, "{line}")?;
        lines.push_str(&line);
        lines.push('\n');
    }
    write_atomic(out, "check.jsonl", &lines)?;
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(format!(
            "suites failed: {}",
            failed.join(", ")
        )))
    }
}
