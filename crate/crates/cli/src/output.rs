//! Text, CSV and JSON renderings. Numbers in CSV use 17 significant digits
//! so that output files round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use nlivp::hypothesis::{HypothesisReport, SamplingReport};
use nlivp::{SolveResult, Trajectory};
use serde_json::{json, Value};

use crate::CliError;

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into())
}

/// `t,x_1,...,x_N`, one row per grid node.
pub fn trajectory_csv(x: &Trajectory) -> String {
    let mut out = String::from("t");
    for j in 1..=x.n_components() {
        let _ = write!(out, ",x_{j}");
    }
    out.push('\n');
    for (t, row) in x.grid().nodes().iter().zip(x.rows()) {
        out.push_str(&num(*t));
        for v in row {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

pub fn check_table(rep: &HypothesisReport, sampling: Option<&SamplingReport>) -> String {
    let mut out = String::new();
    if let Some(v) = &rep.hyp_violation {
        let _ = writeln!(out, "hypothesis violated: {v}");
        return out;
    }
    let _ = writeln!(
        out,
        "{:>3} {:>4} {:>10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>5}",
        "p", "n_p", "t_p", "G_p", "|A_p|", "C_p", "theta_p", "M_p", "K_p", "rho_p", "lhs", "pass"
    );
    for r in &rep.records {
        let _ = writeln!(
            out,
            "{:>3} {:>4} {:>10.4} {:>12.6e} {:>12.6e} {:>12.6e} {:>12} {:>12} {:>12} {:>12} {:>12.6e} {:>5}{}",
            r.p,
            r.n_p,
            r.t_p,
            r.g,
            r.norm_a,
            r.c,
            opt(r.theta_p),
            opt(r.m),
            opt(r.k),
            opt(r.rho_p),
            r.lhs,
            if r.pass { "yes" } else { "no" },
            if r.marginal { "  (marginal)" } else { "" }
        );
    }
    if !rep.ill_conditioned.is_empty() {
        let _ = writeln!(out, "ill-conditioned components: {:?}", rep.ill_conditioned);
    }
    if let Some(s) = sampling {
        let _ = writeln!(
            out,
            "envelope sampling: {} evaluations (seed {}), {} violations",
            s.evaluations,
            s.seed,
            s.violations.len()
        );
    }
    let _ = writeln!(out, "overall: {}", if rep.overall { "pass" } else { "fail" });
    out
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

pub fn check_json(rep: &HypothesisReport, sampling: Option<&SamplingReport>) -> String {
    let mut v = serde_json::to_value(rep).expect("serialisable");
    v["envelope_sampling"] = serde_json::to_value(sampling).expect("serialisable");
    pretty(&v)
}

pub fn solve_json(res: &SolveResult, hyp: Option<&HypothesisReport>) -> String {
    let rho = |p: usize| {
        hyp.and_then(|h| h.records.iter().find(|r| r.p == p))
            .and_then(|r| r.rho_p)
    };
    let seminorms: Vec<Value> = res
        .seminorms
        .iter()
        .map(|s| json!({"p": s.p, "P": s.p_value, "Q": s.q_value, "R": s.r_value, "rho": rho(s.p)}))
        .collect();
    pretty(&json!({
        "method": res.method,
        "iterations": res.iterations,
        "final_residual": res.final_residual,
        "nonlocal_residuals": res.nonlocal_residuals,
        "seminorms": seminorms,
        "residual_history": res.residual_history,
        "initial_guess": res.initial_guess,
        "warnings": res.warnings,
    }))
}
