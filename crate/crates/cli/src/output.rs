use std::fs;
use std::path::Path;

use lqgame::control::RiccatiSolution;
use lqgame::decision::{evaluate_value, Plan, ValueBreakdown};
use lqgame::linalg::to_rows;
use lqgame::model::GameSpec;
use lqgame::simulation::{MonteCarloStats, RolloutResult};
use lqgame::Vector;
use serde_json::json;

use crate::Failure;

/// Writes `decisions.csv`, `value.csv` and `tree.json` or `policy.json`.
pub fn write_solution(
    dir: &Path,
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    plan: &Plan,
) -> Result<ValueBreakdown, Failure> {
    let path = plan.path(spec.observation_rule);
    let mut w = csv::Writer::from_path(dir.join("decisions.csv"))?;
    w.write_record(["stage", "i_d", "i_a", "h", "P_trace"])?;
    for s in &path {
        w.write_record([
            s.stage.to_string(),
            (s.decision.observe as u8).to_string(),
            (s.decision.jam as u8).to_string(),
            (s.h as u8).to_string(),
            s.p.trace().to_string(),
        ])?;
    }
    w.flush()?;

    let value = evaluate_value(spec, riccati, &path);
    let mut w = csv::Writer::from_path(dir.join("value.csv"))?;
    w.write_record(["term", "value"])?;
    for (term, v) in [
        ("initial", value.initial),
        ("noise", value.noise),
        ("estimation", value.estimation),
        ("observation", value.observation),
        ("jamming", value.jamming),
        ("total", value.total),
    ] {
        w.write_record([term, &v.to_string()])?;
    }
    w.flush()?;

    match plan {
        Plan::Tree(tree) => {
            fs::write(dir.join("tree.json"), serde_json::to_string_pretty(&tree.to_json()).expect("json"))?;
        }
        Plan::Sequence(seq) => {
            let doc = json!({
                "converged": seq.converged,
                "iterations": seq.iterations,
                "stages": seq.path.iter().map(|s| json!({
                    "stage": s.stage,
                    "i_d": s.decision.observe as u8,
                    "i_a": s.decision.jam as u8,
                    "h": s.h as u8,
                    "p": to_rows(&s.p),
                    "threshold": s.threshold,
                    "value": s.value,
                })).collect::<Vec<_>>(),
            });
            fs::write(dir.join("policy.json"), serde_json::to_string_pretty(&doc).expect("json"))?;
        }
    }
    Ok(value)
}

/// Writes `stats.csv` and `error_cov.csv` (empirical against propagated).
pub fn write_stats(
    dir: &Path,
    spec: &GameSpec,
    plan: &Plan,
    stats: &MonteCarloStats,
    analytic: f64,
) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(dir.join("stats.csv"))?;
    w.write_record(["replicates", "mean", "std_error", "analytic"])?;
    w.write_record([
        stats.replicates.to_string(),
        stats.mean.to_string(),
        stats.std_error.to_string(),
        analytic.to_string(),
    ])?;
    w.flush()?;

    let path = plan.path(spec.observation_rule);
    let mut w = csv::Writer::from_path(dir.join("error_cov.csv"))?;
    w.write_record(["stage", "row", "col", "empirical", "propagated"])?;
    for (s, emp) in path.iter().zip(&stats.error_cov) {
        for i in 0..emp.nrows() {
            for j in 0..emp.ncols() {
                w.write_record([
                    s.stage.to_string(),
                    i.to_string(),
                    j.to_string(),
                    emp[(i, j)].to_string(),
                    s.p[(i, j)].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn join(v: &Vector) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Writes `trace.csv`; vector entries are `;`-separated.
pub fn write_trace(dir: &Path, r: &RolloutResult) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(dir.join("trace.csv"))?;
    w.write_record(["stage", "x", "xhat", "ud", "ua", "id", "ia", "h", "stage_cost"])?;
    for s in &r.stages {
        w.write_record([
            s.stage.to_string(),
            join(&s.x),
            join(&s.xhat),
            join(&s.ud),
            join(&s.ua),
            (s.decision.observe as u8).to_string(),
            (s.decision.jam as u8).to_string(),
            (s.h as u8).to_string(),
            s.cost.to_string(),
        ])?;
    }
    w.write_record([
        r.stages.len().to_string(),
        join(&r.terminal_state),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        r.terminal_cost.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}
