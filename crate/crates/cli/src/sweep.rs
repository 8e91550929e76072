//! One solve per parameter value. A sweep value replaces the config's base
//! value of that parameter (the stage-0 entry and every stage equal to it);
//! per-stage overrides that differ from the base are kept.

use std::path::Path;

use clap::ValueEnum;
use lqgame::control::backward_riccati;
use lqgame::decision::{self, evaluate_value, Method, PathStep};
use lqgame::model::GameSpec;
use lqgame::Matrix;
use rayon::prelude::*;

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Param {
    /// Attacker control cost `R^a` (times identity).
    #[value(name = "r_a")]
    RA,
    /// State transition `A` (times identity).
    #[value(name = "a")]
    A,
    /// Observation noise covariance (times identity).
    #[value(name = "sigma_o")]
    SigmaO,
    /// Observation cost.
    #[value(name = "o_d")]
    OD,
    /// Jamming cost.
    #[value(name = "o_a")]
    OA,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::RA => "r_a",
            Param::A => "a",
            Param::SigmaO => "sigma_o",
            Param::OD => "o_d",
            Param::OA => "o_a",
        }
    }
}

fn replace_base<T: Clone + PartialEq>(list: &mut [T], value: T) {
    let Some(base) = list.first().cloned() else { return };
    for item in list.iter_mut().filter(|x| **x == base) {
        *item = value.clone();
    }
}

/// `spec` with `param` set to `v`.
pub fn apply(spec: &GameSpec, param: Param, v: f64) -> GameSpec {
    let mut s = spec.clone();
    let scaled = |n: usize| Matrix::identity(n, n) * v;
    match param {
        Param::RA => replace_base(&mut s.r_a, scaled(spec.attacker_dim())),
        Param::A => s.a = scaled(spec.state_dim()),
        Param::SigmaO => s.sigma_o = scaled(spec.sigma_o.nrows()),
        Param::OD => replace_base(&mut s.o_d, v),
        Param::OA => replace_base(&mut s.o_a, v),
    }
    s
}

pub struct Solved {
    pub path: Vec<PathStep>,
    pub total: f64,
    pub converged: bool,
}

pub struct Row {
    pub value: f64,
    pub outcome: Result<Solved, String>,
}

impl Row {
    pub fn status(&self) -> String {
        match &self.outcome {
            Ok(s) if s.converged => "ok".into(),
            Ok(_) => "not converged".into(),
            Err(e) => e.clone(),
        }
    }
}

fn solve_point(spec: &GameSpec, method: Method, node_limit: usize) -> Result<Solved, String> {
    let violations = spec.validate();
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(format!("invalid: {}", list.join("; ")));
    }
    let riccati = backward_riccati(spec).map_err(|e| e.to_string())?;
    let plan = decision::solve(spec, &riccati, method, node_limit).map_err(|e| e.to_string())?;
    let path = plan.path(spec.observation_rule);
    let total = evaluate_value(spec, &riccati, &path).total;
    Ok(Solved { path, total, converged: plan.converged() })
}

/// Solves every point in parallel; rows come back sorted by value.
pub fn run(
    spec: &GameSpec,
    param: Param,
    values: &[f64],
    method: Method,
    node_limit: usize,
) -> Result<Vec<Row>, Failure> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Failure::usage(format!("sweep value {bad} is not finite")));
    }
    let mut rows: Vec<Row> = values
        .par_iter()
        .map(|&value| Row {
            value,
            outcome: solve_point(&apply(spec, param, value), method, node_limit),
        })
        .collect();
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(rows)
}

/// Writes the long-format `decisions.csv` and `summary.csv`.
pub fn write(dir: &Path, param: Param, rows: &[Row]) -> Result<(), Failure> {
    let mut long = csv::Writer::from_path(dir.join("decisions.csv"))?;
    long.write_record([param.name(), "stage", "i_d", "i_a", "h", "P_trace"])?;
    let mut summary = csv::Writer::from_path(dir.join("summary.csv"))?;
    summary.write_record([param.name(), "observations", "jammings", "total", "converged", "status"])?;
    for row in rows {
        let v = row.value.to_string();
        match &row.outcome {
            Ok(s) => {
                for p in &s.path {
                    long.write_record([
                        v.clone(),
                        p.stage.to_string(),
                        (p.decision.observe as u8).to_string(),
                        (p.decision.jam as u8).to_string(),
                        (p.h as u8).to_string(),
                        p.p.trace().to_string(),
                    ])?;
                }
                let obs = s.path.iter().filter(|p| p.decision.observe).count();
                let jam = s.path.iter().filter(|p| p.decision.jam).count();
                summary.write_record([
                    v,
                    obs.to_string(),
                    jam.to_string(),
                    s.total.to_string(),
                    s.converged.to_string(),
                    row.status(),
                ])?;
            }
            Err(_) => {
                summary.write_record([v, String::new(), String::new(), String::new(), String::new(), row.status()])?;
            }
        }
    }
    long.flush()?;
    summary.flush()?;
    Ok(())
}
