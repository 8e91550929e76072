//! TOML configuration files.
//!
//! Matrices are row-major nested arrays (`A = [[0.9]]`); a bare number is a
//! 1×1 matrix. Per-stage fields take one base value plus an optional override
//! table keyed by stage index (`Ra_overrides = { 29 = 10.0 }`).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Deserialize;
use toml::{Spanned, Value};

use super::{
    Decision, GameSpec, InfoStructure, InitialState, ObservationRule, SaddleCheck, Violation,
};
use crate::error::ConfigError;
use crate::linalg::to_rows;
use crate::{Matrix, Vector};

type Field = Option<Spanned<Value>>;

#[allow(non_snake_case)]
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    horizon: Field,
    info_structure: Field,
    saddle_check: Field,
    observation_rule: Field,
    A: Field,
    Bd: Field,
    Ba: Field,
    C: Field,
    D: Field,
    E: Field,
    sigma_s: Field,
    sigma_o: Field,
    x0: Field,
    x0_mean: Field,
    x0_cov: Field,
    Q: Field,
    Q_N: Field,
    Rd: Field,
    Ra: Field,
    Od: Field,
    Oa: Field,
    Q_overrides: Field,
    Rd_overrides: Field,
    Ra_overrides: Field,
    Od_overrides: Field,
    Oa_overrides: Field,
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn line_col(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
        (line, column)
    }

    fn field_err(&self, field: &str, v: &Spanned<Value>, message: impl Into<String>) -> ConfigError {
        ConfigError::Field {
            field: field.to_string(),
            line: self.line_col(v.span().start).0,
            message: message.into(),
        }
    }

    fn require<'v>(&self, field: &'static str, v: &'v Field) -> Result<&'v Spanned<Value>, ConfigError> {
        v.as_ref().ok_or(ConfigError::MissingField(field))
    }

    fn number(&self, field: &str, v: &Spanned<Value>) -> Result<f64, ConfigError> {
        as_number(v.get_ref()).ok_or_else(|| self.field_err(field, v, "expected a number"))
    }

    fn matrix(&self, field: &str, v: &Spanned<Value>) -> Result<Matrix, ConfigError> {
        value_to_matrix(v.get_ref()).map_err(|m| self.field_err(field, v, m))
    }

    fn vector(&self, field: &str, v: &Spanned<Value>) -> Result<Vector, ConfigError> {
        match v.get_ref() {
            Value::Array(items) => items
                .iter()
                .map(|x| as_number(x).ok_or_else(|| self.field_err(field, v, "vector entries must be numbers")))
                .collect::<Result<Vec<_>, _>>()
                .map(Vector::from_vec),
            other => as_number(other)
                .map(|x| Vector::from_element(1, x))
                .ok_or_else(|| self.field_err(field, v, "expected a number or an array of numbers")),
        }
    }

    fn keyword<T: for<'de> Deserialize<'de>>(&self, field: &str, v: &Spanned<Value>) -> Result<T, ConfigError> {
        v.get_ref()
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| self.field_err(field, v, e.message().to_string()))
    }

    fn overrides<T>(
        &self,
        field: &str,
        v: &Field,
        horizon: usize,
        mut parse: impl FnMut(&Value) -> Result<T, String>,
    ) -> Result<Vec<(usize, T)>, ConfigError> {
        let Some(v) = v else { return Ok(Vec::new()) };
        let Value::Table(table) = v.get_ref() else {
            return Err(self.field_err(field, v, "expected an inline table `{ stage = value }`"));
        };
        let mut out = Vec::new();
        for (key, item) in table {
            let stage: usize = key
                .parse()
                .map_err(|_| self.field_err(field, v, format!("stage key `{key}` is not a non-negative integer")))?;
            if stage >= horizon {
                return Err(self.field_err(field, v, format!("stage {stage} outside 0..{horizon}")));
            }
            let value = parse(item).map_err(|m| self.field_err(field, v, format!("stage {stage}: {m}")))?;
            out.push((stage, value));
        }
        Ok(out)
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn value_to_matrix(v: &Value) -> Result<Matrix, String> {
    if let Some(x) = as_number(v) {
        return Ok(Matrix::from_element(1, 1, x));
    }
    let Value::Array(rows) = v else {
        return Err("expected a number or a nested array of rows".into());
    };
    let mut data = Vec::new();
    let mut ncols = None;
    for row in rows {
        let Value::Array(row) = row else {
            return Err("matrix rows must be arrays, e.g. [[1.0, 0.0], [0.0, 1.0]]".into());
        };
        if *ncols.get_or_insert(row.len()) != row.len() {
            return Err("matrix rows have different lengths".into());
        }
        for x in row {
            data.push(as_number(x).ok_or("matrix entries must be numbers")?);
        }
    }
    Ok(Matrix::from_row_slice(rows.len(), ncols.unwrap_or(0), &data))
}

fn check_dims(spec: &GameSpec) -> Result<(), ConfigError> {
    let mismatch = |first: &str, second: &str, detail: String| ConfigError::DimensionMismatch {
        first: first.into(),
        second: second.into(),
        detail,
    };
    let dims = |m: &Matrix| format!("{}x{}", m.nrows(), m.ncols());
    let q = spec.a.nrows();
    if spec.a.ncols() != q {
        return Err(mismatch("A", "A", format!("A must be square, got {}", dims(&spec.a))));
    }
    for (name, m) in [("Bd", &spec.b_d), ("Ba", &spec.b_a), ("C", &spec.c)] {
        if m.nrows() != q {
            return Err(mismatch(name, "A", format!("{name} is {} but A is {}", dims(m), dims(&spec.a))));
        }
    }
    if spec.d.ncols() != q {
        return Err(mismatch("D", "A", format!("D is {} but A is {}", dims(&spec.d), dims(&spec.a))));
    }
    if spec.e.nrows() != spec.d.nrows() {
        return Err(mismatch("E", "D", format!("E is {} but D is {}", dims(&spec.e), dims(&spec.d))));
    }
    let square = |name: &str, m: &Matrix, other: &str, n: usize| {
        if m.nrows() != n || m.ncols() != n {
            Err(mismatch(name, other, format!("{name} is {} but must be {n}x{n}", dims(m))))
        } else {
            Ok(())
        }
    };
    square("sigma_s", &spec.sigma_s, "C", spec.c.ncols())?;
    square("sigma_o", &spec.sigma_o, "E", spec.e.ncols())?;
    square("Q_N", &spec.q_terminal, "A", q)?;
    for (n, m) in spec.q.iter().enumerate() {
        square(&format!("Q[{n}]"), m, "A", q)?;
    }
    for (n, m) in spec.r_d.iter().enumerate() {
        square(&format!("Rd[{n}]"), m, "Bd", spec.b_d.ncols())?;
    }
    for (n, m) in spec.r_a.iter().enumerate() {
        square(&format!("Ra[{n}]"), m, "Ba", spec.b_a.ncols())?;
    }
    match &spec.initial_state {
        InitialState::Known(x) if x.len() != q => {
            Err(mismatch("x0", "A", format!("x0 has length {} but A is {}", x.len(), dims(&spec.a))))
        }
        InitialState::Gaussian { mean, .. } if mean.len() != q => Err(mismatch(
            "x0_mean",
            "A",
            format!("x0_mean has length {} but A is {}", mean.len(), dims(&spec.a)),
        )),
        InitialState::Gaussian { cov, .. } => square("x0_cov", cov, "A", q),
        _ => Ok(()),
    }
}

/// Parses and validates a configuration file.
pub fn parse_spec(text: &str) -> Result<GameSpec, ConfigError> {
    let ctx = Ctx { text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| ctx.line_col(s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;

    let horizon_v = ctx.require("horizon", &raw.horizon)?;
    let horizon = match horizon_v.get_ref() {
        Value::Integer(n) if *n >= 1 => *n as usize,
        _ => return Err(ctx.field_err("horizon", horizon_v, "expected a positive integer")),
    };

    let matrix = |name: &'static str, v: &Field| ctx.matrix(name, ctx.require(name, v)?);
    let a = matrix("A", &raw.A)?;
    let b_d = matrix("Bd", &raw.Bd)?;
    let b_a = matrix("Ba", &raw.Ba)?;
    let c = matrix("C", &raw.C)?;
    let d = matrix("D", &raw.D)?;
    let e = matrix("E", &raw.E)?;
    let sigma_s = matrix("sigma_s", &raw.sigma_s)?;
    let sigma_o = matrix("sigma_o", &raw.sigma_o)?;
    let q_terminal = matrix("Q_N", &raw.Q_N)?;
    let q_base = matrix("Q", &raw.Q)?;
    let rd_base = matrix("Rd", &raw.Rd)?;
    let ra_base = matrix("Ra", &raw.Ra)?;

    let initial_state = match (&raw.x0, &raw.x0_mean, &raw.x0_cov) {
        (Some(x0), None, None) => InitialState::Known(ctx.vector("x0", x0)?),
        (None, Some(mean), Some(cov)) => InitialState::Gaussian {
            mean: ctx.vector("x0_mean", mean)?,
            cov: ctx.matrix("x0_cov", cov)?,
        },
        (None, None, None) => return Err(ConfigError::MissingField("x0_mean")),
        (None, Some(_), None) => return Err(ConfigError::MissingField("x0_cov")),
        (None, None, Some(_)) => return Err(ConfigError::MissingField("x0_mean")),
        (Some(x0), _, _) => {
            return Err(ctx.field_err("x0", x0, "give either x0 (known state) or x0_mean/x0_cov, not both"))
        }
    };

    let stage_matrices = |name: &str, base: Matrix, ov: &Field| -> Result<Vec<Matrix>, ConfigError> {
        let mut list = vec![base; horizon];
        for (n, m) in ctx.overrides(&format!("{name}_overrides"), ov, horizon, value_to_matrix)? {
            list[n] = m;
        }
        Ok(list)
    };
    let stage_scalars = |name: &'static str, v: &Field, ov: &Field| -> Result<Vec<f64>, ConfigError> {
        let base = ctx.number(name, ctx.require(name, v)?)?;
        let mut list = vec![base; horizon];
        let parse = |x: &Value| as_number(x).ok_or_else(|| "expected a number".to_string());
        for (n, x) in ctx.overrides(&format!("{name}_overrides"), ov, horizon, parse)? {
            list[n] = x;
        }
        Ok(list)
    };

    let info_structure = match &raw.info_structure {
        Some(v) => ctx.keyword::<InfoStructure>("info_structure", v)?,
        None => InfoStructure::default(),
    };
    let saddle_check = match &raw.saddle_check {
        Some(v) => ctx.keyword::<SaddleCheck>("saddle_check", v)?,
        None => SaddleCheck::default(),
    };
    let observation_rule = match &raw.observation_rule {
        None => ObservationRule::default(),
        Some(v) => {
            let m = ctx.matrix("observation_rule", v)?;
            if m.shape() != (2, 2) || m.iter().any(|x| *x != 0.0 && *x != 1.0) {
                return Err(ctx.field_err(
                    "observation_rule",
                    v,
                    "expected a 2x2 table of 0/1 indexed [i_d][i_a]",
                ));
            }
            ObservationRule::from_table([
                [m[(0, 0)] == 1.0, m[(0, 1)] == 1.0],
                [m[(1, 0)] == 1.0, m[(1, 1)] == 1.0],
            ])
        }
    };

    let spec = GameSpec {
        horizon,
        a,
        b_d,
        b_a,
        c,
        d,
        e,
        sigma_s,
        sigma_o,
        initial_state,
        q: stage_matrices("Q", q_base, &raw.Q_overrides)?,
        q_terminal,
        r_d: stage_matrices("Rd", rd_base, &raw.Rd_overrides)?,
        r_a: stage_matrices("Ra", ra_base, &raw.Ra_overrides)?,
        o_d: stage_scalars("Od", &raw.Od, &raw.Od_overrides)?,
        o_a: stage_scalars("Oa", &raw.Oa, &raw.Oa_overrides)?,
        info_structure,
        observation_rule,
        saddle_check,
    };
    check_dims(&spec)?;
    let violations: Vec<Violation> = spec.validate();
    if !violations.is_empty() {
        return Err(ConfigError::Invalid(violations));
    }
    Ok(spec)
}

fn fmt_f64(x: f64) -> String {
    // Debug prints the shortest representation that parses back exactly.
    format!("{x:?}")
}

fn fmt_matrix(m: &Matrix) -> String {
    let rows: Vec<String> = to_rows(m)
        .iter()
        .map(|r| format!("[{}]", r.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}

fn fmt_vector(v: &Vector) -> String {
    format!("[{}]", v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", "))
}

fn write_stage_list<T: PartialEq>(out: &mut String, name: &str, list: &[T], fmt: impl Fn(&T) -> String) {
    let Some(base) = list.first() else { return };
    let _ = writeln!(out, "{name} = {}", fmt(base));
    let overrides: BTreeMap<usize, String> = list
        .iter()
        .enumerate()
        .filter(|(_, v)| *v != base)
        .map(|(n, v)| (n, fmt(v)))
        .collect();
    if !overrides.is_empty() {
        let body: Vec<String> = overrides.iter().map(|(n, v)| format!("{n} = {v}")).collect();
        let _ = writeln!(out, "{name}_overrides = {{ {} }}", body.join(", "));
    }
}

/// Writes a configuration that [`parse_spec`] reads back to an identical spec.
pub fn to_config_string(spec: &GameSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "horizon = {}", spec.horizon);
    let _ = writeln!(out, "info_structure = \"{}\"", spec.info_structure.as_str());
    let _ = writeln!(out, "saddle_check = \"{}\"", spec.saddle_check.as_str());
    if !spec.observation_rule.is_jam_blocks() {
        let t = spec.observation_rule.table();
        let _ = writeln!(
            out,
            "observation_rule = [[{}, {}], [{}, {}]]",
            t[0][0] as u8, t[0][1] as u8, t[1][0] as u8, t[1][1] as u8
        );
    }
    for (name, m) in [
        ("A", &spec.a),
        ("Bd", &spec.b_d),
        ("Ba", &spec.b_a),
        ("C", &spec.c),
        ("D", &spec.d),
        ("E", &spec.e),
        ("sigma_s", &spec.sigma_s),
        ("sigma_o", &spec.sigma_o),
    ] {
        let _ = writeln!(out, "{name} = {}", fmt_matrix(m));
    }
    match &spec.initial_state {
        InitialState::Known(x) => {
            let _ = writeln!(out, "x0 = {}", fmt_vector(x));
        }
        InitialState::Gaussian { mean, cov } => {
            let _ = writeln!(out, "x0_mean = {}", fmt_vector(mean));
            let _ = writeln!(out, "x0_cov = {}", fmt_matrix(cov));
        }
    }
    write_stage_list(&mut out, "Q", &spec.q, fmt_matrix);
    let _ = writeln!(out, "Q_N = {}", fmt_matrix(&spec.q_terminal));
    write_stage_list(&mut out, "Rd", &spec.r_d, fmt_matrix);
    write_stage_list(&mut out, "Ra", &spec.r_a, fmt_matrix);
    write_stage_list(&mut out, "Od", &spec.o_d, |x| fmt_f64(*x));
    write_stage_list(&mut out, "Oa", &spec.o_a, |x| fmt_f64(*x));
    out
}

/// Parses a decision sequence written as `"10 10 11 00"` (pairs `i_d i_a`).
pub fn parse_decisions(text: &str) -> Option<Vec<Decision>> {
    text.split_whitespace()
        .map(|tok| match tok {
            "00" => Some(Decision::IDLE),
            "10" => Some(Decision::OBSERVE),
            "11" => Some(Decision::OBSERVE_JAMMED),
            "01" => Some(Decision::JAM_ONLY),
            _ => None,
        })
        .collect()
}
