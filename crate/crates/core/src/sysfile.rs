//! Line-oriented system files.
//!
//! ```text
//! # three point vortices
//! [system]
//! name = vortices3
//! n = 3
//! weights = 1, 1, -2
//! hamiltonian = H
//!
//! [invariants]
//! P1 = q1 + q2 - 2*q3
//! ...
//!
//! [chart]
//! degree.1 = w^2 + lam^2 - 2*h1
//! bracket.1 = -10, 10
//! h = 0.5
//!
//! [probes]
//! point = 1, 0.5, -0.3 | 0.2, 0.1, 0.4
//! seed = 7
//! ```
//!
//! `hamiltonian` names an invariant or is an expression. Omitted weights
//! mean the canonical structure. Parameters are bound with `param.<name>`
//! in `[system]`.

use crate::action_angle::{ActionError, Cycle, DegreeChart, SeparableChart};
use crate::algebra::InvariantSet;
use crate::catalog::SystemDefinition;
use crate::expr::{parse, EvalPoint, Expr, ParseError};
use crate::symplectic::SymplecticStructure;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SysFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}, column {column}: {source}")]
    Expression {
        line: usize,
        column: usize,
        source: ParseError,
    },
    #[error("line {line}: parameter `{name}` is not bound; add `param.{name} = <value>` to [system]")]
    Unbound { line: usize, name: String },
    #[error("missing `{key}` in [{section}]")]
    Missing { section: &'static str, key: &'static str },
    #[error("line {line}: {source}")]
    Chart { line: usize, source: ActionError },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn syntax(line: usize, message: impl Into<String>) -> SysFileError {
    SysFileError::Syntax {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    System,
    Invariants,
    Chart,
    Probes,
}

#[derive(Default)]
struct ChartEntry {
    residual: Option<(usize, String)>,
    bracket: Option<(f64, f64)>,
    branch: f64,
}

fn numbers(line: usize, text: &str) -> Result<Vec<f64>, SysFileError> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| syntax(line, format!("`{t}` is not a number")))
        })
        .collect()
}

fn number(line: usize, text: &str) -> Result<f64, SysFileError> {
    match numbers(line, text)?.as_slice() {
        [x] => Ok(*x),
        _ => Err(syntax(line, "expected a single number")),
    }
}

fn index_key(line: usize, key: &str, prefix: &str) -> Result<Option<usize>, SysFileError> {
    match key.strip_prefix(prefix) {
        Some(rest) => rest
            .parse::<usize>()
            .ok()
            .filter(|j| *j >= 1)
            .map(Some)
            .ok_or_else(|| syntax(line, format!("`{key}` needs a positive degree index"))),
        None => Ok(None),
    }
}

/// Parse an expression, reporting positions relative to the file.
/// `offset` is the 0-based column of the value within its line.
fn expression(line: usize, offset: usize, text: &str, n: usize) -> Result<Expr, SysFileError> {
    parse(text, n).map_err(|e| SysFileError::Expression {
        line,
        column: offset + e.column(),
        source: e,
    })
}

pub fn load_system_file(path: impl AsRef<Path>) -> Result<SystemDefinition, SysFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SysFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_system_file(&text)
}

pub fn parse_system_file(text: &str) -> Result<SystemDefinition, SysFileError> {
    let mut section = None;
    let mut name = None;
    let mut n = None;
    let mut weights = None;
    let mut hamiltonian = None;
    let mut params = BTreeMap::new();
    let mut allow_central = false;
    let mut non_invariant = Vec::new();
    let mut seed = None;
    let mut invariants: Vec<(usize, usize, String, String)> = Vec::new();
    let mut chart: BTreeMap<usize, ChartEntry> = BTreeMap::new();
    let mut chart_k = None;
    let mut chart_h = None;
    let mut points: Vec<(usize, String)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(inner) = trimmed.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| syntax(line, "unterminated section header"))?;
            section = Some(match inner.trim() {
                "system" => Section::System,
                "invariants" => Section::Invariants,
                "chart" => Section::Chart,
                "probes" => Section::Probes,
                other => return Err(syntax(line, format!("unknown section [{other}]"))),
            });
            continue;
        }
        let eq = content
            .find('=')
            .ok_or_else(|| syntax(line, "expected `key = value`"))?;
        let key = content[..eq].trim();
        let value_raw = &content[eq + 1..];
        let value = value_raw.trim();
        let value_offset = content[..eq + 1].chars().count() + (value_raw.chars().count() - value_raw.trim_start().chars().count());
        if key.is_empty() {
            return Err(syntax(line, "empty key"));
        }
        match section {
            None => return Err(syntax(line, "entry before the first section header")),
            Some(Section::System) => match key {
                "name" => name = Some(value.to_string()),
                "n" => {
                    let v = number(line, value)?;
                    if v < 1.0 || v.fract() != 0.0 {
                        return Err(syntax(line, "n must be a positive integer"));
                    }
                    n = Some(v as usize);
                }
                "weights" => weights = Some((line, numbers(line, value)?)),
                "hamiltonian" => hamiltonian = Some((line, value_offset, value.to_string())),
                "allow_central" => {
                    allow_central = match value {
                        "true" => true,
                        "false" => false,
                        _ => return Err(syntax(line, "allow_central must be true or false")),
                    }
                }
                "non_invariant" => {
                    non_invariant = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                }
                "seed" => seed = Some(parse_seed(line, value)?),
                _ => match key.strip_prefix("param.") {
                    Some(p) if !p.is_empty() => {
                        params.insert(p.to_string(), number(line, value)?);
                    }
                    _ => return Err(syntax(line, format!("unknown key `{key}` in [system]"))),
                },
            },
            Some(Section::Invariants) => {
                if invariants.iter().any(|(_, _, k, _)| k == key) {
                    return Err(syntax(line, format!("invariant `{key}` defined twice")));
                }
                invariants.push((line, value_offset, key.to_string(), value.to_string()));
            }
            Some(Section::Chart) => {
                if key == "k" {
                    chart_k = Some(number(line, value)? as usize);
                } else if key == "h" {
                    chart_h = Some(numbers(line, value)?);
                } else if let Some(j) = index_key(line, key, "degree.")? {
                    chart.entry(j).or_default().residual = Some((line, value.to_string()));
                } else if let Some(j) = index_key(line, key, "bracket.")? {
                    match numbers(line, value)?.as_slice() {
                        [a, b] if a < b => chart.entry(j).or_default().bracket = Some((*a, *b)),
                        _ => return Err(syntax(line, "bracket needs two increasing numbers")),
                    }
                } else if let Some(j) = index_key(line, key, "branch.")? {
                    chart.entry(j).or_default().branch = number(line, value)?;
                } else {
                    return Err(syntax(line, format!("unknown key `{key}` in [chart]")));
                }
            }
            Some(Section::Probes) => match key {
                "point" => points.push((line, value.to_string())),
                "seed" => seed = Some(parse_seed(line, value)?),
                _ => return Err(syntax(line, format!("unknown key `{key}` in [probes]"))),
            },
        }
    }

    let n = n.ok_or(SysFileError::Missing {
        section: "system",
        key: "n",
    })?;
    let structure = match weights {
        Some((line, w)) => {
            if w.len() != n {
                return Err(syntax(line, format!("expected {n} weights, got {}", w.len())));
            }
            SymplecticStructure::new(w).map_err(|e| syntax(line, e.to_string()))?
        }
        None => SymplecticStructure::canonical(n),
    };
    if invariants.is_empty() {
        return Err(SysFileError::Missing {
            section: "invariants",
            key: "<name> = <expression>",
        });
    }
    let check_bound = |line: usize, e: &Expr| -> Result<(), SysFileError> {
        match e.parameters().into_iter().find(|p| !params.contains_key(p)) {
            Some(name) => Err(SysFileError::Unbound { line, name }),
            None => Ok(()),
        }
    };
    let mut members = Vec::with_capacity(invariants.len());
    for (line, offset, key, value) in &invariants {
        let e = expression(*line, *offset, value, n)?;
        check_bound(*line, &e)?;
        members.push((key.clone(), e));
    }
    let hamiltonian = match hamiltonian {
        Some((line, offset, text)) => match members.iter().find(|(k, _)| *k == text) {
            Some((_, e)) => e.clone(),
            None => {
                let e = expression(line, offset, &text, n)?;
                check_bound(line, &e)?;
                e
            }
        },
        None => members
            .iter()
            .find(|(k, _)| k == "H")
            .map(|(_, e)| e.clone())
            .ok_or(SysFileError::Missing {
                section: "system",
                key: "hamiltonian",
            })?,
    };
    for flagged in &non_invariant {
        if !members.iter().any(|(k, _)| k == flagged) {
            return Err(syntax(0, format!("non_invariant names unknown invariant `{flagged}`")));
        }
    }
    let invariants = InvariantSet::new(structure, members)
        .map_err(|e| syntax(0, e.to_string()))?
        .with_params(params.clone());

    let chart = if chart.is_empty() {
        None
    } else {
        let count = chart.len();
        let mut degrees = Vec::with_capacity(count);
        let mut lines = Vec::with_capacity(count);
        for j in 1..=count {
            let entry = chart.remove(&j).ok_or_else(|| syntax(0, format!("chart degrees must be numbered 1..{count}")))?;
            let (line, residual) = entry.residual.ok_or_else(|| syntax(0, format!("chart degree {j} has no `degree.{j}` residual")))?;
            let (a, b) = entry.bracket.ok_or_else(|| syntax(line, format!("chart degree {j} has no `bracket.{j}`")))?;
            let e = parse(&residual, 0).map_err(|source| match source {
                ParseError::IndexOutOfRange { .. } => syntax(line, "chart residuals must not contain phase-space variables"),
                source => SysFileError::Expression {
                    line,
                    column: source.column(),
                    source,
                },
            })?;
            let branch = if entry.branch == 0.0 { 1.0 } else { entry.branch };
            degrees.push(DegreeChart::new(e, Cycle::Turning { a, b }, branch));
            lines.push(line);
        }
        let k = chart_k.unwrap_or(invariants.k());
        Some(SeparableChart::with_params(k, degrees, params.clone()).map_err(|source| {
            let line = match &source {
                ActionError::UnknownSymbol { degree, .. } | ActionError::PhaseVariable { degree } => lines[degree - 1],
                _ => 0,
            };
            SysFileError::Chart { line, source }
        })?)
    };

    let mut probes = Vec::with_capacity(points.len());
    for (line, value) in points {
        let (q, p) = value
            .split_once('|')
            .ok_or_else(|| syntax(line, "a point is `q1, .., qn | p1, .., pn`"))?;
        let (q, p) = (numbers(line, q)?, numbers(line, p)?);
        if q.len() != n || p.len() != n {
            return Err(syntax(line, format!("a point needs {n} q and {n} p values")));
        }
        probes.push(EvalPoint {
            q,
            p,
            params: params.clone(),
        });
    }

    Ok(SystemDefinition {
        name: name.unwrap_or_else(|| "unnamed".into()),
        hamiltonian,
        invariants,
        allow_central,
        non_invariant,
        probes,
        seed,
        chart,
        chart_h,
    })
}

fn parse_seed(line: usize, value: &str) -> Result<u64, SysFileError> {
    value.parse().map_err(|_| syntax(line, "seed must be a non-negative integer"))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
}

/// Render a definition in the system-file format.
pub fn write_system_file(def: &SystemDefinition) -> String {
    let mut out = String::new();
    let inv = &def.invariants;
    let _ = writeln!(out, "[system]");
    let _ = writeln!(out, "name = {}", def.name);
    let _ = writeln!(out, "n = {}", def.n());
    if !def.structure().is_canonical() {
        let _ = writeln!(out, "weights = {}", join(def.structure().weights()));
    }
    match inv.names().iter().zip(inv.members()).find(|(_, e)| **e == def.hamiltonian) {
        Some((name, _)) => {
            let _ = writeln!(out, "hamiltonian = {name}");
        }
        None => {
            let _ = writeln!(out, "hamiltonian = {}", def.hamiltonian);
        }
    }
    for (k, v) in inv.params() {
        let _ = writeln!(out, "param.{k} = {v:?}");
    }
    if def.allow_central {
        let _ = writeln!(out, "allow_central = true");
    }
    if !def.non_invariant.is_empty() {
        let _ = writeln!(out, "non_invariant = {}", def.non_invariant.join(", "));
    }
    let _ = writeln!(out, "\n[invariants]");
    for (name, e) in inv.names().iter().zip(inv.members()) {
        let _ = writeln!(out, "{name} = {e}");
    }
    if let Some(chart) = &def.chart {
        let _ = writeln!(out, "\n[chart]");
        if chart.k != inv.k() {
            let _ = writeln!(out, "k = {}", chart.k);
        }
        for (j, d) in chart.degrees.iter().enumerate() {
            let _ = writeln!(out, "degree.{} = {}", j + 1, d.residual);
            if let Cycle::Turning { a, b } = d.cycle {
                let _ = writeln!(out, "bracket.{} = {a:?}, {b:?}", j + 1);
            }
            if d.branch < 0.0 {
                let _ = writeln!(out, "branch.{} = -1", j + 1);
            }
        }
        if let Some(h) = &def.chart_h {
            let _ = writeln!(out, "h = {}", join(h));
        }
    }
    if !def.probes.is_empty() || def.seed.is_some() {
        let _ = writeln!(out, "\n[probes]");
        for u in &def.probes {
            let _ = writeln!(out, "point = {} | {}", join(&u.q), join(&u.p));
        }
        if let Some(seed) = def.seed {
            let _ = writeln!(out, "seed = {seed}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{get_system, list_systems, SystemParams};

    const OSCILLATOR: &str = "\
# one degree of freedom
[system]
name = oscillator
n = 1
hamiltonian = H

[invariants]
H = (p1^2 + q1^2)/2

[chart]
degree.1 = w^2 + lam^2 - 2*h1
bracket.1 = -10, 10
h = 0.5
";

    #[test]
    fn loads_minimal_file() {
        let def = parse_system_file(OSCILLATOR).unwrap();
        assert_eq!(def.n(), 1);
        assert!(def.structure().is_canonical());
        assert_eq!(def.chart_h, Some(vec![0.5]));
        let chart = def.chart.unwrap();
        assert_eq!(chart.k, 1);
        let g = crate::action_angle::action_variable(&chart, 1, &[0.5]).unwrap();
        assert!((g - 0.5).abs() < 1e-8);
    }

    #[test]
    fn catalog_round_trip() {
        for info in list_systems() {
            let def = get_system(info.name, &SystemParams::new()).unwrap();
            let text = write_system_file(&def);
            let back = parse_system_file(&text).unwrap_or_else(|e| panic!("{}: {e}\n{text}", info.name));
            assert_eq!(back.invariants.names(), def.invariants.names());
            assert_eq!(back.structure().weights(), def.structure().weights());
            assert_eq!(back.non_invariant, def.non_invariant);
            assert_eq!(back.probes.len(), def.probes.len());
            for u in &def.probes {
                let a = def.invariants.values_at(u).unwrap();
                let b = back.invariants.values_at(u).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() <= 1e-14 * (1.0 + x.abs()), "{}: {x} vs {y}", info.name);
                }
                let (x, y) = (def.hamiltonian.evaluate(u).unwrap(), back.hamiltonian.evaluate(u).unwrap());
                assert!((x - y).abs() <= 1e-14 * (1.0 + x.abs()));
            }
            assert_eq!(back.chart.is_some(), def.chart.is_some());
        }
    }

    #[test]
    fn out_of_range_variable_reports_location() {
        let text = "[system]\nn = 3\n[invariants]\nH = p1^2 + q7\n";
        match parse_system_file(text) {
            Err(SysFileError::Expression { line, column, .. }) => {
                assert_eq!(line, 4);
                assert_eq!(column, 12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbound_parameter() {
        let text = "[system]\nn = 1\n[invariants]\nH = p1^2 + g*q1^2\n";
        assert!(matches!(parse_system_file(text), Err(SysFileError::Unbound { line: 4, .. })));
        let bound = "[system]\nn = 1\nparam.g = 2\n[invariants]\nH = p1^2 + g*q1^2\n";
        assert_eq!(parse_system_file(bound).unwrap().params()["g"], 2.0);
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let cases = [
            ("n = 1\n", 1),
            ("[system]\nn = 1\n[invariants]\nH\n", 4),
            ("[system]\nn = 1\n[weird]\n", 3),
            ("[system]\nn = 2\nweights = 1\n[invariants]\nH = p1\n", 3),
            ("[system]\nn = 1\n[invariants]\nH = p1\n[probes]\npoint = 1, 2 | 3\n", 6),
            ("[system]\nn = 1\n[invariants]\nH = p1\n[chart]\ndegree.1 = w^2 + q1\nbracket.1 = -1, 1\n", 6),
        ];
        for (text, want) in cases {
            match parse_system_file(text) {
                Err(SysFileError::Syntax { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(
            parse_system_file("[system]\nn = 1\n[invariants]\nE = p1\n"),
            Err(SysFileError::Missing { key: "hamiltonian", .. })
        ));
    }
}
