//! Built-in parameterized systems.
//!
//! Each entry bundles a Hamiltonian, its invariant set, suggested probe
//! points and, where the system separates, a [`SeparableChart`].

use crate::action_angle::{DegreeChart, SeparableChart};
use crate::algebra::InvariantSet;
use crate::expr::{parse, EvalPoint, Expr};
use crate::symplectic::{SymplecticError, SymplecticStructure};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown system `{0}`; run `list` to see the catalog")]
    UnknownSystem(String),
    #[error("system `{system}` has no parameter `{param}`")]
    UnknownParam { system: String, param: String },
    #[error("invalid value for `{param}`: {reason}")]
    InvalidParam { param: String, reason: String },
    #[error(transparent)]
    Symplectic(#[from] SymplecticError),
}

/// Whether a parameter takes one number or a list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamShape {
    Scalar,
    Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub shape: ParamShape,
    pub default: Vec<f64>,
    pub description: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: Vec<ParamSpec>,
}

/// Parameter overrides by name; scalars are one-element lists.
pub type SystemParams = BTreeMap<String, Vec<f64>>;

/// A fully bound system.
#[derive(Debug, Clone)]
pub struct SystemDefinition {
    pub name: String,
    pub hamiltonian: Expr,
    pub invariants: InvariantSet,
    /// Whether closure may need constant (central) bracket terms.
    pub allow_central: bool,
    /// Members that are deliberately not conserved by the Hamiltonian.
    pub non_invariant: Vec<String>,
    pub probes: Vec<EvalPoint>,
    pub seed: Option<u64>,
    pub chart: Option<SeparableChart>,
    /// Level values suggested for the chart.
    pub chart_h: Option<Vec<f64>>,
}

impl SystemDefinition {
    pub fn structure(&self) -> &SymplecticStructure {
        self.invariants.structure()
    }

    pub fn n(&self) -> usize {
        self.invariants.n()
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        self.invariants.params()
    }

    /// Largest `|{H, F}|` over probes and members not flagged as controls.
    pub fn invariance_residual(&self) -> Result<f64, crate::expr::EvalError> {
        let s = self.structure();
        let mut worst = 0.0f64;
        for (name, f) in self.invariants.names().iter().zip(self.invariants.members()) {
            if self.non_invariant.contains(name) {
                continue;
            }
            let b = s.poisson_bracket(&self.hamiltonian, f);
            for u in &self.probes {
                worst = worst.max(b.evaluate(u)?.abs());
            }
        }
        Ok(worst)
    }

    /// Direct product of two systems on `T*R^(n+m)`, with Hamiltonian
    /// `H_a + H_b`. Charts and suggested seeds are dropped.
    pub fn product(&self, other: &SystemDefinition) -> SystemDefinition {
        let n = self.n();
        let invariants = self.invariants.product(&other.invariants);
        let probes = self
            .probes
            .iter()
            .zip(other.probes.iter().cycle())
            .map(|(a, b)| EvalPoint {
                q: a.q.iter().chain(&b.q).copied().collect(),
                p: a.p.iter().chain(&b.p).copied().collect(),
                params: invariants.params().clone(),
            })
            .collect();
        let rename = |names: &[String], list: &[String], suffix: &str| -> Vec<String> {
            list.iter()
                .map(|x| {
                    if names.contains(&format!("{x}{suffix}")) && !names.contains(x) {
                        format!("{x}{suffix}")
                    } else {
                        x.clone()
                    }
                })
                .collect()
        };
        let names = invariants.names().to_vec();
        let mut non_invariant = rename(&names, &self.non_invariant, "_1");
        non_invariant.extend(rename(&names, &other.non_invariant, "_2"));
        SystemDefinition {
            name: format!("{}*{}", self.name, other.name),
            hamiltonian: (self.hamiltonian.clone() + other.hamiltonian.shift_indices(n)).simplify(),
            invariants,
            allow_central: self.allow_central || other.allow_central,
            non_invariant,
            probes,
            seed: None,
            chart: None,
            chart_h: None,
        }
    }
}

fn param(name: &'static str, shape: ParamShape, default: &[f64], description: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        shape,
        default: default.to_vec(),
        description,
    }
}

/// Catalog entries with their parameter schemas, in a fixed order.
pub fn list_systems() -> Vec<SystemInfo> {
    use ParamShape::*;
    vec![
        SystemInfo {
            name: "oscillator",
            summary: "n identical harmonic oscillators, H = sum (p_j^2 + omega^2 q_j^2)/2",
            params: vec![
                param("n", Scalar, &[1.0], "degrees of freedom"),
                param("omega", Scalar, &[1.0], "frequency"),
            ],
        },
        SystemInfo {
            name: "uncoupled_oscillators",
            summary: "oscillators with individual frequencies, invariants E_j",
            params: vec![param("omega", Vector, &[1.0, 2.0], "frequencies, one per degree")],
        },
        SystemInfo {
            name: "quartic",
            summary: "quartic oscillator H = p^2/2 + q^4/4",
            params: vec![],
        },
        SystemInfo {
            name: "three_particles",
            summary: "three particles on a line with pair potential g/r^2; H1, dilation H2, momentum H3",
            params: vec![
                param("g", Scalar, &[1.0], "coupling"),
                param("m", Vector, &[1.0, 1.0, 1.0], "masses"),
            ],
        },
        SystemInfo {
            name: "vortices",
            summary: "n point vortices on the plane with invariants P1, P2, P, H",
            params: vec![param("xi", Vector, &[1.0, 1.0, -2.0], "vortex strengths (nonzero)")],
        },
        SystemInfo {
            name: "vortices3",
            summary: "three point vortices, strengths (1, 1, -2) by default",
            params: vec![param("xi", Vector, &[1.0, 1.0, -2.0], "three vortex strengths (nonzero)")],
        },
        SystemInfo {
            name: "central_field",
            summary: "point in R^3 with potential k r^2/2 and angular momenta P1, P2, P3",
            params: vec![param("k", Scalar, &[1.0], "stiffness (positive)")],
        },
    ]
}

/// Bind parameters against the schema of `name`.
fn bind(name: &str, params: &SystemParams) -> Result<BTreeMap<&'static str, Vec<f64>>, CatalogError> {
    let info = list_systems()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| CatalogError::UnknownSystem(name.to_string()))?;
    for key in params.keys() {
        if !info.params.iter().any(|p| p.name == key) {
            return Err(CatalogError::UnknownParam {
                system: name.to_string(),
                param: key.clone(),
            });
        }
    }
    let mut bound = BTreeMap::new();
    for p in info.params {
        let value = params.get(p.name).cloned().unwrap_or(p.default);
        if value.iter().any(|v| !v.is_finite()) {
            return Err(invalid(p.name, "values must be finite"));
        }
        if p.shape == ParamShape::Scalar && value.len() != 1 {
            return Err(invalid(p.name, "expected a single number"));
        }
        if value.is_empty() {
            return Err(invalid(p.name, "expected at least one value"));
        }
        bound.insert(p.name, value);
    }
    Ok(bound)
}

fn invalid(param: &str, reason: impl Into<String>) -> CatalogError {
    CatalogError::InvalidParam {
        param: param.to_string(),
        reason: reason.into(),
    }
}

fn expr(text: &str, n: usize) -> Expr {
    parse(text, n).expect("catalog expressions are well-formed")
}

fn point(q: Vec<f64>, p: Vec<f64>, params: &BTreeMap<String, f64>) -> EvalPoint {
    EvalPoint {
        q,
        p,
        params: params.clone(),
    }
}

/// Deterministic spread of `count` probe points in `n` degrees.
fn spread_probes(n: usize, count: usize, scale: f64, params: &BTreeMap<String, f64>) -> Vec<EvalPoint> {
    (0..count)
        .map(|c| {
            let phase = 0.7 * c as f64 + 0.3;
            let q = (0..n)
                .map(|j| scale * (1.0 + 0.15 * j as f64) * (phase + 2.0 * PI * j as f64 / n as f64).cos())
                .collect();
            let p = (0..n)
                .map(|j| scale * (0.8 - 0.1 * j as f64) * (1.3 * phase + 2.0 * PI * j as f64 / n as f64).sin())
                .collect();
            point(q, p, params)
        })
        .collect()
}

fn oscillator_chart(omega: &[f64]) -> SeparableChart {
    let degrees = omega
        .iter()
        .enumerate()
        .map(|(j, w)| {
            let residual = expr(&format!("w^2 + {}*lam^2 - 2*h{}", w * w, j + 1), 0);
            DegreeChart::turning(residual, -1e3, 1e3)
        })
        .collect();
    SeparableChart::new(omega.len(), degrees).expect("oscillator chart is valid")
}

fn oscillators(name: &str, omega: &[f64], single: bool) -> Result<SystemDefinition, CatalogError> {
    if omega.iter().any(|w| *w <= 0.0) {
        return Err(invalid("omega", "frequencies must be positive"));
    }
    let n = omega.len();
    let s = SymplecticStructure::canonical(n);
    let energy = |j: usize| expr(&format!("(p{j}^2 + {}*q{j}^2)/2", omega[j - 1] * omega[j - 1]), n);
    let hamiltonian = Expr::sum((1..=n).map(energy)).simplify();
    let members = if single {
        vec![("H".to_string(), hamiltonian.clone())]
    } else {
        (1..=n).map(|j| (format!("E{j}"), energy(j))).collect()
    };
    let invariants = InvariantSet::new(s, members).expect("oscillator invariants are valid");
    let probes = spread_probes(n, 4, 0.8, &BTreeMap::new());
    let chart_h: Vec<f64> = if single { vec![0.5] } else { (1..=n).map(|j| 0.4 + 0.1 * j as f64).collect() };
    Ok(SystemDefinition {
        name: name.to_string(),
        hamiltonian,
        invariants,
        allow_central: false,
        non_invariant: vec![],
        probes,
        seed: None,
        chart: Some(oscillator_chart(omega)),
        chart_h: Some(chart_h),
    })
}

fn vortices(name: &str, xi: &[f64]) -> Result<SystemDefinition, CatalogError> {
    if xi.len() < 2 {
        return Err(invalid("xi", "need at least two vortices"));
    }
    if let Some(j) = xi.iter().position(|x| *x == 0.0) {
        return Err(invalid("xi", format!("strength xi_{} is zero", j + 1)));
    }
    let n = xi.len();
    let s = SymplecticStructure::new(xi.to_vec())?;
    let p1 = Expr::sum((1..=n).map(|j| xi[j - 1] * Expr::q(j))).simplify();
    let p2 = Expr::sum((1..=n).map(|j| xi[j - 1] * Expr::p(j))).simplify();
    let p = Expr::sum((1..=n).map(|j| (0.5 * xi[j - 1]) * (Expr::q(j).powi(2) + Expr::p(j).powi(2)))).simplify();
    let mut terms = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            let d2 = (Expr::q(i) - Expr::q(j)).powi(2) + (Expr::p(i) - Expr::p(j)).powi(2);
            terms.push((xi[i - 1] * xi[j - 1]) * d2.ln());
        }
    }
    // -(1/2π) Σ ξ_i ξ_j ln|z_i - z_j|, written with squared distances
    let h = (Expr::Const(-1.0 / (4.0 * PI)) * Expr::sum(terms)).simplify();
    let invariants = InvariantSet::new(
        s,
        vec![
            ("P1".into(), p1),
            ("P2".into(), p2),
            ("P".into(), p),
            ("H".into(), h.clone()),
        ],
    )
    .expect("vortex invariants are valid");
    let probes = spread_probes(n, 6, 1.0, &BTreeMap::new());
    Ok(SystemDefinition {
        name: name.to_string(),
        hamiltonian: h,
        invariants,
        allow_central: xi.iter().sum::<f64>().abs() > 1e-12,
        non_invariant: vec![],
        probes,
        seed: None,
        chart: None,
        chart_h: None,
    })
}

fn three_particles(g: f64, m: &[f64]) -> Result<SystemDefinition, CatalogError> {
    if m.len() != 3 {
        return Err(invalid("m", "expected three masses"));
    }
    if m.iter().any(|x| *x <= 0.0) {
        return Err(invalid("m", "masses must be positive"));
    }
    let s = SymplecticStructure::canonical(3);
    let kinetic = (1..=3).map(|j| format!("p{j}^2/{}", 2.0 * m[j - 1])).collect::<Vec<_>>().join(" + ");
    let h1 = expr(&format!("{kinetic} + g/(q1-q2)^2 + g/(q1-q3)^2 + g/(q2-q3)^2"), 3).simplify();
    let params: BTreeMap<String, f64> = [("g".to_string(), g)].into_iter().collect();
    let invariants = InvariantSet::new(
        s,
        vec![
            ("H1".into(), h1.clone()),
            ("H2".into(), expr("q1*p1 + q2*p2 + q3*p3", 3)),
            ("H3".into(), expr("p1 + p2 + p3", 3)),
        ],
    )
    .expect("particle invariants are valid")
    .with_params(params.clone());
    let probes = vec![
        point(vec![-1.0, 0.2, 1.5], vec![0.3, -0.1, 0.4], &params),
        point(vec![-2.0, -0.5, 0.9], vec![0.0, 0.5, -0.2], &params),
        point(vec![0.1, 1.1, 2.4], vec![-0.6, 0.2, 0.1], &params),
        point(vec![-1.7, 0.6, 1.2], vec![0.25, 0.35, -0.45], &params),
    ];
    Ok(SystemDefinition {
        name: "three_particles".into(),
        hamiltonian: h1,
        invariants,
        allow_central: false,
        non_invariant: vec!["H2".into()],
        probes,
        seed: None,
        chart: None,
        chart_h: None,
    })
}

fn central_field(k: f64) -> Result<SystemDefinition, CatalogError> {
    if k <= 0.0 {
        return Err(invalid("k", "stiffness must be positive"));
    }
    let s = SymplecticStructure::canonical(3);
    let h = expr(&format!("(p1^2 + p2^2 + p3^2)/2 + {k}*(q1^2 + q2^2 + q3^2)/2"), 3).simplify();
    let invariants = InvariantSet::new(
        s,
        vec![
            ("H".into(), h.clone()),
            ("P1".into(), expr("p2*q3 - p3*q2", 3)),
            ("P2".into(), expr("p3*q1 - p1*q3", 3)),
            ("P3".into(), expr("p1*q2 - p2*q1", 3)),
        ],
    )
    .expect("central field invariants are valid");
    Ok(SystemDefinition {
        name: "central_field".into(),
        hamiltonian: h,
        invariants,
        allow_central: false,
        non_invariant: vec![],
        probes: spread_probes(3, 6, 1.0, &BTreeMap::new()),
        seed: None,
        chart: None,
        chart_h: None,
    })
}

fn quartic() -> SystemDefinition {
    let h = expr("p1^2/2 + q1^4/4", 1);
    let invariants =
        InvariantSet::new(SymplecticStructure::canonical(1), vec![("H".into(), h.clone())]).expect("valid");
    let chart = SeparableChart::new(1, vec![DegreeChart::turning(expr("w^2/2 + lam^4/4 - h1", 0), -1e3, 1e3)])
        .expect("quartic chart is valid");
    SystemDefinition {
        name: "quartic".into(),
        hamiltonian: h,
        invariants,
        allow_central: false,
        non_invariant: vec![],
        probes: spread_probes(1, 4, 1.0, &BTreeMap::new()),
        seed: None,
        chart: Some(chart),
        chart_h: Some(vec![1.0]),
    }
}

/// Look up `name` and bind `params` over the defaults.
pub fn get_system(name: &str, params: &SystemParams) -> Result<SystemDefinition, CatalogError> {
    let b = bind(name, params)?;
    let scalar = |key: &str| b[key][0];
    match name {
        "oscillator" => {
            let n = scalar("n");
            if n < 1.0 || n.fract() != 0.0 || n > 64.0 {
                return Err(invalid("n", "expected an integer between 1 and 64"));
            }
            let omega = vec![scalar("omega"); n as usize];
            oscillators(name, &omega, n == 1.0)
        }
        "uncoupled_oscillators" => oscillators(name, &b["omega"], false),
        "quartic" => Ok(quartic()),
        "three_particles" => three_particles(scalar("g"), &b["m"]),
        "vortices" => vortices(name, &b["xi"]),
        "vortices3" => {
            if b["xi"].len() != 3 {
                return Err(invalid("xi", "vortices3 takes exactly three strengths"));
            }
            vortices(name, &b["xi"])
        }
        "central_field" => central_field(scalar("k")),
        _ => Err(CatalogError::UnknownSystem(name.to_string())),
    }
}
