//! Machine-readable reports for the command-line front end.
//!
//! Each `*_report` function runs library operations on a
//! [`SystemDefinition`] and packages the outcome as JSON. The front end
//! only parses arguments and prints.

use crate::action_angle::{
    action_variable, fit_spectral_curve, frequency_matrix, picard_fuchs_residual, turning_points, ActionError,
};
use crate::algebra::structure::derived_series_dimensions;
use crate::algebra::{
    algebra_rank, cartan_basis_at, check_closure, dual_abelian_pointwise, fit_structure_constants,
    functional_independence, is_solvable, mishchenko_fomenko_check, search_polynomial_completion, AlgebraError,
    CartanBasis, CompletionOptions, LevelSearch, RegularElement,
};
use crate::catalog::{get_system, CatalogError, SystemDefinition, SystemParams};
use crate::expr::{EvalPoint, Expr};
use crate::flows::{conservation_report, integrate, FlowError, IntegratorConfig, Termination};
use crate::sampling::SeedStream;
use crate::sysfile::{load_system_file, write_system_file, SysFileError};
use crate::verification::{run_all, CriterionResult};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const TOOL: &str = "liouville";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Closure and bracket tolerances used by the reports.
const CLOSURE_TOL: f64 = 1e-8;
const SAMPLES: usize = 24;
const PROBES: usize = 12;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    SysFile(#[from] SysFileError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Eval(#[from] crate::expr::EvalError),
    #[error("{0}")]
    Usage(String),
}

fn usage(msg: impl Into<String>) -> ReportError {
    ReportError::Usage(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// SHA-256 of the command, its arguments and the system definition.
    pub inputs_digest: String,
    pub seed: u64,
    pub system: Option<String>,
    pub results: Value,
    pub warnings: Vec<String>,
    /// False when the analysis reached a negative verdict (for example a
    /// failed Mishchenko–Fomenko condition).
    pub verdict: bool,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Result of one command before it is wrapped in an [`AnalysisReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub results: Value,
    pub warnings: Vec<String>,
    pub verdict: bool,
}

impl Outcome {
    fn new(results: Value) -> Self {
        Outcome {
            results,
            warnings: Vec::new(),
            verdict: true,
        }
    }

    /// Wrap with provenance. `args` are the canonical command arguments.
    pub fn into_report(self, command: &str, args: &[String], system: Option<&SystemDefinition>, seed: u64) -> AnalysisReport {
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        for a in args {
            hasher.update([0u8]);
            hasher.update(a.as_bytes());
        }
        if let Some(def) = system {
            hasher.update([0u8]);
            hasher.update(write_system_file(def).as_bytes());
        }
        let inputs_digest = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        AnalysisReport {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            inputs_digest,
            seed,
            system: system.map(|d| d.name.clone()),
            results: self.results,
            warnings: self.warnings,
            verdict: self.verdict,
        }
    }
}

/// `catalog:<name>` or a path to a system file.
pub fn resolve_system(source: &str, params: &SystemParams) -> Result<SystemDefinition, ReportError> {
    match source.strip_prefix("catalog:") {
        Some(name) => Ok(get_system(name, params)?),
        None => {
            if !params.is_empty() {
                return Err(usage("--param only applies to catalog:<name> systems"));
            }
            Ok(load_system_file(source)?)
        }
    }
}

fn seeds_for(def: &SystemDefinition, seeds: &SeedStream) -> SeedStream {
    match def.seed {
        Some(s) => SeedStream::new(s),
        None => *seeds,
    }
}

fn sampled(def: &SystemDefinition, seeds: &SeedStream) -> Result<Vec<EvalPoint>, ReportError> {
    Ok(def.invariants.sample_points(seeds, "report_probes", PROBES)?)
}

fn named_vectors(def: &SystemDefinition, vectors: &[Vec<f64>]) -> Value {
    let names = def.invariants.names();
    vectors
        .iter()
        .map(|v| {
            let coefficients: serde_json::Map<String, Value> =
                names.iter().zip(v).map(|(n, c)| (n.clone(), json!(c))).collect();
            json!({
                "coefficients": coefficients,
                "expression": def.invariants.combination(v).to_string(),
            })
        })
        .collect()
}

/// Closure, structure constants, solvability and independence.
pub fn analyze_report(def: &SystemDefinition, seeds: &SeedStream) -> Result<Outcome, ReportError> {
    let seeds = seeds_for(def, seeds);
    let inv = &def.invariants;
    let sc = fit_structure_constants(inv, SAMPLES, def.allow_central, &seeds)?;
    let closes = check_closure(&sc, CLOSURE_TOL);
    let probes = sampled(def, &seeds)?;
    let independent = functional_independence(inv, &probes)?;
    let s = def.structure();
    let mut commutes = serde_json::Map::new();
    for (name, f) in inv.names().iter().zip(inv.members()) {
        let b = s.poisson_bracket(&def.hamiltonian, f);
        let mut worst = 0.0f64;
        for u in &probes {
            worst = worst.max(b.evaluate(u)?.abs());
        }
        commutes.insert(name.clone(), json!(worst));
    }
    let mut relations = Vec::new();
    let names = inv.names();
    for i in 0..sc.k {
        for j in (i + 1)..sc.k {
            let mut terms = Vec::new();
            if sc.c0[i][j].abs() > CLOSURE_TOL {
                terms.push(format!("{}", round_coefficient(sc.c0[i][j])));
            }
            for (s_idx, name) in names.iter().enumerate() {
                let c = sc.c[s_idx][i][j];
                if c.abs() > CLOSURE_TOL {
                    let c = round_coefficient(c);
                    terms.push(match c {
                        1.0 => name.clone(),
                        -1.0 => format!("-{name}"),
                        _ => format!("{c}*{name}"),
                    });
                }
            }
            let rhs = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
            relations.push(format!("{{{}, {}}} = {}", names[i], names[j], rhs));
        }
    }
    let mut out = Outcome::new(json!({
        "closes": closes,
        "closure_residual": sc.residual,
        "solvable": is_solvable(&sc),
        "derived_series": derived_series_dimensions(&sc),
        "jacobi_defect": sc.jacobi_defect(),
        "central_terms": sc.has_central_terms(CLOSURE_TOL),
        "relations": relations,
        "structure_constants": sc,
        "functionally_independent": independent,
        "bracket_with_hamiltonian": commutes,
        "non_invariant": def.non_invariant,
    }));
    out.warnings.extend(sc.warnings.iter().cloned());
    if !independent {
        out.warnings.push("invariants are functionally dependent at some probe".into());
    }
    out.verdict = closes;
    Ok(out)
}

/// Round to 12 significant digits for readable relation strings.
fn round_coefficient(c: f64) -> f64 {
    format!("{c:.12e}").parse().unwrap_or(c)
}

pub fn rank_report(def: &SystemDefinition, seeds: &SeedStream) -> Result<Outcome, ReportError> {
    let seeds = seeds_for(def, seeds);
    let probes = sampled(def, &seeds)?;
    let rep = algebra_rank(&def.invariants, &probes)?;
    let mut out = Outcome::new(serde_json::to_value(&rep).expect("serializable"));
    if !rep.constant_rank {
        out.warnings.push("bracket-matrix rank varies across probes".into());
    }
    Ok(out)
}

/// Regular element from `h` (located on the level set, starting at the
/// first probe) or from the first probe itself.
fn regular_element(def: &SystemDefinition, h: Option<Vec<f64>>, seeds: &SeedStream) -> Result<RegularElement, ReportError> {
    let start = match def.probes.first() {
        Some(u) => u.clone(),
        None => sampled(def, seeds)?.remove(0),
    };
    match h {
        Some(h) => {
            if h.len() != def.invariants.k() {
                return Err(usage(format!("--h needs {} values, got {}", def.invariants.k(), h.len())));
            }
            Ok(RegularElement::locate(&def.invariants, h, &start, &LevelSearch::default())?)
        }
        None => Ok(RegularElement::at_point(&def.invariants, &start)?),
    }
}

fn cartan_json(def: &SystemDefinition, h: &RegularElement, cartan: &CartanBasis) -> Result<Value, ReportError> {
    Ok(json!({
        "h": h.h,
        "witness": h.witness,
        "witness_residual": h.witness_residual(&def.invariants)?,
        "dimension": cartan.r(),
        "generic_dimension": cartan.generic_dimension,
        "residual": cartan.residual,
        "basis": named_vectors(def, &cartan.vectors),
    }))
}

pub fn cartan_report(def: &SystemDefinition, h: Option<Vec<f64>>, seeds: &SeedStream) -> Result<Outcome, ReportError> {
    let seeds = seeds_for(def, seeds);
    let element = regular_element(def, h, &seeds)?;
    let cartan = cartan_basis_at(&def.invariants, &element, &seeds)?;
    Ok(Outcome::new(cartan_json(def, &element, &cartan)?))
}

pub fn mf_report(def: &SystemDefinition, seeds: &SeedStream) -> Result<Outcome, ReportError> {
    let seeds = seeds_for(def, seeds);
    let probes = sampled(def, &seeds)?;
    let rep = mishchenko_fomenko_check(&def.invariants, &probes)?;
    let mut out = Outcome::new(serde_json::to_value(&rep).expect("serializable"));
    out.verdict = rep.holds;
    if !rep.holds {
        out.warnings.push(format!(
            "dim G + rank G = {} + {} differs from dim M = {}",
            rep.dim_g, rep.rank_g, rep.dim_m
        ));
    }
    Ok(out)
}

pub fn completion_report(
    def: &SystemDefinition,
    degree: usize,
    generators: Option<Vec<String>>,
    h: Option<Vec<f64>>,
    seeds: &SeedStream,
) -> Result<Outcome, ReportError> {
    let seeds = seeds_for(def, seeds);
    let inv = &def.invariants;
    let element = regular_element(def, h, &seeds)?;
    let cartan = cartan_basis_at(inv, &element, &seeds)?;
    let mut options = CompletionOptions::new(degree);
    if let Some(names) = generators {
        let indices = names
            .iter()
            .map(|n| inv.index_of(n).ok_or_else(|| usage(format!("unknown generator `{n}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        options = options.with_generators(indices);
    }
    let candidates = search_polynomial_completion(inv, &cartan, &options, &seeds)?;
    let listed: Vec<Value> = candidates
        .iter()
        .map(|c| {
            json!({
                "description": c.description,
                "expression": c.expr.to_string(),
                "generators": c.generators,
                "monomials": c.monomials,
                "coefficients": c.coefficients,
                "max_bracket": c.max_bracket,
            })
        })
        .collect();
    let mut out = Outcome::new(json!({
        "degree": degree,
        "cartan": cartan_json(def, &element, &cartan)?,
        "candidates": listed,
    }));
    match dual_abelian_pointwise(inv, &cartan, &element) {
        Ok(dual) => {
            out.results["dual_abelian"] = json!({
                "complement": named_vectors(def, &dual.complement),
                "max_bracket": dual.max_bracket,
            });
        }
        Err(e) => out.warnings.push(format!("no pointwise dual abelian completion: {e}")),
    }
    Ok(out)
}

/// Integration settings for [`simulate_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub t: f64,
    pub from: Option<EvalPoint>,
    pub tol: f64,
    pub step: Option<f64>,
    pub collision_guard: bool,
}

/// Integrate the Hamiltonian flow; also returns the trajectory as CSV.
pub fn simulate_report(def: &SystemDefinition, opts: &SimulateOptions) -> Result<(Outcome, String), ReportError> {
    let u0 = match &opts.from {
        Some(u) => {
            if u.q.len() != def.n() {
                return Err(usage(format!("--from needs {} q and {} p values", def.n(), def.n())));
            }
            EvalPoint {
                params: def.params().clone(),
                ..u.clone()
            }
        }
        None => def
            .probes
            .first()
            .cloned()
            .ok_or_else(|| usage("the system has no probe points; pass --from"))?,
    };
    let mut cfg = match opts.step {
        Some(step) => IntegratorConfig::fixed(step),
        None => IntegratorConfig::adaptive(opts.tol),
    };
    if opts.collision_guard {
        cfg = cfg.with_collision_guard();
    }
    let traj = integrate(&def.hamiltonian, def.structure(), &u0, opts.t, &cfg)?;
    let drift = conservation_report(&traj, &def.invariants);
    let mut out = Outcome::new(json!({
        "initial_state": u0.state(),
        "t_end": opts.t,
        "termination": format!("{:?}", traj.termination),
        "final_time": traj.final_time(),
        "final_state": traj.final_state(),
        "samples": traj.len(),
        "drift": drift,
    }));
    if traj.termination != Termination::Completed {
        out.verdict = false;
        out.warnings.push(format!(
            "integration stopped at t = {} ({:?})",
            traj.final_time(),
            traj.termination
        ));
    }
    Ok((out, traj.to_csv()))
}

/// Probe grid for the Picard–Fuchs check: three points inside each
/// degree's allowed interval, combined over degrees (capped at 81).
fn pf_probes(intervals: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let mut probes = vec![Vec::new()];
    for &(lo, hi) in intervals {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let pts = [mid - 0.5 * half, mid + 0.1 * half, mid + 0.6 * half];
        probes = probes
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                pts.iter().map(move |x| {
                    let mut v = p.clone();
                    v.push(*x);
                    v
                })
            })
            .take(81)
            .collect();
    }
    probes
}

/// Actions, turning points, frequencies and the Picard–Fuchs residual.
/// With `curve = Some(j)` also tabulates degree `j`'s quadratic spectral
/// curve and returns it as CSV.
pub fn actions_report(
    def: &SystemDefinition,
    h: Option<Vec<f64>>,
    curve: Option<usize>,
) -> Result<(Outcome, Option<String>), ReportError> {
    let chart = def.chart.as_ref().ok_or_else(|| usage("the system has no [chart] section"))?;
    let h = h
        .or_else(|| def.chart_h.clone())
        .ok_or_else(|| usage("pass --h or set `h` in [chart]"))?;
    let n = chart.n();
    let mut degrees = Vec::with_capacity(n);
    let mut intervals = Vec::with_capacity(n);
    for j in 1..=n {
        let (lo, hi) = turning_points(chart, j, &h)?;
        intervals.push((lo, hi));
        degrees.push(json!({
            "degree": j,
            "turning_points": [lo, hi],
            "gamma": action_variable(chart, j, &h)?,
        }));
    }
    let mut out = Outcome::new(json!({ "h": h, "degrees": degrees }));
    if chart.k == n {
        match frequency_matrix(chart, &h) {
            Ok(s) => {
                out.results["gamma"] = json!(s.gamma);
                out.results["jacobian"] = json!(s.jacobian);
                out.results["omega"] = json!(s.omega);
                out.results["condition"] = json!(s.condition);
                out.results["periods"] = json!(s.periods());
            }
            Err(e) => out.warnings.push(format!("frequency matrix unavailable: {e}")),
        }
    } else {
        out.warnings.push(format!("frequency matrix needs k = n (k = {}, n = {n})", chart.k));
    }
    if n >= 2 {
        let rep = picard_fuchs_residual(chart, &h, &pf_probes(&intervals))?;
        out.results["picard_fuchs"] = serde_json::to_value(&rep).expect("serializable");
    }
    let csv = match curve {
        Some(j) => {
            let (lo, hi) = *intervals.get(j.wrapping_sub(1)).ok_or(ActionError::DegreeIndex(j))?;
            let lams: Vec<f64> = (0..=20).map(|i| lo + (hi - lo) * (0.025 + 0.95 * i as f64 / 20.0)).collect();
            let fit = fit_spectral_curve(chart, j, 2, &lams, &h)?;
            out.results["spectral_curve"] = json!({ "degree": j, "max_root_error": fit.max_root_error });
            let mut buf = Vec::new();
            fit.write_csv(&mut buf).expect("writing to memory");
            Some(String::from_utf8(buf).expect("CSV is UTF-8"))
        }
        None => None,
    };
    Ok((out, csv))
}

pub fn verify_report(seeds: &SeedStream) -> (Outcome, Vec<CriterionResult>) {
    let results = run_all(seeds);
    let passed = results.iter().filter(|r| r.passed).count();
    let mut out = Outcome::new(json!({
        "passed": passed,
        "failed": results.len() - passed,
        "criteria": results,
    }));
    out.verdict = passed == results.len();
    (out, results)
}

/// Parse `q1, .., qn | p1, .., pn`.
pub fn parse_point(text: &str) -> Result<EvalPoint, ReportError> {
    let (q, p) = text
        .split_once('|')
        .ok_or_else(|| usage("a point is written `q1,..,qn|p1,..,pn`"))?;
    let nums = |s: &str| -> Result<Vec<f64>, ReportError> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| usage(format!("`{}` is not a number", x.trim()))))
            .collect()
    };
    let (q, p) = (nums(q)?, nums(p)?);
    if q.len() != p.len() {
        return Err(usage("a point needs as many p values as q values"));
    }
    Ok(EvalPoint::new(q, p))
}

/// Symbolic bracket `{a, b}` of two members, for quick inspection.
pub fn bracket_of(def: &SystemDefinition, a: &str, b: &str) -> Result<Expr, ReportError> {
    let get = |n: &str| def.invariants.member(n).ok_or_else(|| usage(format!("unknown invariant `{n}`")));
    Ok(def.structure().poisson_bracket(get(a)?, get(b)?).simplify())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog(name: &str) -> SystemDefinition {
        resolve_system(&format!("catalog:{name}"), &SystemParams::new()).unwrap()
    }

    #[test]
    fn analyze_vortices() {
        let out = analyze_report(&catalog("vortices3"), &SeedStream::default()).unwrap();
        assert_eq!(out.results["closes"], json!(true));
        assert!(out.results["closure_residual"].as_f64().unwrap() < 1e-9);
        assert_eq!(out.results["solvable"], json!(true));
        assert!(out.verdict);
    }

    #[test]
    fn reports_are_deterministic() {
        let def = catalog("central_field");
        let run = || {
            completion_report(&def, 2, None, None, &SeedStream::new(7))
                .unwrap()
                .into_report("complete", &["--degree".into(), "2".into()], Some(&def), 7)
                .to_json()
        };
        assert_eq!(run(), run());
        let other = completion_report(&def, 2, None, None, &SeedStream::new(7))
            .unwrap()
            .into_report("complete", &["--degree".into(), "1".into()], Some(&def), 7);
        assert!(!run().contains(&other.inputs_digest));
    }

    #[test]
    fn mf_negative_verdict() {
        let params: SystemParams = [("xi".to_string(), vec![1.0, 1.0, 1.0, -3.0])].into_iter().collect();
        let def = resolve_system("catalog:vortices", &params).unwrap();
        let out = mf_report(&def, &SeedStream::default()).unwrap();
        assert!(!out.verdict);
        assert_eq!(out.results["holds"], json!(false));
    }

    #[test]
    fn oscillator_actions() {
        let (out, csv) = actions_report(&catalog("oscillator"), Some(vec![0.5]), Some(1)).unwrap();
        let gamma = out.results["degrees"][0]["gamma"].as_f64().unwrap();
        assert!((gamma - 0.5).abs() < 1e-8);
        assert!(csv.unwrap().starts_with("lam,c1,c2\n"));
        let (out, _) = actions_report(&catalog("uncoupled_oscillators"), None, None).unwrap();
        assert!(out.results["picard_fuchs"]["residual"].as_f64().unwrap() < 1e-8);
    }

    #[test]
    fn simulate_and_points() {
        let def = catalog("oscillator");
        let opts = SimulateOptions {
            t: 1.0,
            from: Some(parse_point("1 | 0").unwrap()),
            tol: 1e-10,
            step: None,
            collision_guard: false,
        };
        let (out, csv) = simulate_report(&def, &opts).unwrap();
        assert_eq!(out.results["termination"], json!("Completed"));
        assert!(csv.starts_with("t,q1,p1\n"));
        assert!(parse_point("1, 2 | 3").is_err());
        let b = bracket_of(&catalog("central_field"), "P1", "P2").unwrap();
        let p3 = crate::expr::parse("p1*q2 - p2*q1", 3).unwrap();
        assert!(crate::expr::numerically_equivalent(&b, &p3, 20, 1e-12).unwrap());
    }
}
