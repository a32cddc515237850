//! Quadratures on separable level sets: branch functions, turning points,
//! action variables, time maps, frequency matrices, and Picard–Fuchs checks.
//!
//! Degree `j` of a [`SeparableChart`] is an implicit relation
//! `R_j(lam, w; h1..hk) = 0` between its separated coordinate `lam` and
//! branch value `w`. A residual may also read `lam<m>` / `w<m>` of another
//! degree `m`; such couplings defeat separation and are what
//! [`picard_fuchs_residual`] detects.

pub mod quadrature;
mod spectral;

pub use spectral::{fit_spectral_curve, picard_fuchs_residual, PicardFuchsReport, SpectralCurveFit};

use crate::expr::{EvalError, EvalPoint, Expr};
use crate::linalg::condition_number;
use nalgebra::DMatrix;
use quadrature::integrate_doubling;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Residual magnitude accepted as a root.
pub const ROOT_TOL: f64 = 1e-10;
/// `|R(lam, 0)|` at or below this makes `w = 0` the root.
const ZERO_ROOT: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionError {
    #[error("degree {0} does not exist in the chart")]
    DegreeIndex(usize),
    #[error("expected {expected} values of h, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("residual of degree {degree} uses unknown symbol `{symbol}`")]
    UnknownSymbol { degree: usize, symbol: String },
    #[error("residual of degree {degree} must not contain phase-space variables")]
    PhaseVariable { degree: usize },
    #[error("no real root on the selected branch of degree {degree} at lam = {lam}")]
    NoRealRoot { degree: usize, lam: f64 },
    #[error("root of degree {degree} at lam = {lam} only reached |R| = {residual:e}")]
    RootAccuracy { degree: usize, lam: f64, residual: f64 },
    #[error("bracket [{a}, {b}] of degree {degree} does not enclose a classically allowed region bounded by turning points")]
    NoSignChange { degree: usize, a: f64, b: f64 },
    #[error("degree {degree} has a loop cycle; this operation needs a turning-point interval")]
    LoopCycle { degree: usize },
    #[error("endpoint lam = {lam} of degree {degree} lies outside [{lo}, {hi}]; choose an interior endpoint")]
    EndpointOutside { degree: usize, lam: f64, lo: f64, hi: f64 },
    #[error("quadrature did not converge (last change {change:e})")]
    Quadrature { change: f64 },
    #[error("∂γ/∂h is numerically singular (condition number {condition:e})")]
    SingularJacobian { condition: f64 },
    #[error("frequency matrix needs as many h values ({k}) as degrees ({n})")]
    NotSquare { n: usize, k: usize },
    #[error("need at least {needed} probes, got {got}")]
    InsufficientProbes { needed: usize, got: usize },
    #[error("fewer than {wanted} real roots at lam = {lam}")]
    TooFewRoots { wanted: usize, lam: f64 },
    #[error("spectral curves of degree {0} in w are not supported (use 1 or 2)")]
    UnsupportedCurveDegree(usize),
    #[error("coupled branches did not settle at the probe")]
    CoupledSolve,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// The real cycle of one degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cycle {
    /// Libration between two turning points inside `[a, b]`.
    Turning { a: f64, b: f64 },
    /// Closed loop given by `(lam, w)` samples, for rotation-type cycles.
    Loop { points: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeChart {
    pub residual: Expr,
    pub cycle: Cycle,
    /// `+1` or `-1`: the sign of `w` on the selected branch.
    pub branch: f64,
    #[serde(skip)]
    derivatives: Option<Box<ResidualDerivatives>>,
}

#[derive(Debug, Clone, PartialEq)]
struct ResidualDerivatives {
    w: Expr,
    h: Vec<Expr>,
}

impl DegreeChart {
    pub fn new(residual: Expr, cycle: Cycle, branch: f64) -> Self {
        DegreeChart {
            residual,
            cycle,
            branch: if branch < 0.0 { -1.0 } else { 1.0 },
            derivatives: None,
        }
    }

    pub fn turning(residual: Expr, a: f64, b: f64) -> Self {
        DegreeChart::new(residual, Cycle::Turning { a, b }, 1.0)
    }
}

/// Per-degree level relations of a separable system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableChart {
    /// Number of level values `h1..hk`.
    pub k: usize,
    pub degrees: Vec<DegreeChart>,
    /// Constants used by the residuals.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl SeparableChart {
    pub fn new(k: usize, degrees: Vec<DegreeChart>) -> Result<Self, ActionError> {
        SeparableChart::with_params(k, degrees, BTreeMap::new())
    }

    pub fn with_params(
        k: usize,
        mut degrees: Vec<DegreeChart>,
        params: BTreeMap<String, f64>,
    ) -> Result<Self, ActionError> {
        let n = degrees.len();
        for (j, d) in degrees.iter_mut().enumerate() {
            if !d.residual.variables().is_empty() {
                return Err(ActionError::PhaseVariable { degree: j + 1 });
            }
            for sym in d.residual.parameters() {
                if !symbol_allowed(&sym, j + 1, n, k) && !params.contains_key(&sym) {
                    return Err(ActionError::UnknownSymbol {
                        degree: j + 1,
                        symbol: sym,
                    });
                }
            }
            d.derivatives = Some(Box::new(ResidualDerivatives {
                w: d.residual.differentiate_param("w"),
                h: (1..=k).map(|i| d.residual.differentiate_param(&format!("h{i}"))).collect(),
            }));
        }
        Ok(SeparableChart { k, degrees, params })
    }

    /// Number of degrees `n`.
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    fn degree(&self, j: usize) -> Result<&DegreeChart, ActionError> {
        j.checked_sub(1)
            .and_then(|i| self.degrees.get(i))
            .ok_or(ActionError::DegreeIndex(j))
    }

    fn check_h(&self, h: &[f64]) -> Result<(), ActionError> {
        if h.len() == self.k {
            Ok(())
        } else {
            Err(ActionError::Dimension {
                expected: self.k,
                got: h.len(),
            })
        }
    }

    fn point(&self, lam: f64, w: f64, h: &[f64], others: &BTreeMap<String, f64>) -> EvalPoint {
        let mut params = self.params.clone();
        params.extend(others.iter().map(|(k, v)| (k.clone(), *v)));
        params.insert("lam".into(), lam);
        params.insert("w".into(), w);
        for (i, v) in h.iter().enumerate() {
            params.insert(format!("h{}", i + 1), *v);
        }
        EvalPoint {
            q: Vec::new(),
            p: Vec::new(),
            params,
        }
    }

    /// `R_j(lam, w; h)` with other degrees' coordinates taken from `others`.
    pub fn residual(
        &self,
        j: usize,
        lam: f64,
        w: f64,
        h: &[f64],
        others: &BTreeMap<String, f64>,
    ) -> Result<f64, ActionError> {
        Ok(self.degree(j)?.residual.evaluate(&self.point(lam, w, h, others))?)
    }

    /// Whether degree `j`'s residual reads coordinates of other degrees.
    pub fn is_coupled(&self, j: usize) -> bool {
        self.degrees[j - 1]
            .residual
            .parameters()
            .iter()
            .any(|s| coupling_index(s).is_some())
    }
}

fn coupling_index(sym: &str) -> Option<usize> {
    let rest = sym.strip_prefix("lam").or_else(|| sym.strip_prefix('w'))?;
    rest.parse::<usize>().ok()
}

fn symbol_allowed(sym: &str, j: usize, n: usize, k: usize) -> bool {
    if sym == "lam" || sym == "w" {
        return true;
    }
    if let Some(i) = sym.strip_prefix('h').and_then(|r| r.parse::<usize>().ok()) {
        return (1..=k).contains(&i);
    }
    matches!(coupling_index(sym), Some(m) if m != j && (1..=n).contains(&m))
}

/// Root of `R_j(lam, ·; h)` on the chart's branch.
pub fn solve_branch(chart: &SeparableChart, j: usize, lam: f64, h: &[f64]) -> Result<f64, ActionError> {
    chart.check_h(h)?;
    let branch = chart.degree(j)?.branch;
    solve_branch_with(chart, j, lam, h, branch, &BTreeMap::new())
}

/// Branch root with an explicit sign and coupling context: scan outward
/// from `w = 0` for a sign change, then safeguarded Newton.
pub(crate) fn solve_branch_with(
    chart: &SeparableChart,
    j: usize,
    lam: f64,
    h: &[f64],
    sign: f64,
    others: &BTreeMap<String, f64>,
) -> Result<f64, ActionError> {
    let deg = chart.degree(j)?;
    let r = |w: f64| chart.residual(j, lam, w, h, others);
    let r0 = r(0.0)?;
    if r0.abs() <= ZERO_ROOT {
        return Ok(0.0);
    }
    // outward geometric scan on the branch side
    let mut lo = 0.0;
    let mut f_lo = r0;
    let mut hi = f64::NAN;
    let mut s = 1e-9;
    for _ in 0..140 {
        let w = sign * s;
        let f = match r(w) {
            Ok(f) => f,
            Err(_) => break,
        };
        if f == 0.0 {
            return Ok(w);
        }
        if f.signum() != f_lo.signum() {
            hi = w;
            break;
        }
        lo = w;
        f_lo = f;
        s *= 2.0;
    }
    if hi.is_nan() {
        return Err(ActionError::NoRealRoot { degree: j, lam });
    }
    let dw = deg.derivatives.as_ref().map(|d| &d.w);
    let (mut a, mut b) = (lo, hi);
    let mut fa = f_lo;
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let fx = r(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        // Newton step, falling back to bisection when it leaves the bracket
        let slope = match dw {
            Some(d) => d.evaluate(&chart.point(lam, x, h, others)).unwrap_or(0.0),
            None => 0.0,
        };
        let newton = x - fx / slope;
        let (left, right) = if a < b { (a, b) } else { (b, a) };
        x = if slope != 0.0 && newton > left && newton < right {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    let residual = r(x)?.abs();
    if residual > ROOT_TOL {
        return Err(ActionError::RootAccuracy { degree: j, lam, residual });
    }
    Ok(x)
}

fn allowed(chart: &SeparableChart, j: usize, lam: f64, h: &[f64]) -> bool {
    solve_branch(chart, j, lam, h).is_ok()
}

/// Turning points `(lam-, lam+)` of degree `j` inside its bracket.
pub fn turning_points(chart: &SeparableChart, j: usize, h: &[f64]) -> Result<(f64, f64), ActionError> {
    chart.check_h(h)?;
    let (a, b) = match chart.degree(j)?.cycle {
        Cycle::Turning { a, b } => (a, b),
        Cycle::Loop { .. } => return Err(ActionError::LoopCycle { degree: j }),
    };
    let fail = ActionError::NoSignChange { degree: j, a, b };
    if allowed(chart, j, a, h) || allowed(chart, j, b, h) {
        return Err(fail);
    }
    // an allowed interior point: the midpoint, else the best grid point
    let mut inside = None;
    let mid = 0.5 * (a + b);
    if allowed(chart, j, mid, h) {
        inside = Some(mid);
    } else {
        for i in 1..256 {
            let lam = a + (b - a) * i as f64 / 256.0;
            if allowed(chart, j, lam, h) {
                inside = Some(lam);
                break;
            }
        }
    }
    let inside = inside.ok_or(fail)?;
    let lo = refine_turning(chart, j, h, a, inside)?;
    let hi = refine_turning(chart, j, h, b, inside)?;
    Ok((lo, hi))
}

/// Bisection on real-root existence between an outside and an inside
/// point, then on `R(lam, 0) = 0`.
fn refine_turning(chart: &SeparableChart, j: usize, h: &[f64], outside: f64, inside: f64) -> Result<f64, ActionError> {
    let (mut out, mut inn) = (outside, inside);
    for _ in 0..200 {
        let m = 0.5 * (out + inn);
        if m == out || m == inn {
            break;
        }
        if allowed(chart, j, m, h) {
            inn = m;
        } else {
            out = m;
        }
    }
    let none = BTreeMap::new();
    let g = |lam: f64| chart.residual(j, lam, 0.0, h, &none);
    let (g_out, g_in) = (g(out)?, g(inn)?);
    if g_out.signum() == g_in.signum() || g_in == 0.0 {
        return Ok(inn);
    }
    let (mut x0, mut x1, mut f0) = (out, inn, g_out);
    for _ in 0..200 {
        let m = 0.5 * (x0 + x1);
        if m == x0 || m == x1 {
            break;
        }
        let fm = g(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == f0.signum() {
            x0 = m;
            f0 = fm;
        } else {
            x1 = m;
        }
    }
    Ok(x1)
}

const START_NODES: usize = 64;
const MAX_NODES: usize = 1024;
const ACTION_TOL: f64 = 1e-10;

/// `γ_j = (1/2π) ∮ w dlam`.
///
/// Libration cycles use `(1/π) ∫ |w| dlam` between the turning points with
/// `lam = m + a sin θ`; loop cycles use the trapezoid rule on the samples.
pub fn action_variable(chart: &SeparableChart, j: usize, h: &[f64]) -> Result<f64, ActionError> {
    chart.check_h(h)?;
    if let Cycle::Loop { points } = &chart.degree(j)?.cycle {
        let mut sum = 0.0;
        for i in 0..points.len() {
            let (l0, w0) = points[i];
            let (l1, w1) = points[(i + 1) % points.len()];
            sum += 0.5 * (w0 + w1) * (l1 - l0);
        }
        return Ok(sum.abs() / (2.0 * PI));
    }
    let (lo, hi) = turning_points(chart, j, h)?;
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    if half <= 0.0 {
        return Ok(0.0);
    }
    let f = |theta: f64| {
        let lam = mid + half * theta.sin();
        let w = solve_branch(chart, j, lam, h).unwrap_or(0.0);
        w.abs() * half * theta.cos()
    };
    let r = integrate_doubling(f, -FRAC_PI_2, FRAC_PI_2, START_NODES, MAX_NODES, ACTION_TOL);
    if r.change > 1e3 * ACTION_TOL {
        return Err(ActionError::Quadrature { change: r.change });
    }
    Ok(r.value / PI)
}

/// `∂w_s/∂h_i` at `lam`: central difference with step `1e-6 (1 + |h_i|)`,
/// replaced by implicit differentiation `−R_h / R_w` when a shifted branch
/// has no root or the difference quotient disagrees with its half-step
/// counterpart (a sign that the step straddles a turning point).
pub fn branch_derivative(
    chart: &SeparableChart,
    s: usize,
    i: usize,
    lam: f64,
    h: &[f64],
) -> Result<f64, ActionError> {
    chart.check_h(h)?;
    let deg = chart.degree(s)?;
    let w = solve_branch(chart, s, lam, h)?;
    let step = 1e-6 * (1.0 + h[i - 1].abs());
    let shifted = |delta: f64| {
        let mut hh = h.to_vec();
        hh[i - 1] += delta;
        solve_branch(chart, s, lam, &hh)
    };
    let fd = |d: f64| -> Option<f64> { Some((shifted(d).ok()? - shifted(-d).ok()?) / (2.0 * d)) };
    if let (Some(full), Some(half)) = (fd(step), fd(0.5 * step)) {
        if (full - half).abs() <= 1e-6 * (1.0 + full.abs()) {
            return Ok((4.0 * half - full) / 3.0);
        }
    }
    let d = deg.derivatives.as_ref().expect("charts are built through the constructor");
    let u = chart.point(lam, w, h, &BTreeMap::new());
    let rw = d.w.evaluate(&u)?;
    let rh = d.h[i - 1].evaluate(&u)?;
    Ok(-rh / rw)
}

/// Times `t_i = Σ_s ∫_{mu0_s}^{mu_s} ∂w_s/∂h_i dlam`, for `i = 1..k`,
/// normalized so that `t(mu0) = 0`.
pub fn time_map(chart: &SeparableChart, h: &[f64], mu0: &[f64], mu: &[f64]) -> Result<Vec<f64>, ActionError> {
    chart.check_h(h)?;
    let n = chart.n();
    for v in [mu0, mu] {
        if v.len() != n {
            return Err(ActionError::Dimension {
                expected: n,
                got: v.len(),
            });
        }
    }
    let mut t = vec![0.0; chart.k];
    for s in 1..=n {
        let (a, b) = (mu0[s - 1], mu[s - 1]);
        if a == b {
            continue;
        }
        let (lo, hi) = turning_points(chart, s, h)?;
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        for lam in [a, b] {
            if lam < lo - slack || lam > hi + slack {
                return Err(ActionError::EndpointOutside { degree: s, lam, lo, hi });
            }
        }
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        if half <= 0.0 {
            return Err(ActionError::EndpointOutside { degree: s, lam: b, lo, hi });
        }
        let theta = |lam: f64| ((lam - mid) / half).clamp(-1.0, 1.0).asin();
        let (th0, th1) = (theta(a), theta(b));
        for (i, ti) in t.iter_mut().enumerate() {
            let mut failure = None;
            let f = |th: f64| {
                let lam = mid + half * th.sin();
                match branch_derivative(chart, s, i + 1, lam, h) {
                    Ok(d) => d * half * th.cos(),
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            };
            let r = integrate_doubling(f, th0, th1, START_NODES, MAX_NODES, 1e-9);
            if let Some(e) = failure {
                return Err(e);
            }
            if r.change > 1e-6 {
                return Err(ActionError::Quadrature { change: r.change });
            }
            *ti += r.value;
        }
    }
    Ok(t)
}

/// Actions, the Jacobian `∂γ/∂h` and the frequency matrix
/// `Ω[s][j] = ∂h_s/∂γ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpectrum {
    pub h: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `jacobian[j][s] = ∂γ_j/∂h_s`.
    pub jacobian: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub condition: f64,
}

impl ActionSpectrum {
    /// Largest entry of `|Ω · ∂γ/∂h − I|`.
    pub fn inverse_defect(&self) -> f64 {
        let n = self.gamma.len();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let v: f64 = (0..n).map(|m| self.omega[r][m] * self.jacobian[m][c]).sum();
                worst = worst.max((v - if r == c { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    /// Periods `2π / Ω_jj` of the diagonal frequencies.
    pub fn periods(&self) -> Vec<f64> {
        (0..self.gamma.len()).map(|j| 2.0 * PI / self.omega[j][j]).collect()
    }
}

pub fn frequency_matrix(chart: &SeparableChart, h: &[f64]) -> Result<ActionSpectrum, ActionError> {
    chart.check_h(h)?;
    let n = chart.n();
    if chart.k != n {
        return Err(ActionError::NotSquare { n, k: chart.k });
    }
    let gamma: Vec<f64> = (1..=n)
        .map(|j| action_variable(chart, j, h))
        .collect::<Result<_, _>>()?;
    let mut jac = DMatrix::zeros(n, n);
    for s in 0..n {
        let step = 1e-5 * (1.0 + h[s].abs());
        let mut up = h.to_vec();
        let mut down = h.to_vec();
        up[s] += step;
        down[s] -= step;
        for j in 0..n {
            let g_up = action_variable(chart, j + 1, &up)?;
            let g_down = action_variable(chart, j + 1, &down)?;
            jac[(j, s)] = (g_up - g_down) / (2.0 * step);
        }
    }
    let condition = condition_number(&jac);
    if !condition.is_finite() || condition > 1e12 {
        return Err(ActionError::SingularJacobian { condition });
    }
    let omega = jac
        .clone()
        .try_inverse()
        .ok_or(ActionError::SingularJacobian { condition })?;
    let rows = |m: &DMatrix<f64>| crate::linalg::rows_of(m);
    Ok(ActionSpectrum {
        h: h.to_vec(),
        gamma,
        jacobian: rows(&jac),
        omega: rows(&omega),
        condition,
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::expr::parse;

    pub fn residual(text: &str) -> Expr {
        parse(text, 0).unwrap()
    }

    pub fn oscillator() -> SeparableChart {
        SeparableChart::new(1, vec![DegreeChart::turning(residual("w^2 + lam^2 - 2*h1"), -10.0, 10.0)]).unwrap()
    }

    pub fn quartic() -> SeparableChart {
        SeparableChart::new(1, vec![DegreeChart::turning(residual("w^2/2 + lam^4/4 - h1"), -10.0, 10.0)]).unwrap()
    }

    pub fn two_oscillators() -> SeparableChart {
        SeparableChart::new(
            2,
            vec![
                DegreeChart::turning(residual("w^2 + lam^2 - 2*h1"), -10.0, 10.0),
                DegreeChart::turning(residual("w^2 + 4*lam^2 - 2*h2"), -10.0, 10.0),
            ],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn branch_values() {
        let c = oscillator();
        assert!((solve_branch(&c, 1, 0.0, &[0.5]).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            solve_branch(&c, 1, 1.1, &[0.5]),
            Err(ActionError::NoRealRoot { .. })
        ));
        let q = quartic();
        let w = solve_branch(&q, 1, 0.0, &[1.0]).unwrap();
        assert!((w - 2f64.sqrt()).abs() < 1e-12);
        // bisection oracle on w^2/2 = 1
        let (mut a, mut b) = (0.0f64, 3.0f64);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if m * m / 2.0 - 1.0 < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        assert!((w - a).abs() < 1e-12);
        // negative branch
        let neg = SeparableChart::new(
            1,
            vec![DegreeChart::new(residual("w^2 + lam^2 - 2*h1"), Cycle::Turning { a: -5.0, b: 5.0 }, -1.0)],
        )
        .unwrap();
        assert!((solve_branch(&neg, 1, 0.6, &[0.5]).unwrap() + 0.8).abs() < 1e-12);
    }

    #[test]
    fn turning_point_values() {
        let (lo, hi) = turning_points(&oscillator(), 1, &[0.5]).unwrap();
        assert!((lo + 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
        let (lo, hi) = turning_points(&quartic(), 1, &[1.0]).unwrap();
        assert!((lo + 2f64.sqrt()).abs() < 1e-10 && (hi - 2f64.sqrt()).abs() < 1e-10);
        for (c, h, lam) in [(oscillator(), 0.5, hi.min(1.0)), (quartic(), 1.0, hi)] {
            let w = solve_branch(&c, 1, lam, &[h]).unwrap_or(0.0);
            assert!(w.abs() <= 1e-8, "{w}");
        }
        let (lo, hi) = turning_points(&oscillator(), 1, &[0.0]).unwrap();
        assert!(lo.abs() < 1e-6 && hi.abs() < 1e-6);
        let bad = SeparableChart::new(1, vec![DegreeChart::turning(residual("w^2 + lam^2 - 2*h1"), -0.5, 0.5)]).unwrap();
        assert!(matches!(turning_points(&bad, 1, &[0.5]), Err(ActionError::NoSignChange { .. })));
    }

    #[test]
    fn actions() {
        for e in [0.1, 0.5, 1.7] {
            let g = action_variable(&oscillator(), 1, &[e]).unwrap();
            assert!((g - e).abs() < 1e-8, "{g} vs {e}");
        }
        let c = two_oscillators();
        let g2 = action_variable(&c, 2, &[0.3, 1.2]).unwrap();
        assert!((g2 - 0.6).abs() < 1e-8);
        assert_eq!(action_variable(&oscillator(), 1, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn loop_cycle_action() {
        // circle of radius 1 sampled as a loop: area π, action 1/2
        let pts: Vec<(f64, f64)> = (0..2000)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / 2000.0;
                (t.cos(), -t.sin())
            })
            .collect();
        let c = SeparableChart::new(
            1,
            vec![DegreeChart::new(residual("w^2 + lam^2 - 2*h1"), Cycle::Loop { points: pts }, 1.0)],
        )
        .unwrap();
        assert!((action_variable(&c, 1, &[0.5]).unwrap() - 0.5).abs() < 1e-5);
        assert!(matches!(turning_points(&c, 1, &[0.5]), Err(ActionError::LoopCycle { .. })));
    }

    #[test]
    fn oscillator_times() {
        let c = oscillator();
        let h = [0.5];
        for lam in [0.2, 0.7, -0.9] {
            let t = time_map(&c, &h, &[0.0], &[lam]).unwrap()[0];
            assert!((t - (lam / (2.0 * h[0]).sqrt()).asin()).abs() < 1e-6, "{lam}: {t}");
        }
        let (lo, hi) = turning_points(&c, 1, &h).unwrap();
        let half = time_map(&c, &h, &[lo], &[hi]).unwrap()[0];
        assert!((half - PI).abs() < 1e-6, "{half}");
        assert_eq!(time_map(&c, &h, &[0.3], &[0.3]).unwrap(), vec![0.0]);
        assert!(matches!(
            time_map(&c, &h, &[0.0], &[1.5]),
            Err(ActionError::EndpointOutside { .. })
        ));
    }

    #[test]
    fn frequencies() {
        let s = frequency_matrix(&oscillator(), &[0.5]).unwrap();
        assert!((s.omega[0][0] - 1.0).abs() < 1e-6);
        assert!((s.periods()[0] - 2.0 * PI).abs() < 1e-4);
        let s = frequency_matrix(&two_oscillators(), &[0.5, 0.8]).unwrap();
        assert!((s.omega[0][0] - 1.0).abs() < 1e-6 && (s.omega[1][1] - 2.0).abs() < 1e-6);
        assert!(s.omega[0][1].abs() < 1e-6 && s.omega[1][0].abs() < 1e-6);
        assert!(s.inverse_defect() < 1e-4);
    }

    #[test]
    fn chart_validation() {
        assert!(matches!(
            SeparableChart::new(1, vec![DegreeChart::turning(residual("w^2 + x"), -1.0, 1.0)]),
            Err(ActionError::UnknownSymbol { .. })
        ));
        assert!(matches!(
            SeparableChart::new(1, vec![DegreeChart::turning(residual("w^2 + h2"), -1.0, 1.0)]),
            Err(ActionError::UnknownSymbol { .. })
        ));
        assert!(matches!(
            SeparableChart::new(1, vec![DegreeChart::turning(crate::expr::parse("w^2 + q1", 1).unwrap(), -1.0, 1.0)]),
            Err(ActionError::PhaseVariable { .. })
        ));
        let c = oscillator();
        assert!(matches!(solve_branch(&c, 2, 0.0, &[0.5]), Err(ActionError::DegreeIndex(2))));
        assert!(matches!(solve_branch(&c, 1, 0.0, &[0.5, 1.0]), Err(ActionError::Dimension { .. })));
    }
}
