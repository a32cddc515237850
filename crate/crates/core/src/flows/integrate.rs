use super::{FlowError, IntegratorConfig, Scheme, Termination, Trajectory};
use crate::expr::{EvalError, EvalPoint, Expr, Symbol, Var};
use crate::symplectic::{SymplecticStructure, VectorFieldExpr};

/// Integrate `du/dt = {H, u}` from `u0` over `[0, t_end]`.
///
/// Failures during the run (domain errors, collisions, step underflow,
/// step budget) end the trajectory early with the matching
/// [`Termination`]; only invalid inputs are reported as errors.
pub fn integrate(
    h: &Expr,
    s: &SymplecticStructure,
    u0: &EvalPoint,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, FlowError> {
    cfg.validate()?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(FlowError::InvalidTime(t_end));
    }
    h.evaluate(u0).map_err(FlowError::InitialPoint)?;
    let field = Field::new(s.hamiltonian_vector_field(h), u0.clone());
    let y0 = u0.state();
    let f0 = field.eval(&y0).map_err(FlowError::InitialPoint)?;
    let mut traj = Trajectory {
        hamiltonian: h.to_string(),
        config: *cfg,
        n: s.n(),
        params: u0.params.clone(),
        times: vec![0.0],
        states: vec![y0],
        derivatives: vec![f0],
        termination: Termination::Completed,
    };
    match cfg.scheme {
        Scheme::Adaptive => dopri5(&field, t_end, cfg, &mut traj),
        Scheme::FixedOrder4 => {
            if !field.is_separable() {
                return Err(FlowError::NotSeparable);
            }
            composition4(&field, t_end, cfg, &mut traj)
        }
    }
    Ok(traj)
}

struct Field {
    vf: VectorFieldExpr,
    point: std::cell::RefCell<EvalPoint>,
}

impl Field {
    fn new(vf: VectorFieldExpr, template: EvalPoint) -> Self {
        Field {
            vf,
            point: std::cell::RefCell::new(template),
        }
    }

    fn eval(&self, y: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut u = self.point.borrow_mut();
        u.set_state(y);
        self.vf.evaluate(&u)
    }

    fn is_separable(&self) -> bool {
        let n = self.vf.n();
        (1..=n).all(|j| {
            (1..=n).all(|i| {
                !self.vf.dq(j).depends_on(Symbol::Var(Var::q(i)))
                    && !self.vf.dp(j).depends_on(Symbol::Var(Var::p(i)))
            })
        })
    }
}

fn collided(y: &[f64], n: usize, guard: f64) -> bool {
    (0..n).any(|i| {
        ((i + 1)..n).any(|j| {
            let dq = y[i] - y[j];
            let dp = y[n + i] - y[n + j];
            dq * dq + dp * dp < guard
        })
    })
}

/// Append an accepted sample; returns false when the run must stop.
fn accept(traj: &mut Trajectory, t: f64, y: Vec<f64>, f: Vec<f64>, cfg: &IntegratorConfig) -> bool {
    let hit = cfg.collision_guard.is_some_and(|g| collided(&y, traj.n, g));
    traj.times.push(t);
    traj.states.push(y);
    traj.derivatives.push(f);
    if hit {
        traj.termination = Termination::Collision;
        return false;
    }
    true
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn error_norm(err: &[f64], y: &[f64], y_new: &[f64], tol: f64) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = tol + tol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

fn initial_step(field: &Field, y0: &[f64], f0: &[f64], tol: f64, t_end: f64) -> f64 {
    let norm = |v: &[f64]| {
        let s: f64 = v
            .iter()
            .zip(y0)
            .map(|(x, y)| (x / (tol + tol * y.abs())).powi(2))
            .sum();
        (s / v.len() as f64).sqrt()
    };
    let d0 = norm(y0);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let d2 = match field.eval(&y1) {
        Ok(f1) => {
            let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
            norm(&diff) / h0
        }
        Err(_) => return h0.min(t_end),
    };
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end)
}

fn dopri5(field: &Field, t_end: f64, cfg: &IntegratorConfig, traj: &mut Trajectory) {
    let dim = traj.states[0].len();
    let mut t = 0.0;
    let mut y = traj.states[0].clone();
    let mut f = traj.derivatives[0].clone();
    let mut h = if cfg.step > 0.0 {
        cfg.step.min(t_end)
    } else {
        initial_step(field, &y, &f, cfg.tol, t_end)
    };
    let mut steps = 0;
    let mut last_failure_was_domain = false;
    let mut rejected = false;
    let mut k = vec![vec![0.0; dim]; 7];
    let mut stage = vec![0.0; dim];
    while t < t_end {
        if steps == cfg.max_steps {
            traj.termination = Termination::MaxSteps;
            return;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            traj.termination = if last_failure_was_domain {
                Termination::DomainError
            } else {
                Termination::StepUnderflow
            };
            return;
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        k[0].copy_from_slice(&f);
        let mut domain_failure = false;
        for i in 1..7 {
            for c in 0..dim {
                let mut acc = y[c];
                for (j, kj) in k.iter().enumerate().take(i) {
                    acc += h * A[i][j] * kj[c];
                }
                stage[c] = acc;
            }
            match field.eval(&stage) {
                Ok(v) => k[i] = v,
                Err(_) => {
                    domain_failure = true;
                    break;
                }
            }
        }
        if domain_failure {
            last_failure_was_domain = true;
            rejected = true;
            h *= 0.5;
            continue;
        }
        // stage 7 is evaluated at the fifth-order solution
        let y_new = stage.clone();
        let err: Vec<f64> = (0..dim)
            .map(|c| h * (0..7).map(|i| E[i] * k[i][c]).sum::<f64>())
            .collect();
        let e = error_norm(&err, &y, &y_new, cfg.tol);
        if e <= 1.0 {
            steps += 1;
            t = if last { t_end } else { t + h };
            y = y_new;
            f = k[6].clone();
            last_failure_was_domain = false;
            if !accept(traj, t, y.clone(), f.clone(), cfg) {
                return;
            }
            let grow = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h *= if rejected { grow.min(1.0) } else { grow };
            rejected = false;
        } else {
            last_failure_was_domain = false;
            rejected = true;
            h *= (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
}

/// Fourth-order triple-jump composition of position-Verlet steps.
fn composition4(field: &Field, t_end: f64, cfg: &IntegratorConfig, traj: &mut Trajectory) {
    let n = traj.n;
    let steps = (t_end / cfg.step).ceil().max(1.0) as usize;
    if steps > cfg.max_steps {
        traj.termination = Termination::MaxSteps;
        return;
    }
    let h = t_end / steps as f64;
    let cbrt2 = 2f64.cbrt();
    let w1 = 1.0 / (2.0 - cbrt2);
    let w0 = 1.0 - 2.0 * w1;
    let mut y = traj.states[0].clone();
    let verlet = |y: &mut Vec<f64>, dt: f64| -> Result<(), EvalError> {
        let v = field.eval(y)?;
        for j in 0..n {
            y[j] += 0.5 * dt * v[j];
        }
        let v = field.eval(y)?;
        for j in 0..n {
            y[n + j] += dt * v[n + j];
        }
        let v = field.eval(y)?;
        for j in 0..n {
            y[j] += 0.5 * dt * v[j];
        }
        Ok(())
    };
    for step in 1..=steps {
        let result = verlet(&mut y, w1 * h)
            .and_then(|_| verlet(&mut y, w0 * h))
            .and_then(|_| verlet(&mut y, w1 * h))
            .and_then(|_| field.eval(&y));
        match result {
            Ok(f) => {
                let t = if step == steps { t_end } else { step as f64 * h };
                if !accept(traj, t, y.clone(), f, cfg) {
                    return;
                }
            }
            Err(_) => {
                traj.termination = Termination::DomainError;
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    fn oscillator() -> (Expr, SymplecticStructure, EvalPoint) {
        (
            parse("(p1^2 + q1^2)/2", 1).unwrap(),
            SymplecticStructure::canonical(1),
            EvalPoint::new(vec![1.0], vec![0.0]),
        )
    }

    #[test]
    fn oscillator_returns_after_one_period() {
        let (h, s, u0) = oscillator();
        let traj = integrate(&h, &s, &u0, 2.0 * PI, &IntegratorConfig::adaptive(1e-10)).unwrap();
        assert!(traj.is_complete());
        let y = traj.final_state();
        assert!(((y[0] - 1.0).powi(2) + y[1].powi(2)).sqrt() <= 1e-6);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.final_time(), 2.0 * PI);
    }

    #[test]
    fn zero_hamiltonian_is_stationary() {
        let s = SymplecticStructure::canonical(2);
        let u0 = EvalPoint::new(vec![0.3, -1.0], vec![2.0, 0.5]);
        let traj = integrate(&Expr::zero(), &s, &u0, 10.0, &IntegratorConfig::adaptive(1e-9)).unwrap();
        assert!(traj.is_complete());
        assert!(traj.states.iter().all(|y| y == &u0.state()));
    }

    #[test]
    fn order_four_convergence() {
        let (h, s, u0) = oscillator();
        let error = |step: f64| {
            let traj = integrate(&h, &s, &u0, 2.0, &IntegratorConfig::fixed(step)).unwrap();
            let y = traj.final_state();
            ((y[0] - 2f64.cos()).powi(2) + (y[1] + 2f64.sin()).powi(2)).sqrt()
        };
        let ratio = error(0.1) / error(0.05);
        assert!((12.0..=20.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn fixed_step_rejects_non_separable() {
        let s = SymplecticStructure::canonical(1);
        let h = parse("q1*p1", 1).unwrap();
        let u0 = EvalPoint::new(vec![1.0], vec![1.0]);
        assert_eq!(
            integrate(&h, &s, &u0, 1.0, &IntegratorConfig::fixed(0.1)),
            Err(FlowError::NotSeparable)
        );
    }

    #[test]
    fn reversibility() {
        let s = SymplecticStructure::canonical(2);
        let h = parse("(p1^2 + p2^2)/2 + q1^2*q2^2/2 + (q1^2 + q2^2)/2", 2).unwrap();
        let u0 = EvalPoint::new(vec![0.4, -0.3], vec![0.2, 0.7]);
        let tol = 1e-10;
        let fwd = integrate(&h, &s, &u0, 5.0, &IntegratorConfig::adaptive(tol)).unwrap();
        let back = integrate(&(-h), &s, &fwd.final_point(), 5.0, &IntegratorConfig::adaptive(tol)).unwrap();
        let y = back.final_state();
        let dist = y.iter().zip(u0.state()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dist <= 10.0 * tol * fwd.len() as f64, "{dist}");
    }

    #[test]
    fn initial_point_outside_domain() {
        let s = SymplecticStructure::canonical(1);
        let h = parse("ln(q1)", 1).unwrap();
        let u0 = EvalPoint::new(vec![-1.0], vec![0.0]);
        assert!(matches!(
            integrate(&h, &s, &u0, 1.0, &IntegratorConfig::default()),
            Err(FlowError::InitialPoint(_))
        ));
    }

    #[test]
    fn runaway_to_singularity_is_flagged() {
        let s = SymplecticStructure::canonical(1);
        let h = parse("p1^2/2 - 1/q1", 1).unwrap();
        // falls into the 1/q singularity in finite time
        let u0 = EvalPoint::new(vec![1.0], vec![0.0]);
        let traj = integrate(&h, &s, &u0, 10.0, &IntegratorConfig::adaptive(1e-9).with_max_steps(20_000)).unwrap();
        assert!(!traj.is_complete());
        assert!(traj.final_time() < 10.0);
    }

    #[test]
    fn vortex_collision_guard() {
        // a pair started inside the guard distance
        let s = SymplecticStructure::new(vec![1.0, 1.0]).unwrap();
        let h = parse("-(1/(2*3.141592653589793))*ln((q1-q2)^2 + (p1-p2)^2)", 2).unwrap();
        let u0 = EvalPoint::new(vec![0.0, 0.0005], vec![0.0, 0.0]);
        let traj = integrate(&h, &s, &u0, 1.0, &IntegratorConfig::adaptive(1e-9).with_collision_guard()).unwrap();
        assert_eq!(traj.termination, Termination::Collision);
    }
}
