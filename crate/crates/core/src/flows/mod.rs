//! Numerical Hamiltonian flows `du/dt = {H, u}` and diagnostics along them.

mod diagnostics;
mod integrate;

pub use diagnostics::{
    conservation_report, flow_commutation_defect, flows_commute, quasiperiodicity_probe,
    CommutationReport, ConservationReport, QuasiPeriodicityReport,
};
pub use integrate::integrate;

use crate::expr::{EvalError, EvalPoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("integration time must be positive and finite, got {0}")]
    InvalidTime(f64),
    #[error("the initial point is outside the domain: {0}")]
    InitialPoint(EvalError),
    #[error("the fixed-step scheme needs a separable Hamiltonian T(p) + V(q)")]
    NotSeparable,
    #[error("integration stopped early ({termination:?}) at t = {time}")]
    Incomplete { termination: Termination, time: f64 },
    #[error("trajectory too short: {0}")]
    TooShort(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Embedded Dormand–Prince 5(4) pair with step-size control.
    Adaptive,
    /// Fourth-order symmetric composition of leapfrog steps.
    FixedOrder4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Fixed step, or the initial step guess for the adaptive scheme
    /// (0 picks one automatically).
    pub step: f64,
    /// Local error tolerance (absolute and relative) of the adaptive scheme.
    pub tol: f64,
    pub max_steps: usize,
    /// Stop when two vortices come closer than this squared distance.
    pub collision_guard: Option<f64>,
}

impl IntegratorConfig {
    pub fn adaptive(tol: f64) -> Self {
        IntegratorConfig {
            scheme: Scheme::Adaptive,
            step: 0.0,
            tol,
            max_steps: 1_000_000,
            collision_guard: None,
        }
    }

    pub fn fixed(step: f64) -> Self {
        IntegratorConfig {
            scheme: Scheme::FixedOrder4,
            step,
            tol: 0.0,
            max_steps: 10_000_000,
            collision_guard: None,
        }
    }

    /// Guard against vortex collisions at squared distance `1e-6`.
    pub fn with_collision_guard(mut self) -> Self {
        self.collision_guard = Some(1e-6);
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::InvalidConfig(m.into()));
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        match self.scheme {
            Scheme::Adaptive if !(self.tol > 0.0 && self.tol.is_finite()) => bad("tolerance must be positive"),
            Scheme::Adaptive if !(self.step >= 0.0 && self.step.is_finite()) => bad("initial step must be non-negative"),
            Scheme::FixedOrder4 if !(self.step > 0.0 && self.step.is_finite()) => bad("step must be positive"),
            _ => Ok(()),
        }
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig::adaptive(1e-10)
    }
}

/// Why an integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    /// The vector field could not be evaluated (e.g. a logarithmic singularity).
    DomainError,
    /// Two vortices came within the collision guard.
    Collision,
    StepUnderflow,
    MaxSteps,
}

/// Time-stamped states of one flow, in the flat layout `[q.., p..]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub hamiltonian: String,
    pub config: IntegratorConfig,
    pub n: usize,
    pub params: BTreeMap<String, f64>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Vector field at each sample, used for Hermite interpolation.
    pub derivatives: Vec<Vec<f64>>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.termination == Termination::Completed
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectories hold the initial point")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectories hold the initial point")
    }

    pub fn point(&self, i: usize) -> EvalPoint {
        EvalPoint::from_state(&self.states[i], self.params.clone())
    }

    pub fn final_point(&self) -> EvalPoint {
        self.point(self.len() - 1)
    }

    /// Error unless the integration reached its end time.
    pub fn require_complete(&self) -> Result<&Self, FlowError> {
        if self.is_complete() {
            Ok(self)
        } else {
            Err(FlowError::Incomplete {
                termination: self.termination,
                time: self.final_time(),
            })
        }
    }

    /// Cubic Hermite interpolation of the state at `t`, clamped to the
    /// sampled range.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let last = self.len() - 1;
        if t <= self.times[0] || last == 0 {
            return self.states[0].clone();
        }
        if t >= self.times[last] {
            return self.states[last].clone();
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        (0..2 * self.n)
            .map(|c| {
                h00 * self.states[i][c]
                    + h10 * h * self.derivatives[i][c]
                    + h01 * self.states[i + 1][c]
                    + h11 * h * self.derivatives[i + 1][c]
            })
            .collect()
    }

    /// CSV with header `t,q1..qn,p1..pn`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n).map(|j| format!("q{j}")));
        header.extend((1..=self.n).map(|j| format!("p{j}")));
        writeln!(w, "{}", header.join(","))?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(s.iter().map(|x| format!("{x:.16e}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::symplectic::SymplecticStructure;

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::adaptive(1e-9).validate().is_ok());
        assert!(IntegratorConfig::adaptive(0.0).validate().is_err());
        assert!(IntegratorConfig::fixed(-0.1).validate().is_err());
        assert!(IntegratorConfig::adaptive(1e-9).with_max_steps(0).validate().is_err());
    }

    #[test]
    fn csv_layout() {
        let s = SymplecticStructure::canonical(1);
        let h = parse("(p1^2 + q1^2)/2", 1).unwrap();
        let u0 = EvalPoint::new(vec![1.0], vec![0.0]);
        let traj = integrate(&h, &s, &u0, 0.5, &IntegratorConfig::adaptive(1e-8)).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,q1,p1"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 1.0, 0.0]);
        assert_eq!(csv.lines().count(), traj.len() + 1);
        let row = csv.lines().nth(2).unwrap();
        // 17 significant digits per number
        assert!(row.split(',').all(|x| x.split('e').next().unwrap().replace(['-', '.'], "").len() == 17));
    }

    #[test]
    fn hermite_interpolation_tracks_the_flow() {
        let s = SymplecticStructure::canonical(1);
        let h = parse("(p1^2 + q1^2)/2", 1).unwrap();
        let u0 = EvalPoint::new(vec![1.0], vec![0.0]);
        let traj = integrate(&h, &s, &u0, 3.0, &IntegratorConfig::adaptive(1e-11)).unwrap();
        for t in [0.3, 1.234, 2.9] {
            let u = traj.interpolate(t);
            assert!((u[0] - f64::cos(t)).abs() < 1e-6);
            assert!((u[1] + f64::sin(t)).abs() < 1e-6);
        }
    }
}
