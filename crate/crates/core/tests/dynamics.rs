//! Cross-checks between quadrature results and integrated flows.

use liouville::action_angle::{frequency_matrix, time_map, turning_points};
use liouville::catalog::{get_system, SystemParams};
use liouville::flows::{integrate, quasiperiodicity_probe, IntegratorConfig};
use liouville::EvalPoint;
use std::f64::consts::PI;

/// First time after `t_min` at which `q1` crosses zero upwards, by
/// bisection on the dense output.
fn upward_crossing(traj: &liouville::flows::Trajectory, t_min: f64) -> f64 {
    let q = |t: f64| traj.interpolate(t)[0];
    let mut prev = t_min;
    let dt = 1e-3;
    let mut t = t_min + dt;
    while t <= traj.final_time() {
        if q(prev) < 0.0 && q(t) >= 0.0 {
            let (mut a, mut b) = (prev, t);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if q(m) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            return 0.5 * (a + b);
        }
        prev = t;
        t += dt;
    }
    panic!("no crossing found");
}

#[test]
fn period_from_actions_matches_flow() {
    for (name, h) in [("oscillator", 0.5), ("quartic", 1.0)] {
        let sys = get_system(name, &SystemParams::new()).unwrap();
        let chart = sys.chart.as_ref().unwrap();
        let spectrum = frequency_matrix(chart, &[h]).unwrap();
        let period = spectrum.periods()[0];

        // start at q = 0 moving right with energy h
        let p0 = (2.0 * h).sqrt();
        let u0 = EvalPoint::new(vec![0.0], vec![p0]);
        let traj = integrate(&sys.hamiltonian, sys.structure(), &u0, 1.5 * period, &IntegratorConfig::adaptive(1e-12)).unwrap();
        let measured = upward_crossing(&traj, 0.5 * period);
        assert!((measured - period).abs() <= 1e-4 * period, "{name}: {measured} vs {period}");

        let (lo, hi) = turning_points(chart, 1, &[h]).unwrap();
        let full = 2.0 * time_map(chart, &[h], &[lo], &[hi]).unwrap()[0];
        assert!((full - period).abs() <= 1e-4 * period, "{name}: {full} vs {period}");
    }
}

#[test]
fn oscillator_period_is_two_pi() {
    let sys = get_system("oscillator", &SystemParams::new()).unwrap();
    let s = frequency_matrix(sys.chart.as_ref().unwrap(), &[0.5]).unwrap();
    assert!((s.periods()[0] - 2.0 * PI).abs() < 1e-4);
}

#[test]
fn three_vortices_look_quasi_periodic() {
    let sys = get_system("vortices3", &SystemParams::new()).unwrap();
    let traj = integrate(&sys.hamiltonian, sys.structure(), &sys.probes[0], 200.0, &IntegratorConfig::adaptive(1e-9)).unwrap();
    assert!(traj.is_complete());
    let rep = quasiperiodicity_probe(&traj, 1.0, 0.5).unwrap();
    assert!(!rep.estimated_frequencies.is_empty());
    assert!(rep.estimated_frequencies.len() <= 6);
}
