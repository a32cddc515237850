use super::{integrate, FlowError, IntegratorConfig, Trajectory};
use crate::algebra::InvariantSet;
use crate::expr::{EvalPoint, Expr};
use crate::symplectic::SymplecticStructure;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub names: Vec<String>,
    /// `max_t |H_j(u(t)) − H_j(u(0))| / (1 + |H_j(u(0))|)` per invariant.
    pub drift: Vec<f64>,
    /// Invariants that could not be evaluated somewhere along the path.
    pub undefined: Vec<String>,
}

impl ConservationReport {
    pub fn max_drift(&self) -> f64 {
        self.drift.iter().fold(0.0f64, |m, d| m.max(*d))
    }

    pub fn drift_of(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.drift[i])
    }
}

pub fn conservation_report(traj: &Trajectory, inv: &InvariantSet) -> ConservationReport {
    let mut params = inv.params().clone();
    params.extend(traj.params.iter().map(|(k, v)| (k.clone(), *v)));
    let points: Vec<EvalPoint> = traj
        .states
        .iter()
        .map(|s| EvalPoint::from_state(s, params.clone()))
        .collect();
    let mut drift = Vec::with_capacity(inv.k());
    let mut undefined = Vec::new();
    for (name, member) in inv.names().iter().zip(inv.members()) {
        let values: Result<Vec<f64>, _> = points.iter().map(|u| member.evaluate(u)).collect();
        match values {
            Ok(v) => {
                let v0 = v[0];
                drift.push(
                    v.iter()
                        .fold(0.0f64, |m, x| m.max((x - v0).abs() / (1.0 + v0.abs()))),
                );
            }
            Err(_) => {
                drift.push(f64::INFINITY);
                undefined.push(name.clone());
            }
        }
    }
    ConservationReport {
        names: inv.names().to_vec(),
        drift,
        undefined,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutationReport {
    /// `|Φ_A^t Φ_B^τ u0 − Φ_B^τ Φ_A^t u0|`, Euclidean.
    pub defect: f64,
    pub tol: f64,
    pub integrator_tol: f64,
    pub commute: bool,
}

fn flow_to(h: &Expr, s: &SymplecticStructure, u: &EvalPoint, t: f64, cfg: &IntegratorConfig) -> Result<EvalPoint, FlowError> {
    if t == 0.0 {
        return Ok(u.clone());
    }
    let traj = if t > 0.0 {
        integrate(h, s, u, t, cfg)?
    } else {
        integrate(&(-h.clone()), s, u, -t, cfg)?
    };
    traj.require_complete()?;
    Ok(traj.final_point())
}

/// Defect of the two compositions of the flows of `a` and `b`, integrated
/// at tolerance `tol / 1000`.
pub fn flow_commutation_defect(
    a: &Expr,
    b: &Expr,
    s: &SymplecticStructure,
    u0: &EvalPoint,
    t: f64,
    tau: f64,
    tol: f64,
) -> Result<CommutationReport, FlowError> {
    let integrator_tol = (tol * 1e-3).max(1e-13);
    let cfg = IntegratorConfig::adaptive(integrator_tol);
    let ab = flow_to(a, s, &flow_to(b, s, u0, tau, &cfg)?, t, &cfg)?;
    let ba = flow_to(b, s, &flow_to(a, s, u0, t, &cfg)?, tau, &cfg)?;
    let defect = ab
        .state()
        .iter()
        .zip(ba.state())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    Ok(CommutationReport {
        defect,
        tol,
        integrator_tol,
        commute: defect <= tol,
    })
}

pub fn flows_commute(
    a: &Expr,
    b: &Expr,
    s: &SymplecticStructure,
    u0: &EvalPoint,
    t: f64,
    tau: f64,
    tol: f64,
) -> Result<bool, FlowError> {
    Ok(flow_commutation_defect(a, b, s, u0, t, tau, tol)?.commute)
}

/// Heuristic diagnostic of quasi-periodic motion; it does not prove that
/// the orbit fills a torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPeriodicityReport {
    pub near_return_count: usize,
    pub return_times: Vec<f64>,
    /// Time of the closest return found, with its distance.
    pub best_return_time: Option<f64>,
    pub best_return_distance: Option<f64>,
    /// Angular frequencies of the dominant spectral peaks, ascending.
    pub estimated_frequencies: Vec<f64>,
    /// Frequency resolution `2π / T`.
    pub resolution: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Count ε-returns to `u(0)` at least `window` apart (and at least `window`
/// after the start) and estimate dominant frequencies from the spectrum.
pub fn quasiperiodicity_probe(
    traj: &Trajectory,
    window: f64,
    epsilon: f64,
) -> Result<QuasiPeriodicityReport, FlowError> {
    let total = traj.final_time();
    if traj.len() < 4 || total <= 2.0 * window {
        return Err(FlowError::TooShort(format!(
            "{} samples over T = {total}, window {window}",
            traj.len()
        )));
    }
    let resolution = 2.0 * std::f64::consts::PI / total;
    let u0 = &traj.states[0];
    let d: Vec<f64> = traj.states.iter().map(|s| distance(s, u0)).collect();

    if d.iter().all(|&x| x == 0.0) {
        return Ok(QuasiPeriodicityReport {
            near_return_count: traj.len(),
            return_times: traj.times.clone(),
            best_return_time: traj.times.get(1).copied(),
            best_return_distance: Some(0.0),
            estimated_frequencies: Vec::new(),
            resolution,
        });
    }

    let mut returns: Vec<(f64, f64)> = Vec::new();
    for i in 1..traj.len() - 1 {
        if !(d[i] <= d[i - 1] && d[i] <= d[i + 1]) {
            continue;
        }
        let (t, dist) = refine_minimum(traj, traj.times[i - 1], traj.times[i + 1]);
        if dist > epsilon || t < window {
            continue;
        }
        match returns.last_mut() {
            Some(last) if t - last.0 < window => {
                if dist < last.1 {
                    *last = (t, dist);
                }
            }
            _ => returns.push((t, dist)),
        }
    }
    let best = returns.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1));
    Ok(QuasiPeriodicityReport {
        near_return_count: returns.len(),
        return_times: returns.iter().map(|r| r.0).collect(),
        best_return_time: best.map(|b| b.0),
        best_return_distance: best.map(|b| b.1),
        estimated_frequencies: spectral_peaks(traj, resolution),
        resolution,
    })
}

/// Golden-section search for the closest approach to `u(0)` on the
/// interpolant over `[a, b]`.
fn refine_minimum(traj: &Trajectory, mut a: f64, mut b: f64) -> (f64, f64) {
    let u0 = &traj.states[0];
    let f = |t: f64| distance(&traj.interpolate(t), u0);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if b - a < 1e-12 * b.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// Peaks of the summed power spectrum of all coordinates, resampled
/// uniformly, Hann-windowed and zero-padded 4x; parabolic interpolation on
/// the log power locates each peak between bins.
fn spectral_peaks(traj: &Trajectory, resolution: f64) -> Vec<f64> {
    let total = traj.final_time();
    let samples = (4 * traj.len()).next_power_of_two().clamp(1024, 1 << 16);
    let padded = 4 * samples;
    let dt = total / (samples - 1) as f64;
    let resampled: Vec<Vec<f64>> = (0..samples).map(|i| traj.interpolate(i as f64 * dt)).collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(padded);
    let mut power = vec![0.0; padded / 2];
    for c in 0..2 * traj.n {
        let mean = resampled.iter().map(|s| s[c]).sum::<f64>() / samples as f64;
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); padded];
        for (i, s) in resampled.iter().enumerate() {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (samples - 1) as f64).cos();
            buf[i] = Complex::new((s[c] - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, z) in power.iter_mut().zip(&buf) {
            *p += z.norm_sqr();
        }
    }
    let peak_power = power.iter().skip(1).fold(0.0f64, |m, p| m.max(*p));
    if peak_power <= 0.0 {
        return Vec::new();
    }
    let bin = 2.0 * std::f64::consts::PI / (padded as f64 * dt);
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 2..power.len() - 1 {
        let p = power[i];
        if p < 1e-2 * peak_power || p <= power[i - 1] || p < power[i + 1] {
            continue;
        }
        let (a, b, c) = (power[i - 1].ln(), p.ln(), power[i + 1].ln());
        let denom = a - 2.0 * b + c;
        let offset = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        peaks.push(((i as f64 + offset) * bin, p));
    }
    // keep the strongest peaks, merging any closer than the resolution
    peaks.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for (w, p) in peaks {
        if kept.len() == 2 * traj.n {
            break;
        }
        if kept.iter().all(|(k, _)| (k - w).abs() > resolution) {
            kept.push((w, p));
        }
    }
    let mut freqs: Vec<f64> = kept.into_iter().map(|k| k.0).collect();
    freqs.sort_by(f64::total_cmp);
    freqs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::InvariantSet;
    use crate::expr::parse;

    fn osc() -> (Expr, SymplecticStructure) {
        (parse("(p1^2 + q1^2)/2", 1).unwrap(), SymplecticStructure::canonical(1))
    }

    #[test]
    fn drift_of_conserved_and_non_conserved_quantities() {
        let (h, s) = osc();
        let u0 = EvalPoint::new(vec![1.0], vec![0.0]);
        let traj = integrate(&h, &s, &u0, 10.0, &IntegratorConfig::adaptive(1e-10)).unwrap();
        let inv = InvariantSet::new(s, vec![("H".into(), h), ("F".into(), Expr::q(1))]).unwrap();
        let rep = conservation_report(&traj, &inv);
        assert!(rep.drift_of("H").unwrap() < 1e-8);
        assert!(rep.drift_of("F").unwrap() > 0.5);
    }

    #[test]
    fn identical_flows_commute() {
        let (h, s) = osc();
        let u0 = EvalPoint::new(vec![0.3], vec![0.8]);
        assert!(flows_commute(&h, &h, &s, &u0, 1.3, 2.1, 1e-6).unwrap());
    }

    #[test]
    fn position_and_momentum_translations_do_not_commute_with_rotation() {
        let (h, s) = osc();
        let u0 = EvalPoint::new(vec![0.3], vec![0.8]);
        let rep = flow_commutation_defect(&h, &Expr::p(1), &s, &u0, 1.0, 1.0, 1e-6).unwrap();
        assert!(!rep.commute && rep.defect > 0.1);
    }

    #[test]
    fn oscillator_returns_and_frequency() {
        let (h, s) = osc();
        let u0 = EvalPoint::new(vec![1.0], vec![0.0]);
        let traj = integrate(&h, &s, &u0, 100.0, &IntegratorConfig::adaptive(1e-10)).unwrap();
        let rep = quasiperiodicity_probe(&traj, 1.0, 1e-3).unwrap();
        assert!(rep.near_return_count >= 15, "{rep:?}");
        assert!((rep.best_return_time.unwrap() / (2.0 * std::f64::consts::PI)).fract() < 1e-6
            || (rep.best_return_time.unwrap() / (2.0 * std::f64::consts::PI)).fract() > 1.0 - 1e-6);
        assert_eq!(rep.estimated_frequencies.len(), 1, "{rep:?}");
        assert!((rep.estimated_frequencies[0] - 1.0).abs() < 0.01);
    }

    #[test]
    fn two_oscillators_give_two_peaks() {
        let s = SymplecticStructure::canonical(2);
        let h = parse("(p1^2 + q1^2)/2 + (p2^2 + 2*q2^2)/2", 2).unwrap();
        let u0 = EvalPoint::new(vec![1.0, 1.0], vec![0.0, 0.0]);
        let traj = integrate(&h, &s, &u0, 200.0, &IntegratorConfig::adaptive(1e-10)).unwrap();
        let rep = quasiperiodicity_probe(&traj, 1.0, 1e-3).unwrap();
        let f = &rep.estimated_frequencies;
        assert_eq!(f.len(), 2, "{f:?}");
        assert!((f[0] - 1.0).abs() < rep.resolution);
        assert!((f[1] - 2f64.sqrt()).abs() < rep.resolution);
    }

    #[test]
    fn constant_trajectory_returns_everywhere() {
        let s = SymplecticStructure::canonical(1);
        let u0 = EvalPoint::new(vec![1.0], vec![2.0]);
        let traj = integrate(&Expr::zero(), &s, &u0, 10.0, &IntegratorConfig::adaptive(1e-9)).unwrap();
        let rep = quasiperiodicity_probe(&traj, 1.0, 1e-3).unwrap();
        assert_eq!(rep.near_return_count, traj.len());
        assert!(rep.estimated_frequencies.is_empty());
    }

    #[test]
    fn short_trajectory_is_rejected() {
        let (h, s) = osc();
        let u0 = EvalPoint::new(vec![1.0], vec![0.0]);
        let traj = integrate(&h, &s, &u0, 1.0, &IntegratorConfig::adaptive(1e-9)).unwrap();
        assert!(matches!(quasiperiodicity_probe(&traj, 1.0, 1e-3), Err(FlowError::TooShort(_))));
    }
}
