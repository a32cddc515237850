use super::{solve_branch, solve_branch_with, ActionError, SeparableChart};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardFuchsReport {
    /// Largest spread of `∂w_i/∂h_j` within a group of probes sharing
    /// `(lam_i, w_i)`.
    pub residual: f64,
    /// Number of probe groups with at least two members.
    pub groups_compared: usize,
}

/// All branch values at one probe (one `lam` per degree), iterating the
/// coupled relations to a fixed point.
fn solve_all(chart: &SeparableChart, lams: &[f64], h: &[f64]) -> Result<Vec<f64>, ActionError> {
    let n = chart.n();
    let mut w = vec![0.0; n];
    let coupled = (1..=n).any(|j| chart.is_coupled(j));
    let sweeps = if coupled { 100 } else { 1 };
    for _ in 0..sweeps {
        let mut change = 0.0f64;
        for j in 1..=n {
            let mut others = BTreeMap::new();
            for m in 1..=n {
                if m != j {
                    others.insert(format!("lam{m}"), lams[m - 1]);
                    others.insert(format!("w{m}"), w[m - 1]);
                }
            }
            let sign = chart.degrees[j - 1].branch;
            let next = solve_branch_with(chart, j, lams[j - 1], h, sign, &others)?;
            change = change.max((next - w[j - 1]).abs());
            w[j - 1] = next;
        }
        if change <= 1e-14 {
            return Ok(w);
        }
    }
    if coupled {
        Err(ActionError::CoupledSolve)
    } else {
        Ok(w)
    }
}

/// Check that each `∂w_i/∂h_j` depends only on `(lam_i, w_i; h)`: probes
/// (one `lam` per degree) that agree in degree `i` must give the same
/// derivative whatever the other degrees do.
pub fn picard_fuchs_residual(
    chart: &SeparableChart,
    h: &[f64],
    probes: &[Vec<f64>],
) -> Result<PicardFuchsReport, ActionError> {
    chart.check_h(h)?;
    let n = chart.n();
    if n == 1 {
        return Ok(PicardFuchsReport {
            residual: 0.0,
            groups_compared: 0,
        });
    }
    if probes.len() < 2 {
        return Err(ActionError::InsufficientProbes {
            needed: 2,
            got: probes.len(),
        });
    }
    for p in probes {
        if p.len() != n {
            return Err(ActionError::Dimension {
                expected: n,
                got: p.len(),
            });
        }
    }
    let k = chart.k;
    let mut states = Vec::with_capacity(probes.len());
    let mut derivs = Vec::with_capacity(probes.len());
    for lams in probes {
        let w = solve_all(chart, lams, h)?;
        // d[j][i] = ∂w_i/∂h_j
        let mut d = vec![vec![0.0; n]; k];
        for (j, row) in d.iter_mut().enumerate() {
            let step = 1e-6 * (1.0 + h[j].abs());
            let mut up = h.to_vec();
            let mut down = h.to_vec();
            up[j] += step;
            down[j] -= step;
            let wu = solve_all(chart, lams, &up)?;
            let wd = solve_all(chart, lams, &down)?;
            for i in 0..n {
                row[i] = (wu[i] - wd[i]) / (2.0 * step);
            }
        }
        states.push(w);
        derivs.push(d);
    }
    let mut residual = 0.0f64;
    let mut groups_compared = 0;
    for i in 0..n {
        let mut groups: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (p, lams) in probes.iter().enumerate() {
            let key = ((lams[i] * 1e9).round() as i64, (states[p][i] * 1e9).round() as i64);
            groups.entry(key).or_default().push(p);
        }
        for members in groups.values().filter(|m| m.len() > 1) {
            groups_compared += 1;
            for j in 0..k {
                let vals: Vec<f64> = members.iter().map(|&p| derivs[p][j][i]).collect();
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                residual = residual.max(hi - lo);
            }
        }
    }
    Ok(PicardFuchsReport {
        residual,
        groups_compared,
    })
}

/// Monic curve `w^{n_j} + Σ c_s(lam) w^{n_j − s} = 0` through the branch
/// roots, tabulated on a lam grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurveFit {
    pub degree: usize,
    pub lams: Vec<f64>,
    /// `coefficients[l][s-1] = c_s(lams[l])`.
    pub coefficients: Vec<Vec<f64>>,
    /// Largest distance between the curve's roots and the branch roots.
    pub max_root_error: f64,
}

impl SpectralCurveFit {
    /// CSV with header `lam,c1..c_{n_j}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["lam".to_string()];
        header.extend((1..=self.degree).map(|s| format!("c{s}")));
        writeln!(w, "{}", header.join(","))?;
        for (lam, c) in self.lams.iter().zip(&self.coefficients) {
            let mut row = vec![format!("{lam:.16e}")];
            row.extend(c.iter().map(|x| format!("{x:.16e}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn fit_spectral_curve(
    chart: &SeparableChart,
    j: usize,
    degree: usize,
    lams: &[f64],
    h: &[f64],
) -> Result<SpectralCurveFit, ActionError> {
    chart.check_h(h)?;
    if !(1..=2).contains(&degree) {
        return Err(ActionError::UnsupportedCurveDegree(degree));
    }
    let none = BTreeMap::new();
    let mut coefficients = Vec::with_capacity(lams.len());
    let mut max_root_error = 0.0f64;
    for &lam in lams {
        let row = if degree == 1 {
            let w = solve_branch(chart, j, lam, h)?;
            vec![-w]
        } else {
            let roots = (
                solve_branch_with(chart, j, lam, h, 1.0, &none),
                solve_branch_with(chart, j, lam, h, -1.0, &none),
            );
            let (Ok(wp), Ok(wm)) = roots else {
                return Err(ActionError::TooFewRoots { wanted: 2, lam });
            };
            let (c1, c2) = (0.0 - (wp + wm), wp * wm);
            // roots of the fitted quadratic against the branch roots
            let disc = (c1 * c1 - 4.0 * c2).max(0.0).sqrt();
            let r1 = 0.5 * (-c1 + disc);
            let r2 = 0.5 * (-c1 - disc);
            let (hi, lo) = if wp >= wm { (wp, wm) } else { (wm, wp) };
            max_root_error = max_root_error.max((r1 - hi).abs()).max((r2 - lo).abs());
            vec![c1, c2]
        };
        coefficients.push(row);
    }
    Ok(SpectralCurveFit {
        degree,
        lams: lams.to_vec(),
        coefficients,
        max_root_error,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{DegreeChart, SeparableChart};
    use super::*;

    fn grid_probes() -> Vec<Vec<f64>> {
        let mut probes = Vec::new();
        for &l1 in &[-0.3, 0.1, 0.4] {
            for &l2 in &[-0.2, 0.05, 0.3] {
                probes.push(vec![l1, l2]);
            }
        }
        probes
    }

    #[test]
    fn separable_chart_has_no_residual() {
        let rep = picard_fuchs_residual(&two_oscillators(), &[0.5, 0.8], &grid_probes()).unwrap();
        assert!(rep.residual <= 1e-8, "{}", rep.residual);
        assert_eq!(rep.groups_compared, 6);
    }

    #[test]
    fn coupled_chart_is_detected() {
        let chart = SeparableChart::new(
            2,
            vec![
                DegreeChart::turning(residual("w^2 + lam^2 - 2*h1 + (h1 - 1)*w2^2"), -10.0, 10.0),
                DegreeChart::turning(residual("w^2 + lam^2 - 2*h2"), -10.0, 10.0),
            ],
        )
        .unwrap();
        let rep = picard_fuchs_residual(&chart, &[1.0, 0.8], &grid_probes()).unwrap();
        assert!(rep.residual >= 1e-2, "{}", rep.residual);
    }

    #[test]
    fn single_degree_and_too_few_probes() {
        let rep = picard_fuchs_residual(&oscillator(), &[0.5], &[]).unwrap();
        assert_eq!(rep.residual, 0.0);
        assert!(matches!(
            picard_fuchs_residual(&two_oscillators(), &[0.5, 0.8], &[vec![0.0, 0.0]]),
            Err(ActionError::InsufficientProbes { .. })
        ));
    }

    #[test]
    fn oscillator_and_quartic_curves() {
        let lams = [-0.9, -0.3, 0.0, 0.5, 0.95];
        let fit = fit_spectral_curve(&oscillator(), 1, 2, &lams, &[0.5]).unwrap();
        for (lam, c) in lams.iter().zip(&fit.coefficients) {
            assert!(c[0].abs() < 1e-12);
            assert!((c[1] - (lam * lam - 1.0)).abs() < 1e-10);
        }
        assert!(fit.max_root_error < 1e-8);
        let fit = fit_spectral_curve(&quartic(), 1, 2, &lams, &[1.0]).unwrap();
        for (lam, c) in lams.iter().zip(&fit.coefficients) {
            assert!((c[1] - (lam.powi(4) / 2.0 - 2.0)).abs() < 1e-10);
        }
        let one = fit_spectral_curve(&oscillator(), 1, 2, &[0.3], &[0.5]).unwrap();
        assert_eq!(one.coefficients.len(), 1);
        assert!(matches!(
            fit_spectral_curve(&oscillator(), 1, 2, &[1.5], &[0.5]),
            Err(ActionError::TooFewRoots { .. })
        ));
        let mut csv = Vec::new();
        fit.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("lam,c1,c2\n"));
    }
}
