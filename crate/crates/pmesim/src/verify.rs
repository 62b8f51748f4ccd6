//! Weak-form residuals for the linear evolution of marginal laws, the `g_ε`
//! uniqueness diagnostic on solution differences, and conservation reporting.

use serde::Serialize;

use crate::elliptic::{g_eps_functional, g_eps_tolerance};
use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridDensity, SignedGridMeasure};
use crate::solver::PmeSolution;

/// Smooth decaying test function: Hermite polynomial times a Gaussian window,
/// `φ(x) = H_d((x-c)/s) e^{-((x-c)/s)²/2}`. Second derivatives in closed form.
#[derive(Clone, Copy, Debug)]
pub struct TestFunction {
    pub center: f64,
    pub scale: f64,
    pub degree: usize,
}

fn hermite(d: usize, y: f64) -> (f64, f64, f64) {
    // physicists' Hermite H_d with H' = 2d H_{d-1}, H'' = 4d(d-1) H_{d-2}
    let mut h = [1.0f64, 0.0, 0.0]; // H_{k}, H_{k-1}, H_{k-2}
    for k in 0..d {
        let next = 2.0 * y * h[0] - 2.0 * k as f64 * h[1];
        h[2] = h[1];
        h[1] = h[0];
        h[0] = next;
    }
    let hd = h[0];
    let d1 = if d >= 1 {
        2.0 * d as f64 * h[1]
    } else {
        0.0
    };
    let d2 = if d >= 2 {
        4.0 * (d * (d - 1)) as f64 * h[2]
    } else {
        0.0
    };
    (hd, d1, d2)
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        let y = (x - self.center) / self.scale;
        let (h, _, _) = hermite(self.degree, y);
        h * (-0.5 * y * y).exp()
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let y = (x - self.center) / self.scale;
        let (h, h1, h2) = hermite(self.degree, y);
        // (H e^g)'' with g = -y²/2: H'' + 2H'g' + H(g'² + g''), then 1/s² chain rule
        let psi2 = h2 + 2.0 * h1 * (-y) + h * (y * y - 1.0);
        psi2 * (-0.5 * y * y).exp() / (self.scale * self.scale)
    }
}

/// Default family: low-degree Hermite-Gaussians centered on a lattice over the grid.
pub fn default_test_family(grid: Grid1D, count: usize) -> Vec<TestFunction> {
    let count = count.max(1);
    let l = grid.half_width;
    let mut fns = Vec::with_capacity(count);
    let centers = (count + 2) / 3;
    let scale = l / 3.0;
    for j in 0..count {
        let ci = j % centers;
        let degree = j / centers;
        let center = if centers == 1 {
            0.0
        } else {
            -l / 2.0 + l * ci as f64 / (centers - 1) as f64
        };
        fns.push(TestFunction {
            center,
            scale,
            degree,
        });
    }
    fns
}

/// Max over the family of the weak-form defect
/// `|⟨φ,z(t)⟩ - ⟨φ,z⁰⟩ - Σ_s dt ⟨φ'' a(s,·), z(s)⟩|` at each time index.
pub fn fokker_planck_residual(
    z: &[GridDensity],
    times: &[f64],
    a: &[Vec<f64>],
    family: &[TestFunction],
) -> Result<Vec<f64>> {
    assert_eq!(z.len(), times.len());
    assert_eq!(a.len(), times.len());
    let grid = z[0].grid;
    for d in z {
        if d.grid != grid {
            return Err(Error::GridMismatch);
        }
    }
    let h = grid.h;
    let nodes: Vec<f64> = grid.nodes().collect();
    let mut out = vec![0.0; times.len()];
    for tf in family {
        let phi: Vec<f64> = nodes.iter().map(|&x| tf.eval(x)).collect();
        let phi2: Vec<f64> = nodes.iter().map(|&x| tf.second_derivative(x)).collect();
        let pair = |d: &GridDensity, w: &[f64]| -> f64 {
            h * d.values.iter().zip(w).map(|(v, p)| v * p).sum::<f64>()
        };
        let base = pair(&z[0], &phi);
        let mut integral = 0.0;
        for k in 1..times.len() {
            let dt = times[k] - times[k - 1];
            // right-endpoint rule, matching the implicit step structure
            let mut s = 0.0;
            for i in 0..grid.n {
                s += phi2[i] * a[k][i] * z[k].values[i];
            }
            integral += dt * h * s;
            let defect = (pair(&z[k], &phi) - base - integral).abs();
            if defect > out[k] {
                out[k] = defect;
            }
        }
    }
    Ok(out)
}

/// `g_ε(t)` table for the difference of two density timelines, per ε in the ladder.
#[derive(Debug, Serialize)]
pub struct GEpsTable {
    pub eps: Vec<f64>,
    pub times: Vec<f64>,
    /// `values[e][k]` = g_{eps[e]} at times[k].
    pub values: Vec<Vec<f64>>,
}

impl GEpsTable {
    pub fn max_over_time(&self, e: usize) -> f64 {
        self.values[e].iter().fold(0.0f64, |m, &v| m.max(v))
    }
}

pub fn uniqueness_diagnostic(
    z1: &[GridDensity],
    z2: &[GridDensity],
    times: &[f64],
    eps_ladder: &[f64],
) -> Result<GEpsTable> {
    assert_eq!(z1.len(), times.len());
    assert_eq!(z2.len(), times.len());
    let mut values = Vec::with_capacity(eps_ladder.len());
    for &eps in eps_ladder {
        let mut row = Vec::with_capacity(times.len());
        for k in 0..times.len() {
            let diff = SignedGridMeasure::difference(&z1[k], &z2[k])?;
            let g = g_eps_functional(eps, &diff)?;
            let tol = g_eps_tolerance(eps, diff.total_variation());
            debug_assert!(g >= -tol, "g_eps negative beyond tolerance: {g}");
            row.push(g);
        }
        values.push(row);
    }
    Ok(GEpsTable {
        eps: eps_ladder.to_vec(),
        times: times.to_vec(),
        values,
    })
}

/// Time series of the conservation/positivity diagnostics, with breach flags.
#[derive(Debug, Serialize)]
pub struct DiagnosticReport {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub min_value: Vec<f64>,
    pub linf: Vec<f64>,
    pub l2: Vec<f64>,
    pub mass_drift: f64,
    pub min_over_all: f64,
    /// `L²` norm over `[κ, T] × ℝ` (κ = T/10 by default).
    pub l2_kappa_t: f64,
    pub breaches: Vec<String>,
    pub pass: bool,
}

pub const MASS_TOL: f64 = 1e-6;
pub const POSITIVITY_TOL: f64 = 1e-12;

pub fn conservation_report(sol: &PmeSolution) -> DiagnosticReport {
    conservation_report_with_kappa(sol, sol.times.last().copied().unwrap_or(0.0) / 10.0)
}

pub fn conservation_report_with_kappa(sol: &PmeSolution, kappa: f64) -> DiagnosticReport {
    let mut mass = Vec::with_capacity(sol.n_times());
    let mut min_value = Vec::with_capacity(sol.n_times());
    let mut linf = Vec::with_capacity(sol.n_times());
    let mut l2 = Vec::with_capacity(sol.n_times());
    for k in 0..sol.n_times() {
        let d = sol.density_at(k);
        mass.push(d.mass());
        min_value.push(d.min_value());
        linf.push(d.norm_linf());
        l2.push(d.norm_l2());
    }
    let mass0 = mass.first().copied().unwrap_or(0.0);
    let mass_drift = mass
        .iter()
        .fold(0.0f64, |m, &v| m.max((v - mass0).abs()));
    let min_over_all = min_value.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let sup0 = linf.first().copied().unwrap_or(0.0);
    // squared L2 in space-time over [kappa, T]
    let mut l2_acc = 0.0;
    for k in 1..sol.n_times() {
        if sol.times[k] >= kappa {
            l2_acc += (sol.times[k] - sol.times[k - 1]) * l2[k] * l2[k];
        }
    }
    let mut breaches = vec![];
    if mass_drift > MASS_TOL {
        breaches.push(format!("mass drift {mass_drift} exceeds {MASS_TOL}"));
    }
    if min_over_all < -POSITIVITY_TOL {
        let k = min_value
            .iter()
            .position(|&v| v == min_over_all)
            .unwrap_or(0);
        breaches.push(format!(
            "negative value {min_over_all} at t = {}",
            sol.times[k]
        ));
    }
    for (k, &v) in linf.iter().enumerate() {
        if v > sup0 + 1e-12 {
            breaches.push(format!("sup norm grew to {v} at t = {}", sol.times[k]));
            break;
        }
    }
    DiagnosticReport {
        times: sol.times.clone(),
        mass,
        min_value,
        linf,
        l2,
        mass_drift,
        min_over_all,
        l2_kappa_t: l2_acc.sqrt(),
        breaches: breaches.clone(),
        pass: breaches.is_empty(),
    }
}
