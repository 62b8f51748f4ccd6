//! Implicit resolvent scheme for `∂ₜu ∈ ½ ∂²ₓₓ β(u)`.
//!
//! One time step solves `u - λ Δ_h w = u_prev` with `w ∈ ½β(u)` at every node
//! (homogeneous Dirichlet ghost values for w), via symmetric nonlinear
//! Gauss-Seidel where each node update is an exact scalar resolvent.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridDensity};
use crate::monotone_graph::{chi_selection_with_threshold, MonotoneGraph, PhiSpec, CHI_ZERO_THRESHOLD};

#[derive(Clone, Debug, Serialize)]
pub struct PmeConfig {
    #[serde(skip)]
    pub grid: Grid1D,
    pub t_final: f64,
    pub n_steps: usize,
    /// Inner Gauss-Seidel stopping tolerance on the l-inf system residual.
    pub gs_tol: f64,
    pub gs_max_sweeps: usize,
}

impl PmeConfig {
    pub fn new(grid: Grid1D, t_final: f64, n_steps: usize) -> Self {
        assert!(t_final > 0.0 && n_steps > 0);
        PmeConfig {
            grid,
            t_final,
            n_steps,
            gs_tol: 1e-10,
            gs_max_sweeps: 100_000,
        }
    }

    pub fn step(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }
}

/// Full space-time trajectory: u, the selection `η ∈ β(u)`, and per-step times.
#[derive(Clone, Debug)]
pub struct PmeSolution {
    pub grid: Grid1D,
    pub times: Vec<f64>,
    /// `u[k]` is the density at `times[k]`.
    pub u: Vec<Vec<f64>>,
    /// `eta[k][i] ∈ β(u[k][i])`; `eta[0]` is copied from the first step.
    pub eta: Vec<Vec<f64>>,
}

impl PmeSolution {
    pub fn density_at(&self, k: usize) -> GridDensity {
        GridDensity::new(self.grid, self.u[k].clone())
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }
}

/// One implicit step: solve `u - λ Δ_h w = u_prev`, `w ∈ ½β(u)` pointwise.
///
/// Returns `(u, w)`. The node equation under Gauss-Seidel is
/// `u_i + (λ/h²) η_i = rhs_i` with `η = 2w ∈ β(u)`, solved exactly by the
/// scalar resolvent with effective parameter `λ/h²`.
pub fn resolvent_step(
    u_prev: &GridDensity,
    lambda: f64,
    graph: &MonotoneGraph,
    gs_tol: f64,
    gs_max_sweeps: usize,
) -> Result<(GridDensity, GridDensity)> {
    assert!(lambda > 0.0);
    let grid = u_prev.grid;
    let n = grid.n;
    let h2 = grid.h * grid.h;
    let mu = lambda / h2; // effective resolvent parameter for eta = 2w
    let mut u = u_prev.values.clone();
    let mut w = vec![0.0f64; n];
    // initialize w from the section of beta at u_prev
    for i in 0..n {
        let (wl, wh) = graph.eval_section(u[i]);
        // midpoint of the section, halved (w ∈ ½β(u))
        w[i] = 0.25 * (wl + wh);
    }

    let neighbor_sum = |w: &[f64], i: usize| {
        let left = if i > 0 { w[i - 1] } else { 0.0 };
        let right = if i + 1 < n { w[i + 1] } else { 0.0 };
        left + right
    };

    let mut sweeps = 0;
    loop {
        // forward then backward sweep
        for i in 0..n {
            let rhs = u_prev.values[i] + mu * neighbor_sum(&w, i);
            let (x, eta) = graph.scalar_resolvent(mu, rhs)?;
            u[i] = x;
            w[i] = 0.5 * eta;
        }
        for i in (0..n).rev() {
            let rhs = u_prev.values[i] + mu * neighbor_sum(&w, i);
            let (x, eta) = graph.scalar_resolvent(mu, rhs)?;
            u[i] = x;
            w[i] = 0.5 * eta;
        }
        sweeps += 1;
        // l-inf residual of the full discrete system
        let mut res: f64 = 0.0;
        for i in 0..n {
            let lap = (neighbor_sum(&w, i) - 2.0 * w[i]) / h2;
            res = res.max((u[i] - lambda * lap - u_prev.values[i]).abs());
        }
        if res <= gs_tol {
            break;
        }
        if sweeps >= gs_max_sweeps {
            return Err(Error::NoConvergence {
                step: 0,
                sweeps,
                residual: res,
            });
        }
    }
    Ok((
        GridDensity::new(grid, u),
        GridDensity::new(grid, w),
    ))
}

/// Iterate the resolvent step over a uniform time mesh.
pub fn evolve(
    u0: &GridDensity,
    graph: &MonotoneGraph,
    cfg: &PmeConfig,
) -> Result<PmeSolution> {
    assert_eq!(u0.grid, cfg.grid);
    let lambda = cfg.step();
    let mut times = Vec::with_capacity(cfg.n_steps + 1);
    let mut u_all = Vec::with_capacity(cfg.n_steps + 1);
    let mut eta_all = Vec::with_capacity(cfg.n_steps + 1);
    times.push(0.0);
    u_all.push(u0.values.clone());
    let mut current = u0.clone();
    for k in 1..=cfg.n_steps {
        let (next, w) =
            resolvent_step(&current, lambda, graph, cfg.gs_tol, cfg.gs_max_sweeps).map_err(
                |e| match e {
                    Error::NoConvergence {
                        sweeps, residual, ..
                    } => Error::NoConvergence {
                        step: k,
                        sweeps,
                        residual,
                    },
                    other => other,
                },
            )?;
        times.push(k as f64 * lambda);
        eta_all.push(w.values.iter().map(|wi| 2.0 * wi).collect::<Vec<_>>());
        u_all.push(next.values.clone());
        current = next;
    }
    // eta at t=0 taken from the first step (the selection is defined dt-a.e.)
    let eta0 = eta_all.first().cloned().unwrap_or_else(|| vec![0.0; cfg.grid.n]);
    eta_all.insert(0, eta0);
    Ok(PmeSolution {
        grid: cfg.grid,
        times,
        u: u_all,
        eta: eta_all,
    })
}

/// The selection `η_u` with its sign checks: `u η ≥ 0` and `u = 0 ⇒ η = 0`.
pub fn extract_eta(sol: &PmeSolution, tol: f64) -> Result<Vec<Vec<f64>>> {
    for (k, (u_row, e_row)) in sol.u.iter().zip(&sol.eta).enumerate() {
        for (i, (&u, &eta)) in u_row.iter().zip(e_row).enumerate() {
            if u * eta < -tol || (u.abs() <= tol && eta.abs() > tol.sqrt()) {
                return Err(Error::SelectionViolation {
                    t_idx: k,
                    node: i,
                    u,
                    eta,
                });
            }
        }
    }
    Ok(sol.eta.clone())
}

/// The coefficient field `χ(t_k, x_i) = chi_selection(u, η)` on the solution mesh.
pub fn chi_field(sol: &PmeSolution, phi: &PhiSpec) -> Result<Vec<Vec<f64>>> {
    chi_field_with_threshold(sol, phi, CHI_ZERO_THRESHOLD)
}

pub fn chi_field_with_threshold(
    sol: &PmeSolution,
    phi: &PhiSpec,
    threshold: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = sol
        .u
        .iter()
        .zip(&sol.eta)
        .skip(1)
        .map(|(u_row, e_row)| {
            u_row
                .iter()
                .zip(e_row)
                .map(|(&u, &eta)| chi_selection_with_threshold(u, eta.max(0.0), phi, threshold))
                .collect()
        })
        .collect::<Result<_>>()?;
    // the selection is defined dt-a.e.; at t = 0 reuse the first step's row
    // (eta[0] is a copy of eta[1] and does not pair with u[0])
    let row0 = rows.first().cloned().unwrap_or_else(|| vec![phi.zero_value; sol.grid.n]);
    rows.insert(0, row0);
    Ok(rows)
}

/// Step-halving refinement data for one scenario.
#[derive(Debug, Serialize)]
pub struct RefinementReport {
    pub n_steps: Vec<usize>,
    pub final_l1_delta: Vec<f64>,
    pub ratios: Vec<f64>,
}

/// Compare runs with n, 2n, 4n, ... steps; reports successive final-time l1 gaps.
pub fn step_refinement(
    u0: &GridDensity,
    graph: &MonotoneGraph,
    base: &PmeConfig,
    levels: usize,
) -> Result<RefinementReport> {
    let mut finals = Vec::new();
    let mut steps = Vec::new();
    for lvl in 0..levels {
        let cfg = PmeConfig {
            n_steps: base.n_steps << lvl,
            ..base.clone()
        };
        let sol = evolve(u0, graph, &cfg)?;
        steps.push(cfg.n_steps);
        finals.push(sol.density_at(sol.n_times() - 1));
    }
    let mut deltas = Vec::new();
    for pair in finals.windows(2) {
        deltas.push(pair[0].l1_distance(&pair[1])?);
    }
    let ratios = deltas
        .windows(2)
        .map(|d| d[0] / d[1].max(1e-300))
        .collect();
    Ok(RefinementReport {
        n_steps: steps,
        final_l1_delta: deltas,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotone_graph::PhiSpec;

    fn heat_graph() -> MonotoneGraph {
        MonotoneGraph::from_phi(&PhiSpec::constant(1.0)).unwrap()
    }

    /// Thomas algorithm for the tridiagonal system (I - (lam/2) Δ_h) u = f,
    /// Dirichlet-zero ghosts. Independent oracle for the heat resolvent.
    fn tridiag_heat_solve(f: &[f64], lambda: f64, h: f64) -> Vec<f64> {
        let n = f.len();
        let r = 0.5 * lambda / (h * h);
        let a = -r; // sub
        let b = 1.0 + 2.0 * r; // diag
        let c = -r; // super
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = c / b;
        dp[0] = f[0] / b;
        for i in 1..n {
            let m = b - a * cp[i - 1];
            cp[i] = c / m;
            dp[i] = (f[i] - a * dp[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    }

    #[test]
    fn heat_resolvent_matches_tridiagonal_oracle() {
        let grid = Grid1D::new(6.0, 128).unwrap();
        let mut f = vec![0.0; 128];
        f[64] = 1.0 / grid.h; // delta-like single cell
        let u_prev = GridDensity::new(grid, f.clone());
        let lambda = 0.05;
        let (u, w) = resolvent_step(&u_prev, lambda, &heat_graph(), 1e-12, 100_000).unwrap();
        let oracle = tridiag_heat_solve(&f, lambda, grid.h);
        let max_diff = u
            .values
            .iter()
            .zip(&oracle)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(max_diff <= 1e-9, "diff vs tridiagonal oracle: {max_diff}");
        // beta = id => w = u/2
        for (wi, ui) in w.values.iter().zip(&u.values) {
            assert!((wi - 0.5 * ui).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_stays_zero() {
        let grid = Grid1D::new(6.0, 64).unwrap();
        let zero = GridDensity::zeros(grid);
        let (u, w) = resolvent_step(&zero, 0.1, &heat_graph(), 1e-12, 1000).unwrap();
        assert_eq!(u.norm_linf(), 0.0);
        assert_eq!(w.norm_linf(), 0.0);
        let graph = MonotoneGraph::from_phi(&PhiSpec::heaviside(1.0, 0.0, 1.0)).unwrap();
        let cfg = PmeConfig::new(grid, 1.0, 16);
        let sol = evolve(&zero, &graph, &cfg).unwrap();
        assert!(sol.u.iter().all(|row| row.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn below_threshold_constant_does_not_evolve() {
        let grid = Grid1D::new(6.0, 64).unwrap();
        let graph = MonotoneGraph::from_phi(&PhiSpec::heaviside(1.0, 0.0, 1.0)).unwrap();
        let c = 0.5; // below e_c = 1
        let u_prev = GridDensity::from_fn(grid, |_| c);
        let (u, w) = resolvent_step(&u_prev, 0.1, &graph, 1e-12, 1000).unwrap();
        for &ui in &u.values {
            assert!((ui - c).abs() <= 1e-12);
        }
        assert_eq!(w.norm_linf(), 0.0);
    }

    #[test]
    fn heat_flow_gaussian_oracle() {
        // du/dt = 1/2 u'' : N(0, 0.25) -> N(0, 0.25 + t)
        let grid = Grid1D::new(12.0, 512).unwrap();
        let u0 = GridDensity::gaussian(grid, 0.0, 0.25);
        let cfg = PmeConfig::new(grid, 1.0, 128);
        let sol = evolve(&u0, &heat_graph(), &cfg).unwrap();
        let exact = GridDensity::gaussian(grid, 0.0, 1.25);
        let err = sol
            .density_at(sol.n_times() - 1)
            .l1_distance(&exact)
            .unwrap();
        assert!(err <= 0.015, "heat-flow l1 error {err}");
    }

    #[test]
    fn linf_and_mass_invariants_heat() {
        let grid = Grid1D::new(12.0, 256).unwrap();
        let u0 = GridDensity::gaussian(grid, 0.3, 0.25);
        let cfg = PmeConfig::new(grid, 0.5, 64);
        let sol = evolve(&u0, &heat_graph(), &cfg).unwrap();
        let sup0 = u0.norm_linf();
        let mass0 = u0.mass();
        for k in 0..sol.n_times() {
            let d = sol.density_at(k);
            assert!(d.norm_linf() <= sup0 + 1e-12);
            assert!((d.mass() - mass0).abs() <= 1e-6);
            assert!(d.min_value() >= -1e-12);
        }
    }

    #[test]
    fn l1_contraction_pairwise() {
        let grid = Grid1D::new(8.0, 128).unwrap();
        let graph = MonotoneGraph::from_phi(&PhiSpec::heaviside(0.6, 0.0, 1.0)).unwrap();
        let u0 = GridDensity::gaussian(grid, -0.4, 0.3);
        let v0 = GridDensity::gaussian(grid, 0.5, 0.2);
        let cfg = PmeConfig::new(grid, 0.4, 32);
        let su = evolve(&u0, &graph, &cfg).unwrap();
        let sv = evolve(&v0, &graph, &cfg).unwrap();
        let mut prev = u0.l1_distance(&v0).unwrap();
        for k in 1..su.n_times() {
            let d = su.density_at(k).l1_distance(&sv.density_at(k)).unwrap();
            assert!(d <= prev + 1e-10, "l1 distance grew at step {k}");
            prev = d;
        }
    }

    #[test]
    fn eta_selection_heat_equals_u() {
        let grid = Grid1D::new(8.0, 128).unwrap();
        let u0 = GridDensity::gaussian(grid, 0.0, 0.5);
        let cfg = PmeConfig::new(grid, 0.2, 16);
        let sol = evolve(&u0, &heat_graph(), &cfg).unwrap();
        let eta = extract_eta(&sol, 1e-9).unwrap();
        for k in 1..sol.n_times() {
            for (e, u) in eta[k].iter().zip(&sol.u[k]) {
                assert!((e - u).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn eta_zero_below_threshold() {
        let grid = Grid1D::new(8.0, 128).unwrap();
        let graph = MonotoneGraph::from_phi(&PhiSpec::heaviside(1.0, 0.0, 1.0)).unwrap();
        // sup u0 well below e_c = 1
        let u0 = GridDensity::gaussian(grid, 0.0, 1.0); // peak ~0.4
        let cfg = PmeConfig::new(grid, 0.3, 16);
        let sol = evolve(&u0, &graph, &cfg).unwrap();
        let eta = extract_eta(&sol, 1e-9).unwrap();
        assert!(eta.iter().flatten().all(|&e| e.abs() <= 1e-12));
    }

    #[test]
    fn chi_field_examples() {
        let grid = Grid1D::new(8.0, 128).unwrap();
        // non-degenerate Phi = H(.-e_c) + 0.5 with u below threshold: chi = 0.5
        let phi = PhiSpec::regularized(PhiSpec::heaviside(1.0, 0.0, 1.0), 0.5);
        let graph = MonotoneGraph::from_phi(&phi).unwrap();
        let u0 = GridDensity::gaussian(grid, 0.0, 1.0);
        let cfg = PmeConfig::new(grid, 0.2, 8);
        let sol = evolve(&u0, &graph, &cfg).unwrap();
        let chi = chi_field(&sol, &phi).unwrap();
        for (row_u, row_c) in sol.u.iter().zip(&chi) {
            for (&u, &c) in row_u.iter().zip(row_c) {
                if u > 1e-4 {
                    // far enough above the solver noise floor that eta/u is clean
                    assert!((c - 0.5).abs() <= 1e-4, "chi {c} at u {u}");
                } else if u <= CHI_ZERO_THRESHOLD {
                    assert!((c - phi.zero_value).abs() <= 1e-12);
                }
                // between the thresholds eta is solver noise; chi only needs
                // to be finite and nonnegative there
                assert!(c.is_finite() && c >= 0.0);
            }
        }
        // constant Phi = 1 -> chi = 1 where u > 0
        let phi1 = PhiSpec::constant(1.0);
        let sol1 = evolve(&u0, &heat_graph(), &cfg).unwrap();
        let chi1 = chi_field(&sol1, &phi1).unwrap();
        for (row_u, row_c) in sol1.u.iter().zip(&chi1) {
            for (&u, &c) in row_u.iter().zip(row_c) {
                if u > 1e-4 {
                    assert!((c - 1.0).abs() <= 1e-4);
                }
            }
        }
    }

    #[test]
    fn step_halving_converges() {
        let grid = Grid1D::new(12.0, 256).unwrap();
        let u0 = GridDensity::gaussian(grid, 0.0, 0.25);
        let base = PmeConfig::new(grid, 0.5, 16);
        let rep = step_refinement(&u0, &heat_graph(), &base, 3).unwrap();
        assert!(rep.ratios.iter().all(|&r| r >= 1.5), "ratios {:?}", rep.ratios);
    }
}
