//! Maximal monotone graphs `β ⊂ ℝ×ℝ` and diffusivity maps `Φ` with `β(u) = Φ²(u)u`.
//!
//! A graph is stored as a finite list of single-valued monotone branches plus
//! explicit jump intervals. The scalar resolvent `(I + λβ)⁻¹` is solved exactly
//! per branch for piecewise-linear graphs and by monotone bisection otherwise.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Bisection tolerance for generic (callable) branches.
const BISECT_TOL: f64 = 1e-12;
/// Number of scan points used to validate monotonicity of `u -> Phi^2(u)u`.
const SCAN_POINTS: usize = 10_000;
/// u below this threshold is treated as vanishing in the chi selection.
pub const CHI_ZERO_THRESHOLD: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Diffusivity specification; `β(u) = Φ²(u)u`.
#[derive(Clone)]
pub struct PhiSpec {
    pub kind: PhiKind,
    /// `c₁ ∈ Φ(0)`: the value assigned to the diffusion coefficient where u vanishes.
    /// Defaults to the liminf of `Φ` at 0 (lower-semicontinuous convention).
    pub zero_value: f64,
}

#[derive(Clone)]
pub enum PhiKind {
    Constant(f64),
    /// `Φ(u) = low` for `u < threshold`, `high` for `u > threshold`,
    /// multivalued `[low, high]` at the threshold.
    HeavisideJump {
        threshold: f64,
        low: f64,
        high: f64,
    },
    /// Single-valued continuous `Φ` with a declared uniform bound.
    Lipschitz { f: ScalarFn, bound: f64 },
    /// `Φ_ε = base + ε`.
    RegularizedSum { base: Box<PhiSpec>, epsilon: f64 },
}

impl PhiSpec {
    pub fn constant(c: f64) -> Self {
        assert!(c >= 0.0 && c.is_finite());
        PhiSpec {
            kind: PhiKind::Constant(c),
            zero_value: c,
        }
    }

    pub fn heaviside(threshold: f64, low: f64, high: f64) -> Self {
        assert!(threshold > 0.0, "jump must sit at a positive point");
        assert!(low >= 0.0 && high >= low);
        PhiSpec {
            kind: PhiKind::HeavisideJump {
                threshold,
                low,
                high,
            },
            // liminf at 0: below the (positive) threshold Phi is identically `low`.
            zero_value: low,
        }
    }

    pub fn lipschitz(f: impl Fn(f64) -> f64 + Send + Sync + 'static, bound: f64) -> Self {
        let f: ScalarFn = Arc::new(f);
        let zero_value = f(0.0);
        PhiSpec {
            kind: PhiKind::Lipschitz { f, bound },
            zero_value,
        }
    }

    pub fn regularized(base: PhiSpec, epsilon: f64) -> Self {
        assert!(epsilon >= 0.0);
        let zero_value = base.zero_value + epsilon;
        PhiSpec {
            kind: PhiKind::RegularizedSum {
                base: Box::new(base),
                epsilon,
            },
            zero_value,
        }
    }

    pub fn with_zero_value(mut self, c1: f64) -> Self {
        self.zero_value = c1;
        self
    }

    /// The full value set `Φ(u)` as a closed interval `[lo, hi]`.
    pub fn eval_interval(&self, u: f64) -> (f64, f64) {
        match &self.kind {
            PhiKind::Constant(c) => (*c, *c),
            PhiKind::HeavisideJump {
                threshold,
                low,
                high,
            } => {
                if u < *threshold {
                    (*low, *low)
                } else if u > *threshold {
                    (*high, *high)
                } else {
                    (*low, *high)
                }
            }
            PhiKind::Lipschitz { f, .. } => {
                let v = f(u);
                (v, v)
            }
            PhiKind::RegularizedSum { base, epsilon } => {
                let (lo, hi) = base.eval_interval(u);
                (lo + epsilon, hi + epsilon)
            }
        }
    }

    /// Lower-semicontinuous selection `inf Φ(u)`.
    pub fn eval_lsc(&self, u: f64) -> f64 {
        self.eval_interval(u).0
    }

    /// Uniform upper bound on `Φ`.
    pub fn sup_phi(&self) -> f64 {
        match &self.kind {
            PhiKind::Constant(c) => *c,
            PhiKind::HeavisideJump { low, high, .. } => low.max(*high),
            PhiKind::Lipschitz { bound, .. } => *bound,
            PhiKind::RegularizedSum { base, epsilon } => base.sup_phi() + epsilon,
        }
    }

    /// Non-degeneracy bound `c₀` with `Φ ≥ c₀ > 0`, when one is known analytically.
    pub fn nondegeneracy_bound(&self) -> Option<f64> {
        let c0 = match &self.kind {
            PhiKind::Constant(c) => *c,
            PhiKind::HeavisideJump { low, high, .. } => low.min(*high),
            PhiKind::Lipschitz { .. } => return None,
            PhiKind::RegularizedSum { base, epsilon } => {
                base.nondegeneracy_bound().unwrap_or(0.0) + epsilon
            }
        };
        (c0 > 0.0).then_some(c0)
    }
}

/// One single-valued monotone piece of the graph on an interval.
#[derive(Clone)]
pub(crate) enum BranchFn {
    Linear { slope: f64 },
    Callable(ScalarFn),
}

#[derive(Clone)]
pub(crate) struct Branch {
    pub lo: f64,
    pub hi: f64,
    pub f: BranchFn,
}

impl Branch {
    fn eval(&self, x: f64) -> f64 {
        match &self.f {
            BranchFn::Linear { slope } => slope * x,
            BranchFn::Callable(f) => f(x),
        }
    }
}

/// Jump of the graph: value set `[w_lo, w_hi]` at the point `x`.
#[derive(Clone, Copy, Debug)]
pub struct Jump {
    pub x: f64,
    pub w_lo: f64,
    pub w_hi: f64,
}

/// A maximal monotone graph on ℝ with `β(0) = 0` and linear growth.
#[derive(Clone)]
pub struct MonotoneGraph {
    branches: Vec<Branch>,
    jumps: Vec<Jump>,
    growth_constant: f64,
}

/// `Φ` flattened to a canonical shape for graph construction.
enum FlatPhi {
    Constant(f64),
    Jump { threshold: f64, low: f64, high: f64 },
    Generic { f: ScalarFn, bound: f64 },
}

fn flatten(phi: &PhiSpec) -> FlatPhi {
    match &phi.kind {
        PhiKind::Constant(c) => FlatPhi::Constant(*c),
        PhiKind::HeavisideJump {
            threshold,
            low,
            high,
        } => FlatPhi::Jump {
            threshold: *threshold,
            low: *low,
            high: *high,
        },
        PhiKind::Lipschitz { f, bound } => FlatPhi::Generic {
            f: f.clone(),
            bound: *bound,
        },
        PhiKind::RegularizedSum { base, epsilon } => match flatten(base) {
            FlatPhi::Constant(c) => FlatPhi::Constant(c + epsilon),
            FlatPhi::Jump {
                threshold,
                low,
                high,
            } => FlatPhi::Jump {
                threshold,
                low: low + epsilon,
                high: high + epsilon,
            },
            FlatPhi::Generic { f, bound } => {
                let eps = *epsilon;
                FlatPhi::Generic {
                    f: Arc::new(move |u| f(u) + eps),
                    bound: bound + eps,
                }
            }
        },
    }
}

impl MonotoneGraph {
    /// Build the jump-completed maximal monotone graph of `u -> Φ²(u)u`.
    ///
    /// Generic (callable) `Φ` is validated by a scan over `[-u_max, u_max]`:
    /// the composite must be nondecreasing and `Φ` must respect its declared bound.
    pub fn from_phi(phi: &PhiSpec) -> Result<Self> {
        Self::from_phi_with_scan(phi, 10.0)
    }

    pub fn from_phi_with_scan(phi: &PhiSpec, u_max: f64) -> Result<Self> {
        match flatten(phi) {
            FlatPhi::Constant(c) => Ok(MonotoneGraph {
                branches: vec![Branch {
                    lo: f64::NEG_INFINITY,
                    hi: f64::INFINITY,
                    f: BranchFn::Linear { slope: c * c },
                }],
                jumps: vec![],
                growth_constant: c * c,
            }),
            FlatPhi::Jump {
                threshold,
                low,
                high,
            } => {
                let (s_lo, s_hi) = (low * low, high * high);
                let mut branches = vec![
                    Branch {
                        lo: f64::NEG_INFINITY,
                        hi: threshold,
                        f: BranchFn::Linear { slope: s_lo },
                    },
                    Branch {
                        lo: threshold,
                        hi: f64::INFINITY,
                        f: BranchFn::Linear { slope: s_hi },
                    },
                ];
                let mut jumps = vec![];
                if s_hi > s_lo {
                    jumps.push(Jump {
                        x: threshold,
                        w_lo: s_lo * threshold,
                        w_hi: s_hi * threshold,
                    });
                } else {
                    // no actual discontinuity; merge into one branch
                    branches = vec![Branch {
                        lo: f64::NEG_INFINITY,
                        hi: f64::INFINITY,
                        f: BranchFn::Linear { slope: s_lo },
                    }];
                }
                Ok(MonotoneGraph {
                    branches,
                    jumps,
                    growth_constant: s_lo.max(s_hi),
                })
            }
            FlatPhi::Generic { f, bound } => {
                let beta = {
                    let f = f.clone();
                    move |u: f64| {
                        let p = f(u);
                        p * p * u
                    }
                };
                // scan for monotonicity of the composite and boundedness of Phi
                let mut prev_u = -u_max;
                let mut prev_b = beta(prev_u);
                for k in 0..=SCAN_POINTS {
                    let u = -u_max + 2.0 * u_max * (k as f64) / (SCAN_POINTS as f64);
                    let p = f(u);
                    if p.abs() > bound * (1.0 + 1e-12) {
                        return Err(Error::UnboundedPhi {
                            at: u,
                            value: p,
                            bound,
                        });
                    }
                    let b = beta(u);
                    if b < prev_b - 1e-14 * (1.0 + prev_b.abs()) {
                        return Err(Error::NonMonotoneComposite {
                            at: u,
                            delta: b - prev_b,
                        });
                    }
                    prev_u = u;
                    prev_b = b;
                }
                let _ = prev_u;
                Ok(MonotoneGraph {
                    branches: vec![Branch {
                        lo: f64::NEG_INFINITY,
                        hi: f64::INFINITY,
                        f: BranchFn::Callable(Arc::new(beta)),
                    }],
                    jumps: vec![],
                    growth_constant: bound * bound,
                })
            }
        }
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// The full value set `β(x)` as a closed interval.
    pub fn eval_section(&self, x: f64) -> (f64, f64) {
        for j in &self.jumps {
            if x == j.x {
                return (j.w_lo, j.w_hi);
            }
        }
        for b in &self.branches {
            if x >= b.lo && x <= b.hi {
                let w = b.eval(x);
                return (w, w);
            }
        }
        // branches cover the line; unreachable for well-formed graphs
        unreachable!("graph branches do not cover x = {x}")
    }

    /// Solve `x + λw = y`, `w ∈ β(x)`. Returns `(x, w)` with the equation exact
    /// up to solver tolerance; the map `y -> x` is a monotone contraction.
    pub fn scalar_resolvent(&self, lambda: f64, y: f64) -> Result<(f64, f64)> {
        debug_assert!(lambda > 0.0);
        if y == 0.0 {
            return Ok((0.0, 0.0));
        }
        // jump case: y lands inside [x + lam*w_lo, x + lam*w_hi]
        for j in &self.jumps {
            if y >= j.x + lambda * j.w_lo && y <= j.x + lambda * j.w_hi {
                return Ok((j.x, (y - j.x) / lambda));
            }
        }
        for b in &self.branches {
            match &b.f {
                BranchFn::Linear { slope } => {
                    let x = y / (1.0 + lambda * slope);
                    if x >= b.lo && x <= b.hi {
                        return Ok((x, slope * x));
                    }
                }
                BranchFn::Callable(f) => {
                    let g = |x: f64| x + lambda * f(x);
                    let mut lo = f64::min(y, 0.0) - y.abs() - 1.0;
                    let mut hi = f64::max(y, 0.0) + y.abs() + 1.0;
                    let mut expand = 0;
                    while g(lo) > y || g(hi) < y {
                        lo = 2.0 * lo - 1.0;
                        hi = 2.0 * hi + 1.0;
                        expand += 1;
                        if expand > 60 {
                            return Err(Error::ResolventBracketFailure { lambda, y });
                        }
                    }
                    while hi - lo > BISECT_TOL * (1.0 + lo.abs().max(hi.abs())) {
                        let mid = 0.5 * (lo + hi);
                        if g(mid) < y {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    // the resolvent preserves sign and never overshoots y
                    // (λβ(x) = y − x with β(x) between 0 and β(y) in sign);
                    // clamp away the bisection tolerance so that downstream
                    // positivity of both x and w is exact
                    let x = 0.5 * (lo + hi);
                    let x = if y > 0.0 {
                        x.clamp(0.0, y)
                    } else {
                        x.clamp(y, 0.0)
                    };
                    return Ok((x, (y - x) / lambda));
                }
            }
        }
        Err(Error::ResolventBracketFailure { lambda, y })
    }
}

/// The diffusion-coefficient selection `χ_u = sqrt(η/u)` with convention
/// `χ_u = c₁ ∈ Φ(0)` where u vanishes.
pub fn chi_selection(u: f64, eta: f64, phi: &PhiSpec) -> Result<f64> {
    chi_selection_with_threshold(u, eta, phi, CHI_ZERO_THRESHOLD)
}

pub fn chi_selection_with_threshold(
    u: f64,
    eta: f64,
    phi: &PhiSpec,
    threshold: f64,
) -> Result<f64> {
    if u <= threshold {
        return Ok(phi.zero_value);
    }
    if eta < 0.0 {
        return Err(Error::NegativeRatio { u, eta });
    }
    Ok((eta / u).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn heaviside_graph() -> MonotoneGraph {
        MonotoneGraph::from_phi(&PhiSpec::heaviside(1.0, 0.0, 1.0)).unwrap()
    }

    #[test]
    fn heaviside_completion() {
        let g = heaviside_graph();
        assert_eq!(g.eval_section(0.5), (0.0, 0.0));
        assert_eq!(g.eval_section(1.0), (0.0, 1.0));
        assert_eq!(g.eval_section(2.0), (2.0, 2.0));
    }

    #[test]
    fn constant_phi_is_identity_graph() {
        let g = MonotoneGraph::from_phi(&PhiSpec::constant(1.0)).unwrap();
        for x in [-3.0, -0.5, 0.0, 0.7, 4.2] {
            assert_eq!(g.eval_section(x), (x, x));
        }
    }

    #[test]
    fn regularized_heaviside_graph() {
        // (H(x-1)+0.5)^2 x: slope 0.25 below, jump [0.25, 2.25] at 1, slope 2.25 above
        let phi = PhiSpec::regularized(PhiSpec::heaviside(1.0, 0.0, 1.0), 0.5);
        let g = MonotoneGraph::from_phi(&phi).unwrap();
        assert_relative_eq!(g.eval_section(0.5).0, 0.125);
        assert_eq!(g.eval_section(1.0), (0.25, 2.25));
        assert_relative_eq!(g.eval_section(2.0).0, 4.5);
    }

    #[test]
    fn resolvent_examples() {
        let g = heaviside_graph();
        let (x, w) = g.scalar_resolvent(1.0, 0.5).unwrap();
        assert_relative_eq!(x, 0.5);
        assert_relative_eq!(w, 0.0);

        let (x, w) = g.scalar_resolvent(1.0, 1.5).unwrap();
        assert_relative_eq!(x, 1.0);
        assert_relative_eq!(w, 0.5);

        let (x, w) = g.scalar_resolvent(1.0, 3.0).unwrap();
        assert_relative_eq!(x, 1.5);
        assert_relative_eq!(w, 1.5);
    }

    #[test]
    fn resolvent_at_zero_is_exact() {
        let g = heaviside_graph();
        assert_eq!(g.scalar_resolvent(0.37, 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn resolvent_roundtrip_callable() {
        // beta(u) = |u| u via Phi = sqrt(|u|), bounded on the scan range
        let phi = PhiSpec::lipschitz(|u: f64| u.abs().sqrt(), 4.0);
        let g = MonotoneGraph::from_phi(&phi).unwrap();
        for &y in &[0.3, -1.7, 2.5, 9.0] {
            for &lam in &[0.1, 1.0, 10.0] {
                let (x, w) = g.scalar_resolvent(lam, y).unwrap();
                assert!((x + lam * w - y).abs() <= 10.0 * BISECT_TOL * (1.0 + y.abs()));
                let (wl, wh) = g.eval_section(x);
                assert!(w >= wl - 1e-6 && w <= wh + 1e-6);
            }
        }
    }

    #[test]
    fn nonmonotone_composite_rejected() {
        let phi = PhiSpec::lipschitz(|u: f64| (-u).exp().min(3.0), 3.0);
        // Phi^2(u) u = e^{-2u} u decreases for u > 1/2
        assert!(matches!(
            MonotoneGraph::from_phi(&phi),
            Err(Error::NonMonotoneComposite { .. })
        ));
    }

    #[test]
    fn unbounded_phi_rejected() {
        let phi = PhiSpec::lipschitz(|u: f64| 1.0 + u.abs(), 2.0);
        assert!(matches!(
            MonotoneGraph::from_phi(&phi),
            Err(Error::UnboundedPhi { .. })
        ));
    }

    #[test]
    fn chi_selection_examples() {
        let phi = PhiSpec::heaviside(1.0, 0.0, 1.0);
        assert_relative_eq!(chi_selection(2.0, 2.0, &phi).unwrap(), 1.0);
        assert_relative_eq!(chi_selection(0.5, 0.0, &phi).unwrap(), 0.0);
        let phi = phi.with_zero_value(0.5);
        assert_relative_eq!(chi_selection(0.0, 0.0, &phi).unwrap(), 0.5);
        assert!(matches!(
            chi_selection(0.5, -1.0, &PhiSpec::constant(1.0)),
            Err(Error::NegativeRatio { .. })
        ));
    }

    #[test]
    fn growth_bound_on_samples() {
        let g = heaviside_graph();
        let c = g.growth_constant();
        assert_relative_eq!(c, 1.0);
        let mut u = -5.0;
        while u <= 5.0 {
            let (wl, wh) = g.eval_section(u);
            assert!(wl.abs() <= c * u.abs() + 1e-12);
            assert!(wh.abs() <= c * u.abs() + 1e-12);
            u += 0.093;
        }
    }

    #[test]
    fn nondegeneracy_bounds() {
        assert_eq!(
            PhiSpec::heaviside(1.0, 0.0, 1.0).nondegeneracy_bound(),
            None
        );
        assert_eq!(
            PhiSpec::regularized(PhiSpec::heaviside(1.0, 0.0, 1.0), 0.5).nondegeneracy_bound(),
            Some(0.5)
        );
        assert_eq!(PhiSpec::constant(2.0).nondegeneracy_bound(), Some(2.0));
    }
}
