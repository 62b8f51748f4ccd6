//! Discrete densities, signed measures, and particle ensembles on a truncated
//! uniform grid `[-L, L]` with nodes at cell centers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Uniform 1D grid on `[-L, L]`, `n` cells, nodes at cell centers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    pub half_width: f64,
    pub n: usize,
    pub h: f64,
}

impl Grid1D {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half_width must be positive, got {half_width}"
            )));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("need n >= 8 cells, got {n}")));
        }
        Ok(Grid1D {
            half_width,
            n,
            h: 2.0 * half_width / n as f64,
        })
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.node(i))
    }

    /// Index of the cell containing `x`, or None outside the domain.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if x < -self.half_width || x > self.half_width {
            return None;
        }
        let i = ((x + self.half_width) / self.h).floor() as usize;
        Some(i.min(self.n - 1))
    }
}

/// Pointwise values of a function on the grid nodes.
#[derive(Clone, Debug)]
pub struct GridDensity {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n);
        GridDensity { grid, values }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        GridDensity {
            grid,
            values: vec![0.0; grid.n],
        }
    }

    /// Discretize a pointwise function at the grid nodes.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        GridDensity { grid, values }
    }

    /// Standard Gaussian-family density `N(mean, var)` discretized at nodes.
    pub fn gaussian(grid: Grid1D, mean: f64, var: f64) -> Self {
        let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
        Self::from_fn(grid, |x| norm * (-0.5 * (x - mean).powi(2) / var).exp())
    }

    pub fn mass(&self) -> f64 {
        self.grid.h * self.values.iter().sum::<f64>()
    }

    pub fn norm_linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm_l1(&self) -> f64 {
        self.grid.h * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn norm_l2(&self) -> f64 {
        (self.grid.h * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.grid.h
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    /// 1D Wasserstein-1 distance via the CDF difference.
    pub fn wasserstein1(&self, other: &GridDensity) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let h = self.grid.h;
        let mut cdf_a = 0.0;
        let mut cdf_b = 0.0;
        let mut acc = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            cdf_a += a * h;
            cdf_b += b * h;
            acc += (cdf_a - cdf_b).abs();
        }
        Ok(h * acc)
    }

    /// Resample onto `target` by nearest-cell lookup (piecewise-constant view).
    /// Used to inject coarse-grid solutions onto a finer common grid.
    pub fn resample(&self, target: Grid1D) -> GridDensity {
        let values = target
            .nodes()
            .map(|x| match self.grid.cell_of(x) {
                Some(i) => self.values[i],
                None => 0.0,
            })
            .collect();
        GridDensity {
            grid: target,
            values,
        }
    }

    /// The signed measure assigning each cell its `h`-weighted value.
    pub fn to_measure(&self) -> SignedGridMeasure {
        SignedGridMeasure {
            grid: self.grid,
            weights: self.values.iter().map(|v| v * self.grid.h).collect(),
            atoms: vec![],
        }
    }
}

/// Signed measure on the grid: one weight per cell plus optional point atoms.
#[derive(Clone, Debug)]
pub struct SignedGridMeasure {
    pub grid: Grid1D,
    pub weights: Vec<f64>,
    /// Dirac parts as (position, mass).
    pub atoms: Vec<(f64, f64)>,
}

impl SignedGridMeasure {
    pub fn zeros(grid: Grid1D) -> Self {
        SignedGridMeasure {
            grid,
            weights: vec![0.0; grid.n],
            atoms: vec![],
        }
    }

    pub fn dirac(grid: Grid1D, x: f64, mass: f64) -> Self {
        SignedGridMeasure {
            grid,
            weights: vec![0.0; grid.n],
            atoms: vec![(x, mass)],
        }
    }

    pub fn total_variation(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum::<f64>()
            + self.atoms.iter().map(|(_, m)| m.abs()).sum::<f64>()
    }

    pub fn difference(a: &GridDensity, b: &GridDensity) -> Result<SignedGridMeasure> {
        if a.grid != b.grid {
            return Err(Error::GridMismatch);
        }
        Ok(SignedGridMeasure {
            grid: a.grid,
            weights: a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| (x - y) * a.grid.h)
                .collect(),
            atoms: vec![],
        })
    }
}

/// N particle positions at a common time, with RNG provenance.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub time: f64,
    pub master_seed: u64,
}

impl ParticleEnsemble {
    pub fn count(&self) -> usize {
        self.positions.len()
    }

    pub fn mean(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.count() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.positions.iter().map(|x| (x - m).powi(2)).sum::<f64>() / self.count() as f64
    }
}

/// Deterministic per-particle RNG stream derived from the master seed.
pub fn particle_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Stream id reserved for initial-condition sampling.
pub const INIT_STREAM_OFFSET: u64 = 1 << 32;

/// Silverman-type default bandwidth `1.06 σ̂ N^{-1/5}`.
pub fn silverman_bandwidth(ensemble: &ParticleEnsemble) -> f64 {
    let sigma = ensemble.variance().sqrt();
    1.06 * sigma * (ensemble.count() as f64).powf(-0.2)
}

/// Gaussian kernel density estimate of the ensemble, evaluated at grid nodes.
///
/// Each kernel is truncated at 8 bandwidths (relative mass < 1e-15).
pub fn kde_density(
    ensemble: &ParticleEnsemble,
    bandwidth: f64,
    grid: Grid1D,
) -> GridDensity {
    assert!(bandwidth > 0.0);
    let n = grid.n;
    let inv_bw = 1.0 / bandwidth;
    let norm = 1.0 / (ensemble.count() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let cutoff = 8.0 * bandwidth;
    // fixed chunking with ordered sequential reduction keeps the float
    // summation order independent of the thread schedule
    let partials: Vec<Vec<f64>> = ensemble
        .positions
        .par_chunks(4096)
        .map(|chunk| {
            let mut acc = vec![0.0f64; n];
            for &p in chunk {
                let lo = (((p - cutoff) + grid.half_width) / grid.h - 0.5)
                    .ceil()
                    .max(0.0) as usize;
                let hi_f = (((p + cutoff) + grid.half_width) / grid.h - 0.5).floor();
                if hi_f < 0.0 {
                    continue;
                }
                let hi = (hi_f as usize).min(n - 1);
                for i in lo..=hi {
                    let z = (grid.node(i) - p) * inv_bw;
                    acc[i] += (-0.5 * z * z).exp();
                }
            }
            acc
        })
        .collect();
    let mut values = vec![0.0f64; n];
    for part in partials {
        for (v, p) in values.iter_mut().zip(part) {
            *v += p;
        }
    }
    GridDensity {
        grid,
        values: values.into_iter().map(|v| v * norm).collect(),
    }
}

/// Draw `n` i.i.d. samples from the piecewise-constant density `u0` by inverse CDF.
pub fn sample_initial(
    u0: &GridDensity,
    n: usize,
    master_seed: u64,
) -> Result<ParticleEnsemble> {
    if n == 0 {
        return Err(Error::ZeroMass);
    }
    let h = u0.grid.h;
    let mut cum = Vec::with_capacity(u0.values.len());
    let mut acc = 0.0;
    for v in &u0.values {
        acc += v.max(0.0) * h;
        cum.push(acc);
    }
    let mass = acc;
    if mass <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let positions = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = particle_rng(master_seed, INIT_STREAM_OFFSET + k as u64);
            let v: f64 = rng.gen::<f64>() * mass;
            let cell = cum.partition_point(|&c| c < v);
            let cell = cell.min(u0.values.len() - 1);
            let prev = if cell == 0 { 0.0 } else { cum[cell - 1] };
            let dens = u0.values[cell].max(0.0);
            let left = -u0.grid.half_width + cell as f64 * h;
            if dens > 0.0 {
                left + (v - prev) / dens
            } else {
                left + 0.5 * h
            }
        })
        .collect();
    Ok(ParticleEnsemble {
        positions,
        time: 0.0,
        master_seed,
    })
}
