//! Wasserstein distances between particle ensembles and grid densities.
//!
//! Phase-space points carry `periodic_dims` torus coordinates followed by
//! Euclidean coordinates. Squared costs add the flat-torus distance (shortest
//! periodic displacement) and the Euclidean distance.

use std::collections::BTreeSet;

use crate::assignment;
use crate::error::{Result, VpmeError};
use crate::grid::ScalarField;
use crate::particles::{compensated_sum, ParticleEnsemble};

/// Cap on the exact assignment size.
pub const EXACT_CAP: usize = 4000;

const MASS_TOL: f64 = 1e-12;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    periodic_dims: usize,
    dims: usize,
    coords: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    /// `coords` holds `masses.len()` points of `dims` coordinates each, the
    /// first `periodic_dims` of which live on the unit torus.
    pub fn new(periodic_dims: usize, dims: usize, coords: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if dims == 0 || periodic_dims > dims {
            return Err(VpmeError::InvalidMeasure(format!(
                "{periodic_dims} periodic of {dims} coordinates"
            )));
        }
        if coords.len() != dims * masses.len() {
            return Err(VpmeError::InvalidMeasure(format!(
                "{} coordinates for {} points of dimension {dims}",
                coords.len(),
                masses.len()
            )));
        }
        if masses.is_empty() {
            return Err(VpmeError::InvalidMeasure("empty measure".into()));
        }
        if coords.iter().chain(&masses).any(|v| !v.is_finite()) {
            return Err(VpmeError::NonFinite);
        }
        if masses.iter().any(|&m| m <= 0.0) {
            return Err(VpmeError::InvalidMeasure("non-positive mass".into()));
        }
        let total = compensated_sum(&masses);
        if (total - 1.0).abs() > MASS_TOL {
            return Err(VpmeError::InvalidMeasure(format!("total mass {total}")));
        }
        Ok(Self {
            periodic_dims,
            dims,
            coords,
            masses,
        })
    }

    /// Equal masses `1/M`.
    pub fn uniform(periodic_dims: usize, dims: usize, coords: Vec<f64>) -> Result<Self> {
        let m = coords.len() / dims.max(1);
        let mass = 1.0 / m.max(1) as f64;
        Self::new(periodic_dims, dims, coords, vec![mass; m])
    }

    /// Points on the real line with equal masses.
    pub fn on_line(samples: &[f64]) -> Result<Self> {
        Self::uniform(0, 1, samples.to_vec())
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn periodic_dims(&self) -> usize {
        self.periodic_dims
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dims..(i + 1) * self.dims]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn is_uniform(&self) -> bool {
        let m = 1.0 / self.len() as f64;
        self.masses.iter().all(|&w| (w - m).abs() <= MASS_TOL * m.max(1e-300) + 1e-15)
    }

    /// Squared distance between a point of `self` and one of `other`.
    pub fn cost(&self, i: usize, other: &Self, j: usize) -> f64 {
        let a = self.point(i);
        let b = other.point(j);
        let mut c = 0.0;
        for k in 0..self.dims {
            let mut d = a[k] - b[k];
            if k < self.periodic_dims {
                d -= d.round();
            }
            c += d * d;
        }
        c
    }
}

fn same_space(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dims != nu.dims || mu.periodic_dims != nu.periodic_dims {
        return Err(VpmeError::DimensionError(format!(
            "measures in different spaces ({}/{} vs {}/{})",
            mu.periodic_dims, mu.dims, nu.periodic_dims, nu.dims
        )));
    }
    Ok(())
}

/// Exact `W_2` between two equal-size, equal-mass measures via optimal
/// assignment.
pub fn w2_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    same_space(mu, nu)?;
    if mu.len() != nu.len() {
        return Err(VpmeError::SizeMismatch(mu.len(), nu.len()));
    }
    if mu.len() > EXACT_CAP {
        return Err(VpmeError::TooLarge(mu.len(), EXACT_CAP));
    }
    if !mu.is_uniform() || !nu.is_uniform() {
        return Err(VpmeError::InvalidMeasure("exact solver needs equal masses".into()));
    }
    let m = mu.len();
    let plan = assignment::solve(m, |i, j| mu.cost(i, nu, j));
    let total: f64 = plan.iter().enumerate().map(|(i, &j)| mu.cost(i, nu, j)).sum();
    Ok((total / m as f64).sqrt())
}

fn line_support(mu: &DiscreteMeasure) -> Result<Vec<(f64, f64)>> {
    if mu.dims != 1 || mu.periodic_dims != 0 {
        return Err(VpmeError::DimensionError(
            "quantile formula needs a measure on the real line".into(),
        ));
    }
    let mut pts: Vec<(f64, f64)> = mu.coords.iter().copied().zip(mu.masses.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts)
}

/// `integral_0^1 |F^{-1}(u) - G^{-1}(u)|^p du` by merging the two quantile
/// step functions.
fn quantile_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: i32) -> Result<f64> {
    let a = line_support(mu)?;
    let b = line_support(nu)?;
    let (mut i, mut j) = (0, 0);
    let (mut left_a, mut left_b) = (a[0].1, b[0].1);
    let mut total = 0.0;
    loop {
        let step = left_a.min(left_b);
        total += step * (a[i].0 - b[j].0).abs().powi(p);
        left_a -= step;
        left_b -= step;
        if left_a <= 0.0 {
            i += 1;
            if i == a.len() {
                break;
            }
            left_a += a[i].1;
        }
        if left_b <= 0.0 {
            j += 1;
            if j == b.len() {
                break;
            }
            left_b += b[j].1;
        }
    }
    Ok(total)
}

/// `W_2` on the real line by the sorted-sample (quantile) formula.
pub fn w2_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    Ok(quantile_cost(mu, nu, 2)?.sqrt())
}

/// `W_1` on the real line by the sorted-sample formula.
pub fn w1_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    quantile_cost(mu, nu, 1)
}

/// `W_1` between two equal-size sample sets on the real line.
pub fn sample_w1(a: &[f64], b: &[f64]) -> Result<f64> {
    w1_1d(&DiscreteMeasure::on_line(a)?, &DiscreteMeasure::on_line(b)?)
}

/// Distance estimate together with the resolution of the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEstimate {
    pub w2: f64,
    /// Self-distance of two resamplings of the first argument; zero when no
    /// resampling was needed.
    pub floor: f64,
    pub exact: bool,
}

/// Systematic resampling of a grid density into `m` equal-mass points. In one
/// dimension points are placed at the exact quantiles of the piecewise
/// constant density; in higher dimensions at the cell centers (the nodes).
fn resample_density(rho: &ScalarField, m: usize, offset: f64) -> Result<DiscreteMeasure> {
    let grid = rho.grid();
    if rho.values().iter().any(|&v| v < -1e-12) {
        return Err(VpmeError::InvalidMeasure("negative density".into()));
    }
    let dim = grid.dim();
    let h = grid.spacing();
    let masses: Vec<f64> = rho.values().iter().map(|v| v.max(0.0)).collect();
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return Err(VpmeError::InvalidMeasure("density without mass".into()));
    }
    let mut coords = Vec::with_capacity(m * dim);
    let mut cell = 0;
    let mut below = 0.0;
    for k in 0..m {
        let target = (k as f64 + offset) / m as f64 * total;
        while cell + 1 < masses.len() && below + masses[cell] <= target {
            below += masses[cell];
            cell += 1;
        }
        let x = grid.node(cell);
        if dim == 1 {
            let frac = if masses[cell] > 0.0 {
                ((target - below) / masses[cell]).clamp(0.0, 1.0)
            } else {
                0.5
            };
            let pos = x[0] - 0.5 * h + frac * h;
            coords.push(pos.rem_euclid(1.0));
        } else {
            coords.extend_from_slice(&x[..dim]);
        }
    }
    DiscreteMeasure::uniform(dim, dim, coords)
}

/// `W_2` between two grid densities of unit mass on the torus, through
/// systematic resampling into `m` points and exact assignment.
pub fn grid_w2(rho_1: &ScalarField, rho_2: &ScalarField, m: usize) -> Result<DistanceEstimate> {
    if rho_1.grid() != rho_2.grid() {
        return Err(VpmeError::GridMismatch);
    }
    if m == 0 || m > EXACT_CAP {
        return Err(VpmeError::TooLarge(m, EXACT_CAP));
    }
    let a = resample_density(rho_1, m, 0.5)?;
    let b = resample_density(rho_2, m, 0.5)?;
    let w2 = w2_exact(&a, &b)?;
    let a_shifted = resample_density(rho_1, m, 0.0)?;
    let floor = w2_exact(&a, &a_shifted)?;
    Ok(DistanceEstimate {
        w2,
        floor,
        exact: false,
    })
}

/// Deterministic subsample indices: golden-ratio scrambling of the particle
/// order, so consecutive picks come from unrelated parts of the ensemble.
pub fn subsample_indices(n: usize, m: usize, offset: f64) -> Vec<usize> {
    if m >= n {
        return (0..n).collect();
    }
    let mut taken = BTreeSet::new();
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let u = (offset + j as f64 * GOLDEN).fract();
        let mut idx = ((u * n as f64) as usize).min(n - 1);
        while taken.contains(&idx) {
            idx = (idx + 1) % n;
        }
        taken.insert(idx);
        out.push(idx);
    }
    out
}

/// Phase-space measure of the particles at `indices` (equal masses).
pub fn phase_space_measure(ens: &ParticleEnsemble, indices: &[usize]) -> Result<DiscreteMeasure> {
    let d = ens.dim();
    let mut coords = Vec::with_capacity(indices.len() * 2 * d);
    for &i in indices {
        coords.extend_from_slice(ens.position(i));
        coords.extend_from_slice(ens.velocity(i));
    }
    DiscreteMeasure::uniform(d, 2 * d, coords)
}

/// `W_2` between two ensembles in phase space. Ensembles up to `cap`
/// particles are compared exactly; larger ones are subsampled with the same
/// indices on both sides and the floor is the distance between two different
/// subsamples of `a`.
pub fn ensemble_w2(a: &ParticleEnsemble, b: &ParticleEnsemble, cap: usize) -> Result<DistanceEstimate> {
    if a.dim() != b.dim() {
        return Err(VpmeError::DimMismatch(a.dim(), b.dim()));
    }
    let cap = cap.clamp(1, EXACT_CAP);
    if a.len() <= cap && b.len() <= cap {
        let mu = phase_space_measure(a, &(0..a.len()).collect::<Vec<_>>())?;
        let nu = phase_space_measure(b, &(0..b.len()).collect::<Vec<_>>())?;
        if mu.len() != nu.len() {
            return Err(VpmeError::SizeMismatch(mu.len(), nu.len()));
        }
        return Ok(DistanceEstimate {
            w2: w2_exact(&mu, &nu)?,
            floor: 0.0,
            exact: true,
        });
    }
    let idx = subsample_indices(a.len(), cap, 0.0);
    let idx_b = subsample_indices(b.len(), cap, 0.0);
    let idx_alt = subsample_indices(a.len(), cap, 0.5 * GOLDEN);
    let mu = phase_space_measure(a, &idx)?;
    let nu = phase_space_measure(b, &idx_b)?;
    let mu_alt = phase_space_measure(a, &idx_alt)?;
    Ok(DistanceEstimate {
        w2: w2_exact(&mu, &nu)?,
        floor: w2_exact(&mu, &mu_alt)?,
        exact: false,
    })
}

/// Result of [`fit_stability_constant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityFit {
    /// Decay rate of `log L(t)`; the bound reads `L(t) >= L(0) exp(-C t)`.
    pub c: f64,
    /// Root-mean-square residual of the linear fit of `log L`.
    pub residual: f64,
    /// Distances do not rise above the estimator floor, so the fit carries
    /// no information.
    pub floor_dominated: bool,
    /// First time at which the short-time branch of the bound reaches `d`.
    pub t0_implied: f64,
}

/// `16 d e`, the scale of the short-time stability bound.
pub fn stability_scale(dim: usize) -> f64 {
    16.0 * dim as f64 * std::f64::consts::E
}

/// Fits `log L(t) = a - C t` with `L(t) = -log(w2(t)^2 / (16 d e))`.
///
/// `w0` is the initial distance; it is prepended to the series when the
/// series does not start at `t = 0`. `floor` is the distance resolution.
pub fn fit_stability_constant(series: &[(f64, f64)], w0: f64, dim: usize, floor: f64) -> Result<StabilityFit> {
    let scale = stability_scale(dim);
    let limit = scale.sqrt();
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(series.len() + 1);
    if series.first().map_or(true, |p| p.0 > 0.0) {
        points.push((0.0, w0));
    }
    points.extend_from_slice(series);
    for &(_, w) in &points {
        if !(w < limit) || !w.is_finite() {
            return Err(VpmeError::OutOfRange(w));
        }
    }
    for pair in points.windows(2) {
        if !(pair[1].0 > pair[0].0) {
            return Err(VpmeError::InvalidMeasure("times must be increasing".into()));
        }
    }
    let max_w = points.iter().fold(0.0, |m: f64, p| m.max(p.1));
    let floor_dominated = max_w <= floor || points.iter().any(|p| p.1 <= 0.0);

    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(t, w)| (t, (-(w * w / scale).ln()).ln()))
        .collect();
    if usable.len() < 2 {
        return Ok(StabilityFit {
            c: 0.0,
            residual: 0.0,
            floor_dominated: true,
            t0_implied: f64::INFINITY,
        });
    }
    let n = usable.len() as f64;
    let mean_t = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = usable.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sty: f64 = usable.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let residual = (usable
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let c = -slope;
    Ok(StabilityFit {
        c,
        residual,
        floor_dominated,
        t0_implied: implied_t0(w0, dim, c),
    })
}

/// `inf { t : 16de exp(log(w0^2 / 16de) e^{-Ct}) > d }`.
pub fn implied_t0(w0: f64, dim: usize, c: f64) -> f64 {
    let scale = stability_scale(dim);
    let d = dim as f64;
    if w0 * w0 >= d {
        return 0.0;
    }
    if !(c > 0.0) || w0 <= 0.0 {
        return f64::INFINITY;
    }
    let a = (w0 * w0 / scale).ln();
    let b = (d / scale).ln();
    (a / b).ln() / c
}
