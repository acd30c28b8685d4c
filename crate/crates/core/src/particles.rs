//! Weighted particle ensembles on `T^d x R^d`.

use crate::error::{Result, VpmeError};

/// Tolerance on the total weight.
pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    dim: usize,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleEnsemble {
    /// Positions and velocities are particle-major (`x_0^0, x_0^1, x_1^0, ...`).
    /// Positions are wrapped into `[0,1)^d`.
    pub fn new(dim: usize, mut positions: Vec<f64>, velocities: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(VpmeError::InvalidEnsemble(format!("dimension {dim}")));
        }
        let n = weights.len();
        if n == 0 {
            return Err(VpmeError::InvalidEnsemble("no particles".into()));
        }
        if positions.len() != n * dim || velocities.len() != n * dim {
            return Err(VpmeError::InvalidEnsemble(format!(
                "{} positions and {} velocities for {n} particles in d={dim}",
                positions.len(),
                velocities.len()
            )));
        }
        if positions.iter().chain(&velocities).chain(&weights).any(|v| !v.is_finite()) {
            return Err(VpmeError::NonFinite);
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(VpmeError::InvalidEnsemble("non-positive weight".into()));
        }
        let total = compensated_sum(&weights);
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(VpmeError::InvalidEnsemble(format!("total weight {total}")));
        }
        positions.iter_mut().for_each(|x| *x = wrap(*x));
        Ok(Self {
            dim,
            positions,
            velocities,
            weights,
        })
    }

    /// Equal weights `1/N`.
    pub fn with_uniform_weights(dim: usize, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        let n = positions.len() / dim.max(1);
        Self::new(dim, positions, velocities, uniform_weights(n))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn phase_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.positions, &mut self.velocities)
    }

    pub fn total_momentum(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        for (v, w) in self.velocities.chunks(self.dim).zip(&self.weights) {
            for (pk, vk) in p.iter_mut().zip(v) {
                *pk += w * vk;
            }
        }
        p
    }

    /// Largest velocity norm.
    pub fn max_speed(&self) -> f64 {
        self.velocities
            .chunks(self.dim)
            .map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Adds `shift` to every velocity.
    pub fn shift_velocities(&mut self, shift: &[f64]) -> Result<()> {
        if shift.len() != self.dim {
            return Err(VpmeError::DimMismatch(shift.len(), self.dim));
        }
        for v in self.velocities.chunks_mut(self.dim) {
            for (vk, s) in v.iter_mut().zip(shift) {
                *vk += s;
            }
        }
        Ok(())
    }

    /// Translates every position by `shift` on the torus.
    pub fn translate(&mut self, shift: &[f64]) -> Result<()> {
        if shift.len() != self.dim {
            return Err(VpmeError::DimMismatch(shift.len(), self.dim));
        }
        for x in self.positions.chunks_mut(self.dim) {
            for (xk, s) in x.iter_mut().zip(shift) {
                *xk = wrap(*xk + s);
            }
        }
        Ok(())
    }

    pub fn scale_velocities(&mut self, lambda: f64) {
        self.velocities.iter_mut().for_each(|v| *v *= lambda);
    }

    pub fn negate_velocities(&mut self) {
        self.scale_velocities(-1.0);
    }

    /// Velocity component `axis` of every particle.
    pub fn velocity_component(&self, axis: usize) -> Vec<f64> {
        self.velocities.iter().skip(axis).step_by(self.dim).copied().collect()
    }
}

/// Neumaier summation.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

pub(crate) fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Reduces `x` into `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let y = x - x.floor();
    // x.floor() can round y up to exactly 1 for tiny negative x
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}
