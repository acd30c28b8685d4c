//! Electrostatics of the massless-electron model.
//!
//! The potential `U` solving `Laplacian(U) = exp(U) - rho` is split as
//! `U = U_bar + U_hat` with
//!
//! ```text
//! Laplacian(U_bar) = 1 - rho              (linear, zero-mean gauge)
//! Laplacian(U_hat) = exp(U_bar + U_hat) - 1
//! ```
//!
//! The nonlinear part is the unique minimizer of the strictly convex energy
//! `J(u) = integral 1/2 |grad u|^2 + exp(U_bar + u) - u`, found by damped
//! Newton with an Armijo backtracking search on `J`. Each Newton system
//! `(-Laplacian + exp(U)) delta = residual` is symmetric positive definite and
//! is solved by conjugate gradients preconditioned with the constant-coefficient
//! operator `-Laplacian + mean(exp(U))`, which is diagonal in Fourier space.

use log::warn;

use crate::error::{Result, VpmeError};
use crate::grid::{gradient, invert_laplacian, ScalarField, TorusGrid, VectorField};
use crate::transport::grid_w2;

/// Mass tolerance for densities handed to the field solvers.
pub const UNIT_MASS_TOL: f64 = 1e-10;
/// Deposition noise below zero that is silently clamped.
pub const NEGATIVE_NOISE_TOL: f64 = 1e-12;
/// Largest admissible nodal potential before `exp` is considered overflowing.
pub const MAX_POTENTIAL: f64 = 700.0;

const ARMIJO: f64 = 1e-4;
const CG_REL_TOL: f64 = 1e-13;
const CG_MAX_ITERS: usize = 500;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Sup-norm tolerance on `Laplacian(U_hat) - exp(U) + 1`.
    pub newton_tol: f64,
    pub max_iters: usize,
    /// Backtracking factor in `(0, 1)`.
    pub damping: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_iters: 50,
            damping: 0.5,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || self.max_iters == 0 || !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(VpmeError::InvalidModel(format!("bad solver settings {self:?}")));
        }
        Ok(())
    }
}

/// Output of [`solve_hat`].
#[derive(Debug, Clone)]
pub struct HatSolution {
    pub u_hat: ScalarField,
    pub e_hat: VectorField,
    pub residual: f64,
    pub iters: usize,
    /// `J` at the initial iterate and after every accepted step.
    pub energy_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PotentialSplit {
    pub u_bar: ScalarField,
    pub u_hat: ScalarField,
    pub e_bar: VectorField,
    pub e_hat: VectorField,
    pub newton_residual: f64,
    pub newton_iters: usize,
    pub energy_trace: Vec<f64>,
}

impl PotentialSplit {
    /// Total potential `U = U_bar + U_hat`.
    pub fn potential(&self) -> ScalarField {
        self.u_bar.add(&self.u_hat).expect("split fields share a grid")
    }

    /// Total field `E = E_bar + E_hat`.
    pub fn field(&self) -> VectorField {
        self.e_bar.add(&self.e_hat).expect("split fields share a grid")
    }

    /// `integral exp(U) dx`; one for a neutral configuration.
    pub fn electron_mass(&self) -> f64 {
        self.potential().map(f64::exp).mean()
    }
}

/// Checks unit mass and clamps tiny negative deposition noise.
fn admissible_density(rho: &ScalarField) -> Result<ScalarField> {
    if !rho.is_finite() {
        return Err(VpmeError::NonFinite);
    }
    let mean = rho.mean();
    if (mean - 1.0).abs() > UNIT_MASS_TOL {
        return Err(VpmeError::NonUnitMass { mean });
    }
    let min = rho.min();
    if min >= 0.0 {
        return Ok(rho.clone());
    }
    if min < -NEGATIVE_NOISE_TOL {
        warn!("density has negative values down to {min:e}; solving without clamping");
        return Ok(rho.clone());
    }
    let clamped = rho.map(|v| v.max(0.0));
    let m = clamped.mean();
    Ok(clamped.scale(1.0 / m))
}

/// Linear part: `Laplacian(U_bar) = 1 - rho`, `E_bar = -grad U_bar`.
pub fn solve_bar(rho: &ScalarField) -> Result<(ScalarField, VectorField)> {
    let rho = admissible_density(rho)?;
    let mut rhs = rho.map(|r| 1.0 - r);
    // remove the rounding-level mean so the solvability check is exact
    let m = rhs.mean();
    rhs = rhs.map(|v| v - m);
    let u_bar = invert_laplacian(&rhs)?;
    let e_bar = gradient(&u_bar)?.scale(-1.0);
    Ok((u_bar, e_bar))
}

struct HatProblem<'a> {
    grid: &'a TorusGrid,
    u_bar: &'a [f64],
}

impl HatProblem<'_> {
    fn exp_total(&self, u_hat: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(u_hat.len());
        let mut max_potential = f64::NEG_INFINITY;
        for (&b, &h) in self.u_bar.iter().zip(u_hat) {
            let s = b + h;
            max_potential = max_potential.max(s);
            out.push(s.exp());
        }
        if max_potential > MAX_POTENTIAL || !max_potential.is_finite() {
            return Err(VpmeError::Overflow { max_potential });
        }
        Ok(out)
    }

    /// `J(u) = integral 1/2 |grad u|^2 + exp(U_bar + u) - u`.
    fn energy(&self, u_hat: &[f64], exp_u: &[f64]) -> f64 {
        let vol = self.grid.cell_volume();
        let lap = self.grid.laplacian_values(u_hat);
        let sum: f64 = u_hat
            .iter()
            .zip(&lap)
            .zip(exp_u)
            .map(|((&u, &l), &e)| -0.5 * u * l + e - u)
            .sum();
        vol * sum
    }

    /// `(-Laplacian + diag(coef)) x`.
    fn apply_hessian(&self, coef: &[f64], x: &[f64]) -> Vec<f64> {
        let lap = self.grid.laplacian_values(x);
        x.iter()
            .zip(&lap)
            .zip(coef)
            .map(|((&xi, &li), &c)| c * xi - li)
            .collect()
    }

    fn precondition(&self, shift: f64, r: &[f64]) -> Vec<f64> {
        let grid = self.grid;
        grid.apply_multiplier(r, |k| 1.0 / (shift - grid.laplacian_symbol(k)))
    }

    fn conjugate_gradient(&self, coef: &[f64], b: &[f64]) -> Vec<f64> {
        let shift = coef.iter().sum::<f64>() / coef.len() as f64;
        let mut x = vec![0.0; b.len()];
        let mut r = b.to_vec();
        let b_norm = dot(b, b).sqrt();
        if b_norm == 0.0 {
            return x;
        }
        let mut z = self.precondition(shift, &r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for _ in 0..CG_MAX_ITERS {
            let ap = self.apply_hessian(coef, &p);
            let alpha = rz / dot(&p, &ap);
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if dot(&r, &r).sqrt() <= CG_REL_TOL * b_norm {
                break;
            }
            z = self.precondition(shift, &r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..p.len() {
                p[i] = z[i] + beta * p[i];
            }
        }
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `expm1(x) - x` without cancellation for small `x`.
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        x * x * (0.5 + x * (1.0 / 6.0 + x / 24.0))
    } else {
        x.exp_m1() - x
    }
}

/// Nonlinear part: `Laplacian(U_hat) = exp(U_bar + U_hat) - 1`, starting from
/// `U_hat = 0`.
pub fn solve_hat(u_bar: &ScalarField, settings: &SolverSettings) -> Result<HatSolution> {
    settings.validate()?;
    if !u_bar.is_finite() {
        return Err(VpmeError::NonFinite);
    }
    let grid = u_bar.grid();
    let vol = grid.cell_volume();
    let problem = HatProblem {
        grid,
        u_bar: u_bar.values(),
    };

    let mut u_hat = vec![0.0; grid.len()];
    let mut exp_u = problem.exp_total(&u_hat)?;
    let mut energy = problem.energy(&u_hat, &exp_u);
    let mut trace = vec![energy];
    let mut iters = 0;

    loop {
        let lap = grid.laplacian_values(&u_hat);
        // residual F = Laplacian(u) - exp(U) + 1 = -grad J
        let residual: Vec<f64> = lap
            .iter()
            .zip(&exp_u)
            .map(|(&l, &e)| l - e + 1.0)
            .collect();
        let res_norm = residual.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
        if res_norm <= settings.newton_tol {
            let u_hat = ScalarField::from_vec_unchecked(grid, u_hat);
            let e_hat = gradient(&u_hat)?.scale(-1.0);
            return Ok(HatSolution {
                u_hat,
                e_hat,
                residual: res_norm,
                iters,
                energy_trace: trace,
            });
        }
        if iters >= settings.max_iters {
            return Err(VpmeError::NoConvergence {
                iters,
                residual: res_norm,
            });
        }

        let delta = problem.conjugate_gradient(&exp_u, &residual);
        let lap_delta = grid.laplacian_values(&delta);
        // directional derivative of J along delta
        let slope = -vol * dot(&residual, &delta);
        let curvature = -dot(&delta, &lap_delta);

        let mut step = 1.0;
        let accepted = loop {
            // exact increment J(u + step delta) - J(u), accumulated termwise to
            // avoid cancellation near the minimizer
            let mut sum = 0.5 * step * step * curvature;
            let mut overflow = false;
            for i in 0..delta.len() {
                let s = step * delta[i];
                if problem.u_bar[i] + u_hat[i] + s > MAX_POTENTIAL {
                    overflow = true;
                    break;
                }
                sum += -s * residual[i] + exp_u[i] * expm1_minus_x(s);
            }
            if !overflow {
                let increment = vol * sum;
                if increment <= ARMIJO * step * slope {
                    break Some(increment);
                }
            }
            step *= settings.damping;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some(increment) = accepted else {
            return Err(VpmeError::NoConvergence {
                iters,
                residual: res_norm,
            });
        };
        for (u, d) in u_hat.iter_mut().zip(&delta) {
            *u += step * d;
        }
        exp_u = problem.exp_total(&u_hat)?;
        energy += increment;
        trace.push(energy);
        iters += 1;
    }
}

/// Full potential `Laplacian(U) = exp(U) - rho` through the split.
pub fn vpme_field(rho: &ScalarField, settings: &SolverSettings) -> Result<PotentialSplit> {
    let (u_bar, e_bar) = solve_bar(rho)?;
    let hat = solve_hat(&u_bar, settings)?;
    Ok(PotentialSplit {
        u_bar,
        u_hat: hat.u_hat,
        e_bar,
        e_hat: hat.e_hat,
        newton_residual: hat.residual,
        newton_iters: hat.iters,
        energy_trace: hat.energy_trace,
    })
}

/// Electron model field: `E = -grad U_bar`, so `div E = rho - 1`.
pub fn electron_field(rho: &ScalarField) -> Result<VectorField> {
    Ok(solve_bar(rho)?.1)
}

/// `(||E_hat_1 - E_hat_2||_{L^2}, W_2(rho_1, rho_2))` for the stability
/// estimate of the regular field part. `w2_points` sets the resampling size of
/// the transport distance.
pub fn hat_stability_gap(
    rho_1: &ScalarField,
    rho_2: &ScalarField,
    settings: &SolverSettings,
    w2_points: usize,
) -> Result<(f64, f64)> {
    let s1 = vpme_field(rho_1, settings)?;
    let s2 = vpme_field(rho_2, settings)?;
    let gap = s1.e_hat.sub(&s2.e_hat)?.l2_norm();
    let w2 = grid_w2(rho_1, rho_2, w2_points)?.w2;
    Ok((gap, w2))
}
