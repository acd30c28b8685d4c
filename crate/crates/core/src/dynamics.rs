//! Particle-in-cell time stepping.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Result, VpmeError};
use crate::grid::{
    convolve, convolve_mollifier, convolve_mollifier_vector, gradient, ScalarField, TorusGrid, VectorField,
};
use crate::particles::{wrap, ParticleEnsemble};
use crate::pic::{deposit, interpolate_force, ShapeOrder};
use crate::poisson::{solve_bar, vpme_field, PotentialSplit, SolverSettings};

/// Field equation closing the kinetic equation.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// `Laplacian U = exp(U) - rho`, `E = -grad U`.
    Vpme,
    /// `Laplacian U = 1 - rho`, `E = -grad U`.
    ElectronVp,
    /// `F = -grad(W * rho)` for a smooth interaction potential `W`.
    SmoothKernel(ScalarField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceModel {
    pub kind: ModelKind,
    /// When set, the field is solved from `chi_r * rho` and the force is
    /// `chi_r * E`.
    pub mollifier_radius: Option<f64>,
}

/// Kernel names accepted by [`ForceModel::from_name`] after `smooth:`.
pub const KERNEL_NAMES: [&str; 1] = ["cos"];

impl ForceModel {
    pub fn vpme() -> Self {
        Self {
            kind: ModelKind::Vpme,
            mollifier_radius: None,
        }
    }

    pub fn electron() -> Self {
        Self {
            kind: ModelKind::ElectronVp,
            mollifier_radius: None,
        }
    }

    pub fn smooth(kernel: ScalarField) -> Result<Self> {
        if !kernel.is_finite() {
            return Err(VpmeError::NonFinite);
        }
        Ok(Self {
            kind: ModelKind::SmoothKernel(kernel),
            mollifier_radius: None,
        })
    }

    /// `W(x) = cos(2 pi x_1)`.
    pub fn cosine_kernel(grid: &TorusGrid) -> ScalarField {
        ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).cos())
    }

    /// Parses `vpme`, `electron` or `smooth:<kernel>`.
    pub fn from_name(name: &str, grid: &TorusGrid) -> Result<Self> {
        match name {
            "vpme" => Ok(Self::vpme()),
            "electron" => Ok(Self::electron()),
            _ => match name.strip_prefix("smooth:") {
                Some("cos") => Self::smooth(Self::cosine_kernel(grid)),
                Some(k) => Err(VpmeError::InvalidModel(format!(
                    "unknown kernel '{k}' (known: {})",
                    KERNEL_NAMES.join(", ")
                ))),
                None => Err(VpmeError::InvalidModel(format!(
                    "unknown model '{name}' (expected vpme, electron or smooth:<kernel>)"
                ))),
            },
        }
    }

    pub fn with_mollifier(mut self, r: Option<f64>) -> Result<Self> {
        if let Some(r) = r {
            if !(r > 0.0 && r <= 0.5) {
                return Err(VpmeError::InvalidRadius(r));
            }
        }
        self.mollifier_radius = r;
        Ok(self)
    }

    /// For a smooth kernel, `sup_x |Hessian W(x)|` (Frobenius norm of the
    /// spectral Hessian at the nodes), the Lipschitz constant of the force in
    /// both arguments. `None` for the Coulomb-type models.
    pub fn lipschitz_constant(&self) -> Result<Option<f64>> {
        let ModelKind::SmoothKernel(w) = &self.kind else {
            return Ok(None);
        };
        let hess = jacobian(&gradient(w)?)?;
        Ok(Some(hess.iter().map(|h| frobenius(h)).fold(0.0, f64::max)))
    }
}

/// Node-wise Jacobians of a vector field, `d x d` row-major per node.
fn jacobian(field: &VectorField) -> Result<Vec<Vec<f64>>> {
    let grid = field.grid();
    let d = grid.dim();
    let mut jac = vec![vec![0.0; d * d]; grid.len()];
    for (i, comp) in field.components().iter().enumerate() {
        let g = gradient(comp)?;
        for (j, dj) in g.components().iter().enumerate() {
            for (node, v) in dj.values().iter().enumerate() {
                jac[node][i * d + j] = *v;
            }
        }
    }
    Ok(jac)
}

fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Fields consistent with one deposited density.
#[derive(Debug, Clone)]
pub struct FieldCache {
    /// Deposited density.
    pub rho: ScalarField,
    /// Density the field equation is solved with: `chi_r * rho` in mollified
    /// mode, `rho` otherwise.
    pub source: ScalarField,
    /// Potential entering the energy: `U` for VPME, `U_bar` for the electron
    /// model, `W * rho` for a smooth kernel. Solved from `chi_r * rho` in
    /// mollified mode.
    pub potential: ScalarField,
    /// Full split for VPME.
    pub split: Option<PotentialSplit>,
    /// Force field sampled by the particles (already mollified).
    pub force: VectorField,
}

fn solve_fields(rho: ScalarField, model: &ForceModel, settings: &SolverSettings) -> Result<FieldCache> {
    let source = match model.mollifier_radius {
        Some(r) => convolve_mollifier(&rho, r)?,
        None => rho.clone(),
    };
    let (potential, split, field) = match &model.kind {
        ModelKind::Vpme => {
            let split = vpme_field(&source, settings)?;
            (split.potential(), Some(split.clone()), split.field())
        }
        ModelKind::ElectronVp => {
            let (u_bar, e_bar) = solve_bar(&source)?;
            (u_bar, None, e_bar)
        }
        ModelKind::SmoothKernel(w) => {
            let phi = convolve(w, &source)?;
            let f = gradient(&phi)?.scale(-1.0);
            (phi, None, f)
        }
    };
    let force = match model.mollifier_radius {
        Some(r) => convolve_mollifier_vector(&field, r)?,
        None => field,
    };
    Ok(FieldCache {
        rho,
        source,
        potential,
        split,
        force,
    })
}

/// Simulation state: particles plus the fields of their current density.
#[derive(Debug, Clone)]
pub struct SimState {
    time: f64,
    ensemble: ParticleEnsemble,
    grid: TorusGrid,
    model: ForceModel,
    order: ShapeOrder,
    settings: SolverSettings,
    cache: FieldCache,
    fresh: bool,
}

impl SimState {
    pub fn new(
        ensemble: ParticleEnsemble,
        grid: &TorusGrid,
        model: ForceModel,
        order: ShapeOrder,
        settings: SolverSettings,
    ) -> Result<Self> {
        if ensemble.dim() != grid.dim() {
            return Err(VpmeError::DimMismatch(ensemble.dim(), grid.dim()));
        }
        if let ModelKind::SmoothKernel(w) = &model.kind {
            if w.grid() != grid {
                return Err(VpmeError::GridMismatch);
            }
        }
        model.clone().with_mollifier(model.mollifier_radius)?;
        settings.validate()?;
        let rho = deposit(&ensemble, grid, order)?;
        let cache = solve_fields(rho, &model, &settings)?;
        Ok(Self {
            time: 0.0,
            ensemble,
            grid: grid.clone(),
            model,
            order,
            settings,
            cache,
            fresh: true,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn ensemble(&self) -> &ParticleEnsemble {
        &self.ensemble
    }

    /// Mutable access to the particles. The field cache is marked stale until
    /// [`SimState::refresh`] or the next step.
    pub fn ensemble_mut(&mut self) -> &mut ParticleEnsemble {
        self.fresh = false;
        &mut self.ensemble
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn model(&self) -> &ForceModel {
        &self.model
    }

    pub fn shape_order(&self) -> ShapeOrder {
        self.order
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn is_fresh(&self) -> bool {
        self.fresh
    }

    /// Field cache, or `StaleField` when the particles moved since the last
    /// solve.
    pub fn fields(&self) -> Result<&FieldCache> {
        if self.fresh {
            Ok(&self.cache)
        } else {
            Err(VpmeError::StaleField)
        }
    }

    pub fn rho(&self) -> &ScalarField {
        &self.cache.rho
    }

    /// Redeposits and re-solves the field.
    pub fn refresh(&mut self) -> Result<()> {
        let rho = deposit(&self.ensemble, &self.grid, self.order)?;
        self.cache = solve_fields(rho, &self.model, &self.settings).map_err(|e| VpmeError::FieldSolveFailure {
            time: self.time,
            source: Box::new(e),
        })?;
        self.fresh = true;
        Ok(())
    }

    fn kick(&mut self, dt: f64) {
        let force = interpolate_force(&self.cache.force, self.ensemble.positions(), self.order);
        let (_, v) = self.ensemble.phase_mut();
        v.par_iter_mut().zip(force.par_iter()).for_each(|(vi, fi)| *vi += dt * fi);
    }

    fn drift(&mut self, dt: f64) {
        let (x, v) = self.ensemble.phase_mut();
        x.par_iter_mut().zip(v.par_iter()).for_each(|(xi, vi)| *xi = wrap(*xi + dt * vi));
    }

    /// One kick-drift-kick leapfrog step with a field solve after the drift.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(VpmeError::InvalidModel(format!("time step {dt}")));
        }
        if !self.fresh {
            self.refresh()?;
        }
        self.kick(0.5 * dt);
        self.drift(dt);
        self.time += dt;
        self.refresh()?;
        self.kick(0.5 * dt);
        let (x, v) = self.ensemble.phase_mut();
        if x.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(VpmeError::NonFinite);
        }
        Ok(())
    }

    /// `0.5 min(h / v_max, 1 / sqrt(sup |grad E| + 1e-12))`.
    pub fn suggest_dt(&self) -> Result<f64> {
        let h = self.grid.spacing();
        let v_max = self.ensemble.max_speed();
        let streaming = if v_max > 0.0 { h / v_max } else { f64::INFINITY };
        let jac = jacobian(&self.fields()?.force)?;
        let grad_e = jac.iter().map(|m| frobenius(m)).fold(0.0, f64::max);
        Ok(0.5 * streaming.min(1.0 / (grad_e + 1e-12).sqrt()))
    }
}
