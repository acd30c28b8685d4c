//! B-spline charge assignment and force interpolation.
//!
//! Deposition and interpolation use the same shape function, so the force
//! interpolation is the transpose of the charge assignment.

use rayon::prelude::*;

use crate::error::{Result, VpmeError};
use crate::grid::{ScalarField, TorusGrid, VectorField};
use crate::particles::ParticleEnsemble;

/// Polynomial order of the B-spline shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShapeOrder {
    /// Cloud in cell.
    Linear = 1,
    /// Triangular shaped cloud.
    Quadratic = 2,
    #[default]
    Cubic = 3,
}

impl ShapeOrder {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Self::Linear),
            2 => Ok(Self::Quadratic),
            3 => Ok(Self::Cubic),
            _ => Err(VpmeError::InvalidModel(format!("shape order {order} not in 1..=3"))),
        }
    }

    pub fn order(self) -> u32 {
        self as u32
    }

    fn support(self) -> usize {
        self as usize + 1
    }

    /// First node index and node weights for a coordinate `y` in grid units.
    #[inline]
    fn weights(self, y: f64) -> (i64, [f64; 4]) {
        match self {
            Self::Linear => {
                let base = y.floor();
                let f = y - base;
                (base as i64, [1.0 - f, f, 0.0, 0.0])
            }
            Self::Quadratic => {
                let c = y.round();
                let d = y - c;
                (
                    c as i64 - 1,
                    [0.5 * (0.5 - d) * (0.5 - d), 0.75 - d * d, 0.5 * (0.5 + d) * (0.5 + d), 0.0],
                )
            }
            Self::Cubic => {
                let base = y.floor();
                let f = y - base;
                let f2 = f * f;
                let f3 = f2 * f;
                let g = 1.0 - f;
                (
                    base as i64 - 1,
                    [
                        g * g * g / 6.0,
                        (4.0 - 6.0 * f2 + 3.0 * f3) / 6.0,
                        (1.0 + 3.0 * f + 3.0 * f2 - 3.0 * f3) / 6.0,
                        f3 / 6.0,
                    ],
                )
            }
        }
    }
}

/// Node indices and tensor-product weights of one particle.
struct Stencil {
    nodes: [[usize; 4]; 3],
    weights: [[f64; 4]; 3],
    width: usize,
}

impl Stencil {
    #[inline]
    fn new(grid: &TorusGrid, x: &[f64], order: ShapeOrder) -> Self {
        let n = grid.n() as i64;
        let mut nodes = [[0usize; 4]; 3];
        let mut weights = [[0.0; 4]; 3];
        for (axis, &xa) in x.iter().enumerate() {
            let (start, w) = order.weights(xa * n as f64);
            weights[axis] = w;
            for (k, node) in nodes[axis].iter_mut().enumerate() {
                *node = (start + k as i64).rem_euclid(n) as usize;
            }
        }
        Self {
            nodes,
            weights,
            width: order.support(),
        }
    }

    /// Calls `f(flat, weight)` for every node in the support.
    #[inline]
    fn for_each<F: FnMut(usize, f64)>(&self, grid: &TorusGrid, mut f: F) {
        let n = grid.n();
        let w = self.width;
        match grid.dim() {
            1 => {
                for a in 0..w {
                    f(self.nodes[0][a], self.weights[0][a]);
                }
            }
            2 => {
                for b in 0..w {
                    for a in 0..w {
                        f(
                            self.nodes[0][a] + n * self.nodes[1][b],
                            self.weights[0][a] * self.weights[1][b],
                        );
                    }
                }
            }
            _ => {
                for c in 0..w {
                    for b in 0..w {
                        let wbc = self.weights[1][b] * self.weights[2][c];
                        let off = n * (self.nodes[1][b] + n * self.nodes[2][c]);
                        for a in 0..w {
                            f(self.nodes[0][a] + off, self.weights[0][a] * wbc);
                        }
                    }
                }
            }
        }
    }
}

/// Grid density `rho_j = sum_i w_i S(x_j - x_i) / h^d`. The loop runs in
/// particle order so the result is bitwise reproducible.
pub fn deposit(ensemble: &ParticleEnsemble, grid: &TorusGrid, order: ShapeOrder) -> Result<ScalarField> {
    if ensemble.dim() != grid.dim() {
        return Err(VpmeError::DimMismatch(ensemble.dim(), grid.dim()));
    }
    let d = grid.dim();
    let inv_vol = 1.0 / grid.cell_volume();
    let mut rho = vec![0.0; grid.len()];
    for (x, &w) in ensemble.positions().chunks(d).zip(ensemble.weights()) {
        let st = Stencil::new(grid, x, order);
        st.for_each(grid, |j, s| rho[j] += w * s);
    }
    rho.iter_mut().for_each(|r| *r *= inv_vol);
    ScalarField::new(grid, rho)
}

/// Field values at `positions` (particle-major, `d` per particle), returned
/// particle-major.
pub fn interpolate_force(field: &VectorField, positions: &[f64], order: ShapeOrder) -> Vec<f64> {
    let grid = field.grid();
    let d = grid.dim();
    let comps: Vec<&[f64]> = field.components().iter().map(|c| c.values()).collect();
    let mut out = vec![0.0; positions.len()];
    out.par_chunks_mut(d)
        .zip(positions.par_chunks(d))
        .for_each(|(force, x)| {
            let st = Stencil::new(grid, x, order);
            st.for_each(grid, |j, s| {
                for (fk, comp) in force.iter_mut().zip(&comps) {
                    *fk += s * comp[j];
                }
            });
        });
    out
}

/// Values of a scalar field at `positions`.
pub fn interpolate_scalar(field: &ScalarField, positions: &[f64], order: ShapeOrder) -> Vec<f64> {
    let grid = field.grid();
    let d = grid.dim();
    let vals = field.values();
    positions
        .par_chunks(d)
        .map(|x| {
            let st = Stencil::new(grid, x, order);
            let mut acc = 0.0;
            st.for_each(grid, |j, s| acc += s * vals[j]);
            acc
        })
        .collect()
}
