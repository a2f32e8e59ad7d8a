//! Neighbour search and least-squares differential operators on the moving
//! particle cloud, plus per-particle volumes.

mod grid;
mod lsq;

pub use grid::{build_neighbors, build_neighbors_masked, table_from_grid, CellGrid, NeighborTable};
pub use lsq::{
    build_stencil, divergence, fit_gradient, gradient_coefficients, solve_into, weight, LsqStencils, StencilRow,
    StencilStatus, MIN_NEIGHBORS, TARGET_NEIGHBORS, WEIGHT_ALPHA,
};

use crate::error::{Error, Result};
use crate::pedestrians::ParticleState;

/// Per-particle area `dV_i = m_i / rho_i`; zero for dead particles.
pub fn update_volumes(particles: &[ParticleState]) -> Result<Vec<f64>> {
    let mut dv = Vec::with_capacity(particles.len());
    for (i, p) in particles.iter().enumerate() {
        if !p.alive {
            dv.push(0.0);
            continue;
        }
        if !(p.rho > 0.0) {
            return Err(Error::DensityBreach {
                particle: i,
                rho: p.rho,
            });
        }
        dv.push(p.m / p.rho);
    }
    Ok(dv)
}

/// Square root of the mean particle area over alive particles.
pub fn mean_spacing(particles: &[ParticleState], dv: &[f64]) -> Option<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (p, v) in particles.iter().zip(dv) {
        if p.alive {
            total += v;
            n += 1;
        }
    }
    (n > 0).then(|| (total / n as f64).sqrt())
}
