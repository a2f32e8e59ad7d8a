//! Gauss-Seidel sweeping over four diagonal orderings.

use log::warn;

use super::cloud::{NodeKind, SolveCloud};
use super::update::{local_update, Scratch};

const MAX_SWEEPS: usize = 400;

/// Relative change below which sweeping stops.
pub const SWEEP_TOL: f64 = 1e-6;

/// Travel cost at every node by repeated sweeps until the largest change of
/// a free node falls below `SWEEP_TOL` times the largest finite free value.
pub(crate) fn sweep(cloud: &SolveCloud, kind: &[NodeKind], speed: &[f64], phi_wall: f64) -> Vec<f64> {
    let n = cloud.len();
    let mut phi = vec![f64::INFINITY; n];
    for i in 0..n {
        match kind[i] {
            NodeKind::Goal => phi[i] = 0.0,
            NodeKind::Wall => phi[i] = phi_wall,
            NodeKind::Free => {}
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| kind[i] == NodeKind::Free).collect();
    let keys: [fn(crate::geometry::Vec2) -> f64; 4] = [|p| p.x + p.y, |p| -(p.x + p.y), |p| p.x - p.y, |p| p.y - p.x];
    let orders: Vec<Vec<usize>> = keys
        .iter()
        .map(|key| {
            let mut o = free.clone();
            o.sort_by(|&a, &b| key(cloud.points[a]).total_cmp(&key(cloud.points[b])).then(a.cmp(&b)));
            o
        })
        .collect();

    let mut scratch = Scratch::default();
    let mut quiet = 0;
    for it in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        for &i in &orders[it % 4] {
            let cur = phi[i];
            let cand = local_update(i, cloud, &phi, speed[i], |j| phi[j] < cur, &mut scratch);
            if cand < cur {
                change = change.max(if cur.is_finite() { cur - cand } else { f64::INFINITY });
                phi[i] = cand;
            }
        }
        let max_phi = free
            .iter()
            .map(|&i| phi[i])
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max);
        // Every ordering must pass once without progress before stopping.
        if change <= SWEEP_TOL * max_phi {
            quiet += 1;
            if quiet >= 4 {
                return phi;
            }
        } else {
            quiet = 0;
        }
    }
    warn!("eikonal sweeping stopped after {MAX_SWEEPS} sweeps without converging");
    phi
}
