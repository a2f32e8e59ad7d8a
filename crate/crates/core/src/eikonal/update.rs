//! Local upwind update shared by the fast-marching and sweeping solvers.

use crate::geometry::Vec2;

use super::cloud::SolveCloud;

/// Reusable buffers for [`local_update`].
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    upwind: Vec<(f64, Vec2)>,
}

/// Candidate value at node `i` from neighbours accepted by `upwind`, solving
/// `|∇Φ| = 1/v`.
///
/// The result is the smallest of the one-point updates `Φ_j + |x_i - x_j|/v`
/// and of the two-point updates over pairs of upwind neighbours. A pair
/// update fits the plane through the pair's values exactly (a least-squares
/// fit with two equations) and is accepted only when the front reaches `x_i`
/// from inside the angle the pair spans and the root is not below either
/// neighbour value.
pub(crate) fn local_update(
    i: usize,
    cloud: &SolveCloud,
    phi: &[f64],
    v: f64,
    upwind: impl Fn(usize) -> bool,
    scratch: &mut Scratch,
) -> f64 {
    let xi = cloud.points[i];
    let inv_v = 1.0 / v;
    scratch.upwind.clear();
    let mut best = f64::INFINITY;
    for &j in cloud.neighbors.neighbors(i) {
        let j = j as usize;
        if j == i || cloud.ghost[j] || !phi[j].is_finite() || !upwind(j) {
            continue;
        }
        let d = cloud.points[j] - xi;
        best = best.min(phi[j] + d.norm() * inv_v);
        scratch.upwind.push((phi[j], d));
    }
    let target = inv_v * inv_v;
    let up = &scratch.upwind;
    for a in 0..up.len() {
        for b in a + 1..up.len() {
            if let Some(root) = pair_update(up[a], up[b], target) {
                best = best.min(root);
            }
        }
    }
    best
}

/// Accepted neighbour `(j, Φ_j, x_j - x_i)` of a node.
pub(crate) type Accepted = (u32, f64, Vec2);

/// Tentative value at node `i` after `new` is accepted: the smaller of
/// `phi[i]` and the candidates that involve `new`, paired with the earlier
/// accepted non-ghost neighbours in `accepted`. With accepted values frozen
/// this equals [`local_update`] over the current accepted set. Candidates
/// are never below their inputs, so pairs whose inputs already reach the
/// running minimum are skipped.
pub(crate) fn update_with(i: usize, new: usize, accepted: &[Accepted], cloud: &SolveCloud, phi: &[f64], v: f64) -> f64 {
    let xi = cloud.points[i];
    let inv_v = 1.0 / v;
    let target = inv_v * inv_v;
    let fresh = (phi[new], cloud.points[new] - xi);
    let mut best = phi[i].min(fresh.0 + fresh.1.norm() * inv_v);
    if fresh.0 >= best {
        return best;
    }
    for &(j, pj, dj) in accepted {
        if pj >= best {
            continue;
        }
        // same argument order as the neighbour list, which is sorted by index
        let root = if j as usize > new {
            pair_update(fresh, (pj, dj), target)
        } else {
            pair_update((pj, dj), fresh, target)
        };
        if let Some(r) = root {
            best = best.min(r);
        }
    }
    best
}

/// Two-point update from neighbours `(Φ_j, x_j - x_i)` and `(Φ_k, x_k - x_i)`.
#[inline]
fn pair_update((pj, dj): (f64, Vec2), (pk, dk): (f64, Vec2), target: f64) -> Option<f64> {
    let det = dj.x * dk.y - dj.y * dk.x;
    if det * det <= 1e-6 * dj.norm_sq() * dk.norm_sq() {
        return None;
    }
    let inv = 1.0 / det;
    // Rows dj, dk: g = A^{-1} (Φ - Φ_i 1) = a - Φ_i b.
    let solve = |r0: f64, r1: f64| Vec2::new(inv * (dk.y * r0 - dj.y * r1), inv * (dj.x * r1 - dk.x * r0));
    let a = solve(pj, pk);
    let b = solve(1.0, 1.0);
    let qa = b.norm_sq();
    let qb = -2.0 * a.dot(b);
    let qc = a.norm_sq() - target;
    let disc = qb * qb - 4.0 * qa * qc;
    if qa <= 1e-300 || disc < 0.0 {
        return None;
    }
    let root = (-qb + disc.sqrt()) / (2.0 * qa);
    if root < pj.max(pk) {
        return None;
    }
    // -g = alpha dj + beta dk with alpha, beta >= 0 (columns dj, dk).
    let g = a - b * root;
    let alpha = inv * (-g.x * dk.y + g.y * dk.x);
    let beta = inv * (-dj.x * g.y + dj.y * g.x);
    if alpha >= 0.0 && beta >= 0.0 {
        return Some(root);
    }
    let tol = -1e-12 * g.norm() * (dj.norm() + dk.norm());
    (alpha >= tol && beta >= tol).then_some(root)
}
