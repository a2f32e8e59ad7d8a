//! Lagrangian pedestrian particles: Morse repulsion, eikonal-guided desired
//! velocity, exact relaxation, continuity update and boundary handling.

use serde::{Deserialize, Serialize};

use crate::contagion::{Fractions, Label};
use crate::eikonal::speed;
use crate::exec;
use crate::geometry::{Rect, Segment, Side, Vec2};
use crate::params::ModelParams;
use crate::pointcloud::CellGrid;
use crate::scenario::{Domain, ExitRegion};

/// State of one Lagrangian grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub x: Vec2,
    pub u: Vec2,
    /// Density (ped/m²).
    pub rho: f64,
    /// Constant mass `rho_0 * spacing²` (ped).
    pub m: f64,
    pub alpha: Fractions,
    /// Population index into the scenario.
    pub pop: usize,
    pub alive: bool,
    /// Label at seeding time.
    pub seeded: Label,
}

/// Gradient of the repulsive Morse potential `U(r) = C exp(-|r|/l)`, with
/// `∇U(0) = 0`.
#[inline]
pub fn morse_gradient(r: Vec2, c: f64, l: f64) -> Vec2 {
    let d = r.norm();
    if d == 0.0 {
        return Vec2::ZERO;
    }
    r * (-(c / l) * (-d / l).exp() / d)
}

/// `-Σ_j ∇U(x_i - x_j) w_j` over `(x_j, w_j)` pairs, with `w_j = rho_j dV_j`.
pub fn morse_force(xi: Vec2, neighbors: impl IntoIterator<Item = (Vec2, f64)>, c: f64, l: f64) -> Vec2 {
    let mut f = Vec2::ZERO;
    for (xj, w) in neighbors {
        f -= morse_gradient(xi - xj, c, l) * w;
    }
    f
}

/// Pair buffers kept between calls to [`morse_forces_with`].
#[derive(Debug, Clone, Default)]
pub struct MorseScratch {
    rows: Vec<Vec<(u32, f64)>>,
}

/// Morse forces on every alive particle from all alive particles within
/// `h_morse`. `grid` must bin exactly the alive particles.
pub fn morse_forces(particles: &[ParticleState], dv: &[f64], grid: &CellGrid, params: &ModelParams) -> Vec<Vec2> {
    morse_forces_with(particles, dv, grid, params, &mut MorseScratch::default())
}

/// [`morse_forces`] reusing the buffers in `scratch`.
pub fn morse_forces_with(
    particles: &[ParticleState],
    dv: &[f64],
    grid: &CellGrid,
    params: &ModelParams,
    scratch: &mut MorseScratch,
) -> Vec<Vec2> {
    let n = particles.len();
    let h = params.h_morse();
    let c_over_l = params.c_r / params.l_r;
    let inv_l = 1.0 / params.l_r;
    // |∇U(r)| / |r| for every pair i < j, each evaluated once.
    scratch.rows.resize_with(n, Vec::new);
    let upper = &mut scratch.rows[..n];
    exec::for_each_mut(upper, |i, row| {
        row.clear();
        let pi = &particles[i];
        if !pi.alive {
            return;
        }
        grid.for_each_within_above(pi.x, h, i, |j, d2| {
            if d2 > 0.0 {
                let d = d2.sqrt();
                row.push((j as u32, c_over_l * (-d * inv_l).exp() / d));
            }
        });
    });
    let mut f = vec![Vec2::ZERO; n];
    for (i, row) in upper.iter().enumerate() {
        let pi = &particles[i];
        let wi = pi.rho * dv[i];
        for &(j, s) in row {
            let j = j as usize;
            let pj = &particles[j];
            let d = pi.x - pj.x;
            f[i] += d * (s * pj.rho * dv[j]);
            f[j] -= d * (s * wi);
        }
    }
    f
}

/// `V(rho) * descent`.
pub fn desired_velocity(descent: Vec2, rho: f64, params: &ModelParams) -> Vec2 {
    descent * speed(rho, params.v_max, params.rho_max, params.v_min)
}

/// Relaxation toward `v_des` integrated exactly over `dt`, forces explicitly.
#[inline]
pub fn step_velocity(u: Vec2, v_des: Vec2, f_morse: Vec2, f_obs: Vec2, dt: f64, t_relax: f64) -> Vec2 {
    v_des + (u - v_des) * (-dt / t_relax).exp() + (f_morse + f_obs) * dt
}

/// Continuity update in exponential form, positive for any finite divergence.
#[inline]
pub fn step_density(rho: f64, div_u: f64, dt: f64) -> f64 {
    rho * (-div_u * dt).exp()
}

/// Solid geometry a pedestrian moves in.
#[derive(Debug, Clone)]
pub struct Boundaries {
    pub domain: Domain,
    /// Wall segments strictly inside the domain (boundary walls are covered
    /// by the domain edge rule).
    pub interior_walls: Vec<Segment>,
}

impl Boundaries {
    pub fn new(domain: &Domain) -> Self {
        let on_boundary = |w: &Segment| {
            (w.is_horizontal() && (w.from.y == 0.0 || w.from.y == domain.height))
                || (!w.is_horizontal() && (w.from.x == 0.0 || w.from.x == domain.width))
        };
        Boundaries {
            domain: domain.clone(),
            interior_walls: domain.walls.iter().filter(|w| !on_boundary(w)).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionUpdate {
    pub x: Vec2,
    pub u: Vec2,
    pub exited: bool,
}

/// Move by `u dt`. Leaving the domain through `exit` removes the particle;
/// crossing any other boundary, wall or obstacle edge puts the particle back
/// on the free side and zeroes the normal velocity component.
pub fn step_position(
    x: Vec2,
    u: Vec2,
    dt: f64,
    exit: &ExitRegion,
    bounds: &Boundaries,
    obstacles: &[Rect],
) -> PositionUpdate {
    let mut next = x + u * dt;
    let mut vel = u;

    for w in &bounds.interior_walls {
        if w.is_horizontal() {
            let (lo, hi) = (w.from.x.min(w.to.x), w.from.x.max(w.to.x));
            let wy = w.from.y;
            let (a, b) = (x.y - wy, next.y - wy);
            if a != 0.0 && (a > 0.0) != (b > 0.0) {
                let t = a / (a - b);
                let cx = x.x + t * (next.x - x.x);
                if cx >= lo && cx <= hi {
                    next.y = wy;
                    vel.y = 0.0;
                }
            }
        } else {
            let (lo, hi) = (w.from.y.min(w.to.y), w.from.y.max(w.to.y));
            let wx = w.from.x;
            let (a, b) = (x.x - wx, next.x - wx);
            if a != 0.0 && (a > 0.0) != (b > 0.0) {
                let t = a / (a - b);
                let cy = x.y + t * (next.y - x.y);
                if cy >= lo && cy <= hi {
                    next.x = wx;
                    vel.x = 0.0;
                }
            }
        }
    }

    let d = &bounds.domain;
    let leaves = |side: Side, p: Vec2| match side {
        Side::Left => p.x < 0.0,
        Side::Right => p.x > d.width,
        Side::Bottom => p.y < 0.0,
        Side::Top => p.y > d.height,
    };
    if leaves(exit.side, next) {
        // Crossing coordinate along the exit side.
        let along = match exit.side {
            Side::Left | Side::Right => {
                let edge = if exit.side == Side::Left { 0.0 } else { d.width };
                let t = if next.x != x.x {
                    (edge - x.x) / (next.x - x.x)
                } else {
                    0.0
                };
                x.y + t.clamp(0.0, 1.0) * (next.y - x.y)
            }
            Side::Bottom | Side::Top => {
                let edge = if exit.side == Side::Bottom { 0.0 } else { d.height };
                let t = if next.y != x.y {
                    (edge - x.y) / (next.y - x.y)
                } else {
                    0.0
                };
                x.x + t.clamp(0.0, 1.0) * (next.x - x.x)
            }
        };
        if exit.covers(along) {
            return PositionUpdate {
                x: next,
                u: vel,
                exited: true,
            };
        }
    }
    if next.x < 0.0 {
        next.x = 0.0;
        vel.x = 0.0;
    } else if next.x > d.width {
        next.x = d.width;
        vel.x = 0.0;
    }
    if next.y < 0.0 {
        next.y = 0.0;
        vel.y = 0.0;
    } else if next.y > d.height {
        next.y = d.height;
        vel.y = 0.0;
    }

    for r in obstacles {
        if let Some((p, n)) = project_out(next, r) {
            next = p;
            vel -= n * vel.dot(n);
        }
    }

    PositionUpdate {
        x: next,
        u: vel,
        exited: false,
    }
}

/// If `p` lies strictly inside `r`, the projection onto the nearest face and
/// that face's outward normal.
#[inline]
pub fn project_out(p: Vec2, r: &Rect) -> Option<(Vec2, Vec2)> {
    if r.contains_strict(p) {
        let (_, n, q) = r.nearest_face(p);
        Some((q, n))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contagion::Fractions;
    use proptest::prelude::*;

    fn corridor() -> Domain {
        Domain {
            width: 100.0,
            height: 50.0,
            walls: vec![
                Segment::new(Vec2::new(0.0, 0.0), Vec2::new(100.0, 0.0)),
                Segment::new(Vec2::new(0.0, 50.0), Vec2::new(100.0, 50.0)),
            ],
            exits: vec![ExitRegion {
                id: "east".into(),
                side: Side::Right,
                interval: [0.0, 50.0],
            }],
        }
    }

    #[test]
    fn isolated_particle_feels_no_force() {
        assert_eq!(morse_force(Vec2::ZERO, std::iter::empty(), 50.0, 2.0), Vec2::ZERO);
        // self term is zero
        assert_eq!(morse_force(Vec2::ZERO, [(Vec2::ZERO, 1.0)], 50.0, 2.0), Vec2::ZERO);
    }

    #[test]
    fn single_neighbour_force() {
        let f = morse_force(Vec2::ZERO, [(Vec2::new(2.0, 0.0), 1.0)], 50.0, 2.0);
        let expected = -25.0 * (-1.0f64).exp();
        assert!((f.x - expected).abs() < 1e-12, "{f:?}");
        assert!((f.x + 9.197).abs() < 1e-3);
        assert_eq!(f.y, 0.0);
    }

    #[test]
    fn pair_forces_cancel() {
        let a = Vec2::new(0.3, 1.1);
        let b = Vec2::new(2.0, -0.5);
        let fa = morse_force(a, [(b, 0.8)], 50.0, 2.0);
        let fb = morse_force(b, [(a, 0.8)], 50.0, 2.0);
        assert_eq!(fa, -fb);
    }

    #[test]
    fn desired_velocity_cases() {
        let p = ModelParams::default();
        assert_eq!(desired_velocity(Vec2::new(1.0, 0.0), 0.0, &p), Vec2::new(2.0, 0.0));
        assert_eq!(desired_velocity(Vec2::new(1.0, 0.0), 10.0, &p), Vec2::new(p.v_min, 0.0));
        assert_eq!(desired_velocity(Vec2::ZERO, 1.0, &p), Vec2::ZERO);
    }

    #[test]
    fn relaxation_step() {
        let u = step_velocity(Vec2::ZERO, Vec2::new(2.0, 0.0), Vec2::ZERO, Vec2::ZERO, 0.001, 0.001);
        let expected = 2.0 * (1.0 - (-1.0f64).exp());
        assert!((u.x - expected).abs() < 1e-14);
        assert!((u.x - 1.264).abs() < 1e-3);
        let v = Vec2::new(1.5, -0.5);
        assert_eq!(step_velocity(v, v, Vec2::ZERO, Vec2::ZERO, 0.001, 0.001), v);
        // stiff limit
        let f = Vec2::new(3.0, 0.0);
        let w = step_velocity(Vec2::new(9.0, 9.0), v, f, Vec2::ZERO, 1.0, 1e-6);
        assert!((w - (v + f)).norm() < 1e-12);
    }

    #[test]
    fn density_update() {
        assert_eq!(step_density(0.4, 0.0, 0.001), 0.4);
        assert_eq!(step_density(0.4, 2.0, 0.001), 0.4 * (-0.002f64).exp());
        assert!(step_density(0.4, 1e5, 0.001) > 0.0);
    }

    #[test]
    fn exit_crossing_removes() {
        let d = corridor();
        let b = Boundaries::new(&d);
        let up = step_position(
            Vec2::new(99.999, 25.0),
            Vec2::new(2.0, 0.0),
            0.001,
            &d.exits[0],
            &b,
            &[],
        );
        assert!(up.exited);
        assert!((up.x.x - 100.001).abs() < 1e-9);
    }

    #[test]
    fn resting_particle_stays() {
        let d = corridor();
        let b = Boundaries::new(&d);
        let x = Vec2::new(40.0, 25.0);
        let up = step_position(x, Vec2::ZERO, 0.001, &d.exits[0], &b, &[]);
        assert_eq!(up.x, x);
        assert!(!up.exited);
    }

    #[test]
    fn top_wall_projection() {
        let d = corridor();
        let b = Boundaries::new(&d);
        let up = step_position(
            Vec2::new(40.0, 49.9995),
            Vec2::new(1.0, 1.0),
            0.001,
            &d.exits[0],
            &b,
            &[],
        );
        assert_eq!(up.x.y, 50.0);
        assert_eq!(up.u, Vec2::new(1.0, 0.0));
        assert!(!up.exited);
    }

    #[test]
    fn non_exit_side_is_solid() {
        let d = corridor();
        let b = Boundaries::new(&d);
        let up = step_position(
            Vec2::new(0.0005, 25.0),
            Vec2::new(-2.0, 0.3),
            0.001,
            &d.exits[0],
            &b,
            &[],
        );
        assert!(!up.exited);
        assert_eq!(up.x.x, 0.0);
        assert_eq!(up.u, Vec2::new(0.0, 0.3));
    }

    #[test]
    fn interior_wall_blocks() {
        let mut d = corridor();
        d.walls.push(Segment::new(Vec2::new(50.0, 10.0), Vec2::new(50.0, 40.0)));
        let b = Boundaries::new(&d);
        assert_eq!(b.interior_walls.len(), 1);
        let up = step_position(
            Vec2::new(49.9995, 20.0),
            Vec2::new(2.0, 0.5),
            0.001,
            &d.exits[0],
            &b,
            &[],
        );
        assert_eq!(up.x.x, 50.0);
        assert_eq!(up.u.x, 0.0);
        // passing beside the wall is fine
        let up = step_position(
            Vec2::new(49.9995, 45.0),
            Vec2::new(2.0, 0.0),
            0.001,
            &d.exits[0],
            &b,
            &[],
        );
        assert!(up.x.x > 50.0);
    }

    #[test]
    fn obstacle_projection() {
        let d = corridor();
        let b = Boundaries::new(&d);
        let r = Rect::new(Vec2::new(45.0, 20.0), Vec2::new(55.0, 30.0));
        let up = step_position(
            Vec2::new(44.9995, 25.0),
            Vec2::new(2.0, 0.5),
            0.001,
            &d.exits[0],
            &b,
            &[r],
        );
        assert_eq!(up.x.x, 45.0);
        assert_eq!(up.u, Vec2::new(0.0, 0.5));
        assert!(!r.contains_strict(up.x));
    }

    fn particle_at(x: Vec2) -> ParticleState {
        ParticleState {
            x,
            u: Vec2::ZERO,
            rho: 1.0,
            m: 1.0,
            alpha: Fractions::susceptible(),
            pop: 0,
            alive: true,
            seeded: Label::Susceptible,
        }
    }

    #[test]
    fn bulk_forces_match_pairwise_sum() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.5),
            Vec2::new(-2.0, 3.0),
            Vec2::new(30.0, 0.0),
        ];
        let ps: Vec<ParticleState> = pts.iter().map(|&x| particle_at(x)).collect();
        let dv = vec![1.0; ps.len()];
        let params = ModelParams::default();
        let grid = CellGrid::build(&pts, params.h_morse(), |_| true);
        let f = morse_forces(&ps, &dv, &grid, &params);
        for i in 0..pts.len() {
            let nb = pts
                .iter()
                .filter(|&&xj| (pts[i] - xj).norm() <= params.h_morse())
                .map(|&xj| (xj, 1.0));
            let g = morse_force(pts[i], nb, params.c_r, params.l_r);
            assert!((f[i] - g).norm() <= 1e-12 * g.norm().max(1.0));
        }
        assert_eq!(f[3], Vec2::ZERO);
    }

    proptest! {
        #[test]
        fn pairwise_antisymmetry(ax in -5.0f64..5.0, ay in -5.0f64..5.0, bx in -5.0f64..5.0, by in -5.0f64..5.0, w in 0.1f64..3.0) {
            let a = Vec2::new(ax, ay);
            let b = Vec2::new(bx, by);
            let fa = morse_force(a, [(b, w)], 50.0, 2.0);
            let fb = morse_force(b, [(a, w)], 50.0, 2.0);
            prop_assert_eq!(fa, -fb);
        }

        #[test]
        fn projection_never_leaves_particle_inside(x in 40.0f64..60.0, y in 15.0f64..35.0, ux in -3.0f64..3.0, uy in -3.0f64..3.0) {
            let d = corridor();
            let b = Boundaries::new(&d);
            let r = Rect::new(Vec2::new(45.0, 20.0), Vec2::new(55.0, 30.0));
            let up = step_position(Vec2::new(x, y), Vec2::new(ux, uy), 0.001, &d.exits[0], &b, &[r]);
            prop_assert!(!r.contains_strict(up.x));
            prop_assert!(d.bounds().contains(up.x));
        }
    }
}
