//! Rigid rectangular obstacles: fixed geometry or a moving body driven by its
//! own guidance field, slowed by the crowd it meets.

use serde::Serialize;

use crate::eikonal::obstacle_speed;
use crate::geometry::{Rect, Side, Vec2};
use crate::params::ModelParams;
use crate::pedestrians::ParticleState;
use crate::pointcloud::CellGrid;
use crate::scenario::{Domain, ExitRegion, ObstacleSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Obstacle {
    pub id: String,
    pub center: Vec2,
    pub velocity: Vec2,
    pub half_extents: Vec2,
    pub goal: Option<String>,
    pub moving: bool,
    /// False once the obstacle has left through its goal.
    pub active: bool,
}

impl Obstacle {
    pub fn from_spec(spec: &ObstacleSpec) -> Self {
        Obstacle {
            id: spec.id.clone(),
            center: spec.center,
            velocity: Vec2::ZERO,
            half_extents: spec.half_extents,
            goal: spec.goal.clone(),
            moving: spec.moving,
            active: true,
        }
    }

    pub fn rect(&self) -> Rect {
        Rect::from_center(self.center, self.half_extents)
    }

    pub fn max_half_extent(&self) -> f64 {
        self.half_extents.x.max(self.half_extents.y)
    }
}

/// `-Σ_j ∇U^O(x^O - x_j) rho_j dV_j` with centre-of-mass distances over the
/// particles binned in `grid` within `radius`.
pub fn obstacle_force_from_crowd(
    center: Vec2,
    particles: &[ParticleState],
    dv: &[f64],
    grid: &CellGrid,
    radius: f64,
    c: f64,
    l: f64,
) -> Vec2 {
    let mut f = Vec2::ZERO;
    grid.for_each_within(center, radius, |j, d2| {
        if d2 == 0.0 {
            return;
        }
        let p = &particles[j];
        let d = d2.sqrt();
        f += (center - p.x) * ((c / l) * (-d / l).exp() * p.rho * dv[j] / d);
    });
    f
}

/// Pedestrian density met by the obstacle: for each population, the
/// average of particle densities within `reach` of the rectangle, weighted
/// by inverse distance to the centre of mass; summed over populations.
pub fn crowd_density_at(
    obstacle: &Obstacle,
    particles: &[ParticleState],
    grid: &CellGrid,
    reach: f64,
    n_pops: usize,
) -> f64 {
    let rect = obstacle.rect();
    let mut num = vec![0.0; n_pops];
    let mut den = vec![0.0; n_pops];
    grid.for_each_within(obstacle.center, obstacle.half_extents.norm() + reach, |j, d2| {
        let p = &particles[j];
        if rect.distance(p.x) > reach || d2 == 0.0 {
            return;
        }
        let w = 1.0 / d2.sqrt();
        num[p.pop] += w * p.rho;
        den[p.pop] += w;
    });
    num.iter()
        .zip(&den)
        .map(|(n, d)| if *d > 0.0 { n / d } else { 0.0 })
        .sum()
}

/// Advance a moving obstacle by one step: exact relaxation toward
/// `V^O(rho) * descent` plus `f_crowd dt`, then an Euler position update.
/// Leaving the domain is only allowed through `goal`; elsewhere the
/// rectangle is clamped inside and the normal velocity zeroed. The obstacle
/// deactivates once its trailing edge is past the goal side.
pub fn step_obstacle(
    obstacle: &Obstacle,
    descent: Vec2,
    rho: f64,
    f_crowd: Vec2,
    params: &ModelParams,
    domain: &Domain,
    goal: Option<&ExitRegion>,
) -> Obstacle {
    let mut next = obstacle.clone();
    if !obstacle.moving || !obstacle.active {
        return next;
    }
    let dt = params.dt;
    let v_des = descent * obstacle_speed(rho, params);
    next.velocity = v_des + (obstacle.velocity - v_des) * (-dt / params.t_obs).exp() + f_crowd * dt;
    next.center = obstacle.center + next.velocity * dt;

    let h = obstacle.half_extents;
    let open = goal.map(|g| g.side);
    let clamp_axis = |c: &mut f64, v: &mut f64, lo: f64, hi: f64, lo_side: Side, hi_side: Side| {
        if *c < lo && open != Some(lo_side) {
            *c = lo;
            *v = 0.0;
        } else if *c > hi && open != Some(hi_side) {
            *c = hi;
            *v = 0.0;
        }
    };
    clamp_axis(
        &mut next.center.x,
        &mut next.velocity.x,
        h.x,
        domain.width - h.x,
        Side::Left,
        Side::Right,
    );
    clamp_axis(
        &mut next.center.y,
        &mut next.velocity.y,
        h.y,
        domain.height - h.y,
        Side::Bottom,
        Side::Top,
    );

    if let Some(g) = goal {
        let r = next.rect();
        let gone = match g.side {
            Side::Left => r.max.x < 0.0,
            Side::Right => r.min.x > domain.width,
            Side::Bottom => r.max.y < 0.0,
            Side::Top => r.min.y > domain.height,
        };
        if gone {
            next.active = false;
        }
    }
    next
}

/// Short-range push `c_pen exp(-d / l_pen) n` away from each rectangle,
/// with `d` the distance to the boundary (0 inside) and `n` the outward
/// normal of the nearest face; zero beyond `3 l_pen`.
pub fn crowd_force_from_obstacle(x: Vec2, rects: &[Rect], c_pen: f64, l_pen: f64) -> Vec2 {
    let mut f = Vec2::ZERO;
    for r in rects {
        let (d, n) = r.boundary_distance_and_normal(x);
        if d <= 3.0 * l_pen {
            f += n * (c_pen * (-d / l_pen).exp());
        }
    }
    f
}
