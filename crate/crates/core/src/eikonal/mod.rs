//! Travel-cost fields `V(rho) |∇Φ| = 1` on the particle cloud and the unit
//! descent directions derived from them.

mod cloud;
mod fmm;
mod sweep;
mod update;

pub use cloud::{
    classify_nodes, shepard, stamp_obstacle_boundary, wall_ghosts, BackgroundLattice, NodeKind, SolveCloud,
};
pub use sweep::SWEEP_TOL;

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{Rect, Segment, Vec2};
use crate::params::ModelParams;
use crate::pedestrians::ParticleState;
use crate::pointcloud::{fit_gradient, CellGrid};
use crate::scenario::{Domain, ExitRegion, Scenario, SolverKind};

/// Gradient norm below which the descent falls back to the exit normal.
pub const EPS_GRAD: f64 = 1e-8;

/// Neighbour radius of the solve cloud in units of the lattice spacing.
const RADIUS_FACTOR: f64 = 2.1;

/// Radius of the density interpolation in units of the seeding spacing.
const MIX_FACTOR: f64 = 1.5;

/// `max(v_min, v_max (1 - rho / rho_max))`.
#[inline]
pub fn speed(rho: f64, v_max: f64, rho_max: f64, v_min: f64) -> f64 {
    (v_max * (1.0 - rho / rho_max)).max(v_min)
}

/// Pedestrian speed at every density.
pub fn speed_field(rho: &[f64], params: &ModelParams) -> Vec<f64> {
    rho.iter()
        .map(|&r| speed(r, params.v_max, params.rho_max, params.v_min))
        .collect()
}

/// Obstacle speed at the crowd density it meets.
pub fn obstacle_speed(rho: f64, params: &ModelParams) -> f64 {
    speed(rho, params.v_max_obs, params.rho_max, params.v_min)
}

/// Whether the fields must be recomputed at `step`.
pub fn refresh_policy(step: u64, every: u64, obstacle_shift: f64, spacing: f64) -> bool {
    step % every.max(1) == 0 || obstacle_shift > spacing
}

/// One solved travel-cost field on a [`SolveCloud`].
#[derive(Debug, Clone)]
pub struct EikonalField {
    pub goal_id: String,
    pub phi: Vec<f64>,
    pub descent: Vec<Vec2>,
    /// Free nodes no goal could be reached from.
    pub unreachable: Vec<u32>,
    /// Simulation time of the solve.
    pub stamp: f64,
}

/// Solve for `Φ` on `cloud` and derive descent directions.
pub fn solve_eikonal(
    cloud: &SolveCloud,
    kind: &[NodeKind],
    speed: &[f64],
    goal_id: &str,
    exit_normal: Vec2,
    solver: SolverKind,
    phi_wall: f64,
) -> Result<EikonalField> {
    if !kind.contains(&NodeKind::Goal) {
        return Err(Error::validation(
            format!("goal '{goal_id}'"),
            "no cloud node lies on the exit",
        ));
    }
    let mut phi = match solver {
        SolverKind::FastMarching => fmm::march(cloud, kind, speed, phi_wall),
        SolverKind::Sweeping => sweep::sweep(cloud, kind, speed, phi_wall),
    };
    let mut unreachable = Vec::new();
    for (i, v) in phi.iter_mut().enumerate() {
        if !v.is_finite() {
            *v = phi_wall;
            unreachable.push(i as u32);
        }
    }
    let descent = descent_directions(cloud, kind, &phi, &unreachable, exit_normal);
    Ok(EikonalField {
        goal_id: goal_id.to_string(),
        phi,
        descent,
        unreachable,
        stamp: 0.0,
    })
}

/// `-∇Φ / |∇Φ|` from least-squares gradients over the visible solved
/// neighbours. Ghosts and unreachable nodes only bound the solve and stay
/// out of the fit. Degenerate stencils point to the lowest neighbour.
fn descent_directions(
    cloud: &SolveCloud,
    kind: &[NodeKind],
    phi: &[f64],
    unreachable: &[u32],
    exit_normal: Vec2,
) -> Vec<Vec2> {
    let mut dead = vec![false; cloud.len()];
    for &i in unreachable {
        dead[i as usize] = true;
    }
    exec::map_range(cloud.len(), |i| {
        if kind[i] == NodeKind::Wall || dead[i] {
            return Vec2::ZERO;
        }
        let nbrs = || {
            cloud
                .neighbors
                .neighbors(i)
                .iter()
                .map(|&j| j as usize)
                .filter(|&j| j != i && !cloud.ghost[j] && !dead[j])
        };
        let samples = nbrs().map(|j| (cloud.points[j], phi[j]));
        let g = match fit_gradient(cloud.points[i], phi[i], samples, cloud.radius) {
            Some(g) => g,
            None => {
                let low = nbrs()
                    .filter(|&j| phi[j] < phi[i])
                    .min_by(|&a, &b| phi[a].total_cmp(&phi[b]).then(a.cmp(&b)));
                match low {
                    Some(j) => (cloud.points[i] - cloud.points[j]).normalized_or_zero(0.0),
                    None => Vec2::ZERO,
                }
            }
        };
        if g.norm() < EPS_GRAD {
            exit_normal
        } else {
            -(g / g.norm())
        }
    })
}

/// Solve cloud and fields for all pedestrian goals at one refresh.
#[derive(Debug, Clone)]
pub struct NavigationSnapshot {
    pub cloud: SolveCloud,
    /// Node of each particle; `None` for dead or covered particles.
    pub node_of: Vec<Option<u32>>,
    /// One field per distinct pedestrian goal.
    pub fields: Vec<EikonalField>,
    /// Total pedestrian density at every node.
    pub density: Vec<f64>,
    pub speed: Vec<f64>,
}

impl NavigationSnapshot {
    /// Descent of particle `i` in the field with index `goal`.
    pub fn descent(&self, i: usize, goal: usize) -> Vec2 {
        match self.node_of[i] {
            Some(n) => self.fields[goal].descent[n as usize],
            None => Vec2::ZERO,
        }
    }

    pub fn unreachable_count(&self) -> usize {
        self.fields.iter().map(|f| f.unreachable.len()).sum()
    }
}

/// Unit-speed guidance field for an obstacle, solved once on the static
/// lattice.
#[derive(Debug, Clone)]
pub struct ObstacleGuide {
    pub cloud: SolveCloud,
    pub field: EikonalField,
    grid: CellGrid,
    radius: f64,
}

impl ObstacleGuide {
    /// Interpolated unit descent at `x`, zero when no solved node is near.
    pub fn descent_at(&self, x: Vec2) -> Vec2 {
        let mut acc = Vec2::ZERO;
        let mut exact = None;
        self.grid.for_each_within(x, self.radius, |j, d2| {
            if d2 == 0.0 {
                exact = Some(j);
            } else {
                acc += self.field.descent[j] / d2;
            }
        });
        let v = match exact {
            Some(j) => self.field.descent[j],
            None => acc,
        };
        v.normalized_or_zero(EPS_GRAD)
    }

    pub fn phi_at(&self, x: Vec2) -> Option<f64> {
        shepard(&self.grid, x, self.radius, |j| self.field.phi[j])
    }
}

/// Static geometry and settings for building solve clouds.
#[derive(Debug, Clone)]
pub struct Navigator {
    domain: Domain,
    lattice: BackgroundLattice,
    static_ghosts: Vec<Vec2>,
    fixed: Vec<Rect>,
    interior_walls: Vec<Segment>,
    goals: Vec<ExitRegion>,
    pop_goal: Vec<usize>,
    spacing: f64,
    radius: f64,
    band: f64,
    h_mix: f64,
    solver: SolverKind,
    phi_wall: f64,
}

impl Navigator {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let spacing = scenario.base_spacing();
        let fixed: Vec<Rect> = scenario
            .obstacles
            .iter()
            .filter(|o| !o.moving)
            .map(|o| o.rect())
            .collect();
        let lattice = BackgroundLattice::new(&scenario.domain, spacing, &fixed);
        let mut static_ghosts = wall_ghosts(&scenario.domain.walls, spacing);
        for r in &fixed {
            static_ghosts.extend(stamp_obstacle_boundary(r, spacing));
        }
        let d = &scenario.domain;
        let interior_walls = d
            .walls
            .iter()
            .filter(|w| {
                let on_x = !w.is_horizontal() && (w.from.x == 0.0 || w.from.x == d.width);
                let on_y = w.is_horizontal() && (w.from.y == 0.0 || w.from.y == d.height);
                !(on_x || on_y)
            })
            .copied()
            .collect();
        let mut goals: Vec<ExitRegion> = Vec::new();
        let mut pop_goal = Vec::new();
        for p in &scenario.populations {
            let k = match goals.iter().position(|g| g.id == p.goal) {
                Some(k) => k,
                None => {
                    let exit = d
                        .exit(&p.goal)
                        .ok_or_else(|| Error::validation("populations.goal", format!("unknown exit '{}'", p.goal)))?;
                    goals.push(exit.clone());
                    goals.len() - 1
                }
            };
            pop_goal.push(k);
        }
        let s_bg = lattice.max_spacing();
        Ok(Navigator {
            domain: d.clone(),
            lattice,
            static_ghosts,
            fixed,
            interior_walls,
            goals,
            pop_goal,
            spacing,
            radius: RADIUS_FACTOR * s_bg,
            band: 0.5 * s_bg + 1e-9,
            h_mix: MIX_FACTOR * spacing,
            solver: scenario.run.solver,
            phi_wall: scenario.params.phi_wall,
        })
    }

    pub fn goals(&self) -> &[ExitRegion] {
        &self.goals
    }

    /// Field index guiding population `pop`.
    pub fn goal_of_population(&self, pop: usize) -> usize {
        self.pop_goal[pop]
    }

    pub fn lattice(&self) -> &BackgroundLattice {
        &self.lattice
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Solve all pedestrian fields for the current particles, with the
    /// rectangles in `moving` treated as solid.
    pub fn refresh(
        &self,
        particles: &[ParticleState],
        moving: &[Rect],
        params: &ModelParams,
        t: f64,
    ) -> Result<NavigationSnapshot> {
        let covered = |p: Vec2| moving.iter().chain(&self.fixed).any(|r| r.contains_strict(p));
        let mut points = Vec::with_capacity(particles.len() + self.lattice.points.len() + self.static_ghosts.len());
        let mut node_of = vec![None; particles.len()];
        let mut owner: Vec<Option<u32>> = Vec::with_capacity(points.capacity());
        for (i, p) in particles.iter().enumerate() {
            if p.alive && !covered(p.x) {
                node_of[i] = Some(points.len() as u32);
                points.push(p.x);
                owner.push(Some(i as u32));
            }
        }
        for &q in &self.lattice.points {
            if !moving.iter().any(|r| r.contains_strict(q)) {
                points.push(q);
                owner.push(None);
            }
        }
        let n_solid = points.len();
        points.extend_from_slice(&self.static_ghosts);
        for r in moving {
            points.extend(stamp_obstacle_boundary(r, self.spacing));
        }
        let ghost: Vec<bool> = (0..points.len()).map(|k| k >= n_solid).collect();
        owner.resize(points.len(), None);

        let blockers: Vec<Rect> = self.fixed.iter().chain(moving).copied().collect();
        let cloud = SolveCloud::new(points, ghost, self.radius, &blockers, &self.interior_walls);

        let n_pops = self.pop_goal.len();
        let pos: Vec<Vec2> = particles.iter().map(|p| p.x).collect();
        let grids: Vec<CellGrid> = (0..n_pops)
            .map(|q| CellGrid::build(&pos, self.h_mix, |i| particles[i].alive && particles[i].pop == q))
            .collect();
        let density: Vec<f64> = exec::map_range(cloud.len(), |k| {
            if cloud.ghost[k] {
                return 0.0;
            }
            let x = cloud.points[k];
            let own = owner[k].map(|i| &particles[i as usize]);
            (0..n_pops)
                .map(|q| match own {
                    Some(p) if p.pop == q => p.rho,
                    _ => shepard(&grids[q], x, self.h_mix, |j| particles[j].rho).unwrap_or(0.0),
                })
                .sum()
        });
        let speed = speed_field(&density, params);

        let fields = exec::map_slice(&self.goals, |_, exit| {
            let kind = classify_nodes(&cloud, &self.domain, exit, self.band);
            solve_eikonal(
                &cloud,
                &kind,
                &speed,
                &exit.id,
                exit.side.outward_normal(),
                self.solver,
                self.phi_wall,
            )
            .map(|mut f| {
                f.stamp = t;
                f
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        Ok(NavigationSnapshot {
            cloud,
            node_of,
            fields,
            density,
            speed,
        })
    }

    /// Unit-speed field toward `goal` on the static lattice.
    pub fn obstacle_guide(&self, goal: &ExitRegion) -> Result<ObstacleGuide> {
        let mut points = self.lattice.points.clone();
        let n_solid = points.len();
        points.extend_from_slice(&self.static_ghosts);
        let ghost: Vec<bool> = (0..points.len()).map(|k| k >= n_solid).collect();
        let cloud = SolveCloud::new(points, ghost, self.radius, &self.fixed, &self.interior_walls);
        let kind = classify_nodes(&cloud, &self.domain, goal, self.band);
        let unit = vec![1.0; cloud.len()];
        let field = solve_eikonal(
            &cloud,
            &kind,
            &unit,
            &goal.id,
            goal.side.outward_normal(),
            self.solver,
            self.phi_wall,
        )?;
        let mut unusable = vec![false; cloud.len()];
        for &i in &field.unreachable {
            unusable[i as usize] = true;
        }
        let grid = CellGrid::build(&cloud.points, self.radius, |i| !cloud.ghost[i] && !unusable[i]);
        Ok(ObstacleGuide {
            radius: self.radius,
            cloud,
            field,
            grid,
        })
    }
}
