//! Step orchestration: neighbour search, volumes, navigation refresh,
//! forces, contagion, kinematics, obstacle motion, removal, diagnostics.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::contagion::{exposed_percentage, step_fractions, ContagionKernel};
use crate::eikonal::{refresh_policy, shepard, NavigationSnapshot, Navigator, ObstacleGuide};
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{Rect, Vec2};
use crate::obstacle::{
    crowd_density_at, crowd_force_from_obstacle, obstacle_force_from_crowd, step_obstacle, Obstacle,
};
use crate::params::ModelParams;
use crate::pedestrians::{
    desired_velocity, morse_forces_with, project_out, step_density, step_position, step_velocity, Boundaries,
    MorseScratch, ParticleState,
};
use crate::pointcloud::{mean_spacing, update_volumes, CellGrid, LsqStencils};
use crate::scenario::{seed_particles, ExitRegion, Scenario};

/// Cell size of the short-range grid (contagion, stencils, density mixing).
pub use crate::io::run::{run, run_simulation, RunOutcome};

const NEAR_CELL: f64 = 2.5;

/// Particles farther than this many mean spacings from an obstacle do not
/// enter its density estimate.
const OBSTACLE_DENSITY_REACH: f64 = 2.0;

/// Where the fraction update sits relative to the kinematic update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseOrder {
    /// Fractions see the step-start positions and velocities.
    #[default]
    FractionsFirst,
    /// Fractions see the updated positions and velocities.
    KinematicsFirst,
}

/// Running extremes and counters over a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Largest `|α_S + α_E + α_I - 1|` over alive particles and steps.
    pub max_simplex_error: f64,
    /// Largest relative mismatch of alive plus removed mass.
    pub max_mass_error: f64,
    /// Particle-steps with `|u| > 2 V_max`.
    pub speed_warnings: u64,
    /// Largest number of degenerate stencils in one step.
    pub max_degenerate_stencils: usize,
    /// Largest number of unreachable nodes in one refresh.
    pub max_unreachable_nodes: usize,
    pub eikonal_solves: u64,
    pub max_obstacle_speed: f64,
    pub removed_particles: usize,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub particles: Vec<ParticleState>,
    pub obstacles: Vec<Obstacle>,
    pub navigation: Option<NavigationSnapshot>,
    pub initial_mass: f64,
    pub removed_mass: f64,
    pub diagnostics: Diagnostics,
}

impl SimState {
    pub fn alive_count(&self) -> usize {
        self.particles.iter().filter(|p| p.alive).count()
    }

    /// Mean density over alive particles, zero when none are left.
    pub fn mean_density(&self) -> f64 {
        let (sum, n) = self
            .particles
            .iter()
            .filter(|p| p.alive)
            .fold((0.0, 0usize), |(s, n), p| (s + p.rho, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    pub fn alive_mass(&self) -> f64 {
        self.particles.iter().filter(|p| p.alive).map(|p| p.m).sum()
    }
}

/// A scenario being integrated in time.
#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
    navigator: Navigator,
    guides: Vec<Option<ObstacleGuide>>,
    boundaries: Boundaries,
    pop_exit: Vec<ExitRegion>,
    obstacle_goal: Vec<Option<ExitRegion>>,
    solved_at: Vec<Vec2>,
    order: PhaseOrder,
    morse: MorseScratch,
    state: SimState,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self> {
        Self::with_order(scenario, PhaseOrder::default())
    }

    pub fn with_order(scenario: Scenario, order: PhaseOrder) -> Result<Self> {
        scenario.validate()?;
        let particles = seed_particles(&scenario)?;
        let navigator = Navigator::new(&scenario)?;
        let obstacles: Vec<Obstacle> = scenario.obstacles.iter().map(Obstacle::from_spec).collect();
        let obstacle_goal: Vec<Option<ExitRegion>> = obstacles
            .iter()
            .map(|o| o.goal.as_ref().and_then(|g| scenario.domain.exit(g)).cloned())
            .collect();
        let guides = obstacles
            .iter()
            .zip(&obstacle_goal)
            .map(|(o, g)| match (o.moving, g) {
                (true, Some(g)) => navigator.obstacle_guide(g).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        let pop_exit = scenario
            .populations
            .iter()
            .map(|p| {
                scenario
                    .domain
                    .exit(&p.goal)
                    .cloned()
                    .ok_or_else(|| Error::validation("populations.goal", format!("unknown exit '{}'", p.goal)))
            })
            .collect::<Result<Vec<_>>>()?;
        let initial_mass = particles.iter().map(|p| p.m).sum();
        let solved_at = obstacles.iter().map(|o| o.center).collect();
        Ok(Simulation {
            boundaries: Boundaries::new(&scenario.domain),
            navigator,
            guides,
            pop_exit,
            obstacle_goal,
            solved_at,
            order,
            morse: MorseScratch::default(),
            state: SimState {
                t: 0.0,
                step: 0,
                particles,
                obstacles,
                navigation: None,
                initial_mass,
                removed_mass: 0.0,
                diagnostics: Diagnostics::default(),
            },
            scenario,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn params(&self) -> &ModelParams {
        &self.scenario.params
    }

    pub fn navigator(&self) -> &Navigator {
        &self.navigator
    }

    pub fn exposed_percent(&self) -> f64 {
        exposed_percentage(&self.state.particles, self.scenario.params.exposure_threshold)
    }

    /// Advance by one time step.
    pub fn advance(&mut self) -> Result<()> {
        let step = self.state.step;
        let phase = |name: &'static str| {
            move |e: Error| Error::Phase {
                step,
                phase: name,
                source: Box::new(e),
            }
        };
        let params = self.scenario.params.clone();
        let dt = params.dt;
        let particles = &self.state.particles;
        let n = particles.len();
        let n_pops = self.scenario.populations.len();

        // (1) neighbours
        let pos: Vec<Vec2> = particles.iter().map(|p| p.x).collect();
        let alive = |i: usize| particles[i].alive;
        let far_grid = CellGrid::build(&pos, 0.5 * params.h_morse(), alive);
        let near_grid = CellGrid::build(&pos, NEAR_CELL, alive);

        // (2) volumes
        let dv = update_volumes(particles).map_err(phase("volumes"))?;
        let spacing = mean_spacing(particles, &dv).unwrap_or(self.navigator.spacing());
        let stencils = LsqStencils::build_grouped(&pos, &near_grid, spacing, |i| {
            particles[i].alive.then_some(particles[i].pop)
        });
        self.state.diagnostics.max_degenerate_stencils = self
            .state
            .diagnostics
            .max_degenerate_stencils
            .max(stencils.degenerate_count());

        // (3) navigation
        let active_moving: Vec<Rect> = self
            .state
            .obstacles
            .iter()
            .filter(|o| o.moving && o.active)
            .map(|o| o.rect())
            .collect();
        let shift = self
            .state
            .obstacles
            .iter()
            .zip(&self.solved_at)
            .filter(|(o, _)| o.moving && o.active)
            .map(|(o, c)| (o.center - *c).norm())
            .fold(0.0, f64::max);
        if self.state.navigation.is_none() || refresh_policy(step, u64::from(params.eikonal_every), shift, spacing) {
            let snap = self
                .navigator
                .refresh(particles, &active_moving, &params, self.state.t)
                .map_err(phase("eikonal"))?;
            self.state.diagnostics.eikonal_solves += 1;
            self.state.diagnostics.max_unreachable_nodes = self
                .state
                .diagnostics
                .max_unreachable_nodes
                .max(snap.unreachable_count());
            self.state.navigation = Some(snap);
            self.solved_at = self.state.obstacles.iter().map(|o| o.center).collect();
        }
        let nav = self.state.navigation.as_ref().expect("navigation solved above");

        // (4) forces and desired velocities
        let active_rects: Vec<Rect> = self
            .state
            .obstacles
            .iter()
            .filter(|o| o.active)
            .map(|o| o.rect())
            .collect();
        let f_morse = morse_forces_with(particles, &dv, &far_grid, &params, &mut self.morse);
        let h_mix = 1.5 * self.navigator.spacing();
        let pop_grids: Vec<CellGrid> = if n_pops > 1 {
            (0..n_pops)
                .map(|q| CellGrid::build(&pos, h_mix, |i| particles[i].alive && particles[i].pop == q))
                .collect()
        } else {
            Vec::new()
        };
        let v_des: Vec<Vec2> = exec::map_range(n, |i| {
            let p = &particles[i];
            if !p.alive {
                return Vec2::ZERO;
            }
            let mut rho = p.rho;
            for (q, g) in pop_grids.iter().enumerate() {
                if q != p.pop {
                    rho += shepard(g, p.x, h_mix, |j| particles[j].rho).unwrap_or(0.0);
                }
            }
            desired_velocity(nav.descent(i, self.navigator.goal_of_population(p.pop)), rho, &params)
        });
        let f_obs: Vec<Vec2> = if params.penalty_enabled && !active_rects.is_empty() {
            exec::map_range(n, |i| {
                if particles[i].alive {
                    crowd_force_from_obstacle(particles[i].x, &active_rects, params.c_pen, params.l_pen)
                } else {
                    Vec2::ZERO
                }
            })
        } else {
            vec![Vec2::ZERO; n]
        };

        // (6) kinematics, computed from the step-start state
        let u_new: Vec<Vec2> = exec::map_range(n, |i| {
            let p = &particles[i];
            if p.alive {
                step_velocity(p.u, v_des[i], f_morse[i], f_obs[i], dt, params.t_relax)
            } else {
                p.u
            }
        });
        let moved: Vec<(Vec2, Vec2, f64, bool)> = exec::map_range(n, |i| {
            let p = &particles[i];
            if !p.alive {
                return (p.x, p.u, p.rho, false);
            }
            let div = stencils.divergence_at(i, &u_new);
            let rho = step_density(p.rho, div, dt);
            let up = step_position(
                p.x,
                u_new[i],
                dt,
                &self.pop_exit[p.pop],
                &self.boundaries,
                &active_rects,
            );
            (up.x, up.u, rho, up.exited)
        });

        // (5) contagion
        let kernel = ContagionKernel::new(params.i_o, params.contact_time_enabled);
        let h_phi = params.h_phi;
        let beta_from = |xs: &(dyn Fn(usize) -> (Vec2, Vec2) + Sync), grid: &CellGrid| -> Vec<f64> {
            exec::map_range(n, |i| {
                if !particles[i].alive {
                    return 0.0;
                }
                let (xi, ui) = xs(i);
                let mut beta = 0.0;
                grid.for_each_within(xi, h_phi, |j, d2| {
                    let aj = particles[j].alpha.i;
                    if aj > 0.0 {
                        let (_, uj) = xs(j);
                        beta += kernel.value_sq(d2, (ui - uj).norm_sq()) * aj * dv[j];
                    }
                });
                beta
            })
        };
        let beta = match self.order {
            PhaseOrder::FractionsFirst => beta_from(&|i| (particles[i].x, particles[i].u), &near_grid),
            PhaseOrder::KinematicsFirst => {
                let new_pos: Vec<Vec2> = moved.iter().map(|m| m.0).collect();
                let grid = CellGrid::build(&new_pos, NEAR_CELL, |i| particles[i].alive);
                beta_from(&|i| (moved[i].0, moved[i].1), &grid)
            }
        };
        let mut alpha_new = Vec::with_capacity(n);
        for (i, p) in particles.iter().enumerate() {
            if !p.alive {
                alpha_new.push(p.alpha);
                continue;
            }
            let a = step_fractions(p.alpha, beta[i], params.nu, params.theta, dt).map_err(|e| {
                phase("contagion")(Error::TimeStep {
                    particle: i,
                    product: e.0,
                })
            })?;
            alpha_new.push(a);
        }

        // (7) obstacles, from the step-start particle snapshot
        let mut obstacles = self.state.obstacles.clone();
        for (k, o) in self.state.obstacles.iter().enumerate() {
            if !(o.moving && o.active) {
                continue;
            }
            let guide = self.guides[k].as_ref().expect("moving obstacles have a guide");
            let descent = guide.descent_at(o.center);
            let rho = crowd_density_at(o, particles, &near_grid, OBSTACLE_DENSITY_REACH * spacing, n_pops);
            let f = obstacle_force_from_crowd(
                o.center,
                particles,
                &dv,
                &far_grid,
                params.h_morse_obstacle(o.max_half_extent()),
                params.c_r_obs,
                params.l_r_obs,
            );
            obstacles[k] = step_obstacle(
                o,
                descent,
                rho,
                f,
                &params,
                &self.scenario.domain,
                self.obstacle_goal[k].as_ref(),
            );
            self.state.diagnostics.max_obstacle_speed = self
                .state
                .diagnostics
                .max_obstacle_speed
                .max(obstacles[k].velocity.norm());
        }
        let moved_rects: Vec<(Rect, Vec2)> = obstacles
            .iter()
            .filter(|o| o.moving && o.active)
            .map(|o| (o.rect(), o.velocity))
            .collect();

        // commit, re-project around moved obstacles, (8) removal
        let mut removed = 0.0;
        for (i, p) in self.state.particles.iter_mut().enumerate() {
            if !p.alive {
                continue;
            }
            let (x, u, rho, exited) = moved[i];
            p.x = x;
            p.u = u;
            p.rho = rho;
            p.alpha = alpha_new[i];
            if exited {
                p.alive = false;
                removed += p.m;
                self.state.diagnostics.removed_particles += 1;
                continue;
            }
            for (r, v) in &moved_rects {
                if let Some((q, nrm)) = project_out(p.x, r) {
                    p.x = q;
                    let un = p.u.dot(nrm);
                    let vn = v.dot(nrm);
                    if un < vn {
                        p.u += nrm * (vn - un);
                    }
                }
            }
        }
        self.state.removed_mass += removed;
        self.state.obstacles = obstacles;
        self.state.step += 1;
        self.state.t = self.state.step as f64 * dt;

        // (9) diagnostics
        let d = &mut self.state.diagnostics;
        let mut alive_mass = 0.0;
        for p in self.state.particles.iter().filter(|p| p.alive) {
            alive_mass += p.m;
            d.max_simplex_error = d.max_simplex_error.max((p.alpha.sum() - 1.0).abs());
            if p.u.norm() > 2.0 * params.v_max {
                d.speed_warnings += 1;
            }
        }
        let mass_err =
            ((alive_mass + self.state.removed_mass) - self.state.initial_mass).abs() / self.state.initial_mass;
        d.max_mass_error = d.max_mass_error.max(mass_err);
        if d.speed_warnings > 0 && d.speed_warnings % 100_000 == 1 {
            warn!("particle speed above 2 V_max at t = {:.3}", self.state.t);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    const SMALL: &str = r#"
name = "small"
[domain]
width = 30.0
height = 12.0
walls = [{ from = [0.0, 0.0], to = [30.0, 0.0] }, { from = [0.0, 12.0], to = [30.0, 12.0] }]
exits = [{ id = "east", side = "right", interval = [0.0, 12.0] }]
[[populations]]
id = "walkers"
goal = "east"
spacing = 1.0
block = { min = [20.0, 2.0], max = [28.0, 10.0] }
sub_blocks = [{ min = [23.0, 5.0], max = [25.0, 7.0], fractions = [0.0, 0.0, 1.0] }]
"#;

    #[test]
    fn empty_state_with_fixed_obstacle_only_advances_time() {
        let text = r#"
[domain]
width = 30.0
height = 12.0
exits = [{ id = "east", side = "right", interval = [0.0, 12.0] }]
[[populations]]
id = "walkers"
goal = "east"
spacing = 1.0
block = { min = [20.0, 2.0], max = [28.0, 10.0] }
[[obstacles]]
id = "pillar"
center = [10.0, 6.0]
half_extents = [1.0, 1.0]
"#;
        let sc = parse_scenario(text, "x").unwrap();
        let mut sim = Simulation::new(sc).unwrap();
        for p in sim.state.particles.iter_mut() {
            p.alive = false;
        }
        let before = sim.state.clone();
        sim.advance().unwrap();
        assert_eq!(sim.state.step, 1);
        assert_eq!(sim.state.t, 0.001);
        assert_eq!(sim.state.particles, before.particles);
        assert_eq!(sim.state.obstacles, before.obstacles);
    }

    #[test]
    fn crowd_walks_out_and_mass_balances() {
        let sc = parse_scenario(SMALL, "x").unwrap();
        let mut sim = Simulation::new(sc).unwrap();
        let m0 = sim.state.initial_mass;
        for _ in 0..3000 {
            sim.advance().unwrap();
            let s = sim.state();
            assert!(((s.alive_mass() + s.removed_mass) - m0).abs() <= 1e-12 * m0);
            assert!(s.particles.iter().filter(|p| p.alive).all(|p| p.rho > 0.0));
        }
        let s = sim.state();
        assert!(s.diagnostics.removed_particles > 0);
        assert!(s.diagnostics.max_simplex_error < 1e-12);
        let alive: Vec<_> = s.particles.iter().filter(|p| p.alive).collect();
        let mean_ux = alive.iter().map(|p| p.u.x).sum::<f64>() / alive.len() as f64;
        assert!(mean_ux > 0.5, "{mean_ux}");
    }

    #[test]
    fn phase_order_changes_exposure_by_order_dt() {
        let sc = parse_scenario(SMALL, "x").unwrap();
        let mut a = Simulation::with_order(sc.clone(), PhaseOrder::FractionsFirst).unwrap();
        let mut b = Simulation::with_order(sc, PhaseOrder::KinematicsFirst).unwrap();
        for _ in 0..500 {
            a.advance().unwrap();
            b.advance().unwrap();
        }
        let max_diff = a
            .state()
            .particles
            .iter()
            .zip(&b.state().particles)
            .map(|(p, q)| (p.alpha.e - q.alpha.e).abs())
            .fold(0.0, f64::max);
        let max_e = a.state().particles.iter().map(|p| p.alpha.e).fold(0.0, f64::max);
        assert!(max_e > 0.0);
        assert!(max_diff <= 10.0 * 0.001 * max_e.max(1e-3), "{max_diff} vs {max_e}");
    }
}
