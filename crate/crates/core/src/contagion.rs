//! SEIS volume fractions carried by the particles and the non-local,
//! contact-time weighted infection rate.

use serde::{Deserialize, Serialize};

use crate::exec;
use crate::geometry::Vec2;
use crate::pedestrians::ParticleState;
use crate::pointcloud::NeighborTable;

/// Below this a negative fraction is treated as rounding noise and clamped.
const CLAMP_ACTIVATION: f64 = 1e-14;

/// Volume fractions (susceptible, exposed, infected).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Fractions {
    pub s: f64,
    pub e: f64,
    pub i: f64,
}

impl Fractions {
    pub const fn new(s: f64, e: f64, i: f64) -> Self {
        Fractions { s, e, i }
    }

    pub const fn susceptible() -> Self {
        Fractions::new(1.0, 0.0, 0.0)
    }

    pub const fn infected() -> Self {
        Fractions::new(0.0, 0.0, 1.0)
    }

    pub fn sum(&self) -> f64 {
        self.s + self.e + self.i
    }

    pub fn check_simplex(&self) -> Result<(), String> {
        let parts = [self.s, self.e, self.i];
        if parts.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(format!("components must lie in [0, 1], got {parts:?}"));
        }
        if (self.sum() - 1.0).abs() > 1e-12 {
            return Err(format!("components must sum to 1, got {}", self.sum()));
        }
        Ok(())
    }
}

impl From<[f64; 3]> for Fractions {
    fn from(a: [f64; 3]) -> Self {
        Fractions::new(a[0], a[1], a[2])
    }
}

impl From<Fractions> for [f64; 3] {
    fn from(f: Fractions) -> Self {
        [f.s, f.e, f.i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Susceptible,
    Exposed,
    Infected,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Susceptible => "susceptible",
            Label::Exposed => "exposed",
            Label::Infected => "infected",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "susceptible" => Some(Label::Susceptible),
            "exposed" => Some(Label::Exposed),
            "infected" => Some(Label::Infected),
            _ => None,
        }
    }
}

/// Infected above one half, exposed above `threshold`, susceptible otherwise.
pub fn classify(alpha: Fractions, threshold: f64) -> Label {
    if alpha.i > 0.5 {
        Label::Infected
    } else if alpha.e > threshold {
        Label::Exposed
    } else {
        Label::Susceptible
    }
}

/// Infection kernel `i_o * phi_X(r) * phi_V(s)` with
/// `phi_X(r) = exp(-r^4)` and `phi_V(s) = exp(-s^6)`; with contact time
/// disabled `phi_V` is identically one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContagionKernel {
    pub i_o: f64,
    pub contact_time_enabled: bool,
}

impl ContagionKernel {
    pub fn new(i_o: f64, contact_time_enabled: bool) -> Self {
        ContagionKernel {
            i_o,
            contact_time_enabled,
        }
    }

    #[inline]
    pub fn phi_x(r: f64) -> f64 {
        let r2 = r * r;
        (-(r2 * r2)).exp()
    }

    #[inline]
    pub fn phi_v(&self, s: f64) -> f64 {
        if self.contact_time_enabled {
            let s2 = s * s;
            (-(s2 * s2 * s2)).exp()
        } else {
            1.0
        }
    }

    /// Kernel from squared distance and squared relative speed.
    #[inline]
    pub fn value_sq(&self, r2: f64, s2: f64) -> f64 {
        let spatial = (-(r2 * r2)).exp();
        let temporal = if self.contact_time_enabled {
            (-(s2 * s2 * s2)).exp()
        } else {
            1.0
        };
        self.i_o * spatial * temporal
    }

    #[inline]
    pub fn value(&self, dx: Vec2, du: Vec2) -> f64 {
        self.value_sq(dx.norm_sq(), du.norm_sq())
    }
}

/// Infection rate of particle `i` from the listed neighbours (which should
/// include `i` itself). Dead neighbours are skipped.
pub fn infection_rate(
    i: usize,
    neighbors: &[u32],
    particles: &[ParticleState],
    dv: &[f64],
    kernel: &ContagionKernel,
) -> f64 {
    let pi = &particles[i];
    let mut beta = 0.0;
    for &j in neighbors {
        let j = j as usize;
        let pj = &particles[j];
        if !pj.alive || pj.alpha.i == 0.0 {
            continue;
        }
        beta += kernel.value(pi.x - pj.x, pi.u - pj.u) * pj.alpha.i * dv[j];
    }
    beta
}

/// Infection rates of all alive particles (zero for dead ones).
pub fn infection_rates(
    particles: &[ParticleState],
    dv: &[f64],
    table: &NeighborTable,
    kernel: &ContagionKernel,
) -> Vec<f64> {
    exec::map_range(particles.len(), |i| {
        if particles[i].alive {
            infection_rate(i, table.neighbors(i), particles, dv, kernel)
        } else {
            0.0
        }
    })
}

/// `beta * dt` exceeded one, which would drive alpha_S negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStepTooLarge(pub f64);

/// One explicit Euler step of the SEIS fractions followed by projection back
/// onto the simplex when a component dips below zero.
pub fn step_fractions(
    alpha: Fractions,
    beta: f64,
    nu: f64,
    theta: f64,
    dt: f64,
) -> Result<Fractions, TimeStepTooLarge> {
    if beta * dt > 1.0 {
        return Err(TimeStepTooLarge(beta * dt));
    }
    let infection = beta * alpha.s * dt;
    let recovery = nu * alpha.i * dt;
    let incubation = theta * alpha.e * dt;
    let mut next = Fractions::new(
        alpha.s + recovery - infection,
        alpha.e + infection - incubation,
        alpha.i + incubation - recovery,
    );
    if next.s < 0.0 || next.e < 0.0 || next.i < 0.0 {
        let worst = next.s.min(next.e).min(next.i);
        if worst < -CLAMP_ACTIVATION {
            log::debug!("fraction clamp beyond rounding: {worst:e}");
        }
        next.s = next.s.max(0.0);
        next.e = next.e.max(0.0);
        next.i = next.i.max(0.0);
        let total = next.sum();
        next.s /= total;
        next.e /= total;
        next.i /= total;
    }
    Ok(next)
}

/// Percentage of the particles seeded susceptible that are now labelled
/// exposed. Exited particles keep their last fractions and still count.
pub fn exposed_percentage(particles: &[ParticleState], threshold: f64) -> f64 {
    let mut seeded = 0usize;
    let mut exposed = 0usize;
    for p in particles {
        if p.seeded != Label::Susceptible {
            continue;
        }
        seeded += 1;
        if p.alpha.e > threshold {
            exposed += 1;
        }
    }
    if seeded == 0 {
        0.0
    } else {
        100.0 * exposed as f64 / seeded as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn particle(x: Vec2, u: Vec2, alpha: Fractions) -> ParticleState {
        ParticleState {
            x,
            u,
            rho: 1.0,
            m: 1.0,
            alpha,
            pop: 0,
            alive: true,
            seeded: classify(alpha, 0.05),
        }
    }

    #[test]
    fn kernel_is_one_at_origin() {
        let k = ContagionKernel::new(0.04, true);
        assert_eq!(ContagionKernel::phi_x(0.0), 1.0);
        assert_eq!(k.phi_v(0.0), 1.0);
        assert_eq!(k.value(Vec2::ZERO, Vec2::ZERO), 0.04);
    }

    #[test]
    fn no_infected_gives_zero_rate() {
        let ps = vec![
            particle(Vec2::ZERO, Vec2::ZERO, Fractions::susceptible()),
            particle(Vec2::new(0.5, 0.0), Vec2::ZERO, Fractions::susceptible()),
        ];
        let k = ContagionKernel::new(0.04, true);
        assert_eq!(infection_rate(0, &[0, 1], &ps, &[1.0, 1.0], &k), 0.0);
    }

    #[test]
    fn co_located_infected_neighbour_gives_i_o() {
        let ps = vec![
            particle(Vec2::ZERO, Vec2::ZERO, Fractions::susceptible()),
            particle(Vec2::ZERO, Vec2::ZERO, Fractions::infected()),
        ];
        let k = ContagionKernel::new(0.04, true);
        assert_eq!(infection_rate(0, &[0, 1], &ps, &[1.0, 1.0], &k), 0.04);
    }

    #[test]
    fn counter_flow_suppresses_rate() {
        let ps = vec![
            particle(Vec2::ZERO, Vec2::new(2.0, 0.0), Fractions::susceptible()),
            particle(Vec2::ZERO, Vec2::new(-2.0, 0.0), Fractions::infected()),
        ];
        let k = ContagionKernel::new(0.04, true);
        let beta = infection_rate(0, &[0, 1], &ps, &[1.0, 1.0], &k);
        assert!(beta < 1e-100, "{beta}");
        let off = ContagionKernel::new(0.04, false);
        assert_eq!(infection_rate(0, &[0, 1], &ps, &[1.0, 1.0], &off), 0.04);
    }

    #[test]
    fn classification_thresholds() {
        assert_eq!(classify(Fractions::new(1.0, 0.0, 0.0), 0.05), Label::Susceptible);
        assert_eq!(classify(Fractions::new(0.9, 0.06, 0.04), 0.05), Label::Exposed);
        assert_eq!(classify(Fractions::new(0.0, 0.0, 1.0), 0.05), Label::Infected);
        assert_eq!(classify(Fractions::new(0.95, 0.05, 0.0), 0.05), Label::Susceptible);
    }

    #[test]
    fn zero_rate_leaves_fractions_unchanged() {
        let a = Fractions::new(0.7, 0.2, 0.1);
        assert_eq!(step_fractions(a, 0.0, 0.0, 0.0, 0.001).unwrap(), a);
    }

    #[test]
    fn infected_fraction_constant_without_recovery() {
        let a = Fractions::new(0.6, 0.1, 0.3);
        let b = step_fractions(a, 3.0, 0.0, 0.0, 0.001).unwrap();
        assert_eq!(b.i, a.i);
        assert_eq!(b.s, a.s - 3.0 * a.s * 0.001);
    }

    #[test]
    fn euler_tracks_exponential_decay() {
        let beta = 0.04;
        let dt = 0.001;
        let mut a = Fractions::susceptible();
        for _ in 0..1000 {
            a = step_fractions(a, beta, 0.0, 0.0, dt).unwrap();
        }
        let exact = (-beta * 1.0f64).exp();
        assert!((a.s - exact).abs() < 1e-5, "{} vs {}", a.s, exact);
    }

    #[test]
    fn oversized_step_rejected() {
        let err = step_fractions(Fractions::susceptible(), 2000.0, 0.0, 0.0, 0.001).unwrap_err();
        assert_eq!(err, TimeStepTooLarge(2.0));
    }

    #[test]
    fn exposure_percentage_counts_exited() {
        let mut ps = vec![
            particle(Vec2::ZERO, Vec2::ZERO, Fractions::susceptible()),
            particle(Vec2::ZERO, Vec2::ZERO, Fractions::susceptible()),
            particle(Vec2::ZERO, Vec2::ZERO, Fractions::infected()),
        ];
        assert_eq!(exposed_percentage(&ps, 0.05), 0.0);
        ps[0].alpha = Fractions::new(0.9, 0.1, 0.0);
        ps[0].alive = false;
        assert_eq!(exposed_percentage(&ps, 0.05), 50.0);
        ps[1].alpha = Fractions::new(0.9, 0.1, 0.0);
        assert_eq!(exposed_percentage(&ps, 0.05), 100.0);
    }

    proptest! {
        #[test]
        fn simplex_preserved(s in 0.0f64..1.0, e_share in 0.0f64..1.0, beta in 0.0f64..900.0,
                             nu in 0.0f64..5.0, theta in 0.0f64..5.0) {
            let e = (1.0 - s) * e_share;
            let a = Fractions::new(s, e, 1.0 - s - e);
            let b = step_fractions(a, beta, nu, theta, 0.001).unwrap();
            prop_assert!((b.sum() - 1.0).abs() < 1e-12);
            prop_assert!(b.s >= 0.0 && b.e >= 0.0 && b.i >= 0.0);
        }

        #[test]
        fn monotone_without_recovery(s in 0.0f64..1.0, e_share in 0.0f64..1.0, beta in 0.0f64..900.0) {
            let e = (1.0 - s) * e_share;
            let a = Fractions::new(s, e, 1.0 - s - e);
            let b = step_fractions(a, beta, 0.0, 0.0, 0.001).unwrap();
            prop_assert!(b.s <= a.s);
            prop_assert!(b.e >= a.e);
        }

        #[test]
        fn kernel_symmetric_and_bounded(dx in -3.0f64..3.0, dy in -3.0f64..3.0,
                                        ux in -3.0f64..3.0, uy in -3.0f64..3.0) {
            let on = ContagionKernel::new(0.04, true);
            let off = ContagionKernel::new(0.04, false);
            let d = Vec2::new(dx, dy);
            let u = Vec2::new(ux, uy);
            prop_assert_eq!(on.value(d, u), on.value(-d, -u));
            prop_assert!(on.value(d, u) >= 0.0);
            prop_assert!(on.value(d, u) <= off.value(d, u));
        }
    }
}
