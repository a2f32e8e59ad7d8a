//! Independent reference implementations shared by the integration tests
//! and the acceptance harness.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crowdsim::contagion::{Fractions, Label};
use crowdsim::geometry::{Rect, Vec2};
use crowdsim::pedestrians::ParticleState;
use crowdsim::scenario::{parse_scenario, Scenario};
use ordered_float::OrderedFloat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CORRIDOR: &str = r#"
[domain]
width = 100.0
height = 50.0
walls = [{ from = [0.0, 0.0], to = [100.0, 0.0] }, { from = [0.0, 50.0], to = [100.0, 50.0] }]
exits = [
  { id = "west", side = "left", interval = [0.0, 50.0] },
  { id = "east", side = "right", interval = [0.0, 50.0] },
]
"#;

/// Corridor with one eastbound population of the given spacing and block.
pub fn corridor_with(spacing: f64, block: [f64; 4], extra: &str) -> Scenario {
    let text = format!(
        "{CORRIDOR}\n[[populations]]\nid = \"p\"\ngoal = \"east\"\nspacing = {spacing}\n\
         block = {{ min = [{}, {}], max = [{}, {}] }}\n{extra}",
        block[0], block[1], block[2], block[3]
    );
    parse_scenario(&text, "test").expect("test scenario")
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

/// Random cloud of `n` alive particles in a `side × side` box with random
/// velocities, densities and fractions; returns particles and volumes.
pub fn random_cloud(seed: u64, n: usize, side: f64) -> (Vec<ParticleState>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = Vec::with_capacity(n);
    let mut dv = Vec::with_capacity(n);
    for _ in 0..n {
        let rho: f64 = rng.gen_range(0.3..3.0);
        let a: f64 = rng.gen_range(0.0..1.0);
        let b: f64 = rng.gen_range(0.0..(1.0 - a));
        let m: f64 = rng.gen_range(0.5..2.0);
        ps.push(ParticleState {
            x: Vec2::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side)),
            u: Vec2::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)),
            rho,
            m,
            alpha: Fractions::new(a, b, 1.0 - a - b),
            pop: 0,
            alive: true,
            seeded: Label::Susceptible,
        });
        dv.push(m / rho);
    }
    (ps, dv)
}

/// All-pairs infection rate `Σ_j i_o exp(-r⁴) φ_V α_I,j dV_j` with no cutoff.
pub fn brute_force_beta(ps: &[ParticleState], dv: &[f64], i_o: f64, contact_time: bool) -> Vec<f64> {
    ps.iter()
        .map(|pi| {
            ps.iter()
                .zip(dv)
                .filter(|(pj, _)| pj.alive)
                .map(|(pj, &v)| {
                    let r = ((pi.x.x - pj.x.x).powi(2) + (pi.x.y - pj.x.y).powi(2)).sqrt();
                    let s = ((pi.u.x - pj.u.x).powi(2) + (pi.u.y - pj.u.y).powi(2)).sqrt();
                    let phi_v = if contact_time { (-s.powi(6)).exp() } else { 1.0 };
                    i_o * (-r.powi(4)).exp() * phi_v * pj.alpha.i * v
                })
                .sum()
        })
        .collect()
}

/// All-pairs Morse force `Σ_j (C/l) e^{-d/l} (x_i - x_j)/d ρ_j dV_j` over
/// pairs with `0 < d ≤ cutoff`.
pub fn brute_force_morse(ps: &[ParticleState], dv: &[f64], c: f64, l: f64, cutoff: f64) -> Vec<Vec2> {
    ps.iter()
        .map(|pi| {
            let mut f = Vec2::ZERO;
            for (pj, &v) in ps.iter().zip(dv) {
                let d = (pi.x - pj.x).norm();
                if d > 0.0 && d <= cutoff && pj.alive {
                    f += (pi.x - pj.x) * ((c / l) * (-d / l).exp() / d * pj.rho * v);
                }
            }
            f
        })
        .collect()
}

/// Relative vector error `|a - b| / max(|b|, floor)`.
pub fn rel_err(a: Vec2, b: Vec2, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn segment_hits(a: Vec2, b: Vec2, r: &Rect) -> bool {
    // sample densely; rectangles in the tests are much larger than a move
    let n = 16;
    (0..=n).any(|k| {
        let t = k as f64 / n as f64;
        let p = a + (b - a) * t;
        p.x > r.min.x && p.x < r.max.x && p.y > r.min.y && p.y < r.max.y
    })
}

/// Shortest travel time to the right edge of a `width × height` box at
/// speed `v`, avoiding `blocks`, by Dijkstra on a fine grid with every
/// primitive move up to `reach` cells.
pub struct Dijkstra {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub time: Vec<f64>,
}

impl Dijkstra {
    pub fn solve(width: f64, height: f64, h: f64, v: f64, blocks: &[Rect], reach: i64) -> Self {
        let nx = (width / h).round() as usize + 1;
        let ny = (height / h).round() as usize + 1;
        let idx = |i: usize, j: usize| i * ny + j;
        let pos = |i: usize, j: usize| Vec2::new(i as f64 * h, j as f64 * h);
        let solid = |p: Vec2| {
            blocks
                .iter()
                .any(|r| p.x > r.min.x && p.x < r.max.x && p.y > r.min.y && p.y < r.max.y)
        };
        let mut moves = Vec::new();
        for a in -reach..=reach {
            for b in -reach..=reach {
                if (a, b) != (0, 0) && gcd(a, b) == 1 {
                    moves.push((a, b));
                }
            }
        }
        let mut time = vec![f64::INFINITY; nx * ny];
        let mut heap = BinaryHeap::new();
        for j in 0..ny {
            let k = idx(nx - 1, j);
            time[k] = 0.0;
            heap.push(Reverse((OrderedFloat(0.0), k)));
        }
        while let Some(Reverse((t, k))) = heap.pop() {
            let t = t.0;
            if t > time[k] {
                continue;
            }
            let (i, j) = (k / ny, k % ny);
            let p = pos(i, j);
            for &(a, b) in &moves {
                let (ni, nj) = (i as i64 + a, j as i64 + b);
                if ni < 0 || nj < 0 || ni >= nx as i64 || nj >= ny as i64 {
                    continue;
                }
                let (ni, nj) = (ni as usize, nj as usize);
                let q = pos(ni, nj);
                if solid(q) || blocks.iter().any(|r| segment_hits(p, q, r)) {
                    continue;
                }
                let nt = t + (q - p).norm() / v;
                let nk = idx(ni, nj);
                if nt < time[nk] {
                    time[nk] = nt;
                    heap.push(Reverse((OrderedFloat(nt), nk)));
                }
            }
        }
        Dijkstra { h, nx, ny, time }
    }

    /// Bilinear interpolation of the travel time at `p`.
    pub fn at(&self, p: Vec2) -> f64 {
        let fx = (p.x / self.h).clamp(0.0, (self.nx - 1) as f64);
        let fy = (p.y / self.h).clamp(0.0, (self.ny - 1) as f64);
        let (i0, j0) = (
            (fx.floor() as usize).min(self.nx - 2),
            (fy.floor() as usize).min(self.ny - 2),
        );
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let g = |i: usize, j: usize| self.time[i * self.ny + j];
        let corners = [g(i0, j0), g(i0 + 1, j0), g(i0, j0 + 1), g(i0 + 1, j0 + 1)];
        if corners.iter().any(|c| !c.is_finite()) {
            return corners
                .iter()
                .copied()
                .filter(|c| c.is_finite())
                .fold(f64::INFINITY, f64::min);
        }
        corners[0] * (1.0 - tx) * (1.0 - ty)
            + corners[1] * tx * (1.0 - ty)
            + corners[2] * (1.0 - tx) * ty
            + corners[3] * tx * ty
    }
}

/// Exact travel time to the right edge around one axis-aligned block.
pub fn exact_around_block(p: Vec2, block: &Rect, width: f64, v: f64) -> f64 {
    let shadowed = p.x < block.min.x && p.y > block.min.y && p.y < block.max.y;
    let d = if shadowed {
        let tl = Vec2::new(block.min.x, block.max.y);
        let bl = Vec2::new(block.min.x, block.min.y);
        ((p - tl).norm() + width - tl.x).min((p - bl).norm() + width - bl.x)
    } else {
        width - p.x
    };
    d / v
}
