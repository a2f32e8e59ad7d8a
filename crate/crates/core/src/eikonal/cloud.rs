//! Solve clouds: pedestrians, a static background lattice and massless ghost
//! points on walls and obstacle perimeters.

use crate::exec;
use crate::geometry::{Rect, Segment, Vec2};
use crate::pointcloud::{build_neighbors, CellGrid, NeighborTable};
use crate::scenario::{Domain, ExitRegion};

/// Cell-centred lattice covering the domain with spacing close to the
/// requested one, adjusted per axis to fit the domain exactly.
#[derive(Debug, Clone)]
pub struct BackgroundLattice {
    pub points: Vec<Vec2>,
    pub spacing: Vec2,
}

impl BackgroundLattice {
    /// Nodes strictly inside any of `solid` are left out.
    pub fn new(domain: &Domain, spacing: f64, solid: &[Rect]) -> Self {
        let nx = ((domain.width / spacing).round() as usize).max(1);
        let ny = ((domain.height / spacing).round() as usize).max(1);
        let sx = domain.width / nx as f64;
        let sy = domain.height / ny as f64;
        let mut points = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                let p = Vec2::new((i as f64 + 0.5) * sx, (j as f64 + 0.5) * sy);
                if !solid.iter().any(|r| r.contains_strict(p)) {
                    points.push(p);
                }
            }
        }
        BackgroundLattice {
            points,
            spacing: Vec2::new(sx, sy),
        }
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.x.max(self.spacing.y)
    }
}

/// Ghost points along every wall segment, without exact duplicates.
pub fn wall_ghosts(walls: &[Segment], spacing: f64) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::new();
    for w in walls {
        for p in w.sample(spacing) {
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// Ghost points equally spaced by arc length along the rectangle perimeter,
/// `ceil(perimeter / spacing)` of them, starting at the lower-left corner.
pub fn stamp_obstacle_boundary(rect: &Rect, spacing: f64) -> Vec<Vec2> {
    let (w, h) = (rect.width(), rect.height());
    let perimeter = rect.perimeter();
    let n = ((perimeter / spacing).ceil() as usize).max(4);
    let step = perimeter / n as f64;
    (0..n)
        .map(|k| {
            let s = k as f64 * step;
            if s < w {
                Vec2::new(rect.min.x + s, rect.min.y)
            } else if s < w + h {
                Vec2::new(rect.max.x, rect.min.y + (s - w))
            } else if s < 2.0 * w + h {
                Vec2::new(rect.max.x - (s - w - h), rect.max.y)
            } else {
                Vec2::new(rect.min.x, rect.max.y - (s - 2.0 * w - h))
            }
        })
        .collect()
}

/// Proper crossing of the open segments `a`-`b` and `c`-`d`.
fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let orient = |p: Vec2, q: Vec2, r: Vec2| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Point cloud the eikonal equation is solved on, with visibility-filtered
/// neighbour lists.
#[derive(Debug, Clone)]
pub struct SolveCloud {
    pub points: Vec<Vec2>,
    /// Ghost points carry the wall value and are never solved for.
    pub ghost: Vec<bool>,
    pub neighbors: NeighborTable,
    pub radius: f64,
}

impl SolveCloud {
    /// Neighbour lists of radius `radius`, dropping pairs whose connecting
    /// segment passes through one of `blockers` or crosses one of `walls`.
    pub fn new(points: Vec<Vec2>, ghost: Vec<bool>, radius: f64, blockers: &[Rect], walls: &[Segment]) -> Self {
        let raw = build_neighbors(&points, radius);
        let neighbors = if blockers.is_empty() && walls.is_empty() {
            raw
        } else {
            let lists = exec::map_range(points.len(), |i| {
                let xi = points[i];
                raw.neighbors(i)
                    .iter()
                    .copied()
                    .filter(|&j| {
                        let xj = points[j as usize];
                        !blockers.iter().any(|r| r.segment_crosses_interior(xi, xj, 1e-9))
                            && !walls.iter().any(|w| segments_cross(xi, xj, w.from, w.to))
                    })
                    .collect()
            });
            NeighborTable::from_lists(lists, radius)
        };
        SolveCloud {
            points,
            ghost,
            neighbors,
            radius,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Role of a node in one solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Free,
    /// On the goal exit: `Φ = 0`.
    Goal,
    /// Ghost point: `Φ = phi_wall`, never updated.
    Wall,
}

/// Nodes within `band` of the exit segment become goals, ghosts walls.
pub fn classify_nodes(cloud: &SolveCloud, domain: &Domain, exit: &ExitRegion, band: f64) -> Vec<NodeKind> {
    cloud
        .points
        .iter()
        .zip(&cloud.ghost)
        .map(|(&p, &g)| {
            if g {
                NodeKind::Wall
            } else if exit.distance(domain, p) <= band {
                NodeKind::Goal
            } else {
                NodeKind::Free
            }
        })
        .collect()
}

/// Inverse-square-distance average of `values` over binned points within
/// `radius` of `x`; the exact value when `x` coincides with a point, `None`
/// when nothing is in range.
pub fn shepard(grid: &CellGrid, x: Vec2, radius: f64, value: impl Fn(usize) -> f64) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut exact: Option<usize> = None;
    grid.for_each_within(x, radius, |j, d2| {
        if d2 == 0.0 {
            if exact.map_or(true, |e| j < e) {
                exact = Some(j);
            }
        } else {
            let w = 1.0 / d2;
            num += w * value(j);
            den += w;
        }
    });
    match exact {
        Some(j) => Some(value(j)),
        None if den > 0.0 => Some(num / den),
        None => None,
    }
}
