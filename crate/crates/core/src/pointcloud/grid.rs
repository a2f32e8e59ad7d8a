use crate::exec;
use crate::geometry::Vec2;

/// Uniform cell binning of a point set. Points are stored cell by cell in
/// ascending index order, so every query visits candidates in a fixed order.
#[derive(Debug, Clone)]
pub struct CellGrid {
    origin: Vec2,
    inv_cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
    coords: Vec<Vec2>,
}

impl CellGrid {
    /// Bin the points for which `include(i)` holds into square cells of side
    /// `cell`.
    pub fn build(points: &[Vec2], cell: f64, include: impl Fn(usize) -> bool) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut count = 0usize;
        for (i, p) in points.iter().enumerate() {
            if include(i) {
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
                count += 1;
            }
        }
        if count == 0 {
            return CellGrid {
                origin: Vec2::ZERO,
                inv_cell: 1.0 / cell,
                nx: 0,
                ny: 0,
                starts: vec![0],
                items: Vec::new(),
                coords: Vec::new(),
            };
        }
        let inv_cell = 1.0 / cell;
        let nx = (((hi.x - lo.x) * inv_cell).floor() as usize) + 1;
        let ny = (((hi.y - lo.y) * inv_cell).floor() as usize) + 1;
        let cell_of = |p: Vec2| -> usize {
            let cx = (((p.x - lo.x) * inv_cell) as usize).min(nx - 1);
            let cy = (((p.y - lo.y) * inv_cell) as usize).min(ny - 1);
            cy * nx + cx
        };
        let mut starts = vec![0u32; nx * ny + 1];
        let mut keys = Vec::with_capacity(count);
        for (i, p) in points.iter().enumerate() {
            if include(i) {
                let c = cell_of(*p);
                starts[c + 1] += 1;
                keys.push((c, i));
            }
        }
        for c in 0..nx * ny {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut items = vec![0u32; count];
        let mut coords = vec![Vec2::ZERO; count];
        for (c, i) in keys {
            let slot = fill[c] as usize;
            items[slot] = i as u32;
            coords[slot] = points[i];
            fill[c] += 1;
        }
        CellGrid {
            origin: lo,
            inv_cell,
            nx,
            ny,
            starts,
            items,
            coords,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Call `f(j, |p - x_j|²)` for every binned point within distance `r` of `p`.
    #[inline]
    pub fn for_each_within(&self, p: Vec2, r: f64, mut f: impl FnMut(usize, f64)) {
        if self.items.is_empty() {
            return;
        }
        let r2 = r * r;
        let fx0 = ((p.x - r - self.origin.x) * self.inv_cell).floor();
        let fx1 = ((p.x + r - self.origin.x) * self.inv_cell).floor();
        let fy0 = ((p.y - r - self.origin.y) * self.inv_cell).floor();
        let fy1 = ((p.y + r - self.origin.y) * self.inv_cell).floor();
        if fx1 < 0.0 || fy1 < 0.0 || fx0 >= self.nx as f64 || fy0 >= self.ny as f64 {
            return;
        }
        let x0 = fx0.max(0.0) as usize;
        let y0 = fy0.max(0.0) as usize;
        let x1 = (fx1 as usize).min(self.nx - 1);
        let y1 = (fy1 as usize).min(self.ny - 1);
        for cy in y0..=y1 {
            let row = cy * self.nx;
            let a = self.starts[row + x0] as usize;
            let b = self.starts[row + x1 + 1] as usize;
            for k in a..b {
                let d = p - self.coords[k];
                let d2 = d.norm_sq();
                if d2 <= r2 {
                    f(self.items[k] as usize, d2);
                }
            }
        }
    }

    /// [`Self::for_each_within`] restricted to indices above `min`.
    #[inline]
    pub fn for_each_within_above(&self, p: Vec2, r: f64, min: usize, mut f: impl FnMut(usize, f64)) {
        if self.items.is_empty() {
            return;
        }
        let r2 = r * r;
        let fx0 = ((p.x - r - self.origin.x) * self.inv_cell).floor();
        let fx1 = ((p.x + r - self.origin.x) * self.inv_cell).floor();
        let fy0 = ((p.y - r - self.origin.y) * self.inv_cell).floor();
        let fy1 = ((p.y + r - self.origin.y) * self.inv_cell).floor();
        if fx1 < 0.0 || fy1 < 0.0 || fx0 >= self.nx as f64 || fy0 >= self.ny as f64 {
            return;
        }
        let x0 = fx0.max(0.0) as usize;
        let y0 = fy0.max(0.0) as usize;
        let x1 = (fx1 as usize).min(self.nx - 1);
        let y1 = (fy1 as usize).min(self.ny - 1);
        for cy in y0..=y1 {
            for c in cy * self.nx + x0..=cy * self.nx + x1 {
                let (a, b) = (self.starts[c] as usize, self.starts[c + 1] as usize);
                let a = a + self.items[a..b].partition_point(|&j| j as usize <= min);
                for k in a..b {
                    let d = p - self.coords[k];
                    let d2 = d.norm_sq();
                    if d2 <= r2 {
                        f(self.items[k] as usize, d2);
                    }
                }
            }
        }
    }

    /// Indices within distance `r` of `p`, ascending.
    pub fn within(&self, p: Vec2, r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_within(p, r, |j, _| out.push(j as u32));
        out.sort_unstable();
        out
    }

    /// Nearest binned point to `p` within `r_max`, ties broken by index.
    pub fn nearest(&self, p: Vec2, r_max: f64) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        self.for_each_within(p, r_max, |j, d2| match best {
            Some((bd, bj)) if d2 > bd || (d2 == bd && j > bj) => {}
            _ => best = Some((d2, j)),
        });
        best.map(|(_, j)| j)
    }
}

/// Fixed-radius neighbour lists in compressed rows. Each list is sorted by
/// index and contains the point itself; excluded points have empty lists.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    offsets: Vec<u32>,
    indices: Vec<u32>,
    radius: f64,
}

impl NeighborTable {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.indices[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn total_pairs(&self) -> usize {
        self.indices.len()
    }

    pub fn from_lists(lists: Vec<Vec<u32>>, radius: f64) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0u32);
        let mut indices = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for l in lists {
            indices.extend_from_slice(&l);
            offsets.push(indices.len() as u32);
        }
        NeighborTable {
            offsets,
            indices,
            radius,
        }
    }
}

/// Exact neighbour lists of radius `h` over all points.
pub fn build_neighbors(positions: &[Vec2], h: f64) -> NeighborTable {
    build_neighbors_masked(positions, h, |_| true)
}

/// Exact neighbour lists of radius `h` restricted to points with `include(i)`.
pub fn build_neighbors_masked(
    positions: &[Vec2],
    h: f64,
    include: impl Fn(usize) -> bool + Sync + Send,
) -> NeighborTable {
    assert!(h > 0.0, "neighbour radius must be positive");
    let grid = CellGrid::build(positions, h, &include);
    table_from_grid(&grid, positions, h, include)
}

/// Neighbour lists of radius `h` using an existing grid over the same points.
pub fn table_from_grid(
    grid: &CellGrid,
    positions: &[Vec2],
    h: f64,
    include: impl Fn(usize) -> bool + Sync + Send,
) -> NeighborTable {
    let lists = exec::map_range(positions.len(), |i| {
        if include(i) {
            grid.within(positions[i], h)
        } else {
            Vec::new()
        }
    });
    NeighborTable::from_lists(lists, h)
}
