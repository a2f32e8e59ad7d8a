//! Weighted least-squares gradient stencils on scattered points.
//!
//! For a centre `x_i` with neighbours `x_j` the local linear model
//! `f(x_j) - f(x_i) ≈ g · (x_j - x_i)` is fitted with Gaussian weights
//! `w(r) = exp(-ln(100) r²/h²)`, i.e. `w(h) = 1e-2`. The fit is stored as one
//! coefficient vector per neighbour so that `g = Σ_j c_j (f_j - f_i)`.

use crate::exec;
use crate::geometry::Vec2;

use super::grid::CellGrid;

/// `w(h) = exp(-WEIGHT_ALPHA) = 1e-2`.
pub const WEIGHT_ALPHA: f64 = 4.605_170_185_988_091;

/// Fewest neighbours (self excluded) accepted for a non-degenerate stencil.
pub const MIN_NEIGHBORS: usize = 5;

/// Neighbour count the adaptive radius aims for.
pub const TARGET_NEIGHBORS: usize = 8;

/// Smallest accepted `det / trace²` of the weighted normal matrix, roughly
/// the inverse condition number; 1/4 for an isotropic stencil.
pub const MIN_INVERSE_CONDITION: f64 = 1e-3;

#[inline]
pub fn weight(r2: f64, h: f64) -> f64 {
    (-WEIGHT_ALPHA * r2 / (h * h)).exp()
}

/// Solve the weighted normal equations for the offsets `d_j = x_j - x_i`.
/// Returns the coefficient vectors, or `None` if the offsets do not span the
/// plane.
pub fn gradient_coefficients(offsets: &[Vec2], h: f64) -> Option<Vec<Vec2>> {
    let mut coeffs = Vec::with_capacity(offsets.len());
    if solve_into(offsets, h, &mut coeffs) {
        Some(coeffs)
    } else {
        None
    }
}

/// Same as [`gradient_coefficients`] writing into `out` (cleared first).
pub fn solve_into(offsets: &[Vec2], h: f64, out: &mut Vec<Vec2>) -> bool {
    out.clear();
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for d in offsets {
        let w = weight(d.norm_sq(), h);
        a += w * d.x * d.x;
        b += w * d.x * d.y;
        c += w * d.y * d.y;
        out.push(Vec2::new(w, 0.0));
    }
    let det = a * c - b * b;
    let scale = (a + c) * (a + c);
    if !(det > MIN_INVERSE_CONDITION * scale) || scale == 0.0 {
        out.clear();
        return false;
    }
    let inv = 1.0 / det;
    for (o, d) in out.iter_mut().zip(offsets) {
        let w = o.x;
        *o = Vec2::new(inv * w * (c * d.x - b * d.y), inv * w * (a * d.y - b * d.x));
    }
    true
}

/// Gradient at `xi` of a field with value `fi` there, fitted in one pass
/// over neighbour samples `(x_j, f_j)` under the acceptance rules of
/// [`solve_into`]. `None` for fewer than [`MIN_NEIGHBORS`] samples or a
/// degenerate stencil.
pub fn fit_gradient(xi: Vec2, fi: f64, samples: impl IntoIterator<Item = (Vec2, f64)>, h: f64) -> Option<Vec2> {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    let mut s = Vec2::ZERO;
    let mut n = 0;
    for (xj, fj) in samples {
        let d = xj - xi;
        let w = weight(d.norm_sq(), h);
        a += w * d.x * d.x;
        b += w * d.x * d.y;
        c += w * d.y * d.y;
        s += d * (w * (fj - fi));
        n += 1;
    }
    let det = a * c - b * b;
    let scale = (a + c) * (a + c);
    if n < MIN_NEIGHBORS || !(det > MIN_INVERSE_CONDITION * scale) || scale == 0.0 {
        return None;
    }
    let inv = 1.0 / det;
    Some(Vec2::new(inv * (c * s.x - b * s.y), inv * (a * s.y - b * s.x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilStatus {
    Valid,
    /// Degenerate after widening; derivatives are copied from this particle.
    CopyFrom(u32),
    /// Degenerate and no valid particle to copy from; derivatives are zero.
    Isolated,
}

/// Gradient stencils for a whole cloud in compressed rows.
#[derive(Debug, Clone)]
pub struct LsqStencils {
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
    coeffs: Vec<Vec2>,
    status: Vec<StencilStatus>,
}

/// One row of [`LsqStencils`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StencilRow {
    pub neighbors: Vec<u32>,
    pub coeffs: Vec<Vec2>,
}

impl StencilRow {
    pub fn gradient(&self, center: f64, values: impl Fn(usize) -> f64) -> Vec2 {
        let mut g = Vec2::ZERO;
        for (k, &j) in self.neighbors.iter().enumerate() {
            g += self.coeffs[k] * (values(j as usize) - center);
        }
        g
    }
}

/// Build the stencil of `i` from the candidate neighbour list (which may
/// contain `i`) at support radius `h`. `None` flags a degenerate stencil.
pub fn build_stencil(i: usize, neighbors: &[u32], positions: &[Vec2], h: f64) -> Option<StencilRow> {
    let xi = positions[i];
    let nbrs: Vec<u32> = neighbors.iter().copied().filter(|&j| j as usize != i).collect();
    if nbrs.len() < MIN_NEIGHBORS {
        return None;
    }
    let offs: Vec<Vec2> = nbrs.iter().map(|&j| positions[j as usize] - xi).collect();
    gradient_coefficients(&offs, h).map(|coeffs| StencilRow {
        neighbors: nbrs,
        coeffs,
    })
}

impl LsqStencils {
    pub fn len(&self) -> usize {
        self.status.len()
    }

    pub fn is_empty(&self) -> bool {
        self.status.is_empty()
    }

    pub fn status(&self, i: usize) -> StencilStatus {
        self.status[i]
    }

    pub fn degenerate_count(&self) -> usize {
        self.status
            .iter()
            .filter(|s| !matches!(s, StencilStatus::Valid))
            .count()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[Vec2]) {
        let (a, b) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
        (&self.neighbors[a..b], &self.coeffs[a..b])
    }

    fn valid_row(&self, i: usize) -> Option<usize> {
        match self.status[i] {
            StencilStatus::Valid => Some(i),
            StencilStatus::CopyFrom(j) => Some(j as usize),
            StencilStatus::Isolated => None,
        }
    }

    /// Gradient of a scalar field at `i`.
    pub fn gradient(&self, i: usize, f: &[f64]) -> Vec2 {
        let Some(k) = self.valid_row(i) else {
            return Vec2::ZERO;
        };
        let (nb, cf) = self.row(k);
        let fk = f[k];
        let mut g = Vec2::ZERO;
        for (c, &j) in cf.iter().zip(nb) {
            g += *c * (f[j as usize] - fk);
        }
        g
    }

    /// Divergence of a vector field at `i`.
    pub fn divergence_at(&self, i: usize, u: &[Vec2]) -> f64 {
        let Some(k) = self.valid_row(i) else {
            return 0.0;
        };
        let (nb, cf) = self.row(k);
        let uk = u[k];
        let mut div = 0.0;
        for (c, &j) in cf.iter().zip(nb) {
            div += c.dot(u[j as usize] - uk);
        }
        div
    }

    /// Build stencils for every point with `group(i) = Some(g)`, using only
    /// neighbours of the same group. The support radius is the smallest of
    /// `1.5, 2.0, 2.5, 3.0` times `spacing` holding [`TARGET_NEIGHBORS`]
    /// neighbours; degenerate stencils are retried with the radius widened
    /// by 1.5 up to three times, then borrow the nearest valid neighbour's
    /// row.
    pub fn build_grouped(
        positions: &[Vec2],
        grid: &CellGrid,
        spacing: f64,
        group: impl Fn(usize) -> Option<usize> + Sync + Send,
    ) -> Self {
        const FACTORS: [f64; 4] = [1.5, 2.0, 2.5, 3.0];
        let rows: Vec<Option<StencilRow>> = exec::map_range(positions.len(), |i| {
            let g = group(i)?;
            let xi = positions[i];
            let r_max = FACTORS[FACTORS.len() - 1] * spacing;
            let mut cand: Vec<(f64, u32)> = Vec::with_capacity(32);
            grid.for_each_within(xi, r_max, |j, d2| {
                if j != i && group(j) == Some(g) {
                    cand.push((d2, j as u32));
                }
            });
            let mut h = r_max;
            for f in FACTORS {
                let r = f * spacing;
                if cand.iter().filter(|c| c.0 <= r * r).count() >= TARGET_NEIGHBORS {
                    h = r;
                    break;
                }
            }
            let mut attempt = 0;
            loop {
                let mut nbrs: Vec<u32> = if h <= r_max {
                    cand.iter().filter(|c| c.0 <= h * h).map(|c| c.1).collect()
                } else {
                    let mut v = Vec::new();
                    grid.for_each_within(xi, h, |j, _| {
                        if j != i && group(j) == Some(g) {
                            v.push(j as u32);
                        }
                    });
                    v
                };
                nbrs.sort_unstable();
                if let Some(row) = build_stencil(i, &nbrs, positions, h) {
                    return Some(row);
                }
                if attempt == 3 {
                    return None;
                }
                attempt += 1;
                h *= 1.5;
            }
        });

        let mut status = Vec::with_capacity(rows.len());
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0u32);
        let mut neighbors = Vec::new();
        let mut coeffs = Vec::new();
        for row in &rows {
            match row {
                Some(r) => {
                    neighbors.extend_from_slice(&r.neighbors);
                    coeffs.extend_from_slice(&r.coeffs);
                    status.push(StencilStatus::Valid);
                }
                None => status.push(StencilStatus::Isolated),
            }
            offsets.push(neighbors.len() as u32);
        }
        // Degenerate rows borrow the nearest valid same-group row.
        for i in 0..rows.len() {
            if rows[i].is_some() {
                continue;
            }
            let Some(g) = group(i) else { continue };
            let mut best: Option<(f64, usize)> = None;
            let mut r = 3.0 * spacing;
            while best.is_none() && r <= 48.0 * spacing {
                grid.for_each_within(positions[i], r, |j, d2| {
                    if j != i && rows[j].is_some() && group(j) == Some(g) {
                        match best {
                            Some((bd, bj)) if d2 > bd || (d2 == bd && j > bj) => {}
                            _ => best = Some((d2, j)),
                        }
                    }
                });
                r *= 2.0;
            }
            if let Some((_, j)) = best {
                status[i] = StencilStatus::CopyFrom(j as u32);
            }
        }
        LsqStencils {
            offsets,
            neighbors,
            coeffs,
            status,
        }
    }
}

/// Divergence of `u` at every point of the stencil set.
pub fn divergence(u: &[Vec2], stencils: &LsqStencils) -> Vec<f64> {
    exec::map_range(u.len(), |i| stencils.divergence_at(i, u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(n: i32, s: f64) -> Vec<Vec2> {
        let mut v = Vec::new();
        for i in -n..=n {
            for j in -n..=n {
                v.push(Vec2::new(i as f64 * s, j as f64 * s));
            }
        }
        v
    }

    fn center_index(pts: &[Vec2]) -> usize {
        pts.iter().position(|p| *p == Vec2::ZERO).unwrap()
    }

    #[test]
    fn weight_at_support_radius() {
        assert!((weight(4.0, 2.0) - 1e-2).abs() < 1e-15);
        assert_eq!(weight(0.0, 2.0), 1.0);
    }

    #[test]
    fn linear_field_reproduced_on_3x3() {
        let pts = lattice(1, 1.0);
        let c = center_index(&pts);
        let all: Vec<u32> = (0..pts.len() as u32).collect();
        let row = build_stencil(c, &all, &pts, 1.5).unwrap();
        let f = |j: usize| 2.0 * pts[j].x + 3.0 * pts[j].y;
        let g = row.gradient(f(c), f);
        assert!((g.x - 2.0).abs() < 1e-8 && (g.y - 3.0).abs() < 1e-8, "{g:?}");
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let pts = lattice(1, 1.0);
        let c = center_index(&pts);
        let all: Vec<u32> = (0..pts.len() as u32).collect();
        let row = build_stencil(c, &all, &pts, 1.5).unwrap();
        let g = row.gradient(7.0, |_| 7.0);
        assert!(g.norm() < 1e-10);
    }

    #[test]
    fn quadratic_field_truncation() {
        // Taylor: for f = x² the linear fit on a symmetric stencil sees only
        // the even part, so the x-derivative at the origin vanishes; on an
        // off-centre point the error is bounded by the spacing.
        let pts = lattice(2, 1.0);
        let c = center_index(&pts);
        let all: Vec<u32> = (0..pts.len() as u32).collect();
        let row = build_stencil(c, &all, &pts, 2.0).unwrap();
        let g = row.gradient(0.0, |j| pts[j].x * pts[j].x);
        assert!(g.x.abs() < 1e-12, "{g:?}");

        let off = pts.iter().position(|p| *p == Vec2::new(1.0, 0.0)).unwrap();
        let row = build_stencil(off, &all, &pts, 2.0).unwrap();
        let g = row.gradient(1.0, |j| pts[j].x * pts[j].x);
        assert!((g.x - 2.0).abs() <= 1.0, "{g:?}");
    }

    #[test]
    fn one_pass_fit_matches_coefficients() {
        let xi = Vec2::new(0.2, -0.1);
        let pts: Vec<Vec2> = (0..11)
            .map(|k| {
                let t = k as f64 * 0.7;
                xi + Vec2::new(1.3 * t.cos() * (1.0 + 0.1 * k as f64), 0.9 * t.sin())
            })
            .collect();
        let f = |p: Vec2| (p.x * 0.8).sin() + p.y * p.y;
        let offs: Vec<Vec2> = pts.iter().map(|&p| p - xi).collect();
        let coeffs = gradient_coefficients(&offs, 2.0).unwrap();
        let want = coeffs
            .iter()
            .zip(&pts)
            .fold(Vec2::ZERO, |g, (c, &p)| g + *c * (f(p) - f(xi)));
        let got = fit_gradient(xi, f(xi), pts.iter().map(|&p| (p, f(p))), 2.0).unwrap();
        assert!((got - want).norm() < 1e-12 * want.norm(), "{got:?} vs {want:?}");
        assert!(fit_gradient(xi, 0.0, pts[..4].iter().map(|&p| (p, 0.0)), 2.0).is_none());
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<Vec2> = (0..8).map(|k| Vec2::new(k as f64, 0.0)).collect();
        let all: Vec<u32> = (0..8).collect();
        assert!(build_stencil(0, &all, &pts, 5.0).is_none());
    }

    #[test]
    fn nearly_collinear_points_are_degenerate() {
        let mut pts: Vec<Vec2> = (0..9).map(|k| Vec2::new(0.0, k as f64 * 0.3)).collect();
        pts.push(Vec2::new(0.05, 4.0));
        let all: Vec<u32> = (0..pts.len() as u32).collect();
        assert!(build_stencil(4, &all, &pts, 3.0).is_none());
    }

    #[test]
    fn divergence_of_simple_fields() {
        let pts = lattice(4, 1.0);
        let grid = CellGrid::build(&pts, 1.0, |_| true);
        let st = LsqStencils::build_grouped(&pts, &grid, 1.0, |_| Some(0));
        assert_eq!(st.degenerate_count(), 0);
        let interior: Vec<usize> = (0..pts.len())
            .filter(|&i| pts[i].x.abs() < 2.5 && pts[i].y.abs() < 2.5)
            .collect();

        let expand: Vec<Vec2> = pts.clone();
        let d = divergence(&expand, &st);
        for &i in &interior {
            assert!((d[i] - 2.0).abs() < 1e-8, "{}", d[i]);
        }
        let constant = vec![Vec2::new(1.3, -0.4); pts.len()];
        assert!(divergence(&constant, &st).iter().all(|v| v.abs() < 1e-10));
        let rotation: Vec<Vec2> = pts.iter().map(|p| Vec2::new(p.y, -p.x)).collect();
        let d = divergence(&rotation, &st);
        assert!(d.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn isolated_point_borrows_or_zeroes() {
        let mut pts = lattice(3, 1.0);
        pts.push(Vec2::new(40.0, 40.0));
        let lone = pts.len() - 1;
        let grid = CellGrid::build(&pts, 1.0, |_| true);
        let st = LsqStencils::build_grouped(&pts, &grid, 1.0, |i| Some(usize::from(i == lone)));
        assert_eq!(st.status(lone), StencilStatus::Isolated);
        let u: Vec<Vec2> = pts.clone();
        assert_eq!(st.divergence_at(lone, &u), 0.0);
    }

    #[test]
    fn degenerate_row_copies_nearest_valid() {
        let mut pts = lattice(3, 1.0);
        // a point far enough that even the widened radius only finds a line
        pts.push(Vec2::new(3.0, 30.0));
        let far = pts.len() - 1;
        let grid = CellGrid::build(&pts, 1.0, |_| true);
        let st = LsqStencils::build_grouped(&pts, &grid, 1.0, |_| Some(0));
        match st.status(far) {
            StencilStatus::CopyFrom(j) => assert_eq!(pts[j as usize], Vec2::new(3.0, 3.0)),
            s => panic!("unexpected status {s:?}"),
        }
    }
}
