//! Equilibrium points and Hill regions.

use crate::model::{self, ModelError, SystemConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Gradient norm required of a converged equilibrium.
pub const GRADIENT_TOL: f64 = 1e-12;
/// Two equilibria closer than this are considered duplicates.
pub const MERGE_RADIUS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumLabel {
    Collinear,
    NonCollinear,
}

/// A rest point of the synodic flow with its critical Jacobi value
/// `C = 2 Omega`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub position: (f64, f64),
    pub jacobi_value: f64,
    pub label: EquilibriumLabel,
}

/// All collinear equilibria: roots of `Omega_x(x, 0) = 0` away from the
/// primaries, located by a sign scan over `[-3, 3]` and polished by
/// bisection to 1e-13.
pub fn find_collinear(cfg: &SystemConfig) -> Vec<EquilibriumPoint> {
    const X_MIN: f64 = -3.0;
    const X_MAX: f64 = 3.0;
    const CELLS: usize = 6000;
    let h = (X_MAX - X_MIN) / CELLS as f64;
    let omega_x = |x: f64| model::potential_gradient(cfg, (x, 0.0)).map(|g| g.0);

    let mut roots: Vec<f64> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=CELLS {
        let x = X_MIN + h * i as f64;
        // skip cells straddling a primary (only m1 lies on the axis)
        if cfg.primaries.iter().any(|p| (x - p.position.0).abs() < h && p.position.1 == 0.0) {
            prev = None;
            continue;
        }
        let f = match omega_x(x) {
            Ok(f) => f,
            Err(_) => {
                prev = None;
                continue;
            }
        };
        if let Some((xp, fp)) = prev {
            if fp == 0.0 {
                roots.push(xp);
            } else if fp * f < 0.0 {
                if let Some(r) = bisect_root(&omega_x, xp, x, fp) {
                    roots.push(r);
                }
            }
        }
        prev = Some((x, f));
    }
    roots
        .into_iter()
        .map(|x| make_point(cfg, (x, 0.0), EquilibriumLabel::Collinear))
        .collect()
}

fn bisect_root(
    f: &impl Fn(f64) -> Result<f64, ModelError>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
) -> Option<f64> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() < 1e-13 || m == a || m == b {
            return Some(m);
        }
        let fm = f(m).ok()?;
        if fm == 0.0 {
            return Some(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Some(0.5 * (a + b))
}

fn make_point(cfg: &SystemConfig, pos: (f64, f64), label: EquilibriumLabel) -> EquilibriumPoint {
    let c = 2.0 * model::effective_potential(cfg, pos).expect("equilibrium away from primaries");
    EquilibriumPoint { position: pos, jacobi_value: c, label }
}

/// The collinear point used throughout the stability and normal-form
/// pipeline: the one beyond the pair of equal small primaries, i.e. the
/// collinear root with the most negative `x`.
///
/// The triangle configuration places the dominant primary at
/// `x = sqrt(3) mu > 0` and the two small primaries near `x ~ -0.85`; the
/// critical-mass and normal-form reference values are realized at the
/// outer point on their side of the configuration.
pub fn l2_point(cfg: &SystemConfig) -> EquilibriumPoint {
    find_collinear(cfg)
        .into_iter()
        .min_by(|p, q| p.position.0.total_cmp(&q.position.0))
        .expect("at least one collinear point exists for valid mu")
}

/// All equilibria: multi-start damped Newton on `grad Omega` over polar
/// rings around each primary and the origin plus a box grid, merged within
/// [`MERGE_RADIUS`] and closed under the `y -> -y` symmetry.
pub fn find_all(cfg: &SystemConfig) -> Vec<EquilibriumPoint> {
    let mut seeds: Vec<(f64, f64)> = Vec::new();
    let mut centers: Vec<(f64, f64)> = cfg.primaries.iter().map(|p| p.position).collect();
    centers.push((0.0, 0.0));
    for &(cx, cy) in &centers {
        for ir in 1..=12 {
            let r = 0.15 * ir as f64;
            for ia in 0..24 {
                let th = 2.0 * std::f64::consts::PI * ia as f64 / 24.0;
                seeds.push((cx + r * th.cos(), cy + r * th.sin()));
            }
        }
    }
    for i in 0..50 {
        for j in 0..50 {
            seeds.push((-2.0 + 4.0 * i as f64 / 49.0, -2.0 + 4.0 * j as f64 / 49.0));
        }
    }

    let mut found: Vec<(f64, f64)> = seeds
        .par_iter()
        .filter_map(|&s| newton_gradient(cfg, s))
        .collect();
    // symmetry closure before merging so mirror pairs always co-occur
    let mirrors: Vec<(f64, f64)> = found.iter().map(|&(x, y)| (x, -y)).collect();
    found.extend(mirrors);

    let mut merged: Vec<(f64, f64)> = Vec::new();
    for p in found {
        if !merged
            .iter()
            .any(|q| (p.0 - q.0).hypot(p.1 - q.1) < MERGE_RADIUS)
        {
            merged.push(p);
        }
    }
    merged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    merged
        .into_iter()
        .map(|pos| {
            if pos.1.abs() < MERGE_RADIUS {
                make_point(cfg, (pos.0, 0.0), EquilibriumLabel::Collinear)
            } else {
                make_point(cfg, pos, EquilibriumLabel::NonCollinear)
            }
        })
        .collect()
}

/// Damped Newton iteration on `grad Omega`; `None` if it fails to converge
/// to [`GRADIENT_TOL`] or drifts toward a primary.
fn newton_gradient(cfg: &SystemConfig, seed: (f64, f64)) -> Option<(f64, f64)> {
    let (mut x, mut y) = seed;
    for _ in 0..100 {
        let (gx, gy) = model::potential_gradient(cfg, (x, y)).ok()?;
        let gnorm = gx.hypot(gy);
        if gnorm < GRADIENT_TOL {
            // polish symmetry: points essentially on the axis snap to it
            if y.abs() < MERGE_RADIUS {
                y = 0.0;
            }
            return Some((x, y));
        }
        let d = model::potential_derivatives(cfg, (x, y), 2).ok()?;
        // Hessian of Omega = I + Hessian of U
        let hxx = 1.0 + d.partial(2, 0);
        let hxy = d.partial(1, 1);
        let hyy = 1.0 + d.partial(0, 2);
        let det = hxx * hyy - hxy * hxy;
        if det.abs() < 1e-14 {
            return None;
        }
        let mut dx = -(hyy * gx - hxy * gy) / det;
        let mut dy = -(hxx * gy - hxy * gx) / det;
        // damp long steps; the Newton basin for this problem is small
        let step = dx.hypot(dy);
        if step > 0.2 {
            dx *= 0.2 / step;
            dy *= 0.2 / step;
        }
        x += dx;
        y += dy;
        if x.hypot(y) > 5.0 {
            return None;
        }
    }
    None
}

/// Discrete classification of the plane at Jacobi constant `C`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HillGrid {
    pub bounds: (f64, f64, f64, f64),
    pub nx: usize,
    pub ny: usize,
    /// Row-major: `true` if motion is allowed (`2 Omega >= C`).
    pub allowed: Vec<bool>,
    pub jacobi: f64,
}

impl HillGrid {
    pub fn index(&self, i: usize, j: usize) -> bool {
        self.allowed[j * self.nx + i]
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        let (x0, x1, y0, y1) = self.bounds;
        (
            x0 + (x1 - x0) * (i as f64 + 0.5) / self.nx as f64,
            y0 + (y1 - y0) * (j as f64 + 0.5) / self.ny as f64,
        )
    }

    /// Number of 4-connected allowed components.
    pub fn allowed_components(&self) -> usize {
        self.components(true)
    }

    /// Number of 4-connected forbidden components.
    pub fn forbidden_components(&self) -> usize {
        self.components(false)
    }

    fn components(&self, value: bool) -> usize {
        let mut seen = vec![false; self.allowed.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.allowed.len() {
            if seen[start] || self.allowed[start] != value {
                continue;
            }
            count += 1;
            stack.push(start);
            seen[start] = true;
            while let Some(idx) = stack.pop() {
                let (i, j) = (idx % self.nx, idx / self.nx);
                let mut push = |ii: usize, jj: usize| {
                    let nidx = jj * self.nx + ii;
                    if !seen[nidx] && self.allowed[nidx] == value {
                        seen[nidx] = true;
                        stack.push(nidx);
                    }
                };
                if i > 0 {
                    push(i - 1, j);
                }
                if i + 1 < self.nx {
                    push(i + 1, j);
                }
                if j > 0 {
                    push(i, j - 1);
                }
                if j + 1 < self.ny {
                    push(i, j + 1);
                }
            }
        }
        count
    }

    /// Zero-velocity curve as polyline loops, extracted by marching squares
    /// on `2 Omega - C` with linear interpolation along cell edges.
    pub fn contours(&self, cfg: &SystemConfig) -> Vec<Vec<(f64, f64)>> {
        let (x0, x1, y0, y1) = self.bounds;
        let nx = self.nx;
        let ny = self.ny;
        let xs: Vec<f64> = (0..=nx).map(|i| x0 + (x1 - x0) * i as f64 / nx as f64).collect();
        let ys: Vec<f64> = (0..=ny).map(|j| y0 + (y1 - y0) * j as f64 / ny as f64).collect();
        let field: Vec<Vec<f64>> = ys
            .par_iter()
            .map(|&y| {
                xs.iter()
                    .map(|&x| {
                        model::effective_potential(cfg, (x, y))
                            .map(|o| 2.0 * o - self.jacobi)
                            .unwrap_or(f64::INFINITY)
                    })
                    .collect()
            })
            .collect();

        // collect interpolated crossing segments per cell, then stitch
        let mut segments: Vec<((f64, f64), (f64, f64))> = Vec::new();
        let interp = |xa: f64, ya: f64, fa: f64, xb: f64, yb: f64, fb: f64| {
            let t = fa / (fa - fb);
            (xa + t * (xb - xa), ya + t * (yb - ya))
        };
        for j in 0..ny {
            for i in 0..nx {
                let f = [
                    field[j][i],
                    field[j][i + 1],
                    field[j + 1][i + 1],
                    field[j + 1][i],
                ];
                if f.iter().any(|v| !v.is_finite()) {
                    continue;
                }
                let corners = [
                    (xs[i], ys[j]),
                    (xs[i + 1], ys[j]),
                    (xs[i + 1], ys[j + 1]),
                    (xs[i], ys[j + 1]),
                ];
                let mut pts = Vec::new();
                for e in 0..4 {
                    let (a, b) = (e, (e + 1) % 4);
                    if (f[a] >= 0.0) != (f[b] >= 0.0) {
                        pts.push(interp(
                            corners[a].0,
                            corners[a].1,
                            f[a],
                            corners[b].0,
                            corners[b].1,
                            f[b],
                        ));
                    }
                }
                if pts.len() == 2 {
                    segments.push((pts[0], pts[1]));
                } else if pts.len() == 4 {
                    // ambiguous saddle cell: pair edges arbitrarily but
                    // consistently (0-1, 2-3)
                    segments.push((pts[0], pts[1]));
                    segments.push((pts[2], pts[3]));
                }
            }
        }
        stitch_segments(segments, ((x1 - x0) / nx as f64).min((y1 - y0) / ny as f64) * 1e-6)
    }
}

/// Join segments sharing endpoints (within `tol`) into polylines.
fn stitch_segments(
    mut segments: Vec<((f64, f64), (f64, f64))>,
    tol: f64,
) -> Vec<Vec<(f64, f64)>> {
    let mut loops = Vec::new();
    while let Some((a, b)) = segments.pop() {
        let mut line = vec![a, b];
        loop {
            let tail = *line.last().unwrap();
            let head = line[0];
            let mut attached = false;
            let mut idx = 0;
            while idx < segments.len() {
                let (p, q) = segments[idx];
                let close = |u: (f64, f64), v: (f64, f64)| (u.0 - v.0).hypot(u.1 - v.1) < tol;
                if close(p, tail) {
                    line.push(q);
                } else if close(q, tail) {
                    line.push(p);
                } else if close(p, head) {
                    line.insert(0, q);
                } else if close(q, head) {
                    line.insert(0, p);
                } else {
                    idx += 1;
                    continue;
                }
                segments.swap_remove(idx);
                attached = true;
                break;
            }
            if !attached {
                break;
            }
        }
        loops.push(line);
    }
    loops
}

/// Classify the plane at Jacobi constant `C` on a regular grid.
///
/// `bounds = (x_min, x_max, y_min, y_max)`, `resolution = (nx, ny)` with at
/// least 2 cells per axis.
pub fn hill_regions(
    cfg: &SystemConfig,
    jacobi: f64,
    bounds: (f64, f64, f64, f64),
    resolution: (usize, usize),
) -> HillGrid {
    let (nx, ny) = resolution;
    assert!(nx >= 2 && ny >= 2, "resolution must be at least 2 per axis");
    let mut grid = HillGrid {
        bounds,
        nx,
        ny,
        allowed: vec![false; nx * ny],
        jacobi,
    };
    let rows: Vec<Vec<bool>> = (0..ny)
        .into_par_iter()
        .map(|j| {
            (0..nx)
                .map(|i| {
                    let (x, y) = grid_center(bounds, nx, ny, i, j);
                    let hx = (bounds.1 - bounds.0) / nx as f64;
                    let hy = (bounds.3 - bounds.2) / ny as f64;
                    // a cell containing a primary holds points of arbitrarily
                    // large 2*Omega, so it is allowed at any C even when the
                    // sampled centre misses the well
                    let holds_primary = cfg.primaries.iter().any(|p| {
                        (p.position.0 - x).abs() <= 0.5 * hx
                            && (p.position.1 - y).abs() <= 0.5 * hy
                    });
                    holds_primary
                        || match model::effective_potential(cfg, (x, y)) {
                            Ok(o) => 2.0 * o >= jacobi,
                            Err(_) => true,
                        }
                })
                .collect()
        })
        .collect();
    for (j, row) in rows.into_iter().enumerate() {
        grid.allowed[j * nx..(j + 1) * nx].copy_from_slice(&row);
    }
    grid
}

fn grid_center(
    bounds: (f64, f64, f64, f64),
    nx: usize,
    ny: usize,
    i: usize,
    j: usize,
) -> (f64, f64) {
    let (x0, x1, y0, y1) = bounds;
    (
        x0 + (x1 - x0) * (i as f64 + 0.5) / nx as f64,
        y0 + (y1 - y0) * (j as f64 + 0.5) / ny as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_count_and_kepler_limit() {
        let cfg = SystemConfig::new(0.019).unwrap();
        let pts = find_collinear(&cfg);
        assert_eq!(pts.len(), 2, "expected exactly 2 collinear points");
        for p in &pts {
            let (gx, gy) = model::potential_gradient(&cfg, p.position).unwrap();
            assert!(gx.hypot(gy) < GRADIENT_TOL);
            assert_eq!(p.position.1, 0.0);
        }
        // mu -> 0 limit: both roots approach |x| = 1 (rotating Kepler)
        let cfg0 = SystemConfig::new(1e-9).unwrap();
        let pts0 = find_collinear(&cfg0);
        assert_eq!(pts0.len(), 2);
        for p in &pts0 {
            assert!((p.position.0.abs() - 1.0).abs() < 1e-5, "x = {}", p.position.0);
        }
    }

    #[test]
    fn l2_stable_under_grid_refinement() {
        // the bisection tolerance dominates: re-solving with a perturbed
        // scan grid must reproduce x_L2 to 1e-10
        let cfg = SystemConfig::new(0.019).unwrap();
        let x1 = l2_point(&cfg).position.0;
        let omega_x = |x: f64| model::potential_gradient(&cfg, (x, 0.0)).map(|g| g.0);
        // independent polish from a coarse offset bracket
        let r = bisect_root(&omega_x, x1 - 1e-3, x1 + 1.3e-3, omega_x(x1 - 1e-3).unwrap())
            .unwrap();
        assert!((r - x1).abs() < 1e-10, "refined {} vs {}", r, x1);
    }

    #[test]
    fn census_at_reference_mass() {
        let cfg = SystemConfig::new(0.019).unwrap();
        let all = find_all(&cfg);
        assert_eq!(all.len(), 8, "got {:?}", all);
        let ncol = all.iter().filter(|e| e.label == EquilibriumLabel::Collinear).count();
        assert_eq!(ncol, 2);
        for e in &all {
            let (gx, gy) = model::potential_gradient(&cfg, e.position).unwrap();
            assert!(gx.hypot(gy) < GRADIENT_TOL);
        }
        // closed under reflection
        for e in all.iter().filter(|e| e.label == EquilibriumLabel::NonCollinear) {
            let mirror = (e.position.0, -e.position.1);
            assert!(
                all.iter()
                    .any(|f| (f.position.0 - mirror.0).hypot(f.position.1 - mirror.1)
                        < MERGE_RADIUS),
                "no mirror for {:?}",
                e.position
            );
        }
    }

    #[test]
    fn hill_grid_large_c_components() {
        let cfg = SystemConfig::new(0.019).unwrap();
        let grid = hill_regions(&cfg, 1000.0, (-2.0, 2.0, -2.0, 2.0), (400, 400));
        // three disks around the primaries plus the exterior... the exterior
        // at this C lies outside the window, so count the disks directly
        for p in &cfg.primaries {
            let (x0, x1, y0, y1) = grid.bounds;
            let i = ((p.position.0 - x0) / (x1 - x0) * grid.nx as f64) as usize;
            let j = ((p.position.1 - y0) / (y1 - y0) * grid.ny as f64) as usize;
            assert!(grid.index(i, j), "cell at primary {:?} not allowed", p.position);
        }
        assert!(grid.allowed_components() >= 3);
    }

    #[test]
    fn hill_grid_wide_window_four_components() {
        let cfg = SystemConfig::new(0.019).unwrap();
        // C large but with a window wide enough to include the exterior ring
        let grid = hill_regions(&cfg, 9.0, (-3.0, 3.0, -3.0, 3.0), (600, 600));
        assert_eq!(grid.allowed_components(), 4);
    }

    #[test]
    fn hill_grid_subcritical_c_all_allowed() {
        let cfg = SystemConfig::new(0.019).unwrap();
        let cmin = find_all(&cfg)
            .iter()
            .map(|e| e.jacobi_value)
            .fold(f64::INFINITY, f64::min);
        let grid = hill_regions(&cfg, cmin - 0.01, (-2.0, 2.0, -2.0, 2.0), (300, 300));
        assert!(grid.allowed.iter().all(|&a| a));
        assert_eq!(grid.forbidden_components(), 0);
    }

    #[test]
    fn l2_cell_on_boundary_at_critical_c() {
        // At C = 2 Omega(L2) the zero-velocity set passes through L2 itself.
        // L2 is a local minimum of Omega here (both curvatures positive), so
        // the level set degenerates to the point rather than crossing the
        // cell: every neighbour stays allowed, but 2 Omega - C vanishes to
        // second order within one cell width of the L2 cell.
        let cfg = SystemConfig::new(0.019).unwrap();
        let l2 = l2_point(&cfg);
        let grid = hill_regions(&cfg, l2.jacobi_value, (-2.0, 2.0, -2.0, 2.0), (400, 400));
        let (x0, x1, y0, y1) = grid.bounds;
        let hx = (x1 - x0) / grid.nx as f64;
        let hy = (y1 - y0) / grid.ny as f64;
        let i = ((l2.position.0 - x0) / hx) as usize;
        let j = ((l2.position.1 - y0) / hy) as usize;
        let mut closest = f64::INFINITY;
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                let ii = (i as i64 + di).clamp(0, grid.nx as i64 - 1) as usize;
                let jj = (j as i64 + dj).clamp(0, grid.ny as i64 - 1) as usize;
                assert!(grid.index(ii, jj), "neighbour of a potential minimum forbidden");
                let x = x0 + (ii as f64 + 0.5) * hx;
                let y = y0 + (jj as f64 + 0.5) * hy;
                let o = model::effective_potential(&cfg, (x, y)).unwrap();
                closest = closest.min((2.0 * o - grid.jacobi).abs());
            }
        }
        // quadratic vanishing: |2 Omega - C| = O(cell^2) near L2
        assert!(closest < 1e-3, "level set misses the L2 cell by {closest:e}");
    }

    #[test]
    fn contours_trace_zero_velocity_curve() {
        let cfg = SystemConfig::new(0.019).unwrap();
        let l2 = l2_point(&cfg);
        let grid = hill_regions(&cfg, l2.jacobi_value + 0.05, (-2.0, 2.0, -2.0, 2.0), (200, 200));
        let loops = grid.contours(&cfg);
        assert!(!loops.is_empty());
        for lp in &loops {
            for &(x, y) in lp {
                let o = model::effective_potential(&cfg, (x, y)).unwrap();
                assert!(
                    (2.0 * o - grid.jacobi).abs() < 5e-2,
                    "contour point off curve by {:e}",
                    (2.0 * o - grid.jacobi).abs()
                );
            }
        }
    }
}
