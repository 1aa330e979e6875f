//! Synodic-frame dynamics of the equilateral restricted four-body problem.
//!
//! All quantities are dimensionless: the triangle side is 1, the total mass
//! is 1 and the frame rotates with unit angular velocity. The module is
//! generic over the scalar type so the potential and its derivatives can be
//! evaluated in `f32`, `f64` or any other [`num_traits::Float`].

use num_traits::{Float, FromPrimitive};
use thiserror::Error;

/// Distance floor below which potential evaluations are treated as
/// collisions rather than returning huge finite values.
pub const COLLISION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("point is within {dist:e} of primary {index} (floor {floor:e})")]
    Collision { index: usize, dist: f64, floor: f64 },
    #[error("mass parameter {0} outside [0, 1/3]")]
    MassParameter(f64),
    #[error("derivative order {0} not in 1..=4")]
    DerivativeOrder(usize),
}

/// One of the three primaries: position on the rotating triangle and mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primary<F = f64> {
    pub position: (F, F),
    pub mass: F,
}

/// Mass parameter and the derived triangle configuration.
///
/// The primaries sit at `(sqrt(3) mu, 0)` with mass `1 - 2mu` and at
/// `(-sqrt(3)(1-2mu)/2, -1/2)`, `(-sqrt(3)(1-2mu)/2, +1/2)` with mass `mu`
/// each, which puts the center of mass at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig<F = f64> {
    pub mu: F,
    pub primaries: [Primary<F>; 3],
    pub collision_floor: F,
}

fn c<F: Float + FromPrimitive>(x: f64) -> F {
    F::from_f64(x).expect("constant conversion")
}

impl<F: Float + FromPrimitive> SystemConfig<F> {
    pub fn new(mu: F) -> Result<Self, ModelError> {
        if !(mu >= F::zero() && mu <= F::one() / c(3.0)) || !mu.is_finite() {
            return Err(ModelError::MassParameter(mu.to_f64().unwrap_or(f64::NAN)));
        }
        let s3 = c::<F>(3.0).sqrt();
        let half = c::<F>(0.5);
        let m1 = F::one() - (mu + mu);
        let x23 = -s3 * m1 * half;
        Ok(SystemConfig {
            mu,
            primaries: [
                Primary { position: (s3 * mu, F::zero()), mass: m1 },
                Primary { position: (x23, -half), mass: mu },
                Primary { position: (x23, half), mass: mu },
            ],
            collision_floor: c(COLLISION_FLOOR),
        })
    }

    fn check_distances(&self, x: F, y: F) -> Result<(), ModelError> {
        for (i, p) in self.primaries.iter().enumerate() {
            let (dx, dy) = (x - p.position.0, y - p.position.1);
            let r = (dx * dx + dy * dy).sqrt();
            if r < self.collision_floor {
                return Err(ModelError::Collision {
                    index: i,
                    dist: r.to_f64().unwrap_or(0.0),
                    floor: self.collision_floor.to_f64().unwrap_or(COLLISION_FLOOR),
                });
            }
        }
        Ok(())
    }
}

/// Planar synodic phase state `(x, y, xdot, ydot)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct State<F = f64> {
    pub x: F,
    pub y: F,
    pub vx: F,
    pub vy: F,
}

impl<F: Float> State<F> {
    pub fn new(x: F, y: F, vx: F, vy: F) -> Self {
        State { x, y, vx, vy }
    }

    pub fn to_array(self) -> [F; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    pub fn from_array(a: [F; 4]) -> Self {
        State { x: a[0], y: a[1], vx: a[2], vy: a[3] }
    }
}

/// Effective potential `Omega(x, y) = (x^2 + y^2)/2 + sum mu_i / r_i`.
pub fn effective_potential<F: Float + FromPrimitive>(
    cfg: &SystemConfig<F>,
    p: (F, F),
) -> Result<F, ModelError> {
    let (x, y) = p;
    cfg.check_distances(x, y)?;
    let mut omega = (x * x + y * y) * c(0.5);
    for pr in &cfg.primaries {
        let (dx, dy) = (x - pr.position.0, y - pr.position.1);
        omega = omega + pr.mass / (dx * dx + dy * dy).sqrt();
    }
    Ok(omega)
}

/// Gradient of the effective potential, `(Omega_x, Omega_y)`.
pub fn potential_gradient<F: Float + FromPrimitive>(
    cfg: &SystemConfig<F>,
    p: (F, F),
) -> Result<(F, F), ModelError> {
    let (x, y) = p;
    cfg.check_distances(x, y)?;
    let mut gx = x;
    let mut gy = y;
    for pr in &cfg.primaries {
        let (dx, dy) = (x - pr.position.0, y - pr.position.1);
        let r2 = dx * dx + dy * dy;
        let r3 = r2 * r2.sqrt();
        gx = gx - pr.mass * dx / r3;
        gy = gy - pr.mass * dy / r3;
    }
    Ok((gx, gy))
}

/// Right-hand side of the synodic equations:
/// `(xdot, ydot, 2 ydot + Omega_x, -2 xdot + Omega_y)`.
pub fn vector_field<F: Float + FromPrimitive>(
    cfg: &SystemConfig<F>,
    s: &State<F>,
) -> Result<State<F>, ModelError> {
    let (gx, gy) = potential_gradient(cfg, (s.x, s.y))?;
    let two = c::<F>(2.0);
    Ok(State { x: s.vx, y: s.vy, vx: two * s.vy + gx, vy: -(two * s.vx) + gy })
}

/// Jacobi integral `C = 2 Omega - (xdot^2 + ydot^2)`.
pub fn jacobi_constant<F: Float + FromPrimitive>(
    cfg: &SystemConfig<F>,
    s: &State<F>,
) -> Result<F, ModelError> {
    let omega = effective_potential(cfg, (s.x, s.y))?;
    Ok(c::<F>(2.0) * omega - (s.vx * s.vx + s.vy * s.vy))
}

/// Hamiltonian value associated with the Jacobi constant, `H = -C/2`.
pub fn hamiltonian_from_jacobi<F: Float + FromPrimitive>(jacobi: F) -> F {
    -jacobi * c::<F>(0.5)
}

/// The reversing symmetry `(x, y, xdot, ydot) -> (x, -y, -xdot, ydot)`.
///
/// If `t -> s(t)` solves the equations of motion, the reflected state
/// evolved backward in time traces the mirror trajectory.
pub fn reflect_trajectory<F: Float>(s: &State<F>) -> State<F> {
    State { x: s.x, y: -s.y, vx: -s.vx, vy: s.vy }
}

/// Table of partial derivatives of the gravitational part
/// `U = sum mu_i / r_i`, indexed by `(x-order, y-order)`.
///
/// `partial(i, j)` is `d^(i+j) U / dx^i dy^j` for `1 <= i + j <= max_order`.
#[derive(Debug, Clone)]
pub struct DerivativeTable<F = f64> {
    max_order: usize,
    entries: [[F; 5]; 5],
}

impl<F: Float> DerivativeTable<F> {
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn partial(&self, i: usize, j: usize) -> F {
        assert!(i + j >= 1 && i + j <= self.max_order, "order {} out of range", i + j);
        self.entries[i][j]
    }
}

/// Closed-form partial derivatives of `U` through `max_order <= 4`.
///
/// The derivatives of `1/r` are hand-expanded rational expressions per
/// order; nothing is differenced numerically.
pub fn potential_derivatives<F: Float + FromPrimitive>(
    cfg: &SystemConfig<F>,
    p: (F, F),
    max_order: usize,
) -> Result<DerivativeTable<F>, ModelError> {
    if !(1..=4).contains(&max_order) {
        return Err(ModelError::DerivativeOrder(max_order));
    }
    let (x, y) = p;
    cfg.check_distances(x, y)?;
    let mut e = [[F::zero(); 5]; 5];
    for pr in &cfg.primaries {
        let m = pr.mass;
        let (dx, dy) = (x - pr.position.0, y - pr.position.1);
        let r2 = dx * dx + dy * dy;
        let r = r2.sqrt();
        let r3 = r2 * r;
        let r5 = r3 * r2;
        let r7 = r5 * r2;
        let r9 = r7 * r2;
        let (dx2, dy2) = (dx * dx, dy * dy);
        let three = c::<F>(3.0);
        let nine = c::<F>(9.0);
        let fifteen = c::<F>(15.0);
        let forty5 = c::<F>(45.0);
        let ninety = c::<F>(90.0);
        let c105 = c::<F>(105.0);

        e[1][0] = e[1][0] - m * dx / r3;
        e[0][1] = e[0][1] - m * dy / r3;
        if max_order >= 2 {
            e[2][0] = e[2][0] + m * (three * dx2 / r5 - F::one() / r3);
            e[0][2] = e[0][2] + m * (three * dy2 / r5 - F::one() / r3);
            e[1][1] = e[1][1] + m * three * dx * dy / r5;
        }
        if max_order >= 3 {
            e[3][0] = e[3][0] + m * (nine * dx / r5 - fifteen * dx2 * dx / r7);
            e[0][3] = e[0][3] + m * (nine * dy / r5 - fifteen * dy2 * dy / r7);
            e[2][1] = e[2][1] + m * (three * dy / r5 - fifteen * dx2 * dy / r7);
            e[1][2] = e[1][2] + m * (three * dx / r5 - fifteen * dx * dy2 / r7);
        }
        if max_order >= 4 {
            e[4][0] = e[4][0] + m * (nine / r5 - ninety * dx2 / r7 + c105 * dx2 * dx2 / r9);
            e[0][4] = e[0][4] + m * (nine / r5 - ninety * dy2 / r7 + c105 * dy2 * dy2 / r9);
            e[3][1] = e[3][1] + m * (c105 * dx2 * dx * dy / r9 - forty5 * dx * dy / r7);
            e[1][3] = e[1][3] + m * (c105 * dx * dy2 * dy / r9 - forty5 * dx * dy / r7);
            e[2][2] = e[2][2]
                + m * (three / r5 - fifteen * (dx2 + dy2) / r7 + c105 * dx2 * dy2 / r9);
        }
    }
    Ok(DerivativeTable { max_order, entries: e })
}

/// Taylor coefficients of the cubic and quartic parts of the Hamiltonian
/// expanded at a collinear equilibrium.
///
/// These are the coefficients of the monomials in the expansion of `-U`
/// shifted to the point, minus sign and `1/n!` factorials included, so that
/// the cubic term reads `a3 x1^3 + c3 x1 x2^2` and the quartic term
/// `a4 x1^4 + c4 x1^2 x2^2 + e4 x2^4`. Odd powers of `x2` drop out on the
/// symmetry axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorCoefficients<F = f64> {
    pub a3: F,
    pub c3: F,
    pub a4: F,
    pub c4: F,
    pub e4: F,
}

pub fn taylor_coefficients<F: Float + FromPrimitive>(
    cfg: &SystemConfig<F>,
    p: (F, F),
) -> Result<TaylorCoefficients<F>, ModelError> {
    let t = potential_derivatives(cfg, p, 4)?;
    Ok(TaylorCoefficients {
        a3: -t.partial(3, 0) / c(6.0),
        c3: -t.partial(1, 2) / c(2.0),
        a4: -t.partial(4, 0) / c(24.0),
        c4: -t.partial(2, 2) / c(4.0),
        e4: -t.partial(0, 4) / c(24.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(mu: f64) -> SystemConfig {
        SystemConfig::new(mu).unwrap()
    }

    #[test]
    fn config_invariants_hold_over_mu_range() {
        for k in 0..=100 {
            let mu = k as f64 / 300.0;
            let c = cfg(mu);
            // unit triangle side
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let (xi, yi) = c.primaries[i].position;
                    let (xj, yj) = c.primaries[j].position;
                    let side = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                    assert_relative_eq!(side, 1.0, epsilon = 1e-14);
                }
            }
            // center of mass at the origin
            let (mut sx, mut sy, mut sm) = (0.0, 0.0, 0.0);
            for p in &c.primaries {
                sx += p.mass * p.position.0;
                sy += p.mass * p.position.1;
                sm += p.mass;
            }
            assert!(sx.abs() < 1e-15 && sy.abs() < 1e-15);
            assert_relative_eq!(sm, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_bad_mass_parameter() {
        assert!(SystemConfig::new(-0.1).is_err());
        assert!(SystemConfig::new(0.34).is_err());
        assert!(SystemConfig::new(f64::NAN).is_err());
    }

    #[test]
    fn potential_single_mass_at_origin() {
        // mu = 0: unit mass at the origin, Omega(1, 0) = 1/2 + 1
        let v = effective_potential(&cfg(0.0), (1.0, 0.0)).unwrap();
        assert_relative_eq!(v, 1.5, epsilon = 1e-14);
    }

    #[test]
    fn potential_symmetric_case_at_origin() {
        // mu = 1/3: all r_i = 1/sqrt(3), Omega(0,0) = 3*(1/3)*sqrt(3) = sqrt(3)
        let v = effective_potential(&cfg(1.0 / 3.0), (0.0, 0.0)).unwrap();
        assert_relative_eq!(v, 3.0_f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn potential_matches_direct_sum() {
        // independent re-evaluation of the defining sum at an arbitrary point
        let c = cfg(0.019);
        let (x, y) = (1.5, 0.5);
        let mut expect = (x * x + y * y) / 2.0;
        for p in &c.primaries {
            expect += p.mass / ((x - p.position.0).hypot(y - p.position.1));
        }
        let v = effective_potential(&c, (x, y)).unwrap();
        assert_relative_eq!(v, expect, epsilon = 1e-15);
    }

    #[test]
    fn collision_detected() {
        let c = cfg(0.019);
        let p = c.primaries[1].position;
        assert!(matches!(
            effective_potential(&c, p),
            Err(ModelError::Collision { index: 1, .. })
        ));
    }

    #[test]
    fn vector_field_vanishes_at_kepler_equilibrium() {
        // mu = 0 is the rotating Kepler problem; Omega_r = r - 1/r^2 = 0 at r = 1
        let d = vector_field(&cfg(0.0), &State::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        for v in d.to_array() {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = cfg(0.019);
        let pts = [(1.5, 0.5), (-0.3, 0.8), (0.2, -1.1), (2.0, 0.1)];
        for &(x, y) in &pts {
            let s = State::new(x, y, 0.3, -0.2);
            let d = vector_field(&c, &s).unwrap();
            let h = 1e-5 * x.abs().max(1.0);
            let hy = 1e-5 * y.abs().max(1.0);
            let ox = (effective_potential(&c, (x + h, y)).unwrap()
                - effective_potential(&c, (x - h, y)).unwrap())
                / (2.0 * h);
            let oy = (effective_potential(&c, (x, y + hy)).unwrap()
                - effective_potential(&c, (x, y - hy)).unwrap())
                / (2.0 * hy);
            assert_relative_eq!(d.vx, 2.0 * s.vy + ox, max_relative = 1e-6);
            assert_relative_eq!(d.vy, -2.0 * s.vx + oy, max_relative = 1e-6);
        }
    }

    #[test]
    fn jacobi_at_rest_is_twice_potential() {
        let c = cfg(0.1);
        let s = State::new(0.7, 0.2, 0.0, 0.0);
        let cj = jacobi_constant(&c, &s).unwrap();
        let om = effective_potential(&c, (0.7, 0.2)).unwrap();
        assert_relative_eq!(cj, 2.0 * om, epsilon = 1e-14);
        assert_relative_eq!(hamiltonian_from_jacobi(cj), -cj / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn jacobi_symmetric_case_unit_speed() {
        // from the Omega example: C = 2 sqrt(3) - 1
        let cj = jacobi_constant(&cfg(1.0 / 3.0), &State::new(0.0, 0.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(cj, 2.0 * 3.0_f64.sqrt() - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn reflect_is_involution() {
        let s = State::new(0.5, 0.2, -0.1, 0.4);
        let r = reflect_trajectory(&s);
        assert_eq!(r, State::new(0.5, -0.2, 0.1, 0.4));
        assert_eq!(reflect_trajectory(&r), s);
        // fixed point on the symmetry section
        let f = State::new(1.0, 0.0, 0.0, 0.3);
        assert_eq!(reflect_trajectory(&f), f);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = cfg(0.019);
        let pts = [(1.5, 0.5), (-0.4, 0.9), (0.3, -1.2)];
        for &(x, y) in &pts {
            let t = potential_derivatives(&c, (x, y), 4).unwrap();
            let u = |x: f64, y: f64| -> f64 {
                c.primaries
                    .iter()
                    .map(|p| p.mass / (x - p.position.0).hypot(y - p.position.1))
                    .sum()
            };
            let hx = 1e-5 * x.abs().max(1.0);
            let hy = 1e-5 * y.abs().max(1.0);
            // first and second order, centered stencils
            let fd10 = (u(x + hx, y) - u(x - hx, y)) / (2.0 * hx);
            let fd01 = (u(x, y + hy) - u(x, y - hy)) / (2.0 * hy);
            let fd20 = (u(x + hx, y) - 2.0 * u(x, y) + u(x - hx, y)) / (hx * hx);
            let fd02 = (u(x, y + hy) - 2.0 * u(x, y) + u(x, y - hy)) / (hy * hy);
            let fd11 = (u(x + hx, y + hy) - u(x + hx, y - hy) - u(x - hx, y + hy)
                + u(x - hx, y - hy))
                / (4.0 * hx * hy);
            assert_relative_eq!(t.partial(1, 0), fd10, max_relative = 1e-5);
            assert_relative_eq!(t.partial(0, 1), fd01, max_relative = 1e-5);
            assert_relative_eq!(t.partial(2, 0), fd20, max_relative = 1e-5);
            assert_relative_eq!(t.partial(0, 2), fd02, max_relative = 1e-5);
            assert_relative_eq!(t.partial(1, 1), fd11, max_relative = 1e-5);
            // third and fourth order: difference the closed-form lower orders
            let g = |x: f64, y: f64, i: usize, j: usize| {
                potential_derivatives(&c, (x, y), 3).unwrap().partial(i, j)
            };
            for (i, j) in [(3, 0), (2, 1), (1, 2), (0, 3), (4, 0), (3, 1), (2, 2), (1, 3), (0, 4)]
            {
                let fd = if i > 0 {
                    (g(x + hx, y, i - 1, j) - g(x - hx, y, i - 1, j)) / (2.0 * hx)
                } else {
                    (g(x, y + hy, 0, j - 1) - g(x, y - hy, 0, j - 1)) / (2.0 * hy)
                };
                assert_relative_eq!(t.partial(i, j), fd, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn odd_y_partials_vanish_on_axis() {
        let c = cfg(0.019);
        for &x in &[-1.5, -0.979, 0.6, 1.2] {
            let t = potential_derivatives(&c, (x, 0.0), 4).unwrap();
            for (i, j) in [(0, 1), (1, 1), (0, 3), (2, 1), (3, 1), (1, 3)] {
                assert!(
                    t.partial(i, j).abs() < 1e-12,
                    "partial({i},{j}) = {} at x = {x}",
                    t.partial(i, j)
                );
            }
        }
    }

    #[test]
    fn derivative_order_validated() {
        let c = cfg(0.1);
        assert!(potential_derivatives(&c, (1.0, 1.0), 0).is_err());
        assert!(potential_derivatives(&c, (1.0, 1.0), 5).is_err());
    }
}
