//! Linear normal form of the non-semisimple linearization, the Lie-transform
//! normal form through second order, and its versal deformation.
//!
//! The construction is pinned exactly to one choice (the normal form is not
//! unique): the semisimple/nilpotent split below, the basis built from
//! `z0 = e1 / sqrt(|<e1, N e1>|)`, time scaled so the double frequency is 1,
//! and the generating functions from the finite Neumann series. Golden
//! coefficient values are meaningful only under this pinned construction.
//!
//! Two different `epsilon` roles appear in the source material and are kept
//! strictly separate here: `eps_sign` (the +-1 basis sign of the linear
//! normal form) and `eps_scale` (the Lie-series / scaling parameter).

use crate::equilibria;
use crate::linstab::{self, Regime};
use crate::model::{self, ModelError, SystemConfig, TaylorCoefficients};
use crate::nf_algebra::{AlgebraError, CartesianPoly4, LaurentFourierPoly, Phase, Term};
use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

type Poly = LaurentFourierPoly<f64>;

#[derive(Debug, Error)]
pub enum NormalFormError {
    #[error("initial vector degenerate: <e1, N e1> = {0:e}")]
    DegenerateInitialVector(f64),
    #[error("decomposition invariant violated: {0}")]
    InvariantViolation(String),
    #[error("secular obstruction at order 1: theta-free part has norm {0:e}")]
    SecularObstruction(f64),
    #[error("second-order term is missing monomial {0}")]
    MissingMonomial(String),
    #[error("negative radicand a+b+ab+1 = {0}")]
    NegativeRadicand(f64),
    #[error("truncated system requires h1 > 0, got {0}")]
    NonPositiveH1(f64),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("linearization not in the double-imaginary regime at the given mass")]
    WrongRegime,
}

/// Standard symplectic matrix on R^4 in the `(x1, x2, y1, y2)` ordering.
pub fn j4() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, 0.0,
    )
}

/// Semisimple + nilpotent decomposition of the linearization and the
/// symplectic change of basis to the linear normal form.
#[derive(Debug, Clone)]
pub struct LinearNF {
    pub sigma: Matrix4<f64>,
    pub n: Matrix4<f64>,
    pub eps_sign: f64,
    pub n31: f64,
    pub p: Matrix4<f64>,
    pub b: Matrix4<f64>,
    pub omega: f64,
}

/// Closed-form semisimple part in terms of `(a, b, omega)`, with the common
/// prefactor `1/(2 omega^2)`.
pub fn sigma_matrix(a: f64, b: f64, w: f64) -> Matrix4<f64> {
    let w2 = w * w;
    let f = 1.0 / (2.0 * w2);
    Matrix4::new(
        0.0,
        3.0 * w2 + 2.0 * b + a - 1.0,
        3.0 * w2 + a - 3.0,
        0.0,
        -(3.0 * w2 + 2.0 * a + b - 1.0),
        0.0,
        0.0,
        3.0 * w2 + b - 3.0,
        a * a - b + a * (3.0 * w2 - 2.0),
        0.0,
        0.0,
        3.0 * w2 + 2.0 * a + b - 1.0,
        0.0,
        -a + b * (3.0 * w2 + b - 2.0),
        -(3.0 * w2 + 2.0 * b + a - 1.0),
        0.0,
    ) * f
}

/// Closed-form nilpotent part, `N = A - Sigma`.
pub fn nilpotent_matrix(a: f64, b: f64, w: f64) -> Matrix4<f64> {
    let w2 = w * w;
    let f = 1.0 / (2.0 * w2);
    Matrix4::new(
        0.0,
        -(w2 + 2.0 * b + a - 1.0),
        -(w2 + a - 3.0),
        0.0,
        w2 + 2.0 * a + b - 1.0,
        0.0,
        0.0,
        -(w2 + b - 3.0),
        -(a * a - b + a * (w2 - 2.0)),
        0.0,
        0.0,
        -(w2 + 2.0 * a + b - 1.0),
        0.0,
        a - b * (w2 + b - 2.0),
        w2 + 2.0 * b + a - 1.0,
        0.0,
    ) * f
}

fn symplectic_product(x: &nalgebra::Vector4<f64>, y: &nalgebra::Vector4<f64>) -> f64 {
    (x.transpose() * j4() * y)[(0, 0)]
}

/// Build the symplectic basis of the linear normal form at a non-semisimple
/// collinear linearization.
///
/// `a`, `b` are the gravitational second derivatives and `omega` the double
/// frequency; the returned `P` satisfies `P^T J4 P = J4` and
/// `B = P^{-1} A P` has the pattern `B21 = -B12 = B43 = -B34 = omega`,
/// `B31 = B42 = eps_sign`, zeros elsewhere.
pub fn burgoyne_decompose(a: f64, b: f64, omega: f64) -> Result<LinearNF, NormalFormError> {
    let a_mat = linstab::hamiltonian_matrix(a, b);
    let sigma = sigma_matrix(a, b, omega);
    let n = nilpotent_matrix(a, b, omega);

    let check = |name: &str, m: Matrix4<f64>| -> Result<(), NormalFormError> {
        let worst = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if worst > 1e-8 {
            return Err(NormalFormError::InvariantViolation(format!("{name}: {worst:e}")));
        }
        Ok(())
    };
    check("A - (Sigma + N)", a_mat - (sigma + n))?;
    check("N^2", n * n)?;
    check("[Sigma, N]", sigma * n - n * sigma)?;
    if n.iter().all(|v| v.abs() < 1e-12) {
        return Err(NormalFormError::InvariantViolation("N = 0".into()));
    }

    let e1 = nalgebra::Vector4::new(1.0, 0.0, 0.0, 0.0);
    let n31 = symplectic_product(&e1, &(n * e1));
    if n31.abs() < 1e-10 {
        return Err(NormalFormError::DegenerateInitialVector(n31));
    }
    let eps = n31.signum();
    let z0 = e1 / n31.abs().sqrt();
    let s_z0 = sigma * z0;
    let z1 = z0 + n * s_z0 * (eps / (2.0 * omega * omega) * symplectic_product(&z0, &s_z0));
    let z2 = sigma * z1 / omega;
    let z3 = n * z1 * eps;
    let z4 = sigma * (n * z1) * (eps / omega);
    let p = Matrix4::from_columns(&[z1, z2, z3, z4]);

    // symplecticity and normal-form pattern
    check("P^T J4 P - J4", p.transpose() * j4() * p - j4())?;
    let b_mat = p.try_inverse().ok_or_else(|| {
        NormalFormError::InvariantViolation("P not invertible".into())
    })? * a_mat
        * p;
    let mut expect = Matrix4::zeros();
    expect[(0, 1)] = -omega;
    expect[(1, 0)] = omega;
    expect[(2, 3)] = -omega;
    expect[(3, 2)] = omega;
    expect[(2, 0)] = eps;
    expect[(3, 1)] = eps;
    check("B pattern", b_mat - expect)?;

    Ok(LinearNF { sigma, n, eps_sign: eps, n31, p, b: b_mat, omega })
}

/// `LinearNF` computed from scratch at the critical mass: locates `mu_b` by
/// bisection, linearizes at the reference collinear point and decomposes.
pub fn linear_nf_at_critical_mass() -> Result<(f64, LinearNF, TaylorCoefficients), NormalFormError> {
    let (mu_b, omega) = linstab::find_mu_b((0.001, 0.01))
        .map_err(|_| NormalFormError::WrongRegime)?;
    let cfg = SystemConfig::new(mu_b)?;
    let eq = equilibria::l2_point(&cfg);
    let an = linstab::analyze(&cfg, &eq).map_err(|_| NormalFormError::WrongRegime)?;
    if an.regime != Regime::DoubleImaginary {
        return Err(NormalFormError::WrongRegime);
    }
    let nf = burgoyne_decompose(an.a, an.b, omega)?;
    let taylor = model::taylor_coefficients(&cfg, eq.position)?;
    Ok((mu_b, nf, taylor))
}

/// The cubic Hamiltonian term `a3 x1^3 + c3 x1 x2^2` as a dense polynomial
/// in `(x1, x2, y1, y2)`.
pub fn cubic_term(t: &TaylorCoefficients) -> CartesianPoly4<f64> {
    CartesianPoly4::from_terms([([3, 0, 0, 0], t.a3), ([1, 2, 0, 0], t.c3)])
        .expect("degree 3 fits")
}

/// The quartic Hamiltonian term `a4 x1^4 + c4 x1^2 x2^2 + e4 x2^4`.
pub fn quartic_term(t: &TaylorCoefficients) -> CartesianPoly4<f64> {
    CartesianPoly4::from_terms([
        ([4, 0, 0, 0], t.a4),
        ([2, 2, 0, 0], t.c4),
        ([0, 4, 0, 0], t.e4),
    ])
    .expect("degree 4 fits")
}

/// Result of the second-order Lie-transform normalization.
#[derive(Debug, Clone)]
pub struct NormalFormResult {
    /// `Theta + r^2 / 2` (time scaled so the frequency is 1).
    pub h00: Poly,
    /// First-order normal-form term; zero for this problem.
    pub h01: Poly,
    /// Second-order normal-form term, theta-free.
    pub h02: Poly,
    /// The nine magnitudes with the structural sign pattern
    /// `+h1 r^4 - h2 R^4 + h3 r^2 R^2 - h4 r^2 Theta + h5 R^2 Theta
    ///  - h6 Theta^2 - h7 R^2 Theta^2/r^2 + h8 Theta^3/r^2 - h9 Theta^4/r^4`.
    pub h: [f64; 9],
    pub w1: Poly,
    pub w2: Poly,
}

/// The nine second-order monomials paired with the structural sign applied
/// when reading off the `h` magnitudes.
pub const H02_MONOMIALS: [(Term, f64); 9] = [
    (Term::new(4, 0, 0, 0, Phase::Cos), 1.0),
    (Term::new(0, 4, 0, 0, Phase::Cos), -1.0),
    (Term::new(2, 2, 0, 0, Phase::Cos), 1.0),
    (Term::new(2, 0, 1, 0, Phase::Cos), -1.0),
    (Term::new(0, 2, 1, 0, Phase::Cos), 1.0),
    (Term::new(0, 0, 2, 0, Phase::Cos), -1.0),
    (Term::new(-2, 2, 2, 0, Phase::Cos), -1.0),
    (Term::new(-2, 0, 3, 0, Phase::Cos), 1.0),
    (Term::new(-4, 0, 4, 0, Phase::Cos), -1.0),
];

/// `H00 = Theta + r^2/2` in the canonical basis.
pub fn h00() -> Poly {
    Poly::monomial(1.0, Term::new(0, 0, 1, 0, Phase::Cos))
        .add(&Poly::monomial(0.5, Term::new(2, 0, 0, 0, Phase::Cos)))
}

/// Numerical-noise floor used to chop cancellation dust out of the polar
/// polynomials between stages.
const CHOP: f64 = 1e-13;

/// Deprit normalization through second order.
///
/// `p` is the symplectic normalizing matrix (only its eight nonzero entries
/// matter), `taylor` the cubic/quartic coefficients at the equilibrium. The
/// Hamiltonian processed is
/// `H = H00 + eps_scale H1 + (eps_scale^2 / 2) H2` in the normal-form
/// coordinates with time scaled to frequency 1.
pub fn deprit_normal_form(
    p: &Matrix4<f64>,
    taylor: &TaylorCoefficients,
) -> Result<NormalFormResult, NormalFormError> {
    let p_rows: [[f64; 4]; 4] =
        std::array::from_fn(|i| std::array::from_fn(|j| p[(i, j)]));
    let h1_polar = cubic_term(taylor).to_polar(&p_rows)?.chop(CHOP);
    let h2_polar = quartic_term(taylor).to_polar(&p_rows)?.chop(CHOP);

    // order 1: the theta-free part must vanish
    let (h1_star, h1_prime) = h1_polar.split_mean();
    let star_norm = h1_star.terms().map(|(_, c)| c.abs()).fold(0.0, f64::max);
    if star_norm > 1e-10 {
        return Err(NormalFormError::SecularObstruction(star_norm));
    }
    let w1 = Poly::solve_homological(&h1_prime)?;

    // order 2: H02 = tilde H2 star, with tilde H2 = H2 + {H1, W1}
    let tilde_h2 = h2_polar.add(&h1_polar.poisson_bracket(&w1)?).chop(CHOP);
    let (h02, h2_prime) = tilde_h2.split_mean();
    let w2 = Poly::solve_homological(&h2_prime)?;

    let mut h = [0.0; 9];
    for (slot, (term, sign)) in h.iter_mut().zip(H02_MONOMIALS.iter()) {
        let c = h02.coeff(term);
        if c == 0.0 {
            return Err(NormalFormError::MissingMonomial(term.to_string()));
        }
        *slot = sign * c;
    }
    // no stray monomials beyond the nine
    for (t, c) in h02.terms() {
        if !H02_MONOMIALS.iter().any(|(m, _)| m == t) && c.abs() > 1e-9 {
            return Err(NormalFormError::InvariantViolation(format!(
                "unexpected H02 term {t} with coefficient {c:e}"
            )));
        }
    }

    Ok(NormalFormResult { h00: h00(), h01: Poly::zero(), h02, h, w1, w2 })
}

/// Versal deformation parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VersalParams {
    pub nu1: f64,
    pub nu2: f64,
}

/// `nu2 = 1/2 - (a+b)/4 - sqrt(a+b+ab+1)/2`,
/// `nu1 = sqrt(1/2 - (a+b)/4 + sqrt(a+b+ab+1)/2) - 1`; the consistency
/// relation `(1+nu1)^2 = 1 - (a+b)/2 - nu2` is checked before returning.
pub fn versal_params(a: f64, b: f64) -> Result<VersalParams, NormalFormError> {
    let rad = a + b + a * b + 1.0;
    if rad < 0.0 {
        return Err(NormalFormError::NegativeRadicand(rad));
    }
    let s = rad.sqrt();
    let base = 0.5 - 0.25 * (a + b);
    let nu2 = base - 0.5 * s;
    let nu1 = (base + 0.5 * s).sqrt() - 1.0;
    let lhs = (1.0 + nu1) * (1.0 + nu1);
    let rhs = 1.0 - 0.5 * (a + b) - nu2;
    if (lhs - rhs).abs() > 1e-10 {
        return Err(NormalFormError::InvariantViolation(format!(
            "versal consistency: {lhs} vs {rhs}"
        )));
    }
    Ok(VersalParams { nu1, nu2 })
}

/// The versal family `B_nu` with characteristic polynomial
/// `lambda^4 + 2[(1+nu1)^2 + nu2] lambda^2 + [(1+nu1)^2 - nu2]^2`.
pub fn versal_matrix(nu: &VersalParams) -> Matrix4<f64> {
    let u = 1.0 + nu.nu1;
    Matrix4::new(
        0.0, -u, nu.nu2, 0.0, //
        u, 0.0, 0.0, nu.nu2, //
        -1.0, 0.0, 0.0, -u, //
        0.0, -1.0, u, 0.0,
    )
}

/// The eigenvalue squares of the versal family,
/// `lambda^2 = -((1+nu1)^2 + nu2) +- 2|1+nu1| sqrt(nu2)` (complex-safe for
/// negative `nu2`).
pub fn versal_eigenvalue_squares(nu: &VersalParams) -> [num_complex::Complex64; 2] {
    use num_complex::Complex64;
    let u = 1.0 + nu.nu1;
    let base = Complex64::new(-(u * u + nu.nu2), 0.0);
    let root = Complex64::new(nu.nu2, 0.0).sqrt() * 2.0 * u.abs();
    [base + root, base - root]
}

/// Manifold topology of the truncated one-degree-of-freedom system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruncatedTopology {
    /// `nu < 0`: stable and unstable manifolds form a homoclinic loop.
    Connected,
    /// `nu >= 0`: the loop has shrunk into the equilibrium or is absent.
    ShrunkOrAbsent,
}

/// The truncated system
/// `H = Theta + eps_scale (1/2 (R^2 + Theta^2/r^2) + (nu/2) r^2 + h1 r^4)`
/// reduced to the `(r, R)` half-plane with `Theta` a parameter.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedSystem {
    pub nu: f64,
    pub h1: f64,
    pub theta_cap: f64,
}

impl TruncatedSystem {
    pub fn new(nu: f64, h1: f64, theta_cap: f64) -> Result<Self, NormalFormError> {
        if h1 <= 0.0 {
            return Err(NormalFormError::NonPositiveH1(h1));
        }
        Ok(TruncatedSystem { nu, h1, theta_cap })
    }

    /// Reduced Hamiltonian value (without the constant `Theta` term).
    pub fn hamiltonian(&self, r: f64, big_r: f64) -> f64 {
        0.5 * (big_r * big_r + self.theta_cap * self.theta_cap / (r * r))
            + 0.5 * self.nu * r * r
            + self.h1 * r.powi(4)
    }

    /// Radial force balance `-Theta^2/r^3 + nu r + 4 h1 r^3`.
    pub fn radial_gradient(&self, r: f64) -> f64 {
        -self.theta_cap * self.theta_cap / r.powi(3) + self.nu * r + 4.0 * self.h1 * r.powi(3)
    }

    /// Positive roots of the radial force balance (equilibria with `R = 0`),
    /// found by sign scan plus bisection on `(0, r_max]`.
    pub fn equilibria(&self, r_max: f64) -> Vec<f64> {
        const CELLS: usize = 4000;
        let mut roots = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for i in 1..=CELLS {
            let r = r_max * i as f64 / CELLS as f64;
            let f = self.radial_gradient(r);
            if let Some((rp, fp)) = prev {
                if fp == 0.0 {
                    roots.push(rp);
                } else if fp * f < 0.0 {
                    let (mut a, mut b, mut fa) = (rp, r, fp);
                    for _ in 0..100 {
                        let m = 0.5 * (a + b);
                        let fm = self.radial_gradient(m);
                        if fm == 0.0 || (b - a) < 1e-14 {
                            break;
                        }
                        if fa * fm < 0.0 {
                            b = m;
                        } else {
                            a = m;
                            fa = fm;
                        }
                    }
                    roots.push(0.5 * (a + b));
                }
            }
            prev = Some((r, f));
        }
        roots
    }

    /// Sample the level set `H = level` on a uniform `r`-grid: for each `r`,
    /// the `+-R` pair when `2(level - V_eff(r)) >= 0`.
    pub fn level_set(&self, level: f64, r_range: (f64, f64), samples: usize) -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for i in 0..samples {
            let r = r_range.0 + (r_range.1 - r_range.0) * i as f64 / (samples - 1).max(1) as f64;
            if r <= 0.0 {
                continue;
            }
            let v = self.hamiltonian(r, 0.0);
            let r2 = 2.0 * (level - v);
            if r2 >= 0.0 {
                let big_r = r2.sqrt();
                pts.push((r, big_r));
                if big_r > 0.0 {
                    pts.push((r, -big_r));
                }
            }
        }
        pts
    }

    /// Topology of the stable/unstable manifolds of the origin.
    pub fn classification(&self) -> TruncatedTopology {
        if self.nu < 0.0 {
            TruncatedTopology::Connected
        } else {
            TruncatedTopology::ShrunkOrAbsent
        }
    }
}
