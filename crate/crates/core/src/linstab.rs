//! Linearization at a collinear equilibrium: the Hamiltonian matrix, its
//! spectrum, stability regimes and the critical mass where the two
//! imaginary frequency pairs collide.

use crate::equilibria::{self, EquilibriumLabel, EquilibriumPoint};
use crate::model::{self, ModelError, SystemConfig};
use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("analysis requires a collinear point; mixed partial is {0:e}")]
    NotCollinear(f64),
    #[error("bracket [{0}, {1}] does not straddle a discriminant sign change")]
    BadBracket(f64, f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Spectrum classification of the linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Two pairs `+-i omega_1`, `+-i omega_2` (linearly stable center).
    TwoImaginaryPairs,
    /// Collision of the pairs: `+-i omega` with multiplicity two,
    /// non-semisimple.
    DoubleImaginary,
    /// Krein bifurcation has happened: `+-alpha +- i omega`, all nonzero.
    ComplexQuadruple,
    /// Real pair plus imaginary pair `+-lambda, +-i omega` (the regime of
    /// the collinear point on the dominant-primary side).
    SaddleCenter,
}

/// Linearization data at a collinear equilibrium.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearAnalysis {
    /// `a = U_x1x1`, `b = U_x2x2` at the point (second derivatives of the
    /// gravitational part in the Hamiltonian normalization).
    pub a: f64,
    pub b: f64,
    /// Four eigenvalues, closed under negation and conjugation.
    pub eigenvalues: [Complex64; 4],
    pub regime: Regime,
    /// Imaginary frequency when the regime defines one (the double
    /// frequency in `DoubleImaginary`, the imaginary part in
    /// `ComplexQuadruple` / `SaddleCenter`).
    pub omega: Option<f64>,
    /// Real part in the `ComplexQuadruple` regime.
    pub alpha: Option<f64>,
    pub discriminant: f64,
    #[serde(skip)]
    pub matrix_a: Matrix4<f64>,
}

/// The 4x4 Hamiltonian matrix of the linearization in the symplectic
/// coordinates `(x1, x2, y1, y2)`:
/// rows `[0,1,1,0; -1,0,0,1; a,0,0,1; 0,b,-1,0]`.
pub fn hamiltonian_matrix(a: f64, b: f64) -> Matrix4<f64> {
    Matrix4::new(
        0.0, 1.0, 1.0, 0.0, //
        -1.0, 0.0, 0.0, 1.0, //
        a, 0.0, 0.0, 1.0, //
        0.0, b, -1.0, 0.0,
    )
}

/// Discriminant of the biquadratic characteristic polynomial, written in
/// terms of the effective-potential second derivatives
/// `Omega_x1x1 = 1 + a`, `Omega_x2x2 = 1 + b`:
/// `D = (4 - Omega_x1x1 - Omega_x2x2)^2 - 4 Omega_x1x1 Omega_x2x2`.
pub fn discriminant(a: f64, b: f64) -> f64 {
    let oxx = 1.0 + a;
    let oyy = 1.0 + b;
    (4.0 - oxx - oyy).powi(2) - 4.0 * oxx * oyy
}

/// Coefficients `(p, q)` of the characteristic polynomial
/// `lambda^4 + p lambda^2 + q`.
pub fn charpoly_coefficients(a: f64, b: f64) -> (f64, f64) {
    (2.0 - a - b, a * b + a + b + 1.0)
}

/// Linearize at a collinear equilibrium.
pub fn analyze(cfg: &SystemConfig, eq: &EquilibriumPoint) -> Result<LinearAnalysis, StabilityError> {
    if eq.label != EquilibriumLabel::Collinear {
        let d = model::potential_derivatives(cfg, eq.position, 2)?;
        return Err(StabilityError::NotCollinear(d.partial(1, 1)));
    }
    let d = model::potential_derivatives(cfg, eq.position, 2)?;
    let uxy = d.partial(1, 1);
    if uxy.abs() > 1e-10 {
        return Err(StabilityError::NotCollinear(uxy));
    }
    // the Hamiltonian normalization absorbs the centrifugal term:
    // Omega_xx = 1 + a, so a is the bare gravitational second derivative
    let a = d.partial(2, 0);
    let b = d.partial(0, 2);
    Ok(analyze_ab(a, b))
}

/// Classification directly from `(a, b)`.
pub fn analyze_ab(a: f64, b: f64) -> LinearAnalysis {
    let (p, q) = charpoly_coefficients(a, b);
    let disc = discriminant(a, b);
    // eta = lambda^2 from the quadratic formula, complex-safe
    let sq = Complex64::new(disc, 0.0).sqrt();
    let eta1 = (Complex64::new(-p, 0.0) + sq) / 2.0;
    let eta2 = (Complex64::new(-p, 0.0) - sq) / 2.0;
    let l1 = eta1.sqrt();
    let l2 = eta2.sqrt();
    let eigenvalues = [l1, -l1, l2, -l2];

    // D = (a + b - 2)^2 - 4 (a b + a + b + 1) sits near total cancellation at
    // the resonance, so the achievable floor is set by the rounding of a and b
    // rather than by machine epsilon on D itself.
    const EPS: f64 = 1e-9;
    let (regime, omega, alpha) = if disc.abs() < EPS && q > 0.0 {
        let w = (p / 2.0).max(0.0).sqrt();
        (Regime::DoubleImaginary, Some(w), None)
    } else if q < 0.0 {
        // one eta positive, one negative: saddle-center
        let w = eta_im(eta1, eta2);
        (Regime::SaddleCenter, Some(w), None)
    } else if disc > 0.0 && p > 0.0 {
        (Regime::TwoImaginaryPairs, None, None)
    } else {
        // disc < 0: the etas are complex conjugates, lambda = +-alpha +- i w
        let l = if l1.re.abs() > EPS { l1 } else { l2 };
        (Regime::ComplexQuadruple, Some(l.im.abs()), Some(l.re.abs()))
    };

    LinearAnalysis {
        a,
        b,
        eigenvalues,
        regime,
        omega,
        alpha,
        discriminant: disc,
        matrix_a: hamiltonian_matrix(a, b),
    }
}

fn eta_im(eta1: Complex64, eta2: Complex64) -> f64 {
    let e = if eta1.re < eta2.re { eta1 } else { eta2 };
    (-e.re).max(0.0).sqrt()
}

/// Critical mass where the discriminant at the reference collinear point
/// vanishes, found by bisection to `1e-10` in `mu`. Also returns the double
/// frequency `omega` with `omega^2 = (2 - a - b)/2` at the critical mass.
pub fn find_mu_b(bracket: (f64, f64)) -> Result<(f64, f64), StabilityError> {
    let d_at = |mu: f64| -> Result<f64, StabilityError> {
        let cfg = SystemConfig::new(mu)?;
        let eq = equilibria::l2_point(&cfg);
        let an = analyze(&cfg, &eq)?;
        Ok(an.discriminant)
    };
    let (mut lo, mut hi) = bracket;
    let mut flo = d_at(lo)?;
    let fhi = d_at(hi)?;
    if flo.signum() == fhi.signum() {
        return Err(StabilityError::BadBracket(lo, hi));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = d_at(mid)?;
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if flo.signum() == fm.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let mu_b = 0.5 * (lo + hi);
    let cfg = SystemConfig::new(mu_b)?;
    let an = analyze(&cfg, &equilibria::l2_point(&cfg))?;
    let (p, _) = charpoly_coefficients(an.a, an.b);
    Ok((mu_b, (p / 2.0).sqrt()))
}
