//! Polynomial algebra for the normal-form computation.
//!
//! The working coordinate ring is spanned by monomials
//! `r^i R^j Theta^k cos(m theta)` and `r^i R^j Theta^k sin(m theta)` with
//! `i` a (possibly negative) Laurent exponent and `m >= 0`. Products of
//! harmonics are reduced eagerly to this basis, so every value is always in
//! canonical form: no zero coefficients, no `sin(0 theta)` terms, a single
//! harmonic per term.
//!
//! Coefficients are generic: `f64` for the numerical pipeline,
//! [`num_rational::BigRational`] when ring identities must hold exactly.

use num_traits::{One, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Div, Neg, Sub};
use thiserror::Error;

/// Laurent exponents of `r` never drop below this; the deepest pole in the
/// pipeline is `Theta^4 / r^4`.
pub const MIN_R_POWER: i32 = -8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("theta-antiderivative of a term with nonzero mean: {0}")]
    MeanObstruction(String),
    #[error("Laurent power of r underflowed {MIN_R_POWER} in term {0}")]
    LaurentOverflow(String),
    #[error("homological solution failed verification: residual {0}")]
    VerificationFailure(String),
    #[error("Cartesian polynomial degree {0} exceeds 4")]
    DegreeOverflow(usize),
}

/// Scalar coefficients the ring is defined over.
pub trait Coeff:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Neg<Output = Self>
    + Sub<Output = Self>
    + Div<Output = Self>
{
    fn from_int(n: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Halve, used by the product-to-sum reduction.
    fn half(self) -> Self {
        self / Self::from_int(2)
    }
}

impl Coeff for f64 {
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coeff for num_rational::BigRational {
    fn from_int(n: i64) -> Self {
        num_rational::BigRational::from_integer(n.into())
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// `cos(m theta)` or `sin(m theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Cos,
    Sin,
}

/// Monomial key `(i, j, k, m, phase)`: powers of `r`, `R`, `Theta`, the
/// harmonic index and the trigonometric phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub r_pow: i32,
    pub big_r_pow: u32,
    pub theta_cap_pow: u32,
    pub harmonic: u32,
    pub phase: Phase,
}

impl Term {
    pub const fn new(i: i32, j: u32, k: u32, m: u32, phase: Phase) -> Self {
        Term { r_pow: i, big_r_pow: j, theta_cap_pow: k, harmonic: m, phase }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r^{} R^{} Th^{}", self.r_pow, self.big_r_pow, self.theta_cap_pow)?;
        if self.harmonic > 0 {
            let name = if self.phase == Phase::Cos { "cos" } else { "sin" };
            write!(f, " {name}({}th)", self.harmonic)?;
        }
        Ok(())
    }
}

/// Polynomial in `(r, theta, R, Theta)` with Laurent powers of `r` and a
/// reduced Fourier basis in `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentFourierPoly<C: Coeff = f64> {
    terms: BTreeMap<Term, C>,
}

impl<C: Coeff> Default for LaurentFourierPoly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> LaurentFourierPoly<C> {
    pub fn zero() -> Self {
        LaurentFourierPoly { terms: BTreeMap::new() }
    }

    pub fn monomial(coeff: C, term: Term) -> Self {
        let mut p = Self::zero();
        p.accumulate(term, coeff);
        p
    }

    pub fn constant(coeff: C) -> Self {
        Self::monomial(coeff, Term::new(0, 0, 0, 0, Phase::Cos))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Term, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, term: &Term) -> C {
        self.terms.get(term).cloned().unwrap_or_else(C::zero)
    }

    fn accumulate(&mut self, term: Term, coeff: C) {
        if coeff.is_zero() {
            return;
        }
        debug_assert!(
            !(term.harmonic == 0 && term.phase == Phase::Sin),
            "sin(0) term must not be constructed"
        );
        let entry = self.terms.entry(term).or_insert_with(C::zero);
        let sum = entry.clone() + coeff;
        if sum.is_zero() {
            self.terms.remove(&term);
        } else {
            *entry = sum;
        }
    }

    /// Canonical-form validator used by tests after every operation.
    pub fn is_canonical(&self) -> bool {
        self.terms.iter().all(|(t, c)| {
            !c.is_zero() && !(t.harmonic == 0 && t.phase == Phase::Sin) && t.r_pow >= MIN_R_POWER
        })
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (t, c) in &other.terms {
            out.accumulate(*t, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        LaurentFourierPoly {
            terms: self.terms.iter().map(|(t, c)| (*t, -c.clone())).collect(),
        }
    }

    pub fn scale(&self, s: &C) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        let mut out = Self::zero();
        for (t, c) in &self.terms {
            out.accumulate(*t, c.clone() * s.clone());
        }
        out
    }

    /// Product with eager product-to-sum reduction of the harmonics.
    pub fn mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        let mut out = Self::zero();
        for (t1, c1) in &self.terms {
            for (t2, c2) in &other.terms {
                let i = t1.r_pow + t2.r_pow;
                if i < MIN_R_POWER {
                    return Err(AlgebraError::LaurentOverflow(format!("{t1} * {t2}")));
                }
                let j = t1.big_r_pow + t2.big_r_pow;
                let k = t1.theta_cap_pow + t2.theta_cap_pow;
                let c = c1.clone() * c2.clone();
                for (m, phase, fac) in trig_product(t1.harmonic, t1.phase, t2.harmonic, t2.phase)
                {
                    let contrib = match fac {
                        HalfSign::Plus => c.clone().half(),
                        HalfSign::Minus => -c.clone().half(),
                    };
                    out.accumulate(Term::new(i, j, k, m, phase), contrib);
                }
            }
        }
        Ok(out)
    }

    pub fn pow(&self, n: u32) -> Result<Self, AlgebraError> {
        let mut out = Self::constant(C::one());
        for _ in 0..n {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Partial derivative with respect to `r`.
    pub fn d_r(&self) -> Self {
        let mut out = Self::zero();
        for (t, c) in &self.terms {
            if t.r_pow != 0 {
                out.accumulate(
                    Term::new(t.r_pow - 1, t.big_r_pow, t.theta_cap_pow, t.harmonic, t.phase),
                    c.clone() * C::from_int(t.r_pow as i64),
                );
            }
        }
        out
    }

    /// Partial derivative with respect to `R`.
    pub fn d_big_r(&self) -> Self {
        let mut out = Self::zero();
        for (t, c) in &self.terms {
            if t.big_r_pow != 0 {
                out.accumulate(
                    Term::new(t.r_pow, t.big_r_pow - 1, t.theta_cap_pow, t.harmonic, t.phase),
                    c.clone() * C::from_int(t.big_r_pow as i64),
                );
            }
        }
        out
    }

    /// Partial derivative with respect to `Theta`.
    pub fn d_theta_cap(&self) -> Self {
        let mut out = Self::zero();
        for (t, c) in &self.terms {
            if t.theta_cap_pow != 0 {
                out.accumulate(
                    Term::new(t.r_pow, t.big_r_pow, t.theta_cap_pow - 1, t.harmonic, t.phase),
                    c.clone() * C::from_int(t.theta_cap_pow as i64),
                );
            }
        }
        out
    }

    /// Partial derivative with respect to the angle `theta`.
    pub fn d_theta(&self) -> Self {
        let mut out = Self::zero();
        for (t, c) in &self.terms {
            if t.harmonic == 0 {
                continue;
            }
            let m = C::from_int(t.harmonic as i64);
            match t.phase {
                Phase::Cos => out.accumulate(
                    Term::new(t.r_pow, t.big_r_pow, t.theta_cap_pow, t.harmonic, Phase::Sin),
                    -(c.clone() * m),
                ),
                Phase::Sin => out.accumulate(
                    Term::new(t.r_pow, t.big_r_pow, t.theta_cap_pow, t.harmonic, Phase::Cos),
                    c.clone() * m,
                ),
            }
        }
        out
    }

    /// Inverse of [`Self::d_theta`] on zero-mean input: maps
    /// `cos(m theta) -> sin(m theta)/m` and `sin(m theta) -> -cos(m theta)/m`.
    pub fn antiderivative_theta(&self) -> Result<Self, AlgebraError> {
        let mut out = Self::zero();
        let mut obstruction = Vec::new();
        for (t, c) in &self.terms {
            if t.harmonic == 0 {
                obstruction.push(t.to_string());
                continue;
            }
            let m = C::from_int(t.harmonic as i64);
            match t.phase {
                Phase::Cos => out.accumulate(
                    Term::new(t.r_pow, t.big_r_pow, t.theta_cap_pow, t.harmonic, Phase::Sin),
                    c.clone() / m,
                ),
                Phase::Sin => out.accumulate(
                    Term::new(t.r_pow, t.big_r_pow, t.theta_cap_pow, t.harmonic, Phase::Cos),
                    -(c.clone() / m),
                ),
            }
        }
        if !obstruction.is_empty() {
            return Err(AlgebraError::MeanObstruction(obstruction.join(", ")));
        }
        Ok(out)
    }

    /// The nilpotent operator `L_N = -r d/dR`.
    pub fn op_ln(&self) -> Self {
        let mut out = Self::zero();
        for (t, c) in &self.terms {
            if t.big_r_pow != 0 {
                out.accumulate(
                    Term::new(t.r_pow + 1, t.big_r_pow - 1, t.theta_cap_pow, t.harmonic, t.phase),
                    -(c.clone() * C::from_int(t.big_r_pow as i64)),
                );
            }
        }
        out
    }

    /// Split into the theta-free part and the zero-mean remainder.
    pub fn split_mean(&self) -> (Self, Self) {
        let mut star = Self::zero();
        let mut prime = Self::zero();
        for (t, c) in &self.terms {
            if t.harmonic == 0 {
                star.accumulate(*t, c.clone());
            } else {
                prime.accumulate(*t, c.clone());
            }
        }
        (star, prime)
    }

    /// Canonical Poisson bracket for the conjugate pairs `(r, R)` and
    /// `(theta, Theta)`:
    /// `{f, g} = f_r g_R - f_R g_r + f_theta g_Theta - f_Theta g_theta`.
    pub fn poisson_bracket(&self, other: &Self) -> Result<Self, AlgebraError> {
        let a = self.d_r().mul(&other.d_big_r())?;
        let b = self.d_big_r().mul(&other.d_r())?;
        let c = self.d_theta().mul(&other.d_theta_cap())?;
        let d = self.d_theta_cap().mul(&other.d_theta())?;
        Ok(a.sub(&b).add(&c.sub(&d)))
    }

    /// Solve the homological equation `L(W) = rhs` for the operator
    /// `L = d/dtheta - r d/dR` by the finite Neumann series
    /// `W = sum_k (-Ls^-1 Ln)^k Ls^-1 rhs`, terminating by nilpotency of
    /// `Ln` on bounded `R`-degree.
    ///
    /// `rhs` must have zero theta-mean. The solution is verified by
    /// back-substitution before it is returned.
    pub fn solve_homological(rhs: &Self) -> Result<Self, AlgebraError> {
        let mut w = Self::zero();
        let mut cur = rhs.antiderivative_theta()?;
        let max_iters = rhs
            .terms
            .keys()
            .map(|t| t.big_r_pow)
            .max()
            .unwrap_or(0)
            + 2;
        for _ in 0..max_iters {
            w = w.add(&cur);
            cur = cur.op_ln().antiderivative_theta()?.neg();
            if cur.is_zero() {
                break;
            }
        }
        let residual = w.d_theta().add(&w.op_ln()).sub(rhs);
        if !residual.is_zero() {
            // exact coefficients give an exactly zero residual; floats may
            // leave cancellation dust, which is tolerated below 1e-9
            let worst = residual
                .terms
                .values()
                .map(|c| c.to_f64().abs())
                .fold(0.0, f64::max);
            if worst > 1e-9 {
                return Err(AlgebraError::VerificationFailure(format!("{worst:e}")));
            }
        }
        Ok(w)
    }

    /// Drop terms with |coefficient| below `eps` (numerical cleanup; a no-op
    /// on exact coefficients with `eps = 0`).
    pub fn chop(&self, eps: f64) -> Self {
        LaurentFourierPoly {
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.to_f64().abs() > eps)
                .map(|(t, c)| (*t, c.clone()))
                .collect(),
        }
    }

    /// Numerical evaluation at `(r, theta, R, Theta)`.
    pub fn eval(&self, r: f64, theta: f64, big_r: f64, theta_cap: f64) -> f64 {
        let mut acc = 0.0;
        for (t, c) in &self.terms {
            let trig = match t.phase {
                Phase::Cos => (t.harmonic as f64 * theta).cos(),
                Phase::Sin => (t.harmonic as f64 * theta).sin(),
            };
            acc += c.to_f64()
                * r.powi(t.r_pow)
                * big_r.powi(t.big_r_pow as i32)
                * theta_cap.powi(t.theta_cap_pow as i32)
                * trig;
        }
        acc
    }

    /// Canonical human-readable serialization: terms in lexicographic key
    /// order, one per line.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        for (t, c) in &self.terms {
            s.push_str(&format!("{:+.17e}  {}\n", c.to_f64(), t));
        }
        s
    }
}

enum HalfSign {
    Plus,
    Minus,
}

/// Product-to-sum for a pair of harmonics; each entry is a half-weight
/// contribution `(m, phase, +-1/2)`.
fn trig_product(
    m1: u32,
    p1: Phase,
    m2: u32,
    p2: Phase,
) -> impl Iterator<Item = (u32, Phase, HalfSign)> {
    let mut parts: Vec<(u32, Phase, HalfSign)> = Vec::with_capacity(2);
    let sum = m1 + m2;
    let diff = m1 as i64 - m2 as i64;
    match (p1, p2) {
        (Phase::Cos, Phase::Cos) => {
            parts.push((diff.unsigned_abs() as u32, Phase::Cos, HalfSign::Plus));
            parts.push((sum, Phase::Cos, HalfSign::Plus));
        }
        (Phase::Sin, Phase::Sin) => {
            parts.push((diff.unsigned_abs() as u32, Phase::Cos, HalfSign::Plus));
            parts.push((sum, Phase::Cos, HalfSign::Minus));
        }
        // sin(a)cos(b) = (sin(a+b) + sin(a-b))/2, with sin odd
        (Phase::Sin, Phase::Cos) | (Phase::Cos, Phase::Sin) => {
            let d = if p1 == Phase::Sin { diff } else { -diff };
            if sum > 0 {
                parts.push((sum, Phase::Sin, HalfSign::Plus));
            }
            match d.cmp(&0) {
                std::cmp::Ordering::Greater => {
                    parts.push((d as u32, Phase::Sin, HalfSign::Plus))
                }
                std::cmp::Ordering::Less => {
                    parts.push(((-d) as u32, Phase::Sin, HalfSign::Minus))
                }
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    parts
        .into_iter()
        .filter(|(m, phase, _)| !(*m == 0 && *phase == Phase::Sin))
}

/// Dense polynomial of total degree <= 4 in the Cartesian phase variables
/// `(z1, z2, z3, z4)` (or `(x1, x2, y1, y2)` before the linear change).
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianPoly4<C: Coeff = f64> {
    terms: BTreeMap<[u8; 4], C>,
}

impl<C: Coeff> Default for CartesianPoly4<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> CartesianPoly4<C> {
    pub fn zero() -> Self {
        CartesianPoly4 { terms: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn from_terms(
        terms: impl IntoIterator<Item = ([u8; 4], C)>,
    ) -> Result<Self, AlgebraError> {
        let mut p = Self::zero();
        for (exps, c) in terms {
            let deg = exps.iter().map(|&e| e as usize).sum::<usize>();
            if deg > 4 {
                return Err(AlgebraError::DegreeOverflow(deg));
            }
            if !c.is_zero() {
                let entry = p.terms.entry(exps).or_insert_with(C::zero);
                *entry = entry.clone() + c;
                if entry.is_zero() {
                    p.terms.remove(&exps);
                }
            }
        }
        Ok(p)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8; 4], &C)> {
        self.terms.iter()
    }

    pub fn eval(&self, z: [f64; 4]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c.to_f64()
                    * z.iter()
                        .zip(e.iter())
                        .map(|(zi, &ei)| zi.powi(ei as i32))
                        .product::<f64>()
            })
            .sum()
    }

    /// Substitute `x = P z` followed by the symplectic polar map
    /// `z1 = r cos(theta)`, `z2 = r sin(theta)`,
    /// `z3 = R cos(theta) - (Theta/r) sin(theta)`,
    /// `z4 = R sin(theta) + (Theta/r) cos(theta)`,
    /// expanded to the canonical Fourier basis.
    pub fn to_polar(&self, p_matrix: &[[C; 4]; 4]) -> Result<LaurentFourierPoly<C>, AlgebraError> {
        let zpol: [LaurentFourierPoly<C>; 4] = [
            LaurentFourierPoly::monomial(C::one(), Term::new(1, 0, 0, 1, Phase::Cos)),
            LaurentFourierPoly::monomial(C::one(), Term::new(1, 0, 0, 1, Phase::Sin)),
            LaurentFourierPoly::monomial(C::one(), Term::new(0, 1, 0, 1, Phase::Cos)).add(
                &LaurentFourierPoly::monomial(-C::one(), Term::new(-1, 0, 1, 1, Phase::Sin)),
            ),
            LaurentFourierPoly::monomial(C::one(), Term::new(0, 1, 0, 1, Phase::Sin)).add(
                &LaurentFourierPoly::monomial(C::one(), Term::new(-1, 0, 1, 1, Phase::Cos)),
            ),
        ];
        let mut xs: Vec<LaurentFourierPoly<C>> = Vec::with_capacity(4);
        for row in p_matrix {
            let mut acc = LaurentFourierPoly::zero();
            for (col, entry) in row.iter().enumerate() {
                if !entry.is_zero() {
                    acc = acc.add(&zpol[col].scale(entry));
                }
            }
            xs.push(acc);
        }
        let mut out = LaurentFourierPoly::zero();
        for (exps, c) in &self.terms {
            let mut t = LaurentFourierPoly::constant(c.clone());
            for (var, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    t = t.mul(&xs[var])?;
                }
            }
            out = out.add(&t);
        }
        Ok(out)
    }
}

/// Identity change of basis, convenient for tests.
pub fn identity_matrix<C: Coeff>() -> [[C; 4]; 4] {
    let mut m: [[C; 4]; 4] = [
        [C::zero(), C::zero(), C::zero(), C::zero()],
        [C::zero(), C::zero(), C::zero(), C::zero()],
        [C::zero(), C::zero(), C::zero(), C::zero()],
        [C::zero(), C::zero(), C::zero(), C::zero()],
    ];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::one();
    }
    m
}

/// Finite-difference evaluation of the Poisson bracket, used as an oracle
/// against the symbolic bracket.
pub fn bracket_fd(
    f: &LaurentFourierPoly<f64>,
    g: &LaurentFourierPoly<f64>,
    at: (f64, f64, f64, f64),
    h: f64,
) -> f64 {
    let (r, th, big_r, cap) = at;
    let d = |p: &LaurentFourierPoly<f64>, var: usize| -> f64 {
        let mut lo = [r, th, big_r, cap];
        let mut hi = lo;
        lo[var] -= h;
        hi[var] += h;
        (p.eval(hi[0], hi[1], hi[2], hi[3]) - p.eval(lo[0], lo[1], lo[2], lo[3])) / (2.0 * h)
    };
    d(f, 0) * d(g, 2) - d(f, 2) * d(g, 0) + d(f, 1) * d(g, 3) - d(f, 3) * d(g, 1)
}

impl<C: Coeff> fmt::Display for LaurentFourierPoly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (t, c) in &self.terms {
            write!(f, "{:+.6} {t}  ", c.to_f64())?;
        }
        Ok(())
    }
}
