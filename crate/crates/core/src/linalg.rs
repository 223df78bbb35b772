//! Fixed-size complex linear algebra for one- and two-qubit states.
//!
//! Everything here is a plain value type. Gates are stored as 2×2 matrices;
//! the `e^{iφ}·[[a, b], [−b*, a*]]` form is only a constructor.
//! Two-qubit vectors use the basis order |00⟩, |01⟩, |10⟩, |11⟩ where the
//! first index is side A of a pair.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QentError, Result};

pub type ComplexScalar = Complex64;

/// Tolerance for algebraic identities (unitarity, completeness, hermiticity).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance for accumulated state norms and traces.
pub const NORM_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn all_finite(values: &[Complex64]) -> bool {
    values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Compare two vectors modulo a global phase.
///
/// The phase is chosen to maximise overlap, then the largest entrywise
/// deviation is compared against `tol`.
pub fn equal_up_to_phase(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    max_phase_aligned_deviation(a, b) <= tol
}

pub fn max_phase_aligned_deviation(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let overlap: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        ONE
    };
    a.iter()
        .zip(b)
        .map(|(x, y)| (x * phase - y).norm())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Single-qubit state
// ---------------------------------------------------------------------------

/// Single-qubit pure state α|0⟩ + β|1⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudePair {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl AmplitudePair {
    pub const ZERO: AmplitudePair = AmplitudePair {
        alpha: ONE,
        beta: ZERO,
    };
    pub const ONE: AmplitudePair = AmplitudePair {
        alpha: ZERO,
        beta: ONE,
    };

    /// Validated constructor: finite, unit norm within `NORM_TOL`.
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let pair = Self { alpha, beta };
        if !all_finite(&[alpha, beta]) {
            return Err(QentError::validation("amplitudes must be finite"));
        }
        let defect = (pair.norm_sqr() - 1.0).abs();
        if defect > NORM_TOL {
            return Err(QentError::validation(format!(
                "amplitude pair not normalized: |alpha|^2 + |beta|^2 deviates from 1 by {defect:e}"
            )));
        }
        Ok(pair)
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn normalized(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if !n.is_finite() || n <= NORM_TOL {
            return Err(QentError::validation(format!(
                "cannot normalize vector of norm {n:e}"
            )));
        }
        Ok(Self {
            alpha: alpha / n,
            beta: beta / n,
        })
    }

    pub fn basis(bit: u8) -> Self {
        if bit == 0 {
            Self::ZERO
        } else {
            Self::ONE
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.alpha.norm_sqr() + self.beta.norm_sqr()
    }

    /// Probability of reading 0 in the computational basis.
    pub fn prob_zero(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    pub fn as_array(&self) -> [Complex64; 2] {
        [self.alpha, self.beta]
    }

    pub fn equal_up_to_phase(&self, other: &AmplitudePair, tol: f64) -> bool {
        equal_up_to_phase(&self.as_array(), &other.as_array(), tol)
    }
}

// ---------------------------------------------------------------------------
// 2×2 matrices
// ---------------------------------------------------------------------------

/// General 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix2 {
    pub m: [[Complex64; 2]; 2],
}

impl Matrix2 {
    pub const fn new(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Self {
            m: [[m00, m01], [m10, m11]],
        }
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub fn real(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Self::new(c(m00, 0.0), c(m01, 0.0), c(m10, 0.0), c(m11, 0.0))
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]
    }

    pub fn from_entries(e: [Complex64; 4]) -> Self {
        Self::new(e[0], e[1], e[2], e[3])
    }

    pub fn adjoint(&self) -> Self {
        Self::new(
            self.m[0][0].conj(),
            self.m[1][0].conj(),
            self.m[0][1].conj(),
            self.m[1][1].conj(),
        )
    }

    pub fn add(&self, other: &Matrix2) -> Self {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] += other.m[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for z in row.iter_mut() {
                *z *= s;
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn max_abs_diff(&self, other: &Matrix2) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of |M·M† − I|.
    pub fn unitarity_defect(&self) -> f64 {
        (*self * self.adjoint()).max_abs_diff(&Matrix2::identity())
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;
    fn mul(self, rhs: Matrix2) -> Matrix2 {
        let mut out = Matrix2::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = self.m[i][0] * rhs.m[0][j] + self.m[i][1] * rhs.m[1][j];
            }
        }
        out
    }
}

/// A unitary 2×2 matrix: a single-qubit gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate(Matrix2);

impl Gate {
    /// Wraps `m` after checking M·M† = I within `ALGEBRA_TOL`.
    pub fn new(m: Matrix2) -> Result<Self> {
        if !all_finite(&m.entries()) {
            return Err(QentError::validation("gate entries must be finite"));
        }
        let defect = m.unitarity_defect();
        if defect > ALGEBRA_TOL {
            return Err(QentError::validation(format!(
                "matrix is not unitary: |M M^dagger - I| = {defect:e}"
            )));
        }
        Ok(Self(m))
    }

    /// `e^{iφ}·[[a, b], [−b*, a*]]` with |a|² + |b|² = 1.
    pub fn from_phase_form(phi: f64, a: Complex64, b: Complex64) -> Result<Self> {
        let norm = a.norm_sqr() + b.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QentError::validation(format!(
                "|a|^2 + |b|^2 = {norm} deviates from 1 by {:e}",
                (norm - 1.0).abs()
            )));
        }
        let phase = Complex64::from_polar(1.0, phi);
        Gate::new(Matrix2::new(a, b, -b.conj(), a.conj()).scale(phase))
    }

    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self(Matrix2::real(h, h, h, -h))
    }

    pub fn pauli_x() -> Self {
        Self(Matrix2::real(0.0, 1.0, 1.0, 0.0))
    }

    pub fn pauli_y() -> Self {
        Self(Matrix2::new(ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO))
    }

    pub fn pauli_z() -> Self {
        Self(Matrix2::real(1.0, 0.0, 0.0, -1.0))
    }

    /// Real rotation `[[cos θ, −sin θ], [sin θ, cos θ]]`; takes |0⟩ to (cos θ, sin θ).
    pub fn ry(theta: f64) -> Self {
        let (s, co) = theta.sin_cos();
        Self(Matrix2::real(co, -s, s, co))
    }

    /// `[[cos θ, −i sin θ], [−i sin θ, cos θ]]`.
    pub fn rx(theta: f64) -> Self {
        let (s, co) = theta.sin_cos();
        Self(Matrix2::new(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)))
    }

    pub fn matrix(&self) -> &Matrix2 {
        &self.0
    }

    /// Conjugate transpose.
    pub fn inverse(&self) -> Gate {
        Gate(self.0.adjoint())
    }

    pub fn then(&self, next: &Gate) -> Gate {
        Gate(next.0 * self.0)
    }

    pub fn apply(&self, q: &AmplitudePair) -> AmplitudePair {
        let [alpha, beta] = self.0.apply(q.as_array());
        AmplitudePair { alpha, beta }
    }

    pub fn entries(&self) -> [Complex64; 4] {
        self.0.entries()
    }
}

impl Mul for Gate {
    type Output = Gate;
    fn mul(self, rhs: Gate) -> Gate {
        Gate(self.0 * rhs.0)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.entries();
        write!(f, "[[{}, {}], [{}, {}]]", e[0], e[1], e[2], e[3])
    }
}

/// Validating inverse of an arbitrary matrix assumed to be a gate.
pub fn inverse(m: &Matrix2) -> Result<Gate> {
    Ok(Gate::new(*m)?.inverse())
}

// ---------------------------------------------------------------------------
// Two-qubit layer (the synchronous oracle)
// ---------------------------------------------------------------------------

/// 4×4 complex matrix, row-major, basis |00⟩, |01⟩, |10⟩, |11⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix4 {
    pub m: [[Complex64; 4]; 4],
}

impl Matrix4 {
    pub fn identity() -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = ONE;
        }
        Self { m }
    }

    pub fn adjoint(&self) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, z) in row.iter_mut().enumerate() {
                *z = self.m[j][i].conj();
            }
        }
        Self { m }
    }

    pub fn max_abs_diff(&self, other: &Matrix4) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        worst
    }

    pub fn unitarity_defect(&self) -> f64 {
        (*self * self.adjoint()).max_abs_diff(&Matrix4::identity())
    }
}

impl Mul for Matrix4 {
    type Output = Matrix4;
    fn mul(self, rhs: Matrix4) -> Matrix4 {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, z) in row.iter_mut().enumerate() {
                *z = (0..4).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        Matrix4 { m }
    }
}

/// I ⊗ G: `g` acts on the second qubit (side B).
pub fn tensor_left(g: &Gate) -> Matrix4 {
    kron(&Matrix2::identity(), g.matrix())
}

/// G ⊗ I: `g` acts on the first qubit (side A).
pub fn tensor_right(g: &Gate) -> Matrix4 {
    kron(g.matrix(), &Matrix2::identity())
}

fn kron(a: &Matrix2, b: &Matrix2) -> Matrix4 {
    let mut m = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m[2 * i + k][2 * j + l] = a.m[i][j] * b.m[k][l];
                }
            }
        }
    }
    Matrix4 { m }
}

/// Two-qubit pure state with coefficients of |00⟩, |01⟩, |10⟩, |11⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector4 {
    pub a: [Complex64; 4],
}

impl StateVector4 {
    pub fn new(a: [Complex64; 4]) -> Result<Self> {
        if !all_finite(&a) {
            return Err(QentError::validation("state vector entries must be finite"));
        }
        let s = Self { a };
        let defect = (s.norm_sqr() - 1.0).abs();
        if defect > NORM_TOL {
            return Err(QentError::validation(format!(
                "state vector not normalized (defect {defect:e})"
            )));
        }
        Ok(s)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Conditional state of side B after side A reads `outcome`, or `None`
    /// when that outcome has zero probability.
    pub fn condition_on_first(&self, outcome: u8) -> Option<AmplitudePair> {
        let base = 2 * usize::from(outcome & 1);
        AmplitudePair::normalized(self.a[base], self.a[base + 1]).ok()
    }

    /// Conditional state of side A after side B reads `outcome`.
    pub fn condition_on_second(&self, outcome: u8) -> Option<AmplitudePair> {
        let q = usize::from(outcome & 1);
        AmplitudePair::normalized(self.a[q], self.a[2 + q]).ok()
    }

    /// Probability that side A reads 0.
    pub fn first_prob_zero(&self) -> f64 {
        self.a[0].norm_sqr() + self.a[1].norm_sqr()
    }
}

/// Matrix-vector product. The result is not renormalized.
pub fn apply4(m: &Matrix4, s: &StateVector4) -> StateVector4 {
    let mut out = [ZERO; 4];
    for (i, z) in out.iter_mut().enumerate() {
        *z = (0..4).map(|k| m.m[i][k] * s.a[k]).sum();
    }
    StateVector4 { a: out }
}

// ---------------------------------------------------------------------------
// Density matrices and the amplitude-damping channel
// ---------------------------------------------------------------------------

/// Single-qubit density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2(Matrix2);

impl DensityMatrix2 {
    pub fn new(m: Matrix2) -> Result<Self> {
        if !all_finite(&m.entries()) {
            return Err(QentError::validation("density matrix entries must be finite"));
        }
        let herm = m.max_abs_diff(&m.adjoint());
        if herm > ALGEBRA_TOL {
            return Err(QentError::validation(format!(
                "density matrix not Hermitian (defect {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(QentError::validation(format!("density matrix trace {tr} != 1")));
        }
        let rho = Self(m);
        let (lo, _) = rho.eigenvalues();
        if lo < -NORM_TOL {
            return Err(QentError::validation(format!(
                "density matrix has negative eigenvalue {lo:e}"
            )));
        }
        Ok(rho)
    }

    /// |ψ⟩⟨ψ|.
    pub fn from_pure(q: &AmplitudePair) -> Self {
        let v = q.as_array();
        let mut m = Matrix2::zero();
        for i in 0..2 {
            for j in 0..2 {
                m.m[i][j] = v[i] * v[j].conj();
            }
        }
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix2 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Eigenvalues of the Hermitian matrix, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let a = self.0.m[0][0].re;
        let d = self.0.m[1][1].re;
        let off = self.0.m[0][1].norm();
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + off * off).sqrt();
        (mean - r, mean + r)
    }
}

/// Kraus operators of the amplitude-damping channel with damping `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrausPair {
    pub e0: Matrix2,
    pub e1: Matrix2,
    pub eta: f64,
}

impl KrausPair {
    /// Largest entry of |E0†E0 + E1†E1 − I|.
    pub fn completeness_defect(&self) -> f64 {
        (self.e0.adjoint() * self.e0)
            .add(&(self.e1.adjoint() * self.e1))
            .max_abs_diff(&Matrix2::identity())
    }
}

/// E0 = diag(1, √(1−η)), E1 = √η·|0⟩⟨1|.
pub fn make_amplitude_damping_kraus(eta: f64) -> Result<KrausPair> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(QentError::validation(format!(
            "damping factor eta = {eta} outside [0, 1]"
        )));
    }
    Ok(KrausPair {
        e0: Matrix2::real(1.0, 0.0, 0.0, (1.0 - eta).sqrt()),
        e1: Matrix2::real(0.0, eta.sqrt(), 0.0, 0.0),
        eta,
    })
}

/// E0·ρ·E0† + E1·ρ·E1†.
pub fn apply_operator_sum(rho: &DensityMatrix2, k: &KrausPair) -> Result<DensityMatrix2> {
    let defect = k.completeness_defect();
    if defect > ALGEBRA_TOL {
        return Err(QentError::validation(format!(
            "Kraus operators incomplete: |E0'E0 + E1'E1 - I| = {defect:e}"
        )));
    }
    let r = rho.matrix();
    let out = (k.e0 * *r * k.e0.adjoint()).add(&(k.e1 * *r * k.e1.adjoint()));
    DensityMatrix2::new(out)
}

// Serde helpers shared by the wire schema: a complex number is `[re, im]`.

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireComplex(pub [f64; 2]);

impl From<Complex64> for WireComplex {
    fn from(z: Complex64) -> Self {
        WireComplex([z.re, z.im])
    }
}

impl From<WireComplex> for Complex64 {
    fn from(w: WireComplex) -> Self {
        c(w.0[0], w.0[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_6, PI};

    fn random_gate(rng: &mut RandomSource) -> Gate {
        let phi = rng.next_f64() * 2.0 * PI;
        let a = c(rng.next_f64() - 0.5, rng.next_f64() - 0.5);
        let b = c(rng.next_f64() - 0.5, rng.next_f64() - 0.5);
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        Gate::from_phase_form(phi, a / n, b / n).unwrap()
    }

    fn bell_phi_plus() -> StateVector4 {
        let h = FRAC_1_SQRT_2;
        StateVector4::new([c(h, 0.0), ZERO, ZERO, c(h, 0.0)]).unwrap()
    }

    #[test]
    fn phase_form_identity() {
        let g = Gate::from_phase_form(0.0, ONE, ZERO).unwrap();
        assert!(g.matrix().max_abs_diff(&Matrix2::identity()) < ALGEBRA_TOL);
    }

    #[test]
    fn phase_form_hadamard() {
        let h = FRAC_1_SQRT_2;
        let g = Gate::from_phase_form(FRAC_PI_2, c(0.0, -h), c(0.0, -h)).unwrap();
        assert!(g.matrix().max_abs_diff(Gate::hadamard().matrix()) < ALGEBRA_TOL);
    }

    #[test]
    fn phase_form_sigma_x() {
        let g = Gate::from_phase_form(FRAC_PI_2, ZERO, c(0.0, -1.0)).unwrap();
        assert!(g.matrix().max_abs_diff(Gate::pauli_x().matrix()) < ALGEBRA_TOL);
    }

    #[test]
    fn phase_form_rejects_unnormalized() {
        let err = Gate::from_phase_form(0.0, c(1.0, 0.0), c(0.5, 0.0)).unwrap_err();
        assert!(matches!(err, QentError::Validation(ref m) if m.contains("deviates")));
    }

    #[test]
    fn non_unitary_rejected() {
        assert!(Gate::new(Matrix2::real(1.0, 1.0, 0.0, 1.0)).is_err());
        assert!(inverse(&Matrix2::real(2.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn tensor_left_identity_and_block_structure() {
        assert!(tensor_left(&Gate::identity()).max_abs_diff(&Matrix4::identity()) < ALGEBRA_TOL);
        let m = tensor_left(&Gate::pauli_x());
        let mut expected = Matrix4 { m: [[ZERO; 4]; 4] };
        expected.m[0][1] = ONE;
        expected.m[1][0] = ONE;
        expected.m[2][3] = ONE;
        expected.m[3][2] = ONE;
        assert!(m.max_abs_diff(&expected) < ALGEBRA_TOL);
    }

    #[test]
    fn tensor_left_reproduces_linear_extension_coefficients() {
        let mut rng = RandomSource::new(3);
        for _ in 0..50 {
            let phi = rng.next_f64() * 2.0 * PI;
            let (a, b) = {
                let a = c(rng.next_f64() - 0.5, rng.next_f64() - 0.5);
                let b = c(rng.next_f64() - 0.5, rng.next_f64() - 0.5);
                let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
                (a / n, b / n)
            };
            let g = Gate::from_phase_form(phi, a, b).unwrap();
            let raw: Vec<Complex64> = (0..4)
                .map(|_| c(rng.next_f64() - 0.5, rng.next_f64() - 0.5))
                .collect();
            let n = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let s = StateVector4::new([raw[0] / n, raw[1] / n, raw[2] / n, raw[3] / n]).unwrap();
            let [al, be, ga, de] = s.a;
            let ph = Complex64::from_polar(1.0, phi);
            let expected = [
                ph * (al * a + be * b),
                ph * (al * -b.conj() + be * a.conj()),
                ph * (ga * a + de * b),
                ph * (ga * -b.conj() + de * a.conj()),
            ];
            let out = apply4(&tensor_left(&g), &s);
            for i in 0..4 {
                assert!((out.a[i] - expected[i]).norm() < ALGEBRA_TOL);
            }
        }
    }

    #[test]
    fn tensor_right_sigma_x_on_bell() {
        let out = apply4(&tensor_right(&Gate::pauli_x()), &bell_phi_plus());
        let h = FRAC_1_SQRT_2;
        let expected = [ZERO, c(h, 0.0), c(h, 0.0), ZERO];
        for i in 0..4 {
            assert!((out.a[i] - expected[i]).norm() < ALGEBRA_TOL);
        }
        assert!(tensor_right(&Gate::identity()).max_abs_diff(&Matrix4::identity()) < ALGEBRA_TOL);
    }

    #[test]
    fn apply4_examples() {
        let s = bell_phi_plus();
        assert_eq!(apply4(&Matrix4::identity(), &s), s);

        let out = apply4(&tensor_left(&Gate::pauli_x()), &s);
        let h = FRAC_1_SQRT_2;
        assert!((out.a[1] - c(h, 0.0)).norm() < ALGEBRA_TOL);
        assert!((out.a[2] - c(h, 0.0)).norm() < ALGEBRA_TOL);
        assert!(out.a[0].norm() < ALGEBRA_TOL && out.a[3].norm() < ALGEBRA_TOL);

        // By hand: block 1 = Ry·(h, 0) = h(cos, sin); block 2 = Ry·(0, h) = h(−sin, cos).
        let out = apply4(&tensor_left(&Gate::ry(FRAC_PI_6)), &s);
        let (sn, cs) = FRAC_PI_6.sin_cos();
        let expected = [cs * h, sn * h, -sn * h, cs * h];
        for i in 0..4 {
            assert!((out.a[i] - c(expected[i], 0.0)).norm() < ALGEBRA_TOL);
        }
    }

    #[test]
    fn inverse_examples() {
        let h = Gate::hadamard();
        assert!(h.inverse().matrix().max_abs_diff(h.matrix()) < ALGEBRA_TOL);
        let x = Gate::pauli_x();
        assert!(x.inverse().matrix().max_abs_diff(x.matrix()) < ALGEBRA_TOL);
        let t = 0.7;
        assert!(Gate::ry(t).inverse().matrix().max_abs_diff(Gate::ry(-t).matrix()) < ALGEBRA_TOL);
    }

    #[test]
    fn inverse_law_random_gates() {
        let mut rng = RandomSource::new(11);
        for _ in 0..1000 {
            let g = random_gate(&mut rng);
            let inv = g.inverse();
            assert!((g * inv).matrix().max_abs_diff(&Matrix2::identity()) < ALGEBRA_TOL);
            assert!((inv * g).matrix().max_abs_diff(&Matrix2::identity()) < ALGEBRA_TOL);
        }
    }

    #[test]
    fn commutation_of_opposite_sides() {
        let mut rng = RandomSource::new(12);
        for _ in 0..200 {
            let a = random_gate(&mut rng);
            let b = random_gate(&mut rng);
            let lhs = tensor_right(&a) * tensor_left(&b);
            let rhs = tensor_left(&b) * tensor_right(&a);
            assert!(lhs.max_abs_diff(&rhs) < ALGEBRA_TOL);
            assert!(lhs.unitarity_defect() < ALGEBRA_TOL);
        }
    }

    #[test]
    fn kraus_examples() {
        let k0 = make_amplitude_damping_kraus(0.0).unwrap();
        assert_eq!(k0.e0, Matrix2::identity());
        assert_eq!(k0.e1, Matrix2::zero());
        let k1 = make_amplitude_damping_kraus(1.0).unwrap();
        assert_eq!(k1.e0, Matrix2::real(1.0, 0.0, 0.0, 0.0));
        assert_eq!(k1.e1, Matrix2::real(0.0, 1.0, 0.0, 0.0));
        for eta in [0.25, 0.5, 0.9] {
            assert!(make_amplitude_damping_kraus(eta).unwrap().completeness_defect() < ALGEBRA_TOL);
        }
        assert!(make_amplitude_damping_kraus(-0.1).is_err());
        assert!(make_amplitude_damping_kraus(1.5).is_err());
    }

    #[test]
    fn operator_sum_examples() {
        let plus = AmplitudePair::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)).unwrap();
        let rho = DensityMatrix2::from_pure(&plus);
        let same = apply_operator_sum(&rho, &make_amplitude_damping_kraus(0.0).unwrap()).unwrap();
        assert!(same.matrix().max_abs_diff(rho.matrix()) < ALGEBRA_TOL);

        let one = DensityMatrix2::from_pure(&AmplitudePair::ONE);
        let decayed = apply_operator_sum(&one, &make_amplitude_damping_kraus(1.0).unwrap()).unwrap();
        assert!(decayed.matrix().max_abs_diff(&Matrix2::real(1.0, 0.0, 0.0, 0.0)) < ALGEBRA_TOL);

        // By hand: E0ρE0† = ½[[1, √½], [√½, ½]], E1ρE1† = ½[[½, 0], [0, 0]].
        let half = apply_operator_sum(&rho, &make_amplitude_damping_kraus(0.5).unwrap()).unwrap();
        let s = 0.5f64.sqrt() / 2.0;
        assert!(half.matrix().max_abs_diff(&Matrix2::real(0.75, s, s, 0.25)) < ALGEBRA_TOL);
    }

    #[test]
    fn operator_sum_rejects_incomplete_kraus() {
        let rho = DensityMatrix2::from_pure(&AmplitudePair::ZERO);
        let mut k = make_amplitude_damping_kraus(0.3).unwrap();
        k.e1 = Matrix2::real(0.0, 1.0, 0.0, 0.0);
        assert!(apply_operator_sum(&rho, &k).is_err());
    }

    #[test]
    fn operator_sum_preserves_trace_for_random_inputs() {
        let mut rng = RandomSource::new(5);
        for _ in 0..500 {
            let q = AmplitudePair::normalized(
                c(rng.next_f64() - 0.5, rng.next_f64() - 0.5),
                c(rng.next_f64() - 0.5, rng.next_f64() - 0.5),
            )
            .unwrap();
            let p = rng.next_f64();
            let mixed = DensityMatrix2::new(
                DensityMatrix2::from_pure(&q)
                    .matrix()
                    .scale(c(p, 0.0))
                    .add(&Matrix2::real(0.5 * (1.0 - p), 0.0, 0.0, 0.5 * (1.0 - p))),
            )
            .unwrap();
            let k = make_amplitude_damping_kraus(rng.next_f64()).unwrap();
            let out = apply_operator_sum(&mixed, &k).unwrap();
            assert!((out.trace() - 1.0).abs() < NORM_TOL);
        }
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix2::new(Matrix2::real(0.5, 0.0, 0.0, 0.4)).is_err());
        assert!(DensityMatrix2::new(Matrix2::real(1.5, 0.0, 0.0, -0.5)).is_err());
        assert!(DensityMatrix2::new(Matrix2::new(ONE, c(0.0, 0.1), c(0.0, 0.1), ZERO)).is_err());
    }

    #[test]
    fn phase_comparison() {
        let a = [c(0.6, 0.0), c(0.0, 0.8)];
        let i = c(0.0, 1.0);
        let b = [a[0] * i, a[1] * i];
        assert!(equal_up_to_phase(&a, &b, 1e-12));
        assert!(!equal_up_to_phase(&a, &[c(0.6, 0.0), c(0.0, -0.8)], 1e-3));
    }
}
