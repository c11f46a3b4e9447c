//! Dense complex small-matrix algebra and the superoperators the filtering
//! equations are written in.
//!
//! Every matrix in this crate has dimension at most [`MAX_DIM`], so operators
//! live inline on the stack and are `Copy`. Entries are stored row-major.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported Hilbert-space dimension.
pub const MAX_DIM: usize = 4;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance used when a constructor is asked to certify hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A square complex matrix of dimension `dim <= MAX_DIM`.
#[derive(Clone, Copy, PartialEq)]
pub struct Operator {
    dim: usize,
    data: [Complex64; MAX_DIM * MAX_DIM],
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator({}x{})[", self.dim, self.dim)?;
        for i in 0..self.dim {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.dim {
                if j > 0 {
                    write!(f, ", ")?;
                }
                let z = self.get(i, j);
                write!(f, "{}{:+}i", z.re, z.im)?;
            }
        }
        write!(f, "]")
    }
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "operator dimension {dim} out of range 1..={MAX_DIM}");
        Operator {
            dim,
            data: [ZERO; MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.set(i, i, ONE);
        }
        op
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut op = Self::zeros(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            op.set(i, i, Complex64::new(v, 0.0));
        }
        op
    }

    /// Builds an operator from row slices. Fails unless the rows form a square
    /// matrix of supported dimension.
    pub fn from_rows(rows: &[&[Complex64]]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidOperator(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        let mut op = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidOperator(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                op.set(i, j, v);
            }
        }
        Ok(op)
    }

    /// Like [`Operator::from_rows`] but additionally certifies
    /// `max|A - A†| <= 1e-12`.
    pub fn hermitian_from_rows(rows: &[&[Complex64]]) -> Result<Self> {
        let op = Self::from_rows(rows)?;
        let dev = op.hermiticity_defect();
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidOperator(format!(
                "operator is not Hermitian (max |A - A†| = {dev:e})"
            )));
        }
        Ok(op)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * MAX_DIM + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * MAX_DIM + j] = v;
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(i, j, self.get(j, i).conj());
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Hilbert–Schmidt pairing `⟨A, B⟩ = tr(A† B)`.
    pub fn inner(&self, other: &Operator) -> Complex64 {
        self.check_dim(other).expect("inner product dimension mismatch");
        let mut acc = ZERO;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.get(i, j).conj() * other.get(i, j);
            }
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.data[i * MAX_DIM + j] *= s;
            }
        }
        out
    }

    pub fn scale_c(&self, s: Complex64) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.data[i * MAX_DIM + j] *= s;
            }
        }
        out
    }

    /// `[A, B] = AB - BA`
    pub fn commutator(&self, other: &Operator) -> Self {
        *self * *other - *other * *self
    }

    /// `{A, B} = AB + BA`
    pub fn anticommutator(&self, other: &Operator) -> Self {
        *self * *other + *other * *self
    }

    /// Largest elementwise modulus.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max(self.get(i, j).norm());
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        (*self - *other).max_abs()
    }

    /// `max|A - A†|` elementwise.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                m = m.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        m
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            let d = self.get(i, i);
            out.set(i, i, Complex64::new(d.re, 0.0));
            for j in (i + 1)..self.dim {
                let v = (self.get(i, j) + self.get(j, i).conj()) * 0.5;
                out.set(i, j, v);
                out.set(j, i, v.conj());
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| {
            let z = self.get(i, j);
            z.re.is_finite() && z.im.is_finite()
        }))
    }

    pub fn check_dim(&self, other: &Operator) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = self.hermitian_part();
        match self.dim {
            1 => h.get(0, 0).re,
            2 => {
                let a = h.get(0, 0).re;
                let d = h.get(1, 1).re;
                let b = h.get(0, 1).norm();
                0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
            }
            n => {
                let m = nalgebra::DMatrix::from_fn(n, n, |i, j| h.get(i, j));
                let eig = nalgebra::SymmetricEigen::new(m);
                eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(mut self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        for k in 0..MAX_DIM * MAX_DIM {
            self.data[k] += rhs.data[k];
        }
        self
    }
}

impl AddAssign for Operator {
    fn add_assign(&mut self, rhs: Operator) {
        *self = *self + rhs;
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(mut self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        for k in 0..MAX_DIM * MAX_DIM {
            self.data[k] -= rhs.data[k];
        }
        self
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-1.0)
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = Operator::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * MAX_DIM + j] += a * rhs.get(k, j);
                }
            }
        }
        out
    }
}

impl Mul<f64> for Operator {
    type Output = Operator;
    fn mul(self, s: f64) -> Operator {
        self.scale(s)
    }
}

impl Mul<Complex64> for Operator {
    type Output = Operator;
    fn mul(self, s: Complex64) -> Operator {
        self.scale_c(s)
    }
}

/// Pauli matrices and ladder operators for a two-level system in the basis
/// `|↑⟩ = (1, 0)`, `|↓⟩ = (0, 1)`.
pub mod pauli {
    use super::*;

    pub fn sigma_x() -> Operator {
        Operator::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]).unwrap()
    }

    pub fn sigma_y() -> Operator {
        Operator::from_rows(&[&[ZERO, -I], &[I, ZERO]]).unwrap()
    }

    pub fn sigma_z() -> Operator {
        Operator::diag(&[1.0, -1.0])
    }

    /// Lowering operator `|↓⟩⟨↑|`.
    pub fn sigma_minus() -> Operator {
        Operator::from_rows(&[&[ZERO, ZERO], &[ONE, ZERO]]).unwrap()
    }

    /// Raising operator `|↑⟩⟨↓|`.
    pub fn sigma_plus() -> Operator {
        sigma_minus().adjoint()
    }

    /// Projector onto `|↑⟩`.
    pub fn proj_up() -> Operator {
        Operator::diag(&[1.0, 0.0])
    }

    /// Projector onto `|↓⟩`.
    pub fn proj_down() -> Operator {
        Operator::diag(&[0.0, 1.0])
    }
}

/// A density-matrix-like state: Hermitian, positive up to numerical slack and,
/// when `normalized`, of unit trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateMatrix {
    op: Operator,
    normalized: bool,
}

pub const STATE_HERMITIAN_TOL: f64 = 1e-10;
pub const STATE_TRACE_TOL: f64 = 1e-9;
pub const STATE_POSITIVITY_TOL: f64 = 1e-9;

impl StateMatrix {
    /// Validates the state invariants and wraps `op`.
    pub fn new(op: Operator, normalized: bool) -> Result<Self> {
        let dev = op.hermiticity_defect();
        if dev > STATE_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max |ρ - ρ†| = {dev:e})"
            )));
        }
        if normalized {
            let tr = op.trace();
            if (tr - ONE).norm() > STATE_TRACE_TOL {
                return Err(Error::InvalidState(format!("trace {tr} is not 1")));
            }
        }
        let lam = op.min_eigenvalue();
        if lam < -STATE_POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {lam:e}"
            )));
        }
        Ok(StateMatrix { op, normalized })
    }

    /// Wraps an operator produced by a filter step. The caller is responsible
    /// for having symmetrized it and applied its own positivity guard.
    pub(crate) fn from_step(op: Operator, normalized: bool) -> Self {
        StateMatrix { op, normalized }
    }

    /// Pure state `|ψ⟩⟨ψ|` for a normalized vector `ψ`.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let n = psi.len();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("vector norm² {norm} is not 1")));
        }
        let mut op = Operator::zeros(n);
        for i in 0..n {
            for j in 0..n {
                op.set(i, j, psi[i] * psi[j].conj());
            }
        }
        Self::new(op, true)
    }

    /// Maximally mixed state `I / dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        StateMatrix {
            op: Operator::identity(dim).scale(1.0 / dim as f64),
            normalized: true,
        }
    }

    #[inline]
    pub fn op(&self) -> &Operator {
        &self.op
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    #[inline]
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    /// `⟨ρ, X⟩ = tr(ρ X)` for Hermitian `X`; real part only.
    pub fn expect(&self, x: &Operator) -> f64 {
        self.op.inner(x).re
    }

    /// Returns `ρ / tr ρ`.
    pub fn normalize(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::Numeric(format!("cannot normalize state with trace {tr}")));
        }
        Ok(StateMatrix {
            op: self.op.scale(1.0 / tr),
            normalized: true,
        })
    }

    /// Drops the normalization flag (the matrix is unchanged).
    pub fn into_unnormalized(self) -> Self {
        StateMatrix {
            op: self.op,
            normalized: false,
        }
    }
}

impl From<StateMatrix> for Operator {
    fn from(s: StateMatrix) -> Operator {
        s.op
    }
}

/// `𝒟[c]ρ = cρc† − ½(c†cρ + ρc†c)`
pub fn decoherence_apply(c: &Operator, rho: &Operator) -> Result<Operator> {
    c.check_dim(rho)?;
    let cd = c.adjoint();
    let cdc = cd * *c;
    Ok(*c * *rho * cd - (cdc * *rho + *rho * cdc).scale(0.5))
}

/// `𝓗̃[c]ρ = cρ + ρc†`
pub fn h_tilde_apply(c: &Operator, rho: &Operator) -> Result<Operator> {
    c.check_dim(rho)?;
    Ok(*c * *rho + *rho * c.adjoint())
}

/// `𝓗[c]ρ = cρ + ρc† − ρ tr(cρ + ρc†)`, defined for normalized `ρ`.
pub fn h_apply(c: &Operator, rho: &StateMatrix) -> Result<Operator> {
    if (rho.op.trace() - ONE).norm() > STATE_TRACE_TOL {
        return Err(Error::InvalidState(format!(
            "𝓗[c] needs a normalized state, got trace {}",
            rho.op.trace()
        )));
    }
    let ht = h_tilde_apply(c, &rho.op)?;
    let tr = ht.trace();
    Ok(ht - rho.op * tr)
}

#[cfg(test)]
mod tests {
    use super::pauli::*;
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_op(dim: usize, vals: &[f64]) -> Operator {
        let mut op = Operator::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let k = 2 * (i * dim + j);
                op.set(i, j, c(vals[k], vals[k + 1]));
            }
        }
        op
    }

    fn random_hermitian(dim: usize, vals: &[f64]) -> Operator {
        random_op(dim, vals).hermitian_part()
    }

    #[test]
    fn pauli_algebra() {
        let id = Operator::identity(2);
        for s in [sigma_x(), sigma_y(), sigma_z()] {
            assert!((s * s).max_abs_diff(&id) < 1e-15);
        }
        let minus = (sigma_x() - sigma_y() * I).scale(0.5);
        assert_eq!(minus, sigma_minus());
        assert_eq!(sigma_minus().get(1, 0), ONE);
        assert_eq!(sigma_plus() * sigma_minus(), proj_up());
    }

    #[test]
    fn decoherence_of_zero_is_zero() {
        let rho = random_hermitian(3, &[0.3; 18]);
        let out = decoherence_apply(&Operator::zeros(3), &rho).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn decoherence_lowering_on_excited_state() {
        // σ₋|↑⟩⟨↑|σ₊ = |↓⟩⟨↓| and σ₊σ₋ = |↑⟩⟨↑| so the anticommutator gives −|↑⟩⟨↑|.
        let out = decoherence_apply(&sigma_minus(), &proj_up()).unwrap();
        let expected = proj_down() - proj_up();
        assert!(out.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn dimension_mismatch_names_both_dims() {
        let err = decoherence_apply(&Operator::zeros(2), &Operator::zeros(3)).unwrap_err();
        match err {
            Error::DimensionMismatch { left, right } => assert_eq!((left, right), (2, 3)),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(h_tilde_apply(&Operator::zeros(4), &Operator::zeros(2)).is_err());
    }

    #[test]
    fn h_tilde_examples() {
        let rho = Operator::identity(2).scale(0.5);
        assert_eq!(h_tilde_apply(&Operator::zeros(2), &rho).unwrap().max_abs(), 0.0);
        let ks = 0.8;
        let out = h_tilde_apply(&sigma_minus().scale(ks), &rho).unwrap();
        assert!(out.max_abs_diff(&sigma_x().scale(0.5 * ks)) < 1e-15);
    }

    #[test]
    fn h_examples() {
        let rho = StateMatrix::new(
            Operator::from_rows(&[&[c(0.7, 0.0), c(0.1, -0.2)], &[c(0.1, 0.2), c(0.3, 0.0)]])
                .unwrap(),
            true,
        )
        .unwrap();
        let out = h_apply(&Operator::identity(2), &rho).unwrap();
        assert!(out.max_abs() < 1e-15);

        let down = StateMatrix::new(proj_down(), true).unwrap();
        assert_eq!(h_apply(&sigma_minus(), &down).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn h_rejects_unnormalized_input() {
        let s = StateMatrix::new(Operator::diag(&[1.0, 1.0]), false).unwrap();
        assert!(matches!(
            h_apply(&sigma_minus(), &s),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn state_matrix_invariants_enforced() {
        assert!(StateMatrix::new(Operator::diag(&[0.6, 0.6]), true).is_err());
        assert!(StateMatrix::new(Operator::diag(&[1.2, -0.2]), true).is_err());
        assert!(StateMatrix::new(sigma_minus(), false).is_err());
        assert!(StateMatrix::new(Operator::diag(&[0.25, 0.25, 0.5]), true).is_ok());
        let psi = [c(0.6, 0.0), c(0.0, 0.8)];
        let p = StateMatrix::pure(&psi).unwrap();
        assert!((p.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn min_eigenvalue_matches_nalgebra_for_two_by_two() {
        let h = Operator::from_rows(&[&[c(0.2, 0.0), c(0.5, -0.3)], &[c(0.5, 0.3), c(-0.4, 0.0)]])
            .unwrap();
        let m = nalgebra::DMatrix::from_fn(2, 2, |i, j| h.get(i, j));
        let lam = nalgebra::SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!((h.min_eigenvalue() - lam).abs() < 1e-14);
    }

    #[test]
    fn hermitian_constructor_checks() {
        assert!(Operator::hermitian_from_rows(&[&[ONE, I], &[-I, ZERO]]).is_ok());
        assert!(Operator::hermitian_from_rows(&[&[ONE, I], &[I, ZERO]]).is_err());
        assert!(Operator::from_rows(&[&[ONE, ZERO]]).is_err());
    }

    fn vals(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, n)
    }

    proptest! {
        #[test]
        fn decoherence_is_traceless_and_hermiticity_preserving(
            dim in 1usize..=4, a in vals(32), b in vals(32)
        ) {
            let c_op = random_op(dim, &a);
            let rho = random_hermitian(dim, &b);
            let out = decoherence_apply(&c_op, &rho).unwrap();
            prop_assert!(out.trace().norm() < 1e-12);
            prop_assert!(out.hermiticity_defect() < 1e-12);
        }

        #[test]
        fn h_tilde_is_hermitian_and_linear(
            dim in 1usize..=4, a in vals(32), b in vals(32), d in vals(32), alpha in -2.0f64..2.0
        ) {
            let c_op = random_op(dim, &a);
            let r1 = random_hermitian(dim, &b);
            let r2 = random_hermitian(dim, &d);
            let out = h_tilde_apply(&c_op, &r1).unwrap();
            prop_assert!(out.hermiticity_defect() < 1e-12);
            let lhs = h_tilde_apply(&c_op, &(r1.scale(alpha) + r2)).unwrap();
            let rhs = out.scale(alpha) + h_tilde_apply(&c_op, &r2).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            let dl = decoherence_apply(&c_op, &(r1.scale(alpha) + r2)).unwrap();
            let dr = decoherence_apply(&c_op, &r1).unwrap().scale(alpha)
                + decoherence_apply(&c_op, &r2).unwrap();
            prop_assert!(dl.max_abs_diff(&dr) < 1e-12);
        }

        #[test]
        fn h_is_traceless_with_expected_correction(
            dim in 1usize..=4, a in vals(32), b in vals(32)
        ) {
            let c_op = random_op(dim, &a);
            // ρ = B B† / tr(B B†) is a valid normalized state.
            let bm = random_op(dim, &b);
            let raw = bm * bm.adjoint();
            prop_assume!(raw.trace().re > 1e-3);
            let rho = StateMatrix::new(raw.scale(1.0 / raw.trace().re).hermitian_part(), true).unwrap();
            let out = h_apply(&c_op, &rho).unwrap();
            prop_assert!(out.trace().norm() < 1e-12);
            prop_assert!(out.hermiticity_defect() < 1e-12);
            let ht = h_tilde_apply(&c_op, rho.op()).unwrap();
            let correction = ht - out;
            prop_assert!(correction.max_abs_diff(&(*rho.op() * ht.trace())) < 1e-12);
        }
    }
}
