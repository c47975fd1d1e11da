//! Dense complex operator algebra.
//!
//! Operators are stored as dense `nalgebra` matrices whose row index runs over
//! the codomain basis and column index over the domain basis. The double-ket
//! `|A⟩⟩` of an operator `A: H -> K` lives in `K ⊗ H*`; coordinate `(i, j)` is
//! stored at flat index `i * cols + j`, so the coordinates are literally the
//! entries of `A` read row by row. With this layout the operator identity
//!
//! ```text
//! (A ⊗ conj(B)) |C⟩⟩ = |A C B†⟩⟩
//! ```
//!
//! holds with `conj(B)` the entrywise conjugate, and partial traces over the
//! left factor satisfy `tr_K |A⟩⟩⟨⟨B| = conj(A† B)`.

mod eig;
mod subspace;
mod svd;

pub use eig::{dominant_eig, hermitian_eigh, min_eig, top_eigs, EigOptions, EigPair};
pub use subspace::Subspace;
pub use svd::{closest_isometry, svd_sorted, SortedSvd};

use std::ops::{Add, Deref, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{QerError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used when a caller claims a matrix is Hermitian or an isometry.
pub const STRUCTURE_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// A dense complex operator between finite-dimensional Hilbert spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(CMatrix);

impl Operator {
    pub fn new(m: CMatrix) -> Self {
        Operator(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Operator(CMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Operator(CMatrix::identity(n, n))
    }

    /// Builds an operator from row-major entries.
    pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count must equal rows*cols");
        Operator(CMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> Self {
        let v: Vec<C64> = entries.iter().map(|&x| re(x)).collect();
        Self::from_rows(rows, cols, &v)
    }

    pub fn diag(values: &[C64]) -> Self {
        Operator(CMatrix::from_diagonal(&CVector::from_column_slice(values)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Operator(self.0.adjoint())
    }

    pub fn conj(&self) -> Self {
        Operator(self.0.map(|z| z.conj()))
    }

    pub fn transpose(&self) -> Self {
        Operator(self.0.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        Operator(&self.0 * re(s))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Operator(&self.0 * s)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Operator(self.0.kronecker(&other.0))
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Operator((&self.0 + self.0.adjoint()) * re(0.5))
    }

    /// Largest entrywise deviation of `A†A` from the identity.
    pub fn isometry_deviation(&self) -> f64 {
        let g = self.0.adjoint() * &self.0;
        let n = g.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }

    pub fn is_isometry(&self, tol: f64) -> bool {
        self.isometry_deviation() <= tol
    }

    /// Entrywise max distance to another operator of the same shape.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.0.shape(), other.0.shape());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum (induced ∞-norm).
    pub fn inf_norm(&self) -> f64 {
        let mut rows = vec![0.0; self.rows()];
        for col in self.0.column_iter() {
            for (acc, z) in rows.iter_mut().zip(col.iter()) {
                *acc += z.norm();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }
}

impl Deref for Operator {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

impl From<CMatrix> for Operator {
    fn from(m: CMatrix) -> Self {
        Operator(m)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

/// Vectorized operator `|A⟩⟩ ∈ K ⊗ H*`.
#[derive(Clone, Debug, PartialEq)]
pub struct DKet {
    pub dim_left: usize,
    pub dim_right: usize,
    pub coords: CVector,
}

impl DKet {
    pub fn new(dim_left: usize, dim_right: usize, coords: CVector) -> Result<Self> {
        if coords.len() != dim_left * dim_right {
            return Err(QerError::Dimension(format!(
                "double-ket of length {} cannot factor as {}x{}",
                coords.len(),
                dim_left,
                dim_right
            )));
        }
        Ok(DKet { dim_left, dim_right, coords })
    }

    /// `⟨⟨self|other⟩⟩`.
    pub fn inner(&self, other: &DKet) -> C64 {
        self.coords.dotc(&other.coords)
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

pub fn dket(a: &Operator) -> DKet {
    DKet {
        dim_left: a.rows(),
        dim_right: a.cols(),
        coords: flatten_rows(a.matrix()),
    }
}

pub fn undket(v: &DKet) -> Result<Operator> {
    if v.coords.len() != v.dim_left * v.dim_right {
        return Err(QerError::Dimension(format!(
            "double-ket of length {} cannot factor as {}x{}",
            v.coords.len(),
            v.dim_left,
            v.dim_right
        )));
    }
    Ok(Operator(unflatten_rows(&v.coords, v.dim_left, v.dim_right)))
}

/// Row-major flattening: entry `(i, j)` lands at `i * cols + j`.
pub fn flatten_rows(m: &CMatrix) -> CVector {
    let (r, cc) = m.shape();
    CVector::from_fn(r * cc, |k, _| m[(k / cc, k % cc)])
}

pub fn unflatten_rows(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    assert_eq!(v.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| v[i * cols + j])
}

/// Hilbert–Schmidt inner product `tr(A† B)`.
pub fn hs_inner(a: &Operator, b: &Operator) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(QerError::Dimension(format!(
            "hs_inner of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// `(A ⊗ conj(B)) |C⟩⟩ = |A C B†⟩⟩`.
pub fn kron_conj_apply(a: &Operator, b: &Operator, cket: &DKet) -> Result<DKet> {
    let cop = undket(cket)?;
    if a.cols() != cop.rows() || b.cols() != cop.cols() {
        return Err(QerError::Dimension(format!(
            "cannot form A·C·B† with A {:?}, C {:?}, B {:?}",
            a.shape(),
            cop.shape(),
            b.shape()
        )));
    }
    Ok(dket(&Operator(a.matrix() * cop.matrix() * b.matrix().adjoint())))
}

fn check_bipartite(m: &Operator, dim_k: usize, dim_h: usize) -> Result<()> {
    if !m.is_square() || m.rows() != dim_k * dim_h {
        return Err(QerError::Dimension(format!(
            "matrix {:?} does not factor as ({}·{})²",
            m.shape(),
            dim_k,
            dim_h
        )));
    }
    Ok(())
}

/// Partial trace over the left factor of `K ⊗ H*`, leaving an operator on `H*`.
pub fn ptrace_left(m: &Operator, dim_k: usize, dim_h: usize) -> Result<Operator> {
    check_bipartite(m, dim_k, dim_h)?;
    let mut out = CMatrix::zeros(dim_h, dim_h);
    for i in 0..dim_k {
        out += m.view((i * dim_h, i * dim_h), (dim_h, dim_h));
    }
    Ok(Operator(out))
}

/// Partial trace over the right factor of `K ⊗ H*`, leaving an operator on `K`.
pub fn ptrace_right(m: &Operator, dim_k: usize, dim_h: usize) -> Result<Operator> {
    check_bipartite(m, dim_k, dim_h)?;
    let out = CMatrix::from_fn(dim_k, dim_k, |i, ip| {
        (0..dim_h).map(|j| m[(i * dim_h + j, ip * dim_h + j)]).sum()
    });
    Ok(Operator(out))
}

/// `I_left ⊗ Y` as a dense matrix.
pub fn identity_kron(dim_left: usize, y: &CMatrix) -> CMatrix {
    let (r, c) = y.shape();
    let mut out = CMatrix::zeros(dim_left * r, dim_left * c);
    for s in 0..dim_left {
        out.view_mut((s * r, s * c), (r, c)).copy_from(y);
    }
    out
}

/// Validates Hermiticity within [`STRUCTURE_TOL`] and returns the symmetrized matrix.
pub fn symmetrize_checked(m: &CMatrix) -> Result<CMatrix> {
    let op = Operator(m.clone());
    let asym = op.hermitian_asymmetry();
    if asym > STRUCTURE_TOL * (1.0 + op.inf_norm()) {
        return Err(QerError::NotHermitian { asymmetry: asym });
    }
    Ok((m + m.adjoint()) * re(0.5))
}

/// Compresses a matrix on `H_S ⊗ H_C*` onto `H_S ⊗ S*` where `S` has
/// orthonormal basis columns `v`: returns `(I ⊗ Vᵀ) M (I ⊗ conj(V))`.
pub fn compress_second(m: &CMatrix, dim_s: usize, v: &CMatrix) -> CMatrix {
    let lift = identity_kron(dim_s, &v.map(|z| z.conj()));
    lift.adjoint() * m * lift
}

/// Inverse of [`compress_second`] for a matrix on `H_S ⊗ S*`.
pub fn lift_second(m: &CMatrix, dim_s: usize, v: &CMatrix) -> CMatrix {
    let lift = identity_kron(dim_s, &v.map(|z| z.conj()));
    &lift * m * lift.adjoint()
}

/// Lifts an operator on `S*` (in the basis coordinates) to `H_C*` coordinates:
/// `conj(V) Y Vᵀ`.
pub fn lift_dual(y: &CMatrix, v: &CMatrix) -> CMatrix {
    let vb = v.map(|z| z.conj());
    &vb * y * v.transpose()
}

/// Restricts an operator on `H_C*` coordinates to `S*`: `Vᵀ Y conj(V)`.
pub fn compress_dual(y: &CMatrix, v: &CMatrix) -> CMatrix {
    let vb = v.map(|z| z.conj());
    v.transpose() * y * vb
}

/// `(I - Π) C (I - Π)` for `Π = I ⊗ conj(V V†)`, with `V` orthonormal columns.
pub fn project_out_second(cm: &CMatrix, dim_s: usize, v: &CMatrix) -> CMatrix {
    if v.ncols() == 0 {
        return cm.clone();
    }
    let w = identity_kron(dim_s, &v.map(|z| z.conj()));
    // (I - W W†) C (I - W W†) with C Hermitian, so W†C = (CW)†
    let cw = cm * &w; // n × r
    let dw = &cw - &w * w.ad_mul(&cw);
    let mut out = cm - &w * cw.adjoint() - dw * w.adjoint();
    // re-symmetrize to suppress drift
    out = (&out + out.adjoint()) * re(0.5);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_op(rng: &mut ChaCha8Rng, r: usize, cc: usize) -> Operator {
        Operator(CMatrix::from_fn(r, cc, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        }))
    }

    #[test]
    fn dket_identity_layout() {
        let v = dket(&Operator::identity(2));
        let expect = [ONE, ZERO, ZERO, ONE];
        assert_eq!(v.coords.as_slice(), &expect);
    }

    #[test]
    fn undket_rejects_bad_length() {
        let v = DKet {
            dim_left: 2,
            dim_right: 3,
            coords: CVector::zeros(5),
        };
        assert!(undket(&v).is_err());
        assert!(DKet::new(2, 3, CVector::zeros(5)).is_err());
    }

    #[test]
    fn hs_inner_paulis() {
        let i2 = Operator::identity(2);
        assert_eq!(hs_inner(&i2, &i2).unwrap(), re(2.0));
        let x = Operator::from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let z = Operator::from_real_rows(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(hs_inner(&x, &z).unwrap(), ZERO);
        assert!(hs_inner(&x, &Operator::identity(3)).is_err());
    }

    #[test]
    fn hs_inner_is_squared_frobenius() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_op(&mut rng, 3, 4);
            let elementwise: f64 = a.iter().map(|z| z.re * z.re + z.im * z.im).sum();
            let v = hs_inner(&a, &a).unwrap();
            assert!(v.im.abs() < 1e-14);
            assert!((v.re - elementwise).abs() < 1e-12);
        }
    }

    #[test]
    fn kron_conj_apply_identity_and_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cc = random_op(&mut rng, 3, 3);
        let ck = dket(&cc);
        let id = Operator::identity(3);
        let same = kron_conj_apply(&id, &id, &ck).unwrap();
        assert!((same.coords - &ck.coords).norm() < 1e-15);

        // P = projector onto a random unit vector
        let u = random_op(&mut rng, 3, 1);
        let u = u.scale(1.0 / u.frobenius_norm());
        let p = &u * &u.adjoint();
        let got = kron_conj_apply(&id, &p, &ck).unwrap();
        let expect = dket(&(&cc * &p));
        assert!((got.coords - expect.coords).norm() < 1e-12);
    }

    #[test]
    fn kron_conj_apply_dimension_mismatch() {
        let ck = dket(&Operator::identity(2));
        assert!(kron_conj_apply(&Operator::identity(3), &Operator::identity(2), &ck).is_err());
    }

    #[test]
    fn ptrace_scaling_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_op(&mut rng, 3, 3);
        let big = Operator::identity(2).kron(&m);
        let pt = ptrace_left(&big, 2, 3).unwrap();
        assert!(pt.max_abs_diff(&m.scale(2.0)) < 1e-14);

        let h = random_op(&mut rng, 6, 6).hermitian_part();
        let pl = ptrace_left(&h, 2, 3).unwrap();
        let pr = ptrace_right(&h, 2, 3).unwrap();
        assert!((pl.trace() - h.trace()).norm() < 1e-12);
        assert!((pr.trace() - h.trace()).norm() < 1e-12);
        assert!(ptrace_left(&h, 4, 2).is_err());
    }

    #[test]
    fn ptrace_left_rank_one_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_op(&mut rng, 2, 4);
        let v = dket(&a).coords;
        let outer = Operator(&v * v.adjoint());
        let pt = ptrace_left(&outer, 2, 4).unwrap();
        let expect = (&a.adjoint() * &a).conj();
        assert!(pt.max_abs_diff(&expect) < 1e-12);
        let pr = ptrace_right(&outer, 2, 4).unwrap();
        assert!(pr.max_abs_diff(&(&a * &a.adjoint())) < 1e-12);
    }

    #[test]
    fn symmetrize_rejects_loud_asymmetry() {
        let m = CMatrix::from_row_slice(2, 2, &[ONE, re(0.5), ZERO, ONE]);
        assert!(matches!(
            symmetrize_checked(&m),
            Err(QerError::NotHermitian { .. })
        ));
        let m2 = CMatrix::from_row_slice(2, 2, &[ONE, re(1e-13), ZERO, ONE]);
        let s = symmetrize_checked(&m2).unwrap();
        assert_eq!(s[(0, 1)], s[(1, 0)].conj());
    }

    #[test]
    fn project_out_matches_explicit_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_op(&mut rng, 6, 6);
        let h = (&a * &a.adjoint()).into_matrix();
        let basis = random_op(&mut rng, 3, 1);
        let v = basis.scale(1.0 / basis.frobenius_norm()).into_matrix();
        let p = &v * v.adjoint();
        let pi = identity_kron(2, &p.map(|z| z.conj()));
        let q = CMatrix::identity(6, 6) - pi;
        let expect = &q * &h * &q;
        let got = project_out_second(&h, 2, &v);
        assert!((got - expect).norm() < 1e-12);
    }

    #[test]
    fn compress_and_lift_dual_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let basis = random_op(&mut rng, 4, 2).into_matrix();
        let v = basis.qr().q();
        let y = random_op(&mut rng, 2, 2).hermitian_part().into_matrix();
        let full = lift_dual(&y, &v);
        // I ⊗ lift(Y) equals the lift of I ⊗ Y
        let a = identity_kron(2, &full);
        let b = lift_second(&identity_kron(2, &y), 2, &v);
        assert!((a - b).norm() < 1e-12);
        assert!((compress_dual(&full, &v) - y).norm() < 1e-12);
    }
}
