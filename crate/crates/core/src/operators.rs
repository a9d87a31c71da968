//! Dense complex matrices and vectors for the small Hilbert spaces used here,
//! plus the standard qubit and Fock-space operators.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::{Error, Result, C64};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFiniteValue("matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Matrix with real entries given row by row.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let src = &other.data[k * other.cols..(k + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `y = self · x` on raw amplitude slices.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn apply(&self, v: &ComplexVector) -> Result<ComplexVector> {
        if v.dim() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a {}-vector",
                self.rows,
                self.cols,
                v.dim()
            )));
        }
        let mut out = vec![ZERO; self.rows];
        self.apply_into(v.as_slice(), &mut out);
        Ok(ComplexVector { data: out })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|a_ij − conj(a_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.rows;
        Self::from_fn(n, n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    /// Eigen-decomposition of the Hermitian part by cyclic complex Jacobi
    /// rotations. Eigenvalues come back ascending; eigenvectors are the
    /// columns of the returned unitary.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, ComplexMatrix)> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("eigen of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.hermitian_part();
        let mut v = Self::identity(n);
        let scale = a.frobenius_norm();
        if scale > 0.0 {
            for _ in 0..64 {
                let mut off = 0.0;
                for p in 0..n {
                    for q in p + 1..n {
                        off += a[(p, q)].norm_sqr();
                    }
                }
                if off.sqrt() <= 1e-17 * scale {
                    break;
                }
                for p in 0..n {
                    for q in p + 1..n {
                        jacobi_rotate(&mut a, &mut v, p, q);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let vectors = Self::from_fn(n, n, |i, j| v[(i, order[j])]);
        Ok((values, vectors))
    }

    /// `f(A)` for the Hermitian part of `A`, applying `f` to each eigenvalue.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let (w, v) = self.hermitian_eigen()?;
        let n = self.rows;
        Ok(Self::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| v[(i, k)] * v[(j, k)].conj() * f(w[k]))
                .sum()
        }))
    }
}

// Zero the (p, q) element of `a` with the unitary U = diag(1, e^{-iφ})·R(θ)
// acting on rows/columns p and q, and accumulate U into `v`.
fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let n = a.rows;
    let phase = (apq / mag).conj();
    let theta = 0.5 * (2.0 * mag).atan2(a[(p, p)].re - a[(q, q)].re);
    let (s, c) = theta.sin_cos();
    let (u_pp, u_pq, u_qp, u_qq) = (C64::from(c), C64::from(-s), phase * s, phase * c);

    for k in 0..n {
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
    }
    for k in 0..n {
        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::from(a[(p, p)].re);
    a[(q, q)] = C64::from(a[(q, q)].re);
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = vkp * u_pp + vkq * u_qp;
        v[(k, q)] = vkp * u_pq + vkq * u_qq;
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

// The arithmetic operators panic on shape mismatch, like slice indexing; the
// checked entry points are `matmul`, `commutator` and friends.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix shapes must agree")
    }
}

impl Mul<C64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: C64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: f64) -> ComplexMatrix {
        self.scale(C64::from(rhs))
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(-ONE)
    }
}

/// Dense complex state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector {
    data: Vec<C64>,
}

impl ComplexVector {
    pub fn new(data: Vec<C64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::DimensionMismatch("empty state vector".into()));
        }
        if data.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFiniteValue("state amplitude".into()));
        }
        Ok(Self { data })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut data = vec![ZERO; dim];
        data[index] = ONE;
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn normalized(&self) -> Self {
        self.scale(C64::from(1.0 / self.norm()))
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| self.data[i] * self.data[j].conj())
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut data = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        Self { data }
    }
}

impl Index<usize> for ComplexVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = (a.rows * b.rows, a.cols * b.cols);
    ComplexMatrix::from_fn(rows, cols, |i, j| {
        a[(i / b.rows, j / b.cols)] * b[(i % b.rows, j % b.cols)]
    })
}

/// `[a, b] = ab − ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() || a.rows != b.rows || a.cols != b.cols {
        return Err(Error::DimensionMismatch(format!(
            "commutator of {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(&a.matmul(b)? - &b.matmul(a)?)
}

pub fn dagger(a: &ComplexMatrix) -> ComplexMatrix {
    a.dagger()
}

/// `⟨ψ|A|ψ⟩` without renormalizing `ψ`.
pub fn expectation(state: &ComplexVector, op: &ComplexMatrix) -> Result<C64> {
    if !op.is_square() || op.cols != state.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} operator on a {}-vector",
            op.rows,
            op.cols,
            state.dim()
        )));
    }
    Ok(state.inner(&op.apply(state)?))
}

/// Trace over the right factor of a `keep ⊗ traced` space.
pub fn partial_trace(rho: &ComplexMatrix, keep_dims: usize, trace_dims: usize) -> Result<ComplexMatrix> {
    check_factorization(rho, keep_dims, trace_dims)?;
    Ok(ComplexMatrix::from_fn(keep_dims, keep_dims, |i, j| {
        (0..trace_dims)
            .map(|k| rho[(i * trace_dims + k, j * trace_dims + k)])
            .sum()
    }))
}

/// Trace over the left factor of a `traced ⊗ keep` space.
pub fn partial_trace_left(rho: &ComplexMatrix, trace_dims: usize, keep_dims: usize) -> Result<ComplexMatrix> {
    check_factorization(rho, keep_dims, trace_dims)?;
    Ok(ComplexMatrix::from_fn(keep_dims, keep_dims, |i, j| {
        (0..trace_dims)
            .map(|k| rho[(k * keep_dims + i, k * keep_dims + j)])
            .sum()
    }))
}

fn check_factorization(rho: &ComplexMatrix, a: usize, b: usize) -> Result<()> {
    if !rho.is_square() || a == 0 || b == 0 || rho.rows != a * b {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix does not factor as {a} x {b}",
            rho.rows, rho.cols
        )));
    }
    Ok(())
}

pub fn sigma_minus() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap()
}

pub fn sigma_plus() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 0.0, 1.0, 0.0]).unwrap()
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0]).unwrap()
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
}

/// `σ_y = i(σ₋ − σ₊)` in this basis ordering.
pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![ZERO, I, -I, ZERO]).unwrap()
}

/// Truncated annihilation operator on `levels` Fock states.
pub fn annihilation(levels: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(levels, levels, |i, j| {
        if j == i + 1 {
            C64::from((j as f64).sqrt())
        } else {
            ZERO
        }
    })
}

pub fn creation(levels: usize) -> ComplexMatrix {
    annihilation(levels).dagger()
}

pub fn number(levels: usize) -> ComplexMatrix {
    ComplexMatrix::diag(&(0..levels).map(|n| C64::from(n as f64)).collect::<Vec<_>>())
}

/// `op ⊗ I₂`: acts on qubit A of a pair.
pub fn on_qubit_a(op: &ComplexMatrix) -> ComplexMatrix {
    tensor_product(op, &ComplexMatrix::identity(2))
}

/// `I₂ ⊗ op`: acts on qubit B of a pair.
pub fn on_qubit_b(op: &ComplexMatrix) -> ComplexMatrix {
    tensor_product(&ComplexMatrix::identity(2), op)
}

pub fn ground() -> ComplexVector {
    ComplexVector::basis(2, 0)
}

pub fn excited() -> ComplexVector {
    ComplexVector::basis(2, 1)
}

/// `(|11⟩ + |00⟩)/√2`.
pub fn bell_phi_plus() -> ComplexVector {
    let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    ComplexVector {
        data: vec![h, ZERO, ZERO, h],
    }
}
