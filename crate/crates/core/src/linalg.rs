//! Small dense linear algebra over [`Entry`] scalars.
//!
//! Only what the index computations need: a row-major [`Matrix`], LU
//! determinants with partial pivoting, inertia via Bunch–Kaufman symmetric
//! indefinite factorization, a one-sided Jacobi SVD and a cyclic Jacobi
//! symmetric eigensolver.

use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{Entry, Real};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

pub type RealMatrix<T> = Matrix<T>;
pub type ComplexMatrix<T> = Matrix<Complex<T>>;

impl<E: Copy> Matrix<E> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<E>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[E] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [E] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[E] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Copy of the block with top-left corner `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn map<F: Copy>(&self, f: impl Fn(E) -> F) -> Matrix<F> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl<E> Index<(usize, usize)> for Matrix<E> {
    type Output = E;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &E {
        &self.data[i * self.cols + j]
    }
}

impl<E> IndexMut<(usize, usize)> for Matrix<E> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut E {
        &mut self.data[i * self.cols + j]
    }
}

impl<E: Copy + num_traits::Zero> Matrix<E> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![E::zero(); rows * cols],
        }
    }
}

impl<E: Copy + num_traits::Zero + num_traits::One> Matrix<E> {
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { E::one() } else { E::zero() })
    }
}

impl<E> Matrix<E>
where
    E: Copy + num_traits::NumAssign,
{
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[E]) -> Vec<E> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(E::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, s: E) -> Self {
        self.map(|x| x * s)
    }
}

impl<T: Real> Matrix<T> {
    pub fn to_complex(&self) -> ComplexMatrix<T> {
        self.map(|x| Complex::new(x, T::zero()))
    }

    /// `(M + Mᵀ)/2`.
    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| {
            half * (self[(i, j)] + self[(j, i)])
        })
    }

    /// Largest `|M_ij − M_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }
}

impl<E> Matrix<E> {
    /// Max-norm `max |M_ij|`.
    pub fn max_abs<T: Real>(&self) -> T
    where
        E: Entry<T>,
    {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| acc.max(x.modulus()))
    }

    pub fn all_finite<T: Real>(&self) -> bool
    where
        E: Entry<T>,
    {
        self.data.iter().all(|x| x.is_finite_entry())
    }
}

/// Determinant by LU factorization with partial pivoting on `|entry|`.
pub fn determinant<T: Real, E: Entry<T>>(m: &Matrix<E>) -> Result<E> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "determinant of non-square {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut det = E::one();
    for k in 0..n {
        let mut p = k;
        let mut best = a[(k, k)].modulus();
        for i in (k + 1)..n {
            let v = a[(i, k)].modulus();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == T::zero() {
            return Ok(E::zero());
        }
        if p != k {
            a.swap_rows(p, k);
            det = -det;
        }
        let pivot = a[(k, k)];
        det *= pivot;
        for i in (k + 1)..n {
            let f = a[(i, k)] / pivot;
            if f == E::zero() {
                continue;
            }
            for j in (k + 1)..n {
                let akj = a[(k, j)];
                a[(i, j)] -= f * akj;
            }
        }
    }
    Ok(det)
}

/// Signature counts of a real symmetric matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Inertia {
    pub n_minus: usize,
    pub n_zero: usize,
    pub n_plus: usize,
}

impl Inertia {
    pub fn signature(&self) -> i64 {
        self.n_plus as i64 - self.n_minus as i64
    }
}

/// Relative threshold below which an eigenvalue counts as zero.
pub const INERTIA_ZERO_TOL: f64 = 1e-10;

/// Pivots within this factor of the zero threshold trigger spectrum slicing.
const SLICING_GUARD: f64 = 1e4;

/// Inertia by Bunch–Kaufman symmetric indefinite factorization.
///
/// Eigenvalues with `|λ| ≤ τ = `[`INERTIA_ZERO_TOL`]` × max|pivot|` are
/// counted in `n_zero`. Pivot signs alone do not locate eigenvalues near zero
/// (a tiny pivot may carry the sign of a larger eigenvalue), so when some
/// pivot falls near `τ` the counts come from `A + τI` and `A − τI` instead.
pub fn inertia<T: Real>(m: &Matrix<T>) -> Result<Inertia> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "inertia of non-square {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let scale = m.max_abs::<T>();
    if m.asymmetry() > T::lit(1e-10) * scale.max(T::min_positive_value()) {
        return Err(Error::Shape("inertia requires a symmetric matrix".into()));
    }
    let a = m.symmetrized();
    let pivots = bunch_kaufman_pivots(a.clone());
    let max_pivot = pivots.iter().fold(T::zero(), |acc, p| acc.max(p.abs()));
    let tol = T::lit(INERTIA_ZERO_TOL) * max_pivot;
    let count = |pivots: &[T]| {
        let neg = pivots.iter().filter(|p| **p < T::zero()).count();
        let pos = pivots.iter().filter(|p| **p > T::zero()).count();
        (neg, pos)
    };
    let min_pivot = pivots.iter().fold(T::infinity(), |acc, p| acc.min(p.abs()));
    if min_pivot > T::lit(SLICING_GUARD) * tol {
        let (n_minus, n_plus) = count(&pivots);
        return Ok(Inertia {
            n_minus,
            n_zero: n - n_minus - n_plus,
            n_plus,
        });
    }
    if tol == T::zero() {
        return Ok(Inertia {
            n_minus: 0,
            n_zero: n,
            n_plus: 0,
        });
    }
    let shifted = |shift: T| {
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += shift;
        }
        bunch_kaufman_pivots(b)
    };
    let (n_minus, _) = count(&shifted(tol));
    let (_, n_plus) = count(&shifted(-tol));
    Ok(Inertia {
        n_minus,
        n_zero: n - n_minus - n_plus,
        n_plus,
    })
}

/// Block pivots of `P A Pᵀ = L D Lᵀ`; 2×2 blocks contribute their eigenvalues.
fn bunch_kaufman_pivots<T: Real>(mut a: Matrix<T>) -> Vec<T> {
    let n = a.rows();
    let alpha = (T::one() + T::lit(17.0).sqrt()) / T::lit(8.0);
    let mut pivots: Vec<T> = Vec::with_capacity(n);

    let swap_sym = |a: &mut Matrix<T>, p: usize, q: usize| {
        if p == q {
            return;
        }
        a.swap_rows(p, q);
        for i in 0..n {
            let tmp = a[(i, p)];
            a[(i, p)] = a[(i, q)];
            a[(i, q)] = tmp;
        }
    };

    let mut k = 0;
    while k < n {
        let akk = a[(k, k)].abs();
        let (mut lambda, mut r) = (T::zero(), k);
        for i in (k + 1)..n {
            let v = a[(i, k)].abs();
            if v > lambda {
                lambda = v;
                r = i;
            }
        }
        if akk == T::zero() && lambda == T::zero() {
            pivots.push(T::zero());
            k += 1;
            continue;
        }
        let two_by_two = if akk >= alpha * lambda {
            false
        } else {
            let mut sigma = T::zero();
            for j in k..n {
                if j != r {
                    sigma = sigma.max(a[(r, j)].abs());
                }
            }
            if akk * sigma >= alpha * lambda * lambda {
                false
            } else if a[(r, r)].abs() >= alpha * sigma {
                swap_sym(&mut a, k, r);
                false
            } else {
                swap_sym(&mut a, k + 1, r);
                true
            }
        };

        if !two_by_two {
            let d = a[(k, k)];
            pivots.push(d);
            for i in (k + 1)..n {
                let f = a[(i, k)] / d;
                if f == T::zero() {
                    continue;
                }
                let (head, tail) = a.data.split_at_mut(i * n);
                let krow = &head[k * n..(k + 1) * n];
                let irow = &mut tail[..n];
                for j in (k + 1)..n {
                    irow[j] -= f * krow[j];
                }
            }
            k += 1;
        } else {
            let (d11, d21, d22) = (a[(k, k)], a[(k + 1, k)], a[(k + 1, k + 1)]);
            let det = d11 * d22 - d21 * d21;
            let half_tr = (d11 + d22) / T::lit(2.0);
            let disc = (((d11 - d22) / T::lit(2.0)).powi(2) + d21 * d21).sqrt();
            pivots.push(half_tr + disc);
            pivots.push(half_tr - disc);
            for i in (k + 2)..n {
                let (x1, x2) = (a[(i, k)], a[(i, k + 1)]);
                // [w1 w2] = [x1 x2] D⁻¹
                let w1 = (x1 * d22 - x2 * d21) / det;
                let w2 = (x2 * d11 - x1 * d21) / det;
                for j in (k + 2)..n {
                    let v = w1 * a[(k, j)] + w2 * a[(k + 1, j)];
                    a[(i, j)] -= v;
                }
            }
            k += 2;
        }
    }
    pivots
}

/// Thin SVD `A = U Σ Vᵀ` of a real matrix with `rows ≥ cols`.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    /// Singular values, descending.
    pub singular_values: Vec<T>,
    /// Right singular vectors as columns, in the same order.
    pub v: Matrix<T>,
}

/// One-sided (Hestenes) Jacobi SVD; accurate for small singular values.
pub fn svd<T: Real>(m: &Matrix<T>) -> Result<Svd<T>> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows < cols {
        return Err(Error::Shape(format!(
            "svd expects rows >= cols, got {rows}x{cols}"
        )));
    }
    let mut u = m.clone();
    let mut v = Matrix::<T>::identity(cols);
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..rows {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..cols {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = (0..cols)
        .map(|j| (0..rows).map(|i| u[(i, j)] * u[(i, j)]).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| {
        norms[b]
            .partial_cmp(&norms[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(Svd {
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        v: Matrix::from_fn(cols, cols, |i, k| v[(i, order[k])]),
    })
}

/// Eigenvalues (ascending) of a small real symmetric matrix by cyclic Jacobi.
pub fn symmetric_eigenvalues<T: Real>(m: &Matrix<T>) -> Result<Vec<T>> {
    if !m.is_square() {
        return Err(Error::Shape("eigenvalues of non-square matrix".into()));
    }
    let n = m.rows();
    let mut a = m.symmetrized();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= T::epsilon() * T::epsilon() * a.frobenius().powi(2) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (T::one() + theta * theta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag(values: &[f64]) -> Matrix<f64> {
        Matrix::from_fn(values.len(), values.len(), |i, j| {
            if i == j {
                values[i]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn inertia_of_small_diagonals() {
        let i = inertia(&diag(&[-1.0, 2.0, 3.0])).unwrap();
        assert_eq!((i.n_minus, i.n_zero, i.n_plus), (1, 0, 2));
        let z = inertia(&Matrix::<f64>::zeros(3, 3)).unwrap();
        assert_eq!((z.n_minus, z.n_zero, z.n_plus), (0, 3, 0));
    }

    #[test]
    fn inertia_uses_two_by_two_pivots() {
        // zero diagonal forces a 2x2 pivot; eigenvalues are ±1
        let m = Matrix::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let i = inertia(&m).unwrap();
        assert_eq!((i.n_minus, i.n_zero, i.n_plus), (1, 0, 1));
    }

    #[test]
    fn tiny_pivot_with_the_wrong_sign_is_not_mistaken_for_the_kernel() {
        // P diag(1.58, 0, 3.91, -3.13, -0.1) Pᵀ: eigenvalue signs (-, -, 0, +, +),
        // but elimination leaves a rounding-sized negative pivot for the kernel
        let m = Matrix::from_vec(
            5,
            5,
            vec![
                3.2513344395379007,
                -2.1560699209310736,
                -0.17635702190223718,
                0.0,
                0.0,
                -2.1560699209310736,
                1.4297629451507359,
                0.11694831071344289,
                0.0,
                0.0,
                -0.17635702190223718,
                0.11694831071344289,
                3.920398975133612,
                0.0,
                2.364908220029183,
                0.0,
                0.0,
                0.0,
                -3.1252639029984466,
                2.4946031753479843,
                0.0,
                0.0,
                2.364908220029183,
                2.4946031753479843,
                -0.661129655740122,
            ],
        );
        let i = inertia(&m).unwrap();
        assert_eq!((i.n_minus, i.n_zero, i.n_plus), (2, 1, 2));
    }

    #[test]
    fn inertia_rejects_asymmetric_input() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 0.0, 1.0]);
        assert!(inertia(&m).is_err());
    }

    #[test]
    fn complex_determinant_matches_cofactor_expansion() {
        let c = |re: f64, im: f64| Complex::new(re, im);
        let m = Matrix::from_vec(
            3,
            3,
            vec![
                c(0.0, 1.0),
                c(2.0, 0.0),
                c(1.0, -1.0),
                c(3.0, 0.5),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(-1.0, 0.0),
                c(0.5, 2.0),
                c(2.0, 0.0),
            ],
        );
        let cof = m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
            - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
            + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)]);
        let d = determinant(&m).unwrap();
        assert!((d - cof).norm() < 1e-13);
    }

    #[test]
    fn svd_finds_kernel_of_rank_deficient_matrix() {
        let m = Matrix::from_vec(3, 3, vec![1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 1.0, 0.0, 1.0]);
        let s = svd(&m).unwrap();
        assert!(s.singular_values[2] < 1e-12);
        let k: Vec<f64> = (0..3).map(|i| s.v[(i, 2)]).collect();
        let r = m.mul_vec(&k);
        assert!(r.iter().all(|x| x.abs() < 1e-12));
    }

    fn sym_strategy(n: usize) -> impl Strategy<Value = Matrix<f64>> {
        proptest::collection::vec(-10.0..10.0f64, n * n).prop_map(move |v| {
            let m = Matrix::from_vec(n, n, v);
            m.symmetrized()
        })
    }

    proptest! {
        // Sylvester's law: factorization inertia equals eigenvalue sign counts.
        #[test]
        fn inertia_agrees_with_eigenvalue_signs(m in (2usize..7).prop_flat_map(sym_strategy)) {
            let eig = symmetric_eigenvalues(&m).unwrap();
            let scale = eig.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            prop_assume!(eig.iter().all(|x| x.abs() > 1e-6 * scale));
            let i = inertia(&m).unwrap();
            let neg = eig.iter().filter(|x| **x < 0.0).count();
            prop_assert_eq!(i.n_minus, neg);
            prop_assert_eq!(i.n_plus, eig.len() - neg);
            prop_assert_eq!(i.n_zero, 0);
        }

        #[test]
        fn determinant_of_product_is_product_of_determinants(
            a in proptest::collection::vec(-3.0..3.0f64, 9),
            b in proptest::collection::vec(-3.0..3.0f64, 9),
        ) {
            let (a, b) = (Matrix::from_vec(3, 3, a), Matrix::from_vec(3, 3, b));
            let lhs: f64 = determinant(&a.mul(&b)).unwrap();
            let rhs = determinant(&a).unwrap() * determinant(&b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }
    }
}
