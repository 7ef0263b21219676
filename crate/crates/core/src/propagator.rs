//! Fundamental solutions of the complexified Hamiltonian system.
//!
//! For `z = t + is` the first-order system `Ψ' = σ H_z Ψ`, `Ψ(0) = id`, with
//! `σ = [[0, −I], [I, 0]]` and `H_z = diag(−S_z, −J)` reads, blockwise,
//! `w₁' = J w₂`, `w₂' = −S_z w₁`. The columns started at `(0, e_i)` solve
//! `J u'' + S_z u = 0`, `u(0) = 0`, `u'(0) = J e_i`; their `w₁` parts form
//! the shooting matrix `b_z(x)`, the upper-right block of `Ψ_z(x)`.
//!
//! Integration is classical RK4 on a uniform grid.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, Matrix};
use crate::model::{ComplexParameter, Family, MorseSturmSystem};
use crate::scalar::{Entry, Real};

pub const MIN_STEPS: usize = 16;
pub const DEFAULT_STEPS: usize = 2000;

/// The standard symplectic form `σ = [[0, −I], [I, 0]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymplecticForm {
    pub n: usize,
}

impl SymplecticForm {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn matrix<T: Real, E: Entry<T>>(&self) -> Matrix<E> {
        let n = self.n;
        Matrix::from_fn(2 * n, 2 * n, |i, j| {
            if i < n && j == i + n {
                -E::one()
            } else if i >= n && j + n == i {
                E::one()
            } else {
                E::zero()
            }
        })
    }
}

#[derive(Clone, Debug)]
pub struct PropagatorResult<T: Real> {
    /// `Ψ_z(1)`.
    pub psi_end: ComplexMatrix<T>,
    /// `b_z = b_z(1)`, the upper-right `n×n` block of `psi_end`.
    pub b_end: ComplexMatrix<T>,
    /// `‖Ψᵀ σ Ψ − σ‖_max` of `psi_end` (plain transpose).
    pub symplectic_defect: T,
    pub steps: usize,
}

struct Rk4Buffers<E> {
    k1: Vec<E>,
    k2: Vec<E>,
    k3: Vec<E>,
    k4: Vec<E>,
    tmp: Vec<E>,
}

#[inline]
fn hamiltonian_rhs<T: Real, E: Entry<T>>(
    signs: &[T],
    n: usize,
    cols: usize,
    s: &[E],
    y: &[E],
    out: &mut [E],
) {
    // w₁' = J w₂
    for i in 0..n {
        let src = &y[(n + i) * cols..(n + i + 1) * cols];
        let dst = &mut out[i * cols..(i + 1) * cols];
        if signs[i] > T::zero() {
            dst.copy_from_slice(src);
        } else {
            for (d, &v) in dst.iter_mut().zip(src) {
                *d = -v;
            }
        }
    }
    // w₂' = −S w₁
    let lower = &mut out[n * cols..];
    for i in 0..n {
        let dst = &mut lower[i * cols..(i + 1) * cols];
        dst.iter_mut().for_each(|d| *d = E::zero());
        for k in 0..n {
            let sik = s[i * n + k];
            if sik == E::zero() {
                continue;
            }
            let src = &y[k * cols..(k + 1) * cols];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d -= sik * v;
            }
        }
    }
}

/// RK4 for `Y' = [[0, J], [−S(x), 0]] Y` on `[0, 1]` with `steps` uniform steps.
///
/// `s_at(x, buf)` writes the row-major `n×n` matrix `S(x)`; `observe(k, Y)`
/// sees the state at every grid point `x_k = k/steps`, `k = 0..=steps`.
pub(crate) fn integrate<T, E>(
    signs: &[T],
    steps: usize,
    init: Matrix<E>,
    mut s_at: impl FnMut(T, &mut [E]),
    mut observe: impl FnMut(usize, &Matrix<E>),
) -> Result<Matrix<E>>
where
    T: Real,
    E: Entry<T>,
{
    let n = signs.len();
    if init.rows() != 2 * n {
        return Err(Error::Shape(format!(
            "initial data must have {} rows, got {}",
            2 * n,
            init.rows()
        )));
    }
    if steps < MIN_STEPS {
        return Err(Error::InvalidConfig(format!(
            "ode steps {steps} below minimum {MIN_STEPS}"
        )));
    }
    let cols = init.cols();
    let len = 2 * n * cols;
    let mut y = init;
    let mut buf = Rk4Buffers {
        k1: vec![E::zero(); len],
        k2: vec![E::zero(); len],
        k3: vec![E::zero(); len],
        k4: vec![E::zero(); len],
        tmp: vec![E::zero(); len],
    };
    let mut s_left = vec![E::zero(); n * n];
    let mut s_mid = vec![E::zero(); n * n];
    let mut s_right = vec![E::zero(); n * n];

    let h = T::one() / T::from_usize_lossy(steps);
    let he = E::from_real(h);
    let half = E::from_real(h / T::lit(2.0));
    let sixth = E::from_real(h / T::lit(6.0));
    let two = E::from_real(T::lit(2.0));

    s_at(T::zero(), &mut s_left);
    observe(0, &y);
    for step in 0..steps {
        let x = T::from_usize_lossy(step) * h;
        let x_next = T::from_usize_lossy(step + 1) * h;
        s_at(x + h / T::lit(2.0), &mut s_mid);
        s_at(x_next, &mut s_right);

        let ys = y.as_slice();
        hamiltonian_rhs(signs, n, cols, &s_left, ys, &mut buf.k1);
        for ((t, &a), &k) in buf.tmp.iter_mut().zip(ys).zip(&buf.k1) {
            *t = a + half * k;
        }
        hamiltonian_rhs(signs, n, cols, &s_mid, &buf.tmp, &mut buf.k2);
        for ((t, &a), &k) in buf.tmp.iter_mut().zip(ys).zip(&buf.k2) {
            *t = a + half * k;
        }
        hamiltonian_rhs(signs, n, cols, &s_mid, &buf.tmp, &mut buf.k3);
        for ((t, &a), &k) in buf.tmp.iter_mut().zip(ys).zip(&buf.k3) {
            *t = a + he * k;
        }
        hamiltonian_rhs(signs, n, cols, &s_right, &buf.tmp, &mut buf.k4);

        let ym = y.as_mut_slice();
        let mut finite = true;
        for i in 0..len {
            ym[i] += sixth * (buf.k1[i] + two * (buf.k2[i] + buf.k3[i]) + buf.k4[i]);
            finite &= ym[i].is_finite_entry();
        }
        if !finite {
            return Err(Error::PropagationDiverged { step: step + 1 });
        }
        std::mem::swap(&mut s_left, &mut s_right);
        observe(step + 1, &y);
    }
    Ok(y)
}

fn real_s_writer<'a, T: Real>(family: &'a Family<'a, T>, t: T) -> impl FnMut(T, &mut [T]) + 'a {
    move |x, out| family.real_into(t, x, out)
}

fn complex_s_writer<'a, T: Real>(
    family: &'a Family<'a, T>,
    z: ComplexParameter<T>,
) -> impl FnMut(T, &mut [Complex<T>]) + 'a {
    let n = family.n();
    let mut real = vec![T::zero(); n * n];
    move |x, out| {
        family.real_into(z.t, x, &mut real);
        for (o, &r) in out.iter_mut().zip(&real) {
            *o = Complex::new(r, T::zero());
        }
        for i in 0..n {
            out[i * n + i].im += z.s;
        }
    }
}

/// Initial data `(0, e_i)` for the shooting columns.
fn shooting_init<T: Real, E: Entry<T>>(n: usize) -> Matrix<E> {
    Matrix::from_fn(
        2 * n,
        n,
        |i, j| if i == n + j { E::one() } else { E::zero() },
    )
}

/// `Ψ_z(1)` for the family, with `b_z` and the symplectic defect.
pub fn propagate_family<T: Real>(
    family: &Family<'_, T>,
    z: ComplexParameter<T>,
    steps: usize,
) -> Result<PropagatorResult<T>> {
    let n = family.n();
    let signs = family.system.signature.diagonal::<T>();
    let psi = integrate(
        &signs,
        steps,
        Matrix::<Complex<T>>::identity(2 * n),
        complex_s_writer(family, z),
        |_, _| {},
    )?;
    let b_end = psi.block(0, n, n, n);
    let defect = symplectic_defect(&psi)?;
    Ok(PropagatorResult {
        psi_end: psi,
        b_end,
        symplectic_defect: defect,
        steps,
    })
}

/// `Ψ_z(1)` for `S_z` of the system.
pub fn propagate<T: Real>(
    system: &MorseSturmSystem<T>,
    z: ComplexParameter<T>,
    steps: usize,
) -> Result<PropagatorResult<T>> {
    propagate_family(&Family::new(system), z, steps)
}

/// `b_z(1)` alone: integrates only the `n` columns of `Ψ_z` started at
/// `(0, e_i)`. Column-for-column the arithmetic is that of [`propagate`], so
/// the result equals the upper-right block of `Ψ_z(1)` bit for bit.
pub fn shooting_matrix<T: Real>(
    family: &Family<'_, T>,
    z: ComplexParameter<T>,
    steps: usize,
) -> Result<ComplexMatrix<T>> {
    let n = family.n();
    let signs = family.system.signature.diagonal::<T>();
    let y = integrate(
        &signs,
        steps,
        shooting_init::<T, Complex<T>>(n),
        complex_s_writer(family, z),
        |_, _| {},
    )?;
    Ok(y.block(0, 0, n, n))
}

/// Real `b_t(1)` for real `t`.
pub fn shooting_matrix_real<T: Real>(
    family: &Family<'_, T>,
    t: T,
    steps: usize,
) -> Result<Matrix<T>> {
    let n = family.n();
    let signs = family.system.signature.diagonal::<T>();
    let y = integrate(
        &signs,
        steps,
        shooting_init::<T, T>(n),
        real_s_writer(family, t),
        |_, _| {},
    )?;
    Ok(y.block(0, 0, n, n))
}

/// `b_t(x_k)` at every grid point `x_k = k/steps`, `k = 0..=steps`.
pub fn shooting_trajectory_real<T: Real>(
    family: &Family<'_, T>,
    t: T,
    steps: usize,
) -> Result<Vec<Matrix<T>>> {
    let n = family.n();
    let signs = family.system.signature.diagonal::<T>();
    let mut trajectory = Vec::with_capacity(steps + 1);
    integrate(
        &signs,
        steps,
        shooting_init::<T, T>(n),
        real_s_writer(family, t),
        |_, y| trajectory.push(y.block(0, 0, n, n)),
    )?;
    Ok(trajectory)
}

/// `‖Ψᵀ σ Ψ − σ‖_max` with the plain (not conjugate) transpose.
pub fn symplectic_defect<T: Real, E: Entry<T>>(psi: &Matrix<E>) -> Result<T> {
    if !psi.is_square() || psi.rows() % 2 != 0 {
        return Err(Error::Shape(format!(
            "symplectic defect needs a square matrix of even size, got {}x{}",
            psi.rows(),
            psi.cols()
        )));
    }
    let sigma = SymplecticForm::new(psi.rows() / 2).matrix::<T, E>();
    let lhs = psi.transpose().mul(&sigma).mul(psi);
    Ok(lhs.sub(&sigma).max_abs::<T>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::determinant;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn sigma_is_symplectic_and_squares_to_minus_identity() {
        let s = SymplecticForm::new(3).matrix::<f64, f64>();
        assert_eq!(s.transpose(), s.scale(-1.0));
        assert_eq!(s.mul(&s), Matrix::<f64>::identity(6).scale(-1.0));
        assert_eq!(symplectic_defect::<f64, f64>(&s).unwrap(), 0.0);
        assert_eq!(
            symplectic_defect::<f64, f64>(&Matrix::identity(4)).unwrap(),
            0.0
        );
    }

    #[test]
    fn symplectic_defect_rejects_odd_dimension() {
        assert!(symplectic_defect::<f64, f64>(&Matrix::identity(3)).is_err());
    }

    #[test]
    fn flat_scalar_system_shoots_linearly() {
        let sys = MorseSturmSystem::const_diag(0, vec![0.0]).unwrap();
        let r = propagate(&sys, ComplexParameter::real(0.7), 64).unwrap();
        assert!((r.b_end[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn flat_system_gives_signature_matrix() {
        let sys = MorseSturmSystem::const_diag(2, vec![0.0; 3]).unwrap();
        let r = propagate(&sys, ComplexParameter::real(0.4), 64).unwrap();
        let expected = sys.signature.matrix::<f64>().to_complex();
        assert!(r.b_end.sub(&expected).max_abs::<f64>() < 1e-14);
        let det = determinant(&r.b_end).unwrap();
        assert!((det - c(1.0, 0.0)).norm() < 1e-14); // (−1)^2
        assert!(r.symplectic_defect < 1e-14);
    }

    #[test]
    fn shooting_matrix_is_the_upper_right_block_bitwise() {
        let sys = MorseSturmSystem::const_diag(1, vec![12.0, -5.0]).unwrap();
        let fam = Family::new(&sys);
        let z = ComplexParameter::new(0.8, 0.3);
        let full = propagate_family(&fam, z, 200).unwrap();
        let b = shooting_matrix(&fam, z, 200).unwrap();
        assert_eq!(full.b_end, b);
    }

    #[test]
    fn real_and_complex_shooting_agree_on_the_axis() {
        let sys = MorseSturmSystem::const_diag(0, vec![30.0, 2.0]).unwrap();
        let fam = Family::new(&sys);
        let br = shooting_matrix_real(&fam, 0.9, 300).unwrap();
        let bc = shooting_matrix(&fam, ComplexParameter::real(0.9), 300).unwrap();
        assert!(bc.sub(&br.to_complex()).max_abs::<f64>() < 1e-14);
    }

    #[test]
    fn trajectory_starts_at_zero_and_ends_at_b() {
        let sys = MorseSturmSystem::const_diag(0, vec![9.0]).unwrap();
        let fam = Family::new(&sys);
        let traj = shooting_trajectory_real(&fam, 1.0, 100).unwrap();
        assert_eq!(traj.len(), 101);
        assert_eq!(traj[0][(0, 0)], 0.0);
        let b = shooting_matrix_real(&fam, 1.0, 100).unwrap();
        assert_eq!(traj[100], b);
    }

    #[test]
    fn too_few_steps_is_a_config_error() {
        let sys = MorseSturmSystem::const_diag(0, vec![1.0]).unwrap();
        assert!(matches!(
            propagate(&sys, ComplexParameter::real(0.5), 8),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn overflow_is_reported_with_step() {
        let sys = MorseSturmSystem::const_diag(0, vec![-1e300]).unwrap();
        let err = propagate(&sys, ComplexParameter::real(1.0), 32).unwrap_err();
        assert!(matches!(err, Error::PropagationDiverged { .. }));
    }
}
