//! Morse–Sturm problem model.
//!
//! A system is a signature matrix `J = diag(+1 × (n−ν), −1 × ν)` together
//! with a symmetric curvature profile `S(x)`, `x ∈ [0, 1]`. The index
//! computations never look at `S` directly; they evaluate the rescaled
//! family `S_t(x) = t²·S(t·x)` (constant for `t` outside `[0, 1]`) and its
//! complexification `S_z(x) = S_t(x) + i·s·I` for `z = t + is`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Input asymmetry accepted (relative to the matrix max-norm) before symmetrization.
pub const SYMMETRY_REJECT_TOL: f64 = 1e-6;
/// Asymmetry above this (relative) is reported as a defect.
pub const SYMMETRY_REPORT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureMatrix {
    n: usize,
    nu: usize,
}

impl SignatureMatrix {
    pub fn new(n: usize, nu: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::RejectedInput("dimension n must be positive".into()));
        }
        if nu > n {
            return Err(Error::RejectedInput(format!(
                "index nu = {nu} outside [0, {n}]"
            )));
        }
        Ok(Self { n, nu })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nu(&self) -> usize {
        self.nu
    }

    /// Diagonal of `J`: `+1` for the first `n − ν` entries, `−1` after.
    pub fn diagonal<T: Real>(&self) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                if i < self.n - self.nu {
                    T::one()
                } else {
                    -T::one()
                }
            })
            .collect()
    }

    pub fn matrix<T: Real>(&self) -> Matrix<T> {
        let d = self.diagonal::<T>();
        Matrix::from_fn(self.n, self.n, |i, j| if i == j { d[i] } else { T::zero() })
    }
}

/// Natural cubic spline through matrix samples, entrywise.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSpline<T> {
    n: usize,
    xs: Vec<T>,
    /// `values[k]` is the row-major `n×n` sample at `xs[k]`.
    values: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> MatrixSpline<T> {
    fn new(n: usize, xs: Vec<T>, values: Vec<Vec<T>>) -> Self {
        let m = xs.len();
        let nn = n * n;
        let mut second = vec![vec![T::zero(); nn]; m];
        if m >= 3 {
            // Thomas algorithm on the interior nodes, once per entry.
            let h: Vec<T> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let interior = m - 2;
            for e in 0..nn {
                let mut diag = vec![T::zero(); interior];
                let mut upper = vec![T::zero(); interior];
                let mut rhs = vec![T::zero(); interior];
                for r in 0..interior {
                    let i = r + 1;
                    diag[r] = T::lit(2.0) * (h[i - 1] + h[i]);
                    upper[r] = h[i];
                    rhs[r] = T::lit(6.0)
                        * ((values[i + 1][e] - values[i][e]) / h[i]
                            - (values[i][e] - values[i - 1][e]) / h[i - 1]);
                }
                for r in 1..interior {
                    let w = h[r] / diag[r - 1];
                    diag[r] -= w * upper[r - 1];
                    rhs[r] = rhs[r] - w * rhs[r - 1];
                }
                let mut sol = vec![T::zero(); interior];
                for r in (0..interior).rev() {
                    let next = if r + 1 < interior {
                        sol[r + 1]
                    } else {
                        T::zero()
                    };
                    sol[r] = (rhs[r] - upper[r] * next) / diag[r];
                }
                for r in 0..interior {
                    second[r + 1][e] = sol[r];
                }
            }
        }
        Self {
            n,
            xs,
            values,
            second,
        }
    }

    fn locate(&self, x: T) -> (usize, T, T, T) {
        let last = self.xs.len() - 2;
        let i = self
            .xs
            .partition_point(|&xi| xi <= x)
            .saturating_sub(1)
            .min(last);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        (i, h, a, b)
    }

    fn eval_into(&self, x: T, out: &mut [T]) {
        let (i, h, a, b) = self.locate(x);
        let c = h * h / T::lit(6.0);
        for e in 0..self.n * self.n {
            out[e] = a * self.values[i][e]
                + b * self.values[i + 1][e]
                + ((a * a * a - a) * self.second[i][e] + (b * b * b - b) * self.second[i + 1][e])
                    * c;
        }
    }

    fn deriv_into(&self, x: T, out: &mut [T]) {
        let (i, h, a, b) = self.locate(x);
        let six = T::lit(6.0);
        let three = T::lit(3.0);
        for e in 0..self.n * self.n {
            out[e] = (self.values[i + 1][e] - self.values[i][e]) / h
                - (three * a * a - T::one()) / six * h * self.second[i][e]
                + (three * b * b - T::one()) / six * h * self.second[i + 1][e];
        }
    }
}

/// Curvature profile `S(x)`, `x ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum CurvatureProfile<T> {
    /// `S(x) = diag(values)` for all `x`.
    ConstDiag(Vec<T>),
    /// `S(x) = Σ_k C_k cos(kπx) + Σ_k D_k sin(kπx)`, `k = 0, 1, …`.
    Trig {
        cos: Vec<Matrix<T>>,
        sin: Vec<Matrix<T>>,
    },
    /// Natural cubic spline through samples on a grid from 0 to 1.
    Sampled(MatrixSpline<T>),
}

impl<T: Real> CurvatureProfile<T> {
    pub fn sampled(n: usize, xs: Vec<T>, matrices: Vec<Matrix<T>>) -> Self {
        let values = matrices.iter().map(|m| m.as_slice().to_vec()).collect();
        CurvatureProfile::Sampled(MatrixSpline::new(n, xs, values))
    }

    /// Writes `S(x)` into a row-major `n×n` buffer.
    pub fn eval_into(&self, n: usize, x: T, out: &mut [T]) {
        match self {
            CurvatureProfile::ConstDiag(values) => {
                out.iter_mut().for_each(|v| *v = T::zero());
                for (i, &v) in values.iter().enumerate() {
                    out[i * n + i] = v;
                }
            }
            CurvatureProfile::Trig { cos, sin } => {
                out.iter_mut().for_each(|v| *v = T::zero());
                let theta = T::PI() * x;
                let (s1, c1) = theta.sin_cos();
                let (mut ck, mut sk) = (T::one(), T::zero());
                let terms = cos.len().max(sin.len());
                for k in 0..terms {
                    if let Some(m) = cos.get(k) {
                        for (o, &v) in out.iter_mut().zip(m.as_slice()) {
                            *o += ck * v;
                        }
                    }
                    if let Some(m) = sin.get(k) {
                        for (o, &v) in out.iter_mut().zip(m.as_slice()) {
                            *o += sk * v;
                        }
                    }
                    let next_c = ck * c1 - sk * s1;
                    sk = sk * c1 + ck * s1;
                    ck = next_c;
                }
            }
            CurvatureProfile::Sampled(spline) => spline.eval_into(x, out),
        }
    }

    /// Writes `S'(x)` into a row-major `n×n` buffer.
    pub fn deriv_into(&self, x: T, out: &mut [T]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = T::zero());
        match self {
            CurvatureProfile::ConstDiag(_) => Ok(()),
            CurvatureProfile::Trig { cos, sin } => {
                let terms = cos.len().max(sin.len());
                for k in 1..terms {
                    let freq = T::from_usize_lossy(k) * T::PI();
                    let (s, c) = (freq * x).sin_cos();
                    if let Some(m) = cos.get(k) {
                        for (o, &v) in out.iter_mut().zip(m.as_slice()) {
                            *o -= freq * s * v;
                        }
                    }
                    if let Some(m) = sin.get(k) {
                        for (o, &v) in out.iter_mut().zip(m.as_slice()) {
                            *o += freq * c * v;
                        }
                    }
                }
                Ok(())
            }
            CurvatureProfile::Sampled(spline) => {
                if spline.xs.len() < 4 {
                    return Err(Error::DerivativeUnavailable {
                        points: spline.xs.len(),
                    });
                }
                spline.deriv_into(x, out);
                Ok(())
            }
        }
    }
}

/// The complete problem input.
#[derive(Clone, Debug, PartialEq)]
pub struct MorseSturmSystem<T> {
    pub signature: SignatureMatrix,
    pub profile: CurvatureProfile<T>,
}

impl<T: Real> MorseSturmSystem<T> {
    pub fn new(signature: SignatureMatrix, profile: CurvatureProfile<T>) -> Self {
        Self { signature, profile }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.signature.n()
    }

    #[inline]
    pub fn nu(&self) -> usize {
        self.signature.nu()
    }

    /// `S(x)` of the underlying profile.
    pub fn curvature(&self, x: T) -> Matrix<T> {
        let n = self.n();
        let mut m = Matrix::zeros(n, n);
        self.profile.eval_into(n, x, m.as_mut_slice());
        m
    }

    /// Constant-diagonal system `S ≡ diag(values)`.
    pub fn const_diag(nu: usize, values: Vec<T>) -> Result<Self> {
        let signature = SignatureMatrix::new(values.len(), nu)?;
        Ok(Self::new(signature, CurvatureProfile::ConstDiag(values)))
    }

    /// Same system with `S` replaced by `S + ε·I`.
    pub fn shifted(&self, eps: T) -> Self {
        let n = self.n();
        let profile = match &self.profile {
            CurvatureProfile::ConstDiag(v) => {
                CurvatureProfile::ConstDiag(v.iter().map(|&x| x + eps).collect())
            }
            CurvatureProfile::Trig { cos, sin } => {
                let mut cos = cos.clone();
                if cos.is_empty() {
                    cos.push(Matrix::zeros(n, n));
                }
                for i in 0..n {
                    cos[0][(i, i)] += eps;
                }
                CurvatureProfile::Trig {
                    cos,
                    sin: sin.clone(),
                }
            }
            CurvatureProfile::Sampled(sp) => {
                let values = sp
                    .values
                    .iter()
                    .map(|v| {
                        let mut v = v.clone();
                        for i in 0..n {
                            v[i * n + i] += eps;
                        }
                        v
                    })
                    .collect();
                CurvatureProfile::Sampled(MatrixSpline::new(n, sp.xs.clone(), values))
            }
        };
        Self::new(self.signature, profile)
    }
}

/// `z = t + i·s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexParameter<T> {
    pub t: T,
    pub s: T,
}

impl<T: Real> ComplexParameter<T> {
    pub fn new(t: T, s: T) -> Self {
        Self { t, s }
    }

    pub fn real(t: T) -> Self {
        Self { t, s: T::zero() }
    }

    pub fn to_complex(self) -> Complex<T> {
        Complex::new(self.t, self.s)
    }
}

impl<T: Real> From<Complex<T>> for ComplexParameter<T> {
    fn from(z: Complex<T>) -> Self {
        Self { t: z.re, s: z.im }
    }
}

#[inline]
pub fn clamp_unit<T: Real>(t: T) -> T {
    t.max(T::zero()).min(T::one())
}

/// The parameterized family `S_t(x) + δ·I` of a system.
///
/// `shift` is the `δ` of the perturbed path `A_t + δ·id`; it is zero for the
/// index computations proper.
#[derive(Clone, Copy, Debug)]
pub struct Family<'a, T> {
    pub system: &'a MorseSturmSystem<T>,
    pub shift: T,
}

impl<'a, T: Real> Family<'a, T> {
    pub fn new(system: &'a MorseSturmSystem<T>) -> Self {
        Self {
            system,
            shift: T::zero(),
        }
    }

    pub fn shifted(system: &'a MorseSturmSystem<T>, shift: T) -> Self {
        Self { system, shift }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.system.n()
    }

    /// Writes `S_t(x) + δI` (real `t`, clamped to `[0, 1]`) into `out`.
    pub fn real_into(&self, t: T, x: T, out: &mut [T]) {
        let n = self.n();
        let c = clamp_unit(t);
        self.system.profile.eval_into(n, c * x, out);
        let c2 = c * c;
        out.iter_mut().for_each(|v| *v *= c2);
        if self.shift != T::zero() {
            for i in 0..n {
                out[i * n + i] += self.shift;
            }
        }
    }

    pub fn real(&self, t: T, x: T) -> Matrix<T> {
        let n = self.n();
        let mut m = Matrix::zeros(n, n);
        self.real_into(t, x, m.as_mut_slice());
        m
    }

    /// `S_z(x) = S_t(x) + δI + i·s·I`.
    pub fn complex(&self, z: ComplexParameter<T>, x: T) -> Matrix<Complex<T>> {
        let n = self.n();
        let mut m = self.real(z.t, x).to_complex();
        for i in 0..n {
            m[(i, i)].im += z.s;
        }
        m
    }

    /// `∂/∂t [t² S(t x)] = 2t S(tx) + t² x S'(tx)` for `t ∈ [0, 1]`.
    pub fn dt(&self, t: T, x: T) -> Result<Matrix<T>> {
        if !(T::zero()..=T::one()).contains(&t) {
            return Err(Error::OutOfDomain {
                value: t.to_f64_lossy(),
                domain: "t in [0, 1]",
            });
        }
        let n = self.n();
        let mut value = vec![T::zero(); n * n];
        let mut deriv = vec![T::zero(); n * n];
        self.system.profile.eval_into(n, t * x, &mut value);
        self.system.profile.deriv_into(t * x, &mut deriv)?;
        let two_t = T::lit(2.0) * t;
        let t2x = t * t * x;
        Ok(Matrix::from_vec(
            n,
            n,
            value
                .iter()
                .zip(&deriv)
                .map(|(&v, &d)| two_t * v + t2x * d)
                .collect(),
        ))
    }
}

/// `S_z(x) = clamp(t)²·S(clamp(t)·x) + i·s·I`.
pub fn family_s<T: Real>(
    system: &MorseSturmSystem<T>,
    z: ComplexParameter<T>,
    x: T,
) -> Matrix<Complex<T>> {
    Family::new(system).complex(z, x)
}

/// `t`-derivative of `t²·S(t·x)`.
pub fn family_s_dt<T: Real>(system: &MorseSturmSystem<T>, t: T, x: T) -> Result<Matrix<T>> {
    Family::new(system).dt(t, x)
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    /// Where the defect sits, e.g. `"samples[3]"` or `"cos[1]"`.
    pub location: String,
    pub relative_asymmetry: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Accepted asymmetries (below the rejection tolerance) that were symmetrized away.
    pub defects: Vec<Defect>,
}

fn check_matrix<T: Real>(
    m: &Matrix<T>,
    n: usize,
    location: String,
    report: &mut ValidationReport,
) -> Result<Matrix<T>> {
    if m.rows() != n || m.cols() != n {
        return Err(Error::RejectedInput(format!(
            "{location}: expected {n}x{n} matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.all_finite::<T>() {
        return Err(Error::RejectedInput(format!(
            "{location}: non-finite entry"
        )));
    }
    let scale = m.max_abs::<T>();
    let rel = if scale > T::zero() {
        m.asymmetry() / scale
    } else {
        T::zero()
    };
    if rel > T::lit(SYMMETRY_REJECT_TOL) {
        return Err(Error::RejectedInput(format!(
            "{location}: relative asymmetry {:e} exceeds {SYMMETRY_REJECT_TOL:e}",
            rel.to_f64_lossy()
        )));
    }
    if rel > T::lit(SYMMETRY_REPORT_TOL) {
        report.defects.push(Defect {
            location,
            relative_asymmetry: rel.to_f64_lossy(),
        });
    }
    Ok(m.symmetrized())
}

/// Checks symmetry, grid monotonicity and finiteness; returns the
/// symmetrized system together with the accepted defects.
pub fn validate<T: Real>(
    system: &MorseSturmSystem<T>,
) -> Result<(MorseSturmSystem<T>, ValidationReport)> {
    let sig = SignatureMatrix::new(system.n(), system.nu())?;
    let n = sig.n();
    let mut report = ValidationReport::default();
    let profile = match &system.profile {
        CurvatureProfile::ConstDiag(v) => {
            if v.len() != n {
                return Err(Error::RejectedInput(format!(
                    "const_diag: expected {n} values, got {}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::RejectedInput("const_diag: non-finite value".into()));
            }
            CurvatureProfile::ConstDiag(v.clone())
        }
        CurvatureProfile::Trig { cos, sin } => {
            let cos = cos
                .iter()
                .enumerate()
                .map(|(k, m)| check_matrix(m, n, format!("cos[{k}]"), &mut report))
                .collect::<Result<Vec<_>>>()?;
            let sin = sin
                .iter()
                .enumerate()
                .map(|(k, m)| check_matrix(m, n, format!("sin[{k}]"), &mut report))
                .collect::<Result<Vec<_>>>()?;
            CurvatureProfile::Trig { cos, sin }
        }
        CurvatureProfile::Sampled(sp) => {
            let xs = &sp.xs;
            if xs.len() < 2 {
                return Err(Error::RejectedInput(
                    "samples: need at least two grid points".into(),
                ));
            }
            if xs.iter().any(|x| !x.is_finite()) {
                return Err(Error::RejectedInput(
                    "samples: non-finite grid point".into(),
                ));
            }
            if xs.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::RejectedInput(
                    "samples: grid must be strictly increasing".into(),
                ));
            }
            let tol = T::lit(1e-12);
            if xs[0].abs() > tol || (xs[xs.len() - 1] - T::one()).abs() > tol {
                return Err(Error::RejectedInput(
                    "samples: grid must start at 0 and end at 1".into(),
                ));
            }
            if sp.values.len() != xs.len() {
                return Err(Error::RejectedInput(format!(
                    "samples: {} grid points but {} matrices",
                    xs.len(),
                    sp.values.len()
                )));
            }
            let mut matrices = Vec::with_capacity(xs.len());
            for (k, v) in sp.values.iter().enumerate() {
                if v.len() != n * n {
                    return Err(Error::RejectedInput(format!(
                        "samples[{k}]: expected {n}x{n} matrix"
                    )));
                }
                let m = Matrix::from_vec(n, n, v.clone());
                matrices.push(check_matrix(&m, n, format!("samples[{k}]"), &mut report)?);
            }
            let mut xs = xs.clone();
            xs[0] = T::zero();
            let last = xs.len() - 1;
            xs[last] = T::one();
            CurvatureProfile::sampled(n, xs, matrices)
        }
    };
    Ok((MorseSturmSystem::new(sig, profile), report))
}

// ---------------------------------------------------------------------------
// JSON schema

/// Row-major nested matrix as it appears in system files.
pub type NestedMatrix = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    ConstDiag {
        values: Vec<f64>,
    },
    Trig {
        #[serde(default)]
        cos: Vec<NestedMatrix>,
        #[serde(default)]
        sin: Vec<NestedMatrix>,
    },
    Samples {
        xs: Vec<f64>,
        matrices: Vec<NestedMatrix>,
    },
}

/// On-disk system description (`{"n", "nu", "S"}`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub n: usize,
    pub nu: usize,
    #[serde(rename = "S")]
    pub s: ProfileSpec,
}

fn nested_to_matrix<T: Real>(rows: &NestedMatrix, n: usize, location: &str) -> Result<Matrix<T>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::RejectedInput(format!(
            "{location}: expected {n}x{n} nested array"
        )));
    }
    Ok(Matrix::from_fn(n, n, |i, j| T::lit(rows[i][j])))
}

fn matrix_to_nested<T: Real>(m: &Matrix<T>) -> NestedMatrix {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v.to_f64_lossy()).collect())
        .collect()
}

impl SystemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Builds and validates the system.
    pub fn build<T: Real>(&self) -> Result<(MorseSturmSystem<T>, ValidationReport)> {
        let sig = SignatureMatrix::new(self.n, self.nu)?;
        let n = self.n;
        let profile = match &self.s {
            ProfileSpec::ConstDiag { values } => {
                CurvatureProfile::ConstDiag(values.iter().map(|&v| T::lit(v)).collect())
            }
            ProfileSpec::Trig { cos, sin } => CurvatureProfile::Trig {
                cos: cos
                    .iter()
                    .enumerate()
                    .map(|(k, m)| nested_to_matrix(m, n, &format!("cos[{k}]")))
                    .collect::<Result<_>>()?,
                sin: sin
                    .iter()
                    .enumerate()
                    .map(|(k, m)| nested_to_matrix(m, n, &format!("sin[{k}]")))
                    .collect::<Result<_>>()?,
            },
            ProfileSpec::Samples { xs, matrices } => {
                let mats = matrices
                    .iter()
                    .enumerate()
                    .map(|(k, m)| nested_to_matrix::<T>(m, n, &format!("samples[{k}]")))
                    .collect::<Result<Vec<_>>>()?;
                // Bypass spline construction until the grid is validated.
                CurvatureProfile::Sampled(MatrixSpline {
                    n,
                    xs: xs.iter().map(|&x| T::lit(x)).collect(),
                    values: mats.iter().map(|m| m.as_slice().to_vec()).collect(),
                    second: Vec::new(),
                })
            }
        };
        validate(&MorseSturmSystem::new(sig, profile))
    }

    pub fn from_system<T: Real>(system: &MorseSturmSystem<T>) -> Self {
        let n = system.n();
        let s = match &system.profile {
            CurvatureProfile::ConstDiag(v) => ProfileSpec::ConstDiag {
                values: v.iter().map(|x| x.to_f64_lossy()).collect(),
            },
            CurvatureProfile::Trig { cos, sin } => ProfileSpec::Trig {
                cos: cos.iter().map(matrix_to_nested).collect(),
                sin: sin.iter().map(matrix_to_nested).collect(),
            },
            CurvatureProfile::Sampled(sp) => ProfileSpec::Samples {
                xs: sp.xs.iter().map(|x| x.to_f64_lossy()).collect(),
                matrices: sp
                    .values
                    .iter()
                    .map(|v| matrix_to_nested(&Matrix::from_vec(n, n, v.clone())))
                    .collect(),
            },
        };
        SystemSpec {
            n,
            nu: system.nu(),
            s,
        }
    }
}
