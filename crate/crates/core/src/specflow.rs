//! Spectral flow of the strong operator path `A_t = J d²/dx² + S_t`.
//!
//! Two routes: the inertia difference of Galerkin truncations at the
//! endpoints (stabilized over doubling mode counts), and the sum of
//! crossing-form signatures at the degenerate instants. The flow of the
//! Riesz-representation path `L_t` is computed the same way and comes out
//! with the opposite sign.

use std::rc::Rc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conjugate::{
    endpoint_status, search_instants, ConjugateConfig, ConjugateInstant, InstantSearch,
};
use crate::error::{Error, Result};
use crate::linalg::{inertia, symmetric_eigenvalues, ComplexMatrix, Inertia, Matrix};
use crate::model::{Family, MorseSturmSystem};
use crate::propagator::shooting_trajectory_real;
use crate::scalar::{simpson_weights, Real};
use crate::winding::{winding_number, Contour};

pub const DEFAULT_GALERKIN_MODES: usize = 64;
pub const MIN_GALERKIN_MODES: usize = 8;
pub const DEFAULT_QUAD_POINTS: usize = 1024;
pub const DEFAULT_STABILIZATION_WINDOW: usize = 2;
pub const MAX_DOUBLINGS: usize = 6;
/// A crossing is regular when every eigenvalue of its (L²-normalized) form
/// exceeds this fraction of `max_x ‖Ṡ_t(x)‖_F` in modulus.
pub const CROSSING_REGULARITY_TOL: f64 = 1e-8;
/// Shift tried first when the unshifted path has an irregular crossing.
pub const ESCALATION_DELTA: f64 = 1e-3;
pub const DELTA_RETRY_FACTORS: [f64; 2] = [0.37, 0.61];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GalerkinConfig {
    /// Sine modes per component; the matrices are `nN × nN`.
    pub n_modes: usize,
    /// Composite-Simpson panels for the profile integrals.
    pub quad_points: usize,
    /// Consecutive mode counts whose inertia differences must agree.
    pub stabilization_window: usize,
}

impl Default for GalerkinConfig {
    fn default() -> Self {
        Self {
            n_modes: DEFAULT_GALERKIN_MODES,
            quad_points: DEFAULT_QUAD_POINTS,
            stabilization_window: DEFAULT_STABILIZATION_WINDOW,
        }
    }
}

impl GalerkinConfig {
    pub fn with_modes(n_modes: usize) -> Self {
        Self {
            n_modes,
            quad_points: DEFAULT_QUAD_POINTS.max(4 * n_modes),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes < MIN_GALERKIN_MODES {
            return Err(Error::InvalidConfig(format!(
                "Galerkin modes {} below minimum {MIN_GALERKIN_MODES}",
                self.n_modes
            )));
        }
        if self.quad_points < 4 * self.n_modes {
            return Err(Error::InvalidConfig(format!(
                "quadrature panels {} below 4N = {}",
                self.quad_points,
                4 * self.n_modes
            )));
        }
        if self.stabilization_window == 0 {
            return Err(Error::InvalidConfig(
                "stabilization window must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Even panel count used at `modes` sine modes.
    fn panels(&self, modes: usize) -> usize {
        let q = self.quad_points.max(4 * modes);
        q + q % 2
    }
}

/// `c_m = ∫₀¹ (S_t(x) + δI) cos(mπx) dx` for `m = 0..=2N`, row-major `n×n` each.
fn cosine_moments<T: Real>(
    family: &Family<'_, T>,
    t: T,
    modes: usize,
    panels: usize,
) -> Vec<Vec<T>> {
    let n = family.n();
    let nn = n * n;
    let weights = simpson_weights::<T>(panels);
    let mut samples = vec![T::zero(); (panels + 1) * nn];
    for (j, chunk) in samples.chunks_mut(nn).enumerate() {
        let x = T::from_usize_lossy(j) / T::from_usize_lossy(panels);
        family.real_into(t, x, chunk);
    }
    // cos(mπ j/Q) depends on m·j modulo 2Q only
    let period = 2 * panels;
    let table: Vec<T> = (0..period)
        .map(|r| (T::PI() * T::from_usize_lossy(r) / T::from_usize_lossy(panels)).cos())
        .collect();
    (0..=2 * modes)
        .map(|m| {
            let mut acc = vec![T::zero(); nn];
            for (j, chunk) in samples.chunks(nn).enumerate() {
                let c = weights[j] * table[(m * j) % period];
                for (a, &s) in acc.iter_mut().zip(chunk) {
                    *a += c * s;
                }
            }
            acc
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Form {
    /// `A_t` in the L²-orthonormal basis `√2 sin(kπx) e_i`.
    Strong,
    /// `L_t` in the H¹₀-orthonormal basis `√2 sin(kπx) e_i / (kπ)`.
    Riesz,
}

fn assemble<T: Real>(
    family: &Family<'_, T>,
    t: T,
    modes: usize,
    panels: usize,
    form: Form,
) -> Matrix<T> {
    let n = family.n();
    let signs = family.system.signature.diagonal::<T>();
    let c = cosine_moments(family, t, modes, panels);
    let dim = n * modes;
    Matrix::from_fn(dim, dim, |r, s| {
        let (k, i) = (r / n + 1, r % n);
        let (l, j) = (s / n + 1, s % n);
        let integral = c[k.abs_diff(l)][i * n + j] - c[k + l][i * n + j];
        let kpi = T::from_usize_lossy(k) * T::PI();
        let lpi = T::from_usize_lossy(l) * T::PI();
        let diag = r == s;
        match form {
            Form::Strong => {
                let d = if diag {
                    -kpi * kpi * signs[i]
                } else {
                    T::zero()
                };
                d + integral
            }
            Form::Riesz => {
                let d = if diag { signs[i] } else { T::zero() };
                d - integral / (kpi * lpi)
            }
        }
    })
    .symmetrized()
}

/// Galerkin matrix of `A_t u = J u'' + S_t u` with `N` sine modes per component.
pub fn galerkin_strong<T: Real>(
    system: &MorseSturmSystem<T>,
    t: T,
    config: &GalerkinConfig,
) -> Result<Matrix<T>> {
    galerkin_strong_family(&Family::new(system), t, config)
}

pub fn galerkin_strong_family<T: Real>(
    family: &Family<'_, T>,
    t: T,
    config: &GalerkinConfig,
) -> Result<Matrix<T>> {
    config.validate()?;
    let n = config.n_modes;
    Ok(assemble(family, t, n, config.panels(n), Form::Strong))
}

/// Galerkin matrix of the form `q_t(u) = ∫⟨Ju',u'⟩ − ∫⟨S_t u,u⟩` in an
/// H¹₀-orthonormal sine basis.
pub fn galerkin_riesz<T: Real>(
    system: &MorseSturmSystem<T>,
    t: T,
    config: &GalerkinConfig,
) -> Result<Matrix<T>> {
    config.validate()?;
    let n = config.n_modes;
    Ok(assemble(
        &Family::new(system),
        t,
        n,
        config.panels(n),
        Form::Riesz,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct InertiaRow {
    #[serde(rename = "N")]
    pub n_modes: usize,
    pub n_minus_0: usize,
    pub n_minus_1: usize,
    pub diff: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StabilizedFlow {
    pub value: i64,
    #[serde(rename = "N_used")]
    pub n_used: usize,
    pub table: Vec<InertiaRow>,
}

fn endpoint_inertia<T: Real>(
    family: &Family<'_, T>,
    t: T,
    modes: usize,
    panels: usize,
    form: Form,
) -> Result<Inertia> {
    let m = assemble(family, t, modes, panels, form);
    let inr = inertia(&m)?;
    if inr.n_zero != 0 {
        return Err(Error::EndpointDegenerate {
            t: t.to_f64_lossy(),
            n_zero: inr.n_zero,
        });
    }
    Ok(inr)
}

/// Inertia difference at a single mode count.
pub fn inertia_row<T: Real>(
    family: &Family<'_, T>,
    modes: usize,
    config: &GalerkinConfig,
) -> Result<InertiaRow> {
    inertia_row_form(family, modes, config, Form::Strong)
}

fn inertia_row_form<T: Real>(
    family: &Family<'_, T>,
    modes: usize,
    config: &GalerkinConfig,
    form: Form,
) -> Result<InertiaRow> {
    let panels = config.panels(modes);
    let a = endpoint_inertia(family, T::zero(), modes, panels, form)?;
    let b = endpoint_inertia(family, T::one(), modes, panels, form)?;
    Ok(InertiaRow {
        n_modes: modes,
        n_minus_0: a.n_minus,
        n_minus_1: b.n_minus,
        diff: a.n_minus as i64 - b.n_minus as i64,
    })
}

fn stabilized<T: Real>(
    family: &Family<'_, T>,
    config: &GalerkinConfig,
    form: Form,
) -> Result<StabilizedFlow> {
    config.validate()?;
    let window = config.stabilization_window;
    let mut table: Vec<InertiaRow> = Vec::new();
    let mut modes = config.n_modes;
    for _ in 0..=MAX_DOUBLINGS {
        table.push(inertia_row_form(family, modes, config, form)?);
        if table.len() >= window {
            let recent = &table[table.len() - window..];
            if recent.iter().all(|r| r.diff == recent[0].diff) {
                return Ok(StabilizedFlow {
                    value: recent[0].diff,
                    n_used: modes,
                    table,
                });
            }
        }
        modes *= 2;
    }
    Err(Error::StabilizationFailure {
        history: table.iter().map(|r| (r.n_modes, r.diff)).collect(),
    })
}

/// `μ_spec = n_minus(A_0) − n_minus(A_1)` of the Galerkin truncations,
/// doubling `N` until the difference stabilizes.
pub fn spectral_index_inertia<T: Real>(
    system: &MorseSturmSystem<T>,
    config: &GalerkinConfig,
) -> Result<StabilizedFlow> {
    spectral_index_inertia_family(&Family::new(system), config)
}

/// As [`spectral_index_inertia`] for the shifted path `A_t + δ·id`.
pub fn spectral_index_inertia_family<T: Real>(
    family: &Family<'_, T>,
    config: &GalerkinConfig,
) -> Result<StabilizedFlow> {
    stabilized(family, config, Form::Strong)
}

/// Spectral flow of the Riesz-representation path `L_t`.
pub fn riesz_form_flow<T: Real>(
    system: &MorseSturmSystem<T>,
    config: &GalerkinConfig,
) -> Result<StabilizedFlow> {
    stabilized(&Family::new(system), config, Form::Riesz)
}

// ---------------------------------------------------------------------------
// Crossing forms

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossingDatum<T> {
    pub t: T,
    pub multiplicity: usize,
    /// `Q_ij = ∫⟨Ṡ_t u_i, u_j⟩ dx` with `u_i = b_t(x) v_i`.
    pub form_matrix: Vec<Vec<T>>,
    pub signature: i64,
    pub regular: bool,
    /// Smallest `|eigenvalue|` of the L²-normalized form over `max_x ‖Ṡ_t‖_F`.
    pub relative_gap: T,
}

/// Lower Cholesky factor of a small symmetric positive definite matrix.
fn cholesky<T: Real>(g: &Matrix<T>) -> Option<Matrix<T>> {
    let m = g.rows();
    let mut l = Matrix::<T>::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// `L⁻¹ Q L⁻ᵀ` by forward substitution on both sides.
fn congruence_by_inverse<T: Real>(l: &Matrix<T>, q: &Matrix<T>) -> Matrix<T> {
    let m = l.rows();
    let solve = |b: &Matrix<T>| {
        let mut x = b.clone();
        for c in 0..m {
            for i in 0..m {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
        }
        x
    };
    solve(&solve(q).transpose()).symmetrized()
}

/// Crossing form at a degenerate instant of the family.
pub fn crossing_datum<T: Real>(
    family: &Family<'_, T>,
    instant: &ConjugateInstant<T>,
    steps: usize,
) -> Result<CrossingDatum<T>> {
    let steps = steps + steps % 2;
    let n = family.n();
    let m = instant.kernel_basis.len();
    let trajectory = shooting_trajectory_real(family, instant.t, steps)?;
    let weights = simpson_weights::<T>(steps);
    let mut q = Matrix::<T>::zeros(m, m);
    let mut gram = Matrix::<T>::zeros(m, m);
    let mut sdot_scale = T::zero();
    for (k, b) in trajectory.iter().enumerate() {
        let x = T::from_usize_lossy(k) / T::from_usize_lossy(steps);
        let sdot = family.dt(instant.t, x)?;
        sdot_scale = sdot_scale.max(sdot.frobenius());
        let us: Vec<Vec<T>> = instant.kernel_basis.iter().map(|v| b.mul_vec(v)).collect();
        let sus: Vec<Vec<T>> = us.iter().map(|u| sdot.mul_vec(u)).collect();
        for i in 0..m {
            for j in 0..m {
                let dot = |a: &[T], c: &[T]| (0..n).map(|r| a[r] * c[r]).sum::<T>();
                q[(i, j)] += weights[k] * dot(&sus[i], &us[j]);
                gram[(i, j)] += weights[k] * dot(&us[i], &us[j]);
            }
        }
    }
    let q = q.symmetrized();
    let normalized = match cholesky(&gram.symmetrized()) {
        Some(l) => congruence_by_inverse(&l, &q),
        None => q.clone(),
    };
    let eig = symmetric_eigenvalues(&normalized)?;
    let min_abs = eig.iter().fold(T::infinity(), |a, e| a.min(e.abs()));
    let relative_gap = if sdot_scale > T::zero() {
        min_abs / sdot_scale
    } else {
        T::zero()
    };
    let pos = eig.iter().filter(|&&e| e > T::zero()).count() as i64;
    let neg = eig.iter().filter(|&&e| e < T::zero()).count() as i64;
    Ok(CrossingDatum {
        t: instant.t,
        multiplicity: m,
        form_matrix: (0..m).map(|i| q.row(i).to_vec()).collect(),
        signature: pos - neg,
        regular: relative_gap >= T::lit(CROSSING_REGULARITY_TOL),
        relative_gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossingFlow<T> {
    pub value: i64,
    pub delta_used: T,
    pub crossings: Vec<CrossingDatum<T>>,
    /// Every shift tried, in order.
    pub deltas_tried: Vec<T>,
}

/// Shifts tried for a requested `δ`: `δ` itself, then `0.37δ` and `0.61δ`;
/// an unshifted request escalates to [`ESCALATION_DELTA`] first.
pub fn delta_schedule<T: Real>(delta: T) -> Vec<T> {
    let mut out = vec![delta];
    let base = if delta == T::zero() {
        let e = T::lit(ESCALATION_DELTA);
        out.push(e);
        e
    } else {
        delta
    };
    out.extend(DELTA_RETRY_FACTORS.iter().map(|&f| base * T::lit(f)));
    out
}

/// `sfl(A^δ) = Σ sgn Γ(A^δ, t)` over the degenerate instants of the shifted
/// path, with kernels taken from `ker b_t`.
pub fn spectral_index_crossing<T: Real>(
    system: &MorseSturmSystem<T>,
    delta: T,
    config: &ConjugateConfig<T>,
) -> Result<CrossingFlow<T>> {
    spectral_index_crossing_reusing(system, delta, config, None)
}

/// [`spectral_index_crossing`] with an instant search of the unshifted path
/// already at hand; it stands in for the `δ = 0` search.
pub fn spectral_index_crossing_reusing<T: Real>(
    system: &MorseSturmSystem<T>,
    delta: T,
    config: &ConjugateConfig<T>,
    unshifted: Option<&InstantSearch<T>>,
) -> Result<CrossingFlow<T>> {
    let schedule = delta_schedule(delta);
    let mut tried = Vec::new();
    for &d in &schedule {
        tried.push(d);
        let family = Family::shifted(system, d);
        if !endpoint_status(&family, config.ode_steps)?.ok {
            continue;
        }
        let search = match unshifted {
            Some(known) if d == T::zero() => known.clone(),
            _ => search_instants(&family, config)?,
        };
        let crossings = search
            .instants
            .iter()
            .map(|inst| crossing_datum(&family, inst, config.ode_steps))
            .collect::<Result<Vec<_>>>()?;
        if crossings.iter().all(|c| c.regular) {
            return Ok(CrossingFlow {
                value: crossings.iter().map(|c| c.signature).sum(),
                delta_used: d,
                crossings,
                deltas_tried: tried,
            });
        }
    }
    Err(Error::CrossingIrregular {
        deltas: schedule.iter().map(|d| d.to_f64_lossy()).collect(),
    })
}

// ---------------------------------------------------------------------------
// Spectral report

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Inertia,
    Crossing,
    Both,
}

impl Method {
    pub fn uses_inertia(self) -> bool {
        matches!(self, Method::Inertia | Method::Both)
    }

    pub fn uses_crossing(self) -> bool {
        matches!(self, Method::Crossing | Method::Both)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inertia" => Ok(Method::Inertia),
            "crossing" => Ok(Method::Crossing),
            "both" => Ok(Method::Both),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralConfig<T> {
    pub galerkin: GalerkinConfig,
    pub delta: T,
    pub method: Method,
    pub conjugate: ConjugateConfig<T>,
}

impl<T: Real> Default for SpectralConfig<T> {
    fn default() -> Self {
        Self {
            galerkin: GalerkinConfig::default(),
            delta: T::zero(),
            method: Method::Both,
            conjugate: ConjugateConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralReport<T> {
    pub mu_spec_inertia: Option<i64>,
    pub mu_spec_crossing: Option<i64>,
    #[serde(rename = "sfl_L")]
    pub sfl_l: Option<i64>,
    pub delta_used: Option<T>,
    #[serde(rename = "N_used")]
    pub n_used: Option<usize>,
    pub crossings: Vec<CrossingDatum<T>>,
    pub inertia_table: Vec<InertiaRow>,
    pub riesz_table: Vec<InertiaRow>,
    /// Why the crossing method gave no value, when it was requested.
    pub crossing_failure: Option<String>,
}

impl<T> SpectralReport<T> {
    /// The authoritative spectral index: inertia when computed, else crossings.
    pub fn mu_spec(&self) -> Option<i64> {
        self.mu_spec_inertia.or(self.mu_spec_crossing)
    }
}

/// Spectral index by the selected methods, plus the Riesz-path flow.
///
/// A failing crossing method is recorded in the report when the inertia
/// method is also selected; the inertia method stays authoritative.
pub fn spectral_index<T: Real>(
    system: &MorseSturmSystem<T>,
    config: &SpectralConfig<T>,
) -> Result<SpectralReport<T>> {
    spectral_index_reusing(system, config, None)
}

/// [`spectral_index`] reusing an instant search of the unshifted path, as
/// produced by the conjugate index with the same scan settings.
pub fn spectral_index_reusing<T: Real>(
    system: &MorseSturmSystem<T>,
    config: &SpectralConfig<T>,
    unshifted: Option<&InstantSearch<T>>,
) -> Result<SpectralReport<T>> {
    let mut report = SpectralReport {
        mu_spec_inertia: None,
        mu_spec_crossing: None,
        sfl_l: None,
        delta_used: None,
        n_used: None,
        crossings: Vec::new(),
        inertia_table: Vec::new(),
        riesz_table: Vec::new(),
        crossing_failure: None,
    };
    if config.method.uses_inertia() {
        let flow = spectral_index_inertia(system, &config.galerkin)?;
        let riesz = riesz_form_flow(system, &config.galerkin)?;
        report.mu_spec_inertia = Some(flow.value);
        report.n_used = Some(flow.n_used);
        report.inertia_table = flow.table;
        report.sfl_l = Some(riesz.value);
        report.riesz_table = riesz.table;
    }
    if config.method.uses_crossing() {
        match spectral_index_crossing_reusing(system, config.delta, &config.conjugate, unshifted) {
            Ok(flow) => {
                report.mu_spec_crossing = Some(flow.value);
                report.delta_used = Some(flow.delta_used);
                report.crossings = flow.crossings;
            }
            Err(e @ Error::CrossingIrregular { .. }) if config.method.uses_inertia() => {
                report.crossing_failure = Some(e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Integration by parts

/// `u(x) = Σ a · sin(kπx) e_i` over terms `(k, i, a)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SineTrial<T> {
    pub terms: Vec<(usize, usize, T)>,
}

impl<T: Real> SineTrial<T> {
    pub fn single(k: usize, i: usize) -> Self {
        Self {
            terms: vec![(k, i, T::one())],
        }
    }

    /// Value and first two derivatives at `x`, each an `n`-vector.
    fn jet(&self, n: usize, x: T) -> [Vec<T>; 3] {
        let mut out = [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]];
        for &(k, i, a) in &self.terms {
            let w = T::from_usize_lossy(k) * T::PI();
            let (s, c) = (w * x).sin_cos();
            out[0][i] += a * s;
            out[1][i] += a * w * c;
            out[2][i] -= a * w * w * s;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegrationByParts<T> {
    pub t: T,
    /// `∫⟨Ju',v'⟩ − ∫⟨(S_t + δ)u, v⟩`.
    pub weak: T,
    /// `−∫⟨Ju'' + (S_t + δ)u, v⟩`.
    pub strong: T,
    pub residual: T,
}

/// Both sides of `⟨L_t u, v⟩_{H¹₀} = −⟨A_t u, v⟩_{L²}` by Simpson quadrature.
pub fn integration_by_parts<T: Real>(
    family: &Family<'_, T>,
    t: T,
    u: &SineTrial<T>,
    v: &SineTrial<T>,
    panels: usize,
) -> IntegrationByParts<T> {
    let panels = panels.max(2) + panels % 2;
    let n = family.n();
    let signs = family.system.signature.diagonal::<T>();
    let weights = simpson_weights::<T>(panels);
    let mut s = vec![T::zero(); n * n];
    let (mut weak, mut strong) = (T::zero(), T::zero());
    for (j, &w) in weights.iter().enumerate() {
        let x = T::from_usize_lossy(j) / T::from_usize_lossy(panels);
        family.real_into(t, x, &mut s);
        let [u0, u1, u2] = u.jet(n, x);
        let [v0, v1, _] = v.jet(n, x);
        let mut su_v = T::zero();
        let mut ju1_v1 = T::zero();
        let mut ju2_v = T::zero();
        for r in 0..n {
            let su: T = (0..n).map(|c| s[r * n + c] * u0[c]).sum();
            su_v += su * v0[r];
            ju1_v1 += signs[r] * u1[r] * v1[r];
            ju2_v += signs[r] * u2[r] * v0[r];
        }
        weak += w * (ju1_v1 - su_v);
        strong -= w * (ju2_v + su_v);
    }
    IntegrationByParts {
        t,
        weak,
        strong,
        residual: (weak - strong).abs(),
    }
}

// ---------------------------------------------------------------------------
// Axioms on finite-dimensional paths

/// A continuous path of real symmetric matrices on `[0, 1]`.
#[derive(Clone)]
pub struct SymmetricPath {
    pub dim: usize,
    f: Rc<dyn Fn(f64) -> Matrix<f64>>,
}

impl std::fmt::Debug for SymmetricPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymmetricPath")
            .field("dim", &self.dim)
            .finish()
    }
}

impl SymmetricPath {
    pub fn new(dim: usize, f: impl Fn(f64) -> Matrix<f64> + 'static) -> Self {
        Self { dim, f: Rc::new(f) }
    }

    pub fn at(&self, t: f64) -> Matrix<f64> {
        (self.f)(t)
    }

    pub fn constant(m: Matrix<f64>) -> Self {
        Self::new(m.rows(), move |_| m.clone())
    }

    /// The `1×1` path `arctan(t − ½)`.
    pub fn arctan() -> Self {
        Self::new(1, |t| Matrix::from_vec(1, 1, vec![(t - 0.5).atan()]))
    }

    /// `(1−t) A₀ + t A₁ + t(1−t) C`.
    pub fn quadratic(a0: Matrix<f64>, a1: Matrix<f64>, c: Matrix<f64>) -> Self {
        Self::new(a0.rows(), move |t| {
            a0.scale(1.0 - t)
                .add(&a1.scale(t))
                .add(&c.scale(t * (1.0 - t)))
        })
    }

    pub fn direct_sum(&self, other: &SymmetricPath) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let (p, q) = (self.dim, other.dim);
        Self::new(p + q, move |t| {
            let (ma, mb) = (a.at(t), b.at(t));
            Matrix::from_fn(p + q, p + q, |i, j| match (i < p, j < p) {
                (true, true) => ma[(i, j)],
                (false, false) => mb[(i - p, j - p)],
                _ => 0.0,
            })
        })
    }

    /// The restriction to `[a, b]`, reparameterized over `[0, 1]`.
    pub fn restrict(&self, a: f64, b: f64) -> Self {
        let p = self.clone();
        Self::new(self.dim, move |t| p.at(a + (b - a) * t))
    }

    /// `(1−λ) self + λ other`.
    pub fn blend(&self, other: &SymmetricPath, lambda: f64) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(self.dim, move |t| {
            a.at(t).scale(1.0 - lambda).add(&b.at(t).scale(lambda))
        })
    }
}

/// `n_minus(A(0)) − n_minus(A(1))`; endpoints must be invertible.
pub fn path_flow_inertia(path: &SymmetricPath) -> Result<i64> {
    let mut n_minus = [0usize; 2];
    for (slot, t) in [0.0, 1.0].into_iter().enumerate() {
        let inr = inertia(&path.at(t))?;
        if inr.n_zero != 0 {
            return Err(Error::EndpointDegenerate {
                t,
                n_zero: inr.n_zero,
            });
        }
        n_minus[slot] = inr.n_minus;
    }
    Ok(n_minus[0] as i64 - n_minus[1] as i64)
}

/// Winding of `det(A(clamp(t)) + i s I)` around `[0, 1]`.
pub fn path_flow_winding(path: &SymmetricPath) -> Result<i64> {
    let contour = Contour::around_unit_interval(0.5)?;
    let dim = path.dim;
    let clutching = |z: Complex<f64>| {
        let mut m: ComplexMatrix<f64> = path.at(z.re.clamp(0.0, 1.0)).to_complex();
        for i in 0..dim {
            m[(i, i)].im += z.im;
        }
        crate::linalg::determinant(&m)
    };
    Ok(winding_number(clutching, &contour, None)?.winding)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AxiomOutcome {
    pub axiom: String,
    pub cases: usize,
    pub passed: bool,
    pub failures: Vec<String>,
}

fn flows(path: &SymmetricPath) -> Result<(i64, i64)> {
    Ok((path_flow_inertia(path)?, path_flow_winding(path)?))
}

fn random_symmetric(rng: &mut ChaCha8Rng, dim: usize, bound: f64) -> Matrix<f64> {
    let mut m = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            let v = rng.gen_range(-bound..=bound);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn min_abs_eigenvalue(m: &Matrix<f64>) -> f64 {
    symmetric_eigenvalues(m)
        .map(|e| e.iter().fold(f64::INFINITY, |a, v| a.min(v.abs())))
        .unwrap_or(0.0)
}

fn random_invertible(rng: &mut ChaCha8Rng, dim: usize) -> Matrix<f64> {
    loop {
        let m = random_symmetric(rng, dim, 2.0);
        if min_abs_eigenvalue(&m) > 0.05 {
            return m;
        }
    }
}

fn random_path(rng: &mut ChaCha8Rng) -> SymmetricPath {
    let dim = rng.gen_range(2..=5);
    let a0 = random_invertible(rng, dim);
    let a1 = random_invertible(rng, dim);
    SymmetricPath::quadratic(a0, a1, random_symmetric(rng, dim, 4.0))
}

struct AxiomCheck {
    name: &'static str,
    cases: usize,
    failures: Vec<String>,
}

impl AxiomCheck {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: Vec::new(),
        }
    }

    fn expect(&mut self, label: String, got: (i64, i64), want: i64) {
        self.cases += 1;
        if got.0 != want || got.1 != want {
            self.failures.push(format!(
                "{label}: inertia route {}, winding route {}, expected {want}",
                got.0, got.1
            ));
        }
    }

    fn finish(self) -> AxiomOutcome {
        AxiomOutcome {
            axiom: self.name.to_string(),
            cases: self.cases,
            passed: self.failures.is_empty(),
            failures: self.failures,
        }
    }
}

/// Checks the spectral-flow axioms on finite-dimensional symmetric paths,
/// where the flow is computed both as an inertia difference and as the
/// winding of `det(A(t) + isI)`. Each randomized axiom runs `cases` seeded
/// random paths.
pub fn axiom_suite(seed: u64, cases: usize) -> Result<Vec<AxiomOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diag =
        |v: &[f64]| Matrix::from_fn(v.len(), v.len(), |i, j| if i == j { v[i] } else { 0.0 });

    let mut constant = AxiomCheck::new("constant");
    constant.expect(
        "diag(1, -1)".into(),
        flows(&SymmetricPath::constant(diag(&[1.0, -1.0])))?,
        0,
    );
    for k in 0..cases {
        let dim = rng.gen_range(1..=5);
        let m = random_invertible(&mut rng, dim);
        constant.expect(
            format!("random constant #{k}"),
            flows(&SymmetricPath::constant(m))?,
            0,
        );
    }

    let mut normalization = AxiomCheck::new("normalization");
    normalization.expect(
        "arctan(t - 1/2)".into(),
        flows(&SymmetricPath::arctan())?,
        1,
    );

    let mut direct_sum = AxiomCheck::new("direct_sum");
    direct_sum.expect(
        "arctan + diag(-3)".into(),
        flows(&SymmetricPath::arctan().direct_sum(&SymmetricPath::constant(diag(&[-3.0]))))?,
        1,
    );
    for k in 0..cases {
        let (p, q) = (random_path(&mut rng), random_path(&mut rng));
        let (fp, fq) = (flows(&p)?, flows(&q)?);
        direct_sum.expect(format!("random pair #{k} (left)"), fp, fp.0);
        direct_sum.expect(format!("random pair #{k} (right)"), fq, fq.0);
        direct_sum.expect(
            format!("random pair #{k} (sum)"),
            flows(&p.direct_sum(&q))?,
            fp.0 + fq.0,
        );
    }

    let mut concatenation = AxiomCheck::new("concatenation");
    let mut k = 0;
    while k < cases {
        let p = random_path(&mut rng);
        if min_abs_eigenvalue(&p.at(0.5)) < 1e-3 {
            continue;
        }
        let whole = flows(&p)?;
        let first = flows(&p.restrict(0.0, 0.5))?;
        let second = flows(&p.restrict(0.5, 1.0))?;
        concatenation.expect(format!("random path #{k} (whole)"), whole, whole.0);
        concatenation.expect(format!("random path #{k} (first half)"), first, first.0);
        concatenation.expect(
            format!("random path #{k} (halves)"),
            second,
            whole.0 - first.0,
        );
        k += 1;
    }

    let mut homotopy = AxiomCheck::new("homotopy");
    for k in 0..cases {
        let dim = rng.gen_range(2..=5);
        let a0 = random_invertible(&mut rng, dim);
        let a1 = random_invertible(&mut rng, dim);
        let p =
            SymmetricPath::quadratic(a0.clone(), a1.clone(), random_symmetric(&mut rng, dim, 4.0));
        let q = SymmetricPath::quadratic(a0, a1, random_symmetric(&mut rng, dim, 4.0));
        let reference = flows(&p)?.0;
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            homotopy.expect(
                format!("random homotopy #{k} at lambda = {lambda}"),
                flows(&p.blend(&q, lambda))?,
                reference,
            );
        }
    }

    Ok(vec![
        constant.finish(),
        normalization.finish(),
        direct_sum.finish(),
        concatenation.finish(),
        homotopy.finish(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn kappa() -> f64 {
        (2.5 * PI).powi(2)
    }

    #[test]
    fn flat_strong_matrix_is_minus_laplacian_spectrum() {
        let sys = MorseSturmSystem::const_diag(0, vec![0.0]).unwrap();
        let m = galerkin_strong(&sys, 0.7, &GalerkinConfig::with_modes(8)).unwrap();
        for k in 0..8 {
            let want = -((k + 1) as f64 * PI).powi(2);
            assert!((m[(k, k)] - want).abs() < 1e-9 * want.abs());
        }
        assert!(
            m.sub(&Matrix::from_fn(8, 8, |i, j| if i == j {
                m[(i, i)]
            } else {
                0.0
            }))
            .max_abs::<f64>()
                < 1e-12
        );
    }

    #[test]
    fn constant_profile_is_diagonal_in_sine_basis() {
        let k = kappa();
        let sys = MorseSturmSystem::const_diag(0, vec![k]).unwrap();
        let m = galerkin_strong(&sys, 1.0, &GalerkinConfig::with_modes(10)).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j {
                    k - ((i + 1) as f64 * PI).powi(2)
                } else {
                    0.0
                };
                assert!(
                    (m[(i, j)] - want).abs() < 1e-9,
                    "({i},{j}) {} vs {want}",
                    m[(i, j)]
                );
            }
        }
        let inr = inertia(&m).unwrap();
        assert_eq!((inr.n_minus, inr.n_zero, inr.n_plus), (8, 0, 2));
    }

    #[test]
    fn lorentzian_flat_blocks_alternate_sign() {
        let sys = MorseSturmSystem::const_diag(1, vec![0.0, 0.0]).unwrap();
        let m = galerkin_strong(&sys, 0.3, &GalerkinConfig::with_modes(8)).unwrap();
        assert!((m[(0, 0)] + PI * PI).abs() < 1e-9);
        assert!((m[(1, 1)] - PI * PI).abs() < 1e-9);
        assert!((m[(3, 3)] - 4.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn scalar_spectral_index_is_two() {
        let sys = MorseSturmSystem::const_diag(0, vec![kappa()]).unwrap();
        let flow = spectral_index_inertia(&sys, &GalerkinConfig::default()).unwrap();
        assert_eq!(flow.value, 2);
        assert_eq!(
            riesz_form_flow(&sys, &GalerkinConfig::default())
                .unwrap()
                .value,
            -2
        );
    }

    #[test]
    fn crossing_route_on_scalar_and_lorentzian() {
        let k = kappa();
        let cfg = ConjugateConfig::default();
        let scalar = MorseSturmSystem::const_diag(0, vec![k]).unwrap();
        let flow = spectral_index_crossing(&scalar, 0.0, &cfg).unwrap();
        assert_eq!(flow.value, 2);
        assert_eq!(flow.delta_used, 0.0);
        assert!(flow.crossings.iter().all(|c| c.signature == 1 && c.regular));

        let lorentz = MorseSturmSystem::const_diag(1, vec![k, -k]).unwrap();
        let flow = spectral_index_crossing(&lorentz, 0.0, &cfg).unwrap();
        assert_eq!(flow.value, 0);
        assert_eq!(flow.crossings.len(), 2);
        assert!(flow
            .crossings
            .iter()
            .all(|c| c.signature == 0 && c.multiplicity == 2));
    }

    #[test]
    fn endpoint_degeneracy_is_reported() {
        let sys = MorseSturmSystem::const_diag(0, vec![PI * PI]).unwrap();
        let err = spectral_index_inertia(&sys, &GalerkinConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EndpointDegenerate { n_zero: 1, .. }));
    }

    #[test]
    fn delta_schedule_escalates_from_zero() {
        assert_eq!(delta_schedule(0.0), vec![0.0, 1e-3, 0.37e-3, 0.61e-3]);
        let s: Vec<f64> = delta_schedule(2e-3);
        assert_eq!(s.len(), 3);
        assert!((s[1] - 0.74e-3).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(GalerkinConfig::with_modes(4).validate().is_err());
        let bad = GalerkinConfig {
            n_modes: 64,
            quad_points: 100,
            stabilization_window: 2,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn integration_by_parts_on_orthogonal_components() {
        let sys = MorseSturmSystem::const_diag(1, vec![3.0, -7.0]).unwrap();
        let fam = Family::new(&sys);
        let r = integration_by_parts(
            &fam,
            0.6,
            &SineTrial::single(2, 0),
            &SineTrial::single(3, 1),
            2048,
        );
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn arctan_and_constant_paths() {
        assert_eq!(flows(&SymmetricPath::arctan()).unwrap(), (1, 1));
        let c = SymmetricPath::constant(Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, -1.0]));
        assert_eq!(flows(&c).unwrap(), (0, 0));
    }

    #[test]
    fn axiom_suite_passes_small() {
        let out = axiom_suite(11, 3).unwrap();
        assert_eq!(out.len(), 5);
        for o in &out {
            assert!(o.passed, "{:?}", o);
        }
    }
}
