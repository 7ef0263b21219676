//! Conjugate instants on the real axis and the conjugate index.
//!
//! A real `t ∈ (0, 1]` is a conjugate instant when `b_t` is singular. The
//! conjugate index is the winding number of `z ↦ det b_z` around a contour
//! enclosing `[0, 1]`; off the real axis `b_z` is always invertible.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{determinant, svd, Matrix, Svd};
use crate::model::{ComplexParameter, Family, MorseSturmSystem};
use crate::propagator::{shooting_matrix, shooting_matrix_real, DEFAULT_STEPS};
use crate::scalar::{median, Real};
use crate::winding::{
    winding_number, Contour, WindingTrace, DEFAULT_CONTOUR_HEIGHT, DEFAULT_INITIAL_SAMPLES,
};

pub const DEFAULT_SCAN_GRID: usize = 512;
pub const MIN_SCAN_GRID: usize = 64;
/// Singular values below this fraction of `max(σ_max(b_t), scan scale)` count as zero.
pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-6;
pub const ROOT_TOLERANCE: f64 = 1e-10;
/// Roots closer than this are reported as an unresolved cluster.
pub const CLUSTER_DISTANCE: f64 = 1e-6;
/// `1` is accepted as non-conjugate when `|det b_1|` exceeds this times the scale.
pub const ENDPOINT_RELATIVE_TOL: f64 = 1e-8;
const ENDPOINT_SCALE_GRID: usize = 32;
pub const OFFAXIS_RELATIVE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConjugateConfig<T> {
    pub contour_height: T,
    pub initial_samples: usize,
    pub ode_steps: usize,
    pub grid_size: usize,
    pub rank_threshold: T,
}

impl<T: Real> Default for ConjugateConfig<T> {
    fn default() -> Self {
        Self {
            contour_height: T::lit(DEFAULT_CONTOUR_HEIGHT),
            initial_samples: DEFAULT_INITIAL_SAMPLES,
            ode_steps: DEFAULT_STEPS,
            grid_size: DEFAULT_SCAN_GRID,
            rank_threshold: T::lit(DEFAULT_RANK_THRESHOLD),
        }
    }
}

impl<T: Real> ConjugateConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < MIN_SCAN_GRID {
            return Err(Error::InvalidConfig(format!(
                "scan grid {} below minimum {MIN_SCAN_GRID}",
                self.grid_size
            )));
        }
        if !(self.rank_threshold > T::zero() && self.rank_threshold < T::one()) {
            return Err(Error::InvalidConfig(format!(
                "rank threshold {} outside (0, 1)",
                self.rank_threshold
            )));
        }
        self.contour()?;
        Ok(())
    }

    pub fn contour(&self) -> Result<Contour<T>> {
        Contour::around_unit_interval(self.contour_height)?
            .with_initial_samples(self.initial_samples)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EndpointStatus<T> {
    pub ok: bool,
    pub det_b1: T,
    /// Median `|det b_t|` over a coarse grid of `(0, 1]`.
    pub scale: T,
    /// `|det b_1| / scale`.
    pub margin: T,
}

impl<T: Real> EndpointStatus<T> {
    pub fn into_result(self) -> Result<Self> {
        if self.ok {
            Ok(self)
        } else {
            Err(Error::EndpointConjugate {
                det: self.det_b1.abs().to_f64_lossy(),
                scale: self.scale.to_f64_lossy(),
            })
        }
    }
}

pub fn endpoint_status<T: Real>(family: &Family<'_, T>, steps: usize) -> Result<EndpointStatus<T>> {
    let mut dets = Vec::with_capacity(ENDPOINT_SCALE_GRID);
    for k in 1..=ENDPOINT_SCALE_GRID {
        let t = T::from_usize_lossy(k) / T::from_usize_lossy(ENDPOINT_SCALE_GRID);
        dets.push(determinant(&shooting_matrix_real(family, t, steps)?)?);
    }
    let det_b1 = dets[ENDPOINT_SCALE_GRID - 1];
    let mods: Vec<T> = dets.iter().map(|d| d.abs()).collect();
    let scale = median(&mods).unwrap_or(T::one());
    let margin = if scale > T::zero() {
        det_b1.abs() / scale
    } else {
        T::zero()
    };
    Ok(EndpointStatus {
        ok: margin > T::lit(ENDPOINT_RELATIVE_TOL),
        det_b1,
        scale,
        margin,
    })
}

/// Whether `1` is not a conjugate instant of the system.
pub fn endpoint_check<T: Real>(system: &MorseSturmSystem<T>) -> Result<bool> {
    Ok(endpoint_status(&Family::new(system), DEFAULT_STEPS)?.ok)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanSample<T> {
    pub t: T,
    pub det: T,
    pub sigma_min: T,
    pub sigma_max: T,
}

impl<T: Real> ScanSample<T> {
    /// `σ_min` against `max(σ_max, scale)`; the floor keeps the measure
    /// meaningful when every singular value vanishes at once.
    fn ratio(&self, scale: T) -> T {
        let reference = self.sigma_max.max(scale);
        if reference > T::zero() {
            self.sigma_min / reference
        } else {
            T::zero()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugateInstant<T> {
    pub t: T,
    pub multiplicity: usize,
    /// Orthonormal basis of `ker b_t`.
    pub kernel_basis: Vec<Vec<T>>,
    /// `|det b_t|` at the located root.
    pub det_residual: T,
    pub singular_values: Vec<T>,
    /// `max_i |b_t(1) v_i|`: endpoint value of the Jacobi fields `b_t(x) v_i`.
    pub jacobi_residual: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstantSearch<T> {
    pub instants: Vec<ConjugateInstant<T>>,
    pub warnings: Vec<String>,
    pub scan: Vec<ScanSample<T>>,
}

fn sample_b<T: Real>(family: &Family<'_, T>, t: T, steps: usize) -> Result<(Matrix<T>, T, Svd<T>)> {
    let b = shooting_matrix_real(family, t, steps)?;
    let det = determinant(&b)?;
    let dec = svd(&b)?;
    Ok((b, det, dec))
}

fn scan_sample<T: Real>(t: T, det: T, dec: &Svd<T>) -> ScanSample<T> {
    ScanSample {
        t,
        det,
        sigma_min: *dec.singular_values.last().unwrap_or(&T::zero()),
        sigma_max: *dec.singular_values.first().unwrap_or(&T::zero()),
    }
}

fn bisect_sign_change<T: Real>(
    family: &Family<'_, T>,
    mut lo: (T, T),
    mut hi: (T, T),
    steps: usize,
) -> Result<T> {
    let tol = T::lit(ROOT_TOLERANCE);
    while hi.0 - lo.0 >= tol {
        let mid = (lo.0 + hi.0) * T::lit(0.5);
        if mid <= lo.0 || mid >= hi.0 {
            break;
        }
        let d = determinant(&shooting_matrix_real(family, mid, steps)?)?;
        if (d < T::zero()) == (lo.1 < T::zero()) {
            lo = (mid, d);
        } else {
            hi = (mid, d);
        }
    }
    Ok((lo.0 + hi.0) * T::lit(0.5))
}

fn relative_sigma_min<T: Real>(family: &Family<'_, T>, t: T, steps: usize, scale: T) -> Result<T> {
    let (_, det, dec) = sample_b(family, t, steps)?;
    Ok(scan_sample(t, det, &dec).ratio(scale))
}

/// Golden-section minimization of the relative `σ_min(b_t)` on `[a, b]`.
fn golden_minimum<T: Real>(
    family: &Family<'_, T>,
    mut a: T,
    mut b: T,
    steps: usize,
    scale: T,
) -> Result<T> {
    let inv_phi = T::lit(0.5) * (T::lit(5.0).sqrt() - T::one());
    let tol = T::lit(ROOT_TOLERANCE);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = relative_sigma_min(family, c, steps, scale)?;
    let mut fd = relative_sigma_min(family, d, steps, scale)?;
    while b - a >= tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            if !(c > a && c < d) {
                break;
            }
            fc = relative_sigma_min(family, c, steps, scale)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            if !(d > c && d < b) {
                break;
            }
            fd = relative_sigma_min(family, d, steps, scale)?;
        }
    }
    Ok(if fc <= fd { c } else { d })
}

fn analyse_root<T: Real>(
    family: &Family<'_, T>,
    t: T,
    config: &ConjugateConfig<T>,
    scale: T,
    certified: bool,
) -> Result<Option<ConjugateInstant<T>>> {
    let (b, det, dec) = sample_b(family, t, config.ode_steps)?;
    let n = b.rows();
    let cut = config.rank_threshold * dec.singular_values[0].max(scale);
    let mut multiplicity = dec.singular_values.iter().filter(|&&s| s < cut).count();
    if multiplicity == 0 {
        if !certified {
            return Ok(None);
        }
        // a sign change of det b_t certifies a root even if rounding hides it
        multiplicity = 1;
    }
    let kernel_basis: Vec<Vec<T>> = (n - multiplicity..n)
        .map(|k| (0..n).map(|i| dec.v[(i, k)]).collect())
        .collect();
    let jacobi_residual = kernel_basis
        .iter()
        .map(|v| b.mul_vec(v).iter().map(|x| *x * *x).sum::<T>().sqrt())
        .fold(T::zero(), |a, r| a.max(r));
    Ok(Some(ConjugateInstant {
        t,
        multiplicity,
        kernel_basis,
        det_residual: det.abs(),
        singular_values: dec.singular_values,
        jacobi_residual,
    }))
}

/// Instants in `(0, 1]` where `b_t` of the family is singular.
///
/// Sign changes of `det b_t` are bisected; local minima of the relative
/// `σ_min` away from sign changes (even multiplicity) are refined by golden
/// section and kept when it falls below the rank threshold. Singular values
/// are measured against `max(σ_max(b_t), median σ_max over the scan)`.
/// Does not check the endpoint.
pub fn search_instants<T: Real>(
    family: &Family<'_, T>,
    config: &ConjugateConfig<T>,
) -> Result<InstantSearch<T>> {
    config.validate()?;
    let g = config.grid_size;
    let steps = config.ode_steps;
    let mut scan = Vec::with_capacity(g);
    for k in 1..=g {
        let t = T::from_usize_lossy(k) / T::from_usize_lossy(g);
        let (_, det, dec) = sample_b(family, t, steps)?;
        scan.push(scan_sample(t, det, &dec));
    }
    let sigma_maxes: Vec<T> = scan.iter().map(|s| s.sigma_max).collect();
    let scale = median(&sigma_maxes).unwrap_or(T::one());
    let sign_change: Vec<bool> = scan
        .windows(2)
        .map(|w| (w[0].det < T::zero()) != (w[1].det < T::zero()))
        .collect();

    let mut roots: Vec<(T, bool)> = Vec::new();
    for (k, &changes) in sign_change.iter().enumerate() {
        if changes {
            let lo = (scan[k].t, scan[k].det);
            let hi = (scan[k + 1].t, scan[k + 1].det);
            roots.push((bisect_sign_change(family, lo, hi, steps)?, true));
        }
    }
    for k in 1..g - 1 {
        if sign_change[k - 1] || sign_change[k] {
            continue;
        }
        let r = scan[k].ratio(scale);
        if r <= scan[k - 1].ratio(scale) && r < scan[k + 1].ratio(scale) {
            let t = golden_minimum(family, scan[k - 1].t, scan[k + 1].t, steps, scale)?;
            roots.push((t, false));
        }
    }
    roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut instants = Vec::new();
    for (t, certified) in roots {
        if let Some(inst) = analyse_root(family, t, config, scale, certified)? {
            instants.push(inst);
        }
    }
    let mut warnings = Vec::new();
    for w in instants.windows(2) {
        if w[1].t - w[0].t < T::lit(CLUSTER_DISTANCE) {
            warnings.push(format!(
                "unresolved cluster of conjugate instants near t = {} and t = {}",
                w[0].t, w[1].t
            ));
        }
    }
    Ok(InstantSearch {
        instants,
        warnings,
        scan,
    })
}

/// Conjugate instants of the system with their multiplicities.
pub fn find_conjugate_instants<T: Real>(
    system: &MorseSturmSystem<T>,
    grid_size: usize,
    rank_threshold: T,
) -> Result<Vec<ConjugateInstant<T>>> {
    let config = ConjugateConfig {
        grid_size,
        rank_threshold,
        ..ConjugateConfig::default()
    };
    let family = Family::new(system);
    endpoint_status(&family, config.ode_steps)?.into_result()?;
    Ok(search_instants(&family, &config)?.instants)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugateReport<T> {
    pub instants: Vec<ConjugateInstant<T>>,
    pub mu_con: i64,
    /// Sum of the multiplicities of all conjugate instants.
    pub classical_sum: usize,
    pub endpoint_ok: bool,
    pub endpoint: EndpointStatus<T>,
    /// Contour height and step count actually used (after any retry).
    pub contour_height: T,
    pub ode_steps: usize,
    pub winding_total_arg: T,
    pub winding_min_modulus: T,
    pub contour_points: usize,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub trace: WindingTrace<T>,
    #[serde(skip)]
    pub scan: Vec<ScanSample<T>>,
}

/// Winding of `det b_z` along the contour of `config`.
pub fn det_winding<T: Real>(
    family: &Family<'_, T>,
    contour: &Contour<T>,
    steps: usize,
) -> Result<WindingTrace<T>> {
    winding_number(
        |z: Complex<T>| determinant(&shooting_matrix(family, ComplexParameter::from(z), steps)?),
        contour,
        None,
    )
}

/// `μ_con` with instants, classical sum and the contour trace.
///
/// A degenerate contour is retried once with doubled steps and half the height.
pub fn conjugate_index<T: Real>(
    system: &MorseSturmSystem<T>,
    config: &ConjugateConfig<T>,
) -> Result<ConjugateReport<T>> {
    conjugate_index_family(&Family::new(system), config)
}

pub fn conjugate_index_family<T: Real>(
    family: &Family<'_, T>,
    config: &ConjugateConfig<T>,
) -> Result<ConjugateReport<T>> {
    config.validate()?;
    let endpoint = endpoint_status(family, config.ode_steps)?.into_result()?;
    let search = search_instants(family, config)?;

    let mut used = *config;
    let trace = match det_winding(family, &config.contour()?, config.ode_steps) {
        Err(Error::ContourDegenerate { .. }) => {
            used.ode_steps *= 2;
            used.contour_height = config.contour_height * T::lit(0.5);
            det_winding(family, &used.contour()?, used.ode_steps)?
        }
        other => other?,
    };
    let classical_sum = search.instants.iter().map(|i| i.multiplicity).sum();
    Ok(ConjugateReport {
        mu_con: trace.winding,
        classical_sum,
        endpoint_ok: endpoint.ok,
        endpoint,
        contour_height: used.contour_height,
        ode_steps: used.ode_steps,
        winding_total_arg: trace.total_arg,
        winding_min_modulus: trace.min_modulus,
        contour_points: trace.points.len(),
        warnings: search.warnings,
        instants: search.instants,
        trace,
        scan: search.scan,
    })
}

impl<T: Real> ConjugateReport<T> {
    /// The real-axis instant search behind this report.
    pub fn instant_search(&self) -> InstantSearch<T> {
        InstantSearch {
            instants: self.instants.clone(),
            warnings: self.warnings.clone(),
            scan: self.scan.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OffAxisSample<T> {
    pub t: T,
    pub s: T,
    pub modulus: T,
    /// `|det b_z|` over the median modulus of all samples.
    pub relative: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OffAxisReport<T> {
    pub samples: usize,
    pub min_modulus: T,
    pub median_modulus: T,
    pub min_relative: T,
    pub violations: Vec<OffAxisSample<T>>,
}

/// Samples `z = t + is` with `t ∈ [−0.5, 1.5]`, `|s| ∈ [0.05, 1]` and checks
/// that `det b_z` stays away from zero.
///
/// A sample is a violation when `|det b_z|` falls below
/// [`OFFAXIS_RELATIVE_TOL`] times the median modulus over all samples.
pub fn offaxis_invertibility_check<T: Real>(
    system: &MorseSturmSystem<T>,
    sample_count: usize,
    seed: u64,
    steps: usize,
) -> Result<OffAxisReport<T>> {
    let family = Family::new(system);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::with_capacity(sample_count);
    for _ in 0..sample_count {
        let t = T::lit(rng.gen_range(-0.5..=1.5));
        let magnitude: f64 = rng.gen_range(0.05..=1.0);
        let s = T::lit(if rng.gen_bool(0.5) {
            magnitude
        } else {
            -magnitude
        });
        let det = determinant(&shooting_matrix(
            &family,
            ComplexParameter::new(t, s),
            steps,
        )?)?;
        raw.push((t, s, det.norm()));
    }
    let mods: Vec<T> = raw.iter().map(|r| r.2).collect();
    let med = median(&mods).unwrap_or(T::one());
    let tol = T::lit(OFFAXIS_RELATIVE_TOL);
    let samples: Vec<OffAxisSample<T>> = raw
        .into_iter()
        .map(|(t, s, modulus)| OffAxisSample {
            t,
            s,
            modulus,
            relative: if med > T::zero() {
                modulus / med
            } else {
                T::zero()
            },
        })
        .collect();
    Ok(OffAxisReport {
        samples: samples.len(),
        min_modulus: mods.iter().copied().fold(T::infinity(), T::min),
        median_modulus: med,
        min_relative: samples
            .iter()
            .map(|s| s.relative)
            .fold(T::infinity(), T::min),
        violations: samples
            .iter()
            .filter(|s| !(s.relative > tol))
            .copied()
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn kappa() -> f64 {
        (2.5 * PI).powi(2)
    }

    #[test]
    fn flat_endpoint_is_fine_and_has_no_instants() {
        let sys = MorseSturmSystem::const_diag(1, vec![0.0, 0.0]).unwrap();
        assert!(endpoint_check(&sys).unwrap());
        let found = find_conjugate_instants(&sys, 64, 1e-6).unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn endpoint_conjugate_is_detected() {
        let sys = MorseSturmSystem::const_diag(0, vec![PI * PI]).unwrap();
        assert!(!endpoint_check(&sys).unwrap());
        let err = conjugate_index(&sys, &ConjugateConfig::default()).unwrap_err();
        assert!(err.is_endpoint_conjugate());
        let ok = MorseSturmSystem::const_diag(0, vec![kappa()]).unwrap();
        assert!(endpoint_check(&ok).unwrap());
    }

    #[test]
    fn scalar_instants_at_two_fifths_and_four_fifths() {
        let sys = MorseSturmSystem::const_diag(0, vec![kappa()]).unwrap();
        let found = find_conjugate_instants(&sys, 512, 1e-6).unwrap();
        assert_eq!(found.len(), 2);
        assert!((found[0].t - 0.4).abs() < 1e-8);
        assert!((found[1].t - 0.8).abs() < 1e-8);
        assert!(found.iter().all(|i| i.multiplicity == 1));
    }

    #[test]
    fn lorentzian_instants_have_multiplicity_two() {
        let k = kappa();
        let sys = MorseSturmSystem::const_diag(1, vec![k, -k]).unwrap();
        let found = find_conjugate_instants(&sys, 512, 1e-6).unwrap();
        assert_eq!(found.len(), 2);
        for (inst, t) in found.iter().zip([0.4, 0.8]) {
            assert!((inst.t - t).abs() < 1e-8, "{}", inst.t);
            assert_eq!(inst.multiplicity, 2);
            assert_eq!(inst.kernel_basis.len(), 2);
            assert!(inst.jacobi_residual < 1e-7);
        }
    }

    #[test]
    fn offaxis_determinant_at_a_conjugate_time() {
        // |sin ω / ω| with ω² = 0.16κ + 0.3i, evaluated independently
        let sys = MorseSturmSystem::const_diag(0, vec![kappa()]).unwrap();
        let b = shooting_matrix(&Family::new(&sys), ComplexParameter::new(0.4, 0.3), 2000).unwrap();
        let omega = Complex::new(0.16 * kappa(), 0.3).sqrt();
        let expected = omega.sin() / omega;
        assert!((b[(0, 0)] - expected).norm() < 1e-8);
        assert!(expected.norm() > 1e-3);
    }

    #[test]
    fn offaxis_check_on_flat_system() {
        let sys = MorseSturmSystem::const_diag(0, vec![0.0]).unwrap();
        let rep = offaxis_invertibility_check(&sys, 100, 7, 200).unwrap();
        assert_eq!(rep.samples, 100);
        assert!(rep.min_modulus > 0.0);
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn small_scan_grid_is_rejected() {
        let sys = MorseSturmSystem::const_diag(0, vec![1.0]).unwrap();
        assert!(matches!(
            find_conjugate_instants(&sys, 32, 1e-6),
            Err(Error::InvalidConfig(_))
        ));
    }
}
