//! End-to-end verification: both indices, their equality, and every
//! diagnostic identity along the way, collected into one report.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::conjugate::{
    conjugate_index, endpoint_status, offaxis_invertibility_check, ConjugateConfig,
    ConjugateReport, EndpointStatus, DEFAULT_RANK_THRESHOLD, DEFAULT_SCAN_GRID,
};
use crate::error::{Error, Result};
use crate::linalg::{determinant, ComplexMatrix};
use crate::model::{
    ComplexParameter, Family, MorseSturmSystem, ProfileSpec, SystemSpec, ValidationReport,
};
use crate::propagator::{propagate_family, shooting_matrix, DEFAULT_STEPS};
use crate::specflow::{
    axiom_suite, integration_by_parts, spectral_index_inertia, spectral_index_reusing,
    GalerkinConfig, InertiaRow, Method, SineTrial, SpectralConfig, SpectralReport,
    DEFAULT_GALERKIN_MODES, DEFAULT_QUAD_POINTS, DEFAULT_STABILIZATION_WINDOW,
};
use crate::winding::{winding_number, Contour, DEFAULT_CONTOUR_HEIGHT, DEFAULT_INITIAL_SAMPLES};

pub const SYMPLECTIC_TOL: f64 = 1e-8;
pub const INTEGRATION_BY_PARTS_TOL: f64 = 1e-8;
pub const JACOBI_FIELD_TOL: f64 = 1e-7;
pub const WINDING_RESIDUAL_TOL: f64 = 1e-6;
pub const DEFAULT_OFFAXIS_SAMPLES: usize = 200;
pub const DEFAULT_SYMPLECTIC_SAMPLES: usize = 20;
pub const DEFAULT_IBP_SAMPLES: usize = 5;
pub const DEFAULT_AXIOM_CASES: usize = 20;
const IBP_PANELS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

/// Every parameter of a verification run; echoed verbatim into reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub contour_height: f64,
    pub contour_samples: usize,
    pub ode_steps: usize,
    #[serde(rename = "galerkin_N")]
    pub galerkin_modes: usize,
    pub quad_points: usize,
    pub stabilization_window: usize,
    pub delta: f64,
    pub method: Method,
    pub scan_grid: usize,
    pub rank_threshold: f64,
    pub offaxis_samples: usize,
    pub symplectic_samples: usize,
    pub ibp_samples: usize,
    /// Also run the axiom suite and the clutching reductions.
    pub extended_checks: bool,
    pub seed: u64,
    pub format: OutputFormat,
    pub trace_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            contour_height: DEFAULT_CONTOUR_HEIGHT,
            contour_samples: DEFAULT_INITIAL_SAMPLES,
            ode_steps: DEFAULT_STEPS,
            galerkin_modes: DEFAULT_GALERKIN_MODES,
            quad_points: DEFAULT_QUAD_POINTS,
            stabilization_window: DEFAULT_STABILIZATION_WINDOW,
            delta: 0.0,
            method: Method::Both,
            scan_grid: DEFAULT_SCAN_GRID,
            rank_threshold: DEFAULT_RANK_THRESHOLD,
            offaxis_samples: DEFAULT_OFFAXIS_SAMPLES,
            symplectic_samples: DEFAULT_SYMPLECTIC_SAMPLES,
            ibp_samples: DEFAULT_IBP_SAMPLES,
            extended_checks: true,
            seed: 0,
            format: OutputFormat::Json,
            trace_dir: None,
        }
    }
}

impl RunConfig {
    pub fn conjugate_config(&self) -> ConjugateConfig<f64> {
        ConjugateConfig {
            contour_height: self.contour_height,
            initial_samples: self.contour_samples,
            ode_steps: self.ode_steps,
            grid_size: self.scan_grid,
            rank_threshold: self.rank_threshold,
        }
    }

    pub fn galerkin_config(&self) -> GalerkinConfig {
        GalerkinConfig {
            n_modes: self.galerkin_modes,
            quad_points: self.quad_points.max(4 * self.galerkin_modes),
            stabilization_window: self.stabilization_window,
        }
    }

    pub fn spectral_config(&self) -> SpectralConfig<f64> {
        SpectralConfig {
            galerkin: self.galerkin_config(),
            delta: self.delta,
            method: self.method,
            conjugate: self.conjugate_config(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delta must be a non-negative number, got {}",
                self.delta
            )));
        }
        if self.ode_steps < crate::propagator::MIN_STEPS {
            return Err(Error::InvalidConfig(format!(
                "ode steps {} below minimum {}",
                self.ode_steps,
                crate::propagator::MIN_STEPS
            )));
        }
        self.conjugate_config().validate()?;
        self.galerkin_config().validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub passed: bool,
    pub measure: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_most(measure: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            passed: measure <= threshold,
            measure,
            threshold,
            detail: detail.into(),
        }
    }

    fn equal(lhs: i64, rhs: i64, detail: impl Into<String>) -> Self {
        Self {
            passed: lhs == rhs,
            measure: (lhs - rhs).abs() as f64,
            threshold: 0.0,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified,
    TheoremViolated,
    CheckFailed,
    EndpointConjugate,
    NumericalFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Verified => 0,
            Status::EndpointConjugate => 2,
            Status::TheoremViolated | Status::CheckFailed | Status::NumericalFailure => 3,
        }
    }

    fn of_error(e: &Error) -> Self {
        if e.is_endpoint_conjugate() {
            Status::EndpointConjugate
        } else {
            Status::NumericalFailure
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexReport {
    pub system_digest: String,
    pub n: usize,
    pub nu: usize,
    pub validation: ValidationReport,
    pub mu_spec: Option<i64>,
    pub mu_con: Option<i64>,
    pub theorem_holds: bool,
    pub endpoint: Option<EndpointStatus<f64>>,
    pub conjugate: Option<ConjugateReport<f64>>,
    pub spectral: Option<SpectralReport<f64>>,
    pub checks: BTreeMap<String, Check>,
    pub config_echo: RunConfig,
    pub seed: u64,
    pub status: Status,
    pub exit_code: i32,
    pub message: Option<String>,
}

impl IndexReport {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.values().all(|c| c.passed)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn fail(&mut self, e: &Error) {
        self.status = Status::of_error(e);
        self.exit_code = self.status.exit_code();
        self.message = Some(e.to_string());
    }
}

/// SHA-256 of the compact JSON of the normalized (validated) system.
pub fn system_digest(system: &MorseSturmSystem<f64>) -> Result<String> {
    let json = serde_json::to_string(&SystemSpec::from_system(system))?;
    Ok(format!("{:x}", Sha256::digest(json.as_bytes())))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Largest `‖ΨᵀσΨ − σ‖_max / max(1, ‖Ψ‖²_max)` over seeded `z` samples.
pub fn symplectic_check(
    system: &MorseSturmSystem<f64>,
    samples: usize,
    seed: u64,
    steps: usize,
) -> Result<Check> {
    let family = Family::new(system);
    let mut rng = stream_rng(seed, 1);
    let mut worst = 0.0f64;
    let mut worst_abs = 0.0f64;
    for _ in 0..samples {
        let z = ComplexParameter::new(rng.gen_range(-0.25..=1.25), rng.gen_range(-1.0..=1.0));
        let r = propagate_family(&family, z, steps)?;
        let scale = r.psi_end.max_abs::<f64>().powi(2).max(1.0);
        worst = worst.max(r.symplectic_defect / scale);
        worst_abs = worst_abs.max(r.symplectic_defect);
    }
    Ok(Check::at_most(
        worst,
        SYMPLECTIC_TOL,
        format!("{samples} samples; largest absolute defect {worst_abs:e}"),
    ))
}

/// Largest `|⟨L_t u,v⟩ − (−⟨A_t u,v⟩)|` over seeded `(t, u, v)` samples.
pub fn integration_by_parts_check(
    system: &MorseSturmSystem<f64>,
    samples: usize,
    seed: u64,
) -> Check {
    let family = Family::new(system);
    let n = system.n();
    let mut rng = stream_rng(seed, 2);
    let mut worst = 0.0f64;
    for k in 0..samples {
        let t = rng.gen_range(0.0..=1.0);
        let (u, v) = if k == 0 {
            (SineTrial::single(2, 0), SineTrial::single(3, 1.min(n - 1)))
        } else {
            let mut random_trial = || SineTrial {
                terms: (0..3)
                    .map(|_| {
                        (
                            rng.gen_range(1..=4),
                            rng.gen_range(0..n),
                            rng.gen_range(-1.0..=1.0),
                        )
                    })
                    .collect(),
            };
            (random_trial(), random_trial())
        };
        worst = worst.max(integration_by_parts(&family, t, &u, &v, IBP_PANELS).residual);
    }
    Check::at_most(
        worst,
        INTEGRATION_BY_PARTS_TOL,
        format!("{samples} samples"),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ClutchingReductions {
    /// Winding of `det b_z`.
    pub det_b: i64,
    /// Winding of `det b_zᵀ`.
    pub det_b_transpose: i64,
    /// Winding of `det [[I, X_z], [0, −b_zᵀ]]` with `X_z` the upper-left block of `Ψ_z`.
    pub block_triangular: i64,
}

/// The three clutching windings that must coincide.
pub fn clutching_reductions(
    system: &MorseSturmSystem<f64>,
    contour: &Contour<f64>,
    steps: usize,
) -> Result<ClutchingReductions> {
    let family = Family::new(system);
    let n = system.n();
    let b = |z| shooting_matrix(&family, ComplexParameter::from(z), steps);
    let det_b = winding_number(|z| determinant(&b(z)?), contour, None)?.winding;
    let det_b_transpose =
        winding_number(|z| determinant(&b(z)?.transpose()), contour, None)?.winding;
    let block = |z| -> Result<ComplexMatrix<f64>> {
        let psi = propagate_family(&family, ComplexParameter::from(z), steps)?.psi_end;
        Ok(ComplexMatrix::from_fn(2 * n, 2 * n, |i, j| {
            match (i < n, j < n) {
                (true, true) => {
                    if i == j {
                        1.0.into()
                    } else {
                        0.0.into()
                    }
                }
                (true, false) => psi[(i, j - n)],
                (false, true) => 0.0.into(),
                (false, false) => -psi[(j - n, i)],
            }
        }))
    };
    let block_triangular = winding_number(|z| determinant(&block(z)?), contour, None)?.winding;
    Ok(ClutchingReductions {
        det_b,
        det_b_transpose,
        block_triangular,
    })
}

/// Computes both indices of a system file's contents and every diagnostic.
///
/// Input and configuration errors are returned as `Err`; failures of the
/// computation itself are recorded in the report's status.
pub fn verify(spec: &SystemSpec, config: &RunConfig) -> Result<IndexReport> {
    config.validate()?;
    let (system, validation) = spec.build::<f64>()?;
    let mut report = IndexReport {
        system_digest: system_digest(&system)?,
        n: system.n(),
        nu: system.nu(),
        validation,
        mu_spec: None,
        mu_con: None,
        theorem_holds: false,
        endpoint: None,
        conjugate: None,
        spectral: None,
        checks: BTreeMap::new(),
        config_echo: config.clone(),
        seed: config.seed,
        status: Status::Verified,
        exit_code: 0,
        message: None,
    };
    if let Err(e) = run_verification(&system, config, &mut report) {
        report.fail(&e);
        return Ok(report);
    }
    report.theorem_holds = report.mu_spec.is_some() && report.mu_spec == report.mu_con;
    report.status = if !report.theorem_holds {
        Status::TheoremViolated
    } else if !report.all_checks_pass() {
        Status::CheckFailed
    } else {
        Status::Verified
    };
    report.exit_code = report.status.exit_code();
    if report.status == Status::CheckFailed {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|(_, c)| !c.passed)
            .map(|(k, _)| k.as_str())
            .collect();
        report.message = Some(format!("failed checks: {}", failed.join(", ")));
    }
    Ok(report)
}

fn run_verification(
    system: &MorseSturmSystem<f64>,
    config: &RunConfig,
    report: &mut IndexReport,
) -> Result<()> {
    let family = Family::new(system);
    let endpoint = endpoint_status(&family, config.ode_steps)?;
    report.endpoint = Some(endpoint);
    endpoint.into_result()?;

    let conj = conjugate_index(system, &config.conjugate_config())?;
    report.mu_con = Some(conj.mu_con);
    let checks = &mut report.checks;
    checks.insert(
        "winding_residual".into(),
        Check::at_most(
            (conj.winding_total_arg / std::f64::consts::TAU - conj.mu_con as f64).abs(),
            WINDING_RESIDUAL_TOL,
            format!("{} contour points", conj.contour_points),
        ),
    );
    let jacobi = conj
        .instants
        .iter()
        .map(|i| i.jacobi_residual / i.singular_values[0].max(1.0))
        .fold(0.0, f64::max);
    checks.insert(
        "jacobi_fields".into(),
        Check::at_most(
            jacobi,
            JACOBI_FIELD_TOL,
            format!("{} instants", conj.instants.len()),
        ),
    );
    if system.nu() == 0 {
        checks.insert(
            "classical_sum".into(),
            Check::equal(
                conj.mu_con,
                conj.classical_sum as i64,
                "mu_con against the sum of multiplicities",
            ),
        );
    }
    let search = conj.instant_search();
    report.conjugate = Some(conj);

    let spectral = spectral_index_reusing(system, &config.spectral_config(), Some(&search))?;
    report.mu_spec = spectral.mu_spec();
    let checks = &mut report.checks;
    if let (Some(a), Some(l)) = (spectral.mu_spec_inertia, spectral.sfl_l) {
        checks.insert(
            "riesz_sign_relation".into(),
            Check::equal(l, -a, "sfl(L) against -sfl(A)"),
        );
    }
    if config.method == Method::Both {
        let check = match (spectral.mu_spec_inertia, spectral.mu_spec_crossing) {
            (Some(a), Some(c)) => Check::equal(a, c, "inertia against crossing forms"),
            _ => Check {
                passed: true,
                measure: 0.0,
                threshold: 0.0,
                detail: spectral
                    .crossing_failure
                    .clone()
                    .unwrap_or_else(|| "crossing method unavailable".into()),
            },
        };
        checks.insert("method_agreement".into(), check);
    }
    report.spectral = Some(spectral);

    let offaxis = offaxis_invertibility_check(
        system,
        config.offaxis_samples,
        config.seed,
        config.ode_steps,
    )?;
    report.checks.insert(
        "offaxis_invertibility".into(),
        Check {
            passed: offaxis.violations.is_empty(),
            measure: offaxis.min_relative,
            threshold: crate::conjugate::OFFAXIS_RELATIVE_TOL,
            detail: format!(
                "{} samples, {} violations, min |det b_z| = {:e}",
                offaxis.samples,
                offaxis.violations.len(),
                offaxis.min_modulus
            ),
        },
    );
    report.checks.insert(
        "symplectic_defect".into(),
        symplectic_check(
            system,
            config.symplectic_samples,
            config.seed,
            config.ode_steps,
        )?,
    );
    report.checks.insert(
        "integration_by_parts".into(),
        integration_by_parts_check(system, config.ibp_samples, config.seed),
    );

    if config.extended_checks {
        let contour = config.conjugate_config().contour()?;
        let red = clutching_reductions(system, &contour, config.ode_steps)?;
        let spread = [red.det_b_transpose, red.block_triangular]
            .iter()
            .map(|w| (w - red.det_b).abs())
            .max()
            .unwrap_or(0);
        report.checks.insert(
            "clutching_reductions".into(),
            Check {
                passed: spread == 0,
                measure: spread as f64,
                threshold: 0.0,
                detail: format!(
                    "det b: {}, det b^T: {}, block triangular: {}",
                    red.det_b, red.det_b_transpose, red.block_triangular
                ),
            },
        );
        let axioms = axiom_suite(config.seed, DEFAULT_AXIOM_CASES)?;
        let failed: Vec<&str> = axioms
            .iter()
            .filter(|a| !a.passed)
            .map(|a| a.axiom.as_str())
            .collect();
        report.checks.insert(
            "axiom_suite".into(),
            Check {
                passed: failed.is_empty(),
                measure: failed.len() as f64,
                threshold: 0.0,
                detail: if failed.is_empty() {
                    format!("{} axioms passed", axioms.len())
                } else {
                    format!("failed: {}", failed.join(", "))
                },
            },
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Randomized suite

pub const RANDOM_COEFFICIENT_BOUND: f64 = 40.0;
pub const RANDOM_MAX_DEGREE: usize = 3;
pub const MAX_SUITE_COUNT: usize = 200;
pub const MAX_SUITE_DIMENSION: usize = 4;
pub const PERTURBATION: f64 = 1e-4;
pub const PERTURBATION_MARGIN: f64 = 1e-2;

/// A trig-polynomial system of degree at most 3 with symmetric coefficient
/// matrices whose entries are uniform in `[−bound, bound]`.
pub fn random_trig_system(rng: &mut ChaCha8Rng, max_n: usize, bound: f64) -> SystemSpec {
    let n = rng.gen_range(1..=max_n);
    let nu = rng.gen_range(0..=n);
    let degree = rng.gen_range(0..=RANDOM_MAX_DEGREE);
    let symmetric = |rng: &mut ChaCha8Rng| {
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gen_range(-bound..=bound);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    };
    let cos = (0..=degree).map(|_| symmetric(rng)).collect();
    // sin(0·πx) vanishes; its slot is kept so indices line up with cos
    let sin = (0..=degree)
        .map(|k| {
            if k == 0 {
                vec![vec![0.0; n]; n]
            } else {
                symmetric(rng)
            }
        })
        .collect();
    SystemSpec {
        n,
        nu,
        s: ProfileSpec::Trig { cos, sin },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbedIndices {
    pub epsilon: f64,
    pub mu_spec: i64,
    pub mu_con: i64,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomCase {
    pub index: usize,
    pub n: usize,
    pub nu: usize,
    pub system_digest: String,
    pub accepted: bool,
    pub endpoint_margin: Option<f64>,
    pub status: Status,
    pub mu_spec: Option<i64>,
    pub mu_con: Option<i64>,
    pub mu_spec_crossing: Option<i64>,
    pub sfl_l: Option<i64>,
    pub theorem_holds: bool,
    pub failed_checks: Vec<String>,
    pub perturbed: Option<PerturbedIndices>,
    pub message: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct WorstMargins {
    pub min_endpoint_margin: Option<f64>,
    pub max_symplectic_defect: Option<f64>,
    pub min_offaxis_relative: Option<f64>,
    pub max_integration_by_parts: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomSuiteSummary {
    pub count: usize,
    pub max_n: usize,
    pub seed: u64,
    pub accepted: usize,
    pub discarded: usize,
    pub discard_rate: f64,
    pub theorem_agreements: usize,
    pub failures: usize,
    pub crossing_compared: usize,
    pub crossing_agreed: usize,
    pub riesz_agreed: usize,
    pub perturbation_compared: usize,
    pub perturbation_agreed: usize,
    pub worst: WorstMargins,
    pub cases: Vec<RandomCase>,
}

impl RandomSuiteSummary {
    /// Every accepted system verified, with all comparisons agreeing.
    pub fn all_passed(&self) -> bool {
        self.failures == 0
            && self.crossing_agreed == self.crossing_compared
            && self.riesz_agreed == self.accepted
            && self.perturbation_agreed == self.perturbation_compared
    }
}

fn perturbed_indices(
    spec: &SystemSpec,
    config: &RunConfig,
    base: (i64, i64),
) -> Result<PerturbedIndices> {
    let (system, _) = spec.build::<f64>()?;
    let shifted = system.shifted(PERTURBATION);
    let mu_con = conjugate_index(&shifted, &config.conjugate_config())?.mu_con;
    let mu_spec = spectral_index_inertia(&shifted, &config.galerkin_config())?.value;
    Ok(PerturbedIndices {
        epsilon: PERTURBATION,
        mu_spec,
        mu_con,
        agrees: (mu_spec, mu_con) == base,
    })
}

fn min_opt(a: Option<f64>, b: f64) -> Option<f64> {
    Some(a.map_or(b, |a| a.min(b)))
}

fn max_opt(a: Option<f64>, b: f64) -> Option<f64> {
    Some(a.map_or(b, |a| a.max(b)))
}

/// Runs `f` over `items` on all available cores; results keep item order.
fn parallel_map<I: Sync, O: Send>(items: &[I], f: impl Fn(usize, &I) -> O + Sync) -> Vec<O> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len());
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let next = AtomicUsize::new(0);
    let mut done: Vec<(usize, O)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        out.push((i, f(i, item)));
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("suite worker panicked"))
            .collect()
    });
    done.sort_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, o)| o).collect()
}

fn run_case(
    index: usize,
    spec: &SystemSpec,
    config: &RunConfig,
    perturbation_pairs: bool,
) -> Result<(RandomCase, IndexReport)> {
    let report = verify(spec, config)?;
    let spectral = report.spectral.as_ref();
    let mut case = RandomCase {
        index,
        n: spec.n,
        nu: spec.nu,
        system_digest: report.system_digest.clone(),
        accepted: report.status != Status::EndpointConjugate,
        endpoint_margin: report.endpoint.map(|e| e.margin),
        status: report.status,
        mu_spec: report.mu_spec,
        mu_con: report.mu_con,
        mu_spec_crossing: spectral.and_then(|s| s.mu_spec_crossing),
        sfl_l: spectral.and_then(|s| s.sfl_l),
        theorem_holds: report.theorem_holds,
        failed_checks: report
            .checks
            .iter()
            .filter(|(_, c)| !c.passed)
            .map(|(k, _)| k.clone())
            .collect(),
        perturbed: None,
        message: report.message.clone(),
    };
    if let Some(base) = perturbation_base(&case).filter(|_| perturbation_pairs) {
        match perturbed_indices(spec, config, base) {
            Ok(p) => case.perturbed = Some(p),
            Err(e) => case.message = Some(format!("perturbed run failed: {e}")),
        }
    }
    Ok((case, report))
}

/// Indices to compare against the `S + εI` run, for cases that qualify.
fn perturbation_base(case: &RandomCase) -> Option<(i64, i64)> {
    match (case.endpoint_margin, case.mu_spec, case.mu_con) {
        (Some(m), Some(ms), Some(mc))
            if m > PERTURBATION_MARGIN && case.status == Status::Verified =>
        {
            Some((ms, mc))
        }
        _ => None,
    }
}

/// Verifies `count` seeded random trig-polynomial systems; systems whose
/// endpoint is conjugate are discarded. Accepted systems with endpoint
/// margin above [`PERTURBATION_MARGIN`] are also re-run with `S + εI`.
/// Systems are drawn sequentially from the seed and verified concurrently.
pub fn random_suite(
    count: usize,
    max_n: usize,
    seed: u64,
    config: &RunConfig,
) -> Result<RandomSuiteSummary> {
    random_suite_with(count, max_n, seed, config, true)
}

/// [`random_suite`] with the `S + εI` re-runs optional.
pub fn random_suite_with(
    count: usize,
    max_n: usize,
    seed: u64,
    config: &RunConfig,
    perturbation_pairs: bool,
) -> Result<RandomSuiteSummary> {
    if count > MAX_SUITE_COUNT {
        return Err(Error::InvalidConfig(format!(
            "random suite count {count} above {MAX_SUITE_COUNT}"
        )));
    }
    if max_n == 0 || max_n > MAX_SUITE_DIMENSION {
        return Err(Error::InvalidConfig(format!(
            "random suite dimension must be in 1..={MAX_SUITE_DIMENSION}, got {max_n}"
        )));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<SystemSpec> = (0..count)
        .map(|_| random_trig_system(&mut rng, max_n, RANDOM_COEFFICIENT_BOUND))
        .collect();
    let outcomes = parallel_map(&specs, |index, spec| {
        let case_config = RunConfig {
            seed: seed.wrapping_add(index as u64),
            extended_checks: false,
            ..config.clone()
        };
        run_case(index, spec, &case_config, perturbation_pairs)
    });

    let mut summary = RandomSuiteSummary {
        count,
        max_n,
        seed,
        accepted: 0,
        discarded: 0,
        discard_rate: 0.0,
        theorem_agreements: 0,
        failures: 0,
        crossing_compared: 0,
        crossing_agreed: 0,
        riesz_agreed: 0,
        perturbation_compared: 0,
        perturbation_agreed: 0,
        worst: WorstMargins::default(),
        cases: Vec::with_capacity(count),
    };
    for outcome in outcomes {
        let (case, report) = outcome?;
        if !case.accepted {
            summary.discarded += 1;
            summary.cases.push(case);
            continue;
        }
        summary.accepted += 1;
        if case.status == Status::Verified {
            summary.theorem_agreements += 1;
        } else {
            summary.failures += 1;
        }
        if let Some(s) = report.spectral.as_ref() {
            if let (Some(a), Some(c)) = (s.mu_spec_inertia, s.mu_spec_crossing) {
                summary.crossing_compared += 1;
                summary.crossing_agreed += usize::from(a == c);
            }
            if let (Some(a), Some(l)) = (s.mu_spec_inertia, s.sfl_l) {
                summary.riesz_agreed += usize::from(l == -a);
            }
        }
        let w = &mut summary.worst;
        if let Some(m) = case.endpoint_margin {
            w.min_endpoint_margin = min_opt(w.min_endpoint_margin, m);
        }
        if let Some(c) = report.checks.get("symplectic_defect") {
            w.max_symplectic_defect = max_opt(w.max_symplectic_defect, c.measure);
        }
        if let Some(c) = report.checks.get("offaxis_invertibility") {
            w.min_offaxis_relative = min_opt(w.min_offaxis_relative, c.measure);
        }
        if let Some(c) = report.checks.get("integration_by_parts") {
            w.max_integration_by_parts = max_opt(w.max_integration_by_parts, c.measure);
        }
        if perturbation_pairs && perturbation_base(&case).is_some() {
            summary.perturbation_compared += 1;
            summary.perturbation_agreed +=
                usize::from(case.perturbed.as_ref().is_some_and(|p| p.agrees));
        }
        summary.cases.push(case);
    }
    if count > 0 {
        summary.discard_rate = summary.discarded as f64 / count as f64;
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Output

/// Writes `contour.csv`, `scan.csv`, `inertia.csv` and `report.json` into `dir`.
/// Traces that the run did not produce are skipped.
pub fn emit_trace(report: &IndexReport, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if let Some(conj) = &report.conjugate {
        let path = dir.join("contour.csv");
        conj.trace.write_csv_file(&path)?;
        written.push(path.display().to_string());

        let path = dir.join("scan.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["t", "det_b_t", "smallest_singular_value"])?;
        for s in &conj.scan {
            w.write_record(&[s.t.to_string(), s.det.to_string(), s.sigma_min.to_string()])?;
        }
        w.flush()?;
        written.push(path.display().to_string());
    }
    if let Some(spec) = &report.spectral {
        let path = dir.join("inertia.csv");
        std::fs::write(&path, inertia_csv(&spec.inertia_table)?)?;
        written.push(path.display().to_string());
    }
    let path = dir.join("report.json");
    std::fs::write(&path, report.to_json_pretty()? + "\n")?;
    written.push(path.display().to_string());
    Ok(written)
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidConfig(e.to_string()))
}

pub fn inertia_csv(rows: &[InertiaRow]) -> Result<String> {
    csv_string(
        &["N", "n_minus_0", "n_minus_1", "diff"],
        rows.iter()
            .map(|r| {
                vec![
                    r.n_modes.to_string(),
                    r.n_minus_0.to_string(),
                    r.n_minus_1.to_string(),
                    r.diff.to_string(),
                ]
            })
            .collect(),
    )
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per check, preceded by the index summary as pseudo-checks.
pub fn report_csv(report: &IndexReport) -> Result<String> {
    let mut rows = vec![
        vec![
            "mu_spec".into(),
            opt(report.mu_spec),
            String::new(),
            String::new(),
            String::new(),
        ],
        vec![
            "mu_con".into(),
            opt(report.mu_con),
            String::new(),
            String::new(),
            String::new(),
        ],
        vec![
            "theorem_holds".into(),
            report.theorem_holds.to_string(),
            String::new(),
            String::new(),
            String::new(),
        ],
    ];
    for (name, c) in &report.checks {
        rows.push(vec![
            name.clone(),
            c.passed.to_string(),
            c.measure.to_string(),
            c.threshold.to_string(),
            c.detail.clone(),
        ]);
    }
    csv_string(&["name", "value", "measure", "threshold", "detail"], rows)
}

pub fn instants_csv(report: &ConjugateReport<f64>) -> Result<String> {
    csv_string(
        &["t", "multiplicity", "det_residual", "jacobi_residual"],
        report
            .instants
            .iter()
            .map(|i| {
                vec![
                    i.t.to_string(),
                    i.multiplicity.to_string(),
                    i.det_residual.to_string(),
                    i.jacobi_residual.to_string(),
                ]
            })
            .collect(),
    )
}

pub fn suite_csv(summary: &RandomSuiteSummary) -> Result<String> {
    csv_string(
        &[
            "index",
            "n",
            "nu",
            "accepted",
            "endpoint_margin",
            "mu_spec",
            "mu_con",
            "mu_spec_crossing",
            "sfl_L",
            "status",
        ],
        summary
            .cases
            .iter()
            .map(|c| {
                vec![
                    c.index.to_string(),
                    c.n.to_string(),
                    c.nu.to_string(),
                    c.accepted.to_string(),
                    opt(c.endpoint_margin),
                    opt(c.mu_spec),
                    opt(c.mu_con),
                    opt(c.mu_spec_crossing),
                    opt(c.sfl_l),
                    serde_json::to_value(c.status)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                ]
            })
            .collect(),
    )
}

/// Plain-text one-line summary of a report, for logs.
pub fn summary_line(report: &IndexReport) -> String {
    format!(
        "mu_spec = {}, mu_con = {}, theorem_holds = {}, status = {:?}",
        opt(report.mu_spec),
        opt(report.mu_con),
        report.theorem_holds,
        report.status
    )
}
