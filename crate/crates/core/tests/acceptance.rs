//! Acceptance run: one test per criterion, each printing a PASS/FAIL line.
//!
//! `cargo test --release -p morse-index --test acceptance -- --nocapture`

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use morse_index::conjugate::{conjugate_index, offaxis_invertibility_check, ConjugateConfig};
use morse_index::presets::{all_presets, preset};
use morse_index::specflow::{
    axiom_suite, inertia_row, path_flow_inertia, path_flow_winding, spectral_index, SpectralConfig,
    SymmetricPath,
};
use morse_index::verify::{clutching_reductions, integration_by_parts_check, RandomSuiteSummary};
use morse_index::{
    propagate, random_suite_with, verify, Family, GalerkinConfig, IndexReport, Method,
    MorseSturmSystem, Parameter, RunConfig, Status,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240611;
const STEPS: usize = 2000;

/// Expected index of each preset.
const EXPECTED: [(&str, i64); 4] = [
    ("flat", 0),
    ("riemannian-const", 2),
    ("multiplicity-2", 4),
    ("lorentz-split", 0),
];

fn report(criterion: u32, title: &str, ok: bool, detail: String, started: Instant) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!(
        "{verdict} [{criterion}] {title}: {detail} ({:.1} s)",
        started.elapsed().as_secs_f64()
    );
    assert!(ok, "criterion {criterion} ({title}) failed: {detail}");
}

fn systems() -> Vec<(&'static str, MorseSturmSystem<f64>)> {
    all_presets()
        .into_iter()
        .map(|(name, spec)| (name, spec.build::<f64>().unwrap().0))
        .collect()
}

fn preset_reports() -> &'static Vec<(&'static str, IndexReport)> {
    static REPORTS: OnceLock<Vec<(&'static str, IndexReport)>> = OnceLock::new();
    REPORTS.get_or_init(|| {
        let config = RunConfig {
            seed: SEED,
            extended_checks: false,
            ..RunConfig::default()
        };
        all_presets()
            .into_iter()
            .map(|(name, spec)| (name, verify(&spec, &config).unwrap()))
            .collect()
    })
}

/// 50 systems with `n ≤ 4`; per-system diagnostics other than the indices
/// are sampled lightly here since they have their own criteria on presets.
fn suite() -> &'static RandomSuiteSummary {
    static SUITE: OnceLock<RandomSuiteSummary> = OnceLock::new();
    SUITE.get_or_init(|| {
        let config = RunConfig {
            offaxis_samples: 16,
            symplectic_samples: 2,
            ibp_samples: 1,
            ..RunConfig::default()
        };
        random_suite_with(50, 4, SEED, &config, false).unwrap()
    })
}

#[test]
fn presets_have_equal_indices() {
    let started = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for (name, r) in preset_reports() {
        let expected = EXPECTED.iter().find(|(n, _)| n == name).unwrap().1;
        let good = r.status == Status::Verified
            && r.theorem_holds
            && r.mu_spec == Some(expected)
            && r.mu_con == Some(expected);
        ok &= good;
        details.push(format!("{name} {:?}/{:?}", r.mu_spec, r.mu_con));
    }
    report(
        1,
        "presets mu_spec = mu_con",
        ok,
        details.join(", "),
        started,
    );
}

#[test]
fn random_systems_have_equal_indices() {
    let started = Instant::now();
    let s = suite();
    let agree = s
        .cases
        .iter()
        .filter(|c| c.accepted)
        .all(|c| c.theorem_holds && c.mu_spec.is_some() && c.mu_spec == c.mu_con);
    let nus_seen = s.cases.iter().filter(|c| c.nu > 0 && c.nu < c.n).count();
    let ok = agree
        && s.failures == 0
        && s.accepted > 0
        && s.crossing_agreed == s.crossing_compared
        && nus_seen > 0;
    report(
        2,
        "random systems mu_spec = mu_con",
        ok,
        format!(
            "{}/{} accepted ({} discarded), {} verified, crossing forms {}/{} regular cases agree",
            s.accepted,
            s.count,
            s.discarded,
            s.theorem_agreements,
            s.crossing_agreed,
            s.crossing_compared
        ),
        started,
    );
}

#[test]
fn riemannian_index_is_sum_of_multiplicities() {
    let started = Instant::now();
    let mut ok = true;
    let mut cases = 0;
    for (_, r) in preset_reports().iter().filter(|(_, r)| r.nu == 0) {
        let conj = r.conjugate.as_ref().unwrap();
        ok &= conj.mu_con == conj.classical_sum as i64;
        cases += 1;
    }
    for c in suite().cases.iter().filter(|c| c.accepted && c.nu == 0) {
        ok &= !c.failed_checks.iter().any(|k| k == "classical_sum") && c.theorem_holds;
        cases += 1;
    }
    let scalar = &preset_reports()
        .iter()
        .find(|(n, _)| *n == "riemannian-const")
        .unwrap()
        .1;
    let instants: Vec<f64> = scalar
        .conjugate
        .as_ref()
        .unwrap()
        .instants
        .iter()
        .map(|i| i.t)
        .collect();
    let located =
        instants.len() == 2 && (instants[0] - 0.4).abs() < 1e-8 && (instants[1] - 0.8).abs() < 1e-8;
    report(
        3,
        "Riemannian mu_con = sum of multiplicities",
        ok && located,
        format!("{cases} cases; scalar instants {instants:?}"),
        started,
    );
}

#[test]
fn riesz_flow_is_minus_strong_flow() {
    let started = Instant::now();
    let mut ok = true;
    for (_, r) in preset_reports() {
        let s = r.spectral.as_ref().unwrap();
        ok &= s.sfl_l.is_some() && s.sfl_l == s.mu_spec_inertia.map(|a| -a);
    }
    let s = suite();
    ok &= s.riesz_agreed == s.accepted;
    let mut worst = 0.0f64;
    for (_, system) in systems() {
        let check = integration_by_parts_check(&system, 5, SEED);
        worst = worst.max(check.measure);
    }
    ok &= worst < 1e-8;
    report(
        4,
        "sfl(L) = -sfl(A) and weak/strong identity",
        ok,
        format!(
            "random suite {}/{}, largest identity residual {worst:e}",
            s.riesz_agreed, s.accepted
        ),
        started,
    );
}

#[test]
fn shooting_determinant_vanishes_nowhere_off_axis() {
    let started = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    for (name, system) in systems() {
        let r = offaxis_invertibility_check(&system, 200, SEED, STEPS).unwrap();
        ok &= r.samples == 200 && r.violations.is_empty();
        details.push(format!("{name} min rel {:.2e}", r.min_relative));
    }
    report(5, "off-axis invertibility", ok, details.join(", "), started);
}

fn scalar_rk4_error(steps: usize) -> f64 {
    let kappa = (2.5 * PI).powi(2);
    let system = MorseSturmSystem::const_diag(0, vec![kappa]).unwrap();
    let (t, s) = (0.9, 0.3);
    let w = Complex64::new(t * t * kappa, s).sqrt();
    let b = propagate(&system, Parameter::new(t, s), steps)
        .unwrap()
        .b_end[(0, 0)];
    (b - w.sin() / w).norm()
}

#[test]
fn propagation_is_symplectic() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for (_, system) in systems() {
        for _ in 0..20 {
            let z = Parameter::new(rng.gen_range(-0.25..=1.25), rng.gen_range(-1.0..=1.0));
            worst = worst.max(propagate(&system, z, STEPS).unwrap().symplectic_defect);
        }
    }
    let factor = scalar_rk4_error(100) / scalar_rk4_error(200);
    let ok = worst < 1e-8 && (14.0..=18.0).contains(&factor);
    report(
        6,
        "symplectic propagation",
        ok,
        format!("max defect {worst:e}, RK4 factor {factor:.2}"),
        started,
    );
}

#[test]
fn clutching_reductions_agree() {
    let started = Instant::now();
    let contour = ConjugateConfig::<f64>::default().contour().unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for (name, system) in systems() {
        let r = clutching_reductions(&system, &contour, STEPS).unwrap();
        ok &= r.det_b_transpose == r.det_b && r.block_triangular == r.det_b;
        details.push(format!(
            "{name} {}/{}/{}",
            r.det_b, r.det_b_transpose, r.block_triangular
        ));
    }
    report(7, "clutching reductions", ok, details.join(", "), started);
}

#[test]
fn spectral_flow_axioms_hold() {
    let started = Instant::now();
    let outcomes = axiom_suite(SEED, 20).unwrap();
    let arctan = SymmetricPath::arctan();
    let normalization = (
        path_flow_inertia(&arctan).unwrap(),
        path_flow_winding(&arctan).unwrap(),
    );
    let constant = SymmetricPath::constant(morse_index::Matrix::from_vec(
        2,
        2,
        vec![1.0, 0.0, 0.0, -3.0],
    ));
    let constant_flow = path_flow_inertia(&constant).unwrap();
    let ok = outcomes.iter().all(|o| o.passed)
        && outcomes.len() >= 5
        && normalization == (1, 1)
        && constant_flow == 0;
    let names: Vec<String> = outcomes
        .iter()
        .map(|o| format!("{} {}", o.axiom, if o.passed { "ok" } else { "failed" }))
        .collect();
    report(
        8,
        "spectral flow axioms",
        ok,
        format!("{}; arctan flow {normalization:?}", names.join(", ")),
        started,
    );
}

#[test]
fn indices_are_insensitive_to_discretization() {
    let started = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    for (name, system) in systems() {
        let heights: Vec<i64> = [0.1, 0.25, 0.5, 1.0]
            .iter()
            .map(|&h| {
                let config = ConjugateConfig {
                    contour_height: h,
                    ..ConjugateConfig::default()
                };
                conjugate_index(&system, &config).unwrap().mu_con
            })
            .collect();
        let family = Family::new(&system);
        let galerkin = GalerkinConfig::default();
        let diffs: Vec<i64> = [64, 128, 256]
            .iter()
            .map(|&n| inertia_row(&family, n, &galerkin).unwrap().diff)
            .collect();
        let deltas: Vec<Option<i64>> = [0.0, 1e-4, 1e-3]
            .iter()
            .map(|&delta| {
                let config = SpectralConfig {
                    delta,
                    method: Method::Both,
                    ..SpectralConfig::default()
                };
                let r = spectral_index(&system, &config).unwrap();
                r.mu_spec_crossing.filter(|&c| Some(c) == r.mu_spec_inertia)
            })
            .collect();
        let same = |v: &[i64]| v.windows(2).all(|w| w[0] == w[1]);
        ok &=
            same(&heights) && same(&diffs) && deltas.iter().all(|d| d.is_some() && *d == deltas[0]);
        details.push(format!("{name} h {heights:?} N {diffs:?} delta {deltas:?}"));
    }
    report(9, "robustness", ok, details.join("; "), started);
}

#[test]
fn preset_names_resolve() {
    for (name, _) in EXPECTED {
        preset(name).unwrap();
    }
}
