//! Seeded random suite, including the `S + εI` perturbation pairs.

use morse_index::{random_suite, RunConfig};

#[test]
fn empty_suite() {
    let s = random_suite(0, 2, 1, &RunConfig::default()).unwrap();
    assert_eq!((s.count, s.accepted, s.discarded), (0, 0, 0));
    assert!(s.cases.is_empty() && s.all_passed());
}

#[test]
fn limits_are_enforced() {
    assert!(random_suite(201, 2, 1, &RunConfig::default()).is_err());
    assert!(random_suite(1, 5, 1, &RunConfig::default()).is_err());
    assert!(random_suite(1, 0, 1, &RunConfig::default()).is_err());
}

#[test]
fn small_systems_agree_and_survive_perturbation() {
    let config = RunConfig {
        offaxis_samples: 32,
        ..RunConfig::default()
    };
    let s = random_suite(12, 2, 99, &config).unwrap();
    assert_eq!(s.accepted + s.discarded, 12);
    assert!(s.perturbation_compared > 0);
    assert!(s.all_passed(), "{:#?}", s.cases);
    for c in s.cases.iter().filter(|c| c.accepted) {
        assert_eq!(c.mu_spec, c.mu_con, "case {}", c.index);
        if let Some(p) = &c.perturbed {
            assert_eq!(p.epsilon, 1e-4);
            assert_eq!((Some(p.mu_spec), Some(p.mu_con)), (c.mu_spec, c.mu_con));
        }
    }
    // same seed, same summary
    assert_eq!(random_suite(12, 2, 99, &config).unwrap(), s);
}
