//! Spectral and conjugate indices of Morse–Sturm systems `J u'' + S_t u = 0`.
//!
//! The conjugate index counts (with sign) the instants `t ∈ (0, 1]` at which
//! the shooting matrix `b_t` is singular, computed as the winding number of
//! `z ↦ det b_z` around `[0, 1]`. The spectral index is the spectral flow of
//! the operator path `A_t = J d²/dx² + S_t` with Dirichlet conditions. The
//! two agree whenever `t = 1` is not a conjugate instant; [`verify`] checks
//! this together with the identities used along the way.
//!
//! Numerical code is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix it to `f64`.

pub mod conjugate;
pub mod error;
pub mod linalg;
pub mod model;
pub mod presets;
pub mod propagator;
pub mod scalar;
pub mod specflow;
pub mod verify;
pub mod winding;

pub use error::{Error, Result};
pub use linalg::{determinant, inertia, Inertia, Matrix};
pub use model::{
    family_s, family_s_dt, validate, ComplexParameter, CurvatureProfile, Family, MorseSturmSystem,
    SignatureMatrix, SystemSpec,
};
pub use propagator::{
    propagate, shooting_matrix, symplectic_defect, PropagatorResult, SymplecticForm,
};
pub use scalar::Real;
pub use specflow::{GalerkinConfig, Method};
pub use verify::{random_suite, random_suite_with, verify, IndexReport, RunConfig, Status};
pub use winding::{chern_of_clutching, winding_number, Contour, WindingTrace};

/// A system over `f64`.
pub type System = MorseSturmSystem<f64>;
pub type Profile = CurvatureProfile<f64>;
pub type Parameter = ComplexParameter<f64>;
pub type Propagation = PropagatorResult<f64>;
pub type RealMatrix = linalg::RealMatrix<f64>;
pub type ComplexMatrix = linalg::ComplexMatrix<f64>;
pub type ConjugateInstant = conjugate::ConjugateInstant<f64>;
pub type ConjugateReport = conjugate::ConjugateReport<f64>;
pub type ConjugateConfig = conjugate::ConjugateConfig<f64>;
pub type CrossingDatum = specflow::CrossingDatum<f64>;
pub type SpectralReport = specflow::SpectralReport<f64>;
pub type SpectralConfig = specflow::SpectralConfig<f64>;
pub type Trace = WindingTrace<f64>;
