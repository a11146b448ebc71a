//! Quantum metrology of absorption and gain with two-mode bright squeezed light.
//!
//! The probe is built by seeding one port of an optical parametric amplifier
//! with a coherent beam and leaving the other in vacuum. After the squeezer,
//! one beam passes through an absorbing (loss `alpha`) or amplifying (gain
//! `G`) medium and the photon statistics of the outputs are used to estimate
//! the medium parameter. The crate provides:
//!
//! - [`gaussian`] — two-mode Gaussian states, squeezer/loss/gain channels,
//!   Bogoliubov coefficient maps, and photon-number moments (exact via
//!   Wick's theorem, or to leading order in the seed intensity);
//! - [`fisher`] — quantum Fisher information and Cramér-Rao bounds;
//! - [`estimation`] — measurement-scheme sensitivities, quantum-advantage
//!   ratios, the sum-signal singularity, and operating-point search;
//! - [`fock`] — a truncated number-basis oracle that validates the Gaussian
//!   machinery by brute force at small photon numbers;
//! - [`cli`] — the command-line front end (reference tables, sweeps,
//!   QFI evaluation, oracle cross-checks).

pub mod cli;
pub mod estimation;
pub mod fisher;
pub mod fock;
pub mod gaussian;

pub use estimation::{Detection, Medium, SchemeSpec, SensitivityReport};
pub use fisher::QfiResult;
pub use gaussian::{BogoliubovMap, GaussianState, MomentResult, PhotonObservable, ProbeConfig};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter out of range: {name} = {value} (requires {constraint})")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("Bogoliubov map violates commutator normalization (residual {residual:.3e})")]
    UnnormalizedMap { residual: f64 },
    #[error("singular operating point: |d<N>/dtheta| = {derivative:.3e} < {threshold:.3e}")]
    SingularOperatingPoint { derivative: f64, threshold: f64 },
    #[error("non-finite derivative at theta = {theta}; reduce the step or move off the boundary")]
    NonFiniteDerivative { theta: f64 },
    #[error("Fisher information must be positive (got {value})")]
    NonPositiveFisher { value: f64 },
    #[error("coherent seed amplitude must be nonzero")]
    ZeroAmplitude,
    #[error("negative radicand {value:.6e} in printed closed form")]
    NegativeRadicand { value: f64 },
    #[error("no printed closed form for this scheme")]
    NoClosedForm,
    #[error("truncation tail mass {mass:.3e} exceeds {limit:.3e} at cutoff {cutoff}")]
    TailMass {
        mass: f64,
        limit: f64,
        cutoff: usize,
    },
    #[error("finite-difference step {step} outside [{min}, {max}]")]
    StepOutOfRange { step: f64, min: f64, max: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
