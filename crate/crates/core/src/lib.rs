//! Periodic convolutional networks on the torus.
//!
//! The crate has two halves. The constructive half ([`circulant`],
//! [`factorization`], [`ridge`], [`network`]) builds circular-convolution
//! networks that approximate a ridge function `φ(a·x)` along an arbitrary
//! direction. The obstruction half ([`lattice`], [`spectral`]) computes the
//! integer frequency lattice a network can populate and the exact `L²` floor
//! for ridge directions that fall outside it. [`experiment`] drives both and
//! writes CSV/JSON/`.dat` results.
//!
//! Sample-grid evaluation runs on rayon when the default `parallel` feature is
//! enabled and falls back to plain iterators otherwise; see [`par`].

pub mod circulant;
pub mod error;
pub mod experiment;
pub mod factorization;
pub mod lattice;
pub mod network;
pub mod par;
pub mod ridge;
pub mod spectral;

pub use circulant::{
    as_matrix, circular_convolve, compose_filters, dft_multipliers, CirculantMatrix,
    DftMultipliers, Filter,
};
pub use error::{Error, Result};
pub use factorization::{factorize, reconvolve, FactorizationResult};
pub use lattice::{lattice_from_supports, FrequencyLattice};
pub use network::{
    build_ridge_network, shift_margin, BiasVector, CoordinateBox, ErrorReport, PeriodicCnn,
    RidgeNetwork, RidgeSpec, SamplingPlan,
};
pub use ridge::{
    build_knots, check_order, flat_sum_eval, nested_eval, KnotApproximation, KnotPair, ProfileKind,
    ProfileSpec, ReluKnotSequence,
};
pub use spectral::{
    empirical_spectrum, lower_bound, ridge_spectrum, verify_relu_closure, ClosureReport,
    ModeFeatures, SpectralVector, TorusRidge,
};

/// Default absolute tolerance for floating-point comparisons.
pub const TOLERANCE: f64 = 1e-10;
