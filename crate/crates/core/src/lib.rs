//! Exact Fock-space engine for two-mode and multi-mode bosonic entanglement tests,
//! spin squeezing and two-mode interferometry.

// `!(x >= 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fock;
pub mod interferometer;
pub mod registry;
pub mod serial;
pub mod spin;
pub mod states;
pub mod tol;
pub mod witness;

pub use error::{Error, Result};
pub use fock::{
    covariance, expect_product, expectation, expectation_real, mix, product_into, tensor, variance, FockBasis, Ladder,
    Operator, QuantumState, SsrFlags, StateData,
};
pub use interferometer::{
    evolve, evolve_sequence, predict_mean, predict_variance, sample_measurements, MeasurementRecord, PulseSpec,
    SequenceElement,
};
pub use num_complex::Complex64;
pub use registry::{make_state, Descriptor};
pub use serial::{state_from_json, state_to_json, StateFile};
pub use spin::{
    evaluate_frame, inplane_operators, principal_frame, quadrature_set, rotate_modes, EulerAngles, InPlaneOperators,
    ModeRotation, PrincipalFrame, QuadratureSet, SpinFrame, SpinOperators,
};
pub use states::Structure;
pub use tol::Tolerances;
pub use witness::{run_battery, BatteryConfig, BatteryResult, Verdict, WitnessReport};
