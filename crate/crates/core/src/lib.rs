//! Behavioral simulator for an adaptive-quantization-rate compressive-sensing
//! ADC front end.
//!
//! A low-barrier MTJ stochastic oscillator ([`device`]) is latched and gated
//! into a non-uniform sampling clock ([`clockgen`]). The sampling probability
//! follows the sparsity rate estimated from previous frames ([`sre`]); frames
//! of spectrally sparse signals ([`signals`]) are reconstructed with OMP or
//! CoSaMP ([`recovery`]) and the whole loop is driven by [`pipeline`].
//! [`scaling`] holds the technology-normalized power/area comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clockgen;
pub mod device;
pub mod error;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod recovery;
pub mod scaling;
pub mod signals;
pub mod sre;
pub mod transform;

pub use clockgen::{dff_sample, generate_aclk, nand_gate, AClkTrace, ClockConfig};
pub use device::{
    characterize, drain_voltage, mtj_conductance, output_probability, step, transistor_conductance, DeviceParams,
    DeviceState, MzMode, StaircaseProtocol, StochasticOscillator,
};
pub use error::{Error, Result};
pub use pipeline::{run_experiment, run_frame, ExperimentConfig, SamplingMode, SparsityBudget, TrialReport};
pub use recovery::{
    build_measurement_operator, cosamp, normalized_error, omp, MeasurementOperator, RecoveryResult, Solver,
};
pub use scaling::{area_norm, power_norm, table_report, transistor_count, AqrNetlist, ScalingEntry};
pub use signals::{generate_sparse_signal, sample_at, MeasurementSet, SignalOptions, SparseSignal};
pub use sre::{
    calibrate, probability_to_vsr, rate_to_probability, sre_update, Calibration, RatePolicy, SreParams, SreState,
};
